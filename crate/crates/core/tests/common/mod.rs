//! Shared random instances and independent reference computations.
#![allow(dead_code)]

use episel::bayes::BetaPrior;
use episel::network::Edge;
use episel::pems::PemsInstance;
use episel::{EpidemicNetwork, InitialCondition, Theta};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph on `n` nodes whose weights satisfy the step-size
/// assumptions for every rate up to `theta_max`, with at least one seed.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, theta_max: Theta) -> (EpidemicNetwork, InitialCondition) {
    let h = 0.1;
    let p_edge = rng.random_range(0.1..0.6);
    let mut pairs = Vec::new();
    for to in 0..n {
        for from in 0..n {
            let p = if from == to { 0.5 } else { p_edge };
            if rng.random_bool(p) {
                pairs.push((from, to, rng.random_range(0.2..1.0)));
            }
        }
    }
    let mut rows = vec![0.0; n];
    for &(_, to, w) in &pairs {
        rows[to] += w;
    }
    let margin = rng.random_range(0.3..0.95);
    let worst = rows.iter().copied().fold(0.0, f64::max);
    let scale = if worst > 0.0 { margin / (h * theta_max.beta * worst) } else { 1.0 };
    let edges = pairs
        .into_iter()
        .map(|(from, to, w)| Edge { from, to, weight: w * scale })
        .collect();
    let net = EpidemicNetwork::new(n, edges, h).unwrap();

    let mut x0: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.3) { rng.random_range(0.01..0.2) } else { 0.0 })
        .collect();
    if x0.iter().all(|&x| x == 0.0) {
        x0[rng.random_range(0..n)] = 0.05;
    }
    (net, InitialCondition::from_infected(x0))
}

/// Shortest hop count from an initially infected node to each node over
/// simple paths enumerated exhaustively; self-loops never shorten a path.
pub fn distances_by_paths(net: &EpidemicNetwork, x0: &[f64]) -> Vec<Option<usize>> {
    let n = net.n();
    let mut best = vec![None; n];
    fn walk(net: &EpidemicNetwork, node: usize, len: usize, seen: &mut Vec<bool>, best: &mut [Option<usize>]) {
        if best[node].is_none_or(|b| len < b) {
            best[node] = Some(len);
        }
        for e in net.edges() {
            if e.from == node && e.to != node && !seen[e.to] {
                seen[e.to] = true;
                walk(net, e.to, len + 1, seen, best);
                seen[e.to] = false;
            }
        }
    }
    for s in (0..n).filter(|&i| x0[i] > 0.0) {
        let mut seen = vec![false; n];
        seen[s] = true;
        walk(net, s, 0, &mut seen, &mut best);
    }
    best
}

/// A random instance whose full ground set has at most `max_ground` elements.
pub fn tiny_instance(seed: u64, max_ground: u32) -> PemsInstance {
    let mut rng = rng(seed);
    let beta_prior = BetaPrior::new(6.0, 3.0, 3.0, 7.0).unwrap();
    let delta_prior = BetaPrior::new(3.0, 4.0, 1.0, 4.0).unwrap();
    let n = rng.random_range(2..=3usize);
    let (network, init) = random_model(&mut rng, n, Theta::new(beta_prior.hi, delta_prior.hi));
    let t = rng.random_range(2..=5usize);
    let cost_x: Vec<f64> = (0..n).map(|_| rng.random_range(1..=3u32) as f64).collect();
    let cost_r: Vec<f64> = (0..n).map(|_| rng.random_range(1..=3u32) as f64).collect();
    let mut zeta = vec![1u32; n];
    let mut eta = vec![1u32; n];
    let mut left = max_ground - 2 * n as u32;
    for i in 0..n {
        for cap in [&mut zeta[i], &mut eta[i]] {
            let extra = rng.random_range(0..=1u32).min(left);
            *cap += extra;
            left -= extra;
        }
    }
    let inst = PemsInstance {
        network,
        init,
        t1: t,
        t2: t,
        budget: 4.0,
        cost_x,
        cost_r,
        zeta,
        eta,
        nx: (0..n).map(|_| rng.random_range(20..200u64)).collect(),
        nr: (0..n).map(|_| rng.random_range(20..200u64)).collect(),
        population: vec![1000; n],
        beta_prior,
        delta_prior,
    };
    inst.check().unwrap();
    inst
}
