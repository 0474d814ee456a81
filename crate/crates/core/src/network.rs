//! Spread graph, initial condition, model assumptions and infection distances.
//!
//! Nodes are 0-based inside the library. Every serialized or printed node id
//! (instance files, CSV, CLI output, violation messages) is 1-based.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result, ValidationReport};

/// Tolerance for `s_i[0] + x_i[0] = 1`.
const MASS_TOL: f64 = 1e-12;

/// Directed edge `from -> to` carrying weight `a[to][from]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Directed weighted spread graph with self-loops and sampling parameter `h`.
///
/// `weights` is dense and row-major: `weight(i, j)` is `a_ij`, the weight with
/// which node `j` infects node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicNetwork {
    n: usize,
    h: f64,
    edges: Vec<Edge>,
    weights: Vec<f64>,
    /// Closed in-neighbourhood `N̄_i` (in-neighbours plus `i`), sorted.
    closed_in: Vec<Vec<usize>>,
    /// Open in-neighbourhood `N_i`, self excluded, sorted.
    open_in: Vec<Vec<usize>>,
    /// Out-neighbours without self-loops, for distance search.
    out: Vec<Vec<usize>>,
}

impl EpidemicNetwork {
    /// Builds a network from 0-based edges. Structural problems (bad indices,
    /// duplicate or non-finite edges) are rejected here; weight positivity and
    /// the step-size inequalities are checked by [`validate`].
    pub fn new(n: usize, edges: Vec<Edge>, h: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("network has no nodes".into()));
        }
        if !h.is_finite() {
            return Err(Error::InvalidInstance(format!("sampling parameter h = {h}")));
        }
        let mut weights = vec![0.0; n * n];
        let mut present = vec![false; n * n];
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidInstance(format!(
                    "edge {} -> {} references a node outside 1..={n}",
                    e.from + 1,
                    e.to + 1
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "edge {} -> {} has weight {}",
                    e.from + 1,
                    e.to + 1,
                    e.weight
                )));
            }
            let slot = e.to * n + e.from;
            if present[slot] {
                return Err(Error::InvalidInstance(format!(
                    "duplicate edge {} -> {}",
                    e.from + 1,
                    e.to + 1
                )));
            }
            present[slot] = true;
            weights[slot] = e.weight;
        }

        let mut open_in = vec![Vec::new(); n];
        let mut out = vec![Vec::new(); n];
        for e in &edges {
            if e.from != e.to {
                open_in[e.to].push(e.from);
                out[e.from].push(e.to);
            }
        }
        for list in open_in.iter_mut().chain(out.iter_mut()) {
            list.sort_unstable();
        }
        let closed_in = open_in
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let mut closed = nbrs.clone();
                closed.push(i);
                closed.sort_unstable();
                closed
            })
            .collect();

        Ok(Self {
            n,
            h,
            edges,
            weights,
            closed_in,
            open_in,
            out,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `a_ij`: weight of the edge `j -> i`, zero when absent.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// `N_i`: in-neighbours of `i`, excluding `i` itself.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.open_in[i]
    }

    /// `N̄_i = N_i ∪ {i}`.
    pub fn closed_in_neighbors(&self, i: usize) -> &[usize] {
        &self.closed_in[i]
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.weight(i, i) > 0.0
    }

    /// `Σ_{j∈N̄_i} a_ij`.
    pub fn closed_row_sum(&self, i: usize) -> f64 {
        self.closed_in[i].iter().map(|&j| self.weight(i, j)).sum()
    }

    /// `Σ_{j∈N̄_i} a_ij v_j`.
    #[inline]
    pub fn weighted_inflow(&self, i: usize, v: &[f64]) -> f64 {
        let row = &self.weights[i * self.n..(i + 1) * self.n];
        self.closed_in[i].iter().map(|&j| row[j] * v[j]).sum()
    }

    /// Same network with every edge weight replaced by `f(edge)`.
    pub fn with_weights(&self, mut f: impl FnMut(&Edge) -> f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                weight: f(e),
                ..*e
            })
            .collect();
        Self::new(self.n, edges, self.h)
    }
}

/// Per-node initial proportions `s[0]`, `x[0]`, `r[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub s0: Vec<f64>,
    pub x0: Vec<f64>,
    pub r0: Vec<f64>,
}

impl InitialCondition {
    /// `s0 = 1 - x0`, `r0 = 0`.
    pub fn from_infected(x0: Vec<f64>) -> Self {
        let s0 = x0.iter().map(|x| 1.0 - x).collect();
        let r0 = vec![0.0; x0.len()];
        Self { s0, x0, r0 }
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }
}

/// A single failed model assumption. Node ids in messages are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch { field: &'static str, len: usize, n: usize },
    SusceptibleRange { node: usize, value: f64 },
    InfectedRange { node: usize, value: f64 },
    RecoveredNonzero { node: usize, value: f64 },
    MassBalance { node: usize, value: f64 },
    SamplingNotPositive { value: f64 },
    RateNotPositive { name: &'static str, value: f64 },
    RecoveryStep { value: f64 },
    InfectionStep { node: usize, value: f64 },
    EdgeWeightNotPositive { from: usize, to: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::LengthMismatch { field, len, n } => {
                write!(f, "{field} has length {len}, expected {n}")
            }
            Violation::SusceptibleRange { node, value } => {
                write!(f, "s_i[0] in (0,1] fails at node {}: {value}", node + 1)
            }
            Violation::InfectedRange { node, value } => {
                write!(f, "x_i[0] in [0,1) fails at node {}: {value}", node + 1)
            }
            Violation::RecoveredNonzero { node, value } => {
                write!(f, "r_i[0]=0 fails at node {}: {value}", node + 1)
            }
            Violation::MassBalance { node, value } => {
                write!(f, "s_i[0]+x_i[0]=1 fails at node {}: {value}", node + 1)
            }
            Violation::SamplingNotPositive { value } => write!(f, "h>0 fails: h = {value}"),
            Violation::RateNotPositive { name, value } => {
                write!(f, "{name}>0 fails: {name} = {value}")
            }
            Violation::RecoveryStep { value } => write!(f, "hδ<1 fails: hδ = {value}"),
            Violation::InfectionStep { node, value } => write!(
                f,
                "hβΣa_ij<1 fails at node {}: hβΣa_ij = {value}",
                node + 1
            ),
            Violation::EdgeWeightNotPositive { from, to, value } => write!(
                f,
                "off-diagonal weight > 0 fails on edge {} -> {}: {value}",
                from + 1,
                to + 1
            ),
        }
    }
}

/// Checks the initial-condition assumption for `init` and the parameter
/// assumption for every `(β, δ)` in `[0, beta_max] × [0, delta_max]`.
///
/// The box check reduces to the corner `(beta_max, delta_max)` because both
/// step-size inequalities are monotone in the rates.
pub fn validate(
    network: &EpidemicNetwork,
    init: &InitialCondition,
    beta_max: f64,
    delta_max: f64,
) -> std::result::Result<(), ValidationReport> {
    check_assumptions(network, init, beta_max, delta_max, true)
}

/// Same checks as [`validate`] but for one concrete rate pair; zero rates are
/// admissible here since the recursion is well defined for them.
// Negated comparisons also reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn check_assumptions(
    network: &EpidemicNetwork,
    init: &InitialCondition,
    beta_max: f64,
    delta_max: f64,
    rates_positive: bool,
) -> std::result::Result<(), ValidationReport> {
    let n = network.n();
    let mut violations = Vec::new();

    for (field, v) in [("s0", &init.s0), ("x0", &init.x0), ("r0", &init.r0)] {
        if v.len() != n {
            violations.push(Violation::LengthMismatch {
                field,
                len: v.len(),
                n,
            });
        }
    }
    if violations.is_empty() {
        for i in 0..n {
            let (s, x, r) = (init.s0[i], init.x0[i], init.r0[i]);
            if !(s > 0.0 && s <= 1.0) {
                violations.push(Violation::SusceptibleRange { node: i, value: s });
            }
            if !(0.0..1.0).contains(&x) {
                violations.push(Violation::InfectedRange { node: i, value: x });
            }
            if r != 0.0 {
                violations.push(Violation::RecoveredNonzero { node: i, value: r });
            }
            if (s + x - 1.0).abs() > MASS_TOL {
                violations.push(Violation::MassBalance {
                    node: i,
                    value: s + x,
                });
            }
        }
    }

    let h = network.h();
    if !(h > 0.0) {
        violations.push(Violation::SamplingNotPositive { value: h });
    }
    for (name, value) in [("beta_max", beta_max), ("delta_max", delta_max)] {
        let ok = if rates_positive { value > 0.0 } else { value >= 0.0 };
        if !ok || !value.is_finite() {
            violations.push(Violation::RateNotPositive { name, value });
        }
    }
    if !(h * delta_max < 1.0) {
        violations.push(Violation::RecoveryStep {
            value: h * delta_max,
        });
    }
    for i in 0..n {
        let value = h * beta_max * network.closed_row_sum(i);
        if !(value < 1.0) {
            violations.push(Violation::InfectionStep { node: i, value });
        }
    }
    for e in network.edges() {
        if e.from != e.to && !(e.weight > 0.0) {
            violations.push(Violation::EdgeWeightNotPositive {
                from: e.from,
                to: e.to,
                value: e.weight,
            });
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(ValidationReport { violations })
    }
}

/// Infection distances and the node classes derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    /// `S_I` membership: `x_i[0] > 0`.
    infected: Vec<bool>,
    /// `d_i`; `None` is `+∞`.
    distance: Vec<Option<usize>>,
    /// `min{d_j : j ∈ N_i}`; `None` when `N_i` is empty or all distances are infinite.
    min_neighbor_distance: Vec<Option<usize>>,
    /// `S_I′ = {i ∈ S_I : a_ii > 0}`.
    seeded_self_loop: Vec<bool>,
    /// `S′ = {i ∉ S_I′ : N_i ≠ ∅, min{d_j : j ∈ N_i} < ∞}`.
    reachable_neighbor: Vec<bool>,
}

impl DistanceProfile {
    pub fn n(&self) -> usize {
        self.distance.len()
    }

    pub fn is_initially_infected(&self, i: usize) -> bool {
        self.infected[i]
    }

    /// `d_i`, `None` meaning no path from any initially infected node.
    pub fn distance(&self, i: usize) -> Option<usize> {
        self.distance[i]
    }

    pub fn distances(&self) -> &[Option<usize>] {
        &self.distance
    }

    pub fn min_neighbor_distance(&self, i: usize) -> Option<usize> {
        self.min_neighbor_distance[i]
    }

    pub fn in_seeded_self_loop(&self, i: usize) -> bool {
        self.seeded_self_loop[i]
    }

    pub fn in_reachable_neighbor(&self, i: usize) -> bool {
        self.reachable_neighbor[i]
    }

    /// `S_I` as a sorted node list.
    pub fn infected_set(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.infected[i]).collect()
    }

    /// `S_H` as a sorted node list.
    pub fn healthy_set(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.infected[i]).collect()
    }
}

/// Multi-source BFS from `S_I` along directed edges; self-loops are ignored.
pub fn distance_profile(network: &EpidemicNetwork, init: &InitialCondition) -> DistanceProfile {
    let infected: Vec<bool> = init.x0.iter().map(|&x| x > 0.0).collect();
    profile_from_infected(network, &infected)
}

/// Distance profile when only the initially infected set is known.
pub fn profile_from_infected(network: &EpidemicNetwork, infected: &[bool]) -> DistanceProfile {
    let n = network.n();
    assert_eq!(infected.len(), n, "infected mask length must equal node count");

    let mut distance = vec![None; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if infected[i] {
            distance[i] = Some(0);
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        let du = distance[u].expect("queued nodes have a distance");
        for &v in network.out_neighbors(u) {
            if distance[v].is_none() {
                distance[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }

    let min_neighbor_distance: Vec<Option<usize>> = (0..n)
        .map(|i| {
            network
                .in_neighbors(i)
                .iter()
                .filter_map(|&j| distance[j])
                .min()
        })
        .collect();
    let seeded_self_loop: Vec<bool> = (0..n)
        .map(|i| infected[i] && network.has_self_loop(i))
        .collect();
    let reachable_neighbor = (0..n)
        .map(|i| !seeded_self_loop[i] && min_neighbor_distance[i].is_some())
        .collect();

    DistanceProfile {
        infected: infected.to_vec(),
        distance,
        min_neighbor_distance,
        seeded_self_loop,
        reachable_neighbor,
    }
}
