//! Exact-measurement selection: candidate set, equation index sets, the
//! pairwise minimum-cost strategy and numerical identification of `θ`.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, state_is_zero, StateKind, Theta};
use crate::error::{Error, Result};
use crate::measurement::MeasurementId;
use crate::network::{check_assumptions, distance_profile, DistanceProfile, EpidemicNetwork, InitialCondition};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Relative tolerance under which two pair costs count as tied.
const TIE_TOL: f64 = 1e-12;

/// Problem data for the exact-measurement setting.
#[derive(Debug, Clone)]
pub struct PimsInstance {
    network: EpidemicNetwork,
    init: InitialCondition,
    profile: DistanceProfile,
    t1: usize,
    t2: usize,
    /// Indexed by `(k - t1) * n + i`.
    cost_x: Vec<Option<f64>>,
    cost_r: Vec<Option<f64>>,
}

impl PimsInstance {
    /// Costs are `(k, i, cost)` triples with 0-based `i`. Every candidate
    /// measurement needs a cost; costs of non-candidates may be given and are
    /// ignored.
    pub fn new(
        network: EpidemicNetwork,
        init: InitialCondition,
        t1: usize,
        t2: usize,
        cost_x: &[(usize, usize, f64)],
        cost_r: &[(usize, usize, f64)],
    ) -> Result<Self> {
        if t1 >= t2 {
            return Err(Error::InvalidInstance(format!("need t1 < t2, got t1 = {t1}, t2 = {t2}")));
        }
        check_assumptions(&network, &init, 0.0, 0.0, false)?;
        let n = network.n();
        let slots = (t2 - t1 + 1) * n;
        let fill = |triples: &[(usize, usize, f64)], kind: StateKind| -> Result<Vec<Option<f64>>> {
            let mut table = vec![None; slots];
            for &(k, i, c) in triples {
                let id = MeasurementId::new(i, k, kind);
                if i >= n || k < t1 || k > t2 {
                    return Err(Error::InvalidInstance(format!("cost given for {id} outside the window")));
                }
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidInstance(format!("cost of {id} must be finite and nonnegative, got {c}")));
                }
                let slot = &mut table[(k - t1) * n + i];
                if slot.is_some() {
                    return Err(Error::InvalidInstance(format!("duplicate cost for {id}")));
                }
                *slot = Some(c);
            }
            Ok(table)
        };
        let cost_x = fill(cost_x, StateKind::X)?;
        let cost_r = fill(cost_r, StateKind::R)?;
        let profile = distance_profile(&network, &init);
        let inst = Self {
            network,
            init,
            profile,
            t1,
            t2,
            cost_x,
            cost_r,
        };
        if let Some(m) = inst.candidates().find(|&m| inst.cost(m).is_none()) {
            return Err(Error::InvalidInstance(format!("no cost given for candidate {m}")));
        }
        Ok(inst)
    }

    pub fn network(&self) -> &EpidemicNetwork {
        &self.network
    }

    pub fn init(&self) -> &InitialCondition {
        &self.init
    }

    pub fn profile(&self) -> &DistanceProfile {
        &self.profile
    }

    pub fn window(&self) -> (usize, usize) {
        (self.t1, self.t2)
    }

    /// Cost of a measurement in the window, if one was given.
    pub fn cost(&self, m: MeasurementId) -> Option<f64> {
        if m.time < self.t1 || m.time > self.t2 || m.node >= self.network.n() {
            return None;
        }
        let idx = (m.time - self.t1) * self.network.n() + m.node;
        match m.kind {
            StateKind::X => self.cost_x[idx],
            StateKind::R => self.cost_r[idx],
        }
    }

    pub fn is_candidate(&self, m: MeasurementId) -> bool {
        m.node < self.network.n()
            && (self.t1..=self.t2).contains(&m.time)
            && !state_is_zero(&self.profile, m.node, m.time, m.kind)
    }

    fn candidates(&self) -> impl Iterator<Item = MeasurementId> + '_ {
        let n = self.network.n();
        (0..n)
            .flat_map(move |i| {
                (self.t1..=self.t2).flat_map(move |k| [MeasurementId::x(i, k), MeasurementId::r(i, k)])
            })
            .filter(|&m| self.is_candidate(m))
    }

    /// Smallest single-measurement cost over the candidate set.
    pub fn min_candidate_cost(&self) -> Option<f64> {
        self.candidates().filter_map(|m| self.cost(m)).reduce(f64::min)
    }
}

/// Equation `(k, i, λ)` of the stacked system: the `x` or `r` update of node
/// `i` from time `k` to `k + 1`. Ordered by `(time, node, kind)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EquationId {
    pub time: usize,
    /// 0-based node index.
    pub node: usize,
    pub kind: StateKind,
}

impl EquationId {
    pub fn x(time: usize, node: usize) -> Self {
        Self {
            time,
            node,
            kind: StateKind::X,
        }
    }

    pub fn r(time: usize, node: usize) -> Self {
        Self {
            time,
            node,
            kind: StateKind::R,
        }
    }
}

impl fmt::Display for EquationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.time, self.node + 1, self.kind.symbol())
    }
}

/// A set of measurements, plus the equation pair it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactStrategy {
    pub selected: BTreeSet<MeasurementId>,
    pub pair: Option<(EquationId, EquationId)>,
    pub cost: f64,
}

/// All candidate measurements in the window; positivity is decided by the
/// propagation lemma alone.
pub fn candidate_set(inst: &PimsInstance) -> BTreeSet<MeasurementId> {
    inst.candidates().collect()
}

/// Equation sets `(Q₁, Q₂)`, each sorted by `(k, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationSets {
    pub q1: Vec<EquationId>,
    pub q2: Vec<EquationId>,
}

/// `Q₁` collects the `x` equations with a guaranteed nonzero `β` coefficient,
/// `Q₂` the `r` equations with a guaranteed nonzero `δ` coefficient.
pub fn build_q1_q2(inst: &PimsInstance) -> Result<EquationSets> {
    let p = &inst.profile;
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    for k in inst.t1..inst.t2 {
        for i in 0..inst.network.n() {
            let in_q1 = p.in_seeded_self_loop(i)
                || (p.in_reachable_neighbor(i) && p.min_neighbor_distance(i).is_some_and(|d| k >= d));
            if in_q1 {
                q1.push(EquationId::x(k, i));
            }
            if p.distance(i).is_some_and(|d| k >= d) {
                q2.push(EquationId::r(k, i));
            }
        }
    }
    if q1.is_empty() || q2.is_empty() {
        return Err(Error::Infeasible(format!(
            "|Q1| = {}, |Q2| = {}; the pair construction needs both nonempty",
            q1.len(),
            q2.len()
        )));
    }
    Ok(EquationSets { q1, q2 })
}

/// Measurements an equation needs beyond the free zeros.
pub fn equation_support(inst: &PimsInstance, eq: EquationId) -> BTreeSet<MeasurementId> {
    let (k, i) = (eq.time, eq.node);
    let mut ids = vec![MeasurementId::r(i, k)];
    match eq.kind {
        StateKind::X => {
            ids.push(MeasurementId::x(i, k + 1));
            ids.extend(inst.network.closed_in_neighbors(i).iter().map(|&j| MeasurementId::x(j, k)));
        }
        StateKind::R => {
            ids.push(MeasurementId::r(i, k + 1));
            ids.push(MeasurementId::x(i, k));
        }
    }
    ids.into_iter().filter(|&m| inst.is_candidate(m)).collect()
}

/// Summed cost of the selected candidates; anything else is free.
pub fn strategy_cost(inst: &PimsInstance, selected: &BTreeSet<MeasurementId>) -> f64 {
    selected
        .iter()
        .filter(|&&m| inst.is_candidate(m))
        .filter_map(|&m| inst.cost(m))
        .sum()
}

fn cheaper(candidate: f64, best: f64) -> bool {
    candidate < best - TIE_TOL * best.abs().max(1.0)
}

/// Minimum union-support cost over `Q₁ × Q₂`, ties to the lexicographically
/// smallest `(k₁, i₁, k₂, i₂)`.
pub fn algorithm1(inst: &PimsInstance) -> Result<ExactStrategy> {
    let sets = build_q1_q2(inst)?;
    let supports = |q: &[EquationId]| -> Vec<(BTreeSet<MeasurementId>, f64)> {
        q.iter()
            .map(|&eq| {
                let s = equation_support(inst, eq);
                let c = strategy_cost(inst, &s);
                (s, c)
            })
            .collect()
    };
    let s1 = supports(&sets.q1);
    let s2 = supports(&sets.q2);

    let mut best: Option<(usize, usize, f64)> = None;
    for (a, (sa, ca)) in s1.iter().enumerate() {
        for (b, (sb, cb)) in s2.iter().enumerate() {
            let shared: f64 = sa.intersection(sb).filter_map(|&m| inst.cost(m)).sum();
            let cost = ca + cb - shared;
            if best.is_none_or(|(_, _, c)| cheaper(cost, c)) {
                best = Some((a, b, cost));
            }
        }
    }
    let (a, b, _) = best.expect("both equation sets are nonempty");
    let selected: BTreeSet<_> = s1[a].0.union(&s2[b].0).copied().collect();
    let cost = strategy_cost(inst, &selected);
    Ok(ExactStrategy {
        selected,
        pair: Some((sets.q1[a], sets.q2[b])),
        cost,
    })
}

/// The approximation bound attached to [`algorithm1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropositionBound {
    /// Cheapest co-timed pair `(k,i,x) ∈ Q₁`, `(k,i,r) ∈ Q₂`, counting candidate costs only.
    pub numerator: f64,
    pub witness: EquationId,
    pub c_min: f64,
    /// `numerator / (3 c_min)`; bounds `c(algorithm1) / c(optimum)`.
    pub ratio: f64,
}

/// `None` when no `x` equation in `Q₁` has its `r` partner in `Q₂`, or when
/// the cheapest candidate is free.
pub fn proposition_bound(inst: &PimsInstance) -> Result<Option<PropositionBound>> {
    let sets = build_q1_q2(inst)?;
    let q2: BTreeSet<_> = sets.q2.iter().copied().collect();
    let mut best: Option<(EquationId, f64)> = None;
    for &eq in &sets.q1 {
        let partner = EquationId::r(eq.time, eq.node);
        if !q2.contains(&partner) {
            continue;
        }
        let mut support = equation_support(inst, eq);
        support.extend(equation_support(inst, partner));
        let c = strategy_cost(inst, &support);
        if best.is_none_or(|(_, b)| cheaper(c, b)) {
            best = Some((eq, c));
        }
    }
    let c_min = inst.min_candidate_cost().unwrap_or(0.0);
    Ok(best.and_then(|(witness, numerator)| {
        (c_min > 0.0).then(|| PropositionBound {
            numerator,
            witness,
            c_min,
            ratio: numerator / (3.0 * c_min),
        })
    }))
}

/// Least-squares estimate of `θ` with its rank certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub theta: Theta,
    pub rank: usize,
    pub equations: Vec<EquationId>,
    pub singular_values: Vec<f64>,
}

/// Simulates under `theta_true`, keeps every equation whose coefficients and
/// left-hand side are fully known from `selected` plus the free zeros, and
/// solves the stacked two-unknown system.
pub fn identify_theta(
    inst: &PimsInstance,
    selected: &BTreeSet<MeasurementId>,
    theta_true: Theta,
) -> Result<Identification> {
    let traj = simulate(&inst.network, &inst.init, theta_true, inst.t2)?;
    let h = inst.network.h();
    let known = |m: MeasurementId| -> Option<f64> {
        if state_is_zero(&inst.profile, m.node, m.time, m.kind) {
            Some(0.0)
        } else if selected.contains(&m) && inst.is_candidate(m) {
            Some(traj.state(m.kind, m.time, m.node))
        } else {
            None
        }
    };

    let mut rows: Vec<[f64; 2]> = Vec::new();
    let mut rhs = Vec::new();
    let mut equations = Vec::new();
    for k in inst.t1..inst.t2 {
        for i in 0..inst.network.n() {
            // x_i[k+1] - x_i[k] = h s_i[k] Σ a_ij x_j[k] β - h x_i[k] δ
            let x_row = (|| {
                let x_next = known(MeasurementId::x(i, k + 1))?;
                let x_now = known(MeasurementId::x(i, k))?;
                let r_now = known(MeasurementId::r(i, k))?;
                let mut inflow = 0.0;
                for &j in inst.network.closed_in_neighbors(i) {
                    inflow += inst.network.weight(i, j) * known(MeasurementId::x(j, k))?;
                }
                let s_now = 1.0 - x_now - r_now;
                Some(([h * s_now * inflow, -h * x_now], x_next - x_now))
            })();
            // r_i[k+1] - r_i[k] = h x_i[k] δ
            let r_row = (|| {
                let r_next = known(MeasurementId::r(i, k + 1))?;
                let r_now = known(MeasurementId::r(i, k))?;
                let x_now = known(MeasurementId::x(i, k))?;
                Some(([0.0, h * x_now], r_next - r_now))
            })();
            for (eq, row) in [(EquationId::x(k, i), x_row), (EquationId::r(k, i), r_row)] {
                if let Some((coef, lhs)) = row {
                    if coef[0] != 0.0 || coef[1] != 0.0 {
                        rows.push(coef);
                        rhs.push(lhs);
                        equations.push(eq);
                    }
                }
            }
        }
    }

    if rows.is_empty() {
        return Err(Error::IdentificationFailed { rank: 0, equations: 0 });
    }
    let m = DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let svd = m.svd(true, true);
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let cutoff = RANK_TOL * singular_values[0];
    let rank = singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < 2 {
        return Err(Error::IdentificationFailed {
            rank,
            equations: equations.len(),
        });
    }
    let sol = svd
        .solve(&b, cutoff)
        .map_err(|e| Error::NotPositiveDefinite(e.to_string()))?;
    Ok(Identification {
        theta: Theta::new(sol[0], sol[1]),
        rank,
        equations,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn edge(from: usize, to: usize, weight: f64) -> Edge {
        Edge { from, to, weight }
    }

    /// Chain 0 -> 1 -> 2 with self-loops everywhere, node 0 seeded.
    fn chain(t1: usize, t2: usize) -> PimsInstance {
        let net = EpidemicNetwork::new(
            3,
            vec![
                edge(0, 0, 0.5),
                edge(1, 1, 0.5),
                edge(2, 2, 0.5),
                edge(0, 1, 1.0),
                edge(1, 2, 1.0),
            ],
            0.1,
        )
        .unwrap();
        let init = InitialCondition::from_infected(vec![0.2, 0.0, 0.0]);
        let mut cx = Vec::new();
        let mut cr = Vec::new();
        for k in t1..=t2 {
            for i in 0..3 {
                cx.push((k, i, 1.0 + i as f64));
                cr.push((k, i, 2.0));
            }
        }
        PimsInstance::new(net, init, t1, t2, &cx, &cr).unwrap()
    }

    #[test]
    fn candidate_set_follows_distances() {
        let inst = chain(1, 3);
        let c = candidate_set(&inst);
        for k in 1..=3 {
            assert!(c.contains(&MeasurementId::x(0, k)));
        }
        // d_1 = 1: x from k = 1, r from k = 2.
        assert!(c.contains(&MeasurementId::x(1, 1)));
        assert!(!c.contains(&MeasurementId::r(1, 1)));
        assert!(c.contains(&MeasurementId::r(1, 2)));
        // d_2 = 2
        assert!(!c.contains(&MeasurementId::x(2, 1)));
        assert!(c.contains(&MeasurementId::x(2, 2)));
        assert!(!c.contains(&MeasurementId::r(2, 2)));
    }

    #[test]
    fn unreachable_node_has_no_candidates() {
        let net = EpidemicNetwork::new(2, vec![edge(0, 0, 1.0), edge(1, 1, 1.0)], 0.1).unwrap();
        let init = InitialCondition::from_infected(vec![0.1, 0.0]);
        let cx = [(1, 0, 1.0), (2, 0, 1.0)];
        let cr = [(1, 0, 1.0), (2, 0, 1.0)];
        let inst = PimsInstance::new(net, init, 1, 2, &cx, &cr).unwrap();
        assert!(candidate_set(&inst).iter().all(|m| m.node == 0));
        assert!(build_q1_q2(&inst).unwrap().q2.iter().all(|e| e.node == 0));
    }

    #[test]
    fn missing_candidate_cost_is_rejected() {
        let net = EpidemicNetwork::new(1, vec![edge(0, 0, 1.0)], 0.1).unwrap();
        let init = InitialCondition::from_infected(vec![0.1]);
        let err = PimsInstance::new(net, init, 1, 2, &[(1, 0, 1.0)], &[(1, 0, 1.0), (2, 0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("x_1[2]"), "{err}");
    }

    #[test]
    fn equation_sets() {
        let inst = chain(1, 3);
        let sets = build_q1_q2(&inst).unwrap();
        // Node 0 is seeded with a self-loop: every k.
        assert!(sets.q1.contains(&EquationId::x(1, 0)));
        assert!(sets.q1.contains(&EquationId::x(2, 0)));
        // Node 2 has neighbour distance 1, so k >= 1.
        assert!(sets.q1.contains(&EquationId::x(1, 2)));
        // r equations need k >= d_i.
        assert!(sets.q2.contains(&EquationId::r(1, 1)));
        assert!(!sets.q2.contains(&EquationId::r(1, 2)));
        assert!(sets.q2.contains(&EquationId::r(2, 2)));
    }

    #[test]
    fn neighbour_distance_gates_q1() {
        // 0 -> 1 -> 2, node 2 sees its neighbour only from k = 1.
        let inst = chain(0, 3);
        let sets = build_q1_q2(&inst).unwrap();
        assert!(!sets.q1.contains(&EquationId::x(0, 2)));
        assert!(sets.q1.contains(&EquationId::x(1, 2)));
    }

    #[test]
    fn supports() {
        let inst = chain(1, 3);
        // d_1 = 1 = k: r_1[1] is a free zero.
        let s = equation_support(&inst, EquationId::r(1, 1));
        assert_eq!(s, BTreeSet::from([MeasurementId::r(1, 2), MeasurementId::x(1, 1)]));
        let s = equation_support(&inst, EquationId::x(1, 0));
        assert_eq!(
            s,
            BTreeSet::from([MeasurementId::x(0, 2), MeasurementId::r(0, 1), MeasurementId::x(0, 1)])
        );
    }

    #[test]
    fn cost_sums_and_ignores_duplicates() {
        let inst = chain(1, 3);
        assert_eq!(strategy_cost(&inst, &BTreeSet::new()), 0.0);
        let mut s = BTreeSet::from([MeasurementId::x(0, 2), MeasurementId::r(0, 3)]);
        assert_eq!(strategy_cost(&inst, &s), 3.0);
        s.insert(MeasurementId::x(0, 2));
        assert_eq!(strategy_cost(&inst, &s), 3.0);
    }

    #[test]
    fn algorithm1_recovers_theta() {
        let inst = chain(1, 3);
        let strat = algorithm1(&inst).unwrap();
        let bound = proposition_bound(&inst).unwrap().unwrap();
        assert!(strat.cost <= bound.numerator + 1e-12);
        let truth = Theta::new(2.5, 1.5);
        let id = identify_theta(&inst, &strat.selected, truth).unwrap();
        assert_eq!(id.rank, 2);
        assert!((id.theta.beta - truth.beta).abs() < 1e-9);
        assert!((id.theta.delta - truth.delta).abs() < 1e-9);
    }

    #[test]
    fn identification_failures() {
        let inst = chain(1, 3);
        let err = identify_theta(&inst, &BTreeSet::new(), Theta::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::IdentificationFailed { rank: 0, .. }));
        let only_r: BTreeSet<_> = candidate_set(&inst)
            .into_iter()
            .filter(|m| m.kind == StateKind::R)
            .collect();
        match identify_theta(&inst, &only_r, Theta::new(1.0, 1.0)) {
            Err(Error::IdentificationFailed { rank, .. }) => assert!(rank <= 1),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn equal_window_is_rejected() {
        let net = EpidemicNetwork::new(1, vec![edge(0, 0, 1.0)], 0.1).unwrap();
        let init = InitialCondition::from_infected(vec![0.1]);
        assert!(PimsInstance::new(net, init, 2, 2, &[], &[]).is_err());
    }
}
