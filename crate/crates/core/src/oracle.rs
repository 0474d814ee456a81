//! Exhaustive reference solvers and property audits for desk-scale instances.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use crate::dynamics::state_is_zero;
use crate::error::{Error, Result};
use crate::measurement::MeasurementId;
use crate::pems::{within_budget, Criterion, Design, GreedyTrace, GroundElement, Selection};
use crate::pims::{EquationId, PimsInstance};

pub const PEMS_SPACE_LIMIT: f64 = 1e8;
pub const PIMS_PAIR_LIMIT: f64 = 1e7;
pub const GAMMA1_GROUND_LIMIT: usize = 12;
pub const AUDIT_GROUND_LIMIT: usize = 8;

/// Result of an exhaustive PEMS search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub value: f64,
    pub counts: Vec<u32>,
    pub selection: Selection,
    /// Lattice points visited; always the full lattice size.
    pub space_size: u64,
    pub seconds: f64,
}

/// `Π_g (cap_g + 1)` as a float so that overflow cannot hide a huge space.
pub fn lattice_size(design: &Design) -> f64 {
    design.caps.iter().map(|&c| c as f64 + 1.0).product()
}

fn decode(mut index: u64, caps: &[u32], out: &mut [u32]) {
    // The first group is the most significant digit, so index order is the
    // lexicographic order of count vectors.
    for g in (0..caps.len()).rev() {
        let radix = caps[g] as u64 + 1;
        out[g] = (index % radix) as u32;
        index /= radix;
    }
}

/// Best lattice point within `budget`; ties go to the lexicographically
/// smallest count vector.
pub fn brute_force_pems(design: &Design, which: Criterion, budget: f64) -> Result<OracleReport> {
    let size = lattice_size(design);
    if size > PEMS_SPACE_LIMIT {
        return Err(Error::GuardExceeded {
            size,
            limit: PEMS_SPACE_LIMIT,
        });
    }
    let start = Instant::now();
    let total = size as u64;
    let groups = design.len();
    let chunk = 4096u64;
    let best = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u32; groups];
            let mut best: Option<(f64, u64)> = None;
            for idx in c * chunk..((c + 1) * chunk).min(total) {
                decode(idx, &design.caps, &mut counts);
                if !within_budget(design.cost(&counts), budget) {
                    continue;
                }
                let v = design.value(&counts, which);
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, idx));
                }
            }
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x }),
                (x, None) => x,
                (None, y) => y,
            },
        );
    // The empty selection always fits, so a best point exists.
    let (value, idx) = best.expect("empty selection is feasible");
    let mut counts = vec![0u32; groups];
    decode(idx, &design.caps, &mut counts);
    Ok(OracleReport {
        value,
        selection: design.selection(&counts),
        counts,
        space_size: total,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Result of the exhaustive pair search.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub cost: f64,
    pub pair: (EquationId, EquationId),
    pub selected: BTreeSet<MeasurementId>,
    pub space_size: u64,
    pub seconds: f64,
}

/// Rebuilds the equation sets and supports from the definitions and scans
/// every pair, as a cross-check of [`crate::pims::algorithm1`].
pub fn brute_force_pims_pairs(inst: &PimsInstance) -> Result<PairReport> {
    let start = Instant::now();
    let net = inst.network();
    let p = inst.profile();
    let (t1, t2) = inst.window();
    let live = |m: MeasurementId| (t1..=t2).contains(&m.time) && !state_is_zero(p, m.node, m.time, m.kind);

    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    for k in t1..t2 {
        for i in 0..net.n() {
            let seeded_loop = p.is_initially_infected(i) && net.weight(i, i) > 0.0;
            let neighbour_ready = !seeded_loop
                && net
                    .in_neighbors(i)
                    .iter()
                    .filter_map(|&j| p.distance(j))
                    .min()
                    .is_some_and(|d| k >= d);
            if seeded_loop || neighbour_ready {
                let mut s: BTreeSet<MeasurementId> = [MeasurementId::x(i, k + 1), MeasurementId::r(i, k), MeasurementId::x(i, k)]
                    .into_iter()
                    .collect();
                s.extend(net.in_neighbors(i).iter().map(|&j| MeasurementId::x(j, k)));
                s.retain(|&m| live(m));
                q1.push((EquationId::x(k, i), s));
            }
            if p.distance(i).is_some_and(|d| k >= d) {
                let mut s: BTreeSet<MeasurementId> = [MeasurementId::r(i, k + 1), MeasurementId::r(i, k), MeasurementId::x(i, k)]
                    .into_iter()
                    .collect();
                s.retain(|&m| live(m));
                q2.push((EquationId::r(k, i), s));
            }
        }
    }
    let size = q1.len() as f64 * q2.len() as f64;
    if size > PIMS_PAIR_LIMIT {
        return Err(Error::GuardExceeded {
            size,
            limit: PIMS_PAIR_LIMIT,
        });
    }
    if size == 0.0 {
        return Err(Error::Infeasible(format!("|Q1| = {}, |Q2| = {}", q1.len(), q2.len())));
    }
    q1.sort_by_key(|(e, _)| *e);
    q2.sort_by_key(|(e, _)| *e);

    let mut best: Option<(f64, usize, usize)> = None;
    for (a, (_, s1)) in q1.iter().enumerate() {
        for (b, (_, s2)) in q2.iter().enumerate() {
            let cost: f64 = s1.union(s2).map(|&m| inst.cost(m).unwrap_or(0.0)).sum();
            let better = match best {
                None => true,
                Some((c, _, _)) => cost < c - 1e-12 * c.abs().max(1.0),
            };
            if better {
                best = Some((cost, a, b));
            }
        }
    }
    let (cost, a, b) = best.expect("nonempty search space");
    Ok(PairReport {
        cost,
        pair: (q1[a].0, q2[b].0),
        selected: q1[a].1.union(&q2[b].1).copied().collect(),
        space_size: size as u64,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// The ground set a greedy run worked on, with each element's group index.
fn trace_ground(design: &Design, trace: &GreedyTrace) -> Vec<(usize, GroundElement)> {
    let mut out = Vec::new();
    for g in 0..design.len() {
        for copy in 1..=trace.caps[g] {
            out.push((
                g,
                GroundElement {
                    measurement: design.measurements[g],
                    copy,
                    cost: design.costs[g],
                },
            ));
        }
    }
    out
}

/// Set-function values over every subset of a ground set of `size` elements,
/// where element `e` belongs to group `groups[e]`.
fn all_subset_values(design: &Design, groups: &[usize], which: Criterion) -> Vec<f64> {
    let size = groups.len();
    (0u64..1 << size)
        .into_par_iter()
        .map(|mask| {
            let mut counts = vec![0u32; design.len()];
            for (e, &g) in groups.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    counts[g] += 1;
                }
            }
            design.value(&counts, which)
        })
        .collect()
}

/// The type-1 greedy submodularity ratio of `trace.criterion` along the
/// chain, by enumerating every subset of the ground set; capped at 1.
pub fn exhaustive_gamma1(design: &Design, trace: &GreedyTrace) -> Result<f64> {
    let ground = trace_ground(design, trace);
    if ground.len() > GAMMA1_GROUND_LIMIT {
        return Err(Error::GuardExceeded {
            size: ground.len() as f64,
            limit: GAMMA1_GROUND_LIMIT as f64,
        });
    }
    let groups: Vec<usize> = ground.iter().map(|(g, _)| *g).collect();
    let f = all_subset_values(design, &groups, trace.criterion);
    let position = |y: &GroundElement| {
        ground
            .iter()
            .position(|(_, e)| e.key() == y.key())
            .expect("chain element belongs to the ground set")
    };

    let mut gamma = 1.0f64;
    let full = (1u64 << ground.len()) - 1;
    for j in 0..=trace.chain.len() {
        let y2: u64 = trace.chain[..j].iter().map(|y| 1u64 << position(y)).sum();
        let base = f[y2 as usize];
        let singles: Vec<f64> = (0..ground.len())
            .map(|e| f[(y2 | 1 << e) as usize] - base)
            .collect();
        for a in 0..=full {
            let extra = a & !y2;
            if extra == 0 {
                continue;
            }
            let joint = f[(a | y2) as usize] - base;
            if joint <= 1e-14 * base.abs().max(1.0) {
                continue;
            }
            let sum: f64 = (0..ground.len())
                .filter(|&e| extra >> e & 1 == 1)
                .map(|e| singles[e])
                .sum();
            gamma = gamma.min(sum / joint);
        }
    }
    Ok(gamma)
}

/// A violated diminishing-returns triple `A ⊆ B`, `y ∉ B` (bitmasks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Counterexample {
    pub a: u64,
    pub b: u64,
    pub y: usize,
    pub gain_a: f64,
    pub gain_b: f64,
}

/// Checks `f(A ∪ {y}) − f(A) ≥ f(B ∪ {y}) − f(B) − tol` for every
/// `A ⊆ B ⊆ V` and `y ∉ B`, where `f` is given on all `2^size` subsets.
pub fn submodularity_audit(values: &[f64], size: usize, tol: f64) -> Result<Option<Counterexample>> {
    if size > AUDIT_GROUND_LIMIT {
        return Err(Error::GuardExceeded {
            size: size as f64,
            limit: AUDIT_GROUND_LIMIT as f64,
        });
    }
    assert_eq!(values.len(), 1 << size, "one value per subset");
    let full = (1u64 << size) - 1;
    for b in 0..=full {
        // Walk every submask of b.
        let mut a = b;
        loop {
            for y in (0..size).filter(|&y| b >> y & 1 == 0) {
                let gain_a = values[(a | 1 << y) as usize] - values[a as usize];
                let gain_b = values[(b | 1 << y) as usize] - values[b as usize];
                if gain_a < gain_b - tol {
                    return Ok(Some(Counterexample { a, b, y, gain_a, gain_b }));
                }
            }
            if a == 0 {
                break;
            }
            a = (a - 1) & b;
        }
    }
    Ok(None)
}

/// `A ⊆ B ⇒ f(A) ≤ f(B) + tol`, checked through single-element extensions.
pub fn monotonicity_audit(values: &[f64], size: usize, tol: f64) -> Result<Option<(u64, usize)>> {
    if size > AUDIT_GROUND_LIMIT {
        return Err(Error::GuardExceeded {
            size: size as f64,
            limit: AUDIT_GROUND_LIMIT as f64,
        });
    }
    for a in 0u64..1 << size {
        for y in (0..size).filter(|&y| a >> y & 1 == 0) {
            if values[(a | 1 << y) as usize] < values[a as usize] - tol {
                return Ok(Some((a, y)));
            }
        }
    }
    Ok(None)
}

/// Values of the design's set function over every subset of its full
/// ground set `M̄`, for the audits above.
pub fn design_subset_values(design: &Design, which: Criterion) -> Result<(Vec<f64>, usize)> {
    let groups: Vec<usize> = (0..design.len())
        .flat_map(|g| std::iter::repeat_n(g, design.caps[g] as usize))
        .collect();
    if groups.len() > GAMMA1_GROUND_LIMIT {
        return Err(Error::GuardExceeded {
            size: groups.len() as f64,
            limit: GAMMA1_GROUND_LIMIT as f64,
        });
    }
    Ok((all_subset_values(design, &groups, which), groups.len()))
}
