//! Priors over `θ`, tensor midpoint quadrature, the prior information `F_p`
//! and the per-measurement information atoms `H_y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::dynamics::{simulate_with_sensitivities, StateKind, Theta};
use crate::error::{Error, Result};
use crate::info::InfoMatrix;
use crate::pems::PemsInstance;

pub const DEFAULT_GRID_POINTS: usize = 33;

/// A state at or above this value counts as a model breakdown.
const SATURATION: f64 = 1.0 - 1e-12;

/// Beta(α₁, α₂) linearly mapped onto `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    #[serde(rename = "a")]
    pub alpha1: f64,
    #[serde(rename = "b")]
    pub alpha2: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BetaPrior {
    pub fn new(alpha1: f64, alpha2: f64, lo: f64, hi: f64) -> Result<Self> {
        let p = Self { alpha1, alpha2, lo, hi };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha1 > 1.0 && self.alpha2 > 1.0 && self.alpha1.is_finite() && self.alpha2.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "Beta shape parameters must exceed 1, got ({}, {})",
                self.alpha1, self.alpha2
            )));
        }
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "prior support needs lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn unit(&self, theta: f64) -> f64 {
        (theta - self.lo) / self.width()
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        let u = self.unit(theta);
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let ln = (self.alpha1 - 1.0) * u.ln() + (self.alpha2 - 1.0) * (1.0 - u).ln()
            - ln_beta(self.alpha1, self.alpha2);
        ln.exp() / self.width()
    }

    /// `d ln p / dθ` at an interior point.
    pub fn score(&self, theta: f64) -> f64 {
        let u = self.unit(theta);
        ((self.alpha1 - 1.0) / u - (self.alpha2 - 1.0) / (1.0 - u)) / self.width()
    }
}

/// Independent priors on `β` and `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub beta: BetaPrior,
    pub delta: BetaPrior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub theta: Theta,
    /// Cell area times the joint prior density.
    pub weight: f64,
}

/// Tensor-product midpoint rule over the prior box.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    pub nodes: Vec<GridNode>,
    pub points_per_axis: usize,
}

impl ThetaGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_q w_q`, which approximates the prior mass 1.
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Quadrature of `f(θ)` against the prior.
    pub fn expect(&self, f: impl Fn(Theta) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n.theta)).sum()
    }
}

/// Nodes at cell centres, `β` major; endpoints are never evaluated.
pub fn build_grid(priors: &Priors, points_per_axis: usize) -> Result<ThetaGrid> {
    if points_per_axis < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 grid points per axis, got {points_per_axis}"
        )));
    }
    priors.beta.check()?;
    priors.delta.check()?;
    let m = points_per_axis as f64;
    let axis = |p: &BetaPrior| -> Vec<f64> {
        (0..points_per_axis)
            .map(|a| p.lo + p.width() * (a as f64 + 0.5) / m)
            .collect()
    };
    let area = priors.beta.width() * priors.delta.width() / (m * m);
    let deltas = axis(&priors.delta);
    let nodes = axis(&priors.beta)
        .into_iter()
        .flat_map(|b| {
            deltas.iter().map(move |&d| GridNode {
                theta: Theta::new(b, d),
                weight: area * priors.beta.pdf(b) * priors.delta.pdf(d),
            })
        })
        .collect();
    Ok(ThetaGrid {
        nodes,
        points_per_axis,
    })
}

/// Prior information `E[∇ln p ∇ln pᵀ]`. The priors are independent, so the
/// off-diagonal entry is exactly zero and not integrated.
pub fn compute_fp(priors: &Priors, grid: &ThetaGrid) -> Result<InfoMatrix> {
    let bb = grid.expect(|t| priors.beta.score(t.beta).powi(2));
    let dd = grid.expect(|t| priors.delta.score(t.delta).powi(2));
    let fp = InfoMatrix::diag(bb, dd);
    if !fp.is_pd() {
        return Err(Error::NotPositiveDefinite(format!("prior information {fp:?}")));
    }
    Ok(fp)
}

/// `H_y` for every measurement of `inst`, aligned with
/// [`PemsInstance::measurements`]. One simulation per grid node; the per-node
/// contributions are summed in grid order so the result does not depend on
/// the thread count.
pub fn compute_h_atoms(inst: &PemsInstance, grid: &ThetaGrid) -> Result<Vec<InfoMatrix>> {
    let measurements = inst.measurements();
    let per_node: Vec<Vec<InfoMatrix>> = grid
        .nodes
        .par_iter()
        .map(|node| {
            let (traj, sens) = simulate_with_sensitivities(&inst.network, &inst.init, node.theta, inst.t2)?;
            measurements
                .iter()
                .map(|m| {
                    let lambda = traj.state(m.kind, m.time, m.node);
                    if lambda == 0.0 {
                        return Ok(InfoMatrix::ZERO);
                    }
                    if lambda >= SATURATION {
                        return Err(Error::ModelBreakdown {
                            what: match m.kind {
                                StateKind::X => "x",
                                StateKind::R => "r",
                            },
                            node: m.node + 1,
                            time: m.time,
                            value: lambda,
                        });
                    }
                    let batch = inst.batch_size(m.node, m.kind) as f64;
                    let g = sens.gradient(m.kind, m.time, m.node);
                    Ok(InfoMatrix::outer(g, node.weight * batch / (lambda * (1.0 - lambda))))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut atoms = vec![InfoMatrix::ZERO; measurements.len()];
    for row in &per_node {
        for (acc, v) in atoms.iter_mut().zip(row) {
            *acc += *v;
        }
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_priors() -> Priors {
        Priors {
            beta: BetaPrior::new(6.0, 3.0, 3.0, 7.0).unwrap(),
            delta: BetaPrior::new(3.0, 4.0, 1.0, 4.0).unwrap(),
        }
    }

    fn unit_priors(a: f64, b: f64) -> Priors {
        let p = BetaPrior::new(a, b, 0.0, 1.0).unwrap();
        Priors { beta: p, delta: p }
    }

    /// Fisher information of Beta(a, b) on [0, 1] in closed form.
    fn beta_fisher(a: f64, b: f64) -> f64 {
        (a + b - 1.0) * (a + b - 2.0) * (1.0 / (a - 2.0) + 1.0 / (b - 2.0))
    }

    #[test]
    fn grid_self_normalizes() {
        let g = build_grid(&paper_priors(), 33).unwrap();
        assert_eq!(g.len(), 33 * 33);
        assert!((g.total_weight() - 1.0).abs() < 1e-3, "{}", g.total_weight());
    }

    #[test]
    fn symmetric_prior_has_centred_mean() {
        let g = build_grid(&unit_priors(3.0, 3.0), 33).unwrap();
        let mean = g.expect(|t| t.beta) / g.total_weight();
        assert!((mean - 0.5).abs() < 1e-9);
    }

    #[test]
    fn single_point_grid_is_rejected() {
        assert!(build_grid(&paper_priors(), 1).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let p = BetaPrior::new(6.0, 3.0, 3.0, 7.0).unwrap();
        let m = 100_000;
        let h = p.width() / m as f64;
        let total: f64 = (0..m).map(|a| p.pdf(p.lo + (a as f64 + 0.5) * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn prior_information_matches_closed_form() {
        // A fine 1-D midpoint sum is the reference; the closed form gives 40.
        let p = BetaPrior::new(3.0, 3.0, 0.0, 1.0).unwrap();
        let m = 1_000_000;
        let h = 1.0 / m as f64;
        let fine: f64 = (0..m)
            .map(|a| {
                let u = (a as f64 + 0.5) * h;
                p.score(u).powi(2) * p.pdf(u) * h
            })
            .sum();
        assert!((fine - beta_fisher(3.0, 3.0)).abs() < 1e-6, "{fine}");
        assert_eq!(beta_fisher(3.0, 3.0), 40.0);

        let fp = compute_fp(&unit_priors(3.0, 3.0), &build_grid(&unit_priors(3.0, 3.0), 201).unwrap()).unwrap();
        assert_eq!(fp.bd, 0.0);
        assert!((fp.bb - 40.0).abs() < 1e-2, "{fp:?}");
        assert!((fp.dd - 40.0).abs() < 1e-2);
    }

    #[test]
    fn widening_support_divides_information_by_four() {
        let narrow = unit_priors(3.0, 4.0);
        let mut wide = narrow;
        wide.beta.hi = 2.0;
        let fn_ = compute_fp(&narrow, &build_grid(&narrow, 33).unwrap()).unwrap();
        let fw = compute_fp(&wide, &build_grid(&wide, 33).unwrap()).unwrap();
        assert!((fw.bb * 4.0 - fn_.bb).abs() < 1e-9 * fn_.bb);
        assert!((fw.dd - fn_.dd).abs() < 1e-9 * fn_.dd);
    }

    #[test]
    fn paper_prior_information_is_positive_definite() {
        let priors = paper_priors();
        let fp = compute_fp(&priors, &build_grid(&priors, 33).unwrap()).unwrap();
        assert!(fp.is_pd());
        let bb = beta_fisher(6.0, 3.0) / 16.0;
        let dd = beta_fisher(3.0, 4.0) / 9.0;
        assert!((fp.bb - bb).abs() < 0.02 * bb, "{} vs {bb}", fp.bb);
        assert!((fp.dd - dd).abs() < 0.02 * dd, "{} vs {dd}", fp.dd);
    }
}
