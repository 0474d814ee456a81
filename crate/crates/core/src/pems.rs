//! Random-measurement selection: BCRLB objectives over the copy-expanded
//! ground set, cost-benefit greedy, submodularity-ratio bounds and the
//! resulting worst-case guarantees.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::bayes::{build_grid, compute_fp, compute_h_atoms, BetaPrior, Priors, ThetaGrid};
use crate::dynamics::{simulate_with_sensitivities, StateKind};
use crate::error::{Error, Result};
use crate::info::InfoMatrix;
use crate::measurement::MeasurementId;
use crate::network::{validate, EpidemicNetwork, InitialCondition};

/// Relative slack when comparing a cost against the budget.
const BUDGET_TOL: f64 = 1e-9;

/// `cost ≤ budget` up to floating-point noise in summed costs.
pub fn within_budget(cost: f64, budget: f64) -> bool {
    cost <= budget + BUDGET_TOL * budget.abs().max(1.0)
}

/// A-optimal (`a`, trace) or D-optimal (`d`, log-determinant) design criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    A,
    D,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::A => "a",
            Criterion::D => "d",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Criterion::A),
            "d" | "D" => Ok(Criterion::D),
            other => Err(Error::InvalidInstance(format!("unknown objective {other:?}, expected a or d"))),
        }
    }
}

/// Problem data for the random-measurement setting. Per-slot tables are
/// indexed by `(k - t1) * n + i`, per-node tables by `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PemsInstance {
    pub network: EpidemicNetwork,
    pub init: InitialCondition,
    pub t1: usize,
    pub t2: usize,
    pub budget: f64,
    pub cost_x: Vec<f64>,
    pub cost_r: Vec<f64>,
    pub zeta: Vec<u32>,
    pub eta: Vec<u32>,
    pub nx: Vec<u64>,
    pub nr: Vec<u64>,
    pub population: Vec<u64>,
    pub beta_prior: BetaPrior,
    pub delta_prior: BetaPrior,
}

impl PemsInstance {
    pub fn n(&self) -> usize {
        self.network.n()
    }

    pub fn priors(&self) -> Priors {
        Priors {
            beta: self.beta_prior,
            delta: self.delta_prior,
        }
    }

    /// Checks shapes, positivity, the batch-size limits and the model
    /// assumptions over the whole prior box.
    pub fn check(&self) -> Result<()> {
        let n = self.n();
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        if self.t1 < 1 || self.t1 > self.t2 {
            return bad(format!("need 1 <= t1 <= t2, got t1 = {}, t2 = {}", self.t1, self.t2));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return bad(format!("budget must be finite and nonnegative, got {}", self.budget));
        }
        let slots = (self.t2 - self.t1 + 1) * n;
        for (name, table) in [("cost_x", &self.cost_x), ("cost_r", &self.cost_r)] {
            if table.len() != slots {
                return bad(format!("{name} has {} entries, expected {slots}", table.len()));
            }
            if let Some(c) = table.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
                return bad(format!("{name} entries must be finite and positive, got {c}"));
            }
        }
        for (name, len) in [
            ("zeta", self.zeta.len()),
            ("eta", self.eta.len()),
            ("Nx", self.nx.len()),
            ("Nr", self.nr.len()),
            ("N", self.population.len()),
        ] {
            if len != n {
                return bad(format!("{name} has {len} entries, expected {n}"));
            }
        }
        for i in 0..n {
            if self.zeta[i] < 1 || self.eta[i] < 1 || self.nx[i] < 1 || self.nr[i] < 1 {
                return bad(format!("caps and batch sizes at node {} must be at least 1", i + 1));
            }
            if self.zeta[i] as u64 * self.nx[i] > self.population[i] || self.eta[i] as u64 * self.nr[i] > self.population[i] {
                return bad(format!("tests at node {} exceed its population {}", i + 1, self.population[i]));
            }
        }
        self.beta_prior.check()?;
        self.delta_prior.check()?;
        if self.beta_prior.lo < 0.0 || self.delta_prior.lo < 0.0 {
            return bad("prior supports must be nonnegative".into());
        }
        validate(&self.network, &self.init, self.beta_prior.hi, self.delta_prior.hi)?;
        Ok(())
    }

    /// Every `x̂_i[k]` and `r̂_i[k]` in the window, ordered by `(node, time, kind)`.
    pub fn measurements(&self) -> Vec<MeasurementId> {
        (0..self.n())
            .flat_map(|i| (self.t1..=self.t2).flat_map(move |k| [MeasurementId::x(i, k), MeasurementId::r(i, k)]))
            .collect()
    }

    fn slot(&self, m: MeasurementId) -> usize {
        (m.time - self.t1) * self.n() + m.node
    }

    pub fn unit_cost(&self, m: MeasurementId) -> f64 {
        match m.kind {
            StateKind::X => self.cost_x[self.slot(m)],
            StateKind::R => self.cost_r[self.slot(m)],
        }
    }

    pub fn cap(&self, m: MeasurementId) -> u32 {
        match m.kind {
            StateKind::X => self.zeta[m.node],
            StateKind::R => self.eta[m.node],
        }
    }

    /// Tests per selected copy, `N_i^x` or `N_i^r`.
    pub fn batch_size(&self, node: usize, kind: StateKind) -> u64 {
        match kind {
            StateKind::X => self.nx[node],
            StateKind::R => self.nr[node],
        }
    }

    /// `Σ c·μ` over the lattice point.
    pub fn selection_cost(&self, sel: &Selection) -> f64 {
        sel.counts.iter().map(|(&m, &c)| self.unit_cost(m) * c as f64).sum()
    }

    /// The copy-expanded ground set `M̄`, in `(node, time, kind, copy)` order.
    pub fn ground_set(&self) -> Vec<GroundElement> {
        self.measurements()
            .into_iter()
            .flat_map(|m| {
                let cost = self.unit_cost(m);
                (1..=self.cap(m)).map(move |copy| GroundElement { measurement: m, copy, cost })
            })
            .collect()
    }
}

/// One copy of a measurement in `M̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundElement {
    pub measurement: MeasurementId,
    /// 1-based copy index.
    pub copy: u32,
    pub cost: f64,
}

impl GroundElement {
    pub fn key(&self) -> (MeasurementId, u32) {
        (self.measurement, self.copy)
    }
}

impl fmt::Display for GroundElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.measurement, self.copy)
    }
}

/// A lattice point `μ`; only nonzero counts are stored.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selection {
    pub counts: BTreeMap<MeasurementId, u32>,
}

impl Selection {
    pub fn count(&self, m: MeasurementId) -> u32 {
        self.counts.get(&m).copied().unwrap_or(0)
    }

    /// `μ_Y`: how many copies of each measurement `Y` holds.
    pub fn from_elements<'a>(ys: impl IntoIterator<Item = &'a GroundElement>) -> Self {
        let mut counts = BTreeMap::new();
        for y in ys {
            *counts.entry(y.measurement).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Renders as `x_1[5]*2;r_3[5]*1`.
    pub fn render(&self) -> String {
        self.counts
            .iter()
            .map(|(m, c)| format!("{m}*{c}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Everything the set functions need: measurements with their atoms, unit
/// costs and caps, plus the prior information.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub measurements: Vec<MeasurementId>,
    pub atoms: Vec<InfoMatrix>,
    pub costs: Vec<f64>,
    pub caps: Vec<u32>,
    pub fp: InfoMatrix,
    fp_trace_inv: f64,
    fp_ln_det: f64,
}

impl Design {
    pub fn from_parts(
        measurements: Vec<MeasurementId>,
        atoms: Vec<InfoMatrix>,
        costs: Vec<f64>,
        caps: Vec<u32>,
        fp: InfoMatrix,
    ) -> Result<Self> {
        let len = measurements.len();
        if atoms.len() != len || costs.len() != len || caps.len() != len {
            return Err(Error::InvalidInstance("design tables differ in length".into()));
        }
        if !measurements.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInstance("measurements must be strictly increasing".into()));
        }
        if !fp.is_pd() {
            return Err(Error::NotPositiveDefinite(format!("prior information {fp:?}")));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_psd()) {
            return Err(Error::NotPositiveDefinite(format!("atom {a:?}")));
        }
        Ok(Self {
            measurements,
            atoms,
            costs,
            caps,
            fp,
            fp_trace_inv: fp.trace() / fp.det(),
            fp_ln_det: fp.det().ln(),
        })
    }

    /// Builds the quadrature grid, `F_p` and the atoms for `inst`.
    pub fn prepare(inst: &PemsInstance, points_per_axis: usize) -> Result<Self> {
        inst.check()?;
        let grid = build_grid(&inst.priors(), points_per_axis)?;
        Self::prepare_on(inst, &grid)
    }

    pub fn prepare_on(inst: &PemsInstance, grid: &ThetaGrid) -> Result<Self> {
        let fp = compute_fp(&inst.priors(), grid)?;
        let atoms = compute_h_atoms(inst, grid)?;
        let measurements = inst.measurements();
        let costs = measurements.iter().map(|&m| inst.unit_cost(m)).collect();
        let caps = measurements.iter().map(|&m| inst.cap(m)).collect();
        Self::from_parts(measurements, atoms, costs, caps, fp)
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// `F_p + Σ_m counts[m] · H_m`.
    pub fn information(&self, counts: &[u32]) -> InfoMatrix {
        let mut m = self.fp;
        for (atom, &c) in self.atoms.iter().zip(counts) {
            if c > 0 {
                m += atom.scaled(c as f64);
            }
        }
        m
    }

    /// `f_P` of a total information matrix.
    pub fn value_of(&self, info: InfoMatrix, which: Criterion) -> f64 {
        match which {
            Criterion::A => self.fp_trace_inv - info.trace() / info.det(),
            Criterion::D => info.det().ln() - self.fp_ln_det,
        }
    }

    /// `f_P(Y)` for the set with the given copy counts.
    pub fn value(&self, counts: &[u32], which: Criterion) -> f64 {
        if counts.iter().all(|&c| c == 0) {
            return 0.0;
        }
        self.value_of(self.information(counts), which)
    }

    pub fn counts_of(&self, sel: &Selection) -> Vec<u32> {
        self.measurements.iter().map(|&m| sel.count(m)).collect()
    }

    pub fn selection(&self, counts: &[u32]) -> Selection {
        Selection {
            counts: self
                .measurements
                .iter()
                .zip(counts)
                .filter(|(_, &c)| c > 0)
                .map(|(&m, &c)| (m, c))
                .collect(),
        }
    }

    pub fn objective(&self, ys: &[GroundElement], which: Criterion) -> f64 {
        self.value(&self.counts_of(&Selection::from_elements(ys)), which)
    }

    pub fn cost(&self, counts: &[u32]) -> f64 {
        self.costs.iter().zip(counts).map(|(c, &k)| c * k as f64).sum()
    }

    /// Copies of `M̄`; with a budget, only copies that fit on their own.
    pub fn ground_set(&self, budget: Option<f64>) -> Vec<GroundElement> {
        let mut out = Vec::new();
        for (g, &m) in self.measurements.iter().enumerate() {
            if budget.is_some_and(|b| !within_budget(self.costs[g], b)) {
                continue;
            }
            out.extend((1..=self.caps[g]).map(|copy| GroundElement {
                measurement: m,
                copy,
                cost: self.costs[g],
            }));
        }
        out
    }

    /// Per-group caps with groups that cannot fit in `budget` removed.
    pub fn affordable_caps(&self, budget: f64) -> Vec<u32> {
        self.costs
            .iter()
            .zip(&self.caps)
            .map(|(&c, &cap)| if within_budget(c, budget) { cap } else { 0 })
            .collect()
    }

    pub fn cost_range(&self, caps: &[u32]) -> Option<(f64, f64)> {
        self.costs
            .iter()
            .zip(caps)
            .filter(|(_, &cap)| cap > 0)
            .map(|(&c, _)| c)
            .fold(None, |acc, c| match acc {
                None => Some((c, c)),
                Some((lo, hi)) => Some((lo.min(c), hi.max(c))),
            })
    }

    fn element(&self, g: usize, copy: u32) -> GroundElement {
        GroundElement {
            measurement: self.measurements[g],
            copy,
            cost: self.costs[g],
        }
    }
}

/// Which candidate the greedy returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalChoice {
    BestSingleton,
    Chain,
}

/// Full record of a greedy run.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    pub criterion: Criterion,
    pub budget: f64,
    pub y1: GroundElement,
    pub y1_value: f64,
    /// Elements added to `Y₂`, in order.
    pub chain: Vec<GroundElement>,
    /// `f(Y₂ʲ)` for `j = 0..=chain.len()`.
    pub chain_values: Vec<f64>,
    /// Elements removed from the pool because they did not fit.
    pub rejected: Vec<GroundElement>,
    pub choice: FinalChoice,
    pub selection: Selection,
    pub value: f64,
    /// Per-group caps of the ground set the run worked on.
    pub caps: Vec<u32>,
}

impl GreedyTrace {
    /// Copy counts of `Y₂ʲ`.
    pub fn prefix_counts(&self, design: &Design, j: usize) -> Vec<u32> {
        design.counts_of(&Selection::from_elements(&self.chain[..j]))
    }

    pub fn chain_cost(&self, j: usize) -> f64 {
        self.chain[..j].iter().map(|y| y.cost).sum()
    }
}

/// Cost-benefit greedy with the best-singleton fallback.
///
/// Copies of one measurement share an atom, so the scan works on groups with
/// a remaining-copy counter; the lowest remaining copy stands in for the
/// group, which matches breaking ties by the `(node, time, kind, copy)` key.
/// Elements whose own cost exceeds `budget` are dropped from the ground set
/// up front.
pub fn greedy(design: &Design, which: Criterion, budget: f64) -> Result<GreedyTrace> {
    let caps = design.affordable_caps(budget);
    if caps.iter().all(|&c| c == 0) {
        return Err(Error::Precondition(format!(
            "budget {budget} is below the cheapest single measurement"
        )));
    }
    let groups = design.len();

    // Y₁: strict > keeps the lowest key among ties.
    let mut unit = vec![0u32; groups];
    let mut y1: Option<(usize, f64)> = None;
    for g in (0..groups).filter(|&g| caps[g] > 0) {
        unit[g] = 1;
        let v = design.value(&unit, which);
        unit[g] = 0;
        if y1.is_none_or(|(_, best)| v > best) {
            y1 = Some((g, v));
        }
    }
    let (y1_group, y1_value) = y1.expect("at least one affordable group");

    let mut counts = vec![0u32; groups];
    // Copies of each group still in the pool; removed copies are the lowest ones.
    let mut taken = vec![0u32; groups];
    let mut spent = 0.0;
    let mut current = 0.0;
    let mut chain = Vec::new();
    let mut chain_values = vec![0.0];
    let mut rejected = Vec::new();
    loop {
        let base = design.information(&counts);
        let gains: Vec<Option<(f64, f64)>> = (0..groups)
            .into_par_iter()
            .map(|g| {
                (taken[g] < caps[g]).then(|| {
                    let v = design.value_of(base + design.atoms[g], which);
                    (v, (v - current) / design.costs[g])
                })
            })
            .collect();
        let Some((g, value)) = gains
            .iter()
            .enumerate()
            .filter_map(|(g, x)| x.map(|(v, ratio)| (g, v, ratio)))
            .fold(None, |best: Option<(usize, f64, f64)>, (g, v, ratio)| match best {
                Some((_, _, r)) if ratio <= r => best,
                _ => Some((g, v, ratio)),
            })
            .map(|(g, v, _)| (g, v))
        else {
            break;
        };
        if within_budget(spent + design.costs[g], budget) {
            taken[g] += 1;
            counts[g] += 1;
            spent += design.costs[g];
            current = value;
            chain.push(design.element(g, taken[g]));
            chain_values.push(current);
        } else {
            // The next copy of g would win the scan again with the same
            // ratio and fail again, so all remaining copies go together.
            while taken[g] < caps[g] {
                taken[g] += 1;
                rejected.push(design.element(g, taken[g]));
            }
        }
    }

    let (choice, selection, value) = if y1_value > current {
        let mut c = vec![0u32; groups];
        c[y1_group] = 1;
        (FinalChoice::BestSingleton, design.selection(&c), y1_value)
    } else {
        (FinalChoice::Chain, design.selection(&counts), current)
    };
    Ok(GreedyTrace {
        criterion: which,
        budget,
        y1: design.element(y1_group, 1),
        y1_value,
        chain,
        chain_values,
        rejected,
        choice,
        selection,
        value,
        caps,
    })
}

/// Form of the type-1 ratio bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gamma1Form {
    /// Eigenvalue ratios of `F_p + H(·)` directly.
    Lemma,
    /// Weyl split into eigenvalues of `F_p`, `H(z_j)` and `H(Y₂ʲ)`; looser.
    Weyl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gamma1Bound {
    pub value: f64,
    /// Per `j`: the bound term, or `None` when `Y₂ʲ` already holds every element.
    pub terms: Vec<Option<f64>>,
    pub witnesses: Vec<Option<GroundElement>>,
}

fn perturbed_ratio(m: InfoMatrix, eps_prime: f64) -> f64 {
    let (l1, l2) = m.eigenvalues();
    (l2 - eps_prime) / (l1 + eps_prime)
}

/// Polynomial-time lower bound on the type-1 greedy submodularity ratio of
/// `f_Pa` along `trace`. With `eps_prime > 0` every eigenvalue ratio is
/// replaced by `(λ₂ − ε′)/(λ₁ + ε′)` so the bound survives entry errors of
/// Frobenius size `ε′` (this applies to [`Gamma1Form::Lemma`] only).
pub fn gamma1_lower_bound(design: &Design, trace: &GreedyTrace, form: Gamma1Form, eps_prime: f64) -> Gamma1Bound {
    let caps = &trace.caps;
    let (fp1, fp2) = design.fp.eigenvalues();
    let per_j: Vec<(Option<f64>, Option<GroundElement>)> = (0..=trace.chain.len())
        .into_par_iter()
        .map(|j| {
            let counts = trace.prefix_counts(design, j);
            let base = design.information(&counts);
            let eps = if form == Gamma1Form::Lemma { eps_prime } else { 0.0 };
            let mut best: Option<(usize, f64)> = None;
            for g in (0..design.len()).filter(|&g| counts[g] < caps[g]) {
                let r = perturbed_ratio(base + design.atoms[g], eps);
                if best.is_none_or(|(_, b)| r < b) {
                    best = Some((g, r));
                }
            }
            let Some((z, z_ratio)) = best else {
                return (None, None);
            };
            let term = match form {
                Gamma1Form::Lemma => perturbed_ratio(base, eps) * z_ratio,
                Gamma1Form::Weyl => {
                    let (h1, h2) = (base + design.fp.scaled(-1.0)).eigenvalues();
                    let (a1, a2) = design.atoms[z].eigenvalues();
                    (fp2 + h2) / (fp1 + h1) * (fp2 + a2 + h2) / (fp1 + a1 + h1)
                }
            };
            (Some(term), Some(design.element(z, counts[z] + 1)))
        })
        .collect();
    let value = per_j
        .iter()
        .filter_map(|(t, _)| *t)
        .fold(1.0f64, f64::min)
        .max(0.0);
    let (terms, witnesses) = per_j.into_iter().unzip();
    Gamma1Bound { value, terms, witnesses }
}

/// Largest `γ̂₂` with `f(Y₁) − ε/2 ≥ γ̂₂ (f({y} ∪ Y₂ʲ) − f(Y₂ʲ) + ε)` over every
/// prefix `j` and every `y ∉ Y₂ʲ` that would overflow the budget; `+∞` when
/// no such pair exists.
pub fn gamma2_hat(design: &Design, trace: &GreedyTrace, eps: f64) -> f64 {
    let lhs = trace.y1_value - eps / 2.0;
    let which = trace.criterion;
    (0..=trace.chain.len())
        .into_par_iter()
        .map(|j| {
            let counts = trace.prefix_counts(design, j);
            let base = design.information(&counts);
            let spent = trace.chain_cost(j);
            let fj = trace.chain_values[j];
            let mut best = f64::INFINITY;
            for (g, &count) in counts.iter().enumerate() {
                if count >= trace.caps[g] || within_budget(spent + design.costs[g], trace.budget) {
                    continue;
                }
                let rhs = design.value_of(base + design.atoms[g], which) - fj + eps;
                if rhs > 0.0 {
                    best = best.min(lhs / rhs);
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Worst-case guarantee `f(greedy) ≥ fraction · f(OPT) − slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guarantee {
    pub fraction: f64,
    pub slack: f64,
}

impl Guarantee {
    pub fn holds(&self, greedy: f64, optimum: f64) -> bool {
        greedy >= self.fraction * optimum - self.slack - 1e-12 * optimum.abs().max(1.0)
    }
}

/// For `d`: `½(1 − e⁻¹)` with slack `(B/c_min + 3/2)ε`. For `a`:
/// `min{γ₂,1}/2 · (1 − e^{−γ₁})` with slack `((B + c_max)/c_min + 1)ε`.
pub fn guarantee(
    which: Criterion,
    gamma1: f64,
    gamma2: f64,
    budget: f64,
    c_min: f64,
    c_max: f64,
    eps: f64,
) -> Guarantee {
    match which {
        Criterion::D => Guarantee {
            fraction: 0.5 * (1.0 - (-1.0f64).exp()),
            slack: (budget / c_min + 1.5) * eps,
        },
        Criterion::A => Guarantee {
            fraction: gamma2.clamp(0.0, 1.0) / 2.0 * (1.0 - (-gamma1.max(0.0)).exp()),
            slack: ((budget + c_max) / c_min + 1.0) * eps,
        },
    }
}

/// Quadrature-error estimates from comparing two grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureError {
    /// `2 · max |f̂_coarse − f̂_fine|` for the trace criterion.
    pub eps_a: f64,
    /// Same for the log-determinant criterion.
    pub eps_d: f64,
    /// Largest Frobenius change of `F_p + H(Y)`.
    pub eps_prime: f64,
}

impl QuadratureError {
    pub fn eps(&self, which: Criterion) -> f64 {
        match which {
            Criterion::A => self.eps_a,
            Criterion::D => self.eps_d,
        }
    }

    /// Compares `coarse` and `fine` on the given count vectors.
    pub fn between(coarse: &Design, fine: &Design, samples: &[Vec<u32>]) -> Self {
        let mut out = Self {
            eps_a: 0.0,
            eps_d: 0.0,
            eps_prime: 0.0,
        };
        for counts in samples {
            let (mc, mf) = (coarse.information(counts), fine.information(counts));
            let diff = mc + mf.scaled(-1.0);
            out.eps_prime = out.eps_prime.max(diff.frobenius());
            let da = (coarse.value(counts, Criterion::A) - fine.value(counts, Criterion::A)).abs();
            let dd = (coarse.value(counts, Criterion::D) - fine.value(counts, Criterion::D)).abs();
            out.eps_a = out.eps_a.max(2.0 * da);
            out.eps_d = out.eps_d.max(2.0 * dd);
        }
        out
    }
}

/// Probe set for [`QuadratureError::between`]: the empty set, every single
/// copy, every full group and the full ground set.
pub fn probe_counts(design: &Design) -> Vec<Vec<u32>> {
    let n = design.len();
    let mut out = vec![vec![0; n], design.caps.clone()];
    for g in 0..n {
        let mut one = vec![0; n];
        one[g] = 1;
        out.push(one.clone());
        one[g] = design.caps[g];
        out.push(one);
    }
    out
}

/// Estimates the quadrature error of a design by doubling the grid.
pub fn estimate_quadrature_error(
    inst: &PemsInstance,
    coarse: &Design,
    points_per_axis: usize,
    extra: &[Vec<u32>],
) -> Result<QuadratureError> {
    let fine = Design::prepare(inst, 2 * points_per_axis)?;
    let mut samples = probe_counts(coarse);
    samples.extend_from_slice(extra);
    Ok(QuadratureError::between(coarse, &fine, &samples))
}

/// Bayesian information `E_θ[F_θ(μ)] + F_p` computed without atoms: at every
/// grid node, each selected measurement contributes the Fisher information of
/// its binomial count, obtained by summing the squared score over all outcomes.
pub fn bayesian_information_direct(inst: &PemsInstance, grid: &ThetaGrid, sel: &Selection) -> Result<InfoMatrix> {
    let priors = inst.priors();
    let mut total = compute_fp(&priors, grid)?;
    for node in &grid.nodes {
        let (traj, sens) = simulate_with_sensitivities(&inst.network, &inst.init, node.theta, inst.t2)?;
        for (&m, &count) in &sel.counts {
            let lambda = traj.state(m.kind, m.time, m.node);
            if count == 0 || lambda == 0.0 {
                continue;
            }
            let trials = inst.batch_size(m.node, m.kind) * count as u64;
            let binom = Binomial::new(lambda, trials).map_err(|e| Error::InvalidInstance(e.to_string()))?;
            let nf = trials as f64;
            let fisher: f64 = (0..=trials)
                .map(|y| {
                    let yf = y as f64;
                    let score = yf / lambda - (nf - yf) / (1.0 - lambda);
                    binom.pmf(y) * score * score
                })
                .sum();
            total += InfoMatrix::outer(sens.gradient(m.kind, m.time, m.node), node.weight * fisher);
        }
    }
    Ok(total)
}

/// The BCRLB criteria of a selection: `Tr C̄(μ)` for `a`, `ln det C̄(μ)` for
/// `d`, with `C̄(μ)` the inverse of the Bayesian information.
pub fn bcrlb_criterion(info: InfoMatrix, which: Criterion) -> Result<f64> {
    let c = info.inverse()?;
    Ok(match which {
        Criterion::A => c.trace(),
        Criterion::D => c.det().ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(atoms: Vec<InfoMatrix>, costs: Vec<f64>, caps: Vec<u32>) -> Design {
        let ms = (0..atoms.len()).map(|i| MeasurementId::x(i, 1)).collect();
        Design::from_parts(ms, atoms, costs, caps, InfoMatrix::identity()).unwrap()
    }

    #[test]
    fn hand_evaluated_objectives() {
        let d = toy(vec![InfoMatrix::diag(1.0, 0.0)], vec![1.0], vec![1]);
        assert_eq!(d.value(&[0], Criterion::A), 0.0);
        assert_eq!(d.value(&[0], Criterion::D), 0.0);
        assert!((d.value(&[1], Criterion::A) - 0.5).abs() < 1e-15);
        assert!((d.value(&[1], Criterion::D) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn selection_cost_is_linear() {
        let d = toy(vec![InfoMatrix::ZERO, InfoMatrix::ZERO], vec![2.0, 3.0], vec![2, 2]);
        assert_eq!(d.cost(&[0, 0]), 0.0);
        assert_eq!(d.cost(&[2, 0]), 4.0);
        let ys = d.ground_set(None);
        let sel = Selection::from_elements(&ys);
        assert_eq!(d.cost(&d.counts_of(&sel)), ys.iter().map(|y| y.cost).sum::<f64>());
    }

    #[test]
    fn large_budget_takes_everything() {
        let d = toy(
            vec![InfoMatrix::diag(1.0, 0.0), InfoMatrix::diag(0.0, 2.0), InfoMatrix::new(1.0, 0.5, 1.0)],
            vec![1.0, 2.0, 3.0],
            vec![2, 1, 2],
        );
        let t = greedy(&d, Criterion::D, 100.0).unwrap();
        assert_eq!(t.chain.len(), 5);
        assert!(t.rejected.is_empty());
        assert_eq!(t.choice, FinalChoice::Chain);
        assert_eq!(gamma2_hat(&d, &t, 0.0), f64::INFINITY);
    }

    #[test]
    fn budget_below_every_cost_is_a_precondition_error() {
        let d = toy(vec![InfoMatrix::identity()], vec![2.0], vec![1]);
        assert!(matches!(greedy(&d, Criterion::A, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn chain_respects_budget() {
        let d = toy(
            vec![InfoMatrix::diag(3.0, 0.0), InfoMatrix::diag(0.0, 1.0), InfoMatrix::diag(1.0, 1.0)],
            vec![3.0, 1.0, 2.0],
            vec![2, 2, 2],
        );
        for b in [1.0, 2.0, 3.0, 4.5, 7.0] {
            let t = greedy(&d, Criterion::A, b).unwrap();
            for j in 0..=t.chain.len() {
                assert!(t.chain_cost(j) <= b);
            }
            assert!(t.value >= t.y1_value);
        }
    }

    #[test]
    fn ties_pick_the_lowest_key() {
        let d = toy(vec![InfoMatrix::identity(); 3], vec![1.0; 3], vec![1; 3]);
        let t = greedy(&d, Criterion::D, 1.0).unwrap();
        assert_eq!(t.y1.measurement.node, 0);
        assert_eq!(t.chain[0].measurement.node, 0);
        assert_eq!(t.rejected.len(), 2);
    }

    #[test]
    fn isotropic_prior_with_zero_atoms() {
        let d = toy(vec![InfoMatrix::ZERO; 2], vec![1.0; 2], vec![1; 2]);
        let t = greedy(&d, Criterion::A, 1.0).unwrap();
        let b = gamma1_lower_bound(&d, &t, Gamma1Form::Lemma, 0.0);
        assert_eq!(b.value, 1.0);

        let ms = vec![MeasurementId::x(0, 1)];
        let d = Design::from_parts(ms, vec![InfoMatrix::ZERO], vec![1.0], vec![1], InfoMatrix::diag(4.0, 1.0)).unwrap();
        let t = greedy(&d, Criterion::A, 1.0).unwrap();
        let b = gamma1_lower_bound(&d, &t, Gamma1Form::Lemma, 0.0);
        assert!((b.value - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn weyl_form_is_looser() {
        let d = toy(
            vec![InfoMatrix::new(2.0, 1.0, 0.6), InfoMatrix::new(0.1, -0.2, 3.0), InfoMatrix::diag(1.0, 0.0)],
            vec![1.0, 2.0, 1.0],
            vec![2, 1, 2],
        );
        let t = greedy(&d, Criterion::A, 3.0).unwrap();
        let lemma = gamma1_lower_bound(&d, &t, Gamma1Form::Lemma, 0.0);
        let weyl = gamma1_lower_bound(&d, &t, Gamma1Form::Weyl, 0.0);
        let perturbed = gamma1_lower_bound(&d, &t, Gamma1Form::Lemma, 0.01);
        assert!(weyl.value <= lemma.value + 1e-12);
        assert!(perturbed.value <= lemma.value);
        assert!(lemma.value > 0.0 && lemma.value <= 1.0);
    }

    #[test]
    fn guarantee_constants() {
        let d = guarantee(Criterion::D, 0.0, 0.0, 5.0, 1.0, 3.0, 0.0);
        assert!((d.fraction - 0.316_060_279).abs() < 1e-9);
        let a = guarantee(Criterion::A, 0.3, 1.5, 5.0, 1.0, 3.0, 0.0);
        assert!((a.fraction - 0.129_590_889).abs() < 1e-9);
        assert_eq!(guarantee(Criterion::A, 0.0, 2.0, 5.0, 1.0, 3.0, 0.0).fraction, 0.0);
        let s = guarantee(Criterion::A, 0.3, 1.0, 6.0, 2.0, 3.0, 0.5);
        assert!((s.slack - (4.5 + 1.0) * 0.5).abs() < 1e-15);
        let s = guarantee(Criterion::D, 0.3, 1.0, 6.0, 2.0, 3.0, 0.5);
        assert!((s.slack - 4.5 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn criterion_parsing() {
        assert_eq!("a".parse::<Criterion>().unwrap(), Criterion::A);
        assert_eq!("d".parse::<Criterion>().unwrap(), Criterion::D);
        assert!("x".parse::<Criterion>().is_err());
    }
}
