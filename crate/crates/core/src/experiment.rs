//! Seeded instance generation and budget sweeps.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). Replication `r`
//! of a sweep with master seed `s` uses the instance seed obtained as the first
//! `u64` of ChaCha8 seeded with `s` on stream `r`.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::bayes::{BetaPrior, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::io::{PemsFile, Provenance};
use crate::network::{Edge, EpidemicNetwork, InitialCondition};
use crate::oracle::{brute_force_pems, brute_force_pims_pairs};
use crate::pems::{
    gamma1_lower_bound, gamma2_hat, greedy, guarantee, probe_counts, Criterion, Design, Gamma1Form,
    PemsInstance, QuadratureError,
};
use crate::pims::{algorithm1, proposition_bound, PimsInstance};

pub const RNG_NAME: &str = "ChaCha8";
pub const SCHEMA_HEADER: &str = "# schema-version: 1";

/// Target value of `max_i h · β_hi · Σ_j a_ij` after rescaling.
pub const WEIGHT_MARGIN: f64 = 0.9;

const TOPOLOGY: &str = include_str!("../assets/paper_small_topology.json");

#[derive(Deserialize)]
struct Topology {
    n: usize,
    self_loops: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

/// The bundled 5-node topology as 0-based `(from, to)` pairs, self-loops first.
pub fn bundled_topology() -> (usize, Vec<(usize, usize)>) {
    let t: Topology = serde_json::from_str(TOPOLOGY).expect("bundled topology parses");
    let mut pairs: Vec<_> = t.self_loops.iter().map(|&i| (i - 1, i - 1)).collect();
    pairs.extend(t.edges.iter().map(|&(j, i)| (j - 1, i - 1)));
    (t.n, pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    PaperSmall,
    PaperLarge,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::PaperSmall => "paper_small",
            Template::PaperLarge => "paper_large",
        }
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_small" => Ok(Template::PaperSmall),
            "paper_large" => Ok(Template::PaperLarge),
            other => Err(Error::InvalidInstance(format!(
                "unknown template {other:?}, expected paper_small or paper_large"
            ))),
        }
    }
}

/// Instance seed for replication `rep`.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(rep as u64);
    rng.next_u64()
}

/// Draws `U(0.5, 1.5)` weights for `pairs` in order, then scales them so that
/// the largest closed row sum times `h · beta_hi` equals [`WEIGHT_MARGIN`].
fn random_network(rng: &mut ChaCha8Rng, n: usize, pairs: &[(usize, usize)], h: f64, beta_hi: f64) -> Result<EpidemicNetwork> {
    let raw: Vec<f64> = pairs.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let mut rows = vec![0.0; n];
    for (&(_, to), &w) in pairs.iter().zip(&raw) {
        rows[to] += w;
    }
    let max_row = rows.iter().copied().fold(0.0, f64::max);
    let scale = if max_row > 0.0 { WEIGHT_MARGIN / (h * beta_hi * max_row) } else { 1.0 };
    let edges = pairs
        .iter()
        .zip(&raw)
        .map(|(&(from, to), &w)| Edge { from, to, weight: w * scale })
        .collect();
    EpidemicNetwork::new(n, edges, h)
}

/// Same topology and data as `inst` with freshly drawn edge weights.
pub fn redraw_weights(inst: &PemsInstance, seed: u64) -> Result<PemsInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = inst.network.edges().iter().map(|e| (e.from, e.to)).collect();
    let network = random_network(&mut rng, inst.n(), &pairs, inst.network.h(), inst.beta_prior.hi)?;
    Ok(PemsInstance { network, ..inst.clone() })
}

pub fn generate_instance(seed: u64, template: Template) -> Result<PemsFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, pairs) = bundled_topology();
    let h = 0.1;
    let beta_prior = match template {
        Template::PaperSmall => BetaPrior::new(6.0, 3.0, 3.0, 7.0)?,
        Template::PaperLarge => BetaPrior::new(8.0, 3.0, 3.0, 7.0)?,
    };
    let delta_prior = BetaPrior::new(3.0, 4.0, 1.0, 4.0)?;
    let (t1, t2, cap) = match template {
        Template::PaperSmall => (5, 5, 2),
        Template::PaperLarge => (1, 5, 10),
    };
    let network = random_network(&mut rng, n, &pairs, h, beta_prior.hi)?;
    let mut x0 = vec![0.01; n];
    x0[0] = 0.05;
    let init = InitialCondition::from_infected(x0);
    let cost_x: Vec<f64> = (0..(t2 - t1 + 1) * n)
        .map(|_| rng.random_range(1..=3u32) as f64)
        .collect();
    let inst = PemsInstance {
        network,
        init,
        t1,
        t2,
        budget: 0.0,
        cost_r: cost_x.clone(),
        cost_x,
        zeta: vec![cap; n],
        eta: vec![cap; n],
        nx: vec![100; n],
        nr: vec![100; n],
        population: vec![1000; n],
        beta_prior,
        delta_prior,
    };
    let total: f64 = inst.measurements().iter().map(|&m| inst.unit_cost(m) * inst.cap(m) as f64).sum();
    let inst = PemsInstance { budget: (total / 2.0).round(), ..inst };
    inst.check()?;
    Ok(PemsFile::from_instance(
        &inst,
        Some(Provenance {
            rng: RNG_NAME.to_string(),
            seed,
            template: template.name().to_string(),
        }),
    ))
}

/// The exact-measurement problem on the same network, window and costs.
pub fn to_pims(inst: &PemsInstance) -> Result<PimsInstance> {
    let n = inst.n();
    let triples = |table: &[f64]| -> Vec<(usize, usize, f64)> {
        (inst.t1..=inst.t2)
            .flat_map(|k| (0..n).map(move |i| (k, i)))
            .map(|(k, i)| (k, i, table[(k - inst.t1) * n + i]))
            .collect()
    };
    PimsInstance::new(
        inst.network.clone(),
        inst.init.clone(),
        inst.t1,
        inst.t2,
        &triples(&inst.cost_x),
        &triples(&inst.cost_r),
    )
}

/// `lo:hi:step`, inclusive of `hi` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSweep {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl BudgetSweep {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|s| self.lo + s as f64 * self.step).collect()
    }
}

impl FromStr for BudgetSweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInstance(format!("budget sweep {s:?} must look like lo:hi:step"));
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else {
            return Err(bad());
        };
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi && step > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "budget sweep needs 0 <= lo <= hi and step > 0, got {s:?}"
            )));
        }
        Ok(Self { lo, hi, step })
    }
}

/// Ten evenly spaced budgets from the cheapest measurement to the full set.
pub fn default_budgets(design: &Design) -> Vec<f64> {
    let Some((lo, _)) = design.cost_range(&design.caps) else {
        return vec![0.0];
    };
    let hi = design.cost(&design.caps);
    (0..10).map(|s| lo + (hi - lo) * s as f64 / 9.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pims,
    Pems,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pims" => Ok(Mode::Pims),
            "pems" => Ok(Mode::Pems),
            other => Err(Error::InvalidInstance(format!("unknown mode {other:?}, expected pims or pems"))),
        }
    }
}

/// Where replications come from: a template regenerates the whole instance,
/// a file keeps everything but the edge weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Template(Template),
    Instance(Box<PemsInstance>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub source: Source,
    pub mode: Mode,
    pub objective: Criterion,
    /// `None` picks [`default_budgets`] from replication 0.
    pub budgets: Option<BudgetSweep>,
    pub replications: usize,
    pub seed: u64,
    pub grid_points: usize,
    /// Estimate ε and ε′ by grid doubling; otherwise both are 0.
    pub measure_eps: bool,
}

impl ExperimentSpec {
    pub fn new(source: Source, objective: Criterion) -> Self {
        Self {
            source,
            mode: Mode::Pems,
            objective,
            budgets: None,
            replications: 1,
            seed: 0,
            grid_points: DEFAULT_GRID_POINTS,
            measure_eps: true,
        }
    }

    pub fn instance(&self, rep: usize) -> Result<PemsInstance> {
        let seed = replication_seed(self.seed, rep);
        match &self.source {
            Source::Template(t) => generate_instance(seed, *t)?.to_instance(),
            Source::Instance(inst) => redraw_weights(inst, seed),
        }
    }
}

/// One CSV line of a PEMS sweep. `replication` is `None` on mean rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub replication: Option<usize>,
    pub budget: f64,
    pub greedy_value: f64,
    pub opt_value: Option<f64>,
    pub ratio: Option<f64>,
    pub gamma1_lb: Option<f64>,
    pub gamma2_hat: Option<f64>,
    pub guarantee_fraction: f64,
    pub slack: f64,
    pub eps: f64,
    pub holds: Option<bool>,
}

/// Greedy, oracle and bounds for each budget on one prepared design. The
/// oracle cells stay empty when the lattice exceeds its guard; `γ` columns are
/// filled for the trace criterion only.
pub fn evaluate_budgets(
    inst: &PemsInstance,
    design: &Design,
    which: Criterion,
    budgets: &[f64],
    measure_eps: bool,
    grid_points: usize,
    replication: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let traces: Vec<_> = budgets
        .iter()
        .map(|&b| match greedy(design, which, b) {
            Ok(t) => Ok(Some(t)),
            Err(Error::Precondition(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let opts: Vec<Option<f64>> = budgets
        .iter()
        .map(|&b| match brute_force_pems(design, which, b) {
            Ok(r) => Ok(Some(r.value)),
            Err(Error::GuardExceeded { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let err = if measure_eps {
        let fine = Design::prepare(inst, 2 * grid_points)?;
        let mut samples = probe_counts(design);
        samples.extend(traces.iter().flatten().map(|t| design.counts_of(&t.selection)));
        for t in traces.iter().flatten() {
            samples.extend((0..=t.chain.len()).map(|j| t.prefix_counts(design, j)));
        }
        QuadratureError::between(design, &fine, &samples)
    } else {
        QuadratureError { eps_a: 0.0, eps_d: 0.0, eps_prime: 0.0 }
    };
    let eps = err.eps(which);

    Ok(budgets
        .iter()
        .zip(traces)
        .zip(opts)
        .map(|((&budget, trace), opt)| {
            let ratio = opt.filter(|&o| o > 0.0);
            let Some(trace) = trace else {
                return SweepRow {
                    replication,
                    budget,
                    greedy_value: 0.0,
                    opt_value: opt,
                    ratio: ratio.map(|_| 0.0),
                    gamma1_lb: None,
                    gamma2_hat: None,
                    guarantee_fraction: 0.0,
                    slack: 0.0,
                    eps,
                    holds: opt.map(|o| o <= 0.0),
                };
            };
            let (c_min, c_max) = design.cost_range(&trace.caps).expect("greedy ran on a nonempty ground set");
            let (g1, g2) = match which {
                Criterion::A => (
                    Some(gamma1_lower_bound(design, &trace, Gamma1Form::Lemma, err.eps_prime).value),
                    Some(gamma2_hat(design, &trace, eps)),
                ),
                Criterion::D => (None, None),
            };
            let g = guarantee(which, g1.unwrap_or(1.0), g2.unwrap_or(1.0), budget, c_min, c_max, eps);
            SweepRow {
                replication,
                budget,
                greedy_value: trace.value,
                opt_value: opt,
                ratio: ratio.map(|o| trace.value / o),
                gamma1_lb: g1,
                gamma2_hat: g2,
                guarantee_fraction: g.fraction,
                slack: g.slack,
                eps,
                holds: opt.map(|o| g.holds(trace.value, o)),
            }
        })
        .collect())
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v?;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

fn mean_rows(rows: &[SweepRow], budgets: &[f64]) -> Vec<SweepRow> {
    budgets
        .iter()
        .enumerate()
        .map(|(b, &budget)| {
            let group: Vec<&SweepRow> = rows.iter().skip(b).step_by(budgets.len()).collect();
            let mean = |f: &dyn Fn(&SweepRow) -> Option<f64>| mean_of(group.iter().map(|r| f(r)));
            SweepRow {
                replication: None,
                budget,
                greedy_value: mean(&|r| Some(r.greedy_value)).unwrap_or(0.0),
                opt_value: mean(&|r| r.opt_value),
                ratio: mean(&|r| r.ratio),
                gamma1_lb: mean(&|r| r.gamma1_lb),
                gamma2_hat: mean(&|r| r.gamma2_hat),
                guarantee_fraction: mean(&|r| Some(r.guarantee_fraction)).unwrap_or(0.0),
                slack: mean(&|r| Some(r.slack)).unwrap_or(0.0),
                eps: mean(&|r| Some(r.eps)).unwrap_or(0.0),
                holds: group.iter().map(|r| r.holds).collect::<Option<Vec<_>>>().map(|v| v.iter().all(|&h| h)),
            }
        })
        .collect()
}

/// All per-replication rows in `(replication, budget)` order followed by one
/// mean row per budget. Replications run in parallel; nothing depends on the
/// thread count.
pub fn run_pems_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    if spec.replications == 0 {
        return Err(Error::Precondition("replications must be at least 1".into()));
    }
    let budgets = match spec.budgets {
        Some(s) => s.values(),
        None => default_budgets(&Design::prepare(&spec.instance(0)?, spec.grid_points)?),
    };
    let per_rep: Vec<Vec<SweepRow>> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let inst = spec.instance(rep)?;
            let design = Design::prepare(&inst, spec.grid_points)?;
            evaluate_budgets(&inst, &design, spec.objective, &budgets, spec.measure_eps, spec.grid_points, Some(rep))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<SweepRow> = per_rep.into_iter().flatten().collect();
    let means = mean_rows(&rows, &budgets);
    rows.extend(means);
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SWEEP_COLUMNS: &str =
    "replication,B,greedy_value,opt_value,ratio,gamma1_lb,gamma2_hat,guarantee_fraction,slack,eps,holds";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SCHEMA_HEADER}\n{SWEEP_COLUMNS}\n");
    for r in rows {
        let rep = r.replication.map(|k| k.to_string()).unwrap_or_else(|| "mean".into());
        let _ = writeln!(
            out,
            "{rep},{},{},{},{},{},{},{},{},{},{}",
            r.budget,
            r.greedy_value,
            cell(r.opt_value),
            cell(r.ratio),
            cell(r.gamma1_lb),
            cell(r.gamma2_hat),
            r.guarantee_fraction,
            r.slack,
            r.eps,
            r.holds.map(|h| h.to_string()).unwrap_or_default(),
        );
    }
    out
}

/// One replication of the exact-measurement comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PimsRow {
    pub replication: usize,
    pub algorithm1_cost: f64,
    pub opt_cost: Option<f64>,
    pub proposition_numerator: Option<f64>,
    pub proposition_ratio: Option<f64>,
}

pub fn run_pims_sweep(spec: &ExperimentSpec) -> Result<Vec<PimsRow>> {
    if spec.replications == 0 {
        return Err(Error::Precondition("replications must be at least 1".into()));
    }
    (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let inst = to_pims(&spec.instance(rep)?)?;
            let strategy = algorithm1(&inst)?;
            let opt = match brute_force_pims_pairs(&inst) {
                Ok(r) => Some(r.cost),
                Err(Error::GuardExceeded { .. }) => None,
                Err(e) => return Err(e),
            };
            let bound = proposition_bound(&inst)?;
            Ok(PimsRow {
                replication: rep,
                algorithm1_cost: strategy.cost,
                opt_cost: opt,
                proposition_numerator: bound.map(|b| b.numerator),
                proposition_ratio: bound.map(|b| b.ratio),
            })
        })
        .collect()
}

pub fn pims_csv(rows: &[PimsRow]) -> String {
    let mut out = format!("{SCHEMA_HEADER}\nreplication,algorithm1_cost,opt_cost,proposition_numerator,proposition_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.replication,
            r.algorithm1_cost,
            cell(r.opt_cost),
            cell(r.proposition_numerator),
            cell(r.proposition_ratio),
        );
    }
    out
}

/// Runs the spec and renders its CSV.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<String> {
    match spec.mode {
        Mode::Pems => Ok(sweep_csv(&run_pems_sweep(spec)?)),
        Mode::Pims => Ok(pims_csv(&run_pims_sweep(spec)?)),
    }
}
