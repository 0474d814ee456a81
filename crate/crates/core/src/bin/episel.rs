use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use episel::bayes::DEFAULT_GRID_POINTS;
use episel::dynamics::{simulate, simulate_with_sensitivities, write_trajectory_csv};
use episel::experiment::{
    evaluate_budgets, generate_instance, redraw_weights, run_sweep, BudgetSweep, ExperimentSpec, Mode,
    Source, Template, SCHEMA_HEADER,
};
use episel::io::{pims_instance, read_json, write_json, NetworkFile, PemsFile, PimsCostFile};
use episel::network::validate;
use episel::oracle::{
    brute_force_pems, brute_force_pims_pairs, design_subset_values, exhaustive_gamma1, monotonicity_audit,
    submodularity_audit,
};
use episel::pems::{greedy, gamma1_lower_bound, Criterion, Design, Gamma1Form, PemsInstance};
use episel::pims::{algorithm1, identify_theta, proposition_bound};
use episel::{Error, Result, Theta};

#[derive(Parser)]
#[command(name = "episel", version, about = "Measurement selection for networked SIR parameter estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated random-measurement instance as JSON.
    Gen {
        #[arg(long, default_value = "paper_small")]
        template: Template,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a network file and print the trajectory.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_parser = parse_theta)]
        theta: Theta,
        #[arg(long)]
        horizon: usize,
        /// Append the four sensitivity columns.
        #[arg(long)]
        sensitivities: bool,
    },
    /// Exact-measurement selection.
    Pims {
        #[command(subcommand)]
        command: PimsCommand,
    },
    /// Random-measurement selection.
    Pems {
        #[command(subcommand)]
        command: PemsCommand,
    },
    /// Brute-force references for small instances.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Budget sweep over seeded replications.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum PimsCommand {
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        costs: PathBuf,
        /// Recover θ from data simulated under `beta,delta`.
        #[arg(long, value_parser = parse_theta)]
        theta_true: Option<Theta>,
    },
}

#[derive(Args)]
struct Grid {
    #[arg(long, env = "EPISEL_GRID_POINTS", default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

#[derive(Subcommand)]
enum PemsCommand {
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "a")]
        objective: Criterion,
        /// Budgets `lo:hi:step`; defaults to the instance budget.
        #[arg(long)]
        budget_sweep: Option<BudgetSweep>,
        /// Add the submodularity-ratio bounds and the quadrature error.
        #[arg(long)]
        bounds: bool,
        /// Redraw the edge weights from this seed before solving.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: Grid,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Best selection within the budget over the whole lattice.
    Pems {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "a")]
        objective: Criterion,
        #[arg(long)]
        budget: Option<f64>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Cheapest exact strategy over every equation pair.
    Pims {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        costs: PathBuf,
    },
    /// Exact type-1 submodularity ratio along the greedy chain.
    Gamma1 {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "a")]
        objective: Criterion,
        #[arg(long)]
        budget: Option<f64>,
        #[command(flatten)]
        grid: Grid,
    },
    /// Exhaustive submodularity and monotonicity check.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "d")]
        objective: Criterion,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        grid: Grid,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "instance", required_unless_present = "instance")]
    template: Option<Template>,
    /// Instance whose edge weights are redrawn per replication.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "pems")]
    mode: Mode,
    #[arg(long, default_value = "a")]
    objective: Criterion,
    #[arg(long)]
    budget_sweep: Option<BudgetSweep>,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the grid-doubling estimate of the quadrature error.
    #[arg(long)]
    no_eps: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    grid: Grid,
}

fn parse_theta(s: &str) -> std::result::Result<Theta, String> {
    let (b, d) = s.split_once(',').ok_or("expected beta,delta")?;
    let beta = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let delta = d.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Theta::new(beta, delta))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_pems(path: &Path) -> Result<PemsInstance> {
    read_json::<PemsFile>(path)?.to_instance()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { template, seed, out } => {
            let file = generate_instance(seed, template)?;
            match out {
                Some(p) => write_json(&p, &file),
                None => emit(None, &(serde_json::to_string_pretty(&file)? + "\n")),
            }
        }
        Command::Simulate {
            instance,
            theta,
            horizon,
            sensitivities,
        } => {
            let (net, init) = read_json::<NetworkFile>(&instance)?.to_model()?;
            validate(&net, &init, theta.beta, theta.delta)?;
            let mut buf = format!("{SCHEMA_HEADER}\n").into_bytes();
            if sensitivities {
                let (traj, sens) = simulate_with_sensitivities(&net, &init, theta, horizon)?;
                write_trajectory_csv(&mut buf, &traj, Some(&sens))?;
            } else {
                write_trajectory_csv(&mut buf, &simulate(&net, &init, theta, horizon)?, None)?;
            }
            std::io::stdout().write_all(&buf)?;
            Ok(())
        }
        Command::Pims {
            command: PimsCommand::Solve {
                instance,
                costs,
                theta_true,
            },
        } => {
            let inst = pims_instance(&read_json(&instance)?, &read_json::<PimsCostFile>(&costs)?)?;
            let strategy = algorithm1(&inst)?;
            let bound = proposition_bound(&inst)?;
            let ids: Vec<String> = strategy.selected.iter().map(|m| m.to_string()).collect();
            let mut out = format!("{SCHEMA_HEADER}\nfield,value\n");
            let _ = writeln!(out, "selected,{}", ids.join(";"));
            let _ = writeln!(out, "cost,{}", strategy.cost);
            if let Some((q1, q2)) = strategy.pair {
                let _ = writeln!(out, "pair,{q1};{q2}");
            }
            let _ = writeln!(out, "proposition_numerator,{}", opt_cell(bound.map(|b| b.numerator)));
            let _ = writeln!(out, "proposition_ratio,{}", opt_cell(bound.map(|b| b.ratio)));
            if let Some(theta) = theta_true {
                let id = identify_theta(&inst, &strategy.selected, theta)?;
                let _ = writeln!(out, "beta_hat,{}", id.theta.beta);
                let _ = writeln!(out, "delta_hat,{}", id.theta.delta);
                let _ = writeln!(out, "rank,{}", id.rank);
            }
            emit(None, &out)
        }
        Command::Pems {
            command:
                PemsCommand::Solve {
                    instance,
                    objective,
                    budget_sweep,
                    bounds,
                    seed,
                    grid,
                },
        } => {
            let mut inst = load_pems(&instance)?;
            if let Some(seed) = seed {
                inst = redraw_weights(&inst, seed)?;
            }
            let design = Design::prepare(&inst, grid.grid_points)?;
            let budgets = budget_sweep.map(|s| s.values()).unwrap_or_else(|| vec![inst.budget]);
            let rows = evaluate_budgets(&inst, &design, objective, &budgets, bounds, grid.grid_points, None)?;
            let mut out =
                format!("{SCHEMA_HEADER}\nB,greedy_value,opt_value,gamma1_lb,gamma2_hat,guarantee_fraction,slack,selection\n");
            for r in rows {
                let sel = match greedy(&design, objective, r.budget) {
                    Ok(t) => t.selection.render(),
                    Err(Error::Precondition(_)) => String::new(),
                    Err(e) => return Err(e),
                };
                let (g1, g2) = if bounds { (r.gamma1_lb, r.gamma2_hat) } else { (None, None) };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.budget,
                    r.greedy_value,
                    opt_cell(r.opt_value),
                    opt_cell(g1),
                    opt_cell(g2),
                    r.guarantee_fraction,
                    r.slack,
                    sel
                );
            }
            emit(None, &out)
        }
        Command::Oracle { command } => {
            let header = format!("{SCHEMA_HEADER}\nvalue,optimizer,space_size,seconds\n");
            let line = match command {
                OracleCommand::Pems {
                    instance,
                    objective,
                    budget,
                    grid,
                } => {
                    let inst = load_pems(&instance)?;
                    let design = Design::prepare(&inst, grid.grid_points)?;
                    let r = brute_force_pems(&design, objective, budget.unwrap_or(inst.budget))?;
                    format!("{},{},{},{}", r.value, r.selection.render(), r.space_size, r.seconds)
                }
                OracleCommand::Pims { instance, costs } => {
                    let inst = pims_instance(&read_json(&instance)?, &read_json::<PimsCostFile>(&costs)?)?;
                    let r = brute_force_pims_pairs(&inst)?;
                    let ids: Vec<String> = r.selected.iter().map(|m| m.to_string()).collect();
                    format!("{},{},{},{}", r.cost, ids.join(";"), r.space_size, r.seconds)
                }
                OracleCommand::Gamma1 {
                    instance,
                    objective,
                    budget,
                    grid,
                } => {
                    let inst = load_pems(&instance)?;
                    let design = Design::prepare(&inst, grid.grid_points)?;
                    let trace = greedy(&design, objective, budget.unwrap_or(inst.budget))?;
                    let start = std::time::Instant::now();
                    let exact = exhaustive_gamma1(&design, &trace)?;
                    let size = 1u64 << design.ground_set(Some(trace.budget)).len();
                    let lb = gamma1_lower_bound(&design, &trace, Gamma1Form::Lemma, 0.0).value;
                    format!("{exact},lower_bound={lb},{size},{}", start.elapsed().as_secs_f64())
                }
                OracleCommand::Audit {
                    instance,
                    objective,
                    tol,
                    grid,
                } => {
                    let inst = load_pems(&instance)?;
                    let design = Design::prepare(&inst, grid.grid_points)?;
                    let start = std::time::Instant::now();
                    let (values, size) = design_subset_values(&design, objective)?;
                    let sub = submodularity_audit(&values, size, tol)?;
                    let mono = monotonicity_audit(&values, size, tol)?;
                    let (value, witness) = match (sub, mono) {
                        (Some(c), _) => (
                            c.gain_b - c.gain_a,
                            format!("submodularity:A={:b};B={:b};y={}", c.a, c.b, c.y),
                        ),
                        (None, Some((set, y))) => (1.0, format!("monotonicity:A={set:b};y={y}")),
                        (None, None) => (0.0, String::new()),
                    };
                    format!("{value},{witness},{},{}", 1u64 << size, start.elapsed().as_secs_f64())
                }
            };
            emit(None, &format!("{header}{line}\n"))
        }
        Command::Sweep(args) => {
            let source = match (&args.template, &args.instance) {
                (Some(t), _) => Source::Template(*t),
                (None, Some(p)) => Source::Instance(Box::new(load_pems(p)?)),
                (None, None) => unreachable!("clap requires one source"),
            };
            let spec = ExperimentSpec {
                source,
                mode: args.mode,
                objective: args.objective,
                budgets: args.budget_sweep,
                replications: args.replications,
                seed: args.seed,
                grid_points: args.grid.grid_points,
                measure_eps: !args.no_eps,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(args.threads)
                .build()
                .map_err(|e| Error::Precondition(e.to_string()))?;
            let csv = pool.install(|| run_sweep(&spec))?;
            emit(args.out.as_deref(), &csv)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::GuardExceeded { .. } => 3,
        Error::Validation(_)
        | Error::InvalidInstance(_)
        | Error::Precondition(_)
        | Error::Json(_)
        | Error::NotSymmetric(_)
        | Error::NotPositiveDefinite(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("episel: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
