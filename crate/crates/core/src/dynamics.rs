//! Discrete-time networked SIR recursion and its forward parameter sensitivities.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{check_assumptions, DistanceProfile, EpidemicNetwork, InitialCondition};

/// Infection rate `beta` and recovery rate `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta: f64,
    pub delta: f64,
}

impl Theta {
    pub fn new(beta: f64, delta: f64) -> Self {
        Self { beta, delta }
    }
}

/// Which state a measurement or equation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// Infected proportion `x`.
    X,
    /// Recovered proportion `r`.
    R,
}

impl StateKind {
    pub fn symbol(self) -> char {
        match self {
            StateKind::X => 'x',
            StateKind::R => 'r',
        }
    }
}

/// `(T+1) × n` time series stored row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    n: usize,
    data: Vec<f64>,
}

impl Series {
    fn zeros(steps: usize, n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; steps * n],
        }
    }

    #[inline]
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.n + i]
    }

    /// All nodes at time `k`.
    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    #[inline]
    fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / self.n - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirTrajectory {
    pub s: Series,
    pub x: Series,
    pub r: Series,
}

impl SirTrajectory {
    pub fn horizon(&self) -> usize {
        self.s.horizon()
    }

    pub fn n(&self) -> usize {
        self.s.n
    }

    pub fn state(&self, kind: StateKind, k: usize, i: usize) -> f64 {
        match kind {
            StateKind::X => self.x.at(k, i),
            StateKind::R => self.r.at(k, i),
        }
    }
}

/// Partial derivatives of every state with respect to `beta` and `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrajectory {
    pub ds_dbeta: Series,
    pub dx_dbeta: Series,
    pub dr_dbeta: Series,
    pub ds_ddelta: Series,
    pub dx_ddelta: Series,
    pub dr_ddelta: Series,
}

impl SensitivityTrajectory {
    /// `(∂λ/∂β, ∂λ/∂δ)` for `λ ∈ {x, r}` at `(k, i)`.
    pub fn gradient(&self, kind: StateKind, k: usize, i: usize) -> [f64; 2] {
        match kind {
            StateKind::X => [self.dx_dbeta.at(k, i), self.dx_ddelta.at(k, i)],
            StateKind::R => [self.dr_dbeta.at(k, i), self.dr_ddelta.at(k, i)],
        }
    }
}

fn check(network: &EpidemicNetwork, init: &InitialCondition, theta: Theta) -> Result<()> {
    check_assumptions(network, init, theta.beta, theta.delta, false)?;
    Ok(())
}

fn initial_state(init: &InitialCondition, n: usize, horizon: usize) -> SirTrajectory {
    let steps = horizon + 1;
    let mut traj = SirTrajectory {
        s: Series::zeros(steps, n),
        x: Series::zeros(steps, n),
        r: Series::zeros(steps, n),
    };
    traj.s.row_mut(0).copy_from_slice(&init.s0);
    traj.x.row_mut(0).copy_from_slice(&init.x0);
    traj.r.row_mut(0).copy_from_slice(&init.r0);
    traj
}

/// Forward recursion of the SIR model for `k = 0..horizon-1`.
pub fn simulate(
    network: &EpidemicNetwork,
    init: &InitialCondition,
    theta: Theta,
    horizon: usize,
) -> Result<SirTrajectory> {
    check(network, init, theta)?;
    let n = network.n();
    let h = network.h();
    let Theta { beta, delta } = theta;
    let mut traj = initial_state(init, n, horizon);
    for k in 0..horizon {
        for i in 0..n {
            let s = traj.s.at(k, i);
            let x = traj.x.at(k, i);
            let r = traj.r.at(k, i);
            let infection = h * s * beta * network.weighted_inflow(i, traj.x.row(k));
            traj.s.data[(k + 1) * n + i] = s - infection;
            traj.x.data[(k + 1) * n + i] = (1.0 - h * delta) * x + infection;
            traj.r.data[(k + 1) * n + i] = r + h * delta * x;
        }
    }
    Ok(traj)
}

/// Steps the state and all six sensitivity recursions together.
pub fn simulate_with_sensitivities(
    network: &EpidemicNetwork,
    init: &InitialCondition,
    theta: Theta,
    horizon: usize,
) -> Result<(SirTrajectory, SensitivityTrajectory)> {
    check(network, init, theta)?;
    let n = network.n();
    let h = network.h();
    let Theta { beta, delta } = theta;
    let steps = horizon + 1;
    let mut traj = initial_state(init, n, horizon);
    let mut sens = SensitivityTrajectory {
        ds_dbeta: Series::zeros(steps, n),
        dx_dbeta: Series::zeros(steps, n),
        dr_dbeta: Series::zeros(steps, n),
        ds_ddelta: Series::zeros(steps, n),
        dx_ddelta: Series::zeros(steps, n),
        dr_ddelta: Series::zeros(steps, n),
    };

    for k in 0..horizon {
        let next = (k + 1) * n;
        for i in 0..n {
            let s = traj.s.at(k, i);
            let x = traj.x.at(k, i);
            let r = traj.r.at(k, i);
            let inflow = network.weighted_inflow(i, traj.x.row(k));
            let infection = h * s * beta * inflow;
            traj.s.data[next + i] = s - infection;
            traj.x.data[next + i] = (1.0 - h * delta) * x + infection;
            traj.r.data[next + i] = r + h * delta * x;

            // beta
            let ds = sens.ds_dbeta.at(k, i);
            let dx = sens.dx_dbeta.at(k, i);
            let dr = sens.dr_dbeta.at(k, i);
            let dinflow = network.weighted_inflow(i, sens.dx_dbeta.row(k));
            let d_infection = h * (ds * beta + s) * inflow + h * s * beta * dinflow;
            sens.ds_dbeta.data[next + i] = ds - d_infection;
            sens.dx_dbeta.data[next + i] = (1.0 - h * delta) * dx + d_infection;
            sens.dr_dbeta.data[next + i] = dr + h * delta * dx;

            // delta
            let ds = sens.ds_ddelta.at(k, i);
            let dx = sens.dx_ddelta.at(k, i);
            let dr = sens.dr_ddelta.at(k, i);
            let dinflow = network.weighted_inflow(i, sens.dx_ddelta.row(k));
            let d_infection = h * beta * (ds * inflow + s * dinflow);
            sens.ds_ddelta.data[next + i] = ds - d_infection;
            sens.dx_ddelta.data[next + i] = -h * x + (1.0 - h * delta) * dx + d_infection;
            sens.dr_ddelta.data[next + i] = dr + h * x + h * delta * dx;
        }
    }
    Ok((traj, sens))
}

/// Whether the propagation lemma forces `x_i[k]` (or `r_i[k]`) to be exactly zero.
pub fn state_is_zero(profile: &DistanceProfile, i: usize, k: usize, kind: StateKind) -> bool {
    match (profile.distance(i), kind) {
        (None, _) => true,
        (Some(d), StateKind::X) => k < d,
        (Some(d), StateKind::R) => k <= d,
    }
}

/// Writes one CSV row per `(k, i)`; node ids are 1-based.
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    traj: &SirTrajectory,
    sens: Option<&SensitivityTrajectory>,
) -> std::io::Result<()> {
    write!(out, "k,i,s,x,r")?;
    if sens.is_some() {
        write!(out, ",dx_dbeta,dx_ddelta,dr_dbeta,dr_ddelta")?;
    }
    writeln!(out)?;
    for k in 0..=traj.horizon() {
        for i in 0..traj.n() {
            write!(
                out,
                "{k},{},{},{},{}",
                i + 1,
                traj.s.at(k, i),
                traj.x.at(k, i),
                traj.r.at(k, i)
            )?;
            if let Some(sv) = sens {
                write!(
                    out,
                    ",{},{},{},{}",
                    sv.dx_dbeta.at(k, i),
                    sv.dx_ddelta.at(k, i),
                    sv.dr_dbeta.at(k, i),
                    sv.dr_ddelta.at(k, i)
                )?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
