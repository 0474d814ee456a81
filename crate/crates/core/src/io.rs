//! JSON file formats. Node ids are 1-based in every file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bayes::BetaPrior;
use crate::error::{Error, Result};
use crate::network::{Edge, EpidemicNetwork, InitialCondition};
use crate::pems::PemsInstance;
use crate::pims::PimsInstance;

/// Network plus initial condition: `edges` holds `[j, i, a_ij]` for `j -> i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub h: f64,
    pub s0: Vec<f64>,
    pub x0: Vec<f64>,
    pub r0: Vec<f64>,
}

fn zero_based(id: usize, n: usize, what: &str) -> Result<usize> {
    if id == 0 || id > n {
        return Err(Error::InvalidInstance(format!("{what} id {id} is outside 1..={n}")));
    }
    Ok(id - 1)
}

impl NetworkFile {
    pub fn to_model(&self) -> Result<(EpidemicNetwork, InitialCondition)> {
        let edges = self
            .edges
            .iter()
            .map(|&(j, i, w)| {
                Ok(Edge {
                    from: zero_based(j, self.n, "edge source")?,
                    to: zero_based(i, self.n, "edge target")?,
                    weight: w,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let net = EpidemicNetwork::new(self.n, edges, self.h)?;
        let init = InitialCondition {
            s0: self.s0.clone(),
            x0: self.x0.clone(),
            r0: self.r0.clone(),
        };
        Ok((net, init))
    }

    pub fn from_model(net: &EpidemicNetwork, init: &InitialCondition) -> Self {
        Self {
            n: net.n(),
            edges: net.edges().iter().map(|e| (e.from + 1, e.to + 1, e.weight)).collect(),
            h: net.h(),
            s0: init.s0.clone(),
            x0: init.x0.clone(),
            r0: init.r0.clone(),
        }
    }
}

/// Costs for the exact-measurement setting: `[k, i, cost]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PimsCostFile {
    pub t1: usize,
    pub t2: usize,
    pub cost_x: Vec<(usize, usize, f64)>,
    pub cost_r: Vec<(usize, usize, f64)>,
}

fn triples(list: &[(usize, usize, f64)], n: usize) -> Result<Vec<(usize, usize, f64)>> {
    list.iter()
        .map(|&(k, i, c)| Ok((k, zero_based(i, n, "cost node")?, c)))
        .collect()
}

pub fn pims_instance(net: &NetworkFile, costs: &PimsCostFile) -> Result<PimsInstance> {
    let (network, init) = net.to_model()?;
    PimsInstance::new(
        network,
        init,
        costs.t1,
        costs.t2,
        &triples(&costs.cost_x, net.n)?,
        &triples(&costs.cost_r, net.n)?,
    )
}

/// A per-node quantity written either as one shared value or as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode<T> {
    Shared(T),
    Each(Vec<T>),
}

impl<T: Copy> PerNode<T> {
    pub fn expand(&self, n: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerNode::Shared(v) => Ok(vec![*v; n]),
            PerNode::Each(v) if v.len() == n => Ok(v.clone()),
            PerNode::Each(v) => Err(Error::InvalidInstance(format!("{what} has {} entries, expected {n}", v.len()))),
        }
    }
}

/// How a generated instance was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub rng: String,
    pub seed: u64,
    pub template: String,
}

/// Random-measurement instance: the network file plus window, budget, costs,
/// caps, batch sizes and priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PemsFile {
    #[serde(flatten)]
    pub network: NetworkFile,
    pub t1: usize,
    pub t2: usize,
    pub budget: f64,
    pub cost_x: Vec<(usize, usize, f64)>,
    pub cost_r: Vec<(usize, usize, f64)>,
    pub zeta: PerNode<u32>,
    pub eta: PerNode<u32>,
    #[serde(rename = "Nx")]
    pub nx: PerNode<u64>,
    #[serde(rename = "Nr")]
    pub nr: PerNode<u64>,
    #[serde(rename = "N")]
    pub population: PerNode<u64>,
    pub beta_prior: BetaPrior,
    pub delta_prior: BetaPrior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Provenance>,
}

impl PemsFile {
    pub fn to_instance(&self) -> Result<PemsInstance> {
        let (network, init) = self.network.to_model()?;
        let n = self.network.n;
        if self.t1 > self.t2 {
            return Err(Error::InvalidInstance(format!("need t1 <= t2, got {} > {}", self.t1, self.t2)));
        }
        let slots = (self.t2 - self.t1 + 1) * n;
        let table = |list: &[(usize, usize, f64)], what: &str| -> Result<Vec<f64>> {
            let mut out = vec![f64::NAN; slots];
            for &(k, i, c) in list {
                let i = zero_based(i, n, what)?;
                if k < self.t1 || k > self.t2 {
                    return Err(Error::InvalidInstance(format!("{what} time {k} outside [{}, {}]", self.t1, self.t2)));
                }
                out[(k - self.t1) * n + i] = c;
            }
            if out.iter().any(|c| c.is_nan()) {
                return Err(Error::InvalidInstance(format!("{what} must cover every (k, i) in the window")));
            }
            Ok(out)
        };
        let inst = PemsInstance {
            network,
            init,
            t1: self.t1,
            t2: self.t2,
            budget: self.budget,
            cost_x: table(&self.cost_x, "cost_x")?,
            cost_r: table(&self.cost_r, "cost_r")?,
            zeta: self.zeta.expand(n, "zeta")?,
            eta: self.eta.expand(n, "eta")?,
            nx: self.nx.expand(n, "Nx")?,
            nr: self.nr.expand(n, "Nr")?,
            population: self.population.expand(n, "N")?,
            beta_prior: self.beta_prior,
            delta_prior: self.delta_prior,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn from_instance(inst: &PemsInstance, generator: Option<Provenance>) -> Self {
        let n = inst.n();
        let list = |table: &[f64]| -> Vec<(usize, usize, f64)> {
            (inst.t1..=inst.t2)
                .flat_map(|k| (0..n).map(move |i| (k, i)))
                .map(|(k, i)| (k, i + 1, table[(k - inst.t1) * n + i]))
                .collect()
        };
        Self {
            network: NetworkFile::from_model(&inst.network, &inst.init),
            t1: inst.t1,
            t2: inst.t2,
            budget: inst.budget,
            cost_x: list(&inst.cost_x),
            cost_r: list(&inst.cost_r),
            zeta: PerNode::Each(inst.zeta.clone()),
            eta: PerNode::Each(inst.eta.clone()),
            nx: PerNode::Each(inst.nx.clone()),
            nr: PerNode::Each(inst.nr.clone()),
            population: PerNode::Each(inst.population.clone()),
            beta_prior: inst.beta_prior,
            delta_prior: inst.delta_prior,
            generator,
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
