//! Run configuration file.
//!
//! A TOML file with optional `[chain]`, `[simulation]` and `[compare]` tables;
//! omitted keys take the defaults below. Command-line flags override file
//! values. A run manifest is itself a valid configuration file: its `[config]`
//! table is used.
//!
//! ```toml
//! output = "runs/noordin"
//!
//! [chain]
//! k = 2
//! iterations = 30000
//! burn_in = 15000
//! thinning = 1
//! seed = 1
//! combiner = "min"      # or "max"
//! candidates = [2, 3, 4]
//! relabel = false
//! prior = { a = 1.0, b1 = 1.0, b2 = 1.0 }
//!
//! [simulation]
//! n = 300
//! d = 18
//! k = 3
//! alpha_star = [0.1, 0.25, 0.2, 0.1, 0.15, 0.1, 0.05, 0.05]
//! base_column = [0.2, 0.5, 0.9]
//! combiner = "min"
//! seed = 1
//!
//! [compare]
//! replicates = 25
//! components = 8
//! events = [18, 36]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use manet_core::simgen::{BENCHMARK_ALPHA_STAR, BENCHMARK_BASE_COLUMN};
use manet_core::{ChainConfig, Combiner, Hyperparams, MixtureWeights, SimConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub chain: ChainSection,
    pub simulation: SimulationSection,
    pub compare: CompareSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub k: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub combiner: String,
    pub candidates: Vec<usize>,
    /// Sort parents by total attendance probability before summarising.
    pub relabel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            k: 2,
            iterations: ChainConfig::DEFAULT_ITERATIONS,
            burn_in: ChainConfig::DEFAULT_BURN_IN,
            thinning: 1,
            seed: 1,
            combiner: Combiner::Min.to_string(),
            candidates: vec![2, 3, 4],
            relabel: false,
            prior: None,
        }
    }
}

/// Symmetric prior: Dirichlet concentration `a`, Beta shapes `b1`, `b2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prior {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub alpha_star: Vec<f64>,
    pub base_column: Vec<f64>,
    pub combiner: String,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n: 300,
            d: 18,
            k: 3,
            alpha_star: BENCHMARK_ALPHA_STAR.to_vec(),
            base_column: BENCHMARK_BASE_COLUMN.to_vec(),
            combiner: Combiner::Min.to_string(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub replicates: usize,
    /// Components of the non-overlapping comparator.
    pub components: usize,
    /// Numbers of events to simulate; one table block per entry.
    pub events: Vec<usize>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            replicates: 25,
            components: 8,
            events: vec![18, 36],
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut table: toml::Table = toml::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {}", path.display(), e.message())))?;
        if let Some(toml::Value::Table(inner)) = table.remove("config") {
            table = inner;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| UsageError(format!("{}: {}", path.display(), e.message())).into())
    }

    pub fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| UsageError("no output directory: pass --out or set `output` in the config".into()).into())
    }
}

impl ChainSection {
    pub fn combiner(&self) -> Result<Combiner> {
        parse_combiner(&self.combiner)
    }

    pub fn chain_config(&self, parents: usize, events: usize) -> Result<ChainConfig> {
        let config = ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thinning: self.thinning,
            seed: self.seed,
            parents,
            combiner: self.combiner()?,
            hyper: self
                .prior
                .map(|p| Hyperparams::symmetric(parents, events, p.a, p.b1, p.b2)),
        };
        config.validate(events)?;
        Ok(config)
    }
}

impl SimulationSection {
    pub fn sim_config(&self, d: usize, seed: u64) -> Result<SimConfig> {
        let config = SimConfig {
            n: self.n,
            d,
            parents: self.k,
            alpha_star: MixtureWeights::new(self.alpha_star.clone())?,
            base_column: self.base_column.clone(),
            combiner: parse_combiner(&self.combiner)?,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

fn parse_combiner(s: &str) -> Result<Combiner> {
    s.parse().map_err(|e: manet_core::Error| UsageError(e.to_string()).into())
}
