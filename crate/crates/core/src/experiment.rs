//! Replicated simulation harness shared by the CLI and the acceptance suite.

use crate::baseline::run_chain_baseline;
use crate::diagnostics::{
    adjusted_rand_index, average_allocations, map_allocate, matched_misclassification_rate, misclassification_rate,
    AveragedAllocations,
};
use crate::error::Result;
use crate::sampler::{run_chain, ChainConfig};
use crate::simgen::SimDataset;

/// Agreement of one fitted clustering with the generating truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub misclassification: f64,
    pub ari: f64,
}

/// Fits the overlapping model with the true number of parents and scores the MAP clustering.
pub fn score_overlapping(sim: &SimDataset, config: &ChainConfig) -> Result<ReplicateOutcome> {
    let samples = run_chain(&sim.data, config)?;
    let avg = match samples.running_average_allocations() {
        Some(avg) => AveragedAllocations(avg),
        None => average_allocations(&samples, &sim.data)?,
    };
    let labels = map_allocate(&avg);
    Ok(ReplicateOutcome {
        misclassification: misclassification_rate(&labels, &sim.true_labels, config.parents)?,
        ari: adjusted_rand_index(&labels, &sim.true_labels)?,
    })
}

/// Fits the non-overlapping comparator with `components` components.
pub fn score_baseline(sim: &SimDataset, components: usize, config: &ChainConfig) -> Result<ReplicateOutcome> {
    let samples = run_chain_baseline(&sim.data, components, config)?;
    let labels = map_allocate(&average_allocations(&samples, &sim.data)?);
    Ok(ReplicateOutcome {
        misclassification: matched_misclassification_rate(&labels, &sim.true_labels, components)?,
        ari: adjusted_rand_index(&labels, &sim.true_labels)?,
    })
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(Summary::of(&[7.0]).se, 0.0);
    }
}
