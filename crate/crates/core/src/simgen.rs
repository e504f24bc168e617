//! Synthetic actor-event data drawn from the overlapping mixture with known truth.

use itertools::Itertools;
use ndarray::Array2;
use rand::Rng;

use crate::diagnostics::ClusteringLabels;
use crate::error::{check_dim, Error, Result};
use crate::model::{combine_heir_probs, Combiner, IncidenceMatrix, MembershipMatrix, MixtureWeights, ParentParams};
use crate::sampler::{chain_rng, sample_categorical};

/// Heir weights of the three-parent benchmark design.
pub const BENCHMARK_ALPHA_STAR: [f64; 8] = [0.1, 0.25, 0.20, 0.1, 0.15, 0.1, 0.05, 0.05];

/// First-event parent probabilities of the three-parent benchmark design.
pub const BENCHMARK_BASE_COLUMN: [f64; 3] = [0.2, 0.5, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub parents: usize,
    pub alpha_star: MixtureWeights,
    pub base_column: Vec<f64>,
    pub combiner: Combiner,
    pub seed: u64,
}

impl SimConfig {
    /// K = 3 with the benchmark weights and base column.
    pub fn benchmark(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            parents: 3,
            alpha_star: MixtureWeights::new(BENCHMARK_ALPHA_STAR.to_vec()).expect("weights sum to one"),
            base_column: BENCHMARK_BASE_COLUMN.to_vec(),
            combiner: Combiner::Min,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let u = MembershipMatrix::new(self.parents)?;
        if self.n == 0 || self.d == 0 {
            return Err(Error::config("simulation needs at least one actor and one event"));
        }
        check_dim("heir weights", u.heirs(), self.alpha_star.len())?;
        check_dim("base column", self.parents, self.base_column.len())?;
        if self.base_column.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::config("base column probabilities must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub data: IncidenceMatrix,
    pub true_labels: ClusteringLabels,
    pub true_pi: ParentParams,
    pub true_alpha_star: MixtureWeights,
}

/// Parent probability matrix whose columns cycle through the permutations of
/// `base` in lexicographic order of index permutations, identity first.
pub fn build_pi_columns(base: &[f64], parents: usize, d: usize) -> Result<ParentParams> {
    check_dim("base column", parents, base.len())?;
    if d == 0 {
        return Err(Error::config("number of events must be positive"));
    }
    let perms: Vec<Vec<usize>> = (0..parents).permutations(parents).take(d).collect();
    let pi = Array2::from_shape_fn((parents, d), |(k, j)| base[perms[j % perms.len()][k]]);
    ParentParams::new(pi)
}

pub fn generate_dataset(cfg: &SimConfig) -> Result<SimDataset> {
    cfg.validate()?;
    let u = MembershipMatrix::new(cfg.parents)?;
    let pi = build_pi_columns(&cfg.base_column, cfg.parents, cfg.d)?;
    let pi_star = combine_heir_probs(&pi, &u, cfg.combiner)?;
    let pi_star = pi_star.as_array();
    let mut rng = chain_rng(cfg.seed);
    let labels: Vec<usize> = (0..cfg.n)
        .map(|_| sample_categorical(cfg.alpha_star.as_slice(), &mut rng))
        .collect();
    let mut y = Array2::<u8>::zeros((cfg.n, cfg.d));
    for (i, &h) in labels.iter().enumerate() {
        for j in 0..cfg.d {
            y[[i, j]] = u8::from(rng.random::<f64>() < pi_star[[h, j]]);
        }
    }
    Ok(SimDataset {
        data: IncidenceMatrix::from_array(y)?,
        true_labels: ClusteringLabels(labels),
        true_pi: pi,
        true_alpha_star: cfg.alpha_star.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn three_parent_columns_are_all_permutations() {
        let pi = build_pi_columns(&[0.2, 0.5, 0.9], 3, 6).unwrap();
        let expected = array![
            [0.2, 0.2, 0.5, 0.5, 0.9, 0.9],
            [0.5, 0.9, 0.2, 0.9, 0.2, 0.5],
            [0.9, 0.5, 0.9, 0.2, 0.5, 0.2],
        ];
        assert_eq!(pi.as_array(), &expected);
    }

    #[test]
    fn columns_cycle() {
        let pi = build_pi_columns(&[0.2, 0.5], 2, 5).unwrap();
        assert_eq!(pi.as_array(), &array![[0.2, 0.5, 0.2, 0.5, 0.2], [0.5, 0.2, 0.5, 0.2, 0.5]]);
        let single = build_pi_columns(&[0.3], 1, 4).unwrap();
        assert!(single.as_array().iter().all(|&p| p == 0.3));
        let pi18 = build_pi_columns(&BENCHMARK_BASE_COLUMN, 3, 18).unwrap();
        for j in 0..18 {
            let mut col: Vec<f64> = pi18.as_array().column(j).to_vec();
            col.sort_by(f64::total_cmp);
            assert_eq!(col, BENCHMARK_BASE_COLUMN.to_vec());
        }
        assert!(build_pi_columns(&[0.3], 1, 0).is_err());
        assert!(build_pi_columns(&[0.3], 2, 3).is_err());
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = SimConfig::benchmark(50, 6, 9);
        assert_eq!(generate_dataset(&cfg).unwrap(), generate_dataset(&cfg).unwrap());
        let other = generate_dataset(&SimConfig::benchmark(50, 6, 10)).unwrap();
        assert_ne!(generate_dataset(&cfg).unwrap().data, other.data);
    }

    #[test]
    fn empty_heir_units_attend_nothing() {
        let sim = generate_dataset(&SimConfig::benchmark(500, 18, 4)).unwrap();
        for (i, &h) in sim.true_labels.0.iter().enumerate() {
            if h == 0 {
                assert!(sim.data.attended(i).is_empty());
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SimConfig::benchmark(10, 6, 1);
        cfg.base_column = vec![0.2, 1.0, 0.5];
        assert!(generate_dataset(&cfg).is_err());
        let mut cfg = SimConfig::benchmark(10, 6, 1);
        cfg.parents = 2;
        assert!(generate_dataset(&cfg).is_err());
    }
}
