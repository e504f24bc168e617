//! Non-overlapping Bernoulli finite mixture fitted by conjugate Gibbs sampling.
//! This is the comparator model: `M` free components, every allocated unit
//! contributing fully to its component's sufficient statistics.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{IncidenceMatrix, Mixture, MixtureTrace, MixtureWeights};
use crate::sampler::{allocation_sweep, chain_rng, sample_beta, sample_dirichlet, ChainConfig};

/// Component indices are stored as `u16`.
pub const MAX_COMPONENTS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub weights: MixtureWeights,
    /// `M x d`, clamped away from 0 and 1.
    pub probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineDraw {
    pub params: BaselineParams,
    pub z: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSamples {
    pub components: usize,
    pub draws: Vec<BaselineDraw>,
}

impl MixtureTrace for BaselineSamples {
    fn draws(&self) -> usize {
        self.draws.len()
    }

    fn components(&self) -> usize {
        self.components
    }

    fn mixture_at(&self, t: usize) -> Result<Mixture> {
        let p = &self.draws[t].params;
        Mixture::new(p.weights.as_slice(), p.probs.view())
    }
}

fn update_probs<R: Rng + ?Sized>(data: &IncidenceMatrix, z: &[usize], components: usize, rng: &mut R) -> Array2<f64> {
    let d = data.d();
    let mut successes = Array2::<f64>::zeros((components, d));
    let mut sizes = vec![0.0; components];
    for (i, &m) in z.iter().enumerate() {
        sizes[m] += 1.0;
        for &j in data.attended(i) {
            successes[[m, j]] += 1.0;
        }
    }
    Array2::from_shape_fn((components, d), |(m, j)| {
        let yes = successes[[m, j]];
        sample_beta(yes + 1.0, sizes[m] - yes + 1.0, rng)
    })
}

/// Runs the comparator chain with flat Dirichlet and Beta priors. Only the
/// length, burn-in, thinning and seed of `config` are used.
pub fn run_chain_baseline(data: &IncidenceMatrix, components: usize, config: &ChainConfig) -> Result<BaselineSamples> {
    if components == 0 || components > MAX_COMPONENTS {
        return Err(Error::config(format!(
            "number of components must be in 1..={MAX_COMPONENTS}, got {components}"
        )));
    }
    let length_only = ChainConfig {
        parents: 1,
        hyper: None,
        ..config.clone()
    };
    length_only.validate(data.d())?;

    let mut rng = chain_rng(config.seed);
    let flat = vec![1.0; components];
    let mut z: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..components)).collect();
    let mut weights = sample_dirichlet(&flat, &mut rng);
    let mut probs = Array2::from_shape_fn((components, data.d()), |_| sample_beta(1.0, 1.0, &mut rng));

    let mut draws = Vec::with_capacity(config.retained());
    for t in 1..=config.iterations {
        let mixture = Mixture::new(weights.as_slice(), probs.view())?;
        allocation_sweep(&mixture, data, &mut z, None, &mut rng).map_err(|e| e.at_iteration(t))?;
        weights = sample_dirichlet(
            &z.iter().fold(flat.clone(), |mut c, &m| {
                c[m] += 1.0;
                c
            }),
            &mut rng,
        );
        probs = update_probs(data, &z, components, &mut rng);
        if config.keeps(t) {
            draws.push(BaselineDraw {
                params: BaselineParams {
                    weights: weights.clone(),
                    probs: probs.clone(),
                },
                z: z.iter().map(|&m| m as u16).collect(),
            });
        }
    }
    Ok(BaselineSamples { components, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{average_allocations, map_allocate, matched_misclassification_rate, ClusteringLabels};

    #[test]
    fn single_component_matches_pooled_beta() {
        // Beta(s + 1, n - s + 1) per event
        let rows: Vec<Vec<u8>> = (0..40).map(|i| vec![u8::from(i < 10), u8::from(i < 30)]).collect();
        let data = IncidenceMatrix::from_rows(&rows).unwrap();
        let samples = run_chain_baseline(&data, 1, &ChainConfig::new(1).with_length(6000, 1000)).unwrap();
        let t = samples.draws.len() as f64;
        let means: Vec<f64> = (0..2)
            .map(|j| samples.draws.iter().map(|d| d.params.probs[[0, j]]).sum::<f64>() / t)
            .collect();
        let expected: [f64; 2] = [11.0 / 42.0, 31.0 / 42.0];
        for j in 0..2 {
            let (a, b) = (expected[j] * 42.0, (1.0 - expected[j]) * 42.0);
            let sd = (a * b / (42.0 * 42.0 * 43.0)).sqrt();
            // draws are independent here; 4 sd / sqrt(T) is generous
            assert!((means[j] - expected[j]).abs() < 4.0 * sd / t.sqrt(), "event {j}: {}", means[j]);
        }
        assert!(samples.draws.iter().all(|d| d.z.iter().all(|&z| z == 0)));
    }

    #[test]
    fn separated_components_are_recovered() {
        let rows: Vec<Vec<u8>> = (0..60)
            .map(|i| if i < 30 { vec![1; 12] } else { vec![0; 12] })
            .collect();
        let data = IncidenceMatrix::from_rows(&rows).unwrap();
        let truth = ClusteringLabels((0..60).map(|i| usize::from(i >= 30)).collect());
        let samples = run_chain_baseline(&data, 2, &ChainConfig::new(1).with_length(400, 200).with_seed(3)).unwrap();
        let labels = map_allocate(&average_allocations(&samples, &data).unwrap());
        assert_eq!(matched_misclassification_rate(&labels, &truth, 2).unwrap(), 0.0);
        for d in &samples.draws {
            assert!((d.params.weights.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = IncidenceMatrix::from_rows(&[vec![1, 0, 1], vec![0, 1, 1], vec![0, 0, 0]]).unwrap();
        let cfg = ChainConfig::new(1).with_length(50, 10).with_seed(8);
        assert_eq!(run_chain_baseline(&data, 3, &cfg).unwrap(), run_chain_baseline(&data, 3, &cfg).unwrap());
        assert!(run_chain_baseline(&data, 0, &cfg).is_err());
    }
}
