//! DIC-based choice of the number of parent clusters.
//!
//! The criterion is the latent-variable variant
//! `DIC = -4 E[log P(y | theta)] + 2 log P^(y)`, where the expectation runs over
//! retained draws and `P^(y_i)` is the per-unit likelihood averaged over draws.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{log_sum_exp, IncidenceMatrix, MixtureTrace};
use crate::sampler::{run_chain, ChainConfig, PosteriorSamples};

#[derive(Debug, Clone, PartialEq)]
pub struct DicResult {
    pub parents: usize,
    pub dic: f64,
    /// Posterior mean of the observed-data log-likelihood.
    pub expected_deviance_term: f64,
    /// `sum_i log P^(y_i)`.
    pub log_phat_term: f64,
    pub retained: usize,
}

impl DicResult {
    pub fn assemble(parents: usize, expected: f64, log_phat: f64, retained: usize) -> Self {
        Self {
            parents,
            dic: -4.0 * expected + 2.0 * log_phat,
            expected_deviance_term: expected,
            log_phat_term: log_phat,
            retained,
        }
    }
}

/// Per-unit DIC ingredients: the mean over draws of `log P(y_i | theta_t)` and
/// `log` of the mean over draws of `P(y_i | theta_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDicTerms {
    pub mean_log_lik: Vec<f64>,
    pub log_mean_lik: Vec<f64>,
}

pub fn unit_dic_terms<T: MixtureTrace + ?Sized>(trace: &T, data: &IncidenceMatrix) -> Result<UnitDicTerms> {
    let draws = trace.draws();
    if draws == 0 {
        return Err(Error::config("posterior sample contains no retained draws"));
    }
    let n = data.n();
    let mut sum_log = vec![0.0; n];
    let mut log_sum = vec![f64::NEG_INFINITY; n];
    let mut scratch = vec![0.0; trace.components()];
    for t in 0..draws {
        let mixture = trace.mixture_at(t)?;
        for i in 0..n {
            let l = mixture.log_marginal(data.attended(i), &mut scratch);
            if l == f64::NEG_INFINITY {
                return Err(Error::Numerical {
                    unit: i,
                    iteration: Some(t),
                    message: "mixture likelihood is zero".into(),
                });
            }
            sum_log[i] += l;
            log_sum[i] = log_sum_exp(&[log_sum[i], l]);
        }
    }
    let log_t = (draws as f64).ln();
    Ok(UnitDicTerms {
        mean_log_lik: sum_log.into_iter().map(|s| s / draws as f64).collect(),
        log_mean_lik: log_sum.into_iter().map(|s| s - log_t).collect(),
    })
}

pub fn dic3(samples: &PosteriorSamples, data: &IncidenceMatrix) -> Result<DicResult> {
    dic3_for(samples, samples.parents, data)
}

/// DIC of any mixture trace; `label` is reported as the candidate size.
pub fn dic3_for<T: MixtureTrace + ?Sized>(trace: &T, label: usize, data: &IncidenceMatrix) -> Result<DicResult> {
    let terms = unit_dic_terms(trace, data)?;
    Ok(DicResult::assemble(
        label,
        terms.mean_log_lik.iter().sum(),
        terms.log_mean_lik.iter().sum(),
        trace.draws(),
    ))
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    /// One entry per candidate, in the order given.
    pub results: Vec<DicResult>,
    pub selected: usize,
    /// Retained chain of the selected candidate.
    pub best: PosteriorSamples,
}

/// Index of the lowest DIC; ties go to the smaller number of parents.
pub fn select_lowest(results: &[DicResult]) -> Option<usize> {
    (0..results.len()).min_by(|&a, &b| {
        results[a]
            .dic
            .total_cmp(&results[b].dic)
            .then(results[a].parents.cmp(&results[b].parents))
    })
}

/// Fits one chain per candidate K (seeded `template.seed + K`) and keeps the
/// one with the lowest DIC. A symmetric prior in the template is resized to
/// each candidate.
pub fn scan_k(data: &IncidenceMatrix, candidates: &[usize], template: &ChainConfig) -> Result<ScanResult> {
    if candidates.is_empty() {
        return Err(Error::config("no candidate values of K given"));
    }
    let fits: Vec<(DicResult, PosteriorSamples)> = candidates
        .par_iter()
        .map(|&k| {
            let tag = |e| Error::Candidate {
                parents: k,
                source: Box::new(e),
            };
            let config = ChainConfig {
                parents: k,
                seed: template.seed.wrapping_add(k as u64),
                hyper: template.hyper.as_ref().map(|h| h.for_parents(k)).transpose().map_err(tag)?,
                ..template.clone()
            };
            let samples = run_chain(data, &config).map_err(tag)?;
            let dic = dic3(&samples, data).map_err(tag)?;
            Ok((dic, samples))
        })
        .collect::<Result<_>>()?;
    let results: Vec<DicResult> = fits.iter().map(|(d, _)| d.clone()).collect();
    let best = select_lowest(&results).expect("non-empty");
    let selected = results[best].parents;
    let samples = fits.into_iter().nth(best).expect("index in range").1;
    Ok(ScanResult {
        results,
        selected,
        best: samples,
    })
}
