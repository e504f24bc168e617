//! Post-processing of a retained chain: averaged allocation probabilities,
//! MAP clustering, the posterior confusion matrix, parent relabelling, and
//! external agreement metrics against a reference clustering.

use std::collections::HashMap;

use itertools::Itertools;
use ndarray::Array2;

use crate::error::{check_dim, Error, Result};
use crate::model::{IncidenceMatrix, MembershipMatrix, MixtureTrace, MixtureWeights, ParentParams};
use crate::sampler::{Draw, PosteriorSamples};

/// `n x K*` allocation probabilities averaged over retained draws.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedAllocations(pub Array2<f64>);

impl AveragedAllocations {
    pub fn units(&self) -> usize {
        self.0.nrows()
    }

    pub fn components(&self) -> usize {
        self.0.ncols()
    }
}

/// Cluster label per unit, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringLabels(pub Vec<usize>);

impl ClusteringLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of units per label in `0..components`.
    pub fn sizes(&self, components: usize) -> Vec<usize> {
        let mut sizes = vec![0; components];
        for &l in &self.0 {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Posterior confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcm {
    pub raw: Array2<f64>,
    pub rescaled: Array2<f64>,
    /// MAP cluster sizes.
    pub row_units: Vec<usize>,
}

fn require_draws<T: MixtureTrace + ?Sized>(trace: &T) -> Result<()> {
    if trace.draws() == 0 {
        Err(Error::config("posterior sample contains no retained draws"))
    } else {
        Ok(())
    }
}

/// Calls `visit(i, probs)` with every unit's allocation probabilities at every draw.
fn for_each_allocation<T, F>(trace: &T, data: &IncidenceMatrix, mut visit: F) -> Result<()>
where
    T: MixtureTrace + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let mut probs = vec![0.0; trace.components()];
    for t in 0..trace.draws() {
        let mixture = trace.mixture_at(t)?;
        check_dim("events", data.d(), mixture.events())?;
        for i in 0..data.n() {
            mixture
                .allocation_into(data.attended(i), &mut probs)
                .map_err(|e| match e {
                    Error::Numerical { message, .. } => Error::Numerical {
                        unit: i,
                        iteration: Some(t),
                        message,
                    },
                    other => other,
                })?;
            visit(i, &probs);
        }
    }
    Ok(())
}

pub fn average_allocations<T: MixtureTrace + ?Sized>(trace: &T, data: &IncidenceMatrix) -> Result<AveragedAllocations> {
    require_draws(trace)?;
    let mut sums = Array2::<f64>::zeros((data.n(), trace.components()));
    for_each_allocation(trace, data, |i, probs| {
        sums.row_mut(i).iter_mut().zip(probs).for_each(|(s, p)| *s += p);
    })?;
    Ok(AveragedAllocations(sums / trace.draws() as f64))
}

/// Row-wise argmax; ties resolve to the lowest index.
pub fn map_allocate(avg: &AveragedAllocations) -> ClusteringLabels {
    ClusteringLabels(avg.0.rows().into_iter().map(|row| argmax(row.iter().copied())).collect())
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (h, v) in values.enumerate() {
        if v > best.1 {
            best = (h, v);
        }
    }
    best.0
}

/// Posterior confusion matrix.
///
/// For every draw and unit the allocation probabilities are sorted in
/// decreasing order (stable on ties); the whole sorted vector is added to the
/// row of the top label, then the sum is divided by the number of draws.
pub fn posterior_confusion_matrix<T: MixtureTrace + ?Sized>(trace: &T, data: &IncidenceMatrix) -> Result<Pcm> {
    require_draws(trace)?;
    let m = trace.components();
    let mut raw = Array2::<f64>::zeros((m, m));
    let mut avg = Array2::<f64>::zeros((data.n(), m));
    let mut order: Vec<usize> = (0..m).collect();
    for_each_allocation(trace, data, |i, probs| {
        order.iter_mut().enumerate().for_each(|(h, o)| *o = h);
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        let top = order[0];
        for &h in &order {
            raw[[top, h]] += probs[h];
        }
        avg.row_mut(i).iter_mut().zip(probs).for_each(|(s, p)| *s += p);
    })?;
    let t = trace.draws() as f64;
    raw /= t;
    avg /= t;
    let row_units = map_allocate(&AveragedAllocations(avg)).sizes(m);
    Ok(Pcm {
        rescaled: rescale_rows(&raw),
        raw,
        row_units,
    })
}

fn rescale_rows(raw: &Array2<f64>) -> Array2<f64> {
    let mut out = raw.clone();
    for mut row in out.rows_mut() {
        let total: f64 = row.sum();
        if total > 0.0 {
            row /= total;
        }
    }
    out
}

fn check_labels(est: &ClusteringLabels, truth: &ClusteringLabels) -> Result<()> {
    check_dim("clustering length", truth.len(), est.len())?;
    if truth.is_empty() {
        return Err(Error::config("clusterings must be non-empty"));
    }
    Ok(())
}

fn heir_permutation(u: &MembershipMatrix, order: &[usize]) -> Vec<usize> {
    // new parent p is old parent order[p]
    (0..u.heirs())
        .map(|h| {
            order
                .iter()
                .enumerate()
                .filter(|&(_, &old)| u.contains(h, old))
                .fold(0, |acc, (p, _)| acc | 1 << p)
        })
        .collect()
}

/// Fraction of units whose heir label disagrees with the truth, minimised over
/// all relabellings of the `parents` parent clusters.
pub fn misclassification_rate(est: &ClusteringLabels, truth: &ClusteringLabels, parents: usize) -> Result<f64> {
    check_labels(est, truth)?;
    let u = MembershipMatrix::new(parents)?;
    check_range(est, u.heirs())?;
    check_range(truth, u.heirs())?;
    let confusion = confusion_counts(est, truth, u.heirs());
    let best = (0..parents)
        .permutations(parents)
        .map(|order| {
            let map = heir_permutation(&u, &order);
            (0..u.heirs()).map(|h| confusion[[h, map[h]]]).sum::<usize>()
        })
        .max()
        .unwrap_or(0);
    Ok(1.0 - best as f64 / est.len() as f64)
}

/// Misclassification minimised over every permutation of `classes` labels.
/// Used for the non-overlapping baseline, whose components carry no parent
/// structure. Cost grows as `classes!`.
pub fn matched_misclassification_rate(est: &ClusteringLabels, truth: &ClusteringLabels, classes: usize) -> Result<f64> {
    check_labels(est, truth)?;
    check_range(est, classes)?;
    check_range(truth, classes)?;
    let confusion = confusion_counts(est, truth, classes);
    let best = (0..classes)
        .permutations(classes)
        .map(|perm| perm.iter().enumerate().map(|(a, &b)| confusion[[a, b]]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(1.0 - best as f64 / est.len() as f64)
}

fn check_range(labels: &ClusteringLabels, classes: usize) -> Result<()> {
    match labels.0.iter().find(|&&l| l >= classes) {
        Some(l) => Err(Error::config(format!("label {} exceeds {classes} clusters", l + 1))),
        None => Ok(()),
    }
}

fn confusion_counts(est: &ClusteringLabels, truth: &ClusteringLabels, classes: usize) -> Array2<usize> {
    let mut c = Array2::zeros((classes, classes));
    for (&e, &t) in est.0.iter().zip(&truth.0) {
        c[[e, t]] += 1;
    }
    c
}

/// Hubert-Arabie adjusted Rand index.
pub fn adjusted_rand_index(a: &ClusteringLabels, b: &ClusteringLabels) -> Result<f64> {
    check_labels(a, b)?;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.0.iter().zip(&b.0) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |c: &u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(pairs).sum();
    let sum_rows: f64 = rows.values().map(pairs).sum();
    let sum_cols: f64 = cols.values().map(pairs).sum();
    let total = pairs(&(a.len() as u64));
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        // both partitions are trivial in the same way
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Orders parent clusters by decreasing total attendance probability in every
/// draw, permuting probabilities, heir weights and allocations consistently.
pub fn relabel_chain(samples: &PosteriorSamples) -> Result<PosteriorSamples> {
    if samples.draws.is_empty() {
        return Err(Error::config("posterior sample contains no retained draws"));
    }
    let u = samples.membership();
    let draws = samples
        .draws
        .iter()
        .map(|draw| {
            let pi = draw.pi.as_array();
            let totals: Vec<f64> = pi.rows().into_iter().map(|r| r.sum()).collect();
            let mut order: Vec<usize> = (0..u.parents()).collect();
            order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));
            let map = heir_permutation(&u, &order);
            let new_pi = Array2::from_shape_fn(pi.dim(), |(p, j)| pi[[order[p], j]]);
            let mut alpha = vec![0.0; u.heirs()];
            for (h, &w) in draw.alpha_star.as_slice().iter().enumerate() {
                alpha[map[h]] = w;
            }
            Draw {
                alpha_star: MixtureWeights::from_unchecked(alpha),
                pi: ParentParams::clamped(new_pi),
                z_star: draw.z_star.iter().map(|&h| map[h as usize] as u16).collect(),
            }
        })
        .collect();
    Ok(PosteriorSamples {
        parents: samples.parents,
        combiner: samples.combiner,
        draws,
        allocation_sums: None,
    })
}

/// Averaged probabilities renormalised over the non-empty heir clusters.
///
/// Column `c` corresponds to heir `c + 1`. Rows with no mass outside the empty
/// cluster are left at zero. For two parents these are ternary-plot coordinates.
pub fn conditional_on_nonempty(avg: &AveragedAllocations) -> Array2<f64> {
    let m = avg.components();
    let mut out = Array2::zeros((avg.units(), m.saturating_sub(1)));
    for (i, row) in avg.0.rows().into_iter().enumerate() {
        let mass: f64 = row.iter().skip(1).sum();
        if mass > 0.0 {
            for h in 1..m {
                out[[i, h - 1]] = row[h] / mass;
            }
        }
    }
    out
}
