//! Deterministic algebra of the overlapping mixture: heir-cluster enumeration,
//! the parent/heir bijection, combiner functions and likelihood evaluation.
//!
//! Heir clusters are indexed from 0 in code. Heir `h` is the subset of parent
//! clusters whose bit pattern is `h`, with bit `k` standing for parent `k`
//! (parent 0 is the least-significant bit), so heir 0 is the empty cluster.
//! File formats and user-facing output add 1 to every heir index.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{check_dim, Error, Result};

/// Largest supported number of parent clusters.
pub const MAX_PARENTS: usize = 16;

/// Lower clamp for parent attendance probabilities; the upper clamp is `1 - PROB_FLOOR`.
pub const PROB_FLOOR: f64 = 1e-12;

/// Binary actor-by-event attendance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    y: Array2<u8>,
    actor_labels: Vec<String>,
    event_labels: Vec<String>,
    attended: Vec<Vec<usize>>,
}

impl IncidenceMatrix {
    pub fn new(y: Array2<u8>, actor_labels: Vec<String>, event_labels: Vec<String>) -> Result<Self> {
        let (n, d) = y.dim();
        if n == 0 || d == 0 {
            return Err(Error::config("incidence matrix must have at least one actor and one event"));
        }
        check_dim("actor labels", n, actor_labels.len())?;
        check_dim("event labels", d, event_labels.len())?;
        if let Some(((i, j), v)) = y.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(Error::config(format!(
                "entry ({}, {}) is {v}, expected 0 or 1",
                i + 1,
                j + 1
            )));
        }
        let attended = y
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter_map(|(j, &v)| (v == 1).then_some(j))
                    .collect()
            })
            .collect();
        Ok(Self {
            y,
            actor_labels,
            event_labels,
            attended,
        })
    }

    /// Builds a matrix with generated labels `a1..an` and `e1..ed`.
    pub fn from_array(y: Array2<u8>) -> Result<Self> {
        let (n, d) = y.dim();
        let actors = (1..=n).map(|i| format!("a{i}")).collect();
        let events = (1..=d).map(|j| format!("e{j}")).collect();
        Self::new(y, actors, events)
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        for row in rows {
            check_dim("row length", d, row.len())?;
        }
        let flat: Vec<u8> = rows.iter().flatten().copied().collect();
        let y = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::config(e.to_string()))?;
        Self::from_array(y)
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }

    pub fn y(&self) -> ArrayView2<'_, u8> {
        self.y.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, u8> {
        self.y.row(i)
    }

    /// Column indices of the events attended by actor `i`.
    pub fn attended(&self, i: usize) -> &[usize] {
        &self.attended[i]
    }

    pub fn actor_labels(&self) -> &[String] {
        &self.actor_labels
    }

    pub fn event_labels(&self) -> &[String] {
        &self.event_labels
    }
}

/// The `2^K x K` binary enumeration of parent-cluster subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembershipMatrix {
    parents: usize,
}

impl MembershipMatrix {
    pub fn new(parents: usize) -> Result<Self> {
        if parents == 0 || parents > MAX_PARENTS {
            return Err(Error::config(format!(
                "number of parent clusters must be in 1..={MAX_PARENTS}, got {parents}"
            )));
        }
        Ok(Self { parents })
    }

    /// K.
    pub fn parents(&self) -> usize {
        self.parents
    }

    /// K* = 2^K.
    pub fn heirs(&self) -> usize {
        1 << self.parents
    }

    /// `u_{hk}`.
    #[inline]
    pub fn contains(&self, heir: usize, parent: usize) -> bool {
        heir >> parent & 1 == 1
    }

    pub fn subset_size(&self, heir: usize) -> usize {
        heir.count_ones() as usize
    }

    pub fn row(&self, heir: usize) -> Vec<u8> {
        (0..self.parents).map(|k| u8::from(self.contains(heir, k))).collect()
    }

    /// Parent indices making up heir cluster `heir`, ascending.
    pub fn members(&self, heir: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.parents).filter(move |&k| self.contains(heir, k))
    }

    pub fn heir_index(&self, z: &[u8]) -> Result<usize> {
        check_dim("parent membership vector", self.parents, z.len())?;
        z.iter().enumerate().try_fold(0usize, |acc, (k, &bit)| match bit {
            0 => Ok(acc),
            1 => Ok(acc | 1 << k),
            other => Err(Error::config(format!("membership entry must be 0 or 1, got {other}"))),
        })
    }

    pub fn parent_set(&self, heir: usize) -> Result<Vec<u8>> {
        if heir >= self.heirs() {
            return Err(Error::config(format!(
                "heir index {heir} out of range for {} heir clusters",
                self.heirs()
            )));
        }
        Ok(self.row(heir))
    }

    pub fn to_array(&self) -> Array2<u8> {
        Array2::from_shape_fn((self.heirs(), self.parents), |(h, k)| u8::from(self.contains(h, k)))
    }
}

/// How heir attendance probabilities are derived from parent ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combiner {
    #[default]
    Min,
    Max,
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::Min => "min",
            Combiner::Max => "max",
        })
    }
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(Combiner::Min),
            "max" => Ok(Combiner::Max),
            other => Err(Error::config(format!("unknown combiner `{other}`, expected min or max"))),
        }
    }
}

impl Combiner {
    /// Whether `candidate` should replace `current` as the selected parent value.
    #[inline]
    pub(crate) fn prefers(self, candidate: f64, current: f64) -> bool {
        match self {
            Combiner::Min => candidate < current,
            Combiner::Max => candidate > current,
        }
    }
}

/// `K x d` parent attendance probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentParams(Array2<f64>);

impl ParentParams {
    /// Wraps `pi`, clamping every entry into `[PROB_FLOOR, 1 - PROB_FLOOR]`.
    pub fn new(pi: Array2<f64>) -> Result<Self> {
        if pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("parent probabilities must lie in [0, 1]"));
        }
        Ok(Self::clamped(pi))
    }

    pub(crate) fn clamped(mut pi: Array2<f64>) -> Self {
        pi.mapv_inplace(clamp_prob);
        Self(pi)
    }

    pub fn parents(&self) -> usize {
        self.0.nrows()
    }

    pub fn events(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }
}

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `K* x d` heir attendance probabilities; row 0 is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct HeirParams(Array2<f64>);

impl HeirParams {
    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }
}

/// Heir-cluster mixture proportions on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::config("mixture weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub(crate) fn from_unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Overlapping parent proportions `alpha_k`; these need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentWeights(pub Vec<f64>);

/// Prior hyperparameters: Dirichlet on heir weights, Beta on parent probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub a: Vec<f64>,
    pub b1: Array2<f64>,
    pub b2: Array2<f64>,
}

impl Hyperparams {
    /// Flat priors: every Dirichlet concentration and Beta shape equal to one.
    pub fn uniform(parents: usize, events: usize) -> Self {
        Self::symmetric(parents, events, 1.0, 1.0, 1.0)
    }

    pub fn symmetric(parents: usize, events: usize, a: f64, b1: f64, b2: f64) -> Self {
        Self {
            a: vec![a; 1 << parents],
            b1: Array2::from_elem((parents, events), b1),
            b2: Array2::from_elem((parents, events), b2),
        }
    }

    /// The same prior for a different number of parents. Only symmetric
    /// priors (constant `a`, `b1` and `b2`) can be resized.
    pub fn for_parents(&self, parents: usize) -> Result<Self> {
        if self.b1.nrows() == parents {
            return Ok(self.clone());
        }
        let constant = |mut it: std::slice::Iter<'_, f64>| {
            let first = *it.next()?;
            it.all(|&x| x == first).then_some(first)
        };
        match (
            constant(self.a.iter()),
            self.b1.as_slice().and_then(|b| constant(b.iter())),
            self.b2.as_slice().and_then(|b| constant(b.iter())),
        ) {
            (Some(a), Some(b1), Some(b2)) => Ok(Self::symmetric(parents, self.b1.ncols(), a, b1, b2)),
            _ => Err(Error::config(format!(
                "non-symmetric hyperparameters for K = {} cannot be reused for K = {parents}",
                self.b1.nrows()
            ))),
        }
    }

    pub fn validate(&self, parents: usize, events: usize) -> Result<()> {
        check_dim("Dirichlet concentrations", 1 << parents, self.a.len())?;
        for b in [&self.b1, &self.b2] {
            check_dim("Beta shape rows", parents, b.nrows())?;
            check_dim("Beta shape columns", events, b.ncols())?;
        }
        let positive = |x: &f64| x.is_finite() && *x > 0.0;
        if !(self.a.iter().all(positive) && self.b1.iter().all(positive) && self.b2.iter().all(positive)) {
            return Err(Error::config("hyperparameters must be strictly positive"));
        }
        Ok(())
    }
}

/// Heir probabilities `pi*_{hj} = psi({pi_kj : u_hk = 1})`, with the empty heir fixed at zero.
pub fn combine_heir_probs(pi: &ParentParams, u: &MembershipMatrix, combiner: Combiner) -> Result<HeirParams> {
    check_dim("parent clusters", u.parents(), pi.parents())?;
    let pi = pi.as_array();
    let d = pi.ncols();
    let mut out = Array2::zeros((u.heirs(), d));
    for h in 1..u.heirs() {
        for j in 0..d {
            let mut members = u.members(h);
            let first = members.next().expect("non-empty heir");
            out[[h, j]] = members.fold(pi[[first, j]], |acc, k| {
                let v = pi[[k, j]];
                if combiner.prefers(v, acc) {
                    v
                } else {
                    acc
                }
            });
        }
    }
    Ok(HeirParams(out))
}

/// `alpha_k = sum_h alpha*_h u_hk`.
pub fn parent_weights_from_heir(alpha_star: &MixtureWeights, u: &MembershipMatrix) -> Result<ParentWeights> {
    check_dim("heir weights", u.heirs(), alpha_star.len())?;
    let mut alpha = vec![0.0; u.parents()];
    for (h, &w) in alpha_star.as_slice().iter().enumerate() {
        for k in u.members(h) {
            alpha[k] += w;
        }
    }
    Ok(ParentWeights(alpha))
}

/// Log-probability of one attendance profile under a single heir cluster.
///
/// Returns negative infinity when an attended event has probability zero.
pub fn log_likelihood_unit(y: ArrayView1<'_, u8>, pi_star_h: ArrayView1<'_, f64>) -> f64 {
    y.iter()
        .zip(pi_star_h.iter())
        .map(|(&yij, &p)| if yij == 1 { p.ln() } else { (-p).ln_1p() })
        .sum()
}

/// `log(sum(exp(xs)))`, returning negative infinity for an empty or all-zero-mass input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Precomputed log tables for a finite mixture of product-Bernoulli components.
///
/// A unit's log-likelihood under component `m` is
/// `sum_j log(1 - p_mj) + sum_{j attended} [log p_mj - log(1 - p_mj)]`,
/// so evaluation costs one pass over the attended events only.
#[derive(Debug, Clone)]
pub struct Mixture {
    log_weights: Vec<f64>,
    log_absent: Vec<f64>,
    log_odds: Array2<f64>,
}

impl Mixture {
    /// `weights` has one entry per row of `probs`; `probs` entries lie in `[0, 1)`.
    pub fn new(weights: &[f64], probs: ArrayView2<'_, f64>) -> Result<Self> {
        check_dim("mixture components", probs.nrows(), weights.len())?;
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let log_absent = probs
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&p| (-p).ln_1p()).sum())
            .collect();
        let log_odds = probs.mapv(|p| p.ln() - (-p).ln_1p());
        Ok(Self {
            log_weights,
            log_absent,
            log_odds,
        })
    }

    /// Builds the heir-level mixture implied by parent parameters.
    pub fn from_parents(
        alpha_star: &MixtureWeights,
        pi: &ParentParams,
        u: &MembershipMatrix,
        combiner: Combiner,
    ) -> Result<Self> {
        let pi_star = combine_heir_probs(pi, u, combiner)?;
        Self::new(alpha_star.as_slice(), pi_star.as_array().view())
    }

    pub fn components(&self) -> usize {
        self.log_weights.len()
    }

    pub fn events(&self) -> usize {
        self.log_odds.ncols()
    }

    #[inline]
    pub fn component_log_likelihood(&self, m: usize, attended: &[usize]) -> f64 {
        let odds = self.log_odds.row(m);
        attended.iter().fold(self.log_absent[m], |acc, &j| acc + odds[j])
    }

    /// Fills `out[m]` with `log w_m + log P(y | component m)`.
    #[inline]
    pub fn log_joint_into(&self, attended: &[usize], out: &mut [f64]) {
        for (m, slot) in out.iter_mut().enumerate() {
            *slot = self.log_weights[m] + self.component_log_likelihood(m, attended);
        }
    }

    /// `log sum_m w_m P(y | component m)`.
    pub fn log_marginal(&self, attended: &[usize], scratch: &mut [f64]) -> f64 {
        self.log_joint_into(attended, scratch);
        log_sum_exp(scratch)
    }

    /// Normalised allocation probabilities for one unit, written into `out`.
    pub fn allocation_into(&self, attended: &[usize], out: &mut [f64]) -> Result<()> {
        self.log_joint_into(attended, out);
        normalize_log_probs(out)
    }
}

/// A retained sequence of finite-mixture parameter draws.
///
/// Implemented by both the overlapping sampler (through its heir-level
/// mixture) and the non-overlapping baseline, so post-processing works on either.
pub trait MixtureTrace {
    /// Number of retained draws T.
    fn draws(&self) -> usize;

    /// Number of mixture components (K* for the overlapping model).
    fn components(&self) -> usize;

    fn mixture_at(&self, t: usize) -> Result<Mixture>;
}

/// Converts log-weights in place into probabilities with max-subtraction.
pub(crate) fn normalize_log_probs(values: &mut [f64]) -> Result<()> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical {
            unit: 0,
            iteration: None,
            message: format!("allocation log-weights have no finite maximum (max = {max})"),
        });
    }
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Ok(())
}
