//! Gibbs sampler for the overlapping Bernoulli mixture.
//!
//! One sweep updates, in order, the heir allocations, the heir weights and the
//! parent attendance probabilities. Units allocated to a multi-parent heir
//! cluster contribute, for each event, only to the parent selected by the
//! combiner (the s-vector routing), which keeps the Beta updates conjugate.

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{check_dim, Error, Result};
use crate::model::{
    clamp_prob, log_likelihood_unit, normalize_log_probs, Combiner, HeirParams,
    Hyperparams, IncidenceMatrix, MembershipMatrix, Mixture, MixtureTrace, MixtureWeights, ParentParams,
};

/// Random stream used by every chain.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChainRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Total number of sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub parents: usize,
    pub combiner: Combiner,
    /// Flat priors when `None`.
    pub hyper: Option<Hyperparams>,
}

impl ChainConfig {
    pub const DEFAULT_ITERATIONS: usize = 30_000;
    pub const DEFAULT_BURN_IN: usize = 15_000;

    pub fn new(parents: usize) -> Self {
        Self {
            iterations: Self::DEFAULT_ITERATIONS,
            burn_in: Self::DEFAULT_BURN_IN,
            thinning: 1,
            seed: 1,
            parents,
            combiner: Combiner::Min,
            hyper: None,
        }
    }

    pub fn with_length(mut self, iterations: usize, burn_in: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of retained draws, `ceil((iterations - burn_in) / thinning)`.
    pub fn retained(&self) -> usize {
        (self.iterations.saturating_sub(self.burn_in)).div_ceil(self.thinning.max(1))
    }

    /// Whether sweep `t` (1-based) is kept.
    pub fn keeps(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in - 1).is_multiple_of(self.thinning)
    }

    pub fn validate(&self, events: usize) -> Result<()> {
        MembershipMatrix::new(self.parents)?;
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::config("thinning must be positive"));
        }
        if let Some(h) = &self.hyper {
            h.validate(self.parents, events)?;
        }
        Ok(())
    }

    pub fn hyperparams(&self, events: usize) -> Hyperparams {
        self.hyper
            .clone()
            .unwrap_or_else(|| Hyperparams::uniform(self.parents, events))
    }
}

/// Current values of one Gibbs chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Heir index (0-based) per unit.
    pub z_star: Vec<usize>,
    pub alpha_star: MixtureWeights,
    pub pi: ParentParams,
    pub iteration: usize,
}

impl ChainState {
    /// Overdispersed start: allocations uniform over heirs compatible with
    /// the data, weights and probabilities drawn from their priors.
    pub fn initial<R: Rng + ?Sized>(
        data: &IncidenceMatrix,
        u: &MembershipMatrix,
        hyper: &Hyperparams,
        rng: &mut R,
    ) -> Self {
        let heirs = u.heirs();
        let z_star = (0..data.n())
            .map(|i| {
                if data.attended(i).is_empty() {
                    rng.random_range(0..heirs)
                } else {
                    rng.random_range(1..heirs)
                }
            })
            .collect();
        let alpha_star = sample_dirichlet(&hyper.a, rng);
        let pi = Array2::from_shape_fn(hyper.b1.dim(), |(k, j)| {
            sample_beta(hyper.b1[[k, j]], hyper.b2[[k, j]], rng)
        });
        Self {
            z_star,
            alpha_star,
            pi: ParentParams::clamped(pi),
            iteration: 0,
        }
    }
}

/// Per-unit, per-event routing of likelihood contributions to parent clusters.
///
/// Entry `(i, j)` is the parent receiving unit `i`'s observation of event `j`,
/// or `None` when the unit sits in the empty heir cluster. As a K-vector this
/// is the one-hot (or all-zero) `s` vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SVectors {
    parents: usize,
    events: usize,
    hot: Vec<Option<u8>>,
}

impl SVectors {
    pub fn units(&self) -> usize {
        self.hot.len() / self.events.max(1)
    }

    pub fn events(&self) -> usize {
        self.events
    }

    pub fn parents(&self) -> usize {
        self.parents
    }

    #[inline]
    pub fn hot(&self, i: usize, j: usize) -> Option<usize> {
        self.hot[i * self.events + j].map(usize::from)
    }

    pub fn vector(&self, i: usize, j: usize) -> Vec<u8> {
        let mut v = vec![0; self.parents];
        if let Some(k) = self.hot(i, j) {
            v[k] = 1;
        }
        v
    }
}

/// Posterior draws retained after burn-in and thinning.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub alpha_star: MixtureWeights,
    pub pi: ParentParams,
    /// Heir index (0-based) per unit.
    pub z_star: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub parents: usize,
    pub combiner: Combiner,
    pub draws: Vec<Draw>,
    /// Running `n x K*` sum of allocation probabilities over retained draws.
    /// Dropped by relabelling, which permutes heirs per draw.
    pub allocation_sums: Option<Array2<f64>>,
}

impl PosteriorSamples {
    pub fn membership(&self) -> MembershipMatrix {
        MembershipMatrix::new(self.parents).expect("validated when the chain ran")
    }

    /// Averaged allocation probabilities accumulated while the chain ran.
    pub fn running_average_allocations(&self) -> Option<Array2<f64>> {
        let t = self.draws.len() as f64;
        self.allocation_sums.as_ref().map(|s| s / t)
    }
}

impl MixtureTrace for PosteriorSamples {
    fn draws(&self) -> usize {
        self.draws.len()
    }

    fn components(&self) -> usize {
        1 << self.parents
    }

    fn mixture_at(&self, t: usize) -> Result<Mixture> {
        let draw = &self.draws[t];
        Mixture::from_parents(&draw.alpha_star, &draw.pi, &self.membership(), self.combiner)
    }
}

/// Allocation probabilities of one unit over the heir clusters.
pub fn allocation_posterior(
    y: ArrayView1<'_, u8>,
    alpha_star: &MixtureWeights,
    pi_star: &HeirParams,
) -> Result<Vec<f64>> {
    let pi_star = pi_star.as_array();
    check_dim("heir weights", pi_star.nrows(), alpha_star.len())?;
    check_dim("events", pi_star.ncols(), y.len())?;
    let mut out: Vec<f64> = alpha_star
        .as_slice()
        .iter()
        .zip(pi_star.rows())
        .map(|(&w, row)| w.ln() + log_likelihood_unit(y, row))
        .collect();
    normalize_log_probs(&mut out)?;
    Ok(out)
}

/// Draws an index from normalised probabilities.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (h, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = h;
            if u < acc {
                return h;
            }
        }
    }
    last
}

/// One allocation pass over all units. When `sums` is given, the allocation
/// probabilities computed from the current parameters are added to it.
pub(crate) fn allocation_sweep<R: Rng + ?Sized>(
    mixture: &Mixture,
    data: &IncidenceMatrix,
    z_star: &mut [usize],
    mut sums: Option<&mut Array2<f64>>,
    rng: &mut R,
) -> Result<()> {
    let mut probs = vec![0.0; mixture.components()];
    for (i, z) in z_star.iter_mut().enumerate() {
        mixture
            .allocation_into(data.attended(i), &mut probs)
            .map_err(|e| match e {
                Error::Numerical { iteration, message, .. } => Error::Numerical {
                    unit: i,
                    iteration,
                    message,
                },
                other => other,
            })?;
        if let Some(s) = sums.as_deref_mut() {
            s.row_mut(i).iter_mut().zip(&probs).for_each(|(a, p)| *a += p);
        }
        *z = sample_categorical(&probs, rng);
    }
    Ok(())
}

/// Resamples every unit's heir allocation from its full conditional.
pub fn sample_allocations<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &IncidenceMatrix,
    u: &MembershipMatrix,
    combiner: Combiner,
    rng: &mut R,
) -> Result<()> {
    check_dim("units", data.n(), state.z_star.len())?;
    check_dim("events", data.d(), state.pi.events())?;
    let mixture = Mixture::from_parents(&state.alpha_star, &state.pi, u, combiner)?;
    allocation_sweep(&mixture, data, &mut state.z_star, None, rng)
}

/// Routes each unit's per-event contribution to a single parent.
///
/// Singleton heirs route to their only parent; multi-parent heirs route to the
/// parent with the lowest probability for that event (highest under
/// [`Combiner::Max`]), ties going to the lowest parent index; the empty heir
/// routes nowhere.
pub fn compute_s_vectors(
    z_star: &[usize],
    pi: &ParentParams,
    u: &MembershipMatrix,
    combiner: Combiner,
) -> SVectors {
    let pi = pi.as_array();
    let d = pi.ncols();
    let mut hot = Vec::with_capacity(z_star.len() * d);
    for &h in z_star {
        match u.subset_size(h) {
            0 => hot.extend(std::iter::repeat_n(None, d)),
            1 => hot.extend(std::iter::repeat_n(Some(h.trailing_zeros() as u8), d)),
            _ => {
                for j in 0..d {
                    let mut members = u.members(h);
                    let mut best = members.next().expect("non-empty heir");
                    for k in members {
                        if combiner.prefers(pi[[k, j]], pi[[best, j]]) {
                            best = k;
                        }
                    }
                    hot.push(Some(best as u8));
                }
            }
        }
    }
    SVectors {
        parents: u.parents(),
        events: d,
        hot,
    }
}

/// Draws heir weights from `Dir(n*_1 + a_1, ..., n*_K* + a_K*)`.
pub fn update_weights<R: Rng + ?Sized>(z_star: &[usize], a: &[f64], rng: &mut R) -> MixtureWeights {
    let mut conc = a.to_vec();
    for &h in z_star {
        conc[h] += 1.0;
    }
    sample_dirichlet(&conc, rng)
}

/// Success and trial counts per (parent, event) under the s-vector routing.
pub(crate) fn routed_counts(data: &IncidenceMatrix, s: &SVectors) -> (Array2<f64>, Array2<f64>) {
    let mut successes = Array2::zeros((s.parents(), s.events()));
    let mut trials = Array2::zeros((s.parents(), s.events()));
    let y = data.y();
    for i in 0..s.units() {
        for j in 0..s.events() {
            if let Some(k) = s.hot(i, j) {
                trials[[k, j]] += 1.0;
                successes[[k, j]] += f64::from(y[[i, j]]);
            }
        }
    }
    (successes, trials)
}

/// Draws parent probabilities from their conjugate Beta full conditionals.
pub fn update_parent_probs<R: Rng + ?Sized>(
    data: &IncidenceMatrix,
    s: &SVectors,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<ParentParams> {
    check_dim("units", data.n(), s.units())?;
    check_dim("events", data.d(), s.events())?;
    check_dim("parent clusters", hyper.b1.nrows(), s.parents())?;
    let (successes, trials) = routed_counts(data, s);
    let pi = Array2::from_shape_fn(successes.dim(), |(k, j)| {
        let yes = successes[[k, j]];
        sample_beta(yes + hyper.b1[[k, j]], trials[[k, j]] - yes + hyper.b2[[k, j]], rng)
    });
    Ok(ParentParams::clamped(pi))
}

/// Runs a full chain and returns the retained draws.
pub fn run_chain(data: &IncidenceMatrix, config: &ChainConfig) -> Result<PosteriorSamples> {
    run_chain_with(data, config, |_, _, _| {})
}

/// As [`run_chain`], calling `observe` after every sweep with the new state,
/// the s-vectors used for its parent update and the parent probabilities
/// those s-vectors were routed on.
pub fn run_chain_with<F>(data: &IncidenceMatrix, config: &ChainConfig, mut observe: F) -> Result<PosteriorSamples>
where
    F: FnMut(&ChainState, &SVectors, &ParentParams),
{
    config.validate(data.d())?;
    let u = MembershipMatrix::new(config.parents)?;
    let hyper = config.hyperparams(data.d());
    let mut rng = chain_rng(config.seed);
    let mut state = ChainState::initial(data, &u, &hyper, &mut rng);

    let mut draws = Vec::with_capacity(config.retained());
    let mut sums = Array2::zeros((data.n(), u.heirs()));
    let mut previous_kept = false;

    for t in 1..=config.iterations {
        let mixture = Mixture::from_parents(&state.alpha_star, &state.pi, &u, config.combiner)?;
        // The allocation probabilities at this sweep are exactly those of the
        // previous state, so a retained state is scored here for free.
        let acc = previous_kept.then_some(&mut sums);
        allocation_sweep(&mixture, data, &mut state.z_star, acc, &mut rng).map_err(|e| e.at_iteration(t))?;
        state.alpha_star = update_weights(&state.z_star, &hyper.a, &mut rng);
        let s = compute_s_vectors(&state.z_star, &state.pi, &u, config.combiner);
        let routed_on = std::mem::replace(&mut state.pi, update_parent_probs(data, &s, &hyper, &mut rng)?);
        state.iteration = t;
        observe(&state, &s, &routed_on);

        previous_kept = config.keeps(t);
        if previous_kept {
            draws.push(Draw {
                alpha_star: state.alpha_star.clone(),
                pi: state.pi.clone(),
                z_star: state.z_star.iter().map(|&h| h as u16).collect(),
            });
        }
    }
    if previous_kept {
        let mixture = Mixture::from_parents(&state.alpha_star, &state.pi, &u, config.combiner)?;
        let mut probs = vec![0.0; u.heirs()];
        for i in 0..data.n() {
            mixture
                .allocation_into(data.attended(i), &mut probs)
                .map_err(|e| e.at_iteration(config.iterations))?;
            sums.row_mut(i).iter_mut().zip(&probs).for_each(|(a, p)| *a += p);
        }
    }

    Ok(PosteriorSamples {
        parents: config.parents,
        combiner: config.combiner,
        draws,
        allocation_sums: Some(sums),
    })
}

/// Dirichlet draw via normalised Gamma variates, computed in log space so that
/// small concentrations cannot underflow every component to zero.
pub(crate) fn sample_dirichlet<R: Rng + ?Sized>(conc: &[f64], rng: &mut R) -> MixtureWeights {
    let logs: Vec<f64> = conc.iter().map(|&c| log_gamma_variate(c, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    MixtureWeights::from_unchecked(w)
}

fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        // G(a) = G(a + 1) * U^(1/a)
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.random();
        g.ln() + u.ln() / shape
    }
}

pub(crate) fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    clamp_prob(Beta::new(a, b).expect("positive Beta shapes").sample(rng))
}
