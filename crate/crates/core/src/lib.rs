//! Overlapping-cluster Bernoulli mixtures for actor-event (two-mode) networks.
//!
//! Actors may belong to any subset of `K` parent clusters. Each subset is an
//! heir cluster of an ordinary finite mixture with `2^K` components whose
//! attendance probabilities are combined from the parents' (by default the
//! minimum). Inference is by Gibbs sampling; model size is chosen by DIC and
//! clustering uncertainty is summarised by a posterior confusion matrix.

pub mod baseline;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod io;
pub mod model;
pub mod sampler;
pub mod selection;
pub mod simgen;

pub use diagnostics::{AveragedAllocations, ClusteringLabels, Pcm};
pub use error::{Error, Result};
pub use model::{
    Combiner, HeirParams, Hyperparams, IncidenceMatrix, MembershipMatrix, Mixture, MixtureTrace, MixtureWeights,
    ParentParams, ParentWeights,
};
pub use sampler::{run_chain, ChainConfig, ChainState, PosteriorSamples, SVectors};
pub use selection::{dic3, scan_k, DicResult, ScanResult};
pub use simgen::{generate_dataset, SimConfig, SimDataset};
