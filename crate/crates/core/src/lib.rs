//! Diagnostics for taskified time-series streams: task-level Wasserstein
//! distances, plasticity and stability profiles, boundary perturbation
//! sensitivity, synthetic fixtures and continual-learning metrics.

pub mod cl_metrics;
pub mod distance;
pub mod profiles;
pub mod report;
pub mod stats;
pub mod stream;
pub mod synthetic;
pub mod taskify;

pub use distance::{sliced_w1, wasserstein1, DistanceMatrix, EmpiricalDist};
pub use profiles::{bps, d_prof, BpsReport, Profile, ProfileDistance, ProfileSettings};
pub use stream::{ChannelSelector, CsvSchema, Stream};
pub use taskify::{PerturbationSpec, Taskification};

/// Union of the per-module errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Stream(#[from] stream::StreamError),
    #[error(transparent)]
    Taskify(#[from] taskify::TaskifyError),
    #[error(transparent)]
    Distance(#[from] distance::DistanceError),
    #[error(transparent)]
    Profile(#[from] profiles::ProfileError),
    #[error(transparent)]
    Synth(#[from] synthetic::SynthError),
    #[error(transparent)]
    Metrics(#[from] cl_metrics::MetricsError),
}
