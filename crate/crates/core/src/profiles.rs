//! Plasticity and stability profiles, the profile distance between two
//! taskifications, and Boundary-Profile Sensitivity (BPS).
//!
//! A taskification with task distributions `P_1..P_K` is summarized by two
//! multisets of task discrepancies:
//!
//! * plasticity: `d(P_k, P_{k+1})` for consecutive tasks,
//! * stability: `d(P_i, P_j)` for pairs with `j - i >= l_min`.
//!
//! Two taskifications are compared by the W_1 distance between their
//! plasticity profiles (`D_pl`) and between their stability profiles
//! (`D_st`), combined as `sqrt(alpha * D_pl^2 + beta * D_st^2)`. BPS is the
//! mean of that distance over random boundary perturbations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{sliced_w1, task_distributions, wasserstein1, DistanceError, EmpiricalDist};
use crate::stats::mean_std;
use crate::stream::{ChannelSelector, Stream};
use crate::taskify::{sample_neighborhood, PerturbationSpec, TaskifyError, Taskification};

pub const DEFAULT_L_MIN: usize = 2;

/// How the plasticity/stability rows of a [`BpsReport`] are defined.
pub const COMPONENT_READING: &str = "perturbation-averaged D_pl and D_st";

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{kind:?} profile needs at least {needed} tasks, got {got}")]
    TooFewTasks {
        kind: ProfileKind,
        needed: usize,
        got: usize,
    },
    #[error("cannot compare a {0:?} profile with a {1:?} profile")]
    KindMismatch(ProfileKind, ProfileKind),
    #[error("empty {0:?} profile")]
    EmptyProfile(ProfileKind),
    #[error("l_min must be at least 2, got {0}")]
    InvalidLMin(usize),
    #[error("weights must be positive and finite (alpha = {alpha}, beta = {beta})")]
    InvalidWeights { alpha: f64, beta: f64 },
    #[error("taskification does not cover the stream: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Taskify(#[from] TaskifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Plasticity,
    Stability,
}

/// An empirical profile; values are kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub kind: ProfileKind,
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub l_min: Option<usize>,
}

impl Profile {
    /// Builds a profile from raw values; values are sorted.
    pub fn sorted(kind: ProfileKind, mut values: Vec<f64>, l_min: Option<usize>) -> Self {
        values.sort_unstable_by(f64::total_cmp);
        Self { kind, values, l_min }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Number of stability pairs `(i, j)` with `j - i >= l_min` among `k` tasks.
pub fn stability_pair_count(k: usize, l_min: usize) -> usize {
    if k <= l_min {
        return 0;
    }
    let m = k - l_min;
    m * (m + 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistanceWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl ProfileDistanceWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ProfileError> {
        let w = Self { alpha, beta };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), ProfileError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.alpha) && ok(self.beta) {
            Ok(())
        } else {
            Err(ProfileError::InvalidWeights {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    pub fn combine(&self, d_pl: f64, d_st: f64) -> f64 {
        (self.alpha * d_pl * d_pl + self.beta * d_st * d_st).sqrt()
    }
}

impl Default for ProfileDistanceWeights {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.5 }
    }
}

/// Channel selection, weights and `l_min` shared by every profile computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings {
    pub selector: ChannelSelector,
    pub weights: ProfileDistanceWeights,
    pub l_min: usize,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        Self {
            selector: ChannelSelector::Target,
            weights: ProfileDistanceWeights::default(),
            l_min: DEFAULT_L_MIN,
        }
    }
}

impl ProfileSettings {
    pub fn check(&self) -> Result<(), ProfileError> {
        self.weights.check()?;
        if self.l_min < 2 {
            return Err(ProfileError::InvalidLMin(self.l_min));
        }
        Ok(())
    }
}

fn require_cover(stream: &Stream, tk: &Taskification) -> Result<(), ProfileError> {
    if tk.t_steps() != stream.t_steps() {
        return Err(ProfileError::Mismatch(format!(
            "`{}` ends at {} but the stream has {} steps",
            tk.label,
            tk.t_steps(),
            stream.t_steps()
        )));
    }
    Ok(())
}

pub fn plasticity_from_distributions(dists: &[Vec<EmpiricalDist>]) -> Result<Profile, ProfileError> {
    if dists.len() < 2 {
        return Err(ProfileError::TooFewTasks {
            kind: ProfileKind::Plasticity,
            needed: 2,
            got: dists.len(),
        });
    }
    let values = dists
        .windows(2)
        .map(|w| sliced_w1(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Profile::sorted(ProfileKind::Plasticity, values, None))
}

pub fn stability_from_distributions(dists: &[Vec<EmpiricalDist>], l_min: usize) -> Result<Profile, ProfileError> {
    if l_min < 2 {
        return Err(ProfileError::InvalidLMin(l_min));
    }
    let k = dists.len();
    if k < l_min + 1 {
        return Err(ProfileError::TooFewTasks {
            kind: ProfileKind::Stability,
            needed: l_min + 1,
            got: k,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + l_min)..k).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| sliced_w1(&dists[i], &dists[j]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Profile::sorted(ProfileKind::Stability, values, Some(l_min)))
}

pub fn plasticity_profile(
    stream: &Stream,
    tk: &Taskification,
    selector: &ChannelSelector,
) -> Result<Profile, ProfileError> {
    require_cover(stream, tk)?;
    plasticity_from_distributions(&task_distributions(stream, tk, selector)?)
}

pub fn stability_profile(
    stream: &Stream,
    tk: &Taskification,
    selector: &ChannelSelector,
    l_min: usize,
) -> Result<Profile, ProfileError> {
    require_cover(stream, tk)?;
    stability_from_distributions(&task_distributions(stream, tk, selector)?, l_min)
}

/// Both profiles of one taskification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePair {
    pub plasticity: Profile,
    pub stability: Profile,
}

pub fn profile_pair(stream: &Stream, tk: &Taskification, settings: &ProfileSettings) -> Result<ProfilePair, ProfileError> {
    require_cover(stream, tk)?;
    let dists = task_distributions(stream, tk, &settings.selector)?;
    Ok(ProfilePair {
        plasticity: plasticity_from_distributions(&dists)?,
        stability: stability_from_distributions(&dists, settings.l_min)?,
    })
}

/// W_1 distance between the value multisets of two profiles of one kind.
pub fn profile_w1(a: &Profile, b: &Profile) -> Result<f64, ProfileError> {
    if a.kind != b.kind {
        return Err(ProfileError::KindMismatch(a.kind, b.kind));
    }
    if a.is_empty() || b.is_empty() {
        return Err(ProfileError::EmptyProfile(a.kind));
    }
    let pa = EmpiricalDist::from_slice(&a.values)?;
    let pb = EmpiricalDist::from_slice(&b.values)?;
    Ok(wasserstein1(&pa, &pb))
}

/// `D_pl`, `D_st` and the combined profile distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistance {
    pub d_pl: f64,
    pub d_st: f64,
    pub d_prof: f64,
}

pub fn profile_distance(
    a: &ProfilePair,
    b: &ProfilePair,
    weights: &ProfileDistanceWeights,
) -> Result<ProfileDistance, ProfileError> {
    let d_pl = profile_w1(&a.plasticity, &b.plasticity)?;
    let d_st = profile_w1(&a.stability, &b.stability)?;
    Ok(ProfileDistance {
        d_pl,
        d_st,
        d_prof: weights.combine(d_pl, d_st),
    })
}

/// Profile distance between two taskifications of the same stream.
pub fn d_prof(
    stream: &Stream,
    tau: &Taskification,
    sigma: &Taskification,
    settings: &ProfileSettings,
) -> Result<ProfileDistance, ProfileError> {
    settings.check()?;
    let a = profile_pair(stream, tau, settings)?;
    let b = profile_pair(stream, sigma, settings)?;
    profile_distance(&a, &b, &settings.weights)
}

/// Per-taskification boundary sensitivity summary.
///
/// The plasticity/stability rows hold the mean and sample std of `D_pl` and
/// `D_st` over the perturbation sample; the BPS row is the same for the
/// combined distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpsReport {
    pub label: String,
    pub n_tasks: usize,
    pub plasticity_mean: f64,
    pub plasticity_std: f64,
    pub stability_mean: f64,
    pub stability_std: f64,
    pub bps_mean: f64,
    pub bps_std: f64,
    pub bps_max: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub delta_steps: usize,
    pub l_min: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rejected_draws: usize,
    pub component_reading: String,
    pub samples: Vec<ProfileDistance>,
}

impl BpsReport {
    fn from_samples(
        tk: &Taskification,
        spec: &PerturbationSpec,
        settings: &ProfileSettings,
        rejected_draws: usize,
        samples: Vec<ProfileDistance>,
    ) -> Self {
        let pl = mean_std(&samples.iter().map(|s| s.d_pl).collect::<Vec<_>>());
        let st = mean_std(&samples.iter().map(|s| s.d_st).collect::<Vec<_>>());
        let bps = mean_std(&samples.iter().map(|s| s.d_prof).collect::<Vec<_>>());
        Self {
            label: tk.label.clone(),
            n_tasks: tk.n_tasks(),
            plasticity_mean: pl.mean,
            plasticity_std: pl.std,
            stability_mean: st.mean,
            stability_std: st.std,
            bps_mean: bps.mean,
            bps_std: bps.std,
            bps_max: samples.iter().map(|s| s.d_prof).fold(0.0, f64::max),
            n_samples: samples.len(),
            seed: spec.seed,
            delta_steps: spec.delta_steps,
            l_min: settings.l_min,
            alpha: settings.weights.alpha,
            beta: settings.weights.beta,
            rejected_draws,
            component_reading: COMPONENT_READING.to_string(),
            samples,
        }
    }

    /// Recomputes the summary statistics from the stored per-sample values.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let pl = mean_std(&self.samples.iter().map(|s| s.d_pl).collect::<Vec<_>>());
        let st = mean_std(&self.samples.iter().map(|s| s.d_st).collect::<Vec<_>>());
        let bps = mean_std(&self.samples.iter().map(|s| s.d_prof).collect::<Vec<_>>());
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        let weights = ProfileDistanceWeights {
            alpha: self.alpha,
            beta: self.beta,
        };
        self.samples.len() == self.n_samples
            && self
                .samples
                .iter()
                .all(|s| close(s.d_prof, weights.combine(s.d_pl, s.d_st)))
            && close(pl.mean, self.plasticity_mean)
            && close(pl.std, self.plasticity_std)
            && close(st.mean, self.stability_mean)
            && close(st.std, self.stability_std)
            && close(bps.mean, self.bps_mean)
            && close(bps.std, self.bps_std)
    }
}

/// Boundary-Profile Sensitivity of `tk` under `spec`.
///
/// Perturbations are drawn up front from the seeded neighborhood sampler and
/// then evaluated in parallel, so the report does not depend on scheduling.
pub fn bps(
    stream: &Stream,
    tk: &Taskification,
    spec: &PerturbationSpec,
    settings: &ProfileSettings,
    min_task_len: usize,
) -> Result<BpsReport, ProfileError> {
    settings.check()?;
    tk.validate(stream.t_steps(), min_task_len)?;
    let base = profile_pair(stream, tk, settings)?;
    let hood = sample_neighborhood(tk, spec, min_task_len)?;
    let samples = hood
        .samples
        .par_iter()
        .map(|sigma| {
            let pair = profile_pair(stream, sigma, settings)?;
            profile_distance(&base, &pair, &settings.weights)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BpsReport::from_samples(tk, spec, settings, hood.rejected_draws, samples))
}
