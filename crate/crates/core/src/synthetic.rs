//! Seeded synthetic streams for the fragility case studies and for
//! regime-switching test corpora.
//!
//! Noise is drawn from ChaCha8 seeded through `rand_core`'s `seed_from_u64`.
//! Each standard normal consumes two `u64` outputs `a`, `b`:
//!
//! ```text
//! u1 = ((a >> 11) + 1) * 2^-53        in (0, 1]
//! u2 = (b >> 11) * 2^-53              in [0, 1)
//! z  = sqrt(-2 ln u1) * cos(2 pi u2)
//! ```
//!
//! Exactly one normal is drawn per step, in step order, for every kind.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::{Stream, StreamError};
use crate::taskify::{PerturbationSpec, TaskifyError, Taskification};

pub const DEFAULT_STEP_DURATION: u64 = 600;
pub const CHANNEL_NAME: &str = "x";

const FIXTURES_JSON: &str = include_str!("../fixtures/fragile_fixtures.json");

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Taskify(#[from] TaskifyError),
    #[error(transparent)]
    Fixture(#[from] serde_json::Error),
}

/// Affine background `constant + slope * t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Background {
    pub constant: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SynthKind {
    /// `N(mu1, sigma^2)` before `t_star1`, `N(mu2, sigma^2)` on
    /// `[t_star1, t_star2]`, `N(mu1, sigma^2)` after.
    Changepoint {
        mu1: f64,
        mu2: f64,
        sigma: f64,
        t_star1: usize,
        t_star2: usize,
    },
    /// Background plus two Gaussian bumps of height `amplitude` and width
    /// `eta` centered at `t_star1` and `t_star2`.
    Transient {
        amplitude: f64,
        eta: f64,
        t_star1: f64,
        t_star2: f64,
        #[serde(default)]
        background: Background,
        #[serde(default)]
        noise_sigma: f64,
    },
    /// `sin(omega * t)` plus noise. Giving `period` (in steps) instead of
    /// `omega` evaluates the phase as `2 pi (t mod period) / period`, which
    /// makes integer periods repeat bit for bit.
    Periodic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
        #[serde(default)]
        noise_sigma: f64,
    },
    IidNoise {
        #[serde(default)]
        mean: f64,
        sigma: f64,
    },
    /// Regime `i` lasts `regime_lengths[i % len]` steps with mean
    /// `means[i % len]`; the pattern repeats until `t_steps`.
    PiecewiseRegimes {
        means: Vec<f64>,
        regime_lengths: Vec<usize>,
        sigma: f64,
    },
}

fn default_step() -> u64 {
    DEFAULT_STEP_DURATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub t_steps: usize,
    pub seed: u64,
    #[serde(default = "default_step")]
    pub step_duration: u64,
    #[serde(flatten)]
    pub kind: SynthKind,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, t_steps: usize, seed: u64) -> Self {
        Self {
            t_steps,
            seed,
            step_duration: DEFAULT_STEP_DURATION,
            kind,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SynthKind::Changepoint { .. } => "changepoint",
            SynthKind::Transient { .. } => "transient",
            SynthKind::Periodic { .. } => "periodic",
            SynthKind::IidNoise { .. } => "iid_noise",
            SynthKind::PiecewiseRegimes { .. } => "piecewise_regimes",
        }
    }

    pub fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.t_steps < 2 {
            return bad(format!("t_steps must be at least 2, got {}", self.t_steps));
        }
        if self.step_duration == 0 {
            return bad("step_duration must be positive".into());
        }
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::InvalidSpec(format!("{name} must be a finite non-negative value, got {v}")))
            }
        };
        match &self.kind {
            SynthKind::Changepoint {
                sigma, t_star1, t_star2, ..
            } => {
                non_negative("sigma", *sigma)?;
                if !(0 < *t_star1 && t_star1 < t_star2 && *t_star2 < self.t_steps) {
                    return bad(format!(
                        "need 0 < t_star1 < t_star2 < t_steps, got {t_star1}, {t_star2}, {}",
                        self.t_steps
                    ));
                }
            }
            SynthKind::Transient {
                eta,
                t_star1,
                t_star2,
                noise_sigma,
                ..
            } => {
                non_negative("noise_sigma", *noise_sigma)?;
                if !(*eta > 0.0 && eta.is_finite()) {
                    return bad(format!("eta must be positive, got {eta}"));
                }
                if !(0.0 < *t_star1 && t_star1 < t_star2 && *t_star2 < self.t_steps as f64) {
                    return bad(format!("need 0 < t_star1 < t_star2 < t_steps, got {t_star1}, {t_star2}"));
                }
            }
            SynthKind::Periodic {
                omega,
                period,
                noise_sigma,
            } => {
                non_negative("noise_sigma", *noise_sigma)?;
                match (omega, period) {
                    (Some(w), None) if w.is_finite() => {}
                    (None, Some(p)) if *p > 0.0 && p.is_finite() => {}
                    _ => return bad("periodic needs exactly one of omega or a positive period".into()),
                }
            }
            SynthKind::IidNoise { sigma, .. } => non_negative("sigma", *sigma)?,
            SynthKind::PiecewiseRegimes {
                means,
                regime_lengths,
                sigma,
            } => {
                non_negative("sigma", *sigma)?;
                if means.is_empty() || regime_lengths.is_empty() {
                    return bad("means and regime_lengths must be non-empty".into());
                }
                if regime_lengths.contains(&0) {
                    return bad("regime lengths must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// Standard normal source used by every generator.
pub struct GaussianNoise {
    rng: ChaCha8Rng,
}

impl GaussianNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_standard(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn bump(t: f64, center: f64, eta: f64) -> f64 {
    (-(t - center).powi(2) / (2.0 * eta * eta)).exp()
}

/// Generates the single-channel stream described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<Stream, SynthError> {
    spec.check()?;
    let mut noise = GaussianNoise::new(spec.seed);
    let n = spec.t_steps;
    let values: Vec<f64> = match &spec.kind {
        SynthKind::Changepoint {
            mu1,
            mu2,
            sigma,
            t_star1,
            t_star2,
        } => (0..n)
            .map(|t| {
                let mu = if (*t_star1..=*t_star2).contains(&t) { *mu2 } else { *mu1 };
                mu + sigma * noise.next_standard()
            })
            .collect(),
        SynthKind::Transient {
            amplitude,
            eta,
            t_star1,
            t_star2,
            background,
            noise_sigma,
        } => (0..n)
            .map(|t| {
                let tf = t as f64;
                background.constant
                    + background.slope * tf
                    + amplitude * bump(tf, *t_star1, *eta)
                    + amplitude * bump(tf, *t_star2, *eta)
                    + noise_sigma * noise.next_standard()
            })
            .collect(),
        SynthKind::Periodic {
            omega,
            period,
            noise_sigma,
        } => (0..n)
            .map(|t| {
                let tf = t as f64;
                let phase = match (omega, period) {
                    (_, Some(p)) => std::f64::consts::TAU * (tf % p) / p,
                    (Some(w), None) => w * tf,
                    (None, None) => unreachable!("checked"),
                };
                phase.sin() + noise_sigma * noise.next_standard()
            })
            .collect(),
        SynthKind::IidNoise { mean, sigma } => (0..n).map(|_| mean + sigma * noise.next_standard()).collect(),
        SynthKind::PiecewiseRegimes {
            means,
            regime_lengths,
            sigma,
        } => {
            let mut out = Vec::with_capacity(n);
            let mut regime = 0;
            while out.len() < n {
                let len = regime_lengths[regime % regime_lengths.len()];
                let mean = means[regime % means.len()];
                for _ in 0..len.min(n - out.len()) {
                    out.push(mean + sigma * noise.next_standard());
                }
                regime += 1;
            }
            out
        }
    };
    let id = format!("{}-{}", spec.kind_name(), spec.seed);
    Ok(Stream::new(id, vec![CHANNEL_NAME.to_string()], vec![values], spec.step_duration, 0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureCase {
    Changepoint,
    Transient,
    Periodic,
}

/// Parameters of one fragile/robust fixture as shipped in
/// `fixtures/fragile_fixtures.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDef {
    pub synth: SynthSpec,
    pub fragile: Vec<usize>,
    pub robust: Vec<usize>,
    pub delta_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub min_task_len: usize,
}

/// Stream with regimes of fixed length used for window-length comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOrderingDef {
    pub synth: SynthSpec,
    pub windows_days: Vec<usize>,
    pub shift_days: i64,
    pub delta_days: usize,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub version: u32,
    pub note: String,
    pub changepoint: FixtureDef,
    pub transient: FixtureDef,
    pub periodic: FixtureDef,
    pub window_ordering: WindowOrderingDef,
}

impl FixtureFile {
    pub fn shipped() -> Result<Self, SynthError> {
        Ok(serde_json::from_str(FIXTURES_JSON)?)
    }

    pub fn case(&self, case: FixtureCase) -> &FixtureDef {
        match case {
            FixtureCase::Changepoint => &self.changepoint,
            FixtureCase::Transient => &self.transient,
            FixtureCase::Periodic => &self.periodic,
        }
    }
}

/// A built fixture: the stream plus its fragile and robust splits.
#[derive(Debug, Clone)]
pub struct FragileFixture {
    pub stream: Stream,
    pub fragile: Taskification,
    pub robust: Taskification,
    pub spec: PerturbationSpec,
    pub min_task_len: usize,
}

impl FixtureDef {
    pub fn build(&self) -> Result<FragileFixture, SynthError> {
        let stream = generate(&self.synth)?;
        let spd = crate::taskify::steps_per_day(&stream)?;
        let fragile = Taskification::new("fragile", self.fragile.clone(), spd)?;
        let robust = Taskification::new("robust", self.robust.clone(), spd)?;
        fragile.validate(stream.t_steps(), self.min_task_len)?;
        robust.validate(stream.t_steps(), self.min_task_len)?;
        let spec = PerturbationSpec::new(self.delta_steps, self.n_samples, self.seed)?;
        Ok(FragileFixture {
            stream,
            fragile,
            robust,
            spec,
            min_task_len: self.min_task_len,
        })
    }
}

/// Canonical seeded instance of a fragility case study.
pub fn fragile_fixture(case: FixtureCase) -> Result<FragileFixture, SynthError> {
    FixtureFile::shipped()?.case(case).build()
}
