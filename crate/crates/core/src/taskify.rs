//! Temporal taskifications: ordered partitions of a stream into tasks.
//!
//! Boundaries are step indices `(t_0, ..., t_K)` with `t_0 = 0` and
//! `t_K = T`; task `k` covers the half-open interval `[t_{k-1}, t_k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::Stream;

/// Redraws allowed per neighborhood sample before giving up.
pub const MAX_REDRAWS: usize = 10_000;
pub const DEFAULT_N_SAMPLES: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskifyError {
    #[error("step duration of {0}s does not divide a day evenly")]
    StepNotDayAligned(u64),
    #[error("invalid taskification: {0}")]
    Invalid(String),
    #[error("window of {window_steps} steps yields fewer than 2 tasks on a {t_steps}-step stream")]
    WindowTooLong { window_steps: usize, t_steps: usize },
    #[error("window of {window_steps} steps is shorter than the minimum task length {min_task_len}")]
    WindowTooShort { window_steps: usize, min_task_len: usize },
    #[error("shift of {shift_steps} steps is invalid: {reason}")]
    InvalidShift { shift_steps: i64, reason: String },
    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),
    #[error("no valid perturbation found after {attempts} draws")]
    NeighborhoodEmpty { attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taskification {
    pub label: String,
    pub boundaries: Vec<usize>,
    pub steps_per_day: usize,
}

impl Taskification {
    /// Checks ordering and endpoints; see [`Taskification::validate`] for the
    /// stream-dependent checks.
    pub fn new(
        label: impl Into<String>,
        boundaries: Vec<usize>,
        steps_per_day: usize,
    ) -> Result<Self, TaskifyError> {
        if boundaries.len() < 2 {
            return Err(TaskifyError::Invalid("need at least two boundaries".into()));
        }
        if boundaries[0] != 0 {
            return Err(TaskifyError::Invalid("first boundary must be 0".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TaskifyError::Invalid("boundaries must be strictly increasing".into()));
        }
        if steps_per_day == 0 {
            return Err(TaskifyError::Invalid("steps_per_day must be positive".into()));
        }
        Ok(Self {
            label: label.into(),
            boundaries,
            steps_per_day,
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn t_steps(&self) -> usize {
        *self.boundaries.last().expect("validated non-empty")
    }

    pub fn internal_boundaries(&self) -> &[usize] {
        &self.boundaries[1..self.boundaries.len() - 1]
    }

    /// Checks that the taskification spans `t_steps` and every task holds at
    /// least `min_task_len` steps.
    pub fn validate(&self, t_steps: usize, min_task_len: usize) -> Result<(), TaskifyError> {
        if self.t_steps() != t_steps {
            return Err(TaskifyError::Invalid(format!(
                "last boundary {} does not match stream length {t_steps}",
                self.t_steps()
            )));
        }
        check_lengths(&self.boundaries, min_task_len).map_err(TaskifyError::Invalid)
    }
}

fn check_lengths(boundaries: &[usize], min_task_len: usize) -> Result<(), String> {
    for (k, w) in boundaries.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(format!("boundary {} is not after boundary {k}", k + 1));
        }
        if w[1] - w[0] < min_task_len {
            return Err(format!(
                "task {} has {} steps, below the minimum {min_task_len}",
                k + 1,
                w[1] - w[0]
            ));
        }
    }
    Ok(())
}

/// Steps per day for `stream`; errors unless the step divides a day.
pub fn steps_per_day(stream: &Stream) -> Result<usize, TaskifyError> {
    stream
        .steps_per_day()
        .ok_or(TaskifyError::StepNotDayAligned(stream.step_duration()))
}

/// Default minimum task length: one day of steps.
pub fn default_min_task_len(stream: &Stream) -> Result<usize, TaskifyError> {
    steps_per_day(stream)
}

/// Splits `stream` into consecutive windows of `window_days` days.
///
/// A trailing partial window shorter than `min_task_len` is merged into the
/// preceding task; otherwise it is kept as a short final task.
pub fn fixed_length(
    stream: &Stream,
    window_days: usize,
    min_task_len: usize,
) -> Result<Taskification, TaskifyError> {
    let spd = steps_per_day(stream)?;
    fixed_length_steps(stream.t_steps(), window_days * spd, min_task_len, spd, format!("{window_days}d"))
}

pub fn fixed_length_steps(
    t_steps: usize,
    window_steps: usize,
    min_task_len: usize,
    steps_per_day: usize,
    label: String,
) -> Result<Taskification, TaskifyError> {
    if window_steps == 0 || window_steps < min_task_len {
        return Err(TaskifyError::WindowTooShort {
            window_steps,
            min_task_len,
        });
    }
    let mut boundaries: Vec<usize> = (0..t_steps).step_by(window_steps).collect();
    boundaries.push(t_steps);
    let n = boundaries.len();
    if n > 2 && boundaries[n - 1] - boundaries[n - 2] < min_task_len {
        boundaries.remove(n - 2);
    }
    if boundaries.len() < 3 {
        return Err(TaskifyError::WindowTooLong { window_steps, t_steps });
    }
    Taskification::new(label, boundaries, steps_per_day)
}

/// Moves every internal boundary by `shift_days`; endpoints stay pinned.
pub fn shift(tk: &Taskification, shift_days: i64, min_task_len: usize) -> Result<Taskification, TaskifyError> {
    let shift_steps = shift_days * tk.steps_per_day as i64;
    let mut shifted = shift_steps_by(tk, shift_steps, min_task_len)?;
    if shift_days != 0 {
        shifted.label = format!("{}+Δ{shift_days}d", tk.label);
    }
    Ok(shifted)
}

pub fn shift_steps_by(
    tk: &Taskification,
    shift_steps: i64,
    min_task_len: usize,
) -> Result<Taskification, TaskifyError> {
    let t = tk.t_steps() as i64;
    let mut boundaries = Vec::with_capacity(tk.boundaries.len());
    boundaries.push(0);
    for &b in tk.internal_boundaries() {
        let moved = b as i64 + shift_steps;
        if moved <= 0 || moved >= t {
            return Err(TaskifyError::InvalidShift {
                shift_steps,
                reason: format!("boundary {b} leaves the stream"),
            });
        }
        boundaries.push(moved as usize);
    }
    boundaries.push(tk.t_steps());
    check_lengths(&boundaries, min_task_len)
        .map_err(|reason| TaskifyError::InvalidShift { shift_steps, reason })?;
    Ok(Taskification {
        label: tk.label.clone(),
        boundaries,
        steps_per_day: tk.steps_per_day,
    })
}

/// Half-open task intervals `[t_{k-1}, t_k)`.
pub fn task_intervals(tk: &Taskification) -> Vec<(usize, usize)> {
    tk.boundaries.windows(2).map(|w| (w[0], w[1])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub delta_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(delta_steps: usize, n_samples: usize, seed: u64) -> Result<Self, TaskifyError> {
        let spec = Self {
            delta_steps,
            n_samples,
            seed,
        };
        spec.check()?;
        Ok(spec)
    }

    /// One day of displacement on the given grid.
    pub fn one_day(steps_per_day: usize, seed: u64) -> Self {
        Self {
            delta_steps: steps_per_day,
            n_samples: DEFAULT_N_SAMPLES,
            seed,
        }
    }

    pub fn check(&self) -> Result<(), TaskifyError> {
        if self.delta_steps == 0 {
            return Err(TaskifyError::InvalidSpec("delta_steps must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(TaskifyError::InvalidSpec("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Source of per-boundary offsets in `[-delta, delta]`.
pub trait OffsetSource {
    fn offset(&mut self, delta: usize) -> i64;
}

impl<R: Rng> OffsetSource for R {
    fn offset(&mut self, delta: usize) -> i64 {
        let d = delta as i64;
        self.random_range(-d..=d)
    }
}

/// A neighborhood sample together with bookkeeping about rejected draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub samples: Vec<Taskification>,
    pub rejected_draws: usize,
}

/// Draws `spec.n_samples` boundary perturbations of `tk`, seeded by
/// `spec.seed` (ChaCha8).
pub fn sample_neighborhood(
    tk: &Taskification,
    spec: &PerturbationSpec,
    min_task_len: usize,
) -> Result<Neighborhood, TaskifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_neighborhood_with(tk, spec, min_task_len, &mut rng)
}

/// Like [`sample_neighborhood`] with a caller-supplied offset source.
///
/// Each internal boundary moves by an independent offset. Draws that break
/// ordering or the minimum task length are discarded and redrawn whole.
pub fn sample_neighborhood_with<S: OffsetSource>(
    tk: &Taskification,
    spec: &PerturbationSpec,
    min_task_len: usize,
    source: &mut S,
) -> Result<Neighborhood, TaskifyError> {
    spec.check()?;
    let t = tk.t_steps() as i64;
    let mut samples = Vec::with_capacity(spec.n_samples);
    let mut rejected_draws = 0;
    let mut candidate = tk.boundaries.clone();
    for _ in 0..spec.n_samples {
        let mut attempts = 0;
        loop {
            if attempts == MAX_REDRAWS {
                return Err(TaskifyError::NeighborhoodEmpty { attempts });
            }
            attempts += 1;
            let mut inside = true;
            for (slot, &b) in candidate[1..].iter_mut().zip(tk.internal_boundaries()) {
                let moved = b as i64 + source.offset(spec.delta_steps);
                inside &= moved > 0 && moved < t;
                *slot = moved.clamp(0, t) as usize;
            }
            if inside && check_lengths(&candidate, min_task_len).is_ok() {
                break;
            }
            rejected_draws += 1;
        }
        samples.push(Taskification {
            label: tk.label.clone(),
            boundaries: candidate.clone(),
            steps_per_day: tk.steps_per_day,
        });
    }
    Ok(Neighborhood {
        samples,
        rejected_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPD: usize = 144;

    fn stream_days(days: usize) -> Stream {
        Stream::univariate("s", "x", vec![0.0; days * SPD], 600).unwrap()
    }

    #[test]
    fn fixed_length_grid() {
        let s = stream_days(280);
        let tk = fixed_length(&s, 44, SPD).unwrap();
        // Oracle: boundaries at every multiple of 44 days below 280, then 280.
        let expected: Vec<usize> = (0..280)
            .filter(|d| d % 44 == 0)
            .map(|d| d * SPD)
            .chain(std::iter::once(280 * SPD))
            .collect();
        assert_eq!(tk.boundaries, expected);
        assert_eq!(tk.n_tasks(), 280usize.div_ceil(44));
        assert_eq!(tk.label, "44d");
    }

    #[test]
    fn two_nine_day_tasks() {
        let s = stream_days(18);
        let tk = fixed_length(&s, 9, SPD).unwrap();
        assert_eq!(tk.boundaries, vec![0, 9 * SPD, 18 * SPD]);
    }

    #[test]
    fn window_errors() {
        let s = stream_days(280);
        assert!(matches!(fixed_length(&s, 300, SPD), Err(TaskifyError::WindowTooLong { .. })));
        assert!(matches!(fixed_length(&s, 280, SPD), Err(TaskifyError::WindowTooLong { .. })));
        assert!(matches!(
            fixed_length_steps(1000, 10, 20, SPD, "x".into()),
            Err(TaskifyError::WindowTooShort { .. })
        ));
        let odd = Stream::univariate("s", "x", vec![0.0; 100], 7).unwrap();
        assert!(matches!(fixed_length(&odd, 1, 1), Err(TaskifyError::StepNotDayAligned(7))));
    }

    #[test]
    fn short_remainder_merges() {
        // 100 steps, window 30, min 15: remainder 10 merges into the last task.
        let tk = fixed_length_steps(100, 30, 15, SPD, "w".into()).unwrap();
        assert_eq!(tk.boundaries, vec![0, 30, 60, 100]);
        // Remainder 20 >= 15 is kept.
        let tk = fixed_length_steps(110, 30, 15, SPD, "w".into()).unwrap();
        assert_eq!(tk.boundaries, vec![0, 30, 60, 90, 110]);
        // Merging down to a single task is too long a window.
        assert!(fixed_length_steps(35, 30, 15, SPD, "w".into()).is_err());
    }

    #[test]
    fn shifting() {
        let tk = Taskification::new("9d", vec![0, 9 * SPD, 18 * SPD], SPD).unwrap();
        let moved = shift(&tk, 2, SPD).unwrap();
        assert_eq!(moved.boundaries, vec![0, 11 * SPD, 18 * SPD]);
        assert_eq!(moved.label, "9d+Δ2d");
        assert_eq!(shift(&tk, 0, SPD).unwrap(), tk);
        let back = shift(&moved, -2, SPD).unwrap();
        assert_eq!(back.boundaries, tk.boundaries);

        let three = Taskification::new("x", vec![0, 2 * SPD, 4 * SPD, 10 * SPD], SPD).unwrap();
        assert!(matches!(shift(&three, 7, SPD), Err(TaskifyError::InvalidShift { .. })));
        assert!(matches!(shift(&tk, -9, SPD), Err(TaskifyError::InvalidShift { .. })));
    }

    #[test]
    fn intervals_tile() {
        let tk = Taskification::new("x", vec![0, 3, 7], 1).unwrap();
        assert_eq!(task_intervals(&tk), vec![(0, 3), (3, 7)]);
        let single = Taskification::new("x", vec![0, 50], 1).unwrap();
        assert_eq!(task_intervals(&single), vec![(0, 50)]);
    }

    #[test]
    fn construction_rejects_bad_boundaries() {
        assert!(Taskification::new("x", vec![0], 1).is_err());
        assert!(Taskification::new("x", vec![1, 5], 1).is_err());
        assert!(Taskification::new("x", vec![0, 5, 5, 9], 1).is_err());
        let tk = Taskification::new("x", vec![0, 5, 9], 1).unwrap();
        assert!(tk.validate(9, 4).is_ok());
        assert!(tk.validate(9, 5).is_err());
        assert!(tk.validate(10, 1).is_err());
    }

    #[test]
    fn weekday_alignment_of_mod7_windows() {
        // 9, 30 and 44 are all 2 (mod 7): the k-th task of each split starts
        // on the same weekday.
        let s = stream_days(280);
        let start_weekday = 0usize;
        let starts: Vec<Vec<usize>> = [9, 30, 44]
            .iter()
            .map(|&w| {
                let tk = fixed_length(&s, w, SPD).unwrap();
                task_intervals(&tk)
                    .iter()
                    .map(|(a, _)| (start_weekday + a / SPD) % 7)
                    .collect()
            })
            .collect();
        let common = starts.iter().map(Vec::len).min().unwrap();
        for k in 0..common {
            assert_eq!(starts[0][k], starts[1][k]);
            assert_eq!(starts[1][k], starts[2][k]);
            assert_eq!(starts[0][k], (2 * k) % 7);
        }
    }

    struct Zero;
    impl OffsetSource for Zero {
        fn offset(&mut self, _delta: usize) -> i64 {
            0
        }
    }

    #[test]
    fn degenerate_source_reproduces_taskification() {
        let tk = Taskification::new("x", vec![0, 10, 20, 30], 1).unwrap();
        let spec = PerturbationSpec::new(3, 5, 0).unwrap();
        let hood = sample_neighborhood_with(&tk, &spec, 1, &mut Zero).unwrap();
        assert_eq!(hood.samples.len(), 5);
        assert!(hood.samples.iter().all(|s| s == &tk));
        assert_eq!(hood.rejected_draws, 0);
    }

    #[test]
    fn uniform_offsets_for_single_boundary() {
        let tk = Taskification::new("x", vec![0, 50, 100], 1).unwrap();
        let spec = PerturbationSpec::new(1, 1000, 7).unwrap();
        let hood = sample_neighborhood(&tk, &spec, 1).unwrap();
        let mut counts = [0usize; 3];
        for s in &hood.samples {
            let off = s.boundaries[1] as i64 - 50;
            counts[(off + 1) as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / 1000.0;
            assert!((freq - 1.0 / 3.0).abs() <= 0.05, "freq {freq}");
        }
    }

    #[test]
    fn one_day_delta_spans_144_steps() {
        let spec = PerturbationSpec::one_day(SPD, 3);
        assert_eq!(spec.delta_steps, 144);
        let tk = Taskification::new("x", vec![0, 10 * SPD, 20 * SPD], SPD).unwrap();
        let hood = sample_neighborhood(&tk, &PerturbationSpec { n_samples: 2000, ..spec }, SPD).unwrap();
        let offsets: Vec<i64> = hood.samples.iter().map(|s| s.boundaries[1] as i64 - 1440).collect();
        assert!(offsets.iter().all(|o| o.abs() <= 144));
        assert_eq!(*offsets.iter().min().unwrap(), -144);
        assert_eq!(*offsets.iter().max().unwrap(), 144);
    }

    #[test]
    fn tight_neighborhood_is_reported() {
        // Tasks of exactly the minimum length: only non-decreasing offset
        // chains survive, and with many boundaries that is hopeless.
        let boundaries: Vec<usize> = (0..=40).map(|k| k * 10).collect();
        let tk = Taskification::new("x", boundaries, 10).unwrap();
        let spec = PerturbationSpec::new(5, 1, 1).unwrap();
        assert!(matches!(
            sample_neighborhood(&tk, &spec, 10),
            Err(TaskifyError::NeighborhoodEmpty { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(PerturbationSpec::new(0, 1, 0).is_err());
        assert!(PerturbationSpec::new(1, 0, 0).is_err());
    }
}
