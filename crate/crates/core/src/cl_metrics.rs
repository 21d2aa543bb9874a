//! Regression-adapted continual-learning metrics over a results matrix.
//!
//! `M[i][j]` is the MSE on task `j` after training through task `i`
//! (1-based in the formulas below, 0-based in code). With `T` tasks:
//!
//! ```text
//! f_j        = M[T][j] - min_{k in j..T-1} M[k][j]
//! Forgetting = mean_{j < T} f_j
//! BWT        = mean_{j < T} (M[j][j] - M[T][j])
//! ```

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("results matrix needs at least 2 tasks, got {0}")]
    TooFewTasks(usize),
    #[error("missing entry M[{after}][{task}] (1-based)")]
    MissingEntry { after: usize, task: usize },
    #[error("invalid entry M[{after}][{task}] = {value}")]
    InvalidEntry { after: usize, task: usize, value: f64 },
    #[error("need at least 2 values, got {0}")]
    TooFew(usize),
    #[error("malformed results CSV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMatrix {
    t_tasks: usize,
    m: Vec<Vec<Option<f64>>>,
}

impl ResultsMatrix {
    /// Requires a square `T x T` layout with the lower triangle and diagonal
    /// present, all present entries finite and non-negative.
    pub fn new(m: Vec<Vec<Option<f64>>>) -> Result<Self, MetricsError> {
        let t = m.len();
        if t < 2 {
            return Err(MetricsError::TooFewTasks(t));
        }
        for (i, row) in m.iter().enumerate() {
            if row.len() != t {
                return Err(MetricsError::Malformed(format!(
                    "row {} has {} cells, expected {t}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                match cell {
                    None if j <= i => {
                        return Err(MetricsError::MissingEntry {
                            after: i + 1,
                            task: j + 1,
                        })
                    }
                    Some(v) if !(v.is_finite() && *v >= 0.0) => {
                        return Err(MetricsError::InvalidEntry {
                            after: i + 1,
                            task: j + 1,
                            value: *v,
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { t_tasks: t, m })
    }

    /// Builds from the lower triangle: row `i` holds `i + 1` values.
    pub fn from_lower(rows: Vec<Vec<f64>>) -> Result<Self, MetricsError> {
        let t = rows.len();
        let full = rows
            .into_iter()
            .map(|r| {
                let mut cells: Vec<Option<f64>> = r.into_iter().map(Some).collect();
                cells.resize(t, None);
                cells
            })
            .collect();
        Self::new(full)
    }

    pub fn t_tasks(&self) -> usize {
        self.t_tasks
    }

    /// Entry after training through `after` on `task` (0-based); lower
    /// triangle only.
    pub fn at(&self, after: usize, task: usize) -> f64 {
        self.m[after][task].expect("lower triangle validated")
    }

    pub fn get(&self, after: usize, task: usize) -> Option<f64> {
        self.m.get(after).and_then(|r| r.get(task)).copied().flatten()
    }

    pub fn add_constant(&self, c: f64) -> Result<Self, MetricsError> {
        Self::new(
            self.m
                .iter()
                .map(|r| r.iter().map(|v| v.map(|x| x + c)).collect())
                .collect(),
        )
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("after_task") {
            return Err(MetricsError::Malformed("first column must be `after_task`".into()));
        }
        let t = headers.len() - 1;
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("task_{}", j + 1) {
                return Err(MetricsError::Malformed(format!("unexpected header `{h}`")));
            }
        }
        let mut rows: Vec<(usize, Vec<Option<f64>>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let after: usize = rec
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|_| MetricsError::Malformed(format!("bad after_task `{}`", rec.get(0).unwrap_or(""))))?;
            let mut cells = Vec::with_capacity(t);
            for j in 0..t {
                let raw = rec.get(j + 1).unwrap_or("");
                cells.push(if raw.is_empty() {
                    None
                } else {
                    Some(raw.parse::<f64>().map_err(|_| MetricsError::Malformed(format!("bad cell `{raw}`")))?)
                });
            }
            rows.push((after, cells));
        }
        rows.sort_by_key(|(a, _)| *a);
        let ids: Vec<usize> = rows.iter().map(|(a, _)| *a).collect();
        if ids != (1..=t).collect::<Vec<_>>() {
            return Err(MetricsError::Malformed(format!(
                "after_task column must list 1..{t} exactly once, got {ids:?}"
            )));
        }
        Self::new(rows.into_iter().map(|(_, c)| c).collect())
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let t = self.t_tasks;
        let mut out = String::from("after_task");
        for j in 1..=t {
            out.push_str(&format!(",task_{j}"));
        }
        out.push('\n');
        for (i, row) in self.m.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn forgetting(rm: &ResultsMatrix) -> f64 {
    let t = rm.t_tasks;
    let last = t - 1;
    let total: f64 = (0..last)
        .map(|j| {
            let best = (j..last).map(|k| rm.at(k, j)).fold(f64::INFINITY, f64::min);
            rm.at(last, j) - best
        })
        .sum();
    total / last as f64
}

pub fn backward_transfer(rm: &ResultsMatrix) -> f64 {
    let last = rm.t_tasks - 1;
    let total: f64 = (0..last).map(|j| rm.at(j, j) - rm.at(last, j)).sum();
    total / last as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMseMode {
    /// Mean of the final row (final model on every task).
    #[default]
    FinalRow,
    /// Mean over the full lower triangle including the diagonal.
    LowerTriangle,
}

pub fn average_mse(rm: &ResultsMatrix) -> f64 {
    average_mse_with(rm, AverageMseMode::FinalRow)
}

pub fn average_mse_with(rm: &ResultsMatrix, mode: AverageMseMode) -> f64 {
    let t = rm.t_tasks;
    match mode {
        AverageMseMode::FinalRow => (0..t).map(|j| rm.at(t - 1, j)).sum::<f64>() / t as f64,
        AverageMseMode::LowerTriangle => {
            let (sum, n) = (0..t)
                .flat_map(|i| (0..=i).map(move |j| (i, j)))
                .fold((0.0, 0usize), |(s, n), (i, j)| (s + rm.at(i, j), n + 1));
            sum / n as f64
        }
    }
}

/// Sample standard deviation (n - 1 denominator).
pub fn cross_taskification_std(values: &[f64]) -> Result<f64, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::TooFew(values.len()));
    }
    Ok(crate::stats::mean_std(values).std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub name: String,
    pub t_tasks: usize,
    pub average_mse: f64,
    pub bwt: f64,
    pub forgetting: f64,
}

pub fn summarize_matrix(name: &str, rm: &ResultsMatrix, mode: AverageMseMode) -> MetricsSummary {
    MetricsSummary {
        name: name.to_string(),
        t_tasks: rm.t_tasks,
        average_mse: average_mse_with(rm, mode),
        bwt: backward_transfer(rm),
        forgetting: forgetting(rm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_task_hand_arithmetic() {
        let rm = ResultsMatrix::from_lower(vec![vec![1.0], vec![1.5, 0.7]]).unwrap();
        assert!((forgetting(&rm) - 0.5).abs() < 1e-15);
        assert!((backward_transfer(&rm) + 0.5).abs() < 1e-15);
        assert!((average_mse(&rm) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn no_change_cases() {
        // Final row equals the running minimum and the diagonal.
        let rm = ResultsMatrix::from_lower(vec![vec![2.0], vec![3.0, 1.0], vec![2.0, 1.0, 4.0]]).unwrap();
        assert_eq!(forgetting(&rm), 0.0);
        assert_eq!(backward_transfer(&rm), 0.0);
    }

    #[test]
    fn min_after_diagonal() {
        // Column 1: 3.0 (diag), 1.0 (min at k = j+1), final 2.5.
        let rm = ResultsMatrix::from_lower(vec![vec![3.0], vec![1.0, 2.0], vec![2.5, 2.0, 1.0]]).unwrap();
        // f_1 = 2.5 - 1.0, f_2 = 2.0 - 2.0
        assert!((forgetting(&rm) - 0.75).abs() < 1e-15);
        // BWT = ((3.0 - 2.5) + (2.0 - 2.0)) / 2
        assert!((backward_transfer(&rm) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn average_modes() {
        let rm = ResultsMatrix::from_lower(vec![vec![5.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(average_mse(&rm), 2.0);
        assert_eq!(average_mse_with(&rm, AverageMseMode::LowerTriangle), 3.0);
        let c = ResultsMatrix::from_lower(vec![vec![4.0], vec![4.0, 4.0], vec![4.0, 4.0, 4.0]]).unwrap();
        assert_eq!(average_mse(&c), 4.0);
    }

    #[test]
    fn cross_std() {
        let s = cross_taskification_std(&[13.04, 10.88, 30.88]).unwrap();
        assert!((s - 10.98).abs() <= 0.01, "{s}");
        let s = cross_taskification_std(&[0.36, 0.10, -5.65]).unwrap();
        assert!((s - 3.40).abs() <= 0.01, "{s}");
        assert_eq!(cross_taskification_std(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(cross_taskification_std(&[1.0]), Err(MetricsError::TooFew(1))));
    }

    #[test]
    fn validation() {
        assert!(matches!(
            ResultsMatrix::new(vec![vec![Some(1.0), None], vec![None, Some(1.0)]]),
            Err(MetricsError::MissingEntry { after: 2, task: 1 })
        ));
        assert!(matches!(
            ResultsMatrix::from_lower(vec![vec![1.0], vec![-1.0, 1.0]]),
            Err(MetricsError::InvalidEntry { .. })
        ));
        assert!(matches!(ResultsMatrix::from_lower(vec![vec![1.0]]), Err(MetricsError::TooFewTasks(1))));
    }

    #[test]
    fn csv_format() {
        let text = "after_task,task_1,task_2,task_3\n1,1.0,,\n2,1.5,0.8,\n3,2.0,0.9,0.4\n";
        let rm = ResultsMatrix::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(rm.t_tasks(), 3);
        assert_eq!(rm.get(1, 0), Some(1.5));
        assert_eq!(rm.get(0, 2), None);
        let again = ResultsMatrix::from_csv_reader(rm.to_csv().as_bytes()).unwrap();
        assert_eq!(again, rm);

        let missing = "after_task,task_1,task_2\n1,1.0,\n2,,0.5\n";
        assert!(matches!(
            ResultsMatrix::from_csv_reader(missing.as_bytes()),
            Err(MetricsError::MissingEntry { after: 2, task: 1 })
        ));
        let bad_header = "after,task_1,task_2\n1,1,\n2,1,1\n";
        assert!(ResultsMatrix::from_csv_reader(bad_header.as_bytes()).is_err());
        let dup = "after_task,task_1,task_2\n1,1,\n1,1,1\n";
        assert!(ResultsMatrix::from_csv_reader(dup.as_bytes()).is_err());
    }
}
