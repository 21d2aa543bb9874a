//! Discrepancies between task-level empirical distributions.
//!
//! The only discrepancy is the 1-D Wasserstein-1 distance, computed exactly
//! from the piecewise-constant quantile functions. Multichannel selections
//! use the axis-sliced mean of per-channel distances.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::{ChannelSelector, Stream, StreamError};
use crate::taskify::{task_intervals, Taskification};

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("non-finite sample")]
    NonFinite,
    #[error("interval [{start}, {end}) is empty or outside the stream")]
    EmptyInterval { start: usize, end: usize },
    #[error("channel count mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("cannot upsample a {from}x{from} matrix to {to}x{to}")]
    Downsample { from: usize, to: usize },
    #[error("matrix dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sorted sample multiset of a univariate empirical distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    samples: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, DistanceError> {
        if samples.is_empty() {
            return Err(DistanceError::EmptyDistribution);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(DistanceError::NonFinite);
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn from_slice(samples: &[f64]) -> Result<Self, DistanceError> {
        Self::new(samples.to_vec())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Exact W_1 between two empirical distributions.
///
/// Integrates `|F_p^{-1}(u) - F_q^{-1}(u)|` over the merged quantile grid.
/// Breakpoints `i/n` and `j/m` are tracked as integers in units of
/// `1/(n*m)`, so unequal sample counts introduce no grid rounding.
pub fn wasserstein1(p: &EmpiricalDist, q: &EmpiricalDist) -> f64 {
    let (a, b) = (p.samples(), q.samples());
    let (n, m) = (a.len(), b.len());
    if n == m {
        let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        return sum / n as f64;
    }
    // Quantile p_(i) covers (i*m, (i+1)*m]; q_(j) covers (j*n, (j+1)*n].
    let (n64, m64) = (n as u64, m as u64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos = 0u64;
    let mut acc = 0.0;
    while i < n && j < m {
        let end_a = (i as u64 + 1) * m64;
        let end_b = (j as u64 + 1) * n64;
        let end = end_a.min(end_b);
        acc += (a[i] - b[j]).abs() * (end - pos) as f64;
        pos = end;
        if end == end_a {
            i += 1;
        }
        if end == end_b {
            j += 1;
        }
    }
    acc / (n64 * m64) as f64
}

/// Mean of per-channel W_1 distances.
pub fn sliced_w1(p: &[EmpiricalDist], q: &[EmpiricalDist]) -> Result<f64, DistanceError> {
    if p.len() != q.len() {
        return Err(DistanceError::ChannelMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(DistanceError::EmptyDistribution);
    }
    let total: f64 = p.iter().zip(q).map(|(a, b)| wasserstein1(a, b)).sum();
    Ok(total / p.len() as f64)
}

/// Per-channel empirical distributions of the samples in `[start, end)`.
pub fn task_distribution(
    stream: &Stream,
    interval: (usize, usize),
    selector: &ChannelSelector,
) -> Result<Vec<EmpiricalDist>, DistanceError> {
    let (start, end) = interval;
    if start >= end || end > stream.t_steps() {
        return Err(DistanceError::EmptyInterval { start, end });
    }
    selector
        .resolve(stream)?
        .into_iter()
        .map(|c| EmpiricalDist::from_slice(&stream.channel(c)[start..end]))
        .collect()
}

/// Task distributions for every task of `tk`, in task order.
pub fn task_distributions(
    stream: &Stream,
    tk: &Taskification,
    selector: &ChannelSelector,
) -> Result<Vec<Vec<EmpiricalDist>>, DistanceError> {
    task_intervals(tk)
        .into_par_iter()
        .map(|iv| task_distribution(stream, iv, selector))
        .collect()
}

/// Symmetric matrix of pairwise task discrepancies, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    dims: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(dims: usize) -> Self {
        Self {
            dims,
            entries: vec![0.0; dims * dims],
        }
    }

    /// Validates symmetry, zero diagonal, and non-negativity.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, DistanceError> {
        let dims = rows.len();
        if dims == 0 {
            return Err(DistanceError::InvalidMatrix("empty matrix".into()));
        }
        if rows.iter().any(|r| r.len() != dims) {
            return Err(DistanceError::InvalidMatrix("matrix is not square".into()));
        }
        let m = Self {
            dims,
            entries: rows.into_iter().flatten().collect(),
        };
        for i in 0..dims {
            if m.get(i, i) != 0.0 {
                return Err(DistanceError::InvalidMatrix(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..dims {
                let v = m.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(DistanceError::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
                }
                if v != m.get(j, i) {
                    return Err(DistanceError::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dims + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dims).map(<[f64]>::to_vec).collect()
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the grid as headerless CSV, one row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in self.entries.chunks(self.dims) {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self, DistanceError> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|e| DistanceError::InvalidMatrix(format!("cell `{c}`: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }
}

/// Matrix of pairwise task distances under `tk`.
pub fn pairwise_matrix(
    stream: &Stream,
    tk: &Taskification,
    selector: &ChannelSelector,
) -> Result<DistanceMatrix, DistanceError> {
    let dists = task_distributions(stream, tk, selector)?;
    pairwise_from_distributions(&dists)
}

pub fn pairwise_from_distributions(dists: &[Vec<EmpiricalDist>]) -> Result<DistanceMatrix, DistanceError> {
    let k = dists.len();
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| sliced_w1(&dists[i], &dists[j]))
        .collect::<Result<Vec<_>, _>>()?;
    let mut m = DistanceMatrix::zeros(k);
    for (&(i, j), v) in cells.iter().zip(values) {
        m.entries[i * k + j] = v;
        m.entries[j * k + i] = v;
    }
    Ok(m)
}

/// Source coordinate of target cell `t` when `target` cells cover `source`
/// cells (cell centers aligned), clamped to the source index range.
fn source_coord(t: usize, source: usize, target: usize) -> f64 {
    let x = (t as f64 + 0.5) * source as f64 / target as f64 - 0.5;
    x.clamp(0.0, (source - 1) as f64)
}

/// Bilinear upsampling to `target_dim`, re-symmetrized with a zero diagonal.
pub fn upsample_matrix(m: &DistanceMatrix, target_dim: usize) -> Result<DistanceMatrix, DistanceError> {
    let k = m.dims;
    if target_dim < k {
        return Err(DistanceError::Downsample { from: k, to: target_dim });
    }
    if target_dim == k {
        return Ok(m.clone());
    }
    let coords: Vec<(usize, usize, f64)> = (0..target_dim)
        .map(|t| {
            let x = source_coord(t, k, target_dim);
            let lo = x.floor() as usize;
            let hi = (lo + 1).min(k - 1);
            (lo, hi, x - lo as f64)
        })
        .collect();
    let mut raw = vec![0.0; target_dim * target_dim];
    for (r, &(r0, r1, fr)) in coords.iter().enumerate() {
        for (c, &(c0, c1, fc)) in coords.iter().enumerate() {
            let top = m.get(r0, c0) * (1.0 - fc) + m.get(r0, c1) * fc;
            let bottom = m.get(r1, c0) * (1.0 - fc) + m.get(r1, c1) * fc;
            raw[r * target_dim + c] = top * (1.0 - fr) + bottom * fr;
        }
    }
    let mut out = DistanceMatrix::zeros(target_dim);
    for i in 0..target_dim {
        for j in (i + 1)..target_dim {
            let v = 0.5 * (raw[i * target_dim + j] + raw[j * target_dim + i]);
            out.entries[i * target_dim + j] = v;
            out.entries[j * target_dim + i] = v;
        }
    }
    Ok(out)
}

/// Mean squared difference over all `K^2` entries.
pub fn matrix_mse(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64, DistanceError> {
    if a.dims != b.dims {
        return Err(DistanceError::DimMismatch(a.dims, b.dims));
    }
    let sum: f64 = a.entries.iter().zip(&b.entries).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(sum / a.entries.len() as f64)
}

/// Elementwise `|a - b|`, the grid behind an absolute-difference heatmap.
pub fn abs_difference(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<DistanceMatrix, DistanceError> {
    if a.dims != b.dims {
        return Err(DistanceError::DimMismatch(a.dims, b.dims));
    }
    Ok(DistanceMatrix {
        dims: a.dims,
        entries: a.entries.iter().zip(&b.entries).map(|(x, y)| (x - y).abs()).collect(),
    })
}
