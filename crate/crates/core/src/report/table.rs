//! Aligned text tables; numbers use 6 significant digits.

use crate::cl_metrics::MetricsSummary;
use crate::profiles::BpsReport;
use crate::stats::{fmt_sig, MeanStd};

const DIGITS: usize = 6;

pub fn mean_pm_std(ms: &MeanStd) -> String {
    format!("{} ± {}", fmt_sig(ms.mean, DIGITS), fmt_sig(ms.std, DIGITS))
}

/// Renders rows of cells under `headers`, left-aligned, two-space gaps.
pub fn render(headers: &[String], rows: &[Vec<String>]) -> String {
    let ncol = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate().take(ncol) {
            s.push_str(cell);
            if i + 1 < ncol {
                let pad = widths[i] - cell.chars().count() + 2;
                s.extend(std::iter::repeat_n(' ', pad));
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(headers);
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Plasticity / Stability / BPS rows with one column per labelled column.
pub fn bps_table(columns: &[(String, [MeanStd; 3])]) -> String {
    let mut headers = vec![String::new()];
    headers.extend(columns.iter().map(|(l, _)| l.clone()));
    let rows = ["Plasticity", "Stability", "BPS"]
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let mut row = vec![name.to_string()];
            row.extend(columns.iter().map(|(_, v)| mean_pm_std(&v[r])));
            row
        })
        .collect::<Vec<_>>();
    render(&headers, &rows)
}

pub fn bps_columns(reports: &[&BpsReport]) -> Vec<(String, [MeanStd; 3])> {
    reports
        .iter()
        .map(|r| {
            (
                r.label.clone(),
                [
                    MeanStd {
                        mean: r.plasticity_mean,
                        std: r.plasticity_std,
                    },
                    MeanStd {
                        mean: r.stability_mean,
                        std: r.stability_std,
                    },
                    MeanStd {
                        mean: r.bps_mean,
                        std: r.bps_std,
                    },
                ],
            )
        })
        .collect()
}

/// Symmetric label x label table; `cell(i, j)` is only called for `i != j`.
pub fn pair_table(labels: &[String], cell: impl Fn(usize, usize) -> String) -> String {
    let mut headers = vec![String::new()];
    headers.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = (0..labels.len())
        .map(|i| {
            let mut row = vec![labels[i].clone()];
            row.extend((0..labels.len()).map(|j| if i == j { "--".to_string() } else { cell(i, j) }));
            row
        })
        .collect();
    render(&headers, &rows)
}

pub fn metrics_table(summaries: &[MetricsSummary]) -> String {
    let headers: Vec<String> = ["matrix", "tasks", "avg_mse", "bwt", "forgetting"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                s.t_tasks.to_string(),
                fmt_sig(s.average_mse, DIGITS),
                fmt_sig(s.bwt, DIGITS),
                fmt_sig(s.forgetting, DIGITS),
            ]
        })
        .collect();
    render(&headers, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let t = render(
            &["a".into(), "bbb".into()],
            &[vec!["long".into(), "1".into()], vec!["x".into(), "22".into()]],
        );
        assert_eq!(t, "a     bbb\nlong  1\nx     22\n");
    }

    #[test]
    fn bps_rows() {
        let ms = MeanStd { mean: 0.15, std: 0.16 };
        let t = bps_table(&[("9d".into(), [ms, ms, ms])]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("Plasticity"));
        assert!(lines[3].starts_with("BPS"));
        assert!(lines[1].ends_with("0.150000 ± 0.160000"));
    }

    #[test]
    fn pair_diagonal() {
        let t = pair_table(&["a".into(), "b".into()], |i, j| format!("{i}{j}"));
        assert_eq!(t, "   a   b\na  --  01\nb  10  --\n");
    }
}
