//! Per-iteration records of a bottleneck run and their CSV form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Increase of the objective above which a step counts as non-monotone.
pub const MONOTONICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Converged,
    MaxIters,
    MonotonicityViolated,
}

impl TraceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Converged => "converged",
            TraceStatus::MaxIters => "max_iters",
            TraceStatus::MonotonicityViolated => "monotonicity_violated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Qib,
    Qdib,
}

/// One row per iterate. Row 1 holds the initial channel; the step columns of
/// row `n` describe the move from iterate `n - 1` to iterate `n` and are NaN
/// on row 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// `f_α` for QIB runs, `f_DIB` for QDIB runs.
    pub f: f64,
    pub h_t: f64,
    pub i_tx: f64,
    pub i_ty: f64,
    /// `Σ_x P_X D(σ^{(n-1)}_{T|x} ‖ σ^{(n)}_{T|x})`.
    pub step_divergence: f64,
    /// `γ(σ^{(n)}, σ^{(n-1)})`; NaN when undefined.
    pub gamma_ratio: f64,
    /// `Σ_x P_X ‖σ^{(n)}_{T|x} - σ^{(n-1)}_{T|x}‖_1`.
    pub fixed_point_residual: f64,
    /// Rank of `σ_T` above `1e-9` (QDIB only).
    pub support_t: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub kind: TraceKind,
    pub rows: Vec<TraceRow>,
    pub status: TraceStatus,
    /// Whether the last step met the `|Δf| ≤ tol` criterion, independently of
    /// any monotonicity violation recorded earlier.
    pub reached_tol: bool,
    /// Iteration indices whose objective rose by more than `1e-9`.
    pub violations: Vec<usize>,
}

impl IterationTrace {
    pub(crate) fn new(kind: TraceKind) -> Self {
        Self {
            kind,
            rows: Vec::new(),
            status: TraceStatus::MaxIters,
            reached_tol: false,
            violations: Vec::new(),
        }
    }

    /// Appends a row, recording a violation when `f` rose by more than `1e-9`.
    pub(crate) fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            if row.f - last.f > MONOTONICITY_TOL {
                self.violations.push(row.iter);
            }
        }
        self.rows.push(row);
    }

    pub(crate) fn finish(&mut self, reached_tol: bool) {
        self.reached_tol = reached_tol;
        self.status = if !self.violations.is_empty() {
            TraceStatus::MonotonicityViolated
        } else if reached_tol {
            TraceStatus::Converged
        } else {
            TraceStatus::MaxIters
        };
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn final_f(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.f)
    }

    /// Objective changes `f^{(n)} - f^{(n-1)}`, one per step.
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].f - w[0].f).collect()
    }

    pub fn header(&self) -> &'static [&'static str] {
        match self.kind {
            TraceKind::Qib => &[
                "iter",
                "f_alpha",
                "H_T",
                "I_TX",
                "I_TY",
                "step_divergence",
                "gamma_ratio",
                "fixed_point_residual",
            ],
            TraceKind::Qdib => &[
                "iter",
                "f_dib",
                "H_T",
                "I_TX",
                "I_TY",
                "fixed_point_residual",
                "support_T",
            ],
        }
    }

    /// CSV body without the status comment, optionally prefixed by extra
    /// leading columns (used by sweeps).
    pub fn write_rows(&self, out: &mut String, prefix: &[(&str, f64)], with_header: bool) {
        if with_header {
            let mut cols: Vec<&str> = prefix.iter().map(|(k, _)| *k).collect();
            cols.extend_from_slice(self.header());
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        for r in &self.rows {
            for (_, v) in prefix {
                let _ = write!(out, "{},", fmt_num(*v));
            }
            let _ = write!(
                out,
                "{},{},{},{},{}",
                r.iter,
                fmt_num(r.f),
                fmt_num(r.h_t),
                fmt_num(r.i_tx),
                fmt_num(r.i_ty)
            );
            match self.kind {
                TraceKind::Qib => {
                    let _ = write!(
                        out,
                        ",{},{},{}",
                        fmt_num(r.step_divergence),
                        fmt_num(r.gamma_ratio),
                        fmt_num(r.fixed_point_residual)
                    );
                }
                TraceKind::Qdib => {
                    let _ = write!(
                        out,
                        ",{},{}",
                        fmt_num(r.fixed_point_residual),
                        r.support_t.unwrap_or(0)
                    );
                }
            }
            out.push('\n');
        }
    }

    pub fn status_line(&self) -> String {
        let v: Vec<String> = self.violations.iter().map(|i| i.to_string()).collect();
        format!(
            "# status={} iterations={} reached_tol={} violations=[{}]\n",
            self.status.as_str(),
            self.rows.len(),
            self.reached_tol,
            v.join(" ")
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.write_rows(&mut out, &[], true);
        out.push_str(&self.status_line());
        out
    }
}

/// Fixed 17-significant-digit scientific notation, so CSV output round-trips
/// every `f64` and is byte-stable.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, f: f64) -> TraceRow {
        TraceRow {
            iter,
            f,
            h_t: 0.0,
            i_tx: 0.0,
            i_ty: 0.0,
            step_divergence: f64::NAN,
            gamma_ratio: f64::NAN,
            fixed_point_residual: f64::NAN,
            support_t: None,
        }
    }

    #[test]
    fn violations_drive_status() {
        let mut t = IterationTrace::new(TraceKind::Qib);
        t.push(row(1, 1.0));
        t.push(row(2, 0.5));
        t.push(row(3, 0.5 + 1e-10));
        t.finish(true);
        assert_eq!(t.status, TraceStatus::Converged);
        t.push(row(4, 0.6));
        t.finish(true);
        assert_eq!(t.status, TraceStatus::MonotonicityViolated);
        assert_eq!(t.violations, vec![4]);
        assert!(t.reached_tol);
    }

    #[test]
    fn csv_has_header_rows_and_status() {
        let mut t = IterationTrace::new(TraceKind::Qib);
        t.push(row(1, 1.0));
        t.push(row(2, 0.25));
        t.finish(false);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("iter,f_alpha,H_T"));
        assert!(lines[2].starts_with("2,2.5000000000000000e-1,"));
        assert!(lines[3].starts_with("# status=max_iters"));
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -6.238324625039508, 1e-300, 12345.678901234567] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }
}
