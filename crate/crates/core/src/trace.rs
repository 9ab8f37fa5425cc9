//! Partition-indexed convergence traces and the stall rule.
//!
//! Every "lim_{n -> infinity}" statement in this crate is replaced by a
//! finite diagnostic over n = 0..n_max. The stall rule is the single,
//! explicit surrogate: a residual trace counts as converging to zero when the
//! max of its last [`STALL_TAIL`] entries is below [`TOL_LIMIT`] (exact
//! fixtures), or when it decreases monotonically by at least
//! [`STALL_FACTOR`] per index over that tail (approximate scenarios).

use serde::{Deserialize, Serialize};

/// Absolute tail tolerance for exact fixtures.
pub const TOL_LIMIT: f64 = 1e-9;
/// Required average per-index decrease factor for approximate scenarios.
pub const STALL_FACTOR: f64 = 1.5;
/// Number of trailing indices inspected by the tolerance branch.
pub const STALL_TAIL: usize = 3;
/// Number of trailing indices inspected by the decay branch. Dyadic locator
/// residuals stagnate for up to three consecutive levels when the binary
/// expansion of a time has a run of zeros (e.g. t = 0.8), so the decay
/// window must be longer than any such run.
pub const STALL_WINDOW: usize = 5;

/// Verdict of a finite convergence diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    Stalled,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Converged)
    }
}

/// Apply the stall rule to a nonnegative residual trace.
///
/// The decrease criterion is nonincreasing over the tail with an average
/// factor of at least [`STALL_FACTOR`] per index; averaging tolerates the
/// pairwise stagnation that binary expansions of non-dyadic times produce
/// under dyadic refinement.
pub fn stall_verdict(residuals: &[f64]) -> Verdict {
    if residuals.is_empty() {
        return Verdict::Stalled;
    }
    let tail = &residuals[residuals.len().saturating_sub(STALL_TAIL)..];
    let max = tail.iter().fold(0.0f64, |m, &v| m.max(v));
    if max < TOL_LIMIT {
        return Verdict::Converged;
    }
    let window = &residuals[residuals.len().saturating_sub(STALL_WINDOW)..];
    if window.len() >= 2 {
        let monotone = window.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let first = window[0];
        let last = window[window.len() - 1];
        let factor_met = last * STALL_FACTOR.powi(window.len() as i32 - 1) <= first;
        if monotone && factor_met {
            return Verdict::Converged;
        }
    }
    Verdict::Stalled
}

/// One row of a trace: level index, mesh of the partition at that level, the
/// vector value, and the norm of the change from the previous level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub n: usize,
    pub mesh: f64,
    pub value: Vec<f64>,
    pub delta_norm: f64,
}

/// Per-n values of a partition-indexed quantity, its successive deltas, and a
/// limit estimate.
///
/// The limit estimate is the value at n_max (no extrapolation), with
/// uncertainty equal to the max of the last [`STALL_TAIL`] deltas; it is
/// populated only when the delta trace passes the stall rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
    pub verdict: Verdict,
    pub limit: Option<Vec<f64>>,
    pub uncertainty: f64,
}

impl ConvergenceTrace {
    /// Build a trace from per-level values; `norm` measures the deltas.
    pub fn from_values(
        levels: impl IntoIterator<Item = (usize, f64, Vec<f64>)>,
        norm: impl Fn(&[f64]) -> f64,
    ) -> Self {
        let mut entries: Vec<TraceEntry> = Vec::new();
        for (n, mesh, value) in levels {
            let delta_norm = match entries.last() {
                None => f64::NAN,
                Some(prev) => {
                    let d: Vec<f64> = value.iter().zip(&prev.value).map(|(a, b)| a - b).collect();
                    norm(&d)
                }
            };
            entries.push(TraceEntry {
                n,
                mesh,
                value,
                delta_norm,
            });
        }
        let deltas: Vec<f64> = entries.iter().skip(1).map(|e| e.delta_norm).collect();
        let verdict = stall_verdict(&deltas);
        let tail = &deltas[deltas.len().saturating_sub(STALL_TAIL)..];
        let uncertainty = tail.iter().fold(0.0f64, |m, &v| m.max(v));
        let limit = if verdict.passed() {
            entries.last().map(|e| e.value.clone())
        } else {
            None
        };
        ConvergenceTrace {
            entries,
            verdict,
            limit,
            uncertainty,
        }
    }

    /// Build a trace of scalar residuals; the verdict is convergence to zero
    /// of the residuals themselves.
    pub fn from_residuals(levels: impl IntoIterator<Item = (usize, f64, f64)>) -> Self {
        let mut entries: Vec<TraceEntry> = Vec::new();
        for (n, mesh, r) in levels {
            let delta_norm = match entries.last() {
                None => f64::NAN,
                Some(prev) => (r - prev.value[0]).abs(),
            };
            entries.push(TraceEntry {
                n,
                mesh,
                value: vec![r],
                delta_norm,
            });
        }
        let residuals: Vec<f64> = entries.iter().map(|e| e.value[0]).collect();
        let verdict = stall_verdict(&residuals);
        let tail = &residuals[residuals.len().saturating_sub(STALL_TAIL)..];
        let uncertainty = tail.iter().fold(0.0f64, |m, &v| m.max(v));
        let limit = if verdict.passed() {
            Some(vec![0.0])
        } else {
            None
        };
        ConvergenceTrace {
            entries,
            verdict,
            limit,
            uncertainty,
        }
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.value.first().copied().unwrap_or(0.0))
            .collect()
    }

    pub fn last_value(&self) -> Option<&[f64]> {
        self.entries.last().map(|e| e.value.as_slice())
    }
}
