//! Partitions of `[0, T]` and partition sequences: locators, mesh,
//! oscillation-controlled generation, jump exhaustion, Condition (C)
//! diagnostics, and left approximation.
//!
//! Intervals follow the half-open-right convention `]t_i, t_{i+1}]`
//! throughout; a point exactly at a breakpoint `b` belongs to `]u, b]`.
//! All limit statements are replaced by finite diagnostics governed by the
//! stall rule in [`crate::trace`]; diagnostics report evidence, they do not
//! prove anything.

use crate::error::{Error, Result};
use crate::path::{CadlagPath, Interpolation, OscMode, PathLike};
use crate::trace::{stall_verdict, ConvergenceTrace, Verdict, STALL_TAIL, TOL_LIMIT};
use serde::{Deserialize, Serialize};

/// Tolerance for identifying a time with a breakpoint.
const POINT_EQ_TOL: f64 = 1e-12;

/// A finite partition of `[0, T]`: strictly increasing breakpoints
/// `0 = t_0 < ... < t_k = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid(
                "a partition needs at least two breakpoints".into(),
            ));
        }
        if points[0] != 0.0 {
            return Err(Error::Invalid("partition must start at 0".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("partition breakpoints"));
        }
        Ok(Partition { points })
    }

    /// Uniform partition with `k` intervals.
    pub fn uniform(k: usize, horizon: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("uniform partition needs k >= 1".into()));
        }
        let mut points: Vec<f64> = (0..k).map(|i| horizon * i as f64 / k as f64).collect();
        points.push(horizon);
        Self::new(points)
    }

    /// Dyadic partition of level `n` (`2^n` intervals).
    pub fn dyadic(n: usize, horizon: f64) -> Result<Self> {
        Self::uniform(1usize << n.min(30), horizon)
    }

    /// Unit intervals `]k, k+1]` truncated at the horizon.
    pub fn integer(horizon: f64) -> Result<Self> {
        let mut points: Vec<f64> = (0..)
            .map(|k| k as f64)
            .take_while(|&p| p < horizon)
            .collect();
        points.push(horizon);
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterate over the intervals `]r, s]`.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// The unique interval `]u, v]` containing `t`, as `(u, v)`.
    pub fn locate(&self, t: f64) -> Result<(f64, f64)> {
        if !(t > 0.0 && t <= self.horizon()) {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        let i = self.points.partition_point(|&p| p < t);
        Ok((self.points[i - 1], self.points[i]))
    }

    /// Largest interval length.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Whether `s` is (numerically) a breakpoint.
    pub fn has_point(&self, s: f64) -> bool {
        let i = self.points.partition_point(|&p| p < s - POINT_EQ_TOL);
        i < self.points.len() && (self.points[i] - s).abs() <= POINT_EQ_TOL
    }
}

/// Closed-window oscillation `w(X; [a, t])`.
fn closed_oscillation(x: &CadlagPath, a: f64, t: f64) -> Result<f64> {
    if t <= a {
        return Ok(0.0);
    }
    x.oscillation(a, x.horizon() * 2.0 + 1.0, t, OscMode::OpenInterior)
}

/// Half-open-window oscillation `w(X; [a, t[)`.
fn open_right_oscillation(x: &CadlagPath, a: f64, t: f64) -> Result<f64> {
    if t <= a {
        return Ok(0.0);
    }
    x.oscillation(a, t, x.horizon(), OscMode::OpenInterior)
}

/// Partition whose every interval `]r, s]` satisfies `w(X; [r, s[) < eps`.
///
/// Breakpoints are the recursive exit times of the closed-window oscillation
/// against the threshold `eps * (1 - 1e-9)`; backing off from `eps` keeps the
/// re-measured open-window oscillation strictly below `eps`.
pub fn generate_oscillation_controlled(x: &CadlagPath, eps: f64) -> Result<Partition> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Invalid("eps must be positive".into()));
    }
    let theta = eps * (1.0 - 1e-9);
    let horizon = x.horizon();
    let mut points = vec![0.0];
    let mut a = 0.0;
    // structure times where the exit can move past a kink
    let mut structure: Vec<f64> = x.skeleton_times().to_vec();
    structure.extend(x.jump_times());
    structure.push(horizon);
    structure.sort_by(|p, q| p.partial_cmp(q).unwrap());
    structure.dedup();

    while a < horizon {
        let mut exit: Option<f64> = None;
        let mut prev = a;
        for &c in structure.iter().filter(|&&c| c > a) {
            // oscillation up to but excluding c (catches crossings strictly
            // inside the segment), then including c (catches a jump at c)
            if open_right_oscillation(x, a, c)? >= theta {
                // crossing strictly inside ]prev, c[
                let (mut lo, mut hi) = (prev, c);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if closed_oscillation(x, a, mid)? >= theta {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                exit = Some(hi);
                break;
            }
            if closed_oscillation(x, a, c)? >= theta {
                exit = Some(c);
                break;
            }
            prev = c;
        }
        let next = exit.unwrap_or(horizon).min(horizon);
        let next = if next <= a { horizon } else { next };
        points.push(next);
        a = next;
    }
    Partition::new(points)
}

/// How a generator produces the partition for index `n`.
#[derive(Debug, Clone)]
pub enum SequenceKind {
    /// `base * growth^n` uniform intervals.
    Uniform { base: usize, growth: usize },
    /// `2^n` uniform intervals.
    Dyadic,
    /// Unit intervals, independent of `n`.
    Integer,
    /// Oscillation exit times of `path` at `eps0 * decay^n`.
    OscillationControlled {
        path: CadlagPath,
        eps0: f64,
        decay: f64,
    },
    /// Explicit list; indices past the end clamp to the last entry.
    Custom(Vec<Partition>),
}

/// Deterministic generator for a sequence of partitions of `[0, T]`.
#[derive(Debug, Clone)]
pub struct PartitionSequence {
    horizon: f64,
    kind: SequenceKind,
}

impl PartitionSequence {
    pub fn new(horizon: f64, kind: SequenceKind) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::Invalid("horizon must be positive".into()));
        }
        if let SequenceKind::Custom(list) = &kind {
            if list.is_empty() {
                return Err(Error::Invalid("custom sequence must not be empty".into()));
            }
            for p in list {
                if p.horizon() != horizon {
                    return Err(Error::Invalid("custom partition horizon mismatch".into()));
                }
            }
        }
        Ok(PartitionSequence { horizon, kind })
    }

    pub fn dyadic(horizon: f64) -> Self {
        Self::new(horizon, SequenceKind::Dyadic).expect("positive horizon")
    }

    pub fn integer(horizon: f64) -> Self {
        Self::new(horizon, SequenceKind::Integer).expect("positive horizon")
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn partition(&self, n: usize) -> Result<Partition> {
        match &self.kind {
            SequenceKind::Uniform { base, growth } => {
                let k = base.saturating_mul(growth.saturating_pow(n as u32)).max(1);
                Partition::uniform(k.min(1 << 22), self.horizon)
            }
            SequenceKind::Dyadic => Partition::dyadic(n, self.horizon),
            SequenceKind::Integer => Partition::integer(self.horizon),
            SequenceKind::OscillationControlled { path, eps0, decay } => {
                generate_oscillation_controlled(path, eps0 * decay.powi(n as i32))
            }
            SequenceKind::Custom(list) => Ok(list[n.min(list.len() - 1)].clone()),
        }
    }

    /// Trace of the mesh over `n <= n_max` with a vanishing-mesh verdict.
    pub fn mesh_trace(&self, n_max: usize) -> Result<ConvergenceTrace> {
        let mut rows = Vec::new();
        for n in 0..=n_max {
            let mesh = self.partition(n)?.mesh();
            rows.push((n, mesh, mesh));
        }
        Ok(ConvergenceTrace::from_residuals(rows))
    }
}

/// Trace of `O-_t(X; pi_n)` with a convergence-to-zero verdict (Def 4b(i)).
pub fn controls_oscillation(
    seq: &PartitionSequence,
    x: &CadlagPath,
    t: f64,
    n_max: usize,
) -> Result<ConvergenceTrace> {
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let pi = seq.partition(n)?;
        let (_, o_minus) = x.partition_oscillation(&pi, t)?;
        rows.push((n, pi.mesh(), o_minus));
    }
    Ok(ConvergenceTrace::from_residuals(rows))
}

/// Per-jump exhaustion verdicts (Def 4b(ii)): jump time `s` is exhausted when
/// `s` is a breakpoint of every `pi_k` from some `k <= n_max` on.
pub fn exhausts_jumps(
    seq: &PartitionSequence,
    x: &CadlagPath,
    n_max: usize,
) -> Result<Vec<(f64, bool)>> {
    let partitions: Vec<Partition> = (0..=n_max)
        .map(|n| seq.partition(n))
        .collect::<Result<_>>()?;
    Ok(x.jump_times()
        .into_iter()
        .map(|s| {
            let ok = (0..=n_max).any(|n0| partitions[n0..].iter().all(|p| p.has_point(s)));
            (s, ok)
        })
        .collect())
}

/// Companion check to oscillation control, on finitely many candidate
/// intervals: every
/// non-constant open interval with structure-point endpoints eventually
/// contains a breakpoint of `pi_n`.
pub fn splits_nonconstant_intervals(
    seq: &PartitionSequence,
    x: &CadlagPath,
    n_max: usize,
) -> Result<bool> {
    let mut s_pts: Vec<f64> = x.skeleton_times().to_vec();
    s_pts.extend(x.jump_times());
    s_pts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    s_pts.dedup();
    let partitions: Vec<Partition> = (0..=n_max)
        .map(|n| seq.partition(n))
        .collect::<Result<_>>()?;
    for i in 0..s_pts.len() {
        for j in (i + 1)..s_pts.len() {
            let (a, b) = (s_pts[i], s_pts[j]);
            if open_right_oscillation(x, a, b)? == 0.0 {
                continue;
            }
            let eventually_split = (0..=n_max).any(|n0| {
                partitions[n0..].iter().all(|p| {
                    p.points()
                        .iter()
                        .any(|&q| q > a + POINT_EQ_TOL && q < b - POINT_EQ_TOL)
                })
            });
            if !eventually_split {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Result of the (C2) jump-reconstruction diagnostic for one jump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpReconstruction {
    pub time: f64,
    pub residuals: Vec<f64>,
    pub verdict: Verdict,
}

/// The (C3) matrix `O+_t(X - J_eps(X); pi_n)` over `(eps, n)` and its
/// iterated-limsup surrogate: per eps, the max over the last tail indices;
/// the check requires the surrogate nonincreasing as eps decreases and below
/// tolerance at the smallest eps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C3Report {
    pub eps_grid: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub surrogate: Vec<f64>,
    pub passed: bool,
}

/// Finite diagnostic for Condition (C): eventual jump separation (C1),
/// jump reconstruction by partition intervals (C2), and vanishing
/// small-jump oscillation (C3). Evidence, not proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCReport {
    pub c1: bool,
    /// Per eps: the first level from which every interval meets
    /// `D_eps /\ [0,t]` at most once (None = still failing at n_max).
    pub c1_onsets: Vec<(f64, Option<usize>)>,
    pub c2: Vec<JumpReconstruction>,
    pub c3: C3Report,
    pub passed: bool,
}

/// Run the (C1)-(C3) diagnostics for `(seq, x)` on `[0, t]`.
pub fn condition_c_diagnostic(
    seq: &PartitionSequence,
    x: &CadlagPath,
    t: f64,
    eps_grid: &[f64],
    n_max: usize,
) -> Result<ConditionCReport> {
    if eps_grid.is_empty() || eps_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Invalid(
            "eps grid must be nonempty and decreasing".into(),
        ));
    }
    if eps_grid.iter().any(|&e| e <= 0.0) {
        return Err(Error::Invalid("eps grid must be positive".into()));
    }
    let partitions: Vec<Partition> = (0..=n_max)
        .map(|n| seq.partition(n))
        .collect::<Result<_>>()?;

    // C1: eventual jump separation
    let mut c1_onsets = Vec::new();
    for &eps in eps_grid {
        let d_eps: Vec<f64> = x.jump_set(eps, t)?.into_iter().map(|(s, _)| s).collect();
        let level_ok = |pi: &Partition| {
            pi.intervals().all(|(r, s)| {
                let lo = d_eps.partition_point(|&u| u <= r);
                let hi = d_eps.partition_point(|&u| u <= s);
                hi - lo <= 1
            })
        };
        let onset = (0..=n_max).find(|&n0| partitions[n0..].iter().all(&level_ok));
        c1_onsets.push((eps, onset));
    }
    let c1 = c1_onsets.iter().all(|(_, o)| o.is_some());

    // C2: jump reconstruction by partition intervals
    let mut c2 = Vec::new();
    for j in x.jumps() {
        let s = j.time;
        if s > t {
            break;
        }
        let delta = x.space().vector(j.delta.clone())?;
        let mut residuals = Vec::new();
        for pi in &partitions {
            let (u, v) = pi.locate(s)?;
            let d = x.value(v.min(t))?.sub(&x.value(u.min(t))?)?;
            residuals.push(d.sub(&delta)?.norm());
        }
        let verdict = stall_verdict(&residuals);
        c2.push(JumpReconstruction {
            time: s,
            residuals,
            verdict,
        });
    }

    // C3: vanishing small-jump oscillation
    let mut matrix = Vec::new();
    let mut surrogate = Vec::new();
    for &eps in eps_grid {
        let small = x.without_large_jumps(eps)?;
        let row: Vec<f64> = partitions
            .iter()
            .map(|pi| small.partition_oscillation(pi, t).map(|(op, _)| op))
            .collect::<Result<_>>()?;
        let tail = &row[row.len().saturating_sub(STALL_TAIL)..];
        surrogate.push(tail.iter().fold(0.0f64, |m, &v| m.max(v)));
        matrix.push(row);
    }
    let monotone = surrogate.windows(2).all(|w| w[1] <= w[0] + POINT_EQ_TOL);
    let last_row_vanishes =
        *surrogate.last().unwrap() < TOL_LIMIT || stall_verdict(matrix.last().unwrap()).passed();
    let c3_passed = monotone && last_row_vanishes;
    let c3 = C3Report {
        eps_grid: eps_grid.to_vec(),
        matrix,
        surrogate,
        passed: c3_passed,
    };

    let passed = c1 && c2.iter().all(|r| r.verdict.passed()) && c3.passed;
    Ok(ConditionCReport {
        c1,
        c1_onsets,
        c2,
        c3,
        passed,
    })
}

/// Left discretization `^pi xi = sum xi(r) 1_{]r,s]}`, returned as the
/// right-continuous modification `sum xi(r) 1_{[r,s[}` so it fits the cadlag
/// representation (the two differ only at the breakpoints themselves).
pub fn left_discretization(pi: &Partition, xi: &dyn PathLike) -> Result<CadlagPath> {
    let mut skeleton = Vec::with_capacity(pi.points().len());
    for (r, _) in pi.intervals() {
        skeleton.push((r, xi.value(r)?.into_coords()));
    }
    let last_left = pi.points()[pi.points().len() - 2];
    skeleton.push((pi.horizon(), xi.value(last_left)?.into_coords()));
    CadlagPath::new(
        xi.space(),
        pi.horizon(),
        skeleton,
        Interpolation::ConstantRight,
        vec![],
    )
}

/// Per-time residual traces for the left-approximation property
/// `xi(pi_n(t)-under) -> xi(t-)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeftApproxReport {
    pub per_time: Vec<(f64, Vec<f64>, Verdict)>,
    pub passed: bool,
}

pub fn approximates_from_left(
    seq: &PartitionSequence,
    xi: &dyn PathLike,
    sample_times: &[f64],
    n_max: usize,
) -> Result<LeftApproxReport> {
    let partitions: Vec<Partition> = (0..=n_max)
        .map(|n| seq.partition(n))
        .collect::<Result<_>>()?;
    let mut per_time = Vec::new();
    for &t in sample_times {
        if !(t > 0.0 && t <= seq.horizon()) {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: seq.horizon(),
            });
        }
        let target = xi.left_limit(t)?;
        let mut residuals = Vec::new();
        for pi in &partitions {
            let (u, _) = pi.locate(t)?;
            residuals.push(xi.value(u)?.sub(&target)?.norm());
        }
        let verdict = stall_verdict(&residuals);
        per_time.push((t, residuals, verdict));
    }
    let passed = per_time.iter().all(|(_, _, v)| v.passed());
    Ok(LeftApproxReport { per_time, passed })
}
