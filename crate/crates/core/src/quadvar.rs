//! Discrete quadratic covariations along partition sequences, their limit
//! diagnostics, jump-condition checks, 2-variation, and the finite-sum
//! algebraic laws (bilinearity, block decomposition, transpose symmetry,
//! convention equivalence).
//!
//! The discrete object is `Q_B^pi(X,Y)_t = sum_I B(delta X_t, delta Y_t)(I)`
//! with truncated increments `delta X_t(]r,s]) = X(s/\t) - X(r/\t)`; the
//! alternative Follmer-style summation carries the indicator `1_{[0,t[}(r)`
//! on untruncated increments. Limits are never asserted: traces are judged
//! by the stall rule and the limit estimate is the value at `n_max` with
//! uncertainty from the last deltas.

use crate::error::{Error, Result};
use crate::partition::{Partition, PartitionSequence};
use crate::path::{CadlagPath, FVPath};
use crate::space::{BilinearMap, NormedSpace, Vector};
use crate::trace::{stall_verdict, ConvergenceTrace, Verdict};

/// Summation convention for the discrete covariation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `sum_I B(delta X_t, delta Y_t)(I)` with truncated increments.
    Truncated,
    /// `sum_I 1_{[0,t[}(r) B(delta X, delta Y)(I)` (Follmer's form).
    IndicatorLeft,
}

/// Convergence is judged in the norm, or on scalar traces through a finite
/// family of test functionals (the operational stand-in for the weak
/// topology; with the full coordinate family the two coincide in finite
/// dimensions).
#[derive(Debug, Clone)]
pub enum QvMode {
    Strong,
    Weak(Vec<Vec<f64>>),
}

/// A quadratic-covariation computation request.
#[derive(Debug, Clone)]
pub struct QVRequest<'a> {
    pub x: &'a CadlagPath,
    pub y: &'a CadlagPath,
    pub b: &'a BilinearMap,
    pub seq: &'a PartitionSequence,
    pub t_grid: Vec<f64>,
    pub convention: Convention,
    pub n_max: usize,
    pub mode: QvMode,
}

impl<'a> QVRequest<'a> {
    pub fn new(
        x: &'a CadlagPath,
        y: &'a CadlagPath,
        b: &'a BilinearMap,
        seq: &'a PartitionSequence,
        n_max: usize,
    ) -> Result<Self> {
        if x.space() != b.domain_left() || y.space() != b.domain_right() {
            return Err(Error::SpaceMismatch(
                "QV request factors do not match B".into(),
            ));
        }
        if x.horizon() != y.horizon() || x.horizon() != seq.horizon() {
            return Err(Error::Invalid("QV request horizons do not agree".into()));
        }
        let t_grid = default_t_grid(&[x, y], x.horizon());
        Ok(QVRequest {
            x,
            y,
            b,
            seq,
            t_grid,
            convention: Convention::Truncated,
            n_max,
            mode: QvMode::Strong,
        })
    }

    pub fn with_t_grid(mut self, t_grid: Vec<f64>) -> Self {
        self.t_grid = t_grid;
        self
    }

    pub fn with_mode(mut self, mode: QvMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }
}

/// Default evaluation grid: 33 uniform points plus jump-adjacent points
/// (the jump condition is only visible next to the jumps).
pub fn default_t_grid(paths: &[&CadlagPath], horizon: f64) -> Vec<f64> {
    let h = horizon * 1e-6;
    let mut grid: Vec<f64> = (0..33).map(|i| horizon * i as f64 / 32.0).collect();
    for p in paths {
        for s in p.jump_times() {
            for cand in [s - h, s, s + h] {
                if cand > 0.0 && cand <= horizon {
                    grid.push(cand);
                }
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

/// `Q_B^pi(X,Y)_t` under the chosen convention.
pub fn discrete_qv(
    x: &CadlagPath,
    y: &CadlagPath,
    b: &BilinearMap,
    pi: &Partition,
    t: f64,
    convention: Convention,
) -> Result<Vector> {
    if x.space() != b.domain_left() || y.space() != b.domain_right() {
        return Err(Error::SpaceMismatch(
            "discrete_qv factors do not match B".into(),
        ));
    }
    let mut acc = b.codomain().zero();
    for (r, s) in pi.intervals() {
        if r >= t {
            break;
        }
        let (dx, dy) = match convention {
            Convention::Truncated => (
                x.value(s.min(t))?.sub(&x.value(r.min(t))?)?,
                y.value(s.min(t))?.sub(&y.value(r.min(t))?)?,
            ),
            Convention::IndicatorLeft => (
                x.value(s)?.sub(&x.value(r)?)?,
                y.value(s)?.sub(&y.value(r)?)?,
            ),
        };
        acc = acc.add(&b.apply(&dx, &dy)?)?;
    }
    Ok(acc)
}

/// `Q_B^pi(X,Y)` sampled at many (ascending) times in one interval sweep:
/// `O(|pi| + |times| log)` instead of `O(|pi| * |times|)`.
///
/// Uses the truncated convention. Equals per-time [`discrete_qv`] exactly up
/// to summation order.
pub fn qv_samples(
    x: &CadlagPath,
    y: &CadlagPath,
    b: &BilinearMap,
    pi: &Partition,
    times: &[f64],
) -> Result<Vec<Vector>> {
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Invalid("sample times must be ascending".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = b.codomain().zero();
    let mut intervals = pi.intervals().peekable();
    for &u in times {
        // fold in the intervals completed at or before u
        while let Some(&(r, s)) = intervals.peek() {
            if s <= u {
                let dx = x.value(s)?.sub(&x.value(r)?)?;
                let dy = y.value(s)?.sub(&y.value(r)?)?;
                acc = acc.add(&b.apply(&dx, &dy)?)?;
                intervals.next();
            } else {
                break;
            }
        }
        let mut val = acc.clone();
        if let Some(&(r, s)) = intervals.peek() {
            if r < u && u < s {
                let dx = x.value(u)?.sub(&x.value(r)?)?;
                let dy = y.value(u)?.sub(&y.value(r)?)?;
                val = val.add(&b.apply(&dx, &dy)?)?;
            }
        }
        out.push(val);
    }
    Ok(out)
}

/// Scalar summand version: `sum_I |delta X_t(I)|^2`.
pub fn discrete_scalar_qv(x: &CadlagPath, pi: &Partition, t: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (r, s) in pi.intervals() {
        if r >= t {
            break;
        }
        let d = x.value(s.min(t))?.sub(&x.value(r.min(t))?)?;
        let n = d.norm();
        acc += n * n;
    }
    Ok(acc)
}

/// Scalar sums sampled at many ascending times in one interval sweep.
pub fn scalar_qv_samples(x: &CadlagPath, pi: &Partition, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Invalid("sample times must be ascending".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut intervals = pi.intervals().peekable();
    for &u in times {
        while let Some(&(r, s)) = intervals.peek() {
            if s <= u {
                let n = x.value(s)?.sub(&x.value(r)?)?.norm();
                acc += n * n;
                intervals.next();
            } else {
                break;
            }
        }
        let mut val = acc;
        if let Some(&(r, s)) = intervals.peek() {
            if r < u && u < s {
                let n = x.value(u)?.sub(&x.value(r)?)?.norm();
                val += n * n;
            }
        }
        out.push(val);
    }
    Ok(out)
}

/// Per-time trace of the discrete covariation with the jump-condition check
/// at `n_max`.
#[derive(Debug, Clone)]
pub struct QVPointResult {
    pub t: f64,
    pub trace: ConvergenceTrace,
    pub verdict: Verdict,
    pub limit_estimate: Option<Vector>,
    /// Per jump `s <= t`: `(s, |Delta Q^pi_s - B(DX_s, DY_s)|)` at `n_max`.
    pub jump_checks: Vec<(f64, f64)>,
}

/// Covariation along a sequence: per-time traces plus the continuous/jump
/// split of the `n_max` discrete path. The jump part carries
/// `B(DX_s, DY_s)` atoms (the jump condition of the covariation); the
/// continuous part is
/// the remainder sampled on the evaluation grid.
#[derive(Debug, Clone)]
pub struct QVPathResult {
    pub per_t: Vec<QVPointResult>,
    pub continuous_part: FVPath,
    pub jump_part: FVPath,
    pub passed: bool,
}

impl QVPathResult {
    pub fn limit_at(&self, t: f64) -> Option<&Vector> {
        self.per_t
            .iter()
            .find(|p| p.t == t)
            .and_then(|p| p.limit_estimate.as_ref())
    }
}

/// Merged jump times of two paths.
fn merged_jump_times(x: &CadlagPath, y: &CadlagPath) -> Vec<f64> {
    let mut ts = x.jump_times();
    ts.extend(y.jump_times());
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts
}

/// Jump-condition residual of the level-`pi` discrete path at
/// jump time `s`: the discrete path jumps by
/// `B(X_s - X_u, Y_s - Y_u) - B(X_{s-} - X_u, Y_{s-} - Y_u)` with
/// `u = pi_under(s)`; compare against `B(DX_s, DY_s)`.
fn jump_check_at(
    x: &CadlagPath,
    y: &CadlagPath,
    b: &BilinearMap,
    pi: &Partition,
    s: f64,
) -> Result<f64> {
    let (u, _) = pi.locate(s)?;
    let xu = x.value(u)?;
    let yu = y.value(u)?;
    let post = b.apply(&x.value(s)?.sub(&xu)?, &y.value(s)?.sub(&yu)?)?;
    let pre = b.apply(&x.left_limit(s)?.sub(&xu)?, &y.left_limit(s)?.sub(&yu)?)?;
    let ideal = b.apply(&x.jump_at(s), &y.jump_at(s))?;
    post.sub(&pre)?.sub(&ideal).map(|d| d.norm())
}

fn weak_verdict(entries: &[(usize, Vec<f64>)], functionals: &[Vec<f64>]) -> Verdict {
    for z in functionals {
        let scalars: Vec<f64> = entries
            .iter()
            .map(|(_, v)| v.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let deltas: Vec<f64> = scalars.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        if !stall_verdict(&deltas).passed() {
            return Verdict::Stalled;
        }
    }
    Verdict::Converged
}

/// Run the covariation diagnostics for a request.
pub fn qv_limit(req: &QVRequest) -> Result<QVPathResult> {
    let g_space = req.b.codomain();
    let norm = move |d: &[f64]| g_space.norm_of(d).unwrap_or(f64::INFINITY);
    let pi_last = req.seq.partition(req.n_max)?;
    let jump_times = merged_jump_times(req.x, req.y);

    // one interval sweep per level across the sorted grid
    let mut sorted_grid = req.t_grid.clone();
    sorted_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted_grid.dedup();
    let mut per_level: Vec<Vec<Vector>> = Vec::with_capacity(req.n_max + 1);
    let mut meshes = Vec::with_capacity(req.n_max + 1);
    for n in 0..=req.n_max {
        let pi = req.seq.partition(n)?;
        meshes.push(pi.mesh());
        let values = match req.convention {
            Convention::Truncated => qv_samples(req.x, req.y, req.b, &pi, &sorted_grid)?,
            Convention::IndicatorLeft => sorted_grid
                .iter()
                .map(|&t| discrete_qv(req.x, req.y, req.b, &pi, t, req.convention))
                .collect::<Result<_>>()?,
        };
        per_level.push(values);
    }

    let mut per_t = Vec::new();
    for &t in &req.t_grid {
        let idx = sorted_grid.partition_point(|&u| u < t);
        let rows: Vec<(usize, f64, Vec<f64>)> = (0..=req.n_max)
            .map(|n| (n, meshes[n], per_level[n][idx].coords().to_vec()))
            .collect();
        let trace = ConvergenceTrace::from_values(rows.clone(), norm);
        let verdict = match &req.mode {
            QvMode::Strong => trace.verdict,
            QvMode::Weak(fs) => {
                let entries: Vec<(usize, Vec<f64>)> =
                    rows.into_iter().map(|(n, _, v)| (n, v)).collect();
                weak_verdict(&entries, fs)
            }
        };
        let limit_estimate = verdict
            .passed()
            .then(|| g_space.vector(trace.last_value().unwrap().to_vec()))
            .transpose()?;
        let mut jump_checks = Vec::new();
        for &s in jump_times.iter().filter(|&&s| s <= t) {
            jump_checks.push((s, jump_check_at(req.x, req.y, req.b, &pi_last, s)?));
        }
        per_t.push(QVPointResult {
            t,
            trace,
            verdict,
            limit_estimate,
            jump_checks,
        });
    }

    // jump part: atoms B(DX_s, DY_s)
    let atom_jumps: Vec<(f64, Vec<f64>)> = jump_times
        .iter()
        .map(|&s| {
            req.b
                .apply(&req.x.jump_at(s), &req.y.jump_at(s))
                .map(|v| (s, v.into_coords()))
        })
        .collect::<Result<_>>()?;
    let horizon = req.x.horizon();
    let jump_part = FVPath::new(CadlagPath::pure_jump(g_space, horizon, atom_jumps)?);

    // continuous part: n_max discrete path minus the jump part, sampled on
    // the grid extended by the jump times and the endpoints
    let mut grid = req.t_grid.clone();
    grid.extend(jump_times.iter().cloned());
    grid.push(0.0);
    grid.push(horizon);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let q_values = qv_samples(req.x, req.y, req.b, &pi_last, &grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    for (&t, q) in grid.iter().zip(q_values) {
        let jp = jump_part.path().value(t)?;
        samples.push((t, q.sub(&jp)?.into_coords()));
    }
    let continuous_part = FVPath::new(CadlagPath::piecewise_linear(
        g_space,
        horizon,
        samples,
        vec![],
    )?);

    let passed = per_t.iter().all(|p| p.verdict.passed());
    Ok(QVPathResult {
        per_t,
        continuous_part,
        jump_part,
        passed,
    })
}

/// Scalar quadratic variation along a sequence: summand `|delta X_t(I)|^2`,
/// jump atoms `|DX_s|^2`.
pub fn scalar_qv(
    x: &CadlagPath,
    seq: &PartitionSequence,
    t_grid: &[f64],
    n_max: usize,
) -> Result<QVPathResult> {
    let g_space = NormedSpace::scalar();
    let pi_last = seq.partition(n_max)?;
    let jump_times = x.jump_times();

    let mut sorted_grid: Vec<f64> = t_grid.to_vec();
    sorted_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted_grid.dedup();
    let mut per_level: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    let mut meshes = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let pi = seq.partition(n)?;
        meshes.push(pi.mesh());
        per_level.push(scalar_qv_samples(x, &pi, &sorted_grid)?);
    }

    let mut per_t = Vec::new();
    for &t in t_grid {
        let idx = sorted_grid.partition_point(|&u| u < t);
        let rows: Vec<(usize, f64, Vec<f64>)> = (0..=n_max)
            .map(|n| (n, meshes[n], vec![per_level[n][idx]]))
            .collect();
        let trace = ConvergenceTrace::from_values(rows, |d| d[0].abs());
        let verdict = trace.verdict;
        let limit_estimate = verdict
            .passed()
            .then(|| g_space.vector(trace.last_value().unwrap().to_vec()))
            .transpose()?;
        let mut jump_checks = Vec::new();
        for &s in jump_times.iter().filter(|&&s| s <= t) {
            let (u, _) = pi_last.locate(s)?;
            let xu = x.value(u)?;
            let post = x.value(s)?.sub(&xu)?.norm().powi(2);
            let pre = x.left_limit(s)?.sub(&xu)?.norm().powi(2);
            let ideal = x.jump_at(s).norm().powi(2);
            jump_checks.push((s, (post - pre - ideal).abs()));
        }
        per_t.push(QVPointResult {
            t,
            trace,
            verdict,
            limit_estimate,
            jump_checks,
        });
    }

    let atoms: Vec<(f64, Vec<f64>)> = jump_times
        .iter()
        .map(|&s| (s, vec![x.jump_at(s).norm().powi(2)]))
        .collect();
    let horizon = x.horizon();
    let jump_part = FVPath::new(CadlagPath::pure_jump(g_space, horizon, atoms)?);
    let mut grid: Vec<f64> = t_grid.to_vec();
    grid.extend(jump_times.iter().cloned());
    grid.push(0.0);
    grid.push(horizon);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let q_values = scalar_qv_samples(x, &pi_last, &grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    for (&t, q) in grid.iter().zip(q_values) {
        samples.push((t, vec![q - jump_part.path().value(t)?.coords()[0]]));
    }
    let continuous_part = FVPath::new(CadlagPath::piecewise_linear(
        g_space,
        horizon,
        samples,
        vec![],
    )?);
    let passed = per_t.iter().all(|p| p.verdict.passed());
    Ok(QVPathResult {
        per_t,
        continuous_part,
        jump_part,
        passed,
    })
}

/// 2-variation report: `sup_n sum |delta X_t(I)|^2` over the computed levels
/// with a growth flag when the tail is still increasing.
#[derive(Debug, Clone)]
pub struct TwoVariationReport {
    pub per_n: Vec<f64>,
    pub sup: f64,
    pub growth_flagged: bool,
}

pub fn two_variation(
    x: &CadlagPath,
    seq: &PartitionSequence,
    t: f64,
    n_max: usize,
) -> Result<TwoVariationReport> {
    let mut per_n = Vec::new();
    for n in 0..=n_max {
        per_n.push(discrete_scalar_qv(x, &seq.partition(n)?, t)?);
    }
    let sup = per_n.iter().fold(0.0f64, |m, &v| m.max(v));
    let tail = &per_n[per_n.len().saturating_sub(3)..];
    let growth_flagged = tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0]);
    Ok(TwoVariationReport {
        per_n,
        sup,
        growth_flagged,
    })
}

/// Max over the grid and levels of the bilinearity defect
/// `|Q^pi(X1+X2, Y1+Y2) - sum_ij Q^pi(Xi, Yj)|`; a finite-sum identity, so
/// the check runs per level.
#[allow(clippy::too_many_arguments)]
pub fn qv_bilinearity_check(
    x1: &CadlagPath,
    x2: &CadlagPath,
    y1: &CadlagPath,
    y2: &CadlagPath,
    b: &BilinearMap,
    seq: &PartitionSequence,
    t_grid: &[f64],
    n_max: usize,
) -> Result<f64> {
    let xs = x1.add(x2)?;
    let ys = y1.add(y2)?;
    let mut worst = 0.0f64;
    for n in 0..=n_max {
        let pi = seq.partition(n)?;
        for &t in t_grid {
            let whole = discrete_qv(&xs, &ys, b, &pi, t, Convention::Truncated)?;
            let mut parts = b.codomain().zero();
            for xi in [x1, x2] {
                for yj in [y1, y2] {
                    parts = parts.add(&discrete_qv(xi, yj, b, &pi, t, Convention::Truncated)?)?;
                }
            }
            worst = worst.max(whole.sub(&parts)?.norm());
        }
    }
    Ok(worst)
}

/// Coefficients of a bilinear map on basis pairs, as a Tensor3 layout.
fn coefficients_of(b: &BilinearMap) -> Result<Vec<f64>> {
    let (dl, dr, dg) = (
        b.domain_left().dim(),
        b.domain_right().dim(),
        b.codomain().dim(),
    );
    let mut c = vec![0.0; dl * dr * dg];
    for i in 0..dl {
        for j in 0..dr {
            let v = b.apply(&b.domain_left().basis(i), &b.domain_right().basis(j))?;
            for k in 0..dg {
                c[(i * dr + j) * dg + k] = v.coords()[k];
            }
        }
    }
    Ok(c)
}

/// Product-space covariation against the 2x2 block matrix of component
/// covariations (the finite-sum block identity). Returns the worst per-level
/// defect between the assembled product sum and the component sums.
pub fn qv_block_matrix(
    x: [&CadlagPath; 2],
    y: [&CadlagPath; 2],
    blocks: [[&BilinearMap; 2]; 2],
    seq: &PartitionSequence,
    t_grid: &[f64],
    n_max: usize,
) -> Result<f64> {
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            if blocks[i][j].domain_left() != xi.space() || blocks[i][j].domain_right() != yj.space()
            {
                return Err(Error::SpaceMismatch(format!("block ({i},{j})")));
            }
        }
    }
    let xp = CadlagPath::product(x[0], x[1])?;
    let yp = CadlagPath::product(y[0], y[1])?;
    // assemble the big map into the concatenated codomain
    let g_dims: Vec<usize> = [[0, 0], [0, 1], [1, 0], [1, 1]]
        .iter()
        .map(|&[i, j]| blocks[i][j].codomain().dim())
        .collect();
    let g_total: usize = g_dims.iter().sum();
    let g_space = NormedSpace::new(g_total, crate::space::NormKind::L2)?;
    let (dl, dr) = (xp.space().dim(), yp.space().dim());
    let mut coeffs = vec![0.0; dl * dr * g_total];
    let mut g_offset = 0;
    for (bi, &[i, j]) in [[0usize, 0usize], [0, 1], [1, 0], [1, 1]]
        .iter()
        .enumerate()
    {
        let block = blocks[i][j];
        let c = coefficients_of(block)?;
        let (bd_l, bd_r, bd_g) = (
            block.domain_left().dim(),
            block.domain_right().dim(),
            block.codomain().dim(),
        );
        let l_off = if i == 0 { 0 } else { x[0].space().dim() };
        let r_off = if j == 0 { 0 } else { y[0].space().dim() };
        for ii in 0..bd_l {
            for jj in 0..bd_r {
                for kk in 0..bd_g {
                    coeffs[((ii + l_off) * dr + (jj + r_off)) * g_total + g_offset + kk] =
                        c[(ii * bd_r + jj) * bd_g + kk];
                }
            }
        }
        let _ = bi;
        g_offset += g_dims[bi];
    }
    let big = BilinearMap::tensor3(xp.space(), yp.space(), g_space, coeffs, None)?;

    let mut worst = 0.0f64;
    for n in 0..=n_max {
        let pi = seq.partition(n)?;
        for &t in t_grid {
            let product = discrete_qv(&xp, &yp, &big, &pi, t, Convention::Truncated)?;
            let mut assembled = Vec::with_capacity(g_total);
            for &[i, j] in &[[0usize, 0usize], [0, 1], [1, 0], [1, 1]] {
                let q = discrete_qv(x[i], y[j], blocks[i][j], &pi, t, Convention::Truncated)?;
                assembled.extend_from_slice(q.coords());
            }
            let diff: f64 = product
                .coords()
                .iter()
                .zip(&assembled)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff);
        }
    }
    Ok(worst)
}

/// Per-time comparison of the two summation conventions with the
/// `(X,Y)(pi_over(t)) -> (X,Y)(t)` precondition monitor and the two-factor
/// bound.
#[derive(Debug, Clone)]
pub struct ConventionReport {
    pub t: f64,
    pub residuals: Vec<f64>,
    pub monitor: Vec<f64>,
    pub bound: Vec<f64>,
    pub monitor_verdict: Verdict,
    pub residual_verdict: Verdict,
}

pub fn convention_equivalence(
    x: &CadlagPath,
    y: &CadlagPath,
    b: &BilinearMap,
    seq: &PartitionSequence,
    t_grid: &[f64],
    n_max: usize,
) -> Result<Vec<ConventionReport>> {
    let mut out = Vec::new();
    for &t in t_grid {
        if t <= 0.0 {
            continue;
        }
        let mut residuals = Vec::new();
        let mut monitor = Vec::new();
        let mut bound = Vec::new();
        for n in 0..=n_max {
            let pi = seq.partition(n)?;
            let a = discrete_qv(x, y, b, &pi, t, Convention::Truncated)?;
            let c = discrete_qv(x, y, b, &pi, t, Convention::IndicatorLeft)?;
            residuals.push(a.sub(&c)?.norm());
            let (u, v) = pi.locate(t)?;
            let mx = x.value(v)?.sub(&x.value(t)?)?.norm();
            let my = y.value(v)?.sub(&y.value(t)?)?.norm();
            monitor.push(mx + my);
            let dyt = y.value(v.min(t))?.sub(&y.value(u.min(t))?)?.norm();
            let dx_full = x.value(v)?.sub(&x.value(u)?)?.norm();
            bound.push(b.bound() * (mx * dyt + dx_full * my));
        }
        let monitor_verdict = stall_verdict(&monitor);
        let residual_verdict = stall_verdict(&residuals);
        out.push(ConventionReport {
            t,
            residuals,
            monitor,
            bound,
            monitor_verdict,
            residual_verdict,
        });
    }
    Ok(out)
}
