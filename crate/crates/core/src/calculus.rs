//! Differentiation support for test functions `f: F x E -> G`: analytic
//! derivative oracles bundled as fixtures, finite-difference validation,
//! the integral-form Taylor remainder, and the factorization of the second
//! derivative through a bilinear map (`D_B^2 f` with `T o B = D_x^2 f`).
//!
//! Derivatives are always supplied analytically and only validated by finite
//! differences; the Ito verifier consumes the exact maps, never numerical
//! ones.

use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{BilinearKind, BilinearMap, NormedSpace};
use std::sync::Arc;

/// Absolute finite-difference tolerance on the asymptotic window.
pub const FD_TOL: f64 = 1e-6;
/// Window of step sizes where central differences are in their asymptotic
/// regime (outside it, truncation or rounding dominates).
pub const FD_WINDOW: (f64, f64) = (1e-5, 1e-2);
/// Quadrature agreement tolerance for the Taylor remainder.
pub const QUAD_TOL: f64 = 1e-10;

/// Dense linear map as a row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl LinearMap {
    pub fn zero(rows: usize, cols: usize) -> Self {
        LinearMap {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        LinearMap {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "linear map argument length");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(m, v)| m * v)
                    .sum()
            })
            .collect()
    }
}

/// Symmetric second derivative as a `G x E x E` coefficient block:
/// `data[(g * d + i) * d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivative {
    pub out_dim: usize,
    pub in_dim: usize,
    pub data: Vec<f64>,
}

impl SecondDerivative {
    pub fn zero(out_dim: usize, in_dim: usize) -> Self {
        SecondDerivative {
            out_dim,
            in_dim,
            data: vec![0.0; out_dim * in_dim * in_dim],
        }
    }

    pub fn apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.in_dim;
        (0..self.out_dim)
            .map(|g| {
                let mut s = 0.0;
                for (i, &ui) in u.iter().enumerate() {
                    if ui == 0.0 {
                        continue;
                    }
                    for (j, &vj) in v.iter().enumerate() {
                        s += self.data[(g * d + i) * d + j] * ui * vj;
                    }
                }
                s
            })
            .collect()
    }

    /// Entry `D^2 f (e_i, e_j)` as a codomain vector.
    pub fn basis_pair(&self, i: usize, j: usize) -> Vec<f64> {
        let d = self.in_dim;
        (0..self.out_dim)
            .map(|g| self.data[(g * d + i) * d + j])
            .collect()
    }
}

type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> LinearMap + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64], &[f64]) -> SecondDerivative + Send + Sync>;

/// A twice-differentiable test function `f: F x E -> G` with analytic
/// partial-derivative oracles.
#[derive(Clone)]
pub struct SmoothFunction {
    domain_a: NormedSpace,
    domain_x: NormedSpace,
    codomain: NormedSpace,
    eval: EvalFn,
    d_a: GradFn,
    d_x: GradFn,
    d2_x: HessFn,
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("domain_a", &self.domain_a)
            .field("domain_x", &self.domain_x)
            .field("codomain", &self.codomain)
            .finish()
    }
}

impl SmoothFunction {
    pub fn new(
        domain_a: NormedSpace,
        domain_x: NormedSpace,
        codomain: NormedSpace,
        eval: EvalFn,
        d_a: GradFn,
        d_x: GradFn,
        d2_x: HessFn,
    ) -> Self {
        SmoothFunction {
            domain_a,
            domain_x,
            codomain,
            eval,
            d_a,
            d_x,
            d2_x,
        }
    }

    pub fn domain_a(&self) -> NormedSpace {
        self.domain_a
    }

    pub fn domain_x(&self) -> NormedSpace {
        self.domain_x
    }

    pub fn codomain(&self) -> NormedSpace {
        self.codomain
    }

    pub fn eval(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        (self.eval)(a, x)
    }

    pub fn d_a(&self, a: &[f64], x: &[f64]) -> LinearMap {
        (self.d_a)(a, x)
    }

    pub fn d_x(&self, a: &[f64], x: &[f64]) -> LinearMap {
        (self.d_x)(a, x)
    }

    pub fn d2_x(&self, a: &[f64], x: &[f64]) -> SecondDerivative {
        (self.d2_x)(a, x)
    }
}

/// Named fixtures selectable from configs: "quadratic", "exp-coord",
/// "bilinear-pairing", "softnorm".
pub fn fixture(id: &str, dim_a: usize, dim_x: usize) -> Result<SmoothFunction> {
    let fa = NormedSpace::l2(dim_a);
    let ex = NormedSpace::l2(dim_x);
    let g = NormedSpace::scalar();
    match id {
        // f(a, x) = <x, x>
        "quadratic" => Ok(SmoothFunction::new(
            fa,
            ex,
            g,
            Arc::new(|_a, x| vec![x.iter().map(|v| v * v).sum()]),
            Arc::new(move |_a, _x| LinearMap::zero(1, dim_a)),
            Arc::new(|_a, x| LinearMap::from_rows(vec![x.iter().map(|v| 2.0 * v).collect()])),
            Arc::new(move |_a, _x| {
                let mut h = SecondDerivative::zero(1, dim_x);
                for i in 0..dim_x {
                    h.data[i * dim_x + i] = 2.0;
                }
                h
            }),
        )),
        // f(a, x) = exp(x_1)
        "exp-coord" => Ok(SmoothFunction::new(
            fa,
            ex,
            g,
            Arc::new(|_a, x| vec![x[0].exp()]),
            Arc::new(move |_a, _x| LinearMap::zero(1, dim_a)),
            Arc::new(move |_a, x| {
                let mut row = vec![0.0; dim_x];
                row[0] = x[0].exp();
                LinearMap::from_rows(vec![row])
            }),
            Arc::new(move |_a, x| {
                let mut h = SecondDerivative::zero(1, dim_x);
                h.data[0] = x[0].exp();
                h
            }),
        )),
        // f(a, x) = <a, x>  (requires equal dimensions)
        "bilinear-pairing" => {
            if dim_a != dim_x {
                return Err(Error::Invalid(
                    "bilinear-pairing requires dim_a == dim_x".into(),
                ));
            }
            Ok(SmoothFunction::new(
                fa,
                ex,
                g,
                Arc::new(|a, x| vec![a.iter().zip(x).map(|(p, q)| p * q).sum()]),
                Arc::new(|_a, x| LinearMap::from_rows(vec![x.to_vec()])),
                Arc::new(|a, _x| LinearMap::from_rows(vec![a.to_vec()])),
                Arc::new(move |_a, _x| SecondDerivative::zero(1, dim_x)),
            ))
        }
        // f(a, x) = sqrt(1 + |x|^2)
        "softnorm" => Ok(SmoothFunction::new(
            fa,
            ex,
            g,
            Arc::new(|_a, x| vec![(1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()]),
            Arc::new(move |_a, _x| LinearMap::zero(1, dim_a)),
            Arc::new(|_a, x| {
                let w = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
                LinearMap::from_rows(vec![x.iter().map(|v| v / w).collect()])
            }),
            Arc::new(move |_a, x| {
                let w = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
                let mut h = SecondDerivative::zero(1, dim_x);
                for i in 0..dim_x {
                    for j in 0..dim_x {
                        let id = if i == j { 1.0 } else { 0.0 };
                        h.data[i * dim_x + j] = id / w - x[i] * x[j] / (w * w * w);
                    }
                }
                h
            }),
        )),
        other => Err(Error::Invalid(format!(
            "unknown function fixture '{other}'"
        ))),
    }
}

pub fn fixture_ids() -> &'static [&'static str] {
    &["quadratic", "exp-coord", "bilinear-pairing", "softnorm"]
}

/// Finite-difference validation report for a directional derivative.
#[derive(Debug, Clone)]
pub struct SlopeReport {
    pub h_grid: Vec<f64>,
    pub errors: Vec<f64>,
    /// Log-log slope over the asymptotic window; None when every windowed
    /// error sits at the rounding floor (derivative exact for this f).
    pub slope: Option<f64>,
    pub exact: bool,
    /// Smallest windowed error: the best agreement achieved, checked
    /// against [`FD_TOL`].
    pub best_window_error: f64,
    pub passed: bool,
}

/// Central-difference check of the joint directional derivative
/// `D_a f . da + D_x f . dx` at `(a, x)`.
///
/// The error of a second-order central difference must decay with log-log
/// slope >= 1.9 on the window, unless it is already at the rounding floor.
pub fn fd_check_gradient(
    f: &SmoothFunction,
    a: &[f64],
    x: &[f64],
    da: &[f64],
    dx: &[f64],
    h_grid: &[f64],
) -> Result<SlopeReport> {
    if h_grid.is_empty() || h_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Invalid("h grid must be decreasing".into()));
    }
    let analytic = {
        let ga = f.d_a(a, x).apply(da);
        let gx = f.d_x(a, x).apply(dx);
        ga.iter().zip(&gx).map(|(p, q)| p + q).collect::<Vec<f64>>()
    };
    let shift = |h: f64| -> Vec<f64> {
        let ah: Vec<f64> = a.iter().zip(da).map(|(v, d)| v + h * d).collect();
        let xh: Vec<f64> = x.iter().zip(dx).map(|(v, d)| v + h * d).collect();
        f.eval(&ah, &xh)
    };
    let scale = f.eval(a, x).iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut errors = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let plus = shift(h);
        let minus = shift(-h);
        let err: f64 = plus
            .iter()
            .zip(&minus)
            .zip(&analytic)
            .map(|((p, m), g)| ((p - m) / (2.0 * h) - g).abs())
            .fold(0.0, f64::max);
        if !err.is_finite() {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        errors.push(err);
    }

    // cancellation noise of a central difference scales like eps * |f| / h;
    // points at that floor carry no slope information
    let floor = |h: f64| 16.0 * f64::EPSILON * scale / h;
    let window: Vec<(f64, f64)> = h_grid
        .iter()
        .zip(&errors)
        .filter(|(&h, &e)| h >= FD_WINDOW.0 && h <= FD_WINDOW.1 && e > floor(h))
        .map(|(&h, &e)| (h, e))
        .collect();
    let best_window_error = h_grid
        .iter()
        .zip(&errors)
        .filter(|(&h, _)| h >= FD_WINDOW.0 && h <= FD_WINDOW.1)
        .map(|(_, &e)| e)
        .fold(f64::INFINITY, f64::min);
    let exact = window.is_empty();
    let slope = (window.len() >= 2).then(|| log_log_slope(&window));
    let passed = exact || slope.is_some_and(|s| s >= 1.9);
    Ok(SlopeReport {
        h_grid: h_grid.to_vec(),
        errors,
        slope,
        exact,
        best_window_error,
        passed,
    })
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in points {
        let (lx, ly) = (h.ln(), e.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Direct remainder and integral-form remainder of the x-slice Taylor
/// expansion of order `n` (1 or 2) at fixed `a`.
#[derive(Debug, Clone)]
pub struct TaylorCheck {
    pub remainder: Vec<f64>,
    pub integral_form: Vec<f64>,
    pub disagreement: f64,
    pub passed: bool,
}

pub fn taylor_remainder(
    f: &SmoothFunction,
    a: &[f64],
    x: &[f64],
    u: &[f64],
    order: usize,
) -> Result<TaylorCheck> {
    if !(order == 1 || order == 2) {
        return Err(Error::Invalid("taylor order must be 1 or 2".into()));
    }
    let xu: Vec<f64> = x.iter().zip(u).map(|(p, q)| p + q).collect();
    let mut remainder = f.eval(a, &xu);
    for (r, v) in remainder.iter_mut().zip(f.eval(a, x)) {
        *r -= v;
    }
    if order == 2 {
        for (r, v) in remainder.iter_mut().zip(f.d_x(a, x).apply(u)) {
            *r -= v;
        }
    }

    let (nodes, weights) = linalg::gauss_legendre_01(32);
    let g_dim = f.codomain().dim();
    let mut integral = vec![0.0; g_dim];
    for (&theta, &w) in nodes.iter().zip(&weights) {
        let xt: Vec<f64> = x.iter().zip(u).map(|(p, q)| p + theta * q).collect();
        let term = match order {
            1 => f.d_x(a, &xt).apply(u),
            _ => f.d2_x(a, &xt).apply(u, u),
        };
        let factor = if order == 1 { w } else { w * (1.0 - theta) };
        for (acc, v) in integral.iter_mut().zip(term) {
            *acc += factor * v;
        }
    }
    if integral.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("taylor quadrature"));
    }

    let u_norm = f.domain_x().norm_of(u)?;
    let disagreement = remainder
        .iter()
        .zip(&integral)
        .map(|(r, i)| (r - i).abs())
        .fold(0.0, f64::max);
    let passed = disagreement <= QUAD_TOL * (1.0 + u_norm.powi(order as i32));
    Ok(TaylorCheck {
        remainder,
        integral_form: integral,
        disagreement,
        passed,
    })
}

/// The joint derivative `(h_a, h_x) -> D_a f . h_a + D_x f . h_x` as a single
/// matrix on the direct sum.
pub fn assemble_joint_derivative(f: &SmoothFunction, a: &[f64], x: &[f64]) -> LinearMap {
    let ma = f.d_a(a, x);
    let mx = f.d_x(a, x);
    let rows = ma.rows;
    let cols = ma.cols + mx.cols;
    let mut data = vec![0.0; rows * cols];
    for r in 0..rows {
        data[r * cols..r * cols + ma.cols]
            .copy_from_slice(&ma.data[r * ma.cols..(r + 1) * ma.cols]);
        data[r * cols + ma.cols..(r + 1) * cols]
            .copy_from_slice(&mx.data[r * mx.cols..(r + 1) * mx.cols]);
    }
    LinearMap { rows, cols, data }
}

/// Factor the second derivative through `B`: find `T: E_1 -> G` with
/// `T(B(e_i, e_j)) = D_x^2 f(point)(e_i, e_j)` on all basis pairs.
///
/// For the outer product this is the identity reshaping; for the inner
/// product it exists only when the Hessian is a multiple of the identity.
/// Errors when no factorization matches within 1e-10, signalling that
/// hypothesis (iii) of the Ito formula fails for this `(f, B)`.
pub fn compress_second_derivative(
    f: &SmoothFunction,
    a: &[f64],
    x: &[f64],
    b: &BilinearMap,
) -> Result<LinearMap> {
    let d = f.domain_x().dim();
    if b.domain_left().dim() != d || b.domain_right().dim() != d {
        return Err(Error::SpaceMismatch("B must act on E x E".into()));
    }
    let e1 = b.codomain().dim();
    let g_dim = f.codomain().dim();
    let hess = f.d2_x(a, x);

    // fast path: the outer product is a pure reshape
    if matches!(b.kind(), BilinearKind::Outer) {
        let mut data = vec![0.0; g_dim * e1];
        for gidx in 0..g_dim {
            for i in 0..d {
                for j in 0..d {
                    data[gidx * e1 + i * d + j] = hess.data[(gidx * d + i) * d + j];
                }
            }
        }
        return Ok(LinearMap {
            rows: g_dim,
            cols: e1,
            data,
        });
    }

    // general case: least squares on the d^2 basis-pair constraints
    let rows = d * d;
    let mut m = vec![0.0; rows * e1];
    for i in 0..d {
        for j in 0..d {
            let bij = b.apply(&b.domain_left().basis(i), &b.domain_right().basis(j))?;
            m[((i * d + j) * e1)..((i * d + j + 1) * e1)].copy_from_slice(bij.coords());
        }
    }
    let scale = hess.data.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut t = vec![0.0; g_dim * e1];
    for gidx in 0..g_dim {
        let rhs: Vec<f64> = (0..rows).map(|ij| hess.data[gidx * rows + ij]).collect();
        let sol = match linalg::solve_least_squares(&m, rows, e1, &rhs) {
            Some(s) => s,
            None => {
                if rhs.iter().all(|v| v.abs() <= 1e-14 * scale) {
                    vec![0.0; e1]
                } else {
                    return Err(Error::NoFactorization(
                        "B does not span the Hessian's support".into(),
                    ));
                }
            }
        };
        t[gidx * e1..(gidx + 1) * e1].copy_from_slice(&sol);
    }
    let map = LinearMap {
        rows: g_dim,
        cols: e1,
        data: t,
    };

    // verify the factorization on all basis pairs
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let bij = b.apply(&b.domain_left().basis(i), &b.domain_right().basis(j))?;
            let got = map.apply(bij.coords());
            let want = hess.basis_pair(i, j);
            for (p, q) in got.iter().zip(&want) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::NoFactorization(format!(
            "no D_B^2 f exists at this point (defect {worst:.3e})"
        )));
    }
    Ok(map)
}
