//! Small dense linear-algebra kernel: singular values by one-sided Jacobi,
//! Gauss-Legendre quadrature nodes, and a least-squares solver.
//!
//! Everything here works on row-major `&[f64]` slices. The spaces in this
//! crate are tiny (<= 64 dims), so no attempt is made to be fast on large
//! matrices; determinism and zero dependencies are the point.

/// Convergence tolerance for the one-sided Jacobi sweep.
pub const JACOBI_TOL: f64 = 1e-13;

const JACOBI_MAX_SWEEPS: usize = 60;

/// Singular values of a row-major `rows x cols` matrix, sorted descending.
///
/// One-sided Jacobi: rotate pairs of columns of A until all pairs are
/// orthogonal; the singular values are then the column norms.
pub fn singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols, "matrix shape mismatch");
    // Work on the transpose when rows < cols so columns are the short side.
    if rows < cols {
        let mut at = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                at[c * rows + r] = a[r * cols + c];
            }
        }
        return singular_values(&at, cols, rows);
    }

    // Column-major copy: col[j] is a contiguous slice of length `rows`.
    let mut col = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            col[c * rows + r] = a[r * cols + c];
        }
    }

    let scale: f64 = col.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for r in 0..rows {
                    let x = col[p * rows + r];
                    let y = col[q * rows + r];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= JACOBI_TOL * scale * scale {
                    continue;
                }
                off = off.max(apq.abs() / (app.sqrt() * aqq.sqrt()).max(f64::MIN_POSITIVE));
                // Jacobi rotation that zeroes the (p,q) inner product.
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let x = col[p * rows + r];
                    let y = col[q * rows + r];
                    col[p * rows + r] = c * x - s * y;
                    col[q * rows + r] = s * x + c * y;
                }
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..cols)
        .map(|c| {
            (0..rows)
                .map(|r| col[c * rows + r] * col[c * rows + r])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Largest singular value (spectral norm).
pub fn operator_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    singular_values(a, rows, cols)
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Sum of singular values (trace norm).
pub fn nuclear_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    singular_values(a, rows, cols).iter().sum()
}

/// Gauss-Legendre nodes and weights on [0, 1].
///
/// Nodes are found by Newton iteration on the Legendre polynomial, then
/// mapped from [-1, 1] to [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Initial guess (Abramowitz-Stegun 22.16.6).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Least-squares solve of `A x = b` for a row-major `rows x cols` matrix
/// (rows >= cols), via the normal equations with partial pivoting.
///
/// Returns `None` when the normal matrix is numerically singular.
pub fn solve_least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    // G = A^T A (cols x cols), rhs = A^T b
    let mut g = vec![0.0; cols * cols];
    let mut rhs = vec![0.0; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut s = 0.0;
            for r in 0..rows {
                s += a[r * cols + i] * a[r * cols + j];
            }
            g[i * cols + j] = s;
        }
        let mut s = 0.0;
        for r in 0..rows {
            s += a[r * cols + i] * b[r];
        }
        rhs[i] = s;
    }
    solve_dense(&mut g, &mut rhs, cols)
}

fn solve_dense(g: &mut [f64], rhs: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale: f64 = g.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    for k in 0..n {
        let (mut piv, mut pv) = (k, g[k * n + k].abs());
        for r in (k + 1)..n {
            if g[r * n + k].abs() > pv {
                piv = r;
                pv = g[r * n + k].abs();
            }
        }
        if pv <= 1e-14 * scale {
            return None;
        }
        if piv != k {
            for c in 0..n {
                g.swap(k * n + c, piv * n + c);
            }
            rhs.swap(k, piv);
        }
        for r in (k + 1)..n {
            let f = g[r * n + k] / g[k * n + k];
            for c in k..n {
                g[r * n + c] -= f * g[k * n + c];
            }
            rhs[r] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for c in (k + 1)..n {
            s -= g[k * n + c] * x[c];
        }
        x[k] = s / g[k * n + k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_singular_values() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let sv = singular_values(&a, 2, 2);
        assert!((sv[0] - 1.0).abs() < 1e-12);
        assert!((sv[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_singular_value() {
        // (1,2)^T (3,4): single singular value sqrt(5)*5
        let a = [3.0, 4.0, 6.0, 8.0];
        let sv = singular_values(&a, 2, 2);
        assert!((sv[0] - 5.0f64.sqrt() * 5.0).abs() < 1e-10);
        assert!(sv[1].abs() < 1e-10);
    }

    #[test]
    fn wide_matrix_matches_tall() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]; // 3x2
        let s1 = singular_values(&a, 2, 3);
        let s2 = singular_values(&at, 3, 2);
        for (x, y) in s1.iter().zip(s2.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_01(8);
        // exact for degree <= 15 on [0,1]
        for k in 0..=15u32 {
            let got: f64 = x
                .iter()
                .zip(w.iter())
                .map(|(&xi, &wi)| wi * xi.powi(k as i32))
                .sum();
            let want = 1.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-13, "degree {k}: {got} vs {want}");
        }
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        // 3x2 system with exact solution (1, -2)
        let a = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let b = [1.0, -2.0, -1.0];
        let x = solve_least_squares(&a, 3, 2, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_detected() {
        let a = [1.0, 1.0, 1.0, 1.0];
        let b = [1.0, 2.0];
        assert!(solve_least_squares(&a, 2, 2, &b).is_none());
    }
}
