//! Finite-dimensional stand-ins for Banach spaces.
//!
//! A [`NormedSpace`] is a dimension plus a norm tag. Elements are flat
//! row-major coordinate arrays wrapped in [`Vector`]. Tensor products live in
//! a matrix-shaped space of dimension `rows * cols`; the projective crossnorm
//! is realized as the nuclear norm and the injective one as the operator
//! norm, which are the exact finite-dimensional specializations with L2
//! factors.

use crate::error::{Error, Result};
use crate::linalg;
use serde::{Deserialize, Serialize};

/// Norm tags for plain coordinate spaces (also the factors of [`NormKind::PairSum`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VecNorm {
    L1,
    L2,
    LInf,
}

impl VecNorm {
    fn eval(&self, coords: &[f64]) -> f64 {
        match self {
            VecNorm::L1 => coords.iter().map(|v| v.abs()).sum(),
            VecNorm::L2 => coords.iter().map(|v| v * v).sum::<f64>().sqrt(),
            VecNorm::LInf => coords.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

/// The norm carried by a [`NormedSpace`].
///
/// Matrix-shaped tags interpret the coordinates as a row-major `rows x cols`
/// matrix. `PairSum` is the direct sum of two coordinate blocks with norm
/// `|left| + |right|`, used for product paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "tag")]
pub enum NormKind {
    L1,
    L2,
    LInf,
    Operator {
        rows: u16,
        cols: u16,
    },
    Frobenius {
        rows: u16,
        cols: u16,
    },
    Nuclear {
        rows: u16,
        cols: u16,
    },
    PairSum {
        left_dim: u16,
        left: VecNorm,
        right: VecNorm,
    },
}

/// Finite-dimensional normed space descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormedSpace {
    dim: usize,
    kind: NormKind,
}

impl NormedSpace {
    pub fn new(dim: usize, kind: NormKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("space dimension must be >= 1".into()));
        }
        match kind {
            NormKind::Operator { rows, cols }
            | NormKind::Frobenius { rows, cols }
            | NormKind::Nuclear { rows, cols } => {
                if rows as usize * cols as usize != dim {
                    return Err(Error::Invalid(format!(
                        "matrix norm shape {rows}x{cols} does not match dim {dim}"
                    )));
                }
            }
            NormKind::PairSum { left_dim, .. } if left_dim as usize >= dim => {
                return Err(Error::Invalid(format!(
                    "pair-sum left block {left_dim} must be < dim {dim}"
                )));
            }
            _ => {}
        }
        Ok(Self { dim, kind })
    }

    pub fn l2(dim: usize) -> Self {
        Self::new(dim, NormKind::L2).expect("dim >= 1")
    }

    pub fn scalar() -> Self {
        Self::l2(1)
    }

    /// Matrix space of shape `rows x cols` under the given matrix tag.
    pub fn matrix(rows: usize, cols: usize, tag: MatrixNorm) -> Self {
        let (r, c) = (rows as u16, cols as u16);
        let kind = match tag {
            MatrixNorm::Operator => NormKind::Operator { rows: r, cols: c },
            MatrixNorm::Frobenius => NormKind::Frobenius { rows: r, cols: c },
            MatrixNorm::Nuclear => NormKind::Nuclear { rows: r, cols: c },
        };
        Self::new(rows * cols, kind).expect("nonzero shape")
    }

    /// Direct sum of two spaces with norm `|a| + |x|`.
    ///
    /// Both factors must carry plain vector norms.
    pub fn pair_sum(left: NormedSpace, right: NormedSpace) -> Result<Self> {
        let lv = left.as_vec_norm().ok_or_else(|| {
            Error::Invalid("pair-sum left factor must have a plain vector norm".into())
        })?;
        let rv = right.as_vec_norm().ok_or_else(|| {
            Error::Invalid("pair-sum right factor must have a plain vector norm".into())
        })?;
        Self::new(
            left.dim + right.dim,
            NormKind::PairSum {
                left_dim: left.dim as u16,
                left: lv,
                right: rv,
            },
        )
    }

    fn as_vec_norm(&self) -> Option<VecNorm> {
        match self.kind {
            NormKind::L1 => Some(VecNorm::L1),
            NormKind::L2 => Some(VecNorm::L2),
            NormKind::LInf => Some(VecNorm::LInf),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    /// Tagged norm of a coordinate slice. Nuclear is the sum of singular
    /// values, Operator the largest one.
    pub fn norm_of(&self, coords: &[f64]) -> Result<f64> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        Ok(match self.kind {
            NormKind::L1 => VecNorm::L1.eval(coords),
            NormKind::L2 => VecNorm::L2.eval(coords),
            NormKind::LInf => VecNorm::LInf.eval(coords),
            NormKind::Frobenius { .. } => VecNorm::L2.eval(coords),
            NormKind::Operator { rows, cols } => {
                linalg::operator_norm(coords, rows as usize, cols as usize)
            }
            NormKind::Nuclear { rows, cols } => {
                linalg::nuclear_norm(coords, rows as usize, cols as usize)
            }
            NormKind::PairSum {
                left_dim,
                left,
                right,
            } => {
                let k = left_dim as usize;
                left.eval(&coords[..k]) + right.eval(&coords[k..])
            }
        })
    }

    pub fn zero(&self) -> Vector {
        Vector {
            space: *self,
            coords: vec![0.0; self.dim],
        }
    }

    pub fn vector(&self, coords: Vec<f64>) -> Result<Vector> {
        if coords.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector coordinates"));
        }
        Ok(Vector {
            space: *self,
            coords,
        })
    }

    pub fn basis(&self, i: usize) -> Vector {
        let mut v = vec![0.0; self.dim];
        v[i] = 1.0;
        Vector {
            space: *self,
            coords: v,
        }
    }
}

/// Matrix norm selector for [`NormedSpace::matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixNorm {
    Operator,
    Frobenius,
    Nuclear,
}

/// An element of a [`NormedSpace`]: a flat coordinate array.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    space: NormedSpace,
    coords: Vec<f64>,
}

impl Vector {
    pub fn space(&self) -> NormedSpace {
        self.space
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        self.space
            .norm_of(&self.coords)
            .expect("coords match space by construction")
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.check_same_space(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Vector {
            space: self.space,
            coords,
        })
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.check_same_space(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Vector {
            space: self.space,
            coords,
        })
    }

    pub fn scale(&self, a: f64) -> Vector {
        Vector {
            space: self.space,
            coords: self.coords.iter().map(|v| a * v).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&v| v == 0.0)
    }

    fn check_same_space(&self, other: &Vector) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )));
        }
        Ok(())
    }
}

/// The shape of a bounded bilinear map `B: E x F -> G`.
#[derive(Debug, Clone, PartialEq)]
pub enum BilinearKind {
    /// `B(x, y) = x y^T` flattened row-major; `G` is the `dim_E x dim_F`
    /// matrix space.
    Outer,
    /// `B(x, y) = <x, y>`; requires equal factor dimensions, `G` scalar.
    Inner,
    /// Explicit coefficients `c[i][j][k]` flattened as
    /// `(i * dim_F + j) * dim_G + k`.
    Tensor3(Vec<f64>),
}

/// A bounded bilinear map together with its domain/codomain descriptors and
/// an upper bound on its operator norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearMap {
    domain_left: NormedSpace,
    domain_right: NormedSpace,
    codomain: NormedSpace,
    kind: BilinearKind,
    bound: f64,
}

impl BilinearMap {
    /// Outer product into the matrix space `dim_E x dim_F` with the chosen
    /// codomain norm. With L2 factors the bound is 1 for all three matrix
    /// norms (rank-one elements have a single singular value `|x||y|`).
    pub fn outer(left: NormedSpace, right: NormedSpace, codomain_tag: MatrixNorm) -> Self {
        let codomain = NormedSpace::matrix(left.dim(), right.dim(), codomain_tag);
        BilinearMap {
            domain_left: left,
            domain_right: right,
            codomain,
            kind: BilinearKind::Outer,
            bound: 1.0,
        }
    }

    /// Euclidean pairing `<x, y>` into the scalar space.
    pub fn inner(space: NormedSpace) -> Self {
        BilinearMap {
            domain_left: space,
            domain_right: space,
            codomain: NormedSpace::scalar(),
            kind: BilinearKind::Inner,
            bound: 1.0,
        }
    }

    /// Explicit coefficient tensor. When no bound is supplied, the Frobenius
    /// bound `sqrt(sum c^2)` is used; it dominates the operator norm for L2
    /// factor and codomain norms.
    pub fn tensor3(
        left: NormedSpace,
        right: NormedSpace,
        codomain: NormedSpace,
        coeffs: Vec<f64>,
        bound: Option<f64>,
    ) -> Result<Self> {
        let want = left.dim() * right.dim() * codomain.dim();
        if coeffs.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: coeffs.len(),
            });
        }
        let bound = bound.unwrap_or_else(|| coeffs.iter().map(|c| c * c).sum::<f64>().sqrt());
        Ok(BilinearMap {
            domain_left: left,
            domain_right: right,
            codomain,
            kind: BilinearKind::Tensor3(coeffs),
            bound,
        })
    }

    /// The application pairing `L(E, G) x E -> G`, `(T, x) -> T x`, where the
    /// left factor is the `dim_G x dim_E` matrix space under the Frobenius
    /// norm. Its bound is 1 (`|Tx| <= |T|_F |x|`).
    pub fn apply_linear(e: NormedSpace, g: NormedSpace) -> Self {
        let (de, dg) = (e.dim(), g.dim());
        let map_space = NormedSpace::matrix(dg, de, MatrixNorm::Frobenius);
        let mut coeffs = vec![0.0; map_space.dim() * de * dg];
        // c[(g*de + e), e, g] = 1: (T, x) -> sum_e T[g,e] x[e]
        for gi in 0..dg {
            for ei in 0..de {
                let i = gi * de + ei;
                coeffs[(i * de + ei) * dg + gi] = 1.0;
            }
        }
        BilinearMap {
            domain_left: map_space,
            domain_right: e,
            codomain: g,
            kind: BilinearKind::Tensor3(coeffs),
            bound: 1.0,
        }
    }

    /// Transpose `tB(y, x) = B(x, y)`.
    pub fn transpose(&self) -> Self {
        match &self.kind {
            BilinearKind::Inner => self.clone(),
            BilinearKind::Outer => {
                // x y^T transposed pairing gives y x^T: swap factor roles and
                // target shape.
                let tag = match self.codomain.kind() {
                    NormKind::Operator { .. } => MatrixNorm::Operator,
                    NormKind::Nuclear { .. } => MatrixNorm::Nuclear,
                    _ => MatrixNorm::Frobenius,
                };
                BilinearMap::outer(self.domain_right, self.domain_left, tag)
            }
            BilinearKind::Tensor3(c) => {
                let (dl, dr, dg) = (
                    self.domain_left.dim(),
                    self.domain_right.dim(),
                    self.codomain.dim(),
                );
                let mut t = vec![0.0; c.len()];
                for i in 0..dl {
                    for j in 0..dr {
                        for k in 0..dg {
                            t[(j * dl + i) * dg + k] = c[(i * dr + j) * dg + k];
                        }
                    }
                }
                BilinearMap {
                    domain_left: self.domain_right,
                    domain_right: self.domain_left,
                    codomain: self.codomain,
                    kind: BilinearKind::Tensor3(t),
                    bound: self.bound,
                }
            }
        }
    }

    pub fn domain_left(&self) -> NormedSpace {
        self.domain_left
    }

    pub fn domain_right(&self) -> NormedSpace {
        self.domain_right
    }

    pub fn codomain(&self) -> NormedSpace {
        self.codomain
    }

    pub fn kind(&self) -> &BilinearKind {
        &self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Evaluate `B(x, y)`.
    pub fn apply(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        if x.space() != self.domain_left {
            return Err(Error::SpaceMismatch("left argument space".into()));
        }
        if y.space() != self.domain_right {
            return Err(Error::SpaceMismatch("right argument space".into()));
        }
        self.apply_coords(x.coords(), y.coords())
    }

    /// Evaluate on raw coordinate slices (lengths must match the domains).
    pub fn apply_coords(&self, x: &[f64], y: &[f64]) -> Result<Vector> {
        if x.len() != self.domain_left.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_left.dim(),
                got: x.len(),
            });
        }
        if y.len() != self.domain_right.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_right.dim(),
                got: y.len(),
            });
        }
        let coords = match &self.kind {
            BilinearKind::Outer => {
                let mut out = Vec::with_capacity(x.len() * y.len());
                for &xi in x {
                    for &yj in y {
                        out.push(xi * yj);
                    }
                }
                out
            }
            BilinearKind::Inner => {
                vec![x.iter().zip(y).map(|(a, b)| a * b).sum()]
            }
            BilinearKind::Tensor3(c) => {
                let (dr, dg) = (y.len(), self.codomain.dim());
                let mut out = vec![0.0; dg];
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (j, &yj) in y.iter().enumerate() {
                        if yj == 0.0 {
                            continue;
                        }
                        let base = (i * dr + j) * dg;
                        let f = xi * yj;
                        for k in 0..dg {
                            out[k] += f * c[base + k];
                        }
                    }
                }
                out
            }
        };
        Ok(Vector {
            space: self.codomain,
            coords,
        })
    }
}

/// Injective, Frobenius, and projective crossnorms of a matrix-shaped element
/// over L2 factors: `(operator, frobenius, nuclear)` computed from one set of
/// singular values, so the sandwich ordering holds exactly.
pub fn crossnorm_sandwich(v: &Vector) -> Result<(f64, f64, f64)> {
    let (rows, cols) = match v.space().kind() {
        NormKind::Operator { rows, cols }
        | NormKind::Frobenius { rows, cols }
        | NormKind::Nuclear { rows, cols } => (rows as usize, cols as usize),
        _ => {
            return Err(Error::Invalid(
                "crossnorm sandwich requires a matrix-shaped space".into(),
            ))
        }
    };
    let sv = linalg::singular_values(v.coords(), rows, cols);
    let injective = sv.first().copied().unwrap_or(0.0);
    let frobenius = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    let projective = sv.iter().sum();
    Ok((injective, frobenius, projective))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(space: NormedSpace, c: &[f64]) -> Vector {
        space.vector(c.to_vec()).unwrap()
    }

    #[test]
    fn pythagorean_norm() {
        let e = NormedSpace::l2(2);
        assert_eq!(v(e, &[3.0, 4.0]).norm(), 5.0);
    }

    #[test]
    fn nuclear_norm_of_identity_is_two() {
        let m = NormedSpace::matrix(2, 2, MatrixNorm::Nuclear);
        let id = v(m, &[1.0, 0.0, 0.0, 1.0]);
        assert!((id.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nuclear_norm_matches_eigen_oracle() {
        // Independent oracle: eigenvalues of v^T v by the closed-form 2x2
        // symmetric eigenproblem; nuclear norm = sum of their square roots.
        let a = [1.0, 1.0, 0.0, 1.0];
        // v^T v = [[1,1],[1,2]]
        let (p, q, r) = (1.0f64, 1.0f64, 2.0f64);
        let tr = p + r;
        let disc = ((p - r) * (p - r) + 4.0 * q * q).sqrt();
        let expect = ((tr + disc) / 2.0).sqrt() + ((tr - disc) / 2.0).sqrt();
        let m = NormedSpace::matrix(2, 2, MatrixNorm::Nuclear);
        assert!((v(m, &a).norm() - expect).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let e = NormedSpace::l2(2);
        assert!(e.norm_of(&[1.0]).is_err());
        assert!(e.vector(vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn outer_product_of_basis_vectors() {
        let e = NormedSpace::l2(2);
        let b = BilinearMap::outer(e, e, MatrixNorm::Frobenius);
        let out = b.apply(&v(e, &[1.0, 0.0]), &v(e, &[0.0, 1.0])).unwrap();
        assert_eq!(out.coords(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn inner_product_value() {
        let e = NormedSpace::l2(2);
        let b = BilinearMap::inner(e);
        let out = b.apply(&v(e, &[1.0, 2.0]), &v(e, &[3.0, 4.0])).unwrap();
        assert_eq!(out.coords(), &[11.0]);
    }

    #[test]
    fn tensor3_is_additive_in_each_argument() {
        let e = NormedSpace::l2(2);
        let g = NormedSpace::l2(3);
        let mut c = vec![0.0; 2 * 2 * 3];
        let mut state = 0x9e3779b97f4a7c15u64;
        for x in c.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *x = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        }
        let b = BilinearMap::tensor3(e, e, g, c, None).unwrap();
        let (x1, x2, y) = (v(e, &[0.3, -1.2]), v(e, &[2.0, 0.7]), v(e, &[-0.5, 1.1]));
        let lhs = b.apply(&x1.add(&x2).unwrap(), &y).unwrap();
        let rhs = b
            .apply(&x1, &y)
            .unwrap()
            .add(&b.apply(&x2, &y).unwrap())
            .unwrap();
        let diff = lhs.sub(&rhs).unwrap();
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn apply_linear_matches_matrix_action() {
        let e = NormedSpace::l2(2);
        let g = NormedSpace::l2(2);
        let b = BilinearMap::apply_linear(e, g);
        // T = [[1,2],[3,4]] row-major, x = (1,1) -> (3, 7)
        let t = b.domain_left().vector(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = v(e, &[1.0, 1.0]);
        let out = b.apply(&t, &x).unwrap();
        assert_eq!(out.coords(), &[3.0, 7.0]);
    }

    #[test]
    fn sandwich_on_identity() {
        let m = NormedSpace::matrix(2, 2, MatrixNorm::Frobenius);
        let (inj, fro, proj) = crossnorm_sandwich(&v(m, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        assert!((inj - 1.0).abs() < 1e-12);
        assert!((fro - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((proj - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sandwich_equalities_on_rank_one() {
        let e = NormedSpace::l2(3);
        let b = BilinearMap::outer(e, e, MatrixNorm::Frobenius);
        let x = v(e, &[1.0, -2.0, 0.5]);
        let y = v(e, &[0.3, 0.4, -1.0]);
        let (inj, fro, proj) = crossnorm_sandwich(&b.apply(&x, &y).unwrap()).unwrap();
        let want = x.norm() * y.norm();
        assert!((inj - want).abs() < 1e-10);
        assert!((fro - want).abs() < 1e-10);
        assert!((proj - want).abs() < 1e-10);
    }

    #[test]
    fn pair_sum_norm_adds_blocks() {
        let f = NormedSpace::l2(2);
        let e = NormedSpace::l2(2);
        let p = NormedSpace::pair_sum(f, e).unwrap();
        let w = v(p, &[3.0, 4.0, 0.0, 2.0]);
        assert!((w.norm() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_swaps_arguments() {
        let e = NormedSpace::l2(2);
        let f = NormedSpace::l2(3);
        let g = NormedSpace::l2(2);
        let mut c = vec![0.0; 2 * 3 * 2];
        for (i, x) in c.iter_mut().enumerate() {
            *x = (i as f64 * 0.37).sin();
        }
        let b = BilinearMap::tensor3(e, f, g, c, None).unwrap();
        let tb = b.transpose();
        let x = v(e, &[1.0, -0.5]);
        let y = v(f, &[0.2, 0.9, -1.3]);
        let diff = b
            .apply(&x, &y)
            .unwrap()
            .sub(&tb.apply(&y, &x).unwrap())
            .unwrap();
        assert!(diff.norm() < 1e-15);
    }
}
