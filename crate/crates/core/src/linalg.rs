//! Dense symmetric solves, the Woodbury low-rank path, and truncated SVD.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

const SVD_MAX_ITER: usize = 10_000;
const SVD_EPS: [f64; 3] = [5.0 * f64::EPSILON, 1e-14, 1e-12];
const SVD_RESIDUAL_TOL: f64 = 1e-8;

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "spd solve",
            expected: a.nrows(),
            actual: b.len(),
        });
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Cholesky factorization failed: matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// `H = v·Iₙ + U V` with `U` of shape n×m and `V` of shape m×n.
#[derive(Debug, Clone)]
pub struct LowRankSystem {
    pub v: f64,
    pub u: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

impl LowRankSystem {
    pub fn new(v: f64, u: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Numerical(format!(
                "identity multiplier must be positive, got {v}"
            )));
        }
        if u.ncols() != w.nrows() || u.nrows() != w.ncols() {
            return Err(Error::DimensionMismatch {
                context: "low-rank factors",
                expected: u.ncols(),
                actual: w.nrows(),
            });
        }
        Ok(Self { v, u, w })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// `H x` without assembling `H`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.v + &self.u * (&self.w * x)
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) * self.v + &self.u * &self.w
    }
}

/// `(vI + UV)⁻¹ b = v⁻¹ b − v⁻² U (I + v⁻¹ V U)⁻¹ V b`.
///
/// Only an m×m system is factored; forming `V U` costs `O(n m²)`.
pub fn woodbury_solve(sys: &LowRankSystem, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "woodbury right-hand side",
            expected: sys.dim(),
            actual: b.len(),
        });
    }
    let inv_v = 1.0 / sys.v;
    if sys.rank() == 0 {
        return Ok(b * inv_v);
    }
    let mut inner = &sys.w * &sys.u * inv_v;
    for i in 0..sys.rank() {
        inner[(i, i)] += 1.0;
    }
    let rhs = &sys.w * b;
    let z = inner
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Woodbury inner system is singular".into()))?;
    Ok(b * inv_v - &sys.u * z * (inv_v * inv_v))
}

/// Leading `r` singular triplets, largest first.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub values: DVector<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.values[j];
        }
        scaled * self.right.transpose()
    }
}

/// Full SVD with singular values sorted nonincreasing.
///
/// nalgebra's bidiagonal iteration can return an inaccurate decomposition for
/// some rank-deficient inputs when the convergence threshold is too tight, so
/// each attempt is checked by recomposition before it is accepted.
pub fn full_svd(b: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let scale = b.norm().max(f64::MIN_POSITIVE);
    for eps in SVD_EPS {
        let Some(svd) = SVD::try_new(b.clone(), true, true, eps, SVD_MAX_ITER) else {
            continue;
        };
        let residual = match svd.clone().recompose() {
            Ok(r) => (r - b).norm(),
            Err(_) => f64::INFINITY,
        };
        if residual <= SVD_RESIDUAL_TOL * scale {
            return Ok(svd);
        }
    }
    Err(Error::Numerical(format!(
        "SVD of {}x{} matrix failed to converge to an accurate decomposition",
        b.nrows(),
        b.ncols()
    )))
}

/// Top-`r` SVD, computed densely then truncated. Ties at the cut keep the
/// order the decomposition returns.
pub fn top_r_svd(b: &DMatrix<f64>, r: usize) -> Result<TruncatedSvd> {
    let k = b.nrows().min(b.ncols());
    if r == 0 || r > k {
        return Err(Error::InvalidConstraint(format!(
            "rank {r} must lie in 1..={k} for a {}x{} matrix",
            b.nrows(),
            b.ncols()
        )));
    }
    let svd = full_svd(b)?;
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    Ok(TruncatedSvd {
        values: svd.singular_values.rows(0, r).into_owned(),
        left: u.columns(0, r).into_owned(),
        right: vt.rows(0, r).transpose(),
    })
}
