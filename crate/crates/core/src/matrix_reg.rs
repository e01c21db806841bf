//! Matrix-variate regression. A linear predictor `trace(XᵢᵗB)` equals
//! `vec(Xᵢ)ᵗvec(B)`, so fitting reduces to the vector problem on the
//! flattened design, with the rank constraint applied by reshaping.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{ConstraintSet, ConstraintSpec};
use crate::error::{Error, Result};
use crate::glm::{Dataset, Family};
use crate::solver::{fit, FitResult, SolverConfig};

/// Column-major stacking.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(x: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if x.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "unvec length",
            expected: rows * cols,
            actual: x.len(),
        });
    }
    Ok(DMatrix::from_column_slice(rows, cols, x.as_slice()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDataset {
    pub predictors: Vec<DMatrix<f64>>,
    pub y: DVector<f64>,
}

impl MatrixDataset {
    pub fn new(predictors: Vec<DMatrix<f64>>, y: DVector<f64>) -> Result<Self> {
        if predictors.len() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "responses vs predictor matrices",
                expected: predictors.len(),
                actual: y.len(),
            });
        }
        let shape = predictors
            .first()
            .map(|m| m.shape())
            .ok_or_else(|| Error::InvalidData("matrix dataset needs at least one case".into()))?;
        for (i, m) in predictors.iter().enumerate() {
            if m.shape() != shape {
                return Err(Error::InvalidData(format!(
                    "predictor {i} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
        }
        Ok(Self { predictors, y })
    }

    /// `(p, q)` shared by all predictor matrices.
    pub fn shape(&self) -> (usize, usize) {
        self.predictors[0].shape()
    }

    pub fn n_cases(&self) -> usize {
        self.y.len()
    }

    /// Flattened dataset whose `i`-th row is `vec(Xᵢ)ᵗ`.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let (p, q) = self.shape();
        let mut x = DMatrix::zeros(self.n_cases(), p * q);
        for (i, m) in self.predictors.iter().enumerate() {
            x.row_mut(i).copy_from_slice(m.as_slice());
        }
        Dataset::new(x, self.y.clone())
    }
}

#[derive(Debug, Clone)]
pub struct MatrixFit {
    pub fit: FitResult,
    /// Unprojected coefficient matrix.
    pub estimate: DMatrix<f64>,
    /// Best rank-`r` approximation of `estimate`.
    pub projected: DMatrix<f64>,
}

/// Fits `y ~ trace(XᵢᵗB)` subject to `rank(B) ≤ rank_r`, with penalty weight
/// `weight` as the starting point of the annealing schedule.
pub fn fit_matrix(
    family: Family,
    mdata: &MatrixDataset,
    rank_r: usize,
    weight: f64,
    cfg: &SolverConfig,
) -> Result<MatrixFit> {
    let (p, q) = mdata.shape();
    let spec = ConstraintSpec::new(
        ConstraintSet::Rank {
            r: rank_r,
            rows: p,
            cols: q,
        },
        weight,
    )?;
    let data = mdata.to_dataset()?;
    let fit = fit(family, &data, &[spec], cfg, None)?;
    let estimate = unvec(&fit.beta, p, q)?;
    let projected = unvec(&fit.projected_beta, p, q)?;
    Ok(MatrixFit {
        fit,
        estimate,
        projected,
    })
}
