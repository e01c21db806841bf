//! Constraint sets, their Euclidean projections, and squared distances.
//!
//! The penalty attached to a set `C` with weight `v` is `½ v dist(β, C)²`,
//! whose gradient is `v (β − P_C(β))` wherever the projection is unique.

mod pava;

pub use pava::{pava, pava_unweighted};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::top_r_svd;
use crate::matrix_reg::{unvec, vec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSet {
    /// At most `k` nonzero entries.
    Sparsity {
        k: usize,
    },
    /// Nondecreasing entries.
    Isotone,
    /// `vec⁻¹(β)` as a `rows × cols` matrix (column-major) of rank ≤ `r`.
    Rank {
        r: usize,
        rows: usize,
        cols: usize,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `aᵗβ = b`.
    Hyperplane {
        a: Vec<f64>,
        b: f64,
    },
    /// `aᵗβ ≤ b`.
    HalfSpace {
        a: Vec<f64>,
        b: f64,
    },
    NonNegative,
}

impl ConstraintSet {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintSet::Sparsity { .. } => "sparsity",
            ConstraintSet::Isotone => "isotone",
            ConstraintSet::Rank { .. } => "rank",
            ConstraintSet::Box { .. } => "box",
            ConstraintSet::Ball { .. } => "ball",
            ConstraintSet::Hyperplane { .. } => "hyperplane",
            ConstraintSet::HalfSpace { .. } => "halfspace",
            ConstraintSet::NonNegative => "nonnegative",
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, ConstraintSet::Sparsity { .. } | ConstraintSet::Rank { .. })
    }

    /// Dimension fixed by the set's parameters, if any.
    pub fn required_dim(&self) -> Option<usize> {
        match self {
            ConstraintSet::Rank { rows, cols, .. } => Some(rows * cols),
            ConstraintSet::Box { lower, .. } => Some(lower.len()),
            ConstraintSet::Ball { center, .. } => Some(center.len()),
            ConstraintSet::Hyperplane { a, .. } | ConstraintSet::HalfSpace { a, .. } => Some(a.len()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConstraint(msg));
        match self {
            ConstraintSet::Sparsity { k } if *k == 0 => bad("sparsity level k must be at least 1".into()),
            ConstraintSet::Rank { r, rows, cols } => {
                if *r == 0 || *r > (*rows).min(*cols) {
                    bad(format!(
                        "rank {r} must lie in 1..={} for a {rows}x{cols} matrix",
                        rows.min(cols)
                    ))
                } else {
                    Ok(())
                }
            }
            ConstraintSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return bad(format!("box bounds have lengths {} and {}", lower.len(), upper.len()));
                }
                match lower.iter().zip(upper).position(|(l, u)| !(l <= u)) {
                    Some(i) => bad(format!("box lower bound exceeds upper bound at {i}")),
                    None => Ok(()),
                }
            }
            ConstraintSet::Ball { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    bad(format!("ball radius must be positive, got {radius}"))
                } else if center.iter().any(|c| !c.is_finite()) {
                    bad("ball center must be finite".into())
                } else {
                    Ok(())
                }
            }
            ConstraintSet::Hyperplane { a, b } | ConstraintSet::HalfSpace { a, b } => {
                if a.iter().all(|&v| v == 0.0) {
                    bad("normal vector must be nonzero".into())
                } else if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                    bad("hyperplane parameters must be finite".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if let ConstraintSet::Sparsity { k } = self {
            if *k > n {
                return Err(Error::InvalidConstraint(format!(
                    "sparsity level {k} exceeds dimension {n}"
                )));
            }
        }
        match self.required_dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch {
                context: "constraint dimension",
                expected: d,
                actual: n,
            }),
            _ => Ok(()),
        }
    }

    /// Euclidean projection of `x` onto the set.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let p = match self {
            ConstraintSet::Sparsity { k } => project_sparse(x, *k),
            ConstraintSet::Isotone => DVector::from_vec(pava_unweighted(x.as_slice())?),
            ConstraintSet::Rank { r, rows, cols } => {
                let b = unvec(x, *rows, *cols)?;
                vec(&truncate_rank(&b, *r)?)
            }
            ConstraintSet::Box { lower, upper } => {
                DVector::from_iterator(x.len(), x.iter().enumerate().map(|(i, &v)| v.clamp(lower[i], upper[i])))
            }
            ConstraintSet::Ball { center, radius } => {
                let c = DVector::from_column_slice(center);
                let diff = x - &c;
                let dist = diff.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    c + diff * (*radius / dist)
                }
            }
            ConstraintSet::Hyperplane { a, b } => project_hyperplane(x, a, *b),
            ConstraintSet::HalfSpace { a, b } => {
                let a_vec = DVector::from_column_slice(a);
                if a_vec.dot(x) <= *b {
                    x.clone()
                } else {
                    project_hyperplane(x, a, *b)
                }
            }
            ConstraintSet::NonNegative => x.map(|v| v.max(0.0)),
        };
        Ok(p)
    }

    /// Whether `x` lies in the set, up to `tol` on the defining inequalities.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        self.check_dim(x.len())?;
        let inside = match self {
            ConstraintSet::Sparsity { k } => x.iter().filter(|v| **v != 0.0).count() <= *k,
            ConstraintSet::Isotone => x.as_slice().windows(2).all(|w| w[0] <= w[1] + tol),
            ConstraintSet::Rank { r, rows, cols } => {
                let s = crate::linalg::full_svd(&unvec(x, *rows, *cols)?)?.singular_values;
                s.len() <= *r || s[*r] <= tol * s[0].max(f64::MIN_POSITIVE)
            }
            ConstraintSet::Box { lower, upper } => x
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= lower[i] - tol && v <= upper[i] + tol),
            ConstraintSet::Ball { center, radius } => (x - DVector::from_column_slice(center)).norm() <= radius + tol,
            ConstraintSet::Hyperplane { a, b } => (DVector::from_column_slice(a).dot(x) - b).abs() <= tol,
            ConstraintSet::HalfSpace { a, b } => DVector::from_column_slice(a).dot(x) <= b + tol,
            ConstraintSet::NonNegative => x.iter().all(|&v| v >= -tol),
        };
        Ok(inside)
    }
}

/// A constraint set paired with its penalty weight `v > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub set: ConstraintSet,
    pub weight: f64,
}

impl ConstraintSpec {
    pub fn new(set: ConstraintSet, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidConstraint(format!(
                "weight must be positive, got {weight}"
            )));
        }
        set.validate()?;
        Ok(Self { set, weight })
    }

    /// Checks the constraint against a coefficient dimension.
    pub fn validate_dim(&self, n: usize) -> Result<()> {
        self.set.check_dim(n)
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.set.project(x)
    }

    pub fn distance_sq(&self, x: &DVector<f64>) -> Result<f64> {
        distance_sq(&self.set, x)
    }
}

pub fn project(set: &ConstraintSet, x: &DVector<f64>) -> Result<DVector<f64>> {
    set.project(x)
}

/// `‖x − P_C(x)‖²`.
pub fn distance_sq(set: &ConstraintSet, x: &DVector<f64>) -> Result<f64> {
    let p = set.project(x)?;
    Ok((x - p).norm_squared())
}

/// Keeps the `k` largest magnitudes; equal magnitudes keep the lower index.
fn project_sparse(x: &DVector<f64>, k: usize) -> DVector<f64> {
    let n = x.len();
    if k >= n {
        return x.clone();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.select_nth_unstable_by(k - 1, |&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    let mut out = DVector::zeros(n);
    for &i in &idx[..k] {
        out[i] = x[i];
    }
    out
}

fn project_hyperplane(x: &DVector<f64>, a: &[f64], b: f64) -> DVector<f64> {
    let a = DVector::from_column_slice(a);
    let gap = b - a.dot(x);
    x + &a * (gap / a.norm_squared())
}

/// Best rank-`r` approximation in Frobenius norm (Eckart–Young).
pub fn truncate_rank(b: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    if r > 0 && r == b.nrows().min(b.ncols()) {
        return Ok(b.clone());
    }
    Ok(top_r_svd(b, r)?.reconstruct())
}
