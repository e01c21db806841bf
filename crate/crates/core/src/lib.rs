//! Regression for generalized linear models under set constraints.
//!
//! Constraints enter the objective as weighted squared Euclidean distances
//! `½ Σᵢ vᵢ dist(β, Cᵢ)²`, which are minimized together with the negative
//! log-likelihood by majorization-minimization. Any set with a computable
//! projection can be used, convex or not.
//!
//! ```
//! use distglm::{fit, ConstraintSet, ConstraintSpec, Dataset, Family, SolverConfig};
//! use nalgebra::{dvector, DMatrix};
//!
//! let data = Dataset::new(DMatrix::identity(4, 4), dvector![5.0, 1.0, -3.0, 0.5]).unwrap();
//! let sparse = ConstraintSpec::new(ConstraintSet::Sparsity { k: 2 }, 1.0).unwrap();
//! let result = fit(Family::Gaussian, &data, &[sparse], &SolverConfig::default(), None).unwrap();
//! assert!(result.converged);
//! assert_eq!(result.projected_beta.iter().filter(|b| **b != 0.0).count(), 2);
//! ```

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod error;
pub mod experiments;
pub mod glm;
pub mod linalg;
pub mod matrix_reg;
pub mod solver;

pub use constraints::{ConstraintSet, ConstraintSpec};
pub use error::{Error, Result};
pub use glm::{Dataset, Family};
pub use matrix_reg::{fit_matrix, MatrixDataset, MatrixFit};
pub use solver::{fit, FitResult, SolverConfig, Termination, WoodburyMode};
