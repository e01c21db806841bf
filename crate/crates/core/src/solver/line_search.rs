use nalgebra::DVector;

use super::SolverConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub eta: f64,
    pub beta: DVector<f64>,
    pub objective: f64,
    pub halvings: usize,
}

/// Backtracking along `direction` until
/// `f(β + ηv) ≤ f(β) + α η ∇f(β)ᵗv`, trying `η = 1, σ, σ², …`.
///
/// A trial point at which `f` cannot be evaluated (for instance a Poisson
/// linear predictor overflow) counts as a rejected trial.
pub fn armijo_step<F>(
    mut f_at: F,
    beta: &DVector<f64>,
    f_beta: f64,
    direction: &DVector<f64>,
    grad: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<ArmijoStep>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    let slope = grad.dot(direction);
    if !(slope < 0.0) {
        return Err(Error::NotDescent { slope });
    }
    let mut eta = 1.0;
    for halvings in 0..=cfg.max_backtracks {
        let trial = beta + direction * eta;
        let value = match f_at(&trial) {
            Ok(f) => f,
            Err(Error::NonFiniteObjective { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if value <= f_beta + cfg.armijo_alpha * eta * slope {
            return Ok(ArmijoStep {
                eta,
                beta: trial,
                objective: value,
                halvings,
            });
        }
        eta *= cfg.halving_sigma;
    }
    Err(Error::Stagnation {
        halvings: cfg.max_backtracks,
    })
}
