//! Majorization-minimization solver for distance-penalized GLMs.
//!
//! Each iteration majorizes every `dist(β, Cᵢ)²` by `‖β − P_{Cᵢ}(βₖ)‖²`,
//! takes one Newton step on the resulting smooth surrogate, and backtracks
//! until the Armijo condition holds on the true objective. The surrogate
//! Hessian `(Σᵢ vᵢ + 2ω) I + (1/m) Xᵗ diag(ψ'') X` is positive definite
//! whenever a constraint or ridge term is present, so the step is always a
//! descent direction.
//!
//! Penalty weights are annealed geometrically: once the iterates settle at
//! the current weights, every `vᵢ` is multiplied by `anneal_rho` (capped at
//! `anneal_cap`) and the solve is warm-started from the previous solution.

mod accel;
mod line_search;
mod objective;

pub use accel::{qn_accelerate, qn_candidate, SecantHistory};
pub use line_search::{armijo_step, ArmijoStep};
pub use objective::{
    objective, objective_gradient, surrogate_hessian, FactoredHessian, HessianForm, Problem, SurrogateHessian,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::glm::{Dataset, Family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WoodburyMode {
    Auto,
    Always,
    Never,
}

impl std::str::FromStr for WoodburyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(WoodburyMode::Auto),
            "always" => Ok(WoodburyMode::Always),
            "never" => Ok(WoodburyMode::Never),
            other => Err(Error::InvalidConfig(format!("unknown woodbury mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo_alpha: f64,
    /// Step multiplier applied on each backtrack.
    pub halving_sigma: f64,
    pub grad_tol: f64,
    /// Relative objective change `|fₖ − fₖ₊₁| ≤ obj_tol (1 + |fₖ|)`.
    pub obj_tol: f64,
    /// Iteration budget for each weight epoch.
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Ridge term `ω ‖β‖²`.
    pub ridge_omega: f64,
    pub anneal_rho: f64,
    pub anneal_cap: f64,
    /// Number of secants for quasi-Newton acceleration; 0 disables it.
    pub qn_secants: usize,
    pub use_woodbury: WoodburyMode,
    /// `Auto` takes the Woodbury path when `m < woodbury_crossover · n`.
    pub woodbury_crossover: f64,
    /// Iterates with `‖β‖` beyond this are treated as diverging.
    pub divergence_bound: f64,
    /// Surrogate curvature `sᵗHs / sᵗs` at the final iterate along the last
    /// step `s`, below which a converged run is flagged as drifting along a
    /// flat direction.
    pub flat_curvature: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            armijo_alpha: 1e-4,
            halving_sigma: 0.5,
            grad_tol: 1e-8,
            obj_tol: 1e-10,
            max_iter: 1000,
            max_backtracks: 50,
            ridge_omega: 0.0,
            anneal_rho: 10.0,
            anneal_cap: 1e8,
            qn_secants: 2,
            use_woodbury: WoodburyMode::Auto,
            woodbury_crossover: 1.0,
            divergence_bound: 1e6,
            flat_curvature: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.armijo_alpha > 0.0 && self.armijo_alpha < 1.0) {
            return bad(format!("armijo_alpha must lie in (0, 1), got {}", self.armijo_alpha));
        }
        if !(self.halving_sigma > 0.0 && self.halving_sigma < 1.0) {
            return bad(format!("halving_sigma must lie in (0, 1), got {}", self.halving_sigma));
        }
        if !(self.grad_tol > 0.0) || !(self.obj_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iter == 0 || self.max_backtracks == 0 {
            return bad("max_iter and max_backtracks must be positive".into());
        }
        if !(self.ridge_omega >= 0.0 && self.ridge_omega.is_finite()) {
            return bad(format!("ridge_omega must be nonnegative, got {}", self.ridge_omega));
        }
        if !(self.anneal_rho >= 1.0 && self.anneal_rho.is_finite()) {
            return bad(format!("anneal_rho must be at least 1, got {}", self.anneal_rho));
        }
        if !(self.anneal_cap > 0.0) {
            return bad(format!("anneal_cap must be positive, got {}", self.anneal_cap));
        }
        if !(self.woodbury_crossover > 0.0) || !(self.divergence_bound > 0.0) || !(self.flat_curvature >= 0.0) {
            return bad("woodbury_crossover, divergence_bound and flat_curvature must be positive".into());
        }
        Ok(())
    }

    /// Convergence test on consecutive objective values.
    pub fn objective_converged(&self, previous: f64, current: f64) -> bool {
        (previous - current).abs() <= self.obj_tol * (1.0 + previous.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    ObjTol,
    MaxIter,
    /// The iterates ran off to infinity or along a flat direction, which
    /// happens when the objective is not coercive.
    Diverged,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(self, Termination::GradTol | Termination::ObjTol)
    }
}

/// One fixed-weight solve within an annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub weights: Vec<f64>,
    /// Half-open range of this epoch's points in the objective and gradient traces.
    pub trace_start: usize,
    pub trace_end: usize,
    pub iterations: usize,
    pub backtracks: usize,
    pub accelerated_steps: usize,
    pub termination: Termination,
    pub distances_sq: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Minimizer of the penalized objective at the final weights.
    pub beta: DVector<f64>,
    /// `beta` projected onto each constraint in turn.
    pub projected_beta: DVector<f64>,
    pub objective_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    /// Final `dist(β, Cᵢ)²` per constraint.
    pub constraint_distances: Vec<f64>,
    pub iterations: usize,
    pub total_backtracks: usize,
    pub accelerated_steps: usize,
    pub converged: bool,
    pub termination: Termination,
    pub epochs: Vec<EpochRecord>,
    pub final_weights: Vec<f64>,
    pub final_grad_norm: f64,
    pub last_step_norm: f64,
    pub used_woodbury: bool,
    pub coercivity_warning: Option<String>,
}

impl FitResult {
    /// Objective values of each epoch; each slice is nonincreasing.
    pub fn epoch_traces(&self) -> impl Iterator<Item = &[f64]> {
        self.epochs
            .iter()
            .map(|e| &self.objective_trace[e.trace_start..e.trace_end])
    }
}

/// Current iterate with its objective value and gradient.
#[derive(Debug, Clone)]
pub struct MmState {
    pub beta: DVector<f64>,
    pub objective: f64,
    pub gradient: DVector<f64>,
}

impl MmState {
    pub fn at(problem: &Problem<'_>, beta: DVector<f64>) -> Result<Self> {
        let objective = problem.objective(&beta)?;
        Self::with_objective(problem, beta, objective)
    }

    fn with_objective(problem: &Problem<'_>, beta: DVector<f64>, objective: f64) -> Result<Self> {
        let gradient = problem.gradient(&beta)?;
        Ok(Self {
            beta,
            objective,
            gradient,
        })
    }

    pub fn grad_norm(&self) -> f64 {
        self.gradient.norm()
    }
}

/// Outcome of one MM update.
#[derive(Debug, Clone)]
pub struct MmStep {
    pub beta: DVector<f64>,
    pub objective: f64,
    pub eta: f64,
    pub halvings: usize,
    /// `−∇fᵗd` for the Newton direction `d`.
    pub decrement: f64,
    /// `dᵗHd / dᵗd`.
    pub curvature: f64,
}

/// Newton direction `d = −H⁻¹∇f` of the surrogate at the current iterate.
fn newton_direction(problem: &Problem<'_>, state: &MmState, form: HessianForm) -> Result<DVector<f64>> {
    let h = problem.surrogate_hessian(&state.beta, form)?;
    Ok(-h.solve(&state.gradient)?)
}

/// One MM iteration: Newton step on the surrogate, then Armijo backtracking
/// on the objective. A stationary state is returned unchanged.
pub fn mm_step(problem: &Problem<'_>, state: &MmState, form: HessianForm, cfg: &SolverConfig) -> Result<MmStep> {
    if state.gradient.iter().all(|&g| g == 0.0) {
        return Ok(MmStep {
            beta: state.beta.clone(),
            objective: state.objective,
            eta: 0.0,
            halvings: 0,
            decrement: 0.0,
            curvature: f64::INFINITY,
        });
    }
    let direction = newton_direction(problem, state, form)?;
    let decrement = -state.gradient.dot(&direction);
    let step = armijo_step(
        |b| problem.objective(b),
        &state.beta,
        state.objective,
        &direction,
        &state.gradient,
        cfg,
    )?;
    Ok(MmStep {
        beta: step.beta,
        objective: step.objective,
        eta: step.eta,
        halvings: step.halvings,
        decrement,
        curvature: decrement / direction.norm_squared(),
    })
}

#[derive(Default)]
struct Traces {
    objective: Vec<f64>,
    grad_norm: Vec<f64>,
}

struct EpochOutcome {
    state: MmState,
    iterations: usize,
    backtracks: usize,
    accelerated: usize,
    termination: Termination,
    last_step_norm: f64,
    warning: Option<String>,
}

fn run_epoch(
    problem: &Problem<'_>,
    beta: DVector<f64>,
    form: HessianForm,
    cfg: &SolverConfig,
    traces: &mut Traces,
) -> Result<EpochOutcome> {
    let mut state = MmState::at(problem, beta)?;
    traces.objective.push(state.objective);
    traces.grad_norm.push(state.grad_norm());

    let mut history = SecantHistory::new(cfg.qn_secants);
    let mut out = EpochOutcome {
        state: state.clone(),
        iterations: 0,
        backtracks: 0,
        accelerated: 0,
        termination: Termination::MaxIter,
        last_step_norm: 0.0,
        warning: None,
    };
    let mut last_step: Option<DVector<f64>> = None;

    let termination = loop {
        if state.grad_norm() <= cfg.grad_tol {
            break Termination::GradTol;
        }
        if state.beta.norm() > cfg.divergence_bound {
            out.warning = Some(format!(
                "coefficient norm {:.3e} exceeded the divergence bound {:.3e}; the objective is likely \
                 not coercive, add a ridge penalty (omega > 0) or a bounded constraint",
                state.beta.norm(),
                cfg.divergence_bound
            ));
            break Termination::Diverged;
        }
        if out.iterations == cfg.max_iter {
            break Termination::MaxIter;
        }

        let direction = newton_direction(problem, &state, form)?;
        let decrement = -state.gradient.dot(&direction);
        let step = match armijo_step(
            |b| problem.objective(b),
            &state.beta,
            state.objective,
            &direction,
            &state.gradient,
            cfg,
        ) {
            Ok(s) => s,
            // Rounding noise in f swamps a predicted decrease below tolerance.
            Err(Error::Stagnation { .. } | Error::NotDescent { .. })
                if 0.5 * decrement.abs() <= cfg.obj_tol * (1.0 + state.objective.abs()) =>
            {
                break Termination::ObjTol;
            }
            Err(Error::Stagnation { halvings }) => {
                log::debug!("line search stagnated after {halvings} halvings");
                break Termination::MaxIter;
            }
            Err(e) => return Err(e),
        };
        out.iterations += 1;
        out.backtracks += step.halvings;

        let (mut next_beta, mut next_f) = (step.beta, step.objective);
        if cfg.qn_secants > 0 {
            history.push(state.beta.clone(), next_beta.clone());
            if history.is_full() {
                let pairs = history.pairs();
                if let Some((cand, fc)) = qn_accelerate(&pairs, |b| problem.objective(b), next_f) {
                    next_beta = cand;
                    next_f = fc;
                    out.accelerated += 1;
                }
            }
        }

        let moved = &next_beta - &state.beta;
        out.last_step_norm = moved.norm();
        last_step = Some(moved);
        let previous = state.objective;
        state = MmState::with_objective(problem, next_beta, next_f)?;
        traces.objective.push(state.objective);
        traces.grad_norm.push(state.grad_norm());
        if cfg.objective_converged(previous, state.objective) {
            break Termination::ObjTol;
        }
    };

    out.termination = termination;
    let curvature = match &last_step {
        Some(s) if termination.is_converged() && s.norm_squared() > 0.0 => {
            let h = problem.surrogate_hessian(&state.beta, form)?;
            s.dot(&h.apply(s)) / s.norm_squared()
        }
        _ => f64::INFINITY,
    };
    if curvature < cfg.flat_curvature {
        out.warning = Some(format!(
            "curvature {curvature:.3e} along the final step vanishes while the iterates keep moving; \
             the objective is likely not coercive, add a ridge penalty (omega > 0)"
        ));
        out.termination = Termination::Diverged;
    }
    out.state = state;
    Ok(out)
}

fn validate_inputs(family: Family, data: &Dataset, specs: &[ConstraintSpec], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    data.validate_responses(family)?;
    for s in specs {
        s.validate_dim(data.n_predictors())?;
    }
    Ok(())
}

/// Whether a fit on `data` takes the Woodbury path under `cfg`.
pub fn uses_woodbury(data: &Dataset, cfg: &SolverConfig) -> bool {
    match cfg.use_woodbury {
        WoodburyMode::Always => true,
        WoodburyMode::Never => false,
        WoodburyMode::Auto => (data.n_cases() as f64) < cfg.woodbury_crossover * data.n_predictors() as f64,
    }
}

/// Minimizes the distance-penalized objective, annealing the weights from
/// their values in `specs` up to `cfg.anneal_cap`.
pub fn fit(
    family: Family,
    data: &Dataset,
    specs: &[ConstraintSpec],
    cfg: &SolverConfig,
    beta0: Option<&DVector<f64>>,
) -> Result<FitResult> {
    validate_inputs(family, data, specs, cfg)?;
    let n = data.n_predictors();
    let mut beta = match beta0 {
        Some(b) if b.len() != n => {
            return Err(Error::DimensionMismatch {
                context: "initial coefficients",
                expected: n,
                actual: b.len(),
            })
        }
        Some(b) => b.clone(),
        None => DVector::zeros(n),
    };

    let mut problem = Problem::new(family, data, specs, cfg.ridge_omega)?;
    let woodbury = uses_woodbury(data, cfg) && problem.curvature_shift() > 0.0;
    let form = if woodbury {
        problem = problem.with_row_gram();
        HessianForm::Factored
    } else {
        HessianForm::Dense
    };

    let mut traces = Traces::default();
    let mut epochs = Vec::new();
    let (mut iterations, mut backtracks, mut accelerated) = (0, 0, 0);
    let mut last_step_norm = 0.0;
    let mut warning = None;
    let mut final_grad_norm;

    loop {
        let weights = problem.weights();
        let trace_start = traces.objective.len();
        let outcome = run_epoch(&problem, beta, form, cfg, &mut traces)?;
        let distances = problem.distances_sq(&outcome.state.beta)?;
        log::debug!(
            "epoch {} weights {:?}: {} iterations, {:?}, dist² {:?}",
            epochs.len(),
            weights,
            outcome.iterations,
            outcome.termination,
            distances
        );
        iterations += outcome.iterations;
        backtracks += outcome.backtracks;
        accelerated += outcome.accelerated;
        if outcome.iterations > 0 {
            last_step_norm = outcome.last_step_norm;
        }
        final_grad_norm = outcome.state.grad_norm();
        epochs.push(EpochRecord {
            weights: weights.clone(),
            trace_start,
            trace_end: traces.objective.len(),
            iterations: outcome.iterations,
            backtracks: outcome.backtracks,
            accelerated_steps: outcome.accelerated,
            termination: outcome.termination,
            distances_sq: distances.clone(),
        });
        beta = outcome.state.beta;

        if let Some(w) = outcome.warning {
            log::warn!("{w}");
            warning = Some(w);
            break;
        }
        let at_cap = weights.iter().all(|&w| w >= cfg.anneal_cap);
        let feasible = distances.iter().all(|&d| d.sqrt() <= cfg.grad_tol);
        if specs.is_empty() || cfg.anneal_rho == 1.0 || at_cap || feasible {
            break;
        }
        let next: Vec<f64> = weights
            .iter()
            .map(|&w| (w * cfg.anneal_rho).min(cfg.anneal_cap).max(w))
            .collect();
        problem.set_weights(&next);
    }

    let mut projected = beta.clone();
    for s in specs {
        projected = s.project(&projected)?;
    }
    let last = epochs.last().expect("at least one epoch runs");
    let termination = last.termination;
    Ok(FitResult {
        constraint_distances: last.distances_sq.clone(),
        final_weights: last.weights.clone(),
        beta,
        projected_beta: projected,
        objective_trace: traces.objective,
        grad_norm_trace: traces.grad_norm,
        iterations,
        total_backtracks: backtracks,
        accelerated_steps: accelerated,
        converged: termination.is_converged(),
        termination,
        epochs,
        final_grad_norm,
        last_step_norm,
        used_woodbury: woodbury,
        coercivity_warning: warning,
    })
}
