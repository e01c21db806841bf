//! Seeded synthetic data, recovery metrics and cross-validation.
//!
//! Every generator is a pure function of its arguments: the same seed
//! yields a bitwise-identical dataset.

pub mod bench;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::glm::{neg_loglik, Dataset, Family};
use crate::matrix_reg::MatrixDataset;
use crate::solver::{fit, SolverConfig};

/// Simulated Poisson cases whose linear predictor exceeds this are redrawn.
pub const POISSON_SIM_THETA_MAX: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum EffectLaw {
    /// Magnitude uniform on `[lo, hi]`, sign `±` with equal probability.
    UniformSigned { lo: f64, hi: f64 },
}

impl Default for EffectLaw {
    fn default() -> Self {
        EffectLaw::UniformSigned { lo: 0.5, hi: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    /// Number of predictors.
    pub n: usize,
    /// Number of cases.
    pub m: usize,
    pub k_true: usize,
    pub family: Family,
    /// Standard deviation of the design entries.
    pub design_sd: f64,
    pub effect_law: EffectLaw,
    pub seed: u64,
}

impl SimSpec {
    /// Design entries of variance 0.1 and effects uniform on `±[0.5, 1.5]`.
    pub fn standard(family: Family, n: usize, m: usize, k_true: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            k_true,
            family,
            design_sd: 0.1f64.sqrt(),
            effect_law: EffectLaw::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("simulation needs n > 0 and m > 0".into()));
        }
        if self.k_true > self.n {
            return Err(Error::InvalidConfig(format!(
                "k_true = {} exceeds n = {}",
                self.k_true, self.n
            )));
        }
        if !(self.design_sd > 0.0 && self.design_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "design_sd must be positive, got {}",
                self.design_sd
            )));
        }
        let EffectLaw::UniformSigned { lo, hi } = self.effect_law;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("effect range [{lo}, {hi}] is invalid")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimData {
    pub data: Dataset,
    pub beta_true: DVector<f64>,
    /// Cases redrawn because their Poisson mean was too large.
    pub regenerated: usize,
}

fn draw_response<R: Rng>(family: Family, theta: f64, rng: &mut R) -> f64 {
    let mu = family.mean(theta);
    match family {
        Family::Gaussian => mu + rng.sample::<f64, _>(StandardNormal),
        Family::Poisson => {
            if mu <= 0.0 {
                0.0
            } else {
                Poisson::new(mu).expect("positive finite mean").sample(rng)
            }
        }
        Family::Bernoulli => {
            let p = mu.clamp(0.0, 1.0);
            f64::from(u8::from(Bernoulli::new(p).expect("probability in [0, 1]").sample(rng)))
        }
    }
}

/// Sparse coefficients with a uniformly random support, a normal design and
/// responses drawn from `family` at mean `ψ'(xᵢᵗβ)`.
pub fn gen_sparse_glm(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let EffectLaw::UniformSigned { lo, hi } = spec.effect_law;

    let mut beta = DVector::zeros(spec.n);
    let mut support = sample(&mut rng, spec.n, spec.k_true).into_vec();
    support.sort_unstable();
    for &j in &support {
        let magnitude = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        beta[j] = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    }

    let design = Normal::new(0.0, spec.design_sd).expect("validated sd");
    let mut x = DMatrix::zeros(spec.m, spec.n);
    let mut y = DVector::zeros(spec.m);
    let mut regenerated = 0;
    for i in 0..spec.m {
        loop {
            let row: Vec<f64> = (0..spec.n).map(|_| design.sample(&mut rng)).collect();
            let theta: f64 = support.iter().map(|&j| row[j] * beta[j]).sum();
            if spec.family == Family::Poisson && theta > POISSON_SIM_THETA_MAX {
                regenerated += 1;
                continue;
            }
            x.row_mut(i).copy_from_slice(&row);
            y[i] = draw_response(spec.family, theta, &mut rng);
            break;
        }
    }
    Ok(SimData {
        data: Dataset::new(x, y)?,
        beta_true: beta,
        regenerated,
    })
}

/// `size × size` cross: a horizontal and a vertical centered band of width
/// `band`, both at level `amplitude`, zero elsewhere. The matrix is
/// `a (r 1ᵗ + (1 − r) cᵗ)` for band indicators `r` and `c`, hence rank 2.
pub fn gen_cross_signal(size: usize, band: usize, amplitude: f64) -> Result<DMatrix<f64>> {
    if band >= size {
        return Err(Error::InvalidConfig(format!(
            "band {band} must be smaller than size {size}"
        )));
    }
    let start = (size - band) / 2;
    let in_band = |i: usize| (start..start + band).contains(&i);
    Ok(DMatrix::from_fn(size, size, |i, j| {
        if in_band(i) || in_band(j) {
            amplitude
        } else {
            0.0
        }
    }))
}

/// `m` standard normal predictor matrices shaped like `b0` with Gaussian
/// responses `trace(Xᵢᵗ B₀) + ε zᵢ`.
pub fn gen_matrix_responses(b0: &DMatrix<f64>, m: usize, eps: f64, seed: u64) -> Result<MatrixDataset> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise level must be nonnegative, got {eps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, q) = b0.shape();
    let mut predictors = Vec::with_capacity(m);
    let mut y = DVector::zeros(m);
    for i in 0..m {
        let x = DMatrix::from_fn(p, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = if eps > 0.0 {
            eps * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        y[i] = x.dot(b0) + noise;
        predictors.push(x);
    }
    MatrixDataset::new(predictors, y)
}

#[derive(Debug, Clone)]
pub struct IsotonicData {
    /// Identity design, one case per coefficient.
    pub data: Dataset,
    /// Nondecreasing Poisson means.
    pub means: DVector<f64>,
}

/// Poisson counts whose means are sorted uniform draws on `[lo, hi]`.
pub fn gen_isotonic_poisson(n: usize, lo: f64, hi: f64, seed: u64) -> Result<IsotonicData> {
    if n == 0 || !(0.0 < lo && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "isotonic generator needs n > 0 and 0 < lo ≤ hi, got n={n}, [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..n)
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();
    means.sort_by(f64::total_cmp);
    let y = DVector::from_iterator(
        n,
        means
            .iter()
            .map(|&mu| Poisson::new(mu).expect("positive mean").sample(&mut rng)),
    );
    Ok(IsotonicData {
        data: Dataset::new(DMatrix::identity(n, n), y)?,
        means: DVector::from_vec(means),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `‖β̂ − β₀‖² / n`.
    pub mse: f64,
    /// `|β̂ᵢ − β₀ᵢ| / |β₀ᵢ|` over the true support, in index order.
    pub relative_error: Vec<f64>,
    pub support_precision: f64,
    pub support_recall: f64,
    /// Held-out error rate of `1{ψ'(xᵗβ̂) > ½}`; Bernoulli only.
    pub misclassification: Option<f64>,
}

/// Recovery metrics of an estimate, normally the projected one, whose
/// nonzero entries define the estimated support.
pub fn metrics(
    family: Family,
    beta_hat: &DVector<f64>,
    beta_true: &DVector<f64>,
    data_test: Option<&Dataset>,
) -> Result<Metrics> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::DimensionMismatch {
            context: "estimate vs true coefficients",
            expected: beta_true.len(),
            actual: beta_hat.len(),
        });
    }
    let n = beta_true.len();
    let mse = (beta_hat - beta_true).norm_squared() / n as f64;
    let relative_error = beta_true
        .iter()
        .zip(beta_hat.iter())
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, h)| (h - t).abs() / t.abs())
        .collect();
    let est = beta_hat.iter().filter(|b| **b != 0.0).count();
    let truth = beta_true.iter().filter(|b| **b != 0.0).count();
    let hits = beta_hat
        .iter()
        .zip(beta_true.iter())
        .filter(|(h, t)| **h != 0.0 && **t != 0.0)
        .count();
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let misclassification = match (family, data_test) {
        (Family::Bernoulli, Some(test)) => {
            let eta = test.linear_predictor(beta_hat)?;
            let wrong = eta
                .iter()
                .zip(test.y.iter())
                .filter(|(t, y)| f64::from(u8::from(family.mean(**t) > 0.5)) != **y)
                .count();
            Some(wrong as f64 / test.n_cases() as f64)
        }
        _ => None,
    };
    Ok(Metrics {
        mse,
        relative_error,
        support_precision: ratio(hits, est),
        support_recall: ratio(hits, truth),
        misclassification,
    })
}

/// `|A ∩ B| / |A ∪ B|` of two masks; 1 when both are empty.
pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Entries strictly above half the largest entry.
pub fn half_max_support(b: &DMatrix<f64>) -> Vec<bool> {
    let max = b.max();
    b.iter().map(|&v| v > 0.5 * max).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    pub chosen: usize,
    /// Held-out negative log-likelihood per case for each level; `None`
    /// marks a level whose fit failed on some fold.
    pub losses: Vec<(usize, Option<f64>)>,
}

/// Deterministic assignment of `m` cases to `folds` folds.
pub fn fold_assignment(m: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, case) in order.into_iter().enumerate() {
        out[pos % folds].push(case);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// K-fold selection of a constraint level by held-out negative
/// log-likelihood at the projected estimate. Smaller levels count as more
/// constrained and win ties.
pub fn cross_validate<F>(
    family: Family,
    data: &Dataset,
    constraint_family: F,
    levels: &[usize],
    folds: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<CvOutcome>
where
    F: Fn(usize) -> Result<Vec<ConstraintSpec>>,
{
    if folds < 2 || folds > data.n_cases() {
        return Err(Error::InvalidConfig(format!(
            "need 2 ≤ folds ≤ {} cases, got {folds}",
            data.n_cases()
        )));
    }
    if levels.is_empty() {
        return Err(Error::InvalidConfig("no candidate levels".into()));
    }
    let assignment = fold_assignment(data.n_cases(), folds, seed);
    let mut losses = Vec::with_capacity(levels.len());
    for &level in levels {
        let specs = constraint_family(level)?;
        let mut total = 0.0;
        let mut ok = true;
        for held in &assignment {
            let train: Vec<usize> = (0..data.n_cases()).filter(|i| held.binary_search(i).is_err()).collect();
            let outcome = fit(family, &data.select_cases(&train), &specs, cfg, None)
                .and_then(|r| neg_loglik(family, &data.select_cases(held), &r.projected_beta));
            match outcome {
                Ok(loss) => total += loss * held.len() as f64,
                Err(e) => {
                    log::warn!("level {level} excluded: fold fit failed: {e}");
                    ok = false;
                    break;
                }
            }
        }
        losses.push((level, ok.then(|| total / data.n_cases() as f64)));
    }
    let chosen = losses
        .iter()
        .filter_map(|(l, loss)| loss.map(|v| (*l, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(l, _)| l)
        .ok_or_else(|| Error::Numerical("every candidate level failed".into()))?;
    Ok(CvOutcome { chosen, losses })
}
