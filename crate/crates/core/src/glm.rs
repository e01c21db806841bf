//! Exponential families under canonical links.
//!
//! With the dispersion fixed at one, the log-likelihood of a case with
//! natural parameter `θ = xᵗβ` is `y·θ − ψ(θ)` up to terms free of `β`.
//! Everything in this module is expressed through the cumulant `ψ` and its
//! first two derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest natural parameter for which `exp(θ)` is evaluated for Poisson
/// responses.
pub const POISSON_THETA_CAP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Poisson,
    Bernoulli,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Poisson => "poisson",
            Family::Bernoulli => "bernoulli",
        }
    }

    /// Cumulant `ψ(θ)`.
    pub fn cumulant(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * theta * theta,
            Family::Poisson => theta.exp(),
            // ln(1 + e^θ) without overflow for large θ.
            Family::Bernoulli => theta.max(0.0) + (-theta.abs()).exp().ln_1p(),
        }
    }

    /// Mean `ψ'(θ)`, which is also the canonical inverse link.
    pub fn mean(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => theta,
            Family::Poisson => theta.exp(),
            Family::Bernoulli => {
                if theta >= 0.0 {
                    1.0 / (1.0 + (-theta).exp())
                } else {
                    let e = theta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Variance function `ψ''(θ)`.
    pub fn variance(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Poisson => theta.exp(),
            Family::Bernoulli => {
                let mu = self.mean(theta);
                mu * (1.0 - mu)
            }
        }
    }

    /// Canonical link `h⁻¹(μ)`.
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Poisson => mu.ln(),
            Family::Bernoulli => (mu / (1.0 - mu)).ln(),
        }
    }

    /// Whether `y` is an admissible response for this family.
    pub fn valid_response(self, y: f64) -> bool {
        match self {
            Family::Gaussian => y.is_finite(),
            Family::Poisson => y.is_finite() && y >= 0.0 && y.fract() == 0.0,
            Family::Bernoulli => y == 0.0 || y == 1.0,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "poisson" => Ok(Family::Poisson),
            "bernoulli" | "logistic" | "binomial" => Ok(Family::Bernoulli),
            other => Err(Error::InvalidData(format!("unknown family `{other}`"))),
        }
    }
}

/// Design matrix (cases × predictors) and response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    /// Builds a dataset after checking shape and finiteness. Family-specific
    /// response checks are left to [`Dataset::validate_responses`].
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "design must have at least one row and column, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                context: "response length vs design rows",
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % x.nrows(), pos / x.nrows());
            return Err(Error::InvalidData(format!("design entry ({i}, {j}) is not finite")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("response {i} is not finite")));
        }
        Ok(Self { x, y })
    }

    pub fn n_cases(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate_responses(&self, family: Family) -> Result<()> {
        match self.y.iter().position(|&v| !family.valid_response(v)) {
            Some(index) => Err(Error::InvalidResponse {
                family: family.name(),
                index,
                value: self.y[index],
            }),
            None => Ok(()),
        }
    }

    /// Subset of cases, in the given order.
    pub fn select_cases(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
        }
    }

    pub fn linear_predictor(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        check_beta(self, beta)?;
        Ok(&self.x * beta)
    }
}

fn check_beta(data: &Dataset, beta: &DVector<f64>) -> Result<()> {
    if beta.len() != data.n_predictors() {
        return Err(Error::DimensionMismatch {
            context: "coefficient length vs design columns",
            expected: data.n_predictors(),
            actual: beta.len(),
        });
    }
    Ok(())
}

/// Average negative log-likelihood `(1/m) Σ [ψ(xⱼᵗβ) − yⱼ xⱼᵗβ]`.
pub fn neg_loglik(family: Family, data: &Dataset, beta: &DVector<f64>) -> Result<f64> {
    let eta = data.linear_predictor(beta)?;
    neg_loglik_from_eta(family, &data.y, &eta)
}

pub(crate) fn neg_loglik_from_eta(family: Family, y: &DVector<f64>, eta: &DVector<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (case, (&theta, &yj)) in eta.iter().zip(y.iter()).enumerate() {
        if family == Family::Poisson && theta > POISSON_THETA_CAP {
            return Err(Error::NonFiniteObjective { case, theta });
        }
        let term = family.cumulant(theta) - yj * theta;
        if !term.is_finite() {
            return Err(Error::NonFiniteObjective { case, theta });
        }
        total += term;
    }
    Ok(total / y.len() as f64)
}

/// Score `Σᵢ [yᵢ − ψ'(xᵢᵗβ)] xᵢ` of the unscaled log-likelihood.
pub fn score(family: Family, data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let eta = data.linear_predictor(beta)?;
    Ok(score_from_eta(family, data, &eta))
}

pub(crate) fn score_from_eta(family: Family, data: &Dataset, eta: &DVector<f64>) -> DVector<f64> {
    let resid = DVector::from_iterator(
        eta.len(),
        eta.iter().zip(data.y.iter()).map(|(&t, &y)| y - family.mean(t)),
    );
    data.x.tr_mul(&resid)
}

/// Per-case curvature `ψ''(xᵢᵗβ)`.
pub fn case_variances(family: Family, eta: &DVector<f64>) -> DVector<f64> {
    eta.map(|t| family.variance(t))
}

/// Fisher information `Σᵢ ψ''(xᵢᵗβ) xᵢxᵢᵗ`.
pub fn information(family: Family, data: &Dataset, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    let eta = data.linear_predictor(beta)?;
    Ok(weighted_gram(&data.x, &case_variances(family, &eta)))
}

/// `Xᵗ diag(w) X` for non-negative weights.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = x.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= w[i].sqrt();
    }
    scaled.tr_mul(&scaled)
}

/// `0·ln(0/q) := 0`.
fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// Bregman divergence `D_ζ(p, q)` generated by the convex conjugate of the
/// cumulant. The negative log-likelihood of `y` at mean `μ` equals
/// `D_ζ(y, μ)` plus a term depending on `y` alone.
pub fn bregman_divergence(family: Family, p: f64, q: f64) -> Result<f64> {
    match family {
        Family::Gaussian => {
            if !p.is_finite() {
                return Err(Error::Domain {
                    argument: "p",
                    value: p,
                });
            }
            if !q.is_finite() {
                return Err(Error::Domain {
                    argument: "q",
                    value: q,
                });
            }
            Ok(0.5 * (p - q) * (p - q))
        }
        Family::Poisson => {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Domain {
                    argument: "p",
                    value: p,
                });
            }
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::Domain {
                    argument: "q",
                    value: q,
                });
            }
            Ok(xlogy_ratio(p, q) - p + q)
        }
        Family::Bernoulli => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain {
                    argument: "p",
                    value: p,
                });
            }
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Domain {
                    argument: "q",
                    value: q,
                });
            }
            Ok(xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn identity_gaussian() -> Dataset {
        Dataset::new(DMatrix::identity(2, 2), dvector![1.0, 2.0]).unwrap()
    }

    #[test]
    fn neg_loglik_examples() {
        let d = identity_gaussian();
        assert_eq!(neg_loglik(Family::Gaussian, &d, &dvector![0.0, 0.0]).unwrap(), 0.0);
        let v = neg_loglik(Family::Gaussian, &d, &dvector![1.0, 2.0]).unwrap();
        assert!((v + 1.25).abs() < 1e-15);

        let b = Dataset::new(dmatrix![1.0], dvector![1.0]).unwrap();
        let v = neg_loglik(Family::Bernoulli, &b, &dvector![0.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn poisson_overflow_names_case() {
        let d = Dataset::new(dmatrix![1.0; 800.0], dvector![0.0, 1.0]).unwrap();
        match neg_loglik(Family::Poisson, &d, &dvector![1.0]) {
            Err(Error::NonFiniteObjective { case, .. }) => assert_eq!(case, 1),
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn bernoulli_cumulant_is_stable() {
        let f = Family::Bernoulli;
        assert!((f.cumulant(800.0) - 800.0).abs() < 1e-12);
        assert!(f.cumulant(-800.0) >= 0.0 && f.cumulant(-800.0) < 1e-300);
        assert!((f.mean(-800.0)).abs() < 1e-300);
        assert_eq!(f.mean(800.0), 1.0);
    }

    #[test]
    fn score_examples() {
        let d = identity_gaussian();
        assert_eq!(
            score(Family::Gaussian, &d, &dvector![0.0, 0.0]).unwrap(),
            dvector![1.0, 2.0]
        );
        let b = Dataset::new(dmatrix![1.0], dvector![1.0]).unwrap();
        assert_eq!(score(Family::Bernoulli, &b, &dvector![0.0]).unwrap(), dvector![0.5]);
        let p = Dataset::new(dmatrix![1.0], dvector![2.0]).unwrap();
        assert_eq!(score(Family::Poisson, &p, &dvector![0.0]).unwrap(), dvector![1.0]);
    }

    #[test]
    fn information_examples() {
        let d = identity_gaussian();
        assert_eq!(
            information(Family::Gaussian, &d, &dvector![3.0, -1.0]).unwrap(),
            DMatrix::identity(2, 2)
        );
        let b = Dataset::new(dmatrix![1.0; 1.0], dvector![0.0, 1.0]).unwrap();
        assert_eq!(
            information(Family::Bernoulli, &b, &dvector![0.0]).unwrap(),
            dmatrix![0.5]
        );
        let p = Dataset::new(dmatrix![1.0], dvector![0.0]).unwrap();
        let info = information(Family::Poisson, &p, &dvector![3f64.ln()]).unwrap();
        assert!((info[(0, 0)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn bregman_examples() {
        assert_eq!(bregman_divergence(Family::Poisson, 2.0, 2.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let v = bregman_divergence(Family::Poisson, 1.0, e).unwrap();
        assert!((v - (e - 2.0)).abs() < 1e-15);
        assert_eq!(bregman_divergence(Family::Gaussian, 3.0, 1.0).unwrap(), 2.0);
        assert_eq!(bregman_divergence(Family::Poisson, 0.0, 1.5).unwrap(), 1.5);
        assert!(bregman_divergence(Family::Bernoulli, 1.0, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn bregman_domain_errors() {
        assert!(matches!(
            bregman_divergence(Family::Poisson, 1.0, 0.0),
            Err(Error::Domain { argument: "q", .. })
        ));
        assert!(matches!(
            bregman_divergence(Family::Bernoulli, 1.5, 0.5),
            Err(Error::Domain { argument: "p", .. })
        ));
        assert!(matches!(
            bregman_divergence(Family::Bernoulli, 0.5, 1.0),
            Err(Error::Domain { argument: "q", .. })
        ));
    }

    #[test]
    fn response_validation() {
        let d = Dataset::new(DMatrix::identity(3, 1), dvector![0.0, 1.0, 2.5]).unwrap();
        assert!(d.validate_responses(Family::Gaussian).is_ok());
        assert!(matches!(
            d.validate_responses(Family::Poisson),
            Err(Error::InvalidResponse { index: 2, .. })
        ));
        assert!(matches!(
            d.validate_responses(Family::Bernoulli),
            Err(Error::InvalidResponse { index: 2, .. })
        ));
    }

    #[test]
    fn dataset_rejects_bad_shapes() {
        assert!(Dataset::new(DMatrix::identity(2, 2), dvector![1.0]).is_err());
        assert!(Dataset::new(DMatrix::zeros(0, 2), DVector::zeros(0)).is_err());
        assert!(Dataset::new(dmatrix![f64::NAN], dvector![1.0]).is_err());
    }

    #[test]
    fn link_inverts_mean() {
        for fam in [Family::Gaussian, Family::Poisson, Family::Bernoulli] {
            for t in [-3.0, -0.2, 0.0, 1.7] {
                assert!((fam.link(fam.mean(t)) - t).abs() < 1e-12, "{fam} at {t}");
            }
        }
    }
}
