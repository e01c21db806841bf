use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::glm::{self, Dataset, Family};
use crate::linalg::{solve_spd, LowRankSystem};

/// The distance-penalized objective
/// `f(β) = ½ Σᵢ vᵢ dist(β, Cᵢ)² − (1/m) Σⱼ L(β | yⱼ, xⱼ) + ω ‖β‖²`
/// together with its gradient and MM surrogate Hessian.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    family: Family,
    data: &'a Dataset,
    specs: Vec<ConstraintSpec>,
    omega: f64,
    row_gram: Option<DMatrix<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(family: Family, data: &'a Dataset, specs: &[ConstraintSpec], omega: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ridge omega must be nonnegative, got {omega}"
            )));
        }
        for s in specs {
            s.validate_dim(data.n_predictors())?;
        }
        Ok(Self {
            family,
            data,
            specs: specs.to_vec(),
            omega,
            row_gram: None,
        })
    }

    /// Caches `X Xᵗ` so each factored Hessian costs `O(m²)` to assemble.
    pub fn with_row_gram(mut self) -> Self {
        if self.row_gram.is_none() {
            let x = &self.data.x;
            self.row_gram = Some(x * x.transpose());
        }
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn specs(&self) -> &[ConstraintSpec] {
        &self.specs
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn weights(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.weight).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        for (s, &w) in self.specs.iter_mut().zip(weights) {
            s.weight = w;
        }
    }

    /// `Σᵢ vᵢ + 2ω`, the identity multiple in the surrogate Hessian.
    pub fn curvature_shift(&self) -> f64 {
        self.specs.iter().map(|s| s.weight).sum::<f64>() + 2.0 * self.omega
    }

    pub fn objective(&self, beta: &DVector<f64>) -> Result<f64> {
        let eta = self.data.linear_predictor(beta)?;
        let mut f = glm::neg_loglik_from_eta(self.family, &self.data.y, &eta)?;
        for s in &self.specs {
            f += 0.5 * s.weight * s.distance_sq(beta)?;
        }
        Ok(f + self.omega * beta.norm_squared())
    }

    /// `Σᵢ vᵢ (β − P_{Cᵢ}(β)) − (1/m) ∇L(β) + 2ωβ`.
    pub fn gradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        let eta = self.data.linear_predictor(beta)?;
        let m = self.data.n_cases() as f64;
        let mut g = glm::score_from_eta(self.family, self.data, &eta) * (-1.0 / m);
        for s in &self.specs {
            let p = s.project(beta)?;
            g += (beta - p) * s.weight;
        }
        g += beta * (2.0 * self.omega);
        Ok(g)
    }

    /// Surrogate Hessian `(Σᵢ vᵢ + 2ω) I + (1/m) Σⱼ ψ''(xⱼᵗβ) xⱼxⱼᵗ`.
    pub fn surrogate_hessian(&'a self, beta: &DVector<f64>, form: HessianForm) -> Result<SurrogateHessian<'a>> {
        let eta = self.data.linear_predictor(beta)?;
        let m = self.data.n_cases() as f64;
        let weights = glm::case_variances(self.family, &eta) / m;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical(
                "case curvature overflowed while forming the Hessian".into(),
            ));
        }
        let shift = self.curvature_shift();
        match form {
            HessianForm::Factored if shift > 0.0 => {
                let scale = weights.map(f64::sqrt);
                let mut inner = match &self.row_gram {
                    Some(g) => {
                        let mut inner = g.clone();
                        for j in 0..inner.ncols() {
                            for i in 0..inner.nrows() {
                                inner[(i, j)] *= scale[i] * scale[j];
                            }
                        }
                        inner
                    }
                    None => {
                        let mut xs = self.data.x.clone();
                        for (i, mut row) in xs.row_iter_mut().enumerate() {
                            row *= scale[i];
                        }
                        &xs * xs.transpose()
                    }
                };
                for i in 0..inner.nrows() {
                    inner[(i, i)] += shift;
                }
                let chol = inner
                    .cholesky()
                    .ok_or_else(|| Error::Numerical("Woodbury inner system is not positive definite".into()))?;
                Ok(SurrogateHessian::Factored(FactoredHessian {
                    shift,
                    scale,
                    x: &self.data.x,
                    inner: chol,
                }))
            }
            _ => {
                let mut h = glm::weighted_gram(&self.data.x, &weights);
                for i in 0..h.nrows() {
                    h[(i, i)] += shift;
                }
                Ok(SurrogateHessian::Dense(h))
            }
        }
    }

    /// Per-constraint squared distances at `beta`.
    pub fn distances_sq(&self, beta: &DVector<f64>) -> Result<Vec<f64>> {
        self.specs.iter().map(|s| s.distance_sq(beta)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianForm {
    Dense,
    Factored,
}

/// `vIₙ + Xᵗ diag(s²) X` kept in factored form; solves go through the
/// Woodbury identity with an m×m Cholesky factor of `vIₘ + diag(s) X Xᵗ diag(s)`.
#[derive(Debug, Clone)]
pub struct FactoredHessian<'a> {
    shift: f64,
    scale: DVector<f64>,
    x: &'a DMatrix<f64>,
    inner: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl FactoredHessian<'_> {
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let xv = (self.x * v).component_mul(&self.scale).component_mul(&self.scale);
        v * self.shift + self.x.tr_mul(&xv)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let rhs = (self.x * b).component_mul(&self.scale);
        let z = self.inner.solve(&rhs).component_mul(&self.scale);
        (b - self.x.tr_mul(&z)) / self.shift
    }

    /// The same operator as a generic `vI + UV` system with `U = Xᵗ diag(s)`, `V = Uᵗ`.
    pub fn to_low_rank(&self) -> LowRankSystem {
        let mut u = self.x.transpose();
        for (j, mut col) in u.column_iter_mut().enumerate() {
            col *= self.scale[j];
        }
        let w = u.transpose();
        LowRankSystem { v: self.shift, u, w }
    }
}

#[derive(Debug, Clone)]
pub enum SurrogateHessian<'a> {
    Dense(DMatrix<f64>),
    Factored(FactoredHessian<'a>),
}

impl SurrogateHessian<'_> {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            SurrogateHessian::Dense(h) => h * v,
            SurrogateHessian::Factored(f) => f.apply(v),
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            SurrogateHessian::Dense(h) => solve_spd(h, b),
            SurrogateHessian::Factored(f) => Ok(f.solve(b)),
        }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self, SurrogateHessian::Factored(_))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SurrogateHessian::Dense(h) => h.clone(),
            SurrogateHessian::Factored(f) => f.to_low_rank().assemble(),
        }
    }
}

pub fn objective(
    family: Family,
    data: &Dataset,
    specs: &[ConstraintSpec],
    beta: &DVector<f64>,
    omega: f64,
) -> Result<f64> {
    Problem::new(family, data, specs, omega)?.objective(beta)
}

pub fn objective_gradient(
    family: Family,
    data: &Dataset,
    specs: &[ConstraintSpec],
    beta: &DVector<f64>,
    omega: f64,
) -> Result<DVector<f64>> {
    Problem::new(family, data, specs, omega)?.gradient(beta)
}

/// Assembled surrogate Hessian at `beta`.
pub fn surrogate_hessian(
    family: Family,
    data: &Dataset,
    specs: &[ConstraintSpec],
    beta: &DVector<f64>,
    omega: f64,
) -> Result<DMatrix<f64>> {
    let p = Problem::new(family, data, specs, omega)?;
    Ok(p.surrogate_hessian(beta, HessianForm::Dense)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintSet;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_gaussian() -> Dataset {
        Dataset::new(DMatrix::identity(2, 2), dvector![1.0, 2.0]).unwrap()
    }

    /// Gaussian data with a zero design row contributes a constant to the
    /// likelihood and nothing to its derivatives.
    fn null_likelihood(n: usize) -> Dataset {
        Dataset::new(DMatrix::zeros(1, n), dvector![0.0]).unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = identity_gaussian();
        let f = objective(Family::Gaussian, &d, &[], &dvector![1.0, 2.0], 0.0).unwrap();
        assert!((f + 1.25).abs() < 1e-15);

        let sparse = ConstraintSpec::new(ConstraintSet::Sparsity { k: 2 }, 5.0).unwrap();
        let f2 = objective(Family::Gaussian, &d, &[sparse], &dvector![1.0, 2.0], 0.0).unwrap();
        assert_eq!(f, f2);

        let ball = ConstraintSpec::new(
            ConstraintSet::Ball {
                center: vec![0.0, 0.0],
                radius: 5.0,
            },
            2.0,
        )
        .unwrap();
        let f = objective(Family::Gaussian, &null_likelihood(2), &[ball], &dvector![6.0, 8.0], 0.0).unwrap();
        assert!((f - 25.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let d = identity_gaussian();
        let beta = dvector![0.5, 1.5];
        let nn = ConstraintSpec::new(ConstraintSet::NonNegative, 3.0).unwrap();
        let g = objective_gradient(Family::Gaussian, &d, &[nn], &beta, 0.0).unwrap();
        let s = glm::score(Family::Gaussian, &d, &beta).unwrap() * -0.5;
        assert!((g - s).norm() < 1e-15);

        let nn = ConstraintSpec::new(ConstraintSet::NonNegative, 1.0).unwrap();
        let g = objective_gradient(Family::Gaussian, &null_likelihood(2), &[nn], &dvector![-2.0, 3.0], 0.0).unwrap();
        assert_eq!(g, dvector![-2.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for family in [Family::Gaussian, Family::Poisson, Family::Bernoulli] {
            let (m, n) = (12, 5);
            let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(m, |_, _| match family {
                Family::Gaussian => rng.random_range(-2.0..2.0),
                Family::Poisson => rng.random_range(0..4) as f64,
                Family::Bernoulli => rng.random_range(0..2) as f64,
            });
            let data = Dataset::new(x, y).unwrap();
            let specs = vec![
                ConstraintSpec::new(ConstraintSet::Sparsity { k: 2 }, 0.7).unwrap(),
                ConstraintSpec::new(
                    ConstraintSet::Ball {
                        center: vec![0.0; n],
                        radius: 0.5,
                    },
                    1.3,
                )
                .unwrap(),
            ];
            let p = Problem::new(family, &data, &specs, 0.01).unwrap();
            let beta = DVector::from_fn(n, |i, _| 0.3 * (i as f64) - 0.5 + rng.random_range(-0.05..0.05));
            let g = p.gradient(&beta).unwrap();
            let h = 1e-6;
            for i in 0..n {
                let mut up = beta.clone();
                up[i] += h;
                let mut dn = beta.clone();
                dn[i] -= h;
                let fd = (p.objective(&up).unwrap() - p.objective(&dn).unwrap()) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()),
                    "{family} coord {i}: {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn hessian_examples() {
        let d = identity_gaussian();
        let nn = ConstraintSpec::new(ConstraintSet::NonNegative, 1.0).unwrap();
        let h = surrogate_hessian(Family::Gaussian, &d, &[nn], &dvector![0.0, 0.0], 0.0).unwrap();
        assert!((h - DMatrix::identity(2, 2) * 1.5).norm() < 1e-15);

        let specs = vec![
            ConstraintSpec::new(ConstraintSet::NonNegative, 1.0).unwrap(),
            ConstraintSpec::new(ConstraintSet::Isotone, 2.0).unwrap(),
        ];
        let h = surrogate_hessian(
            Family::Gaussian,
            &null_likelihood(3),
            &specs,
            &dvector![1.0, 0.0, 2.0],
            0.0,
        )
        .unwrap();
        assert_eq!(h, DMatrix::identity(3, 3) * 3.0);
    }

    #[test]
    fn factored_and_dense_hessians_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (m, n) = (6, 20);
        let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(m, |_, _| rng.random_range(0..3) as f64);
        let data = Dataset::new(x, y).unwrap();
        let specs = vec![ConstraintSpec::new(ConstraintSet::Sparsity { k: 3 }, 0.4).unwrap()];
        let beta = DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3));
        for cached in [false, true] {
            let mut p = Problem::new(Family::Poisson, &data, &specs, 0.0).unwrap();
            if cached {
                p = p.with_row_gram();
            }
            let dense = p.surrogate_hessian(&beta, HessianForm::Dense).unwrap();
            let fact = p.surrogate_hessian(&beta, HessianForm::Factored).unwrap();
            assert!(fact.is_factored());
            for _ in 0..20 {
                let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                assert!((dense.apply(&v) - fact.apply(&v)).norm() < 1e-10);
                let a = dense.solve(&v).unwrap();
                let b = fact.solve(&v).unwrap();
                assert!((&a - &b).norm() <= 1e-10 * a.norm());
            }
            assert!((dense.to_dense() - fact.to_dense()).norm() < 1e-10);
        }
    }

    #[test]
    fn factored_falls_back_without_shift() {
        let d = identity_gaussian();
        let p = Problem::new(Family::Gaussian, &d, &[], 0.0).unwrap();
        let h = p.surrogate_hessian(&dvector![0.0, 0.0], HessianForm::Factored).unwrap();
        assert!(!h.is_factored());
        assert!((h.to_dense() - dmatrix![0.5, 0.0; 0.0, 0.5]).norm() < 1e-15);
    }
}
