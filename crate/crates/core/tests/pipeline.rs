mod common;

use common::*;
use distglm::experiments::cross_validate;
use distglm::{
    fit, fit_matrix, ConstraintSet, ConstraintSpec, Dataset, Family, MatrixDataset, SolverConfig, WoodburyMode,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian data with `XᵗX = m I` and a `k`-sparse truth of unit effects.
fn orthonormal_problem(seed: u64, m: usize, n: usize, k: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = gaussian_matrix(&mut rng, m, n).qr().q();
    let x = q * (m as f64).sqrt();
    let mut beta = DVector::zeros(n);
    for b in beta.iter_mut().take(k) {
        *b = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let y = &x * beta + gaussian_vector(&mut rng, m, 1.0);
    Dataset::new(x, y).unwrap()
}

fn sparsity(level: usize) -> distglm::Result<Vec<ConstraintSpec>> {
    Ok(vec![ConstraintSpec::new(ConstraintSet::Sparsity { k: level }, 0.1)?])
}

#[test]
fn cross_validation_does_not_overselect() {
    let (m, n, k) = (120, 15, 5);
    let levels: Vec<usize> = (k - 2..=k + 2).collect();
    let cfg = SolverConfig::default();
    let good = (0..20)
        .filter(|&seed| {
            let data = orthonormal_problem(seed, m, n, k);
            let cv = cross_validate(Family::Gaussian, &data, sparsity, &levels, 5, &cfg, seed).unwrap();
            assert_eq!(cv.losses.len(), levels.len());
            cv.chosen <= k + 1
        })
        .count();
    assert!(good >= 16, "{good}/20 seeds chose a level ≤ k+1");
}

#[test]
fn cross_validation_is_deterministic() {
    let data = orthonormal_problem(3, 60, 10, 3);
    let cfg = SolverConfig::default();
    let a = cross_validate(Family::Gaussian, &data, sparsity, &[1, 2, 3, 4], 4, &cfg, 11).unwrap();
    let b = cross_validate(Family::Gaussian, &data, sparsity, &[1, 2, 3, 4], 4, &cfg, 11).unwrap();
    assert_eq!(a, b);
}

fn random_matrix_data(seed: u64, p: usize, q: usize, m: usize) -> MatrixDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian_matrix(&mut rng, p, 1) * gaussian_matrix(&mut rng, 1, q);
    let predictors: Vec<DMatrix<f64>> = (0..m).map(|_| gaussian_matrix(&mut rng, p, q)).collect();
    let y = DVector::from_fn(m, |i, _| predictors[i].dot(&b) + 0.1 * rng.random_range(-1.0..1.0));
    MatrixDataset::new(predictors, y).unwrap()
}

#[test]
fn matrix_fit_equals_flattened_fit() {
    let md = random_matrix_data(5, 4, 3, 30);
    let cfg = SolverConfig::default();
    let mf = fit_matrix(Family::Gaussian, &md, 1, 0.5, &cfg).unwrap();

    let rows: Vec<_> = md.predictors.iter().map(|p| flatten(p).transpose()).collect();
    let data = Dataset::new(DMatrix::from_rows(&rows), md.y.clone()).unwrap();
    let spec = ConstraintSpec::new(ConstraintSet::Rank { r: 1, rows: 4, cols: 3 }, 0.5).unwrap();
    let manual = fit(Family::Gaussian, &data, &[spec], &cfg, None).unwrap();

    assert_eq!(mf.fit.objective_trace, manual.objective_trace);
    assert_eq!(mf.fit.beta, manual.beta);
    assert_eq!(mf.projected, reshape(&manual.projected_beta, 4, 3));
}

#[test]
fn full_rank_constraint_is_least_squares() {
    let md = random_matrix_data(8, 3, 2, 40);
    // β error scales like √obj_tol on a quadratic objective.
    let cfg = SolverConfig {
        obj_tol: 1e-15,
        ..SolverConfig::default()
    };
    let mf = fit_matrix(Family::Gaussian, &md, 2, 1.0, &cfg).unwrap();
    let rows: Vec<_> = md.predictors.iter().map(|p| flatten(p).transpose()).collect();
    let x = DMatrix::from_rows(&rows);
    let ls = (x.tr_mul(&x)).cholesky().unwrap().solve(&x.tr_mul(&md.y));
    assert!(mf.fit.converged);
    assert!((flatten(&mf.estimate) - &ls).amax() < 1e-6);
    assert_eq!(mf.estimate, mf.projected);
}

#[test]
fn woodbury_and_dense_paths_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (m, n) = (25, 60);
    let x = gaussian_matrix(&mut rng, m, n);
    let mut truth = DVector::zeros(n);
    truth[3] = 1.5;
    truth[40] = -1.0;
    let y = &x * truth + gaussian_vector(&mut rng, m, 0.1);
    let data = Dataset::new(x, y).unwrap();
    let specs = [ConstraintSpec::new(ConstraintSet::Sparsity { k: 2 }, 0.1).unwrap()];
    let run = |mode| {
        let cfg = SolverConfig {
            use_woodbury: mode,
            ..SolverConfig::default()
        };
        fit(Family::Gaussian, &data, &specs, &cfg, None).unwrap()
    };
    let (a, b) = (run(WoodburyMode::Always), run(WoodburyMode::Never));
    assert!(a.used_woodbury && !b.used_woodbury);
    assert!((&a.beta - &b.beta).amax() < 1e-8);
    assert_eq!(a.projected_beta.iter().filter(|v| **v != 0.0).count(), 2);
    assert!(a.projected_beta[3] != 0.0 && a.projected_beta[40] != 0.0);
}

#[test]
fn warm_start_at_solution_stays_put() {
    let data = Dataset::new(DMatrix::identity(3, 3), DVector::from_vec(vec![2.0, -1.0, 0.5])).unwrap();
    let specs = [ConstraintSpec::new(ConstraintSet::NonNegative, 1e8).unwrap()];
    let cfg = SolverConfig::default();
    let first = fit(Family::Gaussian, &data, &specs, &cfg, None).unwrap();
    let again = fit(Family::Gaussian, &data, &specs, &cfg, Some(&first.beta)).unwrap();
    assert!((&again.beta - &first.beta).amax() < 1e-10);
    assert!(again.iterations <= 2);
}
