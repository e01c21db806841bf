//! Seeded benchmark suites shared by the command-line tool and the tests.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    gen_cross_signal, gen_isotonic_poisson, gen_matrix_responses, gen_sparse_glm, half_max_support, jaccard, metrics,
    SimSpec,
};
use crate::constraints::{ConstraintSet, ConstraintSpec};
use crate::error::{Error, Result};
use crate::glm::Family;
use crate::matrix_reg::fit_matrix;
use crate::solver::{fit, FitResult, SolverConfig};

/// Starting penalty weight of the sparse suites.
pub const SPARSE_INITIAL_WEIGHT: f64 = 0.1;
/// Starting penalty weight of the rank-constrained suite.
pub const RANK_INITIAL_WEIGHT: f64 = 0.1;
/// Starting penalty weight of the isotonic suite.
pub const ISOTONE_INITIAL_WEIGHT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    SparsePoisson,
    SparseLogistic,
    MatrixCross,
    Isotonic,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::SparsePoisson,
        Suite::SparseLogistic,
        Suite::MatrixCross,
        Suite::Isotonic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::SparsePoisson => "sparse-poisson",
            Suite::SparseLogistic => "sparse-logistic",
            Suite::MatrixCross => "matrix-cross",
            Suite::Isotonic => "isotonic",
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite `{s}`")))
    }
}

/// Problem sizes; `None` picks the suite default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSize {
    /// Predictors (sparse suites, default 2000) or series length (isotonic, default 100).
    pub n: Option<usize>,
    /// Cases (default 1000 sparse, 300 matrix).
    pub m: Option<usize>,
    /// True and constrained sparsity level (default 10).
    pub k: Option<usize>,
    /// Rank constraint of the matrix suite (default 2).
    pub rank: Option<usize>,
    /// Noise standard deviation of the matrix suite (default 0.1).
    pub eps: Option<f64>,
}

/// One seed of one suite. Fields that do not apply to a suite are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub suite: Suite,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub mse: f64,
    pub support_precision: Option<f64>,
    pub support_recall: Option<f64>,
    pub cross_jaccard: Option<f64>,
    /// `σ_{r+1} / σ₁` of the projected coefficient matrix.
    pub tail_singular_ratio: Option<f64>,
    pub monotone: Option<bool>,
    pub max_constraint_distance: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub epochs: usize,
    pub accelerated_steps: usize,
    pub converged: bool,
    pub regenerated: usize,
    pub seconds: f64,
}

/// Full output of one run: the table row and the fit behind it.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub row: BenchRow,
    pub fit: FitResult,
}

fn max_distance(fit: &FitResult) -> f64 {
    fit.constraint_distances.iter().fold(0.0, |a, d| a.max(d.sqrt()))
}

fn row_skeleton(suite: Suite, seed: u64, n: usize, m: usize, fit: &FitResult, seconds: f64) -> BenchRow {
    BenchRow {
        suite,
        seed,
        n,
        m,
        mse: f64::NAN,
        support_precision: None,
        support_recall: None,
        cross_jaccard: None,
        tail_singular_ratio: None,
        monotone: None,
        max_constraint_distance: max_distance(fit),
        final_objective: *fit.objective_trace.last().expect("nonempty trace"),
        iterations: fit.iterations,
        epochs: fit.epochs.len(),
        accelerated_steps: fit.accelerated_steps,
        converged: fit.converged,
        regenerated: 0,
        seconds,
    }
}

/// Runs one seed of `suite` with solver settings `cfg`.
pub fn run_suite(suite: Suite, seed: u64, size: &BenchSize, cfg: &SolverConfig) -> Result<BenchRun> {
    match suite {
        Suite::SparsePoisson => run_sparse(suite, Family::Poisson, seed, size, cfg),
        Suite::SparseLogistic => run_sparse(suite, Family::Bernoulli, seed, size, cfg),
        Suite::MatrixCross => run_cross(seed, size, cfg),
        Suite::Isotonic => run_isotonic(seed, size, cfg),
    }
}

fn run_sparse(suite: Suite, family: Family, seed: u64, size: &BenchSize, cfg: &SolverConfig) -> Result<BenchRun> {
    let (n, m, k) = (size.n.unwrap_or(2000), size.m.unwrap_or(1000), size.k.unwrap_or(10));
    let sim = gen_sparse_glm(&SimSpec::standard(family, n, m, k, seed))?;
    let spec = ConstraintSpec::new(ConstraintSet::Sparsity { k }, SPARSE_INITIAL_WEIGHT)?;
    let start = Instant::now();
    let fit = fit(family, &sim.data, &[spec], cfg, None)?;
    let seconds = start.elapsed().as_secs_f64();
    let met = metrics(family, &fit.projected_beta, &sim.beta_true, None)?;
    let mut row = row_skeleton(suite, seed, n, m, &fit, seconds);
    row.mse = met.mse;
    row.support_precision = Some(met.support_precision);
    row.support_recall = Some(met.support_recall);
    row.regenerated = sim.regenerated;
    Ok(BenchRun { row, fit })
}

/// Side length of the cross signal.
pub const CROSS_SIZE: usize = 32;
/// Band width of the cross signal.
pub const CROSS_BAND: usize = 4;

fn run_cross(seed: u64, size: &BenchSize, cfg: &SolverConfig) -> Result<BenchRun> {
    let (m, r, eps) = (size.m.unwrap_or(300), size.rank.unwrap_or(2), size.eps.unwrap_or(0.1));
    let b0 = gen_cross_signal(CROSS_SIZE, CROSS_BAND, 1.0)?;
    let md = gen_matrix_responses(&b0, m, eps, seed)?;
    let start = Instant::now();
    let mf = fit_matrix(Family::Gaussian, &md, r, RANK_INITIAL_WEIGHT, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let truth: Vec<bool> = b0.iter().map(|v| *v != 0.0).collect();
    let mut row = row_skeleton(Suite::MatrixCross, seed, b0.len(), m, &mf.fit, seconds);
    row.mse = (&mf.projected - &b0).norm_squared() / b0.len() as f64;
    row.cross_jaccard = Some(jaccard(&half_max_support(&mf.projected), &truth));
    row.tail_singular_ratio = Some(tail_ratio(&mf.projected, r));
    Ok(BenchRun { row, fit: mf.fit })
}

/// `σ_{r+1} / σ₁`, or 0 when the matrix has at most `r` singular values.
pub fn tail_ratio(b: &DMatrix<f64>, r: usize) -> f64 {
    let mut s: Vec<f64> = b.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    match (s.first(), s.get(r)) {
        (Some(&top), Some(&tail)) if top > 0.0 => tail / top,
        _ => 0.0,
    }
}

fn run_isotonic(seed: u64, size: &BenchSize, cfg: &SolverConfig) -> Result<BenchRun> {
    let n = size.n.unwrap_or(100);
    let iso = gen_isotonic_poisson(n, 5.0, 30.0, seed)?;
    let spec = ConstraintSpec::new(ConstraintSet::Isotone, ISOTONE_INITIAL_WEIGHT)?;
    let start = Instant::now();
    let fit = fit(Family::Poisson, &iso.data, &[spec], cfg, None)?;
    let seconds = start.elapsed().as_secs_f64();
    let fitted = fit.projected_beta.map(|t| Family::Poisson.mean(t));
    let mut row = row_skeleton(Suite::Isotonic, seed, n, n, &fit, seconds);
    row.mse = (&fitted - &iso.means).norm_squared() / n as f64;
    row.monotone = Some(fitted.as_slice().windows(2).all(|w| w[0] <= w[1]));
    Ok(BenchRun { row, fit })
}

/// Median of a nonempty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("lasso".parse::<Suite>().is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_suites_run() {
        let size = BenchSize {
            n: Some(40),
            m: Some(60),
            k: Some(3),
            ..BenchSize::default()
        };
        let cfg = SolverConfig::default();
        for suite in [Suite::SparsePoisson, Suite::SparseLogistic] {
            let run = run_suite(suite, 1, &size, &cfg).unwrap();
            assert!(run.row.support_precision.is_some());
        }
        let iso = run_suite(
            Suite::Isotonic,
            1,
            &BenchSize {
                n: Some(20),
                ..BenchSize::default()
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(iso.row.monotone, Some(true));
    }
}
