//! Independent oracles shared by the integration tests. Nothing here calls
//! the projection or solver code under test.
#![allow(dead_code)]

use distglm::ConstraintSet;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// A random instance of every constraint variant at dimension `n`.
/// Rank uses a 2×3 or 3×2 shape, so `n` must be 6 for it to be included.
pub fn random_sets<R: Rng>(rng: &mut R, n: usize) -> Vec<ConstraintSet> {
    let mut a = gaussian_vector(rng, n, 1.0);
    if a.norm() < 1e-3 {
        a[0] = 1.0;
    }
    let lower = gaussian_vector(rng, n, 1.0);
    let upper = &lower + DVector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
    let mut sets = vec![
        ConstraintSet::Sparsity {
            k: rng.random_range(1..=n),
        },
        ConstraintSet::Isotone,
        ConstraintSet::Box {
            lower: lower.as_slice().to_vec(),
            upper: upper.as_slice().to_vec(),
        },
        ConstraintSet::Ball {
            center: gaussian_vector(rng, n, 1.0).as_slice().to_vec(),
            radius: rng.random_range(0.1..2.0),
        },
        ConstraintSet::Hyperplane {
            a: a.as_slice().to_vec(),
            b: rng.random_range(-2.0..2.0),
        },
        ConstraintSet::HalfSpace {
            a: a.as_slice().to_vec(),
            b: rng.random_range(-2.0..2.0),
        },
        ConstraintSet::NonNegative,
    ];
    if n == 6 {
        let (rows, cols) = if rng.random_bool(0.5) { (2, 3) } else { (3, 2) };
        sets.push(ConstraintSet::Rank { r: 1, rows, cols });
    }
    sets
}

/// Column-major reshape, written out independently of the library.
pub fn reshape(x: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| x[j * rows + i])
}

pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.len(), |k, _| m[(k % m.nrows(), k / m.nrows())])
}

/// Keeps the `r` largest singular triplets using nalgebra's SVD directly.
pub fn rank_truncate_oracle(b: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = b.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut out = DMatrix::zeros(b.nrows(), b.ncols());
    for &i in order.iter().take(r) {
        out += svd.singular_values[i] * u.column(i) * vt.row(i);
    }
    out
}

/// Defining predicate of each set, checked directly.
pub fn is_member(set: &ConstraintSet, x: &DVector<f64>, tol: f64) -> bool {
    match set {
        ConstraintSet::Sparsity { k } => x.iter().filter(|v| **v != 0.0).count() <= *k,
        ConstraintSet::Isotone => x.as_slice().windows(2).all(|w| w[0] <= w[1] + tol),
        ConstraintSet::Rank { r, rows, cols } => {
            let mut s: Vec<f64> = reshape(x, *rows, *cols).singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            s.len() <= *r || s[*r] <= 1e-8 * s[0].max(f64::MIN_POSITIVE)
        }
        ConstraintSet::Box { lower, upper } => x
            .iter()
            .enumerate()
            .all(|(i, v)| *v >= lower[i] - tol && *v <= upper[i] + tol),
        ConstraintSet::Ball { center, radius } => (x - DVector::from_column_slice(center)).norm() <= radius + tol,
        ConstraintSet::Hyperplane { a, b } => (DVector::from_column_slice(a).dot(x) - b).abs() <= tol,
        ConstraintSet::HalfSpace { a, b } => DVector::from_column_slice(a).dot(x) <= b + tol,
        ConstraintSet::NonNegative => x.iter().all(|v| *v >= -tol),
    }
}

/// A feasible point near `anchor`, produced by a closed-form repair that
/// is independent of the library's projection code.
pub fn feasible_near<R: Rng>(rng: &mut R, set: &ConstraintSet, anchor: &DVector<f64>, scale: f64) -> DVector<f64> {
    let n = anchor.len();
    let z = anchor + gaussian_vector(rng, n, scale);
    match set {
        ConstraintSet::Sparsity { k } => {
            let mut idx: Vec<usize> = (0..n).collect();
            if rng.random_bool(0.5) {
                idx.sort_by(|&i, &j| z[j].abs().total_cmp(&z[i].abs()));
            } else {
                for i in (1..n).rev() {
                    idx.swap(i, rng.random_range(0..=i));
                }
            }
            let keep = rng.random_range(0..=*k);
            let mut out = DVector::zeros(n);
            for &i in idx.iter().take(keep) {
                out[i] = z[i];
            }
            out
        }
        ConstraintSet::Isotone => {
            let mut v: Vec<f64> = z.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            DVector::from_vec(v)
        }
        ConstraintSet::Rank { r, rows, cols } => {
            let rr = rng.random_range(0..=*r);
            flatten(&rank_truncate_oracle(&reshape(&z, *rows, *cols), rr))
        }
        ConstraintSet::Box { lower, upper } => DVector::from_fn(n, |i, _| z[i].clamp(lower[i], upper[i])),
        ConstraintSet::Ball { center, radius } => {
            let c = DVector::from_column_slice(center);
            let d = &z - &c;
            let shrink = rng.random_range(0.0..=1.0f64);
            let dist = d.norm();
            if dist <= *radius {
                z
            } else {
                c + d * (radius * shrink / dist)
            }
        }
        ConstraintSet::Hyperplane { a, b } => {
            let a = DVector::from_column_slice(a);
            &z + &a * ((b - a.dot(&z)) / a.norm_squared())
        }
        ConstraintSet::HalfSpace { a, b } => {
            let a = DVector::from_column_slice(a);
            let excess = a.dot(&z) - b;
            if excess <= 0.0 {
                z
            } else {
                let extra = rng.random_range(0.0..1.0);
                &z - &a * ((excess + extra) / a.norm_squared())
            }
        }
        ConstraintSet::NonNegative => z.map(f64::abs),
    }
}

/// Best nondecreasing fit by enumerating every split of `y` into runs of
/// consecutive entries; each run takes its weighted mean and candidates
/// that are not monotone are discarded.
pub fn isotonic_brute_force(y: &[f64], w: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return Vec::new();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut fit = vec![0.0; n];
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let ws: f64 = w[start..end].iter().sum();
                let mean = (start..end).map(|i| w[i] * y[i]).sum::<f64>() / ws;
                fit[start..end].iter_mut().for_each(|f| *f = mean);
                start = end;
            }
        }
        if fit.windows(2).any(|p| p[0] > p[1]) {
            continue;
        }
        let loss: f64 = (0..n).map(|i| w[i] * (y[i] - fit[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, fit));
        }
    }
    best.expect("the single-block split is always monotone").1
}

/// Central difference of a scalar function along each coordinate.
pub fn fd_gradient<F: FnMut(&DVector<f64>) -> f64>(mut f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += h;
        m[i] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    })
}

/// Central-difference Jacobian of a vector function, column `j` = ∂F/∂xⱼ.
pub fn fd_jacobian<F: FnMut(&DVector<f64>) -> DVector<f64>>(mut f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..x.len())
        .map(|j| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[j] += h;
            m[j] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// Bregman divergence from its definition `φ(p) − φ(q) − φ'(q)(p − q)`
/// with `φ` the convex conjugate of each family's cumulant.
pub fn bregman_from_definition(family: distglm::Family, p: f64, q: f64) -> f64 {
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    type Scalar = Box<dyn Fn(f64) -> f64>;
    let (phi, dphi): (Scalar, Scalar) = match family {
        distglm::Family::Gaussian => (Box::new(|x| 0.5 * x * x), Box::new(|x| x)),
        distglm::Family::Poisson => (Box::new(move |x| xlogx(x) - x), Box::new(|x: f64| x.ln())),
        distglm::Family::Bernoulli => (
            Box::new(move |x| xlogx(x) + xlogx(1.0 - x)),
            Box::new(|x: f64| (x / (1.0 - x)).ln()),
        ),
    };
    phi(p) - phi(q) - dphi(q) * (p - q)
}
