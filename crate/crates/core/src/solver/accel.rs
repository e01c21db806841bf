//! Quasi-Newton acceleration of the MM algorithm map.
//!
//! Given iterate pairs `(βⱼ, M(βⱼ))`, the differences `Δβ` and `ΔM` give
//! secant conditions `dM·Δβ ≈ ΔM`. Inverting `I − dM` with the minimum-norm
//! secant approximation and taking one Newton step towards the fixed point
//! of `M` yields
//!
//! `β_acc = M(β) + W (UᵗU − UᵗW)⁻¹ Uᵗ (M(β) − β)`
//!
//! where `U` stacks the `Δβ` and `W` the `ΔM` as columns.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Sliding window of the last `q + 1` map evaluations.
#[derive(Debug, Clone)]
pub struct SecantHistory {
    secants: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl SecantHistory {
    pub fn new(secants: usize) -> Self {
        Self {
            secants,
            pairs: VecDeque::with_capacity(secants + 1),
        }
    }

    pub fn push(&mut self, beta: DVector<f64>, mapped: DVector<f64>) {
        if self.secants == 0 {
            return;
        }
        if self.pairs.len() == self.secants + 1 {
            self.pairs.pop_front();
        }
        self.pairs.push_back((beta, mapped));
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn is_full(&self) -> bool {
        self.secants > 0 && self.pairs.len() == self.secants + 1
    }

    pub fn pairs(&self) -> Vec<(DVector<f64>, DVector<f64>)> {
        self.pairs.iter().cloned().collect()
    }

    pub fn candidate(&self) -> Option<DVector<f64>> {
        if !self.is_full() {
            return None;
        }
        qn_candidate(&self.pairs.iter().cloned().collect::<Vec<_>>())
    }
}

/// Raw accelerated point from the pairs, oldest first; the last pair is the
/// current iterate. Returns `None` when the secant system is singular.
pub fn qn_candidate(pairs: &[(DVector<f64>, DVector<f64>)]) -> Option<DVector<f64>> {
    let (beta, mapped) = pairs.last()?;
    let resid = mapped - beta;
    if resid.iter().all(|&r| r == 0.0) {
        return Some(mapped.clone());
    }
    let q = pairs.len().checked_sub(1).filter(|&q| q > 0)?;
    let n = beta.len();
    let mut u = DMatrix::zeros(n, q);
    let mut w = DMatrix::zeros(n, q);
    for j in 0..q {
        u.set_column(j, &(&pairs[j + 1].0 - &pairs[j].0));
        w.set_column(j, &(&pairs[j + 1].1 - &pairs[j].1));
    }
    let utu = u.tr_mul(&u);
    let system = &utu - u.tr_mul(&w);
    let coef = system.lu().solve(&u.tr_mul(&resid))?;
    if coef.iter().any(|c| !c.is_finite()) {
        return None;
    }
    let cand = mapped + w * coef;
    cand.iter().all(|c| c.is_finite()).then_some(cand)
}

/// Safeguarded acceleration: the candidate is returned with its objective
/// only if it strictly improves on `f(M(β))`.
pub fn qn_accelerate<F>(
    pairs: &[(DVector<f64>, DVector<f64>)],
    mut f_at: F,
    f_mapped: f64,
) -> Option<(DVector<f64>, f64)>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    let cand = qn_candidate(pairs)?;
    let f = f_at(&cand).ok()?;
    (f < f_mapped).then_some((cand, f))
}
