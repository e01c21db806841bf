use crate::error::{Error, Result};

struct Block {
    weighted_sum: f64,
    weight: f64,
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.weighted_sum / self.weight
    }
}

/// Weighted isotonic (nondecreasing) least-squares fit by pooling adjacent
/// violators.
///
/// Minimizes `Σ wᵢ (yᵢ − βᵢ)²` subject to `β₁ ≤ … ≤ βₙ` in linear time.
pub fn pava(y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if y.len() != w.len() {
        return Err(Error::DimensionMismatch {
            context: "pava weights",
            expected: y.len(),
            actual: w.len(),
        });
    }
    if let Some(i) = w.iter().position(|&wi| !(wi > 0.0 && wi.is_finite())) {
        return Err(Error::InvalidData(format!(
            "pava weight {i} must be positive, got {}",
            w[i]
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("pava input {i} is not finite")));
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = Block {
            weighted_sum: wi * yi,
            weight: wi,
            len: 1,
        };
        while let Some(prev) = blocks.last() {
            if prev.mean() <= cur.mean() {
                break;
            }
            let prev = blocks.pop().unwrap();
            cur.weighted_sum += prev.weighted_sum;
            cur.weight += prev.weight;
            cur.len += prev.len;
        }
        blocks.push(cur);
    }

    let mut out = Vec::with_capacity(y.len());
    for b in &blocks {
        out.extend(std::iter::repeat_n(b.mean(), b.len));
    }
    Ok(out)
}

/// PAVA with unit weights.
pub fn pava_unweighted(y: &[f64]) -> Result<Vec<f64>> {
    pava(y, &vec![1.0; y.len()])
}
