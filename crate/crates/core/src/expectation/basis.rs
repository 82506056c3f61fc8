//! Cubic B-spline bases with difference penalties.
//!
//! Interior knots sit at evenly spaced quantiles of the training values;
//! boundary knots at the extremes are repeated `degree + 1` times.
//! Evaluation clamps out-of-range inputs to the boundary, so prediction
//! beyond the training range extends the boundary value.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub degree: usize,
    /// Full extended knot vector (boundaries repeated degree+1 times).
    pub knots: Vec<f64>,
}

impl BSplineBasis {
    /// Builds a basis for `values` with `n_interior` knots at quantiles.
    /// Returns `None` when the values do not span an interval or offer
    /// fewer distinct interior positions than requested (the caller is
    /// expected to degrade the term to a linear one).
    pub fn from_quantiles(values: &[f64], degree: usize, n_interior: usize) -> Option<BSplineBasis> {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite feature value"));
        sorted.dedup();
        if sorted.len() < n_interior + 2 {
            return None;
        }
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if !(hi > lo) {
            return None;
        }
        // Type-7 quantiles of the distinct values.
        let mut interior: Vec<f64> = (1..=n_interior)
            .map(|k| {
                let p = k as f64 / (n_interior + 1) as f64;
                let pos = p * (sorted.len() - 1) as f64;
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                if i + 1 < sorted.len() {
                    sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
                } else {
                    sorted[i]
                }
            })
            .collect();
        interior.retain(|&k| k > lo && k < hi);
        interior.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut knots = vec![lo; degree + 1];
        knots.extend(interior);
        knots.extend(vec![hi; degree + 1]);
        Some(BSplineBasis { degree, knots })
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn find_span(&self, x: f64) -> usize {
        let n = self.n_basis();
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[self.degree] {
            return self.degree;
        }
        let (mut lo, mut hi) = (self.degree, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Writes the full basis row for `x` (clamped to the domain) into
    /// `out`, which must have length `n_basis()`. Rows sum to one.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_basis());
        out.fill(0.0);
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let span = self.find_span(x);
        let d = self.degree;
        // Cox-de Boor recursion over the d+1 non-zero functions.
        let mut values = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        values[0] = 1.0;
        for j in 1..=d {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        for (k, v) in values.iter().enumerate() {
            out[span - d + k] = *v;
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Squared `order`-th difference penalty `DᵀD` on `q` coefficients.
pub fn difference_penalty(q: usize, order: usize) -> DMatrix<f64> {
    assert!(q > order, "need more coefficients than the penalty order");
    let rows = q - order;
    let mut d = DMatrix::zeros(rows, q);
    // Row i holds the binomial coefficients of (1 - B)^order at offset i.
    let mut coef = vec![0.0; order + 1];
    for (j, c) in coef.iter_mut().enumerate() {
        let mut binom = 1.0;
        for t in 0..j {
            binom *= (order - t) as f64 / (t + 1) as f64;
        }
        *c = if j % 2 == 0 { binom } else { -binom };
    }
    for i in 0..rows {
        for (j, c) in coef.iter().enumerate() {
            d[(i, i + j)] = *c;
        }
    }
    d.transpose() * d
}
