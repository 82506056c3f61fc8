//! Small statistical utilities shared across the pipeline.

/// Weighted median with a deterministic tie rule.
///
/// Returns the smallest value `v` such that the weight at or below `v`
/// reaches half the total weight, so an even split (exactly half the
/// weight on each side) yields the lower of the two candidates.
/// Zero-weight entries are ignored. Returns `None` when no positive
/// weight remains.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Option<f64> {
    assert_eq!(values.len(), weights.len());
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite value"));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let half = total / 2.0;
    let mut cum = 0.0;
    for (v, w) in &pairs {
        cum += w;
        if cum >= half {
            return Some(*v);
        }
    }
    Some(pairs[pairs.len() - 1].0)
}

/// Unweighted median (lower value on even splits, matching
/// [`weighted_median`] with unit weights).
pub fn median(values: &[f64]) -> Option<f64> {
    let w = vec![1.0; values.len()];
    weighted_median(values, &w)
}

/// Empirical median used for stratification splits: midpoint of the two
/// central order statistics when `n` is even.
pub fn split_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of an unsorted
/// sample. Returns `None` on an empty sample.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// Ordinary least-squares slope and intercept of `y` on `x`, with
/// optional weights. Returns `None` when fewer than two distinct `x`
/// values carry positive weight.
pub fn ols_slope(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Option<(f64, f64)> {
    assert_eq!(x.len(), y.len());
    let w_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for i in 0..x.len() {
        let w = w_of(i);
        if w <= 0.0 {
            continue;
        }
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
    }
    if sw <= 0.0 {
        return None;
    }
    let mx = sx / sw;
    let my = sy / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let w = w_of(i);
        if w <= 0.0 {
            continue;
        }
        sxx += w * (x[i] - mx) * (x[i] - mx);
        sxy += w * (x[i] - mx) * (y[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Holm-Bonferroni step-down adjustment.
///
/// Adjusted values are `max` over the step-down chain of
/// `(m - rank) * p`, clipped to 1, and keep the input order. An empty
/// input yields an empty output.
pub fn holm_bonferroni(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).expect("NaN p-value"));
    let mut adjusted = vec![0.0; m];
    let mut running_max = 0.0_f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running_max = running_max.max(scaled);
        adjusted[idx] = running_max;
    }
    adjusted
}

/// One-sample Kolmogorov-Smirnov test of uniformity on `[0, 1]`.
///
/// Returns `(statistic, p_value)` using the asymptotic Kolmogorov
/// distribution with the finite-sample scaling
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) * D`.
pub fn ks_uniform(sample: &[f64]) -> Option<(f64, f64)> {
    let n = sample.len();
    if n == 0 {
        return None;
    }
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value"));
    let mut d = 0.0_f64;
    for (i, &x) in v.iter().enumerate() {
        let cdf = x.clamp(0.0, 1.0);
        let upper = (i + 1) as f64 / n as f64 - cdf;
        let lower = cdf - i as f64 / n as f64;
        d = d.max(upper).max(lower);
    }
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    // Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-12 {
            break;
        }
    }
    Some((d, p.clamp(0.0, 1.0)))
}

/// Rounds to the nearest integer with halves away from zero, the
/// convention used for reported percentages.
pub fn round_half_away(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5).floor() as i64
    } else {
        (x - 0.5).ceil() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weighted_median_matches_hand_example() {
        assert_eq!(weighted_median(&[1.0, 2.0, 100.0], &[1.0, 3.0, 1.0]), Some(2.0));
    }

    #[test]
    fn weighted_median_takes_lower_on_even_split() {
        assert_eq!(weighted_median(&[1.0, 2.0], &[1.0, 1.0]), Some(1.0));
        assert_eq!(weighted_median(&[4.0, 1.0, 2.0, 3.0], &[1.0; 4]), Some(2.0));
    }

    #[test]
    fn weighted_median_ignores_zero_weights() {
        assert_eq!(weighted_median(&[5.0, 7.0], &[0.0, 2.0]), Some(7.0));
        assert_eq!(weighted_median(&[5.0], &[0.0]), None);
    }

    #[test]
    fn split_median_midpoint_on_even() {
        assert_eq!(split_median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(split_median(&[5.0, 5.0, 5.0]), Some(5.0));
    }

    #[test]
    fn holm_two_values() {
        let adj = holm_bonferroni(&[0.01, 0.04]);
        assert_relative_eq!(adj[0], 0.02);
        assert_relative_eq!(adj[1], 0.04);
    }

    #[test]
    fn holm_single_value_unchanged() {
        let adj = holm_bonferroni(&[0.2]);
        assert_relative_eq!(adj[0], 0.2);
    }

    #[test]
    fn holm_three_values_with_reordering() {
        let adj = holm_bonferroni(&[0.03, 0.01, 0.04]);
        assert_relative_eq!(adj[0], 0.06);
        assert_relative_eq!(adj[1], 0.03);
        assert_relative_eq!(adj[2], 0.06);
    }

    #[test]
    fn holm_never_below_raw_and_monotone() {
        let raw = [0.001, 0.2, 0.05, 0.9, 0.03];
        let adj = holm_bonferroni(&raw);
        for (r, a) in raw.iter().zip(&adj) {
            assert!(a >= r);
            assert!(*a <= 1.0);
        }
    }

    #[test]
    fn ols_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (slope, intercept) = ols_slope(&x, &y, None).unwrap();
        assert_relative_eq!(slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(intercept, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_degenerate_x_is_none() {
        assert!(ols_slope(&[2.0, 2.0], &[1.0, 5.0], None).is_none());
        assert!(ols_slope(&[], &[], None).is_none());
    }

    #[test]
    fn ks_accepts_uniform_grid_and_rejects_point_mass() {
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let (_, p) = ks_uniform(&grid).unwrap();
        assert!(p > 0.5, "uniform grid should not be rejected, p = {p}");
        let clump = vec![0.01; 50];
        let (_, p) = ks_uniform(&clump).unwrap();
        assert!(p < 1e-6, "point mass should be rejected, p = {p}");
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(percentile(&v, 0.5).unwrap(), 2.5);
        assert_relative_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_relative_eq!(percentile(&v, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(round_half_away(33.5), 34);
        assert_eq!(round_half_away(33.49), 33);
        assert_eq!(round_half_away(-12.5), -13);
        assert_eq!(round_half_away(42.25), 42);
    }
}
