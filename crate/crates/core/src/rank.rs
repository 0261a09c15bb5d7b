//! Rank statistics: average ranks with ties and Spearman correlation.

use crate::num::Real;

/// Average (fractional) ranks, 1-based. Tied values share the mean of the
/// ranks they would occupy.
pub fn average_ranks<F: Real>(values: &[F]) -> Vec<F> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut ranks = vec![F::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold equal values; their rank is the mean of i+1..=j+1
        let avg = F::from_config((i + j + 2) as f64 / 2.0);
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties: the Pearson
/// correlation of the two rank vectors. Returns 0 when either side has zero
/// rank variance (the coefficient is undefined there).
pub fn spearman_rho<F: Real>(x: &[F], y: &[F]) -> F {
    assert_eq!(x.len(), y.len(), "spearman_rho: length mismatch");
    let n = x.len();
    if n < 2 {
        return F::zero();
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let nf = F::from_config(n as f64);
    let mean_x = rx.iter().copied().sum::<F>() / nf;
    let mean_y = ry.iter().copied().sum::<F>() / nf;

    let mut cov = F::zero();
    let mut var_x = F::zero();
    let mut var_y = F::zero();
    for i in 0..n {
        let dx = rx[i] - mean_x;
        let dy = ry[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    let denom = (var_x * var_y).sqrt();
    if denom <= F::zero() {
        F::zero()
    } else {
        cov / denom
    }
}
