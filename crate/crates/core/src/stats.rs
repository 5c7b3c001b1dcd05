//! Order-stable reductions and weighted summary statistics.

use crate::scalar::Scalar;

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation. The reduction tree depends only on the slice length, so the
/// result is independent of how the inputs were produced.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean<T: Scalar>(xs: &[T]) -> T {
    pairwise_sum(xs) / T::from_usize(xs.len()).unwrap_or_else(T::nan)
}

/// Sample standard deviation, n−1 denominator.
pub fn sample_std<T: Scalar>(xs: &[T]) -> T {
    let n = xs.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let sq: Vec<T> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / T::from_usize(n - 1).unwrap()).sqrt()
}

/// Weighted mean and population standard deviation. Weights need not be normalized.
pub fn weighted_mean_std<T: Scalar>(values: &[T], weights: &[T]) -> (T, T) {
    debug_assert_eq!(values.len(), weights.len());
    let total = pairwise_sum(weights);
    let wx: Vec<T> = values.iter().zip(weights).map(|(&x, &w)| w * x).collect();
    let m = pairwise_sum(&wx) / total;
    let wd: Vec<T> = values
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * (x - m) * (x - m))
        .collect();
    let var = pairwise_sum(&wd) / total;
    (m, var.max(T::zero()).sqrt())
}

/// Weighted inverse-CDF quantiles: for each `p`, the smallest value whose cumulative weight
/// reaches `p` of the total.
pub fn weighted_quantiles<T: Scalar>(values: &[T], weights: &[T], probs: &[T]) -> Vec<T> {
    if values.is_empty() {
        return vec![T::nan(); probs.len()];
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let total = pairwise_sum(weights);
    let mut cumulative = Vec::with_capacity(order.len());
    let mut acc = T::zero();
    for &i in &order {
        acc = acc + weights[i];
        cumulative.push(acc);
    }
    let slack = T::lit(1e-12) * total;
    probs
        .iter()
        .map(|&p| {
            let target = p * total - slack;
            let pos = cumulative.partition_point(|&c| c < target);
            values[order[pos.min(order.len() - 1)]]
        })
        .collect()
}
