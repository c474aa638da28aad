//! Size of the merged-pipeline design space.

use num_bigint::BigUint;
use num_traits::{One, Zero};

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Cluster/region configurations with exactly `n_clusters` clusters: the
/// ways to cut `layers` layers and `chiplets` chiplets into that many
/// non-empty contiguous runs.
pub fn cluster_configurations(n_clusters: usize, layers: usize, chiplets: usize) -> BigUint {
    if n_clusters == 0 || layers == 0 || chiplets == 0 {
        return BigUint::zero();
    }
    binomial(layers - 1, n_clusters - 1) * binomial(chiplets - 1, n_clusters - 1)
}

/// All configurations over every cluster count, times the `2^L` ISP/WSP
/// assignments.
pub fn design_space_size(layers: usize, chiplets: usize) -> BigUint {
    let configs: BigUint = (1..=layers.min(chiplets))
        .map(|n| cluster_configurations(n, layers, chiplets))
        .sum();
    configs << layers
}

/// `value` rendered as `d.ddde+XX`.
pub fn scientific(value: &BigUint) -> String {
    let digits = value.to_string();
    if digits.len() <= 4 {
        return digits;
    }
    let mantissa: f64 = format!("{}.{}", &digits[..1], &digits[1..8.min(digits.len())])
        .parse()
        .unwrap_or(0.0);
    format!("{:.3}e+{}", mantissa, digits.len() - 1)
}
