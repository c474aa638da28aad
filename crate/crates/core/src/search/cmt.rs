//! Cluster merge table.
//!
//! Starting from one cluster per layer, the two adjacent clusters whose
//! parallelism is most alike are merged, one merge per step, until a single
//! cluster remains. Each intermediate division is kept, giving one candidate
//! division per cluster count.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::model::{LayerStats, Network};

/// Spatial tile count of a layer's output plane (1 for fc).
pub fn layer_parallelism(net: &Network, layer: usize) -> f64 {
    let l = &net.layers[layer];
    (l.h_out() * l.w_out()) as f64
}

/// MAC-weighted geometric mean of the member layers' parallelism.
pub fn compute_parallelism(range: Range<usize>, net: &Network, stats: &[LayerStats]) -> f64 {
    assert!(!range.is_empty(), "empty cluster");
    let first = layer_parallelism(net, range.start);
    if range.clone().all(|k| layer_parallelism(net, k) == first) {
        return first;
    }
    let (mut log_sum, mut weight) = (0.0, 0.0);
    for k in range.clone() {
        let w = stats[k].macs as f64;
        log_sum += w * layer_parallelism(net, k).ln();
        weight += w;
    }
    if weight == 0.0 {
        // Zero-MAC clusters fall back to the plain geometric mean.
        let n = range.len() as f64;
        return (range.map(|k| layer_parallelism(net, k).ln()).sum::<f64>() / n).exp();
    }
    (log_sum / weight).exp()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cmt {
    /// `levels[n - 1]` is the division into `n` clusters.
    levels: Vec<Vec<Range<usize>>>,
}

impl Cmt {
    pub fn division(&self, n_clusters: usize) -> &[Range<usize>] {
        &self.levels[n_clusters - 1]
    }

    pub fn max_clusters(&self) -> usize {
        self.levels.len()
    }
}

pub fn gen_cmt(segment: Range<usize>, net: &Network, stats: &[LayerStats]) -> Cmt {
    assert!(!segment.is_empty(), "empty segment");
    let len = segment.len();
    let mut levels = vec![Vec::new(); len];
    let mut current: Vec<Range<usize>> = segment.map(|k| k..k + 1).collect();
    let mut parallel: Vec<f64> = current
        .iter()
        .map(|r| compute_parallelism(r.clone(), net, stats))
        .collect();
    loop {
        levels[current.len() - 1] = current.clone();
        if current.len() == 1 {
            break;
        }
        let mut best = 0;
        let mut best_offset = f64::INFINITY;
        for j in 0..current.len() - 1 {
            let offset = (parallel[j] / parallel[j + 1] - 1.0).abs();
            if offset < best_offset {
                best_offset = offset;
                best = j;
            }
        }
        let merged = current[best].start..current[best + 1].end;
        current.splice(best..best + 2, [merged.clone()]);
        parallel.splice(best..best + 2, [compute_parallelism(merged, net, stats)]);
    }
    Cmt { levels }
}
