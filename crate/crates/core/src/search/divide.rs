use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::model::{HardwareConfig, LayerKind, Network};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub range: Range<usize>,
    /// The layer alone overflows the package buffers; its weights stream
    /// from DRAM.
    pub streamed: bool,
}

/// Whether `range` can stay resident on the whole package.
///
/// Three checks: one chiplet per layer at least; the package-wide tiles
/// plus the largest single WSP copy fit a chiplet; and the per-layer
/// chiplet demand `ceil(W / capacity)` sums to no more than the package.
pub fn segment_fits(net: &Network, hw: &HardwareConfig, range: Range<usize>) -> bool {
    let c = hw.num_chiplets as u64;
    let cap = hw.chiplet_capacity();
    if range.len() > hw.num_chiplets {
        return false;
    }
    let mut tiles = 0u64;
    let mut gather = 0u64;
    let mut demand = 0u64;
    for k in range {
        let layer = &net.layers[k];
        let w = (layer.c_out * layer.c_in * layer.k_h * layer.k_w) as u64 * hw.wgt_bytes;
        let tile = w.div_ceil(c);
        tiles += tile;
        // only layers whose full copy fits one chiplet can ever run WSP
        if layer.kind == LayerKind::Conv && w <= cap {
            gather = gather.max(w - tile);
        }
        demand += w.div_ceil(cap);
    }
    tiles + gather <= cap && demand <= c
}

/// Greedy segmentation: grow the current segment while it still fits,
/// otherwise start a new one. A layer that does not fit on its own becomes
/// a streamed single-layer segment.
pub fn divide_segments(net: &Network, hw: &HardwareConfig) -> Vec<SegmentSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    while start < net.len() {
        if !segment_fits(net, hw, start..start + 1) {
            spans.push(SegmentSpan {
                range: start..start + 1,
                streamed: true,
            });
            start += 1;
            continue;
        }
        let mut end = start + 1;
        while end < net.len() && segment_fits(net, hw, start..end + 1) {
            end += 1;
        }
        spans.push(SegmentSpan {
            range: start..end,
            streamed: false,
        });
        start = end;
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerDesc;
    use crate::zoo::builtin_network;

    /// `n` pointwise layers of 512x512 weights (256 KiB each).
    fn uniform(n: usize) -> Network {
        let layers = (0..n).map(|i| LayerDesc::conv(format!("l{i}"), 512, 512, 4, 1, 1, 0)).collect();
        Network::new("uniform", layers).unwrap()
    }

    #[test]
    fn everything_fits() {
        let net = uniform(4);
        let spans = divide_segments(&net, &HardwareConfig::with_chiplets(16));
        assert_eq!(spans, vec![SegmentSpan { range: 0..4, streamed: false }]);
    }

    #[test]
    fn overweight_net_splits_greedily() {
        // 45 pointwise 896x896 layers of 784 KiB: 2.15x the 16 MiB package.
        // Per chiplet a layer tile is 49 KiB and the largest WSP copy adds
        // 735 KiB, so floor((1024 - 735) / 49) = 5 layers fit per segment.
        let hw = HardwareConfig::with_chiplets(16);
        let layers = (0..45).map(|i| LayerDesc::conv(format!("l{i}"), 896, 896, 4, 1, 1, 0)).collect();
        let net = Network::new("heavy", layers).unwrap();
        let spans = divide_segments(&net, &hw);
        assert_eq!(spans.len(), 9);
        assert!(spans.iter().all(|s| s.range.len() == 5 && !s.streamed));
    }

    #[test]
    fn layer_count_caps_segments() {
        let spans = divide_segments(&uniform(10), &HardwareConfig::with_chiplets(4));
        let lens: Vec<_> = spans.iter().map(|s| s.range.len()).collect();
        assert_eq!(lens, vec![4, 4, 2]);
    }

    #[test]
    fn oversized_fc_streams() {
        let net = builtin_network("alexnet").unwrap();
        let spans = divide_segments(&net, &HardwareConfig::with_chiplets(16));
        let fc6 = spans.iter().find(|s| s.range.contains(&5)).unwrap();
        assert_eq!(fc6.range, 5..6);
        assert!(fc6.streamed);
    }
}
