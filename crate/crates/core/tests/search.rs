#![allow(clippy::single_range_in_vec_init)]

use mcm_core::cost::SegmentPosition;
use mcm_core::placement::{boundary_width, zigzag_place};
use mcm_core::search::exhaustive::exhaustive_search;
use mcm_core::search::{
    design_space_size, gen_cmt, proportional_allocate, search_segment, ClusterMode, SegmentProblem,
};
use mcm_core::{
    schedule_baseline, schedule_scope, CostModel, HardwareConfig, LayerDesc, Mesh, Method, Network, Partition, Segment,
};
use num_bigint::BigUint;
use proptest::prelude::*;

fn arb_network(max_layers: usize) -> impl Strategy<Value = Network> {
    (
        1usize..8,
        6usize..24,
        prop::collection::vec((1usize..64, 0usize..3, 1usize..3), 1..=max_layers),
    )
        .prop_map(|(c_in, hw_in, specs)| {
            let mut layers = Vec::new();
            let (mut c, mut h) = (c_in, hw_in);
            for (i, (c_out, ki, stride)) in specs.into_iter().enumerate() {
                let k = [1, 3, 5][ki];
                let l = LayerDesc::conv(format!("c{i}"), c, c_out, h, k, stride, k / 2);
                h = l.h_out();
                c = c_out;
                layers.push(l);
            }
            Network::new("random", layers).unwrap()
        })
}

/// Ordered tuples of `parts` positive sizes summing to `total`, by
/// scanning every tuple in `[1, total]^parts`.
fn brute_compositions(total: usize, parts: usize) -> u64 {
    let mut count = 0;
    let mut digits = vec![1usize; parts];
    loop {
        if digits.iter().sum::<usize>() == total {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == parts {
                return count;
            }
            digits[i] += 1;
            if digits[i] <= total {
                break;
            }
            digits[i] = 1;
            i += 1;
        }
    }
}

fn brute_space(layers: usize, chiplets: usize) -> u64 {
    let mut total = 0;
    for cuts in 0u64..1 << (layers - 1) {
        let n = cuts.count_ones() as usize + 1;
        total += brute_compositions(chiplets, n);
    }
    total << layers
}

fn tiny_net(layers: usize) -> Network {
    let layers = (0..layers)
        .map(|i| LayerDesc::conv(format!("l{i}"), 8, 8, 12, 3, 1, 1))
        .collect();
    Network::new("tiny", layers).unwrap()
}

#[test]
fn space_size_matches_brute_force() {
    for l in 1..=5 {
        for c in 1..=6 {
            let brute = brute_space(l, c);
            assert_eq!(design_space_size(l, c), BigUint::from(brute), "L={l} C={c}");
            let net = tiny_net(l);
            let hw = HardwareConfig::with_chiplets(c);
            let model = CostModel::new(&net, &hw, 1);
            let ex = exhaustive_search(&model, 0..l, u64::MAX).unwrap();
            assert_eq!(ex.candidates.len() as u64, brute, "L={l} C={c}");
        }
    }
}

#[test]
fn one_layer_scans_both_partitions() {
    let net = Network::new("one", vec![LayerDesc::conv("c", 16, 32, 16, 3, 1, 1)]).unwrap();
    let hw = HardwareConfig::with_chiplets(4);
    let model = CostModel::new(&net, &hw, 8);
    let found = search_segment(&model, 0..1).unwrap();
    assert_eq!(found.trace.len(), 2);
    let eval = |p| {
        let seg = Segment::build(&[0..1], &[4], &[p], model.mesh(), false).unwrap();
        model.evaluate_segment(&seg, 0, SegmentPosition::ONLY).unwrap().report.t_segment
    };
    assert_eq!(found.latency, eval(Partition::Isp).min(eval(Partition::Wsp)));

    let ex = exhaustive_search(&model, 0..1, u64::MAX).unwrap();
    assert_eq!(ex.percentile_rank(found.latency), 0.0);
}

#[test]
fn merged_search_beats_singletons_in_its_own_trace() {
    let net = Network::new(
        "toy4",
        vec![
            LayerDesc::conv("a", 3, 32, 32, 3, 1, 1),
            LayerDesc::conv("b", 32, 64, 32, 3, 2, 1),
            LayerDesc::conv("c", 64, 64, 16, 3, 1, 1),
            LayerDesc::conv("d", 64, 128, 16, 1, 1, 0),
        ],
    )
    .unwrap();
    let hw = HardwareConfig::with_chiplets(8);
    let model = CostModel::new(&net, &hw, 16);
    let found = search_segment(&model, 0..4).unwrap();
    assert_eq!(found.trace.len(), 5 * 4);
    let singles = found
        .trace
        .iter()
        .filter(|t| t.n_cluster == 4)
        .filter_map(|t| t.latency)
        .fold(f64::INFINITY, f64::min);
    assert!(found.latency <= singles);
}

#[test]
fn rebalance_moves_toward_load_ratio() {
    // WSP pointwise layers at 56x56: cycles scale with ceil(56/n) and the
    // second layer does exactly 7x the work of the first
    let net = Network::new(
        "pair",
        vec![
            LayerDesc::conv("light", 64, 128, 56, 1, 1, 0),
            LayerDesc::conv("heavy", 128, 896, 56, 1, 1, 0),
        ],
    )
    .unwrap();
    let hw = HardwareConfig::with_chiplets(8);
    let model = CostModel::new(&net, &hw, 8);
    let p = SegmentProblem::new(&model, 0..2);
    let parts = [Partition::Wsp, Partition::Wsp];
    let start = p.evaluate(&[0..1, 1..2], &[4, 4], &parts).unwrap().report.t_segment;
    let (sizes, latency) = p.rebalance_regions(&[0..1, 1..2], &parts, vec![4, 4]).unwrap();
    assert_eq!(sizes, vec![1, 7]);
    assert!(latency < start);

    let (same, again) = p.rebalance_regions(&[0..1, 1..2], &parts, vec![1, 7]).unwrap();
    assert_eq!(same, vec![1, 7]);
    assert_eq!(again, latency);
}

#[test]
fn single_cluster_rebalance_is_identity() {
    let net = tiny_net(3);
    let hw = HardwareConfig::with_chiplets(6);
    let model = CostModel::new(&net, &hw, 4);
    let p = SegmentProblem::new(&model, 0..3);
    let parts = p.partitions_for(0);
    let (sizes, _) = p.rebalance_regions(&[0..3], &parts, vec![6]).unwrap();
    assert_eq!(sizes, vec![6]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn allocation_is_near_proportional(loads in prop::collection::vec(1u64..1_000_000, 1..12), extra in 0usize..64) {
        let chiplets = loads.len() + extra;
        let sizes = proportional_allocate(&loads, chiplets).unwrap();
        prop_assert_eq!(sizes.iter().sum::<usize>(), chiplets);
        prop_assert!(sizes.iter().all(|&s| s >= 1));
        let total: u64 = loads.iter().sum();
        let ideal: Vec<f64> = loads.iter().map(|&l| l as f64 * chiplets as f64 / total as f64).collect();
        if ideal.iter().all(|&x| x >= 1.0) {
            for (s, x) in sizes.iter().zip(&ideal) {
                prop_assert!((*s as f64 - x).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn merge_table_is_a_chain(net in arb_network(8)) {
        let cmt = gen_cmt(0..net.len(), &net, &net.stats());
        prop_assert_eq!(cmt.max_clusters(), net.len());
        prop_assert_eq!(cmt.division(1), &[0..net.len()][..]);
        for n in 2..=net.len() {
            let fine = cmt.division(n);
            let coarse = cmt.division(n - 1);
            prop_assert_eq!(fine.len(), n);
            let merged: Vec<usize> = (0..n - 1).filter(|&j| (fine[j].start..fine[j + 1].end) == coarse[j]).collect();
            prop_assert_eq!(merged.len(), 1);
            let j = merged[0];
            prop_assert_eq!(&fine[..j], &coarse[..j]);
            prop_assert_eq!(&fine[j + 2..], &coarse[j + 1..]);
        }
    }

    #[test]
    fn zigzag_regions_tile_the_mesh(sizes in prop::collection::vec(1usize..6, 1..8), rows in 1usize..5) {
        let total: usize = sizes.iter().sum();
        let cols = total.div_ceil(rows);
        // pad the last region to fill the mesh
        let mut sizes = sizes;
        *sizes.last_mut().unwrap() += rows * cols - total;
        let mesh = Mesh::new(rows, cols);
        let regions = zigzag_place(&sizes, mesh).unwrap();
        let mut seen: Vec<_> = regions.iter().flatten().copied().collect();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), rows * cols);
        for pair in regions.windows(2) {
            prop_assert!(boundary_width(&pair[0], &pair[1]).unwrap() >= 1);
        }
    }

    #[test]
    fn scope_dominates_segmented(net in arb_network(6), chiplets in 1usize..12, m in 1usize..16) {
        let hw = HardwareConfig::with_chiplets(chiplets);
        let seg = schedule_baseline(Method::Segmented, &net, &hw, m).unwrap();
        let scope = schedule_scope(&net, &hw, m).unwrap();
        prop_assert!(scope.report.t_system <= seg.report.t_system);
    }

    #[test]
    fn search_shape_and_rebalance_bound(net in arb_network(6), chiplets in 1usize..12) {
        let hw = HardwareConfig::with_chiplets(chiplets);
        let model = CostModel::new(&net, &hw, 4);
        let l = net.len();
        if l > chiplets {
            return Ok(());
        }
        let p = SegmentProblem::new(&model, 0..l);
        if let Ok(found) = p.search(ClusterMode::Merged) {
            prop_assert_eq!(found.trace.len(), (l + 1) * l);
            prop_assert!(found.trace.iter().filter_map(|t| t.latency).all(|t| found.latency <= t));
        }
        let ranges: Vec<_> = (0..l).map(|k| k..k + 1).collect();
        let parts = p.partitions_for(0);
        let mut sizes = vec![1; l];
        sizes[0] += chiplets - l;
        if let Ok(start) = p.evaluate(&ranges, &sizes, &parts) {
            let (_, best) = p.rebalance_regions(&ranges, &parts, sizes).unwrap();
            prop_assert!(best <= start.report.t_segment);
        }
    }
}
