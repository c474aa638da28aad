//! Per-segment search: cluster division from the merge table, proportional
//! region sizing with hill-climbing rebalance, and a scan over the single
//! WSP-to-ISP transition point.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{region_footprint, CostModel, SegmentEval, SegmentPosition};
use crate::error::{Error, Result};
use crate::model::{LayerKind, Partition};
use crate::schedule::Segment;
use crate::search::allocate::proportional_allocate;
use crate::search::cmt::gen_cmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub segment: usize,
    pub n_cluster: usize,
    pub idx: usize,
    /// `None` when no feasible region allocation exists for this point.
    pub latency: Option<f64>,
}

/// Which cluster counts the search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMode {
    /// Every division in the merge table.
    Merged,
    /// One cluster per layer only.
    Singletons,
}

#[derive(Debug, Clone)]
pub struct SegmentSearch {
    pub segment: Segment,
    pub latency: f64,
    pub trace: Vec<TraceEntry>,
    /// Cost-model evaluations spent, including rebalance steps.
    pub candidates_evaluated: usize,
}

/// One segment of a network, ready to be searched.
#[derive(Debug, Clone)]
pub struct SegmentProblem<'a> {
    pub model: &'a CostModel<'a>,
    pub range: Range<usize>,
    pub position: SegmentPosition,
    pub streamed: bool,
    /// Segment index, for traces and diagnostics.
    pub index: usize,
}

/// Allocation found for one (division, partition) candidate.
#[derive(Debug, Clone)]
struct Allocation {
    sizes: Vec<usize>,
    latency: f64,
    evaluations: usize,
}

impl<'a> SegmentProblem<'a> {
    pub fn new(model: &'a CostModel<'a>, range: Range<usize>) -> Self {
        SegmentProblem {
            model,
            range,
            position: SegmentPosition::ONLY,
            streamed: false,
            index: 0,
        }
    }

    fn chiplets(&self) -> usize {
        self.model.hw.num_chiplets
    }

    /// WSP on the first `idx` layers and ISP after; fc layers stay ISP.
    pub fn partitions_for(&self, idx: usize) -> Vec<Partition> {
        self.range
            .clone()
            .enumerate()
            .map(|(i, k)| {
                if i < idx && self.model.net.layers[k].kind != LayerKind::Fc {
                    Partition::Wsp
                } else {
                    Partition::Isp
                }
            })
            .collect()
    }

    pub fn build(&self, ranges: &[Range<usize>], sizes: &[usize], partitions: &[Partition]) -> Result<Segment> {
        Segment::build(ranges, sizes, partitions, self.model.mesh(), self.streamed)
    }

    pub fn evaluate(&self, ranges: &[Range<usize>], sizes: &[usize], partitions: &[Partition]) -> Result<SegmentEval> {
        let seg = self.build(ranges, sizes, partitions)?;
        self.model.evaluate_segment(&seg, self.index, self.position)
    }

    /// Largest region each cluster can use: a WSP layer splits rows, so at
    /// most `h_out` chiplets.
    fn size_caps(&self, ranges: &[Range<usize>], partitions: &[Partition]) -> Vec<usize> {
        let base = self.range.start;
        ranges
            .iter()
            .map(|r| {
                r.clone()
                    .filter(|&k| partitions[k - base] == Partition::Wsp)
                    .map(|k| self.model.net.layers[k].h_out())
                    .min()
                    .unwrap_or(usize::MAX)
            })
            .collect()
    }

    /// Moves chiplets out of regions above their cap into the capped-free
    /// region with the most MACs per chiplet. `None` if the caps cannot hold
    /// every chiplet.
    fn enforce_caps(loads: &[u64], caps: &[usize], mut sizes: Vec<usize>) -> Option<Vec<usize>> {
        if caps.iter().map(|&c| c as u128).sum::<u128>() < sizes.iter().sum::<usize>() as u128 {
            return None;
        }
        let mut spare = 0;
        for (s, &c) in sizes.iter_mut().zip(caps) {
            if *s > c {
                spare += *s - c;
                *s = c;
            }
        }
        for _ in 0..spare {
            let j = (0..sizes.len())
                .filter(|&j| sizes[j] < caps[j])
                .max_by(|&a, &b| {
                    // loads[a]/sizes[a] vs loads[b]/sizes[b], lowest index on ties
                    let lhs = loads[a] as u128 * sizes[b] as u128;
                    let rhs = loads[b] as u128 * sizes[a] as u128;
                    lhs.cmp(&rhs).then(b.cmp(&a))
                })?;
            sizes[j] += 1;
        }
        Some(sizes)
    }

    fn region_fits(&self, range: &Range<usize>, partitions: &[Partition], n: usize) -> bool {
        let base = self.range.start;
        let layers = range
            .clone()
            .map(|k| (self.model.weight_bytes(k), partitions[k - base]));
        region_footprint(layers, n, self.model.hw.chiplet_capacity()).feasible
    }

    /// Moves chiplets into over-capacity regions from the region left with
    /// the most headroom, until every region fits. `None` if impossible.
    fn repair(&self, ranges: &[Range<usize>], partitions: &[Partition], mut sizes: Vec<usize>) -> Option<Vec<usize>> {
        if self.streamed {
            return Some(sizes);
        }
        let caps = self.size_caps(ranges, partitions);
        let cap = self.model.hw.chiplet_capacity();
        let base = self.range.start;
        let peak = |j: usize, n: usize| {
            let layers = ranges[j]
                .clone()
                .map(|k| (self.model.weight_bytes(k), partitions[k - base]));
            region_footprint(layers, n, cap).peak
        };
        for _ in 0..=self.chiplets() * ranges.len() {
            let Some(short) = (0..ranges.len()).find(|&j| !self.region_fits(&ranges[j], partitions, sizes[j])) else {
                return Some(sizes);
            };
            if sizes[short] >= caps[short] {
                return None;
            }
            let donor = (0..ranges.len())
                .filter(|&d| d != short && sizes[d] > 1)
                .filter_map(|d| {
                    let after = peak(d, sizes[d] - 1);
                    (after <= cap).then(|| (cap - after, d))
                })
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))?;
            sizes[donor.1] -= 1;
            sizes[short] += 1;
        }
        None
    }

    /// Hill-climbs region sizes: one chiplet at a time moves from the fastest
    /// cluster to the slowest while the segment latency strictly drops.
    /// Returns the best sizes and their latency.
    pub fn rebalance_regions(
        &self,
        ranges: &[Range<usize>],
        partitions: &[Partition],
        initial: Vec<usize>,
    ) -> Result<(Vec<usize>, f64)> {
        let a = self.rebalance(ranges, partitions, initial)?;
        Ok((a.sizes, a.latency))
    }

    fn rebalance(&self, ranges: &[Range<usize>], partitions: &[Partition], initial: Vec<usize>) -> Result<Allocation> {
        let eval = self.evaluate(ranges, &initial, partitions)?;
        let mut best = Allocation {
            sizes: initial,
            latency: eval.report.t_segment,
            evaluations: 1,
        };
        let mut times: Vec<f64> = eval.report.clusters.iter().map(|c| c.t_cluster).collect();
        let caps = self.size_caps(ranges, partitions);
        let limit = self.chiplets() * self.range.len();
        for _ in 0..limit {
            let (slow, fast) = extremes(&times);
            if slow == fast || best.sizes[fast] == 1 || best.sizes[slow] >= caps[slow] {
                break;
            }
            let mut trial = best.sizes.clone();
            trial[slow] += 1;
            trial[fast] -= 1;
            best.evaluations += 1;
            match self.evaluate(ranges, &trial, partitions) {
                Ok(e) if e.report.t_segment < best.latency => {
                    best.sizes = trial;
                    best.latency = e.report.t_segment;
                    times = e.report.clusters.iter().map(|c| c.t_cluster).collect();
                }
                _ => break,
            }
        }
        Ok(best)
    }

    /// Allocation pipeline for a fixed division and partition vector.
    fn allocate(&self, ranges: &[Range<usize>], partitions: &[Partition]) -> Option<Allocation> {
        let loads: Vec<u64> = ranges
            .iter()
            .map(|r| r.clone().map(|k| self.model.stats[k].macs).sum())
            .collect();
        let sizes = proportional_allocate(&loads, self.chiplets()).ok()?;
        let sizes = Self::enforce_caps(&loads, &self.size_caps(ranges, partitions), sizes)?;
        let sizes = self.repair(ranges, partitions, sizes)?;
        self.rebalance(ranges, partitions, sizes).ok()
    }

    pub fn search(&self, mode: ClusterMode) -> Result<SegmentSearch> {
        let len = self.range.len();
        let stats = &self.model.stats;
        let cmt = gen_cmt(self.range.clone(), self.model.net, stats);
        let counts: Vec<usize> = match mode {
            ClusterMode::Merged => (1..=len).collect(),
            ClusterMode::Singletons => vec![len],
        };
        let grid: Vec<(usize, usize)> = (0..=len)
            .flat_map(|idx| counts.iter().map(move |&n| (idx, n)))
            .collect();
        let results: Vec<Option<Allocation>> = grid
            .par_iter()
            .map(|&(idx, n)| self.allocate(cmt.division(n), &self.partitions_for(idx)))
            .collect();

        let mut trace = Vec::with_capacity(grid.len());
        let mut evaluations = 0;
        let mut best: Option<(f64, usize, usize, Vec<usize>)> = None;
        for (&(idx, n), r) in grid.iter().zip(results) {
            trace.push(TraceEntry {
                segment: self.index,
                n_cluster: n,
                idx,
                latency: r.as_ref().map(|a| a.latency),
            });
            let Some(a) = r else { continue };
            evaluations += a.evaluations;
            // grid order is (idx, n) ascending, so strict < keeps the
            // lexicographic (latency, idx, n) minimum
            if best.as_ref().is_none_or(|b| a.latency < b.0) {
                best = Some((a.latency, idx, n, a.sizes));
            }
        }
        let Some((latency, idx, n, sizes)) = best else {
            return Err(Error::NoFeasibleSchedule(format!(
                "segment {} (layers {}..{}) has no candidate within weight buffers",
                self.index, self.range.start, self.range.end
            )));
        };
        let segment = self.build(cmt.division(n), &sizes, &self.partitions_for(idx))?;
        Ok(SegmentSearch {
            segment,
            latency,
            trace,
            candidates_evaluated: evaluations,
        })
    }
}

/// Indices of the slowest and fastest clusters, lowest index on ties.
fn extremes(times: &[f64]) -> (usize, usize) {
    let (mut slow, mut fast) = (0, 0);
    for (j, &t) in times.iter().enumerate() {
        if t > times[slow] {
            slow = j;
        }
        if t < times[fast] {
            fast = j;
        }
    }
    (slow, fast)
}

/// Searches `range` of the model's network as a stand-alone segment.
pub fn search_segment(model: &CostModel, range: Range<usize>) -> Result<SegmentSearch> {
    SegmentProblem::new(model, range).search(ClusterMode::Merged)
}
