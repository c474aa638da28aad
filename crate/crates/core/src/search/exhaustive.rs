//! Brute-force oracle over every cluster division, region composition and
//! per-layer partition of one segment.

use std::io::Write;
use std::ops::Range;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{CostModel, SegmentPosition};
use crate::error::{Error, Result};
use crate::model::Partition;
use crate::schedule::Segment;
use crate::search::count::design_space_size;

pub const DEFAULT_ENUM_LIMIT: u64 = 10_000_000;
pub const ENUM_LIMIT_VAR: &str = "SCOPE_MAX_ENUM";

/// Enumeration cap, from `SCOPE_MAX_ENUM` when set.
pub fn enum_limit_from_env() -> u64 {
    std::env::var(ENUM_LIMIT_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_LIMIT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub candidate_id: u64,
    pub latency: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    /// Every enumerated candidate, in enumeration order.
    pub candidates: Vec<Candidate>,
    pub best: Option<(Segment, f64)>,
}

impl ExhaustiveResult {
    /// Feasible latencies, ascending.
    pub fn sorted_latencies(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.candidates.iter().filter_map(|c| c.latency).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn feasible(&self) -> usize {
        self.candidates.iter().filter(|c| c.latency.is_some()).count()
    }

    /// Fraction of feasible candidates strictly faster than `latency`.
    pub fn percentile_rank(&self, latency: f64) -> f64 {
        let sorted = self.sorted_latencies();
        if sorted.is_empty() {
            return 0.0;
        }
        let faster = sorted.partition_point(|&l| l < latency);
        faster as f64 / sorted.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["candidate_id", "latency", "feasible"])?;
        for c in &self.candidates {
            let lat = c.latency.map(|l| l.to_string()).unwrap_or_default();
            w.write_record([c.candidate_id.to_string(), lat, c.latency.is_some().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Contiguous divisions of `start..start + len`, ordered by the bitmask of
/// cut positions.
fn divisions(start: usize, len: usize) -> Vec<Vec<Range<usize>>> {
    (0u64..1 << (len - 1))
        .map(|cuts| {
            let mut out = Vec::new();
            let mut lo = start;
            for i in 0..len - 1 {
                if cuts >> i & 1 == 1 {
                    out.push(lo..start + i + 1);
                    lo = start + i + 1;
                }
            }
            out.push(lo..start + len);
            out
        })
        .collect()
}

/// Ordered ways to write `total` as `parts` positive integers.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 1..=left.saturating_sub(parts - 1) {
            cur.push(first);
            go(left - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && parts <= total {
        go(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

pub fn exhaustive_search(model: &CostModel, range: Range<usize>, limit: u64) -> Result<ExhaustiveResult> {
    let len = range.len();
    let chiplets = model.hw.num_chiplets;
    let size = design_space_size(len, chiplets);
    if size > BigUint::from(limit) {
        return Err(Error::SpaceTooLarge {
            size: size.to_string(),
            limit,
        });
    }
    let mesh = model.mesh();
    let configs: Vec<(Vec<Range<usize>>, Vec<usize>)> = divisions(range.start, len)
        .into_iter()
        .flat_map(|div| {
            compositions(chiplets, div.len())
                .into_iter()
                .map(move |sizes| (div.clone(), sizes))
        })
        .collect();

    let evaluated: Vec<Vec<(Option<f64>, u64)>> = configs
        .par_iter()
        .map(|(div, sizes)| {
            (0u64..1 << len)
                .map(|mask| {
                    let parts: Vec<Partition> = (0..len)
                        .map(|i| if mask >> i & 1 == 1 { Partition::Wsp } else { Partition::Isp })
                        .collect();
                    let lat = Segment::build(div, sizes, &parts, mesh, false)
                        .and_then(|seg| model.evaluate_segment(&seg, 0, SegmentPosition::ONLY))
                        .ok()
                        .map(|e| e.report.t_segment);
                    (lat, mask)
                })
                .collect()
        })
        .collect();

    let mut candidates = Vec::new();
    let mut best: Option<(usize, u64, f64)> = None;
    for (ci, row) in evaluated.iter().enumerate() {
        for &(lat, mask) in row {
            if let Some(l) = lat {
                if best.is_none_or(|b| l < b.2) {
                    best = Some((ci, mask, l));
                }
            }
            candidates.push(Candidate {
                candidate_id: candidates.len() as u64,
                latency: lat,
            });
        }
    }
    let best = best
        .map(|(ci, mask, l)| {
            let parts: Vec<Partition> = (0..len)
                .map(|i| if mask >> i & 1 == 1 { Partition::Wsp } else { Partition::Isp })
                .collect();
            Segment::build(&configs[ci].0, &configs[ci].1, &parts, mesh, false).map(|s| (s, l))
        })
        .transpose()?;
    Ok(ExhaustiveResult { candidates, best })
}
