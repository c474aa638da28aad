use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::{CostModel, CostReport, SegmentPosition};
use crate::error::{Error, Result};
use crate::model::{HardwareConfig, Network};
use crate::schedule::Schedule;
use crate::search::divide::{divide_segments, segment_fits, SegmentSpan};
use crate::search::segment::{ClusterMode, SegmentProblem, TraceEntry};

/// Scheduling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Merged pipeline: clusters of layers per pipeline stage.
    #[serde(rename = "scope")]
    Merged,
    #[serde(rename = "sequential")]
    Sequential,
    #[serde(rename = "full_pipeline")]
    FullPipeline,
    #[serde(rename = "segmented")]
    Segmented,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Merged, Method::Sequential, Method::FullPipeline, Method::Segmented];

    pub fn name(self) -> &'static str {
        match self {
            Method::Merged => "scope",
            Method::Sequential => "sequential",
            Method::FullPipeline => "full_pipeline",
            Method::Segmented => "segmented",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected scope, sequential, full_pipeline or segmented)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub method: Method,
    pub schedule: Schedule,
    pub report: CostReport,
    pub candidates_evaluated: usize,
    pub trace: Vec<TraceEntry>,
}

/// Merged-pipeline schedule: greedy segmentation, then the full cluster /
/// region / partition search inside each segment.
pub fn schedule_scope(net: &Network, hw: &HardwareConfig, m: usize) -> Result<SearchResult> {
    plan(Method::Merged, net, hw, m)
}

pub fn schedule_baseline(kind: Method, net: &Network, hw: &HardwareConfig, m: usize) -> Result<SearchResult> {
    plan(kind, net, hw, m)
}

fn spans_for(method: Method, net: &Network, hw: &HardwareConfig) -> Result<Vec<SegmentSpan>> {
    let spans = match method {
        Method::Merged | Method::Segmented => divide_segments(net, hw),
        Method::Sequential => (0..net.len())
            .map(|k| SegmentSpan {
                range: k..k + 1,
                streamed: !segment_fits(net, hw, k..k + 1),
            })
            .collect(),
        Method::FullPipeline => {
            let weights: u64 = net.stats().iter().map(|s| s.weight_elems * hw.wgt_bytes).sum();
            if weights > hw.package_capacity() {
                return Err(Error::NoFeasibleSchedule(format!(
                    "weight buffer overflow: {} needs {weights} B of weights, package buffers hold {} B",
                    net.name,
                    hw.package_capacity()
                )));
            }
            if net.len() > hw.num_chiplets {
                return Err(Error::NoFeasibleSchedule(format!(
                    "{} layers cannot each get one of {} chiplets",
                    net.len(),
                    hw.num_chiplets
                )));
            }
            vec![SegmentSpan {
                range: 0..net.len(),
                streamed: false,
            }]
        }
    };
    Ok(spans)
}

fn plan(method: Method, net: &Network, hw: &HardwareConfig, m: usize) -> Result<SearchResult> {
    hw.validate()?;
    net.validate()?;
    if m == 0 {
        return Err(Error::Invariant("batch size must be >= 1".into()));
    }
    let spans = spans_for(method, net, hw)?;
    let model = CostModel::new(net, hw, m);
    let mode = match method {
        Method::Merged => ClusterMode::Merged,
        _ => ClusterMode::Singletons,
    };
    let count = spans.len();
    let mut segments = Vec::with_capacity(count);
    let mut trace = Vec::new();
    let mut evaluated = 0;
    for (i, span) in spans.into_iter().enumerate() {
        let problem = SegmentProblem {
            model: &model,
            range: span.range,
            position: SegmentPosition::of(i, count),
            streamed: span.streamed,
            index: i,
        };
        let found = problem.search(mode)?;
        evaluated += found.candidates_evaluated;
        trace.extend(found.trace);
        segments.push(found.segment);
    }
    let schedule = Schedule { segments };
    let report = model.evaluate(&schedule)?;
    Ok(SearchResult {
        method,
        schedule,
        report,
        candidates_evaluated: evaluated,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("pipeline".parse::<Method>().is_err());
    }
}
