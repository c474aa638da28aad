//! Analytic latency, energy and weight-footprint model.
//!
//! A layer runs in three phases on its region of `n` chiplets: weight
//! preparation, computation, and hand-off of its output to the next layer.
//! Communication overlaps computation, so a layer takes
//! `t_pre + max(t_comm, t_comp)`. Layers of a cluster run back to back; the
//! clusters of a segment form a pipeline clocked by the slowest cluster, so a
//! batch of `m` samples drains after `(m + N - 1)` beats. Segments run one
//! after another, each paying a warm-up for loading its weights from DRAM and
//! for spilling and reloading the activations that cross segment boundaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{halo_elems, layer_stats, HardwareConfig, LayerDesc, LayerStats, Network, Partition};
use crate::placement::{links_into_sorted, Coord, Mesh};
use crate::schedule::{Cluster, Schedule, Segment};

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Per-chiplet compute time of `layer` split `n` ways.
///
/// Output channels map onto the MAC lanes of a chiplet and the reduction
/// over `c_in * k_h * k_w` onto the MACs of a lane. ISP shrinks the
/// channel share, which leaves lanes idle once it drops below the lane
/// count; WSP shrinks the row count instead.
pub fn compute_time(layer: &LayerDesc, p: Partition, n: usize, hw: &HardwareConfig) -> Result<f64> {
    if !p.allowed_for(layer) {
        return Err(Error::UnsupportedPartition {
            layer: layer.name.clone(),
            partition: p,
        });
    }
    let (h, w) = (layer.h_out(), layer.w_out());
    if n == 0 || (p == Partition::Wsp && n > h) {
        return Err(Error::InvalidSplit {
            layer: layer.name.clone(),
            n,
            h_out: h,
        });
    }
    let (channels, spatial) = match p {
        Partition::Isp => (div_ceil(layer.c_out, n), h * w),
        Partition::Wsp => (layer.c_out, div_ceil(h, n) * w),
    };
    let reduction = layer.c_in * layer.k_h * layer.k_w;
    let cycles = div_ceil(channels, hw.lanes()) as u64
        * spatial as u64
        * div_ceil(reduction, hw.macs_per_lane) as u64;
    Ok(cycles as f64 / hw.clock_hz)
}

/// One side of an activation hand-off.
#[derive(Debug, Clone, Copy)]
pub struct Endpoint<'a> {
    pub layer: &'a LayerDesc,
    pub partition: Partition,
    pub region_size: usize,
}

/// Bytes moved between chiplets when `this` hands its output to `next`.
/// `same_region` is true when both layers belong to the same cluster.
pub fn comm_volume(this: Endpoint, next: Endpoint, same_region: bool, hw: &HardwareConfig) -> Result<u64> {
    let output = layer_stats(this.layer)?.act_out_elems * hw.act_bytes;
    let volume = if same_region {
        let others = this.region_size.saturating_sub(1) as u64;
        let halo = match next.partition {
            Partition::Wsp => halo_elems(next.layer, next.region_size)? * hw.act_bytes,
            Partition::Isp => 0,
        };
        match (this.partition, next.partition) {
            (Partition::Wsp, Partition::Wsp) => halo,
            (Partition::Wsp, Partition::Isp) => others * output,
            (Partition::Isp, Partition::Wsp) => others * output + halo,
            (Partition::Isp, Partition::Isp) => others * output,
        }
    } else {
        match next.partition {
            Partition::Wsp => output,
            Partition::Isp => next.region_size as u64 * output,
        }
    };
    Ok(volume)
}

/// Transfer time of `volume` bytes from `src` to `dst`.
///
/// Inside one region every chiplet sends at the per-chiplet NoP bandwidth.
/// Between regions the usable link count is the smaller endpoint, capped by
/// the number of mesh links on their shared boundary (at least one).
pub fn comm_time(volume: u64, src: &[Coord], dst: &[Coord], hw: &HardwareConfig) -> f64 {
    if volume == 0 {
        return 0.0;
    }
    let links = if src == dst {
        src.len()
    } else {
        let mut sorted = dst.to_vec();
        sorted.sort_unstable();
        let boundary = links_into_sorted(src, &sorted).max(1);
        src.len().min(dst.len()).min(boundary)
    };
    volume as f64 / (links.max(1) as f64 * hw.nop_bw_per_chiplet)
}

/// How a region keeps the weights of its WSP layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightBuffering {
    /// Every chiplet holds a full copy of each WSP layer.
    Replicated,
    /// Every chiplet holds a 1/n tile and the tiles are all-gathered right
    /// before the layer runs.
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepTime {
    /// DRAM load, charged once when the segment is deployed.
    pub deploy: f64,
    /// Weight exchange paid by every sample.
    pub per_sample: f64,
}

pub fn prep_time(
    layer: &LayerDesc,
    p: Partition,
    n: usize,
    hw: &HardwareConfig,
    buffering: WeightBuffering,
    first_deployment: bool,
) -> PrepTime {
    let w = (layer_weight_elems(layer) * hw.wgt_bytes) as f64;
    let deploy = if first_deployment { w / hw.dram_bw_total } else { 0.0 };
    let per_sample = match (p, buffering) {
        (Partition::Wsp, WeightBuffering::Distributed) if n > 1 => {
            w * (n - 1) as f64 / (n as f64 * hw.nop_bw_per_chiplet)
        }
        _ => 0.0,
    };
    PrepTime { deploy, per_sample }
}

fn layer_weight_elems(layer: &LayerDesc) -> u64 {
    (layer.c_out * layer.c_in * layer.k_h * layer.k_w) as u64
}

/// Weight bytes held by each chiplet of one region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionFootprint {
    /// Sum of the 1/n tiles of every layer.
    pub resident: u64,
    /// Resident plus the largest full WSP copy materialized during compute.
    pub transient: u64,
    /// ISP tiles plus full copies of every WSP layer.
    pub replicated: u64,
    pub buffering: WeightBuffering,
    /// Bytes actually needed under the chosen buffering.
    pub peak: u64,
    pub feasible: bool,
}

/// Footprint of a region of `n` chiplets running layers with the given
/// weight sizes (bytes) and partitions. Full replication is chosen whenever
/// it fits, since it avoids the per-sample exchange.
pub fn region_footprint(
    layers: impl IntoIterator<Item = (u64, Partition)>,
    n: usize,
    capacity: u64,
) -> RegionFootprint {
    let n = n.max(1) as u64;
    let (mut resident, mut gather, mut replicated) = (0u64, 0u64, 0u64);
    for (w, p) in layers {
        let tile = w.div_ceil(n);
        resident += tile;
        match p {
            Partition::Isp => replicated += tile,
            Partition::Wsp => {
                replicated += w;
                gather = gather.max(w - tile);
            }
        }
    }
    let transient = resident + gather;
    let (buffering, peak) = if replicated <= capacity {
        (WeightBuffering::Replicated, replicated)
    } else {
        (WeightBuffering::Distributed, transient)
    };
    RegionFootprint {
        resident,
        transient,
        replicated,
        buffering,
        peak,
        feasible: peak <= capacity,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFootprint {
    pub regions: Vec<RegionFootprint>,
    pub feasible: bool,
}

pub fn weight_footprint(clusters: &[Cluster], net: &Network, hw: &HardwareConfig) -> SegmentFootprint {
    let cap = hw.chiplet_capacity();
    let regions: Vec<_> = clusters
        .iter()
        .map(|c| {
            let layers = c
                .range()
                .zip(&c.partitions)
                .map(|(k, &p)| (layer_weight_elems(&net.layers[k]) * hw.wgt_bytes, p));
            region_footprint(layers, c.region_size, cap)
        })
        .collect();
    let feasible = regions.iter().all(|r| r.feasible);
    SegmentFootprint { regions, feasible }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub t_pre: f64,
    pub t_comp: f64,
    pub t_comm: f64,
    pub t_layer: f64,
}

impl PhaseTimes {
    pub fn new(t_pre: f64, t_comp: f64, t_comm: f64) -> Self {
        PhaseTimes {
            t_pre,
            t_comp,
            t_comm,
            t_layer: t_pre + t_comm.max(t_comp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub name: String,
    pub partition: Partition,
    #[serde(flatten)]
    pub times: PhaseTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub t_cluster: f64,
    pub region_size: usize,
    /// MACs per sample.
    pub macs: u64,
    pub layers: Vec<LayerReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    /// `t_warmup + t_pipeline`.
    pub t_segment: f64,
    /// DRAM weight load plus boundary activation spill/reload for the batch.
    pub t_warmup: f64,
    /// `(m + N - 1) * max(t_cluster)`.
    pub t_pipeline: f64,
    pub nop_bytes_per_sample: u64,
    pub dram_bytes: u64,
    pub clusters: Vec<ClusterReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub e_mac: f64,
    pub e_nop: f64,
    pub e_dram: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.e_mac + self.e_nop + self.e_dram
    }

    fn add(&mut self, other: &Energy) {
        self.e_mac += other.e_mac;
        self.e_nop += other.e_nop;
        self.e_dram += other.e_dram;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub t_system: f64,
    pub m_samples: usize,
    pub segments: Vec<SegmentReport>,
    pub energy: Energy,
    /// Peak weight bytes per chiplet, row-major over the mesh.
    pub peak_weight_bytes: Vec<u64>,
}

impl CostReport {
    pub fn throughput(&self) -> f64 {
        self.m_samples as f64 / self.t_system
    }

    /// MACs per sample of every cluster, in schedule order.
    pub fn cluster_loads(&self) -> Vec<u64> {
        self.segments
            .iter()
            .flat_map(|s| s.clusters.iter().map(|c| c.macs))
            .collect()
    }

    /// Recomputes every level of the latency composition from the level
    /// below and requires bit-exact agreement.
    pub fn check_identities(&self) -> Result<()> {
        let fail = |what: String| Err(Error::Invariant(what));
        for (i, seg) in self.segments.iter().enumerate() {
            for (j, c) in seg.clusters.iter().enumerate() {
                for l in &c.layers {
                    let t = &l.times;
                    if t.t_layer != t.t_pre + t.t_comm.max(t.t_comp) {
                        return fail(format!("layer {} breaks t_pre + max(t_comm, t_comp)", l.layer));
                    }
                }
                let sum: f64 = c.layers.iter().map(|l| l.times.t_layer).sum();
                if c.t_cluster != sum {
                    return fail(format!("segment {i} cluster {j}: t_cluster != sum of layers"));
                }
            }
            if seg.t_pipeline != pipeline_time(self.m_samples, &seg.clusters) {
                return fail(format!("segment {i}: pipeline time mismatch"));
            }
            if seg.t_segment != seg.t_warmup + seg.t_pipeline {
                return fail(format!("segment {i}: t_segment != t_warmup + t_pipeline"));
            }
        }
        let sum: f64 = self.segments.iter().map(|s| s.t_segment).sum();
        if self.t_system != sum {
            return fail("t_system != sum of segments".into());
        }
        Ok(())
    }

    /// Flattened per-layer timing table.
    pub fn write_layer_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        #[derive(Serialize)]
        struct Row {
            segment: usize,
            cluster: usize,
            layer: usize,
            t_pre: f64,
            t_comp: f64,
            t_comm: f64,
            t_layer: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, seg) in self.segments.iter().enumerate() {
            for (j, c) in seg.clusters.iter().enumerate() {
                for l in &c.layers {
                    w.serialize(Row {
                        segment: i,
                        cluster: j,
                        layer: l.layer,
                        t_pre: l.times.t_pre,
                        t_comp: l.times.t_comp,
                        t_comm: l.times.t_comm,
                        t_layer: l.times.t_layer,
                    })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Population standard deviation over mean; 0 for fewer than two values.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Closed-form pipeline drain time of a batch of `m` samples.
pub fn pipeline_time(m: usize, clusters: &[ClusterReport]) -> f64 {
    let slowest = clusters.iter().map(|c| c.t_cluster).fold(0.0, f64::max);
    stage_pipeline_time(m, clusters.len(), slowest)
}

pub fn stage_pipeline_time(m: usize, stages: usize, slowest: f64) -> f64 {
    (m + stages).saturating_sub(1) as f64 * slowest
}

/// Where a segment sits in the schedule; decides which activations spill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentPosition {
    pub first: bool,
    pub last: bool,
}

impl SegmentPosition {
    pub const ONLY: SegmentPosition = SegmentPosition { first: true, last: true };

    pub fn of(index: usize, count: usize) -> Self {
        SegmentPosition {
            first: index == 0,
            last: index + 1 == count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEval {
    pub report: SegmentReport,
    pub energy: Energy,
    pub footprint: Vec<u64>,
}

/// Network, hardware and batch size bound together with cached layer stats.
#[derive(Debug, Clone)]
pub struct CostModel<'a> {
    pub net: &'a Network,
    pub hw: &'a HardwareConfig,
    pub m: usize,
    pub stats: Vec<LayerStats>,
}

impl<'a> CostModel<'a> {
    pub fn new(net: &'a Network, hw: &'a HardwareConfig, m: usize) -> Self {
        CostModel {
            net,
            hw,
            m,
            stats: net.stats(),
        }
    }

    pub fn mesh(&self) -> Mesh {
        Mesh::of(self.hw)
    }

    pub fn weight_bytes(&self, layer: usize) -> u64 {
        self.stats[layer].weight_elems * self.hw.wgt_bytes
    }

    /// Evaluates one segment. `index` only labels errors.
    pub fn evaluate_segment(&self, seg: &Segment, index: usize, pos: SegmentPosition) -> Result<SegmentEval> {
        let hw = self.hw;
        let cap = hw.chiplet_capacity();
        let footprint = weight_footprint(&seg.clusters, self.net, hw);
        if !seg.streamed {
            if let Some((j, r)) = footprint.regions.iter().enumerate().find(|(_, r)| !r.feasible) {
                let at = seg.clusters[j].region_placement[0];
                return Err(Error::InfeasibleSchedule {
                    segment: index,
                    row: at.row,
                    col: at.col,
                    needed: r.peak,
                    capacity: cap,
                });
            }
        }

        let mut nop_bytes = 0u64;
        let mut weight_bytes = 0u64;
        let mut macs_total = 0u64;
        let mut clusters = Vec::with_capacity(seg.clusters.len());
        for (j, c) in seg.clusters.iter().enumerate() {
            let n = c.region_size;
            let buffering = footprint.regions[j].buffering;
            let mut layers = Vec::with_capacity(c.len());
            let mut macs = 0;
            for k in c.range() {
                let layer = &self.net.layers[k];
                let p = c.partition_of(k);
                let w = self.weight_bytes(k);
                weight_bytes += w;
                macs += self.stats[k].macs;

                let t_comp = compute_time(layer, p, n, hw)?;
                let t_pre = prep_time(layer, p, n, hw, buffering, false).per_sample;
                if t_pre > 0.0 {
                    nop_bytes += w * (n as u64 - 1);
                }

                let this = Endpoint { layer, partition: p, region_size: n };
                let t_comm = if k + 1 < c.end {
                    let next = Endpoint {
                        layer: &self.net.layers[k + 1],
                        partition: c.partition_of(k + 1),
                        region_size: n,
                    };
                    let v = comm_volume(this, next, true, hw)?;
                    nop_bytes += v;
                    comm_time(v, &c.region_placement, &c.region_placement, hw)
                } else if let Some(nc) = seg.clusters.get(j + 1) {
                    let next = Endpoint {
                        layer: &self.net.layers[nc.start],
                        partition: nc.partitions[0],
                        region_size: nc.region_size,
                    };
                    let v = comm_volume(this, next, false, hw)?;
                    nop_bytes += v;
                    comm_time(v, &c.region_placement, &nc.region_placement, hw)
                } else {
                    0.0
                };

                layers.push(LayerReport {
                    layer: k,
                    name: layer.name.clone(),
                    partition: p,
                    times: PhaseTimes::new(t_pre, t_comp, t_comm),
                });
            }
            macs_total += macs;
            let t_cluster = layers.iter().map(|l| l.times.t_layer).sum();
            clusters.push(ClusterReport {
                t_cluster,
                region_size: n,
                macs,
                layers,
            });
        }

        let range = seg.range();
        let mut spill_elems = 0u64;
        if !pos.first {
            spill_elems += self.stats[range.start].in_elems;
        }
        if !pos.last {
            spill_elems += self.stats[range.end - 1].act_out_elems;
        }
        let dram_bytes = weight_bytes + spill_elems * hw.act_bytes * self.m as u64;
        let t_warmup = dram_bytes as f64 / hw.dram_bw_total;
        let t_pipeline = pipeline_time(self.m, &clusters);

        let m = self.m as f64;
        let energy = Energy {
            e_mac: hw.e_mac * macs_total as f64 * m,
            e_nop: hw.e_nop_bit * 8.0 * nop_bytes as f64 * m,
            e_dram: hw.e_dram_bit * 8.0 * dram_bytes as f64,
        };

        let mesh = self.mesh();
        let mut per_chiplet = vec![0u64; mesh.len()];
        for (c, r) in seg.clusters.iter().zip(&footprint.regions) {
            let bytes = if seg.streamed { r.peak.min(cap) } else { r.peak };
            for &at in &c.region_placement {
                per_chiplet[mesh.index(at)] = bytes;
            }
        }

        Ok(SegmentEval {
            report: SegmentReport {
                t_segment: t_warmup + t_pipeline,
                t_warmup,
                t_pipeline,
                nop_bytes_per_sample: nop_bytes,
                dram_bytes,
                clusters,
            },
            energy,
            footprint: per_chiplet,
        })
    }

    pub fn evaluate(&self, schedule: &Schedule) -> Result<CostReport> {
        schedule.validate(self.net, self.hw)?;
        let count = schedule.segments.len();
        let mut segments = Vec::with_capacity(count);
        let mut energy = Energy::default();
        let mut peak = vec![0u64; self.hw.num_chiplets];
        for (i, seg) in schedule.segments.iter().enumerate() {
            let eval = self.evaluate_segment(seg, i, SegmentPosition::of(i, count))?;
            energy.add(&eval.energy);
            for (p, b) in peak.iter_mut().zip(&eval.footprint) {
                *p = (*p).max(*b);
            }
            segments.push(eval.report);
        }
        let t_system = segments.iter().map(|s| s.t_segment).sum();
        let report = CostReport {
            t_system,
            m_samples: self.m,
            segments,
            energy,
            peak_weight_bytes: peak,
        };
        debug_assert!(report.check_identities().is_ok());
        Ok(report)
    }
}

/// Evaluates a complete schedule for a batch of `m` samples.
pub fn evaluate(schedule: &Schedule, net: &Network, hw: &HardwareConfig, m: usize) -> Result<CostReport> {
    CostModel::new(net, hw, m).evaluate(schedule)
}
