use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HardwareConfig, Network, Partition};
use crate::placement::{zigzag_place, Coord, Mesh};

/// One pipeline stage: a contiguous run of layers sharing a chiplet region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub end: usize,
    pub region_size: usize,
    pub region_placement: Vec<Coord>,
    /// One entry per layer in `start..end`.
    pub partitions: Vec<Partition>,
}

impl Cluster {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn partition_of(&self, layer: usize) -> Partition {
        self.partitions[layer - self.start]
    }
}

/// Layers deployed on the whole package at once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub clusters: Vec<Cluster>,
    /// The segment's weights exceed the package buffers and are streamed
    /// from DRAM tile by tile over the batch; capacity checks are skipped.
    #[serde(default)]
    pub streamed: bool,
}

impl Segment {
    /// Places `ranges` on zigzag regions of the given sizes. `partitions` is
    /// indexed from the first layer of the first range.
    pub fn build(
        ranges: &[Range<usize>],
        sizes: &[usize],
        partitions: &[Partition],
        mesh: Mesh,
        streamed: bool,
    ) -> Result<Segment> {
        if ranges.len() != sizes.len() || ranges.is_empty() {
            return Err(Error::Invariant(format!(
                "{} clusters but {} region sizes",
                ranges.len(),
                sizes.len()
            )));
        }
        let base = ranges[0].start;
        let placements = zigzag_place(sizes, mesh)?;
        let clusters = ranges
            .iter()
            .zip(sizes)
            .zip(placements)
            .map(|((r, &n), place)| Cluster {
                start: r.start,
                end: r.end,
                region_size: n,
                region_placement: place,
                partitions: partitions[r.start - base..r.end - base].to_vec(),
            })
            .collect();
        Ok(Segment { clusters, streamed })
    }

    pub fn range(&self) -> Range<usize> {
        self.clusters.first().map_or(0, |c| c.start)..self.clusters.last().map_or(0, |c| c.end)
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.region_size).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

impl Schedule {
    pub fn num_clusters(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.clusters.len()).collect()
    }

    /// Checks the structural invariants against `net` and `hw`.
    pub fn validate(&self, net: &Network, hw: &HardwareConfig) -> Result<()> {
        let bad = |msg: String| Err(Error::Invariant(msg));
        let mesh = Mesh::of(hw);
        let mut next = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.clusters.is_empty() {
                return bad(format!("segment {i} has no clusters"));
            }
            if seg.streamed && seg.clusters.len() != 1 {
                return bad(format!("streamed segment {i} must be a single cluster"));
            }
            let mut seen = vec![false; mesh.len()];
            let mut total = 0;
            for (j, c) in seg.clusters.iter().enumerate() {
                if c.start != next || c.end <= c.start {
                    return bad(format!(
                        "segment {i} cluster {j} spans {}..{}, expected to start at {next}",
                        c.start, c.end
                    ));
                }
                next = c.end;
                if c.partitions.len() != c.len() {
                    return bad(format!("segment {i} cluster {j} partition count mismatch"));
                }
                for (k, p) in c.range().zip(&c.partitions) {
                    let Some(layer) = net.layers.get(k) else {
                        return bad(format!("layer index {k} out of range"));
                    };
                    if !p.allowed_for(layer) {
                        return Err(Error::UnsupportedPartition {
                            layer: layer.name.clone(),
                            partition: *p,
                        });
                    }
                }
                if c.region_size == 0 || c.region_placement.len() != c.region_size {
                    return bad(format!("segment {i} cluster {j} region size mismatch"));
                }
                for &coord in &c.region_placement {
                    if !mesh.contains(coord) {
                        return bad(format!("chiplet {coord:?} outside the mesh"));
                    }
                    let slot = &mut seen[mesh.index(coord)];
                    if *slot {
                        return bad(format!("chiplet {coord:?} assigned twice in segment {i}"));
                    }
                    *slot = true;
                }
                total += c.region_size;
            }
            if total != hw.num_chiplets {
                return Err(Error::SizeMismatch {
                    expected: hw.num_chiplets,
                    got: total,
                });
            }
        }
        if next != net.len() {
            return bad(format!("schedule covers {next} of {} layers", net.len()));
        }
        Ok(())
    }
}
