//! Layer, network and hardware descriptions.
//!
//! Layers are conv or fully-connected; pooling and activation stages are
//! folded into the preceding conv through [`LayerDesc::pool`], which divides
//! the conv output plane before it is handed to the next layer. Pooling
//! contributes no MACs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

/// Intra-layer partitioning across the chiplets of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Partition {
    /// Input-shared: inputs replicated, output channels split.
    #[serde(rename = "ISP")]
    Isp,
    /// Weight-shared: output rows split, weights replicated.
    #[serde(rename = "WSP")]
    Wsp,
}

impl Partition {
    pub fn allowed_for(self, layer: &LayerDesc) -> bool {
        !(self == Partition::Wsp && layer.kind == LayerKind::Fc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub name: String,
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride: usize,
    pub padding: usize,
    /// Down-sampling factor of a folded pooling stage (1 = none).
    pub pool: usize,
}

impl LayerDesc {
    pub fn conv(
        name: impl Into<String>,
        c_in: usize,
        c_out: usize,
        hw_in: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        LayerDesc {
            name: name.into(),
            kind: LayerKind::Conv,
            c_in,
            c_out,
            h_in: hw_in,
            w_in: hw_in,
            k_h: k,
            k_w: k,
            stride,
            padding,
            pool: 1,
        }
    }

    pub fn fc(name: impl Into<String>, c_in: usize, c_out: usize) -> Self {
        LayerDesc {
            name: name.into(),
            kind: LayerKind::Fc,
            c_in,
            c_out,
            h_in: 1,
            w_in: 1,
            k_h: 1,
            k_w: 1,
            stride: 1,
            padding: 0,
            pool: 1,
        }
    }

    pub fn with_pool(mut self, pool: usize) -> Self {
        self.pool = pool;
        self
    }

    fn out_dim(inp: usize, pad: usize, k: usize, stride: usize) -> usize {
        let span = inp + 2 * pad;
        if span < k || stride == 0 {
            0
        } else {
            (span - k) / stride + 1
        }
    }

    /// Conv output height, before any folded pooling.
    pub fn h_out(&self) -> usize {
        Self::out_dim(self.h_in, self.padding, self.k_h, self.stride)
    }

    pub fn w_out(&self) -> usize {
        Self::out_dim(self.w_in, self.padding, self.k_w, self.stride)
    }

    /// Height of the activation handed to the next layer.
    pub fn h_next(&self) -> usize {
        self.h_out() / self.pool.max(1)
    }

    pub fn w_next(&self) -> usize {
        self.w_out() / self.pool.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidLayer {
            layer: self.name.clone(),
            reason,
        };
        let counts = [
            ("c_in", self.c_in),
            ("c_out", self.c_out),
            ("h_in", self.h_in),
            ("w_in", self.w_in),
            ("k_h", self.k_h),
            ("k_w", self.k_w),
            ("stride", self.stride),
            ("pool", self.pool),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(bad(format!("{field} must be >= 1")));
            }
        }
        if self.kind == LayerKind::Fc
            && (self.h_in, self.w_in, self.k_h, self.k_w, self.stride, self.padding, self.pool)
                != (1, 1, 1, 1, 1, 0, 1)
        {
            return Err(bad("fc layers have unit spatial extent".into()));
        }
        if self.h_out() < 1 || self.w_out() < 1 {
            return Err(bad(format!(
                "output plane {}x{} is empty",
                self.h_out(),
                self.w_out()
            )));
        }
        if self.h_next() < 1 || self.w_next() < 1 {
            return Err(bad(format!("pool {} empties the output plane", self.pool)));
        }
        Ok(())
    }
}

/// Per-layer operand counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    pub macs: u64,
    pub weight_elems: u64,
    pub in_elems: u64,
    /// Conv output elements before folded pooling.
    pub out_elems: u64,
    /// Elements handed to the next layer (after folded pooling).
    pub act_out_elems: u64,
}

pub fn layer_stats(layer: &LayerDesc) -> Result<LayerStats> {
    layer.validate()?;
    let l = |v: usize| v as u64;
    let stats = match layer.kind {
        LayerKind::Conv => {
            let plane = l(layer.h_out()) * l(layer.w_out());
            let taps = l(layer.c_in) * l(layer.k_h) * l(layer.k_w);
            LayerStats {
                macs: l(layer.c_out) * plane * taps,
                weight_elems: l(layer.c_out) * taps,
                in_elems: l(layer.c_in) * l(layer.h_in) * l(layer.w_in),
                out_elems: l(layer.c_out) * plane,
                act_out_elems: l(layer.c_out) * l(layer.h_next()) * l(layer.w_next()),
            }
        }
        LayerKind::Fc => LayerStats {
            macs: l(layer.c_in) * l(layer.c_out),
            weight_elems: l(layer.c_in) * l(layer.c_out),
            in_elems: l(layer.c_in),
            out_elems: l(layer.c_out),
            act_out_elems: l(layer.c_out),
        },
    };
    Ok(stats)
}

/// Input rows duplicated across an `n_parts`-way row split of a conv input.
pub fn halo_elems(layer: &LayerDesc, n_parts: usize) -> Result<u64> {
    if layer.kind == LayerKind::Fc {
        return Err(Error::UnsupportedPartition {
            layer: layer.name.clone(),
            partition: Partition::Wsp,
        });
    }
    let overlap = layer.k_h.saturating_sub(layer.stride) as u64;
    Ok(n_parts.saturating_sub(1) as u64 * overlap * layer.w_in as u64 * layer.c_in as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub layers: Vec<LayerDesc>,
}

impl Network {
    /// Builds a network, checking every layer and the shape chain between
    /// consecutive layers.
    pub fn new(name: impl Into<String>, layers: Vec<LayerDesc>) -> Result<Self> {
        let net = Network {
            name: name.into(),
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Invariant(format!(
                "network `{}` has no layers",
                self.name
            )));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            let ok = match (prev.kind, next.kind) {
                (_, LayerKind::Conv) => {
                    prev.kind == LayerKind::Conv
                        && next.c_in == prev.c_out
                        && next.h_in == prev.h_next()
                        && next.w_in == prev.w_next()
                }
                (_, LayerKind::Fc) => next.c_in == prev.c_out * prev.h_next() * prev.w_next(),
            };
            if !ok {
                return Err(Error::Invariant(format!(
                    "layer {} `{}` ({}x{}x{} out) does not chain into layer {} `{}` ({}x{}x{} in)",
                    k,
                    prev.name,
                    prev.c_out,
                    prev.h_next(),
                    prev.w_next(),
                    k + 1,
                    next.name,
                    next.c_in,
                    next.h_in,
                    next.w_in
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Sub-network over `range`, keeping the original layer names.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Network> {
        if range.start >= range.end || range.end > self.layers.len() {
            return Err(Error::Invariant(format!(
                "layer range {}..{} outside 0..{}",
                range.start,
                range.end,
                self.layers.len()
            )));
        }
        Network::new(
            format!("{}[{}..{}]", self.name, range.start, range.end),
            self.layers[range].to_vec(),
        )
    }

    pub fn stats(&self) -> Vec<LayerStats> {
        self.layers
            .iter()
            .map(|l| layer_stats(l).expect("network layers are validated"))
            .collect()
    }
}

/// Package-level hardware parameters. Defaults describe a 4x4 mesh of
/// chiplets, each with 16 PEs of 8 lanes x 8 MACs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub num_chiplets: usize,
    pub mesh_rows: usize,
    pub mesh_cols: usize,
    pub pes_per_chiplet: usize,
    pub lanes_per_pe: usize,
    pub macs_per_lane: usize,
    pub clock_hz: f64,
    /// Bytes.
    pub weight_buf_per_pe: u64,
    /// Bytes.
    pub global_buf: u64,
    /// Bytes/s per chiplet.
    pub nop_bw_per_chiplet: f64,
    /// Bytes/s across the package.
    pub dram_bw_total: f64,
    /// Joules per MAC.
    pub e_mac: f64,
    /// Joules per NoP bit.
    pub e_nop_bit: f64,
    /// Joules per DRAM bit.
    pub e_dram_bit: f64,
    pub act_bytes: u64,
    pub wgt_bytes: u64,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        HardwareConfig {
            num_chiplets: 16,
            mesh_rows: 4,
            mesh_cols: 4,
            pes_per_chiplet: 16,
            lanes_per_pe: 8,
            macs_per_lane: 8,
            clock_hz: 8.0e8,
            weight_buf_per_pe: 65536,
            global_buf: 65536,
            nop_bw_per_chiplet: 1.0e11,
            dram_bw_total: 1.0e11,
            e_mac: 0.2e-12,
            e_nop_bit: 1.3e-12,
            e_dram_bit: 4.0e-12,
            act_bytes: 1,
            wgt_bytes: 1,
        }
    }
}

/// Most-square factorization `rows x cols` of `n` with `rows <= cols`.
pub fn square_mesh(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}

impl HardwareConfig {
    /// Default hardware with `n` chiplets on the most-square mesh.
    pub fn with_chiplets(n: usize) -> Self {
        HardwareConfig::default().resized(n)
    }

    pub fn resized(mut self, n: usize) -> Self {
        let (rows, cols) = square_mesh(n);
        self.num_chiplets = n;
        self.mesh_rows = rows;
        self.mesh_cols = cols;
        self
    }

    /// Weight bytes one chiplet can buffer.
    pub fn chiplet_capacity(&self) -> u64 {
        self.pes_per_chiplet as u64 * self.weight_buf_per_pe
    }

    pub fn package_capacity(&self) -> u64 {
        self.chiplet_capacity() * self.num_chiplets as u64
    }

    /// MAC lanes per chiplet that work on distinct output channels.
    pub fn lanes(&self) -> usize {
        self.pes_per_chiplet * self.lanes_per_pe
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_chiplets", self.num_chiplets as u64),
            ("mesh_rows", self.mesh_rows as u64),
            ("mesh_cols", self.mesh_cols as u64),
            ("pes_per_chiplet", self.pes_per_chiplet as u64),
            ("lanes_per_pe", self.lanes_per_pe as u64),
            ("macs_per_lane", self.macs_per_lane as u64),
            ("weight_buf_per_pe", self.weight_buf_per_pe),
            ("global_buf", self.global_buf),
            ("act_bytes", self.act_bytes),
            ("wgt_bytes", self.wgt_bytes),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::Invariant(format!("hardware field `{field}` must be > 0")));
            }
        }
        let reals = [
            ("clock_hz", self.clock_hz),
            ("nop_bw_per_chiplet", self.nop_bw_per_chiplet),
            ("dram_bw_total", self.dram_bw_total),
            ("e_mac", self.e_mac),
            ("e_nop_bit", self.e_nop_bit),
            ("e_dram_bit", self.e_dram_bit),
        ];
        for (field, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invariant(format!(
                    "hardware field `{field}` must be positive and finite"
                )));
            }
        }
        if self.mesh_rows * self.mesh_cols != self.num_chiplets {
            return Err(Error::Invariant(format!(
                "mesh {}x{} does not hold {} chiplets",
                self.mesh_rows, self.mesh_cols, self.num_chiplets
            )));
        }
        Ok(())
    }
}
