//! JSON network and hardware files.
//!
//! Network file:
//!
//! ```json
//! { "name": "toy",
//!   "layers": [ { "kind": "conv", "c_in": 3, "c_out": 16, "h_in": 32, "w_in": 32,
//!                 "k": 3, "stride": 1, "pad": 1, "pool": 2 },
//!               { "kind": "fc", "c_in": 4096, "c_out": 10 } ] }
//! ```
//!
//! `k`, `stride`, `pad` and `pool` default to 1, 1, 0 and 1; fc layers omit
//! the spatial fields. A hardware file is an object with any subset of the
//! [`HardwareConfig`] field names.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{square_mesh, HardwareConfig, LayerDesc, LayerKind, Network};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    name: String,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    kind: LayerKind,
    #[serde(default)]
    name: Option<String>,
    c_in: usize,
    c_out: usize,
    #[serde(default)]
    h_in: Option<usize>,
    #[serde(default)]
    w_in: Option<usize>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    stride: Option<usize>,
    #[serde(default)]
    pad: Option<usize>,
    #[serde(default)]
    pool: Option<usize>,
}

fn parse_err(source_name: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        message: message.into(),
    }
}

pub fn parse_network(text: &str, source_name: &str) -> Result<Network> {
    let file: NetworkFile =
        serde_json::from_str(text).map_err(|e| parse_err(source_name, e.to_string()))?;
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, e) in file.layers.into_iter().enumerate() {
        let name = e.name.unwrap_or_else(|| format!("layer{i}"));
        let layer = match e.kind {
            LayerKind::Fc => {
                let spatial = [("h_in", e.h_in), ("w_in", e.w_in), ("k", e.k), ("stride", e.stride), ("pool", e.pool)];
                if let Some((field, _)) = spatial.iter().find(|(_, v)| v.is_some_and(|v| v != 1)) {
                    return Err(parse_err(
                        source_name,
                        format!("layers[{i}].{field}: fc layers have no spatial extent"),
                    ));
                }
                if e.pad.is_some_and(|p| p != 0) {
                    return Err(parse_err(source_name, format!("layers[{i}].pad: must be 0 for fc")));
                }
                LayerDesc::fc(name, e.c_in, e.c_out)
            }
            LayerKind::Conv => {
                let h_in = e
                    .h_in
                    .ok_or_else(|| parse_err(source_name, format!("layers[{i}].h_in: missing")))?;
                let w_in = e.w_in.unwrap_or(h_in);
                let k = e.k.unwrap_or(1);
                LayerDesc {
                    name,
                    kind: LayerKind::Conv,
                    c_in: e.c_in,
                    c_out: e.c_out,
                    h_in,
                    w_in,
                    k_h: k,
                    k_w: k,
                    stride: e.stride.unwrap_or(1),
                    padding: e.pad.unwrap_or(0),
                    pool: e.pool.unwrap_or(1),
                }
            }
        };
        layers.push(layer);
    }
    Network::new(file.name, layers)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_err(&path.display().to_string(), e.to_string()))?;
    parse_network(&text, &path.display().to_string())
}

pub fn parse_hardware(text: &str, source_name: &str) -> Result<HardwareConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| parse_err(source_name, e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err(source_name, "top level must be an object"))?;
    let has = |k: &str| obj.contains_key(k);
    let mut hw: HardwareConfig =
        serde_json::from_value(value.clone()).map_err(|e| parse_err(source_name, e.to_string()))?;
    // Fill the mesh or the chiplet count from whichever side was given.
    match (has("num_chiplets"), has("mesh_rows") || has("mesh_cols")) {
        (true, false) => {
            let (r, c) = square_mesh(hw.num_chiplets.max(1));
            hw.mesh_rows = r;
            hw.mesh_cols = c;
        }
        (false, true) => hw.num_chiplets = hw.mesh_rows * hw.mesh_cols,
        _ => {}
    }
    hw.validate()?;
    Ok(hw)
}

pub fn load_hardware(path: impl AsRef<Path>) -> Result<HardwareConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_err(&path.display().to_string(), e.to_string()))?;
    parse_hardware(&text, &path.display().to_string())
}
