//! Built-in networks.
//!
//! Residual networks are flattened to their main path. Projection shortcuts
//! and the element-wise adds are not represented; pooling is folded into the
//! conv that precedes it.

use crate::error::{Error, Result};
use crate::model::{LayerDesc, Network};

pub const BUILTIN_NETWORKS: &[&str] = &[
    "alexnet",
    "vgg16",
    "darknet19",
    "resnet18",
    "resnet34",
    "resnet50",
    "resnet101",
    "resnet152",
];

pub fn builtin_network(name: &str) -> Result<Network> {
    let layers = match name.to_ascii_lowercase().as_str() {
        "alexnet" => alexnet(),
        "vgg16" => vgg16(),
        "darknet19" => darknet19(),
        "resnet18" => resnet_basic(&[2, 2, 2, 2]),
        "resnet34" => resnet_basic(&[3, 4, 6, 3]),
        "resnet50" => resnet_bottleneck(&[3, 4, 6, 3]),
        "resnet101" => resnet_bottleneck(&[3, 4, 23, 3]),
        "resnet152" => resnet_bottleneck(&[3, 8, 36, 3]),
        _ => return Err(Error::UnknownNetwork(name.to_string())),
    };
    Network::new(name.to_ascii_lowercase(), layers)
}

fn alexnet() -> Vec<LayerDesc> {
    vec![
        LayerDesc::conv("conv1", 3, 96, 227, 11, 4, 0).with_pool(2),
        LayerDesc::conv("conv2", 96, 256, 27, 5, 1, 2).with_pool(2),
        LayerDesc::conv("conv3", 256, 384, 13, 3, 1, 1),
        LayerDesc::conv("conv4", 384, 384, 13, 3, 1, 1),
        LayerDesc::conv("conv5", 384, 256, 13, 3, 1, 1).with_pool(2),
        LayerDesc::fc("fc6", 256 * 6 * 6, 4096),
        LayerDesc::fc("fc7", 4096, 4096),
        LayerDesc::fc("fc8", 4096, 1000),
    ]
}

fn vgg16() -> Vec<LayerDesc> {
    let blocks: [(usize, usize); 5] = [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)];
    let mut layers = Vec::new();
    let (mut c, mut hw) = (3, 224);
    for (b, &(width, reps)) in blocks.iter().enumerate() {
        for r in 0..reps {
            let mut l = LayerDesc::conv(format!("conv{}_{}", b + 1, r + 1), c, width, hw, 3, 1, 1);
            if r + 1 == reps {
                l = l.with_pool(2);
            }
            layers.push(l);
            c = width;
        }
        hw /= 2;
    }
    layers.push(LayerDesc::fc("fc6", 512 * 7 * 7, 4096));
    layers.push(LayerDesc::fc("fc7", 4096, 4096));
    layers.push(LayerDesc::fc("fc8", 4096, 1000));
    layers
}

fn darknet19() -> Vec<LayerDesc> {
    // (c_out, kernel, pool after)
    const PLAN: [(usize, usize, usize); 19] = [
        (32, 3, 2),
        (64, 3, 2),
        (128, 3, 1),
        (64, 1, 1),
        (128, 3, 2),
        (256, 3, 1),
        (128, 1, 1),
        (256, 3, 2),
        (512, 3, 1),
        (256, 1, 1),
        (512, 3, 1),
        (256, 1, 1),
        (512, 3, 2),
        (1024, 3, 1),
        (512, 1, 1),
        (1024, 3, 1),
        (512, 1, 1),
        (1024, 3, 1),
        (1000, 1, 7),
    ];
    let (mut c, mut hw) = (3, 224);
    PLAN.iter()
        .enumerate()
        .map(|(i, &(c_out, k, pool))| {
            let l = LayerDesc::conv(format!("conv{}", i + 1), c, c_out, hw, k, 1, k / 2).with_pool(pool);
            c = c_out;
            hw /= pool;
            l
        })
        .collect()
}

fn resnet_stem() -> LayerDesc {
    LayerDesc::conv("conv1", 3, 64, 224, 7, 2, 3).with_pool(2)
}

fn resnet_basic(blocks: &[usize; 4]) -> Vec<LayerDesc> {
    let mut layers = vec![resnet_stem()];
    let (mut c, mut hw) = (64, 56);
    for (stage, &reps) in blocks.iter().enumerate() {
        let width = 64 << stage;
        for b in 0..reps {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let a = LayerDesc::conv(format!("conv{}_{}a", stage + 2, b + 1), c, width, hw, 3, stride, 1);
            hw = a.h_out();
            layers.push(a);
            layers.push(LayerDesc::conv(format!("conv{}_{}b", stage + 2, b + 1), width, width, hw, 3, 1, 1));
            c = width;
        }
    }
    close_with_classifier(layers, c)
}

fn resnet_bottleneck(blocks: &[usize; 4]) -> Vec<LayerDesc> {
    let mut layers = vec![resnet_stem()];
    let (mut c, mut hw) = (64, 56);
    for (stage, &reps) in blocks.iter().enumerate() {
        let width = 64 << stage;
        for b in 0..reps {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let tag = format!("conv{}_{}", stage + 2, b + 1);
            layers.push(LayerDesc::conv(format!("{tag}a"), c, width, hw, 1, 1, 0));
            let mid = LayerDesc::conv(format!("{tag}b"), width, width, hw, 3, stride, 1);
            hw = mid.h_out();
            layers.push(mid);
            layers.push(LayerDesc::conv(format!("{tag}c"), width, 4 * width, hw, 1, 1, 0));
            c = 4 * width;
        }
    }
    close_with_classifier(layers, c)
}

/// Global average pool folded into the last conv, then the 1000-way fc.
fn close_with_classifier(mut layers: Vec<LayerDesc>, c: usize) -> Vec<LayerDesc> {
    let last = layers.last_mut().expect("stem present");
    last.pool = last.h_out();
    layers.push(LayerDesc::fc("fc", c, 1000));
    layers
}
