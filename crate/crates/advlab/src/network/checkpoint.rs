//! JSON checkpoints.
//!
//! A checkpoint is a single document
//! `{"version":1,"class_count":K,"layers":[...],"params":{name:{"shape":[...],"data":[...]}}}`
//! with keys in fixed order (struct order for the envelope, sorted order
//! for the parameter map), so identical networks serialize to identical
//! bytes and save -> load -> save is a byte-level fixed point.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

use super::{bias_name, weight_name, LayerSpec, Network};

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    version: u32,
    class_count: usize,
    layers: Vec<LayerSpec>,
    params: BTreeMap<String, ParamDoc>,
}

#[derive(Serialize, Deserialize)]
struct ParamDoc {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Serializes a network to its canonical checkpoint bytes.
pub fn checkpoint_bytes(net: &Network) -> Result<Vec<u8>> {
    let doc = CheckpointDoc {
        version: CHECKPOINT_VERSION,
        class_count: net.class_count(),
        layers: net.layers().to_vec(),
        params: net
            .params()
            .iter()
            .map(|(name, t)| {
                (
                    name.clone(),
                    ParamDoc {
                        shape: t.shape().dims().to_vec(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect(),
    };
    Ok(serde_json::to_vec(&doc)?)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(net)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    network_from_bytes(&fs::read(path)?)
}

/// Rebuilds a network from checkpoint bytes, validating parameter names
/// and per-layer shapes against the layer list.
pub fn network_from_bytes(bytes: &[u8]) -> Result<Network> {
    let doc: CheckpointDoc = serde_json::from_slice(bytes)?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion(doc.version));
    }
    if doc.class_count < 2 {
        return Err(Error::arg("checkpoint class_count must be at least 2"));
    }
    match doc.layers.last() {
        Some(LayerSpec::Dense { out_features }) if *out_features == doc.class_count => {}
        _ => {
            return Err(Error::arg(
                "checkpoint final layer must be dense with out_features = class_count",
            ))
        }
    }

    let mut params = BTreeMap::new();
    for (name, p) in doc.params {
        params.insert(name, Tensor::new(Shape::new(p.shape)?, p.data)?);
    }

    let mut expected = Vec::new();
    for (i, layer) in doc.layers.iter().enumerate() {
        match layer {
            LayerSpec::Conv2d {
                out_channels,
                kernel_size,
                ..
            } => {
                let w = expect_param(&params, &weight_name(i))?;
                let dims = w.shape().dims();
                if dims.len() != 4
                    || dims[0] != *out_channels
                    || dims[1] != *kernel_size
                    || dims[2] != *kernel_size
                {
                    return Err(Error::arg(format!(
                        "layer {i}: conv2d weight shape {dims:?} does not match the layer list"
                    )));
                }
                let b = expect_param(&params, &bias_name(i))?;
                if b.shape().dims() != [*out_channels] {
                    return Err(Error::arg(format!("layer {i}: conv2d bias length mismatch")));
                }
                expected.push(weight_name(i));
                expected.push(bias_name(i));
            }
            LayerSpec::Dense { out_features } => {
                let w = expect_param(&params, &weight_name(i))?;
                let dims = w.shape().dims();
                if dims.len() != 2 || dims[0] != *out_features {
                    return Err(Error::arg(format!(
                        "layer {i}: dense weight shape {dims:?} does not match the layer list"
                    )));
                }
                let b = expect_param(&params, &bias_name(i))?;
                if b.shape().dims() != [*out_features] {
                    return Err(Error::arg(format!("layer {i}: dense bias length mismatch")));
                }
                expected.push(weight_name(i));
                expected.push(bias_name(i));
            }
            LayerSpec::Relu | LayerSpec::MaxPool2x2 | LayerSpec::Flatten => {}
        }
    }
    if params.len() != expected.len() {
        let extra: Vec<&String> = params
            .keys()
            .filter(|k| !expected.contains(k))
            .collect();
        return Err(Error::arg(format!(
            "checkpoint has unexpected parameters: {extra:?}"
        )));
    }

    Ok(Network::from_parts(doc.layers, params, doc.class_count))
}

fn expect_param<'a>(params: &'a BTreeMap<String, Tensor>, name: &str) -> Result<&'a Tensor> {
    params
        .get(name)
        .ok_or_else(|| Error::arg(format!("checkpoint missing parameter {name:?}")))
}
