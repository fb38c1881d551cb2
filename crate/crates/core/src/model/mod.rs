//! Small transformer encoder with exchangeable classification heads.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use config::{GenreMode, HeadVariant, ModelConfig, PoolerActivation};
pub use forward::{backward, forward, forward_train, forward_with_attention, sigmoid, ForwardCache, ForwardOutput, Mode};
pub use params::{init_model, LayerParams, ParamKind, Parameters, TensorMut, TensorRef};

use crate::error::{Error, Result};

/// Attention rows of the classification query in `layer` (1-based), one per
/// head.
pub fn attention_of_cls(output: &ForwardOutput, layer: usize) -> Result<Vec<Vec<f64>>> {
    let att = output
        .attention
        .as_ref()
        .ok_or_else(|| Error::invalid("forward output has no retained attention"))?;
    if layer == 0 || layer > att.len() {
        return Err(Error::invalid(format!(
            "layer {layer} outside 1..={}",
            att.len()
        )));
    }
    Ok(att[layer - 1]
        .iter()
        .map(|m| m.row(output.cls_position).to_vec())
        .collect())
}
