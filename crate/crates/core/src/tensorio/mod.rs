//! SCT1 tensor interchange files and subword-to-word conversion of model dumps.
//!
//! An SCT1 file is a 4-byte magic `SCT1`, a dtype byte (`0x01` = f32
//! little-endian), a rank byte, `rank` little-endian u64 dimensions and the
//! row-major payload. Attention dumps are `[L, H, m, m]`; hidden-state dumps
//! are `[L + 1, m, d_model]` with layer 0 holding the embedding output.

mod sct1;
mod words;

use std::path::Path;

pub use sct1::{read_tensor, write_tensor, Dtype, TensorBlob, MAGIC};
pub use words::{
    word_level_attention, word_level_states, AttentionTensor, HiddenStates, SubwordAlignment,
};

use crate::Result;

/// Reads an attention dump and converts it to word level. Without an
/// alignment file every subword is taken to be one word.
pub fn load_attention(
    attention: &Path,
    alignment: Option<&Path>,
    renormalize_rows: bool,
) -> Result<AttentionTensor> {
    let blob = read_tensor(attention)?;
    let align = match alignment {
        Some(path) => SubwordAlignment::read(path)?,
        None => SubwordAlignment::identity(blob.dims.last().copied().unwrap_or(0) as usize),
    };
    word_level_attention(&blob, &align, renormalize_rows)
}

/// Reads a hidden-state dump and converts it to word level.
pub fn load_hidden(hidden: &Path, alignment: Option<&Path>) -> Result<HiddenStates> {
    let blob = read_tensor(hidden)?;
    let align = match alignment {
        Some(path) => SubwordAlignment::read(path)?,
        None => SubwordAlignment::identity(blob.dims.get(1).copied().unwrap_or(0) as usize),
    };
    word_level_states(&blob, &align)
}
