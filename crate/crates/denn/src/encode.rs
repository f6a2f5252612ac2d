//! Intensity-to-time encoding of static images.
//!
//! A static image becomes a single frame by standardizing the *negated*
//! intensities: bright pixels get small (fast) times. Two variants:
//!
//! - [`encode_static_image`] keeps every pixel, so the frame has no
//!   silent entries.
//! - [`encode_static_image_zero_silent`] treats zero-intensity pixels as
//!   neurons that never fire. On sparse images (digits on black) this is
//!   what makes the fast regime halve the *active* synapse count instead
//!   of silencing nothing: the background collapses to one tied value
//!   that the quantile rule would otherwise keep.

use crate::error::{DennError, Result};
use crate::events::{Frame, FrameSequence};
use crate::standardize::{standardize, SILENT};

fn encode(pixels: &[f64], zero_silent: bool) -> Result<FrameSequence> {
    let neg: Vec<f64> = pixels
        .iter()
        .map(|&p| if zero_silent && p <= 0.0 { SILENT } else { -p })
        .collect();
    let s = standardize(&neg).map_err(|_| {
        DennError::DegenerateLayer("image needs at least two distinct intensities".into())
    })?;
    Ok(FrameSequence {
        frames: vec![Frame {
            times: s.times,
            span: 0,
            partial: false,
        }],
    })
}

/// Encode intensities in `[0, 1]` as one standardized frame with no
/// silent entries. Errors on constant images.
pub fn encode_static_image(pixels: &[f64]) -> Result<FrameSequence> {
    encode(pixels, false)
}

/// Encoding variant where zero-intensity pixels stay silent and the
/// statistics run over the lit pixels only.
pub fn encode_static_image_zero_silent(pixels: &[f64]) -> Result<FrameSequence> {
    encode(pixels, true)
}
