use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::Frame;

/// How stored 8/16-bit code values relate to linear intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    #[default]
    Srgb,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferDirection {
    SrgbToLinear,
    LinearToSrgb,
}

/// sRGB electro-optical transfer function (encoded -> linear).
#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse sRGB transfer (linear -> encoded).
#[inline]
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Applies the sRGB transfer elementwise. Samples outside `[0, 1]` are
/// rejected rather than clamped.
pub fn convert_transfer(frame: &Frame, direction: TransferDirection) -> Result<Frame> {
    if let Some((index, &value)) = frame
        .data()
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::OutOfRange { index, value });
    }
    let f = match direction {
        TransferDirection::SrgbToLinear => srgb_to_linear,
        TransferDirection::LinearToSrgb => linear_to_srgb,
    };
    let data = frame
        .data()
        .iter()
        .map(|&v| f(v as f64).clamp(0.0, 1.0) as f32)
        .collect();
    Frame::new(frame.width(), frame.height(), frame.channels(), data)
}
