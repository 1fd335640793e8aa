//! 8-bit PNG encoding of rendered image vectors with a fixed value range.

use crate::error::{check_dim, Error, Result};
use crate::representation::ImageShape;

/// Linear map from `[min, max]` to `0..=255`; values outside are clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self { min: 0.0, max: 1.0 }
    }
}

impl Normalization {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::Parameter(format!("image range must satisfy min < max, got [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn quantize(&self, v: f64) -> u8 {
        let u = ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0);
        // NaN clamps to NaN; treat as black
        if u.is_nan() {
            return 0;
        }
        (u * 255.0).round() as u8
    }
}

pub fn encode_png(image: &[f64], shape: ImageShape, norm: Normalization) -> Result<Vec<u8>> {
    check_dim(shape.len(), image.len())?;
    let color = match shape.channels {
        1 => png::ColorType::Grayscale,
        2 => png::ColorType::GrayscaleAlpha,
        3 => png::ColorType::Rgb,
        4 => png::ColorType::Rgba,
        c => return Err(Error::Parameter(format!("cannot encode {c}-channel image"))),
    };
    let pixels: Vec<u8> = image.iter().map(|&v| norm.quantize(v)).collect();
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, shape.width as u32, shape.height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Parameter(format!("png header: {e}")))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::Parameter(format!("png data: {e}")))?;
    }
    Ok(out)
}
