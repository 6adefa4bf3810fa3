//! Single-layer image dumps as binary portable pixmaps (P5 gray, P6 RGB).

use std::sync::OnceLock;

use thiserror::Error;

use crate::repr::FILL;
use crate::tensor::DenseTensor;

const VIRIDIS_SRC: &str = include_str!("../data/viridis.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VizError {
    #[error("layer {layer} out of range (tensor has {channels} channels)")]
    BadLayer { layer: usize, channels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    #[default]
    Gray,
    Viridis,
}

/// How tensor values map to the 256 colormap entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueRange {
    /// `[-1, 1] -> [0, 255]`, clamped. Suits the Labits family.
    #[default]
    Fixed,
    /// Layer minimum and maximum over non-fill values map to 0 and 255;
    /// fill pixels get entry 0.
    MinMax,
}

/// 256 RGB entries.
pub fn viridis() -> &'static [[u8; 3]; 256] {
    static LUT: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [[0u8; 3]; 256];
        let rows = VIRIDIS_SRC.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut n = 0;
        for (entry, row) in lut.iter_mut().zip(rows) {
            for (c, v) in entry.iter_mut().zip(row.split_whitespace()) {
                *c = v.parse().expect("viridis table holds 8-bit integers");
            }
            n += 1;
        }
        assert_eq!(n, 256, "viridis table must have 256 entries");
        lut
    })
}

/// `(v + 1) / 2 * 255`, rounded half away from zero and clamped.
pub fn fixed_level(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    ((v as f64 + 1.0) * 0.5 * 255.0).round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 for gray, 3 for RGB.
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// Colormap indices for one layer.
pub fn layer_levels(tensor: &DenseTensor, layer: usize, range: ValueRange) -> Result<Vec<u8>, VizError> {
    if layer >= tensor.channels() {
        return Err(VizError::BadLayer {
            layer,
            channels: tensor.channels(),
        });
    }
    let plane = tensor.plane(layer);
    Ok(match range {
        ValueRange::Fixed => plane.iter().map(|&v| fixed_level(v)).collect(),
        ValueRange::MinMax => {
            let data = plane.iter().filter(|&&v| v != FILL && v.is_finite());
            let (lo, hi) = data.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            plane
                .iter()
                .map(|&v| {
                    if v == FILL || !v.is_finite() || hi <= lo {
                        0
                    } else {
                        ((v - lo) as f64 / (hi - lo) as f64 * 255.0).round().clamp(0.0, 255.0) as u8
                    }
                })
                .collect()
        }
    })
}

pub fn render_layer(
    tensor: &DenseTensor,
    layer: usize,
    colormap: Colormap,
    range: ValueRange,
) -> Result<Image, VizError> {
    let levels = layer_levels(tensor, layer, range)?;
    let (channels, data) = match colormap {
        Colormap::Gray => (1, levels),
        Colormap::Viridis => {
            let lut = viridis();
            (3, levels.iter().flat_map(|&l| lut[l as usize]).collect())
        }
    };
    Ok(Image {
        width: tensor.width(),
        height: tensor.height(),
        channels,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn viridis_endpoints() {
        let lut = viridis();
        assert_eq!(lut[0], [68, 1, 84]);
        assert_eq!(lut[255], [253, 231, 37]);
    }

    #[test]
    fn fixed_mapping() {
        assert_eq!(fixed_level(0.0), 128);
        assert_eq!(fixed_level(-1.0), 0);
        assert_eq!(fixed_level(1.0), 255);
        assert_eq!(fixed_level(3.0), 255);
        assert_eq!(fixed_level(-0.5), 64);
    }

    #[test]
    fn fill_layer_is_darkest() {
        let t = DenseTensor::filled(2, 3, 4, FILL);
        let img = render_layer(&t, 1, Colormap::Viridis, ValueRange::Fixed).unwrap();
        assert_eq!(img.data.len(), 36);
        assert!(img.data.chunks(3).all(|px| px == [68, 1, 84]));
        let mm = render_layer(&t, 0, Colormap::Gray, ValueRange::MinMax).unwrap();
        assert!(mm.data.iter().all(|&v| v == 0));
    }

    #[test]
    fn minmax_ignores_fill() {
        let t = DenseTensor::from_vec(1, 1, 4, vec![FILL, 0.2, 0.6, 1.0]);
        assert_eq!(layer_levels(&t, 0, ValueRange::MinMax).unwrap(), vec![0, 0, 128, 255]);
    }

    #[test]
    fn pnm_header_and_bad_layer() {
        let t = DenseTensor::zeros(1, 2, 3);
        let img = render_layer(&t, 0, Colormap::Gray, ValueRange::Fixed).unwrap();
        let pnm = img.to_pnm();
        assert!(pnm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(pnm.len(), 11 + 6);
        assert_eq!(
            render_layer(&t, 1, Colormap::Gray, ValueRange::Fixed),
            Err(VizError::BadLayer { layer: 1, channels: 1 })
        );
    }
}
