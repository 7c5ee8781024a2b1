use std::path::Path;

use crate::codec::{dim_u32, write_atomic, Reader, Writer};
use crate::error::{validation, Result};

pub const FEATURE_MAP_MAGIC: &[u8; 4] = b"DGNF";

/// A `width x height x channels` grid of features, row-major pixel order,
/// channel-minor: `index = (y * width + x) * channels + k`.
///
/// Stored as `f32` on disk and held as `f64` in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(validation(format!(
                "empty feature map ({width}x{height}x{channels})"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| validation("feature map dimensions overflow"))?;
        if values.len() != expected {
            return Err(validation(format!(
                "value count {} != {width}x{height}x{channels}",
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(validation(format!("non-finite feature value at index {idx}")));
        }
        Ok(FeatureMap {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature vector of pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.values[start..start + self.channels]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::with_header(FEATURE_MAP_MAGIC);
        w.u32(dim_u32(self.width, "width")?);
        w.u32(dim_u32(self.height, "height")?);
        w.u32(dim_u32(self.channels, "channels")?);
        for &v in &self.values {
            w.f32(v as f32);
        }
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(FEATURE_MAP_MAGIC)?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let channels = r.u32()? as usize;
        if width == 0 || height == 0 || channels == 0 {
            return Err(validation(format!(
                "empty feature map ({width}x{height}x{channels})"
            )));
        }
        let count = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| validation("feature map dimensions overflow"))?;
        let values = r.f32_array(count)?;
        r.finish()?;
        FeatureMap::new(
            width,
            height,
            channels,
            values.into_iter().map(f64::from).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let fm = FeatureMap::new(2, 1, 3, vec![0.5, -1.25, 3.0, 1e-3, 7.0, -0.0]).unwrap();
        let bytes = fm.to_bytes().unwrap();
        let back = FeatureMap::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.pixel(1, 0)[1], 7.0);
    }

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        assert!(FeatureMap::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(FeatureMap::new(1, 1, 2, vec![1.0]).is_err());
        assert!(FeatureMap::new(0, 1, 1, vec![]).is_err());
        let mut w = Writer::with_header(FEATURE_MAP_MAGIC);
        w.u32(1);
        w.u32(1);
        w.u32(1);
        w.f32(f32::INFINITY);
        assert!(matches!(
            FeatureMap::from_bytes(&w.into_bytes()),
            Err(crate::Error::Validation(_))
        ));
    }

    #[test]
    fn forged_huge_header_is_truncation_not_allocation() {
        let mut w = Writer::with_header(FEATURE_MAP_MAGIC);
        w.u32(u32::MAX);
        w.u32(2);
        w.u32(4);
        assert!(matches!(
            FeatureMap::from_bytes(&w.into_bytes()),
            Err(crate::Error::Io(_))
        ));
    }
}
