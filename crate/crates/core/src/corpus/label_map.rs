use std::collections::BTreeSet;
use std::path::Path;

use crate::codec::{dim_u32, write_atomic, Reader, Writer};
use crate::error::{validation, Result};

pub const LABEL_MAP_MAGIC: &[u8; 4] = b"DGNL";

/// Per-pixel object ids, row-major (`index = y * width + x`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    num_objects: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, num_objects: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(validation(format!("empty label map ({width}x{height})")));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| validation("label map dimensions overflow"))?;
        if labels.len() != expected {
            return Err(validation(format!(
                "label count {} != {width}x{height}",
                labels.len()
            )));
        }
        if let Some((idx, &bad)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= num_objects)
        {
            return Err(validation(format!(
                "label {bad} at index {idx} is not below object count {num_objects}"
            )));
        }
        Ok(LabelMap {
            width,
            height,
            num_objects,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Size of the object vocabulary `L`.
    pub fn num_objects(&self) -> usize {
        self.num_objects
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Nearest-neighbour resize with the center-aligned convention:
    /// output `(x, y)` reads source `(floor((x + 0.5) * w / out_w), ...)`, clamped.
    pub fn nn_resize(&self, out_w: usize, out_h: usize) -> Result<LabelMap> {
        if out_w == 0 || out_h == 0 {
            return Err(validation(format!("zero resize target {out_w}x{out_h}")));
        }
        let src_x: Vec<usize> = (0..out_w).map(|x| nearest_source(x, self.width, out_w)).collect();
        let mut labels = Vec::with_capacity(out_w * out_h);
        for y in 0..out_h {
            let sy = nearest_source(y, self.height, out_h);
            let row = &self.labels[sy * self.width..(sy + 1) * self.width];
            labels.extend(src_x.iter().map(|&sx| row[sx]));
        }
        Ok(LabelMap {
            width: out_w,
            height: out_h,
            num_objects: self.num_objects,
            labels,
        })
    }

    /// Ids carried by at least one pixel.
    pub fn object_presence(&self) -> BTreeSet<usize> {
        self.presence_mask()
            .iter()
            .enumerate()
            .filter_map(|(id, &present)| present.then_some(id))
            .collect()
    }

    /// Presence as a dense boolean vector of length `L`.
    pub fn presence_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_objects];
        for &l in &self.labels {
            mask[l as usize] = true;
        }
        mask
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::with_header(LABEL_MAP_MAGIC);
        w.u32(dim_u32(self.width, "width")?);
        w.u32(dim_u32(self.height, "height")?);
        w.u32(dim_u32(self.num_objects, "L")?);
        for &l in &self.labels {
            w.u16(l);
        }
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(LABEL_MAP_MAGIC)?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let num_objects = r.u32()? as usize;
        if width == 0 || height == 0 {
            return Err(validation(format!("empty label map ({width}x{height})")));
        }
        let count = width
            .checked_mul(height)
            .ok_or_else(|| validation("label map dimensions overflow"))?;
        let labels = r.u16_array(count)?;
        r.finish()?;
        LabelMap::new(width, height, num_objects, labels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }
}

fn nearest_source(dst: usize, src_len: usize, dst_len: usize) -> usize {
    // floor((dst + 0.5) * src / dst_len) == floor((2*dst + 1) * src / (2*dst_len)), exact in integers
    let idx = ((2 * dst as u128 + 1) * src_len as u128) / (2 * dst_len as u128);
    (idx as usize).min(src_len - 1)
}
