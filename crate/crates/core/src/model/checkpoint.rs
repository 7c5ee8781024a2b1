//! `.dgnm` checkpoints: magic, version, mode byte, `c`, `d`, `C` (u32),
//! `λ` (f64), then every parameter as an f64 in [`DgnModel::parameters`]
//! order. Baseline-style models store `d = 0` and no graph or auxiliary
//! parameters.

use std::path::Path;

use super::{AblationMode, DgnModel};
use crate::codec::{dim_u32, write_atomic, Reader, Writer};
use crate::error::{format_err, validation, Result};
use crate::nn::{ClassifierParams, GcnParams, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DGNM";

impl DgnModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::with_header(CHECKPOINT_MAGIC);
        w.u8(self.mode.code());
        w.u32(dim_u32(self.in_dim, "c")?);
        w.u32(dim_u32(self.hidden_dim(), "d")?);
        w.u32(dim_u32(self.num_classes, "C")?);
        w.f64(self.lambda);
        for v in self.parameters() {
            w.f64(v);
        }
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(CHECKPOINT_MAGIC)?;
        let mode = AblationMode::from_code(r.u8()?)?;
        let c = r.u32()? as usize;
        let d = r.u32()? as usize;
        let k = r.u32()? as usize;
        let lambda = r.f64()?;
        if c == 0 || k == 0 {
            return Err(validation("checkpoint has zero input width or class count"));
        }
        match (mode.has_gcn(), d) {
            (true, 0) => return Err(format_err(format!("mode {mode} needs d >= 1"))),
            (false, d) if d != 0 => return Err(format_err(format!("mode {mode} must store d = 0"))),
            _ => {}
        }
        let mut matrix = |rows: usize, cols: usize| -> Result<Matrix> {
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| validation("parameter block size overflows"))?;
            let values = r.f64_array(len)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(validation("checkpoint holds non-finite parameters"));
            }
            Matrix::from_vec(rows, cols, values)
        };
        let model = if mode.has_gcn() {
            let gcn = GcnParams::new(matrix(c, d)?)?;
            let main = ClassifierParams::new(matrix(d, k)?, matrix(1, k)?.into_vec())?;
            let aux = ClassifierParams::new(matrix(d, k)?, matrix(1, k)?.into_vec())?;
            DgnModel::from_parts(mode, c, k, lambda, Some(gcn), main, Some(aux))?
        } else {
            let main = ClassifierParams::new(matrix(c, k)?, matrix(1, k)?.into_vec())?;
            DgnModel::from_parts(mode, c, k, lambda, None, main, None)?
        };
        r.finish()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }
}
