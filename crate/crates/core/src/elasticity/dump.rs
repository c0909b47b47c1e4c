//! Binary cache of the condensed operator: the magic `SCHR`, `K` as a
//! little-endian u32, 8 reserved zero bytes, then the `2K × 2K` entries as
//! row-major little-endian f64.

use std::path::Path;

use nalgebra::DMatrix;

use super::{ElasticityError, SchurOperator};

const MAGIC: &[u8; 4] = b"SCHR";
const HEADER: usize = 16;

impl SchurOperator {
    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.num_boundary();
        let dim = 2 * k;
        let mut out = Vec::with_capacity(HEADER + 8 * dim * dim);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(k as u32).to_le_bytes());
        out.extend_from_slice(&[0u8; 8]);
        for r in 0..dim {
            for c in 0..dim {
                out.extend_from_slice(&self.s[(r, c)].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ElasticityError> {
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(ElasticityError::Format("missing SCHR header".into()));
        }
        let k = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let dim = 2 * k;
        let body = &bytes[HEADER..];
        if body.len() != 8 * dim * dim {
            return Err(ElasticityError::Format(format!("expected {} matrix bytes, found {}", 8 * dim * dim, body.len())));
        }
        let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, &values))
    }

    pub fn write(&self, path: &Path) -> Result<(), ElasticityError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ElasticityError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
