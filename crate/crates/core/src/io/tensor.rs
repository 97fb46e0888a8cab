//! `RSFTENS1` tensor files.
//!
//! ```text
//! magic     8 bytes  "RSFTENS1"
//! dtype     u32      0 = f32, 1 = c64 (interleaved re, im as f32)
//! rank      u32
//! dims      u32 × rank
//! payload   row-major, little-endian
//! meta_len  u32      byte length of the metadata block
//! meta      UTF-8 "key=value\n" lines
//! ```

use std::path::Path;

use ndarray::{ArrayD, ArrayView, Dimension, IxDyn};
use num_complex::{Complex32, Complex64};

use super::kv::KvList;
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 8] = b"RSFTENS1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    C64,
}

impl DType {
    pub fn code(self) -> u32 {
        match self {
            DType::F32 => 0,
            DType::C64 => 1,
        }
    }

    pub fn element_size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::C64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(ArrayD<f32>),
    C64(ArrayD<Complex32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: TensorData,
    pub meta: KvList,
}

impl Tensor {
    pub fn real<D: Dimension>(values: ArrayView<'_, f64, D>) -> Self {
        Tensor {
            data: TensorData::F32(values.mapv(|v| v as f32).into_dyn()),
            meta: KvList::default(),
        }
    }

    pub fn complex<D: Dimension>(values: ArrayView<'_, Complex64, D>) -> Self {
        Tensor {
            data: TensorData::C64(values.mapv(|z| Complex32::new(z.re as f32, z.im as f32)).into_dyn()),
            meta: KvList::default(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push(key, value);
        self
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::C64(_) => DType::C64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match &self.data {
            TensorData::F32(a) => a.shape(),
            TensorData::C64(a) => a.shape(),
        }
    }

    /// Real payload widened to f64; `None` for complex tensors.
    pub fn to_real(&self) -> Option<ArrayD<f64>> {
        match &self.data {
            TensorData::F32(a) => Some(a.mapv(f64::from)),
            TensorData::C64(_) => None,
        }
    }

    pub fn to_complex(&self) -> Option<ArrayD<Complex64>> {
        match &self.data {
            TensorData::C64(a) => Some(a.mapv(|z| Complex64::new(z.re as f64, z.im as f64))),
            TensorData::F32(_) => None,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let shape = self.shape();
        let mut out = Vec::with_capacity(16 + 4 * shape.len() + shape.iter().product::<usize>() * 8);
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&self.dtype().code().to_le_bytes());
        out.extend_from_slice(&u32_len(shape.len(), "rank")?.to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&u32_len(d, "dimension")?.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(a) => {
                for v in a.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            TensorData::C64(a) => {
                for z in a.iter() {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
        let meta = self.meta.encode()?;
        out.extend_from_slice(&u32_len(meta.len(), "metadata length")?.to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| Error::format(path, msg);
        let mut r = Reader { bytes, pos: 0 };
        let magic = r
            .take(8)
            .ok_or_else(|| bad("file shorter than the 8-byte magic".into()))?;
        if magic != TENSOR_MAGIC {
            return Err(bad(format!(
                "magic {:?} is not RSFTENS1",
                String::from_utf8_lossy(magic)
            )));
        }
        let dtype = match r.u32().ok_or_else(|| bad("missing dtype".into()))? {
            0 => DType::F32,
            1 => DType::C64,
            other => return Err(bad(format!("dtype {other} is not 0 (f32) or 1 (c64)"))),
        };
        let rank = r.u32().ok_or_else(|| bad("missing rank".into()))? as usize;
        let mut shape = Vec::with_capacity(rank.min(64));
        for i in 0..rank {
            shape.push(r.u32().ok_or_else(|| bad(format!("missing dimension {i} of {rank}")))? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("dimensions overflow".into()))?;
        let payload_len = count
            .checked_mul(dtype.element_size())
            .ok_or_else(|| bad("dimensions overflow".into()))?;
        let payload = r
            .take(payload_len)
            .ok_or_else(|| bad(format!("payload shorter than header claims ({payload_len} bytes)")))?;
        let floats = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let data = match dtype {
            DType::F32 => TensorData::F32(
                ArrayD::from_shape_vec(IxDyn(&shape), floats.collect()).map_err(|e| bad(e.to_string()))?,
            ),
            DType::C64 => {
                let flat: Vec<f32> = floats.collect();
                let values = flat.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
                TensorData::C64(ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| bad(e.to_string()))?)
            }
        };
        let meta_len = r.u32().ok_or_else(|| bad("missing metadata length".into()))? as usize;
        let meta = r
            .take(meta_len)
            .ok_or_else(|| bad("metadata shorter than its length prefix".into()))?;
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes after metadata", bytes.len() - r.pos)));
        }
        let text = std::str::from_utf8(meta).map_err(|_| bad("metadata is not UTF-8".into()))?;
        let meta = KvList::parse(text).map_err(bad)?;
        Ok(Tensor { data, meta })
    }
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::range(format!("{what} {n} does not fit in u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    std::fs::write(path, tensor.encode()?).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes, path)
}
