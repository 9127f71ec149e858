//! `RSTF` binary tensors: magic `RSTF`, u32 version, u32 rank, u64 dims,
//! then the row-major f32 payload, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imagecore::Frame;
use crate::nnkernels::{ConvWeights, OffsetGrid};
use crate::warp::{DisplacementField, ValidityMask};

pub const MAGIC: &[u8; 4] = b"RSTF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    dims: Vec<u64>,
    data: Vec<f32>,
}

fn element_count(dims: &[u64]) -> Option<usize> {
    dims.iter()
        .try_fold(1u64, |n, &d| n.checked_mul(d))
        .and_then(|n| usize::try_from(n).ok())
}

impl TensorFile {
    pub fn new(dims: Vec<u64>, data: Vec<f32>) -> Result<Self> {
        match element_count(&dims) {
            Some(n) if n == data.len() => Ok(Self { dims, data }),
            _ => Err(Error::DimensionMismatch(format!(
                "tensor dims {dims:?} do not match {} values",
                data.len()
            ))),
        }
    }

    pub fn dims(&self) -> &[u64] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::malformed(path, reason);
        let mut cur = bytes;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(bad(format!("truncated while reading {what}")));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(4, "magic")? != MAGIC {
            return Err(bad("bad magic, expected RSTF".into()));
        }
        let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let ndim = u32::from_le_bytes(take(4, "rank")?.try_into().unwrap()) as usize;
        let mut dims = Vec::with_capacity(ndim.min(64));
        for _ in 0..ndim {
            dims.push(u64::from_le_bytes(take(8, "dims")?.try_into().unwrap()));
        }
        let n = element_count(&dims).ok_or_else(|| bad(format!("dims {dims:?} overflow")))?;
        let payload = take(n.checked_mul(4).ok_or_else(|| bad("payload too large".into()))?, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if !cur.is_empty() {
            return Err(bad(format!("{} trailing bytes after payload", cur.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    fn expect_rank(&self, rank: usize, what: &str) -> Result<Vec<usize>> {
        if self.dims.len() != rank {
            return Err(Error::DimensionMismatch(format!(
                "{what} needs a rank-{rank} tensor, got dims {:?}",
                self.dims
            )));
        }
        Ok(self.dims.iter().map(|&d| d as usize).collect())
    }
}

impl From<&Frame> for TensorFile {
    /// Dims `[H, W, C]`.
    fn from(f: &Frame) -> Self {
        Self {
            dims: vec![f.height() as u64, f.width() as u64, f.channels() as u64],
            data: f.data().to_vec(),
        }
    }
}

impl From<&DisplacementField> for TensorFile {
    /// Dims `[H, W, 2]`.
    fn from(f: &DisplacementField) -> Self {
        Self {
            dims: vec![f.height() as u64, f.width() as u64, 2],
            data: f.data().to_vec(),
        }
    }
}

impl From<&ValidityMask> for TensorFile {
    /// Dims `[H, W]`.
    fn from(m: &ValidityMask) -> Self {
        Self {
            dims: vec![m.height() as u64, m.width() as u64],
            data: m.data().to_vec(),
        }
    }
}

impl From<&ConvWeights> for TensorFile {
    /// Dims `[out, in, k, k]`; stride and padding are not stored.
    fn from(w: &ConvWeights) -> Self {
        let k = w.kernel() as u64;
        Self {
            dims: vec![w.out_channels() as u64, w.in_channels() as u64, k, k],
            data: w.taps().to_vec(),
        }
    }
}

impl From<&OffsetGrid> for TensorFile {
    /// Dims `[H, W, groups, taps, 2]`.
    fn from(o: &OffsetGrid) -> Self {
        Self {
            dims: vec![o.height() as u64, o.width() as u64, o.groups() as u64, o.taps() as u64, 2],
            data: o.data().to_vec(),
        }
    }
}

impl TensorFile {
    pub fn to_frame(&self) -> Result<Frame> {
        let d = self.expect_rank(3, "frame")?;
        Frame::new(d[1], d[0], d[2], self.data.clone())
    }

    pub fn to_field(&self) -> Result<DisplacementField> {
        let d = self.expect_rank(3, "displacement field")?;
        if d[2] != 2 {
            return Err(Error::DimensionMismatch(format!("field needs 2 components, got {}", d[2])));
        }
        DisplacementField::new(d[1], d[0], self.data.clone())
    }

    pub fn to_mask(&self) -> Result<ValidityMask> {
        let d = self.expect_rank(2, "mask")?;
        ValidityMask::new(d[1], d[0], self.data.clone())
    }

    pub fn to_conv_weights(&self, stride: usize, padding: usize) -> Result<ConvWeights> {
        let d = self.expect_rank(4, "convolution weights")?;
        if d[2] != d[3] {
            return Err(Error::DimensionMismatch(format!("kernel must be square, got {}x{}", d[2], d[3])));
        }
        ConvWeights::new(d[0], d[1], d[2], stride, padding, self.data.clone())
    }

    pub fn to_offsets(&self) -> Result<OffsetGrid> {
        let d = self.expect_rank(5, "offset grid")?;
        if d[4] != 2 {
            return Err(Error::DimensionMismatch(format!("offsets need 2 components, got {}", d[4])));
        }
        OffsetGrid::new(d[1], d[0], d[2], d[3], self.data.clone())
    }
}
