//! Minimal little-endian NIfTI-1 single-file (`.nii`, `.nii.gz`) codec.
//!
//! Only `dim`, `pixdim`, `datatype` and the raw data block are interpreted.
//! Orientation, intensity scaling and extensions are ignored on read;
//! files are written with a diagonal sform built from the voxel spacing.

use std::io::{Read, Write};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC: &[u8; 4] = b"n+1\0";

/// On-disk voxel type codes supported by this codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::I32 => 8,
            DataType::F32 => 16,
            DataType::F64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            other => return Err(Error::Format(format!("unsupported datatype code {other}"))),
        })
    }

    pub fn bytes(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::I32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }
}

/// Decoded voxel block in file order (x fastest, then y, z, t).
#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl VoxelData {
    pub fn datatype(&self) -> DataType {
        match self {
            VoxelData::U8(_) => DataType::U8,
            VoxelData::I16(_) => DataType::I16,
            VoxelData::I32(_) => DataType::I32,
            VoxelData::F32(_) => DataType::F32,
            VoxelData::F64(_) => DataType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::I32(v) => v.len(),
            VoxelData::F32(v) => v.len(),
            VoxelData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Widens every value to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            VoxelData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            VoxelData::I16(v) => v.iter().map(|&x| x as f64).collect(),
            VoxelData::I32(v) => v.iter().map(|&x| x as f64).collect(),
            VoxelData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            VoxelData::F64(v) => v.clone(),
        }
    }

    fn decode(dt: DataType, raw: &[u8]) -> VoxelData {
        match dt {
            DataType::U8 => VoxelData::U8(raw.to_vec()),
            DataType::I16 => VoxelData::I16(
                raw.chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]))
                    .collect(),
            ),
            DataType::I32 => VoxelData::I32(
                raw.chunks_exact(4)
                    .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            DataType::F32 => VoxelData::F32(
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            DataType::F64 => VoxelData::F64(
                raw.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            VoxelData::U8(v) => out.extend_from_slice(v),
            VoxelData::I16(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            VoxelData::I32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            VoxelData::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            VoxelData::F64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
}

/// A NIfTI-1 image reduced to the fields this crate interprets.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiImage {
    /// Extent along each used dimension (`dim[1..=dim[0]]`).
    pub dim: Vec<usize>,
    /// Voxel size along x, y, z in millimetres.
    pub pixdim: [f32; 3],
    pub data: VoxelData,
}

fn rd_i16(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn rd_i32(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn rd_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn wr(b: &mut [u8], off: usize, bytes: &[u8]) {
    b[off..off + bytes.len()].copy_from_slice(bytes);
}

/// True when `bytes` start with the gzip magic number.
pub fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

impl NiftiImage {
    /// Number of voxels implied by `dim`.
    pub fn voxel_count(&self) -> usize {
        self.dim.iter().product()
    }

    /// Parses a file image, gunzipping first when needed.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if is_gzip(bytes) {
            let mut raw = Vec::new();
            GzDecoder::new(bytes)
                .read_to_end(&mut raw)
                .map_err(|e| Error::Format(format!("corrupt gzip stream: {e}")))?;
            return Self::parse_raw(&raw);
        }
        Self::parse_raw(bytes)
    }

    fn parse_raw(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_SIZE {
            return Err(Error::Format(format!(
                "file too small for a NIfTI-1 header ({} bytes)",
                b.len()
            )));
        }
        let sizeof_hdr = rd_i32(b, 0);
        if sizeof_hdr != HEADER_SIZE as i32 {
            if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
                return Err(Error::Format(
                    "big-endian NIfTI files are not supported".into(),
                ));
            }
            return Err(Error::Format(format!("bad sizeof_hdr {sizeof_hdr}")));
        }
        if &b[344..348] != MAGIC {
            return Err(Error::Format(
                "missing single-file NIfTI-1 magic \"n+1\"".into(),
            ));
        }
        let ndim = rd_i16(b, 40);
        if !(1..=7).contains(&ndim) {
            return Err(Error::Format(format!("bad dim[0] {ndim}")));
        }
        let mut dim = Vec::with_capacity(ndim as usize);
        for i in 1..=ndim as usize {
            let d = rd_i16(b, 40 + 2 * i);
            if d < 1 {
                return Err(Error::Format(format!("bad dim[{i}] {d}")));
            }
            dim.push(d as usize);
        }
        let dt = DataType::from_code(rd_i16(b, 70))?;
        let pixdim = [rd_f32(b, 80), rd_f32(b, 84), rd_f32(b, 88)];
        let vox_offset = rd_f32(b, 108);
        if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
            return Err(Error::Format(format!("bad vox_offset {vox_offset}")));
        }
        let start = vox_offset as usize;
        let count: usize = dim.iter().product();
        let end = start + count * dt.bytes();
        if b.len() < end {
            return Err(Error::Format(format!(
                "truncated data block: need {end} bytes, have {}",
                b.len()
            )));
        }
        Ok(NiftiImage {
            dim,
            pixdim,
            data: VoxelData::decode(dt, &b[start..end]),
        })
    }

    /// Serializes to an uncompressed single-file image.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dt = self.data.datatype();
        let mut h = vec![0u8; VOX_OFFSET];
        wr(&mut h, 0, &(HEADER_SIZE as i32).to_le_bytes());
        wr(&mut h, 38, b"r");
        let mut dims = [1i16; 8];
        dims[0] = self.dim.len() as i16;
        for (i, &d) in self.dim.iter().enumerate() {
            dims[i + 1] = d as i16;
        }
        for (i, d) in dims.iter().enumerate() {
            wr(&mut h, 40 + 2 * i, &d.to_le_bytes());
        }
        wr(&mut h, 70, &dt.code().to_le_bytes());
        wr(&mut h, 72, &((dt.bytes() * 8) as i16).to_le_bytes());
        let mut pix = [1.0f32; 8];
        pix[1..4].copy_from_slice(&self.pixdim);
        for (i, p) in pix.iter().enumerate() {
            wr(&mut h, 76 + 4 * i, &p.to_le_bytes());
        }
        wr(&mut h, 108, &(VOX_OFFSET as f32).to_le_bytes());
        wr(&mut h, 112, &1.0f32.to_le_bytes());
        // millimetres, seconds
        h[123] = 2 | 8;
        wr(&mut h, 254, &1i16.to_le_bytes());
        for axis in 0..3 {
            wr(
                &mut h,
                280 + 16 * axis + 4 * axis,
                &self.pixdim[axis].to_le_bytes(),
            );
        }
        wr(&mut h, 344, MAGIC);
        let mut out = h;
        out.reserve(self.voxel_count() * dt.bytes());
        self.data.encode_into(&mut out);
        out
    }

    /// Serializes, gzip-compressing when `gzip` is set.
    pub fn encode(&self, gzip: bool) -> Vec<u8> {
        let raw = self.to_bytes();
        if !gzip {
            return raw;
        }
        let mut enc = GzEncoder::new(Vec::with_capacity(raw.len() / 4), Compression::default());
        enc.write_all(&raw).expect("in-memory write");
        enc.finish().expect("in-memory write")
    }
}
