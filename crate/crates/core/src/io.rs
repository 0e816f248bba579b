//! Loading and saving volumes as NIfTI-1 files.
//!
//! Label volumes are written as unsigned 8-bit unless another integer type
//! is requested, probability volumes as 4D float32 with the class channel
//! in the fourth dimension, scalar volumes as 3D float32. Gzip compression
//! is chosen by a `.gz` suffix on write and detected from content on read.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nifti::{DataType, NiftiImage, VoxelData};
use crate::volume::{Dims, LabelVolume, ProbVolume, ScalarVolume, Spacing, Volume, VolumeKind};

/// Integer encodings accepted for label files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelDtype {
    #[default]
    U8,
    I16,
    I32,
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place,
/// so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // Temp files default to 0600; outputs should get ordinary permissions.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn wants_gzip(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn read_image(path: &Path) -> Result<NiftiImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    NiftiImage::from_bytes(&bytes)
}

pub fn write_image(path: &Path, img: &NiftiImage) -> Result<()> {
    write_atomic(path, &img.encode(wants_gzip(path)))
}

fn spacing_of(img: &NiftiImage) -> Result<Spacing> {
    let [dx, dy, dz] = img.pixdim;
    Spacing::new(dx as f64, dy as f64, dz as f64)
        .map_err(|e| Error::Format(format!("bad pixdim: {e}")))
}

/// Spatial dims; any dimension past the third must be 1 unless it is the
/// channel axis of a probability image (`channel_axis`).
fn spatial_dims(img: &NiftiImage, channel_axis: bool) -> Result<(Dims, usize)> {
    let d = &img.dim;
    let get = |i: usize| d.get(i).copied().unwrap_or(1);
    let channels = if channel_axis {
        if d.len() != 4 {
            return Err(Error::Format(format!(
                "probability images must be 4D, got {}D",
                d.len()
            )));
        }
        d[3]
    } else {
        if d.iter().skip(3).any(|&n| n != 1) {
            return Err(Error::Format(format!(
                "expected a 3D image, got dims {:?}",
                d
            )));
        }
        1
    };
    if d.iter().skip(4).any(|&n| n != 1) {
        return Err(Error::Format(format!("unsupported dims {:?}", d)));
    }
    let dims = Dims::new(get(0), get(1), get(2)).map_err(|e| Error::Format(e.to_string()))?;
    Ok((dims, channels))
}

fn label_from_image(img: NiftiImage, k: usize) -> Result<LabelVolume> {
    let (dims, _) = spatial_dims(&img, false)?;
    let spacing = spacing_of(&img)?;
    let to_u8 = |v: i64| -> Result<u8> {
        if v < 0 || v as usize >= k {
            return Err(Error::Invalid(format!(
                "label value {v} is not below class count {k}"
            )));
        }
        Ok(v as u8)
    };
    let data: Vec<u8> = match img.data {
        VoxelData::U8(v) => v,
        VoxelData::I16(v) => v
            .into_iter()
            .map(|x| to_u8(x as i64))
            .collect::<Result<_>>()?,
        VoxelData::I32(v) => v
            .into_iter()
            .map(|x| to_u8(x as i64))
            .collect::<Result<_>>()?,
        other => {
            return Err(Error::Format(format!(
                "label images must be integer-typed, got {:?}",
                other.datatype()
            )))
        }
    };
    LabelVolume::new(dims, spacing, k, data)
}

fn prob_from_image(img: NiftiImage) -> Result<ProbVolume> {
    let (dims, k) = spatial_dims(&img, true)?;
    let spacing = spacing_of(&img)?;
    let planar = match &img.data {
        VoxelData::F32(_) | VoxelData::F64(_) => img.data.to_f64(),
        other => {
            return Err(Error::Format(format!(
                "probability images must be float-typed, got {:?}",
                other.datatype()
            )))
        }
    };
    let n = dims.len();
    let mut data = vec![0.0; n * k];
    for c in 0..k {
        for (v, &p) in planar[c * n..(c + 1) * n].iter().enumerate() {
            data[v * k + c] = p;
        }
    }
    ProbVolume::new(dims, spacing, k, data)
}

fn scalar_from_image(img: NiftiImage) -> Result<ScalarVolume> {
    let (dims, _) = spatial_dims(&img, false)?;
    let spacing = spacing_of(&img)?;
    ScalarVolume::new(dims, spacing, img.data.to_f64()).map_err(|e| Error::Format(e.to_string()))
}

/// Loads a label file; every value must be below `k`.
pub fn load_label(path: &Path, k: usize) -> Result<LabelVolume> {
    label_from_image(read_image(path)?, k)
}

pub fn load_prob(path: &Path) -> Result<ProbVolume> {
    prob_from_image(read_image(path)?)
}

pub fn load_scalar(path: &Path) -> Result<ScalarVolume> {
    scalar_from_image(read_image(path)?)
}

/// Loads a volume of the given kind. `k` is the class count for label files
/// and is ignored otherwise.
pub fn load_volume(path: &Path, kind: VolumeKind, k: usize) -> Result<Volume> {
    Ok(match kind {
        VolumeKind::Label => Volume::Label(load_label(path, k)?),
        VolumeKind::Prob => Volume::Prob(load_prob(path)?),
        VolumeKind::Scalar => Volume::Scalar(load_scalar(path)?),
    })
}

fn pixdim(s: Spacing) -> [f32; 3] {
    [s.dx as f32, s.dy as f32, s.dz as f32]
}

pub fn label_image(vol: &LabelVolume, dtype: LabelDtype) -> NiftiImage {
    let d = vol.dims();
    let data = match dtype {
        LabelDtype::U8 => VoxelData::U8(vol.data().to_vec()),
        LabelDtype::I16 => VoxelData::I16(vol.data().iter().map(|&v| v as i16).collect()),
        LabelDtype::I32 => VoxelData::I32(vol.data().iter().map(|&v| v as i32).collect()),
    };
    NiftiImage {
        dim: vec![d.nx, d.ny, d.nz],
        pixdim: pixdim(vol.spacing()),
        data,
    }
}

pub fn prob_image(vol: &ProbVolume) -> NiftiImage {
    let d = vol.dims();
    let (n, k) = (d.len(), vol.k());
    let mut planar = vec![0f32; n * k];
    for (v, voxel) in vol.voxels().enumerate() {
        for (c, &p) in voxel.iter().enumerate() {
            planar[c * n + v] = p as f32;
        }
    }
    NiftiImage {
        dim: vec![d.nx, d.ny, d.nz, k],
        pixdim: pixdim(vol.spacing()),
        data: VoxelData::F32(planar),
    }
}

pub fn scalar_image(vol: &ScalarVolume) -> NiftiImage {
    let d = vol.dims();
    NiftiImage {
        dim: vec![d.nx, d.ny, d.nz],
        pixdim: pixdim(vol.spacing()),
        data: VoxelData::F32(vol.data().iter().map(|&v| v as f32).collect()),
    }
}

/// Writes a per-voxel component id map as int32.
pub fn save_id_map(dims: Dims, spacing: Spacing, ids: &[u32], path: &Path) -> Result<()> {
    let img = NiftiImage {
        dim: vec![dims.nx, dims.ny, dims.nz],
        pixdim: pixdim(spacing),
        data: VoxelData::I32(ids.iter().map(|&v| v as i32).collect()),
    };
    write_image(path, &img)
}

pub fn save_label(vol: &LabelVolume, path: &Path) -> Result<()> {
    save_label_as(vol, path, LabelDtype::U8)
}

pub fn save_label_as(vol: &LabelVolume, path: &Path, dtype: LabelDtype) -> Result<()> {
    write_image(path, &label_image(vol, dtype))
}

pub fn save_prob(vol: &ProbVolume, path: &Path) -> Result<()> {
    write_image(path, &prob_image(vol))
}

pub fn save_scalar(vol: &ScalarVolume, path: &Path) -> Result<()> {
    write_image(path, &scalar_image(vol))
}

pub fn save_volume(vol: &Volume, path: &Path) -> Result<()> {
    match vol {
        Volume::Label(v) => save_label(v, path),
        Volume::Prob(v) => save_prob(v, path),
        Volume::Scalar(v) => save_scalar(v, path),
    }
}

/// Maps a raw datatype to the label encoding that writes it back unchanged.
pub fn label_dtype_of(dt: DataType) -> Option<LabelDtype> {
    match dt {
        DataType::U8 => Some(LabelDtype::U8),
        DataType::I16 => Some(LabelDtype::I16),
        DataType::I32 => Some(LabelDtype::I32),
        _ => None,
    }
}
