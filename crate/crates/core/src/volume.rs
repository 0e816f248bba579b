//! Volumetric containers and the voxelwise preprocessing primitives.
//!
//! All volumes store voxels in x-fastest order: the linear index of
//! `(x, y, z)` is `x + nx * (y + ny * z)`. Multi-channel probability volumes
//! keep the `k` channels of a voxel contiguous.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default class count: background, tumour and cochlea.
pub const DEFAULT_CLASSES: usize = 3;

/// Per-voxel channel sums may drift this far from 1 before a probability
/// volume is rejected.
pub const PROB_SUM_TOLERANCE: f64 = 1e-3;

/// Deviations below this are left alone so that float32 round trips stay
/// bit-exact; anything between this and [`PROB_SUM_TOLERANCE`] is renormalized.
const RENORMALIZE_SLACK: f64 = 1e-6;

/// Physical voxel size in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Spacing {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Spacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        for (axis, v) in [("dx", dx), ("dy", dy), ("dz", dz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!(
                    "spacing {axis} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Spacing { dx, dy, dz })
    }

    pub fn isotropic(d: f64) -> Result<Self> {
        Spacing::new(d, d, d)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    /// Multiplies every axis by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Spacing::new(self.dx * factor, self.dy * factor, self.dz * factor)
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing {
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
        }
    }
}

/// Grid extent along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Invalid(format!(
                "dims must be positive, got ({nx}, {ny}, {nz})"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.nx;
        let r = i / self.nx;
        [x, r % self.ny, r / self.ny]
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Integer class labels, one per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    k: usize,
    data: Vec<u8>,
}

impl LabelVolume {
    pub fn new(dims: Dims, spacing: Spacing, k: usize, data: Vec<u8>) -> Result<Self> {
        if k == 0 || k > 256 {
            return Err(Error::Invalid(format!(
                "class count must be in 1..=256, got {k}"
            )));
        }
        if data.len() != dims.len() {
            return Err(Error::Shape(format!(
                "label data has {} voxels, dims {dims} need {}",
                data.len(),
                dims.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v as usize >= k) {
            return Err(Error::Invalid(format!(
                "label value {bad} is not below class count {k}"
            )));
        }
        Ok(LabelVolume {
            dims,
            spacing,
            k,
            data,
        })
    }

    /// All-background volume.
    pub fn zeros(dims: Dims, spacing: Spacing, k: usize) -> Result<Self> {
        LabelVolume::new(dims, spacing, k, vec![0; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.dims.index(x, y, z)]
    }

    /// Copy of this volume with a different spacing.
    pub fn with_spacing(&self, spacing: Spacing) -> Self {
        LabelVolume {
            spacing,
            ..self.clone()
        }
    }

    /// Checks `class_label` against the class count.
    pub fn check_class(&self, class_label: u8) -> Result<()> {
        if class_label as usize >= self.k {
            return Err(Error::Invalid(format!(
                "class {class_label} is not below class count {}",
                self.k
            )));
        }
        Ok(())
    }

    /// Replaces the voxel data, keeping geometry and class count.
    pub(crate) fn with_data(&self, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), self.dims.len());
        LabelVolume {
            dims: self.dims,
            spacing: self.spacing,
            k: self.k,
            data,
        }
    }
}

/// Per-voxel class probabilities with `k` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVolume {
    dims: Dims,
    spacing: Spacing,
    k: usize,
    data: Vec<f64>,
}

impl ProbVolume {
    /// Validates and, where needed, renormalizes voxel-major channel data.
    ///
    /// Entries must be finite and nonnegative, and every voxel's channels
    /// must sum to 1 within [`PROB_SUM_TOLERANCE`].
    pub fn new(dims: Dims, spacing: Spacing, k: usize, mut data: Vec<f64>) -> Result<Self> {
        if k == 0 || k > 256 {
            return Err(Error::Invalid(format!(
                "channel count must be in 1..=256, got {k}"
            )));
        }
        if data.len() != dims.len() * k {
            return Err(Error::Shape(format!(
                "probability data has {} values, dims {dims} with k={k} need {}",
                data.len(),
                dims.len() * k
            )));
        }
        for (v, voxel) in data.chunks_exact_mut(k).enumerate() {
            if let Some(bad) = voxel.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(Error::Invalid(format!(
                    "probability {bad} at voxel {v} is not a nonnegative finite number"
                )));
            }
            let sum: f64 = voxel.iter().sum();
            let dev = (sum - 1.0).abs();
            if dev > PROB_SUM_TOLERANCE {
                return Err(Error::Invalid(format!(
                    "probability sum out of tolerance at voxel {v}: {sum}"
                )));
            }
            if dev > RENORMALIZE_SLACK {
                voxel.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(ProbVolume {
            dims,
            spacing,
            k,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Voxel-major data; voxel `v` occupies `v*k .. (v+1)*k`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn voxel(&self, v: usize) -> &[f64] {
        &self.data[v * self.k..(v + 1) * self.k]
    }

    pub fn voxels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.k)
    }

    pub fn with_spacing(&self, spacing: Spacing) -> Self {
        ProbVolume {
            spacing,
            ..self.clone()
        }
    }
}

/// Real-valued image intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::Shape(format!(
                "scalar data has {} voxels, dims {dims} need {}",
                data.len(),
                dims.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite intensity {bad}")));
        }
        Ok(ScalarVolume {
            dims,
            spacing,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.dims.index(x, y, z)]
    }
}

/// Any of the three volume kinds, as produced by the generic loader.
#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Label(LabelVolume),
    Prob(ProbVolume),
    Scalar(ScalarVolume),
}

/// Which kind of volume a file is expected to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeKind {
    Label,
    Prob,
    Scalar,
}

pub(crate) fn ensure_same_grid(a: Dims, b: Dims, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: dims {a} vs {b}")));
    }
    Ok(())
}

/// Checks that a probability volume and a label volume describe the same grid
/// and class count.
pub(crate) fn ensure_prob_label(p: &ProbVolume, y: &LabelVolume) -> Result<()> {
    ensure_same_grid(p.dims(), y.dims(), "probabilities vs labels")?;
    if p.k() != y.k() {
        return Err(Error::Shape(format!(
            "probabilities have k={} but labels have k={}",
            p.k(),
            y.k()
        )));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Hard labels from per-voxel maximum probability, ties to the lowest class.
pub fn argmax_labels(p: &ProbVolume) -> LabelVolume {
    let data: Vec<u8> = p
        .data
        .par_chunks_exact(p.k)
        .map(|v| argmax(v) as u8)
        .collect();
    LabelVolume {
        dims: p.dims,
        spacing: p.spacing,
        k: p.k,
        data,
    }
}

/// Unit-vector encoding of a label volume.
pub fn one_hot(l: &LabelVolume) -> ProbVolume {
    let k = l.k;
    let mut data = vec![0.0; l.data.len() * k];
    data.par_chunks_exact_mut(k)
        .zip(l.data.par_iter())
        .for_each(|(voxel, &c)| voxel[c as usize] = 1.0);
    ProbVolume {
        dims: l.dims,
        spacing: l.spacing,
        k,
        data,
    }
}

/// Affine rescale of intensities onto `[0, 1]`.
pub fn normalize_intensity(v: &ScalarVolume) -> Result<ScalarVolume> {
    let (lo, hi) = v
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if !(hi > lo) {
        return Err(Error::Invalid(
            "cannot normalize a constant volume".to_string(),
        ));
    }
    let range = hi - lo;
    let data = v
        .data
        .iter()
        .map(|&x| ((x - lo) / range).clamp(0.0, 1.0))
        .collect();
    Ok(ScalarVolume {
        dims: v.dims,
        spacing: v.spacing,
        data,
    })
}

/// Reverses a voxel-major buffer with `stride` values per voxel along x.
fn flip_x<T: Copy + Send + Sync>(dims: Dims, stride: usize, data: &[T]) -> Vec<T> {
    let row = dims.nx * stride;
    let mut out = Vec::with_capacity(data.len());
    for line in data.chunks_exact(row) {
        for x in (0..dims.nx).rev() {
            out.extend_from_slice(&line[x * stride..(x + 1) * stride]);
        }
    }
    out
}

/// Mirror along the x axis.
pub trait FlipLr: Sized {
    fn flip_lr(&self) -> Self;
}

impl FlipLr for LabelVolume {
    fn flip_lr(&self) -> Self {
        self.with_data(flip_x(self.dims, 1, &self.data))
    }
}

impl FlipLr for ProbVolume {
    fn flip_lr(&self) -> Self {
        ProbVolume {
            data: flip_x(self.dims, self.k, &self.data),
            ..self.clone()
        }
    }
}

impl FlipLr for ScalarVolume {
    fn flip_lr(&self) -> Self {
        ScalarVolume {
            data: flip_x(self.dims, 1, &self.data),
            ..self.clone()
        }
    }
}

impl FlipLr for Volume {
    fn flip_lr(&self) -> Self {
        match self {
            Volume::Label(v) => Volume::Label(v.flip_lr()),
            Volume::Prob(v) => Volume::Prob(v.flip_lr()),
            Volume::Scalar(v) => Volume::Scalar(v.flip_lr()),
        }
    }
}

pub fn flip_lr<V: FlipLr>(v: &V) -> V {
    v.flip_lr()
}

/// Output extent after resampling one axis.
fn resampled_len(n: usize, from: f64, to: f64) -> usize {
    ((n as f64 * from / to).round() as usize).max(1)
}

/// Continuous source index of output voxel `i` with voxel centres aligned:
/// the physical centre `(i + 0.5) * to` maps back to `(c + 0.5) * from`.
#[inline]
fn source_coord(i: usize, from: f64, to: f64) -> f64 {
    (i as f64 + 0.5) * to / from - 0.5
}

struct AxisMap {
    /// Nearest source index.
    nearest: Vec<usize>,
    /// Lower neighbour, upper neighbour and weight of the upper one.
    linear: Vec<(usize, usize, f64)>,
}

impl AxisMap {
    fn new(n_in: usize, n_out: usize, from: f64, to: f64) -> Self {
        let last = (n_in - 1) as f64;
        let mut nearest = Vec::with_capacity(n_out);
        let mut linear = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let c = source_coord(i, from, to).clamp(0.0, last);
            nearest.push(c.round() as usize);
            let lo = c.floor() as usize;
            let hi = (lo + 1).min(n_in - 1);
            linear.push((lo, hi, c - lo as f64));
        }
        AxisMap { nearest, linear }
    }
}

fn axis_maps(dims: Dims, from: Spacing, to: Spacing) -> (Dims, [AxisMap; 3]) {
    let n_in = dims.as_array();
    let s_in = from.as_array();
    let s_out = to.as_array();
    let n_out: [usize; 3] = std::array::from_fn(|a| resampled_len(n_in[a], s_in[a], s_out[a]));
    let maps = std::array::from_fn(|a| AxisMap::new(n_in[a], n_out[a], s_in[a], s_out[a]));
    let out = Dims {
        nx: n_out[0],
        ny: n_out[1],
        nz: n_out[2],
    };
    (out, maps)
}

/// Regridding onto a new voxel spacing.
///
/// Output dims are `round(n * from / to)` per axis (at least 1). Labels use
/// nearest-neighbour lookup, intensities trilinear interpolation, both with
/// voxel centres aligned and sample positions clamped to the input grid.
pub trait Resample: Sized {
    fn resample(&self, target: Spacing) -> Self;
}

impl Resample for LabelVolume {
    fn resample(&self, target: Spacing) -> Self {
        let (out, [mx, my, mz]) = axis_maps(self.dims, self.spacing, target);
        let mut data = vec![0u8; out.len()];
        let plane = out.nx * out.ny;
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(z, slab)| {
                let sz = mz.nearest[z];
                for y in 0..out.ny {
                    let sy = my.nearest[y];
                    for x in 0..out.nx {
                        slab[x + out.nx * y] = self.get(mx.nearest[x], sy, sz);
                    }
                }
            });
        LabelVolume {
            dims: out,
            spacing: target,
            k: self.k,
            data,
        }
    }
}

impl Resample for ScalarVolume {
    fn resample(&self, target: Spacing) -> Self {
        let (out, [mx, my, mz]) = axis_maps(self.dims, self.spacing, target);
        let mut data = vec![0.0f64; out.len()];
        let plane = out.nx * out.ny;
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(z, slab)| {
                let (z0, z1, wz) = mz.linear[z];
                for y in 0..out.ny {
                    let (y0, y1, wy) = my.linear[y];
                    for x in 0..out.nx {
                        let (x0, x1, wx) = mx.linear[x];
                        let lerp_x = |yy, zz| {
                            let a = self.get(x0, yy, zz);
                            let b = self.get(x1, yy, zz);
                            a + wx * (b - a)
                        };
                        let c0 = {
                            let a = lerp_x(y0, z0);
                            a + wy * (lerp_x(y1, z0) - a)
                        };
                        let c1 = {
                            let a = lerp_x(y0, z1);
                            a + wy * (lerp_x(y1, z1) - a)
                        };
                        slab[x + out.nx * y] = c0 + wz * (c1 - c0);
                    }
                }
            });
        ScalarVolume {
            dims: out,
            spacing: target,
            data,
        }
    }
}

pub fn resample<V: Resample>(v: &V, target: Spacing) -> V {
    v.resample(target)
}
