//! Confident-learning label-error detection and multi-model label fusion.
//!
//! A hard label map is treated as a noisy labelling of the voxels and checked
//! against another model's softmax output. Each voxel is one example. The
//! per-class self-confidence threshold `t_j` is the mean predicted
//! probability of class `j` over voxels labelled `j`; a voxel labelled `i` is
//! counted in `C[i][j]` when `j` is the most probable class among those whose
//! probability reaches their threshold. Off-diagonal contributors are label
//! errors and get replaced with the correcting model's argmax.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::volume::{argmax, argmax_labels, ensure_prob_label, LabelVolume, ProbVolume};

/// Voxel block size for the parallel counting pass.
const CHUNK: usize = 1 << 14;

/// Confident joint counts and the thresholds that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidentJoint {
    /// `counts[i][j]`: voxels labelled `i` confidently predicted as `j`.
    pub counts: Vec<Vec<u64>>,
    /// Per-class thresholds; `+inf` for classes absent from the labels.
    #[serde(serialize_with = "serialize_thresholds")]
    pub thresholds: Vec<f64>,
    /// Number of examples (voxels).
    pub n: u64,
}

/// Writes infinite thresholds as the string `"inf"`.
fn serialize_thresholds<S: Serializer>(t: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(t.len()))?;
    for &v in t {
        if v.is_finite() {
            seq.serialize_element(&v)?;
        } else {
            seq.serialize_element("inf")?;
        }
    }
    seq.end()
}

impl ConfidentJoint {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn off_diagonal(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| *j != i))
            .map(|(_, c)| c)
            .sum()
    }
}

/// Voxels whose confident class disagrees with their given label.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorFlags {
    pub flags: Vec<bool>,
    /// Correcting model's argmax, set exactly where `flags` is set.
    pub suggested: Vec<Option<u8>>,
}

impl ErrorFlags {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Mean probability of class `j` over voxels labelled `j`.
pub fn compute_thresholds(noisy: &LabelVolume, probs: &ProbVolume) -> Result<Vec<f64>> {
    ensure_prob_label(probs, noisy)?;
    Ok(thresholds_unchecked(noisy, probs))
}

// Serial on purpose: a fixed summation order keeps thresholds, and therefore
// every inclusive comparison against them, reproducible.
fn thresholds_unchecked(noisy: &LabelVolume, probs: &ProbVolume) -> Vec<f64> {
    let k = probs.k();
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0u64; k];
    for (voxel, &c) in probs.voxels().zip(noisy.data()) {
        sums[c as usize] += voxel[c as usize];
        counts[c as usize] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { f64::INFINITY } else { s / n as f64 })
        .collect()
}

/// Most probable class among those meeting their threshold, if any.
#[inline]
fn confident_class(voxel: &[f64], thresholds: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, (&p, &t)) in voxel.iter().zip(thresholds).enumerate() {
        if p >= t && best.is_none_or(|b| p > voxel[b]) {
            best = Some(j);
        }
    }
    best
}

/// Confident class per voxel, computed in parallel over fixed blocks.
fn confident_classes(probs: &ProbVolume, thresholds: &[f64]) -> Vec<Option<u8>> {
    let k = probs.k();
    let mut out = vec![None; probs.dims().len()];
    out.par_chunks_mut(CHUNK)
        .zip(probs.data().par_chunks(CHUNK * k))
        .for_each(|(dst, src)| {
            for (d, voxel) in dst.iter_mut().zip(src.chunks_exact(k)) {
                *d = confident_class(voxel, thresholds).map(|j| j as u8);
            }
        });
    out
}

pub fn confident_joint(noisy: &LabelVolume, probs: &ProbVolume) -> Result<ConfidentJoint> {
    ensure_prob_label(probs, noisy)?;
    let thresholds = thresholds_unchecked(noisy, probs);
    let confident = confident_classes(probs, &thresholds);
    Ok(joint_from(noisy, probs.k(), thresholds, &confident))
}

fn joint_from(
    noisy: &LabelVolume,
    k: usize,
    thresholds: Vec<f64>,
    confident: &[Option<u8>],
) -> ConfidentJoint {
    let mut counts = vec![vec![0u64; k]; k];
    for (&i, j) in noisy.data().iter().zip(confident) {
        if let Some(j) = j {
            counts[i as usize][*j as usize] += 1;
        }
    }
    ConfidentJoint {
        counts,
        thresholds,
        n: noisy.data().len() as u64,
    }
}

fn flags_from(noisy: &LabelVolume, probs: &ProbVolume, confident: &[Option<u8>]) -> ErrorFlags {
    let mut flags = vec![false; confident.len()];
    let mut suggested = vec![None; confident.len()];
    for (v, (&i, j)) in noisy.data().iter().zip(confident).enumerate() {
        if matches!(j, Some(j) if *j != i) {
            flags[v] = true;
            suggested[v] = Some(argmax(probs.voxel(v)) as u8);
        }
    }
    ErrorFlags { flags, suggested }
}

/// Flags every voxel that lands off the diagonal of the confident joint.
pub fn find_label_errors(noisy: &LabelVolume, probs: &ProbVolume) -> Result<ErrorFlags> {
    ensure_prob_label(probs, noisy)?;
    let thresholds = thresholds_unchecked(noisy, probs);
    let confident = confident_classes(probs, &thresholds);
    Ok(flags_from(noisy, probs, &confident))
}

/// Result of one correction step.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFusion {
    pub labels: LabelVolume,
    pub joint: ConfidentJoint,
    pub flags: ErrorFlags,
}

/// Corrects `noisy` with `probs`, also returning the joint and flags.
pub fn fuse_pair_detailed(noisy: &LabelVolume, probs: &ProbVolume) -> Result<PairFusion> {
    ensure_prob_label(probs, noisy)?;
    let thresholds = thresholds_unchecked(noisy, probs);
    let confident = confident_classes(probs, &thresholds);
    let joint = joint_from(noisy, probs.k(), thresholds, &confident);
    let flags = flags_from(noisy, probs, &confident);
    let data = noisy
        .data()
        .iter()
        .zip(&flags.suggested)
        .map(|(&l, s)| s.unwrap_or(l))
        .collect();
    Ok(PairFusion {
        labels: noisy.with_data(data),
        joint,
        flags,
    })
}

/// `noisy` with flagged voxels replaced by the correcting model's argmax.
pub fn fuse_pair(noisy: &LabelVolume, probs: &ProbVolume) -> Result<LabelVolume> {
    Ok(fuse_pair_detailed(noisy, probs)?.labels)
}

/// Final labels and the joint computed at each correction step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFusion {
    pub labels: LabelVolume,
    pub joints: Vec<ConfidentJoint>,
}

/// Argmax of the first model, then corrected by each later model in order.
pub fn fuse_chain_detailed(models: &[ProbVolume]) -> Result<ChainFusion> {
    if models.len() < 2 {
        return Err(Error::Invalid(format!(
            "fusion needs at least 2 models, got {}",
            models.len()
        )));
    }
    let first = &models[0];
    for (m, p) in models.iter().enumerate().skip(1) {
        if p.dims() != first.dims() || p.k() != first.k() {
            return Err(Error::Shape(format!(
                "model {m} is {} with k={}, model 0 is {} with k={}",
                p.dims(),
                p.k(),
                first.dims(),
                first.k()
            )));
        }
    }
    let mut labels = argmax_labels(first);
    let mut joints = Vec::with_capacity(models.len() - 1);
    for p in &models[1..] {
        let step = fuse_pair_detailed(&labels, p)?;
        labels = step.labels;
        joints.push(step.joint);
    }
    Ok(ChainFusion { labels, joints })
}

pub fn fuse_chain(models: &[ProbVolume]) -> Result<LabelVolume> {
    Ok(fuse_chain_detailed(models)?.labels)
}
