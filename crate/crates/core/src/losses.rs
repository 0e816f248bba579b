//! Segmentation and consistency losses with analytic gradients.
//!
//! Every loss has a slice-level form over voxel-major probability buffers
//! (`p[v * k + c]`) so that gradients can be probed off the probability
//! simplex, plus a checked wrapper over [`ProbVolume`]. All reductions run
//! serially in `f64`.

use crate::error::{Error, Result};
use crate::volume::{ensure_prob_label, ensure_same_grid, LabelVolume, ProbVolume};

/// Smoothing term added to both numerator and denominator of the Dice loss.
pub const DEFAULT_DICE_EPS: f64 = 1e-5;

/// Probabilities are clipped to `[CE_CLIP, 1]` before the logarithm.
pub const CE_CLIP: f64 = 1e-12;

/// A loss value and, on request, its gradient with respect to the
/// (student) probabilities, laid out like the probability buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
}

fn check_raw(p: &[f64], labels: &[u8], k: usize) -> Result<()> {
    if k == 0 || p.len() != labels.len() * k {
        return Err(Error::Shape(format!(
            "{} probabilities do not match {} labels with k={k}",
            p.len(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&c| c as usize >= k) {
        return Err(Error::Invalid(format!("label {bad} not below k={k}")));
    }
    Ok(())
}

/// Squared-denominator soft Dice over all classes and voxels pooled:
/// `1 - (2 sum p*y + eps) / (sum p^2 + sum y^2 + eps)`.
pub fn dice_loss_raw(
    p: &[f64],
    labels: &[u8],
    k: usize,
    eps: f64,
    with_grad: bool,
) -> Result<LossValue> {
    check_raw(p, labels, k)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Invalid(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    let mut overlap = 0.0;
    let mut p_sq = 0.0;
    for (voxel, &c) in p.chunks_exact(k).zip(labels) {
        overlap += voxel[c as usize];
        for &q in voxel {
            p_sq += q * q;
        }
    }
    // y is one-hot, so sum y^2 is the voxel count.
    let y_sq = labels.len() as f64;
    let num = 2.0 * overlap + eps;
    let den = p_sq + y_sq + eps;
    let value = 1.0 - num / den;
    let gradient = with_grad.then(|| {
        let den2 = den * den;
        let mut g = Vec::with_capacity(p.len());
        for (voxel, &c) in p.chunks_exact(k).zip(labels) {
            for (j, &q) in voxel.iter().enumerate() {
                let y = if j == c as usize { 1.0 } else { 0.0 };
                g.push((2.0 * q * num - 2.0 * y * den) / den2);
            }
        }
        g
    });
    Ok(LossValue { value, gradient })
}

/// Mean negative log-likelihood of the labelled class.
pub fn ce_loss_raw(p: &[f64], labels: &[u8], k: usize, with_grad: bool) -> Result<LossValue> {
    check_raw(p, labels, k)?;
    let n = labels.len() as f64;
    let mut sum = 0.0;
    for (voxel, &c) in p.chunks_exact(k).zip(labels) {
        sum += voxel[c as usize].clamp(CE_CLIP, 1.0).ln();
    }
    let value = -sum / n;
    let gradient = with_grad.then(|| {
        let mut g = vec![0.0; p.len()];
        for (v, &c) in labels.iter().enumerate() {
            let idx = v * k + c as usize;
            let q = p[idx];
            if q > CE_CLIP && q <= 1.0 {
                g[idx] = -1.0 / (n * q);
            }
        }
        g
    });
    Ok(LossValue { value, gradient })
}

/// Dice plus cross-entropy.
pub fn seg_loss_raw(
    p: &[f64],
    labels: &[u8],
    k: usize,
    eps: f64,
    with_grad: bool,
) -> Result<LossValue> {
    let dice = dice_loss_raw(p, labels, k, eps, with_grad)?;
    let ce = ce_loss_raw(p, labels, k, with_grad)?;
    Ok(combine(dice, ce))
}

fn combine(dice: LossValue, ce: LossValue) -> LossValue {
    let gradient = match (dice.gradient, ce.gradient) {
        (Some(mut a), Some(b)) => {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            Some(a)
        }
        _ => None,
    };
    LossValue {
        value: dice.value + ce.value,
        gradient,
    }
}

/// Mean over voxels of the squared teacher/student difference summed over
/// channels. The gradient is taken with respect to the student.
pub fn consistency_loss_raw(
    teacher: &[f64],
    student: &[f64],
    k: usize,
    with_grad: bool,
) -> Result<LossValue> {
    if k == 0
        || teacher.len() != student.len()
        || !teacher.len().is_multiple_of(k)
        || teacher.is_empty()
    {
        return Err(Error::Shape(format!(
            "teacher has {} values, student {} (k={k})",
            teacher.len(),
            student.len()
        )));
    }
    let n = (teacher.len() / k) as f64;
    let sum: f64 = teacher
        .iter()
        .zip(student)
        .map(|(t, s)| (t - s) * (t - s))
        .sum();
    let gradient = with_grad.then(|| {
        teacher
            .iter()
            .zip(student)
            .map(|(t, s)| 2.0 * (s - t) / n)
            .collect()
    });
    Ok(LossValue {
        value: sum / n,
        gradient,
    })
}

pub fn dice_loss(p: &ProbVolume, y: &LabelVolume, eps: f64, with_grad: bool) -> Result<LossValue> {
    ensure_prob_label(p, y)?;
    dice_loss_raw(p.data(), y.data(), p.k(), eps, with_grad)
}

pub fn ce_loss(p: &ProbVolume, y: &LabelVolume, with_grad: bool) -> Result<LossValue> {
    ensure_prob_label(p, y)?;
    ce_loss_raw(p.data(), y.data(), p.k(), with_grad)
}

pub fn seg_loss(p: &ProbVolume, y: &LabelVolume, eps: f64, with_grad: bool) -> Result<LossValue> {
    ensure_prob_label(p, y)?;
    seg_loss_raw(p.data(), y.data(), p.k(), eps, with_grad)
}

pub fn consistency_loss(
    teacher: &ProbVolume,
    student: &ProbVolume,
    with_grad: bool,
) -> Result<LossValue> {
    ensure_same_grid(teacher.dims(), student.dims(), "teacher vs student")?;
    if teacher.k() != student.k() {
        return Err(Error::Shape(format!(
            "teacher has k={} but student has k={}",
            teacher.k(),
            student.k()
        )));
    }
    consistency_loss_raw(teacher.data(), student.data(), teacher.k(), with_grad)
}
