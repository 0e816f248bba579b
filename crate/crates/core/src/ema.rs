//! Exponential-moving-average teacher update over flat parameter vectors.
//!
//! Parameter files hold a little-endian `u64` element count followed by that
//! many little-endian `f32` values. Arithmetic is done in `f64`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

/// Teacher decay used for mean-teacher training.
pub const DEFAULT_DECAY: f64 = 0.99;

/// Flat model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("parameter vector must not be empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite parameter {bad}")));
        }
        Ok(ParamVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.0.len());
        out.extend_from_slice(&(self.0.len() as u64).to_le_bytes());
        for &v in &self.0 {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Format(
                "parameter file shorter than its length prefix".into(),
            ));
        }
        let count = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let body = &bytes[8..];
        if count.checked_mul(4) != Some(body.len() as u64) {
            return Err(Error::Format(format!(
                "parameter file declares {count} values but holds {} bytes of data",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        ParamVector::new(values).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

fn check_decay(decay: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::Invalid(format!(
            "decay must lie in [0, 1], got {decay}"
        )));
    }
    Ok(())
}

fn check_len(a: &ParamVector, b: &ParamVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "teacher has {} parameters, student {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `decay * teacher + (1 - decay) * student`, coordinatewise.
pub fn ema_update(teacher: &ParamVector, student: &ParamVector, decay: f64) -> Result<ParamVector> {
    check_decay(decay)?;
    check_len(teacher, student)?;
    Ok(ParamVector(blend(&teacher.0, &student.0, decay)))
}

/// Evaluated as `t + (1 - decay) (s - t)` and clamped to the segment between
/// `t` and `s`, so fixed points and endpoints are exact.
#[inline]
fn blend(teacher: &[f64], student: &[f64], decay: f64) -> Vec<f64> {
    let w = 1.0 - decay;
    teacher
        .iter()
        .zip(student)
        .map(|(&t, &s)| {
            if w == 1.0 {
                return s;
            }
            (t + w * (s - t)).clamp(t.min(s), t.max(s))
        })
        .collect()
}

/// Applies [`ema_update`] once per student, in order.
pub fn ema_run(teacher: &ParamVector, students: &[ParamVector], decay: f64) -> Result<ParamVector> {
    check_decay(decay)?;
    for s in students {
        check_len(teacher, s)?;
    }
    let out = students
        .iter()
        .fold(teacher.0.clone(), |t, s| blend(&t, &s.0, decay));
    Ok(ParamVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn update_examples() {
        let a = pv(&[0.3, -2.0]);
        assert_eq!(ema_update(&a, &a, 0.99).unwrap(), a);
        let out = ema_update(&pv(&[0.0]), &pv(&[1.0]), 0.99).unwrap();
        assert!((out.values()[0] - 0.01).abs() < 1e-15);
        let b = pv(&[5.0, 1.0]);
        assert_eq!(ema_update(&a, &b, 0.0).unwrap(), b);
        assert_eq!(ema_update(&a, &b, 1.0).unwrap(), a);
    }

    #[test]
    fn update_errors() {
        assert!(ema_update(&pv(&[0.0]), &pv(&[1.0, 2.0]), 0.5).is_err());
        assert!(ema_update(&pv(&[0.0]), &pv(&[1.0]), 1.5).is_err());
        assert!(ema_update(&pv(&[0.0]), &pv(&[1.0]), -0.1).is_err());
        assert!(ParamVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn run_examples() {
        let t = pv(&[1.0, 2.0]);
        assert_eq!(ema_run(&t, &[], 0.99).unwrap(), t);
        let s = pv(&[0.5, 0.0]);
        assert_eq!(
            ema_run(&t, std::slice::from_ref(&s), 0.9).unwrap(),
            ema_update(&t, &s, 0.9).unwrap()
        );
    }

    #[test]
    fn param_file_roundtrip_and_errors() {
        let p = pv(&[0.0, 1.5, -3.25]);
        let b = p.to_bytes();
        assert_eq!(&b[..8], &3u64.to_le_bytes());
        assert_eq!(ParamVector::from_bytes(&b).unwrap(), p);
        assert!(ParamVector::from_bytes(&b[..10]).is_err());
        assert!(ParamVector::from_bytes(&b[..4]).is_err());
    }
}
