//! Per-class Dice overlap and average symmetric surface distance.
//!
//! Surfaces are the foreground voxels with a 6-neighbour that is background
//! or outside the grid. Distances are exact Euclidean distances between voxel
//! centres in millimetres. Empty-mask conventions: Dice is 1 when both masks
//! are empty and 0 when exactly one is; ASSD is 0 when both are empty and
//! `+inf` when exactly one is.

use rayon::prelude::*;
use serde::Serialize;

use crate::edt::squared_edt;
use crate::error::{Error, Result};
use crate::volume::{ensure_same_grid, Dims, LabelVolume};

/// Evaluated foreground classes: tumour and cochlea.
pub const DEFAULT_EVAL_CLASSES: [u8; 2] = [1, 2];

fn binarize(mask: &LabelVolume, class_label: u8) -> Vec<bool> {
    mask.data().iter().map(|&v| v == class_label).collect()
}

fn check_pair(pred: &LabelVolume, gt: &LabelVolume, class_label: u8) -> Result<()> {
    ensure_same_grid(pred.dims(), gt.dims(), "prediction vs ground truth")?;
    pred.check_class(class_label)?;
    gt.check_class(class_label)
}

/// `2|A∩B| / (|A| + |B|)` for the given class.
pub fn dice_score(pred: &LabelVolume, gt: &LabelVolume, class_label: u8) -> Result<f64> {
    check_pair(pred, gt, class_label)?;
    let (mut a, mut b, mut both) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let (ip, ig) = (p == class_label, g == class_label);
        a += ip as u64;
        b += ig as u64;
        both += (ip && ig) as u64;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

fn surface_mask(dims: Dims, fg: &[bool]) -> Vec<bool> {
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    (0..fg.len())
        .into_par_iter()
        .map(|i| {
            if !fg[i] {
                return false;
            }
            let [x, y, z] = dims.coords(i);
            x == 0
                || y == 0
                || z == 0
                || x + 1 == nx
                || y + 1 == ny
                || z + 1 == nz
                || !fg[i - 1]
                || !fg[i + 1]
                || !fg[i - nx]
                || !fg[i + nx]
                || !fg[i - nx * ny]
                || !fg[i + nx * ny]
        })
        .collect()
}

/// Boundary voxels of a class, in linear-index order.
pub fn extract_surface(mask: &LabelVolume, class_label: u8) -> Vec<[usize; 3]> {
    let dims = mask.dims();
    surface_mask(dims, &binarize(mask, class_label))
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .map(|(i, _)| dims.coords(i))
        .collect()
}

/// Sum of distances from each surface voxel in `from` to the nearest voxel
/// of `to_field` (a squared distance map).
fn directed_sum(from: &[bool], to_field: &[f64]) -> f64 {
    let d: Vec<f64> = from
        .par_iter()
        .zip(to_field.par_iter())
        .filter(|(&s, _)| s)
        .map(|(_, &d2)| d2.sqrt())
        .collect();
    d.iter().sum()
}

/// Average symmetric surface distance in millimetres.
pub fn assd(pred: &LabelVolume, gt: &LabelVolume, class_label: u8) -> Result<f64> {
    check_pair(pred, gt, class_label)?;
    if pred.spacing() != gt.spacing() {
        return Err(Error::Shape(format!(
            "spacing {:?} vs {:?}",
            pred.spacing(),
            gt.spacing()
        )));
    }
    let dims = pred.dims();
    let a = binarize(pred, class_label);
    let b = binarize(gt, class_label);
    if a == b {
        return Ok(0.0);
    }
    let sa = surface_mask(dims, &a);
    let sb = surface_mask(dims, &b);
    let (na, nb) = (
        sa.iter().filter(|&&s| s).count(),
        sb.iter().filter(|&&s| s).count(),
    );
    if na == 0 || nb == 0 {
        return Ok(f64::INFINITY);
    }
    let da = squared_edt(dims, pred.spacing(), &sa);
    let db = squared_edt(dims, pred.spacing(), &sb);
    let total = directed_sum(&sa, &db) + directed_sum(&sb, &da);
    Ok(total / (na + nb) as f64)
}

/// Scores for one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class_label: u8,
    pub dice: f64,
    pub assd_mm: f64,
}

/// Scores for one prediction/ground-truth pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub classes: Vec<ClassMetrics>,
}

impl MetricsRecord {
    pub fn get(&self, class_label: u8) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.class_label == class_label)
    }
}

pub fn evaluate(pred: &LabelVolume, gt: &LabelVolume, classes: &[u8]) -> Result<MetricsRecord> {
    let mut out = Vec::with_capacity(classes.len());
    for &c in classes {
        out.push(ClassMetrics {
            class_label: c,
            dice: dice_score(pred, gt, c)?,
            assd_mm: assd(pred, gt, c)?,
        });
    }
    Ok(MetricsRecord { classes: out })
}

pub const CSV_HEADER: &str = "case,class,dice,assd_mm";

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:?}")
    }
}

/// CSV rows for one case, without header; dice is a fraction, not percent.
pub fn csv_rows(case: &str, record: &MetricsRecord) -> String {
    let mut s = String::new();
    for c in &record.classes {
        s.push_str(&format!(
            "{case},{},{},{}\n",
            c.class_label,
            fmt_value(c.dice),
            fmt_value(c.assd_mm)
        ));
    }
    s
}

/// Header plus rows for every case.
pub fn to_csv<'a>(cases: impl IntoIterator<Item = (&'a str, &'a MetricsRecord)>) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for (case, rec) in cases {
        s.push_str(&csv_rows(case, rec));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Spacing;

    fn mask(dims: Dims, sp: Spacing, on: &[[usize; 3]]) -> LabelVolume {
        let mut data = vec![0u8; dims.len()];
        for &[x, y, z] in on {
            data[dims.index(x, y, z)] = 1;
        }
        LabelVolume::new(dims, sp, 3, data).unwrap()
    }

    #[test]
    fn dice_cases() {
        let d = Dims::new(4, 2, 1).unwrap();
        let sp = Spacing::default();
        let a = mask(d, sp, &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
        let b = mask(d, sp, &[[2, 0, 0], [3, 0, 0], [0, 1, 0], [1, 1, 0]]);
        let c = mask(d, sp, &[[0, 1, 0], [1, 1, 0], [2, 1, 0], [3, 1, 0]]);
        assert_eq!(dice_score(&a, &a, 1).unwrap(), 1.0);
        assert_eq!(dice_score(&a, &c, 1).unwrap(), 0.0);
        assert_eq!(dice_score(&a, &b, 1).unwrap(), 0.5);
        let e = mask(d, sp, &[]);
        assert_eq!(dice_score(&e, &e, 1).unwrap(), 1.0);
        assert_eq!(dice_score(&e, &a, 1).unwrap(), 0.0);
    }

    #[test]
    fn surface_counts() {
        let d = Dims::new(5, 5, 5).unwrap();
        let sp = Spacing::default();
        assert_eq!(
            extract_surface(&mask(d, sp, &[[2, 2, 2]]), 1),
            vec![[2, 2, 2]]
        );
        let mut cube = Vec::new();
        for z in 1..4 {
            for y in 1..4 {
                for x in 1..4 {
                    cube.push([x, y, z]);
                }
            }
        }
        let s = extract_surface(&mask(d, sp, &cube), 1);
        assert_eq!(s.len(), 26);
        assert!(!s.contains(&[2, 2, 2]));
        assert!(extract_surface(&mask(d, sp, &[]), 1).is_empty());
    }

    #[test]
    fn assd_cases() {
        let d = Dims::new(3, 3, 6).unwrap();
        let sp = Spacing::new(0.5, 0.5, 1.5).unwrap();
        let a = mask(d, sp, &[[1, 1, 1]]);
        let b = mask(d, sp, &[[1, 1, 4]]);
        assert_eq!(assd(&a, &a, 1).unwrap(), 0.0);
        assert!((assd(&a, &b, 1).unwrap() - 4.5).abs() < 1e-12);
        let e = mask(d, sp, &[]);
        assert_eq!(assd(&e, &b, 1).unwrap(), f64::INFINITY);
        assert_eq!(assd(&e, &e, 1).unwrap(), 0.0);
        let other = a.with_spacing(Spacing::default());
        assert!(assd(&other, &b, 1).is_err());
    }

    #[test]
    fn csv_format() {
        let rec = MetricsRecord {
            classes: vec![
                ClassMetrics {
                    class_label: 1,
                    dice: 1.0,
                    assd_mm: 0.0,
                },
                ClassMetrics {
                    class_label: 2,
                    dice: 0.0,
                    assd_mm: f64::INFINITY,
                },
            ],
        };
        assert_eq!(
            to_csv([("c1", &rec)]),
            "case,class,dice,assd_mm\nc1,1,1.0,0.0\nc1,2,0.0,inf\n"
        );
    }
}
