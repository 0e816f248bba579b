//! Independent reference implementations and random instance generators
//! shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use labelfuse::{Dims, LabelVolume, ProbVolume, Spacing};
use rand::Rng;

/// Output of the naive two-pass confident-learning reference.
#[derive(Debug, PartialEq)]
pub struct NaiveFusion {
    pub thresholds: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub flags: Vec<bool>,
    pub suggested: Vec<Option<u8>>,
    pub fused: Vec<u8>,
}

/// Pass one computes per-class mean self-confidence, pass two walks every
/// example and applies the counting and correction rules literally.
pub fn naive_fusion(labels: &[u8], probs: &[Vec<f64>], k: usize) -> NaiveFusion {
    let mut thresholds = Vec::new();
    for j in 0..k {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, &l) in labels.iter().enumerate() {
            if l as usize == j {
                sum += probs[i][j];
                n += 1;
            }
        }
        thresholds.push(if n == 0 {
            f64::INFINITY
        } else {
            sum / n as f64
        });
    }

    let mut counts = vec![vec![0u64; k]; k];
    let mut flags = vec![false; labels.len()];
    let mut suggested = vec![None; labels.len()];
    let mut fused = labels.to_vec();
    for (i, &l) in labels.iter().enumerate() {
        let p = &probs[i];
        let above: Vec<usize> = (0..k).filter(|&j| p[j] >= thresholds[j]).collect();
        if above.is_empty() {
            continue;
        }
        let mut best = above[0];
        for &j in &above {
            if p[j] > p[best] {
                best = j;
            }
        }
        counts[l as usize][best] += 1;
        if best != l as usize {
            flags[i] = true;
            let mut top = 0;
            for j in 0..k {
                if p[j] > p[top] {
                    top = j;
                }
            }
            suggested[i] = Some(top as u8);
            fused[i] = top as u8;
        }
    }
    NaiveFusion {
        thresholds,
        counts,
        flags,
        suggested,
        fused,
    }
}

/// Random labels and probabilities; probabilities are occasionally quantized
/// to a coarse grid so exact threshold ties occur.
pub fn random_fusion_instance(rng: &mut impl Rng) -> (LabelVolume, ProbVolume, Vec<Vec<f64>>) {
    let k = rng.gen_range(1..=3usize);
    let n = rng.gen_range(1..=1000usize);
    let coarse = rng.gen_bool(0.3);
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..k) as u8).collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let raw: Vec<f64> = (0..k)
            .map(|_| {
                if coarse {
                    rng.gen_range(0..4) as f64
                } else {
                    rng.gen_range(0.0..1.0)
                }
            })
            .collect();
        let s: f64 = raw.iter().sum();
        let row = if s == 0.0 {
            vec![1.0 / k as f64; k]
        } else {
            raw.iter().map(|x| x / s).collect()
        };
        rows.push(row);
    }
    let dims = Dims::new(n, 1, 1).unwrap();
    let l = LabelVolume::new(dims, Spacing::default(), k, labels).unwrap();
    let p = ProbVolume::new(dims, Spacing::default(), k, rows.concat()).unwrap();
    // Probabilities as actually stored (renormalization may touch them).
    let stored = p.voxels().map(|v| v.to_vec()).collect();
    (l, p, stored)
}

/// Random grid no larger than `max_side` per axis.
pub fn random_dims(rng: &mut impl Rng, max_side: usize) -> Dims {
    Dims::new(
        rng.gen_range(1..=max_side),
        rng.gen_range(1..=max_side),
        rng.gen_range(1..=max_side),
    )
    .unwrap()
}

/// Random mask at a random foreground density; foreground voxels get a
/// uniformly chosen class in `1..k`.
pub fn random_mask(rng: &mut impl Rng, dims: Dims, spacing: Spacing, k: usize) -> LabelVolume {
    let density = rng.gen_range(0.05..0.6);
    let data: Vec<u8> = (0..dims.len())
        .map(|_| {
            if rng.gen_bool(density) {
                rng.gen_range(1..k) as u8
            } else {
                0
            }
        })
        .collect();
    LabelVolume::new(dims, spacing, k, data).unwrap()
}

pub fn random_spacing(rng: &mut impl Rng) -> Spacing {
    Spacing::new(
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..3.0),
    )
    .unwrap()
}

/// 26-connected components by breadth-first flood fill, each as a sorted
/// list of linear indices; the list of components is sorted too.
pub fn flood_fill_components(mask: &LabelVolume, class_label: u8) -> Vec<Vec<usize>> {
    let dims = mask.dims();
    let data = mask.data();
    let mut seen = vec![false; data.len()];
    let mut out = Vec::new();
    for start in 0..data.len() {
        if seen[start] || data[start] != class_label {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            let [x, y, z] = dims.coords(v);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if nx < 0
                            || ny < 0
                            || nz < 0
                            || nx >= dims.nx as i64
                            || ny >= dims.ny as i64
                            || nz >= dims.nz as i64
                        {
                            continue;
                        }
                        let w = dims.index(nx as usize, ny as usize, nz as usize);
                        if !seen[w] && data[w] == class_label {
                            seen[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

/// Boundary voxels by explicit 6-neighbour inspection.
pub fn naive_surface(mask: &LabelVolume, class_label: u8) -> Vec<[usize; 3]> {
    let d = mask.dims();
    let mut out = Vec::new();
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                if mask.get(x, y, z) != class_label {
                    continue;
                }
                let neighbours = [
                    (x as i64 - 1, y as i64, z as i64),
                    (x as i64 + 1, y as i64, z as i64),
                    (x as i64, y as i64 - 1, z as i64),
                    (x as i64, y as i64 + 1, z as i64),
                    (x as i64, y as i64, z as i64 - 1),
                    (x as i64, y as i64, z as i64 + 1),
                ];
                let boundary = neighbours.iter().any(|&(a, b, c)| {
                    a < 0
                        || b < 0
                        || c < 0
                        || a >= d.nx as i64
                        || b >= d.ny as i64
                        || c >= d.nz as i64
                        || mask.get(a as usize, b as usize, c as usize) != class_label
                });
                if boundary {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Dice by direct counting.
pub fn brute_dice(pred: &LabelVolume, gt: &LabelVolume, c: u8) -> f64 {
    let a = pred.data().iter().filter(|&&v| v == c).count();
    let b = gt.data().iter().filter(|&&v| v == c).count();
    let both = pred
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(&p, &g)| p == c && g == c)
        .count();
    if a + b == 0 {
        1.0
    } else {
        2.0 * both as f64 / (a + b) as f64
    }
}

/// ASSD by all-pairs nearest-neighbour search.
pub fn brute_assd(pred: &LabelVolume, gt: &LabelVolume, c: u8) -> f64 {
    let sp = pred.spacing().as_array();
    let sa = naive_surface(pred, c);
    let sb = naive_surface(gt, c);
    if pred
        .data()
        .iter()
        .map(|&v| v == c)
        .eq(gt.data().iter().map(|&v| v == c))
    {
        return 0.0;
    }
    if sa.is_empty() || sb.is_empty() {
        return f64::INFINITY;
    }
    let dist = |a: &[usize; 3], b: &[usize; 3]| {
        let mut s = 0.0;
        for ax in 0..3 {
            let d = (a[ax] as f64 - b[ax] as f64) * sp[ax];
            s += d * d;
        }
        s.sqrt()
    };
    let nearest = |p: &[usize; 3], set: &[[usize; 3]]| {
        set.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)
    };
    let total: f64 = sa.iter().map(|p| nearest(p, &sb)).sum::<f64>()
        + sb.iter().map(|p| nearest(p, &sa)).sum::<f64>();
    total / (sa.len() + sb.len()) as f64
}

/// One synthetic fusion trial on an 8³ grid with three classes.
///
/// Ground truth is a tumour ball plus a cochlea box. Model A is the ground
/// truth with 10% of voxels flipped to a uniformly chosen other class,
/// rendered as 0.9 on its label and 0.05 elsewhere. Models B and C are
/// calibrated: each voxel draws a confidence `c = 1 - 0.5 u^8` with
/// `u ~ U(0, 1)`, predicts the true class with probability `c` (another
/// class otherwise), and puts `c` on its prediction and `(1 - c) / 2` on the
/// other classes. Their expected error rate is 1/18.
pub struct FusionTrial {
    pub gt: LabelVolume,
    pub models: Vec<ProbVolume>,
}

pub fn fusion_trial(rng: &mut impl Rng) -> FusionTrial {
    let dims = Dims::new(8, 8, 8).unwrap();
    let sp = Spacing::default();
    let mut gt = vec![0u8; dims.len()];
    for z in 0..8 {
        for y in 0..8 {
            for x in 0..8 {
                let (fx, fy, fz) = (x as f64 - 4.5, y as f64 - 4.5, z as f64 - 3.5);
                let i = dims.index(x, y, z);
                if fx * fx + fy * fy + fz * fz <= 6.25 {
                    gt[i] = 1;
                } else if x < 2 && y < 3 && (1..4).contains(&z) {
                    gt[i] = 2;
                }
            }
        }
    }
    let other = |rng: &mut dyn rand::RngCore, c: u8| -> u8 {
        let off = rng.gen_range(1..3u8);
        (c + off) % 3
    };

    let mut a = Vec::with_capacity(dims.len() * 3);
    for &c in &gt {
        let l = if rng.gen_bool(0.1) { other(rng, c) } else { c };
        for j in 0..3u8 {
            a.push(if j == l { 0.9 } else { 0.05 });
        }
    }
    let calibrated = |rng: &mut dyn rand::RngCore| {
        let mut p = Vec::with_capacity(dims.len() * 3);
        for &c in &gt {
            let conf = calibrated_confidence(rng);
            let pick = if rng.gen_bool(conf) { c } else { other(rng, c) };
            for j in 0..3u8 {
                p.push(if j == pick { conf } else { (1.0 - conf) / 2.0 });
            }
        }
        ProbVolume::new(dims, sp, 3, p).unwrap()
    };
    let b = calibrated(rng);
    let cm = calibrated(rng);
    FusionTrial {
        gt: LabelVolume::new(dims, sp, 3, gt).unwrap(),
        models: vec![ProbVolume::new(dims, sp, 3, a).unwrap(), b, cm],
    }
}

/// Confidence of a calibrated corrector, skewed towards one.
pub fn calibrated_confidence(rng: &mut dyn rand::RngCore) -> f64 {
    let u: f64 = rng.gen_range(0.0..1.0);
    1.0 - 0.5 * u.powi(8)
}

/// Mean foreground Dice over tumour and cochlea.
pub fn mean_fg_dice(pred: &LabelVolume, gt: &LabelVolume) -> f64 {
    (brute_dice(pred, gt, 1) + brute_dice(pred, gt, 2)) / 2.0
}
