//! Central finite-difference verification of the analytic loss gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::losses::{
    ce_loss_raw, consistency_loss_raw, dice_loss_raw, seg_loss_raw, DEFAULT_DICE_EPS,
};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Largest relative gradient error per loss over all probed volumes.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub volumes: usize,
    pub dice_loss: f64,
    pub ce_loss: f64,
    pub seg_loss: f64,
    pub consistency_loss: f64,
    pub max_rel_error: f64,
}

/// Random voxel-major probabilities and labels on a grid of at most
/// `max_side`³ voxels.
pub fn random_case(rng: &mut impl Rng, max_side: usize, k: usize) -> (Vec<f64>, Vec<u8>) {
    let n: usize = (0..3).map(|_| rng.gen_range(1..=max_side)).product();
    let p = random_probs(rng, n, k);
    let labels = (0..n).map(|_| rng.gen_range(0..k) as u8).collect();
    (p, labels)
}

/// `n` voxels of normalized probabilities bounded away from zero.
pub fn random_probs(rng: &mut impl Rng, n: usize, k: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n * k);
    for _ in 0..n {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        p.extend(raw.iter().map(|x| x / s));
    }
    p
}

/// `|a - b| / max(|a|, |b|)`, with a floor on the denominator so exact
/// zeros compare equal.
pub fn rel_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `f` at `x`.
pub fn max_rel_error_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let up = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_error(analytic[i], numeric));
    }
    worst
}

/// Runs all four losses on `volumes` random grids up to 4³ with three classes.
pub fn run(seed: u64, volumes: usize) -> GradCheckReport {
    const K: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dice, mut ce, mut seg, mut con) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..volumes {
        let (p, y) = random_case(&mut rng, 4, K);
        let t = random_probs(&mut rng, y.len(), K);

        let g = dice_loss_raw(&p, &y, K, DEFAULT_DICE_EPS, true)
            .unwrap()
            .gradient
            .unwrap();
        dice = dice.max(max_rel_error_fd(
            |q| {
                dice_loss_raw(q, &y, K, DEFAULT_DICE_EPS, false)
                    .unwrap()
                    .value
            },
            &p,
            &g,
        ));
        let g = ce_loss_raw(&p, &y, K, true).unwrap().gradient.unwrap();
        ce = ce.max(max_rel_error_fd(
            |q| ce_loss_raw(q, &y, K, false).unwrap().value,
            &p,
            &g,
        ));
        let g = seg_loss_raw(&p, &y, K, DEFAULT_DICE_EPS, true)
            .unwrap()
            .gradient
            .unwrap();
        seg = seg.max(max_rel_error_fd(
            |q| {
                seg_loss_raw(q, &y, K, DEFAULT_DICE_EPS, false)
                    .unwrap()
                    .value
            },
            &p,
            &g,
        ));
        let g = consistency_loss_raw(&t, &p, K, true)
            .unwrap()
            .gradient
            .unwrap();
        con = con.max(max_rel_error_fd(
            |q| consistency_loss_raw(&t, q, K, false).unwrap().value,
            &p,
            &g,
        ));
    }
    GradCheckReport {
        seed,
        volumes,
        dice_loss: dice,
        ce_loss: ce,
        seg_loss: seg,
        consistency_loss: con,
        max_rel_error: dice.max(ce).max(seg).max(con),
    }
}
