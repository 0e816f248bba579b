//! Regenerates the end-to-end fixture under `tests/fixtures/`.
//!
//! Three softmax volumes on a 32³ grid plus ground truth, and the golden CSV
//! produced by fuse, postprocess and eval through the library. Run with
//! `cargo run -p labelfuse-cli --example make_fixture`.

use std::path::{Path, PathBuf};

use labelfuse::io::{save_label, save_prob};
use labelfuse::metrics::to_csv;
use labelfuse::{
    evaluate, fuse_chain, postprocess_pipeline, Dims, LabelVolume, ProbVolume, Spacing,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20211014;
const N: usize = 32;

fn ground_truth(dims: Dims) -> Vec<u8> {
    let mut gt = vec![0u8; dims.len()];
    for z in 0..N {
        for y in 0..N {
            for x in 0..N {
                let (fx, fy, fz) = (x as f64 - 18.0, y as f64 - 16.0, z as f64 - 14.0);
                let i = dims.index(x, y, z);
                if fx * fx + fy * fy + fz * fz <= 36.0 {
                    gt[i] = 1;
                } else if (6..10).contains(&x) && (12..16).contains(&y) && (10..13).contains(&z) {
                    gt[i] = 2;
                }
            }
        }
    }
    gt
}

fn other(rng: &mut ChaCha8Rng, c: u8) -> u8 {
    (c + rng.gen_range(1..3u8)) % 3
}

/// Model A: ground truth with sparse label noise and a spurious tumour blob
/// far above the cochlea, rendered as 0.875 / 0.0625.
fn noisy_model(rng: &mut ChaCha8Rng, dims: Dims, gt: &[u8]) -> Vec<f64> {
    let mut p = Vec::with_capacity(gt.len() * 3);
    for (i, &c) in gt.iter().enumerate() {
        let [x, y, z] = dims.coords(i);
        let spurious = (20..24).contains(&x) && (4..8).contains(&y) && (28..31).contains(&z);
        let l = if spurious {
            1
        } else if rng.gen_bool(0.08) {
            other(rng, c)
        } else {
            c
        };
        for j in 0..3u8 {
            p.push(if j == l { 0.875 } else { 0.0625 });
        }
    }
    p
}

/// Calibrated model with confidence `1 - 0.5 u^8` snapped to a 1/32 grid, so
/// every value is exact in float32 and channels sum to one exactly.
fn calibrated_model(rng: &mut ChaCha8Rng, gt: &[u8]) -> Vec<f64> {
    let mut p = Vec::with_capacity(gt.len() * 3);
    for &c in gt {
        let u: f64 = rng.gen_range(0.0..1.0);
        let conf = ((1.0 - 0.5 * u.powi(8)) * 32.0).round() / 32.0;
        let pick = if rng.gen_bool(conf) { c } else { other(rng, c) };
        for j in 0..3u8 {
            p.push(if j == pick { conf } else { (1.0 - conf) / 2.0 });
        }
    }
    p
}

fn main() {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).expect("create fixture dir");
    let dims = Dims::new(N, N, N).unwrap();
    let sp = Spacing::new(0.5, 0.5, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let gt_data = ground_truth(dims);
    let a = noisy_model(&mut rng, dims, &gt_data);
    let b = calibrated_model(&mut rng, &gt_data);
    let c = calibrated_model(&mut rng, &gt_data);
    let models: Vec<ProbVolume> = [a, b, c]
        .into_iter()
        .map(|d| ProbVolume::new(dims, sp, 3, d).unwrap())
        .collect();
    let gt = LabelVolume::new(dims, sp, 3, gt_data).unwrap();

    for (m, name) in models.iter().zip(["model_a", "model_b", "model_c"]) {
        save_prob(m, &dir.join(format!("{name}.nii.gz"))).unwrap();
    }
    save_label(&gt, &dir.join("gt.nii.gz")).unwrap();

    // Golden output from the values as stored on disk.
    let stored: Vec<ProbVolume> = ["model_a", "model_b", "model_c"]
        .iter()
        .map(|n| labelfuse::load_prob(&dir.join(format!("{n}.nii.gz"))).unwrap())
        .collect();
    let fused = fuse_chain(&stored).unwrap();
    let cleaned = postprocess_pipeline(&fused, 1, 2, 15.0).unwrap();
    let rec = evaluate(&cleaned, &gt, &[1, 2]).unwrap();
    let csv = to_csv([("case01", &rec)]);
    std::fs::write(dir.join("golden.csv"), &csv).unwrap();
    print!("{csv}");
}
