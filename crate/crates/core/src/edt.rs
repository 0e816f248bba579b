//! Exact squared Euclidean distance transform on anisotropic grids.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb and
//! Huttenlocher), one pass per axis with the squared voxel spacing as the
//! parabola weight.

use rayon::prelude::*;

use crate::volume::{Dims, Spacing};

/// 1D transform of `f` in place; `w` is the squared sample spacing.
fn transform_line(f: &mut [f64], w: f64, sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    let n = f.len();
    sites.clear();
    bounds.clear();
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + w * (q * q) as f64;
        while let Some(&p) = sites.last() {
            let fp = f[p] + w * (p * p) as f64;
            let s = (fq - fp) / (2.0 * w * (q - p) as f64);
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                sites.push(q);
                bounds.push(s);
                break;
            }
        }
        if sites.is_empty() {
            sites.push(q);
            bounds.push(f64::NEG_INFINITY);
        }
    }
    if sites.is_empty() {
        return;
    }
    let src: Vec<f64> = sites.iter().map(|&p| f[p]).collect();
    let mut k = 0;
    for q in 0..n {
        while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - sites[k] as f64;
        f[q] = w * d * d + src[k];
    }
}

/// Squared distance in mm² from every voxel centre to the nearest feature
/// voxel centre; `+inf` everywhere when there are no features.
pub fn squared_edt(dims: Dims, spacing: Spacing, features: &[bool]) -> Vec<f64> {
    assert_eq!(features.len(), dims.len());
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let [wx, wy, wz] = spacing.as_array().map(|s| s * s);
    let mut g: Vec<f64> = features
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();

    g.par_chunks_mut(nx).for_each_init(
        || (Vec::new(), Vec::new()),
        |(s, b), line| transform_line(line, wx, s, b),
    );

    g.par_chunks_mut(nx * ny).for_each_init(
        || (vec![0.0; ny], Vec::new(), Vec::new()),
        |(col, s, b), slab| {
            for x in 0..nx {
                for y in 0..ny {
                    col[y] = slab[x + nx * y];
                }
                transform_line(col, wy, s, b);
                for y in 0..ny {
                    slab[x + nx * y] = col[y];
                }
            }
        },
    );

    let plane = nx * ny;
    let columns: Vec<Vec<f64>> = (0..plane)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(s, b), xy| {
                let mut col: Vec<f64> = (0..nz).map(|z| g[xy + plane * z]).collect();
                transform_line(&mut col, wz, s, b);
                col
            },
        )
        .collect();
    for (xy, col) in columns.into_iter().enumerate() {
        for (z, v) in col.into_iter().enumerate() {
            g[xy + plane * z] = v;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(dims: Dims, sp: Spacing, features: &[bool]) -> Vec<f64> {
        let s = sp.as_array();
        (0..dims.len())
            .map(|i| {
                let a = dims.coords(i);
                features
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f)
                    .map(|(j, _)| {
                        let b = dims.coords(j);
                        (0..3)
                            .map(|ax| {
                                let d = (a[ax] as f64 - b[ax] as f64) * s[ax];
                                d * d
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        let dims = Dims::new(7, 5, 6).unwrap();
        let sp = Spacing::new(0.46875, 0.8, 1.5).unwrap();
        let mut state = 12345u64;
        for _ in 0..10 {
            let features: Vec<bool> = (0..dims.len())
                .map(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (state >> 33) % 13 == 0
                })
                .collect();
            let got = squared_edt(dims, sp, &features);
            let want = brute(dims, sp, &features);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9 || (g.is_infinite() && w.is_infinite()));
            }
        }
    }

    #[test]
    fn empty_is_infinite() {
        let dims = Dims::new(3, 3, 3).unwrap();
        let g = squared_edt(dims, Spacing::default(), &[false; 27]);
        assert!(g.iter().all(|v| v.is_infinite()));
    }
}
