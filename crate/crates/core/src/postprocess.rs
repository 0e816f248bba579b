//! Anatomical clean-up of predicted tumour/cochlea masks.
//!
//! Tumour components whose centroid lies too far along z from the cochlea
//! are dropped first, then only the largest component of each structure is
//! kept. Removed voxels become background (class 0).

use serde::Serialize;

use crate::components::{connected_components, ComponentStats};
use crate::error::{Error, Result};
use crate::volume::LabelVolume;

pub const DEFAULT_VS_LABEL: u8 = 1;
pub const DEFAULT_COCHLEA_LABEL: u8 = 2;
/// Maximum z distance, in voxels, between a tumour centroid and the cochlea
/// centroid.
pub const DEFAULT_Z_MAX: f64 = 15.0;

/// Components removed by each clean-up step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PostprocessReport {
    /// Centroid z of the reference cochlea component, if one exists.
    pub reference_z: Option<f64>,
    pub removed_far_vs: Vec<ComponentStats>,
    pub removed_not_largest: Vec<ComponentStats>,
}

fn erase(data: &mut [u8], ids: &[u32], doomed: &[u32]) {
    if doomed.is_empty() {
        return;
    }
    let max = ids.iter().copied().max().unwrap_or(0) as usize;
    let mut kill = vec![false; max + 1];
    for &d in doomed {
        kill[d as usize] = true;
    }
    for (v, &id) in data.iter_mut().zip(ids) {
        if id != 0 && kill[id as usize] {
            *v = 0;
        }
    }
}

fn check_labels(mask: &LabelVolume, labels: &[u8]) -> Result<()> {
    for &l in labels {
        mask.check_class(l)?;
        if l == 0 {
            return Err(Error::Invalid("class 0 is background".into()));
        }
    }
    Ok(())
}

/// Drops tumour components whose centroid z differs from the largest cochlea
/// component's centroid z by more than `z_max` voxels.
pub fn remove_far_vs_detailed(
    mask: &LabelVolume,
    vs_label: u8,
    cochlea_label: u8,
    z_max: f64,
) -> Result<(LabelVolume, PostprocessReport)> {
    check_labels(mask, &[vs_label, cochlea_label])?;
    if vs_label == cochlea_label {
        return Err(Error::Invalid(
            "tumour and cochlea labels must differ".into(),
        ));
    }
    if !(z_max >= 0.0) {
        return Err(Error::Invalid(format!(
            "z_max must be nonnegative, got {z_max}"
        )));
    }
    let cochlea = connected_components(mask, cochlea_label);
    let Some(reference) = cochlea.stats.first() else {
        return Ok((mask.clone(), PostprocessReport::default()));
    };
    let ref_z = reference.centroid[2];
    let vs = connected_components(mask, vs_label);
    let far: Vec<ComponentStats> = vs
        .stats
        .into_iter()
        .filter(|s| (s.centroid[2] - ref_z).abs() > z_max)
        .collect();
    let mut data = mask.data().to_vec();
    erase(
        &mut data,
        &vs.ids,
        &far.iter().map(|s| s.id).collect::<Vec<_>>(),
    );
    let report = PostprocessReport {
        reference_z: Some(ref_z),
        removed_far_vs: far,
        removed_not_largest: Vec::new(),
    };
    Ok((mask.with_data(data), report))
}

pub fn remove_far_vs(
    mask: &LabelVolume,
    vs_label: u8,
    cochlea_label: u8,
    z_max: f64,
) -> Result<LabelVolume> {
    Ok(remove_far_vs_detailed(mask, vs_label, cochlea_label, z_max)?.0)
}

/// Keeps only the first-sorted (largest) component of each listed class.
pub fn keep_largest_detailed(
    mask: &LabelVolume,
    class_labels: &[u8],
) -> Result<(LabelVolume, Vec<ComponentStats>)> {
    check_labels(mask, class_labels)?;
    let mut data = mask.data().to_vec();
    let mut removed = Vec::new();
    for &c in class_labels {
        let comps = connected_components(mask, c);
        let doomed: Vec<ComponentStats> = comps.stats.into_iter().skip(1).collect();
        erase(
            &mut data,
            &comps.ids,
            &doomed.iter().map(|s| s.id).collect::<Vec<_>>(),
        );
        removed.extend(doomed);
    }
    Ok((mask.with_data(data), removed))
}

pub fn keep_largest(mask: &LabelVolume, class_labels: &[u8]) -> Result<LabelVolume> {
    Ok(keep_largest_detailed(mask, class_labels)?.0)
}

/// Far-tumour removal followed by largest-component selection for both
/// structures.
pub fn postprocess_pipeline_detailed(
    mask: &LabelVolume,
    vs_label: u8,
    cochlea_label: u8,
    z_max: f64,
) -> Result<(LabelVolume, PostprocessReport)> {
    let (near, mut report) = remove_far_vs_detailed(mask, vs_label, cochlea_label, z_max)?;
    let (out, removed) = keep_largest_detailed(&near, &[vs_label, cochlea_label])?;
    report.removed_not_largest = removed;
    Ok((out, report))
}

pub fn postprocess_pipeline(
    mask: &LabelVolume,
    vs_label: u8,
    cochlea_label: u8,
    z_max: f64,
) -> Result<LabelVolume> {
    Ok(postprocess_pipeline_detailed(mask, vs_label, cochlea_label, z_max)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, Spacing};

    fn paint(data: &mut [u8], d: Dims, lo: [usize; 3], hi: [usize; 3], c: u8) {
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                for x in lo[0]..hi[0] {
                    data[d.index(x, y, z)] = c;
                }
            }
        }
    }

    /// Cochlea centred at z=10, tumour blobs centred at z=12 and z=30.
    fn scenario() -> LabelVolume {
        let d = Dims::new(32, 32, 32).unwrap();
        let mut data = vec![0u8; d.len()];
        paint(&mut data, d, [4, 4, 9], [7, 7, 12], 2);
        paint(&mut data, d, [15, 15, 11], [18, 18, 14], 1);
        paint(&mut data, d, [15, 15, 29], [18, 18, 32], 1);
        LabelVolume::new(d, Spacing::default(), 3, data).unwrap()
    }

    #[test]
    fn far_component_removed() {
        let m = scenario();
        let (out, rep) = remove_far_vs_detailed(&m, 1, 2, 15.0).unwrap();
        assert_eq!(rep.reference_z, Some(10.0));
        assert_eq!(rep.removed_far_vs.len(), 1);
        assert_eq!(rep.removed_far_vs[0].centroid[2], 30.0);
        assert_eq!(out.get(16, 16, 30), 0);
        assert_eq!(out.get(16, 16, 12), 1);
    }

    #[test]
    fn no_cochlea_unchanged() {
        let d = Dims::new(4, 4, 4).unwrap();
        let mut data = vec![0u8; d.len()];
        data[0] = 1;
        let m = LabelVolume::new(d, Spacing::default(), 3, data).unwrap();
        assert_eq!(remove_far_vs(&m, 1, 2, 0.0).unwrap(), m);
    }

    #[test]
    fn bad_labels() {
        let m = scenario();
        assert!(remove_far_vs(&m, 1, 3, 15.0).is_err());
        assert!(remove_far_vs(&m, 1, 1, 15.0).is_err());
        assert!(keep_largest(&m, &[0]).is_err());
    }

    #[test]
    fn keep_largest_sizes() {
        let d = Dims::new(12, 12, 4).unwrap();
        let mut data = vec![0u8; d.len()];
        paint(&mut data, d, [0, 0, 0], [5, 5, 2], 1); // 50 voxels
        paint(&mut data, d, [9, 9, 0], [12, 10, 1], 1); // 3 voxels
        let m = LabelVolume::new(d, Spacing::default(), 3, data).unwrap();
        let (out, removed) = keep_largest_detailed(&m, &[1, 2]).unwrap();
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].voxel_count, 3);
        assert_eq!(out.data().iter().filter(|&&v| v == 1).count(), 50);
        assert_eq!(keep_largest(&out, &[1, 2]).unwrap(), out);
    }

    #[test]
    fn keep_largest_tie_prefers_lowest_index() {
        let d = Dims::new(5, 1, 1).unwrap();
        let m = LabelVolume::new(d, Spacing::default(), 3, vec![0, 1, 0, 0, 1]).unwrap();
        assert_eq!(keep_largest(&m, &[1]).unwrap().data(), &[0, 1, 0, 0, 0]);
    }
}
