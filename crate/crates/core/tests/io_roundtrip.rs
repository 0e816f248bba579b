use std::fs;

use labelfuse::io::{
    label_dtype_of, load_label, load_prob, load_scalar, load_volume, read_image, save_label,
    save_label_as, save_prob, save_scalar, save_volume, write_image, LabelDtype,
};
use labelfuse::nifti::{NiftiImage, VoxelData};
use labelfuse::{
    Dims, Error, LabelVolume, ParamVector, ProbVolume, ScalarVolume, Spacing, Volume, VolumeKind,
};
use proptest::prelude::*;

fn spacing() -> Spacing {
    Spacing::new(0.46875, 0.46875, 1.5).unwrap()
}

fn labels() -> LabelVolume {
    let d = Dims::new(5, 4, 3).unwrap();
    let data = (0..d.len()).map(|i| (i * 7 % 3) as u8).collect();
    LabelVolume::new(d, spacing(), 3, data).unwrap()
}

#[test]
fn label_roundtrip_all_dtypes() {
    let dir = tempfile::tempdir().unwrap();
    let l = labels();
    for ext in ["nii", "nii.gz"] {
        for dt in [LabelDtype::U8, LabelDtype::I16, LabelDtype::I32] {
            let p = dir.path().join(format!("l_{dt:?}.{ext}"));
            save_label_as(&l, &p, dt).unwrap();
            let back = load_label(&p, 3).unwrap();
            assert_eq!(back, l);
            assert_eq!(back.spacing(), spacing());
            // Writing back with the on-disk type reproduces the file exactly.
            let img = read_image(&p).unwrap();
            let again = dir.path().join(format!("again.{ext}"));
            save_label_as(&back, &again, label_dtype_of(img.data.datatype()).unwrap()).unwrap();
            assert_eq!(fs::read(&p).unwrap(), fs::read(&again).unwrap());
        }
    }
}

#[test]
fn prob_and_scalar_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dims::new(3, 2, 2).unwrap();
    let mut data = Vec::new();
    for v in 0..d.len() {
        let a = 0.05 * v as f64;
        data.extend([a, 0.7 - a / 2.0, 0.3 - a / 2.0]);
    }
    let p = ProbVolume::new(d, spacing(), 3, data).unwrap();
    let s = ScalarVolume::new(
        d,
        spacing(),
        (0..12).map(|i| i as f64 * 1.25 - 3.0).collect(),
    )
    .unwrap();
    for ext in ["nii", "nii.gz"] {
        let pp = dir.path().join(format!("p.{ext}"));
        save_prob(&p, &pp).unwrap();
        let back = load_prob(&pp).unwrap();
        assert_eq!(back.dims(), d);
        assert_eq!(back.k(), 3);
        for (a, b) in back.data().iter().zip(p.data()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let pp2 = dir.path().join(format!("p2.{ext}"));
        save_prob(&back, &pp2).unwrap();
        assert_eq!(fs::read(&pp).unwrap(), fs::read(&pp2).unwrap());

        let sp = dir.path().join(format!("s.{ext}"));
        save_scalar(&s, &sp).unwrap();
        assert_eq!(load_scalar(&sp).unwrap(), s);
    }
}

#[test]
fn prob_image_layout_is_channel_planar() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dims::new(2, 1, 1).unwrap();
    let p = ProbVolume::new(d, Spacing::default(), 2, vec![1.0, 0.0, 0.25, 0.75]).unwrap();
    let path = dir.path().join("p.nii");
    save_prob(&p, &path).unwrap();
    let img = read_image(&path).unwrap();
    assert_eq!(img.dim, vec![2, 1, 1, 2]);
    assert_eq!(img.data, VoxelData::F32(vec![1.0, 0.25, 0.0, 0.75]));
}

#[test]
fn load_examples_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.nii.gz");
    save_label(&labels(), &path).unwrap();
    match load_volume(&path, VolumeKind::Label, 3).unwrap() {
        Volume::Label(l) => assert_eq!(l.spacing(), spacing()),
        _ => unreachable!(),
    }
    // Class count too small for stored values.
    assert!(matches!(load_label(&path, 2), Err(Error::Invalid(_))));
    // A label file is not a probability file.
    assert!(matches!(load_prob(&path), Err(Error::Format(_))));

    let bad_sum = NiftiImage {
        dim: vec![1, 1, 1, 3],
        pixdim: [1.0; 3],
        data: VoxelData::F32(vec![0.5, 0.3, 0.1]),
    };
    let p = dir.path().join("bad.nii");
    write_image(&p, &bad_sum).unwrap();
    let e = load_prob(&p).unwrap_err();
    assert!(
        e.to_string().contains("probability sum out of tolerance"),
        "{e}"
    );

    let ok = NiftiImage {
        dim: vec![1, 1, 1, 3],
        pixdim: [1.0; 3],
        data: VoxelData::F32(vec![0.5, 0.5, 0.0]),
    };
    write_image(&p, &ok).unwrap();
    assert_eq!(load_prob(&p).unwrap().data(), &[0.5, 0.5, 0.0]);

    let float_labels = NiftiImage {
        dim: vec![2, 1, 1],
        pixdim: [1.0; 3],
        data: VoxelData::F32(vec![0.0, 1.0]),
    };
    write_image(&p, &float_labels).unwrap();
    assert!(load_label(&p, 3)
        .unwrap_err()
        .to_string()
        .contains("integer-typed"));

    let negative = NiftiImage {
        dim: vec![2, 1, 1],
        pixdim: [1.0; 3],
        data: VoxelData::I16(vec![0, -1]),
    };
    write_image(&p, &negative).unwrap();
    assert!(load_label(&p, 3).is_err());

    fs::write(&p, b"not a nifti file").unwrap();
    assert!(load_label(&p, 3).unwrap_err().is_io_or_format());
    assert!(matches!(
        load_label(&dir.path().join("missing.nii"), 3),
        Err(Error::Io { .. })
    ));
}

#[test]
fn unwritable_destination() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("no/such/dir/out.nii.gz");
    let e = save_volume(&Volume::Label(labels()), &target).unwrap_err();
    assert!(matches!(e, Error::Io { .. }));
    assert!(!target.exists());
}

#[test]
fn param_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = ParamVector::new(vec![0.0, -1.5, 3.0e-7, 12345.0]).unwrap();
    let path = dir.path().join("w.bin");
    p.save(&path).unwrap();
    let raw = fs::read(&path).unwrap();
    assert_eq!(raw.len(), 8 + 16);
    assert_eq!(
        ParamVector::load(&path).unwrap().values(),
        &[0.0, -1.5, 3.0e-7f32 as f64, 12345.0]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn label_files_roundtrip(
        nx in 1usize..6, ny in 1usize..6, nz in 1usize..6,
        seed in any::<u64>(), gz in any::<bool>(),
        dx in 0.1f32..3.0, dz in 0.1f32..3.0,
    ) {
        let d = Dims::new(nx, ny, nz).unwrap();
        let sp = Spacing::new(dx as f64, 1.0, dz as f64).unwrap();
        let data = (0..d.len()).map(|i| ((seed >> (i % 60)) % 3) as u8).collect();
        let l = LabelVolume::new(d, sp, 3, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(if gz { "x.nii.gz" } else { "x.nii" });
        save_label(&l, &p).unwrap();
        prop_assert_eq!(load_label(&p, 3).unwrap(), l);
    }

    #[test]
    fn param_files_roundtrip(values in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
        let p = ParamVector::new(values.iter().map(|&v| v as f64).collect()).unwrap();
        let back = ParamVector::from_bytes(&p.to_bytes()).unwrap();
        prop_assert_eq!(back, p);
    }
}
