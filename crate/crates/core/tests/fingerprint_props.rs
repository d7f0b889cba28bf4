mod common;

use std::path::PathBuf;

use proptest::prelude::*;

use camlink::clustering::prepare_samples;
use camlink::fingerprint::{
    correlation, decode_fingerprint, encode_fingerprint, estimate_fingerprint, load_fingerprint,
    CameraFingerprint, WeightedAccumulator,
};
use camlink::imaging::{DenoiserConfig, PixelGrid, ResidualNoise};
use camlink::synth::{capture, derive_seed, make_camera, SyntheticCamera};
use camlink::Error;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden.ucif")
}

/// Integer-valued images and residuals, so the estimate involves only exact
/// inputs and one rounding per division.
fn golden_pairs() -> Vec<(PixelGrid, ResidualNoise)> {
    (0..3u32)
        .map(|s| {
            let img = PixelGrid::from_fn(32, 24, |x, y| ((x as u32 * 7 + y as u32 * 13 + s * 29) % 200 + 20) as f64);
            let res = PixelGrid::from_fn(32, 24, |x, y| ((x as u32 * 5 + y as u32 * 3 + s) % 11) as f64 - 5.0);
            (img, ResidualNoise::from_grid(res))
        })
        .collect()
}

#[test]
fn golden_file_matches_re_estimation() {
    let fp = estimate_fingerprint(&golden_pairs()).unwrap();
    let encoded = encode_fingerprint(&fp).unwrap();
    if std::env::var_os("CAMLINK_REGEN_GOLDEN").is_some() {
        std::fs::write(golden_path(), &encoded).unwrap();
    }
    let golden = std::fs::read(golden_path()).expect("golden file is checked in");
    assert_eq!(golden, encoded);
    let loaded = load_fingerprint(golden_path()).unwrap();
    assert_eq!(loaded.dims(), (32, 24));
    assert_eq!(loaded.support_count(), 3);
    for (l, v) in loaded.values().iter().zip(fp.values()) {
        assert_eq!(l.to_bits(), f64::from(*v as f32).to_bits());
    }
}

#[test]
fn golden_header_layout() {
    let bytes = std::fs::read(golden_path()).unwrap();
    assert_eq!(&bytes[..4], b"UCIF");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 32);
    assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 24);
    assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 18 + 4 * 32 * 24);
    assert!(matches!(decode_fingerprint(&bytes[..17]), Err(Error::CorruptFingerprintFile(_))));
}

#[test]
fn incremental_matches_batch_on_ten_seeded_pairs() {
    let mut r = common::rng(10);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|_| {
            (
                common::random_values(&mut r, 64, 0.0, 255.0),
                common::random_values(&mut r, 64, -4.0, 4.0),
            )
        })
        .collect();
    let mut acc = WeightedAccumulator::new(8, 8);
    let lib: Vec<(PixelGrid, ResidualNoise)> = pairs
        .iter()
        .map(|(i, res)| {
            (
                PixelGrid::new(8, 8, i.clone()).unwrap(),
                ResidualNoise::from_grid(PixelGrid::new(8, 8, res.clone()).unwrap()),
            )
        })
        .collect();
    for (i, res) in &lib {
        acc.accumulate(i, res).unwrap();
    }
    let incremental = acc.finalize().unwrap();
    let batch = estimate_fingerprint(&lib).unwrap();
    let oracle = common::fingerprint(&pairs);
    for ((a, b), c) in incremental.values().iter().zip(batch.values()).zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
        assert!((a - c).abs() < 1e-12);
    }
}

fn two_grids() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(-100.0f64..100.0, n),
            proptest::collection::vec(-100.0f64..100.0, n),
        )
    })
}

fn grid(v: &[f64]) -> PixelGrid {
    PixelGrid::new(v.len(), 1, v.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn correlation_is_scale_invariant_and_symmetric(
        (a, b) in two_grids(),
        scale in 0.01f64..50.0,
        shift in -100.0f64..100.0,
    ) {
        let (ga, gb) = (grid(&a), grid(&b));
        prop_assume!(!ga.is_constant() && !gb.is_constant());
        let base = correlation(&ga, &gb).unwrap();
        prop_assert_eq!(base, correlation(&gb, &ga).unwrap());
        prop_assert!((base - common::pearson(&a, &b)).abs() < 1e-9);
        let scaled: Vec<f64> = a.iter().map(|v| scale * v + shift).collect();
        prop_assert!((correlation(&grid(&scaled), &gb).unwrap() - base).abs() < 1e-9);
        let flipped: Vec<f64> = a.iter().map(|v| -scale * v + shift).collect();
        prop_assert!((correlation(&grid(&flipped), &gb).unwrap() + base).abs() < 1e-9);
    }
}

fn fingerprint_of(camera: &SyntheticCamera, scenes: std::ops::Range<u64>) -> CameraFingerprint {
    let images: Vec<PixelGrid> = scenes
        .map(|s| capture(camera, derive_seed(99, "fp-test", &[u64::from(camera.camera_id), s]), 2.0).unwrap())
        .collect();
    let cfg = DenoiserConfig {
        crop: (128, 128),
        ..DenoiserConfig::default()
    };
    let samples = prepare_samples(&images, &cfg).unwrap();
    let pairs: Vec<_> = samples.iter().map(|s| (&s.image, &s.residual)).collect();
    estimate_fingerprint(&pairs).unwrap()
}

#[test]
fn synthetic_fingerprints_separate_cameras_and_improve_with_support() {
    let cams: Vec<SyntheticCamera> = (0..2)
        .map(|c| make_camera(c, derive_seed(5, "camera", &[u64::from(c)]), (128, 128), 0.05).unwrap())
        .collect();
    let halves: Vec<[CameraFingerprint; 2]> = cams
        .iter()
        .map(|c| [fingerprint_of(c, 0..20), fingerprint_of(c, 20..40)])
        .collect();
    let same: Vec<f64> = halves
        .iter()
        .map(|h| correlation(h[0].grid(), h[1].grid()).unwrap())
        .collect();
    let mut cross = Vec::new();
    for a in &halves[0] {
        for b in &halves[1] {
            cross.push(correlation(a.grid(), b.grid()).unwrap());
        }
    }
    let min_same = same.iter().copied().fold(f64::INFINITY, f64::min);
    let max_cross = cross.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(min_same > max_cross, "same {same:?} cross {cross:?}");

    // Single residuals of one camera correlate far less than 20-image fingerprints.
    let singles: Vec<CameraFingerprint> = (40..46).map(|s| fingerprint_of(&cams[0], s..s + 1)).collect();
    let mut single_corr = Vec::new();
    for i in 0..singles.len() {
        for j in i + 1..singles.len() {
            single_corr.push(correlation(singles[i].grid(), singles[j].grid()).unwrap());
        }
    }
    let mean_single = single_corr.iter().sum::<f64>() / single_corr.len() as f64;
    let mean_same = same.iter().sum::<f64>() / same.len() as f64;
    assert!(mean_same > mean_single, "{mean_same} vs {mean_single}");

    // The estimate recovers the true pattern better than it matches the other camera.
    for (c, h) in cams.iter().zip(&halves) {
        let truth = correlation(h[0].grid(), c.prnu()).unwrap();
        assert!(truth > max_cross, "{truth} vs {max_cross}");
    }
}

#[test]
fn forty_captures_recover_the_true_pattern() {
    let cam = make_camera(3, 77, (128, 128), 0.05).unwrap();
    let fp = fingerprint_of(&cam, 0..40);
    let c = correlation(fp.grid(), cam.prnu()).unwrap();
    assert!(c > 0.5, "{c}");
}
