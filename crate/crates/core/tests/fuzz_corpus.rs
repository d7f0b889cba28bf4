//! Replays the checked-in fuzz corpus through the same properties the fuzz
//! targets assert, so they run under plain `cargo test`.

use std::fs;
use std::path::PathBuf;

use camlink::clustering::ClusterSummary;
use camlink::fingerprint::{decode_fingerprint, encode_fingerprint};
use camlink::identity::ScoreMatrix;
use camlink::imaging::{decode_image, ingest, to_luminance};
use camlink::metrics::Partition;
use camlink::synth::DatasetManifest;
use camlink::Error;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

/// Asserts exactly the seeds named in `accepted` parse.
fn check_split(target: &str, accepted: &[&str], parse: impl Fn(&[u8]) -> bool) {
    for (name, bytes) in seeds(target) {
        assert_eq!(parse(&bytes), accepted.contains(&name.as_str()), "{target}/{name}");
    }
}

#[test]
fn fingerprint_seeds() {
    check_split(
        "decode_fingerprint",
        &["golden.ucif", "synth_32x32.ucif", "tiny_2x2.ucif", "one_pixel.ucif"],
        |bytes| match decode_fingerprint(bytes) {
            Ok(fp) => {
                assert_eq!(encode_fingerprint(&fp).unwrap(), bytes);
                true
            }
            Err(e) => {
                assert!(matches!(e, Error::CorruptFingerprintFile(_)), "{e}");
                false
            }
        },
    );
}

#[test]
fn image_seeds() {
    let rejected = ["truncated.png"];
    for (name, bytes) in seeds("decode_image") {
        match decode_image(&bytes) {
            Ok(raster) => {
                assert!(!rejected.contains(&name.as_str()), "{name}");
                let grid = to_luminance(&raster).unwrap();
                assert!(grid.values().iter().all(|v| (0.0..=255.0).contains(v)), "{name}");
                let small = grid.width() < 32 || grid.height() < 32;
                assert_eq!(ingest(&raster, (32, 32)).is_err(), small, "{name}");
            }
            Err(_) => assert!(rejected.contains(&name.as_str()), "{name}"),
        }
    }
}

#[test]
fn manifest_seeds() {
    check_split("parse_manifest", &["online_small.json"], |bytes| match DatasetManifest::from_json_slice(bytes) {
        Ok(m) => {
            let back = DatasetManifest::from_json_slice(m.to_json().unwrap().as_bytes()).unwrap();
            assert_eq!(back, m);
            true
        }
        Err(e) => {
            assert!(matches!(e, Error::CorruptManifest(_)), "{e}");
            false
        }
    });
}

#[test]
fn score_seeds() {
    check_split("parse_score_csv", &["uci.csv", "two.csv", "missing.csv"], |bytes| {
        match ScoreMatrix::from_csv_slice(bytes) {
            Ok(m) => {
                assert_eq!(ScoreMatrix::from_csv_slice(m.to_csv_string().unwrap().as_bytes()).unwrap(), m);
                true
            }
            Err(e) => {
                assert!(matches!(e, Error::CorruptScoreMatrix(_)), "{e}");
                false
            }
        }
    });
    check_split("parse_score_json", &["uci.json", "two.json"], |bytes| match ScoreMatrix::from_json_slice(bytes) {
        Ok(m) => {
            assert_eq!(ScoreMatrix::from_json_slice(m.to_json().unwrap().as_bytes()).unwrap(), m);
            true
        }
        Err(e) => {
            assert!(matches!(e, Error::CorruptScoreMatrix(_)), "{e}");
            false
        }
    });
}

#[test]
fn cluster_summary_seeds() {
    check_split(
        "parse_cluster_summary",
        &["basic.json", "user0000.json", "user0001.json", "user0002.json", "user0003.json"],
        |bytes| match ClusterSummary::from_json_slice(bytes) {
            Ok(s) => {
                let p = Partition::from_summary(&s);
                let n = p.groups.iter().map(Vec::len).sum::<usize>() + p.rejected.len();
                assert_eq!(n, s.image_count);
                true
            }
            Err(_) => false,
        },
    );
}
