use csemd::formats::*;
use csemd::Error;
use csemd_core::dictionary::Dictionary;
use csemd_core::sensing::{build_matrix, MeasurementSet, SensingFamily};
use csemd_core::Matrix;
use proptest::prelude::*;

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes(b[i..i + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(b[i..i + 8].try_into().unwrap())
}

fn meta(m: usize, frames: usize) -> MeasurementMeta {
    MeasurementMeta {
        sample_rate: 8000,
        source_len: 1000,
        n: 400,
        hop: 200,
        m,
        frames,
        family: "gaussian".into(),
        seed: 9,
    }
}

#[test]
fn csm_header_and_row_major_values() {
    let a = Matrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let bytes = encode_csm(&a, 2).unwrap();
    assert_eq!(&bytes[..4], b"CSM1");
    assert_eq!((u32_at(&bytes, 4), u32_at(&bytes, 8), u32_at(&bytes, 12)), (2, 3, 2));
    assert_eq!(bytes.len(), 16 + 6 * 8);
    let values: Vec<f64> = (0..6).map(|k| f64_at(&bytes, 16 + 8 * k)).collect();
    assert_eq!(values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(decode_csm(&bytes).unwrap(), (a, 2));
}

#[test]
fn csd_header_and_column_major_values() {
    let atoms = Matrix::from_columns(2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]).unwrap();
    let dict = Dictionary::new(atoms, vec![0, 0, 1]).unwrap();
    let bytes = encode_csd(&dict).unwrap();
    assert_eq!(&bytes[..4], b"CSD1");
    let header: Vec<u32> = (0..5).map(|k| u32_at(&bytes, 4 + 4 * k)).collect();
    assert_eq!(header, vec![2, 3, 2, 2, 1]);
    let values: Vec<f64> = (0..6).map(|k| f64_at(&bytes, 24 + 8 * k)).collect();
    assert_eq!(values, vec![1.0, 0.0, 0.0, 1.0, 0.6, 0.8]);
    assert_eq!(decode_csd(&bytes).unwrap(), dict);
}

#[test]
fn truncated_and_padded_files_are_rejected() {
    let bytes = encode_csm(&Matrix::identity(3), 1).unwrap();
    for cut in [0, 3, 10, 16, bytes.len() - 1] {
        assert!(decode_csm(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut long = bytes.clone();
    long.push(0);
    assert!(decode_csm(&long).unwrap_err().contains("trailing"));
    let mut wrong = bytes.clone();
    wrong[3] = b'2';
    assert!(decode_csm(&wrong).unwrap_err().contains("magic"));
    let mut nan = bytes;
    nan[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(decode_csm(&nan).is_err());

    let dict = Dictionary::new(Matrix::identity(2), vec![0, 1]).unwrap();
    let bytes = encode_csd(&dict).unwrap();
    assert!(decode_csd(&bytes[..bytes.len() - 8]).is_err());
    let mut counts = bytes.clone();
    counts[16..20].copy_from_slice(&5u32.to_le_bytes());
    assert!(decode_csd(&counts).is_err());
}

#[test]
fn matrix_file_keeps_family() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.csm");
    let phi = build_matrix(SensingFamily::Bernoulli, 20, 40, 5).unwrap();
    write_matrix(&path, &phi).unwrap();
    let back = read_matrix(&path, 5).unwrap();
    assert_eq!(back.family, SensingFamily::Bernoulli);
    assert_eq!(back.entries, phi.entries);
}

#[test]
fn measurements_travel_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.csm");
    let y = MeasurementSet { measurements: Matrix::from_fn(200, 4, |i, j| (i * 4 + j) as f64 * 0.01), source_n: 400 };
    write_measurements(&path, &y, &meta(200, 4)).unwrap();
    assert!(sidecar_path(&path).ends_with("y.toml"));
    let (back, m) = read_measurements(&path).unwrap();
    assert_eq!(back.measurements, y.measurements);
    assert_eq!(back.source_n, 400);
    assert_eq!(m, meta(200, 4));
    assert_eq!(m.layout().hop, 200);

    // a sidecar that disagrees with the block
    std::fs::write(sidecar_path(&path), toml::to_string(&meta(200, 5)).unwrap()).unwrap();
    assert!(matches!(read_measurements(&path), Err(Error::Format { .. })));
    std::fs::remove_file(sidecar_path(&path)).unwrap();
    assert!(matches!(read_measurements(&path), Err(Error::Io { .. })));
}

proptest! {
    #[test]
    fn csm_round_trip(m in 1usize..8, n in 1usize..8, seed in any::<u64>(), tag in 0u32..4) {
        let a = Matrix::from_fn(m, n, |i, j| ((seed ^ (i * 31 + j) as u64) as f64).sin() * 1e3);
        let (b, t) = decode_csm(&encode_csm(&a, tag).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(t, tag);
    }

    #[test]
    fn csd_round_trip(counts in prop::collection::vec(1usize..4, 1..4), n in 1usize..6) {
        let d: usize = counts.iter().sum();
        let atoms = Matrix::from_fn(n, d, |i, j| ((i + 1) * (j + 2)) as f64 / 7.0);
        let levels: Vec<usize> = counts.iter().enumerate().flat_map(|(q, &k)| std::iter::repeat_n(q, k)).collect();
        let dict = Dictionary::new(atoms, levels).unwrap();
        prop_assert_eq!(decode_csd(&encode_csd(&dict).unwrap()).unwrap(), dict);
    }
}
