use csemd::wav::{decode, encode, parse, quantize, read_wav, write_wav, WavError};
use csemd::Error;
use csemd_core::framing::AudioSignal;
use proptest::prelude::*;

/// Hand-built RIFF file with the given format fields and raw data bytes.
fn raw_wav(format: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
    let block = channels * bits / 8;
    let mut out = Vec::new();
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * block as u32).to_le_bytes());
    out.extend_from_slice(&block.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
    out
}

fn pcm16(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

#[test]
fn eight_hundred_samples_at_8k() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    let samples: Vec<f64> = (0..800).map(|i| ((i as f64) * 0.01).sin() * 0.5).collect();
    write_wav(&path, &AudioSignal::new(samples, 8000).unwrap()).unwrap();
    let back = read_wav(&path).unwrap();
    assert_eq!(back.samples.len(), 800);
    assert_eq!(back.sample_rate, 8000);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 44 + 1600);
}

#[test]
fn zero_pcm_reads_as_zero() {
    let sig = decode(&raw_wav(1, 1, 8000, 16, &pcm16(&[0; 50]))).unwrap();
    assert!(sig.samples.iter().all(|&v| v == 0.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.wav");
    write_wav(&path, &AudioSignal::new(vec![0.0; 64], 8000).unwrap()).unwrap();
    assert!(read_wav(&path).unwrap().samples.iter().all(|&v| v == 0.0));
}

#[test]
fn half_scale_code() {
    let sig = decode(&raw_wav(1, 1, 16000, 16, &pcm16(&[16384, -16384, -32768]))).unwrap();
    assert_eq!(sig.samples, vec![0.5, -0.5, -1.0]);
    assert_eq!(sig.sample_rate, 16000);
}

#[test]
fn out_of_range_is_clipped() {
    assert_eq!(quantize(1.5), i16::MAX);
    assert_eq!(quantize(-1.5), i16::MIN);
    let bytes = encode(&AudioSignal::new(vec![1.5, -1.5], 8000).unwrap()).unwrap();
    let back = decode(&bytes).unwrap();
    assert!((back.samples[0] - 1.0).abs() <= 1.0 / 32768.0);
    assert_eq!(back.samples[1], -1.0);
}

#[test]
fn header_layout() {
    let bytes = encode(&AudioSignal::new(vec![0.25; 3], 8000).unwrap()).unwrap();
    assert_eq!(bytes, raw_wav(1, 1, 8000, 16, &pcm16(&[8192; 3])));
}

#[test]
fn stereo_and_8_bit_are_unsupported() {
    let stereo = raw_wav(1, 2, 8000, 16, &pcm16(&[0; 8]));
    assert!(matches!(parse(&stereo), Err(WavError::Unsupported(_))));
    let eight = raw_wav(1, 1, 8000, 8, &[128; 8]);
    assert!(matches!(parse(&eight), Err(WavError::Unsupported(_))));
    let float = raw_wav(3, 1, 8000, 32, &[0; 16]);
    assert!(matches!(parse(&float), Err(WavError::Unsupported(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.wav");
    std::fs::write(&path, stereo).unwrap();
    assert!(matches!(read_wav(&path), Err(Error::Unsupported { .. })));
}

#[test]
fn malformed_headers() {
    let good = raw_wav(1, 1, 8000, 16, &pcm16(&[1, 2, 3]));
    let mut not_riff = good.clone();
    not_riff[0] = b'X';
    let mut zero_rate = good.clone();
    zero_rate[24..28].copy_from_slice(&0u32.to_le_bytes());
    let mut odd = good.clone();
    odd.pop();
    odd[40..44].copy_from_slice(&5u32.to_le_bytes());
    for bytes in [&not_riff[..], &good[..20], &good[..36], &zero_rate[..], &odd[..], b""] {
        assert!(matches!(parse(bytes), Err(WavError::Malformed(_))), "{:?}", parse(bytes));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.wav");
    std::fs::write(&path, &good[..20]).unwrap();
    assert!(matches!(read_wav(&path), Err(Error::Format { .. })));
}

#[test]
fn skips_unknown_chunks() {
    let plain = raw_wav(1, 1, 8000, 16, &pcm16(&[7, -7]));
    let mut with_list = plain[..36].to_vec();
    with_list.extend_from_slice(b"LIST");
    with_list.extend_from_slice(&3u32.to_le_bytes());
    with_list.extend_from_slice(&[1, 2, 3, 0]); // odd size plus pad byte
    with_list.extend_from_slice(&plain[36..]);
    assert_eq!(decode(&with_list).unwrap(), decode(&plain).unwrap());
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_wav(&dir.path().join("nope.wav")), Err(Error::Io { .. })));
}

#[test]
fn non_finite_is_refused() {
    assert!(AudioSignal::new(vec![0.0, f64::NAN], 8000).is_err());
    assert!(encode(&AudioSignal { samples: vec![0.0, f64::NAN], sample_rate: 8000 }).is_err());
}

proptest! {
    #[test]
    fn round_trip_within_one_step(samples in prop::collection::vec(-0.9f64..0.9, 1..2000)) {
        let back = decode(&encode(&AudioSignal::new(samples.clone(), 8000).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(back.samples.len(), samples.len());
        for (a, b) in samples.iter().zip(&back.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn codes_survive_exactly(codes in prop::collection::vec(any::<i16>(), 1..500)) {
        let sig = decode(&raw_wav(1, 1, 8000, 16, &pcm16(&codes))).unwrap();
        let again = decode(&encode(&sig).unwrap()).unwrap();
        prop_assert_eq!(sig, again);
    }
}
