//! Objective quality measures for recovered audio: global and segmental SNR,
//! amplitude-envelope correlation and log-spectral distortion.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{dim_err, Error, Result};
use crate::framing::{frame_signal, AudioSignal, WindowConfig};
use crate::linalg::Matrix;

/// Reported in place of +∞ for a perfect estimate.
pub const SNR_CAP_DB: f64 = 99.0;
pub const SEG_SNR_FLOOR_DB: f64 = -10.0;
pub const SEG_SNR_CEIL_DB: f64 = 35.0;
pub const LSD_FLOOR: f64 = 1e-8;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(dim_err("estimate length", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Empty("signals are empty".into()));
    }
    Ok(())
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn error_energy(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn ratio_db(signal: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        return f64::INFINITY;
    }
    if signal == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * libm::log10(signal / noise)
}

/// `10 log10(‖x‖² / ‖x − x̂‖²)`, capped at [`SNR_CAP_DB`].
pub fn snr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let s = energy(reference);
    if s == 0.0 {
        return Err(Error::Undefined("SNR against a silent reference".into()));
    }
    Ok(ratio_db(s, error_energy(reference, estimate)).min(SNR_CAP_DB))
}

/// Mean SNR over consecutive `segment_ms` segments, each clamped to
/// `[-10, 35]` dB. A trailing partial segment counts as a segment.
pub fn segmental_snr(
    reference: &[f64],
    estimate: &[f64],
    sample_rate: u32,
    segment_ms: f64,
) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let seg = (libm::round(segment_ms * sample_rate as f64 / 1000.0) as usize).max(1);
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, e) in reference.chunks(seg).zip(estimate.chunks(seg)) {
        let s = energy(r);
        let n = error_energy(r, e);
        let db = if s == 0.0 && n == 0.0 { SEG_SNR_CEIL_DB } else { ratio_db(s, n) };
        total += db.clamp(SEG_SNR_FLOOR_DB, SEG_SNR_CEIL_DB);
        count += 1;
    }
    Ok(total / count as f64)
}

/// Centered moving average of `|x|` over `width` samples (truncated at the
/// edges).
pub fn amplitude_envelope(x: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v.abs();
        prefix.push(acc);
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    (0..x.len())
        .map(|t| {
            let lo = t.saturating_sub(before);
            let hi = (t + after + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Undefined("envelope has zero variance".into()));
    }
    Ok((cov / libm::sqrt(va * vb)).clamp(-1.0, 1.0))
}

/// Pearson correlation between the `smooth_ms` moving-average envelopes of
/// `|reference|` and `|estimate|`.
pub fn envelope_correlation(
    reference: &[f64],
    estimate: &[f64],
    sample_rate: u32,
    smooth_ms: f64,
) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let width = (libm::round(smooth_ms * sample_rate as f64 / 1000.0) as usize).max(1);
    pearson(&amplitude_envelope(reference, width), &amplitude_envelope(estimate, width))
}

/// Magnitude spectrogram of windowed frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `frames × bins`.
    pub magnitudes: Matrix,
    pub bin_hz: Vec<f64>,
}

/// Real DFT magnitudes of every column, bins `0..=n/2`.
fn dft_magnitudes(frames: &Matrix) -> Matrix {
    let n = frames.rows();
    let bins = n / 2 + 1;
    let cos: Vec<f64> = (0..n).map(|i| libm::cos(2.0 * PI * i as f64 / n as f64)).collect();
    let sin: Vec<f64> = (0..n).map(|i| libm::sin(2.0 * PI * i as f64 / n as f64)).collect();
    let mut out = Matrix::zeros(frames.cols(), bins);
    for (f, col) in frames.columns().enumerate() {
        for k in 0..bins {
            let (mut re, mut im) = (0.0, 0.0);
            let mut idx = 0usize;
            for &v in col {
                re += v * cos[idx];
                im -= v * sin[idx];
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            out.set(f, k, libm::sqrt(re * re + im * im));
        }
    }
    out
}

pub fn spectrogram(signal: &AudioSignal, cfg: &WindowConfig) -> Result<Spectrogram> {
    let frames = frame_signal(signal, cfg)?;
    let n = frames.frame_len();
    let bin_hz = (0..n / 2 + 1).map(|k| k as f64 * signal.sample_rate as f64 / n as f64).collect();
    Ok(Spectrogram { magnitudes: dft_magnitudes(&frames.frames), bin_hz })
}

/// Mean over frames of the RMS difference (over bins) of
/// `20 log10(|X| + δ)`, `δ = 1e-8`.
pub fn log_spectral_distortion(
    reference: &AudioSignal,
    estimate: &AudioSignal,
    cfg: &WindowConfig,
) -> Result<f64> {
    check_lengths(&reference.samples, &estimate.samples)?;
    if reference.sample_rate != estimate.sample_rate {
        return Err(Error::Config("sample rates differ".into()));
    }
    let a = spectrogram(reference, cfg)?.magnitudes;
    let b = spectrogram(estimate, cfg)?.magnitudes;
    let bins = a.cols();
    let mut total = 0.0;
    for f in 0..a.rows() {
        let mut acc = 0.0;
        for k in 0..bins {
            let diff = 20.0 * libm::log10(a.get(f, k) + LSD_FLOOR)
                - 20.0 * libm::log10(b.get(f, k) + LSD_FLOOR);
            acc += diff * diff;
        }
        total += libm::sqrt(acc / bins as f64);
    }
    Ok(total / a.rows() as f64)
}

/// Proxy quality measures for one recovered signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QualityReport {
    /// `None` when the reference is silent.
    pub snr_db: Option<f64>,
    pub seg_snr_db: f64,
    /// `None` when either envelope is constant.
    pub envelope_corr: Option<f64>,
    pub lsd_db: f64,
    /// Wall-clock seconds per pipeline stage.
    pub runtime_breakdown: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub segment_ms: f64,
    pub smooth_ms: f64,
    pub spectrum: WindowConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { segment_ms: 10.0, smooth_ms: 20.0, spectrum: WindowConfig::default() }
    }
}

fn undefined_to_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn evaluate(reference: &AudioSignal, estimate: &AudioSignal, cfg: &EvalConfig) -> Result<QualityReport> {
    let (x, y) = (&reference.samples, &estimate.samples);
    Ok(QualityReport {
        snr_db: undefined_to_none(snr(x, y))?,
        seg_snr_db: segmental_snr(x, y, reference.sample_rate, cfg.segment_ms)?,
        envelope_corr: undefined_to_none(envelope_correlation(x, y, reference.sample_rate, cfg.smooth_ms))?,
        lsd_db: log_spectral_distortion(reference, estimate, &cfg.spectrum)?,
        runtime_breakdown: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn am_tone(len: usize) -> Vec<f64> {
        (0..len)
            .map(|t| {
                let t = t as f64 / 8000.0;
                (1.0 + 0.8 * (2.0 * PI * 3.0 * t).sin()) * (2.0 * PI * 440.0 * t).sin() * 0.4
            })
            .collect()
    }

    #[test]
    fn snr_closed_forms() {
        let x = am_tone(800);
        assert_eq!(snr(&x, &x).unwrap(), SNR_CAP_DB);
        assert!(snr(&x, &vec![0.0; 800]).unwrap().abs() < 1e-12);
        let est: Vec<f64> = x.iter().map(|v| 1.1 * v).collect();
        assert!((snr(&x, &est).unwrap() - 20.0).abs() < 1e-9);
        assert!(matches!(snr(&[0.0; 4], &[1.0; 4]), Err(Error::Undefined(_))));
        assert!(matches!(snr(&[1.0; 4], &[1.0; 3]), Err(Error::Dimension(_))));
    }

    #[test]
    fn snr_scale_equivariance() {
        let x = am_tone(500);
        let est: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 0.01 * (i as f64).sin()).collect();
        let base = snr(&x, &est).unwrap();
        for alpha in [-3.0, 0.25, 7.0] {
            let xs: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let es: Vec<f64> = est.iter().map(|v| alpha * v).collect();
            assert!((snr(&xs, &es).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn segmental_snr_clamps() {
        let x = am_tone(800);
        assert_eq!(segmental_snr(&x, &x, 8000, 10.0).unwrap(), SEG_SNR_CEIL_DB);
        // silent reference, non-silent estimate: every segment at the floor
        assert_eq!(segmental_snr(&vec![0.0; 800], &x, 8000, 10.0).unwrap(), SEG_SNR_FLOOR_DB);
    }

    #[test]
    fn envelope_correlation_invariances() {
        let x = am_tone(8000);
        assert!((envelope_correlation(&x, &x, 8000, 20.0).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((envelope_correlation(&x, &neg, 8000, 20.0).unwrap() - 1.0).abs() < 1e-12);
        let half: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        assert!((envelope_correlation(&x, &half, 8000, 20.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(
            envelope_correlation(&[1.0; 100], &x[..100], 8000, 20.0),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn moving_average_matches_direct_window() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let env = amplitude_envelope(&x, 6);
        for t in 0..50usize {
            let lo = t.saturating_sub(2);
            let hi = (t + 4).min(50);
            let direct: f64 = x[lo..hi].iter().map(|v| v.abs()).sum::<f64>() / (hi - lo) as f64;
            assert!((env[t] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn lsd_identity_and_doubling() {
        let x = AudioSignal::new(am_tone(4000), 8000).unwrap();
        let cfg = WindowConfig::default();
        assert_eq!(log_spectral_distortion(&x, &x, &cfg).unwrap(), 0.0);
        // broadband input keeps every bin well above the δ floor
        let mut r = crate::rng::seeded(5);
        let noise = AudioSignal::new(crate::rng::normal_vec(&mut r, 4000), 8000).unwrap();
        let doubled = AudioSignal::new(noise.samples.iter().map(|v| 2.0 * v).collect(), 8000).unwrap();
        let lsd = log_spectral_distortion(&noise, &doubled, &cfg).unwrap();
        assert!((lsd - 20.0 * 2f64.log10()).abs() < 1e-3, "{lsd}");
    }

    #[test]
    fn dft_matches_direct_sum() {
        let col: Vec<f64> = (0..16).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
        let mags = dft_magnitudes(&Matrix::from_columns(16, core::slice::from_ref(&col)).unwrap());
        for k in 0..9 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in col.iter().enumerate() {
                let ang = 2.0 * PI * (k * t) as f64 / 16.0;
                re += v * ang.cos();
                im -= v * ang.sin();
            }
            assert!((mags.get(0, k) - (re * re + im * im).sqrt()).abs() < 1e-10);
        }
    }
}
