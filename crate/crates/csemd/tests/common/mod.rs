#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use csemd::config::PipelineConfig;
use csemd::wav::write_wav;
use csemd_core::framing::AudioSignal;

pub const FS: u32 = 8000;

/// Ten harmonics of a gliding 130 Hz fundamental under a 3.5 Hz syllable-rate
/// envelope, peak-normalized to 0.8.
pub fn speech_like(len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|t| {
            let s = t as f64 / FS as f64;
            let phase = 2.0 * PI * (130.0 * s - 15.0 / (2.0 * PI * 0.7) * (2.0 * PI * 0.7 * s).cos());
            let env = 0.5 + 0.45 * (2.0 * PI * 3.5 * s).sin();
            env * (1..=10).map(|h| (h as f64 * phase + 0.3 * h as f64).sin() / h as f64).sum::<f64>()
        })
        .collect();
    let peak = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    raw.iter().map(|v| 0.8 * v / peak).collect()
}

/// A 440 Hz tone under a 3 Hz amplitude modulation.
pub fn am_tone(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| {
            let s = t as f64 / FS as f64;
            0.4 * (1.0 + 0.8 * (2.0 * PI * 3.0 * s).sin()) * (2.0 * PI * 440.0 * s).sin()
        })
        .collect()
}

pub fn write_signal(path: &Path, samples: Vec<f64>) -> PathBuf {
    write_wav(path, &AudioSignal::new(samples, FS).unwrap()).unwrap();
    path.to_path_buf()
}

pub fn config_in(out: &Path) -> PipelineConfig {
    PipelineConfig { out: out.to_path_buf(), seed: 1, ..PipelineConfig::default() }
}

/// Every regular file under `dir`, as sorted (relative path, bytes) pairs.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
