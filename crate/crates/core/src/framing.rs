//! Analysis framing and overlap-add synthesis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A mono signal with amplitudes nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("samples must be finite".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    /// Periodic Hann, `w[k] = 0.5 (1 − cos(2πk/n))`.
    #[default]
    Hann,
}

impl WindowKind {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - libm::cos(2.0 * PI * k as f64 / n as f64)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub frame_len_ms: f64,
    pub overlap_fraction: f64,
    pub window: WindowKind,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { frame_len_ms: 50.0, overlap_fraction: 0.5, window: WindowKind::Hann }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_len_ms > 0.0) || !self.frame_len_ms.is_finite() {
            return Err(Error::Config("frame length must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config("overlap fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Frame length `n = round(frame_len_ms · rate / 1000)`.
    pub fn frame_len(&self, sample_rate: u32) -> Result<usize> {
        self.validate()?;
        let n = libm::round(self.frame_len_ms * sample_rate as f64 / 1000.0) as usize;
        if n < 2 {
            return Err(Error::Config(alloc::format!("frame length {n} samples is below 2")));
        }
        Ok(n)
    }

    pub fn hop(&self, sample_rate: u32) -> Result<usize> {
        let n = self.frame_len(sample_rate)?;
        Ok(hop_for(n, self.overlap_fraction))
    }
}

fn hop_for(n: usize, overlap: f64) -> usize {
    (libm::round(n as f64 * (1.0 - overlap)) as usize).max(1)
}

/// Frame count for a signal of `len ≥ n` samples: full frames plus one
/// zero-padded trailing frame when the hops do not land on the end.
pub fn frame_count(len: usize, n: usize, hop: usize) -> usize {
    debug_assert!(len >= n && hop >= 1);
    let full = (len - n) / hop + 1;
    if !(len - n).is_multiple_of(hop) {
        full + 1
    } else {
        full
    }
}

/// Where each frame sits in the time line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
    /// Length of the signal the frames were cut from; synthesis truncates to it.
    pub source_len: usize,
}

/// Windowed frames as the columns of an `n × L` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalFrameSet {
    pub frames: Matrix,
    pub layout: FrameLayout,
}

impl SignalFrameSet {
    pub fn new(frames: Matrix, layout: FrameLayout) -> Result<Self> {
        if frames.rows() != layout.frame_len {
            return Err(crate::error::dim_err("frame length", layout.frame_len, frames.rows()));
        }
        if frames.cols() == 0 {
            return Err(Error::Empty("frame set has no frames".into()));
        }
        Ok(Self { frames, layout })
    }

    pub fn frame_len(&self) -> usize {
        self.layout.frame_len
    }

    pub fn count(&self) -> usize {
        self.frames.cols()
    }
}

pub fn frame_signal(signal: &AudioSignal, cfg: &WindowConfig) -> Result<SignalFrameSet> {
    let n = cfg.frame_len(signal.sample_rate)?;
    let hop = hop_for(n, cfg.overlap_fraction);
    let len = signal.len();
    if len < n {
        return Err(Error::TooShort { needed: n, got: len });
    }
    let count = frame_count(len, n, hop);
    let window = cfg.window.coefficients(n);
    let frames = Matrix::from_fn(n, count, |k, i| {
        let t = i * hop + k;
        if t < len {
            signal.samples[t] * window[k]
        } else {
            0.0
        }
    });
    Ok(SignalFrameSet {
        frames,
        layout: FrameLayout { frame_len: n, hop, sample_rate: signal.sample_rate, source_len: len },
    })
}

/// Sums the frames at their hop offsets and truncates to the source length.
///
/// No synthesis window is applied; with the periodic Hann window at 50 %
/// overlap the analysis windows already sum to one away from the edges.
pub fn overlap_add(frames: &SignalFrameSet) -> AudioSignal {
    let FrameLayout { frame_len: n, hop, sample_rate, source_len } = frames.layout;
    let total = (frames.count() - 1) * hop + n;
    let mut out = vec![0.0; total.max(source_len)];
    for (i, col) in frames.frames.columns().enumerate() {
        for (o, v) in out[i * hop..i * hop + n].iter_mut().zip(col) {
            *o += v;
        }
    }
    out.truncate(source_len);
    AudioSignal { samples: out, sample_rate }
}
