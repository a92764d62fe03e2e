//! Raised-cosine interpolation, empirical mode decomposition and its ensemble
//! variant.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpConfig {
    pub target_len: usize,
    /// Raised-cosine roll-off `β ∈ [0, 1]`.
    pub rolloff: f64,
}

impl InterpConfig {
    pub fn new(target_len: usize) -> Self {
        Self { target_len, rolloff: 1.0 }
    }
}

/// Kernel half-width in source samples.
pub const KERNEL_HALF_WIDTH: f64 = 8.0;

#[inline]
fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        libm::sin(PI * t) / (PI * t)
    }
}

/// Raised-cosine interpolation kernel
/// `h(t) = sinc(t) · cos(πβt) / (1 − (2βt)²)`.
pub fn raised_cosine(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let bt = 2.0 * beta * t;
    let denom = 1.0 - bt * bt;
    if denom.abs() < 1e-9 {
        // removable singularity at |t| = 1/(2β)
        return PI / 4.0 * sinc(1.0 / (2.0 * beta));
    }
    sinc(t) * libm::cos(PI * beta * t) / denom
}

/// Whole-sample symmetric reflection of `j` into `0..len`.
fn mirror_index(mut j: isize, len: usize) -> usize {
    let last = len as isize - 1;
    if last == 0 {
        return 0;
    }
    let period = 2 * last;
    j = j.rem_euclid(period);
    if j > last {
        j = period - j;
    }
    j as usize
}

/// Resamples `y` (length `m`) to `cfg.target_len` samples.
///
/// Output sample `k` sits at source position `k·m/n`; the kernel is truncated
/// to `|t| ≤ 8` and source samples beyond either end are mirrored.
pub fn cosine_interpolate(y: &[f64], cfg: &InterpConfig) -> Result<Vec<f64>> {
    let m = y.len();
    let n = cfg.target_len;
    if m < 2 {
        return Err(Error::TooShort { needed: 2, got: m });
    }
    if n < m {
        return Err(Error::Dimension(alloc::format!(
            "interpolation target {n} is shorter than the source {m}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.rolloff) {
        return Err(Error::Config(alloc::format!("roll-off {} outside [0, 1]", cfg.rolloff)));
    }
    let ratio = m as f64 / n as f64;
    let half = KERNEL_HALF_WIDTH as isize;
    let out = (0..n)
        .map(|k| {
            let pos = k as f64 * ratio;
            let base = libm::floor(pos) as isize;
            let mut acc = 0.0;
            for j in base - half..=base + half + 1 {
                let t = pos - j as f64;
                if t.abs() <= KERNEL_HALF_WIDTH {
                    acc += y[mirror_index(j, m)] * raised_cosine(t, cfg.rolloff);
                }
            }
            acc
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extrema {
    pub maxima: Vec<Knot>,
    pub minima: Vec<Knot>,
}

impl Extrema {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Strict interior local extrema. A flat plateau bounded by lower (or higher)
/// neighbours on both sides yields one extremum at its midpoint index.
pub fn find_extrema(x: &[f64]) -> Extrema {
    let mut ext = Extrema::default();
    let len = x.len();
    if len < 3 {
        return ext;
    }
    let mut i = 1;
    while i + 1 < len {
        let prev = x[i - 1];
        if x[i] == prev {
            // plateau running in from the left edge
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < len && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 >= len {
            break;
        }
        let next = x[j + 1];
        let knot = Knot { index: (i + j) / 2, value: x[i] };
        if x[i] > prev && x[i] > next {
            ext.maxima.push(knot);
        } else if x[i] < prev && x[i] < next {
            ext.minima.push(knot);
        }
        i = j + 1;
    }
    ext
}

/// Natural cubic spline through `knots`, evaluated at `0..len`.
///
/// The two knots nearest each end are mirrored about the first and last
/// sample before fitting.
pub fn envelope(len: usize, knots: &[Knot]) -> Result<Vec<f64>> {
    if knots.is_empty() || len == 0 {
        return Err(Error::InsufficientExtrema);
    }
    let last = len as f64 - 1.0;
    let mut xs: Vec<f64> = Vec::with_capacity(knots.len() + 4);
    let mut ys: Vec<f64> = Vec::with_capacity(knots.len() + 4);
    for k in knots.iter().take(2).rev() {
        if k.index > 0 {
            xs.push(-(k.index as f64));
            ys.push(k.value);
        }
    }
    for k in knots {
        xs.push(k.index as f64);
        ys.push(k.value);
    }
    for k in knots.iter().rev().take(2) {
        let p = k.index as f64;
        if p < last {
            xs.push(2.0 * last - p);
            ys.push(k.value);
        }
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientExtrema);
    }
    Ok(natural_spline(&xs, &ys, len))
}

/// Evaluates the natural cubic spline through `(xs, ys)` at `0..len`;
/// `xs` strictly increasing.
pub fn natural_spline(xs: &[f64], ys: &[f64], len: usize) -> Vec<f64> {
    let k = xs.len();
    debug_assert!(k >= 2);
    // second derivatives, zero at both ends
    let mut m2 = vec![0.0; k];
    if k > 2 {
        let nint = k - 2;
        let mut diag = vec![0.0; nint];
        let mut upper = vec![0.0; nint];
        let mut rhs = vec![0.0; nint];
        for i in 1..k - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        // Thomas algorithm; sub-diagonal entry for row r is h_{r} = xs[r+1] - xs[r]
        for r in 1..nint {
            let sub = xs[r + 1] - xs[r];
            let w = sub / diag[r - 1];
            diag[r] -= w * upper[r - 1];
            rhs[r] -= w * rhs[r - 1];
        }
        let mut sol = vec![0.0; nint];
        sol[nint - 1] = rhs[nint - 1] / diag[nint - 1];
        for r in (0..nint - 1).rev() {
            sol[r] = (rhs[r] - upper[r] * sol[r + 1]) / diag[r];
        }
        m2[1..k - 1].copy_from_slice(&sol);
    }
    let mut out = Vec::with_capacity(len);
    let mut seg = 0;
    for t in 0..len {
        let t = t as f64;
        while seg + 2 < k && t > xs[seg + 1] {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let v = a * ys[seg]
            + b * ys[seg + 1]
            + ((a * a * a - a) * m2[seg] + (b * b * b - b) * m2[seg + 1]) * h * h / 6.0;
        out.push(v);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftConfig {
    /// Maximum number of modes `J`.
    pub max_imfs: usize,
    pub max_sift_iters: usize,
    /// Cauchy-type stopping tolerance on `Σ(h_prev − h)² / Σ h_prev²`.
    pub sd_threshold: f64,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self { max_imfs: 5, max_sift_iters: 10, sd_threshold: 0.2 }
    }
}

impl SiftConfig {
    fn validate(&self) -> Result<()> {
        if self.max_imfs == 0 {
            return Err(Error::Config("max_imfs must be at least 1".into()));
        }
        if self.max_sift_iters == 0 {
            return Err(Error::Config("max_sift_iters must be at least 1".into()));
        }
        if !(self.sd_threshold > 0.0) {
            return Err(Error::Config("sd_threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sifted {
    pub imf: Vec<f64>,
    pub remainder: Vec<f64>,
    pub iterations: usize,
}

fn has_oscillation(ext: &Extrema) -> bool {
    ext.maxima.len() >= 2 && ext.minima.len() >= 2
}

/// Extracts the finest oscillatory mode of `x`.
///
/// Returns [`Error::InsufficientExtrema`] when `x` has fewer than two maxima
/// or two minima, i.e. it is already a trend.
pub fn sift_one_imf(x: &[f64], cfg: &SiftConfig) -> Result<Sifted> {
    cfg.validate()?;
    let len = x.len();
    if len < 4 {
        return Err(Error::TooShort { needed: 4, got: len });
    }
    let mut ext = find_extrema(x);
    if !has_oscillation(&ext) {
        return Err(Error::InsufficientExtrema);
    }
    let mut h = x.to_vec();
    let mut iterations = 0;
    while iterations < cfg.max_sift_iters {
        if iterations > 0 {
            ext = find_extrema(&h);
            if !has_oscillation(&ext) {
                break;
            }
        }
        let upper = envelope(len, &ext.maxima)?;
        let lower = envelope(len, &ext.minima)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for ((hv, u), l) in h.iter_mut().zip(&upper).zip(&lower) {
            let mean = 0.5 * (u + l);
            den += *hv * *hv;
            num += mean * mean;
            *hv -= mean;
        }
        iterations += 1;
        let sd = if den > 0.0 { num / den } else { 0.0 };
        if sd < cfg.sd_threshold {
            break;
        }
    }
    let remainder = x.iter().zip(&h).map(|(a, b)| a - b).collect();
    Ok(Sifted { imf: h, remainder, iterations })
}

/// `J` mode vectors (fine to coarse) and the residual trend of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    /// Always `J` entries; levels beyond `count` are zero vectors.
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    /// Number of modes actually extracted.
    pub count: usize,
}

impl ImfSet {
    pub fn len(&self) -> usize {
        self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual.is_empty()
    }

    pub fn levels(&self) -> usize {
        self.imfs.len()
    }

    /// `Σ m_q + r`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

pub fn emd(x: &[f64], cfg: &SiftConfig) -> Result<ImfSet> {
    cfg.validate()?;
    let len = x.len();
    if len < 4 {
        return Err(Error::TooShort { needed: 4, got: len });
    }
    let mut imfs = Vec::with_capacity(cfg.max_imfs);
    let mut rem = x.to_vec();
    while imfs.len() < cfg.max_imfs {
        match sift_one_imf(&rem, cfg) {
            Ok(s) => {
                imfs.push(s.imf);
                rem = s.remainder;
            }
            Err(Error::InsufficientExtrema) => break,
            Err(e) => return Err(e),
        }
    }
    let count = imfs.len();
    imfs.resize(cfg.max_imfs, vec![0.0; len]);
    Ok(ImfSet { imfs, residual: rem, count })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EemdConfig {
    pub sift: SiftConfig,
    /// Ensemble size `N_e`.
    pub ensemble_size: usize,
    /// Noise standard deviation as a fraction of `std(x)`.
    pub noise_std_fraction: f64,
    pub seed: u64,
}

impl Default for EemdConfig {
    fn default() -> Self {
        Self { sift: SiftConfig::default(), ensemble_size: 50, noise_std_fraction: 0.2, seed: 0 }
    }
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    libm::sqrt(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Decomposition of ensemble member `member` (1-based): `x` plus white
/// Gaussian noise drawn from the stream seeded `seed ⊕ member`.
pub fn eemd_member(x: &[f64], cfg: &EemdConfig, member: usize) -> Result<ImfSet> {
    if !(cfg.noise_std_fraction >= 0.0) {
        return Err(Error::Config("noise_std_fraction must be non-negative".into()));
    }
    let sigma = cfg.noise_std_fraction * std_dev(x);
    if sigma == 0.0 {
        return emd(x, &cfg.sift);
    }
    let mut r = rng::seeded(rng::derive(cfg.seed, member as u64));
    let noisy: Vec<f64> = x.iter().map(|v| v + sigma * rng::normal(&mut r)).collect();
    emd(&noisy, &cfg.sift)
}

/// Level-wise mean of ensemble members, summed in slice order.
pub fn ensemble_mean(members: &[ImfSet]) -> Result<ImfSet> {
    let first = members.first().ok_or_else(|| Error::Empty("no ensemble members".into()))?;
    let len = first.len();
    let levels = first.levels();
    let mut imfs = vec![vec![0.0; len]; levels];
    let mut residual = vec![0.0; len];
    let mut count = 0;
    for m in members {
        if m.len() != len || m.levels() != levels {
            return Err(Error::Dimension("ensemble members differ in shape".into()));
        }
        for (acc, imf) in imfs.iter_mut().zip(&m.imfs) {
            acc.iter_mut().zip(imf).for_each(|(a, v)| *a += v);
        }
        residual.iter_mut().zip(&m.residual).for_each(|(a, v)| *a += v);
        count = count.max(m.count);
    }
    let inv = 1.0 / members.len() as f64;
    for v in imfs.iter_mut().flatten().chain(residual.iter_mut()) {
        *v *= inv;
    }
    Ok(ImfSet { imfs, residual, count })
}

/// Ensemble EMD: mean decomposition over `N_e` noise-perturbed copies.
pub fn eemd(x: &[f64], cfg: &EemdConfig) -> Result<ImfSet> {
    if cfg.ensemble_size == 0 {
        return Err(Error::Config("ensemble_size must be at least 1".into()));
    }
    let members = (1..=cfg.ensemble_size)
        .map(|e| eemd_member(x, cfg, e))
        .collect::<Result<Vec<_>>>()?;
    ensemble_mean(&members)
}

/// `Σ_{q≠p} |⟨m_q, m_p⟩| / ‖x‖²` over the nonzero modes, with
/// `x = Σ m_q + r`.
pub fn orthogonality_index(set: &ImfSet) -> Result<f64> {
    let modes: Vec<&Vec<f64>> =
        set.imfs.iter().filter(|m| m.iter().any(|&v| v != 0.0)).collect();
    if modes.len() < 2 {
        return Err(Error::Undefined("orthogonality index needs two nonzero modes".into()));
    }
    let energy = norm2(&set.reconstruct());
    if energy == 0.0 {
        return Err(Error::Undefined("orthogonality index of a zero signal".into()));
    }
    let mut total = 0.0;
    for (q, a) in modes.iter().enumerate() {
        for b in &modes[q + 1..] {
            total += 2.0 * dot(a, b).abs();
        }
    }
    Ok(total / (energy * energy))
}
