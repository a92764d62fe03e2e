//! Seeded measurement operators and the statistics that check they keep
//! energies and distances on average.
//!
//! Entries are drawn from a ChaCha8 stream seeded with `seed_from_u64(seed)`,
//! row by row (row-major order). Each family is normalized so that
//! `E[‖Φx‖²] = ‖x‖²`:
//!
//! * `Gaussian`: i.i.d. `N(0, 1/m)`.
//! * `Bernoulli`: i.i.d. `±1/√m`, equiprobable.
//! * `SparseGaussian`: zero with probability `1 − ρ`, else `N(0, 1/(ρm))`.
//! * `Srm`: `√(n/m) · S · C · Dg` with a random sign diagonal `Dg`, the
//!   orthonormal DCT-II `C`, and `S` selecting `m` distinct rows uniformly.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::framing::SignalFrameSet;
use crate::linalg::{norm2, Matrix};
use crate::rng;

pub const DEFAULT_SPARSE_DENSITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SensingFamily {
    #[default]
    Gaussian,
    Bernoulli,
    SparseGaussian,
    Srm,
}

impl SensingFamily {
    pub const ALL: [SensingFamily; 4] =
        [Self::Gaussian, Self::Bernoulli, Self::SparseGaussian, Self::Srm];

    /// Numeric tag used by the CSM1 file header.
    pub fn tag(self) -> u32 {
        match self {
            Self::Gaussian => 0,
            Self::Bernoulli => 1,
            Self::SparseGaussian => 2,
            Self::Srm => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Bernoulli => "bernoulli",
            Self::SparseGaussian => "sparse-gaussian",
            Self::Srm => "srm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let norm = name.replace('_', "-");
        Self::ALL.into_iter().find(|f| f.name() == norm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    pub entries: Matrix,
    pub family: SensingFamily,
    pub seed: u64,
}

impl SensingMatrix {
    pub fn m(&self) -> usize {
        self.entries.rows()
    }

    pub fn n(&self) -> usize {
        self.entries.cols()
    }

    /// Wraps an arbitrary operator, e.g. one read back from disk.
    pub fn from_entries(entries: Matrix, family: SensingFamily, seed: u64) -> Result<Self> {
        if entries.rows() == 0 || entries.rows() > entries.cols() {
            return Err(Error::Dimension(alloc::format!(
                "sensing matrix must satisfy 1 ≤ m ≤ n, got {}×{}",
                entries.rows(),
                entries.cols()
            )));
        }
        if !entries.is_finite() {
            return Err(Error::Config("sensing matrix has non-finite entries".into()));
        }
        Ok(Self { entries, family, seed })
    }
}

/// Compressive measurements `Y = Φ X`, one column per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub measurements: Matrix,
    /// Ambient frame length `n` the measurements were taken from.
    pub source_n: usize,
}

impl MeasurementSet {
    pub fn m(&self) -> usize {
        self.measurements.rows()
    }

    pub fn count(&self) -> usize {
        self.measurements.cols()
    }
}

pub fn build_matrix(family: SensingFamily, m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    build_matrix_with_density(family, m, n, seed, DEFAULT_SPARSE_DENSITY)
}

/// Like [`build_matrix`] with an explicit sparse-Gaussian density `ρ`.
pub fn build_matrix_with_density(
    family: SensingFamily,
    m: usize,
    n: usize,
    seed: u64,
    density: f64,
) -> Result<SensingMatrix> {
    check_dims(m, n)?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(alloc::format!("sparse density {density} outside (0, 1]")));
    }
    let dct = if family == SensingFamily::Srm { Some(dct_matrix(n)) } else { None };
    Ok(build_inner(family, m, n, seed, density, dct.as_ref()))
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::Dimension(alloc::format!("need 1 ≤ m ≤ n, got m = {m}, n = {n}")));
    }
    Ok(())
}

fn build_inner(
    family: SensingFamily,
    m: usize,
    n: usize,
    seed: u64,
    density: f64,
    dct: Option<&Matrix>,
) -> SensingMatrix {
    let mut rng = rng::seeded(seed);
    let mf = m as f64;
    let mut row_major = vec![0.0; m * n];
    match family {
        SensingFamily::Gaussian => {
            let s = 1.0 / libm::sqrt(mf);
            row_major.iter_mut().for_each(|v| *v = s * rng::normal(&mut rng));
        }
        SensingFamily::Bernoulli => {
            let s = 1.0 / libm::sqrt(mf);
            row_major.iter_mut().for_each(|v| *v = if rng.random::<bool>() { s } else { -s });
        }
        SensingFamily::SparseGaussian => {
            let s = 1.0 / libm::sqrt(density * mf);
            for v in row_major.iter_mut() {
                // draw both so the stream position does not depend on the outcome
                let keep = rng.random::<f64>() < density;
                let g = rng::normal(&mut rng);
                *v = if keep { s * g } else { 0.0 };
            }
        }
        SensingFamily::Srm => {
            let dct = dct.expect("srm needs the DCT basis");
            let signs: Vec<f64> =
                (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let mut rows = index::sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            let scale = libm::sqrt(n as f64 / mf);
            for (i, &r) in rows.iter().enumerate() {
                for j in 0..n {
                    row_major[i * n + j] = scale * dct.get(r, j) * signs[j];
                }
            }
        }
    }
    let entries = Matrix::from_row_major(m, n, &row_major).expect("sized above");
    SensingMatrix { entries, family, seed }
}

/// Orthonormal DCT-II matrix, `C[k][j] = α_k cos(π (2j + 1) k / 2n)`.
pub fn dct_matrix(n: usize) -> Matrix {
    let a0 = libm::sqrt(1.0 / n as f64);
    let ak = libm::sqrt(2.0 / n as f64);
    Matrix::from_fn(n, n, |k, j| {
        let alpha = if k == 0 { a0 } else { ak };
        alpha * libm::cos(PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64)
    })
}

/// `Y = Φ X`, column by column.
pub fn sense(phi: &SensingMatrix, frames: &SignalFrameSet) -> Result<MeasurementSet> {
    if phi.n() != frames.frame_len() {
        return Err(dim_err("frame length vs sensing matrix columns", phi.n(), frames.frame_len()));
    }
    let measurements = phi.entries.matmul(&frames.frames)?;
    Ok(MeasurementSet { measurements, source_n: phi.n() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioStats {
    pub mean: f64,
    pub std_dev: f64,
    pub trials: usize,
}

fn summarize(ratios: &[f64]) -> RatioStats {
    let t = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / t;
    let var = ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (t - 1.0).max(1.0);
    RatioStats { mean, std_dev: libm::sqrt(var), trials: ratios.len() }
}

const MIN_TRIALS: usize = 100;

fn unit_gaussian<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut x = rng::normal_vec(rng, n);
        let nx = norm2(&x);
        if nx > 1e-12 {
            x.iter_mut().for_each(|v| *v /= nx);
            return x;
        }
    }
}

/// Statistics of `‖Φ(x₁ − x₂)‖² / ‖x₁ − x₂‖²` over random unit-norm pairs,
/// with a fresh operator per trial.
///
/// Trial `t` uses the stream seeded by `seed ⊕ t` for both the pair and the
/// operator seed, so any trial can be reproduced on its own.
pub fn distance_preservation_stat(
    family: SensingFamily,
    m: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<RatioStats> {
    check_dims(m, n)?;
    if trials < MIN_TRIALS {
        return Err(Error::Config(alloc::format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let dct = (family == SensingFamily::Srm).then(|| dct_matrix(n));
    let ratios: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = rng::seeded(rng::derive(seed, t as u64));
            let diff = loop {
                let x1 = unit_gaussian(&mut rng, n);
                let x2 = unit_gaussian(&mut rng, n);
                let d: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
                if norm2(&d) >= 1e-12 {
                    break d;
                }
            };
            let phi = build_inner(family, m, n, rng.random(), DEFAULT_SPARSE_DENSITY, dct.as_ref());
            let pd = phi.entries.mul_vec(&diff).expect("dims match");
            let r = norm2(&pd) / norm2(&diff);
            r * r
        })
        .collect();
    Ok(summarize(&ratios))
}

/// Statistics of `‖Φx‖² / ‖x‖²` for a fixed `x` over fresh operators seeded
/// `seed ⊕ t`.
pub fn energy_preservation_stat(
    family: SensingFamily,
    x: &[f64],
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<RatioStats> {
    let n = x.len();
    check_dims(m, n)?;
    if trials < MIN_TRIALS {
        return Err(Error::Config(alloc::format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let nx = norm2(x);
    if nx == 0.0 {
        return Err(Error::Undefined("energy ratio of the zero vector".into()));
    }
    let dct = (family == SensingFamily::Srm).then(|| dct_matrix(n));
    let ratios: Vec<f64> = (0..trials)
        .map(|t| {
            let phi = build_inner(
                family,
                m,
                n,
                rng::derive(seed, t as u64),
                DEFAULT_SPARSE_DENSITY,
                dct.as_ref(),
            );
            let r = norm2(&phi.entries.mul_vec(x).expect("dims match")) / nx;
            r * r
        })
        .collect();
    Ok(summarize(&ratios))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framing::FrameLayout;

    #[test]
    fn same_seed_same_matrix() {
        for family in SensingFamily::ALL {
            let a = build_matrix(family, 20, 40, 7).unwrap();
            let b = build_matrix(family, 20, 40, 7).unwrap();
            let c = build_matrix(family, 20, 40, 8).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.entries, c.entries);
        }
    }

    #[test]
    fn bernoulli_support() {
        let phi = build_matrix(SensingFamily::Bernoulli, 200, 400, 3).unwrap();
        let s = 1.0 / 200f64.sqrt();
        assert!(phi.entries.as_col_major().iter().all(|&v| v == s || v == -s));
    }

    #[test]
    fn sparse_gaussian_density() {
        let phi = build_matrix(SensingFamily::SparseGaussian, 100, 400, 3).unwrap();
        let nz = phi.entries.as_col_major().iter().filter(|&&v| v != 0.0).count();
        let frac = nz as f64 / 40_000.0;
        assert!((frac - 0.25).abs() < 0.02, "{frac}");
        assert!(matches!(
            build_matrix_with_density(SensingFamily::SparseGaussian, 10, 20, 0, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(build_matrix(SensingFamily::Gaussian, 5, 4, 0), Err(Error::Dimension(_))));
        assert!(matches!(build_matrix(SensingFamily::Gaussian, 0, 4, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn srm_rows_orthogonal_before_selection() {
        let n = 64;
        let dct = dct_matrix(n);
        let gram = dct.outer_gram();
        assert!(gram.max_abs_diff(&Matrix::identity(n)) < 1e-10);
        // full sampling is an isometry
        let phi = build_matrix(SensingFamily::Srm, n, n, 11).unwrap();
        assert!(phi.entries.outer_gram().max_abs_diff(&Matrix::identity(n)) < 1e-10);
    }

    #[test]
    fn srm_full_sampling_preserves_distance_exactly() {
        let s = distance_preservation_stat(SensingFamily::Srm, 50, 50, 100, 1).unwrap();
        assert!((s.mean - 1.0).abs() < 1e-10);
        assert!(s.std_dev < 1e-10);
    }

    #[test]
    fn too_few_trials() {
        assert!(matches!(
            distance_preservation_stat(SensingFamily::Gaussian, 5, 10, 99, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sense_selection_fixture() {
        let n = 6;
        let sel = Matrix::from_fn(3, n, |i, j| if i == j { 1.0 } else { 0.0 });
        let phi = SensingMatrix::from_entries(sel, SensingFamily::Gaussian, 0).unwrap();
        let x = Matrix::from_fn(n, 2, |i, j| (i * 3 + j) as f64 - 4.0);
        let layout = FrameLayout { frame_len: n, hop: 3, sample_rate: 8000, source_len: 9 };
        let frames = SignalFrameSet::new(x.clone(), layout).unwrap();
        let y = sense(&phi, &frames).unwrap();
        for j in 0..2 {
            assert_eq!(y.measurements.col(j), &x.col(j)[..3]);
        }
        let zero = SignalFrameSet::new(Matrix::zeros(n, 2), layout).unwrap();
        assert!(sense(&phi, &zero).unwrap().measurements.as_col_major().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sense_rejects_mismatch() {
        let phi = build_matrix(SensingFamily::Gaussian, 3, 8, 0).unwrap();
        let layout = FrameLayout { frame_len: 6, hop: 3, sample_rate: 8000, source_len: 9 };
        let frames = SignalFrameSet::new(Matrix::zeros(6, 2), layout).unwrap();
        assert!(matches!(sense(&phi, &frames), Err(Error::Dimension(_))));
    }

    #[test]
    fn family_names_round_trip() {
        for f in SensingFamily::ALL {
            assert_eq!(SensingFamily::from_name(f.name()), Some(f));
            assert_eq!(SensingFamily::from_tag(f.tag()), Some(f));
        }
        assert_eq!(SensingFamily::from_name("sparse_gaussian"), Some(SensingFamily::SparseGaussian));
    }
}
