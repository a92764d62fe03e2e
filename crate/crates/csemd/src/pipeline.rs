//! Stage drivers. Each `run_*` function reads its inputs from disk and writes
//! its artifact; the in-memory halves are exposed for tests and benchmarks.
//!
//! Seeds: `Φ` uses `seed`; frame `i` of the ensemble EMD uses
//! `seed ⊕ EEMD_STREAM ⊕ (i << 32)` (members then xor in their own index);
//! clustering uses `seed ⊕ KMEANS_STREAM`. Work is split per frame or per
//! column and collected in order, so the thread count never changes a byte.

use std::path::{Path, PathBuf};
use std::time::Instant;

use csemd_core::dictionary::{assemble_dictionary, collect_levels, ClusterSpec, Dictionary};
use csemd_core::emd::{cosine_interpolate, eemd, EemdConfig, ImfSet, InterpConfig, SiftConfig};
use csemd_core::framing::{frame_signal, overlap_add, AudioSignal};
use csemd_core::metrics::{amplitude_envelope, evaluate, spectrogram, EvalConfig, QualityReport};
use csemd_core::recovery::{compose, recover_frames, BasisPursuit, SparseCodes};
use csemd_core::sensing::{build_matrix_with_density, sense, MeasurementSet, SensingMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AtomBudget, PipelineConfig};
use crate::error::{read_file, write_file};
use crate::formats::{self, MeasurementMeta};
use crate::plot::emit_plot_data;
use crate::wav::{read_wav, write_wav};
use crate::{Error, Result};

pub const EEMD_STREAM: u64 = 0x4545_4d44_0000_0000;
pub const KMEANS_STREAM: u64 = 0x4b4d_4e53_0000_0000;

/// Wall-clock seconds per stage, in execution order.
pub type Timings = Vec<(String, f64)>;

/// Artifact locations inside an output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub measurements: PathBuf,
    pub matrix: PathBuf,
    pub dictionary: PathBuf,
    pub recovered: PathBuf,
    pub report: PathBuf,
    pub plots: PathBuf,
}

impl Paths {
    pub fn in_dir(out: &Path) -> Self {
        Self {
            measurements: out.join("measurements.csm"),
            matrix: out.join("matrix.csm"),
            dictionary: out.join("dictionary.csd"),
            recovered: out.join("recovered.wav"),
            report: out.join("report.toml"),
            plots: out.join("plots"),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn parent_dir(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f()?;
    timings.push((stage.to_string(), t.elapsed().as_secs_f64()));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Sensed {
    pub phi: SensingMatrix,
    pub y: MeasurementSet,
    pub meta: MeasurementMeta,
}

pub fn sense_signal(cfg: &PipelineConfig, signal: &AudioSignal) -> Result<Sensed> {
    if let Some(rate) = cfg.sample_rate {
        if rate != signal.sample_rate {
            return Err(Error::Config(format!("input is {} Hz, config expects {rate} Hz", signal.sample_rate)));
        }
    }
    let frames = frame_signal(signal, &cfg.window())?;
    let n = frames.frame_len();
    let m = cfg.measurements_for(n)?;
    let family = cfg.matrix.family();
    let phi = build_matrix_with_density(family, m, n, cfg.seed, cfg.sparse_density)?;
    let y = sense(&phi, &frames)?;
    let meta = MeasurementMeta {
        sample_rate: signal.sample_rate,
        source_len: frames.layout.source_len,
        n,
        hop: frames.layout.hop,
        m,
        frames: frames.count(),
        family: family.name().to_string(),
        seed: cfg.seed,
    };
    Ok(Sensed { phi, y, meta })
}

pub fn run_sense(cfg: &PipelineConfig, input: &Path, measurements: &Path, matrix: &Path) -> Result<Sensed> {
    let signal = read_wav(input)?;
    let sensed = sense_signal(cfg, &signal)?;
    parent_dir(measurements)?;
    parent_dir(matrix)?;
    formats::write_measurements(measurements, &sensed.y, &sensed.meta)?;
    formats::write_matrix(matrix, &sensed.phi)?;
    Ok(sensed)
}

fn eemd_config(cfg: &PipelineConfig, frame: usize) -> EemdConfig {
    EemdConfig {
        sift: SiftConfig { max_imfs: cfg.imfs, max_sift_iters: cfg.max_sift_iters, sd_threshold: cfg.sd_threshold },
        ensemble_size: cfg.ensemble,
        noise_std_fraction: cfg.noise_std,
        seed: cfg.seed ^ EEMD_STREAM ^ ((frame as u64) << 32),
    }
}

/// Interpolates each measurement column back to `n` samples and decomposes it.
pub fn extract_imfs(cfg: &PipelineConfig, y: &MeasurementSet) -> Result<Vec<ImfSet>> {
    let interp = InterpConfig::new(y.source_n);
    let columns: Vec<&[f64]> = y.measurements.columns().collect();
    in_pool(cfg.threads, || {
        columns
            .par_iter()
            .enumerate()
            .map(|(i, col)| {
                let x = cosine_interpolate(col, &interp)?;
                Ok(eemd(&x, &eemd_config(cfg, i))?)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Per-level atom counts after applying the budget policy.
pub fn fit_budget(cfg: &PipelineConfig, available: &[usize]) -> Result<Vec<usize>> {
    cfg.atoms
        .iter()
        .enumerate()
        .map(|(q, &k)| {
            let have = available.get(q).copied().unwrap_or(0);
            match cfg.atom_budget {
                AtomBudget::Strict if have < k => Err(Error::Config(format!(
                    "level {} has {have} IMF columns but needs {k} atoms",
                    q + 1
                ))),
                AtomBudget::Fit if have == 0 => Err(Error::Config(format!("level {} has no IMF columns", q + 1))),
                _ => Ok(k.min(have)),
            }
        })
        .collect()
}

/// Dictionary learning from the measurements alone.
pub fn learn_dictionary(cfg: &PipelineConfig, y: &MeasurementSet) -> Result<(Dictionary, Timings)> {
    let mut timings = Timings::new();
    let sets = timed(&mut timings, "eemd", || extract_imfs(cfg, y))?;
    let dict = timed(&mut timings, "cluster", || {
        let bank = collect_levels(&sets, cfg.imfs)?;
        let available: Vec<usize> = (0..cfg.imfs).map(|q| bank.columns_at(q)).collect();
        let spec = ClusterSpec {
            per_level_atoms: fit_budget(cfg, &available)?,
            max_iters: cfg.kmeans_iters,
            seed: cfg.seed ^ KMEANS_STREAM,
            ..ClusterSpec::default()
        };
        Ok(assemble_dictionary(&bank, &spec)?)
    })?;
    Ok((dict, timings))
}

pub fn run_learn(cfg: &PipelineConfig, measurements: &Path, dictionary: &Path) -> Result<(Dictionary, Timings)> {
    let (y, _) = formats::read_measurements(measurements)?;
    let (dict, timings) = learn_dictionary(cfg, &y)?;
    parent_dir(dictionary)?;
    formats::write_dictionary(dictionary, &dict)?;
    Ok((dict, timings))
}

#[derive(Debug, Clone)]
pub struct Recovered {
    pub signal: AudioSignal,
    pub codes: SparseCodes,
    pub timings: Timings,
}

pub fn recover_signal(
    cfg: &PipelineConfig,
    y: &MeasurementSet,
    meta: &MeasurementMeta,
    phi: &SensingMatrix,
    dict: &Dictionary,
) -> Result<Recovered> {
    if phi.m() != y.m() {
        return Err(Error::Config(format!("matrix has {} rows, measurements have {}", phi.m(), y.m())));
    }
    if dict.n() != meta.n {
        return Err(Error::Config(format!("atoms have length {}, frames have length {}", dict.n(), meta.n)));
    }
    let mut timings = Timings::new();
    let solver = timed(&mut timings, "compose", || {
        let eff = compose(phi, dict)?;
        Ok(BasisPursuit::new(&eff, cfg.recovery())?)
    })?;
    let codes = timed(&mut timings, "sparse-code", || {
        let columns: Vec<&[f64]> = y.measurements.columns().collect();
        let solutions = in_pool(cfg.threads, || {
            columns.par_iter().map(|c| solver.solve(c)).collect::<csemd_core::Result<Vec<_>>>()
        })??;
        Ok(SparseCodes::from_solutions(dict.d(), solutions)?)
    })?;
    let signal = timed(&mut timings, "synthesis", || {
        let frames = recover_frames(&codes.codes, dict, meta.layout())?;
        Ok(overlap_add(&frames))
    })?;
    Ok(Recovered { signal, codes, timings })
}

pub fn run_recover(
    cfg: &PipelineConfig,
    measurements: &Path,
    matrix: &Path,
    dictionary: &Path,
    recovered: &Path,
) -> Result<Recovered> {
    let (y, meta) = formats::read_measurements(measurements)?;
    let phi = formats::read_matrix(matrix, meta.seed)?;
    let dict = formats::read_dictionary(dictionary)?;
    let out = recover_signal(cfg, &y, &meta, &phi, &dict)?;
    parent_dir(recovered)?;
    write_wav(recovered, &out.signal)?;
    Ok(out)
}

/// Truncates both signals to the shorter length when they differ by at most
/// `tolerance` samples.
pub fn align(reference: &AudioSignal, estimate: &AudioSignal, tolerance: usize) -> Result<(AudioSignal, AudioSignal)> {
    if reference.sample_rate != estimate.sample_rate {
        return Err(Error::Config(format!(
            "sample rates differ: {} Hz vs {} Hz",
            reference.sample_rate, estimate.sample_rate
        )));
    }
    let (a, b) = (reference.len(), estimate.len());
    if a.abs_diff(b) > tolerance {
        return Err(Error::Config(format!("lengths {a} and {b} differ by more than one frame ({tolerance})")));
    }
    let len = a.min(b);
    let cut = |s: &AudioSignal| AudioSignal { samples: s.samples[..len].to_vec(), sample_rate: s.sample_rate };
    Ok((cut(reference), cut(estimate)))
}

/// The machine-readable part of a quality report. Runtimes are left out so
/// reports stay byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub seg_snr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_corr: Option<f64>,
    pub lsd_db: f64,
}

impl From<&QualityReport> for ReportFile {
    fn from(r: &QualityReport) -> Self {
        Self { snr_db: r.snr_db, seg_snr_db: r.seg_snr_db, envelope_corr: r.envelope_corr, lsd_db: r.lsd_db }
    }
}

impl ReportFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain numeric table")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().replace('\n', " "))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(read_file(path)?).map_err(|e| Error::format(path, e.to_string()))?;
        Self::from_toml(&text).map_err(|r| Error::format(path, r))
    }
}

pub fn evaluate_signals(cfg: &PipelineConfig, reference: &AudioSignal, estimate: &AudioSignal) -> Result<QualityReport> {
    let tolerance = cfg.window().frame_len(reference.sample_rate)?;
    let (x, y) = align(reference, estimate, tolerance)?;
    let eval = EvalConfig { spectrum: cfg.window(), ..EvalConfig::default() };
    Ok(evaluate(&x, &y, &eval)?)
}

pub fn run_eval(
    cfg: &PipelineConfig,
    reference: &Path,
    recovered: &Path,
    report: &Path,
    plots: &Path,
) -> Result<QualityReport> {
    let x = read_wav(reference)?;
    let y = read_wav(recovered)?;
    let quality = evaluate_signals(cfg, &x, &y)?;
    parent_dir(report)?;
    write_file(report, ReportFile::from(&quality).to_toml().as_bytes())?;

    let (x, y) = align(&x, &y, usize::MAX)?;
    let eval = EvalConfig::default();
    let width = ((eval.smooth_ms * x.sample_rate as f64 / 1000.0).round() as usize).max(1);
    let (ex, ey) = (amplitude_envelope(&x.samples, width), amplitude_envelope(&y.samples, width));
    let (sx, sy) = (spectrogram(&x, &cfg.window())?, spectrogram(&y, &cfg.window())?);
    emit_plot_data(
        &[("reference_waveform", &x.samples), ("recovered_waveform", &y.samples)],
        &[("reference_spectrogram", &sx), ("recovered_spectrogram", &sy)],
        &[("reference_envelope", &ex), ("recovered_envelope", &ey)],
        plots,
    )?;
    Ok(quality)
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub meta: MeasurementMeta,
    pub dictionary: Dictionary,
    pub recovered: Recovered,
    pub report: QualityReport,
    pub timings: Timings,
}

/// `sense → learn → recover → eval`, each stage reading the previous stage's
/// files from `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig, input: &Path) -> Result<PipelineRun> {
    let p = Paths::in_dir(&cfg.out);
    create_dir(&cfg.out)?;
    let mut timings = Timings::new();
    let sensed = timed(&mut timings, "sense", || run_sense(cfg, input, &p.measurements, &p.matrix))?;
    let (dictionary, learn) = run_learn(cfg, &p.measurements, &p.dictionary)?;
    timings.extend(learn);
    let recovered = run_recover(cfg, &p.measurements, &p.matrix, &p.dictionary, &p.recovered)?;
    timings.extend(recovered.timings.iter().cloned());
    let mut report = timed(&mut timings, "eval", || run_eval(cfg, input, &p.recovered, &p.report, &p.plots))?;
    report.runtime_breakdown = timings.clone();
    Ok(PipelineRun { meta: sensed.meta, dictionary, recovered, report, timings })
}
