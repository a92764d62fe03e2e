use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csemd::config::{Overrides, PipelineConfig};
use csemd::pipeline::{self, Paths, ReportFile, Timings};

/// Learn a dictionary from compressive samples with ensemble EMD and recover
/// the signal by l1 sparse coding.
#[derive(Parser)]
#[command(name = "csemd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame and sense a WAV file
    Sense {
        input: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Learn a dictionary from measurements (never reads the sensing matrix)
    Learn {
        /// Defaults to <out>/measurements.csm
        measurements: Option<PathBuf>,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Sparse-code the measurements and write the recovered WAV
    Recover {
        measurements: Option<PathBuf>,
        #[arg(value_name = "MATRIX_FILE")]
        matrix_file: Option<PathBuf>,
        dictionary: Option<PathBuf>,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Compare a recovered WAV with its reference
    Eval {
        reference: PathBuf,
        recovered: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Run sense, learn, recover and eval in sequence
    Pipeline {
        input: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
}

fn print_timings(timings: &Timings) {
    for (stage, secs) in timings {
        println!("runtime {stage}: {secs:.3} s");
    }
}

fn print_report(report: &ReportFile) {
    print!("{}", report.to_toml());
}

fn run(command: Command) -> csemd::Result<()> {
    match command {
        Command::Sense { input, flags } => {
            let cfg = PipelineConfig::resolve(&flags)?;
            let p = Paths::in_dir(&cfg.out);
            let s = pipeline::run_sense(&cfg, &input, &p.measurements, &p.matrix)?;
            println!("m = {}, n = {}, L = {}", s.meta.m, s.meta.n, s.meta.frames);
        }
        Command::Learn { measurements, flags } => {
            let cfg = PipelineConfig::resolve(&flags)?;
            let p = Paths::in_dir(&cfg.out);
            let (dict, timings) = pipeline::run_learn(&cfg, &measurements.unwrap_or(p.measurements), &p.dictionary)?;
            println!("d = {}, n = {}, atoms per level = {:?}", dict.d(), dict.n(), dict.level_counts());
            print_timings(&timings);
        }
        Command::Recover { measurements, matrix_file, dictionary, flags } => {
            let cfg = PipelineConfig::resolve(&flags)?;
            let p = Paths::in_dir(&cfg.out);
            let r = pipeline::run_recover(
                &cfg,
                &measurements.unwrap_or(p.measurements),
                &matrix_file.unwrap_or(p.matrix),
                &dictionary.unwrap_or(p.dictionary),
                &p.recovered,
            )?;
            println!("frames = {}, not converged = {}", r.codes.converged.len(), r.codes.non_converged());
            print_timings(&r.timings);
        }
        Command::Eval { reference, recovered, flags } => {
            let cfg = PipelineConfig::resolve(&flags)?;
            let p = Paths::in_dir(&cfg.out);
            let q = pipeline::run_eval(&cfg, &reference, &recovered, &p.report, &p.plots)?;
            print_report(&ReportFile::from(&q));
        }
        Command::Pipeline { input, flags } => {
            let cfg = PipelineConfig::resolve(&flags)?;
            let run = pipeline::run_pipeline(&cfg, &input)?;
            let m = &run.meta;
            println!("m = {}, n = {}, L = {}, d = {}", m.m, m.n, m.frames, run.dictionary.d());
            println!("not converged = {}", run.recovered.codes.non_converged());
            print_timings(&run.timings);
            print_report(&ReportFile::from(&run.report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("error: bad arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
