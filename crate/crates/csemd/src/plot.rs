//! Plot data as plain text: `#` header lines, then tab-separated numbers, one
//! record per line. One series per file.

use std::fmt::Write as _;
use std::path::Path;

use csemd_core::metrics::Spectrogram;

use crate::error::{read_file, write_file};
use crate::{Error, Result};

/// `index\tvalue` lines.
pub fn series_text(title: &str, values: &[f64]) -> String {
    let mut s = format!("# {title}\n# index\tvalue\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(s, "{i}\t{v}").unwrap();
    }
    s
}

/// One line per frame, one column per bin; the header row lists bin
/// frequencies in Hz.
pub fn spectrogram_text(title: &str, spec: &Spectrogram) -> String {
    let mut s = format!("# {title}\n# bin_hz");
    for f in &spec.bin_hz {
        write!(s, "\t{f}").unwrap();
    }
    s.push('\n');
    let m = &spec.magnitudes;
    for t in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|k| m.get(t, k).to_string()).collect();
        s.push_str(&row.join("\t"));
        s.push('\n');
    }
    s
}

/// Header lines (without the `# `) and numeric records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_table(text: &str) -> std::result::Result<Table, String> {
    let mut table = Table { headers: vec![], rows: vec![] };
    for (lineno, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix('#') {
            table.headers.push(h.trim_start().to_string());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let row = line
            .split('\t')
            .map(|f| f.parse::<f64>().map_err(|e| format!("line {}: {f:?}: {e}", lineno + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        table.rows.push(row);
    }
    Ok(table)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = String::from_utf8(read_file(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    parse_table(&text).map_err(|r| Error::format(path, r))
}

/// Writes `<name>.tsv` under `dir` for every signal, spectrogram and envelope.
pub fn emit_plot_data(
    signals: &[(&str, &[f64])],
    spectrograms: &[(&str, &Spectrogram)],
    envelopes: &[(&str, &[f64])],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, values) in signals.iter().chain(envelopes) {
        write_file(&dir.join(format!("{name}.tsv")), series_text(name, values).as_bytes())?;
    }
    for (name, spec) in spectrograms {
        write_file(&dir.join(format!("{name}.tsv")), spectrogram_text(name, spec).as_bytes())?;
    }
    Ok(())
}
