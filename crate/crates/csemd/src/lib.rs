//! Audio I/O, artifact file formats, configuration and the stage drivers
//! behind the `csemd` command line.
//!
//! Every stage reads and writes files so it can be rerun on its own:
//!
//! | stage     | reads                              | writes                         |
//! |-----------|------------------------------------|--------------------------------|
//! | `sense`   | input WAV                          | `measurements.csm` + `.toml`, `matrix.csm` |
//! | `learn`   | measurements                       | `dictionary.csd`               |
//! | `recover` | measurements, matrix, dictionary   | `recovered.wav`                |
//! | `eval`    | reference and recovered WAV        | `report.toml`, `plots/*.tsv`   |

mod error;

pub mod config;
pub mod formats;
pub mod pipeline;
pub mod plot;
pub mod wav;

pub use error::{Error, Result};
