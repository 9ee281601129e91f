use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::sweep::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, thiserror::Error)]
#[error("{}: {source}", .path.display())]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: EncodeError,
}

pub const CSV_HEADER: &str = "sweep_value,seed,total_power_w,min_user_power_w,feasible,outer_iters,wall_time_s";

/// CSV always carries the header, even without rows; JSON is an array of
/// objects with the same field names.
pub fn write_results<W: Write>(rows: &[ResultRow], mut out: W, format: Format) -> Result<(), EncodeError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(CSV_HEADER.split(','))?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn parse_results<R: Read>(mut input: R, format: Format) -> Result<Vec<ResultRow>, EncodeError> {
    match format {
        Format::Csv => Ok(csv::Reader::from_reader(input).deserialize().collect::<Result<_, _>>()?),
        Format::Json => {
            let mut text = String::new();
            input.read_to_string(&mut text)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

pub fn emit_results(rows: &[ResultRow], path: &Path, format: Format) -> Result<(), OutputError> {
    File::create(path)
        .map_err(EncodeError::from)
        .and_then(|file| write_results(rows, BufWriter::new(file), format))
        .map_err(|source| OutputError { path: path.to_owned(), source })
}

pub fn read_results(path: &Path, format: Format) -> Result<Vec<ResultRow>, OutputError> {
    File::open(path)
        .map_err(EncodeError::from)
        .and_then(|file| parse_results(BufReader::new(file), format))
        .map_err(|source| OutputError { path: path.to_owned(), source })
}
