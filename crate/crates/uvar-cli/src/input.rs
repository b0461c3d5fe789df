//! CSV readers for the three input layouts and the CLI error type.
//!
//! All three formats are headered, long-form CSV:
//!
//! * `label,mean,second_moment` — raw moments;
//! * `label,mean,variance` — practitioner moments, converted via
//!   `second_moment = variance + mean^2`;
//! * `label,value` — one observation per row, grouped by label.

use std::collections::HashSet;
use std::fmt;
use std::io;

use uvar::{EstimateError, ModelError, MomentEntry, SampleTable};

/// Errors surfaced to the user, split by exit code: parse and validation
/// problems are the caller's input (exit 2), invariant violations are
/// internal bugs (exit 1).
#[derive(Debug)]
pub enum CliError {
    Parse { line: Option<u64>, message: String },
    Validation { message: String },
    Invariant { message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Invariant { .. } => 1,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse {
                line: Some(line),
                message,
            } => write!(f, "line {line}: {message}"),
            CliError::Parse { line: None, message } => write!(f, "{message}"),
            CliError::Validation { message } => write!(f, "{message}"),
            CliError::Invariant { message } => write!(f, "internal error: {message}"),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(err: ModelError) -> Self {
        CliError::validation(err.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(err: EstimateError) -> Self {
        CliError::validation(err.to_string())
    }
}

/// Which third column a moments file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentColumns {
    SecondMoment,
    Variance,
}

impl MomentColumns {
    fn header(self) -> [&'static str; 3] {
        match self {
            MomentColumns::SecondMoment => ["label", "mean", "second_moment"],
            MomentColumns::Variance => ["label", "mean", "variance"],
        }
    }
}

fn record_line(record: &csv::StringRecord) -> Option<u64> {
    record.position().map(|p| p.line())
}

fn csv_error(err: csv::Error) -> CliError {
    let line = err.position().map(|position| position.line());
    CliError::Parse {
        line,
        message: match err.kind() {
            csv::ErrorKind::Utf8 { .. } => "input is not valid UTF-8".to_string(),
            _ => err.to_string(),
        },
    }
}

fn reader_for(input: impl io::Read) -> csv::Reader<impl io::Read> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<(), CliError> {
    let found: Vec<&str> = record.iter().collect();
    if found != expected {
        return Err(CliError::Parse {
            line: record_line(record),
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                found.join(",")
            ),
        });
    }
    Ok(())
}

fn parse_field(record: &csv::StringRecord, index: usize, name: &str) -> Result<f64, CliError> {
    let raw = &record[index];
    raw.parse::<f64>().map_err(|_| CliError::Parse {
        line: record_line(record),
        message: format!("cannot parse {name} `{raw}` as a number"),
    })
}

fn check_width(record: &csv::StringRecord, expected: usize) -> Result<(), CliError> {
    if record.len() != expected {
        return Err(CliError::Parse {
            line: record_line(record),
            message: format!("expected {expected} fields, found {}", record.len()),
        });
    }
    Ok(())
}

/// Reads a moments file into entries in row order. Labels must be unique;
/// the `Variance` layout converts to raw second moments.
pub fn read_moment_entries(
    input: impl io::Read,
    columns: MomentColumns,
) -> Result<Vec<MomentEntry>, CliError> {
    let mut reader = reader_for(input);
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| CliError::validation("input is empty, expected a CSV header"))?
        .map_err(csv_error)?;
    check_header(&header, &columns.header())?;

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for row in rows {
        let record = row.map_err(csv_error)?;
        check_width(&record, 3)?;
        let label = record[0].to_string();
        if !seen.insert(label.clone()) {
            return Err(CliError::Validation {
                message: format!(
                    "duplicate label `{label}` (line {})",
                    record_line(&record).unwrap_or(0)
                ),
            });
        }
        let mean = parse_field(&record, 1, "mean")?;
        let second_moment = match columns {
            MomentColumns::SecondMoment => parse_field(&record, 2, "second_moment")?,
            MomentColumns::Variance => {
                let variance = parse_field(&record, 2, "variance")?;
                variance + mean * mean
            }
        };
        let entry = MomentEntry::new(label, mean, second_moment).map_err(|err| {
            CliError::Validation {
                message: format!(
                    "{err} (line {})",
                    record_line(&record).unwrap_or(0)
                ),
            }
        })?;
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(CliError::validation("no data rows after the header"));
    }
    Ok(entries)
}

/// Reads a long-format samples file into a table grouped by label.
pub fn read_samples(input: impl io::Read) -> Result<SampleTable, CliError> {
    let mut reader = reader_for(input);
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| CliError::validation("input is empty, expected a CSV header"))?
        .map_err(csv_error)?;
    check_header(&header, &["label", "value"])?;

    let mut table = SampleTable::new();
    for row in rows {
        let record = row.map_err(csv_error)?;
        check_width(&record, 2)?;
        let value = parse_field(&record, 1, "value")?;
        table
            .push(&record[0], value)
            .map_err(|err| CliError::Validation {
                message: format!("{err} (line {})", record_line(&record).unwrap_or(0)),
            })?;
    }
    if table.is_empty() {
        return Err(CliError::validation("no data rows after the header"));
    }
    Ok(table)
}
