//! CSV output: fixed columns, 9 significant digits, LF line endings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// `%.8e` as printed by C: mantissa with 9 significant digits and a signed,
/// at least two-digit exponent.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.8e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>, CliError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| CliError::Format(format!("`{s}` is not a number")))
}

pub fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// Writes a header and rows of already formatted fields.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = |e: csv::Error| CliError::Format(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One line of a supplementary-style results table. `E` is the mean relative
/// energy error, `E^ub` the mean relative bound, `R^ub` the mean bound-to-error
/// ratio and `corr` the Pearson correlation of errors and bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub equation: String,
    pub n_train: usize,
    pub e_train: Option<f64>,
    pub e_test: Option<f64>,
    pub eub_train: Option<f64>,
    pub eub_test: Option<f64>,
    pub rub_train: Option<f64>,
    pub rub_test: Option<f64>,
    pub corr_train: Option<f64>,
    pub corr_test: Option<f64>,
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "equation",
    "n_train",
    "e_train",
    "e_test",
    "eub_train",
    "eub_test",
    "rub_train",
    "rub_test",
    "corr_train",
    "corr_test",
];

impl ReportRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.equation.clone(),
            self.n_train.to_string(),
            opt(self.e_train),
            opt(self.e_test),
            opt(self.eub_train),
            opt(self.eub_test),
            opt(self.rub_train),
            opt(self.rub_test),
            opt(self.corr_train),
            opt(self.corr_test),
        ]
    }

    fn parse(record: &csv::StringRecord) -> Result<Self, CliError> {
        if record.len() != REPORT_COLUMNS.len() {
            return Err(CliError::Format(format!("metrics row has {} fields, expected {}", record.len(), REPORT_COLUMNS.len())));
        }
        let f = |i: usize| parse_opt(&record[i]);
        Ok(Self {
            equation: record[0].to_string(),
            n_train: record[1].parse().map_err(|_| CliError::Format(format!("bad n_train `{}`", &record[1])))?,
            e_train: f(2)?,
            e_test: f(3)?,
            eub_train: f(4)?,
            eub_test: f(5)?,
            rub_train: f(6)?,
            rub_test: f(7)?,
            corr_train: f(8)?,
            corr_test: f(9)?,
        })
    }
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = rows.iter().map(ReportRow::fields).collect();
    write_rows(path, &REPORT_COLUMNS, &rows)
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    if header.iter().ne(REPORT_COLUMNS) {
        return Err(CliError::Format(format!("{}: unexpected metrics header", path.display())));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
            ReportRow::parse(&rec).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Concatenates rows and sorts them by `(equation, n_train)`, keeping input order for ties.
pub fn aggregate(mut rows: Vec<ReportRow>) -> Vec<ReportRow> {
    rows.sort_by(|a, b| a.equation.cmp(&b.equation).then(a.n_train.cmp(&b.n_train)));
    rows
}
