//! Trace CSV reading and writing.

use std::path::Path;

use euler_lab::monitor::{RegularitySample, RegularityTrace, COLUMNS};

use crate::CliError;

/// CSV text with a header row; values use the shortest round-trip form.
pub fn to_csv(trace: &RegularityTrace) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Usage(format!("csv: {e}"));
    w.write_record(COLUMNS).map_err(io)?;
    for s in &trace.samples {
        w.write_record(s.to_row().iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(format!("csv: {e}")))
}

pub fn write_csv(trace: &RegularityTrace, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, to_csv(trace)?).map_err(|e| CliError::io(path, e))
}

/// Parse trace rows; the header must match the column names exactly and
/// rows must be finite.
pub fn read_csv(path: &Path) -> Result<Vec<RegularitySample>, CliError> {
    let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_slice());
    let header = r.headers().map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))?;
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(CliError::Corrupt(format!("{}: header does not match the trace columns", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Corrupt(format!("{}:{line}: {e}", path.display())))?;
        let mut row = [0.0; 13];
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::Corrupt(format!("{}:{line}: bad number `{field}`", path.display())))?;
            if !v.is_finite() {
                return Err(CliError::Corrupt(format!("{}:{line}: non-finite value in `{}`", path.display(), COLUMNS[k])));
            }
            row[k] = v;
        }
        out.push(RegularitySample::from_row(&row));
    }
    Ok(out)
}
