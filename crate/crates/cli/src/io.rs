//! CSV reading and deterministic CSV writing.

use logperiodic::fitter::TimeSeries;
use std::io::Read;

/// Seventeen significant digits, scientific notation, `.` as separator.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a header and rows with `\n` line endings.
pub fn render_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_number).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Reads a time series from CSV with a header row. Time is taken from the
/// column named `t` (or the first column), values from `column` (or the
/// second column).
pub fn read_series(mut input: impl Read, column: Option<&str>) -> Result<TimeSeries, String> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| format!("cannot read input: {e}"))?;
    if text.trim().is_empty() {
        return Err("empty input".into());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| format!("malformed CSV header: {e}"))?.clone();
    let time_idx = headers.iter().position(|h| h.trim() == "t").unwrap_or(0);
    let value_idx = match column {
        Some(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| format!("column `{name}` not found in header"))?,
        None => {
            if headers.len() < 2 {
                return Err("need at least two columns".into());
            }
            if time_idx == 0 { 1 } else { 0 }
        }
    };

    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("malformed CSV: {e}"))?;
        let cell = |idx: usize| -> Result<f64, String> {
            let raw = record
                .get(idx)
                .ok_or_else(|| format!("row {}: missing column {idx}", line + 2))?;
            raw.trim()
                .parse::<f64>()
                .map_err(|_| format!("row {}: cannot parse `{raw}` as a number", line + 2))
        };
        times.push(cell(time_idx)?);
        values.push(cell(value_idx)?);
    }
    if times.is_empty() {
        return Err("no data rows".into());
    }
    let label = headers.get(value_idx).unwrap_or_default().to_string();
    TimeSeries::new(times, values)
        .map(|s| s.with_label(label))
        .map_err(|e| e.to_string())
}

/// Reads a single-column probability vector (header row required).
pub fn read_probabilities(mut input: impl Read) -> Result<Vec<f64>, String> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| format!("cannot read input: {e}"))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("malformed CSV: {e}"))?;
        let raw = record.get(0).unwrap_or_default();
        out.push(
            raw.trim()
                .parse::<f64>()
                .map_err(|_| format!("row {}: cannot parse `{raw}` as a number", line + 2))?,
        );
    }
    if out.is_empty() {
        return Err("no data rows".into());
    }
    Ok(out)
}
