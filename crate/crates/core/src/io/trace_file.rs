use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fitting::{RawTraceSet, RingdownData};
use crate::oracle::TrajectoryRecord;
use crate::spectra::{Quantity, SpectrumTrace, Stage};

const TRACE_HEADER: [&str; 2] = ["frequency_hz", "psd_normalized"];
const RAW_HEADER: [&str; 4] = ["frequency_hz", "signal", "shot", "electronic"];
const RINGDOWN_HEADER: [&str; 2] = ["time_s", "amplitude"];

/// `# key: value` metadata lines, the header, then one row per point.
/// Floats use the shortest representation that parses back bit-exactly.
pub fn trace_to_string(trace: &SpectrumTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# quantity: {}", trace.quantity());
    let _ = writeln!(s, "# stage: {}", trace.stage());
    for (k, v) in trace.metadata() {
        let _ = writeln!(s, "# {k}: {v}");
    }
    let _ = writeln!(s, "{}", TRACE_HEADER.join(","));
    for (f, v) in trace.frequencies_hz().iter().zip(trace.values()) {
        let _ = writeln!(s, "{f:e},{v:e}");
    }
    s
}

pub fn write_trace(path: &Path, trace: &SpectrumTrace) -> Result<()> {
    Ok(fs::write(path, trace_to_string(trace))?)
}

fn parse_error(source: &str, message: impl Into<String>) -> Error {
    Error::Parse { source_name: source.to_string(), message: message.into() }
}

/// Rows of a comma-separated file with `#` comments and an exact header.
fn read_columns(text: &str, header: &[&str], source: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let found: Vec<String> = reader.headers().map_err(|e| parse_error(source, e.to_string()))?.iter().map(str::to_string).collect();
    if found != header {
        return Err(parse_error(source, format!("expected header `{}`, found `{}`", header.join(","), found.join(","))));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(source, e.to_string()))?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(source, format!("row {}: `{field}` is not a number", row + 1)))?;
            columns[c].push(v);
        }
    }
    Ok(columns)
}

pub fn read_trace_str(text: &str, source: &str) -> Result<SpectrumTrace> {
    let mut quantity = Quantity::DirectX;
    let mut stage = Stage::Detected;
    let mut meta = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let Some((k, v)) = line[1..].split_once(':') else { continue };
        let (k, v) = (k.trim(), v.trim());
        match k {
            "quantity" => quantity = v.parse().map_err(|e: Error| parse_error(source, e.to_string()))?,
            "stage" => stage = v.parse().map_err(|e: Error| parse_error(source, e.to_string()))?,
            _ => meta.push((k.to_string(), v.to_string())),
        }
    }
    let mut cols = read_columns(text, &TRACE_HEADER, source)?;
    let values = cols.pop().unwrap_or_default();
    let freqs = cols.pop().unwrap_or_default();
    let mut trace = SpectrumTrace::new(freqs, values, quantity, stage)?;
    for (k, v) in meta {
        trace.set_meta(k, v);
    }
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<SpectrumTrace> {
    read_trace_str(&fs::read_to_string(path)?, &path.display().to_string())
}

/// `frequency_hz,signal,shot,electronic` in detector units.
pub fn read_raw_traces(path: &Path) -> Result<RawTraceSet> {
    let text = fs::read_to_string(path)?;
    let mut c = read_columns(&text, &RAW_HEADER, &path.display().to_string())?;
    let electronic = c.pop().unwrap_or_default();
    let shot = c.pop().unwrap_or_default();
    let signal = c.pop().unwrap_or_default();
    let freqs = c.pop().unwrap_or_default();
    RawTraceSet::new(freqs, signal, shot, electronic)
}

/// `time_s,amplitude`.
pub fn read_ringdown(path: &Path, frequency_hz: f64) -> Result<RingdownData> {
    let text = fs::read_to_string(path)?;
    let mut c = read_columns(&text, &RINGDOWN_HEADER, &path.display().to_string())?;
    let amplitudes = c.pop().unwrap_or_default();
    let times = c.pop().unwrap_or_default();
    RingdownData::new(times, amplitudes, frequency_hz)
}

/// First `n` output samples as `time,x_out,y_out` in simulation time units.
pub fn write_trajectory(path: &Path, record: &TrajectoryRecord, n: usize) -> Result<()> {
    let mut s = format!("# seed: {}\n# dt: {:e}\ntime,x_out,y_out\n", record.seed, record.dt);
    for i in 0..n.min(record.len()) {
        let _ = writeln!(s, "{:e},{:e},{:e}", i as f64 * record.dt, record.x_out[i], record.y_out[i]);
    }
    Ok(fs::write(path, s)?)
}
