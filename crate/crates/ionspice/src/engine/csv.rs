//! CSV export of solver results.
//!
//! Layout: a header row with signal names, then one row per time point or
//! sweep value. The first column is `time` (seconds) for transients and
//! `value` (volts) for operating points and sweeps. Numbers use `.` as the
//! decimal separator and rows end with a bare LF, so identical inputs
//! produce byte-identical files.

use super::{DcSolution, EngineError, SignalRef, TransientResult};
use std::io::Write;

fn format_cell(x: f64) -> String {
    crate::netlist::format_number(x)
}

fn header(first: &str, signals: &[SignalRef]) -> String {
    let mut cols = vec![first.to_string()];
    cols.extend(signals.iter().map(|s| s.to_string()));
    cols.join(",")
}

/// Writes one DC solution as a single-row CSV (first column is the given
/// sweep value, typically the driving voltage).
pub fn write_dc_csv(
    solution: &DcSolution,
    value: f64,
    signals: &[SignalRef],
    out: &mut impl Write,
) -> Result<(), EngineError> {
    write_sweep_csv(std::slice::from_ref(solution), &[value], signals, out)
}

/// Writes a sweep: one row per solved point.
pub fn write_sweep_csv(
    solutions: &[DcSolution],
    values: &[f64],
    signals: &[SignalRef],
    out: &mut impl Write,
) -> Result<(), EngineError> {
    let mut text = header("value", signals);
    text.push('\n');
    for (solution, value) in solutions.iter().zip(values) {
        let mut row = vec![format_cell(*value)];
        for signal in signals {
            row.push(format_cell(solution.signal(signal)?));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| EngineError::InvalidCircuit(format!("csv write failed: {e}")))
}

/// Writes a transient result: one row per accepted time point.
pub fn write_transient_csv(
    result: &TransientResult,
    signals: &[SignalRef],
    out: &mut impl Write,
) -> Result<(), EngineError> {
    let series: Vec<Vec<f64>> = signals
        .iter()
        .map(|s| result.signal(s))
        .collect::<Result<_, _>>()?;
    let mut text = header("time", signals);
    text.push('\n');
    for (k, t) in result.times.iter().enumerate() {
        let mut row = vec![format_cell(*t)];
        for column in &series {
            row.push(format_cell(column[k]));
        }
        text.push_str(&row.join(","));
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| EngineError::InvalidCircuit(format!("csv write failed: {e}")))
}
