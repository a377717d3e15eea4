//! Circuit solving: DC operating point, DC sweeps, and fixed-step implicit
//! transient analysis.
//!
//! A solver invocation owns its workspace; independent circuits can be
//! solved concurrently from any number of threads. Identical inputs produce
//! bit-identical results on a given build.

mod csv;
mod dc;
mod mna;
mod transient;

pub use csv::{write_dc_csv, write_sweep_csv, write_transient_csv};
pub use dc::{dc_operating_point, dc_sweep};
pub use transient::{default_dt, extract_time_constant, transient, TransientSpec};

use crate::model::{DiodeState, Region};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("singular system at {variable}")]
    SingularSystem { variable: String },
    #[error("solver did not converge: {context}")]
    NonConvergence { context: String },
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("bad signal syntax `{0}` (expected v(node), v(a,b) or i(element))")]
    BadSignal(String),
    #[error(
        "time step {dt} s exceeds the stability guard {limit} s (smallest reverse time constant / 5); reduce dt or force it"
    )]
    TimeStepRejected { dt: f64, limit: f64 },
    #[error("bad time grid: need dt > 0 and t_end >= dt, got dt {dt}, t_end {t_end}")]
    BadTimeGrid { dt: f64, t_end: f64 },
    #[error("transient failed at t = {time} s: {source}")]
    StepFailed {
        time: f64,
        source: Box<EngineError>,
    },
    #[error("sweep failed at {source_name} = {value} V: {source}")]
    SweepFailed {
        source_name: String,
        value: f64,
        source: Box<EngineError>,
    },
    #[error("signal did not settle: {0}")]
    NotSettled(String),
}

/// Implicit integration scheme for transient analysis.
///
/// Backward Euler is the default: L-stable, first order, safe across region
/// switches. Trapezoidal is second order and offered for accuracy studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    BackwardEuler,
    Trapezoidal,
}

/// A named observable: a node voltage, a differential voltage, or an
/// element current. Text forms: `v(out)`, `v(a,b)`, `i(D1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignalRef {
    NodeVoltage(String),
    VoltageDiff(String, String),
    ElementCurrent(String),
}

impl SignalRef {
    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let t = text.trim();
        let lower = t.to_ascii_lowercase();
        let inner = |s: &str| -> Option<String> {
            let open = s.find('(')?;
            let close = s.rfind(')')?;
            (close == s.len() - 1 && close > open).then(|| s[open + 1..close].trim().to_string())
        };
        if lower.starts_with("v(") || lower.starts_with("v (") {
            let body = inner(t).ok_or_else(|| EngineError::BadSignal(text.to_string()))?;
            if let Some((a, b)) = body.split_once(',') {
                return Ok(SignalRef::VoltageDiff(
                    a.trim().to_string(),
                    b.trim().to_string(),
                ));
            }
            return Ok(SignalRef::NodeVoltage(body));
        }
        if lower.starts_with("i(") || lower.starts_with("i (") {
            let body = inner(t).ok_or_else(|| EngineError::BadSignal(text.to_string()))?;
            return Ok(SignalRef::ElementCurrent(body));
        }
        Err(EngineError::BadSignal(text.to_string()))
    }
}

impl fmt::Display for SignalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalRef::NodeVoltage(n) => write!(f, "v({n})"),
            SignalRef::VoltageDiff(a, b) => write!(f, "v({a},{b})"),
            SignalRef::ElementCurrent(e) => write!(f, "i({e})"),
        }
    }
}

/// Solution of one DC operating point.
#[derive(Debug, Clone)]
pub struct DcSolution {
    /// Node voltages, ground included at 0 V.
    pub node_voltages: BTreeMap<String, f64>,
    /// Element currents keyed by element name (see the current conventions
    /// in the module docs of the CSV writer).
    pub branch_currents: BTreeMap<String, f64>,
    pub diode_states: BTreeMap<String, DiodeState>,
    pub diode_regions: BTreeMap<String, Region>,
    /// Linear solves performed by the region iteration.
    pub iterations: usize,
    /// Total diode region reassignments before convergence.
    pub region_flips: usize,
    /// Largest per-node KCL imbalance of the accepted solution (A).
    pub max_kcl_residual: f64,
    pub warnings: Vec<String>,
}

impl DcSolution {
    pub fn signal(&self, signal: &SignalRef) -> Result<f64, EngineError> {
        match signal {
            SignalRef::NodeVoltage(n) => self
                .node_voltages
                .get(n)
                .copied()
                .ok_or_else(|| EngineError::UnknownSignal(signal.to_string())),
            SignalRef::VoltageDiff(a, b) => {
                let va = self.node_voltages.get(a);
                let vb = self.node_voltages.get(b);
                match (va, vb) {
                    (Some(va), Some(vb)) => Ok(va - vb),
                    _ => Err(EngineError::UnknownSignal(signal.to_string())),
                }
            }
            SignalRef::ElementCurrent(e) => self
                .branch_currents
                .get(e)
                .copied()
                .ok_or_else(|| EngineError::UnknownSignal(signal.to_string())),
        }
    }
}

/// A diode switching regions during a transient, recorded per accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEvent {
    pub time: f64,
    pub diode: String,
    pub from: Region,
    pub to: Region,
}

/// Time series produced by [`transient`].
#[derive(Debug, Clone)]
pub struct TransientResult {
    /// Monotonically increasing sample times; the first equals the start
    /// time of the analysis.
    pub times: Vec<f64>,
    node_names: Vec<String>,
    node_series: Vec<Vec<f64>>,
    element_names: Vec<String>,
    current_series: Vec<Vec<f64>>,
    diode_names: Vec<String>,
    vc_series: Vec<Vec<f64>>,
    q_series: Vec<Vec<f64>>,
    /// Diode region switches in time order.
    pub region_events: Vec<RegionEvent>,
}

impl TransientResult {
    /// Result holding a single synthetic node-voltage series, for
    /// post-processing data that did not come from the solver.
    pub fn from_node_series(times: Vec<f64>, node: impl Into<String>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        Self {
            times,
            node_names: vec![node.into()],
            node_series: vec![values],
            element_names: Vec::new(),
            current_series: Vec::new(),
            diode_names: Vec::new(),
            vc_series: Vec::new(),
            q_series: Vec::new(),
            region_events: Vec::new(),
        }
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn element_names(&self) -> &[String] {
        &self.element_names
    }

    pub fn diode_names(&self) -> &[String] {
        &self.diode_names
    }

    pub fn node_voltage(&self, node: &str) -> Option<&[f64]> {
        if node == crate::netlist::GROUND {
            return None;
        }
        let idx = self.node_names.iter().position(|n| n == node)?;
        Some(&self.node_series[idx])
    }

    pub fn element_current(&self, element: &str) -> Option<&[f64]> {
        let idx = self.element_names.iter().position(|n| n == element)?;
        Some(&self.current_series[idx])
    }

    /// Junction voltage series of a diode.
    pub fn diode_vc(&self, diode: &str) -> Option<&[f64]> {
        let idx = self.diode_names.iter().position(|n| n == diode)?;
        Some(&self.vc_series[idx])
    }

    /// Stored charge series of a diode.
    pub fn diode_charge(&self, diode: &str) -> Option<&[f64]> {
        let idx = self.diode_names.iter().position(|n| n == diode)?;
        Some(&self.q_series[idx])
    }

    /// Materializes a signal as an owned series.
    pub fn signal(&self, signal: &SignalRef) -> Result<Vec<f64>, EngineError> {
        let ground = vec![0.0; self.times.len()];
        match signal {
            SignalRef::NodeVoltage(n) => {
                if n == crate::netlist::GROUND {
                    return Ok(ground);
                }
                self.node_voltage(n)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| EngineError::UnknownSignal(signal.to_string()))
            }
            SignalRef::VoltageDiff(a, b) => {
                let grab = |name: &str| -> Result<Vec<f64>, EngineError> {
                    if name == crate::netlist::GROUND {
                        Ok(ground.clone())
                    } else {
                        self.node_voltage(name)
                            .map(<[f64]>::to_vec)
                            .ok_or_else(|| EngineError::UnknownSignal(signal.to_string()))
                    }
                };
                let va = grab(a)?;
                let vb = grab(b)?;
                Ok(va.iter().zip(&vb).map(|(x, y)| x - y).collect())
            }
            SignalRef::ElementCurrent(e) => self
                .element_current(e)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| EngineError::UnknownSignal(signal.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_parsing() {
        assert_eq!(
            SignalRef::parse("v(out)").unwrap(),
            SignalRef::NodeVoltage("out".into())
        );
        assert_eq!(
            SignalRef::parse("V(dcp, dcn)").unwrap(),
            SignalRef::VoltageDiff("dcp".into(), "dcn".into())
        );
        assert_eq!(
            SignalRef::parse("i(D1)").unwrap(),
            SignalRef::ElementCurrent("D1".into())
        );
        assert!(SignalRef::parse("w(x)").is_err());
        assert!(SignalRef::parse("v out").is_err());
        assert_eq!(SignalRef::parse("v(a,b)").unwrap().to_string(), "v(a,b)");
    }
}
