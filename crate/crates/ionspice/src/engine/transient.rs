//! Fixed-step implicit transient analysis.
//!
//! Each step solves the companion network of the chosen integrator with the
//! same region-assignment iteration used for DC. Diode charge is updated
//! through the continuous `q(vc)` map, so region crossings inside a step are
//! benign and need no event detection; crossings are still recorded in the
//! event log.

use super::dc::{check_circuit, dc_prepared};
use super::mna::{self, DynState, Layout, Mode};
use super::{EngineError, Integrator, RegionEvent, SignalRef, TransientResult};
use crate::fitting;
use crate::model::{self, Region};
use crate::netlist::Circuit;

/// Transient analysis request.
#[derive(Debug, Clone)]
pub struct TransientSpec {
    /// End time (s); the series covers `0..=t_end` on a fixed grid.
    pub t_end: f64,
    /// Fixed step (s). Unless `force_dt` is set, steps larger than one
    /// fifth of the smallest diode reverse time constant are rejected.
    pub dt: f64,
    pub integrator: Integrator,
    /// Start from zero stored charge instead of the `t = 0` operating point.
    pub from_rest: bool,
    pub force_dt: bool,
}

impl TransientSpec {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            integrator: Integrator::default(),
            from_rest: false,
            force_dt: false,
        }
    }
}

/// Default step for a circuit: one hundredth of the smallest diode reverse
/// time constant. `None` when the circuit has no diodes.
pub fn default_dt(circuit: &Circuit) -> Option<f64> {
    let layout = Layout::new(circuit).ok()?;
    layout.min_reverse_tau().map(|tau| tau / 100.0)
}

/// Runs a transient analysis from `t = 0` to `spec.t_end`.
pub fn transient(circuit: &Circuit, spec: &TransientSpec) -> Result<TransientResult, EngineError> {
    check_circuit(circuit)?;
    let layout = Layout::new(circuit)?;

    if !(spec.dt > 0.0) || spec.t_end < spec.dt {
        return Err(EngineError::BadTimeGrid {
            dt: spec.dt,
            t_end: spec.t_end,
        });
    }
    if let Some(tau) = layout.min_reverse_tau() {
        let limit = tau / 5.0;
        if spec.dt > limit && !spec.force_dt {
            return Err(EngineError::TimeStepRejected { dt: spec.dt, limit });
        }
    }

    let n_steps = ((spec.t_end / spec.dt) + 1e-9).floor() as usize;
    let n_diodes = layout.diodes.len();
    let n_caps = layout.capacitors.len();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut node_series = vec![Vec::with_capacity(n_steps + 1); layout.node_names.len()];
    let mut current_series = vec![Vec::with_capacity(n_steps + 1); layout.element_names.len()];
    let mut vc_series = vec![Vec::with_capacity(n_steps + 1); n_diodes];
    let mut q_series = vec![Vec::with_capacity(n_steps + 1); n_diodes];
    let mut region_events = Vec::new();

    let mut state = DynState {
        q: vec![0.0; n_diodes],
        ic_diode: vec![0.0; n_diodes],
        v_cap: vec![0.0; n_caps],
        ic_cap: vec![0.0; n_caps],
    };
    let mut regions;

    // Initial record at t = 0.
    let v0 = layout.source_values(0.0, &[])?;
    if spec.from_rest {
        // All stored charge zero; solve the instantaneous network with the
        // capacitor voltages clamped, which captures the switch-on current
        // peak exactly.
        let vc0 = vec![0.0; n_diodes];
        let vcap0 = vec![0.0; n_caps];
        let x = mna::clamped_initial_solve(&layout, &v0, &vc0, &vcap0)?;
        regions = vec![Region::Forward; n_diodes];
        times.push(0.0);
        for (idx, series) in node_series.iter_mut().enumerate() {
            series.push(x[idx]);
        }
        let currents = mna::element_currents(&layout, &x, Mode::Dc, true);
        for (series, i) in current_series.iter_mut().zip(&currents) {
            series.push(*i);
        }
        for k in 0..n_diodes {
            vc_series[k].push(0.0);
            q_series[k].push(0.0);
            // Junction capacitor current at t = 0+, as the trapezoidal
            // history term.
            state.ic_diode[k] = x[layout.n_vars + k];
        }
        for k in 0..n_caps {
            state.ic_cap[k] = x[layout.n_vars + n_diodes + k];
        }
    } else {
        let dc = dc_prepared(&layout, &[], None)?;
        regions = layout
            .diodes
            .iter()
            .map(|d| dc.diode_regions[&d.name])
            .collect();
        times.push(0.0);
        for (idx, name) in layout.node_names.iter().enumerate() {
            node_series[idx].push(dc.node_voltages[name]);
        }
        for (idx, name) in layout.element_names.iter().enumerate() {
            current_series[idx].push(dc.branch_currents[name]);
        }
        for (k, d) in layout.diodes.iter().enumerate() {
            let s = dc.diode_states[&d.name];
            vc_series[k].push(s.vc);
            q_series[k].push(s.q);
            state.q[k] = s.q;
        }
        for (k, c) in layout.capacitors.iter().enumerate() {
            let names = &layout.node_names;
            let v_of = |n: Option<usize>| n.map(|i| dc.node_voltages[&names[i]]).unwrap_or(0.0);
            state.v_cap[k] = v_of(c.n1) - v_of(c.n2);
        }
    }

    for step in 1..=n_steps {
        let t = step as f64 * spec.dt;
        let source_values = layout.source_values(t, &[])?;
        let mode = Mode::Transient {
            dt: spec.dt,
            integrator: spec.integrator,
            state: &state,
        };
        let solved =
            mna::solve_pwl(&layout, &source_values, mode, &regions).map_err(|e| {
                EngineError::StepFailed {
                    time: t,
                    source: Box::new(e),
                }
            })?;

        for (k, d) in layout.diodes.iter().enumerate() {
            if solved.regions[k] != regions[k] {
                region_events.push(RegionEvent {
                    time: t,
                    diode: d.name.clone(),
                    from: regions[k],
                    to: solved.regions[k],
                });
            }
        }

        times.push(t);
        for (idx, series) in node_series.iter_mut().enumerate() {
            series.push(solved.x[idx]);
        }
        let currents = mna::element_currents(&layout, &solved.x, mode, false);
        for (series, i) in current_series.iter_mut().zip(&currents) {
            series.push(*i);
        }

        // State updates through the continuous charge map.
        for (k, d) in layout.diodes.iter().enumerate() {
            let vc = mna::junction_voltage(&solved.x, d);
            let q_new = model::charge(&d.params, vc);
            if spec.integrator == Integrator::Trapezoidal {
                state.ic_diode[k] =
                    2.0 * (q_new - state.q[k]) / spec.dt - state.ic_diode[k];
            }
            state.q[k] = q_new;
            vc_series[k].push(vc);
            q_series[k].push(q_new);
        }
        for (k, c) in layout.capacitors.iter().enumerate() {
            let v_of = |n: Option<usize>| n.map(|i| solved.x[i]).unwrap_or(0.0);
            let v_new = v_of(c.n1) - v_of(c.n2);
            if spec.integrator == Integrator::Trapezoidal {
                state.ic_cap[k] =
                    2.0 * c.farads * (v_new - state.v_cap[k]) / spec.dt - state.ic_cap[k];
            }
            state.v_cap[k] = v_new;
        }
        regions = solved.regions;
    }

    Ok(TransientResult {
        times,
        node_names: layout.node_names.clone(),
        node_series,
        element_names: layout.element_names.clone(),
        current_series,
        diode_names: layout.diodes.iter().map(|d| d.name.clone()).collect(),
        vc_series,
        q_series,
        region_events,
    })
}

/// Fits the single time constant of a settling signal after `t_event`.
///
/// The signal is normalized to `(y - y_ss)/(y(t_event) - y_ss)` and a
/// log-linear least-squares fit is taken over the decade where the
/// normalized value lies in `[0.05, 0.9]`.
pub fn extract_time_constant(
    result: &TransientResult,
    signal: &SignalRef,
    t_event: f64,
) -> Result<f64, EngineError> {
    let series = result.signal(signal)?;
    let start = result
        .times
        .iter()
        .position(|t| *t >= t_event - 1e-12)
        .ok_or_else(|| EngineError::NotSettled("event lies beyond the series".to_string()))?;
    fitting::fit_decay(&result.times[start..], &series[start..])
        .map_err(|e| EngineError::NotSettled(e.to_string()))
}
