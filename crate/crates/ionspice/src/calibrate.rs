//! Extraction of the five model parameters from measurement data.
//!
//! The pipeline mirrors how the device is characterized: the quasi-steady
//! IV sweep fixes the two total steady-state resistances (one per bias
//! sign), the switch-on current peak of a 0 -> 1 V step fixes the access
//! resistance (the junction capacitor is a short at the instant of the
//! step), and the settling time constants of the 0 -> +1 V and 0 -> -1 V
//! steps fix the two capacitances through
//! `tau = C r_p r_e / (r_p + r_e)`.

use crate::engine::{dc_sweep, transient, EngineError, Integrator, TransientSpec};
use crate::fitting;
use crate::model::DiodeParams;
use crate::netlist::{Circuit, Stimulus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("{0} data must be strictly increasing in its first column")]
    Unsorted(&'static str),
    #[error("insufficient points in the {region} region: have {have}, need {need}")]
    InsufficientPoints {
        region: &'static str,
        have: usize,
        need: usize,
    },
    #[error("event at t = {0} s lies outside the recorded trace")]
    EventOutsideRecord(f64),
    #[error("no discernible current peak after the event (peak {peak:e} A vs settled {settled:e} A, noise floor {noise:e} A)")]
    NoPeak { peak: f64, settled: f64, noise: f64 },
    #[error("no {0} step event in the dataset")]
    MissingEvent(&'static str),
    #[error("decay fit failed: {0}")]
    Fit(String),
    #[error("extracted access resistance {r_e} exceeds the total {region} resistance {rtss}")]
    NegativeJunctionResistance {
        region: &'static str,
        r_e: f64,
        rtss: f64,
    },
    #[error("calibration stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CalibrateError>,
    },
    #[error("bad csv at line {line}: {message}")]
    BadCsv { line: usize, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn at_stage(stage: &'static str) -> impl Fn(CalibrateError) -> CalibrateError {
    move |source| CalibrateError::Stage {
        stage,
        source: Box::new(source),
    }
}

/// Quasi-steady current-voltage sweep, rows of `(v_diode, i_diode)` with
/// strictly increasing voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct IvDataset {
    pub rows: Vec<(f64, f64)>,
}

impl IvDataset {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self, CalibrateError> {
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(CalibrateError::Unsorted("iv"));
        }
        Ok(Self { rows })
    }
}

/// An annotated input-voltage transition within a step-response record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub t: f64,
    pub v_before: f64,
    pub v_after: f64,
}

/// Step-response record: rows of `(t, i_diode)` with strictly increasing
/// time, plus the list of input transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDataset {
    pub rows: Vec<(f64, f64)>,
    pub events: Vec<StepEvent>,
}

impl StepDataset {
    pub fn new(rows: Vec<(f64, f64)>, events: Vec<StepEvent>) -> Result<Self, CalibrateError> {
        if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(CalibrateError::Unsorted("step"));
        }
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            for e in &events {
                if e.t < first.0 - 1e-12 || e.t > last.0 + 1e-12 {
                    return Err(CalibrateError::EventOutsideRecord(e.t));
                }
            }
        } else if !events.is_empty() {
            return Err(CalibrateError::EventOutsideRecord(events[0].t));
        }
        Ok(Self { rows, events })
    }

    /// Row range `[start, end)` belonging to an event: from the event time
    /// to the next event (or the end of the record).
    fn event_window(&self, event: &StepEvent) -> (usize, usize) {
        let start = self
            .rows
            .iter()
            .position(|(t, _)| *t >= event.t - 1e-12)
            .unwrap_or(self.rows.len());
        let end = self
            .events
            .iter()
            .filter(|e| e.t > event.t + 1e-12)
            .map(|e| {
                self.rows
                    .iter()
                    .position(|(t, _)| *t >= e.t - 1e-12)
                    .unwrap_or(self.rows.len())
            })
            .min()
            .unwrap_or(self.rows.len());
        (start, end)
    }

    fn events_matching(&self, v_before_zero: bool, positive_after: bool) -> Vec<&StepEvent> {
        self.events
            .iter()
            .filter(|e| {
                let before_ok = if v_before_zero {
                    e.v_before.abs() <= 1e-9
                } else {
                    e.v_before.abs() > 1e-9
                };
                before_ok && (e.v_after > 0.0) == positive_after && e.v_after != 0.0
            })
            .collect()
    }
}

const MIN_REGION_POINTS: usize = 3;
const SLOPE_WINDOW: usize = 3;
const PEAK_SEARCH_SAMPLES: usize = 10;

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn region_resistance(rows: &[(f64, f64)], region: &'static str) -> Result<f64, CalibrateError> {
    if rows.len() < MIN_REGION_POINTS {
        return Err(CalibrateError::InsufficientPoints {
            region,
            have: rows.len(),
            need: MIN_REGION_POINTS,
        });
    }
    // Sliding small-window slopes averaged over the region.
    let mut slopes = Vec::new();
    for window in rows.windows(SLOPE_WINDOW) {
        slopes.push(least_squares_slope(window));
    }
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    Ok(1.0 / mean_slope)
}

/// Total steady-state resistance per bias region from the IV slope,
/// returned as `(reverse, forward)`. The `v = 0` row belongs to the
/// forward window.
pub fn extract_rtss(iv: &IvDataset) -> Result<(f64, f64), CalibrateError> {
    let reverse: Vec<(f64, f64)> = iv.rows.iter().copied().filter(|(v, _)| *v < 0.0).collect();
    let forward: Vec<(f64, f64)> = iv.rows.iter().copied().filter(|(v, _)| *v >= 0.0).collect();
    Ok((
        region_resistance(&reverse, "reverse")?,
        region_resistance(&forward, "forward")?,
    ))
}

/// Access resistance from the switch-on overshoot: `R_e = dV / I_peak`
/// with the peak taken from the first samples after the event, during
/// which the junction capacitor still holds its pre-step voltage.
pub fn extract_re(step: &StepDataset, event: &StepEvent) -> Result<f64, CalibrateError> {
    let (start, end) = step.event_window(event);
    let window = &step.rows[start..end];
    if window.len() < MIN_REGION_POINTS {
        return Err(CalibrateError::InsufficientPoints {
            region: "step window",
            have: window.len(),
            need: MIN_REGION_POINTS,
        });
    }
    let peak = window
        .iter()
        .take(PEAK_SEARCH_SAMPLES)
        .map(|(_, i)| *i)
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .expect("window is non-empty");

    let tail_len = (window.len() / 20).max(1);
    let tail = &window[window.len() - tail_len..];
    let settled = tail.iter().map(|(_, i)| i).sum::<f64>() / tail.len() as f64;
    let noise = (tail
        .iter()
        .map(|(_, i)| (i - settled).powi(2))
        .sum::<f64>()
        / tail.len() as f64)
        .sqrt();

    if peak.abs() - settled.abs() <= noise.max(1e-15) {
        return Err(CalibrateError::NoPeak {
            peak,
            settled,
            noise,
        });
    }
    Ok((event.v_after - event.v_before) / peak)
}

/// Settling time constant of one step event: the trace is normalized to
/// `(i - i_ss)/(i_peak - i_ss)` and fit log-linearly over the decade where
/// the normalized value lies in `[0.05, 0.9]`.
pub fn fit_tau(step: &StepDataset, event: &StepEvent) -> Result<f64, CalibrateError> {
    let (start, end) = step.event_window(event);
    let window = &step.rows[start..end];
    if window.len() < 4 {
        return Err(CalibrateError::InsufficientPoints {
            region: "step window",
            have: window.len(),
            need: 4,
        });
    }
    let times: Vec<f64> = window.iter().map(|(t, _)| *t).collect();
    let values: Vec<f64> = window.iter().map(|(_, i)| *i).collect();

    // Anchor the fit at the post-step current extreme, not at the sample
    // just before the transition.
    let tail_len = (values.len() / 20).max(1);
    let i_ss = values[values.len() - tail_len..].iter().sum::<f64>() / tail_len as f64;
    let anchor = values
        .iter()
        .take(PEAK_SEARCH_SAMPLES)
        .enumerate()
        .max_by(|a, b| (a.1 - i_ss).abs().total_cmp(&(b.1 - i_ss).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);

    fitting::fit_decay(&times[anchor..], &values[anchor..])
        .map_err(|e| CalibrateError::Fit(e.to_string()))
}

/// Capacitances from the calibrated resistances and time constants:
/// the exact algebraic inverse of `tau = C r_p r_e / (r_p + r_e)`.
pub fn solve_capacitances(
    r_e: f64,
    r_p_fwd: f64,
    r_p_rev: f64,
    tau_fwd: f64,
    tau_rev: f64,
) -> (f64, f64) {
    let c = |tau: f64, r_p: f64| tau * (r_p + r_e) / (r_p * r_e);
    (c(tau_fwd, r_p_fwd), c(tau_rev, r_p_rev))
}

/// A time-constant estimate averaged over repeated measurements of the
/// same transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimate {
    pub mean: f64,
    /// Max minus min over the repeated events.
    pub spread: f64,
    pub count: usize,
}

fn tau_over_events(
    step: &StepDataset,
    events: &[&StepEvent],
    which: &'static str,
) -> Result<TauEstimate, CalibrateError> {
    if events.is_empty() {
        return Err(CalibrateError::MissingEvent(which));
    }
    let mut taus = Vec::with_capacity(events.len());
    for e in events {
        taus.push(fit_tau(step, e)?);
    }
    let mean = taus.iter().sum::<f64>() / taus.len() as f64;
    let spread = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - taus.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(TauEstimate {
        mean,
        spread,
        count: taus.len(),
    })
}

/// Full calibration result with the per-stage intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub params: DiodeParams,
    pub rtss_rev: f64,
    pub rtss_fwd: f64,
    pub r_e: f64,
    pub tau_fwd: TauEstimate,
    pub tau_rev: TauEstimate,
}

/// Runs the complete five-parameter calibration. Repeated measurements of
/// a transition are averaged and their spread reported.
pub fn calibrate_report(
    iv: &IvDataset,
    step: &StepDataset,
) -> Result<CalibrationReport, CalibrateError> {
    let (rtss_rev, rtss_fwd) = extract_rtss(iv).map_err(at_stage("extract_rtss"))?;

    let rising = step.events_matching(true, true);
    let first_rising = rising
        .first()
        .copied()
        .ok_or(CalibrateError::MissingEvent("0 -> positive"))
        .map_err(at_stage("extract_re"))?;
    let r_e = extract_re(step, first_rising).map_err(at_stage("extract_re"))?;

    for (rtss, region) in [(rtss_fwd, "forward"), (rtss_rev, "reverse")] {
        if rtss <= r_e {
            return Err(CalibrateError::NegativeJunctionResistance {
                region,
                r_e,
                rtss,
            });
        }
    }
    let r_p_fwd = rtss_fwd - r_e;
    let r_p_rev = rtss_rev - r_e;

    let tau_fwd =
        tau_over_events(step, &rising, "0 -> positive").map_err(at_stage("fit_tau(forward)"))?;
    let falling = step.events_matching(true, false);
    let tau_rev =
        tau_over_events(step, &falling, "0 -> negative").map_err(at_stage("fit_tau(reverse)"))?;

    let (c_p_fwd, c_p_rev) = solve_capacitances(r_e, r_p_fwd, r_p_rev, tau_fwd.mean, tau_rev.mean);
    Ok(CalibrationReport {
        params: DiodeParams {
            r_e,
            r_p_fwd,
            r_p_rev,
            c_p_fwd,
            c_p_rev,
        },
        rtss_rev,
        rtss_fwd,
        r_e,
        tau_fwd,
        tau_rev,
    })
}

/// Five calibrated parameters from an IV sweep plus a step-response record.
pub fn calibrate_full(iv: &IvDataset, step: &StepDataset) -> Result<DiodeParams, CalibrateError> {
    calibrate_report(iv, step).map(|r| r.params)
}

/// Synthetic IV sweep of a single diode with the given parameters.
pub fn synthesize_iv(
    params: &DiodeParams,
    v_min: f64,
    v_max: f64,
    points: usize,
) -> Result<IvDataset, CalibrateError> {
    let circuit = single_diode(params);
    let values: Vec<f64> = (0..points)
        .map(|k| v_min + (v_max - v_min) * k as f64 / (points - 1) as f64)
        .collect();
    let solutions = dc_sweep(&circuit, "V1", &values)?;
    IvDataset::new(
        values
            .iter()
            .zip(&solutions)
            .map(|(v, s)| (*v, s.branch_currents["D1"]))
            .collect(),
    )
}

/// Synthetic step-response record: the source steps through `segments` of
/// `(volts, duration)` starting from rest, simulated with sharp PWL ramps
/// so each transition is annotated as an event.
pub fn synthesize_step(
    params: &DiodeParams,
    segments: &[(f64, f64)],
    dt: f64,
) -> Result<StepDataset, CalibrateError> {
    assert!(!segments.is_empty());
    let ramp = dt * 1e-3;
    let mut breakpoints = vec![(0.0, segments[0].0)];
    let mut events = Vec::new();
    if segments[0].0 != 0.0 {
        events.push(StepEvent {
            t: 0.0,
            v_before: 0.0,
            v_after: segments[0].0,
        });
    }
    let mut t = 0.0;
    for window in segments.windows(2) {
        let (v_prev, duration) = window[0];
        let (v_next, _) = window[1];
        t += duration;
        breakpoints.push((t, v_prev));
        breakpoints.push((t + ramp, v_next));
        events.push(StepEvent {
            t,
            v_before: v_prev,
            v_after: v_next,
        });
    }
    let t_end = t + segments.last().unwrap().1;

    let mut circuit = single_diode(params);
    circuit
        .element_mut("V1")
        .map(|e| match &mut e.kind {
            crate::netlist::ElementKind::VSource { stimulus, .. } => {
                *stimulus = Stimulus::Pwl(breakpoints);
            }
            _ => unreachable!(),
        })
        .expect("source exists");

    let spec = TransientSpec {
        t_end,
        dt,
        integrator: Integrator::BackwardEuler,
        from_rest: true,
        force_dt: false,
    };
    let result = transient(&circuit, &spec)?;
    let current = result
        .element_current("D1")
        .expect("diode current recorded");
    StepDataset::new(
        result.times.iter().copied().zip(current.iter().copied()).collect(),
        events,
    )
}

fn single_diode(params: &DiodeParams) -> Circuit {
    let mut c = Circuit::new();
    c.add_model("m", *params);
    c.add_vsource("V1", "in", "0", Stimulus::Dc(0.0));
    c.add_diode("D1", "in", "0", "m");
    c
}

fn parse_csv_rows(text: &str, columns: usize, what: &str) -> Result<Vec<Vec<f64>>, CalibrateError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // Skip one header row if the first field is not numeric.
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if fields.len() != columns {
            return Err(CalibrateError::BadCsv {
                line: idx + 1,
                message: format!("{what}: expected {columns} columns, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(columns);
        for f in fields {
            row.push(f.parse::<f64>().map_err(|_| CalibrateError::BadCsv {
                line: idx + 1,
                message: format!("bad number `{f}`"),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads an IV CSV with columns `v,i`.
pub fn read_iv_csv(text: &str) -> Result<IvDataset, CalibrateError> {
    IvDataset::new(
        parse_csv_rows(text, 2, "iv")?
            .into_iter()
            .map(|r| (r[0], r[1]))
            .collect(),
    )
}

/// Reads a step-response CSV with columns `t,i`; events come separately.
pub fn read_step_csv(text: &str, events: Vec<StepEvent>) -> Result<StepDataset, CalibrateError> {
    StepDataset::new(
        parse_csv_rows(text, 2, "step")?
            .into_iter()
            .map(|r| (r[0], r[1]))
            .collect(),
        events,
    )
}

/// Reads an event-list CSV with columns `t_event,v_before,v_after`.
pub fn read_events_csv(text: &str) -> Result<Vec<StepEvent>, CalibrateError> {
    Ok(parse_csv_rows(text, 3, "events")?
        .into_iter()
        .map(|r| StepEvent {
            t: r[0],
            v_before: r[1],
            v_after: r[2],
        })
        .collect())
}

pub fn write_iv_csv(iv: &IvDataset) -> String {
    let mut text = String::from("v,i\n");
    for (v, i) in &iv.rows {
        text.push_str(&format!(
            "{},{}\n",
            crate::netlist::format_number(*v),
            crate::netlist::format_number(*i)
        ));
    }
    text
}

pub fn write_step_csv(step: &StepDataset) -> String {
    let mut text = String::from("t,i\n");
    for (t, i) in &step.rows {
        text.push_str(&format!(
            "{},{}\n",
            crate::netlist::format_number(*t),
            crate::netlist::format_number(*i)
        ));
    }
    text
}

pub fn write_events_csv(events: &[StepEvent]) -> String {
    let mut text = String::from("t_event,v_before,v_after\n");
    for e in events {
        text.push_str(&format!(
            "{},{},{}\n",
            crate::netlist::format_number(e.t),
            crate::netlist::format_number(e.v_before),
            crate::netlist::format_number(e.v_after)
        ));
    }
    text
}
