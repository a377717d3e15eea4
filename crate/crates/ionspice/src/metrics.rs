//! Circuit quality figures: logic margins, settle time, average power, the
//! chain-length-vs-rectification-ratio study, and the bridge
//! frequency-vs-capacitance study.

use crate::circuits::{self, ChainDrive, CircuitGenError, GateTopology};
use crate::engine::{
    dc_operating_point, transient, EngineError, SignalRef, TransientResult, TransientSpec,
};
use crate::exec::{run_indexed, Executor};
use crate::model::{self, DiodeParams, Region};
use crate::netlist::{Circuit, ElementKind, Stimulus};
use crate::stochastic::{
    monte_carlo, McAnalysis, McConfig, StochasticError, SuccessRule, VariationEntry, VariationSpec,
};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("selected output `{0}` is not present")]
    SelectedMissing(String),
    #[error("need at least 2 outputs, got {0}")]
    TooFewOutputs(usize),
    #[error("window [{t0}, {t1}] is empty or outside the series")]
    BadWindow { t0: f64, t1: f64 },
    #[error("signal never settles inside the band before the series ends")]
    NeverSettles,
    #[error("rectification ratio {rr} is not achievable by varying {vary:?} of the base parameters")]
    InfeasibleRr { rr: f64, vary: VaryParam },
    #[error("rectification criterion was never met down to {f_hz} Hz at multiplier {multiplier}")]
    CriterionNeverMet { multiplier: f64, f_hz: f64 },
    #[error("invalid study spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Generator(#[from] CircuitGenError),
}

/// Voltage gap between the selected output and the highest non-selected one.
/// Invariant under adding a common offset to all outputs.
pub fn high_low_margin(
    outputs: &BTreeMap<String, f64>,
    selected: &str,
) -> Result<f64, MetricsError> {
    if outputs.len() < 2 {
        return Err(MetricsError::TooFewOutputs(outputs.len()));
    }
    let high = outputs
        .get(selected)
        .ok_or_else(|| MetricsError::SelectedMissing(selected.to_string()))?;
    let best_low = outputs
        .iter()
        .filter(|(name, _)| name.as_str() != selected)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(high - best_low)
}

/// First time after `t_event` from which the signal stays within
/// `band * |v_final - v(t_event)|` of its final value. The final value is
/// the mean of the last 5% of the window, which must itself be quiet.
pub fn settle_time(
    result: &TransientResult,
    signal: &SignalRef,
    t_event: f64,
    band: f64,
) -> Result<f64, MetricsError> {
    let series = result.signal(signal)?;
    let start = result
        .times
        .iter()
        .position(|t| *t >= t_event - 1e-12)
        .ok_or(MetricsError::NeverSettles)?;
    let times = &result.times[start..];
    let values = &series[start..];
    if values.len() < 2 {
        return Err(MetricsError::NeverSettles);
    }

    let span = times[times.len() - 1] - times[0];
    let tail_start = times
        .iter()
        .position(|t| *t >= times[0] + 0.95 * span)
        .unwrap_or(times.len() - 1);
    let tail = &values[tail_start..];
    let v_final = tail.iter().sum::<f64>() / tail.len() as f64;
    let band_abs = band * (v_final - values[0]).abs();

    // The quiet-tail requirement is what rejects signals that oscillate
    // through the end of the window.
    if tail.iter().any(|v| (v - v_final).abs() > band_abs) {
        return Err(MetricsError::NeverSettles);
    }

    let mut settle_idx = 0;
    for (k, v) in values.iter().enumerate() {
        if (v - v_final).abs() > band_abs {
            settle_idx = k + 1;
        }
    }
    if settle_idx >= values.len() {
        return Err(MetricsError::NeverSettles);
    }
    Ok(times[settle_idx] - t_event)
}

fn trapezoid_mean(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Option<f64> {
    if !(t1 > t0) || t0 < times[0] - 1e-12 || t1 > times[times.len() - 1] + 1e-12 {
        return None;
    }
    let sample = |t: f64| -> f64 {
        match times.iter().position(|x| *x >= t) {
            Some(0) => values[0],
            Some(i) => {
                let f = (t - times[i - 1]) / (times[i] - times[i - 1]);
                values[i - 1] + (values[i] - values[i - 1]) * f
            }
            None => values[values.len() - 1],
        }
    };
    let mut integral = 0.0;
    let mut prev_t = t0;
    let mut prev_v = sample(t0);
    for (t, v) in times.iter().zip(values) {
        if *t <= t0 {
            continue;
        }
        if *t >= t1 {
            break;
        }
        integral += 0.5 * (prev_v + v) * (t - prev_t);
        prev_t = *t;
        prev_v = *v;
    }
    let v_end = sample(t1);
    integral += 0.5 * (prev_v + v_end) * (t1 - prev_t);
    Some(integral / (t1 - t0))
}

/// Time-weighted mean of the power delivered by all sources over the
/// window. Source branch currents flow into the positive terminal, so
/// delivered power is `-v * i`; energy returned to a source counts
/// negative.
pub fn average_power(
    circuit: &Circuit,
    result: &TransientResult,
    window: (f64, f64),
) -> Result<f64, MetricsError> {
    let (t0, t1) = window;
    let mut total = vec![0.0; result.times.len()];
    for element in &circuit.elements {
        if let ElementKind::VSource { np, nn, .. } = &element.kind {
            let v = result.signal(&SignalRef::VoltageDiff(np.clone(), nn.clone()))?;
            let i = result.signal(&SignalRef::ElementCurrent(element.name.clone()))?;
            for (k, (v, i)) in v.iter().zip(&i).enumerate() {
                total[k] -= v * i;
            }
        }
    }
    trapezoid_mean(&result.times, &total, t0, t1).ok_or(MetricsError::BadWindow { t0, t1 })
}

/// One-sided Clopper-Pearson lower confidence bound on a binomial success
/// probability: the exact bound `L` with `P(X >= k | L) = 1 - level`,
/// i.e. the `alpha` quantile of `Beta(k, n - k + 1)`.
pub fn binomial_lower_bound(successes: usize, trials: usize, level: f64) -> f64 {
    assert!(successes <= trials && trials > 0);
    assert!(level > 0.0 && level < 1.0);
    if successes == 0 {
        return 0.0;
    }
    let alpha = 1.0 - level;
    let beta = Beta::new(successes as f64, (trials - successes + 1) as f64)
        .expect("valid beta parameters");
    // Bisect the (monotone) CDF; the library's generic inverse is too
    // coarse for sub-percent certification thresholds.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Which diode parameter is scaled to reach a target rectification ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaryParam {
    RpRev,
    RpFwd,
    Re,
}

/// Parameter set whose rectification ratio equals `rr`, produced by
/// adjusting exactly the `vary` parameter of `base`.
pub fn params_for_rr(
    base: &DiodeParams,
    vary: VaryParam,
    rr: f64,
) -> Result<DiodeParams, MetricsError> {
    let infeasible = || MetricsError::InfeasibleRr { rr, vary };
    if !(rr > 1.0) || !rr.is_finite() {
        return Err(infeasible());
    }
    let mut p = *base;
    match vary {
        VaryParam::RpRev => {
            p.r_p_rev = rr * (base.r_e + base.r_p_fwd) - base.r_e;
            if p.r_p_rev <= 0.0 {
                return Err(infeasible());
            }
        }
        VaryParam::RpFwd => {
            p.r_p_fwd = (base.r_e + base.r_p_rev) / rr - base.r_e;
            if p.r_p_fwd <= 0.0 {
                return Err(infeasible());
            }
        }
        VaryParam::Re => {
            p.r_e = (base.r_p_rev - rr * base.r_p_fwd) / (rr - 1.0);
            if p.r_e <= 0.0 {
                return Err(infeasible());
            }
        }
    }
    Ok(p)
}

fn default_threshold() -> f64 {
    0.5
}
fn default_confidence() -> f64 {
    0.99
}
fn default_cert_confidence() -> f64 {
    0.5
}
fn default_max_n() -> usize {
    34
}

/// Chain-length study request.
///
/// For every grid point, the rectification ratio is reached by scaling the
/// `vary` parameter; the medians of `variation` are recentered onto the
/// scaled nominal values (only its sigmas, seed, and run count are used),
/// so all grid points reuse identical normal deviates and differ purely in
/// the nominal they spread around.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainStudySpec {
    pub rr_values: Vec<f64>,
    pub vary: VaryParam,
    pub variation: VariationSpec,
    /// Logic threshold for the last gate's output (V).
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Required success probability.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Confidence level of the exact binomial lower bound used to certify
    /// the success probability. The 0.5 default is the median-unbiased
    /// bound; at 200 runs it certifies 99% from 199 passing runs.
    #[serde(default = "default_cert_confidence")]
    pub cert_confidence: f64,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
}

impl ChainStudySpec {
    pub fn new(rr_values: Vec<f64>, sigma_log: f64, seed: u64, n_runs: usize) -> Self {
        Self {
            rr_values,
            vary: VaryParam::RpRev,
            variation: VariationSpec::around_nominal(
                &DiodeParams::default(),
                sigma_log,
                sigma_log,
                seed,
                n_runs,
            ),
            threshold: default_threshold(),
            confidence: default_confidence(),
            cert_confidence: default_cert_confidence(),
            max_n: default_max_n(),
        }
    }

    fn validate(&self, topo: &GateTopology) -> Result<(), MetricsError> {
        if !(self.threshold > topo.supply_low && self.threshold < topo.supply_high) {
            return Err(MetricsError::InvalidSpec(format!(
                "threshold {} outside the supply range ({}, {})",
                self.threshold, topo.supply_low, topo.supply_high
            )));
        }
        for level in [self.confidence, self.cert_confidence] {
            if !(level > 0.0 && level < 1.0) {
                return Err(MetricsError::InvalidSpec(format!(
                    "confidence levels must lie in (0, 1), got {level}"
                )));
            }
        }
        if self.max_n == 0 || self.rr_values.is_empty() {
            return Err(MetricsError::InvalidSpec(
                "need max_n >= 1 and a non-empty rr grid".into(),
            ));
        }
        Ok(())
    }

    /// Variation spec recentered on a scaled nominal.
    fn recentered(&self, nominal: &DiodeParams) -> VariationSpec {
        let entries = self
            .variation
            .entries
            .iter()
            .map(|e| {
                let median = match e.parameter {
                    crate::stochastic::VariedParam::RpFwd => nominal.r_p_fwd,
                    crate::stochastic::VariedParam::RpRev => nominal.r_p_rev,
                };
                VariationEntry::around(e.parameter, median, e.sigma_log)
            })
            .collect();
        VariationSpec {
            entries,
            seed: self.variation.seed,
            n_runs: self.variation.n_runs,
        }
    }
}

/// Longest chain whose last-gate output exceeds the threshold with the
/// required certified probability, per rectification ratio. Returns
/// `(rr, longest passing n)` pairs in grid order; a grid point where even a
/// single gate fails reports 0.
///
/// Chain lengths are scanned upward and the scan stops at the first failing
/// length: with per-run substreams the first `3n` draws of a longer chain
/// coincide with the shorter chain's, and appending a stage only loads the
/// previous output, so per run the last-gate voltage decreases with `n`.
pub fn max_chain_length(
    spec: &ChainStudySpec,
    base: &DiodeParams,
    topo: &GateTopology,
    executor: Executor,
) -> Result<Vec<(f64, usize)>, MetricsError> {
    spec.validate(topo)?;
    let mut results = Vec::with_capacity(spec.rr_values.len());
    for &rr in &spec.rr_values {
        let params = params_for_rr(base, spec.vary, rr)?;
        let variation = spec.recentered(&params);
        let mut longest = 0usize;
        for n in 1..=spec.max_n {
            let (mut template, ports) = circuits::chain(n, topo, ChainDrive::TieSecondInputLow, &params)?;
            circuits::drive_port(&mut template, "Vin", "in", topo.supply_high);
            let out = ports.node("out").expect("chain has an output").to_string();
            let config = McConfig {
                analysis: McAnalysis::Dc { overrides: vec![] },
                observe: vec![SignalRef::NodeVoltage(out)],
                executor,
                success: Some(SuccessRule {
                    signal: 0,
                    threshold: spec.threshold,
                }),
            };
            let ensemble = monte_carlo(&template, &variation, &config)?;
            let successes = ensemble.success_count.unwrap_or(0);
            // A zero-sigma ensemble is a point mass: its success probability
            // is exactly the observed 0 or 1, no interval needed.
            let degenerate = variation.entries.iter().all(|e| e.sigma_log == 0.0);
            let bound = if degenerate {
                if successes == variation.n_runs {
                    1.0
                } else {
                    0.0
                }
            } else {
                binomial_lower_bound(successes, variation.n_runs, spec.cert_confidence)
            };
            if bound >= spec.confidence {
                longest = n;
            } else {
                break;
            }
        }
        results.push((rr, longest));
    }
    Ok(results)
}

/// One row of the tidy chain-study export.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStudyRow {
    pub rr: f64,
    /// 1.0 for the requested variation, 0.1 for the tenfold-reduced curve.
    pub sigma_scale: f64,
    pub max_chain_length: usize,
}

/// Runs the chain study for the requested variation and for sigma reduced
/// tenfold, as two curves over the same grid and seeds.
pub fn chain_study(
    spec: &ChainStudySpec,
    base: &DiodeParams,
    topo: &GateTopology,
    executor: Executor,
) -> Result<Vec<ChainStudyRow>, MetricsError> {
    let mut rows = Vec::new();
    for sigma_scale in [1.0, 0.1] {
        let scaled = ChainStudySpec {
            variation: spec.variation.scaled_sigma(sigma_scale),
            ..spec.clone()
        };
        for (rr, n) in max_chain_length(&scaled, base, topo, executor)? {
            rows.push(ChainStudyRow {
                rr,
                sigma_scale,
                max_chain_length: n,
            });
        }
    }
    Ok(rows)
}

pub fn write_chain_study_csv(
    rows: &[ChainStudyRow],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let mut text = String::from("rr,sigma_scale,max_chain_length\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{}\n",
            crate::netlist::format_number(row.rr),
            crate::netlist::format_number(row.sigma_scale),
            row.max_chain_length
        ));
    }
    out.write_all(text.as_bytes())
}

pub fn chain_study_plot(csv_name: &str) -> crate::plot::PlotSpec {
    crate::plot::PlotSpec::new(
        "Maximum operational chain length vs rectification ratio",
        "rectification ratio",
        "max chain length",
    )
    .with_log_x()
    .grouped_curve(csv_name, "rr", "max_chain_length", "sigma_scale")
}

fn default_amplitude() -> f64 {
    1.0
}
fn default_load() -> f64 {
    1e6
}
fn default_eta() -> f64 {
    0.5
}
fn default_rel_tol() -> f64 {
    0.05
}
fn default_periods() -> usize {
    3
}

/// Bridge frequency study request. For each multiplier both junction
/// capacitances are scaled and the largest sinusoid frequency is found at
/// which the mean rectified load voltage retains `eta_threshold` of its
/// quasi-static value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyStudySpec {
    pub cp_multipliers: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "default_load")]
    pub load_ohms: f64,
    #[serde(default = "default_eta")]
    pub eta_threshold: f64,
    /// Relative bisection tolerance on the returned frequency.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Periods simulated before the measured (final) period.
    #[serde(default = "default_periods")]
    pub periods: usize,
}

impl FrequencyStudySpec {
    pub fn new(cp_multipliers: Vec<f64>) -> Self {
        Self {
            cp_multipliers,
            amplitude: default_amplitude(),
            offset: 0.0,
            load_ohms: default_load(),
            eta_threshold: default_eta(),
            rel_tol: default_rel_tol(),
            periods: default_periods(),
        }
    }

    fn validate(&self) -> Result<(), MetricsError> {
        if self.cp_multipliers.iter().any(|m| !(*m > 0.0)) {
            return Err(MetricsError::InvalidSpec(
                "capacitance multipliers must be positive".into(),
            ));
        }
        if !(self.load_ohms > 0.0) || !(self.amplitude != 0.0) {
            return Err(MetricsError::InvalidSpec(
                "need a positive load and a non-zero amplitude".into(),
            ));
        }
        if !(self.eta_threshold > 0.0 && self.eta_threshold < 1.0)
            || !(self.rel_tol > 0.0)
            || self.periods == 0
        {
            return Err(MetricsError::InvalidSpec(
                "eta threshold in (0,1), rel_tol > 0, periods >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn scaled_caps(base: &DiodeParams, multiplier: f64) -> DiodeParams {
    DiodeParams {
        c_p_fwd: base.c_p_fwd * multiplier,
        c_p_rev: base.c_p_rev * multiplier,
        ..*base
    }
}

/// Mean load voltage of the bridge in the quasi-static (memoryless) limit:
/// the phase average of the DC response to the instantaneous input value.
/// Independent of the capacitances.
pub fn bridge_quasistatic_mean(
    spec: &FrequencyStudySpec,
    params: &DiodeParams,
) -> Result<f64, MetricsError> {
    let (circuit, _) = circuits::diode_bridge(spec.load_ohms, None, params)?;
    let phases = 64;
    let mut sum = 0.0;
    for k in 0..phases {
        let v = spec.offset
            + spec.amplitude * (2.0 * std::f64::consts::PI * k as f64 / phases as f64).sin();
        let mut driven = circuit.clone();
        circuits::drive_port(&mut driven, "Vac", "ac", v);
        let sol = dc_operating_point(&driven, &[])?;
        sum += sol.node_voltages["dcp"] - sol.node_voltages["dcn"];
    }
    Ok(sum / phases as f64)
}

/// Mean load voltage over the final simulated period of a sinusoid drive.
pub fn bridge_mean_at(
    spec: &FrequencyStudySpec,
    params: &DiodeParams,
    frequency_hz: f64,
) -> Result<f64, MetricsError> {
    let (mut circuit, _) = circuits::diode_bridge(spec.load_ohms, None, params)?;
    circuit.add_vsource(
        "Vac",
        "ac",
        "0",
        Stimulus::Sin {
            offset: spec.offset,
            amplitude: spec.amplitude,
            frequency_hz,
            phase_rad: 0.0,
        },
    );
    let period = 1.0 / frequency_hz;
    // A period-resolved grid is what the mean needs: backward Euler is
    // L-stable, so a reverse time constant far below the period may be
    // under-resolved safely, and tying dt to the period keeps results
    // exactly scale-invariant in the capacitance multiplier.
    let dt = period / 1000.0;
    let t_end = spec.periods as f64 * period;
    let tr = transient(
        &circuit,
        &TransientSpec {
            t_end,
            dt,
            integrator: Default::default(),
            from_rest: true,
            force_dt: true,
        },
    )?;
    let load = tr.signal(&SignalRef::VoltageDiff("dcp".into(), "dcn".into()))?;
    let t1 = *tr.times.last().expect("non-empty series");
    trapezoid_mean(&tr.times, &load, t1 - period, t1).ok_or(MetricsError::BadWindow {
        t0: t1 - period,
        t1,
    })
}

/// Largest operating frequency per capacitance multiplier: binary search of
/// the rectification efficiency `eta(f) = mean(V_load at f) / mean(V_load
/// quasi-static)` against the threshold. Frequencies are derived from the
/// scaled forward time constant, so results scale exactly with the
/// multiplier.
pub fn max_frequency(
    spec: &FrequencyStudySpec,
    base: &DiodeParams,
    executor: Executor,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    spec.validate()?;
    let outcomes = run_indexed(spec.cp_multipliers.len(), executor, |idx| {
        let multiplier = spec.cp_multipliers[idx];
        max_frequency_one(spec, base, multiplier).map(|f| (multiplier, f))
    });
    outcomes.into_iter().collect()
}

fn max_frequency_one(
    spec: &FrequencyStudySpec,
    base: &DiodeParams,
    multiplier: f64,
) -> Result<f64, MetricsError> {
    let params = scaled_caps(base, multiplier);
    let reference = bridge_quasistatic_mean(spec, &params)?;
    if !(reference.abs() > 0.0) {
        return Err(MetricsError::CriterionNeverMet {
            multiplier,
            f_hz: f64::NAN,
        });
    }
    let eta = |f: f64| -> Result<f64, MetricsError> {
        Ok(bridge_mean_at(spec, &params, f)? / reference)
    };

    let f_natural = 1.0 / (2.0 * std::f64::consts::PI * model::time_constant(&params, Region::Forward));
    let f_floor = f_natural * 1e-6;

    // Bracket the threshold crossing starting from the natural frequency.
    let mut f_pass;
    let mut f_fail;
    if eta(f_natural)? >= spec.eta_threshold {
        f_pass = f_natural;
        f_fail = f_natural * 2.0;
        while eta(f_fail)? >= spec.eta_threshold {
            f_pass = f_fail;
            f_fail *= 2.0;
            if f_fail > f_natural * 1e6 {
                return Ok(f_pass);
            }
        }
    } else {
        f_fail = f_natural;
        f_pass = f_natural / 2.0;
        while eta(f_pass)? < spec.eta_threshold {
            f_fail = f_pass;
            f_pass /= 2.0;
            if f_pass < f_floor {
                return Err(MetricsError::CriterionNeverMet {
                    multiplier,
                    f_hz: f_pass,
                });
            }
        }
    }

    while f_fail / f_pass > 1.0 + spec.rel_tol {
        let mid = (f_pass * f_fail).sqrt();
        if eta(mid)? >= spec.eta_threshold {
            f_pass = mid;
        } else {
            f_fail = mid;
        }
    }
    Ok(f_pass)
}

pub fn write_frequency_study_csv(
    rows: &[(f64, f64)],
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let mut text = String::from("cp_multiplier,f_max_hz\n");
    for (m, f) in rows {
        text.push_str(&format!(
            "{},{}\n",
            crate::netlist::format_number(*m),
            crate::netlist::format_number(*f)
        ));
    }
    out.write_all(text.as_bytes())
}

pub fn frequency_study_plot(csv_name: &str) -> crate::plot::PlotSpec {
    let mut spec = crate::plot::PlotSpec::new(
        "Maximum operating frequency vs capacitance multiplier",
        "C_p multiplier",
        "max frequency (Hz)",
    )
    .with_log_x()
    .curve(csv_name, "cp_multiplier", "f_max_hz");
    spec.log_y = true;
    spec
}
