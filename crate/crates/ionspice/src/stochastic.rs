//! Log-normal parameter sampling and Monte Carlo ensembles.
//!
//! Process variation is applied to the junction resistances: each listed
//! parameter of each diode is independently replaced by a draw of
//! `exp(Normal(mu_log, sigma_log))`; unlisted parameters (the access
//! resistance and the capacitances) keep their nominal values.
//!
//! Reproducibility: the generator is ChaCha8 and run `k` draws from stream
//! `k` of the ensemble seed, so runs are order-independent, parallelizable,
//! and deleting runs never changes the remaining ones. Draws are consumed
//! even when `sigma_log` is zero, so ensembles that differ only in sigma
//! see identical normal deviates run for run.

use crate::engine::{
    dc_operating_point, transient, EngineError, SignalRef, TransientSpec,
};
use crate::exec::{run_indexed, Executor};
use crate::model::DiodeParams;
use crate::netlist::{Circuit, GROUND};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("invalid variation spec: {0}")]
    InvalidSpec(String),
    #[error("observed signal `{0}` does not exist in the template")]
    UnknownSignal(String),
    #[error("all {n} Monte Carlo runs failed; first error: {first}")]
    AllRunsFailed { n: usize, first: String },
    #[error("log-normal fit needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("log-normal fit requires strictly positive samples, got {0}")]
    NonPositiveSample(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Parameter subject to process variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariedParam {
    RpFwd,
    RpRev,
}

impl VariedParam {
    pub fn key(&self) -> &'static str {
        match self {
            VariedParam::RpFwd => "r_p_fwd",
            VariedParam::RpRev => "r_p_rev",
        }
    }
}

/// One per-parameter log-normal descriptor.
///
/// The distribution is stored as `(median, sigma_log)` where
/// `median = exp(mu_log)`; a zero-sigma entry therefore reproduces the
/// median bit-exactly, which keeps degenerate ensembles identical to the
/// nominal solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationEntry {
    pub parameter: VariedParam,
    pub median: f64,
    pub sigma_log: f64,
}

impl VariationEntry {
    /// Entry from the mean of `ln(value)`.
    pub fn from_mu_log(parameter: VariedParam, mu_log: f64, sigma_log: f64) -> Self {
        Self {
            parameter,
            median: mu_log.exp(),
            sigma_log,
        }
    }

    /// Entry centered on a nominal value.
    pub fn around(parameter: VariedParam, nominal: f64, sigma_log: f64) -> Self {
        Self {
            parameter,
            median: nominal,
            sigma_log,
        }
    }

    pub fn mu_log(&self) -> f64 {
        self.median.ln()
    }
}

/// Per-parameter log-normal distributions plus the ensemble seed and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationSpec {
    pub entries: Vec<VariationEntry>,
    pub seed: u64,
    pub n_runs: usize,
}

impl VariationSpec {
    /// Both junction resistances varied around the nominal parameter set.
    pub fn around_nominal(
        nominal: &DiodeParams,
        sigma_log_fwd: f64,
        sigma_log_rev: f64,
        seed: u64,
        n_runs: usize,
    ) -> Self {
        Self {
            entries: vec![
                VariationEntry::around(VariedParam::RpFwd, nominal.r_p_fwd, sigma_log_fwd),
                VariationEntry::around(VariedParam::RpRev, nominal.r_p_rev, sigma_log_rev),
            ],
            seed,
            n_runs,
        }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        for e in &self.entries {
            if !(e.median > 0.0) || !e.median.is_finite() {
                return Err(StochasticError::InvalidSpec(format!(
                    "median of {} must be positive and finite, got {}",
                    e.parameter.key(),
                    e.median
                )));
            }
            if e.sigma_log < 0.0 || !e.sigma_log.is_finite() {
                return Err(StochasticError::InvalidSpec(format!(
                    "sigma_log of {} must be >= 0, got {}",
                    e.parameter.key(),
                    e.sigma_log
                )));
            }
        }
        Ok(())
    }

    /// Generator for one run: stream `run` of the ensemble seed.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }

    /// Scales every entry's sigma, keeping seeds and medians.
    pub fn scaled_sigma(&self, factor: f64) -> Self {
        let mut spec = self.clone();
        for e in &mut spec.entries {
            e.sigma_log *= factor;
        }
        spec
    }
}

/// Draws one diode's parameter set: listed parameters replaced by
/// independent log-normal draws, unlisted parameters taken from `nominal`.
pub fn sample_diode(
    nominal: &DiodeParams,
    spec: &VariationSpec,
    rng: &mut impl Rng,
) -> DiodeParams {
    let mut params = *nominal;
    for entry in &spec.entries {
        let z: f64 = rng.sample(StandardNormal);
        let value = entry.median * (entry.sigma_log * z).exp();
        match entry.parameter {
            VariedParam::RpFwd => params.r_p_fwd = value,
            VariedParam::RpRev => params.r_p_rev = value,
        }
    }
    params
}

/// Analysis to run per Monte Carlo draw. Outcomes are the observed signal
/// values: the operating-point value for DC, the final time point for
/// transients.
#[derive(Debug, Clone)]
pub enum McAnalysis {
    Dc { overrides: Vec<(String, f64)> },
    Transient(TransientSpec),
}

/// Success predicate over one run's outcomes.
#[derive(Debug, Clone, Copy)]
pub struct SuccessRule {
    /// Index into the observed signal list.
    pub signal: usize,
    /// Success when the outcome strictly exceeds this value.
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub analysis: McAnalysis,
    pub observe: Vec<SignalRef>,
    pub executor: Executor,
    pub success: Option<SuccessRule>,
}

impl McConfig {
    pub fn dc(observe: Vec<SignalRef>) -> Self {
        Self {
            analysis: McAnalysis::Dc { overrides: vec![] },
            observe,
            executor: Executor::default(),
            success: None,
        }
    }
}

/// One sampled parameter value, recorded per run for the export.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledValue {
    pub diode: String,
    pub parameter: VariedParam,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: usize,
    pub sampled: Vec<SampledValue>,
    /// Observed signal values, or the solver error for this run.
    pub outcome: Result<Vec<f64>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub signal: String,
    /// Successful runs contributing to the statistics.
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// `(probability, value)` pairs at 5/25/50/75/95%.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub signals: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<SummaryStats>,
    /// Number of successful runs passing the configured predicate.
    pub success_count: Option<usize>,
}

impl EnsembleResult {
    pub fn successful_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_ok()).count()
    }

    /// Recomputes the summary block from the per-run records (the stored
    /// summaries must always equal this).
    pub fn recompute_summaries(&self) -> Vec<SummaryStats> {
        summarize(&self.signals, &self.runs)
    }
}

const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

fn summarize(signals: &[String], runs: &[RunRecord]) -> Vec<SummaryStats> {
    signals
        .iter()
        .enumerate()
        .map(|(idx, signal)| {
            let mut values: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok().map(|o| o[idx]))
                .collect();
            values.sort_by(|a, b| a.total_cmp(b));
            let n = values.len();
            let mean = if n == 0 {
                f64::NAN
            } else {
                values.iter().sum::<f64>() / n as f64
            };
            let std = if n < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            };
            let quantiles = QUANTILES
                .iter()
                .map(|p| (*p, quantile(&values, *p)))
                .collect();
            SummaryStats {
                signal: signal.clone(),
                n,
                mean,
                std,
                quantiles,
            }
        })
        .collect()
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = p * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

fn check_signals_exist(template: &Circuit, observe: &[SignalRef]) -> Result<(), StochasticError> {
    let node_ok = |n: &str| n == GROUND || template.nodes.contains(n);
    for signal in observe {
        let ok = match signal {
            SignalRef::NodeVoltage(n) => node_ok(n),
            SignalRef::VoltageDiff(a, b) => node_ok(a) && node_ok(b),
            SignalRef::ElementCurrent(e) => template.element(e).is_some(),
        };
        if !ok {
            return Err(StochasticError::UnknownSignal(signal.to_string()));
        }
    }
    Ok(())
}

/// Builds the run's circuit: the template with freshly sampled per-diode
/// overrides. Exposed so studies can inspect individual draws.
pub fn sampled_circuit(
    template: &Circuit,
    spec: &VariationSpec,
    run: usize,
) -> (Circuit, Vec<SampledValue>) {
    let mut circuit = template.clone();
    let mut sampled = Vec::new();
    let mut rng = spec.run_rng(run);
    let diode_names: Vec<String> = circuit.diode_names().iter().map(|s| s.to_string()).collect();
    for name in diode_names {
        let nominal = circuit
            .diode_params(circuit.element(&name).expect("diode exists"))
            .expect("validated template has parameters for every diode");
        let params = sample_diode(&nominal, spec, &mut rng);
        circuit.set_diode_overrides(&name, params);
        for entry in &spec.entries {
            let value = match entry.parameter {
                VariedParam::RpFwd => params.r_p_fwd,
                VariedParam::RpRev => params.r_p_rev,
            };
            sampled.push(SampledValue {
                diode: name.clone(),
                parameter: entry.parameter,
                value,
            });
        }
    }
    (circuit, sampled)
}

/// Runs `spec.n_runs` independent solves of the template with freshly
/// sampled per-diode overrides.
///
/// Individual solver failures are recorded on their run without aborting
/// the ensemble; the call fails only when every run fails. Results are
/// bit-identical for identical `(template, spec, config)` regardless of the
/// executor.
pub fn monte_carlo(
    template: &Circuit,
    spec: &VariationSpec,
    config: &McConfig,
) -> Result<EnsembleResult, StochasticError> {
    spec.validate()?;
    check_signals_exist(template, &config.observe)?;

    let runs: Vec<RunRecord> = run_indexed(spec.n_runs, config.executor, |run| {
        let (circuit, sampled) = sampled_circuit(template, spec, run);
        let outcome =
            run_analysis(&circuit, &config.analysis, &config.observe).map_err(|e| e.to_string());
        RunRecord {
            run,
            sampled,
            outcome,
        }
    });

    if !runs.is_empty() && runs.iter().all(|r| r.outcome.is_err()) {
        let first = runs[0].outcome.as_ref().unwrap_err().clone();
        return Err(StochasticError::AllRunsFailed {
            n: runs.len(),
            first,
        });
    }

    let signals: Vec<String> = config.observe.iter().map(|s| s.to_string()).collect();
    let summaries = summarize(&signals, &runs);
    let success_count = config.success.map(|rule| {
        runs.iter()
            .filter(|r| {
                r.outcome
                    .as_ref()
                    .map(|o| o[rule.signal] > rule.threshold)
                    .unwrap_or(false)
            })
            .count()
    });

    Ok(EnsembleResult {
        signals,
        runs,
        summaries,
        success_count,
    })
}

fn run_analysis(
    circuit: &Circuit,
    analysis: &McAnalysis,
    observe: &[SignalRef],
) -> Result<Vec<f64>, EngineError> {
    match analysis {
        McAnalysis::Dc { overrides } => {
            let solution = dc_operating_point(circuit, overrides)?;
            observe.iter().map(|s| solution.signal(s)).collect()
        }
        McAnalysis::Transient(spec) => {
            let result = transient(circuit, spec)?;
            observe
                .iter()
                .map(|s| {
                    result
                        .signal(s)
                        .map(|series| *series.last().expect("series is non-empty"))
                })
                .collect()
        }
    }
}

/// Maximum-likelihood log-normal fit: mean and sample (n-1) standard
/// deviation of `ln(samples)`.
pub fn fit_lognormal(samples: &[f64]) -> Result<(f64, f64), StochasticError> {
    if samples.len() < 2 {
        return Err(StochasticError::TooFewSamples(samples.len()));
    }
    let mut logs = Vec::with_capacity(samples.len());
    for &s in samples {
        if !(s > 0.0) || !s.is_finite() {
            return Err(StochasticError::NonPositiveSample(s));
        }
        logs.push(s.ln());
    }
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mu, var.sqrt()))
}

/// Junction resistance from a steady-state current measurement:
/// `R_p = V/I_ss - R_e`.
pub fn resistance_from_current(volts: f64, i_ss: f64, r_e: f64) -> f64 {
    volts / i_ss - r_e
}

/// CSV export of the per-run records: run index, sampled parameters per
/// diode, observed outcomes, status.
pub fn write_runs_csv(
    result: &EnsembleResult,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let mut text = String::from("run");
    if let Some(first) = result.runs.first() {
        for s in &first.sampled {
            text.push_str(&format!(",{}.{}", s.diode, s.parameter.key()));
        }
    }
    for signal in &result.signals {
        text.push_str(&format!(",{signal}"));
    }
    text.push_str(",status\n");
    for run in &result.runs {
        text.push_str(&run.run.to_string());
        for s in &run.sampled {
            text.push_str(&format!(",{}", crate::netlist::format_number(s.value)));
        }
        match &run.outcome {
            Ok(values) => {
                for v in values {
                    text.push_str(&format!(",{}", crate::netlist::format_number(*v)));
                }
                text.push_str(",ok\n");
            }
            Err(_) => {
                for _ in &result.signals {
                    text.push(',');
                }
                text.push_str(",failed\n");
            }
        }
    }
    out.write_all(text.as_bytes())
}

/// CSV export of the summary block: one row per signal and statistic.
pub fn write_summary_csv(
    result: &EnsembleResult,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    let mut text = String::from("signal,statistic,value\n");
    for s in &result.summaries {
        text.push_str(&format!("{},n,{}\n", s.signal, s.n));
        text.push_str(&format!(
            "{},mean,{}\n",
            s.signal,
            crate::netlist::format_number(s.mean)
        ));
        text.push_str(&format!(
            "{},std,{}\n",
            s.signal,
            crate::netlist::format_number(s.std)
        ));
        for (p, v) in &s.quantiles {
            text.push_str(&format!(
                "{},q{:02},{}\n",
                s.signal,
                (p * 100.0).round() as u32,
                crate::netlist::format_number(*v)
            ));
        }
    }
    if let Some(count) = result.success_count {
        let rate = count as f64 / result.runs.len().max(1) as f64;
        text.push_str(&format!("ensemble,success_count,{count}\n"));
        text.push_str(&format!(
            "ensemble,success_rate,{}\n",
            crate::netlist::format_number(rate)
        ));
    }
    out.write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, Region};
    use crate::netlist::Stimulus;
    use approx::assert_relative_eq;

    fn single_diode_template() -> Circuit {
        let mut c = Circuit::new();
        c.add_model("m", DiodeParams::default());
        c.add_vsource("V1", "in", "0", Stimulus::Dc(1.0));
        c.add_diode("D1", "in", "0", "m");
        c
    }

    #[test]
    fn zero_sigma_draws_reproduce_the_median_exactly() {
        let nominal = DiodeParams::default();
        let spec = VariationSpec::around_nominal(&nominal, 0.0, 0.0, 7, 4);
        let mut rng = spec.run_rng(0);
        let p = sample_diode(&nominal, &spec, &mut rng);
        assert_eq!(p.r_p_fwd.to_bits(), nominal.r_p_fwd.to_bits());
        assert_eq!(p.r_p_rev.to_bits(), nominal.r_p_rev.to_bits());
    }

    #[test]
    fn same_seed_gives_identical_sequences() {
        let nominal = DiodeParams::default();
        let spec = VariationSpec::around_nominal(&nominal, 0.3, 0.3, 42, 4);
        for run in 0..3 {
            let a = sample_diode(&nominal, &spec, &mut spec.run_rng(run));
            let b = sample_diode(&nominal, &spec, &mut spec.run_rng(run));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn log_sample_mean_approaches_mu_log() {
        let nominal = DiodeParams::default();
        let sigma = 0.3;
        let spec = VariationSpec::around_nominal(&nominal, sigma, sigma, 2024, 1);
        let n = 10_000;
        let mut rng = spec.run_rng(0);
        let mean_log: f64 = (0..n)
            .map(|_| sample_diode(&nominal, &spec, &mut rng).r_p_fwd.ln())
            .sum::<f64>()
            / n as f64;
        let mu = nominal.r_p_fwd.ln();
        assert!((mean_log - mu).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn degenerate_ensemble_equals_nominal_solve_exactly() {
        let template = single_diode_template();
        let spec = VariationSpec::around_nominal(&DiodeParams::default(), 0.0, 0.0, 1, 1);
        let cfg = McConfig::dc(vec![SignalRef::ElementCurrent("D1".into())]);
        let ensemble = monte_carlo(&template, &spec, &cfg).unwrap();
        let nominal = dc_operating_point(&template, &[]).unwrap();
        let mc_value = ensemble.runs[0].outcome.as_ref().unwrap()[0];
        let plain = nominal.branch_currents["D1"];
        assert_eq!(mc_value.to_bits(), plain.to_bits());
        assert_eq!(ensemble.summaries[0].std, 0.0);
    }

    #[test]
    fn run_prefix_is_independent_of_ensemble_size() {
        let template = single_diode_template();
        let mut spec = VariationSpec::around_nominal(&DiodeParams::default(), 0.4, 0.4, 99, 10);
        let cfg = McConfig::dc(vec![SignalRef::NodeVoltage("in".into())]);
        let full = monte_carlo(&template, &spec, &cfg).unwrap();
        spec.n_runs = 7;
        let short = monte_carlo(&template, &spec, &cfg).unwrap();
        for (a, b) in short.runs.iter().zip(&full.runs) {
            assert_eq!(a.sampled, b.sampled);
            assert_eq!(a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
        }
    }

    #[test]
    fn summaries_are_recomputable_and_deterministic() {
        let template = single_diode_template();
        let spec = VariationSpec::around_nominal(&DiodeParams::default(), 0.5, 0.5, 5, 50);
        let mut cfg = McConfig::dc(vec![SignalRef::ElementCurrent("D1".into())]);
        cfg.success = Some(SuccessRule {
            signal: 0,
            threshold: 1e-6,
        });
        let a = monte_carlo(&template, &spec, &cfg).unwrap();
        assert_eq!(a.summaries, a.recompute_summaries());

        let b = monte_carlo(&template, &spec, &cfg).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_runs_csv(&a, &mut csv_a).unwrap();
        write_runs_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);

        #[cfg(feature = "parallel")]
        {
            let mut cfg_seq = cfg.clone();
            cfg_seq.executor = Executor::Sequential;
            let c = monte_carlo(&template, &spec, &cfg_seq).unwrap();
            let mut csv_c = Vec::new();
            write_runs_csv(&c, &mut csv_c).unwrap();
            assert_eq!(csv_a, csv_c);
        }
    }

    #[test]
    fn transient_analysis_reports_final_values() {
        let template = single_diode_template();
        let p = DiodeParams::default();
        let tau = model::time_constant(&p, Region::Forward);
        let spec = VariationSpec::around_nominal(&p, 0.0, 0.0, 3, 2);
        let cfg = McConfig {
            analysis: McAnalysis::Transient(TransientSpec {
                t_end: 8.0 * tau,
                dt: tau / 50.0,
                integrator: Default::default(),
                from_rest: true,
                force_dt: true,
            }),
            observe: vec![SignalRef::ElementCurrent("D1".into())],
            executor: Executor::Sequential,
            success: None,
        };
        let ensemble = monte_carlo(&template, &spec, &cfg).unwrap();
        let i_final = ensemble.runs[0].outcome.as_ref().unwrap()[0];
        assert_relative_eq!(i_final, 1.0 / 8.4e5, max_relative = 1e-3);
    }

    #[test]
    fn five_point_gate_ensemble_yields_five_outcomes() {
        let p = DiodeParams::default();
        let (mut gate, _) =
            crate::circuits::or_gate(&crate::circuits::GateTopology::or(), &p).unwrap();
        crate::circuits::drive_port(&mut gate, "Vin1", "in1", 1.0);
        crate::circuits::drive_port(&mut gate, "Vin2", "in2", 0.0);
        let spec = VariationSpec::around_nominal(&p, 0.3, 0.3, 21, 5);
        let cfg = McConfig::dc(vec![SignalRef::NodeVoltage("out".into())]);
        let ensemble = monte_carlo(&gate, &spec, &cfg).unwrap();
        assert_eq!(ensemble.runs.len(), 5);
        for run in &ensemble.runs {
            let out = run.outcome.as_ref().unwrap();
            assert_eq!(out.len(), 1);
            assert!(out[0] > 0.0 && out[0] < 1.0);
            // Three diodes, two sampled parameters each.
            assert_eq!(run.sampled.len(), 6);
        }
    }

    #[test]
    fn all_runs_failing_is_an_ensemble_error() {
        let template = single_diode_template();
        let p = DiodeParams::default();
        let spec = VariationSpec::around_nominal(&p, 0.0, 0.0, 3, 3);
        // A step far above the reverse-tau guard fails every run identically.
        let cfg = McConfig {
            analysis: McAnalysis::Transient(TransientSpec::new(100.0, 10.0)),
            observe: vec![SignalRef::ElementCurrent("D1".into())],
            executor: Executor::Sequential,
            success: None,
        };
        assert!(matches!(
            monte_carlo(&template, &spec, &cfg),
            Err(StochasticError::AllRunsFailed { n: 3, .. })
        ));
    }

    #[test]
    fn unknown_observable_is_rejected_upfront() {
        let template = single_diode_template();
        let spec = VariationSpec::around_nominal(&DiodeParams::default(), 0.1, 0.1, 3, 2);
        let cfg = McConfig::dc(vec![SignalRef::NodeVoltage("nope".into())]);
        assert!(matches!(
            monte_carlo(&template, &spec, &cfg),
            Err(StochasticError::UnknownSignal(_))
        ));
    }

    #[test]
    fn lognormal_fit_examples() {
        let k = 3.7;
        let (mu, sigma) = fit_lognormal(&[k, k, k, k]).unwrap();
        assert_relative_eq!(mu, k.ln(), max_relative = 1e-12);
        assert_eq!(sigma, 0.0);

        let e = std::f64::consts::E;
        let (mu, sigma) = fit_lognormal(&[e, e.powi(3)]).unwrap();
        assert_relative_eq!(mu, 2.0, max_relative = 1e-12);
        assert_relative_eq!(sigma, std::f64::consts::SQRT_2, max_relative = 1e-12);

        assert!(fit_lognormal(&[1.0]).is_err());
        assert!(fit_lognormal(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn lognormal_fit_is_self_consistent_on_large_samples() {
        let spec = VariationSpec {
            entries: vec![VariationEntry::from_mu_log(VariedParam::RpFwd, 1.0, 0.5)],
            seed: 11,
            n_runs: 1,
        };
        let mut rng = spec.run_rng(0);
        let nominal = DiodeParams::default();
        let samples: Vec<f64> = (0..100_000)
            .map(|_| sample_diode(&nominal, &spec, &mut rng).r_p_fwd)
            .collect();
        let (mu, sigma) = fit_lognormal(&samples).unwrap();
        assert_relative_eq!(mu, 1.0, max_relative = 0.01);
        assert_relative_eq!(sigma, 0.5, max_relative = 0.01);
    }

    #[test]
    fn resistance_conversion_matches_definition() {
        let p = DiodeParams::default();
        let i_on = 1.0 / p.r_total(Region::Forward);
        assert_relative_eq!(
            resistance_from_current(1.0, i_on, p.r_e),
            p.r_p_fwd,
            max_relative = 1e-9
        );
    }
}
