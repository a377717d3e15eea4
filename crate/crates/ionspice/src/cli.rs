//! Command-line front end.
//!
//! Subcommands: `check`, `dc`, `sweep`, `tran`, `mc`, `gen`, `study`,
//! `calibrate`. Every analysis writes a CSV next to a plot script in the
//! declarative format described in the README. Exit codes: 0 success,
//! 1 analysis error, 2 usage error.
//!
//! The `IONSPICE_THREADS` environment variable caps the worker pool used
//! for Monte Carlo runs and study grid points (`0` or unset picks the
//! machine default; ignored when built without the `parallel` feature).

use crate::calibrate;
use crate::circuits::{self, ChainDrive, GateKind, GateTopology, PullOrientation};
use crate::engine::{
    dc_operating_point, dc_sweep, default_dt, transient, write_dc_csv, write_sweep_csv,
    write_transient_csv, Integrator, SignalRef, TransientSpec,
};
use crate::exec::Executor;
use crate::metrics::{
    chain_study, chain_study_plot, frequency_study_plot, max_frequency, write_chain_study_csv,
    write_frequency_study_csv, ChainStudySpec, FrequencyStudySpec,
};
use crate::model::DiodeParams;
use crate::netlist::{parse, serialize, validate, Circuit, Severity};
use crate::plot::PlotSpec;
use crate::stochastic::{
    monte_carlo, write_runs_csv, write_summary_csv, McAnalysis, McConfig, SuccessRule,
    VariationSpec,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "ionspice",
    version,
    about = "Compact-model circuit simulator for iontronic diode networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a netlist (use `-` for stdin).
    Check { netlist: String },
    /// DC operating point.
    Dc(DcArgs),
    /// DC sweep of one source.
    Sweep(SweepArgs),
    /// Transient analysis.
    Tran(TranArgs),
    /// Monte Carlo ensemble over sampled diode parameters.
    Mc(McArgs),
    /// Emit one of the built-in circuits as netlist text.
    Gen(GenArgs),
    /// Parameter studies driven by a TOML spec file.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Extract model parameters from measurement CSVs.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct DcArgs {
    /// Netlist path (`-` for stdin).
    netlist: String,
    /// Override a source value, e.g. --set V1=0.5 (repeatable).
    #[arg(long = "set", value_name = "SRC=V")]
    set: Vec<String>,
    /// Signals to export; defaults to all node voltages and currents.
    #[arg(long = "observe", value_name = "SIGNAL")]
    observe: Vec<String>,
    /// Output file prefix.
    #[arg(long, default_value = "dc")]
    out: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    netlist: String,
    #[arg(long)]
    source: String,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    points: usize,
    #[arg(long = "observe", value_name = "SIGNAL")]
    observe: Vec<String>,
    #[arg(long, default_value = "sweep")]
    out: String,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum IntegratorArg {
    /// Backward Euler (first order, L-stable; the default).
    Be,
    /// Trapezoidal (second order).
    Trap,
}

impl From<IntegratorArg> for Integrator {
    fn from(value: IntegratorArg) -> Self {
        match value {
            IntegratorArg::Be => Integrator::BackwardEuler,
            IntegratorArg::Trap => Integrator::Trapezoidal,
        }
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TranArgs {
    netlist: String,
    /// End time (s).
    #[arg(long)]
    tend: f64,
    /// Fixed step (s); defaults to one hundredth of the smallest diode
    /// reverse time constant.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value = "be")]
    integrator: IntegratorArg,
    /// Start from zero stored charge instead of the t = 0 operating point.
    #[arg(long)]
    from_rest: bool,
    /// Accept a step larger than the stability guard.
    #[arg(long)]
    force_dt: bool,
    #[arg(long = "observe", value_name = "SIGNAL")]
    observe: Vec<String>,
    #[arg(long, default_value = "tran")]
    out: String,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct McArgs {
    netlist: String,
    #[arg(long)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    /// Log-normal sigma applied to both junction resistances.
    #[arg(long = "sigma-log", default_value_t = 0.0)]
    sigma_log: f64,
    /// Override sigma for the forward junction resistance only.
    #[arg(long = "sigma-log-fwd")]
    sigma_log_fwd: Option<f64>,
    /// Override sigma for the reverse junction resistance only.
    #[arg(long = "sigma-log-rev")]
    sigma_log_rev: Option<f64>,
    /// Signals to record per run (repeatable, required).
    #[arg(long = "observe", value_name = "SIGNAL", required = true)]
    observe: Vec<String>,
    /// Source overrides for the per-run DC analysis.
    #[arg(long = "set", value_name = "SRC=V")]
    set: Vec<String>,
    /// Run a transient per draw instead of a DC solve; outcomes are the
    /// final time-point values.
    #[arg(long)]
    tend: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value = "be")]
    integrator: IntegratorArg,
    #[arg(long)]
    from_rest: bool,
    #[arg(long)]
    force_dt: bool,
    /// Count a run as successful when SIGNAL exceeds V, e.g. v(out)=0.5.
    #[arg(long = "success-gt", value_name = "SIGNAL=V")]
    success_gt: Option<String>,
    /// Use the sequential executor even when built with `parallel`.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value = "mc")]
    out: String,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Or,
    And,
    Chain,
    Decoder,
    Bridge,
}

#[derive(Clone, Copy, Debug)]
struct PullArg(PullOrientation);

impl FromStr for PullArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reverse" => Ok(PullArg(PullOrientation::ReverseBiasedLoad)),
            "forward" => Ok(PullArg(PullOrientation::ForwardBiasedLoad)),
            other => {
                if let Some(value) = other.strip_prefix("res=") {
                    let ohms: f64 = value
                        .parse()
                        .map_err(|_| format!("bad pull resistance `{value}`"))?;
                    Ok(PullArg(PullOrientation::ExplicitResistor(ohms)))
                } else {
                    Err("expected `reverse`, `forward` or `res=<ohms>`".to_string())
                }
            }
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DriveArg {
    Low,
    High,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct GenArgs {
    kind: GenKind,
    #[arg(long = "fan-in", default_value_t = 2)]
    fan_in: usize,
    /// Pull element: `reverse`, `forward`, or `res=<ohms>`.
    #[arg(long, default_value = "reverse")]
    pull: PullArg,
    #[arg(long = "supply-high", default_value_t = 1.0)]
    supply_high: f64,
    #[arg(long = "supply-low", default_value_t = 0.0)]
    supply_low: f64,
    /// Chain length.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// How the chain's unused gate inputs are tied.
    #[arg(long, value_enum, default_value = "low")]
    drive: DriveArg,
    /// Add a DC source driving the chain input at this voltage, so the
    /// emitted netlist is ready for `dc`/`tran`/`mc` as-is (chain only).
    #[arg(long = "drive-in")]
    drive_in: Option<f64>,
    /// Bridge load resistance (ohms).
    #[arg(long, default_value_t = 1e6)]
    load: f64,
    /// Bridge smoothing capacitor (farads).
    #[arg(long)]
    smoothing: Option<f64>,
    /// Key-value parameter document for the diode model.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output netlist path (`-` for stdout).
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Maximum operational chain length vs rectification ratio.
    Chain(StudyArgs),
    /// Maximum bridge operating frequency vs capacitance multiplier.
    Freq(StudyArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// TOML study specification.
    spec: PathBuf,
    /// Key-value parameter document for the nominal diode.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// IV sweep CSV (columns v,i).
    #[arg(long)]
    iv: PathBuf,
    /// Step-response CSV (columns t,i).
    #[arg(long)]
    step: PathBuf,
    /// Event list CSV (columns t_event,v_before,v_after).
    #[arg(long)]
    events: PathBuf,
    /// Output parameter document.
    #[arg(long, default_value = "params.model")]
    out: PathBuf,
}

/// Runs the CLI on an explicit argument vector and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_thread_pool();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(value) = std::env::var("IONSPICE_THREADS") {
            if let Ok(threads) = value.trim().parse::<usize>() {
                if threads > 0 {
                    // A second initialization in the same process is fine to
                    // ignore; the first pool wins.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Check { netlist } => cmd_check(&netlist),
        Command::Dc(args) => cmd_dc(args).map(|()| 0),
        Command::Sweep(args) => cmd_sweep(args).map(|()| 0),
        Command::Tran(args) => cmd_tran(args).map(|()| 0),
        Command::Mc(args) => cmd_mc(args).map(|()| 0),
        Command::Gen(args) => cmd_gen(args).map(|()| 0),
        Command::Study(StudyCommand::Chain(args)) => cmd_study_chain(args).map(|()| 0),
        Command::Study(StudyCommand::Freq(args)) => cmd_study_freq(args).map(|()| 0),
        Command::Calibrate(args) => cmd_calibrate(args).map(|()| 0),
    }
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn load_circuit(path: &str) -> Result<Circuit> {
    let text = read_input(path)?;
    parse(&text).map_err(|diags| {
        let mut message = format!("{path} failed to parse:");
        for d in &diags {
            message.push_str(&format!("\n  {d}"));
        }
        anyhow!(message)
    })
}

fn load_params(path: &Option<PathBuf>) -> Result<DiodeParams> {
    match path {
        None => Ok(DiodeParams::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            DiodeParams::from_document(&text).map_err(Into::into)
        }
    }
}

fn parse_assignment(raw: &str) -> Result<(String, f64)> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| anyhow!("expected NAME=VALUE, got `{raw}`"))?;
    Ok((
        name.trim().to_string(),
        value
            .trim()
            .parse()
            .with_context(|| format!("bad value in `{raw}`"))?,
    ))
}

fn parse_signals(raw: &[String]) -> Result<Vec<SignalRef>> {
    raw.iter()
        .map(|s| SignalRef::parse(s).map_err(Into::into))
        .collect()
}

/// All node voltages (sorted) followed by all element currents (circuit
/// order); the default observation set.
fn all_signals(circuit: &Circuit) -> Vec<SignalRef> {
    let mut signals: Vec<SignalRef> = circuit
        .nodes
        .iter()
        .filter(|n| n.as_str() != crate::netlist::GROUND)
        .map(|n| SignalRef::NodeVoltage(n.clone()))
        .collect();
    signals.extend(
        circuit
            .elements
            .iter()
            .map(|e| SignalRef::ElementCurrent(e.name.clone())),
    );
    signals
}

fn observed_or_all(raw: &[String], circuit: &Circuit) -> Result<Vec<SignalRef>> {
    if raw.is_empty() {
        Ok(all_signals(circuit))
    } else {
        parse_signals(raw)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_plot(prefix: &str, spec: &PlotSpec) -> Result<()> {
    let mut buf = Vec::new();
    spec.write(&mut buf)?;
    write_file(&PathBuf::from(format!("{prefix}.plot")), &buf)
}

fn cmd_check(path: &str) -> Result<i32> {
    let text = read_input(path)?;
    match parse(&text) {
        Ok(circuit) => {
            for d in validate(&circuit) {
                if d.severity == Severity::Warning {
                    eprintln!("{path}: {d}");
                }
            }
            println!(
                "{path}: ok ({} elements, {} nodes)",
                circuit.elements.len(),
                circuit.nodes.len()
            );
            Ok(0)
        }
        Err(diags) => {
            for d in &diags {
                eprintln!("{path}: {d}");
            }
            Ok(1)
        }
    }
}

fn cmd_dc(args: DcArgs) -> Result<()> {
    let circuit = load_circuit(&args.netlist)?;
    let overrides: Vec<(String, f64)> = args
        .set
        .iter()
        .map(|s| parse_assignment(s))
        .collect::<Result<_>>()?;
    let solution = dc_operating_point(&circuit, &overrides)?;
    for w in &solution.warnings {
        eprintln!("warning: {w}");
    }
    for (node, v) in &solution.node_voltages {
        println!("v({node}) = {v:.6e} V");
    }
    for (element, i) in &solution.branch_currents {
        println!("i({element}) = {i:.6e} A");
    }

    let signals = observed_or_all(&args.observe, &circuit)?;
    let drive = overrides.first().map(|(_, v)| *v).unwrap_or(0.0);
    let mut csv = Vec::new();
    write_dc_csv(&solution, drive, &signals, &mut csv)?;
    write_file(&PathBuf::from(format!("{}.csv", args.out)), &csv)?;
    let plot = PlotSpec::new("DC operating point", "value", "signal").curve(
        format!("{}.csv", args.out),
        "value",
        signals[0].to_string(),
    );
    write_plot(&args.out, &plot)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.points < 2 {
        bail!("need at least 2 sweep points");
    }
    let circuit = load_circuit(&args.netlist)?;
    let values: Vec<f64> = (0..args.points)
        .map(|k| args.from + (args.to - args.from) * k as f64 / (args.points - 1) as f64)
        .collect();
    let solutions = dc_sweep(&circuit, &args.source, &values)?;
    let signals = observed_or_all(&args.observe, &circuit)?;
    let mut csv = Vec::new();
    write_sweep_csv(&solutions, &values, &signals, &mut csv)?;
    write_file(&PathBuf::from(format!("{}.csv", args.out)), &csv)?;
    let plot = PlotSpec::new(
        format!("DC sweep of {}", args.source),
        "source voltage (V)",
        signals[0].to_string(),
    )
    .curve(format!("{}.csv", args.out), "value", signals[0].to_string());
    write_plot(&args.out, &plot)
}

fn cmd_tran(args: TranArgs) -> Result<()> {
    let circuit = load_circuit(&args.netlist)?;
    let dt = match args.dt {
        Some(dt) => dt,
        None => default_dt(&circuit)
            .ok_or_else(|| anyhow!("circuit has no diodes; specify --dt explicitly"))?,
    };
    let spec = TransientSpec {
        t_end: args.tend,
        dt,
        integrator: args.integrator.into(),
        from_rest: args.from_rest,
        force_dt: args.force_dt,
    };
    let result = transient(&circuit, &spec)?;
    for event in &result.region_events {
        eprintln!(
            "region switch: {} {:?} -> {:?} at t = {:.6} s",
            event.diode, event.from, event.to, event.time
        );
    }
    let signals = observed_or_all(&args.observe, &circuit)?;
    let mut csv = Vec::new();
    write_transient_csv(&result, &signals, &mut csv)?;
    write_file(&PathBuf::from(format!("{}.csv", args.out)), &csv)?;
    let plot = PlotSpec::new("Transient analysis", "time (s)", signals[0].to_string()).curve(
        format!("{}.csv", args.out),
        "time",
        signals[0].to_string(),
    );
    write_plot(&args.out, &plot)
}

fn cmd_mc(args: McArgs) -> Result<()> {
    let circuit = load_circuit(&args.netlist)?;
    let observe = parse_signals(&args.observe)?;

    let nominal = circuit
        .elements
        .iter()
        .find_map(|e| circuit.diode_params(e))
        .unwrap_or_default();
    let sigma_fwd = args.sigma_log_fwd.unwrap_or(args.sigma_log);
    let sigma_rev = args.sigma_log_rev.unwrap_or(args.sigma_log);
    let variation =
        VariationSpec::around_nominal(&nominal, sigma_fwd, sigma_rev, args.seed, args.runs);

    let analysis = match args.tend {
        None => McAnalysis::Dc {
            overrides: args
                .set
                .iter()
                .map(|s| parse_assignment(s))
                .collect::<Result<_>>()?,
        },
        Some(t_end) => {
            let dt = match args.dt {
                Some(dt) => dt,
                None => default_dt(&circuit)
                    .ok_or_else(|| anyhow!("circuit has no diodes; specify --dt explicitly"))?,
            };
            McAnalysis::Transient(TransientSpec {
                t_end,
                dt,
                integrator: args.integrator.into(),
                from_rest: args.from_rest,
                force_dt: args.force_dt,
            })
        }
    };

    let success = match &args.success_gt {
        None => None,
        Some(raw) => {
            let (signal, threshold) = parse_assignment(raw)?;
            let reference = SignalRef::parse(&signal)?;
            let index = observe
                .iter()
                .position(|s| *s == reference)
                .ok_or_else(|| anyhow!("success signal `{signal}` must be observed"))?;
            Some(SuccessRule {
                signal: index,
                threshold,
            })
        }
    };

    let config = McConfig {
        analysis,
        observe,
        executor: executor(args.sequential),
        success,
    };
    let result = monte_carlo(&circuit, &variation, &config)?;

    let failed = result.runs.len() - result.successful_runs();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", result.runs.len());
    }
    for s in &result.summaries {
        println!(
            "{}: n={} mean={:.6e} std={:.6e}",
            s.signal, s.n, s.mean, s.std
        );
    }
    if let Some(count) = result.success_count {
        println!("success: {count}/{}", result.runs.len());
    }

    let mut runs_csv = Vec::new();
    write_runs_csv(&result, &mut runs_csv)?;
    write_file(&PathBuf::from(format!("{}_runs.csv", args.out)), &runs_csv)?;
    let mut summary_csv = Vec::new();
    write_summary_csv(&result, &mut summary_csv)?;
    write_file(
        &PathBuf::from(format!("{}_summary.csv", args.out)),
        &summary_csv,
    )?;
    let plot = PlotSpec::new("Monte Carlo outcomes", "run", result.signals[0].clone()).curve(
        format!("{}_runs.csv", args.out),
        "run",
        result.signals[0].clone(),
    );
    write_plot(&args.out, &plot)
}

fn executor(sequential: bool) -> Executor {
    if sequential {
        Executor::Sequential
    } else {
        Executor::default()
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let params = load_params(&args.params)?;
    let topo = |kind: GateKind| GateTopology {
        kind,
        fan_in: args.fan_in,
        pull: args.pull.0,
        supply_high: args.supply_high,
        supply_low: args.supply_low,
    };
    if args.drive_in.is_some() && args.kind != GenKind::Chain {
        bail!("--drive-in only applies to `gen chain`");
    }
    let (mut circuit, ports) = match args.kind {
        GenKind::Or => circuits::or_gate(&topo(GateKind::Or), &params)?,
        GenKind::And => circuits::and_gate(&topo(GateKind::And), &params)?,
        GenKind::Chain => {
            let drive = match args.drive {
                DriveArg::Low => ChainDrive::TieSecondInputLow,
                DriveArg::High => ChainDrive::TieSecondInputHigh,
            };
            circuits::chain(args.n, &topo(GateKind::Or), drive, &params)?
        }
        GenKind::Decoder => circuits::decoder_3to8(&params)?,
        GenKind::Bridge => circuits::diode_bridge(args.load, args.smoothing, &params)?,
    };
    if let Some(volts) = args.drive_in {
        let input = ports.node("in").expect("chains expose an input port").to_string();
        circuits::drive_port(&mut circuit, "Vin", &input, volts);
    }
    let text = serialize(&circuit);
    if args.out == "-" {
        print!("{text}");
    } else {
        write_file(&PathBuf::from(&args.out), text.as_bytes())?;
    }
    eprintln!(
        "ports: {}",
        ports
            .ports
            .iter()
            .map(|(label, node)| format!("{label}={node}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    if ports.gate_count > 0 {
        eprintln!("gates: {}, diodes: {}", ports.gate_count, ports.diode_count);
    }
    Ok(())
}

fn cmd_study_chain(args: StudyArgs) -> Result<()> {
    let text =
        fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: ChainStudySpec = toml::from_str(&text).context("parsing chain study spec")?;
    let base = load_params(&args.params)?;
    let rows = chain_study(&spec, &base, &GateTopology::or(), executor(args.sequential))?;
    for row in &rows {
        println!(
            "rr={:.1} sigma_scale={} max_chain_length={}",
            row.rr, row.sigma_scale, row.max_chain_length
        );
    }
    let prefix = args.out.unwrap_or_else(|| "study_chain".to_string());
    let mut csv = Vec::new();
    write_chain_study_csv(&rows, &mut csv)?;
    write_file(&PathBuf::from(format!("{prefix}.csv")), &csv)?;
    write_plot(&prefix, &chain_study_plot(&format!("{prefix}.csv")))
}

fn cmd_study_freq(args: StudyArgs) -> Result<()> {
    let text =
        fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec: FrequencyStudySpec = toml::from_str(&text).context("parsing frequency study spec")?;
    let base = load_params(&args.params)?;
    let rows = max_frequency(&spec, &base, executor(args.sequential))?;
    for (m, f) in &rows {
        println!("cp_multiplier={m:e} f_max={f:e} Hz");
    }
    let prefix = args.out.unwrap_or_else(|| "study_freq".to_string());
    let mut csv = Vec::new();
    write_frequency_study_csv(&rows, &mut csv)?;
    write_file(&PathBuf::from(format!("{prefix}.csv")), &csv)?;
    write_plot(&prefix, &frequency_study_plot(&format!("{prefix}.csv")))
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let iv = calibrate::read_iv_csv(
        &fs::read_to_string(&args.iv).with_context(|| format!("reading {}", args.iv.display()))?,
    )?;
    let events = calibrate::read_events_csv(
        &fs::read_to_string(&args.events)
            .with_context(|| format!("reading {}", args.events.display()))?,
    )?;
    let step = calibrate::read_step_csv(
        &fs::read_to_string(&args.step)
            .with_context(|| format!("reading {}", args.step.display()))?,
        events,
    )?;
    let report = calibrate::calibrate_report(&iv, &step)?;
    println!(
        "R_TSS: reverse {:.4e} ohm, forward {:.4e} ohm",
        report.rtss_rev, report.rtss_fwd
    );
    println!(
        "tau: forward {:.4} s (spread {:.2e}, n={}), reverse {:.4} s (spread {:.2e}, n={})",
        report.tau_fwd.mean,
        report.tau_fwd.spread,
        report.tau_fwd.count,
        report.tau_rev.mean,
        report.tau_rev.spread,
        report.tau_rev.count
    );
    let doc = report.params.to_document();
    print!("{doc}");
    println!(
        ".model iontronic iontronic r_e={} r_p_fwd={} r_p_rev={} c_p_fwd={} c_p_rev={}",
        crate::netlist::format_number(report.params.r_e),
        crate::netlist::format_number(report.params.r_p_fwd),
        crate::netlist::format_number(report.params.r_p_rev),
        crate::netlist::format_number(report.params.c_p_fwd),
        crate::netlist::format_number(report.params.c_p_rev)
    );
    write_file(&args.out, doc.as_bytes())
}
