//! Acceptance suite: end-to-end checks of the published device numbers,
//! the logic circuits, the statistical studies, and reproducibility.
//! Each test prints one `[acceptance] criterion NN PASS` line on success.

use ionspice::calibrate::{calibrate_full, synthesize_iv, synthesize_step};
use ionspice::circuits::{
    self, chain, decoder_3to8, diode_bridge, drive_port, dual_rail_input_levels, ChainDrive,
    GateKind, GateTopology,
};
use ionspice::engine::{
    dc_operating_point, extract_time_constant, transient, Integrator, SignalRef, TransientSpec,
};
use ionspice::exec::Executor;
use ionspice::metrics::{
    chain_study, high_low_margin, max_frequency, ChainStudySpec, FrequencyStudySpec,
};
use ionspice::model::{self, DiodeParams, Region};
use ionspice::netlist::{is_valid, parse, serialize, Circuit, Stimulus};
use ionspice::stochastic::{monte_carlo, McConfig, VariationSpec};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

fn pass(criterion: u32, what: &str) {
    println!("[acceptance] criterion {criterion:02} PASS: {what}");
}

fn assert_runtime(criterion: u32, elapsed: Duration, budget: Duration) {
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
}

fn rel_err(actual: f64, expected: f64) -> f64 {
    ((actual - expected) / expected).abs()
}

const SINGLE_DIODE_NETLIST: &str = "\
* single iontronic diode
.model iontronic iontronic r_e=5.5e5 r_p_fwd=2.9e5 r_p_rev=4.84e7 c_p_fwd=3.74e-4 c_p_rev=9.93e-7
V1 in 0 DC 0
D1 in 0 iontronic
.end
";

fn single_diode() -> Circuit {
    parse(SINGLE_DIODE_NETLIST).expect("bundled netlist parses")
}

#[test]
fn criterion_01_steady_state_iv() {
    let start = Instant::now();
    let circuit = single_diode();

    let fwd = dc_operating_point(&circuit, &[("V1".into(), 1.0)]).unwrap();
    let i_fwd = fwd.branch_currents["D1"];
    assert!(
        rel_err(i_fwd, 1.190e-6) <= 1e-3,
        "forward current {i_fwd:e} vs 1.190e-6"
    );

    let rev = dc_operating_point(&circuit, &[("V1".into(), -1.0)]).unwrap();
    let i_rev = rev.branch_currents["D1"];
    assert!(
        rel_err(i_rev, -2.041e-8) <= 1e-3,
        "reverse current {i_rev:e} vs -2.041e-8"
    );

    // The solve is exact against the branch equations.
    let p = DiodeParams::default();
    assert!(rel_err(i_fwd, 1.0 / p.r_total(Region::Forward)) < 1e-12);
    assert!(rel_err(i_rev, -1.0 / p.r_total(Region::Reverse)) < 1e-12);

    assert_runtime(1, start.elapsed(), Duration::from_secs(1));
    pass(
        1,
        "single-diode DC currents match 1.190e-6 A and -2.041e-8 A within 0.1%",
    );
}

#[test]
fn criterion_02_transient_oracle() {
    let start = Instant::now();
    let p = DiodeParams::default();

    for (volts, tau_published, region) in
        [(1.0, 71.0, Region::Forward), (-1.0, 0.54, Region::Reverse)]
    {
        let tau = model::time_constant(&p, region);
        let mut circuit = single_diode();
        circuit.set_source_value("V1", volts);
        let spec = TransientSpec {
            t_end: 8.0 * tau,
            dt: tau / 100.0,
            integrator: Integrator::Trapezoidal,
            from_rest: true,
            force_dt: true,
        };
        let result = transient(&circuit, &spec).unwrap();
        let current = result.element_current("D1").unwrap();

        let mut worst = 0.0f64;
        for (t, sim) in result.times.iter().zip(current) {
            let exact = model::analytic_step_response(&p, volts, 0.0, *t).unwrap();
            worst = worst.max(rel_err(*sim, exact));
        }
        assert!(
            worst < 0.01,
            "{volts} V step: max relative error {worst:.4} vs analytic"
        );

        let fitted =
            extract_time_constant(&result, &SignalRef::ElementCurrent("D1".into()), 0.0).unwrap();
        assert!(
            rel_err(fitted, tau_published) <= 0.05,
            "{volts} V step: fitted tau {fitted} vs {tau_published}"
        );
    }

    assert_runtime(2, start.elapsed(), Duration::from_secs(10));
    pass(
        2,
        "simulated steps match the analytic solution within 1%; fitted tau 71 s and 0.54 s within 5%",
    );
}

#[test]
fn criterion_03_peak_current() {
    let mut circuit = single_diode();
    circuit.set_source_value("V1", 1.0);
    let p = DiodeParams::default();
    let tau = model::time_constant(&p, Region::Forward);
    let spec = TransientSpec {
        t_end: tau,
        dt: tau / 100.0,
        integrator: Integrator::BackwardEuler,
        from_rest: true,
        force_dt: true,
    };
    let result = transient(&circuit, &spec).unwrap();
    let i0 = result.element_current("D1").unwrap()[0];
    assert!(
        rel_err(i0, 1.818e-6) <= 0.02,
        "initial current {i0:e} vs 1.818e-6"
    );
    pass(3, "0 -> 1 V switch-on current equals V/R_e = 1.818e-6 A within 2%");
}

#[test]
fn criterion_04_calibration_closed_loop() {
    let start = Instant::now();
    let p = DiodeParams::default();
    let tau_fwd = model::time_constant(&p, Region::Forward);
    let tau_rev = model::time_constant(&p, Region::Reverse);

    let iv = synthesize_iv(&p, -1.0, 1.0, 41).unwrap();
    let dt = tau_fwd.min(tau_rev) / 200.0;
    let segments = [
        (1.0, 7.5 * tau_fwd),
        (0.0, 8.5 * tau_fwd),
        (-1.0, 16.0 * tau_rev),
    ];
    let step = synthesize_step(&p, &segments, dt).unwrap();
    let recovered = calibrate_full(&iv, &step).unwrap();

    for (actual, expected, name) in [
        (recovered.r_e, p.r_e, "r_e"),
        (recovered.r_p_fwd, p.r_p_fwd, "r_p_fwd"),
        (recovered.r_p_rev, p.r_p_rev, "r_p_rev"),
        (recovered.c_p_fwd, p.c_p_fwd, "c_p_fwd"),
        (recovered.c_p_rev, p.c_p_rev, "c_p_rev"),
    ] {
        assert!(
            rel_err(actual, expected) <= 0.03,
            "{name}: recovered {actual:e} vs {expected:e}"
        );
    }

    assert_runtime(4, start.elapsed(), Duration::from_secs(30));
    pass(4, "calibration recovers all five parameters within 3% from synthetic data");
}

#[test]
fn criterion_05_logic_correctness() {
    let p = DiodeParams::default();
    let threshold = 0.5;

    for (kind, table) in [
        (GateKind::Or, [false, true, true, true]),
        (GateKind::And, [false, false, false, true]),
    ] {
        let (circuit, _) = match kind {
            GateKind::Or => circuits::or_gate(&GateTopology::or(), &p).unwrap(),
            GateKind::And => circuits::and_gate(&GateTopology::and(), &p).unwrap(),
        };
        for (idx, want_high) in table.iter().enumerate() {
            let a = (idx >> 1) as f64;
            let b = (idx & 1) as f64;
            let mut driven = circuit.clone();
            drive_port(&mut driven, "Vin1", "in1", a);
            drive_port(&mut driven, "Vin2", "in2", b);
            let out = dc_operating_point(&driven, &[]).unwrap().node_voltages["out"];
            assert_eq!(
                out > threshold,
                *want_high,
                "{kind:?}({a},{b}) output {out} against threshold {threshold}"
            );
        }
    }

    let (mut chain5, ports) = chain(5, &GateTopology::or(), ChainDrive::TieSecondInputLow, &p).unwrap();
    assert_eq!(ports.diode_count, 15);
    drive_port(&mut chain5, "Vin", "in", 1.0);
    let solution = dc_operating_point(&chain5, &[]).unwrap();
    for stage in 1..=5 {
        let v = solution.node_voltages[&format!("y{stage}")];
        assert!(v > threshold, "stage {stage} output {v} fell below {threshold}");
    }

    pass(5, "OR/AND truth tables hold at 0.5 V and every stage of the 5-gate chain stays high");
}

fn decoder_outputs(circuit: &Circuit, code: u8) -> BTreeMap<String, f64> {
    let mut driven = circuit.clone();
    for (idx, (node, volts)) in dual_rail_input_levels(code, 1.0, 0.0).into_iter().enumerate() {
        drive_port(&mut driven, format!("Vi{idx}"), &node, volts);
    }
    let solution = dc_operating_point(&driven, &[]).unwrap();
    (0..8)
        .map(|k| {
            let name = format!("d{k}");
            let v = solution.node_voltages[&name];
            (name, v)
        })
        .collect()
}

fn min_decoder_margin(circuit: &Circuit) -> f64 {
    (0..8)
        .map(|code| {
            let outputs = decoder_outputs(circuit, code);
            let selected = format!("d{code}");
            let argmax = outputs
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(name, _)| name.clone())
                .unwrap();
            assert_eq!(argmax, selected, "code {code} decoded to {argmax}");
            let margin = high_low_margin(&outputs, &selected).unwrap();
            assert!(margin > 0.0, "code {code} margin {margin}");
            margin
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_06_decoder() {
    let start = Instant::now();
    let p = DiodeParams::default();
    let (circuit, ports) = decoder_3to8(&p).unwrap();
    assert_eq!(ports.gate_count, 24, "physical gate count");

    let nominal_margin = min_decoder_margin(&circuit);

    let stiff = DiodeParams {
        r_p_rev: p.r_p_rev * 10.0,
        ..p
    };
    let (better, _) = decoder_3to8(&stiff).unwrap();
    let better_margin = min_decoder_margin(&better);
    assert!(
        better_margin > nominal_margin,
        "tenfold r_p_rev: margin {better_margin} vs nominal {nominal_margin}"
    );

    assert_runtime(6, start.elapsed(), Duration::from_secs(120));
    pass(
        6,
        "all 8 codes decode one-hot with positive margin; 24 gates; tenfold r_p_rev raises the margin",
    );
}

#[test]
fn criterion_07_chain_study_monotonicity() {
    let start = Instant::now();
    let base = DiodeParams::default();
    let spec = ChainStudySpec::new(vec![10.0, 25.0, 50.0, 100.0, 200.0], 0.4, 2026, 200);
    let rows = chain_study(&spec, &base, &GateTopology::or(), Executor::default()).unwrap();

    let curve = |scale: f64| -> Vec<usize> {
        spec.rr_values
            .iter()
            .map(|rr| {
                rows.iter()
                    .find(|r| r.rr == *rr && r.sigma_scale == scale)
                    .unwrap()
                    .max_chain_length
            })
            .collect()
    };
    let sigma = curve(1.0);
    let reduced = curve(0.1);
    println!("chain study: sigma {sigma:?}, sigma/10 {reduced:?}");

    for w in sigma.windows(2) {
        assert!(w[1] >= w[0], "sigma curve not nondecreasing: {sigma:?}");
    }
    for w in reduced.windows(2) {
        assert!(w[1] >= w[0], "sigma/10 curve not nondecreasing: {reduced:?}");
    }
    for (r, s) in reduced.iter().zip(&sigma) {
        assert!(r >= s, "sigma/10 curve must dominate: {reduced:?} vs {sigma:?}");
    }
    // The study must not be degenerate: higher ratios support longer chains.
    assert!(*sigma.last().unwrap() > sigma[0]);

    assert_runtime(7, start.elapsed(), Duration::from_secs(600));
    pass(
        7,
        "max chain length is nondecreasing in RR and the sigma/10 curve dominates pointwise",
    );
}

#[test]
fn criterion_08_bridge_frequency_scaling() {
    let start = Instant::now();
    let base = DiodeParams::default();

    let spec = FrequencyStudySpec::new(vec![1e-3, 1.0]);
    let rows = max_frequency(&spec, &base, Executor::default()).unwrap();
    let f_fast = rows.iter().find(|(m, _)| *m == 1e-3).unwrap().1;
    let f_slow = rows.iter().find(|(m, _)| *m == 1.0).unwrap().1;
    let ratio = f_fast / f_slow;
    println!("bridge study: f_max(1e-3) = {f_fast:e} Hz, f_max(1) = {f_slow:e} Hz, ratio {ratio}");
    assert!(
        (500.0..=2000.0).contains(&ratio),
        "capacitance scaling ratio {ratio} outside [500, 2000]"
    );

    // Unipolarity with fast diodes driven at 0.1 Hz.
    let fast = DiodeParams {
        c_p_fwd: base.c_p_fwd * 1e-6,
        c_p_rev: base.c_p_rev * 1e-6,
        ..base
    };
    let (mut bridge, _) = diode_bridge(1e6, None, &fast).unwrap();
    bridge.add_vsource(
        "Vac",
        "ac",
        "0",
        Stimulus::Sin {
            offset: 0.0,
            amplitude: 1.0,
            frequency_hz: 0.1,
            phase_rad: 0.0,
        },
    );
    let result = transient(
        &bridge,
        &TransientSpec {
            t_end: 30.0,
            dt: 0.005,
            integrator: Integrator::BackwardEuler,
            from_rest: true,
            force_dt: true,
        },
    )
    .unwrap();
    let load = result
        .signal(&SignalRef::VoltageDiff("dcp".into(), "dcn".into()))
        .unwrap();
    let worst = load.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(worst >= -1e-3, "load voltage dipped to {worst} V");

    assert_runtime(8, start.elapsed(), Duration::from_secs(300));
    pass(
        8,
        "f_max scales by ~1000x for a 1000x capacitance reduction; fast-diode load stays unipolar",
    );
}

#[test]
fn criterion_09_determinism() {
    // Byte-identical CSVs from repeated CLI invocations with a fixed seed.
    let dir = tempfile::tempdir().unwrap();
    let netlist_path = dir.path().join("chain5.cir");
    let p = DiodeParams::default();
    let (mut chain5, _) = chain(5, &GateTopology::or(), ChainDrive::TieSecondInputLow, &p).unwrap();
    drive_port(&mut chain5, "Vin", "in", 1.0);
    std::fs::write(&netlist_path, serialize(&chain5)).unwrap();

    let run_once = |prefix: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.path().join(prefix);
        let code = ionspice::cli::run([
            "ionspice",
            "mc",
            netlist_path.to_str().unwrap(),
            "--runs",
            "50",
            "--seed",
            "7",
            "--sigma-log",
            "0.4",
            "--observe",
            "v(y5)",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        (
            std::fs::read(format!("{}_runs.csv", out.display())).unwrap(),
            std::fs::read(format!("{}_summary.csv", out.display())).unwrap(),
        )
    };
    let (runs_a, summary_a) = run_once("a");
    let (runs_b, summary_b) = run_once("b");
    assert_eq!(runs_a, runs_b, "per-run CSVs differ between invocations");
    assert_eq!(summary_a, summary_b, "summary CSVs differ between invocations");

    // A zero-sigma ensemble reproduces the nominal solve exactly.
    let variation = VariationSpec::around_nominal(&p, 0.0, 0.0, 11, 5);
    let config = McConfig::dc(vec![SignalRef::NodeVoltage("y5".into())]);
    let ensemble = monte_carlo(&chain5, &variation, &config).unwrap();
    let nominal = dc_operating_point(&chain5, &[]).unwrap().node_voltages["y5"];
    for run in &ensemble.runs {
        let value = run.outcome.as_ref().unwrap()[0];
        assert_eq!(
            value.to_bits(),
            nominal.to_bits(),
            "sigma = 0 outcome differs from the nominal solve"
        );
    }

    pass(9, "fixed-seed CSVs are byte-identical and sigma = 0 ensembles equal the nominal solve");
}

#[test]
fn criterion_10_netlist_round_trip() {
    let p = DiodeParams::default();
    let generated: Vec<(&str, Circuit)> = vec![
        ("or", circuits::or_gate(&GateTopology::or(), &p).unwrap().0),
        ("and", circuits::and_gate(&GateTopology::and(), &p).unwrap().0),
        (
            "dual_rail_and",
            circuits::dual_rail_and(&GateTopology::and(), &p).unwrap().0,
        ),
        (
            "chain",
            chain(5, &GateTopology::or(), ChainDrive::TieSecondInputLow, &p)
                .unwrap()
                .0,
        ),
        ("decoder", decoder_3to8(&p).unwrap().0),
        ("bridge", diode_bridge(1e6, Some(1e-3), &p).unwrap().0),
    ];
    for (name, circuit) in &generated {
        assert!(is_valid(circuit), "{name} must validate cleanly");
        let text = serialize(circuit);
        let reparsed = parse(&text).unwrap_or_else(|d| panic!("{name} failed to reparse: {d:?}"));
        assert_eq!(&reparsed, circuit, "{name} round trip changed the circuit");
    }

    // Invalid input produces located diagnostics.
    let diags = parse("R1 a 0 0\nD1 a 0 nope\nV1 b b DC 1\n").unwrap_err();
    assert!(!diags.is_empty());
    for d in &diags {
        assert!(d.location.is_some(), "diagnostic without location: {d}");
    }

    pass(10, "every generated circuit round-trips; invalid input yields located diagnostics");
}
