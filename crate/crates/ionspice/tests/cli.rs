//! End-to-end checks of the command-line interface: exit codes, file
//! outputs, and reproducibility.

use ionspice::calibrate::{
    synthesize_iv, synthesize_step, write_events_csv, write_iv_csv, write_step_csv,
};
use ionspice::cli::run;
use ionspice::model::{self, DiodeParams, Region};
use std::fs;
use std::path::Path;

fn run_args(args: &[&str]) -> i32 {
    run(std::iter::once("ionspice").chain(args.iter().copied()))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_output_passes_check() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["or", "and", "chain", "decoder", "bridge"] {
        let netlist = dir.path().join(format!("{kind}.cir"));
        assert_eq!(
            run_args(&["gen", kind, "--out", path_str(&netlist)]),
            0,
            "gen {kind}"
        );
        assert_eq!(run_args(&["check", path_str(&netlist)]), 0, "check {kind}");
    }
}

#[test]
fn gen_pipes_into_check_through_the_binary() {
    // The documented pipeline: `ionspice gen or | ionspice check -`.
    use std::process::{Command, Stdio};
    let gen = Command::new(env!("CARGO_BIN_EXE_ionspice"))
        .args(["gen", "or"])
        .stderr(Stdio::null())
        .output()
        .unwrap();
    assert!(gen.status.success());
    let mut check = Command::new(env!("CARGO_BIN_EXE_ionspice"))
        .args(["check", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    use std::io::Write;
    check
        .stdin
        .take()
        .unwrap()
        .write_all(&gen.stdout)
        .unwrap();
    assert!(check.wait().unwrap().success());
}

#[test]
fn tran_csv_yields_the_published_time_constant() {
    let dir = tempfile::tempdir().unwrap();
    let netlist = dir.path().join("diode.cir");
    fs::write(
        &netlist,
        ".model iontronic iontronic\nV1 in 0 DC 1\nD1 in 0 iontronic\n",
    )
    .unwrap();
    let out = dir.path().join("step");
    let code = run_args(&[
        "tran",
        path_str(&netlist),
        "--tend",
        "500",
        "--dt",
        "0.05",
        "--from-rest",
        "--observe",
        "i(D1)",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);

    // Post-process the exported CSV alone: the fitted time constant must
    // reproduce the device's forward value.
    let csv = fs::read_to_string(format!("{}.csv", out.display())).unwrap();
    let mut times = Vec::new();
    let mut current = Vec::new();
    for line in csv.lines().skip(1) {
        let mut cells = line.split(',');
        times.push(cells.next().unwrap().parse::<f64>().unwrap());
        current.push(cells.next().unwrap().parse::<f64>().unwrap());
    }
    let series = ionspice::engine::TransientResult::from_node_series(times, "i", current);
    let tau = ionspice::engine::extract_time_constant(
        &series,
        &ionspice::engine::SignalRef::NodeVoltage("i".into()),
        0.0,
    )
    .unwrap();
    assert!(
        ((tau - 71.0) / 71.0).abs() < 0.05,
        "fitted tau from CSV: {tau}"
    );
}

#[test]
fn check_rejects_bad_netlists_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let netlist = dir.path().join("bad.cir");
    fs::write(&netlist, "D1 a 0 missing_model\n").unwrap();
    assert_eq!(run_args(&["check", path_str(&netlist)]), 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run_args(&["frobnicate"]), 2);
    assert_eq!(run_args(&["tran"]), 2); // missing required args
    assert_eq!(run_args(&["--help"]), 0);
}

#[test]
fn tran_writes_csv_with_expected_peak() {
    let dir = tempfile::tempdir().unwrap();
    let netlist = dir.path().join("diode.cir");
    fs::write(
        &netlist,
        "* step\n\
         .model iontronic iontronic\n\
         V1 in 0 DC 1\n\
         D1 in 0 iontronic\n",
    )
    .unwrap();
    let out = dir.path().join("step");
    let code = run_args(&[
        "tran",
        path_str(&netlist),
        "--tend",
        "10",
        "--dt",
        "0.1",
        "--from-rest",
        "--observe",
        "i(D1)",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);

    let csv = fs::read_to_string(format!("{}.csv", out.display())).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,i(D1)");
    let first = lines.next().unwrap();
    let i0: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!(
        ((i0 - 1.0 / 5.5e5) / (1.0 / 5.5e5)).abs() < 1e-9,
        "switch-on current {i0}"
    );
    assert!(Path::new(&format!("{}.plot", out.display())).exists());
}

#[test]
fn dc_set_overrides_sources() {
    let dir = tempfile::tempdir().unwrap();
    let netlist = dir.path().join("diode.cir");
    fs::write(
        &netlist,
        ".model iontronic iontronic\nV1 in 0 DC 0\nD1 in 0 iontronic\n",
    )
    .unwrap();
    let out = dir.path().join("op");
    let code = run_args(&[
        "dc",
        path_str(&netlist),
        "--set",
        "V1=1",
        "--observe",
        "i(D1)",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(format!("{}.csv", out.display())).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let i: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(((i - 1.0 / 8.4e5) / (1.0 / 8.4e5)).abs() < 1e-9);
}

#[test]
fn mc_reruns_are_byte_identical_and_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let netlist = dir.path().join("diode.cir");
    fs::write(
        &netlist,
        ".model iontronic iontronic\nV1 in 0 DC 1\nD1 in 0 iontronic\n",
    )
    .unwrap();

    let mc = |prefix: &str| {
        let out = dir.path().join(prefix);
        let code = run_args(&[
            "mc",
            path_str(&netlist),
            "--runs",
            "25",
            "--seed",
            "3",
            "--sigma-log",
            "0.5",
            "--observe",
            "i(D1)",
            "--success-gt",
            "i(D1)=1e-6",
            "--out",
            path_str(&out),
        ]);
        assert_eq!(code, 0);
        fs::read(format!("{}_runs.csv", out.display())).unwrap()
    };
    assert_eq!(mc("m1"), mc("m2"));

    let out = dir.path().join("iv");
    let code = run_args(&[
        "sweep",
        path_str(&netlist),
        "--source",
        "V1",
        "--from",
        "-1",
        "--to",
        "1",
        "--points",
        "21",
        "--observe",
        "i(D1)",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(format!("{}.csv", out.display())).unwrap();
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn calibrate_recovers_parameters_from_csv_files() {
    // A faster device keeps the synthetic protocol short.
    let p = DiodeParams {
        r_e: 1e5,
        r_p_fwd: 5e5,
        r_p_rev: 5e6,
        c_p_fwd: 1e-4,
        c_p_rev: 1e-5,
    };
    let tau_fwd = model::time_constant(&p, Region::Forward);
    let tau_rev = model::time_constant(&p, Region::Reverse);
    let iv = synthesize_iv(&p, -1.0, 1.0, 41).unwrap();
    let step = synthesize_step(
        &p,
        &[
            (1.0, 7.5 * tau_fwd),
            (0.0, 8.5 * tau_fwd),
            (-1.0, 16.0 * tau_rev),
        ],
        tau_fwd.min(tau_rev) / 200.0,
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let iv_path = dir.path().join("iv.csv");
    let step_path = dir.path().join("step.csv");
    let events_path = dir.path().join("events.csv");
    let out_path = dir.path().join("params.model");
    fs::write(&iv_path, write_iv_csv(&iv)).unwrap();
    fs::write(&step_path, write_step_csv(&step)).unwrap();
    fs::write(&events_path, write_events_csv(&step.events)).unwrap();

    let code = run_args(&[
        "calibrate",
        "--iv",
        path_str(&iv_path),
        "--step",
        path_str(&step_path),
        "--events",
        path_str(&events_path),
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(code, 0);

    let recovered =
        DiodeParams::from_document(&fs::read_to_string(&out_path).unwrap()).unwrap();
    for (actual, expected) in [
        (recovered.r_e, p.r_e),
        (recovered.r_p_fwd, p.r_p_fwd),
        (recovered.r_p_rev, p.r_p_rev),
        (recovered.c_p_fwd, p.c_p_fwd),
        (recovered.c_p_rev, p.c_p_rev),
    ] {
        assert!(((actual - expected) / expected).abs() <= 0.03);
    }
}

#[test]
fn study_commands_run_from_toml_specs() {
    let dir = tempfile::tempdir().unwrap();

    let chain_spec = dir.path().join("chain.toml");
    fs::write(
        &chain_spec,
        r#"
rr_values = [15.0, 40.0]
vary = "rp_rev"
max_n = 8

[variation]
seed = 5
n_runs = 30
entries = [
  { parameter = "rp_fwd", median = 1.0, sigma_log = 0.3 },
  { parameter = "rp_rev", median = 1.0, sigma_log = 0.3 },
]
"#,
    )
    .unwrap();
    let out = dir.path().join("chain_study");
    let code = run_args(&[
        "study",
        "chain",
        path_str(&chain_spec),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(format!("{}.csv", out.display())).unwrap();
    assert!(csv.starts_with("rr,sigma_scale,max_chain_length\n"));
    assert_eq!(csv.lines().count(), 5); // header + 2 rr x 2 sigma scales

    let freq_spec = dir.path().join("freq.toml");
    fs::write(&freq_spec, "cp_multipliers = [1e-6]\n").unwrap();
    let out = dir.path().join("freq_study");
    let code = run_args(&[
        "study",
        "freq",
        path_str(&freq_spec),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(format!("{}.csv", out.display())).unwrap();
    assert!(csv.starts_with("cp_multiplier,f_max_hz\n"));
}
