//! Deriving per-parameter log-normal descriptors from steady-state current
//! measurements.
//!
//! The bundled dataset is synthetic: on/off currents of 15 diodes spread
//! around the published nominal device (log-sigma 0.35 on the forward
//! junction resistance, 0.55 on the reverse one). The workflow matches how
//! the real spread would be calibrated: convert each steady-state current
//! to a junction resistance via `R_p = V/I_ss - R_e`, then fit the
//! log-normal parameters.
//!
//! Run with `cargo run --example fit_variation`.

use ionspice::model::DiodeParams;
use ionspice::stochastic::{fit_lognormal, resistance_from_current, VariationEntry, VariedParam};

const I_ON: [f64; 15] = [
    1.423224e-6, 1.360214e-6, 1.321520e-6, 1.290691e-6, 1.263628e-6, 1.238542e-6, 1.214404e-6,
    1.190476e-6, 1.166109e-6, 1.140606e-6, 1.113060e-6, 1.082080e-6, 1.045084e-6, 9.958611e-7,
    9.082602e-7,
];

const I_OFF: [f64; 15] = [
    5.493871e-8, 4.087017e-8, 3.450707e-8, 3.031929e-8, 2.715678e-8, 2.458233e-8, 2.238105e-8,
    2.042901e-8, 1.864546e-8, 1.697077e-8, 1.535368e-8, 1.374018e-8, 1.205564e-8, 1.015306e-8,
    7.504288e-9,
];

fn main() {
    let nominal = DiodeParams::default();

    let r_p_fwd: Vec<f64> = I_ON
        .iter()
        .map(|i| resistance_from_current(1.0, *i, nominal.r_e))
        .collect();
    let r_p_rev: Vec<f64> = I_OFF
        .iter()
        .map(|i| resistance_from_current(1.0, *i, nominal.r_e))
        .collect();

    for (name, parameter, samples) in [
        ("r_p_fwd", VariedParam::RpFwd, &r_p_fwd),
        ("r_p_rev", VariedParam::RpRev, &r_p_rev),
    ] {
        let (mu_log, sigma_log) = fit_lognormal(samples).expect("positive samples");
        let entry = VariationEntry::from_mu_log(parameter, mu_log, sigma_log);
        println!(
            "{name}: mu_log = {mu_log:.4} (median {:.4e} ohm), sigma_log = {sigma_log:.4}",
            entry.median
        );
    }
    println!("feed these entries into a VariationSpec (or an `mc --sigma-log-*` invocation)");
}
