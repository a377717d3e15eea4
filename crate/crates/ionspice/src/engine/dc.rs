//! DC operating point and DC sweeps.

use super::mna::{self, Layout, Mode, PwlSolution};
use super::{DcSolution, EngineError};
use crate::model::{self, DiodeState, Region};
use crate::netlist::{validate, Circuit, Severity, GROUND};
use std::collections::BTreeMap;

pub(crate) fn check_circuit(circuit: &Circuit) -> Result<(), EngineError> {
    let errors: Vec<String> = validate(circuit)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.message)
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidCircuit(errors.join("; ")))
    }
}

pub(crate) fn build_solution(layout: &Layout, solved: &PwlSolution, mode: Mode) -> DcSolution {
    let mut node_voltages = BTreeMap::new();
    node_voltages.insert(GROUND.to_string(), 0.0);
    for (idx, name) in layout.node_names.iter().enumerate() {
        node_voltages.insert(name.clone(), solved.x[idx]);
    }

    let currents = mna::element_currents(layout, &solved.x, mode, false);
    let branch_currents: BTreeMap<String, f64> = layout
        .element_names
        .iter()
        .cloned()
        .zip(currents)
        .collect();

    let mut diode_states = BTreeMap::new();
    let mut diode_regions = BTreeMap::new();
    for (k, d) in layout.diodes.iter().enumerate() {
        let vc = mna::junction_voltage(&solved.x, d);
        diode_states.insert(
            d.name.clone(),
            DiodeState {
                vc,
                q: model::charge(&d.params, vc),
            },
        );
        diode_regions.insert(d.name.clone(), solved.regions[k]);
    }

    DcSolution {
        node_voltages,
        branch_currents,
        diode_states,
        diode_regions,
        iterations: solved.iterations,
        region_flips: solved.flips,
        max_kcl_residual: solved.max_kcl_residual,
        warnings: solved.warnings.clone(),
    }
}

/// Solves the DC operating point. `overrides` replaces the value of named
/// sources for this solve only (time-varying stimuli contribute their
/// `t = 0` value otherwise).
pub fn dc_operating_point(
    circuit: &Circuit,
    overrides: &[(String, f64)],
) -> Result<DcSolution, EngineError> {
    check_circuit(circuit)?;
    let layout = Layout::new(circuit)?;
    dc_prepared(&layout, overrides, None)
}

/// Operating point on a prepared layout; `warm_regions` seeds the region
/// iteration (used by sweeps and Monte Carlo for stability and speed).
pub(crate) fn dc_prepared(
    layout: &Layout,
    overrides: &[(String, f64)],
    warm_regions: Option<&[Region]>,
) -> Result<DcSolution, EngineError> {
    let values = layout.source_values(0.0, overrides)?;
    let cold = vec![Region::Forward; layout.diodes.len()];
    let initial = warm_regions.unwrap_or(&cold);
    let solved = mna::solve_pwl(layout, &values, Mode::Dc, initial)?;
    Ok(build_solution(layout, &solved, Mode::Dc))
}

/// One operating point per source value, each warm-started from the
/// previous solution. An empty value list yields an empty result.
pub fn dc_sweep(
    circuit: &Circuit,
    source: &str,
    values: &[f64],
) -> Result<Vec<DcSolution>, EngineError> {
    check_circuit(circuit)?;
    let layout = Layout::new(circuit)?;
    if !layout.sources.iter().any(|s| s.name == source) {
        return Err(EngineError::UnknownSource(source.to_string()));
    }
    let mut results = Vec::with_capacity(values.len());
    let mut warm: Option<Vec<Region>> = None;
    for &value in values {
        let overrides = [(source.to_string(), value)];
        let solution = dc_prepared(&layout, &overrides, warm.as_deref()).map_err(|e| {
            EngineError::SweepFailed {
                source_name: source.to_string(),
                value,
                source: Box::new(e),
            }
        })?;
        warm = Some(solution.diode_regions.values().copied().collect());
        results.push(solution);
    }
    Ok(results)
}
