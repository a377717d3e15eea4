//! Modified nodal analysis assembly and the piecewise-linear solve.
//!
//! Unknowns: one voltage per non-ground circuit node, one voltage per diode
//! internal node (between the access resistance and the junction RC pair,
//! so the junction voltage `vc` is represented directly), and one branch
//! current per voltage source.
//!
//! The network is piecewise linear, so Newton iteration reduces to region
//! assignment: solve the linear system under assumed diode regions, derive
//! regions from the solved junction voltages, repeat until stable. The flip
//! budget is `4 * diode_count + 10`; when it is exhausted the assignment
//! with the smallest true-law KCL residual is kept and a warning recorded.

use super::{EngineError, Integrator};
use crate::model::{self, DiodeParams, Region};
use crate::netlist::{Circuit, ElementKind, Stimulus};
use nalgebra::{DMatrix, DVector};

pub(crate) const MAX_NEWTON_ITERATIONS: usize = 100;

/// Index of a terminal: `None` is ground.
type NodeRef = Option<usize>;

pub(crate) struct DiodeRef {
    pub name: String,
    pub element_index: usize,
    pub anode: NodeRef,
    pub cathode: NodeRef,
    /// Variable index of the internal node.
    pub internal: usize,
    pub params: DiodeParams,
}

pub(crate) struct SourceRef {
    pub name: String,
    pub element_index: usize,
    pub np: NodeRef,
    pub nn: NodeRef,
    /// Variable index of the branch current.
    pub branch: usize,
    pub stimulus: Stimulus,
}

pub(crate) struct ResistorRef {
    pub element_index: usize,
    pub n1: NodeRef,
    pub n2: NodeRef,
    pub ohms: f64,
}

pub(crate) struct CapacitorRef {
    pub element_index: usize,
    pub n1: NodeRef,
    pub n2: NodeRef,
    pub farads: f64,
}

/// Prepared solve structure for one circuit.
pub(crate) struct Layout {
    /// Non-ground circuit node names in variable order.
    pub node_names: Vec<String>,
    pub element_names: Vec<String>,
    pub diodes: Vec<DiodeRef>,
    pub sources: Vec<SourceRef>,
    pub resistors: Vec<ResistorRef>,
    pub capacitors: Vec<CapacitorRef>,
    pub n_vars: usize,
}

impl Layout {
    pub fn new(circuit: &Circuit) -> Result<Self, EngineError> {
        let node_names: Vec<String> = circuit
            .nodes
            .iter()
            .filter(|n| n.as_str() != crate::netlist::GROUND)
            .cloned()
            .collect();
        let index_of = |name: &str| -> NodeRef {
            if name == crate::netlist::GROUND {
                None
            } else {
                Some(node_names.binary_search_by(|n| n.as_str().cmp(name)).unwrap())
            }
        };

        let n_nodes = node_names.len();
        let n_diodes = circuit
            .elements
            .iter()
            .filter(|e| matches!(e.kind, ElementKind::IontronicDiode { .. }))
            .count();

        let mut diodes = Vec::new();
        let mut sources = Vec::new();
        let mut resistors = Vec::new();
        let mut capacitors = Vec::new();
        let mut element_names = Vec::new();

        for (element_index, element) in circuit.elements.iter().enumerate() {
            element_names.push(element.name.clone());
            match &element.kind {
                ElementKind::IontronicDiode { anode, cathode, .. } => {
                    let params = circuit.diode_params(element).ok_or_else(|| {
                        EngineError::InvalidCircuit(format!(
                            "diode `{}` has no parameter set",
                            element.name
                        ))
                    })?;
                    diodes.push(DiodeRef {
                        name: element.name.clone(),
                        element_index,
                        anode: index_of(anode),
                        cathode: index_of(cathode),
                        internal: n_nodes + diodes.len(),
                        params,
                    });
                }
                ElementKind::VSource { np, nn, stimulus } => {
                    sources.push(SourceRef {
                        name: element.name.clone(),
                        element_index,
                        np: index_of(np),
                        nn: index_of(nn),
                        branch: n_nodes + n_diodes + sources.len(),
                        stimulus: stimulus.clone(),
                    });
                }
                ElementKind::Resistor { n1, n2, ohms } => resistors.push(ResistorRef {
                    element_index,
                    n1: index_of(n1),
                    n2: index_of(n2),
                    ohms: *ohms,
                }),
                ElementKind::Capacitor { n1, n2, farads } => capacitors.push(CapacitorRef {
                    element_index,
                    n1: index_of(n1),
                    n2: index_of(n2),
                    farads: *farads,
                }),
            }
        }

        Ok(Self {
            n_vars: n_nodes + n_diodes + sources.len(),
            node_names,
            element_names,
            diodes,
            sources,
            resistors,
            capacitors,
        })
    }

    /// Source values at time `t`, with optional per-source overrides.
    pub fn source_values(&self, t: f64, overrides: &[(String, f64)]) -> Result<Vec<f64>, EngineError> {
        for (name, _) in overrides {
            if !self.sources.iter().any(|s| &s.name == name) {
                return Err(EngineError::UnknownSource(name.clone()));
            }
        }
        Ok(self
            .sources
            .iter()
            .map(|s| {
                overrides
                    .iter()
                    .find(|(name, _)| name == &s.name)
                    .map(|(_, v)| *v)
                    .unwrap_or_else(|| s.stimulus.value_at(t))
            })
            .collect())
    }

    pub fn flip_budget(&self) -> usize {
        4 * self.diodes.len() + 10
    }

    /// Smallest reverse time constant over all diodes, if any.
    pub fn min_reverse_tau(&self) -> Option<f64> {
        self.diodes
            .iter()
            .map(|d| model::time_constant(&d.params, Region::Reverse))
            .min_by(|a, b| a.total_cmp(b))
    }

    fn variable_name(&self, idx: usize) -> String {
        if idx < self.node_names.len() {
            format!("node `{}`", self.node_names[idx])
        } else if idx < self.node_names.len() + self.diodes.len() {
            format!(
                "internal node of diode `{}`",
                self.diodes[idx - self.node_names.len()].name
            )
        } else {
            let s = idx - self.node_names.len() - self.diodes.len();
            format!("branch of source `{}`", self.sources[s].name)
        }
    }
}

/// Per-element dynamic state carried between transient steps.
#[derive(Debug, Clone, Default)]
pub(crate) struct DynState {
    /// Stored charge per diode.
    pub q: Vec<f64>,
    /// Junction capacitor current per diode (trapezoidal history).
    pub ic_diode: Vec<f64>,
    /// Voltage per linear capacitor.
    pub v_cap: Vec<f64>,
    /// Current per linear capacitor (trapezoidal history).
    pub ic_cap: Vec<f64>,
}

#[derive(Clone, Copy)]
pub(crate) enum Mode<'a> {
    Dc,
    Transient {
        dt: f64,
        integrator: Integrator,
        state: &'a DynState,
    },
}

struct System {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl System {
    fn new(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
        }
    }

    fn conductance(&mut self, n1: NodeRef, n2: NodeRef, g: f64) {
        if let Some(i) = n1 {
            self.a[(i, i)] += g;
        }
        if let Some(j) = n2 {
            self.a[(j, j)] += g;
        }
        if let (Some(i), Some(j)) = (n1, n2) {
            self.a[(i, j)] -= g;
            self.a[(j, i)] -= g;
        }
    }

    /// Injects a current flowing from `n1` to `n2` outside the element
    /// (i.e. the element sources current into `n2`).
    fn current(&mut self, n1: NodeRef, n2: NodeRef, i: f64) {
        if let Some(n) = n1 {
            self.b[n] -= i;
        }
        if let Some(n) = n2 {
            self.b[n] += i;
        }
    }

    fn vsource(&mut self, row: usize, np: NodeRef, nn: NodeRef, volts: f64) {
        if let Some(i) = np {
            self.a[(row, i)] = 1.0;
            self.a[(i, row)] += 1.0;
        }
        if let Some(j) = nn {
            self.a[(row, j)] = -1.0;
            self.a[(j, row)] -= 1.0;
        }
        self.b[row] = volts;
    }
}

/// Companion conductance and right-hand-side injection of a capacitor-like
/// element for the chosen integrator. The injection flows into the positive
/// terminal.
fn companion(integrator: Integrator, dt: f64, c: f64, q_old: f64, ic_old: f64) -> (f64, f64) {
    match integrator {
        Integrator::BackwardEuler => (c / dt, q_old / dt),
        Integrator::Trapezoidal => (2.0 * c / dt, 2.0 * q_old / dt + ic_old),
    }
}

fn assemble(layout: &Layout, regions: &[Region], source_values: &[f64], mode: Mode) -> System {
    let mut sys = System::new(layout.n_vars);
    for r in &layout.resistors {
        sys.conductance(r.n1, r.n2, 1.0 / r.ohms);
    }
    for (k, d) in layout.diodes.iter().enumerate() {
        let m = Some(d.internal);
        sys.conductance(d.anode, m, 1.0 / d.params.r_e);
        sys.conductance(m, d.cathode, 1.0 / d.params.r_p(regions[k]));
        if let Mode::Transient { dt, integrator, state } = mode {
            let (g, inject) = companion(
                integrator,
                dt,
                d.params.c_p(regions[k]),
                state.q[k],
                state.ic_diode[k],
            );
            sys.conductance(m, d.cathode, g);
            // The history term drives current from the internal node toward
            // the cathode; as an injection it enters the internal node.
            sys.current(d.cathode, m, inject);
        }
    }
    if let Mode::Transient { dt, integrator, state } = mode {
        for (k, c) in layout.capacitors.iter().enumerate() {
            let (g, inject) = companion(
                integrator,
                dt,
                c.farads,
                c.farads * state.v_cap[k],
                state.ic_cap[k],
            );
            sys.conductance(c.n1, c.n2, g);
            sys.current(c.n2, c.n1, inject);
        }
    }
    for (s, volts) in layout.sources.iter().zip(source_values) {
        sys.vsource(s.branch, s.np, s.nn, *volts);
    }
    sys
}

fn voltage(x: &DVector<f64>, node: NodeRef) -> f64 {
    node.map(|i| x[i]).unwrap_or(0.0)
}

pub(crate) fn junction_voltage(x: &DVector<f64>, d: &DiodeRef) -> f64 {
    x[d.internal] - voltage(x, d.cathode)
}

/// Capacitor current of diode `k` under the true (piecewise) charge law.
fn diode_cap_current(d: &DiodeRef, vc: f64, mode: Mode, k: usize) -> f64 {
    match mode {
        Mode::Dc => 0.0,
        Mode::Transient { dt, integrator, state } => {
            let q_new = model::charge(&d.params, vc);
            match integrator {
                Integrator::BackwardEuler => (q_new - state.q[k]) / dt,
                Integrator::Trapezoidal => 2.0 * (q_new - state.q[k]) / dt - state.ic_diode[k],
            }
        }
    }
}

fn linear_cap_current(c: &CapacitorRef, v: f64, mode: Mode, k: usize) -> f64 {
    match mode {
        Mode::Dc => 0.0,
        Mode::Transient { dt, integrator, state } => match integrator {
            Integrator::BackwardEuler => c.farads * (v - state.v_cap[k]) / dt,
            Integrator::Trapezoidal => {
                2.0 * c.farads * (v - state.v_cap[k]) / dt - state.ic_cap[k]
            }
        },
    }
}

/// True-law KCL residual: per-node current imbalance evaluated with the
/// piecewise element equations (not the assumed-region linearization).
/// Returns `(max_imbalance, max_term)` where `max_term` is the largest
/// individual injected current magnitude.
fn kcl_residual(layout: &Layout, x: &DVector<f64>, mode: Mode, source_values: &[f64]) -> (f64, f64) {
    let n_kcl = layout.node_names.len() + layout.diodes.len();
    let mut imbalance = vec![0.0f64; n_kcl];
    let mut max_term = 0.0f64;
    let mut add = |node: NodeRef, current_in: f64, max_term: &mut f64| {
        if let Some(i) = node {
            imbalance[i] += current_in;
        }
        *max_term = max_term.max(current_in.abs());
    };

    for r in &layout.resistors {
        let i = (voltage(x, r.n1) - voltage(x, r.n2)) / r.ohms;
        add(r.n1, -i, &mut max_term);
        add(r.n2, i, &mut max_term);
    }
    for (k, c) in layout.capacitors.iter().enumerate() {
        let v = voltage(x, c.n1) - voltage(x, c.n2);
        let i = linear_cap_current(c, v, mode, k);
        add(c.n1, -i, &mut max_term);
        add(c.n2, i, &mut max_term);
    }
    for (k, d) in layout.diodes.iter().enumerate() {
        let vm = x[d.internal];
        let i_e = (voltage(x, d.anode) - vm) / d.params.r_e;
        let vc = junction_voltage(x, d);
        let i_p = model::branch_current(&d.params, vc);
        let i_c = diode_cap_current(d, vc, mode, k);
        add(d.anode, -i_e, &mut max_term);
        add(Some(d.internal), i_e - i_p - i_c, &mut max_term);
        add(d.cathode, i_p + i_c, &mut max_term);
    }
    for (s, _volts) in layout.sources.iter().zip(source_values) {
        let i = x[s.branch];
        add(s.np, -i, &mut max_term);
        add(s.nn, i, &mut max_term);
    }

    let max_imbalance = imbalance.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    (max_imbalance, max_term)
}

pub(crate) struct PwlSolution {
    pub x: DVector<f64>,
    pub regions: Vec<Region>,
    pub iterations: usize,
    pub flips: usize,
    pub max_kcl_residual: f64,
    pub warnings: Vec<String>,
}

fn solve_linear(layout: &Layout, sys: System) -> Result<DVector<f64>, EngineError> {
    if layout.n_vars == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = sys.a.clone().lu();
    match lu.solve(&sys.b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => {
            // Identify the variable whose pivot collapsed.
            let u = lu.u();
            let mut worst = 0usize;
            let mut smallest = f64::INFINITY;
            for i in 0..layout.n_vars {
                let p = u[(i, i)].abs();
                if p < smallest {
                    smallest = p;
                    worst = i;
                }
            }
            Err(EngineError::SingularSystem {
                variable: layout.variable_name(worst),
            })
        }
    }
}

/// Region-assignment iteration on the piecewise-linear network.
pub(crate) fn solve_pwl(
    layout: &Layout,
    source_values: &[f64],
    mode: Mode,
    initial_regions: &[Region],
) -> Result<PwlSolution, EngineError> {
    let mut regions = initial_regions.to_vec();
    let mut flips = 0usize;
    let mut warnings = Vec::new();
    let mut best: Option<(f64, DVector<f64>, Vec<Region>)> = None;

    for iteration in 1..=MAX_NEWTON_ITERATIONS {
        let sys = assemble(layout, &regions, source_values, mode);
        let x = solve_linear(layout, sys)?;

        let derived: Vec<Region> = layout
            .diodes
            .iter()
            .map(|d| {
                if junction_voltage(&x, d) >= 0.0 {
                    Region::Forward
                } else {
                    Region::Reverse
                }
            })
            .collect();

        let (residual, scale) = kcl_residual(layout, &x, mode, source_values);
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, x.clone(), regions.clone()));
        }

        if derived == regions {
            let tolerance = f64::max(1e-12, 1e-9 * f64::max(scale, 1e-12));
            if residual > tolerance {
                return Err(EngineError::NonConvergence {
                    context: format!(
                        "KCL residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
                    ),
                });
            }
            return Ok(PwlSolution {
                x,
                regions,
                iterations: iteration,
                flips,
                max_kcl_residual: residual,
                warnings,
            });
        }

        flips += derived
            .iter()
            .zip(&regions)
            .filter(|(a, b)| a != b)
            .count();
        if flips > layout.flip_budget() {
            let oscillating: Vec<&str> = layout
                .diodes
                .iter()
                .zip(derived.iter().zip(&regions))
                .filter(|(_, (a, b))| a != b)
                .map(|(d, _)| d.name.as_str())
                .collect();
            warnings.push(format!(
                "region assignment exceeded flip budget ({}); keeping best residual; oscillating diodes: {}",
                layout.flip_budget(),
                oscillating.join(", ")
            ));
            let (residual, x, regions) = best.expect("at least one solve recorded");
            return Ok(PwlSolution {
                x,
                regions,
                iterations: iteration,
                flips,
                max_kcl_residual: residual,
                warnings,
            });
        }
        regions = derived;
    }

    Err(EngineError::NonConvergence {
        context: format!("no stable region assignment after {MAX_NEWTON_ITERATIONS} iterations"),
    })
}

/// Instantaneous network solution with every capacitor voltage clamped to
/// its initial value (diode junctions to `vc0`, linear capacitors to
/// `vcap0`). Used for the first record of a transient that starts from a
/// prescribed state. Returns the solution vector extended with one branch
/// current per diode clamp and per capacitor clamp (in that order).
pub(crate) fn clamped_initial_solve(
    layout: &Layout,
    source_values: &[f64],
    vc0: &[f64],
    vcap0: &[f64],
) -> Result<DVector<f64>, EngineError> {
    let n = layout.n_vars + layout.diodes.len() + layout.capacitors.len();
    let mut sys = System::new(n);
    for r in &layout.resistors {
        sys.conductance(r.n1, r.n2, 1.0 / r.ohms);
    }
    for (k, d) in layout.diodes.iter().enumerate() {
        let m = Some(d.internal);
        let region = if vc0[k] >= 0.0 { Region::Forward } else { Region::Reverse };
        sys.conductance(d.anode, m, 1.0 / d.params.r_e);
        sys.conductance(m, d.cathode, 1.0 / d.params.r_p(region));
        sys.vsource(layout.n_vars + k, m, d.cathode, vc0[k]);
    }
    for (k, c) in layout.capacitors.iter().enumerate() {
        sys.vsource(layout.n_vars + layout.diodes.len() + k, c.n1, c.n2, vcap0[k]);
    }
    for (s, volts) in layout.sources.iter().zip(source_values) {
        sys.vsource(s.branch, s.np, s.nn, *volts);
    }
    // Layout-sized bookkeeping does not apply here; report singularities
    // against the clamped system directly.
    let lu = sys.a.clone().lu();
    match lu.solve(&sys.b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(EngineError::SingularSystem {
            variable: "initial-condition clamp network".to_string(),
        }),
    }
}

/// Element currents in circuit element order.
///
/// Conventions: resistor and capacitor currents flow from the first to the
/// second terminal; diode current is the current into the anode; source
/// current flows from the positive terminal through the source (a source
/// delivering power reports a negative current).
///
/// `clamped` is set when `x` came from [`clamped_initial_solve`]; linear
/// capacitor currents are then read from the clamp branch unknowns.
pub(crate) fn element_currents(
    layout: &Layout,
    x: &DVector<f64>,
    mode: Mode,
    clamped: bool,
) -> Vec<f64> {
    let n_elements = layout.element_names.len();
    let mut currents = vec![0.0; n_elements];
    for r in &layout.resistors {
        currents[r.element_index] = (voltage(x, r.n1) - voltage(x, r.n2)) / r.ohms;
    }
    for (k, c) in layout.capacitors.iter().enumerate() {
        currents[c.element_index] = if clamped {
            x[layout.n_vars + layout.diodes.len() + k]
        } else {
            let v = voltage(x, c.n1) - voltage(x, c.n2);
            linear_cap_current(c, v, mode, k)
        };
    }
    for d in &layout.diodes {
        currents[d.element_index] = (voltage(x, d.anode) - x[d.internal]) / d.params.r_e;
    }
    for s in &layout.sources {
        currents[s.element_index] = x[s.branch];
    }
    currents
}
