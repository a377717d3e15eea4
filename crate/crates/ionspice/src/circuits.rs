//! Generators for the diode-logic circuits: OR/AND gates, dual-rail
//! composites, cascaded gate chains, a 3-to-8 dual-rail decoder, and a
//! diode bridge rectifier.
//!
//! All generators are pure: they return a complete, validated circuit plus
//! a [`PortMap`] naming its external nodes. Input ports are left undriven
//! so callers can attach sources (see [`drive_port`]); rails that need a
//! supply (the AND-gate pull-up) come with their source included so every
//! generated circuit passes validation as-is.
//!
//! Default logic levels are 1 V high / 0 V low with a 0.5 V threshold. The
//! default pull element is a reverse-oriented diode: it presents the large
//! reverse-state resistance, which keeps output levels close to the rails;
//! a forward-oriented pull would form a half-supply divider.

use crate::model::DiodeParams;
use crate::netlist::{Circuit, Stimulus};
use std::collections::BTreeMap;
use thiserror::Error;

/// Model name used by every generated diode.
pub const MODEL_NAME: &str = "iontronic";

#[derive(Debug, Error)]
pub enum CircuitGenError {
    #[error("gate fan-in must be at least 2, got {0}")]
    FanInTooSmall(usize),
    #[error("supply_high ({high}) must exceed supply_low ({low})")]
    BadSupplies { high: f64, low: f64 },
    #[error("dual-rail gates are built from 2-input gates, got fan-in {0}")]
    DualRailFanIn(usize),
    #[error("chain length must be at least 1")]
    EmptyChain,
    #[error("explicit pull resistor must be positive, got {0}")]
    BadPullResistor(f64),
    #[error("bridge load must be positive, got {0}")]
    BadLoad(f64),
    #[error("topology kind does not match the requested gate")]
    KindMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Or,
    And,
}

/// Orientation of the gate's pull element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PullOrientation {
    /// Diode oriented so the pull sees its reverse resistance when the
    /// output sits at its active level (the default).
    ReverseBiasedLoad,
    ForwardBiasedLoad,
    ExplicitResistor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTopology {
    pub kind: GateKind,
    pub fan_in: usize,
    pub pull: PullOrientation,
    pub supply_high: f64,
    pub supply_low: f64,
}

impl GateTopology {
    pub fn or() -> Self {
        Self {
            kind: GateKind::Or,
            fan_in: 2,
            pull: PullOrientation::ReverseBiasedLoad,
            supply_high: 1.0,
            supply_low: 0.0,
        }
    }

    pub fn and() -> Self {
        Self {
            kind: GateKind::And,
            ..Self::or()
        }
    }

    fn validate(&self) -> Result<(), CircuitGenError> {
        if self.fan_in < 2 {
            return Err(CircuitGenError::FanInTooSmall(self.fan_in));
        }
        if self.supply_high <= self.supply_low {
            return Err(CircuitGenError::BadSupplies {
                high: self.supply_high,
                low: self.supply_low,
            });
        }
        if let PullOrientation::ExplicitResistor(ohms) = self.pull {
            if !(ohms > 0.0) {
                return Err(CircuitGenError::BadPullResistor(ohms));
            }
        }
        Ok(())
    }
}

/// External node names of a generated circuit plus its physical counts.
#[derive(Debug, Clone, Default)]
pub struct PortMap {
    /// Logical label (`in1`, `out`, `a.t`, `d5`, ...) to node name.
    pub ports: BTreeMap<String, String>,
    /// Number of physical logic gates.
    pub gate_count: usize,
    pub diode_count: usize,
}

impl PortMap {
    pub fn node(&self, label: &str) -> Option<&str> {
        self.ports.get(label).map(String::as_str)
    }

    fn set(&mut self, label: impl Into<String>, node: impl Into<String>) {
        self.ports.insert(label.into(), node.into());
    }
}

/// Attaches a DC source driving `node` against ground.
pub fn drive_port(circuit: &mut Circuit, source_name: impl Into<String>, node: &str, volts: f64) {
    circuit.add_vsource(source_name, node, "0", Stimulus::Dc(volts));
}

/// Dual-rail drive levels of a 3-bit code, labelled `a.t` .. `c.f`.
/// Bit 2 of `code` is A (the most significant input).
pub fn dual_rail_input_levels(code: u8, high: f64, low: f64) -> Vec<(String, f64)> {
    let bits = [(code >> 2) & 1, (code >> 1) & 1, code & 1];
    ["a", "b", "c"]
        .iter()
        .zip(bits)
        .flat_map(|(name, bit)| {
            let (t, f) = if bit == 1 { (high, low) } else { (low, high) };
            [(format!("{name}.t"), t), (format!("{name}.f"), f)]
        })
        .collect()
}

/// Ensures the high rail node and its supply source exist.
fn high_rail(circuit: &mut Circuit, volts: f64) -> String {
    if circuit.element("Vvdd").is_none() {
        circuit.add_vsource("Vvdd", "vdd", "0", Stimulus::Dc(volts));
    }
    "vdd".to_string()
}

/// Low rail: ground when the low supply is 0 V, a driven `vss` node
/// otherwise.
fn low_rail(circuit: &mut Circuit, volts: f64) -> String {
    if volts == 0.0 {
        return "0".to_string();
    }
    if circuit.element("Vvss").is_none() {
        circuit.add_vsource("Vvss", "vss", "0", Stimulus::Dc(volts));
    }
    "vss".to_string()
}

/// Emits one physical gate with the given input and output nodes.
/// Returns its diode count.
fn emit_gate(
    circuit: &mut Circuit,
    topo: &GateTopology,
    kind: GateKind,
    prefix: &str,
    inputs: &[String],
    output: &str,
) -> usize {
    let mut diodes = 0;
    for (k, input) in inputs.iter().enumerate() {
        let name = format!("D{prefix}_i{}", k + 1);
        match kind {
            // OR: input sources current into the output node.
            GateKind::Or => circuit.add_diode(name, input.clone(), output, MODEL_NAME),
            // AND: a low input sinks current out of the output node.
            GateKind::And => circuit.add_diode(name, output, input.clone(), MODEL_NAME),
        };
        diodes += 1;
    }
    let pull_name = format!("D{prefix}_p");
    match kind {
        GateKind::Or => {
            let rail = low_rail(circuit, topo.supply_low);
            match topo.pull {
                PullOrientation::ReverseBiasedLoad => {
                    circuit.add_diode(pull_name, rail, output, MODEL_NAME);
                    diodes += 1;
                }
                PullOrientation::ForwardBiasedLoad => {
                    circuit.add_diode(pull_name, output, rail, MODEL_NAME);
                    diodes += 1;
                }
                PullOrientation::ExplicitResistor(ohms) => {
                    circuit.add_resistor(format!("R{prefix}_p"), output, rail, ohms);
                }
            }
        }
        GateKind::And => {
            let rail = high_rail(circuit, topo.supply_high);
            match topo.pull {
                PullOrientation::ReverseBiasedLoad => {
                    circuit.add_diode(pull_name, output, rail, MODEL_NAME);
                    diodes += 1;
                }
                PullOrientation::ForwardBiasedLoad => {
                    circuit.add_diode(pull_name, rail, output, MODEL_NAME);
                    diodes += 1;
                }
                PullOrientation::ExplicitResistor(ohms) => {
                    circuit.add_resistor(format!("R{prefix}_p"), rail, output, ohms);
                }
            }
        }
    }
    diodes
}

fn base_circuit(params: &DiodeParams) -> Circuit {
    let mut c = Circuit::new();
    c.add_model(MODEL_NAME, *params);
    c
}

/// Diode OR gate: `fan_in` input diodes into the output node plus a pull
/// toward the low rail. Ports: `in1..inN`, `out`.
pub fn or_gate(
    topo: &GateTopology,
    params: &DiodeParams,
) -> Result<(Circuit, PortMap), CircuitGenError> {
    topo.validate()?;
    if topo.kind != GateKind::Or {
        return Err(CircuitGenError::KindMismatch);
    }
    let mut circuit = base_circuit(params);
    let inputs: Vec<String> = (1..=topo.fan_in).map(|k| format!("in{k}")).collect();
    let diodes = emit_gate(&mut circuit, topo, GateKind::Or, "g1", &inputs, "out");
    let mut ports = PortMap {
        gate_count: 1,
        diode_count: diodes,
        ..Default::default()
    };
    for (k, node) in inputs.iter().enumerate() {
        ports.set(format!("in{}", k + 1), node.clone());
    }
    ports.set("out", "out");
    Ok((circuit, ports))
}

/// Diode AND gate: `fan_in` input diodes out of the output node plus a pull
/// from the high rail. Ports: `in1..inN`, `out`, `vdd`.
pub fn and_gate(
    topo: &GateTopology,
    params: &DiodeParams,
) -> Result<(Circuit, PortMap), CircuitGenError> {
    topo.validate()?;
    if topo.kind != GateKind::And {
        return Err(CircuitGenError::KindMismatch);
    }
    let mut circuit = base_circuit(params);
    let inputs: Vec<String> = (1..=topo.fan_in).map(|k| format!("in{k}")).collect();
    let diodes = emit_gate(&mut circuit, topo, GateKind::And, "g1", &inputs, "out");
    let mut ports = PortMap {
        gate_count: 1,
        diode_count: diodes,
        ..Default::default()
    };
    for (k, node) in inputs.iter().enumerate() {
        ports.set(format!("in{}", k + 1), node.clone());
    }
    ports.set("out", "out");
    ports.set("vdd", "vdd");
    Ok((circuit, ports))
}

/// Dual-rail AND of two dual-rail bits: the true rail is an AND gate on the
/// true inputs, the false rail an OR gate on the false inputs (De Morgan).
/// Counts as two physical gates. Ports: `a.t/a.f/b.t/b.f/y.t/y.f`, `vdd`.
pub fn dual_rail_and(
    topo: &GateTopology,
    params: &DiodeParams,
) -> Result<(Circuit, PortMap), CircuitGenError> {
    topo.validate()?;
    if topo.fan_in != 2 {
        return Err(CircuitGenError::DualRailFanIn(topo.fan_in));
    }
    let mut circuit = base_circuit(params);
    let mut diodes = 0;
    diodes += emit_gate(
        &mut circuit,
        topo,
        GateKind::And,
        "t",
        &["a.t".to_string(), "b.t".to_string()],
        "y.t",
    );
    diodes += emit_gate(
        &mut circuit,
        topo,
        GateKind::Or,
        "f",
        &["a.f".to_string(), "b.f".to_string()],
        "y.f",
    );
    let mut ports = PortMap {
        gate_count: 2,
        diode_count: diodes,
        ..Default::default()
    };
    for label in ["a.t", "a.f", "b.t", "b.f", "y.t", "y.f"] {
        ports.set(label, label);
    }
    ports.set("vdd", "vdd");
    Ok((circuit, ports))
}

/// How the unused gate inputs of a cascade are tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainDrive {
    /// Worst case for propagating a high through OR gates (the default).
    TieSecondInputLow,
    TieSecondInputHigh,
}

/// Cascade of `n` gates: stage `k+1`'s first input is stage `k`'s output,
/// remaining inputs tied per `drive`. Ports: `in`, `out`, and `y1..yn`.
pub fn chain(
    n: usize,
    topo: &GateTopology,
    drive: ChainDrive,
    params: &DiodeParams,
) -> Result<(Circuit, PortMap), CircuitGenError> {
    topo.validate()?;
    if n == 0 {
        return Err(CircuitGenError::EmptyChain);
    }
    let mut circuit = base_circuit(params);
    let tie = match drive {
        ChainDrive::TieSecondInputLow => low_rail(&mut circuit, topo.supply_low),
        ChainDrive::TieSecondInputHigh => high_rail(&mut circuit, topo.supply_high),
    };
    let mut ports = PortMap::default();
    let mut previous = "in".to_string();
    for stage in 1..=n {
        let output = format!("y{stage}");
        let mut inputs = vec![previous.clone()];
        inputs.extend(std::iter::repeat_n(tie.clone(), topo.fan_in - 1));
        ports.diode_count += emit_gate(
            &mut circuit,
            topo,
            topo.kind,
            &format!("g{stage}"),
            &inputs,
            &output,
        );
        ports.gate_count += 1;
        ports.set(format!("y{stage}"), output.clone());
        previous = output;
    }
    ports.set("in", "in");
    ports.set("out", previous);
    Ok((circuit, ports))
}

/// 3-to-8 dual-rail decoder: level 1 forms the four A/B minterm pairs with
/// 4 dual-rail AND instances (8 physical gates); level 2 combines each pair
/// with the C literal using 8 more instances (16 physical gates), 24 gates
/// and 72 diodes overall. Outputs `d0..d7` are the true rails of level 2;
/// input ports are the six rails `a.t ... c.f`.
pub fn decoder_3to8(params: &DiodeParams) -> Result<(Circuit, PortMap), CircuitGenError> {
    let topo = GateTopology::or();
    let mut circuit = base_circuit(params);
    let mut ports = PortMap::default();

    // A literal rail pair for a bit value: swap the rails to negate.
    let literal = |name: &str, bit: u8| -> (String, String) {
        if bit == 1 {
            (format!("{name}.t"), format!("{name}.f"))
        } else {
            (format!("{name}.f"), format!("{name}.t"))
        }
    };

    let emit_dual_rail_and =
        |circuit: &mut Circuit,
         ports: &mut PortMap,
         prefix: &str,
         x: (String, String),
         y: (String, String),
         out_t: String,
         out_f: String| {
            ports.diode_count += emit_gate(
                circuit,
                &topo,
                GateKind::And,
                &format!("{prefix}t"),
                &[x.0, y.0],
                &out_t,
            );
            ports.diode_count += emit_gate(
                circuit,
                &topo,
                GateKind::Or,
                &format!("{prefix}f"),
                &[x.1, y.1],
                &out_f,
            );
            ports.gate_count += 2;
        };

    // Level 1: the four AB minterm pairs.
    for a in 0..2u8 {
        for b in 0..2u8 {
            emit_dual_rail_and(
                &mut circuit,
                &mut ports,
                &format!("ab{a}{b}"),
                literal("a", a),
                literal("b", b),
                format!("ab{a}{b}.t"),
                format!("ab{a}{b}.f"),
            );
        }
    }
    // Level 2: each minterm pair combined with the C literal.
    for code in 0..8u8 {
        let a = (code >> 2) & 1;
        let b = (code >> 1) & 1;
        let c = code & 1;
        emit_dual_rail_and(
            &mut circuit,
            &mut ports,
            &format!("d{code}"),
            (format!("ab{a}{b}.t"), format!("ab{a}{b}.f")),
            literal("c", c),
            format!("d{code}"),
            format!("d{code}.f"),
        );
    }

    for label in ["a.t", "a.f", "b.t", "b.f", "c.t", "c.f"] {
        ports.set(label, label);
    }
    for code in 0..8 {
        ports.set(format!("d{code}"), format!("d{code}"));
    }
    ports.set("vdd", "vdd");
    Ok((circuit, ports))
}

/// Full-wave diode bridge with a resistive load and optional smoothing
/// capacitor. The AC port is `ac` against ground; the DC load sits between
/// `dc+` and `dc-`. Ports: `ac`, `dc+`, `dc-`.
pub fn diode_bridge(
    load_ohms: f64,
    smoothing_farads: Option<f64>,
    params: &DiodeParams,
) -> Result<(Circuit, PortMap), CircuitGenError> {
    if !(load_ohms > 0.0) {
        return Err(CircuitGenError::BadLoad(load_ohms));
    }
    if let Some(c) = smoothing_farads {
        if !(c > 0.0) {
            return Err(CircuitGenError::BadLoad(c));
        }
    }
    let mut circuit = base_circuit(params);
    circuit.add_diode("Dbr1", "ac", "dcp", MODEL_NAME);
    circuit.add_diode("Dbr2", "0", "dcp", MODEL_NAME);
    circuit.add_diode("Dbr3", "dcn", "ac", MODEL_NAME);
    circuit.add_diode("Dbr4", "dcn", "0", MODEL_NAME);
    circuit.add_resistor("Rload", "dcp", "dcn", load_ohms);
    if let Some(farads) = smoothing_farads {
        circuit.add_capacitor("Csm", "dcp", "dcn", farads);
    }
    let mut ports = PortMap {
        gate_count: 0,
        diode_count: 4,
        ..Default::default()
    };
    ports.set("ac", "ac");
    ports.set("dc+", "dcp");
    ports.set("dc-", "dcn");
    Ok((circuit, ports))
}
