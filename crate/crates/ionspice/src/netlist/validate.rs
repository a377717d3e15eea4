//! Structural validation of circuits.

use super::{Circuit, ElementKind, Stimulus, GROUND};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding. Diagnostics produced by the parser carry a
/// 1-based `(line, column)` source location; diagnostics produced directly
/// from an in-memory [`Circuit`] do not.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub location: Option<(usize, usize)>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            location: None,
        }
    }

    pub fn warning(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
            location: None,
        }
    }

    pub fn at(mut self, line: usize, col: usize) -> Self {
        self.location = Some((line, col));
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.location {
            Some((line, col)) => write!(f, "line {line}, col {col}: {tag}: {}", self.message),
            None => write!(f, "{tag}: {}", self.message),
        }
    }
}

/// What a diagnostic is about, so the parser can map it back to a source
/// location.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Subject {
    Element(String),
    Node(String),
    Model(String),
    Whole,
}

/// Checks every circuit invariant and returns one diagnostic per violation.
///
/// Errors: missing ground, terminals referencing unregistered nodes, nodes
/// unreachable from ground, duplicate element names, non-positive resistor
/// or capacitor values, degenerate diode or source terminals, undefined or
/// invalid model references, malformed stimuli. Inverted `r_p` ordering in
/// per-diode overrides is reported as a warning: Monte Carlo draws may
/// legitimately produce it.
pub fn validate(circuit: &Circuit) -> Vec<Diagnostic> {
    validate_with_subjects(circuit)
        .into_iter()
        .map(|(_, d)| d)
        .collect()
}

/// True when the circuit has no error-severity diagnostics.
pub fn is_valid(circuit: &Circuit) -> bool {
    validate(circuit)
        .iter()
        .all(|d| d.severity != Severity::Error)
}

pub(crate) fn validate_with_subjects(circuit: &Circuit) -> Vec<(Subject, Diagnostic)> {
    let mut diags = Vec::new();

    if !circuit.nodes.contains(GROUND) {
        diags.push((
            Subject::Whole,
            Diagnostic::error("ground node `0` is missing"),
        ));
    }

    let mut seen = BTreeSet::new();
    for element in &circuit.elements {
        let subject = || Subject::Element(element.name.clone());
        if !seen.insert(element.name.as_str()) {
            diags.push((
                subject(),
                Diagnostic::error(format!("duplicate element name `{}`", element.name)),
            ));
        }
        for terminal in element.terminals() {
            if !circuit.nodes.contains(terminal) {
                diags.push((
                    subject(),
                    Diagnostic::error(format!(
                        "element `{}` references unknown node `{terminal}`",
                        element.name
                    )),
                ));
            }
        }
        match &element.kind {
            ElementKind::Resistor { ohms, .. } => {
                if !(*ohms > 0.0) || !ohms.is_finite() {
                    diags.push((
                        subject(),
                        Diagnostic::error(format!(
                            "resistor `{}` must have a strictly positive finite value, got {ohms}",
                            element.name
                        )),
                    ));
                }
            }
            ElementKind::Capacitor { farads, .. } => {
                if !(*farads > 0.0) || !farads.is_finite() {
                    diags.push((
                        subject(),
                        Diagnostic::error(format!(
                            "capacitor `{}` must have a strictly positive finite value, got {farads}",
                            element.name
                        )),
                    ));
                }
            }
            ElementKind::IontronicDiode {
                model,
                anode,
                cathode,
                overrides,
            } => {
                if anode == cathode {
                    diags.push((
                        subject(),
                        Diagnostic::error(format!(
                            "diode `{}` has identical anode and cathode `{anode}`",
                            element.name
                        )),
                    ));
                }
                if !circuit.models.contains_key(model) {
                    diags.push((
                        subject(),
                        Diagnostic::error(format!(
                            "diode `{}` references undefined model `{model}`",
                            element.name
                        )),
                    ));
                }
                if let Some(p) = overrides {
                    if let Err(e) = p.validate_relaxed() {
                        diags.push((
                            subject(),
                            Diagnostic::error(format!("diode `{}` overrides: {e}", element.name)),
                        ));
                    } else if p.r_p_rev <= p.r_p_fwd {
                        diags.push((
                            subject(),
                            Diagnostic::warning(format!(
                                "diode `{}` overrides invert r_p ordering (r_p_rev {} <= r_p_fwd {})",
                                element.name, p.r_p_rev, p.r_p_fwd
                            )),
                        ));
                    }
                }
            }
            ElementKind::VSource { np, nn, stimulus } => {
                if np == nn {
                    diags.push((
                        subject(),
                        Diagnostic::error(format!(
                            "source `{}` has both terminals on node `{np}`",
                            element.name
                        )),
                    ));
                }
                match stimulus {
                    Stimulus::Pwl(points) => {
                        if points.is_empty() {
                            diags.push((
                                subject(),
                                Diagnostic::error(format!(
                                    "source `{}` PWL needs at least one breakpoint",
                                    element.name
                                )),
                            ));
                        }
                        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                            diags.push((
                                subject(),
                                Diagnostic::error(format!(
                                    "source `{}` PWL times must be strictly increasing",
                                    element.name
                                )),
                            ));
                        }
                    }
                    Stimulus::Sin { frequency_hz, .. } => {
                        if !(*frequency_hz > 0.0) {
                            diags.push((
                                subject(),
                                Diagnostic::error(format!(
                                    "source `{}` SIN frequency must be positive, got {frequency_hz}",
                                    element.name
                                )),
                            ));
                        }
                    }
                    Stimulus::Dc(_) => {}
                }
            }
        }
    }

    for (name, params) in &circuit.models {
        if let Err(e) = params.validate() {
            diags.push((
                Subject::Model(name.clone()),
                Diagnostic::error(format!("model `{name}`: {e}")),
            ));
        }
    }

    for node in unreachable_nodes(circuit) {
        diags.push((
            Subject::Node(node.clone()),
            Diagnostic::error(format!(
                "node `{node}` is not connected to ground through any element"
            )),
        ));
    }

    diags
}

fn unreachable_nodes(circuit: &Circuit) -> Vec<String> {
    if !circuit.nodes.contains(GROUND) {
        return Vec::new();
    }
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for element in &circuit.elements {
        let [a, b] = element.terminals();
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::from([GROUND]);
    visited.insert(GROUND);
    while let Some(node) = queue.pop_front() {
        for next in adjacency.get(node).into_iter().flatten() {
            if visited.insert(next) {
                queue.push_back(next);
            }
        }
    }
    circuit
        .nodes
        .iter()
        .filter(|n| !visited.contains(n.as_str()))
        .cloned()
        .collect()
}
