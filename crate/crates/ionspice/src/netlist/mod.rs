//! Circuit data model and the text netlist format.
//!
//! The format is SPICE-inspired and line oriented: one element per line,
//! `*` comments, `.model <name> iontronic <k=v ...>` directives, optional
//! `.end`. Node names are arbitrary identifiers and `0` is ground. Values
//! are plain SI numbers in decimal or scientific notation; there are no
//! suffix multipliers.
//!
//! ```text
//! * single diode driven at 1 V
//! .model iontronic iontronic r_e=5.5e5 r_p_fwd=2.9e5 r_p_rev=4.84e7 c_p_fwd=3.74e-4 c_p_rev=9.93e-7
//! V1 in 0 DC 1
//! D1 in 0 iontronic
//! .end
//! ```
//!
//! Element kind is determined by the first letter of the element name:
//! `D` iontronic diode, `R` resistor, `C` capacitor, `V` voltage source.
//! Diode lines may carry `k=v` overrides after the model name; the
//! Monte Carlo machinery uses these to inject sampled per-diode parameters.

mod parse;
mod serialize;
mod validate;

pub use parse::parse;
pub use serialize::serialize;
pub use validate::{is_valid, validate, Diagnostic, Severity};

use crate::model::DiodeParams;
use std::collections::{BTreeMap, BTreeSet};

/// Name of the distinguished ground node.
pub const GROUND: &str = "0";

/// Time-dependent description of an independent voltage source.
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    /// Constant value.
    Dc(f64),
    /// Piecewise-linear breakpoints `(time, volts)`; linear interpolation
    /// between points, first value held before the first point, last value
    /// held afterwards. Times must be strictly increasing.
    Pwl(Vec<(f64, f64)>),
    /// `offset + amplitude * sin(2 pi f t + phase)`.
    Sin {
        offset: f64,
        amplitude: f64,
        frequency_hz: f64,
        phase_rad: f64,
    },
}

impl Stimulus {
    /// Source value at time `t` (seconds). DC analyses use `value_at(0.0)`.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Stimulus::Dc(v) => *v,
            Stimulus::Pwl(points) => {
                match points.iter().position(|(pt, _)| *pt > t) {
                    Some(0) => points[0].1,
                    None => points.last().map(|(_, v)| *v).unwrap_or(0.0),
                    Some(i) => {
                        let (t0, v0) = points[i - 1];
                        let (t1, v1) = points[i];
                        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                    }
                }
            }
            Stimulus::Sin {
                offset,
                amplitude,
                frequency_hz,
                phase_rad,
            } => offset + amplitude * (2.0 * std::f64::consts::PI * frequency_hz * t + phase_rad).sin(),
        }
    }
}

/// A circuit element. The payload carries terminal node names.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    IontronicDiode {
        model: String,
        anode: String,
        cathode: String,
        /// Per-instance parameter overrides, used by Monte Carlo sampling.
        overrides: Option<DiodeParams>,
    },
    Resistor {
        n1: String,
        n2: String,
        ohms: f64,
    },
    Capacitor {
        n1: String,
        n2: String,
        farads: f64,
    },
    VSource {
        np: String,
        nn: String,
        stimulus: Stimulus,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
}

impl Element {
    /// Terminal node names of this element.
    pub fn terminals(&self) -> [&str; 2] {
        match &self.kind {
            ElementKind::IontronicDiode { anode, cathode, .. } => [anode, cathode],
            ElementKind::Resistor { n1, n2, .. } => [n1, n2],
            ElementKind::Capacitor { n1, n2, .. } => [n1, n2],
            ElementKind::VSource { np, nn, .. } => [np, nn],
        }
    }
}

/// Node/element graph consumed by the solver.
///
/// `nodes` always contains ground. Elements keep their insertion order;
/// `models` maps model names to diode parameter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub nodes: BTreeSet<String>,
    pub elements: Vec<Element>,
    pub models: BTreeMap<String, DiodeParams>,
}

impl Default for Circuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Circuit {
    /// Empty circuit containing only the ground node.
    pub fn new() -> Self {
        let mut nodes = BTreeSet::new();
        nodes.insert(GROUND.to_string());
        Self {
            nodes,
            elements: Vec::new(),
            models: BTreeMap::new(),
        }
    }

    pub fn add_model(&mut self, name: impl Into<String>, params: DiodeParams) -> &mut Self {
        self.models.insert(name.into(), params);
        self
    }

    pub fn add_diode(
        &mut self,
        name: impl Into<String>,
        anode: impl Into<String>,
        cathode: impl Into<String>,
        model: impl Into<String>,
    ) -> &mut Self {
        let anode = anode.into();
        let cathode = cathode.into();
        self.nodes.insert(anode.clone());
        self.nodes.insert(cathode.clone());
        self.elements.push(Element {
            name: name.into(),
            kind: ElementKind::IontronicDiode {
                model: model.into(),
                anode,
                cathode,
                overrides: None,
            },
        });
        self
    }

    pub fn add_resistor(
        &mut self,
        name: impl Into<String>,
        n1: impl Into<String>,
        n2: impl Into<String>,
        ohms: f64,
    ) -> &mut Self {
        let n1 = n1.into();
        let n2 = n2.into();
        self.nodes.insert(n1.clone());
        self.nodes.insert(n2.clone());
        self.elements.push(Element {
            name: name.into(),
            kind: ElementKind::Resistor { n1, n2, ohms },
        });
        self
    }

    pub fn add_capacitor(
        &mut self,
        name: impl Into<String>,
        n1: impl Into<String>,
        n2: impl Into<String>,
        farads: f64,
    ) -> &mut Self {
        let n1 = n1.into();
        let n2 = n2.into();
        self.nodes.insert(n1.clone());
        self.nodes.insert(n2.clone());
        self.elements.push(Element {
            name: name.into(),
            kind: ElementKind::Capacitor { n1, n2, farads },
        });
        self
    }

    pub fn add_vsource(
        &mut self,
        name: impl Into<String>,
        np: impl Into<String>,
        nn: impl Into<String>,
        stimulus: Stimulus,
    ) -> &mut Self {
        let np = np.into();
        let nn = nn.into();
        self.nodes.insert(np.clone());
        self.nodes.insert(nn.clone());
        self.elements.push(Element {
            name: name.into(),
            kind: ElementKind::VSource { np, nn, stimulus },
        });
        self
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.name == name)
    }

    /// Names of all iontronic diodes, in element order.
    pub fn diode_names(&self) -> Vec<&str> {
        self.elements
            .iter()
            .filter(|e| matches!(e.kind, ElementKind::IontronicDiode { .. }))
            .map(|e| e.name.as_str())
            .collect()
    }

    /// Effective parameters of a diode element: per-instance overrides when
    /// present, otherwise the referenced model block.
    pub fn diode_params(&self, element: &Element) -> Option<DiodeParams> {
        match &element.kind {
            ElementKind::IontronicDiode {
                model, overrides, ..
            } => (*overrides).or_else(|| self.models.get(model).copied()),
            _ => None,
        }
    }

    /// Sets the override parameter block of the named diode.
    pub fn set_diode_overrides(&mut self, name: &str, params: DiodeParams) -> bool {
        if let Some(Element {
            kind: ElementKind::IontronicDiode { overrides, .. },
            ..
        }) = self.element_mut(name)
        {
            *overrides = Some(params);
            true
        } else {
            false
        }
    }

    /// Replaces the DC level of the named source (PWL/SIN sources are
    /// replaced by a DC stimulus). Returns false when no such source exists.
    pub fn set_source_value(&mut self, name: &str, volts: f64) -> bool {
        if let Some(Element {
            kind: ElementKind::VSource { stimulus, .. },
            ..
        }) = self.element_mut(name)
        {
            *stimulus = Stimulus::Dc(volts);
            true
        } else {
            false
        }
    }
}

/// Formats a number so it parses back to the identical `f64`.
///
/// Uses plain decimal notation for moderate magnitudes and scientific
/// notation otherwise; both forms are shortest round-trip representations.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let a = x.abs();
    if (1e-3..1e7).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stimulus_pwl_interpolates_and_holds() {
        let s = Stimulus::Pwl(vec![(1.0, 0.0), (3.0, 1.0)]);
        assert_eq!(s.value_at(0.0), 0.0);
        assert_eq!(s.value_at(2.0), 0.5);
        assert_eq!(s.value_at(3.0), 1.0);
        assert_eq!(s.value_at(10.0), 1.0);
    }

    #[test]
    fn stimulus_sin_evaluates() {
        let s = Stimulus::Sin {
            offset: 0.5,
            amplitude: 1.0,
            frequency_hz: 1.0,
            phase_rad: 0.0,
        };
        assert!((s.value_at(0.25) - 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn format_number_round_trips(x in prop::num::f64::NORMAL) {
            let s = format_number(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
