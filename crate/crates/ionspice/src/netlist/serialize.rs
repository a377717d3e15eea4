//! Netlist text writer. `parse(serialize(c))` is structurally identical to
//! `c` for every valid circuit: numbers are written in shortest round-trip
//! form and element order is preserved.

use super::{format_number, Circuit, ElementKind, Stimulus};
use crate::model::DiodeParams;

pub fn serialize(circuit: &Circuit) -> String {
    let mut out = String::from("* ionspice netlist\n");
    for (name, params) in &circuit.models {
        out.push_str(&format!(".model {name} iontronic{}\n", params_kv(params)));
    }
    for element in &circuit.elements {
        match &element.kind {
            ElementKind::IontronicDiode {
                model,
                anode,
                cathode,
                overrides,
            } => {
                out.push_str(&format!("{} {anode} {cathode} {model}", element.name));
                if let Some(p) = overrides {
                    out.push_str(&params_kv(p));
                }
                out.push('\n');
            }
            ElementKind::Resistor { n1, n2, ohms } => {
                out.push_str(&format!(
                    "{} {n1} {n2} {}\n",
                    element.name,
                    format_number(*ohms)
                ));
            }
            ElementKind::Capacitor { n1, n2, farads } => {
                out.push_str(&format!(
                    "{} {n1} {n2} {}\n",
                    element.name,
                    format_number(*farads)
                ));
            }
            ElementKind::VSource { np, nn, stimulus } => {
                out.push_str(&format!(
                    "{} {np} {nn} {}\n",
                    element.name,
                    stimulus_text(stimulus)
                ));
            }
        }
    }
    out.push_str(".end\n");
    out
}

fn params_kv(p: &DiodeParams) -> String {
    format!(
        " r_e={} r_p_fwd={} r_p_rev={} c_p_fwd={} c_p_rev={}",
        format_number(p.r_e),
        format_number(p.r_p_fwd),
        format_number(p.r_p_rev),
        format_number(p.c_p_fwd),
        format_number(p.c_p_rev)
    )
}

fn stimulus_text(stimulus: &Stimulus) -> String {
    match stimulus {
        Stimulus::Dc(v) => format!("DC {}", format_number(*v)),
        Stimulus::Pwl(points) => {
            let body: Vec<String> = points
                .iter()
                .map(|(t, v)| format!("{} {}", format_number(*t), format_number(*v)))
                .collect();
            format!("PWL({})", body.join(" "))
        }
        Stimulus::Sin {
            offset,
            amplitude,
            frequency_hz,
            phase_rad,
        } => format!(
            "SIN({} {} {} {})",
            format_number(*offset),
            format_number(*amplitude),
            format_number(*frequency_hz),
            format_number(*phase_rad)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_circuit_serializes_to_header_only() {
        let text = serialize(&Circuit::new());
        assert_eq!(text, "* ionspice netlist\n.end\n");
        assert_eq!(parse(&text).unwrap(), Circuit::new());
    }

    #[test]
    fn one_diode_round_trips() {
        let mut c = Circuit::new();
        c.add_model("m", DiodeParams::default());
        c.add_vsource("V1", "a", "0", Stimulus::Dc(1.0));
        c.add_diode("D1", "a", "0", "m");
        assert_eq!(parse(&serialize(&c)).unwrap(), c);
    }

    #[test]
    fn overrides_round_trip() {
        let mut c = Circuit::new();
        c.add_model("m", DiodeParams::default());
        c.add_vsource("V1", "a", "0", Stimulus::Dc(1.0));
        c.add_diode("D1", "a", "0", "m");
        let sampled = DiodeParams {
            r_p_fwd: 3.17e5,
            r_p_rev: 5.2e7,
            ..DiodeParams::default()
        };
        c.set_diode_overrides("D1", sampled);
        assert_eq!(parse(&serialize(&c)).unwrap(), c);
    }

    fn arb_valid_circuit() -> impl Strategy<Value = Circuit> {
        // A star of resistors/capacitors/sources around ground plus a few
        // diodes; every node touches ground so the result is always valid.
        let leg = (0u8..4, prop::num::f64::POSITIVE.prop_map(|x| x.clamp(1e-6, 1e9)));
        prop::collection::vec(leg, 1..8).prop_map(|legs| {
            let mut c = Circuit::new();
            c.add_model("m", DiodeParams::default());
            for (i, (kind, value)) in legs.into_iter().enumerate() {
                let node = format!("n{i}");
                match kind {
                    0 => c.add_resistor(format!("R{i}"), node, "0", value),
                    1 => c.add_capacitor(format!("C{i}"), node, "0", value),
                    2 => c.add_diode(format!("D{i}"), node, "0", "m"),
                    _ => c.add_vsource(
                        format!("V{i}"),
                        node,
                        "0",
                        Stimulus::Pwl(vec![(0.0, 0.0), (1.0, value.min(10.0))]),
                    ),
                };
            }
            c
        })
    }

    proptest! {
        #[test]
        fn parse_serialize_is_identity(c in arb_valid_circuit()) {
            let text = serialize(&c);
            let back = parse(&text).expect("serialized circuit must parse");
            prop_assert_eq!(back, c);
        }
    }
}
