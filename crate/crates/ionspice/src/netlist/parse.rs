//! Netlist text parser.
//!
//! Line oriented: `*` starts a comment line, `.model` declares a parameter
//! set, `.end` stops parsing, every other non-blank line is one element.
//! Model declarations may appear anywhere in the file, including after the
//! diodes that reference them.

use super::validate::{validate_with_subjects, Severity, Subject};
use super::{Circuit, Diagnostic, Element, ElementKind, Stimulus};
use crate::model::DiodeParams;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
struct Token {
    text: String,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (i, ch) in line.chars().enumerate() {
        let col = i + 1;
        if ch.is_whitespace() || matches!(ch, '(' | ')' | '=') {
            if !current.is_empty() {
                tokens.push(Token {
                    text: std::mem::take(&mut current),
                    col: start,
                });
            }
            if !ch.is_whitespace() {
                tokens.push(Token {
                    text: ch.to_string(),
                    col,
                });
            }
        } else {
            if current.is_empty() {
                start = col;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        tokens.push(Token { text: current, col: start });
    }
    tokens
}

struct LineCtx<'a> {
    line_no: usize,
    tokens: &'a [Token],
    pos: usize,
    diags: &'a mut Vec<Diagnostic>,
}

impl<'a> LineCtx<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, what: &str) -> Option<Token> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Some(t.clone())
            }
            None => {
                let col = self.tokens.last().map(|t| t.col + t.text.len()).unwrap_or(1);
                self.error(col, format!("expected {what}, found end of line"));
                None
            }
        }
    }

    fn next_word(&mut self, what: &str) -> Option<Token> {
        let t = self.next(what)?;
        if matches!(t.text.as_str(), "(" | ")" | "=") {
            self.error(t.col, format!("expected {what}, found `{}`", t.text));
            return None;
        }
        Some(t)
    }

    fn next_number(&mut self, what: &str) -> Option<f64> {
        let t = self.next_word(what)?;
        match t.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.error(t.col, format!("expected {what}, found `{}`", t.text));
                None
            }
        }
    }

    fn expect(&mut self, literal: &str) -> bool {
        match self.next(&format!("`{literal}`")) {
            Some(t) if t.text == literal => true,
            Some(t) => {
                self.error(t.col, format!("expected `{literal}`, found `{}`", t.text));
                false
            }
            None => false,
        }
    }

    fn error(&mut self, col: usize, message: String) {
        self.diags
            .push(Diagnostic::error(message).at(self.line_no, col));
    }

    /// Reports any trailing tokens on the line as an error.
    fn finish(&mut self) {
        if let Some(t) = self.peek() {
            let (col, text) = (t.col, t.text.clone());
            self.error(col, format!("unexpected trailing `{text}`"));
        }
    }

    /// Parses a run of `key=value` pairs until end of line.
    fn kv_pairs(&mut self) -> Vec<(String, f64, usize)> {
        let mut pairs = Vec::new();
        while self.peek().is_some() {
            let key = match self.next_word("parameter name") {
                Some(t) => t,
                None => break,
            };
            if !self.expect("=") {
                break;
            }
            let value = match self.next_number("parameter value") {
                Some(v) => v,
                None => break,
            };
            pairs.push((key.text, value, key.col));
        }
        pairs
    }
}

fn apply_params(
    base: DiodeParams,
    pairs: &[(String, f64, usize)],
    line_no: usize,
    diags: &mut Vec<Diagnostic>,
) -> DiodeParams {
    let mut params = base;
    for (key, value, col) in pairs {
        match key.as_str() {
            "r_e" => params.r_e = *value,
            "r_p_fwd" => params.r_p_fwd = *value,
            "r_p_rev" => params.r_p_rev = *value,
            "c_p_fwd" => params.c_p_fwd = *value,
            "c_p_rev" => params.c_p_rev = *value,
            other => diags.push(
                Diagnostic::error(format!("unknown model parameter `{other}`")).at(line_no, *col),
            ),
        }
    }
    params
}

/// Parses netlist text into a [`Circuit`] with all invariants established.
///
/// On failure returns every diagnostic found, each with a 1-based
/// line/column location. Warnings alone do not fail the parse; retrieve
/// them with [`super::validate`].
pub fn parse(text: &str) -> Result<Circuit, Vec<Diagnostic>> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut circuit = Circuit::new();

    // Location bookkeeping for structural diagnostics.
    let mut element_lines: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut node_lines: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut model_lines: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        if trimmed.to_ascii_lowercase().starts_with(".end") {
            break;
        }
        lines.push((line_no, tokenize(raw)));
    }

    // Model declarations first so elements can reference them regardless of
    // file order.
    for (line_no, tokens) in &lines {
        if tokens[0].text.to_ascii_lowercase() != ".model" {
            continue;
        }
        let mut ctx = LineCtx {
            line_no: *line_no,
            tokens,
            pos: 1,
            diags: &mut diags,
        };
        let Some(name) = ctx.next_word("model name") else {
            continue;
        };
        let Some(kind) = ctx.next_word("model kind") else {
            continue;
        };
        if kind.text.to_ascii_lowercase() != "iontronic" {
            ctx.error(kind.col, format!("unknown model kind `{}`", kind.text));
            continue;
        }
        let pairs = ctx.kv_pairs();
        let params = apply_params(DiodeParams::default(), &pairs, *line_no, &mut diags);
        if circuit.models.insert(name.text.clone(), params).is_some() {
            diags.push(
                Diagnostic::error(format!("duplicate model `{}`", name.text))
                    .at(*line_no, name.col),
            );
        }
        model_lines.insert(name.text.clone(), (*line_no, name.col));
    }

    for (line_no, tokens) in &lines {
        let first = &tokens[0];
        if first.text.starts_with('.') {
            if first.text.to_ascii_lowercase() != ".model" {
                diags.push(
                    Diagnostic::error(format!("unknown directive `{}`", first.text))
                        .at(*line_no, first.col),
                );
            }
            continue;
        }
        let mut ctx = LineCtx {
            line_no: *line_no,
            tokens,
            pos: 0,
            diags: &mut diags,
        };
        let Some(name) = ctx.next_word("element name") else {
            continue;
        };
        let kind_letter = name.text.chars().next().unwrap_or(' ').to_ascii_uppercase();
        let kind = match kind_letter {
            'D' => {
                let (Some(anode), Some(cathode), Some(model)) = (
                    ctx.next_word("anode node"),
                    ctx.next_word("cathode node"),
                    ctx.next_word("model name"),
                ) else {
                    continue;
                };
                let pairs = ctx.kv_pairs();
                let overrides = if pairs.is_empty() {
                    None
                } else {
                    let base = circuit
                        .models
                        .get(&model.text)
                        .copied()
                        .unwrap_or_default();
                    Some(apply_params(base, &pairs, *line_no, &mut diags))
                };
                for t in [&anode, &cathode] {
                    node_lines.entry(t.text.clone()).or_insert((*line_no, t.col));
                }
                ElementKind::IontronicDiode {
                    model: model.text,
                    anode: anode.text,
                    cathode: cathode.text,
                    overrides,
                }
            }
            'R' | 'C' => {
                let (Some(n1), Some(n2), Some(value)) = (
                    ctx.next_word("node"),
                    ctx.next_word("node"),
                    ctx.next_number("value"),
                ) else {
                    continue;
                };
                ctx.finish();
                for t in [&n1, &n2] {
                    node_lines.entry(t.text.clone()).or_insert((*line_no, t.col));
                }
                if kind_letter == 'R' {
                    ElementKind::Resistor {
                        n1: n1.text,
                        n2: n2.text,
                        ohms: value,
                    }
                } else {
                    ElementKind::Capacitor {
                        n1: n1.text,
                        n2: n2.text,
                        farads: value,
                    }
                }
            }
            'V' => {
                let (Some(np), Some(nn)) = (ctx.next_word("positive node"), ctx.next_word("negative node"))
                else {
                    continue;
                };
                for t in [&np, &nn] {
                    node_lines.entry(t.text.clone()).or_insert((*line_no, t.col));
                }
                let Some(stim) = parse_stimulus(&mut ctx) else {
                    continue;
                };
                ctx.finish();
                ElementKind::VSource {
                    np: np.text,
                    nn: nn.text,
                    stimulus: stim,
                }
            }
            other => {
                ctx.error(
                    name.col,
                    format!("unknown element kind `{other}` (expected D, R, C or V)"),
                );
                continue;
            }
        };
        element_lines
            .entry(name.text.clone())
            .or_insert((*line_no, name.col));
        let element = Element {
            name: name.text,
            kind,
        };
        for terminal in element.terminals() {
            circuit.nodes.insert(terminal.to_string());
        }
        circuit.elements.push(element);
    }

    // Structural validation with source locations attached.
    for (subject, diag) in validate_with_subjects(&circuit) {
        if diag.severity == Severity::Warning {
            continue;
        }
        let location = match &subject {
            Subject::Element(name) => element_lines.get(name).copied(),
            Subject::Node(name) => node_lines.get(name).copied(),
            Subject::Model(name) => model_lines.get(name).copied(),
            Subject::Whole => Some((1, 1)),
        };
        let (line, col) = location.unwrap_or((1, 1));
        diags.push(diag.at(line, col));
    }

    if diags.is_empty() {
        Ok(circuit)
    } else {
        diags.sort_by_key(|d| d.location);
        Err(diags)
    }
}

fn parse_stimulus(ctx: &mut LineCtx) -> Option<Stimulus> {
    let kind = ctx.next_word("stimulus kind (DC, PWL or SIN)")?;
    match kind.text.to_ascii_uppercase().as_str() {
        "DC" => Some(Stimulus::Dc(ctx.next_number("DC value")?)),
        "PWL" => {
            if !ctx.expect("(") {
                return None;
            }
            let mut points = Vec::new();
            loop {
                match ctx.peek() {
                    Some(t) if t.text == ")" => {
                        ctx.pos += 1;
                        break;
                    }
                    Some(_) => {
                        let t = ctx.next_number("breakpoint time")?;
                        let v = ctx.next_number("breakpoint value")?;
                        points.push((t, v));
                    }
                    None => {
                        ctx.error(kind.col, "unterminated PWL list".into());
                        return None;
                    }
                }
            }
            if points.is_empty() {
                ctx.error(kind.col, "PWL needs at least one (time value) pair".into());
                return None;
            }
            Some(Stimulus::Pwl(points))
        }
        "SIN" => {
            if !ctx.expect("(") {
                return None;
            }
            let offset = ctx.next_number("SIN offset")?;
            let amplitude = ctx.next_number("SIN amplitude")?;
            let frequency_hz = ctx.next_number("SIN frequency")?;
            let phase_rad = match ctx.peek() {
                Some(t) if t.text != ")" => ctx.next_number("SIN phase")?,
                _ => 0.0,
            };
            if !ctx.expect(")") {
                return None;
            }
            Some(Stimulus::Sin {
                offset,
                amplitude,
                frequency_hz,
                phase_rad,
            })
        }
        other => {
            ctx.error(kind.col, format!("unknown stimulus kind `{other}`"));
            None
        }
    }
}
