//! Plot-script emission.
//!
//! Analyses emit a small declarative text file next to each CSV instead of
//! invoking a plotting runtime. The grammar (documented in the README) is
//! line oriented:
//!
//! ```text
//! # ionplot 1
//! title <text>
//! xlabel <text>
//! ylabel <text>
//! xscale log|linear
//! yscale log|linear
//! curve <csv-file> x=<column> y=<column> [group=<column>] [label=<text>]
//! ```
//!
//! `group` asks for one line per distinct value of the named column.

use std::io::Write;

#[derive(Debug, Clone)]
pub struct PlotCurve {
    pub csv: String,
    pub x: String,
    pub y: String,
    pub group: Option<String>,
    pub label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub curves: Vec<PlotCurve>,
}

impl PlotSpec {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            curves: Vec::new(),
        }
    }

    pub fn curve(mut self, csv: impl Into<String>, x: impl Into<String>, y: impl Into<String>) -> Self {
        self.curves.push(PlotCurve {
            csv: csv.into(),
            x: x.into(),
            y: y.into(),
            group: None,
            label: None,
        });
        self
    }

    pub fn grouped_curve(
        mut self,
        csv: impl Into<String>,
        x: impl Into<String>,
        y: impl Into<String>,
        group: impl Into<String>,
    ) -> Self {
        self.curves.push(PlotCurve {
            csv: csv.into(),
            x: x.into(),
            y: y.into(),
            group: Some(group.into()),
            label: None,
        });
        self
    }

    pub fn with_log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        let scale = |log: bool| if log { "log" } else { "linear" };
        let mut text = String::from("# ionplot 1\n");
        text.push_str(&format!("title {}\n", self.title));
        text.push_str(&format!("xlabel {}\n", self.x_label));
        text.push_str(&format!("ylabel {}\n", self.y_label));
        text.push_str(&format!("xscale {}\n", scale(self.log_x)));
        text.push_str(&format!("yscale {}\n", scale(self.log_y)));
        for c in &self.curves {
            text.push_str(&format!("curve {} x={} y={}", c.csv, c.x, c.y));
            if let Some(g) = &c.group {
                text.push_str(&format!(" group={g}"));
            }
            if let Some(l) = &c.label {
                text.push_str(&format!(" label={l}"));
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_layout_is_stable() {
        let spec = PlotSpec::new("t", "x", "y")
            .with_log_x()
            .grouped_curve("data.csv", "rr", "max_n", "sigma_scale");
        let mut buf = Vec::new();
        spec.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# ionplot 1\n"));
        assert!(text.contains("xscale log"));
        assert!(text.contains("curve data.csv x=rr y=max_n group=sigma_scale"));
    }
}
