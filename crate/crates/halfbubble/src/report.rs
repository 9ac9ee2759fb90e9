//! Emission of CSV tables, structured-text reports and self-contained SVG
//! line plots. Every file embeds the config hash and the tool version, and
//! the numeric payloads are formatted deterministically.

use std::fmt::Write as _;

/// Common header lines carried by every emitted file.
#[derive(Debug, Clone, Copy)]
pub struct Provenance {
    pub config_hash: u64,
    pub tool_version: &'static str,
}

impl Provenance {
    pub fn new(config_hash: u64) -> Provenance {
        Provenance {
            config_hash,
            tool_version: crate::TOOL_VERSION,
        }
    }
}

/// Fixed-precision float formatting for payload cells (17 significant
/// digits: lossless and byte-stable).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with leading `# key=value` comment lines and a header row.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(prov: &Provenance, header: &[&str]) -> Csv {
        let mut buf = String::new();
        let _ = writeln!(buf, "# tool_version={}", prov.tool_version);
        let _ = writeln!(buf, "# config_hash={:016x}", prov.config_hash);
        let _ = writeln!(buf, "{}", header.join(","));
        Csv {
            buf,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns);
        let cells: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(self.buf, "{}", cells.join(","));
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Structured text report: sections of aligned `key = value` lines plus
/// PASS/FAIL check lines.
pub struct Report {
    buf: String,
    checks_failed: usize,
    checks_total: usize,
}

impl Report {
    pub fn new(title: &str, prov: &Provenance) -> Report {
        let mut buf = String::new();
        let _ = writeln!(buf, "# {title}");
        let _ = writeln!(buf, "tool_version = {}", prov.tool_version);
        let _ = writeln!(buf, "config_hash = {:016x}", prov.config_hash);
        Report {
            buf,
            checks_failed: 0,
            checks_total: 0,
        }
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.buf, "\n[{name}]");
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.buf, "{key} = {value}");
    }

    pub fn kv_f64(&mut self, key: &str, value: f64) {
        let _ = writeln!(self.buf, "{key} = {}", fmt_f64(value));
    }

    /// A named check line; accumulates the overall verdict.
    pub fn check(&mut self, name: &str, pass: bool, detail: impl std::fmt::Display) {
        self.checks_total += 1;
        if !pass {
            self.checks_failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        let _ = writeln!(self.buf, "{verdict} {name}: {detail}");
    }

    pub fn all_passed(&self) -> bool {
        self.checks_failed == 0
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} of {} checks passed",
            self.checks_total - self.checks_failed,
            self.checks_total
        )
    }

    pub fn finish(mut self) -> (String, bool) {
        let ok = self.all_passed();
        let line = self.summary_line();
        let _ = writeln!(self.buf, "\nsummary = {line}");
        (self.buf, ok)
    }
}

// ─────────────────────────────────────────────────────────────────────────
// SVG line plots
// ─────────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Linear,
    Log,
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Minimal self-contained SVG line plot with linear or logarithmic axes and
/// optional vertical marker lines.
pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub series: Vec<Series<'a>>,
    pub vertical_markers: Vec<(f64, &'a str)>,
}

const PLOT_W: f64 = 720.0;
const PLOT_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn axis_transform(v: f64, axis: Axis) -> f64 {
    match axis {
        Axis::Linear => v,
        Axis::Log => v.log10(),
    }
}

impl Plot<'_> {
    pub fn render(&self, prov: &Provenance) -> String {
        let tx = |v: f64| axis_transform(v, self.x_axis);
        let ty = |v: f64| axis_transform(v, self.y_axis);
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if self.x_axis == Axis::Log && x <= 0.0 {
                    continue;
                }
                if self.y_axis == Axis::Log && y <= 0.0 {
                    continue;
                }
                xs.push(tx(x));
                ys.push(ty(y));
            }
        }
        for &(x, _) in &self.vertical_markers {
            if !(self.x_axis == Axis::Log && x <= 0.0) {
                xs.push(tx(x));
            }
        }
        let (x_lo, x_hi) = span(&xs);
        let (y_lo, y_hi) = span(&ys);
        let px = |v: f64| MARGIN_L + (tx(v) - x_lo) / (x_hi - x_lo) * (PLOT_W - MARGIN_L - MARGIN_R);
        let py =
            |v: f64| PLOT_H - MARGIN_B - (ty(v) - y_lo) / (y_hi - y_lo) * (PLOT_H - MARGIN_T - MARGIN_B);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
        );
        let _ = writeln!(
            svg,
            "<!-- tool_version={} config_hash={:016x} -->",
            prov.tool_version, prov.config_hash
        );
        let _ = writeln!(
            svg,
            r#"<rect width="100%" height="100%" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-family="monospace" font-size="15" text-anchor="middle">{}</text>"#,
            PLOT_W / 2.0,
            xml_escape(self.title)
        );
        // frame
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            PLOT_W - MARGIN_L - MARGIN_R,
            PLOT_H - MARGIN_T - MARGIN_B
        );
        // axis ticks: 5 per axis in transformed coordinates
        for k in 0..=4 {
            let fx = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
            let x_px = MARGIN_L + (PLOT_W - MARGIN_L - MARGIN_R) * k as f64 / 4.0;
            let label = match self.x_axis {
                Axis::Linear => format!("{fx:.3}"),
                Axis::Log => format!("1e{fx:.1}"),
            };
            let _ = writeln!(
                svg,
                r##"<line x1="{x_px}" y1="{}" x2="{x_px}" y2="{}" stroke="#999" stroke-dasharray="2,4"/>"##,
                MARGIN_T,
                PLOT_H - MARGIN_B
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x_px}" y="{}" font-family="monospace" font-size="11" text-anchor="middle">{label}</text>"#,
                PLOT_H - MARGIN_B + 18.0
            );
            let fy = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
            let y_px = PLOT_H - MARGIN_B - (PLOT_H - MARGIN_T - MARGIN_B) * k as f64 / 4.0;
            let label = match self.y_axis {
                Axis::Linear => format!("{fy:.4}"),
                Axis::Log => format!("1e{fy:.1}"),
            };
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_L}" y1="{y_px}" x2="{}" y2="{y_px}" stroke="#999" stroke-dasharray="2,4"/>"##,
                PLOT_W - MARGIN_R
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="monospace" font-size="11" text-anchor="end">{label}</text>"#,
                MARGIN_L - 6.0,
                y_px + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="13" text-anchor="middle">{}</text>"#,
            (MARGIN_L + PLOT_W - MARGIN_R) / 2.0,
            PLOT_H - 10.0,
            xml_escape(self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" font-family="monospace" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
            (MARGIN_T + PLOT_H - MARGIN_B) / 2.0,
            xml_escape(self.y_label)
        );
        for (si, s) in self.series.iter().enumerate() {
            let color = COLORS[si % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|&&(x, y)| {
                    !(self.x_axis == Axis::Log && x <= 0.0)
                        && !(self.y_axis == Axis::Log && y <= 0.0)
                })
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-family="monospace" font-size="12" fill="{color}">{}</text>"#,
                MARGIN_L + 10.0,
                MARGIN_T + 16.0 + 16.0 * si as f64,
                xml_escape(s.name)
            );
        }
        for &(x, name) in &self.vertical_markers {
            if self.x_axis == Axis::Log && x <= 0.0 {
                continue;
            }
            let x_px = px(x);
            let _ = writeln!(
                svg,
                r##"<line x1="{x_px}" y1="{MARGIN_T}" x2="{x_px}" y2="{}" stroke="#d62728" stroke-width="1.5" stroke-dasharray="6,3"/>"##,
                PLOT_H - MARGIN_B
            );
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" font-family="monospace" font-size="12" fill="#d62728">{}</text>"##,
                x_px + 4.0,
                MARGIN_T + 14.0,
                xml_escape(name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn span(vals: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape_and_determinism() {
        let prov = Provenance {
            config_hash: 0xdead_beef,
            tool_version: "test 0.0",
        };
        let build = || {
            let mut c = Csv::new(&prov, &["x", "y"]);
            c.row(&[1.0, 2.5]);
            c.row(&[0.1, -3.25e-7]);
            c.finish()
        };
        let a = build();
        assert_eq!(a, build());
        assert!(a.starts_with("# tool_version=test 0.0\n# config_hash=00000000deadbeef\nx,y\n"));
        assert_eq!(a.lines().count(), 5);
    }

    #[test]
    fn report_accumulates_checks() {
        let prov = Provenance {
            config_hash: 1,
            tool_version: "test",
        };
        let mut r = Report::new("demo", &prov);
        r.section("things");
        r.kv_f64("value", 0.5);
        r.check("first", true, "ok");
        r.check("second", false, "off by 2");
        let (text, ok) = r.finish();
        assert!(!ok);
        assert!(text.contains("PASS first"));
        assert!(text.contains("FAIL second"));
        assert!(text.contains("1 of 2 checks passed"));
    }

    #[test]
    fn svg_renders_log_axes() {
        let prov = Provenance {
            config_hash: 2,
            tool_version: "test",
        };
        let plot = Plot {
            title: "demo",
            x_label: "eps",
            y_label: "Q",
            x_axis: Axis::Log,
            y_axis: Axis::Log,
            series: vec![Series {
                name: "composite",
                points: vec![(1e-2, 1e-3), (1e-4, 1e-6), (1e-6, 1e-9)],
            }],
            vertical_markers: vec![(1e-4, "marker")],
        };
        let svg = plot.render(&prov);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("config_hash"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
