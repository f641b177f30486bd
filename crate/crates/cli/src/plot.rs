//! Box plots of per-document scores as standalone SVG.
//!
//! One panel per run, one box per metric. Boxes span the quartiles, whiskers
//! reach the furthest values within 1.5 IQR of the box, and values beyond the
//! whiskers are drawn as points.

use std::fmt::Write as _;

use annoteval_core::bootstrap::interpolated_quantile;
use annoteval_core::EvaluationReport;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub mean: f64,
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| interpolated_quantile(&v, p);
        let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
        let fence = 1.5 * (q3 - q1);
        let inside = |x: &&f64| **x >= q1 - fence && **x <= q3 + fence;
        Some(BoxStats {
            q1,
            median,
            q3,
            whisker_low: *v.iter().find(inside).expect("values inside the fences"),
            whisker_high: *v
                .iter()
                .rev()
                .find(inside)
                .expect("values inside the fences"),
            outliers: v
                .iter()
                .copied()
                .filter(|x| x < &(q1 - fence) || x > &(q3 + fence))
                .collect(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 260.0;
const TOP: f64 = 50.0;
const LEFT: f64 = 50.0;
const PLOT_H: f64 = 180.0;
const METRICS: [&str; 3] = ["Precision", "Recall", "F1"];
const COLORS: [&str; 3] = ["#4c72b0", "#dd8452", "#55a868"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Panel {
    x0: f64,
}

impl Panel {
    fn y(&self, v: f64) -> f64 {
        TOP + PLOT_H * (1.0 - v.clamp(0.0, 1.0))
    }

    fn draw(&self, out: &mut String, name: &str, report: &EvaluationReport<f64>) {
        let x0 = self.x0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{} (n = {})</text>"#,
            x0 + LEFT + (PANEL_W - LEFT) / 2.0,
            escape(name),
            report.scores.len()
        );
        for tick in 0..=5 {
            let v = tick as f64 / 5.0;
            let y = self.y(v);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{v:.1}</text>"##,
                x0 + LEFT,
                x0 + PANEL_W - 10.0,
                x0 + LEFT - 4.0,
                y + 3.0
            );
        }
        let pick: [fn(&annoteval_core::DocumentScore<f64>) -> f64; 3] =
            [|s| s.precision, |s| s.recall, |s| s.f1];
        let slot = (PANEL_W - LEFT - 10.0) / 3.0;
        for (i, metric) in METRICS.iter().enumerate() {
            let cx = x0 + LEFT + slot * (i as f64 + 0.5);
            let values: Vec<f64> = report.scores.iter().map(pick[i]).collect();
            let _ = writeln!(
                out,
                r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-size="11">{metric}</text>"#,
                TOP + PLOT_H + 18.0
            );
            let Some(b) = BoxStats::of(&values) else {
                continue;
            };
            let half = slot * 0.25;
            let _ = writeln!(
                out,
                r##"<g><title>{metric}: median {:.3}, IQR {:.3}-{:.3}, mean {:.3}</title>"##,
                b.median, b.q1, b.q3, b.mean
            );
            let _ = writeln!(
                out,
                r##"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#333"/><line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#333"/>"##,
                self.y(b.whisker_high),
                self.y(b.q3),
                self.y(b.q1),
                self.y(b.whisker_low)
            );
            for w in [b.whisker_low, b.whisker_high] {
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#333"/>"##,
                    cx - half / 2.0,
                    cx + half / 2.0,
                    y = self.y(w)
                );
            }
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}" fill-opacity="0.6" stroke="#333"/>"##,
                cx - half,
                self.y(b.q3),
                2.0 * half,
                (self.y(b.q1) - self.y(b.q3)).max(0.5),
                COLORS[i]
            );
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#000" stroke-width="2"/>"##,
                cx - half,
                cx + half,
                y = self.y(b.median)
            );
            let _ = writeln!(
                out,
                r##"<path d="M{cx:.1} {:.1}l4 4l-4 4l-4 -4z" fill="#fff" stroke="#000"/>"##,
                self.y(b.mean) - 4.0
            );
            for o in &b.outliers {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{cx:.1}" cy="{:.1}" r="2.5" fill="none" stroke="#333"/>"##,
                    self.y(*o)
                );
            }
            out.push_str("</g>\n");
        }
    }
}

/// Side-by-side box plots of per-document precision, recall and F1.
pub fn distribution_svg(runs: &[(&str, &EvaluationReport<f64>)]) -> String {
    let width = PANEL_W * runs.len().max(1) as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{PANEL_H:.0}\" viewBox=\"0 0 {width:.0} {PANEL_H:.0}\" font-family=\"sans-serif\">\n"
    );
    out.push_str("<title>Per-document score distributions (box: quartiles, whiskers: 1.5 IQR, diamond: mean)</title>\n");
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n");
    for (i, (name, report)) in runs.iter().enumerate() {
        Panel {
            x0: PANEL_W * i as f64,
        }
        .draw(&mut out, name, report);
    }
    out.push_str("</svg>\n");
    out
}
