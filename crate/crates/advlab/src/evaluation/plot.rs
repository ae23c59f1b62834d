//! Deterministic SVG line plots of sweep reports: one polyline per method,
//! x = epsilon, y = the selected accuracy metric.

use std::str::FromStr;

use crate::error::{Error, Result};

use super::{SweepReport, SweepRow};

/// Plot rectangle inside the SVG canvas as (x0, y0, width, height).
/// Accuracy a maps to pixel y0 + (1 - a) * height; epsilon maps linearly
/// onto [x0, x0 + width].
pub const PLOT_AREA: (f64, f64, f64, f64) = (70.0, 40.0, 400.0, 330.0);

const CANVAS_W: f64 = 640.0;
const CANVAS_H: f64 = 440.0;

/// Which accuracy column to plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Top1Rel,
    Top5Rel,
    Top1Gt,
    Top5Gt,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Top1Rel => "top1_rel",
            Metric::Top5Rel => "top5_rel",
            Metric::Top1Gt => "top1_gt",
            Metric::Top5Gt => "top5_gt",
        }
    }

    pub fn of(&self, row: &SweepRow) -> f64 {
        match self {
            Metric::Top1Rel => row.top1_rel,
            Metric::Top5Rel => row.top5_rel,
            Metric::Top1Gt => row.top1_gt,
            Metric::Top5Gt => row.top5_gt,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric> {
        match s {
            "top1_rel" => Ok(Metric::Top1Rel),
            "top5_rel" => Ok(Metric::Top5Rel),
            "top1_gt" => Ok(Metric::Top1Gt),
            "top5_gt" => Ok(Metric::Top5Gt),
            other => Err(Error::arg(format!(
                "unknown metric {other:?} (expected top1_rel, top5_rel, top1_gt, or top5_gt)"
            ))),
        }
    }
}

fn method_color(name: &str) -> &'static str {
    match name {
        "fgsm" => "#1f77b4",
        "iterative" => "#ff7f0e",
        _ => "#2ca02c",
    }
}

/// Renders the report as an SVG 1.1 document: axes, ticks, a legend, and
/// one polyline per method. Output text is deterministic.
pub fn render_plot_svg(report: &SweepReport, metric: Metric) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::arg("cannot plot an empty report"));
    }
    let (x0, y0, pw, ph) = PLOT_AREA;

    let mut eps_values: Vec<f64> = report.rows.iter().map(|r| r.epsilon).collect();
    eps_values.sort_by(f64::total_cmp);
    eps_values.dedup();
    let eps_min = eps_values[0];
    let eps_max = *eps_values.last().expect("non-empty");
    let x_of = |eps: f64| -> f64 {
        if eps_max > eps_min {
            x0 + (eps - eps_min) / (eps_max - eps_min) * pw
        } else {
            x0 + pw / 2.0
        }
    };
    let y_of = |acc: f64| -> f64 { y0 + (1.0 - acc) * ph };

    let mut methods = Vec::new();
    for row in &report.rows {
        if !methods.contains(&row.method) {
            methods.push(row.method);
        }
    }

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{} vs epsilon</text>\n",
        x0 + pw / 2.0,
        metric.name()
    ));

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        y0 + ph,
        x0 + pw,
        y0 + ph
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        y0 + ph
    ));

    // Y ticks every 0.25.
    for i in 0..=4 {
        let acc = i as f64 * 0.25;
        let y = y_of(acc);
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{acc:.2}</text>\n",
            x0 - 9.0,
            y + 4.0
        ));
    }

    // X ticks at each epsilon in the grid.
    for &eps in &eps_values {
        let x = x_of(eps);
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            y0 + ph,
            y0 + ph + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{eps:.3}</text>\n",
            y0 + ph + 18.0
        ));
    }

    // Axis titles.
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">epsilon</text>\n",
        x0 + pw / 2.0,
        y0 + ph + 40.0
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        y0 + ph / 2.0,
        y0 + ph / 2.0,
        metric.name()
    ));

    // One polyline (plus point markers) per method, rows in epsilon order.
    for &method in &methods {
        let mut rows: Vec<&SweepRow> = report
            .rows
            .iter()
            .filter(|r| r.method == method)
            .collect();
        rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        let color = method_color(method.name());
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x_of(r.epsilon), y_of(metric.of(r))))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        for r in &rows {
            svg.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                x_of(r.epsilon),
                y_of(metric.of(r))
            ));
        }
    }

    // Legend.
    for (i, &method) in methods.iter().enumerate() {
        let ly = y0 + 14.0 + i as f64 * 20.0;
        let lx = x0 + pw + 16.0;
        let color = method_color(method.name());
        svg.push_str(&format!(
            "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            method.name()
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
