//! Dependency-free SVG line plots.
//!
//! One plot is a titled axes box with a fixed tick layout, one polyline per
//! series, and a legend naming each series by its sweep value. Output is a
//! standalone SVG document (own size, white background, no external
//! references), so the files drop into reports unchanged. Rendering is pure
//! string assembly and therefore byte-deterministic.

use std::path::Path;

use crate::csvio::write_text;
use crate::error::CliError;

/// One plotted series: a legend label and data points in axis coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgSeries {
    /// Legend entry.
    pub label: String,
    /// Data points (x, y); non-finite points are skipped.
    pub points: Vec<(f64, f64)>,
}

/// A complete plot description.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgPlot {
    /// Title centered above the axes.
    pub title: String,
    /// Horizontal axis label.
    pub x_label: String,
    /// Vertical axis label.
    pub y_label: String,
    /// Horizontal axis range (min, max).
    pub x_range: (f64, f64),
    /// Vertical axis range (min, max).
    pub y_range: (f64, f64),
    /// The curves, drawn and listed in order.
    pub series: Vec<SvgSeries>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PLOT_LEFT: f64 = 70.0;
const PLOT_RIGHT: f64 = 600.0;
const PLOT_TOP: f64 = 40.0;
const PLOT_BOTTOM: f64 = 420.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        String::from("0")
    } else {
        String::from(s)
    }
}

/// Renders the plot as a standalone SVG document.
pub fn render_svg(plot: &SvgPlot) -> String {
    let (x0, x1) = plot.x_range;
    let (y0, y1) = plot.y_range;
    let x_span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let y_span = if y1 > y0 { y1 - y0 } else { 1.0 };
    let px = |x: f64| PLOT_LEFT + (x - x0) / x_span * (PLOT_RIGHT - PLOT_LEFT);
    let py = |y: f64| PLOT_BOTTOM - (y - y0) / y_span * (PLOT_BOTTOM - PLOT_TOP);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        escape(&plot.title)
    ));

    // Axes box and ticks.
    svg.push_str(&format!(
        "  <rect x=\"{PLOT_LEFT}\" y=\"{PLOT_TOP}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        PLOT_RIGHT - PLOT_LEFT,
        PLOT_BOTTOM - PLOT_TOP
    ));
    for k in 0..=TICKS {
        let f = k as f64 / TICKS as f64;
        let xv = x0 + f * x_span;
        let xp = px(xv);
        svg.push_str(&format!(
            "  <line x1=\"{xp:.1}\" y1=\"{PLOT_BOTTOM}\" x2=\"{xp:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            PLOT_BOTTOM + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{xp:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
            PLOT_BOTTOM + 20.0,
            tick_label(xv)
        ));
        let yv = y0 + f * y_span;
        let yp = py(yv);
        svg.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{yp:.1}\" x2=\"{PLOT_LEFT}\" y2=\"{yp:.1}\" stroke=\"black\"/>\n",
            PLOT_LEFT - 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
            PLOT_LEFT - 9.0,
            yp + 4.0,
            tick_label(yv)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        PLOT_BOTTOM + 45.0,
        escape(&plot.x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"20\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        (PLOT_TOP + PLOT_BOTTOM) / 2.0,
        escape(&plot.y_label)
    ));

    // Curves.
    for (k, series) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }

    // Legend, top-left inside the axes.
    for (k, series) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = PLOT_TOP + 18.0 + 18.0 * k as f64;
        svg.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            PLOT_LEFT + 12.0,
            PLOT_LEFT + 40.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
            PLOT_LEFT + 46.0,
            y + 4.0,
            escape(&series.label)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

/// Renders and writes a plot.
///
/// # Errors
///
/// `Validation` with the path in the message on IO failure.
pub fn write_svg_plot(plot: &SvgPlot, path: &Path) -> Result<(), CliError> {
    write_text(path, &render_svg(plot))
}
