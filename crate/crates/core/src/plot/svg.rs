use std::fmt::Write;

use super::{BarPlotSpec, PlotSpec, Theme, WaterfallSpec};
use crate::format::{fixed, signed};

const LABEL_GUTTER: f64 = 240.0;
const RIGHT_MARGIN: f64 = 90.0;
const TOP_MARGIN: f64 = 56.0;
const BOTTOM_MARGIN: f64 = 70.0;
const AXIS_TICKS: usize = 5;
const MUTED: &str = "#555555";

/// Byte-stable SVG 1.1 for a plot spec.
pub fn render_svg(spec: &PlotSpec, theme: &Theme) -> String {
    match spec {
        PlotSpec::Bar(bar) => render_bar(bar, theme),
        PlotSpec::Waterfall(wf) => render_waterfall(wf, theme),
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Coordinates are always printed with two decimals.
fn px(v: f64) -> String {
    fixed(v, 2)
}

struct Frame {
    width: f64,
    height: f64,
    lo: f64,
    hi: f64,
    rows: usize,
}

impl Frame {
    fn new(theme: &Theme, lo: f64, hi: f64, rows: usize) -> Self {
        Self {
            width: theme.width_px as f64,
            height: theme.height_px as f64,
            lo,
            hi,
            rows: rows.max(1),
        }
    }

    fn plot_width(&self) -> f64 {
        (self.width - LABEL_GUTTER - RIGHT_MARGIN).max(1.0)
    }

    fn x(&self, v: f64) -> f64 {
        LABEL_GUTTER + (v - self.lo) / (self.hi - self.lo) * self.plot_width()
    }

    fn row_height(&self) -> f64 {
        ((self.height - TOP_MARGIN - BOTTOM_MARGIN) / self.rows as f64).max(4.0)
    }

    fn row_top(&self, row: usize) -> f64 {
        TOP_MARGIN + row as f64 * self.row_height()
    }

    fn axis_y(&self) -> f64 {
        TOP_MARGIN + self.rows as f64 * self.row_height() + 8.0
    }
}

/// Pads `[lo, hi]` so bars never touch the frame; a degenerate range gets a fixed width.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 {
        span * 0.08
    } else {
        (lo.abs() * 0.1).max(0.1)
    };
    (lo - pad, hi + pad)
}

fn open(out: &mut String, theme: &Theme, class: &str) {
    let (w, h) = (theme.width_px, theme.height_px);
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" class="{class}" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        "<style>.pos{{fill:{p}}}.neg{{fill:{n}}}.zero{{fill:{MUTED}}}</style>",
        p = escape(&theme.positive_color),
        n = escape(&theme.negative_color)
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r##"<g font-family="{}" font-size="13" fill="#222222">"##,
        escape(&theme.font_family)
    );
}

fn close(out: &mut String) {
    out.push_str("</g>\n</svg>\n");
}

fn axis(out: &mut String, frame: &Frame, title: &str) {
    let y = frame.axis_y();
    let (x0, x1) = (LABEL_GUTTER, LABEL_GUTTER + frame.plot_width());
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{MUTED}" stroke-width="1"/>"#,
        px(x0),
        px(y),
        px(x1),
        px(y)
    );
    for k in 0..AXIS_TICKS {
        let v = frame.lo + (frame.hi - frame.lo) * k as f64 / (AXIS_TICKS - 1) as f64;
        let x = frame.x(v);
        let _ = writeln!(
            out,
            r#"<line class="tick" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{MUTED}" stroke-width="1"/>"#,
            px(x),
            px(y),
            px(x),
            px(y + 4.0)
        );
        let _ = writeln!(
            out,
            r#"<text class="tick-label" x="{}" y="{}" text-anchor="middle" font-size="11" fill="{MUTED}">{}</text>"#,
            px(x),
            px(y + 16.0),
            fixed(v, 2)
        );
    }
    if !title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text class="axis-title" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px((x0 + x1) / 2.0),
            px(y + 34.0),
            escape(title)
        );
    }
}

fn sign_class(v: f64) -> &'static str {
    if v > 0.0 {
        "pos"
    } else if v < 0.0 {
        "neg"
    } else {
        "zero"
    }
}

fn sign_fill<'a>(v: f64, theme: &'a Theme) -> &'a str {
    if v > 0.0 {
        &theme.positive_color
    } else if v < 0.0 {
        &theme.negative_color
    } else {
        MUTED
    }
}

fn row_label(out: &mut String, frame: &Frame, row: usize, text: &str) {
    let y = frame.row_top(row) + frame.row_height() / 2.0 + 4.0;
    let _ = writeln!(
        out,
        r#"<text class="row-label" x="{}" y="{}" text-anchor="end">{}</text>"#,
        px(LABEL_GUTTER - 10.0),
        px(y),
        escape(text)
    );
}

fn bar(out: &mut String, frame: &Frame, row: usize, from: f64, to: f64, value: f64, theme: &Theme) {
    let h = frame.row_height() * 0.7;
    let y = frame.row_top(row) + (frame.row_height() - h) / 2.0;
    let (xa, xb) = (frame.x(from), frame.x(to));
    let _ = writeln!(
        out,
        r#"<rect class="{}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
        sign_class(value),
        px(xa.min(xb)),
        px(y),
        px((xb - xa).abs()),
        px(h),
        escape(sign_fill(value, theme))
    );
}

fn value_label(out: &mut String, frame: &Frame, row: usize, at: f64, text: &str) {
    let y = frame.row_top(row) + frame.row_height() / 2.0 + 4.0;
    let x = frame.x(at) + 6.0;
    let _ = writeln!(
        out,
        r#"<text class="value-label" x="{}" y="{}" text-anchor="start" font-size="12">{}</text>"#,
        px(x),
        px(y),
        escape(text)
    );
}

fn render_bar(spec: &BarPlotSpec, theme: &Theme) -> String {
    let mut rows: Vec<(String, f64)> = spec
        .entries
        .iter()
        .map(|e| (e.label.clone(), e.value))
        .collect();
    if spec.other_count > 0 {
        rows.push((format!("Sum of {} other features", spec.other_count), spec.other_sum));
    }
    let max = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let hi = if max > 0.0 { max * 1.08 } else { 1.0 };
    let frame = Frame::new(theme, 0.0, hi, rows.len());

    let mut out = String::new();
    open(&mut out, theme, "shap-bar");
    for (row, (label, value)) in rows.iter().enumerate() {
        row_label(&mut out, &frame, row, label);
        bar(&mut out, &frame, row, 0.0, *value, *value, theme);
        value_label(&mut out, &frame, row, *value, &fixed(*value, 3));
    }
    let title = format!("mean(|SHAP value|) over {} instances", spec.n_instances);
    axis(&mut out, &frame, &title);
    close(&mut out);
    out
}

fn render_waterfall(spec: &WaterfallSpec, theme: &Theme) -> String {
    // Rows top to bottom: largest step first, folded remainder last.
    let mut rows: Vec<(String, f64)> = spec
        .steps
        .iter()
        .map(|s| (s.display_label(), s.contribution))
        .collect();
    if spec.hidden_count > 0 {
        rows.push((format!("{} other features", spec.hidden_count), spec.hidden_sum));
    }

    // The walk starts at the base value on the bottom row and climbs upwards.
    let mut spans = vec![(0.0, 0.0); rows.len()];
    let mut level = spec.base_value;
    for (row, (_, c)) in rows.iter().enumerate().rev() {
        spans[row] = (level, level + c);
        level += c;
    }

    let (lo, hi) = spans
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain([spec.base_value, spec.prediction])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = padded(lo, hi);
    let frame = Frame::new(theme, lo, hi, rows.len());

    let mut out = String::new();
    open(&mut out, theme, "shap-waterfall");
    for (row, (label, c)) in rows.iter().enumerate() {
        let (from, to) = spans[row];
        row_label(&mut out, &frame, row, label);
        bar(&mut out, &frame, row, from, to, *c, theme);
        value_label(&mut out, &frame, row, from.max(to), &signed(*c, 3));
        if row > 0 {
            // connector from this bar's end to the start of the bar above
            let x = frame.x(to);
            let _ = writeln!(
                out,
                r#"<line class="connector" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{MUTED}" stroke-width="0.5" stroke-dasharray="2,2"/>"#,
                px(x),
                px(frame.row_top(row) + frame.row_height() * 0.15),
                px(x),
                px(frame.row_top(row - 1) + frame.row_height() * 0.85)
            );
        }
    }
    axis(&mut out, &frame, "");

    let base_x = frame.x(spec.base_value);
    let pred_x = frame.x(spec.prediction);
    let axis_y = frame.axis_y();
    let _ = writeln!(
        out,
        r#"<line class="base-marker" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="{MUTED}" stroke-width="0.8" stroke-dasharray="4,3"/>"#,
        px(base_x),
        px(TOP_MARGIN),
        px(axis_y)
    );
    let _ = writeln!(
        out,
        r#"<text class="endpoint base" x="{}" y="{}" text-anchor="middle"><tspan class="symbol">E[f(X)] = </tspan><tspan class="value">{}</tspan></text>"#,
        px(base_x),
        px(axis_y + 36.0),
        fixed(spec.base_value, 3)
    );
    let _ = writeln!(
        out,
        r#"<line class="prediction-marker" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="{MUTED}" stroke-width="0.8" stroke-dasharray="4,3"/>"#,
        px(pred_x),
        px(TOP_MARGIN - 14.0),
        px(axis_y)
    );
    let _ = writeln!(
        out,
        r#"<text class="endpoint prediction" x="{}" y="{}" text-anchor="middle"><tspan class="symbol">f(x) = </tspan><tspan class="value">{}</tspan></text>"#,
        px(pred_x),
        px(TOP_MARGIN - 20.0),
        fixed(spec.prediction, 2)
    );
    close(&mut out);
    out
}
