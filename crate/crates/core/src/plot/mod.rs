//! Global bar plots and local waterfall plots.
//!
//! Building a plot spec does the ranking and folding; [`render_svg`] turns a
//! validated spec into deterministic SVG text. Positive contributions use the
//! theme's positive (red) color, negative ones the negative (blue) color.

mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shap::{Attribution, GlobalAttribution};

pub use svg::render_svg;

pub const DEFAULT_MAX_BARS: usize = 9;
pub const DEFAULT_MAX_STEPS: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlotError {
    #[error("expected {expected} {what}, got {actual}")]
    Width {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theme {
    pub positive_color: String,
    pub negative_color: String,
    pub font_family: String,
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for Theme {
    fn default() -> Self {
        Self {
            positive_color: "#ff0d57".into(),
            negative_color: "#1e88e5".into(),
            font_family: "DejaVu Sans, Arial, sans-serif".into(),
            width_px: 800,
            height_px: 480,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarEntry {
    pub label: String,
    pub value: f64,
}

/// Features ranked by mean |phi|, with the tail folded into `other_sum`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarPlotSpec {
    pub entries: Vec<BarEntry>,
    pub max_bars: usize,
    pub other_sum: f64,
    pub other_count: usize,
    pub n_instances: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallStep {
    pub label: String,
    pub raw_value: f64,
    pub contribution: f64,
}

impl WaterfallStep {
    /// `"AST (324)"`.
    pub fn display_label(&self) -> String {
        format!("{} ({})", self.label, crate::format::compact(self.raw_value))
    }
}

/// One prediction as a walk from the base value to the model output.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallSpec {
    pub base_value: f64,
    pub prediction: f64,
    pub steps: Vec<WaterfallStep>,
    pub hidden_sum: f64,
    pub hidden_count: usize,
}

impl WaterfallSpec {
    /// `base + sum(steps) + hidden`, the value the last bar ends on.
    pub fn endpoint(&self) -> f64 {
        self.base_value + self.steps.iter().map(|s| s.contribution).sum::<f64>() + self.hidden_sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotSpec {
    Bar(BarPlotSpec),
    Waterfall(WaterfallSpec),
}

/// Indices ordered by `key` descending, ties by index ascending.
fn rank_desc(values: &[f64], key: impl Fn(f64) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| key(values[b]).total_cmp(&key(values[a])).then(a.cmp(&b)));
    order
}

fn check(what: &'static str, expected: usize, actual: usize) -> Result<(), PlotError> {
    if expected != actual {
        return Err(PlotError::Width {
            what,
            expected,
            actual,
        });
    }
    Ok(())
}

pub fn build_bar(
    global: &GlobalAttribution,
    labels: &[String],
    max_bars: usize,
) -> Result<BarPlotSpec, PlotError> {
    let values = &global.mean_abs_phi;
    check("labels", values.len(), labels.len())?;
    let order = rank_desc(values, |v| v);
    let (shown, rest) = order.split_at(max_bars.min(order.len()));
    Ok(BarPlotSpec {
        entries: shown
            .iter()
            .map(|&i| BarEntry {
                label: labels[i].clone(),
                value: values[i],
            })
            .collect(),
        max_bars,
        other_sum: rest.iter().map(|&i| values[i]).sum(),
        other_count: rest.len(),
        n_instances: global.n_instances,
    })
}

pub fn build_waterfall(
    attr: &Attribution,
    labels: &[String],
    raw_values: &[f64],
    max_steps: usize,
) -> Result<WaterfallSpec, PlotError> {
    let phi = attr.phi();
    check("labels", phi.len(), labels.len())?;
    check("raw values", phi.len(), raw_values.len())?;
    let order = rank_desc(phi, f64::abs);
    let (shown, rest) = order.split_at(max_steps.min(order.len()));
    Ok(WaterfallSpec {
        base_value: attr.base_value(),
        prediction: attr.prediction(),
        steps: shown
            .iter()
            .map(|&i| WaterfallStep {
                label: labels[i].clone(),
                raw_value: raw_values[i],
                contribution: phi[i],
            })
            .collect(),
        hidden_sum: rest.iter().map(|&i| phi[i]).sum(),
        hidden_count: rest.len(),
    })
}
