//! Shapley-value attributions for tree ensembles, deterministic SVG plots of
//! those attributions, and assembly of guarded, context-rich prompts that ask a
//! chat model to explain them.

pub mod format;
pub mod model;
pub mod plot;
pub mod prompt;
pub mod shap;

pub use model::{Dataset, FeatureSet, Instance, ModelError, Objective, TreeEnsemble};
pub use plot::{build_bar, build_waterfall, render_svg, PlotSpec, Theme};
pub use prompt::{
    assemble, parse_response, ExplanationContext, ParsedExplanation, PlotKind, PromptBundle,
    PromptError, Reader,
};
pub use shap::{
    aggregate_global, exp_value, shapley, shapley_batch, Attribution, CoalitionMask,
    GlobalAttribution, ShapConfig, ShapError,
};
