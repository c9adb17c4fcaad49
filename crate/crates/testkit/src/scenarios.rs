//! Fixed prompt scenarios over a liver-panel feature set, shared by the
//! prompt golden tests and the acceptance suite.

use std::path::PathBuf;

use ctxshap_core::plot::{build_bar, build_waterfall, render_svg, PlotSpec, Theme};
use ctxshap_core::{
    aggregate_global, assemble, Attribution, ExplanationContext, FeatureSet, Instance, PlotKind,
    PromptBundle, Reader,
};

pub const NAMES: [&str; 12] = [
    "Age", "Sex", "ALB", "ALP", "ALT", "AST", "BIL", "CHE", "CHOL", "CREA", "GGT", "PROT",
];

pub fn features() -> FeatureSet {
    FeatureSet::new(NAMES).expect("valid names")
}

pub fn liver_context(reader: Reader, language: &str) -> ExplanationContext {
    let aliases = [
        ("ALB", "Albumin"),
        ("ALP", "Alkaline Phosphatase"),
        ("ALT", "Alanine Aminotransferase"),
        ("AST", "Aspartate Aminotransferase"),
        ("BIL", "Bilirubin"),
        ("CHE", "Cholinesterase"),
        ("CHOL", "Cholesterol"),
        ("CREA", "Creatinine"),
        ("GGT", "Gamma-Glutamyl Transferase"),
        ("PROT", "Total Protein"),
    ];
    let descriptions = [
        ("Age", "Age of the patient in years"),
        ("Sex", "1 = male, 0 = female"),
        ("AST", "Liver enzyme, U/L"),
        ("ALT", "Liver enzyme, U/L"),
        ("GGT", "Enzyme of the liver and bile ducts, U/L"),
        ("BIL", "Pigment from red blood cell breakdown, umol/L"),
    ];
    ExplanationContext {
        feature_aliases: aliases.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        feature_descriptions: descriptions.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        additional_background: Some(
            "Blood test results of blood donors and hepatitis C patients. The model predicts the probability of liver disease.".into(),
        ),
        language: language.into(),
        reader,
    }
}

/// Deterministic attribution for instance `i`, with no RNG involved.
pub fn attribution(i: usize) -> Attribution {
    let n = NAMES.len();
    let phi: Vec<f64> = (0..n)
        .map(|j| (((i * 7 + j * 13) % 17) as f64 - 8.0) / 100.0)
        .collect();
    let values: Vec<f64> = (0..n).map(|j| ((i * 31 + j * 17) % 400) as f64 / 4.0 + 1.0).collect();
    let base = 0.131;
    let pred = base + phi.iter().sum::<f64>();
    Attribution::new(phi, base, pred, Instance::new(values).expect("finite")).expect("efficient")
}

pub fn attributions(n: usize) -> Vec<Attribution> {
    (0..n).map(attribution).collect()
}

pub fn waterfall_svg(attr: &Attribution) -> String {
    let names = features().names().to_vec();
    let spec = build_waterfall(attr, &names, attr.instance().values(), 9).expect("widths match");
    render_svg(&PlotSpec::Waterfall(spec), &Theme::default())
}

pub fn bar_svg(attrs: &[Attribution]) -> String {
    let names = features().names().to_vec();
    let global = aggregate_global(attrs).expect("non-empty");
    let spec = build_bar(&global, &names, 9).expect("widths match");
    render_svg(&PlotSpec::Bar(spec), &Theme::default())
}

/// `(golden file name, bundle)` for general/English, general/Japanese and expert/Indonesian.
pub fn golden_scenarios() -> Vec<(&'static str, PromptBundle)> {
    let english = {
        let ctx = liver_context(Reader::General, "English");
        let attrs = attributions(1);
        let plot = waterfall_svg(&attrs[0]);
        assemble(PlotKind::Waterfall, &attrs, &[plot], &features(), &ctx, 4096)
    };
    let japanese = {
        let ctx = liver_context(Reader::General, "Japanese");
        let attrs = attributions(40);
        let plot = bar_svg(&attrs);
        assemble(PlotKind::Bar, &attrs, &[plot], &features(), &ctx, 2048)
    };
    let indonesian = {
        let mut ctx = liver_context(Reader::Expert, "Indonesian");
        ctx.additional_background = None;
        let attrs = vec![attribution(3)];
        let plot = waterfall_svg(&attrs[0]);
        assemble(PlotKind::Waterfall, &attrs, &[plot], &features(), &ctx, 8192)
    };
    vec![
        ("prompt_general_english.md", english.expect("assembles")),
        ("prompt_general_japanese.md", japanese.expect("assembles")),
        ("prompt_expert_indonesian.md", indonesian.expect("assembles")),
    ]
}

/// Where the committed prompt goldens live.
pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}
