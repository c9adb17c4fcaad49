//! Prompt assembly for chat-model explanations of SHAP plots.
//!
//! A [`PromptBundle`] pairs a fixed guard system message with a Markdown user
//! message made of: a feature table (names, aliases, descriptions), a SHAP
//! value table trimmed to a token budget, a declaration of the attached plot
//! type, reader and language directives, and the response format the reply
//! must follow. Templates live in `assets/prompts/<version>/`.

mod response;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{compact, significant4};
use crate::model::FeatureSet;
use crate::plot::{DEFAULT_MAX_BARS, DEFAULT_MAX_STEPS};
use crate::shap::Attribution;

pub use response::{parse_response, FeatureNote, ParsedExplanation, Section};

pub const PROMPT_VERSION: &str = "v1";

const GUARD: &str = include_str!("../../assets/prompts/v1/guard.md");
const TASK: &str = include_str!("../../assets/prompts/v1/task.md");
const BACKGROUND_MISSING: &str = include_str!("../../assets/prompts/v1/background_missing.md");
const FEATURE_INFER: &str = include_str!("../../assets/prompts/v1/feature_infer.md");
const DECLARE_WATERFALL: &str = include_str!("../../assets/prompts/v1/declare_waterfall.md");
const DECLARE_BAR: &str = include_str!("../../assets/prompts/v1/declare_bar.md");
const READER_GENERAL: &str = include_str!("../../assets/prompts/v1/reader_general.md");
const READER_EXPERT: &str = include_str!("../../assets/prompts/v1/reader_expert.md");
const LANGUAGE: &str = include_str!("../../assets/prompts/v1/language.md");
const RESPONSE_FORMAT: &str = include_str!("../../assets/prompts/v1/response_format.md");

/// Substrings that identify the two guard clauses in the system text.
pub const GUARD_PREDICTION_CLAUSE: &str = "not a deterministic conclusion";
pub const GUARD_PROFESSIONAL_CLAUSE: &str = "consult a qualified professional";
pub const GUARD_SYMBOL_CLAUSE: &str = "E[f(X)] is the base value";
pub const GUARD_INSTANCE_CLAUSE: &str = "f(x) is the model's prediction for the specific instance";

pub const MISSING_ALIAS: &str = "—";
pub const MISSING_DESCRIPTION: &str = "model should infer";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("unknown feature {name:?} in {field}")]
    UnknownFeature { field: &'static str, name: String },
    #[error("language must not be empty")]
    EmptyLanguage,
    #[error("token budget {budget} is too small: one instance needs {needed} tokens")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("{kind} prompts need {expected}, got {actual} attributions")]
    KindArity {
        kind: PlotKind,
        expected: &'static str,
        actual: usize,
    },
    #[error("attribution has {actual} values, model has {expected} features")]
    Width { expected: usize, actual: usize },
    #[error("response format error: section {section} {problem}")]
    Format { section: String, problem: FormatProblem },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatProblem {
    Missing,
    Duplicated,
    Empty,
    Malformed,
}

impl std::fmt::Display for FormatProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FormatProblem::Missing => "is missing",
            FormatProblem::Duplicated => "appears more than once",
            FormatProblem::Empty => "is empty",
            FormatProblem::Malformed => "is malformed",
        })
    }
}

pub type Result<T, E = PromptError> = std::result::Result<T, E>;

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reader {
    #[default]
    General,
    Expert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Bar,
    Waterfall,
}

impl std::fmt::Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlotKind::Bar => "bar",
            PlotKind::Waterfall => "waterfall",
        })
    }
}

/// User-supplied context; the JSON context file deserializes straight into this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplanationContext {
    pub feature_aliases: BTreeMap<String, String>,
    pub feature_descriptions: BTreeMap<String, String>,
    pub additional_background: Option<String>,
    pub language: String,
    pub reader: Reader,
}

impl Default for ExplanationContext {
    fn default() -> Self {
        Self {
            feature_aliases: BTreeMap::new(),
            feature_descriptions: BTreeMap::new(),
            additional_background: None,
            language: "English".into(),
            reader: Reader::General,
        }
    }
}

impl ExplanationContext {
    pub fn validate(&self, features: &FeatureSet) -> Result<()> {
        for (field, map) in [
            ("feature_aliases", &self.feature_aliases),
            ("feature_descriptions", &self.feature_descriptions),
        ] {
            if let Some(name) = map.keys().find(|k| !features.contains(k)) {
                return Err(PromptError::UnknownFeature {
                    field,
                    name: name.clone(),
                });
            }
        }
        if self.language.trim().is_empty() {
            return Err(PromptError::EmptyLanguage);
        }
        Ok(())
    }

    /// Alias when one is given, otherwise the feature name.
    pub fn label(&self, name: &str) -> String {
        self.feature_aliases
            .get(name)
            .cloned()
            .unwrap_or_else(|| name.to_string())
    }

    pub fn labels(&self, features: &FeatureSet) -> Vec<String> {
        features.names().iter().map(|n| self.label(n)).collect()
    }
}

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    pub media_type: String,
    pub data: Vec<u8>,
}

impl ImageAttachment {
    pub fn svg(text: &str) -> Self {
        Self {
            media_type: "image/svg+xml".into(),
            data: text.as_bytes().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub kind: PlotKind,
    pub system_text: String,
    pub user_text: String,
    pub images: Vec<ImageAttachment>,
    pub sample_count: usize,
}

impl PromptBundle {
    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.user_text)
    }

    /// Markdown dump of both messages, for inspection.
    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "<!-- prompt {PROMPT_VERSION}, kind {}, samples {}, ~{} tokens -->\n\n",
            self.kind,
            self.sample_count,
            self.estimated_tokens()
        );
        out.push_str("## System\n\n");
        out.push_str(self.system_text.trim_end());
        out.push_str("\n\n## User\n\n");
        out.push_str(self.user_text.trim_end());
        out.push('\n');
        for (i, image) in self.images.iter().enumerate() {
            out.push_str(&format!(
                "\n[attachment {}: {}, {} bytes]\n",
                i + 1,
                image.media_type,
                image.data.len()
            ));
        }
        out
    }
}

/// `ceil(chars / 4)`; images are not counted.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub fn build_guard() -> String {
    GUARD.to_string()
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace(['\n', '\r'], " ")
}

pub fn build_feature_table(features: &FeatureSet, ctx: &ExplanationContext) -> Result<String> {
    ctx.validate(features)?;
    let mut out = String::from("| Feature | Alias | Description |\n|---|---|---|\n");
    let mut incomplete = false;
    for name in features.names() {
        let alias = ctx.feature_aliases.get(name);
        let description = ctx.feature_descriptions.get(name);
        incomplete |= alias.is_none() || description.is_none();
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            cell(name),
            alias.map_or(MISSING_ALIAS.to_string(), |a| cell(a)),
            description.map_or(MISSING_DESCRIPTION.to_string(), |d| cell(d)),
        ));
    }
    if incomplete {
        out.push('\n');
        out.push_str(FEATURE_INFER.trim_end());
        out.push('\n');
    }
    Ok(out)
}

/// The SHAP table split into a header and one chunk per instance, so a prefix
/// of instances can be measured without re-rendering.
struct ShapTable {
    header: String,
    prediction_rows: Vec<String>,
    feature_rows: Vec<String>,
}

impl ShapTable {
    fn new(attrs: &[Attribution], features: &FeatureSet) -> Result<Self> {
        for attr in attrs {
            if attr.phi().len() != features.count() {
                return Err(PromptError::Width {
                    expected: features.count(),
                    actual: attr.phi().len(),
                });
            }
        }
        let base = attrs.first().map_or(0.0, |a| a.base_value());
        let header = format!(
            "Base value E[f(X)] = {} (average model output over the background data).\n\n",
            significant4(base)
        );
        let prediction_rows = attrs
            .iter()
            .enumerate()
            .map(|(i, a)| format!("| {} | {} |\n", i + 1, significant4(a.prediction())))
            .collect();
        let feature_rows = attrs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                features
                    .names()
                    .iter()
                    .zip(a.phi())
                    .zip(a.instance().values())
                    .map(|((name, phi), value)| {
                        format!("| {} | {} | {} | {} |\n", i + 1, cell(name), compact(*value), significant4(*phi))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            header,
            prediction_rows,
            feature_rows,
        })
    }

    const PREDICTION_HEAD: &'static str = "| Instance | f(x) |\n|---|---|\n";
    const FEATURE_HEAD: &'static str = "\n| Instance | Feature | Value | SHAP value |\n|---|---|---|---|\n";

    fn chars(&self, n: usize) -> usize {
        let count = |s: &str| s.chars().count();
        count(&self.header)
            + count(Self::PREDICTION_HEAD)
            + count(Self::FEATURE_HEAD)
            + self.prediction_rows[..n].iter().map(|r| count(r)).sum::<usize>()
            + self.feature_rows[..n].iter().map(|r| count(r)).sum::<usize>()
    }

    fn render(&self, n: usize) -> String {
        let mut out = self.header.clone();
        out.push_str(Self::PREDICTION_HEAD);
        self.prediction_rows[..n].iter().for_each(|r| out.push_str(r));
        out.push_str(Self::FEATURE_HEAD);
        self.feature_rows[..n].iter().for_each(|r| out.push_str(r));
        out
    }

    /// Largest `n >= 1` with `ceil((fixed + chars(n)) / 4) <= budget`, first instances first.
    fn fit(&self, fixed_chars: usize, budget: usize) -> Result<usize> {
        let fits = |n: usize| (fixed_chars + self.chars(n)).div_ceil(4) <= budget;
        if !fits(1) {
            return Err(PromptError::BudgetTooSmall {
                budget,
                needed: (fixed_chars + self.chars(1)).div_ceil(4),
            });
        }
        Ok((1..=self.prediction_rows.len())
            .take_while(|&n| fits(n))
            .last()
            .unwrap_or(1))
    }
}

/// SHAP values of as many leading instances as fit in `budget` tokens.
pub fn build_shap_table(
    attrs: &[Attribution],
    features: &FeatureSet,
    budget: usize,
) -> Result<(String, usize)> {
    if attrs.is_empty() {
        return Err(PromptError::KindArity {
            kind: PlotKind::Bar,
            expected: "at least one",
            actual: 0,
        });
    }
    let table = ShapTable::new(attrs, features)?;
    let n = table.fit(0, budget)?;
    Ok((table.render(n), n))
}

fn declaration(kind: PlotKind, attrs: &[Attribution], samples: usize) -> String {
    match kind {
        PlotKind::Waterfall => {
            let a = &attrs[0];
            DECLARE_WATERFALL
                .replace("{base}", &significant4(a.base_value()))
                .replace("{prediction}", &significant4(a.prediction()))
                .replace("{shown}", &DEFAULT_MAX_STEPS.to_string())
        }
        PlotKind::Bar => DECLARE_BAR
            .replace("{instances}", &attrs.len().to_string())
            .replace("{shown}", &DEFAULT_MAX_BARS.to_string())
            .replace("{samples}", &samples.to_string()),
    }
}

/// Builds the full request: guard system text, Markdown user text and plot images.
pub fn assemble(
    kind: PlotKind,
    attrs: &[Attribution],
    plots: &[String],
    features: &FeatureSet,
    ctx: &ExplanationContext,
    budget: usize,
) -> Result<PromptBundle> {
    let arity_ok = match kind {
        PlotKind::Waterfall => attrs.len() == 1,
        PlotKind::Bar => !attrs.is_empty(),
    };
    if !arity_ok {
        return Err(PromptError::KindArity {
            kind,
            expected: match kind {
                PlotKind::Waterfall => "exactly one",
                PlotKind::Bar => "at least one",
            },
            actual: attrs.len(),
        });
    }

    let feature_table = build_feature_table(features, ctx)?;
    let table = ShapTable::new(attrs, features)?;

    let mut head = String::new();
    head.push_str(TASK.trim_end());
    head.push_str("\n\n## Background\n\n");
    match ctx.additional_background.as_deref().map(str::trim) {
        Some(text) if !text.is_empty() => head.push_str(text),
        _ => head.push_str(BACKGROUND_MISSING.trim_end()),
    }
    head.push_str("\n\n## Features\n\n");
    head.push_str(&feature_table);
    head.push_str("\n## SHAP values\n\n");

    let tail = |samples: usize| {
        let mut tail = String::from("\n## Plot\n\n");
        tail.push_str(declaration(kind, attrs, samples).trim_end());
        tail.push_str("\n\n## Audience\n\n");
        tail.push_str(
            match ctx.reader {
                Reader::General => READER_GENERAL,
                Reader::Expert => READER_EXPERT,
            }
            .trim_end(),
        );
        tail.push('\n');
        tail.push_str(LANGUAGE.replace("{language}", ctx.language.trim()).trim_end());
        tail.push_str("\n\n## Response format\n\n");
        tail.push_str(RESPONSE_FORMAT.trim_end());
        tail.push('\n');
        tail
    };

    // The tail mentions the sample count; measure it with the widest count it can print.
    let widest_tail = tail(attrs.len()).chars().count();
    let fixed = head.chars().count() + widest_tail;
    let samples = table.fit(fixed, budget)?;

    let mut user_text = head;
    user_text.push_str(&table.render(samples));
    user_text.push_str(&tail(samples));

    Ok(PromptBundle {
        kind,
        system_text: build_guard(),
        user_text,
        images: plots.iter().map(|svg| ImageAttachment::svg(svg)).collect(),
        sample_count: samples,
    })
}
