use serde::{Deserialize, Serialize};

use super::{ExplanationContext, FormatProblem, PromptError, Result};
use crate::model::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Summary,
    PerFeature,
    Caveats,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Summary, Section::PerFeature, Section::Caveats];

    pub fn tag(self) -> &'static str {
        match self {
            Section::Summary => "SUMMARY",
            Section::PerFeature => "PER_FEATURE",
            Section::Caveats => "CAVEATS",
        }
    }

    fn from_heading(line: &str) -> Option<Self> {
        let line = line.trim();
        let hashes = line.len() - line.trim_start_matches('#').len();
        if !(1..=6).contains(&hashes) {
            return None;
        }
        let title = line[hashes..]
            .trim()
            .trim_end_matches('#')
            .trim()
            .trim_end_matches(':')
            .trim();
        Self::ALL
            .into_iter()
            .find(|s| s.tag().eq_ignore_ascii_case(title))
    }

    fn error(self, problem: FormatProblem) -> PromptError {
        PromptError::Format {
            section: self.tag().to_string(),
            problem,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureNote {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedExplanation {
    pub summary: String,
    pub per_feature: Vec<FeatureNote>,
    pub caveats: String,
}

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

fn bullet(line: &str) -> Option<&str> {
    let t = line.trim_start();
    t.strip_prefix("- ").or_else(|| t.strip_prefix("* "))
}

fn clean_name(name: &str) -> String {
    name.trim().trim_matches(|c| c == '*' || c == '`' || c == '_').trim().to_string()
}

fn parse_bullets(body: &str) -> Result<Vec<FeatureNote>> {
    let mut notes: Vec<FeatureNote> = Vec::new();
    for line in body.lines() {
        if let Some(item) = bullet(line) {
            let (name, text) = item
                .split_once(':')
                .ok_or(Section::PerFeature.error(FormatProblem::Malformed))?;
            let name = clean_name(name);
            if name.is_empty() {
                return Err(Section::PerFeature.error(FormatProblem::Malformed));
            }
            notes.push(FeatureNote {
                name,
                text: text.trim().to_string(),
            });
        } else if let Some(last) = notes.last_mut() {
            if !line.trim().is_empty() {
                if !last.text.is_empty() {
                    last.text.push('\n');
                }
                last.text.push_str(line.trim_end());
            }
        }
        // lines before the first bullet are introductory prose and are dropped
    }
    if notes.is_empty() {
        return Err(Section::PerFeature.error(FormatProblem::Empty));
    }
    Ok(notes)
}

/// Extracts the `### SUMMARY`, `### PER_FEATURE` and `### CAVEATS` sections in
/// any order. Code fences and text before the first heading are ignored.
pub fn parse_response(raw: &str) -> Result<ParsedExplanation> {
    let raw = raw.replace("\r\n", "\n");
    let mut bodies: [Option<Vec<&str>>; 3] = [None, None, None];
    let mut current: Option<usize> = None;
    for line in raw.lines() {
        if is_fence(line) {
            continue;
        }
        if let Some(section) = Section::from_heading(line) {
            let slot = section as usize;
            if bodies[slot].is_some() {
                return Err(section.error(FormatProblem::Duplicated));
            }
            bodies[slot] = Some(Vec::new());
            current = Some(slot);
            continue;
        }
        if let Some(slot) = current {
            if let Some(lines) = bodies[slot].as_mut() {
                lines.push(line);
            }
        }
    }

    let mut texts = Vec::with_capacity(3);
    for section in Section::ALL {
        let lines = bodies[section as usize]
            .take()
            .ok_or(section.error(FormatProblem::Missing))?;
        let text = lines.join("\n").trim().to_string();
        if text.is_empty() {
            return Err(section.error(FormatProblem::Empty));
        }
        texts.push(text);
    }
    let caveats = texts.pop().unwrap_or_default();
    let per_feature = parse_bullets(&texts.pop().unwrap_or_default())?;
    let summary = texts.pop().unwrap_or_default();
    Ok(ParsedExplanation {
        summary,
        per_feature,
        caveats,
    })
}

impl ParsedExplanation {
    /// Maps every per-feature note to a feature index by name or alias.
    ///
    /// Accepts `NAME`, `ALIAS`, `NAME (ALIAS)` and `ALIAS (NAME)`, ignoring ASCII case.
    pub fn resolve(&self, features: &FeatureSet, ctx: &ExplanationContext) -> Result<Vec<usize>> {
        let lookup = |candidate: &str| {
            let candidate = candidate.trim();
            features.names().iter().position(|name| {
                name.eq_ignore_ascii_case(candidate)
                    || ctx
                        .feature_aliases
                        .get(name)
                        .is_some_and(|a| a.eq_ignore_ascii_case(candidate))
            })
        };
        self.per_feature
            .iter()
            .map(|note| {
                lookup(&note.name)
                    .or_else(|| {
                        let (head, rest) = note.name.split_once('(')?;
                        lookup(head).or_else(|| lookup(rest.trim_end_matches(')')))
                    })
                    .ok_or_else(|| PromptError::UnknownFeature {
                        field: "PER_FEATURE",
                        name: note.name.clone(),
                    })
            })
            .collect()
    }
}
