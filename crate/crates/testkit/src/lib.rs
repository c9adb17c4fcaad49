//! Random model/data generators and reference oracles for tests.
//!
//! The oracles here work on [`ModelDocument`]s directly (node ids, hash-map
//! lookups, plain recursion) and share no code with the evaluation paths in
//! `ctxshap-core`, so agreement between the two is meaningful.

use std::collections::HashMap;

use ctxshap_core::model::{ModelDocument, NodeDocument, Objective, TreeDocument};
use ctxshap_core::{Dataset, FeatureSet, Instance};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct EnsembleParams {
    pub features: usize,
    pub trees: usize,
    pub max_depth: usize,
    /// Never split twice on the same feature along a root-to-leaf path.
    pub path_unique: bool,
    /// Probability that a feature is eligible for splits at all.
    pub feature_use_prob: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            features: 6,
            trees: 3,
            max_depth: 4,
            path_unique: false,
            feature_use_prob: 0.75,
        }
    }
}

pub fn feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

/// Values live on a half-unit grid in `[0, 10]` so ties with thresholds occur.
fn grid_value<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(0..=20) as f64 * 0.5
}

struct TreeBuilder<'a, R> {
    rng: &'a mut R,
    eligible: &'a [usize],
    params: EnsembleParams,
    nodes: Vec<NodeDocument>,
    next_id: i64,
}

impl<R: Rng> TreeBuilder<'_, R> {
    /// Returns (node id, cover); every node gets a strictly positive cover.
    fn build(&mut self, depth: usize, path: &mut Vec<usize>) -> (i64, i64) {
        let id = self.next_id;
        self.next_id += 1;
        let candidates: Vec<usize> = self
            .eligible
            .iter()
            .copied()
            .filter(|f| !self.params.path_unique || !path.contains(f))
            .collect();
        let stop = depth >= self.params.max_depth
            || candidates.is_empty()
            || (depth > 0 && self.rng.gen_bool(0.25));
        if stop {
            let cover = self.rng.gen_range(1..=30);
            let value = self.rng.gen_range(-2.0..2.0);
            self.nodes.push(NodeDocument::leaf(id, value).with_cover(cover));
            return (id, cover);
        }
        let feature = *candidates.choose(self.rng).expect("non-empty");
        let threshold = self.rng.gen_range(1..=19) as f64 * 0.5;
        let slot = self.nodes.len();
        self.nodes.push(NodeDocument::leaf(id, 0.0));
        path.push(feature);
        let (left, lc) = self.build(depth + 1, path);
        let (right, rc) = self.build(depth + 1, path);
        path.pop();
        self.nodes[slot] = NodeDocument::split(id, feature as i64, threshold, left, right, lc + rc);
        (id, lc + rc)
    }
}

/// A random ensemble document with consistent, strictly positive covers.
pub fn random_document<R: Rng>(rng: &mut R, params: EnsembleParams) -> ModelDocument {
    let eligible: Vec<usize> = (0..params.features)
        .filter(|_| rng.gen_bool(params.feature_use_prob))
        .collect();
    let trees = (0..params.trees)
        .map(|_| {
            let mut builder = TreeBuilder {
                rng: &mut *rng,
                eligible: &eligible,
                params,
                nodes: Vec::new(),
                next_id: 0,
            };
            let (root, _) = builder.build(0, &mut Vec::new());
            let mut nodes = builder.nodes;
            // Node order in the document carries no meaning.
            nodes.shuffle(rng);
            TreeDocument { root, nodes }
        })
        .collect();
    ModelDocument {
        features: feature_names(params.features),
        base_score: rng.gen_range(-1.0..1.0),
        objective: Objective::Raw,
        trees,
    }
}

pub fn random_values<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| grid_value(rng)).collect()
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize) -> Instance {
    Instance::new(random_values(rng, n)).expect("finite")
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, rows: usize) -> Dataset {
    let features = FeatureSet::new(feature_names(n)).expect("valid names");
    let rows = (0..rows).map(|_| random_instance(rng, n)).collect();
    Dataset::new(features, rows).expect("non-empty")
}

/// Features that appear in no split of the document.
pub fn unused_features(doc: &ModelDocument) -> Vec<usize> {
    (0..doc.features.len())
        .filter(|&f| {
            doc.trees
                .iter()
                .flat_map(|t| &t.nodes)
                .all(|n| n.feature != Some(f as i64))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

fn by_id(tree: &TreeDocument) -> HashMap<i64, &NodeDocument> {
    tree.nodes.iter().map(|n| (n.id, n)).collect()
}

fn walk(nodes: &HashMap<i64, &NodeDocument>, id: i64, x: &[f64]) -> f64 {
    let node = nodes[&id];
    match node.leaf {
        Some(v) => v,
        None => {
            let f = node.feature.unwrap() as usize;
            let next = if x[f] <= node.threshold.unwrap() {
                node.left.unwrap()
            } else {
                node.right.unwrap()
            };
            walk(nodes, next, x)
        }
    }
}

/// Raw margin by recursive descent over the document.
pub fn naive_predict_raw(doc: &ModelDocument, x: &[f64]) -> f64 {
    doc.base_score
        + doc
            .trees
            .iter()
            .map(|t| walk(&by_id(t), t.root, x))
            .sum::<f64>()
}

/// Empirical `E[f(X)]`: mean raw prediction over the rows.
pub fn brute_marginal_mean(doc: &ModelDocument, rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|r| naive_predict_raw(doc, r)).sum::<f64>() / rows.len() as f64
}

fn weighted(nodes: &HashMap<i64, &NodeDocument>, id: i64, x: &[f64], known: &dyn Fn(usize) -> bool) -> f64 {
    let node = nodes[&id];
    if let Some(v) = node.leaf {
        return v;
    }
    let f = node.feature.unwrap() as usize;
    let (l, r) = (node.left.unwrap(), node.right.unwrap());
    if known(f) {
        let next = if x[f] <= node.threshold.unwrap() { l } else { r };
        return weighted(nodes, next, x, known);
    }
    let total = node.cover.unwrap() as f64;
    let lc = nodes[&l].cover.expect("oracle needs leaf covers") as f64;
    let rc = nodes[&r].cover.expect("oracle needs leaf covers") as f64;
    (lc * weighted(nodes, l, x, known) + rc * weighted(nodes, r, x, known)) / total
}

/// Cover-weighted expectation with the features in `known` fixed to `x`.
/// Requires every node, leaves included, to carry a positive cover.
pub fn reference_exp_value(doc: &ModelDocument, x: &[f64], known: &dyn Fn(usize) -> bool) -> f64 {
    doc.base_score
        + doc
            .trees
            .iter()
            .map(|t| weighted(&by_id(t), t.root, x, known))
            .sum::<f64>()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Shapley values as the average marginal contribution over all `n!` feature
/// orderings. Only practical for `n <= 7`.
pub fn permutation_shapley(doc: &ModelDocument, x: &[f64]) -> Vec<f64> {
    let n = doc.features.len();
    let perms = permutations(n);
    let mut phi = vec![0.0; n];
    for order in &perms {
        let mut present = vec![false; n];
        let mut prev = reference_exp_value(doc, x, &|_| false);
        for &f in order {
            present[f] = true;
            let snapshot = present.clone();
            let next = reference_exp_value(doc, x, &move |g| snapshot[g]);
            phi[f] += next - prev;
            prev = next;
        }
    }
    phi.iter().map(|p| p / perms.len() as f64).collect()
}

/// `sum over k of C(n-1, k) * k! (n-k-1)! / n!`, with each term from a
/// multiplicative binomial rather than factorials.
pub fn weight_mass(weights: &[f64]) -> f64 {
    let n = weights.len();
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for (k, w) in weights.iter().enumerate() {
        total += binom * w;
        binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
    }
    total
}

// ---------------------------------------------------------------------------
// Response generator
// ---------------------------------------------------------------------------

const WORDS: &[&str] = &[
    "the", "model", "prediction", "rises", "because", "enzyme", "levels", "are", "high", "risk",
    "lower", "value", "pushes", "average", "baseline", "肝臓", "予測", "nilai", "tinggi", "(mg/dL)",
    "42", "-0.03", "E[f(X)]", "f(x)", "**note**", "sharply", "slightly",
];

fn sentence<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(3..12);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    format!("{}.", words.join(" "))
}

fn paragraph<R: Rng>(rng: &mut R) -> String {
    let lines = rng.gen_range(1..4);
    (0..lines).map(|_| sentence(rng)).collect::<Vec<_>>().join("\n")
}

/// One generated reply in the mandated three-section format.
#[derive(Debug, Clone)]
pub struct GeneratedResponse {
    pub raw: String,
    pub summary: String,
    pub per_feature: Vec<(String, String)>,
    pub caveats: String,
}

/// Sections in random order, with optional preamble, code fences and CRLF line ends.
pub fn random_response<R: Rng>(rng: &mut R, feature_names: &[String]) -> GeneratedResponse {
    let summary = paragraph(rng);
    let caveats = paragraph(rng);
    let count = rng.gen_range(1..=feature_names.len());
    let per_feature: Vec<(String, String)> = feature_names
        .choose_multiple(rng, count)
        .map(|name| {
            let mut text = sentence(rng);
            if rng.gen_bool(0.2) {
                text.push_str("\n  ");
                text.push_str(&sentence(rng));
            }
            (name.clone(), text)
        })
        .collect();
    let bullets = per_feature
        .iter()
        .map(|(n, t)| format!("- {n}: {t}"))
        .collect::<Vec<_>>()
        .join("\n");

    let mut sections = vec![
        format!("### SUMMARY\n{summary}"),
        format!("### PER_FEATURE\n{bullets}"),
        format!("### CAVEATS\n{caveats}"),
    ];
    sections.shuffle(rng);
    let gap = if rng.gen_bool(0.5) { "\n\n" } else { "\n" };
    let mut raw = sections.join(gap);
    if rng.gen_bool(0.3) {
        raw = format!("Here is the explanation you asked for.\n\n{raw}");
    }
    if rng.gen_bool(0.4) {
        let fence = *["```", "```markdown", "~~~"].choose(rng).unwrap();
        raw = format!("{fence}\n{raw}\n{}", &fence[..3]);
    }
    if rng.gen_bool(0.3) {
        raw = format!("  \n{raw}\n\n   ");
    }
    if rng.gen_bool(0.2) {
        raw = raw.replace('\n', "\r\n");
    }
    GeneratedResponse {
        raw,
        summary,
        per_feature,
        caveats,
    }
}

/// The three ways a reply can break the response format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// A section heading is dropped.
    Missing,
    /// A section heading appears twice.
    Duplicate,
    /// A section keeps its heading but loses its body.
    Empty,
}

/// Applies `mutation` to the `tag` section of a generated reply; line ends become `\n`.
pub fn mutate(response: &GeneratedResponse, mutation: Mutation, tag: &str) -> String {
    let clean = response.raw.replace("\r\n", "\n");
    match mutation {
        Mutation::Missing => clean
            .lines()
            .filter(|l| l.trim() != format!("### {tag}"))
            .collect::<Vec<_>>()
            .join("\n"),
        Mutation::Duplicate => format!("{clean}\n### {tag}\nagain\n"),
        Mutation::Empty => {
            let body = match tag {
                "SUMMARY" => response.summary.clone(),
                "CAVEATS" => response.caveats.clone(),
                _ => response
                    .per_feature
                    .iter()
                    .map(|(n, t)| format!("- {n}: {t}"))
                    .collect::<Vec<_>>()
                    .join("\n"),
            };
            clean.replace(&body, "")
        }
    }
}

pub mod scenarios;
