//! Tree-ensemble representation, JSON ingestion, inference and coverage fitting.
//!
//! A model document is validated once at parse time; afterwards a
//! [`TreeEnsemble`] is immutable and every operation on it is a pure function.
//! Internal nodes route `x[feature] <= threshold` to the left child, so ties
//! go left.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("width mismatch: model has {expected} features, input has {actual}")]
    Width { expected: usize, actual: usize },
    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),
    #[error("background dataset is empty")]
    EmptyBackground,
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

// ---------------------------------------------------------------------------
// Features, instances, datasets
// ---------------------------------------------------------------------------

/// Ordered, unique, non-empty feature names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    names: Vec<String>,
}

impl FeatureSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(ModelError::Schema("feature list is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(ModelError::Schema("feature names must be non-empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(ModelError::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }
}

/// One feature vector. Every value is finite; missing values are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    values: Vec<f64>,
}

impl Instance {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Value(format!(
                "instance value at position {pos} is not finite ({})",
                values[pos]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }
}

/// A non-empty set of rows bound to a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: FeatureSet,
    rows: Vec<Instance>,
}

impl Dataset {
    pub fn new(features: FeatureSet, rows: Vec<Instance>) -> Result<Self> {
        if rows.is_empty() {
            return Err(ModelError::EmptyBackground);
        }
        for row in &rows {
            if row.width() != features.count() {
                return Err(ModelError::Width {
                    expected: features.count(),
                    actual: row.width(),
                });
            }
        }
        Ok(Self { features, rows })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Raw,
    Logistic,
}

impl Objective {
    pub fn apply(self, margin: f64) -> f64 {
        match self {
            Objective::Raw => margin,
            Objective::Logistic => 1.0 / (1.0 + (-margin).exp()),
        }
    }
}

/// Serialized form of a model, field-for-field the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub features: Vec<String>,
    pub base_score: f64,
    pub objective: Objective,
    pub trees: Vec<TreeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub root: i64,
    pub nodes: Vec<NodeDocument>,
}

/// Either `{id, leaf[, cover]}` or `{id, feature, threshold, left, right, cover}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<i64>,
}

impl NodeDocument {
    pub fn leaf(id: i64, value: f64) -> Self {
        Self {
            id,
            leaf: Some(value),
            feature: None,
            threshold: None,
            left: None,
            right: None,
            cover: None,
        }
    }

    pub fn split(id: i64, feature: i64, threshold: f64, left: i64, right: i64, cover: i64) -> Self {
        Self {
            id,
            leaf: None,
            feature: Some(feature),
            threshold: Some(threshold),
            left: Some(left),
            right: Some(right),
            cover: Some(cover),
        }
    }

    pub fn with_cover(mut self, cover: i64) -> Self {
        self.cover = Some(cover);
        self
    }
}

// ---------------------------------------------------------------------------
// In-memory trees
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal {
        feature: usize,
        threshold: f64,
        /// Index of the left child in the owning tree's node table.
        left: usize,
        right: usize,
        /// cover(left) / cover(node); `None` when cover is zero, unknown or inconsistent.
        left_fraction: Option<f64>,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Identifier from the source document.
    pub id: i64,
    pub kind: NodeKind,
    pub cover: Option<u64>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    root: usize,
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &TreeNode {
        &self.nodes[index]
    }

    /// Leaf value reached by `x` under the `<=`-goes-left convention.
    pub fn route(&self, x: &[f64]) -> f64 {
        let mut idx = self.root;
        loop {
            match &self.nodes[idx].kind {
                NodeKind::Leaf { value } => return *value,
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    fn route_counting(&self, x: &[f64], counts: &mut [u64]) {
        let mut idx = self.root;
        loop {
            counts[idx] += 1;
            match &self.nodes[idx].kind {
                NodeKind::Leaf { .. } => return,
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Recompute every `left_fraction` from the current covers.
    fn refresh_fractions(&mut self) {
        let covers: Vec<Option<u64>> = self.nodes.iter().map(|n| n.cover).collect();
        for node in &mut self.nodes {
            let own = node.cover;
            if let NodeKind::Internal {
                left,
                right,
                left_fraction,
                ..
            } = &mut node.kind
            {
                *left_fraction = match (own, covers[*left], covers[*right]) {
                    (Some(c), Some(l), Some(r)) if c > 0 && l + r == c => Some(l as f64 / c as f64),
                    _ => None,
                };
            }
        }
    }
}

/// A node whose cover does not equal the sum of its children's covers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverIssue {
    pub tree: usize,
    pub node_id: i64,
    pub cover: u64,
    pub left_cover: u64,
    pub right_cover: u64,
}

impl fmt::Display for CoverIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tree {} node {}: cover {} != {} (left) + {} (right)",
            self.tree, self.node_id, self.cover, self.left_cover, self.right_cover
        )
    }
}

/// A validated, immutable tree ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    features: FeatureSet,
    trees: Vec<Tree>,
    base_score: f64,
    objective: Objective,
}

impl TreeEnsemble {
    pub fn parse(document: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(document).map_err(|e| ModelError::Schema(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let features = FeatureSet::new(doc.features.iter().cloned())?;
        if !doc.base_score.is_finite() {
            return Err(ModelError::Value("base_score is not finite".into()));
        }
        let trees = doc
            .trees
            .iter()
            .enumerate()
            .map(|(t, tree)| build_tree(t, tree, features.count()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            features,
            trees,
            base_score: doc.base_score,
            objective: doc.objective,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            features: self.features.names().to_vec(),
            base_score: self.base_score,
            objective: self.objective,
            trees: self
                .trees
                .iter()
                .map(|tree| TreeDocument {
                    root: tree.nodes[tree.root].id,
                    nodes: tree
                        .nodes
                        .iter()
                        .map(|node| {
                            let cover = node.cover.map(|c| c as i64);
                            match &node.kind {
                                NodeKind::Leaf { value } => NodeDocument {
                                    cover,
                                    ..NodeDocument::leaf(node.id, *value)
                                },
                                NodeKind::Internal {
                                    feature,
                                    threshold,
                                    left,
                                    right,
                                    ..
                                } => NodeDocument {
                                    cover,
                                    ..NodeDocument::split(
                                        node.id,
                                        *feature as i64,
                                        *threshold,
                                        tree.nodes[*left].id,
                                        tree.nodes[*right].id,
                                        0,
                                    )
                                },
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn check_width(&self, width: usize) -> Result<()> {
        if width != self.features.count() {
            return Err(ModelError::Width {
                expected: self.features.count(),
                actual: width,
            });
        }
        Ok(())
    }

    /// Additive margin: base score plus the routed leaf of every tree.
    pub fn predict_raw(&self, x: &Instance) -> Result<f64> {
        self.check_width(x.width())?;
        Ok(self
            .trees
            .iter()
            .fold(self.base_score, |acc, tree| acc + tree.route(x.values())))
    }

    /// Margin passed through the objective transform.
    pub fn predict(&self, x: &Instance) -> Result<f64> {
        Ok(self.objective.apply(self.predict_raw(x)?))
    }

    /// Returns a copy whose covers and left fractions come from routing every
    /// background row through every tree.
    pub fn fit_coverage(&self, background: &Dataset) -> Result<Self> {
        if background.is_empty() {
            return Err(ModelError::EmptyBackground);
        }
        self.check_width(background.features().count())?;
        if background.features() != &self.features {
            return Err(ModelError::FeatureMismatch(format!(
                "background columns {:?} differ from model features {:?}",
                background.features().names(),
                self.features.names()
            )));
        }
        let mut fitted = self.clone();
        for tree in &mut fitted.trees {
            let mut counts = vec![0u64; tree.nodes.len()];
            for row in background.rows() {
                tree.route_counting(row.values(), &mut counts);
            }
            for (node, count) in tree.nodes.iter_mut().zip(counts) {
                node.cover = Some(count);
            }
            tree.refresh_fractions();
        }
        Ok(fitted)
    }

    /// Nodes whose cover differs from the sum of their children's covers.
    /// Nodes with an unknown child cover are skipped.
    pub fn cover_issues(&self) -> Vec<CoverIssue> {
        let mut issues = Vec::new();
        for (t, tree) in self.trees.iter().enumerate() {
            for node in &tree.nodes {
                if let NodeKind::Internal { left, right, .. } = node.kind {
                    if let (Some(c), Some(l), Some(r)) =
                        (node.cover, tree.nodes[left].cover, tree.nodes[right].cover)
                    {
                        if l + r != c {
                            issues.push(CoverIssue {
                                tree: t,
                                node_id: node.id,
                                cover: c,
                                left_cover: l,
                                right_cover: r,
                            });
                        }
                    }
                }
            }
        }
        issues
    }

    /// Feature indices that no split in any tree uses.
    pub fn unused_features(&self) -> Vec<usize> {
        let mut used = vec![false; self.features.count()];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let NodeKind::Internal { feature, .. } = node.kind {
                    used[feature] = true;
                }
            }
        }
        used.iter()
            .enumerate()
            .filter(|(_, u)| !**u)
            .map(|(i, _)| i)
            .collect()
    }
}

fn build_tree(t: usize, doc: &TreeDocument, n_features: usize) -> Result<Tree> {
    if doc.nodes.is_empty() {
        return Err(ModelError::Structure(format!("tree {t}: node table is empty")));
    }
    let mut index_of: HashMap<i64, usize> = HashMap::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.iter().enumerate() {
        if index_of.insert(node.id, i).is_some() {
            return Err(ModelError::Structure(format!(
                "tree {t}: duplicate node id {}",
                node.id
            )));
        }
    }
    let lookup = |id: i64, from: i64| -> Result<usize> {
        index_of.get(&id).copied().ok_or_else(|| {
            ModelError::Structure(format!(
                "tree {t}: node {from} references missing node id {id}"
            ))
        })
    };

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for node in &doc.nodes {
        let id = node.id;
        let cover = match node.cover {
            Some(c) if c < 0 => {
                return Err(ModelError::Value(format!(
                    "tree {t}: node {id} has negative cover {c}"
                )))
            }
            Some(c) => Some(c as u64),
            None => None,
        };
        let split_fields = [
            ("feature", node.feature.is_some()),
            ("threshold", node.threshold.is_some()),
            ("left", node.left.is_some()),
            ("right", node.right.is_some()),
        ];
        let kind = if let Some(value) = node.leaf {
            if let Some((field, _)) = split_fields.iter().find(|(_, present)| *present) {
                return Err(ModelError::Schema(format!(
                    "tree {t}: leaf node {id} carries split field {field:?}"
                )));
            }
            if !value.is_finite() {
                return Err(ModelError::Value(format!(
                    "tree {t}: leaf node {id} has non-finite value"
                )));
            }
            NodeKind::Leaf { value }
        } else {
            let missing = split_fields
                .into_iter()
                .chain(std::iter::once(("cover", cover.is_some())))
                .find(|(_, present)| !*present);
            if let Some((field, _)) = missing {
                return Err(ModelError::Schema(format!(
                    "tree {t}: node {id} is neither a leaf nor a complete split (missing {field:?})"
                )));
            }
            let feature = node.feature.unwrap_or_default();
            if feature < 0 || feature as usize >= n_features {
                return Err(ModelError::Structure(format!(
                    "tree {t}: node {id} splits on feature index {feature}, model has {n_features} features"
                )));
            }
            let threshold = node.threshold.unwrap_or_default();
            if !threshold.is_finite() {
                return Err(ModelError::Value(format!(
                    "tree {t}: node {id} has non-finite threshold"
                )));
            }
            NodeKind::Internal {
                feature: feature as usize,
                threshold,
                left: lookup(node.left.unwrap_or_default(), id)?,
                right: lookup(node.right.unwrap_or_default(), id)?,
                left_fraction: None,
            }
        };
        nodes.push(TreeNode { id, kind, cover });
    }

    let root = lookup(doc.root, doc.root).map_err(|_| {
        ModelError::Structure(format!("tree {t}: root id {} is not in the node table", doc.root))
    })?;
    check_shape(t, root, &nodes)?;

    let mut tree = Tree { root, nodes };
    infer_leaf_covers(&mut tree);
    tree.refresh_fractions();
    Ok(tree)
}

/// Single root, every node reachable, no cycles, no shared children.
fn check_shape(t: usize, root: usize, nodes: &[TreeNode]) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unseen,
        Open,
        Done,
    }
    let mut marks = vec![Mark::Unseen; nodes.len()];
    let mut parent: Vec<Option<usize>> = vec![None; nodes.len()];
    // (node, children pushed?)
    let mut stack = vec![(root, false)];
    while let Some((idx, expanded)) = stack.pop() {
        if expanded {
            marks[idx] = Mark::Done;
            continue;
        }
        marks[idx] = Mark::Open;
        stack.push((idx, true));
        if let NodeKind::Internal { left, right, .. } = nodes[idx].kind {
            if left == right {
                return Err(ModelError::Structure(format!(
                    "tree {t}: node {} uses node {} as both children",
                    nodes[idx].id, nodes[left].id
                )));
            }
            for child in [right, left] {
                match marks[child] {
                    Mark::Open => {
                        return Err(ModelError::Structure(format!(
                            "tree {t}: cycle detected: node {} points back to ancestor {}",
                            nodes[idx].id, nodes[child].id
                        )))
                    }
                    Mark::Done => {
                        let other = parent[child].map(|p| nodes[p].id).unwrap_or(nodes[root].id);
                        return Err(ModelError::Structure(format!(
                            "tree {t}: node {} has more than one parent ({} and {})",
                            nodes[child].id, other, nodes[idx].id
                        )));
                    }
                    Mark::Unseen => {
                        parent[child] = Some(idx);
                        stack.push((child, false));
                    }
                }
            }
        }
    }
    if let Some(orphan) = marks.iter().position(|m| *m == Mark::Unseen) {
        return Err(ModelError::Structure(format!(
            "tree {t}: node {} is not reachable from the root",
            nodes[orphan].id
        )));
    }
    Ok(())
}

/// Fill a missing child cover from `parent - sibling` when that is well defined.
fn infer_leaf_covers(tree: &mut Tree) {
    // Parents precede children in a pre-order walk, so one pass settles each level.
    let mut order = Vec::with_capacity(tree.nodes.len());
    let mut stack = vec![tree.root];
    while let Some(idx) = stack.pop() {
        order.push(idx);
        if let NodeKind::Internal { left, right, .. } = tree.nodes[idx].kind {
            stack.push(right);
            stack.push(left);
        }
    }
    for idx in order {
        if let NodeKind::Internal { left, right, .. } = tree.nodes[idx].kind {
            let Some(c) = tree.nodes[idx].cover else { continue };
            match (tree.nodes[left].cover, tree.nodes[right].cover) {
                (None, Some(r)) if r <= c => tree.nodes[left].cover = Some(c - r),
                (Some(l), None) if l <= c => tree.nodes[right].cover = Some(c - l),
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STUMP: &str = r#"{
        "features": ["x0", "x1"],
        "base_score": 0.0,
        "objective": "raw",
        "trees": [{"root": 0, "nodes": [
            {"id": 0, "feature": 0, "threshold": 10.0, "left": 1, "right": 2, "cover": 100},
            {"id": 1, "leaf": 2.0, "cover": 60},
            {"id": 2, "leaf": 8.0, "cover": 40}
        ]}]
    }"#;

    fn inst(v: &[f64]) -> Instance {
        Instance::new(v.to_vec()).unwrap()
    }

    fn fraction(model: &TreeEnsemble) -> Option<f64> {
        match model.trees()[0].node(0).kind {
            NodeKind::Internal { left_fraction, .. } => left_fraction,
            _ => None,
        }
    }

    #[test]
    fn constant_model() {
        let model = TreeEnsemble::parse(
            r#"{"features":["a"],"base_score":0,"objective":"raw",
                "trees":[{"root":0,"nodes":[{"id":0,"leaf":0.5}]}]}"#,
        )
        .unwrap();
        for v in [-1e9, 0.0, 3.5, 1e9] {
            assert_eq!(model.predict(&inst(&[v])).unwrap(), 0.5);
        }
    }

    #[test]
    fn stump_fraction_and_routing() {
        let model = TreeEnsemble::parse(STUMP).unwrap();
        assert_eq!(fraction(&model), Some(0.6));
        assert_eq!(model.predict(&inst(&[3.0, 0.0])).unwrap(), 2.0);
        assert_eq!(model.predict(&inst(&[10.0, 0.0])).unwrap(), 2.0);
        assert_eq!(model.predict(&inst(&[10.5, 0.0])).unwrap(), 8.0);
    }

    #[test]
    fn leaf_cover_inferred_from_sibling() {
        let doc = STUMP.replace(r#""leaf": 8.0, "cover": 40"#, r#""leaf": 8.0"#);
        let model = TreeEnsemble::parse(&doc).unwrap();
        assert_eq!(model.trees()[0].node(2).cover, Some(40));
        assert_eq!(fraction(&model), Some(0.6));
    }

    #[test]
    fn logistic_objective_transforms_margin() {
        let doc = STUMP.replace(r#""raw""#, r#""logistic""#);
        let model = TreeEnsemble::parse(&doc).unwrap();
        let x = inst(&[3.0, 0.0]);
        assert_eq!(model.predict_raw(&x).unwrap(), 2.0);
        let p = model.predict(&x).unwrap();
        assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn missing_child_is_structure_error() {
        let doc = STUMP.replace(r#""left": 1"#, r#""left": 7"#);
        let err = TreeEnsemble::parse(&doc).unwrap_err();
        assert!(matches!(err, ModelError::Structure(ref m) if m.contains("missing node id 7")));
    }

    #[test]
    fn cycle_is_structure_error() {
        let doc = r#"{"features":["a"],"base_score":0,"objective":"raw","trees":[{"root":0,"nodes":[
            {"id":0,"feature":0,"threshold":1,"left":1,"right":2,"cover":2},
            {"id":1,"feature":0,"threshold":0,"left":0,"right":2,"cover":1},
            {"id":2,"leaf":1}]}]}"#;
        let err = TreeEnsemble::parse(doc).unwrap_err();
        assert!(matches!(err, ModelError::Structure(ref m) if m.contains("cycle")), "{err}");
    }

    #[test]
    fn orphan_and_shared_child_rejected() {
        let orphan = STUMP.replace(
            r#"{"id": 2, "leaf": 8.0, "cover": 40}"#,
            r#"{"id": 2, "leaf": 8.0, "cover": 40}, {"id": 3, "leaf": 1.0}"#,
        );
        assert!(matches!(
            TreeEnsemble::parse(&orphan),
            Err(ModelError::Structure(m)) if m.contains("not reachable")
        ));
        let shared = STUMP.replace(r#""right": 2"#, r#""right": 1"#);
        assert!(matches!(TreeEnsemble::parse(&shared), Err(ModelError::Structure(_))));
    }

    #[test]
    fn schema_errors() {
        let extra = STUMP.replace(r#""base_score": 0.0,"#, r#""base_score": 0.0, "bias": 1,"#);
        assert!(matches!(TreeEnsemble::parse(&extra), Err(ModelError::Schema(_))));
        let no_cover = STUMP.replace(r#", "cover": 100"#, "");
        assert!(matches!(TreeEnsemble::parse(&no_cover), Err(ModelError::Schema(_))));
        let mixed = STUMP.replace(r#""leaf": 2.0"#, r#""leaf": 2.0, "feature": 0"#);
        assert!(matches!(TreeEnsemble::parse(&mixed), Err(ModelError::Schema(_))));
        let dup = STUMP.replace(r#"["x0", "x1"]"#, r#"["x0", "x0"]"#);
        assert!(matches!(TreeEnsemble::parse(&dup), Err(ModelError::Schema(_))));
    }

    #[test]
    fn value_errors() {
        let neg = STUMP.replace(r#""cover": 40"#, r#""cover": -4"#);
        assert!(matches!(TreeEnsemble::parse(&neg), Err(ModelError::Value(_))));
        let bad_feature = STUMP.replace(r#""feature": 0"#, r#""feature": 2"#);
        assert!(matches!(TreeEnsemble::parse(&bad_feature), Err(ModelError::Structure(_))));
        assert!(Instance::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn width_error() {
        let model = TreeEnsemble::parse(STUMP).unwrap();
        assert_eq!(
            model.predict(&inst(&[1.0])),
            Err(ModelError::Width { expected: 2, actual: 1 })
        );
    }

    fn background(model: &TreeEnsemble, x0: &[f64]) -> Dataset {
        let rows = x0.iter().map(|v| inst(&[*v, 0.0])).collect();
        Dataset::new(model.features().clone(), rows).unwrap()
    }

    #[test]
    fn fit_coverage_counts_rows() {
        let model = TreeEnsemble::parse(STUMP).unwrap();
        let bg = background(&model, &[0.0, 1.0, 2.0, 3.0, 4.0, 10.0, 11.0, 12.0, 13.0, 14.0]);
        let fitted = model.fit_coverage(&bg).unwrap();
        let tree = &fitted.trees()[0];
        assert_eq!(tree.node(tree.root()).cover, Some(10));
        assert_eq!(fraction(&fitted), Some(0.6));
        assert!(fitted.cover_issues().is_empty());

        let all_left = background(&model, &[1.0, 2.0, 3.0]);
        let fitted = model.fit_coverage(&all_left).unwrap();
        assert_eq!(fraction(&fitted), Some(1.0));
        assert_eq!(fitted.trees()[0].node(2).cover, Some(0));
    }

    #[test]
    fn empty_background_rejected() {
        let features = FeatureSet::new(["x0", "x1"]).unwrap();
        assert_eq!(Dataset::new(features, vec![]), Err(ModelError::EmptyBackground));
    }

    #[test]
    fn cover_issue_reported_and_fraction_dropped() {
        let doc = STUMP.replace(r#""cover": 60"#, r#""cover": 65"#);
        let model = TreeEnsemble::parse(&doc).unwrap();
        let issues = model.cover_issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].node_id, 0);
        assert_eq!(fraction(&model), None);
    }

    #[test]
    fn unused_features_listed() {
        let model = TreeEnsemble::parse(STUMP).unwrap();
        assert_eq!(model.unused_features(), vec![1]);
    }

    #[test]
    fn document_round_trip() {
        let model = TreeEnsemble::parse(STUMP).unwrap();
        let again = TreeEnsemble::parse(&model.to_json()).unwrap();
        assert_eq!(model, again);
    }
}
