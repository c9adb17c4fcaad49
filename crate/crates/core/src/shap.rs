//! Exact Shapley attributions over the interventional expectation of a tree
//! ensemble.
//!
//! The coalition value `v(S)` is the coverage-weighted traversal: a split on a
//! feature in `S` follows `x`, any other split averages both children by the
//! fraction of background rows that went each way. Shapley values are then the
//! exact weighted sum over all `2^|F|` coalitions, so the cost is exponential
//! in the number of features and is capped by [`ShapConfig::cap`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, FeatureSet, Instance, ModelError, NodeKind, Tree, TreeEnsemble};

pub const DEFAULT_CAP: usize = 16;
/// Hard ceiling for the enumeration cap; the value table alone is `2^cap` floats.
pub const MAX_CAP: usize = 24;

/// Below this width the Shapley weights are exact integer ratios.
const EXACT_WEIGHT_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapError {
    #[error(
        "model has {features} features but the enumeration cap is {cap}; exact Shapley values \
         need 2^{features} = {cost} coalition evaluations per instance"
    )]
    TooManyFeatures { features: usize, cap: usize, cost: u128 },
    #[error(
        "tree {tree} node {node_id}: no background rows reach this split, so its branch weights \
         are undefined (fit coverage on a larger background)"
    )]
    Coverage { tree: usize, node_id: i64 },
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<ShapError>,
    },
    #[error("no attributions to aggregate")]
    EmptyInput,
    #[error("attribution {index} has {actual} values, expected {expected}")]
    Width {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("attribution violates efficiency: sum(phi) = {sum}, prediction - base = {gap}")]
    Efficiency { sum: f64, gap: f64 },
    #[error("non-finite attribution value")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = ShapError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapConfig {
    pub cap: usize,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP }
    }
}

// ---------------------------------------------------------------------------
// Coalitions
// ---------------------------------------------------------------------------

/// A subset of feature indices, as a bit set of fixed width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoalitionMask {
    bits: u64,
    width: usize,
}

impl CoalitionMask {
    pub fn empty(width: usize) -> Self {
        assert!(width <= 64, "coalition width {width} exceeds 64");
        Self { bits: 0, width }
    }

    pub fn full(width: usize) -> Self {
        let bits = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        Self { bits, width }
    }

    pub fn from_bits(bits: u64, width: usize) -> Self {
        let full = Self::full(width);
        assert_eq!(bits & !full.bits, 0, "bits outside coalition width");
        Self { bits, width }
    }

    pub fn from_indices(indices: &[usize], width: usize) -> Self {
        indices
            .iter()
            .fold(Self::empty(width), |mask, &i| mask.with(i))
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn width(self) -> usize {
        self.width
    }

    pub fn contains(self, feature: usize) -> bool {
        feature < self.width && self.bits >> feature & 1 == 1
    }

    pub fn with(self, feature: usize) -> Self {
        assert!(feature < self.width, "feature {feature} outside coalition width");
        Self {
            bits: self.bits | 1 << feature,
            width: self.width,
        }
    }

    pub fn len(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.bits & !other.bits == 0
    }
}

// ---------------------------------------------------------------------------
// Attributions
// ---------------------------------------------------------------------------

/// Per-feature Shapley values for one instance, in raw margin space.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    phi: Vec<f64>,
    base_value: f64,
    prediction: f64,
    instance: Instance,
}

impl Attribution {
    /// Validates finiteness, width, and `sum(phi) == prediction - base_value`.
    pub fn new(phi: Vec<f64>, base_value: f64, prediction: f64, instance: Instance) -> Result<Self> {
        if phi.len() != instance.width() {
            return Err(ShapError::Width {
                index: 0,
                expected: instance.width(),
                actual: phi.len(),
            });
        }
        if !base_value.is_finite() || !prediction.is_finite() || phi.iter().any(|p| !p.is_finite()) {
            return Err(ShapError::NonFinite);
        }
        let sum: f64 = phi.iter().sum();
        let gap = prediction - base_value;
        let scale = phi.iter().map(|p| p.abs()).sum::<f64>() + base_value.abs() + prediction.abs();
        if (sum - gap).abs() > 1e-9 * scale.max(1.0) {
            return Err(ShapError::Efficiency { sum, gap });
        }
        Ok(Self {
            phi,
            base_value,
            prediction,
            instance,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Expected model output `E[f(X)]` over the background.
    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    /// Model output `f(x)` for this instance.
    pub fn prediction(&self) -> f64 {
        self.prediction
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn efficiency_residual(&self) -> f64 {
        (self.phi.iter().sum::<f64>() - (self.prediction - self.base_value)).abs()
    }

    pub fn to_export(&self, features: &FeatureSet) -> AttributionExport {
        AttributionExport {
            features: features.names().to_vec(),
            base_value: self.base_value,
            prediction: self.prediction,
            phi: self.phi.clone(),
        }
    }
}

/// Wire form: `{"features", "base_value", "prediction", "phi"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionExport {
    pub features: Vec<String>,
    pub base_value: f64,
    pub prediction: f64,
    pub phi: Vec<f64>,
}

pub fn export_batch_json(attrs: &[Attribution], features: &FeatureSet) -> String {
    let exports: Vec<_> = attrs.iter().map(|a| a.to_export(features)).collect();
    serde_json::to_string_pretty(&exports).expect("attribution export serializes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalAttribution {
    pub mean_abs_phi: Vec<f64>,
    pub n_instances: usize,
}

// ---------------------------------------------------------------------------
// Coalition value
// ---------------------------------------------------------------------------

/// `E[f(X) | do(X_S = x_S)]` in raw margin space.
pub fn exp_value(model: &TreeEnsemble, x: &Instance, coalition: CoalitionMask) -> Result<f64> {
    model.check_width(x.width())?;
    model.check_width(coalition.width())?;
    let mut total = model.base_score();
    for (t, tree) in model.trees().iter().enumerate() {
        total += tree_value(t, tree, tree.root(), x.values(), coalition)?;
    }
    Ok(total)
}

fn tree_value(t: usize, tree: &Tree, idx: usize, x: &[f64], coalition: CoalitionMask) -> Result<f64> {
    let node = tree.node(idx);
    match node.kind {
        NodeKind::Leaf { value } => Ok(value),
        NodeKind::Internal {
            feature,
            threshold,
            left,
            right,
            left_fraction,
        } => {
            if coalition.contains(feature) {
                let next = if x[feature] <= threshold { left } else { right };
                return tree_value(t, tree, next, x, coalition);
            }
            let frac = left_fraction.ok_or(ShapError::Coverage {
                tree: t,
                node_id: node.id,
            })?;
            // A branch no background row takes contributes nothing and may itself be uncovered.
            let l = if frac > 0.0 {
                tree_value(t, tree, left, x, coalition)? * frac
            } else {
                0.0
            };
            let r = if frac < 1.0 {
                tree_value(t, tree, right, x, coalition)? * (1.0 - frac)
            } else {
                0.0
            };
            Ok(l + r)
        }
    }
}

// ---------------------------------------------------------------------------
// Shapley values
// ---------------------------------------------------------------------------

/// `w[k] = k! (n-k-1)! / n!` for `k = 0..n`.
pub fn shapley_weights(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n <= EXACT_WEIGHT_LIMIT {
        let fact: Vec<u64> = (0..=n as u64)
            .scan(1u64, |acc, k| {
                if k > 0 {
                    *acc *= k;
                }
                Some(*acc)
            })
            .collect();
        (0..n)
            .map(|k| (fact[k] * fact[n - k - 1]) as f64 / fact[n] as f64)
            .collect()
    } else {
        let ln_fact: Vec<f64> = (0..=n)
            .scan(0.0f64, |acc, k| {
                if k > 1 {
                    *acc += (k as f64).ln();
                }
                Some(*acc)
            })
            .collect();
        (0..n)
            .map(|k| (ln_fact[k] + ln_fact[n - k - 1] - ln_fact[n]).exp())
            .collect()
    }
}

/// Coalition values for one tree, indexed by the subset of the tree's own split features.
struct TreeTable {
    features: Vec<usize>,
    values: Vec<f64>,
}

impl TreeTable {
    fn build(t: usize, tree: &Tree, x: &Instance, width: usize) -> Result<Self> {
        let mut features: Vec<usize> = tree
            .nodes()
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Internal { feature, .. } => Some(feature),
                NodeKind::Leaf { .. } => None,
            })
            .collect();
        features.sort_unstable();
        features.dedup();
        let values = (0..1u64 << features.len())
            .map(|local| {
                let mask = features
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| local >> bit & 1 == 1)
                    .fold(CoalitionMask::empty(width), |m, (_, &f)| m.with(f));
                tree_value(t, tree, tree.root(), x.values(), mask)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { features, values })
    }

    fn lookup(&self, coalition: u64) -> f64 {
        let local = self
            .features
            .iter()
            .enumerate()
            .fold(0usize, |acc, (bit, &f)| acc | ((coalition >> f & 1) as usize) << bit);
        self.values[local]
    }
}

/// Exact Shapley values for one instance by enumerating every coalition.
pub fn shapley(model: &TreeEnsemble, x: &Instance, config: &ShapConfig) -> Result<Attribution> {
    let n = model.features().count();
    model.check_width(x.width())?;
    if n > config.cap || n > MAX_CAP {
        return Err(ShapError::TooManyFeatures {
            features: n,
            cap: config.cap.min(MAX_CAP),
            cost: 1u128 << n.min(127),
        });
    }

    let tables = model
        .trees()
        .iter()
        .enumerate()
        .map(|(t, tree)| TreeTable::build(t, tree, x, n))
        .collect::<Result<Vec<_>>>()?;

    // Same accumulation order as `exp_value`, so v[S] is bitwise exp_value(x, S).
    let value: Vec<f64> = (0..1u64 << n)
        .map(|s| {
            tables
                .iter()
                .fold(model.base_score(), |acc, table| acc + table.lookup(s))
        })
        .collect();

    let weights = shapley_weights(n);
    let mut phi = vec![0.0; n];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        for s in (0..1u64 << n).filter(|s| s & bit == 0) {
            let delta = value[(s | bit) as usize] - value[s as usize];
            acc += weights[s.count_ones() as usize] * delta;
        }
        *phi_i = acc;
    }

    let base_value = value[0];
    let prediction = value[(1usize << n) - 1];
    Attribution::new(phi, base_value, prediction, x.clone())
}

/// Row-wise [`shapley`]; rows run in parallel and output order matches input order.
pub fn shapley_batch(model: &TreeEnsemble, xs: &Dataset, config: &ShapConfig) -> Result<Vec<Attribution>> {
    xs.rows()
        .par_iter()
        .enumerate()
        .map(|(row, x)| {
            shapley(model, x, config).map_err(|e| ShapError::Row {
                row,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean of `|phi_i|` over instances.
pub fn aggregate_global(attrs: &[Attribution]) -> Result<GlobalAttribution> {
    let first = attrs.first().ok_or(ShapError::EmptyInput)?;
    let width = first.phi().len();
    let mut sums = vec![0.0; width];
    for (index, attr) in attrs.iter().enumerate() {
        if attr.phi().len() != width {
            return Err(ShapError::Width {
                index,
                expected: width,
                actual: attr.phi().len(),
            });
        }
        for (s, p) in sums.iter_mut().zip(attr.phi()) {
            *s += p.abs();
        }
    }
    let n = attrs.len() as f64;
    Ok(GlobalAttribution {
        mean_abs_phi: sums.into_iter().map(|s| s / n).collect(),
        n_instances: attrs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelDocument, NodeDocument, Objective, TreeDocument};

    fn stump() -> TreeEnsemble {
        TreeEnsemble::from_document(&ModelDocument {
            features: vec!["x0".into(), "x1".into()],
            base_score: 0.0,
            objective: Objective::Raw,
            trees: vec![TreeDocument {
                root: 0,
                nodes: vec![
                    NodeDocument::split(0, 0, 10.0, 1, 2, 100),
                    NodeDocument::leaf(1, 2.0).with_cover(60),
                    NodeDocument::leaf(2, 8.0).with_cover(40),
                ],
            }],
        })
        .unwrap()
    }

    fn inst(v: &[f64]) -> Instance {
        Instance::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constant_tree_ignores_coalition() {
        let model = TreeEnsemble::from_document(&ModelDocument {
            features: vec!["a".into()],
            base_score: 0.0,
            objective: Objective::Raw,
            trees: vec![TreeDocument {
                root: 0,
                nodes: vec![NodeDocument::leaf(0, 0.5)],
            }],
        })
        .unwrap();
        let x = inst(&[3.0]);
        assert_eq!(exp_value(&model, &x, CoalitionMask::empty(1)).unwrap(), 0.5);
        assert_eq!(exp_value(&model, &x, CoalitionMask::full(1)).unwrap(), 0.5);
    }

    #[test]
    fn stump_expectations() {
        let model = stump();
        let x = inst(&[3.0, 0.0]);
        assert_eq!(exp_value(&model, &x, CoalitionMask::from_indices(&[0], 2)).unwrap(), 2.0);
        let e = exp_value(&model, &x, CoalitionMask::empty(2)).unwrap();
        assert!((e - 4.4).abs() < 1e-15);
    }

    #[test]
    fn stump_shapley() {
        let attr = shapley(&stump(), &inst(&[3.0, 0.0]), &ShapConfig::default()).unwrap();
        assert!((attr.phi()[0] + 2.4).abs() < 1e-12);
        assert_eq!(attr.phi()[1], 0.0);
        assert!((attr.base_value() - 4.4).abs() < 1e-15);
        assert_eq!(attr.prediction(), 2.0);
    }

    #[test]
    fn weight_for_three_features() {
        let w = shapley_weights(3);
        assert_eq!(w[1], 1.0 / 6.0);
        assert_eq!(w[0], 1.0 / 3.0);
    }

    #[test]
    fn log_space_weights_agree_with_exact() {
        let n = 16usize;
        let w = shapley_weights(n);
        let fact = |k: usize| (1..=k as u64).product::<u64>() as f64;
        for (k, wk) in w.iter().enumerate() {
            let exact = fact(k) * fact(n - k - 1) / fact(n);
            assert!((wk - exact).abs() <= 1e-12 * exact, "k={k}");
        }
    }

    #[test]
    fn cap_exceeded() {
        let err = shapley(&stump(), &inst(&[3.0, 0.0]), &ShapConfig { cap: 1 }).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ShapError::TooManyFeatures { features: 2, cap: 1, cost: 4 }));
        assert!(msg.contains("cap is 1") && msg.contains("2^2"), "{msg}");
    }

    #[test]
    fn uncovered_split_is_coverage_error() {
        let model = TreeEnsemble::from_document(&ModelDocument {
            features: vec!["a".into(), "b".into()],
            base_score: 0.0,
            objective: Objective::Raw,
            trees: vec![TreeDocument {
                root: 0,
                nodes: vec![
                    NodeDocument::split(0, 0, 0.0, 1, 2, 5),
                    NodeDocument::leaf(1, 1.0).with_cover(5),
                    NodeDocument::split(2, 1, 0.0, 3, 4, 0),
                    NodeDocument::leaf(3, 2.0).with_cover(0),
                    NodeDocument::leaf(4, 3.0).with_cover(0),
                ],
            }],
        })
        .unwrap();
        let x = inst(&[1.0, 1.0]);
        // Unconditioned: the uncovered branch has zero weight.
        assert_eq!(exp_value(&model, &x, CoalitionMask::empty(2)).unwrap(), 1.0);
        // Conditioning on feature 0 lands on the uncovered split.
        let err = exp_value(&model, &x, CoalitionMask::from_indices(&[0], 2)).unwrap_err();
        assert_eq!(err, ShapError::Coverage { tree: 0, node_id: 2 });
    }

    #[test]
    fn aggregate_examples() {
        let a = |phi: Vec<f64>| {
            let w = phi.len();
            let s: f64 = phi.iter().sum();
            Attribution::new(phi, 0.0, s, inst(&vec![0.0; w])).unwrap()
        };
        let g = aggregate_global(&[a(vec![-2.4, 0.0])]).unwrap();
        assert_eq!(g.mean_abs_phi, vec![2.4, 0.0]);
        let g = aggregate_global(&[a(vec![1.0, -1.0]), a(vec![-3.0, 1.0])]).unwrap();
        assert_eq!(g.mean_abs_phi, vec![2.0, 1.0]);
        assert_eq!(g.n_instances, 2);
        let g = aggregate_global(&[a(vec![0.0; 3]), a(vec![0.0; 3])]).unwrap();
        assert_eq!(g.mean_abs_phi, vec![0.0; 3]);
        assert_eq!(aggregate_global(&[]), Err(ShapError::EmptyInput));
    }

    #[test]
    fn attribution_rejects_inefficient_phi() {
        let err = Attribution::new(vec![1.0], 0.0, 2.0, inst(&[0.0])).unwrap_err();
        assert!(matches!(err, ShapError::Efficiency { .. }));
    }

    #[test]
    fn mask_basics() {
        let m = CoalitionMask::from_indices(&[0, 2], 3);
        assert!(m.contains(0) && !m.contains(1) && m.contains(2));
        assert_eq!(m.len(), 2);
        assert!(m.is_subset_of(CoalitionMask::full(3)));
        assert!(CoalitionMask::empty(3).is_empty());
    }
}
