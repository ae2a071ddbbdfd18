//! Plain-text model format.
//!
//! ```text
//! sac-model v1 features=<n> trees=<t> lr=<r> base=<m>
//! <tree>,<node>,split,<feature>,<threshold>,<left>,<right>,
//! <tree>,<node>,leaf,,,,,<weight>
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written model parses back bit-identically.

use std::fmt::Write as _;

use super::boost::{BoostedModel, DecisionTree, TreeNode};
use super::SacError;

const MAGIC: &str = "sac-model v1";

pub fn write_model(model: &BoostedModel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{MAGIC} features={} trees={} lr={:?} base={:?}",
        model.n_features,
        model.trees.len(),
        model.learning_rate,
        model.base_margin
    );
    for (t, tree) in model.trees.iter().enumerate() {
        for (n, node) in tree.nodes.iter().enumerate() {
            let _ = match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => writeln!(out, "{t},{n},split,{feature},{threshold:?},{left},{right},"),
                TreeNode::Leaf { weight } => writeln!(out, "{t},{n},leaf,,,,,{weight:?}"),
            };
        }
    }
    out
}

fn format_err(line: usize, msg: impl Into<String>) -> SacError {
    SacError::ModelFormat { line, msg: msg.into() }
}

fn header_field<'a>(fields: &[&'a str], key: &str) -> Option<&'a str> {
    fields.iter().find_map(|f| f.strip_prefix(key)?.strip_prefix('='))
}

fn num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, SacError> {
    s.trim()
        .parse()
        .map_err(|_| format_err(line, format!("invalid {what}: {s:?}")))
}

pub fn parse_model(text: &str) -> Result<BoostedModel, SacError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| format_err(1, "empty model file"))?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| format_err(hl, "missing 'sac-model v1' header"))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let field = |k: &str| header_field(&fields, k).ok_or_else(|| format_err(hl, format!("header lacks {k}")));
    let n_features: usize = num(field("features")?, hl, "features")?;
    let n_trees: usize = num(field("trees")?, hl, "trees")?;
    let learning_rate: f64 = num(field("lr")?, hl, "lr")?;
    let base_margin: f64 = num(field("base")?, hl, "base")?;
    if !learning_rate.is_finite() || !base_margin.is_finite() {
        return Err(format_err(hl, "non-finite header value"));
    }

    let mut trees: Vec<DecisionTree> = (0..n_trees).map(|_| DecisionTree { nodes: Vec::new() }).collect();
    for (ln, line) in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(format_err(ln, format!("expected 8 columns, found {}", cols.len())));
        }
        let t: usize = num(cols[0], ln, "tree index")?;
        let n: usize = num(cols[1], ln, "node index")?;
        let tree = trees
            .get_mut(t)
            .ok_or_else(|| format_err(ln, format!("tree {t} out of range")))?;
        if n != tree.nodes.len() {
            return Err(format_err(ln, format!("node {n} out of order")));
        }
        let node = match cols[2] {
            "split" => {
                let feature: usize = num(cols[3], ln, "feature")?;
                let threshold: f64 = num(cols[4], ln, "threshold")?;
                if feature >= n_features {
                    return Err(format_err(ln, format!("feature {feature} >= {n_features}")));
                }
                if threshold.is_nan() {
                    return Err(format_err(ln, "NaN threshold"));
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left: num(cols[5], ln, "left child")?,
                    right: num(cols[6], ln, "right child")?,
                }
            }
            "leaf" => {
                let weight: f64 = num(cols[7], ln, "weight")?;
                if !weight.is_finite() {
                    return Err(format_err(ln, "non-finite leaf weight"));
                }
                TreeNode::Leaf { weight }
            }
            other => return Err(format_err(ln, format!("unknown node kind {other:?}"))),
        };
        tree.nodes.push(node);
    }
    for (t, tree) in trees.iter().enumerate() {
        validate_tree(tree).map_err(|m| format_err(0, format!("tree {t}: {m}")))?;
    }
    Ok(BoostedModel {
        n_features,
        trees,
        base_margin,
        learning_rate,
    })
}

/// Every child index must point forward (preorder) and every node must be
/// reachable exactly once, so prediction always terminates.
fn validate_tree(tree: &DecisionTree) -> Result<(), String> {
    if tree.nodes.is_empty() {
        return Err("no nodes".into());
    }
    let mut seen = vec![false; tree.nodes.len()];
    seen[0] = true;
    for (i, node) in tree.nodes.iter().enumerate() {
        if let TreeNode::Split { left, right, .. } = *node {
            for c in [left, right] {
                if c <= i || c >= tree.nodes.len() {
                    return Err(format!("node {i} has invalid child {c}"));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(format!("node {c} has two parents"));
                }
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(format!("node {i} unreachable")),
        None => Ok(()),
    }
}
