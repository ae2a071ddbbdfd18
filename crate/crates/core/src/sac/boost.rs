//! Regularized Newton boosting of depth-limited regression trees on the
//! logistic loss, with per-node weighted-quantile split proposals.

use super::sketch::propose_from_groups;
use super::SacError;

/// Splits must improve the objective by more than this.
pub const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary regression tree; nodes are stored in preorder with the root at 0.
/// A sample goes left when `x[feature] < threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + rec(t, *left).max(rec(t, *right)),
            }
        }
        rec(self, 0)
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }
}

/// Additive tree ensemble scored through the logistic link.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
    pub base_margin: f64,
    pub learning_rate: f64,
}

pub fn logistic(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

impl BoostedModel {
    pub fn empty(n_features: usize) -> Self {
        Self {
            n_features,
            trees: Vec::new(),
            base_margin: 0.0,
            learning_rate: 1.0,
        }
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64, SacError> {
        if x.len() != self.n_features {
            return Err(SacError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.base_margin + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }

    /// Matching score in `(0, 1)`.
    pub fn classify(&self, x: &[f64]) -> Result<f64, SacError> {
        self.margin(x).map(logistic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum hessian mass in each child of a split.
    pub min_child_weight: f64,
    /// L2 regularizer on leaf weights.
    pub lambda: f64,
    /// Complexity cost per split.
    pub gamma: f64,
    /// Rank tolerance of split proposals; 0 enumerates every boundary.
    pub sketch_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 410,
            max_depth: 5,
            learning_rate: 0.05,
            min_child_weight: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            sketch_eps: 0.05,
        }
    }
}

/// Row-major training matrix with binary labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>, label: bool) {
        self.rows.push(row);
        self.labels.push(label);
    }
}

/// Mean logistic loss of the model's margins.
pub fn logistic_loss(margins: &[f64], labels: &[bool]) -> f64 {
    const CLIP: f64 = 1e-15;
    let n = margins.len().max(1) as f64;
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            let p = logistic(m).clamp(CLIP, 1.0 - CLIP);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

/// Per-round training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss before the first tree followed by the loss after each round.
    pub losses: Vec<f64>,
}

pub fn gradients(margins: &[f64], labels: &[bool]) -> (Vec<f64>, Vec<f64>) {
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            let p = logistic(m);
            (p - if y { 1.0 } else { 0.0 }, p * (1.0 - p))
        })
        .unzip()
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<BoostedModel, SacError> {
    train_with_report(data, cfg).map(|(m, _)| m)
}

pub fn train_with_report(data: &Dataset, cfg: &TrainConfig) -> Result<(BoostedModel, TrainReport), SacError> {
    if data.is_empty() {
        return Err(SacError::DegenerateData);
    }
    let n_features = data.n_features();
    if data.labels.len() != data.rows.len() {
        return Err(SacError::LengthMismatch {
            expected: data.rows.len(),
            got: data.labels.len(),
        });
    }
    if let Some(bad) = data.rows.iter().find(|r| r.len() != n_features) {
        return Err(SacError::DimensionMismatch {
            expected: n_features,
            got: bad.len(),
        });
    }
    if n_features == 0 {
        return Err(SacError::DegenerateData);
    }
    let positives = data.labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == data.len() {
        return Err(SacError::DegenerateData);
    }

    let mut model = BoostedModel {
        n_features,
        trees: Vec::with_capacity(cfg.n_trees),
        base_margin: 0.0,
        learning_rate: cfg.learning_rate,
    };
    let mut margins = vec![model.base_margin; data.len()];
    let mut losses = vec![logistic_loss(&margins, &data.labels)];

    // Per-feature sample order, refined by stable partitioning in each node.
    let presorted: Vec<Vec<usize>> = (0..n_features)
        .map(|f| {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]));
            idx
        })
        .collect();

    for _ in 0..cfg.n_trees {
        let (g, h) = gradients(&margins, &data.labels);
        let mut builder = TreeBuilder {
            rows: &data.rows,
            g: &g,
            h: &h,
            cfg,
            nodes: Vec::new(),
        };
        builder.grow(presorted.clone(), 0);
        let tree = DecisionTree { nodes: builder.nodes };
        for (m, row) in margins.iter_mut().zip(&data.rows) {
            *m += cfg.learning_rate * tree.predict(row);
        }
        model.trees.push(tree);
        losses.push(logistic_loss(&margins, &data.labels));
    }
    Ok((model, TrainReport { losses }))
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a TrainConfig,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for the samples in `sorted` and returns its index.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let samples = &sorted[0];
        let g_sum: f64 = samples.iter().map(|&i| self.g[i]).sum();
        let h_sum: f64 = samples.iter().map(|&i| self.h[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            weight: leaf_weight(g_sum, h_sum, self.cfg.lambda),
        });
        if depth >= self.cfg.max_depth || samples.len() < 2 {
            return id;
        }
        let Some(best) = self.best_split(&sorted, g_sum, h_sum) else {
            return id;
        };

        let goes_left = |i: usize| self.rows[i][best.feature] < best.threshold;
        let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|order| order.into_iter().partition(|&i| goes_left(i)))
            .unzip();
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(&self, sorted: &[Vec<usize>], g_sum: f64, h_sum: f64) -> Option<Candidate> {
        let cfg = self.cfg;
        let mut best: Option<Candidate> = None;
        for (f, order) in sorted.iter().enumerate() {
            // distinct values with gradient and hessian mass
            let mut groups: Vec<(f64, f64, f64)> = Vec::new();
            for &i in order {
                let v = self.rows[i][f];
                match groups.last_mut() {
                    Some(last) if last.0 == v => {
                        last.1 += self.g[i];
                        last.2 += self.h[i];
                    }
                    _ => groups.push((v, self.g[i], self.h[i])),
                }
            }
            if groups.len() < 2 {
                continue;
            }
            let weighted: Vec<(f64, f64)> = groups.iter().map(|&(v, _, h)| (v, h)).collect();
            let thresholds = propose_from_groups(&weighted, cfg.sketch_eps);

            let (mut gl, mut hl) = (0.0, 0.0);
            let mut next = 0;
            for thr in thresholds {
                while next < groups.len() && groups[next].0 < thr {
                    gl += groups[next].1;
                    hl += groups[next].2;
                    next += 1;
                }
                let (gr, hr) = (g_sum - gl, h_sum - hl);
                if hl < cfg.min_child_weight || hr < cfg.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, cfg.lambda, cfg.gamma);
                if gain > MIN_SPLIT_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold: thr,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let empty = BoostedModel::empty(8);
        assert_eq!(empty.classify(&[0.0; 8]).unwrap(), 0.5);

        let mut one = BoostedModel::empty(2);
        one.trees.push(DecisionTree::leaf(2.0));
        assert!((one.classify(&[0.0, 0.0]).unwrap() - 0.88080).abs() < 1e-5);

        let mut two = BoostedModel::empty(2);
        two.trees.push(DecisionTree::leaf(1.0));
        two.trees.push(DecisionTree::leaf(-1.0));
        assert_eq!(two.classify(&[0.3, 0.1]).unwrap(), 0.5);

        assert_eq!(
            two.classify(&[0.0]),
            Err(SacError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn adding_positive_tree_raises_score() {
        let mut m = BoostedModel::empty(1);
        m.trees.push(DecisionTree {
            nodes: vec![
                TreeNode::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { weight: -0.3 },
                TreeNode::Leaf { weight: 0.7 },
            ],
        });
        for x in [0.1, 0.9] {
            let before = m.classify(&[x]).unwrap();
            let mut more = m.clone();
            more.trees.push(DecisionTree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 0,
                        threshold: 0.2,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf { weight: 0.01 },
                    TreeNode::Leaf { weight: 0.4 },
                ],
            });
            assert!(more.classify(&[x]).unwrap() > before);
        }
    }

    #[test]
    fn root_leaf_newton_weight() {
        // g = {-.5, -.5, .5}, h = .25 each
        let (g, h) = gradients(&[0.0; 3], &[true, true, false]);
        let w = leaf_weight(g.iter().sum(), h.iter().sum(), 1.0);
        assert!((w - 0.5 / 1.75).abs() < 1e-15);
        assert!((w - 0.28571).abs() < 1e-5);
    }

    #[test]
    fn best_one_dimensional_split() {
        let data = Dataset {
            rows: vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            labels: vec![false, false, true, true],
        };
        let cfg = TrainConfig {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            min_child_weight: 0.0,
            sketch_eps: 0.0,
            ..Default::default()
        };
        let (g, h) = gradients(&[0.0; 4], &data.labels);
        let gain = split_gain(g[0] + g[1], h[0] + h[1], g[2] + g[3], h[2] + h[3], 1.0, 0.0);
        assert!((gain - 2.0 / 3.0).abs() < 1e-12);
        let model = train(&data, &cfg).unwrap();
        match &model.trees[0].nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!((*feature, *threshold), (0, 2.5));
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_labels_rejected() {
        let data = Dataset {
            rows: vec![vec![1.0], vec![2.0]],
            labels: vec![true, true],
        };
        assert_eq!(train(&data, &TrainConfig::default()), Err(SacError::DegenerateData));
        assert_eq!(
            train(&Dataset::default(), &TrainConfig::default()),
            Err(SacError::DegenerateData)
        );
    }

    #[test]
    fn min_child_weight_blocks_small_children() {
        let data = Dataset {
            rows: vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            labels: vec![false, false, true, true],
        };
        // each child would carry hessian 0.5 < 1
        let model = train(
            &data,
            &TrainConfig {
                n_trees: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(model.trees[0].nodes.len(), 1);
    }
}
