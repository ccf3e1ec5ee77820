//! Binary classification tree grown by minimal weighted Gini impurity.

use serde::{Deserialize, Serialize};

/// Smallest impurity decrease that justifies a split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        p: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(p: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { p }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { p } => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    #[cfg(test)]
    pub(crate) fn map_leaves(&self, f: impl Fn(f64) -> f64) -> Tree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { p } => Node::Leaf { p: f(p) },
                ref split => split.clone(),
            })
            .collect();
        Tree { nodes }
    }

    pub(crate) fn validate(&self, feature_count: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Leaf { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(format!("leaf {i} probability {p} outside [0,1]"))
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } if feature >= feature_count
                    || left <= i
                    || right <= i
                    || left >= self.nodes.len()
                    || right >= self.nodes.len()
                    || !threshold.is_finite() =>
                {
                    return Err(format!("malformed split at node {i}"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

#[allow(clippy::needless_range_loop)]
fn best_split(x: &[&[f64]], y: &[bool], rows: &[usize], min_leaf: usize) -> Option<Best> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|&&r| y[r]).count();
    let features = x[rows[0]].len();
    let mut best: Option<Best> = None;
    let mut order = rows.to_vec();
    for f in 0..features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_pos = 0;
        for (i, pair) in order.windows(2).enumerate() {
            if y[pair[0]] {
                left_pos += 1;
            }
            let (lo, hi) = (x[pair[0]][f], x[pair[1]][f]);
            if lo == hi {
                continue;
            }
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let impurity = (left_n as f64 * gini(left_pos, left_n)
                + right_n as f64 * gini(total_pos - left_pos, right_n))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best {
                    feature: f,
                    threshold,
                    impurity,
                });
            }
        }
    }
    best
}

fn grow(
    x: &[&[f64]],
    y: &[bool],
    rows: Vec<usize>,
    depth: usize,
    config: &TreeConfig,
    nodes: &mut Vec<Node>,
) -> usize {
    let at = nodes.len();
    let pos = rows.iter().filter(|&&r| y[r]).count();
    let p = pos as f64 / rows.len() as f64;
    nodes.push(Node::Leaf { p });

    let parent = gini(pos, rows.len());
    if depth >= config.max_depth || parent == 0.0 || rows.len() < 2 * config.min_leaf.max(1) {
        return at;
    }
    let Some(split) = best_split(x, y, &rows, config.min_leaf.max(1)) else {
        return at;
    };
    if parent - split.impurity < MIN_GAIN {
        return at;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| x[i][split.feature] <= split.threshold);
    let left = grow(x, y, l, depth + 1, config, nodes);
    let right = grow(x, y, r, depth + 1, config, nodes);
    nodes[at] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    at
}

/// Fit a tree on feature rows `x` with labels `y`. Empty input yields a
/// constant 0 leaf.
pub fn fit_tree(x: &[&[f64]], y: &[bool], config: &TreeConfig) -> Tree {
    assert_eq!(x.len(), y.len(), "feature and label counts differ");
    if x.is_empty() {
        return Tree::leaf(0.0);
    }
    let mut nodes = Vec::new();
    grow(x, y, (0..x.len()).collect(), 0, config, &mut nodes);
    Tree { nodes }
}
