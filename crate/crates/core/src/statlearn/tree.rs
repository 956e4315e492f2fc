//! CART with axis-aligned binary splits.
//!
//! For 0/1 targets the Gini criterion and squared-error reduction pick the
//! same split (the weighted Gini of a node is twice its 0/1 SSE), so one
//! grower serves both tasks; leaves store the mean target, which is the
//! class-1 proportion for classification.

use serde::Serialize;

use super::{Features, LearnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 20,
            max_depth: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Grower<'a> {
    x: &'a Features,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    go_left: Vec<bool>,
}

impl Tree {
    pub fn fit(x: &Features, y: &[f64], params: TreeParams) -> Result<Tree, LearnError> {
        if y.is_empty() {
            return Err(LearnError::Empty);
        }
        let p = x.n_features();
        let sorted: Vec<Vec<usize>> = (0..p)
            .map(|j| {
                let mut idx: Vec<usize> = (0..y.len()).collect();
                idx.sort_by(|&a, &b| x.row(a)[j].total_cmp(&x.row(b)[j]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut g = Grower {
            x,
            y,
            params: TreeParams {
                min_leaf: params.min_leaf.max(1),
                ..params
            },
            nodes: Vec::new(),
            go_left: vec![false; y.len()],
        };
        g.grow(sorted, 0);
        Ok(Tree { nodes: g.nodes })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct BestSplit {
    feature: usize,
    /// Number of samples going left in that feature's order.
    cut: usize,
    threshold: f64,
}

impl Grower<'_> {
    /// Grows the subtree over the samples in `sorted` (one ordering per
    /// feature) and returns its node index.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let idx = &sorted[0];
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(sum / n as f64));
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&sorted, sum) else {
            return at;
        };
        for (pos, &i) in sorted[best.feature].iter().enumerate() {
            self.go_left[i] = pos < best.cut;
        }
        let (mut left, mut right) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for order in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| self.go_left[i]);
            left.push(l);
            right.push(r);
        }
        drop(sorted);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        at
    }

    fn best_split(&self, sorted: &[Vec<usize>], total: f64) -> Option<BestSplit> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_leaf;
        let parent = total * total / n as f64;
        let tol = 1e-12 * (parent.abs() + 1.0);
        let mut best: Option<(f64, BestSplit)> = None;
        for (j, order) in sorted.iter().enumerate() {
            let mut s_left = 0.0;
            for cut in 1..n {
                s_left += self.y[order[cut - 1]];
                if cut < min_leaf || n - cut < min_leaf {
                    continue;
                }
                let lo = self.x.row(order[cut - 1])[j];
                let hi = self.x.row(order[cut])[j];
                if lo == hi {
                    continue;
                }
                let s_right = total - s_left;
                let score = s_left * s_left / cut as f64 + s_right * s_right / (n - cut) as f64;
                if score - parent > tol && best.as_ref().is_none_or(|b| score > b.0) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((
                        score,
                        BestSplit {
                            feature: j,
                            cut,
                            threshold,
                        },
                    ));
                }
            }
        }
        best.map(|b| b.1)
    }
}
