//! k-nearest neighbours on standardized features, backed by a kd-tree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Features, LearnError};

/// Per-column centring and scaling estimated from training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample sd, or 1 for constant columns.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Features) -> Standardizer {
        let p = x.n_features();
        let n = x.n_rows() as f64;
        let mut mean = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            let m = x.column(j).sum::<f64>() / n;
            let ss: f64 = x.column(j).map(|v| (v - m) * (v - m)).sum();
            let sd = if n > 1.0 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
            mean[j] = m;
            if sd > 0.0 {
                scale[j] = sd;
            }
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; row.len()];
        self.apply(row, &mut out);
        out
    }
}

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { lo: usize, hi: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over a point set; `perm` orders point ids so every node
/// owns a contiguous range.
#[derive(Debug, Clone)]
pub struct KdTree {
    p: usize,
    points: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    id: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    /// `points` is row-major with `p` columns.
    pub fn build(p: usize, points: Vec<f64>) -> KdTree {
        let n = points.len().checked_div(p).unwrap_or(0);
        let mut tree = KdTree {
            p,
            points,
            perm: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build_range(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    fn coord(&self, id: usize, axis: usize) -> f64 {
        self.points[id * self.p + axis]
    }

    fn build_range(&mut self, lo: usize, hi: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(KdNode::Leaf { lo, hi });
        if hi - lo <= LEAF_SIZE {
            return at;
        }
        let axis = (0..self.p)
            .map(|a| {
                let (mn, mx) = self.perm[lo..hi].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), &id| {
                    let v = self.coord(id, a);
                    (mn.min(v), mx.max(v))
                });
                (a, mx - mn)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(a, _)| a)
            .unwrap_or(0);
        let mid = lo + (hi - lo) / 2;
        let (p, points) = (self.p, &self.points);
        self.perm[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a * p + axis].total_cmp(&points[b * p + axis]).then(a.cmp(&b))
        });
        let value = self.coord(self.perm[mid], axis);
        let left = self.build_range(lo, mid);
        let right = self.build_range(mid, hi);
        self.nodes[at] = KdNode::Split { axis, value, left, right };
        at
    }

    /// Ids of the `k` points nearest to `q`, closest first.
    ///
    /// Equidistant points are resolved deterministically but not
    /// necessarily by id.
    pub fn nearest(&self, q: &[f64], k: usize) -> Vec<usize> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, &mut heap);
        heap.into_sorted_vec().into_iter().map(|c| c.id).collect()
    }

    fn search(&self, node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            KdNode::Leaf { lo, hi } => {
                for &id in &self.perm[lo..hi] {
                    let row = &self.points[id * self.p..(id + 1) * self.p];
                    let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    let c = Cand { d2, id };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                if heap.len() < k || diff * diff < heap.peek().expect("heap is nonempty").d2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Knn {
    pub k: usize,
    standardizer: Standardizer,
    tree: KdTree,
    targets: Vec<f64>,
}

impl Knn {
    pub fn fit(x: &Features, y: &[f64], k: usize) -> Result<Knn, LearnError> {
        let n = y.len();
        if n == 0 {
            return Err(LearnError::Empty);
        }
        if k == 0 || k > n {
            return Err(LearnError::KTooLarge { k, n });
        }
        let standardizer = Standardizer::fit(x);
        let p = x.n_features();
        let mut pts = vec![0.0; n * p];
        for (i, r) in x.rows().enumerate() {
            standardizer.apply(r, &mut pts[i * p..(i + 1) * p]);
        }
        Ok(Knn {
            k,
            standardizer,
            tree: KdTree::build(p, pts),
            targets: y.to_vec(),
        })
    }

    /// Neighbour mean (vote share for 0/1 targets).
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_grid(x, &[self.k])[0]
    }

    /// Predictions for several `k` from a single neighbour search; `ks`
    /// larger than the training set use every point.
    pub fn predict_grid(&self, x: &[f64], ks: &[usize]) -> Vec<f64> {
        let q = self.standardizer.transform(x);
        let kmax = ks.iter().copied().max().unwrap_or(0);
        let near = self.tree.nearest(&q, kmax);
        let mut prefix = Vec::with_capacity(near.len() + 1);
        prefix.push(0.0);
        for &id in &near {
            prefix.push(prefix[prefix.len() - 1] + self.targets[id]);
        }
        ks.iter()
            .map(|&k| {
                let k = k.min(near.len()).max(1);
                prefix[k] / k as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statlearn::tests::pairs_features;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn kdtree_matches_brute_force(pts in prop::collection::vec((-5i32..5, -5i32..5), 1..120),
                                      q in (-6.0f64..6.0, -6.0f64..6.0), k in 1usize..30) {
            let flat: Vec<f64> = pts.iter().flat_map(|&(a, b)| [a as f64 * 0.7, b as f64 * 1.3]).collect();
            let tree = KdTree::build(2, flat.clone());
            let got = tree.nearest(&[q.0, q.1], k);
            let d2 = |id: usize| (flat[2 * id] - q.0).powi(2) + (flat[2 * id + 1] - q.1).powi(2);
            let mut all: Vec<f64> = (0..pts.len()).map(d2).collect();
            all.sort_by(f64::total_cmp);
            let mut dists: Vec<f64> = got.iter().map(|&i| d2(i)).collect();
            prop_assert_eq!(got.len(), k.min(pts.len()));
            let sorted_got = { let mut s = dists.clone(); s.sort_by(f64::total_cmp); s };
            prop_assert_eq!(&dists, &sorted_got);
            dists.truncate(k);
            prop_assert_eq!(dists, all[..k.min(pts.len())].to_vec());
        }

        #[test]
        fn affine_rescaling_leaves_predictions(seed in 0u64..50, a in 0.1f64..20.0, b in -100.0f64..100.0) {
            let pairs: Vec<(f64, f64)> = (0..80).map(|i| {
                let t = (i as f64 * 0.37 + seed as f64).sin();
                (i as f64 + t, 50.0 * t + (i % 9) as f64)
            }).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.0 * 0.1 - p.1 * 0.02).collect();
            let x = pairs_features(&pairs);
            let moved = x.map_column(0, |v| a * v + b).map_column(1, |v| v / a - b);
            let m1 = Knn::fit(&x, &y, 5).unwrap();
            let m2 = Knn::fit(&moved, &y, 5).unwrap();
            for i in (0..80).step_by(7) {
                let p1 = m1.predict(x.row(i));
                let p2 = m2.predict(moved.row(i));
                prop_assert!((p1 - p2).abs() < 1e-9, "{} vs {}", p1, p2);
            }
        }
    }

    #[test]
    fn k1_memorizes_and_kn_averages() {
        let pairs: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, ((i * 13) % 17) as f64)).collect();
        let y: Vec<f64> = (0..50).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let x = pairs_features(&pairs);
        let one = Knn::fit(&x, &y, 1).unwrap();
        for (r, &t) in x.rows().zip(&y) {
            assert_eq!(one.predict(r), t);
        }
        let all = Knn::fit(&x, &y, 50).unwrap();
        let mean = y.iter().sum::<f64>() / 50.0;
        assert!((all.predict(&[1000.0, -3.0]) - mean).abs() < 1e-12);
        assert!(matches!(Knn::fit(&x, &y, 51), Err(LearnError::KTooLarge { .. })));
    }

    #[test]
    fn many_duplicates() {
        let pairs = vec![(1.0, 1.0); 500];
        let y: Vec<f64> = (0..500).map(|i| (i % 2) as f64).collect();
        let m = Knn::fit(&pairs_features(&pairs), &y, 25).unwrap();
        let p = m.predict(&[1.0, 1.0]);
        assert!((0.0..=1.0).contains(&p));
    }
}
