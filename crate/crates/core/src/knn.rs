//! Exact k-nearest-neighbor search.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

/// Above this ambient dimension queries fall back to a linear scan.
pub const BRUTE_FORCE_DIM: usize = 20;

const LEAF: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.idx.cmp(&o.idx))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Kd-tree over a flat `n * m` coordinate buffer.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [f64],
    m: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [f64], m: usize) -> Self {
        let n = if m == 0 { 0 } else { points.len() / m };
        let mut tree = Self { points, m, order: (0..n).collect(), nodes: Vec::new() };
        if n > 0 && m <= BRUTE_FORCE_DIM {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn coord(&self, i: usize, d: usize) -> f64 {
        self.points[i * self.m + d]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut dim = 0;
        let mut spread = -1.0;
        for d in 0..self.m {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.coord(i, d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > spread {
                spread = hi - lo;
                dim = d;
            }
        }
        let mid = start + (end - start) / 2;
        let (pts, m) = (self.points, self.m);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a * m + dim].total_cmp(&pts[b * m + dim])
        });
        let value = self.coord(self.order[mid], dim);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    fn dist2(&self, q: &[f64], i: usize) -> f64 {
        let p = &self.points[i * self.m..(i + 1) * self.m];
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// The `k` nearest points to `q` as `(squared distance, index)`,
    /// ascending, ties broken by lower index. `skip` is never returned.
    pub fn nearest(&self, q: &[f64], k: usize, skip: Option<usize>) -> Vec<(f64, usize)> {
        let mut heap: BinaryHeap<Cand> = BinaryHeap::with_capacity(k + 1);
        if k == 0 {
            return Vec::new();
        }
        if self.nodes.is_empty() {
            for i in 0..self.len() {
                self.offer(&mut heap, k, q, i, skip);
            }
        } else {
            self.search(0, q, k, skip, &mut heap);
        }
        let mut out: Vec<(f64, usize)> = heap.into_iter().map(|c| (c.d2, c.idx)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    fn offer(&self, heap: &mut BinaryHeap<Cand>, k: usize, q: &[f64], i: usize, skip: Option<usize>) {
        if Some(i) == skip {
            return;
        }
        let c = Cand { d2: self.dist2(q, i), idx: i };
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().unwrap() {
            heap.pop();
            heap.push(c);
        }
    }

    fn search(&self, node: usize, q: &[f64], k: usize, skip: Option<usize>, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    self.offer(heap, k, q, i, skip);
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, skip, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.search(far, q, k, skip, heap);
                }
            }
        }
    }

    /// All points within squared radius `r2` of `q`.
    pub fn within(&self, q: &[f64], r2: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            out.extend((0..self.len()).filter(|&i| self.dist2(q, i) <= r2));
        } else {
            self.collect(0, q, r2, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn collect(&self, node: usize, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(self.order[start..end].iter().copied().filter(|&i| self.dist2(q, i) <= r2));
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                if diff < 0.0 || diff * diff <= r2 {
                    self.collect(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.collect(right, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[f64], m: usize, q: &[f64], k: usize, skip: Option<usize>) -> Vec<(f64, usize)> {
        let n = points.len() / m;
        let mut all: Vec<(f64, usize)> = (0..n)
            .filter(|&i| Some(i) != skip)
            .map(|i| {
                let d: f64 = (0..m).map(|d| (points[i * m + d] - q[d]).powi(2)).sum();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1, 2, 3, 5] {
            let pts: Vec<f64> = (0..300 * m).map(|_| rng.random::<f64>()).collect();
            let tree = KdTree::new(&pts, m);
            for i in (0..300).step_by(17) {
                let q = &pts[i * m..(i + 1) * m];
                assert_eq!(tree.nearest(q, 9, Some(i)), brute(&pts, m, q, 9, Some(i)));
            }
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let pts = vec![0.0, 1.0, -1.0, 2.0];
        let tree = KdTree::new(&pts, 1);
        let nn = tree.nearest(&[0.0], 2, Some(0));
        assert_eq!(nn, vec![(1.0, 1), (1.0, 2)]);
    }

    #[test]
    fn radius_query() {
        let pts: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let tree = KdTree::new(&pts, 1);
        assert_eq!(tree.within(&[50.2], 4.0), vec![49, 50, 51, 52]);
    }
}
