//! Balanced k-d tree over a fixed point set.
//!
//! All queries order results by `(squared distance, point index)`, so equal
//! distances always resolve to the lower index. That makes the tree a drop-in
//! for a brute-force scan, including tie order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

/// A query hit: point index and squared distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist2.sqrt()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// k-NN and radius search over a snapshot of a cloud's points.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let span = hi - lo;
        let mut axis = 0;
        for a in 1..3 {
            if span[a] > span[axis] {
                axis = a;
            }
        }
        axis
    }

    /// The `k` nearest points to `query`, ascending by distance then index.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, query, k, &mut heap);
        heap.into_sorted_vec()
    }

    fn knn_node(&self, node: usize, q: &Vec3, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist2: (self.points[i] - q).norm_squared(),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                // Equal-distance points on the far side may still win on index.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    /// Index of the nearest point (lowest index on ties). `None` on an empty index.
    pub fn nearest(&self, query: &Vec3) -> Option<usize> {
        self.knn(query, 1).first().map(|n| n.index)
    }

    /// Every point within `radius` (inclusive), ascending by distance then index.
    pub fn within_radius(&self, query: &Vec3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if !self.points.is_empty() && radius >= 0.0 {
            self.radius_node(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_node(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist2 = (self.points[i] - q).norm_squared();
                    if dist2 <= r2 {
                        out.push(Neighbor { index: i, dist2 });
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_node(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_node(right, q, r2, out);
                }
            }
        }
    }
}
