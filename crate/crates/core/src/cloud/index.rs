//! Exact kd-tree over an immutable point snapshot.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

use super::PointCloud;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Nearest-neighbor index owning a copy of the cloud it was built from.
///
/// All queries are exact. Ties in distance resolve to the lower point index,
/// so results match a linear scan with the same rule.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cloud: PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Max-heap entry keyed on (squared distance, index).
#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = SpatialIndex {
            cloud: cloud.clone(),
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
        };
        index.build(0, cloud.len());
        Ok(index)
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let pts = self.cloud.points();
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&pts[i]);
            hi = hi.sup(&pts[i]);
        }
        let axis = (hi - lo).imax();
        if hi[axis] == lo[axis] {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = pts[self.order[mid]][axis];
        self.nodes.push(Node::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// Single nearest neighbor.
    pub fn nearest(&self, query: &Vector3<f64>) -> Neighbor {
        // non-empty by construction
        self.knn(query, 1)[0]
    }

    /// `k` nearest neighbors sorted by (distance, index). Returns fewer when
    /// the cloud is smaller than `k`.
    pub fn knn(&self, query: &Vector3<f64>, k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_visit(0, query, k, &mut heap);
        let mut out: Vec<Neighbor> = heap
            .into_sorted_vec()
            .into_iter()
            .map(|Candidate(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect();
        out.truncate(k);
        out
    }

    fn knn_visit(&self, node: usize, q: &Vector3<f64>, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let pts = self.cloud.points();
                for &i in &self.order[start..end] {
                    let cand = Candidate((pts[i] - q).norm_squared(), i);
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|worst| cand < *worst) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_visit(near, q, k, heap);
                // `<=` keeps equal-distance candidates with lower indices reachable
                let bound = heap.peek().map_or(f64::INFINITY, |c| c.0);
                if heap.len() < k || diff * diff <= bound {
                    self.knn_visit(far, q, k, heap);
                }
            }
        }
    }

    /// All points with distance strictly below `radius`, sorted by
    /// (distance, index). A zero radius yields nothing.
    pub fn radius(&self, query: &Vector3<f64>, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if radius > 0.0 {
            self.radius_visit(0, query, radius * radius, &mut out);
        }
        out.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.index.cmp(&b.index))
        });
        out
    }

    fn radius_visit(&self, node: usize, q: &Vector3<f64>, r2: f64, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let pts = self.cloud.points();
                for &i in &self.order[start..end] {
                    let d2 = (pts[i] - q).norm_squared();
                    if d2 < r2 {
                        out.push(Neighbor {
                            index: i,
                            distance: d2.sqrt(),
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.radius_visit(near, q, r2, out);
                if diff * diff < r2 {
                    self.radius_visit(far, q, r2, out);
                }
            }
        }
    }
}
