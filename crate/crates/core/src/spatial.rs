//! Exact k-nearest-neighbour index over the atoms of a weighted measure.
//!
//! Neighbours come back in nondecreasing distance, ties broken by ascending
//! atom index, and the answer is always identical to a linear scan. Small
//! inputs are scanned directly; larger ones go through a kd-tree with
//! per-node bounding boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::measures::{PointCloud, WeightedMeasure};

/// Below this many atoms queries use a flat scan.
pub const LINEAR_SCAN_THRESHOLD: usize = 64;

const LEAF_SIZE: usize = 12;

/// A neighbour of a query point: atom index and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist_sq.sqrt()
    }
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    // child indices; leaves have none
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<Node>,
    // 2 * dim floats per node: lo corner then hi corner
    boxes: Vec<f64>,
    // atom indices in tree order, and their coordinates in the same order
    order: Vec<usize>,
    coords: Vec<f64>,
}

/// Immutable neighbour index carrying the measure's masses.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cloud: PointCloud,
    masses: Vec<f64>,
    // prefix sums of masses sorted ascending
    light_prefix: Vec<f64>,
    uniform: bool,
    tree: Option<KdTree>,
}

impl SpatialIndex {
    pub fn new(measure: &WeightedMeasure) -> Self {
        let cloud = measure.cloud().clone();
        let masses = measure.masses().to_vec();
        let mut sorted = masses.clone();
        sorted.sort_by(f64::total_cmp);
        let uniform = sorted.first() == sorted.last();
        let mut acc = 0.0;
        let light_prefix = sorted
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let tree = (cloud.len() >= LINEAR_SCAN_THRESHOLD).then(|| KdTree::build(&cloud));
        Self {
            cloud,
            masses,
            light_prefix,
            uniform,
            tree,
        }
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Number of nearest atoms that is guaranteed to carry mass `m`,
    /// whichever atoms they are (one spare for rounding), capped at `len`.
    pub fn count_for_mass(&self, m: f64) -> usize {
        let target = m * (1.0 - 1e-12);
        let k = self.light_prefix.partition_point(|&s| s < target) + 1;
        (k + 1).min(self.len())
    }

    /// For equal masses, the number of nearest atoms a walk accumulating mass
    /// up to `m` visits (the last one possibly in part).
    pub(crate) fn uniform_count(&self, m: f64) -> Option<usize> {
        self.uniform.then(|| {
            let k = self.light_prefix.partition_point(|&s| s < m) + 1;
            k.min(self.len())
        })
    }

    /// The `k` nearest atoms to `x`, sorted by `(distance, index)`.
    ///
    /// `x` must have the index's dimension.
    pub fn knn(&self, x: &[f64], k: usize) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_into(x, k, &mut heap);
        heap.into_sorted_vec()
    }

    /// Nearest atom to `x` (lowest index among equidistant ones).
    pub fn nearest(&self, x: &[f64]) -> Neighbor {
        self.knn(x, 1)[0]
    }

    /// Fills `heap` with the `k` best neighbours (max-heap, unsorted).
    pub(crate) fn knn_into(&self, x: &[f64], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        debug_assert_eq!(x.len(), self.dim());
        heap.clear();
        let k = k.min(self.len());
        if k == 0 {
            return;
        }
        match &self.tree {
            None => {
                for (index, p) in self.cloud.iter().enumerate() {
                    offer(
                        heap,
                        k,
                        Neighbor {
                            index,
                            dist_sq: crate::squared_euclidean(p, x),
                        },
                    );
                }
            }
            Some(tree) => tree.search(0, x, k, heap),
        }
    }

    /// Replaces `out` with every atom within squared distance `r_sq` of `x`
    /// (unordered).
    pub(crate) fn within_into(&self, x: &[f64], r_sq: f64, out: &mut Vec<Neighbor>) {
        debug_assert_eq!(x.len(), self.dim());
        out.clear();
        match &self.tree {
            None => {
                for (index, p) in self.cloud.iter().enumerate() {
                    let dist_sq = crate::squared_euclidean(p, x);
                    if dist_sq <= r_sq {
                        out.push(Neighbor { index, dist_sq });
                    }
                }
            }
            Some(tree) => tree.within(0, x, r_sq, out),
        }
    }
}

#[inline]
fn offer(heap: &mut BinaryHeap<Neighbor>, k: usize, cand: Neighbor) {
    if heap.len() < k {
        heap.push(cand);
    } else if let Some(mut top) = heap.peek_mut() {
        if cand < *top {
            *top = cand;
        }
    }
}

impl KdTree {
    fn build(cloud: &PointCloud) -> Self {
        let dim = cloud.dim();
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        let mut tree = KdTree {
            nodes: Vec::new(),
            boxes: Vec::new(),
            order: Vec::new(),
            coords: Vec::new(),
        };
        tree.build_node(cloud, &mut order, 0);
        tree.coords = order
            .iter()
            .flat_map(|&i| cloud.point(i).iter().copied())
            .collect();
        tree.order = order;
        debug_assert_eq!(tree.boxes.len(), tree.nodes.len() * 2 * dim);
        tree
    }

    fn build_node(&mut self, cloud: &PointCloud, order: &mut [usize], offset: usize) -> usize {
        let dim = cloud.dim();
        let id = self.nodes.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in order.iter() {
            for (k, &c) in cloud.point(i).iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);
        self.nodes.push(Node {
            start: offset,
            end: offset + order.len(),
            children: None,
        });
        if order.len() <= LEAF_SIZE {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            cloud.point(a)[axis]
                .total_cmp(&cloud.point(b)[axis])
                .then(a.cmp(&b))
        });
        let (left, right) = order.split_at_mut(mid);
        let l = self.build_node(cloud, left, offset);
        let r = self.build_node(cloud, right, offset + mid);
        self.nodes[id].children = Some((l, r));
        id
    }

    #[inline]
    fn box_dist_sq(&self, node: usize, x: &[f64]) -> f64 {
        let dim = x.len();
        let b = &self.boxes[node * 2 * dim..(node + 1) * 2 * dim];
        let (lo, hi) = b.split_at(dim);
        let mut acc = 0.0;
        for k in 0..dim {
            let c = x[k];
            let d = if c < lo[k] {
                lo[k] - c
            } else if c > hi[k] {
                c - hi[k]
            } else {
                0.0
            };
            acc += d * d;
        }
        acc
    }

    fn search(&self, node: usize, x: &[f64], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        let dim = x.len();
        let n = &self.nodes[node];
        match n.children {
            None => {
                for pos in n.start..n.end {
                    let p = &self.coords[pos * dim..(pos + 1) * dim];
                    offer(
                        heap,
                        k,
                        Neighbor {
                            index: self.order[pos],
                            dist_sq: crate::squared_euclidean(p, x),
                        },
                    );
                }
            }
            Some((l, r)) => {
                let dl = self.box_dist_sq(l, x);
                let dr = self.box_dist_sq(r, x);
                let (first, d_first, second, d_second) = if dl <= dr {
                    (l, dl, r, dr)
                } else {
                    (r, dr, l, dl)
                };
                if self.admits(heap, k, d_first) {
                    self.search(first, x, k, heap);
                }
                if self.admits(heap, k, d_second) {
                    self.search(second, x, k, heap);
                }
            }
        }
    }

    fn within(&self, node: usize, x: &[f64], r_sq: f64, out: &mut Vec<Neighbor>) {
        let (near, far) = self.box_dist_range_sq(node, x);
        if near > r_sq {
            return;
        }
        let dim = x.len();
        let n = &self.nodes[node];
        if far <= r_sq {
            for pos in n.start..n.end {
                let p = &self.coords[pos * dim..(pos + 1) * dim];
                out.push(Neighbor {
                    index: self.order[pos],
                    dist_sq: crate::squared_euclidean(p, x),
                });
            }
            return;
        }
        match n.children {
            None => {
                for pos in n.start..n.end {
                    let p = &self.coords[pos * dim..(pos + 1) * dim];
                    let dist_sq = crate::squared_euclidean(p, x);
                    if dist_sq <= r_sq {
                        out.push(Neighbor {
                            index: self.order[pos],
                            dist_sq,
                        });
                    }
                }
            }
            Some((l, r)) => {
                self.within(l, x, r_sq, out);
                self.within(r, x, r_sq, out);
            }
        }
    }

    /// Squared distances from `x` to the nearest and farthest points of a
    /// node's box.
    #[inline]
    fn box_dist_range_sq(&self, node: usize, x: &[f64]) -> (f64, f64) {
        let dim = x.len();
        let b = &self.boxes[node * 2 * dim..(node + 1) * 2 * dim];
        let (lo, hi) = b.split_at(dim);
        let (mut near, mut far) = (0.0, 0.0);
        for k in 0..dim {
            let (a, b) = (lo[k] - x[k], x[k] - hi[k]);
            let d = a.max(b).max(0.0);
            let f = a.abs().max(b.abs());
            near += d * d;
            far += f * f;
        }
        (near, far)
    }

    // equal distances must still be visited: a lower index may be waiting
    #[inline]
    fn admits(&self, heap: &BinaryHeap<Neighbor>, k: usize, box_dist_sq: f64) -> bool {
        heap.len() < k || heap.peek().is_some_and(|top| box_dist_sq <= top.dist_sq)
    }
}
