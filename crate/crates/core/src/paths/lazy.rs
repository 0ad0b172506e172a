//! Dijkstra with lazily evaluated edge weights.
//!
//! Edges are first queued under a lower bound on their weight. When such an
//! entry reaches the front of the queue and its head is still unsettled, the
//! DTM is evaluated at the edge's midpoints one at a time; after each one the
//! bound is tightened, and the entry goes back into the queue as soon as it
//! stops being the front. Upper bounds give each vertex a provisional
//! distance, which lets the search drop edges that cannot lie on any shortest
//! path. Distances are bit-identical to running Dijkstra on the explicit
//! graph; predecessors can differ only between exactly tied paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::bounds::{endpoint_point, endpoint_segment, widen, GridBounds};
use crate::dtm::{lex_le, Dtm, Segment};
use crate::graph::{EdgeWeigher, WeightMode};
use crate::measures::PointCloud;

const FRESH: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    exact: bool,
    v: u32,
    u: u32,
    // index into the partial evaluations, FRESH if none started
    slot: u32,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.exact.cmp(&self.exact))
            .then(other.v.cmp(&self.v))
            .then(other.u.cmp(&self.u))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-midpoint bounds of an edge under evaluation; evaluated midpoints
/// carry their exact value in both bounds.
#[derive(Debug, Clone, Default)]
struct Partial {
    lo: Vec<f64>,
    hi: Vec<f64>,
    // reach radius of each evaluated midpoint, NaN if not evaluated
    reach: Vec<f64>,
}

pub(crate) enum Bounds {
    Grid(GridBounds),
    /// DTM and reach radius at every vertex (cloud then the two queries).
    Endpoint {
        dtm: Vec<f64>,
        reach: Vec<f64>,
    },
}

/// One query between `x` and `y`, joined to every vertex of the cloud.
pub(crate) struct LazyQuery<'a> {
    pub cloud: &'a PointCloud,
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// Adjacency among cloud vertices; `None` means complete.
    pub neighbors: Option<&'a [Vec<usize>]>,
    pub weigher: &'a EdgeWeigher<'a>,
    /// Endpoint terms for [`WeightMode::EndpointAverageDtm`], `n + 2` long.
    pub terms: &'a [f64],
    pub bounds: Option<&'a Bounds>,
}

/// Distance and vertex sequence; `n` stands for `x` and `n + 1` for `y`.
pub(crate) struct LazyOutcome {
    pub distance: f64,
    pub path: Vec<usize>,
}

struct State {
    dist: Vec<f64>,
    ub: Vec<f64>,
    pred: Vec<usize>,
    settled: Vec<bool>,
    heap: BinaryHeap<Entry>,
    partials: Vec<Partial>,
}

impl State {
    fn relax(&mut self, u: usize, v: usize, w: f64) {
        let nd = self.dist[u] + w;
        self.ub[v] = self.ub[v].min(nd);
        if nd < self.dist[v] || (nd == self.dist[v] && u < self.pred[v]) {
            self.dist[v] = nd;
            self.pred[v] = u;
            self.heap.push(Entry {
                key: nd,
                exact: true,
                v: v as u32,
                u: u as u32,
                slot: FRESH,
            });
        }
    }
}

impl LazyQuery<'_> {
    fn point(&self, v: usize) -> &[f64] {
        let n = self.cloud.len();
        if v < n {
            self.cloud.point(v)
        } else if v == n {
            self.x
        } else {
            self.y
        }
    }

    fn exact(&self, u: usize, v: usize) -> f64 {
        self.weigher
            .weight(self.point(u), self.point(v), self.terms[u], self.terms[v])
    }

    fn subdivisions(&self) -> usize {
        match self.weigher.mode() {
            WeightMode::SubdividedDtm { subdivisions } => subdivisions,
            _ => unreachable!("only subdivided weights are bounded"),
        }
    }

    fn dtm(&self) -> &Dtm<'_> {
        self.weigher.dtm().expect("subdivided weights carry a DTM")
    }

    /// Bounds on `dtm^β` at every midpoint of `[u, v]`.
    fn midpoint_bounds(&self, u: usize, v: usize, seg: &Segment<'_>) -> Partial {
        let r = self.subdivisions();
        let mut part = Partial {
            lo: Vec::with_capacity(r),
            hi: Vec::with_capacity(r),
            reach: vec![f64::NAN; r],
        };
        match self.bounds {
            Some(Bounds::Grid(g)) => {
                let mut z = [0.0; 2];
                for t in 0..r {
                    seg.midpoint(t, &mut z);
                    part.lo.push(g.point_lower(z));
                    part.hi.push(g.point_upper(z));
                }
            }
            Some(Bounds::Endpoint { dtm: d, .. }) => {
                let (da, db) = if lex_le(self.point(u), self.point(v)) {
                    (d[u], d[v])
                } else {
                    (d[v], d[u])
                };
                let beta = self.dtm().params().beta;
                for t in 0..r {
                    let s = (t as f64 + 0.5) / r as f64 * seg.len;
                    let (a, b) = endpoint_point(da, db, seg.len, s, beta);
                    part.lo.push(a);
                    part.hi.push(b);
                }
            }
            None => unreachable!("lazy evaluation needs bounds"),
        }
        part
    }

    /// Lower bound on the weight of `[u, v]`, possibly stopping early once
    /// it exceeds `cap`.
    fn edge_lower(&self, u: usize, v: usize, len: f64, cap: f64) -> f64 {
        let r = self.subdivisions();
        match self.bounds {
            Some(Bounds::Grid(g)) => g.segment_lower(self.point(u), self.point(v), r, len, cap),
            Some(Bounds::Endpoint { dtm: d, .. }) => {
                endpoint_segment(d[u], d[v], len, self.dtm().params().beta, r).0
            }
            None => 0.0,
        }
    }

    fn edge_upper(&self, u: usize, v: usize, len: f64) -> f64 {
        let r = self.subdivisions();
        match self.bounds {
            Some(Bounds::Grid(g)) => g.segment_upper(self.point(u), self.point(v), r, len),
            Some(Bounds::Endpoint { dtm: d, .. }) => {
                endpoint_segment(d[u], d[v], len, self.dtm().params().beta, r).1
            }
            None => f64::INFINITY,
        }
    }

    /// A radius holding mass `m` around midpoint `t`, from the bounds.
    fn reach_hint(
        &self,
        u: usize,
        v: usize,
        seg: &Segment<'_>,
        t: usize,
        z: &[f64],
    ) -> Option<f64> {
        match self.bounds? {
            Bounds::Grid(g) => Some(g.reach_hint([z[0], z[1]])),
            Bounds::Endpoint { reach, .. } => {
                let (ra, rb) = if lex_le(self.point(u), self.point(v)) {
                    (reach[u], reach[v])
                } else {
                    (reach[v], reach[u])
                };
                let s = (t as f64 + 0.5) * seg.step;
                Some((ra + s).min(rb + (seg.len - s)))
            }
        }
    }

    /// Advances the evaluation of a popped lower-bound entry, one midpoint
    /// at a time, widest bracket first.
    fn refine(&self, st: &mut State, entry: Entry) {
        let (u, v) = (entry.u as usize, entry.v as usize);
        let target = self.cloud.len() + 1;
        let seg = Segment::new(self.point(u), self.point(v), self.subdivisions());
        if seg.len == 0.0 {
            st.relax(u, v, 0.0);
            return;
        }
        let mut part = if entry.slot == FRESH {
            self.midpoint_bounds(u, v, &seg)
        } else {
            std::mem::take(&mut st.partials[entry.slot as usize])
        };
        let du = st.dist[u];
        let dtm = self.dtm();
        let mut z = vec![0.0; self.cloud.dim()];
        loop {
            let mut next = None;
            let mut widest = -1.0;
            for (t, (a, b)) in part.lo.iter().zip(&part.hi).enumerate() {
                if part.reach[t].is_nan() && b - a > widest {
                    widest = b - a;
                    next = Some(t);
                }
            }
            let Some(t) = next else {
                st.relax(u, v, seg.finish(part.lo.iter().fold(0.0, |s, w| s + w)));
                return;
            };
            seg.midpoint(t, &mut z);
            let hint = part
                .reach
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.is_nan())
                .map(|(s, r)| r + s.abs_diff(t) as f64 * seg.step)
                .chain(self.reach_hint(u, v, &seg, t, &z))
                .min_by(f64::total_cmp);
            let (val, reach) = dtm.powered_hinted(&z, hint);
            part.lo[t] = val;
            part.hi[t] = val;
            part.reach[t] = reach;
            if part.reach.iter().all(|r| !r.is_nan()) {
                continue;
            }
            let (lo, hi) = widen(
                seg.finish(part.lo.iter().sum()),
                seg.finish(part.hi.iter().sum()),
            );
            st.ub[v] = st.ub[v].min(du + hi);
            let key = du + lo;
            if key > st.ub[v].min(st.ub[target]) {
                return;
            }
            if st.heap.peek().is_some_and(|top| top.key < key) {
                let slot = if entry.slot == FRESH {
                    st.partials.push(part);
                    (st.partials.len() - 1) as u32
                } else {
                    st.partials[entry.slot as usize] = part;
                    entry.slot
                };
                st.heap.push(Entry { key, slot, ..entry });
                return;
            }
        }
    }

    fn for_each_neighbor(&self, u: usize, mut f: impl FnMut(usize)) {
        let n = self.cloud.len();
        if u >= n {
            (0..n + 2).filter(|&v| v != u).for_each(f);
            return;
        }
        match self.neighbors {
            None => (0..n).filter(|&v| v != u).for_each(&mut f),
            Some(lists) => lists[u].iter().copied().for_each(&mut f),
        }
        f(n);
        f(n + 1);
    }

    pub(crate) fn run(&self) -> LazyOutcome {
        let n = self.cloud.len();
        let total = n + 2;
        let (source, target) = (n, n + 1);
        let lazy = matches!(self.weigher.mode(), WeightMode::SubdividedDtm { .. })
            && self.bounds.is_some();
        let floor = match self.bounds {
            Some(Bounds::Grid(g)) if lazy => g.floor(),
            _ => 0.0,
        };
        let mut st = State {
            dist: vec![f64::INFINITY; total],
            ub: vec![f64::INFINITY; total],
            pred: vec![usize::MAX; total],
            settled: vec![false; total],
            heap: BinaryHeap::new(),
            partials: Vec::new(),
        };
        st.dist[source] = 0.0;
        st.ub[source] = 0.0;
        st.heap.push(Entry {
            key: 0.0,
            exact: true,
            v: source as u32,
            u: source as u32,
            slot: FRESH,
        });

        while let Some(entry) = st.heap.pop() {
            let (v, u) = (entry.v as usize, entry.u as usize);
            if st.settled[v] {
                continue;
            }
            if !entry.exact {
                if entry.key > st.ub[v] || entry.key > st.ub[target] {
                    continue;
                }
                self.refine(&mut st, entry);
                continue;
            }
            if entry.key != st.dist[v] || (v != source && st.pred[v] != u) {
                continue;
            }
            st.settled[v] = true;
            if v == target {
                break;
            }
            let du = st.dist[v];
            let pu = self.point(v);
            let from = v;
            self.for_each_neighbor(from, |to| {
                if st.settled[to] {
                    return;
                }
                if !lazy {
                    let w = self.exact(from, to);
                    if du + w <= st.ub[target] {
                        st.relax(from, to, w);
                    }
                    return;
                }
                let threshold = st.ub[to].min(st.ub[target]);
                let len = crate::euclidean(pu, self.point(to));
                if du + floor * len > threshold {
                    return;
                }
                let lo = self.edge_lower(from, to, len, threshold - du);
                if du + lo > threshold {
                    return;
                }
                st.ub[to] = st.ub[to].min(du + self.edge_upper(from, to, len));
                st.heap.push(Entry {
                    key: du + lo,
                    exact: false,
                    v: to as u32,
                    u: from as u32,
                    slot: FRESH,
                });
            });
        }

        let mut path = vec![target];
        let mut v = target;
        while v != source {
            v = st.pred[v];
            debug_assert!(v != usize::MAX, "target is always reachable");
            path.push(v);
        }
        path.reverse();
        LazyOutcome {
            distance: st.dist[target],
            path,
        }
    }
}
