//! Shortest paths, geodesic polylines and FDTM queries.
//!
//! [`single_source`] is plain Dijkstra on a built [`MetricGraph`];
//! [`fdtm_query`] adds the two query points to such a graph, joined to every
//! vertex and to each other by straight edges. [`fdtm_distance`] answers the
//! same query without materializing the graph, which is what makes complete
//! graphs over a few thousand points affordable.

mod bounds;
mod lazy;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::dtm::Dtm;
use crate::error::{Error, Result};
use crate::graph::{edge_set, EdgeWeigher, GraphTopology, MetricGraph, WeightMode};
use crate::measures::{make_empirical, DtmParams, PointCloud, WeightedMeasure};
use crate::spatial::SpatialIndex;

use self::bounds::GridBounds;
use self::lazy::{Bounds, LazyQuery};

/// Distances and predecessors from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathTree {
    pub source: usize,
    /// `f64::INFINITY` for unreachable vertices.
    pub dist: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl ShortestPathTree {
    /// Vertices from the source to `v`, or `None` if unreachable.
    pub fn path_to(&self, v: usize) -> Option<Vec<usize>> {
        if !self.dist.get(v)?.is_finite() {
            return None;
        }
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// A shortest path between two query points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    pub distance: f64,
    /// Points in path order, starting at `x` and ending at `y`.
    pub polyline: Vec<Vec<f64>>,
    /// Sum of the Euclidean segment lengths of the polyline.
    pub euclidean_length: f64,
    /// Indices of the sample points the path visits, in order.
    pub vertices: Vec<usize>,
}

impl GeodesicResult {
    fn trivial(x: &[f64]) -> Self {
        Self {
            distance: 0.0,
            polyline: vec![x.to_vec()],
            euclidean_length: 0.0,
            vertices: Vec::new(),
        }
    }

    fn from_path(distance: f64, path: &[usize], cloud: &PointCloud, x: &[f64], y: &[f64]) -> Self {
        let n = cloud.len();
        let polyline: Vec<Vec<f64>> = path
            .iter()
            .map(|&v| match v {
                v if v < n => cloud.point(v).to_vec(),
                v if v == n => x.to_vec(),
                _ => y.to_vec(),
            })
            .collect();
        let euclidean_length = polyline
            .windows(2)
            .map(|w| crate::euclidean(&w[0], &w[1]))
            .sum();
        Self {
            distance,
            polyline,
            euclidean_length,
            vertices: path.iter().copied().filter(|&v| v < n).collect(),
        }
    }

    /// Euclidean lengths of the successive segments.
    pub fn segment_lengths(&self) -> Vec<f64> {
        self.polyline
            .windows(2)
            .map(|w| crate::euclidean(&w[0], &w[1]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Item {
    dist: f64,
    v: usize,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.v.cmp(&self.v))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over `count` vertices; `visit(u, f)` calls `f(v, w)` per edge.
/// Stops early once `target` is settled.
fn dijkstra(
    count: usize,
    source: usize,
    target: Option<usize>,
    mut visit: impl FnMut(usize, &mut dyn FnMut(usize, f64)),
) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut dist = vec![f64::INFINITY; count];
    let mut pred: Vec<Option<usize>> = vec![None; count];
    let mut settled = vec![false; count];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Item {
        dist: 0.0,
        v: source,
    });
    while let Some(Item { dist: d, v: u }) = heap.pop() {
        if settled[u] || d > dist[u] {
            continue;
        }
        settled[u] = true;
        if Some(u) == target {
            break;
        }
        visit(u, &mut |v, w| {
            if settled[v] {
                return;
            }
            let nd = d + w;
            let better = nd < dist[v] || (nd == dist[v] && pred[v].is_some_and(|p| u < p));
            if better {
                if nd < dist[v] {
                    heap.push(Item { dist: nd, v });
                }
                dist[v] = nd;
                pred[v] = Some(u);
            }
        });
    }
    (dist, pred)
}

/// Shortest-path distances from `source` to every vertex.
pub fn single_source(graph: &MetricGraph, source: usize) -> Result<ShortestPathTree> {
    if source >= graph.len() {
        return Err(Error::invalid(format!(
            "source {source} out of range for {} vertices",
            graph.len()
        )));
    }
    let (dist, pred) = dijkstra(graph.len(), source, None, |u, f| {
        for &(v, w) in graph.neighbors(u) {
            f(v, w);
        }
    });
    Ok(ShortestPathTree { source, dist, pred })
}

/// One [`single_source`] distance row per source, in order.
pub fn all_pairs_sampled(graph: &MetricGraph, sources: &[usize]) -> Result<Vec<Vec<f64>>> {
    sources
        .par_iter()
        .map(|&s| single_source(graph, s).map(|t| t.dist))
        .collect()
}

fn check_query(dim: usize, x: &[f64], y: &[f64]) -> Result<()> {
    for q in [x, y] {
        if q.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: q.len(),
            });
        }
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("query points must be finite"));
        }
    }
    Ok(())
}

/// FDTM between `x` and `y` on `graph` extended by the two query points.
///
/// The graph must have been built over the support of `measure` with the
/// same `params`.
pub fn fdtm_query(
    measure: &WeightedMeasure,
    graph: &MetricGraph,
    x: &[f64],
    y: &[f64],
    params: &DtmParams,
) -> Result<GeodesicResult> {
    let spec = graph
        .spec()
        .ok_or_else(|| Error::invalid("graph carries no weight mode; build it with build_graph"))?;
    if spec.params != *params {
        return Err(Error::invalid("query parameters differ from the graph's"));
    }
    if measure.cloud() != graph.vertices() {
        return Err(Error::invalid(
            "graph vertices are not the measure's support",
        ));
    }
    let cloud = graph.vertices();
    check_query(cloud.dim(), x, y)?;
    if x == y {
        return Ok(GeodesicResult::trivial(x));
    }
    let n = cloud.len();
    let index = SpatialIndex::new(measure);
    let weigher = EdgeWeigher::new(spec.weights, &index, params)?;
    let tx = weigher.endpoint_term(x);
    let ty = weigher.endpoint_term(y);
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let tp = weigher.endpoint_term(p);
            (weigher.weight(x, p, tx, tp), weigher.weight(y, p, ty, tp))
        })
        .collect();
    let wxy = weigher.weight(x, y, tx, ty);
    let (sx, sy) = (n, n + 1);
    let (dist, pred) = dijkstra(n + 2, sx, Some(sy), |u, f| {
        if u < n {
            for &(v, w) in graph.neighbors(u) {
                f(v, w);
            }
            f(sx, rows[u].0);
            f(sy, rows[u].1);
        } else {
            let other = if u == sx { sy } else { sx };
            for (v, r) in rows.iter().enumerate() {
                f(v, if u == sx { r.0 } else { r.1 });
            }
            f(other, wxy);
        }
    });
    assert!(
        dist[sy].is_finite(),
        "the direct edge always connects x and y"
    );
    let mut path = vec![sy];
    while let Some(p) = pred[*path.last().expect("nonempty")] {
        path.push(p);
    }
    path.reverse();
    Ok(GeodesicResult::from_path(dist[sy], &path, cloud, x, y))
}

/// Cells per side of the bounding grid used by [`fdtm_distance`].
fn grid_resolution(n: usize, complete: bool) -> usize {
    // sparse graphs touch few edges, so a fine grid does not pay for itself
    let per_root = if complete { 7.0 } else { 1.0 };
    ((per_root * (n as f64).sqrt()) as usize).clamp(32, 1024)
}

/// FDTM between `x` and `y` over the empirical measure of `cloud`.
///
/// Equivalent to [`build_graph`](crate::build_graph) followed by
/// [`fdtm_query`], but edge weights are only evaluated when the search needs
/// them.
pub fn fdtm_distance(
    cloud: &PointCloud,
    topology: &GraphTopology,
    weights: &WeightMode,
    params: &DtmParams,
    x: &[f64],
    y: &[f64],
) -> Result<GeodesicResult> {
    fdtm_distance_for_measure(&make_empirical(cloud)?, topology, weights, params, x, y)
}

/// [`fdtm_distance`] for an arbitrary weighted measure.
pub fn fdtm_distance_for_measure(
    measure: &WeightedMeasure,
    topology: &GraphTopology,
    weights: &WeightMode,
    params: &DtmParams,
    x: &[f64],
    y: &[f64],
) -> Result<GeodesicResult> {
    let cloud = measure.cloud();
    params.validate()?;
    weights.validate()?;
    topology.validate(cloud.dim())?;
    check_query(cloud.dim(), x, y)?;
    if x == y {
        return Ok(GeodesicResult::trivial(x));
    }
    let index = SpatialIndex::new(measure);
    let weigher = EdgeWeigher::new(*weights, &index, params)?;
    let neighbors: Option<Vec<Vec<usize>>> = match topology {
        GraphTopology::Complete => None,
        _ => {
            let mut lists = vec![Vec::new(); cloud.len()];
            for (i, j) in edge_set(cloud, topology)? {
                lists[i].push(j);
                lists[j].push(i);
            }
            Some(lists)
        }
    };
    let n = cloud.len();
    let point = |v: usize| match v {
        v if v < n => cloud.point(v),
        v if v == n => x,
        _ => y,
    };
    let terms: Vec<f64> = if matches!(weights, WeightMode::EndpointAverageDtm) {
        (0..n + 2)
            .into_par_iter()
            .map(|v| weigher.endpoint_term(point(v)))
            .collect()
    } else {
        vec![0.0; n + 2]
    };
    let bounds = match (weights, weigher.dtm()) {
        (WeightMode::SubdividedDtm { .. }, Some(dtm)) => {
            let complete = matches!(topology, GraphTopology::Complete);
            Some(make_bounds(dtm, cloud, x, y, &point, complete))
        }
        _ => None,
    };
    let outcome = LazyQuery {
        cloud,
        x,
        y,
        neighbors: neighbors.as_deref(),
        weigher: &weigher,
        terms: &terms,
        bounds: bounds.as_ref(),
    }
    .run();
    Ok(GeodesicResult::from_path(
        outcome.distance,
        &outcome.path,
        cloud,
        x,
        y,
    ))
}

fn make_bounds<'p>(
    dtm: &Dtm<'_>,
    cloud: &'p PointCloud,
    x: &'p [f64],
    y: &'p [f64],
    point: &(impl Fn(usize) -> &'p [f64] + Sync),
    complete: bool,
) -> Bounds {
    let n = cloud.len();
    if cloud.dim() == 2 {
        let (mut lo, mut hi) = cloud.bounding_box().expect("nonempty cloud");
        for q in [x, y] {
            for k in 0..2 {
                lo[k] = lo[k].min(q[k]);
                hi[k] = hi[k].max(q[k]);
            }
        }
        let res = grid_resolution(n, complete);
        Bounds::Grid(GridBounds::new(dtm, [lo[0], lo[1]], [hi[0], hi[1]], res))
    } else {
        let (dtm, reach) = (0..n + 2)
            .into_par_iter()
            .map(|v| dtm.value_hinted(point(v), None))
            .unzip();
        Bounds::Endpoint { dtm, reach }
    }
}
