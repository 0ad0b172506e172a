//! Weighted graphs over point clouds.
//!
//! Edge sets come from one of three topologies (complete, symmetrized
//! k-nearest, 2-D Yao) and weights from one of three rules: the midpoint-rule
//! DTM integral along the edge, the endpoint average of `dtm^β` times the
//! edge length, or the sample Fermat weight `‖x − y‖^α`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtm::Dtm;
use crate::error::{Error, Result};
use crate::measures::{make_empirical, DtmParams, PointCloud, WeightedMeasure};
use crate::spatial::SpatialIndex;

/// Which vertex pairs get an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphTopology {
    Complete,
    /// Union of every vertex's `k` nearest neighbours.
    KNearest {
        k: usize,
    },
    /// Nearest vertex in each of `cones` equal angular sectors (2-D only).
    Yao {
        cones: usize,
    },
}

impl GraphTopology {
    /// `max(6, ⌈log₂ n⌉)`, the default `k` and cone count.
    pub fn default_size(n: usize) -> usize {
        crate::ceil_log2(n).max(6)
    }

    pub fn knearest_default(n: usize) -> Self {
        Self::KNearest {
            k: Self::default_size(n),
        }
    }

    pub fn yao_default(n: usize) -> Self {
        Self::Yao {
            cones: Self::default_size(n),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            Self::Complete => Ok(()),
            Self::KNearest { k: 0 } => Err(Error::invalid("k-nearest graph needs k >= 1")),
            Self::KNearest { .. } => Ok(()),
            Self::Yao { cones } if cones < 2 => {
                Err(Error::invalid("Yao graph needs at least 2 cones"))
            }
            Self::Yao { .. } if dim != 2 => Err(Error::Unsupported(format!(
                "Yao graphs are only defined in dimension 2, got dimension {dim}"
            ))),
            Self::Yao { .. } => Ok(()),
        }
    }
}

/// How an edge `[x, y]` is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `(‖x − y‖ / r) Σ_t dtm(x_t)^β` over `r` midpoints.
    SubdividedDtm { subdivisions: usize },
    /// `‖x − y‖ (dtm(x)^β + dtm(y)^β) / 2`.
    EndpointAverageDtm,
    /// `‖x − y‖^α`; the DTM parameters are ignored.
    SampleFermat { alpha: f64 },
}

impl WeightMode {
    /// Subdivided DTM weights with `⌈log₂ n⌉` cells (at least one).
    pub fn subdivided_default(n: usize) -> Self {
        Self::SubdividedDtm {
            subdivisions: crate::ceil_log2(n).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::SubdividedDtm { subdivisions: 0 } => Err(Error::invalid(
                "subdivided weights need at least one subdivision",
            )),
            Self::SampleFermat { alpha } if !(alpha > 1.0 && alpha.is_finite()) => Err(
                Error::invalid(format!("Fermat exponent alpha must exceed 1, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn uses_dtm(&self) -> bool {
        !matches!(self, Self::SampleFermat { .. })
    }
}

/// Undirected weighted edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// How a graph was built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub topology: GraphTopology,
    pub weights: WeightMode,
    pub params: DtmParams,
}

/// Vertices, undirected edges and adjacency lists.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertices: PointCloud,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    spec: Option<GraphSpec>,
}

impl MetricGraph {
    /// Graph from explicit edges; pairs are normalized to `i < j`.
    pub fn from_edges(vertices: PointCloud, edges: Vec<Edge>) -> Result<Self> {
        Self::assemble(vertices, edges, None)
    }

    fn assemble(
        vertices: PointCloud,
        mut edges: Vec<Edge>,
        spec: Option<GraphSpec>,
    ) -> Result<Self> {
        let n = vertices.len();
        for e in edges.iter_mut() {
            if e.i == e.j {
                return Err(Error::invalid(format!("self-loop at vertex {}", e.i)));
            }
            if e.i.max(e.j) >= n {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) out of range for {n} vertices",
                    e.i, e.j
                )));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) has weight {}",
                    e.i, e.j, e.weight
                )));
            }
            if e.i > e.j {
                std::mem::swap(&mut e.i, &mut e.j);
            }
        }
        edges.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j))
        {
            return Err(Error::invalid(format!(
                "duplicate edge ({}, {})",
                w[0].i, w[0].j
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.i].push((e.j, e.weight));
            adjacency[e.j].push((e.i, e.weight));
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|&(v, _)| v);
        }
        Ok(Self {
            vertices,
            edges,
            adjacency,
            spec,
        })
    }

    pub fn vertices(&self) -> &PointCloud {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges sorted by `(i, j)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `v` with edge weights, by ascending index.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    /// Construction metadata; `None` for graphs built from explicit edges.
    pub fn spec(&self) -> Option<&GraphSpec> {
        self.spec.as_ref()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let list = self.adjacency.get(i)?;
        list.binary_search_by_key(&j, |&(v, _)| v)
            .ok()
            .map(|pos| list[pos].1)
    }
}

/// Weight rule bound to a measure, shared by graph edges and query edges.
pub(crate) struct EdgeWeigher<'a> {
    mode: WeightMode,
    dtm: Option<Dtm<'a>>,
}

impl<'a> EdgeWeigher<'a> {
    pub(crate) fn new(
        mode: WeightMode,
        index: &'a SpatialIndex,
        params: &DtmParams,
    ) -> Result<Self> {
        mode.validate()?;
        let dtm = if mode.uses_dtm() {
            Some(Dtm::new(index, params)?)
        } else {
            None
        };
        Ok(Self { mode, dtm })
    }

    pub(crate) fn mode(&self) -> WeightMode {
        self.mode
    }

    pub(crate) fn dtm(&self) -> Option<&Dtm<'a>> {
        self.dtm.as_ref()
    }

    /// Per-point term used by the endpoint-average rule (`dtm^β`), else 0.
    pub(crate) fn endpoint_term(&self, x: &[f64]) -> f64 {
        match (self.mode, &self.dtm) {
            (WeightMode::EndpointAverageDtm, Some(d)) => d.powered(x),
            _ => 0.0,
        }
    }

    /// Weight of `[x, y]`; `tx`, `ty` are the endpoint terms.
    pub(crate) fn weight(&self, x: &[f64], y: &[f64], tx: f64, ty: f64) -> f64 {
        match self.mode {
            WeightMode::SubdividedDtm { subdivisions } => self
                .dtm
                .as_ref()
                .expect("DTM weights carry an evaluator")
                .segment_integral(x, y, subdivisions),
            WeightMode::EndpointAverageDtm => crate::euclidean(x, y) * 0.5 * (tx + ty),
            WeightMode::SampleFermat { alpha } => crate::euclidean(x, y).powf(alpha),
        }
    }
}

/// Candidate vertex pairs `(i, j)`, `i < j`, sorted and deduplicated.
pub fn edge_set(cloud: &PointCloud, topology: &GraphTopology) -> Result<Vec<(usize, usize)>> {
    topology.validate(cloud.dim())?;
    let n = cloud.len();
    let mut pairs: Vec<(usize, usize)> = match *topology {
        GraphTopology::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        GraphTopology::KNearest { k } => {
            let k = k.min(n.saturating_sub(1));
            let index = SpatialIndex::new(&make_empirical(cloud)?);
            (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    index
                        .knn(cloud.point(i), k + 1)
                        .into_iter()
                        .filter(move |nb| nb.index != i)
                        .take(k)
                        .map(move |nb| (i.min(nb.index), i.max(nb.index)))
                        .collect::<Vec<_>>()
                })
                .collect()
        }
        GraphTopology::Yao { cones } => (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                yao_neighbors(cloud, i, cones)
                    .into_iter()
                    .map(move |j| (i.min(j), i.max(j)))
            })
            .collect(),
    };
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Cone of direction `(dx, dy)` among `cones` sectors `[kθ, (k+1)θ)`.
pub(crate) fn cone_of(dx: f64, dy: f64, cones: usize) -> usize {
    let angle = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
    let k = (angle / (std::f64::consts::TAU / cones as f64)).floor() as usize;
    k.min(cones - 1)
}

fn yao_neighbors(cloud: &PointCloud, i: usize, cones: usize) -> Vec<usize> {
    let x = cloud.point(i);
    let mut best: Vec<Option<(f64, usize)>> = vec![None; cones];
    for (j, y) in cloud.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = crate::squared_euclidean(x, y);
        let c = cone_of(y[0] - x[0], y[1] - x[1], cones);
        // strict comparison keeps the lowest index on ties
        if best[c].is_none_or(|(bd, _)| d < bd) {
            best[c] = Some((d, j));
        }
    }
    best.into_iter().flatten().map(|(_, j)| j).collect()
}

/// Graph over an empirical (uniform) measure on `cloud`.
pub fn build_graph(
    cloud: &PointCloud,
    topology: &GraphTopology,
    weights: &WeightMode,
    params: &DtmParams,
) -> Result<MetricGraph> {
    build_graph_for_measure(&make_empirical(cloud)?, topology, weights, params)
}

/// Graph over the support of `measure`, weighted by its DTM.
pub fn build_graph_for_measure(
    measure: &WeightedMeasure,
    topology: &GraphTopology,
    weights: &WeightMode,
    params: &DtmParams,
) -> Result<MetricGraph> {
    let cloud = measure.cloud();
    if cloud.len() < 2 {
        return Err(Error::invalid("a graph needs at least two points"));
    }
    params.validate()?;
    let pairs = edge_set(cloud, topology)?;
    let index = SpatialIndex::new(measure);
    let weigher = EdgeWeigher::new(*weights, &index, params)?;
    let terms: Vec<f64> = if matches!(weights, WeightMode::EndpointAverageDtm) {
        (0..cloud.len())
            .into_par_iter()
            .map(|i| weigher.endpoint_term(cloud.point(i)))
            .collect()
    } else {
        vec![0.0; cloud.len()]
    };
    let edges = pairs
        .par_iter()
        .map(|&(i, j)| Edge {
            i,
            j,
            weight: weigher.weight(cloud.point(i), cloud.point(j), terms[i], terms[j]),
        })
        .collect();
    MetricGraph::assemble(
        cloud.clone(),
        edges,
        Some(GraphSpec {
            topology: *topology,
            weights: *weights,
            params: *params,
        }),
    )
}

/// Edge counts against the `n·size` budget of sparse topologies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCountReport {
    pub vertices: usize,
    pub edges: usize,
    /// `n · k` (or `n · cones`); `n · ⌈log₂ n⌉` for complete graphs.
    pub bound: usize,
    pub within_bound: bool,
    /// The edge count is the full `n(n − 1)/2`.
    pub quadratic: bool,
}

pub fn edge_count_bound_check(graph: &MetricGraph) -> EdgeCountReport {
    let n = graph.len();
    let per_vertex = match graph.spec().map(|s| s.topology) {
        Some(GraphTopology::KNearest { k }) => k,
        Some(GraphTopology::Yao { cones }) => cones,
        _ => crate::ceil_log2(n),
    };
    let edges = graph.edges().len();
    let bound = n * per_vertex;
    EdgeCountReport {
        vertices: n,
        edges,
        bound,
        within_bound: edges <= bound,
        quadratic: n > 1 && edges == n * (n - 1) / 2,
    }
}
