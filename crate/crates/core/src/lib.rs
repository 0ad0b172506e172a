//! # fdtm
//!
//! Distance-to-measure (DTM) for weighted discrete measures and the empirical
//! Fermat distance-to-measure (FDTM), a density-aware path metric computed as
//! shortest paths on weighted graphs over point clouds.
//!
//! The DTM of a measure `μ` with mass parameter `m` and exponent `p` is the
//! `p`-Hölder mean, over mass fractions `u ∈ [0, m]`, of the smallest radius
//! of a ball around `x` holding more than `u` of the mass. It is small in dense
//! regions and grows like a distance away from the support.
//!
//! The FDTM length of a path is the integral of `dtm^β` along it. On a sample
//! point cloud, admissible paths are polylines through sample points, so the
//! empirical FDTM is the metric of a weighted graph whose edge weights are
//! segment integrals of the DTM.
//!
//! ## Layout
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`measures`] | point clouds, weighted measures, samplers and fixtures |
//! | [`spatial`] | exact k-nearest-neighbour index carrying masses |
//! | [`dtm`] | exact discrete DTM, batches, segment integrals |
//! | [`graph`] | complete / k-nearest / Yao graphs with DTM or Fermat weights |
//! | [`paths`] | Dijkstra, geodesic extraction, FDTM queries |
//! | [`oracles`] | brute-force and analytic references |
//! | [`experiments`] | circle convergence, ring shortcut, geodesic dumps |
//! | [`validate`] | property checks behind `fdtm validate` |
//!
//! ## Quick start
//!
//! ```
//! use fdtm::{measures, DtmParams, GraphTopology, WeightMode};
//!
//! let cloud = measures::sample_circle(256, 7).unwrap();
//! let params = DtmParams::new(0.1, 2.0, 2.0).unwrap();
//! let geo = fdtm::fdtm_distance(
//!     &cloud,
//!     &GraphTopology::Complete,
//!     &WeightMode::SubdividedDtm { subdivisions: 8 },
//!     &params,
//!     &[1.0, 0.0],
//!     &[-1.0, 0.0],
//! )
//! .unwrap();
//! assert!(geo.distance > 0.0);
//! ```

pub mod dtm;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod measures;
pub mod oracles;
pub mod paths;
pub mod rng;
pub mod spatial;
pub mod validate;

pub use dtm::{dtm_batch, dtm_segment_integral, dtm_value};
pub use error::{Error, Result};
pub use graph::{build_graph, build_graph_for_measure, GraphTopology, MetricGraph, WeightMode};
pub use measures::{DtmParams, PointCloud, WeightedMeasure};
pub use paths::{fdtm_distance, fdtm_query, single_source, GeodesicResult, ShortestPathTree};
pub use spatial::SpatialIndex;

/// Euclidean distance between two equal-length coordinate slices.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `⌈log₂ n⌉`, the size used for sparse topologies and subdivisions.
pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_small_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
        assert_eq!(ceil_log2(4096), 12);
    }
}
