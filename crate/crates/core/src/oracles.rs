//! Independent reference computations: brute force and closed forms.
//!
//! None of these share code paths with the production pipeline beyond the
//! data types, so agreement between the two is meaningful.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dtm::dtm_segment_integral;
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::measures::{DtmParams, WeightedMeasure};
use crate::spatial::SpatialIndex;

/// Subdivisions of [`high_resolution_edge_weight`].
pub const HIGH_RESOLUTION: usize = 10_000;

/// Largest chord count tried by [`circle_fdtm_analytic`].
pub const MAX_CHORDS: usize = 64;

/// A computed value next to its reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub computed: f64,
    pub reference: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl OracleReport {
    pub fn new(computed: f64, reference: f64) -> Self {
        let abs_err = (computed - reference).abs();
        Self {
            computed,
            reference,
            abs_err,
            rel_err: abs_err / reference.abs().max(1e-300),
        }
    }
}

/// Exact `W_p` between two uniform measures with the same number (≤ 7) of
/// atoms, by trying every bijection.
pub fn wasserstein_bruteforce(mu: &WeightedMeasure, nu: &WeightedMeasure, p: f64) -> Result<f64> {
    let n = mu.len();
    if n != nu.len() || !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::Unsupported(
            "brute-force Wasserstein needs two uniform measures of equal size".into(),
        ));
    }
    if n > 7 {
        return Err(Error::Unsupported(format!(
            "brute-force Wasserstein is capped at 7 atoms, got {n}"
        )));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!(
            "Wasserstein exponent must be >= 1, got {p}"
        )));
    }
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| crate::euclidean(mu.cloud().point(i), nu.cloud().point(j)).powf(p))
                .collect()
        })
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, n, &mut |pi| {
        let total: f64 = pi.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        best = best.min(total);
    });
    Ok((best / n as f64).powf(1.0 / p))
}

// Heap's algorithm
fn permute(a: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        visit(a);
        return;
    }
    permute(a, k - 1, visit);
    for i in 0..k - 1 {
        if k.is_multiple_of(2) {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
        permute(a, k - 1, visit);
    }
}

/// Cheapest simple path from `s` to `t` by depth-first enumeration
/// (graphs with at most 8 vertices).
pub fn exhaustive_shortest(graph: &MetricGraph, s: usize, t: usize) -> Result<f64> {
    let n = graph.len();
    if n > 8 {
        return Err(Error::Unsupported(format!(
            "exhaustive path enumeration is capped at 8 vertices, got {n}"
        )));
    }
    if s >= n || t >= n {
        return Err(Error::invalid(format!(
            "vertex out of range for {n} vertices"
        )));
    }
    let mut best = f64::INFINITY;
    let mut on_path = vec![false; n];
    on_path[s] = true;
    dfs(graph, s, t, 0.0, &mut on_path, &mut best);
    Ok(best)
}

fn dfs(graph: &MetricGraph, u: usize, t: usize, acc: f64, on_path: &mut [bool], best: &mut f64) {
    if u == t {
        *best = best.min(acc);
        return;
    }
    for &(v, w) in graph.neighbors(u) {
        if !on_path[v] {
            on_path[v] = true;
            dfs(graph, v, t, acc + w, on_path, best);
            on_path[v] = false;
        }
    }
}

/// `δ_u(x)` by definition: the smallest atom distance whose closed ball
/// carries mass above `u`. Quadratic in the atom count.
pub fn pseudo_dtm_bruteforce(mu: &WeightedMeasure, x: &[f64], u: f64) -> f64 {
    let radii = atom_radii(mu, x);
    radii
        .iter()
        .filter(|&&r| ball_mass(&radii, mu.masses(), r) > u)
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// DTM of `mu` at `x` by piecewise-constant quadrature of `δ_u^p` over
/// `u ∈ [0, m]`, cut at every ball mass so each piece is exact.
pub fn dtm_quadrature(mu: &WeightedMeasure, x: &[f64], m: f64, p: f64) -> f64 {
    let radii = atom_radii(mu, x);
    let mut cuts: Vec<f64> = radii
        .iter()
        .map(|&r| ball_mass(&radii, mu.masses(), r))
        .filter(|&c| c < m)
        .collect();
    cuts.push(0.0);
    cuts.push(m);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut acc = 0.0;
    for pair in cuts.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        acc += pseudo_dtm_bruteforce(mu, x, mid).powf(p) * (pair[1] - pair[0]);
    }
    (acc / m).powf(1.0 / p)
}

fn atom_radii(mu: &WeightedMeasure, x: &[f64]) -> Vec<f64> {
    mu.cloud()
        .iter()
        .map(|q| {
            q.iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn ball_mass(radii: &[f64], masses: &[f64], r: f64) -> f64 {
    radii
        .iter()
        .zip(masses)
        .filter(|(s, _)| **s <= r)
        .map(|(_, w)| w)
        .sum()
}

/// Pseudo-DTM of the uniform unit-circle measure at radius `rho ≤ 1`: the
/// ball reaching the arc of half-angle `πu` around the nearest circle point.
pub fn circle_pseudo_dtm(rho: f64, u: f64) -> f64 {
    (1.0 + rho * rho - 2.0 * rho * (PI * u).cos())
        .max(0.0)
        .sqrt()
}

/// DTM of the uniform unit-circle measure at radius `rho ≤ 1`, by the
/// midpoint rule over `u ∈ [0, m]` with `q` nodes.
pub fn circle_dtm(rho: f64, params: &DtmParams, q: usize) -> f64 {
    circle_dtm_on(rho, &arc_cosines(params.m, q), params.p)
}

/// `cos(πu)` at the `q` midpoint nodes of `[0, m]`.
fn arc_cosines(m: f64, q: usize) -> Vec<f64> {
    (0..q)
        .map(|i| (PI * ((i as f64 + 0.5) / q as f64 * m)).cos())
        .collect()
}

fn circle_dtm_on(rho: f64, cosines: &[f64], p: f64) -> f64 {
    // δ_u^p = (δ_u²)^{p/2}
    let half = 0.5 * p;
    let mean = cosines
        .iter()
        .map(|c| {
            let sq = (1.0 + rho * rho - 2.0 * rho * c).max(0.0);
            if half == 1.0 {
                sq
            } else {
                sq.powf(half)
            }
        })
        .sum::<f64>()
        / cosines.len() as f64;
    mean.powf(1.0 / p)
}

/// FDTM length of one chord subtending `phi`, midpoint rule with `q` nodes
/// along the chord and `q` nodes per DTM value.
pub fn circle_chord_length(phi: f64, params: &DtmParams, q: usize) -> f64 {
    chord_length_on(phi, params, &arc_cosines(params.m, q))
}

fn chord_length_on(phi: f64, params: &DtmParams, cosines: &[f64]) -> f64 {
    let q = cosines.len();
    let half = 0.5 * phi;
    let len = 2.0 * half.sin();
    let apothem = half.cos();
    let sum: f64 = (0..q)
        .map(|i| {
            let s = (i as f64 + 0.5) / q as f64;
            // distance from the chord point to the center
            let along = (s - 0.5) * len;
            let rho = (apothem * apothem + along * along).sqrt();
            circle_dtm_on(rho, cosines, params.p).powf(params.beta)
        })
        .sum();
    len * sum / q as f64
}

/// Equal-chord FDTM geodesic between two unit-circle points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGeodesic {
    pub distance: f64,
    pub chords: usize,
    /// The chord count hit [`MAX_CHORDS`].
    pub capped: bool,
}

/// [`circle_fdtm_analytic`] with the minimizing chord count.
pub fn circle_geodesic(
    angle: f64,
    params: &DtmParams,
    quadrature_points: usize,
) -> Result<CircleGeodesic> {
    params.validate()?;
    if quadrature_points < 100 {
        return Err(Error::invalid(
            "circle oracle needs at least 100 quadrature points",
        ));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("angle must be finite"));
    }
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a = 2.0 * PI - a;
    }
    if a == 0.0 {
        return Ok(CircleGeodesic {
            distance: 0.0,
            chords: 0,
            capped: false,
        });
    }
    let cosines = arc_cosines(params.m, quadrature_points);
    let lengths: Vec<f64> = (1..=MAX_CHORDS)
        .into_par_iter()
        .map(|k| k as f64 * chord_length_on(a / k as f64, params, &cosines))
        .collect();
    let (chords, distance) = (1..=MAX_CHORDS)
        .zip(lengths)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nonempty range");
    Ok(CircleGeodesic {
        distance,
        chords,
        capped: chords == MAX_CHORDS,
    })
}

/// FDTM between two unit-circle points `angle` apart for the uniform circle
/// measure, assuming geodesics made of equal chords.
pub fn circle_fdtm_analytic(
    angle: f64,
    params: &DtmParams,
    quadrature_points: usize,
) -> Result<f64> {
    circle_geodesic(angle, params, quadrature_points).map(|g| g.distance)
}

/// Subdivided edge weight with [`HIGH_RESOLUTION`] midpoints.
pub fn high_resolution_edge_weight(
    measure: &WeightedMeasure,
    x: &[f64],
    y: &[f64],
    params: &DtmParams,
) -> Result<f64> {
    let index = SpatialIndex::new(measure);
    dtm_segment_integral(&index, x, y, params, HIGH_RESOLUTION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::measures::{make_empirical, PointCloud};

    fn uniform(points: &[&[f64]]) -> WeightedMeasure {
        make_empirical(&PointCloud::from_points(points).unwrap()).unwrap()
    }

    #[test]
    fn wasserstein_small_cases() {
        let a = uniform(&[&[0.0], &[1.0]]);
        let b = uniform(&[&[0.1], &[0.9]]);
        assert_eq!(wasserstein_bruteforce(&a, &a, 2.0).unwrap(), 0.0);
        assert!((wasserstein_bruteforce(&a, &b, 2.0).unwrap() - 0.1).abs() < 1e-15);
        let s = uniform(&[&[0.0, 0.0]]);
        let t = uniform(&[&[3.0, 4.0]]);
        assert!((wasserstein_bruteforce(&s, &t, 1.5).unwrap() - 5.0).abs() < 1e-12);
        // the optimal matching crosses the listed order
        let c = uniform(&[&[0.0], &[10.0]]);
        let d = uniform(&[&[10.0], &[0.0]]);
        assert_eq!(wasserstein_bruteforce(&c, &d, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_rejects_unsupported_inputs() {
        let a = uniform(&[&[0.0], &[1.0]]);
        let b = uniform(&[&[0.0]]);
        assert!(matches!(
            wasserstein_bruteforce(&a, &b, 1.0),
            Err(Error::Unsupported(_))
        ));
        let w = WeightedMeasure::new(
            PointCloud::from_points(&[[0.0], [1.0]]).unwrap(),
            vec![0.3, 0.7],
        )
        .unwrap();
        assert!(matches!(
            wasserstein_bruteforce(&a, &w, 1.0),
            Err(Error::Unsupported(_))
        ));
        let pts: Vec<[f64; 1]> = (0..8).map(|i| [i as f64]).collect();
        let big = make_empirical(&PointCloud::from_points(&pts).unwrap()).unwrap();
        assert!(wasserstein_bruteforce(&big, &big, 1.0).is_err());
    }

    #[test]
    fn heap_permutations_are_complete() {
        let mut a: Vec<usize> = (0..5).collect();
        let mut seen = std::collections::BTreeSet::new();
        permute(&mut a, 5, &mut |p| {
            seen.insert(p.to_vec());
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn exhaustive_small_cases() {
        let cloud = PointCloud::from_points(&[[0.0], [1.0], [2.0]]).unwrap();
        let g = MetricGraph::from_edges(
            cloud,
            vec![
                Edge {
                    i: 0,
                    j: 1,
                    weight: 1.0,
                },
                Edge {
                    i: 1,
                    j: 2,
                    weight: 1.0,
                },
                Edge {
                    i: 0,
                    j: 2,
                    weight: 3.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(exhaustive_shortest(&g, 1, 1).unwrap(), 0.0);
        assert_eq!(exhaustive_shortest(&g, 0, 1).unwrap(), 1.0);
        assert_eq!(exhaustive_shortest(&g, 0, 2).unwrap(), 2.0);
        let lone =
            MetricGraph::from_edges(PointCloud::from_points(&[[0.0], [1.0]]).unwrap(), vec![])
                .unwrap();
        assert!(exhaustive_shortest(&lone, 0, 1).unwrap().is_infinite());
    }

    #[test]
    fn circle_identities() {
        assert_eq!(circle_pseudo_dtm(1.0, 0.0), 0.0);
        for m in [0.05, 0.1, 0.3] {
            let want = 2.0 * (PI * m / 2.0).sin();
            assert!((circle_pseudo_dtm(1.0, m) - want).abs() < 1e-15);
        }
        let params = DtmParams::default();
        assert_eq!(circle_fdtm_analytic(0.0, &params, 100).unwrap(), 0.0);
        assert!(circle_fdtm_analytic(1.0, &params, 99).is_err());
        // at the center every ball has radius one
        assert!((circle_dtm(0.0, &params, 200) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_geodesic_refines_single_chord() {
        let params = DtmParams::default();
        let g = circle_geodesic(PI, &params, 400).unwrap();
        assert!(g.chords > 1 && !g.capped, "{g:?}");
        assert!(g.distance <= circle_chord_length(PI, &params, 400));
        // symmetry reduction
        let a = circle_fdtm_analytic(2.0, &params, 200).unwrap();
        let b = circle_fdtm_analytic(2.0 * PI - 2.0, &params, 200).unwrap();
        let c = circle_fdtm_analytic(-2.0, &params, 200).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn circle_dtm_matches_dense_empirical_measure() {
        // a fine regular polygon stands in for the circle
        let n = 20_000;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let mu = make_empirical(&PointCloud::from_points(&pts).unwrap()).unwrap();
        let idx = SpatialIndex::new(&mu);
        let params = DtmParams::default();
        for rho in [0.0, 0.5, 0.9, 1.0] {
            let got = crate::dtm_value(&idx, &[rho, 0.0], &params).unwrap();
            let want = circle_dtm(rho, &params, 2000);
            assert!((got - want).abs() < 1e-3, "rho={rho}: {got} vs {want}");
        }
    }

    #[test]
    fn high_resolution_closed_form() {
        let mu = uniform(&[&[0.3, 0.0]]);
        let params = DtmParams::new(0.5, 2.0, 2.0).unwrap();
        let exact = (0.3f64.powi(3) + 0.7f64.powi(3)) / 3.0;
        let v = high_resolution_edge_weight(&mu, &[0.0, 0.0], &[1.0, 0.0], &params).unwrap();
        assert!((v - exact).abs() < 1e-4);
        assert_eq!(
            high_resolution_edge_weight(&mu, &[0.5, 0.5], &[0.5, 0.5], &params).unwrap(),
            0.0
        );
    }

    #[test]
    fn report_errors() {
        let r = OracleReport::new(1.1, 1.0);
        assert!((r.abs_err - 0.1).abs() < 1e-12);
        assert!((r.rel_err - 0.1).abs() < 1e-12);
        assert_eq!(OracleReport::new(0.0, 0.0).rel_err, 0.0);
    }
}
