//! Property checks behind `fdtm validate`.
//!
//! Each check compares the pipeline against an oracle or an inequality and
//! reports its worst case next to the allowed limit, so a passing table also
//! shows how much room was left.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dtm::Dtm;
use crate::error::Result;
use crate::graph::{
    build_graph, build_graph_for_measure, Edge, GraphTopology, MetricGraph, WeightMode,
};
use crate::measures::{
    lecam_pair, make_empirical, sample_circle, scale_measure, DtmParams, LeCamSpec, PointCloud,
    WeightedMeasure,
};
use crate::oracles::{dtm_quadrature, exhaustive_shortest, wasserstein_bruteforce};
use crate::paths::{all_pairs_sampled, fdtm_distance_for_measure, fdtm_query, single_source};
use crate::rng::{stream, stream_id};
use crate::spatial::SpatialIndex;

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst value seen over all instances.
    pub measured: f64,
    /// Largest value the property allows.
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, limit: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            limit,
            passed: measured <= limit,
            detail,
        }
    }

    /// `limit − measured`; negative when the check fails.
    pub fn slack(&self) -> f64 {
        self.limit - self.measured
    }
}

/// Deliberate corruption of the pipeline output, used to test that the
/// checks can fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// Multiplies the distance between vertices `i` and `j` (both directions)
    /// in the metric-axiom check by `factor`.
    PerturbWeight { i: usize, j: usize, factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            seed: 7,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Fixed-width table, one row per check.
    pub fn to_table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<width$}  {:>12}  {:>12}  {:>12}  result\n",
            "check", "measured", "limit", "slack"
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.4e}  {:>12.4e}  {:>12.4e}  {}",
                c.name,
                c.measured,
                c.limit,
                c.slack(),
                if c.passed { "pass" } else { "FAIL" }
            );
            if !c.passed && !c.detail.is_empty() {
                let _ = writeln!(out, "  {} violated: {}", c.name, c.detail);
            }
        }
        out
    }
}

/// Runs every check.
pub fn run(options: &Options) -> Result<Report> {
    let seed = options.seed;
    let mut checks = vec![
        dtm_exactness(seed, 100)?,
        dtm_lipschitz(seed, 20, 10_000)?,
        wasserstein_stability(seed, 50)?,
        shortest_path_oracle(seed, 500)?,
    ];
    checks.extend(metric_axioms(seed, 200, options.fault)?);
    checks.push(geodesic_length_bound(seed, 20)?);
    checks.push(scaling_covariance(seed, &[0.5, 3.0])?);
    checks.push(straight_segment_bound(seed, 20)?);
    checks.push(graph_monotonicity(seed, 5)?);
    checks.extend(lecam_fixture()?);
    Ok(Report { checks })
}

fn rng_for(seed: u64, check: u64, instance: u64) -> ChaCha8Rng {
    stream(seed, stream_id(&[check, instance]))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            vec![
                rng.random_range(-half_width..half_width),
                rng.random_range(-half_width..half_width),
            ]
        })
        .collect()
}

fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> Result<WeightedMeasure> {
    let n = rng.random_range(1..=max_atoms);
    let pts = random_points(rng, n, 4.0);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    WeightedMeasure::new(
        PointCloud::from_points(&pts)?,
        raw.iter().map(|w| w / total).collect(),
    )
}

fn uniform_measure(pts: &[Vec<f64>]) -> Result<WeightedMeasure> {
    make_empirical(&PointCloud::from_points(pts)?)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `dtm_value` against piecewise-constant quadrature of `δ_u^p` on random
/// weighted measures with at most 20 atoms.
pub fn dtm_exactness(seed: u64, measures: usize) -> Result<Check> {
    let worst = (0..measures)
        .into_par_iter()
        .map(|i| -> Result<(f64, String)> {
            let mut rng = rng_for(seed, 1, i as u64);
            let mu = random_measure(&mut rng, 20)?;
            let index = SpatialIndex::new(&mu);
            let mut worst = (0.0, String::new());
            for _ in 0..10 {
                let m = rng.random_range(0.01..=1.0);
                let p = rng.random_range(1.0..4.0);
                let params = DtmParams::new(m, p, 1.0)?;
                let dtm = Dtm::new(&index, &params)?;
                let x = random_points(&mut rng, 1, 5.0).remove(0);
                let e = rel_err(dtm.value(&x), dtm_quadrature(&mu, &x, m, p));
                if e > worst.0 {
                    worst = (e, format!("measure {i}, m={m}, p={p}, x={x:?}"));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(Check::at_most(
        "dtm exactness (relative error)",
        worst.0,
        1e-9,
        worst.1,
    ))
}

/// `|dtm(x) − dtm(y)| − ‖x − y‖` over random pairs.
pub fn dtm_lipschitz(seed: u64, measures: usize, pairs: usize) -> Result<Check> {
    let worst = (0..measures)
        .into_par_iter()
        .map(|i| -> Result<(f64, String)> {
            let mut rng = rng_for(seed, 2, i as u64);
            let mu = random_measure(&mut rng, 20)?;
            let index = SpatialIndex::new(&mu);
            let params = DtmParams::new(
                rng.random_range(0.01..=1.0),
                rng.random_range(1.0..4.0),
                1.0,
            )?;
            let dtm = Dtm::new(&index, &params)?;
            let mut worst = (f64::NEG_INFINITY, String::new());
            for _ in 0..pairs {
                let x = random_points(&mut rng, 1, 6.0).remove(0);
                let y = random_points(&mut rng, 1, 6.0).remove(0);
                let excess = (dtm.value(&x) - dtm.value(&y)).abs() - crate::euclidean(&x, &y);
                if excess > worst.0 {
                    worst = (excess, format!("measure {i}, x={x:?}, y={y:?}"));
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((f64::NEG_INFINITY, String::new()), |a, b| {
            if b.0 > a.0 {
                b
            } else {
                a
            }
        });
    Ok(Check::at_most(
        "dtm 1-Lipschitz (excess)",
        worst.0,
        1e-9,
        worst.1,
    ))
}

/// `sup |d_μ − d_ν| − W_p(μ, ν) / m^{1/p}` over a grid, for pairs of uniform
/// six-atom measures.
pub fn wasserstein_stability(seed: u64, pairs: usize) -> Result<Check> {
    const GRID: usize = 41;
    let worst = (0..pairs)
        .into_par_iter()
        .map(|i| -> Result<(f64, String)> {
            let mut rng = rng_for(seed, 3, i as u64);
            let mu = uniform_measure(&random_points(&mut rng, 6, 2.0))?;
            let nu = uniform_measure(&random_points(&mut rng, 6, 2.0))?;
            let m = rng.random_range(0.05..=1.0);
            let p = rng.random_range(1.0..3.0);
            let params = DtmParams::new(m, p, 1.0)?;
            let (iu, iv) = (SpatialIndex::new(&mu), SpatialIndex::new(&nu));
            let (du, dv) = (Dtm::new(&iu, &params)?, Dtm::new(&iv, &params)?);
            let mut sup: f64 = 0.0;
            for a in 0..GRID {
                for b in 0..GRID {
                    let x = [
                        -3.0 + 6.0 * a as f64 / (GRID - 1) as f64,
                        -3.0 + 6.0 * b as f64 / (GRID - 1) as f64,
                    ];
                    sup = sup.max((du.value(&x) - dv.value(&x)).abs());
                }
            }
            let bound = wasserstein_bruteforce(&mu, &nu, p)? / m.powf(1.0 / p);
            Ok((sup - bound, format!("pair {i}, m={m}, p={p}")))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((f64::NEG_INFINITY, String::new()), |a, b| {
            if b.0 > a.0 {
                b
            } else {
                a
            }
        });
    Ok(Check::at_most(
        "Wasserstein stability (excess)",
        worst.0,
        1e-9,
        worst.1,
    ))
}

fn random_graph(rng: &mut ChaCha8Rng) -> Result<MetricGraph> {
    let n = rng.random_range(2..=8);
    let cloud = PointCloud::from_points(&random_points(rng, n, 1.0))?;
    let density = rng.random_range(0.2..0.9);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push(Edge {
                    i,
                    j,
                    weight: rng.random_range(0.01..10.0),
                });
            }
        }
    }
    MetricGraph::from_edges(cloud, edges)
}

/// Dijkstra against depth-first enumeration of simple paths.
pub fn shortest_path_oracle(seed: u64, graphs: usize) -> Result<Check> {
    let worst = (0..graphs)
        .into_par_iter()
        .map(|g| -> Result<(f64, String)> {
            let mut rng = rng_for(seed, 4, g as u64);
            let graph = random_graph(&mut rng)?;
            let mut worst = (0.0, String::new());
            for s in 0..graph.len() {
                let tree = single_source(&graph, s)?;
                for t in 0..graph.len() {
                    let want = exhaustive_shortest(&graph, s, t)?;
                    let got = tree.dist[t];
                    let e = if want.is_infinite() || got.is_infinite() {
                        if want == got {
                            0.0
                        } else {
                            f64::INFINITY
                        }
                    } else {
                        rel_err(got, want)
                    };
                    if e > worst.0 {
                        worst = (e, format!("graph {g}, {s} -> {t}: {got} vs {want}"));
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(Check::at_most(
        "shortest paths vs enumeration (relative error)",
        worst.0,
        1e-12,
        worst.1,
    ))
}

/// Symmetry, zero diagonal and the triangle inequality over every triple of
/// the all-pairs FDTM on an `n`-point circle sample.
pub fn metric_axioms(seed: u64, n: usize, fault: Option<Fault>) -> Result<Vec<Check>> {
    let cloud = sample_circle(n, stream_id(&[seed, 5]))?;
    let params = DtmParams::default();
    let graph = build_graph(
        &cloud,
        &GraphTopology::Complete,
        &WeightMode::subdivided_default(n),
        &params,
    )?;
    let sources: Vec<usize> = (0..n).collect();
    let mut d = all_pairs_sampled(&graph, &sources)?;
    if let Some(Fault::PerturbWeight { i, j, factor }) = fault {
        if i < n && j < n {
            d[i][j] *= factor;
            d[j][i] *= factor;
        }
    }
    Ok(axiom_checks(&d))
}

/// The three metric-axiom checks on a distance matrix, 1e-9 relative.
pub fn axiom_checks(d: &[Vec<f64>]) -> Vec<Check> {
    let n = d.len();
    let mut asym = (0.0, String::new());
    let mut diag = (0.0, String::new());
    for i in 0..n {
        if d[i][i].abs() > diag.0 {
            diag = (d[i][i].abs(), format!("d({i}, {i}) = {}", d[i][i]));
        }
        for j in i + 1..n {
            let e = (d[i][j] - d[j][i]).abs() / d[i][j].max(d[j][i]).max(1e-300);
            if e > asym.0 {
                asym = (
                    e,
                    format!("d({i}, {j}) = {} but d({j}, {i}) = {}", d[i][j], d[j][i]),
                );
            }
        }
    }
    let tri = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = (f64::NEG_INFINITY, String::new());
            for j in 0..n {
                for k in 0..n {
                    let via = d[i][k] + d[k][j];
                    let excess = (d[i][j] - via) / via.max(1e-300);
                    if excess > worst.0 {
                        worst = (
                            excess,
                            format!(
                                "d({i}, {j}) = {} against d({i}, {k}) + d({k}, {j}) = {}",
                                d[i][j], via
                            ),
                        );
                    }
                }
            }
            worst
        })
        .reduce(
            || (f64::NEG_INFINITY, String::new()),
            |a, b| if b.0 > a.0 { b } else { a },
        );
    vec![
        Check::at_most("metric: symmetry (relative)", asym.0, 1e-9, asym.1),
        Check::at_most("metric: zero diagonal", diag.0, 0.0, diag.1),
        Check::at_most(
            "metric: triangle inequality (relative excess)",
            tri.0,
            1e-9,
            tri.1,
        ),
    ]
}

/// Geodesic Euclidean length over `(max_{[x,y]} dtm / min dtm)^β ‖x − y‖`,
/// with the minimum over vertices and every subdivision midpoint the edge
/// weights sample, on complete graphs. The limit carries a 5% allowance.
pub fn geodesic_length_bound(seed: u64, clouds: usize) -> Result<Check> {
    let worst = (0..clouds)
        .into_par_iter()
        .map(|c| -> Result<(f64, String)> {
            let mut rng = rng_for(seed, 6, c as u64);
            let n = rng.random_range(30..=80);
            let cloud = PointCloud::from_points(&random_points(&mut rng, n, 1.0))?;
            let mu = make_empirical(&cloud)?;
            let params = DtmParams::default();
            let weights = WeightMode::subdivided_default(n);
            let r = match weights {
                WeightMode::SubdividedDtm { subdivisions } => subdivisions,
                _ => unreachable!(),
            };
            let graph = build_graph_for_measure(&mu, &GraphTopology::Complete, &weights, &params)?;
            let q = random_points(&mut rng, 2, 1.0);
            let (x, y) = (&q[0], &q[1]);
            let geo = fdtm_query(&mu, &graph, x, y, &params)?;

            let index = SpatialIndex::new(&mu);
            let dtm = Dtm::new(&index, &params)?;
            let mut nodes = cloud.to_points();
            nodes.push(x.clone());
            nodes.push(y.clone());
            let mut lo = f64::INFINITY;
            for (a, pa) in nodes.iter().enumerate() {
                lo = lo.min(dtm.value(pa));
                for pb in &nodes[a + 1..] {
                    for k in 0..r {
                        let t = (k as f64 + 0.5) / r as f64;
                        let z = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                        lo = lo.min(dtm.value(&z));
                    }
                }
            }
            let mut hi: f64 = 0.0;
            for k in 0..=1000 {
                let t = k as f64 / 1000.0;
                hi = hi.max(dtm.value(&[x[0] + t * (y[0] - x[0]), x[1] + t * (y[1] - x[1])]));
            }
            let bound = (hi / lo).powf(params.beta) * crate::euclidean(x, y);
            Ok((
                geo.euclidean_length / bound,
                format!("cloud {c}, n={n}, x={x:?}, y={y:?}"),
            ))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a });
    Ok(Check::at_most(
        "geodesic length bound (ratio)",
        worst.0,
        1.05,
        worst.1,
    ))
}

/// Relative deviation of `D_s / (s^{β+1} D)` from 1 when cloud and queries are
/// scaled by each `s`.
pub fn scaling_covariance(seed: u64, scales: &[f64]) -> Result<Check> {
    let mut worst = (0.0, String::new());
    for rep in 0..5u64 {
        let mut rng = rng_for(seed, 7, rep);
        let n = 100;
        let mu = make_empirical(&sample_circle(n, rng.random())?)?;
        let params = DtmParams::default();
        let weights = WeightMode::subdivided_default(n);
        let q = random_points(&mut rng, 2, 1.2);
        let base = fdtm_distance_for_measure(
            &mu,
            &GraphTopology::Complete,
            &weights,
            &params,
            &q[0],
            &q[1],
        )?;
        for &s in scales {
            let scaled = scale_measure(&mu, s)?;
            let (x, y): (Vec<f64>, Vec<f64>) = (
                q[0].iter().map(|c| c * s).collect(),
                q[1].iter().map(|c| c * s).collect(),
            );
            let got = fdtm_distance_for_measure(
                &scaled,
                &GraphTopology::Complete,
                &weights,
                &params,
                &x,
                &y,
            )?;
            let e = rel_err(got.distance, s.powf(params.beta + 1.0) * base.distance);
            if e > worst.0 {
                worst = (e, format!("repetition {rep}, s={s}"));
            }
        }
    }
    Ok(Check::at_most(
        "scaling covariance (relative)",
        worst.0,
        1e-9,
        worst.1,
    ))
}

/// FDTM over the direct edge weight between the queries; at most 1.
pub fn straight_segment_bound(seed: u64, clouds: usize) -> Result<Check> {
    let mut worst = (0.0, String::new());
    for c in 0..clouds as u64 {
        let mut rng = rng_for(seed, 8, c);
        let n = rng.random_range(20..=60);
        let cloud = PointCloud::from_points(&random_points(&mut rng, n, 1.0))?;
        let mu = make_empirical(&cloud)?;
        let params = DtmParams::default();
        let weights = WeightMode::subdivided_default(n);
        let r = match weights {
            WeightMode::SubdividedDtm { subdivisions } => subdivisions,
            _ => unreachable!(),
        };
        let topology = if c % 2 == 0 {
            GraphTopology::Complete
        } else {
            GraphTopology::knearest_default(n)
        };
        let q = random_points(&mut rng, 2, 1.5);
        let geo = fdtm_distance_for_measure(&mu, &topology, &weights, &params, &q[0], &q[1])?;
        let index = SpatialIndex::new(&mu);
        let direct = Dtm::new(&index, &params)?.segment_integral(&q[0], &q[1], r);
        let ratio = geo.distance / direct;
        if ratio > worst.0 {
            worst = (
                ratio,
                format!("cloud {c}: {} vs direct {direct}", geo.distance),
            );
        }
    }
    Ok(Check::at_most(
        "straight-segment upper bound (ratio)",
        worst.0,
        1.0,
        worst.1,
    ))
}

/// k-nearest distances over complete-graph distances on the same cloud; at
/// least 1 (reported as its reciprocal, at most 1).
pub fn graph_monotonicity(seed: u64, clouds: usize) -> Result<Check> {
    let mut worst = (0.0, String::new());
    for c in 0..clouds as u64 {
        let mut rng = rng_for(seed, 9, c);
        let n = 64;
        let cloud = sample_circle(n, rng.random())?;
        let params = DtmParams::default();
        let weights = WeightMode::subdivided_default(n);
        let full = build_graph(&cloud, &GraphTopology::Complete, &weights, &params)?;
        let sparse = build_graph(&cloud, &GraphTopology::KNearest { k: 4 }, &weights, &params)?;
        let sources: Vec<usize> = (0..n).collect();
        let (df, ds) = (
            all_pairs_sampled(&full, &sources)?,
            all_pairs_sampled(&sparse, &sources)?,
        );
        for i in 0..n {
            for j in 0..n {
                if ds[i][j] > 0.0 {
                    let ratio = df[i][j] / ds[i][j];
                    if ratio > worst.0 {
                        worst = (ratio, format!("cloud {c}, pair ({i}, {j})"));
                    }
                }
            }
        }
    }
    Ok(Check::at_most(
        "more edges never lengthen (complete / k-nearest)",
        worst.0,
        1.0 + 1e-12,
        worst.1,
    ))
}

/// The shifted-mass pair with `b = 1`, `ε = 0.05`.
pub fn lecam_spec() -> LeCamSpec {
    LeCamSpec {
        b: 1.0,
        alpha: 0.5,
        r: 0.25,
        epsilon: 0.05,
        m: 0.5,
        atoms_per_density: 20,
    }
}

/// Mass difference `2mε^b` and `D_ν(−x, x) < D_μ(−x, x)` on the fixture.
pub fn lecam_fixture() -> Result<Vec<Check>> {
    let spec = lecam_spec();
    let (mu, nu) = lecam_pair(&spec)?;
    let shifted = spec.m * spec.epsilon.powf(spec.b);
    let l1 = mu.mass_difference_l1(&nu);
    let params = DtmParams::new(spec.m, 2.0, 2.0)?;
    let weights = WeightMode::SubdividedDtm { subdivisions: 64 };
    let (x, y) = ([-1.0, 0.0], [1.0, 0.0]);
    let dmu = fdtm_distance_for_measure(&mu, &GraphTopology::Complete, &weights, &params, &x, &y)?;
    let dnu = fdtm_distance_for_measure(&nu, &GraphTopology::Complete, &weights, &params, &x, &y)?;
    let ratio = dnu.distance / dmu.distance;
    Ok(vec![
        Check::at_most(
            "shifted-mass pair: |l1 - 2m eps^b| / (2m eps^b)",
            (l1 - 2.0 * shifted).abs() / (2.0 * shifted),
            1.0 / spec.atoms_per_density as f64,
            format!("l1 = {l1}, 2m eps^b = {}", 2.0 * shifted),
        ),
        Check {
            name: "shifted-mass pair: D_nu / D_mu below 1".into(),
            measured: ratio,
            limit: 1.0,
            passed: ratio < 1.0,
            detail: format!("D_mu = {}, D_nu = {}", dmu.distance, dnu.distance),
        },
    ])
}
