//! Desk-scale versions of the circle, ring and geodesic studies.
//!
//! Every run is a pure function of its [`ExperimentConfig`]: repetition `i`
//! at sample size `n` draws its cloud from the seed
//! `stream_id([seed, n, i])`, repetitions run in parallel, and results are
//! assembled in order. CSV files start with `#` metadata lines.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtm::Dtm;
use crate::error::{Error, Result};
use crate::graph::{GraphTopology, WeightMode};
use crate::io::{fmt_f64, fmt_row, write_text};
use crate::measures::{
    make_empirical, sample_circle, sample_ring, DtmParams, PointCloud, RingSpec,
};
use crate::oracles::circle_geodesic;
use crate::paths::{fdtm_distance, GeodesicResult};
use crate::rng::stream_id;
use crate::spatial::SpatialIndex;

/// Quadrature points for the analytic circle reference.
pub const REFERENCE_QUADRATURE: usize = 2000;

pub const VERSION: &str = concat!("fdtm-core v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CircleConvergence,
    RingOffset,
    GeodesicDump,
}

/// Inputs of one experiment run.
///
/// `topology` and `weights` may be left unset, in which case they follow the
/// sample size: `Complete` on the circle, `Yao(max(6, ⌈log₂ n⌉))` on the
/// ring, and `⌈log₂ n⌉` subdivisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub params: DtmParams,
    #[serde(default)]
    pub topology: Option<GraphTopology>,
    #[serde(default)]
    pub weights: Option<WeightMode>,
    pub fermat_alpha: f64,
    pub output_path: PathBuf,
    /// Parameter sets for geodesic dumps; empty means `params` alone.
    #[serde(default)]
    pub sweep: Vec<DtmParams>,
    /// Side of the DTM grid written next to each geodesic.
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
}

fn default_grid_resolution() -> usize {
    64
}

/// `128, 256, …, 4096`.
pub fn default_sample_sizes() -> Vec<usize> {
    (7..=12).map(|k| 1usize << k).collect()
}

/// The six `(m, β)` combinations of the geodesic figure, with `p = 2`.
pub fn geodesic_sweep() -> Vec<DtmParams> {
    let mut out = Vec::new();
    for m in [0.2, 0.1, 0.05] {
        for beta in [1.0, 2.0] {
            out.push(DtmParams { m, p: 2.0, beta });
        }
    }
    out
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        let (sample_sizes, output, sweep) = match experiment {
            ExperimentKind::CircleConvergence => (default_sample_sizes(), "circle.csv", Vec::new()),
            ExperimentKind::RingOffset => {
                (vec![256, 512, 1024, 2048, 4096], "ring.csv", Vec::new())
            }
            ExperimentKind::GeodesicDump => (vec![4096], "geodesic.csv", geodesic_sweep()),
        };
        Self {
            experiment,
            sample_sizes,
            repetitions: 50,
            seed: 7,
            params: DtmParams::default(),
            topology: None,
            weights: None,
            fermat_alpha: 1.1,
            output_path: PathBuf::from(output),
            sweep,
            grid_resolution: default_grid_resolution(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::invalid("sample_sizes must not be empty"));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sample_sizes must be strictly increasing"));
        }
        if self.sample_sizes[0] < 2 {
            return Err(Error::invalid("sample sizes must be at least 2"));
        }
        self.params.validate()?;
        for p in &self.sweep {
            p.validate()?;
        }
        if !(self.fermat_alpha > 1.0 && self.fermat_alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "fermat_alpha = {} must be a finite real > 1",
                self.fermat_alpha
            )));
        }
        if let Some(t) = &self.topology {
            t.validate(2)?;
        }
        if let Some(w) = &self.weights {
            w.validate()?;
            if !w.uses_dtm() {
                return Err(Error::invalid(
                    "experiment weights must be a DTM weight mode",
                ));
            }
        }
        if self.grid_resolution < 2 {
            return Err(Error::invalid("grid_resolution must be at least 2"));
        }
        Ok(())
    }

    pub fn topology_for(&self, n: usize) -> GraphTopology {
        self.topology.unwrap_or(match self.experiment {
            ExperimentKind::RingOffset => GraphTopology::yao_default(n),
            _ => GraphTopology::Complete,
        })
    }

    pub fn weights_for(&self, n: usize) -> WeightMode {
        self.weights.unwrap_or(WeightMode::subdivided_default(n))
    }

    fn rep_seed(&self, n: usize, rep: usize) -> u64 {
        stream_id(&[self.seed, n as u64, rep as u64])
    }

    fn header(&self, extra: &[(&str, String)]) -> String {
        let config = serde_json::to_string(self).expect("config serializes");
        let mut out = format!(
            "# config: {config}\n# version: {VERSION}\n# seed: {}\n",
            self.seed
        );
        for (k, v) in extra {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out
    }
}

/// Mean and standard error of the mean (0 for a single value).
fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn check_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    config.validate()?;
    if config.experiment != kind {
        return Err(Error::invalid(format!(
            "config is for {:?}, not {kind:?}",
            config.experiment
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleRow {
    pub n: usize,
    pub mean_abs_error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleConvergence {
    pub rows: Vec<CircleRow>,
    /// Analytic FDTM between the antipodal query points.
    pub reference: f64,
    /// Least-squares slope of log error against log n.
    pub slope: f64,
}

impl CircleConvergence {
    /// Whether each mean error is at most the previous one plus `k`
    /// combined standard errors.
    pub fn nonincreasing_within(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let slack = k * w[0].std_error.hypot(w[1].std_error);
            w[1].mean_abs_error <= w[0].mean_abs_error + slack
        })
    }

    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = config.header(&[
            (
                "metric",
                "mean absolute error of the empirical FDTM between (1,0) and (-1,0) \
                 against the equal-chord analytic value"
                    .to_string(),
            ),
            ("reference", fmt_f64(self.reference)),
            ("slope", fmt_f64(self.slope)),
        ]);
        out.push_str("n,mean_abs_error,std_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{}\n",
                r.n,
                fmt_row(&[r.mean_abs_error, r.std_error])
            ));
        }
        out
    }
}

/// FDTM between antipodal points of the unit circle against the analytic
/// equal-chord value, for each sample size.
pub fn run_circle_convergence(config: &ExperimentConfig) -> Result<CircleConvergence> {
    check_kind(config, ExperimentKind::CircleConvergence)?;
    let reference = circle_geodesic(PI, &config.params, REFERENCE_QUADRATURE)?.distance;
    let (x, y) = ([1.0, 0.0], [-1.0, 0.0]);
    let mut rows = Vec::with_capacity(config.sample_sizes.len());
    for &n in &config.sample_sizes {
        let (topology, weights) = (config.topology_for(n), config.weights_for(n));
        let errors = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                let cloud = sample_circle(n, config.rep_seed(n, rep))?;
                let geo = fdtm_distance(&cloud, &topology, &weights, &config.params, &x, &y)?;
                Ok((geo.distance - reference).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean_abs_error, std_error) = mean_and_stderr(&errors);
        rows.push(CircleRow {
            n,
            mean_abs_error,
            std_error,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_abs_error).collect();
    let slope = if rows.len() >= 2 {
        log_log_slope(&ns, &errs)
    } else {
        f64::NAN
    };
    Ok(CircleConvergence {
        rows,
        reference,
        slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingRow {
    pub n: usize,
    pub fdtm_rel_offset: f64,
    pub fermat_rel_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingOffset {
    pub rows: Vec<RingRow>,
}

impl RingOffset {
    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let (x, y) = ring_queries();
        let mut out = config.header(&[
            (
                "metric",
                "mean over repetitions of |l - l'| / l, l without and l' with the shortcut"
                    .to_string(),
            ),
            ("queries", format!("({}) ({})", fmt_row(&x), fmt_row(&y))),
        ]);
        out.push_str("n,fdtm_rel_offset,fermat_rel_offset\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{}\n",
                r.n,
                fmt_row(&[r.fdtm_rel_offset, r.fermat_rel_offset])
            ));
        }
        out
    }
}

/// Points at mid-radius on either end of the shortcut's diameter.
pub fn ring_queries() -> ([f64; 2], [f64; 2]) {
    let spec = RingSpec::new(1);
    let mid = 0.5 * (spec.inner + spec.outer);
    ([-mid, 0.0], [mid, 0.0])
}

/// Relative change of the FDTM and of the sample Fermat distance when
/// `round(√n)` points are moved onto a shortcut across the ring's hole.
pub fn run_ring_offset(config: &ExperimentConfig) -> Result<RingOffset> {
    check_kind(config, ExperimentKind::RingOffset)?;
    let (x, y) = ring_queries();
    let fermat = WeightMode::SampleFermat {
        alpha: config.fermat_alpha,
    };
    let mut rows = Vec::with_capacity(config.sample_sizes.len());
    for &n in &config.sample_sizes {
        let (topology, weights) = (config.topology_for(n), config.weights_for(n));
        let offsets = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                let seed = config.rep_seed(n, rep);
                let spec = RingSpec::new(n);
                let plain = sample_ring(&spec, seed)?;
                let cut = sample_ring(&spec.with_default_shortcut(), seed)?;
                let offset = |mode: &WeightMode| -> Result<f64> {
                    let l =
                        fdtm_distance(&plain, &topology, mode, &config.params, &x, &y)?.distance;
                    let l2 = fdtm_distance(&cut, &topology, mode, &config.params, &x, &y)?.distance;
                    Ok((l - l2).abs() / l)
                };
                Ok((offset(&weights)?, offset(&fermat)?))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let k = offsets.len() as f64;
        rows.push(RingRow {
            n,
            fdtm_rel_offset: offsets.iter().map(|o| o.0).sum::<f64>() / k,
            fermat_rel_offset: offsets.iter().map(|o| o.1).sum::<f64>() / k,
        });
    }
    Ok(RingOffset { rows })
}

/// DTM values on a regular `res × res` grid, row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmGrid {
    pub res: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub values: Vec<f64>,
}

impl DtmGrid {
    pub fn new(dtm: &Dtm<'_>, lo: [f64; 2], hi: [f64; 2], res: usize) -> Self {
        let coord = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (res - 1) as f64;
        let values = (0..res * res)
            .into_par_iter()
            .map(|c| dtm.value(&[coord(0, c % res), coord(1, c / res)]))
            .collect();
        Self {
            res,
            lo,
            hi,
            values,
        }
    }

    pub fn point(&self, c: usize) -> [f64; 2] {
        let t = |k: usize, i: usize| {
            self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (self.res - 1) as f64
        };
        [t(0, c % self.res), t(1, c / self.res)]
    }

    /// Rows `x,y,dtm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (c, v) in self.values.iter().enumerate() {
            let [x, y] = self.point(c);
            out.push_str(&fmt_row(&[x, y, *v]));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicDump {
    pub params: DtmParams,
    pub geodesic: GeodesicResult,
    pub grid: DtmGrid,
}

/// Largest distance from a polyline to the circle of radius `radius`
/// centred at the origin.
pub fn max_distance_to_circle(polyline: &[Vec<f64>], radius: f64) -> f64 {
    let mut worst = 0.0f64;
    for p in polyline {
        worst = worst.max((p[0].hypot(p[1]) - radius).abs());
    }
    for w in polyline.windows(2) {
        // closest point of the segment to the origin
        let (a, b) = (&w[0], &w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let dd = d[0] * d[0] + d[1] * d[1];
        let t = if dd > 0.0 {
            (-(a[0] * d[0] + a[1] * d[1]) / dd).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let near = (a[0] + t * d[0]).hypot(a[1] + t * d[1]);
        worst = worst.max(radius - near);
    }
    worst
}

/// Geodesics between `x` and `y` on one circle sample of size
/// `sample_sizes[0]`, for every parameter set of the sweep, with the DTM
/// tabulated over the cloud's bounding box.
pub fn dump_geodesic(config: &ExperimentConfig, x: &[f64], y: &[f64]) -> Result<Vec<GeodesicDump>> {
    check_kind(config, ExperimentKind::GeodesicDump)?;
    if x.len() != 2 || y.len() != 2 {
        return Err(Error::invalid(
            "geodesic dumps are planar; queries need 2 coordinates",
        ));
    }
    let n = config.sample_sizes[0];
    let cloud = sample_circle(n, config.rep_seed(n, 0))?;
    geodesics_on(config, &cloud, x, y)
}

pub(crate) fn geodesics_on(
    config: &ExperimentConfig,
    cloud: &PointCloud,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<GeodesicDump>> {
    let n = cloud.len();
    let (topology, weights) = (config.topology_for(n), config.weights_for(n));
    let (lo, hi) = cloud.bounding_box().expect("nonempty cloud");
    let measure = make_empirical(cloud)?;
    let index = SpatialIndex::new(&measure);
    sweep_of(config)
        .into_iter()
        .map(|params| {
            let geodesic = fdtm_distance(cloud, &topology, &weights, &params, x, y)?;
            let dtm = Dtm::new(&index, &params)?;
            let grid = DtmGrid::new(&dtm, [lo[0], lo[1]], [hi[0], hi[1]], config.grid_resolution);
            Ok(GeodesicDump {
                params,
                geodesic,
                grid,
            })
        })
        .collect()
}

fn sweep_of(config: &ExperimentConfig) -> Vec<DtmParams> {
    if config.sweep.is_empty() {
        vec![config.params]
    } else {
        config.sweep.clone()
    }
}

/// Output files of one dump: the geodesic and its DTM grid.
pub fn dump_paths(config: &ExperimentConfig, params: &DtmParams) -> (PathBuf, PathBuf) {
    let base = &config.output_path;
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("geodesic");
    let dir = base.parent().unwrap_or(Path::new(""));
    let tag = if config.sweep.len() > 1 {
        format!("{stem}_m{}_beta{}", params.m, params.beta)
    } else {
        stem.to_string()
    };
    (
        dir.join(format!("{tag}.csv")),
        dir.join(format!("{tag}_dtm.csv")),
    )
}

/// Runs the configured experiment and writes its CSV files, returning their
/// paths.
pub fn run(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::CircleConvergence => {
            let result = run_circle_convergence(config)?;
            write_text(&config.output_path, &result.to_csv(config))?;
            Ok(vec![config.output_path.clone()])
        }
        ExperimentKind::RingOffset => {
            let result = run_ring_offset(config)?;
            write_text(&config.output_path, &result.to_csv(config))?;
            Ok(vec![config.output_path.clone()])
        }
        ExperimentKind::GeodesicDump => {
            let (x, y) = ([1.0, 0.0], [-1.0, 0.0]);
            let mut written = Vec::new();
            for dump in dump_geodesic(config, &x, &y)? {
                let (geo_path, grid_path) = dump_paths(config, &dump.params);
                let params = serde_json::to_string(&dump.params).expect("params serialize");
                let mut geo = config.header(&[("params", params.clone())]);
                geo.push_str(&crate::io::geodesic_to_csv(&dump.geodesic));
                write_text(&geo_path, &geo)?;
                let mut grid = config.header(&[
                    ("params", params),
                    ("grid", format!("{0} x {0}", dump.grid.res)),
                ]);
                grid.push_str(&dump.grid.to_csv());
                write_text(&grid_path, &grid)?;
                written.push(geo_path);
                written.push(grid_path);
            }
            Ok(written)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.sample_sizes = vec![64, 128];
        c.repetitions = 2;
        c
    }

    #[test]
    fn config_validation() {
        let mut c = small(ExperimentKind::CircleConvergence);
        assert!(c.validate().is_ok());
        c.repetitions = 0;
        assert!(c.validate().is_err());
        let mut c = small(ExperimentKind::CircleConvergence);
        c.sample_sizes = vec![128, 64];
        assert!(c.validate().is_err());
        c.sample_sizes = vec![];
        assert!(c.validate().is_err());
        let mut c = small(ExperimentKind::RingOffset);
        c.fermat_alpha = 1.0;
        assert!(c.validate().is_err());
        let mut c = small(ExperimentKind::RingOffset);
        c.weights = Some(WeightMode::SampleFermat { alpha: 2.0 });
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut c = ExperimentConfig::new(ExperimentKind::RingOffset);
        c.topology = Some(GraphTopology::Yao { cones: 9 });
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"experiment":"circle_convergence","bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn defaults_follow_sample_size() {
        let c = ExperimentConfig::new(ExperimentKind::RingOffset);
        assert_eq!(c.topology_for(4096), GraphTopology::Yao { cones: 12 });
        assert_eq!(c.topology_for(64), GraphTopology::Yao { cones: 6 });
        assert_eq!(
            c.weights_for(1024),
            WeightMode::SubdividedDtm { subdivisions: 10 }
        );
        let c = ExperimentConfig::new(ExperimentKind::CircleConvergence);
        assert_eq!(c.topology_for(4096), GraphTopology::Complete);
        assert_eq!(c.sample_sizes, vec![128, 256, 512, 1024, 2048, 4096]);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_and_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        assert_eq!(mean_and_stderr(&[5.0]), (5.0, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        assert!(run_ring_offset(&small(ExperimentKind::CircleConvergence)).is_err());
        assert!(run_circle_convergence(&small(ExperimentKind::RingOffset)).is_err());
    }

    #[test]
    fn circle_distance_to_polyline() {
        let line = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        assert!((max_distance_to_circle(&line, 1.0) - 1.0).abs() < 1e-15);
        let chord = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((max_distance_to_circle(&chord, 1.0) - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn dump_paths_tag_sweeps() {
        let mut c = ExperimentConfig::new(ExperimentKind::GeodesicDump);
        c.output_path = PathBuf::from("out/geo.csv");
        let (g, d) = dump_paths(
            &c,
            &DtmParams {
                m: 0.05,
                p: 2.0,
                beta: 1.0,
            },
        );
        assert_eq!(g, PathBuf::from("out/geo_m0.05_beta1.csv"));
        assert_eq!(d, PathBuf::from("out/geo_m0.05_beta1_dtm.csv"));
        c.sweep.clear();
        assert_eq!(dump_paths(&c, &c.params).0, PathBuf::from("out/geo.csv"));
    }

    #[test]
    fn grid_has_requested_shape() {
        let cloud = sample_circle(50, 1).unwrap();
        let mu = make_empirical(&cloud).unwrap();
        let idx = SpatialIndex::new(&mu);
        let dtm = Dtm::new(&idx, &DtmParams::default()).unwrap();
        let g = DtmGrid::new(&dtm, [-1.0, -1.0], [1.0, 1.0], 7);
        assert_eq!(g.values.len(), 49);
        assert_eq!(g.to_csv().lines().count(), 49);
        assert_eq!(g.point(0), [-1.0, -1.0]);
        assert_eq!(g.point(48), [1.0, 1.0]);
    }
}
