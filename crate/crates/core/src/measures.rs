//! Point clouds, weighted discrete measures and the generators used by the
//! experiments (circle, ring with shortcut, two-measure lower-bound fixture).

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Relative tolerance on the total mass of a [`WeightedMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A list of `dim`-dimensional points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("cannot infer dimension of an empty point list"))?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Componentwise `(min, max)` corners. Empty clouds have no box.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut it = self.iter();
        let first = it.next()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in it {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    /// Largest pairwise distance (quadratic scan).
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(crate::euclidean(self.point(i), self.point(j)));
            }
        }
        best
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }
}

/// Finite point set with positive masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    cloud: PointCloud,
    masses: Vec<f64>,
}

impl WeightedMeasure {
    pub fn new(cloud: PointCloud, masses: Vec<f64>) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::invalid("a measure needs at least one atom"));
        }
        if masses.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "{} masses for {} points",
                masses.len(),
                cloud.len()
            )));
        }
        if let Some(bad) = masses.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!(
                "mass {bad} is not a positive finite number"
            )));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { cloud, masses })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
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

    /// True when every atom carries the same mass.
    pub fn is_uniform(&self) -> bool {
        let w0 = self.masses[0];
        self.masses.iter().all(|&w| w == w0)
    }

    /// Atoms with identical coordinates merged, in order of first appearance.
    pub fn merged(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        for (p, &w) in self.cloud.iter().zip(&self.masses) {
            match out.iter_mut().find(|(q, _)| q.as_slice() == p) {
                Some((_, acc)) => *acc += w,
                None => out.push((p.to_vec(), w)),
            }
        }
        out
    }

    /// `Σ_a |μ(a) − ν(a)|` over the union of both supports.
    pub fn mass_difference_l1(&self, other: &WeightedMeasure) -> f64 {
        let a = self.merged();
        let b = other.merged();
        let mut total = 0.0;
        for (p, w) in &a {
            let v = b.iter().find(|(q, _)| q == p).map_or(0.0, |(_, v)| *v);
            total += (w - v).abs();
        }
        for (q, v) in &b {
            if !a.iter().any(|(p, _)| p == q) {
                total += v;
            }
        }
        total
    }

    /// Total-variation distance, half the L1 mass difference.
    pub fn total_variation(&self, other: &WeightedMeasure) -> f64 {
        0.5 * self.mass_difference_l1(other)
    }
}

/// The `(m, p, β)` triple shared by DTM and FDTM computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtmParams {
    pub m: f64,
    pub p: f64,
    pub beta: f64,
}

impl DtmParams {
    pub fn new(m: f64, p: f64, beta: f64) -> Result<Self> {
        let params = Self { m, p, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::invalid(format!("m = {} is outside (0, 1]", self.m)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::invalid(format!(
                "p = {} must be a finite real >= 1",
                self.p
            )));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta = {} must be a finite real >= 1",
                self.beta
            )));
        }
        Ok(())
    }
}

impl Default for DtmParams {
    /// `m = 0.1, p = 2, β = 2`, the settings of the circle and ring studies.
    fn default() -> Self {
        Self {
            m: 0.1,
            p: 2.0,
            beta: 2.0,
        }
    }
}

/// Uniform measure over the cloud; duplicates stay separate atoms.
pub fn make_empirical(cloud: &PointCloud) -> Result<WeightedMeasure> {
    if cloud.is_empty() {
        return Err(Error::invalid("empirical measure of an empty cloud"));
    }
    let n = cloud.len();
    Ok(WeightedMeasure {
        cloud: cloud.clone(),
        masses: vec![1.0 / n as f64; n],
    })
}

/// `n` i.i.d. uniform points on the unit circle.
pub fn sample_circle(n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample_circle needs n >= 1"));
    }
    let mut rng = rng::stream(seed, 0);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let theta = rng.random::<f64>() * TAU;
        coords.push(theta.cos());
        coords.push(theta.sin());
    }
    PointCloud::new(2, coords)
}

/// Inner radius for which the hole's diameter is as long as the annulus area
/// is wide: `(2 r)² = π (R² − r²)`. A shortcut of `√n` points across the hole
/// then has the same typical spacing as the `n` ring points.
pub fn matched_inner_radius(outer: f64) -> f64 {
    outer * (PI / (4.0 + PI)).sqrt()
}

/// Parameters of an annulus sample, optionally with a shortcut across the hole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSpec {
    pub n: usize,
    pub inner: f64,
    pub outer: f64,
    /// Number of points moved onto the shortcut; `None` for the plain ring.
    pub shortcut: Option<usize>,
}

impl RingSpec {
    /// Plain ring with outer radius 1 and the spacing-matched inner radius.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            inner: matched_inner_radius(1.0),
            outer: 1.0,
            shortcut: None,
        }
    }

    /// Shortcut with `round(√n)` points.
    pub fn with_default_shortcut(mut self) -> Self {
        self.shortcut = Some(default_shortcut_count(self.n));
        self
    }

    /// Mean nearest-neighbour distance of a Poisson sample of the annulus.
    pub fn expected_spacing(&self) -> f64 {
        let area = PI * (self.outer * self.outer - self.inner * self.inner);
        0.5 * (area / self.n as f64).sqrt()
    }
}

pub fn default_shortcut_count(n: usize) -> usize {
    (n as f64).sqrt().round() as usize
}

/// Uniform annulus sample. With a shortcut, the last `shortcut` points are
/// replaced by evenly spaced, jittered points on the horizontal diameter
/// inside the hole; the remaining points are identical to the plain sample
/// drawn with the same seed.
pub fn sample_ring(spec: &RingSpec, seed: u64) -> Result<PointCloud> {
    let RingSpec {
        n,
        inner,
        outer,
        shortcut,
    } = *spec;
    if n == 0 {
        return Err(Error::invalid("sample_ring needs n >= 1"));
    }
    if !(inner > 0.0 && inner < outer && outer.is_finite()) {
        return Err(Error::invalid(format!(
            "ring radii must satisfy 0 < inner < outer, got {inner} and {outer}"
        )));
    }
    let count = shortcut.unwrap_or(0);
    if count > n {
        return Err(Error::invalid(format!(
            "shortcut of {count} points exceeds n = {n}"
        )));
    }

    let mut rng = rng::stream(seed, 0);
    let (r2_lo, r2_hi) = (inner * inner, outer * outer);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let radius = (r2_lo + (r2_hi - r2_lo) * rng.random::<f64>()).sqrt();
        let theta = rng.random::<f64>() * TAU;
        coords.push(radius * theta.cos());
        coords.push(radius * theta.sin());
    }

    if count > 0 {
        let step = 2.0 * inner / count as f64;
        // jitter box side: annulus NN spacing, capped so points stay well
        // inside the hole and near the diameter
        let jitter = spec
            .expected_spacing()
            .min(0.5 * step)
            .min((outer - inner) / 10.0);
        for k in 0..count {
            let i = n - count + k;
            let x = -inner + (k as f64 + 0.5) * step + jitter * (rng.random::<f64>() - 0.5);
            let y = jitter * (rng.random::<f64>() - 0.5);
            coords[2 * i] = x;
            coords[2 * i + 1] = y;
        }
    }
    PointCloud::new(2, coords)
}

/// Parameters of the two-measure construction with a small mass shift that
/// opens a shorter admissible path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeCamSpec {
    pub b: f64,
    pub alpha: f64,
    pub r: f64,
    pub epsilon: f64,
    pub m: f64,
    pub atoms_per_density: usize,
}

/// Discretised pair `(μ, ν)` in the plane, with `x = e₁`, `y = e₂`:
///
/// * `μ = mα δ_{−ry} + m(1−α) δ_{ry} + (1−m) ρ`, with `ρ` uniform on `[3ry, 4ry]`;
/// * `ν = μ − mε^b δ_{ry} + m λ`, with `λ` of density `b‖z − (r−ε)y‖^{b−1}` on
///   `[(r−ε)y, ry]` (total mass `ε^b`).
///
/// `ρ` becomes equally spaced equal-mass atoms at segment midpoints; `λ`
/// becomes equal-mass atoms at the midpoint quantiles of its distribution.
pub fn lecam_pair(spec: &LeCamSpec) -> Result<(WeightedMeasure, WeightedMeasure)> {
    let LeCamSpec {
        b,
        alpha,
        r,
        epsilon,
        m,
        atoms_per_density,
    } = *spec;
    if !(b >= 1.0 && b.is_finite()) {
        return Err(Error::invalid(format!("b = {b} must be >= 1")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} is outside (0, 1)")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("r = {r} must be positive")));
    }
    if !(epsilon > 0.0 && epsilon < (1.0 - alpha).powf(1.0 / b)) {
        return Err(Error::invalid(format!(
            "epsilon = {epsilon} is outside (0, (1 - alpha)^(1/b))"
        )));
    }
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::invalid(format!("m = {m} is outside (0, 1]")));
    }
    if atoms_per_density == 0 {
        return Err(Error::invalid("atoms_per_density must be >= 1"));
    }
    let a = atoms_per_density as f64;

    let mut mu_pts = vec![vec![0.0, -r], vec![0.0, r]];
    let mut mu_w = vec![m * alpha, m * (1.0 - alpha)];
    if m < 1.0 {
        for i in 0..atoms_per_density {
            mu_pts.push(vec![0.0, 3.0 * r + r * (i as f64 + 0.5) / a]);
            mu_w.push((1.0 - m) / a);
        }
    }

    let shifted = m * epsilon.powf(b);
    let mut nu_pts = mu_pts.clone();
    let mut nu_w = mu_w.clone();
    nu_w[1] -= shifted;
    for i in 0..atoms_per_density {
        let q = (i as f64 + 0.5) / a;
        let offset = epsilon * q.powf(1.0 / b);
        nu_pts.push(vec![0.0, r - epsilon + offset]);
        nu_w.push(shifted / a);
    }

    let mu = WeightedMeasure::new(PointCloud::from_points(&mu_pts)?, mu_w)?;
    let nu = WeightedMeasure::new(PointCloud::from_points(&nu_pts)?, nu_w)?;
    Ok((mu, nu))
}

/// Push-forward of `mu` by `x ↦ s x`.
pub fn scale_measure(mu: &WeightedMeasure, s: f64) -> Result<WeightedMeasure> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("scale factor {s} must be positive")));
    }
    Ok(WeightedMeasure {
        cloud: mu.cloud.scaled(s),
        masses: mu.masses.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(p: &[f64]) -> f64 {
        p.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    #[test]
    fn empirical_masses_are_uniform() {
        let cloud = PointCloud::from_points(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let mu = make_empirical(&cloud).unwrap();
        assert!(mu.masses().iter().all(|&w| w == 0.25));

        let single = PointCloud::from_points(&[[5.0, 5.0]]).unwrap();
        assert_eq!(make_empirical(&single).unwrap().masses(), &[1.0]);
    }

    #[test]
    fn empirical_rejects_empty_cloud() {
        let empty = PointCloud::new(2, vec![]).unwrap();
        assert!(matches!(
            make_empirical(&empty),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn measure_constructor_checks_masses() {
        let cloud = PointCloud::from_points(&[[0.0], [1.0]]).unwrap();
        assert!(WeightedMeasure::new(cloud.clone(), vec![0.5, 0.6]).is_err());
        assert!(WeightedMeasure::new(cloud.clone(), vec![1.0, 0.0]).is_err());
        assert!(WeightedMeasure::new(cloud.clone(), vec![1.0]).is_err());
        assert!(WeightedMeasure::new(cloud, vec![0.3, 0.7]).is_ok());
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let pts = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(
            PointCloud::from_points(&pts),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_ranges() {
        assert!(DtmParams::new(0.0, 2.0, 2.0).is_err());
        assert!(DtmParams::new(1.0, 1.0, 1.0).is_ok());
        assert!(DtmParams::new(1.1, 2.0, 2.0).is_err());
        assert!(DtmParams::new(0.5, 0.5, 2.0).is_err());
        assert!(DtmParams::new(0.5, 2.0, 0.9).is_err());
    }

    #[test]
    fn circle_points_have_unit_norm_and_are_seeded() {
        let a = sample_circle(1000, 3).unwrap();
        assert_eq!(a.len(), 1000);
        for p in a.iter() {
            assert!((norm(p) - 1.0).abs() < 1e-12);
        }
        assert_eq!(a, sample_circle(1000, 3).unwrap());
        assert_ne!(a, sample_circle(1000, 4).unwrap());
        assert!(sample_circle(0, 3).is_err());
    }

    #[test]
    fn circle_angles_pass_ks_test() {
        let cloud = sample_circle(10_000, 11).unwrap();
        let mut u: Vec<f64> = cloud
            .iter()
            .map(|p| p[1].atan2(p[0]).rem_euclid(TAU) / TAU)
            .collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS statistic {ks}");
    }

    #[test]
    fn ring_points_lie_in_annulus() {
        let spec = RingSpec::new(1024);
        let cloud = sample_ring(&spec, 5).unwrap();
        for p in cloud.iter() {
            let r = norm(p);
            assert!(r >= spec.inner - 1e-12 && r <= spec.outer + 1e-12);
        }
    }

    #[test]
    fn ring_shortcut_has_round_sqrt_n_points_in_hole() {
        let spec = RingSpec::new(1024).with_default_shortcut();
        assert_eq!(spec.shortcut, Some(32));
        let cloud = sample_ring(&spec, 5).unwrap();
        let band = (spec.outer - spec.inner) / 10.0;
        let on_shortcut = cloud
            .iter()
            .filter(|p| norm(p) < spec.inner && p[1].abs() <= band)
            .count();
        assert_eq!(on_shortcut, 32);

        // paired sample: everything but the last 32 points is shared
        let plain = sample_ring(&RingSpec::new(1024), 5).unwrap();
        for i in 0..1024 - 32 {
            assert_eq!(plain.point(i), cloud.point(i));
        }
        let mu = make_empirical(&plain).unwrap();
        let nu = make_empirical(&cloud).unwrap();
        assert!((mu.total_variation(&nu) - 32.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn ring_rejects_bad_radii() {
        let mut spec = RingSpec::new(10);
        spec.inner = 2.0;
        assert!(sample_ring(&spec, 0).is_err());
        spec.inner = 0.0;
        assert!(sample_ring(&spec, 0).is_err());
    }

    fn lecam_spec() -> LeCamSpec {
        LeCamSpec {
            b: 1.0,
            alpha: 0.5,
            r: 0.25,
            epsilon: 0.05,
            m: 0.5,
            atoms_per_density: 20,
        }
    }

    #[test]
    fn lecam_pair_masses_and_shift() {
        let spec = lecam_spec();
        let (mu, nu) = lecam_pair(&spec).unwrap();
        for w in [mu.masses(), nu.masses()] {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let shifted = spec.m * spec.epsilon.powf(spec.b);
        let l1 = mu.mass_difference_l1(&nu);
        assert!((l1 - 2.0 * shifted).abs() <= 2.0 * shifted / spec.atoms_per_density as f64);
        assert!((mu.total_variation(&nu) - shifted).abs() <= shifted / 20.0);

        let start = [0.0, spec.r - spec.epsilon];
        let closest = nu
            .cloud()
            .iter()
            .map(|p| crate::euclidean(p, &start))
            .fold(f64::INFINITY, f64::min);
        assert!(closest <= spec.epsilon / spec.atoms_per_density as f64);
    }

    #[test]
    fn lecam_pair_validates_ranges() {
        let mut spec = lecam_spec();
        spec.epsilon = 0.6;
        assert!(lecam_pair(&spec).is_err());
        spec = lecam_spec();
        spec.alpha = 1.0;
        assert!(lecam_pair(&spec).is_err());
        spec = lecam_spec();
        spec.r = -1.0;
        assert!(lecam_pair(&spec).is_err());
    }

    #[test]
    fn scaling_multiplies_points() {
        let mu = make_empirical(&sample_circle(50, 1).unwrap()).unwrap();
        assert_eq!(scale_measure(&mu, 1.0).unwrap(), mu);
        let doubled = scale_measure(&mu, 2.0).unwrap();
        for p in doubled.cloud().iter() {
            assert!((norm(p) - 2.0).abs() < 1e-12);
        }
        assert_eq!(doubled.masses(), mu.masses());
        assert!(scale_measure(&mu, 0.0).is_err());
        assert!(scale_measure(&mu, -1.0).is_err());
    }
}
