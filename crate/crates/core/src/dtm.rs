//! Exact distance-to-measure for discrete measures.
//!
//! With atoms sorted by distance `r_1 ≤ r_2 ≤ …`, masses `w_j` and cumulative
//! masses `W_j`, the pseudo-DTM `δ_u` equals `r_j` on `[W_{j−1}, W_j)`, so
//!
//! ```text
//! d(x)^p = (1/m) Σ_j c_j r_j^p,   c_j = clamp(min(W_j, m) − W_{j−1}, 0, w_j)
//! ```
//!
//! For uniform masses `1/n` this is the usual `k = ⌊mn⌋` nearest-neighbour
//! formula with the fractional `(mn − k)/n` weight on neighbour `k + 1`.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::measures::DtmParams;
use crate::spatial::{Neighbor, SpatialIndex};

thread_local! {
    static SCRATCH: RefCell<(BinaryHeap<Neighbor>, Vec<Neighbor>, Vec<u128>)> =
        const { RefCell::new((BinaryHeap::new(), Vec::new(), Vec::new())) };
}

/// DTM evaluator bound to an index and a parameter triple.
#[derive(Debug, Clone, Copy)]
pub struct Dtm<'a> {
    index: &'a SpatialIndex,
    params: DtmParams,
    k: usize,
    uniform: Option<usize>,
}

/// Mass allocation behind a DTM value when `p = 2`:
/// `d(z)² ≤ ‖z‖² − 2 z·barycenter + second_moment` for every `z`,
/// with equality at the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QuadraticMajorant {
    pub d_sq: f64,
    pub barycenter: Vec<f64>,
    pub second_moment: f64,
}

/// Outcome of walking the sorted atoms until mass `m` is reached.
struct Walk<T> {
    value: T,
    // distance of the last atom used: every ball of at least this radius
    // around the query holds mass m
    reach: f64,
    complete: bool,
}

impl<'a> Dtm<'a> {
    pub fn new(index: &'a SpatialIndex, params: &DtmParams) -> Result<Self> {
        params.validate()?;
        if index.is_empty() {
            return Err(Error::invalid("DTM of an empty measure"));
        }
        Ok(Self {
            index,
            params: *params,
            k: index.count_for_mass(params.m),
            uniform: index.uniform_count(params.m),
        })
    }

    pub fn index(&self) -> &'a SpatialIndex {
        self.index
    }

    pub fn params(&self) -> &DtmParams {
        &self.params
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.index.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.index.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Runs `walk` over the nearest atoms sorted by `(distance, index)`.
    ///
    /// With a `hint` (a radius believed to hold mass `m`), only atoms inside
    /// it are gathered; if they turn out not to carry mass `m` the full k-NN
    /// search runs instead. Both routes hand `walk` the same prefix, so the
    /// result does not depend on the hint.
    ///
    /// Equal masses are handled without sorting: see [`Dtm::with_uniform`].
    fn with_neighbors<T>(
        &self,
        x: &[f64],
        hint: Option<f64>,
        walk: impl Fn(&[Neighbor]) -> Walk<T>,
    ) -> Walk<T> {
        if let Some(used) = self.uniform {
            return self.with_uniform(x, hint, used, walk);
        }
        SCRATCH.with(|cell| {
            let mut guard = cell.borrow_mut();
            let (heap, sorted, keys) = &mut *guard;
            if let Some(r) = hint.filter(|r| r.is_finite()) {
                let r = r * (1.0 + 1e-9) + 1e-300;
                self.index.within_into(x, r * r, sorted);
                sort_neighbors(sorted, keys, self.k);
                let out = walk(sorted);
                if out.complete || sorted.len() == self.k {
                    return out;
                }
            }
            self.index.knn_into(x, self.k, heap);
            sorted.clear();
            sorted.extend(heap.drain());
            sort_neighbors(sorted, keys, self.k);
            walk(sorted)
        })
    }

    /// With equal masses the walk assigns the same coefficients whatever the
    /// order of the first `used - 1` atoms, so `walk` gets those in the index's
    /// fixed traversal order followed by the `used`-th nearest atom.
    fn with_uniform<T>(
        &self,
        x: &[f64],
        hint: Option<f64>,
        used: usize,
        walk: impl Fn(&[Neighbor]) -> Walk<T>,
    ) -> Walk<T> {
        SCRATCH.with(|cell| {
            let mut guard = cell.borrow_mut();
            let (heap, nbrs, keys) = &mut *guard;
            let mut radius = hint.filter(|r| r.is_finite());
            loop {
                if let Some(r) = radius {
                    let r = r * (1.0 + 1e-9) + 1e-300;
                    self.index.within_into(x, r * r, nbrs);
                    if nbrs.len() >= used {
                        keys.clear();
                        keys.extend(nbrs.iter().map(pack));
                        let (_, &mut last, _) = keys.select_nth_unstable(used - 1);
                        nbrs.retain(|nb| pack(nb) < last);
                        nbrs.push(unpack(last));
                        return walk(nbrs);
                    }
                }
                self.index.knn_into(x, used, heap);
                radius = heap.peek().map(|nb| nb.dist());
            }
        })
    }
    fn walk_pow_p(&self, x: &[f64], hint: Option<f64>) -> Walk<f64> {
        let DtmParams { m, p, .. } = self.params;
        let masses = self.index.masses();
        self.with_neighbors(x, hint, |nbrs| {
            let mut acc = 0.0;
            let mut cum = 0.0;
            let mut reach = 0.0;
            for nb in nbrs {
                let w = masses[nb.index];
                let c = (f64::min(cum + w, m) - cum).clamp(0.0, w);
                if c > 0.0 {
                    acc += c * radius_pow(nb.dist_sq, p);
                }
                cum += w;
                reach = nb.dist_sq;
                if cum >= m {
                    break;
                }
            }
            Walk {
                value: acc / m,
                reach: reach.sqrt(),
                complete: cum >= m,
            }
        })
    }

    /// `d(x)^p`, the mass-weighted mean of `r^p` over the first `m` of mass.
    pub fn pow_p(&self, x: &[f64]) -> f64 {
        self.walk_pow_p(x, None).value
    }

    /// `d(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.root(self.pow_p(x))
    }

    /// `d(x)` and the reach radius (see [`Dtm::powered_hinted`]).
    pub(crate) fn value_hinted(&self, x: &[f64], hint: Option<f64>) -> (f64, f64) {
        let w = self.walk_pow_p(x, hint);
        (self.root(w.value), w.reach)
    }

    #[inline]
    fn root(&self, v: f64) -> f64 {
        let p = self.params.p;
        if p == 1.0 {
            v
        } else if p == 2.0 {
            v.sqrt()
        } else {
            v.powf(1.0 / p)
        }
    }

    #[inline]
    fn pow_to_powered(&self, v: f64) -> f64 {
        let DtmParams { p, beta, .. } = self.params;
        if beta == p {
            v
        } else if p == 2.0 && beta == 1.0 {
            v.sqrt()
        } else {
            v.powf(beta / p)
        }
    }

    /// `d(x)^β`, the integrand of FDTM lengths.
    pub fn powered(&self, x: &[f64]) -> f64 {
        self.pow_to_powered(self.pow_p(x))
    }

    /// `d(x)^β` and the radius of the ball around `x` that carries the mass.
    /// Moving the query by `s` changes that radius by at most `s`, which makes
    /// it a valid `hint` for nearby points.
    pub(crate) fn powered_hinted(&self, x: &[f64], hint: Option<f64>) -> (f64, f64) {
        let w = self.walk_pow_p(x, hint);
        (self.pow_to_powered(w.value), w.reach)
    }

    /// Midpoint-rule FDTM length of the segment `[x, y]` with `r` cells.
    ///
    /// The endpoints are put in lexicographic order first, so the value is
    /// bit-for-bit symmetric in `x` and `y`.
    pub fn segment_integral(&self, x: &[f64], y: &[f64], r: usize) -> f64 {
        let seg = Segment::new(x, y, r);
        if seg.len == 0.0 {
            return 0.0;
        }
        let mut z = vec![0.0; x.len()];
        let mut sum = 0.0;
        let mut hint = None;
        for t in 0..r {
            seg.midpoint(t, &mut z);
            let (v, reach) = self.powered_hinted(&z, hint);
            sum += v;
            hint = Some(reach + seg.step);
        }
        seg.finish(sum)
    }

    /// Allocation data at `x` for `p = 2` (see [`QuadraticMajorant`]), and
    /// the reach radius usable as a hint.
    pub(crate) fn quadratic_majorant(
        &self,
        x: &[f64],
        hint: Option<f64>,
    ) -> (QuadraticMajorant, f64) {
        debug_assert_eq!(self.params.p, 2.0);
        let m = self.params.m;
        let cloud = self.index.cloud();
        let masses = self.index.masses();
        let walk = self.with_neighbors(x, hint, |nbrs| {
            let mut acc = 0.0;
            let mut cum = 0.0;
            let mut reach = 0.0;
            let mut bary = vec![0.0; x.len()];
            let mut second = 0.0;
            for nb in nbrs {
                let w = masses[nb.index];
                let c = (f64::min(cum + w, m) - cum).clamp(0.0, w);
                if c > 0.0 {
                    acc += c * nb.dist_sq;
                    let q = cloud.point(nb.index);
                    for (b, &qk) in bary.iter_mut().zip(q) {
                        *b += c * qk;
                    }
                    second += c * q.iter().map(|v| v * v).sum::<f64>();
                }
                cum += w;
                reach = nb.dist_sq;
                if cum >= m {
                    break;
                }
            }
            bary.iter_mut().for_each(|b| *b /= m);
            Walk {
                value: QuadraticMajorant {
                    d_sq: acc / m,
                    barycenter: bary,
                    second_moment: second / m,
                },
                reach: reach.sqrt(),
                complete: cum >= m,
            }
        });
        (walk.value, walk.reach)
    }
}

/// Midpoint layout of a segment, endpoints in lexicographic order.
pub(crate) struct Segment<'s> {
    a: &'s [f64],
    b: &'s [f64],
    r: usize,
    pub len: f64,
    /// Distance between consecutive midpoints.
    pub step: f64,
}

impl<'s> Segment<'s> {
    pub(crate) fn new(x: &'s [f64], y: &'s [f64], r: usize) -> Self {
        let (a, b) = if lex_le(x, y) { (x, y) } else { (y, x) };
        let len = crate::euclidean(a, b);
        Self {
            a,
            b,
            r,
            len,
            step: len / r as f64,
        }
    }

    #[inline]
    pub(crate) fn midpoint(&self, t: usize, z: &mut [f64]) {
        let s = (t as f64 + 0.5) / self.r as f64;
        for k in 0..self.a.len() {
            z[k] = self.a[k] + s * (self.b[k] - self.a[k]);
        }
    }

    /// Weight from the sum of the integrand over all midpoints in order.
    #[inline]
    pub(crate) fn finish(&self, sum: f64) -> f64 {
        self.len / self.r as f64 * sum
    }
}

/// Keeps the `k` smallest by `(distance, index)`, sorted. Works on packed
/// integer keys, which is cheaper than comparing the structs.
fn sort_neighbors(nbrs: &mut Vec<Neighbor>, keys: &mut Vec<u128>, k: usize) {
    keys.clear();
    keys.extend(nbrs.iter().map(pack));
    if keys.len() > k {
        keys.select_nth_unstable(k - 1);
        keys.truncate(k);
    }
    keys.sort_unstable();
    nbrs.clear();
    nbrs.extend(keys.iter().map(|&key| unpack(key)));
}

// squared distances are nonnegative, so their bit patterns sort like the values
#[inline]
fn pack(nb: &Neighbor) -> u128 {
    (u128::from(nb.dist_sq.to_bits()) << 64) | nb.index as u128
}

#[inline]
fn unpack(key: u128) -> Neighbor {
    Neighbor {
        dist_sq: f64::from_bits((key >> 64) as u64),
        index: key as u64 as usize,
    }
}

#[inline]
fn radius_pow(dist_sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        dist_sq
    } else if p == 1.0 {
        dist_sq.sqrt()
    } else {
        dist_sq.powf(0.5 * p)
    }
}

pub(crate) fn lex_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

/// DTM of the indexed measure at `x`.
pub fn dtm_value(index: &SpatialIndex, x: &[f64], params: &DtmParams) -> Result<f64> {
    let dtm = Dtm::new(index, params)?;
    dtm.check_dim(x)?;
    Ok(dtm.value(x))
}

/// [`dtm_value`] at every query, in order.
pub fn dtm_batch<Q: AsRef<[f64]>>(
    index: &SpatialIndex,
    queries: &[Q],
    params: &DtmParams,
) -> Result<Vec<f64>> {
    let dtm = Dtm::new(index, params)?;
    queries
        .iter()
        .map(|q| {
            let q = q.as_ref();
            dtm.check_dim(q)?;
            Ok(dtm.value(q))
        })
        .collect()
}

/// `(‖x − y‖ / r) Σ_t d(x_t)^β` over the `r` cell midpoints of `[x, y]`.
pub fn dtm_segment_integral(
    index: &SpatialIndex,
    x: &[f64],
    y: &[f64],
    params: &DtmParams,
    subdivisions: usize,
) -> Result<f64> {
    if subdivisions == 0 {
        return Err(Error::invalid(
            "segment integral needs at least one subdivision",
        ));
    }
    let dtm = Dtm::new(index, params)?;
    dtm.check_dim(x)?;
    dtm.check_dim(y)?;
    Ok(dtm.segment_integral(x, y, subdivisions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_empirical, sample_circle, PointCloud, WeightedMeasure};
    use proptest::prelude::*;

    fn index_of(points: &[Vec<f64>], masses: Option<Vec<f64>>) -> SpatialIndex {
        let cloud = PointCloud::from_points(points).unwrap();
        let mu = match masses {
            Some(w) => WeightedMeasure::new(cloud, w).unwrap(),
            None => make_empirical(&cloud).unwrap(),
        };
        SpatialIndex::new(&mu)
    }

    fn quadrature_oracle(points: &[Vec<f64>], masses: &[f64], x: &[f64], m: f64, p: f64) -> f64 {
        let mu = WeightedMeasure::new(PointCloud::from_points(points).unwrap(), masses.to_vec())
            .unwrap();
        crate::oracles::dtm_quadrature(&mu, x, m, p)
    }

    #[test]
    fn single_atom_gives_distance() {
        let idx = index_of(&[vec![1.0, 2.0]], None);
        for (m, p) in [(0.1, 1.0), (0.5, 2.0), (1.0, 3.5)] {
            let params = DtmParams::new(m, p, 1.0).unwrap();
            let v = dtm_value(&idx, &[4.0, 6.0], &params).unwrap();
            assert!((v - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_atoms_full_mass_linear() {
        let idx = index_of(&[vec![0.0], vec![1.0]], None);
        let params = DtmParams::new(1.0, 1.0, 1.0).unwrap();
        assert!((dtm_value(&idx, &[0.0], &params).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_ten_points_matches_knn_formula_and_quadrature() {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64 * 0.7).sin() * 3.0, (i as f64 * 1.3).cos()])
            .collect();
        let idx = index_of(&pts, None);
        let params = DtmParams::new(0.25, 2.0, 1.0).unwrap();
        let x = [0.3, -0.2];
        let mut r: Vec<f64> = pts.iter().map(|p| crate::euclidean(p, &x)).collect();
        r.sort_by(f64::total_cmp);
        let (m, n) = (0.25, 10.0);
        let k = 2.0;
        let formula =
            ((1.0 / m) * ((r[0] * r[0] + r[1] * r[1]) / n + (m * n - k) / n * r[2] * r[2])).sqrt();
        let oracle = quadrature_oracle(&pts, &vec![0.1; 10], &x, 0.25, 2.0);
        let got = dtm_value(&idx, &x, &params).unwrap();
        assert!((got - formula).abs() < 1e-12 * formula);
        assert!((got - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn duplicates_equal_merged_atom() {
        let split = index_of(&[vec![0.0], vec![1.0], vec![1.0]], None);
        let merged = index_of(&[vec![0.0], vec![1.0]], Some(vec![1.0 / 3.0, 2.0 / 3.0]));
        for m in [0.2, 0.5, 0.9, 1.0] {
            let params = DtmParams::new(m, 2.0, 1.0).unwrap();
            for x in [-1.0, 0.2, 0.6, 3.0] {
                let a = dtm_value(&split, &[x], &params).unwrap();
                let b = dtm_value(&merged, &[x], &params).unwrap();
                assert!((a - b).abs() < 1e-14, "m={m} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let idx = index_of(&[vec![0.0, 0.0]], None);
        let params = DtmParams::default();
        assert!(matches!(
            dtm_value(&idx, &[1.0], &params),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn batch_matches_sequential_bitwise() {
        let mu = make_empirical(&sample_circle(300, 2).unwrap()).unwrap();
        let idx = SpatialIndex::new(&mu);
        let params = DtmParams::default();
        let empty: Vec<Vec<f64>> = vec![];
        assert!(dtm_batch(&idx, &empty, &params).unwrap().is_empty());
        let queries: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![(i as f64 * 0.37).sin() * 1.5, (i as f64 * 0.11).cos() * 1.2])
            .collect();
        let batch = dtm_batch(&idx, &queries, &params).unwrap();
        for (q, b) in queries.iter().zip(&batch) {
            assert_eq!(b.to_bits(), dtm_value(&idx, q, &params).unwrap().to_bits());
        }
        let one = dtm_batch(&idx, &queries[..1], &params).unwrap();
        assert_eq!(one[0], batch[0]);
    }

    #[test]
    fn m_one_over_n_is_nearest_neighbour_distance() {
        let cloud = sample_circle(200, 9).unwrap();
        let mu = make_empirical(&cloud).unwrap();
        let idx = SpatialIndex::new(&mu);
        let params = DtmParams::new(1.0 / 200.0, 2.0, 1.0).unwrap();
        for x in [[0.3, 0.1], [2.0, -1.0], [0.0, 0.99]] {
            let nn = cloud
                .iter()
                .map(|p| crate::euclidean(p, &x))
                .fold(f64::INFINITY, f64::min);
            assert!((dtm_value(&idx, &x, &params).unwrap() - nn).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_integral_hand_values() {
        let idx = index_of(&[vec![0.0, 0.0]], None);
        let params = DtmParams::new(0.5, 3.0, 1.0).unwrap();
        let v = dtm_segment_integral(&idx, &[1.0, 0.0], &[-1.0, 0.0], &params, 2).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let zero = dtm_segment_integral(&idx, &[0.3, 0.3], &[0.3, 0.3], &params, 5).unwrap();
        assert_eq!(zero, 0.0);
        assert!(dtm_segment_integral(&idx, &[0.0, 0.0], &[1.0, 0.0], &params, 0).is_err());
    }

    #[test]
    fn segment_integral_closed_form_single_atom() {
        // ∫_0^1 |t − t0|^β dt for an atom on the segment
        let idx = index_of(&[vec![0.3, 0.0]], None);
        let params = DtmParams::new(0.5, 2.0, 2.0).unwrap();
        let exact = (0.3f64.powi(3) + 0.7f64.powi(3)) / 3.0;
        let v = dtm_segment_integral(&idx, &[0.0, 0.0], &[1.0, 0.0], &params, 10_000).unwrap();
        assert!((v - exact).abs() < 1e-4);
    }

    #[test]
    fn segment_integral_is_symmetric() {
        let mu = make_empirical(&sample_circle(100, 4).unwrap()).unwrap();
        let idx = SpatialIndex::new(&mu);
        let params = DtmParams::new(0.1, 2.0, 1.5).unwrap();
        let (x, y) = ([0.9, 0.1], [-0.3, 0.7]);
        let a = dtm_segment_integral(&idx, &x, &y, &params, 7).unwrap();
        let b = dtm_segment_integral(&idx, &y, &x, &params, 7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn segment_integral_refinement_contracts() {
        // with m = 1 every atom is used everywhere, so the integrand is smooth
        let pts: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![(i as f64 * 1.7).sin(), (i as f64 * 0.9).cos()])
            .collect();
        let idx = index_of(&pts, None);
        for beta in [1.0, 2.0, 3.0] {
            let params = DtmParams::new(1.0, 2.0, beta).unwrap();
            let (x, y) = ([-1.0, -0.5], [2.0, 1.0]);
            let i = |r| dtm_segment_integral(&idx, &x, &y, &params, r).unwrap();
            for r in [8usize, 16, 32, 64] {
                let (half, one, two) = (i(r / 2), i(r), i(2 * r));
                assert!(
                    (two - one).abs() <= (one - half).abs() + 1e-9,
                    "r={r}: {half} {one} {two}"
                );
            }
        }
    }

    #[test]
    fn quadratic_majorant_dominates() {
        let mu = make_empirical(&sample_circle(150, 3).unwrap()).unwrap();
        let idx = SpatialIndex::new(&mu);
        let dtm = Dtm::new(&idx, &DtmParams::default()).unwrap();
        let at = [0.2, 0.5];
        let (maj, _) = dtm.quadratic_majorant(&at, None);
        assert!((maj.d_sq - dtm.pow_p(&at)).abs() < 1e-14);
        for z in [[0.2, 0.5], [0.9, 0.1], [-1.0, 0.3], [0.0, 0.0]] {
            let bound = z[0] * z[0] + z[1] * z[1]
                - 2.0 * (z[0] * maj.barycenter[0] + z[1] * maj.barycenter[1])
                + maj.second_moment;
            assert!(dtm.pow_p(&z) <= bound + 1e-12);
        }
    }

    fn weighted_measure() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (1usize..20).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), n),
                prop::collection::vec(0.05f64..1.0, n),
            )
                .prop_map(|(pts, raw)| {
                    let total: f64 = raw.iter().sum();
                    (pts, raw.iter().map(|w| w / total).collect())
                })
        })
    }

    proptest! {
        #[test]
        fn agrees_with_pseudo_dtm_quadrature(
            (pts, w) in weighted_measure(),
            x in prop::collection::vec(-4.0f64..4.0, 2),
            m in 0.01f64..1.0,
            p in 1.0f64..4.0,
        ) {
            let cloud = PointCloud::from_points(&pts).unwrap();
            let Ok(mu) = WeightedMeasure::new(cloud, w.clone()) else { return Ok(()); };
            let idx = SpatialIndex::new(&mu);
            let params = DtmParams::new(m, p, 1.0).unwrap();
            let got = dtm_value(&idx, &x, &params).unwrap();
            let want = quadrature_oracle(&pts, &w, &x, m, p);
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1e-300), "{} vs {}", got, want);
        }

        #[test]
        fn one_lipschitz(
            (pts, w) in weighted_measure(),
            x in prop::collection::vec(-4.0f64..4.0, 2),
            y in prop::collection::vec(-4.0f64..4.0, 2),
            m in 0.01f64..1.0,
        ) {
            let cloud = PointCloud::from_points(&pts).unwrap();
            let Ok(mu) = WeightedMeasure::new(cloud, w) else { return Ok(()); };
            let idx = SpatialIndex::new(&mu);
            let params = DtmParams::new(m, 2.0, 1.0).unwrap();
            let dx = dtm_value(&idx, &x, &params).unwrap();
            let dy = dtm_value(&idx, &y, &params).unwrap();
            prop_assert!((dx - dy).abs() <= crate::euclidean(&x, &y) + 1e-9);
        }

        #[test]
        fn bounded_by_farthest_atom_and_diameter(
            (pts, w) in weighted_measure(),
            lambda in prop::collection::vec(0.01f64..1.0, 3),
            m in 0.01f64..1.0,
        ) {
            let cloud = PointCloud::from_points(&pts).unwrap();
            let diam = cloud.diameter();
            let Ok(mu) = WeightedMeasure::new(cloud, w) else { return Ok(()); };
            let idx = SpatialIndex::new(&mu);
            let params = DtmParams::new(m, 2.0, 1.0).unwrap();
            // a convex combination of up to three atoms lies in the hull
            let total: f64 = lambda.iter().sum();
            let mut x = vec![0.0; 2];
            for (j, l) in lambda.iter().enumerate() {
                let p = &pts[j % pts.len()];
                x[0] += l / total * p[0];
                x[1] += l / total * p[1];
            }
            let v = dtm_value(&idx, &x, &params).unwrap();
            let far = pts.iter().map(|p| crate::euclidean(p, &x)).fold(0.0, f64::max);
            prop_assert!(v >= 0.0 && v <= far + 1e-12);
            prop_assert!(v <= diam + 1e-9);
        }

        #[test]
        fn hints_never_change_the_value(
            raw in prop::collection::vec(prop::collection::vec(-8i32..8, 2), 1..200),
            weighted in any::<bool>(),
            x in prop::collection::vec(-9.0f64..9.0, 2),
            m in 0.001f64..1.0,
            p in prop_oneof![Just(1.0), Just(2.0), 1.0f64..3.0],
            hints in prop::collection::vec(0.0f64..20.0, 4),
        ) {
            // integer coordinates: plenty of exact ties
            let pts: Vec<Vec<f64>> = raw
                .iter()
                .map(|q| q.iter().map(|&c| c as f64 / 4.0).collect())
                .collect();
            let masses = weighted.then(|| {
                let raw: Vec<f64> = (1..=pts.len()).map(|j| (j % 5 + 1) as f64).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|w| w / total).collect()
            });
            let idx = index_of(&pts, masses);
            let params = DtmParams::new(m, p, 1.0).unwrap();
            let dtm = Dtm::new(&idx, &params).unwrap();
            let (want, reach) = dtm.value_hinted(&x, None);
            for h in hints.iter().copied().chain([reach, 0.0, f64::INFINITY]) {
                let (got, r) = dtm.value_hinted(&x, Some(h));
                prop_assert_eq!(got.to_bits(), want.to_bits());
                prop_assert_eq!(r.to_bits(), reach.to_bits());
            }
            let knn = idx.knn(&x, idx.len());
            let mut cum = 0.0;
            let mut acc = 0.0;
            for nb in &knn {
                let w = idx.masses()[nb.index];
                let c = (f64::min(cum + w, m) - cum).clamp(0.0, w);
                acc += c * nb.dist().powf(p);
                cum += w;
            }
            let sorted = (acc / m).powf(1.0 / p);
            prop_assert!((want - sorted).abs() <= 1e-12 * sorted.max(1e-12), "{} vs {}", want, sorted);
        }
    }
}
