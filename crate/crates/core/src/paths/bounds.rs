//! Cheap lower and upper bounds on DTM edge weights.
//!
//! The exact subdivided weight needs one k-NN query per midpoint, which makes
//! it by far the dominant cost of a query on a dense graph. These bounds let
//! the shortest-path search discard most edges without evaluating them.
//!
//! In the plane the DTM is tabulated on a regular grid of anchors. For `p = 2`
//! the function `d² − ‖z‖²` is a minimum of affine functions (one per mass
//! allocation), hence concave: its linear interpolation over a grid triangle
//! is a lower bound inside that triangle. The allocation found at an anchor
//! `a` gives the upper bound `d(z)² ≤ ‖z‖² − 2 z·b_a + q_a` everywhere. For
//! other `p`, and in other dimensions, bounds come from the 1-Lipschitz
//! property around anchors or around the segment endpoints.

use rayon::prelude::*;

use crate::dtm::Dtm;

// relative slack absorbing floating-point rounding in both the bound and the
// exact weight
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
enum Table {
    /// `p = 2`: `g = d² − ‖a‖²` at the anchors and at the four corners of
    /// each cell, and per anchor the allocation barycenter and second moment.
    Quadratic {
        g: Vec<f64>,
        cells: Vec<[f64; 4]>,
        majorant: Vec<[f64; 3]>,
    },
    /// DTM values at the anchors.
    Lipschitz { d: Vec<f64> },
}

/// DTM tabulated on a planar grid covering every segment of interest.
#[derive(Debug, Clone)]
pub(crate) struct GridBounds {
    lo: [f64; 2],
    h: [f64; 2],
    res: usize,
    table: Table,
    // exponent turning the tabulated quantity into dtm^β
    expo: f64,
    // lower bound of dtm^β over the whole grid
    floor: f64,
    // radius holding mass m around each anchor
    reach: Vec<f64>,
}

impl GridBounds {
    /// Grid with `res × res` cells over the box `[lo, hi]` (padded by a cell).
    pub(crate) fn new(dtm: &Dtm<'_>, lo: [f64; 2], hi: [f64; 2], res: usize) -> Self {
        let res = res.max(1);
        let mut h = [0.0; 2];
        let mut lo = lo;
        for k in 0..2 {
            let span = (hi[k] - lo[k]).max(1e-9 * (1.0 + lo[k].abs()));
            h[k] = span / (res as f64 - 2.0).max(1.0);
            lo[k] -= h[k];
        }
        let side = res + 1;
        let params = *dtm.params();
        // rows run in parallel; along a row each anchor hints the next
        let rows: Vec<Vec<(f64, [f64; 2], f64, f64)>> = (0..side)
            .into_par_iter()
            .map(|j| {
                let mut hint = None;
                (0..side)
                    .map(|i| {
                        let a = [lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]];
                        if params.p == 2.0 {
                            let (maj, reach) = dtm.quadratic_majorant(&a, hint);
                            hint = Some(reach + h[0]);
                            let g = maj.d_sq - (a[0] * a[0] + a[1] * a[1]);
                            (
                                g,
                                [maj.barycenter[0], maj.barycenter[1]],
                                maj.second_moment,
                                reach,
                            )
                        } else {
                            let (d, reach) = dtm.value_hinted(&a, hint);
                            hint = Some(reach + h[0]);
                            (d, [0.0; 2], 0.0, reach)
                        }
                    })
                    .collect()
            })
            .collect();
        let flat: Vec<(f64, [f64; 2], f64, f64)> = rows.into_iter().flatten().collect();
        let (table, expo) = if params.p == 2.0 {
            (
                Table::Quadratic {
                    g: flat.iter().map(|r| r.0).collect(),
                    cells: (0..res * res)
                        .map(|c| {
                            let a = (c / res) * side + c % res;
                            [
                                flat[a].0,
                                flat[a + 1].0,
                                flat[a + side].0,
                                flat[a + side + 1].0,
                            ]
                        })
                        .collect(),
                    majorant: flat.iter().map(|r| [r.1[0], r.1[1], r.2]).collect(),
                },
                params.beta / 2.0,
            )
        } else {
            (
                Table::Lipschitz {
                    d: flat.iter().map(|r| r.0).collect(),
                },
                params.beta,
            )
        };
        let mut grid = Self {
            lo,
            h,
            res,
            table,
            expo,
            floor: 0.0,
            reach: flat.iter().map(|r| r.3).collect(),
        };
        grid.floor = grid.global_floor();
        grid
    }

    fn global_floor(&self) -> f64 {
        let side = self.res + 1;
        let mut best = f64::INFINITY;
        for j in 0..self.res {
            for i in 0..self.res {
                let ids = [
                    j * side + i,
                    j * side + i + 1,
                    (j + 1) * side + i,
                    (j + 1) * side + i + 1,
                ];
                let cell_lb = match &self.table {
                    Table::Quadratic { g, .. } => {
                        let x = box_dist(self.lo[0] + i as f64 * self.h[0], self.h[0]);
                        let y = box_dist(self.lo[1] + j as f64 * self.h[1], self.h[1]);
                        x * x + y * y + ids.iter().map(|&a| g[a]).fold(f64::INFINITY, f64::min)
                    }
                    Table::Lipschitz { d } => {
                        ids.iter().map(|&a| d[a]).fold(f64::INFINITY, f64::min)
                            - self.h[0].hypot(self.h[1])
                    }
                };
                best = best.min(cell_lb);
            }
        }
        self.power(best) * (1.0 - SLACK)
    }

    #[inline]
    fn power(&self, v: f64) -> f64 {
        let v = v.max(0.0);
        if self.expo == 1.0 {
            v
        } else {
            v.powf(self.expo)
        }
    }

    /// Lower bound of `dtm^β` anywhere on the grid.
    pub(crate) fn floor(&self) -> f64 {
        self.floor
    }

    #[inline]
    fn locate(&self, z: [f64; 2]) -> (usize, usize, f64, f64) {
        let fx = (z[0] - self.lo[0]) / self.h[0];
        let fy = (z[1] - self.lo[1]) / self.h[1];
        // truncation is floor on nonnegative values
        let i = (fx.max(0.0) as usize).min(self.res - 1);
        let j = (fy.max(0.0) as usize).min(self.res - 1);
        (
            i,
            j,
            (fx - i as f64).clamp(0.0, 1.0),
            (fy - j as f64).clamp(0.0, 1.0),
        )
    }

    /// A radius around `z` holding mass `m`, from the nearest anchors.
    pub(crate) fn reach_hint(&self, z: [f64; 2]) -> f64 {
        let (i, j, _, _) = self.locate(z);
        let side = self.res + 1;
        let mut best = f64::INFINITY;
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let a = (j + dj) * side + i + di;
            let ax = self.lo[0] + (i + di) as f64 * self.h[0];
            let ay = self.lo[1] + (j + dj) as f64 * self.h[1];
            best = best.min(self.reach[a] + (z[0] - ax).hypot(z[1] - ay));
        }
        best
    }

    #[inline]
    fn corners(&self, z: [f64; 2]) -> ([usize; 4], f64, f64) {
        let (i, j, tx, ty) = self.locate(z);
        let side = self.res + 1;
        let a00 = j * side + i;
        ([a00, a00 + 1, a00 + side, a00 + side + 1], tx, ty)
    }

    /// Lower bound on `dtm(z)^β`.
    #[inline]
    pub(crate) fn point_lower(&self, z: [f64; 2]) -> f64 {
        let ([a00, a10, a01, a11], tx, ty) = self.corners(z);
        match &self.table {
            Table::Quadratic { cells, .. } => {
                let side = self.res + 1;
                let [g00, g10, g01, g11] = cells[(a00 / side) * self.res + a00 % side];
                let interp = if tx + ty <= 1.0 {
                    g00 + tx * (g10 - g00) + ty * (g01 - g00)
                } else {
                    g11 + (1.0 - tx) * (g01 - g11) + (1.0 - ty) * (g10 - g11)
                };
                self.power(z[0] * z[0] + z[1] * z[1] + interp)
            }
            Table::Lipschitz { d } => {
                let lo = [a00, a10, a01, a11]
                    .iter()
                    .map(|&a| d[a] - self.anchor_dist(a, z))
                    .fold(0.0, f64::max);
                self.power(lo)
            }
        }
    }

    /// Upper bound on `dtm(z)^β`.
    #[inline]
    pub(crate) fn point_upper(&self, z: [f64; 2]) -> f64 {
        let (corners, _, _) = self.corners(z);
        match &self.table {
            Table::Quadratic { majorant, .. } => {
                let best = corners
                    .iter()
                    .map(|&a| {
                        let [bx, by, q] = majorant[a];
                        q - 2.0 * (z[0] * bx + z[1] * by)
                    })
                    .fold(f64::INFINITY, f64::min);
                self.power(z[0] * z[0] + z[1] * z[1] + best)
            }
            Table::Lipschitz { d } => {
                let hi = corners
                    .iter()
                    .map(|&a| d[a] + self.anchor_dist(a, z))
                    .fold(f64::INFINITY, f64::min);
                self.power(hi)
            }
        }
    }

    #[inline]
    fn anchor_dist(&self, a: usize, z: [f64; 2]) -> f64 {
        let side = self.res + 1;
        let ax = self.lo[0] + (a % side) as f64 * self.h[0];
        let ay = self.lo[1] + (a / side) as f64 * self.h[1];
        (z[0] - ax).hypot(z[1] - ay)
    }

    /// Lower bound on the midpoint-rule weight of `[x, y]` with `r` cells.
    /// Summation runs from the middle outwards and stops once the bound
    /// exceeds `cap`.
    pub(crate) fn segment_lower(&self, x: &[f64], y: &[f64], r: usize, len: f64, cap: f64) -> f64 {
        let scale = len / r as f64 * (1.0 - SLACK);
        let mut lo = 0.0;
        for k in 0..r {
            let t = if k % 2 == 0 {
                r / 2 + k / 2
            } else {
                r / 2 - 1 - k / 2
            };
            let s = (t as f64 + 0.5) / r as f64;
            lo += self.point_lower([x[0] + s * (y[0] - x[0]), x[1] + s * (y[1] - x[1])]);
            if lo * scale > cap {
                break;
            }
        }
        lo * scale
    }

    /// Upper bound on the midpoint-rule weight of `[x, y]` with `r` cells.
    pub(crate) fn segment_upper(&self, x: &[f64], y: &[f64], r: usize, len: f64) -> f64 {
        let mut hi = 0.0;
        for t in 0..r {
            let s = (t as f64 + 0.5) / r as f64;
            hi += self.point_upper([x[0] + s * (y[0] - x[0]), x[1] + s * (y[1] - x[1])]);
        }
        hi * len / r as f64 * (1.0 + SLACK)
    }

    /// Bounds on the midpoint-rule weight of `[x, y]` with `r` cells.
    #[cfg(test)]
    pub(crate) fn segment(&self, x: &[f64], y: &[f64], r: usize) -> (f64, f64) {
        let len = crate::euclidean(x, y);
        (
            self.segment_lower(x, y, r, len, f64::INFINITY),
            self.segment_upper(x, y, r, len),
        )
    }
}

// distance from the origin to the interval [start, start + width], in one axis
fn box_dist(start: f64, width: f64) -> f64 {
    if start > 0.0 {
        start
    } else if start + width < 0.0 {
        -(start + width)
    } else {
        0.0
    }
}

/// Bounds on `dtm^β` at distance `s` from an endpoint with DTM `da` and
/// `len − s` from one with DTM `db`, by the 1-Lipschitz property.
#[inline]
pub(crate) fn endpoint_point(da: f64, db: f64, len: f64, s: f64, beta: f64) -> (f64, f64) {
    let lo = (da - s).max(db - (len - s)).max(0.0);
    let hi = (da + s).min(db + (len - s));
    (lo.powf(beta), hi.powf(beta))
}

/// Bounds on the midpoint-rule weight from the endpoint DTM values.
pub(crate) fn endpoint_segment(dx: f64, dy: f64, len: f64, beta: f64, r: usize) -> (f64, f64) {
    if len == 0.0 {
        return (0.0, 0.0);
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for t in 0..r {
        let s = (t as f64 + 0.5) / r as f64 * len;
        let (a, b) = endpoint_point(dx, dy, len, s, beta);
        lo += a;
        hi += b;
    }
    let scale = len / r as f64;
    (lo * scale * (1.0 - SLACK), hi * scale * (1.0 + SLACK))
}

/// Applies the rounding slack to a lower and an upper bound.
#[inline]
pub(crate) fn widen(lo: f64, hi: f64) -> (f64, f64) {
    (lo * (1.0 - SLACK), hi * (1.0 + SLACK))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_empirical, sample_circle, sample_ring, DtmParams, RingSpec};
    use crate::spatial::SpatialIndex;

    fn check_grid(params: DtmParams, cloud: crate::PointCloud) {
        let mu = make_empirical(&cloud).unwrap();
        let idx = SpatialIndex::new(&mu);
        let dtm = Dtm::new(&idx, &params).unwrap();
        let (lo, hi) = cloud.bounding_box().unwrap();
        let grid = GridBounds::new(&dtm, [lo[0], lo[1]], [hi[0], hi[1]], 24);
        let r = 7;
        for i in (0..cloud.len()).step_by(7) {
            for j in (0..cloud.len()).step_by(11) {
                let (x, y) = (cloud.point(i), cloud.point(j));
                let w = dtm.segment_integral(x, y, r);
                let (a, b) = grid.segment(x, y, r);
                assert!(a <= w && w <= b, "{a} <= {w} <= {b}");
                assert!(grid.floor() * crate::euclidean(x, y) <= w);
                let (c, d) = endpoint_segment(
                    dtm.value(x),
                    dtm.value(y),
                    crate::euclidean(x, y),
                    params.beta,
                    r,
                );
                assert!(c <= w && w <= d, "{c} <= {w} <= {d}");
            }
        }
    }

    #[test]
    fn grid_bounds_bracket_exact_weights() {
        check_grid(DtmParams::default(), sample_circle(300, 5).unwrap());
        check_grid(
            DtmParams::new(0.05, 2.0, 1.0).unwrap(),
            sample_circle(200, 6).unwrap(),
        );
        check_grid(
            DtmParams::new(0.1, 1.5, 2.0).unwrap(),
            sample_circle(200, 7).unwrap(),
        );
        let ring = sample_ring(&RingSpec::new(400).with_default_shortcut(), 3).unwrap();
        check_grid(DtmParams::default(), ring);
    }

    #[test]
    fn quadratic_bounds_are_tight_near_the_support() {
        let cloud = sample_circle(2000, 1).unwrap();
        let idx = SpatialIndex::new(&make_empirical(&cloud).unwrap());
        let dtm = Dtm::new(&idx, &DtmParams::default()).unwrap();
        let grid = GridBounds::new(&dtm, [-1.0, -1.0], [1.0, 1.0], 96);
        let (x, y) = (cloud.point(0), cloud.point(1));
        let w = dtm.segment_integral(x, y, 11);
        let (a, b) = grid.segment(x, y, 11);
        assert!(b - a < 0.05 * w, "{a} {w} {b}");
    }
}
