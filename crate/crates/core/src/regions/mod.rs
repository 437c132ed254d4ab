//! Point clouds with a fattening radius, convex hulls, Minkowski sums and the
//! geometric predicates built on them.
//!
//! A [`RegionSet`] with points `P` and radius `δ` represents `P + B(0, δ)`. Hull
//! operations act on the vertices and carry `δ` along, since
//! `conv(P + B(0,δ)) = conv(P) + B(0,δ)`.

mod admissible;
mod chain;
pub mod hull;

pub use admissible::{
    check_delta_admissible, AdmissibilityMargins, AdmissibilityReport, SpectrumModel,
};
pub use chain::{chain_step, check_convexity_chain, ChainStep, ConvexityReport, ParticleSupports};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::profile::norm;
use hull::{extreme_points, ConvexBody};

/// Points closer than this in every coordinate are merged.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSet {
    dim: usize,
    coords: Vec<f64>,
    delta: f64,
}

impl RegionSet {
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>, delta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::pre("RegionSet", "dimension must be positive"));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::pre("RegionSet", format!("invalid fattening radius {delta}")));
        }
        let mut pts = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::pre("RegionSet", "non-finite coordinate"));
            }
            pts.push(p);
        }
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
        let mut window_start = 0;
        for p in pts {
            while window_start < kept.len() && p[0] - kept[window_start][0] > DEDUP_TOL {
                window_start += 1;
            }
            let dup = kept[window_start..]
                .iter()
                .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= DEDUP_TOL));
            if !dup {
                kept.push(p);
            }
        }
        Ok(RegionSet {
            dim,
            coords: kept.concat(),
            delta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.points().map(|p| p.to_vec()).collect()
    }

    /// Exact ball: its center fattened by `radius`.
    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        Self::from_points(center.len(), vec![center.to_vec()], radius)
    }

    /// Box `[lo, hi]` sampled on a regular grid with `resolution` points per axis
    /// (boundary included).
    pub fn box_region(lo: &[f64], hi: &[f64], resolution: usize) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return Err(Error::pre("box_region", "lower corner exceeds upper corner"));
        }
        let n = resolution.max(2);
        let d = lo.len();
        let total = n.pow(d as u32);
        let pts = (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; d];
                for j in (0..d).rev() {
                    let k = idx % n;
                    idx /= n;
                    p[j] = lo[j] + (hi[j] - lo[j]) * k as f64 / (n - 1) as f64;
                }
                p
            })
            .collect();
        Self::from_points(d, pts, 0.0)
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        RegionSet {
            delta,
            ..self.clone()
        }
    }

    /// Pointwise image under `f`, keeping `δ`.
    pub fn map(&self, dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::from_points(dim, self.points().map(f).collect(), self.delta)
    }

    pub fn negate(&self) -> Self {
        RegionSet {
            coords: self.coords.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    /// Union of two clouds; the larger radius is kept.
    pub fn union(&self, other: &RegionSet) -> Result<Self> {
        check_dims(self, other)?;
        let mut pts = self.to_vecs();
        pts.extend(other.to_vecs());
        Self::from_points(self.dim, pts, self.delta.max(other.delta))
    }

    /// Cartesian product `A × B ⊂ ℝ^{a+b}`; radius `√(δ_A² + δ_B²)` covers the
    /// product of the fattened sets.
    pub fn product(&self, other: &RegionSet) -> Result<Self> {
        let mut pts = Vec::with_capacity(self.len() * other.len());
        for a in self.points() {
            for b in other.points() {
                let mut p = a.to_vec();
                p.extend_from_slice(b);
                pts.push(p);
            }
        }
        Self::from_points(
            self.dim + other.dim,
            pts,
            self.delta.hypot(other.delta),
        )
    }

    /// Convex body spanned by the points (the radius is not included).
    pub fn body(&self) -> ConvexBody {
        ConvexBody::new(convex_hull(self).to_vecs())
    }

    /// Distance from `q` to the fattened hull.
    pub fn hull_distance_to(&self, q: &[f64]) -> f64 {
        (self.body().distance(q) - self.delta).max(0.0)
    }
}

fn check_dims(a: &RegionSet, b: &RegionSet) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(())
}

/// Extreme points of the cloud, same radius.
pub fn convex_hull(r: &RegionSet) -> RegionSet {
    let refs: Vec<&[f64]> = r.points().collect();
    let pts = extreme_points(&refs)
        .into_iter()
        .map(|i| refs[i].to_vec())
        .collect();
    RegionSet::from_points(r.dim, pts, r.delta).expect("subset of a valid cloud")
}

/// Pairwise sumset with summed radii.
pub fn minkowski_sum(a: &RegionSet, b: &RegionSet) -> Result<RegionSet> {
    check_dims(a, b)?;
    let mut pts = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        for q in b.points() {
            pts.push(p.iter().zip(q).map(|(x, y)| x + y).collect());
        }
    }
    RegionSet::from_points(a.dim, pts, a.delta + b.delta)
}

pub fn fatten(r: &RegionSet, delta: f64) -> Result<RegionSet> {
    if !(delta >= 0.0) {
        return Err(Error::pre("fatten", "radius must be nonnegative"));
    }
    Ok(r.with_delta(r.delta + delta))
}

/// Euclidean distance between the fattened hulls, 0 if they intersect.
pub fn hull_distance(a: &RegionSet, b: &RegionSet) -> Result<f64> {
    check_dims(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Ok(f64::INFINITY);
    }
    let (ha, hb) = (convex_hull(a), convex_hull(b));
    let diffs: Vec<Vec<f64>> = ha
        .points()
        .flat_map(|p| hb.points().map(move |q| p.iter().zip(q).map(|(x, y)| x - y).collect()))
        .collect();
    let refs: Vec<&[f64]> = diffs.iter().map(|v| v.as_slice()).collect();
    let d = norm(&hull::min_norm_point(&refs));
    Ok((d - a.delta - b.delta).max(0.0))
}

/// Shortest distance on the circle `ℝ/2πℤ`.
pub fn torus_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Reduces an angle into `]-π, π]`.
pub fn reduce_momentum(p: f64) -> f64 {
    let r = (p + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI + 1e-15 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Product distance on `(E, p)` space: Euclidean in energy, torus in momentum.
pub fn energy_momentum_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = (a[0] - b[0]).powi(2);
    for (x, y) in a[1..].iter().zip(&b[1..]) {
        s += torus_gap(*x, *y).powi(2);
    }
    s.sqrt()
}

/// Typed region literals accepted in configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionLiteral {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Cloud {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        delta: f64,
    },
    /// Mass-shell points `(Σ(p), p)` for grid momenta within `radius` of `center`
    /// (torus metric), fattened by `delta`.
    ShellPatch {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        delta: f64,
    },
}

fn default_resolution() -> usize {
    5
}

impl RegionLiteral {
    pub fn resolve(&self, shell: Option<(&Dispersion, &TorusGrid)>) -> Result<RegionSet> {
        match self {
            RegionLiteral::Box { lo, hi, resolution } => RegionSet::box_region(lo, hi, *resolution),
            RegionLiteral::Ball { center, radius } => RegionSet::ball(center, *radius),
            RegionLiteral::Cloud { points, delta } => {
                let dim = points.first().map(|p| p.len()).unwrap_or(0);
                RegionSet::from_points(dim, points.clone(), *delta)
            }
            RegionLiteral::ShellPatch {
                center,
                radius,
                delta,
            } => {
                let (sigma, grid) = shell
                    .ok_or_else(|| Error::Config("shell-patch needs a dispersion and grid".into()))?;
                shell_patch(sigma, grid, center, *radius, *delta)
            }
        }
    }
}

/// Shell points `(Σ(p), p)` for grid momenta within torus distance `radius` of `center`.
pub fn shell_patch(
    sigma: &Dispersion,
    grid: &TorusGrid,
    center: &[f64],
    radius: f64,
    delta: f64,
) -> Result<RegionSet> {
    if center.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: center.len(),
        });
    }
    let pts: Vec<Vec<f64>> = grid
        .momenta()
        .into_iter()
        .filter(|p| {
            p.iter()
                .zip(center)
                .map(|(a, b)| torus_gap(*a, *b).powi(2))
                .sum::<f64>()
                .sqrt()
                <= radius + 1e-12
        })
        .map(|p| {
            let mut e = vec![sigma.value(&p)];
            e.extend(p);
            e
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::pre("shell_patch", "no grid momentum inside the patch"));
    }
    RegionSet::from_points(grid.dim() + 1, pts, delta)
}

/// Membership tolerance for cone checks.
const CONE_EPS: f64 = 1e-12;

/// Convex set `K ∋ 0` prepared for repeated [`cone_monotone`] queries.
#[derive(Clone, Debug)]
pub struct Cone {
    body: ConvexBody,
    delta: f64,
}

impl Cone {
    pub fn new(k: &RegionSet) -> Result<Self> {
        let body = k.body();
        let zero = vec![0.0; k.dim()];
        if body.distance(&zero) > k.delta() + CONE_EPS {
            return Err(Error::pre("cone_monotone", "K does not contain the origin"));
        }
        Ok(Cone {
            body,
            delta: k.delta(),
        })
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.body.distance(v) <= self.delta + CONE_EPS
    }

    /// `(x/t ∈ K, x/s ∈ K)` for `0 < t <= s`.
    pub fn check(&self, x: &[f64], t: f64, s: f64) -> Result<(bool, bool)> {
        if !(t > 0.0 && s >= t) {
            return Err(Error::pre("cone_monotone", "need 0 < t <= s"));
        }
        let a: Vec<f64> = x.iter().map(|v| v / t).collect();
        let b: Vec<f64> = x.iter().map(|v| v / s).collect();
        Ok((self.contains(&a), self.contains(&b)))
    }
}

/// `(x/t ∈ K^cv, x/s ∈ K^cv)`; the first implies the second when `0 ∈ K` and `t <= s`.
pub fn cone_monotone(k: &RegionSet, x: &[f64], t: f64, s: f64) -> Result<(bool, bool)> {
    if x.len() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: x.len(),
        });
    }
    Cone::new(k)?.check(x, t, s)
}
