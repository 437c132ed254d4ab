//! Numerical execution of the convexity inclusion chain for multi-particle
//! detector supports and the search for the largest admissible fattening δ.

use serde::{Deserialize, Serialize};

use super::hull::min_norm_point;
use super::{convex_hull, fatten, minkowski_sum, RegionSet};
use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::profile::norm;

/// Offsets per axis used to sample a fattened momentum point.
const BALL_SAMPLES: usize = 9;

/// Per-particle input: velocity support of `h_i` and momentum support of `ĝ_i` at δ = 0.
#[derive(Clone, Debug)]
pub struct ParticleSupports {
    pub h: RegionSet,
    pub momentum: RegionSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub delta: f64,
    /// Radius of the ball around the box center containing every `Vel(ĝ'_i)`.
    pub velocity_radius: f64,
    /// `R(δ) = 2√n r(δ) + 4δ`.
    pub radius: f64,
    /// Minimum particle separation over `(supp H)^{cv,R(δ)}`.
    pub separation: f64,
    /// Euclidean distance of `(supp H)^{cv,R(δ)}` to the diagonal set.
    pub diagonal_distance: f64,
    /// Minimum particle separation over the chain's final set `π_x supp(H'ĝ)`.
    pub chain_separation: f64,
    /// Whether the final chain set lies inside `(supp H)^{cv,R(δ)}`.
    pub inclusion_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub particles: usize,
    /// Minimum particle separation over `(supp H)^cv` at δ = 0.
    pub base_separation: f64,
    /// Largest δ found with positive separation.
    pub threshold: f64,
    /// Width of the final bisection bracket.
    pub bisection_width: f64,
    pub ladder: Vec<ChainStep>,
    pub positive_below_threshold: bool,
}

fn lipschitz_of_gradient(sigma: &Dispersion) -> Result<f64> {
    let side = if sigma.dim() == 1 { 512 } else { 32 };
    let grid = TorusGrid::new(sigma.dim(), side)?;
    Ok((0..grid.len())
        .map(|i| norm(&sigma.hessian(&grid.momentum(i))))
        .fold(0.0, f64::max))
}

/// `Vel(P + B(0, ρ))` as a sampled cloud whose radius covers the sampling gaps.
fn fattened_velocities(
    momentum: &RegionSet,
    sigma: &Dispersion,
    rho: f64,
    lip: f64,
) -> Result<RegionSet> {
    let d = momentum.dim();
    if rho == 0.0 {
        return RegionSet::from_points(d, momentum.points().map(|p| sigma.gradient(p)).collect(), 0.0);
    }
    let n = BALL_SAMPLES;
    let step = 2.0 * rho / (n - 1) as f64;
    let mut offsets = Vec::new();
    for mut idx in 0..n.pow(d as u32) {
        let mut o = vec![0.0; d];
        for oj in o.iter_mut().rev() {
            *oj = -rho + step * (idx % n) as f64;
            idx /= n;
        }
        if norm(&o) <= rho + 1e-12 {
            offsets.push(o);
        }
    }
    let mut pts = Vec::new();
    for p in momentum.points() {
        for o in &offsets {
            let q: Vec<f64> = p.iter().zip(o).map(|(a, b)| a + b).collect();
            pts.push(sigma.gradient(&q));
        }
    }
    let slack = lip * step * (d as f64).sqrt();
    RegionSet::from_points(d, pts, slack)
}

fn product_all(sets: &[RegionSet]) -> Result<RegionSet> {
    let mut acc = convex_hull(&sets[0]);
    for s in &sets[1..] {
        acc = convex_hull(&acc.product(&convex_hull(s))?);
    }
    Ok(acc)
}

/// `min_{i<j} min_{c ∈ conv(C)} ‖c_i - c_j‖` for points in `ℝ^{n·d}`.
fn separation(c: &RegionSet, n: usize) -> f64 {
    let d = c.dim() / n;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let diffs: Vec<Vec<f64>> = c
                .points()
                .map(|p| (0..d).map(|k| p[i * d + k] - p[j * d + k]).collect())
                .collect();
            let refs: Vec<&[f64]> = diffs.iter().map(|v| v.as_slice()).collect();
            best = best.min(norm(&min_norm_point(&refs)));
        }
    }
    best
}

/// Evaluates every set of the inclusion chain at one δ.
pub fn chain_step(
    particles: &[ParticleSupports],
    sigma: &Dispersion,
    delta: f64,
) -> Result<ChainStep> {
    let lip = lipschitz_of_gradient(sigma)?;
    step_with(particles, sigma, delta, lip)
}

fn step_with(
    particles: &[ParticleSupports],
    sigma: &Dispersion,
    delta: f64,
    lip: f64,
) -> Result<ChainStep> {
    let n = particles.len();
    let h = product_all(&particles.iter().map(|p| p.h.clone()).collect::<Vec<_>>())?;
    let mut vel = Vec::with_capacity(n);
    let mut vel_wide = Vec::with_capacity(n);
    let mut r: f64 = 0.0;
    for p in particles {
        let v = fattened_velocities(&p.momentum, sigma, delta, lip)?;
        let w = fattened_velocities(&p.momentum, sigma, 2.0 * delta, lip)?;
        let d = w.dim();
        let center: Vec<f64> = (0..d)
            .map(|k| {
                let (lo, hi) = w
                    .points()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q[k]), b.max(q[k])));
                0.5 * (lo + hi)
            })
            .collect();
        let far = w
            .points()
            .map(|q| norm(&q.iter().zip(&center).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        r = r.max(far + w.delta());
        vel.push(v);
        vel_wide.push(w);
    }
    let vel = product_all(&vel)?;
    let vel_wide = product_all(&vel_wide)?;
    let radius = 2.0 * (n as f64).sqrt() * r + 4.0 * delta;

    // π_x supp(H₁ĝ') ⊂ supp H - Vel(ĝ'), then convexify and fatten by 2δ,
    // then add Vel(ĝ).
    let a1 = minkowski_sum(&h, &vel_wide.negate())?;
    let a2 = fatten(&convex_hull(&a1), 2.0 * delta)?;
    let a3 = convex_hull(&minkowski_sum(&a2, &vel)?);

    let hull_h = h.body();
    let slack = radius + h.delta() - a3.delta() + 1e-9;
    let inclusion_holds = a3.points().all(|q| hull_h.distance(q) <= slack);

    let sep_h = separation(&h, n);
    let bound_radius = radius + h.delta();
    let separation_bound = sep_h - std::f64::consts::SQRT_2 * bound_radius;
    let chain_separation = separation(&a3, n) - std::f64::consts::SQRT_2 * a3.delta();
    Ok(ChainStep {
        delta,
        velocity_radius: r,
        radius,
        separation: separation_bound,
        diagonal_distance: separation_bound / std::f64::consts::SQRT_2,
        chain_separation,
        inclusion_holds,
    })
}

/// Runs the chain, bisects for the largest δ in which the fattened hull stays off
/// the diagonal, and reports a decreasing δ ladder below `2 · threshold`.
pub fn check_convexity_chain(
    particles: &[ParticleSupports],
    sigma: &Dispersion,
    delta_max: f64,
    ladder_len: usize,
) -> Result<ConvexityReport> {
    let op = "check_convexity_chain";
    if particles.len() < 2 {
        return Err(Error::pre(op, "need at least two particles"));
    }
    let d = sigma.dim();
    for (i, p) in particles.iter().enumerate() {
        if p.h.dim() != d || p.momentum.dim() != d {
            return Err(Error::pre(op, format!("particle {i}: supports must have dimension {d}")));
        }
        if p.h.is_empty() || p.momentum.is_empty() {
            return Err(Error::pre(op, format!("particle {i}: empty support")));
        }
    }
    if !(delta_max > 0.0) {
        return Err(Error::pre(op, "delta_max must be positive"));
    }
    let n = particles.len();
    let h = product_all(&particles.iter().map(|p| p.h.clone()).collect::<Vec<_>>())?;
    let base_separation = separation(&h, n) - std::f64::consts::SQRT_2 * h.delta();
    if base_separation <= 0.0 {
        let pairs: Vec<String> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                super::hull_distance(&particles[i].h, &particles[j].h).unwrap_or(0.0) == 0.0
            })
            .map(|(i, j)| format!("({i},{j})"))
            .collect();
        return Err(Error::pre(
            op,
            format!(
                "(supp H)^cv meets the diagonal at delta = 0 (separation {base_separation:.3e}); overlapping velocity hulls for particle pairs {}",
                pairs.join(", ")
            ),
        ));
    }
    let lip = lipschitz_of_gradient(sigma)?;
    let sep = |delta: f64| step_with(particles, sigma, delta, lip).map(|s| s.separation);

    let mut lo = 0.0;
    let mut hi = delta_max;
    if sep(0.0)? <= 0.0 {
        hi = 0.0;
    } else {
        let mut grow = 0;
        while sep(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                return Err(Error::pre(op, "separation stays positive for every delta tried"));
            }
        }
        for _ in 0..60 {
            if hi - lo <= 1e-10 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if sep(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let threshold = lo;
    let top = if threshold > 0.0 { 2.0 * threshold } else { delta_max };
    let ladder = (0..ladder_len)
        .map(|k| step_with(particles, sigma, top / 2f64.powi(k as i32), lip))
        .collect::<Result<Vec<_>>>()?;
    let positive_below_threshold = threshold > 0.0
        && ladder
            .iter()
            .filter(|s| s.delta < threshold)
            .all(|s| s.separation > 0.0 && s.inclusion_holds);
    Ok(ConvexityReport {
        particles: n,
        base_separation,
        threshold,
        bisection_width: hi - lo,
        ladder,
        positive_below_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lo: f64, hi: f64) -> RegionSet {
        RegionSet::from_points(1, vec![vec![lo], vec![hi]], 0.0).unwrap()
    }

    fn point(p: f64) -> RegionSet {
        RegionSet::from_points(1, vec![vec![p]], 0.0).unwrap()
    }

    pub(crate) fn standard_fixture() -> Vec<ParticleSupports> {
        let p = 0.6f64.asin();
        vec![
            ParticleSupports {
                h: interval(0.5, 0.7),
                momentum: point(p),
            },
            ParticleSupports {
                h: interval(-0.7, -0.5),
                momentum: point(-p),
            },
        ]
    }

    #[test]
    fn standard_fixture_has_unit_clearance_and_positive_threshold() {
        let nn = Dispersion::nearest_neighbor(1, 1.0);
        let rep = check_convexity_chain(&standard_fixture(), &nn, 0.05, 8).unwrap();
        assert!((rep.base_separation - 1.0).abs() < 1e-12);
        assert!(rep.threshold > 0.0);
        assert!(rep.positive_below_threshold);
        assert!(rep.ladder.iter().all(|s| s.inclusion_holds));
        let at_zero = chain_step(&standard_fixture(), &nn, 0.0).unwrap();
        assert!((at_zero.separation - 1.0).abs() < 1e-12);
        assert!((at_zero.diagonal_distance - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_supports_rejected() {
        let nn = Dispersion::nearest_neighbor(1, 1.0);
        let same = vec![
            ParticleSupports {
                h: interval(0.5, 0.7),
                momentum: point(0.6),
            },
            ParticleSupports {
                h: interval(0.5, 0.7),
                momentum: point(0.6),
            },
        ];
        let err = check_convexity_chain(&same, &nn, 0.05, 4).unwrap_err();
        assert!(err.to_string().contains("(0,1)"));
    }
}
