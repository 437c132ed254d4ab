//! Dispersion relations, group velocities, free propagation and wave packets.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inverse_fourier, LatticeState, MomentumField, TorusGrid};
use crate::profile::{norm, Profile};
use crate::regions::RegionSet;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Samples per axis for the trigonometric interpolant of custom dispersions.
const SPECTRAL_SAMPLES_1D: usize = 256;
const SPECTRAL_SAMPLES_ND: usize = 64;

#[derive(Clone)]
enum Kind {
    NearestNeighbor { mass: f64 },
    IsingLike { lambda: f64 },
    Custom {
        sigma: ScalarFn,
        grad: Option<VectorFn>,
        spectral: Option<Arc<TrigInterpolant>>,
    },
}

/// Fourier coefficients of a periodic function sampled on an `nᵈ` grid.
struct TrigInterpolant {
    dim: usize,
    freqs: Vec<Vec<f64>>,
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    fn new(dim: usize, f: &ScalarFn) -> Self {
        let n = if dim == 1 {
            SPECTRAL_SAMPLES_1D
        } else {
            SPECTRAL_SAMPLES_ND
        };
        let total = n.pow(dim as u32);
        let axis = |mut i: usize| {
            let mut v = vec![0i64; dim];
            for o in v.iter_mut().rev() {
                *o = (i % n) as i64 - (n / 2) as i64 + 1;
                i /= n;
            }
            v
        };
        let h = 2.0 * PI / n as f64;
        let samples: Vec<(Vec<f64>, f64)> = (0..total)
            .map(|i| {
                let p: Vec<f64> = axis(i).iter().map(|k| *k as f64 * h).collect();
                let v = f(&p);
                (p, v)
            })
            .collect();
        let half = (n / 2) as i64;
        let mut freqs = Vec::new();
        let mut coeffs = Vec::new();
        for i in 0..total {
            let k = axis(i);
            if k.contains(&half) {
                continue;
            }
            let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
            let c: Complex64 = samples
                .iter()
                .map(|(p, v)| {
                    let ph: f64 = kf.iter().zip(p).map(|(a, b)| a * b).sum();
                    Complex64::from_polar(*v, -ph)
                })
                .sum::<Complex64>()
                / total as f64;
            freqs.push(kf);
            coeffs.push(c);
        }
        TrigInterpolant { dim, freqs, coeffs }
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (k, c) in self.freqs.iter().zip(&self.coeffs) {
            let ph: f64 = k.iter().zip(p).map(|(a, b)| a * b).sum();
            let e = c * Complex64::from_polar(1.0, ph);
            for (gj, kj) in g.iter_mut().zip(k) {
                *gj += (e * Complex64::new(0.0, *kj)).re;
            }
        }
        g
    }
}

/// A smooth periodic dispersion `Σ` on `]-π, π]ᵈ` with its gradient.
#[derive(Clone)]
pub struct Dispersion {
    name: String,
    params: BTreeMap<String, f64>,
    dim: usize,
    kind: Kind,
}

impl fmt::Debug for Dispersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dispersion")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Serializable description of a builtin dispersion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl DispersionSpec {
    pub fn nearest_neighbor(mass: f64) -> Self {
        DispersionSpec {
            name: "nearest-neighbor".into(),
            params: BTreeMap::from([("mass".to_string(), mass)]),
        }
    }

    pub fn ising_like(lambda: f64) -> Self {
        DispersionSpec {
            name: "ising-like".into(),
            params: BTreeMap::from([("lambda".to_string(), lambda)]),
        }
    }

    pub fn build(&self, dim: usize) -> Result<Dispersion> {
        builtin_dispersion(&self.name, &self.params, dim)
    }
}

/// Builds `nearest-neighbor` (`m + Σ_j (1 - cos p_j)`, param `mass`, default 1)
/// or `ising-like` (`√(1 + λ² - 2λ cos p)`, d = 1, param `lambda`).
pub fn builtin_dispersion(
    name: &str,
    params: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<Dispersion> {
    let op = "builtin_dispersion";
    if dim == 0 {
        return Err(Error::pre(op, "dimension must be positive"));
    }
    let allowed: &[&str] = match name {
        "nearest-neighbor" => &["mass"],
        "ising-like" => &["lambda"],
        _ => return Err(Error::pre(op, format!("unknown dispersion '{name}'"))),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::pre(op, format!("unknown parameter '{k}' for {name}")));
    }
    if params.values().any(|v| !v.is_finite()) {
        return Err(Error::pre(op, "non-finite parameter"));
    }
    let kind = match name {
        "nearest-neighbor" => Kind::NearestNeighbor {
            mass: params.get("mass").copied().unwrap_or(1.0),
        },
        _ => {
            if dim != 1 {
                return Err(Error::pre(op, "ising-like dispersion is one-dimensional"));
            }
            let lambda = *params
                .get("lambda")
                .ok_or_else(|| Error::pre(op, "ising-like needs 'lambda'"))?;
            if (lambda.abs() - 1.0).abs() < 1e-12 {
                return Err(Error::pre(
                    op,
                    "|lambda| = 1 makes the dispersion vanish and lose smoothness",
                ));
            }
            Kind::IsingLike { lambda }
        }
    };
    Ok(Dispersion {
        name: name.to_string(),
        params: params.clone(),
        dim,
        kind,
    })
}

impl Dispersion {
    pub fn nearest_neighbor(dim: usize, mass: f64) -> Self {
        DispersionSpec::nearest_neighbor(mass)
            .build(dim)
            .expect("valid nearest-neighbor parameters")
    }

    pub fn ising_like(lambda: f64) -> Result<Self> {
        DispersionSpec::ising_like(lambda).build(1)
    }

    /// A user-supplied dispersion. Without `grad` the gradient comes from
    /// spectral differentiation of a sampled trigonometric interpolant.
    pub fn custom(name: &str, dim: usize, sigma: ScalarFn, grad: Option<VectorFn>) -> Self {
        let spectral = grad
            .is_none()
            .then(|| Arc::new(TrigInterpolant::new(dim, &sigma)));
        Dispersion {
            name: name.to_string(),
            params: BTreeMap::new(),
            dim,
            kind: Kind::Custom {
                sigma,
                grad,
                spectral,
            },
        }
    }

    /// The zero dispersion, for which free evolution is trivial.
    pub fn zero(dim: usize) -> Self {
        Dispersion::custom(
            "zero",
            dim,
            Arc::new(|_| 0.0),
            Some(Arc::new(move |p: &[f64]| vec![0.0; p.len()])),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `"analytic"` or `"spectral"`.
    pub fn gradient_source(&self) -> &'static str {
        match &self.kind {
            Kind::Custom { grad: None, .. } => "spectral",
            _ => "analytic",
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        match &self.kind {
            Kind::NearestNeighbor { mass } => mass + p.iter().map(|q| 1.0 - q.cos()).sum::<f64>(),
            Kind::IsingLike { lambda } => {
                (1.0 + lambda * lambda - 2.0 * lambda * p[0].cos()).sqrt()
            }
            Kind::Custom { sigma, .. } => sigma(p),
        }
    }

    /// Group velocity `∇Σ(p)`.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::NearestNeighbor { .. } => p.iter().map(|q| q.sin()).collect(),
            Kind::IsingLike { lambda } => vec![lambda * p[0].sin() / self.value(p)],
            Kind::Custom {
                grad: Some(g), ..
            } => g(p),
            Kind::Custom { spectral, .. } => spectral
                .as_ref()
                .expect("spectral interpolant present without analytic gradient")
                .gradient(p),
        }
    }

    /// Hessian, row-major `d × d`.
    pub fn hessian(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dim;
        match &self.kind {
            Kind::NearestNeighbor { .. } => {
                let mut h = vec![0.0; d * d];
                for j in 0..d {
                    h[j * d + j] = p[j].cos();
                }
                h
            }
            Kind::IsingLike { lambda } => {
                let s = self.value(p);
                let (sn, cs) = p[0].sin_cos();
                vec![(lambda * cs * s * s - lambda * lambda * sn * sn) / (s * s * s)]
            }
            Kind::Custom { .. } => {
                let eps = 1e-5;
                let mut h = vec![0.0; d * d];
                for j in 0..d {
                    let mut a = p.to_vec();
                    let mut b = p.to_vec();
                    a[j] += eps;
                    b[j] -= eps;
                    let (ga, gb) = (self.gradient(&a), self.gradient(&b));
                    for i in 0..d {
                        h[i * d + j] = (ga[i] - gb[i]) / (2.0 * eps);
                    }
                }
                h
            }
        }
    }

    /// `(min Σ, max Σ)` over the momentum grid.
    pub fn band(&self, grid: &TorusGrid) -> (f64, f64) {
        (0..grid.len())
            .map(|i| self.value(&grid.momentum(i)))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// `max |∇Σ|` over the momentum grid.
    pub fn max_speed(&self, grid: &TorusGrid) -> f64 {
        (0..grid.len())
            .map(|i| norm(&self.gradient(&grid.momentum(i))))
            .fold(0.0, f64::max)
    }

    /// `Σ` sampled by momentum index.
    pub fn sample(&self, grid: &TorusGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(&grid.momentum(i))).collect()
    }

    /// Multiplier `e^{-iΣ(p)t}` by momentum index.
    pub fn propagator(&self, grid: &TorusGrid, t: f64) -> Vec<Complex64> {
        (0..grid.len())
            .map(|i| Complex64::from_polar(1.0, -self.value(&grid.momentum(i)) * t))
            .collect()
    }

    /// Free evolution `e^{-iΣ(D)t}ψ`.
    pub fn evolve(&self, state: &LatticeState, t: f64) -> LatticeState {
        crate::grid::apply_multiplier_values(state, &self.propagator(&state.grid, t))
    }

    /// Grid momenta where `|det Hess Σ| <= tol · max |det Hess Σ|`, plus
    /// sign changes of the determinant between neighbors along the first axis.
    pub fn hessian_vanishing_set(&self, grid: &TorusGrid, tol: f64) -> Vec<Vec<f64>> {
        let dets: Vec<f64> = (0..grid.len())
            .map(|i| determinant(&self.hessian(&grid.momentum(i)), self.dim))
            .collect();
        let max = dets.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l = grid.side();
        let stride = l.pow((self.dim - 1) as u32);
        (0..grid.len())
            .filter(|&i| {
                if dets[i].abs() <= tol * max {
                    return true;
                }
                let next = (i + stride) % grid.len();
                dets[i].signum() != dets[next].signum() && dets[i].abs() <= dets[next].abs()
            })
            .map(|i| grid.momentum(i))
            .collect()
    }
}

fn determinant(m: &[f64], d: usize) -> f64 {
    nalgebra::DMatrix::from_row_slice(d, d, m).determinant()
}

/// A Haag-Ruelle wave packet: momentum profile `ĝ`, weight `k^β` and time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavePacket {
    pub profile: Profile,
    #[serde(default)]
    pub beta: Vec<u32>,
    #[serde(default)]
    pub time: f64,
}

pub const MAX_BETA: u32 = 6;

impl WavePacket {
    pub fn new(profile: Profile) -> Self {
        WavePacket {
            profile,
            beta: Vec::new(),
            time: 0.0,
        }
    }

    pub fn at(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn with_beta(mut self, beta: &[u32]) -> Self {
        self.beta = beta.to_vec();
        self
    }

    /// Rejects packets whose momentum support touches the cube boundary.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let op = "wave_packet_state";
        self.profile.validate(dim)?;
        if !self.beta.is_empty() && self.beta.len() != dim {
            return Err(Error::pre(op, format!("beta has {} entries, dim {dim}", self.beta.len())));
        }
        if self.beta.iter().sum::<u32>() > MAX_BETA {
            return Err(Error::pre(op, format!("|beta| exceeds {MAX_BETA}")));
        }
        let (Some(c), Some(r)) = (self.profile.center(), self.profile.support_radius()) else {
            return Err(Error::pre(op, "momentum profile must be compactly supported"));
        };
        if c.iter().any(|cj| cj.abs() + r >= PI) {
            return Err(Error::pre(
                op,
                "momentum support touches the boundary of ]-pi, pi]^d",
            ));
        }
        Ok(())
    }

    /// `ĝ(p) p^β` (without the time phase).
    pub fn weight(&self, p: &[f64]) -> f64 {
        let mono: f64 = self
            .beta
            .iter()
            .zip(p)
            .map(|(b, q)| q.powi(*b as i32))
            .product();
        self.profile.value(p) * mono
    }
}

/// `g_t(x) = (2π)^{-d/2} ∫ dp e^{-iΣ(p)t + ip·x} ĝ(p) p^β` on the grid.
pub fn wave_packet_state(
    w: &WavePacket,
    sigma: &Dispersion,
    grid: &TorusGrid,
) -> Result<LatticeState> {
    if sigma.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sigma.dim(),
        });
    }
    w.validate(grid.dim())?;
    let field = MomentumField::from_fn(*grid, |p| {
        Complex64::from_polar(w.weight(p), -sigma.value(p) * w.time)
    });
    Ok(inverse_fourier(&field))
}

/// Grid momenta where the profile is nonzero.
pub fn momentum_support(profile: &Profile, grid: &TorusGrid) -> RegionSet {
    let pts: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| grid.momentum(i))
        .filter(|p| profile.value(p) != 0.0)
        .collect();
    RegionSet::from_points(grid.dim(), pts, 0.0).expect("consistent dimensions")
}

/// `Vel(S) = {∇Σ(p) : p ∈ S}` as a point cloud.
pub fn velocity_support(support: &RegionSet, sigma: &Dispersion) -> Result<RegionSet> {
    if support.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: support.dim(),
        });
    }
    let pts = support.points().map(|p| sigma.gradient(p)).collect();
    RegionSet::from_points(sigma.dim(), pts, 0.0)
}

/// Regions of velocity space used by [`cone_leakage`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityRegion {
    Empty,
    Everything,
    /// `{v : |v - center| > radius}`.
    OutsideBall { center: Vec<f64>, radius: f64 },
}

impl VelocityRegion {
    pub fn contains(&self, v: &[f64]) -> bool {
        match self {
            VelocityRegion::Empty => false,
            VelocityRegion::Everything => true,
            VelocityRegion::OutsideBall { center, radius } => {
                let d: Vec<f64> = v.iter().zip(center).map(|(a, b)| a - b).collect();
                norm(&d) > *radius
            }
        }
    }

    /// Distance from the region's closure to a velocity cloud, positive when disjoint.
    pub fn clearance(&self, cloud: &RegionSet) -> f64 {
        match self {
            VelocityRegion::Empty => f64::INFINITY,
            VelocityRegion::Everything => f64::NEG_INFINITY,
            VelocityRegion::OutsideBall { center, radius } => {
                let far = cloud
                    .points()
                    .map(|p| {
                        let d: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
                        norm(&d)
                    })
                    .fold(0.0, f64::max);
                radius - far - cloud.delta()
            }
        }
    }
}

/// ℓ² mass of `g_s` restricted to `{x : x/s ∈ outside}`.
pub fn cone_leakage(
    w: &WavePacket,
    sigma: &Dispersion,
    grid: &TorusGrid,
    outside: &VelocityRegion,
    s: f64,
) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::pre("cone_leakage", "s must be positive"));
    }
    if let VelocityRegion::OutsideBall { .. } = outside {
        let vel = velocity_support(&momentum_support(&w.profile, grid), sigma)?;
        let c = outside.clearance(&vel);
        if c <= 0.0 {
            return Err(Error::pre(
                "cone_leakage",
                format!("region overlaps the velocity support (clearance {c:.3e})"),
            ));
        }
    }
    let packet = WavePacket {
        time: s,
        ..w.clone()
    };
    let g = wave_packet_state(&packet, sigma, grid)?;
    let mass: f64 = g
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let v: Vec<f64> = grid.position_f64(*i).iter().map(|x| x / s).collect();
            outside.contains(&v)
        })
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(mass.sqrt())
}
