//! One-particle toy detector: lattice Hamiltonians `H = Σ(D) + V`, exact
//! propagation, Cook's method, detector expectations, the compactness chain and
//! the rank-one (Bostelmann) expansion of `ĝ(D) H₀(x/t) ĝ(D)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{apply_multiplier_values, fourier, LatticeState, MomentumField, TorusGrid};
use crate::profile::{norm, Profile};
use crate::regions::{Cone, RegionSet};
use crate::weyl::LatticeOperator;

/// Largest dense Hamiltonian (number of sites).
pub const MAX_DENSE_SITES: usize = 4096;

/// Real potentials on positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// `-depth · exp(-|x - center|² / 2 width²)`.
    GaussianWell {
        depth: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// `height · exp(-|x - center|² / 2 width²)`.
    GaussianBarrier {
        height: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// `-depth` on a single site.
    KroneckerWell { depth: f64, site: Vec<i64> },
    /// `height · bump(|x - center| / radius)`, compactly supported.
    Bump {
        height: f64,
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        sharpness: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Potential {
    pub fn sample(&self, grid: &TorusGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let x = grid.position_f64(i);
                match self {
                    Potential::Zero => 0.0,
                    Potential::GaussianWell {
                        depth,
                        width,
                        center,
                    } => -depth * gauss(&x, center, *width),
                    Potential::GaussianBarrier {
                        height,
                        width,
                        center,
                    } => height * gauss(&x, center, *width),
                    Potential::KroneckerWell { depth, site } => {
                        if grid.position_index(site) == i {
                            -depth
                        } else {
                            0.0
                        }
                    }
                    Potential::Bump {
                        height,
                        center,
                        radius,
                        sharpness,
                    } => height * Profile::bump(center, *radius, *sharpness).value(&x),
                }
            })
            .collect()
    }
}

fn gauss(x: &[f64], c: &[f64], w: f64) -> f64 {
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
    (-r2 / (2.0 * w * w)).exp()
}

#[derive(Clone, Debug)]
enum Spectrum {
    /// Plane waves; eigenvalues by momentum index.
    Free(Vec<f64>),
    Dense {
        values: Vec<f64>,
        vectors: DMatrix<Complex64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelOptions {
    /// Diagonalize densely even when `V = 0`.
    pub force_dense: bool,
    /// Eigenvalues farther than this outside the band count as bound states.
    pub bound_margin: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            force_dense: false,
            bound_margin: 1e-6,
        }
    }
}

/// `H = Σ(D) + V` with its spectral decomposition.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    grid: TorusGrid,
    sigma: Dispersion,
    potential: Vec<f64>,
    band: (f64, f64),
    spectrum: Spectrum,
    options: ModelOptions,
    sigma_values: Vec<f64>,
}

impl HamiltonianModel {
    pub fn new(
        grid: TorusGrid,
        sigma: Dispersion,
        potential: Vec<f64>,
        options: ModelOptions,
    ) -> Result<Self> {
        if sigma.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: sigma.dim(),
            });
        }
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: potential.len(),
            });
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::pre("HamiltonianModel", "non-finite potential"));
        }
        let sigma_values = sigma.sample(&grid);
        let band = sigma.band(&grid);
        let free = potential.iter().all(|v| *v == 0.0);
        let spectrum = if free && !options.force_dense {
            Spectrum::Free(sigma_values.clone())
        } else {
            if grid.len() > MAX_DENSE_SITES {
                return Err(Error::pre(
                    "HamiltonianModel",
                    format!("dense diagonalization limited to {MAX_DENSE_SITES} sites"),
                ));
            }
            let h = dense_hamiltonian(&grid, &sigma_values, &potential);
            diagonalize(h)?
        };
        Ok(HamiltonianModel {
            grid,
            sigma,
            potential,
            band,
            spectrum,
            options,
            sigma_values,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dispersion(&self) -> &Dispersion {
        &self.sigma
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn band(&self) -> (f64, f64) {
        self.band
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = match &self.spectrum {
            Spectrum::Free(v) => v.clone(),
            Spectrum::Dense { values, .. } => values.clone(),
        };
        v.sort_by(f64::total_cmp);
        v
    }

    /// Eigenpairs whose eigenvalue lies outside the band by more than the margin,
    /// deepest first.
    pub fn bound_states(&self) -> Vec<(f64, LatticeState)> {
        let Spectrum::Dense { values, vectors } = &self.spectrum else {
            return Vec::new();
        };
        let (lo, hi) = self.band;
        let m = self.options.bound_margin;
        let mut out: Vec<(f64, LatticeState)> = values
            .iter()
            .enumerate()
            .filter(|(_, &e)| e < lo - m || e > hi + m)
            .map(|(j, &e)| {
                (
                    e,
                    LatticeState {
                        grid: self.grid,
                        amplitudes: vectors.column(j).iter().copied().collect(),
                    },
                )
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Orthogonal projection onto the span of the bound states.
    pub fn bound_projection(&self, psi: &LatticeState) -> LatticeState {
        let mut acc = LatticeState::zeros(self.grid);
        for (_, v) in self.bound_states() {
            acc = acc.add(&v.scale(v.inner(psi)));
        }
        acc
    }

    /// `max_j ‖H v_j - λ_j v_j‖`.
    pub fn max_eigen_residual(&self) -> f64 {
        match &self.spectrum {
            Spectrum::Free(_) => 0.0,
            Spectrum::Dense { values, vectors } => {
                let h = dense_hamiltonian(&self.grid, &self.sigma_values, &self.potential);
                let hv = &h * vectors;
                (0..values.len())
                    .map(|j| (hv.column(j) - vectors.column(j) * Complex64::new(values[j], 0.0)).norm())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// `e^{-itH₀}ψ`.
    pub fn free_evolve(&self, psi: &LatticeState, t: f64) -> LatticeState {
        let m: Vec<Complex64> = self
            .sigma_values
            .iter()
            .map(|s| Complex64::from_polar(1.0, -s * t))
            .collect();
        apply_multiplier_values(psi, &m)
    }

    /// `e^{-itH}ψ`.
    pub fn evolve(&self, psi: &LatticeState, t: f64) -> Result<LatticeState> {
        if psi.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        match &self.spectrum {
            Spectrum::Free(_) => Ok(self.free_evolve(psi, t)),
            Spectrum::Dense { values, vectors } => {
                let v = DVector::from_column_slice(&psi.amplitudes);
                let mut c = vectors.ad_mul(&v);
                for (cj, e) in c.iter_mut().zip(values) {
                    *cj *= Complex64::from_polar(1.0, -e * t);
                }
                Ok(LatticeState {
                    grid: self.grid,
                    amplitudes: (vectors * c).as_slice().to_vec(),
                })
            }
        }
    }

    /// `Vψ`.
    pub fn apply_potential(&self, psi: &LatticeState) -> LatticeState {
        LatticeState {
            grid: self.grid,
            amplitudes: psi
                .amplitudes
                .iter()
                .zip(&self.potential)
                .map(|(a, v)| a * v)
                .collect(),
        }
    }
}

fn dense_hamiltonian(grid: &TorusGrid, sigma: &[f64], v: &[f64]) -> DMatrix<Complex64> {
    let m: Vec<Complex64> = sigma.iter().map(|s| Complex64::new(*s, 0.0)).collect();
    let mut h = LatticeOperator::multiplier(*grid, &m).kernel;
    for (i, vi) in v.iter().enumerate() {
        h[(i, i)] += vi;
    }
    h
}

fn diagonalize(h: DMatrix<Complex64>) -> Result<Spectrum> {
    let n = h.nrows();
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let real = h.iter().all(|v| v.im.abs() <= 1e-14 * scale);
    let check = |vals: &[f64]| {
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Eigen("non-finite eigenvalues".into()))
        }
    };
    if real {
        let hr = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
        let eig = SymmetricEigen::try_new(hr, 1e-15, 10_000)
            .ok_or_else(|| Error::Eigen("real symmetric eigensolver did not converge".into()))?;
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        check(&values)?;
        Ok(Spectrum::Dense {
            values,
            vectors: eig.eigenvectors.map(|v| Complex64::new(v, 0.0)),
        })
    } else {
        let hh = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::try_new(hh, 1e-15, 10_000)
            .ok_or_else(|| Error::Eigen("Hermitian eigensolver did not converge".into()))?;
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        check(&values)?;
        Ok(Spectrum::Dense {
            values,
            vectors: eig.eigenvectors,
        })
    }
}

/// Detector data: momentum cutoff `χ` and velocity window `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub chi: Profile,
    pub h: Profile,
    /// Enforce `Vel(supp χ) ⊂ supp h`, convex `supp h` and `0 ∉ supp h`.
    #[serde(default)]
    pub enforce_support_constraints: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// `{∇Σ(p) : p ∈ supp χ} ⊂ supp h` on the grid.
    pub velocity_reading: bool,
    /// `supp χ ⊂ supp h` read literally, as subsets of the same space.
    pub momentum_reading: bool,
    pub h_support_convex: bool,
    pub origin_outside_h: bool,
}

impl SupportReport {
    pub fn all_hold(&self) -> bool {
        self.velocity_reading && self.h_support_convex && self.origin_outside_h
    }
}

impl DetectorSpec {
    pub fn support_report(&self, sigma: &Dispersion, grid: &TorusGrid) -> SupportReport {
        let chi_support: Vec<Vec<f64>> = grid
            .momenta()
            .into_iter()
            .filter(|p| self.chi.value(p) != 0.0)
            .collect();
        let velocity_reading = chi_support
            .iter()
            .all(|p| self.h.value(&sigma.gradient(p)) > 0.0);
        let momentum_reading = chi_support.iter().all(|p| self.h.value(p) > 0.0);
        let h_support_convex = !matches!(self.h, Profile::Annulus { .. });
        let zero = vec![0.0; grid.dim()];
        SupportReport {
            velocity_reading,
            momentum_reading,
            h_support_convex,
            origin_outside_h: self.h.value(&zero) == 0.0,
        }
    }

    fn check(&self, sigma: &Dispersion, grid: &TorusGrid, op: &'static str) -> Result<SupportReport> {
        self.chi.validate(grid.dim())?;
        self.h.validate(grid.dim())?;
        let rep = self.support_report(sigma, grid);
        if self.enforce_support_constraints && !rep.all_hold() {
            return Err(Error::pre(op, format!("detector support constraints violated: {rep:?}")));
        }
        Ok(rep)
    }

    /// `χ(D) h(x/t) χ(D) φ`.
    fn apply(&self, phi: &LatticeState, t: f64) -> LatticeState {
        let chi = chi_values(&self.chi, &phi.grid);
        let a = apply_multiplier_values(phi, &chi);
        let b = a.multiply_by(|x| {
            let v: Vec<f64> = x.iter().map(|c| c / t).collect();
            self.h.value(&v)
        });
        apply_multiplier_values(&b, &chi)
    }
}

fn chi_values(chi: &Profile, grid: &TorusGrid) -> Vec<Complex64> {
    (0..grid.len())
        .map(|m| Complex64::new(chi.value(&grid.momentum(m)), 0.0))
        .collect()
}

/// `⟨ψ, c_t ψ⟩` with `c_t = e^{itH} χ(D) h(x/t) χ(D) e^{-itH}`.
pub fn detector_expectation(
    m: &HamiltonianModel,
    spec: &DetectorSpec,
    psi: &LatticeState,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::pre("detector_expectation", "t must be positive"));
    }
    spec.check(&m.sigma, &m.grid, "detector_expectation")?;
    let phi = m.evolve(psi, t)?;
    let chi = chi_values(&spec.chi, &m.grid);
    let a = apply_multiplier_values(&phi, &chi);
    Ok(a
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x: Vec<f64> = m.grid.position_f64(i).iter().map(|c| c / t).collect();
            spec.h.value(&x) * v.norm_sqr()
        })
        .sum())
}

/// Free stationary-phase limit `Σ_k h(∇Σ(p_k)) |χ(p_k) ψ̂(p_k)|² (2π/L)ᵈ`.
pub fn free_limit_oracle(sigma: &Dispersion, spec: &DetectorSpec, psi: &LatticeState) -> f64 {
    let grid = psi.grid;
    let f = fourier(psi);
    let w = grid.spacing().powi(grid.dim() as i32);
    f.values
        .iter()
        .enumerate()
        .map(|(m, v)| {
            let p = grid.momentum(m);
            spec.h.value(&sigma.gradient(&p)) * (spec.chi.value(&p) * v.norm()).powi(2) * w
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub times: Vec<f64>,
    /// `‖c_t ψ⊥‖`.
    pub detector_norm: Vec<f64>,
    /// `∫_t^{s_max} ‖χ h(x/t) χ e^{i(s-t)H₀} V e^{-isH} ψ⊥‖ ds`.
    pub tail_proxy: Vec<f64>,
    pub tail_horizon: f64,
    pub onset_time: f64,
    pub monotone_past_onset: bool,
    pub threshold: f64,
    /// First grid time with `‖c_t ψ⊥‖ < threshold`.
    pub decayed_at: Option<f64>,
    pub inconclusive: bool,
    pub cone_checks: usize,
    pub cone_violations: usize,
    pub supports: SupportReport,
}

/// Absolute slack allowed in monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Index of the maximum and whether the sequence is non-increasing afterwards.
pub fn monotone_after_peak(values: &[f64]) -> (usize, bool) {
    let peak = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mono = values[peak..]
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    (peak, mono)
}

/// Velocity set `K = conv(supp h ∪ {0})` used by the cone check.
fn detector_cone(h: &Profile, dim: usize) -> Result<RegionSet> {
    let zero = vec![0.0; dim];
    let (Some(c), Some(r)) = (h.center(), h.support_radius()) else {
        return RegionSet::ball(&zero, 0.0);
    };
    let mut pts = vec![zero];
    if dim == 1 {
        pts.push(vec![c[0] - r]);
        pts.push(vec![c[0] + r]);
        return RegionSet::from_points(1, pts, 0.0);
    }
    // Circumscribed polytope of the support ball in higher dimensions.
    let k = 64;
    for i in 0..k {
        let th = 2.0 * PI * i as f64 / k as f64;
        let mut p = c.to_vec();
        p[0] += r / (PI / k as f64).cos() * th.cos();
        p[1] += r / (PI / k as f64).cos() * th.sin();
        pts.push(p);
    }
    RegionSet::from_points(dim, pts, 0.0)
}

/// Tracks `‖c_t ψ⊥‖` and its tail proxy over `times` for `ψ⊥` in the bound-state
/// span, and checks the cone inequality for the indicator of `conv(supp h ∪ {0})`.
pub fn compactness_chain_study(
    m: &HamiltonianModel,
    spec: &DetectorSpec,
    psi_perp: &LatticeState,
    times: &[f64],
    tail_steps: usize,
    threshold: f64,
    exec: Exec,
) -> Result<CompactnessReport> {
    let op = "compactness_chain_study";
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
        return Err(Error::pre(op, "times must be positive and strictly increasing"));
    }
    let supports = spec.check(&m.sigma, &m.grid, op)?;
    let defect = psi_perp.sub(&m.bound_projection(psi_perp)).norm();
    if defect > 1e-9 * psi_perp.norm().max(1.0) {
        return Err(Error::pre(
            op,
            format!("state is not in the bound-state span (defect {defect:.3e})"),
        ));
    }
    let horizon = 2.0 * times[times.len() - 1];
    let steps = tail_steps.max(2);
    let per_t: Vec<Result<(f64, f64)>> = exec.map(times, |&t| {
        let phi = m.evolve(psi_perp, t)?;
        let c_norm = spec.apply(&phi, t).norm();
        let ds = (horizon - t) / steps as f64;
        let mut integral = 0.0;
        for j in 0..=steps {
            let s = t + ds * j as f64;
            let vs = m.apply_potential(&m.evolve(psi_perp, s)?);
            let back = m.free_evolve(&vs, -(s - t));
            let val = spec.apply(&back, t).norm();
            let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
            integral += w * val * ds;
        }
        Ok((c_norm, integral))
    });
    let mut detector_norm = Vec::new();
    let mut tail_proxy = Vec::new();
    for r in per_t {
        let (a, b) = r?;
        detector_norm.push(a);
        tail_proxy.push(b);
    }
    let (peak, monotone_past_onset) = monotone_after_peak(&detector_norm);
    let decayed_at = times
        .iter()
        .zip(&detector_norm)
        .find(|(_, v)| **v < threshold)
        .map(|(t, _)| *t);

    let cone = Cone::new(&detector_cone(&spec.h, m.grid.dim())?)?;
    let mut checks = 0;
    let mut violations = 0;
    for i in 0..m.grid.len() {
        let x = m.grid.position_f64(i);
        for (a, &t) in times.iter().enumerate() {
            for &s in &times[a..] {
                let (first, second) = cone.check(&x, t, s)?;
                checks += 1;
                if first && !second {
                    violations += 1;
                }
            }
        }
    }
    Ok(CompactnessReport {
        times: times.to_vec(),
        detector_norm,
        tail_proxy,
        tail_horizon: horizon,
        onset_time: times[peak],
        monotone_past_onset,
        threshold,
        decayed_at,
        inconclusive: decayed_at.is_none(),
        cone_checks: checks,
        cone_violations: violations,
        supports,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CookResult {
    /// `W_T ψ = e^{iTH} e^{-iTH₀} ψ`.
    pub state: LatticeState,
    /// `(s, ‖V e^{-isH₀} ψ‖)` on `[0, T]`.
    pub integrand: Vec<(f64, f64)>,
    /// `‖e^{-iσH} W_T ψ - W_T e^{-iσH₀} ψ‖` for `σ = step`.
    pub intertwining_residual: f64,
    pub warnings: Vec<String>,
}

/// Minimum group speed over the significant momentum support of `ψ`.
pub fn min_group_speed(psi: &LatticeState, sigma: &Dispersion) -> f64 {
    let f = fourier(psi);
    let max = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    f.values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 1e-8 * max)
        .map(|(m, _)| norm(&sigma.gradient(&psi.grid.momentum(m))))
        .fold(f64::INFINITY, f64::min)
}

/// Fraction of the norm allowed outside [`spatial_reach`].
pub const REACH_TAIL: f64 = 1e-6;

/// Smallest radius around the origin outside which `ψ` carries at most
/// `REACH_TAIL · ‖ψ‖` of its norm.
pub fn spatial_reach(psi: &LatticeState) -> f64 {
    let total = psi.norm_sqr();
    if total == 0.0 {
        return 0.0;
    }
    let mut by_radius: Vec<(f64, f64)> = psi
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, v)| (norm(&psi.grid.position_f64(i)), v.norm_sqr()))
        .collect();
    by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
    let budget = (REACH_TAIL * REACH_TAIL) * total;
    let mut tail = 0.0;
    for (r, w) in by_radius {
        tail += w;
        if tail > budget {
            return r;
        }
    }
    0.0
}

/// Minimum group speed below which Cook's method is refused.
pub const MIN_GROUP_SPEED: f64 = 1e-3;

/// Integrand of Cook's method, `‖V e^{-isH₀} ψ‖`.
pub fn cook_integrand(m: &HamiltonianModel, psi: &LatticeState, s: f64) -> f64 {
    m.apply_potential(&m.free_evolve(psi, s)).norm()
}

/// Cook's method: `W_T ψ` with the integrand sampled every `step` on `[0, T]`.
pub fn cook_wave_operator(
    m: &HamiltonianModel,
    psi: &LatticeState,
    t_final: f64,
    step: f64,
) -> Result<CookResult> {
    let op = "cook_wave_operator";
    if !(t_final >= 0.0 && step > 0.0) {
        return Err(Error::pre(op, "need T >= 0 and step > 0"));
    }
    let speed = min_group_speed(psi, &m.sigma);
    if speed < MIN_GROUP_SPEED {
        return Err(Error::pre(
            op,
            format!("state has momentum support where the group velocity vanishes (min speed {speed:.2e})"),
        ));
    }
    let reach = spatial_reach(psi) + m.sigma.max_speed(&m.grid) * t_final;
    if reach >= m.grid.side() as f64 / 2.0 {
        return Err(Error::pre(op, format!("no-wrap violated: reach {reach:.1} >= L/2")));
    }
    let state = m.evolve(&m.free_evolve(psi, t_final), -t_final)?;
    let n = (t_final / step).ceil() as usize;
    let integrand: Vec<(f64, f64)> = (0..=n)
        .map(|j| {
            let s = (j as f64 * step).min(t_final);
            (s, cook_integrand(m, psi, s))
        })
        .collect();
    let lhs = m.evolve(&state, step)?;
    let rhs = m.evolve(&m.free_evolve(psi, t_final + step), -t_final)?;
    let intertwining_residual = lhs.sub(&rhs).norm();
    let mut warnings = Vec::new();
    if integrand.len() >= 8 {
        let k = integrand.len();
        let mid = integrand[k / 2].1;
        let last = integrand[k - 1].1;
        if last > 1e-13 && last > 0.5 * mid {
            warnings.push(format!(
                "integrand plateaus ({mid:.3e} at T/2, {last:.3e} at T): wrap-around or slow packet"
            ));
        }
    }
    Ok(CookResult {
        state,
        integrand,
        intertwining_residual,
        warnings,
    })
}

/// Composite Simpson quadrature of `‖V e^{-isH₀} ψ‖` over `[a, b]` with `2n` panels.
pub fn cook_integral(m: &HamiltonianModel, psi: &LatticeState, a: f64, b: f64, n: usize) -> f64 {
    let panels = 2 * n.max(1);
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for j in 0..=panels {
        let w = if j == 0 || j == panels {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * cook_integrand(m, psi, a + h * j as f64);
    }
    s * h / 3.0
}

/// Quadrature nodes on the support of `H₀`.
const MOMENT_NODES: usize = 4001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BostelmannReport {
    /// Highest order whose increment exceeded the tolerance.
    pub order: usize,
    /// Highest order summed.
    pub orders_summed: usize,
    pub converged: bool,
    /// `‖T₀ - S_N‖` against the ℓ = 0 comb term.
    pub truncation_residual: f64,
    /// `‖LHS - T₀‖`, the ℓ ≠ 0 comb remainder.
    pub comb_remainder: f64,
    /// `‖LHS - S_N‖` against the exact lattice operator.
    pub full_residual: f64,
    /// Norm of the last order's increment.
    pub tail_increment: f64,
    pub increments: Vec<f64>,
}

struct MomentData {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

fn quadrature(h0: &Profile) -> Result<Option<MomentData>> {
    if h0.is_zero() {
        return Ok(None);
    }
    let (Some(c), Some(r)) = (h0.center(), h0.support_radius()) else {
        return Err(Error::pre("bostelmann_truncation", "H0 must be compactly supported"));
    };
    let (a, b) = (c[0] - r, c[0] + r);
    let n = MOMENT_NODES;
    let h = (b - a) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|j| a + h * j as f64).collect();
    let weights: Vec<f64> = (0..n)
        .map(|j| if j == 0 || j == n - 1 { 0.5 * h } else { h })
        .collect();
    let values = nodes.iter().map(|x| h0.value(&[*x])).collect();
    Ok(Some(MomentData {
        nodes,
        weights,
        values,
    }))
}

fn check_bostelmann(ghat: &Profile, h0: &Profile, grid: &TorusGrid, t: f64) -> Result<()> {
    let op = "bostelmann_truncation";
    if grid.dim() != 1 {
        return Err(Error::pre(op, "only d = 1 is supported"));
    }
    if !(t > 0.0) {
        return Err(Error::pre(op, "t must be positive"));
    }
    ghat.validate(1)?;
    h0.validate(1)?;
    if let Some(reach) = h0.reach() {
        if reach * t >= grid.side() as f64 / 2.0 {
            return Err(Error::pre(op, "H0(x/t) does not fit in the grid window"));
        }
    }
    Ok(())
}

/// Momentum matrices (orthonormal basis) of the exact lattice operator and the
/// ℓ = 0 comb term.
fn comb_matrices(
    ghat: &Profile,
    h0: &Profile,
    grid: &TorusGrid,
    t: f64,
    q: Option<&MomentData>,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let l = grid.side();
    let hgrid = grid.spacing();
    let p: Vec<f64> = (0..l).map(|m| grid.momentum(m)[0]).collect();
    let g: Vec<f64> = p.iter().map(|v| ghat.value(&[*v])).collect();
    let zero = DMatrix::zeros(l, l);
    let Some(q) = q else {
        return (zero.clone(), zero);
    };
    // Kernels depend on p - q = 2π k / L, k ∈ (-L, L).
    let diffs: Vec<f64> = (0..2 * l - 1)
        .map(|j| (j as f64 - (l - 1) as f64) * hgrid)
        .collect();
    let lattice: Vec<Complex64> = diffs
        .iter()
        .map(|k| {
            (0..l)
                .map(|i| {
                    let x = grid.coordinate(i) as f64;
                    Complex64::from_polar(h0.value(&[x / t]), -k * x)
                })
                .sum::<Complex64>()
                / (2.0 * PI)
        })
        .collect();
    let continuum: Vec<Complex64> = diffs
        .iter()
        .map(|k| {
            let ft: Complex64 = q
                .nodes
                .iter()
                .zip(&q.weights)
                .zip(&q.values)
                .map(|((x, w), v)| Complex64::from_polar(w * v, -t * k * x))
                .sum::<Complex64>()
                / (2.0 * PI).sqrt();
            ft * t / (2.0 * PI).sqrt()
        })
        .collect();
    let build = |ker: &[Complex64]| {
        DMatrix::from_fn(l, l, |i, j| ker[i + l - 1 - j] * (g[i] * g[j] * hgrid))
    };
    (build(&lattice), build(&continuum))
}

/// `‖LHS - T₀‖` for `ĝ(D) H₀(x/t) ĝ(D)`.
pub fn comb_remainder(ghat: &Profile, h0: &Profile, grid: &TorusGrid, t: f64) -> Result<f64> {
    check_bostelmann(ghat, h0, grid, t)?;
    let q = quadrature(h0)?;
    let (lhs, t0) = comb_matrices(ghat, h0, grid, t, q.as_ref());
    Ok(spectral_norm(&(lhs - t0)))
}

/// Largest singular value from a full SVD. The comb matrices are small and their
/// norms sit near round-off, where power iteration stalls.
fn spectral_norm(k: &DMatrix<Complex64>) -> f64 {
    k.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Raises the truncation order of the rank-one expansion until two consecutive
/// increments fall below `tol`, or `max_order` is reached.
pub fn bostelmann_truncation(
    ghat: &Profile,
    h0: &Profile,
    grid: &TorusGrid,
    t: f64,
    tol: f64,
    max_order: usize,
) -> Result<BostelmannReport> {
    check_bostelmann(ghat, h0, grid, t)?;
    if let Some(r) = h0.support_radius() {
        if t * PI * r > 10.0 {
            return Err(Error::pre(
                "bostelmann_truncation",
                format!("t * pi * radius = {:.2} exceeds the convergence guard 10", t * PI * r),
            ));
        }
    }
    let q = quadrature(h0)?;
    let (lhs, t0) = comb_matrices(ghat, h0, grid, t, q.as_ref());
    let l = grid.side();
    let hgrid = grid.spacing();
    let p: Vec<f64> = (0..l).map(|m| grid.momentum(m)[0]).collect();
    let g: Vec<f64> = p.iter().map(|v| ghat.value(&[*v])).collect();

    // H̃₀^{(n)}(0) = (2π)^{-1/2} ∫ (-ix)^n H₀(x) dx.
    let moment = |n: usize| -> Complex64 {
        let Some(q) = &q else {
            return Complex64::new(0.0, 0.0);
        };
        let re: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .zip(&q.values)
            .map(|((x, w), v)| w * v * x.powi(n as i32))
            .sum();
        Complex64::new(0.0, -1.0).powu(n as u32) * re / (2.0 * PI).sqrt()
    };
    let fact = |n: usize| (1..=n).fold(1.0, |a, k| a * k as f64);

    let mut sum = DMatrix::<Complex64>::zeros(l, l);
    let mut increments = Vec::new();
    let mut order = 0;
    let mut converged = false;
    let mut below = 0;
    for n in 0..=max_order {
        let mn = moment(n);
        let mut inc = DMatrix::<Complex64>::zeros(l, l);
        if mn != Complex64::new(0.0, 0.0) {
            for alpha in 0..=n {
                let beta = n - alpha;
                let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                let c = mn * (sign * t.powi(1 + n as i32) / ((2.0 * PI).sqrt() * fact(alpha) * fact(beta)));
                let ub: Vec<f64> = (0..l).map(|i| g[i] * p[i].powi(beta as i32)).collect();
                let ua: Vec<f64> = (0..l).map(|j| g[j] * p[j].powi(alpha as i32)).collect();
                for j in 0..l {
                    if ua[j] == 0.0 {
                        continue;
                    }
                    for i in 0..l {
                        inc[(i, j)] += c * (ub[i] * ua[j] * hgrid);
                    }
                }
            }
        }
        let size = spectral_norm(&inc);
        sum += inc;
        increments.push(size);
        if size >= tol {
            order = n;
            below = 0;
        } else {
            below += 1;
            if below >= 2 {
                converged = true;
                break;
            }
        }
    }
    let truncation_residual = spectral_norm(&(&t0 - &sum));
    let comb_remainder = spectral_norm(&(&lhs - &t0));
    let full_residual = spectral_norm(&(&lhs - &sum));
    Ok(BostelmannReport {
        order,
        orders_summed: increments.len() - 1,
        converged,
        truncation_residual,
        comb_remainder,
        full_residual,
        tail_increment: *increments.last().unwrap_or(&0.0),
        increments,
    })
}

/// Momentum-space field `ψ̂` restricted by `χ`; convenience for oracles.
pub fn chi_filtered(psi: &LatticeState, chi: &Profile) -> MomentumField {
    let mut f = fourier(psi);
    for (m, v) in f.values.iter_mut().enumerate() {
        *v *= chi.value(&psi.grid.momentum(m));
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{wave_packet_state, WavePacket};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn well_model(l: usize) -> HamiltonianModel {
        let grid = TorusGrid::new(1, l).unwrap();
        let v = Potential::GaussianWell {
            depth: 1.5,
            width: 2.0,
            center: vec![0.0],
        }
        .sample(&grid);
        HamiltonianModel::new(grid, Dispersion::nearest_neighbor(1, 1.0), v, ModelOptions::default())
            .unwrap()
    }

    #[test]
    fn free_model_matches_dense() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let nn = Dispersion::nearest_neighbor(1, 1.0);
        let free = HamiltonianModel::new(grid, nn.clone(), vec![0.0; 64], ModelOptions::default()).unwrap();
        let dense = HamiltonianModel::new(
            grid,
            nn,
            vec![0.0; 64],
            ModelOptions {
                force_dense: true,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in free.eigenvalues().iter().zip(dense.eigenvalues()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(dense.bound_states().is_empty());
        assert!(dense.max_eigen_residual() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = LatticeState::random(grid, &mut rng);
        let a = free.evolve(&psi, 3.7).unwrap();
        let b = dense.evolve(&psi, 3.7).unwrap();
        assert!(a.sub(&b).norm() < 1e-9 * psi.norm());
        assert!((b.norm() - psi.norm()).abs() < 1e-9 * psi.norm());
        assert!(dense.evolve(&psi, 0.0).unwrap().sub(&psi).norm() < 1e-10 * psi.norm());
    }

    #[test]
    fn well_has_bound_states_and_eigenvectors_evolve_by_phase() {
        let m = well_model(128);
        assert!(m.max_eigen_residual() < 1e-9);
        let bound = m.bound_states();
        assert!(!bound.is_empty());
        let (e, v) = &bound[0];
        let out = m.evolve(v, 2.5).unwrap();
        let expect = v.scale(Complex64::from_polar(1.0, -e * 2.5));
        assert!(out.sub(&expect).norm() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = LatticeState::random(m.grid, &mut rng);
        let pb = m.bound_projection(&psi);
        // P_bound + P_scatt = 1 with P_scatt the complement in the eigenbasis.
        let Spectrum::Dense { values, vectors } = &m.spectrum else { panic!() };
        let (lo, hi) = m.band;
        let mut ps = LatticeState::zeros(m.grid);
        for (j, e) in values.iter().enumerate() {
            if *e >= lo - 1e-6 && *e <= hi + 1e-6 {
                let v = LatticeState {
                    grid: m.grid,
                    amplitudes: vectors.column(j).iter().copied().collect(),
                };
                ps = ps.add(&v.scale(v.inner(&psi)));
            }
        }
        assert!(pb.add(&ps).sub(&psi).norm() < 1e-9 * psi.norm());
    }

    #[test]
    fn trivial_detector_is_norm() {
        let m = well_model(64);
        let spec = DetectorSpec {
            chi: Profile::Constant { value: 1.0 },
            h: Profile::Constant { value: 1.0 },
            enforce_support_constraints: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = LatticeState::random(m.grid, &mut rng);
        for t in [1.0, 10.0, 50.0] {
            let v = detector_expectation(&m, &spec, &psi, t).unwrap();
            assert!((v - psi.norm_sqr()).abs() < 1e-9 * psi.norm_sqr());
        }
    }

    #[test]
    fn zero_state_and_superposition_bounds() {
        let m = well_model(128);
        let spec = DetectorSpec {
            chi: Profile::plateau(&[1.55], 1.1, 1.3),
            h: Profile::bump(&[0.7], 0.5, 1.0),
            enforce_support_constraints: true,
        };
        let ts = [5.0, 10.0, 20.0];
        let zero = LatticeState::zeros(m.grid);
        let rep = compactness_chain_study(&m, &spec, &zero, &ts, 16, 1e-3, Exec::Parallel).unwrap();
        assert!(rep.detector_norm.iter().all(|v| *v == 0.0));
        let bound = m.bound_states();
        let a = compactness_chain_study(&m, &spec, &bound[0].1, &ts, 16, 1e-3, Exec::Parallel).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let _ = &mut rng;
        if bound.len() >= 2 {
            let b = compactness_chain_study(&m, &spec, &bound[1].1, &ts, 16, 1e-3, Exec::Parallel).unwrap();
            let sup = bound[0].1.add(&bound[1].1);
            let s = compactness_chain_study(&m, &spec, &sup, &ts, 16, 1e-3, Exec::Parallel).unwrap();
            for i in 0..ts.len() {
                assert!(s.detector_norm[i] <= a.detector_norm[i] + b.detector_norm[i] + 1e-9);
            }
        }
        assert_eq!(a.cone_violations, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let random = LatticeState::random(m.grid, &mut rng);
        assert!(compactness_chain_study(&m, &spec, &random, &ts, 4, 1e-3, Exec::Parallel).is_err());
    }

    #[test]
    fn cook_trivial_and_rejections() {
        let grid = TorusGrid::new(1, 512).unwrap();
        let nn = Dispersion::nearest_neighbor(1, 1.0);
        let free = HamiltonianModel::new(grid, nn.clone(), vec![0.0; 512], ModelOptions::default()).unwrap();
        let w = WavePacket::new(Profile::gaussian_like(&[PI / 2.0], 0.15, 0.55, 0.75));
        let psi = wave_packet_state(&w, &nn, &grid).unwrap();
        let r = cook_wave_operator(&free, &psi, 40.0, 1.0).unwrap();
        assert!(r.state.sub(&psi).norm() < 1e-12);
        assert!(r.integrand.iter().all(|(_, v)| *v == 0.0));
        let still = LatticeState::from_fn(grid, |_| Complex64::new(1.0 / 512f64.sqrt(), 0.0));
        assert!(cook_wave_operator(&free, &still, 10.0, 1.0).is_err());
    }

    #[test]
    fn bostelmann_trivial_cases() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let g = Profile::bump(&[0.0], 0.5, 1.0);
        let h0 = Profile::bump(&[0.0], 1.0, 2.0);
        let zero = Profile::Constant { value: 0.0 };
        let r = bostelmann_truncation(&g, &zero, &grid, 2.0, 1e-8, 40).unwrap();
        assert_eq!(r.order, 0);
        assert_eq!(r.full_residual, 0.0);
        let r = bostelmann_truncation(&zero, &h0, &grid, 2.0, 1e-8, 40).unwrap();
        assert_eq!(r.full_residual, 0.0);
        assert!(bostelmann_truncation(&g, &h0, &grid, 4.0, 1e-8, 40).is_err());
    }

    #[test]
    fn comb_lhs_matches_position_space_operator() {
        // The momentum matrix of ĝ(D)H₀(x/t)ĝ(D) equals the unitary DFT of the
        // position-space operator built from grid primitives.
        let grid = TorusGrid::new(1, 32).unwrap();
        let g = Profile::bump(&[0.2], 0.8, 1.0);
        let h0 = Profile::bump(&[0.0], 1.0, 2.0);
        let t = 3.0;
        let q = quadrature(&h0).unwrap();
        let (lhs, _) = comb_matrices(&g, &h0, &grid, t, q.as_ref());
        let gm: Vec<Complex64> = (0..32).map(|m| Complex64::new(g.value(&grid.momentum(m)), 0.0)).collect();
        let gop = LatticeOperator::multiplier(grid, &gm);
        let pos = &gop.kernel * gop.scale_rows(|x| h0.value(&[x[0] / t])).kernel;
        // Unitary DFT: U[m, x] = (1/√L) e^{-i p_m x}.
        let u = DMatrix::from_fn(32, 32, |m, i| {
            Complex64::from_polar(1.0 / 32f64.sqrt(), -grid.momentum(m)[0] * grid.coordinate(i) as f64)
        });
        let mom = &u * pos * u.adjoint();
        assert!((mom - lhs).iter().all(|v| v.norm() < 1e-12));
    }
}
