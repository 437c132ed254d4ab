//! Energy-momentum spectrum of the free model and the Δ-admissibility checker.
//!
//! Points of `(E, p)` space are stored as `[E, p_1, …, p_d]`.

use serde::{Deserialize, Serialize};

use super::hull::ConvexBody;
use super::{energy_momentum_distance, reduce_momentum, RegionSet};
use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;

/// `{0} ∪ h ∪ (h+h) ∪ …` for a free dispersion on a momentum grid.
#[derive(Clone, Debug)]
pub struct SpectrumModel {
    grid: TorusGrid,
    shell: RegionSet,
    multi: Vec<RegionSet>,
    isolation_from_ground: f64,
    isolation_from_multi: f64,
}

fn reduce(p: &mut [f64]) {
    for v in p[1..].iter_mut() {
        *v = reduce_momentum(*v);
    }
}

/// Sumset in `(E, p)` space with momenta reduced into `]-π, π]`.
fn periodic_sum(a: &RegionSet, b: &RegionSet) -> Result<RegionSet> {
    let mut pts = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        for q in b.points() {
            let mut s: Vec<f64> = p.iter().zip(q).map(|(x, y)| x + y).collect();
            reduce(&mut s);
            pts.push(s);
        }
    }
    RegionSet::from_points(a.dim(), pts, a.delta() + b.delta())
}

fn cloud_distance(q: &[f64], r: &RegionSet) -> f64 {
    r.points()
        .map(|p| energy_momentum_distance(q, p))
        .fold(f64::INFINITY, f64::min)
}

impl SpectrumModel {
    /// Ground point, mass shell on the grid and n-fold sumsets for
    /// `2 <= n <= max_particles` whose minimal energy does not exceed `energy_cap`.
    pub fn free(
        sigma: &Dispersion,
        grid: &TorusGrid,
        max_particles: usize,
        energy_cap: f64,
    ) -> Result<Self> {
        if sigma.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: sigma.dim(),
            });
        }
        let pts = grid
            .momenta()
            .into_iter()
            .map(|p| {
                let mut e = vec![sigma.value(&p)];
                e.extend(p);
                e
            })
            .collect();
        let shell = RegionSet::from_points(grid.dim() + 1, pts, 0.0)?;
        let (emin, _) = sigma.band(grid);
        let mut multi: Vec<RegionSet> = Vec::new();
        let mut acc = shell.clone();
        for n in 2..=max_particles {
            if n as f64 * emin > energy_cap {
                break;
            }
            acc = periodic_sum(&acc, &shell)?;
            let kept: Vec<Vec<f64>> = acc.points().filter(|p| p[0] <= energy_cap).map(|p| p.to_vec()).collect();
            acc = RegionSet::from_points(acc.dim(), kept, 0.0)?;
            multi.push(acc.clone());
        }
        let origin = vec![0.0; grid.dim() + 1];
        let isolation_from_ground = cloud_distance(&origin, &shell);
        let isolation_from_multi = multi
            .first()
            .map(|two| {
                shell
                    .points()
                    .map(|p| cloud_distance(p, two))
                    .fold(f64::INFINITY, f64::min)
            })
            .unwrap_or(f64::INFINITY);
        Ok(SpectrumModel {
            grid: *grid,
            shell,
            multi,
            isolation_from_ground,
            isolation_from_multi,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn shell(&self) -> &RegionSet {
        &self.shell
    }

    pub fn multi_particle(&self) -> &[RegionSet] {
        &self.multi
    }

    /// `(dist(h, {0}), dist(h, h+h))` in the product metric.
    pub fn isolation(&self) -> (f64, f64) {
        (self.isolation_from_ground, self.isolation_from_multi)
    }

    /// Points of `Sp U ∖ h`: the ground point and every multi-particle point.
    fn off_shell(&self) -> impl Iterator<Item = &[f64]> + '_ {
        static ORIGIN: [f64; 4] = [0.0; 4];
        let d = self.grid.dim() + 1;
        std::iter::once(&ORIGIN[..d]).chain(self.multi.iter().flat_map(|m| m.points()))
    }

    fn all_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.off_shell().chain(self.shell.points())
    }
}

/// Signed margins, positive when the respective condition holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityMargins {
    /// Each spectrum stays away from `Sp U ∖ h`.
    pub spectra_on_shell: f64,
    /// The sumset lies inside Δ.
    pub sumset_inside: f64,
    /// `(Δ̄ - sumset) ∩ Sp U` stays within tol of the origin.
    pub difference_avoids_spectrum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub tol: f64,
    pub margins: AdmissibilityMargins,
    pub diagnostics: Vec<String>,
}

/// Tests the three Δ-admissibility support conditions for creation-operator
/// spectra `spectra` against the free spectrum `model`. Δ is taken as its convex
/// hull plus its radius. `tol` defaults to twice the momentum grid spacing.
pub fn check_delta_admissible(
    delta_region: &RegionSet,
    spectra: &[RegionSet],
    model: &SpectrumModel,
    tol: Option<f64>,
) -> AdmissibilityReport {
    let tol = tol.unwrap_or(2.0 * model.grid.spacing());
    let mut diagnostics = Vec::new();
    let dim = model.grid.dim() + 1;
    let fail = |msg: String| AdmissibilityReport {
        admissible: false,
        tol,
        margins: AdmissibilityMargins {
            spectra_on_shell: f64::NEG_INFINITY,
            sumset_inside: f64::NEG_INFINITY,
            difference_avoids_spectrum: f64::NEG_INFINITY,
        },
        diagnostics: vec![msg],
    };
    if spectra.is_empty() {
        return fail("no spectrum regions given".into());
    }
    if delta_region.dim() != dim || spectra.iter().any(|s| s.dim() != dim) {
        return fail(format!("all regions must live in (E, p) space of dimension {dim}"));
    }
    if delta_region.is_empty() || spectra.iter().any(|s| s.is_empty()) {
        return fail("empty region".into());
    }

    let mut on_shell = f64::INFINITY;
    for (i, s) in spectra.iter().enumerate() {
        let m = model
            .off_shell()
            .map(|q| cloud_distance(q, s) - s.delta())
            .fold(f64::INFINITY, f64::min);
        if m <= tol {
            diagnostics.push(format!("spectrum {i} comes within {m:.3e} of Sp U outside the shell"));
        }
        on_shell = on_shell.min(m);
    }

    let mut sumset = spectra[0].clone();
    for s in &spectra[1..] {
        sumset = periodic_sum(&sumset, s).expect("matching dimensions");
    }
    let body = ConvexBody::new(super::convex_hull(delta_region).to_vecs());
    let depth = |q: &[f64]| body.depth(q) + delta_region.delta();
    let inside = sumset
        .points()
        .map(|s| depth(s) - sumset.delta())
        .fold(f64::INFINITY, f64::min);
    if inside <= tol {
        diagnostics.push(format!("sumset leaves Delta (margin {inside:.3e})"));
    }

    let origin = vec![0.0; dim];
    let mut avoid = f64::INFINITY;
    let mut worst: Option<Vec<f64>> = None;
    for q in model.all_points() {
        if energy_momentum_distance(q, &origin) <= tol {
            continue;
        }
        for s in sumset.points() {
            let mut x: Vec<f64> = q.iter().zip(s).map(|(a, b)| a + b).collect();
            reduce(&mut x);
            let m = -depth(&x) - sumset.delta();
            if m < avoid {
                avoid = m;
                worst = Some(q.to_vec());
            }
        }
    }
    if avoid <= tol {
        diagnostics.push(format!(
            "spectral point {:?} lies in (closure(Delta) - sumset) up to margin {avoid:.3e}",
            worst.unwrap_or_default()
        ));
    }

    AdmissibilityReport {
        admissible: on_shell > tol && inside > tol && avoid > tol,
        tol,
        margins: AdmissibilityMargins {
            spectra_on_shell: on_shell,
            sumset_inside: inside,
            difference_avoids_spectrum: avoid,
        },
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::shell_patch;

    fn setup() -> (Dispersion, TorusGrid, SpectrumModel) {
        let sigma = Dispersion::ising_like(0.3).unwrap();
        let grid = TorusGrid::new(1, 128).unwrap();
        let model = SpectrumModel::free(&sigma, &grid, 2, 4.0).unwrap();
        (sigma, grid, model)
    }

    fn delta_box(e: (f64, f64), p: (f64, f64)) -> RegionSet {
        RegionSet::box_region(&[e.0, p.0], &[e.1, p.1], 2).unwrap()
    }

    #[test]
    fn shell_is_isolated() {
        let (sigma, _, model) = setup();
        for p in model.shell().points() {
            assert_eq!(p[0], sigma.value(&p[1..]));
        }
        let (g, m) = model.isolation();
        assert!(g > 0.6 && m > 0.5, "{g} {m}");
    }

    #[test]
    fn single_patch_fixtures() {
        let (sigma, grid, model) = setup();
        let p0 = 0.5;
        let patch = shell_patch(&sigma, &grid, &[p0], 0.1, 0.0).unwrap();
        let e0 = sigma.value(&[p0]);
        let ok = delta_box((e0 - 0.35, e0 + 0.35), (p0 - 0.4, p0 + 0.4));
        let rep = check_delta_admissible(&ok, &[patch.clone()], &model, None);
        assert!(rep.admissible, "{rep:?}");
        let shifted = delta_box((e0 + 0.65, e0 + 1.35), (p0 - 0.4, p0 + 0.4));
        let rep = check_delta_admissible(&shifted, &[patch], &model, None);
        assert!(!rep.admissible);
        assert!(rep.margins.sumset_inside < -rep.tol);
    }

    #[test]
    fn ill_posed_inputs_give_false_verdict() {
        let (_, _, model) = setup();
        let wrong = RegionSet::from_points(1, vec![vec![0.0]], 0.0).unwrap();
        let rep = check_delta_admissible(&wrong, &[wrong.clone()], &model, None);
        assert!(!rep.admissible && !rep.diagnostics.is_empty());
    }
}
