//! Default configurations for every experiment of the acceptance battery.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::config::{
    AdmissibilitySpec, Experiment, ExperimentConfig, GridSpec, ParticleSpec, TimeGrid,
};
use crate::detector::Potential;
use crate::dispersion::{Dispersion, DispersionSpec, VelocityRegion};
use crate::profile::Profile;
use crate::regions::RegionLiteral;
use crate::weyl::GradientMode;

fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn profiles(pairs: Vec<(&str, Profile)>) -> BTreeMap<String, Profile> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn grid(dim: usize, side: usize) -> Option<GridSpec> {
    Some(GridSpec { dim, side })
}

fn times(start: f64, factor: f64, count: usize) -> Option<TimeGrid> {
    Some(TimeGrid {
        start,
        factor,
        count,
    })
}

fn nn() -> Option<DispersionSpec> {
    Some(DispersionSpec::nearest_neighbor(1.0))
}

/// Gaussian-like packet around `π/2`, where the nearest-neighbor velocity is 1.
fn fast_packet() -> Profile {
    Profile::gaussian_like(&[PI / 2.0], 0.15, 0.55, 0.75)
}

pub fn moyal() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 256),
        profiles: profiles(vec![
            ("h", Profile::bump(&[0.0], 0.95, 4.0)),
            ("ghat", Profile::bump(&[0.0], 3.1, 3.0)),
        ]),
        times: times(8.0, 2.0, 5),
        gradient: Some(GradientMode::Spectral),
        tolerances: map(&[("slope-min", -2.5), ("slope-max", -1.7), ("r2-min", 0.98)]),
        ..ExperimentConfig::new(Experiment::Moyal)
    }
}

pub fn localization() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 1024),
        profiles: profiles(vec![
            ("h", Profile::plateau(&[0.0], 4.0, 5.0)),
            ("a-x", Profile::bump(&[0.0], 2.0, 1.0)),
            ("a-xi", Profile::bump(&[0.0], 1.0, 1.0)),
        ]),
        times: times(8.0, 2.0, 4),
        tolerances: map(&[("slope-max", -4.0), ("residual-max", 1e-6)]),
        ..ExperimentConfig::new(Experiment::Localization)
    }
}

pub fn conjugation() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 512),
        dispersion: nn(),
        profiles: profiles(vec![
            ("h", Profile::bump(&[0.0], 0.9, 6.0)),
            ("ghat", Profile::bump(&[0.0], 3.1, 3.0)),
        ]),
        times: times(8.0, 2.0, 5),
        tolerances: map(&[("slope-min", -2.5), ("slope-max", -1.7), ("r2-min", 0.98)]),
        ..ExperimentConfig::new(Experiment::Conjugation)
    }
}

pub fn cone_leakage() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 1024),
        dispersion: nn(),
        profiles: profiles(vec![("ghat", fast_packet())]),
        velocity_region: Some(VelocityRegion::OutsideBall {
            center: vec![1.0],
            radius: 0.3,
        }),
        times: times(16.0, 2.0, 4),
        tolerances: map(&[("slope-max", -4.0)]),
        ..ExperimentConfig::new(Experiment::ConeLeakage)
    }
}

pub fn bostelmann() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 128),
        profiles: profiles(vec![
            ("ghat", Profile::bump(&[0.0], 0.5, 1.0)),
            ("h0", Profile::bump(&[0.0], 1.0, 2.0)),
        ]),
        times: times(2.0, 2.0, 3),
        options: map(&[("t", 2.0), ("max-order", 60.0)]),
        tolerances: map(&[
            ("residual-max", 1e-6),
            ("increment-tol", 1e-9),
            ("slope-max", -4.0),
        ]),
        ..ExperimentConfig::new(Experiment::Bostelmann)
    }
}

pub fn schur() -> ExperimentConfig {
    ExperimentConfig {
        samples: Some(1000),
        seed: 0x5c4u64,
        options: map(&[("max-size", 256.0), ("extremal-cases", 24.0)]),
        tolerances: map(&[("extremal-defect-max", 1e-9)]),
        ..ExperimentConfig::new(Experiment::Schur)
    }
}

fn interval(lo: f64, hi: f64) -> RegionLiteral {
    RegionLiteral::Box {
        lo: vec![lo],
        hi: vec![hi],
        resolution: 2,
    }
}

fn point(p: f64) -> RegionLiteral {
    RegionLiteral::Cloud {
        points: vec![vec![p]],
        delta: 0.0,
    }
}

pub fn convexity_chain() -> ExperimentConfig {
    let p = 0.6f64.asin();
    ExperimentConfig {
        dispersion: nn(),
        particles: vec![
            ParticleSpec {
                h: interval(0.5, 0.7),
                momentum: point(p),
            },
            ParticleSpec {
                h: interval(-0.7, -0.5),
                momentum: point(-p),
            },
        ],
        overlapping_particles: vec![
            ParticleSpec {
                h: interval(0.5, 0.7),
                momentum: point(p),
            },
            ParticleSpec {
                h: interval(0.5, 0.7),
                momentum: point(p),
            },
        ],
        samples: Some(500),
        seed: 0xc0eu64,
        options: map(&[("delta-max", 0.05), ("ladder", 8.0), ("cloud-size", 8.0)]),
        tolerances: map(&[("vertex-tol", 1e-9)]),
        ..ExperimentConfig::new(Experiment::ConvexityChain)
    }
}

pub fn cone_monotone() -> ExperimentConfig {
    ExperimentConfig {
        samples: Some(100_000),
        seed: 0xc0e5u64,
        options: map(&[("max-dim", 3.0), ("cloud-size", 6.0)]),
        ..ExperimentConfig::new(Experiment::ConeMonotone)
    }
}

pub fn free_limit() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 1024),
        dispersion: nn(),
        profiles: profiles(vec![
            ("ghat", Profile::bump(&[0.8], 0.5, 1.0)),
            ("chi", Profile::Constant { value: 1.0 }),
            ("h", Profile::plateau(&[0.6], 0.1, 0.4)),
        ]),
        options: map(&[("t", 200.0)]),
        tolerances: map(&[("abs-max", 1e-3)]),
        ..ExperimentConfig::new(Experiment::FreeLimit)
    }
}

fn well() -> Option<Potential> {
    Some(Potential::GaussianWell {
        depth: 1.0,
        width: 2.0,
        center: vec![0.0],
    })
}

pub fn bound_annihilation() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 512),
        dispersion: nn(),
        potential: well(),
        profiles: profiles(vec![
            ("chi", Profile::Constant { value: 1.0 }),
            (
                "h",
                Profile::Annulus {
                    center: vec![0.0],
                    r_min: 0.2,
                    r_max: 2.0,
                    width: 0.2,
                },
            ),
        ]),
        options: map(&[("t", 200.0)]),
        tolerances: map(&[("expectation-max", 1e-3)]),
        ..ExperimentConfig::new(Experiment::BoundAnnihilation)
    }
}

pub fn cook() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 512),
        dispersion: nn(),
        potential: Some(Potential::Bump {
            height: 0.5,
            center: vec![0.0],
            radius: 3.0,
            sharpness: 1.0,
        }),
        profiles: profiles(vec![("ghat", fast_packet())]),
        times: times(8.0, 2.0, 4),
        options: map(&[("step", 1.0), ("quadrature-panels", 128.0)]),
        tolerances: map(&[("slope-max", -2.0), ("norm-drift-max", 1e-9)]),
        ..ExperimentConfig::new(Experiment::Cook)
    }
}

pub fn compactness_chain() -> ExperimentConfig {
    ExperimentConfig {
        grid: grid(1, 512),
        dispersion: nn(),
        potential: well(),
        profiles: profiles(vec![
            ("chi", Profile::bump(&[0.7], 0.45, 1.0)),
            ("h", Profile::bump(&[0.7], 0.5, 1.0)),
        ]),
        times: times(6.25, 2.0, 6),
        options: map(&[("tail-steps", 32.0), ("bound-states", 1.0)]),
        tolerances: map(&[("threshold", 1e-3)]),
        ..ExperimentConfig::new(Experiment::CompactnessChain)
    }
}

const ADMISSIBLE_LAMBDA: f64 = 0.3;
const ADMISSIBLE_SIDE: usize = 128;

fn ising_energy(p: f64) -> f64 {
    Dispersion::ising_like(ADMISSIBLE_LAMBDA)
        .expect("valid lambda")
        .value(&[p])
}

fn admissible_base(name: &str, spec: AdmissibilitySpec) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        grid: grid(1, ADMISSIBLE_SIDE),
        dispersion: Some(DispersionSpec::ising_like(ADMISSIBLE_LAMBDA)),
        options: map(&[("max-particles", 2.0), ("energy-cap", 4.0)]),
        tolerances: map(&[("tol", 2.0 * 2.0 * PI / ADMISSIBLE_SIDE as f64)]),
        admissibility: Some(spec),
        ..ExperimentConfig::new(Experiment::Admissible)
    }
}

fn patch(p: f64) -> RegionLiteral {
    RegionLiteral::ShellPatch {
        center: vec![p],
        radius: 0.1,
        delta: 0.0,
    }
}

fn energy_box(e: (f64, f64), p: (f64, f64)) -> RegionLiteral {
    RegionLiteral::Box {
        lo: vec![e.0, p.0],
        hi: vec![e.1, p.1],
        resolution: 2,
    }
}

/// Single patch on the shell with a box Δ around it.
pub fn admissible_patch() -> ExperimentConfig {
    let (p0, e0) = (0.5, ising_energy(0.5));
    admissible_base(
        "admissible-patch",
        AdmissibilitySpec {
            delta: energy_box((e0 - 0.35, e0 + 0.35), (p0 - 0.4, p0 + 0.4)),
            spectra: vec![patch(p0)],
            expect_admissible: true,
            expect_failing: None,
        },
    )
}

/// The same box shifted up in energy so the patch falls outside Δ.
pub fn admissible_sumset_outside() -> ExperimentConfig {
    let (p0, e0) = (0.5, ising_energy(0.5));
    admissible_base(
        "admissible-sumset-outside",
        AdmissibilitySpec {
            delta: energy_box((e0 + 0.65, e0 + 1.35), (p0 - 0.4, p0 + 0.4)),
            spectra: vec![patch(p0)],
            expect_admissible: false,
            expect_failing: Some("sumset-inside".into()),
        },
    )
}

/// Two patches whose Δ reaches far enough up that `Δ̄ - sumset` meets the shell.
pub fn admissible_shell_collision() -> ExperimentConfig {
    let (pa, pb) = (0.6, -0.9);
    let e_sum = ising_energy(pa) + ising_energy(pb);
    let p_sum = pa + pb;
    admissible_base(
        "admissible-shell-collision",
        AdmissibilitySpec {
            delta: energy_box((e_sum - 0.3, e_sum + 1.1), (p_sum - 0.4, p_sum + 0.4)),
            spectra: vec![patch(pa), patch(pb)],
            expect_admissible: false,
            expect_failing: Some("difference-avoids-spectrum".into()),
        },
    )
}

pub fn for_experiment(e: Experiment) -> Vec<ExperimentConfig> {
    match e {
        Experiment::Moyal => vec![moyal()],
        Experiment::Localization => vec![localization()],
        Experiment::Conjugation => vec![conjugation()],
        Experiment::ConeLeakage => vec![cone_leakage()],
        Experiment::Bostelmann => vec![bostelmann()],
        Experiment::Schur => vec![schur()],
        Experiment::ConvexityChain => vec![convexity_chain()],
        Experiment::ConeMonotone => vec![cone_monotone()],
        Experiment::FreeLimit => vec![free_limit()],
        Experiment::BoundAnnihilation => vec![bound_annihilation()],
        Experiment::Cook => vec![cook()],
        Experiment::CompactnessChain => vec![compactness_chain()],
        Experiment::Admissible => vec![
            admissible_patch(),
            admissible_sumset_outside(),
            admissible_shell_collision(),
        ],
    }
}

/// Every preset, lemmas first, then detector studies, then the admissibility fixtures.
pub fn all() -> Vec<ExperimentConfig> {
    Experiment::LEMMAS
        .iter()
        .chain(&Experiment::STUDIES)
        .chain(&[Experiment::Admissible])
        .flat_map(|e| for_experiment(*e))
        .collect()
}
