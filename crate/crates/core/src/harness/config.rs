//! Experiment configuration and its validator.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::{spatial_reach, Potential, MAX_DENSE_SITES};
use crate::dispersion::{wave_packet_state, DispersionSpec, VelocityRegion, WavePacket};
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::profile::Profile;
use crate::regions::RegionLiteral;
use crate::weyl::GradientMode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Moyal,
    Localization,
    Conjugation,
    ConeLeakage,
    Bostelmann,
    Schur,
    ConvexityChain,
    ConeMonotone,
    FreeLimit,
    BoundAnnihilation,
    Cook,
    CompactnessChain,
    Admissible,
}

impl Experiment {
    pub const LEMMAS: [Experiment; 8] = [
        Experiment::Moyal,
        Experiment::Localization,
        Experiment::Conjugation,
        Experiment::ConeLeakage,
        Experiment::Bostelmann,
        Experiment::Schur,
        Experiment::ConvexityChain,
        Experiment::ConeMonotone,
    ];

    pub const STUDIES: [Experiment; 4] = [
        Experiment::FreeLimit,
        Experiment::BoundAnnihilation,
        Experiment::Cook,
        Experiment::CompactnessChain,
    ];

    /// The absolute tolerance a single `--tol` value overrides, if the
    /// experiment has one. Slope windows are not overridable this way.
    pub fn scalar_tolerance(self) -> Option<&'static str> {
        match self {
            Experiment::Localization | Experiment::Bostelmann => Some("residual-max"),
            Experiment::Schur => Some("extremal-defect-max"),
            Experiment::ConvexityChain => Some("vertex-tol"),
            Experiment::FreeLimit => Some("abs-max"),
            Experiment::BoundAnnihilation => Some("expectation-max"),
            Experiment::Cook => Some("norm-drift-max"),
            Experiment::CompactnessChain => Some("threshold"),
            Experiment::Admissible => Some("tol"),
            Experiment::Moyal | Experiment::Conjugation | Experiment::ConeLeakage | Experiment::ConeMonotone => None,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Moyal => "moyal",
            Experiment::Localization => "localization",
            Experiment::Conjugation => "conjugation",
            Experiment::ConeLeakage => "cone-leakage",
            Experiment::Bostelmann => "bostelmann",
            Experiment::Schur => "schur",
            Experiment::ConvexityChain => "convexity-chain",
            Experiment::ConeMonotone => "cone-monotone",
            Experiment::FreeLimit => "free-limit",
            Experiment::BoundAnnihilation => "bound-annihilation",
            Experiment::Cook => "cook",
            Experiment::CompactnessChain => "compactness-chain",
            Experiment::Admissible => "admissible",
        }
    }

    pub fn from_id(id: &str) -> Option<Experiment> {
        Self::LEMMAS
            .iter()
            .chain(&Self::STUDIES)
            .chain(&[Experiment::Admissible])
            .copied()
            .find(|e| e.id() == id)
    }

    pub(crate) fn schema(self) -> Schema {
        use Experiment::*;
        let s = Schema::default;
        match self {
            Moyal => Schema {
                grid: true,
                times: true,
                dense: true,
                profiles: &["h", "ghat"],
                tolerances: &["slope-min", "slope-max", "r2-min"],
                ..s()
            },
            Localization => Schema {
                grid: true,
                times: true,
                dense: true,
                profiles: &["h", "a-x", "a-xi"],
                tolerances: &["slope-max", "residual-max"],
                ..s()
            },
            Conjugation => Schema {
                grid: true,
                times: true,
                dense: true,
                dispersion: true,
                profiles: &["h", "ghat"],
                tolerances: &["slope-min", "slope-max", "r2-min"],
                ..s()
            },
            ConeLeakage => Schema {
                grid: true,
                times: true,
                dispersion: true,
                velocity_region: true,
                profiles: &["ghat"],
                tolerances: &["slope-max"],
                ..s()
            },
            Bostelmann => Schema {
                grid: true,
                times: true,
                dense: true,
                profiles: &["ghat", "h0"],
                tolerances: &["residual-max", "increment-tol", "slope-max"],
                options: &["t", "max-order"],
                ..s()
            },
            Schur => Schema {
                samples: true,
                tolerances: &["extremal-defect-max"],
                options: &["max-size", "extremal-cases"],
                ..s()
            },
            ConvexityChain => Schema {
                dispersion: true,
                samples: true,
                particles: true,
                tolerances: &["vertex-tol"],
                options: &["delta-max", "ladder", "cloud-size"],
                ..s()
            },
            ConeMonotone => Schema {
                samples: true,
                options: &["max-dim", "cloud-size"],
                ..s()
            },
            FreeLimit => Schema {
                grid: true,
                dispersion: true,
                profiles: &["ghat", "chi", "h"],
                tolerances: &["abs-max"],
                options: &["t"],
                ..s()
            },
            BoundAnnihilation => Schema {
                grid: true,
                dense: true,
                dispersion: true,
                potential: true,
                profiles: &["chi", "h"],
                tolerances: &["expectation-max"],
                options: &["t"],
                ..s()
            },
            Cook => Schema {
                grid: true,
                times: true,
                dense: true,
                dispersion: true,
                potential: true,
                profiles: &["ghat"],
                tolerances: &["slope-max", "norm-drift-max"],
                options: &["step", "quadrature-panels"],
                ..s()
            },
            CompactnessChain => Schema {
                grid: true,
                times: true,
                dense: true,
                dispersion: true,
                potential: true,
                profiles: &["chi", "h"],
                tolerances: &["threshold"],
                options: &["tail-steps", "bound-states"],
                ..s()
            },
            Admissible => Schema {
                grid: true,
                dispersion: true,
                regions: true,
                tolerances: &["tol"],
                options: &["max-particles", "energy-cap"],
                ..s()
            },
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Which config fields an experiment reads.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Schema {
    pub grid: bool,
    pub times: bool,
    pub dense: bool,
    pub dispersion: bool,
    pub potential: bool,
    pub samples: bool,
    pub velocity_region: bool,
    pub particles: bool,
    pub regions: bool,
    pub profiles: &'static [&'static str],
    pub tolerances: &'static [&'static str],
    pub options: &'static [&'static str],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub side: usize,
}

/// Geometric grid `start · factor^k`, `k = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start * self.factor.powi(k as i32))
            .collect()
    }

    pub fn last(&self) -> f64 {
        self.start * self.factor.powi(self.count.saturating_sub(1) as i32)
    }
}

/// One particle of the convexity chain: velocity support of `h` and momentum
/// support of `ĝ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub h: RegionLiteral,
    pub momentum: RegionLiteral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilitySpec {
    pub delta: RegionLiteral,
    pub spectra: Vec<RegionLiteral>,
    /// Verdict the fixture is built to produce.
    pub expect_admissible: bool,
    /// Condition expected to fail, if any: `spectra-on-shell`, `sumset-inside` or
    /// `difference-avoids-spectrum`.
    #[serde(default)]
    pub expect_failing: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    /// Run name used for the output directory; defaults to the experiment id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_region: Option<VelocityRegion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub particles: Vec<ParticleSpec>,
    /// Particles expected to be rejected by the chain check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overlapping_particles: Vec<ParticleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            name: None,
            grid: None,
            dispersion: None,
            profiles: BTreeMap::new(),
            potential: None,
            times: None,
            tolerances: BTreeMap::new(),
            options: BTreeMap::new(),
            seed: 0,
            samples: None,
            gradient: None,
            velocity_region: None,
            particles: Vec::new(),
            overlapping_particles: Vec::new(),
            admissibility: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.id().to_string())
    }

    pub fn profile(&self, name: &str) -> Result<&Profile> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing profile `{name}`")))
    }

    pub fn tolerance(&self, name: &str) -> Result<f64> {
        self.tolerances
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing tolerance `{name}`")))
    }

    pub fn option_or(&self, name: &str, default: f64) -> f64 {
        self.options.get(name).copied().unwrap_or(default)
    }

    pub fn torus(&self) -> Result<TorusGrid> {
        let g = self
            .grid
            .ok_or_else(|| Error::Config("missing grid".into()))?;
        TorusGrid::new(g.dim, g.side)
    }

    pub fn time_values(&self) -> Result<Vec<f64>> {
        Ok(self
            .times
            .ok_or_else(|| Error::Config("missing times".into()))?
            .values())
    }

    /// Lists every violated precondition; `Ok` when the config can run.
    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let schema = self.experiment.schema();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let mut presence = |used: bool, present: bool, field: &str| {
            if used && !present {
                errs.push(format!("`{field}` is required"));
            } else if !used && present {
                errs.push(format!("`{field}` is not used by this experiment"));
            }
        };
        presence(schema.grid, self.grid.is_some(), "grid");
        presence(schema.times, self.times.is_some(), "times");
        presence(schema.dispersion, self.dispersion.is_some(), "dispersion");
        presence(schema.potential, self.potential.is_some(), "potential");
        presence(schema.samples, self.samples.is_some(), "samples");
        presence(
            schema.velocity_region,
            self.velocity_region.is_some(),
            "velocity_region",
        );
        presence(schema.particles, !self.particles.is_empty(), "particles");
        presence(schema.regions, self.admissibility.is_some(), "admissibility");
        if !schema.particles && !self.overlapping_particles.is_empty() {
            errs.push("`overlapping_particles` is not used by this experiment".into());
        }
        if self.gradient.is_some() && self.experiment != Experiment::Moyal {
            errs.push("`gradient` is not used by this experiment".into());
        }
        for name in self.profiles.keys() {
            if !schema.profiles.contains(&name.as_str()) {
                errs.push(format!("unknown profile `{name}`"));
            }
        }
        for name in schema.profiles {
            if !self.profiles.contains_key(*name) {
                errs.push(format!("missing profile `{name}`"));
            }
        }
        for (name, v) in &self.tolerances {
            if !schema.tolerances.contains(&name.as_str()) {
                errs.push(format!("unknown tolerance `{name}`"));
            } else if !v.is_finite() {
                errs.push(format!("tolerance `{name}` is not finite"));
            }
        }
        for name in schema.tolerances {
            if !self.tolerances.contains_key(*name) {
                errs.push(format!("missing tolerance `{name}`"));
            }
        }
        for (name, v) in &self.options {
            if !schema.options.contains(&name.as_str()) {
                errs.push(format!("unknown option `{name}`"));
            } else if !v.is_finite() {
                errs.push(format!("option `{name}` is not finite"));
            }
        }
        if let Some(t) = &self.times {
            if !(t.start > 0.0 && t.start.is_finite()) {
                errs.push("times.start must be positive".into());
            }
            if !(t.factor > 1.0 && t.factor.is_finite()) {
                errs.push("times.factor must exceed 1 (strictly increasing grid)".into());
            }
            if t.count == 0 {
                errs.push("times.count must be positive".into());
            }
        }
        if errs.is_empty() {
            self.semantic_checks(&mut errs);
        }
        errs
    }

    /// Checks that need the built objects: grid limits, profile parameters and
    /// the no-wrap condition.
    fn semantic_checks(&self, errs: &mut Vec<String>) {
        let schema = self.experiment.schema();
        let grid = match self.grid.map(|g| TorusGrid::new(g.dim, g.side)) {
            Some(Ok(g)) => Some(g),
            Some(Err(e)) => {
                errs.push(e.to_string());
                return;
            }
            None => None,
        };
        let dim = grid.map(|g| g.dim()).unwrap_or(1);
        if let (Some(g), true) = (grid, schema.dense) {
            if g.len() > MAX_DENSE_SITES {
                errs.push(format!(
                    "dense kernels need L^d <= {MAX_DENSE_SITES}, got {}",
                    g.len()
                ));
            }
        }
        for (name, p) in &self.profiles {
            if let Err(e) = p.validate(dim) {
                errs.push(format!("profile `{name}`: {e}"));
            }
        }
        let sigma = match &self.dispersion {
            Some(spec) => match spec.build(dim) {
                Ok(s) => Some(s),
                Err(e) => {
                    errs.push(format!("dispersion: {e}"));
                    None
                }
            },
            None => None,
        };
        if !errs.is_empty() {
            return;
        }
        let half = grid.map(|g| g.side() as f64 / 2.0).unwrap_or(f64::INFINITY);
        let t_max = self.times.map(|t| t.last()).unwrap_or(0.0);
        let speed = match (&sigma, grid) {
            (Some(s), Some(g)) => s.max_speed(&g),
            _ => 0.0,
        };
        let reach = |name: &str| self.profiles.get(name).and_then(|p| p.reach());
        let mut wrap = |what: &str, r: f64| {
            if r >= half {
                errs.push(format!("no-wrap violated for {what}: reach {r:.3} >= L/2 = {half}"));
            }
        };
        let packet_reach = |name: &str, t: f64| -> Option<f64> {
            let (s, g) = (sigma.as_ref()?, grid?);
            let w = WavePacket::new(self.profiles.get(name)?.clone());
            let psi = wave_packet_state(&w, s, &g).ok()?;
            Some(spatial_reach(&psi) + s.max_speed(&g) * t)
        };
        match self.experiment {
            Experiment::Moyal => match reach("h") {
                Some(r) => wrap("h(x/t)", r * t_max),
                None => errs.push("profile `h` must have bounded support".into()),
            },
            Experiment::Localization => match reach("a-x") {
                Some(r) => wrap("a(x/t)", r * t_max),
                None => errs.push("profile `a-x` must have bounded support".into()),
            },
            Experiment::Conjugation => match reach("h") {
                Some(r) => wrap("translated symbol", (r + speed) * t_max),
                None => errs.push("profile `h` must have bounded support".into()),
            },
            Experiment::ConeLeakage => {
                if let Some(r) = packet_reach("ghat", t_max) {
                    wrap("packet", r);
                }
            }
            Experiment::Bostelmann => {
                let t = self.option_or("t", 2.0).max(t_max);
                if let Some(r) = reach("h0") {
                    wrap("H0(x/t)", r * t);
                }
                if dim != 1 {
                    errs.push("bostelmann supports d = 1 only".into());
                }
            }
            Experiment::FreeLimit => {
                let t = self.option_or("t", 200.0);
                if let Some(r) = packet_reach("ghat", t) {
                    wrap("packet", r);
                }
            }
            Experiment::Cook => {
                if let Some(r) = packet_reach("ghat", 2.0 * t_max) {
                    wrap("packet at 2T", r);
                }
            }
            Experiment::Schur => {
                let n = self.option_or("max-size", 256.0);
                if !(n >= 1.0 && n <= MAX_DENSE_SITES as f64) {
                    errs.push(format!("max-size must lie in [1, {MAX_DENSE_SITES}]"));
                }
            }
            Experiment::ConvexityChain => {
                if self.particles.len() < 2 {
                    errs.push("need at least two particles".into());
                }
            }
            Experiment::Admissible => {
                if let Some(a) = &self.admissibility {
                    if a.spectra.is_empty() {
                        errs.push("admissibility.spectra is empty".into());
                    }
                    if let Some(f) = &a.expect_failing {
                        if ![
                            "spectra-on-shell",
                            "sumset-inside",
                            "difference-avoids-spectrum",
                        ]
                        .contains(&f.as_str())
                        {
                            errs.push(format!("unknown condition `{f}`"));
                        }
                    }
                }
            }
            _ => {}
        }
        if let Some(n) = self.samples {
            if n == 0 {
                errs.push("samples must be positive".into());
            }
        }
    }
}
