//! Configuration, experiment orchestration, decay fits and result persistence.
//!
//! A run produces a [`RunRecord`] holding the config, its hash, every series and
//! scalar, and the declared checks. Verdicts are evaluated from the record's JSON
//! form, so they depend on persisted numbers only.

mod config;
mod experiments;
mod fit;
mod output;
pub mod presets;

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub use config::{
    AdmissibilitySpec, Experiment, ExperimentConfig, GridSpec, ParticleSpec, TimeGrid,
    SCHEMA_VERSION,
};
pub use fit::{fit_decay, DecayFit, FIT_FLOOR};
pub use output::{read_record, report, write_record, Report, ReportEntry};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Name of the pinned random generator.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// A number that survives JSON round trips even when infinite or NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            F(f64),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::F(v) => Ok(Num(v)),
            Repr::S(s) => match s.as_str() {
                "nan" => Ok(Num(f64::NAN)),
                "inf" => Ok(Num(f64::INFINITY)),
                "-inf" => Ok(Num(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("bad number `{s}`"))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Relation {
    fn holds(self, v: f64, threshold: f64) -> bool {
        match self {
            Relation::Less => v < threshold,
            Relation::AtMost => v <= threshold,
            Relation::Greater => v > threshold,
            Relation::AtLeast => v >= threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Less => "<",
            Relation::AtMost => "<=",
            Relation::Greater => ">",
            Relation::AtLeast => ">=",
        }
    }
}

/// A declared threshold on one named scalar of the record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub scalar: String,
    pub relation: Relation,
    pub threshold: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Convention versions embedded in every record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub fourier: String,
    pub momentum_grid: String,
    pub position_window: String,
    pub weyl_kernel: String,
    pub fit: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            fourier: "forward (2pi)^{-d/2} sum_x psi(x) e^{-ipx}; inverse (2pi)^{-d/2} (2pi/L)^d sum_k".into(),
            momentum_grid: "p_k = 2 pi k / L, k in {-L/2+1, ..., L/2}".into(),
            position_window: "x in [-L/2, L/2)^d, row-major, last axis fastest".into(),
            weyl_kernel: "L^{-d} sum_xi a((x+y)/2, xi) e^{i(x-y)xi}; |x-y|_i = L/2 averages both midpoints".into(),
            fit: format!("least squares on (ln t, ln r), points with r <= {FIT_FLOOR:e} excluded"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub name: String,
    pub config: ExperimentConfig,
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub conventions: Conventions,
    pub rng: String,
    pub seed: u64,
    pub series: BTreeMap<String, Vec<(Num, Num)>>,
    pub scalars: BTreeMap<String, Num>,
    pub fits: BTreeMap<String, DecayFit>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

impl RunRecord {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).map(|n| n.0)
    }

    pub fn series_values(&self, name: &str) -> Option<Vec<(f64, f64)>> {
        self.series
            .get(name)
            .map(|v| v.iter().map(|(a, b)| (a.0, b.0)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

/// Collects series, scalars and checks while an experiment runs.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    series: BTreeMap<String, Vec<(Num, Num)>>,
    scalars: BTreeMap<String, Num>,
    fits: BTreeMap<String, DecayFit>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Recorder {
    pub fn series(&mut self, name: &str, mut pts: Vec<(f64, f64)>) {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.series.insert(
            name.to_string(),
            pts.into_iter().map(|(a, b)| (Num(a), Num(b))).collect(),
        );
    }

    pub fn scalar(&mut self, name: &str, v: f64) {
        self.scalars.insert(name.to_string(), Num(v));
    }

    pub fn flag(&mut self, name: &str, v: bool) {
        self.scalar(name, if v { 1.0 } else { 0.0 });
    }

    /// Fits a series and records `<name>.slope`, `<name>.r2` and `<name>.excluded`.
    /// A refused fit is recorded as a note with NaN scalars, which fail any check.
    pub fn fit(&mut self, name: &str, pts: &[(f64, f64)]) {
        match fit_decay(pts) {
            Ok(f) => {
                self.scalar(&format!("{name}.slope"), f.slope);
                self.scalar(&format!("{name}.r2"), f.r_squared);
                self.scalar(&format!("{name}.excluded"), f.excluded as f64);
                self.fits.insert(name.to_string(), f);
            }
            Err(e) => {
                self.notes.push(format!("fit {name}: {e}"));
                self.scalar(&format!("{name}.slope"), f64::NAN);
                self.scalar(&format!("{name}.r2"), f64::NAN);
            }
        }
    }

    pub fn check(&mut self, name: &str, scalar: &str, relation: Relation, threshold: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            scalar: scalar.to_string(),
            relation,
            threshold: Num(threshold),
        });
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Computes verdicts from the checks and scalars of a record.
pub fn evaluate(record: &RunRecord) -> Vec<Verdict> {
    record
        .checks
        .iter()
        .map(|c| match record.scalar(&c.scalar) {
            Some(v) => {
                let passed = c.relation.holds(v, c.threshold.0);
                Verdict {
                    name: c.name.clone(),
                    passed,
                    detail: format!("{} = {v:.6e} {} {:.6e}", c.scalar, c.relation.symbol(), c.threshold.0),
                }
            }
            None => Verdict {
                name: c.name.clone(),
                passed: false,
                detail: format!("scalar `{}` missing from the record", c.scalar),
            },
        })
        .collect()
}

/// Validates and runs one experiment with the given execution mode.
pub fn run_with(config: &ExperimentConfig, exec: Exec) -> Result<RunRecord> {
    config.validate()?;
    let mut rec = Recorder::default();
    experiments::dispatch(config, exec, &mut rec).map_err(|e| Error::Run {
        experiment: config.experiment.id().to_string(),
        source: Box::new(e),
    })?;
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        experiment: config.experiment,
        name: config.run_name(),
        config: config.clone(),
        config_hash: config_hash(config),
        conventions: Conventions::default(),
        rng: RNG_NAME.to_string(),
        seed: config.seed,
        series: rec.series,
        scalars: rec.scalars,
        fits: rec.fits,
        checks: rec.checks,
        notes: rec.notes,
        verdicts: Vec::new(),
        passed: false,
    };
    // Round trip through the persisted form before judging.
    let mut persisted: RunRecord = serde_json::from_str(&record.to_json())?;
    persisted.verdicts = evaluate(&persisted);
    persisted.passed = !persisted.verdicts.is_empty() && persisted.verdicts.iter().all(|v| v.passed);
    Ok(persisted)
}

pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    run_with(config, Exec::Parallel)
}

/// Runs every preset configuration, in order.
pub fn suite(exec: Exec, seed: Option<u64>) -> Vec<(ExperimentConfig, Result<RunRecord>)> {
    presets::all()
        .into_iter()
        .map(|mut c| {
            if let Some(s) = seed {
                c.seed = s;
            }
            let r = run_with(&c, exec);
            (c, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn num_round_trips_non_finite() {
        let v = vec![Num(1.5), Num(f64::INFINITY), Num(f64::NEG_INFINITY)];
        let s = serde_json::to_string(&v).unwrap();
        let back: Vec<Num> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let nan: Num = serde_json::from_str("\"nan\"").unwrap();
        assert!(nan.0.is_nan());
    }

    #[test]
    fn nan_fails_every_relation() {
        for r in [Relation::Less, Relation::AtMost, Relation::Greater, Relation::AtLeast] {
            assert!(!r.holds(f64::NAN, 0.0));
        }
    }
}
