//! One function per experiment. Each fills a [`Recorder`] with series, scalars
//! and the checks that decide its verdict.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, ExperimentConfig, ParticleSpec};
use super::{Recorder, Relation};
use crate::detector::{
    bostelmann_truncation, comb_remainder, compactness_chain_study, cook_integral,
    cook_integrand, cook_wave_operator, detector_expectation, free_limit_oracle, monotone_after_peak,
    DetectorSpec, HamiltonianModel, ModelOptions,
};
use crate::dispersion::{cone_leakage, wave_packet_state, Dispersion, WavePacket};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::LatticeState;
use crate::regions::hull::distance_to_hull;
use crate::regions::{
    check_convexity_chain, check_delta_admissible, convex_hull, minkowski_sum, Cone,
    ParticleSupports, RegionSet, SpectrumModel,
};
use crate::weyl::{
    conjugation_residual, expansion_residual_moyal, localization_residual, matrix_norm,
    matrix_schur_bound, GradientMode, Symbol,
};

use Relation::{AtLeast, AtMost, Greater, Less};

pub(crate) fn dispatch(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    match cfg.experiment {
        Experiment::Moyal => moyal(cfg, exec, rec),
        Experiment::Localization => localization(cfg, exec, rec),
        Experiment::Conjugation => conjugation(cfg, exec, rec),
        Experiment::ConeLeakage => leakage(cfg, exec, rec),
        Experiment::Bostelmann => bostelmann(cfg, rec),
        Experiment::Schur => schur(cfg, exec, rec),
        Experiment::ConvexityChain => convexity(cfg, exec, rec),
        Experiment::ConeMonotone => cone_sweep(cfg, exec, rec),
        Experiment::FreeLimit => free_limit(cfg, rec),
        Experiment::BoundAnnihilation => annihilation(cfg, rec),
        Experiment::Cook => cook(cfg, exec, rec),
        Experiment::CompactnessChain => compactness(cfg, exec, rec),
        Experiment::Admissible => admissible(cfg, rec),
    }
}

fn dispersion(cfg: &ExperimentConfig, dim: usize) -> Result<Dispersion> {
    cfg.dispersion
        .as_ref()
        .ok_or_else(|| Error::Config("missing dispersion".into()))?
        .build(dim)
}

/// Sample-indexed generator: same seed, one ChaCha stream per sample.
fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn collect_series(ts: &[f64], vals: Vec<Result<f64>>) -> Result<Vec<(f64, f64)>> {
    ts.iter()
        .zip(vals)
        .map(|(t, v)| v.map(|v| (*t, v)))
        .collect()
}

fn slope_window(cfg: &ExperimentConfig, rec: &mut Recorder, series: &str) -> Result<()> {
    let scalar = format!("{series}.slope");
    rec.check("slope above lower bound", &scalar, AtLeast, cfg.tolerance("slope-min")?);
    rec.check("slope below upper bound", &scalar, AtMost, cfg.tolerance("slope-max")?);
    rec.check("fit quality", &format!("{series}.r2"), AtLeast, cfg.tolerance("r2-min")?);
    Ok(())
}

fn moyal(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let (h, g) = (cfg.profile("h")?, cfg.profile("ghat")?);
    let mode = cfg.gradient.unwrap_or(GradientMode::Spectral);
    let ts = cfg.time_values()?;
    let vals = exec.map(&ts, |&t| expansion_residual_moyal(h, g, &grid, t, mode, exec));
    let pts = collect_series(&ts, vals)?;
    rec.note(format!("gradient of ghat: {mode:?}"));
    rec.series("residual", pts.clone());
    rec.fit("residual", &pts);
    slope_window(cfg, rec, "residual")
}

fn localization(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let h = cfg.profile("h")?;
    let a = Symbol::separable(cfg.profile("a-x")?, cfg.profile("a-xi")?);
    let ts = cfg.time_values()?;
    let vals = exec.map(&ts, |&t| localization_residual(h, &a, &grid, t, exec));
    let pts = collect_series(&ts, vals)?;
    let last = pts.last().map(|p| p.1).unwrap_or(f64::NAN);
    rec.series("residual", pts.clone());
    rec.fit("residual", &pts);
    rec.scalar("residual-at-largest-t", last);
    rec.check("decay faster than t^-4", "residual.slope", AtMost, cfg.tolerance("slope-max")?);
    rec.check(
        "residual small at largest t",
        "residual-at-largest-t",
        Less,
        cfg.tolerance("residual-max")?,
    );
    Ok(())
}

fn conjugation(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let a = Symbol::separable(cfg.profile("h")?, cfg.profile("ghat")?);
    let ts = cfg.time_values()?;
    let vals = exec.map(&ts, |&t| conjugation_residual(&a, &sigma, &grid, t, exec));
    let pts = collect_series(&ts, vals)?;
    rec.series("residual", pts.clone());
    rec.fit("residual", &pts);
    slope_window(cfg, rec, "residual")
}

fn leakage(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let w = WavePacket::new(cfg.profile("ghat")?.clone());
    let outside = cfg
        .velocity_region
        .as_ref()
        .ok_or_else(|| Error::Config("missing velocity_region".into()))?;
    let ss = cfg.time_values()?;
    let vals = exec.map(&ss, |&s| cone_leakage(&w, &sigma, &grid, outside, s));
    let pts = collect_series(&ss, vals)?;
    let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (onset, mono) = monotone_after_peak(&values);
    rec.scalar("onset", ss[onset]);
    rec.flag("monotone-past-onset", mono);
    rec.series("leakage", pts.clone());
    rec.fit("leakage", &pts);
    rec.check("decay faster than s^-4", "leakage.slope", AtMost, cfg.tolerance("slope-max")?);
    Ok(())
}

fn bostelmann(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let (g, h0) = (cfg.profile("ghat")?, cfg.profile("h0")?);
    let t = cfg.option_or("t", 2.0);
    let max_order = cfg.option_or("max-order", 60.0) as usize;
    let tol = cfg.tolerance("residual-max")?;
    let rep = bostelmann_truncation(g, h0, &grid, t, cfg.tolerance("increment-tol")?, max_order)?;
    rec.series(
        "increments",
        rep.increments.iter().enumerate().map(|(n, v)| (n as f64, *v)).collect(),
    );
    rec.scalar("order", rep.order as f64);
    rec.scalar("orders-summed", rep.orders_summed as f64);
    rec.flag("converged", rep.converged);
    rec.scalar("truncation-residual", rep.truncation_residual);
    rec.scalar("comb-remainder", rep.comb_remainder);
    rec.scalar("full-residual", rep.full_residual);
    rec.scalar("tail-increment", rep.tail_increment);
    rec.scalar("full-residual-over-bound", rep.full_residual / (tol + rep.comb_remainder));
    if !rep.converged {
        rec.note(format!(
            "order cap {max_order} reached; partial sum kept, last increment {:.3e}",
            rep.tail_increment
        ));
    }
    let ts = cfg.time_values()?;
    let comb: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| comb_remainder(g, h0, &grid, t).map(|v| (t, v)))
        .collect::<Result<_>>()?;
    rec.series("comb-remainder", comb.clone());
    rec.fit("comb-remainder", &comb);
    rec.check("truncation converged", "converged", AtLeast, 1.0);
    rec.check("truncation residual", "truncation-residual", Less, tol);
    rec.check(
        "full residual within tolerance plus comb remainder",
        "full-residual-over-bound",
        Less,
        1.0,
    );
    rec.check(
        "comb remainder decays faster than t^-4",
        "comb-remainder.slope",
        AtMost,
        cfg.tolerance("slope-max")?,
    );
    Ok(())
}

/// Random kernel families for the Schur sweep. Families with a dominant singular
/// value keep power iteration fast; the zero-mean family stays small.
fn random_kernel(rng: &mut ChaCha8Rng, max_size: usize, family: usize) -> DMatrix<Complex64> {
    let cap = if family == 3 { max_size.min(32) } else { max_size };
    let n = rng.gen_range(1..=cap);
    let m = if rng.gen_bool(0.5) { n } else { rng.gen_range(1..=cap) };
    let mut entry = |_, _| -> Complex64 {
        match family {
            0 => Complex64::new(rng.gen::<f64>(), 0.0),
            1 => Complex64::new(0.5 + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            2 => {
                if rng.gen_bool(0.05) {
                    Complex64::new(rng.gen::<f64>(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            _ => Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        }
    };
    DMatrix::from_fn(n, m, &mut entry)
}

fn schur(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let samples = cfg.samples.unwrap_or(1000);
    let max_size = cfg.option_or("max-size", 256.0) as usize;
    let extremal = cfg.option_or("extremal-cases", 24.0) as usize;
    let seed = cfg.seed;
    let results: Vec<Result<(f64, f64)>> = exec.map_range(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let k = random_kernel(&mut rng, max_size, i % 4);
        let bound = matrix_schur_bound(&k);
        let norm = match matrix_norm(&k, 1e-10) {
            Ok(v) => v,
            // Every iterate is a lower bound for the norm.
            Err(Error::NormNotConverged { estimate, .. }) => estimate,
            Err(e) => return Err(e),
        };
        Ok((norm, bound))
    });
    let mut ratios = Vec::with_capacity(samples);
    let mut violations = 0;
    for (i, r) in results.into_iter().enumerate() {
        let (norm, bound) = r?;
        if norm > bound * (1.0 + 1e-12) {
            violations += 1;
        }
        ratios.push((i as f64, if bound > 0.0 { norm / bound } else { 0.0 }));
    }
    let defects: Vec<Result<f64>> = exec.map_range(extremal, |i| {
        let mut rng = sample_rng(seed ^ 0xe47e_u64, i);
        let n = rng.gen_range(1..=max_size);
        let c = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let k = DMatrix::from_element(n, n, c);
        let bound = matrix_schur_bound(&k);
        let norm = matrix_norm(&k, 1e-12)?;
        Ok((norm - bound).abs() / bound.max(f64::MIN_POSITIVE))
    });
    let defect = defects
        .into_iter()
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    rec.series("norm-over-bound", ratios);
    rec.scalar("kernels", samples as f64);
    rec.scalar("violations", violations as f64);
    rec.scalar("max-norm-over-bound", max_ratio);
    rec.scalar("extremal-cases", extremal as f64);
    rec.scalar("extremal-max-defect", defect);
    rec.check("norm never exceeds the Schur bound", "violations", AtMost, 0.0);
    rec.check(
        "equality on constant kernels",
        "extremal-max-defect",
        AtMost,
        cfg.tolerance("extremal-defect-max")?,
    );
    Ok(())
}

fn resolve_particles(specs: &[ParticleSpec]) -> Result<Vec<ParticleSupports>> {
    specs
        .iter()
        .map(|p| {
            Ok(ParticleSupports {
                h: p.h.resolve(None)?,
                momentum: p.momentum.resolve(None)?,
            })
        })
        .collect()
}

fn random_cloud(rng: &mut ChaCha8Rng, dim: usize, n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// Extreme points by definition: a point is a vertex iff it lies outside the hull
/// of all the others.
fn brute_force_vertices(pts: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    (0..pts.len())
        .filter(|&i| {
            let others: Vec<&[f64]> = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| p.as_slice())
                .collect();
            others.is_empty() || distance_to_hull(&others, &pts[i]) > tol
        })
        .map(|i| pts[i].clone())
        .collect()
}

fn same_vertices(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    let close = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(x, y)| (x - y).abs() <= tol);
    a.len() == b.len()
        && a.iter().all(|p| b.iter().any(|q| close(p, q)))
        && b.iter().all(|q| a.iter().any(|p| close(p, q)))
}

fn convexity(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let sigma = dispersion(cfg, 1)?;
    let particles = resolve_particles(&cfg.particles)?;
    let dim = particles[0].h.dim();
    let sigma = if sigma.dim() == dim {
        sigma
    } else {
        dispersion(cfg, dim)?
    };
    let delta_max = cfg.option_or("delta-max", 0.05);
    let ladder = cfg.option_or("ladder", 8.0) as usize;
    let rep = check_convexity_chain(&particles, &sigma, delta_max, ladder)?;
    rec.scalar("base-separation", rep.base_separation);
    rec.scalar(
        "base-diagonal-distance",
        rep.ladder.first().map(|_| rep.base_separation / 2f64.sqrt()).unwrap_or(f64::NAN),
    );
    rec.scalar("threshold", rep.threshold);
    rec.scalar("bisection-width", rep.bisection_width);
    rec.flag("positive-below-threshold", rep.positive_below_threshold);
    rec.flag("inclusions-hold", rep.ladder.iter().all(|s| s.inclusion_holds));
    rec.series("ladder-separation", rep.ladder.iter().map(|s| (s.delta, s.separation)).collect());
    rec.series(
        "ladder-chain-separation",
        rep.ladder.iter().map(|s| (s.delta, s.chain_separation)).collect(),
    );

    let rejected = if cfg.overlapping_particles.is_empty() {
        None
    } else {
        let overlap = resolve_particles(&cfg.overlapping_particles)?;
        Some(match check_convexity_chain(&overlap, &sigma, delta_max, ladder) {
            Ok(_) => false,
            Err(Error::Precondition { message, .. }) => {
                rec.note(format!("overlapping fixture rejected: {message}"));
                true
            }
            Err(e) => return Err(e),
        })
    };
    if let Some(r) = rejected {
        rec.flag("overlap-rejected", r);
        rec.check("overlapping fixture rejected", "overlap-rejected", AtLeast, 1.0);
    }

    let clouds = cfg.samples.unwrap_or(500);
    let size = cfg.option_or("cloud-size", 8.0) as usize;
    let vtol = cfg.tolerance("vertex-tol")?;
    let seed = cfg.seed;
    let results: Vec<Result<bool>> = exec.map_range(clouds, |i| {
        let mut rng = sample_rng(seed, i);
        let d = 2 + i % 2;
        let x = RegionSet::from_points(d, random_cloud(&mut rng, d, size, 1.0), 0.0)?;
        let y = RegionSet::from_points(d, random_cloud(&mut rng, d, size, 1.0), 0.0)?;
        let sum = minkowski_sum(&x, &y)?;
        let oracle = brute_force_vertices(&sum.to_vecs(), 1e-10);
        let lhs = convex_hull(&sum).to_vecs();
        let rhs = convex_hull(&minkowski_sum(&convex_hull(&x), &convex_hull(&y))?).to_vecs();
        Ok(same_vertices(&lhs, &oracle, vtol) && same_vertices(&rhs, &oracle, vtol))
    });
    let mut mismatches = 0;
    for r in results {
        if !r? {
            mismatches += 1;
        }
    }
    rec.scalar("hull-minkowski-clouds", clouds as f64);
    rec.scalar("hull-minkowski-mismatches", mismatches as f64);
    rec.check("hull of sum equals sum of hulls", "hull-minkowski-mismatches", AtMost, 0.0);
    rec.check("positive delta threshold", "threshold", Greater, 0.0);
    rec.check(
        "separation positive on the ladder",
        "positive-below-threshold",
        AtLeast,
        1.0,
    );
    Ok(())
}

fn cone_sweep(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let samples = cfg.samples.unwrap_or(100_000);
    let max_dim = (cfg.option_or("max-dim", 3.0) as usize).max(1);
    let size = (cfg.option_or("cloud-size", 6.0) as usize).max(1);
    let seed = cfg.seed;
    // (violation, first membership true)
    let results: Vec<Result<(bool, bool)>> = exec.map_range(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let d = 1 + i % max_dim;
        let mut pts = random_cloud(&mut rng, d, size, 1.0);
        // Shifting by the centroid puts the origin inside the hull.
        let c: Vec<f64> = (0..d)
            .map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64)
            .collect();
        for p in pts.iter_mut() {
            for (v, cj) in p.iter_mut().zip(&c) {
                *v -= cj;
            }
        }
        let t = rng.gen_range(0.1..5.0);
        let s = t * (1.0 + rng.gen_range(0.0..4.0));
        // Every fourth sample sits exactly on a boundary ray.
        let x: Vec<f64> = if i % 4 == 0 {
            let v = &pts[rng.gen_range(0..pts.len())];
            v.iter().map(|c| c * t).collect()
        } else {
            (0..d).map(|_| rng.gen_range(-3.0..3.0) * t).collect()
        };
        let k = RegionSet::from_points(d, pts, 0.0)?;
        let (a, b) = Cone::new(&k)?.check(&x, t, s)?;
        Ok((a && !b, a))
    });
    let mut violations = 0;
    let mut inside = 0;
    for r in results {
        let (v, a) = r?;
        violations += v as usize;
        inside += a as usize;
    }
    rec.scalar("samples", samples as f64);
    rec.scalar("violations", violations as f64);
    rec.scalar("first-membership-true", inside as f64);
    rec.check("no monotonicity violations", "violations", AtMost, 0.0);
    Ok(())
}

fn normalized(psi: LatticeState) -> LatticeState {
    let n = psi.norm();
    if n > 0.0 {
        psi.scale(Complex64::new(1.0 / n, 0.0))
    } else {
        psi
    }
}

fn packet(cfg: &ExperimentConfig, sigma: &Dispersion) -> Result<LatticeState> {
    let grid = cfg.torus()?;
    let w = WavePacket::new(cfg.profile("ghat")?.clone());
    Ok(normalized(wave_packet_state(&w, sigma, &grid)?))
}

fn model(cfg: &ExperimentConfig, sigma: &Dispersion) -> Result<HamiltonianModel> {
    let grid = cfg.torus()?;
    let v = cfg
        .potential
        .as_ref()
        .map(|p| p.sample(&grid))
        .unwrap_or_else(|| vec![0.0; grid.len()]);
    HamiltonianModel::new(grid, sigma.clone(), v, ModelOptions::default())
}

fn spec(cfg: &ExperimentConfig, enforce: bool) -> Result<DetectorSpec> {
    Ok(DetectorSpec {
        chi: cfg.profile("chi")?.clone(),
        h: cfg.profile("h")?.clone(),
        enforce_support_constraints: enforce,
    })
}

fn free_limit(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let m = HamiltonianModel::new(grid, sigma.clone(), vec![0.0; grid.len()], ModelOptions::default())?;
    let psi = packet(cfg, &sigma)?;
    let sp = spec(cfg, false)?;
    let t = cfg.option_or("t", 200.0);
    let value = detector_expectation(&m, &sp, &psi, t)?;
    let oracle = free_limit_oracle(&sigma, &sp, &psi);
    rec.scalar("t", t);
    rec.scalar("expectation", value);
    rec.scalar("oracle", oracle);
    rec.scalar("abs-error", (value - oracle).abs());
    rec.check("matches the momentum-space limit", "abs-error", AtMost, cfg.tolerance("abs-max")?);
    Ok(())
}

fn annihilation(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let m = model(cfg, &sigma)?;
    let bound = m.bound_states();
    rec.scalar("bound-states", bound.len() as f64);
    rec.scalar("eigen-residual", m.max_eigen_residual());
    rec.check("eigenpairs accurate", "eigen-residual", Less, 1e-9);
    rec.check("attractive well binds", "bound-states", AtLeast, 1.0);
    let Some((energy, psi)) = bound.first() else {
        rec.scalar("expectation", f64::NAN);
        return Ok(());
    };
    let sp = spec(cfg, false)?;
    let supports = sp.support_report(&sigma, &grid);
    rec.flag("origin-outside-h", supports.origin_outside_h);
    let t = cfg.option_or("t", 200.0);
    rec.scalar("t", t);
    rec.scalar("bound-energy", *energy);
    rec.scalar("expectation", detector_expectation(&m, &sp, psi, t)?);
    rec.check("h vanishes at zero velocity", "origin-outside-h", AtLeast, 1.0);
    rec.check(
        "detector annihilates the bound state",
        "expectation",
        AtMost,
        cfg.tolerance("expectation-max")?,
    );
    Ok(())
}

fn cook(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let m = model(cfg, &sigma)?;
    let psi = packet(cfg, &sigma)?;
    let step = cfg.option_or("step", 1.0);
    let panels = cfg.option_or("quadrature-panels", 128.0) as usize;
    let ts = cfg.time_values()?;
    let runs: Vec<Result<(f64, f64, f64, f64, f64, Vec<String>)>> = exec.map(&ts, |&t| {
        let a = cook_wave_operator(&m, &psi, t, step)?;
        let b = cook_wave_operator(&m, &psi, 2.0 * t, step)?;
        let diff = b.state.sub(&a.state).norm();
        let bound = cook_integral(&m, &psi, t, 2.0 * t, panels / 2);
        let drift = (a.state.norm() - psi.norm())
            .abs()
            .max((b.state.norm() - psi.norm()).abs());
        let mut warnings = a.warnings;
        warnings.extend(b.warnings);
        Ok((cook_integrand(&m, &psi, t), diff, bound, drift, a.intertwining_residual, warnings))
    });
    let mut integrand = Vec::new();
    let mut diffs = Vec::new();
    let mut bounds = Vec::new();
    let mut drift = 0.0f64;
    let mut intertwining = 0.0f64;
    for (t, r) in ts.iter().zip(runs) {
        let (f, d, b, dr, iw, warnings) = r?;
        integrand.push((*t, f));
        diffs.push((*t, d));
        bounds.push((*t, b));
        drift = drift.max(dr);
        intertwining = intertwining.max(iw);
        for w in warnings {
            rec.note(format!("T = {t}: {w}"));
        }
    }
    let monotone = diffs.windows(2).all(|w| w[1].1 < w[0].1);
    let over = diffs
        .iter()
        .zip(&bounds)
        .map(|(d, b)| if b.1 > 0.0 { d.1 / b.1 } else if d.1 > 0.0 { f64::INFINITY } else { 0.0 })
        .fold(0.0, f64::max);
    let largest = ts.last().copied().unwrap_or(0.0);
    let samples = cook_wave_operator(&m, &psi, 2.0 * largest, step)?.integrand;
    rec.series("integrand-samples", samples);
    rec.series("integrand", integrand.clone());
    rec.series("cauchy-difference", diffs.clone());
    rec.series("cook-bound", bounds);
    rec.fit("integrand", &integrand);
    rec.fit("cauchy-difference", &diffs);
    let consistency = match (
        rec.scalars.get("cauchy-difference.slope"),
        rec.scalars.get("integrand.slope"),
    ) {
        (Some(d), Some(f)) => d.0 - (f.0 + 1.0),
        _ => f64::NAN,
    };
    rec.scalar("tail-rate-excess", consistency);
    rec.flag("difference-decreasing", monotone);
    rec.scalar("difference-over-bound", over);
    rec.scalar("norm-drift", drift);
    rec.scalar("intertwining-residual", intertwining);
    rec.check("integrand decays", "integrand.slope", AtMost, cfg.tolerance("slope-max")?);
    rec.check("Cauchy differences decrease", "difference-decreasing", AtLeast, 1.0);
    rec.check("differences within the Cook bound", "difference-over-bound", AtMost, 1.0);
    rec.check(
        "differences decay at the integrated rate",
        "tail-rate-excess",
        AtMost,
        0.0,
    );
    rec.check("norm preserved", "norm-drift", Less, cfg.tolerance("norm-drift-max")?);
    Ok(())
}

fn compactness(cfg: &ExperimentConfig, exec: Exec, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let m = model(cfg, &sigma)?;
    let bound = m.bound_states();
    let k = (cfg.option_or("bound-states", 1.0) as usize).max(1);
    if bound.len() < k {
        return Err(Error::pre(
            "compactness_chain_study",
            format!("model has {} bound states, {k} requested", bound.len()),
        ));
    }
    let mut psi = LatticeState::zeros(grid);
    for (_, v) in &bound[..k] {
        psi = psi.add(v);
    }
    let psi = normalized(psi);
    let sp = spec(cfg, true)?;
    let ts = cfg.time_values()?;
    let threshold = cfg.tolerance("threshold")?;
    let tail_steps = cfg.option_or("tail-steps", 32.0) as usize;
    let rep = compactness_chain_study(&m, &sp, &psi, &ts, tail_steps, threshold, exec)?;
    rec.series("detector-norm", ts.iter().copied().zip(rep.detector_norm.iter().copied()).collect());
    rec.series("tail-proxy", ts.iter().copied().zip(rep.tail_proxy.iter().copied()).collect());
    rec.fit("detector-norm", &ts.iter().copied().zip(rep.detector_norm.iter().copied()).collect::<Vec<_>>());
    rec.scalar("onset", rep.onset_time);
    rec.flag("monotone-past-onset", rep.monotone_past_onset);
    rec.scalar("final-norm", *rep.detector_norm.last().unwrap_or(&f64::NAN));
    rec.scalar("decayed-at", rep.decayed_at.unwrap_or(f64::INFINITY));
    rec.flag("inconclusive", rep.inconclusive);
    rec.scalar("cone-checks", rep.cone_checks as f64);
    rec.scalar("cone-violations", rep.cone_violations as f64);
    rec.flag("velocity-reading", rep.supports.velocity_reading);
    rec.flag("momentum-reading", rep.supports.momentum_reading);
    rec.scalar("tail-horizon", rep.tail_horizon);
    if rep.inconclusive {
        rec.note("t-grid ends before the decay threshold: inconclusive");
    }
    rec.check("monotone decay past onset", "monotone-past-onset", AtLeast, 1.0);
    rec.check("decays below threshold", "final-norm", Less, threshold);
    rec.check("cone inequality holds", "cone-violations", AtMost, 0.0);
    Ok(())
}

fn admissible(cfg: &ExperimentConfig, rec: &mut Recorder) -> Result<()> {
    let grid = cfg.torus()?;
    let sigma = dispersion(cfg, grid.dim())?;
    let a = cfg
        .admissibility
        .as_ref()
        .ok_or_else(|| Error::Config("missing admissibility".into()))?;
    let model = SpectrumModel::free(
        &sigma,
        &grid,
        cfg.option_or("max-particles", 2.0) as usize,
        cfg.option_or("energy-cap", 4.0),
    )?;
    let shell = Some((&sigma, &grid));
    let delta = a.delta.resolve(shell)?;
    let spectra: Vec<RegionSet> = a
        .spectra
        .iter()
        .map(|s| s.resolve(shell))
        .collect::<Result<_>>()?;
    let tol = cfg.tolerance("tol")?;
    let rep = check_delta_admissible(&delta, &spectra, &model, Some(tol));
    let (iso_ground, iso_multi) = model.isolation();
    rec.scalar("tol", rep.tol);
    rec.scalar("grid-spacing", grid.spacing());
    rec.flag("admissible", rep.admissible);
    rec.scalar("margin.spectra-on-shell", rep.margins.spectra_on_shell);
    rec.scalar("margin.sumset-inside", rep.margins.sumset_inside);
    rec.scalar("margin.difference-avoids-spectrum", rep.margins.difference_avoids_spectrum);
    rec.scalar("isolation.ground", iso_ground);
    rec.scalar("isolation.multi-particle", iso_multi);
    for d in &rep.diagnostics {
        rec.note(d.clone());
    }
    let margin_floor = 2.0 * grid.spacing();
    if a.expect_admissible {
        rec.check("verdict admissible", "admissible", AtLeast, 1.0);
        for m in ["spectra-on-shell", "sumset-inside", "difference-avoids-spectrum"] {
            rec.check(
                &format!("{m} margin exceeds twice the grid spacing"),
                &format!("margin.{m}"),
                Greater,
                margin_floor,
            );
        }
    } else {
        rec.check("verdict not admissible", "admissible", AtMost, 0.0);
        if let Some(f) = &a.expect_failing {
            rec.check(
                &format!("{f} fails by more than twice the grid spacing"),
                &format!("margin.{f}"),
                Less,
                -margin_floor,
            );
        }
    }
    Ok(())
}
