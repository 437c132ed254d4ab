use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latwave::harness::{self, presets, Experiment, ExperimentConfig, RunRecord};
use latwave::Exec;

#[derive(Parser)]
#[command(name = "latwave", version, about = "Run lattice scattering verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one lemma check (moyal, localization, conjugation, cone-leakage,
    /// bostelmann, schur, convexity-chain, cone-monotone).
    Lemma {
        id: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run one detector study (free-limit, bound-annihilation, cook, compactness-chain).
    Detector {
        study: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check an admissibility config file, or one of the built-in fixtures by name.
    Admissible {
        #[arg(value_name = "CONFIG")]
        target: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the full acceptance battery with the built-in configurations.
    Suite {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-evaluate every summary.json below a results directory.
    Report { dir: PathBuf },
    /// Print a built-in configuration as JSON, by run name or experiment id.
    Preset { name: Option<String> },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config replacing the built-in one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for summary.json and per-series CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the experiment's absolute tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn load(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ExperimentConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn configs_for(
    kind: &str,
    id: &str,
    allowed: &[Experiment],
    run: &RunArgs,
) -> Result<Vec<ExperimentConfig>, String> {
    let e = Experiment::from_id(id)
        .filter(|e| allowed.contains(e))
        .ok_or_else(|| {
            let ids: Vec<&str> = allowed.iter().map(|e| e.id()).collect();
            format!("unknown {kind} `{id}`; expected one of {}", ids.join(", "))
        })?;
    match &run.config {
        Some(p) => {
            let c = load(p)?;
            if c.experiment != e {
                return Err(format!(
                    "{} configures `{}`, not `{id}`",
                    p.display(),
                    c.experiment
                ));
            }
            Ok(vec![c])
        }
        None => Ok(presets::for_experiment(e)),
    }
}

fn admissible_configs(arg: &str, run: &RunArgs) -> Result<Vec<ExperimentConfig>, String> {
    if run.config.is_some() {
        return Err("pass the admissibility config as the positional argument".into());
    }
    let builtin = presets::for_experiment(Experiment::Admissible);
    if arg == "all" {
        return Ok(builtin);
    }
    if let Some(c) = builtin.iter().find(|c| c.run_name() == arg) {
        return Ok(vec![c.clone()]);
    }
    let c = load(Path::new(arg))?;
    if c.experiment != Experiment::Admissible {
        return Err(format!("{arg} configures `{}`, not `admissible`", c.experiment));
    }
    Ok(vec![c])
}

fn apply_overrides(mut configs: Vec<ExperimentConfig>, run: &RunArgs, strict: bool) -> Result<Vec<ExperimentConfig>, String> {
    for c in &mut configs {
        if let Some(s) = run.seed {
            c.seed = s;
        }
        if let Some(t) = run.tol {
            match c.experiment.scalar_tolerance() {
                Some(key) => {
                    c.tolerances.insert(key.to_string(), t);
                }
                None if strict => {
                    return Err(format!(
                        "`{}` has no absolute tolerance; set its tolerances in a config file",
                        c.experiment
                    ))
                }
                None => {}
            }
        }
    }
    Ok(configs)
}

fn exec_mode(jobs: Option<usize>) -> Result<Exec, String> {
    match jobs {
        None => Ok(Exec::Parallel),
        Some(0) => Err("--jobs must be at least 1".into()),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())?;
            #[cfg(not(feature = "parallel"))]
            eprintln!("built without the `parallel` feature; ignoring --jobs {n}");
            Ok(Exec::Parallel)
        }
    }
}

fn print_record(r: &RunRecord) {
    let status = if r.passed { "PASS" } else { "FAIL" };
    println!("{status} {} ({})", r.name, r.experiment);
    for v in &r.verdicts {
        println!("  [{}] {}: {}", if v.passed { "ok" } else { "FAIL" }, v.name, v.detail);
    }
    for n in &r.notes {
        println!("  note: {n}");
    }
}

fn execute(configs: Vec<ExperimentConfig>, run: &RunArgs) -> Result<bool, String> {
    let exec = exec_mode(run.jobs)?;
    let mut all = true;
    let mut errors = 0;
    for c in configs {
        match harness::run_with(&c, exec) {
            Ok(r) => {
                print_record(&r);
                if let Some(out) = &run.out {
                    harness::write_record(&r, &out.join(&r.name)).map_err(|e| e.to_string())?;
                }
                all &= r.passed;
            }
            Err(e) => {
                println!("ERROR {}: {e}", c.run_name());
                errors += 1;
            }
        }
    }
    if errors > 0 {
        return Err(format!("{errors} run(s) could not be executed"));
    }
    Ok(all)
}

fn report(dir: &Path) -> Result<bool, String> {
    let r = harness::report(dir).map_err(|e| e.to_string())?;
    for e in &r.entries {
        println!("{} {} ({}) {}", if e.passed { "PASS" } else { "FAIL" }, e.name, e.experiment, e.path);
        for f in &e.failed {
            println!("  {f}");
        }
    }
    println!("{} of {} runs passed", r.entries.iter().filter(|e| e.passed).count(), r.entries.len());
    Ok(r.all_passed)
}

fn preset(name: Option<&str>) -> Result<bool, String> {
    let all = presets::all();
    let Some(name) = name else {
        for c in &all {
            println!("{:<28} {}", c.run_name(), c.experiment);
        }
        return Ok(true);
    };
    let c = all
        .iter()
        .find(|c| c.run_name() == name)
        .or_else(|| all.iter().find(|c| c.experiment.id() == name))
        .ok_or_else(|| format!("no built-in configuration named `{name}`"))?;
    println!("{}", c.to_json());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Lemma { id, run } => configs_for("lemma", id, &Experiment::LEMMAS, run)
            .and_then(|c| apply_overrides(c, run, true))
            .and_then(|c| execute(c, run)),
        Command::Detector { study, run } => configs_for("study", study, &Experiment::STUDIES, run)
            .and_then(|c| apply_overrides(c, run, true))
            .and_then(|c| execute(c, run)),
        Command::Admissible { target, run } => admissible_configs(target, run)
            .and_then(|c| apply_overrides(c, run, true))
            .and_then(|c| execute(c, run)),
        Command::Suite { run } => {
            if run.config.is_some() {
                Err("suite runs the built-in configurations; --config is not accepted".into())
            } else {
                apply_overrides(presets::all(), run, false).and_then(|c| execute(c, run))
            }
        }
        Command::Report { dir } => report(dir),
        Command::Preset { name } => preset(name.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
