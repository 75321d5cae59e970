use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use homotopy_opt::harness::{self, ExperimentConfig, ResolvedConfig};
use homotopy_opt::theory::{theory_report, TheoryConstants};
use homotopy_opt::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(
    name = "homotopy-opt",
    version,
    about = "Homotopy SGD experiments and bound calculators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run SGD and/or homotopy SGD over seeded repeats and write traces.
    Run {
        #[command(flatten)]
        common: Common,
        /// Override the number of repeats.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Evaluate the bound calculators for a constants file.
    Theory {
        #[arg(long)]
        constants: PathBuf,
        /// Also print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Accepted for uniformity; the calculators are deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate landscape constants for an experiment.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
    /// Write the experiment dataset as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON), or a metadata file from a previous run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Data(_) | Error::Domain(_) | Error::Json(_) => EXIT_CONFIG,
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

fn config_failure(e: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: e,
    }
}

fn load(common: &Common, repeats: Option<usize>) -> Result<ResolvedConfig, Failure> {
    let mut cfg = ExperimentConfig::from_path(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))
        .map_err(config_failure)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = Some(seed);
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    if repeats.is_some() {
        cfg.repeats = repeats;
    }
    Ok(cfg.resolve()?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, repeats } => {
            let cfg = load(&common, repeats)?;
            let (outcome, dir) = harness::run_experiment(&cfg)?;
            print!("{}", outcome.report.to_text());
            println!("output            {}", dir.display());
            if let Some(failed) = outcome.arms.iter().find(|a| a.failure.is_some()) {
                return Err(Failure {
                    code: EXIT_RUNTIME,
                    error: anyhow::anyhow!(
                        "arm {:?} failed: {}",
                        failed.method,
                        failed.failure.as_deref().unwrap_or("")
                    ),
                });
            }
        }
        Command::Theory {
            constants, json, ..
        } => {
            let text = std::fs::read_to_string(&constants)
                .with_context(|| format!("reading {}", constants.display()))
                .map_err(config_failure)?;
            let c = TheoryConstants::from_json(&text)?;
            let report = theory_report(&c)?;
            print!("{}", report.to_text());
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report)
                        .map_err(|e| Failure::from(Error::from(e)))?
                );
            }
            let failed: Vec<String> = report.failed_checks().map(|c| c.key.clone()).collect();
            if !failed.is_empty() {
                return Err(Failure {
                    code: EXIT_INFEASIBLE,
                    error: anyhow::anyhow!("failed checks: {}", failed.join(", ")),
                });
            }
        }
        Command::Diagnose { common } => {
            let cfg = load(&common, None)?;
            let outcome = harness::run_diagnose(&cfg)?;
            print!("{}", outcome.estimates.to_key_value());
            println!("output             = {}", cfg.output_dir.display());
        }
        Command::GenData { common } => {
            let cfg = load(&common, None)?;
            let path = harness::gen_data(&cfg)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    fn exit_code(args: &[&str]) -> u8 {
        let cli = Cli::try_parse_from(std::iter::once("homotopy-opt").chain(args.iter().copied()))
            .unwrap();
        match run(cli) {
            Ok(()) => 0,
            Err(f) => f.code,
        }
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path.to_string_lossy().into_owned()
    }

    const FEASIBLE: &str = r#"{"L": 1.0, "mu": 1.0, "sigma2": 0.02, "delta": 0.5, "gamma": 0.5, "B": 1.0, "r": 0.5, "alpha": 0.1, "k": 7}"#;

    #[test]
    fn theory_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            exit_code(&[
                "theory",
                "--constants",
                &write(dir.path(), "ok.json", FEASIBLE)
            ]),
            0
        );
        let too_small_basin = FEASIBLE.replace(r#""B": 1.0"#, r#""B": 0.001"#);
        let bad = write(dir.path(), "bad.json", &too_small_basin);
        assert_eq!(
            exit_code(&["theory", "--constants", &bad, "--json"]),
            EXIT_INFEASIBLE
        );
        let missing = dir.path().join("absent.json");
        assert_eq!(
            exit_code(&["theory", "--constants", missing.to_str().unwrap()]),
            EXIT_CONFIG
        );
        let garbled = write(dir.path(), "garbled.json", "{\"L\": 1.0,");
        assert_eq!(exit_code(&["theory", "--constants", &garbled]), EXIT_CONFIG);
    }

    #[test]
    fn invalid_experiment_configs_exit_with_config_code() {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("unknown.json", r#"{"experiment": "toy-erf", "colour": 1}"#),
            ("repeats.json", r#"{"experiment": "toy-erf", "repeats": 0}"#),
            (
                "batch.json",
                r#"{"experiment": "toy-erf", "optimizer": {"minibatch": 1000}}"#,
            ),
            (
                "eta.json",
                r#"{"experiment": "toy-erf", "optimizer": {"eta": -1.0}}"#,
            ),
        ] {
            let cfg = write(dir.path(), name, text);
            assert_eq!(exit_code(&["run", "--config", &cfg]), EXIT_CONFIG, "{name}");
        }
    }

    #[test]
    fn divergence_exits_with_runtime_code() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(
            dir.path(),
            "diverge.json",
            r#"{"experiment": "synthetic-lq", "optimizer": {"step_size": 1e200}, "repeats": 2}"#,
        );
        let out = dir.path().join("out");
        assert_eq!(
            exit_code(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]),
            EXIT_RUNTIME
        );
    }

    #[test]
    fn run_overrides_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "lq.json", r#"{"experiment": "synthetic-lq"}"#);
        let first = dir.path().join("first");
        let args = [
            "run",
            "--config",
            &cfg,
            "--seed",
            "5",
            "--repeats",
            "3",
            "--out",
            first.to_str().unwrap(),
        ];
        assert_eq!(exit_code(&args), 0);
        let meta = first.join("metadata.json");
        let recorded: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
        assert_eq!(recorded["config"]["master_seed"], 5);
        assert_eq!(recorded["config"]["repeats"], 3);

        let second = dir.path().join("second");
        assert_eq!(
            exit_code(&[
                "run",
                "--config",
                meta.to_str().unwrap(),
                "--out",
                second.to_str().unwrap()
            ]),
            0
        );
        for name in ["sgd.csv", "hsgd.csv"] {
            assert_eq!(
                std::fs::read(first.join(name)).unwrap(),
                std::fs::read(second.join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn gen_data_and_diagnose_write_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "toy.json", r#"{"experiment": "toy-erf"}"#);
        let out = dir.path().join("data");
        assert_eq!(
            exit_code(&["gen-data", "--config", &cfg, "--out", out.to_str().unwrap()]),
            0
        );
        assert!(std::fs::read_dir(&out).unwrap().count() >= 1);

        let cfg = write(
            dir.path(),
            "moons.json",
            r#"{"experiment": "moons-logistic", "dataset": {"n": 40}}"#,
        );
        let out = dir.path().join("diag");
        assert_eq!(
            exit_code(&["diagnose", "--config", &cfg, "--out", out.to_str().unwrap()]),
            0
        );
        assert!(std::fs::read_dir(&out).unwrap().count() >= 1);
    }
}
