use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fenand::config::{Diagnostic, ExperimentConfig, OutputFormat, MAX_CONFIG_LEN};
use fenand::experiments::{self, CalibrationTargets, ExperimentId};

/// Runs FeFET NAND disturb experiments and writes plot-ready tables.
#[derive(Parser)]
#[command(name = "fenand", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its tables plus a metadata sidecar.
    Run {
        /// Experiment id; see `fenand list`.
        experiment: ExperimentId,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Fit the switching kinetics and write `calibrated.toml`.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without simulating. Prints the resolved config when
    /// valid, otherwise a JSON list of diagnostics.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List experiment ids.
    List,
}

enum Failure {
    /// Bad input: config, arguments.
    Usage(String),
    /// Solver or extraction failure.
    Run(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            out,
            format,
        } => run(experiment, config.as_deref(), seed, out, format),
        Command::Calibrate { config, seed, out } => calibrate(config.as_deref(), seed, out),
        Command::Validate { config } => return validate(config.as_deref()),
        Command::List => {
            for id in ExperimentId::ALL {
                println!("{:<15} {}", id.as_str(), id.description());
            }
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<ExperimentConfig, Diagnostic> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let whole = |message: String| Diagnostic {
        path: String::new(),
        message,
    };
    let meta = std::fs::metadata(path).map_err(|e| whole(format!("{}: {e}", path.display())))?;
    if meta.len() > MAX_CONFIG_LEN as u64 {
        return Err(whole(format!("{}: larger than {MAX_CONFIG_LEN} bytes", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| whole(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn load(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = read_config(path).map_err(|d| Failure::Usage(format!("config {d}")))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let diags = cfg.validate();
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(|d| format!("  {d}")).collect();
        return Err(Failure::Usage(format!("invalid config:\n{}", lines.join("\n"))));
    }
    Ok(cfg)
}

fn run(
    id: ExperimentId,
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
) -> Result<(), Failure> {
    let mut cfg = load(config, seed)?;
    if let Some(named) = cfg.experiment.as_deref() {
        if named != id.as_str() {
            return Err(Failure::Usage(format!(
                "config is for experiment {named}, not {id}"
            )));
        }
    }
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    if let Some(f) = format {
        cfg.output.format = f;
    }
    let t0 = Instant::now();
    let output = experiments::run(id, &cfg).map_err(|e| Failure::Run(format!("{id}: {e}")))?;
    experiments::write_outputs(&output, &cfg, &cfg.output.dir, cfg.output.format)
        .map_err(|e| Failure::Run(format!("{id}: writing outputs: {e}")))?;
    println!(
        "{id} {} elapsed={:.3}s",
        output.summary_line(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

fn calibrate(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(config, seed)?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let targets = CalibrationTargets::default();
    let t0 = Instant::now();
    let (fitted, report) = experiments::calibrate(&cfg, &targets).map_err(|e| Failure::Run(format!("calibrate: {e}")))?;
    let write = |name: &str, body: String| -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))?;
        Ok(p)
    };
    let toml = fitted.to_toml().map_err(|e| Failure::Run(e.to_string()))?;
    write("calibrated.toml", toml)?;
    let report_json = serde_json::json!({ "targets": targets, "report": report });
    write(
        "calibration.json",
        serde_json::to_string_pretty(&report_json).expect("report serializes") + "\n",
    )?;
    let flip = match report.eval.flip_time {
        Some(t) => format!("{t:.4e}"),
        None => "none".into(),
    };
    println!(
        "calibrate moves={} evaluations={} flip_{}v_s={flip} hold_dvth_v={:.4e} write_fraction={:.4} residual={:.4e} elapsed={:.3}s",
        report.moves,
        report.evaluations,
        targets.flip_v_pass,
        report.eval.hold_dvth,
        report.eval.write_fraction,
        report.eval.residual,
        t0.elapsed().as_secs_f64()
    );
    if report.converged {
        Ok(())
    } else {
        Err(Failure::Run(format!(
            "targets not reached (best residual {:.4e}): {}",
            report.eval.residual,
            report.failing.join("; ")
        )))
    }
}

fn validate(config: Option<&Path>) -> ExitCode {
    let diags = match read_config(config) {
        Ok(cfg) => {
            let d = cfg.validate();
            if d.is_empty() {
                match cfg.to_toml() {
                    Ok(t) => {
                        print!("{t}");
                        return ExitCode::SUCCESS;
                    }
                    Err(e) => vec![Diagnostic {
                        path: String::new(),
                        message: e.to_string(),
                    }],
                }
            } else {
                d
            }
        }
        Err(d) => vec![d],
    };
    println!("{}", serde_json::to_string_pretty(&diags).expect("diagnostics serialize"));
    ExitCode::from(2)
}
