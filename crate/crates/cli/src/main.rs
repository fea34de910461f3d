use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use phctl_core::chemistry::{beta_grid, titration_curve, EquilibriumConstants};
use phctl_core::harness::{
    compute_metrics, experiment_1, experiment_2, experiment_3, plot, plot_comparison, run_experiment_with, run_tune,
    ExperimentConfig, Metrics, SimTrace, TuneConfig,
};
use phctl_core::{Error, FuzzyController};

/// Simulate a fuzzy/PID cascade on an acid-base neutralization tank.
#[derive(Parser)]
#[command(name = "phctl", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Titration curve at fixed sulfate concentration.
    Titrate {
        /// Sulfate invariant, mol/L.
        #[arg(long)]
        alpha: f64,
        /// Largest sodium invariant, mol/L.
        #[arg(long)]
        beta_max: f64,
        #[arg(long, default_value_t = 201)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find the ultimate point of the flow loop and print Ziegler-Nichols gains.
    Tune {
        /// Tuning config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one experiment config.
    Run {
        /// Experiment config, JSON.
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV.
        #[arg(long)]
        out: PathBuf,
        /// SVG chart of pH against setpoint.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Write per-segment metrics here as JSON.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Replacement fuzzy rule table.
        #[arg(long)]
        fuzzy: Option<PathBuf>,
    },
    /// Step 7 -> 10 -> 7.
    Exp1 {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Square wave between 7 and 10.
    Exp2 {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Hybrid against fuzzy-only on a staircase between 6 and 10.
    Exp3 {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run two configs and overlay them.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_json(&read_text(path)?).with_context(|| format!("loading {}", path.display()))?;
    Ok(cfg)
}

fn load_fuzzy(path: Option<&Path>) -> Result<FuzzyController> {
    match path {
        None => Ok(FuzzyController::default()),
        Some(p) => {
            let fc = FuzzyController::from_json(&read_text(p)?).map_err(Error::from)?;
            Ok(fc)
        }
    }
}

fn simulate(cfg: &ExperimentConfig, fuzzy: FuzzyController) -> Result<(SimTrace, Metrics)> {
    let trace = run_experiment_with(cfg, fuzzy)?;
    let metrics = compute_metrics(&trace, &cfg.schedule)?;
    Ok((trace, metrics))
}

fn write_json(path: &Path, value: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn titrate(alpha: f64, beta_max: f64, steps: usize, out: &Path) -> Result<()> {
    if !(beta_max >= 0.0 && beta_max.is_finite()) || steps < 2 {
        return Err(Error::Config(format!("need beta-max >= 0 and steps >= 2, got {beta_max} and {steps}")).into());
    }
    let curve =
        titration_curve(alpha, &beta_grid(beta_max, steps), EquilibriumConstants::DEFAULT).map_err(Error::from)?;
    let mut s = String::from("beta_mol_per_l,ph\n");
    for (b, ph) in curve {
        s.push_str(&format!("{b},{ph}\n"));
    }
    fs::write(out, s).with_context(|| format!("writing {}", out.display()))
}

fn tune(config: Option<&Path>) -> Result<()> {
    let cfg = match config {
        None => TuneConfig::default(),
        Some(p) => TuneConfig::from_json(&read_text(p)?)?,
    };
    let (u, g) = run_tune(&cfg)?;
    println!("ultimate gain {:.4}  period {:.3} s", u.g, u.p);
    println!("kp {:.4}  ki {:.6} 1/s  kd {:.4} s", g.kp, g.ki, g.kd);
    println!("{}", serde_json::json!({ "ultimate": u, "gains": g }));
    Ok(())
}

fn run(
    config: &Path,
    out: &Path,
    plot_path: Option<&Path>,
    metrics: Option<&Path>,
    fuzzy: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let (trace, m) = simulate(&cfg, load_fuzzy(fuzzy)?)?;
    trace.write_csv(out)?;
    if let Some(p) = plot_path {
        plot(&trace, &cfg.schedule, p)?;
    }
    if let Some(p) = metrics {
        write_json(p, serde_json::to_value(&m)?)?;
    }
    print!("{}", m.table());
    Ok(())
}

/// Writes config, trace, chart and metrics for a single-leg preset.
fn preset(name: &str, cfg: ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (trace, m) = simulate(&cfg, FuzzyController::default())?;
    fs::write(dir.join(format!("{name}.json")), cfg.to_json() + "\n")?;
    trace.write_csv(dir.join(format!("{name}.csv")))?;
    plot(&trace, &cfg.schedule, dir.join(format!("{name}.svg")))?;
    write_json(&dir.join("metrics.json"), serde_json::to_value(&m)?)?;
    print!("{}", m.table());
    Ok(())
}

/// Runs both legs on their own threads, then writes both traces, an overlay
/// chart and the metrics of each.
fn compare_pair(legs: [(&str, ExperimentConfig); 2], dir: &Path, chart: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let [(na, ca), (nb, cb)] = legs;
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| simulate(&ca, FuzzyController::default()));
        let hb = s.spawn(|| simulate(&cb, FuzzyController::default()));
        (ha.join().expect("leg a panicked"), hb.join().expect("leg b panicked"))
    });
    let ((ta, ma), (tb, mb)) = (ra?, rb?);
    ta.write_csv(dir.join(format!("{na}.csv")))?;
    tb.write_csv(dir.join(format!("{nb}.csv")))?;
    plot_comparison(&[(na, &ta), (nb, &tb)], &ca.schedule, dir.join(chart))?;
    write_json(&dir.join("metrics.json"), serde_json::json!({ na: ma, nb: mb }))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{na}")?;
    write!(out, "{}", ma.table())?;
    writeln!(out, "{nb}")?;
    write!(out, "{}", mb.table())?;
    Ok(())
}

fn leg_name(path: &Path, fallback: &str) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or(fallback).to_string()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Titrate { alpha, beta_max, steps, out } => titrate(alpha, beta_max, steps, &out),
        Cmd::Tune { config } => tune(config.as_deref()),
        Cmd::Run { config, out, plot, metrics, fuzzy } => {
            run(&config, &out, plot.as_deref(), metrics.as_deref(), fuzzy.as_deref())
        }
        Cmd::Exp1 { out_dir } => preset("exp1", experiment_1(), &out_dir),
        Cmd::Exp2 { out_dir } => preset("exp2", experiment_2(), &out_dir),
        Cmd::Exp3 { out_dir } => {
            let (h, f) = experiment_3();
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("exp3_hybrid.json"), h.to_json() + "\n")?;
            fs::write(out_dir.join("exp3_fuzzy_only.json"), f.to_json() + "\n")?;
            compare_pair([("hybrid", h), ("fuzzy_only", f)], &out_dir, "exp3.svg")
        }
        Cmd::Compare { config_a, config_b, out_dir } => {
            let (ca, cb) = (load_config(&config_a)?, load_config(&config_b)?);
            let (mut na, mut nb) = (leg_name(&config_a, "a"), leg_name(&config_b, "b"));
            if na == nb {
                na.push_str("_a");
                nb.push_str("_b");
            }
            compare_pair([(&na, ca), (&nb, cb)], &out_dir, "compare.svg")
        }
    }
}

/// 2 for bad configuration, 3 when the simulation diverged, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_config() => 2,
        Some(e) if e.is_divergence() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phctl_core::plant::PlantError;

    #[test]
    fn exit_codes() {
        let cfg = anyhow::Error::from(Error::Config("x".into())).context("loading");
        assert_eq!(exit_code(&cfg), 2);
        let div = anyhow::Error::from(Error::Plant(PlantError::StateDiverged { t: 3.0 }));
        assert_eq!(exit_code(&div), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }
}
