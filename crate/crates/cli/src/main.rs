use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfeit_core::pipeline::{self, ExperimentConfig, RunReport};
use mfeit_core::Error;

#[derive(Parser)]
#[command(name = "mfeit", version, about = "Multifrequency impedance tomography: synthetic data and two-stage inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, value_name = "DIR", default_value = "run")]
    out: PathBuf,
    /// Overrides `seed` of the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and ground truth.
    Gen(Common),
    /// Stage A: recover the profile and the perfect-conductor traces.
    Separate(Common),
    /// Stage B: reconstruct the anomaly from the recovered traces.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Use the true traces instead of the Stage A output.
        #[arg(long)]
        bypass_stage_a: bool,
    },
    /// Generate, separate, reconstruct, report and plot.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bypass_stage_a: bool,
    },
    /// Neumann-Poincaré spectrum of the target and decomposition residuals.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 12)]
        modes: usize,
    },
    /// Redraw the figures of a finished run.
    Plot {
        #[arg(long, value_name = "DIR", default_value = "run")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> mfeit_core::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &RunReport) {
    for (k, v) in report.rows() {
        println!("{k:<22} {v}");
    }
    if let Some(t) = report.timings {
        println!(
            "time (s): generate {:.2}, stage A {:.2}, stage B {:.2}, plots {:.2}",
            t.generate, t.stage_a, t.stage_b, t.plots
        );
    }
}

fn wrote(dir: &Path, names: &[&str]) {
    for n in names {
        println!("wrote {}", dir.join(n).display());
    }
}

fn run(cli: Cli) -> mfeit_core::Result<()> {
    use pipeline::io;
    match cli.command {
        Command::Gen(c) => {
            let cfg = load(&c)?;
            pipeline::run_generate(&cfg, &c.out)?;
            wrote(&c.out, &[io::DATASET, io::LIFT, io::TRUTH_U0, io::TARGET_SHAPE]);
        }
        Command::Separate(c) => {
            let cfg = load(&c)?;
            let res = pipeline::run_stage_a(&cfg, &c.out)?;
            let k = res.outcome.state.kappa;
            println!(
                "kappa = ({:.6}, {:.6}, {:.6}) after {} iterations{}",
                k[0],
                k[1],
                k[2],
                res.outcome.history.len() - 1,
                if res.outcome.converged { "" } else { " (not converged)" }
            );
            if !res.outcome.identifiable {
                println!("warning: data do not depend on kappa (zero contrast)");
            }
            wrote(&c.out, &[io::KAPPA_ITERATES, io::U0_RECOVERED, io::U0_DIAGNOSTICS]);
        }
        Command::Reconstruct { common: c, bypass_stage_a } => {
            let cfg = load(&c)?;
            let state = pipeline::run_stage_b(&cfg, &c.out, bypass_stage_a)?;
            let last = state.history.last().expect("history starts with the initial shape");
            print!("stop: {} after {} iterations, J = {:e}", state.stop.label(), last.iter, last.j);
            match last.symdiff {
                Some(d) => println!(", symmetric difference {d:.5}"),
                None => println!(),
            }
            wrote(&c.out, &[io::SHAPE_HISTORY, io::SHAPE_FINAL]);
        }
        Command::Pipeline { common: c, bypass_stage_a } => {
            let cfg = load(&c)?;
            let report = pipeline::run_full_pipeline(&cfg, &c.out, bypass_stage_a)?;
            print_report(&report);
        }
        Command::Spectrum { common: c, modes } => {
            let cfg = load(&c)?;
            for r in pipeline::run_spectrum(&cfg, &c.out, modes)? {
                println!("{:>3} {:.10} {:<5} {:.3e}", r.mode, r.lambda, r.family, r.residual);
            }
            wrote(&c.out, &[io::SPECTRUM]);
        }
        Command::Plot { out } => {
            for p in pipeline::emit_plots(&out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}
