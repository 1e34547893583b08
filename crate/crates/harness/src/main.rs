use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bfe_harness::{cmd_histogram, cmd_landscape, cmd_run, cmd_sweep, ExperimentConfig, HarnessError, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bfe-bench", version, about = "Benchmarks for the BFE learning-rate search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured optimizer and write traces, loss plot and manifest
    Run(Common),
    /// Inner-loop histograms of trace CSVs
    Histogram {
        /// Trace CSVs with an inner_loops column
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Directory for the histogram CSV and SVG files
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Trajectories over the loss contours of a 2D problem
    Landscape(Common),
    /// Re-run optimizers over the tolerance-rule and momentum grid
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; the built-in default for the command when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed (data generation and batch order)
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's step limit
    #[arg(long)]
    max_steps: Option<usize>,
}

impl Common {
    fn load(&self, default: fn() -> ExperimentConfig) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
        let (mut cfg, base) = match &self.config {
            Some(path) => {
                let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
                (ExperimentConfig::load(path)?, base)
            }
            None => (default(), PathBuf::from(".")),
        };
        Overrides { seed: self.seed, out_dir: self.out.clone(), max_steps: self.max_steps }.apply(&mut cfg);
        Ok((cfg, base))
    }
}

fn report(manifest: &bfe_harness::Manifest) {
    for r in &manifest.runs {
        match &r.failure {
            Some(f) => println!("{:<30} FAILED at step {}: {}", r.name, f.step, f.reason),
            None => println!(
                "{:<30} final loss {:.6e}  steps to threshold {:>6}  mean inner loops {:.3}{}",
                r.name,
                r.final_loss.unwrap_or(f64::NAN),
                r.steps_to_threshold.map_or("-".to_string(), |s| s.to_string()),
                r.mean_inner_loops.unwrap_or(0.0),
                r.path_length.map_or(String::new(), |l| format!("  path length {l:.4}")),
            ),
        }
    }
    println!("wrote {}", manifest.config.out_dir.display());
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run(c) => {
            let (cfg, base) = c.load(ExperimentConfig::default)?;
            let manifest = cmd_run(&cfg, &base)?;
            report(&manifest);
            manifest.check()
        }
        Command::Landscape(c) => {
            let (cfg, base) = c.load(ExperimentConfig::landscape_default)?;
            let manifest = cmd_landscape(&cfg, &base)?;
            report(&manifest);
            manifest.check()
        }
        Command::Sweep(c) => {
            let (cfg, base) = c.load(ExperimentConfig::sweep_default)?;
            let out = cmd_sweep(&cfg, &base)?;
            for r in &out.rows {
                println!(
                    "{:<20} {:<40} {:>7} steps to threshold {:>6}  mean inner loops {}",
                    r.name,
                    r.setting,
                    r.status,
                    r.steps_to_threshold.map_or("-".to_string(), |s| s.to_string()),
                    r.mean_inner_loops.map_or("-".to_string(), |m| format!("{m:.3}")),
                );
            }
            println!("wrote {}", out.csv.display());
            let failed = out.rows.iter().filter(|r| r.status != "ok").count();
            if failed > 0 {
                return Err(HarnessError::RunsFailed { failed, total: out.rows.len() });
            }
            Ok(())
        }
        Command::Histogram { traces, out } => {
            for h in cmd_histogram(&traces, &out)? {
                let bins: Vec<String> = h.histogram.bins.iter().map(|(k, n)| format!("{k}:{n}")).collect();
                println!("{}  mean {:.3}  {{{}}}", h.trace.display(), h.histogram.mean, bins.join(", "));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
