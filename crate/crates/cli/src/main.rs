use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ppf_pose::config::ScenarioConfig;
use ppf_pose::report::{plot_script, summary, write_csv};
use ppf_pose::sim::{run_scenario, Scenario};
use ppf_pose::verify::{run_suite, SUITES};
use ppf_pose::Error;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ENVELOPE: u8 = 3;
const EXIT_NEAR_SINGULAR: u8 = 4;

#[derive(Parser)]
#[command(name = "ppf-pose", version, about = "Prescribed-performance pose filter: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write run.csv, summary.txt and plot.gp.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the randomized property suites.
    Verify {
        /// Run only this suite (lemma1, trace, transform, wahba, lyapunov).
        #[arg(long)]
        suite: Option<String>,
        /// Number of random cases per suite (defaults differ per suite).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the effective scenario configuration.
    DumpConfig {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name.
    #[arg(long, default_value = "paper", conflicts_with = "config")]
    scenario: String,
    /// Scenario file (TOML, as written by dump-config).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Zero all measurement noise and vector/landmark biases (velocity biases stay).
    #[arg(long)]
    noise_free: bool,
    /// Abort on the first envelope violation instead of clamping.
    #[arg(long)]
    strict: bool,
    /// Step size [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Run length [s].
    #[arg(long)]
    duration: Option<f64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::named(&self.scenario)?,
        };
        if self.noise_free {
            cfg = cfg.noise_free();
        }
        if self.strict {
            cfg.run.strict = true;
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(dt) = self.dt {
            cfg.run.dt = dt;
        }
        if let Some(duration) = self.duration {
            cfg.run.duration = duration;
        }
        Ok(cfg)
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn write_artifacts(dir: &Path, s: &Scenario, rec: &ppf_pose::sim::RunRecord, wall: std::time::Duration) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(rec, BufWriter::new(File::create(dir.join("run.csv"))?))?;
    fs::write(dir.join("summary.txt"), summary(s, rec, wall))?;
    fs::write(dir.join("plot.gp"), plot_script("run.csv"))?;
    Ok(())
}

fn simulate(args: &ScenarioArgs, out: &Path) -> ExitCode {
    let scenario = match args.resolve().and_then(|cfg| Scenario::from_config(&cfg)) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let start = Instant::now();
    let rec = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    let wall = start.elapsed();
    if let Err(e) = write_artifacts(out, &scenario, &rec, wall) {
        return config_error(format!("cannot write to {}: {e}", out.display()));
    }
    let text = summary(&scenario, &rec, wall);
    print!("{text}");
    match &rec.abort {
        None => ExitCode::SUCCESS,
        Some(a) => {
            eprintln!("run aborted at row {}: {}", a.row, a.error);
            match a.error {
                Error::EnvelopeViolation { .. } => ExitCode::from(EXIT_ENVELOPE),
                Error::NearSingular { .. } => ExitCode::from(EXIT_NEAR_SINGULAR),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn verify(suite: Option<&str>, trials: Option<usize>, seed: u64) -> ExitCode {
    let names: Vec<&str> = match suite {
        Some(name) if SUITES.contains(&name) => vec![name],
        Some(name) => return config_error(format!("unknown suite '{name}' (available: {})", SUITES.join(", "))),
        None => SUITES.to_vec(),
    };
    let mut all_passed = true;
    for name in names {
        match run_suite(name, trials, seed) {
            Ok(rep) => {
                rep.lines().iter().for_each(|l| println!("{l}"));
                all_passed &= rep.passed();
            }
            Err(Error::InvalidConfig(msg)) => return config_error(msg),
            Err(e) => {
                println!("FAIL {name}: {e}");
                all_passed = false;
            }
        }
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY_FAILED)
    }
}

fn dump_config(args: &ScenarioArgs, out: Option<&Path>) -> ExitCode {
    let text = match args.resolve().and_then(|cfg| cfg.dump()) {
        Ok(t) => t,
        Err(e) => return config_error(e),
    };
    match out {
        None => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Some(path) => match fs::write(path, text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => config_error(format!("cannot write {}: {e}", path.display())),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { scenario, out } => simulate(scenario, out),
        Command::Verify { suite, trials, seed } => verify(suite.as_deref(), *trials, *seed),
        Command::DumpConfig { scenario, out } => dump_config(scenario, out.as_deref()),
    }
}
