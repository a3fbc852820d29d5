use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ib_odometry::run::{
    ablate_command, eval_command, exit_code, generate, probe_command, train_command, verify_command, Claim, RunConfig,
    Split, SweepKind,
};
use ib_odometry::world::{DegradeKind, DegradeTarget};
use ib_odometry::Error;

/// Information-bottleneck odometry on a synthetic multi-sensor world.
#[derive(Parser)]
#[command(name = "ibodo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// `train`, or `test` for the nuisance-shifted held-out split.
        #[arg(long, default_value = "train")]
        split: String,
        /// Overrides `world.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model; writes model.ckpt and metrics.csv.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from out/model.ckpt.
        #[arg(long)]
        resume: bool,
    },
    /// Sliding-window evaluation; writes eval.json and per_position.csv.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `noisy` or `missing`.
        #[arg(long)]
        degrade: Option<String>,
        /// `vis`, `imu` or `both`.
        #[arg(long, requires = "degrade")]
        target: Option<String>,
    },
    /// Run an ablation sweep; writes <sweep>.csv.
    Ablate {
        /// gamma, samples, sensors, latent-dim or variants.
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `out_dir` from the config, then the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated replicate seeds; overrides `ablation.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Nuisance-reconstruction probe of an IB model against a baseline.
    Probe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        baseline_ckpt: PathBuf,
        /// A dataset directory of the world to probe on.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `probe.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check an information-theoretic claim; prints a JSON report.
    Verify {
        /// lemma1, theorem2, bounds or kalman.
        #[arg(long)]
        claim: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config(path: Option<&Path>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn degradation(kind: Option<&str>, target: Option<&str>) -> Result<Option<(DegradeKind, DegradeTarget)>, Error> {
    match kind {
        None => Ok(None),
        Some(k) => {
            let kind = k.parse().map_err(|_| Error::Config(format!("unknown degradation `{k}`")))?;
            let t = target.unwrap_or("both");
            let target = t.parse().map_err(|_| Error::Config(format!("unknown degradation target `{t}`")))?;
            Ok(Some((kind, target)))
        }
    }
}

fn write_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Ok(false) means the command ran but a requested check failed.
fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Gen { config: c, out, split, seed } => {
            let mut c = config(c.as_deref())?;
            if let Some(s) = seed {
                c.world.seed = s;
            }
            let split = match split.as_str() {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(Error::Config(format!("unknown split `{other}`"))),
            };
            generate(&c, split, &out)?;
        }
        Command::Train { config: c, data, out, seed, resume } => {
            let mut c = config(c.as_deref())?;
            if let Some(s) = seed {
                c.train.seed = s;
            }
            let metrics = train_command(&c, &data, &out, resume)?;
            if let Some(last) = metrics.last() {
                log::info!("epoch {} loss {:.6}", last.epoch, last.loss);
            }
        }
        Command::Eval { config: c, ckpt, data, out, degrade, target } => {
            let c = config(c.as_deref())?;
            let d = degradation(degrade.as_deref(), target.as_deref())?;
            let output = eval_command(&c, &ckpt, &data, &out, d)?;
            println!("t_rmse {} r_rmse {}", output.report.t_rmse, output.report.r_rmse);
        }
        Command::Ablate { sweep, config: c, out, seeds } => {
            let mut c = config(c.as_deref())?;
            if let Some(s) = seeds {
                c.ablation.seeds = s;
            }
            c.validate()?;
            let kind: SweepKind = sweep.parse()?;
            let out = out.or_else(|| c.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            ablate_command(&c, kind, &out)?;
        }
        Command::Probe { config: c, ckpt, baseline_ckpt, data, out, seed } => {
            let mut c = config(c.as_deref())?;
            if let Some(s) = seed {
                c.probe.seed = s;
            }
            let rows = probe_command(&c, &ckpt, &baseline_ckpt, &data, out.as_deref())?;
            println!("model,hidden,mse,noise_mse,target_variance");
            for r in rows {
                println!("{},{},{},{},{}", r.model, r.hidden, r.mse, r.noise_mse, r.target_variance);
            }
        }
        Command::Verify { claim, trials, seed, out } => {
            let claim: Claim = claim.parse()?;
            let (report, ok) = verify_command(claim, trials, seed)?;
            write_json(out.as_deref(), &report)?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
