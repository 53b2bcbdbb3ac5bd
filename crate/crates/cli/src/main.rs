use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use growdepth::config::{ExperimentConfig, RawConfig};
use growdepth::schedule::registry::Hyperparams;
use growdepth::{commands, data, DepthSchedule, Error, Result, RngState, ScheduleRegistry};

#[derive(Debug, Parser)]
#[command(
    name = "growdepth",
    version,
    about = "Epoch-dependent stochastic depth experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the death-rate surface and expected-depth trace of a schedule.
    Schedule(ScheduleArgs),
    /// Train a residual network under a schedule.
    Train(TrainArgs),
    /// Merge metrics.csv files of several runs into one long-format CSV.
    Compare {
        /// Run directories, each containing metrics.csv.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "compare.csv")]
        out: PathBuf,
    },
    /// List preset names and schedule families.
    Presets,
    /// Export a synthetic spirals set as CSV (x0,x1,label).
    Spirals {
        #[arg(long, default_value_t = 500)]
        n_per_class: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Named configuration, e.g. half-to-full or aggressive-s0.1.
    #[arg(long, conflicts_with = "family")]
    preset: Option<String>,
    /// Schedule family, with hyperparameters given as --param name=value.
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long, default_value_t = 54)]
    blocks: usize,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value = "schedule")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// spirals, cifar10, cifar10:<dir>, or a CSV path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<String>,
    /// Record wall_time as 0 so metrics.csv is byte-reproducible.
    #[arg(long)]
    no_wall_time: bool,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v = v
        .trim()
        .parse()
        .map_err(|_| format!("{v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn schedule(args: ScheduleArgs, reg: &ScheduleRegistry) -> Result<()> {
    let schedule: Arc<dyn DepthSchedule> = match (&args.preset, &args.family) {
        (Some(p), _) => Arc::new(reg.resolve_preset(p)?),
        (None, Some(f)) => {
            let params: Hyperparams = args.params.into_iter().collect();
            reg.build(f, &params)?
        }
        (None, None) => return Err(Error::InvalidArgument("give --preset or --family".into())),
    };
    let files = commands::cmd_schedule(schedule.as_ref(), args.blocks, args.epochs, &args.out)?;
    println!("{}", files.surface.display());
    println!("{}", files.depth_trace.display());
    Ok(())
}

fn train(args: TrainArgs, reg: &ScheduleRegistry) -> Result<()> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let flags: [(&str, &str, &str, Option<String>); 11] = [
        ("experiment", "preset", "preset", args.preset),
        ("data", "dataset", "dataset", args.dataset),
        (
            "net",
            "blocks",
            "blocks",
            args.blocks.map(|v| v.to_string()),
        ),
        ("net", "width", "width", args.width.map(|v| v.to_string())),
        (
            "train",
            "epochs",
            "epochs",
            args.epochs.map(|v| v.to_string()),
        ),
        (
            "train",
            "batch_size",
            "batch-size",
            args.batch_size.map(|v| v.to_string()),
        ),
        ("train", "seed", "seed", args.seed.map(|v| v.to_string())),
        (
            "experiment",
            "out",
            "out",
            args.out.map(|p| p.display().to_string()),
        ),
        (
            "train",
            "val_fraction",
            "val-fraction",
            args.val_fraction.map(|v| v.to_string()),
        ),
        ("train", "precision", "precision", args.precision),
        ("train", "base_lr", "lr", args.lr.map(|v| v.to_string())),
    ];
    for (section, key, flag, value) in flags {
        if let Some(v) = value {
            raw.set_flag(section, key, v, flag);
        }
    }
    if args.no_wall_time {
        raw.set_flag("train", "record_wall_time", "false", "no-wall-time");
    }
    let cfg = ExperimentConfig::from_raw(&raw, reg)?;
    let report = commands::cmd_train(&cfg)?;
    println!(
        "{}: selected epoch {} (val_error {}, test_error {})",
        report.out.display(),
        report.best_epoch,
        report.best_val_error,
        report.test_error
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let reg = ScheduleRegistry::builtin();
    match cli.command {
        Command::Schedule(args) => schedule(args, &reg),
        Command::Train(args) => train(args, &reg),
        Command::Compare { runs, out } => {
            let rows = commands::cmd_compare(&runs, &out)?;
            println!("{}: {rows} rows", out.display());
            Ok(())
        }
        Command::Presets => {
            for name in reg.preset_names() {
                println!("{name}\t{}", reg.preset(name).expect("listed").describe());
            }
            for fam in reg.family_names() {
                let params = reg.family(fam).expect("listed").param_names();
                println!("family {fam}\t{}", params.join(" "));
            }
            Ok(())
        }
        Command::Spirals {
            n_per_class,
            classes,
            noise,
            seed,
            out,
        } => {
            let set = data::gen_spirals(n_per_class, classes, noise, &mut RngState::new(seed))?;
            set.write_csv(&out)?;
            println!("{}: {} rows", out.display(), set.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
