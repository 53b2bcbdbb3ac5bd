//! The operations behind the `growdepth` subcommands and their CSV outputs.
//!
//! File schemas (headers are fixed):
//!
//! - `surface.csv`: `epoch,k,l,l_over_L,death_rate`, one row per epoch and block.
//! - `depth_trace.csv`: `epoch,k,expected_depth,expected_fraction`.
//! - `metrics.csv`: `epoch,k,lr,train_loss,train_error,val_error,expected_depth,mean_realized_depth,wall_time`.
//! - compare output: `run,epoch,metric,value`, one row per run, epoch and
//!   non-epoch metrics column.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{DatasetSelector, ExperimentConfig};
use crate::data::{self, DatasetSplit, LabeledSet, Standardizer};
use crate::error::{Error, Result};
use crate::gates::RngState;
use crate::net::{checkpoint, NetShape, ResidualNet, Scalar};
use crate::schedule::{expected_depth_trace, schedule_surface, DepthSchedule};
use crate::trainer::{self, evaluate, seed_offset, MetricsRecord, Precision, TrainOutcome};

pub const SURFACE_HEADER: [&str; 5] = ["epoch", "k", "l", "l_over_L", "death_rate"];
pub const DEPTH_TRACE_HEADER: [&str; 4] = ["epoch", "k", "expected_depth", "expected_fraction"];
pub const COMPARE_HEADER: [&str; 4] = ["run", "epoch", "metric", "value"];

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

#[derive(Debug, Clone)]
pub struct ScheduleFiles {
    pub surface: PathBuf,
    pub depth_trace: PathBuf,
}

/// Writes the death-rate surface and the expected-depth trace of a schedule.
pub fn cmd_schedule(
    schedule: &dyn DepthSchedule,
    blocks: usize,
    epochs: usize,
    out: &Path,
) -> Result<ScheduleFiles> {
    let surface = schedule_surface(schedule, blocks, epochs)?;
    let trace = expected_depth_trace(schedule, blocks, epochs)?;
    create_dir(out)?;

    let surface_path = out.join("surface.csv");
    let mut w = csv_writer(&surface_path)?;
    w.write_record(SURFACE_HEADER)?;
    for (e, (k, row)) in surface.ks.iter().zip(&surface.rates).enumerate() {
        for (i, d) in row.iter().enumerate() {
            let l = i + 1;
            w.write_record([
                e.to_string(),
                k.to_string(),
                l.to_string(),
                (l as f64 / blocks as f64).to_string(),
                d.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&surface_path, e))?;

    let trace_path = out.join("depth_trace.csv");
    let mut w = csv_writer(&trace_path)?;
    w.write_record(DEPTH_TRACE_HEADER)?;
    for p in &trace {
        w.write_record([
            p.epoch.to_string(),
            p.k.to_string(),
            p.expected_depth.to_string(),
            (p.expected_depth / blocks as f64).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&trace_path, e))?;

    Ok(ScheduleFiles {
        surface: surface_path,
        depth_trace: trace_path,
    })
}

/// Builds train/validation/test parts for an experiment. All randomness is
/// derived from the run seed.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<DatasetSplit> {
    let seed = cfg.train.seed;
    let mut split_rng = RngState::derived(seed, seed_offset::SPLIT);
    let split = match &cfg.dataset {
        DatasetSelector::Spirals {
            n_per_class,
            classes,
            noise,
        } => {
            let mut rng = RngState::derived(seed, seed_offset::DATA);
            let all = data::gen_spirals(*n_per_class, *classes, *noise, &mut rng)?;
            let (train, val) =
                data::split_validation(&all, cfg.train.val_fraction, &mut split_rng)?;
            let mut rng = RngState::derived(seed, seed_offset::TEST_DATA);
            let test = data::gen_spirals(*n_per_class, *classes, *noise, &mut rng)?;
            DatasetSplit { train, val, test }
        }
        DatasetSelector::Cifar10 { dir } => {
            let (all, test) = data::load_cifar10(dir)?;
            let (train, val) =
                data::split_validation(&all, cfg.train.val_fraction, &mut split_rng)?;
            DatasetSplit { train, val, test }.standardized()
        }
        DatasetSelector::Csv { path } => {
            let all = LabeledSet::read_csv(path)?;
            let (rest, test) =
                data::split_validation(&all, cfg.train.val_fraction, &mut split_rng)?;
            let (train, val) =
                data::split_validation(&rest, cfg.train.val_fraction, &mut split_rng)?;
            let s = Standardizer::fit(&train);
            let mut split = DatasetSplit { train, val, test };
            s.apply(&mut split.train);
            s.apply(&mut split.val);
            s.apply(&mut split.test);
            split
        }
    };
    split.check()?;
    Ok(split)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: Vec<MetricsRecord>,
    pub best_epoch: usize,
    pub best_val_error: f64,
    pub test_error: f64,
    pub test_loss: f64,
    pub block_passes: u64,
    pub realized_total: u64,
    pub out: PathBuf,
}

pub fn write_metrics(path: &Path, metrics: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(MetricsRecord::HEADER)?;
    for m in metrics {
        let v = m.values();
        let mut rec = vec![m.epoch.to_string()];
        rec.extend(v[1..].iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_typed<T: Scalar>(cfg: &ExperimentConfig, split: &DatasetSplit) -> Result<TrainReport> {
    let shape = NetShape {
        blocks: cfg.blocks,
        width: cfg.width,
        input_dim: split.train.input_dim(),
        classes: split.train.class_count,
    };
    let mut init_rng = RngState::derived(cfg.train.seed, seed_offset::INIT);
    let net = ResidualNet::<T>::init(shape, &mut init_rng)?.with_activation(cfg.activation);
    let outcome: TrainOutcome<T> = trainer::train(net, split, &cfg.train)?;
    let best = &outcome.best;
    let test = evaluate(&best.net, &split.test, &best.profile, 512)?;

    write_metrics(&cfg.out.join("metrics.csv"), &outcome.metrics)?;
    checkpoint::save(&best.net, &cfg.out.join("best.ckpt"))?;

    let summary_path = cfg.out.join("summary.txt");
    let mut s = fs::File::create(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let mut lines = vec![
        format!("selected_epoch = {}", best.epoch),
        format!("selected_k = {}", best.profile.k()),
        format!("val_error = {}", best.val_error),
        format!("test_error = {}", test.error),
        format!("test_loss = {}", test.loss),
        format!("block_passes = {}", outcome.block_passes),
        format!(
            "full_depth_block_passes = {}",
            outcome.batches * cfg.blocks as u64
        ),
    ];
    lines.extend(cfg.summary_lines());
    for line in lines {
        writeln!(s, "{line}").map_err(|e| Error::io(&summary_path, e))?;
    }

    Ok(TrainReport {
        best_epoch: best.epoch,
        best_val_error: best.val_error,
        test_error: test.error,
        test_loss: test.loss,
        block_passes: outcome.block_passes,
        realized_total: outcome.realized_total,
        metrics: outcome.metrics,
        out: cfg.out.clone(),
    })
}

/// Trains one experiment and writes `metrics.csv`, `best.ckpt` and
/// `summary.txt` into its output directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let split = build_dataset(cfg)?;
    create_dir(&cfg.out)?;
    match cfg.train.precision {
        Precision::F64 => run_typed::<f64>(cfg, &split),
        Precision::F32 => run_typed::<f32>(cfg, &split),
    }
}

/// Merges the `metrics.csv` files of several runs into one long-format CSV.
/// Returns the number of data rows written.
pub fn cmd_compare(runs: &[PathBuf], out: &Path) -> Result<usize> {
    if runs.is_empty() {
        return Err(Error::invalid("compare needs at least one run directory"));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut w = csv_writer(out)?;
    w.write_record(COMPARE_HEADER)?;
    let mut rows = 0;
    for run in runs {
        let path = run.join("metrics.csv");
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != MetricsRecord::HEADER {
            return Err(Error::CorruptData {
                path,
                offset: 0,
                reason: format!("unexpected metrics header {header:?}"),
            });
        }
        let name = run
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| run.display().to_string());
        for rec in r.records() {
            let rec = rec?;
            let epoch = &rec[0];
            for (metric, value) in MetricsRecord::HEADER.iter().zip(rec.iter()).skip(1) {
                w.write_record([name.as_str(), epoch, metric, value])?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{Normal, ScheduleSpec};

    fn read(path: &Path) -> Vec<Vec<String>> {
        let text = fs::read_to_string(path).unwrap();
        text.lines()
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn schedule_files_golden_headers() {
        let dir = tempfile::tempdir().unwrap();
        let files = cmd_schedule(&Normal, 4, 3, dir.path()).unwrap();
        let surface = read(&files.surface);
        assert_eq!(surface[0], SURFACE_HEADER);
        assert_eq!(surface.len(), 1 + 4 * 3);
        assert!(surface[1..].iter().all(|r| r[4] == "0"));
        let trace = read(&files.depth_trace);
        assert_eq!(trace[0], DEPTH_TRACE_HEADER);
        assert_eq!(trace[3], vec!["2", "1", "4", "1"]);
    }

    #[test]
    fn half_to_huang_trace_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ScheduleSpec::endpoint_growth(1.0, 0.5).unwrap();
        let files = cmd_schedule(&spec, 54, 500, dir.path()).unwrap();
        let trace = read(&files.depth_trace);
        let first: f64 = trace[1][3].parse().unwrap();
        let last: f64 = trace[500][3].parse().unwrap();
        assert!((first - 0.5).abs() <= 1.0 / 54.0);
        assert!((last - 0.75).abs() <= 1.0 / 54.0);
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let err = cmd_schedule(&Normal, 2, 2, &blocker.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    fn fake_run(dir: &Path, name: &str, epochs: usize) -> PathBuf {
        let run = dir.join(name);
        fs::create_dir_all(&run).unwrap();
        let metrics: Vec<MetricsRecord> = (0..epochs)
            .map(|e| MetricsRecord {
                epoch: e,
                k: e as f64 / 10.0,
                lr: 0.1,
                train_loss: 1.0,
                train_error: 0.5,
                val_error: 0.25,
                expected_depth: 3.0,
                mean_realized_depth: 2.5,
                wall_time: 0.0,
            })
            .collect();
        write_metrics(&run.join("metrics.csv"), &metrics).unwrap();
        run
    }

    #[test]
    fn compare_long_format() {
        let dir = tempfile::tempdir().unwrap();
        let a = fake_run(dir.path(), "a", 3);
        let b = fake_run(dir.path(), "b", 5);
        let out = dir.path().join("merged.csv");

        let n = cmd_compare(std::slice::from_ref(&a), &out).unwrap();
        assert_eq!(n, 3 * 8);
        let rows = read(&out);
        assert_eq!(rows[0], COMPARE_HEADER);
        assert_eq!(rows[1], vec!["a", "0", "k", "0"]);

        let n = cmd_compare(&[a, b], &out).unwrap();
        assert_eq!(n, (3 + 5) * 8);
        let rows = read(&out);
        assert_eq!(rows.len(), 1 + n);
        assert_eq!(rows.iter().filter(|r| r[0] == "b").count(), 40);
    }

    #[test]
    fn compare_missing_run_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_compare(&[dir.path().join("ghost")], &dir.path().join("o.csv")).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }
}
