//! Epoch loop: schedule → survival profile → one gate mask per mini-batch →
//! forward/backward → Nesterov update, with per-epoch validation and
//! selection of the best epoch.

pub mod optim;

use std::sync::Arc;
use std::time::Instant;

use crate::data::{AugmentParams, DataKind, DatasetSplit, LabeledSet};
use crate::error::{Error, Result};
use crate::gates::{realized_depth, sample_mask, RngState};
use crate::net::{self, ResidualNet, Scalar};
use crate::schedule::{survival_profile, DepthSchedule, Normal, SurvivalProfile};

pub use crate::schedule::normalize_epoch;
pub use optim::{nesterov_step, Nesterov};

/// Offsets added to the run seed for each consumer of randomness.
pub mod seed_offset {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const GATES: u64 = 5;
    pub const AUGMENT: u64 = 6;
    pub const TEST_DATA: u64 = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" | "single" => Some(Precision::F32),
            "f64" | "double" => Some(Precision::F64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Fractions of `epochs` at which the learning rate is multiplied by
    /// `lr_factor`.
    pub lr_milestones: (f64, f64),
    pub lr_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: Arc<dyn DepthSchedule>,
    pub seed: u64,
    pub val_fraction: f64,
    pub precision: Precision,
    /// Translation range for image augmentation; `None` disables it.
    pub augment_pad: Option<usize>,
    /// When false, `wall_time` is recorded as 0 so metrics are bit-reproducible.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 128,
            base_lr: 0.1,
            lr_milestones: (0.5, 0.75),
            lr_factor: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            schedule: Arc::new(Normal),
            seed: 0,
            val_fraction: 0.1,
            precision: Precision::F64,
            augment_pad: None,
            record_wall_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (m1, m2) = self.lr_milestones;
        let checks: [(bool, &str); 8] = [
            (self.epochs >= 1, "epochs must be at least 1"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (
                self.base_lr > 0.0 && self.base_lr.is_finite(),
                "base_lr must be positive",
            ),
            (
                0.0 < m1 && m1 < m2 && m2 < 1.0,
                "milestones must satisfy 0 < m1 < m2 < 1",
            ),
            (
                self.lr_factor > 0.0 && self.lr_factor < 1.0,
                "lr_factor must be in (0, 1)",
            ),
            (
                (0.0..1.0).contains(&self.momentum),
                "momentum must be in [0, 1)",
            ),
            (
                self.weight_decay >= 0.0 && self.weight_decay.is_finite(),
                "weight_decay must be >= 0",
            ),
            (
                self.val_fraction > 0.0 && self.val_fraction < 1.0,
                "val_fraction must be in (0, 1)",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

/// Piecewise-constant step decay with two drops.
pub fn lr_at(epoch: usize, config: &TrainConfig) -> f64 {
    let e = epoch as f64;
    let total = config.epochs as f64;
    let (m1, m2) = config.lr_milestones;
    if e < m1 * total {
        config.base_lr
    } else if e < m2 * total {
        config.base_lr * config.lr_factor
    } else {
        config.base_lr * config.lr_factor * config.lr_factor
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub k: f64,
    pub lr: f64,
    pub train_loss: f64,
    pub train_error: f64,
    pub val_error: f64,
    pub expected_depth: f64,
    pub mean_realized_depth: f64,
    pub wall_time: f64,
}

impl MetricsRecord {
    pub const HEADER: [&'static str; 9] = [
        "epoch",
        "k",
        "lr",
        "train_loss",
        "train_error",
        "val_error",
        "expected_depth",
        "mean_realized_depth",
        "wall_time",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.epoch as f64,
            self.k,
            self.lr,
            self.train_loss,
            self.train_error,
            self.val_error,
            self.expected_depth,
            self.mean_realized_depth,
            self.wall_time,
        ]
    }

    /// Equality on everything except the clock reading.
    pub fn same_run_as(&self, other: &Self) -> bool {
        let a = self.values();
        let b = other.values();
        a[..8]
            .iter()
            .zip(&b[..8])
            .all(|(x, y)| x.to_bits() == y.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub epoch: usize,
    pub val_error: f64,
    /// Survival profile of the selected epoch, used for inference.
    pub profile: SurvivalProfile,
    pub net: ResidualNet<T>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub metrics: Vec<MetricsRecord>,
    pub best: Checkpoint<T>,
    pub final_net: ResidualNet<T>,
    /// Residual-branch evaluations actually executed during training.
    pub block_passes: u64,
    /// Sum of realized depths over every sampled mask.
    pub realized_total: u64,
    pub batches: u64,
}

/// Deterministic mean loss and error of `net` on `set` under `profile`.
pub fn evaluate<T: Scalar>(
    net: &ResidualNet<T>,
    set: &LabeledSet,
    profile: &SurvivalProfile,
    batch_size: usize,
) -> Result<EvalResult> {
    if set.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty set"));
    }
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut loss_sum = 0.0;
    let mut wrong = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = set.batch::<T>(chunk);
        let logits = net.forward_eval(x.view(), profile)?;
        loss_sum += net::loss(&logits, &y)? * chunk.len() as f64;
        wrong += net::error_count(&logits, &y)?;
    }
    Ok(EvalResult {
        loss: loss_sum / set.len() as f64,
        error: wrong as f64 / set.len() as f64,
    })
}

fn augment_batch<T: Scalar>(
    x: &mut ndarray::Array2<T>,
    kind: DataKind,
    pad: usize,
    rng: &mut RngState,
) -> Result<()> {
    for mut row in x.outer_iter_mut() {
        let img: Vec<f32> = row.iter().map(|v| v.to_f64_lossy() as f32).collect();
        let out = AugmentParams::sample(rng, pad).apply(&img, kind)?;
        row.iter_mut()
            .zip(out)
            .for_each(|(d, s)| *d = T::from_f64_lossy(s as f64));
    }
    Ok(())
}

pub fn train<T: Scalar>(
    mut net: ResidualNet<T>,
    data: &DatasetSplit,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    data.check()?;
    if data.train.input_dim() != net.shape().input_dim
        || data.train.class_count != net.shape().classes
    {
        return Err(Error::shape(
            "dataset does not match network input/class sizes",
        ));
    }
    let blocks = net.blocks();
    let mut shuffle_rng = RngState::derived(config.seed, seed_offset::SHUFFLE);
    let mut gate_rng = RngState::derived(config.seed, seed_offset::GATES);
    let mut aug_rng = RngState::derived(config.seed, seed_offset::AUGMENT);
    let augment = match (config.augment_pad, data.train.kind) {
        (Some(pad), kind @ DataKind::Image { .. }) => Some((pad, kind)),
        _ => None,
    };
    let mut opt = Nesterov::new(&net.params, config.momentum, config.weight_decay);

    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best: Option<Checkpoint<T>> = None;
    let mut block_passes = 0u64;
    let mut realized_total = 0u64;
    let mut batches = 0u64;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let started = Instant::now();

    for epoch in 0..config.epochs {
        let k = normalize_epoch(epoch, config.epochs)?;
        let profile = survival_profile(config.schedule.as_ref(), k, blocks)?;
        let lr = lr_at(epoch, config);
        shuffle_rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut wrong = 0usize;
        let mut epoch_realized = 0usize;
        let mut epoch_batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let (mut x, y) = data.train.batch::<T>(chunk);
            if let Some((pad, kind)) = augment {
                augment_batch(&mut x, kind, pad, &mut aug_rng)?;
            }
            let mut mask = sample_mask(&profile, &mut gate_rng);
            mask.epoch = epoch;
            mask.sample_id = batches;
            let cache = net.forward_train(x.view(), &mask)?;
            let batch_loss = net::loss(&cache.logits, &y)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    value: batch_loss,
                });
            }
            loss_sum += batch_loss * chunk.len() as f64;
            wrong += net::error_count(&cache.logits, &y)?;
            let grads = net.backward(&cache, &y)?;
            opt.step(&mut net.params, &grads, lr)?;

            let depth = realized_depth(&mask);
            epoch_realized += depth;
            realized_total += depth as u64;
            block_passes += cache.blocks_executed() as u64;
            epoch_batches += 1;
            batches += 1;
        }

        let val = evaluate(&net, &data.val, &profile, config.batch_size.max(256))?;
        let n = data.train.len() as f64;
        metrics.push(MetricsRecord {
            epoch,
            k,
            lr,
            train_loss: loss_sum / n,
            train_error: wrong as f64 / n,
            val_error: val.error,
            expected_depth: profile.expected_depth(),
            mean_realized_depth: epoch_realized as f64 / epoch_batches as f64,
            wall_time: if config.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        if best.as_ref().is_none_or(|c| val.error < c.val_error) {
            best = Some(Checkpoint {
                epoch,
                val_error: val.error,
                profile,
                net: net.clone(),
            });
        }
    }

    Ok(TrainOutcome {
        metrics,
        best: best.expect("at least one epoch"),
        final_net: net,
        block_passes,
        realized_total,
        batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_spirals;
    use crate::net::NetShape;
    use crate::schedule::ScheduleSpec;

    #[test]
    fn lr_protocol_defaults() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(0, &cfg), 0.1);
        assert_eq!(lr_at(249, &cfg), 0.1);
        assert!((lr_at(250, &cfg) - 0.01).abs() < 1e-15);
        assert!((lr_at(374, &cfg) - 0.01).abs() < 1e-15);
        assert!((lr_at(375, &cfg) - 0.001).abs() < 1e-15);
        assert!((lr_at(499, &cfg) - 0.001).abs() < 1e-15);
        let drops = (1..500)
            .filter(|&e| lr_at(e, &cfg) != lr_at(e - 1, &cfg))
            .count();
        assert_eq!(drops, 2);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                lr_milestones: (0.75, 0.5),
                ..Default::default()
            },
            TrainConfig {
                lr_factor: 1.0,
                ..Default::default()
            },
            TrainConfig {
                momentum: 1.0,
                ..Default::default()
            },
            TrainConfig {
                val_fraction: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    fn tiny_split(seed: u64) -> DatasetSplit {
        let mut rng = RngState::new(seed);
        let all = gen_spirals(40, 2, 0.05, &mut rng).unwrap();
        let (train, val) = crate::data::split_validation(&all, 0.25, &mut rng).unwrap();
        DatasetSplit {
            test: val.clone(),
            train,
            val,
        }
    }

    fn tiny_net(blocks: usize) -> ResidualNet<f64> {
        let shape = NetShape {
            blocks,
            width: 8,
            input_dim: 2,
            classes: 2,
        };
        ResidualNet::init(shape, &mut RngState::new(3)).unwrap()
    }

    fn tiny_config(schedule: ScheduleSpec, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 16,
            schedule: Arc::new(schedule),
            seed: 5,
            record_wall_time: false,
            ..Default::default()
        }
    }

    #[test]
    fn fixed_schedule_constant_expected_depth() {
        let out = train(
            tiny_net(6),
            &tiny_split(1),
            &tiny_config(ScheduleSpec::fixed(0.5).unwrap(), 8),
        )
        .unwrap();
        let first = out.metrics[0].expected_depth;
        assert!(out.metrics.iter().all(|m| m.expected_depth == first));
    }

    #[test]
    fn half_to_full_depth_grows_to_full() {
        let spec = ScheduleSpec::endpoint_growth(1.0, 0.0).unwrap();
        let out = train(tiny_net(6), &tiny_split(1), &tiny_config(spec, 10)).unwrap();
        assert!(out
            .metrics
            .windows(2)
            .all(|w| w[0].expected_depth <= w[1].expected_depth));
        assert_eq!(out.metrics.last().unwrap().expected_depth, 6.0);
    }

    #[test]
    fn best_checkpoint_is_earliest_minimum() {
        let out = train(
            tiny_net(4),
            &tiny_split(2),
            &tiny_config(ScheduleSpec::normal(), 12),
        )
        .unwrap();
        let min = out
            .metrics
            .iter()
            .map(|m| m.val_error)
            .fold(f64::INFINITY, f64::min);
        let first = out.metrics.iter().find(|m| m.val_error == min).unwrap();
        assert_eq!(out.best.epoch, first.epoch);
        assert_eq!(out.best.val_error, min);
    }

    #[test]
    fn compute_accounting() {
        let spec = ScheduleSpec::aggressive_growth(0.5).unwrap();
        let out = train(tiny_net(8), &tiny_split(3), &tiny_config(spec, 6)).unwrap();
        assert_eq!(out.block_passes, out.realized_total);
        assert!(out.block_passes < out.batches * 8);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut net = tiny_net(2);
        net.params.head.w[[0, 0]] = f64::NAN;
        let err = train(net, &tiny_split(1), &tiny_config(ScheduleSpec::normal(), 2)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NonFiniteLoss {
                    epoch: 0,
                    batch: 0,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn evaluate_is_deterministic_and_memorizes() {
        let split = tiny_split(4);
        let net = tiny_net(3);
        let p = SurvivalProfile::uniform(3, 1.0).unwrap();
        let a = evaluate(&net, &split.val, &p, 7).unwrap();
        let b = evaluate(&net, &split.val, &p, 7).unwrap();
        assert_eq!(a, b);
        // batch size does not change the aggregate beyond rounding
        let c = evaluate(&net, &split.val, &p, 1000).unwrap();
        assert_eq!(a.error, c.error);
        assert!((a.loss - c.loss).abs() < 1e-12);

        // ten well separated points are learned exactly
        let mut rng = RngState::new(0);
        let pts = gen_spirals(5, 2, 0.0, &mut rng).unwrap();
        let split = DatasetSplit {
            train: pts.clone(),
            val: pts.clone(),
            test: pts.clone(),
        };
        let cfg = TrainConfig {
            batch_size: 10,
            base_lr: 0.05,
            ..tiny_config(ScheduleSpec::normal(), 400)
        };
        let out = train(tiny_net(2), &split, &cfg).unwrap();
        let res = evaluate(
            &out.final_net,
            &pts,
            &SurvivalProfile::uniform(2, 1.0).unwrap(),
            10,
        )
        .unwrap();
        assert_eq!(res.error, 0.0);
    }

    #[test]
    fn rejects_mismatched_data() {
        let shape = NetShape {
            blocks: 2,
            width: 4,
            input_dim: 3,
            classes: 2,
        };
        let net = ResidualNet::<f64>::init(shape, &mut RngState::new(0)).unwrap();
        assert!(train(net, &tiny_split(1), &tiny_config(ScheduleSpec::normal(), 1)).is_err());
    }
}
