//! Epoch-dependent stochastic depth for residual networks.
//!
//! - [`schedule`]: closed-form death rates for every schedule family, plus
//!   expected-depth analytics, behind the [`DepthSchedule`] trait and a
//!   name-keyed [`ScheduleRegistry`].
//! - [`gates`]: seeded Bernoulli gate masks.
//! - [`net`]: residual MLP with gated forward pass and exact backward.
//! - [`trainer`]: Nesterov SGD epoch loop driven by a schedule.
//! - [`data`]: spirals, CIFAR-10 binary batches, splits, augmentation.
//! - [`config`] and [`commands`]: experiment configuration and the
//!   operations behind the command-line tool.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod gates;
pub mod net;
pub mod schedule;
pub mod trainer;

pub use error::{Error, Result};
pub use gates::{realized_depth, sample_mask, GateMask, RngState};
pub use net::{Activation, NetShape, ResidualNet};
pub use schedule::{
    expected_depth, expected_depth_trace, schedule_surface, survival_profile, DepthSchedule,
    ScheduleRegistry, ScheduleSpec, SurvivalProfile,
};
pub use trainer::{train, TrainConfig};
