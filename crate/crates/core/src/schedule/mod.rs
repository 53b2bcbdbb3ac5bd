//! Death-rate schedules for stochastic-depth residual networks.
//!
//! Every schedule maps a block index `l` in `1..=L` and a normalized epoch
//! `k` in `[0, 1]` to a death rate `d_l^k`; the survival probability is
//! `p_l = 1 - d_l^k`. The families are interchangeable behind
//! [`DepthSchedule`] and can be looked up by name in a
//! [`registry::ScheduleRegistry`].

pub mod registry;

use std::fmt;

use crate::error::{Error, Result};

pub use registry::{FamilyFactory, ScheduleRegistry};

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

fn check_block(l: usize, blocks: usize) -> Result<()> {
    if blocks == 0 {
        return Err(Error::invalid("block count must be at least 1"));
    }
    if l == 0 || l > blocks {
        return Err(Error::invalid(format!(
            "block index {l} is outside 1..={blocks}"
        )));
    }
    Ok(())
}

fn check_fraction_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(format!("{name} = {v} is outside (0, 1]")));
    }
    Ok(())
}

/// Linear decay `d_l = (l / L) * d_L`.
pub fn death_rate_fixed(l: usize, blocks: usize, d_last: f64) -> Result<f64> {
    check_block(l, blocks)?;
    check_unit("d_L", d_last)?;
    Ok(l as f64 / blocks as f64 * d_last)
}

/// Last-block death rate interpolated between its start and end values.
pub fn endpoint_rate(k: f64, d_start: f64, d_end: f64) -> Result<f64> {
    check_unit("k", k)?;
    Ok((1.0 - k) * d_start + k * d_end)
}

pub fn death_rate_endpoint_growth(
    l: usize,
    blocks: usize,
    k: f64,
    d_start: f64,
    d_end: f64,
) -> Result<f64> {
    check_block(l, blocks)?;
    check_unit("d_L0", d_start)?;
    check_unit("d_L1", d_end)?;
    let last = endpoint_rate(k, d_start, d_end)?;
    Ok(l as f64 / blocks as f64 * last)
}

/// `max(0, min(1, (l/L - k) / omega))`, with `l` taken as the normalized
/// position in the network.
pub fn death_rate_linear_growth(l: usize, blocks: usize, k: f64, omega: f64) -> Result<f64> {
    check_block(l, blocks)?;
    check_unit("k", k)?;
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid(format!("omega = {omega} must be positive")));
    }
    let pos = l as f64 / blocks as f64;
    Ok(((pos - k) / omega).clamp(0.0, 1.0))
}

/// `min(1, (1 - k) * l / (L * s))`.
pub fn death_rate_aggressive(l: usize, blocks: usize, k: f64, s: f64) -> Result<f64> {
    check_block(l, blocks)?;
    check_unit("k", k)?;
    check_fraction_open("s", s)?;
    Ok(((1.0 - k) * l as f64 / (blocks as f64 * s)).min(1.0))
}

/// Maps epoch index `e` of `total` epochs onto `[0, 1]` so that the last
/// epoch sits exactly at `k = 1`.
pub fn normalize_epoch(e: usize, total: usize) -> Result<f64> {
    if e >= total {
        return Err(Error::invalid(format!("epoch {e} is outside 0..{total}")));
    }
    if total == 1 {
        return Ok(0.0);
    }
    Ok(e as f64 / (total - 1) as f64)
}

/// A death-rate schedule family with its hyperparameters bound.
pub trait DepthSchedule: fmt::Debug + Send + Sync {
    /// Registry name of the family.
    fn family(&self) -> &'static str;

    /// Death rate of block `l` (1-based) at normalized epoch `k`.
    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64>;

    /// Hyperparameters as `(name, value)` pairs, in a stable order.
    fn hyperparams(&self) -> Vec<(&'static str, f64)>;

    /// True when the rates do not depend on `k`.
    fn is_static(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        let params = self.hyperparams();
        if params.is_empty() {
            return self.family().to_string();
        }
        let body: Vec<String> = params.iter().map(|(n, v)| format!("{n}={v}")).collect();
        format!("{}({})", self.family(), body.join(", "))
    }
}

/// Plain residual network: every block always survives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Normal;

/// Fixed linear decay with last-block death rate `d_last`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed {
    d_last: f64,
}

/// Last-block death rate moves linearly from `d_start` to `d_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointGrowth {
    d_start: f64,
    d_end: f64,
}

/// Death front sweeping through the network with slope `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGrowth {
    omega: f64,
}

/// Only the first `s` fraction of blocks can be alive at the first epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggressiveGrowth {
    s: f64,
}

impl Fixed {
    pub fn new(d_last: f64) -> Result<Self> {
        check_unit("d_L", d_last)?;
        Ok(Self { d_last })
    }

    pub fn d_last(&self) -> f64 {
        self.d_last
    }
}

impl EndpointGrowth {
    pub fn new(d_start: f64, d_end: f64) -> Result<Self> {
        check_unit("d_L0", d_start)?;
        check_unit("d_L1", d_end)?;
        Ok(Self { d_start, d_end })
    }

    pub fn d_start(&self) -> f64 {
        self.d_start
    }

    pub fn d_end(&self) -> f64 {
        self.d_end
    }
}

impl LinearGrowth {
    pub fn new(omega: f64) -> Result<Self> {
        check_fraction_open("omega", omega)?;
        Ok(Self { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

impl AggressiveGrowth {
    pub fn new(s: f64) -> Result<Self> {
        check_fraction_open("s", s)?;
        Ok(Self { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

impl DepthSchedule for Normal {
    fn family(&self) -> &'static str {
        "normal"
    }

    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64> {
        check_block(l, blocks)?;
        check_unit("k", k)?;
        Ok(0.0)
    }

    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    fn is_static(&self) -> bool {
        true
    }
}

impl DepthSchedule for Fixed {
    fn family(&self) -> &'static str {
        "fixed"
    }

    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64> {
        check_unit("k", k)?;
        death_rate_fixed(l, blocks, self.d_last)
    }

    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("d_L", self.d_last)]
    }

    fn is_static(&self) -> bool {
        true
    }
}

impl DepthSchedule for EndpointGrowth {
    fn family(&self) -> &'static str {
        "endpoint-growth"
    }

    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64> {
        death_rate_endpoint_growth(l, blocks, k, self.d_start, self.d_end)
    }

    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("d_L0", self.d_start), ("d_L1", self.d_end)]
    }

    fn is_static(&self) -> bool {
        self.d_start == self.d_end
    }
}

impl DepthSchedule for LinearGrowth {
    fn family(&self) -> &'static str {
        "linear-growth"
    }

    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64> {
        death_rate_linear_growth(l, blocks, k, self.omega)
    }

    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("omega", self.omega)]
    }
}

impl DepthSchedule for AggressiveGrowth {
    fn family(&self) -> &'static str {
        "aggressive-growth"
    }

    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64> {
        death_rate_aggressive(l, blocks, k, self.s)
    }

    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        vec![("s", self.s)]
    }
}

/// Typed description of a schedule: one variant per family, carrying only
/// that family's hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSpec {
    Normal(Normal),
    Fixed(Fixed),
    EndpointGrowth(EndpointGrowth),
    LinearGrowth(LinearGrowth),
    AggressiveGrowth(AggressiveGrowth),
}

impl ScheduleSpec {
    pub fn normal() -> Self {
        ScheduleSpec::Normal(Normal)
    }

    pub fn fixed(d_last: f64) -> Result<Self> {
        Fixed::new(d_last).map(ScheduleSpec::Fixed)
    }

    pub fn endpoint_growth(d_start: f64, d_end: f64) -> Result<Self> {
        EndpointGrowth::new(d_start, d_end).map(ScheduleSpec::EndpointGrowth)
    }

    pub fn linear_growth(omega: f64) -> Result<Self> {
        LinearGrowth::new(omega).map(ScheduleSpec::LinearGrowth)
    }

    pub fn aggressive_growth(s: f64) -> Result<Self> {
        AggressiveGrowth::new(s).map(ScheduleSpec::AggressiveGrowth)
    }

    pub fn as_schedule(&self) -> &dyn DepthSchedule {
        match self {
            ScheduleSpec::Normal(s) => s,
            ScheduleSpec::Fixed(s) => s,
            ScheduleSpec::EndpointGrowth(s) => s,
            ScheduleSpec::LinearGrowth(s) => s,
            ScheduleSpec::AggressiveGrowth(s) => s,
        }
    }
}

impl DepthSchedule for ScheduleSpec {
    fn family(&self) -> &'static str {
        self.as_schedule().family()
    }

    fn death_rate(&self, l: usize, blocks: usize, k: f64) -> Result<f64> {
        self.as_schedule().death_rate(l, blocks, k)
    }

    fn hyperparams(&self) -> Vec<(&'static str, f64)> {
        self.as_schedule().hyperparams()
    }

    fn is_static(&self) -> bool {
        self.as_schedule().is_static()
    }
}

/// Survival probabilities of all blocks at one normalized epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalProfile {
    probs: Vec<f64>,
    k: f64,
}

impl SurvivalProfile {
    /// Builds a profile from explicit probabilities (index 0 is block 1).
    pub fn from_probs(probs: Vec<f64>, k: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("profile needs at least one block"));
        }
        check_unit("k", k)?;
        for (i, &p) in probs.iter().enumerate() {
            check_unit(&format!("p_{}", i + 1), p)?;
        }
        Ok(Self { probs, k })
    }

    pub fn uniform(blocks: usize, p: f64) -> Result<Self> {
        Self::from_probs(vec![p; blocks], 0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Survival probability of block `l`, 1-based.
    pub fn p(&self, l: usize) -> f64 {
        self.probs[l - 1]
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn blocks(&self) -> usize {
        self.probs.len()
    }

    /// Mean number of surviving blocks, `sum_l p_l`.
    pub fn expected_depth(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub fn survival_profile(
    schedule: &dyn DepthSchedule,
    k: f64,
    blocks: usize,
) -> Result<SurvivalProfile> {
    if blocks == 0 {
        return Err(Error::invalid("block count must be at least 1"));
    }
    check_unit("k", k)?;
    let probs = (1..=blocks)
        .map(|l| schedule.death_rate(l, blocks, k).map(|d| 1.0 - d))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurvivalProfile { probs, k })
}

pub fn expected_depth(profile: &SurvivalProfile) -> f64 {
    profile.expected_depth()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthPoint {
    pub epoch: usize,
    pub k: f64,
    pub expected_depth: f64,
}

/// Expected depth at every epoch of a run.
pub fn expected_depth_trace(
    schedule: &dyn DepthSchedule,
    blocks: usize,
    epochs: usize,
) -> Result<Vec<DepthPoint>> {
    if epochs == 0 {
        return Err(Error::invalid("epoch count must be at least 1"));
    }
    (0..epochs)
        .map(|epoch| {
            let k = normalize_epoch(epoch, epochs)?;
            let profile = survival_profile(schedule, k, blocks)?;
            Ok(DepthPoint {
                epoch,
                k,
                expected_depth: profile.expected_depth(),
            })
        })
        .collect()
}

/// Death rates over the whole run: `epochs` rows of `blocks` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSurface {
    pub blocks: usize,
    pub ks: Vec<f64>,
    pub rates: Vec<Vec<f64>>,
}

pub fn schedule_surface(
    schedule: &dyn DepthSchedule,
    blocks: usize,
    epochs: usize,
) -> Result<ScheduleSurface> {
    if epochs == 0 {
        return Err(Error::invalid("epoch count must be at least 1"));
    }
    let mut ks = Vec::with_capacity(epochs);
    let mut rates = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let k = normalize_epoch(e, epochs)?;
        let row = (1..=blocks)
            .map(|l| schedule.death_rate(l, blocks, k))
            .collect::<Result<Vec<_>>>()?;
        ks.push(k);
        rates.push(row);
    }
    Ok(ScheduleSurface { blocks, ks, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn fixed_examples() {
        assert_eq!(death_rate_fixed(54, 54, 0.5).unwrap(), 0.5);
        assert_eq!(death_rate_fixed(27, 54, 0.5).unwrap(), 0.25);
        assert!((death_rate_fixed(1, 110, 0.5).unwrap() - 0.004_545_454_545_454_545).abs() < EPS);
        assert!(death_rate_fixed(0, 54, 0.5).is_err());
        assert!(death_rate_fixed(55, 54, 0.5).is_err());
        assert!(death_rate_fixed(1, 54, 1.5).is_err());
    }

    #[test]
    fn endpoint_examples() {
        assert_eq!(endpoint_rate(0.0, 0.5, 0.0).unwrap(), 0.5);
        assert_eq!(endpoint_rate(1.0, 1.0, 0.5).unwrap(), 0.5);
        assert!((endpoint_rate(0.5, 1.0, 0.5).unwrap() - 0.75).abs() < EPS);
        assert!(endpoint_rate(1.2, 1.0, 0.5).is_err());
        assert!(endpoint_rate(-0.1, 1.0, 0.5).is_err());

        assert_eq!(
            death_rate_endpoint_growth(54, 54, 0.0, 1.0, 0.5).unwrap(),
            1.0
        );
        assert_eq!(
            death_rate_endpoint_growth(27, 54, 1.0, 1.0, 0.5).unwrap(),
            0.25
        );
        assert_eq!(
            death_rate_endpoint_growth(54, 54, 1.0, 0.5, 0.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn linear_growth_examples() {
        // l/L = 0.25 with L = 4, l = 1
        assert!((death_rate_linear_growth(1, 4, 0.0, 0.5).unwrap() - 0.5).abs() < EPS);
        for l in 1..=20 {
            assert_eq!(death_rate_linear_growth(l, 20, 1.0, 0.2).unwrap(), 0.0);
        }
        assert_eq!(death_rate_linear_growth(4, 4, 0.0, 0.5).unwrap(), 1.0);
        assert!(death_rate_linear_growth(1, 4, 0.0, 0.0).is_err());
        assert!(death_rate_linear_growth(1, 4, 0.0, -1.0).is_err());
    }

    #[test]
    fn aggressive_examples() {
        for l in 6..=54 {
            // l/L > 0.1
            assert_eq!(
                death_rate_aggressive(l, 54, 0.0, 0.1).unwrap(),
                1.0,
                "l={l}"
            );
        }
        for l in 1..=54 {
            assert_eq!(death_rate_aggressive(l, 54, 1.0, 0.1).unwrap(), 0.0);
        }
        assert!((death_rate_aggressive(27, 54, 0.5, 0.5).unwrap() - 0.5).abs() < EPS);
        assert!(death_rate_aggressive(1, 54, 0.0, 0.0).is_err());
        assert!(death_rate_aggressive(1, 54, 0.0, 1.5).is_err());
    }

    #[test]
    fn profile_examples() {
        let normal = survival_profile(&Normal, 0.3, 10).unwrap();
        assert!(normal.probs().iter().all(|&p| p == 1.0));

        let fixed = ScheduleSpec::fixed(0.5).unwrap();
        for k in [0.0, 0.4, 1.0] {
            let p = survival_profile(&fixed, k, 54).unwrap();
            assert_eq!(p.p(54), 0.5);
            assert_eq!(p.p(27), 0.75);
        }

        let half = ScheduleSpec::endpoint_growth(1.0, 0.5).unwrap();
        assert_eq!(survival_profile(&half, 0.0, 54).unwrap().p(54), 0.0);
        assert!(survival_profile(&half, 0.0, 0).is_err());
    }

    #[test]
    fn expected_depth_examples() {
        assert_eq!(
            SurvivalProfile::uniform(54, 1.0).unwrap().expected_depth(),
            54.0
        );

        let fixed = ScheduleSpec::fixed(0.5).unwrap();
        let brute: f64 = (1..=54).map(|l| 1.0 - 0.5 * l as f64 / 54.0).sum();
        let got = expected_depth(&survival_profile(&fixed, 0.0, 54).unwrap());
        assert!((got - brute).abs() < 1e-12);
        assert!((got - 40.25).abs() < 1e-12);

        let half = ScheduleSpec::endpoint_growth(1.0, 0.5).unwrap();
        let start = survival_profile(&half, 0.0, 54).unwrap().expected_depth();
        let end = survival_profile(&half, 1.0, 54).unwrap().expected_depth();
        assert!((start - 27.0).abs() <= 1.0);
        assert!((end - 40.5).abs() <= 1.0);
    }

    #[test]
    fn trace_examples() {
        let trace = expected_depth_trace(&Normal, 54, 5).unwrap();
        assert_eq!(trace.len(), 5);
        assert!(trace.iter().all(|p| p.expected_depth == 54.0));
        assert_eq!(trace[4].k, 1.0);
        assert!(expected_depth_trace(&Normal, 54, 0).is_err());
    }

    #[test]
    fn surface_examples() {
        let s = schedule_surface(&Normal, 8, 4).unwrap();
        assert!(s.rates.iter().flatten().all(|&d| d == 0.0));

        let s = schedule_surface(&ScheduleSpec::fixed(0.5).unwrap(), 8, 4).unwrap();
        assert!(s.rates.windows(2).all(|w| w[0] == w[1]));

        let s = schedule_surface(&ScheduleSpec::aggressive_growth(0.1).unwrap(), 54, 10).unwrap();
        for (i, &d) in s.rates[0].iter().enumerate() {
            let pos = (i + 1) as f64 / 54.0;
            if pos > 0.1 {
                assert_eq!(d, 1.0);
            }
        }
    }

    #[test]
    fn normalize_epoch_examples() {
        assert_eq!(normalize_epoch(0, 500).unwrap(), 0.0);
        assert_eq!(normalize_epoch(499, 500).unwrap(), 1.0);
        assert!((normalize_epoch(250, 500).unwrap() - 250.0 / 499.0).abs() < EPS);
        assert_eq!(normalize_epoch(0, 1).unwrap(), 0.0);
        assert!(normalize_epoch(500, 500).is_err());
    }

    #[test]
    fn describe_lists_hyperparams() {
        let s = ScheduleSpec::endpoint_growth(1.0, 0.0).unwrap();
        assert_eq!(s.describe(), "endpoint-growth(d_L0=1, d_L1=0)");
        assert_eq!(Normal.describe(), "normal");
    }

    fn any_spec() -> impl Strategy<Value = ScheduleSpec> {
        prop_oneof![
            Just(ScheduleSpec::normal()),
            (0.0..=1.0f64).prop_map(|d| ScheduleSpec::fixed(d).unwrap()),
            (0.0..=1.0f64, 0.0..=1.0f64)
                .prop_map(|(a, b)| ScheduleSpec::endpoint_growth(a, b).unwrap()),
            (1e-6..=1.0f64).prop_map(|w| ScheduleSpec::linear_growth(w).unwrap()),
            (1e-6..=1.0f64).prop_map(|s| ScheduleSpec::aggressive_growth(s).unwrap()),
        ]
    }

    fn growing_spec() -> impl Strategy<Value = ScheduleSpec> {
        prop_oneof![
            (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b)| {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                ScheduleSpec::endpoint_growth(hi, lo).unwrap()
            }),
            (1e-6..=1.0f64).prop_map(|w| ScheduleSpec::linear_growth(w).unwrap()),
            (1e-6..=1.0f64).prop_map(|s| ScheduleSpec::aggressive_growth(s).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn rates_are_clamped(spec in any_spec(), blocks in 1usize..200, frac in 0.0..1.0f64, k in 0.0..=1.0f64) {
            let l = 1 + ((blocks - 1) as f64 * frac) as usize;
            let d = spec.death_rate(l, blocks, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn endpoint_agrees_with_fixed(a in 0.0..=1.0f64, b in 0.0..=1.0f64, blocks in 1usize..120) {
            let grow = ScheduleSpec::endpoint_growth(a, b).unwrap();
            let start = survival_profile(&grow, 0.0, blocks).unwrap();
            let end = survival_profile(&grow, 1.0, blocks).unwrap();
            let fa = survival_profile(&ScheduleSpec::fixed(a).unwrap(), 0.0, blocks).unwrap();
            let fb = survival_profile(&ScheduleSpec::fixed(b).unwrap(), 0.0, blocks).unwrap();
            prop_assert_eq!(start.probs(), fa.probs());
            for (x, y) in end.probs().iter().zip(fb.probs()) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn growth_is_monotone_in_k(spec in growing_spec(), blocks in 1usize..120, k1 in 0.0..=1.0f64, k2 in 0.0..=1.0f64) {
            let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
            let a = survival_profile(&spec, lo, blocks).unwrap().expected_depth();
            let b = survival_profile(&spec, hi, blocks).unwrap().expected_depth();
            prop_assert!(a <= b + 1e-9, "{} > {}", a, b);
        }

        #[test]
        fn rates_non_decreasing_in_l(spec in prop_oneof![
                (0.0..=1.0f64).prop_map(|d| ScheduleSpec::fixed(d).unwrap()),
                (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b)| ScheduleSpec::endpoint_growth(a, b).unwrap()),
                (1e-6..=1.0f64).prop_map(|s| ScheduleSpec::aggressive_growth(s).unwrap()),
            ], blocks in 1usize..120, k in 0.0..=1.0f64) {
            let p = survival_profile(&spec, k, blocks).unwrap();
            prop_assert!(p.probs().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn fixed_near_continuum(d in 0.0..=1.0f64, blocks in 1usize..500) {
            let e = survival_profile(&ScheduleSpec::fixed(d).unwrap(), 0.0, blocks).unwrap().expected_depth();
            let cont = blocks as f64 * (1.0 - d / 2.0);
            prop_assert!((e - cont).abs() <= d / 2.0 + 1.0);
        }
    }
}
