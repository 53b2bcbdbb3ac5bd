//! Name-keyed lookup of schedule families and of the named experiment
//! presets built from them.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    AggressiveGrowth, DepthSchedule, EndpointGrowth, Fixed, LinearGrowth, Normal, ScheduleSpec,
};
use crate::error::{Error, Result};

pub type Hyperparams = BTreeMap<String, f64>;

/// Builds a schedule of one family from named hyperparameters.
pub trait FamilyFactory: Send + Sync {
    fn name(&self) -> &'static str;

    fn param_names(&self) -> &'static [&'static str];

    fn build(&self, params: &Hyperparams) -> Result<Arc<dyn DepthSchedule>>;
}

struct Family<F> {
    name: &'static str,
    params: &'static [&'static str],
    make: F,
}

impl<F> FamilyFactory for Family<F>
where
    F: Fn(&[f64]) -> Result<Arc<dyn DepthSchedule>> + Send + Sync,
{
    fn name(&self) -> &'static str {
        self.name
    }

    fn param_names(&self) -> &'static [&'static str] {
        self.params
    }

    fn build(&self, params: &Hyperparams) -> Result<Arc<dyn DepthSchedule>> {
        if let Some(extra) = params.keys().find(|k| !self.params.contains(&k.as_str())) {
            return Err(Error::invalid(format!(
                "family {} does not take parameter {extra} (expected {:?})",
                self.name, self.params
            )));
        }
        let values = self
            .params
            .iter()
            .map(|p| {
                params.get(*p).copied().ok_or_else(|| {
                    Error::invalid(format!("family {} requires parameter {p}", self.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        (self.make)(&values)
    }
}

pub struct ScheduleRegistry {
    families: BTreeMap<&'static str, Box<dyn FamilyFactory>>,
    presets: BTreeMap<String, ScheduleSpec>,
}

impl Default for ScheduleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ScheduleRegistry {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
            presets: BTreeMap::new(),
        }
    }

    /// All five families plus the named experiment configurations.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register_family(Box::new(Family {
            name: "normal",
            params: &[],
            make: |_: &[f64]| Ok(Arc::new(Normal) as Arc<dyn DepthSchedule>),
        }));
        reg.register_family(Box::new(Family {
            name: "fixed",
            params: &["d_L"],
            make: |v: &[f64]| Ok(Arc::new(Fixed::new(v[0])?) as Arc<dyn DepthSchedule>),
        }));
        reg.register_family(Box::new(Family {
            name: "endpoint-growth",
            params: &["d_L0", "d_L1"],
            make: |v: &[f64]| {
                Ok(Arc::new(EndpointGrowth::new(v[0], v[1])?) as Arc<dyn DepthSchedule>)
            },
        }));
        reg.register_family(Box::new(Family {
            name: "linear-growth",
            params: &["omega"],
            make: |v: &[f64]| Ok(Arc::new(LinearGrowth::new(v[0])?) as Arc<dyn DepthSchedule>),
        }));
        reg.register_family(Box::new(Family {
            name: "aggressive-growth",
            params: &["s"],
            make: |v: &[f64]| Ok(Arc::new(AggressiveGrowth::new(v[0])?) as Arc<dyn DepthSchedule>),
        }));

        let presets: [(&str, Result<ScheduleSpec>); 9] = [
            ("normal", Ok(ScheduleSpec::normal())),
            ("fixed", ScheduleSpec::fixed(0.5)),
            ("huang-to-full", ScheduleSpec::endpoint_growth(0.5, 0.0)),
            ("half-to-huang", ScheduleSpec::endpoint_growth(1.0, 0.5)),
            ("half-to-full", ScheduleSpec::endpoint_growth(1.0, 0.0)),
            ("linear-growth-w0.5", ScheduleSpec::linear_growth(0.5)),
            ("linear-growth-w0.2", ScheduleSpec::linear_growth(0.2)),
            ("aggressive-s0.1", ScheduleSpec::aggressive_growth(0.1)),
            ("aggressive-s0.5", ScheduleSpec::aggressive_growth(0.5)),
        ];
        for (name, spec) in presets {
            reg.register_preset(name, spec.expect("builtin preset is valid"));
        }
        reg
    }

    /// Registers a family, replacing any family of the same name.
    pub fn register_family(&mut self, factory: Box<dyn FamilyFactory>) {
        self.families.insert(factory.name(), factory);
    }

    pub fn register_preset(&mut self, name: impl Into<String>, spec: ScheduleSpec) {
        self.presets.insert(name.into(), spec);
    }

    pub fn family(&self, name: &str) -> Option<&dyn FamilyFactory> {
        self.families.get(name).map(|f| f.as_ref())
    }

    pub fn family_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.keys().copied()
    }

    pub fn build(&self, family: &str, params: &Hyperparams) -> Result<Arc<dyn DepthSchedule>> {
        let factory = self.family(family).ok_or_else(|| {
            Error::invalid(format!(
                "unknown schedule family {family:?} (known: {})",
                self.family_names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory.build(params)
    }

    pub fn preset(&self, name: &str) -> Option<ScheduleSpec> {
        self.presets.get(name).copied()
    }

    pub fn preset_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.presets.keys().map(String::as_str)
    }

    pub fn resolve_preset(&self, name: &str) -> Result<ScheduleSpec> {
        self.preset(name).ok_or_else(|| {
            Error::invalid(format!(
                "unknown preset {name:?} (known: {})",
                self.preset_names().collect::<Vec<_>>().join(", ")
            ))
        })
    }
}
