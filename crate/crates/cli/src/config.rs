//! Experiment configuration files (JSON, `"schema": 1`).

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tmix_core::exposure::Strategy;
use tmix_core::mitigation::{AxisSpec, BasePoint, EtaStrategy, SimulationSettings, SweepAxis, SweepMode, SweepSpec};
use tmix_core::replica::SolverConfig;

use crate::table::METRICS;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Replica prediction at the base point.
    Solve,
    /// Finite-size training at the base point.
    Simulate,
    /// Theory and simulation side by side, over the axes if any.
    Compare,
    /// Grid over the configured axes.
    Sweep,
    /// Loss reweighing grid over (w_group_plus, w_label_one).
    Reweigh,
    /// Coupled students over the coupling strength.
    Couple,
    /// Mitigation grid against membership fidelity.
    Eta,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::Reweigh => "reweigh",
            Command::Couple => "couple",
            Command::Eta => "eta",
        }
    }
}

/// `count` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl RangeSpec {
    pub fn tuple(self) -> (f64, f64, usize) {
        (self.start, self.stop, self.count)
    }

    fn check(self, what: &str) -> Result<()> {
        ensure!(self.count >= 1, "{what}: count must be >= 1");
        ensure!(self.start.is_finite() && self.stop.is_finite(), "{what}: range must be finite");
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleBlock {
    pub gamma: RangeSpec,
    #[serde(default = "one")]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", deny_unknown_fields)]
pub enum EtaMitigation {
    Reweigh { w_group_plus: RangeSpec },
    Coupled { gamma: RangeSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaBlock {
    pub etas: RangeSpec,
    pub strategy: EtaMitigation,
}

impl EtaBlock {
    pub fn strategy(&self) -> EtaStrategy {
        match self.strategy {
            EtaMitigation::Reweigh { w_group_plus } => EtaStrategy::Reweigh { w_group_plus: w_group_plus.tuple() },
            EtaMitigation::Coupled { gamma } => EtaStrategy::Coupled { gamma: gamma.tuple() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Command the config is meant for; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub base: BasePoint,
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
    /// Mode of the `sweep` command; the other commands fix their own.
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reweigh: Option<RangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couple: Option<CoupleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaBlock>,
    /// Adds the split-baseline accuracy and its difference to the joint one.
    #[serde(default)]
    pub transfer: bool,
    /// Metrics drawn as heatmaps for two-axis grids; all metrics when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmaps: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            anyhow::anyhow!("line {}, column {}: {}", e.line(), e.column(), e)
        })?;
        ensure!(
            cfg.schema == SCHEMA_VERSION,
            "field `schema`: version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema
        );
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Sweep spec over `axes` with `mode`.
    pub fn spec(&self, axes: Vec<AxisSpec>, mode: SweepMode) -> SweepSpec {
        SweepSpec {
            axes,
            base: self.base,
            mode,
            solver: self.solver,
            simulation: self.simulation,
        }
    }

    /// Checks that the config carries what `command` needs.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.base.validate().context("field `base`")?;
        self.solver.validate().context("field `solver`")?;
        ensure!(self.axes.len() <= 2, "field `axes`: at most two axes ({} given)", self.axes.len());
        if !self.axes.is_empty() {
            self.spec(self.axes.clone(), SweepMode::Theory).validate().context("field `axes`")?;
        }
        if let Some(metrics) = &self.heatmaps {
            for m in metrics {
                ensure!(METRICS.contains(&m.as_str()), "field `heatmaps`: unknown metric `{m}`");
            }
        }
        match command {
            Command::Solve | Command::Simulate | Command::Compare => {}
            Command::Sweep => ensure!(!self.axes.is_empty(), "field `axes`: `sweep` needs one or two axes"),
            Command::Reweigh => self.reweigh.context("field `reweigh`: missing (needs start, stop, count)")?.check("reweigh")?,
            Command::Couple => {
                let c = self.couple.context("field `couple`: missing (needs gamma and eta)")?;
                c.gamma.check("couple.gamma")?;
                ensure!((0.0..=1.0).contains(&c.eta), "field `couple.eta`: must lie in [0, 1]");
            }
            Command::Eta => {
                let e = self.eta.context("field `eta`: missing (needs etas and strategy)")?;
                e.etas.check("eta.etas")?;
                match e.strategy {
                    EtaMitigation::Reweigh { w_group_plus } => w_group_plus.check("eta.strategy.w_group_plus")?,
                    EtaMitigation::Coupled { gamma } => gamma.check("eta.strategy.gamma")?,
                }
            }
        }
        if self.transfer {
            ensure!(
                matches!(command, Command::Solve | Command::Sweep),
                "field `transfer`: only supported by `solve` and `sweep`"
            );
            ensure!(self.base.strategy == Strategy::Single, "field `transfer`: the joint model must be a single student");
            if self.axes.iter().any(|a| matches!(a.axis, SweepAxis::Gamma | SweepAxis::Eta)) {
                bail!("field `transfer`: the split baseline fixes gamma and eta, so they cannot be swept");
            }
        }
        Ok(())
    }

    /// Metrics to draw as heatmaps.
    pub fn heatmap_metrics(&self) -> Vec<String> {
        match &self.heatmaps {
            Some(m) => m.clone(),
            None => METRICS.iter().map(|s| s.to_string()).collect(),
        }
    }
}
