//! Command dispatch and artifact writing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use tmix_core::exposure::Strategy;
use tmix_core::mitigation::{
    argmin_spread, coupling_sweep, eta_robustness, reweigh_sweep, run_sweep, simulate_point, solve_point, BasePoint,
    CellOutcome, CellResult, SweepMode, SweepResult,
};
use tmix_core::observables::{FairnessCriterion, FairnessReport};

use crate::config::{Command, ExperimentConfig};
use crate::recipes;
use crate::svg;
use crate::table::{self, Layout, Table};

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub allow_partial: bool,
    pub seed: Option<u64>,
    pub d: Option<usize>,
    /// Also write `cells.json` with every cell's full result.
    pub diagnostics: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub table: Table,
    pub cells: usize,
    pub failures: usize,
    pub unconverged: usize,
}

impl Outcome {
    pub fn all_converged(&self) -> bool {
        self.unconverged == 0
    }
}

/// Loads `arg` as a config file, or as a shipped recipe when no such file
/// exists (`fig1_center` and `fig1_center.json` both name the recipe).
pub fn resolve_config(arg: &str) -> Result<(ExperimentConfig, String)> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok((ExperimentConfig::load(path)?, path.display().to_string()));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
    if recipes::source(stem).is_some() {
        return Ok((recipes::load(stem)?, format!("recipe:{stem}")));
    }
    anyhow::bail!("{arg}: no such file, and no recipe of that name (see `tmix list-recipes`)")
}

struct Evaluated {
    axes: Vec<String>,
    cells: Vec<CellResult>,
    paired: bool,
    split: Option<Vec<std::result::Result<FairnessReport, String>>>,
    sweep: Option<SweepResult>,
    extra: BTreeMap<&'static str, Value>,
}

fn point_cell(outcome: tmix_core::Result<CellOutcome>) -> CellResult {
    CellResult { index: vec![], coords: vec![], outcome: outcome.map_err(|e| e.to_string()) }
}

/// The split baseline: one student per group, uncoupled, exact membership.
fn split_point(base: &BasePoint) -> BasePoint {
    BasePoint { strategy: Strategy::Coupled, gamma: 0.0, eta: 1.0, ..*base }
}

fn reports(cells: &[CellResult]) -> Vec<std::result::Result<FairnessReport, String>> {
    cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(_) => c.report().cloned().ok_or_else(|| "no report".to_string()),
            Err(e) => Err(e.clone()),
        })
        .collect()
}

fn from_sweep(result: SweepResult, paired: bool) -> Evaluated {
    Evaluated {
        axes: result.spec.axes.iter().map(|a| a.axis.name().to_string()).collect(),
        cells: result.cells.clone(),
        paired,
        split: None,
        sweep: Some(result),
        extra: BTreeMap::new(),
    }
}

fn evaluate(command: Command, cfg: &ExperimentConfig) -> Result<Evaluated> {
    let theory = |p: &BasePoint| solve_point(p, &cfg.solver, None);
    let simulate = |p: &BasePoint| simulate_point(p, &cfg.simulation);
    let single = |cell: CellResult| Evaluated {
        axes: vec![],
        cells: vec![cell],
        paired: false,
        split: None,
        sweep: None,
        extra: BTreeMap::new(),
    };
    let out = match command {
        Command::Solve => {
            let mut e = single(point_cell(theory(&cfg.base).map(|t| CellOutcome { theory: Some(t), simulation: None })));
            if cfg.transfer {
                let split = theory(&split_point(&cfg.base)).map(|t| t.report).map_err(|e| e.to_string());
                e.split = Some(vec![split]);
            }
            e
        }
        Command::Simulate => single(point_cell(
            simulate(&cfg.base).map(|s| CellOutcome { theory: None, simulation: Some(s) }),
        )),
        Command::Compare if cfg.axes.is_empty() => {
            let outcome = theory(&cfg.base).and_then(|t| {
                Ok(CellOutcome { theory: Some(t), simulation: Some(simulate(&cfg.base)?) })
            });
            Evaluated { paired: true, ..single(point_cell(outcome)) }
        }
        Command::Compare => from_sweep(run_sweep(&cfg.spec(cfg.axes.clone(), SweepMode::Both), None)?, true),
        Command::Sweep => {
            let spec = cfg.spec(cfg.axes.clone(), cfg.mode);
            let mut e = from_sweep(run_sweep(&spec, None)?, cfg.mode == SweepMode::Both);
            if cfg.transfer {
                let split_spec = tmix_core::mitigation::SweepSpec { base: split_point(&cfg.base), ..spec };
                e.split = Some(reports(&run_sweep(&split_spec, None)?.cells));
            }
            e
        }
        Command::Reweigh => {
            let range = cfg.reweigh.expect("validated").tuple();
            from_sweep(reweigh_sweep(&cfg.spec(vec![], cfg.mode), range, None)?, cfg.mode == SweepMode::Both)
        }
        Command::Couple => {
            let c = cfg.couple.expect("validated");
            from_sweep(
                coupling_sweep(&cfg.spec(vec![], cfg.mode), c.gamma.tuple(), c.eta, None)?,
                cfg.mode == SweepMode::Both,
            )
        }
        Command::Eta => {
            let block = cfg.eta.expect("validated");
            let r = eta_robustness(&cfg.spec(vec![], cfg.mode), block.etas.tuple(), block.strategy(), None)?;
            let mut e = from_sweep(r.result, cfg.mode == SweepMode::Both);
            e.extra.insert(
                "eta",
                json!({ "etas": r.etas, "spreads": r.spreads, "threshold": r.threshold }),
            );
            e
        }
    };
    Ok(out)
}

fn students(cells: &[CellResult]) -> usize {
    cells
        .iter()
        .filter_map(|c| {
            let o = c.outcome.as_ref().ok()?;
            o.theory
                .as_ref()
                .map(|t| t.theta.students.len())
                .or(o.simulation.as_ref().map(|s| s.overlaps.len()))
        })
        .max()
        .unwrap_or(1)
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let probe = dir.join(".tmix-write-probe");
    std::fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    std::fs::remove_file(&probe).ok();
    Ok(())
}

#[derive(Serialize)]
struct Minimum {
    index: Vec<usize>,
    coords: Vec<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs `command` with `cfg` (after applying `opts`) and writes
/// `result.csv`, `run.json` and, for two-axis grids, `heatmap_<metric>.svg`.
pub fn run(command: Command, mut cfg: ExperimentConfig, source: &str, opts: &Options) -> Result<Outcome> {
    if let Some(seed) = opts.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(d) = opts.d {
        cfg.simulation.d = d;
    }
    cfg.workers = opts.workers.or(cfg.workers);
    cfg.validate(command)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("tmix-out").join(cfg.name.as_deref().unwrap_or(command.name())));
    cfg.out = Some(out_dir.clone());
    ensure_writable(&out_dir)?;

    let pool = rayon_pool(cfg.workers)?;
    let ev = match &pool {
        Some(p) => p.install(|| evaluate(command, &cfg))?,
        None => evaluate(command, &cfg)?,
    };

    let layout = Layout { students: students(&ev.cells), paired_simulation: ev.paired, split: ev.split.clone() };
    let table = table::build(&ev.axes, &ev.cells, &layout);
    table.write_csv(&out_dir.join("result.csv"))?;
    if ev.axes.len() == 2 {
        for metric in cfg.heatmap_metrics() {
            let svg = svg::heatmap(&table, &metric)?;
            let path = out_dir.join(format!("heatmap_{metric}.svg"));
            std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        }
    }

    let failures: Vec<Value> = ev
        .cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().err().map(|e| json!({ "index": c.index, "coords": c.coords, "error": e })))
        .collect();
    let unconverged = ev.cells.iter().filter(|c| !c.converged()).count();
    let mut run_json = json!({
        "tool": "tmix",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "source": source,
        "config": cfg,
        "cells": ev.cells.len(),
        "unconverged": unconverged,
        "failures": failures,
    });
    if let Some(sweep) = &ev.sweep {
        let minima: BTreeMap<&str, Option<Minimum>> = sweep
            .minima
            .iter()
            .map(|(c, idx)| {
                let m = idx.as_ref().map(|i| Minimum { index: i.clone(), coords: sweep.spec.coords(i) });
                (c.name(), m)
            })
            .collect();
        run_json["minima"] = json!(minima);
        run_json["argmin_spread"] = json!(argmin_spread(sweep, &FairnessCriterion::ALL).ok());
    }
    for (k, v) in &ev.extra {
        run_json[*k] = v.clone();
    }
    write_json(&out_dir.join("run.json"), &run_json)?;
    if opts.diagnostics {
        write_json(&out_dir.join("cells.json"), &json!({ "cells": ev.cells, "split": ev.split }))?;
    }

    Ok(Outcome {
        out_dir,
        cells: ev.cells.len(),
        failures: failures.len(),
        unconverged,
        table,
    })
}

fn rayon_pool(workers: Option<usize>) -> Result<Option<rayon::ThreadPool>> {
    workers
        .map(|w| rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build().context("building worker pool"))
        .transpose()
}
