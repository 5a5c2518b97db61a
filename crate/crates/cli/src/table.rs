//! The `result.csv` table.
//!
//! Columns: one per sweep axis, then
//! `acc_plus, acc_minus, di, mi_sp, mi_eo, mi_ea, mi_eodds, mi_pp1, mi_pp10,
//! Q, m, R_plus, R_minus, delta_q, b, sweeps, residual, converged`.
//! Optional trailing groups follow in this order: second-student columns for
//! coupled runs, `sim_*` columns when theory and simulation are paired, and
//! split-baseline columns for transfer runs. Failed cells leave their numeric
//! fields empty.

use std::path::Path;

use anyhow::{Context, Result};
use tmix_core::mitigation::{CellResult, SimulationCell, TheoryCell};
use tmix_core::observables::{FairnessCriterion, FairnessReport};
use tmix_core::Overlaps;

/// Metric columns present in every table (and valid heatmap names).
pub const METRICS: [&str; 15] = [
    "acc_plus", "acc_minus", "di", "mi_sp", "mi_eo", "mi_ea", "mi_eodds", "mi_pp1", "mi_pp10", "Q", "m", "R_plus",
    "R_minus", "delta_q", "b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of column `name`; empty or unparsable fields are `None`.
    pub fn values(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column(name)?;
        Some(self.rows.iter().map(|r| r[k].parse::<f64>().ok()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner().context("flushing csv")?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Table { header, rows })
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small or
/// very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Which optional column groups to emit.
#[derive(Debug, Clone, Default)]
pub struct Layout {
    pub students: usize,
    pub paired_simulation: bool,
    /// Split-baseline report per cell, in cell order.
    pub split: Option<Vec<std::result::Result<FairnessReport, String>>>,
}

struct Primary<'a> {
    report: &'a FairnessReport,
    overlaps: Vec<Overlaps>,
    delta_q: Vec<f64>,
    student_accuracy: &'a [[f64; 2]],
    sweeps: Option<usize>,
    residual: Option<f64>,
}

fn from_theory(t: &TheoryCell) -> Primary<'_> {
    Primary {
        report: &t.report,
        overlaps: t.theta.students.iter().map(|s| s.overlaps()).collect(),
        delta_q: t.theta.students.iter().map(|s| s.delta_q).collect(),
        student_accuracy: &t.student_accuracy,
        sweeps: Some(t.sweeps),
        residual: Some(t.residual),
    }
}

fn from_simulation(s: &SimulationCell) -> Primary<'_> {
    Primary {
        report: &s.report,
        overlaps: s.overlaps.clone(),
        delta_q: vec![],
        student_accuracy: &s.student_accuracy,
        sweeps: None,
        residual: None,
    }
}

fn report_fields(r: Option<&FairnessReport>) -> Vec<String> {
    let mut out = vec![
        opt(r.map(|r| r.acc_plus)),
        opt(r.map(|r| r.acc_minus)),
        opt(r.map(|r| r.disparate_impact)),
    ];
    out.extend(FairnessCriterion::ALL.iter().map(|&c| opt(r.map(|r| r.mi(c)))));
    out
}

fn overlap_fields(ov: Option<&Overlaps>, delta_q: Option<Option<f64>>) -> Vec<String> {
    let mut out = vec![
        opt(ov.map(|o| o.q)),
        opt(ov.map(|o| o.m)),
        opt(ov.map(|o| o.r_plus)),
        opt(ov.map(|o| o.r_minus)),
    ];
    if let Some(dq) = delta_q {
        out.push(opt(dq));
    }
    out.push(opt(ov.map(|o| o.b)));
    out
}

fn mi_names(prefix: &str) -> Vec<String> {
    FairnessCriterion::ALL.iter().map(|c| format!("{prefix}mi_{}", c.short())).collect()
}

pub fn header(axes: &[String], layout: &Layout) -> Vec<String> {
    let mut h: Vec<String> = axes.to_vec();
    h.extend(["acc_plus", "acc_minus", "di"].map(String::from));
    h.extend(mi_names(""));
    h.extend(["Q", "m", "R_plus", "R_minus", "delta_q", "b", "sweeps", "residual", "converged"].map(String::from));
    if layout.students == 2 {
        h.extend(
            ["s1_acc_plus", "s1_acc_minus", "s2_acc_plus", "s2_acc_minus", "Q_2", "m_2", "R_plus_2", "R_minus_2", "delta_q_2", "b_2"]
                .map(String::from),
        );
    }
    if layout.paired_simulation {
        h.extend(["sim_acc_plus", "sim_acc_minus", "sim_acc_se_plus", "sim_acc_se_minus", "sim_di"].map(String::from));
        h.extend(mi_names("sim_"));
        h.extend(["sim_Q", "sim_m", "sim_R_plus", "sim_R_minus", "sim_b", "sim_seeds_converged"].map(String::from));
    }
    if layout.split.is_some() {
        h.extend(["split_acc_plus", "split_acc_minus", "transfer_plus", "transfer_minus"].map(String::from));
    }
    h
}

pub fn build(axes: &[String], cells: &[CellResult], layout: &Layout) -> Table {
    let header = header(axes, layout);
    let rows = cells
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            let outcome = cell.outcome.as_ref().ok();
            let theory = outcome.and_then(|o| o.theory.as_ref());
            let sim = outcome.and_then(|o| o.simulation.as_ref());
            let primary = theory.map(from_theory).or_else(|| sim.map(from_simulation));
            let p = primary.as_ref();

            let mut row: Vec<String> = cell.coords.iter().map(|&v| num(v)).collect();
            row.extend(report_fields(p.map(|p| p.report)));
            row.extend(overlap_fields(
                p.and_then(|p| p.overlaps.first()),
                Some(p.and_then(|p| p.delta_q.first().copied())),
            ));
            row.push(p.and_then(|p| p.sweeps).map(|s| s.to_string()).unwrap_or_default());
            row.push(opt(p.and_then(|p| p.residual)));
            row.push(cell.converged().to_string());

            if layout.students == 2 {
                let acc = |s: usize, c: usize| opt(p.and_then(|p| p.student_accuracy.get(s)).map(|a| a[c]));
                row.extend([acc(0, 0), acc(0, 1), acc(1, 0), acc(1, 1)]);
                row.extend(overlap_fields(
                    p.and_then(|p| p.overlaps.get(1)),
                    Some(p.and_then(|p| p.delta_q.get(1).copied())),
                ));
            }
            if layout.paired_simulation {
                let r = sim.map(|s| &s.report);
                row.extend([
                    opt(r.map(|r| r.acc_plus)),
                    opt(r.map(|r| r.acc_minus)),
                    opt(sim.map(|s| s.acc_se[0])),
                    opt(sim.map(|s| s.acc_se[1])),
                    opt(r.map(|r| r.disparate_impact)),
                ]);
                row.extend(FairnessCriterion::ALL.iter().map(|&c| opt(r.map(|r| r.mi(c)))));
                row.extend(overlap_fields(sim.and_then(|s| s.overlaps.first()), None));
                row.push(sim.map(|s| s.seeds_converged.to_string()).unwrap_or_default());
            }
            if let Some(split) = &layout.split {
                let s = split[k].as_ref().ok();
                let joint = p.map(|p| p.report);
                let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
                row.extend([
                    opt(s.map(|s| s.acc_plus)),
                    opt(s.map(|s| s.acc_minus)),
                    opt(diff(joint.map(|r| r.acc_plus), s.map(|s| s.acc_plus))),
                    opt(diff(joint.map(|r| r.acc_minus), s.map(|s| s.acc_minus))),
                ]);
            }
            debug_assert_eq!(row.len(), header.len());
            row
        })
        .collect();
    Table { header, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.0, -0.5, 0.123456789012345, 3.2e-7, 1e-300, 2.5e20, 0.0001, f64::MIN_POSITIVE] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(3.2e-7), "3.2e-7");
    }

    #[test]
    fn base_header_is_stable() {
        let h = header(&["rho".to_string()], &Layout { students: 1, ..Default::default() });
        assert_eq!(
            h.join(","),
            "rho,acc_plus,acc_minus,di,mi_sp,mi_eo,mi_ea,mi_eodds,mi_pp1,mi_pp10,Q,m,R_plus,R_minus,delta_q,b,sweeps,residual,converged"
        );
    }

    #[test]
    fn failed_cell_has_empty_fields() {
        let cell = CellResult { index: vec![0], coords: vec![0.5], outcome: Err("boom".into()) };
        let layout = Layout { students: 2, paired_simulation: true, split: Some(vec![Err("boom".into())]) };
        let t = build(&["rho".to_string()], &[cell], &layout);
        let row = &t.rows[0];
        assert_eq!(row.len(), t.header.len());
        assert_eq!(row[0], "0.5");
        assert_eq!(row[t.column("converged").unwrap()], "false");
        assert!(row[t.column("acc_plus").unwrap()].is_empty());
        assert!(row[t.column("transfer_minus").unwrap()].is_empty());
    }
}
