use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::replay::{RunRecord, SolverKind};
use crate::error::{Error, Result};

/// Barrier value ranges `(inf,100]`, `(100,1]`, `(1,0.01]`, `(0.01,0)`.
pub const MU_GROUPS: [&str; 4] = ["(inf,100]", "(100,1]", "(1,0.01]", "(0.01,0)"];
/// Cutting model size ranges.
pub const BUNDLE_GROUPS: [&str; 4] = ["(0,50]", "(50,500]", "(500,1500]", "(1500,inf)"];

pub fn mu_group(mu: f64) -> &'static str {
    if mu >= 100.0 {
        MU_GROUPS[0]
    } else if mu >= 1.0 {
        MU_GROUPS[1]
    } else if mu >= 0.01 {
        MU_GROUPS[2]
    } else {
        MU_GROUPS[3]
    }
}

pub fn bundle_group(size: usize) -> &'static str {
    match size {
        0..=50 => BUNDLE_GROUPS[0],
        51..=500 => BUNDLE_GROUPS[1],
        501..=1500 => BUNDLE_GROUPS[2],
        _ => BUNDLE_GROUPS[3],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Mu,
    Bundle,
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(Grouping::Mu),
            "bundle" => Ok(Grouping::Bundle),
            _ => Err(Error::Contract(format!("unknown grouping '{s}' (expected mu or bundle)"))),
        }
    }
}

/// Per-record quantity that is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Matvecs,
    WallSeconds,
    CondEstimate,
    TrueResidual,
    PrecondColumns,
    DyDeviation,
}

impl Metric {
    pub fn value(&self, r: &RunRecord) -> Option<f64> {
        let v = match self {
            Metric::Matvecs => r.matvecs as f64,
            Metric::WallSeconds => r.wall_seconds,
            Metric::CondEstimate => r.cond_estimate?,
            Metric::TrueResidual => r.true_residual,
            Metric::PrecondColumns => r.precond_columns as f64,
            Metric::DyDeviation => r.dy_deviation,
        };
        v.is_finite().then_some(v)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Matvecs => "matvecs",
            Metric::WallSeconds => "wall_seconds",
            Metric::CondEstimate => "cond_estimate",
            Metric::TrueResidual => "true_residual",
            Metric::PrecondColumns => "precond_columns",
            Metric::DyDeviation => "dy_deviation",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Metric::Matvecs,
            Metric::WallSeconds,
            Metric::CondEstimate,
            Metric::TrueResidual,
            Metric::PrecondColumns,
            Metric::DyDeviation,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::Contract(format!("unknown metric '{s}'")))
    }
}

/// Box-plot statistics of one group; the statistics are empty when the
/// group has no records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub group: String,
    pub solver: SolverKind,
    pub count: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub whisker_lo: Option<f64>,
    pub whisker_hi: Option<f64>,
}

/// Quantile of sorted data by linear interpolation between closest ranks.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of `values`; whiskers are the most extreme data points within
/// 1.5 IQR of the quartiles.
pub fn box_stats(group: &str, solver: SolverKind, values: &[f64]) -> QuartileSummary {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mut s = QuartileSummary {
        group: group.to_string(),
        solver,
        count: v.len(),
        min: None,
        q1: None,
        median: None,
        q3: None,
        max: None,
        whisker_lo: None,
        whisker_hi: None,
    };
    if v.is_empty() {
        return s;
    }
    let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
    let iqr = q3 - q1;
    s.min = Some(v[0]);
    s.q1 = Some(q1);
    s.median = Some(quantile(&v, 0.5));
    s.q3 = Some(q3);
    s.max = Some(v[v.len() - 1]);
    s.whisker_hi = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr);
    s.whisker_lo = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr);
    s
}

/// One summary per group and solver; every group of the grouping appears
/// for every solver present in `records`, empty groups with count 0.
pub fn summarize(records: &[RunRecord], grouping: Grouping, metric: Metric) -> Result<Vec<QuartileSummary>> {
    if records.is_empty() {
        return Err(Error::Contract("no records to summarize".into()));
    }
    let mut solvers: Vec<SolverKind> = records.iter().map(|r| r.solver).collect();
    solvers.sort();
    solvers.dedup();
    let groups: &[&str] = match grouping {
        Grouping::Mu => &MU_GROUPS,
        Grouping::Bundle => &BUNDLE_GROUPS,
    };
    let key = |r: &RunRecord| match grouping {
        Grouping::Mu => mu_group(r.mu),
        Grouping::Bundle => bundle_group(r.bundle_size),
    };
    let mut out = Vec::new();
    for &solver in &solvers {
        for &g in groups {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.solver == solver && key(r) == g)
                .filter_map(|r| metric.value(r))
                .collect();
            out.push(box_stats(g, solver, &vals));
        }
    }
    Ok(out)
}

/// Writes the summaries as CSV, preceded by a comment line naming the
/// metric and the quartile convention.
pub fn emit_csv(path: &Path, rows: &[QuartileSummary], metric: Metric) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "# metric: {}; quartiles by linear interpolation between closest ranks; whiskers at 1.5 IQR",
        metric.name()
    )?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes run records as CSV; `with_timing = false` drops the wall
/// time column so outputs of identical runs compare equal.
pub fn records_to_csv(records: &[RunRecord], with_timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        if with_timing {
            w.serialize(r)?;
        } else {
            let mut r = r.clone();
            r.wall_seconds = 0.0;
            w.serialize(r)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records, true)?)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_values() {
        let s = box_stats("g", SolverKind::DP, &[5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!((s.q1, s.median, s.q3), (Some(2.0), Some(3.0), Some(4.0)));
        assert_eq!((s.whisker_lo, s.whisker_hi), (Some(1.0), Some(5.0)));
    }

    #[test]
    fn single_value() {
        let s = box_stats("g", SolverKind::IT, &[7.0]);
        for v in [s.min, s.q1, s.median, s.q3, s.max, s.whisker_lo, s.whisker_hi] {
            assert_eq!(v, Some(7.0));
        }
    }

    #[test]
    fn outlier_is_outside_whiskers() {
        let s = box_stats("g", SolverKind::IT, &[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!(s.max, Some(100.0));
        assert_eq!(s.whisker_hi, Some(4.0));
    }

    #[test]
    fn empty_group() {
        let s = box_stats("g", SolverKind::RP, &[]);
        assert_eq!(s.count, 0);
        assert!(s.median.is_none());
    }

    #[test]
    fn group_boundaries() {
        assert_eq!(mu_group(0.5), "(1,0.01]");
        assert_eq!(mu_group(100.0), "(inf,100]");
        assert_eq!(mu_group(1.0), "(100,1]");
        assert_eq!(mu_group(0.01), "(1,0.01]");
        assert_eq!(mu_group(0.0099), "(0.01,0)");
        assert_eq!(bundle_group(50), "(0,50]");
        assert_eq!(bundle_group(51), "(50,500]");
        assert_eq!(bundle_group(1500), "(500,1500]");
        assert_eq!(bundle_group(1501), "(1500,inf)");
    }
}
