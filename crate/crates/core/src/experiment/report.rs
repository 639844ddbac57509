//! Boxplot statistics and a plain-text summary of a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Record, ExperimentSummary, RESULTS_FILE, SUMMARY_FILE};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub method: String,
    pub ed_size: usize,
    pub metric: String,
    pub variable: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Five-number summaries over replicates and bootstrap refits, grouped by
/// method, ED size, metric and variable.
pub fn boxplots(records: &[Record]) -> Vec<BoxplotStats> {
    let mut groups: BTreeMap<(&str, usize, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((&r.method, r.ed_size, &r.metric, &r.variable)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((method, ed_size, metric, variable), mut v)| {
            v.sort_by(|a, b| a.total_cmp(b));
            BoxplotStats {
                method: method.to_string(),
                ed_size,
                metric: metric.to_string(),
                variable: variable.to_string(),
                count: v.len(),
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Median table of a results directory. Costs are shown under two
/// equivalence rules: a gradient costs one model run, or `d` model runs.
pub fn report(dir: &Path) -> Result<String> {
    let records = read_records(&dir.join(RESULTS_FILE))?;
    let summary: Option<ExperimentSummary> = std::fs::read_to_string(dir.join(SUMMARY_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let d = summary.as_ref().map(|s| s.variables.len()).unwrap_or(1);
    let stats = boxplots(&records);
    let mut out = String::new();
    let _ = writeln!(out, "{:<20} {:>7} {:>9} {:>9} {:>12} {:>12}", "method", "ed", "cost(1)", "cost(d)", "median_h1", "median_l2");
    let mut rows: BTreeMap<(&str, usize), (f64, f64)> = BTreeMap::new();
    for s in &stats {
        let e = rows.entry((&s.method, s.ed_size)).or_insert((f64::NAN, f64::NAN));
        match s.metric.as_str() {
            "h1_error" => e.0 = s.median,
            "l2_error" => e.1 = s.median,
            _ => {}
        }
    }
    for ((method, ed), (h1, l2)) in rows {
        let grad = !method.trim_start_matches('w').eq("PoinCE");
        let (c1, cd) = if grad { (2 * ed, (1 + d) * ed) } else { (ed, ed) };
        let _ = writeln!(out, "{method:<20} {ed:>7} {c1:>9} {cd:>9} {h1:>12.4e} {l2:>12.4e}");
    }
    let _ = writeln!(out, "\nmedian total Sobol' indices");
    for s in stats.iter().filter(|s| s.metric == "total_sobol") {
        let _ = writeln!(out, "{:<20} {:>7} {:<6} {:.4}", s.method, s.ed_size, s.variable, s.median);
    }
    if let Some(s) = &summary {
        if !s.reference_sobol.is_empty() {
            let _ = writeln!(out, "\nreference total Sobol' indices (pick-freeze)");
            for r in &s.reference_sobol {
                let _ = writeln!(out, "{:<6} {:.4} ± {:.4}", r.variable, r.total_sobol, r.std_error);
            }
        }
        let _ = writeln!(out, "\nfailed fits: {}", s.failures.len());
    }
    Ok(out)
}
