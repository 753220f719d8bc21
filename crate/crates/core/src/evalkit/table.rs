use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{geomean, mean, percentile_summary, PercentileSummary};
use super::TrialResult;

/// One (method, program, size) configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovementEntry {
    pub method: String,
    pub program: String,
    pub size: Option<f64>,
    pub baseline_mean: Option<f64>,
    pub method_mean: Option<f64>,
    /// `baseline_mean / method_mean`; absent when either side has no usable
    /// trials.
    pub ratio: Option<f64>,
    pub method_trials: usize,
    pub discarded_trials: usize,
    pub timeouts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTable {
    pub baseline: String,
    pub entries: Vec<ImprovementEntry>,
}

type CellKey = (String, String, Option<u64>);

fn size_key(s: Option<f64>) -> Option<u64> {
    s.map(f64::to_bits)
}

impl ImprovementTable {
    /// Means over instances and trials per cell, then the baseline-over-method
    /// ratio. Zero, NaN and failed trials are excluded before averaging.
    pub fn from_results(results: &[TrialResult], baseline: &str) -> Self {
        let mut cells: BTreeMap<CellKey, Vec<&TrialResult>> = BTreeMap::new();
        let mut order: Vec<CellKey> = Vec::new();
        for r in results {
            let key = (r.method.clone(), r.program_id.clone(), size_key(r.size));
            if !cells.contains_key(&key) {
                order.push(key.clone());
            }
            cells.entry(key).or_default().push(r);
        }
        let cell_mean = |key: &CellKey| -> Option<f64> {
            let v: Vec<f64> = cells.get(key)?.iter().filter(|r| r.usable()).map(|r| r.metric).collect();
            mean(&v)
        };
        let mut entries = Vec::new();
        for key in &order {
            if key.0 == baseline {
                continue;
            }
            let trials = &cells[key];
            let base_key = (baseline.to_string(), key.1.clone(), key.2);
            let baseline_mean = cell_mean(&base_key);
            let method_mean = cell_mean(key);
            let ratio = match (baseline_mean, method_mean) {
                (Some(b), Some(m)) if m > 0.0 && b > 0.0 => Some(b / m).filter(|r| r.is_finite()),
                _ => None,
            };
            entries.push(ImprovementEntry {
                method: key.0.clone(),
                program: key.1.clone(),
                size: trials[0].size,
                baseline_mean,
                method_mean,
                ratio,
                method_trials: trials.len(),
                discarded_trials: trials.iter().filter(|r| !r.usable()).count(),
                timeouts: trials.iter().filter(|r| r.timed_out).count(),
            });
        }
        Self {
            baseline: baseline.to_string(),
            entries,
        }
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.method) {
                out.push(e.method.clone());
            }
        }
        out
    }

    /// One row per configuration.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let header = ["method", "program", "size", "baseline_mean", "method_mean", "ratio", "trials", "discarded", "timeouts"];
        w.write_record(header).expect("in-memory csv");
        for e in &self.entries {
            w.write_record([
                e.method.clone(),
                e.program.clone(),
                e.size.map(|x| x.to_string()).unwrap_or_default(),
                opt(e.baseline_mean),
                opt(e.method_mean),
                opt(e.ratio),
                e.method_trials.to_string(),
                e.discarded_trials.to_string(),
                e.timeouts.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    pub geomean: Option<f64>,
    pub ratios: usize,
    pub percentiles: Option<PercentileSummary>,
}

impl GroupStats {
    fn of(label: String, ratios: &[f64]) -> Self {
        Self {
            label,
            geomean: geomean(ratios).ok(),
            ratios: ratios.len(),
            percentiles: percentile_summary(ratios).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub overall: GroupStats,
    pub by_program: Vec<GroupStats>,
    pub by_size: Vec<GroupStats>,
    /// Configurations dropped for lack of a usable ratio.
    pub discarded_entries: usize,
    pub discarded_trials: usize,
    pub total_trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub baseline: String,
    pub percentile_rule: String,
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

fn size_label(s: Option<f64>) -> String {
    match s {
        Some(v) => format!("{}%", v * 100.0),
        None => "all".into(),
    }
}

/// Geometric means overall, by program and by dataset size, with
/// percentile rows and discard counts.
pub fn summarize(table: &ImprovementTable) -> Summary {
    let mut methods = Vec::new();
    for m in table.methods() {
        let rows: Vec<&ImprovementEntry> = table.entries.iter().filter(|e| e.method == m).collect();
        let ratios: Vec<f64> = rows.iter().filter_map(|e| e.ratio).collect();
        let mut by_program: Vec<(String, Vec<f64>)> = Vec::new();
        let mut by_size: Vec<(Option<u64>, Option<f64>, Vec<f64>)> = Vec::new();
        for e in &rows {
            let Some(r) = e.ratio else { continue };
            match by_program.iter_mut().find(|(p, _)| *p == e.program) {
                Some((_, v)) => v.push(r),
                None => by_program.push((e.program.clone(), vec![r])),
            }
            match by_size.iter_mut().find(|(k, _, _)| *k == size_key(e.size)) {
                Some((_, _, v)) => v.push(r),
                None => by_size.push((size_key(e.size), e.size, vec![r])),
            }
        }
        by_size.sort_by(|a, b| a.1.unwrap_or(f64::INFINITY).total_cmp(&b.1.unwrap_or(f64::INFINITY)));
        methods.push(MethodSummary {
            method: m.clone(),
            overall: GroupStats::of("overall".into(), &ratios),
            by_program: by_program.iter().map(|(p, v)| GroupStats::of(p.clone(), v)).collect(),
            by_size: by_size.iter().map(|(_, s, v)| GroupStats::of(size_label(*s), v)).collect(),
            discarded_entries: rows.iter().filter(|e| e.ratio.is_none()).count(),
            discarded_trials: rows.iter().map(|e| e.discarded_trials).sum(),
            total_trials: rows.iter().map(|e| e.method_trials).sum(),
        });
    }
    Summary {
        baseline: table.baseline.clone(),
        percentile_rule: "linear interpolation between closest ranks; MPI is the smallest integer percentile above 1".into(),
        methods,
    }
}
