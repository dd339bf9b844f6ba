//! Report documents in JSON, CSV and plain text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::acg::{CallGraph, Variant};
use crate::detector::{EdgeFindings, EdgeKey, MissingFlow};
use crate::ids::{Caller, FuncRef, SourceLoc};
use crate::interp::DynamicCallGraph;
use crate::labeler::{PropertyNameCategory, RootCauseLabel};
use crate::metrics::{aggregate, all_metrics, round1, Metric, MetricResult, RootCauseDistribution};
use crate::pipeline::{Analysis, Attribution};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const WEIGHTING: &str = "equal-split: each missed edge contributes one unit, divided equally among its distinct root-cause labels (fine: among its distinct property-name categories); percentages are rounded to one decimal";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeRef {
    pub site: SourceLoc,
    pub callee: FuncRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeReport {
    pub site: SourceLoc,
    pub callee: FuncRef,
    pub caller: Option<Caller>,
    pub witness: usize,
    pub chain_complete: bool,
    pub labels: BTreeSet<RootCauseLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Missed edges whose flows this one inherited.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends_on: Vec<EdgeRef>,
    pub flows: BTreeSet<MissingFlow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgramReport {
    pub schema_version: u32,
    pub kind: String,
    pub program: String,
    pub variant: Variant,
    pub weighting: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_error: Option<String>,
    pub metrics: Vec<MetricResult>,
    pub distribution: RootCauseDistribution,
    pub unresolved_pct: f64,
    pub dependent_calls_resolved: usize,
    pub missed_edges: Vec<EdgeReport>,
}

fn is_unresolved(a: &Attribution) -> bool {
    a.flows.iter().any(|f| matches!(f, MissingFlow::Unresolved { .. }))
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        round1(100.0 * part as f64 / whole as f64)
    }
}

impl ProgramReport {
    pub fn new(
        program: &str,
        variant: Variant,
        findings: &[EdgeFindings],
        attribution: &BTreeMap<EdgeKey, Attribution>,
        cg: &CallGraph,
        dcg: &DynamicCallGraph,
        execution_error: Option<String>,
    ) -> Self {
        let mut dependent_calls_resolved = 0;
        let mut missed_edges = Vec::new();
        for f in findings {
            let key = f.edge.key();
            let Some(a) = attribution.get(&key) else { continue };
            let depends_on: Vec<EdgeRef> = f
                .flows
                .iter()
                .filter_map(|fl| match fl {
                    MissingFlow::DependentCall { site, callee, .. } => Some(EdgeRef {
                        site: site.clone(),
                        callee: callee.clone(),
                    }),
                    _ => None,
                })
                .collect();
            dependent_calls_resolved += depends_on.len();
            let caller = dcg
                .edges
                .iter()
                .find(|e| e.site == key.0 && e.callee == key.1)
                .map(|e| e.caller.clone());
            missed_edges.push(EdgeReport {
                site: key.0,
                callee: key.1,
                caller,
                witness: f.edge.witness,
                chain_complete: f.chain.complete,
                labels: a.labels.clone(),
                categories: a.categories.iter().map(|c| c.key().to_string()).collect(),
                depends_on,
                flows: a.flows.clone(),
            });
        }
        let (labels, fine) = label_maps(attribution.iter().map(|(k, a)| (k.clone(), a)));
        let unresolved = attribution.values().filter(|a| is_unresolved(a)).count();
        ProgramReport {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "root-cause-report".into(),
            program: program.to_string(),
            variant,
            weighting: WEIGHTING.into(),
            execution_error,
            metrics: all_metrics(cg, dcg),
            distribution: aggregate(&labels, &fine),
            unresolved_pct: pct(unresolved, attribution.len()),
            dependent_calls_resolved,
            missed_edges,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn metric(&self, m: Metric) -> Option<&MetricResult> {
        self.metrics.iter().find(|r| r.metric == m)
    }

    pub fn to_csv(&self) -> String {
        let mut rows = summary_rows(&self.metrics, &self.distribution, self.unresolved_pct, self.missed_edges.len());
        rows.push(vec![
            "summary".into(),
            "dependentCallsResolved".into(),
            self.dependent_calls_resolved.to_string(),
            String::new(),
            String::new(),
        ]);
        write_csv(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program {} ({})", self.program, self.variant);
        if let Some(e) = &self.execution_error {
            let _ = writeln!(out, "execution stopped: {e}");
        }
        let _ = writeln!(
            out,
            "missed edges: {}, dependent calls resolved: {}, unresolved: {:.1}%",
            self.missed_edges.len(),
            self.dependent_calls_resolved,
            self.unresolved_pct
        );
        write_summary(&mut out, &self.metrics, &self.distribution);
        if !self.missed_edges.is_empty() {
            out.push_str("missed edges:\n");
        }
        for e in &self.missed_edges {
            let labels: Vec<&str> = e.labels.iter().map(|l| l.as_str()).collect();
            let _ = write!(out, "  {} -> {}  {}", e.site, e.callee, labels.join(", "));
            if !e.categories.is_empty() {
                let _ = write!(out, " [{}]", e.categories.join(", "));
            }
            out.push('\n');
        }
        out
    }
}

type LabelMaps<K> = (
    BTreeMap<K, BTreeSet<RootCauseLabel>>,
    BTreeMap<K, BTreeSet<PropertyNameCategory>>,
);

fn label_maps<'a, K: Ord + Clone>(items: impl Iterator<Item = (K, &'a Attribution)>) -> LabelMaps<K> {
    let mut labels = BTreeMap::new();
    let mut fine = BTreeMap::new();
    for (k, a) in items {
        if !a.categories.is_empty() {
            fine.insert(k.clone(), a.categories.clone());
        }
        labels.insert(k, a.labels.clone());
    }
    (labels, fine)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProgramSummary {
    pub program: String,
    pub missed_edges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_error: Option<String>,
}

/// Totals over a corpus. Metric numerators and denominators are summed
/// across programs before dividing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusReport {
    pub schema_version: u32,
    pub kind: String,
    pub variant: Variant,
    pub weighting: String,
    pub programs: Vec<ProgramSummary>,
    pub metrics: Vec<MetricResult>,
    pub distribution: RootCauseDistribution,
    pub unresolved_pct: f64,
    pub dependent_calls_resolved: usize,
    pub missed_edges: usize,
}

impl CorpusReport {
    pub fn new(variant: Variant, analyses: &[Analysis]) -> Self {
        let all = analyses
            .iter()
            .flat_map(|a| a.attribution.iter().map(move |(k, v)| ((a.name.clone(), k.clone()), v)));
        let (labels, fine) = label_maps(all);
        let missed: usize = analyses.iter().map(|a| a.attribution.len()).sum();
        let unresolved = analyses
            .iter()
            .flat_map(|a| a.attribution.values())
            .filter(|a| is_unresolved(a))
            .count();
        let metrics = Metric::ALL
            .iter()
            .map(|&m| {
                let parts = analyses.iter().filter_map(|a| a.report.metric(m));
                let mut sum = [0.0; 4];
                for r in parts {
                    sum[0] += r.recall_numerator;
                    sum[1] += r.recall_denominator;
                    sum[2] += r.precision_numerator;
                    sum[3] += r.precision_denominator;
                }
                MetricResult::from_parts(m, sum[0], sum[1], sum[2], sum[3])
            })
            .collect();
        CorpusReport {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: "corpus-report".into(),
            variant,
            weighting: WEIGHTING.into(),
            programs: analyses
                .iter()
                .map(|a| ProgramSummary {
                    program: a.name.clone(),
                    missed_edges: a.attribution.len(),
                    execution_error: a.execution_error.clone(),
                })
                .collect(),
            metrics,
            distribution: aggregate(&labels, &fine),
            unresolved_pct: pct(unresolved, missed),
            dependent_calls_resolved: analyses.iter().map(|a| a.report.dependent_calls_resolved).sum(),
            missed_edges: missed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        write_csv(summary_rows(&self.metrics, &self.distribution, self.unresolved_pct, self.missed_edges))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "corpus of {} programs ({})", self.programs.len(), self.variant);
        let _ = writeln!(
            out,
            "missed edges: {}, dependent calls resolved: {}, unresolved: {:.1}%",
            self.missed_edges, self.dependent_calls_resolved, self.unresolved_pct
        );
        write_summary(&mut out, &self.metrics, &self.distribution);
        out
    }
}

fn summary_rows(metrics: &[MetricResult], d: &RootCauseDistribution, unresolved_pct: f64, missed: usize) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for m in metrics {
        rows.push(vec![
            "recall".into(),
            m.metric.to_string(),
            m.recall.to_string(),
            m.recall_numerator.to_string(),
            m.recall_denominator.to_string(),
        ]);
        rows.push(vec![
            "precision".into(),
            m.metric.to_string(),
            m.precision.to_string(),
            m.precision_numerator.to_string(),
            m.precision_denominator.to_string(),
        ]);
    }
    for (section, shares, n) in [("coarse", &d.coarse, d.edges), ("fine", &d.fine, d.fine_edges)] {
        for (k, s) in shares {
            rows.push(vec![section.into(), k.clone(), s.pct.to_string(), s.count.to_string(), n.to_string()]);
        }
    }
    rows.push(vec!["summary".into(), "missedEdges".into(), missed.to_string(), String::new(), String::new()]);
    rows.push(vec!["summary".into(), "unresolvedPct".into(), unresolved_pct.to_string(), String::new(), String::new()]);
    rows
}

fn write_csv(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "key", "value", "numerator", "denominator"])
        .expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn write_summary(out: &mut String, metrics: &[MetricResult], d: &RootCauseDistribution) {
    let _ = writeln!(out, "{:<17} {:>7} {:>10}", "metric", "recall", "precision");
    for m in metrics {
        let _ = writeln!(out, "{:<17} {:>7.3} {:>10.3}", m.metric.to_string(), m.recall, m.precision);
    }
    if d.edges > 0 {
        let _ = writeln!(out, "root causes over {} edges:", d.edges);
        for (k, s) in &d.coarse {
            let _ = writeln!(out, "  {:<32} {:>6.2} {:>6.1}%", k, s.count, s.pct);
        }
    }
    if d.fine_edges > 0 {
        let _ = writeln!(out, "property names over {} edges:", d.fine_edges);
        for (k, s) in &d.fine {
            let _ = writeln!(out, "  {:<32} {:>6.2} {:>6.1}%", k, s.count, s.pct);
        }
    }
}
