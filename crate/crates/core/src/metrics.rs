//! Recall and precision of a static call graph against a dynamic one, and
//! root-cause distributions over missed edges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::acg::CallGraph;
use crate::ids::{Caller, FuncRef, SourceLoc};
use crate::interp::DynamicCallGraph;
use crate::labeler::{PropertyNameCategory, RootCauseLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Metric {
    CallSiteTargets,
    ReachableNodes,
    ReachableEdges,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::CallSiteTargets, Metric::ReachableNodes, Metric::ReachableEdges];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::CallSiteTargets => "callSiteTargets",
            Metric::ReachableNodes => "reachableNodes",
            Metric::ReachableEdges => "reachableEdges",
        })
    }
}

/// `recall = recallNumerator / recallDenominator`, likewise for precision.
/// For `callSiteTargets` the numerators are sums of per-site ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricResult {
    pub metric: Metric,
    pub recall: f64,
    pub precision: f64,
    pub recall_numerator: f64,
    pub recall_denominator: f64,
    pub precision_numerator: f64,
    pub precision_denominator: f64,
    /// Set when a denominator was zero and the ratio defaulted to 1.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_recall: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_precision: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (1.0, true)
    } else {
        (num / den, false)
    }
}

impl MetricResult {
    pub fn from_parts(metric: Metric, rn: f64, rd: f64, pn: f64, pd: f64) -> Self {
        let (recall, empty_recall) = ratio(rn, rd);
        let (precision, empty_precision) = ratio(pn, pd);
        MetricResult {
            metric,
            recall,
            precision,
            recall_numerator: rn,
            recall_denominator: rd,
            precision_numerator: pn,
            precision_denominator: pd,
            empty_recall,
            empty_precision,
        }
    }

    fn from_sets<T: Ord>(metric: Metric, relevant: &BTreeSet<T>, retrieved: &BTreeSet<T>) -> Self {
        let hit = relevant.intersection(retrieved).count() as f64;
        MetricResult::from_parts(metric, hit, relevant.len() as f64, hit, retrieved.len() as f64)
    }
}

type Edge = (Caller, SourceLoc, FuncRef);

/// Call edges to user functions. Natives are left out of every metric:
/// callbacks they run are attributed to the calling function already.
fn dynamic_edges(dcg: &DynamicCallGraph) -> BTreeSet<Edge> {
    dcg.edges
        .iter()
        .filter(|e| !e.callee.is_native())
        .map(|e| (e.caller.clone(), e.site.clone(), e.callee.clone()))
        .collect()
}

fn static_edges(cg: &CallGraph) -> BTreeSet<Edge> {
    cg.edges
        .iter()
        .filter(|(_, f)| !f.is_native())
        .filter_map(|(s, f)| Some((cg.site_owner.get(s)?.clone(), s.clone(), f.clone())))
        .collect()
}

fn reachable(edges: &BTreeSet<Edge>, roots: &BTreeSet<Caller>) -> BTreeSet<Caller> {
    let mut succ: BTreeMap<&Caller, Vec<Caller>> = BTreeMap::new();
    for (c, _, f) in edges {
        succ.entry(c).or_default().push(Caller::Func(f.clone()));
    }
    let mut seen: BTreeSet<Caller> = roots.clone();
    let mut queue: VecDeque<Caller> = roots.iter().cloned().collect();
    while let Some(n) = queue.pop_front() {
        for m in succ.get(&n).into_iter().flatten() {
            if seen.insert(m.clone()) {
                queue.push_back(m.clone());
            }
        }
    }
    seen
}

pub fn recall_precision(cg: &CallGraph, dcg: &DynamicCallGraph, metric: Metric) -> MetricResult {
    let dynamic = dynamic_edges(dcg);
    let stat = static_edges(cg);
    match metric {
        Metric::CallSiteTargets => {
            let mut by_site: BTreeMap<&SourceLoc, (BTreeSet<&FuncRef>, BTreeSet<&FuncRef>)> = BTreeMap::new();
            for (_, s, f) in &dynamic {
                by_site.entry(s).or_default().0.insert(f);
            }
            for (_, s, f) in &stat {
                if let Some(entry) = by_site.get_mut(s) {
                    entry.1.insert(f);
                }
            }
            let (mut rn, mut pn, mut pd) = (0.0, 0.0, 0.0);
            for (d, s) in by_site.values() {
                let hit = d.intersection(s).count() as f64;
                rn += hit / d.len() as f64;
                if !s.is_empty() {
                    pn += hit / s.len() as f64;
                    pd += 1.0;
                }
            }
            MetricResult::from_parts(metric, rn, by_site.len() as f64, pn, pd)
        }
        Metric::ReachableNodes => {
            let roots = &dcg.entrypoints;
            MetricResult::from_sets(metric, &reachable(&dynamic, roots), &reachable(&stat, roots))
        }
        Metric::ReachableEdges => {
            let sources = reachable(&dynamic, &dcg.entrypoints);
            let retrieved: BTreeSet<Edge> = stat.into_iter().filter(|(c, _, _)| sources.contains(c)).collect();
            MetricResult::from_sets(metric, &dynamic, &retrieved)
        }
    }
}

pub fn all_metrics(cg: &CallGraph, dcg: &DynamicCallGraph) -> Vec<MetricResult> {
    Metric::ALL.iter().map(|&m| recall_precision(cg, dcg, m)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: f64,
    /// Percentage, rounded to one decimal.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RootCauseDistribution {
    /// Missed edges contributing to `coarse`.
    pub edges: usize,
    pub coarse: BTreeMap<String, Share>,
    /// Missed edges with a classified dynamic property access.
    pub fine_edges: usize,
    pub fine: BTreeMap<String, Share>,
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Each key spreads one unit equally over its distinct values.
fn split<K, V: Ord + Copy>(items: &BTreeMap<K, BTreeSet<V>>, name: impl Fn(V) -> String) -> (usize, BTreeMap<String, Share>) {
    let mut units: BTreeMap<String, f64> = BTreeMap::new();
    let mut n = 0;
    for vals in items.values().filter(|v| !v.is_empty()) {
        n += 1;
        let w = 1.0 / vals.len() as f64;
        for v in vals {
            *units.entry(name(*v)).or_default() += w;
        }
    }
    let shares = units
        .into_iter()
        .map(|(k, count)| {
            let pct = round1(100.0 * count / n as f64);
            (k, Share { count, pct })
        })
        .collect();
    (n, shares)
}

/// Root-cause shares over missed edges. An edge with several distinct
/// labels counts for an equal fraction of each.
pub fn aggregate<K: Ord>(
    labels: &BTreeMap<K, BTreeSet<RootCauseLabel>>,
    fine: &BTreeMap<K, BTreeSet<PropertyNameCategory>>,
) -> RootCauseDistribution {
    let (edges, coarse) = split(labels, |l: RootCauseLabel| l.as_str().to_string());
    let (fine_edges, fine) = split(fine, |c: PropertyNameCategory| c.key().to_string());
    RootCauseDistribution {
        edges,
        coarse,
        fine_edges,
        fine,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acg::{analyze, Variant};
    use crate::frontend::{parse_program, resolve_bindings};
    use crate::interp::{execute, NativeConfig};

    const PHONE_BOOK: &str = "function main() {
  var v1 = function f1() { return \"John\"; };
  var v2 = function f2() { return \"555-1234\"; };
  var obj = { MyName: v1, MyPhone: v2 };
  obj.MyName();
  obj[\"My\" + \"Phone\"]();
}
main();
";

    fn graphs(src: &str, v: Variant) -> (CallGraph, DynamicCallGraph) {
        let natives = NativeConfig::default();
        let p = resolve_bindings(parse_program(src, "t").unwrap(), &natives.global_names()).unwrap();
        let x = execute(&p, &natives);
        (analyze(&p, &natives, v).cg, x.dcg)
    }

    #[test]
    fn phone_book_recall() {
        let (cg, dcg) = graphs(PHONE_BOOK, Variant::Optimistic);
        let edges = recall_precision(&cg, &dcg, Metric::ReachableEdges);
        assert_eq!((edges.recall_numerator, edges.recall_denominator), (2.0, 3.0));
        assert_eq!(edges.precision, 1.0);
        let sites = recall_precision(&cg, &dcg, Metric::CallSiteTargets);
        assert_eq!(sites.recall, 2.0 / 3.0);
        let nodes = recall_precision(&cg, &dcg, Metric::ReachableNodes);
        assert_eq!((nodes.recall_numerator, nodes.recall_denominator), (3.0, 4.0));
    }

    #[test]
    fn identical_graphs_are_perfect() {
        let (cg, dcg) = graphs("function a() {}\nfunction b() { a(); }\nb();", Variant::Optimistic);
        for r in all_metrics(&cg, &dcg) {
            assert_eq!((r.recall, r.precision), (1.0, 1.0), "{}", r.metric);
        }
    }

    #[test]
    fn empty_graphs_flag_their_denominators() {
        let r = recall_precision(&CallGraph::default(), &DynamicCallGraph::default(), Metric::CallSiteTargets);
        assert!(r.empty_recall && r.empty_precision);
        assert_eq!(r.recall, 1.0);
    }

    #[test]
    fn adding_a_true_edge_never_lowers_recall() {
        let (mut cg, dcg) = graphs(PHONE_BOOK, Variant::Optimistic);
        let before = all_metrics(&cg, &dcg);
        let missing = dcg.edges.iter().find(|e| !cg.contains(&e.site, &e.callee)).unwrap();
        cg.edges.insert((missing.site.clone(), missing.callee.clone()));
        for (a, b) in before.iter().zip(all_metrics(&cg, &dcg)) {
            assert!(b.recall >= a.recall);
        }
        assert!(all_metrics(&cg, &dcg).iter().all(|r| r.recall == 1.0));
    }

    #[test]
    fn equal_split() {
        use RootCauseLabel::*;
        let labels: BTreeMap<u32, BTreeSet<RootCauseLabel>> = [
            (1, [DynamicPropertyAccess, CallToGetterSetter].into()),
            (2, [DynamicPropertyAccess].into()),
        ]
        .into();
        let d = aggregate(&labels, &BTreeMap::new());
        assert_eq!(d.edges, 2);
        assert_eq!(d.coarse["DynamicPropertyAccess"], Share { count: 1.5, pct: 75.0 });
        assert_eq!(d.coarse["CallToGetterSetter"], Share { count: 0.5, pct: 25.0 });
        let total: f64 = d.coarse.values().map(|s| s.count).sum();
        assert_eq!(total, 2.0);
    }
}
