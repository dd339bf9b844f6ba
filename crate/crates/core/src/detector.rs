//! Matching dynamic copies against the static flow graph to find the
//! missing flows behind each missed call edge.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acg::{CallGraph, FgNode, FlowGraph};
use crate::copies::{CopyChainResult, CopyFinder, DynamicCopy, Incompleteness};
use crate::ids::{FuncRef, SourceLoc, VarSlot};
use crate::interp::{DynamicCallGraph, EntryKind, Flag, FlowTrace, TraceEntry};

/// A dynamic call edge the static call graph lacks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MissedEdge {
    pub site: SourceLoc,
    pub callee: FuncRef,
    /// First Invoke entry observing the edge.
    pub witness: usize,
}

impl MissedEdge {
    pub fn key(&self) -> (SourceLoc, FuncRef) {
        (self.site.clone(), self.callee.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnresolvedReason {
    UnmatchedRead,
    UnmatchedWrite,
    NativeOpaque,
    BoundFunction,
    MultiLevelNative,
    CyclicDependence,
}

impl From<Incompleteness> for UnresolvedReason {
    fn from(r: Incompleteness) -> Self {
        match r {
            Incompleteness::UnmatchedRead => UnresolvedReason::UnmatchedRead,
            Incompleteness::UnmatchedWrite => UnresolvedReason::UnmatchedWrite,
            Incompleteness::NativeOpaque => UnresolvedReason::NativeOpaque,
            Incompleteness::BoundFunction => UnresolvedReason::BoundFunction,
            Incompleteness::MultiLevelNative => UnresolvedReason::MultiLevelNative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase")]
pub enum MissingFlow {
    MissingFGNode {
        entry: usize,
    },
    MissingFGPath {
        src: FgNode,
        dst: FgNode,
        copy: DynamicCopy,
    },
    /// The copy's write is a call whose target the call graph lacks.
    DependentCall {
        write: usize,
        site: SourceLoc,
        callee: FuncRef,
    },
    /// The copy chain could not be fully reconstructed.
    Unresolved {
        reason: UnresolvedReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entry: Option<usize>,
    },
}

impl MissingFlow {
    pub fn is_dependent(&self) -> bool {
        matches!(self, MissingFlow::DependentCall { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectorError {
    #[error("no invoke in the trace witnesses the call edge {site} -> {callee}")]
    NoWitness { site: SourceLoc, callee: FuncRef },
}

/// DCG edges absent from `cg`, ordered by witnessing trace index. Native
/// callees count only when the flow graph models them.
pub fn missed_edges(
    dcg: &DynamicCallGraph,
    cg: &CallGraph,
    fg: &FlowGraph,
    trace: &FlowTrace,
) -> Result<Vec<MissedEdge>, DetectorError> {
    let wanted: BTreeSet<(SourceLoc, FuncRef)> = dcg
        .edges
        .iter()
        .map(|e| (e.site.clone(), e.callee.clone()))
        .filter(|(s, f)| !cg.contains(s, f))
        .filter(|(_, f)| !f.is_native() || fg.contains(&FgNode::Func(f.clone())))
        .collect();
    let mut witness: BTreeMap<(SourceLoc, FuncRef), usize> = BTreeMap::new();
    for (i, e) in trace.entries.iter().enumerate() {
        if let EntryKind::Invoke { callee, .. } = &e.kind {
            let key = (e.loc.clone(), callee.clone());
            if wanted.contains(&key) {
                witness.entry(key).or_insert(i);
            }
        }
    }
    let mut out = Vec::with_capacity(wanted.len());
    for (site, callee) in wanted {
        match witness.get(&(site.clone(), callee.clone())) {
            Some(&w) => out.push(MissedEdge {
                site,
                callee,
                witness: w,
            }),
            None => return Err(DetectorError::NoWitness { site, callee }),
        }
    }
    out.sort_by_key(|e| e.witness);
    Ok(out)
}

/// The flow graph node standing for the location a trace entry touches.
pub fn map_trace_entry_to_node(fg: &FlowGraph, entry: &TraceEntry) -> Option<FgNode> {
    if entry.has(Flag::EvalOrigin) {
        return None;
    }
    let node = match &entry.kind {
        EntryKind::Create { func } => FgNode::Func(func.clone()),
        EntryKind::VarRead { slot, .. } | EntryKind::VarWrite { slot, .. } => match slot {
            VarSlot::Param { func, index } => FgNode::Param(func.clone(), *index),
            VarSlot::Return { .. } => FgNode::Res(entry.loc.clone()),
            s => FgNode::Var(s.clone()),
        },
        EntryKind::PropRead { name, .. } | EntryKind::PropWrite { name, .. } => FgNode::Prop(name.clone()),
        EntryKind::Invoke { .. } => {
            if entry.has(Flag::Getter) || entry.has(Flag::Setter) || entry.has(Flag::NativeCallbackBoundary) {
                return None;
            }
            FgNode::Callee(entry.loc.clone())
        }
        EntryKind::Return { func, .. } => FgNode::Ret(func.user()?.clone()),
    };
    fg.contains(&node).then_some(node)
}

/// The call a copy's write performs, when the write is an Invoke passing
/// the value or a Return handing it back.
fn write_call(w: &TraceEntry) -> Option<(SourceLoc, FuncRef)> {
    match &w.kind {
        EntryKind::Invoke { callee, .. } => Some((w.loc.clone(), callee.clone())),
        EntryKind::Return { func, site } => Some((site.clone().unwrap_or_else(|| w.loc.clone()), func.clone())),
        _ => None,
    }
}

pub fn find_missing_flows(
    chain: &CopyChainResult,
    cg: &CallGraph,
    fg: &FlowGraph,
    trace: &FlowTrace,
) -> BTreeSet<MissingFlow> {
    let mut out = BTreeSet::new();
    for copy in &chain.chain {
        let src = map_trace_entry_to_node(fg, &trace.entries[copy.read]);
        let dst = map_trace_entry_to_node(fg, &trace.entries[copy.dest]);
        if src.is_none() {
            out.insert(MissingFlow::MissingFGNode { entry: copy.read });
        }
        if dst.is_none() {
            out.insert(MissingFlow::MissingFGNode { entry: copy.dest });
        }
        if let (Some(src), Some(dst)) = (src, dst) {
            if !fg.has_path(&src, &dst) {
                out.insert(MissingFlow::MissingFGPath { src, dst, copy: *copy });
            }
        }
        if !copy.invoke {
            if let Some((site, callee)) = write_call(&trace.entries[copy.write]) {
                if !cg.contains(&site, &callee) {
                    out.insert(MissingFlow::DependentCall {
                        write: copy.write,
                        site,
                        callee,
                    });
                }
            }
        }
    }
    if let Some(reason) = chain.reason {
        out.insert(MissingFlow::Unresolved {
            reason: reason.into(),
            entry: chain.gap,
        });
    }
    out
}

/// Copy chain and raw missing flows of one missed edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeFindings {
    pub edge: MissedEdge,
    pub chain: CopyChainResult,
    pub flows: BTreeSet<MissingFlow>,
}

/// Runs copy reconstruction and flow matching for every missed edge.
pub fn detect(
    trace: &FlowTrace,
    dcg: &DynamicCallGraph,
    cg: &CallGraph,
    fg: &FlowGraph,
) -> Result<Vec<EdgeFindings>, DetectorError> {
    let finder = CopyFinder::new(trace);
    missed_edges(dcg, cg, fg, trace)?
        .into_iter()
        .map(|edge| {
            let chain = finder
                .find_dynamic_copies(edge.witness)
                .expect("witness is an invoke");
            let flows = find_missing_flows(&chain, cg, fg, trace);
            Ok(EdgeFindings { edge, chain, flows })
        })
        .collect()
}

pub type EdgeKey = (SourceLoc, FuncRef);

/// Replaces every DependentCall by the flows attributed to the edge it
/// depends on. A path whose copy is written by such a missing call is
/// dropped along with it, since the call explains the gap. Edges left
/// with nothing are attributed `Unresolved(CyclicDependence)`.
pub fn resolve_dependent_calls(
    per_edge: &BTreeMap<EdgeKey, BTreeSet<MissingFlow>>,
) -> BTreeMap<EdgeKey, BTreeSet<MissingFlow>> {
    let mut base: BTreeMap<&EdgeKey, BTreeSet<MissingFlow>> = BTreeMap::new();
    let mut deps: BTreeMap<&EdgeKey, BTreeSet<EdgeKey>> = BTreeMap::new();
    for (key, flows) in per_edge {
        let dep_writes: BTreeSet<usize> = flows
            .iter()
            .filter_map(|f| match f {
                MissingFlow::DependentCall { write, .. } => Some(*write),
                _ => None,
            })
            .collect();
        let own = flows
            .iter()
            .filter(|f| match f {
                MissingFlow::DependentCall { .. } => false,
                MissingFlow::MissingFGPath { copy, .. } => !dep_writes.contains(&copy.write),
                _ => true,
            })
            .cloned()
            .collect();
        let d = flows
            .iter()
            .filter_map(|f| match f {
                MissingFlow::DependentCall { site, callee, .. } => Some((site.clone(), callee.clone())),
                _ => None,
            })
            .filter(|k| per_edge.contains_key(k))
            .collect();
        base.insert(key, own);
        deps.insert(key, d);
    }
    let mut attributed = base.clone();
    loop {
        let mut changed = false;
        for (key, ds) in &deps {
            for d in ds {
                if d == *key {
                    continue;
                }
                let extra: Vec<MissingFlow> = attributed[d]
                    .difference(&attributed[key])
                    .cloned()
                    .collect();
                if !extra.is_empty() {
                    attributed.get_mut(key).expect("edge").extend(extra);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    attributed
        .into_iter()
        .map(|(k, mut flows)| {
            if flows.is_empty() {
                flows.insert(MissingFlow::Unresolved {
                    reason: UnresolvedReason::CyclicDependence,
                    entry: None,
                });
            }
            (k.clone(), flows)
        })
        .collect()
}
