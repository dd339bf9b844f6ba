use std::collections::BTreeSet;

use crate::ids::{Caller, FuncRef};

use super::{CallGraph, FgNode, FlowGraph, SiteKind, SiteTable, Variant};

/// Reads the call graph off the flow graph: `(s, f)` is an edge iff
/// `Func(f)` reaches `Callee(s)`.
pub fn extract_call_graph(fg: &FlowGraph, sites: &SiteTable) -> CallGraph {
    let mut edges = BTreeSet::new();
    let funcs: Vec<FgNode> = fg
        .nodes()
        .filter(|n| matches!(n, FgNode::Func(_)))
        .cloned()
        .collect();
    for f in funcs {
        let FgNode::Func(fref) = &f else { unreachable!() };
        for n in fg.reachable(&f).expect("node from graph") {
            if let FgNode::Callee(site) = n {
                edges.insert((site, fref.clone()));
            }
        }
    }
    CallGraph {
        edges,
        site_owner: sites.iter().map(|(s, c)| (s.clone(), c.owner.clone())).collect(),
        entrypoints: [Caller::Toplevel].into(),
    }
}

/// Pessimistic graphs are read off directly. Optimistic graphs grow
/// argument and return edges for every discovered user callee until
/// nothing changes.
pub fn solve_call_graph(mut fg: FlowGraph, sites: &SiteTable) -> (FlowGraph, CallGraph) {
    loop {
        let cg = extract_call_graph(&fg, sites);
        if fg.variant == Variant::Pessimistic {
            return (fg, cg);
        }
        let mut changed = false;
        for (site, callee) in &cg.edges {
            let FuncRef::User(fid) = callee else { continue };
            let Some(info) = sites.get(site) else { continue };
            let (shift, wire_args, wire_ret) = match info.kind {
                SiteKind::Normal => (0, true, true),
                SiteKind::ReflectiveCall => (1, true, true),
                SiteKind::ReflectiveApply => (0, false, true),
                SiteKind::Bind => (0, false, false),
                SiteKind::Callback => (1, true, false),
            };
            if wire_args {
                for i in shift..info.argc {
                    changed |= fg.add_edge_between_existing(
                        &FgNode::Arg(site.clone(), i),
                        &FgNode::Param(fid.clone(), i - shift),
                    );
                }
            }
            if wire_ret {
                changed |= fg
                    .add_edge_between_existing(&FgNode::Ret(fid.clone()), &FgNode::Res(site.clone()));
            }
        }
        if !changed {
            return (fg, cg);
        }
    }
}
