//! Field-based static flow graph and call graph, in optimistic and
//! pessimistic flavors.

mod build;
mod serialize;
mod solve;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::BoundProgram;
use crate::ids::{Caller, FuncRef, FunctionId, SourceLoc, VarSlot};
use crate::interp::NativeConfig;

pub use build::build_flow_graph;
pub use solve::{extract_call_graph, solve_call_graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Optimistic,
    Pessimistic,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Optimistic => "optimistic",
            Variant::Pessimistic => "pessimistic",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimistic" => Ok(Variant::Optimistic),
            "pessimistic" => Ok(Variant::Pessimistic),
            _ => Err(format!("unknown variant `{s}` (expected optimistic or pessimistic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FgNode {
    Func(FuncRef),
    /// Local, outer or global variable.
    Var(VarSlot),
    Prop(String),
    Param(FunctionId, usize),
    Ret(FunctionId),
    Callee(SourceLoc),
    Res(SourceLoc),
    Arg(SourceLoc, usize),
    /// Receiver of a reflective `call`/`apply` site.
    Recv(SourceLoc),
    Unknown,
}

impl FgNode {
    pub fn kind(&self) -> &'static str {
        match self {
            FgNode::Func(_) => "Func",
            FgNode::Var(_) => "Var",
            FgNode::Prop(_) => "Prop",
            FgNode::Param(..) => "Param",
            FgNode::Ret(_) => "Ret",
            FgNode::Callee(_) => "Callee",
            FgNode::Res(_) => "Res",
            FgNode::Arg(..) => "Arg",
            FgNode::Recv(_) => "Recv",
            FgNode::Unknown => "Unknown",
        }
    }

    pub fn key(&self) -> String {
        match self {
            FgNode::Func(f) => f.to_string(),
            FgNode::Var(s) => s.to_string(),
            FgNode::Prop(p) => p.clone(),
            FgNode::Param(f, i) => format!("{f}/{i}"),
            FgNode::Ret(f) => f.to_string(),
            FgNode::Callee(l) | FgNode::Res(l) | FgNode::Recv(l) => l.to_string(),
            FgNode::Arg(l, i) => format!("{l}/{i}"),
            FgNode::Unknown => String::new(),
        }
    }

    /// Stable serialized id: `Kind:key`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.kind(), self.key())
    }
}

impl fmt::Display for FgNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind(), self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AcgError {
    #[error("node {0} is not in the flow graph")]
    UnknownNode(String),
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub variant: Variant,
    nodes: Vec<FgNode>,
    index: HashMap<FgNode, usize>,
    succ: Vec<BTreeSet<usize>>,
}

impl PartialEq for FlowGraph {
    fn eq(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.node_set() == other.node_set()
            && self.edge_set() == other.edge_set()
    }
}

impl FlowGraph {
    pub fn new(variant: Variant) -> Self {
        FlowGraph {
            variant,
            nodes: Vec::new(),
            index: HashMap::new(),
            succ: Vec::new(),
        }
    }

    pub fn add_node(&mut self, n: FgNode) -> usize {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(n.clone());
        self.index.insert(n, i);
        self.succ.push(BTreeSet::new());
        i
    }

    /// Adds `a -> b`, creating either node if needed. Returns true when the
    /// edge is new.
    pub fn add_edge(&mut self, a: FgNode, b: FgNode) -> bool {
        let a = self.add_node(a);
        let b = self.add_node(b);
        self.succ[a].insert(b)
    }

    /// Adds `a -> b` only when both nodes already exist.
    pub fn add_edge_between_existing(&mut self, a: &FgNode, b: &FgNode) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&a), Some(&b)) => self.succ[a].insert(b),
            _ => false,
        }
    }

    pub fn contains(&self, n: &FgNode) -> bool {
        self.index.contains_key(n)
    }

    pub fn has_edge(&self, a: &FgNode, b: &FgNode) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&a), Some(&b)) => self.succ[a].contains(&b),
            _ => false,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &FgNode> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(BTreeSet::len).sum()
    }

    pub fn node_set(&self) -> BTreeSet<FgNode> {
        self.nodes.iter().cloned().collect()
    }

    pub fn edge_set(&self) -> BTreeSet<(FgNode, FgNode)> {
        let mut out = BTreeSet::new();
        for (a, succ) in self.succ.iter().enumerate() {
            for &b in succ {
                out.insert((self.nodes[a].clone(), self.nodes[b].clone()));
            }
        }
        out
    }

    fn reach_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            for &m in &self.succ[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Nodes reachable from `src`, including `src`.
    pub fn reachable(&self, src: &FgNode) -> Result<BTreeSet<FgNode>, AcgError> {
        let &start = self
            .index
            .get(src)
            .ok_or_else(|| AcgError::UnknownNode(src.id()))?;
        Ok(self
            .reach_from(start)
            .into_iter()
            .enumerate()
            .filter(|(_, r)| *r)
            .map(|(i, _)| self.nodes[i].clone())
            .collect())
    }

    pub fn has_path(&self, src: &FgNode, dst: &FgNode) -> bool {
        match (self.index.get(src), self.index.get(dst)) {
            (Some(&a), Some(&b)) => self.reach_from(a)[b],
            _ => false,
        }
    }
}

/// How the static model treats a call site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    Normal,
    /// `f.call(thisArg, ...)`: arguments shift by one.
    ReflectiveCall,
    /// `f.apply(thisArg, array)`: only the return value is wired.
    ReflectiveApply,
    /// `f.bind(...)`: not wired.
    Bind,
    /// A modeled native invoking its first argument with the rest.
    Callback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub kind: SiteKind,
    pub owner: Caller,
    pub argc: usize,
}

/// Every syntactic call site of a program.
pub type SiteTable = BTreeMap<SourceLoc, CallSite>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CallGraph {
    pub edges: BTreeSet<(SourceLoc, FuncRef)>,
    /// Enclosing function of each call site.
    pub site_owner: BTreeMap<SourceLoc, Caller>,
    pub entrypoints: BTreeSet<Caller>,
}

impl CallGraph {
    pub fn contains(&self, site: &SourceLoc, callee: &FuncRef) -> bool {
        self.edges.contains(&(site.clone(), callee.clone()))
    }

    pub fn targets(&self, site: &SourceLoc) -> BTreeSet<FuncRef> {
        self.edges
            .iter()
            .filter(|(s, _)| s == site)
            .map(|(_, f)| f.clone())
            .collect()
    }
}

/// Static analysis result for one program.
#[derive(Debug, Clone)]
pub struct StaticResult {
    pub fg: FlowGraph,
    pub cg: CallGraph,
    pub sites: SiteTable,
}

pub fn analyze(program: &BoundProgram, natives: &NativeConfig, variant: Variant) -> StaticResult {
    let (fg, sites) = build_flow_graph(program, natives, variant);
    let (fg, cg) = solve_call_graph(fg, &sites);
    StaticResult { fg, cg, sites }
}

#[cfg(test)]
mod tests;
