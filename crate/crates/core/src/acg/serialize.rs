use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{Caller, FuncRef, FunctionId, SourceLoc};
use crate::SchemaError;

use super::{CallGraph, FgNode, FlowGraph, Variant};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NodeRecord {
    id: String,
    kind: String,
    key: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct FlowGraphFile {
    schema_version: u32,
    kind: String,
    variant: Variant,
    nodes: Vec<NodeRecord>,
    edges: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SiteRecord {
    site: SourceLoc,
    owner: Caller,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EdgeRecord {
    site: SourceLoc,
    callee: FuncRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caller: Option<Caller>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CallGraphFile {
    schema_version: u32,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<Variant>,
    #[serde(default)]
    entrypoints: BTreeSet<Caller>,
    #[serde(default)]
    sites: Vec<SiteRecord>,
    edges: Vec<EdgeRecord>,
}

fn parse_node(kind: &str, key: &str) -> Result<FgNode, String> {
    let loc = |s: &str| s.parse::<SourceLoc>();
    let indexed = |s: &str| -> Result<(String, usize), String> {
        let (a, i) = s.rsplit_once('/').ok_or_else(|| format!("bad key `{s}`"))?;
        Ok((a.to_string(), i.parse().map_err(|_| format!("bad index in `{s}`"))?))
    };
    Ok(match kind {
        "Func" => FgNode::Func(FuncRef::parse(key)),
        "Var" => FgNode::Var(key.parse()?),
        "Prop" => FgNode::Prop(key.to_string()),
        "Param" => {
            let (f, i) = indexed(key)?;
            FgNode::Param(FunctionId(f), i)
        }
        "Ret" => FgNode::Ret(FunctionId(key.to_string())),
        "Callee" => FgNode::Callee(loc(key)?),
        "Res" => FgNode::Res(loc(key)?),
        "Recv" => FgNode::Recv(loc(key)?),
        "Arg" => {
            let (l, i) = indexed(key)?;
            FgNode::Arg(loc(&l)?, i)
        }
        "Unknown" => FgNode::Unknown,
        other => return Err(format!("unknown node kind `{other}`")),
    })
}

impl std::str::FromStr for FgNode {
    type Err = String;

    /// Parses the `Kind:key` form produced by [`FgNode::id`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, key) = s.split_once(':').ok_or_else(|| format!("bad node id `{s}`"))?;
        parse_node(kind, key)
    }
}

impl Serialize for FgNode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for FgNode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn check_header(file: &str, kind: &str, expected: &str, version: u32) -> Result<(), SchemaError> {
    if kind != expected {
        return Err(SchemaError::new(file, "kind", format!("expected `{expected}`, found `{kind}`")));
    }
    if version != GRAPH_SCHEMA_VERSION {
        return Err(SchemaError::new(
            file,
            "schemaVersion",
            format!("unsupported version {version}"),
        ));
    }
    Ok(())
}

impl FlowGraph {
    pub fn to_json(&self) -> String {
        let nodes: BTreeMap<String, &FgNode> = self.nodes().map(|n| (n.id(), n)).collect();
        let edges: BTreeSet<(String, String)> = self
            .edge_set()
            .into_iter()
            .map(|(a, b)| (a.id(), b.id()))
            .collect();
        let file = FlowGraphFile {
            schema_version: GRAPH_SCHEMA_VERSION,
            kind: "flow-graph".into(),
            variant: self.variant,
            nodes: nodes
                .into_iter()
                .map(|(id, n)| NodeRecord {
                    id,
                    kind: n.kind().into(),
                    key: n.key(),
                })
                .collect(),
            edges: edges.into_iter().collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }

    pub fn from_json(text: &str, file: &str) -> Result<FlowGraph, SchemaError> {
        let f: FlowGraphFile =
            serde_json::from_str(text).map_err(|e| SchemaError::new(file, "flow-graph", e.to_string()))?;
        check_header(file, &f.kind, "flow-graph", f.schema_version)?;
        let mut fg = FlowGraph::new(f.variant);
        let mut by_id = BTreeMap::new();
        for (i, n) in f.nodes.iter().enumerate() {
            let node = parse_node(&n.kind, &n.key)
                .map_err(|e| SchemaError::new(file, format!("nodes[{i}]"), e))?;
            if node.id() != n.id {
                return Err(SchemaError::new(
                    file,
                    format!("nodes[{i}].id"),
                    format!("id `{}` does not match kind and key", n.id),
                ));
            }
            fg.add_node(node.clone());
            by_id.insert(n.id.clone(), node);
        }
        for (i, (a, b)) in f.edges.iter().enumerate() {
            let (Some(a), Some(b)) = (by_id.get(a), by_id.get(b)) else {
                return Err(SchemaError::new(
                    file,
                    format!("edges[{i}]"),
                    "edge endpoint is not a declared node",
                ));
            };
            fg.add_edge(a.clone(), b.clone());
        }
        Ok(fg)
    }
}

impl CallGraph {
    pub fn to_json(&self, variant: Option<Variant>) -> String {
        let file = CallGraphFile {
            schema_version: GRAPH_SCHEMA_VERSION,
            kind: "call-graph".into(),
            variant,
            entrypoints: self.entrypoints.clone(),
            sites: self
                .site_owner
                .iter()
                .map(|(site, owner)| SiteRecord {
                    site: site.clone(),
                    owner: owner.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(site, callee)| EdgeRecord {
                    site: site.clone(),
                    callee: callee.clone(),
                    caller: self.site_owner.get(site).cloned(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }

    pub fn from_json(text: &str, file: &str) -> Result<CallGraph, SchemaError> {
        let f: CallGraphFile =
            serde_json::from_str(text).map_err(|e| SchemaError::new(file, "call-graph", e.to_string()))?;
        check_header(file, &f.kind, "call-graph", f.schema_version)?;
        let mut site_owner: BTreeMap<SourceLoc, Caller> =
            f.sites.into_iter().map(|s| (s.site, s.owner)).collect();
        let mut edges = BTreeSet::new();
        for e in f.edges {
            if let Some(c) = e.caller {
                site_owner.entry(e.site.clone()).or_insert(c);
            }
            edges.insert((e.site, e.callee));
        }
        let entrypoints = if f.entrypoints.is_empty() {
            [Caller::Toplevel].into()
        } else {
            f.entrypoints
        };
        Ok(CallGraph {
            edges,
            site_owner,
            entrypoints,
        })
    }
}
