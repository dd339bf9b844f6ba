use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{Caller, FuncRef, SourceLoc};
use crate::SchemaError;

pub const DCG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DcgEdge {
    pub caller: Caller,
    pub site: SourceLoc,
    pub callee: FuncRef,
}

/// Observed call edges, deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicCallGraph {
    pub edges: BTreeSet<DcgEdge>,
    pub entrypoints: BTreeSet<Caller>,
}

impl Default for DynamicCallGraph {
    fn default() -> Self {
        DynamicCallGraph {
            edges: BTreeSet::new(),
            entrypoints: [Caller::Toplevel].into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct DcgFile {
    schema_version: u32,
    kind: String,
    entrypoints: BTreeSet<Caller>,
    edges: Vec<DcgEdge>,
}

impl DynamicCallGraph {
    pub fn add(&mut self, caller: Caller, site: SourceLoc, callee: FuncRef) {
        self.edges.insert(DcgEdge {
            caller,
            site,
            callee,
        });
    }

    /// Distinct `(site, callee)` pairs.
    pub fn site_targets(&self) -> BTreeSet<(SourceLoc, FuncRef)> {
        self.edges
            .iter()
            .map(|e| (e.site.clone(), e.callee.clone()))
            .collect()
    }

    /// Callers and callees, with the entrypoints.
    pub fn nodes(&self) -> BTreeSet<Caller> {
        let mut out = self.entrypoints.clone();
        for e in &self.edges {
            out.insert(e.caller.clone());
            out.insert(Caller::Func(e.callee.clone()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let f = DcgFile {
            schema_version: DCG_SCHEMA_VERSION,
            kind: "dynamic-call-graph".into(),
            entrypoints: self.entrypoints.clone(),
            edges: self.edges.iter().cloned().collect(),
        };
        serde_json::to_string_pretty(&f).expect("serializable")
    }

    pub fn from_json(text: &str, file: &str) -> Result<Self, SchemaError> {
        let f: DcgFile =
            serde_json::from_str(text).map_err(|e| SchemaError::new(file, "dcg", e.to_string()))?;
        if f.kind != "dynamic-call-graph" {
            return Err(SchemaError::new(file, "kind", "expected `dynamic-call-graph`"));
        }
        if f.schema_version != DCG_SCHEMA_VERSION {
            return Err(SchemaError::new(
                file,
                "schemaVersion",
                format!("unsupported version {}", f.schema_version),
            ));
        }
        Ok(DynamicCallGraph {
            edges: f.edges.into_iter().collect(),
            entrypoints: f.entrypoints,
        })
    }
}
