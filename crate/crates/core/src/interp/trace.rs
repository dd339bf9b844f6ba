use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ids::{FuncRef, FunctionId, SourceLoc, VarSlot};
use crate::SchemaError;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Runtime identity of a function value.
pub type FuncValueId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Flag {
    Getter,
    Setter,
    Synthetic,
    EvalOrigin,
    NativeCallbackBoundary,
    /// Invoke of a bound function's target.
    BoundCall,
    /// Native callback reached through more than one native frame.
    MultiLevelNative,
}

/// One event on a function value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EntryKind {
    Create {
        func: FuncRef,
    },
    /// Read of a variable; parameter slots are formal reads and return
    /// slots are the call-site read of a returned value.
    VarRead {
        name: String,
        slot: VarSlot,
    },
    VarWrite {
        name: String,
        slot: VarSlot,
    },
    PropRead {
        name: String,
        #[serde(default)]
        dynamic: bool,
    },
    PropWrite {
        name: String,
        #[serde(default)]
        dynamic: bool,
    },
    /// `args[i]` is the function value passed at formal position `i`, if
    /// any. `via` names the native that performed the call.
    Invoke {
        callee: FuncRef,
        #[serde(default)]
        args: Vec<Option<FuncValueId>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via: Option<String>,
    },
    /// Write of `func`'s return pseudo-variable. `site` is the call site
    /// whose invocation is returning.
    Return {
        func: FuncRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site: Option<SourceLoc>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    pub index: usize,
    pub kind: EntryKind,
    pub func_value: FuncValueId,
    pub loc: SourceLoc,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
    /// Reserved for analyses that distinguish base objects; never filled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_id: Option<u64>,
}

impl TraceEntry {
    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn is_create(&self) -> bool {
        matches!(self.kind, EntryKind::Create { .. })
    }

    pub fn is_invoke(&self) -> bool {
        matches!(self.kind, EntryKind::Invoke { .. })
    }

    /// Create or any read (variable, formal, return value, property).
    pub fn is_read_or_create(&self) -> bool {
        matches!(
            self.kind,
            EntryKind::Create { .. } | EntryKind::VarRead { .. } | EntryKind::PropRead { .. }
        )
    }

    pub fn is_dynamic_prop(&self) -> bool {
        matches!(
            self.kind,
            EntryKind::PropRead { dynamic: true, .. } | EntryKind::PropWrite { dynamic: true, .. }
        )
    }
}

/// Where a function value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum FuncOrigin {
    User { id: FunctionId, unit: String },
    Native { name: String },
    Bound { target: FuncValueId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EvalChannel {
    /// `evalCode(string)`
    EvalCode,
    /// `makeFunction(params, body)`
    MakeFunction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalUnit {
    pub channel: EvalChannel,
    pub depth: u32,
    pub parent: String,
}

/// The ordered log of function-value events of one execution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTrace {
    pub entries: Vec<TraceEntry>,
    pub origins: BTreeMap<FuncValueId, FuncOrigin>,
    pub eval_units: BTreeMap<String, EvalUnit>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TraceHeader {
    schema_version: u32,
    format: String,
    origins: BTreeMap<FuncValueId, FuncOrigin>,
    eval_units: BTreeMap<String, EvalUnit>,
}

const TRACE_FORMAT: &str = "cgrl-flow-trace";

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&TraceEntry> {
        self.entries.get(index)
    }

    /// The eval channel of the innermost dynamically evaluated unit that
    /// `loc` belongs to.
    pub fn eval_channel(&self, loc: &SourceLoc) -> Option<EvalChannel> {
        self.eval_units.get(&loc.unit).map(|u| u.channel)
    }

    /// True when the value was produced by `makeFunction`.
    pub fn created_by_make_function(&self, value: FuncValueId) -> bool {
        match self.origins.get(&value) {
            Some(FuncOrigin::User { unit, .. }) => {
                self.eval_units.get(unit).map(|u| u.channel) == Some(EvalChannel::MakeFunction)
            }
            _ => false,
        }
    }

    pub fn is_native_value(&self, value: FuncValueId) -> bool {
        matches!(self.origins.get(&value), Some(FuncOrigin::Native { .. }))
    }

    /// Writes the trace as JSON Lines: a header line, then one entry per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            format: TRACE_FORMAT.to_string(),
            origins: self.origins.clone(),
            eval_units: self.eval_units.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R, file: &str) -> Result<FlowTrace, SchemaError> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| SchemaError::new(file, "header", "empty trace file"))?
            .map_err(|e| SchemaError::new(file, "header", e.to_string()))?;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| SchemaError::new(file, "header", e.to_string()))?;
        if header.format != TRACE_FORMAT {
            return Err(SchemaError::new(file, "format", format!("expected `{TRACE_FORMAT}`")));
        }
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(SchemaError::new(
                file,
                "schemaVersion",
                format!("unsupported version {}", header.schema_version),
            ));
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| SchemaError::new(file, "entry", e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TraceEntry = serde_json::from_str(&line)
                .map_err(|e| SchemaError::new(file, format!("line {}", n + 2), e.to_string()))?;
            if entry.index != entries.len() {
                return Err(SchemaError::new(
                    file,
                    format!("line {}: index", n + 2),
                    format!("expected dense index {}, found {}", entries.len(), entry.index),
                ));
            }
            entries.push(entry);
        }
        Ok(FlowTrace {
            entries,
            origins: header.origins,
            eval_units: header.eval_units,
        })
    }
}
