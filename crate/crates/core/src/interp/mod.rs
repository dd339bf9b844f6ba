//! MiniJS interpreter producing the dynamic call graph and the flow trace
//! of function values.

mod dcg;
mod machine;
mod natives;
mod trace;
mod value;

pub use dcg::{DcgEdge, DynamicCallGraph, DCG_SCHEMA_VERSION};
pub use machine::{execute, execute_with, ExecOptions, Execution, InterpError};
pub use natives::{Behavior, NativeConfig, NativeSpec, ELEMENT_PROP, NATIVES_SCHEMA_VERSION};
pub use trace::{
    EntryKind, EvalChannel, EvalUnit, Flag, FlowTrace, FuncOrigin, FuncValueId, TraceEntry,
    TRACE_SCHEMA_VERSION,
};
