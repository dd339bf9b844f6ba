//! Root-cause labels for missing flows.

mod classify;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::{MissingFlow, UnresolvedReason};
use crate::ids::{FuncRef, VarSlot};
use crate::interp::{EntryKind, EvalChannel, Flag, FlowTrace, TraceEntry};

pub use classify::{classify_property_name, dynamic_access_locs, LabelError, PropertyNameCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RootCauseLabel {
    DynamicPropertyAccess,
    ParameterPass,
    FunctionReturn,
    CallToUnmodelledNative,
    CallsFromUnmodelledNative,
    CreationViaFunctionConstructor,
    CallToGetterSetter,
    UseOfEval,
    EvalViaNewFunction,
    CallToBoundedFunction,
    MultipleLevelsOfNative,
    /// The language subset has no `with`; never produced.
    UseOfWith,
    Others,
}

impl RootCauseLabel {
    pub const ALL: [RootCauseLabel; 13] = [
        RootCauseLabel::DynamicPropertyAccess,
        RootCauseLabel::ParameterPass,
        RootCauseLabel::FunctionReturn,
        RootCauseLabel::CallToUnmodelledNative,
        RootCauseLabel::CallsFromUnmodelledNative,
        RootCauseLabel::CreationViaFunctionConstructor,
        RootCauseLabel::CallToGetterSetter,
        RootCauseLabel::UseOfEval,
        RootCauseLabel::EvalViaNewFunction,
        RootCauseLabel::CallToBoundedFunction,
        RootCauseLabel::MultipleLevelsOfNative,
        RootCauseLabel::UseOfWith,
        RootCauseLabel::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RootCauseLabel::DynamicPropertyAccess => "DynamicPropertyAccess",
            RootCauseLabel::ParameterPass => "ParameterPass",
            RootCauseLabel::FunctionReturn => "FunctionReturn",
            RootCauseLabel::CallToUnmodelledNative => "CallToUnmodelledNative",
            RootCauseLabel::CallsFromUnmodelledNative => "CallsFromUnmodelledNative",
            RootCauseLabel::CreationViaFunctionConstructor => "CreationViaFunctionConstructor",
            RootCauseLabel::CallToGetterSetter => "CallToGetterSetter",
            RootCauseLabel::UseOfEval => "UseOfEval",
            RootCauseLabel::EvalViaNewFunction => "EvalViaNewFunction",
            RootCauseLabel::CallToBoundedFunction => "CallToBoundedFunction",
            RootCauseLabel::MultipleLevelsOfNative => "MultipleLevelsOfNative",
            RootCauseLabel::UseOfWith => "UseOfWith",
            RootCauseLabel::Others => "Others",
        }
    }
}

impl fmt::Display for RootCauseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trace entries a flow talks about.
pub fn involved_entries(flow: &MissingFlow) -> Vec<usize> {
    match flow {
        MissingFlow::MissingFGNode { entry } => vec![*entry],
        MissingFlow::MissingFGPath { copy, .. } => vec![copy.read, copy.write, copy.dest],
        MissingFlow::DependentCall { write, .. } => vec![*write],
        MissingFlow::Unresolved { entry, .. } => entry.iter().copied().collect(),
    }
}

fn eval_label(trace: &FlowTrace, entries: &[&TraceEntry]) -> Option<RootCauseLabel> {
    if !entries.iter().any(|e| e.has(Flag::EvalOrigin)) {
        return None;
    }
    let via_make_function = entries.iter().any(|e| {
        (e.has(Flag::EvalOrigin) && trace.eval_channel(&e.loc) == Some(EvalChannel::MakeFunction))
            || trace.created_by_make_function(e.func_value)
    });
    Some(if via_make_function {
        RootCauseLabel::EvalViaNewFunction
    } else {
        RootCauseLabel::UseOfEval
    })
}

fn node_label(trace: &FlowTrace, e: &TraceEntry) -> RootCauseLabel {
    match &e.kind {
        EntryKind::Create { func } => {
            if func.is_native() || trace.is_native_value(e.func_value) {
                RootCauseLabel::CallToUnmodelledNative
            } else if trace.created_by_make_function(e.func_value) {
                RootCauseLabel::CreationViaFunctionConstructor
            } else {
                RootCauseLabel::Others
            }
        }
        EntryKind::Invoke { .. } if e.has(Flag::Getter) || e.has(Flag::Setter) => {
            RootCauseLabel::CallToGetterSetter
        }
        EntryKind::Invoke { .. } if e.has(Flag::NativeCallbackBoundary) => {
            RootCauseLabel::CallsFromUnmodelledNative
        }
        EntryKind::PropRead { dynamic: true, .. } | EntryKind::PropWrite { dynamic: true, .. } => {
            RootCauseLabel::DynamicPropertyAccess
        }
        _ => RootCauseLabel::Others,
    }
}

fn unresolved_label(trace: &FlowTrace, reason: UnresolvedReason, entry: Option<usize>) -> RootCauseLabel {
    match reason {
        UnresolvedReason::BoundFunction => RootCauseLabel::CallToBoundedFunction,
        UnresolvedReason::MultiLevelNative => RootCauseLabel::MultipleLevelsOfNative,
        UnresolvedReason::NativeOpaque => {
            let at_formal = entry.and_then(|i| trace.get(i)).is_some_and(|e| {
                matches!(&e.kind, EntryKind::VarRead { slot: VarSlot::Param { .. }, .. })
            });
            if at_formal {
                RootCauseLabel::CallsFromUnmodelledNative
            } else {
                RootCauseLabel::CallToUnmodelledNative
            }
        }
        _ => RootCauseLabel::Others,
    }
}

/// Labels one attributed flow. Eval involvement decides first, then the
/// kind of missing node, the kind of copy behind a missing path, and the
/// reason a chain stayed incomplete.
pub fn label_flow(flow: &MissingFlow, trace: &FlowTrace) -> RootCauseLabel {
    let entries: Vec<&TraceEntry> = involved_entries(flow)
        .into_iter()
        .filter_map(|i| trace.get(i))
        .collect();
    if let Some(l) = eval_label(trace, &entries) {
        return l;
    }
    match flow {
        MissingFlow::MissingFGNode { .. } => entries
            .first()
            .map_or(RootCauseLabel::Others, |e| node_label(trace, e)),
        MissingFlow::MissingFGPath { copy, .. } => {
            let dynamic = [copy.read, copy.write, copy.dest]
                .iter()
                .filter_map(|&i| trace.get(i))
                .any(TraceEntry::is_dynamic_prop);
            if dynamic {
                return RootCauseLabel::DynamicPropertyAccess;
            }
            if copy.invoke {
                return RootCauseLabel::Others;
            }
            match trace.get(copy.write).map(|w| &w.kind) {
                Some(EntryKind::Invoke { .. }) => RootCauseLabel::ParameterPass,
                Some(EntryKind::Return { func: FuncRef::User(_), .. }) => RootCauseLabel::FunctionReturn,
                Some(EntryKind::Return { .. }) => RootCauseLabel::CallToUnmodelledNative,
                _ => RootCauseLabel::Others,
            }
        }
        MissingFlow::Unresolved { reason, entry } => unresolved_label(trace, *reason, *entry),
        MissingFlow::DependentCall { .. } => RootCauseLabel::Others,
    }
}

/// Location of the dynamic property access behind a flow labeled
/// [`RootCauseLabel::DynamicPropertyAccess`].
pub fn dynamic_access_entry<'t>(flow: &MissingFlow, trace: &'t FlowTrace) -> Option<&'t TraceEntry> {
    involved_entries(flow)
        .into_iter()
        .filter_map(|i| trace.get(i))
        .find(|e| e.is_dynamic_prop())
}
