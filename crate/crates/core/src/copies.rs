//! Backward reconstruction of the dynamic copies that carried a function
//! value from its creation to an invocation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{FuncRef, VarSlot};
use crate::interp::{EntryKind, Flag, FlowTrace, FuncValueId, TraceEntry};

/// `read --write--> dest`. For the final, invoke-labeled copy `write` and
/// `dest` are both the Invoke entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DynamicCopy {
    pub read: usize,
    pub write: usize,
    pub dest: usize,
    #[serde(default)]
    pub invoke: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Incompleteness {
    UnmatchedRead,
    UnmatchedWrite,
    NativeOpaque,
    BoundFunction,
    MultiLevelNative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CopyChainResult {
    pub invoke: usize,
    pub chain: Vec<DynamicCopy>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<Incompleteness>,
    /// Entry at which reconstruction stopped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CopiesError {
    #[error("trace entry {0} is not an invoke")]
    NotAnInvoke(usize),
}

/// Per-value index over a trace. An entry is listed under its own value
/// and under every function value it passes as an argument.
pub struct CopyFinder<'t> {
    trace: &'t FlowTrace,
    by_value: HashMap<FuncValueId, Vec<usize>>,
}

impl<'t> CopyFinder<'t> {
    pub fn new(trace: &'t FlowTrace) -> Self {
        let mut by_value: HashMap<FuncValueId, Vec<usize>> = HashMap::new();
        for (i, e) in trace.entries.iter().enumerate() {
            by_value.entry(e.func_value).or_default().push(i);
            if let EntryKind::Invoke { args, .. } = &e.kind {
                for a in args.iter().flatten() {
                    if *a != e.func_value {
                        by_value.entry(*a).or_default().push(i);
                    }
                }
            }
        }
        for list in by_value.values_mut() {
            list.dedup();
        }
        CopyFinder { trace, by_value }
    }

    pub fn trace(&self) -> &'t FlowTrace {
        self.trace
    }

    /// Entries mentioning `v` strictly before `from`, closest first.
    fn before(&self, v: FuncValueId, from: usize) -> impl Iterator<Item = (usize, &'t TraceEntry)> + '_ {
        let list = self.by_value.get(&v).map(Vec::as_slice).unwrap_or(&[]);
        let end = list.partition_point(|&i| i < from);
        list[..end]
            .iter()
            .rev()
            .map(move |&i| (i, &self.trace.entries[i]))
    }

    pub fn preceding_read_or_create(&self, from: usize, v: FuncValueId) -> Option<usize> {
        self.before(v, from)
            .find(|(_, e)| e.func_value == v && e.is_read_or_create())
            .map(|(i, _)| i)
    }

    pub fn matching_write(&self, read: usize, v: FuncValueId) -> Option<usize> {
        let r = self.trace.get(read)?;
        match &r.kind {
            EntryKind::VarRead {
                slot: VarSlot::Param { func, index },
                ..
            } => {
                let callee = FuncRef::User(func.clone());
                self.before(v, read)
                    .find(|(i, e)| match &e.kind {
                        EntryKind::Invoke { callee: c, args, .. } => {
                            *c == callee && args.get(*index).copied().flatten() == Some(v)
                        }
                        EntryKind::VarWrite { slot, .. } => {
                            e.func_value == v && *slot == r_slot(r) && !self.is_binding_write(*i)
                        }
                        _ => false,
                    })
                    .map(|(i, _)| i)
            }
            EntryKind::VarRead {
                slot: VarSlot::Return { func },
                ..
            } => self
                .before(v, read)
                .find(|(_, e)| {
                    e.func_value == v && matches!(&e.kind, EntryKind::Return { func: f, .. } if f == func)
                })
                .map(|(i, _)| i),
            EntryKind::VarRead { slot, .. } => self
                .before(v, read)
                .find(|(_, e)| {
                    e.func_value == v && matches!(&e.kind, EntryKind::VarWrite { slot: s, .. } if s == slot)
                })
                .map(|(i, _)| i),
            EntryKind::PropRead { name, .. } => self
                .before(v, read)
                .find(|(_, e)| {
                    e.func_value == v && matches!(&e.kind, EntryKind::PropWrite { name: n, .. } if n == name)
                })
                .map(|(i, _)| i),
            _ => None,
        }
    }

    /// True for the formal writes emitted right before the Invoke that
    /// binds them.
    fn is_binding_write(&self, i: usize) -> bool {
        let e = &self.trace.entries[i];
        let EntryKind::VarWrite {
            slot: VarSlot::Param { func, .. },
            ..
        } = &e.kind
        else {
            return false;
        };
        for next in &self.trace.entries[i + 1..] {
            if next.loc != e.loc {
                return false;
            }
            match &next.kind {
                EntryKind::VarWrite {
                    slot: VarSlot::Param { func: g, .. },
                    ..
                } if g == func => continue,
                EntryKind::Invoke {
                    callee: FuncRef::User(g),
                    ..
                } => return g == func,
                _ => return false,
            }
        }
        false
    }

    pub fn find_dynamic_copies(&self, invoke: usize) -> Result<CopyChainResult, CopiesError> {
        let t_c = match self.trace.get(invoke) {
            Some(e) if e.is_invoke() => e,
            _ => return Err(CopiesError::NotAnInvoke(invoke)),
        };
        let incomplete = |chain: Vec<DynamicCopy>, reason, gap| CopyChainResult {
            invoke,
            chain,
            complete: false,
            reason: Some(reason),
            gap: Some(gap),
        };
        if t_c.has(Flag::BoundCall) {
            return Ok(incomplete(Vec::new(), Incompleteness::BoundFunction, invoke));
        }
        if t_c.has(Flag::MultiLevelNative) {
            return Ok(incomplete(Vec::new(), Incompleteness::MultiLevelNative, invoke));
        }
        let f = t_c.func_value;
        let Some(mut t_r) = self.preceding_read_or_create(invoke, f) else {
            return Ok(incomplete(Vec::new(), Incompleteness::UnmatchedRead, invoke));
        };
        let mut rev = vec![DynamicCopy {
            read: t_r,
            write: invoke,
            dest: invoke,
            invoke: true,
        }];
        while !self.trace.entries[t_r].is_create() {
            let Some(t_w) = self.matching_write(t_r, f) else {
                rev.reverse();
                return Ok(incomplete(rev, self.write_gap_reason(t_r), t_r));
            };
            let Some(t_r2) = self.preceding_read_or_create(t_w, f) else {
                rev.reverse();
                return Ok(incomplete(rev, Incompleteness::UnmatchedRead, t_w));
            };
            rev.push(DynamicCopy {
                read: t_r2,
                write: t_w,
                dest: t_r,
                invoke: false,
            });
            t_r = t_r2;
        }
        rev.reverse();
        Ok(CopyChainResult {
            invoke,
            chain: rev,
            complete: true,
            reason: None,
            gap: None,
        })
    }

    /// Why no write matches `read`: the location was filled by a native
    /// the trace cannot see into, or the trace simply lacks the write.
    fn write_gap_reason(&self, read: usize) -> Incompleteness {
        let r = &self.trace.entries[read];
        match &r.kind {
            EntryKind::VarRead {
                slot: VarSlot::Return { func: FuncRef::Native(_) },
                ..
            } => Incompleteness::NativeOpaque,
            EntryKind::VarRead {
                slot: VarSlot::Param { func, .. },
                ..
            } => {
                let callee = FuncRef::User(func.clone());
                let last = self.trace.entries[..read].iter().rev().find(
                    |e| matches!(&e.kind, EntryKind::Invoke { callee: c, .. } if *c == callee),
                );
                match last {
                    Some(e) if e.has(Flag::NativeCallbackBoundary) => Incompleteness::NativeOpaque,
                    _ => Incompleteness::UnmatchedWrite,
                }
            }
            _ => Incompleteness::UnmatchedWrite,
        }
    }
}

fn r_slot(e: &TraceEntry) -> VarSlot {
    match &e.kind {
        EntryKind::VarRead { slot, .. } => slot.clone(),
        _ => unreachable!("formal reads are variable reads"),
    }
}

pub fn preceding_read_or_create(trace: &FlowTrace, from: usize, v: FuncValueId) -> Option<usize> {
    CopyFinder::new(trace).preceding_read_or_create(from, v)
}

pub fn matching_write(trace: &FlowTrace, read: usize, v: FuncValueId) -> Option<usize> {
    CopyFinder::new(trace).matching_write(read, v)
}

pub fn find_dynamic_copies(trace: &FlowTrace, invoke: usize) -> Result<CopyChainResult, CopiesError> {
    CopyFinder::new(trace).find_dynamic_copies(invoke)
}
