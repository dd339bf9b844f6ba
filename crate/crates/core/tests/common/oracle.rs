//! Naive backward search over a flow trace, used to check the indexed
//! copy finder, plus a generator of synthetic traces.

use std::collections::{BTreeMap, BTreeSet};

use cgrl::copies::DynamicCopy;
use cgrl::ids::{FuncRef, FunctionId, SourceLoc, VarSlot};
use cgrl::interp::{EntryKind, Flag, FlowTrace, FuncValueId, TraceEntry};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, PartialEq, Eq)]
pub struct OracleChain {
    pub chain: Vec<DynamicCopy>,
    pub complete: bool,
    pub gap: Option<usize>,
}

fn read_or_create_before(t: &FlowTrace, end: usize, v: FuncValueId) -> Option<usize> {
    (0..end).rev().find(|&j| {
        let e = &t.entries[j];
        e.func_value == v
            && matches!(
                e.kind,
                EntryKind::Create { .. } | EntryKind::VarRead { .. } | EntryKind::PropRead { .. }
            )
    })
}

/// A formal write followed, at the same location, only by further formal
/// writes of the same function and then the Invoke of that function.
fn binding(t: &FlowTrace, j: usize, func: &FunctionId) -> bool {
    let loc = &t.entries[j].loc;
    let mut k = j + 1;
    while k < t.entries.len() && t.entries[k].loc == *loc {
        match &t.entries[k].kind {
            EntryKind::VarWrite {
                slot: VarSlot::Param { func: g, .. },
                ..
            } if g == func => k += 1,
            EntryKind::Invoke {
                callee: FuncRef::User(g),
                ..
            } => return g == func,
            _ => return false,
        }
    }
    false
}

fn write_before(t: &FlowTrace, read: usize, v: FuncValueId) -> Option<usize> {
    let r = &t.entries[read];
    (0..read).rev().find(|&j| {
        let e = &t.entries[j];
        match (&r.kind, &e.kind) {
            (
                EntryKind::VarRead {
                    slot: VarSlot::Param { func, index },
                    ..
                },
                EntryKind::Invoke { callee, args, .. },
            ) => *callee == FuncRef::User(func.clone()) && args.get(*index) == Some(&Some(v)),
            (
                EntryKind::VarRead {
                    slot: slot @ VarSlot::Param { func, .. },
                    ..
                },
                EntryKind::VarWrite { slot: s, .. },
            ) => e.func_value == v && s == slot && !binding(t, j, func),
            (EntryKind::VarRead { slot: VarSlot::Param { .. }, .. }, _) => false,
            (
                EntryKind::VarRead {
                    slot: VarSlot::Return { func },
                    ..
                },
                EntryKind::Return { func: f, .. },
            ) => e.func_value == v && f == func,
            (EntryKind::VarRead { slot: VarSlot::Return { .. }, .. }, _) => false,
            (EntryKind::VarRead { slot, .. }, EntryKind::VarWrite { slot: s, .. }) => {
                e.func_value == v && s == slot
            }
            (EntryKind::PropRead { name, .. }, EntryKind::PropWrite { name: n, .. }) => {
                e.func_value == v && n == name
            }
            _ => false,
        }
    })
}

pub fn chain(t: &FlowTrace, invoke: usize) -> OracleChain {
    let c = &t.entries[invoke];
    let stop = |mut chain: Vec<DynamicCopy>, gap| {
        chain.reverse();
        OracleChain {
            chain,
            complete: false,
            gap: Some(gap),
        }
    };
    if c.has(Flag::BoundCall) || c.has(Flag::MultiLevelNative) {
        return stop(Vec::new(), invoke);
    }
    let v = c.func_value;
    let Some(mut r) = read_or_create_before(t, invoke, v) else {
        return stop(Vec::new(), invoke);
    };
    let mut rev = vec![DynamicCopy {
        read: r,
        write: invoke,
        dest: invoke,
        invoke: true,
    }];
    while !matches!(t.entries[r].kind, EntryKind::Create { .. }) {
        let Some(w) = write_before(t, r, v) else {
            return stop(rev, r);
        };
        let Some(r2) = read_or_create_before(t, w, v) else {
            return stop(rev, w);
        };
        rev.push(DynamicCopy {
            read: r2,
            write: w,
            dest: r,
            invoke: false,
        });
        r = r2;
    }
    rev.reverse();
    OracleChain {
        chain: rev,
        complete: true,
        gap: None,
    }
}

/// A structurally valid trace over a handful of values, slots, properties
/// and two user functions. Adjacent entries often share a location so
/// that formal-binding sequences occur.
pub fn random_trace(seed: u64, max_len: usize) -> FlowTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..=max_len);
    let funcs = [FunctionId("a@1:0".into()), FunctionId("b@2:0".into())];
    let slot = |rng: &mut ChaCha8Rng| -> VarSlot {
        match rng.gen_range(0..4) {
            0 => VarSlot::Global {
                name: ["x", "y"][rng.gen_range(0..2)].into(),
            },
            1 => VarSlot::Param {
                func: funcs[rng.gen_range(0..2)].clone(),
                index: rng.gen_range(0..2),
            },
            2 => VarSlot::Return {
                func: FuncRef::User(funcs[rng.gen_range(0..2)].clone()),
            },
            _ => VarSlot::Global { name: "z".into() },
        }
    };
    let mut entries = Vec::with_capacity(len);
    let mut line = 1;
    for index in 0..len {
        if rng.gen_bool(0.6) {
            line = rng.gen_range(1..=6);
        }
        let v: FuncValueId = rng.gen_range(1..=3);
        let mut flags = BTreeSet::new();
        let kind = match rng.gen_range(0..8) {
            0 => EntryKind::Create {
                func: FuncRef::User(funcs[(v % 2) as usize].clone()),
            },
            1 | 2 => EntryKind::VarRead {
                name: "n".into(),
                slot: slot(&mut rng),
            },
            3 => EntryKind::VarWrite {
                name: "n".into(),
                slot: slot(&mut rng),
            },
            4 => EntryKind::PropRead {
                name: ["p", "q"][rng.gen_range(0..2)].into(),
                dynamic: rng.gen_bool(0.3),
            },
            5 => EntryKind::PropWrite {
                name: ["p", "q"][rng.gen_range(0..2)].into(),
                dynamic: rng.gen_bool(0.3),
            },
            6 => {
                match rng.gen_range(0..10) {
                    0 => {
                        flags.insert(Flag::BoundCall);
                    }
                    1 => {
                        flags.insert(Flag::MultiLevelNative);
                    }
                    _ => {}
                }
                EntryKind::Invoke {
                    callee: FuncRef::User(funcs[rng.gen_range(0..2)].clone()),
                    args: (0..rng.gen_range(0..3))
                        .map(|_| rng.gen_bool(0.7).then(|| rng.gen_range(1..=3)))
                        .collect(),
                    via: None,
                }
            }
            _ => EntryKind::Return {
                func: FuncRef::User(funcs[rng.gen_range(0..2)].clone()),
                site: None,
            },
        };
        entries.push(TraceEntry {
            index,
            kind,
            func_value: v,
            loc: SourceLoc {
                unit: "gen".into(),
                line,
                col: 0,
                eval_depth: 0,
            },
            flags,
            base_id: None,
        });
    }
    FlowTrace {
        entries,
        origins: BTreeMap::new(),
        eval_units: BTreeMap::new(),
    }
}
