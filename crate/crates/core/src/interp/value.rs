use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::frontend::{number_text, Program};
use crate::ids::{FuncRef, ScopeId, VarSlot};

use super::trace::FuncValueId;

#[derive(Debug, Clone)]
pub enum Value {
    Undefined,
    Null,
    Bool(bool),
    Num(f64),
    Str(Rc<str>),
    Object(Rc<RefCell<Object>>),
    Func(Rc<FuncValue>),
}

impl Value {
    pub fn truthy(&self) -> bool {
        match self {
            Value::Undefined | Value::Null => false,
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0 && !n.is_nan(),
            Value::Str(s) => !s.is_empty(),
            Value::Object(_) | Value::Func(_) => true,
        }
    }

    pub fn as_func(&self) -> Option<&Rc<FuncValue>> {
        match self {
            Value::Func(f) => Some(f),
            _ => None,
        }
    }

    pub fn func_id(&self) -> Option<FuncValueId> {
        self.as_func().map(|f| f.id)
    }

    pub fn to_text(&self) -> String {
        match self {
            Value::Undefined => "undefined".into(),
            Value::Null => "null".into(),
            Value::Bool(b) => b.to_string(),
            Value::Num(n) => number_text(*n),
            Value::Str(s) => s.to_string(),
            Value::Object(o) if o.borrow().is_array => {
                let o = o.borrow();
                (0..o.array_len())
                    .map(|i| match o.get(&i.to_string()) {
                        Some(PropSlot::Data(v)) => v.to_text(),
                        _ => String::new(),
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            }
            Value::Object(_) => "[object Object]".into(),
            Value::Func(_) => "function".into(),
        }
    }

    pub fn to_num(&self) -> f64 {
        match self {
            Value::Undefined => f64::NAN,
            Value::Null => 0.0,
            Value::Bool(b) => f64::from(u8::from(*b)),
            Value::Num(n) => *n,
            Value::Str(s) => {
                let t = s.trim();
                if t.is_empty() {
                    0.0
                } else {
                    t.parse().unwrap_or(f64::NAN)
                }
            }
            Value::Object(_) | Value::Func(_) => f64::NAN,
        }
    }

    pub fn strict_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Undefined, Value::Undefined) | (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Object(a), Value::Object(b)) => Rc::ptr_eq(a, b),
            (Value::Func(a), Value::Func(b)) => a.id == b.id,
            _ => false,
        }
    }

    pub fn loose_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Undefined | Value::Null, Value::Undefined | Value::Null) => true,
            (Value::Num(_), Value::Str(_)) | (Value::Str(_), Value::Num(_)) => {
                self.to_num() == other.to_num()
            }
            _ => self.strict_eq(other),
        }
    }
}

#[derive(Debug, Clone)]
pub enum PropSlot {
    Data(Value),
    Accessor {
        getter: Option<Rc<FuncValue>>,
        setter: Option<Rc<FuncValue>>,
    },
}

/// Property bag. Keys keep insertion order.
#[derive(Debug, Default)]
pub struct Object {
    pub is_array: bool,
    props: Vec<(String, PropSlot)>,
}

impl Object {
    pub fn array() -> Self {
        Object {
            is_array: true,
            props: Vec::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&PropSlot> {
        self.props.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn set(&mut self, key: &str, slot: PropSlot) {
        match self.props.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = slot,
            None => self.props.push((key.to_string(), slot)),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<PropSlot> {
        let pos = self.props.iter().position(|(k, _)| k == key)?;
        Some(self.props.remove(pos).1)
    }

    pub fn keys(&self) -> Vec<String> {
        self.props.iter().map(|(k, _)| k.clone()).collect()
    }

    /// One past the highest index key.
    pub fn array_len(&self) -> usize {
        self.props
            .iter()
            .filter_map(|(k, _)| k.parse::<usize>().ok())
            .map(|i| i + 1)
            .max()
            .unwrap_or(0)
    }
}

pub type Env = Rc<RefCell<Frame>>;

/// A function-level variable scope.
#[derive(Debug)]
pub struct Frame {
    pub scope: Option<ScopeId>,
    pub vars: HashMap<String, (VarSlot, Value)>,
    pub parent: Option<Env>,
    /// Name of a function expression bound to itself in its own frame,
    /// while it still holds that function.
    pub self_name: Option<String>,
}

impl Frame {
    pub fn new(scope: Option<ScopeId>, parent: Option<Env>) -> Env {
        Rc::new(RefCell::new(Frame {
            scope,
            vars: HashMap::new(),
            parent,
            self_name: None,
        }))
    }
}

/// Walks the frame chain for `name`.
pub fn lookup(env: &Env, name: &str) -> Option<(Env, VarSlot, Value)> {
    let mut cur = Some(env.clone());
    while let Some(frame) = cur {
        if let Some((slot, v)) = frame.borrow().vars.get(name) {
            return Some((frame.clone(), slot.clone(), v.clone()));
        }
        cur = frame.borrow().parent.clone();
    }
    None
}

#[derive(Debug)]
pub enum FuncKind {
    Closure {
        program: Rc<Program>,
        index: usize,
        env: Env,
    },
    Native(String),
    Bound {
        target: Rc<FuncValue>,
        this: Value,
        args: Vec<Value>,
    },
}

#[derive(Debug)]
pub struct FuncValue {
    pub id: FuncValueId,
    pub kind: FuncKind,
    pub props: RefCell<Object>,
}

impl FuncValue {
    /// Reference recorded in trace entries: bound functions report their
    /// ultimate target.
    pub fn func_ref(&self) -> FuncRef {
        match &self.kind {
            FuncKind::Closure { program, index, .. } => {
                FuncRef::User(program.functions[*index].id.clone())
            }
            FuncKind::Native(n) => FuncRef::Native(n.clone()),
            FuncKind::Bound { target, .. } => target.func_ref(),
        }
    }
}
