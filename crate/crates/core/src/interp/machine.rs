use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frontend::{
    parse_unit, resolve_with, BinOp, BoundProgram, ExprKind, FunctionKind, Expr, ObjectProp,
    Program, PropInit, PropName, ResolveEnv, Stmt, StmtKind, UnOp,
};
use crate::ids::{Caller, FuncRef, ScopeId, SourceLoc, VarSlot};

use super::dcg::DynamicCallGraph;
use super::natives::{Behavior, NativeConfig, ELEMENT_PROP};
use super::trace::{EntryKind, EvalChannel, EvalUnit, Flag, FlowTrace, FuncOrigin, TraceEntry};
use super::value::{lookup, Env, Frame, FuncKind, FuncValue, Object, PropSlot, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpError {
    #[error("runtime error at {loc}: {message}")]
    Runtime { loc: SourceLoc, message: String },
    #[error("step budget of {budget} exceeded at {loc}")]
    StepBudgetExceeded { budget: u64, loc: SourceLoc },
    #[error("value is not callable at {loc}")]
    NotCallable { loc: SourceLoc },
}

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub step_budget: u64,
    pub seed: u64,
    pub max_call_depth: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            step_budget: 10_000_000,
            seed: 0,
            max_call_depth: 1000,
        }
    }
}

/// Result of running a program. On error the graph and trace hold
/// everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct Execution {
    pub dcg: DynamicCallGraph,
    pub trace: FlowTrace,
    pub output: Vec<String>,
    pub error: Option<InterpError>,
}

const STACK_SIZE: usize = 512 * 1024 * 1024;

pub fn execute(program: &BoundProgram, natives: &NativeConfig) -> Execution {
    execute_with(program, natives, &ExecOptions::default())
}

pub fn execute_with(program: &BoundProgram, natives: &NativeConfig, opts: &ExecOptions) -> Execution {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("cgrl-interp".into())
            .stack_size(STACK_SIZE)
            .spawn_scoped(s, || run(program, natives, opts))
            .expect("spawn interpreter thread")
            .join()
            .expect("interpreter thread panicked")
    })
}

fn run(program: &BoundProgram, natives: &NativeConfig, opts: &ExecOptions) -> Execution {
    let mut m = Machine::new(natives, opts.clone());
    let error = m.run_main(Rc::new(program.program.clone())).err();
    Execution {
        dcg: m.dcg,
        trace: m.trace,
        output: m.output,
        error,
    }
}

type R<T> = Result<T, InterpError>;

enum Flow {
    Normal,
    Return(Value),
}

struct Ctx {
    env: Env,
    this: Value,
    program: Rc<Program>,
    func: Option<usize>,
    site: Option<SourceLoc>,
}

/// How an invocation was reached.
#[derive(Default, Clone)]
struct How {
    flags: Vec<Flag>,
    via: Option<String>,
    /// Performed by an unmodeled native: no formal writes, no arguments.
    opaque: bool,
    synthetic_params: bool,
}

struct Machine<'n> {
    natives: &'n NativeConfig,
    opts: ExecOptions,
    trace: FlowTrace,
    dcg: DynamicCallGraph,
    output: Vec<String>,
    next_id: u64,
    native_values: HashMap<String, Rc<FuncValue>>,
    shadow: Vec<Caller>,
    steps: u64,
    depth: usize,
    eval_count: u32,
    rng: ChaCha8Rng,
    globals: Env,
    main_top: Option<Env>,
    global_names: BTreeSet<String>,
}

impl<'n> Machine<'n> {
    fn new(natives: &'n NativeConfig, opts: ExecOptions) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut m = Machine {
            natives,
            opts,
            trace: FlowTrace::default(),
            dcg: DynamicCallGraph::default(),
            output: Vec::new(),
            next_id: 1,
            native_values: HashMap::new(),
            shadow: vec![Caller::Toplevel],
            steps: 0,
            depth: 0,
            eval_count: 0,
            rng,
            globals: Frame::new(None, None),
            main_top: None,
            global_names: natives.global_names(),
        };
        for spec in &natives.natives {
            let f = m.new_func(FuncKind::Native(spec.name.clone()));
            m.native_values.insert(spec.name.clone(), f.clone());
            if !spec.behavior.is_function_method() {
                m.globals.borrow_mut().vars.insert(
                    spec.name.clone(),
                    (
                        VarSlot::Global {
                            name: spec.name.clone(),
                        },
                        Value::Func(f),
                    ),
                );
            }
        }
        m
    }

    fn run_main(&mut self, program: Rc<Program>) -> R<()> {
        let top = Frame::new(
            Some(ScopeId::Toplevel(program.unit.clone())),
            Some(self.globals.clone()),
        );
        self.main_top = Some(top.clone());
        let ctx = Ctx {
            env: top,
            this: Value::Undefined,
            program: program.clone(),
            func: None,
            site: None,
        };
        self.hoist(&ctx, &program.body)?;
        self.exec_block(&ctx, &program.body)?;
        Ok(())
    }

    fn new_func(&mut self, kind: FuncKind) -> Rc<FuncValue> {
        let id = self.next_id;
        self.next_id += 1;
        let origin = match &kind {
            FuncKind::Closure { program, index, .. } => FuncOrigin::User {
                id: program.functions[*index].id.clone(),
                unit: program.unit.clone(),
            },
            FuncKind::Native(n) => FuncOrigin::Native { name: n.clone() },
            FuncKind::Bound { target, .. } => FuncOrigin::Bound { target: target.id },
        };
        self.trace.origins.insert(id, origin);
        Rc::new(FuncValue {
            id,
            kind,
            props: RefCell::new(Object::default()),
        })
    }

    fn emit(&mut self, kind: EntryKind, func_value: u64, loc: &SourceLoc, flags: &[Flag]) {
        let mut set: BTreeSet<Flag> = flags.iter().copied().collect();
        if loc.eval_depth > 0 {
            set.insert(Flag::EvalOrigin);
        }
        let index = self.trace.entries.len();
        self.trace.entries.push(TraceEntry {
            index,
            kind,
            func_value,
            loc: loc.clone(),
            flags: set,
            base_id: None,
        });
    }

    fn step(&mut self, loc: &SourceLoc) -> R<()> {
        self.steps += 1;
        if self.steps > self.opts.step_budget {
            return Err(InterpError::StepBudgetExceeded {
                budget: self.opts.step_budget,
                loc: loc.clone(),
            });
        }
        Ok(())
    }

    fn fail<T>(&self, loc: &SourceLoc, message: impl Into<String>) -> R<T> {
        Err(InterpError::Runtime {
            loc: loc.clone(),
            message: message.into(),
        })
    }

    /// The DCG caller: the current function, or the outermost native of a
    /// run of nested natives on top of the shadow stack. The flag is set
    /// when that run is more than one native deep.
    fn caller(&self) -> (Caller, bool) {
        let mut i = self.shadow.len();
        let mut natives = 0;
        while i > 0 && matches!(self.shadow[i - 1], Caller::Func(FuncRef::Native(_))) {
            i -= 1;
            natives += 1;
        }
        if natives > 0 {
            (self.shadow[i].clone(), natives >= 2)
        } else {
            (self.shadow.last().cloned().unwrap_or(Caller::Toplevel), false)
        }
    }

    // ---- declarations ----

    fn hoist(&mut self, ctx: &Ctx, body: &[Stmt]) -> R<()> {
        let mut vars = Vec::new();
        let mut funcs = Vec::new();
        collect_hoisted(body, &mut vars, &mut funcs);
        let scope = ctx.env.borrow().scope.clone();
        for name in vars {
            let mut frame = ctx.env.borrow_mut();
            frame.vars.entry(name.clone()).or_insert_with(|| {
                let slot = match &scope {
                    Some(scope) => VarSlot::Var {
                        scope: scope.clone(),
                        name,
                    },
                    None => VarSlot::Global { name },
                };
                (slot, Value::Undefined)
            });
        }
        for (idx, stmt_loc) in funcs {
            let def = &ctx.program.functions[idx];
            let Some(name) = def.name.clone() else {
                continue;
            };
            let f = self.new_func(FuncKind::Closure {
                program: ctx.program.clone(),
                index: idx,
                env: ctx.env.clone(),
            });
            self.emit(
                EntryKind::Create {
                    func: FuncRef::User(def.id.clone()),
                },
                f.id,
                &def.loc,
                &[],
            );
            let slot = {
                let mut frame = ctx.env.borrow_mut();
                let slot = match frame.vars.get(&name) {
                    Some((slot, _)) => slot.clone(),
                    None => VarSlot::Var {
                        scope: scope.clone().unwrap_or(ScopeId::Toplevel(ctx.program.unit.clone())),
                        name: name.clone(),
                    },
                };
                frame.vars.insert(name.clone(), (slot.clone(), Value::Func(f.clone())));
                slot
            };
            self.emit(EntryKind::VarWrite { name, slot }, f.id, &stmt_loc, &[]);
        }
        Ok(())
    }

    fn assign_var(&mut self, ctx: &Ctx, name: &str, v: Value, loc: &SourceLoc) -> R<()> {
        let Some((frame, slot, _)) = lookup(&ctx.env, name) else {
            return self.fail(loc, format!("assignment to undeclared variable `{name}`"));
        };
        {
            let mut fr = frame.borrow_mut();
            fr.vars.insert(name.to_string(), (slot.clone(), v.clone()));
            if fr.self_name.as_deref() == Some(name) {
                fr.self_name = None;
            }
        }
        if let Some(id) = v.func_id() {
            self.emit(
                EntryKind::VarWrite {
                    name: name.to_string(),
                    slot,
                },
                id,
                loc,
                &[],
            );
        }
        Ok(())
    }

    // ---- statements ----

    fn exec_block(&mut self, ctx: &Ctx, stmts: &[Stmt]) -> R<Flow> {
        for s in stmts {
            if let Flow::Return(v) = self.exec(ctx, s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, ctx: &Ctx, s: &Stmt) -> R<Flow> {
        self.step(&s.loc)?;
        match &s.kind {
            StmtKind::Var { name, init, .. } => {
                if let Some(e) = init {
                    let v = self.eval(ctx, e)?;
                    self.assign_var(ctx, name, v, &s.loc)?;
                }
            }
            StmtKind::FunctionDecl(_) | StmtKind::Empty => {}
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(ctx, e)?,
                    None => Value::Undefined,
                };
                let Some(idx) = ctx.func else {
                    return self.fail(&s.loc, "return outside of a function");
                };
                if let Some(id) = v.func_id() {
                    let func = FuncRef::User(ctx.program.functions[idx].id.clone());
                    self.emit(
                        EntryKind::Return {
                            func,
                            site: ctx.site.clone(),
                        },
                        id,
                        &s.loc,
                        &[],
                    );
                }
                return Ok(Flow::Return(v));
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if self.eval(ctx, cond)?.truthy() {
                    return self.exec_block(ctx, then_branch);
                } else if let Some(b) = else_branch {
                    return self.exec_block(ctx, b);
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(ctx, cond)?.truthy() {
                    self.step(&s.loc)?;
                    if let Flow::Return(v) = self.exec_block(ctx, body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::ForIn { var, object, body } => {
                let keys = match self.eval(ctx, object)? {
                    Value::Object(o) => o.borrow().keys(),
                    Value::Func(f) => f.props.borrow().keys(),
                    Value::Str(st) => (0..st.chars().count()).map(|i| i.to_string()).collect(),
                    _ => Vec::new(),
                };
                for k in keys {
                    self.step(&s.loc)?;
                    self.assign_var(ctx, &var.name, Value::Str(k.into()), &var.loc)?;
                    if let Flow::Return(v) = self.exec_block(ctx, body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Block(b) => return self.exec_block(ctx, b),
            StmtKind::Expr(e) => {
                self.eval(ctx, e)?;
            }
        }
        Ok(Flow::Normal)
    }

    // ---- expressions ----

    fn eval(&mut self, ctx: &Ctx, e: &Expr) -> R<Value> {
        self.step(&e.loc)?;
        match &e.kind {
            ExprKind::Num(n) => Ok(Value::Num(*n)),
            ExprKind::Str(s) => Ok(Value::Str(s.as_str().into())),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::This => Ok(ctx.this.clone()),
            ExprKind::Ident { name, .. } => self.read_var(ctx, name, &e.loc),
            ExprKind::Function(idx) => {
                let f = self.new_func(FuncKind::Closure {
                    program: ctx.program.clone(),
                    index: *idx,
                    env: ctx.env.clone(),
                });
                let func = FuncRef::User(ctx.program.functions[*idx].id.clone());
                self.emit(EntryKind::Create { func }, f.id, &e.loc, &[]);
                Ok(Value::Func(f))
            }
            ExprKind::Object(props) => self.eval_object(ctx, props),
            ExprKind::Array(items) => {
                let obj = Rc::new(RefCell::new(Object::array()));
                for (i, item) in items.iter().enumerate() {
                    let v = self.eval(ctx, item)?;
                    let key = i.to_string();
                    if let Some(id) = v.func_id() {
                        self.emit(
                            EntryKind::PropWrite {
                                name: key.clone(),
                                dynamic: false,
                            },
                            id,
                            &item.loc,
                            &[],
                        );
                    }
                    obj.borrow_mut().set(&key, PropSlot::Data(v));
                }
                Ok(Value::Object(obj))
            }
            ExprKind::Member { object, prop } => {
                let base = self.eval(ctx, object)?;
                let (name, dynamic) = self.prop_name(ctx, prop)?;
                self.get_prop(base, &name, dynamic, &e.loc)
            }
            ExprKind::Call { callee, args } => {
                let (fval, this) = match &callee.kind {
                    ExprKind::Member { object, prop } => {
                        let base = self.eval(ctx, object)?;
                        let (name, dynamic) = self.prop_name(ctx, prop)?;
                        let f = self.get_prop(base.clone(), &name, dynamic, &callee.loc)?;
                        (f, base)
                    }
                    _ => (self.eval(ctx, callee)?, Value::Undefined),
                };
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(ctx, a)?);
                }
                let Some(f) = fval.as_func().cloned() else {
                    return Err(InterpError::NotCallable { loc: e.loc.clone() });
                };
                self.invoke(&f, this, argv, &e.loc, How::default(), Some(ctx))
            }
            ExprKind::Assign { target, value } => match &target.kind {
                ExprKind::Ident { name, .. } => {
                    let v = self.eval(ctx, value)?;
                    self.assign_var(ctx, name, v.clone(), &e.loc)?;
                    Ok(v)
                }
                ExprKind::Member { object, prop } => {
                    let base = self.eval(ctx, object)?;
                    let (name, dynamic) = self.prop_name(ctx, prop)?;
                    let v = self.eval(ctx, value)?;
                    self.set_prop(base, &name, dynamic, v.clone(), &target.loc)?;
                    Ok(v)
                }
                _ => self.fail(&e.loc, "invalid assignment target"),
            },
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.eval(ctx, lhs)?;
                let r = self.eval(ctx, rhs)?;
                Ok(binary(*op, &l, &r))
            }
            ExprKind::Unary { op, expr } => {
                let v = self.eval(ctx, expr)?;
                Ok(match op {
                    UnOp::Not => Value::Bool(!v.truthy()),
                    UnOp::Neg => Value::Num(-v.to_num()),
                })
            }
        }
    }

    fn read_var(&mut self, ctx: &Ctx, name: &str, loc: &SourceLoc) -> R<Value> {
        let Some((frame, slot, v)) = lookup(&ctx.env, name) else {
            return self.fail(loc, format!("unbound variable `{name}`"));
        };
        if let Some(f) = v.as_func() {
            let is_self = frame.borrow().self_name.as_deref() == Some(name);
            match (&slot, &f.kind) {
                (VarSlot::Global { .. }, FuncKind::Native(n)) => {
                    let func = FuncRef::Native(n.clone());
                    self.emit(EntryKind::Create { func }, f.id, loc, &[Flag::Synthetic]);
                }
                _ if is_self => {
                    let func = f.func_ref();
                    self.emit(EntryKind::Create { func }, f.id, loc, &[Flag::Synthetic]);
                }
                _ => self.emit(
                    EntryKind::VarRead {
                        name: name.to_string(),
                        slot,
                    },
                    f.id,
                    loc,
                    &[],
                ),
            }
        }
        Ok(v)
    }

    fn eval_object(&mut self, ctx: &Ctx, props: &[ObjectProp]) -> R<Value> {
        let obj = Rc::new(RefCell::new(Object::default()));
        for p in props {
            match &p.value {
                PropInit::Data(e) => {
                    let v = self.eval(ctx, e)?;
                    if let Some(id) = v.func_id() {
                        self.emit(
                            EntryKind::PropWrite {
                                name: p.key.clone(),
                                dynamic: false,
                            },
                            id,
                            &p.loc,
                            &[],
                        );
                    }
                    obj.borrow_mut().set(&p.key, PropSlot::Data(v));
                }
                PropInit::Getter(idx) | PropInit::Setter(idx) => {
                    let f = self.new_func(FuncKind::Closure {
                        program: ctx.program.clone(),
                        index: *idx,
                        env: ctx.env.clone(),
                    });
                    let def = &ctx.program.functions[*idx];
                    self.emit(
                        EntryKind::Create {
                            func: FuncRef::User(def.id.clone()),
                        },
                        f.id,
                        &def.loc,
                        &[],
                    );
                    let is_getter = matches!(p.value, PropInit::Getter(_));
                    let mut o = obj.borrow_mut();
                    let (mut getter, mut setter) = match o.get(&p.key) {
                        Some(PropSlot::Accessor { getter, setter }) => (getter.clone(), setter.clone()),
                        _ => (None, None),
                    };
                    if is_getter {
                        getter = Some(f);
                    } else {
                        setter = Some(f);
                    }
                    o.set(&p.key, PropSlot::Accessor { getter, setter });
                }
            }
        }
        Ok(Value::Object(obj))
    }

    fn prop_name(&mut self, ctx: &Ctx, prop: &PropName) -> R<(String, bool)> {
        Ok(match prop {
            PropName::Static { name, .. } => (name.clone(), false),
            PropName::Dynamic(e) => (self.eval(ctx, e)?.to_text(), true),
        })
    }

    fn get_prop(&mut self, base: Value, name: &str, dynamic: bool, loc: &SourceLoc) -> R<Value> {
        let slot = match &base {
            Value::Object(o) => {
                let o = o.borrow();
                match o.get(name) {
                    Some(s) => Some(s.clone()),
                    None if o.is_array && name == "length" => {
                        return Ok(Value::Num(o.array_len() as f64))
                    }
                    None => None,
                }
            }
            Value::Func(f) => {
                let own = f.props.borrow().get(name).cloned();
                if own.is_none() {
                    if let Some(spec) = self.natives.function_method(name) {
                        let native = self.native_values[&spec.name].clone();
                        let func = FuncRef::Native(spec.name.clone());
                        self.emit(EntryKind::Create { func }, native.id, loc, &[Flag::Synthetic]);
                        return Ok(Value::Func(native));
                    }
                }
                own
            }
            Value::Str(s) => {
                if name == "length" {
                    return Ok(Value::Num(s.chars().count() as f64));
                }
                return Ok(match name.parse::<usize>().ok().and_then(|i| s.chars().nth(i)) {
                    Some(c) => Value::Str(c.to_string().into()),
                    None => Value::Undefined,
                });
            }
            Value::Undefined | Value::Null => {
                return self.fail(
                    loc,
                    format!("cannot read property `{name}` of {}", base.to_text()),
                )
            }
            Value::Bool(_) | Value::Num(_) => None,
        };
        match slot {
            None => Ok(Value::Undefined),
            Some(PropSlot::Data(v)) => {
                if let Some(id) = v.func_id() {
                    self.emit(
                        EntryKind::PropRead {
                            name: name.to_string(),
                            dynamic,
                        },
                        id,
                        loc,
                        &[],
                    );
                }
                Ok(v)
            }
            Some(PropSlot::Accessor { getter: Some(g), .. }) => {
                let how = How {
                    flags: vec![Flag::Getter],
                    ..How::default()
                };
                self.invoke(&g, base, Vec::new(), loc, how, None)
            }
            Some(PropSlot::Accessor { getter: None, .. }) => Ok(Value::Undefined),
        }
    }

    fn set_prop(&mut self, base: Value, name: &str, dynamic: bool, v: Value, loc: &SourceLoc) -> R<()> {
        let existing = match &base {
            Value::Object(o) => o.borrow().get(name).cloned(),
            Value::Func(f) => f.props.borrow().get(name).cloned(),
            Value::Undefined | Value::Null => {
                return self.fail(
                    loc,
                    format!("cannot set property `{name}` of {}", base.to_text()),
                )
            }
            _ => return Ok(()),
        };
        if let Some(PropSlot::Accessor { setter, .. }) = existing {
            if let Some(s) = setter {
                let how = How {
                    flags: vec![Flag::Setter],
                    ..How::default()
                };
                self.invoke(&s, base, vec![v], loc, how, None)?;
            }
            return Ok(());
        }
        if let Some(id) = v.func_id() {
            self.emit(
                EntryKind::PropWrite {
                    name: name.to_string(),
                    dynamic,
                },
                id,
                loc,
                &[],
            );
        }
        match &base {
            Value::Object(o) => o.borrow_mut().set(name, PropSlot::Data(v)),
            Value::Func(f) => f.props.borrow_mut().set(name, PropSlot::Data(v)),
            _ => {}
        }
        Ok(())
    }

    // ---- calls ----

    fn invoke(
        &mut self,
        f: &Rc<FuncValue>,
        this: Value,
        args: Vec<Value>,
        site: &SourceLoc,
        mut how: How,
        ctx: Option<&Ctx>,
    ) -> R<Value> {
        if self.depth >= self.opts.max_call_depth {
            return self.fail(site, "maximum call depth exceeded");
        }
        match &f.kind {
            FuncKind::Bound {
                target,
                this: bound_this,
                args: bound_args,
            } => {
                let mut all = bound_args.clone();
                all.extend(args);
                how.flags.push(Flag::BoundCall);
                let target = target.clone();
                self.invoke(&target, bound_this.clone(), all, site, how, None)
            }
            FuncKind::Closure { program, index, env } => {
                let (program, index, env) = (program.clone(), *index, env.clone());
                self.depth += 1;
                let r = self.invoke_closure(f, &program, index, env, this, args, site, how);
                self.depth -= 1;
                r
            }
            FuncKind::Native(name) => {
                let name = name.clone();
                self.depth += 1;
                let r = self.invoke_native(f, &name, this, args, site, how, ctx);
                self.depth -= 1;
                r
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn invoke_closure(
        &mut self,
        f: &Rc<FuncValue>,
        program: &Rc<Program>,
        index: usize,
        env: Env,
        this: Value,
        args: Vec<Value>,
        site: &SourceLoc,
        how: How,
    ) -> R<Value> {
        let def = &program.functions[index];
        let fref = FuncRef::User(def.id.clone());
        let (caller, multi) = self.caller();
        let mut arg_ids = Vec::new();
        if !how.opaque {
            arg_ids = (0..def.params.len())
                .map(|i| args.get(i).and_then(Value::func_id))
                .collect();
            let param_flags: &[Flag] = if how.synthetic_params {
                &[Flag::Synthetic]
            } else {
                &[]
            };
            for (i, p) in def.params.iter().enumerate() {
                if let Some(id) = arg_ids[i] {
                    self.emit(
                        EntryKind::VarWrite {
                            name: p.name.clone(),
                            slot: VarSlot::Param {
                                func: def.id.clone(),
                                index: i,
                            },
                        },
                        id,
                        site,
                        param_flags,
                    );
                }
            }
        }
        let mut flags = how.flags.clone();
        if multi {
            flags.push(Flag::MultiLevelNative);
        }
        self.emit(
            EntryKind::Invoke {
                callee: fref.clone(),
                args: arg_ids,
                via: how.via.clone(),
            },
            f.id,
            site,
            &flags,
        );
        self.dcg.add(caller, site.clone(), fref.clone());

        let frame = Frame::new(Some(ScopeId::Func(def.id.clone())), Some(env));
        {
            let mut fr = frame.borrow_mut();
            if def.kind == FunctionKind::Expression {
                if let Some(name) = &def.name {
                    let slot = VarSlot::Var {
                        scope: ScopeId::Func(def.id.clone()),
                        name: name.clone(),
                    };
                    fr.vars.insert(name.clone(), (slot, Value::Func(f.clone())));
                    fr.self_name = Some(name.clone());
                }
            }
            for (i, p) in def.params.iter().enumerate() {
                let slot = VarSlot::Param {
                    func: def.id.clone(),
                    index: i,
                };
                let v = args.get(i).cloned().unwrap_or(Value::Undefined);
                fr.vars.insert(p.name.clone(), (slot, v));
                if fr.self_name.as_deref() == Some(p.name.as_str()) {
                    fr.self_name = None;
                }
            }
        }
        let ctx = Ctx {
            env: frame,
            this,
            program: program.clone(),
            func: Some(index),
            site: Some(site.clone()),
        };
        self.shadow.push(Caller::Func(fref.clone()));
        let flow = self
            .hoist(&ctx, &def.body)
            .and_then(|_| self.exec_block(&ctx, &def.body));
        self.shadow.pop();
        let v = match flow? {
            Flow::Return(v) => v,
            Flow::Normal => Value::Undefined,
        };
        if let Some(id) = v.func_id() {
            self.emit(
                EntryKind::VarRead {
                    name: "return".into(),
                    slot: VarSlot::Return { func: fref },
                },
                id,
                site,
                &[],
            );
        }
        Ok(v)
    }

    #[allow(clippy::too_many_arguments)]
    fn invoke_native(
        &mut self,
        f: &Rc<FuncValue>,
        name: &str,
        this: Value,
        args: Vec<Value>,
        site: &SourceLoc,
        how: How,
        ctx: Option<&Ctx>,
    ) -> R<Value> {
        let Some(spec) = self.natives.get(name).cloned() else {
            return self.fail(site, format!("unknown native `{name}`"));
        };
        let fref = FuncRef::Native(name.to_string());
        let (caller, multi) = self.caller();
        let mut flags = how.flags.clone();
        if multi {
            flags.push(Flag::MultiLevelNative);
        }
        let arg_ids = if how.opaque {
            Vec::new()
        } else {
            args.iter().map(Value::func_id).collect()
        };
        self.emit(
            EntryKind::Invoke {
                callee: fref.clone(),
                args: arg_ids,
                via: how.via.clone(),
            },
            f.id,
            site,
            &flags,
        );
        self.dcg.add(caller, site.clone(), fref.clone());

        let arg = |i: usize| args.get(i).cloned().unwrap_or(Value::Undefined);
        let callback_how = How {
            flags: if spec.modeled {
                Vec::new()
            } else {
                vec![Flag::NativeCallbackBoundary]
            },
            via: Some(name.to_string()),
            opaque: !spec.modeled,
            synthetic_params: false,
        };
        match spec.behavior {
            Behavior::Pure => {
                if name == "random" {
                    return Ok(Value::Num(self.rng.gen::<f64>()));
                }
                if name == "print" {
                    let line: Vec<String> = args.iter().map(Value::to_text).collect();
                    self.output.push(line.join(" "));
                }
                Ok(Value::Undefined)
            }
            Behavior::InvokesArgument => {
                let Some(target) = arg(0).as_func().cloned() else {
                    return Err(InterpError::NotCallable { loc: site.clone() });
                };
                self.shadow.push(Caller::Func(fref));
                let r = self.invoke(&target, Value::Undefined, args[1..].to_vec(), site, callback_how, None);
                self.shadow.pop();
                r.map(|_| Value::Undefined)
            }
            Behavior::ReturnsFunction => {
                let v = arg(0);
                if let Some(id) = v.func_id() {
                    if spec.modeled {
                        self.emit(
                            EntryKind::Return {
                                func: fref.clone(),
                                site: Some(site.clone()),
                            },
                            id,
                            site,
                            &[Flag::Synthetic],
                        );
                    }
                    self.emit(
                        EntryKind::VarRead {
                            name: "return".into(),
                            slot: VarSlot::Return { func: fref },
                        },
                        id,
                        site,
                        &[],
                    );
                }
                Ok(v)
            }
            Behavior::EvaluatesCode => match arg(0) {
                Value::Str(code) => self.eval_code(&code, ctx, site),
                other => Ok(other),
            },
            Behavior::ConstructsFunction => self.make_function(&args, site),
            Behavior::Binds => {
                let Some(target) = this.as_func().cloned() else {
                    return Err(InterpError::NotCallable { loc: site.clone() });
                };
                let func = target.func_ref();
                let b = self.new_func(FuncKind::Bound {
                    target,
                    this: arg(0),
                    args: args.iter().skip(1).cloned().collect(),
                });
                self.emit(EntryKind::Create { func }, b.id, site, &[Flag::Synthetic]);
                Ok(Value::Func(b))
            }
            Behavior::ReflectiveCall | Behavior::ReflectiveApply => {
                let Some(target) = this.as_func().cloned() else {
                    return Err(InterpError::NotCallable { loc: site.clone() });
                };
                let (call_args, mut how) = if spec.behavior == Behavior::ReflectiveCall {
                    (args.iter().skip(1).cloned().collect(), callback_how)
                } else {
                    let items = match arg(1) {
                        Value::Object(o) => {
                            let o = o.borrow();
                            (0..o.array_len())
                                .map(|i| match o.get(&i.to_string()) {
                                    Some(PropSlot::Data(v)) => v.clone(),
                                    _ => Value::Undefined,
                                })
                                .collect()
                        }
                        _ => Vec::new(),
                    };
                    (items, callback_how)
                };
                how.synthetic_params = spec.behavior == Behavior::ReflectiveApply;
                self.shadow.push(Caller::Func(fref));
                let r = self.invoke(&target, arg(0), call_args, site, how, None);
                self.shadow.pop();
                r
            }
            Behavior::StoresElement => {
                let Value::Object(o) = arg(0) else {
                    return self.fail(site, format!("`{name}` expects an array"));
                };
                let v = arg(1);
                let len = o.borrow().array_len();
                o.borrow_mut().set(&len.to_string(), PropSlot::Data(v.clone()));
                if let (Some(id), true) = (v.func_id(), spec.modeled) {
                    self.emit(
                        EntryKind::PropWrite {
                            name: ELEMENT_PROP.into(),
                            dynamic: false,
                        },
                        id,
                        site,
                        &[Flag::Synthetic],
                    );
                }
                Ok(Value::Num((len + 1) as f64))
            }
            Behavior::LoadsElement => {
                let Value::Object(o) = arg(0) else {
                    return self.fail(site, format!("`{name}` expects an array"));
                };
                let len = o.borrow().array_len();
                if len == 0 {
                    return Ok(Value::Undefined);
                }
                let v = match o.borrow_mut().remove(&(len - 1).to_string()) {
                    Some(PropSlot::Data(v)) => v,
                    _ => Value::Undefined,
                };
                if let (Some(id), true) = (v.func_id(), spec.modeled) {
                    self.emit(
                        EntryKind::PropRead {
                            name: ELEMENT_PROP.into(),
                            dynamic: false,
                        },
                        id,
                        site,
                        &[Flag::Synthetic],
                    );
                }
                Ok(v)
            }
        }
    }

    // ---- dynamic code ----

    fn eval_unit_name(&mut self, site: &SourceLoc, native: &str) -> String {
        self.eval_count += 1;
        format!("{}>{native}#{}", site.unit, self.eval_count)
    }

    fn parse_and_resolve(
        &self,
        source: &str,
        unit: &str,
        depth: u32,
        toplevel: Option<ScopeId>,
        env: &Env,
        site: &SourceLoc,
    ) -> R<Program> {
        let program = parse_unit(source, unit, depth).map_err(|e| InterpError::Runtime {
            loc: site.clone(),
            message: format!("in evaluated code: {e}"),
        })?;
        let env = env.clone();
        let outer = move |name: &str| lookup(&env, name).map(|(_, slot, _)| slot);
        let renv = ResolveEnv {
            globals: &self.global_names,
            toplevel,
            outer: Some(&outer),
        };
        let bound = resolve_with(program, &renv).map_err(|e| InterpError::Runtime {
            loc: site.clone(),
            message: format!("in evaluated code: {e}"),
        })?;
        Ok(bound.program)
    }

    /// Runs `code` in the caller's scope; without a direct caller context
    /// it runs at the program top level.
    fn eval_code(&mut self, code: &str, ctx: Option<&Ctx>, site: &SourceLoc) -> R<Value> {
        let (env, this) = match ctx {
            Some(c) => (c.env.clone(), c.this.clone()),
            None => (self.main_top.clone().expect("main scope"), Value::Undefined),
        };
        let depth = site.eval_depth + 1;
        let unit = self.eval_unit_name(site, "evalCode");
        let scope = env.borrow().scope.clone();
        let program = self.parse_and_resolve(code, &unit, depth, scope, &env, site)?;
        self.trace.eval_units.insert(
            unit,
            EvalUnit {
                channel: EvalChannel::EvalCode,
                depth,
                parent: site.unit.clone(),
            },
        );
        let program = Rc::new(program);
        let ectx = Ctx {
            env,
            this,
            program: program.clone(),
            func: None,
            site: None,
        };
        self.hoist(&ectx, &program.body)?;
        self.exec_block(&ectx, &program.body)?;
        Ok(Value::Null)
    }

    /// Builds a function from parameter and body strings. The function
    /// closes over the program top level.
    fn make_function(&mut self, args: &[Value], site: &SourceLoc) -> R<Value> {
        let texts: Vec<String> = args.iter().map(Value::to_text).collect();
        let (body, params) = match texts.split_last() {
            Some((body, params)) => (body.clone(), params.join(", ")),
            None => (String::new(), String::new()),
        };
        let source = format!("(function anonymous({params}) {{\n{body}\n}});");
        let depth = site.eval_depth + 1;
        let unit = self.eval_unit_name(site, "makeFunction");
        let top = self.main_top.clone().expect("main scope");
        let program = self.parse_and_resolve(&source, &unit, depth, None, &top, site)?;
        let well_formed = program.body.len() == 1
            && matches!(&program.body[0].kind, StmtKind::Expr(Expr { kind: ExprKind::Function(0), .. }));
        if !well_formed {
            return self.fail(site, "malformed function parameters or body");
        }
        self.trace.eval_units.insert(
            unit,
            EvalUnit {
                channel: EvalChannel::MakeFunction,
                depth,
                parent: site.unit.clone(),
            },
        );
        let program = Rc::new(program);
        let func = FuncRef::User(program.functions[0].id.clone());
        let f = self.new_func(FuncKind::Closure {
            program,
            index: 0,
            env: top,
        });
        self.emit(EntryKind::Create { func }, f.id, site, &[Flag::Synthetic]);
        Ok(Value::Func(f))
    }
}

fn collect_hoisted(stmts: &[Stmt], vars: &mut Vec<String>, funcs: &mut Vec<(usize, SourceLoc)>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Var { name, .. } => vars.push(name.clone()),
            StmtKind::FunctionDecl(idx) => funcs.push((*idx, s.loc.clone())),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_hoisted(then_branch, vars, funcs);
                if let Some(b) = else_branch {
                    collect_hoisted(b, vars, funcs);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => collect_hoisted(body, vars, funcs),
            StmtKind::ForIn { var, body, .. } => {
                if var.declared {
                    vars.push(var.name.clone());
                }
                collect_hoisted(body, vars, funcs);
            }
            StmtKind::Return(_) | StmtKind::Expr(_) | StmtKind::Empty => {}
        }
    }
}

fn binary(op: BinOp, l: &Value, r: &Value) -> Value {
    let strings = matches!(l, Value::Str(_)) || matches!(r, Value::Str(_));
    match op {
        BinOp::Add => {
            let objectish = |v: &Value| matches!(v, Value::Object(_) | Value::Func(_));
            if strings || objectish(l) || objectish(r) {
                Value::Str(format!("{}{}", l.to_text(), r.to_text()).into())
            } else {
                Value::Num(l.to_num() + r.to_num())
            }
        }
        BinOp::Sub => Value::Num(l.to_num() - r.to_num()),
        BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => {
            let ord = if let (Value::Str(a), Value::Str(b)) = (l, r) {
                a.partial_cmp(b)
            } else {
                l.to_num().partial_cmp(&r.to_num())
            };
            let Some(ord) = ord else {
                return Value::Bool(false);
            };
            Value::Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Gt => ord.is_gt(),
                BinOp::Le => ord.is_le(),
                _ => ord.is_ge(),
            })
        }
        BinOp::Eq => Value::Bool(l.loose_eq(r)),
        BinOp::Ne => Value::Bool(!l.loose_eq(r)),
        BinOp::StrictEq => Value::Bool(l.strict_eq(r)),
        BinOp::StrictNe => Value::Bool(!l.strict_eq(r)),
    }
}
