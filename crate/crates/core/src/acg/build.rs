use crate::frontend::{
    Binding, BoundProgram, Expr, ExprKind, FunctionKind, PropInit, PropName, Stmt, StmtKind,
};
use crate::ids::{Caller, FuncRef, ScopeId, SourceLoc, VarSlot};
use crate::interp::{Behavior, NativeConfig, ELEMENT_PROP};

use super::{CallSite, FgNode, FlowGraph, SiteKind, SiteTable, Variant};

/// Builds the initial flow graph with intraprocedural edges. The
/// pessimistic variant also wires parameters and returns of functions
/// invoked directly at their creation.
pub fn build_flow_graph(
    program: &BoundProgram,
    natives: &NativeConfig,
    variant: Variant,
) -> (FlowGraph, SiteTable) {
    let mut b = Builder {
        program,
        natives,
        variant,
        fg: FlowGraph::new(variant),
        sites: SiteTable::new(),
        func: None,
    };
    for f in &program.functions {
        b.fg.add_node(FgNode::Func(FuncRef::User(f.id.clone())));
        b.fg.add_node(FgNode::Ret(f.id.clone()));
        for i in 0..f.params.len() {
            b.fg.add_node(FgNode::Param(f.id.clone(), i));
        }
    }
    b.stmts(&program.body);
    for i in 0..program.functions.len() {
        b.func = Some(i);
        b.stmts(&program.functions[i].body);
    }
    (b.fg, b.sites)
}

struct Builder<'a> {
    program: &'a BoundProgram,
    natives: &'a NativeConfig,
    variant: Variant,
    fg: FlowGraph,
    sites: SiteTable,
    func: Option<usize>,
}

impl Builder<'_> {
    fn edge(&mut self, from: Option<FgNode>, to: FgNode) {
        match from {
            Some(from) => {
                self.fg.add_edge(from, to);
            }
            None => {
                self.fg.add_node(to);
            }
        }
    }

    fn owner(&self) -> Caller {
        match self.func {
            Some(i) => Caller::Func(FuncRef::User(self.program.functions[i].id.clone())),
            None => Caller::Toplevel,
        }
    }

    fn binding_node(&mut self, name: &str, binding: &Binding) -> Option<FgNode> {
        match binding {
            Binding::Global => match self.natives.get(name) {
                Some(spec) if spec.behavior.is_function_method() => None,
                Some(spec) if spec.modeled => {
                    let n = FgNode::Func(FuncRef::Native(name.to_string()));
                    self.fg.add_node(n.clone());
                    Some(n)
                }
                Some(_) => None,
                None => Some(FgNode::Var(VarSlot::Global {
                    name: name.to_string(),
                })),
            },
            b => Some(match b.slot(name) {
                VarSlot::Param { func, index } => FgNode::Param(func, index),
                slot => FgNode::Var(slot),
            }),
        }
    }

    /// Node for the variable a function declaration binds.
    fn decl_node(&self, name: &str, parent: Option<usize>) -> FgNode {
        if let Some(p) = parent {
            let def = &self.program.functions[p];
            if let Some(i) = def.params.iter().rposition(|q| q.name == name) {
                return FgNode::Param(def.id.clone(), i);
            }
        }
        FgNode::Var(VarSlot::Var {
            scope: self.program.scope_of(parent),
            name: name.to_string(),
        })
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Var {
                name,
                init,
                binding,
            } => {
                let target = binding.as_ref().and_then(|b| self.binding_node(name, b));
                let v = init.as_ref().and_then(|e| self.expr(e));
                if let Some(t) = target {
                    self.edge(v, t);
                }
            }
            StmtKind::FunctionDecl(idx) => {
                let def = &self.program.functions[*idx];
                if let Some(name) = &def.name {
                    let to = self.decl_node(name, self.func);
                    self.edge(Some(FgNode::Func(FuncRef::User(def.id.clone()))), to);
                }
            }
            StmtKind::Return(e) => {
                let v = e.as_ref().and_then(|e| self.expr(e));
                if let Some(i) = self.func {
                    let ret = FgNode::Ret(self.program.functions[i].id.clone());
                    self.edge(v, ret);
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.expr(cond);
                self.stmts(then_branch);
                if let Some(b) = else_branch {
                    self.stmts(b);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.stmts(body);
            }
            StmtKind::ForIn { object, body, .. } => {
                self.expr(object);
                self.stmts(body);
            }
            StmtKind::Block(b) => self.stmts(b),
            StmtKind::Expr(e) => {
                self.expr(e);
            }
            StmtKind::Empty => {}
        }
    }

    /// Adds the edges of `e` and returns the node holding its value.
    fn expr(&mut self, e: &Expr) -> Option<FgNode> {
        match &e.kind {
            ExprKind::Num(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::This => {
                None
            }
            ExprKind::Ident { name, binding } => {
                binding.as_ref().and_then(|b| self.binding_node(name, b))
            }
            ExprKind::Function(idx) => {
                let def = &self.program.functions[*idx];
                let f = FgNode::Func(FuncRef::User(def.id.clone()));
                if def.kind == FunctionKind::Expression {
                    if let Some(name) = &def.name {
                        if !def.params.iter().any(|p| &p.name == name) {
                            let own = FgNode::Var(VarSlot::Var {
                                scope: ScopeId::Func(def.id.clone()),
                                name: name.clone(),
                            });
                            self.fg.add_edge(f.clone(), own);
                        }
                    }
                }
                Some(f)
            }
            ExprKind::Object(props) => {
                for p in props {
                    let prop = FgNode::Prop(p.key.clone());
                    match &p.value {
                        PropInit::Data(v) => {
                            let v = self.expr(v);
                            self.edge(v, prop);
                        }
                        PropInit::Getter(_) | PropInit::Setter(_) => {
                            self.fg.add_node(prop);
                        }
                    }
                }
                None
            }
            ExprKind::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    let v = self.expr(item);
                    self.edge(v, FgNode::Prop(i.to_string()));
                }
                None
            }
            ExprKind::Member { object, prop } => {
                self.expr(object);
                match prop {
                    PropName::Static { name, .. } => {
                        let n = FgNode::Prop(name.clone());
                        self.fg.add_node(n.clone());
                        Some(n)
                    }
                    PropName::Dynamic(n) => {
                        self.expr(n);
                        None
                    }
                }
            }
            ExprKind::Call { callee, args } => Some(self.call(&e.loc, callee, args)),
            ExprKind::Assign { target, value } => {
                let t = match &target.kind {
                    ExprKind::Ident { name, binding } => {
                        binding.as_ref().and_then(|b| self.binding_node(name, b))
                    }
                    ExprKind::Member { .. } => self.expr(target),
                    _ => None,
                };
                let v = self.expr(value);
                match (&v, &t) {
                    (Some(v), Some(t)) => {
                        self.fg.add_edge(v.clone(), t.clone());
                    }
                    (None, Some(t)) => {
                        self.fg.add_node(t.clone());
                    }
                    _ => {}
                }
                t.or(v)
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
                None
            }
            ExprKind::Unary { expr, .. } => {
                self.expr(expr);
                None
            }
        }
    }

    fn call(&mut self, site: &SourceLoc, callee: &Expr, args: &[Expr]) -> FgNode {
        let callee_node = FgNode::Callee(site.clone());
        let res = FgNode::Res(site.clone());
        self.fg.add_node(callee_node.clone());
        self.fg.add_node(res.clone());
        for i in 0..args.len() {
            self.fg.add_node(FgNode::Arg(site.clone(), i));
        }

        let mut kind = SiteKind::Normal;
        match &callee.kind {
            ExprKind::Member {
                object,
                prop: PropName::Static { name, .. },
            } if self.natives.function_method(name).is_some_and(|n| n.modeled) => {
                let behavior = self.natives.function_method(name).map(|n| n.behavior);
                self.fg
                    .add_edge(FgNode::Func(FuncRef::Native(name.clone())), callee_node.clone());
                let base = self.expr(object);
                match behavior {
                    Some(Behavior::ReflectiveCall) | Some(Behavior::ReflectiveApply) => {
                        kind = if behavior == Some(Behavior::ReflectiveCall) {
                            SiteKind::ReflectiveCall
                        } else {
                            SiteKind::ReflectiveApply
                        };
                        let recv = FgNode::Recv(site.clone());
                        self.edge(base, recv.clone());
                        self.fg.add_edge(recv, callee_node.clone());
                    }
                    _ => kind = SiteKind::Bind,
                }
            }
            ExprKind::Ident {
                name,
                binding: Some(Binding::Global),
            } if self.natives.is_modeled(name) => {
                let native = self.natives.get(name).expect("modeled native");
                let f = self.binding_node(name, &Binding::Global);
                self.edge(f, callee_node.clone());
                match native.behavior {
                    Behavior::InvokesArgument => {
                        kind = SiteKind::Callback;
                        self.fg
                            .add_edge(FgNode::Arg(site.clone(), 0), callee_node.clone());
                    }
                    Behavior::ReturnsFunction if !args.is_empty() => {
                        self.fg.add_edge(FgNode::Arg(site.clone(), 0), res.clone());
                    }
                    Behavior::StoresElement if args.len() > 1 => {
                        self.fg
                            .add_edge(FgNode::Arg(site.clone(), 1), FgNode::Prop(ELEMENT_PROP.into()));
                    }
                    Behavior::LoadsElement => {
                        self.fg.add_edge(FgNode::Prop(ELEMENT_PROP.into()), res.clone());
                    }
                    _ => {}
                }
            }
            _ => {
                let c = self.expr(callee);
                self.edge(c, callee_node.clone());
            }
        }

        for (i, a) in args.iter().enumerate() {
            let v = self.expr(a);
            self.edge(v, FgNode::Arg(site.clone(), i));
        }

        if self.variant == Variant::Pessimistic {
            if let ExprKind::Function(idx) = &callee.kind {
                let def = &self.program.functions[*idx];
                for i in 0..def.params.len().min(args.len()) {
                    self.fg.add_edge(
                        FgNode::Arg(site.clone(), i),
                        FgNode::Param(def.id.clone(), i),
                    );
                }
                self.fg.add_edge(FgNode::Ret(def.id.clone()), res.clone());
            }
        }

        self.sites.insert(
            site.clone(),
            CallSite {
                kind,
                owner: self.owner(),
                argc: args.len(),
            },
        );
        res
    }
}
