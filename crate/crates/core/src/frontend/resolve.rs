use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::FrontendError;
use crate::ids::{ScopeId, SourceLoc, VarSlot};

/// Names visible to a unit beyond its own declarations.
pub type OuterLookup = dyn Fn(&str) -> Option<VarSlot>;

pub struct ResolveEnv<'a> {
    /// Predeclared globals (natives).
    pub globals: &'a BTreeSet<String>,
    /// Scope that receives the unit's top-level declarations. For ordinary
    /// programs this is the unit's own top level; code evaluated in a
    /// caller's scope passes the caller's scope instead.
    pub toplevel: Option<ScopeId>,
    /// Runtime lookup for names declared outside the unit.
    pub outer: Option<&'a OuterLookup>,
}

#[derive(Default)]
struct Decls {
    params: Vec<String>,
    locals: BTreeSet<String>,
}

/// Resolves every variable reference against the program's lexical scopes
/// and the predeclared globals.
pub fn resolve_bindings(
    program: Program,
    globals: &BTreeSet<String>,
) -> Result<BoundProgram, FrontendError> {
    resolve_with(
        program,
        &ResolveEnv {
            globals,
            toplevel: None,
            outer: None,
        },
    )
}

pub fn resolve_with(mut program: Program, env: &ResolveEnv<'_>) -> Result<BoundProgram, FrontendError> {
    let top_scope = env
        .toplevel
        .clone()
        .unwrap_or_else(|| ScopeId::Toplevel(program.unit.clone()));
    let mut decls: Vec<Decls> = Vec::with_capacity(program.functions.len());
    for (i, f) in program.functions.iter().enumerate() {
        let mut d = Decls {
            params: f.params.iter().map(|p| p.name.clone()).collect(),
            locals: BTreeSet::new(),
        };
        collect_decls(&program, &f.body, &mut d.locals);
        if f.kind == FunctionKind::Expression {
            if let Some(name) = &f.name {
                if !d.params.contains(name) {
                    d.locals.insert(name.clone());
                }
            }
        }
        debug_assert_eq!(decls.len(), i);
        decls.push(d);
    }
    let mut top = BTreeSet::new();
    collect_decls(&program, &program.body, &mut top);

    let resolver = Resolver {
        program: &program,
        decls: &decls,
        top: &top,
        top_scope,
        env,
    };
    let mut bindings = BTreeMap::new();
    resolver.collect(&program.body, None, &mut bindings)?;
    for (i, f) in program.functions.iter().enumerate() {
        resolver.collect(&f.body, Some(i), &mut bindings)?;
    }

    let Program { body, functions, .. } = &mut program;
    apply(body, &bindings);
    for f in functions.iter_mut() {
        apply(&mut f.body, &bindings);
    }
    Ok(BoundProgram { program })
}

/// Declarations made directly in a body (not inside nested functions).
fn collect_decls(program: &Program, stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Var { name, .. } => {
                out.insert(name.clone());
            }
            StmtKind::FunctionDecl(idx) => {
                if let Some(name) = &program.functions[*idx].name {
                    out.insert(name.clone());
                }
            }
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_decls(program, then_branch, out);
                if let Some(b) = else_branch {
                    collect_decls(program, b, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => collect_decls(program, body, out),
            StmtKind::ForIn { var, body, .. } => {
                if var.declared {
                    out.insert(var.name.clone());
                }
                collect_decls(program, body, out);
            }
            StmtKind::Return(_) | StmtKind::Expr(_) | StmtKind::Empty => {}
        }
    }
}

struct Resolver<'a> {
    program: &'a Program,
    decls: &'a [Decls],
    top: &'a BTreeSet<String>,
    top_scope: ScopeId,
    env: &'a ResolveEnv<'a>,
}

impl Resolver<'_> {
    fn scope(&self, func: Option<usize>) -> ScopeId {
        match func {
            Some(i) => ScopeId::Func(self.program.functions[i].id.clone()),
            None => self.top_scope.clone(),
        }
    }

    fn lookup(&self, name: &str, func: Option<usize>, loc: &SourceLoc) -> Result<Binding, FrontendError> {
        let mut cur = func;
        let mut own = true;
        while let Some(i) = cur {
            let d = &self.decls[i];
            if let Some(index) = d.params.iter().rposition(|p| p == name) {
                let fid = self.program.functions[i].id.clone();
                return Ok(if own {
                    Binding::Param { func: fid, index }
                } else {
                    Binding::Outer {
                        scope: ScopeId::Func(fid),
                        param: Some(index),
                    }
                });
            }
            if d.locals.contains(name) {
                let scope = self.scope(Some(i));
                return Ok(if own {
                    Binding::Local { scope }
                } else {
                    Binding::Outer { scope, param: None }
                });
            }
            own = false;
            cur = self.program.functions[i].parent;
        }
        if self.top.contains(name) {
            let scope = self.top_scope.clone();
            return Ok(if own {
                Binding::Local { scope }
            } else {
                Binding::Outer { scope, param: None }
            });
        }
        if let Some(outer) = self.env.outer {
            if let Some(slot) = outer(name) {
                return Ok(self.binding_for_outer_slot(slot, own));
            }
        }
        if self.env.globals.contains(name) {
            return Ok(Binding::Global);
        }
        Err(FrontendError::UnboundVariable {
            name: name.to_string(),
            loc: loc.clone(),
        })
    }

    fn binding_for_outer_slot(&self, slot: VarSlot, own: bool) -> Binding {
        match slot {
            VarSlot::Var { scope, .. } => {
                if own && scope == self.top_scope {
                    Binding::Local { scope }
                } else {
                    Binding::Outer { scope, param: None }
                }
            }
            VarSlot::Param { func, index } => {
                let scope = ScopeId::Func(func.clone());
                if own && scope == self.top_scope {
                    Binding::Param { func, index }
                } else {
                    Binding::Outer {
                        scope,
                        param: Some(index),
                    }
                }
            }
            VarSlot::Return { .. } | VarSlot::Global { .. } => Binding::Global,
        }
    }

    fn collect(
        &self,
        stmts: &[Stmt],
        func: Option<usize>,
        out: &mut BTreeMap<SourceLoc, Binding>,
    ) -> Result<(), FrontendError> {
        for s in stmts {
            match &s.kind {
                StmtKind::Var { name, init, .. } => {
                    out.insert(s.loc.clone(), self.lookup(name, func, &s.loc)?);
                    if let Some(e) = init {
                        self.collect_expr(e, func, out)?;
                    }
                }
                StmtKind::FunctionDecl(_) | StmtKind::Empty => {}
                StmtKind::Return(e) => {
                    if let Some(e) = e {
                        self.collect_expr(e, func, out)?;
                    }
                }
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    self.collect_expr(cond, func, out)?;
                    self.collect(then_branch, func, out)?;
                    if let Some(b) = else_branch {
                        self.collect(b, func, out)?;
                    }
                }
                StmtKind::While { cond, body } => {
                    self.collect_expr(cond, func, out)?;
                    self.collect(body, func, out)?;
                }
                StmtKind::ForIn { var, object, body } => {
                    out.insert(var.loc.clone(), self.lookup(&var.name, func, &var.loc)?);
                    self.collect_expr(object, func, out)?;
                    self.collect(body, func, out)?;
                }
                StmtKind::Block(b) => self.collect(b, func, out)?,
                StmtKind::Expr(e) => self.collect_expr(e, func, out)?,
            }
        }
        Ok(())
    }

    fn collect_expr(
        &self,
        e: &Expr,
        func: Option<usize>,
        out: &mut BTreeMap<SourceLoc, Binding>,
    ) -> Result<(), FrontendError> {
        match &e.kind {
            ExprKind::Ident { name, .. } => {
                out.insert(e.loc.clone(), self.lookup(name, func, &e.loc)?);
            }
            ExprKind::Num(_)
            | ExprKind::Str(_)
            | ExprKind::Bool(_)
            | ExprKind::Null
            | ExprKind::This
            | ExprKind::Function(_) => {}
            ExprKind::Object(props) => {
                for p in props {
                    if let PropInit::Data(v) = &p.value {
                        self.collect_expr(v, func, out)?;
                    }
                }
            }
            ExprKind::Array(items) => {
                for i in items {
                    self.collect_expr(i, func, out)?;
                }
            }
            ExprKind::Member { object, prop } => {
                self.collect_expr(object, func, out)?;
                if let PropName::Dynamic(n) = prop {
                    self.collect_expr(n, func, out)?;
                }
            }
            ExprKind::Call { callee, args } => {
                self.collect_expr(callee, func, out)?;
                for a in args {
                    self.collect_expr(a, func, out)?;
                }
            }
            ExprKind::Assign { target, value } => {
                self.collect_expr(target, func, out)?;
                self.collect_expr(value, func, out)?;
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.collect_expr(lhs, func, out)?;
                self.collect_expr(rhs, func, out)?;
            }
            ExprKind::Unary { expr, .. } => self.collect_expr(expr, func, out)?,
        }
        Ok(())
    }
}

fn apply(stmts: &mut [Stmt], b: &BTreeMap<SourceLoc, Binding>) {
    for s in stmts {
        let loc = s.loc.clone();
        match &mut s.kind {
            StmtKind::Var { init, binding, .. } => {
                *binding = b.get(&loc).cloned();
                if let Some(e) = init {
                    apply_expr(e, b);
                }
            }
            StmtKind::FunctionDecl(_) | StmtKind::Empty => {}
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    apply_expr(e, b);
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                apply_expr(cond, b);
                apply(then_branch, b);
                if let Some(e) = else_branch {
                    apply(e, b);
                }
            }
            StmtKind::While { cond, body } => {
                apply_expr(cond, b);
                apply(body, b);
            }
            StmtKind::ForIn { var, object, body } => {
                var.binding = b.get(&var.loc).cloned();
                apply_expr(object, b);
                apply(body, b);
            }
            StmtKind::Block(body) => apply(body, b),
            StmtKind::Expr(e) => apply_expr(e, b),
        }
    }
}

fn apply_expr(e: &mut Expr, b: &BTreeMap<SourceLoc, Binding>) {
    let loc = e.loc.clone();
    match &mut e.kind {
        ExprKind::Ident { binding, .. } => *binding = b.get(&loc).cloned(),
        ExprKind::Num(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::This
        | ExprKind::Function(_) => {}
        ExprKind::Object(props) => {
            for p in props {
                if let PropInit::Data(v) = &mut p.value {
                    apply_expr(v, b);
                }
            }
        }
        ExprKind::Array(items) => items.iter_mut().for_each(|i| apply_expr(i, b)),
        ExprKind::Member { object, prop } => {
            apply_expr(object, b);
            if let PropName::Dynamic(n) = prop {
                apply_expr(n, b);
            }
        }
        ExprKind::Call { callee, args } => {
            apply_expr(callee, b);
            args.iter_mut().for_each(|a| apply_expr(a, b));
        }
        ExprKind::Assign { target, value } => {
            apply_expr(target, b);
            apply_expr(value, b);
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            apply_expr(lhs, b);
            apply_expr(rhs, b);
        }
        ExprKind::Unary { expr, .. } => apply_expr(expr, b),
    }
}
