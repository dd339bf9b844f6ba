use crate::ids::{FunctionId, ScopeId, SourceLoc, VarSlot};

/// How a variable reference relates to the function it appears in.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binding {
    /// Declared in the scope that contains the reference.
    Local { scope: ScopeId },
    /// Formal parameter of the function that contains the reference.
    Param { func: FunctionId, index: usize },
    /// Declared by an enclosing scope. `param` is set when the outer
    /// binding is itself a formal parameter.
    Outer { scope: ScopeId, param: Option<usize> },
    /// Predeclared global (native).
    Global,
}

impl Binding {
    /// The canonical variable slot for `name` under this binding.
    pub fn slot(&self, name: &str) -> VarSlot {
        match self {
            Binding::Local { scope } | Binding::Outer { scope, param: None } => VarSlot::Var {
                scope: scope.clone(),
                name: name.to_string(),
            },
            Binding::Param { func, index } => VarSlot::Param {
                func: func.clone(),
                index: *index,
            },
            Binding::Outer {
                scope,
                param: Some(index),
            } => match scope {
                ScopeId::Func(func) => VarSlot::Param {
                    func: func.clone(),
                    index: *index,
                },
                ScopeId::Toplevel(_) => unreachable!("top level has no parameters"),
            },
            Binding::Global => VarSlot::Global {
                name: name.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    StrictEq,
    StrictNe,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::StrictEq => "===",
            BinOp::StrictNe => "!==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropName {
    /// A literal name, written `x.p` or `x["p"]` (`bracketed`).
    Static { name: String, bracketed: bool },
    /// A computed name `x[e]`.
    Dynamic(Box<Expr>),
}

impl PropName {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, PropName::Dynamic(_))
    }

    pub fn static_name(&self) -> Option<&str> {
        match self {
            PropName::Static { name, .. } => Some(name),
            PropName::Dynamic(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropInit {
    Data(Expr),
    Getter(usize),
    Setter(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectProp {
    pub key: String,
    pub loc: SourceLoc,
    pub value: PropInit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub loc: SourceLoc,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
    This,
    Ident {
        name: String,
        binding: Option<Binding>,
    },
    /// Function literal; index into the program's function table.
    Function(usize),
    Object(Vec<ObjectProp>),
    Array(Vec<Expr>),
    /// Property access; `loc` of the enclosing `Expr` is the `.`/`[` token.
    Member {
        object: Box<Expr>,
        prop: PropName,
    },
    /// Call; `loc` of the enclosing `Expr` is the `(` token.
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Assign {
        target: Box<Expr>,
        value: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnOp,
        expr: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForInVar {
    pub name: String,
    pub loc: SourceLoc,
    pub declared: bool,
    pub binding: Option<Binding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub loc: SourceLoc,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Var {
        name: String,
        init: Option<Expr>,
        binding: Option<Binding>,
    },
    /// Function declaration; index into the function table.
    FunctionDecl(usize),
    Return(Option<Expr>),
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    ForIn {
        var: ForInVar,
        object: Expr,
        body: Vec<Stmt>,
    },
    Block(Vec<Stmt>),
    Expr(Expr),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Declaration,
    Expression,
    Getter,
    Setter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub id: FunctionId,
    pub name: Option<String>,
    pub kind: FunctionKind,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    /// Location of the `function` keyword (or accessor name).
    pub loc: SourceLoc,
    /// Lexically enclosing function, `None` at top level.
    pub parent: Option<usize>,
}

/// A parsed source unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub unit: String,
    pub eval_depth: u32,
    pub body: Vec<Stmt>,
    pub functions: Vec<FunctionDef>,
}

impl Program {
    pub fn function(&self, id: &FunctionId) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| &f.id == id)
    }

    pub fn function_index(&self, id: &FunctionId) -> Option<usize> {
        self.functions.iter().position(|f| &f.id == id)
    }

    pub fn scope_of(&self, func: Option<usize>) -> ScopeId {
        match func {
            Some(i) => ScopeId::Func(self.functions[i].id.clone()),
            None => ScopeId::Toplevel(self.unit.clone()),
        }
    }

    /// Statement list of a function body, or the top level for `None`.
    pub fn body_of(&self, func: Option<usize>) -> &[Stmt] {
        match func {
            Some(i) => &self.functions[i].body,
            None => &self.body,
        }
    }
}

/// A program whose identifiers carry resolved bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundProgram {
    pub program: Program,
}

impl std::ops::Deref for BoundProgram {
    type Target = Program;

    fn deref(&self) -> &Program {
        &self.program
    }
}

/// Visits expressions and statements in source order, tracking the
/// enclosing function. Function bodies are visited where the literal or
/// declaration occurs.
pub trait Visitor {
    fn expr(&mut self, _expr: &Expr, _func: Option<usize>) {}
    fn stmt(&mut self, _stmt: &Stmt, _func: Option<usize>) {}
}

pub fn walk_program<V: Visitor>(program: &Program, v: &mut V) {
    walk_stmts(program, &program.body, None, v);
}

pub fn walk_stmts<V: Visitor>(program: &Program, stmts: &[Stmt], func: Option<usize>, v: &mut V) {
    for s in stmts {
        walk_stmt(program, s, func, v);
    }
}

fn walk_function<V: Visitor>(program: &Program, idx: usize, v: &mut V) {
    walk_stmts(program, &program.functions[idx].body, Some(idx), v);
}

pub fn walk_stmt<V: Visitor>(program: &Program, stmt: &Stmt, func: Option<usize>, v: &mut V) {
    v.stmt(stmt, func);
    match &stmt.kind {
        StmtKind::Var { init, .. } => {
            if let Some(e) = init {
                walk_expr(program, e, func, v);
            }
        }
        StmtKind::FunctionDecl(idx) => walk_function(program, *idx, v),
        StmtKind::Return(e) => {
            if let Some(e) = e {
                walk_expr(program, e, func, v);
            }
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            walk_expr(program, cond, func, v);
            walk_stmts(program, then_branch, func, v);
            if let Some(b) = else_branch {
                walk_stmts(program, b, func, v);
            }
        }
        StmtKind::While { cond, body } => {
            walk_expr(program, cond, func, v);
            walk_stmts(program, body, func, v);
        }
        StmtKind::ForIn { object, body, .. } => {
            walk_expr(program, object, func, v);
            walk_stmts(program, body, func, v);
        }
        StmtKind::Block(b) => walk_stmts(program, b, func, v),
        StmtKind::Expr(e) => walk_expr(program, e, func, v),
        StmtKind::Empty => {}
    }
}

pub fn walk_expr<V: Visitor>(program: &Program, expr: &Expr, func: Option<usize>, v: &mut V) {
    v.expr(expr, func);
    match &expr.kind {
        ExprKind::Num(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::This
        | ExprKind::Ident { .. } => {}
        ExprKind::Function(idx) => walk_function(program, *idx, v),
        ExprKind::Object(props) => {
            for p in props {
                match &p.value {
                    PropInit::Data(e) => walk_expr(program, e, func, v),
                    PropInit::Getter(idx) | PropInit::Setter(idx) => {
                        walk_function(program, *idx, v)
                    }
                }
            }
        }
        ExprKind::Array(items) => {
            for e in items {
                walk_expr(program, e, func, v);
            }
        }
        ExprKind::Member { object, prop } => {
            walk_expr(program, object, func, v);
            if let PropName::Dynamic(e) = prop {
                walk_expr(program, e, func, v);
            }
        }
        ExprKind::Call { callee, args } => {
            walk_expr(program, callee, func, v);
            for a in args {
                walk_expr(program, a, func, v);
            }
        }
        ExprKind::Assign { target, value } => {
            walk_expr(program, target, func, v);
            walk_expr(program, value, func, v);
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(program, lhs, func, v);
            walk_expr(program, rhs, func, v);
        }
        ExprKind::Unary { expr, .. } => walk_expr(program, expr, func, v),
    }
}

/// Locations of every dynamic property access, in source order.
pub fn dynamic_accesses(program: &Program) -> Vec<SourceLoc> {
    struct Collect(Vec<SourceLoc>);
    impl Visitor for Collect {
        fn expr(&mut self, expr: &Expr, _func: Option<usize>) {
            if let ExprKind::Member {
                prop: PropName::Dynamic(_),
                ..
            } = &expr.kind
            {
                self.0.push(expr.loc.clone());
            }
        }
    }
    let mut c = Collect(Vec::new());
    walk_program(program, &mut c);
    c.0
}
