//! Where the name of a dynamic property access comes from, judged from
//! the enclosing function alone.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{
    walk_program, walk_stmts, BinOp, Binding, BoundProgram, Expr, ExprKind, PropInit, PropName, Stmt, StmtKind,
    Visitor,
};
use crate::ids::{SourceLoc, VarSlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum PropertyNameCategory {
    ForInLoop,
    ParameterPassed,
    OuterScopeVariable,
    PropertyRead,
    StringConcat { const_prefix_or_suffix: bool },
    LocalComputation,
    Unknown,
}

impl PropertyNameCategory {
    /// Stable key used in reports.
    pub fn key(self) -> &'static str {
        match self {
            PropertyNameCategory::ForInLoop => "ForInLoop",
            PropertyNameCategory::ParameterPassed => "ParameterPassed",
            PropertyNameCategory::OuterScopeVariable => "OuterScopeVariable",
            PropertyNameCategory::PropertyRead => "PropertyRead",
            PropertyNameCategory::StringConcat {
                const_prefix_or_suffix: true,
            } => "StringConcat(constPrefixOrSuffix)",
            PropertyNameCategory::StringConcat {
                const_prefix_or_suffix: false,
            } => "StringConcat",
            PropertyNameCategory::LocalComputation => "LocalComputation",
            PropertyNameCategory::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for PropertyNameCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("no dynamic property access at {0}")]
    NotADynamicAccess(SourceLoc),
}

/// Finds the dynamic access at a location and its enclosing function.
struct FindAccess<'p> {
    loc: &'p SourceLoc,
    found: Option<(&'p Expr, Option<usize>)>,
}

impl<'p> Walk<'p> for FindAccess<'p> {
    fn expr(&mut self, e: &'p Expr, func: Option<usize>) {
        if let ExprKind::Member {
            prop: PropName::Dynamic(name),
            ..
        } = &e.kind
        {
            if e.loc == *self.loc && self.found.is_none() {
                self.found = Some((name, func));
            }
        }
    }
}

/// Whether the access sits under some statements of its own function.
struct Contains<'a> {
    loc: &'a SourceLoc,
    func: Option<usize>,
    hit: bool,
}

impl Visitor for Contains<'_> {
    fn expr(&mut self, e: &Expr, func: Option<usize>) {
        if func == self.func && e.loc == *self.loc {
            self.hit = true;
        }
    }
}

/// How a function defines its locals: for-in variables and assigned
/// expressions, in source order.
#[derive(Default)]
struct Defs<'p> {
    for_in: Vec<(VarSlot, &'p [Stmt])>,
    assigned: Vec<(VarSlot, &'p Expr)>,
}

struct CollectDefs<'p> {
    func: Option<usize>,
    defs: Defs<'p>,
}

impl<'p> Walk<'p> for CollectDefs<'p> {
    fn stmt(&mut self, s: &'p Stmt, func: Option<usize>) {
        if func != self.func {
            return;
        }
        match &s.kind {
            StmtKind::Var {
                name,
                init: Some(init),
                binding: Some(b),
            } => self.defs.assigned.push((b.slot(name), init)),
            StmtKind::ForIn { var, body, .. } => {
                if let Some(b) = &var.binding {
                    self.defs.for_in.push((b.slot(&var.name), body));
                }
            }
            _ => {}
        }
    }

    fn expr(&mut self, e: &'p Expr, func: Option<usize>) {
        if func != self.func {
            return;
        }
        if let ExprKind::Assign { target, value } = &e.kind {
            if let ExprKind::Ident {
                name,
                binding: Some(b),
            } = &target.kind
            {
                self.defs.assigned.push((b.slot(name), value));
            }
        }
    }
}

/// Like [`Visitor`], but handed references that live as long as the
/// program.
trait Walk<'p> {
    fn stmt(&mut self, _s: &'p Stmt, _func: Option<usize>) {}
    fn expr(&mut self, _e: &'p Expr, _func: Option<usize>) {}
}

fn walk_stmts_p<'p>(p: &'p BoundProgram, ss: &'p [Stmt], f: Option<usize>, w: &mut impl Walk<'p>) {
    for st in ss {
        w.stmt(st, f);
        match &st.kind {
            StmtKind::Var { init: Some(x), .. } | StmtKind::Return(Some(x)) | StmtKind::Expr(x) => {
                walk_expr_p(p, x, f, w)
            }
            StmtKind::FunctionDecl(i) => walk_stmts_p(p, &p.functions[*i].body, Some(*i), w),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                walk_expr_p(p, cond, f, w);
                walk_stmts_p(p, then_branch, f, w);
                if let Some(b) = else_branch {
                    walk_stmts_p(p, b, f, w);
                }
            }
            StmtKind::While { cond, body } | StmtKind::ForIn { object: cond, body, .. } => {
                walk_expr_p(p, cond, f, w);
                walk_stmts_p(p, body, f, w);
            }
            StmtKind::Block(b) => walk_stmts_p(p, b, f, w),
            _ => {}
        }
    }
}

fn walk_expr_p<'p>(p: &'p BoundProgram, x: &'p Expr, f: Option<usize>, w: &mut impl Walk<'p>) {
    w.expr(x, f);
    match &x.kind {
        ExprKind::Function(i) => walk_stmts_p(p, &p.functions[*i].body, Some(*i), w),
        ExprKind::Object(props) => {
            for pr in props {
                match &pr.value {
                    PropInit::Data(v) => walk_expr_p(p, v, f, w),
                    PropInit::Getter(i) | PropInit::Setter(i) => walk_stmts_p(p, &p.functions[*i].body, Some(*i), w),
                }
            }
        }
        ExprKind::Array(items) => {
            for i in items {
                walk_expr_p(p, i, f, w);
            }
        }
        ExprKind::Member { object, prop } => {
            walk_expr_p(p, object, f, w);
            if let PropName::Dynamic(n) = prop {
                walk_expr_p(p, n, f, w);
            }
        }
        ExprKind::Call { callee, args } => {
            walk_expr_p(p, callee, f, w);
            for a in args {
                walk_expr_p(p, a, f, w);
            }
        }
        ExprKind::Assign { target: l, value: r } | ExprKind::Binary { lhs: l, rhs: r, .. } => {
            walk_expr_p(p, l, f, w);
            walk_expr_p(p, r, f, w);
        }
        ExprKind::Unary { expr, .. } => walk_expr_p(p, expr, f, w),
        _ => {}
    }
}

struct Classifier<'p> {
    program: &'p BoundProgram,
    access: &'p SourceLoc,
    func: Option<usize>,
    defs: Defs<'p>,
    visiting: BTreeSet<VarSlot>,
}

impl<'p> Classifier<'p> {
    fn encloses_access(&self, body: &[Stmt]) -> bool {
        let mut c = Contains {
            loc: self.access,
            func: self.func,
            hit: false,
        };
        walk_stmts(self.program, body, self.func, &mut c);
        c.hit
    }

    fn classify(&mut self, e: &'p Expr) -> PropertyNameCategory {
        use PropertyNameCategory as C;
        match &e.kind {
            ExprKind::Str(_) | ExprKind::Num(_) | ExprKind::Bool(_) | ExprKind::Null => C::LocalComputation,
            ExprKind::Member { .. } => C::PropertyRead,
            ExprKind::Binary { op: BinOp::Add, .. } => {
                let leaves = concat_leaves(e);
                if leaves.iter().all(|l| matches!(l.kind, ExprKind::Num(_))) {
                    return C::LocalComputation;
                }
                let is_str = |l: &&Expr| matches!(l.kind, ExprKind::Str(_));
                C::StringConcat {
                    const_prefix_or_suffix: leaves.first().is_some_and(is_str) || leaves.last().is_some_and(is_str),
                }
            }
            ExprKind::Binary { lhs, rhs, .. } => self.combine_local(&[lhs, rhs]),
            ExprKind::Unary { expr, .. } => self.combine_local(&[expr]),
            ExprKind::Assign { value, .. } => self.classify(value),
            ExprKind::Ident {
                name,
                binding: Some(b),
            } => self.classify_var(name, b),
            _ => C::Unknown,
        }
    }

    /// Local when every operand is; unknown otherwise.
    fn combine_local(&mut self, parts: &[&'p Expr]) -> PropertyNameCategory {
        let all_local = parts
            .iter()
            .all(|p| self.classify(p) == PropertyNameCategory::LocalComputation);
        if all_local {
            PropertyNameCategory::LocalComputation
        } else {
            PropertyNameCategory::Unknown
        }
    }

    fn classify_var(&mut self, name: &str, b: &Binding) -> PropertyNameCategory {
        use PropertyNameCategory as C;
        let slot = b.slot(name);
        let loops: Vec<&[Stmt]> = self
            .defs
            .for_in
            .iter()
            .filter(|(s, _)| *s == slot)
            .map(|(_, body)| *body)
            .collect();
        if loops.iter().any(|body| self.encloses_access(body)) {
            return C::ForInLoop;
        }
        match b {
            Binding::Param { .. } => return C::ParameterPassed,
            Binding::Outer { .. } | Binding::Global => return C::OuterScopeVariable,
            Binding::Local { .. } => {}
        }
        if !loops.is_empty() {
            return C::ForInLoop;
        }
        if !self.visiting.insert(slot.clone()) {
            return C::LocalComputation;
        }
        let sources: Vec<&'p Expr> = self
            .defs
            .assigned
            .iter()
            .filter(|(s, _)| *s == slot)
            .map(|(_, e)| *e)
            .collect();
        let mut result = C::LocalComputation;
        for src in sources {
            let c = self.classify(src);
            if c != C::LocalComputation {
                result = c;
                break;
            }
        }
        self.visiting.remove(&slot);
        result
    }
}

/// Operands of a chain of `+`, left to right.
fn concat_leaves(e: &Expr) -> Vec<&Expr> {
    match &e.kind {
        ExprKind::Binary {
            op: BinOp::Add,
            lhs,
            rhs,
        } => {
            let mut v = concat_leaves(lhs);
            v.extend(concat_leaves(rhs));
            v
        }
        _ => vec![e],
    }
}

/// Classifies the name expression of the dynamic access at `access_loc`.
pub fn classify_property_name(
    access_loc: &SourceLoc,
    program: &BoundProgram,
) -> Result<PropertyNameCategory, LabelError> {
    let mut finder = FindAccess {
        loc: access_loc,
        found: None,
    };
    walk_stmts_p(program, &program.body, None, &mut finder);
    let Some((name_expr, func)) = finder.found else {
        return Err(LabelError::NotADynamicAccess(access_loc.clone()));
    };
    let mut collect = CollectDefs {
        func,
        defs: Defs::default(),
    };
    walk_stmts_p(program, &program.body, None, &mut collect);
    let mut c = Classifier {
        program,
        access: access_loc,
        func,
        defs: collect.defs,
        visiting: BTreeSet::new(),
    };
    Ok(c.classify(name_expr))
}

/// Locations of all dynamic property accesses, in source order.
pub fn dynamic_access_locs(program: &BoundProgram) -> Vec<SourceLoc> {
    struct All(Vec<SourceLoc>);
    impl Visitor for All {
        fn expr(&mut self, e: &Expr, _: Option<usize>) {
            if matches!(&e.kind, ExprKind::Member { prop: PropName::Dynamic(_), .. }) {
                self.0.push(e.loc.clone());
            }
        }
    }
    let mut all = All(Vec::new());
    walk_program(program, &mut all);
    all.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_program, resolve_bindings};
    use crate::interp::NativeConfig;

    use PropertyNameCategory as C;

    fn categories(src: &str) -> Vec<PropertyNameCategory> {
        let natives = NativeConfig::default();
        let p = resolve_bindings(parse_program(src, "t").unwrap(), &natives.global_names()).unwrap();
        dynamic_access_locs(&p)
            .iter()
            .map(|l| classify_property_name(l, &p).unwrap())
            .collect()
    }

    #[test]
    fn one_access_per_category() {
        let src = "var o = {};
var outer = \"m\";
for (var k in o) { o[k](); }
function g(name) { o[name](); }
function h() { o[outer](); }
var cfg = { key: \"m\" };
o[cfg.key]();
var u = \"a\";
var v = \"b\";
o[\"pre\" + v]();
o[u + v]();
var w = \"m\";
var z = w;
o[z]();
";
        assert_eq!(
            categories(src),
            [
                C::ForInLoop,
                C::ParameterPassed,
                C::OuterScopeVariable,
                C::PropertyRead,
                C::StringConcat {
                    const_prefix_or_suffix: true
                },
                C::StringConcat {
                    const_prefix_or_suffix: false
                },
                C::LocalComputation,
            ]
        );
    }

    #[test]
    fn phone_book_name_is_a_constant_concat() {
        assert_eq!(
            categories("var obj = {};\nobj[\"My\" + \"Phone\"];"),
            [C::StringConcat {
                const_prefix_or_suffix: true
            }]
        );
    }

    #[test]
    fn locals_follow_their_definitions() {
        let src = "function f(p) {\n  var a = p;\n  var b = a;\n  return {}[b];\n}\nfunction g() {\n  var n = random();\n  return {}[n];\n}";
        assert_eq!(categories(src), [C::ParameterPassed, C::Unknown]);
    }

    #[test]
    fn loop_variable_used_after_the_loop() {
        let src = "var o = {};\nvar k;\nfor (k in o) { }\no[k];";
        assert_eq!(categories(src), [C::ForInLoop]);
    }

    #[test]
    fn static_access_is_rejected() {
        let natives = NativeConfig::default();
        let p = resolve_bindings(parse_program("var o = {}; o.x;", "t").unwrap(), &natives.global_names()).unwrap();
        let loc = SourceLoc {
            unit: "t".into(),
            line: 1,
            col: 13,
            eval_depth: 0,
        };
        assert!(matches!(classify_property_name(&loc, &p), Err(LabelError::NotADynamicAccess(_))));
    }
}
