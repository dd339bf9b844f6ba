//! JSON dump of the AST: every node is `{kind, loc, children}` plus a few
//! kind-specific attributes (`name`, `value`, `op`, `binding`, `dynamic`).

use serde_json::{json, Map, Value};

use super::ast::*;

pub fn dump_program(program: &Program) -> Value {
    let d = Dumper { program };
    json!({
        "schemaVersion": 1,
        "kind": "Program",
        "unit": program.unit,
        "children": program.body.iter().map(|s| d.stmt(s)).collect::<Vec<_>>(),
        "functions": program.functions.iter().map(|f| json!({
            "id": f.id,
            "name": f.name,
            "params": f.params.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
            "loc": f.loc,
        })).collect::<Vec<_>>(),
    })
}

struct Dumper<'a> {
    program: &'a Program,
}

fn node(kind: &str, loc: &crate::ids::SourceLoc, children: Vec<Value>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("kind".into(), json!(kind));
    m.insert("loc".into(), json!(loc));
    m.insert("children".into(), Value::Array(children));
    m
}

fn binding_text(b: &Option<Binding>) -> Value {
    match b {
        None => Value::Null,
        Some(Binding::Local { .. }) => json!("local"),
        Some(Binding::Param { index, .. }) => json!(format!("param:{index}")),
        Some(Binding::Outer { .. }) => json!("outer"),
        Some(Binding::Global) => json!("global"),
    }
}

impl Dumper<'_> {
    fn function(&self, idx: usize) -> Value {
        let f = &self.program.functions[idx];
        let mut m = node(
            "Function",
            &f.loc,
            f.body.iter().map(|s| self.stmt(s)).collect(),
        );
        m.insert("id".into(), json!(f.id));
        Value::Object(m)
    }

    fn stmts(&self, stmts: &[Stmt]) -> Vec<Value> {
        stmts.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&self, s: &Stmt) -> Value {
        let m = match &s.kind {
            StmtKind::Var {
                name,
                init,
                binding,
            } => {
                let mut m = node("Var", &s.loc, init.iter().map(|e| self.expr(e)).collect());
                m.insert("name".into(), json!(name));
                m.insert("binding".into(), binding_text(binding));
                m
            }
            StmtKind::FunctionDecl(idx) => node("FunctionDecl", &s.loc, vec![self.function(*idx)]),
            StmtKind::Return(e) => node("Return", &s.loc, e.iter().map(|e| self.expr(e)).collect()),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut ch = vec![self.expr(cond), json!(self.stmts(then_branch))];
                if let Some(e) = else_branch {
                    ch.push(json!(self.stmts(e)));
                }
                node("If", &s.loc, ch)
            }
            StmtKind::While { cond, body } => node(
                "While",
                &s.loc,
                vec![self.expr(cond), json!(self.stmts(body))],
            ),
            StmtKind::ForIn { var, object, body } => {
                let mut m = node(
                    "ForIn",
                    &s.loc,
                    vec![self.expr(object), json!(self.stmts(body))],
                );
                m.insert("name".into(), json!(var.name));
                m.insert("binding".into(), binding_text(&var.binding));
                m
            }
            StmtKind::Block(b) => node("Block", &s.loc, self.stmts(b)),
            StmtKind::Expr(e) => node("ExprStmt", &s.loc, vec![self.expr(e)]),
            StmtKind::Empty => node("Empty", &s.loc, vec![]),
        };
        Value::Object(m)
    }

    fn expr(&self, e: &Expr) -> Value {
        let m = match &e.kind {
            ExprKind::Num(n) => {
                let mut m = node("Num", &e.loc, vec![]);
                m.insert("value".into(), json!(n));
                m
            }
            ExprKind::Str(s) => {
                let mut m = node("Str", &e.loc, vec![]);
                m.insert("value".into(), json!(s));
                m
            }
            ExprKind::Bool(b) => {
                let mut m = node("Bool", &e.loc, vec![]);
                m.insert("value".into(), json!(b));
                m
            }
            ExprKind::Null => node("Null", &e.loc, vec![]),
            ExprKind::This => node("This", &e.loc, vec![]),
            ExprKind::Ident { name, binding } => {
                let mut m = node("Ident", &e.loc, vec![]);
                m.insert("name".into(), json!(name));
                m.insert("binding".into(), binding_text(binding));
                m
            }
            ExprKind::Function(idx) => return self.function(*idx),
            ExprKind::Object(props) => node(
                "Object",
                &e.loc,
                props
                    .iter()
                    .map(|p| {
                        let child = match &p.value {
                            PropInit::Data(v) => self.expr(v),
                            PropInit::Getter(i) | PropInit::Setter(i) => self.function(*i),
                        };
                        let mut m = node("Property", &p.loc, vec![child]);
                        m.insert("name".into(), json!(p.key));
                        Value::Object(m)
                    })
                    .collect(),
            ),
            ExprKind::Array(items) => {
                node("Array", &e.loc, items.iter().map(|i| self.expr(i)).collect())
            }
            ExprKind::Member { object, prop } => {
                let mut ch = vec![self.expr(object)];
                let mut m = match prop {
                    PropName::Static { name, .. } => {
                        let mut m = node("Member", &e.loc, vec![]);
                        m.insert("name".into(), json!(name));
                        m.insert("dynamic".into(), json!(false));
                        m
                    }
                    PropName::Dynamic(n) => {
                        ch.push(self.expr(n));
                        let mut m = node("Member", &e.loc, vec![]);
                        m.insert("dynamic".into(), json!(true));
                        m
                    }
                };
                m.insert("children".into(), Value::Array(ch));
                m
            }
            ExprKind::Call { callee, args } => {
                let mut ch = vec![self.expr(callee)];
                ch.extend(args.iter().map(|a| self.expr(a)));
                node("Call", &e.loc, ch)
            }
            ExprKind::Assign { target, value } => {
                node("Assign", &e.loc, vec![self.expr(target), self.expr(value)])
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let mut m = node("Binary", &e.loc, vec![self.expr(lhs), self.expr(rhs)]);
                m.insert("op".into(), json!(op.symbol()));
                m
            }
            ExprKind::Unary { op, expr } => {
                let mut m = node("Unary", &e.loc, vec![self.expr(expr)]);
                m.insert(
                    "op".into(),
                    json!(match op {
                        UnOp::Not => "!",
                        UnOp::Neg => "-",
                    }),
                );
                m
            }
        };
        Value::Object(m)
    }
}
