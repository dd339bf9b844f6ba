//! Source printer. Output reparses to a structurally identical program.

use super::ast::*;

pub fn number_text(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        && !matches!(
            s,
            "function" | "var" | "return" | "if" | "else" | "while" | "for" | "in" | "true"
                | "false" | "null" | "this"
        )
}

pub fn print_program(program: &Program) -> String {
    let mut p = Printer {
        program,
        out: String::new(),
        indent: 0,
    };
    for s in &program.body {
        p.stmt(s);
    }
    p.out
}

struct Printer<'a> {
    program: &'a Program,
    out: String,
    indent: usize,
}

impl Printer<'_> {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, head: &str, stmts: &[Stmt], tail: &str) {
        self.line(&format!("{head} {{"));
        self.indent += 1;
        for s in stmts {
            self.stmt(s);
        }
        self.indent -= 1;
        self.line(&format!("}}{tail}"));
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Var { name, init, .. } => match init {
                Some(e) => {
                    let e = self.expr(e);
                    self.line(&format!("var {name} = {e};"))
                }
                None => self.line(&format!("var {name};")),
            },
            StmtKind::FunctionDecl(idx) => {
                let f = self.function_text(*idx);
                for l in f.lines() {
                    self.line(l);
                }
            }
            StmtKind::Return(e) => match e {
                Some(e) => {
                    let e = self.expr(e);
                    self.line(&format!("return {e};"))
                }
                None => self.line("return;"),
            },
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.expr(cond);
                match else_branch {
                    None => self.block(&format!("if ({c})"), then_branch, ""),
                    Some(e) => {
                        self.block(&format!("if ({c})"), then_branch, "");
                        self.block("else", e, "");
                    }
                }
            }
            StmtKind::While { cond, body } => {
                let c = self.expr(cond);
                self.block(&format!("while ({c})"), body, "");
            }
            StmtKind::ForIn { var, object, body } => {
                let o = self.expr(object);
                let decl = if var.declared { "var " } else { "" };
                self.block(&format!("for ({decl}{} in {o})", var.name), body, "");
            }
            StmtKind::Block(b) => {
                self.line("{");
                self.indent += 1;
                for s in b {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
            StmtKind::Expr(e) => {
                let e = self.expr(e);
                self.line(&format!("{e};"));
            }
            StmtKind::Empty => self.line(";"),
        }
    }

    fn function_text(&self, idx: usize) -> String {
        let f = &self.program.functions[idx];
        let params: Vec<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
        let head = match f.kind {
            FunctionKind::Getter => format!("get {}", prop_key(f.name.as_deref().unwrap_or(""))),
            FunctionKind::Setter => format!("set {}", prop_key(f.name.as_deref().unwrap_or(""))),
            _ => match &f.name {
                Some(n) => format!("function {n}"),
                None => "function".to_string(),
            },
        };
        let mut inner = Printer {
            program: self.program,
            out: String::new(),
            indent: 1,
        };
        for s in &f.body {
            inner.stmt(s);
        }
        format!("{head}({}) {{\n{}}}", params.join(", "), inner.out)
    }

    fn expr(&self, e: &Expr) -> String {
        match &e.kind {
            ExprKind::Num(n) => number_text(*n),
            ExprKind::Str(s) => quote(s),
            ExprKind::Bool(b) => b.to_string(),
            ExprKind::Null => "null".into(),
            ExprKind::This => "this".into(),
            ExprKind::Ident { name, .. } => name.clone(),
            ExprKind::Function(idx) => format!("({})", self.function_text(*idx)),
            ExprKind::Object(props) => {
                let parts: Vec<String> = props
                    .iter()
                    .map(|p| match &p.value {
                        PropInit::Data(v) => format!("{}: {}", prop_key(&p.key), self.expr(v)),
                        PropInit::Getter(i) | PropInit::Setter(i) => self.function_text(*i),
                    })
                    .collect();
                format!("{{{}}}", parts.join(", "))
            }
            ExprKind::Array(items) => {
                let parts: Vec<String> = items.iter().map(|i| self.expr(i)).collect();
                format!("[{}]", parts.join(", "))
            }
            ExprKind::Member { object, prop } => {
                let o = self.expr(object);
                match prop {
                    PropName::Static { name, bracketed } if !*bracketed && is_ident(name) => {
                        format!("{o}.{name}")
                    }
                    PropName::Static { name, .. } => format!("{o}[{}]", quote(name)),
                    PropName::Dynamic(n) => format!("{o}[{}]", self.expr(n)),
                }
            }
            ExprKind::Call { callee, args } => {
                let parts: Vec<String> = args.iter().map(|a| self.expr(a)).collect();
                format!("{}({})", self.expr(callee), parts.join(", "))
            }
            ExprKind::Assign { target, value } => {
                format!("({} = {})", self.expr(target), self.expr(value))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                format!("({} {} {})", self.expr(lhs), op.symbol(), self.expr(rhs))
            }
            ExprKind::Unary { op, expr } => {
                let sym = match op {
                    UnOp::Not => "!",
                    UnOp::Neg => "-",
                };
                format!("({sym}{})", self.expr(expr))
            }
        }
    }
}

fn prop_key(k: &str) -> String {
    if is_ident(k) {
        k.to_string()
    } else {
        quote(k)
    }
}
