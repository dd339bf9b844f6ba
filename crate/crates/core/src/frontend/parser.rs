use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;
use crate::ids::{FunctionId, SourceLoc};

/// Parses a source unit. Function ids embed the unit name only when
/// `eval_depth > 0`, so ids of the main program read as `name@line:col`.
pub fn parse_unit(source: &str, unit: &str, eval_depth: u32) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        unit: unit.to_string(),
        eval_depth,
        functions: Vec::new(),
        current: None,
    };
    let mut body = Vec::new();
    while p.peek() != &Tok::Eof {
        body.push(p.statement()?);
    }
    Ok(Program {
        unit: unit.to_string(),
        eval_depth,
        body,
        functions: p.functions,
    })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    unit: String,
    eval_depth: u32,
    functions: Vec<FunctionDef>,
    current: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn loc(&self) -> SourceLoc {
        let t = &self.tokens[self.pos];
        SourceLoc::new(self.unit.clone(), t.line, t.col, self.eval_depth)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> SyntaxError {
        let t = &self.tokens[self.pos];
        SyntaxError::new(
            t.line,
            t.col,
            format!("expected {expected}, found {}", t.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, SyntaxError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(what))
        }
    }

    fn ident(&mut self) -> Result<(String, SourceLoc), SyntaxError> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok((name, loc))
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn statement(&mut self) -> Result<Stmt, SyntaxError> {
        let loc = self.loc();
        let kind = match self.peek() {
            Tok::Var => {
                self.advance();
                let (name, _) = self.ident()?;
                let init = if *self.peek() == Tok::Assign {
                    self.advance();
                    Some(self.expression()?)
                } else {
                    None
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Var {
                    name,
                    init,
                    binding: None,
                }
            }
            Tok::Function if matches!(self.peek_at(1), Tok::Ident(_)) => {
                let idx = self.function(FunctionKind::Declaration)?;
                StmtKind::FunctionDecl(idx)
            }
            Tok::Return => {
                self.advance();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expression()?)
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Tok::If => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expression()?;
                self.expect(Tok::RParen, "`)`")?;
                let then_branch = self.body()?;
                let else_branch = if *self.peek() == Tok::Else {
                    self.advance();
                    Some(self.body()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            Tok::While => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expression()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.body()?;
                StmtKind::While { cond, body }
            }
            Tok::For => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let declared = if *self.peek() == Tok::Var {
                    self.advance();
                    true
                } else {
                    false
                };
                let (name, var_loc) = self.ident()?;
                self.expect(Tok::In, "`in`")?;
                let object = self.expression()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.body()?;
                StmtKind::ForIn {
                    var: ForInVar {
                        name,
                        loc: var_loc,
                        declared,
                        binding: None,
                    },
                    object,
                    body,
                }
            }
            Tok::LBrace => StmtKind::Block(self.block()?),
            Tok::Semi => {
                self.advance();
                StmtKind::Empty
            }
            _ => {
                let e = self.expression()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { loc, kind })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error("`}`"));
            }
            stmts.push(self.statement()?);
        }
        self.advance();
        Ok(stmts)
    }

    fn body(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        if *self.peek() == Tok::LBrace {
            self.block()
        } else {
            Ok(vec![self.statement()?])
        }
    }

    fn function_id(&self, name: Option<&str>, loc: &SourceLoc) -> FunctionId {
        let name = name.unwrap_or("anon");
        if self.eval_depth == 0 {
            FunctionId(format!("{name}@{}:{}", loc.line, loc.col))
        } else {
            FunctionId(format!("{name}@{}:{}:{}", loc.unit, loc.line, loc.col))
        }
    }

    /// Parses `function name?(params) { body }` and registers it in the
    /// function table. The table is ordered by start position.
    fn function(&mut self, kind: FunctionKind) -> Result<usize, SyntaxError> {
        let loc = self.loc();
        self.expect(Tok::Function, "`function`")?;
        let name = match (kind, self.peek()) {
            (FunctionKind::Declaration, _) => Some(self.ident()?.0),
            (_, Tok::Ident(_)) => Some(self.ident()?.0),
            _ => None,
        };
        self.function_rest(kind, name, loc)
    }

    fn function_rest(
        &mut self,
        kind: FunctionKind,
        name: Option<String>,
        loc: SourceLoc,
    ) -> Result<usize, SyntaxError> {
        let idx = self.functions.len();
        self.functions.push(FunctionDef {
            id: self.function_id(name.as_deref(), &loc),
            name,
            kind,
            params: Vec::new(),
            body: Vec::new(),
            loc,
            parent: self.current,
        });
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (name, loc) = self.ident()?;
                params.push(Param { name, loc });
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let saved = self.current.replace(idx);
        let body = self.block();
        self.current = saved;
        let f = &mut self.functions[idx];
        f.params = params;
        f.body = body?;
        Ok(idx)
    }

    fn expression(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.equality()?;
        if *self.peek() == Tok::Assign {
            let loc = self.loc();
            if !matches!(lhs.kind, ExprKind::Ident { .. } | ExprKind::Member { .. }) {
                return Err(SyntaxError::new(
                    loc.line,
                    loc.col,
                    "invalid assignment target",
                ));
            }
            self.advance();
            let value = self.expression()?;
            return Ok(Expr {
                loc,
                kind: ExprKind::Assign {
                    target: Box::new(lhs),
                    value: Box::new(value),
                },
            });
        }
        Ok(lhs)
    }

    fn binary_level(
        &mut self,
        next: fn(&mut Self) -> Result<Expr, SyntaxError>,
        ops: &[(Tok, BinOp)],
    ) -> Result<Expr, SyntaxError> {
        let mut lhs = next(self)?;
        loop {
            let Some(op) = ops.iter().find(|(t, _)| t == self.peek()).map(|(_, o)| *o) else {
                return Ok(lhs);
            };
            let loc = self.loc();
            self.advance();
            let rhs = next(self)?;
            lhs = Expr {
                loc,
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            };
        }
    }

    fn equality(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(
            Self::relational,
            &[
                (Tok::EqEqEq, BinOp::StrictEq),
                (Tok::NotEqEq, BinOp::StrictNe),
                (Tok::EqEq, BinOp::Eq),
                (Tok::NotEq, BinOp::Ne),
            ],
        )
    }

    fn relational(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(
            Self::additive,
            &[
                (Tok::Lt, BinOp::Lt),
                (Tok::Gt, BinOp::Gt),
                (Tok::Le, BinOp::Le),
                (Tok::Ge, BinOp::Ge),
            ],
        )
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_level(
            Self::unary,
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
        )
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let op = match self.peek() {
            Tok::Bang => UnOp::Not,
            Tok::Minus => UnOp::Neg,
            _ => return self.postfix(),
        };
        let loc = self.loc();
        self.advance();
        let expr = self.unary()?;
        Ok(Expr {
            loc,
            kind: ExprKind::Unary {
                op,
                expr: Box::new(expr),
            },
        })
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.primary()?;
        loop {
            let loc = self.loc();
            match self.peek() {
                Tok::LParen => {
                    self.advance();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.expression()?);
                            if *self.peek() == Tok::Comma {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    e = Expr {
                        loc,
                        kind: ExprKind::Call {
                            callee: Box::new(e),
                            args,
                        },
                    };
                }
                Tok::Dot => {
                    self.advance();
                    let (name, _) = self.ident()?;
                    e = Expr {
                        loc,
                        kind: ExprKind::Member {
                            object: Box::new(e),
                            prop: PropName::Static {
                                name,
                                bracketed: false,
                            },
                        },
                    };
                }
                Tok::LBracket => {
                    self.advance();
                    let prop = match (self.peek().clone(), self.peek_at(1)) {
                        (Tok::Str(name), Tok::RBracket) => {
                            self.advance();
                            PropName::Static {
                                name,
                                bracketed: true,
                            }
                        }
                        _ => PropName::Dynamic(Box::new(self.expression()?)),
                    };
                    self.expect(Tok::RBracket, "`]`")?;
                    e = Expr {
                        loc,
                        kind: ExprKind::Member {
                            object: Box::new(e),
                            prop,
                        },
                    };
                }
                _ => return Ok(e),
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let loc = self.loc();
        let kind = match self.peek().clone() {
            Tok::Num(n) => {
                self.advance();
                ExprKind::Num(n)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::True => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Null => {
                self.advance();
                ExprKind::Null
            }
            Tok::This => {
                self.advance();
                ExprKind::This
            }
            Tok::Ident(name) => {
                self.advance();
                ExprKind::Ident {
                    name,
                    binding: None,
                }
            }
            Tok::Function => ExprKind::Function(self.function(FunctionKind::Expression)?),
            Tok::LParen => {
                self.advance();
                let e = self.expression()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(e);
            }
            Tok::LBracket => {
                self.advance();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        items.push(self.expression()?);
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, "`]`")?;
                ExprKind::Array(items)
            }
            Tok::LBrace => ExprKind::Object(self.object_literal()?),
            _ => return Err(self.error("expression")),
        };
        Ok(Expr { loc, kind })
    }

    fn object_literal(&mut self) -> Result<Vec<ObjectProp>, SyntaxError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut props = Vec::new();
        while *self.peek() != Tok::RBrace {
            let loc = self.loc();
            let accessor = match (self.peek(), self.peek_at(1)) {
                (Tok::Ident(w), Tok::Ident(_) | Tok::Str(_)) if w == "get" => {
                    Some(FunctionKind::Getter)
                }
                (Tok::Ident(w), Tok::Ident(_) | Tok::Str(_)) if w == "set" => {
                    Some(FunctionKind::Setter)
                }
                _ => None,
            };
            if let Some(kind) = accessor {
                self.advance();
                let key = self.prop_key()?;
                let idx = self.function_rest(kind, Some(key.clone()), loc.clone())?;
                let value = if kind == FunctionKind::Getter {
                    PropInit::Getter(idx)
                } else {
                    PropInit::Setter(idx)
                };
                props.push(ObjectProp { key, loc, value });
            } else {
                let key = self.prop_key()?;
                self.expect(Tok::Colon, "`:`")?;
                let value = PropInit::Data(self.expression()?);
                props.push(ObjectProp { key, loc, value });
            }
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(props)
    }

    fn prop_key(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Str(s) => {
                self.advance();
                Ok(s)
            }
            Tok::Num(n) => {
                self.advance();
                Ok(super::printer::number_text(n))
            }
            _ => Err(self.error("property name")),
        }
    }
}
