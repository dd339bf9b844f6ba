//! MiniJS front end: lexing, parsing and scope resolution.
//!
//! The grammar is a small JavaScript subset: function declarations and
//! expressions, `var`, assignment, object literals with data properties
//! and `get`/`set` accessors, array literals, static (`x.p`, `x["p"]`) and
//! dynamic (`x[e]`) property accesses, calls, `return`, `if`/`else`,
//! `while`, `for (k in o)`, literals, `+ -`, comparisons and `!`.
//! Semicolons are required.

pub mod ast;
mod dump;
mod lexer;
mod parser;
mod printer;
mod resolve;

use thiserror::Error;

pub use ast::*;
pub use dump::dump_program;
pub use parser::parse_unit;
pub use printer::{number_text, print_program};
pub use resolve::{resolve_bindings, resolve_with, ResolveEnv};

use crate::ids::SourceLoc;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: u32, col: u32, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unbound variable `{name}` at {loc}")]
    UnboundVariable { name: String, loc: SourceLoc },
}

/// Parses a top-level source unit.
pub fn parse_program(source: &str, unit_name: &str) -> Result<Program, SyntaxError> {
    parse_unit(source, unit_name, 0)
}
