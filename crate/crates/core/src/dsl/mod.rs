//! The heuristic language: primitive specifiers and heuristic functions.
//!
//! A program is one `primitives { ... }` block followed by any number of
//! `hf name(params) { ... }` declarations. See `docs/grammar.ebnf`.

mod ast;
mod error;
mod eval;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use error::DslError;
pub use eval::{
    evaluate_expr, evaluate_hf, evaluate_hf_positional, evaluate_specifier, Env, PrimitiveValues,
};
pub use lexer::{is_keyword, tokenize, Token, TokenKind};
pub use parser::{parse, parse_expr, parse_named, validate};
pub use printer::{expr_to_string, pretty_print};
