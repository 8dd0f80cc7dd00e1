//! Contract syntax: AST, lexer, parser, pretty printer and the block
//! schedule reader.

mod ast;
mod lexer;
mod parser;
mod printer;
pub mod schedule;

use thiserror::Error;

pub use ast::*;
pub use lexer::{is_reserved, tokenize, Pos, Tok, Token};
pub use parser::{parse_contract, parse_expr};
pub use printer::{expr_to_string, pretty_print};
pub use schedule::{
    parse_schedule, render_schedule, BlockSchedule, InitTarget, ScheduleError, StateInit,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: unexpected character `{found}`")]
    Lex { pos: Pos, found: char },
    #[error("{pos}: found {found}, expected one of: {}", expected.join(", "))]
    Unexpected {
        pos: Pos,
        found: String,
        expected: Vec<String>,
    },
    #[error("state variable `{0}` declared twice")]
    DuplicateStateVar(String),
    #[error("function `{0}` declared twice")]
    DuplicateFunction(String),
    #[error("function `{func}` has two parameters named `{param}`")]
    DuplicateParam { func: String, param: String },
}
