//! MiniC source handling: lexing, parsing, printing, linking.

pub mod ast;
pub mod diag;
pub mod lexer;
pub mod link;
pub mod parser;
pub mod printer;

pub use ast::*;
pub use diag::{Diagnostic, DiagnosticList, Severity};
pub use link::{link_program, list_functions, Program};
pub use parser::{parse_unit, SourceUnit};
pub use printer::print_ast;
