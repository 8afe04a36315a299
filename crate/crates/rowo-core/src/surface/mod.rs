//! Concrete syntax: lexer, parser, and printer for `.ro` programs.
//!
//! The syntax is plain ASCII: `Pi`/`Sigma`/`Sing` keywords, `<l |> t, ...>`
//! row literals, `l |> M` labeling, `M / l` unlabeling, `prj`/`prj_L`/`prj_R`,
//! `inj`/`inj_L`/`inj_R`, `++` concatenation, `|||` branching, `syn[phi] M`,
//! `ana[phi] M`, `foldPi M1 M2 M3 N`, `<:`/`<:L`/`<:R` containment, `o+`
//! combination, `=>` qualification, and `forall a:k, b:k. t` quantification.
//! Comments run from `--` to end of line. A pragma block at the top of a file
//! (`%theory simple|scoped|minimal`, `%stratified`) selects the row theory
//! and kinding mode.

mod lexer;
mod parser;
mod printer;

pub use lexer::{Token, TokenKind};
pub use parser::{parse, parse_repl, ParseError, ReplInput, ReplScope};
pub use printer::{print_kind, print_pred, print_program, print_term, print_type};

use crate::ast::{Name, Span, Term, Type};

/// Which row theory a program is checked under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TheoryName {
    Minimal,
    #[default]
    Simple,
    Scoped,
}

impl std::fmt::Display for TheoryName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TheoryName::Minimal => write!(f, "minimal"),
            TheoryName::Simple => write!(f, "simple"),
            TheoryName::Scoped => write!(f, "scoped"),
        }
    }
}

/// Plain or stratified (level-checked) kinding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Plain,
    Stratified,
}

/// A single top-level declaration: a signature and a body.
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: Name,
    pub signature: Type,
    pub body: Term,
    /// Span of the whole declaration (signature line through body line).
    pub span: Span,
    /// Span of the signature type alone, for kind diagnostics.
    pub sig_span: Span,
}

/// A parsed program. Type synonyms are expanded during parsing and do not
/// appear here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub theory: TheoryName,
    pub mode: Mode,
}
