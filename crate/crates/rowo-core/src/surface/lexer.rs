//! Tokenizer for the concrete syntax.

use crate::ast::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    /// `'name` — a label constant.
    LabelLit(String),
    IntLit(i64),
    /// `%theory`, `%stratified` — pragma head including the `%`.
    Pragma(String),

    // Keywords.
    Forall,
    TypeKw,
    LabKw,
    RowKw,
    PiKw,
    SigmaKw,
    SingKw,
    Syn,
    Ana,
    FoldPi,
    Prj,
    PrjL,
    PrjR,
    Inj,
    InjL,
    InjR,
    TypeDecl,
    True,
    False,
    IntTy,
    BoolTy,
    ListTy,

    // Punctuation and operators.
    LParen,
    RParen,
    LBracket,
    RBracket,
    LAngle,
    RAngle,
    Comma,
    Dot,
    Colon,
    Semi,
    Eq,
    Backslash,
    BigLambda, // /\
    Arrow,     // ->
    FatArrow,  // =>
    Triangle,  // |>
    Slash,     // /
    LeqL,      // <:L
    LeqR,      // <:R
    Leq,       // <:
    OPlus,     // o+
    Tilde,     // ~
    PlusPlus,  // ++
    Bars,      // |||
    Plus,
    AmpAmp, // &&
    EqEq,   // ==
    At,     // @

    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        // Whitespace.
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // Comments.
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        // Pragmas.
        if c == '%' {
            i += 1;
            while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                i += 1;
            }
            toks.push(Token {
                kind: TokenKind::Pragma(src[start..i].to_string()),
                span: Span::new(start, i),
            });
            continue;
        }
        // Label constants.
        if c == '\'' {
            i += 1;
            let name_start = i;
            while i < bytes.len() && ident_char(bytes[i] as char) {
                i += 1;
            }
            if i == name_start {
                return Err(LexError {
                    span: Span::new(start, i),
                    message: "expected a label name after `'`".to_string(),
                });
            }
            toks.push(Token {
                kind: TokenKind::LabelLit(src[name_start..i].to_string()),
                span: Span::new(start, i),
            });
            continue;
        }
        // Numbers.
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let n: i64 = text.parse().map_err(|_| LexError {
                span: Span::new(start, i),
                message: format!("integer literal `{text}` out of range"),
            })?;
            toks.push(Token {
                kind: TokenKind::IntLit(n),
                span: Span::new(start, i),
            });
            continue;
        }
        // Identifiers and keywords. `o+` is the one alphanumeric-headed
        // operator and must be caught before identifier lexing eats the `o`.
        if c == 'o' && bytes.get(i + 1) == Some(&b'+') {
            i += 2;
            toks.push(Token {
                kind: TokenKind::OPlus,
                span: Span::new(start, i),
            });
            continue;
        }
        if ident_start(c) {
            while i < bytes.len() && ident_char(bytes[i] as char) {
                i += 1;
            }
            let text = &src[start..i];
            let kind = match text {
                "forall" => TokenKind::Forall,
                "Type" => TokenKind::TypeKw,
                "Lab" => TokenKind::LabKw,
                "Row" => TokenKind::RowKw,
                "Pi" => TokenKind::PiKw,
                "Sigma" => TokenKind::SigmaKw,
                "Sing" => TokenKind::SingKw,
                "syn" => TokenKind::Syn,
                "ana" => TokenKind::Ana,
                "foldPi" => TokenKind::FoldPi,
                "prj" => TokenKind::Prj,
                "prj_L" => TokenKind::PrjL,
                "prj_R" => TokenKind::PrjR,
                "inj" => TokenKind::Inj,
                "inj_L" => TokenKind::InjL,
                "inj_R" => TokenKind::InjR,
                "type" => TokenKind::TypeDecl,
                "true" => TokenKind::True,
                "false" => TokenKind::False,
                "Int" => TokenKind::IntTy,
                "Bool" => TokenKind::BoolTy,
                "List" => TokenKind::ListTy,
                _ => TokenKind::Ident(text.to_string()),
            };
            toks.push(Token {
                kind,
                span: Span::new(start, i),
            });
            continue;
        }
        // Operators, longest match first.
        let rest = &src[i..];
        let table: &[(&str, TokenKind)] = &[
            ("|||", TokenKind::Bars),
            ("|>", TokenKind::Triangle),
            ("<:L", TokenKind::LeqL),
            ("<:R", TokenKind::LeqR),
            ("<:", TokenKind::Leq),
            ("++", TokenKind::PlusPlus),
            ("/\\", TokenKind::BigLambda),
            ("->", TokenKind::Arrow),
            ("=>", TokenKind::FatArrow),
            ("==", TokenKind::EqEq),
            ("&&", TokenKind::AmpAmp),
            ("o+", TokenKind::OPlus),
            ("(", TokenKind::LParen),
            (")", TokenKind::RParen),
            ("[", TokenKind::LBracket),
            ("]", TokenKind::RBracket),
            ("<", TokenKind::LAngle),
            (">", TokenKind::RAngle),
            (",", TokenKind::Comma),
            (".", TokenKind::Dot),
            (":", TokenKind::Colon),
            (";", TokenKind::Semi),
            ("=", TokenKind::Eq),
            ("\\", TokenKind::Backslash),
            ("/", TokenKind::Slash),
            ("~", TokenKind::Tilde),
            ("+", TokenKind::Plus),
            ("@", TokenKind::At),
        ];
        let mut matched = false;
        for (pat, kind) in table {
            if rest.starts_with(pat) {
                i += pat.len();
                toks.push(Token {
                    kind: kind.clone(),
                    span: Span::new(start, i),
                });
                matched = true;
                break;
            }
        }
        if !matched {
            return Err(LexError {
                span: Span::new(i, i + 1),
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    toks.push(Token {
        kind: TokenKind::Eof,
        span: Span::new(src.len(), src.len()),
    });
    Ok(toks)
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}
