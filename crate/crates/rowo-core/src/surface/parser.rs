//! Recursive-descent parser.
//!
//! Identifier resolution: an identifier in type or label position that is not
//! bound by an enclosing `forall`/`/\`/`\` binder (or an earlier declaration)
//! is read as a label constant; `'name` always is one. Type synonyms
//! (`type N = T;`) are expanded by substitution at parse time and must be
//! closed.

use std::collections::{HashMap, HashSet};

use super::lexer::{lex, Token, TokenKind as T};
use super::{Decl, Mode, Program, TheoryName};
use crate::ast::{free_vars, Dir, Kind, Label, Name, Span, Term, TermK, Type};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "parse error at {}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}

/// One line of REPL input.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplInput {
    Sig(Name, Type),
    Body(Name, Term),
    TypeSyn(Name, Type),
    Expr(Term),
    ShowType(Term),
    ShowCore(Term),
    Quit,
    Empty,
}

/// Type synonyms visible to the REPL parser from previous lines.
#[derive(Debug, Clone, Default)]
pub struct ReplScope {
    pub synonyms: HashMap<Name, Type>,
}

pub fn parse(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src).map_err(|e| ParseError {
        span: e.span,
        message: e.message,
    })?;
    let mut p = Parser::new(toks);
    p.program()
}

pub fn parse_repl(src: &str, scope: &ReplScope) -> Result<ReplInput, ParseError> {
    let trimmed = src.trim();
    if trimmed.is_empty() {
        return Ok(ReplInput::Empty);
    }
    if trimmed == ":q" || trimmed == ":quit" {
        return Ok(ReplInput::Quit);
    }
    let (mode, rest) = if let Some(r) = trimmed.strip_prefix(":t ") {
        (1, r)
    } else if let Some(r) = trimmed.strip_prefix(":core ") {
        (2, r)
    } else {
        (0, trimmed)
    };
    let toks = lex(rest).map_err(|e| ParseError {
        span: e.span,
        message: e.message,
    })?;
    let mut p = Parser::new(toks);
    p.synonyms = scope.synonyms.clone();
    if mode == 1 {
        let t = p.term()?;
        p.expect_eof()?;
        return Ok(ReplInput::ShowType(t));
    }
    if mode == 2 {
        let t = p.term()?;
        p.expect_eof()?;
        return Ok(ReplInput::ShowCore(t));
    }
    // Declaration forms start with `type N =`, `name :`, or `name =`.
    if p.peek_is(&T::TypeDecl) {
        p.bump();
        let name = p.ident()?;
        p.expect(&T::Eq)?;
        let ty = p.ty()?;
        let ty = p.expand_synonyms_check(ty)?;
        p.opt_semi();
        p.expect_eof()?;
        return Ok(ReplInput::TypeSyn(name, ty));
    }
    if let T::Ident(_) = &p.peek().kind {
        if p.peek2_is(&T::Colon) {
            let name = p.ident()?;
            p.bump(); // colon
            let ty = p.ty()?;
            p.opt_semi();
            p.expect_eof()?;
            return Ok(ReplInput::Sig(name, ty));
        }
        if p.peek2_is(&T::Eq) {
            let name = p.ident()?;
            p.bump(); // eq
            let tm = p.term()?;
            p.opt_semi();
            p.expect_eof()?;
            return Ok(ReplInput::Body(name, tm));
        }
    }
    let t = p.term()?;
    p.expect_eof()?;
    Ok(ReplInput::Expr(t))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    ty_scope: Vec<Name>,
    synonyms: HashMap<Name, Type>,
}

const MAX_DEPTH: usize = 512;

impl Parser {
    fn new(toks: Vec<Token>) -> Parser {
        Parser {
            toks,
            pos: 0,
            depth: 0,
            ty_scope: Vec::new(),
            synonyms: HashMap::new(),
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_is(&self, k: &T) -> bool {
        &self.peek().kind == k
    }

    fn peek2_is(&self, k: &T) -> bool {
        self.toks
            .get(self.pos + 1)
            .map(|t| &t.kind == k)
            .unwrap_or(false)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, k: &T) -> Result<Token, ParseError> {
        if self.peek_is(k) {
            Ok(self.bump())
        } else {
            Err(self.err_here(&format!("expected {}", describe(k))))
        }
    }

    fn opt_semi(&mut self) {
        if self.peek_is(&T::Semi) {
            self.bump();
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        if self.peek_is(&T::Eof) {
            Ok(())
        } else {
            Err(self.err_here("expected end of input"))
        }
    }

    fn err_here(&self, msg: &str) -> ParseError {
        let t = self.peek();
        ParseError {
            span: t.span,
            message: format!("{msg}, found {}", describe(&t.kind)),
        }
    }

    fn ident(&mut self) -> Result<Name, ParseError> {
        match &self.peek().kind {
            T::Ident(n) => {
                let n = n.clone();
                self.bump();
                Ok(n)
            }
            _ => Err(self.err_here("expected an identifier")),
        }
    }

    // -- program ----------------------------------------------------------

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut prog = Program::default();
        // Pragmas.
        while let T::Pragma(p) = &self.peek().kind {
            let p = p.clone();
            let span = self.peek().span;
            self.bump();
            match p.as_str() {
                "%theory" => {
                    let name = self.ident().map_err(|_| ParseError {
                        span,
                        message: "expected a theory name after %theory".to_string(),
                    })?;
                    prog.theory = match name.as_str() {
                        "minimal" => TheoryName::Minimal,
                        "simple" => TheoryName::Simple,
                        "scoped" => TheoryName::Scoped,
                        other => {
                            return Err(ParseError {
                                span,
                                message: format!("unknown theory `{other}`"),
                            })
                        }
                    };
                }
                "%stratified" => prog.mode = Mode::Stratified,
                other => {
                    return Err(ParseError {
                        span,
                        message: format!("unknown pragma `{other}`"),
                    })
                }
            }
        }
        // Declarations.
        let mut pending_sig: Option<(Name, Type, Span)> = None;
        let mut declared: HashSet<Name> = HashSet::new();
        while !self.peek_is(&T::Eof) {
            if self.peek_is(&T::TypeDecl) {
                if pending_sig.is_some() {
                    return Err(self.err_here("expected a body for the preceding signature"));
                }
                self.bump();
                let name = self.ident()?;
                self.expect(&T::Eq)?;
                let ty = self.ty()?;
                let ty = self.expand_synonyms_check(ty)?;
                self.expect(&T::Semi)?;
                self.synonyms.insert(name, ty);
                continue;
            }
            let start = self.peek().span;
            let name = self.ident()?;
            if self.peek_is(&T::Colon) {
                if let Some((n, _, _)) = &pending_sig {
                    return Err(ParseError {
                        span: start,
                        message: format!("signature for `{n}` has no body"),
                    });
                }
                self.bump();
                let sig_start = self.peek().span;
                let ty = self.ty()?;
                let sig_end = self.toks[self.pos.saturating_sub(1)].span;
                self.expect(&T::Semi)?;
                pending_sig = Some((name, ty, sig_start.join(sig_end)));
            } else if self.peek_is(&T::Eq) {
                self.bump();
                let body = self.term()?;
                let (sig_name, sig, sig_span) = pending_sig.take().ok_or(ParseError {
                    span: start,
                    message: format!("body for `{name}` has no preceding signature"),
                })?;
                if sig_name != name {
                    return Err(ParseError {
                        span: start,
                        message: format!(
                            "body for `{name}` does not match preceding signature `{sig_name}`"
                        ),
                    });
                }
                if !declared.insert(name.clone()) {
                    return Err(ParseError {
                        span: start,
                        message: format!("`{name}` is declared twice"),
                    });
                }
                let end = self.expect(&T::Semi)?.span;
                prog.decls.push(Decl {
                    name,
                    signature: sig,
                    body,
                    span: start.join(end),
                    sig_span,
                });
            } else {
                return Err(self.err_here("expected `:` or `=` after declaration name"));
            }
        }
        if let Some((n, _, span)) = pending_sig {
            return Err(ParseError {
                span,
                message: format!("signature for `{n}` has no body"),
            });
        }
        Ok(prog)
    }

    fn expand_synonyms_check(&self, ty: Type) -> Result<Type, ParseError> {
        let fv = free_vars(&ty);
        if let Some(v) = fv.iter().next() {
            return Err(ParseError {
                span: Span::default(),
                message: format!("type synonym body must be closed, `{v}` is free"),
            });
        }
        Ok(ty)
    }

    // -- kinds ------------------------------------------------------------

    fn kind(&mut self) -> Result<Kind, ParseError> {
        let lhs = self.kind_atom()?;
        if self.peek_is(&T::Arrow) {
            self.bump();
            let rhs = self.kind()?;
            Ok(Kind::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn kind_atom(&mut self) -> Result<Kind, ParseError> {
        match self.peek().kind.clone() {
            T::TypeKw => {
                self.bump();
                if self.peek_is(&T::At) {
                    self.bump();
                    match self.peek().kind.clone() {
                        T::IntLit(n) if n >= 0 => {
                            self.bump();
                            Ok(Kind::Type(Some(n as u32)))
                        }
                        _ => Err(self.err_here("expected a level after `@`")),
                    }
                } else {
                    Ok(Kind::Type(None))
                }
            }
            T::LabKw => {
                self.bump();
                Ok(Kind::Lab)
            }
            T::RowKw => {
                self.bump();
                let k = self.kind_atom()?;
                Ok(Kind::row(k))
            }
            T::LParen => {
                self.bump();
                let k = self.kind()?;
                self.expect(&T::RParen)?;
                Ok(k)
            }
            _ => Err(self.err_here("expected a kind")),
        }
    }

    // -- types ------------------------------------------------------------

    fn resolve_ty_ident(&self, n: &str) -> Type {
        if self.ty_scope.iter().any(|b| b == n) {
            Type::Var(n.to_string())
        } else if let Some(body) = self.synonyms.get(n) {
            body.clone()
        } else {
            Type::LabelConst(Label(n.to_string()))
        }
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return Err(self.err_here("nesting too deep"));
        }
        let r = self.ty_guarded();
        self.depth -= 1;
        r
    }

    fn ty_guarded(&mut self) -> Result<Type, ParseError> {
        match self.peek().kind.clone() {
            T::Forall => {
                self.bump();
                let mut binders = Vec::new();
                loop {
                    let n = self.ident()?;
                    self.expect(&T::Colon)?;
                    let k = self.kind()?;
                    binders.push((n, k));
                    if self.peek_is(&T::Comma) {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(&T::Dot)?;
                for (n, _) in &binders {
                    self.ty_scope.push(n.clone());
                }
                let body = self.ty();
                for _ in &binders {
                    self.ty_scope.pop();
                }
                let mut out = body?;
                for (n, k) in binders.into_iter().rev() {
                    out = Type::Forall(n, k, Box::new(out));
                }
                Ok(out)
            }
            T::Backslash => {
                self.bump();
                let mut binders = Vec::new();
                loop {
                    let n = self.ident()?;
                    self.expect(&T::Colon)?;
                    let k = self.kind()?;
                    binders.push((n, k));
                    if matches!(self.peek().kind, T::Ident(_)) {
                        continue;
                    }
                    break;
                }
                self.expect(&T::Dot)?;
                for (n, _) in &binders {
                    self.ty_scope.push(n.clone());
                }
                let body = self.ty();
                for _ in &binders {
                    self.ty_scope.pop();
                }
                let mut out = body?;
                for (n, k) in binders.into_iter().rev() {
                    out = Type::Lam(n, k, Box::new(out));
                }
                Ok(out)
            }
            _ => self.ty_qual_or_arrow(),
        }
    }

    /// Parses predicates-then-`=>` or a plain arrow chain. A parenthesized
    /// group is recognized as a predicate list `(P1, P2) => T` by scanning
    /// ahead for `=>` after the matching parenthesis, which keeps parsing
    /// linear.
    fn ty_qual_or_arrow(&mut self) -> Result<Type, ParseError> {
        if self.peek_is(&T::LParen) && self.paren_group_precedes_fat_arrow() {
            let preds = self.try_pred_group()?;
            self.expect(&T::FatArrow)?;
            let body = self.ty()?;
            let mut out = body;
            for p in preds.into_iter().rev() {
                out = Type::qual(p, out);
            }
            return Ok(out);
        }
        // Parse one combination; the next token decides between a bare
        // predicate (`ROW <: ROW => T`, `R o+ R ~ R => T`) and an arrow.
        let lhs = self.ty_combo()?;
        match self.peek().kind.clone() {
            T::Leq | T::LeqL => {
                self.bump();
                let rhs = self.ty_combo()?;
                self.expect(&T::FatArrow)?;
                let body = self.ty()?;
                Ok(Type::qual(crate::ast::Pred::Contain(Dir::L, lhs, rhs), body))
            }
            T::LeqR => {
                self.bump();
                let rhs = self.ty_combo()?;
                self.expect(&T::FatArrow)?;
                let body = self.ty()?;
                Ok(Type::qual(crate::ast::Pred::Contain(Dir::R, lhs, rhs), body))
            }
            T::Tilde => {
                if let Type::CombineSugar(a, b) = lhs {
                    self.bump();
                    let c = self.ty_combo()?;
                    self.expect(&T::FatArrow)?;
                    let body = self.ty()?;
                    Ok(Type::qual(crate::ast::Pred::Combine(*a, *b, c), body))
                } else {
                    Err(self.err_here("`~` requires a combination `r1 o+ r2` on the left"))
                }
            }
            T::Arrow => {
                self.bump();
                let rhs = self.ty()?;
                Ok(Type::arrow(lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    /// Whether the parenthesized group starting here is followed by `=>`.
    fn paren_group_precedes_fat_arrow(&self) -> bool {
        let mut depth = 0usize;
        let mut i = self.pos;
        loop {
            match self.toks.get(i).map(|t| &t.kind) {
                Some(T::LParen) => depth += 1,
                Some(T::RParen) => {
                    depth -= 1;
                    if depth == 0 {
                        return matches!(
                            self.toks.get(i + 1).map(|t| &t.kind),
                            Some(T::FatArrow)
                        );
                    }
                }
                Some(T::Eof) | None => return false,
                _ => {}
            }
            i += 1;
        }
    }

    fn try_pred_group(&mut self) -> Result<Vec<crate::ast::Pred>, ParseError> {
        self.expect(&T::LParen)?;
        let mut preds = vec![self.try_pred()?];
        while self.peek_is(&T::Comma) {
            self.bump();
            preds.push(self.try_pred()?);
        }
        self.expect(&T::RParen)?;
        Ok(preds)
    }

    fn try_pred(&mut self) -> Result<crate::ast::Pred, ParseError> {
        use crate::ast::Pred;
        let lhs = self.ty_combo()?;
        match self.peek().kind.clone() {
            T::Leq => {
                self.bump();
                let rhs = self.ty_combo()?;
                Ok(Pred::Contain(Dir::L, lhs, rhs))
            }
            T::LeqL => {
                self.bump();
                let rhs = self.ty_combo()?;
                Ok(Pred::Contain(Dir::L, lhs, rhs))
            }
            T::LeqR => {
                self.bump();
                let rhs = self.ty_combo()?;
                Ok(Pred::Contain(Dir::R, lhs, rhs))
            }
            T::Tilde => {
                if let Type::CombineSugar(a, b) = lhs {
                    self.bump();
                    let c = self.ty_combo()?;
                    Ok(Pred::Combine(*a, *b, c))
                } else {
                    Err(self.err_here("`~` requires a combination `r1 o+ r2` on the left"))
                }
            }
            _ => Err(self.err_here("expected a predicate")),
        }
    }

    fn ty_combo(&mut self) -> Result<Type, ParseError> {
        let mut lhs = self.ty_labeled()?;
        while self.peek_is(&T::OPlus) {
            self.bump();
            let rhs = self.ty_labeled()?;
            lhs = Type::CombineSugar(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ty_labeled(&mut self) -> Result<Type, ParseError> {
        let lhs = self.ty_app()?;
        if self.peek_is(&T::Triangle) {
            self.bump();
            let rhs = self.ty_app()?;
            Ok(Type::labeled(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn ty_app(&mut self) -> Result<Type, ParseError> {
        let mut lhs = self.ty_atom()?;
        loop {
            match self.peek().kind.clone() {
                T::Ident(_)
                | T::LabelLit(_)
                | T::LParen
                | T::LAngle
                | T::IntTy
                | T::BoolTy
                | T::ListTy
                | T::PiKw
                | T::SigmaKw
                | T::SingKw => {
                    let rhs = self.ty_atom()?;
                    lhs = Type::app(lhs, rhs);
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn ty_atom(&mut self) -> Result<Type, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return Err(self.err_here("nesting too deep"));
        }
        let r = self.ty_atom_guarded();
        self.depth -= 1;
        r
    }

    fn ty_atom_guarded(&mut self) -> Result<Type, ParseError> {
        match self.peek().kind.clone() {
            T::Ident(n) => {
                self.bump();
                Ok(self.resolve_ty_ident(&n))
            }
            T::LabelLit(n) => {
                self.bump();
                Ok(Type::LabelConst(Label(n)))
            }
            T::IntTy => {
                self.bump();
                Ok(Type::Prim(crate::ast::PrimTy::Int))
            }
            T::BoolTy => {
                self.bump();
                Ok(Type::Prim(crate::ast::PrimTy::Bool))
            }
            T::ListTy => {
                self.bump();
                Ok(Type::Prim(crate::ast::PrimTy::List))
            }
            T::PiKw => {
                self.bump();
                let r = self.ty_atom()?;
                Ok(Type::pi(r))
            }
            T::SigmaKw => {
                self.bump();
                let r = self.ty_atom()?;
                Ok(Type::sigma(r))
            }
            T::SingKw => {
                self.bump();
                let r = self.ty_atom()?;
                Ok(Type::sing(r))
            }
            T::LAngle => {
                self.bump();
                let mut entries = Vec::new();
                if !self.peek_is(&T::RAngle) {
                    loop {
                        let label = self.ty_app()?;
                        self.expect(&T::Triangle)?;
                        let payload = self.ty()?;
                        entries.push((label, payload));
                        if self.peek_is(&T::Comma) {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(&T::RAngle)?;
                Ok(Type::RowLit(entries, Kind::ty()))
            }
            T::LParen => {
                self.bump();
                if self.peek_is(&T::Arrow) && self.peek2_is(&T::RParen) {
                    self.bump();
                    self.bump();
                    return Ok(Type::Fun);
                }
                let t = self.ty()?;
                self.expect(&T::RParen)?;
                Ok(t)
            }
            _ => Err(self.err_here("expected a type")),
        }
    }

    // -- terms ------------------------------------------------------------

    fn term(&mut self) -> Result<Term, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return Err(self.err_here("nesting too deep"));
        }
        let r = self.term_guarded();
        self.depth -= 1;
        r
    }

    fn term_guarded(&mut self) -> Result<Term, ParseError> {
        match self.peek().kind.clone() {
            T::Backslash => {
                let start = self.peek().span;
                self.bump();
                let binders = self.lam_binders(false)?;
                self.expect(&T::Dot)?;
                let body = self.term()?;
                let span = start.join(body.span);
                let mut out = body;
                for (n, ann) in binders.into_iter().rev() {
                    let ann = match ann {
                        Some(TyOrKind::Ty(t)) => Some(t),
                        None => None,
                        _ => unreachable!(),
                    };
                    out = Term::new(span, TermK::Lam(n, ann, Box::new(out)));
                }
                Ok(out)
            }
            T::BigLambda => {
                let start = self.peek().span;
                self.bump();
                let binders = self.lam_binders(true)?;
                self.expect(&T::Dot)?;
                for (n, _) in &binders {
                    self.ty_scope.push(n.clone());
                }
                let body = self.term();
                for _ in &binders {
                    self.ty_scope.pop();
                }
                let body = body?;
                let span = start.join(body.span);
                let mut out = body;
                for (n, ann) in binders.into_iter().rev() {
                    let ann = match ann {
                        Some(TyOrKind::Kind(k)) => Some(k),
                        None => None,
                        _ => unreachable!(),
                    };
                    out = Term::new(span, TermK::TyLam(n, ann, Box::new(out)));
                }
                Ok(out)
            }
            _ => self.term_branch(),
        }
    }

    fn lam_binders(&mut self, kinds: bool) -> Result<Vec<(Name, Option<TyOrKind>)>, ParseError> {
        let mut out = Vec::new();
        loop {
            match self.peek().kind.clone() {
                T::Ident(n) => {
                    self.bump();
                    if self.peek_is(&T::Colon) {
                        // Unparenthesized annotated binder: must be the last.
                        self.bump();
                        let ann = if kinds {
                            TyOrKind::Kind(self.kind()?)
                        } else {
                            TyOrKind::Ty(self.ty_with_binders(&out)?)
                        };
                        out.push((n, Some(ann)));
                        return Ok(out);
                    }
                    out.push((n, None));
                }
                T::LParen => {
                    self.bump();
                    let n = self.ident()?;
                    self.expect(&T::Colon)?;
                    let ann = if kinds {
                        TyOrKind::Kind(self.kind()?)
                    } else {
                        TyOrKind::Ty(self.ty_with_binders(&out)?)
                    };
                    self.expect(&T::RParen)?;
                    out.push((n, Some(ann)));
                }
                _ => {
                    if out.is_empty() {
                        return Err(self.err_here("expected a binder"));
                    }
                    return Ok(out);
                }
            }
        }
    }

    /// Parses a type with the earlier binders of the same lambda out of
    /// scope for types but in scope for a type lambda chain. Term binders
    /// never scope over types, so this only matters for `/\` chains, which
    /// are handled by the caller pushing into `ty_scope`; nothing extra here.
    fn ty_with_binders(&mut self, _earlier: &[(Name, Option<TyOrKind>)]) -> Result<Type, ParseError> {
        self.ty()
    }

    /// The right-hand side of a binary operator: a trailing lambda extends
    /// to the end of the term.
    fn op_rhs(
        &mut self,
        next: fn(&mut Parser) -> Result<Term, ParseError>,
    ) -> Result<(Term, bool), ParseError> {
        if self.peek_is(&T::Backslash) || self.peek_is(&T::BigLambda) {
            Ok((self.term()?, true))
        } else {
            Ok((next(self)?, false))
        }
    }

    fn term_branch(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_concat()?;
        while self.peek_is(&T::Bars) {
            self.bump();
            let (rhs, last) = self.op_rhs(Parser::term_concat)?;
            let span = lhs.span.join(rhs.span);
            lhs = Term::new(span, TermK::Branch(Box::new(lhs), Box::new(rhs)));
            if last {
                break;
            }
        }
        Ok(lhs)
    }

    fn term_concat(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_label_intro()?;
        while self.peek_is(&T::PlusPlus) {
            self.bump();
            let (rhs, last) = self.op_rhs(Parser::term_label_intro)?;
            let span = lhs.span.join(rhs.span);
            lhs = Term::new(span, TermK::Concat(Box::new(lhs), Box::new(rhs)));
            if last {
                break;
            }
        }
        Ok(lhs)
    }

    fn term_label_intro(&mut self) -> Result<Term, ParseError> {
        let lhs = self.term_bool()?;
        if self.peek_is(&T::Triangle) {
            self.bump();
            let (rhs, _) = self.op_rhs(Parser::term_bool)?;
            let span = lhs.span.join(rhs.span);
            Ok(Term::new(span, TermK::LabelIntro(Box::new(lhs), Box::new(rhs))))
        } else {
            Ok(lhs)
        }
    }

    fn term_bool(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_cmp()?;
        while self.peek_is(&T::AmpAmp) {
            self.bump();
            let (rhs, last) = self.op_rhs(Parser::term_cmp)?;
            let span = lhs.span.join(rhs.span);
            lhs = prim_binop(span, "and", lhs, rhs);
            if last {
                break;
            }
        }
        Ok(lhs)
    }

    fn term_cmp(&mut self) -> Result<Term, ParseError> {
        let lhs = self.term_add()?;
        if self.peek_is(&T::EqEq) {
            self.bump();
            let (rhs, _) = self.op_rhs(Parser::term_add)?;
            let span = lhs.span.join(rhs.span);
            Ok(prim_binop(span, "eqInt", lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn term_add(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_unlabel()?;
        while self.peek_is(&T::Plus) {
            self.bump();
            let (rhs, last) = self.op_rhs(Parser::term_unlabel)?;
            let span = lhs.span.join(rhs.span);
            lhs = prim_binop(span, "add", lhs, rhs);
            if last {
                break;
            }
        }
        Ok(lhs)
    }

    fn term_unlabel(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_app()?;
        while self.peek_is(&T::Slash) {
            self.bump();
            let rhs = self.term_app()?;
            let span = lhs.span.join(rhs.span);
            lhs = Term::new(span, TermK::Unlabel(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn term_app(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_prefix()?;
        loop {
            match self.peek().kind.clone() {
                T::Ident(_)
                | T::LabelLit(_)
                | T::IntLit(_)
                | T::True
                | T::False
                | T::LParen
                | T::Prj
                | T::PrjL
                | T::PrjR
                | T::Inj
                | T::InjL
                | T::InjR
                | T::Syn
                | T::Ana
                | T::FoldPi => {
                    let rhs = self.term_prefix()?;
                    let span = lhs.span.join(rhs.span);
                    lhs = Term::new(span, TermK::App(Box::new(lhs), Box::new(rhs)));
                }
                T::LBracket => {
                    self.bump();
                    let ty = self.ty()?;
                    let end = self.expect(&T::RBracket)?.span;
                    let span = lhs.span.join(end);
                    lhs = Term::new(span, TermK::TyApp(Box::new(lhs), ty));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term_prefix(&mut self) -> Result<Term, ParseError> {
        let start = self.peek().span;
        match self.peek().kind.clone() {
            T::Prj | T::PrjL => {
                self.bump();
                let m = self.term_postfix()?;
                let span = start.join(m.span);
                Ok(Term::new(span, TermK::Prj(Dir::L, Box::new(m))))
            }
            T::PrjR => {
                self.bump();
                let m = self.term_postfix()?;
                let span = start.join(m.span);
                Ok(Term::new(span, TermK::Prj(Dir::R, Box::new(m))))
            }
            T::Inj | T::InjL => {
                self.bump();
                let m = self.term_postfix()?;
                let span = start.join(m.span);
                Ok(Term::new(span, TermK::Inj(Dir::L, Box::new(m))))
            }
            T::InjR => {
                self.bump();
                let m = self.term_postfix()?;
                let span = start.join(m.span);
                Ok(Term::new(span, TermK::Inj(Dir::R, Box::new(m))))
            }
            T::Syn => {
                self.bump();
                self.expect(&T::LBracket)?;
                let phi = self.ty()?;
                self.expect(&T::RBracket)?;
                let m = self.term_postfix()?;
                let span = start.join(m.span);
                Ok(Term::new(span, TermK::Syn(phi, Box::new(m))))
            }
            T::Ana => {
                self.bump();
                self.expect(&T::LBracket)?;
                let phi = self.ty()?;
                self.expect(&T::RBracket)?;
                let m = self.term_postfix()?;
                let span = start.join(m.span);
                Ok(Term::new(span, TermK::Ana(phi, Box::new(m))))
            }
            T::FoldPi => {
                self.bump();
                let m1 = self.term_postfix()?;
                let m2 = self.term_postfix()?;
                let m3 = self.term_postfix()?;
                let n = self.term_postfix()?;
                let span = start.join(n.span);
                Ok(Term::new(
                    span,
                    TermK::FoldPi(Box::new(m1), Box::new(m2), Box::new(m3), Box::new(n)),
                ))
            }
            _ => self.term_postfix(),
        }
    }

    /// An atom followed by any number of `[T]` type applications.
    fn term_postfix(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.term_atom()?;
        while self.peek_is(&T::LBracket) {
            self.bump();
            let ty = self.ty()?;
            let end = self.expect(&T::RBracket)?.span;
            let span = lhs.span.join(end);
            lhs = Term::new(span, TermK::TyApp(Box::new(lhs), ty));
        }
        Ok(lhs)
    }

    fn term_atom(&mut self) -> Result<Term, ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            self.depth -= 1;
            return Err(self.err_here("nesting too deep"));
        }
        let r = self.term_atom_guarded();
        self.depth -= 1;
        r
    }

    fn term_atom_guarded(&mut self) -> Result<Term, ParseError> {
        let t = self.peek().clone();
        match t.kind {
            T::Ident(n) => {
                self.bump();
                Ok(Term::new(t.span, TermK::Var(n)))
            }
            T::LabelLit(n) => {
                self.bump();
                Ok(Term::new(t.span, TermK::LabelVal(Label(n))))
            }
            T::IntLit(n) => {
                self.bump();
                Ok(Term::new(t.span, TermK::IntLit(n)))
            }
            T::True => {
                self.bump();
                Ok(Term::new(t.span, TermK::BoolLit(true)))
            }
            T::False => {
                self.bump();
                Ok(Term::new(t.span, TermK::BoolLit(false)))
            }
            T::LParen => {
                self.bump();
                if self.peek_is(&T::RParen) {
                    let end = self.bump().span;
                    return Ok(Term::new(t.span.join(end), TermK::Unit));
                }
                let inner = self.term()?;
                if self.peek_is(&T::Colon) {
                    self.bump();
                    let ty = self.ty()?;
                    let end = self.expect(&T::RParen)?.span;
                    return Ok(Term::new(
                        t.span.join(end),
                        TermK::Ascribe(Box::new(inner), ty),
                    ));
                }
                let end = self.expect(&T::RParen)?.span;
                Ok(Term {
                    span: t.span.join(end),
                    kind: inner.kind,
                })
            }
            _ => Err(self.err_here("expected a term")),
        }
    }
}

enum TyOrKind {
    Ty(Type),
    Kind(Kind),
}

fn prim_binop(span: Span, name: &str, lhs: Term, rhs: Term) -> Term {
    let f = Term::new(span, TermK::Var(name.to_string()));
    let fa = Term::new(span, TermK::App(Box::new(f), Box::new(lhs)));
    Term::new(span, TermK::App(Box::new(fa), Box::new(rhs)))
}

fn describe(k: &T) -> String {
    match k {
        T::Ident(n) => format!("identifier `{n}`"),
        T::LabelLit(n) => format!("label `'{n}`"),
        T::IntLit(n) => format!("integer `{n}`"),
        T::Pragma(p) => format!("pragma `{p}`"),
        T::Forall => "`forall`".to_string(),
        T::TypeKw => "`Type`".to_string(),
        T::LabKw => "`Lab`".to_string(),
        T::RowKw => "`Row`".to_string(),
        T::PiKw => "`Pi`".to_string(),
        T::SigmaKw => "`Sigma`".to_string(),
        T::SingKw => "`Sing`".to_string(),
        T::Syn => "`syn`".to_string(),
        T::Ana => "`ana`".to_string(),
        T::FoldPi => "`foldPi`".to_string(),
        T::Prj => "`prj`".to_string(),
        T::PrjL => "`prj_L`".to_string(),
        T::PrjR => "`prj_R`".to_string(),
        T::Inj => "`inj`".to_string(),
        T::InjL => "`inj_L`".to_string(),
        T::InjR => "`inj_R`".to_string(),
        T::TypeDecl => "`type`".to_string(),
        T::True => "`true`".to_string(),
        T::False => "`false`".to_string(),
        T::IntTy => "`Int`".to_string(),
        T::BoolTy => "`Bool`".to_string(),
        T::ListTy => "`List`".to_string(),
        T::LParen => "`(`".to_string(),
        T::RParen => "`)`".to_string(),
        T::LBracket => "`[`".to_string(),
        T::RBracket => "`]`".to_string(),
        T::LAngle => "`<`".to_string(),
        T::RAngle => "`>`".to_string(),
        T::Comma => "`,`".to_string(),
        T::Dot => "`.`".to_string(),
        T::Colon => "`:`".to_string(),
        T::Semi => "`;`".to_string(),
        T::Eq => "`=`".to_string(),
        T::Backslash => "`\\`".to_string(),
        T::BigLambda => "`/\\`".to_string(),
        T::Arrow => "`->`".to_string(),
        T::FatArrow => "`=>`".to_string(),
        T::Triangle => "`|>`".to_string(),
        T::Slash => "`/`".to_string(),
        T::LeqL => "`<:L`".to_string(),
        T::LeqR => "`<:R`".to_string(),
        T::Leq => "`<:`".to_string(),
        T::OPlus => "`o+`".to_string(),
        T::Tilde => "`~`".to_string(),
        T::PlusPlus => "`++`".to_string(),
        T::Bars => "`|||`".to_string(),
        T::Plus => "`+`".to_string(),
        T::AmpAmp => "`&&`".to_string(),
        T::EqEq => "`==`".to_string(),
        T::At => "`@`".to_string(),
        T::Eof => "end of input".to_string(),
    }
}


#[cfg(test)]
mod fuzz_smoke {
    use super::*;

    /// A cheap in-tree exercise of the fuzz-target property: no panics on
    /// hostile inputs, and printing a parsed program reparses.
    #[test]
    fn parser_never_panics_on_garbage() {
        let samples: Vec<String> = vec![
            "((((((((((((((((".repeat(80),
            "\\".repeat(500),
            "x : ".to_string() + &"Pi ".repeat(600) + ";",
            "%theory".to_string(),
            "'".to_string(),
            "x : Int; x = 99999999999999999999;".to_string(),
            "a : <:L <:R o+ ~ |||;".to_string(),
            "type T = T;".to_string(),
            "f : forall a:Lab. Sing a; f = /\\a. a;".to_string(),
            "-- only a comment".to_string(),
        ];
        for s in samples {
            let _ = parse(&s);
            let _ = parse_repl(&s, &ReplScope::default());
        }
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let deep = format!("x : {}Int{};", "(".repeat(2000), ")".repeat(2000));
        assert!(parse(&deep).is_err());
    }
}
