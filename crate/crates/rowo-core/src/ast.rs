//! Abstract syntax for kinds, types, predicates, terms, and environments.
//!
//! Types use named binders with capture-avoiding substitution; alpha-equality
//! is decided with a two-sided bound-name map. All values here are immutable
//! after construction.

use std::collections::BTreeSet;
use std::fmt;

pub type Name = String;

/// Byte-offset range into a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Kind expressions. `Type(None)` in plain mode; in stratified mode every
/// `Type` carries a level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Kind {
    Type(Option<u32>),
    Lab,
    Row(Box<Kind>),
    Arrow(Box<Kind>, Box<Kind>),
}

impl Kind {
    pub fn ty() -> Kind {
        Kind::Type(None)
    }

    pub fn row(k: Kind) -> Kind {
        Kind::Row(Box::new(k))
    }

    pub fn arrow(a: Kind, b: Kind) -> Kind {
        Kind::Arrow(Box::new(a), Box::new(b))
    }

    /// Strip level annotations, mapping a stratified kind onto its plain form.
    pub fn erase_levels(&self) -> Kind {
        match self {
            Kind::Type(_) => Kind::Type(None),
            Kind::Lab => Kind::Lab,
            Kind::Row(k) => Kind::row(k.erase_levels()),
            Kind::Arrow(a, b) => Kind::arrow(a.erase_levels(), b.erase_levels()),
        }
    }

    /// Intrinsic level of a stratified kind: levels of `Type[i]` are `i`,
    /// `Lab` sits at 0, rows take their element's level, arrows the max.
    pub fn level(&self) -> u32 {
        match self {
            Kind::Type(l) => l.unwrap_or(0),
            Kind::Lab => 0,
            Kind::Row(k) => k.level(),
            Kind::Arrow(a, b) => a.level().max(b.level()),
        }
    }

    /// Equality up to levels: the shape the plain kinding judgment sees.
    pub fn same_erased(&self, other: &Kind) -> bool {
        self.erase_levels() == other.erase_levels()
    }
}

/// A label. Two labels are equal iff their names are equal; labels exist
/// only at check time and are erased before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub Name);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "'{}", self.0)
    }
}

/// Built-in base types for the test prelude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimTy {
    Int,
    Bool,
    /// `List : Type -> Type`
    List,
}

/// Containment direction. In the simple (commutative) theory the two
/// directions are interchangeable; minimal and scoped keep them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    L,
    R,
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dir::L => write!(f, "L"),
            Dir::R => write!(f, "R"),
        }
    }
}

/// Type expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    Var(Name),
    /// The function constant `(->)`.
    Fun,
    Prim(PrimTy),
    Qual(Box<Pred>, Box<Type>),
    Forall(Name, Kind, Box<Type>),
    Lam(Name, Kind, Box<Type>),
    App(Box<Type>, Box<Type>),
    /// A label constant used as a type of kind `Lab`.
    LabelConst(Label),
    /// `Sing ξ` — the singleton type of a label.
    Sing(Box<Type>),
    /// `ξ |> τ` — a labeled type.
    Labeled(Box<Type>, Box<Type>),
    /// A concrete row literal. The kind hint disambiguates the element kind
    /// of the empty row; it is ignored when entries are present.
    RowLit(Vec<(Type, Type)>, Kind),
    Pi(Box<Type>),
    SigmaV(Box<Type>),
    /// `ρ₁ o+ ρ₂` used as a type; exists only pre-elaboration.
    CombineSugar(Box<Type>, Box<Type>),
    /// Internal normal form: a stuck lifted application, mapping `φ` over the
    /// abstract row `ρ`. Never produced by the parser.
    RowMap(Box<Type>, Box<Type>),
}

impl Type {
    pub fn var(n: &str) -> Type {
        Type::Var(n.to_string())
    }

    pub fn app(f: Type, a: Type) -> Type {
        Type::App(Box::new(f), Box::new(a))
    }

    pub fn arrow(a: Type, b: Type) -> Type {
        Type::app(Type::app(Type::Fun, a), b)
    }

    pub fn forall(v: &str, k: Kind, body: Type) -> Type {
        Type::Forall(v.to_string(), k, Box::new(body))
    }

    pub fn lam(v: &str, k: Kind, body: Type) -> Type {
        Type::Lam(v.to_string(), k, Box::new(body))
    }

    pub fn qual(p: Pred, t: Type) -> Type {
        Type::Qual(Box::new(p), Box::new(t))
    }

    pub fn labeled(l: Type, t: Type) -> Type {
        Type::Labeled(Box::new(l), Box::new(t))
    }

    pub fn label(n: &str) -> Type {
        Type::LabelConst(Label(n.to_string()))
    }

    pub fn sing(l: Type) -> Type {
        Type::Sing(Box::new(l))
    }

    pub fn row(entries: Vec<(Type, Type)>) -> Type {
        Type::RowLit(entries, Kind::ty())
    }

    pub fn pi(r: Type) -> Type {
        Type::Pi(Box::new(r))
    }

    pub fn sigma(r: Type) -> Type {
        Type::SigmaV(Box::new(r))
    }

    /// Splits `τ₁ -> τ₂` if this is a function type.
    pub fn as_arrow(&self) -> Option<(&Type, &Type)> {
        if let Type::App(f, cod) = self {
            if let Type::App(g, dom) = f.as_ref() {
                if matches!(g.as_ref(), Type::Fun) {
                    return Some((dom, cod));
                }
            }
        }
        None
    }
}

/// Row predicates: containment and combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pred {
    Contain(Dir, Type, Type),
    Combine(Type, Type, Type),
}

/// Surface terms (the calculus's term formers plus the explicit singleton
/// intro/elim coercion forms and
/// the test-prelude literals). Every term carries its source span.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub span: Span,
    pub kind: TermK,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermK {
    Var(Name),
    /// `\x. M` or `\x:T. M`; the annotation is optional in check position.
    Lam(Name, Option<Type>, Box<Term>),
    App(Box<Term>, Box<Term>),
    /// `/\a. M` or `/\a:K. M`.
    TyLam(Name, Option<Kind>, Box<Term>),
    /// `M [T]`.
    TyApp(Box<Term>, Type),
    /// A label constant as a term: the inhabitant of its singleton type.
    LabelVal(Label),
    /// `M1 |> M2`.
    LabelIntro(Box<Term>, Box<Term>),
    /// `M1 / M2`.
    Unlabel(Box<Term>, Box<Term>),
    Prj(Dir, Box<Term>),
    Concat(Box<Term>, Box<Term>),
    Inj(Dir, Box<Term>),
    Branch(Box<Term>, Box<Term>),
    /// `syn[φ] M`.
    Syn(Type, Box<Term>),
    /// `ana[φ] M`.
    Ana(Type, Box<Term>),
    /// `foldPi M1 M2 M3 N`.
    FoldPi(Box<Term>, Box<Term>, Box<Term>, Box<Term>),
    SingIntroPi(Box<Term>),
    SingElimPi(Box<Term>),
    SingIntroSig(Box<Term>),
    SingElimSig(Box<Term>),
    /// `(M : T)`.
    Ascribe(Box<Term>, Type),
    /// `()` — the empty record.
    Unit,
    IntLit(i64),
    BoolLit(bool),
}

impl Term {
    pub fn new(span: Span, kind: TermK) -> Term {
        Term { span, kind }
    }
}

/// Environment entries: kinding assumptions, typings, and predicates.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvEntry {
    TyVar(Name, Kind),
    TmVar(Name, Type),
    Assume(Pred),
}

/// An ordered typing environment. Later entries may mention earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    pub entries: Vec<EnvEntry>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn push_ty(&mut self, n: &str, k: Kind) {
        self.entries.push(EnvEntry::TyVar(n.to_string(), k));
    }

    pub fn push_tm(&mut self, n: &str, t: Type) {
        self.entries.push(EnvEntry::TmVar(n.to_string(), t));
    }

    pub fn push_pred(&mut self, p: Pred) {
        self.entries.push(EnvEntry::Assume(p));
    }

    pub fn lookup_ty(&self, n: &str) -> Option<&Kind> {
        self.entries.iter().rev().find_map(|e| match e {
            EnvEntry::TyVar(m, k) if m == n => Some(k),
            _ => None,
        })
    }

    pub fn lookup_tm(&self, n: &str) -> Option<&Type> {
        self.entries.iter().rev().find_map(|e| match e {
            EnvEntry::TmVar(m, t) if m == n => Some(t),
            _ => None,
        })
    }

    pub fn preds(&self) -> impl Iterator<Item = &Pred> {
        self.entries.iter().filter_map(|e| match e {
            EnvEntry::Assume(p) => Some(p),
            _ => None,
        })
    }
}

// ---------------------------------------------------------------------------
// Free variables and substitution
// ---------------------------------------------------------------------------

/// Free type-variable names of a type.
pub fn free_vars(t: &Type) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_free(t, &mut Vec::new(), &mut out);
    out
}

fn collect_free(t: &Type, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match t {
        Type::Var(n) => {
            if !bound.iter().any(|b| b == n) {
                out.insert(n.clone());
            }
        }
        Type::Fun | Type::Prim(_) | Type::LabelConst(_) => {}
        Type::Qual(p, body) => {
            collect_free_pred(p, bound, out);
            collect_free(body, bound, out);
        }
        Type::Forall(v, _, body) | Type::Lam(v, _, body) => {
            bound.push(v.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
        Type::App(f, a) | Type::RowMap(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
        Type::Sing(x) | Type::Pi(x) | Type::SigmaV(x) => collect_free(x, bound, out),
        Type::Labeled(l, p) | Type::CombineSugar(l, p) => {
            collect_free(l, bound, out);
            collect_free(p, bound, out);
        }
        Type::RowLit(entries, _) => {
            for (l, p) in entries {
                collect_free(l, bound, out);
                collect_free(p, bound, out);
            }
        }
    }
}

fn collect_free_pred(p: &Pred, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match p {
        Pred::Contain(_, a, b) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
        }
        Pred::Combine(a, b, c) => {
            collect_free(a, bound, out);
            collect_free(b, bound, out);
            collect_free(c, bound, out);
        }
    }
}

/// Picks a name based on `base` that avoids everything in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem = base.trim_end_matches('\'');
    let mut candidate = format!("{stem}'");
    let mut i = 1;
    while avoid.contains(&candidate) {
        i += 1;
        candidate = format!("{stem}'{i}");
    }
    candidate
}

/// Capture-avoiding substitution `target[replacement / var]`.
pub fn subst_ty(target: &Type, var: &str, replacement: &Type) -> Type {
    match target {
        Type::Var(n) => {
            if n == var {
                replacement.clone()
            } else {
                target.clone()
            }
        }
        Type::Fun | Type::Prim(_) | Type::LabelConst(_) => target.clone(),
        Type::Qual(p, body) => Type::qual(
            subst_pred(p, var, replacement),
            subst_ty(body, var, replacement),
        ),
        Type::Forall(v, k, body) => {
            let (v2, body2) = subst_under_binder(v, body, var, replacement);
            Type::Forall(v2, k.clone(), Box::new(body2))
        }
        Type::Lam(v, k, body) => {
            let (v2, body2) = subst_under_binder(v, body, var, replacement);
            Type::Lam(v2, k.clone(), Box::new(body2))
        }
        Type::App(f, a) => Type::app(subst_ty(f, var, replacement), subst_ty(a, var, replacement)),
        Type::RowMap(f, a) => Type::RowMap(
            Box::new(subst_ty(f, var, replacement)),
            Box::new(subst_ty(a, var, replacement)),
        ),
        Type::Sing(x) => Type::sing(subst_ty(x, var, replacement)),
        Type::Labeled(l, p) => Type::labeled(
            subst_ty(l, var, replacement),
            subst_ty(p, var, replacement),
        ),
        Type::RowLit(entries, k) => Type::RowLit(
            entries
                .iter()
                .map(|(l, p)| (subst_ty(l, var, replacement), subst_ty(p, var, replacement)))
                .collect(),
            k.clone(),
        ),
        Type::Pi(r) => Type::pi(subst_ty(r, var, replacement)),
        Type::SigmaV(r) => Type::sigma(subst_ty(r, var, replacement)),
        Type::CombineSugar(a, b) => Type::CombineSugar(
            Box::new(subst_ty(a, var, replacement)),
            Box::new(subst_ty(b, var, replacement)),
        ),
    }
}

fn subst_under_binder(v: &str, body: &Type, var: &str, replacement: &Type) -> (Name, Type) {
    if v == var {
        return (v.to_string(), body.clone());
    }
    let rep_free = free_vars(replacement);
    if rep_free.contains(v) && free_vars(body).contains(var) {
        let mut avoid = rep_free;
        avoid.extend(free_vars(body));
        avoid.insert(var.to_string());
        let v2 = fresh_name(v, &avoid);
        let renamed = subst_ty(body, v, &Type::Var(v2.clone()));
        (v2.clone(), subst_ty(&renamed, var, replacement))
    } else {
        (v.to_string(), subst_ty(body, var, replacement))
    }
}

pub fn subst_pred(p: &Pred, var: &str, replacement: &Type) -> Pred {
    match p {
        Pred::Contain(d, a, b) => Pred::Contain(
            *d,
            subst_ty(a, var, replacement),
            subst_ty(b, var, replacement),
        ),
        Pred::Combine(a, b, c) => Pred::Combine(
            subst_ty(a, var, replacement),
            subst_ty(b, var, replacement),
            subst_ty(c, var, replacement),
        ),
    }
}

/// Applies several substitutions in sequence (later entries see the results
/// of earlier ones; callers are expected to pass disjoint variables).
pub fn subst_many(target: &Type, pairs: &[(Name, Type)]) -> Type {
    let mut out = target.clone();
    for (v, t) in pairs {
        out = subst_ty(&out, v, t);
    }
    out
}

// ---------------------------------------------------------------------------
// Alpha-equality
// ---------------------------------------------------------------------------

struct AlphaCtx {
    left: Vec<Name>,
    right: Vec<Name>,
}

impl AlphaCtx {
    fn new() -> AlphaCtx {
        AlphaCtx {
            left: Vec::new(),
            right: Vec::new(),
        }
    }

    fn vars_eq(&self, a: &str, b: &str) -> bool {
        let la = self.left.iter().rposition(|n| n == a);
        let rb = self.right.iter().rposition(|n| n == b);
        match (la, rb) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }
}

/// Alpha-equality on types: true iff `a` and `b` differ only in bound names.
pub fn alpha_eq(a: &Type, b: &Type) -> bool {
    alpha_eq_in(a, b, &mut AlphaCtx::new())
}

fn alpha_eq_in(a: &Type, b: &Type, cx: &mut AlphaCtx) -> bool {
    match (a, b) {
        (Type::Var(x), Type::Var(y)) => cx.vars_eq(x, y),
        (Type::Fun, Type::Fun) => true,
        (Type::Prim(p), Type::Prim(q)) => p == q,
        (Type::LabelConst(l), Type::LabelConst(m)) => l == m,
        (Type::Qual(p1, t1), Type::Qual(p2, t2)) => {
            alpha_eq_pred_in(p1, p2, cx) && alpha_eq_in(t1, t2, cx)
        }
        (Type::Forall(v1, k1, b1), Type::Forall(v2, k2, b2))
        | (Type::Lam(v1, k1, b1), Type::Lam(v2, k2, b2)) => {
            if !k1.same_erased(k2) {
                return false;
            }
            cx.left.push(v1.clone());
            cx.right.push(v2.clone());
            let r = alpha_eq_in(b1, b2, cx);
            cx.left.pop();
            cx.right.pop();
            r
        }
        (Type::App(f1, a1), Type::App(f2, a2)) | (Type::RowMap(f1, a1), Type::RowMap(f2, a2)) => {
            alpha_eq_in(f1, f2, cx) && alpha_eq_in(a1, a2, cx)
        }
        (Type::Sing(x), Type::Sing(y)) => alpha_eq_in(x, y, cx),
        (Type::Labeled(l1, p1), Type::Labeled(l2, p2)) => {
            alpha_eq_in(l1, l2, cx) && alpha_eq_in(p1, p2, cx)
        }
        (Type::RowLit(e1, _), Type::RowLit(e2, _)) => {
            e1.len() == e2.len()
                && e1.iter().zip(e2).all(|((l1, p1), (l2, p2))| {
                    alpha_eq_in(l1, l2, cx) && alpha_eq_in(p1, p2, cx)
                })
        }
        (Type::Pi(r1), Type::Pi(r2)) | (Type::SigmaV(r1), Type::SigmaV(r2)) => {
            alpha_eq_in(r1, r2, cx)
        }
        (Type::CombineSugar(a1, b1), Type::CombineSugar(a2, b2)) => {
            alpha_eq_in(a1, a2, cx) && alpha_eq_in(b1, b2, cx)
        }
        _ => false,
    }
}

pub fn alpha_eq_pred(a: &Pred, b: &Pred) -> bool {
    alpha_eq_pred_in(a, b, &mut AlphaCtx::new())
}

fn alpha_eq_pred_in(a: &Pred, b: &Pred, cx: &mut AlphaCtx) -> bool {
    match (a, b) {
        (Pred::Contain(d1, a1, b1), Pred::Contain(d2, a2, b2)) => {
            d1 == d2 && alpha_eq_in(a1, a2, cx) && alpha_eq_in(b1, b2, cx)
        }
        (Pred::Combine(a1, b1, c1), Pred::Combine(a2, b2, c2)) => {
            alpha_eq_in(a1, a2, cx) && alpha_eq_in(b1, b2, cx) && alpha_eq_in(c1, c2, cx)
        }
        _ => false,
    }
}

/// Alpha-equality on terms, ignoring spans. Type annotations are compared
/// with type alpha-equality under the shared binder map.
pub fn alpha_eq_term(a: &Term, b: &Term) -> bool {
    fn go(a: &Term, b: &Term, tys: &mut AlphaCtx, tms: &mut AlphaCtx) -> bool {
        use TermK::*;
        match (&a.kind, &b.kind) {
            (Var(x), Var(y)) => tms.vars_eq(x, y),
            (Lam(x1, t1, b1), Lam(x2, t2, b2)) => {
                let anns = match (t1, t2) {
                    (Some(t1), Some(t2)) => alpha_eq_in(t1, t2, tys),
                    (None, None) => true,
                    _ => false,
                };
                if !anns {
                    return false;
                }
                tms.left.push(x1.clone());
                tms.right.push(x2.clone());
                let r = go(b1, b2, tys, tms);
                tms.left.pop();
                tms.right.pop();
                r
            }
            (App(f1, a1), App(f2, a2)) => go(f1, f2, tys, tms) && go(a1, a2, tys, tms),
            (TyLam(v1, k1, b1), TyLam(v2, k2, b2)) => {
                let ks = match (k1, k2) {
                    (Some(k1), Some(k2)) => k1.same_erased(k2),
                    (None, None) => true,
                    _ => false,
                };
                if !ks {
                    return false;
                }
                tys.left.push(v1.clone());
                tys.right.push(v2.clone());
                let r = go(b1, b2, tys, tms);
                tys.left.pop();
                tys.right.pop();
                r
            }
            (TyApp(f1, t1), TyApp(f2, t2)) => go(f1, f2, tys, tms) && alpha_eq_in(t1, t2, tys),
            (LabelVal(l1), LabelVal(l2)) => l1 == l2,
            (LabelIntro(a1, b1), LabelIntro(a2, b2))
            | (Unlabel(a1, b1), Unlabel(a2, b2))
            | (Concat(a1, b1), Concat(a2, b2))
            | (Branch(a1, b1), Branch(a2, b2)) => go(a1, a2, tys, tms) && go(b1, b2, tys, tms),
            (Prj(d1, m1), Prj(d2, m2)) | (Inj(d1, m1), Inj(d2, m2)) => {
                d1 == d2 && go(m1, m2, tys, tms)
            }
            (Syn(t1, m1), Syn(t2, m2)) | (Ana(t1, m1), Ana(t2, m2)) => {
                alpha_eq_in(t1, t2, tys) && go(m1, m2, tys, tms)
            }
            (FoldPi(a1, b1, c1, d1), FoldPi(a2, b2, c2, d2)) => {
                go(a1, a2, tys, tms)
                    && go(b1, b2, tys, tms)
                    && go(c1, c2, tys, tms)
                    && go(d1, d2, tys, tms)
            }
            (SingIntroPi(m1), SingIntroPi(m2))
            | (SingElimPi(m1), SingElimPi(m2))
            | (SingIntroSig(m1), SingIntroSig(m2))
            | (SingElimSig(m1), SingElimSig(m2)) => go(m1, m2, tys, tms),
            (Ascribe(m1, t1), Ascribe(m2, t2)) => {
                go(m1, m2, tys, tms) && alpha_eq_in(t1, t2, tys)
            }
            (Unit, Unit) => true,
            (IntLit(i), IntLit(j)) => i == j,
            (BoolLit(p), BoolLit(q)) => p == q,
            _ => false,
        }
    }
    go(a, b, &mut AlphaCtx::new(), &mut AlphaCtx::new())
}
