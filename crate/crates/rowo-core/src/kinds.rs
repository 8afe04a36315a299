//! Context formation, kinding, and predicate formation, plus the stratified
//! level checker used by `--stratified`.
//!
//! Kinding of concrete row literals is delegated to the active row theory.
//! Application kinds deterministically: ordinary application is tried first,
//! then lifting a row of constructors over an argument, then lifting a
//! constructor over a row.

use crate::ast::{Env, EnvEntry, Kind, Pred, PrimTy, Span, Type};
use crate::rows::Theory;
use crate::surface::print_kind;

#[derive(Debug, Clone, PartialEq)]
pub struct KindError {
    pub span: Span,
    pub reason: KindErrorReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KindErrorReason {
    UnboundVar(String),
    KindMismatch { expected: String, got: String },
    RowTheoryRejected(String),
    NotARow(String),
    NotAConstructor(String),
    LevelViolation { required: u32, allowed: u32 },
}

impl std::fmt::Display for KindError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.reason {
            KindErrorReason::UnboundVar(n) => write!(f, "unbound type variable `{n}`"),
            KindErrorReason::KindMismatch { expected, got } => {
                write!(f, "kind mismatch: expected {expected}, got {got}")
            }
            KindErrorReason::RowTheoryRejected(msg) => {
                write!(f, "row rejected by the active theory: {msg}")
            }
            KindErrorReason::NotARow(msg) => write!(f, "expected a row: {msg}"),
            KindErrorReason::NotAConstructor(msg) => {
                write!(f, "expected a type constructor: {msg}")
            }
            KindErrorReason::LevelViolation { required, allowed } => {
                write!(
                    f,
                    "level violation: requires level {required}, but only {allowed} is allowed"
                )
            }
        }
    }
}

impl std::error::Error for KindError {}

fn err(reason: KindErrorReason) -> KindError {
    KindError {
        span: Span::default(),
        reason,
    }
}

fn mismatch(expected: &Kind, got: &Kind) -> KindError {
    err(KindErrorReason::KindMismatch {
        expected: print_kind(expected),
        got: print_kind(got),
    })
}

/// Context formation: every term binding kinds to `Type`, every assumed
/// predicate is well-formed.
pub fn env_ok(theory: Theory, env: &Env) -> Result<(), KindError> {
    let mut prefix = Env::new();
    for entry in &env.entries {
        match entry {
            EnvEntry::TyVar(n, k) => prefix.push_ty(n, k.clone()),
            EnvEntry::TmVar(n, t) => {
                let k = kind_of(theory, &prefix, t)?;
                if !k.same_erased(&Kind::ty()) {
                    return Err(mismatch(&Kind::ty(), &k));
                }
                prefix.push_tm(n, t.clone());
            }
            EnvEntry::Assume(p) => {
                pred_ok(theory, &prefix, p)?;
                prefix.push_pred(p.clone());
            }
        }
    }
    Ok(())
}

/// Returns the unique kind derivable for `τ`.
pub fn kind_of(theory: Theory, env: &Env, ty: &Type) -> Result<Kind, KindError> {
    match ty {
        Type::Var(n) => env
            .lookup_ty(n)
            .map(|k| k.erase_levels())
            .ok_or_else(|| err(KindErrorReason::UnboundVar(n.clone()))),
        Type::Fun => Ok(Kind::arrow(Kind::ty(), Kind::arrow(Kind::ty(), Kind::ty()))),
        Type::Prim(PrimTy::Int) | Type::Prim(PrimTy::Bool) => Ok(Kind::ty()),
        Type::Prim(PrimTy::List) => Ok(Kind::arrow(Kind::ty(), Kind::ty())),
        Type::Qual(p, body) => {
            pred_ok(theory, env, p)?;
            let mut inner = env.clone();
            inner.push_pred((**p).clone());
            let k = kind_of(theory, &inner, body)?;
            if !k.same_erased(&Kind::ty()) {
                return Err(mismatch(&Kind::ty(), &k));
            }
            Ok(Kind::ty())
        }
        Type::Forall(v, k, body) => {
            let mut inner = env.clone();
            inner.push_ty(v, k.clone());
            let kb = kind_of(theory, &inner, body)?;
            if !kb.same_erased(&Kind::ty()) {
                return Err(mismatch(&Kind::ty(), &kb));
            }
            Ok(Kind::ty())
        }
        Type::Lam(v, k, body) => {
            let mut inner = env.clone();
            inner.push_ty(v, k.clone());
            let kb = kind_of(theory, &inner, body)?;
            Ok(Kind::arrow(k.erase_levels(), kb))
        }
        Type::App(f, a) => {
            let kf = kind_of(theory, env, f)?;
            let ka = kind_of(theory, env, a)?;
            apply_kind(&kf, &ka)
        }
        Type::RowMap(f, r) => {
            let kf = kind_of(theory, env, f)?;
            let kr = kind_of(theory, env, r)?;
            match (&kf, &kr) {
                (Kind::Arrow(d, c), Kind::Row(e)) if d.same_erased(e) => {
                    Ok(Kind::row((**c).clone()))
                }
                _ => Err(mismatch(&Kind::row(Kind::ty()), &kr)),
            }
        }
        Type::LabelConst(_) => Ok(Kind::Lab),
        Type::Sing(x) => {
            let k = kind_of(theory, env, x)?;
            if k.same_erased(&Kind::Lab) {
                Ok(Kind::ty())
            } else {
                Err(mismatch(&Kind::Lab, &k))
            }
        }
        Type::Labeled(l, p) => {
            let kl = kind_of(theory, env, l)?;
            if !kl.same_erased(&Kind::Lab) {
                return Err(mismatch(&Kind::Lab, &kl));
            }
            kind_of(theory, env, p)
        }
        Type::RowLit(entries, hint) => {
            let mut elem: Option<Kind> = None;
            for (l, p) in entries {
                let kl = kind_of(theory, env, l)?;
                if !kl.same_erased(&Kind::Lab) {
                    return Err(mismatch(&Kind::Lab, &kl));
                }
                let kp = kind_of(theory, env, p)?;
                match &elem {
                    None => elem = Some(kp),
                    Some(k) if k.same_erased(&kp) => {}
                    Some(k) => return Err(mismatch(k, &kp)),
                }
            }
            let elem = elem.unwrap_or_else(|| hint.erase_levels());
            theory.row_kind_ok(entries)?;
            Ok(Kind::row(elem))
        }
        Type::Pi(r) | Type::SigmaV(r) => {
            let kr = kind_of(theory, env, r)?;
            match kr {
                Kind::Row(k) => Ok(*k),
                other => Err(err(KindErrorReason::NotARow(print_kind(&other)))),
            }
        }
        Type::CombineSugar(_, _) => Err(err(KindErrorReason::NotARow(
            "a combination `r1 o+ r2` may only appear where the elaborator can introduce a fresh row variable for it".to_string(),
        ))),
    }
}

/// Application kinding: ordinary `k-→E` first, then `k-lift₁` (a row of
/// constructors applied to an argument), then `k-lift₂` (a constructor
/// applied to a row).
fn apply_kind(kf: &Kind, ka: &Kind) -> Result<Kind, KindError> {
    match kf {
        Kind::Arrow(dom, cod) => {
            if ka.same_erased(dom) {
                Ok((**cod).clone())
            } else if let Kind::Row(e) = ka {
                if e.same_erased(dom) {
                    Ok(Kind::row((**cod).clone()))
                } else {
                    Err(mismatch(dom, ka))
                }
            } else {
                Err(mismatch(dom, ka))
            }
        }
        Kind::Row(inner) => match inner.as_ref() {
            Kind::Arrow(dom, cod) => {
                if ka.same_erased(dom) {
                    Ok(Kind::row((**cod).clone()))
                } else {
                    Err(mismatch(dom, ka))
                }
            }
            other => Err(err(KindErrorReason::NotAConstructor(print_kind(other)))),
        },
        other => Err(err(KindErrorReason::NotAConstructor(print_kind(other)))),
    }
}

/// Predicate formation: all row arguments share one row kind.
pub fn pred_ok(theory: Theory, env: &Env, p: &Pred) -> Result<(), KindError> {
    let rows: Vec<&Type> = match p {
        Pred::Contain(_, a, b) => vec![a, b],
        Pred::Combine(a, b, c) => vec![a, b, c],
    };
    let mut common: Option<Kind> = None;
    for r in rows {
        let k = kind_of(theory, env, r)?;
        match k {
            Kind::Row(elem) => match &common {
                None => common = Some(*elem),
                Some(c) if c.same_erased(&elem) => {}
                Some(c) => return Err(mismatch(&Kind::row(c.clone()), &Kind::row(*elem))),
            },
            other => return Err(err(KindErrorReason::NotARow(print_kind(&other)))),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stratified levels
// ---------------------------------------------------------------------------

/// Fills in missing levels with 0, the minimal level.
fn leveled(k: &Kind) -> Kind {
    match k {
        Kind::Type(l) => Kind::Type(Some(l.unwrap_or(0))),
        Kind::Lab => Kind::Lab,
        Kind::Row(inner) => Kind::row(leveled(inner)),
        Kind::Arrow(a, b) => Kind::arrow(leveled(a), leveled(b)),
    }
}

/// Computes the minimal level at which `τ` kinds, together with its
/// level-annotated kind. Cumulativity is built in: any level above the
/// result is also admissible.
pub fn level_of(theory: Theory, env: &Env, ty: &Type) -> Result<(Kind, u32), KindError> {
    match ty {
        Type::Var(n) => {
            let k = env
                .lookup_ty(n)
                .ok_or_else(|| err(KindErrorReason::UnboundVar(n.clone())))?;
            let k = leveled(k);
            let l = k.level();
            Ok((k, l))
        }
        Type::Fun => Ok((
            Kind::arrow(
                Kind::Type(Some(0)),
                Kind::arrow(Kind::Type(Some(0)), Kind::Type(Some(0))),
            ),
            0,
        )),
        Type::Prim(PrimTy::Int) | Type::Prim(PrimTy::Bool) => Ok((Kind::Type(Some(0)), 0)),
        Type::Prim(PrimTy::List) => Ok((
            Kind::arrow(Kind::Type(Some(0)), Kind::Type(Some(0))),
            0,
        )),
        Type::Qual(p, body) => {
            let i = pred_level(theory, env, p)?;
            let (kb, j) = level_of(theory, env, body)?;
            if !kb.same_erased(&Kind::ty()) {
                return Err(mismatch(&Kind::ty(), &kb));
            }
            let l = (i + 1).max(j);
            Ok((Kind::Type(Some(l)), l))
        }
        Type::Forall(v, k, body) => {
            let k = leveled(k);
            let i = k.level();
            let mut inner = env.clone();
            inner.push_ty(v, k);
            let (kb, j) = level_of(theory, &inner, body)?;
            if !kb.same_erased(&Kind::ty()) {
                return Err(mismatch(&Kind::ty(), &kb));
            }
            let l = (i + 1).max(j);
            Ok((Kind::Type(Some(l)), l))
        }
        Type::Lam(v, k, body) => {
            let k = leveled(k);
            let mut inner = env.clone();
            inner.push_ty(v, k.clone());
            let (kb, _) = level_of(theory, &inner, body)?;
            let out = Kind::arrow(k, kb);
            let l = out.level();
            Ok((out, l))
        }
        Type::App(f, a) => {
            // A bare or partially applied function constant adapts its level
            // to the argument.
            let (kf, _) = level_of(theory, env, f)?;
            let (ka, la) = level_of(theory, env, a)?;
            let adapt_fun = matches!(strip_app_head(ty), Type::Fun);
            apply_level(&kf, &ka, la, adapt_fun)
        }
        Type::RowMap(f, r) => {
            let (kf, _) = level_of(theory, env, f)?;
            let (kr, lr) = level_of(theory, env, r)?;
            apply_level(&kf, &kr, lr, false)
        }
        Type::LabelConst(_) => Ok((Kind::Lab, 0)),
        Type::Sing(x) => {
            let (kx, _) = level_of(theory, env, x)?;
            if kx.same_erased(&Kind::Lab) {
                Ok((Kind::Type(Some(0)), 0))
            } else {
                Err(mismatch(&Kind::Lab, &kx))
            }
        }
        Type::Labeled(_, p) => level_of(theory, env, p),
        Type::RowLit(entries, hint) => {
            let mut elem: Option<Kind> = None;
            let mut level = 0;
            for (_, p) in entries {
                let (kp, lp) = level_of(theory, env, p)?;
                level = level.max(lp);
                match &elem {
                    None => elem = Some(kp),
                    Some(k) if k.same_erased(&kp) => {
                        if kp.level() > k.level() {
                            elem = Some(kp);
                        }
                    }
                    Some(k) => return Err(mismatch(k, &kp)),
                }
            }
            let elem = bump_to_level(&elem.unwrap_or_else(|| leveled(hint)), level);
            Ok((Kind::row(elem), level))
        }
        Type::Pi(r) | Type::SigmaV(r) => {
            let (kr, lr) = level_of(theory, env, r)?;
            match kr {
                Kind::Row(k) => Ok((*k, lr)),
                other => Err(err(KindErrorReason::NotARow(print_kind(&other)))),
            }
        }
        Type::CombineSugar(_, _) => Err(err(KindErrorReason::NotARow(
            "combination sugar has no stratified kind; only its elaborated form is level-checked"
                .to_string(),
        ))),
    }
}

fn strip_app_head(ty: &Type) -> &Type {
    match ty {
        Type::App(f, _) => strip_app_head(f),
        other => other,
    }
}

/// Raise a `Type[i]` kind to at least `l` (cumulativity).
fn bump_to_level(k: &Kind, l: u32) -> Kind {
    match k {
        Kind::Type(Some(i)) => Kind::Type(Some(*i.max(&l))),
        other => other.clone(),
    }
}

fn apply_level(kf: &Kind, ka: &Kind, la: u32, adapt_fun: bool) -> Result<(Kind, u32), KindError> {
    match kf {
        Kind::Arrow(dom, cod) => {
            let allowed = dom.level();
            if ka.same_erased(dom) {
                if la > allowed && !adapt_fun {
                    return Err(err(KindErrorReason::LevelViolation {
                        required: la,
                        allowed,
                    }));
                }
                let cod = if adapt_fun {
                    bump_to_level(cod, la.max(cod.level()))
                } else {
                    (**cod).clone()
                };
                let l = cod.level();
                Ok((cod, l))
            } else if let Kind::Row(e) = ka {
                if !e.same_erased(dom) {
                    return Err(mismatch(dom, ka));
                }
                if e.level() > allowed && !adapt_fun {
                    return Err(err(KindErrorReason::LevelViolation {
                        required: e.level(),
                        allowed,
                    }));
                }
                let cod = if adapt_fun {
                    bump_to_level(cod, la.max(cod.level()))
                } else {
                    (**cod).clone()
                };
                let l = cod.level().max(la);
                Ok((Kind::row(cod), l))
            } else {
                Err(mismatch(dom, ka))
            }
        }
        Kind::Row(inner) => match inner.as_ref() {
            Kind::Arrow(dom, cod) => {
                if ka.same_erased(dom) {
                    if la > dom.level() {
                        return Err(err(KindErrorReason::LevelViolation {
                            required: la,
                            allowed: dom.level(),
                        }));
                    }
                    let l = cod.level();
                    Ok((Kind::row((**cod).clone()), l))
                } else {
                    Err(mismatch(dom, ka))
                }
            }
            other => Err(err(KindErrorReason::NotAConstructor(print_kind(other)))),
        },
        other => Err(err(KindErrorReason::NotAConstructor(print_kind(other)))),
    }
}

fn pred_level(theory: Theory, env: &Env, p: &Pred) -> Result<u32, KindError> {
    let rows: Vec<&Type> = match p {
        Pred::Contain(_, a, b) => vec![a, b],
        Pred::Combine(a, b, c) => vec![a, b, c],
    };
    let mut level = 0;
    for r in rows {
        let (k, l) = level_of(theory, env, r)?;
        if !matches!(k, Kind::Row(_)) {
            return Err(err(KindErrorReason::NotARow(print_kind(&k))));
        }
        level = level.max(l);
    }
    Ok(level)
}
