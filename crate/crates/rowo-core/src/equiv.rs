//! Type and predicate equivalence, decided by normalization.
//!
//! Normal forms have no beta-redexes, lift applications are pushed through
//! concrete rows entrywise, applications stuck on an abstract row are
//! canonicalized to a composed `RowMap` spine, `Π`/`Σ` of singleton rows are
//! rewritten to the labeled type, and simple-theory concrete rows are sorted
//! by label. Equivalence is then structural comparison modulo alpha and the
//! active theory's row equivalence.

use crate::ast::{fresh_name, free_vars, subst_ty, Dir, Env, Kind, Label, Pred, Type};
use crate::kinds::kind_of;
use crate::rows::Theory;
use crate::surface::TheoryName;

/// Normalizes a well-kinded type. Preserves kind; idempotent.
pub fn normalize(theory: Theory, env: &Env, ty: &Type) -> Type {
    match ty {
        Type::Var(_) | Type::Fun | Type::Prim(_) | Type::LabelConst(_) => ty.clone(),
        Type::Qual(p, body) => Type::qual(
            normalize_pred(theory, env, p),
            normalize(theory, env, body),
        ),
        Type::Forall(v, k, body) => {
            let mut inner = env.clone();
            inner.push_ty(v, k.clone());
            Type::Forall(v.clone(), k.clone(), Box::new(normalize(theory, &inner, body)))
        }
        Type::Lam(v, k, body) => {
            let mut inner = env.clone();
            inner.push_ty(v, k.clone());
            Type::Lam(v.clone(), k.clone(), Box::new(normalize(theory, &inner, body)))
        }
        Type::App(f, a) => {
            let f = normalize(theory, env, f);
            let a = normalize(theory, env, a);
            apply_norm(theory, env, f, a)
        }
        Type::RowMap(f, r) => {
            let f = normalize(theory, env, f);
            let r = normalize(theory, env, r);
            row_map_norm(theory, env, f, r)
        }
        Type::Sing(x) => Type::sing(normalize(theory, env, x)),
        Type::Labeled(l, p) => Type::labeled(normalize(theory, env, l), normalize(theory, env, p)),
        Type::RowLit(entries, hint) => {
            let entries: Vec<(Type, Type)> = entries
                .iter()
                .map(|(l, p)| (normalize(theory, env, l), normalize(theory, env, p)))
                .collect();
            Type::RowLit(canonical_row_order(theory, entries), hint.clone())
        }
        Type::Pi(r) => {
            let r = normalize(theory, env, r);
            match singleton_entry(&r) {
                Some((l, p)) => Type::labeled(l, p),
                None => Type::pi(r),
            }
        }
        Type::SigmaV(r) => {
            let r = normalize(theory, env, r);
            match singleton_entry(&r) {
                Some((l, p)) => Type::labeled(l, p),
                None => Type::sigma(r),
            }
        }
        Type::CombineSugar(a, b) => Type::CombineSugar(
            Box::new(normalize(theory, env, a)),
            Box::new(normalize(theory, env, b)),
        ),
    }
}

fn singleton_entry(row: &Type) -> Option<(Type, Type)> {
    if let Type::RowLit(entries, _) = row {
        if entries.len() == 1 {
            return Some(entries[0].clone());
        }
    }
    None
}

/// Under the simple theory, concrete rows are kept sorted by label name so
/// permutation equivalence is definitional. Other theories keep literal
/// order.
fn canonical_row_order(theory: Theory, mut entries: Vec<(Type, Type)>) -> Vec<(Type, Type)> {
    if theory.name == TheoryName::Simple
        && entries.len() > 1
        && entries.iter().all(|(l, _)| matches!(l, Type::LabelConst(_)))
    {
        entries.sort_by(|(a, _), (b, _)| {
            let an = match a {
                Type::LabelConst(Label(n)) => n,
                _ => unreachable!(),
            };
            let bn = match b {
                Type::LabelConst(Label(n)) => n,
                _ => unreachable!(),
            };
            an.cmp(bn)
        });
    }
    entries
}

/// Applies one normal form to another, firing beta, the entrywise lift
/// rules, the `(K ρ) τ ≡ K (ρ τ)` rule, and stuck-map composition.
fn apply_norm(theory: Theory, env: &Env, f: Type, a: Type) -> Type {
    // Beta, when the argument's kind matches the binder's kind.
    if let Type::Lam(v, k, body) = &f {
        let ka = kind_of(theory, env, &a);
        if let Ok(ka) = ka {
            if ka.same_erased(k) {
                let mut inner = env.clone();
                inner.push_ty(v, k.clone());
                return normalize(theory, env, &subst_ty(body, v, &a));
            }
        }
    }
    // A concrete row applied to an argument: apply entrywise.
    if let Type::RowLit(entries, hint) = &f {
        let entries = entries
            .iter()
            .map(|(l, p)| (l.clone(), apply_norm(theory, env, p.clone(), a.clone())))
            .collect();
        return Type::RowLit(canonical_row_order(theory, entries), hint.clone());
    }
    // (K ρ) τ ≡ K (ρ τ).
    match f {
        Type::Pi(r) => {
            let inner = apply_norm(theory, env, *r, a);
            return normalize_k(theory, Type::pi(inner));
        }
        Type::SigmaV(r) => {
            let inner = apply_norm(theory, env, *r, a);
            return normalize_k(theory, Type::sigma(inner));
        }
        _ => {}
    }
    // Lifted application over an abstract row: canonicalize to RowMap.
    let kf = kind_of(theory, env, &f);
    let ka = kind_of(theory, env, &a);
    if let (Ok(kf), Ok(ka)) = (&kf, &ka) {
        match (kf, ka) {
            // Constructor applied to a row (k-lift₂).
            (Kind::Arrow(dom, _), Kind::Row(e)) if e.same_erased(dom) => {
                if let Type::RowLit(entries, hint) = &a {
                    let entries = entries
                        .iter()
                        .map(|(l, p)| (l.clone(), apply_norm(theory, env, f.clone(), p.clone())))
                        .collect();
                    return Type::RowLit(canonical_row_order(theory, entries), hint.clone());
                }
                return row_map_norm(theory, env, f, a);
            }
            // Abstract row applied to an argument (k-lift₁): map entries
            // through application to `a`.
            (Kind::Row(inner), _) => {
                if let Kind::Arrow(dom, _) = inner.as_ref() {
                    if ka.same_erased(dom) {
                        let binder_kind = (**inner).clone();
                        let fv = free_vars(&a);
                        let x = fresh_name("x", &fv);
                        let body = Type::app(Type::var(&x), a);
                        let lam = Type::Lam(x, binder_kind, Box::new(body));
                        return row_map_norm(theory, env, lam, f);
                    }
                }
            }
            _ => {}
        }
    }
    Type::app(f, a)
}

/// Re-applies the singleton rewrite after building a `Π`/`Σ`.
fn normalize_k(_theory: Theory, t: Type) -> Type {
    match &t {
        Type::Pi(r) | Type::SigmaV(r) => match singleton_entry(r) {
            Some((l, p)) => Type::labeled(l, p),
            None => t,
        },
        _ => t,
    }
}

/// Builds the canonical stuck map `RowMap(φ, ρ)`, composing nested maps,
/// collapsing the identity, and distributing over concrete rows.
fn row_map_norm(theory: Theory, env: &Env, phi: Type, row: Type) -> Type {
    // Identity map.
    if let Type::Lam(v, _, body) = &phi {
        if matches!(body.as_ref(), Type::Var(n) if n == v) {
            return row;
        }
    }
    match row {
        Type::RowLit(entries, hint) => {
            let entries = entries
                .into_iter()
                .map(|(l, p)| (l, apply_norm(theory, env, phi.clone(), p)))
                .collect();
            Type::RowLit(canonical_row_order(theory, entries), hint)
        }
        Type::RowMap(psi, base) => {
            // Compose: RowMap(φ) ∘ RowMap(ψ) = RowMap(λx. φ (ψ x)).
            let dom = match kind_of(theory, env, &psi) {
                Ok(Kind::Arrow(d, _)) => (*d).clone(),
                _ => Kind::ty(),
            };
            let mut avoid = free_vars(&phi);
            avoid.extend(free_vars(&psi));
            let x = fresh_name("x", &avoid);
            let composed_body = Type::app(phi, Type::app(*psi, Type::var(&x)));
            let mut inner = env.clone();
            inner.push_ty(&x, dom.clone());
            let body = normalize(theory, &inner, &composed_body);
            let composed = Type::Lam(x.clone(), dom, Box::new(body));
            if let Type::Lam(v, _, b) = &composed {
                if matches!(b.as_ref(), Type::Var(n) if n == v) {
                    return *base;
                }
            }
            Type::RowMap(Box::new(composed), base)
        }
        Type::Labeled(l, p) => {
            // A labeled row is transparent to mapping.
            let inner = row_map_norm(theory, env, phi, *p);
            Type::labeled(*l, inner)
        }
        other => Type::RowMap(Box::new(phi), Box::new(other)),
    }
}

pub fn normalize_pred(theory: Theory, env: &Env, p: &Pred) -> Pred {
    match p {
        Pred::Contain(d, a, b) => {
            // The simple theory identifies the two directions.
            let d = if theory.name == TheoryName::Simple {
                Dir::L
            } else {
                *d
            };
            Pred::Contain(d, normalize(theory, env, a), normalize(theory, env, b))
        }
        Pred::Combine(a, b, c) => Pred::Combine(
            normalize(theory, env, a),
            normalize(theory, env, b),
            normalize(theory, env, c),
        ),
    }
}

/// Decides equivalence by normalizing both sides.
pub fn type_equiv(theory: Theory, env: &Env, a: &Type, b: &Type) -> bool {
    let na = normalize(theory, env, a);
    let nb = normalize(theory, env, b);
    equiv_normed(theory, &na, &nb)
}

pub fn pred_equiv(theory: Theory, env: &Env, a: &Pred, b: &Pred) -> bool {
    let na = normalize_pred(theory, env, a);
    let nb = normalize_pred(theory, env, b);
    pred_equiv_normed(theory, &na, &nb)
}

// ---------------------------------------------------------------------------
// Structural comparison of normal forms
// ---------------------------------------------------------------------------

struct Binders {
    left: Vec<String>,
    right: Vec<String>,
}

impl Binders {
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

/// Equivalence of two normal forms: alpha-equality with row literals
/// compared modulo the theory's row equivalence.
pub fn equiv_normed(theory: Theory, a: &Type, b: &Type) -> bool {
    go(
        theory,
        a,
        b,
        &mut Binders {
            left: Vec::new(),
            right: Vec::new(),
        },
    )
}

fn go(theory: Theory, a: &Type, b: &Type, cx: &mut Binders) -> bool {
    match (a, b) {
        (Type::Var(x), Type::Var(y)) => cx.vars_eq(x, y),
        (Type::Fun, Type::Fun) => true,
        (Type::Prim(p), Type::Prim(q)) => p == q,
        (Type::LabelConst(l), Type::LabelConst(m)) => l == m,
        (Type::Qual(p1, t1), Type::Qual(p2, t2)) => {
            preds_go(theory, p1, p2, cx) && go(theory, t1, t2, cx)
        }
        (Type::Forall(v1, k1, b1), Type::Forall(v2, k2, b2))
        | (Type::Lam(v1, k1, b1), Type::Lam(v2, k2, b2)) => {
            if !k1.same_erased(k2) {
                return false;
            }
            cx.left.push(v1.clone());
            cx.right.push(v2.clone());
            let r = go(theory, b1, b2, cx);
            cx.left.pop();
            cx.right.pop();
            r
        }
        (Type::App(f1, a1), Type::App(f2, a2)) | (Type::RowMap(f1, a1), Type::RowMap(f2, a2)) => {
            go(theory, f1, f2, cx) && go(theory, a1, a2, cx)
        }
        (Type::Sing(x), Type::Sing(y)) => go(theory, x, y, cx),
        (Type::Labeled(l1, p1), Type::Labeled(l2, p2)) => {
            go(theory, l1, l2, cx) && go(theory, p1, p2, cx)
        }
        (Type::Pi(r1), Type::Pi(r2)) | (Type::SigmaV(r1), Type::SigmaV(r2)) => {
            go(theory, r1, r2, cx)
        }
        (Type::RowLit(e1, _), Type::RowLit(e2, _)) => rows_go(theory, e1, e2, cx),
        (Type::CombineSugar(a1, b1), Type::CombineSugar(a2, b2)) => {
            go(theory, a1, a2, cx) && go(theory, b1, b2, cx)
        }
        _ => false,
    }
}

fn preds_go(theory: Theory, a: &Pred, b: &Pred, cx: &mut Binders) -> bool {
    match (a, b) {
        (Pred::Contain(d1, a1, b1), Pred::Contain(d2, a2, b2)) => {
            let dirs_ok = d1 == d2 || theory.name == TheoryName::Simple;
            dirs_ok && go(theory, a1, a2, cx) && go(theory, b1, b2, cx)
        }
        (Pred::Combine(a1, b1, c1), Pred::Combine(a2, b2, c2)) => {
            go(theory, a1, a2, cx) && go(theory, b1, b2, cx) && go(theory, c1, c2, cx)
        }
        _ => false,
    }
}

pub fn pred_equiv_normed(theory: Theory, a: &Pred, b: &Pred) -> bool {
    preds_go(
        theory,
        a,
        b,
        &mut Binders {
            left: Vec::new(),
            right: Vec::new(),
        },
    )
}

/// Row-literal equivalence per theory. Under the simple theory entries are
/// already canonically sorted, and under the minimal theory only empty and
/// singleton rows exist, so both compare entrywise. Scoped rows compare via
/// a permutation that only swaps provably distinct labels.
fn rows_go(theory: Theory, a: &[(Type, Type)], b: &[(Type, Type)], cx: &mut Binders) -> bool {
    if a.len() != b.len() {
        return false;
    }
    match theory.name {
        TheoryName::Minimal | TheoryName::Simple => a
            .iter()
            .zip(b)
            .all(|((l1, p1), (l2, p2))| go(theory, l1, l2, cx) && go(theory, p1, p2, cx)),
        TheoryName::Scoped => scoped_row_match(a, b, &mut |x, y| go(theory, x, y, cx)).is_some(),
    }
}

/// Matches the entries of `a` against `b` such that equal labels keep their
/// relative order, and any inversion of the induced permutation swaps only
/// provably distinct (concrete, different) labels. Returns the index map
/// a-index → b-index.
pub fn scoped_row_match(
    a: &[(Type, Type)],
    b: &[(Type, Type)],
    eq: &mut impl FnMut(&Type, &Type) -> bool,
) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    let n = a.len();
    let mut map = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for i in 0..n {
        // Occurrence index of this label among a's earlier entries.
        let occ = (0..i).filter(|&j| eq(&a[j].0, &a[i].0)).count();
        // Find the matching occurrence in b.
        let mut seen = 0;
        let mut found = None;
        for (k, (bl, _)) in b.iter().enumerate() {
            if eq(bl, &a[i].0) {
                if seen == occ {
                    found = Some(k);
                    break;
                }
                seen += 1;
            }
        }
        let k = found?;
        if used[k] || !eq(&a[i].1, &b[k].1) {
            return None;
        }
        used[k] = true;
        map.push(k);
    }
    // Inversions must swap provably distinct labels.
    for i in 0..n {
        for j in (i + 1)..n {
            if map[i] > map[j] && !provably_distinct(&a[i].0, &a[j].0) {
                return None;
            }
        }
    }
    Some(map)
}

pub fn provably_distinct(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::LabelConst(l), Type::LabelConst(m)) => l != m,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::PrimTy;

    fn simple() -> Theory {
        Theory::simple()
    }

    fn int() -> Type {
        Type::Prim(PrimTy::Int)
    }

    fn bool_ty() -> Type {
        Type::Prim(PrimTy::Bool)
    }

    #[test]
    fn beta_reduces() {
        let f = Type::lam("t", Kind::ty(), Type::arrow(Type::var("t"), Type::var("t")));
        let got = normalize(simple(), &Env::new(), &Type::app(f, int()));
        assert_eq!(got, Type::arrow(int(), int()));
    }

    #[test]
    fn lift1_applies_row_to_argument() {
        // <l |> List> Bool ≡ <l |> List Bool>.
        let row = Type::row(vec![(Type::label("l"), Type::Prim(PrimTy::List))]);
        let got = normalize(simple(), &Env::new(), &Type::app(row, bool_ty()));
        let want = Type::row(vec![(
            Type::label("l"),
            Type::app(Type::Prim(PrimTy::List), bool_ty()),
        )]);
        assert_eq!(got, want);
    }

    #[test]
    fn sing_rewrites_singleton_record() {
        // Π <l |> Int> ≡ l |> Int.
        let got = normalize(
            simple(),
            &Env::new(),
            &Type::pi(Type::row(vec![(Type::label("l"), int())])),
        );
        assert_eq!(got, Type::labeled(Type::label("l"), int()));
    }

    #[test]
    fn lift3_pushes_application_inside() {
        // (Σ z) t ≡ Σ (z t) for z : Row (Type -> Type).
        let mut env = Env::new();
        env.push_ty("z", Kind::row(Kind::arrow(Kind::ty(), Kind::ty())));
        env.push_ty("t", Kind::ty());
        let lhs = Type::app(Type::sigma(Type::var("z")), Type::var("t"));
        let rhs = Type::sigma(Type::app(Type::var("z"), Type::var("t")));
        assert!(type_equiv(simple(), &env, &lhs, &rhs));
    }

    #[test]
    fn stuck_maps_canonicalize() {
        // (λs. s -> t) z and (->) z t normalize identically.
        let mut env = Env::new();
        env.push_ty("z", Kind::row(Kind::ty()));
        env.push_ty("t", Kind::ty());
        let via_lambda = Type::app(
            Type::lam("s", Kind::ty(), Type::arrow(Type::var("s"), Type::var("t"))),
            Type::var("z"),
        );
        let via_sections = Type::arrow(Type::var("z"), Type::var("t"));
        assert!(type_equiv(simple(), &env, &via_lambda, &via_sections));
    }

    #[test]
    fn row_permutation_by_theory() {
        let ab = Type::row(vec![
            (Type::label("x"), int()),
            (Type::label("y"), bool_ty()),
        ]);
        let ba = Type::row(vec![
            (Type::label("y"), bool_ty()),
            (Type::label("x"), int()),
        ]);
        assert!(type_equiv(simple(), &Env::new(), &ab, &ba));
        // Scoped rows may not permute equal labels.
        let xx1 = Type::row(vec![
            (Type::label("x"), int()),
            (Type::label("x"), bool_ty()),
        ]);
        let xx2 = Type::row(vec![
            (Type::label("x"), bool_ty()),
            (Type::label("x"), int()),
        ]);
        assert!(!type_equiv(Theory::scoped(), &Env::new(), &xx1, &xx2));
        // But they may permute distinct ones.
        let xy = Type::row(vec![
            (Type::label("x"), int()),
            (Type::label("y"), bool_ty()),
        ]);
        let yx = Type::row(vec![
            (Type::label("y"), bool_ty()),
            (Type::label("x"), int()),
        ]);
        assert!(type_equiv(Theory::scoped(), &Env::new(), &xy, &yx));
    }

    #[test]
    fn reflexivity_on_samples() {
        let mut env = Env::new();
        env.push_ty("z", Kind::row(Kind::ty()));
        for t in sample_types() {
            assert!(type_equiv(simple(), &env, &t, &t), "{t:?}");
        }
    }

    #[test]
    fn pred_equiv_direction_sensitivity() {
        let mut env = Env::new();
        env.push_ty("l", Kind::Lab);
        env.push_ty("t", Kind::ty());
        env.push_ty("z", Kind::row(Kind::ty()));
        let cell = Type::row(vec![(Type::var("l"), Type::var("t"))]);
        let pl = Pred::Contain(Dir::L, cell.clone(), Type::var("z"));
        let pr = Pred::Contain(Dir::R, cell.clone(), Type::var("z"));
        assert!(pred_equiv(simple(), &env, &pl, &pl));
        // The simple theory identifies directions; scoped does not.
        assert!(pred_equiv(simple(), &env, &pl, &pr));
        assert!(!pred_equiv(Theory::scoped(), &env, &pl, &pr));
        // Combination congruence.
        let c = Pred::Combine(cell.clone(), Type::var("z"), Type::var("z"));
        assert!(pred_equiv(simple(), &env, &c, &c));
    }

    fn sample_types() -> Vec<Type> {
        vec![
            int(),
            Type::arrow(int(), bool_ty()),
            Type::pi(Type::row(vec![
                (Type::label("a"), int()),
                (Type::label("b"), bool_ty()),
            ])),
            Type::sigma(Type::var("z")),
            Type::forall("t", Kind::ty(), Type::arrow(Type::var("t"), Type::var("t"))),
            Type::app(
                Type::lam("t", Kind::ty(), Type::var("t")),
                int(),
            ),
            Type::arrow(Type::var("z"), int()),
        ]
    }

    #[test]
    fn normalize_idempotent_on_samples() {
        let mut env = Env::new();
        env.push_ty("z", Kind::row(Kind::ty()));
        for t in sample_types() {
            let n1 = normalize(simple(), &env, &t);
            let n2 = normalize(simple(), &env, &n1);
            assert!(crate::ast::alpha_eq(&n1, &n2), "{t:?}\n{n1:?}\n{n2:?}");
        }
    }

    #[test]
    fn normalize_preserves_kind_on_samples() {
        let mut env = Env::new();
        env.push_ty("z", Kind::row(Kind::ty()));
        for t in sample_types() {
            let k1 = crate::kinds::kind_of(simple(), &env, &t).unwrap();
            let n = normalize(simple(), &env, &t);
            let k2 = crate::kinds::kind_of(simple(), &env, &n).unwrap();
            assert_eq!(k1, k2, "{t:?}");
        }
    }
}
