//! Pretty-printer. `parse(print(p))` is alpha-equivalent to `p` for every
//! parser-produced program.

use super::{Mode, Program, TheoryName};
use crate::ast::{Dir, Kind, Pred, Term, TermK, Type};

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    match p.theory {
        TheoryName::Simple => {}
        TheoryName::Minimal => out.push_str("%theory minimal\n"),
        TheoryName::Scoped => out.push_str("%theory scoped\n"),
    }
    if p.mode == Mode::Stratified {
        out.push_str("%stratified\n");
    }
    for d in &p.decls {
        out.push_str(&format!("{} : {};\n", d.name, print_type(&d.signature)));
        out.push_str(&format!("{} = {};\n", d.name, print_term(&d.body)));
    }
    out
}

pub fn print_kind(k: &Kind) -> String {
    kind_prec(k, 0)
}

fn kind_prec(k: &Kind, prec: u8) -> String {
    match k {
        Kind::Type(None) => "Type".to_string(),
        Kind::Type(Some(l)) => format!("Type@{l}"),
        Kind::Lab => "Lab".to_string(),
        Kind::Row(inner) => {
            let s = format!("Row {}", kind_prec(inner, 2));
            if prec >= 2 {
                format!("({s})")
            } else {
                s
            }
        }
        Kind::Arrow(a, b) => {
            let s = format!("{} -> {}", kind_prec(a, 1), kind_prec(b, 0));
            if prec >= 1 {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

pub fn print_type(t: &Type) -> String {
    ty_prec(t, 0)
}

// Precedence: 0 binders/qual, 1 arrow, 2 combo, 3 labeled, 4 application,
// 5 atoms.
fn ty_prec(t: &Type, prec: u8) -> String {
    match t {
        Type::Var(n) => n.clone(),
        Type::Fun => "(->)".to_string(),
        Type::Prim(p) => match p {
            crate::ast::PrimTy::Int => "Int".to_string(),
            crate::ast::PrimTy::Bool => "Bool".to_string(),
            crate::ast::PrimTy::List => "List".to_string(),
        },
        Type::LabelConst(l) => format!("'{}", l.0),
        Type::Qual(p, body) => {
            let s = format!("({}) => {}", print_pred(p), ty_prec(body, 0));
            paren_if(prec >= 1, s)
        }
        Type::Forall(_, _, _) => {
            let mut binders = Vec::new();
            let mut cur = t;
            while let Type::Forall(v, k, body) = cur {
                binders.push(format!("{v}:{}", print_kind(k)));
                cur = body;
            }
            let s = format!("forall {}. {}", binders.join(", "), ty_prec(cur, 0));
            paren_if(prec >= 1, s)
        }
        Type::Lam(v, k, body) => {
            let s = format!("\\{v}:{}. {}", print_kind(k), ty_prec(body, 0));
            paren_if(prec >= 1, s)
        }
        Type::App(f, a) => {
            if let Some((dom, cod)) = t.as_arrow() {
                let s = format!("{} -> {}", ty_prec(dom, 2), ty_prec(cod, 1));
                return paren_if(prec >= 2, s);
            }
            let s = format!("{} {}", ty_prec(f, 4), ty_prec(a, 5));
            paren_if(prec >= 5, s)
        }
        Type::RowMap(f, a) => {
            let s = format!("{} {}", ty_prec(f, 4), ty_prec(a, 5));
            paren_if(prec >= 5, s)
        }
        Type::Sing(x) => {
            let s = format!("Sing {}", ty_prec(x, 5));
            paren_if(prec >= 5, s)
        }
        Type::Labeled(l, p) => {
            let s = format!("{} |> {}", ty_prec(l, 4), ty_prec(p, 4));
            paren_if(prec >= 4, s)
        }
        Type::RowLit(entries, _) => {
            let inner = entries
                .iter()
                .map(|(l, p)| format!("{} |> {}", ty_prec(l, 4), ty_prec(p, 0)))
                .collect::<Vec<_>>()
                .join(", ");
            format!("<{inner}>")
        }
        Type::Pi(r) => {
            let s = format!("Pi {}", ty_prec(r, 5));
            paren_if(prec >= 5, s)
        }
        Type::SigmaV(r) => {
            let s = format!("Sigma {}", ty_prec(r, 5));
            paren_if(prec >= 5, s)
        }
        Type::CombineSugar(a, b) => {
            let s = format!("{} o+ {}", ty_prec(a, 3), ty_prec(b, 3));
            paren_if(prec >= 3, s)
        }
    }
}

pub fn print_pred(p: &Pred) -> String {
    match p {
        Pred::Contain(Dir::L, a, b) => format!("{} <: {}", ty_prec(a, 2), ty_prec(b, 2)),
        Pred::Contain(Dir::R, a, b) => format!("{} <:R {}", ty_prec(a, 2), ty_prec(b, 2)),
        Pred::Combine(a, b, c) => format!(
            "{} o+ {} ~ {}",
            ty_prec(a, 3),
            ty_prec(b, 3),
            ty_prec(c, 3)
        ),
    }
}

pub fn print_term(t: &Term) -> String {
    term_prec(t, 0)
}

// Precedence: 0 lambdas, 1 branch, 2 concat, 3 label-intro, 4 &&, 5 ==,
// 6 +, 7 unlabel, 8 application/prefix, 9 postfix, 10 atoms.
fn term_prec(t: &Term, prec: u8) -> String {
    match &t.kind {
        TermK::Var(n) => n.clone(),
        TermK::LabelVal(l) => format!("'{}", l.0),
        TermK::IntLit(n) => n.to_string(),
        TermK::BoolLit(true) => "true".to_string(),
        TermK::BoolLit(false) => "false".to_string(),
        TermK::Unit => "()".to_string(),
        TermK::Lam(x, ann, body) => {
            let s = match ann {
                Some(ty) => format!("\\({x}:{}). {}", print_type(ty), term_prec(body, 0)),
                None => format!("\\{x}. {}", term_prec(body, 0)),
            };
            paren_if(prec >= 1, s)
        }
        TermK::TyLam(a, ann, body) => {
            let s = match ann {
                Some(k) => format!("/\\({a}:{}). {}", print_kind(k), term_prec(body, 0)),
                None => format!("/\\{a}. {}", term_prec(body, 0)),
            };
            paren_if(prec >= 1, s)
        }
        TermK::App(f, a) => {
            if let Some(s) = infix_prim(t) {
                return paren_if(prec >= 5, s);
            }
            let s = format!("{} {}", term_prec(f, 8), term_prec(a, 9));
            paren_if(prec >= 9, s)
        }
        TermK::TyApp(f, ty) => {
            let s = format!("{} [{}]", term_prec(f, 9), print_type(ty));
            paren_if(prec >= 10, s)
        }
        TermK::LabelIntro(a, b) => {
            let s = format!("{} |> {}", term_prec(a, 4), term_prec(b, 4));
            paren_if(prec >= 4, s)
        }
        TermK::Unlabel(a, b) => {
            let s = format!("{} / {}", term_prec(a, 7), term_prec(b, 8));
            paren_if(prec >= 8, s)
        }
        TermK::Prj(Dir::L, m) => paren_if(prec >= 9, format!("prj_L {}", term_prec(m, 9))),
        TermK::Prj(Dir::R, m) => paren_if(prec >= 9, format!("prj_R {}", term_prec(m, 9))),
        TermK::Inj(Dir::L, m) => paren_if(prec >= 9, format!("inj_L {}", term_prec(m, 9))),
        TermK::Inj(Dir::R, m) => paren_if(prec >= 9, format!("inj_R {}", term_prec(m, 9))),
        TermK::Concat(a, b) => {
            let s = format!("{} ++ {}", term_prec(a, 2), term_prec(b, 3));
            paren_if(prec >= 3, s)
        }
        TermK::Branch(a, b) => {
            let s = format!("{} ||| {}", term_prec(a, 1), term_prec(b, 2));
            paren_if(prec >= 2, s)
        }
        TermK::Syn(phi, m) => paren_if(
            prec >= 9,
            format!("syn[{}] {}", print_type(phi), term_prec(m, 9)),
        ),
        TermK::Ana(phi, m) => paren_if(
            prec >= 9,
            format!("ana[{}] {}", print_type(phi), term_prec(m, 9)),
        ),
        TermK::FoldPi(m1, m2, m3, n) => paren_if(
            prec >= 9,
            format!(
                "foldPi {} {} {} {}",
                term_prec(m1, 9),
                term_prec(m2, 9),
                term_prec(m3, 9),
                term_prec(n, 9)
            ),
        ),
        TermK::SingIntroPi(m) => format!("(singIntroPi {})", term_prec(m, 9)),
        TermK::SingElimPi(m) => format!("(singElimPi {})", term_prec(m, 9)),
        TermK::SingIntroSig(m) => format!("(singIntroSig {})", term_prec(m, 9)),
        TermK::SingElimSig(m) => format!("(singElimSig {})", term_prec(m, 9)),
        TermK::Ascribe(m, ty) => format!("({} : {})", term_prec(m, 0), print_type(ty)),
    }
}

/// Prints `add`/`and`/`eqInt` applications back as their infix forms.
fn infix_prim(t: &Term) -> Option<String> {
    if let TermK::App(f, b) = &t.kind {
        if let TermK::App(g, a) = &f.kind {
            if let TermK::Var(n) = &g.kind {
                let (op, prec) = match n.as_str() {
                    "add" => ("+", 6),
                    "and" => ("&&", 4),
                    "eqInt" => ("==", 5),
                    _ => return None,
                };
                return Some(format!(
                    "{} {} {}",
                    term_prec(a, prec),
                    op,
                    term_prec(b, prec + 1)
                ));
            }
        }
    }
    None
}

fn paren_if(cond: bool, s: String) -> String {
    if cond {
        format!("({s})")
    } else {
        s
    }
}
