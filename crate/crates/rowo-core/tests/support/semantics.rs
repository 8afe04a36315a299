//! Behavioral engines: duality round-trips, equality against a structural
//! oracle, functor laws, transformation oracles, and label-erasure checks.
//! Each returns the number of cases checked or the first failure.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use rowo_core::ast::Label;
use rowo_core::eval::{
    apply, assert_label_free, eval, prelude_env, print_value, RtEnv, Value,
};
use rowo_core::surface::{parse, Mode, Program};
use rowo_core::typecheck::elaborate_program;
use rowo_core::Theory;

/// Elaborates and evaluates a program, returning each declaration's value.
pub fn run_program(src: &str, theory: Theory) -> Result<HashMap<String, Value>, String> {
    let program = parse(src).map_err(|e| format!("parse: {e}"))?;
    run_parsed(&program, theory)
}

pub fn run_parsed(program: &Program, theory: Theory) -> Result<HashMap<String, Value>, String> {
    let out = elaborate_program(program, theory, Mode::Plain, false)
        .map_err(|e| format!("elaborate: {e}"))?;
    let mut env = prelude_env();
    let mut values = HashMap::new();
    for d in &out.decls {
        let v = eval(&env, &d.core).map_err(|e| format!("eval {}: {e}", d.name))?;
        values.insert(d.name.clone(), v.clone());
        let mut frame = RtEnv::with_parent(&env);
        frame.bind(d.name.clone(), v);
        env = Arc::new(frame);
    }
    Ok(values)
}

fn apply_all(f: &Value, args: &[Value]) -> Result<Value, String> {
    let mut v = f.clone();
    for a in args {
        v = apply(v, a.clone()).map_err(|e| e.to_string())?;
    }
    Ok(v)
}

fn int(n: i64) -> Value {
    Value::Int(n)
}

fn record(fields: Vec<Value>) -> Value {
    Value::RecordV(Arc::new(fields))
}

fn variant(tag: usize, payload: Value) -> Value {
    Value::VariantV(tag, Arc::new(payload))
}

fn row_text(arity: usize) -> String {
    let entries: Vec<String> = (0..arity).map(|i| format!("c{i} |> Int")).collect();
    format!("<{}>", entries.join(", "))
}

/// Closure-valued Int functions built in-language: `mk k = λx. x*3 + k`.
const MK: &str = "mk : Int -> Int -> Int;\nmk = \\k. \\x. x + x + x + k;\n";

const GENERIC_DEFS: &str = r#"
type Eq = \t:Type. t -> t -> Bool;
type Iter = \f:Type -> Type. \g:Type -> Type. \z:Row Type.
  forall l:Lab, u:Type, y1:Row Type, zz:Row Type, y2:Row Type.
    (y1 o+ <l |> u> ~ zz, zz o+ y2 ~ z) => Sing l -> f u -> g u;
type Xf = \f:Type -> Type. \g:Type -> Type. \a:Type. f a -> g a;

reify : forall z:Row Type, t:Type. (Sigma z -> t) -> Pi (z -> t);
reify = /\z t. \f. syn[\s:Type. s -> t]
  (/\l u y1 zz y2. \g x. f (inj_L ((inj_R (g |> x) : Sigma zz))));

reflect : forall z:Row Type, t:Type. Pi (z -> t) -> Sigma z -> t;
reflect = /\z t. \d w.
  (ana[\s:Type. s]
    (/\l u y1 zz y2. \g x. ((prj_R (prj_L d : Pi (zz -> t)) / g : u -> t)) x)) w;

mapPi : forall z:Row Type, f:Type -> Type, g:Type -> Type. Iter f g z -> Pi (f z) -> Pi (g z);
mapPi = /\z f g. \i r. syn[g]
  (/\l u y1 zz y2. \s. i [l] [u] [y1] [zz] [y2] s ((prj_R (prj_L r : Pi (f zz)) / s : f u)));

mapSig : forall z:Row Type, f:Type -> Type, g:Type -> Type. Iter f g z -> Sigma (f z) -> Sigma (g z);
mapSig = /\z f g. \i w.
  (ana[f]
    (/\l u y1 zz y2. \s x.
      inj_L ((inj_R (s |> i [l] [u] [y1] [zz] [y2] s x) : Sigma (g zz))))) w;

rapply : forall f:Type -> Type, g:Type -> Type, z:Row Type. Pi (Xf f g z) -> Pi (f z) -> Pi (g z);
rapply = /\f g z. \d r. mapPi [z] [f] [g]
  (/\l u y1 zz y2. \s x. ((prj_R (prj_L d : Pi (Xf f g zz)) / s : Xf f g u)) x) r;

eqSig : forall z:Row Type. Pi (Eq z) -> Eq (Sigma z);
eqSig = /\z. \d. \v w.
  (ana[\s:Type. s]
    (/\l u y1 zz y2. \g x.
      (((\s:Sigma y1. false)
        ||| \s:Sigma <l |> u>. ((prj_R (prj_L d : Pi (Eq zz)) / g : Eq u)) (s / g) x)
       ||| (\s:Sigma y2. false)) v)) w;

eqPi : forall z:Row Type. Pi (Eq z) -> Eq (Pi z);
eqPi = /\z. \d. \r1 r2. foldPi
  (/\l u y1 zz y2. \g x.
    ((prj_R (prj_L d : Pi (Eq zz)) / g : Eq u)) ((prj_R (prj_L r1 : Pi zz) / g : u)) x)
  (\a:Bool. \b:Bool. a && b)
  true
  r2;
"#;

fn duality_program(arity: usize) -> String {
    let row = row_text(arity);
    format!(
        "{GENERIC_DEFS}{MK}\
rr : Pi ({row} -> Int) -> Pi ({row} -> Int);\n\
rr = \\d. reify [{row}] [Int] (reflect [{row}] [Int] d);\n\
refl : Pi ({row} -> Int) -> Sigma {row} -> Int;\n\
refl = \\d. reflect [{row}] [Int] d;\n\
rf : (Sigma {row} -> Int) -> Sigma {row} -> Int;\n\
rf = \\f. reflect [{row}] [Int] (reify [{row}] [Int] f);\n"
    )
}

/// Criterion 4: reflect∘reify and reify∘reflect are extensional identities
/// over variant rows of arity ≤ 4 with payload domains of size ≤ 3.
pub fn duality_roundtrip() -> Result<usize, String> {
    let payloads = [0i64, 1, 2];
    let mut cases = 0;
    for arity in 1..=4usize {
        let values = run_program(&duality_program(arity), Theory::simple())?;
        let mk = &values["mk"];
        let rr = &values["rr"];
        let rf = &values["rf"];
        let refl = &values["refl"];
        // Three distinct handler assignments per arity.
        for salt in 0..3i64 {
            let d = record(
                (0..arity)
                    .map(|i| apply_all(mk, &[int(salt * 10 + i as i64 * 7)]))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            // reify (reflect d) must agree with d fieldwise.
            let d2 = apply_all(rr, &[d.clone()])?;
            let (df, d2f) = match (&d, &d2) {
                (Value::RecordV(a), Value::RecordV(b)) => (a.clone(), b.clone()),
                _ => return Err("duality: non-record".to_string()),
            };
            if df.len() != d2f.len() {
                return Err("duality: arity changed".to_string());
            }
            for i in 0..df.len() {
                for p in payloads {
                    let a = apply_all(&df[i], &[int(p)])?;
                    let b = apply_all(&d2f[i], &[int(p)])?;
                    if print_value(&a) != print_value(&b) {
                        return Err(format!(
                            "reify∘reflect differs at field {i}, payload {p}: {} vs {}",
                            print_value(&a),
                            print_value(&b)
                        ));
                    }
                    cases += 1;
                }
            }
            // reflect (reify f) must agree with f on every variant, for
            // f = reflect d (a complete family over finite domains).
            let f = apply_all(refl, &[d.clone()])?;
            let f2 = apply_all(rf, &[f.clone()])?;
            for tag in 0..arity {
                for p in payloads {
                    let w = variant(tag, int(p));
                    let a = apply_all(&f, &[w.clone()])?;
                    let b = apply_all(&f2, &[w])?;
                    if print_value(&a) != print_value(&b) {
                        return Err(format!(
                            "reflect∘reify differs at tag {tag}, payload {p}: {} vs {}",
                            print_value(&a),
                            print_value(&b)
                        ));
                    }
                    assert_label_free(&a);
                    cases += 1;
                }
            }
        }
    }
    Ok(cases)
}

fn eq_program(arity: usize) -> String {
    let row = row_text(arity);
    format!(
        "{GENERIC_DEFS}\
eqv : Pi (Eq {row}) -> Sigma {row} -> Sigma {row} -> Bool;\n\
eqv = \\d. eqSig [{row}] d;\n\
eqr : Pi (Eq {row}) -> Pi {row} -> Pi {row} -> Bool;\n\
eqr = \\d. eqPi [{row}] d;\n"
    )
}

fn eq_dict(arity: usize, env: &Arc<RtEnv>) -> Value {
    let eq_int = env.lookup("eqInt").unwrap().clone();
    record((0..arity).map(|_| eq_int.clone()).collect())
}

/// Criterion 5: eqΣ and eqΠ match structural equality on exhaustively
/// enumerated values (arity ≤ 4, payload domain of size 3).
pub fn eq_matches_structural_oracle() -> Result<usize, String> {
    let payloads = [0i64, 1, 2];
    let mut cases = 0;
    for arity in 1..=4usize {
        let values = run_program(&eq_program(arity), Theory::simple())?;
        let d = eq_dict(arity, &prelude_env());
        let eqv = &values["eqv"];
        let eqr = &values["eqr"];
        // All variant pairs.
        for t1 in 0..arity {
            for p1 in payloads {
                for t2 in 0..arity {
                    for p2 in payloads {
                        let got = apply_all(
                            eqv,
                            &[d.clone(), variant(t1, int(p1)), variant(t2, int(p2))],
                        )?;
                        let want = t1 == t2 && p1 == p2;
                        match got {
                            Value::Bool(b) if b == want => cases += 1,
                            other => {
                                return Err(format!(
                                    "eqΣ(#{t1}({p1}), #{t2}({p2})) = {}, want {want}",
                                    print_value(&other)
                                ))
                            }
                        }
                    }
                }
            }
        }
        // All record pairs, capped at arity ≤ 3 exhaustively and sampled
        // diagonally at arity 4 to stay within desk scale.
        let tuples = enumerate_tuples(arity, &payloads);
        for a in &tuples {
            for b in &tuples {
                if arity == 4 && a.iter().zip(b).filter(|(x, y)| x != y).count() > 1 {
                    continue;
                }
                let ra = record(a.iter().map(|&p| int(p)).collect());
                let rb = record(b.iter().map(|&p| int(p)).collect());
                let got = apply_all(eqr, &[d.clone(), ra, rb])?;
                let want = a == b;
                match got {
                    Value::Bool(x) if x == want => cases += 1,
                    other => {
                        return Err(format!(
                            "eqΠ({a:?}, {b:?}) = {}, want {want}",
                            print_value(&other)
                        ))
                    }
                }
            }
        }
    }
    Ok(cases)
}

fn enumerate_tuples(arity: usize, payloads: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        let mut next = Vec::new();
        for t in &out {
            for &p in payloads {
                let mut t2 = t.clone();
                t2.push(p);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

const FMAP_DEFS: &str = r#"
type Iter1 = \f:(Type -> Type) -> Type. \g:(Type -> Type) -> Type. \z:Row (Type -> Type).
  forall l:Lab, u:Type -> Type, y1:Row (Type -> Type), zz:Row (Type -> Type), y2:Row (Type -> Type).
    (y1 o+ <l |> u> ~ zz, zz o+ y2 ~ z) => Sing l -> f u -> g u;
type Functor = \f:Type -> Type. forall t:Type, u:Type. (t -> u) -> f t -> f u;

mapPi1 : forall z:Row (Type -> Type), f:(Type -> Type) -> Type, g:(Type -> Type) -> Type.
  Iter1 f g z -> Pi (f z) -> Pi (g z);
mapPi1 = /\z f g. \i r. syn[g]
  (/\l u y1 zz y2. \s. i [l] [u] [y1] [zz] [y2] s ((prj_R (prj_L r : Pi (f zz)) / s : f u)));

mapSig1 : forall z:Row (Type -> Type), f:(Type -> Type) -> Type, g:(Type -> Type) -> Type.
  Iter1 f g z -> Sigma (f z) -> Sigma (g z);
mapSig1 = /\z f g. \i w.
  (ana[f]
    (/\l u y1 zz y2. \s x.
      inj_L ((inj_R (s |> i [l] [u] [y1] [zz] [y2] s x) : Sigma (g zz))))) w;

fmapPi : forall z:Row (Type -> Type). Pi (Functor z) -> Functor (Pi z);
fmapPi = /\z. \d. /\t u. \h r. mapPi1 [z] [\c:Type -> Type. c t] [\c:Type -> Type. c u]
  (/\l ff y1 zz y2. \s x.
    ((prj_R (prj_L d : Pi (Functor zz)) / s : Functor ff)) [t] [u] h x) r;

fmapSig : forall z:Row (Type -> Type). Pi (Functor z) -> Functor (Sigma z);
fmapSig = /\z. \d. /\t u. \h w. mapSig1 [z] [\c:Type -> Type. c t] [\c:Type -> Type. c u]
  (/\l ff y1 zz y2. \s x.
    ((prj_R (prj_L d : Pi (Functor zz)) / s : Functor ff)) [t] [u] h x) w;
"#;

fn fmap_program() -> String {
    format!(
        "{FMAP_DEFS}{MK}\
type LL = <a |> List, b |> List>;\n\
fmapR : Pi (Functor LL) -> (Int -> Int) -> Pi (LL Int) -> Pi (LL Int);\n\
fmapR = \\d h r. (fmapPi [LL] d) [Int] [Int] h r;\n\
fmapW : Pi (Functor LL) -> (Int -> Int) -> Sigma (LL Int) -> Sigma (LL Int);\n\
fmapW = \\d h w. (fmapSig [LL] d) [Int] [Int] h w;\n\
idInt : Int -> Int;\n\
idInt = \\x. x;\n\
cmp : (Int -> Int) -> (Int -> Int) -> Int -> Int;\n\
cmp = \\f. \\g. \\x. g (f x);\n"
    )
}

/// Criterion 6: fmapΠ/fmapΣ satisfy identity and composition on randomized
/// samples (printed-value equality).
pub fn fmap_laws(samples_per_law: usize, seed: u64) -> Result<usize, String> {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let values = run_program(&fmap_program(), Theory::simple())?;
    let env = prelude_env();
    let map_list = env.lookup("mapList").unwrap().clone();
    let dict = record(vec![map_list.clone(), map_list]);
    let mk = &values["mk"];
    let fmap_r = &values["fmapR"];
    let fmap_w = &values["fmapW"];
    let id_int = &values["idInt"];
    let cmp = &values["cmp"];
    let mut rng = StdRng::seed_from_u64(seed);
    let list = |rng: &mut StdRng| -> Value {
        let n = rng.gen_range(0..4);
        Value::ListV(Arc::new((0..n).map(|_| int(rng.gen_range(-5..5))).collect()))
    };
    let mut cases = 0;
    for _ in 0..samples_per_law {
        let r = record(vec![list(&mut rng), list(&mut rng)]);
        let w = variant(rng.gen_range(0..2), list(&mut rng));
        let f = apply_all(mk, &[int(rng.gen_range(-3..4))])?;
        let g = apply_all(mk, &[int(rng.gen_range(-3..4))])?;
        // Identity law.
        let ri = apply_all(fmap_r, &[dict.clone(), id_int.clone(), r.clone()])?;
        if print_value(&ri) != print_value(&r) {
            return Err(format!(
                "fmapΠ id: {} vs {}",
                print_value(&ri),
                print_value(&r)
            ));
        }
        let wi = apply_all(fmap_w, &[dict.clone(), id_int.clone(), w.clone()])?;
        if print_value(&wi) != print_value(&w) {
            return Err(format!(
                "fmapΣ id: {} vs {}",
                print_value(&wi),
                print_value(&w)
            ));
        }
        // Composition law.
        let gf = apply_all(cmp, &[f.clone(), g.clone()])?;
        let lhs_r = apply_all(fmap_r, &[dict.clone(), gf.clone(), r.clone()])?;
        let rhs_r = apply_all(
            fmap_r,
            &[
                dict.clone(),
                g.clone(),
                apply_all(fmap_r, &[dict.clone(), f.clone(), r.clone()])?,
            ],
        )?;
        if print_value(&lhs_r) != print_value(&rhs_r) {
            return Err(format!(
                "fmapΠ compose: {} vs {}",
                print_value(&lhs_r),
                print_value(&rhs_r)
            ));
        }
        let lhs_w = apply_all(fmap_w, &[dict.clone(), gf, w.clone()])?;
        let rhs_w = apply_all(
            fmap_w,
            &[
                dict.clone(),
                g,
                apply_all(fmap_w, &[dict.clone(), f, w.clone()])?,
            ],
        )?;
        if print_value(&lhs_w) != print_value(&rhs_w) {
            return Err(format!(
                "fmapΣ compose: {} vs {}",
                print_value(&lhs_w),
                print_value(&rhs_w)
            ));
        }
        cases += 4;
    }
    Ok(cases)
}

/// The record-of-lists to record-of-lengths transformation and its variant
/// dual, against direct oracles.
pub fn maps_length_oracle() -> Result<usize, String> {
    let src = format!(
        "{GENERIC_DEFS}\
type AB = <a |> Int, b |> Bool>;\n\
lengths : Pi ((\\t:Type. List t) AB) -> Pi ((\\t:Type. Int) AB);\n\
lengths = \\r. mapPi [AB] [\\t:Type. List t] [\\t:Type. Int]\n\
  (/\\l u y1 zz y2. \\s x. length [u] x) r;\n\
lengthsW : Sigma ((\\t:Type. List t) AB) -> Sigma ((\\t:Type. Int) AB);\n\
lengthsW = \\w. mapSig [AB] [\\t:Type. List t] [\\t:Type. Int]\n\
  (/\\l u y1 zz y2. \\s x. length [u] x) w;\n"
    );
    let values = run_program(&src, Theory::simple())?;
    let mut cases = 0;
    let lists: Vec<Vec<i64>> = vec![vec![], vec![1], vec![1, 2], vec![7, 8, 9]];
    for la in &lists {
        for lb in &lists {
            let r = record(vec![
                Value::ListV(Arc::new(la.iter().map(|&i| int(i)).collect())),
                Value::ListV(Arc::new(lb.iter().map(|&i| int(i)).collect())),
            ]);
            let got = apply_all(&values["lengths"], &[r])?;
            let want = format!("{{i0 = {}, i1 = {}}}", la.len(), lb.len());
            if print_value(&got) != want {
                return Err(format!("lengths: {} vs {want}", print_value(&got)));
            }
            cases += 1;
        }
        for tag in 0..2usize {
            let w = variant(tag, Value::ListV(Arc::new(la.iter().map(|&i| int(i)).collect())));
            let got = apply_all(&values["lengthsW"], &[w])?;
            let want = format!("#{tag}({})", la.len());
            if print_value(&got) != want {
                return Err(format!("lengthsW: {} vs {want}", print_value(&got)));
            }
            cases += 1;
        }
    }
    Ok(cases)
}

/// rapply against the fieldwise-application oracle.
pub fn rapply_oracle() -> Result<usize, String> {
    let src = format!(
        "{GENERIC_DEFS}{MK}\
type AB = <a |> Int, b |> Int>;\n\
app2 : Pi (Xf (\\t:Type. t) (\\t:Type. t) AB) -> Pi AB -> Pi AB;\n\
app2 = \\d r. rapply [\\t:Type. t] [\\t:Type. t] [AB] d r;\n"
    );
    let values = run_program(&src, Theory::simple())?;
    let mk = &values["mk"];
    let mut cases = 0;
    for k1 in -2i64..3 {
        for k2 in -2i64..3 {
            for x in 0i64..3 {
                let d = record(vec![apply_all(mk, &[int(k1)])?, apply_all(mk, &[int(k2)])?]);
                let r = record(vec![int(x), int(x + 1)]);
                let got = apply_all(&values["app2"], &[d, r])?;
                let want = format!(
                    "{{i0 = {}, i1 = {}}}",
                    3 * x + k1,
                    3 * (x + 1) + k2
                );
                if print_value(&got) != want {
                    return Err(format!("rapply: {} vs {want}", print_value(&got)));
                }
                cases += 1;
            }
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------------------
// Label erasure
// ---------------------------------------------------------------------------

fn rename_labels_in_type(t: &rowo_core::Type, f: &dyn Fn(&Label) -> Label) -> rowo_core::Type {
    use rowo_core::Type as T;
    match t {
        T::LabelConst(l) => T::LabelConst(f(l)),
        T::Var(_) | T::Fun | T::Prim(_) => t.clone(),
        T::Qual(p, b) => T::Qual(
            Box::new(rename_labels_in_pred(p, f)),
            Box::new(rename_labels_in_type(b, f)),
        ),
        T::Forall(v, k, b) => T::Forall(v.clone(), k.clone(), Box::new(rename_labels_in_type(b, f))),
        T::Lam(v, k, b) => T::Lam(v.clone(), k.clone(), Box::new(rename_labels_in_type(b, f))),
        T::App(a, b) => T::App(
            Box::new(rename_labels_in_type(a, f)),
            Box::new(rename_labels_in_type(b, f)),
        ),
        T::RowMap(a, b) => T::RowMap(
            Box::new(rename_labels_in_type(a, f)),
            Box::new(rename_labels_in_type(b, f)),
        ),
        T::Sing(x) => T::Sing(Box::new(rename_labels_in_type(x, f))),
        T::Labeled(l, p) => T::Labeled(
            Box::new(rename_labels_in_type(l, f)),
            Box::new(rename_labels_in_type(p, f)),
        ),
        T::RowLit(entries, hint) => T::RowLit(
            entries
                .iter()
                .map(|(l, p)| (rename_labels_in_type(l, f), rename_labels_in_type(p, f)))
                .collect(),
            hint.clone(),
        ),
        T::Pi(r) => T::Pi(Box::new(rename_labels_in_type(r, f))),
        T::SigmaV(r) => T::SigmaV(Box::new(rename_labels_in_type(r, f))),
        T::CombineSugar(a, b) => T::CombineSugar(
            Box::new(rename_labels_in_type(a, f)),
            Box::new(rename_labels_in_type(b, f)),
        ),
    }
}

fn rename_labels_in_pred(p: &rowo_core::Pred, f: &dyn Fn(&Label) -> Label) -> rowo_core::Pred {
    use rowo_core::Pred as P;
    match p {
        P::Contain(d, a, b) => P::Contain(
            *d,
            rename_labels_in_type(a, f),
            rename_labels_in_type(b, f),
        ),
        P::Combine(a, b, c) => P::Combine(
            rename_labels_in_type(a, f),
            rename_labels_in_type(b, f),
            rename_labels_in_type(c, f),
        ),
    }
}

fn rename_labels_in_term(t: &rowo_core::Term, f: &dyn Fn(&Label) -> Label) -> rowo_core::Term {
    use rowo_core::ast::TermK as K;
    let kind = match &t.kind {
        K::LabelVal(l) => K::LabelVal(f(l)),
        K::Var(_) | K::Unit | K::IntLit(_) | K::BoolLit(_) => t.kind.clone(),
        K::Lam(x, ann, b) => K::Lam(
            x.clone(),
            ann.as_ref().map(|a| rename_labels_in_type(a, f)),
            Box::new(rename_labels_in_term(b, f)),
        ),
        K::App(a, b) => K::App(
            Box::new(rename_labels_in_term(a, f)),
            Box::new(rename_labels_in_term(b, f)),
        ),
        K::TyLam(v, k, b) => K::TyLam(v.clone(), k.clone(), Box::new(rename_labels_in_term(b, f))),
        K::TyApp(m, ty) => K::TyApp(
            Box::new(rename_labels_in_term(m, f)),
            rename_labels_in_type(ty, f),
        ),
        K::LabelIntro(a, b) => K::LabelIntro(
            Box::new(rename_labels_in_term(a, f)),
            Box::new(rename_labels_in_term(b, f)),
        ),
        K::Unlabel(a, b) => K::Unlabel(
            Box::new(rename_labels_in_term(a, f)),
            Box::new(rename_labels_in_term(b, f)),
        ),
        K::Prj(d, m) => K::Prj(*d, Box::new(rename_labels_in_term(m, f))),
        K::Concat(a, b) => K::Concat(
            Box::new(rename_labels_in_term(a, f)),
            Box::new(rename_labels_in_term(b, f)),
        ),
        K::Inj(d, m) => K::Inj(*d, Box::new(rename_labels_in_term(m, f))),
        K::Branch(a, b) => K::Branch(
            Box::new(rename_labels_in_term(a, f)),
            Box::new(rename_labels_in_term(b, f)),
        ),
        K::Syn(ty, m) => K::Syn(
            rename_labels_in_type(ty, f),
            Box::new(rename_labels_in_term(m, f)),
        ),
        K::Ana(ty, m) => K::Ana(
            rename_labels_in_type(ty, f),
            Box::new(rename_labels_in_term(m, f)),
        ),
        K::FoldPi(a, b, c, d) => K::FoldPi(
            Box::new(rename_labels_in_term(a, f)),
            Box::new(rename_labels_in_term(b, f)),
            Box::new(rename_labels_in_term(c, f)),
            Box::new(rename_labels_in_term(d, f)),
        ),
        K::SingIntroPi(m) => K::SingIntroPi(Box::new(rename_labels_in_term(m, f))),
        K::SingElimPi(m) => K::SingElimPi(Box::new(rename_labels_in_term(m, f))),
        K::SingIntroSig(m) => K::SingIntroSig(Box::new(rename_labels_in_term(m, f))),
        K::SingElimSig(m) => K::SingElimSig(Box::new(rename_labels_in_term(m, f))),
        K::Ascribe(m, ty) => K::Ascribe(
            Box::new(rename_labels_in_term(m, f)),
            rename_labels_in_type(ty, f),
        ),
    };
    rowo_core::Term { span: t.span, kind }
}

pub fn rename_labels_in_program(p: &Program, f: &dyn Fn(&Label) -> Label) -> Program {
    Program {
        decls: p
            .decls
            .iter()
            .map(|d| rowo_core::surface::Decl {
                name: d.name.clone(),
                signature: rename_labels_in_type(&d.signature, f),
                body: rename_labels_in_term(&d.body, f),
                span: d.span,
                sig_span: d.sig_span,
            })
            .collect(),
        theory: p.theory,
        mode: p.mode,
    }
}

pub fn labels_of_program(p: &Program) -> Vec<Label> {
    let mut out: Vec<Label> = Vec::new();
    let mut add = |l: &Label| {
        if !out.contains(l) {
            out.push(l.clone());
        }
    };
    let printed = rowo_core::surface::print_program(p);
    // Labels are exactly the `'name` tokens in the printed program.
    let mut chars = printed.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\'' {
            let rest: String = printed[i + 1..]
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            if !rest.is_empty() {
                add(&Label(rest));
            }
        }
    }
    out
}

/// Criterion 7: bijective label renamings leave prim-valued observations
/// unchanged, and no evaluated value stores a label.
pub fn label_erasure(renamings: usize, seed: u64) -> Result<usize, String> {
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let corpus_dir = format!("{}/../../corpus", env!("CARGO_MANIFEST_DIR"));
    let files = ["eq_demo.ro", "duality_demo.ro", "three_var.ro", "prelude_demo.ro"];
    let mut rng = StdRng::seed_from_u64(seed);
    let mut programs: Vec<(String, Program, Theory)> = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(format!("{corpus_dir}/{f}"))
            .map_err(|e| format!("{f}: {e}"))?;
        let program = parse(&text).map_err(|e| format!("{f}: {e}"))?;
        let theory = Theory::of(program.theory);
        programs.push((f.to_string(), program, theory));
    }
    // Baselines: the prim-valued test_* observations.
    let mut baselines: Vec<(usize, String, String)> = Vec::new();
    for (i, (name, program, theory)) in programs.iter().enumerate() {
        let values = run_parsed(program, *theory).map_err(|e| format!("{name}: {e}"))?;
        for (decl, v) in &values {
            assert_label_free(v);
            if decl.starts_with("test_") && matches!(v, Value::Int(_) | Value::Bool(_)) {
                baselines.push((i, decl.clone(), print_value(v)));
            }
        }
    }
    let distinct_programs: std::collections::HashSet<(usize, &str)> = baselines
        .iter()
        .map(|(i, d, _)| (*i, d.as_str()))
        .collect();
    if distinct_programs.len() < 10 {
        return Err(format!(
            "need at least 10 closed prim-valued programs, found {}",
            distinct_programs.len()
        ));
    }
    let mut cases = 0;
    for round in 0..renamings {
        for (i, (name, program, theory)) in programs.iter().enumerate() {
            let labels = labels_of_program(program);
            // A random bijection: a permutation, with fresh names mixed in on
            // odd rounds.
            let mut targets = labels.clone();
            targets.shuffle(&mut rng);
            if round % 2 == 1 {
                for t in targets.iter_mut() {
                    if rng.gen_bool(0.5) {
                        *t = Label(format!("{}_f{round}", t.0));
                    }
                }
            }
            let map: HashMap<Label, Label> =
                labels.iter().cloned().zip(targets.into_iter()).collect();
            let renamed = rename_labels_in_program(program, &|l| {
                map.get(l).cloned().unwrap_or_else(|| l.clone())
            });
            let values = run_parsed(&renamed, *theory)
                .map_err(|e| format!("{name} (renamed, round {round}): {e}"))?;
            for (pi, decl, want) in baselines.iter().filter(|(pi, _, _)| *pi == i) {
                let _ = pi;
                let got = values
                    .get(decl)
                    .ok_or_else(|| format!("{name}: {decl} missing after renaming"))?;
                assert_label_free(got);
                if print_value(got) != *want {
                    return Err(format!(
                        "{name}.{decl} changed under renaming (round {round}): {} vs {want}",
                        print_value(got)
                    ));
                }
                cases += 1;
            }
        }
    }
    Ok(cases)
}
