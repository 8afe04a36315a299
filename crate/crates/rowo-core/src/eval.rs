//! Call-by-value evaluator for the elaborated core.
//!
//! Labels are erased: records are dense arrays in canonical index order,
//! variants are tagged values, every label singleton is the unit value, and
//! the only runtime residue of a row type is its arity. Projection,
//! injection, concatenation, and branching are driven entirely by evidence
//! index maps; the label-generic operators work through the pick/delete/
//! recombine index arithmetic.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::ast::Name;
use crate::rows::{EvVar, Ev, RowSkel, Side};
use crate::typecheck::{Core, GenForm};

/// Names bound by the test prelude.
pub const PRELUDE_NAMES: &[&str] = &[
    "add", "and", "eqInt", "div", "nil", "cons", "length", "mapList",
];

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Value {
    Closure(Arc<Closure>),
    TyClosure(Arc<TyClosure>),
    EvClosure(Arc<EvClosure>),
    /// The sole inhabitant of every `Sing` type.
    Unit,
    /// A labeled value; a transparent wrapper that stores no label.
    LabeledV(Arc<Value>),
    /// Dense fields in canonical index order.
    RecordV(Arc<Vec<Value>>),
    /// A tag and a payload.
    VariantV(usize, Arc<Value>),
    /// A branch value awaiting its scrutinee.
    BranchV(Arc<RtCombine>, Arc<Value>, Arc<Value>),
    /// An `ana` value awaiting its scrutinee.
    AnaV(GenForm, usize, Arc<Value>),
    Int(i64),
    Bool(bool),
    ListV(Arc<Vec<Value>>),
    Native(&'static str, u8, Arc<Vec<Value>>),
}

#[derive(Debug)]
pub struct Closure {
    pub param: Name,
    pub body: Core,
    pub env: Arc<RtEnv>,
}

#[derive(Debug)]
pub struct TyClosure {
    pub var: Name,
    pub body: Core,
    pub env: Arc<RtEnv>,
}

#[derive(Debug)]
pub struct EvClosure {
    pub var: EvVar,
    pub body: Core,
    pub env: Arc<RtEnv>,
}

/// Runtime containment evidence: an index map into the larger row.
#[derive(Debug, Clone, PartialEq)]
pub struct RtContain {
    pub map: Vec<usize>,
}

/// Runtime combination evidence: the split of the result's indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RtCombine {
    pub left: usize,
    pub right: usize,
    pub split: Vec<(Side, usize)>,
}

impl RtCombine {
    pub fn left_in(&self) -> RtContain {
        let mut map = vec![0; self.left];
        for (i, (s, j)) in self.split.iter().enumerate() {
            if *s == Side::Left {
                map[*j] = i;
            }
        }
        RtContain { map }
    }

    pub fn right_in(&self) -> RtContain {
        let mut map = vec![0; self.right];
        for (i, (s, j)) in self.split.iter().enumerate() {
            if *s == Side::Right {
                map[*j] = i;
            }
        }
        RtContain { map }
    }

    pub fn swapped(&self) -> RtCombine {
        RtCombine {
            left: self.right,
            right: self.left,
            split: self
                .split
                .iter()
                .map(|(s, j)| match s {
                    Side::Left => (Side::Right, *j),
                    Side::Right => (Side::Left, *j),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RtEv {
    Contain(RtContain),
    Combine(RtCombine),
}

// ---------------------------------------------------------------------------
// Runtime environments
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct RtEnv {
    vars: HashMap<Name, Value>,
    /// Row-kinded type variables resolve to their arity.
    arities: HashMap<Name, usize>,
    evs: HashMap<EvVar, RtEv>,
    parent: Option<Arc<RtEnv>>,
}

impl RtEnv {
    pub fn lookup(&self, n: &str) -> Option<&Value> {
        match self.vars.get(n) {
            Some(v) => Some(v),
            None => self.parent.as_ref().and_then(|p| p.lookup(n)),
        }
    }

    pub fn lookup_arity(&self, n: &str) -> Option<usize> {
        match self.arities.get(n) {
            Some(v) => Some(*v),
            None => self.parent.as_ref().and_then(|p| p.lookup_arity(n)),
        }
    }

    pub fn lookup_ev(&self, v: EvVar) -> Option<&RtEv> {
        match self.evs.get(&v) {
            Some(e) => Some(e),
            None => self.parent.as_ref().and_then(|p| p.lookup_ev(v)),
        }
    }

    pub fn with_parent(parent: &Arc<RtEnv>) -> RtEnv {
        RtEnv {
            vars: HashMap::new(),
            arities: HashMap::new(),
            evs: HashMap::new(),
            parent: Some(parent.clone()),
        }
    }

    fn child(parent: &Arc<RtEnv>) -> RtEnv {
        RtEnv::with_parent(parent)
    }

    /// Binds a term variable.
    pub fn bind(&mut self, name: Name, value: Value) {
        self.vars.insert(name, value);
    }
}

/// The evaluation environment of the test prelude.
pub fn prelude_env() -> Arc<RtEnv> {
    let mut vars = HashMap::new();
    let natives: [(&'static str, u8); 7] = [
        ("add", 2),
        ("and", 2),
        ("eqInt", 2),
        ("div", 2),
        ("cons", 2),
        ("length", 1),
        ("mapList", 2),
    ];
    for (name, arity) in natives {
        vars.insert(name.to_string(), Value::Native(name, arity, Arc::new(vec![])));
    }
    vars.insert("nil".to_string(), Value::ListV(Arc::new(vec![])));
    Arc::new(RtEnv {
        vars,
        arities: HashMap::new(),
        evs: HashMap::new(),
        parent: None,
    })
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// A primitive failed (e.g. division by zero).
    PrimError(String),
    /// Anything else is an implementation bug on well-typed input.
    Internal(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::PrimError(m) => write!(f, "primitive error: {m}"),
            EvalError::Internal(m) => write!(f, "internal evaluator error: {m}"),
        }
    }
}

impl std::error::Error for EvalError {}

fn internal<T>(msg: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError::Internal(msg.into()))
}

// A singleton record type, a singleton variant type, and the labeled type
// are one type up to equivalence, so a value typed at an abstract row that
// gets instantiated to a concrete singleton may arrive in any of the three
// shapes. Operations apply the isomorphism on contact.

/// Views a value as record fields.
fn as_record_fields(v: Value) -> Result<Arc<Vec<Value>>, Value> {
    match v {
        Value::RecordV(fields) => Ok(fields),
        Value::LabeledV(p) => Ok(Arc::new(vec![(*p).clone()])),
        other => Err(other),
    }
}

/// Views a value as a tagged variant.
fn as_variant_value(v: Value) -> Result<(usize, Arc<Value>), Value> {
    match v {
        Value::VariantV(tag, p) => Ok((tag, p)),
        Value::LabeledV(p) => Ok((0, p)),
        other => Err(other),
    }
}

/// Views a value as a labeled payload.
fn as_labeled_payload(v: Value) -> Result<Value, Value> {
    match v {
        Value::LabeledV(p) => Ok((*p).clone()),
        Value::RecordV(fields) if fields.len() == 1 => Ok(fields[0].clone()),
        Value::VariantV(0, p) => Ok((*p).clone()),
        other => Err(other),
    }
}

// ---------------------------------------------------------------------------
// Evidence evaluation
// ---------------------------------------------------------------------------

fn resolve_skel(skel: &RowSkel, env: &RtEnv) -> Result<usize, EvalError> {
    match skel {
        RowSkel::Concrete(n) => Ok(*n),
        RowSkel::Var(z) => env
            .lookup_arity(z)
            .ok_or_else(|| EvalError::Internal(format!("unresolved row arity for `{z}`"))),
    }
}

/// Evaluates a symbolic evidence expression to concrete index maps.
pub fn eval_ev(ev: &Ev, env: &RtEnv) -> Result<RtEv, EvalError> {
    match ev {
        Ev::Hyp(v) => env
            .lookup_ev(*v)
            .cloned()
            .ok_or_else(|| EvalError::Internal(format!("unbound evidence variable {v}"))),
        Ev::Refl(skel) => {
            let n = resolve_skel(skel, env)?;
            Ok(RtEv::Contain(RtContain {
                map: (0..n).collect(),
            }))
        }
        Ev::Contain(c) => Ok(RtEv::Contain(RtContain { map: c.map.clone() })),
        Ev::Combine(c) => Ok(RtEv::Combine(RtCombine {
            left: c.left_arity(),
            right: c.right_arity(),
            split: c.split.clone(),
        })),
        Ev::Trans(a, b) => {
            let (a, b) = (eval_ev(a, env)?, eval_ev(b, env)?);
            match (a, b) {
                (RtEv::Contain(a), RtEv::Contain(b)) => Ok(RtEv::Contain(RtContain {
                    map: a.map.iter().map(|&i| b.map[i]).collect(),
                })),
                _ => internal("trans applied to non-containment evidence"),
            }
        }
        // Lifting does not change index maps.
        Ev::Lift(e) => eval_ev(e, env),
        Ev::CombLeft(e) => match eval_ev(e, env)? {
            RtEv::Combine(c) => Ok(RtEv::Contain(c.left_in())),
            _ => internal("⊙≲L applied to non-combination evidence"),
        },
        Ev::CombRight(e) => match eval_ev(e, env)? {
            RtEv::Combine(c) => Ok(RtEv::Contain(c.right_in())),
            _ => internal("⊙≲R applied to non-combination evidence"),
        },
        Ev::Swap(e) => match eval_ev(e, env)? {
            RtEv::Combine(c) => Ok(RtEv::Combine(c.swapped())),
            _ => internal("swap applied to non-combination evidence"),
        },
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

pub fn eval(env: &Arc<RtEnv>, core: &Core) -> Result<Value, EvalError> {
    match core {
        Core::Var(n) => env
            .lookup(n)
            .cloned()
            .ok_or_else(|| EvalError::Internal(format!("unbound variable `{n}`"))),
        Core::Lam(x, _, body) => Ok(Value::Closure(Arc::new(Closure {
            param: x.clone(),
            body: (**body).clone(),
            env: env.clone(),
        }))),
        Core::App(f, a) => {
            let fv = eval(env, f)?;
            let av = eval(env, a)?;
            apply(fv, av)
        }
        Core::TyLam { var, body, .. } => Ok(Value::TyClosure(Arc::new(TyClosure {
            var: var.clone(),
            body: (**body).clone(),
            env: env.clone(),
        }))),
        Core::TyApp { fun, skel, .. } => {
            let fv = eval(env, fun)?;
            let arity = match skel {
                Some(s) => Some(resolve_skel(s, env)?),
                None => None,
            };
            apply_ty(fv, arity)
        }
        Core::EvAbs(v, _, body) => Ok(Value::EvClosure(Arc::new(EvClosure {
            var: *v,
            body: (**body).clone(),
            env: env.clone(),
        }))),
        Core::EvApp(f, ev) => {
            let fv = eval(env, f)?;
            let rtev = eval_ev(ev, env)?;
            apply_evidence(fv, rtev)
        }
        Core::LabelVal(_) => Ok(Value::Unit),
        Core::LabelIntro(l, p) => {
            let _ = eval(env, l)?;
            let pv = eval(env, p)?;
            Ok(Value::LabeledV(Arc::new(pv)))
        }
        Core::Unlabel(m, g) => {
            let mv = eval(env, m)?;
            let _ = eval(env, g)?;
            match as_labeled_payload(mv) {
                Ok(p) => Ok(p),
                Err(other) => internal(format!("unlabel of a non-labeled value: {other:?}")),
            }
        }
        Core::Prj(_, ev, m) => {
            let mv = eval(env, m)?;
            let rtev = eval_ev(ev, env)?;
            match (as_record_fields(mv), rtev) {
                (Ok(fields), RtEv::Contain(c)) => apply_contain_record(&c, &fields),
                (v, e) => internal(format!("prj on {v:?} with {e:?}")),
            }
        }
        Core::Concat(ev, a, b) => {
            let av = eval(env, a)?;
            let bv = eval(env, b)?;
            let rtev = eval_ev(ev, env)?;
            match (as_record_fields(av), as_record_fields(bv), rtev) {
                (Ok(l), Ok(r), RtEv::Combine(c)) => {
                    if l.len() != c.left || r.len() != c.right {
                        return internal("concat arity mismatch");
                    }
                    let fields = c
                        .split
                        .iter()
                        .map(|(s, j)| match s {
                            Side::Left => l[*j].clone(),
                            Side::Right => r[*j].clone(),
                        })
                        .collect();
                    Ok(Value::RecordV(Arc::new(fields)))
                }
                (a, b, e) => internal(format!("concat on {a:?}, {b:?} with {e:?}")),
            }
        }
        Core::Inj(_, ev, m) => {
            let mv = eval(env, m)?;
            let rtev = eval_ev(ev, env)?;
            match (as_variant_value(mv), rtev) {
                (Ok((tag, p)), RtEv::Contain(c)) => {
                    if tag >= c.map.len() {
                        return internal("inj tag out of range");
                    }
                    Ok(Value::VariantV(c.map[tag], p))
                }
                (v, e) => internal(format!("inj on {v:?} with {e:?}")),
            }
        }
        Core::Branch(ev, l, r) => {
            let lv = eval(env, l)?;
            let rv = eval(env, r)?;
            match eval_ev(ev, env)? {
                RtEv::Combine(c) => Ok(Value::BranchV(Arc::new(c), Arc::new(lv), Arc::new(rv))),
                e => internal(format!("branch with {e:?}")),
            }
        }
        Core::Syn { form, row, body } => {
            let n = resolve_skel(row, env)?;
            let bv = eval(env, body)?;
            let mut fields = Vec::with_capacity(n);
            for i in 0..n {
                fields.push(apply_gen_body(*form, n, i, bv.clone(), None)?);
            }
            Ok(Value::RecordV(Arc::new(fields)))
        }
        Core::Ana { form, row, body } => {
            let n = resolve_skel(row, env)?;
            let bv = eval(env, body)?;
            Ok(Value::AnaV(*form, n, Arc::new(bv)))
        }
        Core::Fold {
            form,
            row,
            step,
            combine,
            unit,
            record,
        } => {
            let n = resolve_skel(row, env)?;
            let stepv = eval(env, step)?;
            let combinev = eval(env, combine)?;
            let unitv = eval(env, unit)?;
            let recv = eval(env, record)?;
            let fields = match as_record_fields(recv) {
                Ok(f) => f,
                Err(other) => return internal(format!("fold of a non-record: {other:?}")),
            };
            if fields.len() != n {
                return internal("fold arity mismatch");
            }
            if n == 0 {
                return Ok(unitv);
            }
            let mut acc =
                apply_gen_body(*form, n, 0, stepv.clone(), Some(fields[0].clone()))?;
            for i in 1..n {
                let stepped =
                    apply_gen_body(*form, n, i, stepv.clone(), Some(fields[i].clone()))?;
                acc = apply(apply(combinev.clone(), acc)?, stepped)?;
            }
            Ok(acc)
        }
        Core::SingIntroPi(m) => match as_labeled_payload(eval(env, m)?) {
            Ok(p) => Ok(Value::RecordV(Arc::new(vec![p]))),
            Err(other) => internal(format!("singleton record intro of {other:?}")),
        },
        Core::SingElimPi(m) => match as_labeled_payload(eval(env, m)?) {
            Ok(p) => Ok(Value::LabeledV(Arc::new(p))),
            Err(other) => internal(format!("singleton record elim of {other:?}")),
        },
        Core::SingIntroSig(m) => match as_labeled_payload(eval(env, m)?) {
            Ok(p) => Ok(Value::VariantV(0, Arc::new(p))),
            Err(other) => internal(format!("singleton variant intro of {other:?}")),
        },
        Core::SingElimSig(m) => match as_labeled_payload(eval(env, m)?) {
            Ok(p) => Ok(Value::LabeledV(Arc::new(p))),
            Err(other) => internal(format!("singleton variant elim of {other:?}")),
        },
        Core::Unit => Ok(Value::RecordV(Arc::new(vec![]))),
        Core::IntLit(n) => Ok(Value::Int(*n)),
        Core::BoolLit(b) => Ok(Value::Bool(*b)),
    }
}

/// Record projection: select fields through the evidence map.
pub fn apply_contain_record(ev: &RtContain, fields: &[Value]) -> Result<Value, EvalError> {
    let mut out = Vec::with_capacity(ev.map.len());
    for &j in &ev.map {
        match fields.get(j) {
            Some(v) => out.push(v.clone()),
            None => return internal("containment map out of range"),
        }
    }
    Ok(Value::RecordV(Arc::new(out)))
}

/// Variant injection: retag through the evidence map.
pub fn apply_contain_variant(
    ev: &RtContain,
    tag: usize,
    payload: Arc<Value>,
) -> Result<Value, EvalError> {
    match ev.map.get(tag) {
        Some(&t) => Ok(Value::VariantV(t, payload)),
        None => internal("injection tag out of range"),
    }
}

/// Dispatches a scrutinee through combination evidence to one of the two
/// handlers, retagging with the side-local index.
pub fn branch_dispatch(
    ev: &RtCombine,
    left: &Value,
    right: &Value,
    tag: usize,
    payload: Arc<Value>,
) -> Result<Value, EvalError> {
    match ev.split.get(tag) {
        Some((Side::Left, j)) => apply(left.clone(), Value::VariantV(*j, payload)),
        Some((Side::Right, j)) => apply(right.clone(), Value::VariantV(*j, payload)),
        None => internal("branch tag out of range"),
    }
}

/// Applies the body of a label-generic operator at index `i` of a row of
/// arity `n`: type arguments (arities only), the combination evidence for
/// this index, the unit value for the label singleton, and the payload when
/// analyzing or folding.
fn apply_gen_body(
    form: GenForm,
    n: usize,
    i: usize,
    body: Value,
    payload: Option<Value>,
) -> Result<Value, EvalError> {
    let mut v = body;
    match form {
        GenForm::ThreeVar => {
            // l, u, y := delete(ρ, i).
            v = apply_ty(v, None)?;
            v = apply_ty(v, None)?;
            v = apply_ty(v, Some(n - 1))?;
            // pick(ρ,i) ⊙ delete(ρ,i) ~ ρ.
            let split = (0..n)
                .map(|j| {
                    if j == i {
                        (Side::Left, 0)
                    } else if j < i {
                        (Side::Right, j)
                    } else {
                        (Side::Right, j - 1)
                    }
                })
                .collect();
            v = apply_evidence(
                v,
                RtEv::Combine(RtCombine {
                    left: 1,
                    right: n - 1,
                    split,
                }),
            )?;
        }
        GenForm::FiveVar => {
            // l, u, y₁ := prefix, z := prefix+cell, y₂ := suffix.
            v = apply_ty(v, None)?;
            v = apply_ty(v, None)?;
            v = apply_ty(v, Some(i))?;
            v = apply_ty(v, Some(i + 1))?;
            v = apply_ty(v, Some(n - 1 - i))?;
            // y₁ ⊙ ⟨l▹u⟩ ~ z: the cell comes last.
            let split1 = (0..=i)
                .map(|j| {
                    if j < i {
                        (Side::Left, j)
                    } else {
                        (Side::Right, 0)
                    }
                })
                .collect();
            v = apply_evidence(
                v,
                RtEv::Combine(RtCombine {
                    left: i,
                    right: 1,
                    split: split1,
                }),
            )?;
            // z ⊙ y₂ ~ ρ.
            let split2 = (0..n)
                .map(|j| {
                    if j <= i {
                        (Side::Left, j)
                    } else {
                        (Side::Right, j - 1 - i)
                    }
                })
                .collect();
            v = apply_evidence(
                v,
                RtEv::Combine(RtCombine {
                    left: i + 1,
                    right: n - 1 - i,
                    split: split2,
                }),
            )?;
        }
    }
    // The label singleton.
    v = apply(v, Value::Unit)?;
    match payload {
        Some(p) => apply(v, p),
        None => Ok(v),
    }
}

pub fn apply(f: Value, a: Value) -> Result<Value, EvalError> {
    match f {
        Value::Closure(c) => {
            let mut frame = RtEnv::child(&c.env);
            frame.vars.insert(c.param.clone(), a);
            eval(&Arc::new(frame), &c.body)
        }
        Value::Native(name, arity, args) => {
            let mut args = (*args).clone();
            args.push(a);
            if args.len() as u8 == arity {
                run_native(name, &args)
            } else {
                Ok(Value::Native(name, arity, Arc::new(args)))
            }
        }
        Value::BranchV(ev, l, r) => match as_variant_value(a) {
            Ok((tag, p)) => branch_dispatch(&ev, &l, &r, tag, p),
            Err(other) => internal(format!("branch applied to non-variant {other:?}")),
        },
        Value::AnaV(form, n, body) => match as_variant_value(a) {
            Ok((tag, p)) => {
                if tag >= n {
                    return internal("ana tag out of range");
                }
                apply_gen_body(form, n, tag, (*body).clone(), Some((*p).clone()))
            }
            Err(other) => internal(format!("ana applied to non-variant {other:?}")),
        },
        other => internal(format!("application of a non-function {other:?}")),
    }
}

fn apply_ty(f: Value, arity: Option<usize>) -> Result<Value, EvalError> {
    match f {
        Value::TyClosure(c) => {
            let mut frame = RtEnv::child(&c.env);
            if let Some(n) = arity {
                frame.arities.insert(c.var.clone(), n);
            }
            eval(&Arc::new(frame), &c.body)
        }
        // Prelude natives are uniformly polymorphic and ignore type
        // arguments.
        Value::Native(name, a, args) => {
            if a == 0 {
                run_native(name, &args)
            } else {
                Ok(Value::Native(name, a, args))
            }
        }
        Value::ListV(v) => Ok(Value::ListV(v)),
        other => internal(format!("type application of {other:?}")),
    }
}

fn apply_evidence(f: Value, ev: RtEv) -> Result<Value, EvalError> {
    match f {
        Value::EvClosure(c) => {
            let mut frame = RtEnv::child(&c.env);
            frame.evs.insert(c.var, ev);
            eval(&Arc::new(frame), &c.body)
        }
        other => internal(format!("evidence application of {other:?}")),
    }
}

fn run_native(name: &'static str, args: &[Value]) -> Result<Value, EvalError> {
    match (name, args) {
        ("add", [Value::Int(a), Value::Int(b)]) => Ok(Value::Int(a + b)),
        ("and", [Value::Bool(a), Value::Bool(b)]) => Ok(Value::Bool(*a && *b)),
        ("eqInt", [Value::Int(a), Value::Int(b)]) => Ok(Value::Bool(a == b)),
        ("div", [Value::Int(a), Value::Int(b)]) => {
            if *b == 0 {
                Err(EvalError::PrimError("division by zero".to_string()))
            } else {
                Ok(Value::Int(a / b))
            }
        }
        ("cons", [x, Value::ListV(xs)]) => {
            let mut out = vec![x.clone()];
            out.extend(xs.iter().cloned());
            Ok(Value::ListV(Arc::new(out)))
        }
        ("length", [Value::ListV(xs)]) => Ok(Value::Int(xs.len() as i64)),
        ("mapList", [f, Value::ListV(xs)]) => {
            let mut out = Vec::with_capacity(xs.len());
            for x in xs.iter() {
                out.push(apply(f.clone(), x.clone())?);
            }
            Ok(Value::ListV(Arc::new(out)))
        }
        _ => internal(format!("bad primitive application: {name} {args:?}")),
    }
}

// ---------------------------------------------------------------------------
// Printing and structural checks
// ---------------------------------------------------------------------------

/// Prints a value: prims verbatim, records as `{i0 = v, …}` by canonical
/// index, variants as `#k(v)`, unit as `()`.
pub fn print_value(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Bool(true) => "true".to_string(),
        Value::Bool(false) => "false".to_string(),
        Value::Unit => "()".to_string(),
        Value::LabeledV(p) => print_value(p),
        Value::RecordV(fields) => {
            if fields.is_empty() {
                "()".to_string()
            } else {
                let inner = fields
                    .iter()
                    .enumerate()
                    .map(|(i, f)| format!("i{i} = {}", print_value(f)))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("{{{inner}}}")
            }
        }
        Value::VariantV(tag, p) => format!("#{tag}({})", print_value(p)),
        Value::ListV(xs) => {
            let inner = xs.iter().map(print_value).collect::<Vec<_>>().join(", ");
            format!("[{inner}]")
        }
        Value::Closure(_)
        | Value::TyClosure(_)
        | Value::EvClosure(_)
        | Value::BranchV(_, _, _)
        | Value::AnaV(_, _, _)
        | Value::Native(_, _, _) => "<fun>".to_string(),
    }
}

/// Structural assertion that no value constructor stores a label: the match
/// below is exhaustive over `Value`, and no arm can produce a label name.
pub fn assert_label_free(v: &Value) {
    match v {
        Value::Unit | Value::Int(_) | Value::Bool(_) => {}
        Value::LabeledV(p) => assert_label_free(p),
        Value::RecordV(fields) => fields.iter().for_each(assert_label_free),
        Value::VariantV(_, p) => assert_label_free(p),
        Value::ListV(xs) => xs.iter().for_each(assert_label_free),
        Value::BranchV(_, l, r) => {
            assert_label_free(l);
            assert_label_free(r);
        }
        Value::AnaV(_, _, b) => assert_label_free(b),
        Value::Native(_, _, args) => args.iter().for_each(assert_label_free),
        // Closure environments hold only values and arities.
        Value::Closure(_) | Value::TyClosure(_) | Value::EvClosure(_) => {}
    }
}
