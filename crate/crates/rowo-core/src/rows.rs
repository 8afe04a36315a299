//! The row-theory abstraction and its three instances, evidence as index
//! maps, and the pick/delete/recombine machinery behind the label-generic
//! operators.
//!
//! A row theory is a triple of row kinding, row equivalence, and predicate
//! entailment. The minimal theory admits only empty and singleton concrete
//! rows and reasons about everything else through hypotheses; the simple
//! theory is commutative with distinct labels; the scoped theory is
//! non-commutative with repeated labels, preferring the leftmost occurrence.

use crate::ast::{Env, Kind, Label, Name, Pred, Type};
use crate::equiv::{
    equiv_normed, normalize, normalize_pred, pred_equiv_normed, provably_distinct,
    scoped_row_match,
};
use crate::kinds::{kind_of, KindError, KindErrorReason};
use crate::surface::{print_pred, print_type, TheoryName};

/// A row theory: its tag plus the `row_kind_ok` / `row_equiv` / `entail`
/// operations below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Theory {
    pub name: TheoryName,
}

impl Theory {
    pub fn minimal() -> Theory {
        Theory {
            name: TheoryName::Minimal,
        }
    }

    pub fn simple() -> Theory {
        Theory {
            name: TheoryName::Simple,
        }
    }

    pub fn scoped() -> Theory {
        Theory {
            name: TheoryName::Scoped,
        }
    }

    pub fn of(name: TheoryName) -> Theory {
        Theory { name }
    }

    /// Only the simple theory is commutative.
    pub fn commutative(&self) -> bool {
        self.name == TheoryName::Simple
    }

    /// Row kinding for concrete row literals.
    ///
    /// Minimal: arity at most one. Simple: pairwise distinct concrete
    /// labels, so literals of length ≥ 2 with any label variable are
    /// rejected. Scoped: anything.
    pub fn row_kind_ok(&self, entries: &[(Type, Type)]) -> Result<(), KindError> {
        match self.name {
            TheoryName::Minimal => {
                if entries.len() > 1 {
                    Err(row_rejected(format!(
                        "the minimal theory only admits empty and singleton rows, got {} entries",
                        entries.len()
                    )))
                } else {
                    Ok(())
                }
            }
            TheoryName::Simple => {
                if entries.len() <= 1 {
                    return Ok(());
                }
                let mut names: Vec<&str> = Vec::new();
                for (l, _) in entries {
                    match l {
                        Type::LabelConst(Label(n)) => {
                            if names.contains(&n.as_str()) {
                                return Err(row_rejected(format!(
                                    "label '{n} appears twice; simple rows must have different concrete labels"
                                )));
                            }
                            names.push(n);
                        }
                        _ => {
                            return Err(row_rejected(
                                "simple rows of length ≥ 2 require concrete labels; express them as concatenations of singleton rows"
                                    .to_string(),
                            ))
                        }
                    }
                }
                Ok(())
            }
            TheoryName::Scoped => Ok(()),
        }
    }

    /// Theory equivalence of two concrete rows.
    pub fn row_equiv(&self, env: &Env, a: &ConcreteRow, b: &ConcreteRow) -> bool {
        let t = *self;
        let na = a.normalized(t, env);
        let nb = b.normalized(t, env);
        equiv_normed(t, &na.as_row_type(), &nb.as_row_type())
    }
}

fn row_rejected(msg: String) -> KindError {
    KindError {
        span: Default::default(),
        reason: KindErrorReason::RowTheoryRejected(msg),
    }
}

// ---------------------------------------------------------------------------
// Concrete rows
// ---------------------------------------------------------------------------

/// A fully concrete row: every label is a constant. Payload types may still
/// mention rigid type variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteRow {
    pub entries: Vec<(Label, Type)>,
}

impl ConcreteRow {
    pub fn new(entries: Vec<(Label, Type)>) -> ConcreteRow {
        ConcreteRow { entries }
    }

    pub fn arity(&self) -> usize {
        self.entries.len()
    }

    /// Views a row-literal type as a concrete row, if all labels are
    /// constants.
    pub fn from_type(ty: &Type) -> Option<ConcreteRow> {
        match ty {
            Type::RowLit(entries, _) => {
                let mut out = Vec::with_capacity(entries.len());
                for (l, p) in entries {
                    match l {
                        Type::LabelConst(lbl) => out.push((lbl.clone(), p.clone())),
                        _ => return None,
                    }
                }
                Some(ConcreteRow { entries: out })
            }
            _ => None,
        }
    }

    pub fn as_row_type(&self) -> Type {
        Type::RowLit(
            self.entries
                .iter()
                .map(|(l, p)| (Type::LabelConst(l.clone()), p.clone()))
                .collect(),
            Kind::ty(),
        )
    }

    fn normalized(&self, theory: Theory, env: &Env) -> ConcreteRow {
        match ConcreteRow::from_type(&normalize(theory, env, &self.as_row_type())) {
            Some(r) => r,
            None => self.clone(),
        }
    }
}

/// `pick ρ i` — the singleton row at index `i`.
pub fn pick(row: &ConcreteRow, i: usize) -> Result<ConcreteRow, String> {
    if i >= row.arity() {
        return Err(format!("pick: index {i} out of range for arity {}", row.arity()));
    }
    Ok(ConcreteRow {
        entries: vec![row.entries[i].clone()],
    })
}

/// `delete ρ i` — everything but index `i`, order preserved.
pub fn delete(row: &ConcreteRow, i: usize) -> Result<ConcreteRow, String> {
    if i >= row.arity() {
        return Err(format!(
            "delete: index {i} out of range for arity {}",
            row.arity()
        ));
    }
    let mut entries = row.entries.clone();
    entries.remove(i);
    Ok(ConcreteRow { entries })
}

/// `recombine ρ i` — evidence that `pick ρ i ⊙ delete ρ i ~ ρ`.
pub fn recombine(row: &ConcreteRow, i: usize) -> Result<CombineEv, String> {
    if i >= row.arity() {
        return Err(format!(
            "recombine: index {i} out of range for arity {}",
            row.arity()
        ));
    }
    let n = row.arity();
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
    Ok(CombineEv {
        left: pick(row, i)?,
        right: delete(row, i)?,
        result: row.clone(),
        split,
    })
}

// ---------------------------------------------------------------------------
// Evidence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Containment evidence over concrete rows: an injective index map from the
/// smaller row into the larger, whose per-index type-equality witnesses are
/// checked by `validate_contain`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainEv {
    pub src: ConcreteRow,
    pub dst: ConcreteRow,
    pub map: Vec<usize>,
}

/// Combination evidence: a split of the result's indices between the two
/// sides, from which the two containments are recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct CombineEv {
    pub left: ConcreteRow,
    pub right: ConcreteRow,
    pub result: ConcreteRow,
    pub split: Vec<(Side, usize)>,
}

impl CombineEv {
    pub fn left_arity(&self) -> usize {
        self.left.arity()
    }

    pub fn right_arity(&self) -> usize {
        self.right.arity()
    }

    pub fn result_arity(&self) -> usize {
        self.result.arity()
    }

    /// The containment of the left row in the result, recovered from the
    /// split.
    pub fn left_in(&self) -> ContainEv {
        let mut map = vec![0; self.left.arity()];
        for (i, (side, j)) in self.split.iter().enumerate() {
            if *side == Side::Left {
                map[*j] = i;
            }
        }
        ContainEv {
            src: self.left.clone(),
            dst: self.result.clone(),
            map,
        }
    }

    pub fn right_in(&self) -> ContainEv {
        let mut map = vec![0; self.right.arity()];
        for (i, (side, j)) in self.split.iter().enumerate() {
            if *side == Side::Right {
                map[*j] = i;
            }
        }
        ContainEv {
            src: self.right.clone(),
            dst: self.result.clone(),
            map,
        }
    }

    /// Commutes the two sides (valid in the simple theory only).
    pub fn swapped(&self) -> CombineEv {
        CombineEv {
            left: self.right.clone(),
            right: self.left.clone(),
            result: self.result.clone(),
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

/// Validates a containment: the map is total, in range, injective, and every
/// mapped index has the same label and an equivalent type.
pub fn validate_contain(theory: Theory, env: &Env, ev: &ContainEv) -> Result<(), String> {
    if ev.map.len() != ev.src.arity() {
        return Err("containment map is not total".to_string());
    }
    let mut seen = vec![false; ev.dst.arity()];
    for (i, &j) in ev.map.iter().enumerate() {
        if j >= ev.dst.arity() {
            return Err(format!("containment maps {i} out of range: {j}"));
        }
        if seen[j] {
            return Err(format!("containment map is not injective at {j}"));
        }
        seen[j] = true;
        let (sl, sp) = &ev.src.entries[i];
        let (dl, dp) = &ev.dst.entries[j];
        if sl != dl {
            return Err(format!("label mismatch at {i}: '{} vs '{}", sl.0, dl.0));
        }
        if !crate::equiv::type_equiv(theory, env, sp, dp) {
            return Err(format!(
                "type witness fails at {i}: {} vs {}",
                print_type(sp),
                print_type(dp)
            ));
        }
    }
    Ok(())
}

/// Validates a combination: the split is total, covers both sides exactly
/// once, agrees labelwise and typewise, and its two recovered containments
/// are sections of it.
pub fn validate_combine(theory: Theory, env: &Env, ev: &CombineEv) -> Result<(), String> {
    let (l, m, n) = (ev.left.arity(), ev.right.arity(), ev.result.arity());
    if l + m != n {
        return Err(format!("arities do not add up: {l} + {m} != {n}"));
    }
    if ev.split.len() != n {
        return Err("split is not total".to_string());
    }
    let mut seen_left = vec![false; l];
    let mut seen_right = vec![false; m];
    for (i, (side, j)) in ev.split.iter().enumerate() {
        let (sl, sp) = &ev.result.entries[i];
        let (el, ep) = match side {
            Side::Left => {
                if *j >= l {
                    return Err(format!("split left index {j} out of range"));
                }
                if seen_left[*j] {
                    return Err(format!("left index {j} covered twice"));
                }
                seen_left[*j] = true;
                &ev.left.entries[*j]
            }
            Side::Right => {
                if *j >= m {
                    return Err(format!("split right index {j} out of range"));
                }
                if seen_right[*j] {
                    return Err(format!("right index {j} covered twice"));
                }
                seen_right[*j] = true;
                &ev.right.entries[*j]
            }
        };
        if sl != el {
            return Err(format!("label mismatch at result {i}"));
        }
        if !crate::equiv::type_equiv(theory, env, sp, ep) {
            return Err(format!("type witness fails at result {i}"));
        }
    }
    if !seen_left.iter().all(|&b| b) || !seen_right.iter().all(|&b| b) {
        return Err("split does not cover both sides".to_string());
    }
    // left_in / right_in are sections of split.
    for (j, &i) in ev.left_in().map.iter().enumerate() {
        if ev.split[i] != (Side::Left, j) {
            return Err("left_in is not a section of split".to_string());
        }
    }
    for (j, &i) in ev.right_in().map.iter().enumerate() {
        if ev.split[i] != (Side::Right, j) {
            return Err("right_in is not a section of split".to_string());
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Arity skeletons
// ---------------------------------------------------------------------------

/// The only runtime residue of a row type: its arity, either known now or
/// resolved from a row variable's binding at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum RowSkel {
    Concrete(usize),
    Var(Name),
}

/// Computes the arity skeleton of a (normalized) row-kinded type.
pub fn row_skeleton(theory: Theory, env: &Env, ty: &Type) -> Result<RowSkel, String> {
    match ty {
        Type::RowLit(entries, _) => Ok(RowSkel::Concrete(entries.len())),
        Type::Var(n) => Ok(RowSkel::Var(n.clone())),
        Type::RowMap(_, r) | Type::Labeled(_, r) => row_skeleton(theory, env, r),
        Type::App(f, a) => {
            // Which side is the row?
            let kf = kind_of(theory, env, f).map_err(|e| e.to_string())?;
            match kf {
                Kind::Row(_) => row_skeleton(theory, env, f),
                _ => row_skeleton(theory, env, a),
            }
        }
        other => Err(format!(
            "cannot determine the arity of row type {}",
            print_type(other)
        )),
    }
}

// ---------------------------------------------------------------------------
// Symbolic evidence and entailment
// ---------------------------------------------------------------------------

pub type EvVar = usize;

/// Evidence expressions: hypothesis references closed under the minimal
/// theory's entailment rules, with concrete index maps at the leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum Ev {
    /// A hypothesis (the evidence variable bound by an `EvAbs`).
    Hyp(EvVar),
    /// `ent-refl`: the identity containment on a row of this skeleton.
    Refl(RowSkel),
    /// Concrete containment evidence.
    Contain(ContainEv),
    /// Concrete combination evidence.
    Combine(CombineEv),
    /// `ent-trans`.
    Trans(Box<Ev>, Box<Ev>),
    /// `ent-≲lift` / `ent-⊙lift`: index maps are unchanged by lifting.
    Lift(Box<Ev>),
    /// `ent-⊙≲L`: the left containment of a combination.
    CombLeft(Box<Ev>),
    /// `ent-⊙≲R`.
    CombRight(Box<Ev>),
    /// Commutes a combination's sides (simple theory).
    Swap(Box<Ev>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntailError {
    /// Not derivable within the search depth.
    Unsolved(String),
    /// Rejected outright by the theory (e.g. overlapping simple-theory
    /// combination).
    TheoryError(String),
}

impl std::fmt::Display for EntailError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntailError::Unsolved(p) => write!(f, "cannot solve predicate {p}"),
            EntailError::TheoryError(m) => write!(f, "{m}"),
        }
    }
}

pub const DEFAULT_DEPTH: usize = 16;

/// Goal-directed entailment over the closure rules, hypotheses first, with
/// `ent-trans` only through hypotheses and combination projections.
pub fn entail(
    theory: Theory,
    env: &Env,
    hyps: &[(Pred, EvVar)],
    goal: &Pred,
    depth: usize,
) -> Result<Ev, EntailError> {
    let goal = normalize_pred(theory, env, goal);
    let hyps_n: Vec<(Pred, EvVar)> = hyps
        .iter()
        .map(|(p, v)| (normalize_pred(theory, env, p), *v))
        .collect();
    solve(theory, env, &hyps_n, &goal, depth)
}

fn solve(
    theory: Theory,
    env: &Env,
    hyps: &[(Pred, EvVar)],
    goal: &Pred,
    depth: usize,
) -> Result<Ev, EntailError> {
    if depth == 0 {
        return Err(EntailError::Unsolved(print_pred(goal)));
    }
    // 1. Hypotheses, possibly commuted under the simple theory.
    for (h, v) in hyps {
        if pred_equiv_normed(theory, h, goal) {
            return Ok(Ev::Hyp(*v));
        }
        if theory.commutative() {
            if let (Pred::Combine(a, b, c), Pred::Combine(ga, gb, gc)) = (h, goal) {
                if equiv_normed(theory, a, gb)
                    && equiv_normed(theory, b, ga)
                    && equiv_normed(theory, c, gc)
                {
                    return Ok(Ev::Swap(Box::new(Ev::Hyp(*v))));
                }
            }
        }
    }
    match goal {
        Pred::Contain(d, r1, r2) => {
            // 2. Reflexivity.
            if equiv_normed(theory, r1, r2) {
                if let Ok(skel) = row_skeleton(theory, env, r1) {
                    return Ok(Ev::Refl(skel));
                }
            }
            // 3. Concrete rows.
            if let (Some(src), Some(dst)) = (ConcreteRow::from_type(r1), ConcreteRow::from_type(r2))
            {
                return solve_contain_concrete(theory, env, *d, &src, &dst)
                    .map(|ev| {
                        debug_assert!(
                            validate_contain(theory, env, &ev).is_ok(),
                            "solver produced invalid containment evidence"
                        );
                        Ev::Contain(ev)
                    })
                    .ok_or_else(|| EntailError::Unsolved(print_pred(goal)));
            }
            // 4. Combination projections, peeling the target through
            //    hypothesis combinations.
            for (h, v) in hyps {
                if let Pred::Combine(a, b, c) = h {
                    if equiv_normed(theory, c, r2) {
                        let left_ok = *d == crate::ast::Dir::L || theory.commutative();
                        let right_ok = *d == crate::ast::Dir::R || theory.commutative();
                        if left_ok && equiv_normed(theory, a, r1) {
                            return Ok(Ev::CombLeft(Box::new(Ev::Hyp(*v))));
                        }
                        if right_ok && equiv_normed(theory, b, r1) {
                            return Ok(Ev::CombRight(Box::new(Ev::Hyp(*v))));
                        }
                        if left_ok {
                            if let Ok(sub) = solve(
                                theory,
                                env,
                                hyps,
                                &Pred::Contain(*d, r1.clone(), a.clone()),
                                depth - 1,
                            ) {
                                return Ok(Ev::Trans(
                                    Box::new(sub),
                                    Box::new(Ev::CombLeft(Box::new(Ev::Hyp(*v)))),
                                ));
                            }
                        }
                        if right_ok {
                            if let Ok(sub) = solve(
                                theory,
                                env,
                                hyps,
                                &Pred::Contain(*d, r1.clone(), b.clone()),
                                depth - 1,
                            ) {
                                return Ok(Ev::Trans(
                                    Box::new(sub),
                                    Box::new(Ev::CombRight(Box::new(Ev::Hyp(*v)))),
                                ));
                            }
                        }
                    }
                }
            }
            // 5. Backward lifting: strip a common map.
            if let Some((a, b)) = strip_common_lift(theory, env, r1, r2) {
                if let Ok(sub) = solve(theory, env, hyps, &Pred::Contain(*d, a, b), depth - 1) {
                    return Ok(Ev::Lift(Box::new(sub)));
                }
            }
            // 6. Transitivity through hypothesis containments.
            for (h, v) in hyps {
                if let Pred::Contain(hd, a, b) = h {
                    if *hd != *d && !theory.commutative() {
                        continue;
                    }
                    if equiv_normed(theory, a, r1) {
                        if let Ok(sub) = solve(
                            theory,
                            env,
                            hyps,
                            &Pred::Contain(*d, b.clone(), r2.clone()),
                            depth - 1,
                        ) {
                            return Ok(Ev::Trans(Box::new(Ev::Hyp(*v)), Box::new(sub)));
                        }
                    }
                    if equiv_normed(theory, b, r2) {
                        if let Ok(sub) = solve(
                            theory,
                            env,
                            hyps,
                            &Pred::Contain(*d, r1.clone(), a.clone()),
                            depth - 1,
                        ) {
                            return Ok(Ev::Trans(Box::new(sub), Box::new(Ev::Hyp(*v))));
                        }
                    }
                }
            }
            Err(EntailError::Unsolved(print_pred(goal)))
        }
        Pred::Combine(r1, r2, r3) => {
            // Concrete combination.
            if let (Some(a), Some(b)) = (ConcreteRow::from_type(r1), ConcreteRow::from_type(r2)) {
                let merged = combine_concrete(theory, env, &a, &b)?;
                if let Some(c) = ConcreteRow::from_type(r3) {
                    return match_combine_result(theory, env, &merged, &c)
                        .map(|ev| {
                            debug_assert!(
                                validate_combine(theory, env, &ev).is_ok(),
                                "solver produced invalid combination evidence"
                            );
                            Ev::Combine(ev)
                        })
                        .ok_or_else(|| EntailError::Unsolved(print_pred(goal)));
                }
                // The result is abstract; nothing beyond hypotheses can
                // justify it.
                return Err(EntailError::Unsolved(print_pred(goal)));
            }
            // Backward lifting over all three components.
            if let Some((a, b, c)) = strip_common_lift3(theory, env, r1, r2, r3) {
                if let Ok(sub) = solve(theory, env, hyps, &Pred::Combine(a, b, c), depth - 1) {
                    return Ok(Ev::Lift(Box::new(sub)));
                }
            }
            Err(EntailError::Unsolved(print_pred(goal)))
        }
    }
}

/// Looks for a row `ρ₃` with `ρ₁ ⊙ ρ₂ ~ ρ₃`, either by concrete combination
/// or from a hypothesis. Used by concatenation and branching in inference
/// position.
pub fn find_combination(
    theory: Theory,
    env: &Env,
    hyps: &[(Pred, EvVar)],
    r1: &Type,
    r2: &Type,
) -> Result<(Type, Ev), EntailError> {
    let r1 = normalize(theory, env, r1);
    let r2 = normalize(theory, env, r2);
    // Hypotheses first: the program's types are written against the
    // hypothesis's result row, not a freshly computed merge.
    for (h, v) in hyps {
        let h = normalize_pred(theory, env, h);
        if let Pred::Combine(a, b, c) = &h {
            if equiv_normed(theory, a, &r1) && equiv_normed(theory, b, &r2) {
                return Ok((c.clone(), Ev::Hyp(*v)));
            }
            if theory.commutative() && equiv_normed(theory, a, &r2) && equiv_normed(theory, b, &r1)
            {
                return Ok((c.clone(), Ev::Swap(Box::new(Ev::Hyp(*v)))));
            }
        }
    }
    if let (Some(a), Some(b)) = (ConcreteRow::from_type(&r1), ConcreteRow::from_type(&r2)) {
        match combine_concrete(theory, env, &a, &b) {
            Ok(ev) => {
                let ty = ev.result.as_row_type();
                return Ok((ty, Ev::Combine(ev)));
            }
            Err(e @ EntailError::TheoryError(_)) => return Err(e),
            Err(EntailError::Unsolved(_)) => {}
        }
    }
    // Strip a common lift and retry, rebuilding the lifted result.
    if let Some((a, b)) = strip_common_lift(theory, env, &r1, &r2) {
        let phi = common_map_of(&r1, &r2);
        if let (Some(phi), Ok((c, ev))) = (phi, find_combination(theory, env, hyps, &a, &b)) {
            let lifted = normalize(
                theory,
                env,
                &Type::RowMap(Box::new(phi), Box::new(c)),
            );
            return Ok((lifted, Ev::Lift(Box::new(ev))));
        }
    }
    Err(EntailError::Unsolved(format!(
        "{} o+ {} ~ ?",
        print_type(&r1),
        print_type(&r2)
    )))
}

/// When both rows are images of one map `φ` (or can be unlifted through it),
/// returns the preimages.
fn strip_common_lift(theory: Theory, env: &Env, a: &Type, b: &Type) -> Option<(Type, Type)> {
    let phi = common_map_of(a, b)?;
    let ua = unlift(theory, env, a, &phi)?;
    let ub = unlift(theory, env, b, &phi)?;
    Some((ua, ub))
}

fn strip_common_lift3(
    theory: Theory,
    env: &Env,
    a: &Type,
    b: &Type,
    c: &Type,
) -> Option<(Type, Type, Type)> {
    let phi = [a, b, c].iter().find_map(|t| match t {
        Type::RowMap(f, _) => Some((**f).clone()),
        _ => None,
    })?;
    Some((
        unlift(theory, env, a, &phi)?,
        unlift(theory, env, b, &phi)?,
        unlift(theory, env, c, &phi)?,
    ))
}

fn common_map_of(a: &Type, b: &Type) -> Option<Type> {
    match (a, b) {
        (Type::RowMap(f, _), _) => Some((**f).clone()),
        (_, Type::RowMap(f, _)) => Some((**f).clone()),
        _ => None,
    }
}

/// Inverts a lift: finds `ρ'` with `normalize(φ ρ') = ρ`.
pub fn unlift_row(theory: Theory, env: &Env, row: &Type, phi: &Type) -> Option<Type> {
    unlift(theory, env, row, phi)
}

fn unlift(theory: Theory, env: &Env, row: &Type, phi: &Type) -> Option<Type> {
    match row {
        Type::RowMap(f, r) => {
            if equiv_normed(theory, f, phi) {
                Some((**r).clone())
            } else {
                None
            }
        }
        Type::RowLit(entries, hint) => {
            let mut out = Vec::with_capacity(entries.len());
            for (l, p) in entries {
                let u = unlift_entry(theory, env, p, phi)?;
                out.push((l.clone(), u));
            }
            Some(Type::RowLit(out, hint.clone()))
        }
        _ => None,
    }
}

/// Solves `normalize(φ β) = τ` for `β` by first-order matching against the
/// opened body of `φ`.
fn unlift_entry(theory: Theory, env: &Env, target: &Type, phi: &Type) -> Option<Type> {
    let dom = match kind_of(theory, env, phi) {
        Ok(Kind::Arrow(d, _)) => *d,
        _ => return None,
    };
    let mut avoid = crate::ast::free_vars(phi);
    avoid.extend(crate::ast::free_vars(target));
    let hole = crate::ast::fresh_name("__hole", &avoid);
    let mut inner = env.clone();
    inner.push_ty(&hole, dom);
    let pattern = normalize(
        theory,
        &inner,
        &Type::app(phi.clone(), Type::var(&hole)),
    );
    let mut m = Matcher {
        theory,
        hole: &hole,
        solution: None,
        pat_binders: Vec::new(),
        tgt_binders: Vec::new(),
    };
    if m.go(&pattern, target) {
        m.solution
    } else {
        None
    }
}

/// First-order matching with one hole, alpha-aware. The hole is fresh, so
/// it is never shadowed by a binder; the solution must not capture pattern
/// binders.
struct Matcher<'a> {
    theory: Theory,
    hole: &'a str,
    solution: Option<Type>,
    pat_binders: Vec<Name>,
    tgt_binders: Vec<Name>,
}

impl Matcher<'_> {
    fn vars_eq(&self, a: &str, b: &str) -> bool {
        let la = self.pat_binders.iter().rposition(|n| n == a);
        let rb = self.tgt_binders.iter().rposition(|n| n == b);
        match (la, rb) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }

    fn go(&mut self, pattern: &Type, target: &Type) -> bool {
        if let Type::Var(n) = pattern {
            if n == self.hole {
                // The solution may not mention target-side bound variables.
                if crate::ast::free_vars(target)
                    .iter()
                    .any(|v| self.tgt_binders.contains(v))
                {
                    return false;
                }
                return match &self.solution {
                    Some(prev) => equiv_normed(self.theory, prev, target),
                    None => {
                        self.solution = Some(target.clone());
                        true
                    }
                };
            }
        }
        match (pattern, target) {
            (Type::Var(a), Type::Var(b)) => self.vars_eq(a, b),
            (Type::Fun, Type::Fun) => true,
            (Type::Prim(a), Type::Prim(b)) => a == b,
            (Type::LabelConst(a), Type::LabelConst(b)) => a == b,
            (Type::App(f1, a1), Type::App(f2, a2))
            | (Type::RowMap(f1, a1), Type::RowMap(f2, a2)) => {
                self.go(f1, f2) && self.go(a1, a2)
            }
            (Type::Sing(a), Type::Sing(b)) => self.go(a, b),
            (Type::Labeled(l1, p1), Type::Labeled(l2, p2)) => self.go(l1, l2) && self.go(p1, p2),
            (Type::Pi(a), Type::Pi(b)) | (Type::SigmaV(a), Type::SigmaV(b)) => self.go(a, b),
            (Type::RowLit(e1, _), Type::RowLit(e2, _)) => {
                e1.len() == e2.len()
                    && e1
                        .iter()
                        .zip(e2)
                        .all(|((l1, p1), (l2, p2))| self.go(l1, l2) && self.go(p1, p2))
            }
            (Type::Qual(p1, t1), Type::Qual(p2, t2)) => {
                let preds = match (p1.as_ref(), p2.as_ref()) {
                    (Pred::Contain(d1, a1, b1), Pred::Contain(d2, a2, b2)) => {
                        d1 == d2 && self.go(a1, a2) && self.go(b1, b2)
                    }
                    (Pred::Combine(a1, b1, c1), Pred::Combine(a2, b2, c2)) => {
                        self.go(a1, a2) && self.go(b1, b2) && self.go(c1, c2)
                    }
                    _ => false,
                };
                preds && self.go(t1, t2)
            }
            (Type::Forall(v1, k1, b1), Type::Forall(v2, k2, b2))
            | (Type::Lam(v1, k1, b1), Type::Lam(v2, k2, b2)) => {
                if !k1.same_erased(k2) {
                    return false;
                }
                self.pat_binders.push(v1.clone());
                self.tgt_binders.push(v2.clone());
                let r = self.go(b1, b2);
                self.pat_binders.pop();
                self.tgt_binders.pop();
                r
            }
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Concrete solvers per theory
// ---------------------------------------------------------------------------

/// Concrete containment. Simple: match by label, any permutation. Scoped:
/// occurrence-respecting match with provably-distinct inversions only.
/// Minimal: only reflexivity relates concrete rows.
pub fn solve_contain_concrete(
    theory: Theory,
    env: &Env,
    dir: crate::ast::Dir,
    src: &ConcreteRow,
    dst: &ConcreteRow,
) -> Option<ContainEv> {
    match theory.name {
        TheoryName::Minimal => {
            if src.arity() == dst.arity()
                && src.entries.iter().zip(&dst.entries).all(|((l1, p1), (l2, p2))| {
                    l1 == l2 && crate::equiv::type_equiv(theory, env, p1, p2)
                })
            {
                Some(ContainEv {
                    src: src.clone(),
                    dst: dst.clone(),
                    map: (0..src.arity()).collect(),
                })
            } else {
                None
            }
        }
        TheoryName::Simple => {
            let mut map = Vec::with_capacity(src.arity());
            for (l, p) in &src.entries {
                let j = dst.entries.iter().position(|(dl, _)| dl == l)?;
                if !crate::equiv::type_equiv(theory, env, p, &dst.entries[j].1) {
                    return None;
                }
                if map.contains(&j) {
                    return None;
                }
                map.push(j);
            }
            Some(ContainEv {
                src: src.clone(),
                dst: dst.clone(),
                map,
            })
        }
        TheoryName::Scoped => {
            let map = scoped_contain_match(theory, env, dir, src, dst)?;
            Some(ContainEv {
                src: src.clone(),
                dst: dst.clone(),
                map,
            })
        }
    }
}

/// Scoped containment: the k-th occurrence of a label in `src` (from the
/// left for `≲_L`, from the right for `≲_R`) must match the k-th occurrence
/// in `dst`, and moving the matched entries to the front (respectively back)
/// may only cross provably distinct labels.
fn scoped_contain_match(
    theory: Theory,
    env: &Env,
    dir: crate::ast::Dir,
    src: &ConcreteRow,
    dst: &ConcreteRow,
) -> Option<Vec<usize>> {
    let n = dst.arity();
    let m = src.arity();
    if m > n {
        return None;
    }
    let occ_of = |entries: &[(Label, Type)], i: usize, from_right: bool| -> usize {
        if from_right {
            (i + 1..entries.len())
                .filter(|&j| entries[j].0 == entries[i].0)
                .count()
        } else {
            (0..i).filter(|&j| entries[j].0 == entries[i].0).count()
        }
    };
    let from_right = dir == crate::ast::Dir::R;
    let mut map = vec![0usize; m];
    let mut used = vec![false; n];
    for i in 0..m {
        let occ = occ_of(&src.entries, i, from_right);
        // Find the occ-th occurrence of this label in dst, counted from the
        // same end.
        let positions: Vec<usize> = (0..n)
            .filter(|&j| dst.entries[j].0 == src.entries[i].0)
            .collect();
        let k = if from_right {
            if occ >= positions.len() {
                return None;
            }
            positions[positions.len() - 1 - occ]
        } else {
            *positions.get(occ)?
        };
        if used[k] {
            return None;
        }
        if !crate::equiv::type_equiv(theory, env, &src.entries[i].1, &dst.entries[k].1) {
            return None;
        }
        used[k] = true;
        map[i] = k;
    }
    // Permutation side condition: build the full permutation of dst (matched
    // entries moved to the front/back in src order, the rest in place) and
    // check every inversion swaps distinct labels.
    let rest: Vec<usize> = (0..n).filter(|j| !used[*j]).collect();
    let final_order: Vec<usize> = if from_right {
        rest.iter().copied().chain(map.iter().copied()).collect()
    } else {
        map.iter().copied().chain(rest.iter().copied()).collect()
    };
    // final_order[i] = original dst position of the entry at new position i.
    for i in 0..n {
        for j in (i + 1)..n {
            if final_order[i] > final_order[j] {
                let a = &dst.entries[final_order[i]].0;
                let b = &dst.entries[final_order[j]].0;
                if !provably_distinct(
                    &Type::LabelConst(a.clone()),
                    &Type::LabelConst(b.clone()),
                ) {
                    return None;
                }
            }
        }
    }
    Some(map)
}

/// Concrete combination. Simple: disjoint labels, result in canonical
/// (sorted) order. Scoped: concatenation, left entries first. Minimal: no
/// concrete combination rule.
pub fn combine_concrete(
    theory: Theory,
    env: &Env,
    left: &ConcreteRow,
    right: &ConcreteRow,
) -> Result<CombineEv, EntailError> {
    match theory.name {
        TheoryName::Minimal => Err(EntailError::Unsolved(
            "the minimal theory has no concrete combination rule".to_string(),
        )),
        TheoryName::Simple => {
            for (l, _) in &left.entries {
                if right.entries.iter().any(|(r, _)| r == l) {
                    return Err(EntailError::TheoryError(format!(
                        "simple-theory combination rejected: rows share the label '{}",
                        l.0
                    )));
                }
            }
            let mut entries: Vec<(Side, usize, Label, Type)> = Vec::new();
            for (i, (l, p)) in left.entries.iter().enumerate() {
                entries.push((Side::Left, i, l.clone(), p.clone()));
            }
            for (i, (l, p)) in right.entries.iter().enumerate() {
                entries.push((Side::Right, i, l.clone(), p.clone()));
            }
            entries.sort_by(|a, b| a.2.cmp(&b.2));
            let result = ConcreteRow::new(
                entries
                    .iter()
                    .map(|(_, _, l, p)| (l.clone(), normalize(theory, env, p)))
                    .collect(),
            );
            let split = entries.iter().map(|(s, i, _, _)| (*s, *i)).collect();
            Ok(CombineEv {
                left: left.clone(),
                right: right.clone(),
                result,
                split,
            })
        }
        TheoryName::Scoped => {
            let mut result = left.entries.clone();
            result.extend(right.entries.iter().cloned());
            let split = (0..left.arity())
                .map(|i| (Side::Left, i))
                .chain((0..right.arity()).map(|i| (Side::Right, i)))
                .collect();
            Ok(CombineEv {
                left: left.clone(),
                right: right.clone(),
                result: ConcreteRow::new(result),
                split,
            })
        }
    }
}

/// Adapts freshly combined evidence to a goal's written result row, which
/// may be any theory-equivalent permutation of the canonical result.
fn match_combine_result(
    theory: Theory,
    env: &Env,
    ev: &CombineEv,
    goal_result: &ConcreteRow,
) -> Option<CombineEv> {
    if ev.result == *goal_result {
        return Some(ev.clone());
    }
    let a: Vec<(Type, Type)> = ev
        .result
        .entries
        .iter()
        .map(|(l, p)| (Type::LabelConst(l.clone()), p.clone()))
        .collect();
    let b: Vec<(Type, Type)> = goal_result
        .entries
        .iter()
        .map(|(l, p)| (Type::LabelConst(l.clone()), p.clone()))
        .collect();
    // Map from canonical result indices to the goal's indices.
    let perm = match theory.name {
        TheoryName::Simple => {
            let mut perm = vec![0usize; a.len()];
            if a.len() != b.len() {
                return None;
            }
            for (i, (l, p)) in a.iter().enumerate() {
                let j = b.iter().position(|(bl, _)| equiv_normed(theory, bl, l))?;
                if !crate::equiv::type_equiv(theory, env, p, &b[j].1) {
                    return None;
                }
                perm[i] = j;
            }
            perm
        }
        _ => scoped_row_match(&a, &b, &mut |x, y| {
            crate::equiv::type_equiv(theory, env, x, y)
        })?,
    };
    let mut split = vec![(Side::Left, 0usize); ev.split.len()];
    for (i, s) in ev.split.iter().enumerate() {
        split[perm[i]] = *s;
    }
    Some(CombineEv {
        left: ev.left.clone(),
        right: ev.right.clone(),
        result: goal_result.clone(),
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Dir, PrimTy};

    fn int() -> Type {
        Type::Prim(PrimTy::Int)
    }

    fn bool_ty() -> Type {
        Type::Prim(PrimTy::Bool)
    }

    fn char_ish() -> Type {
        // A third distinct base type for the three-entry examples.
        Type::app(Type::Prim(PrimTy::List), Type::Prim(PrimTy::Bool))
    }

    fn xyz() -> ConcreteRow {
        ConcreteRow::new(vec![
            (Label("x".into()), int()),
            (Label("y".into()), bool_ty()),
            (Label("z".into()), char_ish()),
        ])
    }

    #[test]
    fn pick_selects_singleton() {
        let row = ConcreteRow::new(vec![
            (Label("x".into()), int()),
            (Label("y".into()), bool_ty()),
        ]);
        let picked = pick(&row, 1).unwrap();
        assert_eq!(picked.entries, vec![(Label("y".into()), bool_ty())]);
        let single = ConcreteRow::new(vec![(Label("x".into()), int())]);
        assert_eq!(pick(&single, 0).unwrap(), single);
        assert!(pick(&ConcreteRow::new(vec![]), 0).is_err());
    }

    #[test]
    fn delete_preserves_order() {
        let row = xyz();
        let rest = delete(&row, 1).unwrap();
        assert_eq!(
            rest.entries,
            vec![(Label("x".into()), int()), (Label("z".into()), char_ish())]
        );
        let single = ConcreteRow::new(vec![(Label("x".into()), int())]);
        assert_eq!(delete(&single, 0).unwrap().arity(), 0);
        assert!(delete(&ConcreteRow::new(vec![]), 0).is_err());
    }

    #[test]
    fn recombine_split_table() {
        let row = xyz();
        let ev = recombine(&row, 1).unwrap();
        assert_eq!(
            ev.split,
            vec![(Side::Right, 0), (Side::Left, 0), (Side::Right, 1)]
        );
        let single = ConcreteRow::new(vec![(Label("x".into()), int())]);
        let ev1 = recombine(&single, 0).unwrap();
        assert_eq!(ev1.split, vec![(Side::Left, 0)]);
        assert_eq!(ev1.right_arity(), 0);
        assert!(recombine(&row, 3).is_err());
    }

    #[test]
    fn recombine_always_validates() {
        let env = Env::new();
        for theory in [Theory::simple(), Theory::scoped(), Theory::minimal()] {
            let row = xyz();
            for i in 0..row.arity() {
                let ev = recombine(&row, i).unwrap();
                validate_combine(theory, &env, &ev)
                    .unwrap_or_else(|e| panic!("recombine({i}) invalid under {:?}: {e}", theory.name));
                // left_in then split is the identity on the cell.
                let li = ev.left_in();
                assert_eq!(ev.split[li.map[0]], (Side::Left, 0));
                assert_eq!(1 + (row.arity() - 1), row.arity());
            }
        }
    }

    #[test]
    fn row_equiv_per_theory() {
        let env = Env::new();
        let ab = ConcreteRow::new(vec![
            (Label("x".into()), int()),
            (Label("y".into()), bool_ty()),
        ]);
        let ba = ConcreteRow::new(vec![
            (Label("y".into()), bool_ty()),
            (Label("x".into()), int()),
        ]);
        assert!(Theory::simple().row_equiv(&env, &ab, &ba));
        let xx = ConcreteRow::new(vec![
            (Label("x".into()), int()),
            (Label("x".into()), bool_ty()),
        ]);
        let xx_swapped = ConcreteRow::new(vec![
            (Label("x".into()), bool_ty()),
            (Label("x".into()), int()),
        ]);
        assert!(!Theory::scoped().row_equiv(&env, &xx, &xx_swapped));
        let single = ConcreteRow::new(vec![(Label("x".into()), int())]);
        assert!(Theory::minimal().row_equiv(&env, &single, &single));
    }

    #[test]
    fn contain_validator_rejects_bad_maps() {
        let env = Env::new();
        let theory = Theory::simple();
        let src = ConcreteRow::new(vec![(Label("x".into()), int())]);
        let dst = ConcreteRow::new(vec![
            (Label("x".into()), int()),
            (Label("y".into()), bool_ty()),
        ]);
        let good = ContainEv {
            src: src.clone(),
            dst: dst.clone(),
            map: vec![0],
        };
        assert!(validate_contain(theory, &env, &good).is_ok());
        let wrong_label = ContainEv {
            src: src.clone(),
            dst: dst.clone(),
            map: vec![1],
        };
        assert!(validate_contain(theory, &env, &wrong_label).is_err());
        let out_of_range = ContainEv {
            src,
            dst,
            map: vec![5],
        };
        assert!(validate_contain(theory, &env, &out_of_range).is_err());
        // Non-injective.
        let two = ConcreteRow::new(vec![
            (Label("x".into()), int()),
            (Label("x".into()), int()),
        ]);
        let dup = ContainEv {
            src: two.clone(),
            dst: two,
            map: vec![0, 0],
        };
        assert!(validate_contain(Theory::scoped(), &env, &dup).is_err());
    }

    #[test]
    fn scoped_combination_keeps_left_first() {
        let env = Env::new();
        let left = ConcreteRow::new(vec![(Label("x".into()), int())]);
        let right = ConcreteRow::new(vec![(Label("x".into()), bool_ty())]);
        let ev = combine_concrete(Theory::scoped(), &env, &left, &right).unwrap();
        assert_eq!(
            ev.result.entries,
            vec![
                (Label("x".into()), int()),
                (Label("x".into()), bool_ty())
            ]
        );
        assert_eq!(ev.split, vec![(Side::Left, 0), (Side::Right, 0)]);
        validate_combine(Theory::scoped(), &env, &ev).unwrap();
    }

    #[test]
    fn simple_combination_sorts_canonically() {
        let env = Env::new();
        let left = ConcreteRow::new(vec![(Label("y".into()), bool_ty())]);
        let right = ConcreteRow::new(vec![(Label("x".into()), int())]);
        let ev = combine_concrete(Theory::simple(), &env, &left, &right).unwrap();
        assert_eq!(
            ev.result.entries,
            vec![
                (Label("x".into()), int()),
                (Label("y".into()), bool_ty())
            ]
        );
        // x came from the right, y from the left.
        assert_eq!(ev.split, vec![(Side::Right, 0), (Side::Left, 0)]);
        validate_combine(Theory::simple(), &env, &ev).unwrap();
    }

    #[test]
    fn canonical_sorting_commutes_with_entailment() {
        // Evidence computed on literal rows, post-composed with the sort
        // permutation, equals direct entailment on the canonically sorted
        // rows (which is the frame the runtime uses).
        let env = Env::new();
        let theory = Theory::simple();
        let left = ConcreteRow::new(vec![
            (Label("c".into()), int()),
            (Label("a".into()), bool_ty()),
        ]);
        let right = ConcreteRow::new(vec![(Label("b".into()), int())]);
        let literal_ev = combine_concrete(theory, &env, &left, &right).unwrap();
        // The sort permutation of the left row: literal index → sorted index.
        let mut sorted_left = left.entries.clone();
        sorted_left.sort_by(|a, b| a.0.cmp(&b.0));
        let perm: Vec<usize> = left
            .entries
            .iter()
            .map(|e| sorted_left.iter().position(|s| s == e).unwrap())
            .collect();
        let composed: Vec<(Side, usize)> = literal_ev
            .split
            .iter()
            .map(|(s, j)| match s {
                Side::Left => (Side::Left, perm[*j]),
                Side::Right => (Side::Right, *j),
            })
            .collect();
        let goal = Pred::Combine(
            left.as_row_type(),
            right.as_row_type(),
            literal_ev.result.as_row_type(),
        );
        let direct = entail(theory, &env, &[], &goal, DEFAULT_DEPTH).unwrap();
        match direct {
            Ev::Combine(direct) => assert_eq!(direct.split, composed),
            other => panic!("unexpected evidence {other:?}"),
        }
    }

    #[test]
    fn row_skeletons() {
        let mut env = Env::new();
        env.push_ty("z", Kind::row(Kind::ty()));
        let lit = Type::row(vec![(Type::label("x"), int())]);
        assert_eq!(
            row_skeleton(Theory::simple(), &env, &lit).unwrap(),
            RowSkel::Concrete(1)
        );
        assert_eq!(
            row_skeleton(Theory::simple(), &env, &Type::var("z")).unwrap(),
            RowSkel::Var("z".into())
        );
        let mapped = crate::equiv::normalize(
            Theory::simple(),
            &env,
            &Type::arrow(Type::var("z"), int()),
        );
        assert_eq!(
            row_skeleton(Theory::simple(), &env, &mapped).unwrap(),
            RowSkel::Var("z".into())
        );
    }
}
