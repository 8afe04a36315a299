//! Shared test machinery: an enumerated type universe with a saturated
//! declarative-equivalence oracle, and a brute-force entailment oracle over
//! concrete rows. Both are independent of the normalization/solver paths
//! they check.

#![allow(dead_code)]

use std::collections::HashMap;

use rowo_core::ast::{Env, Kind, Label, PrimTy, Type};
use rowo_core::rows::{ConcreteRow, Theory};

// ---------------------------------------------------------------------------
// Universe enumeration for the equivalence oracle
// ---------------------------------------------------------------------------

/// The enumerated universe: types of bounded depth over two base types, two
/// labels, and one rigid constructor variable `F`, closed under one-step
/// declarative rewrites so the congruence closure can see every axiom
/// instance.
pub struct Universe {
    pub types: Vec<Type>,
    pub env: Env,
    index: HashMap<String, usize>,
}

fn key(t: &Type) -> String {
    format!("{t:?}")
}

impl Universe {
    pub fn build(depth: usize) -> Universe {
        let mut env = Env::new();
        env.push_ty("F", Kind::arrow(Kind::ty(), Kind::ty()));
        let mut u = Universe {
            types: Vec::new(),
            env,
            index: HashMap::new(),
        };
        let current: Vec<Type> = vec![Type::Prim(PrimTy::Int), Type::Prim(PrimTy::Bool)];
        for t in &current {
            u.insert(t.clone());
        }
        let labels = [Label("l1".to_string()), Label("l2".to_string())];
        for _ in 0..depth {
            let snapshot = u.types.clone();
            let mut next: Vec<Type> = Vec::new();
            for t in &snapshot {
                let k = match rowo_core::kinds::kind_of(Theory::simple(), &u.env, t) {
                    Ok(k) => k,
                    Err(_) => continue,
                };
                // Apply the constructor to base-kinded types.
                if k == Kind::ty() {
                    next.push(Type::app(Type::var("F"), t.clone()));
                    for l in &labels {
                        next.push(Type::labeled(Type::LabelConst(l.clone()), t.clone()));
                        next.push(Type::RowLit(
                            vec![(Type::LabelConst(l.clone()), t.clone())],
                            Kind::ty(),
                        ));
                    }
                }
                if let Kind::Row(_) = k {
                    next.push(Type::pi(t.clone()));
                    next.push(Type::sigma(t.clone()));
                }
                // Rows of constructors enable the lifting rules.
                if k == Kind::arrow(Kind::ty(), Kind::ty()) {
                    for l in &labels {
                        next.push(Type::RowLit(
                            vec![(Type::LabelConst(l.clone()), t.clone())],
                            Kind::ty(),
                        ));
                    }
                }
            }
            // Two-entry rows with distinct labels from same-kind singletons.
            for a in &snapshot {
                for b in &snapshot {
                    if let (Type::RowLit(ea, _), Type::RowLit(eb, _)) = (a, b) {
                        if ea.len() == 1 && eb.len() == 1 && ea[0].0 != eb[0].0 {
                            let ka = rowo_core::kinds::kind_of(Theory::simple(), &u.env, &ea[0].1);
                            let kb = rowo_core::kinds::kind_of(Theory::simple(), &u.env, &eb[0].1);
                            if let (Ok(ka), Ok(kb)) = (ka, kb) {
                                if ka == kb {
                                    next.push(Type::RowLit(
                                        vec![ea[0].clone(), eb[0].clone()],
                                        Kind::ty(),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            // Applications of rows / row constructors to arguments.
            for f in &snapshot {
                let kf = match rowo_core::kinds::kind_of(Theory::simple(), &u.env, f) {
                    Ok(k) => k,
                    Err(_) => continue,
                };
                for a in &snapshot {
                    let ka = match rowo_core::kinds::kind_of(Theory::simple(), &u.env, a) {
                        Ok(k) => k,
                        Err(_) => continue,
                    };
                    let applies = match &kf {
                        Kind::Arrow(d, _) => ka.same_erased(d) || ka == Kind::row((**d).clone()),
                        Kind::Row(inner) => {
                            matches!(inner.as_ref(), Kind::Arrow(d, _) if ka.same_erased(d))
                        }
                        _ => false,
                    };
                    if applies {
                        next.push(Type::app(f.clone(), a.clone()));
                    }
                }
            }
            for t in next {
                if u.types.len() >= 4000 {
                    break;
                }
                u.insert(t);
            }
        }
        // Close under one-step rewrites so every axiom instance lands inside.
        loop {
            let mut added = false;
            let snapshot = u.types.clone();
            for t in &snapshot {
                for r in declarative_rewrites(t) {
                    if u.insert(r) {
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        u
    }

    fn insert(&mut self, t: Type) -> bool {
        let k = key(&t);
        if self.index.contains_key(&k) {
            return false;
        }
        self.index.insert(k, self.types.len());
        self.types.push(t);
        true
    }

    pub fn lookup(&self, t: &Type) -> Option<usize> {
        self.index.get(&key(t)).copied()
    }
}

/// One-step rewrites of the declarative equivalence rules (both axiom
/// directions are covered by uniting the classes).
pub fn declarative_rewrites(t: &Type) -> Vec<Type> {
    let mut out = Vec::new();
    match t {
        Type::App(f, a) => {
            match f.as_ref() {
                // e-lift₁: <ξ |> φ> τ ≡ <ξ |> φ τ>, entrywise.
                Type::RowLit(entries, hint) => {
                    out.push(Type::RowLit(
                        entries
                            .iter()
                            .map(|(l, p)| (l.clone(), Type::app(p.clone(), (**a).clone())))
                            .collect(),
                        hint.clone(),
                    ));
                }
                // e-lift₃: (K ρ) τ ≡ K (ρ τ).
                Type::Pi(r) => out.push(Type::pi(Type::app((**r).clone(), (**a).clone()))),
                Type::SigmaV(r) => out.push(Type::sigma(Type::app((**r).clone(), (**a).clone()))),
                _ => {}
            }
            // e-lift₂: φ <ξ |> τ> ≡ <ξ |> φ τ>, entrywise, when the argument
            // is a row literal.
            if let Type::RowLit(entries, hint) = a.as_ref() {
                out.push(Type::RowLit(
                    entries
                        .iter()
                        .map(|(l, p)| (l.clone(), Type::app((**f).clone(), p.clone())))
                        .collect(),
                    hint.clone(),
                ));
            }
        }
        // e-sing: K <ξ |> τ> ≡ ξ |> τ.
        Type::Pi(r) | Type::SigmaV(r) => {
            if let Type::RowLit(entries, _) = r.as_ref() {
                if entries.len() == 1 {
                    out.push(Type::labeled(entries[0].0.clone(), entries[0].1.clone()));
                }
            }
        }
        // e-srow: permutations (two-entry rows: the swap).
        Type::RowLit(entries, hint) => {
            if entries.len() == 2 {
                out.push(Type::RowLit(
                    vec![entries[1].clone(), entries[0].clone()],
                    hint.clone(),
                ));
            }
        }
        _ => {}
    }
    out
}

/// Union-find with congruence closure over the universe.
pub struct Closure {
    parent: Vec<usize>,
}

impl Closure {
    pub fn saturate(u: &Universe) -> Closure {
        let mut c = Closure {
            parent: (0..u.types.len()).collect(),
        };
        // Axiom edges.
        for (i, t) in u.types.iter().enumerate() {
            for r in declarative_rewrites(t) {
                if let Some(j) = u.lookup(&r) {
                    c.union(i, j);
                }
            }
        }
        // Congruence: same constructor with equivalent components.
        loop {
            let mut changed = false;
            for i in 0..u.types.len() {
                for j in (i + 1)..u.types.len() {
                    if c.find(i) == c.find(j) {
                        continue;
                    }
                    if c.congruent(u, &u.types[i], &u.types[j]) {
                        c.union(i, j);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        c
    }

    fn congruent(&mut self, u: &Universe, a: &Type, b: &Type) -> bool {
        let mut sub = |x: &Type, y: &Type| -> bool {
            if x == y {
                return true;
            }
            match (u.lookup(x), u.lookup(y)) {
                (Some(i), Some(j)) => self.find(i) == self.find(j),
                _ => x == y,
            }
        };
        match (a, b) {
            (Type::App(f1, a1), Type::App(f2, a2)) => sub(f1, f2) && sub(a1, a2),
            (Type::Pi(r1), Type::Pi(r2)) | (Type::SigmaV(r1), Type::SigmaV(r2)) => sub(r1, r2),
            (Type::Labeled(l1, p1), Type::Labeled(l2, p2)) => l1 == l2 && sub(p1, p2),
            (Type::RowLit(e1, _), Type::RowLit(e2, _)) => {
                e1.len() == e2.len()
                    && e1
                        .iter()
                        .zip(e2)
                        .all(|((l1, p1), (l2, p2))| l1 == l2 && sub(p1, p2))
            }
            (Type::Sing(a1), Type::Sing(a2)) => sub(a1, a2),
            _ => false,
        }
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force entailment oracle over concrete rows
// ---------------------------------------------------------------------------

/// All injective maps from `0..m` into `0..n`.
pub fn injective_maps(m: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(m: usize, n: usize, used: &mut Vec<bool>, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == m {
            out.push(acc.clone());
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                acc.push(j);
                go(m, n, used, acc, out);
                acc.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(m, n, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}

/// Brute-force simple-theory containment: some injective map matches every
/// entry's label and type.
pub fn oracle_contain_simple(env: &Env, src: &ConcreteRow, dst: &ConcreteRow) -> Option<Vec<usize>> {
    let theory = Theory::simple();
    for map in injective_maps(src.arity(), dst.arity()) {
        let ok = map.iter().enumerate().all(|(i, &j)| {
            src.entries[i].0 == dst.entries[j].0
                && rowo_core::equiv::type_equiv(theory, env, &src.entries[i].1, &dst.entries[j].1)
        });
        if ok {
            return Some(map);
        }
    }
    None
}

/// Brute-force simple-theory combination: satisfiable iff the label sets are
/// disjoint; the result is then the merge, unique up to permutation.
pub fn oracle_combine_simple(
    env: &Env,
    left: &ConcreteRow,
    right: &ConcreteRow,
    result: &ConcreteRow,
) -> bool {
    let theory = Theory::simple();
    if left.arity() + right.arity() != result.arity() {
        return false;
    }
    for (l, _) in &left.entries {
        if right.entries.iter().any(|(r, _)| r == l) {
            return false;
        }
    }
    // Every result entry must be matched exactly once by one of the sides.
    let mut used = vec![false; result.arity()];
    for (l, p) in left.entries.iter().chain(&right.entries) {
        let mut found = false;
        for (k, (rl, rp)) in result.entries.iter().enumerate() {
            if !used[k] && rl == l && rowo_core::equiv::type_equiv(theory, env, rp, p) {
                used[k] = true;
                found = true;
                break;
            }
        }
        if !found {
            return false;
        }
    }
    used.into_iter().all(|b| b)
}
