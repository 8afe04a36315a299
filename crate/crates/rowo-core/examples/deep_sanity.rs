//! One-off deeper escalation of the committed oracles.
#[path = "../tests/support/mod.rs"]
mod support;
use support::*;
use rowo_core::rows::{Theory, ConcreteRow, solve_contain_concrete, combine_concrete, validate_contain, validate_combine, EntailError};
use rowo_core::ast::{Env, Dir, Label, Type, PrimTy};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    // Deeper universe for the equivalence oracle.
    let u = Universe::build(5);
    let mut closure = Closure::saturate(&u);
    let theory = Theory::simple();
    let norms: Vec<String> = u.types.iter()
        .map(|t| format!("{:?}", rowo_core::equiv::normalize(theory, &u.env, t)))
        .collect();
    let mut cc_to_norm: std::collections::HashMap<usize, &str> = Default::default();
    let mut norm_to_cc: std::collections::HashMap<&str, usize> = Default::default();
    let mut bad = 0;
    for i in 0..u.types.len() {
        let cc = closure.find(i);
        let nk = norms[i].as_str();
        match cc_to_norm.get(&cc) { None => { cc_to_norm.insert(cc, nk); } Some(p) if *p == nk => {} Some(_) => bad += 1 }
        match norm_to_cc.get(nk) { None => { norm_to_cc.insert(nk, cc); } Some(p) if *p == cc => {} Some(_) => bad += 1 }
    }
    println!("depth-5 universe: {} types, {} disagreements", u.types.len(), bad);
    assert_eq!(bad, 0);

    // 50k randomized entailment goals over the full 5-label, 3-type space.
    let env = Env::new();
    let mut rng = StdRng::seed_from_u64(0xdeeb);
    let labels: Vec<Label> = (0..5).map(|i| Label(format!("l{i}"))).collect();
    let types = [Type::Prim(PrimTy::Int), Type::Prim(PrimTy::Bool),
                 Type::app(Type::Prim(PrimTy::List), Type::Prim(PrimTy::Int))];
    let random_row = |rng: &mut StdRng| {
        let arity = rng.gen_range(0..=5usize);
        let mut picked: Vec<usize> = (0..5).collect();
        for i in (1..picked.len()).rev() { let j = rng.gen_range(0..=i); picked.swap(i, j); }
        ConcreteRow::new(picked.into_iter().take(arity)
            .map(|i| (labels[i].clone(), types[rng.gen_range(0..3)].clone())).collect())
    };
    let mut agree = 0u64;
    for _ in 0..50_000 {
        let a = random_row(&mut rng);
        let b = random_row(&mut rng);
        let solver = solve_contain_concrete(Theory::simple(), &env, Dir::L, &a, &b);
        let oracle = oracle_contain_simple(&env, &a, &b);
        match (&solver, &oracle) {
            (None, None) => {}
            (Some(ev), Some(_)) => validate_contain(Theory::simple(), &env, ev).unwrap(),
            _ => panic!("contain disagreement: {:?} {:?}", a.entries, b.entries),
        }
        match combine_concrete(Theory::simple(), &env, &a, &b) {
            Ok(ev) => {
                validate_combine(Theory::simple(), &env, &ev).unwrap();
                assert!(oracle_combine_simple(&env, &a, &b, &ev.result));
            }
            Err(EntailError::TheoryError(_)) => {
                assert!(a.entries.iter().any(|(l, _)| b.entries.iter().any(|(r, _)| r == l)));
            }
            Err(e) => panic!("{e}"),
        }
        agree += 2;
    }
    println!("randomized entailment: {agree} goals, all agree");
}
