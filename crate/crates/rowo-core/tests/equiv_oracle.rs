//! The equivalence decision procedure against a saturated declarative-rule
//! oracle on an enumerated type universe.

mod support;

use rowo_core::equiv::normalize;
use rowo_core::rows::Theory;
use support::{Closure, Universe};

#[test]
fn type_equiv_agrees_with_saturated_closure() {
    let u = Universe::build(4);
    assert!(u.types.len() > 200, "universe too small: {}", u.types.len());
    let mut closure = Closure::saturate(&u);
    // Group by normal form; the partitions must coincide.
    let theory = Theory::simple();
    let norm_keys: Vec<String> = u
        .types
        .iter()
        .map(|t| format!("{:?}", normalize(theory, &u.env, t)))
        .collect();
    let mut cc_to_norm: std::collections::HashMap<usize, String> = Default::default();
    let mut norm_to_cc: std::collections::HashMap<String, usize> = Default::default();
    let mut mismatches = 0;
    for i in 0..u.types.len() {
        let cc = closure.find(i);
        let nk = &norm_keys[i];
        match cc_to_norm.get(&cc) {
            None => {
                cc_to_norm.insert(cc, nk.clone());
            }
            Some(prev) if prev == nk => {}
            Some(prev) => {
                mismatches += 1;
                if mismatches < 5 {
                    eprintln!(
                        "closure identifies two normal forms:\n  {:?}\n  prev NF {prev}\n  this NF {nk}",
                        u.types[i]
                    );
                }
            }
        }
        match norm_to_cc.get(nk) {
            None => {
                norm_to_cc.insert(nk.clone(), cc);
            }
            Some(prev) if *prev == cc => {}
            Some(_) => {
                mismatches += 1;
                if mismatches < 5 {
                    eprintln!(
                        "normalization identifies two closure classes: {:?} (NF {nk})",
                        u.types[i]
                    );
                }
            }
        }
    }
    assert_eq!(
        mismatches, 0,
        "type_equiv disagrees with the saturated oracle on {} of {} types",
        mismatches,
        u.types.len()
    );
}
