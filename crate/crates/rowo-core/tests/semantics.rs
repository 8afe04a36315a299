//! Behavioral invariants of the label-erased semantics.

mod support;

#[path = "support/semantics.rs"]
mod engines;

#[test]
fn duality_roundtrip_exhaustive() {
    let cases = engines::duality_roundtrip().unwrap();
    assert!(cases > 100, "too few cases: {cases}");
}

#[test]
fn equality_matches_structural_oracle() {
    let cases = engines::eq_matches_structural_oracle().unwrap();
    assert!(cases > 1000, "too few cases: {cases}");
}

#[test]
fn fmap_identity_and_composition() {
    let cases = engines::fmap_laws(250, 0xfab).unwrap();
    assert_eq!(cases, 1000);
}

#[test]
fn map_length_example_matches_oracle() {
    let cases = engines::maps_length_oracle().unwrap();
    assert!(cases > 10);
}

#[test]
fn rapply_matches_fieldwise_oracle() {
    let cases = engines::rapply_oracle().unwrap();
    assert!(cases > 50);
}

#[test]
fn label_erasure_under_renaming() {
    let cases = engines::label_erasure(10, 0xe1a).unwrap();
    assert!(cases > 100, "too few cases: {cases}");
}
