//! A typechecker and interpreter for a System F-omega core calculus with row
//! types, first-class labels, qualified types over row predicates, and
//! label-generic record/variant combinators.
//!
//! The calculus is parameterized by a row theory (minimal, simple, or scoped)
//! that fixes which concrete rows exist, when rows are equivalent, and how the
//! containment and combination predicates are entailed. Evaluation is
//! label-erased: records are dense arrays, variants are tagged values, and
//! the only runtime residue of a row type is its arity.

pub mod ast;
pub mod equiv;
pub mod eval;
pub mod kinds;
pub mod rows;
pub mod surface;
pub mod typecheck;

pub use ast::{Dir, Env, Kind, Label, Pred, Term, Type};
pub use rows::Theory;
pub use surface::{Mode, Program};
