//! Intruder deduction and constraint solving for Dolev-Yao messages extended with an
//! associative, commutative, idempotent set constructor.
//!
//! The crate is organised bottom-up:
//!
//! - [`term`], [`parse`], [`subst`]: hash-consed terms, concrete syntax, substitutions.
//! - [`deduction`]: ground derivability, model checking and a reference closure.
//! - [`solver`]: satisfiability of general constraint systems with certificates.
//! - [`projection`]: the bridge between the set-aware and the plain Dolev-Yao theory.
//! - [`protocol`]: symbolic execution of protocol sessions and attack search.

pub mod constraint;
pub mod deduction;
pub mod enumerate;
pub mod gen;
pub mod parse;
pub mod projection;
pub mod protocol;
pub mod selftest;
pub mod solver;
pub mod subst;
pub mod term;

pub use constraint::{Constraint, ConstraintSystem};
pub use deduction::{check_model, derivable, Theory};
pub use parse::{parse_term, ParseError};
pub use solver::{solve, verify_certificate, Outcome, SolverConfig};
pub use subst::Substitution;
pub use term::{normalize, Name, Term, TermKind};
