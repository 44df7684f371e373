//! Transfer of models from the set-aware theory to plain Dolev-Yao.
//!
//! A system without ACI sets is called standard. Its models in the set-aware theory are
//! turned into plain models by [`delta`], which rewrites every set `t1 . ... . tn` into the
//! right-nested pairing `pair(t1, pair(t2, ... tn))`.

use std::collections::HashMap;

use crate::constraint::ConstraintSystem;
use crate::deduction::{check_model, Theory};
use crate::solver::{solve, Outcome, Solution, SolveError, SolverConfig};
use crate::term::{Term, TermKind};

/// True when no term of the system contains an ACI set.
pub fn is_standard(system: &ConstraintSystem) -> bool {
    !system.has_aci()
}

/// Replace sets by right-nested pairs, bottom-up.
pub fn delta(t: &Term) -> Term {
    let mut memo = HashMap::new();
    delta_memo(t, &mut memo)
}

fn delta_memo(t: &Term, memo: &mut HashMap<u64, Term>) -> Term {
    if !t.has_aci() {
        return t.clone();
    }
    if let Some(done) = memo.get(&t.id()) {
        return done.clone();
    }
    let out = match t.kind() {
        TermKind::Atom(_) | TermKind::Var(_) | TermKind::Priv(_) => t.clone(),
        TermKind::Bin(op, a, b) => {
            let (a, b) = (delta_memo(a, memo), delta_memo(b, memo));
            Term::bin(*op, a, b).expect("keys contain no sets")
        }
        TermKind::Aci(items) => {
            let mut parts: Vec<Term> = items.iter().map(|i| delta_memo(i, memo)).collect();
            let mut acc = parts.pop().unwrap();
            while let Some(p) = parts.pop() {
                acc = Term::pair(p, acc);
            }
            acc
        }
    };
    memo.insert(t.id(), out.clone());
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ProjectionError {
    #[error("system is not standard: it contains an ACI set")]
    NotStandard,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Solve a standard system in plain Dolev-Yao through the set-aware solver. A model is
/// projected with [`delta`] and re-checked under plain Dolev-Yao before it is returned.
pub fn solve_dy(
    system: &ConstraintSystem,
    config: &SolverConfig,
) -> Result<Solution, ProjectionError> {
    if !is_standard(system) {
        return Err(ProjectionError::NotStandard);
    }
    let mut sol = solve(system, config)?;
    if let Outcome::Sat(sigma) = &sol.outcome {
        let projected = sigma.map_values(delta);
        let ok = check_model(system, &projected, Theory::Dy).map_err(SolveError::from)?;
        if !ok {
            return Err(SolveError::Internal(format!(
                "projected model {projected} fails under plain Dolev-Yao"
            ))
            .into());
        }
        sol.outcome = Outcome::Sat(projected);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;
    use crate::term::normalize;

    #[test]
    fn delta_right_nests() {
        let t = normalize(&parse_term("{c . a . b}").unwrap());
        assert_eq!(delta(&t).to_string(), "pair(a, pair(b, c))");
        let t = parse_term("senc({a . b}, k)").unwrap();
        assert_eq!(delta(&t).to_string(), "senc(pair(a, b), k)");
        let plain = parse_term("pair(a, X)").unwrap();
        assert_eq!(delta(&plain), plain);
    }

    #[test]
    fn standard_systems() {
        let s = ConstraintSystem::parse("senc(X, a), pair(c, a) |> b\npair(X, c) |> a").unwrap();
        assert!(is_standard(&s));
        let sol = solve_dy(&s, &SolverConfig::default()).unwrap();
        let m = sol.outcome.model().unwrap();
        assert!(!m.get("X").unwrap().has_aci());
        assert!(check_model(&s, m, Theory::Dy).unwrap());
        let s = ConstraintSystem::parse("{X . c} |> a").unwrap();
        assert!(matches!(
            solve_dy(&s, &SolverConfig::default()),
            Err(ProjectionError::NotStandard)
        ));
    }
}
