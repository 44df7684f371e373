//! Seeded randomized cross-checks, usable from the command line.

use std::collections::BTreeSet;
use std::fmt;

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::deduction::{check_model, closure_oracle, derivable, Theory};
use crate::gen::{constraint_system, deduction_instance, TermGen};
use crate::projection::{delta, is_standard};
use crate::solver::{brute_solve, solve, Outcome, SolverConfig};
use crate::term::{dag_size, elems, normalize, quasi_subterms, subterms, Term};

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok" } else { "FAILED" };
        write!(f, "{:<28} {:>5} cases  {status}", self.name, self.cases)?;
        for m in self.failures.iter().take(3) {
            write!(f, "\n    {m}")?;
        }
        Ok(())
    }
}

fn check(
    name: &'static str,
    cases: usize,
    mut f: impl FnMut(usize) -> Option<String>,
) -> CheckReport {
    let failures = (0..cases).filter_map(&mut f).collect();
    CheckReport {
        name,
        cases,
        failures,
    }
}

/// Run every suite with `cases` instances each, derived from `seed`.
pub fn run(seed: u64, cases: usize) -> Vec<CheckReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let gen = TermGen::new(&["a", "b", "c"], &["X", "Y"], Theory::DyAci, 4);
    let mut out = Vec::new();

    out.push(check("normalize idempotent", cases, |_| {
        let t = gen.term(&mut rng);
        let n = normalize(&t);
        (normalize(&n) != n || !n.is_normalized()).then(|| format!("{t}"))
    }));
    out.push(check("elems and normalize", cases, |_| {
        let t = gen.term(&mut rng);
        let rhs: BTreeSet<Term> = elems(&t).iter().map(normalize).collect();
        (elems(&normalize(&t)) != rhs).then(|| format!("{t}"))
    }));
    out.push(check("subterm containment", cases, |_| {
        let t = normalize(&gen.term(&mut rng));
        let (e, q, s) = (elems(&t), quasi_subterms(&t), subterms(&t));
        let ok = e.is_subset(&q) && q.is_subset(&s) && dag_size(&t) == s.len();
        (!ok).then(|| format!("{t}"))
    }));
    for theory in [Theory::Dy, Theory::DyAci] {
        let name = if theory == Theory::Dy {
            "derive vs oracle (dy)"
        } else {
            "derive vs oracle (dyaci)"
        };
        out.push(check(name, cases, |_| {
            let (e, t) = deduction_instance(&mut rng, &["a", "b", "c"], theory, 8);
            let fast = derivable(&e, &t, theory).ok()?;
            let slow = closure_oracle(&e, std::slice::from_ref(&t), 3, theory).contains(&t);
            (fast != slow).then(|| format!("{e:?} |> {t}: {fast} vs {slow}"))
        }));
    }
    let quick = SolverConfig::default();
    out.push(check("solve vs brute force", cases.min(200), |_| {
        let s = constraint_system(&mut rng, &["a", "b"], &["X", "Y"], Theory::DyAci, 2, 4);
        let fast = solve(&s, &quick).ok()?;
        let slow = brute_solve(&s, 4, Theory::DyAci, &quick).ok()?;
        match (&fast.outcome, &slow.outcome) {
            (Outcome::Indeterminate(_), _) | (_, Outcome::Indeterminate(_)) => None,
            (Outcome::Unsat, Outcome::Sat(m)) => Some(format!("{s}: unsat but {m}")),
            (Outcome::Sat(m), _) if !check_model(&s, m, Theory::DyAci).unwrap_or(false) => {
                Some(format!("{s}: bad model {m}"))
            }
            _ => None,
        }
    }));
    out.push(check("projection to plain", cases.min(200), |_| {
        let s = constraint_system(&mut rng, &["a", "b", "c"], &["X", "Y"], Theory::Dy, 2, 6);
        if !is_standard(&s) {
            return None;
        }
        let sol = solve(&s, &quick).ok()?;
        let m = sol.outcome.model()?.map_values(delta);
        (!check_model(&s, &m, Theory::Dy).unwrap_or(false)).then(|| format!("{s}: {m}"))
    }));
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn small_run_is_clean() {
        for r in super::run(3, 40) {
            assert!(r.passed(), "{r}");
        }
    }
}
