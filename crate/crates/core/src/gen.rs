//! Random terms, deduction instances and constraint systems for property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constraint::{Constraint, ConstraintSystem};
use crate::deduction::Theory;
use crate::term::{dag_size_of, normalize, BinOp, Term};

/// Shape parameters for random terms.
#[derive(Debug, Clone)]
pub struct TermGen {
    pub atoms: Vec<Term>,
    pub vars: Vec<Term>,
    pub theory: Theory,
    /// Maximum nesting depth.
    pub depth: usize,
}

impl TermGen {
    pub fn new(atoms: &[&str], vars: &[&str], theory: Theory, depth: usize) -> Self {
        TermGen {
            atoms: atoms.iter().map(|a| Term::atom(a)).collect(),
            vars: vars.iter().map(|v| Term::var(v)).collect(),
            theory,
            depth,
        }
    }

    fn leaf<R: Rng>(&self, rng: &mut R) -> Term {
        if !self.vars.is_empty() && rng.gen_bool(0.3) {
            self.vars.choose(rng).unwrap().clone()
        } else {
            self.atoms.choose(rng).unwrap().clone()
        }
    }

    /// A random term, not necessarily normalized.
    pub fn term<R: Rng>(&self, rng: &mut R) -> Term {
        self.term_at(rng, self.depth)
    }

    fn term_at<R: Rng>(&self, rng: &mut R, depth: usize) -> Term {
        if depth == 0 || rng.gen_bool(0.35) {
            return self.leaf(rng);
        }
        let kinds = if self.theory == Theory::DyAci { 6 } else { 5 };
        match rng.gen_range(0..kinds) {
            0 => Term::pair(self.term_at(rng, depth - 1), self.term_at(rng, depth - 1)),
            1 => Term::senc(self.term_at(rng, depth - 1), self.term_at(rng, depth - 1)),
            2 => Term::bin(BinOp::AEnc, self.term_at(rng, depth - 1), self.leaf(rng)).unwrap(),
            3 => Term::sig(
                self.term_at(rng, depth - 1),
                Term::private(self.leaf(rng)).unwrap(),
            )
            .unwrap(),
            4 => Term::private(self.leaf(rng)).unwrap(),
            _ => {
                let n = rng.gen_range(1..=3);
                Term::aci((0..n).map(|_| self.term_at(rng, depth - 1)).collect()).unwrap()
            }
        }
    }
}

/// A ground deduction instance `(E, t)`, normalized, whose DAG size is at most `max_size`.
pub fn deduction_instance<R: Rng>(
    rng: &mut R,
    atoms: &[&str],
    theory: Theory,
    max_size: usize,
) -> (Vec<Term>, Term) {
    let g = TermGen::new(atoms, &[], theory, 3);
    loop {
        let n = rng.gen_range(1..=3);
        let e: Vec<Term> = (0..n).map(|_| normalize(&g.term(rng))).collect();
        // targets are often built from pieces of the knowledge
        let t = if rng.gen_bool(0.5) {
            let pieces: Vec<Term> = crate::term::quasi_subterms_of(&e).into_iter().collect();
            let a = pieces.choose(rng).unwrap().clone();
            match rng.gen_range(0..3) {
                0 => a,
                1 => normalize(&Term::pair(a, pieces.choose(rng).unwrap().clone())),
                _ if theory == Theory::DyAci => {
                    normalize(&Term::aci(vec![a, pieces.choose(rng).unwrap().clone()]).unwrap())
                }
                _ => normalize(&Term::senc(a, pieces.choose(rng).unwrap().clone())),
            }
        } else {
            normalize(&g.term(rng))
        };
        if dag_size_of(e.iter().chain(std::iter::once(&t))) <= max_size {
            return (e, t);
        }
    }
}

/// A normalized constraint system with at most `max_constraints` constraints over the
/// given atoms and variables, with DAG size at most `max_size` and at least one variable.
pub fn constraint_system<R: Rng>(
    rng: &mut R,
    atoms: &[&str],
    vars: &[&str],
    theory: Theory,
    max_constraints: usize,
    max_size: usize,
) -> ConstraintSystem {
    let g = TermGen::new(atoms, vars, theory, 2);
    loop {
        let n = rng.gen_range(1..=max_constraints);
        let mut cs = Vec::new();
        for _ in 0..n {
            let k = rng.gen_range(1..=2);
            let knowledge: Vec<Term> = (0..k).map(|_| normalize(&g.term(rng))).collect();
            let target = normalize(&g.term(rng));
            cs.push(Constraint::new(knowledge, target));
        }
        let s = ConstraintSystem::new(cs);
        if !s.vars().is_empty() && s.dag_size() <= max_size {
            return s;
        }
    }
}
