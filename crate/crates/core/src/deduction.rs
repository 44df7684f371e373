//! Ground intruder deduction.
//!
//! [`derivable`] saturates the subterm set of the knowledge and the target, moving terms
//! from the pending set `S` to the derived set `D` until nothing applies. Each round
//! tries, in order: a Dolev-Yao rule producing a pending term, an ACI composition whose
//! elements are all derived, and the decomposition of a derived ACI set.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use log::warn;
use thiserror::Error;

use crate::constraint::{Constraint, ConstraintSystem};
use crate::enumerate::ground_terms;
use crate::subst::Substitution;
use crate::term::{elems, normalize, quasi_subterms_of, BinOp, Term, TermError, TermKind};

/// Deduction theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Theory {
    /// Plain Dolev-Yao; terms must not contain ACI sets.
    Dy,
    /// Dolev-Yao with the ACI set constructor.
    #[default]
    DyAci,
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theory::Dy => "dy",
            Theory::DyAci => "dyaci",
        })
    }
}

impl FromStr for Theory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dy" => Ok(Theory::Dy),
            "dyaci" => Ok(Theory::DyAci),
            _ => Err(format!("unknown theory `{s}` (expected dy or dyaci)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeductionError {
    #[error("term `{0}` is not ground")]
    NonGround(String),
    #[error("term `{0}` uses an ACI set, which plain Dolev-Yao does not allow")]
    AciUnderDy(String),
    #[error("term `{0}` is not normalized")]
    NotNormalized(String),
    #[error("variable `{0}` has no binding")]
    MissingBinding(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Input handling options.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeriveOptions {
    pub theory: Theory,
    /// Reject unnormalized input instead of normalizing it with a warning.
    pub strict: bool,
}

impl DeriveOptions {
    pub fn new(theory: Theory) -> Self {
        DeriveOptions {
            theory,
            strict: false,
        }
    }
}

/// Result of a saturation run.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub derivable: bool,
    /// Elementary operations: membership tests and set moves.
    pub ops: u64,
    /// Number of terms in the saturated universe `sub(E u {t})`.
    pub universe: usize,
    /// Loop rounds that changed the derived set.
    pub rounds: usize,
    /// The final derived set.
    pub derived: BTreeSet<Term>,
}

/// Decide `E |- t` for ground terms.
pub fn derivable(
    knowledge: &[Term],
    target: &Term,
    theory: Theory,
) -> Result<bool, DeductionError> {
    Ok(saturate(knowledge, target, DeriveOptions::new(theory))?.derivable)
}

/// Run the saturation and report statistics.
pub fn saturate(
    knowledge: &[Term],
    target: &Term,
    options: DeriveOptions,
) -> Result<Derivation, DeductionError> {
    let mut terms: Vec<Term> = Vec::with_capacity(knowledge.len() + 1);
    for t in knowledge.iter().chain(std::iter::once(target)) {
        terms.push(prepare(t, options)?);
    }
    let target = terms.pop().unwrap();
    Ok(Saturation::new(&terms, &target, options.theory).run())
}

/// All terms of `sub(E)` derivable from `E`.
pub fn derivable_subterms(
    knowledge: &[Term],
    theory: Theory,
) -> Result<BTreeSet<Term>, DeductionError> {
    let mut terms = Vec::with_capacity(knowledge.len());
    for t in knowledge {
        terms.push(prepare(t, DeriveOptions::new(theory))?);
    }
    let Some(first) = terms.first().cloned() else {
        return Ok(BTreeSet::new());
    };
    let mut sat = Saturation::new(&terms, &first, theory);
    sat.stop_at_target = false;
    Ok(sat.run().derived)
}

fn prepare(t: &Term, options: DeriveOptions) -> Result<Term, DeductionError> {
    if !t.is_ground() {
        return Err(DeductionError::NonGround(t.to_string()));
    }
    if options.theory == Theory::Dy && t.has_aci() {
        return Err(DeductionError::AciUnderDy(t.to_string()));
    }
    if t.is_normalized() {
        return Ok(t.clone());
    }
    if options.strict {
        return Err(DeductionError::NotNormalized(t.to_string()));
    }
    let n = normalize(t);
    warn!("input term `{t}` normalized to `{n}`");
    Ok(n)
}

enum Shape {
    Leaf,
    Bin(BinOp, usize, usize),
    Aci(Vec<usize>),
}

struct Saturation {
    universe: Vec<Term>,
    shape: Vec<Shape>,
    /// Binary terms having the given index as first child.
    parents: Vec<Vec<usize>>,
    /// Index of `priv(k)` for atom `k`, when it is in the universe.
    priv_of: HashMap<usize, usize>,
    in_d: Vec<bool>,
    target: usize,
    theory: Theory,
    ops: u64,
    stop_at_target: bool,
}

impl Saturation {
    fn new(knowledge: &[Term], target: &Term, theory: Theory) -> Self {
        let universe: Vec<Term> =
            quasi_subterms_of(knowledge.iter().chain(std::iter::once(target)))
                .into_iter()
                .collect();
        let index: HashMap<u64, usize> = universe
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id(), i))
            .collect();
        let mut shape = Vec::with_capacity(universe.len());
        let mut parents = vec![Vec::new(); universe.len()];
        let mut priv_of = HashMap::new();
        for (i, t) in universe.iter().enumerate() {
            shape.push(match t.kind() {
                TermKind::Atom(_) | TermKind::Var(_) => Shape::Leaf,
                TermKind::Priv(k) => {
                    priv_of.insert(index[&k.id()], i);
                    Shape::Leaf
                }
                TermKind::Bin(op, a, b) => {
                    let (a, b) = (index[&a.id()], index[&b.id()]);
                    parents[a].push(i);
                    if *op == BinOp::Pair {
                        parents[b].push(i);
                    }
                    Shape::Bin(*op, a, b)
                }
                TermKind::Aci(items) => Shape::Aci(items.iter().map(|x| index[&x.id()]).collect()),
            });
        }
        let mut in_d = vec![false; universe.len()];
        for t in knowledge {
            in_d[index[&t.id()]] = true;
        }
        let target = index[&target.id()];
        Saturation {
            universe,
            shape,
            parents,
            priv_of,
            in_d,
            target,
            theory,
            ops: 0,
            stop_at_target: true,
        }
    }

    fn has(&mut self, i: usize) -> bool {
        self.ops += 1;
        self.in_d[i]
    }

    /// A pending term obtainable by one Dolev-Yao rule from derived terms.
    fn dy_step(&mut self, r: usize) -> bool {
        if let Shape::Bin(_, a, b) = self.shape[r] {
            if self.has(a) && self.has(b) {
                return true;
            }
        }
        for k in 0..self.parents[r].len() {
            let p = self.parents[r][k];
            if !self.has(p) {
                continue;
            }
            match self.shape[p] {
                Shape::Bin(BinOp::Pair, _, _) => return true,
                Shape::Bin(BinOp::SEnc, m, key) if m == r => {
                    if self.has(key) {
                        return true;
                    }
                }
                Shape::Bin(BinOp::AEnc, m, key) if m == r => {
                    if let Some(&pk) = self.priv_of.get(&key) {
                        if self.has(pk) {
                            return true;
                        }
                    }
                }
                _ => {}
            }
        }
        false
    }

    fn all_in_d(&mut self, items: &[usize]) -> bool {
        items.iter().all(|&i| {
            self.ops += 1;
            self.in_d[i]
        })
    }

    fn run(mut self) -> Derivation {
        let n = self.universe.len();
        let mut rounds = 0;
        'outer: loop {
            if self.stop_at_target && self.in_d[self.target] {
                break;
            }
            for r in 0..n {
                if !self.has(r) && self.dy_step(r) {
                    self.in_d[r] = true;
                    rounds += 1;
                    continue 'outer;
                }
            }
            if self.theory == Theory::DyAci {
                for s in 0..n {
                    if let Shape::Aci(items) = &self.shape[s] {
                        let items = items.clone();
                        if !self.has(s) && self.all_in_d(&items) {
                            self.in_d[s] = true;
                            rounds += 1;
                            continue 'outer;
                        }
                    }
                }
                for s in 0..n {
                    if let Shape::Aci(items) = &self.shape[s] {
                        let items = items.clone();
                        if self.has(s) && !self.all_in_d(&items) {
                            for i in items {
                                self.in_d[i] = true;
                            }
                            self.ops += 1;
                            rounds += 1;
                            continue 'outer;
                        }
                    }
                }
            }
            break;
        }
        let derived = self
            .universe
            .iter()
            .zip(&self.in_d)
            .filter(|(_, d)| **d)
            .map(|(t, _)| t.clone())
            .collect();
        Derivation {
            derivable: self.in_d[self.target],
            ops: self.ops,
            universe: n,
            rounds,
            derived,
        }
    }
}

/// Check that `sigma` satisfies every constraint of `system` under `theory`.
pub fn check_model(
    system: &ConstraintSystem,
    sigma: &Substitution,
    theory: Theory,
) -> Result<bool, DeductionError> {
    if let Some(v) = system.vars().into_iter().find(|v| sigma.get(v).is_none()) {
        return Err(DeductionError::MissingBinding(v.to_string()));
    }
    for c in system.constraints() {
        if !check_constraint(c, sigma, theory)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub(crate) fn check_constraint(
    c: &Constraint,
    sigma: &Substitution,
    theory: Theory,
) -> Result<bool, DeductionError> {
    let knowledge = c
        .knowledge
        .iter()
        .map(|t| sigma.apply_normalized(t))
        .collect::<Result<Vec<_>, _>>()?;
    let target = sigma.apply_normalized(&c.target)?;
    derivable(&knowledge, &target, theory)
}

/// Reference closure by forward chaining over every rule instance.
///
/// The universe of candidate conclusions is `sub(E u goals)` together with every term
/// over the atoms of the input whose DAG size is at most `bound`. The result is the least
/// set containing `E` and closed under the rules restricted to that universe.
pub fn closure_oracle(
    knowledge: &[Term],
    goals: &[Term],
    bound: usize,
    theory: Theory,
) -> BTreeSet<Term> {
    let seeds: Vec<Term> = knowledge.iter().chain(goals).map(normalize).collect();
    let atoms: Vec<Term> = crate::term::atoms_of(&seeds).into_iter().collect();
    let mut universe: BTreeSet<Term> = quasi_subterms_of(&seeds);
    universe.extend(ground_terms(&atoms, bound, theory).iter().cloned());
    if theory == Theory::Dy {
        universe.retain(|t| !t.has_aci());
    }
    let universe: Vec<(Term, BTreeSet<Term>)> = universe
        .into_iter()
        .map(|t| {
            let e = elems(&t);
            (t, e)
        })
        .collect();

    let mut known: BTreeSet<Term> = knowledge.iter().map(normalize).collect();
    loop {
        let mut fresh = Vec::new();
        // decomposition
        for k in &known {
            match k.kind() {
                TermKind::Bin(BinOp::Pair, a, b) => fresh.extend([a.clone(), b.clone()]),
                TermKind::Bin(BinOp::SEnc, m, key) if known.contains(key) => fresh.push(m.clone()),
                TermKind::Bin(BinOp::AEnc, m, key)
                    if Term::private(key.clone()).is_ok_and(|p| known.contains(&p)) =>
                {
                    fresh.push(m.clone())
                }
                TermKind::Aci(items) if theory == Theory::DyAci => {
                    fresh.extend(items.iter().map(normalize))
                }
                _ => {}
            }
        }
        // composition, one instance per conclusion in the universe
        for (u, u_elems) in &universe {
            if known.contains(u) {
                continue;
            }
            let ok = match u.kind() {
                TermKind::Bin(_, a, b) => known.contains(a) && known.contains(b),
                TermKind::Aci(_) if theory == Theory::DyAci => {
                    // some subset of known whose elements together are exactly elems(u)
                    let mut covered = BTreeSet::new();
                    for k in &known {
                        let ke = elems(k);
                        if ke.is_subset(u_elems) {
                            covered.extend(ke);
                        }
                    }
                    &covered == u_elems
                }
                _ => false,
            };
            if ok {
                fresh.push(u.clone());
            }
        }
        let before = known.len();
        known.extend(fresh);
        if known.len() == before {
            return known;
        }
    }
}
