//! Satisfiability of deducibility constraint systems under the set-aware theory.
//!
//! The search guesses an identification of the variables, then builds each variable's
//! value as the set of some instantiated non-variable, non-set quasi-subterms of the
//! system (plus private keys of its atoms). A variable may only use elements whose
//! variables were assigned before it, which keeps the assignment well-founded. Every
//! candidate model is checked with the ground deduction procedure, so a reported model
//! is always a real one.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::constraint::{Constraint, ConstraintSystem};
use crate::deduction::{
    check_constraint, check_model, derivable, derivable_subterms, DeductionError, Theory,
};
use crate::enumerate::ground_terms;
use crate::subst::Substitution;
use crate::term::{dag_size, elems, pairing, vars, BinOp, Name, Term, TermError, TermKind};

/// Resource limits and switches.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Maximum number of candidate assignments explored.
    pub max_nodes: Option<u64>,
    /// Wall-clock limit.
    pub max_time: Option<Duration>,
    /// Discard partial assignments that fail a necessary condition for derivability.
    pub prune: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_nodes: Some(5_000_000),
            max_time: None,
            prune: true,
        }
    }
}

impl SolverConfig {
    pub fn unlimited() -> Self {
        SolverConfig {
            max_nodes: None,
            max_time: None,
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Sat(Substitution),
    Unsat,
    /// The budget ran out before the search was complete.
    Indeterminate(String),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }

    pub fn model(&self) -> Option<&Substitution> {
        match self {
            Outcome::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub nodes: u64,
    pub partitions: u64,
    /// Size limit on model values: twice the DAG size of the normalized system.
    pub bound: usize,
    /// Largest element pool seen.
    pub pool: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub outcome: Outcome,
    pub stats: SolveStats,
    /// For each variable, the uninstantiated pool elements its value was built from.
    pub witness: BTreeMap<Name, Vec<Term>>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Deduction(#[from] DeductionError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("theory {0} is not supported here")]
    Theory(Theory),
    #[error("internal error: {0}")]
    Internal(String),
}

struct Exhausted(String);

struct Budget {
    max_nodes: Option<u64>,
    deadline: Option<Instant>,
    nodes: u64,
}

impl Budget {
    fn new(config: &SolverConfig) -> Self {
        Budget {
            max_nodes: config.max_nodes,
            deadline: config.max_time.map(|d| Instant::now() + d),
            nodes: 0,
        }
    }

    fn tick(&mut self) -> Result<(), Exhausted> {
        self.nodes += 1;
        if self.max_nodes.is_some_and(|m| self.nodes > m) {
            return Err(Exhausted(format!(
                "node limit of {} reached",
                self.nodes - 1
            )));
        }
        if self.nodes.is_multiple_of(64) && self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(Exhausted("time limit reached".into()));
        }
        Ok(())
    }
}

/// Decide satisfiability of `system` under the set-aware theory.
pub fn solve(system: &ConstraintSystem, config: &SolverConfig) -> Result<Solution, SolveError> {
    let norm = system.normalize();
    let bound = 2 * norm.dag_size();
    let norm = norm.with_sentinel();
    let mut stats = SolveStats {
        bound,
        ..SolveStats::default()
    };
    let mut budget = Budget::new(config);
    let names: Vec<Name> = norm.vars().into_iter().collect();

    for c in norm.constraints().iter().filter(|c| c.is_ground()) {
        if !check_constraint(c, &Substitution::new(), Theory::DyAci)? {
            return Ok(finish(Outcome::Unsat, stats, &budget, BTreeMap::new()));
        }
    }
    if names.is_empty() {
        return Ok(finish(
            Outcome::Sat(Substitution::new()),
            stats,
            &budget,
            BTreeMap::new(),
        ));
    }

    for classes in Partitions::new(names.len()) {
        stats.partitions += 1;
        let reps: Vec<usize> = (0..names.len())
            .map(|i| classes.iter().position(|&c| c == classes[i]).unwrap())
            .collect();
        let theta: Substitution = (0..names.len())
            .filter(|&i| reps[i] != i)
            .map(|i| (names[i].clone(), Term::var(&names[reps[i]])))
            .collect();
        let system_theta = if theta.is_empty() {
            norm.clone()
        } else {
            norm.apply(&theta)?.normalize()
        };
        let mut search = Search::new(&system_theta, bound, config.prune, &mut budget)?;
        stats.pool = stats.pool.max(search.pool.len());
        match search.run() {
            Ok(Some((values, chosen))) => {
                let mut sigma = Substitution::new();
                let mut witness = BTreeMap::new();
                for (i, name) in names.iter().enumerate() {
                    let rep = &names[reps[i]];
                    sigma.insert(name.clone(), values[rep].clone());
                    witness.insert(name.clone(), chosen[rep].clone());
                }
                if !check_model(system, &sigma, Theory::DyAci)? {
                    return Err(SolveError::Internal(format!(
                        "candidate {sigma} failed the final check"
                    )));
                }
                return Ok(finish(Outcome::Sat(sigma), stats, &budget, witness));
            }
            Ok(None) => {}
            Err(Exhausted(reason)) => {
                return Ok(finish(
                    Outcome::Indeterminate(reason),
                    stats,
                    &budget,
                    BTreeMap::new(),
                ))
            }
        }
    }
    Ok(finish(Outcome::Unsat, stats, &budget, BTreeMap::new()))
}

fn finish(
    outcome: Outcome,
    mut stats: SolveStats,
    budget: &Budget,
    witness: BTreeMap<Name, Vec<Term>>,
) -> Solution {
    stats.nodes = budget.nodes;
    Solution {
        outcome,
        stats,
        witness,
    }
}

/// Check a claimed model. With `enforce_bound`, also require every value to respect the
/// size limit that models produced by [`solve`] satisfy.
pub fn verify_certificate(
    system: &ConstraintSystem,
    sigma: &Substitution,
    enforce_bound: bool,
) -> Result<bool, SolveError> {
    let norm = system.normalize();
    let sigma = sigma.normalized();
    if !check_model(&norm, &sigma, Theory::DyAci)? {
        return Ok(false);
    }
    if enforce_bound {
        let bound = 2 * norm.dag_size();
        return Ok(norm
            .vars()
            .iter()
            .all(|v| sigma.get(v).is_some_and(|t| dag_size(t) <= bound)));
    }
    Ok(true)
}

/// Exhaustive search over every normalized ground term of DAG size at most `cap` built
/// from the atoms of the system. Complete relative to the cap.
pub fn brute_solve(
    system: &ConstraintSystem,
    cap: usize,
    theory: Theory,
    config: &SolverConfig,
) -> Result<Solution, SolveError> {
    let norm = system.normalize().with_sentinel();
    if theory == Theory::Dy && norm.has_aci() {
        return Err(DeductionError::AciUnderDy(norm.to_string()).into());
    }
    let atoms: Vec<Term> = norm.atoms().into_iter().collect();
    let terms = ground_terms(&atoms, cap, theory);
    let names: Vec<Name> = norm.vars().into_iter().collect();
    // constraints become checkable once their last variable is assigned
    let mut due: Vec<Vec<&Constraint>> = vec![Vec::new(); names.len()];
    let mut budget = Budget::new(config);
    let mut stats = SolveStats {
        bound: cap,
        pool: terms.len(),
        ..SolveStats::default()
    };
    for c in norm.constraints() {
        match c
            .vars()
            .iter()
            .map(|v| names.binary_search(v).unwrap())
            .max()
        {
            Some(last) => due[last].push(c),
            None => {
                if !check_constraint(c, &Substitution::new(), theory)? {
                    return Ok(finish(Outcome::Unsat, stats, &budget, BTreeMap::new()));
                }
            }
        }
    }
    let mut sigma = Substitution::new();
    stats.partitions = 1;
    match brute_dfs(&names, &due, &terms, theory, 0, &mut sigma, &mut budget) {
        Ok(true) => Ok(finish(Outcome::Sat(sigma), stats, &budget, BTreeMap::new())),
        Ok(false) => Ok(finish(Outcome::Unsat, stats, &budget, BTreeMap::new())),
        Err(Exhausted(r)) => Ok(finish(
            Outcome::Indeterminate(r),
            stats,
            &budget,
            BTreeMap::new(),
        )),
    }
}

fn brute_dfs(
    names: &[Name],
    due: &[Vec<&Constraint>],
    terms: &[Term],
    theory: Theory,
    depth: usize,
    sigma: &mut Substitution,
    budget: &mut Budget,
) -> Result<bool, Exhausted> {
    if depth == names.len() {
        return Ok(true);
    }
    for t in terms {
        budget.tick()?;
        sigma.insert(names[depth].clone(), t.clone());
        let ok = due[depth]
            .iter()
            .all(|c| check_constraint(c, sigma, theory).unwrap_or(false));
        if ok && brute_dfs(names, due, terms, theory, depth + 1, sigma, budget)? {
            return Ok(true);
        }
    }
    sigma.remove(&names[depth]);
    Ok(false)
}

/// Set partitions of `0..n` as restricted growth strings, with the most classes first
/// and lexicographic order within the same class count.
pub struct Partitions {
    n: usize,
    classes: usize,
    current: Option<Vec<usize>>,
}

impl Partitions {
    pub fn new(n: usize) -> Self {
        Partitions {
            n,
            classes: n,
            current: None,
        }
    }

    fn next_rgs(v: &mut [usize]) -> bool {
        for i in (1..v.len()).rev() {
            let max_prefix = v[..i].iter().copied().max().unwrap_or(0);
            if v[i] <= max_prefix {
                v[i] += 1;
                v[i + 1..].iter_mut().for_each(|x| *x = 0);
                return true;
            }
        }
        false
    }
}

impl Iterator for Partitions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.n == 0 {
            return None;
        }
        loop {
            let advanced = match &mut self.current {
                None => {
                    self.current = Some(vec![0; self.n]);
                    true
                }
                Some(v) => Self::next_rgs(v),
            };
            if !advanced {
                if self.classes == 1 {
                    return None;
                }
                self.classes -= 1;
                self.current = None;
                continue;
            }
            let v = self.current.as_ref().unwrap();
            if v.iter().max().unwrap() + 1 == self.classes {
                return Some(v.clone());
            }
        }
    }
}

struct PoolEntry {
    term: Term,
    vars: Vec<usize>,
}

struct Check {
    knowledge: Vec<Term>,
    target: Term,
    kvars: Vec<usize>,
    vars: Vec<usize>,
    /// Set when the target is a bare variable.
    target_var: Option<usize>,
}

type Found = (HashMap<Name, Term>, HashMap<Name, Vec<Term>>);

struct Search<'b> {
    names: Vec<Name>,
    pool: Vec<PoolEntry>,
    checks: Vec<Check>,
    by_var: Vec<Vec<usize>>,
    /// Variables in the order the search prefers to assign them.
    preferred: Vec<usize>,
    rank: Vec<usize>,
    bound: usize,
    prune: bool,
    budget: &'b mut Budget,
    sigma: Substitution,
    assigned: Vec<Option<(Term, Vec<usize>)>>,
    order: Vec<usize>,
    max_card: usize,
    unsat: bool,
    exact_cache: HashMap<(Vec<u64>, u64), bool>,
    dsub_cache: HashMap<Vec<u64>, Arc<BTreeSet<Term>>>,
}

/// Split a target into parts that are derivable exactly when the whole is.
fn split_target(t: &Term, out: &mut Vec<Term>) {
    match t.kind() {
        TermKind::Bin(BinOp::Pair, a, b) => {
            split_target(a, out);
            split_target(b, out);
        }
        TermKind::Aci(items) => items.iter().for_each(|i| split_target(i, out)),
        _ => out.push(t.clone()),
    }
}

impl<'b> Search<'b> {
    fn new(
        system: &ConstraintSystem,
        bound: usize,
        prune: bool,
        budget: &'b mut Budget,
    ) -> Result<Self, SolveError> {
        let names: Vec<Name> = system.vars().into_iter().collect();
        let index = |v: &Name| names.binary_search(v).unwrap();
        let mut pool_terms: BTreeSet<Term> = system
            .quasi_subterms()
            .into_iter()
            .filter(|t| !t.is_var() && !t.is_aci())
            .collect();
        for a in system.atoms() {
            pool_terms.insert(Term::private(a)?);
        }
        let pool: Vec<PoolEntry> = pool_terms
            .into_iter()
            .map(|t| {
                let vs = vars(&t).iter().map(index).collect();
                PoolEntry { term: t, vars: vs }
            })
            .collect();

        let mut checks: Vec<Check> = Vec::new();
        let mut seen = HashSet::new();
        let mut unsat = false;
        for c in system.constraints() {
            let mut parts = Vec::new();
            split_target(&c.target, &mut parts);
            let knowledge: Vec<Term> = c.knowledge.iter().cloned().collect();
            let kvars: BTreeSet<usize> =
                crate::term::vars_of(&knowledge).iter().map(index).collect();
            for part in parts {
                if !seen.insert((knowledge.clone(), part.clone())) {
                    continue;
                }
                let mut all = kvars.clone();
                all.extend(vars(&part).iter().map(index));
                if all.is_empty() {
                    if !derivable(&knowledge, &part, Theory::DyAci)? {
                        unsat = true;
                    }
                    continue;
                }
                checks.push(Check {
                    target_var: part.name().filter(|_| part.is_var()).map(index),
                    knowledge: knowledge.clone(),
                    target: part,
                    kvars: kvars.iter().copied().collect(),
                    vars: all.into_iter().collect(),
                });
            }
        }
        let mut by_var = vec![Vec::new(); names.len()];
        for (i, c) in checks.iter().enumerate() {
            for &v in &c.vars {
                by_var[v].push(i);
            }
        }
        let preferred = preferred_order(names.len(), &checks);
        let mut rank = vec![0; names.len()];
        for (r, &v) in preferred.iter().enumerate() {
            rank[v] = r;
        }
        Ok(Search {
            assigned: vec![None; names.len()],
            names,
            pool,
            checks,
            by_var,
            preferred,
            rank,
            bound,
            prune,
            budget,
            sigma: Substitution::new(),
            order: Vec::new(),
            max_card: 1,
            unsat,
            exact_cache: HashMap::new(),
            dsub_cache: HashMap::new(),
        })
    }

    fn run(&mut self) -> Result<Option<Found>, Exhausted> {
        if self.unsat {
            return Ok(None);
        }
        // no value can have more elements than nodes
        let widest = self.pool.len().min(self.bound.saturating_sub(1)).max(1);
        for card in 1..=widest {
            self.max_card = card;
            if self.dfs()? {
                let mut values = HashMap::new();
                let mut chosen = HashMap::new();
                for (v, a) in self.assigned.iter().enumerate() {
                    let (t, elems) = a.as_ref().unwrap();
                    values.insert(self.names[v].clone(), t.clone());
                    chosen.insert(
                        self.names[v].clone(),
                        elems.iter().map(|&e| self.pool[e].term.clone()).collect(),
                    );
                }
                return Ok(Some((values, chosen)));
            }
        }
        Ok(None)
    }

    fn dfs(&mut self) -> Result<bool, Exhausted> {
        if self.order.len() == self.names.len() {
            return Ok(true);
        }
        let last = self.order.last().copied();
        for vi in 0..self.preferred.len() {
            let v = self.preferred[vi];
            if self.assigned[v].is_some() {
                continue;
            }
            // an out-of-order variable must build on the one placed just before it
            let need = last.filter(|&l| self.rank[v] < self.rank[l]);
            let mut avail: Vec<(usize, Term)> = Vec::new();
            for e in 0..self.pool.len() {
                if self.pool[e]
                    .vars
                    .iter()
                    .all(|&x| self.assigned[x].is_some())
                {
                    if let Ok(t) = self.sigma.apply_normalized(&self.pool[e].term) {
                        avail.push((e, t));
                    }
                }
            }
            self.filter_elements(v, &mut avail);
            if let Some(l) = need {
                if !avail.iter().any(|(e, _)| self.pool[*e].vars.contains(&l)) {
                    continue;
                }
            }
            let mut tried = HashSet::new();
            for card in 1..=self.max_card.min(avail.len()) {
                let mut combo: Vec<usize> = (0..card).collect();
                loop {
                    if self.try_combo(v, need, &avail, &combo, &mut tried)? {
                        return Ok(true);
                    }
                    if !next_combination(&mut combo, avail.len()) {
                        break;
                    }
                }
            }
        }
        Ok(false)
    }

    fn try_combo(
        &mut self,
        v: usize,
        need: Option<usize>,
        avail: &[(usize, Term)],
        combo: &[usize],
        tried: &mut HashSet<Term>,
    ) -> Result<bool, Exhausted> {
        if let Some(l) = need {
            if !combo
                .iter()
                .any(|&i| self.pool[avail[i].0].vars.contains(&l))
            {
                return Ok(false);
            }
        }
        let parts: Vec<Term> = combo.iter().map(|&i| avail[i].1.clone()).collect();
        let value = pairing(&parts).expect("non-empty combination");
        if dag_size(&value) > self.bound || !tried.insert(value.clone()) {
            return Ok(false);
        }
        self.budget.tick()?;
        let name = self.names[v].clone();
        self.sigma.insert(name.clone(), value.clone());
        self.assigned[v] = Some((value, combo.iter().map(|&i| avail[i].0).collect()));
        self.order.push(v);
        if self.consistent(v) && self.dfs()? {
            return Ok(true);
        }
        self.order.pop();
        self.assigned[v] = None;
        self.sigma.remove(&name);
        Ok(false)
    }

    /// Drop elements that cannot be part of `v` because a constraint with ground
    /// knowledge demands `v` itself.
    fn filter_elements(&mut self, v: usize, avail: &mut Vec<(usize, Term)>) {
        for ci in self.by_var[v].clone() {
            let c = &self.checks[ci];
            if c.target_var != Some(v) || !c.kvars.iter().all(|&x| self.assigned[x].is_some()) {
                continue;
            }
            let Some(knowledge) = self.instantiate_all(&c.knowledge.clone()) else {
                avail.clear();
                return;
            };
            avail.retain(|(_, t)| self.exact(&knowledge, t));
        }
    }

    fn instantiate_all(&self, ts: &[Term]) -> Option<Vec<Term>> {
        ts.iter()
            .map(|t| self.sigma.apply_normalized(t).ok())
            .collect()
    }

    fn exact(&mut self, knowledge: &[Term], target: &Term) -> bool {
        let key = (
            knowledge.iter().map(Term::id).collect::<Vec<_>>(),
            target.id(),
        );
        if let Some(&r) = self.exact_cache.get(&key) {
            return r;
        }
        let r = derivable(knowledge, target, Theory::DyAci).unwrap_or(false);
        if self.exact_cache.len() > 200_000 {
            self.exact_cache.clear();
        }
        self.exact_cache.insert(key, r);
        r
    }

    fn consistent(&mut self, v: usize) -> bool {
        for ci in self.by_var[v].clone() {
            let (knowledge, target, kvars, vars) = {
                let c = &self.checks[ci];
                (
                    c.knowledge.clone(),
                    c.target.clone(),
                    c.kvars.clone(),
                    c.vars.clone(),
                )
            };
            let complete = vars.iter().all(|&x| self.assigned[x].is_some());
            if !complete && !self.prune {
                continue;
            }
            let Some(k) = self.instantiate_all(&knowledge) else {
                return false;
            };
            let Ok(t) = self.sigma.apply_normalized(&target) else {
                return false;
            };
            let ok = if complete {
                self.exact(&k, &t)
            } else if kvars.iter().all(|&x| self.assigned[x].is_some()) {
                self.may_derive(&k, &t)
            } else {
                may_derive_open(&k, &t)
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn derivable_subterms(&mut self, knowledge: &[Term]) -> Arc<BTreeSet<Term>> {
        let key: Vec<u64> = knowledge.iter().map(Term::id).collect();
        if let Some(d) = self.dsub_cache.get(&key) {
            return d.clone();
        }
        let d = Arc::new(derivable_subterms(knowledge, Theory::DyAci).unwrap_or_default());
        if self.dsub_cache.len() > 50_000 {
            self.dsub_cache.clear();
        }
        self.dsub_cache.insert(key, d.clone());
        d
    }

    /// Necessary condition for some instance of the partially assigned `t` to be
    /// derivable from ground `knowledge`. A derivable term is either composed from
    /// derivable parts or is a derivable subterm of the knowledge.
    fn may_derive(&mut self, knowledge: &[Term], t: &Term) -> bool {
        if t.is_ground() {
            return self.exact(knowledge, t);
        }
        match t.kind() {
            TermKind::Var(_) => true,
            TermKind::Bin(BinOp::Pair, a, b) => {
                self.may_derive(knowledge, a) && self.may_derive(knowledge, b)
            }
            TermKind::Aci(items) => items.iter().all(|i| self.may_derive(knowledge, i)),
            TermKind::Bin(_, a, b)
                if self.may_derive(knowledge, a) && self.may_derive(knowledge, b) =>
            {
                true
            }
            _ => {
                let dsub = self.derivable_subterms(knowledge);
                dsub.iter().any(|d| may_match(t, d))
            }
        }
    }
}

/// Necessary condition for `t` to be derivable from `knowledge` under some completion of
/// the current assignment, when the knowledge still has unassigned variables. A derivable
/// term is composed from derivable parts or sits at a decomposable position of the
/// knowledge: pair components, encrypted messages and set elements.
fn may_derive_open(knowledge: &[Term], t: &Term) -> bool {
    match t.kind() {
        TermKind::Var(_) => true,
        TermKind::Bin(BinOp::Pair, a, b) => {
            may_derive_open(knowledge, a) && may_derive_open(knowledge, b)
        }
        TermKind::Aci(items) => items.iter().all(|i| may_derive_open(knowledge, i)),
        _ => {
            let composed = match t.kind() {
                TermKind::Bin(_, a, b) => {
                    may_derive_open(knowledge, a) && may_derive_open(knowledge, b)
                }
                _ => false,
            };
            composed || knowledge.iter().any(|e| may_occur(t, e))
        }
    }
}

/// Whether `t` may sit at a decomposable position of some instance of `e`.
fn may_occur(t: &Term, e: &Term) -> bool {
    if may_unify(t, e) {
        return true;
    }
    match e.kind() {
        TermKind::Var(_) => true,
        TermKind::Bin(BinOp::Pair, a, b) => may_occur(t, a) || may_occur(t, b),
        TermKind::Bin(BinOp::SEnc | BinOp::AEnc, m, _) => may_occur(t, m),
        TermKind::Aci(items) => items.iter().any(|i| may_occur(t, i)),
        _ => false,
    }
}

/// Necessary condition for two partially assigned terms to have equal instances.
fn may_unify(p: &Term, q: &Term) -> bool {
    if p.is_ground() && q.is_ground() {
        return p == q;
    }
    match (p.kind(), q.kind()) {
        (TermKind::Var(_), _) | (_, TermKind::Var(_)) => true,
        (TermKind::Aci(xs), TermKind::Aci(ys)) => {
            let open = xs.iter().chain(ys).any(Term::is_var);
            open || (xs.iter().all(|x| ys.iter().any(|y| may_unify(x, y)))
                && ys.iter().all(|y| xs.iter().any(|x| may_unify(x, y))))
        }
        // a set equals a single term only if all its items collapse onto it
        (TermKind::Aci(xs), _) => xs.iter().all(|x| x.is_var() || may_unify(x, q)),
        (_, TermKind::Aci(ys)) => ys.iter().all(|y| y.is_var() || may_unify(p, y)),
        (TermKind::Priv(a), TermKind::Priv(b)) => may_unify(a, b),
        (TermKind::Bin(o1, a1, b1), TermKind::Bin(o2, a2, b2)) => {
            o1 == o2 && may_unify(a1, a2) && may_unify(b1, b2)
        }
        _ => false,
    }
}

/// Necessary condition for some instance of `p` to normalize to the ground term `d`.
fn may_match(p: &Term, d: &Term) -> bool {
    if p.is_ground() {
        return p == d;
    }
    match (p.kind(), d.kind()) {
        (TermKind::Var(_), _) => true,
        (TermKind::Priv(k), TermKind::Priv(dk)) => may_match(k, dk),
        (TermKind::Bin(op, a, b), TermKind::Bin(dop, da, db)) => {
            op == dop && may_match(a, da) && may_match(b, db)
        }
        (TermKind::Aci(items), _) => {
            let targets = elems(d);
            let fixed: Vec<&Term> = items.iter().filter(|i| !i.is_var()).collect();
            if !fixed
                .iter()
                .all(|i| targets.iter().any(|g| may_match(i, g)))
            {
                return false;
            }
            fixed.len() < items.len()
                || targets
                    .iter()
                    .all(|g| fixed.iter().any(|i| may_match(i, g)))
        }
        _ => false,
    }
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Greedy variable order: first the variables that a constraint with already-known
/// knowledge asks for, then those completing the most constraints, then by name.
fn preferred_order(n: usize, checks: &[Check]) -> Vec<usize> {
    let mut done = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let best = (0..n)
            .filter(|&v| !done[v])
            .max_by_key(|&v| {
                let mut demanded = 0;
                let mut completed = 0;
                for c in checks.iter().filter(|c| c.vars.contains(&v)) {
                    if !c.kvars.contains(&v) && c.kvars.iter().all(|&x| done[x]) {
                        demanded += 1;
                    }
                    if c.vars.iter().all(|&x| x == v || done[x]) {
                        completed += 1;
                    }
                }
                (demanded, completed, std::cmp::Reverse(v))
            })
            .unwrap();
        done[best] = true;
        out.push(best);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn sys(s: &str) -> ConstraintSystem {
        ConstraintSystem::parse(s).unwrap()
    }

    fn model(pairs: &[(&str, &str)]) -> Substitution {
        pairs
            .iter()
            .map(|(k, v)| (Name::from(*k), parse_term(v).unwrap()))
            .collect()
    }

    #[test]
    fn partitions_order_and_count() {
        let ps: Vec<_> = Partitions::new(3).collect();
        assert_eq!(ps.len(), 5);
        assert_eq!(ps[0], vec![0, 1, 2]);
        assert_eq!(ps[4], vec![0, 0, 0]);
        assert_eq!(Partitions::new(4).count(), 15);
        assert_eq!(Partitions::new(5).count(), 52);
    }

    #[test]
    fn combinations() {
        let mut c = vec![0, 1];
        let mut n = 1;
        while next_combination(&mut c, 4) {
            n += 1;
        }
        assert_eq!(n, 6);
    }

    #[test]
    fn example_system() {
        let s = sys("senc(X, a), pair(c, a) |> b\n{X . c} |> a");
        let sol = solve(&s, &SolverConfig::default()).unwrap();
        let m = sol.outcome.model().expect("sat");
        assert!(verify_certificate(&s, m, true).unwrap());
        assert!(verify_certificate(&s, &model(&[("X", "senc(pair(a, b), c)")]), true).unwrap());
        assert!(verify_certificate(&s, &model(&[("X", "{a . b . c}")]), true).unwrap());
        assert!(!verify_certificate(&s, &model(&[("X", "a")]), true).unwrap());
    }

    #[test]
    fn trivial_cases() {
        let empty = ConstraintSystem::default();
        assert_eq!(
            solve(&empty, &SolverConfig::default()).unwrap().outcome,
            Outcome::Sat(Substitution::new())
        );
        let s = sys("a |> b");
        assert_eq!(
            solve(&s, &SolverConfig::default()).unwrap().outcome,
            Outcome::Unsat
        );
        let s = sys("X |> X");
        let sol = solve(&s, &SolverConfig::default()).unwrap();
        assert!(sol.outcome.is_sat());
    }

    #[test]
    fn unsat_by_exhaustion() {
        let s = sys("a |> X\nX, senc(s, k) |> s");
        let sol = solve(&s, &SolverConfig::default()).unwrap();
        assert_eq!(sol.outcome, Outcome::Unsat);
    }

    #[test]
    fn budget_gives_indeterminate() {
        let s = sys("senc(X, a), pair(c, a) |> b\n{X . c} |> a");
        let config = SolverConfig {
            max_nodes: Some(1),
            ..SolverConfig::default()
        };
        let sol = solve(&s, &config).unwrap();
        assert!(matches!(sol.outcome, Outcome::Indeterminate(_)));
    }

    #[test]
    fn brute_agrees_on_example() {
        let s = sys("senc(X, a), pair(c, a) |> b\n{X . c} |> a");
        let b = brute_solve(&s, 3, Theory::DyAci, &SolverConfig::unlimited()).unwrap();
        assert!(verify_certificate(&s, b.outcome.model().unwrap(), false).unwrap());
    }

    #[test]
    fn open_knowledge_conditions() {
        let p = |s: &str| parse_term(s).unwrap();
        let k = [p("a"), p("sig(pair(X, pair(addr, Z)), priv(ks))")];
        assert!(may_derive_open(
            &k,
            &p("sig(pair(g, pair(addr, c)), priv(ks))")
        ));
        assert!(!may_derive_open(
            &k,
            &p("sig(pair(g, pair(home, c)), priv(ks))")
        ));
        assert!(!may_derive_open(&k, &p("b")));
        assert!(may_derive_open(&k, &p("pair(a, a)")));
        let k = [p("pair(Y, b)")];
        assert!(may_derive_open(&k, &p("c")));
        assert!(!may_unify(&p("{X . a}"), &p("b")));
        assert!(may_unify(&p("{X . a}"), &p("a")));
    }

    #[test]
    fn may_match_sets() {
        let d = parse_term("{a . b . c}").unwrap();
        assert!(may_match(&parse_term("{X . a}").unwrap(), &d));
        assert!(!may_match(&parse_term("{X . e}").unwrap(), &d));
        assert!(!may_match(&parse_term("{pair(X, a) . b}").unwrap(), &d));
        assert!(may_match(&parse_term("X").unwrap(), &d));
        assert!(!may_match(&parse_term("pair(X, a)").unwrap(), &d));
    }
}
