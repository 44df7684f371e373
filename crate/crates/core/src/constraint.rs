//! Deducibility constraints `E |> t` and ordered systems of them.
//!
//! File format: one constraint per line, `t1, t2, ... |> t`. Lines starting with `#`
//! and blank lines are ignored.

use std::collections::BTreeSet;
use std::fmt;

use crate::parse::{ParseError, Parser};
use crate::subst::Substitution;
use crate::term::{
    atoms_of, dag_size_of, edge_count_of, normalize, quasi_subterms_of, subterms_of, vars_of, Name,
    Term, TermError,
};

/// Atom injected into systems without atoms so that models have something to build on.
pub const SENTINEL_ATOM: &str = "@a0";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub knowledge: BTreeSet<Term>,
    pub target: Term,
}

impl Constraint {
    pub fn new(knowledge: impl IntoIterator<Item = Term>, target: Term) -> Self {
        Constraint {
            knowledge: knowledge.into_iter().collect(),
            target,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.knowledge.iter().chain(std::iter::once(&self.target))
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        vars_of(self.terms())
    }

    pub fn is_ground(&self) -> bool {
        self.terms().all(Term::is_ground)
    }

    pub fn is_normalized(&self) -> bool {
        self.terms().all(Term::is_normalized)
    }

    pub fn normalize(&self) -> Constraint {
        Constraint::new(
            self.knowledge.iter().map(normalize),
            normalize(&self.target),
        )
    }

    pub fn apply(&self, sigma: &Substitution) -> Result<Constraint, TermError> {
        Ok(Constraint::new(
            self.knowledge
                .iter()
                .map(|t| sigma.apply(t))
                .collect::<Result<Vec<_>, _>>()?,
            sigma.apply(&self.target)?,
        ))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.knowledge.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        if !self.knowledge.is_empty() {
            write!(f, " ")?;
        }
        write!(f, "|> {}", self.target)
    }
}

/// An ordered list of constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSystem {
    constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        ConstraintSystem { constraints }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.constraints.iter().flat_map(Constraint::terms)
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        vars_of(self.terms())
    }

    pub fn atoms(&self) -> BTreeSet<Term> {
        atoms_of(self.terms())
    }

    pub fn subterms(&self) -> BTreeSet<Term> {
        subterms_of(self.terms())
    }

    pub fn quasi_subterms(&self) -> BTreeSet<Term> {
        quasi_subterms_of(self.terms())
    }

    pub fn dag_size(&self) -> usize {
        dag_size_of(self.terms())
    }

    pub fn edge_count(&self) -> usize {
        edge_count_of(self.terms())
    }

    /// Input size: constraint count times DAG size, plus edges.
    pub fn measure(&self) -> usize {
        self.len() * self.dag_size() + self.edge_count()
    }

    pub fn is_normalized(&self) -> bool {
        self.constraints.iter().all(Constraint::is_normalized)
    }

    pub fn has_aci(&self) -> bool {
        self.terms().any(Term::has_aci)
    }

    pub fn normalize(&self) -> ConstraintSystem {
        ConstraintSystem::new(self.constraints.iter().map(Constraint::normalize).collect())
    }

    pub fn apply(&self, sigma: &Substitution) -> Result<ConstraintSystem, TermError> {
        Ok(ConstraintSystem::new(
            self.constraints
                .iter()
                .map(|c| c.apply(sigma))
                .collect::<Result<_, _>>()?,
        ))
    }

    /// Adds `{@a0} |> @a0` when the system mentions no atom.
    pub fn with_sentinel(&self) -> ConstraintSystem {
        let mut out = self.clone();
        if self.atoms().is_empty() {
            let a0 = Term::atom(SENTINEL_ATOM);
            out.push(Constraint::new([a0.clone()], a0));
        }
        out
    }

    /// Pairs `(i, j)`, `i < j`, whose knowledge sets are not included one in the other
    /// in the order they appear.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ci) in self.constraints.iter().enumerate() {
            for (j, cj) in self.constraints.iter().enumerate().skip(i + 1) {
                if !ci.knowledge.is_subset(&cj.knowledge) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<ConstraintSystem, SystemParseError> {
        let mut out = ConstraintSystem::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let c = parse_constraint(line).map_err(|e| SystemParseError {
                line: n + 1,
                source: e,
            })?;
            out.push(c);
        }
        Ok(out)
    }
}

impl fmt::Display for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("line {line}: {source}")]
pub struct SystemParseError {
    pub line: usize,
    pub source: ParseError,
}

/// Parse one `t1, ..., tn |> t` constraint.
pub fn parse_constraint(line: &str) -> Result<Constraint, ParseError> {
    let Some(split) = line.find("|>") else {
        return Err(ParseError {
            column: 1,
            message: "missing `|>`".into(),
        });
    };
    let mut lhs = Parser::new(&line[..split]);
    let knowledge = lhs.list()?;
    lhs.skip_ws();
    if !lhs.at_end() {
        return Err(ParseError {
            column: 1,
            message: "malformed knowledge list".into(),
        });
    }
    let target = crate::parse::parse_term(&line[split + 2..]).map_err(|e| ParseError {
        column: e.column + line[..split + 2].chars().count(),
        message: e.message,
    })?;
    Ok(Constraint::new(knowledge, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# two constraints\nsenc(X, a), pair(c, a) |> b\n\n{X . c} |> a\n";

    #[test]
    fn parse_and_print() {
        let s = ConstraintSystem::parse(SAMPLE).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.vars().len(), 1);
        let again = ConstraintSystem::parse(&s.to_string()).unwrap();
        assert_eq!(again, s);
        assert!(ConstraintSystem::parse("a |> \n").is_err());
        let e = ConstraintSystem::parse("a |> b\nfoo").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn empty_knowledge() {
        let c = parse_constraint("|> a").unwrap();
        assert!(c.knowledge.is_empty());
        assert_eq!(c.to_string(), "|> a");
    }

    #[test]
    fn sentinel_only_without_atoms() {
        let s = ConstraintSystem::parse("X |> X").unwrap();
        assert_eq!(s.with_sentinel().len(), 2);
        let s = ConstraintSystem::parse("X |> a").unwrap();
        assert_eq!(s.with_sentinel().len(), 1);
    }

    #[test]
    fn monotonicity() {
        let s = ConstraintSystem::parse("a |> X\nb |> Y").unwrap();
        assert_eq!(s.monotonicity_violations(), vec![(0, 1)]);
        let s = ConstraintSystem::parse("a |> X\na, b |> Y").unwrap();
        assert!(s.monotonicity_violations().is_empty());
    }
}
