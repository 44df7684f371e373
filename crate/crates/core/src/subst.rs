//! Substitutions from variable names to terms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::term::{normalize, Name, Term, TermError, TermKind};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Name, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, var: impl Into<Name>, value: Term) -> Option<Term> {
        self.map.insert(var.into(), value)
    }

    pub fn remove(&mut self, var: &str) -> Option<Term> {
        self.map.remove(var)
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.map.get(var)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Term)> {
        self.map.iter()
    }

    pub fn is_ground(&self) -> bool {
        self.map.values().all(Term::is_ground)
    }

    /// Same domain with every value normalized.
    pub fn normalized(&self) -> Substitution {
        Substitution {
            map: self
                .map
                .iter()
                .map(|(k, v)| (k.clone(), normalize(v)))
                .collect(),
        }
    }

    /// Map every value through `f`.
    pub fn map_values(&self, mut f: impl FnMut(&Term) -> Term) -> Substitution {
        Substitution {
            map: self.map.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }

    /// Replace variables by their values. The result is not normalized.
    pub fn apply(&self, t: &Term) -> Result<Term, TermError> {
        let mut memo = HashMap::new();
        self.apply_memo(t, &mut memo)
    }

    /// Apply, then normalize.
    pub fn apply_normalized(&self, t: &Term) -> Result<Term, TermError> {
        Ok(normalize(&self.apply(t)?))
    }

    fn apply_memo(&self, t: &Term, memo: &mut HashMap<u64, Term>) -> Result<Term, TermError> {
        if t.is_ground() || self.map.is_empty() {
            return Ok(t.clone());
        }
        if let Some(done) = memo.get(&t.id()) {
            return Ok(done.clone());
        }
        let out = match t.kind() {
            TermKind::Atom(_) => t.clone(),
            TermKind::Var(n) => self.map.get(n).cloned().unwrap_or_else(|| t.clone()),
            TermKind::Priv(k) => {
                let k2 = self.apply_memo(k, memo)?;
                Term::private(k2.clone()).map_err(|_| invalid(t, &k2))?
            }
            TermKind::Bin(op, a, b) => {
                let a2 = self.apply_memo(a, memo)?;
                let b2 = self.apply_memo(b, memo)?;
                Term::bin(*op, a2, b2.clone()).map_err(|_| invalid(t, &b2))?
            }
            TermKind::Aci(items) => Term::aci(
                items
                    .iter()
                    .map(|i| self.apply_memo(i, memo))
                    .collect::<Result<_, _>>()?,
            )?,
        };
        memo.insert(t.id(), out.clone());
        Ok(out)
    }
}

fn invalid(context: &Term, value: &Term) -> TermError {
    TermError::InvalidApplication {
        context: context.to_string(),
        value: value.to_string(),
    }
}

impl FromIterator<(Name, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Name, Term)>>(iter: I) -> Self {
        Substitution {
            map: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        write!(f, "}}")
    }
}
