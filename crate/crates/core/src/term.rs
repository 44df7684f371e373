//! Hash-consed message terms.
//!
//! Every term is interned in a global [`TermStore`], so structurally equal terms share
//! one node and equality is a pointer comparison. Terms are immutable DAGs.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, LazyLock, Mutex, Weak};

use thiserror::Error;

/// Names of atoms and variables.
pub type Name = Arc<str>;

/// Binary constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Pair,
    SEnc,
    AEnc,
    Sig,
}

impl BinOp {
    pub const ALL: [BinOp; 4] = [BinOp::Pair, BinOp::SEnc, BinOp::AEnc, BinOp::Sig];

    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::Pair => "pair",
            BinOp::SEnc => "senc",
            BinOp::AEnc => "aenc",
            BinOp::Sig => "sig",
        }
    }

    fn rank(self) -> u8 {
        match self {
            BinOp::Pair => 3,
            BinOp::SEnc => 4,
            BinOp::AEnc => 5,
            BinOp::Sig => 6,
        }
    }
}

/// The top symbol of a term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Atom(Name),
    Var(Name),
    Priv,
    Bin(BinOp),
    Aci,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Atom(n) | Symbol::Var(n) => write!(f, "{n}"),
            Symbol::Priv => write!(f, "priv"),
            Symbol::Bin(op) => write!(f, "{}", op.keyword()),
            Symbol::Aci => write!(f, "."),
        }
    }
}

/// The shape of a node.
#[derive(Debug)]
pub enum TermKind {
    Atom(Name),
    Var(Name),
    /// Private key of an atom or variable.
    Priv(Term),
    /// `Bin(op, message, key)`; for `Pair` the two components.
    Bin(BinOp, Term, Term),
    /// Items of a set built with the ACI operator, at least one.
    Aci(Vec<Term>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("{op} key must be {expected}, got `{key}`")]
    KeyRestriction {
        op: &'static str,
        expected: &'static str,
        key: String,
    },
    #[error("ACI set needs at least one item")]
    EmptyAci,
    #[error("substitution puts compound term `{value}` into the key position of `{context}`")]
    InvalidApplication { context: String, value: String },
}

pub struct Node {
    id: u64,
    kind: TermKind,
    ground: bool,
    normalized: bool,
    has_aci: bool,
}

/// A shared handle to an interned node.
#[derive(Clone)]
pub struct Term(Arc<Node>);

#[derive(PartialEq, Eq, Hash)]
enum ShapeKey {
    Atom(Name),
    Var(Name),
    Priv(u64),
    Bin(BinOp, u64, u64),
    Aci(Vec<u64>),
}

impl ShapeKey {
    fn of(kind: &TermKind) -> Self {
        match kind {
            TermKind::Atom(n) => ShapeKey::Atom(n.clone()),
            TermKind::Var(n) => ShapeKey::Var(n.clone()),
            TermKind::Priv(k) => ShapeKey::Priv(k.id()),
            TermKind::Bin(op, a, b) => ShapeKey::Bin(*op, a.id(), b.id()),
            TermKind::Aci(items) => ShapeKey::Aci(items.iter().map(Term::id).collect()),
        }
    }
}

/// Interning table mapping node shapes to live nodes.
pub struct TermStore {
    table: Mutex<StoreTable>,
    next_id: AtomicU64,
}

struct StoreTable {
    map: HashMap<ShapeKey, Weak<Node>>,
    sweep_at: usize,
}

static STORE: LazyLock<TermStore> = LazyLock::new(|| TermStore {
    table: Mutex::new(StoreTable {
        map: HashMap::new(),
        sweep_at: 4096,
    }),
    next_id: AtomicU64::new(1),
});

impl TermStore {
    pub fn global() -> &'static TermStore {
        &STORE
    }

    /// Number of nodes currently alive in the table.
    pub fn live_nodes(&self) -> usize {
        let table = self.table.lock().unwrap();
        table.map.values().filter(|w| w.strong_count() > 0).count()
    }

    fn intern(&self, kind: TermKind) -> Term {
        let key = ShapeKey::of(&kind);
        let (ground, normalized, has_aci) = flags(&kind);
        let mut table = self.table.lock().unwrap();
        if let Some(node) = table.map.get(&key).and_then(Weak::upgrade) {
            return Term(node);
        }
        let node = Arc::new(Node {
            id: self.next_id.fetch_add(1, AtomicOrdering::Relaxed),
            kind,
            ground,
            normalized,
            has_aci,
        });
        table.map.insert(key, Arc::downgrade(&node));
        if table.map.len() > table.sweep_at {
            table.map.retain(|_, w| w.strong_count() > 0);
            table.sweep_at = (table.map.len() * 2).max(4096);
        }
        Term(node)
    }
}

fn flags(kind: &TermKind) -> (bool, bool, bool) {
    match kind {
        TermKind::Atom(_) => (true, true, false),
        TermKind::Var(_) => (false, true, false),
        TermKind::Priv(k) => (k.is_ground(), true, false),
        TermKind::Bin(_, a, b) => (
            a.is_ground() && b.is_ground(),
            a.is_normalized() && b.is_normalized(),
            a.has_aci() || b.has_aci(),
        ),
        TermKind::Aci(items) => {
            let ground = items.iter().all(Term::is_ground);
            let normalized = items.len() >= 2
                && items.iter().all(|t| t.is_normalized() && !t.is_aci())
                && items.windows(2).all(|w| w[0] < w[1]);
            (ground, normalized, true)
        }
    }
}

impl Term {
    pub(crate) fn from_kind(kind: TermKind) -> Term {
        TermStore::global().intern(kind)
    }

    pub fn atom(name: &str) -> Term {
        Term::from_kind(TermKind::Atom(Name::from(name)))
    }

    pub fn var(name: &str) -> Term {
        Term::from_kind(TermKind::Var(Name::from(name)))
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::from_kind(TermKind::Bin(BinOp::Pair, a, b))
    }

    pub fn senc(message: Term, key: Term) -> Term {
        Term::from_kind(TermKind::Bin(BinOp::SEnc, message, key))
    }

    /// Asymmetric encryption; the key must be an atom or a variable.
    pub fn aenc(message: Term, key: Term) -> Result<Term, TermError> {
        Term::bin(BinOp::AEnc, message, key)
    }

    /// Signature; the key must be `priv(k)`.
    pub fn sig(message: Term, key: Term) -> Result<Term, TermError> {
        Term::bin(BinOp::Sig, message, key)
    }

    /// Private key of an atom or variable.
    pub fn private(key: Term) -> Result<Term, TermError> {
        if !key.is_atom() && !key.is_var() {
            return Err(TermError::KeyRestriction {
                op: "priv",
                expected: "an atom or variable",
                key: key.to_string(),
            });
        }
        Ok(Term::from_kind(TermKind::Priv(key)))
    }

    pub fn bin(op: BinOp, message: Term, key: Term) -> Result<Term, TermError> {
        match op {
            BinOp::AEnc if !key.is_atom() && !key.is_var() => Err(TermError::KeyRestriction {
                op: "aenc",
                expected: "an atom or variable",
                key: key.to_string(),
            }),
            BinOp::Sig if !key.is_priv() => Err(TermError::KeyRestriction {
                op: "sig",
                expected: "priv(k)",
                key: key.to_string(),
            }),
            _ => Ok(Term::from_kind(TermKind::Bin(op, message, key))),
        }
    }

    /// Raw ACI node with the items in the given order. Not normalized.
    pub fn aci(items: Vec<Term>) -> Result<Term, TermError> {
        if items.is_empty() {
            return Err(TermError::EmptyAci);
        }
        Ok(Term::from_kind(TermKind::Aci(items)))
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    /// Unique id of the node; stable for as long as the term is alive.
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn is_ground(&self) -> bool {
        self.0.ground
    }

    pub fn is_normalized(&self) -> bool {
        self.0.normalized
    }

    /// True if an ACI node occurs anywhere in the term.
    pub fn has_aci(&self) -> bool {
        self.0.has_aci
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.kind(), TermKind::Atom(_))
    }

    pub fn is_var(&self) -> bool {
        matches!(self.kind(), TermKind::Var(_))
    }

    pub fn is_priv(&self) -> bool {
        matches!(self.kind(), TermKind::Priv(_))
    }

    pub fn is_aci(&self) -> bool {
        matches!(self.kind(), TermKind::Aci(_))
    }

    /// Name of an atom or variable.
    pub fn name(&self) -> Option<&Name> {
        match self.kind() {
            TermKind::Atom(n) | TermKind::Var(n) => Some(n),
            _ => None,
        }
    }

    pub fn root(&self) -> Symbol {
        match self.kind() {
            TermKind::Atom(n) => Symbol::Atom(n.clone()),
            TermKind::Var(n) => Symbol::Var(n.clone()),
            TermKind::Priv(_) => Symbol::Priv,
            TermKind::Bin(op, _, _) => Symbol::Bin(*op),
            TermKind::Aci(_) => Symbol::Aci,
        }
    }

    /// Immediate children in list order.
    pub fn children(&self) -> Vec<Term> {
        match self.kind() {
            TermKind::Atom(_) | TermKind::Var(_) => Vec::new(),
            TermKind::Priv(k) => vec![k.clone()],
            TermKind::Bin(_, a, b) => vec![a.clone(), b.clone()],
            TermKind::Aci(items) => items.clone(),
        }
    }

    fn rank(&self) -> u8 {
        match self.kind() {
            TermKind::Atom(_) => 0,
            TermKind::Var(_) => 1,
            TermKind::Priv(_) => 2,
            TermKind::Bin(op, _, _) => op.rank(),
            TermKind::Aci(_) => 7,
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state);
    }
}

impl Ord for Term {
    /// Canonical order: root rank (atoms, variables, priv, pair, senc, aenc, sig, ACI),
    /// then names, then children lexicographically.
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        self.rank()
            .cmp(&other.rank())
            .then_with(|| match (self.kind(), other.kind()) {
                (TermKind::Atom(x), TermKind::Atom(y)) | (TermKind::Var(x), TermKind::Var(y)) => {
                    x.cmp(y)
                }
                (TermKind::Priv(x), TermKind::Priv(y)) => x.cmp(y),
                (TermKind::Bin(_, a1, b1), TermKind::Bin(_, a2, b2)) => {
                    a1.cmp(a2).then_with(|| b1.cmp(b2))
                }
                (TermKind::Aci(xs), TermKind::Aci(ys)) => xs.cmp(ys),
                _ => unreachable!("equal ranks imply equal node kinds"),
            })
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            TermKind::Atom(n) | TermKind::Var(n) => write!(f, "{n}"),
            TermKind::Priv(k) => write!(f, "priv({k})"),
            TermKind::Bin(op, a, b) => write!(f, "{}({a}, {b})", op.keyword()),
            TermKind::Aci(items) => {
                write!(f, "{{")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " . ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Visit every node of the DAG rooted at `roots` once, children first.
fn postorder<'a>(roots: impl IntoIterator<Item = &'a Term>, mut visit: impl FnMut(&Term)) {
    let mut seen = HashSet::new();
    let mut stack: Vec<(Term, bool)> = roots.into_iter().map(|t| (t.clone(), false)).collect();
    stack.reverse();
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            visit(&t);
            continue;
        }
        if !seen.insert(t.id()) {
            continue;
        }
        stack.push((t.clone(), true));
        for c in t.children().into_iter().rev() {
            if !seen.contains(&c.id()) {
                stack.push((c, false));
            }
        }
    }
}

/// Top-level elements: the items of an ACI node, flattened; `{t}` otherwise.
pub fn elems(t: &Term) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    collect_elems(t, &mut out);
    out
}

fn collect_elems(t: &Term, out: &mut BTreeSet<Term>) {
    match t.kind() {
        TermKind::Aci(items) => items.iter().for_each(|i| collect_elems(i, out)),
        _ => {
            out.insert(t.clone());
        }
    }
}

/// Subterms in the strict sense: every node reachable through raw children.
pub fn subterms(t: &Term) -> BTreeSet<Term> {
    subterms_of(std::iter::once(t))
}

pub fn subterms_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    postorder(ts, |t| {
        out.insert(t.clone());
    });
    out
}

/// Quasi-subterms: like [`subterms`], but nested ACI nodes directly under an ACI
/// node are looked through rather than collected.
pub fn quasi_subterms(t: &Term) -> BTreeSet<Term> {
    quasi_subterms_of(std::iter::once(t))
}

pub fn quasi_subterms_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    let mut seen = HashSet::new();
    let mut stack: Vec<Term> = ts.into_iter().cloned().collect();
    while let Some(t) = stack.pop() {
        if !seen.insert(t.id()) {
            continue;
        }
        out.insert(t.clone());
        match t.kind() {
            TermKind::Atom(_) | TermKind::Var(_) => {}
            TermKind::Priv(k) => stack.push(k.clone()),
            TermKind::Bin(_, a, b) => {
                stack.push(a.clone());
                stack.push(b.clone());
            }
            TermKind::Aci(_) => stack.extend(elems(&t)),
        }
    }
    out
}

/// Number of distinct subterms: the node count of the DAG.
pub fn dag_size(t: &Term) -> usize {
    dag_size_of(std::iter::once(t))
}

pub fn dag_size_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> usize {
    let mut n = 0;
    postorder(ts, |_| n += 1);
    n
}

/// Edges of the DAG; an ACI node contributes one edge per list position.
pub fn edge_count(t: &Term) -> usize {
    edge_count_of(std::iter::once(t))
}

pub fn edge_count_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> usize {
    let mut n = 0;
    postorder(ts, |t| n += t.children().len());
    n
}

/// Variable names occurring in a term.
pub fn vars(t: &Term) -> BTreeSet<Name> {
    vars_of(std::iter::once(t))
}

pub fn vars_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    let roots: Vec<&Term> = ts.into_iter().filter(|t| !t.is_ground()).collect();
    postorder(roots, |t| {
        if let TermKind::Var(n) = t.kind() {
            out.insert(n.clone());
        }
    });
    out
}

/// Atoms occurring in a term.
pub fn atoms_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    postorder(ts, |t| {
        if t.is_atom() {
            out.insert(t.clone());
        }
    });
    out
}

/// Normal form modulo ACI: nested sets flattened, duplicates removed, items sorted,
/// singleton sets collapsed.
pub fn normalize(t: &Term) -> Term {
    Normalizer::default().run(t)
}

/// Memoizing normalizer that also counts the elementary steps it performs.
#[derive(Default)]
pub struct Normalizer {
    memo: HashMap<u64, Term>,
    steps: u64,
}

impl Normalizer {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn run(&mut self, t: &Term) -> Term {
        self.steps += 1;
        if t.is_normalized() {
            return t.clone();
        }
        if let Some(done) = self.memo.get(&t.id()) {
            return done.clone();
        }
        let out = match t.kind() {
            TermKind::Atom(_) | TermKind::Var(_) | TermKind::Priv(_) => t.clone(),
            TermKind::Bin(op, a, b) => {
                let (a, b) = (self.run(a), self.run(b));
                Term::from_kind(TermKind::Bin(*op, a, b))
            }
            TermKind::Aci(items) => {
                let mut set = BTreeSet::new();
                for item in items {
                    let n = self.run(item);
                    match n.kind() {
                        TermKind::Aci(inner) => {
                            self.steps += inner.len() as u64;
                            set.extend(inner.iter().cloned());
                        }
                        _ => {
                            self.steps += 1;
                            set.insert(n);
                        }
                    }
                }
                build_set(set)
            }
        };
        self.memo.insert(t.id(), out.clone());
        out
    }
}

/// Normalized ACI term from a set of non-ACI normalized elements.
fn build_set(set: BTreeSet<Term>) -> Term {
    if set.len() == 1 {
        set.into_iter().next().unwrap()
    } else {
        Term::from_kind(TermKind::Aci(set.into_iter().collect()))
    }
}

/// Normal form of the ACI combination of `ts`. Errors on an empty input.
pub fn pairing(ts: &[Term]) -> Result<Term, TermError> {
    if ts.is_empty() {
        return Err(TermError::EmptyAci);
    }
    let mut norm = Normalizer::default();
    let mut set = BTreeSet::new();
    for t in ts {
        collect_elems(&norm.run(t), &mut set);
    }
    Ok(build_set(set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_term;

    fn p(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn interning_shares_nodes() {
        let a = Term::pair(Term::atom("a"), Term::atom("b"));
        let b = Term::pair(Term::atom("a"), Term::atom("b"));
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
        assert_ne!(a, Term::pair(Term::atom("b"), Term::atom("a")));
    }

    #[test]
    fn key_restrictions() {
        let a = Term::atom("a");
        let pa = Term::pair(a.clone(), a.clone());
        assert!(Term::aenc(a.clone(), pa.clone()).is_err());
        assert!(Term::private(pa.clone()).is_err());
        assert!(Term::sig(a.clone(), a.clone()).is_err());
        assert!(Term::sig(a.clone(), Term::private(Term::var("K")).unwrap()).is_ok());
        assert_eq!(Term::aci(vec![]), Err(TermError::EmptyAci));
    }

    #[test]
    fn rank_order() {
        let order = [
            "a",
            "b",
            "X",
            "priv(a)",
            "pair(a, a)",
            "senc(a, a)",
            "aenc(a, a)",
            "sig(a, priv(a))",
            "{a . b}",
        ];
        let ts: Vec<Term> = order.iter().map(|s| p(s)).collect();
        for w in ts.windows(2) {
            assert!(w[0] < w[1], "{} < {}", w[0], w[1]);
        }
    }

    #[test]
    fn sizes_of_shared_dag() {
        let t = p("pair(pair(a, b), pair(a, b))");
        assert_eq!(dag_size(&t), 4);
        assert_eq!(edge_count(&t), 4);
        let s = p("{a . a . b}");
        assert_eq!(dag_size(&s), 3);
        assert_eq!(edge_count(&s), 3);
    }

    #[test]
    fn quasi_subterms_skip_inner_sets() {
        let t = p("{a . {b . c}}");
        let q = quasi_subterms(&t);
        let s = subterms(&t);
        assert!(!q.contains(&p("{b . c}")));
        assert!(s.contains(&p("{b . c}")));
        assert_eq!(q.len(), 4);
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn normalize_flattens_sorts_dedupes() {
        let t = p("{a . {b . a . pair(a, b)} . pair({b . b}, a)}");
        let n = normalize(&t);
        assert_eq!(n.to_string(), "{a . b . pair(a, b) . pair(b, a)}");
        assert!(n.is_normalized());
        assert_eq!(normalize(&p("{a . a}")), p("a"));
    }

    #[test]
    fn pairing_collapses() {
        let a = p("a");
        assert_eq!(pairing(&[a.clone(), a.clone()]).unwrap(), a);
        assert_eq!(
            pairing(&[p("{b . a}"), p("c")]).unwrap().to_string(),
            "{a . b . c}"
        );
        assert!(pairing(&[]).is_err());
    }

    #[test]
    fn vars_and_atoms() {
        let t = p("senc({X . a}, priv(Y))");
        let v: Vec<String> = vars(&t).iter().map(|n| n.to_string()).collect();
        assert_eq!(v, ["X", "Y"]);
        assert_eq!(atoms_of([&t]).len(), 1);
    }
}
