//! Exhaustive enumeration of small normalized ground terms.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, LazyLock, Mutex};

use crate::deduction::Theory;
use crate::term::{dag_size, BinOp, Term, TermKind};

type CacheKey = (Vec<String>, usize, Theory);

static CACHE: LazyLock<Mutex<HashMap<CacheKey, Arc<Vec<Term>>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Every normalized ground term over `atoms` with DAG size at most `cap`, sorted by
/// DAG size and then by the canonical order. Under [`Theory::Dy`] ACI sets are left out.
pub fn ground_terms(atoms: &[Term], cap: usize, theory: Theory) -> Arc<Vec<Term>> {
    let mut names: Vec<String> = atoms.iter().map(|a| a.to_string()).collect();
    names.sort();
    names.dedup();
    let key = (names, cap, theory);
    if let Some(hit) = CACHE.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let out = Arc::new(build(atoms, cap, theory));
    CACHE.lock().unwrap().insert(key, out.clone());
    out
}

struct Entry {
    term: Term,
    /// Sorted ids of all subterms, the term included.
    sub: Vec<u64>,
}

fn union_len(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        n += 1;
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    n + (a.len() - i) + (b.len() - j)
}

fn merge(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut v: Vec<u64> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn build(atoms: &[Term], cap: usize, theory: Theory) -> Vec<Term> {
    let mut all: Vec<Entry> = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut add = |all: &mut Vec<Entry>, term: Term, mut sub: Vec<u64>| {
        if seen.insert(term.id()) {
            sub.push(term.id());
            sub.sort_unstable();
            all.push(Entry { term, sub });
        }
    };
    if cap == 0 {
        return Vec::new();
    }
    for a in atoms {
        add(&mut all, a.clone(), Vec::new());
    }
    if cap >= 2 {
        for i in 0..all.len() {
            let a = all[i].term.clone();
            let sub = all[i].sub.clone();
            add(&mut all, Term::private(a).unwrap(), sub);
        }
    }
    let mut fresh_from = 0;
    loop {
        let round_start = all.len();
        let n = round_start;
        for x in 0..n {
            for y in 0..n {
                if x < fresh_from && y < fresh_from {
                    continue;
                }
                if union_len(&all[x].sub, &all[y].sub) + 1 > cap {
                    continue;
                }
                for op in BinOp::ALL {
                    let key = &all[y].term;
                    let ok = match op {
                        BinOp::AEnc => key.is_atom(),
                        BinOp::Sig => key.is_priv(),
                        _ => true,
                    };
                    if ok {
                        let t =
                            Term::from_kind(TermKind::Bin(op, all[x].term.clone(), key.clone()));
                        let sub = merge(&all[x].sub, &all[y].sub);
                        add(&mut all, t, sub);
                    }
                }
            }
        }
        if theory == Theory::DyAci {
            let mut items: Vec<usize> = (0..n).filter(|&i| !all[i].term.is_aci()).collect();
            items.sort_by(|&a, &b| all[a].term.cmp(&all[b].term));
            let mut found = Vec::new();
            sets(
                &all,
                &items,
                0,
                &mut Vec::new(),
                &[],
                cap,
                fresh_from,
                &mut found,
            );
            for (members, sub) in found {
                let t = Term::from_kind(TermKind::Aci(
                    members.iter().map(|&i| all[i].term.clone()).collect(),
                ));
                add(&mut all, t, sub);
            }
        }
        if all.len() == round_start {
            break;
        }
        fresh_from = round_start;
    }
    let mut out: Vec<Term> = all.into_iter().map(|e| e.term).collect();
    out.sort_by_cached_key(|t| (dag_size(t), t.clone()));
    out
}

/// Sets of at least two items, in canonical order, with at least one item from the
/// latest round, whose DAG fits in `cap`.
#[allow(clippy::too_many_arguments)]
fn sets(
    all: &[Entry],
    items: &[usize],
    from: usize,
    chosen: &mut Vec<usize>,
    sub: &[u64],
    cap: usize,
    fresh_from: usize,
    out: &mut Vec<(Vec<usize>, Vec<u64>)>,
) {
    if chosen.len() >= 2 && chosen.iter().any(|&i| i >= fresh_from) {
        out.push((chosen.clone(), sub.to_vec()));
    }
    for k in from..items.len() {
        let i = items[k];
        if union_len(sub, &all[i].sub) + 1 > cap {
            continue;
        }
        let merged = merge(sub, &all[i].sub);
        chosen.push(i);
        sets(all, items, k + 1, chosen, &merged, cap, fresh_from, out);
        chosen.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Vec<Term> {
        ["a", "b", "c"].iter().map(|n| Term::atom(n)).collect()
    }

    #[test]
    fn counts_over_three_atoms() {
        // independent count of normalized ground terms by DAG size: 3, 12, 123, 2020
        assert_eq!(ground_terms(&abc(), 1, Theory::DyAci).len(), 3);
        assert_eq!(ground_terms(&abc(), 2, Theory::DyAci).len(), 15);
        assert_eq!(ground_terms(&abc(), 3, Theory::DyAci).len(), 138);
        assert_eq!(ground_terms(&abc(), 4, Theory::DyAci).len(), 2158);
    }

    #[test]
    fn dy_has_no_sets_and_all_are_normalized() {
        let ts = ground_terms(&abc(), 3, Theory::Dy);
        assert!(ts.iter().all(|t| !t.has_aci()));
        let ts = ground_terms(&abc(), 3, Theory::DyAci);
        assert!(ts.iter().all(|t| t.is_normalized() && t.is_ground()));
        assert!(ts.windows(2).all(|w| dag_size(&w[0]) <= dag_size(&w[1])));
    }
}
