use std::collections::BTreeSet;

use proptest::prelude::*;

use dyaci::projection::delta;
use dyaci::term::{
    dag_size, edge_count, elems, pairing, quasi_subterms, subterms, subterms_of, vars, Normalizer,
};
use dyaci::{
    check_model, derivable, normalize, parse_term, solve, ConstraintSystem, SolverConfig,
    Substitution, Term, Theory,
};

fn leaf(with_vars: bool) -> BoxedStrategy<Term> {
    let atoms = prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(Term::atom);
    if with_vars {
        prop_oneof![3 => atoms, 1 => prop_oneof![Just("X"), Just("Y")].prop_map(Term::var)].boxed()
    } else {
        atoms.boxed()
    }
}

fn term(with_vars: bool, aci: bool) -> BoxedStrategy<Term> {
    let key = leaf(with_vars);
    leaf(with_vars)
        .prop_recursive(4, 24, 3, move |inner| {
            let key = key.clone();
            let mut arms = vec![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Term::pair(a, b))
                    .boxed(),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Term::senc(a, b))
                    .boxed(),
                (inner.clone(), key.clone())
                    .prop_map(|(a, k)| Term::aenc(a, k).unwrap())
                    .boxed(),
                (inner.clone(), key.clone())
                    .prop_map(|(a, k)| Term::sig(a, Term::private(k).unwrap()).unwrap())
                    .boxed(),
                key.clone().prop_map(|k| Term::private(k).unwrap()).boxed(),
            ];
            if aci {
                arms.push(
                    prop::collection::vec(inner, 1..4)
                        .prop_map(|v| Term::aci(v).unwrap())
                        .boxed(),
                );
            }
            proptest::strategy::Union::new(arms)
        })
        .boxed()
}

fn open_term() -> BoxedStrategy<Term> {
    term(true, true)
}

fn ground_term() -> BoxedStrategy<Term> {
    term(false, true)
}

fn substitution() -> impl Strategy<Value = Substitution> {
    (ground_term(), ground_term())
        .prop_map(|(x, y)| [("X".into(), x), ("Y".into(), y)].into_iter().collect())
}

fn aci(v: Vec<Term>) -> Term {
    normalize(&Term::aci(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalize_is_idempotent(t in open_term()) {
        let n = normalize(&t);
        prop_assert!(n.is_normalized());
        prop_assert_eq!(normalize(&n), n);
    }

    #[test]
    fn aci_axioms(x in open_term(), y in open_term(), z in open_term()) {
        let inner = |a: &Term, b: &Term| Term::aci(vec![a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(aci(vec![x.clone(), inner(&y, &z)]), aci(vec![inner(&x, &y), z.clone()]));
        prop_assert_eq!(aci(vec![x.clone(), y.clone()]), aci(vec![y.clone(), x.clone()]));
        prop_assert_eq!(aci(vec![x.clone(), x.clone()]), normalize(&x));
    }

    #[test]
    fn elems_commute_with_normalize(t in open_term()) {
        let lifted: BTreeSet<Term> = elems(&t).iter().map(normalize).collect();
        prop_assert_eq!(elems(&normalize(&t)), lifted);
    }

    #[test]
    fn elems_within_subterms(t in open_term()) {
        let (e, q, s) = (elems(&t), quasi_subterms(&t), subterms(&t));
        prop_assert!(e.is_subset(&q));
        prop_assert!(q.is_subset(&s));
    }

    #[test]
    fn normalize_never_grows(t in open_term()) {
        prop_assert!(dag_size(&normalize(&t)) <= dag_size(&t));
    }

    #[test]
    fn normalized_terms_have_no_hidden_subterms(t in open_term()) {
        let n = normalize(&t);
        prop_assert_eq!(quasi_subterms(&n), subterms(&n));
        prop_assert!(edge_count(&n) < dag_size(&n).pow(2));
        prop_assert!(quasi_subterms(&n).iter().all(Term::is_normalized));
    }

    #[test]
    fn normalize_work_is_bounded(t in open_term()) {
        let mut norm = Normalizer::default();
        norm.run(&t);
        let size = (dag_size(&t) + edge_count(&t)) as u64;
        prop_assert!(norm.steps() <= size * size + 1);
    }

    #[test]
    fn pairing_duality(ts in prop::collection::vec(ground_term(), 1..4)) {
        let p = pairing(&ts).unwrap();
        let each: Vec<Term> = ts.iter().map(normalize).collect();
        prop_assert!(derivable(&each, &p, Theory::DyAci).unwrap());
        for u in &each {
            prop_assert!(derivable(std::slice::from_ref(&p), u, Theory::DyAci).unwrap());
        }
    }

    #[test]
    fn pairing_of_union(a in prop::collection::vec(ground_term(), 1..3), b in prop::collection::vec(ground_term(), 1..3)) {
        let all: Vec<Term> = a.iter().chain(&b).cloned().collect();
        let split = pairing(&[pairing(&a).unwrap(), pairing(&b).unwrap()]).unwrap();
        prop_assert_eq!(pairing(&all).unwrap(), split);
    }

    #[test]
    fn subterms_of_instances(t in open_term(), sigma in substitution()) {
        if let Ok(applied) = sigma.apply(&t) {
            let mut expected: BTreeSet<Term> = subterms(&t).iter().map(|s| sigma.apply(s).unwrap()).collect();
            let images: Vec<Term> = vars(&t).iter().map(|v| sigma.get(v).unwrap().clone()).collect();
            expected.extend(subterms_of(&images));
            prop_assert_eq!(subterms(&applied), expected);
        }
    }

    #[test]
    fn substitution_commutes_with_normalize(t in open_term(), sigma in substitution()) {
        if let Ok(direct) = sigma.apply_normalized(&t) {
            let via = sigma.normalized().apply_normalized(&normalize(&t)).unwrap();
            prop_assert_eq!(direct, via);
        }
    }

    #[test]
    fn order_is_total_and_strict(x in open_term(), y in open_term(), z in open_term()) {
        use std::cmp::Ordering::*;
        prop_assert_eq!(x.cmp(&y) == Equal, x == y);
        prop_assert_eq!(x.cmp(&y), y.cmp(&x).reverse());
        if x < y && y < z {
            prop_assert!(x < z);
        }
    }

    #[test]
    fn render_parse_round_trip(t in open_term()) {
        let n = normalize(&t);
        prop_assert_eq!(parse_term(&n.to_string()).unwrap(), n.clone());
        prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn delta_is_small_and_plain(t in open_term()) {
        let n = normalize(&t);
        let d = delta(&n);
        prop_assert!(!d.has_aci());
        prop_assert!(dag_size(&d) <= 2 * dag_size(&n));
        prop_assert_eq!(delta(&d), d);
    }

    #[test]
    fn derivability_is_monotone(e in prop::collection::vec(ground_term(), 1..3), extra in ground_term(), t in ground_term()) {
        let e: Vec<Term> = e.iter().map(normalize).collect();
        let t = normalize(&t);
        if derivable(&e, &t, Theory::DyAci).unwrap() {
            let mut bigger = e.clone();
            bigger.push(normalize(&extra));
            prop_assert!(derivable(&bigger, &t, Theory::DyAci).unwrap());
        }
    }

    #[test]
    fn derivability_is_transitive(e in prop::collection::vec(ground_term(), 1..3), u in ground_term(), t in ground_term()) {
        let e: Vec<Term> = e.iter().map(normalize).collect();
        let (u, t) = (normalize(&u), normalize(&t));
        if derivable(&e, &u, Theory::DyAci).unwrap() {
            let mut with_u = e.clone();
            with_u.push(u);
            prop_assert_eq!(derivable(&with_u, &t, Theory::DyAci).unwrap(), derivable(&e, &t, Theory::DyAci).unwrap());
        }
    }

    #[test]
    fn encoded_equality_holds_iff_equal(x in ground_term(), y in ground_term()) {
        let c = dyaci::protocol::encode_equality(&x, &y, &dyaci::protocol::eq_key());
        let knowledge: Vec<Term> = c.knowledge.iter().map(normalize).collect();
        let holds = derivable(&knowledge, &normalize(&c.target), Theory::DyAci).unwrap();
        prop_assert_eq!(holds, normalize(&x) == normalize(&y));
    }
}

fn small_system() -> impl Strategy<Value = ConstraintSystem> {
    let side = term(true, true).prop_filter("small", |t| dag_size(t) <= 4);
    prop::collection::vec((prop::collection::vec(side.clone(), 1..3), side), 1..3).prop_map(|cs| {
        ConstraintSystem::new(
            cs.into_iter()
                .map(|(k, t)| dyaci::Constraint::new(k, t))
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_is_deterministic_and_normalization_blind(s in small_system()) {
        let config = SolverConfig::default();
        let a = solve(&s, &config).unwrap();
        let b = solve(&s, &config).unwrap();
        let c = solve(&s.normalize(), &config).unwrap();
        prop_assert_eq!(&a.outcome, &b.outcome);
        prop_assert_eq!(a.outcome.is_sat(), c.outcome.is_sat());
        if let Some(m) = a.outcome.model() {
            prop_assert!(check_model(&s, m, Theory::DyAci).unwrap());
            prop_assert!(check_model(&s, &m.normalized(), Theory::DyAci).unwrap());
            // values are built from pool elements, none of them a set
            for (v, chosen) in &a.witness {
                prop_assert!(chosen.iter().all(|p| !p.is_aci()), "{} from {:?}", v, chosen);
            }
        }
    }
}
