mod common;

use std::collections::BTreeSet;

use common::*;
use nullcqa_core::constraints::parse_constraints;
use nullcqa_core::relational::{active_domain, Schema};
use nullcqa_core::repair::{delta, leq, lt, repairs, verify_repair, RepairError, RepairOptions};
use nullcqa_core::satisfaction::is_consistent;
use proptest::prelude::*;

fn opts() -> RepairOptions {
    RepairOptions::default()
}

#[test]
fn referential_constraint_inserts_null_or_deletes() {
    let f = fixture("referential_insert_or_delete");
    let reps = repairs(&f.db, &f.ic, &opts()).unwrap();
    let expected = instances(&f.schema, &["P(a,null). P(b,c). R(a,b). R(b,null).", "P(a,null). R(a,b)."]);
    assert_eq!(reps.instance_set(), expected);
    let deltas: BTreeSet<_> = reps.repairs.iter().map(|r| r.delta.clone()).collect();
    assert_eq!(deltas, instances(&f.schema, &["R(b,null).", "P(b,c)."]));

    // inserting a concrete value instead of null is dominated
    let concrete = facts(&f.schema, "P(a,null). P(b,c). R(a,b). R(b,d).");
    assert!(!verify_repair(&f.db, &f.ic, &concrete, &opts()).unwrap());
    let null_insert = facts(&f.schema, "P(a,null). P(b,c). R(a,b). R(b,null).");
    assert!(lt(&null_insert, &concrete, &f.db));
}

#[test]
fn cyclic_inclusion_has_four_repairs() {
    let f = fixture("cyclic_inclusion");
    let reps = repairs(&f.db, &f.ic, &opts()).unwrap();
    let expected = instances(
        &f.schema,
        &[
            "P(a,b). P(null,a). T(c). P(null,c). T(a).",
            "P(a,b). P(null,a). T(a).",
            "P(null,a). T(c). P(null,c).",
            "P(null,a).",
        ],
    );
    assert_eq!(reps.instance_set(), expected);
    let deltas: BTreeSet<_> = reps.repairs.iter().map(|r| r.delta.clone()).collect();
    assert_eq!(
        deltas,
        instances(&f.schema, &["T(a). P(null,c).", "T(a). T(c).", "P(a,b). P(null,c).", "P(a,b). T(c)."])
    );
}

#[test]
fn cyclic_inclusion_non_repairs() {
    let f = fixture("cyclic_inclusion");
    // As printed, this candidate violates the referential constraint for T(c).
    let as_printed = facts(&f.schema, "P(a,b). P(null,a). T(c). P(c,a).");
    assert!(!is_consistent(&as_printed, &f.ic).unwrap());
    assert!(!verify_repair(&f.db, &f.ic, &as_printed, &opts()).unwrap());

    // A consistent variant that fills the null of the first repair with a
    // concrete value: satisfies the constraints but is dominated.
    let filled = facts(&f.schema, "P(a,b). P(null,a). T(c). P(a,c). T(a).");
    assert!(is_consistent(&filled, &f.ic).unwrap());
    assert_eq!(delta(&f.db, &filled), facts(&f.schema, "T(a). P(a,c)."));
    let first = facts(&f.schema, "P(a,b). P(null,a). T(c). P(null,c). T(a).");
    assert!(lt(&first, &filled, &f.db));
    assert!(!verify_repair(&f.db, &f.ic, &filled, &opts()).unwrap());
}

#[test]
fn key_and_foreign_key_repairs() {
    let f = fixture("key_and_foreign_key");
    let reps = repairs(&f.db, &f.ic, &opts()).unwrap();
    let expected = instances(
        &f.schema,
        &[
            "R(a,b). S(e,f). S(null,a). R(f,null).",
            "R(a,c). S(e,f). S(null,a). R(f,null).",
            "R(a,b). S(null,a).",
            "R(a,c). S(null,a).",
        ],
    );
    assert_eq!(reps.instance_set(), expected);
    for r in &expected {
        assert!(verify_repair(&f.db, &f.ic, r, &opts()).unwrap());
    }
    // a concrete filler for the foreign key is never a repair
    let concrete = facts(&f.schema, "R(a,b). S(e,f). S(null,a). R(f,a).");
    assert!(!verify_repair(&f.db, &f.ic, &concrete, &opts()).unwrap());
}

#[test]
fn non_generic_check_with_referential() {
    let s = Schema::from_arities([("P", 2), ("Q", 2)]);
    let ic = parse_constraints("P(x,y) -> exists z: Q(x,z).\nQ(x,y) -> y != 'b'.", &s).unwrap();
    let d = facts(&s, "Q(a,b). P(a,c).");
    let reps = repairs(&d, &ic, &opts()).unwrap();
    assert_eq!(reps.instance_set(), instances(&s, &["", "P(a,c). Q(a,null)."]));
    let d1 = facts(&s, "");
    let d2 = facts(&s, "P(a,c). Q(a,null).");
    assert_eq!(delta(&d, &d2), facts(&s, "Q(a,b). Q(a,null)."));
    assert!(!leq(&d1, &d2, &d) && !leq(&d2, &d1, &d));
}

#[test]
fn consistent_database_is_the_only_repair() {
    let f = fixture("inclusion_with_nulls");
    let reps = repairs(&f.db, &f.ic, &opts()).unwrap();
    assert_eq!(reps.instance_set(), BTreeSet::from([f.db.clone()]));
    assert!(reps.repairs[0].delta.is_empty());
}

#[test]
fn general_constraints_are_enumerated() {
    let s = Schema::from_arities([("P", 2), ("Q", 3)]);
    let ic = parse_constraints("P(x,y) -> exists z: Q(x,z,z).", &s).unwrap();
    let d = facts(&s, "P(a,b).");
    let reps = repairs(&d, &ic, &opts()).unwrap();
    assert_eq!(reps.instance_set(), instances(&s, &["", "P(a,b). Q(a,null,null)."]));
}

#[test]
fn verify_rejects_inconsistent_and_conflicting() {
    let f = fixture("key_and_foreign_key");
    assert!(!verify_repair(&f.db, &f.ic, &f.db, &opts()).unwrap());
    let s = Schema::from_arities([("P", 1), ("Q", 2)]);
    let ic = parse_constraints("P(x) -> exists y: Q(x,y).\nQ(x,y), isnull(y) -> false.", &s).unwrap();
    let d = facts(&s, "P(a).");
    assert!(matches!(verify_repair(&d, &ic, &d, &opts()), Err(RepairError::ConflictingIcSet(_))));
}

fn tiny() -> GenOptions {
    GenOptions {
        constants: 2,
        max_facts: 3,
        max_constraints: 2,
        ..GenOptions::default()
    }
}

#[test]
fn enumeration_matches_full_universe_search() {
    let mut rng = rng(0x5eed_0001);
    let mut checked = 0;
    for _ in 0..400 {
        let case = random_case(&mut rng, &tiny());
        if !case.is_non_conflicting() {
            continue;
        }
        if all_atoms(&case.schema, &active_domain(&case.db, &case.ic)).len() > 12 {
            continue;
        }
        let got = repairs(&case.db, &case.ic, &opts()).unwrap().instance_set();
        let want = brute_force_repairs(&case.schema, &case.db, &case.ic);
        assert_eq!(got, want, "{case:?}");
        checked += 1;
    }
    assert!(checked >= 100, "only {checked} cases fit the oracle");
}

#[test]
fn null_free_cases_match_classical_repairs() {
    let mut rng = rng(0x5eed_0002);
    let gen = GenOptions {
        nulls: false,
        rics: false,
        nncs: false,
        ..GenOptions::default()
    };
    let mut checked = 0;
    while checked < 100 {
        let case = random_case(&mut rng, &gen);
        let mut dom = active_domain(&case.db, &case.ic);
        dom.remove(&nullcqa_core::relational::Value::Null);
        if all_atoms(&case.schema, &dom).len() > 14 {
            continue;
        }
        let got = repairs(&case.db, &case.ic, &opts()).unwrap();
        let want = classical_repairs(&case.schema, &case.db, &case.ic);
        assert_eq!(got.instance_set(), want, "{case:?}");
        assert!(got.instances().all(|r| !r.iter().any(|a| a.has_null())));
        checked += 1;
    }
}

#[test]
fn repairs_are_consistent_incomparable_and_in_domain() {
    let mut rng = rng(0x5eed_0003);
    let mut checked = 0;
    while checked < 150 {
        let case = random_case(&mut rng, &GenOptions::default());
        if !case.is_non_conflicting() {
            continue;
        }
        let reps = match repairs(&case.db, &case.ic, &opts()) {
            Ok(r) => r,
            Err(RepairError::CandidateSpaceTooLarge { .. }) => continue,
            Err(e) => panic!("{e} {case:?}"),
        };
        assert!(!reps.is_empty(), "{case:?}");
        let dom = active_domain(&case.db, &case.ic);
        for r in reps.instances() {
            assert!(r.values().is_subset(&dom), "{case:?}");
            assert!(is_consistent(r, &case.ic).unwrap(), "{case:?}");
            assert!(classical_holds(r, &case.ic) || r.iter().any(|a| a.has_null()), "{case:?}");
            for o in reps.instances() {
                assert!(!lt(o, r, &case.db), "{case:?}");
            }
        }
        checked += 1;
    }
}

fn small_instance(schema: &'static [(&'static str, usize)]) -> impl Strategy<Value = nullcqa_core::relational::Instance> {
    let values = prop_oneof![Just("a"), Just("b"), Just("null")];
    let atom = (0..schema.len(), prop::collection::vec(values, 2)).prop_map(move |(p, args)| {
        let (name, arity) = schema[p];
        nullcqa_core::relational::atom(name, &args[..arity])
    });
    prop::collection::vec(atom, 0..5).prop_map(|v| v.into_iter().collect())
}

const SCHEMA: &[(&str, usize)] = &[("P", 2), ("T", 1)];

proptest! {
    #[test]
    fn order_is_reflexive(d in small_instance(SCHEMA), x in small_instance(SCHEMA)) {
        prop_assert!(leq(&x, &x, &d));
        prop_assert!(!lt(&x, &x, &d));
    }

    #[test]
    fn strict_order_is_asymmetric(d in small_instance(SCHEMA), x in small_instance(SCHEMA), y in small_instance(SCHEMA)) {
        prop_assert!(!(lt(&x, &y, &d) && lt(&y, &x, &d)));
    }

    #[test]
    fn smaller_difference_is_strictly_below(d in small_instance(SCHEMA), x in small_instance(SCHEMA)) {
        // removing one change from Δ(d, x) gives an instance strictly below x
        let dx = delta(&d, &x);
        let first = dx.iter().next().cloned();
        if let Some(a) = first {
            let mut y = x.clone();
            if !y.remove(&a) {
                y.insert(a);
            }
            prop_assert!(lt(&y, &x, &d));
        }
    }

    #[test]
    fn delta_is_symmetric(x in small_instance(SCHEMA), y in small_instance(SCHEMA)) {
        prop_assert_eq!(delta(&x, &y), delta(&y, &x));
        prop_assert!(delta(&x, &x).is_empty());
    }
}
