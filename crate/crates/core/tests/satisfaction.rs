mod common;

use common::*;
use nullcqa_core::constraints::{parse_constraints, relevant_attributes, ConstraintKind, ConstraintSet};
use nullcqa_core::relational::{Atom, Instance, Position, Schema, Value};
use nullcqa_core::satisfaction::{is_consistent, project, satisfies, satisfies_all, transform};
use proptest::prelude::*;
use rand::seq::IndexedRandom;

fn setup(arities: &[(&str, usize)], ics: &str) -> (Schema, ConstraintSet) {
    let schema = Schema::from_arities(arities.iter().copied());
    let ic = parse_constraints(ics, &schema).unwrap();
    (schema, ic)
}

fn verdict(ic: &ConstraintSet, label: &str, d: &Instance) -> bool {
    satisfies(d, ic.get(label).unwrap()).unwrap().satisfied
}

fn positions(pairs: &[(&str, usize)]) -> std::collections::BTreeSet<Position> {
    pairs.iter().map(|(p, i)| Position::new(*p, *i)).collect()
}

#[test]
fn null_in_referenced_attribute_discharges() {
    let (schema, ic) = setup(&[("P", 3), ("R", 2)], "yz: P(x,y,z) -> R(y,z). xy: P(x,y,z) -> R(x,y).");
    let d = facts(&schema, "P(a,b,null).");
    assert!(verdict(&ic, "yz", &d));
    assert!(!verdict(&ic, "xy", &d));
    assert_eq!(relevant_attributes(ic.get("yz").unwrap()), positions(&[("P", 2), ("P", 3), ("R", 1), ("R", 2)]));
}

#[test]
fn join_and_comparison_relevance() {
    let (schema, ic) = setup(
        &[("P", 3), ("R", 2)],
        "psi: P(x,y,z) -> R(x,y). gamma: P(x,y,z), R(z,w) -> exists v: R(x,v) | w > 3.",
    );
    assert_eq!(relevant_attributes(ic.get("psi").unwrap()), positions(&[("P", 1), ("P", 2), ("R", 1), ("R", 2)]));
    assert_eq!(relevant_attributes(ic.get("gamma").unwrap()), positions(&[("P", 1), ("P", 3), ("R", 1), ("R", 2)]));

    let d = facts(&schema, "P(a,b,a). P(b,c,a). R(a,5). R(a,2).");
    let p = project(&d, &relevant_attributes(ic.get("psi").unwrap()));
    let ab = vec![Value::sym("a"), Value::sym("b")];
    let bc = vec![Value::sym("b"), Value::sym("c")];
    assert_eq!(p.relation("P").unwrap().tuples, [ab, bc].into_iter().collect());
    assert_eq!(p.relation("R").unwrap().tuples.len(), 2);
    assert_eq!(project(&d, &relevant_attributes(ic.get("gamma").unwrap())).relation("P").unwrap().positions, [1, 3]);
    // nothing in R matches P's first two columns
    assert!(!verdict(&ic, "psi", &d));
    // x = b has no R(b, _) and R(a, 2) fails the comparison
    let v = satisfies(&d, ic.get("gamma").unwrap()).unwrap();
    assert!(!v.satisfied);
    assert!(v.violations.iter().all(|val| val["x"] == Value::sym("b") && val["w"] == Value::Integer(2)));
}

#[test]
fn universal_and_referential_with_nulls() {
    let (schema, ic) = setup(&[("P", 3), ("R", 2), ("T", 1)], "a: P(x,y,z) -> R(x,y). b: T(x) -> exists y, z: P(x,y,z).");
    let mut d = facts(&schema, "P(a,d,e). P(b,null,g). R(a,d). T(b).");
    assert!(verdict(&ic, "a", &d));
    assert!(verdict(&ic, "b", &d));
    assert!(is_consistent(&d, &ic).unwrap());
    let b = transform(ic.get("b").unwrap());
    assert_eq!(b.to_string(), "T^A(x) -> isnull(x) | P^A(x)");

    d.insert(Atom::new("P", vec![Value::sym("f"), Value::sym("d"), Value::Null]));
    assert!(!verdict(&ic, "a", &d));
    assert!(verdict(&ic, "b", &d));
}

#[test]
fn nulls_join_as_constants() {
    let (schema, ic) = setup(&[("P1", 3), ("P2", 2), ("Q", 3)], "psi: P1(x,y,w), P2(y,z) -> exists u: Q(x,z,u).");
    assert_eq!(
        relevant_attributes(ic.get("psi").unwrap()),
        positions(&[("P1", 1), ("P1", 2), ("P2", 1), ("P2", 2), ("Q", 1), ("Q", 2)])
    );
    let d = facts(
        &schema,
        "P1(a,b,c). P1(d,null,c). P1(b,e,null). P1(null,b,b).
         P2(b,a). P2(e,c). P2(d,null). P2(null,b).
         Q(a,a,c). Q(b,null,c). Q(b,c,d). Q(null,c,a).",
    );
    assert!(verdict(&ic, "psi", &d));
    let t = transform(ic.get("psi").unwrap());
    assert_eq!(t.guards, ["x", "y", "z"]);
    assert!(t.is_universal());
    // without the Q(b,c,_) witness the join through e fails
    let mut broken = d.clone();
    broken.remove(&Atom::new("Q", vec![Value::sym("b"), Value::sym("c"), Value::sym("d")]));
    assert!(!verdict(&ic, "psi", &broken));
}

#[test]
fn repeated_existential_may_be_null() {
    let (schema, ic) = setup(&[("P", 2), ("Q", 3)], "psi: P(x,y) -> exists z: Q(x,z,z).");
    assert_eq!(relevant_attributes(ic.get("psi").unwrap()), positions(&[("P", 1), ("Q", 1), ("Q", 2), ("Q", 3)]));
    let t = transform(ic.get("psi").unwrap());
    assert_eq!(t.existentials, ["z"]);
    assert_eq!(t.guards, ["x"]);
    let d = facts(&schema, "P(a,b). P(null,c). Q(a,null,null).");
    assert!(verdict(&ic, "psi", &d));
    assert!(!verdict(&ic, "psi", &facts(&schema, "P(a,b). Q(a,null,b).")));
}

#[test]
fn key_foreign_key_database_is_inconsistent() {
    let f = fixture("key_and_foreign_key");
    let report = satisfies_all(&f.db, &f.ic).unwrap();
    assert!(!report.consistent);
    let violated: Vec<&str> = report.violated().map(|v| v.label.as_str()).collect();
    assert_eq!(violated, ["key", "fk"]);
    for repair in ["R(a,b). S(e,f). S(null,a). R(f,null).", "R(a,c). S(null,a)."] {
        assert!(is_consistent(&facts(&f.schema, repair), &f.ic).unwrap());
    }
}

#[test]
fn null_free_satisfaction_is_classical() {
    let mut rng = rng(0x5eed_0301);
    let opts = GenOptions {
        nulls: false,
        ..GenOptions::default()
    };
    for _ in 0..500 {
        let case = random_case(&mut rng, &opts);
        assert_eq!(is_consistent(&case.db, &case.ic).unwrap(), classical_holds(&case.db, &case.ic), "{case:?}");
    }
}

#[test]
fn violations_have_non_null_guards() {
    let mut rng = rng(0x5eed_0302);
    for _ in 0..500 {
        let case = random_case(&mut rng, &GenOptions::default());
        for c in case.ic.iter().filter(|c| c.kind != ConstraintKind::Nnc) {
            let guards = transform(c).guards;
            for val in satisfies(&case.db, c).unwrap().violations {
                assert!(guards.iter().all(|g| !val[g].is_null()), "{c} {case:?}");
            }
        }
    }
}

/// Overwrites every position outside `relevant`.
fn scramble(d: &Instance, relevant: &std::collections::BTreeSet<Position>, values: &[Value], rng: &mut rand_chacha::ChaCha8Rng) -> Instance {
    d.iter()
        .map(|a| {
            let args = a
                .args
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if relevant.contains(&Position::new(&a.predicate, i + 1)) {
                        v.clone()
                    } else {
                        values.choose(rng).unwrap().clone()
                    }
                })
                .collect();
            Atom::new(a.predicate.clone(), args)
        })
        .collect()
}

#[test]
fn irrelevant_positions_do_not_matter() {
    let mut rng = rng(0x5eed_0303);
    let values = [Value::Null, Value::sym("a"), Value::sym("z")];
    for _ in 0..500 {
        let case = random_case(&mut rng, &GenOptions::default());
        for c in case.ic.iter() {
            let relevant = relevant_attributes(c);
            let before = satisfies(&case.db, c).unwrap().satisfied;
            let after = satisfies(&scramble(&case.db, &relevant, &values, &mut rng), c).unwrap().satisfied;
            assert_eq!(before, after, "{c} {case:?}");
        }
    }
}

fn small_instance() -> impl Strategy<Value = Instance> {
    let value = prop_oneof![Just("a"), Just("b"), Just("null")];
    let atom = (0..2usize, prop::collection::vec(value, 2)).prop_map(|(p, args)| {
        if p == 0 {
            nullcqa_core::relational::atom("P", &args)
        } else {
            nullcqa_core::relational::atom("R", &args[..1])
        }
    });
    prop::collection::vec(atom, 0..6).prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn adding_nulls_to_the_referencing_side_never_violates(d in small_instance()) {
        // the referencing column is the only relevant position of P
        let (_, ic) = setup(&[("P", 2), ("R", 1)], "fk: P(x,y) -> R(x).");
        let nulled: Instance = d
            .iter()
            .map(|a| if a.predicate == "P" { Atom::new("P", vec![Value::Null, a.args[1].clone()]) } else { a.clone() })
            .collect();
        prop_assert!(verdict(&ic, "fk", &nulled));
    }

    #[test]
    fn inclusion_holds_iff_every_non_null_key_is_present(d in small_instance()) {
        let (_, ic) = setup(&[("P", 2), ("R", 1)], "fk: P(x,y) -> R(x).");
        let expected = d.relation("P").all(|a| a.args[0].is_null() || d.contains(&Atom::new("R", vec![a.args[0].clone()])));
        prop_assert_eq!(verdict(&ic, "fk", &d), expected);
    }
}
