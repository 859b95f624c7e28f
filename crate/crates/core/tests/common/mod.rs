//! Helpers shared by the integration test targets: fixture loading, a seeded
//! generator of small random cases, and brute-force oracles that do not go
//! through the library's own search.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use nullcqa_core::constraints::{
    is_ric_acyclic, non_conflicting, parse_constraints, Builtin, ConstraintKind, ConstraintSet,
    Term,
};
use nullcqa_core::relational::{active_domain, parse_instance, Atom, Instance, Schema, Value};
use nullcqa_core::repair::lt;
use nullcqa_core::satisfaction::is_consistent;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub struct Fixture {
    pub schema: Schema,
    pub ic: ConstraintSet,
    pub db: Instance,
}

pub fn fixture(name: &str) -> Fixture {
    let dir = fixture_dir(name);
    let read = |f: &str| std::fs::read_to_string(dir.join(f)).unwrap_or_else(|e| panic!("{name}/{f}: {e}"));
    let schema = Schema::parse(&read("schema.txt")).unwrap();
    let ic = parse_constraints(&read("constraints.txt"), &schema).unwrap();
    let db = parse_instance(&read("facts.txt"), &schema).unwrap();
    Fixture { schema, ic, db }
}

pub fn facts(schema: &Schema, text: &str) -> Instance {
    parse_instance(text, schema).unwrap()
}

pub fn instances(schema: &Schema, texts: &[&str]) -> BTreeSet<Instance> {
    texts.iter().map(|t| facts(schema, t)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    /// Number of symbolic constants, drawn from `a`, `b`, `c`.
    pub constants: usize,
    pub max_facts: usize,
    pub max_constraints: usize,
    pub nulls: bool,
    pub rics: bool,
    pub nncs: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            constants: 3,
            max_facts: 4,
            max_constraints: 3,
            nulls: true,
            rics: true,
            nncs: true,
        }
    }
}

#[derive(Clone)]
pub struct Case {
    pub schema: Schema,
    pub ic: ConstraintSet,
    pub db: Instance,
}

impl fmt::Debug for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\n--- schema\n{}--- constraints\n{}--- facts\n{}", self.schema.render(), self.ic.render(), self.db.render())
    }
}

impl Case {
    pub fn is_ric_acyclic(&self) -> bool {
        is_ric_acyclic(&self.ic).acyclic
    }

    pub fn is_non_conflicting(&self) -> bool {
        non_conflicting(&self.ic).non_conflicting
    }
}

const NAMES: [&str; 2] = ["P", "Q"];
const CONSTANTS: [&str; 3] = ["a", "b", "c"];

fn vars(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn atom_text(p: &str, terms: &[String]) -> String {
    format!("{p}({})", terms.join(","))
}

/// One constraint over the given predicates, or `None` when the template
/// does not fit the drawn arities.
fn random_constraint(rng: &mut ChaCha8Rng, preds: &[(&str, usize)], opts: &GenOptions) -> Option<String> {
    let &(a, na) = preds.choose(rng)?;
    let &(b, nb) = preds.choose(rng)?;
    let xs = vars("x", na);
    let pick = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> { (0..n).map(|_| xs.choose(rng).unwrap().clone()).collect() };
    let c = CONSTANTS[rng.random_range(0..opts.constants)];
    let mut templates = vec![0, 1, 2, 3, 4, 5];
    if opts.rics {
        templates.extend([6, 6]);
    }
    if opts.nncs {
        templates.push(7);
    }
    Some(match *templates.choose(rng)? {
        // inclusion
        0 => format!("{} -> {}.", atom_text(a, &xs), atom_text(b, &pick(rng, nb))),
        // key / functional dependency
        1 if na == 2 => format!("{a}(x,y), {a}(x,z) -> y = z."),
        // check constraint against a constant
        2 => format!("{} -> {} != '{c}'.", atom_text(a, &xs), xs.choose(rng)?),
        // constant in an antecedent atom
        3 => {
            let mut t = xs.clone();
            let i = rng.random_range(0..na);
            t[i] = format!("'{c}'");
            let rest: Vec<String> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.clone()).collect();
            if rest.is_empty() || nb > rest.len() {
                format!("{} -> false.", atom_text(a, &t))
            } else {
                format!("{} -> {}.", atom_text(a, &t), atom_text(b, &rest[..nb]))
            }
        }
        // disjunctive inclusion
        4 => format!(
            "{} -> {} | {}.",
            atom_text(a, &xs),
            atom_text(b, &pick(rng, nb)),
            atom_text(b, &pick(rng, nb))
        ),
        // join denial
        5 if na == 2 => format!("{a}(x,y), {} -> false.", atom_text(b, &["y".to_string(), "w".to_string()][..nb])),
        // referential
        6 if nb == 2 => {
            let mut t = vec![xs.choose(rng)?.clone(), "z".to_string()];
            if rng.random_bool(0.5) {
                t.swap(0, 1);
            }
            format!("{} -> exists z: {}.", atom_text(a, &xs), atom_text(b, &t))
        }
        7 => format!("{}, isnull({}) -> false.", atom_text(a, &xs), xs.choose(rng)?),
        _ => return None,
    })
}

pub fn random_case(rng: &mut ChaCha8Rng, opts: &GenOptions) -> Case {
    loop {
        let n_preds = rng.random_range(1..=2);
        let preds: Vec<(&str, usize)> = (0..n_preds).map(|i| (NAMES[i], rng.random_range(1..=2))).collect();
        let schema = Schema::from_arities(preds.iter().copied());

        let mut text = String::new();
        let n_ic = rng.random_range(1..=opts.max_constraints);
        let mut made = 0;
        for _ in 0..20 {
            if made == n_ic {
                break;
            }
            if let Some(c) = random_constraint(rng, &preds, opts) {
                made += 1;
                text.push_str(&format!("c{made}: {c}\n"));
            }
        }
        let Ok(ic) = parse_constraints(&text, &schema) else { continue };

        let mut values: Vec<Value> = CONSTANTS[..opts.constants].iter().map(|c| Value::sym(*c)).collect();
        if opts.nulls {
            values.push(Value::Null);
        }
        let mut db = Instance::new();
        for _ in 0..rng.random_range(0..=opts.max_facts) {
            let &(p, n) = preds.choose(rng).unwrap();
            let args = (0..n).map(|_| values.choose(rng).unwrap().clone()).collect();
            db.insert(Atom::new(p, args));
        }
        return Case { schema, ic, db };
    }
}

/// Every atom over the schema with values from `domain`.
pub fn all_atoms(schema: &Schema, domain: &BTreeSet<Value>) -> Vec<Atom> {
    let dom: Vec<&Value> = domain.iter().collect();
    let mut out = Vec::new();
    if dom.is_empty() {
        return out;
    }
    for p in schema.predicates() {
        let mut idx = vec![0usize; p.arity];
        loop {
            out.push(Atom::new(p.name.clone(), idx.iter().map(|&i| dom[i].clone()).collect()));
            let mut k = 0;
            while k < p.arity {
                idx[k] += 1;
                if idx[k] < dom.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == p.arity {
                break;
            }
        }
    }
    out
}

fn subsets(atoms: &[Atom]) -> impl Iterator<Item = Instance> + '_ {
    assert!(atoms.len() <= 16, "oracle universe too large: {} atoms", atoms.len());
    (0u32..(1 << atoms.len())).map(move |m| {
        (0..atoms.len()).filter(|i| m & (1 << i) != 0).map(|i| atoms[i].clone()).collect()
    })
}

/// Repairs by exhaustive search over every instance built from the active
/// domain, minimality checked pairwise with `<_D`.
pub fn brute_force_repairs(schema: &Schema, d: &Instance, ic: &ConstraintSet) -> BTreeSet<Instance> {
    let universe = all_atoms(schema, &active_domain(d, ic));
    let mut consistent: Vec<(usize, Instance)> = subsets(&universe)
        .filter(|i| is_consistent(i, ic).unwrap())
        .map(|i| (d.atoms().symmetric_difference(i.atoms()).count(), i))
        .collect();
    consistent.sort();
    consistent
        .iter()
        .filter(|(_, c)| !consistent.iter().any(|(_, o)| lt(o, c, d)))
        .map(|(_, c)| c.clone())
        .collect()
}

fn unify(terms: &[Term], args: &[Value], val: &BTreeMap<String, Value>) -> Option<BTreeMap<String, Value>> {
    let mut out = val.clone();
    for (t, v) in terms.iter().zip(args) {
        match t {
            Term::Const(c) if c != v => return None,
            Term::Const(_) => {}
            Term::Var(x) => {
                if out.get(x).is_some_and(|b| b != v) {
                    return None;
                }
                out.insert(x.clone(), v.clone());
            }
        }
    }
    Some(out)
}

fn builtin_true(b: &Builtin, val: &BTreeMap<String, Value>) -> bool {
    let get = |t: &Term| match t {
        Term::Var(v) => val[v].clone(),
        Term::Const(c) => c.clone(),
    };
    b.op.apply(&get(&b.left), &get(&b.right)).unwrap()
}

/// Textbook first-order satisfaction with null as an ordinary constant and
/// NOT NULL constraints read literally. Independent of the library's
/// projection-based evaluator.
pub fn classical_holds(d: &Instance, ic: &ConstraintSet) -> bool {
    ic.iter().all(|c| {
        let mut vals = vec![BTreeMap::new()];
        for a in &c.antecedent {
            vals = vals
                .into_iter()
                .flat_map(|v| {
                    d.relation(&a.predicate)
                        .filter_map(|f| unify(&a.terms, &f.args, &v))
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        vals.iter().all(|v| {
            if c.kind == ConstraintKind::Nnc {
                return !v[c.is_null.as_ref().unwrap()].is_null();
            }
            c.builtins.iter().any(|b| builtin_true(b, v))
                || c.consequent.iter().any(|q| d.relation(&q.predicate).any(|f| unify(&q.terms, &f.args, v).is_some()))
        })
    })
}

/// Repairs in the classical sense: consistent instances over the null-free
/// active domain whose difference with `d` is minimal under inclusion.
pub fn classical_repairs(schema: &Schema, d: &Instance, ic: &ConstraintSet) -> BTreeSet<Instance> {
    let mut domain = active_domain(d, ic);
    domain.remove(&Value::Null);
    let universe = all_atoms(schema, &domain);
    let consistent: Vec<(Instance, BTreeSet<Atom>)> = subsets(&universe)
        .filter(|i| classical_holds(i, ic))
        .map(|i| {
            let delta = d.atoms().symmetric_difference(i.atoms()).cloned().collect();
            (i, delta)
        })
        .collect();
    consistent
        .iter()
        .filter(|(_, delta)| !consistent.iter().any(|(_, other)| other.is_subset(delta) && other != delta))
        .map(|(i, _)| i.clone())
        .collect()
}
