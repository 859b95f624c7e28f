//! Repairs with null values.
//!
//! Instances are compared by their symmetric difference with the original
//! database `D`. A change involving nulls is dominated by a change that
//! fills the nulls with concrete values, so inserting `R(b,null)` beats
//! inserting `R(b,d)`.
//!
//! Enumeration works over a finite candidate universe: the atoms of `D` plus
//! the closure of atoms that constraint consequents can demand (existential
//! positions filled with null). Consistent candidates that are minimal under
//! inclusion of their differences are then confirmed with an exact
//! minimality check, [`verify_repair`], that is not limited to the universe.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::constraints::{
    non_conflicting, Conflict, ConstraintAtom, ConstraintKind, ConstraintSet, Term, Valuation,
};
use crate::relational::{active_domain, Atom, EvalError, Instance, Value};
use crate::satisfaction::{transform, Checker};

/// Default bound on the number of candidate atoms.
pub const DEFAULT_MAX_CANDIDATES: usize = 24;

/// Hard ceiling imposed by the bitmask representation.
const MASK_BITS: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("conflicting constraint set: NOT NULL constraint `{}` guards {} which `{}` quantifies existentially", .0[0].nnc, .0[0].position, .0[0].constraint)]
    ConflictingIcSet(Vec<Conflict>),
    #[error("candidate space too large: {candidates} atoms exceed the limit of {limit}")]
    CandidateSpaceTooLarge { candidates: usize, limit: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepairOptions {
    pub max_candidates: usize,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

/// `Δ(D, D′) = (D \ D′) ∪ (D′ \ D)`.
pub fn delta(d: &Instance, other: &Instance) -> Instance {
    d.atoms()
        .symmetric_difference(other.atoms())
        .cloned()
        .collect()
}

/// `d ⊕ changes`: toggles each atom of `changes` in `d`.
fn apply(d: &Instance, changes: impl IntoIterator<Item = Atom>) -> Instance {
    let mut out = d.clone();
    for a in changes {
        if !out.remove(&a) {
            out.insert(a);
        }
    }
    out
}

/// `w` agrees with `x` on every non-null position of `x`.
fn covers(w: &Atom, x: &Atom) -> bool {
    w.predicate == x.predicate
        && w.args.len() == x.args.len()
        && x.args.iter().zip(&w.args).all(|(xv, wv)| xv.is_null() || xv == wv)
}

/// The order on difference sets: `d1 ≤ d2` iff every null-free change of
/// `d1` is also a change of `d2`, and every change `X` of `d1` with nulls is
/// either a change of `d2` or is covered by a change `W` of `d2` that `d1`
/// does not make, with `W` agreeing with `X` on the non-null positions of `X`.
pub fn leq_deltas(d1: &Instance, d2: &Instance) -> bool {
    d1.iter().all(|x| {
        d2.contains(x)
            || (x.has_null() && d2.iter().any(|w| !d1.contains(w) && covers(w, x)))
    })
}

/// `d1 ≤_D d2`.
pub fn leq(d1: &Instance, d2: &Instance, base: &Instance) -> bool {
    leq_deltas(&delta(base, d1), &delta(base, d2))
}

/// `d1 <_D d2`.
pub fn lt(d1: &Instance, d2: &Instance, base: &Instance) -> bool {
    let (a, b) = (delta(base, d1), delta(base, d2));
    leq_deltas(&a, &b) && !leq_deltas(&b, &a)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Repair {
    pub instance: Instance,
    pub delta: Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairSet {
    /// Sorted canonically by instance.
    pub repairs: Vec<Repair>,
    /// Size of the candidate universe that was searched.
    pub candidate_atoms: usize,
}

impl RepairSet {
    pub fn len(&self) -> usize {
        self.repairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.repairs.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.repairs.iter().map(|r| &r.instance)
    }

    pub fn instance_set(&self) -> BTreeSet<Instance> {
        self.instances().cloned().collect()
    }
}

fn ensure_non_conflicting(ic: &ConstraintSet) -> Result<(), RepairError> {
    let report = non_conflicting(ic);
    if report.non_conflicting {
        Ok(())
    } else {
        Err(RepairError::ConflictingIcSet(report.conflicts))
    }
}

fn unify_full(terms: &[Term], args: &[Value], val: &Valuation) -> Option<Valuation> {
    let mut out = val.clone();
    for (t, v) in terms.iter().zip(args) {
        match t {
            Term::Const(c) if c != v => return None,
            Term::Const(_) => {}
            Term::Var(x) => match out.get(x) {
                Some(b) if b != v => return None,
                Some(_) => {}
                None => {
                    out.insert(x.clone(), v.clone());
                }
            },
        }
    }
    Some(out)
}

fn matches(atoms: &[ConstraintAtom], universe: &BTreeSet<Atom>, val: Valuation, out: &mut Vec<Valuation>) {
    let Some((first, rest)) = atoms.split_first() else {
        out.push(val);
        return;
    };
    for a in universe.iter().filter(|a| a.predicate == first.predicate) {
        if let Some(next) = unify_full(&first.terms, &a.args, &val) {
            matches(rest, universe, next, out);
        }
    }
}

fn instantiate(atom: &ConstraintAtom, val: &Valuation) -> Atom {
    let args = atom
        .terms
        .iter()
        .map(|t| match t {
            Term::Const(c) => c.clone(),
            Term::Var(v) => val.get(v).cloned().unwrap_or(Value::Null),
        })
        .collect();
    Atom::new(atom.predicate.clone(), args)
}

/// The candidate universe: `D` plus every consequent atom some constraint
/// can demand over the universe built so far, existentials set to null.
pub fn candidate_universe(
    d: &Instance,
    ic: &ConstraintSet,
    limit: usize,
) -> Result<Vec<Atom>, RepairError> {
    let producers: Vec<_> = ic
        .iter()
        .filter(|c| c.kind != ConstraintKind::Nnc && !c.consequent.is_empty())
        .map(|c| (c, transform(c).guards))
        .collect();
    let mut universe: BTreeSet<Atom> = d.atoms().clone();
    let mut extra: Vec<Atom> = Vec::new();
    loop {
        let mut fresh = BTreeSet::new();
        for (c, guards) in &producers {
            let mut vals = Vec::new();
            matches(&c.antecedent, &universe, Valuation::new(), &mut vals);
            'val: for val in vals {
                if guards.iter().any(|g| val[g].is_null()) {
                    continue;
                }
                for b in &c.builtins {
                    if b.eval(&val)? {
                        continue 'val;
                    }
                }
                for q in &c.consequent {
                    let a = instantiate(q, &val);
                    if !universe.contains(&a) {
                        fresh.insert(a);
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        extra.extend(fresh.iter().cloned());
        universe.extend(fresh);
        if universe.len() > limit {
            return Err(RepairError::CandidateSpaceTooLarge {
                candidates: universe.len(),
                limit,
            });
        }
    }
    let mut out: Vec<Atom> = d.iter().cloned().collect();
    out.extend(extra);
    if out.len() > limit {
        return Err(RepairError::CandidateSpaceTooLarge {
            candidates: out.len(),
            limit,
        });
    }
    Ok(out)
}

/// Next mask with the same number of set bits (Gosper's hack).
fn next_combination(x: u64) -> u64 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

fn masks_of_size(n: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut m: u64 = (1u64 << k) - 1;
    let end = 1u64 << n;
    while m < end {
        out.push(m);
        m = next_combination(m);
    }
    out
}

fn from_mask(universe: &[Atom], mask: u64) -> impl Iterator<Item = Atom> + '_ {
    (0..universe.len())
        .filter(move |i| mask & (1 << i) != 0)
        .map(|i| universe[i].clone())
}

/// Consistent differences within `universe` that are minimal under
/// inclusion, found layer by layer in increasing size.
fn minimal_consistent_masks(
    d: &Instance,
    universe: &[Atom],
    checker: &Checker,
) -> Result<Vec<u64>, RepairError> {
    let n = universe.len();
    let mut found: Vec<u64> = Vec::new();
    for k in 0..=n {
        let layer: Vec<u64> = masks_of_size(n, k)
            .into_iter()
            .filter(|m| !found.iter().any(|f| f & m == *f))
            .collect();
        if layer.is_empty() {
            continue;
        }
        let hits: Vec<u64> = layer
            .par_iter()
            .map(|&m| checker.holds(&apply(d, from_mask(universe, m))).map(|ok| ok.then_some(m)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        found.extend(hits);
    }
    Ok(found)
}

/// All nullifications of `a` at a non-empty subset of its non-null positions.
fn generalizations(a: &Atom) -> Vec<Atom> {
    let positions: Vec<usize> = (0..a.args.len()).filter(|&i| !a.args[i].is_null()).collect();
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << positions.len()) {
        let mut g = a.clone();
        for (bit, &i) in positions.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                g.args[i] = Value::Null;
            }
        }
        out.push(g);
    }
    out
}

/// Searches for a consistent `D″` with `D″ <_D D′`. Any such `D″` changes
/// only atoms of `Δ(D, D′)` or nullified versions of them, so the search is
/// exact over the whole (infinite) domain.
fn find_smaller(
    d: &Instance,
    d_prime: &Instance,
    checker: &Checker,
    limit: usize,
) -> Result<Option<Instance>, RepairError> {
    let dp = delta(d, d_prime);
    let mut space: BTreeSet<Atom> = dp.atoms().clone();
    for a in dp.iter() {
        space.extend(generalizations(a));
    }
    let space: Vec<Atom> = space.into_iter().collect();
    if space.len() > limit.min(MASK_BITS) {
        return Err(RepairError::CandidateSpaceTooLarge {
            candidates: space.len(),
            limit: limit.min(MASK_BITS),
        });
    }
    let total: u64 = 1u64 << space.len();
    let hit = (0..total)
        .into_par_iter()
        .map(|m| -> Result<Option<u64>, RepairError> {
            let changes: Instance = from_mask(&space, m).collect();
            if !(leq_deltas(&changes, &dp) && !leq_deltas(&dp, &changes)) {
                return Ok(None);
            }
            let candidate = apply(d, changes.iter().cloned());
            Ok(checker.holds(&candidate)?.then_some(m))
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        });
    match hit {
        None => Ok(None),
        Some(Err(e)) => Err(e),
        Some(Ok(m)) => Ok(Some(apply(d, from_mask(&space, m.expect("found mask"))))),
    }
}

/// Checks that `d_prime` satisfies the constraints and that no consistent
/// instance lies strictly below it.
pub fn verify_repair(
    d: &Instance,
    ic: &ConstraintSet,
    d_prime: &Instance,
    options: &RepairOptions,
) -> Result<bool, RepairError> {
    ensure_non_conflicting(ic)?;
    let checker = Checker::new(ic);
    if !checker.holds(d_prime)? {
        return Ok(false);
    }
    Ok(find_smaller(d, d_prime, &checker, options.max_candidates)?.is_none())
}

/// `Rep(D, IC)`.
pub fn repairs(d: &Instance, ic: &ConstraintSet, options: &RepairOptions) -> Result<RepairSet, RepairError> {
    ensure_non_conflicting(ic)?;
    let limit = options.max_candidates.min(MASK_BITS);
    let universe = candidate_universe(d, ic, limit)?;
    let checker = Checker::new(ic);
    let masks = minimal_consistent_masks(d, &universe, &checker)?;

    let domain = active_domain(d, ic);
    let mut out = Vec::new();
    for m in masks {
        let instance = apply(d, from_mask(&universe, m));
        if find_smaller(d, &instance, &checker, options.max_candidates)?.is_some() {
            continue;
        }
        assert!(
            instance.values().is_subset(&domain),
            "repair {instance} leaves the active domain"
        );
        let delta = delta(d, &instance);
        out.push(Repair { instance, delta });
    }
    out.sort();
    Ok(RepairSet {
        repairs: out,
        candidate_atoms: universe.len(),
    })
}
