//! Null-aware constraint satisfaction.
//!
//! A constraint ψ is checked against the instance projected onto its relevant
//! attributes. Each antecedent match whose relevant antecedent variables are
//! all non-null must then satisfy the (projected) consequent, where null is
//! just another constant. A null in any relevant antecedent position
//! discharges the match. NOT NULL constraints are checked classically.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::constraints::{
    relevant_attributes, AttributeSet, Builtin, Constraint, ConstraintKind, ConstraintSet, Term,
    Valuation,
};
use crate::relational::{EvalError, Instance, Value};

/// An atom restricted to the relevant positions of its predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedAtom {
    pub predicate: String,
    /// Kept positions of the original atom, 1-based and increasing.
    pub positions: Vec<usize>,
    pub terms: Vec<Term>,
}

impl fmt::Display for ProjectedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}^A({})", self.predicate, terms.join(","))
    }
}

/// The transformed constraint
/// `∀x̄ (⋀ P_i^A(x̄_i) → ⋁ IsNull(v) ∨ ∃z̄ (⋁ Q_j^A(ȳ_j, z̄_j) ∨ φ))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedConstraint {
    pub label: String,
    pub attributes: AttributeSet,
    pub antecedent: Vec<ProjectedAtom>,
    /// Antecedent variables at relevant positions, in first-occurrence order.
    pub guards: Vec<String>,
    /// Existential variables that survive the projection.
    pub existentials: Vec<String>,
    pub consequent: Vec<ProjectedAtom>,
    pub builtins: Vec<Builtin>,
}

impl TransformedConstraint {
    pub fn is_universal(&self) -> bool {
        self.existentials.is_empty()
    }
}

impl fmt::Display for TransformedConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ante: Vec<String> = self.antecedent.iter().map(|a| a.to_string()).collect();
        let mut disjuncts: Vec<String> = self.guards.iter().map(|v| format!("isnull({v})")).collect();
        let mut inner: Vec<String> = self.consequent.iter().map(|a| a.to_string()).collect();
        inner.extend(self.builtins.iter().map(|b| b.to_string()));
        if !inner.is_empty() {
            if self.existentials.is_empty() {
                disjuncts.extend(inner);
            } else {
                disjuncts.push(format!("exists {}: ({})", self.existentials.join(", "), inner.join(" | ")));
            }
        }
        if disjuncts.is_empty() {
            disjuncts.push("false".into());
        }
        write!(f, "{} -> {}", ante.join(", "), disjuncts.join(" | "))
    }
}

fn project_atom(atom: &crate::constraints::ConstraintAtom, attrs: &AttributeSet) -> ProjectedAtom {
    let mut positions = Vec::new();
    let mut terms = Vec::new();
    for (i, t) in atom.terms.iter().enumerate() {
        if attrs.contains(&crate::relational::Position::new(&atom.predicate, i + 1)) {
            positions.push(i + 1);
            terms.push(t.clone());
        }
    }
    ProjectedAtom {
        predicate: atom.predicate.clone(),
        positions,
        terms,
    }
}

/// Builds ψ^N.
///
/// # Panics
/// If `c` is a NOT NULL constraint; those are checked classically.
pub fn transform(c: &Constraint) -> TransformedConstraint {
    assert!(c.kind != ConstraintKind::Nnc, "NOT NULL constraints are not transformed");
    let attributes = relevant_attributes(c);
    let antecedent: Vec<ProjectedAtom> =
        c.antecedent.iter().map(|a| project_atom(a, &attributes)).collect();
    let consequent: Vec<ProjectedAtom> =
        c.consequent.iter().map(|a| project_atom(a, &attributes)).collect();
    let mut guards: Vec<String> = Vec::new();
    for v in antecedent.iter().flat_map(|a| a.terms.iter().filter_map(Term::as_var)) {
        if !guards.iter().any(|g| g == v) {
            guards.push(v.to_string());
        }
    }
    let existentials = c
        .existentials
        .iter()
        .filter(|z| consequent.iter().any(|a| a.terms.iter().any(|t| t.as_var() == Some(z.as_str()))))
        .cloned()
        .collect();
    TransformedConstraint {
        label: c.label.clone(),
        attributes,
        antecedent,
        guards,
        existentials,
        consequent,
        builtins: c.builtins.clone(),
    }
}

/// One predicate of a projected instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProjectedRelation {
    /// Kept positions, 1-based; empty for a propositional projection.
    pub positions: Vec<usize>,
    pub tuples: BTreeSet<Vec<Value>>,
}

/// `D^A`: every atom projected onto the attributes in `A`. Predicates with no
/// position in `A` become propositional: they hold the empty tuple iff the
/// relation is non-empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProjectedInstance {
    pub relations: BTreeMap<String, ProjectedRelation>,
}

impl ProjectedInstance {
    pub fn relation(&self, predicate: &str) -> Option<&ProjectedRelation> {
        self.relations.get(predicate)
    }

    fn tuples(&self, predicate: &str) -> impl Iterator<Item = &Vec<Value>> {
        self.relations.get(predicate).into_iter().flat_map(|r| r.tuples.iter())
    }
}

pub fn project(d: &Instance, attrs: &AttributeSet) -> ProjectedInstance {
    let mut relations: BTreeMap<String, ProjectedRelation> = BTreeMap::new();
    for atom in d {
        let rel = relations.entry(atom.predicate.clone()).or_insert_with(|| ProjectedRelation {
            positions: attrs
                .iter()
                .filter(|p| p.predicate == atom.predicate)
                .map(|p| p.index)
                .collect(),
            tuples: BTreeSet::new(),
        });
        let tuple = rel.positions.iter().map(|&i| atom.args[i - 1].clone()).collect();
        rel.tuples.insert(tuple);
    }
    ProjectedInstance { relations }
}

/// Extends `val` so that `terms` match `tuple`; `None` on a clash.
fn unify(terms: &[Term], tuple: &[Value], val: &Valuation) -> Option<Valuation> {
    let mut out = val.clone();
    for (t, v) in terms.iter().zip(tuple) {
        match t {
            Term::Const(c) => {
                if c != v {
                    return None;
                }
            }
            Term::Var(x) => match out.get(x) {
                Some(bound) if bound != v => return None,
                Some(_) => {}
                None => {
                    out.insert(x.clone(), v.clone());
                }
            },
        }
    }
    Some(out)
}

/// All valuations of the atoms' variables under which every atom is a
/// tuple of `pd`, in deterministic (tuple) order.
fn join(atoms: &[ProjectedAtom], pd: &ProjectedInstance, val: Valuation, out: &mut Vec<Valuation>) {
    let Some((first, rest)) = atoms.split_first() else {
        out.push(val);
        return;
    };
    for tuple in pd.tuples(&first.predicate) {
        if let Some(next) = unify(&first.terms, tuple, &val) {
            join(rest, pd, next, out);
        }
    }
}

fn consequent_holds(t: &TransformedConstraint, pd: &ProjectedInstance, val: &Valuation) -> Result<bool, EvalError> {
    if t.guards.iter().any(|g| val.get(g).is_some_and(Value::is_null)) {
        return Ok(true);
    }
    for b in &t.builtins {
        if b.eval(val)? {
            return Ok(true);
        }
    }
    Ok(t
        .consequent
        .iter()
        .any(|atom| pd.tuples(&atom.predicate).any(|tuple| unify(&atom.terms, tuple, val).is_some())))
}

/// Violating antecedent valuations of ψ^N over `pd`, at most `limit` of them.
pub fn violations_of(
    t: &TransformedConstraint,
    pd: &ProjectedInstance,
    limit: Option<usize>,
) -> Result<Vec<Valuation>, EvalError> {
    let mut matches = Vec::new();
    join(&t.antecedent, pd, Valuation::new(), &mut matches);
    let mut out = Vec::new();
    for val in matches {
        if !consequent_holds(t, pd, &val)? {
            out.push(val);
            if limit.is_some_and(|l| out.len() >= l) {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub label: String,
    pub kind: ConstraintKind,
    pub satisfied: bool,
    /// Antecedent valuations that falsify the constraint.
    pub violations: Vec<Valuation>,
}

/// `D ⊨_N ψ` for a constraint of the general form, with all violations.
/// NOT NULL constraints are delegated to [`satisfies_nnc`].
pub fn satisfies(d: &Instance, c: &Constraint) -> Result<Verdict, EvalError> {
    if c.kind == ConstraintKind::Nnc {
        return Ok(satisfies_nnc(d, c));
    }
    let t = transform(c);
    let violations = violations_of(&t, &project(d, &t.attributes), None)?;
    Ok(Verdict {
        label: c.label.clone(),
        kind: c.kind,
        satisfied: violations.is_empty(),
        violations,
    })
}

fn nnc_violations(d: &Instance, c: &Constraint, limit: Option<usize>) -> Vec<Valuation> {
    let atom = &c.antecedent[0];
    let v = c.is_null.as_deref().expect("NNC has an isnull variable");
    let mut out = Vec::new();
    for fact in d.relation(&atom.predicate) {
        if let Some(val) = unify(&atom.terms, &fact.args, &Valuation::new()) {
            if val.get(v).is_some_and(Value::is_null) {
                out.push(val);
                if limit.is_some_and(|l| out.len() >= l) {
                    break;
                }
            }
        }
    }
    out
}

/// Classical check of a NOT NULL constraint.
///
/// # Panics
/// If `c` is not an NNC.
pub fn satisfies_nnc(d: &Instance, c: &Constraint) -> Verdict {
    assert_eq!(c.kind, ConstraintKind::Nnc, "not a NOT NULL constraint");
    let violations = nnc_violations(d, c, None);
    Verdict {
        label: c.label.clone(),
        kind: c.kind,
        satisfied: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SatisfactionReport {
    pub consistent: bool,
    pub constraints: Vec<Verdict>,
}

impl SatisfactionReport {
    pub fn violated(&self) -> impl Iterator<Item = &Verdict> {
        self.constraints.iter().filter(|v| !v.satisfied)
    }
}

pub fn satisfies_all(d: &Instance, ic: &ConstraintSet) -> Result<SatisfactionReport, EvalError> {
    let constraints = ic.iter().map(|c| satisfies(d, c)).collect::<Result<Vec<_>, _>>()?;
    Ok(SatisfactionReport {
        consistent: constraints.iter().all(|v| v.satisfied),
        constraints,
    })
}

/// A reusable consistency test: constraints are transformed once and each
/// check stops at the first violation.
#[derive(Debug, Clone)]
pub struct Checker {
    checks: Vec<Check>,
}

#[derive(Debug, Clone)]
enum Check {
    Nnc(Constraint),
    General(TransformedConstraint),
}

impl Checker {
    pub fn new(ic: &ConstraintSet) -> Self {
        let checks = ic
            .iter()
            .map(|c| match c.kind {
                ConstraintKind::Nnc => Check::Nnc(c.clone()),
                _ => Check::General(transform(c)),
            })
            .collect();
        Checker { checks }
    }

    pub fn holds(&self, d: &Instance) -> Result<bool, EvalError> {
        for check in &self.checks {
            let ok = match check {
                Check::Nnc(c) => nnc_violations(d, c, Some(1)).is_empty(),
                Check::General(t) => violations_of(t, &project(d, &t.attributes), Some(1))?.is_empty(),
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn is_consistent(d: &Instance, ic: &ConstraintSet) -> Result<bool, EvalError> {
    Checker::new(ic).holds(d)
}
