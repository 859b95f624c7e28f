//! Static analyses over constraints: relevant attributes, the
//! non-conflicting check and bilateral predicates.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Constraint, ConstraintKind, ConstraintSet, Term};
use crate::relational::Position;

/// A set of attribute positions `R[i]`.
pub type AttributeSet = BTreeSet<Position>;

/// Relevant attributes of a constraint: every position holding a variable
/// that occurs at least twice in the constraint (repetitions inside one atom
/// and occurrences in builtins count), plus every position holding a
/// constant. Constants inside builtins occupy no position and contribute
/// nothing.
pub fn relevant_attributes(c: &Constraint) -> AttributeSet {
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    let atom_terms = c.atoms().flat_map(|a| a.terms.iter());
    let builtin_terms = c.builtins.iter().flat_map(|b| [&b.left, &b.right]);
    for t in atom_terms.chain(builtin_terms) {
        if let Term::Var(v) = t {
            *occurrences.entry(v).or_default() += 1;
        }
    }
    if let Some(v) = &c.is_null {
        *occurrences.entry(v).or_default() += 1;
    }

    let mut out = AttributeSet::new();
    for atom in c.atoms() {
        for (i, t) in atom.terms.iter().enumerate() {
            let relevant = match t {
                Term::Var(v) => occurrences[v.as_str()] >= 2,
                Term::Const(_) => true,
            };
            if relevant {
                out.insert(Position::new(&atom.predicate, i + 1));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub nnc: String,
    pub constraint: String,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictReport {
    pub non_conflicting: bool,
    pub conflicts: Vec<Conflict>,
}

/// A set is conflicting when some NOT NULL constraint guards a position that
/// another constraint fills with an existential variable.
pub fn non_conflicting(ic: &ConstraintSet) -> ConflictReport {
    let mut conflicts = Vec::new();
    for nnc in ic.of_kind(ConstraintKind::Nnc) {
        let Some(guarded) = nnc.nnc_position() else { continue };
        for other in ic.iter().filter(|c| !c.existentials.is_empty()) {
            if other.existential_positions().contains(&guarded) {
                conflicts.push(Conflict {
                    nnc: nnc.label.clone(),
                    constraint: other.label.clone(),
                    position: guarded.clone(),
                });
            }
        }
    }
    ConflictReport {
        non_conflicting: conflicts.is_empty(),
        conflicts,
    }
}

/// Predicates occurring in the antecedent of some constraint and in the
/// consequent of some (possibly the same) constraint.
pub fn bilateral_predicates(ic: &ConstraintSet) -> BTreeSet<String> {
    let antecedent: BTreeSet<&str> = ic.iter().flat_map(|c| c.antecedent_predicates()).collect();
    let consequent: BTreeSet<&str> = ic.iter().flat_map(|c| c.consequent_predicates()).collect();
    antecedent
        .intersection(&consequent)
        .map(|p| p.to_string())
        .collect()
}

/// Sufficient syntactic condition for a head-cycle-free repair program:
/// every constraint contains at most one atom over a bilateral predicate.
/// `false` is inconclusive.
pub fn hcf_sufficient(ic: &ConstraintSet) -> bool {
    let bilateral = bilateral_predicates(ic);
    ic.iter().all(|c| {
        c.atoms()
            .filter(|a| bilateral.contains(&a.predicate))
            .count()
            <= 1
    })
}
