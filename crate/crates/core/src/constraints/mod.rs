//! Integrity constraints: AST, parser and classification.
//!
//! Constraint grammar, one constraint per statement:
//!
//! ```text
//! [label ":"] Atom { "," Atom } [ "," "isnull(" var ")" ] "->"
//!     ( "false" | [ "exists" var { "," var } ":" ] Disjunct { "|" Disjunct } ) "."
//! Disjunct := Atom | Term Op Term          Op := = != < <= > >=
//! ```
//!
//! Bare identifiers are variables. Constants are integers or quoted symbols
//! (`'a'`). `null` may only appear through `isnull(..)`.

mod analysis;
mod graph;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::lexer::{Cursor, ParseError, Span, Tok};
use crate::relational::{check_arity, EvalError, Position, Schema, Value};

pub use analysis::{
    bilateral_predicates, hcf_sufficient, non_conflicting, relevant_attributes, AttributeSet,
    Conflict, ConflictReport,
};
pub use graph::{
    contracted_graph, dependency_graph, is_ric_acyclic, AcyclicityReport, DependencyGraph,
    GraphEdge,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    /// Resolves the term under a valuation; unbound variables give `None`.
    pub fn resolve<'a>(&'a self, val: &'a Valuation) -> Option<&'a Value> {
        match self {
            Term::Var(v) => val.get(v),
            Term::Const(c) => Some(c),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(Value::Symbol(s)) => {
                write!(f, "'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
            }
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Variable bindings, ordered by variable name.
pub type Valuation = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintAtom {
    pub predicate: String,
    pub terms: Vec<Term>,
}

impl ConstraintAtom {
    pub fn new(predicate: &str, terms: Vec<Term>) -> Self {
        ConstraintAtom {
            predicate: predicate.to_string(),
            terms,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for ConstraintAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// `=` is syntactic (null = null holds), `!=` its negation; the order
    /// comparisons are false whenever a null is involved.
    pub fn apply(self, left: &Value, right: &Value) -> Result<bool, EvalError> {
        use std::cmp::Ordering::*;
        Ok(match self {
            CmpOp::Eq => left == right,
            CmpOp::Ne => left != right,
            op => match left.compare(right)? {
                None => false,
                Some(ord) => match op {
                    CmpOp::Lt => ord == Less,
                    CmpOp::Le => ord != Greater,
                    CmpOp::Gt => ord == Greater,
                    CmpOp::Ge => ord != Less,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                },
            },
        })
    }

    fn from_tok(tok: &Tok) -> Option<CmpOp> {
        Some(match tok {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }
}

/// A builtin comparison atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Builtin {
    pub left: Term,
    pub op: CmpOp,
    pub right: Term,
}

impl Builtin {
    pub fn new(left: Term, op: CmpOp, right: Term) -> Self {
        Builtin { left, op, right }
    }

    pub fn negate(&self) -> Builtin {
        Builtin::new(self.left.clone(), self.op.negate(), self.right.clone())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.left, &self.right].into_iter().filter_map(Term::as_var)
    }

    /// Panics if a variable is unbound; callers evaluate builtins only after
    /// the antecedent has bound every variable.
    pub fn eval(&self, val: &Valuation) -> Result<bool, EvalError> {
        let l = self.left.resolve(val).expect("builtin variable bound");
        let r = self.right.resolve(val).expect("builtin variable bound");
        self.op.apply(l, r)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// NOT NULL constraint.
    Nnc,
    /// Referential constraint: one antecedent atom, one consequent atom with
    /// existential variables.
    Ric,
    /// Universal constraint (no existential variables).
    Uic,
    /// Anything else of the general implicational form.
    General,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Nnc => "nnc",
            ConstraintKind::Ric => "ric",
            ConstraintKind::Uic => "uic",
            ConstraintKind::General => "general",
        })
    }
}

/// `∀x̄ (⋀ P_i(x̄_i) [∧ IsNull(v)] → ∃z̄ (⋁ Q_j(ȳ_j, z̄_j) ∨ φ))`.
///
/// An empty consequent together with an empty `builtins` list is `false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub antecedent: Vec<ConstraintAtom>,
    /// The variable guarded by `isnull(..)`; only set for NNCs.
    pub is_null: Option<String>,
    pub existentials: Vec<String>,
    pub consequent: Vec<ConstraintAtom>,
    /// The disjunction φ of builtin atoms.
    pub builtins: Vec<Builtin>,
}

/// The positional layout of a referential constraint `P(x̄) → ∃ȳ Q(x̄′, ȳ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RicShape<'a> {
    pub antecedent: &'a ConstraintAtom,
    pub consequent: &'a ConstraintAtom,
    /// 0-based positions of `Q` holding the universally quantified `x̄′`.
    pub key_positions: Vec<usize>,
    /// 0-based positions of `Q` holding existential variables.
    pub existential_positions: Vec<usize>,
}

impl Constraint {
    /// Builds and classifies a constraint, checking the well-formedness
    /// conditions of the general form.
    pub fn new(
        label: impl Into<String>,
        antecedent: Vec<ConstraintAtom>,
        is_null: Option<String>,
        existentials: Vec<String>,
        consequent: Vec<ConstraintAtom>,
        builtins: Vec<Builtin>,
    ) -> Result<Constraint, String> {
        let mut c = Constraint {
            label: label.into(),
            kind: ConstraintKind::General,
            antecedent,
            is_null,
            existentials,
            consequent,
            builtins,
        };
        c.validate()?;
        c.kind = c.classify();
        Ok(c)
    }

    fn validate(&self) -> Result<(), String> {
        if self.antecedent.is_empty() {
            return Err("a constraint needs at least one antecedent atom".into());
        }
        let universal: BTreeSet<&str> = self.antecedent.iter().flat_map(|a| a.vars()).collect();
        let existential: BTreeSet<&str> = self.existentials.iter().map(String::as_str).collect();
        if existential.len() != self.existentials.len() {
            return Err("an existential variable is declared twice".into());
        }
        if let Some(v) = existential.iter().find(|v| universal.contains(*v)) {
            return Err(format!("existential variable `{v}` also occurs in the antecedent"));
        }
        if let Some(v) = &self.is_null {
            if self.antecedent.len() != 1
                || !self.consequent.is_empty()
                || !self.builtins.is_empty()
                || !self.existentials.is_empty()
            {
                return Err(
                    "isnull(..) is only allowed in NOT NULL constraints `P(x̄), isnull(x) -> false`"
                        .into(),
                );
            }
            if !universal.contains(v.as_str()) {
                return Err(format!("isnull variable `{v}` does not occur in the antecedent"));
            }
        } else if self.atoms().flat_map(|a| a.terms.iter()).chain(self.builtin_terms()).any(
            |t| matches!(t, Term::Const(Value::Null)),
        ) {
            return Err("the constant null may only be tested through isnull(..)".into());
        }
        let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
        for (j, atom) in self.consequent.iter().enumerate() {
            for v in atom.vars() {
                if existential.contains(v) {
                    if let Some(&other) = owner.get(v) {
                        if other != j {
                            return Err(format!(
                                "existential variable `{v}` is shared between consequent atoms"
                            ));
                        }
                    }
                    owner.insert(v, j);
                } else if !universal.contains(v) {
                    return Err(format!(
                        "variable `{v}` in the consequent is neither in the antecedent nor declared with `exists`"
                    ));
                }
            }
        }
        if let Some(v) = existential.iter().find(|v| !owner.contains_key(*v)) {
            return Err(format!("existential variable `{v}` is never used"));
        }
        for b in &self.builtins {
            for v in b.vars() {
                if existential.contains(v) {
                    return Err(format!(
                        "existential variable `{v}` may not appear in a builtin"
                    ));
                }
                if !universal.contains(v) {
                    return Err(format!("builtin variable `{v}` does not occur in the antecedent"));
                }
            }
        }
        Ok(())
    }

    fn classify(&self) -> ConstraintKind {
        if self.is_null.is_some() {
            ConstraintKind::Nnc
        } else if self.existentials.is_empty() {
            ConstraintKind::Uic
        } else if self.ric_shape_unchecked().is_some() {
            ConstraintKind::Ric
        } else {
            ConstraintKind::General
        }
    }

    fn ric_shape_unchecked(&self) -> Option<RicShape<'_>> {
        if self.antecedent.len() != 1 || self.consequent.len() != 1 || !self.builtins.is_empty() {
            return None;
        }
        let q = &self.consequent[0];
        let mut key_positions = Vec::new();
        let mut existential_positions = Vec::new();
        for (i, t) in q.terms.iter().enumerate() {
            match t {
                Term::Const(_) => return None,
                Term::Var(v) if self.existentials.contains(v) => {
                    if q.vars().filter(|w| w == v).count() != 1 {
                        return None;
                    }
                    existential_positions.push(i);
                }
                Term::Var(_) => key_positions.push(i),
            }
        }
        if existential_positions.is_empty() {
            return None;
        }
        Some(RicShape {
            antecedent: &self.antecedent[0],
            consequent: q,
            key_positions,
            existential_positions,
        })
    }

    pub fn ric_shape(&self) -> Option<RicShape<'_>> {
        if self.kind == ConstraintKind::Ric {
            self.ric_shape_unchecked()
        } else {
            None
        }
    }

    /// The position guarded by a NOT NULL constraint.
    pub fn nnc_position(&self) -> Option<Position> {
        let v = self.is_null.as_deref()?;
        let atom = &self.antecedent[0];
        let idx = atom.terms.iter().position(|t| t.as_var() == Some(v))?;
        Some(Position::new(&atom.predicate, idx + 1))
    }

    /// Positions of consequent atoms that hold existential variables.
    pub fn existential_positions(&self) -> BTreeSet<Position> {
        let mut out = BTreeSet::new();
        for atom in &self.consequent {
            for (i, t) in atom.terms.iter().enumerate() {
                if t.as_var().is_some_and(|v| self.existentials.iter().any(|e| e == v)) {
                    out.insert(Position::new(&atom.predicate, i + 1));
                }
            }
        }
        out
    }

    pub fn atoms(&self) -> impl Iterator<Item = &ConstraintAtom> {
        self.antecedent.iter().chain(self.consequent.iter())
    }

    fn builtin_terms(&self) -> impl Iterator<Item = &Term> {
        self.builtins.iter().flat_map(|b| [&b.left, &b.right])
    }

    /// Variables of the antecedent, in first-occurrence order.
    pub fn universal_vars(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for v in self.antecedent.iter().flat_map(|a| a.vars()) {
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        seen
    }

    pub fn antecedent_predicates(&self) -> BTreeSet<&str> {
        self.antecedent.iter().map(|a| a.predicate.as_str()).collect()
    }

    pub fn consequent_predicates(&self) -> BTreeSet<&str> {
        self.consequent.iter().map(|a| a.predicate.as_str()).collect()
    }

    /// Domain constants mentioned anywhere in the constraint.
    pub fn constants(&self) -> BTreeSet<Value> {
        self.atoms()
            .flat_map(|a| a.terms.iter())
            .chain(self.builtin_terms())
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect()
    }

    /// `P(x̄) → false` style constraints, including NNCs.
    pub fn is_denial(&self) -> bool {
        self.consequent.is_empty() && self.builtins.is_empty()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.label)?;
        for (i, a) in self.antecedent.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        if let Some(v) = &self.is_null {
            write!(f, ", isnull({v})")?;
        }
        f.write_str(" -> ")?;
        if self.is_denial() {
            return f.write_str("false.");
        }
        if !self.existentials.is_empty() {
            write!(f, "exists {}: ", self.existentials.join(", "))?;
        }
        let parts: Vec<String> = self
            .consequent
            .iter()
            .map(|a| a.to_string())
            .chain(self.builtins.iter().map(|b| b.to_string()))
            .collect();
        write!(f, "{}.", parts.join(" | "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        ConstraintSet { constraints }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// `IC_U`, the universal constraints.
    pub fn uics(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.kind == ConstraintKind::Uic)
    }

    pub fn of_kind(&self, kind: ConstraintKind) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(move |c| c.kind == kind)
    }

    pub fn without_kind(&self, kind: ConstraintKind) -> ConstraintSet {
        ConstraintSet::new(self.constraints.iter().filter(|c| c.kind != kind).cloned().collect())
    }

    pub fn constants(&self) -> BTreeSet<Value> {
        self.constraints.iter().flat_map(|c| c.constants()).collect()
    }

    pub fn render(&self) -> String {
        self.constraints.iter().map(|c| format!("{c}\n")).collect()
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Constraint>>(iter: I) -> Self {
        ConstraintSet::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a ConstraintSet {
    type Item = &'a Constraint;
    type IntoIter = std::slice::Iter<'a, Constraint>;

    fn into_iter(self) -> Self::IntoIter {
        self.constraints.iter()
    }
}

pub fn parse_constraints(text: &str, schema: &Schema) -> Result<ConstraintSet, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut set = ConstraintSet::default();
    while !cur.at_end() {
        let start = cur.span();
        let default_label = format!("ic{}", set.len() + 1);
        let c = parse_one(&mut cur, schema, default_label)?;
        if set.get(&c.label).is_some() {
            return Err(ParseError::invalid(start, format!("duplicate label `{}`", c.label)));
        }
        set.push(c);
    }
    Ok(set)
}

fn parse_one(cur: &mut Cursor, schema: &Schema, default_label: String) -> Result<Constraint, ParseError> {
    let start = cur.span();
    let label = match (cur.peek(), cur.peek_nth(1)) {
        (Some(Tok::Ident(_)), Some(Tok::Colon)) => {
            let (l, _) = cur.ident()?;
            cur.next();
            l
        }
        _ => default_label,
    };

    let mut antecedent = Vec::new();
    let mut is_null = None;
    loop {
        if is_null_keyword(cur) {
            cur.next();
            cur.expect(&Tok::LParen)?;
            is_null = Some(cur.ident()?.0);
            cur.expect(&Tok::RParen)?;
        } else {
            if is_null.is_some() {
                return Err(cur.error("isnull(..) must come last in the antecedent").into());
            }
            antecedent.push(parse_atom(cur, schema)?);
        }
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    cur.expect(&Tok::Arrow)?;

    let mut existentials = Vec::new();
    let mut consequent = Vec::new();
    let mut builtins = Vec::new();
    if cur.eat_keyword("false") {
        // denial
    } else {
        if cur.eat_keyword("exists") {
            loop {
                existentials.push(cur.ident()?.0);
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
            cur.expect(&Tok::Colon)?;
        }
        loop {
            if matches!((cur.peek(), cur.peek_nth(1)), (Some(Tok::Ident(_)), Some(Tok::LParen))) {
                consequent.push(parse_atom(cur, schema)?);
            } else {
                let left = parse_term(cur)?;
                let op = cur
                    .peek()
                    .and_then(CmpOp::from_tok)
                    .ok_or_else(|| cur.unexpected("a comparison operator"))?;
                cur.next();
                let right = parse_term(cur)?;
                builtins.push(Builtin::new(left, op, right));
            }
            if !cur.eat(&Tok::Pipe) {
                break;
            }
        }
    }
    cur.expect(&Tok::Dot)?;
    Constraint::new(label, antecedent, is_null, existentials, consequent, builtins)
        .map_err(|m| ParseError::invalid(start, m))
}

fn is_null_keyword(cur: &Cursor) -> bool {
    matches!(
        (cur.peek(), cur.peek_nth(1)),
        (Some(Tok::Ident(s)), Some(Tok::LParen)) if s.eq_ignore_ascii_case("isnull")
    )
}

fn parse_atom(cur: &mut Cursor, schema: &Schema) -> Result<ConstraintAtom, ParseError> {
    let (name, span) = cur.ident()?;
    cur.expect(&Tok::LParen)?;
    let mut terms = Vec::new();
    if !cur.eat(&Tok::RParen) {
        loop {
            terms.push(parse_term(cur)?);
            if cur.eat(&Tok::RParen) {
                break;
            }
            cur.expect(&Tok::Comma)?;
        }
    }
    check_arity(schema, &name, terms.len(), span)?;
    Ok(ConstraintAtom { predicate: name, terms })
}

fn parse_term(cur: &mut Cursor) -> Result<Term, ParseError> {
    let span: Span = cur.span();
    match cur.next() {
        Some((Tok::Ident(s), _)) if s == "null" => Ok(Term::Const(Value::Null)),
        Some((Tok::Ident(s), _)) => Ok(Term::Var(s)),
        Some((Tok::Int(i), _)) => Ok(Term::Const(Value::Integer(i))),
        Some((Tok::Str(s), _)) => Ok(Term::Const(Value::Symbol(s))),
        Some((t, _)) => Err(ParseError::invalid(span, format!("expected a term, found {t}"))),
        None => Err(ParseError::invalid(span, "expected a term, found end of input")),
    }
}
