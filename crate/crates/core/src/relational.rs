//! Values, schemas, ground atoms and instances.
//!
//! An [`Instance`] is a finite *set* of ground atoms: inserting an atom twice is
//! a no-op. There is exactly one null value, [`Value::Null`], and it compares
//! equal to itself.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::constraints::ConstraintSet;
use crate::lexer::{Cursor, ParseError, Span, Tok};

/// A domain value.
///
/// The derived order is the canonical one used for every deterministic output:
/// `Null` first, then integers numerically, then symbols lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Null,
    Integer(i64),
    Symbol(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Value {
        Value::Symbol(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Order comparison for the builtins `<`, `<=`, `>`, `>=`.
    ///
    /// `None` when either side is null (the comparison is then false);
    /// `Err` when an integer is compared with a symbol.
    pub fn compare(&self, other: &Value) -> Result<Option<Ordering>, EvalError> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => Ok(None),
            (Value::Integer(a), Value::Integer(b)) => Ok(Some(a.cmp(b))),
            (Value::Symbol(a), Value::Symbol(b)) => Ok(Some(a.cmp(b))),
            (a, b) => Err(EvalError::MixedComparison {
                left: a.clone(),
                right: b.clone(),
            }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Symbol(s) if is_bare_symbol(s) => f.write_str(s),
            Value::Symbol(s) => write!(f, "{}", quote(s)),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => serializer.serialize_none(),
            Value::Integer(i) => serializer.serialize_i64(*i),
            Value::Symbol(s) => serializer.serialize_str(s),
        }
    }
}

/// Symbols that can be written without quotes in the facts dialect.
pub(crate) fn is_bare_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "null"
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot compare integer and symbol values: {left} vs {right}")]
    MixedComparison { left: Value, right: Value },
}

/// An attribute position `R[i]`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub predicate: String,
    pub index: usize,
}

impl Position {
    pub fn new(predicate: impl Into<String>, index: usize) -> Self {
        Position {
            predicate: predicate.into(),
            index,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.predicate, self.index)
    }
}

impl Serialize for Position {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredicateDecl {
    pub name: String,
    pub arity: usize,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Schema {
    predicates: BTreeMap<String, PredicateDecl>,
}

impl Schema {
    pub fn new() -> Self {
        Schema::default()
    }

    /// Builds a schema from `(name, arity)` pairs with default attribute names.
    pub fn from_arities<'a>(preds: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        let mut schema = Schema::new();
        for (name, arity) in preds {
            schema
                .declare(name, arity, Vec::new())
                .expect("valid schema declaration");
        }
        schema
    }

    pub fn declare(
        &mut self,
        name: &str,
        arity: usize,
        mut attributes: Vec<String>,
    ) -> Result<(), String> {
        if arity == 0 {
            return Err(format!("predicate `{name}` must have arity >= 1"));
        }
        if self.predicates.contains_key(name) {
            return Err(format!("predicate `{name}` declared twice"));
        }
        if attributes.is_empty() {
            attributes = (1..=arity).map(|i| format!("A{i}")).collect();
        } else if attributes.len() != arity {
            return Err(format!(
                "predicate `{name}` has arity {arity} but {} attribute names",
                attributes.len()
            ));
        }
        self.predicates.insert(
            name.to_string(),
            PredicateDecl {
                name: name.to_string(),
                arity,
                attributes,
            },
        );
        Ok(())
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.predicates.get(name).map(|p| p.arity)
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.get(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredicateDecl> {
        self.predicates.values()
    }

    pub fn is_valid_position(&self, pos: &Position) -> bool {
        self.arity(&pos.predicate)
            .is_some_and(|a| pos.index >= 1 && pos.index <= a)
    }

    pub fn conforms(&self, atom: &Atom) -> bool {
        self.arity(&atom.predicate) == Some(atom.args.len())
    }

    /// Parses `R/2.` or `R/2: id, name.` declarations.
    pub fn parse(text: &str) -> Result<Schema, ParseError> {
        let mut cur = Cursor::new(text)?;
        let mut schema = Schema::new();
        while !cur.at_end() {
            let (name, span) = cur.ident()?;
            cur.expect(&Tok::Slash)?;
            let arity = match cur.next() {
                Some((Tok::Int(n), _)) if n > 0 => n as usize,
                _ => return Err(ParseError::invalid(span, "expected a positive arity after `/`")),
            };
            let mut attributes = Vec::new();
            if cur.eat(&Tok::Colon) {
                loop {
                    attributes.push(cur.ident()?.0);
                    if !cur.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            cur.expect(&Tok::Dot)?;
            schema
                .declare(&name, arity, attributes)
                .map_err(|m| ParseError::invalid(span, m))?;
        }
        Ok(schema)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in self.predicates() {
            out.push_str(&format!("{}/{}: {}.\n", p.name, p.arity, p.attributes.join(", ")));
        }
        out
    }
}

/// A ground database atom `R(c1, ..., cn)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Value>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Value>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn has_null(&self) -> bool {
        self.args.iter().any(Value::is_null)
    }
}

/// Shorthand for building atoms in tests and examples: `atom("R", &["a", "null"])`.
/// The token `null` becomes [`Value::Null`], digit strings become integers.
pub fn atom(predicate: &str, args: &[&str]) -> Atom {
    Atom::new(predicate, args.iter().map(|a| value_of(a)).collect())
}

fn value_of(text: &str) -> Value {
    if text == "null" {
        Value::Null
    } else if let Ok(i) = text.parse::<i64>() {
        Value::Integer(i)
    } else {
        Value::sym(text)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, v) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// A database instance under set semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    atoms: BTreeSet<Atom>,
}

impl Instance {
    pub fn new() -> Self {
        Instance::default()
    }

    /// Returns `false` when the atom was already present.
    pub fn insert(&mut self, atom: Atom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.atoms.remove(atom)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    /// Atoms of one predicate, in canonical order.
    pub fn relation<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Atom> + 'a {
        self.atoms.iter().filter(move |a| a.predicate == predicate)
    }

    /// All values occurring in the instance (its active domain, without the
    /// implicit null).
    pub fn values(&self) -> BTreeSet<Value> {
        self.atoms.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    /// Renders the instance in the facts dialect, one fact per line.
    pub fn render(&self) -> String {
        self.atoms.iter().map(|a| format!("{a}.\n")).collect()
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<(), String> {
        match self.atoms.iter().find(|a| !schema.conforms(a)) {
            Some(a) => Err(format!("atom {a} does not conform to the schema")),
            None => Ok(()),
        }
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        Instance {
            atoms: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Instance {
    type Item = &'a Atom;
    type IntoIter = std::collections::btree_set::Iter<'a, Atom>;

    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.atoms.iter())
    }
}

pub(crate) fn parse_value(cur: &mut Cursor) -> Result<Value, ParseError> {
    match cur.next() {
        Some((Tok::Ident(s), _)) if s == "null" => Ok(Value::Null),
        Some((Tok::Ident(s), _)) | Some((Tok::Str(s), _)) => Ok(Value::Symbol(s)),
        Some((Tok::Int(i), _)) => Ok(Value::Integer(i)),
        Some((t, span)) => Err(ParseError::invalid(span, format!("expected a value, found {t}"))),
        None => Err(cur.unexpected("a value").into()),
    }
}

/// Parses the facts dialect: `pred(arg, ..., arg).` per fact.
pub fn parse_instance(text: &str, schema: &Schema) -> Result<Instance, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut inst = Instance::new();
    while !cur.at_end() {
        let (name, span) = cur.ident()?;
        cur.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if !cur.eat(&Tok::RParen) {
            loop {
                args.push(parse_value(&mut cur)?);
                if cur.eat(&Tok::RParen) {
                    break;
                }
                cur.expect(&Tok::Comma)?;
            }
        }
        cur.expect(&Tok::Dot)?;
        check_arity(schema, &name, args.len(), span)?;
        inst.insert(Atom::new(name, args));
    }
    Ok(inst)
}

pub(crate) fn check_arity(
    schema: &Schema,
    name: &str,
    found: usize,
    span: Span,
) -> Result<(), ParseError> {
    match schema.arity(name) {
        None => Err(ParseError::UnknownPredicate {
            name: name.to_string(),
            span,
        }),
        Some(expected) if expected != found => Err(ParseError::ArityMismatch {
            name: name.to_string(),
            expected,
            found,
            span,
        }),
        Some(_) => Ok(()),
    }
}

/// `adom(D) ∪ const(IC) ∪ {null}`: every value a repair may mention.
pub fn active_domain(db: &Instance, ic: &ConstraintSet) -> BTreeSet<Value> {
    let mut dom = db.values();
    dom.extend(ic.constants());
    dom.insert(Value::Null);
    dom
}
