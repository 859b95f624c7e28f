//! Queries and consistent query answering.
//!
//! Query syntax, with uppercase-initial identifiers as variables:
//!
//! ```text
//! ans(X,Y) <- S(X,Y), not R(X,Y), X != a.
//! ans <- S(null,a).                          % boolean
//! ```
//!
//! Answers are computed with null as an ordinary constant. Consistent
//! answers are those returned in every repair, found either by enumerating
//! repairs or by cautious reasoning over the repair program.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::asp::{self, Comparison, Program, ProgramAtom, Rule, SolveOptions};
use crate::compiler::{compile, const_to_value, value_to_const, Annotation, CompileOptions, ProgramRepairError};
use crate::constraints::{Builtin, CmpOp, ConstraintAtom, ConstraintSet, Term, Valuation};
use crate::lexer::{Cursor, ParseError, Span, Tok};
use crate::relational::{check_arity, EvalError, Instance, Schema, Value};
use crate::repair::{repairs, RepairError, RepairOptions};

/// Head predicate of the rule a query becomes inside a repair program.
pub const ANSWER_PREDICATE: &str = "cqa_answer";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub name: String,
    pub head: Vec<Term>,
    pub pos: Vec<ConstraintAtom>,
    pub neg: Vec<ConstraintAtom>,
    pub builtins: Vec<Builtin>,
}

impl Query {
    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    fn unsafe_vars(&self) -> BTreeSet<&str> {
        let bound: BTreeSet<&str> = self.pos.iter().flat_map(|a| a.vars()).collect();
        self.head
            .iter()
            .filter_map(Term::as_var)
            .chain(self.neg.iter().flat_map(|a| a.vars()))
            .chain(self.builtins.iter().flat_map(|b| b.vars()))
            .filter(|v| !bound.contains(v))
            .collect()
    }
}

/// Terms print as in the query syntax: bare lowercase constants, quoted
/// otherwise.
fn show_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Const(c) => value_to_const(c).to_string(),
    }
}

fn show_atom(a: &ConstraintAtom) -> String {
    let args: Vec<String> = a.terms.iter().map(show_term).collect();
    format!("{}({})", a.predicate, args.join(","))
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.head.is_empty() {
            let h: Vec<String> = self.head.iter().map(show_term).collect();
            write!(f, "({})", h.join(","))?;
        }
        let body: Vec<String> = self
            .pos
            .iter()
            .map(show_atom)
            .chain(self.neg.iter().map(|a| format!("not {}", show_atom(a))))
            .chain(self.builtins.iter().map(|b| format!("{} {} {}", show_term(&b.left), b.op.symbol(), show_term(&b.right))))
            .collect();
        write!(f, " <- {}.", body.join(", "))
    }
}

fn is_variable(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
}

fn parse_term(cur: &mut Cursor) -> Result<Term, ParseError> {
    let span = cur.span();
    match cur.next() {
        Some((Tok::Ident(s), _)) if s == "null" => Ok(Term::Const(Value::Null)),
        Some((Tok::Ident(s), _)) if is_variable(&s) => Ok(Term::Var(s)),
        Some((Tok::Ident(s), _)) | Some((Tok::Str(s), _)) => Ok(Term::Const(Value::Symbol(s))),
        Some((Tok::Int(i), _)) => Ok(Term::Const(Value::Integer(i))),
        Some((t, sp)) => Err(ParseError::invalid(sp, format!("expected a term, found {t}"))),
        None => Err(ParseError::invalid(span, "expected a term, found end of input")),
    }
}

fn parse_args(cur: &mut Cursor) -> Result<Vec<Term>, ParseError> {
    let mut args = Vec::new();
    if cur.eat(&Tok::LParen) && !cur.eat(&Tok::RParen) {
        loop {
            args.push(parse_term(cur)?);
            if cur.eat(&Tok::RParen) {
                break;
            }
            cur.expect(&Tok::Comma)?;
        }
    }
    Ok(args)
}

fn parse_atom(cur: &mut Cursor, schema: &Schema) -> Result<ConstraintAtom, ParseError> {
    let (name, span) = cur.ident()?;
    let terms = parse_args(cur)?;
    check_arity(schema, &name, terms.len(), span)?;
    Ok(ConstraintAtom::new(&name, terms))
}

fn op_of(t: &Tok) -> Option<CmpOp> {
    Some(match t {
        Tok::Eq => CmpOp::Eq,
        Tok::Ne => CmpOp::Ne,
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        _ => return None,
    })
}

pub fn parse_query(text: &str, schema: &Schema) -> Result<Query, ParseError> {
    let mut cur = Cursor::new(text)?;
    let start: Span = cur.span();
    let (name, _) = cur.ident()?;
    let head = parse_args(&mut cur)?;
    if !(cur.eat(&Tok::LeftArrow) || cur.eat(&Tok::If)) {
        return Err(cur.unexpected("`<-`").into());
    }
    let mut q = Query {
        name,
        head,
        pos: vec![],
        neg: vec![],
        builtins: vec![],
    };
    loop {
        let atom_at = |k: usize| {
            matches!(cur.peek_nth(k), Some(Tok::Ident(_))) && matches!(cur.peek_nth(k + 1), Some(Tok::LParen))
        };
        if matches!(cur.peek(), Some(Tok::Ident(s)) if s == "not") && atom_at(1) {
            cur.next();
            q.neg.push(parse_atom(&mut cur, schema)?);
        } else if atom_at(0) {
            q.pos.push(parse_atom(&mut cur, schema)?);
        } else {
            let left = parse_term(&mut cur)?;
            let op = cur.peek().and_then(op_of).ok_or_else(|| cur.unexpected("a comparison operator"))?;
            cur.next();
            let right = parse_term(&mut cur)?;
            q.builtins.push(Builtin::new(left, op, right));
        }
        if !cur.eat(&Tok::Comma) {
            break;
        }
    }
    cur.eat(&Tok::Dot);
    if !cur.at_end() {
        return Err(cur.unexpected("end of query").into());
    }
    let unsafe_vars = q.unsafe_vars();
    if !unsafe_vars.is_empty() {
        let vars: Vec<&str> = unsafe_vars.into_iter().collect();
        return Err(ParseError::invalid(
            start,
            format!("unsafe query: {} not bound by a positive atom", vars.join(", ")),
        ));
    }
    Ok(q)
}

/// Answers of a query: tuples for the head variables; a boolean query is
/// true iff it has the empty tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    pub boolean: bool,
    pub tuples: BTreeSet<Vec<Value>>,
}

impl AnswerSet {
    pub fn empty(boolean: bool) -> Self {
        AnswerSet {
            boolean,
            tuples: BTreeSet::new(),
        }
    }

    pub fn holds(&self) -> bool {
        !self.tuples.is_empty()
    }

    pub fn intersect(&self, other: &AnswerSet) -> AnswerSet {
        AnswerSet {
            boolean: self.boolean,
            tuples: self.tuples.intersection(&other.tuples).cloned().collect(),
        }
    }

    /// Drops tuples mentioning null.
    pub fn without_nulls(&self) -> AnswerSet {
        AnswerSet {
            boolean: self.boolean,
            tuples: self.tuples.iter().filter(|t| !t.iter().any(Value::is_null)).cloned().collect(),
        }
    }

    pub fn render(&self) -> String {
        if self.boolean {
            return if self.holds() { "yes\n" } else { "no\n" }.to_string();
        }
        self.tuples
            .iter()
            .map(|t| format!("({})\n", t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")))
            .collect()
    }
}

impl Serialize for AnswerSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1))?;
        if self.boolean {
            map.serialize_entry("answer", &self.holds())?;
        } else {
            map.serialize_entry("tuples", &self.tuples)?;
        }
        map.end()
    }
}

fn matches(terms: &[Term], args: &[Value], val: &Valuation) -> Option<Valuation> {
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

/// Evaluates `q` on `d` with null as an ordinary constant.
pub fn evaluate(d: &Instance, q: &Query) -> Result<AnswerSet, EvalError> {
    let mut vals = vec![Valuation::new()];
    for a in &q.pos {
        vals = vals
            .iter()
            .flat_map(|v| d.relation(&a.predicate).filter_map(|f| matches(&a.terms, &f.args, v)).collect::<Vec<_>>())
            .collect();
    }
    let mut out = AnswerSet::empty(q.is_boolean());
    'vals: for v in &vals {
        for b in &q.builtins {
            if !b.eval(v)? {
                continue 'vals;
            }
        }
        let blocked = q
            .neg
            .iter()
            .any(|a| d.relation(&a.predicate).any(|f| matches(&a.terms, &f.args, v).is_some()));
        if !blocked {
            out.tuples.insert(q.head.iter().map(|t| t.resolve(v).expect("safe query").clone()).collect());
        }
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum CqaError {
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Program(#[from] ProgramRepairError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Engine(#[from] asp::EngineError),
}

/// Answers true in every repair, by enumerating the repairs.
pub fn consistent_answers(d: &Instance, ic: &ConstraintSet, q: &Query, options: &RepairOptions) -> Result<AnswerSet, CqaError> {
    let reps = repairs(d, ic, options)?;
    let per_repair: Vec<AnswerSet> = reps
        .repairs
        .par_iter()
        .map(|r| evaluate(&r.instance, q))
        .collect::<Result<_, _>>()?;
    let mut it = per_repair.into_iter();
    let first = it.next().unwrap_or_else(|| AnswerSet::empty(q.is_boolean()));
    Ok(it.fold(first, |acc, a| acc.intersect(&a)))
}

/// The query as a rule over the repair predicates: `cqa_answer(head) :-` the
/// body with every atom read at annotation `tss`.
pub fn query_rule(q: &Query, names: &crate::compiler::PredicateNames) -> Rule {
    let term = |t: &Term| match t {
        Term::Var(v) => asp::Term::Var(v.clone()),
        Term::Const(c) => asp::Term::Const(value_to_const(c)),
    };
    let atom = |a: &ConstraintAtom| {
        let mut args: Vec<asp::Term> = a.terms.iter().map(term).collect();
        args.push(asp::Term::sym(Annotation::Tss.token()));
        ProgramAtom::new(names.program_name(&a.predicate), args)
    };
    Rule {
        head: vec![ProgramAtom::new(ANSWER_PREDICATE, q.head.iter().map(term).collect())],
        pos: q.pos.iter().map(atom).collect(),
        neg: q.neg.iter().map(atom).collect(),
        builtins: q.builtins.iter().map(|b| Comparison::new(term(&b.left), b.op, term(&b.right))).collect(),
    }
}

/// Answers derived in every stable model of the repair program extended
/// with the query rule.
pub fn consistent_answers_via_program(
    schema: &Schema,
    d: &Instance,
    ic: &ConstraintSet,
    q: &Query,
    options: &CompileOptions,
) -> Result<AnswerSet, CqaError> {
    let mut p = compile(schema, d, ic, options).map_err(ProgramRepairError::from)?;
    let rule = query_rule(q, &p.names);
    let mut options = p.ground_options();
    // Query constants absent from the data extend the universe; the query
    // rule is safe, so this cannot change the repair models.
    if let Some(u) = options.universe.as_mut() {
        u.extend(Program::new(vec![rule.clone()]).constants());
    }
    p.program.rules.push(rule);
    let g = asp::ground(&p.program, &options)?;
    let models = asp::stable_models(&g, &SolveOptions::default())?;
    let answers = models.iter().map(|m| {
        let tuples = m
            .iter()
            .filter(|a| a.predicate == ANSWER_PREDICATE)
            .map(|a| a.args.iter().map(const_to_value).collect())
            .collect();
        AnswerSet {
            boolean: q.is_boolean(),
            tuples,
        }
    });
    Ok(answers.reduce(|acc, a| acc.intersect(&a)).unwrap_or_else(|| AnswerSet::empty(q.is_boolean())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::parse_instance;

    fn schema() -> Schema {
        Schema::from_arities([("P", 2), ("R", 2), ("S", 2)])
    }

    #[test]
    fn parses_queries() {
        let q = parse_query("ans(X,Y) <- S(X,Y), not R(X,Y), X != a.", &schema()).unwrap();
        assert_eq!(q.pos.len(), 1);
        assert_eq!(q.neg.len(), 1);
        assert_eq!(q.builtins[0].right, Term::Const(Value::sym("a")));
        assert_eq!(q.to_string(), "ans(X,Y) <- S(X,Y), not R(X,Y), X != a.");
        let b = parse_query("ans :- S(null, a)", &schema()).unwrap();
        assert!(b.is_boolean());
        assert_eq!(b.pos[0].terms[0], Term::Const(Value::Null));
        let quoted = parse_query("ans(X) <- S(X,'Bob').", &schema()).unwrap();
        assert_eq!(parse_query(&quoted.to_string(), &schema()).unwrap(), quoted);
    }

    #[test]
    fn rejects_unsafe_and_malformed() {
        for bad in [
            "ans(X) <- S(Y,Y).",
            "ans(X) <- S(X,X), not R(X,Z).",
            "ans(X) <- S(X,X), X < Z.",
            "ans(X) <- T(X).",
            "ans(X) <- S(X).",
            "ans(X) S(X,X).",
        ] {
            assert!(parse_query(bad, &schema()).is_err(), "{bad}");
        }
    }

    #[test]
    fn evaluation_treats_null_as_a_constant() {
        let d = parse_instance("S(null,a). S(e,f). R(e,f).", &schema()).unwrap();
        let q = parse_query("ans(X,Y) <- S(X,Y), not R(X,Y).", &schema()).unwrap();
        let a = evaluate(&d, &q).unwrap();
        assert_eq!(a.tuples, BTreeSet::from([vec![Value::Null, Value::sym("a")]]));
        assert!(a.without_nulls().tuples.is_empty());
        let join = parse_query("ans(X) <- S(X,Y), S(Z,Y).", &schema()).unwrap();
        assert_eq!(evaluate(&d, &join).unwrap().tuples.len(), 2);
        let b = parse_query("ans <- S(null,a).", &schema()).unwrap();
        assert!(evaluate(&d, &b).unwrap().holds());
        assert_eq!(evaluate(&d, &b).unwrap().render(), "yes\n");
    }
}
