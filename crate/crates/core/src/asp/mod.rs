//! A small disjunctive answer-set engine: program syntax, grounding, stable
//! models, head-cycle-freeness and the shift transformation.
//!
//! The text dialect:
//!
//! ```text
//! p_(a,b).                                  % fact
//! r_(X,Y,fa) v r_(X,Z,fa) :- r_(X,Y,ts), r_(X,Z,ts), Y != Z, X != null.
//! :- p_(X,Y,ta), p_(X,Y,fa).                % denial
//! ```
//!
//! Identifiers starting with an uppercase letter or `_` are variables; other
//! identifiers are symbolic constants, `null` is the null constant, and
//! quoted strings are string constants.

mod ground;
mod hcf;
mod solve;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::constraints::CmpOp;
use crate::lexer::{Cursor, ParseError, SyntaxError, Tok};
use crate::relational::quote;

pub use ground::{ground, GroundAtom, GroundOptions, GroundProgram, GroundRule};
pub use hcf::{is_hcf, shift, HcfReport};
pub use solve::{is_stable_model, satisfies_program, stable_models, SolveOptions, StableModel};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Const {
    Null,
    Int(i64),
    /// A bare lowercase identifier.
    Sym(String),
    /// A quoted string.
    Str(String),
}

impl Const {
    pub fn sym(s: &str) -> Const {
        Const::Sym(s.to_string())
    }

    /// Order used by `<`, `<=`, `>`, `>=`; `None` if either side is null.
    fn compare(&self, other: &Const) -> Result<Option<Ordering>, EngineError> {
        use Const::*;
        match (self, other) {
            (Null, _) | (_, Null) => Ok(None),
            (Int(a), Int(b)) => Ok(Some(a.cmp(b))),
            (Sym(a) | Str(a), Sym(b) | Str(b)) => Ok(Some(a.cmp(b))),
            (a, b) => Err(EngineError::MixedComparison(a.to_string(), b.to_string())),
        }
    }

    pub(crate) fn apply(op: CmpOp, l: &Const, r: &Const) -> Result<bool, EngineError> {
        Ok(match op {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            _ => match l.compare(r)? {
                None => false,
                Some(ord) => match op {
                    CmpOp::Lt => ord == Ordering::Less,
                    CmpOp::Le => ord != Ordering::Greater,
                    CmpOp::Gt => ord == Ordering::Greater,
                    CmpOp::Ge => ord != Ordering::Less,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                },
            },
        })
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Null => f.write_str("null"),
            Const::Int(i) => write!(f, "{i}"),
            Const::Sym(s) => f.write_str(s),
            Const::Str(s) => f.write_str(&quote(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Const),
}

impl Term {
    pub fn var(v: &str) -> Term {
        Term::Var(v.to_string())
    }

    pub fn sym(s: &str) -> Term {
        Term::Const(Const::sym(s))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProgramAtom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl ProgramAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        ProgramAtom {
            predicate: predicate.into(),
            args,
        }
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for ProgramAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Comparison {
    pub left: Term,
    pub op: CmpOp,
    pub right: Term,
}

impl Comparison {
    pub fn new(left: Term, op: CmpOp, right: Term) -> Self {
        Comparison { left, op, right }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op.symbol(), self.right)
    }
}

/// `h1 v ... v hn :- p1, ..., not n1, ..., builtins.` An empty head is a
/// denial; a single head with an empty body is a fact.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Vec<ProgramAtom>,
    pub pos: Vec<ProgramAtom>,
    pub neg: Vec<ProgramAtom>,
    pub builtins: Vec<Comparison>,
}

impl Rule {
    pub fn fact(atom: ProgramAtom) -> Rule {
        Rule {
            head: vec![atom],
            ..Rule::default()
        }
    }

    pub fn is_fact(&self) -> bool {
        self.head.len() == 1 && self.pos.is_empty() && self.neg.is_empty() && self.builtins.is_empty()
    }

    pub fn is_denial(&self) -> bool {
        self.head.is_empty()
    }

    /// Variables outside the positive body, if any, make the rule unsafe.
    pub fn unsafe_vars(&self) -> BTreeSet<&str> {
        let bound: BTreeSet<&str> = self.pos.iter().flat_map(|a| a.vars()).collect();
        self.head
            .iter()
            .chain(&self.neg)
            .flat_map(|a| a.vars())
            .chain(self.builtins.iter().flat_map(|b| {
                [&b.left, &b.right].into_iter().filter_map(|t| match t {
                    Term::Var(v) => Some(v.as_str()),
                    Term::Const(_) => None,
                })
            }))
            .filter(|v| !bound.contains(v))
            .collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<String> = self.head.iter().map(|a| a.to_string()).collect();
        f.write_str(&head.join(" v "))?;
        let body: Vec<String> = self
            .pos
            .iter()
            .map(|a| a.to_string())
            .chain(self.neg.iter().map(|a| format!("not {a}")))
            .chain(self.builtins.iter().map(|b| b.to_string()))
            .collect();
        if !body.is_empty() {
            if !head.is_empty() {
                f.write_str(" ")?;
            }
            write!(f, ":- {}", body.join(", "))?;
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        Program { rules }
    }

    pub fn constants(&self) -> BTreeSet<Const> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            let atoms = r.head.iter().chain(&r.pos).chain(&r.neg);
            let terms = atoms
                .flat_map(|a| a.args.iter())
                .chain(r.builtins.iter().flat_map(|b| [&b.left, &b.right]));
            for t in terms {
                if let Term::Const(c) = t {
                    out.insert(c.clone());
                }
            }
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unsafe rule `{rule}`: variable(s) {vars} do not occur in the positive body")]
    UnsafeRule { rule: String, vars: String },
    #[error("constant `{0}` of the program is outside the grounding universe")]
    ConstantOutsideUniverse(String),
    #[error("grounding too large: more than {limit} {what}")]
    GroundingTooLarge { what: &'static str, limit: usize },
    #[error("search limit of {limit} decisions exceeded")]
    SearchLimit { limit: usize },
    #[error("program is not head-cycle-free: atoms {first} and {second} of one rule head share a cycle")]
    NotHcf { first: String, second: String },
    #[error("cannot compare `{0}` with `{1}`")]
    MixedComparison(String, String),
}

fn is_variable(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut cur = Cursor::new(text)?;
    let mut rules = Vec::new();
    while !cur.at_end() {
        rules.push(parse_rule(&mut cur)?);
    }
    Ok(Program { rules })
}

fn parse_rule(cur: &mut Cursor) -> Result<Rule, ParseError> {
    let mut rule = Rule::default();
    if !matches!(cur.peek(), Some(Tok::If)) {
        loop {
            rule.head.push(parse_atom(cur)?);
            if !(cur.eat_keyword("v") || cur.eat(&Tok::Pipe)) {
                break;
            }
        }
    }
    if cur.eat(&Tok::If) {
        loop {
            parse_literal(cur, &mut rule)?;
            if !cur.eat(&Tok::Comma) {
                break;
            }
        }
    } else if rule.head.is_empty() {
        return Err(cur.unexpected("a rule").into());
    }
    cur.expect(&Tok::Dot)?;
    Ok(rule)
}

fn parse_literal(cur: &mut Cursor, rule: &mut Rule) -> Result<(), ParseError> {
    let is_atom_start = |cur: &Cursor, k: usize| {
        matches!(cur.peek_nth(k), Some(Tok::Ident(s)) if !is_variable(s) && s != "null")
            && !matches!(cur.peek_nth(k + 1), Some(t) if op_of(t).is_some())
    };
    if matches!(cur.peek(), Some(Tok::Ident(s)) if s == "not") && is_atom_start(cur, 1) {
        cur.next();
        rule.neg.push(parse_atom(cur)?);
    } else if is_atom_start(cur, 0) {
        rule.pos.push(parse_atom(cur)?);
    } else {
        let left = parse_term(cur)?;
        let op = cur.peek().and_then(op_of).ok_or_else(|| cur.unexpected("a comparison operator"))?;
        cur.next();
        let right = parse_term(cur)?;
        rule.builtins.push(Comparison::new(left, op, right));
    }
    Ok(())
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

fn parse_atom(cur: &mut Cursor) -> Result<ProgramAtom, ParseError> {
    let (name, span) = cur.ident()?;
    if is_variable(&name) || name == "not" || name == "null" || name == "v" {
        return Err(SyntaxError::new(span, format!("`{name}` cannot be a predicate name")).into());
    }
    let mut args = Vec::new();
    if cur.eat(&Tok::LParen) {
        loop {
            args.push(parse_term(cur)?);
            if cur.eat(&Tok::RParen) {
                break;
            }
            cur.expect(&Tok::Comma)?;
        }
    }
    Ok(ProgramAtom::new(name, args))
}

fn parse_term(cur: &mut Cursor) -> Result<Term, ParseError> {
    let span = cur.span();
    match cur.next() {
        Some((Tok::Ident(s), _)) if s == "null" => Ok(Term::Const(Const::Null)),
        Some((Tok::Ident(s), _)) if is_variable(&s) => Ok(Term::Var(s)),
        Some((Tok::Ident(s), _)) => Ok(Term::Const(Const::Sym(s))),
        Some((Tok::Int(i), _)) => Ok(Term::Const(Const::Int(i))),
        Some((Tok::Str(s), _)) => Ok(Term::Const(Const::Str(s))),
        Some((t, sp)) => Err(SyntaxError::new(sp, format!("expected a term, found {t}")).into()),
        None => Err(SyntaxError::new(span, "expected a term, found end of input").into()),
    }
}

/// Grounds and solves in one step; `shifted` routes head-cycle-free programs
/// through the shift transformation first.
pub fn solve(program: &Program, ground_opts: &GroundOptions, solve_opts: &SolveOptions, shifted: bool) -> Result<Vec<StableModel>, EngineError> {
    let g = ground(program, ground_opts)?;
    if shifted {
        stable_models(&shift(&g)?, solve_opts)
    } else {
        stable_models(&g, solve_opts)
    }
}
