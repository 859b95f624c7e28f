//! Compilation of a database and its constraints into an annotated
//! disjunctive repair program, and extraction of repairs from its stable
//! models.
//!
//! Each schema predicate `R/n` becomes `r_`: used with `n` arguments for the
//! facts of the database, and with `n + 1` arguments when the last one is an
//! annotation — `ta` (advised true), `fa` (advised false), `ts` (true or made
//! true) or `tss` (true in the repair).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::asp::{
    self, Comparison, Const, EngineError, GroundOptions, Program, ProgramAtom, Rule, SolveOptions,
    StableModel,
};
use crate::constraints::{
    is_ric_acyclic, non_conflicting, CmpOp, Conflict, Constraint, ConstraintAtom, ConstraintKind,
    ConstraintSet, Term,
};
use crate::relational::{active_domain, Atom, Instance, Schema, Value};
use crate::satisfaction::transform;

/// Identifiers with a fixed meaning in emitted programs.
const RESERVED: [&str; 7] = ["ta", "fa", "ts", "tss", "v", "not", "null"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Annotation {
    Ta,
    Fa,
    Ts,
    Tss,
}

impl Annotation {
    pub fn token(self) -> &'static str {
        match self {
            Annotation::Ta => "ta",
            Annotation::Fa => "fa",
            Annotation::Ts => "ts",
            Annotation::Tss => "tss",
        }
    }

    fn term(self) -> asp::Term {
        asp::Term::sym(self.token())
    }
}

/// Data value as a program constant. Symbols that would read as variables,
/// annotations or keywords are quoted.
pub fn value_to_const(v: &Value) -> Const {
    match v {
        Value::Null => Const::Null,
        Value::Integer(i) => Const::Int(*i),
        Value::Symbol(s) => {
            let mut chars = s.chars();
            let plain = matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !RESERVED.contains(&s.as_str());
            if plain {
                Const::Sym(s.clone())
            } else {
                Const::Str(s.clone())
            }
        }
    }
}

pub fn const_to_value(c: &Const) -> Value {
    match c {
        Const::Null => Value::Null,
        Const::Int(i) => Value::Integer(*i),
        Const::Sym(s) | Const::Str(s) => Value::Symbol(s.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("predicates {first} and {second} both map to program predicate `{name}`")]
    PredicateNameClash {
        first: String,
        second: String,
        name: String,
    },
    #[error("predicate {0} has no valid program name")]
    InvalidPredicateName(String),
    #[error("constraint {label} is of general form; only universal, referential and NOT NULL constraints compile")]
    UnsupportedConstraintForm { label: String },
    #[error("conflicting constraint set: {}", describe_conflicts(.0))]
    ConflictingIcSet(Vec<Conflict>),
    #[error("referential constraints are cyclic: {}", .cycle.join(" -> "))]
    CyclicRicSet { cycle: Vec<String> },
}

fn describe_conflicts(c: &[Conflict]) -> String {
    c.iter()
        .map(|c| format!("{} guards {} filled by {}", c.nnc, c.position, c.constraint))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Bidirectional map between schema predicates and program predicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicateNames {
    to_program: BTreeMap<String, String>,
    to_schema: BTreeMap<String, String>,
}

impl PredicateNames {
    pub fn from_schema(schema: &Schema) -> Result<Self, CompileError> {
        let mut names = PredicateNames::default();
        for p in schema.predicates() {
            let name = format!("{}_", p.name.to_lowercase());
            if !name.starts_with(|c: char| c.is_ascii_lowercase()) {
                return Err(CompileError::InvalidPredicateName(p.name.clone()));
            }
            if let Some(first) = names.to_schema.get(&name) {
                return Err(CompileError::PredicateNameClash {
                    first: first.clone(),
                    second: p.name.clone(),
                    name,
                });
            }
            names.to_program.insert(p.name.clone(), name.clone());
            names.to_schema.insert(name, p.name.clone());
        }
        Ok(names)
    }

    pub fn program_name(&self, predicate: &str) -> &str {
        &self.to_program[predicate]
    }

    /// The schema predicate of a program predicate. Without a schema entry,
    /// a trailing underscore is dropped.
    pub fn schema_name(&self, program: &str) -> Option<String> {
        match self.to_schema.get(program) {
            Some(n) => Some(n.clone()),
            None if self.to_schema.is_empty() => program.strip_suffix('_').map(str::to_string),
            None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompileOptions {
    /// Compile cyclic sets of referential constraints, with a warning.
    pub allow_cyclic: bool,
}

/// Where a rule of the repair program comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "origin", rename_all = "lowercase")]
pub enum Provenance {
    Fact,
    Constraint { label: String, kind: ConstraintKind },
    Scaffolding { predicate: String },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Fact => f.write_str("database facts"),
            Provenance::Constraint { label, kind } => write!(f, "constraint {label} ({kind})"),
            Provenance::Scaffolding { predicate } => write!(f, "annotations for {predicate}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepairProgram {
    pub program: Program,
    /// Parallel to `program.rules`.
    pub provenance: Vec<Provenance>,
    pub names: PredicateNames,
    pub warnings: Vec<String>,
    domain: BTreeSet<Const>,
}

impl RepairProgram {
    fn push(&mut self, rule: Rule, origin: Provenance) {
        self.program.rules.push(rule);
        self.provenance.push(origin);
    }

    pub fn facts(&self) -> impl Iterator<Item = &Rule> {
        self.program.rules.iter().filter(|r| r.is_fact())
    }

    pub fn denials(&self) -> impl Iterator<Item = &Rule> {
        self.program.rules.iter().filter(|r| r.is_denial())
    }

    /// Rules that are neither facts nor denials.
    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.program.rules.iter().filter(|r| !r.is_fact() && !r.is_denial())
    }

    /// Rules compiled from the constraint labelled `label`.
    pub fn rules_of(&self, label: &str) -> Vec<&Rule> {
        self.program
            .rules
            .iter()
            .zip(&self.provenance)
            .filter(|(_, p)| matches!(p, Provenance::Constraint { label: l, .. } if l == label))
            .map(|(r, _)| r)
            .collect()
    }

    /// Program text in the engine dialect. With `annotate`, each group of
    /// rules is preceded by a comment naming its origin.
    pub fn emit_text(&self, annotate: bool) -> String {
        let mut out = String::new();
        let mut last: Option<&Provenance> = None;
        for (r, p) in self.program.rules.iter().zip(&self.provenance) {
            if annotate && last != Some(p) {
                out.push_str(&format!("% {p}\n"));
            }
            last = Some(p);
            out.push_str(&format!("{r}\n"));
        }
        out
    }

    /// Constants the program may be grounded over: the active domain of the
    /// input plus the annotation tokens.
    pub fn universe(&self) -> BTreeSet<Const> {
        let mut u = self.domain.clone();
        for a in [Annotation::Ta, Annotation::Fa, Annotation::Ts, Annotation::Tss] {
            u.insert(Const::sym(a.token()));
        }
        u
    }

    pub fn ground_options(&self) -> GroundOptions {
        GroundOptions {
            universe: Some(self.universe()),
            ..GroundOptions::default()
        }
    }

    pub fn extract(&self, model: &StableModel) -> Instance {
        extract_database(model, &self.names)
    }
}

/// The database of a stable model: every `p_(ā, tss)` read back as `P(ā)`.
pub fn extract_database(model: &StableModel, names: &PredicateNames) -> Instance {
    let mut out = Instance::new();
    for a in model {
        let Some((Const::Sym(last), args)) = a.args.split_last() else { continue };
        if last != Annotation::Tss.token() {
            continue;
        }
        if let Some(p) = names.schema_name(&a.predicate) {
            out.insert(Atom::new(p, args.iter().map(const_to_value).collect()));
        }
    }
    out
}

/// Maps constraint variables to program variables (uppercase-initial),
/// keeping distinct variables distinct.
struct VarNames(BTreeMap<String, String>);

impl VarNames {
    fn new(c: &Constraint) -> Self {
        let mut vars: Vec<&str> = Vec::new();
        let all = c
            .atoms()
            .flat_map(|a| a.vars())
            .chain(c.existentials.iter().map(String::as_str))
            .chain(c.is_null.as_deref())
            .chain(c.builtins.iter().flat_map(|b| b.vars()));
        for v in all {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let mut map = BTreeMap::new();
        let mut used = BTreeSet::new();
        for v in vars {
            let mut chars = v.chars();
            let base: String = match chars.next() {
                Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
                None => "V".to_string(),
            };
            let base = if base.starts_with(|c: char| c.is_ascii_uppercase()) { base } else { format!("V{base}") };
            let mut name = base.clone();
            let mut k = 1;
            while used.contains(&name) {
                k += 1;
                name = format!("{base}{k}");
            }
            used.insert(name.clone());
            map.insert(v.to_string(), name);
        }
        VarNames(map)
    }

    fn var(&self, v: &str) -> asp::Term {
        asp::Term::Var(self.0[v].clone())
    }

    fn term(&self, t: &Term) -> asp::Term {
        match t {
            Term::Var(v) => self.var(v),
            Term::Const(c) => asp::Term::Const(value_to_const(c)),
        }
    }

    fn not_null(&self, v: &str) -> Comparison {
        Comparison::new(self.var(v), CmpOp::Ne, asp::Term::Const(Const::Null))
    }
}

struct Builder<'a> {
    names: &'a PredicateNames,
}

impl Builder<'_> {
    fn base(&self, a: &ConstraintAtom, vars: &VarNames) -> ProgramAtom {
        ProgramAtom::new(self.names.program_name(&a.predicate), a.terms.iter().map(|t| vars.term(t)).collect())
    }

    fn annotated(&self, a: &ConstraintAtom, vars: &VarNames, ann: Annotation) -> ProgramAtom {
        let mut atom = self.base(a, vars);
        atom.args.push(ann.term());
        atom
    }

    /// One rule per split of the consequent atoms into those checked as
    /// deleted (`fa`) and those checked as absent from the database.
    fn universal(&self, c: &Constraint) -> Vec<Rule> {
        let vars = VarNames::new(c);
        let guards = transform(c).guards;
        let head: Vec<ProgramAtom> = c
            .antecedent
            .iter()
            .map(|a| self.annotated(a, &vars, Annotation::Fa))
            .chain(c.consequent.iter().map(|q| self.annotated(q, &vars, Annotation::Ta)))
            .collect();
        let m = c.consequent.len();
        (0..1u32 << m)
            .rev()
            .map(|mask| {
                let mut pos: Vec<ProgramAtom> = c.antecedent.iter().map(|a| self.annotated(a, &vars, Annotation::Ts)).collect();
                let mut neg = Vec::new();
                for (j, q) in c.consequent.iter().enumerate() {
                    if mask & (1 << (m - 1 - j)) != 0 {
                        pos.push(self.annotated(q, &vars, Annotation::Fa));
                    } else {
                        neg.push(self.base(q, &vars));
                    }
                }
                let builtins = c
                    .builtins
                    .iter()
                    .map(|b| Comparison::new(vars.term(&b.left), b.op.negate(), vars.term(&b.right)))
                    .chain(guards.iter().map(|g| vars.not_null(g)))
                    .collect();
                Rule {
                    head: head.clone(),
                    pos,
                    neg,
                    builtins,
                }
            })
            .collect()
    }

    fn referential(&self, c: &Constraint, aux: &str) -> Vec<Rule> {
        let vars = VarNames::new(c);
        let shape = c.ric_shape().expect("classified as referential");
        let (p, q) = (shape.antecedent, shape.consequent);
        let key: Vec<asp::Term> = shape.key_positions.iter().map(|&i| vars.term(&q.terms[i])).collect();
        let key_vars: Vec<&str> = {
            let mut out = Vec::new();
            for &i in &shape.key_positions {
                let v = q.terms[i].as_var().expect("referential keys are variables");
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            out
        };
        let mut guards: Vec<String> = key_vars.iter().map(|v| v.to_string()).collect();
        for g in transform(c).guards {
            if !guards.contains(&g) {
                guards.push(g);
            }
        }
        let aux_atom = ProgramAtom::new(aux, key.clone());

        let mut inserted = self.annotated(q, &vars, Annotation::Ta);
        for &i in &shape.existential_positions {
            inserted.args[i] = asp::Term::Const(Const::Null);
        }
        let mut rules = vec![Rule {
            head: vec![self.annotated(p, &vars, Annotation::Fa), inserted],
            pos: vec![self.annotated(p, &vars, Annotation::Ts)],
            neg: vec![aux_atom.clone()],
            builtins: guards.iter().map(|g| vars.not_null(g)).collect(),
        }];
        for y in &c.existentials {
            rules.push(Rule {
                head: vec![aux_atom.clone()],
                pos: vec![self.annotated(q, &vars, Annotation::Ts)],
                neg: vec![self.annotated(q, &vars, Annotation::Fa)],
                builtins: key_vars.iter().copied().chain([y.as_str()]).map(|v| vars.not_null(v)).collect(),
            });
        }
        rules
    }

    fn not_null(&self, c: &Constraint) -> Rule {
        let vars = VarNames::new(c);
        let a = &c.antecedent[0];
        let v = c.is_null.as_deref().expect("NOT NULL constraint");
        Rule {
            head: vec![self.annotated(a, &vars, Annotation::Fa)],
            pos: vec![self.annotated(a, &vars, Annotation::Ts)],
            neg: vec![],
            builtins: vec![Comparison::new(vars.var(v), CmpOp::Eq, asp::Term::Const(Const::Null))],
        }
    }

    fn scaffolding(&self, predicate: &str, arity: usize) -> Vec<Rule> {
        let name = self.names.program_name(predicate);
        let vars: Vec<asp::Term> = if arity <= 4 {
            ["X", "Y", "Z", "W"][..arity].iter().map(|v| asp::Term::var(v)).collect()
        } else {
            (1..=arity).map(|i| asp::Term::Var(format!("X{i}"))).collect()
        };
        let at = |ann: Annotation| {
            let mut args = vars.clone();
            args.push(ann.term());
            ProgramAtom::new(name, args)
        };
        let base = ProgramAtom::new(name, vars.clone());
        let rule = |head: Vec<ProgramAtom>, pos: Vec<ProgramAtom>, neg: Vec<ProgramAtom>| Rule {
            head,
            pos,
            neg,
            builtins: vec![],
        };
        vec![
            rule(vec![at(Annotation::Ts)], vec![base], vec![]),
            rule(vec![at(Annotation::Ts)], vec![at(Annotation::Ta)], vec![]),
            rule(vec![at(Annotation::Tss)], vec![at(Annotation::Ts)], vec![at(Annotation::Fa)]),
            rule(vec![], vec![at(Annotation::Ta), at(Annotation::Fa)], vec![]),
        ]
    }
}

/// Database atoms with a null where some referential constraint would insert
/// one. On such inputs the compiled program can have stable models that
/// delete instead of reusing the existing atom, which are not repairs.
pub fn null_filled_references(d: &Instance, ic: &ConstraintSet) -> Vec<(String, Atom)> {
    let mut out = Vec::new();
    for c in ic.of_kind(ConstraintKind::Ric) {
        let Some(shape) = c.ric_shape() else { continue };
        for a in d.relation(&shape.consequent.predicate) {
            if shape.existential_positions.iter().any(|&i| a.args[i].is_null()) {
                out.push((c.label.clone(), a.clone()));
            }
        }
    }
    out
}

pub fn compile(schema: &Schema, d: &Instance, ic: &ConstraintSet, options: &CompileOptions) -> Result<RepairProgram, CompileError> {
    if let Some(c) = ic.iter().find(|c| c.kind == ConstraintKind::General) {
        return Err(CompileError::UnsupportedConstraintForm { label: c.label.clone() });
    }
    let conflicts = non_conflicting(ic);
    if !conflicts.non_conflicting {
        return Err(CompileError::ConflictingIcSet(conflicts.conflicts));
    }
    let mut warnings = Vec::new();
    let acyclic = is_ric_acyclic(ic);
    if !acyclic.acyclic {
        let cycle = acyclic.cycle.unwrap_or_default();
        if !options.allow_cyclic {
            return Err(CompileError::CyclicRicSet { cycle });
        }
        warnings.push(format!(
            "referential constraints are cyclic ({}); stable models need not correspond to repairs",
            cycle.join(" -> ")
        ));
    }
    for (label, atom) in null_filled_references(d, ic) {
        warnings.push(format!(
            "fact {atom} already has null where {label} inserts one; some stable models may extract to non-repairs"
        ));
    }

    let names = PredicateNames::from_schema(schema)?;
    let domain = active_domain(d, ic).iter().map(value_to_const).collect();
    let mut out = RepairProgram {
        program: Program::default(),
        provenance: Vec::new(),
        names: names.clone(),
        warnings,
        domain,
    };
    let b = Builder { names: &names };

    for a in d.iter() {
        let atom = ProgramAtom::new(names.program_name(&a.predicate), a.args.iter().map(|v| asp::Term::Const(value_to_const(v))).collect());
        out.push(Rule::fact(atom), Provenance::Fact);
    }
    let mut aux = 0;
    for c in ic.iter() {
        let origin = Provenance::Constraint {
            label: c.label.clone(),
            kind: c.kind,
        };
        let rules = match c.kind {
            ConstraintKind::Uic => b.universal(c),
            ConstraintKind::Ric => {
                aux += 1;
                b.referential(c, &format!("aux_{aux}"))
            }
            ConstraintKind::Nnc => vec![b.not_null(c)],
            ConstraintKind::General => unreachable!("rejected above"),
        };
        for r in rules {
            out.push(r, origin.clone());
        }
    }
    for p in schema.predicates() {
        let origin = Provenance::Scaffolding { predicate: p.name.clone() };
        for r in b.scaffolding(&p.name, p.arity) {
            out.push(r, origin.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum ProgramRepairError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Repairs computed through the repair program: compile, ground, solve and
/// extract. `shifted` solves the shifted program (requires head-cycle-freeness).
pub fn program_repairs(
    schema: &Schema,
    d: &Instance,
    ic: &ConstraintSet,
    options: &CompileOptions,
    shifted: bool,
) -> Result<BTreeSet<Instance>, ProgramRepairError> {
    let p = compile(schema, d, ic, options)?;
    let models = asp::solve(&p.program, &p.ground_options(), &SolveOptions::default(), shifted)?;
    Ok(models.iter().map(|m| p.extract(m)).collect())
}
