use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use super::{Comparison, Const, EngineError, Program, ProgramAtom, Rule, Term};
use crate::constraints::CmpOp;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Const>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Const>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args,
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

/// A ground rule over atom indices of its [`GroundProgram`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundRule {
    pub head: Vec<usize>,
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct GroundProgram {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    pub rules: Vec<GroundRule>,
}

impl GroundProgram {
    /// Interns the atoms in canonical order, deduplicating rules.
    pub(crate) fn build(rules: impl IntoIterator<Item = (Vec<GroundAtom>, Vec<GroundAtom>, Vec<GroundAtom>)>) -> Self {
        let rules: Vec<_> = rules.into_iter().collect();
        let atoms: BTreeSet<&GroundAtom> = rules.iter().flat_map(|(h, p, n)| h.iter().chain(p).chain(n)).collect();
        let atoms: Vec<GroundAtom> = atoms.into_iter().cloned().collect();
        let index: HashMap<GroundAtom, usize> = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let ids = |v: &[GroundAtom]| {
            let mut out: Vec<usize> = v.iter().map(|a| index[a]).collect();
            out.sort_unstable();
            out.dedup();
            out
        };
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (h, p, n) in &rules {
            let r = GroundRule {
                head: ids(h),
                pos: ids(p),
                neg: ids(n),
            };
            if seen.insert(r.clone()) {
                out.push(r);
            }
        }
        GroundProgram {
            atoms,
            index,
            rules: out,
        }
    }

    pub(crate) fn with_rules(&self, rules: Vec<GroundRule>) -> Self {
        GroundProgram {
            atoms: self.atoms.clone(),
            index: self.index.clone(),
            rules,
        }
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &GroundAtom {
        &self.atoms[i]
    }

    pub fn lookup(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn rule_text(&self, r: &GroundRule) -> String {
        let name = |i: &usize| self.atoms[*i].to_string();
        let head: Vec<String> = r.head.iter().map(name).collect();
        let body: Vec<String> = r
            .pos
            .iter()
            .map(name)
            .chain(r.neg.iter().map(|i| format!("not {}", self.atoms[*i])))
            .collect();
        let mut s = head.join(" v ");
        if !body.is_empty() {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(":- ");
            s.push_str(&body.join(", "));
        }
        s.push('.');
        s
    }
}

impl fmt::Display for GroundProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{}", self.rule_text(r))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GroundOptions {
    /// Constants the variables may range over. Every constant of the program
    /// must belong to it; `None` means the program's own constants.
    pub universe: Option<BTreeSet<Const>>,
    pub max_atoms: usize,
    pub max_rules: usize,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            universe: None,
            max_atoms: 200_000,
            max_rules: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Const),
}

#[derive(Debug)]
struct SlotAtom {
    predicate: String,
    args: Vec<Slot>,
}

/// A rule with variables numbered, and each builtin scheduled right after
/// the positive body atom that binds its last variable.
struct CompiledRule {
    head: Vec<SlotAtom>,
    pos: Vec<SlotAtom>,
    neg: Vec<SlotAtom>,
    checks: Vec<Vec<(Slot, CmpOp, Slot)>>,
    nvars: usize,
}

fn compile(rule: &Rule) -> CompiledRule {
    let mut vars: HashMap<&str, usize> = HashMap::new();
    fn slot<'r>(t: &'r Term, vars: &mut HashMap<&'r str, usize>) -> Slot {
        match t {
            Term::Const(c) => Slot::Const(c.clone()),
            Term::Var(v) => {
                let n = vars.len();
                Slot::Var(*vars.entry(v.as_str()).or_insert(n))
            }
        }
    }
    fn atom<'r>(a: &'r ProgramAtom, vars: &mut HashMap<&'r str, usize>) -> SlotAtom {
        SlotAtom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| slot(t, vars)).collect(),
        }
    }
    let mut bound_at = Vec::new();
    let mut pos = Vec::new();
    for a in &rule.pos {
        pos.push(atom(a, &mut vars));
        bound_at.push(vars.len());
    }
    let head = rule.head.iter().map(|a| atom(a, &mut vars)).collect();
    let neg = rule.neg.iter().map(|a| atom(a, &mut vars)).collect();
    let mut checks: Vec<Vec<(Slot, CmpOp, Slot)>> = (0..=rule.pos.len()).map(|_| Vec::new()).collect();
    for Comparison { left, op, right } in &rule.builtins {
        let (l, r) = (slot(left, &mut vars), slot(right, &mut vars));
        let last = [&l, &r]
            .iter()
            .filter_map(|s| match s {
                Slot::Var(v) => Some(*v),
                Slot::Const(_) => None,
            })
            .max();
        // position after which every variable of the builtin is bound
        let at = match last {
            None => 0,
            Some(v) => bound_at.iter().position(|&n| v < n).map_or(rule.pos.len(), |i| i + 1),
        };
        checks[at].push((l, *op, r));
    }
    CompiledRule {
        head,
        pos,
        neg,
        checks,
        nvars: vars.len(),
    }
}

fn value<'a>(s: &'a Slot, binding: &'a [Option<Const>]) -> &'a Const {
    match s {
        Slot::Const(c) => c,
        Slot::Var(v) => binding[*v].as_ref().expect("safe rule binds every variable"),
    }
}

fn instantiate(a: &SlotAtom, binding: &[Option<Const>]) -> GroundAtom {
    GroundAtom::new(a.predicate.clone(), a.args.iter().map(|s| value(s, binding).clone()).collect())
}

type Facts = HashMap<String, Vec<Vec<Const>>>;

type Emit<'a> = dyn FnMut(&[Option<Const>]) -> Result<(), EngineError> + 'a;

/// Calls `emit` for every binding of the positive body over `facts` that
/// passes the builtins.
fn join(
    rule: &CompiledRule,
    facts: &Facts,
    depth: usize,
    binding: &mut Vec<Option<Const>>,
    emit: &mut Emit<'_>,
) -> Result<(), EngineError> {
    for (l, op, r) in &rule.checks[depth] {
        if !Const::apply(*op, value(l, binding), value(r, binding))? {
            return Ok(());
        }
    }
    let Some(atom) = rule.pos.get(depth) else {
        return emit(binding);
    };
    let Some(tuples) = facts.get(&atom.predicate) else {
        return Ok(());
    };
    'tuples: for t in tuples {
        if t.len() != atom.args.len() {
            continue;
        }
        let mut newly = Vec::new();
        for (s, c) in atom.args.iter().zip(t) {
            match s {
                Slot::Const(k) if k != c => {
                    for v in newly {
                        binding[v] = None;
                    }
                    continue 'tuples;
                }
                Slot::Const(_) => {}
                Slot::Var(v) => match &binding[*v] {
                    Some(b) if b != c => {
                        for v in newly {
                            binding[v] = None;
                        }
                        continue 'tuples;
                    }
                    Some(_) => {}
                    None => {
                        binding[*v] = Some(c.clone());
                        newly.push(*v);
                    }
                },
            }
        }
        join(rule, facts, depth + 1, binding, emit)?;
        for v in newly {
            binding[v] = None;
        }
    }
    Ok(())
}

/// Instantiates `program` over the atoms that are possibly derivable from
/// its facts, reading negation optimistically. Negative literals over atoms
/// that can never be derived are dropped, and rules blocked by a fact are
/// removed; the result has the same stable models as the full instantiation.
pub fn ground(program: &Program, options: &GroundOptions) -> Result<GroundProgram, EngineError> {
    for r in &program.rules {
        let vars = r.unsafe_vars();
        if !vars.is_empty() {
            return Err(EngineError::UnsafeRule {
                rule: r.to_string(),
                vars: vars.into_iter().collect::<Vec<_>>().join(", "),
            });
        }
    }
    if let Some(u) = &options.universe {
        if let Some(c) = program.constants().into_iter().find(|c| !u.contains(c)) {
            return Err(EngineError::ConstantOutsideUniverse(c.to_string()));
        }
    }
    let compiled: Vec<CompiledRule> = program.rules.iter().map(compile).collect();

    let mut derivable: HashSet<GroundAtom> = HashSet::new();
    let mut facts: Facts = HashMap::new();
    loop {
        let mut fresh = Vec::new();
        for r in &compiled {
            let mut binding = vec![None; r.nvars];
            join(r, &facts, 0, &mut binding, &mut |b| {
                for h in &r.head {
                    let g = instantiate(h, b);
                    if !derivable.contains(&g) {
                        fresh.push(g);
                    }
                }
                Ok(())
            })?;
        }
        if fresh.is_empty() {
            break;
        }
        for g in fresh {
            if derivable.insert(g.clone()) {
                facts.entry(g.predicate).or_default().push(g.args);
            }
        }
        if derivable.len() > options.max_atoms {
            return Err(EngineError::GroundingTooLarge {
                what: "atoms",
                limit: options.max_atoms,
            });
        }
    }

    let certain: HashSet<GroundAtom> = compiled
        .iter()
        .filter(|r| r.pos.is_empty() && r.neg.is_empty() && r.head.len() == 1 && r.checks[0].is_empty())
        .map(|r| instantiate(&r.head[0], &[]))
        .collect();
    let mut rules = Vec::new();
    for r in &compiled {
        let mut binding = vec![None; r.nvars];
        join(r, &facts, 0, &mut binding, &mut |b| {
            let mut neg = Vec::new();
            for a in &r.neg {
                let g = instantiate(a, b);
                if certain.contains(&g) {
                    return Ok(());
                }
                if derivable.contains(&g) {
                    neg.push(g);
                }
            }
            let head = r.head.iter().map(|a| instantiate(a, b)).collect();
            let pos = r.pos.iter().map(|a| instantiate(a, b)).collect();
            rules.push((head, pos, neg));
            if rules.len() > options.max_rules {
                return Err(EngineError::GroundingTooLarge {
                    what: "rules",
                    limit: options.max_rules,
                });
            }
            Ok(())
        })?;
    }
    Ok(GroundProgram::build(rules))
}
