use std::collections::{BTreeSet, VecDeque};

use super::{EngineError, GroundAtom, GroundProgram, GroundRule};

/// A stable model, as a canonically ordered set of atoms.
pub type StableModel = BTreeSet<GroundAtom>;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Bound on branching decisions before giving up.
    pub max_decisions: usize,
    /// Stop after this many models.
    pub max_models: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_decisions: 2_000_000,
            max_models: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    Unknown,
    True,
    False,
}

struct Conflict;

struct Search<'a> {
    g: &'a GroundProgram,
    /// Rules mentioning an atom anywhere.
    occurs: Vec<Vec<usize>>,
    /// Rules with the atom in their head.
    supports: Vec<Vec<usize>>,
    decisions: usize,
    opts: &'a SolveOptions,
    models: Vec<Vec<bool>>,
}

impl<'a> Search<'a> {
    fn new(g: &'a GroundProgram, opts: &'a SolveOptions) -> Self {
        let n = g.atoms().len();
        let mut occurs = vec![Vec::new(); n];
        let mut supports = vec![Vec::new(); n];
        for (i, r) in g.rules.iter().enumerate() {
            for &a in r.head.iter().chain(&r.pos).chain(&r.neg) {
                if occurs[a].last() != Some(&i) {
                    occurs[a].push(i);
                }
            }
            for &h in &r.head {
                supports[h].push(i);
            }
        }
        Search {
            g,
            occurs,
            supports,
            decisions: 0,
            opts,
            models: Vec::new(),
        }
    }

    fn body_false(r: &GroundRule, a: &[Val]) -> bool {
        r.pos.iter().any(|&p| a[p] == Val::False) || r.neg.iter().any(|&n| a[n] == Val::True)
    }

    fn assign(a: &mut [Val], atom: usize, v: Val, queue: &mut VecDeque<usize>) -> Result<(), Conflict> {
        match a[atom] {
            Val::Unknown => {
                a[atom] = v;
                queue.push_back(atom);
                Ok(())
            }
            cur if cur == v => Ok(()),
            _ => Err(Conflict),
        }
    }

    /// Forward and backward rule propagation plus support.
    fn check_rule(&self, ri: usize, a: &mut [Val], queue: &mut VecDeque<usize>) -> Result<(), Conflict> {
        let r = &self.g.rules[ri];
        if Self::body_false(r, a) || r.head.iter().any(|&h| a[h] == Val::True) {
            return Ok(());
        }
        let open_body: Vec<(usize, bool)> = r
            .pos
            .iter()
            .filter(|&&p| a[p] == Val::Unknown)
            .map(|&p| (p, true))
            .chain(r.neg.iter().filter(|&&n| a[n] == Val::Unknown).map(|&n| (n, false)))
            .collect();
        let open_head: Vec<usize> = r.head.iter().copied().filter(|&h| a[h] == Val::Unknown).collect();
        match (open_body.len(), open_head.len()) {
            (0, 0) => Err(Conflict),
            (0, 1) => Self::assign(a, open_head[0], Val::True, queue),
            (1, 0) => {
                let (atom, positive) = open_body[0];
                Self::assign(a, atom, if positive { Val::False } else { Val::True }, queue)
            }
            _ => Ok(()),
        }
    }

    fn check_support(&self, atom: usize, a: &mut [Val], queue: &mut VecDeque<usize>) -> Result<(), Conflict> {
        if a[atom] == Val::False {
            return Ok(());
        }
        let supported = self.supports[atom].iter().any(|&ri| {
            let r = &self.g.rules[ri];
            !Self::body_false(r, a) && r.head.iter().all(|&h| h == atom || a[h] != Val::True)
        });
        if supported {
            Ok(())
        } else {
            Self::assign(a, atom, Val::False, queue)
        }
    }

    fn propagate(&self, a: &mut [Val], mut queue: VecDeque<usize>) -> Result<(), Conflict> {
        while let Some(x) = queue.pop_front() {
            for &ri in &self.occurs[x] {
                self.check_rule(ri, a, &mut queue)?;
                for &h in &self.g.rules[ri].head {
                    self.check_support(h, a, &mut queue)?;
                }
            }
            self.check_support(x, a, &mut queue)?;
        }
        Ok(())
    }

    fn initial(&self) -> Result<Vec<Val>, Conflict> {
        let n = self.g.atoms().len();
        let mut a = vec![Val::Unknown; n];
        let mut queue = VecDeque::new();
        for ri in 0..self.g.rules.len() {
            self.check_rule(ri, &mut a, &mut queue)?;
        }
        for x in 0..n {
            self.check_support(x, &mut a, &mut queue)?;
        }
        self.propagate(&mut a, queue)?;
        Ok(a)
    }

    fn done(&self) -> bool {
        self.opts.max_models.is_some_and(|m| self.models.len() >= m)
    }

    fn search(&mut self, a: Vec<Val>) -> Result<(), EngineError> {
        if self.done() {
            return Ok(());
        }
        let Some(x) = a.iter().position(|v| *v == Val::Unknown) else {
            let m: Vec<bool> = a.iter().map(|v| *v == Val::True).collect();
            if is_minimal(self.g, &m) {
                self.models.push(m);
            }
            return Ok(());
        };
        self.decisions += 1;
        if self.decisions > self.opts.max_decisions {
            return Err(EngineError::SearchLimit {
                limit: self.opts.max_decisions,
            });
        }
        for v in [Val::False, Val::True] {
            let mut b = a.clone();
            b[x] = v;
            if self.propagate(&mut b, VecDeque::from([x])).is_ok() {
                self.search(b)?;
            }
        }
        Ok(())
    }
}

/// Is `m` a minimal model of the reduct of `g` with respect to `m`?
/// Assumes `m` is a model of `g`.
fn is_minimal(g: &GroundProgram, m: &[bool]) -> bool {
    // Reduct rules whose body can hold inside `m`, with heads cut to `m`.
    let clauses: Vec<(&[usize], Vec<usize>)> = g
        .rules
        .iter()
        .filter(|r| r.neg.iter().all(|&n| !m[n]) && r.pos.iter().all(|&p| m[p]))
        .map(|r| (r.pos.as_slice(), r.head.iter().copied().filter(|&h| m[h]).collect()))
        .collect();
    let size = m.iter().filter(|&&b| b).count();
    if clauses.iter().all(|(_, h)| h.len() <= 1) {
        // definite: compare with the least model
        let mut lm = vec![false; m.len()];
        let mut count = 0;
        let mut changed = true;
        while changed {
            changed = false;
            for (pos, head) in &clauses {
                if let [h] = head[..] {
                    if !lm[h] && pos.iter().all(|&p| lm[p]) {
                        lm[h] = true;
                        count += 1;
                        changed = true;
                    }
                }
            }
        }
        return count == size;
    }
    // Look for a model strictly inside `m`.
    let vars: Vec<usize> = (0..m.len()).filter(|&i| m[i]).collect();
    let mut local = vec![usize::MAX; m.len()];
    for (i, &v) in vars.iter().enumerate() {
        local[v] = i;
    }
    let mut cnf: Vec<Vec<(usize, bool)>> = clauses
        .iter()
        .map(|(pos, head)| {
            pos.iter()
                .map(|&p| (local[p], false))
                .chain(head.iter().map(|&h| (local[h], true)))
                .collect()
        })
        .collect();
    cnf.push((0..vars.len()).map(|i| (i, false)).collect());
    !satisfiable(&cnf, &mut vec![None; vars.len()])
}

/// Plain DPLL with unit propagation.
fn satisfiable(cnf: &[Vec<(usize, bool)>], assign: &mut [Option<bool>]) -> bool {
    loop {
        let mut unit = None;
        for clause in cnf {
            let mut open = None;
            let mut open_count = 0;
            let mut sat = false;
            for &(v, pol) in clause {
                match assign[v] {
                    Some(b) if b == pol => {
                        sat = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        open = Some((v, pol));
                        open_count += 1;
                    }
                }
            }
            if sat {
                continue;
            }
            match open_count {
                0 => return false,
                1 => {
                    unit = open;
                    break;
                }
                _ => {}
            }
        }
        match unit {
            Some((v, pol)) => assign[v] = Some(pol),
            None => break,
        }
    }
    let Some(v) = assign.iter().position(|a| a.is_none()) else {
        return true;
    };
    for pol in [false, true] {
        let mut next = assign.to_vec();
        next[v] = Some(pol);
        if satisfiable(cnf, &mut next) {
            return true;
        }
    }
    false
}

/// All stable models of `g`, in canonical order.
pub fn stable_models(g: &GroundProgram, opts: &SolveOptions) -> Result<Vec<StableModel>, EngineError> {
    let mut s = Search::new(g, opts);
    if let Ok(a) = s.initial() {
        s.search(a)?;
    }
    let mut out: Vec<StableModel> = s
        .models
        .iter()
        .map(|m| (0..m.len()).filter(|&i| m[i]).map(|i| g.atom(i).clone()).collect())
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

fn indicator(g: &GroundProgram, m: &StableModel) -> Option<Vec<bool>> {
    let mut out = vec![false; g.atoms().len()];
    for a in m {
        out[g.lookup(a)?] = true;
    }
    Some(out)
}

fn holds(r: &GroundRule, m: &[bool]) -> bool {
    !(r.pos.iter().all(|&p| m[p]) && r.neg.iter().all(|&n| !m[n])) || r.head.iter().any(|&h| m[h])
}

/// Classical model check; atoms outside the program make it fail.
pub fn satisfies_program(g: &GroundProgram, m: &StableModel) -> bool {
    indicator(g, m).is_some_and(|ind| g.rules.iter().all(|r| holds(r, &ind)))
}

/// Checks stability directly from the definition: `m` is a model of `g`
/// and no proper subset of `m` is a model of the reduct.
pub fn is_stable_model(g: &GroundProgram, m: &StableModel) -> bool {
    match indicator(g, m) {
        Some(ind) => g.rules.iter().all(|r| holds(r, &ind)) && is_minimal(g, &ind),
        None => false,
    }
}
