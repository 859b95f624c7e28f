use std::collections::{HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use super::{EngineError, GroundProgram, GroundRule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HcfReport {
    pub hcf: bool,
    /// The offending ground rule, if any.
    pub rule: Option<String>,
    /// A closed cycle through two head atoms of that rule.
    pub cycle: Option<Vec<String>>,
}

fn dependency_graph(g: &GroundProgram) -> DiGraph<usize, ()> {
    let mut graph = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..g.atoms().len()).map(|i| graph.add_node(i)).collect();
    for r in &g.rules {
        for &p in &r.pos {
            for &h in &r.head {
                graph.update_edge(nodes[p], nodes[h], ());
            }
        }
    }
    graph
}

fn path(graph: &DiGraph<usize, ()>, from: usize, to: usize) -> Vec<usize> {
    let (from, to) = (NodeIndex::new(from), NodeIndex::new(to));
    let mut prev: HashMap<NodeIndex, NodeIndex> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            break;
        }
        for m in graph.neighbors(n) {
            if m != from && !prev.contains_key(&m) {
                prev.insert(m, n);
                queue.push_back(m);
            }
        }
    }
    let mut out = vec![to.index()];
    let mut cur = to;
    while cur != from {
        cur = prev[&cur];
        out.push(cur.index());
    }
    out.reverse();
    out
}

/// Finds a rule with two head atoms in one strongly connected component of
/// the positive dependency graph.
fn offending(g: &GroundProgram) -> Option<(&GroundRule, usize, usize, Vec<usize>)> {
    let graph = dependency_graph(g);
    let mut component = vec![0; g.atoms().len()];
    for (c, scc) in tarjan_scc(&graph).iter().enumerate() {
        for n in scc {
            component[n.index()] = c;
        }
    }
    for r in g.rules.iter().filter(|r| r.head.len() > 1) {
        for (i, &a) in r.head.iter().enumerate() {
            if let Some(&b) = r.head[i + 1..].iter().find(|&&b| component[b] == component[a]) {
                let mut cycle = path(&graph, a, b);
                cycle.extend(&path(&graph, b, a)[1..]);
                return Some((r, a, b, cycle));
            }
        }
    }
    None
}

pub fn is_hcf(g: &GroundProgram) -> HcfReport {
    match offending(g) {
        None => HcfReport {
            hcf: true,
            rule: None,
            cycle: None,
        },
        Some((r, _, _, cycle)) => HcfReport {
            hcf: false,
            rule: Some(g.rule_text(r)),
            cycle: Some(cycle.iter().map(|&i| g.atom(i).to_string()).collect()),
        },
    }
}

/// Replaces each disjunctive rule by one normal rule per head atom, the other
/// head atoms moving to the body under negation. Only defined for
/// head-cycle-free programs, where it preserves the stable models.
pub fn shift(g: &GroundProgram) -> Result<GroundProgram, EngineError> {
    if let Some((_, a, b, _)) = offending(g) {
        return Err(EngineError::NotHcf {
            first: g.atom(a).to_string(),
            second: g.atom(b).to_string(),
        });
    }
    let mut rules = Vec::new();
    for r in &g.rules {
        if r.head.len() <= 1 {
            rules.push(r.clone());
            continue;
        }
        for &h in &r.head {
            let mut neg: Vec<usize> = r.neg.iter().copied().chain(r.head.iter().copied().filter(|&o| o != h)).collect();
            neg.sort_unstable();
            neg.dedup();
            rules.push(GroundRule {
                head: vec![h],
                pos: r.pos.clone(),
                neg,
            });
        }
    }
    Ok(g.with_rules(rules))
}
