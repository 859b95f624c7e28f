//! Predicate dependency graphs and RIC-acyclicity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use super::{ConstraintKind, ConstraintSet};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    /// Label of the constraint that induced the edge.
    pub constraint: String,
}

/// Vertices are sets of predicate names: singletons in the plain graph,
/// merged components in the contracted one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
    pub vertices: Vec<BTreeSet<String>>,
    pub edges: Vec<GraphEdge>,
}

impl DependencyGraph {
    pub fn vertex_of(&self, predicate: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.contains(predicate))
    }

    pub fn vertex_label(&self, v: usize) -> String {
        let names: Vec<&str> = self.vertices[v].iter().map(String::as_str).collect();
        if names.len() == 1 {
            names[0].to_string()
        } else {
            format!("{{{}}}", names.join(","))
        }
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.from == v)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dependencies {\n");
        for v in 0..self.vertices.len() {
            let _ = writeln!(out, "  v{v} [label=\"{}\"];", self.vertex_label(v));
        }
        for e in &self.edges {
            let _ = writeln!(out, "  v{} -> v{} [label=\"{}\"];", e.from, e.to, e.constraint);
        }
        out.push_str("}\n");
        out
    }

    fn from_parts(vertices: Vec<BTreeSet<String>>, raw: Vec<(String, String, String)>) -> Self {
        let mut g = DependencyGraph {
            vertices,
            edges: Vec::new(),
        };
        let mut edges = BTreeSet::new();
        for (from, to, label) in raw {
            let from = g.vertex_of(&from).expect("edge source is a vertex");
            let to = g.vertex_of(&to).expect("edge target is a vertex");
            edges.insert(GraphEdge {
                from,
                to,
                constraint: label,
            });
        }
        g.edges = edges.into_iter().collect();
        g
    }
}

fn all_predicates(ic: &ConstraintSet) -> BTreeSet<String> {
    ic.iter()
        .flat_map(|c| c.atoms().map(|a| a.predicate.clone()))
        .collect()
}

fn edges_of<'a>(
    constraints: impl Iterator<Item = &'a super::Constraint>,
) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for c in constraints {
        for p in c.antecedent_predicates() {
            for q in c.consequent_predicates() {
                out.push((p.to_string(), q.to_string(), c.label.clone()));
            }
        }
    }
    out
}

/// One vertex per predicate mentioned in the constraints, an edge `P → Q`
/// whenever `P` occurs in the antecedent and `Q` in the consequent of the
/// same constraint.
pub fn dependency_graph(ic: &ConstraintSet) -> DependencyGraph {
    let vertices = all_predicates(ic)
        .into_iter()
        .map(|p| BTreeSet::from([p]))
        .collect();
    DependencyGraph::from_parts(vertices, edges_of(ic.iter()))
}

/// Merges every (weakly) connected component of the UIC subgraph into one
/// vertex and drops the UIC edges; edges of the remaining constraints are
/// kept between the merged vertices.
pub fn contracted_graph(ic: &ConstraintSet) -> DependencyGraph {
    let preds: Vec<String> = all_predicates(ic).into_iter().collect();
    let index: BTreeMap<&str, usize> = preds.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let mut uf = UnionFind::<usize>::new(preds.len());
    for (p, q, _) in edges_of(ic.uics()) {
        uf.union(index[p.as_str()], index[q.as_str()]);
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (i, p) in preds.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().insert(p.clone());
    }
    let mut vertices: Vec<BTreeSet<String>> = groups.into_values().collect();
    vertices.sort();
    DependencyGraph::from_parts(vertices, edges_of(ic.iter().filter(|c| c.kind != ConstraintKind::Uic)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcyclicityReport {
    pub acyclic: bool,
    /// A directed cycle of the contracted graph as a closed list of vertex
    /// labels (first = last), with the constraint labels along it.
    pub cycle: Option<Vec<String>>,
    pub cycle_constraints: Option<Vec<String>>,
}

/// RIC-acyclic iff the contracted graph has no directed cycle; a self-loop
/// counts as a cycle of length one.
pub fn is_ric_acyclic(ic: &ConstraintSet) -> AcyclicityReport {
    let g = contracted_graph(ic);
    match find_cycle(&g) {
        None => AcyclicityReport {
            acyclic: true,
            cycle: None,
            cycle_constraints: None,
        },
        Some(edges) => {
            let mut labels: Vec<String> = edges.iter().map(|e| g.vertex_label(e.from)).collect();
            labels.push(g.vertex_label(edges[0].from));
            AcyclicityReport {
                acyclic: false,
                cycle: Some(labels),
                cycle_constraints: Some(edges.iter().map(|e| e.constraint.clone()).collect()),
            }
        }
    }
}

/// Iterative DFS with white/grey/black colouring; returns the edges of the
/// first cycle found.
fn find_cycle(g: &DependencyGraph) -> Option<Vec<GraphEdge>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Colour {
        White,
        Grey,
        Black,
    }
    let n = g.vertices.len();
    let mut colour = vec![Colour::White; n];
    for root in 0..n {
        if colour[root] != Colour::White {
            continue;
        }
        // stack of (vertex, next edge cursor); path_edges[i] leads into stack[i + 1]
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        let mut path_edges: Vec<&GraphEdge> = Vec::new();
        colour[root] = Colour::Grey;
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            let out: Vec<&GraphEdge> = g.successors(v).collect();
            if *cursor >= out.len() {
                colour[v] = Colour::Black;
                stack.pop();
                path_edges.pop();
                continue;
            }
            let e = out[*cursor];
            *cursor += 1;
            match colour[e.to] {
                Colour::White => {
                    colour[e.to] = Colour::Grey;
                    stack.push((e.to, 0));
                    path_edges.push(e);
                }
                Colour::Grey => {
                    let start = stack.iter().position(|&(u, _)| u == e.to).expect("grey on stack");
                    let mut cycle: Vec<GraphEdge> =
                        path_edges[start..].iter().map(|&e| e.clone()).collect();
                    cycle.push(e.clone());
                    return Some(cycle);
                }
                Colour::Black => {}
            }
        }
    }
    None
}
