//! The thresholded dependence graph: construction from the supremum
//! matrix, separation and component queries, DOT/JSON export.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected edge stored canonically (i < j) with the supremum weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected graph over the component processes. Edges exist where the
/// supremum statistic strictly exceeds the threshold alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceGraph {
    labels: Vec<String>,
    alpha: f64,
    edges: Vec<Edge>,
}

// JSON wire format; field order here is the (sorted) key order on disk.
#[derive(Serialize, Deserialize)]
struct GraphDto {
    alpha: f64,
    edges: Vec<EdgeDto>,
    nodes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    i: String,
    j: String,
    weight: f64,
}

/// Builds the graph from a symmetric supremum matrix: edge (i, j) present
/// iff sup[i][j] > alpha (strict).
pub fn build_sdgm(
    sup: &DMatrix<f64>,
    labels: &[String],
    alpha: f64,
) -> Result<DependenceGraph> {
    let d = labels.len();
    if sup.nrows() != d || sup.ncols() != d {
        return Err(Error::Validation(format!(
            "supremum matrix is {}x{} but there are {d} labels",
            sup.nrows(),
            sup.ncols()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut edges = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if (sup[(i, j)] - sup[(j, i)]).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "supremum matrix is asymmetric at ({i}, {j})"
                )));
            }
            let w = sup[(i, j)];
            if !(-1e-9..=1.0 + 1e-9).contains(&w) {
                return Err(Error::Validation(format!(
                    "supremum entry ({i}, {j}) = {w} outside [0, 1]"
                )));
            }
            if w > alpha {
                edges.push(Edge { i, j, weight: w });
            }
        }
    }
    Ok(DependenceGraph { labels: labels.to_vec(), alpha, edges })
}

impl DependenceGraph {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.i == node || e.j == node).count()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.iter().any(|e| e.i == a && e.j == b)
    }

    fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.labels.len()];
        for e in &self.edges {
            adj[e.i].insert(e.j);
            adj[e.j].insert(e.i);
        }
        adj
    }

    /// True iff no connected component of the graph minus C contains a
    /// node of A and a node of B.
    pub fn separation_query(&self, a: &[usize], b: &[usize], c: &[usize]) -> Result<bool> {
        let n = self.labels.len();
        let mut role = vec![0u8; n];
        for (set, tag) in [(a, 1u8), (b, 2), (c, 3)] {
            for &v in set {
                if v >= n {
                    return Err(Error::Validation(format!("node {v} out of range")));
                }
                if role[v] != 0 {
                    return Err(Error::Validation(format!(
                        "node {v} appears in more than one of A, B, C"
                    )));
                }
                role[v] = tag;
            }
        }
        let adj = self.adjacency();
        let removed: BTreeSet<usize> = c.iter().copied().collect();
        let mut visited = vec![false; n];
        let mut stack: Vec<usize> =
            a.iter().copied().filter(|v| !removed.contains(v)).collect();
        for &v in &stack {
            visited[v] = true;
        }
        while let Some(v) = stack.pop() {
            if role[v] == 2 {
                return Ok(false);
            }
            for &w in &adj[v] {
                if !visited[w] && !removed.contains(&w) {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        Ok(true)
    }

    /// Connected components (each sorted, ordered by smallest member) and
    /// per-node neighbour sets.
    pub fn components_and_neighbourhoods(&self) -> (Vec<Vec<usize>>, Vec<BTreeSet<usize>>) {
        let n = self.labels.len();
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        (components, adj)
    }

    /// Graphviz DOT with a fixed layout: every node listed, then edges in
    /// canonical order with 6-decimal weights. Byte-stable.
    pub fn to_dot(&self) -> String {
        fn ident(label: &str) -> String {
            let plain = !label.is_empty()
                && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !label.chars().next().unwrap().is_ascii_digit();
            if plain {
                label.to_string()
            } else {
                format!("\"{}\"", label.replace('"', "\\\""))
            }
        }
        let mut out = String::from("graph sdgm {\n");
        for label in &self.labels {
            out.push_str(&format!("  {};\n", ident(label)));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  {} -- {} [weight=\"{:.6}\"];\n",
                ident(&self.labels[e.i]),
                ident(&self.labels[e.j]),
                e.weight
            ));
        }
        out.push_str("}\n");
        out
    }

    /// JSON with sorted keys and canonical edge order. Byte-stable.
    pub fn to_json(&self) -> String {
        let dto = GraphDto {
            alpha: self.alpha,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDto {
                    i: self.labels[e.i].clone(),
                    j: self.labels[e.j].clone(),
                    weight: e.weight,
                })
                .collect(),
            nodes: self.labels.clone(),
        };
        let mut s = serde_json::to_string_pretty(&dto).expect("graph serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: GraphDto = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        let index = |label: &str| -> Result<usize> {
            dto.nodes.iter().position(|n| n == label).ok_or_else(|| {
                Error::Validation(format!("edge references unknown node '{label}'"))
            })
        };
        let mut edges = Vec::new();
        for e in &dto.edges {
            let (i, j) = (index(&e.i)?, index(&e.j)?);
            if i == j {
                return Err(Error::Validation(format!("self-loop on '{}'", e.i)));
            }
            edges.push(Edge { i: i.min(j), j: i.max(j), weight: e.weight });
        }
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        if !(dto.alpha > 0.0 && dto.alpha < 1.0) {
            return Err(Error::Validation(format!("alpha {} out of range", dto.alpha)));
        }
        Ok(Self { labels: dto.nodes, alpha: dto.alpha, edges })
    }
}
