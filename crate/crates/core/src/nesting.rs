//! Nesting graph of nodal domains and the ends of its edges.
//!
//! Vertices are nodal domains, edges are nodal curves. Removing an edge splits
//! the graph (always, on the sphere) and the smaller side, rooted where the
//! edge was attached, is the end of that curve.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodal2d::{NodalCurveSet, Sign, SignedComponents};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingGraph {
    pub signs: Vec<Sign>,
    /// Edge `k` joins the two domains of curve `k`.
    pub edges: Vec<(u32, u32)>,
    #[serde(skip)]
    adj: Vec<Vec<(u32, u32)>>,
}

impl NestingGraph {
    /// Graph on `n` vertices; signs are left positive.
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Result<Self> {
        Self::with_signs(vec![Sign::Pos; n], edges)
    }

    pub fn with_signs(signs: Vec<Sign>, edges: Vec<(u32, u32)>) -> Result<Self> {
        let n = signs.len();
        let mut adj = vec![Vec::new(); n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a as usize >= n || b as usize >= n {
                return Err(Error::Parameter(format!("edge {k} references a missing vertex")));
            }
            adj[a as usize].push((b, k as u32));
            adj[b as usize].push((a, k as u32));
        }
        Ok(NestingGraph { signs, edges, adj })
    }

    pub fn vertex_count(&self) -> usize {
        self.signs.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// `(neighbour, edge)` pairs of vertex `v`.
    pub fn neighbours(&self, v: usize) -> &[(u32, u32)] {
        &self.adj[v]
    }
}

/// One vertex per domain and one edge per closed curve.
pub fn build_nesting_graph(components: &SignedComponents, curves: &NodalCurveSet) -> NestingGraph {
    let signs = components.components.iter().map(|d| d.sign).collect();
    let edges = curves.curves.iter().map(|c| (c.positive_domain, c.negative_domain)).collect();
    NestingGraph::with_signs(signs, edges).expect("curve domains come from the same labelling")
}

fn component_size(g: &NestingGraph, start: usize) -> usize {
    let mut seen = vec![false; g.vertex_count()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(v) = stack.pop() {
        count += 1;
        for &(w, _) in g.neighbours(v) {
            if !seen[w as usize] {
                seen[w as usize] = true;
                stack.push(w as usize);
            }
        }
    }
    count
}

/// Connected with `|E| = |V| - 1`. The empty graph is not a tree.
pub fn is_tree(g: &NestingGraph) -> bool {
    let n = g.vertex_count();
    n > 0 && g.edge_count() + 1 == n && component_size(g, 0) == n
}

/// `(sum of degrees, 2|V| - 2)`; equal exactly when `|E| = |V| - 1`.
pub fn degree_identity(g: &NestingGraph) -> (usize, usize) {
    let lhs = (0..g.vertex_count()).map(|v| g.degree(v)).sum();
    (lhs, (2 * g.vertex_count()).saturating_sub(2))
}

/// Rooted tree in canonical balanced-parenthesis form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootedTree {
    pub code: String,
    pub size: usize,
}

impl RootedTree {
    pub fn single() -> Self {
        RootedTree { code: "()".into(), size: 1 }
    }

    /// Root with the given subtrees, canonicalized.
    pub fn join(children: &[RootedTree]) -> Self {
        let mut codes: Vec<&str> = children.iter().map(|c| c.code.as_str()).collect();
        codes.sort_unstable();
        let mut code = String::with_capacity(2 + codes.iter().map(|c| c.len()).sum::<usize>());
        code.push('(');
        codes.iter().for_each(|c| code.push_str(c));
        code.push(')');
        RootedTree { size: code.len() / 2, code }
    }

    /// Parses and canonicalizes a parenthesis string.
    pub fn parse(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        let bad = || Error::Parameter(format!("`{code}` is not a single balanced tree"));
        if bytes.first() != Some(&b'(') {
            return Err(bad());
        }
        // Stack of child lists under construction.
        let mut stack: Vec<Vec<RootedTree>> = Vec::new();
        let mut done: Option<RootedTree> = None;
        for &b in bytes {
            if done.is_some() {
                return Err(bad());
            }
            match b {
                b'(' => stack.push(Vec::new()),
                b')' => {
                    let kids = stack.pop().ok_or_else(bad)?;
                    let t = RootedTree::join(&kids);
                    match stack.last_mut() {
                        Some(parent) => parent.push(t),
                        None => done = Some(t),
                    }
                }
                _ => return Err(bad()),
            }
        }
        done.ok_or_else(bad)
    }

    /// Child subtrees of the root, in canonical order.
    pub fn children(&self) -> Vec<RootedTree> {
        let b = self.code.as_bytes();
        let mut out = Vec::new();
        let (mut depth, mut start) = (0i32, 1usize);
        for (k, &c) in b.iter().enumerate().take(b.len() - 1).skip(1) {
            depth += if c == b'(' { 1 } else { -1 };
            if depth == 0 {
                let code = self.code[start..=k].to_string();
                out.push(RootedTree { size: code.len() / 2, code });
                start = k + 1;
            }
        }
        out
    }
}

/// Canonical code of the component of `root` with edge `removed` deleted.
pub fn canonical_encode(g: &NestingGraph, root: usize, removed: Option<usize>) -> Result<RootedTree> {
    if root >= g.vertex_count() {
        return Err(Error::Parameter(format!("root {root} is not a vertex")));
    }
    let removed = removed.map(|e| e as u32);
    // Iterative DFS recording parents; a second visit is a cycle.
    let mut parent_edge: BTreeMap<u32, Option<u32>> = BTreeMap::new();
    let mut order = Vec::new();
    let mut stack = vec![(root as u32, None::<u32>)];
    parent_edge.insert(root as u32, None);
    while let Some((v, via)) = stack.pop() {
        order.push(v);
        for &(w, e) in g.neighbours(v as usize) {
            if Some(e) == removed || Some(e) == via {
                continue;
            }
            if parent_edge.contains_key(&w) {
                return Err(Error::Structural(format!("cycle through vertex {w}")));
            }
            parent_edge.insert(w, Some(e));
            stack.push((w, Some(e)));
        }
    }
    let mut kids: BTreeMap<u32, Vec<RootedTree>> = BTreeMap::new();
    let mut result = None;
    for &v in order.iter().rev() {
        let t = RootedTree::join(&kids.remove(&v).unwrap_or_default());
        match parent_edge[&v] {
            Some(e) => {
                let (a, b) = g.edges[e as usize];
                let p = if a == v { b } else { a };
                kids.entry(p).or_default().push(t);
            }
            None => result = Some(t),
        }
    }
    Ok(result.expect("root is visited"))
}

/// Outcome of removing one edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndResult {
    Tree(RootedTree),
    NonSeparating,
    Tie,
}

/// End of edge `edge`: the smaller side after removal, rooted at its endpoint.
///
/// Both sides are explored in alternation, so the cost is proportional to the
/// smaller side.
pub fn tree_end(g: &NestingGraph, edge: usize) -> Result<EndResult> {
    let &(a, b) = g
        .edges
        .get(edge)
        .ok_or_else(|| Error::Parameter(format!("edge {edge} is not in the graph")))?;
    if a == b {
        return Ok(EndResult::NonSeparating);
    }
    let e = edge as u32;
    let n = g.vertex_count();
    // 0 = unseen, 1 = side of a, 2 = side of b.
    let mut side = vec![0u8; n];
    let mut queues = [VecDeque::from([a]), VecDeque::from([b])];
    let mut sizes = [1usize, 1usize];
    side[a as usize] = 1;
    side[b as usize] = 2;
    let mut finished = [false, false];
    let mut turn = 0;
    loop {
        if finished[0] && finished[1] {
            break;
        }
        if finished[turn] {
            // The other side only needs to outgrow the finished one.
            if sizes[1 - turn] > sizes[turn] {
                break;
            }
            turn = 1 - turn;
            continue;
        }
        match queues[turn].pop_front() {
            None => finished[turn] = true,
            Some(v) => {
                for &(w, ew) in g.neighbours(v as usize) {
                    if ew == e {
                        continue;
                    }
                    match side[w as usize] {
                        0 => {
                            side[w as usize] = turn as u8 + 1;
                            sizes[turn] += 1;
                            queues[turn].push_back(w);
                        }
                        s if s as usize == turn + 1 => {}
                        _ => return Ok(EndResult::NonSeparating),
                    }
                }
            }
        }
        let other = 1 - turn;
        if finished[turn] && finished[other] {
            break;
        }
        if !finished[other] {
            turn = other;
        }
    }
    let small = match (finished[0], finished[1]) {
        (true, true) if sizes[0] == sizes[1] => return Ok(EndResult::Tie),
        (true, true) => {
            if sizes[0] < sizes[1] { 0 } else { 1 }
        }
        (true, false) => 0,
        (false, true) => 1,
        (false, false) => unreachable!("loop exits only after a side finishes"),
    };
    let root = if small == 0 { a } else { b };
    Ok(EndResult::Tree(canonical_encode(g, root as usize, Some(edge))?))
}

/// Ends of every edge, in edge order.
pub fn all_ends(g: &NestingGraph) -> Vec<Result<EndResult>> {
    (0..g.edge_count()).map(|e| tree_end(g, e)).collect()
}

/// Every rooted tree with exactly `n` vertices, in canonical form and sorted
/// by code.
pub fn rooted_trees(n: usize) -> Vec<RootedTree> {
    let mut by_size: Vec<Vec<RootedTree>> = vec![Vec::new(), vec![RootedTree::single()]];
    for size in 2..=n {
        let pool: Vec<&RootedTree> = (1..size).flat_map(|s| by_size[s].iter()).collect();
        let mut out = Vec::new();
        let mut chosen = Vec::new();
        forests(&pool, 0, size - 1, &mut chosen, &mut out);
        out.sort();
        out.dedup();
        by_size.push(out);
    }
    if n == 0 { Vec::new() } else { by_size.swap_remove(n) }
}

fn forests(pool: &[&RootedTree], from: usize, left: usize, chosen: &mut Vec<RootedTree>, out: &mut Vec<RootedTree>) {
    if left == 0 {
        out.push(RootedTree::join(chosen));
        return;
    }
    for k in from..pool.len() {
        if pool[k].size <= left {
            chosen.push(pool[k].clone());
            forests(pool, k, left - pool[k].size, chosen, out);
            chosen.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(u32, u32)]) -> NestingGraph {
        NestingGraph::from_edges(n, edges.to_vec()).unwrap()
    }

    fn tree(r: &Result<EndResult>) -> &RootedTree {
        match r {
            Ok(EndResult::Tree(t)) => t,
            other => panic!("expected a tree, got {other:?}"),
        }
    }

    #[test]
    fn small_codes() {
        let g = graph(3, &[(0, 1), (0, 2)]);
        assert_eq!(canonical_encode(&g, 1, Some(0)).unwrap().code, "()");
        assert_eq!(canonical_encode(&graph(2, &[(0, 1)]), 0, None).unwrap().code, "(())");
        assert_eq!(canonical_encode(&g, 0, None).unwrap().code, "(()())");
        let g2 = graph(4, &[(0, 1), (1, 2), (0, 3)]);
        assert_eq!(canonical_encode(&g2, 0, None).unwrap().code, "((())())");
        assert_eq!(RootedTree::parse("(()(()))").unwrap().code, "((())())");
    }

    #[test]
    fn cycle_is_structural_error() {
        let g = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(matches!(canonical_encode(&g, 0, None), Err(Error::Structural(_))));
        let g = graph(2, &[(0, 1), (0, 1)]);
        assert!(matches!(canonical_encode(&g, 0, None), Err(Error::Structural(_))));
    }

    #[test]
    fn ends_of_small_graphs() {
        let path = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(tree(&tree_end(&path, 0)).code, "()");
        let two = graph(2, &[(0, 1)]);
        assert_eq!(tree_end(&two, 0).unwrap(), EndResult::Tie);
        let four = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(tree_end(&four, 1).unwrap(), EndResult::Tie);
        let star = graph(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        for e in 0..5 {
            assert_eq!(tree(&tree_end(&star, e)).code, "()");
        }
        let cyc = graph(2, &[(0, 1), (0, 1)]);
        assert_eq!(tree_end(&cyc, 0).unwrap(), EndResult::NonSeparating);
        assert!(matches!(tree_end(&cyc, 5), Err(Error::Parameter(_))));
    }

    #[test]
    fn end_is_rooted_at_the_small_endpoint() {
        // 0-1-2 with 1 also carrying leaves 3, 4, and 0 carrying a long tail.
        let g = graph(8, &[(0, 1), (1, 3), (1, 4), (0, 5), (5, 6), (6, 7), (1, 2)]);
        // Removing (0, 1): side of 1 = {1, 2, 3, 4}, side of 0 = {0, 5, 6, 7}.
        assert_eq!(tree_end(&g, 0).unwrap(), EndResult::Tie);
        let g = graph(9, &[(0, 1), (1, 3), (1, 4), (0, 5), (5, 6), (6, 7), (7, 8)]);
        assert_eq!(tree(&tree_end(&g, 0)).code, "(()())");
    }

    #[test]
    fn tree_checks() {
        assert!(is_tree(&graph(1, &[])));
        assert!(!is_tree(&graph(0, &[])));
        assert!(!is_tree(&graph(2, &[(0, 1), (0, 1)])));
        assert!(!is_tree(&graph(4, &[(0, 1), (2, 3), (2, 3)])));
        assert_eq!(degree_identity(&graph(2, &[(0, 1)])), (2, 2));
        let star = graph(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        assert_eq!(degree_identity(&star), (10, 10));
    }

    #[test]
    fn rooted_tree_counts() {
        // Number of rooted unlabeled trees with n vertices.
        let counts: Vec<usize> = (1..=8).map(|n| rooted_trees(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48, 115]);
        assert_eq!((1..=7).map(|n| rooted_trees(n).len()).sum::<usize>(), 85);
        for t in rooted_trees(6) {
            assert_eq!(RootedTree::parse(&t.code).unwrap(), t);
            let rebuilt = RootedTree::join(&t.children());
            assert_eq!(rebuilt, t);
        }
    }
}
