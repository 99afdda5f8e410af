//! Elimination orders and junction trees over genotype variables.
//!
//! Cliques come from eliminating variables one at a time on the moral graph.
//! Non-maximal elimination cliques are absorbed into the superset neighbour,
//! disconnected components hang under an empty virtual root, and cliques are
//! finally renumbered so that every clique points `to` a later one.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::table::Var;

/// Variables and potential scopes of a network, without any numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    n_vars: usize,
    scopes: Vec<Vec<Var>>,
}

impl Skeleton {
    pub fn new(n_vars: usize, scopes: Vec<Vec<Var>>) -> Self {
        for scope in &scopes {
            assert!(scope.iter().all(|v| *v < n_vars), "scope variable out of range");
        }
        Skeleton { n_vars, scopes }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn scopes(&self) -> &[Vec<Var>] {
        &self.scopes
    }

    /// Undirected graph joining every pair of variables that share a scope.
    pub fn moral_graph(&self) -> Vec<BTreeSet<Var>> {
        let mut adj = vec![BTreeSet::new(); self.n_vars];
        for scope in &self.scopes {
            for (i, a) in scope.iter().enumerate() {
                for b in &scope[i + 1..] {
                    if a != b {
                        adj[*a].insert(*b);
                        adj[*b].insert(*a);
                    }
                }
            }
        }
        adj
    }
}

/// Strategy producing an elimination order.
pub trait EliminationHeuristic {
    fn order(&self, skeleton: &Skeleton) -> Vec<Var>;
}

/// Greedy minimum fill-in, ties broken by the smallest variable index.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinFill;

impl EliminationHeuristic for MinFill {
    fn order(&self, skeleton: &Skeleton) -> Vec<Var> {
        min_fill_order(skeleton)
    }
}

/// Eliminates variables in increasing index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndexOrder;

impl EliminationHeuristic for IndexOrder {
    fn order(&self, skeleton: &Skeleton) -> Vec<Var> {
        (0..skeleton.n_vars()).collect()
    }
}

pub fn min_fill_order(skeleton: &Skeleton) -> Vec<Var> {
    let mut adj = skeleton.moral_graph();
    let n = skeleton.n_vars();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, Var)> = None;
        for v in 0..n {
            if eliminated[v] {
                continue;
            }
            let fill = fill_in(&adj, v);
            if best.is_none_or(|(f, _)| fill < f) {
                best = Some((fill, v));
                if fill == 0 {
                    break;
                }
            }
        }
        let (_, v) = best.expect("a remaining variable");
        eliminate(&mut adj, v);
        eliminated[v] = true;
        order.push(v);
    }
    order
}

fn fill_in(adj: &[BTreeSet<Var>], v: Var) -> usize {
    let nbrs: Vec<Var> = adj[v].iter().copied().collect();
    let mut missing = 0;
    for (i, a) in nbrs.iter().enumerate() {
        for b in &nbrs[i + 1..] {
            if !adj[*a].contains(b) {
                missing += 1;
            }
        }
    }
    missing
}

// Connects the neighbours of `v` pairwise and detaches `v`; returns them.
fn eliminate(adj: &mut [BTreeSet<Var>], v: Var) -> Vec<Var> {
    let nbrs: Vec<Var> = std::mem::take(&mut adj[v]).into_iter().collect();
    for (i, a) in nbrs.iter().enumerate() {
        adj[*a].remove(&v);
        for b in &nbrs[i + 1..] {
            adj[*a].insert(*b);
            adj[*b].insert(*a);
        }
    }
    nbrs
}

/// A junction tree whose cliques are numbered so that `to[j] > j`; the last
/// clique is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    cliques: Vec<Vec<Var>>,
    to: Vec<Option<usize>>,
    from: Vec<Vec<usize>>,
    separators: Vec<Vec<Var>>,
    of: Vec<usize>,
    starred: Vec<Vec<usize>>,
}

impl JunctionTree {
    pub fn build(skeleton: &Skeleton, order: &[Var]) -> Self {
        build_junction_tree(skeleton, order)
    }

    pub fn with_heuristic<H: EliminationHeuristic>(skeleton: &Skeleton, heuristic: &H) -> Self {
        build_junction_tree(skeleton, &heuristic.order(skeleton))
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn root(&self) -> usize {
        self.cliques.len() - 1
    }

    /// Clique members, sorted.
    pub fn clique(&self, j: usize) -> &[Var] {
        &self.cliques[j]
    }

    pub fn cliques(&self) -> &[Vec<Var>] {
        &self.cliques
    }

    pub fn to(&self, j: usize) -> Option<usize> {
        self.to[j]
    }

    pub fn from(&self, j: usize) -> &[usize] {
        &self.from[j]
    }

    /// `C_j ∩ C_to(j)`, empty at the root.
    pub fn separator(&self, j: usize) -> &[Var] {
        &self.separators[j]
    }

    /// Clique holding potential `i`: the first clique covering its scope.
    pub fn of(&self, i: usize) -> usize {
        self.of[i]
    }

    /// Potentials assigned to clique `j`.
    pub fn starred(&self, j: usize) -> &[usize] {
        &self.starred[j]
    }

    /// Size of the largest clique.
    pub fn treewidth(&self) -> usize {
        self.cliques.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Total number of table cells, Σ 4^|C_j|.
    pub fn cost(&self) -> u64 {
        self.cliques.iter().map(|c| 1u64 << (2 * c.len())).sum()
    }

    /// Checks the tree, covering and running-intersection properties and that
    /// each potential sits in exactly one clique.
    pub fn check(&self, skeleton: &Skeleton) -> Result<(), String> {
        let k = self.cliques.len();
        if k == 0 {
            return if skeleton.scopes().is_empty() {
                Ok(())
            } else {
                Err("no cliques for a non-empty network".into())
            };
        }
        for j in 0..k {
            match self.to[j] {
                Some(t) if t > j && t < k => {}
                None if j == k - 1 => {}
                other => return Err(format!("clique {j} has successor {other:?}")),
            }
        }
        for (i, scope) in skeleton.scopes().iter().enumerate() {
            let covering = (0..k).find(|j| scope.iter().all(|v| self.cliques[*j].contains(v)));
            match covering {
                None => return Err(format!("potential {i} is not covered")),
                Some(j) if j != self.of[i] => {
                    return Err(format!("potential {i} assigned to {} instead of {j}", self.of[i]))
                }
                _ => {}
            }
        }
        let assigned: usize = self.starred.iter().map(Vec::len).sum();
        if assigned != skeleton.scopes().len() {
            return Err(format!("{assigned} potential assignments for {} potentials", skeleton.scopes().len()));
        }
        for v in 0..skeleton.n_vars() {
            let holding = (0..k).filter(|j| self.cliques[*j].contains(&v)).count();
            if holding == 0 {
                return Err(format!("variable {v} is in no clique"));
            }
            let links = (0..k)
                .filter(|j| {
                    self.cliques[*j].contains(&v)
                        && self.to[*j].is_some_and(|t| self.cliques[t].contains(&v))
                })
                .count();
            if links + 1 != holding {
                return Err(format!("running intersection fails for variable {v}"));
            }
        }
        for j in 0..k {
            let expect: Vec<Var> = match self.to[j] {
                Some(t) => intersect(&self.cliques[j], &self.cliques[t]),
                None => Vec::new(),
            };
            if expect != self.separators[j] {
                return Err(format!("separator {j} is inconsistent"));
            }
        }
        Ok(())
    }

    pub fn summary(&self, names: impl Fn(Var) -> String) -> TreeSummary {
        TreeSummary {
            cliques: (0..self.len())
                .map(|j| CliqueSummary {
                    index: j,
                    members: self.cliques[j].iter().map(|v| names(*v)).collect(),
                    separator: self.separators[j].iter().map(|v| names(*v)).collect(),
                    to: self.to[j],
                })
                .collect(),
            treewidth: self.treewidth(),
            cost: self.cost(),
        }
    }
}

/// Serializable description of a tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSummary {
    pub cliques: Vec<CliqueSummary>,
    pub treewidth: usize,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueSummary {
    pub index: usize,
    pub members: Vec<String>,
    pub separator: Vec<String>,
    pub to: Option<usize>,
}

fn intersect(a: &[Var], b: &[Var]) -> Vec<Var> {
    a.iter().filter(|v| b.contains(v)).copied().collect()
}

pub fn build_junction_tree(skeleton: &Skeleton, order: &[Var]) -> JunctionTree {
    let n = skeleton.n_vars();
    assert_eq!(order.len(), n, "order must list every variable once");
    let mut position = vec![usize::MAX; n];
    for (s, v) in order.iter().enumerate() {
        assert!(position[*v] == usize::MAX, "variable {v} repeated in order");
        position[*v] = s;
    }

    let mut adj = skeleton.moral_graph();
    let mut cliques: Vec<BTreeSet<Var>> = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    for &v in order {
        let nbrs = eliminate(&mut adj, v);
        parent.push(nbrs.iter().map(|u| position[*u]).min());
        let mut clique: BTreeSet<Var> = nbrs.into_iter().collect();
        clique.insert(v);
        cliques.push(clique);
    }

    // absorb each clique contained in one of its children
    let mut alive = vec![true; n];
    for s in 0..n {
        let child = (0..s).find(|c| alive[*c] && parent[*c] == Some(s) && cliques[*c].is_superset(&cliques[s]));
        if let Some(c) = child {
            alive[s] = false;
            parent[c] = parent[s];
            for other in 0..n {
                if alive[other] && other != c && parent[other] == Some(s) {
                    parent[other] = Some(c);
                }
            }
        }
    }

    let mut nodes: Vec<BTreeSet<Var>> = Vec::new();
    let mut node_parent: Vec<Option<usize>> = Vec::new();
    let mut remap = vec![usize::MAX; n];
    for s in 0..n {
        if alive[s] {
            remap[s] = nodes.len();
            nodes.push(cliques[s].clone());
        }
    }
    for s in 0..n {
        if alive[s] {
            node_parent.push(parent[s].map(|p| remap[p]));
        }
    }
    let roots: Vec<usize> = (0..nodes.len()).filter(|j| node_parent[*j].is_none()).collect();
    if roots.len() > 1 {
        let virtual_root = nodes.len();
        nodes.push(BTreeSet::new());
        node_parent.push(None);
        for r in roots {
            node_parent[r] = Some(virtual_root);
        }
    }

    // post-order numbering: children before parents
    let m = nodes.len();
    let mut children = vec![Vec::new(); m];
    let mut root = None;
    for j in 0..m {
        match node_parent[j] {
            Some(p) => children[p].push(j),
            None => root = Some(j),
        }
    }
    let mut numbering = vec![usize::MAX; m];
    let mut next = 0;
    if let Some(root) = root {
        let mut stack = vec![(root, false)];
        while let Some((j, expanded)) = stack.pop() {
            if expanded {
                numbering[j] = next;
                next += 1;
            } else {
                stack.push((j, true));
                for c in children[j].iter().rev() {
                    stack.push((*c, false));
                }
            }
        }
    }

    let mut final_cliques = vec![Vec::new(); m];
    let mut to = vec![None; m];
    for j in 0..m {
        let k = numbering[j];
        final_cliques[k] = nodes[j].iter().copied().collect();
        to[k] = node_parent[j].map(|p| numbering[p]);
    }
    let mut from = vec![Vec::new(); m];
    for j in 0..m {
        if let Some(t) = to[j] {
            from[t].push(j);
        }
    }
    let separators = (0..m)
        .map(|j| match to[j] {
            Some(t) => intersect(&final_cliques[j], &final_cliques[t]),
            None => Vec::new(),
        })
        .collect();
    let mut starred = vec![Vec::new(); m];
    let of: Vec<usize> = skeleton
        .scopes()
        .iter()
        .enumerate()
        .map(|(i, scope)| {
            let j = (0..m)
                .find(|j| scope.iter().all(|v| final_cliques[*j].contains(v)))
                .expect("elimination cliques cover every scope");
            starred[j].push(i);
            j
        })
        .collect();

    JunctionTree {
        cliques: final_cliques,
        to,
        from,
        separators,
        of,
        starred,
    }
}
