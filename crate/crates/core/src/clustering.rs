//! Markov clustering of a dependency matrix into a cluster tree.
//!
//! The matrix is symmetrized (`P + P^T`), given unit self-loops and column
//! normalized. Expansion raises it to the power `round(alpha)` (at least 1),
//! inflation takes entrywise powers `mu` and renormalizes columns. After
//! convergence, attractors and the columns they hold form clusters; `beta`
//! penalizes large clusters when a column is held by several. The same
//! procedure on the quotient matrix of the clusters gives the next level up.
//! Components whose off-diagonal dependency weight exceeds `gamma` times the
//! mean are bus elements; they are clustered afterwards and joined to their
//! best connected cluster unless isolation is requested.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsm::Dsm;
use crate::error::{Error, Result};
use crate::tree::{ClusterTree, Shape};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub gamma: f64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        ClusteringParams { alpha: 2.0, beta: 2.9, mu: 2.9, gamma: 30.0 }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("alpha", self.alpha), ("beta", self.beta), ("mu", self.mu), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Params(format!("{n} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for ClusteringParams {
    type Err = Error;

    /// `alpha,beta,mu,gamma`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Params(format!("`{x}`: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(Error::Params(format!("expected alpha,beta,mu,gamma, got {} values", v.len())));
        }
        let p = ClusteringParams { alpha: v[0], beta: v[1], mu: v[2], gamma: v[3] };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringOptions {
    pub isolate_buses: bool,
    pub max_iterations: usize,
}

impl Default for ClusteringOptions {
    fn default() -> Self {
        ClusteringOptions { isolate_buses: false, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub tree: ClusterTree,
    /// Empty unless buses are isolated; isolated buses are in no leaf.
    pub bus_elements: Vec<String>,
    pub params: ClusteringParams,
    /// The clustered matrix, kept for merge decisions.
    pub dsm: Dsm,
}

impl ClusteringResult {
    /// The tree with isolated bus elements added as one leaf under the root.
    pub fn tree_with_buses(&self) -> ClusterTree {
        if self.bus_elements.is_empty() {
            return self.tree.clone();
        }
        let mut shape = unnamed(&self.tree.to_shape());
        let bus = Shape::leaf(&self.bus_elements);
        if shape.children.is_empty() {
            shape = Shape::node(vec![shape, bus]);
        } else {
            shape.children.push(bus);
        }
        ClusterTree::from_shape(&shape).expect("buses are disjoint from the leaves")
    }
}

fn unnamed(s: &Shape) -> Shape {
    Shape { name: None, children: s.children.iter().map(unnamed).collect(), components: s.components.clone() }
}

type Mat = Vec<Vec<f64>>;

fn normalize_columns(m: &mut Mat) {
    let n = m.len();
    for j in 0..n {
        let s: f64 = (0..n).map(|i| m[i][j]).sum();
        if s > 0.0 {
            for row in m.iter_mut() {
                row[j] /= s;
            }
        }
    }
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let x = a[i][k];
            if x == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += x * b[k][j];
            }
        }
    }
    c
}

/// Converged MCL matrix of a symmetric weight matrix (self-loops added here).
fn mcl(weights: &Mat, params: &ClusteringParams, max_iterations: usize) -> Result<Mat> {
    let n = weights.len();
    let mut m: Mat = weights.clone();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    normalize_columns(&mut m);
    let power = (params.alpha.round() as usize).max(1);
    let mut last_change = f64::INFINITY;
    for _ in 0..max_iterations {
        let mut e = m.clone();
        for _ in 1..power {
            e = mul(&e, &m);
        }
        for row in e.iter_mut() {
            for x in row.iter_mut() {
                *x = if *x < 1e-15 { 0.0 } else { x.powf(params.mu) };
            }
        }
        normalize_columns(&mut e);
        last_change = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (e[i][j] - m[i][j]).abs()).sum();
        m = e;
        if last_change < TOL {
            return Ok(m);
        }
    }
    Err(Error::Convergence { iterations: max_iterations, last_change })
}

/// Partition of `0..n` from a converged MCL matrix, each group sorted,
/// groups ordered by first member.
fn basins(m: &Mat, sizes: &[usize], beta: f64) -> Vec<Vec<usize>> {
    let n = m.len();
    let eps = 1e-6;
    let attractors: Vec<usize> = (0..n).filter(|i| m[*i][*i] > eps).collect();
    // attractors holding each other form one cluster
    let mut rep: BTreeMap<usize, usize> = attractors.iter().map(|a| (*a, *a)).collect();
    fn find(rep: &mut BTreeMap<usize, usize>, x: usize) -> usize {
        let p = rep[&x];
        if p == x {
            x
        } else {
            let r = find(rep, p);
            rep.insert(x, r);
            r
        }
    }
    for &a in &attractors {
        for &b in &attractors {
            if a < b && (m[a][b] > eps || m[b][a] > eps) {
                let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
                if ra != rb {
                    rep.insert(ra.max(rb), ra.min(rb));
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &a in &attractors {
        let r = find(&mut rep, a);
        groups.entry(r).or_default().push(a);
    }
    let keys: Vec<usize> = groups.keys().copied().collect();
    let weight = |j: usize, g: usize| -> f64 { groups[&g].iter().map(|a| m[*a][j]).sum() };
    // first pass: strongest attractor group; second pass: size penalty
    let mut assign: Vec<usize> = (0..n)
        .map(|j| {
            let mut best = keys[0];
            for &g in &keys {
                if weight(j, g) > weight(j, best) + eps {
                    best = g;
                }
            }
            best
        })
        .collect();
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    for (j, g) in assign.iter().enumerate() {
        *size.entry(*g).or_default() += sizes[j];
    }
    for (j, slot) in assign.iter_mut().enumerate() {
        let score = |g: usize| weight(j, g) * (size.get(&g).copied().unwrap_or(1).max(1) as f64).powf(-1.0 / beta);
        let mut best = *slot;
        for &g in &keys {
            if weight(j, g) > eps && score(g) > score(best) + eps {
                best = g;
            }
        }
        *slot = best;
    }
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, g) in assign.iter().enumerate() {
        out.entry(*g).or_default().push(j);
    }
    let mut v: Vec<Vec<usize>> = out.into_values().collect();
    v.sort_by_key(|g| g[0]);
    v
}

fn symmetric(dsm: &Dsm) -> Mat {
    let n = dsm.len();
    (0..n).map(|i| (0..n).map(|j| f64::from(dsm.matrix[i][j] + dsm.matrix[j][i])).collect()).collect()
}

/// Components whose off-diagonal dependency weight exceeds `gamma` times
/// the mean weight.
pub fn detect_bus_elements(dsm: &Dsm, gamma: f64) -> Vec<String> {
    let sym = symmetric(dsm);
    let n = sym.len();
    if n == 0 {
        return vec![];
    }
    let deg: Vec<f64> = (0..n).map(|i| (0..n).filter(|j| *j != i).map(|j| sym[i][j]).sum()).collect();
    let mean = deg.iter().sum::<f64>() / n as f64;
    (0..n).filter(|i| deg[*i] > gamma * mean + TOL).map(|i| dsm.labels[i].clone()).collect()
}

pub fn markov_cluster(dsm: &Dsm, params: &ClusteringParams) -> Result<ClusteringResult> {
    markov_cluster_with(dsm, params, &ClusteringOptions::default())
}

pub fn markov_cluster_with(dsm: &Dsm, params: &ClusteringParams, opts: &ClusteringOptions) -> Result<ClusteringResult> {
    params.validate()?;
    if dsm.is_empty() {
        return Err(Error::Partition("cannot cluster an empty matrix".into()));
    }
    // work in sorted label order so the result does not depend on input order
    let mut order: Vec<usize> = (0..dsm.len()).collect();
    order.sort_by(|a, b| dsm.labels[*a].cmp(&dsm.labels[*b]));
    let labels: Vec<String> = order.iter().map(|i| dsm.labels[*i].clone()).collect();
    let matrix: Vec<Vec<u32>> = order.iter().map(|i| order.iter().map(|j| dsm.matrix[*i][*j]).collect()).collect();
    let sorted = Dsm { labels: labels.clone(), matrix };
    let sym = symmetric(&sorted);
    let n = labels.len();

    let buses: BTreeSet<usize> = {
        let names: BTreeSet<String> = detect_bus_elements(&sorted, params.gamma).into_iter().collect();
        (0..n).filter(|i| names.contains(&labels[*i])).collect()
    };
    let core: Vec<usize> = (0..n).filter(|i| !buses.contains(i)).collect();
    if core.is_empty() {
        return Err(Error::Partition("every component is a bus element".into()));
    }
    let sub: Mat = core.iter().map(|i| core.iter().map(|j| sym[*i][*j]).collect()).collect();
    let m = mcl(&sub, params, opts.max_iterations)?;
    let mut leaves: Vec<Vec<usize>> =
        basins(&m, &vec![1; core.len()], params.beta).into_iter().map(|g| g.into_iter().map(|k| core[k]).collect()).collect();

    if !opts.isolate_buses {
        for &b in &buses {
            let conn = |g: &Vec<usize>| -> f64 { g.iter().map(|j| sym[b][*j]).sum() };
            let mut best = 0;
            for (gi, g) in leaves.iter().enumerate() {
                if conn(g) > conn(&leaves[best]) + TOL {
                    best = gi;
                }
            }
            if conn(&leaves[best]) > TOL {
                leaves[best].push(b);
                leaves[best].sort();
            } else {
                leaves.push(vec![b]);
            }
        }
    }

    // build levels upward on quotient matrices
    let mut level: Vec<Shape> =
        leaves.iter().map(|g| Shape::leaf(&g.iter().map(|i| labels[*i].clone()).collect::<Vec<_>>())).collect();
    let mut members: Vec<Vec<usize>> = leaves.clone();
    while level.len() > 1 {
        let k = level.len();
        let q: Mat = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| if a == b { 0.0 } else { members[a].iter().flat_map(|i| members[b].iter().map(move |j| (i, j))).map(|(i, j)| sym[*i][*j]).sum() })
                    .collect()
            })
            .collect();
        let sizes: Vec<usize> = members.iter().map(|g| g.len()).collect();
        let groups = basins(&mcl(&q, params, opts.max_iterations)?, &sizes, params.beta);
        if groups.len() == k || groups.len() == 1 {
            break;
        }
        let mut next_level = Vec::new();
        let mut next_members = Vec::new();
        for g in groups {
            if g.len() == 1 {
                next_level.push(level[g[0]].clone());
            } else {
                next_level.push(Shape::node(g.iter().map(|i| level[*i].clone()).collect()));
            }
            next_members.push(g.iter().flat_map(|i| members[*i].iter().copied()).collect());
        }
        level = next_level;
        members = next_members;
    }
    let root = if level.len() == 1 { level.pop().expect("one") } else { Shape::node(level) };
    Ok(ClusteringResult {
        tree: ClusterTree::from_shape(&root)?,
        bus_elements: if opts.isolate_buses { buses.iter().map(|i| labels[*i].clone()).collect() } else { vec![] },
        params: *params,
        dsm: dsm.clone(),
    })
}

/// Declarative adjustments of a clustering. Targets name a tree node or a
/// component (meaning the leaf that holds it). Nodes are renumbered after
/// every edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ClusterEdit {
    /// Move a component into another leaf.
    Move { component: String, to: String },
    /// Replace the given subtrees by one leaf holding all their components.
    Merge { nodes: Vec<String> },
    /// Split a leaf into the given groups plus a leaf with the remainder.
    Split { leaf: String, groups: Vec<Vec<String>> },
    /// Put the given sibling subtrees under a new common node.
    Group { nodes: Vec<String> },
}

fn resolve(tree: &ClusterTree, target: &str) -> Result<usize> {
    tree.find(target)
        .or_else(|| tree.leaf_of(target))
        .ok_or_else(|| Error::Partition(format!("unknown node or component `{target}`")))
}

/// Shape with `f` applied bottom-up; `None` deletes the subtree. Internal
/// nodes left without children are deleted, nodes with one child are
/// replaced by it.
const PLACEHOLDER: &str = "\u{0}";

fn rewrite(tree: &ClusterTree, i: usize, f: &mut dyn FnMut(usize, Shape) -> Option<Shape>) -> Option<Shape> {
    let n = tree.node(i);
    let shape = if n.children.is_empty() {
        Shape::leaf(&n.components)
    } else {
        let mut kids: Vec<Shape> = n.children.iter().filter_map(|c| rewrite(tree, *c, f)).collect();
        match kids.len() {
            0 => return None,
            1 if kids[0].name.as_deref() != Some(PLACEHOLDER) => kids.pop().expect("one child"),
            _ => Shape::node(kids),
        }
    };
    let out = f(i, shape)?;
    if out.children.is_empty() && out.components.is_empty() && out.name.as_deref() != Some(PLACEHOLDER) {
        None
    } else {
        Some(out)
    }
}

fn apply_edit(tree: &ClusterTree, edit: &ClusterEdit) -> Result<ClusterTree> {
    let shape = match edit {
        ClusterEdit::Move { component, to } => {
            let from = tree.leaf_of(component).ok_or_else(|| Error::Partition(format!("unknown component `{component}`")))?;
            let to = resolve(tree, to)?;
            if !tree.is_leaf(to) {
                return Err(Error::Partition(format!("move target `{}` is not a leaf", tree.node(to).name)));
            }
            rewrite(tree, 0, &mut |i, mut s| {
                if i == from {
                    s.components.retain(|c| c != component);
                }
                if i == to && from != to {
                    s.components.push(component.clone());
                }
                Some(s)
            })
        }
        ClusterEdit::Merge { nodes } => {
            let ids: Vec<usize> = nodes.iter().map(|n| resolve(tree, n)).collect::<Result<_>>()?;
            for a in &ids {
                for b in &ids {
                    if a != b && tree.is_ancestor(*a, *b) {
                        return Err(Error::Partition("merged nodes overlap".into()));
                    }
                }
            }
            let all: Vec<String> = ids.iter().flat_map(|i| tree.components_under(*i)).collect();
            let first = *ids.iter().min().ok_or_else(|| Error::Partition("empty merge".into()))?;
            rewrite(tree, 0, &mut |i, s| {
                if i == first {
                    Some(Shape::leaf(&all))
                } else if ids.contains(&i) {
                    None
                } else {
                    Some(s)
                }
            })
        }
        ClusterEdit::Split { leaf, groups } => {
            let id = resolve(tree, leaf)?;
            if !tree.is_leaf(id) {
                return Err(Error::Partition(format!("`{leaf}` is not a leaf")));
            }
            let have: BTreeSet<&String> = tree.node(id).components.iter().collect();
            let mut used = BTreeSet::new();
            for c in groups.iter().flatten() {
                if !have.contains(c) || !used.insert(c) {
                    return Err(Error::Partition(format!("split group component `{c}` is not in `{leaf}` exactly once")));
                }
            }
            let mut kids: Vec<Shape> = groups.iter().filter(|g| !g.is_empty()).map(|g| Shape::leaf(g)).collect();
            let rest: Vec<String> = tree.node(id).components.iter().filter(|c| !used.contains(c)).cloned().collect();
            if !rest.is_empty() {
                kids.push(Shape::leaf(&rest));
            }
            rewrite(tree, 0, &mut |i, s| if i == id { Some(if kids.len() == 1 { kids[0].clone() } else { Shape::node(kids.clone()) }) } else { Some(s) })
        }
        ClusterEdit::Group { nodes } => {
            let ids: Vec<usize> = nodes.iter().map(|n| resolve(tree, n)).collect::<Result<_>>()?;
            let parent = tree.parent(ids[0]);
            if parent.is_none() || ids.iter().any(|i| tree.parent(*i) != parent) {
                return Err(Error::Partition("grouped nodes must be siblings below the root or deeper".into()));
            }
            let p = parent.expect("checked");
            let mut grouped: Vec<Shape> = Vec::new();
            rewrite(tree, 0, &mut |i, mut s| {
                if ids.contains(&i) {
                    grouped.push(s);
                    return Some(Shape { name: Some(PLACEHOLDER.into()), children: vec![], components: vec![] });
                }
                if i == p {
                    let mut kids = Vec::new();
                    let mut placed = false;
                    for k in s.children.drain(..) {
                        if k.name.as_deref() == Some(PLACEHOLDER) {
                            if !placed {
                                kids.push(Shape::node(std::mem::take(&mut grouped)));
                                placed = true;
                            }
                        } else {
                            kids.push(k);
                        }
                    }
                    s.children = kids;
                }
                Some(s)
            })
        }
    };
    let shape = shape.ok_or_else(|| Error::Partition("edit removed every component".into()))?;
    ClusterTree::from_shape(&unnamed(&shape))
}

pub fn adjust_clusters(result: &ClusteringResult, edits: &[ClusterEdit]) -> Result<ClusteringResult> {
    let before = result.tree.all_components();
    let mut tree = result.tree.clone();
    for e in edits {
        tree = apply_edit(&tree, e)?;
    }
    if tree.all_components() != before {
        return Err(Error::Partition("edits changed the component set".into()));
    }
    Ok(ClusteringResult { tree, ..result.clone() })
}

/// Cuts the hierarchy so the root has exactly `k` children: the frontier
/// below the root is refined by expanding its largest internal node, or
/// coarsened by merging the two groups with the deepest common ancestor
/// (ties: strongest mutual dependency).
pub fn restrict_to_k_top_clusters(result: &ClusteringResult, k: usize) -> Result<ClusterTree> {
    let tree = &result.tree;
    let leaves = tree.leaves().len();
    if k == 0 || k > leaves {
        return Err(Error::Cardinality { requested: k, available: leaves });
    }
    let mut frontier: Vec<Vec<usize>> =
        if tree.is_leaf(0) { vec![vec![0]] } else { tree.node(0).children.iter().map(|c| vec![*c]).collect() };
    let size = |g: &Vec<usize>| g.iter().map(|i| tree.components_under(*i).len()).sum::<usize>();
    while frontier.len() < k {
        let pos = frontier
            .iter()
            .enumerate()
            .filter(|(_, g)| g.len() == 1 && !tree.is_leaf(g[0]))
            .max_by_key(|(i, g)| (size(g), std::cmp::Reverse(*i)))
            .map(|(i, _)| i)
            .expect("k does not exceed the leaf count");
        let node = frontier.remove(pos)[0];
        for (off, c) in tree.node(node).children.iter().enumerate() {
            frontier.insert(pos + off, vec![*c]);
        }
    }
    let depth = |mut i: usize| {
        let mut d = 0;
        while let Some(p) = tree.parent(i) {
            d += 1;
            i = p;
        }
        d
    };
    let index: BTreeMap<&str, usize> = result.dsm.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let weight = |a: &Vec<usize>, b: &Vec<usize>| -> u64 {
        let ca: Vec<usize> = a.iter().flat_map(|i| tree.components_under(*i)).filter_map(|c| index.get(c.as_str()).copied()).collect();
        let cb: Vec<usize> = b.iter().flat_map(|i| tree.components_under(*i)).filter_map(|c| index.get(c.as_str()).copied()).collect();
        ca.iter().flat_map(|i| cb.iter().map(move |j| (*i, *j))).map(|(i, j)| u64::from(result.dsm.matrix[i][j] + result.dsm.matrix[j][i])).sum()
    };
    while frontier.len() > k {
        let mut best: Option<((usize, u64), usize, usize)> = None;
        for a in 0..frontier.len() {
            for b in a + 1..frontier.len() {
                let lca = tree
                    .lowest_cover(frontier[a].iter().chain(&frontier[b]).flat_map(|i| tree.components_under(*i)).collect::<Vec<_>>().iter().map(|s| s.as_str()))
                    .unwrap_or(0);
                let key = (depth(lca), weight(&frontier[a], &frontier[b]));
                if best.map_or(true, |(bk, _, _)| key > bk) {
                    best = Some((key, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two groups");
        let moved = frontier.remove(b);
        frontier[a].extend(moved);
    }
    let sub = |i: usize| unnamed(&subtree_shape(tree, i));
    let children: Vec<Shape> = frontier
        .iter()
        .map(|g| if g.len() == 1 { sub(g[0]) } else { Shape::node(g.iter().map(|i| sub(*i)).collect()) })
        .collect();
    ClusterTree::from_shape(&Shape::node(children))
}

fn subtree_shape(tree: &ClusterTree, i: usize) -> Shape {
    let n = tree.node(i);
    Shape { name: None, children: n.children.iter().map(|c| subtree_shape(tree, *c)).collect(), components: n.components.clone() }
}

/// Leaf partition as sorted sets, for order-independent comparison.
pub fn leaf_partition(tree: &ClusterTree) -> BTreeSet<BTreeSet<String>> {
    tree.leaves().iter().map(|l| tree.node(*l).components.iter().cloned().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dsm(labels: &[&str], edges: &[(usize, usize)]) -> Dsm {
        let n = labels.len();
        let mut m = vec![vec![0; n]; n];
        for (a, b) in edges {
            m[*a][*b] += 1;
        }
        Dsm::from_matrix(labels.iter().map(|s| s.to_string()).collect(), m).unwrap()
    }

    fn two_blocks() -> Dsm {
        dsm(&["a", "b", "c", "x", "y", "z"], &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    }

    #[test]
    fn block_diagonal_separates() {
        let r = markov_cluster(&two_blocks(), &ClusteringParams::default()).unwrap();
        let parts = leaf_partition(&r.tree);
        assert_eq!(parts.len(), 2);
        assert!(parts.contains(&["a", "b", "c"].iter().map(|s| s.to_string()).collect()));
        assert!(r.bus_elements.is_empty());
    }

    #[test]
    fn single_component() {
        let r = markov_cluster(&dsm(&["only"], &[]), &ClusteringParams::default()).unwrap();
        assert_eq!(r.tree.len(), 1);
        assert_eq!(r.tree.node(0).components, vec!["only"]);
    }

    #[test]
    fn params_parse_and_validate() {
        let p: ClusteringParams = "2,2.9,2.9,30".parse().unwrap();
        assert_eq!(p, ClusteringParams::default());
        assert!("2,0,1,1".parse::<ClusteringParams>().is_err());
        assert!("2,1".parse::<ClusteringParams>().is_err());
    }

    #[test]
    fn hub_is_a_bus_for_small_gamma() {
        let d = dsm(&["hub", "a", "b", "c", "d"], &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(detect_bus_elements(&d, 1.5), vec!["hub"]);
        assert!(detect_bus_elements(&d, 30.0).is_empty());
        let iso = markov_cluster_with(
            &d,
            &ClusteringParams { gamma: 1.5, ..Default::default() },
            &ClusteringOptions { isolate_buses: true, ..Default::default() },
        )
        .unwrap();
        assert_eq!(iso.bus_elements, vec!["hub"]);
        assert!(!iso.tree.all_components().contains("hub"));
        assert!(iso.tree_with_buses().all_components().contains("hub"));
    }

    #[test]
    fn edits() {
        let r = markov_cluster(&two_blocks(), &ClusteringParams::default()).unwrap();
        assert_eq!(adjust_clusters(&r, &[]).unwrap(), r);
        let moved = adjust_clusters(&r, &[ClusterEdit::Move { component: "a".into(), to: "x".into() }]).unwrap();
        assert_eq!(moved.tree.leaf_of("a"), moved.tree.leaf_of("x"));
        let merged = adjust_clusters(&r, &[ClusterEdit::Merge { nodes: vec!["a".into(), "x".into()] }]).unwrap();
        assert_eq!(merged.tree.len(), 1);
        let split = adjust_clusters(&r, &[ClusterEdit::Split { leaf: "a".into(), groups: vec![vec!["a".into()]] }]).unwrap();
        assert_eq!(leaf_partition(&split.tree).len(), 3);
        assert!(adjust_clusters(&r, &[ClusterEdit::Move { component: "nope".into(), to: "x".into() }]).is_err());
        let grouped =
            adjust_clusters(&split, &[ClusterEdit::Group { nodes: vec!["a".into(), "b".into()] }]).unwrap();
        assert_eq!(grouped.tree.lowest_cover(["a", "b"]).map(|i| grouped.tree.is_leaf(i)), Some(false));
    }

    #[test]
    fn restrict_counts() {
        let r = markov_cluster(&two_blocks(), &ClusteringParams::default()).unwrap();
        let t1 = restrict_to_k_top_clusters(&r, 1).unwrap();
        assert_eq!(t1.node(0).children.len(), 1);
        let t2 = restrict_to_k_top_clusters(&r, 2).unwrap();
        assert_eq!(t2.node(0).children.len(), 2);
        assert!(matches!(restrict_to_k_top_clusters(&r, 3), Err(Error::Cardinality { .. })));
    }
}
