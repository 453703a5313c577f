//! Binary HAC trees: structure, generator labeling, nesting checks and CDF.
//!
//! Nodes are numbered `1..=2d-1`. Leaves are `1..=d`, forks `d+1..=2d-1` and
//! the root is always `2d-1`. Forks are renumbered on construction so that
//! higher Kendall's tau gets the lower number (children always precede
//! their parent).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HopacError, Result};
use crate::generator::{Family, Generator};

/// Absolute tolerance for parameter equalities in the nesting rules.
pub const SNC_TOL: f64 = 1e-12;

/// Unlabeled binary tree over `d` leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    d: usize,
    /// `children[k]` belongs to fork `d + 1 + k`.
    children: Vec<[usize; 2]>,
    parent: Vec<usize>,
}

impl Structure {
    /// Builds a structure from `(fork id, children)` pairs, validating that
    /// they form a rooted binary tree on leaves `1..=d`. Fork ids must be a
    /// permutation of `d+1..=2d-1`; they are kept as given.
    pub fn new(d: usize, forks: &[(usize, [usize; 2])]) -> Result<Self> {
        if d < 2 {
            return Err(HopacError::InvalidTree(format!("need at least 2 leaves, got {d}")));
        }
        if forks.len() != d - 1 {
            return Err(HopacError::InvalidTree(format!(
                "{} forks given, a binary tree on {d} leaves has {}",
                forks.len(),
                d - 1
            )));
        }
        let m = 2 * d - 1;
        let mut children = vec![[0usize; 2]; d - 1];
        let mut seen = vec![false; d - 1];
        for &(id, ch) in forks {
            if id <= d || id > m {
                return Err(HopacError::InvalidTree(format!("fork id {id} outside {}..={m}", d + 1)));
            }
            if seen[id - d - 1] {
                return Err(HopacError::InvalidTree(format!("duplicate fork id {id}")));
            }
            seen[id - d - 1] = true;
            children[id - d - 1] = ch;
        }
        let mut parent = vec![0usize; m + 1];
        for (k, ch) in children.iter().enumerate() {
            let id = d + 1 + k;
            if ch[0] == ch[1] {
                return Err(HopacError::InvalidTree(format!("fork {id} has a repeated child")));
            }
            for &c in ch {
                if c == 0 || c > m || c == id {
                    return Err(HopacError::InvalidTree(format!("fork {id} has invalid child {c}")));
                }
                if parent[c] != 0 {
                    return Err(HopacError::InvalidTree(format!("node {c} has two parents")));
                }
                parent[c] = id;
            }
        }
        let roots: Vec<usize> = (1..=m).filter(|&v| parent[v] == 0).collect();
        if roots.len() != 1 || roots[0] <= d {
            return Err(HopacError::InvalidTree("edges do not form a single rooted tree".into()));
        }
        let s = Structure { d, children, parent };
        // A cycle would leave some node unreachable from the root.
        let mut count = 0;
        let mut stack = vec![roots[0]];
        while let Some(v) = stack.pop() {
            count += 1;
            if count > m {
                break;
            }
            if v > d {
                stack.extend_from_slice(&s.children[v - d - 1]);
            }
        }
        if count != m {
            return Err(HopacError::InvalidTree("edges do not form a single rooted tree".into()));
        }
        Ok(s)
    }

    /// Renumbers forks so that larger `key` gets a smaller id while every
    /// child keeps a smaller id than its parent. Returns the new structure
    /// and `old_to_new` over all node ids (index 0 unused).
    pub fn renumbered(&self, key: impl Fn(usize) -> f64) -> (Structure, Vec<usize>) {
        let d = self.d;
        let m = self.root_of_input();
        let mut old_to_new = vec![0usize; 2 * d];
        for leaf in 1..=d {
            old_to_new[leaf] = leaf;
        }
        let mut done = vec![false; 2 * d];
        for leaf in 1..=d {
            done[leaf] = true;
        }
        let mut next = d + 1;
        while next <= 2 * d - 1 {
            let mut best: Option<(usize, f64)> = None;
            for f in self.forks() {
                if done[f] || !self.children_of(f).iter().all(|&c| done[c]) {
                    continue;
                }
                let k = key(f);
                let better = match best {
                    None => true,
                    Some((bf, bk)) => k > bk || (k == bk && self.min_leaf(f) < self.min_leaf(bf)),
                };
                if better {
                    best = Some((f, k));
                }
            }
            let (f, _) = best.expect("a ready fork always exists in a tree");
            done[f] = true;
            old_to_new[f] = next;
            next += 1;
        }
        debug_assert_eq!(old_to_new[m], 2 * d - 1);
        let forks: Vec<(usize, [usize; 2])> = self
            .forks()
            .map(|f| {
                let ch = self.children_of(f);
                let mut nc = [old_to_new[ch[0]], old_to_new[ch[1]]];
                nc.sort_unstable();
                (old_to_new[f], nc)
            })
            .collect();
        (Structure::new(d, &forks).expect("renumbering preserves the tree"), old_to_new)
    }

    fn root_of_input(&self) -> usize {
        (self.d + 1..=2 * self.d - 1).find(|&v| self.parent[v] == 0).unwrap()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Id of the root. Equals `2d-1` for renumbered structures.
    pub fn root(&self) -> usize {
        self.root_of_input()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node >= 1 && node <= self.d
    }

    pub fn forks(&self) -> impl Iterator<Item = usize> + '_ {
        self.d + 1..=2 * self.d - 1
    }

    pub fn children_of(&self, fork: usize) -> [usize; 2] {
        self.children[fork - self.d - 1]
    }

    /// Parent fork, or `None` for the root.
    pub fn parent_of(&self, node: usize) -> Option<usize> {
        match self.parent[node] {
            0 => None,
            p => Some(p),
        }
    }

    /// Forks in depth-first order from the root (parents before children).
    pub fn preorder_forks(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.d - 1);
        let mut stack = vec![self.root()];
        while let Some(v) = stack.pop() {
            if v > self.d {
                out.push(v);
                let [a, b] = self.children_of(v);
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    /// Sorted leaves below `node`; `[node]` for a leaf.
    pub fn descendant_leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) {
                out.push(v);
            } else {
                stack.extend_from_slice(&self.children_of(v));
            }
        }
        out.sort_unstable();
        out
    }

    fn min_leaf(&self, node: usize) -> usize {
        self.descendant_leaves(node)[0]
    }

    fn ancestors(&self, node: usize) -> Vec<usize> {
        let mut out = vec![node];
        let mut v = node;
        while let Some(p) = self.parent_of(v) {
            out.push(p);
            v = p;
        }
        out
    }

    pub fn youngest_common_ancestor(&self, i: usize, j: usize) -> Result<usize> {
        if !self.is_leaf(i) || !self.is_leaf(j) {
            return Err(HopacError::Domain(format!("({i}, {j}) are not both leaves")));
        }
        if i == j {
            return Err(HopacError::Domain(format!("youngest common ancestor of leaf {i} with itself")));
        }
        let ai = self.ancestors(i);
        let aj: BTreeSet<usize> = self.ancestors(j).into_iter().collect();
        Ok(*ai.iter().find(|v| aj.contains(v)).expect("root is a common ancestor"))
    }

    /// Number of edges from the root.
    pub fn depth(&self, node: usize) -> usize {
        self.ancestors(node).len() - 1
    }

    /// The forks as sets of descendant leaves; equal for leaf-labeled equal trees.
    pub fn clades(&self) -> BTreeSet<Vec<usize>> {
        self.forks().map(|f| self.descendant_leaves(f)).collect()
    }

    pub fn to_pairs(&self) -> Vec<(usize, [usize; 2])> {
        self.forks().map(|f| (f, self.children_of(f))).collect()
    }
}

/// A fork entry of the JSON tree format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForkSpec {
    pub id: usize,
    pub children: Vec<usize>,
    pub generator: Generator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawTree {
    d: usize,
    forks: Vec<ForkSpec>,
}

/// A HAC: binary structure plus one generator per fork, all of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct HacTree {
    structure: Structure,
    /// `generators[k]` belongs to fork `d + 1 + k`.
    generators: Vec<Generator>,
}

impl TryFrom<RawTree> for HacTree {
    type Error = HopacError;

    fn try_from(raw: RawTree) -> Result<Self> {
        let forks = raw
            .forks
            .into_iter()
            .map(|f| {
                if f.children.len() != 2 {
                    return Err(HopacError::InvalidTree(format!(
                        "fork {} has {} children; only binary forks are supported",
                        f.id,
                        f.children.len()
                    )));
                }
                Ok((f.id, [f.children[0], f.children[1]], f.generator))
            })
            .collect::<Result<Vec<_>>>()?;
        HacTree::new(raw.d, forks)
    }
}

impl From<HacTree> for RawTree {
    fn from(t: HacTree) -> Self {
        let forks = t
            .structure
            .forks()
            .map(|f| ForkSpec { id: f, children: t.structure.children_of(f).to_vec(), generator: *t.generator(f) })
            .collect();
        RawTree { d: t.d(), forks }
    }
}

/// One failed parent-child pair in a nesting check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SncViolation {
    pub parent: usize,
    pub child: usize,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SncReport {
    pub valid: bool,
    pub violations: Vec<SncViolation>,
}

/// Which nesting rule admits a parent-child pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NestingRule {
    R1,
    R2,
}

impl fmt::Display for NestingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NestingRule::R1 => "R1",
            NestingRule::R2 => "R2",
        })
    }
}

/// R1 (parent beta = 1, parent theta <= child theta) is tried before R2
/// (equal theta, parent beta <= child beta).
pub fn nesting_rule(parent: &Generator, child: &Generator) -> Option<NestingRule> {
    if parent.family() != child.family() {
        return None;
    }
    if (parent.beta() - 1.0).abs() <= SNC_TOL && parent.theta() <= child.theta() + SNC_TOL {
        return Some(NestingRule::R1);
    }
    if (parent.theta() - child.theta()).abs() <= SNC_TOL && parent.beta() <= child.beta() + SNC_TOL {
        return Some(NestingRule::R2);
    }
    None
}

/// Pairwise dependence measures implied by a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrices {
    pub tau: Vec<Vec<f64>>,
    pub lambda_u: Vec<Vec<f64>>,
    pub lambda_l: Vec<Vec<f64>>,
}

impl HacTree {
    /// Builds a tree from `(fork id, children, generator)` triples. Forks are
    /// renumbered so that Kendall's tau decreases with the id.
    pub fn new(d: usize, forks: Vec<(usize, [usize; 2], Generator)>) -> Result<Self> {
        let pairs: Vec<(usize, [usize; 2])> = forks.iter().map(|f| (f.0, f.1)).collect();
        let s = Structure::new(d, &pairs)?;
        let mut by_id = BTreeMap::new();
        for (id, _, g) in &forks {
            by_id.insert(*id, *g);
        }
        let family = forks[0].2.family();
        if let Some((id, g)) = by_id.iter().find(|(_, g)| g.family() != family) {
            return Err(HopacError::InvalidTree(format!(
                "fork {id} uses family {} but the tree uses {family}",
                g.family()
            )));
        }
        Ok(Self::from_structure(&s, |f| by_id[&f]))
    }

    /// Labels `structure` with `gen(fork)` and renumbers by tau.
    pub fn from_structure(structure: &Structure, gen: impl Fn(usize) -> Generator) -> Self {
        Self::from_structure_with_map(structure, gen).0
    }

    /// As [`HacTree::from_structure`], also returning the map from the input
    /// node ids to the new ones (index 0 unused).
    pub fn from_structure_with_map(structure: &Structure, gen: impl Fn(usize) -> Generator) -> (Self, Vec<usize>) {
        let taus: BTreeMap<usize, f64> = structure.forks().map(|f| (f, gen(f).kendall_tau())).collect();
        let (s, map) = structure.renumbered(|f| taus[&f]);
        let d = s.d();
        let mut generators = vec![gen(structure.root()); d - 1];
        for f in structure.forks() {
            generators[map[f] - d - 1] = gen(f);
        }
        (HacTree { structure: s, generators }, map)
    }

    pub fn d(&self) -> usize {
        self.structure.d()
    }

    pub fn root(&self) -> usize {
        2 * self.d() - 1
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn family(&self) -> Family {
        self.generators[0].family()
    }

    pub fn generator(&self, fork: usize) -> &Generator {
        &self.generators[fork - self.d() - 1]
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn children_of(&self, fork: usize) -> [usize; 2] {
        self.structure.children_of(fork)
    }

    pub fn descendant_leaves(&self, node: usize) -> Result<Vec<usize>> {
        if node == 0 || node > self.root() {
            return Err(HopacError::Domain(format!("node {node} not in tree")));
        }
        Ok(self.structure.descendant_leaves(node))
    }

    pub fn youngest_common_ancestor(&self, i: usize, j: usize) -> Result<usize> {
        self.structure.youngest_common_ancestor(i, j)
    }

    pub fn validate_snc(&self) -> SncReport {
        let mut violations = Vec::new();
        for p in self.structure.forks() {
            for c in self.children_of(p) {
                if self.structure.is_leaf(c) {
                    continue;
                }
                if nesting_rule(self.generator(p), self.generator(c)).is_none() {
                    let (gp, gc) = (self.generator(p), self.generator(c));
                    let rule = if (gp.beta() - 1.0).abs() <= SNC_TOL {
                        format!("R1: theta {} > child theta {}", gp.theta(), gc.theta())
                    } else if (gp.theta() - gc.theta()).abs() <= SNC_TOL {
                        format!("R2: beta {} > child beta {}", gp.beta(), gc.beta())
                    } else {
                        format!("neither rule: beta {} > 1 and theta {} != {}", gp.beta(), gp.theta(), gc.theta())
                    };
                    violations.push(SncViolation { parent: p, child: c, rule });
                }
            }
        }
        SncReport { valid: violations.is_empty(), violations }
    }

    /// Fails with the first nesting violation, if any.
    pub fn require_snc(&self) -> Result<()> {
        match self.validate_snc().violations.first() {
            None => Ok(()),
            Some(v) => Err(HopacError::NestingCondition { parent: v.parent, child: v.child }),
        }
    }

    /// Recursive CDF: each fork applies its Archimedean copula to the values
    /// of its children.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.d() {
            return Err(HopacError::Domain(format!("point has {} coordinates, tree has {}", u.len(), self.d())));
        }
        if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(HopacError::Domain("cdf argument outside [0, 1]^d".into()));
        }
        Ok(self.cdf_node(self.root(), u))
    }

    fn cdf_node(&self, node: usize, u: &[f64]) -> f64 {
        if self.structure.is_leaf(node) {
            return u[node - 1];
        }
        let [a, b] = self.children_of(node);
        let (va, vb) = (self.cdf_node(a, u), self.cdf_node(b, u));
        self.generator(node).copula_cdf(&[va, vb])
    }

    pub fn fork_taus(&self) -> BTreeMap<usize, f64> {
        self.structure.forks().map(|f| (f, self.generator(f).kendall_tau())).collect()
    }

    pub fn pairwise_matrix(&self) -> PairwiseMatrices {
        let d = self.d();
        let mut tau = vec![vec![1.0; d]; d];
        let mut lambda_u = vec![vec![1.0; d]; d];
        let mut lambda_l = vec![vec![1.0; d]; d];
        for i in 0..d {
            for j in i + 1..d {
                let g = self.generator(self.youngest_common_ancestor(i + 1, j + 1).unwrap());
                let tc = g.tail_coefficients();
                let t = g.kendall_tau();
                tau[i][j] = t;
                tau[j][i] = t;
                lambda_u[i][j] = tc.lambda_u;
                lambda_u[j][i] = tc.lambda_u;
                lambda_l[i][j] = tc.lambda_l;
                lambda_l[j][i] = tc.lambda_l;
            }
        }
        PairwiseMatrices { tau, lambda_u, lambda_l }
    }

    /// Grouping of a leaf triple: `Some(pair)` when that pair meets strictly
    /// below the third leaf, `None` when all three meet at one level.
    pub fn triple_class(&self, i: usize, j: usize, k: usize) -> Option<(usize, usize)> {
        triple_class(&self.structure, Some(self), i, j, k)
    }
}

/// Shared triple classification. With generators available, a pair whose
/// meeting fork has the same tau as the top fork counts as "all equal".
pub(crate) fn triple_class(
    s: &Structure,
    tree: Option<&HacTree>,
    i: usize,
    j: usize,
    k: usize,
) -> Option<(usize, usize)> {
    let pairs = [(i, j, k), (i, k, j), (j, k, i)];
    for (a, b, c) in pairs {
        let f = s.youngest_common_ancestor(a, b).unwrap();
        let top = s.youngest_common_ancestor(a, c).unwrap();
        if s.depth(f) > s.depth(top) {
            if let Some(t) = tree {
                let tf = t.generator(f).kendall_tau();
                let tt = t.generator(top).kendall_tau();
                if (tf - tt).abs() <= SNC_TOL {
                    return None;
                }
            }
            return Some((a.min(b), a.max(b)));
        }
    }
    None
}

impl fmt::Display for HacTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &HacTree, node: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if t.structure.is_leaf(node) {
                return write!(f, "u{node}");
            }
            let g = t.generator(node);
            write!(f, "[{node}: {}({}, {}) ", g.family(), g.theta(), g.beta())?;
            let [a, b] = t.children_of(node);
            go(t, a, f)?;
            write!(f, " ")?;
            go(t, b, f)?;
            write!(f, "]")
        }
        go(self, self.root(), f)
    }
}
