//! Rooted, locally finite trees described by cone types.
//!
//! Every tree is stored as a finite automaton: a set of cone types, a root
//! type and, per type, the ordered list of child types. An explicit finite
//! tree is the special case where every vertex is its own type. Vertices are
//! addressed by their path of child indices from the root, which is stable
//! across both descriptions.

use num::BigUint;
use num::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type TypeId = usize;

/// A vertex, identified by the child indices along the geodesic from `o`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Vertex(Vec<u32>);

impl Vertex {
    pub fn root() -> Self {
        Vertex(Vec::new())
    }

    pub fn from_path(path: Vec<u32>) -> Self {
        Vertex(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: u32) -> Vertex {
        let mut p = self.0.clone();
        p.push(index);
        Vertex(p)
    }

    /// The father `v_-`; `None` at the root.
    pub fn father(&self) -> Option<Vertex> {
        if self.0.is_empty() {
            None
        } else {
            Some(Vertex(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// `v_k`, the vertex of length `k` on `[o, v]`.
    pub fn ancestor_at(&self, k: usize) -> Vertex {
        Vertex(self.0[..k.min(self.0.len())].to_vec())
    }

    /// `self <= other` in the partial order induced by `o`.
    pub fn is_ancestor_of(&self, other: &Vertex) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn confluent(&self, other: &Vertex) -> Vertex {
        let n = self
            .0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count();
        Vertex(self.0[..n].to_vec())
    }

    /// Breadth-first order: by depth, then lexicographically.
    pub fn bfs_cmp(&self, other: &Vertex) -> std::cmp::Ordering {
        self.depth()
            .cmp(&other.depth())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o")?;
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

impl FromStr for Vertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split('/');
        if parts.next() != Some("o") {
            return Err(Error::Malformed(format!("vertex path must start with 'o': {s:?}")));
        }
        parts
            .map(|p| {
                p.parse::<u32>()
                    .map_err(|_| Error::Malformed(format!("bad vertex path {s:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Vertex)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeType {
    pub name: String,
    pub children: Vec<TypeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeKind {
    Explicit,
    Automaton,
}

/// Tree-description document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum TreeSpec {
    Explicit(BTreeMap<String, Vec<String>>),
    Automaton(AutomatonSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AutomatonSpec {
    pub types: BTreeMap<String, Vec<String>>,
    pub root_type: String,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    types: Vec<ConeType>,
    root: TypeId,
    depth: usize,
    kind: TreeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearBranchReport {
    pub max_branch_length: usize,
    pub all_finite: bool,
}

impl Tree {
    pub fn build(spec: &TreeSpec) -> Result<Tree> {
        match spec {
            TreeSpec::Explicit(map) => Self::explicit(map),
            TreeSpec::Automaton(a) => {
                let types: Vec<(&str, Vec<&str>)> = a
                    .types
                    .iter()
                    .map(|(k, v)| (k.as_str(), v.iter().map(String::as_str).collect()))
                    .collect();
                let borrowed: Vec<(&str, &[&str])> =
                    types.iter().map(|(k, v)| (*k, v.as_slice())).collect();
                Self::automaton(&borrowed, &a.root_type, a.depth)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        let spec: TreeSpec =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::build(&spec)
    }

    /// Builds a cone-type automaton expanded to working depth `depth`.
    pub fn automaton(types: &[(&str, &[&str])], root_type: &str, depth: usize) -> Result<Tree> {
        let index: HashMap<&str, TypeId> =
            types.iter().enumerate().map(|(i, (n, _))| (*n, i)).collect();
        if index.len() != types.len() {
            return Err(Error::Malformed("duplicate cone type name".into()));
        }
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| Error::UnknownType(n.to_string()))
        };
        let cone_types = types
            .iter()
            .map(|(name, kids)| {
                Ok(ConeType {
                    name: name.to_string(),
                    children: kids.iter().map(|k| lookup(k)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tree {
            types: cone_types,
            root: lookup(root_type)?,
            depth,
            kind: TreeKind::Automaton,
        })
    }

    /// Builds a finite tree from a children map. The root is the unique
    /// vertex that is nobody's child; vertices that only occur as children
    /// are leaves.
    pub fn explicit(map: &BTreeMap<String, Vec<String>>) -> Result<Tree> {
        let mut parent: HashMap<&str, &str> = HashMap::new();
        let mut all: BTreeSet<&str> = BTreeSet::new();
        for (v, kids) in map {
            all.insert(v);
            let mut seen = HashSet::new();
            for k in kids {
                if !seen.insert(k.as_str()) {
                    return Err(Error::CycleDetected(format!("{k} listed twice under {v}")));
                }
                all.insert(k);
                if let Some(p) = parent.insert(k, v) {
                    return Err(Error::CycleDetected(format!("{k} has two fathers ({p}, {v})")));
                }
            }
        }
        let roots: Vec<&str> = all
            .iter()
            .copied()
            .filter(|v| !parent.contains_key(v))
            .collect();
        let root = match roots.as_slice() {
            [] => return Err(Error::CycleDetected("every vertex has a father".into())),
            [r] => *r,
            many => {
                let stray = many.iter().find(|v| **v != "o").unwrap_or(&many[1]);
                return Err(Error::Disconnected(stray.to_string()));
            }
        };

        let mut order: Vec<&str> = Vec::new();
        let mut ids: HashMap<&str, TypeId> = HashMap::new();
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            ids.insert(v, order.len());
            order.push(v);
            if let Some(kids) = map.get(v) {
                queue.extend(kids.iter().map(String::as_str));
            }
        }
        if let Some(v) = all.iter().find(|v| !ids.contains_key(*v)) {
            // Anything unreachable has a father chain that never reaches the root.
            return Err(Error::CycleDetected(format!("{v} lies on a cycle")));
        }

        let mut depth_of = vec![0usize; order.len()];
        let types = order
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let children: Vec<TypeId> = map
                    .get(*v)
                    .map(|kids| kids.iter().map(|k| ids[k.as_str()]).collect())
                    .unwrap_or_default();
                for &c in &children {
                    depth_of[c] = depth_of[i] + 1;
                }
                ConeType {
                    name: v.to_string(),
                    children,
                }
            })
            .collect();
        Ok(Tree {
            types,
            root: 0,
            depth: depth_of.iter().copied().max().unwrap_or(0),
            kind: TreeKind::Explicit,
        })
    }

    /// Homogeneous tree in which the root has `root_children` children and
    /// every other vertex `children` children.
    pub fn homogeneous(root_children: usize, children: usize, depth: usize) -> Tree {
        Tree {
            types: vec![
                ConeType {
                    name: "root".into(),
                    children: vec![1; root_children],
                },
                ConeType {
                    name: "inner".into(),
                    children: vec![1; children],
                },
            ],
            root: 0,
            depth,
            kind: TreeKind::Automaton,
        }
    }

    pub fn binary(depth: usize) -> Tree {
        Self::automaton(&[("b", &["b", "b"])], "b", depth).expect("valid automaton")
    }

    /// Same cone types with new child lists.
    pub(crate) fn with_children(&self, children: Vec<Vec<TypeId>>) -> Tree {
        let types = self
            .types
            .iter()
            .zip(children)
            .map(|(c, children)| ConeType {
                name: c.name.clone(),
                children,
            })
            .collect();
        Tree { types, ..self.clone() }
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Same tree with a different working depth.
    pub fn with_depth(&self, depth: usize) -> Tree {
        Tree {
            depth,
            ..self.clone()
        }
    }

    pub fn root_type(&self) -> TypeId {
        self.root
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        &self.types[t].name
    }

    pub fn type_by_name(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|c| c.name == name)
    }

    pub fn child_types(&self, t: TypeId) -> &[TypeId] {
        &self.types[t].children
    }

    pub fn is_terminal_type(&self, t: TypeId) -> bool {
        self.types[t].children.is_empty()
    }

    /// Cone type of `v`, or `VertexNotFound` when `v` is deeper than the
    /// working depth or not in the tree.
    pub fn type_of(&self, v: &Vertex) -> Result<TypeId> {
        if v.depth() > self.depth {
            return Err(Error::VertexNotFound(v.clone()));
        }
        self.type_of_unbounded(v)
    }

    /// Like [`Tree::type_of`] without the working-depth cutoff; automaton
    /// trees are infinite.
    pub fn type_of_unbounded(&self, v: &Vertex) -> Result<TypeId> {
        let mut t = self.root;
        for &i in v.path() {
            t = *self.types[t]
                .children
                .get(i as usize)
                .ok_or_else(|| Error::VertexNotFound(v.clone()))?;
        }
        Ok(t)
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.type_of(v).is_ok()
    }

    pub fn is_terminal(&self, v: &Vertex) -> Result<bool> {
        Ok(self.is_terminal_type(self.type_of_unbounded(v)?))
    }

    pub fn children(&self, v: &Vertex) -> Result<Vec<Vertex>> {
        let t = self.type_of_unbounded(v)?;
        Ok((0..self.types[t].children.len() as u32)
            .map(|i| v.child(i))
            .collect())
    }

    /// Geodesic `[u, v]` as an ordered vertex list.
    pub fn geodesic(&self, u: &Vertex, v: &Vertex) -> Result<Vec<Vertex>> {
        self.type_of(u)?;
        self.type_of(v)?;
        let c = u.confluent(v);
        let mut path: Vec<Vertex> = (c.depth()..=u.depth())
            .rev()
            .map(|k| u.ancestor_at(k))
            .collect();
        path.extend((c.depth() + 1..=v.depth()).map(|k| v.ancestor_at(k)));
        Ok(path)
    }

    pub fn dist(&self, u: &Vertex, v: &Vertex) -> Result<usize> {
        Ok(self.geodesic(u, v)?.len() - 1)
    }

    /// Set of cone types occurring on the circle `C_k`.
    pub fn level_types(&self, k: usize) -> BTreeSet<TypeId> {
        let mut level = BTreeSet::from([self.root]);
        for _ in 0..k {
            level = level
                .iter()
                .flat_map(|&t| self.types[t].children.iter().copied())
                .collect();
        }
        level
    }

    /// First vertex of each cone type on `C_k`, in breadth-first order.
    pub fn level_representatives(&self, k: usize) -> BTreeMap<TypeId, Vertex> {
        let mut level: BTreeMap<TypeId, Vertex> = BTreeMap::from([(self.root, Vertex::root())]);
        for _ in 0..k {
            let mut next: BTreeMap<TypeId, Vertex> = BTreeMap::new();
            for (&t, v) in &level {
                for (i, &c) in self.types[t].children.iter().enumerate() {
                    let w = v.child(i as u32);
                    match next.get(&c) {
                        Some(old) if old.bfs_cmp(&w).is_le() => {}
                        _ => {
                            next.insert(c, w);
                        }
                    }
                }
            }
            level = next;
        }
        level
    }

    /// `|C_k|` computed from the automaton by propagating type counts.
    pub fn circle_size(&self, k: usize) -> BigUint {
        let mut counts = vec![BigUint::zero(); self.types.len()];
        counts[self.root] = BigUint::one();
        for _ in 0..k {
            let mut next = vec![BigUint::zero(); self.types.len()];
            for (t, c) in counts.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for &ch in &self.types[t].children {
                    next[ch] += c;
                }
            }
            counts = next;
        }
        counts.into_iter().sum()
    }

    /// Number of vertices in [`Tree::front`]`(n)`, from type counts.
    pub fn front_size(&self, n: usize) -> BigUint {
        let mut counts = vec![BigUint::zero(); self.types.len()];
        counts[self.root] = BigUint::one();
        let mut done = BigUint::zero();
        for _ in 0..n {
            let mut next = vec![BigUint::zero(); self.types.len()];
            for (t, c) in counts.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                if self.types[t].children.is_empty() {
                    done += c;
                }
                for &ch in &self.types[t].children {
                    next[ch] += c;
                }
            }
            counts = next;
        }
        done + counts.into_iter().sum::<BigUint>()
    }

    /// `|B_k|`.
    pub fn ball_size(&self, k: usize) -> BigUint {
        (0..=k).map(|j| self.circle_size(j)).sum()
    }

    /// Explicit circle `C_k` in breadth-first order.
    pub fn circle(&self, k: usize) -> Vec<Vertex> {
        let mut level = vec![(Vertex::root(), self.root)];
        for _ in 0..k {
            level = level
                .iter()
                .flat_map(|(v, t)| {
                    self.types[*t]
                        .children
                        .iter()
                        .enumerate()
                        .map(move |(i, &c)| (v.child(i as u32), c))
                })
                .collect();
        }
        level.into_iter().map(|(v, _)| v).collect()
    }

    /// Vertices generating the algebra `A_n`: the circle `C_n` together
    /// with terminal vertices of length below `n`, in boundary (lexicographic)
    /// order.
    pub fn front(&self, n: usize) -> Vec<Vertex> {
        let mut out = Vec::new();
        let mut level = vec![(Vertex::root(), self.root)];
        for d in 0..=n {
            let mut next = Vec::new();
            for (v, t) in level {
                if d == n || self.is_terminal_type(t) {
                    out.push(v);
                } else {
                    for (i, &c) in self.types[t].children.iter().enumerate() {
                        next.push((v.child(i as u32), c));
                    }
                }
            }
            level = next;
        }
        out.sort();
        out
    }

    /// Explicit ball `B_k` in breadth-first order.
    pub fn ball(&self, k: usize) -> Vec<Vertex> {
        (0..=k).flat_map(|j| self.circle(j)).collect()
    }

    /// Linear-branch analysis: a linear branch is a maximal chain of
    /// consecutive vertices with exactly one child.
    pub fn linear_branches(&self) -> LinearBranchReport {
        let single = |t: TypeId| self.types[t].children.len() == 1;
        let levels: Vec<BTreeSet<TypeId>> = (0..=self.depth).map(|k| self.level_types(k)).collect();

        // chain[d][t]: length of the single-child chain starting at a vertex of
        // type t at depth d, counted inside B_D.
        let mut below: HashMap<TypeId, usize> = HashMap::new();
        let mut best = 0;
        for d in (0..=self.depth).rev() {
            let mut here = HashMap::new();
            for &t in &levels[d] {
                let len = if single(t) {
                    1 + below.get(&self.types[t].children[0]).copied().unwrap_or(0)
                } else {
                    0
                };
                best = best.max(len);
                here.insert(t, len);
            }
            below = here;
        }

        let all_finite = match self.kind {
            TreeKind::Explicit => true,
            TreeKind::Automaton => !self.has_single_child_cycle(),
        };
        LinearBranchReport {
            max_branch_length: best,
            all_finite,
        }
    }

    pub fn reachable_types(&self) -> BTreeSet<TypeId> {
        let mut seen = BTreeSet::from([self.root]);
        let mut stack = vec![self.root];
        while let Some(t) = stack.pop() {
            for &c in &self.types[t].children {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    fn has_single_child_cycle(&self) -> bool {
        for start in self.reachable_types() {
            let mut t = start;
            let mut visited = HashSet::new();
            while self.types[t].children.len() == 1 {
                if !visited.insert(t) {
                    return true;
                }
                t = self.types[t].children[0];
            }
        }
        false
    }

    /// The ball `B_depth` as an explicit tree whose types are its vertices;
    /// vertices of length `depth` become terminal. Vertex paths are
    /// preserved.
    pub fn expand_explicit(&self, depth: usize) -> Tree {
        let mut types = Vec::new();
        let mut queue = VecDeque::from([(Vertex::root(), self.root)]);
        while let Some((v, t)) = queue.pop_front() {
            let id = types.len();
            let n_kids = if v.depth() < depth {
                self.types[t].children.len()
            } else {
                0
            };
            let first_child = id + queue.len() + 1;
            types.push(ConeType {
                name: v.to_string(),
                children: (first_child..first_child + n_kids).collect(),
            });
            if n_kids > 0 {
                for (i, &c) in self.types[t].children.iter().enumerate() {
                    queue.push_back((v.child(i as u32), c));
                }
            }
        }
        Tree {
            types,
            root: 0,
            depth,
            kind: TreeKind::Explicit,
        }
    }
}

/// Breadth-first enumeration `x_1 = o, x_2, …` of the vertices in `B_D`,
/// children in stored order.
#[derive(Clone, Debug)]
pub struct VertexOrdering<'a> {
    tree: &'a Tree,
}

impl<'a> VertexOrdering<'a> {
    pub fn new(tree: &'a Tree) -> Self {
        VertexOrdering { tree }
    }

    pub fn len(&self) -> BigUint {
        self.tree.ball_size(self.tree.depth)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = Vertex> + 'a {
        let tree = self.tree;
        let mut queue = VecDeque::from([(Vertex::root(), tree.root)]);
        std::iter::from_fn(move || {
            let (v, t) = queue.pop_front()?;
            if v.depth() < tree.depth {
                for (i, &c) in tree.types[t].children.iter().enumerate() {
                    queue.push_back((v.child(i as u32), c));
                }
            }
            Some(v)
        })
    }

    /// 1-based index of `v` in the enumeration.
    pub fn index_of(&self, v: &Vertex) -> Result<BigUint> {
        let t = self.tree;
        t.type_of(v)?;
        let mut idx = t.ball_size(v.depth()) - t.circle_size(v.depth());
        // Count vertices at the same depth that precede v lexicographically.
        let mut prefix = Vertex::root();
        for (k, &i) in v.path().iter().enumerate() {
            let ty = t.type_of_unbounded(&prefix)?;
            for j in 0..i {
                let sib = t.types[ty].children[j as usize];
                idx += t.subtree_width(sib, v.depth() - k - 1);
            }
            prefix = prefix.child(i);
        }
        Ok(idx + BigUint::one())
    }
}

impl Tree {
    /// Number of descendants at relative depth `r` below a vertex of type `t`.
    fn subtree_width(&self, t: TypeId, r: usize) -> BigUint {
        let mut counts: HashMap<TypeId, BigUint> = HashMap::from([(t, BigUint::one())]);
        for _ in 0..r {
            let mut next: HashMap<TypeId, BigUint> = HashMap::new();
            for (ty, c) in &counts {
                for &ch in &self.types[*ty].children {
                    *next.entry(ch).or_insert_with(BigUint::zero) += c;
                }
            }
            counts = next;
        }
        counts.into_values().sum()
    }
}
