//! Functions on the vertices of a tree and locally constant boundary
//! functions.
//!
//! A [`TreeFunction`] is stored as a hash-consed DAG that mirrors the tree:
//! a node carries the value at one vertex and, unless it is constant, one
//! child node per child vertex. A node without children stands for a whole
//! sector `S(v)` on which the function is constant. Structurally identical
//! subtrees share a node, so functions such as the frequently universal
//! construction on a binary tree of depth 33 stay small.

use num::{One, Zero};
use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rational::{modulus, pow2, Bounds, Rational, Value};
use crate::tree::{Tree, TypeId, Vertex, VertexOrdering};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Node {
    value: Value,
    kids: Option<Box<[NodeId]>>,
}

/// Interning arena used to assemble [`TreeFunction`]s.
#[derive(Clone, Debug, Default)]
pub struct FunctionBuilder {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
}

impl FunctionBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from the arena of `f`, so its node ids stay valid.
    pub fn extending(f: &TreeFunction) -> Self {
        let nodes = f.nodes.to_vec();
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as NodeId))
            .collect();
        FunctionBuilder { nodes, index }
    }

    fn intern(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n.clone());
        self.index.insert(n, id);
        id
    }

    /// Node constant on its whole sector.
    pub fn constant(&mut self, value: Value) -> NodeId {
        self.intern(Node { value, kids: None })
    }

    /// Node with the given children. Collapses to a constant node when all
    /// children are constant with the same value.
    pub fn node(&mut self, value: Value, kids: Vec<NodeId>) -> NodeId {
        let collapses = kids.iter().all(|&k| {
            let n = &self.nodes[k as usize];
            n.kids.is_none() && n.value == value
        });
        if collapses {
            return self.constant(value);
        }
        self.intern(Node {
            value,
            kids: Some(kids.into_boxed_slice()),
        })
    }

    pub fn value(&self, id: NodeId) -> &Value {
        &self.nodes[id as usize].value
    }

    pub fn is_constant(&self, id: NodeId) -> bool {
        self.nodes[id as usize].kids.is_none()
    }

    pub fn kid(&self, id: NodeId, i: usize) -> NodeId {
        match &self.nodes[id as usize].kids {
            Some(k) => k[i],
            None => id,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn finish(self, root: NodeId, horizon: Option<usize>) -> TreeFunction {
        TreeFunction {
            nodes: self.nodes.into(),
            root,
            horizon,
        }
    }
}

/// How a function built from finitely many values continues below the
/// depth it was given on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    /// Constant on every sector `S(v)` with `|v|` equal to the given depth.
    SectorConstant,
    /// Undefined below the given depth.
    Undefined,
}

/// A complex-rational function on the vertices of a tree.
#[derive(Clone, Debug)]
pub struct TreeFunction {
    nodes: Arc<[Node]>,
    root: NodeId,
    horizon: Option<usize>,
}

impl TreeFunction {
    pub fn constant(value: Value) -> Self {
        let mut b = FunctionBuilder::new();
        let root = b.constant(value);
        b.finish(root, None)
    }

    /// Tabulates `f` on `B_depth`.
    pub fn from_fn(tree: &Tree, depth: usize, tail: Tail, mut f: impl FnMut(&Vertex) -> Value) -> Self {
        fn go(
            tree: &Tree,
            b: &mut FunctionBuilder,
            v: &Vertex,
            t: TypeId,
            depth: usize,
            f: &mut dyn FnMut(&Vertex) -> Value,
        ) -> NodeId {
            let value = f(v);
            if v.depth() == depth || tree.is_terminal_type(t) {
                return b.constant(value);
            }
            let kids = tree
                .child_types(t)
                .iter()
                .enumerate()
                .map(|(i, &c)| go(tree, b, &v.child(i as u32), c, depth, f))
                .collect();
            b.node(value, kids)
        }
        let mut b = FunctionBuilder::new();
        let root = go(tree, &mut b, &Vertex::root(), tree.root_type(), depth, &mut f);
        b.finish(root, horizon_for(tail, depth))
    }

    /// Builds a function from explicit values on `B_depth`.
    pub fn from_map(
        tree: &Tree,
        depth: usize,
        tail: Tail,
        values: &HashMap<Vertex, Value>,
    ) -> Result<Self> {
        if let Some(v) = tree.ball(depth).into_iter().find(|v| !values.contains_key(v)) {
            return Err(Error::MissingValue(v));
        }
        Ok(Self::from_fn(tree, depth, tail, |v| values[v].clone()))
    }

    /// Depth below which the function is undefined; `None` when it is
    /// defined everywhere.
    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    /// Same values, forgotten below `depth`.
    pub fn truncate(&self, depth: usize) -> Self {
        TreeFunction {
            horizon: Some(self.horizon.map_or(depth, |h| h.min(depth))),
            ..self.clone()
        }
    }

    pub fn root_node(&self) -> NodeId {
        self.root
    }

    pub fn node_value(&self, id: NodeId) -> &Value {
        &self.nodes[id as usize].value
    }

    pub fn is_constant_node(&self, id: NodeId) -> bool {
        self.nodes[id as usize].kids.is_none()
    }

    /// Child node `i`; a constant node is its own child.
    pub fn kid(&self, id: NodeId, i: usize) -> NodeId {
        match &self.nodes[id as usize].kids {
            Some(k) => k[i],
            None => id,
        }
    }

    /// Number of child nodes; zero for a constant node.
    pub fn arity(&self, id: NodeId) -> usize {
        self.nodes[id as usize].kids.as_ref().map_or(0, |k| k.len())
    }

    /// Number of distinct DAG nodes.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_at(&self, v: &Vertex) -> Result<NodeId> {
        if self.horizon.is_some_and(|h| v.depth() > h) {
            return Err(Error::MissingValue(v.clone()));
        }
        let mut id = self.root;
        for &i in v.path() {
            match &self.nodes[id as usize].kids {
                Some(k) => {
                    id = *k
                        .get(i as usize)
                        .ok_or_else(|| Error::VertexNotFound(v.clone()))?
                }
                None => break,
            }
        }
        Ok(id)
    }

    pub fn value(&self, v: &Vertex) -> Result<Value> {
        Ok(self.node_value(self.node_at(v)?).clone())
    }

    /// Copy of `self` with the value at `v` replaced.
    pub fn with_value(&self, tree: &Tree, v: &Vertex, value: Value) -> Result<Self> {
        tree.type_of_unbounded(v)?;
        self.node_at(v)?;
        let mut b = FunctionBuilder::extending(self);
        let mut t = tree.root_type();
        let mut chain = vec![(self.root, t)];
        for &i in v.path() {
            let (id, ty) = *chain.last().expect("non-empty");
            t = tree.child_types(ty)[i as usize];
            chain.push((b.kid(id, i as usize), t));
        }
        let (last, ty) = chain.pop().expect("non-empty");
        let mut new = if tree.is_terminal_type(ty) || b.is_constant(last) {
            let old = b.value(last).clone();
            let c = b.constant(old);
            let kids = vec![c; tree.child_types(ty).len()];
            b.node(value, kids)
        } else {
            let kids = (0..tree.child_types(ty).len()).map(|i| b.kid(last, i)).collect();
            b.node(value, kids)
        };
        for (k, &i) in v.path().iter().enumerate().rev() {
            let (id, ty) = chain[k];
            let mut kids: Vec<NodeId> =
                (0..tree.child_types(ty).len()).map(|j| b.kid(id, j)).collect();
            kids[i as usize] = new;
            let val = b.value(id).clone();
            new = b.node(val, kids);
        }
        Ok(b.finish(new, self.horizon))
    }

    /// Shallowest vertex of `B_depth` (breadth-first) where the two functions
    /// differ, if any.
    pub fn first_difference(&self, other: &TreeFunction, depth: usize) -> Option<Vertex> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(self.root, other.root, Vertex::root())]);
        while let Some((a, b, v)) = queue.pop_front() {
            if !seen.insert((a, b)) {
                continue;
            }
            if self.node_value(a) != other.node_value(b) {
                return Some(v);
            }
            if v.depth() == depth {
                continue;
            }
            let arity = match (&self.nodes[a as usize].kids, &other.nodes[b as usize].kids) {
                (None, None) => continue,
                (Some(k), _) | (None, Some(k)) => k.len(),
            };
            for i in 0..arity {
                queue.push_back((self.kid(a, i), other.kid(b, i), v.child(i as u32)));
            }
        }
        None
    }

    /// True when the two functions agree on `B_depth`.
    pub fn agrees_on(&self, other: &TreeFunction, depth: usize) -> bool {
        self.first_difference(other, depth).is_none()
    }
}

fn horizon_for(tail: Tail, depth: usize) -> Option<usize> {
    match tail {
        Tail::SectorConstant => None,
        Tail::Undefined => Some(depth),
    }
}

/// Cap on the default number of terms of [`dist_h`]. Terms past it change
/// the sum by less than `2^{-4096}`.
pub const DIST_H_TERMS_CAP: usize = 4096;

/// Truncated value of the pointwise-convergence metric.
#[derive(Clone, Debug, PartialEq)]
pub struct DistH {
    /// Enclosure of `Σ_{j ≤ J} 2^{-j} |f−g|(x_j) / (1 + |f−g|(x_j))`.
    pub value: Bounds,
    pub terms: usize,
    /// Upper bound `2^{-J}` on the omitted tail.
    pub truncation_error: Rational,
}

impl DistH {
    /// Upper bound on the full, untruncated metric.
    pub fn upper(&self) -> Rational {
        &self.value.upper + &self.truncation_error
    }
}

/// The metric `Σ_j 2^{-j} |f−g|(x_j) / (1 + |f−g|(x_j))` over the
/// breadth-first enumeration of `B_D`, truncated after `terms` vertices
/// (default: `|B_D|`, capped at [`DIST_H_TERMS_CAP`]).
pub fn dist_h(tree: &Tree, f: &TreeFunction, g: &TreeFunction, terms: Option<usize>) -> Result<DistH> {
    let ord = VertexOrdering::new(tree);
    let available = ord.len();
    let cap = num::BigUint::from(terms.unwrap_or(DIST_H_TERMS_CAP));
    let j_max: usize = num::ToPrimitive::to_usize(&available.min(cap)).expect("fits in usize");
    let mut total = Bounds::zero();
    let mut weight = Rational::one();
    for x in ord.iter().take(j_max) {
        weight /= Rational::from_integer(2.into());
        let d = f.value(&x)? - g.value(&x)?;
        if d.is_zero() {
            continue;
        }
        total += &modulus(&d).saturate().scale(&weight);
    }
    Ok(DistH {
        value: total,
        terms: j_max,
        truncation_error: pow2(-(j_max as i64)),
    })
}

/// A function on the boundary that is constant on every arc `I(v)` of the
/// generating front of `A_n` (the arcs of `C_n` plus the leaves above it).
///
/// The underlying DAG is constant on every sector rooted at depth `n`;
/// values it stores above `n` are placeholders except at terminal leaves.
#[derive(Clone, Debug)]
pub struct BoundaryFunction {
    generation: usize,
    func: TreeFunction,
}

impl BoundaryFunction {
    pub fn constant(value: Value, generation: usize) -> Self {
        BoundaryFunction {
            generation,
            func: TreeFunction::constant(value),
        }
    }

    /// Tabulates `f` on the generating front of `A_n`.
    pub fn from_fn(tree: &Tree, generation: usize, mut f: impl FnMut(&Vertex) -> Value) -> Self {
        let func = TreeFunction::from_fn(tree, generation, Tail::SectorConstant, |v| {
            if v.depth() == generation || tree.is_terminal(v).unwrap_or(false) {
                f(v)
            } else {
                Value::zero()
            }
        });
        BoundaryFunction { generation, func }
    }

    pub fn from_map(tree: &Tree, generation: usize, values: &HashMap<Vertex, Value>) -> Result<Self> {
        if let Some(v) = tree.front(generation).into_iter().find(|v| !values.contains_key(v)) {
            return Err(Error::MissingValue(v));
        }
        Ok(Self::from_fn(tree, generation, |v| values[v].clone()))
    }

    /// Wraps a DAG that is already constant on the sectors of depth
    /// `generation`.
    pub(crate) fn from_parts(func: TreeFunction, generation: usize) -> Self {
        BoundaryFunction { generation, func }
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn function(&self) -> &TreeFunction {
        &self.func
    }

    /// Value on the arc through `v`; `v` must be at depth at least `n` or a
    /// leaf.
    pub fn value(&self, v: &Vertex) -> Result<Value> {
        self.func.value(&v.ancestor_at(self.generation))
    }

    /// `(v, f|_{I(v)})` over the generating front, in boundary order.
    pub fn values(&self, tree: &Tree) -> Result<Vec<(Vertex, Value)>> {
        tree.front(self.generation)
            .into_iter()
            .map(|v| {
                let x = self.value(&v)?;
                Ok((v, x))
            })
            .collect()
    }

    /// The same function viewed as `A_m`-measurable, `m ≥ n`.
    pub fn refine(&self, generation: usize) -> Result<Self> {
        if generation < self.generation {
            return Err(Error::GenerationOutOfRange {
                requested: generation,
                max: self.generation,
            });
        }
        Ok(BoundaryFunction {
            generation,
            func: self.func.clone(),
        })
    }

    /// Front vertex, at the common generation, of an arc where the two
    /// functions differ. Only values at that generation and at leaves above
    /// it are compared; placeholders are ignored.
    pub fn first_difference(&self, tree: &Tree, other: &BoundaryFunction) -> Option<Vertex> {
        let n = self.generation.max(other.generation);
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(self.func.root, other.func.root, tree.root_type(), Vertex::root())]);
        while let Some((a, b, t, v)) = queue.pop_front() {
            let settled = self.func.is_constant_node(a) && other.func.is_constant_node(b);
            if !seen.insert((a, b, t, settled || v.depth() == n)) {
                continue;
            }
            if settled || v.depth() == n || tree.is_terminal_type(t) {
                if self.func.node_value(a) != other.func.node_value(b) {
                    return Some(match tree.is_terminal_type(t) {
                        true => v,
                        false => leftmost_descendant(tree, v, t, n),
                    });
                }
                continue;
            }
            for (i, &c) in tree.child_types(t).iter().enumerate() {
                queue.push_back((self.func.kid(a, i), other.func.kid(b, i), c, v.child(i as u32)));
            }
        }
        None
    }

    pub fn same_as(&self, tree: &Tree, other: &BoundaryFunction) -> bool {
        self.first_difference(tree, other).is_none()
    }
}

/// First front vertex of generation `n` below `v` along firstborn children.
fn leftmost_descendant(tree: &Tree, mut v: Vertex, mut t: TypeId, n: usize) -> Vertex {
    while v.depth() < n && !tree.is_terminal_type(t) {
        v = v.child(0);
        t = tree.child_types(t)[0];
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat, real, value};

    #[test]
    fn constant_children_collapse() {
        let mut b = FunctionBuilder::new();
        let c = b.constant(value(3, 1));
        let n = b.node(value(3, 1), vec![c, c]);
        assert_eq!(n, c);
        let d = b.constant(value(1, 1));
        let m = b.node(value(3, 1), vec![c, d]);
        assert_ne!(m, c);
        assert_eq!(b.node(value(3, 1), vec![c, d]), m);
    }

    #[test]
    fn binary_depth_function_is_small() {
        let t = Tree::binary(12);
        let f = TreeFunction::from_fn(&t, 12, Tail::SectorConstant, |v| value(v.depth() as i64, 1));
        assert_eq!(f.size(), 13);
        let deep = Vertex::from_path(vec![1; 40]);
        assert_eq!(f.value(&deep).unwrap(), value(12, 1));
        let g = f.truncate(12);
        assert!(matches!(g.value(&deep), Err(Error::MissingValue(_))));
    }

    #[test]
    fn dist_h_examples() {
        let t = Tree::binary(3);
        let zero = TreeFunction::constant(value(0, 1));
        let one = TreeFunction::constant(value(1, 1));
        assert_eq!(dist_h(&t, &zero, &zero, None).unwrap().value, Bounds::zero());

        let spike = TreeFunction::from_fn(&t, 3, Tail::SectorConstant, |v| {
            if v.is_root() { value(1, 1) } else { value(0, 1) }
        });
        let d = dist_h(&t, &spike, &zero, None).unwrap();
        assert_eq!(d.value, Bounds::exact(rat(1, 4)));

        let d = dist_h(&t, &one, &zero, None).unwrap();
        assert_eq!(d.terms, 15);
        assert_eq!(&d.value.lower + &d.truncation_error / int(2), rat(1, 2));
    }

    #[test]
    fn with_value_changes_one_vertex() {
        let t = Tree::binary(4);
        let f = TreeFunction::constant(value(0, 1));
        let v = Vertex::from_path(vec![1, 0]);
        let g = f.with_value(&t, &v, value(5, 1)).unwrap();
        assert_eq!(g.value(&v).unwrap(), value(5, 1));
        assert_eq!(g.value(&v.child(0)).unwrap(), value(0, 1));
        assert_eq!(f.first_difference(&g, 4), Some(v));
        assert!(f.agrees_on(&g, 1));
    }

    #[test]
    fn boundary_functions_compare_on_arcs() {
        let t = Tree::binary(4);
        let a = BoundaryFunction::from_fn(&t, 2, |v| real(int(v.path()[0] as i64)));
        let b = a.refine(3).unwrap();
        assert!(a.same_as(&t, &b));
        let c = BoundaryFunction::from_fn(&t, 3, |v| real(int(v.path()[1] as i64)));
        assert!(!a.same_as(&t, &c));
        assert_eq!(a.first_difference(&t, &c), Some(Vertex::from_path(vec![1, 0, 0])));
    }
}
