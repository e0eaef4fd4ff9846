//! Decay chains: vertices below `u` at which the measure at least halves.

use num::{Signed, Zero};
use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::operator::TransitionOperator;
use crate::rational::{rat, Rational};
use crate::tree::{TypeId, Vertex};

/// A chain `u = u_0 < u_1 < … < u_k` below `u`, together with the path
/// (relative to `u`) from `u` to `u_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecayChain {
    pub vertices: Vec<Vertex>,
    pub path: Vec<u32>,
}

impl DecayChain {
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn endpoint(&self) -> &Vertex {
        self.vertices.last().expect("chain contains u")
    }
}

/// An edge into the `i`-th child of a vertex of type `t` qualifies when
/// that vertex has at least two children and `0 < q ≤ 1/2`.
pub(crate) fn qualifies(row: &[Rational], i: usize) -> bool {
    row.len() >= 2 && row[i].is_positive() && row[i] <= rat(1, 2)
}

/// Shallowest chain of length `k` below a vertex of type `t` at depth `d0`,
/// searched breadth-first over edges of positive probability. Returns the
/// relative path to `u_k` and the relative depths of `u_1, …, u_k`.
pub(crate) fn chain_from_type(
    q: &TransitionOperator,
    t: TypeId,
    at_root: bool,
    k: usize,
    depth_limit: usize,
) -> Option<(Vec<u32>, Vec<usize>)> {
    let tree = q.tree();
    struct State {
        parent: usize,
        index: u32,
        ty: TypeId,
        count: usize,
        depth: usize,
    }
    let mut arena = vec![State {
        parent: usize::MAX,
        index: 0,
        ty: t,
        count: 0,
        depth: 0,
    }];
    let mut seen = HashSet::from([(t, 0usize)]);
    let mut queue = VecDeque::from([0usize]);
    let mut goal = if k == 0 { Some(0) } else { None };
    while let (None, Some(s)) = (goal, queue.pop_front()) {
        let (ty, count, depth) = (arena[s].ty, arena[s].count, arena[s].depth);
        if depth == depth_limit || tree.is_terminal_type(ty) {
            continue;
        }
        let row = q.children_of(ty, at_root && s == 0);
        for (i, &c) in tree.child_types(ty).iter().enumerate() {
            if row[i].is_zero() {
                continue;
            }
            let count = count + usize::from(qualifies(row, i));
            if !seen.insert((c, count)) {
                continue;
            }
            arena.push(State {
                parent: s,
                index: i as u32,
                ty: c,
                count,
                depth: depth + 1,
            });
            let id = arena.len() - 1;
            if count == k {
                goal = Some(id);
                break;
            }
            queue.push_back(id);
        }
    }
    let mut s = goal?;
    let mut path = Vec::new();
    let mut marks = Vec::new();
    while s != 0 {
        let st = &arena[s];
        if arena[st.parent].count < st.count {
            marks.push(st.depth);
        }
        path.push(st.index);
        s = st.parent;
    }
    path.reverse();
    marks.reverse();
    Some((path, marks))
}

/// Finds `u < u_1 < … < u_k` inside `B_D` with `q(u_i^−, u_i) ≤ 1/2` at
/// fathers having at least two children, so that the measure of `I(u_k)`
/// is at most `2^{−k}` times that of `I(u)`.
pub fn find_decay_chain(q: &TransitionOperator, u: &Vertex, k: usize) -> Result<DecayChain> {
    let tree = q.tree();
    let t = tree.type_of(u)?;
    let limit = tree.depth() - u.depth();
    let (path, marks) = chain_from_type(q, t, u.is_root(), k, limit).ok_or_else(|| Error::NoChainWithinDepth {
        from: u.clone(),
        length: k,
        depth_limit: tree.depth(),
    })?;
    let mut vertices = vec![u.clone()];
    for m in marks {
        let mut p = u.path().to_vec();
        p.extend_from_slice(&path[..m]);
        vertices.push(Vertex::from_path(p));
    }
    Ok(DecayChain { vertices, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;
    use crate::tree::Tree;
    use std::sync::Arc;

    #[test]
    fn binary_chain_is_the_firstborn_line() {
        let t = Arc::new(Tree::binary(10));
        let q = TransitionOperator::uniform_forward(t);
        let c = find_decay_chain(&q, &Vertex::from_path(vec![1]), 3).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.endpoint(), &Vertex::from_path(vec![1, 0, 0, 0]));
        assert_eq!(c.vertices[1], Vertex::from_path(vec![1, 0]));
    }

    #[test]
    fn heavy_edges_are_skipped() {
        // a → [a, b] with (3/4, 1/4); b → [a, b] with (1, 0) would never
        // decay, so the chain must use the light edge.
        let t = Arc::new(Tree::automaton(&[("a", &["a", "b"]), ("b", &["a", "b"])], "a", 8).unwrap());
        let rows = vec![vec![rat(3, 4), rat(1, 4)], vec![int(1), int(0)]];
        let q = TransitionOperator::forward_only(t, rows).unwrap();
        let c = find_decay_chain(&q, &Vertex::root(), 2).unwrap();
        assert_eq!(c.endpoint(), &Vertex::from_path(vec![1, 0, 1]));
    }

    #[test]
    fn rays_have_no_chain() {
        let t = Arc::new(Tree::automaton(&[("r", &["r"])], "r", 12).unwrap());
        let q = TransitionOperator::uniform_forward(t);
        assert!(matches!(
            find_decay_chain(&q, &Vertex::root(), 1),
            Err(Error::NoChainWithinDepth { .. })
        ));
    }
}
