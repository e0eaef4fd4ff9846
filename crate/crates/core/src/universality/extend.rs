//! Harmonic extension of a function from `B_N` to a deeper ball so that its
//! lift lands close to a prescribed target.

use num::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::function::{dist_h, FunctionBuilder, NodeId, TreeFunction};
use crate::measure::{dagger_node, dist_nu, lift, ArcMeasure, Averager};
use crate::operator::{check_harmonic, Region, TransitionOperator};
use crate::rational::{floor_log2, pow2, Bounds, Rational, Value};
use crate::tree::TypeId;

use super::chain::chain_from_type;
use super::targets::{Target, TargetFamily};

/// Generations at which an extension is allowed to end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generations {
    All,
    Only(BTreeSet<usize>),
}

impl Generations {
    fn at_least(&self, m: usize) -> Option<usize> {
        match self {
            Generations::All => Some(m),
            Generations::Only(set) => set.range(m..).next().copied(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Extension {
    /// Harmonic everywhere, equal to the input on `B_N`, constant on the
    /// sectors of depth `generation`.
    pub function: TreeFunction,
    pub start_generation: usize,
    pub generation: usize,
    pub chain_length: usize,
    /// `dist_ν(h*_generation, target)`.
    pub dist: Bounds,
}

fn check_pair(q: &TransitionOperator, m: &ArcMeasure) -> Result<()> {
    if !q.is_forward_only() || q.tree() != m.tree() {
        return Err(Error::MeasureMismatch);
    }
    let tree = q.tree();
    for t in tree.reachable_types() {
        if !tree.is_terminal_type(t) && q.children_of(t, false) != m.split(t) {
            return Err(Error::MeasureMismatch);
        }
    }
    if !tree.is_terminal_type(tree.root_type()) && q.root_row() != m.split(tree.root_type()) {
        return Err(Error::MeasureMismatch);
    }
    Ok(())
}

/// Extends `g` from `B_n` with `dist_ν(h*_M, target) < 1/2^k`,
/// `k = ⌊log₂ s⌋ + 1`, at the first allowed generation `M`.
pub fn extend_matching(
    q: &TransitionOperator,
    m: &ArcMeasure,
    g: &TreeFunction,
    n: usize,
    target: &Target,
    s: u64,
) -> Result<Extension> {
    extend_matching_in(q, m, g, n, target, s, &Generations::All)
}

/// [`extend_matching`] ending at the smallest element of `allowed` that
/// fits the decay chains and the target's generation.
pub fn extend_matching_in(
    q: &TransitionOperator,
    m: &ArcMeasure,
    g: &TreeFunction,
    n: usize,
    target: &Target,
    s: u64,
    allowed: &Generations,
) -> Result<Extension> {
    if s == 0 {
        return Err(Error::Malformed("the radius parameter s must be at least 1".into()));
    }
    check_pair(q, m)?;
    let tree = q.tree().clone();
    let depth = tree.depth();
    if n > depth {
        return Err(Error::DepthBudgetExceeded { needed: n, available: depth });
    }
    if let Some(hz) = g.horizon() {
        if hz < n {
            return Err(Error::GenerationOutOfRange { requested: n, max: hz });
        }
    }
    if n > 0 {
        let report = check_harmonic(q, g, &Region::Ball(n - 1))?;
        if !report.exact {
            return Err(Error::NotHarmonic(report.worst.expect("a residual was recorded")));
        }
    }
    let k = floor_log2(s) as usize + 1;

    // Decay chain per cone type on C_n, then extend each endpoint along the
    // first child of positive mass down to the common generation.
    let reps = tree.level_representatives(n);
    let mut chains: BTreeMap<TypeId, Vec<u32>> = BTreeMap::new();
    let mut out = n + 1;
    for (&t, u) in &reps {
        if tree.is_terminal_type(t) {
            continue;
        }
        let (path, _) = chain_from_type(q, t, n == 0, k, depth - n).ok_or_else(|| Error::NoChainWithinDepth {
            from: u.clone(),
            length: k,
            depth_limit: depth,
        })?;
        out = out.max(n + path.len());
        chains.insert(t, path);
    }
    out = out.max(target.generation());
    let generation = allowed.at_least(out).ok_or(Error::DepthBudgetExceeded {
        needed: out,
        available: match allowed {
            Generations::Only(set) => set.iter().next_back().copied().unwrap_or(0),
            Generations::All => depth,
        },
    })?;
    if generation > depth {
        return Err(Error::DepthBudgetExceeded { needed: generation, available: depth });
    }
    for (&t, path) in chains.iter_mut() {
        let mut ty = t;
        for &i in path.iter() {
            ty = tree.child_types(ty)[i as usize];
        }
        while n + path.len() < generation && !tree.is_terminal_type(ty) {
            let row = q.children_of(ty, n + path.len() == 0);
            let i = row.iter().position(|r| r.is_positive()).expect("stochastic row");
            path.push(i as u32);
            ty = tree.child_types(ty)[i];
        }
    }

    let mut b = FunctionBuilder::new();
    let mut builder = Builder {
        m,
        g,
        target: target.function.function(),
        avg: Averager::new(m, &target.function),
        b: &mut b,
        n,
        chains: &chains,
        dagger_memo: HashMap::new(),
        above_memo: HashMap::new(),
        sector_memo: HashMap::new(),
    };
    let root = builder.above(g.root_node(), target.function.function().root_node(), tree.root_type(), 0)?;
    let h = b.finish(root, None);

    let report = check_harmonic(q, &h, &Region::Everywhere)?;
    if !report.exact {
        return Err(Error::NotHarmonic(report.worst.expect("a residual was recorded")));
    }
    let dist = dist_nu(m, &lift(&h, generation)?, &target.function);
    Ok(Extension {
        function: h,
        start_generation: n,
        generation,
        chain_length: k,
        dist,
    })
}

struct Builder<'a, 'b> {
    m: &'a ArcMeasure,
    g: &'a TreeFunction,
    target: &'a TreeFunction,
    avg: Averager<'a>,
    b: &'b mut FunctionBuilder,
    n: usize,
    chains: &'a BTreeMap<TypeId, Vec<u32>>,
    dagger_memo: HashMap<(NodeId, TypeId, usize), NodeId>,
    above_memo: HashMap<(NodeId, NodeId, TypeId, usize), NodeId>,
    sector_memo: HashMap<(Value, TypeId, NodeId), NodeId>,
}

impl Builder<'_, '_> {
    /// Copies `g` on `B_n`, tracking the target's node alongside.
    fn above(&mut self, gn: NodeId, fnode: NodeId, t: TypeId, d: usize) -> Result<NodeId> {
        let key = (gn, fnode, t, d);
        if let Some(&id) = self.above_memo.get(&key) {
            return Ok(id);
        }
        let value = self.g.node_value(gn).clone();
        let tree = self.m.tree().clone();
        let id = if d == self.n {
            self.sector(value, t, fnode)?
        } else if tree.is_terminal_type(t) {
            self.b.constant(value)
        } else {
            let mut kids = Vec::new();
            for (i, &c) in tree.child_types(t).iter().enumerate() {
                kids.push(self.above(self.g.kid(gn, i), self.target.kid(fnode, i), c, d + 1)?);
            }
            self.b.node(value, kids)
        };
        self.above_memo.insert(key, id);
        Ok(id)
    }

    fn dagger(&mut self, fnode: NodeId, t: TypeId, d: usize) -> NodeId {
        dagger_node(&mut self.avg, self.b, &mut self.dagger_memo, fnode, t, d)
    }

    /// The sector below a vertex `u ∈ C_n` of type `t` with `h(u) = gu`:
    /// the projection of the target, except on the endpoint arc `I(e)`,
    /// where the value is chosen so that `π_n` of the result equals `gu`.
    fn sector(&mut self, gu: Value, t: TypeId, fnode: NodeId) -> Result<NodeId> {
        let key = (gu.clone(), t, fnode);
        if let Some(&id) = self.sector_memo.get(&key) {
            return Ok(id);
        }
        let tree = self.m.tree().clone();
        let Some(path) = self.chains.get(&t) else {
            return Ok(self.b.constant(gu));
        };
        // Types, target nodes and averages along u = w_0, …, w_L = e.
        let mut types = vec![t];
        let mut nodes = vec![fnode];
        for &i in path {
            let (ty, nd) = (*types.last().unwrap(), *nodes.last().unwrap());
            types.push(tree.child_types(ty)[i as usize]);
            nodes.push(self.target.kid(nd, i as usize));
        }
        let len = path.len();
        let avgs: Vec<Value> = (0..=len).map(|i| self.avg.average(nodes[i], types[i], self.n + i)).collect();
        // rho[i] = mass(e) / mass(w_i).
        let mut rho = vec![Rational::zero(); len + 1];
        rho[len] = Rational::from_integer(1.into());
        for i in (0..len).rev() {
            rho[i] = &rho[i + 1] * self.m.ratio(types[i], path[i] as usize);
        }
        if rho[0].is_zero() {
            return Err(Error::ZeroMassArc(crate::tree::Vertex::from_path(path.clone())));
        }
        let fe = avgs[len].clone();
        let c = &fe + (&gu - &avgs[0]) / &rho[0];
        let shift = &c - &fe;
        let mut node = self.b.constant(c);
        for i in (0..len).rev() {
            let kids = (0..tree.child_types(types[i]).len())
                .map(|j| {
                    if j == path[i] as usize {
                        node
                    } else {
                        let ct = tree.child_types(types[i])[j];
                        let kn = self.target.kid(nodes[i], j);
                        self.dagger(kn, ct, self.n + i + 1)
                    }
                })
                .collect();
            node = self.b.node(&avgs[i] + &shift * &rho[i], kids);
        }
        debug_assert_eq!(*self.b.value(node), gu);
        self.sector_memo.insert(key, node);
        Ok(node)
    }
}

/// One visit of an approximant: the generation at which target `index`
/// was matched and the distance achieved.
#[derive(Clone, Debug)]
pub struct Visit {
    pub target: Target,
    pub generation: usize,
    pub dist: Bounds,
}

#[derive(Clone, Debug)]
pub struct Approximant {
    pub function: TreeFunction,
    /// Generation from which `h` departs from `g`.
    pub start_generation: usize,
    /// Certified `dist_H(h, g)` upper bound.
    pub dist_h_bound: Rational,
    pub visits: Vec<Visit>,
}

/// `h` with `dist_H(h, g) < tol` whose lifts visit the balls of radius
/// `< 1/s` around `f_1, …, f_count`, in order.
#[allow(clippy::too_many_arguments)]
pub fn universal_approximant(
    q: &TransitionOperator,
    m: &ArcMeasure,
    g: &TreeFunction,
    n: usize,
    tol: &Rational,
    targets: &TargetFamily,
    count: u64,
    s: u64,
) -> Result<Approximant> {
    if !tol.is_positive() {
        return Err(Error::Malformed("tolerance must be positive".into()));
    }
    let tree = q.tree().clone();
    // h = g on B_N gives dist_H(h, g) ≤ 2^{−|B_N|}.
    let mut start = n;
    let small = |k: usize| {
        let size = tree.ball_size(k);
        size.bits() > 64 || pow2(-(num::ToPrimitive::to_i64(&size).unwrap())) < *tol
    };
    while !small(start) {
        start += 1;
        if start > tree.depth() {
            return Err(Error::DepthBudgetExceeded { needed: start, available: tree.depth() });
        }
    }
    let mut h = g.clone();
    let mut gen = start;
    let mut visits = Vec::new();
    for j in 1..=count {
        let target = targets.get_index(j)?;
        let ext = extend_matching(q, m, &h, gen, &target, s)?;
        visits.push(Visit {
            target,
            generation: ext.generation,
            dist: ext.dist,
        });
        h = ext.function;
        gen = ext.generation;
    }
    let terms = num::ToPrimitive::to_usize(&tree.ball_size(start)).filter(|&t| t <= 4096).unwrap_or(4096);
    let d = dist_h(&tree, &h, g, Some(terms))?;
    Ok(Approximant {
        function: h,
        start_generation: start,
        dist_h_bound: d.upper(),
        visits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::BoundaryFunction;
    use crate::measure::arc_measure_from_q;
    use crate::rational::{int, rat, value};
    use crate::tree::{Tree, Vertex};
    use num::BigUint;
    use std::sync::Arc;

    fn indicator_target(tree: &Tree, n: usize, path: &[u32]) -> Target {
        let at = Vertex::from_path(path.to_vec());
        Target {
            index: BigUint::from(1u8),
            function: BoundaryFunction::from_fn(tree, n, |v| if at.is_ancestor_of(v) { value(1, 1) } else { value(0, 1) }),
        }
    }

    #[test]
    fn binary_extension_matches_target() {
        let tree = Arc::new(Tree::binary(14));
        let q = TransitionOperator::uniform_forward(tree.clone());
        let m = arc_measure_from_q(&q).unwrap();
        let g = TreeFunction::constant(value(3, 1));
        let target = indicator_target(&tree, 3, &[1, 0]);
        let ext = extend_matching(&q, &m, &g, 2, &target, 4).unwrap();
        assert_eq!(ext.chain_length, 3);
        assert_eq!(ext.generation, 5);
        assert!(ext.function.agrees_on(&g, 2));
        assert!(ext.dist.upper < rat(1, 8));
        // Each sector u ∈ C_2 is corrected on I(u/0/0/0), of mass 2^-5 and
        // relative mass 1/8: c = f(e) + 8 (3 − avg_u f), so |c − f(e)| is 24
        // off the indicator and 16 on o/1/0.
        let phi = |x: i64| rat(x, x + 1);
        let expected = (phi(24) * int(3) + phi(16)) * rat(1, 32);
        assert_eq!(ext.dist.value(), Some(&expected));
    }

    #[test]
    fn skewed_measure_uses_light_edges() {
        let tree = Arc::new(Tree::automaton(&[("a", &["a", "b"]), ("b", &["a", "b"])], "a", 16).unwrap());
        let rows = vec![vec![rat(3, 4), rat(1, 4)], vec![rat(1, 3), rat(2, 3)]];
        let q = TransitionOperator::forward_only(tree.clone(), rows).unwrap();
        let m = arc_measure_from_q(&q).unwrap();
        let g = TreeFunction::from_fn(&tree, 1, crate::function::Tail::SectorConstant, |v| {
            if v.is_root() {
                value(3, 4)
            } else if v.path()[0] == 0 {
                value(1, 1)
            } else {
                value(0, 1)
            }
        });
        let target = indicator_target(&tree, 2, &[0, 1]);
        for s in [1, 2, 7, 64] {
            let ext = extend_matching(&q, &m, &g, 1, &target, s).unwrap();
            assert!(ext.function.agrees_on(&g, 1));
            assert!(ext.dist.upper < pow2(-(ext.chain_length as i64)), "s = {s}");
            let report = check_harmonic(&q, &ext.function, &Region::Everywhere).unwrap();
            assert!(report.exact);
        }
    }

    #[test]
    fn non_harmonic_input_is_rejected() {
        let tree = Arc::new(Tree::binary(8));
        let q = TransitionOperator::uniform_forward(tree.clone());
        let m = arc_measure_from_q(&q).unwrap();
        let g = TreeFunction::from_fn(&tree, 1, crate::function::Tail::SectorConstant, |v| value(v.depth() as i64, 1));
        let target = indicator_target(&tree, 1, &[0]);
        assert!(matches!(extend_matching(&q, &m, &g, 1, &target, 1), Err(Error::NotHarmonic(_))));
    }

    #[test]
    fn degenerate_operator_has_no_chain() {
        let tree = Arc::new(Tree::automaton(&[("r", &["r", "o"]), ("o", &["o", "o"])], "r", 20).unwrap());
        let rows = vec![vec![int(1), int(0)], vec![int(1), int(0)]];
        let q = TransitionOperator::forward_only(tree.clone(), rows).unwrap();
        let m = arc_measure_from_q(&q).unwrap();
        let target = indicator_target(&tree, 0, &[]);
        let g = TreeFunction::constant(value(0, 1));
        assert!(matches!(
            extend_matching(&q, &m, &g, 0, &target, 1),
            Err(Error::NoChainWithinDepth { .. })
        ));
    }

    #[test]
    fn approximant_stays_close_and_visits() {
        let tree = Arc::new(Tree::binary(24));
        let q = TransitionOperator::uniform_forward(tree.clone());
        let m = arc_measure_from_q(&q).unwrap();
        let targets = TargetFamily::grid(tree.clone(), 24);
        let g = TreeFunction::constant(value(2, 1));
        let a = universal_approximant(&q, &m, &g, 1, &rat(1, 100), &targets, 4, 3).unwrap();
        assert!(a.dist_h_bound < rat(1, 100));
        assert_eq!(a.visits.len(), 4);
        assert!(a.visits.iter().all(|v| v.dist.upper < rat(1, 3)));
    }
}
