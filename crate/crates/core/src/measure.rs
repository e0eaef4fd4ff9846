//! Measures on the boundary, the projections `π_n`, lifting and projection
//! between boundary functions and tree functions, and the metric of
//! convergence in measure.

use num::{One, Signed, Zero};
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::{BoundaryFunction, FunctionBuilder, NodeId, TreeFunction};
use crate::operator::TransitionOperator;
use crate::rational::{from_f64, modulus, rat, to_f64, Bounds, Rational, Value};
use crate::tree::{Tree, TreeKind, TypeId, Vertex};

/// A probability measure on the boundary, given on arcs `I(v)`.
///
/// Stored as per-type split ratios `mass(I(w)) / mass(I(v))` for each child
/// `w` of `v`, so that `mass(v)` is the product of ratios along `[o, v]` and
/// additivity holds by construction whenever each row sums to one. Measures
/// whose ratios depend on the whole path live on an explicit expansion of
/// the tree, where every vertex is its own type.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcMeasure {
    tree: Arc<Tree>,
    split: Vec<Vec<Rational>>,
}

impl ArcMeasure {
    /// Checks that every non-terminal row is a probability vector.
    pub fn new(tree: Arc<Tree>, split: Vec<Vec<Rational>>) -> Result<Self> {
        let m = Self::unchecked(tree, split)?;
        for t in 0..m.tree.num_types() {
            if m.tree.is_terminal_type(t) {
                continue;
            }
            let sum: Rational = m.split[t].iter().sum();
            if !sum.is_one() {
                return Err(Error::NotStochastic {
                    at: m.tree.type_name(t).to_string(),
                    sum: sum.to_string(),
                });
            }
        }
        Ok(m)
    }

    fn unchecked(tree: Arc<Tree>, split: Vec<Vec<Rational>>) -> Result<Self> {
        if split.len() != tree.num_types() {
            return Err(Error::Malformed("one split row per cone type expected".into()));
        }
        for (t, row) in split.iter().enumerate() {
            if row.len() != tree.child_types(t).len() {
                return Err(Error::Malformed(format!(
                    "split row of {} has the wrong length",
                    tree.type_name(t)
                )));
            }
            if row.iter().any(Signed::is_negative) {
                return Err(Error::InvalidCoefficient(format!(
                    "negative mass ratio at {}",
                    tree.type_name(t)
                )));
            }
        }
        Ok(ArcMeasure { tree, split })
    }

    /// Equal split among children at every vertex.
    pub fn uniform(tree: Arc<Tree>) -> Self {
        let split = (0..tree.num_types())
            .map(|t| {
                let d = tree.child_types(t).len() as i64;
                vec![rat(1, d.max(1)); d as usize]
            })
            .collect();
        ArcMeasure { tree, split }
    }

    /// Builds a measure from arc masses on `B_D`. On an automaton tree the
    /// result lives on its explicit expansion to depth `D`.
    pub fn from_masses(tree: &Tree, masses: &HashMap<Vertex, Rational>) -> Result<Self> {
        let base = explicit_version(tree);
        let get = |v: &Vertex| masses.get(v).ok_or_else(|| Error::MissingValue(v.clone()));
        let root = get(&Vertex::root())?;
        if !root.is_one() {
            return Err(Error::NotStochastic {
                at: Vertex::root().to_string(),
                sum: root.to_string(),
            });
        }
        let mut split = vec![Vec::new(); base.num_types()];
        for v in base.ball(base.depth()) {
            let t = base.type_of(&v)?;
            let mv = get(&v)?;
            if mv.is_negative() {
                return Err(Error::InvalidCoefficient(format!("negative mass at {v}")));
            }
            let kids = base.children(&v)?;
            if kids.is_empty() {
                continue;
            }
            let km = kids.iter().map(get).collect::<Result<Vec<_>>>()?;
            let sum: Rational = km.iter().copied().sum();
            if &sum != mv {
                return Err(Error::NotStochastic {
                    at: v.to_string(),
                    sum: format!("{sum} (expected {mv})"),
                });
            }
            split[t] = if mv.is_zero() {
                vec![rat(1, kids.len() as i64); kids.len()]
            } else {
                km.into_iter().map(|w| w / mv).collect()
            };
        }
        Self::new(Arc::new(base), split)
    }

    /// Measure from binary64 arc masses, converted exactly. Additivity then
    /// holds up to the rounding already present in the input; see
    /// [`ArcMeasure::additivity_defect`].
    pub fn from_float_masses(tree: &Tree, masses: &HashMap<Vertex, f64>) -> Result<Self> {
        let base = explicit_version(tree);
        let mut split = vec![Vec::new(); base.num_types()];
        for v in base.ball(base.depth()) {
            let t = base.type_of(&v)?;
            let kids = base.children(&v)?;
            if kids.is_empty() {
                continue;
            }
            let get = |w: &Vertex| masses.get(w).copied().ok_or_else(|| Error::MissingValue(w.clone()));
            let mv = from_f64(get(&v)?);
            split[t] = if mv.is_zero() {
                vec![rat(1, kids.len() as i64); kids.len()]
            } else {
                kids.iter()
                    .map(|w| Ok(from_f64(get(w)?) / &mv))
                    .collect::<Result<Vec<_>>>()?
            };
        }
        Self::unchecked(Arc::new(base), split)
    }

    pub fn tree(&self) -> &Arc<Tree> {
        &self.tree
    }

    /// `mass(I(w)) / mass(I(v))` for the `i`-th child `w` of a vertex of
    /// type `t`.
    pub fn ratio(&self, t: TypeId, i: usize) -> &Rational {
        &self.split[t][i]
    }

    pub fn split(&self, t: TypeId) -> &[Rational] {
        &self.split[t]
    }

    pub fn mass(&self, v: &Vertex) -> Result<Rational> {
        let mut t = self.tree.root_type();
        let mut m = Rational::one();
        for &i in v.path() {
            let i = i as usize;
            if i >= self.tree.child_types(t).len() {
                return Err(Error::VertexNotFound(v.clone()));
            }
            m *= &self.split[t][i];
            t = self.tree.child_types(t)[i];
        }
        Ok(m)
    }

    /// Masses of all arcs in `B_depth`, breadth-first.
    pub fn masses(&self, depth: usize) -> Vec<(Vertex, Rational)> {
        let mut out = vec![(Vertex::root(), Rational::one())];
        let mut level = vec![(Vertex::root(), self.tree.root_type(), Rational::one())];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (v, t, m) in &level {
                for (i, &c) in self.tree.child_types(*t).iter().enumerate() {
                    let w = v.child(i as u32);
                    let mw = m * &self.split[*t][i];
                    out.push((w.clone(), mw.clone()));
                    next.push((w, c, mw));
                }
            }
            level = next;
        }
        out
    }

    /// Shallowest arc of zero mass within `B_depth`, if any.
    pub fn first_zero_mass(&self, depth: usize) -> Option<Vertex> {
        let mut level: Vec<(TypeId, Vertex)> = vec![(self.tree.root_type(), Vertex::root())];
        for _ in 0..depth {
            let mut next: Vec<(TypeId, Vertex)> = Vec::new();
            for (t, v) in &level {
                for (i, &c) in self.tree.child_types(*t).iter().enumerate() {
                    if self.split[*t][i].is_zero() {
                        return Some(v.child(i as u32));
                    }
                    if !next.iter().any(|(u, _)| *u == c) {
                        next.push((c, v.child(i as u32)));
                    }
                }
            }
            level = next;
        }
        None
    }

    fn require_positive(&self, depth: usize) -> Result<()> {
        match self.first_zero_mass(depth) {
            Some(v) => Err(Error::ZeroMassArc(v)),
            None => Ok(()),
        }
    }

    /// Largest `|mass(v) − Σ_w mass(w)|` over non-leaf `v` with `|v| < depth`.
    pub fn additivity_defect(&self, depth: usize) -> f64 {
        self.masses(depth.saturating_sub(1))
            .into_iter()
            .filter_map(|(v, m)| {
                let t = self.tree.type_of_unbounded(&v).ok()?;
                if self.tree.is_terminal_type(t) {
                    return None;
                }
                let s: Rational = self.split[t].iter().sum();
                Some(to_f64(&(m * (Rational::one() - s)).abs()))
            })
            .fold(0.0, f64::max)
    }

    /// Removes every zero-mass subtree. Surviving children keep their order
    /// but are renumbered; [`Pruning::map`] translates vertices.
    pub fn prune_zero_mass(&self) -> (ArcMeasure, Pruning) {
        let keep: Vec<Vec<Option<u32>>> = self
            .split
            .iter()
            .map(|row| {
                let mut next = 0;
                row.iter()
                    .map(|r| {
                        (!r.is_zero()).then(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let children = (0..self.tree.num_types())
            .map(|t| {
                self.tree
                    .child_types(t)
                    .iter()
                    .zip(&keep[t])
                    .filter(|(_, k)| k.is_some())
                    .map(|(&c, _)| c)
                    .collect()
            })
            .collect();
        let tree = self.tree.with_children(children);
        let split = self
            .split
            .iter()
            .map(|row| row.iter().filter(|r| !r.is_zero()).cloned().collect())
            .collect();
        (
            ArcMeasure {
                tree: Arc::new(tree),
                split,
            },
            Pruning {
                original: self.tree.clone(),
                keep,
            },
        )
    }
}

/// Vertex translation produced by [`ArcMeasure::prune_zero_mass`].
#[derive(Clone, Debug)]
pub struct Pruning {
    original: Arc<Tree>,
    keep: Vec<Vec<Option<u32>>>,
}

impl Pruning {
    /// Image of an original vertex, or `None` if it was pruned.
    pub fn map(&self, v: &Vertex) -> Option<Vertex> {
        let mut t = self.original.root_type();
        let mut path = Vec::with_capacity(v.depth());
        for &i in v.path() {
            path.push((*self.keep[t].get(i as usize)?)?);
            t = self.original.child_types(t)[i as usize];
        }
        Some(Vertex::from_path(path))
    }
}

/// The tree itself if it is explicit and ends at its working depth, else
/// its expansion to working depth.
fn explicit_version(tree: &Tree) -> Tree {
    let complete = tree.level_types(tree.depth() + 1).is_empty();
    match tree.kind() {
        TreeKind::Explicit if complete => tree.clone(),
        _ => tree.expand_explicit(tree.depth()),
    }
}

/// Induced measure `mass(v) = Π q(v_{j−1}, v_j)` of a forward-only operator.
pub fn arc_measure_from_q(q: &TransitionOperator) -> Result<ArcMeasure> {
    let tree = q.tree();
    let split = (0..tree.num_types())
        .map(|t| q.children_of(t, false).to_vec())
        .collect();
    ArcMeasure::new(tree.clone(), split)
}

/// Forward-only operator `q(v, w) = mass(I(w)) / mass(I(v))`.
pub fn q_from_arc_measure(m: &ArcMeasure) -> Result<TransitionOperator> {
    m.require_positive(m.tree.depth())?;
    TransitionOperator::forward_only(m.tree.clone(), m.split.clone())
}

/// Memoized `ν`-averages of a locally constant function over sub-arcs.
pub(crate) struct Averager<'a> {
    m: &'a ArcMeasure,
    f: &'a TreeFunction,
    generation: usize,
    memo: HashMap<(NodeId, TypeId, usize), Value>,
}

impl<'a> Averager<'a> {
    pub(crate) fn new(m: &'a ArcMeasure, f: &'a BoundaryFunction) -> Self {
        Averager {
            m,
            f: f.function(),
            generation: f.generation(),
            memo: HashMap::new(),
        }
    }

    /// `(1/mass(v)) ∫_{I(v)} f dν` for a vertex `v` at depth `d` with
    /// DAG node `node` and type `t`.
    pub(crate) fn average(&mut self, node: NodeId, t: TypeId, d: usize) -> Value {
        let tree = &self.m.tree;
        if self.f.is_constant_node(node) || d >= self.generation || tree.is_terminal_type(t) {
            return self.f.node_value(node).clone();
        }
        if let Some(v) = self.memo.get(&(node, t, d)) {
            return v.clone();
        }
        let mut acc = Value::zero();
        for (i, &c) in tree.child_types(t).iter().enumerate() {
            let r = &self.m.split[t][i];
            if r.is_zero() {
                continue;
            }
            let kid = self.f.kid(node, i);
            acc += self.average(kid, c, d + 1) * r;
        }
        self.memo.insert((node, t, d), acc.clone());
        acc
    }
}

/// `π_n f`: the conditional expectation of `f` given `A_n`.
pub fn project_pi(m: &ArcMeasure, f: &BoundaryFunction, n: usize) -> Result<BoundaryFunction> {
    if n > f.generation() {
        return Err(Error::GenerationOutOfRange {
            requested: n,
            max: f.generation(),
        });
    }
    m.require_positive(n)?;
    let mut avg = Averager::new(m, f);
    let mut b = FunctionBuilder::new();
    let mut memo: HashMap<(NodeId, TypeId, usize), NodeId> = HashMap::new();
    let root = project_node(&mut avg, &mut b, &mut memo, f.function().root_node(), m.tree.root_type(), 0, n);
    Ok(BoundaryFunction::from_parts(b.finish(root, None), n))
}

fn project_node(
    avg: &mut Averager,
    b: &mut FunctionBuilder,
    memo: &mut HashMap<(NodeId, TypeId, usize), NodeId>,
    node: NodeId,
    t: TypeId,
    d: usize,
    n: usize,
) -> NodeId {
    if let Some(&id) = memo.get(&(node, t, d)) {
        return id;
    }
    let tree = avg.m.tree.clone();
    let id = if d == n || tree.is_terminal_type(t) || avg.f.is_constant_node(node) {
        let v = avg.average(node, t, d);
        b.constant(v)
    } else {
        let kids = tree
            .child_types(t)
            .iter()
            .enumerate()
            .map(|(i, &c)| project_node(avg, b, memo, avg.f.kid(node, i), c, d + 1, n))
            .collect();
        b.node(Value::zero(), kids)
    };
    memo.insert((node, t, d), id);
    id
}

/// `h*_n`: the boundary function equal to `h(v)` on `I(v)`, `|v| = n`.
pub fn lift(h: &TreeFunction, n: usize) -> Result<BoundaryFunction> {
    if let Some(hz) = h.horizon() {
        if hz < n {
            return Err(Error::MissingValue(Vertex::from_path(vec![0; hz + 1])));
        }
    }
    fn go(h: &TreeFunction, b: &mut FunctionBuilder, memo: &mut HashMap<(NodeId, usize), NodeId>, node: NodeId, d: usize, n: usize) -> NodeId {
        if let Some(&id) = memo.get(&(node, d)) {
            return id;
        }
        let value = h.node_value(node).clone();
        let id = if d == n || h.is_constant_node(node) {
            b.constant(value)
        } else {
            let kids = (0..h.arity(node)).map(|i| go(h, b, memo, h.kid(node, i), d + 1, n)).collect();
            b.node(value, kids)
        };
        memo.insert((node, d), id);
        id
    }
    let mut b = FunctionBuilder::new();
    let root = go(h, &mut b, &mut HashMap::new(), h.root_node(), 0, n);
    Ok(BoundaryFunction::from_parts(b.finish(root, None), n))
}

/// `f†(v)`: the value of `π_{|v|} f` on `I(v)`, extended constantly below
/// the generation of `f`.
pub fn project_dagger(m: &ArcMeasure, f: &BoundaryFunction) -> Result<TreeFunction> {
    m.require_positive(f.generation())?;
    let mut avg = Averager::new(m, f);
    let mut b = FunctionBuilder::new();
    let mut memo = HashMap::new();
    let root = dagger_node(&mut avg, &mut b, &mut memo, f.function().root_node(), m.tree.root_type(), 0);
    Ok(b.finish(root, None))
}

pub(crate) fn dagger_node(
    avg: &mut Averager,
    b: &mut FunctionBuilder,
    memo: &mut HashMap<(NodeId, TypeId, usize), NodeId>,
    node: NodeId,
    t: TypeId,
    d: usize,
) -> NodeId {
    if let Some(&id) = memo.get(&(node, t, d)) {
        return id;
    }
    let tree = avg.m.tree.clone();
    let value = avg.average(node, t, d);
    let id = if d >= avg.generation || tree.is_terminal_type(t) || avg.f.is_constant_node(node) {
        b.constant(value)
    } else {
        let kids = tree
            .child_types(t)
            .iter()
            .enumerate()
            .map(|(i, &c)| dagger_node(avg, b, memo, avg.f.kid(node, i), c, d + 1))
            .collect();
        b.node(value, kids)
    };
    memo.insert((node, t, d), id);
    id
}

/// `∫_Ω |f−g| / (1+|f−g|) dν`, evaluated on arcs of the common generation.
/// Exact unless some `|f−g|` is irrational, in which case the result is a
/// tight rational enclosure.
pub fn dist_nu(m: &ArcMeasure, f: &BoundaryFunction, g: &BoundaryFunction) -> Bounds {
    fn go(
        m: &ArcMeasure,
        f: &TreeFunction,
        g: &TreeFunction,
        memo: &mut HashMap<(NodeId, NodeId, TypeId), Bounds>,
        a: NodeId,
        b: NodeId,
        t: TypeId,
    ) -> Bounds {
        if (f.is_constant_node(a) && g.is_constant_node(b)) || m.tree.is_terminal_type(t) {
            let d = f.node_value(a) - g.node_value(b);
            return if d.is_zero() { Bounds::zero() } else { modulus(&d).saturate() };
        }
        if let Some(x) = memo.get(&(a, b, t)) {
            return x.clone();
        }
        let mut acc = Bounds::zero();
        for (i, &c) in m.tree.child_types(t).iter().enumerate() {
            let r = &m.split[t][i];
            if r.is_zero() {
                continue;
            }
            acc += &go(m, f, g, memo, f.kid(a, i), g.kid(b, i), c).scale(r);
        }
        memo.insert((a, b, t), acc.clone());
        acc
    }
    let (ff, gg) = (f.function(), g.function());
    go(m, ff, gg, &mut HashMap::new(), ff.root_node(), gg.root_node(), m.tree.root_type())
}

/// Levels `h_0, …, h_D` of a boundary martingale, stored as the tree
/// function `h` with `h_n = h*_n`.
#[derive(Clone, Debug)]
pub struct BoundaryMartingale {
    levels: TreeFunction,
    depth: usize,
}

impl BoundaryMartingale {
    pub fn from_function(h: TreeFunction, depth: usize) -> Result<Self> {
        if h.horizon().is_some_and(|hz| hz < depth) {
            return Err(Error::MissingValue(Vertex::from_path(vec![0; depth])));
        }
        Ok(BoundaryMartingale { levels: h, depth })
    }

    /// `levels[n]` holds `h_n` on `C_n` (leaves above `n` keep their
    /// earlier value).
    pub fn from_levels(tree: &Tree, levels: &[HashMap<Vertex, Value>]) -> Result<Self> {
        let depth = levels.len().saturating_sub(1);
        let mut missing = None;
        let h = TreeFunction::from_fn(tree, depth, crate::function::Tail::SectorConstant, |v| {
            match levels[v.depth()].get(v) {
                Some(x) => x.clone(),
                None => {
                    missing.get_or_insert_with(|| v.clone());
                    Value::zero()
                }
            }
        });
        match missing {
            Some(v) => Err(Error::MissingValue(v)),
            None => Ok(BoundaryMartingale { levels: h, depth }),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn function(&self) -> &TreeFunction {
        &self.levels
    }

    pub fn level(&self, n: usize) -> Result<BoundaryFunction> {
        if n > self.depth {
            return Err(Error::GenerationOutOfRange {
                requested: n,
                max: self.depth,
            });
        }
        lift(&self.levels, n)
    }

    /// Copy with the value of `h_{|v|}` on `I(v)` replaced.
    pub fn with_value(&self, tree: &Tree, v: &Vertex, value: Value) -> Result<Self> {
        Ok(BoundaryMartingale {
            levels: self.levels.with_value(tree, v, value)?,
            depth: self.depth,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MartingaleCheck {
    pub consistent: bool,
    /// First failing level `n` and an arc of `A_n` where `π_n h_{n+1} ≠ h_n`.
    pub violation: Option<(usize, Vertex)>,
}

/// Checks `π_n h_{n+1} = h_n` exactly for every `n < D`.
pub fn validate_martingale(m: &ArcMeasure, b: &BoundaryMartingale) -> Result<MartingaleCheck> {
    for n in 0..b.depth() {
        let projected = project_pi(m, &b.level(n + 1)?, n)?;
        if let Some(v) = projected.first_difference(&m.tree, &b.level(n)?) {
            return Ok(MartingaleCheck {
                consistent: false,
                violation: Some((n, v)),
            });
        }
    }
    Ok(MartingaleCheck {
        consistent: true,
        violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{check_harmonic, Region};
    use crate::rational::{int, real, value};

    fn binary(d: usize) -> Arc<Tree> {
        Arc::new(Tree::binary(d))
    }

    fn indicator(t: &Tree, n: usize, at: &Vertex) -> BoundaryFunction {
        BoundaryFunction::from_fn(t, n, |v| if v == at { value(1, 1) } else { value(0, 1) })
    }

    #[test]
    fn uniform_binary_masses() {
        let t = binary(4);
        let q = TransitionOperator::uniform_forward(t.clone());
        let m = arc_measure_from_q(&q).unwrap();
        for (v, mass) in m.masses(4) {
            assert_eq!(mass, crate::rational::pow2(-(v.depth() as i64)));
        }
        assert_eq!(q_from_arc_measure(&m).unwrap(), q);
    }

    #[test]
    fn product_along_path() {
        let map = [("o", vec!["a", "x", "y"]), ("a", vec!["b", "c"])]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
            .collect();
        let t = Arc::new(Tree::explicit(&map).unwrap());
        let mut rows = vec![vec![]; t.num_types()];
        rows[0] = vec![rat(1, 3), rat(1, 3), rat(1, 3)];
        let a = t.type_by_name("a").unwrap();
        rows[a] = vec![rat(1, 2), rat(1, 2)];
        let q = TransitionOperator::forward_only(t.clone(), rows).unwrap();
        let m = arc_measure_from_q(&q).unwrap();
        assert_eq!(m.mass(&Vertex::from_path(vec![0, 0])).unwrap(), rat(1, 6));
    }

    #[test]
    fn q_from_masses_and_zero_mass() {
        let map = [("o", vec!["a", "b"])]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.into_iter().map(String::from).collect()))
            .collect();
        let t = Tree::explicit(&map).unwrap();
        let (a, b) = (Vertex::from_path(vec![0]), Vertex::from_path(vec![1]));
        let masses = HashMap::from([(Vertex::root(), int(1)), (a.clone(), rat(2, 3)), (b.clone(), rat(1, 3))]);
        let m = ArcMeasure::from_masses(&t, &masses).unwrap();
        let q = q_from_arc_measure(&m).unwrap();
        assert_eq!(q.coeff(&Vertex::root(), &a).unwrap(), rat(2, 3));
        assert_eq!(q.coeff(&Vertex::root(), &b).unwrap(), rat(1, 3));

        let zero = HashMap::from([(Vertex::root(), int(1)), (a.clone(), int(0)), (b, int(1))]);
        let m = ArcMeasure::from_masses(&t, &zero).unwrap();
        assert_eq!(q_from_arc_measure(&m), Err(Error::ZeroMassArc(a)));
        let (pruned, map) = m.prune_zero_mass();
        assert_eq!(pruned.tree().circle(1).len(), 1);
        assert_eq!(map.map(&Vertex::from_path(vec![1])), Some(Vertex::from_path(vec![0])));
        assert!(q_from_arc_measure(&pruned).is_ok());
    }

    #[test]
    fn non_stochastic_rows_are_rejected() {
        let t = binary(2);
        let r = ArcMeasure::new(t, vec![vec![rat(1, 2), rat(2, 5)]]);
        assert!(matches!(r, Err(Error::NotStochastic { .. })));
    }

    #[test]
    fn projection_of_an_indicator() {
        let t = binary(4);
        let m = ArcMeasure::uniform(t.clone());
        let f = indicator(&t, 2, &Vertex::from_path(vec![0, 1]));
        let p = project_pi(&m, &f, 1).unwrap();
        assert_eq!(p.value(&Vertex::from_path(vec![0])).unwrap(), value(1, 2));
        assert_eq!(p.value(&Vertex::from_path(vec![1])).unwrap(), value(0, 1));

        let d = project_dagger(&m, &f).unwrap();
        assert_eq!(d.value(&Vertex::root()).unwrap(), value(1, 4));
        assert_eq!(d.value(&Vertex::from_path(vec![0])).unwrap(), value(1, 2));
        assert_eq!(d.value(&Vertex::from_path(vec![1])).unwrap(), value(0, 1));
        let q = q_from_arc_measure(&m).unwrap();
        assert!(check_harmonic(&q, &d, &Region::Everywhere).unwrap().is_harmonic());
    }

    #[test]
    fn constants_project_to_constants() {
        let t = binary(5);
        let m = ArcMeasure::uniform(t.clone());
        let c = BoundaryFunction::constant(value(3, 7), 4);
        for n in 0..=4 {
            assert!(project_pi(&m, &c, n).unwrap().same_as(&t, &BoundaryFunction::constant(value(3, 7), n)));
        }
        let d = project_dagger(&m, &c).unwrap();
        assert!(d.agrees_on(&TreeFunction::constant(value(3, 7)), 5));
    }

    #[test]
    fn lifts_are_step_functions() {
        let t = binary(3);
        let h = TreeFunction::from_fn(&t, 3, crate::function::Tail::SectorConstant, |v| {
            real(int(v.path().first().map_or(9, |&i| i as i64 + 1)))
        });
        let f = lift(&h, 1).unwrap();
        assert_eq!(f.value(&Vertex::from_path(vec![0, 1, 1])).unwrap(), value(1, 1));
        assert_eq!(f.value(&Vertex::from_path(vec![1, 0])).unwrap(), value(2, 1));
        let one = lift(&TreeFunction::constant(value(1, 1)), 2).unwrap();
        assert!(one.same_as(&t, &BoundaryFunction::constant(value(1, 1), 0)));
    }

    #[test]
    fn dist_nu_examples() {
        let t = binary(3);
        let m = ArcMeasure::uniform(t.clone());
        let f = BoundaryFunction::from_fn(&t, 1, |v| real(int(v.path()[0] as i64)));
        let g = BoundaryFunction::constant(value(0, 1), 1);
        assert_eq!(dist_nu(&m, &f, &f), Bounds::zero());
        assert_eq!(dist_nu(&m, &f, &g), Bounds::exact(rat(1, 4)));
    }

    #[test]
    fn perturbed_martingale_is_caught() {
        let t = binary(4);
        let m = ArcMeasure::uniform(t.clone());
        let f = BoundaryFunction::from_fn(&t, 4, |v| real(int(v.path().iter().map(|&i| i as i64).sum())));
        let h = project_dagger(&m, &f).unwrap();
        let b = BoundaryMartingale::from_function(h, 4).unwrap();
        assert!(validate_martingale(&m, &b).unwrap().consistent);
        let v = Vertex::from_path(vec![1, 0]);
        let bad = b.with_value(&t, &v, value(100, 1)).unwrap();
        let check = validate_martingale(&m, &bad).unwrap();
        assert!(!check.consistent);
        assert_eq!(check.violation.unwrap().0, 1);
    }
}
