//! First-passage probabilities, the Poisson kernel, hitting distributions
//! and regularity classes of nearest-neighbour operators.

use num::{Complex, One, Signed, Zero};
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::function::{BoundaryFunction, Tail, TreeFunction};
use crate::measure::ArcMeasure;
use crate::operator::{OperatorKind, TransitionOperator};
use crate::rational::{from_f64, int, rat, to_f64, value_to_f64, Rational, Value};
use crate::tree::{Tree, TreeKind, TypeId, Vertex};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;
/// A descent probability this close to one is taken as recurrence.
pub const TRANSIENCE_MARGIN: f64 = 1e-9;

/// One-step first-passage probabilities of an operator.
///
/// `descent[t]` is `U(v, v_−)` for any non-root vertex of type `t`. Ascents
/// `U(v_−, v)` depend on the whole path and are assembled on demand.
#[derive(Clone, Debug)]
pub struct FirstPassageTable {
    op: TransitionOperator,
    descent: Vec<f64>,
    /// Largest change in the last fixed-point sweep.
    pub residual: f64,
    pub iterations: usize,
    /// Set on explicit finite trees, where leaves at the working depth are
    /// absorbing and every value depends on that truncation.
    pub truncation_dependent: bool,
}

/// Solves `x_t = back_t / (1 − Σ_i c_{t,i} x_{child_i})` by iteration from
/// zero, which converges monotonically to the minimal solution.
pub fn descent_probabilities(p: &TransitionOperator) -> Result<FirstPassageTable> {
    descent_probabilities_with(p, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn descent_probabilities_with(p: &TransitionOperator, tol: f64, max_iter: usize) -> Result<FirstPassageTable> {
    let tree = p.tree();
    let active: Vec<TypeId> = tree
        .reachable_types()
        .into_iter()
        .filter(|&t| !tree.is_terminal_type(t) && p.float_back(t, false) > 0.0)
        .collect();
    let mut x = vec![0.0; tree.num_types()];
    let mut residual = 0.0;
    let mut iterations = 0;
    if !active.is_empty() {
        loop {
            if iterations == max_iter {
                return Err(Error::NoConvergence { tol, iterations });
            }
            iterations += 1;
            let next: Vec<f64> = active
                .iter()
                .map(|&t| {
                    let s: f64 = p
                        .float_children(t, false)
                        .iter()
                        .zip(tree.child_types(t))
                        .map(|(c, &ch)| c * x[ch])
                        .sum();
                    p.float_back(t, false) / (1.0 - s)
                })
                .collect();
            residual = 0.0;
            for (&t, &v) in active.iter().zip(&next) {
                if !(v < 1.0 - TRANSIENCE_MARGIN) {
                    return Err(Error::NotTransient {
                        cone_type: tree.type_name(t).to_string(),
                        value: v,
                    });
                }
                residual = f64::max(residual, (v - x[t]).abs());
                x[t] = v;
            }
            if residual < tol {
                break;
            }
        }
    }
    Ok(FirstPassageTable {
        op: p.clone(),
        descent: x,
        residual,
        iterations,
        truncation_dependent: tree.kind() == TreeKind::Explicit,
    })
}

impl FirstPassageTable {
    pub fn operator(&self) -> &TransitionOperator {
        &self.op
    }

    /// `U(v, v_−)` for a vertex of type `t`.
    pub fn descent_of_type(&self, t: TypeId) -> f64 {
        self.descent[t]
    }

    /// `U(v, v_−)`; zero at the root by convention.
    pub fn descent(&self, v: &Vertex) -> Result<f64> {
        if v.is_root() {
            return Ok(0.0);
        }
        Ok(self.descent[self.op.tree().type_of_unbounded(v)?])
    }

    /// `U(v_{j−1}, v_j)` for `j = 1..=|v|`.
    pub fn ascents(&self, v: &Vertex) -> Result<Vec<f64>> {
        let tree = self.op.tree();
        let mut out = Vec::with_capacity(v.depth());
        let mut t = tree.root_type();
        let mut above = 0.0;
        for (k, &i) in v.path().iter().enumerate() {
            let i = i as usize;
            let kids = tree.child_types(t);
            if i >= kids.len() {
                return Err(Error::VertexNotFound(v.clone()));
            }
            let at_root = k == 0;
            let c = self.op.float_children(t, at_root);
            let others: f64 = (0..kids.len())
                .filter(|&j| j != i)
                .map(|j| c[j] * self.descent[kids[j]])
                .sum();
            let a = c[i] / (1.0 - others - self.op.float_back(t, at_root) * above);
            out.push(a);
            above = a;
            t = kids[i];
        }
        Ok(out)
    }

    /// `U(v_−, v)`.
    pub fn ascent(&self, v: &Vertex) -> Result<f64> {
        Ok(self.ascents(v)?.last().copied().unwrap_or(1.0))
    }

    /// `U(u, v)`, multiplied out along the geodesic.
    pub fn first_passage(&self, u: &Vertex, v: &Vertex) -> Result<f64> {
        let c = u.confluent(v);
        let mut prob = 1.0;
        for k in (c.depth() + 1..=u.depth()).rev() {
            prob *= self.descent(&u.ancestor_at(k))?;
        }
        let up = self.ascents(v)?;
        for a in &up[c.depth()..] {
            prob *= a;
        }
        Ok(prob)
    }

    /// `k(v) = U(o,v)(1 − U(v,v_−)) / (1 − U(v_−,v) U(v,v_−))`.
    pub fn hitting_mass(&self, v: &Vertex) -> Result<f64> {
        if v.is_root() {
            return Ok(1.0);
        }
        let up = self.ascents(v)?;
        let u_ov: f64 = up.iter().product();
        let x = self.descent(v)?;
        let a = *up.last().expect("non-root");
        Ok(u_ov * (1.0 - x) / (1.0 - a * x))
    }

    /// `K(v, u) = U(v, u) / U(o, u)`; zero where `U(o, u) = 0`.
    pub fn kernel(&self, v: &Vertex, u: &Vertex) -> Result<f64> {
        let den = self.first_passage(&Vertex::root(), u)?;
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok(self.first_passage(v, u)? / den)
    }
}

/// Values of `K(v, ·)` on the arcs of the front of generation `|v|`.
pub fn poisson_kernel(table: &FirstPassageTable, v: &Vertex) -> Result<Vec<(Vertex, f64)>> {
    let tree = table.operator().tree();
    tree.front(v.depth())
        .into_iter()
        .map(|u| {
            let k = table.kernel(v, &u)?;
            Ok((u, k))
        })
        .collect()
}

/// `Σ_u k(u) K(v, u)` over the front of generation `|v|`; equals one.
pub fn kernel_mass(table: &FirstPassageTable, v: &Vertex) -> Result<f64> {
    poisson_kernel(table, v)?
        .into_iter()
        .map(|(u, k)| Ok(table.hitting_mass(&u)? * k))
        .sum()
}

/// Hitting distribution of the walk started at `o`, restricted to `B_depth`.
///
/// Forward-only operators are handled exactly, with `U(v, v_−) = 0` and
/// one-step ascents equal to the forward coefficients. Otherwise `k(v)` is
/// evaluated in binary64 and converted exactly, so additivity holds only
/// up to rounding.
pub fn hitting_distribution(table: &FirstPassageTable, depth: usize) -> Result<ArcMeasure> {
    let p = table.operator();
    let tree = p.tree().with_depth(depth);
    if p.kind() == OperatorKind::ForwardOnly {
        let masses = exact_forward_masses(p, &tree)?;
        return ArcMeasure::from_masses(&tree, &masses);
    }
    let masses = tree
        .ball(depth)
        .into_iter()
        .map(|v| {
            let k = table.hitting_mass(&v)?;
            Ok((v, k))
        })
        .collect::<Result<HashMap<_, _>>>()?;
    ArcMeasure::from_float_masses(&tree, &masses)
}

/// `k(v)` for a forward-only operator, evaluated in rationals from the
/// general formula with all descents equal to zero.
fn exact_forward_masses(p: &TransitionOperator, tree: &Tree) -> Result<HashMap<Vertex, Rational>> {
    let mut out = HashMap::new();
    let mut level = vec![(Vertex::root(), tree.root_type(), Rational::one())];
    out.insert(Vertex::root(), Rational::one());
    let zero = Rational::zero();
    for d in 0..tree.depth() {
        let mut next = Vec::new();
        for (v, t, u_ov) in &level {
            let c = p.children_of(*t, d == 0);
            for (i, &ch) in tree.child_types(*t).iter().enumerate() {
                let others: Rational = (0..c.len()).filter(|&j| j != i).map(|j| &c[j] * &zero).sum();
                let ascent = &c[i] / (int(1) - others);
                let u = u_ov * &ascent;
                let k = &u * (int(1) - &zero) / (int(1) - &ascent * &zero);
                let w = v.child(i as u32);
                out.insert(w.clone(), k);
                next.push((w, ch, u));
            }
        }
        level = next;
    }
    Ok(out)
}

/// `𝒦f(v) = Σ_u k(u) K(v, u) f(u)` over the front of generation
/// `max(n, |v|)`, for all `v ∈ B_depth`. Values are binary64 results
/// converted exactly to rationals.
pub fn poisson_transform(table: &FirstPassageTable, f: &BoundaryFunction, depth: usize) -> Result<TreeFunction> {
    let tree = table.operator().tree().clone();
    let mut cache: HashMap<usize, Vec<(Vertex, f64, Complex<f64>)>> = HashMap::new();
    let mut err = None;
    let h = TreeFunction::from_fn(&tree, depth, Tail::Undefined, |v| {
        let gen = f.generation().max(v.depth());
        let front = cache.entry(gen).or_insert_with(|| {
            tree.front(gen)
                .into_iter()
                .map(|u| {
                    let k = table.hitting_mass(&u).unwrap_or(0.0);
                    let fu = value_to_f64(&f.value(&u).unwrap_or_default());
                    (u, k, fu)
                })
                .collect()
        });
        let mut acc = Complex::new(0.0, 0.0);
        for (u, k, fu) in front.iter() {
            if *k == 0.0 {
                continue;
            }
            match table.kernel(v, u) {
                Ok(kv) => acc += fu * (k * kv),
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        }
        Value::new(from_f64(acc.re), from_f64(acc.im))
    });
    match err {
        Some(e) => Err(e),
        None => Ok(h),
    }
}

/// Exact Poisson transform of a forward-only operator on `B_depth`:
/// `𝒦f(v) = Σ_{u ≥ v} U(v, u) f(u)` over the front of generation
/// `max(n, |v|)`, with `U` the product of forward coefficients.
pub fn forward_poisson_transform(q: &TransitionOperator, f: &BoundaryFunction, depth: usize) -> Result<TreeFunction> {
    if !q.is_forward_only() {
        return Err(Error::Malformed("exact transform needs a forward-only operator".into()));
    }
    let tree = q.tree().clone();
    let mut err = None;
    let h = TreeFunction::from_fn(&tree, depth, Tail::Undefined, |v| {
        let gen = f.generation().max(v.depth());
        let mut acc = Value::zero();
        let mut stack = vec![(v.clone(), Rational::one())];
        while let Some((u, w)) = stack.pop() {
            if w.is_zero() {
                continue;
            }
            let t = match tree.type_of_unbounded(&u) {
                Ok(t) => t,
                Err(e) => {
                    err.get_or_insert(e);
                    return Value::zero();
                }
            };
            if u.depth() == gen || tree.is_terminal_type(t) {
                acc += f.value(&u).unwrap_or_default() * &w;
                continue;
            }
            for (i, c) in q.children_of(t, u.is_root()).iter().enumerate() {
                stack.push((u.child(i as u32), &w * c));
            }
        }
        acc
    });
    match err {
        Some(e) => Err(e),
        None => Ok(h),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegularityMode {
    VeryRegular,
    ProductDecay,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub mode: RegularityMode,
    pub is_member: bool,
    /// Best `δ` with every transition probability in `[δ, 1/2 − δ]`
    /// (very-regular mode).
    pub delta: Option<Rational>,
    /// `ε = 4δ/(1+2δ)` for that `δ`.
    pub epsilon: Option<Rational>,
    /// Best `δ` under the weaker reading `p(u,v) ≥ δ`,
    /// `p(u,u_−) ≤ 1/2 − δ` only.
    pub delta_back_only: Option<Rational>,
    pub witness: String,
}

/// Lower bound on `Σ (1 − ratio)` along one cycle of the type graph for it
/// to count as a decaying period.
pub const DECAY_THRESHOLD: f64 = 1e-9;

pub fn check_regularity(p: &TransitionOperator, mode: RegularityMode) -> RegularityReport {
    match mode {
        RegularityMode::VeryRegular => very_regular(p),
        RegularityMode::ProductDecay => product_decay(p),
    }
}

fn very_regular(p: &TransitionOperator) -> RegularityReport {
    let tree = p.tree();
    let half = rat(1, 2);
    let below_root: BTreeSet<TypeId> = tree
        .reachable_types()
        .into_iter()
        .flat_map(|t| tree.child_types(t).to_vec())
        .filter(|&t| !tree.is_terminal_type(t))
        .collect();

    // (label, coefficient, is_back)
    let mut entries: Vec<(String, Rational, bool)> = Vec::new();
    let rt = tree.root_type();
    if !tree.is_terminal_type(rt) {
        for (i, c) in p.root_row().iter().enumerate() {
            entries.push((format!("root -> child {i}"), c.clone(), false));
        }
    }
    for &t in &below_root {
        let name = tree.type_name(t);
        let row = p.row(t);
        entries.push((format!("{name} -> father"), row.back.clone(), true));
        for (i, c) in row.children.iter().enumerate() {
            entries.push((format!("{name} -> child {i}"), c.clone(), false));
        }
    }

    let mut two_sided: Option<(Rational, String)> = None;
    let mut one_sided: Option<Rational> = None;
    for (label, c, is_back) in &entries {
        let d = c.clone().min(&half - c);
        if two_sided.as_ref().is_none_or(|(b, _)| &d < b) {
            two_sided = Some((d, label.clone()));
        }
        let e = if *is_back { c.clone().min(&half - c) } else { c.clone() };
        if one_sided.as_ref().is_none_or(|b| &e < b) {
            one_sided = Some(e);
        }
    }
    let (delta, witness) = two_sided.unwrap_or((Rational::zero(), "no transitions".into()));
    let is_member = delta.is_positive();
    let epsilon = is_member.then(|| int(4) * &delta / (int(1) + int(2) * &delta));
    RegularityReport {
        mode: RegularityMode::VeryRegular,
        is_member,
        delta: is_member.then_some(delta.clone()),
        epsilon,
        delta_back_only: one_sided.filter(Signed::is_positive),
        witness: if is_member {
            format!("tightest transition: {witness}")
        } else {
            format!("transition outside (0, 1/2): {witness}")
        },
    }
}

/// Per-edge ratios `k(w)/k(v)` of the hitting distribution. Forward-only
/// operators use their coefficients; otherwise each edge of the type graph
/// is evaluated at its first breadth-first occurrence within the working
/// depth.
fn edge_ratios(p: &TransitionOperator) -> std::result::Result<Vec<Vec<Option<f64>>>, String> {
    let tree = p.tree();
    let mut ratios: Vec<Vec<Option<f64>>> = (0..tree.num_types())
        .map(|t| vec![None; tree.child_types(t).len()])
        .collect();
    if p.is_forward_only() {
        for (t, row) in ratios.iter_mut().enumerate() {
            for (i, r) in row.iter_mut().enumerate() {
                *r = Some(to_f64(&p.children_of(t, false)[i]));
            }
        }
        return Ok(ratios);
    }
    let table = descent_probabilities(p).map_err(|e| e.to_string())?;
    let mut seen = BTreeSet::new();
    let mut level = vec![(Vertex::root(), tree.root_type())];
    for _ in 0..tree.depth() {
        let mut next = Vec::new();
        for (v, t) in level {
            let fresh = !v.is_root() && seen.insert(t);
            for (i, &c) in tree.child_types(t).iter().enumerate() {
                let w = v.child(i as u32);
                if fresh {
                    let kv = table.hitting_mass(&v).map_err(|e| e.to_string())?;
                    let kw = table.hitting_mass(&w).map_err(|e| e.to_string())?;
                    ratios[t][i] = Some(if kv > 0.0 { kw / kv } else { 0.0 });
                }
                next.push((w, c));
            }
        }
        let mut kept = BTreeSet::new();
        next.retain(|(_, t)| kept.insert(*t));
        level = next;
    }
    Ok(ratios)
}

fn product_decay(p: &TransitionOperator) -> RegularityReport {
    let tree = p.tree();
    let report = |is_member, witness: String| RegularityReport {
        mode: RegularityMode::ProductDecay,
        is_member,
        delta: None,
        epsilon: None,
        delta_back_only: None,
        witness,
    };
    let ratios = match edge_ratios(p) {
        Ok(r) => r,
        Err(e) => return report(false, format!("hitting distribution unavailable: {e}")),
    };
    let reachable: Vec<TypeId> = tree.reachable_types().into_iter().collect();
    let positive = |t: TypeId, i: usize| ratios[t][i].is_some_and(|r| r > 0.0);

    // reach[a] = types reachable from a through positive-ratio edges.
    let reach: HashMap<TypeId, BTreeSet<TypeId>> = reachable
        .iter()
        .map(|&a| {
            let mut seen = BTreeSet::from([a]);
            let mut stack = vec![a];
            while let Some(t) = stack.pop() {
                for (i, &c) in tree.child_types(t).iter().enumerate() {
                    if positive(t, i) && seen.insert(c) {
                        stack.push(c);
                    }
                }
            }
            (a, seen)
        })
        .collect();

    // An edge a→b with ratio at most 1 − θ that closes a positive cycle
    // forces the product along the periodic ray to vanish.
    let decaying: BTreeSet<TypeId> = reachable
        .iter()
        .copied()
        .filter(|&a| {
            tree.child_types(a).iter().enumerate().any(|(i, &b)| {
                positive(a, i)
                    && ratios[a][i].is_some_and(|r| 1.0 - r >= DECAY_THRESHOLD)
                    && reach[&b].contains(&a)
            })
        })
        .collect();

    for &t in &reachable {
        if tree.is_terminal_type(t) {
            return report(false, format!("type {} ends every ray", tree.type_name(t)));
        }
        if reach[&t].is_disjoint(&decaying) {
            return report(false, format!("no decaying ray from type {}", tree.type_name(t)));
        }
    }
    let w = decaying.iter().next().map(|&t| tree.type_name(t).to_string()).unwrap_or_default();
    report(true, format!("decaying cycle through type {w}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn iso(q: usize) -> (Arc<Tree>, FirstPassageTable) {
        let t = Arc::new(Tree::homogeneous(q + 1, q, 6));
        let p = TransitionOperator::isotropic(t.clone());
        (t, descent_probabilities(&p).unwrap())
    }

    #[test]
    fn degree_three_values() {
        let (_, tab) = iso(2);
        let v = Vertex::from_path(vec![1]);
        assert!((tab.descent(&v).unwrap() - 0.5).abs() < 1e-10);
        assert!((tab.ascent(&v).unwrap() - 0.5).abs() < 1e-10);
        assert!((tab.hitting_mass(&v).unwrap() - 1.0 / 3.0).abs() < 1e-10);
        let k = poisson_kernel(&tab, &v).unwrap();
        for (u, kv) in k {
            let want = if u == v { 2.0 } else { 0.5 };
            assert!((kv - want).abs() < 1e-10);
        }
        assert_eq!(tab.first_passage(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn forward_only_has_no_descent() {
        let t = Arc::new(Tree::binary(4));
        let q = TransitionOperator::uniform_forward(t);
        let tab = descent_probabilities(&q).unwrap();
        let v = Vertex::from_path(vec![0, 1, 1]);
        assert_eq!(tab.descent(&v).unwrap(), 0.0);
        assert_eq!(tab.first_passage(&Vertex::root(), &v).unwrap(), 0.125);
        assert_eq!(tab.first_passage(&Vertex::from_path(vec![1]), &v).unwrap(), 0.0);
    }

    #[test]
    fn recurrent_ray_is_rejected() {
        // Reflected walk on a ray, drift towards the root: recurrent.
        let t = Arc::new(Tree::automaton(&[("r", &["a"]), ("a", &["a"])], "r", 5).unwrap());
        let rows = vec![
            crate::operator::Row { back: int(0), children: vec![int(1)] },
            crate::operator::Row { back: rat(2, 3), children: vec![rat(1, 3)] },
        ];
        let p = TransitionOperator::new(t, OperatorKind::NearestNeighbor, rows, None).unwrap();
        assert!(matches!(descent_probabilities(&p), Err(Error::NotTransient { .. })));
    }

    #[test]
    fn isotropic_degree_three_is_very_regular() {
        let (t, _) = iso(2);
        let r = check_regularity(&TransitionOperator::isotropic(t.clone()), RegularityMode::VeryRegular);
        assert!(r.is_member);
        assert_eq!(r.delta, Some(rat(1, 6)));
        assert_eq!(r.epsilon, Some(rat(1, 2)));
        let q = TransitionOperator::uniform_forward(t);
        assert!(!check_regularity(&q, RegularityMode::VeryRegular).is_member);
        assert!(check_regularity(&q, RegularityMode::ProductDecay).is_member);
    }

    #[test]
    fn one_sided_bound_does_not_control_ascents() {
        // p(u,u_-) = 0.1 ≤ 1/2 − δ and all p ≥ δ for δ = 0.1, yet a child
        // receives 0.8 > 1/2 − δ and its ascent exceeds 1 − 4δ/(1+2δ).
        let t = Arc::new(Tree::automaton(&[("r", &["a", "a"]), ("a", &["a", "a"])], "r", 4).unwrap());
        let rows = vec![
            crate::operator::Row { back: int(0), children: vec![rat(4, 5), rat(1, 5)] },
            crate::operator::Row { back: rat(1, 10), children: vec![rat(4, 5), rat(1, 10)] },
        ];
        let p = TransitionOperator::new(t, OperatorKind::NearestNeighbor, rows, None).unwrap();
        let r = check_regularity(&p, RegularityMode::VeryRegular);
        assert_eq!(r.delta_back_only, Some(rat(1, 10)));
        assert!(!r.is_member);
        let tab = descent_probabilities(&p).unwrap();
        let eps = 4.0 * 0.1 / 1.2;
        assert!(tab.ascent(&Vertex::from_path(vec![0, 0])).unwrap() > 1.0 - eps);
    }
}
