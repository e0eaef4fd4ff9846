//! Nearest-neighbour transition operators and harmonicity checks.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::{NodeId, TreeFunction};
use crate::rational::{parse_rational, rat, to_f64, value_to_f64, Rational, Value};
use crate::tree::{Tree, TypeId, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    ForwardOnly,
    NearestNeighbor,
}

/// Transition probabilities out of a vertex of a given cone type: towards
/// the father, then towards each child in stored order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub back: Rational,
    pub children: Vec<Rational>,
}

/// Operator-description document; coefficients are rational strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub coefficients: BTreeMap<String, RowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RowSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back: Option<String>,
    pub children: Vec<String>,
}

/// A row-stochastic nearest-neighbour operator, stored per cone type, with
/// a separate row for the root.
///
/// Terminal vertices are absorbing and carry no row. Forward coefficients of
/// a forward-only operator may vanish; callers that need them positive check
/// through the induced arc measure.
#[derive(Clone, Debug)]
pub struct TransitionOperator {
    tree: Arc<Tree>,
    kind: OperatorKind,
    rows: Vec<Row>,
    root_row: Vec<Rational>,
    float_back: Vec<f64>,
    float_children: Vec<Vec<f64>>,
    float_root: Vec<f64>,
}

impl PartialEq for TransitionOperator {
    fn eq(&self, other: &Self) -> bool {
        self.tree == other.tree
            && self.kind == other.kind
            && self.rows == other.rows
            && self.root_row == other.root_row
    }
}

impl TransitionOperator {
    pub fn new(
        tree: Arc<Tree>,
        kind: OperatorKind,
        rows: Vec<Row>,
        root_row: Option<Vec<Rational>>,
    ) -> Result<Self> {
        if rows.len() != tree.num_types() {
            return Err(Error::Malformed(format!(
                "{} coefficient rows for {} cone types",
                rows.len(),
                tree.num_types()
            )));
        }
        for (t, row) in rows.iter().enumerate() {
            let name = tree.type_name(t);
            let arity = tree.child_types(t).len();
            if arity == 0 {
                continue;
            }
            if row.children.len() != arity {
                return Err(Error::Malformed(format!(
                    "type {name} has {arity} children but {} coefficients",
                    row.children.len()
                )));
            }
            if row.back.is_negative() || row.children.iter().any(Signed::is_negative) {
                return Err(Error::InvalidCoefficient(format!("negative entry in row of {name}")));
            }
            if kind == OperatorKind::ForwardOnly && !row.back.is_zero() {
                return Err(Error::InvalidCoefficient(format!(
                    "forward-only operator moves back from {name}"
                )));
            }
            let sum: Rational = &row.back + row.children.iter().sum::<Rational>();
            if !sum.is_one() {
                return Err(Error::NotStochastic {
                    at: name.to_string(),
                    sum: sum.to_string(),
                });
            }
        }

        let root_t = tree.root_type();
        let root_row = match root_row {
            Some(r) => {
                if kind == OperatorKind::ForwardOnly && r != rows[root_t].children {
                    return Err(Error::Malformed(
                        "forward-only operators use the root type's row at the root".into(),
                    ));
                }
                r
            }
            None if rows[root_t].back.is_zero() => rows[root_t].children.clone(),
            None => {
                return Err(Error::Malformed(
                    "root type moves back; an explicit root row is required".into(),
                ))
            }
        };
        if !tree.is_terminal_type(root_t) {
            if root_row.len() != tree.child_types(root_t).len() {
                return Err(Error::Malformed("root row has the wrong length".into()));
            }
            if root_row.iter().any(Signed::is_negative) {
                return Err(Error::InvalidCoefficient("negative entry in root row".into()));
            }
            let sum: Rational = root_row.iter().sum();
            if !sum.is_one() {
                return Err(Error::NotStochastic {
                    at: "root".into(),
                    sum: sum.to_string(),
                });
            }
        }

        if kind == OperatorKind::NearestNeighbor {
            let below_root: HashSet<TypeId> = (0..tree.num_types())
                .flat_map(|t| tree.child_types(t).iter().copied())
                .collect();
            for &t in &below_root {
                if tree.is_terminal_type(t) {
                    continue;
                }
                let row = &rows[t];
                if !row.back.is_positive() || row.children.iter().any(|c| !c.is_positive()) {
                    return Err(Error::InvalidCoefficient(format!(
                        "nearest-neighbour coefficients must be positive at type {}",
                        tree.type_name(t)
                    )));
                }
            }
            if root_row.iter().any(|c| !c.is_positive()) {
                return Err(Error::InvalidCoefficient(
                    "nearest-neighbour coefficients must be positive at the root".into(),
                ));
            }
        }

        let float_back = rows.iter().map(|r| to_f64(&r.back)).collect();
        let float_children = rows
            .iter()
            .map(|r| r.children.iter().map(to_f64).collect())
            .collect();
        let float_root = root_row.iter().map(to_f64).collect();
        Ok(TransitionOperator {
            tree,
            kind,
            rows,
            root_row,
            float_back,
            float_children,
            float_root,
        })
    }

    /// Forward-only operator from per-type child coefficients.
    pub fn forward_only(tree: Arc<Tree>, rows: Vec<Vec<Rational>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|children| Row {
                back: Rational::zero(),
                children,
            })
            .collect();
        Self::new(tree, OperatorKind::ForwardOnly, rows, None)
    }

    /// Forward-only operator with equal weight on every child.
    pub fn uniform_forward(tree: Arc<Tree>) -> Self {
        let rows = (0..tree.num_types())
            .map(|t| {
                let d = tree.child_types(t).len() as i64;
                vec![rat(1, d.max(1)); d as usize]
            })
            .collect();
        Self::forward_only(tree, rows).expect("uniform rows are stochastic")
    }

    /// Simple random walk: equal weight on every neighbour.
    pub fn isotropic(tree: Arc<Tree>) -> Self {
        let rows = (0..tree.num_types())
            .map(|t| {
                let d = tree.child_types(t).len() as i64;
                if d == 0 {
                    Row {
                        back: Rational::one(),
                        children: vec![],
                    }
                } else {
                    Row {
                        back: rat(1, d + 1),
                        children: vec![rat(1, d + 1); d as usize],
                    }
                }
            })
            .collect();
        let d_root = tree.child_types(tree.root_type()).len() as i64;
        let root = vec![rat(1, d_root.max(1)); d_root as usize];
        Self::new(tree, OperatorKind::NearestNeighbor, rows, Some(root))
            .expect("isotropic rows are stochastic")
    }

    pub fn from_spec(tree: Arc<Tree>, spec: &OperatorSpec) -> Result<Self> {
        for name in spec.coefficients.keys() {
            if tree.type_by_name(name).is_none() {
                return Err(Error::UnknownType(name.clone()));
            }
        }
        let parse_all = |xs: &[String]| xs.iter().map(|x| parse_rational(x)).collect::<Result<Vec<_>>>();
        let rows = (0..tree.num_types())
            .map(|t| match spec.coefficients.get(tree.type_name(t)) {
                Some(r) => Ok(Row {
                    back: r.back.as_deref().map(parse_rational).transpose()?.unwrap_or_default(),
                    children: parse_all(&r.children)?,
                }),
                None if tree.is_terminal_type(t) => Ok(Row {
                    back: Rational::one(),
                    children: vec![],
                }),
                None => Err(Error::Malformed(format!(
                    "no coefficients for type {}",
                    tree.type_name(t)
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let root = spec.root.as_deref().map(parse_all).transpose()?;
        Self::new(tree, spec.kind, rows, root)
    }

    pub fn from_json(tree: Arc<Tree>, text: &str) -> Result<Self> {
        let spec: OperatorSpec =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_spec(tree, &spec)
    }

    pub fn to_spec(&self) -> OperatorSpec {
        let coefficients = (0..self.tree.num_types())
            .filter(|&t| !self.tree.is_terminal_type(t))
            .map(|t| {
                let row = &self.rows[t];
                (
                    self.tree.type_name(t).to_string(),
                    RowSpec {
                        back: (!row.back.is_zero()).then(|| row.back.to_string()),
                        children: row.children.iter().map(|c| c.to_string()).collect(),
                    },
                )
            })
            .collect();
        let root = (self.kind == OperatorKind::NearestNeighbor)
            .then(|| self.root_row.iter().map(|c| c.to_string()).collect());
        OperatorSpec {
            kind: self.kind,
            coefficients,
            root,
        }
    }

    pub fn tree(&self) -> &Arc<Tree> {
        &self.tree
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn is_forward_only(&self) -> bool {
        self.kind == OperatorKind::ForwardOnly
    }

    pub fn row(&self, t: TypeId) -> &Row {
        &self.rows[t]
    }

    pub fn root_row(&self) -> &[Rational] {
        &self.root_row
    }

    /// Forward coefficients at a vertex of type `t`, or at the root.
    pub fn children_of(&self, t: TypeId, at_root: bool) -> &[Rational] {
        if at_root {
            &self.root_row
        } else {
            &self.rows[t].children
        }
    }

    pub(crate) fn float_children(&self, t: TypeId, at_root: bool) -> &[f64] {
        if at_root {
            &self.float_root
        } else {
            &self.float_children[t]
        }
    }

    pub(crate) fn float_back(&self, t: TypeId, at_root: bool) -> f64 {
        if at_root || self.tree.is_terminal_type(t) {
            0.0
        } else {
            self.float_back[t]
        }
    }

    /// `p(u, v)` for neighbours `u ∼ v`; zero for non-neighbours.
    pub fn coeff(&self, u: &Vertex, v: &Vertex) -> Result<Rational> {
        let tu = self.tree.type_of_unbounded(u)?;
        self.tree.type_of_unbounded(v)?;
        if self.tree.is_terminal_type(tu) {
            return Ok(Rational::zero());
        }
        if u.father().as_ref() == Some(v) {
            return Ok(self.rows[tu].back.clone());
        }
        if v.father().as_ref() == Some(u) {
            let i = *v.path().last().expect("non-root") as usize;
            return Ok(self.children_of(tu, u.is_root())[i].clone());
        }
        Ok(Rational::zero())
    }
}

/// Vertex set on which harmonicity is checked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    Vertices(Vec<Vertex>),
    /// All vertices `x` with `|x| ≤ n`.
    Ball(usize),
    Everywhere,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicReport {
    /// Largest `|Σ_y p(x,y) f(y) − f(x)|` over the region (in binary64).
    pub max_residual: f64,
    /// True when every residual is exactly zero.
    pub exact: bool,
    /// A vertex attaining the largest residual.
    pub worst: Option<Vertex>,
    /// Number of distinct local configurations evaluated.
    pub checked: usize,
}

impl HarmonicReport {
    pub fn is_harmonic(&self) -> bool {
        self.exact
    }
}

/// Residuals of `f` against `op` at the non-terminal vertices of `region`.
pub fn check_harmonic(op: &TransitionOperator, f: &TreeFunction, region: &Region) -> Result<HarmonicReport> {
    let tree = op.tree();
    let mut report = HarmonicReport {
        max_residual: 0.0,
        exact: true,
        worst: None,
        checked: 0,
    };
    let mut record = |x: &Vertex, r: Value| {
        report.checked += 1;
        if r.is_zero() {
            return;
        }
        report.exact = false;
        let m = value_to_f64(&r).norm();
        if report.worst.is_none() || m > report.max_residual {
            report.max_residual = m;
            report.worst = Some(x.clone());
        }
    };

    match region {
        Region::Vertices(vs) => {
            for x in vs {
                let t = tree.type_of_unbounded(x)?;
                if tree.is_terminal_type(t) {
                    continue;
                }
                let mut r = -f.value(x)?;
                for (i, c) in op.children_of(t, x.is_root()).iter().enumerate() {
                    r += f.value(&x.child(i as u32))? * c;
                }
                if let Some(father) = x.father() {
                    r += f.value(&father)? * &op.row(t).back;
                }
                record(x, r);
            }
        }
        Region::Ball(_) | Region::Everywhere => {
            let limit = match region {
                Region::Ball(n) => Some(*n),
                _ => None,
            };
            let keyed_by_depth = limit.is_some() || f.horizon().is_some();
            // A vertex's residual depends only on its own node, its father's
            // node, its type and whether it is the root.
            type State = (Option<NodeId>, NodeId, TypeId, Vertex);
            let mut seen: HashSet<(Option<NodeId>, NodeId, TypeId, bool, usize)> = HashSet::new();
            let mut queue: VecDeque<State> =
                VecDeque::from([(None, f.root_node(), tree.root_type(), Vertex::root())]);
            while let Some((father, node, t, x)) = queue.pop_front() {
                let d = x.depth();
                let key = (father, node, t, x.is_root(), if keyed_by_depth { d } else { 0 });
                if !seen.insert(key) {
                    continue;
                }
                if tree.is_terminal_type(t) {
                    continue;
                }
                if f.horizon().is_some_and(|h| d + 1 > h) {
                    return Err(Error::MissingValue(x.child(0)));
                }
                let mut r = -f.node_value(node).clone();
                for (i, c) in op.children_of(t, x.is_root()).iter().enumerate() {
                    r += f.node_value(f.kid(node, i)) * c;
                }
                if let Some(fa) = father {
                    r += f.node_value(fa) * &op.row(t).back;
                }
                record(&x, r);
                if limit.is_some_and(|n| d >= n) {
                    continue;
                }
                for (i, &c) in tree.child_types(t).iter().enumerate() {
                    queue.push_back((Some(node), f.kid(node, i), c, x.child(i as u32)));
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Tail;
    use crate::rational::{int, real, value};

    fn path(n: usize) -> Arc<Tree> {
        let map: BTreeMap<String, Vec<String>> =
            (0..n).map(|i| (format!("v{i}"), vec![format!("v{}", i + 1)])).collect();
        Arc::new(Tree::explicit(&map).unwrap())
    }

    #[test]
    fn linear_functions_are_harmonic_on_a_path() {
        let t = path(6);
        // Two-sided walk with p = 1/2 in the interior; the root only steps forward.
        let rows = (0..t.num_types())
            .map(|i| {
                if t.is_terminal_type(i) {
                    Row { back: int(1), children: vec![] }
                } else {
                    Row { back: rat(1, 2), children: vec![rat(1, 2)] }
                }
            })
            .collect();
        let op = TransitionOperator::new(t.clone(), OperatorKind::NearestNeighbor, rows, Some(vec![int(1)])).unwrap();
        let f = TreeFunction::from_fn(&t, 6, Tail::Undefined, |v| real(int(v.depth() as i64)));
        let interior: Vec<Vertex> = t.ball(5).into_iter().filter(|v| !v.is_root()).collect();
        let rep = check_harmonic(&op, &f, &Region::Vertices(interior)).unwrap();
        assert!(rep.is_harmonic());
        let rep = check_harmonic(&op, &f, &Region::Vertices(vec![Vertex::root()])).unwrap();
        assert_eq!(rep.max_residual, 1.0);
    }

    #[test]
    fn constants_are_harmonic() {
        let t = Arc::new(Tree::homogeneous(3, 2, 5));
        let f = TreeFunction::constant(value(7, 3));
        for op in [TransitionOperator::isotropic(t.clone()), TransitionOperator::uniform_forward(t.clone())] {
            let rep = check_harmonic(&op, &f, &Region::Everywhere).unwrap();
            assert!(rep.is_harmonic());
            assert!(rep.checked <= 3);
        }
    }

    #[test]
    fn missing_neighbour_values_are_reported() {
        let t = Arc::new(Tree::binary(6));
        let op = TransitionOperator::uniform_forward(t.clone());
        let f = TreeFunction::constant(value(1, 1)).truncate(2);
        assert!(check_harmonic(&op, &f, &Region::Ball(1)).is_ok());
        assert!(matches!(check_harmonic(&op, &f, &Region::Ball(2)), Err(Error::MissingValue(_))));
    }

    #[test]
    fn validation() {
        let t = Arc::new(Tree::binary(3));
        let bad = TransitionOperator::forward_only(t.clone(), vec![vec![rat(1, 2), rat(2, 5)]]);
        assert!(matches!(bad, Err(Error::NotStochastic { .. })));
        let neg = TransitionOperator::forward_only(t.clone(), vec![vec![rat(3, 2), rat(-1, 2)]]);
        assert!(matches!(neg, Err(Error::InvalidCoefficient(_))));
        let no_root = TransitionOperator::new(
            t.clone(),
            OperatorKind::NearestNeighbor,
            vec![Row { back: rat(1, 3), children: vec![rat(1, 3), rat(1, 3)] }],
            None,
        );
        assert!(matches!(no_root, Err(Error::Malformed(_))));
    }

    #[test]
    fn serde_round_trip() {
        let t = Arc::new(Tree::homogeneous(3, 2, 4));
        let op = TransitionOperator::isotropic(t.clone());
        let text = serde_json::to_string(&op.to_spec()).unwrap();
        assert_eq!(TransitionOperator::from_json(t.clone(), &text).unwrap(), op);
        let json = r#"{"kind":"forward_only","coefficients":{"root":{"children":["1/3","1/3","1/3"]},"inner":{"children":["0.25","3/4"]}}}"#;
        let q = TransitionOperator::from_json(t.clone(), json).unwrap();
        assert_eq!(q.coeff(&Vertex::from_path(vec![0]), &Vertex::from_path(vec![0, 1])).unwrap(), rat(3, 4));
        let unknown = r#"{"kind":"forward_only","coefficients":{"zz":{"children":[]}}}"#;
        assert!(matches!(TransitionOperator::from_json(t, unknown), Err(Error::UnknownType(_))));
    }
}
