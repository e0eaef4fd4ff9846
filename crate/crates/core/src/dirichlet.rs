//! Contours and the Dirichlet problem on their interior.

use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::operator::TransitionOperator;
use crate::tree::{Tree, Vertex};

/// A finite set of pairwise non-adjacent vertices that cuts the root off
/// from infinity, together with the bounded component containing `o`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contour {
    vertices: BTreeSet<Vertex>,
    interior: BTreeSet<Vertex>,
}

impl Contour {
    pub fn new(tree: &Tree, vertices: impl IntoIterator<Item = Vertex>) -> Result<Self> {
        let vertices: BTreeSet<Vertex> = vertices.into_iter().collect();
        for v in &vertices {
            tree.type_of(v)?;
            if v.is_root() {
                return Err(Error::InvalidContour("the root cannot lie on the contour".into()));
            }
            if let Some(f) = v.father() {
                if vertices.contains(&f) {
                    return Err(Error::InvalidContour(format!("{f} and {v} are adjacent")));
                }
            }
        }
        let mut interior = BTreeSet::new();
        let mut queue = VecDeque::from([Vertex::root()]);
        while let Some(v) = queue.pop_front() {
            if v.depth() >= tree.depth() {
                return Err(Error::InvalidContour(format!(
                    "interior reaches {v} at the working depth; it is not bounded"
                )));
            }
            if tree.is_terminal(&v)? {
                return Err(Error::InvalidContour(format!("leaf {v} lies in the interior")));
            }
            for w in tree.children(&v)? {
                if !vertices.contains(&w) {
                    queue.push_back(w);
                }
            }
            interior.insert(v);
        }
        if let Some(v) = vertices.iter().find(|v| !interior.contains(&v.father().expect("non-root"))) {
            return Err(Error::InvalidContour(format!("{v} does not border the interior")));
        }
        Ok(Contour { vertices, interior })
    }

    /// `C_n` with interior `B_{n−1}`.
    pub fn circle(tree: &Tree, n: usize) -> Result<Self> {
        Self::new(tree, tree.circle(n))
    }

    pub fn vertices(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    pub fn interior(&self) -> &BTreeSet<Vertex> {
        &self.interior
    }
}

fn boundary_value(boundary: &HashMap<Vertex, f64>, v: &Vertex) -> Result<f64> {
    boundary.get(v).copied().ok_or_else(|| Error::MissingValue(v.clone()))
}

/// Solves `h = P h` on the interior with `h` prescribed on the contour, via
/// a dense LU factorization of `(I − P_II) h_I = P_IC h_C`. The result
/// contains interior and contour values.
pub fn solve_dirichlet(
    p: &TransitionOperator,
    c: &Contour,
    boundary: &HashMap<Vertex, f64>,
) -> Result<BTreeMap<Vertex, f64>> {
    let tree = p.tree();
    let index: HashMap<&Vertex, usize> = c.interior.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let n = index.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (v, &i) in &index {
        let t = tree.type_of(v)?;
        let mut neighbours: Vec<(Vertex, f64)> = p
            .float_children(t, v.is_root())
            .iter()
            .enumerate()
            .map(|(j, &cf)| (v.child(j as u32), cf))
            .collect();
        if let Some(f) = v.father() {
            neighbours.push((f, p.float_back(t, false)));
        }
        for (w, cf) in neighbours {
            match index.get(&w) {
                Some(&j) => a[(i, j)] -= cf,
                None => b[i] += cf * boundary_value(boundary, &w)?,
            }
        }
    }
    let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    let mut out: BTreeMap<Vertex, f64> = index.iter().map(|(v, &i)| ((*v).clone(), x[i])).collect();
    for v in &c.vertices {
        out.insert(v.clone(), boundary_value(boundary, v)?);
    }
    Ok(out)
}

/// First-passage probabilities of the walk stopped on a contour: contour
/// vertices are absorbing, so every value is a finite computation.
#[derive(Clone, Debug)]
pub struct StoppedPassage {
    descent: HashMap<Vertex, f64>,
    ascent: HashMap<Vertex, f64>,
}

impl StoppedPassage {
    pub fn new(p: &TransitionOperator, c: &Contour) -> Result<Self> {
        let tree = p.tree();
        let mut descent: HashMap<Vertex, f64> = c.vertices.iter().map(|v| (v.clone(), 0.0)).collect();
        // Interior vertices deepest first, so children are always ready.
        let mut order: Vec<&Vertex> = c.interior.iter().collect();
        order.sort_by(|a, b| b.depth().cmp(&a.depth()));
        for v in &order {
            if v.is_root() {
                continue;
            }
            let t = tree.type_of(v)?;
            let s: f64 = p
                .float_children(t, false)
                .iter()
                .enumerate()
                .map(|(j, cf)| cf * descent[&v.child(j as u32)])
                .sum();
            descent.insert((*v).clone(), p.float_back(t, false) / (1.0 - s));
        }
        let mut ascent = HashMap::new();
        order.reverse();
        for u in order {
            let t = tree.type_of(u)?;
            let cf = p.float_children(t, u.is_root());
            let above = if u.is_root() { 0.0 } else { ascent[u] };
            let back = p.float_back(t, u.is_root());
            let kids: Vec<Vertex> = (0..cf.len()).map(|j| u.child(j as u32)).collect();
            for (i, w) in kids.iter().enumerate() {
                let others: f64 = kids
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, x)| cf[j] * descent[x])
                    .sum();
                ascent.insert(w.clone(), cf[i] / (1.0 - others - back * above));
            }
        }
        Ok(StoppedPassage { descent, ascent })
    }

    /// Probability that the stopped walk from `u` ever visits `v`.
    pub fn first_passage(&self, u: &Vertex, v: &Vertex) -> Result<f64> {
        let c = u.confluent(v);
        let mut prob = 1.0;
        for k in c.depth() + 1..=u.depth() {
            let w = u.ancestor_at(k);
            prob *= self.descent.get(&w).ok_or(Error::VertexNotFound(w))?;
        }
        for k in c.depth() + 1..=v.depth() {
            let w = v.ancestor_at(k);
            prob *= self.ascent.get(&w).ok_or(Error::VertexNotFound(w))?;
        }
        Ok(prob)
    }
}

/// `h(v_0) = Σ_{v ∈ 𝒞} U(v_0, v) h(v)` with `U` taken for the walk stopped
/// on the contour.
pub fn dirichlet_by_first_passage(
    p: &TransitionOperator,
    c: &Contour,
    boundary: &HashMap<Vertex, f64>,
) -> Result<BTreeMap<Vertex, f64>> {
    let stopped = StoppedPassage::new(p, c)?;
    c.interior
        .iter()
        .map(|v0| {
            let mut h = 0.0;
            for v in &c.vertices {
                h += stopped.first_passage(v0, v)? * boundary_value(boundary, v)?;
            }
            Ok((v0.clone(), h))
        })
        .collect()
}
