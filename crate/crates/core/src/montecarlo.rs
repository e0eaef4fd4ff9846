//! Random-walk simulation used to cross-check the analytic first-passage
//! and hitting computations.
//!
//! Walk `i` of a run draws from its own ChaCha stream `i` under the run's
//! seed, and results are merged by walk index, so estimates do not depend
//! on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::operator::TransitionOperator;
use crate::tree::{TypeId, Vertex};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exit {
    /// First vertex of the recording depth reached by the walk.
    Arc(Vertex),
    /// Absorbed at a leaf above the recording depth.
    Absorbed(Vertex),
    /// Step cap exhausted.
    Escape,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkRecord {
    pub path: Vec<Vertex>,
    pub exit: Exit,
    pub steps: usize,
}

fn rng_for(seed: u64, walk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walk);
    rng
}

/// One step from `v` (of type `t`); returns the new vertex and its type.
fn step(p: &TransitionOperator, v: &Vertex, t: TypeId, rng: &mut ChaCha8Rng) -> (Vertex, Option<TypeId>) {
    let tree = p.tree();
    let at_root = v.is_root();
    let mut u: f64 = rng.gen();
    let back = p.float_back(t, at_root);
    if u < back {
        return (v.father().expect("back moves only off the root"), None);
    }
    u -= back;
    let cf = p.float_children(t, at_root);
    let mut pick = cf.len() - 1;
    for (i, c) in cf.iter().enumerate() {
        if u < *c {
            pick = i;
            break;
        }
        u -= c;
    }
    // Rounding can leave u just above the last positive weight.
    while cf[pick] == 0.0 && pick > 0 {
        pick -= 1;
    }
    (v.child(pick as u32), Some(tree.child_types(t)[pick]))
}

struct Walk {
    exit: Exit,
    steps: usize,
    path: Vec<Vertex>,
}

fn run_walk(
    p: &TransitionOperator,
    start: &Vertex,
    stop: impl Fn(&Vertex) -> bool,
    step_cap: usize,
    rng: &mut ChaCha8Rng,
    keep_path: bool,
) -> Result<Walk> {
    let tree = p.tree();
    let mut v = start.clone();
    let mut t = tree.type_of_unbounded(&v)?;
    let mut path = vec![];
    if keep_path {
        path.push(v.clone());
    }
    let mut steps = 0;
    loop {
        if stop(&v) {
            return Ok(Walk { exit: Exit::Arc(v), steps, path });
        }
        if tree.is_terminal_type(t) {
            return Ok(Walk { exit: Exit::Absorbed(v), steps, path });
        }
        if steps == step_cap {
            return Ok(Walk { exit: Exit::Escape, steps, path });
        }
        let (w, wt) = step(p, &v, t, rng);
        t = match wt {
            Some(wt) => wt,
            None => tree.type_of_unbounded(&w)?,
        };
        v = w;
        steps += 1;
        if keep_path {
            path.push(v.clone());
        }
    }
}

/// Simulates the chain from `start` until it first reaches depth
/// `record_depth`, a leaf, or `step_cap` steps. Uses stream 0 of `seed`.
pub fn simulate_walk(
    p: &TransitionOperator,
    start: &Vertex,
    record_depth: usize,
    step_cap: usize,
    seed: u64,
) -> Result<WalkRecord> {
    if step_cap == 0 {
        return Err(Error::Malformed("step cap must be at least 1".into()));
    }
    if record_depth > p.tree().depth() {
        return Err(Error::GenerationOutOfRange {
            requested: record_depth,
            max: p.tree().depth(),
        });
    }
    let mut rng = rng_for(seed, 0);
    let w = run_walk(p, start, |v| v.depth() == record_depth, step_cap, &mut rng, true)?;
    Ok(WalkRecord {
        path: w.path,
        exit: w.exit,
        steps: w.steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HittingEstimate {
    pub depth: usize,
    pub n_walks: u64,
    /// Walks exiting through each arc of the recording depth.
    pub counts: BTreeMap<Vertex, u64>,
    /// Walks absorbed at leaves above the recording depth.
    pub absorbed: BTreeMap<Vertex, u64>,
    pub escapes: u64,
}

impl HittingEstimate {
    pub fn frequency(&self, v: &Vertex) -> f64 {
        let c = self.counts.get(v).or_else(|| self.absorbed.get(v)).copied().unwrap_or(0);
        c as f64 / self.n_walks as f64
    }

    /// Binomial standard error of [`HittingEstimate::frequency`].
    pub fn stderr(&self, v: &Vertex) -> f64 {
        let f = self.frequency(v);
        (f * (1.0 - f) / self.n_walks as f64).sqrt()
    }

    pub fn escape_fraction(&self) -> f64 {
        self.escapes as f64 / self.n_walks as f64
    }
}

/// Empirical distribution of the first vertex of depth `depth` reached
/// from `o`.
pub fn estimate_hitting(
    p: &TransitionOperator,
    depth: usize,
    n_walks: u64,
    seed: u64,
    step_cap: usize,
) -> Result<HittingEstimate> {
    let exits: Vec<Exit> = (0..n_walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            run_walk(p, &Vertex::root(), |v| v.depth() == depth, step_cap, &mut rng, false).map(|w| w.exit)
        })
        .collect::<Result<_>>()?;
    let mut est = HittingEstimate {
        depth,
        n_walks,
        counts: BTreeMap::new(),
        absorbed: BTreeMap::new(),
        escapes: 0,
    };
    for e in exits {
        match e {
            Exit::Arc(v) => *est.counts.entry(v).or_default() += 1,
            Exit::Absorbed(v) => *est.absorbed.entry(v).or_default() += 1,
            Exit::Escape => est.escapes += 1,
        }
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentEstimate {
    pub n_walks: u64,
    pub hits: u64,
    /// Walks that neither returned nor left through depth `|v| + horizon`
    /// within the step cap.
    pub unresolved: u64,
}

impl DescentEstimate {
    pub fn frequency(&self) -> f64 {
        self.hits as f64 / self.n_walks as f64
    }

    pub fn stderr(&self) -> f64 {
        let f = self.frequency();
        (f * (1.0 - f) / self.n_walks as f64).sqrt()
    }
}

/// Fraction of walks from `v` that reach `v_−`. A walk that gets `horizon`
/// levels below `v` is counted as escaping to the boundary.
pub fn estimate_descent(
    p: &TransitionOperator,
    v: &Vertex,
    horizon: usize,
    n_walks: u64,
    seed: u64,
    step_cap: usize,
) -> Result<DescentEstimate> {
    let father = v
        .father()
        .ok_or_else(|| Error::Malformed("the root has no father".into()))?;
    let floor = v.depth() + horizon;
    let exits: Vec<Exit> = (0..n_walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            run_walk(p, v, |w| *w == father || w.depth() == floor, step_cap, &mut rng, false).map(|w| w.exit)
        })
        .collect::<Result<_>>()?;
    let mut est = DescentEstimate {
        n_walks,
        hits: 0,
        unresolved: 0,
    };
    for e in exits {
        match e {
            Exit::Arc(w) if w == father => est.hits += 1,
            Exit::Escape => est.unresolved += 1,
            _ => {}
        }
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Tree;
    use std::sync::Arc;

    #[test]
    fn forward_walks_take_exactly_d_steps() {
        let t = Arc::new(Tree::binary(6));
        let q = TransitionOperator::uniform_forward(t);
        for seed in 0..20 {
            let w = simulate_walk(&q, &Vertex::root(), 5, 100, seed).unwrap();
            assert_eq!(w.steps, 5);
            assert!(matches!(w.exit, Exit::Arc(ref v) if v.depth() == 5));
            assert!(w.path.windows(2).all(|p| p[1].father().as_ref() == Some(&p[0])));
        }
    }

    #[test]
    fn one_step_reaches_the_first_circle() {
        let t = Arc::new(Tree::homogeneous(3, 2, 4));
        let p = TransitionOperator::isotropic(t);
        let w = simulate_walk(&p, &Vertex::root(), 1, 1, 7).unwrap();
        assert_eq!(w.steps, 1);
        assert!(simulate_walk(&p, &Vertex::root(), 1, 0, 7).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let t = Arc::new(Tree::homogeneous(3, 2, 4));
        let p = TransitionOperator::isotropic(t);
        let a = estimate_hitting(&p, 2, 2000, 11, 10_000).unwrap();
        let b = estimate_hitting(&p, 2, 2000, 11, 10_000).unwrap();
        assert_eq!(a, b);
        let c = estimate_hitting(&p, 2, 2000, 12, 10_000).unwrap();
        assert_ne!(a, c);
    }
}
