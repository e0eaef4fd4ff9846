#![allow(dead_code)]

use martree::function::BoundaryFunction;
use martree::measure::ArcMeasure;
use martree::operator::{OperatorKind, Row, TransitionOperator};
use martree::rational::{int, rat, Rational, Value};
use martree::tree::Tree;
use num::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Random cone-type automaton. Non-terminal types get between `lo` and `hi`
/// children; with `leaves`, one extra terminal type may appear.
pub fn random_automaton(rng: &mut ChaCha8Rng, types: usize, lo: usize, hi: usize, leaves: bool, depth: usize) -> Arc<Tree> {
    let names: Vec<String> = (0..types).map(|i| format!("t{i}")).collect();
    let mut table: Vec<(String, Vec<String>)> = names
        .iter()
        .map(|n| {
            let k = rng.gen_range(lo..=hi);
            let kids = (0..k)
                .map(|_| {
                    if leaves && rng.gen_bool(0.15) {
                        "leaf".to_string()
                    } else {
                        names[rng.gen_range(0..types)].clone()
                    }
                })
                .collect();
            (n.clone(), kids)
        })
        .collect();
    if leaves {
        table.push(("leaf".into(), vec![]));
    }
    let refs: Vec<Vec<&str>> = table.iter().map(|(_, k)| k.iter().map(String::as_str).collect()).collect();
    let spec: Vec<(&str, &[&str])> = table.iter().zip(&refs).map(|((n, _), k)| (n.as_str(), k.as_slice())).collect();
    Arc::new(Tree::automaton(&spec, "t0", depth).unwrap())
}

fn random_row(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=9)).collect();
    let s: i64 = w.iter().sum();
    w.into_iter().map(|x| rat(x, s)).collect()
}

/// Positive rational split ratios on every reachable type.
pub fn random_measure(rng: &mut ChaCha8Rng, tree: &Arc<Tree>) -> ArcMeasure {
    let split = (0..tree.num_types()).map(|t| random_row(rng, tree.child_types(t).len())).collect();
    ArcMeasure::new(tree.clone(), split).unwrap()
}

pub fn random_value(rng: &mut ChaCha8Rng, complex: bool) -> Value {
    let re = rat(rng.gen_range(-6..=6), rng.gen_range(1..=4));
    let im = if complex { rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)) } else { int(0) };
    Complex::new(re, im)
}

pub fn random_boundary_function(rng: &mut ChaCha8Rng, tree: &Tree, generation: usize, complex: bool) -> BoundaryFunction {
    BoundaryFunction::from_fn(tree, generation, |_| random_value(rng, complex))
}

/// Nearest-neighbour operator with every coefficient in `[δ, 1/2 − δ]`.
/// Needs at least two children per non-root type and three at the root.
pub fn very_regular_operator(rng: &mut ChaCha8Rng, tree: &Arc<Tree>, delta: &Rational) -> TransitionOperator {
    let cap = rat(1, 2) - delta;
    let mut draw = |k: usize| -> Vec<Rational> {
        loop {
            let w: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=6)).collect();
            let s: i64 = w.iter().sum();
            let free = int(1) - delta * int(k as i64);
            let row: Vec<Rational> = w.iter().map(|&x| delta + &free * rat(x, s)).collect();
            if row.iter().all(|r| *r <= cap) {
                return row;
            }
        }
    };
    let rows = (0..tree.num_types())
        .map(|t| {
            let mut r = draw(tree.child_types(t).len() + 1);
            let back = r.remove(0);
            Row { back, children: r }
        })
        .collect();
    let root = draw(tree.child_types(tree.root_type()).len());
    TransitionOperator::new(tree.clone(), OperatorKind::NearestNeighbor, rows, Some(root)).unwrap()
}
