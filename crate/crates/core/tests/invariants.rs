mod common;

use common::*;
use martree::function::{dist_h, TreeFunction};
use martree::measure::{dist_nu, project_dagger, project_pi};
use martree::montecarlo::{estimate_descent, estimate_hitting};
use martree::operator::TransitionOperator;
use martree::passage::descent_probabilities;
use martree::rational::{int, pow2, Rational};
use martree::tree::{Tree, Vertex};
use martree::universality::{find_decay_chain, ruler_prefix, TargetFamily};
use num::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn small_tree(rng: &mut ChaCha8Rng) -> Arc<Tree> {
    let types = rng.gen_range(1..=3);
    let leaves = rng.gen_bool(0.3);
    let depth = rng.gen_range(2..=6);
    random_automaton(rng, types, 1, 3, leaves, depth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projections_compose(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = small_tree(&mut rng);
        let m = random_measure(&mut rng, &tree);
        let gen = rng.gen_range(0..=tree.depth().min(4));
        let f = random_boundary_function(&mut rng, &tree, gen, true);
        for a in 0..=gen {
            for b in a..=gen {
                let twice = project_pi(&m, &project_pi(&m, &f, b).unwrap(), a).unwrap();
                prop_assert!(twice.same_as(&tree, &project_pi(&m, &f, a).unwrap()));
            }
        }
    }

    #[test]
    fn dist_nu_is_a_bounded_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = small_tree(&mut rng);
        let m = random_measure(&mut rng, &tree);
        let gen = rng.gen_range(0..=tree.depth().min(3));
        let fs: Vec<_> = (0..3).map(|_| random_boundary_function(&mut rng, &tree, gen, true)).collect();
        let d = |i: usize, j: usize| dist_nu(&m, &fs[i], &fs[j]);
        prop_assert_eq!(d(0, 0).upper, int(0));
        prop_assert_eq!(d(0, 1), d(1, 0));
        prop_assert!(d(0, 1).upper <= int(1));
        prop_assert!(d(0, 1).lower <= d(0, 2).upper + d(2, 1).upper);
    }

    #[test]
    fn dist_h_is_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = small_tree(&mut rng);
        let m = random_measure(&mut rng, &tree);
        let gen = rng.gen_range(0..=tree.depth().min(3));
        let hs: Vec<TreeFunction> = (0..3)
            .map(|_| project_dagger(&m, &random_boundary_function(&mut rng, &tree, gen, false)).unwrap())
            .collect();
        let d = |i: usize, j: usize| dist_h(&tree, &hs[i], &hs[j], Some(64)).unwrap();
        prop_assert_eq!(d(0, 0).value.upper, int(0));
        prop_assert_eq!(d(0, 1).value, d(1, 0).value);
        prop_assert!(d(0, 1).value.lower <= d(0, 2).value.upper + d(2, 1).value.upper);
    }

    #[test]
    fn geodesics_are_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = small_tree(&mut rng);
        let ball = tree.ball(tree.depth());
        let u = &ball[rng.gen_range(0..ball.len())];
        let v = &ball[rng.gen_range(0..ball.len())];
        let mut there = tree.geodesic(u, v).unwrap();
        there.reverse();
        prop_assert_eq!(there, tree.geodesic(v, u).unwrap());
        prop_assert_eq!(tree.dist(u, v).unwrap(), u.depth() + v.depth() - 2 * u.confluent(v).depth());
    }

    #[test]
    fn counts_match_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = small_tree(&mut rng);
        for k in 0..=tree.depth() {
            prop_assert_eq!(tree.circle_size(k).to_usize().unwrap(), tree.circle(k).len());
            prop_assert_eq!(tree.front_size(k).to_usize().unwrap(), tree.front(k).len());
            prop_assert_eq!(tree.ball_size(k).to_usize().unwrap(), tree.ball(k).len());
        }
    }

    #[test]
    fn chains_decay(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let types = rng.gen_range(1..=3);
        let tree = random_automaton(&mut rng, types, 2, 3, false, 14);
        let m = random_measure(&mut rng, &tree);
        let q = martree::measure::q_from_arc_measure(&m).unwrap();
        let k = rng.gen_range(1..=4);
        let circle = tree.circle(2);
        let u = &circle[rng.gen_range(0..circle.len())];
        if let Ok(chain) = find_decay_chain(&q, u, k) {
            let ratio: Rational = m.mass(chain.endpoint()).unwrap() / m.mass(u).unwrap();
            prop_assert!(ratio <= pow2(-(k as i64)));
            prop_assert_eq!(chain.len(), k);
        }
    }

    #[test]
    fn ruler_partial_sums(k in 1u64..100_000) {
        let r = ruler_prefix(k);
        prop_assert_eq!(r[k as usize - 1], 2 * k - u64::from(k.count_ones()));
    }

    #[test]
    fn targets_round_trip(j in 1u64..2_000_000) {
        let tree = Arc::new(Tree::binary(5));
        let fam = TargetFamily::grid(tree.clone(), 5);
        let f = fam.get_index(j).unwrap();
        let r = fam.rank(&f.function, 5).unwrap();
        prop_assert!(r <= num::BigUint::from(j));
        prop_assert!(fam.get(&r).unwrap().function.same_as(&tree, &f.function));
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let t = Arc::new(Tree::homogeneous(3, 2, 4));
    let p = TransitionOperator::isotropic(t);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_hitting(&p, 2, 3000, 99, 10_000).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn empirical_descent_matches_the_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let mut tree = random_automaton(&mut rng, 2, 2, 3, false, 30);
        while tree.child_types(tree.root_type()).len() < 3 {
            tree = random_automaton(&mut rng, 2, 2, 3, false, 30);
        }
        let p = very_regular_operator(&mut rng, &tree, &martree::rational::rat(1, 20));
        let table = descent_probabilities(&p).unwrap();
        let v = Vertex::from_path(vec![0, 1]);
        let est = estimate_descent(&p, &v, 25, 20_000, 3, 100_000).unwrap();
        let exact = table.descent(&v).unwrap();
        assert!((est.frequency() - exact).abs() <= 3.0 * est.stderr(), "{} vs {exact}", est.frequency());
    }
}
