//! A countable family of step functions dense in measure among boundary
//! functions, enumerated block by block.
//!
//! Block `b ≥ 1` is indexed by `(L, n)` through the Cantor unpairing of
//! `b − 1` and holds every `A_n`-measurable function whose real and
//! imaginary parts lie on the grid `(1/L!)ℤ ∩ [−L, L]`. Blocks with `n`
//! beyond the family's maximal generation are skipped. Inside a block the
//! front vertices are mixed-radix digits, least significant first, and each
//! coordinate uses the zig-zag order `0, 1, −1, 2, −2, …`, so `f_1 ≡ 0`.

use num::{BigInt, BigUint, Complex, Integer, One, ToPrimitive, Zero};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::BoundaryFunction;
use crate::rational::{Rational, Value};
use crate::tree::{Tree, Vertex};

#[derive(Clone, Debug)]
pub struct Target {
    /// One-based index in the family.
    pub index: BigUint,
    pub function: BoundaryFunction,
}

impl Target {
    pub fn generation(&self) -> usize {
        self.function.generation()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub level: u64,
    pub generation: usize,
    /// Number of targets in earlier blocks.
    pub offset: BigUint,
    pub size: BigUint,
}

/// Inverse of the Cantor pairing `(x, y) ↦ (x+y)(x+y+1)/2 + y`.
fn unpair(z: u64) -> (u64, u64) {
    let w = ((8 * z as u128 + 1) as f64).sqrt() as u64;
    let mut w = (w.saturating_sub(1)) / 2;
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    while w * (w + 1) / 2 > z {
        w -= 1;
    }
    let y = z - w * (w + 1) / 2;
    (w - y, y)
}

fn factorial(l: u64) -> BigInt {
    (1..=l).map(BigInt::from).product()
}

fn zag(d: &BigUint) -> BigInt {
    let (half, odd) = d.div_rem(&BigUint::from(2u8));
    if odd.is_zero() {
        -BigInt::from(half)
    } else {
        BigInt::from(half) + 1
    }
}

fn zig(a: &BigInt) -> BigUint {
    let two = BigInt::from(2);
    let d = if a.sign() == num::bigint::Sign::Plus { a * &two - 1 } else { -a * &two };
    d.to_biguint().expect("nonnegative")
}

#[derive(Clone, Debug)]
pub enum TargetFamily {
    Grid { tree: Arc<Tree>, max_generation: usize },
    List { tree: Arc<Tree>, functions: Vec<BoundaryFunction> },
}

impl TargetFamily {
    pub fn grid(tree: Arc<Tree>, max_generation: usize) -> Self {
        TargetFamily::Grid { tree, max_generation }
    }

    /// Blocks in index order, skipping generations above the maximum.
    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        let (tree, max_generation) = match self {
            TargetFamily::Grid { tree, max_generation } => (Some(tree.clone()), *max_generation),
            TargetFamily::List { .. } => (None, 0),
        };
        let mut offset = BigUint::zero();
        (0u64..)
            .map_while(move |z| tree.as_ref().map(|t| (t.clone(), z)))
            .filter_map(move |(tree, z)| {
                let (x, y) = unpair(z);
                let n = y as usize;
                if n > max_generation {
                    return None;
                }
                let level = x + 1;
                let width = BigUint::from(2 * level) * factorial(level).to_biguint().unwrap() + 1u8;
                let radix = &width * &width;
                let digits = tree.front_size(n).to_u32().expect("front too large to enumerate");
                let size = radix.pow(digits);
                let block = Block {
                    level,
                    generation: n,
                    offset: offset.clone(),
                    size: size.clone(),
                };
                offset += size;
                Some(block)
            })
    }

    /// The `j`-th target, `j ≥ 1`.
    pub fn get(&self, j: &BigUint) -> Result<Target> {
        if j.is_zero() {
            return Err(Error::Malformed("targets are indexed from 1".into()));
        }
        match self {
            TargetFamily::List { functions: fs, .. } => {
                let i = j.to_usize().filter(|&i| i <= fs.len()).ok_or_else(|| {
                    Error::Malformed(format!("target {j} is beyond the {} listed", fs.len()))
                })?;
                Ok(Target {
                    index: j.clone(),
                    function: fs[i - 1].clone(),
                })
            }
            TargetFamily::Grid { tree, .. } => {
                let block = self
                    .blocks()
                    .find(|b| &b.offset + &b.size >= *j)
                    .expect("blocks are unbounded");
                let mut idx = j - &block.offset - 1u8;
                let fact = factorial(block.level);
                let width = BigUint::from(2 * block.level) * fact.to_biguint().unwrap() + 1u8;
                let radix = &width * &width;
                let values: Vec<(Vertex, Value)> = tree
                    .front(block.generation)
                    .into_iter()
                    .map(|v| {
                        let (rest, digit) = idx.div_rem(&radix);
                        idx = rest;
                        let (im, re) = digit.div_rem(&width);
                        let part = |d: &BigUint| Rational::new(zag(d), fact.clone());
                        (v, Complex::new(part(&re), part(&im)))
                    })
                    .collect();
                let map = values.into_iter().collect();
                Ok(Target {
                    index: j.clone(),
                    function: BoundaryFunction::from_map(tree, block.generation, &map)?,
                })
            }
        }
    }

    pub fn get_index(&self, j: u64) -> Result<Target> {
        self.get(&BigUint::from(j))
    }

    /// Smallest index of a target equal to `f` on every arc, searching grid
    /// levels up to `max_level`.
    pub fn rank(&self, f: &BoundaryFunction, max_level: u64) -> Option<BigUint> {
        match self {
            TargetFamily::List { tree, functions } => functions
                .iter()
                .position(|g| g.same_as(tree, f))
                .map(|i| BigUint::from(i + 1)),
            TargetFamily::Grid { tree, max_generation } => {
                let values = f.values(tree).ok()?;
                let needed = (1..=max_level).find(|&l| values.iter().all(|(_, x)| on_grid(x, l)))?;
                // The block (needed, generation of f) contains f, so the
                // search never passes its diagonal.
                let last = (max_level - 1) as usize + f.generation().min(*max_generation);
                for block in self.blocks() {
                    if (block.level - 1) as usize + block.generation > last {
                        return None;
                    }
                    if block.level < needed || block.level > max_level {
                        continue;
                    }
                    if let Some(i) = encode(tree, f, &block) {
                        return Some(&block.offset + i + 1u8);
                    }
                }
                None
            }
        }
    }
}

/// Position of `f` inside `block`, if it belongs to it.
fn encode(tree: &Tree, f: &BoundaryFunction, block: &Block) -> Option<BigUint> {
    let n = block.generation;
    let fact = factorial(block.level);
    let width = BigUint::from(2 * block.level) * fact.to_biguint().unwrap() + 1u8;
    let radix = &width * &width;
    let deep = n.max(f.generation());
    let front = tree.front(n);
    let mut vals = Vec::with_capacity(front.len());
    for v in &front {
        let mut w = v.clone();
        while w.depth() < deep && !tree.is_terminal(&w).ok()? {
            w = w.child(0);
        }
        vals.push(f.value(&w).ok()?);
    }
    if !vals.iter().all(|x| on_grid(x, block.level)) {
        return None;
    }
    let map = front.into_iter().zip(vals.iter().cloned()).collect();
    let g = BoundaryFunction::from_map(tree, n, &map).ok()?;
    if !g.same_as(tree, f) {
        return None;
    }
    let mut idx = BigUint::zero();
    let mut scale = BigUint::one();
    let coord = |r: &Rational| zig(&(r * Rational::from_integer(fact.clone())).to_integer());
    for x in vals {
        idx += &scale * (coord(&x.re) + &width * coord(&x.im));
        scale *= &radix;
    }
    Some(idx)
}

fn on_grid(x: &Value, level: u64) -> bool {
    let fact = Rational::from_integer(factorial(level));
    let bound = Rational::from_integer(BigInt::from(level));
    [&x.re, &x.im]
        .iter()
        .all(|r| (*r * &fact).is_integer() && num::Signed::abs(*r) <= bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, value};

    fn family(d: usize) -> TargetFamily {
        TargetFamily::grid(Arc::new(Tree::binary(d)), d)
    }

    #[test]
    fn unpairing_walks_the_diagonals() {
        let got: Vec<_> = (0..6).map(unpair).collect();
        assert_eq!(got, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for z in 0..5000u64 {
            let (x, y) = unpair(z);
            assert_eq!((x + y) * (x + y + 1) / 2 + y, z);
        }
    }

    #[test]
    fn first_targets_are_constants() {
        let f = family(6);
        let t = f.get_index(1).unwrap();
        assert_eq!(t.generation(), 0);
        assert_eq!(t.function.value(&Vertex::root()).unwrap(), Value::zero());
        let expected = [
            value(0, 1),
            value(1, 1),
            value(-1, 1),
            Complex::new(int(0), int(1)),
            Complex::new(int(1), int(1)),
        ];
        for (j, e) in expected.iter().enumerate() {
            let t = f.get_index(j as u64 + 1).unwrap();
            assert_eq!(&t.function.value(&Vertex::root()).unwrap(), e);
        }
        let sizes: Vec<u64> = f.blocks().take(3).map(|b| b.size.to_u64().unwrap()).collect();
        assert_eq!(sizes, vec![9, 81, 81]);
    }

    #[test]
    fn rank_finds_the_first_occurrence() {
        // Blocks overlap (a grid contains the coarser ones), so the rank of
        // f_j is the first index carrying the same function.
        let f = family(6);
        let tree = Tree::binary(6);
        assert_eq!(f.rank(&f.get_index(10).unwrap().function, 6), Some(BigUint::from(1u8)));
        for j in (1..400u64).chain([5_000, 123_456, 9_999_999]) {
            let t = f.get_index(j).unwrap();
            let r = f.rank(&t.function, 6).unwrap();
            assert!(r <= BigUint::from(j));
            assert!(f.get(&r).unwrap().function.same_as(&tree, &t.function), "j = {j}");
            let finer = t.function.refine(t.generation() + 1).unwrap();
            let i = f.rank(&finer, 6).unwrap();
            assert!(f.get(&i).unwrap().function.same_as(&tree, &t.function));
        }
    }
}
