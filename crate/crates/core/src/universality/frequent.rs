//! The ruler-scheduled construction of a frequently universal boundary
//! martingale and the audits of its visits.

use num::BigUint;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::function::{BoundaryFunction, TreeFunction};
use crate::measure::{dist_nu, lift, ArcMeasure};
use crate::operator::TransitionOperator;
use crate::rational::{int, pow2, rat, Bounds, Rational};

use super::extend::{extend_matching_in, Generations};
use super::ruler::{ruler_ell, ruler_r};
use super::targets::TargetFamily;

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateStep {
    pub k: u64,
    pub r_k: u64,
    pub ell: u32,
    pub target_index: BigUint,
    /// `N + r_k`.
    pub generation: usize,
    /// `dist_ν(h*_{N + r_k}, f_ℓ)`.
    pub dist: Bounds,
    /// `2^{−ℓ}`.
    pub radius: Rational,
}

impl CertificateStep {
    pub fn holds(&self) -> bool {
        self.dist.upper < self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniversalityCertificate {
    /// Radius `N` of the ball on which the seed is kept.
    pub offset: usize,
    pub steps: Vec<CertificateStep>,
}

impl UniversalityCertificate {
    pub fn holds(&self) -> bool {
        self.steps.iter().all(CertificateStep::holds)
    }
}

/// Runs `K` steps of the ruler schedule: step `k` extends from generation
/// `N + r_{k−1}` to exactly `N + r_k` using a chain of length `ℓ(k)` and
/// lands within `2^{−ℓ(k)}` of `f_{ℓ(k)}`.
pub fn build_frequently_universal(
    q: &TransitionOperator,
    m: &ArcMeasure,
    seed: &TreeFunction,
    n: usize,
    targets: &TargetFamily,
    steps: u64,
) -> Result<(TreeFunction, UniversalityCertificate)> {
    let depth = q.tree().depth();
    let needed = n + ruler_r(steps) as usize;
    if needed > depth {
        return Err(Error::DepthBudgetExceeded { needed, available: depth });
    }
    let mut h = seed.clone();
    let mut cert = UniversalityCertificate {
        offset: n,
        steps: Vec::new(),
    };
    let mut r = 0u64;
    for k in 1..=steps {
        let ell = ruler_ell(k);
        let target = targets.get_index(u64::from(ell))?;
        let from = n + r as usize;
        r += u64::from(ell);
        let to = n + r as usize;
        let allowed = Generations::Only(BTreeSet::from([to]));
        let ext = extend_matching_in(q, m, &h, from, &target, 1u64 << (ell - 1), &allowed)?;
        cert.steps.push(CertificateStep {
            k,
            r_k: r,
            ell,
            target_index: target.index.clone(),
            generation: ext.generation,
            dist: ext.dist,
            radius: pow2(-i64::from(ell)),
        });
        h = ext.function;
    }
    Ok((h, cert))
}

/// Recomputes every step of a certificate against the final function.
pub fn recheck_certificate(
    m: &ArcMeasure,
    h: &TreeFunction,
    targets: &TargetFamily,
    cert: &UniversalityCertificate,
) -> Result<Vec<Bounds>> {
    cert.steps
        .iter()
        .map(|s| {
            let f = targets.get(&s.target_index)?;
            Ok(dist_nu(m, &lift(h, s.generation)?, &f.function))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisitDensity {
    /// `n ∈ [1, horizon]` with `dist_ν(h*_{offset+n}, center) < radius`
    /// certified by the upper enclosure.
    pub visits: BTreeSet<usize>,
    /// `min |visits ∩ [1, M]| / M` over `M ∈ [⌈horizon/2⌉, horizon]`.
    pub lower: Rational,
    /// The corresponding maximum.
    pub upper: Rational,
}

/// Visit set and density estimates of the lifts of `h` to the ball of
/// radius `radius` around `center`, generations counted from `offset`.
pub fn visit_density(
    h: &TreeFunction,
    m: &ArcMeasure,
    center: &BoundaryFunction,
    radius: &Rational,
    horizon: usize,
    offset: usize,
) -> Result<VisitDensity> {
    if horizon == 0 {
        return Err(Error::Malformed("horizon must be positive".into()));
    }
    let mut visits = BTreeSet::new();
    for n in 1..=horizon {
        let d = dist_nu(m, &lift(h, offset + n)?, center);
        if d.upper < *radius {
            visits.insert(n);
        }
    }
    let ratios: Vec<Rational> = (horizon.div_ceil(2)..=horizon)
        .map(|big_m| rat(visits.range(..=big_m).count() as i64, big_m as i64))
        .collect();
    Ok(VisitDensity {
        visits,
        lower: ratios.iter().min().cloned().unwrap_or_else(|| int(0)),
        upper: ratios.iter().max().cloned().unwrap_or_else(|| int(0)),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisjointnessAudit {
    pub visits: Vec<BTreeSet<usize>>,
    /// Pairs `(i, j)` of balls certified disjoint: `dist(c_i, c_j) ≥ r_i + r_j`.
    pub disjoint_pairs: Vec<(usize, usize)>,
    /// `(i, j, n)` where disjoint balls `i` and `j` were both visited at `n`.
    pub conflicts: Vec<(usize, usize, usize)>,
}

impl DisjointnessAudit {
    pub fn consistent(&self) -> bool {
        self.conflicts.is_empty()
    }
}

/// Checks that no generation is counted as a visit to two balls that the
/// triangle inequality forces apart.
pub fn disjointness_audit(
    h: &TreeFunction,
    m: &ArcMeasure,
    balls: &[(BoundaryFunction, Rational)],
    horizon: usize,
    offset: usize,
) -> Result<DisjointnessAudit> {
    let visits = balls
        .iter()
        .map(|(c, r)| visit_density(h, m, c, r, horizon, offset).map(|v| v.visits))
        .collect::<Result<Vec<_>>>()?;
    let mut disjoint_pairs = Vec::new();
    let mut conflicts = Vec::new();
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let d = dist_nu(m, &balls[i].0, &balls[j].0);
            if d.lower >= &balls[i].1 + &balls[j].1 {
                disjoint_pairs.push((i, j));
                conflicts.extend(visits[i].intersection(&visits[j]).map(|&n| (i, j, n)));
            }
        }
    }
    Ok(DisjointnessAudit {
        visits,
        disjoint_pairs,
        conflicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::arc_measure_from_q;
    use crate::operator::{check_harmonic, Region};
    use crate::rational::value;
    use crate::tree::Tree;
    use std::sync::Arc;

    #[test]
    fn short_schedule_on_the_binary_tree() {
        let tree = Arc::new(Tree::binary(12));
        let q = TransitionOperator::uniform_forward(tree.clone());
        let m = arc_measure_from_q(&q).unwrap();
        let targets = TargetFamily::grid(tree.clone(), 12);
        let seed = TreeFunction::constant(value(5, 1));
        let (h, cert) = build_frequently_universal(&q, &m, &seed, 2, &targets, 4).unwrap();
        assert!(cert.holds());
        let gens: Vec<usize> = cert.steps.iter().map(|s| s.generation).collect();
        assert_eq!(gens, vec![3, 5, 6, 9]);
        assert!(h.agrees_on(&seed, 2));
        assert!(check_harmonic(&q, &h, &Region::Everywhere).unwrap().exact);
        let again = recheck_certificate(&m, &h, &targets, &cert).unwrap();
        assert_eq!(again, cert.steps.iter().map(|s| s.dist.clone()).collect::<Vec<_>>());
        assert!(matches!(
            build_frequently_universal(&q, &m, &seed, 2, &targets, 8),
            Err(Error::DepthBudgetExceeded { needed: 17, available: 12 })
        ));
    }
}
