//! One function per subcommand. Each returns the checks it ran and the
//! tables to write.

use num::{ToPrimitive, Zero};
use std::collections::{BTreeSet, HashMap};

use martree::dirichlet::{dirichlet_by_first_passage, solve_dirichlet, Contour, StoppedPassage};
use martree::function::TreeFunction;
use martree::measure::{arc_measure_from_q, dist_nu, lift, q_from_arc_measure};
use martree::montecarlo::estimate_hitting;
use martree::operator::{check_harmonic, Region, TransitionOperator};
use martree::passage::{
    check_regularity, descent_probabilities_with, hitting_distribution, kernel_mass, RegularityMode,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use martree::rational::{parse_rational, pow2, real, Rational};
use martree::tree::Vertex;
use martree::universality::{
    build_frequently_universal, disjointness_audit, recheck_certificate, ruler_ell, ruler_prefix, ruler_r,
    TargetFamily, UniversalityCertificate,
};

use crate::error::{CliError, CliResult, Context};
use crate::report::{rational_cols, Outcome, Table};
use crate::scene::Loaded;

/// Largest number of vertices tabulated per table.
pub const TABLE_LIMIT: usize = 200_000;

fn tabulation_depth(s: &Loaded, want: usize) -> usize {
    (0..=want)
        .take_while(|&k| s.tree.ball_size(k).to_usize().is_some_and(|n| n <= TABLE_LIMIT))
        .last()
        .unwrap_or(0)
}

pub fn tree_check(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("tree check");
    let tree = &s.tree;
    let mut levels = Table::new("levels", &["k", "circle", "ball", "front"]);
    let mut enumerated_ok = true;
    for k in 0..=s.depth() {
        let (c, b, f) = (tree.circle_size(k), tree.ball_size(k), tree.front_size(k));
        if c.to_usize().is_some_and(|n| n <= TABLE_LIMIT) {
            enumerated_ok &= tree.circle(k).len() == c.to_usize().unwrap()
                && tree.front(k).len() == f.to_usize().unwrap_or(usize::MAX);
        }
        levels.push(vec![k.to_string(), c.to_string(), b.to_string(), f.to_string()]);
    }
    out.tables.push(levels);
    out.check("counts match enumeration", enumerated_ok, format!("levels 0..={}", s.depth()));
    let lb = tree.linear_branches();
    out.check(
        "linear branches finite",
        lb.all_finite,
        format!("longest within B_D: {}", lb.max_branch_length),
    );
    out.note(format!("{} cone types, working depth {}", tree.num_types(), tree.depth()));
    Ok(out)
}

pub fn measure_build(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("measure build");
    let m = s.measure()?;
    let depth = tabulation_depth(s, s.depth());
    let masses = m.masses(depth);
    let lookup: HashMap<&Vertex, &Rational> = masses.iter().map(|(v, r)| (v, r)).collect();
    let mut table = Table::new("measure", &["vertex", "depth", "mass_num", "mass_den"]);
    for (v, r) in &masses {
        let [n, d] = rational_cols(r);
        table.push(vec![v.to_string(), v.depth().to_string(), n, d]);
    }
    out.tables.push(table);
    let additive = masses.iter().all(|(v, r)| {
        let kids: Vec<_> = (0..).map(|i| v.child(i)).take_while(|w| lookup.contains_key(w)).collect();
        kids.is_empty() || kids.iter().map(|w| lookup[w].clone()).sum::<Rational>() == *r
    });
    out.check("additivity", additive, format!("exact on B_{depth}"));
    match q_from_arc_measure(&m) {
        Ok(q) => {
            let back = arc_measure_from_q(&q).context("measure from operator")?;
            out.check("ν ↔ Q round trip", back == m, "exact");
        }
        Err(e) => out.check("ν ↔ Q round trip", false, e.to_string()),
    }
    if let Some(v) = m.first_zero_mass(depth) {
        out.note(format!("first zero-mass arc: {v}"));
    }
    Ok(out)
}

pub fn operator_solve(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("operator solve");
    let p = s.operator()?;
    let tree = &s.tree;
    let tol = s.task.tol.unwrap_or(1e-10);
    let table = descent_probabilities_with(p, DEFAULT_TOL, DEFAULT_MAX_ITER).context("first-passage fixed point")?;
    out.check(
        "fixed point converged",
        table.residual <= DEFAULT_TOL,
        format!("{} sweeps, residual {:e}", table.iterations, table.residual),
    );
    if table.truncation_dependent {
        out.note("explicit tree: leaves at the working depth absorb the walk");
    }
    let mut types = Table::new("types", &["type", "descent"]);
    for t in tree.reachable_types() {
        types.push(vec![tree.type_name(t).to_string(), table.descent_of_type(t).to_string()]);
    }
    out.tables.push(types);

    let depth = tabulation_depth(s, s.depth());
    let hit = hitting_distribution(&table, depth).context("hitting distribution")?;
    let mut masses = Table::new("hitting", &["vertex", "mass_num", "mass_den", "mass"]);
    let mut front_total = Rational::zero();
    let front: BTreeSet<Vertex> = tree.front(depth).into_iter().collect();
    for (v, r) in hit.masses(depth) {
        if front.contains(&v) {
            front_total += &r;
        }
        let [n, d] = rational_cols(&r);
        masses.push(vec![v.to_string(), n, d, martree::rational::to_f64(&r).to_string()]);
    }
    out.tables.push(masses);
    let defect = (martree::rational::to_f64(&front_total) - 1.0).abs();
    out.check("hitting masses sum to 1", defect <= tol, format!("front of generation {depth}: |Σ − 1| = {defect:e}"));
    let mut worst: f64 = 0.0;
    for v in tree.ball(depth.min(2)) {
        worst = worst.max((kernel_mass(&table, &v).context("Poisson kernel")? - 1.0).abs());
    }
    out.check("Σ k(u) K(v,u) = 1", worst <= tol, format!("max deviation {worst:e} on B_{}", depth.min(2)));

    let mut reg = Table::new(
        "regularity",
        &["mode", "member", "delta_num", "delta_den", "epsilon_num", "epsilon_den", "witness"],
    );
    for mode in [RegularityMode::VeryRegular, RegularityMode::ProductDecay] {
        let r = check_regularity(p, mode);
        let cols = |x: &Option<Rational>| x.as_ref().map(rational_cols).unwrap_or_else(|| [String::new(), String::new()]);
        let [dn, dd] = cols(&r.delta);
        let [en, ed] = cols(&r.epsilon);
        let name = match mode {
            RegularityMode::VeryRegular => "very_regular",
            RegularityMode::ProductDecay => "product_decay",
        };
        reg.push(vec![name.into(), r.is_member.to_string(), dn, dd, en, ed, r.witness.clone()]);
    }
    out.tables.push(reg);
    Ok(out)
}

fn contour(s: &Loaded) -> CliResult<Contour> {
    match &s.task.contour {
        Some(vs) => {
            let vs = vs
                .iter()
                .map(|v| v.parse::<Vertex>().map_err(|e| CliError::Config(e.to_string())))
                .collect::<CliResult<Vec<_>>>()?;
            Contour::new(&s.tree, vs).context("contour")
        }
        None => Contour::circle(&s.tree, s.depth()).context("contour"),
    }
}

pub fn dirichlet_solve(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("dirichlet solve");
    let p = s.operator()?;
    let c = contour(s)?;
    let data: HashMap<Vertex, f64> = c
        .vertices()
        .iter()
        .map(|v| {
            let x = match &s.task.boundary {
                Some(b) => b.get(&v.to_string()).copied().unwrap_or(0.0),
                None => f64::from(u8::from(v.path()[0] == 0)),
            };
            (v.clone(), x)
        })
        .collect();
    let lin = solve_dirichlet(p, &c, &data).context("linear solve")?;
    let sum = dirichlet_by_first_passage(p, &c, &data).context("first-passage summation")?;
    let mut table = Table::new("dirichlet", &["vertex", "role", "linear", "summation"]);
    let mut worst: f64 = 0.0;
    for (v, x) in &lin {
        let role = if c.interior().contains(v) { "interior" } else { "contour" };
        let y = sum.get(v).copied().unwrap_or(*x);
        worst = worst.max((x - y).abs());
        table.push(vec![v.to_string(), role.into(), x.to_string(), y.to_string()]);
    }
    out.tables.push(table);
    out.check("linear solve = U-summation", worst <= s.tol(), format!("max difference {worst:e}"));
    let (lo, hi) = data
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let inside = c.interior().iter().all(|v| lin[v] <= hi + 1e-12 && lin[v] >= lo - 1e-12);
    out.check("maximum principle", inside, format!("contour range [{lo}, {hi}]"));
    out.note(format!("{} interior vertices, {} on the contour", c.interior().len(), c.vertices().len()));
    Ok(out)
}

struct Built {
    q: TransitionOperator,
    m: martree::measure::ArcMeasure,
    targets: TargetFamily,
    h: TreeFunction,
    cert: UniversalityCertificate,
    seed: TreeFunction,
}

fn build(s: &Loaded) -> CliResult<Built> {
    let q = s.operator()?.clone();
    if !q.is_forward_only() {
        return Err(CliError::Config("the universal construction needs a forward_only operator".into()));
    }
    let m = arc_measure_from_q(&q).context("measure induced by the operator")?;
    if let Some(given) = &s.measure {
        if *given != m {
            return Err(CliError::Module {
                context: "scene measure".into(),
                source: martree::Error::MeasureMismatch,
            });
        }
    }
    let value = parse_rational(s.task.seed_value.as_deref().unwrap_or("0")).map_err(|e| CliError::Config(e.to_string()))?;
    let seed = TreeFunction::constant(real(value));
    let targets = TargetFamily::grid(s.tree.clone(), s.tree.depth());
    let steps = s.task.steps.unwrap_or(16);
    let offset = s.task.offset.unwrap_or(1);
    let (h, cert) =
        build_frequently_universal(&q, &m, &seed, offset, &targets, steps).context("frequently universal construction")?;
    Ok(Built {
        q,
        m,
        targets,
        h,
        cert,
        seed,
    })
}

fn certificate_table(cert: &UniversalityCertificate) -> Table {
    let mut t = Table::new(
        "certificate",
        &[
            "k", "r_k", "ell", "target_j", "generation", "dist_nu_num", "dist_nu_den", "dist_exact", "bound_num",
            "bound_den",
        ],
    );
    for st in &cert.steps {
        let [dn, dd] = rational_cols(&st.dist.upper);
        let [bn, bd] = rational_cols(&st.radius);
        t.push(vec![
            st.k.to_string(),
            st.r_k.to_string(),
            st.ell.to_string(),
            st.target_index.to_string(),
            st.generation.to_string(),
            dn,
            dd,
            st.dist.is_exact().to_string(),
            bn,
            bd,
        ]);
    }
    t
}

fn construction_checks(out: &mut Outcome, b: &Built) -> CliResult<()> {
    let failing: Vec<u64> = b.cert.steps.iter().filter(|st| !st.holds()).map(|st| st.k).collect();
    out.check(
        "dist_ν < 2^-ℓ(k) at every step",
        failing.is_empty(),
        if failing.is_empty() { format!("{} steps", b.cert.steps.len()) } else { format!("fails at k = {failing:?}") },
    );
    let report = check_harmonic(&b.q, &b.h, &Region::Everywhere).context("harmonicity")?;
    out.check("harmonic", report.exact, format!("{} local configurations, exact", report.checked));
    out.check(
        "seed kept on B_N",
        b.h.agrees_on(&b.seed, b.cert.offset),
        format!("N = {}", b.cert.offset),
    );
    let again = recheck_certificate(&b.m, &b.h, &b.targets, &b.cert).context("certificate recheck")?;
    let same = again.iter().zip(&b.cert.steps).all(|(d, st)| *d == st.dist);
    out.check("certificate recomputed from the final function", same, "dist_ν per step");
    Ok(())
}

/// Values of `h` on `B_depth`, i.e. the martingale levels `h_0, …, h_depth`.
fn martingale_table(s: &Loaded, h: &TreeFunction) -> CliResult<Table> {
    let mut t = Table::new(
        "martingale",
        &["vertex", "depth", "value_re_num", "value_re_den", "value_im_num", "value_im_den"],
    );
    for v in s.tree.ball(tabulation_depth(s, s.depth())) {
        let x = h.value(&v).context("martingale level")?;
        let [rn, rd] = rational_cols(&x.re);
        let [in_, id] = rational_cols(&x.im);
        t.push(vec![v.to_string(), v.depth().to_string(), rn, rd, in_, id]);
    }
    Ok(t)
}

pub fn universal_build(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("universal build");
    let b = build(s)?;
    construction_checks(&mut out, &b)?;
    out.tables.push(certificate_table(&b.cert));
    out.tables.push(martingale_table(s, &b.h)?);
    out.note(format!("DAG size of h: {} nodes", b.h.size()));
    Ok(out)
}

pub fn universal_audit(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("universal audit");
    let b = build(s)?;
    construction_checks(&mut out, &b)?;
    let steps = b.cert.steps.len() as u64;
    let offset = b.cert.offset;
    let horizon = s.task.horizon.unwrap_or(ruler_r(steps) as usize);
    if offset + horizon > s.tree.depth() {
        return Err(CliError::Config(format!(
            "offset {offset} + horizon {horizon} exceeds the declared depth {}",
            s.tree.depth()
        )));
    }
    let balls = s.task.balls.unwrap_or(3);
    let r = ruler_prefix(steps);
    let mut visits = Table::new("visits", &["ball", "n", "generation", "dist_num", "dist_den", "visited"]);
    let mut density = Table::new(
        "density",
        &["ball", "visits", "scheduled", "lower_num", "lower_den", "upper_num", "upper_den"],
    );
    let mut centers = Vec::new();
    for ball in 1..=balls {
        let center = b.targets.get_index(ball as u64).context("target")?.function;
        let radius = pow2(-(ball as i64));
        let mut hits = BTreeSet::new();
        for n in 1..=horizon {
            let d = dist_nu(&b.m, &lift(&b.h, offset + n).context("lift")?, &center);
            let visited = d.upper < radius;
            if visited {
                hits.insert(n);
            }
            let [dn, dd] = rational_cols(&d.upper);
            visits.push(vec![ball.to_string(), n.to_string(), (offset + n).to_string(), dn, dd, visited.to_string()]);
        }
        let scheduled: BTreeSet<usize> = (1..=steps)
            .filter(|&k| ruler_ell(k) as usize == ball && r[k as usize - 1] as usize <= horizon)
            .map(|k| r[k as usize - 1] as usize)
            .collect();
        out.check(
            &format!("ball {ball} visited on schedule"),
            scheduled.is_subset(&hits),
            format!("{} scheduled, {} observed", scheduled.len(), hits.len()),
        );
        let vd = martree::universality::visit_density(&b.h, &b.m, &center, &radius, horizon, offset).context("visit density")?;
        let [ln, ld] = rational_cols(&vd.lower);
        let [un, ud] = rational_cols(&vd.upper);
        density.push(vec![ball.to_string(), vd.visits.len().to_string(), scheduled.len().to_string(), ln, ld, un, ud]);
        centers.push((center, radius));
    }
    let audit = disjointness_audit(&b.h, &b.m, &centers, horizon, offset).context("disjointness audit")?;
    out.check(
        "disjoint balls never share a visit",
        audit.consistent(),
        format!("{} certified disjoint pairs", audit.disjoint_pairs.len()),
    );
    out.tables.push(certificate_table(&b.cert));
    out.tables.push(visits);
    out.tables.push(density);
    Ok(out)
}

pub fn walk_estimate(s: &Loaded) -> CliResult<Outcome> {
    let mut out = Outcome::new("walk estimate");
    let p = s.operator()?;
    let depth = s.task.depth.unwrap_or(1);
    let walks = s.task.walks.unwrap_or(100_000);
    let cap = s.task.step_cap.unwrap_or(100_000);
    if walks == 0 {
        return Err(CliError::Config("walks must be at least 1".into()));
    }
    let est = estimate_hitting(p, depth, walks, s.seed(), cap).context("Monte Carlo")?;
    // The walk is recorded at its first visit to C_depth, so the analytic
    // counterpart is the walk stopped on that circle.
    let c = Contour::circle(&s.tree, depth).context("recording circle")?;
    let stopped = StoppedPassage::new(p, &c).context("stopped first passage")?;
    let boundary = descent_probabilities_with(p, DEFAULT_TOL, DEFAULT_MAX_ITER).ok();
    let mut table = Table::new(
        "estimate",
        &["vertex", "analytic", "empirical", "count", "stderr", "within_3_sigma", "boundary_mass"],
    );
    let mut bad = Vec::new();
    for v in s.tree.circle(depth) {
        let a = stopped.first_passage(&Vertex::root(), &v).context("first passage")?;
        let (f, se) = (est.frequency(&v), est.stderr(&v));
        let ok = if se > 0.0 { (a - f).abs() <= 3.0 * se } else { (a - f).abs() <= 1e-12 };
        if !ok {
            bad.push(v.to_string());
        }
        let k = boundary
            .as_ref()
            .and_then(|t| t.hitting_mass(&v).ok())
            .map(|k| k.to_string())
            .unwrap_or_default();
        let count = est.counts.get(&v).copied().unwrap_or(0);
        table.push(vec![v.to_string(), a.to_string(), f.to_string(), count.to_string(), se.to_string(), ok.to_string(), k]);
    }
    out.tables.push(table);
    out.check(
        "|analytic − empirical| ≤ 3σ on every arc",
        bad.is_empty(),
        if bad.is_empty() { format!("{walks} walks, seed {}", s.seed()) } else { format!("outside at {}", bad.join(", ")) },
    );
    out.note(format!("escape fraction {} with step cap {cap}", est.escape_fraction()));
    Ok(out)
}

