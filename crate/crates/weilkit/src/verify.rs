//! The acceptance suite: twelve end-to-end checks with fixed seeds and
//! tolerances. `weilkit verify` and the `acceptance` test target both run it.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weilkit_core::atlas::{BaseMetric, Chart, TransitionMap};
use weilkit_core::dynamics::{self, DiffeoPair, FixGrid, FIXED_TOL};
use weilkit_core::lifting::{self, functoriality_check, lift_path, BaseCurve, MapSpec, Semantics};
use weilkit_core::smooth_expr::{eval_real, partial_derivatives};
use weilkit_core::topology::bundle_cohomology_check;
use weilkit_core::weighted_metric::Weights;
use weilkit_core::{AlgebraElement, APoint, BundleMetric, Expr, Manifold, MetricConfig, Result, WeilAlgebra};

pub const TRANSITION_TOL: f64 = 1e-12;
pub const TRIANGLE_TOL: f64 = 1e-9;
pub const RATIO_SPREAD: f64 = 50.0;
pub const SQUARE_ZERO_LEIBNIZ_TOL: f64 = 1e-12;
pub const FUNCTORIALITY_TOL: f64 = 1e-10;
pub const GAP_SLACK: f64 = 1e-9;
pub const CAUCHY_TOL: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-6;

pub const GRADIENT_CORPUS: &str = include_str!("../data/gradient_corpus.txt");

const SEED: u64 = 0x00c0_ffee;

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Check = fn() -> Result<(bool, String)>;

pub const CRITERIA: [(u8, &str, Check, Option<f64>); 12] = [
    (1, "transition prolongation", transition_prolongation, Some(1.0)),
    (2, "algebra laws", algebra_laws, Some(1.0)),
    (3, "metric axioms", metric_axioms, Some(10.0)),
    (4, "norm equivalence", norm_equivalence, None),
    (5, "path lifting", path_lifting, None),
    (6, "rotation and reflection scans", dynamics_scans, Some(30.0)),
    (7, "fixed fibres of flattened maps", flat_fixed_fibres, None),
    (8, "functoriality", functoriality, None),
    (9, "pointwise gaps of rotations", rotation_gaps, None),
    (10, "bundle cohomology catalog", cohomology_catalog, Some(5.0)),
    (11, "Cauchy sequences", cauchy_sequences, None),
    (12, "gradient cross-check", gradient_cross_check, None),
];

/// Runs one criterion. The time limit, where there is one, is part of the
/// verdict; errors count as failures.
pub fn run(id: u8) -> CriterionResult {
    let (id, name, check, limit) = CRITERIA[usize::from(id) - 1];
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        let secs = elapsed.as_secs_f64();
        let _ = write!(detail, "; {secs:.3}s of {limit}s");
        passed &= secs < limit;
    }
    CriterionResult { id, name, passed, detail, elapsed }
}

pub fn run_all() -> Vec<CriterionResult> {
    CRITERIA.iter().map(|c| run(c.0)).collect()
}

/// One line per criterion.
pub fn line(r: &CriterionResult) -> String {
    format!("[{}] {:>2} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name, r.detail)
}

pub fn table(results: &[CriterionResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&line(r));
        out.push('\n');
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let _ = writeln!(out, "{passed}/{} criteria passed", results.len());
    out
}

fn alg(gens: &[&str], rels: &[&str]) -> Arc<WeilAlgebra> {
    Arc::new(WeilAlgebra::from_strs(gens, rels).expect("valid presentation"))
}

fn builtin(name: &str) -> Arc<Manifold> {
    Arc::new(Manifold::builtin(name).expect("builtin manifold"))
}

fn sample_points(m: &Arc<Manifold>, a: &Arc<WeilAlgebra>, n: usize, rng: &mut ChaCha8Rng) -> Vec<APoint> {
    (0..n).map(|_| APoint::sample(m.clone(), a.clone(), 1.0, rng)).collect()
}

// 1 ----------------------------------------------------------------------

/// The plane with charts `(x, y)` and `(u, v) = (x^2, y + x)`, over `x > 0`.
pub fn square_chart_plane() -> Result<Manifold> {
    let c1 = Chart::new("C1", &["x", "y"], &["x > 0"])?;
    let c2 = Chart::new("C2", &["u", "v"], &["u > 0"])?;
    Manifold::new(
        "square-chart plane",
        vec![c1, c2],
        vec![
            TransitionMap::new("C1", "C2", &["x^2", "y + x"])?,
            TransitionMap::new("C2", "C1", &["sqrt(u)", "v - sqrt(u)"])?,
        ],
        BaseMetric::Euclidean(2),
        None,
        false,
    )
}

fn transition_prolongation() -> Result<(bool, String)> {
    let m = Arc::new(square_chart_plane()?);
    let a = alg(&["e"], &["e^3"]);
    let t = &m.transitions[0];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x0 = rng.random_range(0.05..3.0);
        let [x1, x2, y0, y1, y2]: [f64; 5] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let xi = APoint::new(
            m.clone(),
            a.clone(),
            "C1",
            &[AlgebraElement::new(a.clone(), vec![x0, x1, x2])?, AlgebraElement::new(a.clone(), vec![y0, y1, y2])?],
        )?;
        let image = lifting::prolong_transition(&xi, t)?;
        let expected = [x0 * x0, 2.0 * x0 * x1, 2.0 * x0 * x2 + x1 * x1, y0 + x0, y1 + x1, y2 + x2];
        for (got, want) in image.coeffs().iter().zip(expected) {
            worst = worst.max((got - want).abs());
        }
    }
    Ok((worst <= TRANSITION_TOL, format!("max abs error {worst:.3e} over 1000 points (tol {TRANSITION_TOL:e})")))
}

// 2 ----------------------------------------------------------------------

/// The algebras of the worked examples: `R[e]/(e^2)`, `R[e]/(e^3)`, the
/// torus algebra and the tensor algebra used over `CP^1`.
pub fn example_algebras() -> Vec<(&'static str, Arc<WeilAlgebra>)> {
    let a1 = alg(&["e"], &["e^2"]);
    let tensor = Arc::new(a1.tensor(&alg(&["f"], &["f^2"])).expect("tensor of Weil algebras"));
    vec![
        ("A1", a1),
        ("A2", alg(&["e"], &["e^3"])),
        ("T2", alg(&["e1", "e2"], &["e1^2", "e2^2", "e1*e2"])),
        ("CP1", tensor),
    ]
}

fn algebra_laws() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, a) in example_algebras() {
        let n = a.dim();
        let b: Vec<AlgebraElement> = (0..n).map(|i| AlgebraElement::basis(a.clone(), i)).collect();
        let mut products = 0usize;
        for i in 0..n {
            for j in 0..n {
                let ij = b[i].mul(&b[j])?;
                ok &= ij.coeffs() == b[j].mul(&b[i])?.coeffs();
                for bk in &b {
                    ok &= ij.mul(bk)?.coeffs() == b[i].mul(&b[j].mul(bk)?)?.coeffs();
                    products += 1;
                }
            }
        }
        let k = a.order() as usize;
        // every product of k + 1 nilpotent basis elements vanishes, some product of k does not
        let mut power = vec![AlgebraElement::one(a.clone())];
        for _ in 0..=k {
            let mut next = Vec::new();
            for p in &power {
                for bi in &b[1..] {
                    next.push(p.mul(bi)?);
                }
            }
            power = next;
        }
        ok &= power.iter().all(|p| p.coeffs().iter().all(|&c| c == 0.0));
        notes.push(format!("{name}: dim {n}, k {k}, {products} triples"));
    }
    Ok((ok, notes.join(", ")))
}

// 3 ----------------------------------------------------------------------

fn axiom_bundles() -> Vec<(&'static str, Arc<Manifold>, Arc<WeilAlgebra>)> {
    vec![("S1", builtin("S1"), alg(&["e"], &["e^3"])), ("T2", builtin("T2"), alg(&["e1", "e2"], &["e1^2", "e2^2", "e1*e2"]))]
}

fn metric_axioms() -> Result<(bool, String)> {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, m, a) in axiom_bundles() {
        let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default())?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
        let (mut symmetric, mut violation, mut smallest) = (true, 0.0f64, f64::INFINITY);
        for _ in 0..1000 {
            let p = sample_points(&m, &a, 3, &mut rng);
            let sig: Vec<_> = p.iter().map(|x| metric.signature(x)).collect::<Result<_>>()?;
            let d = |i: usize, j: usize| metric.distance_with(&p[i], &sig[i], &p[j], &sig[j]);
            let (d01, d10, d12, d02) = (d(0, 1)?, d(1, 0)?, d(1, 2)?, d(0, 2)?);
            symmetric &= d01 == d10;
            violation = violation.max(d02 - d01 - d12);
            // a second jet over the same base point, differing in one coefficient
            let mut coeffs = p[0].coeffs().to_vec();
            let l = a.dim();
            let slot = rng.random_range(0..coeffs.len() / l) * l + rng.random_range(1..l);
            coeffs[slot] += rng.random_range(0.01..1.0);
            let rows: Vec<Vec<f64>> = coeffs.chunks(l).map(<[f64]>::to_vec).collect();
            let q = APoint::from_real_coords(m.clone(), a.clone(), p[0].chart_id(), &weilkit_core::RealCoords::from_rows(&rows)?)?;
            smallest = smallest.min(metric.distance(&p[0], &q)?);
            symmetric &= metric.distance(&p[0], &p[0])? == 0.0;
        }
        ok &= symmetric && violation <= TRIANGLE_TOL && smallest > 0.0;
        notes.push(format!(
            "{name}: symmetric {symmetric}, worst triangle excess {violation:.2e}, min separation {smallest:.3e}"
        ));
    }
    Ok((ok, notes.join("; ")))
}

// 4 ----------------------------------------------------------------------

fn norm_equivalence() -> Result<(bool, String)> {
    let configs = [
        ("S1 jets(2)", builtin("S1"), alg(&["e"], &["e^3"])),
        ("S1 jets(3)", builtin("S1"), alg(&["e"], &["e^4"])),
        ("T2 order 2", builtin("T2"), Arc::new(WeilAlgebra::truncated(&["e1".into(), "e2".into()], 2)?)),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, m, a) in configs {
        let unit = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default())?;
        let fact = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default().with_weights(Weights::Factorial))?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..1000 {
            let p = sample_points(&m, &a, 2, &mut rng);
            let r = fact.distance(&p[0], &p[1])? / unit.distance(&p[0], &p[1])?;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        ok &= lo > 0.0 && hi / lo <= RATIO_SPREAD;
        notes.push(format!("{name}: C1 {lo:.4}, C2 {hi:.4}, C2/C1 {:.3}", hi / lo));
    }
    Ok((ok, notes.join("; ")))
}

// 5 ----------------------------------------------------------------------

fn path_lifting() -> Result<(bool, String)> {
    let s1 = builtin("S1");
    let mut ok = true;
    let mut notes = Vec::new();
    let x = Expr::var("t");
    let (f, g, h) = (x.clone().sin() + x.clone() * x.clone(), x.clone().cos(), x.exp());
    for (name, a) in [("A1", alg(&["e"], &["e^2"])), ("A2", alg(&["e"], &["e^3"]))] {
        let metric = BundleMetric::new(s1.clone(), a.clone(), MetricConfig::default())?;
        let point = |t: f64, tail: &[f64]| -> Result<APoint> {
            let mut c = vec![t];
            c.extend_from_slice(&tail[..a.dim() - 1]);
            APoint::new(s1.clone(), a.clone(), "U", &[AlgebraElement::new(a.clone(), c)?])
        };
        // one pair inside chart U, one across the seam at 0
        let pairs = [(point(0.5, &[1.0, -0.5])?, point(2.0, &[-0.3, 0.8])?), (point(6.0, &[0.4, 0.2])?, point(0.3, &[1.2, -1.0])?)];
        let mut constant = 0.0f64;
        let mut leibniz = 0.0f64;
        for (e1, e2) in &pairs {
            let curve = BaseCurve::chord(s1.clone(), &e1.project(), &e2.project())?;
            for semantics in [Semantics::Coordinate, Semantics::Functional] {
                let path = lift_path(e1, e2, curve.clone(), semantics)?;
                ok &= path.point(0.0)?.coeffs() == e1.coeffs() && path.point(1.0)?.coeffs() == e2.coeffs();
                if semantics == Semantics::Functional {
                    for i in 0..=100 {
                        let t = f64::from(i) / 100.0;
                        let chart = s1.chart(path.chart_at(t)?);
                        let rename = |e: &Expr| {
                            e.substitute(&BTreeMap::from([("t".to_string(), Expr::var(&chart.coords[0]))]))
                        };
                        leibniz = leibniz.max(path.leibniz_residual(t, &rename(&f), &rename(&g), &rename(&h), 0.5)?);
                    }
                }
            }
            let path = lift_path(e1, e2, curve, Semantics::Coordinate)?;
            let offsets: Vec<f64> = (1..=12).map(|j| 0.5f64.powi(j)).collect();
            for s in [0.0, 0.25, 0.5, 0.75] {
                let r = path.continuity(&metric, s, &offsets)?;
                let nearest = r.samples.last().map_or(f64::INFINITY, |&(_, d)| d);
                ok &= r.constant.is_finite() && nearest <= r.constant * 0.5f64.powi(12) && nearest < 1e-2;
                constant = constant.max(r.constant);
            }
        }
        if a.is_square_zero() {
            ok &= leibniz <= SQUARE_ZERO_LEIBNIZ_TOL;
        }
        notes.push(format!("{name}: fitted C {constant:.4}, functional Leibniz residual {leibniz:.3e}"));
    }
    Ok((ok, format!("endpoints exact; {}", notes.join("; "))))
}

// 6 ----------------------------------------------------------------------

/// The `629 x 41` grid over `[0, 2pi] x [-1, 1]` in chart `U`.
pub fn circle_grid() -> FixGrid {
    FixGrid { chart: 0, base: vec![(0.0, TAU, 629)], nil: vec![(-1.0, 1.0, 41)] }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn dynamics_scans() -> Result<(bool, String)> {
    let s1 = builtin("S1");
    let a = alg(&["e"], &["e^2"]);
    let metric = BundleMetric::new(s1.clone(), a.clone(), MetricConfig::default())?;
    let grid = circle_grid();
    let rot = dynamics::fixed_scan(&DiffeoPair::rotation(s1.clone(), 0.5)?, &metric, &grid, FIXED_TOL)?;
    let refl = dynamics::fixed_scan(&DiffeoPair::reflection(s1.clone())?, &metric, &grid, FIXED_TOL)?;
    let step = grid.step();
    let mut found: Vec<(f64, f64)> =
        refl.clusters.iter().map(|c| (c.representative.coeffs()[0], c.representative.coeffs()[1])).collect();
    found.sort_by(|p, q| p.0.total_cmp(&q.0));
    let near = |p: (f64, f64), base: f64| angle_gap(p.0, base) <= step && p.1.abs() <= step;
    let two = found.len() == 2 && near(found[0], 0.0) && near(found[1], PI);
    let ok = rot.fixed.is_empty() && two;
    Ok((
        ok,
        format!(
            "rotation: {} fixed of {} cells; reflection clusters {:?}",
            rot.fixed.len(),
            rot.cells,
            found.iter().map(|(t, v)| format!("({t:.4}, {v:.4})")).collect::<Vec<_>>()
        ),
    ))
}

// 7 ----------------------------------------------------------------------

pub const BUMP: (f64, f64, f64) = (1.0, 2.0, 0.3);

fn flat_fixed_fibres() -> Result<(bool, String)> {
    let s1 = builtin("S1");
    let (lo, hi, delta) = BUMP;
    let bump = DiffeoPair::bump(s1.clone(), lo, hi, delta)?;
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, a) in [("A1", alg(&["e"], &["e^2"])), ("A2", alg(&["e"], &["e^3"]))] {
        let metric = BundleMetric::new(s1.clone(), a.clone(), MetricConfig::default())?;
        let lifted = bump.lift(&a);
        // forward: every grid point over W = S1 \ (lo, hi) is fixed
        let (mut checked, mut worst) = (0usize, 0.0f64);
        let nodes: Vec<f64> = (0..629).map(|i| TAU * f64::from(i) / 628.0).filter(|t| *t <= lo || *t >= hi).collect();
        let nil: Vec<f64> = (0..41).map(|j| -1.0 + 2.0 * f64::from(j) / 40.0).collect();
        for &t in &nodes {
            for &v in &nil {
                let mut c = vec![t, v];
                c.resize(a.dim(), 0.5 * v);
                let xi = APoint::new(s1.clone(), a.clone(), "U", &[AlgebraElement::new(a.clone(), c)?])?;
                worst = worst.max(metric.distance(&lifted.apply(&xi)?, &xi)?);
                checked += 1;
            }
        }
        ok &= worst <= FIXED_TOL;
        notes.push(format!("{name}: {checked} points over W, max displacement {worst:.2e}"));
    }
    // converse: fixed points of any scan sit over fixed base points
    let a = alg(&["e"], &["e^2"]);
    let metric = BundleMetric::new(s1.clone(), a, MetricConfig::default())?;
    let mut residual = 0.0f64;
    let mut fixed = 0usize;
    for phi in [DiffeoPair::rotation(s1.clone(), 0.5)?, DiffeoPair::reflection(s1.clone())?, bump] {
        let rep = dynamics::fixed_scan(&phi, &metric, &circle_grid(), FIXED_TOL)?;
        residual = residual.max(rep.base_residual);
        fixed += rep.fixed.len();
    }
    ok &= residual <= FIXED_TOL;
    notes.push(format!("converse over {fixed} fixed A-points: max base displacement {residual:.2e}"));
    Ok((ok, notes.join("; ")))
}

// 8 ----------------------------------------------------------------------

/// Random shears `(x + p(y), y)` and `(x, y + q(x))` with cubic `p`, `q`.
fn random_shears(rng: &mut ChaCha8Rng, r2: &Arc<Manifold>) -> Result<(MapSpec, MapSpec)> {
    let mut cubic = |v: &str| {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        format!("{} + {}*{v} + {}*{v}^2 + {}*{v}^3", c[0], c[1], c[2], c[3])
    };
    let (p, q) = (cubic("y"), cubic("x"));
    let phi = MapSpec::from_strs(r2.clone(), r2.clone(), "U", &[&format!("x + {p}"), "y"])?;
    let psi = MapSpec::from_strs(r2.clone(), r2.clone(), "U", &["x", &format!("y + {q}")])?;
    Ok((phi, psi))
}

fn functoriality() -> Result<(bool, String)> {
    let r2 = builtin("R2");
    let a = alg(&["e"], &["e^3"]);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let mut worst = 0.0f64;
    let pairs = 10;
    for _ in 0..pairs {
        let (phi, psi) = random_shears(&mut rng, &r2)?;
        let pts = sample_points(&r2, &a, 200, &mut rng);
        worst = worst.max(functoriality_check(&phi.lift(a.clone()), &psi.lift(a.clone()), &pts)?);
    }
    Ok((worst <= FUNCTORIALITY_TOL, format!("max deviation {worst:.3e} over {pairs} map pairs x 200 points")))
}

// 9 ----------------------------------------------------------------------

fn rotation_gaps() -> Result<(bool, String)> {
    let s1 = builtin("S1");
    let a = alg(&["e"], &["e^2"]);
    let metric = BundleMetric::new(s1.clone(), a.clone(), MetricConfig::default())?;
    let seq = (1..=100).map(|i| DiffeoPair::rotation(s1.clone(), 1.0 / f64::from(i))).collect::<Result<Vec<_>>>()?;
    let samples = dynamics::zero_section_samples(&s1, &a, 64, SEED + 9);
    let rep = dynamics::continuity_probe(&seq, &DiffeoPair::identity(s1.clone()), &metric, &samples, 100, SEED + 9, 1e-2)?;
    let worst = rep.rows.iter().map(|r| r.gap - 1.0 / r.index as f64).fold(f64::NEG_INFINITY, f64::max);
    let ok = worst <= GAP_SLACK && rep.monotone;
    Ok((
        ok,
        format!(
            "max gap - 1/i = {worst:.2e} over 64 zero-section samples; monotone {}; gap(100) = {:.6}",
            rep.monotone,
            rep.rows.last().map_or(f64::NAN, |r| r.gap)
        ),
    ))
}

// 10 ---------------------------------------------------------------------

fn cohomology_catalog() -> Result<(bool, String)> {
    let algebras = example_algebras();
    let get = |n: &str| algebras.iter().find(|(name, _)| *name == n).expect("listed algebra").1.clone();
    let cases = [
        ("S2", get("A1"), vec![1, 0, 1]),
        ("T2", get("T2"), vec![1, 2, 1]),
        ("S1", Arc::new(WeilAlgebra::real()), vec![1, 1]),
        ("CP1", get("CP1"), vec![1, 0, 1]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, a, want) in cases {
        let rep = bundle_cohomology_check(name, &a)?;
        ok &= rep.bundle_betti == want && rep.matches_expected;
        notes.push(format!("{name}: {:?}", rep.bundle_betti));
    }
    Ok((ok, notes.join(", ")))
}

// 11 ---------------------------------------------------------------------

fn cauchy_sequences() -> Result<(bool, String)> {
    let s1 = builtin("S1");
    let a = alg(&["e"], &["e^3"]);
    let metric = BundleMetric::new(s1.clone(), a.clone(), MetricConfig::default())?;
    let point = |c: Vec<f64>| APoint::new(s1.clone(), a.clone(), "U", &[AlgebraElement::new(a.clone(), c)?]);
    let limit = point(vec![1.0, 0.5, -0.25])?;
    let rate = |n: usize| (n as f64).powi(-3);
    type Term = fn(f64) -> Vec<f64>;
    let families: [(&str, Term); 3] = [
        ("base", |r| vec![1.0 + r, 0.5, -0.25]),
        ("jet", |r| vec![1.0, 0.5 + r, -0.25 - 2.0 * r]),
        ("mixed", |r| vec![1.0 - r, 0.5 + r.sin(), -0.25 + r * r]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, term) in families {
        let seq = (1..=1000).map(|n| point(term(rate(n)))).collect::<Result<Vec<_>>>()?;
        let rep = metric.convergence_check(&seq, &limit, CAUCHY_TOL)?;
        let last = *rep.distances.last().expect("nonempty sequence");
        let tail = rep.cauchy.iter().rev().find(|&&c| c > 0.0).copied().unwrap_or(0.0);
        ok &= rep.converged && tail < CAUCHY_TOL;
        notes.push(format!("{name}: d(xi_1000, limit) = {last:.2e}"));
    }
    Ok((ok, notes.join(", ")))
}

// 12 ---------------------------------------------------------------------

pub const GRADIENT_POINT: [(&str, f64); 3] = [("x", 0.7), ("y", 0.4), ("z", 1.3)];

pub fn gradient_corpus() -> Vec<&'static str> {
    GRADIENT_CORPUS.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect()
}

fn relative_error(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}

fn gradient_cross_check() -> Result<(bool, String)> {
    let at: BTreeMap<String, f64> = GRADIENT_POINT.iter().map(|&(n, v)| (n.to_string(), v)).collect();
    let corpus = gradient_corpus();
    let (mut worst_grad, mut worst_hess) = (0.0f64, 0.0f64);
    let mut worst_expr = "";
    for src in &corpus {
        let e: Expr = src.parse()?;
        let p = partial_derivatives(&e, &at, 2)?;
        for (i, var) in p.vars.clone().iter().enumerate() {
            let shifted = |h: f64| -> BTreeMap<String, f64> {
                let mut m = at.clone();
                *m.get_mut(var).expect("variable of the expression") += h;
                m
            };
            let mut alpha = vec![0u32; p.vars.len()];
            alpha[i] = 1;
            let g = p.get(&alpha).unwrap_or(0.0);
            let h = 1e-5;
            let fd = (eval_real(&e, &shifted(h))? - eval_real(&e, &shifted(-h))?) / (2.0 * h);
            let err = relative_error(g, fd);
            if err > worst_grad {
                worst_grad = err;
                worst_expr = src;
            }
            // second derivative against differences of the exact gradient
            alpha[i] = 2;
            let hess = p.get(&alpha).unwrap_or(0.0);
            let h = 1e-4;
            let gp = partial_derivatives(&e, &shifted(h), 1)?;
            let gm = partial_derivatives(&e, &shifted(-h), 1)?;
            alpha[i] = 1;
            let fd2 = (gp.get(&alpha).unwrap_or(0.0) - gm.get(&alpha).unwrap_or(0.0)) / (2.0 * h);
            worst_hess = worst_hess.max(relative_error(hess, fd2));
        }
    }
    let ok = corpus.len() == 50 && worst_grad <= GRADIENT_TOL && worst_hess <= GRADIENT_TOL;
    Ok((
        ok,
        format!(
            "{} expressions; max relative error: gradient {worst_grad:.2e} ({worst_expr}), second order {worst_hess:.2e}",
            corpus.len()
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_parses() {
        let corpus = gradient_corpus();
        assert_eq!(corpus.len(), 50);
        for src in corpus {
            assert!(src.parse::<Expr>().is_ok(), "{src}");
        }
    }

    #[test]
    fn lines_carry_the_verdict() {
        let r = CriterionResult { id: 3, name: "x", passed: false, detail: "d".into(), elapsed: Duration::ZERO };
        assert_eq!(line(&r), "[FAIL]  3 x: d");
    }
}
