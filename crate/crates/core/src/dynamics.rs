//! Orbits and fixed points of lifted diffeomorphisms, and the `C^0` and
//! pointwise topologies on groups of maps.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apoint::APoint;
use crate::atlas::{BasePoint, Manifold};
use crate::error::{Error, Result};
use crate::lifting::{coefficient_deviation, LiftedMap, MapSpec};
use crate::smooth_expr::{parse, Expr};
use crate::weighted_metric::BundleMetric;
use crate::weil_algebra::WeilAlgebra;

/// Tolerance for `phi o phi^-1 = id` on samples.
pub const INVERSE_TOL: f64 = 1e-9;
/// Default tolerance of the fixed-point test `d(phi^A xi, xi) < tol`.
pub const FIXED_TOL: f64 = 1e-8;
/// Largest number of iterations or grid cells.
pub const MAX_STEPS: usize = 1_000_000;
/// Fewest samples accepted by [`c0_distance`].
pub const MIN_C0_SAMPLES: usize = 100;

/// A diffeomorphism with an optional explicit inverse.
#[derive(Clone, Debug)]
pub struct DiffeoPair {
    forward: MapSpec,
    inverse: Option<MapSpec>,
}

impl DiffeoPair {
    /// Checks `phi(phi^-1(x)) = x` and `phi^-1(phi(x)) = x` on `samples`
    /// seeded base points.
    pub fn new(forward: MapSpec, inverse: MapSpec, samples: usize, seed: u64) -> Result<DiffeoPair> {
        let m = forward.source().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x = m.sample_point(&mut rng);
            let a = forward.apply_base(&inverse.apply_base(&x)?)?;
            let b = inverse.apply_base(&forward.apply_base(&x)?)?;
            worst = worst.max(m.base_distance(&a, &x)?).max(m.base_distance(&b, &x)?);
        }
        if worst.is_nan() || worst > INVERSE_TOL {
            return Err(Error::NotInverse { deviation: worst });
        }
        Ok(DiffeoPair { forward, inverse: Some(inverse) })
    }

    /// A diffeomorphism known only through its forward formula. Operations
    /// that need the inverse fail with `InvalidArgument`.
    pub fn forward_only(forward: MapSpec) -> DiffeoPair {
        DiffeoPair { forward, inverse: None }
    }

    pub fn identity(m: Arc<Manifold>) -> DiffeoPair {
        let id = MapSpec::identity(m);
        DiffeoPair { forward: id.clone(), inverse: Some(id) }
    }

    /// `t -> t + alpha` on the circle.
    pub fn rotation(s1: Arc<Manifold>, alpha: f64) -> Result<DiffeoPair> {
        let t = Expr::var(&s1.chart(0).coords[0]);
        let chart = s1.chart(0).id.clone();
        let fwd = MapSpec::new(s1.clone(), s1.clone()).with_piece(&chart, None, vec![t.clone() + alpha])?;
        let inv = MapSpec::new(s1.clone(), s1).with_piece(&chart, None, vec![t - alpha])?;
        Ok(DiffeoPair { forward: fwd, inverse: Some(inv) })
    }

    /// `t -> -t` on the circle.
    pub fn reflection(s1: Arc<Manifold>) -> Result<DiffeoPair> {
        let t = Expr::var(&s1.chart(0).coords[0]);
        let chart = s1.chart(0).id.clone();
        let fwd = MapSpec::new(s1.clone(), s1).with_piece(&chart, None, vec![-t])?;
        Ok(DiffeoPair { forward: fwd.clone(), inverse: Some(fwd) })
    }

    /// `t -> t + delta flat(t - a) flat(b - t)` on the circle, which is the
    /// identity outside `(a, b)`. Requires `0 < a < b < 2 pi` and a `delta`
    /// small enough for the map to stay monotone.
    pub fn bump(s1: Arc<Manifold>, a: f64, b: f64, delta: f64) -> Result<DiffeoPair> {
        let c = s1.chart(0);
        let t = &c.coords[0];
        if !(0.0 < a && a < b && b < crate::math::TAU) {
            return Err(Error::InvalidArgument(format!("bump support ({a}, {b}) must lie inside (0, 2 pi)")));
        }
        let e = parse(&format!("{t} + {delta:?}*flat({t} - {a:?})*flat({b:?} - {t})"))?;
        let fwd = MapSpec::new(s1.clone(), s1.clone()).with_piece(&c.id, None, vec![e])?;
        Ok(DiffeoPair::forward_only(fwd))
    }

    pub fn forward(&self) -> &MapSpec {
        &self.forward
    }

    pub fn inverse(&self) -> Option<&MapSpec> {
        self.inverse.as_ref()
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        self.forward.source()
    }

    fn require_inverse(&self) -> Result<&MapSpec> {
        self.inverse.as_ref().ok_or_else(|| Error::InvalidArgument("the diffeomorphism has no explicit inverse".into()))
    }

    pub fn lift(&self, a: &Arc<WeilAlgebra>) -> LiftedMap {
        self.forward.lift(a.clone())
    }

    pub fn lift_inverse(&self, a: &Arc<WeilAlgebra>) -> Result<LiftedMap> {
        Ok(self.require_inverse()?.lift(a.clone()))
    }

    /// Largest coefficient deviation of `phi^A((phi^-1)^A xi)` and
    /// `(phi^-1)^A(phi^A xi)` from `xi`.
    pub fn lifted_inverse_deviation(&self, samples: &[APoint]) -> Result<f64> {
        let mut worst = 0.0f64;
        for xi in samples {
            let f = self.lift(xi.algebra());
            let g = self.lift_inverse(xi.algebra())?;
            worst = worst.max(coefficient_deviation(xi, &f.apply(&g.apply(xi)?)?)?);
            worst = worst.max(coefficient_deviation(xi, &g.apply(&f.apply(xi)?)?)?);
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Fixed,
    Periodic(usize),
    Wandering,
}

#[derive(Clone, Debug)]
pub struct OrbitRecord {
    pub initial: APoint,
    /// `xi_0, xi_1, ...` up to the stopping step.
    pub iterates: Vec<APoint>,
    /// `d(xi_{n+1}, xi_n)`.
    pub steps: Vec<f64>,
    pub verdict: Verdict,
    pub tol: f64,
}

/// Iterates `phi^A` from `xi0` at most `n` times, stopping as soon as the
/// orbit is seen to be fixed or to return to `xi0`.
pub fn iterate(phi: &DiffeoPair, metric: &BundleMetric, xi0: &APoint, n: usize, tol: f64) -> Result<OrbitRecord> {
    if n > MAX_STEPS {
        return Err(Error::InvalidArgument(format!("at most {MAX_STEPS} iterations")));
    }
    let lifted = phi.lift(metric.algebra());
    let mut iterates = vec![xi0.clone()];
    let mut steps = Vec::new();
    let mut verdict = Verdict::Wandering;
    for i in 0..n {
        let next = lifted.apply(&iterates[i])?;
        let d = metric.distance(&next, &iterates[i])?;
        steps.push(d);
        let back = if i == 0 { d } else { metric.distance(&next, xi0)? };
        iterates.push(next);
        if d < tol {
            if i == 0 {
                verdict = Verdict::Fixed;
            }
            break;
        }
        if back < tol {
            verdict = Verdict::Periodic(i + 1);
            break;
        }
    }
    Ok(OrbitRecord { initial: xi0.clone(), iterates, steps, verdict, tol })
}

/// A uniform grid over one chart. Each axis is `(low, high, count)` with
/// both ends included; `nil` has one axis per nilpotent coordinate in
/// coordinate-major order (absent axes are held at 0).
#[derive(Clone, Debug, PartialEq)]
pub struct FixGrid {
    pub chart: usize,
    pub base: Vec<(f64, f64, usize)>,
    pub nil: Vec<(f64, f64, usize)>,
}

impl FixGrid {
    pub fn cells(&self) -> usize {
        self.base.iter().chain(&self.nil).map(|a| a.2.max(1)).product()
    }

    /// Largest spacing between neighbouring nodes.
    pub fn step(&self) -> f64 {
        self.base
            .iter()
            .chain(&self.nil)
            .map(|&(lo, hi, n)| if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 })
            .fold(0.0, f64::max)
    }

    fn node(axis: (f64, f64, usize), i: usize) -> f64 {
        let (lo, hi, n) = axis;
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixCluster {
    pub representative: APoint,
    pub members: usize,
}

#[derive(Clone, Debug)]
pub struct FixScanReport {
    pub grid: FixGrid,
    pub tol: f64,
    pub cells: usize,
    pub fixed: Vec<APoint>,
    pub clusters: Vec<FixCluster>,
    /// Base projections of the clusters.
    pub bases: Vec<BasePoint>,
    /// Largest `d_g(phi(x), x)` over the bases of fixed points.
    pub base_residual: f64,
}

/// Every grid A-point `xi` with `d(phi^A xi, xi) < tol`, merged into
/// clusters of radius twice the grid step.
pub fn fixed_scan(phi: &DiffeoPair, metric: &BundleMetric, grid: &FixGrid, tol: f64) -> Result<FixScanReport> {
    let m = metric.manifold().clone();
    let a = metric.algebra().clone();
    let (dim, l) = (m.dim(), a.dim());
    if grid.chart >= m.charts.len() || grid.base.len() != dim || grid.nil.len() > dim * (l - 1) {
        return Err(Error::InvalidArgument("grid does not match the manifold and algebra".into()));
    }
    let cells = grid.cells();
    if cells > MAX_STEPS {
        return Err(Error::InvalidArgument(format!("grid has {cells} cells, at most {MAX_STEPS} allowed")));
    }
    let lifted = phi.lift(&a);
    let axes: Vec<(f64, f64, usize)> = grid.base.iter().chain(&grid.nil).copied().collect();
    let mut idx = vec![0usize; axes.len()];
    let mut fixed = Vec::new();
    for _ in 0..cells {
        let mut coeffs = vec![0.0; dim * l];
        for (j, &i) in idx.iter().enumerate() {
            let v = FixGrid::node(axes[j], i);
            let k = if j < dim { j * l } else { (j - dim) / (l - 1) * l + (j - dim) % (l - 1) + 1 };
            coeffs[k] = v;
        }
        if let Ok(xi) = APoint::from_coeffs(m.clone(), a.clone(), grid.chart, coeffs) {
            let image = lifted.apply(&xi)?;
            if metric.distance(&image, &xi)? < tol {
                fixed.push(xi);
            }
        }
        for (j, i) in idx.iter_mut().enumerate() {
            *i += 1;
            if *i < axes[j].2.max(1) {
                break;
            }
            *i = 0;
        }
    }
    let radius = 2.0 * grid.step();
    let mut clusters: Vec<FixCluster> = Vec::new();
    for xi in &fixed {
        let mut hit = false;
        for c in clusters.iter_mut() {
            if coefficient_deviation(&c.representative, xi)? <= radius {
                c.members += 1;
                hit = true;
                break;
            }
        }
        if !hit {
            clusters.push(FixCluster { representative: xi.clone(), members: 1 });
        }
    }
    let mut base_residual = 0.0f64;
    for xi in &fixed {
        let x = xi.project();
        base_residual = base_residual.max(m.base_distance(&phi.forward().apply_base(&x)?, &x)?);
    }
    let bases = clusters.iter().map(|c| c.representative.project()).collect();
    Ok(FixScanReport { grid: grid.clone(), tol, cells, fixed, clusters, bases, base_residual })
}

/// Sampled `max(d_C0(phi, psi), d_C0(phi^-1, psi^-1))` over `samples`
/// seeded base points.
pub fn c0_distance(phi: &DiffeoPair, psi: &DiffeoPair, samples: usize, seed: u64) -> Result<f64> {
    if samples < MIN_C0_SAMPLES {
        return Err(Error::InvalidArgument(format!("at least {MIN_C0_SAMPLES} samples are needed")));
    }
    let m = phi.manifold();
    let (pi, qi) = (phi.require_inverse()?, psi.require_inverse()?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = m.sample_point(&mut rng);
        let d1 = m.base_distance(&phi.forward.apply_base(&x)?, &psi.forward.apply_base(&x)?)?;
        let d2 = m.base_distance(&pi.apply_base(&x)?, &qi.apply_base(&x)?)?;
        worst = worst.max(d1).max(d2);
    }
    Ok(worst)
}

/// `max over xi of max(d(phi^A xi, psi^A xi), d((phi^A)^-1 xi, (psi^A)^-1 xi))`.
pub fn pointwise_gap(phi: &DiffeoPair, psi: &DiffeoPair, metric: &BundleMetric, samples: &[APoint]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    let a = metric.algebra();
    let (f, g) = (phi.lift(a), psi.lift(a));
    let (fi, gi) = (phi.lift_inverse(a)?, psi.lift_inverse(a)?);
    let mut worst = 0.0f64;
    for xi in samples {
        worst = worst.max(metric.distance(&f.apply(xi)?, &g.apply(xi)?)?);
        worst = worst.max(metric.distance(&fi.apply(xi)?, &gi.apply(xi)?)?);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityRow {
    pub index: usize,
    pub c0: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityProbeReport {
    pub rows: Vec<ContinuityRow>,
    /// Gaps never increase along the sequence (up to `1e-12`).
    pub monotone: bool,
    /// The last gap is below `tol`.
    pub converged: bool,
    pub samples: usize,
    pub seed: u64,
}

/// `C^0` distances and pointwise gaps of `phi_i` to `limit`.
pub fn continuity_probe(
    seq: &[DiffeoPair],
    limit: &DiffeoPair,
    metric: &BundleMetric,
    samples: &[APoint],
    c0_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ContinuityProbeReport> {
    let mut rows = Vec::with_capacity(seq.len());
    for (i, phi) in seq.iter().enumerate() {
        let c0 = c0_distance(phi, limit, c0_samples, seed)?;
        let gap = pointwise_gap(phi, limit, metric, samples)?;
        rows.push(ContinuityRow { index: i + 1, c0, gap });
    }
    let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-12);
    let converged = rows.last().is_some_and(|r| r.gap <= tol);
    Ok(ContinuityProbeReport { rows, monotone, converged, samples: samples.len(), seed })
}

/// Zero-section points over `n` seeded base points.
pub fn zero_section_samples(m: &Arc<Manifold>, a: &Arc<WeilAlgebra>, n: usize, seed: u64) -> Vec<APoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| APoint::zero_section(m.clone(), a.clone(), &m.sample_point(&mut rng)).expect("sampled points are valid"))
        .collect()
}

/// Short label for reports.
pub fn verdict_name(v: &Verdict) -> alloc::string::String {
    match v {
        Verdict::Fixed => "fixed".to_string(),
        Verdict::Periodic(p) => format!("periodic({p})"),
        Verdict::Wandering => "wandering".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{BaseMetric, Chart};
    use crate::math::{PI, TAU};
    use crate::weighted_metric::MetricConfig;
    use crate::weil_algebra::AlgebraElement;
    use approx::assert_relative_eq;

    fn s1() -> Arc<Manifold> {
        Arc::new(Manifold::builtin("S1").unwrap())
    }

    fn metric(m: &Arc<Manifold>, k: u32) -> BundleMetric {
        BundleMetric::new(m.clone(), Arc::new(WeilAlgebra::jets(k).unwrap()), MetricConfig::default()).unwrap()
    }

    fn tangent(m: &Arc<Manifold>, bm: &BundleMetric, theta: f64, v: f64) -> APoint {
        let a = bm.algebra().clone();
        APoint::new(m.clone(), a.clone(), "U", &[AlgebraElement::new(a, vec![theta, v]).unwrap()]).unwrap()
    }

    fn circle_grid() -> FixGrid {
        FixGrid { chart: 0, base: vec![(0.0, TAU, 629)], nil: vec![(-1.0, 1.0, 41)] }
    }

    #[test]
    fn inverse_is_checked() {
        let m = s1();
        let f = MapSpec::from_strs(m.clone(), m.clone(), "U", &["t + 0.5"]).unwrap();
        let g = MapSpec::from_strs(m.clone(), m.clone(), "U", &["t - 0.4"]).unwrap();
        assert!(matches!(DiffeoPair::new(f.clone(), g, 50, 1), Err(Error::NotInverse { .. })));
        let g = MapSpec::from_strs(m.clone(), m.clone(), "U", &["t - 0.5"]).unwrap();
        assert!(DiffeoPair::new(f, g, 50, 1).is_ok());
    }

    #[test]
    fn example_orbits() {
        let m = s1();
        let bm = metric(&m, 1);
        let refl = DiffeoPair::reflection(m.clone()).unwrap();
        let o = iterate(&refl, &bm, &tangent(&m, &bm, 0.0, 0.0), 10, FIXED_TOL).unwrap();
        assert_eq!(o.verdict, Verdict::Fixed);
        assert_eq!(o.iterates.len(), 2);
        // off the fixed set the reflection has period two
        let o = iterate(&refl, &bm, &tangent(&m, &bm, 1.0, 0.3), 10, FIXED_TOL).unwrap();
        assert_eq!(o.verdict, Verdict::Periodic(2));

        let rot = DiffeoPair::rotation(m.clone(), 0.5).unwrap();
        let o = iterate(&rot, &bm, &tangent(&m, &bm, 2.0, 0.7), 200, FIXED_TOL).unwrap();
        assert_eq!(o.verdict, Verdict::Wandering);
        // base gap 0.5 plus a rotation-invariant sup term
        assert!(o.steps[0] > 0.5);
        assert!(o.steps.iter().all(|d| (d - o.steps[0]).abs() < 1e-12));
        // the tangent vector is carried along unchanged
        assert_eq!(o.iterates[200].coeffs()[1], 0.7);

        let id = DiffeoPair::identity(m.clone());
        let o = iterate(&id, &bm, &tangent(&m, &bm, 4.0, -0.2), 5, FIXED_TOL).unwrap();
        assert_eq!(o.verdict, Verdict::Fixed);
    }

    #[test]
    fn example_scans() {
        let m = s1();
        let bm = metric(&m, 1);
        let rot = DiffeoPair::rotation(m.clone(), 0.5).unwrap();
        let rep = fixed_scan(&rot, &bm, &circle_grid(), FIXED_TOL).unwrap();
        assert_eq!(rep.cells, 629 * 41);
        assert!(rep.fixed.is_empty());

        let refl = DiffeoPair::reflection(m.clone()).unwrap();
        let rep = fixed_scan(&refl, &bm, &circle_grid(), FIXED_TOL).unwrap();
        assert_eq!(rep.clusters.len(), 2);
        let mut found: Vec<(f64, f64)> =
            rep.clusters.iter().map(|c| (c.representative.coeffs()[0], c.representative.coeffs()[1])).collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(found, vec![(0.0, 0.0), (PI, 0.0)]);
        assert!(rep.base_residual <= FIXED_TOL);
    }

    #[test]
    fn bump_fixes_its_flat_arc() {
        let m = s1();
        let bm = metric(&m, 2);
        let (a, b) = (2.0, 4.0);
        let phi = DiffeoPair::bump(m.clone(), a, b, 0.5).unwrap();
        let grid = FixGrid { chart: 0, base: vec![(0.0, TAU, 200)], nil: vec![(-1.0, 1.0, 5), (-1.0, 1.0, 5)] };
        let rep = fixed_scan(&phi, &bm, &grid, FIXED_TOL).unwrap();
        let outside = |t: f64| t <= a || t >= b;
        let expected = (0..200).filter(|i| outside(TAU * *i as f64 / 199.0)).count() * 25;
        // every grid point over the flat arc is fixed; inside (a, b) only
        // points where the flat factors are below tolerance join them
        let over_w = rep.fixed.iter().filter(|xi| outside(xi.coeffs()[0])).count();
        assert_eq!(over_w, expected);
        for xi in rep.fixed.iter().filter(|xi| !outside(xi.coeffs()[0])) {
            let t = xi.coeffs()[0];
            assert!((t - a).min(b - t) < 0.1, "{t}");
        }
        assert!(rep.base_residual <= FIXED_TOL);
        assert!(matches!(phi.lift_inverse(bm.algebra()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn c0_distances_of_rotations() {
        let m = s1();
        let r1 = DiffeoPair::rotation(m.clone(), 0.3).unwrap();
        let r2 = DiffeoPair::rotation(m.clone(), 1.1).unwrap();
        let r3 = DiffeoPair::rotation(m.clone(), 5.9).unwrap();
        assert_eq!(c0_distance(&r1, &r1, 100, 0).unwrap(), 0.0);
        assert_relative_eq!(c0_distance(&r1, &r2, 100, 0).unwrap(), 0.8, epsilon = 1e-12);
        assert_relative_eq!(c0_distance(&r1, &r3, 100, 0).unwrap(), TAU - 5.6, epsilon = 1e-12);
        assert_eq!(c0_distance(&r2, &r3, 200, 9).unwrap(), c0_distance(&r3, &r2, 200, 9).unwrap());
        assert!(matches!(c0_distance(&r1, &r2, 10, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pointwise_gaps_of_rotations() {
        let m = s1();
        let bm = metric(&m, 1);
        let samples = zero_section_samples(&m, bm.algebra(), 50, 4);
        let r = DiffeoPair::rotation(m.clone(), 0.7).unwrap();
        assert_eq!(pointwise_gap(&r, &r, &bm, &samples).unwrap(), 0.0);
        let r2 = DiffeoPair::rotation(m.clone(), 0.7 + 1e-3).unwrap();
        assert_relative_eq!(pointwise_gap(&r, &r2, &bm, &samples).unwrap(), 1e-3, epsilon = 1e-12);

        let id = DiffeoPair::identity(m.clone());
        let seq: Vec<_> = (1..=20).map(|i| DiffeoPair::rotation(m.clone(), 1.0 / i as f64).unwrap()).collect();
        let rep = continuity_probe(&seq, &id, &bm, &samples, 100, 7, 0.06).unwrap();
        assert!(rep.monotone && rep.converged);
        for row in &rep.rows {
            assert_relative_eq!(row.gap, 1.0 / row.index as f64, epsilon = 1e-12);
            assert_relative_eq!(row.c0, 1.0 / row.index as f64, epsilon = 1e-12);
        }
        let constant = continuity_probe(&[id.clone(), id.clone()], &id, &bm, &samples, 100, 7, 0.0).unwrap();
        assert!(constant.rows.iter().all(|r| r.gap == 0.0 && r.c0 == 0.0));
    }

    #[test]
    fn lifted_inverse_is_inverse_lift() {
        let m = s1();
        let bm = metric(&m, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let samples: Vec<_> = (0..100).map(|_| APoint::sample(m.clone(), bm.algebra().clone(), 1.0, &mut rng)).collect();
        for phi in [DiffeoPair::rotation(m.clone(), 2.2).unwrap(), DiffeoPair::reflection(m.clone()).unwrap()] {
            assert!(phi.lifted_inverse_deviation(&samples).unwrap() < 1e-10);
        }
    }

    #[test]
    fn orbit_gaps_are_rotation_invariant() {
        let m = s1();
        let bm = metric(&m, 2);
        let phi = DiffeoPair::rotation(m.clone(), 0.9).unwrap();
        let psi = DiffeoPair::rotation(m.clone(), 2.4).unwrap().lift(bm.algebra());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let xi = APoint::sample(m.clone(), bm.algebra().clone(), 1.0, &mut rng);
            let a = iterate(&phi, &bm, &xi, 30, FIXED_TOL).unwrap();
            let b = iterate(&phi, &bm, &psi.apply(&xi).unwrap(), 30, FIXED_TOL).unwrap();
            for (x, y) in a.steps.iter().zip(&b.steps) {
                assert_relative_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn polynomial_perturbations_converge_with_their_jets() {
        // phi_i(x) = x + x(1 - x)/i on the unit interval
        let chart = Chart::new("I", &["x"], &["x >= 0", "x <= 1"]).unwrap().with_box(vec![(0.0, 1.0)]);
        let m = Arc::new(Manifold::new("I", vec![chart], vec![], BaseMetric::Euclidean(1), None, true).unwrap());
        let a = Arc::new(WeilAlgebra::jets(2).unwrap());
        let bm = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
        let pair = |i: f64| {
            let c = 1.0 / i;
            let f = MapSpec::from_strs(m.clone(), m.clone(), "I", &[&format!("x + {c:?}*x*(1 - x)")]).unwrap();
            let g = MapSpec::from_strs(
                m.clone(),
                m.clone(),
                "I",
                &[&format!("((1 + {c:?}) - sqrt((1 + {c:?})^2 - 4*{c:?}*x))/(2*{c:?})")],
            )
            .unwrap();
            DiffeoPair::new(f, g, 200, 3).unwrap()
        };
        let xi = APoint::new(m.clone(), a.clone(), "I", &[AlgebraElement::new(a.clone(), vec![0.3, 0.5, -0.2]).unwrap()])
            .unwrap();
        let id = DiffeoPair::identity(m.clone());
        let mut last = f64::INFINITY;
        for i in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let phi = pair(i);
            let y = phi.lift(&a).apply(&xi).unwrap();
            // first jet coefficient against a central difference of phi
            let h = 1e-5;
            let fx = |x: f64| x + x * (1.0 - x) / i;
            let d1 = (fx(0.3 + h) - fx(0.3 - h)) / (2.0 * h);
            assert_relative_eq!(y.coeffs()[1], d1 * 0.5, epsilon = 1e-8);
            let gap = pointwise_gap(&phi, &id, &bm, core::slice::from_ref(&xi)).unwrap();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 0.05);
    }
}
