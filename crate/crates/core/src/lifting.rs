//! Lifting of paths, homotopies and maps from `M` to `M^A`.
//!
//! A smooth map `phi: M -> N` lifts to `phi^A: M^A -> N^A`,
//! `(phi^A xi)(h) = xi(h o phi)`; in coordinates this is jet evaluation of
//! the components of `phi`. Chart transitions are the special case
//! `phi = id`, see [`prolong_transition`].
//!
//! Paths between two A-points are lifted over a base curve `gamma` by
//! interpolating nilpotent data linearly in the path parameter. Two
//! semantics are offered:
//!
//! * [`Semantics::Coordinate`] interpolates the nilpotent parts of the
//!   coordinate jets and so always yields genuine A-points;
//! * [`Semantics::Functional`] interpolates the functionals
//!   `(1 - t) L(f) + t G(f)` themselves, which is an algebra morphism only
//!   when the square of the maximal ideal vanishes. The defect is reported
//!   by [`LiftedPath::leibniz_residual`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::apoint::{leibniz_residual, same_manifold, APoint, CoordJets, PointFunctional};
use crate::atlas::{BasePoint, Manifold, TransitionMap};
use crate::error::{Error, Result};
use crate::math;
use crate::smooth_expr::{eval_jet_with, eval_real, Bindings, Expr};
use crate::weighted_metric::BundleMetric;
use crate::weil_algebra::{same_algebra, AlgebraElement, WeilAlgebra};

/// Name of the path parameter in base-curve expressions.
pub const PATH_PARAM: &str = "s";
/// Name of the deformation parameter in base-homotopy expressions.
pub const HOMOTOPY_PARAM: &str = "r";
/// Base-distance tolerance for endpoint and boundary checks.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// Prolongs a chart transition to A-points: the new coordinate jets are the
/// transition components evaluated at the old ones.
pub fn prolong_transition(xi: &APoint, t: &TransitionMap) -> Result<APoint> {
    let m = xi.manifold();
    let from = m.chart_index(&t.from)?;
    let to = m.chart_index(&t.to)?;
    if from != xi.chart() {
        return Err(Error::ChartDomain { chart: t.from.clone() });
    }
    let coeffs = eval_components(&t.components, &xi.jets(), xi.algebra())?;
    APoint::from_coeffs(m.clone(), xi.algebra().clone(), to, coeffs)
}

fn eval_components(components: &[Expr], jets: &CoordJets<'_>, a: &WeilAlgebra) -> Result<Vec<f64>> {
    let mut coeffs = Vec::with_capacity(components.len() * a.dim());
    for c in components {
        coeffs.extend(eval_jet_with(c, jets, a)?);
    }
    Ok(coeffs)
}

/// `xi` expressed in chart `to` through the first declared transition whose
/// image lands in that chart.
pub(crate) fn transport(xi: &APoint, to: usize) -> Result<APoint> {
    if xi.chart() == to {
        return Ok(xi.clone());
    }
    let m = xi.manifold();
    for t in m.transitions_between(xi.chart(), to) {
        if let Ok(p) = prolong_transition(xi, t) {
            return Ok(p);
        }
    }
    Err(Error::ChartDomain { chart: m.chart(to).id.clone() })
}

/// Places a coordinate matrix computed in `chart` on the manifold: in
/// `chart` itself if its base lies there after wrapping, otherwise in the
/// first chart reachable by a declared transition.
fn place(m: &Arc<Manifold>, a: &Arc<WeilAlgebra>, chart: usize, coeffs: Vec<f64>) -> Result<APoint> {
    match APoint::from_coeffs(m.clone(), a.clone(), chart, coeffs.clone()) {
        Err(Error::ChartDomain { .. }) => {}
        other => return other,
    }
    let src = m.chart(chart);
    let jets = CoordJets { names: &src.coords, coeffs: &coeffs, dim: a.dim() };
    for t in m.transitions.iter().filter(|t| t.from == src.id) {
        let Ok(to) = m.chart_index(&t.to) else { continue };
        let Ok(c) = eval_components(&t.components, &jets, a) else { continue };
        if let Ok(p) = APoint::from_coeffs(m.clone(), a.clone(), to, c) {
            return Ok(p);
        }
    }
    Err(Error::TargetChartUnresolved)
}

/// Largest coefficient difference between two A-points after moving `b`
/// into the chart of `a`. Periodic base coordinates are compared modulo
/// their period.
pub fn coefficient_deviation(a: &APoint, b: &APoint) -> Result<f64> {
    if !same_manifold(a.manifold(), b.manifold()) {
        return Err(Error::ManifoldMismatch);
    }
    if !same_algebra(a.algebra(), b.algebra()) {
        return Err(Error::AlgebraMismatch);
    }
    let b = b.to_chart(a.chart())?;
    let l = a.algebra().dim();
    let chart = a.manifold().chart(a.chart());
    let mut worst = 0.0f64;
    for (k, (x, y)) in a.coeffs().iter().zip(b.coeffs()).enumerate() {
        let d = match chart.wrap[k / l] {
            Some(w) if k % l == 0 => {
                let r = math::abs(x - y) % w.period;
                r.min(w.period - r)
            }
            _ => math::abs(x - y),
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

/// The formula of a map on one source chart, with values in the
/// coordinates of one target chart.
#[derive(Clone, Debug, PartialEq)]
pub struct MapPiece {
    pub chart: usize,
    pub target_chart: usize,
    pub components: Vec<Expr>,
}

/// A smooth map between manifolds given chartwise.
#[derive(Clone, Debug)]
pub struct MapSpec {
    source: Arc<Manifold>,
    target: Arc<Manifold>,
    pieces: Vec<MapPiece>,
}

impl MapSpec {
    pub fn new(source: Arc<Manifold>, target: Arc<Manifold>) -> MapSpec {
        MapSpec { source, target, pieces: Vec::new() }
    }

    /// Adds the formula on source chart `chart`. Components are written in
    /// that chart's coordinates and give coordinates in `target_chart`
    /// (default: the target chart with the same id, else the first one).
    pub fn with_piece(mut self, chart: &str, target_chart: Option<&str>, components: Vec<Expr>) -> Result<MapSpec> {
        let c = self.source.chart_index(chart)?;
        let tc = match target_chart {
            Some(id) => self.target.chart_index(id)?,
            None => self.target.chart_index(chart).unwrap_or(0),
        };
        if components.len() != self.target.dim() {
            return Err(Error::InvalidArgument(format!(
                "a map into `{}` needs {} components, got {}",
                self.target.name,
                self.target.dim(),
                components.len()
            )));
        }
        let coords = &self.source.chart(c).coords;
        for v in components.iter().flat_map(|e| e.variables()) {
            if !coords.contains(&v) {
                return Err(Error::UnboundVariable(v));
            }
        }
        self.pieces.retain(|p| p.chart != c);
        self.pieces.push(MapPiece { chart: c, target_chart: tc, components });
        Ok(self)
    }

    /// One-piece map from component strings.
    pub fn from_strs(source: Arc<Manifold>, target: Arc<Manifold>, chart: &str, components: &[&str]) -> Result<MapSpec> {
        let comps = components.iter().map(|s| s.parse()).collect::<Result<Vec<Expr>>>()?;
        MapSpec::new(source, target).with_piece(chart, None, comps)
    }

    pub fn identity(m: Arc<Manifold>) -> MapSpec {
        let pieces = m
            .charts
            .iter()
            .enumerate()
            .map(|(i, c)| MapPiece { chart: i, target_chart: i, components: c.coords.iter().map(|v| Expr::var(v)).collect() })
            .collect();
        MapSpec { source: m.clone(), target: m, pieces }
    }

    pub fn source(&self) -> &Arc<Manifold> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Manifold> {
        &self.target
    }

    pub fn pieces(&self) -> &[MapPiece] {
        &self.pieces
    }

    fn piece_for(&self, chart: usize) -> Option<&MapPiece> {
        self.pieces.iter().find(|p| p.chart == chart)
    }

    /// `phi(x)`, resolved to a target chart.
    pub fn apply_base(&self, p: &BasePoint) -> Result<BasePoint> {
        self.source.check(p)?;
        let (piece, p) = match self.piece_for(p.chart) {
            Some(piece) => (piece, p.clone()),
            None => self
                .pieces
                .iter()
                .find_map(|piece| self.source.transport_base(p, piece.chart).ok().map(|q| (piece, q)))
                .ok_or_else(|| Error::ChartDomain { chart: self.source.chart(p.chart).id.clone() })?,
        };
        let env = Bindings::new(&self.source.chart(piece.chart).coords, &p.coords);
        let y = piece.components.iter().map(|c| eval_real(c, &env)).collect::<Result<Vec<_>>>()?;
        self.target.resolve(piece.target_chart, &y).ok_or(Error::TargetChartUnresolved)
    }

    /// `self o first`, composed symbolically chart by chart.
    pub fn compose(&self, first: &MapSpec) -> Result<MapSpec> {
        if !same_manifold(&first.target, &self.source) {
            return Err(Error::ManifoldMismatch);
        }
        let mid = &self.source;
        let mut pieces = Vec::new();
        for p in &first.pieces {
            let direct = self.piece_for(p.target_chart).map(|q| (q, p.components.clone()));
            let via = || {
                self.pieces.iter().find_map(|q| {
                    let t = mid.transitions_between(p.target_chart, q.chart).next()?;
                    let map = bind(&mid.chart(p.target_chart).coords, &p.components);
                    Some((q, t.components.iter().map(|c| c.substitute(&map)).collect()))
                })
            };
            let Some((q, inner)) = direct.or_else(via) else { continue };
            let map = bind(&mid.chart(q.chart).coords, &inner);
            pieces.push(MapPiece {
                chart: p.chart,
                target_chart: q.target_chart,
                components: q.components.iter().map(|c| c.substitute(&map)).collect(),
            });
        }
        if pieces.is_empty() {
            return Err(Error::ChartDomain { chart: mid.chart(0).id.clone() });
        }
        Ok(MapSpec { source: first.source.clone(), target: self.target.clone(), pieces })
    }

    pub fn lift(&self, algebra: Arc<WeilAlgebra>) -> LiftedMap {
        LiftedMap { spec: self.clone(), algebra }
    }
}

fn bind(names: &[String], values: &[Expr]) -> BTreeMap<String, Expr> {
    names.iter().cloned().zip(values.iter().cloned()).collect()
}

/// The Weil lifting `phi^A` of a chartwise map.
#[derive(Clone, Debug)]
pub struct LiftedMap {
    spec: MapSpec,
    algebra: Arc<WeilAlgebra>,
}

impl LiftedMap {
    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn algebra(&self) -> &Arc<WeilAlgebra> {
        &self.algebra
    }

    /// `phi^A(xi)`: the map's components evaluated on the coordinate jets.
    pub fn apply(&self, xi: &APoint) -> Result<APoint> {
        if !same_manifold(xi.manifold(), &self.spec.source) {
            return Err(Error::ManifoldMismatch);
        }
        if !same_algebra(xi.algebra(), &self.algebra) {
            return Err(Error::AlgebraMismatch);
        }
        let (piece, xi) = match self.spec.piece_for(xi.chart()) {
            Some(p) => (p, xi.clone()),
            None => self
                .spec
                .pieces
                .iter()
                .find_map(|p| xi.to_chart(p.chart).ok().map(|x| (p, x)))
                .ok_or_else(|| Error::ChartDomain { chart: xi.chart_id().to_string() })?,
        };
        let coeffs = eval_components(&piece.components, &xi.jets(), &self.algebra)?;
        place(&self.spec.target, &self.algebra, piece.target_chart, coeffs)
    }

    /// Largest base distance between `pi(phi^A xi)` and `phi(pi(xi))`.
    pub fn base_compatibility(&self, samples: &[APoint]) -> Result<f64> {
        let mut worst = 0.0f64;
        for xi in samples {
            let lifted = self.apply(xi)?.project();
            let direct = self.spec.apply_base(&xi.project())?;
            worst = worst.max(self.spec.target.base_distance(&lifted, &direct)?);
        }
        Ok(worst)
    }
}

/// `(psi o phi)^A`, built from the symbolic composite of the base maps.
pub fn compose_lifted(psi: &LiftedMap, phi: &LiftedMap) -> Result<LiftedMap> {
    if !same_algebra(&psi.algebra, &phi.algebra) {
        return Err(Error::AlgebraMismatch);
    }
    Ok(psi.spec.compose(&phi.spec)?.lift(phi.algebra.clone()))
}

/// Largest coefficient deviation between `(psi o phi)^A` and
/// `psi^A o phi^A` over the samples.
pub fn functoriality_check(phi: &LiftedMap, psi: &LiftedMap, samples: &[APoint]) -> Result<f64> {
    let composite = compose_lifted(psi, phi)?;
    let mut worst = 0.0f64;
    for xi in samples {
        let a = composite.apply(xi)?;
        let b = psi.apply(&phi.apply(xi)?)?;
        worst = worst.max(coefficient_deviation(&a, &b)?);
    }
    Ok(worst)
}

/// One piece of a base curve: chart coordinates as expressions of the path
/// parameter, used for parameters up to `until`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSegment {
    pub chart: usize,
    pub until: f64,
    pub components: Vec<Expr>,
}

/// A continuous curve `gamma: [0, 1] -> M` given by chart segments.
#[derive(Clone, Debug)]
pub struct BaseCurve {
    manifold: Arc<Manifold>,
    segments: Vec<CurveSegment>,
}

impl BaseCurve {
    /// Segments must be ordered by `until`, the last one ending at 1.
    pub fn new(manifold: Arc<Manifold>, segments: Vec<CurveSegment>) -> Result<BaseCurve> {
        let ok = !segments.is_empty()
            && segments.windows(2).all(|w| w[0].until < w[1].until)
            && segments.last().is_some_and(|s| s.until >= 1.0)
            && segments.iter().all(|s| s.chart < manifold.charts.len() && s.components.len() == manifold.dim());
        if !ok {
            return Err(Error::InvalidArgument("curve segments must cover [0, 1] in order".into()));
        }
        for v in segments.iter().flat_map(|s| s.components.iter()).flat_map(|e| e.variables()) {
            if v != PATH_PARAM {
                return Err(Error::UnboundVariable(v));
            }
        }
        Ok(BaseCurve { manifold, segments })
    }

    /// A one-chart curve.
    pub fn single(manifold: Arc<Manifold>, chart: &str, components: Vec<Expr>) -> Result<BaseCurve> {
        let chart = manifold.chart_index(chart)?;
        BaseCurve::new(manifold, vec![CurveSegment { chart, until: 1.0, components }])
    }

    /// Instantiates a template such as `(1-s)*a + s*b`: in component `i`, `a`
    /// and `b` stand for the `i`-th coordinates of the two endpoints.
    pub fn from_template(manifold: Arc<Manifold>, chart: &str, template: &[Expr], a: &[f64], b: &[f64]) -> Result<BaseCurve> {
        let comps = template
            .iter()
            .zip(a.iter().zip(b))
            .map(|(e, (x, y))| {
                let mut map = BTreeMap::new();
                map.insert("a".to_string(), Expr::Const(*x));
                map.insert("b".to_string(), Expr::Const(*y));
                e.substitute(&map)
            })
            .collect();
        BaseCurve::single(manifold, chart, comps)
    }

    /// Straight segment in the coordinates of one chart. Periodic
    /// coordinates take the shorter way round.
    pub fn chord(manifold: Arc<Manifold>, a: &BasePoint, b: &BasePoint) -> Result<BaseCurve> {
        let attempt = |chart: usize| -> Option<(Vec<f64>, Vec<f64>)> {
            let pa = manifold.transport_base(a, chart).ok()?;
            let pb = manifold.transport_base(b, chart).ok()?;
            let c = manifold.chart(chart);
            let mut y = pb.coords.clone();
            for (i, w) in c.wrap.iter().enumerate() {
                if let Some(w) = w {
                    let mut d = (y[i] - pa.coords[i]) % w.period;
                    if d > w.period / 2.0 {
                        d -= w.period;
                    } else if d < -w.period / 2.0 {
                        d += w.period;
                    }
                    y[i] = pa.coords[i] + d;
                }
            }
            Some((pa.coords, y))
        };
        let (chart, (x, y)) = [a.chart, b.chart]
            .into_iter()
            .chain(0..manifold.charts.len())
            .find_map(|c| attempt(c).map(|r| (c, r)))
            .ok_or(Error::ChartPathUnresolvable { parameter: 1.0 })?;
        let s = Expr::var(PATH_PARAM);
        let comps = x.iter().zip(&y).map(|(p, q)| Expr::Const(*p) + (q - p) * s.clone()).collect();
        BaseCurve::new(manifold, vec![CurveSegment { chart, until: 1.0, components: comps }])
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    pub fn segments(&self) -> &[CurveSegment] {
        &self.segments
    }

    /// `gamma(s)`, in whichever chart contains it.
    pub fn at(&self, s: f64) -> Result<BasePoint> {
        let seg = self.segments.iter().find(|g| s <= g.until).unwrap_or(self.segments.last().expect("nonempty"));
        let names = [PATH_PARAM.to_string()];
        let env = Bindings::new(&names, core::slice::from_ref(&s));
        let y = seg.components.iter().map(|c| eval_real(c, &env)).collect::<Result<Vec<_>>>()?;
        self.manifold.resolve(seg.chart, &y).ok_or(Error::ChartPathUnresolvable { parameter: s })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Semantics {
    Coordinate,
    Functional,
}

/// `f -> f(gamma(t)) + (1 - t) L(f) + t G(f)`, with `L` and `G` the
/// nilpotent data of the endpoints applied at `gamma(t)`. Functions are
/// written in the coordinates of [`PathFunctional::chart`].
#[derive(Clone, Debug)]
pub struct PathFunctional {
    first: APoint,
    second: APoint,
    t: f64,
}

impl PathFunctional {
    pub fn chart(&self) -> usize {
        self.first.chart()
    }

    pub fn base(&self) -> BasePoint {
        self.first.project()
    }

    pub fn evaluate(&self, f: &Expr) -> Result<AlgebraElement> {
        let l = self.l_value(f)?;
        l.add(&AlgebraElement::constant(l.algebra().clone(), self.base_value(f)?))
    }
}

impl PointFunctional for PathFunctional {
    fn algebra(&self) -> &Arc<WeilAlgebra> {
        self.first.algebra()
    }

    fn base_value(&self, f: &Expr) -> Result<f64> {
        self.first.base_value(f)
    }

    fn l_value(&self, f: &Expr) -> Result<AlgebraElement> {
        let a = self.first.l_part(f)?.scale(1.0 - self.t);
        a.add(&self.second.l_part(f)?.scale(self.t))
    }
}

/// Continuity evidence `d(gamma~(t_j), gamma~(s)) <= C |t_j - s|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityReport {
    pub at: f64,
    /// `(|t_j - s|, distance)` pairs.
    pub samples: Vec<(f64, f64)>,
    /// Smallest `C` consistent with every sample.
    pub constant: f64,
}

fn fit_constant(samples: &[(f64, f64)]) -> f64 {
    samples.iter().filter(|(dt, _)| *dt > 0.0).fold(0.0, |c, (dt, d)| f64::max(c, d / dt))
}

/// A lift of a base curve joining two A-points.
#[derive(Clone, Debug)]
pub struct LiftedPath {
    start: APoint,
    end: APoint,
    curve: BaseCurve,
    semantics: Semantics,
}

/// Lifts `curve` to a path from `e1` to `e2`. The curve must start at the
/// base of `e1` and end at the base of `e2`.
pub fn lift_path(e1: &APoint, e2: &APoint, curve: BaseCurve, semantics: Semantics) -> Result<LiftedPath> {
    if !same_manifold(e1.manifold(), e2.manifold()) || !same_manifold(e1.manifold(), &curve.manifold) {
        return Err(Error::ManifoldMismatch);
    }
    if !same_algebra(e1.algebra(), e2.algebra()) {
        return Err(Error::AlgebraMismatch);
    }
    let m = &curve.manifold;
    for (s, p, name) in [(0.0, e1, "start"), (1.0, e2, "end")] {
        let gap = m.base_distance(&curve.at(s)?, &p.project())?;
        if gap.is_nan() || gap > ENDPOINT_TOL {
            return Err(Error::EndpointMismatch(format!("curve {name} is {gap:e} away from the A-point base")));
        }
    }
    Ok(LiftedPath { start: e1.clone(), end: e2.clone(), curve, semantics })
}

/// Both endpoints and the base point re-expressed in one common chart,
/// preferring the charts of the endpoints.
fn common_frame(a: &APoint, b: &APoint, base: &BasePoint, parameter: f64) -> Result<(APoint, APoint)> {
    let m = a.manifold();
    for c in [a.chart(), b.chart(), base.chart] {
        let (Ok(x), Ok(pa), Ok(pb)) = (m.transport_base(base, c), a.to_chart(c), b.to_chart(c)) else { continue };
        return Ok((rebase(&pa, &x.coords)?, rebase(&pb, &x.coords)?));
    }
    Err(Error::ChartPathUnresolvable { parameter })
}

/// Same nilpotent coordinate parts over a new base in the same chart.
fn rebase(p: &APoint, base: &[f64]) -> Result<APoint> {
    let l = p.algebra().dim();
    let mut coeffs = p.coeffs().to_vec();
    for (i, x) in base.iter().enumerate() {
        coeffs[i * l] = *x;
    }
    APoint::from_coeffs(p.manifold().clone(), p.algebra().clone(), p.chart(), coeffs)
}

/// Base of `a` with nilpotent parts `(1 - t) nil(a) + t nil(b)`; `a` and `b`
/// share chart and base.
fn blend(a: &APoint, b: &APoint, t: f64) -> Result<APoint> {
    let l = a.algebra().dim();
    let coeffs = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .enumerate()
        .map(|(k, (x, y))| if k % l == 0 { *x } else { (1.0 - t) * x + t * y })
        .collect();
    APoint::from_coeffs(a.manifold().clone(), a.algebra().clone(), a.chart(), coeffs)
}

impl LiftedPath {
    pub fn start(&self) -> &APoint {
        &self.start
    }

    pub fn end(&self) -> &APoint {
        &self.end
    }

    pub fn curve(&self) -> &BaseCurve {
        &self.curve
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    fn check_param(t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("path parameter {t} outside [0, 1]")))
        }
    }

    /// The coordinate-semantics A-point at `t`; the endpoints are returned
    /// exactly at `t = 0` and `t = 1`.
    pub fn point(&self, t: f64) -> Result<APoint> {
        LiftedPath::check_param(t)?;
        if t == 0.0 {
            return Ok(self.start.clone());
        }
        if t == 1.0 {
            return Ok(self.end.clone());
        }
        let base = self.curve.at(t)?;
        let (a, b) = common_frame(&self.start, &self.end, &base, t)?;
        blend(&a, &b, t)
    }

    /// The functional-semantics evaluation functional at `t`.
    pub fn functional(&self, t: f64) -> Result<PathFunctional> {
        LiftedPath::check_param(t)?;
        let base = if t == 0.0 {
            self.start.project()
        } else if t == 1.0 {
            self.end.project()
        } else {
            self.curve.at(t)?
        };
        let (first, second) = common_frame(&self.start, &self.end, &base, t)?;
        Ok(PathFunctional { first, second, t })
    }

    /// Leibniz residual of the path at `t` under its semantics; `f`, `g`
    /// and `h` are written in the coordinates of [`LiftedPath::chart_at`].
    pub fn leibniz_residual(&self, t: f64, f: &Expr, g: &Expr, h: &Expr, lambda: f64) -> Result<f64> {
        match self.semantics {
            Semantics::Coordinate => leibniz_residual(&self.point(t)?, f, g, h, lambda),
            Semantics::Functional => leibniz_residual(&self.functional(t)?, f, g, h, lambda),
        }
    }

    /// The chart in which the path is evaluated at `t`.
    pub fn chart_at(&self, t: f64) -> Result<usize> {
        Ok(match self.semantics {
            Semantics::Coordinate => self.point(t)?.chart(),
            Semantics::Functional => self.functional(t)?.chart(),
        })
    }

    /// Points at `n + 1` equally spaced parameters.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, APoint)>> {
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                Ok((t, self.point(t)?))
            })
            .collect()
    }

    /// Distances from the point at `s` to the points at `s + dt` for the
    /// given offsets (clamped to `[0, 1]`), with the fitted constant.
    pub fn continuity(&self, metric: &BundleMetric, s: f64, offsets: &[f64]) -> Result<ContinuityReport> {
        let at = self.point(s)?;
        let mut samples = Vec::with_capacity(offsets.len());
        for dt in offsets {
            let t = (s + dt).clamp(0.0, 1.0);
            let d = metric.distance(&at, &self.point(t)?)?;
            samples.push((math::abs(t - s), d));
        }
        let constant = fit_constant(&samples);
        Ok(ContinuityReport { at: s, samples, constant })
    }
}

/// A base homotopy `H(r, s)` written in one chart; `r` deforms, `s` runs
/// along the paths.
#[derive(Clone, Debug)]
pub struct BaseHomotopy {
    manifold: Arc<Manifold>,
    chart: usize,
    components: Vec<Expr>,
}

impl BaseHomotopy {
    pub fn new(manifold: Arc<Manifold>, chart: &str, components: Vec<Expr>) -> Result<BaseHomotopy> {
        let chart = manifold.chart_index(chart)?;
        if components.len() != manifold.dim() {
            return Err(Error::InvalidArgument(format!("expected {} components", manifold.dim())));
        }
        for v in components.iter().flat_map(|e| e.variables()) {
            if v != PATH_PARAM && v != HOMOTOPY_PARAM {
                return Err(Error::UnboundVariable(v));
            }
        }
        Ok(BaseHomotopy { manifold, chart, components })
    }

    pub fn at(&self, r: f64, s: f64) -> Result<BasePoint> {
        let names = [HOMOTOPY_PARAM.to_string(), PATH_PARAM.to_string()];
        let vals = [r, s];
        let env = Bindings::new(&names, &vals);
        let y = self.components.iter().map(|c| eval_real(c, &env)).collect::<Result<Vec<_>>>()?;
        self.manifold.resolve(self.chart, &y).ok_or(Error::ChartPathUnresolvable { parameter: s })
    }
}

/// Lift of a homotopy between two lifted paths with common endpoints:
/// `H~(r, s)(f) = f(H(r, s)) + (1 - r) L_{path1(s)}(f) + r L_{path2(s)}(f)`.
#[derive(Clone, Debug)]
pub struct LiftedHomotopy {
    base: BaseHomotopy,
    first: LiftedPath,
    second: LiftedPath,
}

/// Number of parameter samples used to check boundary conditions.
const BOUNDARY_SAMPLES: usize = 16;

pub fn lift_homotopy(h: BaseHomotopy, path1: &LiftedPath, path2: &LiftedPath) -> Result<LiftedHomotopy> {
    let m = &h.manifold;
    if !same_manifold(m, path1.start.manifold()) || !same_manifold(m, path2.start.manifold()) {
        return Err(Error::ManifoldMismatch);
    }
    for (a, b, name) in [(&path1.start, &path2.start, "start"), (&path1.end, &path2.end, "end")] {
        let d = coefficient_deviation(a, b)?;
        if d > ENDPOINT_TOL {
            return Err(Error::EndpointMismatch(format!("the paths' {name} points differ by {d:e}")));
        }
    }
    for i in 0..=BOUNDARY_SAMPLES {
        let u = i as f64 / BOUNDARY_SAMPLES as f64;
        let checks = [
            (h.at(0.0, u)?, path1.curve.at(u)?, "H(0, s) is not the first path"),
            (h.at(1.0, u)?, path2.curve.at(u)?, "H(1, s) is not the second path"),
            (h.at(u, 0.0)?, path1.start.project(), "H(r, 0) moves the start point"),
            (h.at(u, 1.0)?, path1.end.project(), "H(r, 1) moves the end point"),
        ];
        for (x, y, msg) in checks {
            let gap = m.base_distance(&x, &y)?;
            if gap.is_nan() || gap > ENDPOINT_TOL {
                return Err(Error::EndpointMismatch(msg.into()));
            }
        }
    }
    Ok(LiftedHomotopy { base: h, first: path1.clone(), second: path2.clone() })
}

impl LiftedHomotopy {
    pub fn first(&self) -> &LiftedPath {
        &self.first
    }

    pub fn second(&self) -> &LiftedPath {
        &self.second
    }

    pub fn point(&self, r: f64, s: f64) -> Result<APoint> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("homotopy parameter {r} outside [0, 1]")));
        }
        if r == 0.0 {
            return self.first.point(s);
        }
        if r == 1.0 {
            return self.second.point(s);
        }
        if s == 0.0 {
            return Ok(self.first.start.clone());
        }
        if s == 1.0 {
            return Ok(self.first.end.clone());
        }
        let base = self.base.at(r, s)?;
        let (a, b) = common_frame(&self.first.point(s)?, &self.second.point(s)?, &base, s)?;
        blend(&a, &b, r)
    }

    /// Largest distance between neighbouring nodes of an `n x n` grid.
    pub fn grid_continuity(&self, metric: &BundleMetric, n: usize) -> Result<f64> {
        let n = n.max(1);
        let grid: Vec<Vec<APoint>> = (0..=n)
            .map(|i| (0..=n).map(|j| self.point(i as f64 / n as f64, j as f64 / n as f64)).collect())
            .collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                if i < n {
                    worst = worst.max(metric.distance(&grid[i][j], &grid[i + 1][j])?);
                }
                if j < n {
                    worst = worst.max(metric.distance(&grid[i][j], &grid[i][j + 1])?);
                }
            }
        }
        Ok(worst)
    }
}
