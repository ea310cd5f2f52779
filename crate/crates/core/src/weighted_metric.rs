//! Weighted norms on `A` and metrics on the Weil bundle `M^A`.
//!
//! The distance between two A-points is the base distance `d_g` of their
//! projections plus a supremum of `||L_theta(f) - L_eps(f)||_w` over a family
//! of test functions `f`. Two evaluation modes are provided:
//!
//! * **probe** (default): the supremum runs over a finite family of probes
//!   with sampled `C^k` norm at most 1. A [`Probe::Phase`] entry stands for
//!   the whole circle of functions `cos(b) f + sin(b) g`, whose supremum is
//!   computed in closed form. The result is a genuine metric.
//! * **box**: for two points in the same fiber, `L(f)` depends on `f` only
//!   through its partial derivatives at the common base point, so the
//!   supremum over the `C^k` unit ball is the maximum of a convex function
//!   over the coefficient box `[-1, 1]^N` and is found by enumerating
//!   vertices.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apoint::{same_manifold, APoint};
use crate::atlas::{BaseMetric, Manifold};
use crate::error::{Error, Result};
use crate::math;
use crate::smooth_expr::{parse, Expr, PartialsEngine};
use crate::weil_algebra::{same_algebra, AlgebraElement, Monomial, WeilAlgebra};

/// Highest order accepted by [`default_probes`].
pub const MAX_PROBE_ORDER: u32 = 4;
/// Largest number of box coordinates `#{alpha : 1 <= |alpha| <= k}`.
pub const MAX_BOX_TERMS: usize = 20;
/// Slack allowed when checking that a probe lies in the unit ball.
pub const PROBE_BOUND_SLACK: f64 = 1e-6;
/// Relative tolerance for "same base point" in box mode.
pub const FIBER_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Weights {
    /// One positive weight per nilpotent basis monomial.
    Explicit(Vec<f64>),
    /// `w_alpha = 1/|alpha|!`.
    Factorial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdealNorm {
    L1,
    L2,
    Linf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricMode {
    Probe,
    Box,
}

/// A test function, or a circle of them.
#[derive(Clone, Debug, PartialEq)]
pub enum Probe {
    Single(Expr),
    /// The family `cos(b) f + sin(b) g` for all angles `b`.
    Phase(Expr, Expr),
}

impl Probe {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Probe::Single(f) => vec![f],
            Probe::Phase(f, g) => vec![f, g],
        }
    }

    fn map(&self, op: impl Fn(&Expr) -> Expr) -> Probe {
        match self {
            Probe::Single(f) => Probe::Single(op(f)),
            Probe::Phase(f, g) => Probe::Phase(op(f), op(g)),
        }
    }

    fn scaled(&self, s: f64) -> Probe {
        if s == 1.0 {
            return self.clone();
        }
        self.map(|e| s * e.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricConfig {
    pub weights: Weights,
    pub ideal_norm: IdealNorm,
    pub mode: MetricMode,
    /// Probes in the manifold's model coordinates; `None` selects
    /// [`default_probe_family`].
    pub probes: Option<Vec<Probe>>,
    /// Derivative order of the unit ball; `None` uses the algebra's order.
    pub order: Option<u32>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            weights: Weights::Explicit(Vec::new()),
            ideal_norm: IdealNorm::L1,
            mode: MetricMode::Probe,
            probes: None,
            order: None,
        }
    }
}

impl MetricConfig {
    pub fn factorial() -> Self {
        MetricConfig { weights: Weights::Factorial, ..Default::default() }
    }

    pub fn with_mode(mut self, mode: MetricMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_norm(mut self, norm: IdealNorm) -> Self {
        self.ideal_norm = norm;
        self
    }

    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_probes(mut self, probes: Vec<Probe>) -> Self {
        self.probes = Some(probes);
        self
    }

    pub fn with_order(mut self, k: u32) -> Self {
        self.order = Some(k);
        self
    }

    /// Weight per nilpotent basis monomial. An empty explicit list means all
    /// ones.
    pub fn resolve_weights(&self, algebra: &WeilAlgebra) -> Result<Vec<f64>> {
        let n = algebra.dim() - 1;
        match &self.weights {
            Weights::Factorial => {
                Ok(algebra.basis()[1..].iter().map(|m| 1.0 / math::factorial(m.degree())).collect())
            }
            Weights::Explicit(w) if w.is_empty() => Ok(vec![1.0; n]),
            Weights::Explicit(w) => {
                if w.len() != n {
                    return Err(Error::WeightMismatch { expected: n, got: w.len() });
                }
                if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                    return Err(Error::InvalidArgument("weights must be positive".into()));
                }
                Ok(w.clone())
            }
        }
    }
}

fn ideal_norm(v: &[f64], norm: IdealNorm) -> f64 {
    match norm {
        IdealNorm::L1 => v.iter().map(|x| math::abs(*x)).sum(),
        IdealNorm::L2 => math::sqrt(v.iter().map(|x| x * x).sum()),
        IdealNorm::Linf => v.iter().fold(0.0, |m, x| f64::max(m, math::abs(*x))),
    }
}

/// `|a_1| + ||(a_i w_i)_{i >= 2}||`.
pub fn weighted_norm(a: &AlgebraElement, cfg: &MetricConfig) -> Result<f64> {
    let w = cfg.resolve_weights(a.algebra())?;
    let v: Vec<f64> = a.coeffs()[1..].iter().zip(&w).map(|(c, w)| c * w).collect();
    Ok(math::abs(a.real_part()) + ideal_norm(&v, cfg.ideal_norm))
}

/// `sup_b || cos(b) a + sin(b) b ||` for the chosen norm.
fn phase_sup(a: &[f64], b: &[f64], norm: IdealNorm) -> (f64, f64) {
    match norm {
        IdealNorm::Linf => {
            let mut best = (0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                let h = math::hypot(*x, *y);
                if h > best.0 {
                    best = (h, math::atan2(*y, *x));
                }
            }
            best
        }
        IdealNorm::L2 => {
            // largest singular value of the two-column matrix [a b]
            let p: f64 = a.iter().map(|x| x * x).sum();
            let q: f64 = b.iter().map(|x| x * x).sum();
            let r: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let half = 0.5 * (p - q);
            let lambda = 0.5 * (p + q) + math::hypot(half, r);
            (math::sqrt(lambda.max(0.0)), 0.5 * math::atan2(2.0 * r, p - q))
        }
        IdealNorm::L1 => {
            // sup_u sum |<u, v_i>| with v_i = (a_i, b_i) is the largest
            // |sum s_i v_i| over the sign patterns met as u turns once
            let mut cuts: Vec<f64> = Vec::new();
            for (x, y) in a.iter().zip(b) {
                if *x != 0.0 || *y != 0.0 {
                    let t = math::atan2(*y, *x) + math::PI / 2.0;
                    cuts.push(t - math::PI * math::floor(t / math::PI));
                }
            }
            if cuts.is_empty() {
                return (0.0, 0.0);
            }
            cuts.sort_by(f64::total_cmp);
            let mut best = (0.0, 0.0);
            for i in 0..cuts.len() {
                let hi = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + math::PI };
                let mid = 0.5 * (cuts[i] + hi);
                let (c, s) = (math::cos(mid), math::sin(mid));
                let (mut sx, mut sy) = (0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    let sign = if c * x + s * y >= 0.0 { 1.0 } else { -1.0 };
                    sx += sign * x;
                    sy += sign * y;
                }
                let v = math::hypot(sx, sy);
                if v > best.0 {
                    best = (v, math::atan2(sy, sx));
                }
            }
            best
        }
    }
}

/// Where a supremum was attained.
#[derive(Clone, Debug, PartialEq)]
pub enum Attained {
    /// Probe index and, for phase probes, the maximizing angle.
    Probe { index: usize, phase: Option<f64> },
    /// Signs of the box coordinates `c_alpha`, in model-basis order.
    Vertex(Vec<i8>),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupReport {
    pub value: f64,
    pub attained_at: Attained,
    pub mode: MetricMode,
}

/// Distance split into its two terms.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceReport {
    pub base: f64,
    pub sup: SupReport,
}

impl DistanceReport {
    pub fn total(&self) -> f64 {
        self.base + self.sup.value
    }
}

/// Weighted nilpotent parts of `L(f)` for every probe expression at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Signature(Vec<Vec<Vec<f64>>>);

/// A metric on `M^A` for fixed `M`, `A` and configuration.
#[derive(Clone, Debug)]
pub struct BundleMetric {
    manifold: Arc<Manifold>,
    algebra: Arc<WeilAlgebra>,
    cfg: MetricConfig,
    weights: Vec<f64>,
    order: u32,
    /// Model-coordinate probes after normalization.
    family: Vec<Probe>,
    /// `family` expressed in each chart.
    chart_probes: Vec<Vec<Probe>>,
}

impl BundleMetric {
    pub fn new(manifold: Arc<Manifold>, algebra: Arc<WeilAlgebra>, cfg: MetricConfig) -> Result<Self> {
        let weights = cfg.resolve_weights(&algebra)?;
        let order = cfg.order.unwrap_or(algebra.order());
        let family = match &cfg.probes {
            Some(p) if p.is_empty() => {
                return Err(Error::InvalidArgument("probe family is empty".into()));
            }
            Some(p) => {
                let p = p.clone();
                for (i, probe) in p.iter().enumerate() {
                    for v in probe.exprs().iter().flat_map(|e| e.variables()) {
                        if !manifold.model_names.contains(&v) {
                            return Err(Error::UnboundVariable(v));
                        }
                    }
                    if cfg.mode == MetricMode::Probe {
                        let bound = probe_norm(&manifold, probe, order)?;
                        if bound > 1.0 + PROBE_BOUND_SLACK {
                            return Err(Error::ProbeBound { probe: i, bound });
                        }
                    }
                }
                p
            }
            None => default_probe_family(&manifold, order)?,
        };
        let chart_probes = (0..manifold.charts.len())
            .map(|c| family.iter().map(|p| in_chart(&manifold, c, p)).collect())
            .collect();
        Ok(BundleMetric { manifold, algebra, cfg, weights, order, family, chart_probes })
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    pub fn algebra(&self) -> &Arc<WeilAlgebra> {
        &self.algebra
    }

    pub fn config(&self) -> &MetricConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// The normalized probe family in model coordinates.
    pub fn probes(&self) -> &[Probe] {
        &self.family
    }

    /// The probe family written in the coordinates of chart `chart`.
    pub fn chart_probes(&self, chart: usize) -> &[Probe] {
        &self.chart_probes[chart]
    }

    fn check(&self, p: &APoint) -> Result<()> {
        if !same_manifold(p.manifold(), &self.manifold) {
            return Err(Error::ManifoldMismatch);
        }
        if !same_algebra(p.algebra(), &self.algebra) {
            return Err(Error::AlgebraMismatch);
        }
        Ok(())
    }

    fn weighted(&self, l: &AlgebraElement) -> Vec<f64> {
        l.coeffs()[1..].iter().zip(&self.weights).map(|(c, w)| c * w).collect()
    }

    pub fn signature(&self, p: &APoint) -> Result<Signature> {
        self.check(p)?;
        let probes = &self.chart_probes[p.chart()];
        let mut out = Vec::with_capacity(probes.len());
        for probe in probes {
            let mut parts = Vec::with_capacity(2);
            for e in probe.exprs() {
                parts.push(self.weighted(&p.l_part(e)?));
            }
            out.push(parts);
        }
        Ok(Signature(out))
    }

    /// Probe-mode supremum from two signatures.
    pub fn probe_sup(&self, a: &Signature, b: &Signature) -> SupReport {
        let mut best = SupReport { value: 0.0, attained_at: Attained::None, mode: MetricMode::Probe };
        for (i, (pa, pb)) in a.0.iter().zip(&b.0).enumerate() {
            let diff = |k: usize| -> Vec<f64> { pa[k].iter().zip(&pb[k]).map(|(x, y)| x - y).collect() };
            let (v, phase) = if pa.len() == 1 {
                (ideal_norm(&diff(0), self.cfg.ideal_norm), None)
            } else {
                let (v, beta) = phase_sup(&diff(0), &diff(1), self.cfg.ideal_norm);
                (v, Some(beta))
            };
            if v > best.value || best.attained_at == Attained::None {
                best.value = v;
                best.attained_at = Attained::Probe { index: i, phase };
            }
        }
        best
    }

    /// Exact same-fiber supremum over the `C^k` unit ball.
    pub fn sup_term_box(&self, theta: &APoint, eps: &APoint) -> Result<SupReport> {
        self.check(theta)?;
        self.check(eps)?;
        let eps = eps.to_chart(theta.chart())?;
        let (x, y) = (theta.project(), eps.project());
        let chart = self.manifold.chart(theta.chart());
        for (i, (a, b)) in x.coords.iter().zip(&y.coords).enumerate() {
            let mut gap = math::abs(a - b);
            if let Some(w) = chart.wrap[i] {
                gap %= w.period;
                gap = gap.min(w.period - gap);
            }
            if gap > FIBER_TOL * (1.0 + math::abs(*a)) {
                return Err(Error::FiberMismatch { gap });
            }
        }
        let m = self.manifold.dim();
        let k_alg = self.algebra.order();
        let names: Vec<String> = (0..m).map(|i| format!("d{i}")).collect();
        let model = WeilAlgebra::truncated_with_limit(&names, k_alg, 4096)?;
        let alphas: Vec<&Monomial> = model.basis()[1..].iter().collect();
        let within = |a: &Monomial| a.degree() <= self.order;

        let nil = |p: &APoint| -> Vec<AlgebraElement> {
            p.acoords().into_iter().map(|a| a.nilpotent_part()).collect()
        };
        let (nt, ne) = (nil(theta), nil(&eps));
        let monomial = |n: &[AlgebraElement], alpha: &Monomial| -> Result<AlgebraElement> {
            let mut acc = AlgebraElement::one(self.algebra.clone());
            for (ni, &e) in n.iter().zip(alpha.exponents()) {
                acc = acc.mul(&ni.nilpotent_power(e)?)?;
            }
            Ok(acc)
        };
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for alpha in &alphas {
            let d = monomial(&nt, alpha)?.sub(&monomial(&ne, alpha)?)?;
            let w = self.weighted(&d);
            let scale = 1.0 / alpha.factorial();
            if !within(alpha) {
                if w.iter().any(|v| *v != 0.0) {
                    // derivatives beyond the ball's order are unconstrained
                    return Ok(SupReport { value: f64::INFINITY, attained_at: Attained::None, mode: MetricMode::Box });
                }
                continue;
            }
            cols.push(w.into_iter().map(|v| v * scale).collect());
        }
        let n = cols.len();
        if n > MAX_BOX_TERMS {
            return Err(Error::BoxTooLarge { terms: n, limit: MAX_BOX_TERMS });
        }
        if n == 0 {
            return Ok(SupReport { value: 0.0, attained_at: Attained::None, mode: MetricMode::Box });
        }
        // v -> ||v|| is even, so fixing c_0 = +1 halves the vertex count;
        // consecutive Gray codes differ in one sign
        let len = self.algebra.dim() - 1;
        let mut signs = vec![1i8; n];
        let mut acc = vec![0.0; len];
        for col in &cols {
            acc.iter_mut().zip(col).for_each(|(a, c)| *a += c);
        }
        let mut best = (ideal_norm(&acc, self.cfg.ideal_norm), signs.clone());
        for g in 1u64..(1u64 << (n - 1)) {
            let bit = g.trailing_zeros() as usize + 1;
            signs[bit] = -signs[bit];
            let s = 2.0 * f64::from(signs[bit]);
            acc.iter_mut().zip(&cols[bit]).for_each(|(a, c)| *a += s * c);
            let v = ideal_norm(&acc, self.cfg.ideal_norm);
            if v > best.0 {
                best = (v, signs.clone());
            }
        }
        Ok(SupReport { value: best.0, attained_at: Attained::Vertex(best.1), mode: MetricMode::Box })
    }

    pub fn distance_report(&self, theta: &APoint, eps: &APoint) -> Result<DistanceReport> {
        self.check(theta)?;
        self.check(eps)?;
        let base = self.manifold.base_distance(&theta.project(), &eps.project())?;
        let sup = match self.cfg.mode {
            MetricMode::Probe => self.probe_sup(&self.signature(theta)?, &self.signature(eps)?),
            MetricMode::Box => self.sup_term_box(theta, eps)?,
        };
        Ok(DistanceReport { base, sup })
    }

    pub fn distance(&self, theta: &APoint, eps: &APoint) -> Result<f64> {
        Ok(self.distance_report(theta, eps)?.total())
    }

    /// Probe-mode distance from precomputed signatures.
    pub fn distance_with(&self, theta: &APoint, a: &Signature, eps: &APoint, b: &Signature) -> Result<f64> {
        let base = self.manifold.base_distance(&theta.project(), &eps.project())?;
        Ok(base + self.probe_sup(a, b).value)
    }

    pub fn convergence_check(&self, seq: &[APoint], limit: &APoint, tol: f64) -> Result<ConvergenceReport> {
        let distances = seq.iter().map(|p| self.distance(p, limit)).collect::<Result<Vec<_>>>()?;
        let steps = seq.windows(2).map(|w| self.distance(&w[0], &w[1])).collect::<Result<Vec<_>>>()?;
        // Cauchy modulus: sup of distances between later terms and the term
        let mut cauchy = vec![0.0; seq.len()];
        let sigs = match self.cfg.mode {
            MetricMode::Probe => Some(seq.iter().map(|p| self.signature(p)).collect::<Result<Vec<_>>>()?),
            MetricMode::Box => None,
        };
        let stride = (seq.len() / 64).max(1);
        for i in (0..seq.len()).step_by(stride) {
            let mut worst = 0.0f64;
            for j in (i + 1..seq.len()).step_by(stride) {
                let d = match &sigs {
                    Some(s) => self.distance_with(&seq[i], &s[i], &seq[j], &s[j])?,
                    None => self.distance(&seq[i], &seq[j])?,
                };
                worst = worst.max(d);
            }
            cauchy[i] = worst;
        }
        let monotone = distances.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let last = distances.last().copied().unwrap_or(0.0);
        Ok(ConvergenceReport { distances, steps, cauchy, monotone, converged: last <= tol })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// `d(xi_n, limit)`.
    pub distances: Vec<f64>,
    /// `d(xi_n, xi_{n+1})`.
    pub steps: Vec<f64>,
    /// `sup_{m > n} d(xi_n, xi_m)` on a subsampled index set (zero elsewhere).
    pub cauchy: Vec<f64>,
    pub monotone: bool,
    pub converged: bool,
}

fn in_chart(m: &Manifold, chart: usize, p: &Probe) -> Probe {
    let c = m.chart(chart);
    let map = m.model_names.iter().cloned().zip(c.model.iter().cloned()).collect();
    p.map(|e| e.substitute(&map))
}

fn sample_grid(m: &Manifold, chart: usize) -> Vec<Vec<f64>> {
    let c = m.chart(chart);
    let dim = c.dim();
    let res = [129usize, 17, 7, 5][dim - 1];
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let mut x: Vec<f64> = idx
            .iter()
            .zip(&c.sample_box)
            .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (res - 1) as f64)
            .collect();
        c.normalize(&mut x);
        if c.contains(&x) {
            out.push(x);
        }
        let mut d = 0;
        loop {
            if d == dim {
                return with_random(m, chart, out);
            }
            idx[d] += 1;
            if idx[d] < res {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn with_random(m: &Manifold, chart: usize, mut out: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + chart as u64);
    for _ in 0..64 {
        if let Some(p) = m.sample_in_chart(chart, &mut rng) {
            out.push(p.coords);
        }
    }
    out
}

/// Sampled `C^k` norm `max_{x, |alpha| <= k} |d^alpha f(x)|` of a probe over
/// the sample grids of all charts. For a phase probe the family maximum
/// `hypot(d^alpha f, d^alpha g)` is used.
pub fn probe_norm(m: &Manifold, probe: &Probe, k: u32) -> Result<f64> {
    let mut worst = 0.0f64;
    for chart in 0..m.charts.len() {
        let engine = PartialsEngine::new(&m.chart(chart).coords, k)?;
        let p = in_chart(m, chart, probe);
        for x in sample_grid(m, chart) {
            match &p {
                Probe::Single(f) => {
                    for d in engine.derivatives(f, &x)? {
                        worst = worst.max(math::abs(d));
                    }
                }
                Probe::Phase(f, g) => {
                    let (df, dg) = (engine.derivatives(f, &x)?, engine.derivatives(g, &x)?);
                    for (a, b) in df.iter().zip(&dg) {
                        worst = worst.max(math::hypot(*a, *b));
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// The default probe family in model coordinates, each member scaled to
/// sampled `C^k` norm 1:
///
/// * circle and torus angles: the phase family `{sin, cos}` of each angle;
/// * euclidean factors: the monomials `x^alpha`, `1 <= |alpha| <= k`;
/// * the round sphere: the embedding coordinates `X`, `Y`, `Z`.
pub fn default_probe_family(m: &Manifold, k: u32) -> Result<Vec<Probe>> {
    if k > MAX_PROBE_ORDER {
        return Err(Error::OrderGuard { order: k, limit: MAX_PROBE_ORDER });
    }
    let mut raw = Vec::new();
    collect_defaults(&m.metric, &m.model_names, k.max(1), &mut raw)?;
    raw.into_iter()
        .map(|p| {
            let n = probe_norm(m, &p, k)?;
            Ok(if n > 0.0 { p.scaled(1.0 / n) } else { p })
        })
        .collect()
}

fn collect_defaults(metric: &BaseMetric, names: &[String], k: u32, out: &mut Vec<Probe>) -> Result<()> {
    let angle = |n: &String| -> Result<Probe> {
        Ok(Probe::Phase(parse(&format!("sin({n})"))?, parse(&format!("cos({n})"))?))
    };
    match metric {
        BaseMetric::Circle => out.push(angle(&names[0])?),
        BaseMetric::Torus => {
            out.push(angle(&names[0])?);
            out.push(angle(&names[1])?);
        }
        BaseMetric::Sphere2 => {
            for n in names {
                out.push(Probe::Single(Expr::var(n)));
            }
        }
        BaseMetric::Euclidean(_) => {
            let alg = WeilAlgebra::truncated_with_limit(names, k, 4096)?;
            for mono in &alg.basis()[1..] {
                let mut e: Option<Expr> = None;
                for (n, &p) in names.iter().zip(mono.exponents()) {
                    if p == 0 {
                        continue;
                    }
                    let f = if p == 1 { Expr::var(n) } else { Expr::var(n).powi(p as i32) };
                    e = Some(match e {
                        None => f,
                        Some(acc) => acc * f,
                    });
                }
                out.push(Probe::Single(e.expect("positive degree")));
            }
        }
        BaseMetric::Product(fs) => {
            let mut off = 0;
            for f in fs {
                let d = f.model_dim();
                collect_defaults(f, &names[off..off + d], k, out)?;
                off += d;
            }
        }
    }
    Ok(())
}

/// [`default_probe_family`] written in the coordinates of `chart`.
pub fn default_probes(m: &Manifold, chart: &str, k: u32) -> Result<Vec<Probe>> {
    let c = m.chart_index(chart)?;
    Ok(default_probe_family(m, k)?.iter().map(|p| in_chart(m, c, p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::BasePoint;
    use crate::smooth_expr::eval_real;
    use approx::assert_relative_eq;
    use alloc::string::ToString;
    use rand::Rng;

    fn el(a: &Arc<WeilAlgebra>, c: &[f64]) -> AlgebraElement {
        AlgebraElement::new(a.clone(), c.to_vec()).unwrap()
    }

    fn jets(k: u32) -> Arc<WeilAlgebra> {
        Arc::new(WeilAlgebra::jets(k).unwrap())
    }

    fn point(m: &Arc<Manifold>, a: &Arc<WeilAlgebra>, chart: &str, rows: &[&[f64]]) -> APoint {
        let acoords: Vec<_> = rows.iter().map(|r| el(a, r)).collect();
        APoint::new(m.clone(), a.clone(), chart, &acoords).unwrap()
    }

    #[test]
    fn weighted_norm_examples() {
        let a = jets(1);
        let cfg = MetricConfig::default().with_weights(Weights::Explicit(vec![1.0]));
        assert_eq!(weighted_norm(&el(&a, &[2.0, 3.0]), &cfg).unwrap(), 5.0);
        assert_eq!(weighted_norm(&AlgebraElement::one(a.clone()), &cfg).unwrap(), 1.0);
        let b = jets(2);
        assert_eq!(weighted_norm(&el(&b, &[0.0, 1.0, 1.0]), &MetricConfig::factorial()).unwrap(), 1.5);
        assert_eq!(
            weighted_norm(&el(&b, &[0.0, 1.0, 1.0]), &cfg),
            Err(Error::WeightMismatch { expected: 2, got: 1 })
        );
    }

    /// Independent oracle for the box supremum: brute force over every sign
    /// vector, computing `L(f)` through jet evaluation of the polynomial
    /// `sum c_alpha (x - x0)^alpha / alpha!`.
    fn box_oracle(theta: &APoint, eps: &APoint, cfg: &MetricConfig) -> f64 {
        let m = theta.manifold().dim();
        assert_eq!(m, 1);
        let k = theta.algebra().order();
        let x0 = theta.project().coords[0];
        let mut best = 0.0f64;
        for mask in 0..(1u32 << k) {
            let mut f = Expr::Const(0.0);
            for j in 1..=k {
                let c = if mask & (1 << (j - 1)) != 0 { 1.0 } else { -1.0 };
                let term = (c / math::factorial(j)) * (Expr::var("x") - x0).powi(j as i32);
                f = f + term;
            }
            let d = theta.l_part(&f).unwrap().sub(&eps.l_part(&f).unwrap()).unwrap();
            best = best.max(weighted_norm(&d, cfg).unwrap());
        }
        best
    }

    #[test]
    fn box_examples() {
        let r1 = Arc::new(Manifold::builtin("R^1").unwrap());
        let a1 = jets(1);
        let cfg = MetricConfig::default().with_mode(MetricMode::Box);
        let bm = BundleMetric::new(r1.clone(), a1.clone(), cfg.clone()).unwrap();
        let th = point(&r1, &a1, "U", &[&[0.3, 2.0]]);
        let ep = point(&r1, &a1, "U", &[&[0.3, 0.0]]);
        assert_eq!(bm.sup_term_box(&th, &th).unwrap().value, 0.0);
        let rep = bm.sup_term_box(&th, &ep).unwrap();
        assert_eq!(rep.value, 2.0);
        assert_eq!(bm.distance(&th, &ep).unwrap(), 2.0);
        assert_eq!(rep.value, box_oracle(&th, &ep, &cfg));

        // theta = x + e, eps = x + e^2 over R[e]/(e^3): the vertex
        // c = (1, -1) gives e - e^2 - e^2/2, of l1 norm 2.5
        let a2 = jets(2);
        let cfg = cfg.with_weights(Weights::Explicit(vec![1.0, 1.0]));
        let bm = BundleMetric::new(r1.clone(), a2.clone(), cfg.clone()).unwrap();
        let th = point(&r1, &a2, "U", &[&[0.3, 1.0, 0.0]]);
        let ep = point(&r1, &a2, "U", &[&[0.3, 0.0, 1.0]]);
        let oracle = box_oracle(&th, &ep, &cfg);
        assert_eq!(oracle, 2.5);
        assert_relative_eq!(bm.sup_term_box(&th, &ep).unwrap().value, oracle, epsilon = 1e-15);

        let other = point(&r1, &a2, "U", &[&[0.4, 0.0, 1.0]]);
        assert!(matches!(bm.sup_term_box(&th, &other), Err(Error::FiberMismatch { .. })));
    }

    #[test]
    fn box_guard() {
        let cfg = MetricConfig::default().with_mode(MetricMode::Box);
        let zero = |name: &str, k: u32| {
            let m = Arc::new(Manifold::builtin(name).unwrap());
            let a = jets(k);
            let bm = BundleMetric::new(m.clone(), a.clone(), cfg.clone()).unwrap();
            let p = APoint::zero_section(m.clone(), a, &BasePoint { chart: 0, coords: vec![0.0; m.dim()] }).unwrap();
            bm.sup_term_box(&p, &p)
        };
        assert_eq!(zero("R^3", 3).unwrap().value, 0.0);
        assert_eq!(zero("R^4", 3), Err(Error::BoxTooLarge { terms: 34, limit: 20 }));
    }

    #[test]
    fn circle_distances() {
        let s1 = Arc::new(Manifold::builtin("S1").unwrap());
        let a = jets(1);
        let bm = BundleMetric::new(s1.clone(), a.clone(), MetricConfig::default()).unwrap();
        let p = point(&s1, &a, "U", &[&[0.0, 0.0]]);
        let q = point(&s1, &a, "U", &[&[1.0, 0.0]]);
        assert_eq!(bm.distance(&p, &p).unwrap(), 0.0);
        assert_relative_eq!(bm.distance(&p, &q).unwrap(), 1.0, epsilon = 1e-15);
        // sin and cos already lie in the unit ball
        match &bm.probes()[0] {
            Probe::Phase(f, g) => {
                assert_eq!(f.to_string(), "sin(t)");
                assert_eq!(g.to_string(), "cos(t)");
            }
            other => panic!("{other:?}"),
        }
        // same fiber: sup_b |cos(x+b) dv| = |dv|
        let r = point(&s1, &a, "V", &[&[1.0, 0.75]]);
        assert_relative_eq!(bm.distance(&q, &r).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn default_probe_shapes() {
        let r1 = Manifold::builtin("R^1").unwrap();
        let probes = default_probes(&r1, "U", 2).unwrap();
        assert_eq!(probes.len(), 2);
        // x on [-1, 1] has C^2 norm 1, x^2 has C^2 norm 2
        let at = |p: &Probe, x: f64| match p {
            Probe::Single(f) => eval_real(f, &[("x", x)]).unwrap(),
            _ => panic!(),
        };
        assert_relative_eq!(at(&probes[0], 0.5), 0.5);
        assert_relative_eq!(at(&probes[1], 0.5), 0.125);
        for name in ["S1", "T2", "S2", "R^2", "halfplane"] {
            let m = Manifold::builtin(name).unwrap();
            for k in 1..=2 {
                for p in default_probe_family(&m, k).unwrap() {
                    assert!(probe_norm(&m, &p, k).unwrap() <= 1.0 + 1e-12, "{name}");
                }
            }
        }
        assert!(matches!(default_probe_family(&r1, 5), Err(Error::OrderGuard { .. })));
    }

    #[test]
    fn probe_bound_is_enforced() {
        let s1 = Arc::new(Manifold::builtin("S1").unwrap());
        let cfg = MetricConfig::default().with_probes(vec![Probe::Single(parse("sin(2*t)").unwrap())]);
        assert!(matches!(BundleMetric::new(s1.clone(), jets(1), cfg), Err(Error::ProbeBound { probe: 0, .. })));
        let cfg = MetricConfig::default().with_probes(vec![Probe::Single(parse("sin(t)").unwrap())]);
        assert!(BundleMetric::new(s1, jets(1), cfg).is_ok());
    }

    #[test]
    fn phase_sup_matches_dense_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for norm in [IdealNorm::L1, IdealNorm::L2, IdealNorm::Linf] {
            for _ in 0..200 {
                let n = rng.random_range(1..6);
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let exact = phase_sup(&a, &b, norm).0;
                let mut dense = 0.0f64;
                for i in 0..20000 {
                    let t = math::TAU * i as f64 / 20000.0;
                    let v: Vec<f64> = a.iter().zip(&b).map(|(x, y)| math::cos(t) * x + math::sin(t) * y).collect();
                    dense = dense.max(ideal_norm(&v, norm));
                }
                assert!(exact >= dense - 1e-12, "{norm:?}");
                assert!(exact <= dense + 1e-6, "{norm:?}: {exact} vs {dense}");
            }
        }
    }

    #[test]
    fn box_dominates_probes_on_fibers() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for name in ["S1", "R^2", "S2"] {
            let m = Arc::new(Manifold::builtin(name).unwrap());
            let a = jets(2);
            let probe = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default()).unwrap();
            let boxed =
                BundleMetric::new(m.clone(), a.clone(), MetricConfig::default().with_mode(MetricMode::Box)).unwrap();
            for _ in 0..100 {
                let base = m.sample_point(&mut rng);
                let p = APoint::sample_over(m.clone(), a.clone(), &base, 1.0, &mut rng);
                let q = APoint::sample_over(m.clone(), a.clone(), &base, 1.0, &mut rng);
                let pv = probe.distance_report(&p, &q).unwrap().sup.value;
                let bv = boxed.sup_term_box(&p, &q).unwrap().value;
                assert!(bv >= pv - 1e-12, "{name}: box {bv} < probe {pv}");
            }
        }
    }

    #[test]
    fn factorial_weights_damp_but_do_not_bound() {
        // f_n = sin(n^2 t), cos(n^2 t) stay in the C^0 unit ball while the
        // first-order part of L(f_n) grows like n^2 under either weighting
        let s1 = Arc::new(Manifold::builtin("S1").unwrap());
        let a = jets(2);
        let p = point(&s1, &a, "U", &[&[0.4, 0.3, 0.2]]);
        let q = point(&s1, &a, "U", &[&[0.4, -0.1, 0.5]]);
        let plain = MetricConfig::default();
        let fact = MetricConfig::factorial();
        let term = |n: u32| {
            let mut best = 0.0f64;
            for f in [format!("sin({}*t)", n * n), format!("cos({}*t)", n * n)] {
                let f = parse(&f).unwrap();
                let d = p.l_part(&f).unwrap().sub(&q.l_part(&f).unwrap()).unwrap();
                let (u, w) = (weighted_norm(&d, &plain).unwrap(), weighted_norm(&d, &fact).unwrap());
                assert!(w <= u);
                best = best.max(w);
            }
            best
        };
        assert!(term(10) > 20.0 * term(1));
    }
}
