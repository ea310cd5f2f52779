//! Chart-described manifolds.
//!
//! A [`Manifold`] is a list of [`Chart`]s, expression-valued
//! [`TransitionMap`]s between them and a [`BaseMetric`] with a closed-form
//! distance. Each chart also carries `model` expressions sending its
//! coordinates to the model space of the metric (an angle for the circle, a
//! unit vector for the round sphere, and so on), which is how points in
//! different charts are compared.
//!
//! Periodic coordinates carry a [`Wrap`]; coordinates are reduced into
//! `[start, start + period)` before any domain check.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{self, PI, TAU};
use crate::smooth_expr::{eval_real, parse, Bindings, Expr};

/// `g > 0` (strict) or `g >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub expr: Expr,
    pub strict: bool,
    source: String,
}

impl Constraint {
    /// Parses `a > b`, `a >= b`, `a < b`, `a <= b`, or a bare `g` meaning `g > 0`.
    pub fn parse(src: &str) -> Result<Constraint> {
        let ops: [(&str, bool, bool); 4] =
            [(">=", false, false), ("<=", false, true), (">", true, false), ("<", true, true)];
        for (op, strict, flip) in ops {
            if let Some((l, r)) = src.split_once(op) {
                let (l, r) = (parse(l)?, parse(r)?);
                let expr = if flip { r - l } else { l - r };
                return Ok(Constraint { expr, strict, source: src.trim().to_string() });
            }
        }
        Ok(Constraint { expr: parse(src)?, strict: true, source: src.trim().to_string() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn holds(&self, coords: &[String], values: &[f64]) -> bool {
        match eval_real(&self.expr, &Bindings::new(coords, values)) {
            Ok(g) if self.strict => g > 0.0,
            Ok(g) => g >= 0.0,
            Err(_) => false,
        }
    }

    fn rename(&self, map: &BTreeMap<String, Expr>) -> Constraint {
        let mut source = self.source.clone();
        for (from, to) in map {
            source = rename_ident(&source, from, &to.to_string());
        }
        Constraint { expr: self.expr.substitute(map), strict: self.strict, source }
    }
}

fn rename_ident(src: &str, from: &str, to: &str) -> String {
    let mut out = String::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            out.push_str(if word == from { to } else { word });
        } else if c.is_ascii_digit() || c == b'.' {
            // numbers such as `1e5` must not be split into identifiers
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                i += 1;
            }
            out.push_str(&src[start..i]);
        } else {
            out.push(c as char);
            i += 1;
        }
    }
    out
}

/// A periodic coordinate reduced into `[start, start + period)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrap {
    pub start: f64,
    pub period: f64,
}

impl Wrap {
    pub fn apply(&self, x: f64) -> f64 {
        let d = x - self.start;
        let r = d - self.period * math::floor(d / self.period);
        // the reduction can round up to exactly `period`
        if r >= self.period {
            self.start
        } else {
            self.start + r
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub id: String,
    pub coords: Vec<String>,
    pub domain: Vec<Constraint>,
    pub boundary: bool,
    pub wrap: Vec<Option<Wrap>>,
    /// Chart coordinates to metric model coordinates. Filled in by
    /// [`Manifold::new`] when left empty.
    pub model: Vec<Expr>,
    /// Coordinate box used when sampling the chart.
    pub sample_box: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new(id: &str, coords: &[&str], domain: &[&str]) -> Result<Chart> {
        Ok(Chart {
            id: id.to_string(),
            coords: coords.iter().map(|c| c.to_string()).collect(),
            domain: domain.iter().map(|d| Constraint::parse(d)).collect::<Result<_>>()?,
            boundary: false,
            wrap: vec![None; coords.len()],
            model: Vec::new(),
            sample_box: vec![(-1.0, 1.0); coords.len()],
        })
    }

    pub fn with_wrap(mut self, coord: usize, start: f64, period: f64) -> Chart {
        self.wrap[coord] = Some(Wrap { start, period });
        self.sample_box[coord] = (start, start + period);
        self
    }

    pub fn with_model(mut self, model: &[&str]) -> Result<Chart> {
        self.model = model.iter().map(|m| parse(m)).collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn with_box(mut self, sample_box: Vec<(f64, f64)>) -> Chart {
        self.sample_box = sample_box;
        self
    }

    pub fn with_boundary(mut self, boundary: bool) -> Chart {
        self.boundary = boundary;
        self
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn normalize(&self, coords: &mut [f64]) {
        for (c, w) in coords.iter_mut().zip(&self.wrap) {
            if let Some(w) = w {
                *c = w.apply(*c);
            }
        }
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.iter().all(|c| c.is_finite()) && self.domain.iter().all(|d| d.holds(&self.coords, coords))
    }

    fn rename(&self, map: &BTreeMap<String, Expr>, names: &BTreeMap<String, String>) -> Chart {
        Chart {
            id: self.id.clone(),
            coords: self.coords.iter().map(|c| names.get(c).unwrap_or(c).clone()).collect(),
            domain: self.domain.iter().map(|d| d.rename(map)).collect(),
            boundary: self.boundary,
            wrap: self.wrap.clone(),
            model: self.model.iter().map(|m| m.substitute(map)).collect(),
            sample_box: self.sample_box.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMap {
    pub from: String,
    pub to: String,
    /// Target coordinates as expressions in the source coordinates.
    pub components: Vec<Expr>,
}

impl TransitionMap {
    pub fn new(from: &str, to: &str, components: &[&str]) -> Result<TransitionMap> {
        Ok(TransitionMap {
            from: from.to_string(),
            to: to.to_string(),
            components: components.iter().map(|c| parse(c)).collect::<Result<_>>()?,
        })
    }
}

/// Closed-form distances on the model space of a manifold.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseMetric {
    Euclidean(usize),
    /// Arc length on the unit circle; the model coordinate is an angle.
    Circle,
    /// Flat torus; two angles.
    Torus,
    /// Round unit sphere; model coordinates are a unit vector in `R^3`.
    Sphere2,
    /// l2 combination of factor distances.
    Product(Vec<BaseMetric>),
}

impl BaseMetric {
    pub fn model_dim(&self) -> usize {
        match self {
            BaseMetric::Euclidean(n) => *n,
            BaseMetric::Circle => 1,
            BaseMetric::Torus => 2,
            BaseMetric::Sphere2 => 3,
            BaseMetric::Product(fs) => fs.iter().map(BaseMetric::model_dim).sum(),
        }
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            BaseMetric::Euclidean(_) => {
                math::sqrt(p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum())
            }
            BaseMetric::Circle => math::angle_gap(p[0], q[0]),
            BaseMetric::Torus => math::hypot(math::angle_gap(p[0], q[0]), math::angle_gap(p[1], q[1])),
            BaseMetric::Sphere2 => {
                let cross = [
                    p[1] * q[2] - p[2] * q[1],
                    p[2] * q[0] - p[0] * q[2],
                    p[0] * q[1] - p[1] * q[0],
                ];
                let s = math::sqrt(cross.iter().map(|c| c * c).sum());
                let c: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
                math::atan2(s, c)
            }
            BaseMetric::Product(fs) => {
                let mut off = 0;
                let mut acc = 0.0;
                for f in fs {
                    let d = f.model_dim();
                    let v = f.distance(&p[off..off + d], &q[off..off + d]);
                    acc += v * v;
                    off += d;
                }
                math::sqrt(acc)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            BaseMetric::Euclidean(_) => "euclidean".to_string(),
            BaseMetric::Circle => "circle".to_string(),
            BaseMetric::Torus => "torus".to_string(),
            BaseMetric::Sphere2 => "sphere2".to_string(),
            BaseMetric::Product(fs) => {
                let names: Vec<String> = fs.iter().map(BaseMetric::name).collect();
                format!("product({})", names.join(","))
            }
        }
    }

    fn times(&self, other: &BaseMetric) -> BaseMetric {
        match (self, other) {
            (BaseMetric::Circle, BaseMetric::Circle) => BaseMetric::Torus,
            (BaseMetric::Euclidean(a), BaseMetric::Euclidean(b)) => BaseMetric::Euclidean(a + b),
            (BaseMetric::Product(a), BaseMetric::Product(b)) => {
                BaseMetric::Product(a.iter().chain(b).cloned().collect())
            }
            (BaseMetric::Product(a), b) => {
                BaseMetric::Product(a.iter().cloned().chain([b.clone()]).collect())
            }
            (a, BaseMetric::Product(b)) => {
                BaseMetric::Product([a.clone()].into_iter().chain(b.iter().cloned()).collect())
            }
            (a, b) => BaseMetric::Product(vec![a.clone(), b.clone()]),
        }
    }
}

/// A point of `M` in a specific chart.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePoint {
    pub chart: usize,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub name: String,
    pub charts: Vec<Chart>,
    pub transitions: Vec<TransitionMap>,
    pub metric: BaseMetric,
    /// Names of the model coordinates, used to write chart-independent probes.
    pub model_names: Vec<String>,
    pub compact: bool,
    dim: usize,
}

/// Largest supported manifold dimension.
pub const MAX_MANIFOLD_DIM: usize = 4;

impl Manifold {
    /// Validates an atlas and fills in missing chart models.
    ///
    /// A chart without a model inherits it from chart 0 through a declared
    /// transition; chart 0 defaults to its own coordinates, which requires a
    /// metric whose model dimension equals the manifold dimension.
    pub fn new(
        name: &str,
        mut charts: Vec<Chart>,
        transitions: Vec<TransitionMap>,
        metric: BaseMetric,
        model_names: Option<Vec<String>>,
        compact: bool,
    ) -> Result<Manifold> {
        let bad = |msg: String| Error::InvalidManifold(msg);
        let first = charts.first().ok_or_else(|| bad("no charts".into()))?;
        let dim = first.dim();
        if dim == 0 || dim > MAX_MANIFOLD_DIM {
            return Err(bad(format!("dimension {dim} is outside 1..={MAX_MANIFOLD_DIM}")));
        }
        for (i, c) in charts.iter().enumerate() {
            if charts[..i].iter().any(|d| d.id == c.id) {
                return Err(bad(format!("duplicate chart id `{}`", c.id)));
            }
            if c.dim() != dim || c.wrap.len() != dim || c.sample_box.len() != dim {
                return Err(bad(format!("chart `{}` has the wrong dimension", c.id)));
            }
            for (j, n) in c.coords.iter().enumerate() {
                if c.coords[..j].contains(n) {
                    return Err(bad(format!("chart `{}` repeats coordinate `{n}`", c.id)));
                }
                if parse(n) != Ok(Expr::var(n)) {
                    return Err(bad(format!("`{n}` is not a valid coordinate name")));
                }
            }
            for d in &c.domain {
                for v in d.expr.variables() {
                    if !c.coords.contains(&v) {
                        return Err(bad(format!("domain of `{}` uses unknown `{v}`", c.id)));
                    }
                }
            }
        }
        let index = |id: &str| charts.iter().position(|c| c.id == id);
        for t in &transitions {
            let (Some(f), Some(_)) = (index(&t.from), index(&t.to)) else {
                return Err(bad(format!("transition {} -> {} names an unknown chart", t.from, t.to)));
            };
            if t.components.len() != dim {
                return Err(bad(format!("transition {} -> {} has the wrong arity", t.from, t.to)));
            }
            for v in t.components.iter().flat_map(Expr::variables) {
                if !charts[f].coords.contains(&v) {
                    return Err(bad(format!("transition {} -> {} uses unknown `{v}`", t.from, t.to)));
                }
            }
            if !transitions.iter().any(|r| r.from == t.to && r.to == t.from) {
                return Err(bad(format!("transition {} -> {} has no inverse", t.from, t.to)));
            }
        }

        let model_dim = metric.model_dim();
        if charts[0].model.is_empty() {
            if model_dim != dim {
                return Err(bad(format!("chart `{}` needs explicit model expressions", charts[0].id)));
            }
            charts[0].model = charts[0].coords.iter().map(|c| Expr::var(c)).collect();
        }
        for i in 1..charts.len() {
            if charts[i].model.is_empty() {
                let t = transitions
                    .iter()
                    .find(|t| t.from == charts[i].id && t.to == charts[0].id)
                    .ok_or_else(|| bad(format!("chart `{}` needs a model", charts[i].id)))?;
                let map: BTreeMap<String, Expr> =
                    charts[0].coords.iter().cloned().zip(t.components.iter().cloned()).collect();
                charts[i].model = charts[0].model.iter().map(|m| m.substitute(&map)).collect();
            }
        }
        for c in &charts {
            if c.model.len() != model_dim {
                return Err(bad(format!("chart `{}` model has {} components, metric needs {model_dim}", c.id, c.model.len())));
            }
            for v in c.model.iter().flat_map(Expr::variables) {
                if !c.coords.contains(&v) {
                    return Err(bad(format!("model of `{}` uses unknown `{v}`", c.id)));
                }
            }
        }
        let model_names = match model_names {
            Some(n) if n.len() == model_dim => n,
            Some(_) => return Err(bad("model names do not match the metric".into())),
            None if model_dim == dim => charts[0].coords.clone(),
            None => (0..model_dim).map(|i| format!("m{i}")).collect(),
        };
        Ok(Manifold { name: name.to_string(), charts, transitions, metric, model_names, compact, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_boundary(&self) -> bool {
        self.charts.iter().any(|c| c.boundary)
    }

    pub fn chart_index(&self, id: &str) -> Result<usize> {
        self.charts.iter().position(|c| c.id == id).ok_or_else(|| Error::UnknownChart(id.to_string()))
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    /// A validated point; periodic coordinates are wrapped first.
    pub fn point(&self, chart: &str, coords: &[f64]) -> Result<BasePoint> {
        self.point_at(self.chart_index(chart)?, coords.to_vec())
    }

    pub fn point_at(&self, chart: usize, mut coords: Vec<f64>) -> Result<BasePoint> {
        let c = &self.charts[chart];
        if coords.len() != self.dim {
            return Err(Error::InvalidArgument(format!("expected {} coordinates", self.dim)));
        }
        c.normalize(&mut coords);
        if !c.contains(&coords) {
            return Err(Error::ChartDomain { chart: c.id.clone() });
        }
        Ok(BasePoint { chart, coords })
    }

    pub fn check(&self, p: &BasePoint) -> Result<()> {
        if p.chart < self.charts.len() && self.charts[p.chart].contains(&p.coords) {
            Ok(())
        } else {
            let id = self.charts.get(p.chart).map_or("?", |c| c.id.as_str());
            Err(Error::ChartDomain { chart: id.to_string() })
        }
    }

    /// Declared transitions from chart `from` to chart `to`.
    pub fn transitions_between(&self, from: usize, to: usize) -> impl Iterator<Item = &TransitionMap> {
        let (f, t) = (&self.charts[from].id, &self.charts[to].id);
        self.transitions.iter().filter(move |tr| &tr.from == f && &tr.to == t)
    }

    /// Applies `t` to coordinates of its source chart, wrapping the result.
    /// Fails unless the image lies in the target chart.
    pub fn apply_transition(&self, t: &TransitionMap, coords: &[f64]) -> Result<Vec<f64>> {
        let from = self.chart_index(&t.from)?;
        let to = self.chart_index(&t.to)?;
        let env = Bindings::new(&self.charts[from].coords, coords);
        let mut out = t.components.iter().map(|c| eval_real(c, &env)).collect::<Result<Vec<_>>>()?;
        self.charts[to].normalize(&mut out);
        if !self.charts[to].contains(&out) {
            return Err(Error::ChartDomain { chart: t.to.clone() });
        }
        Ok(out)
    }

    /// The same point expressed in another chart.
    pub fn transport_base(&self, p: &BasePoint, to: usize) -> Result<BasePoint> {
        if p.chart == to {
            return Ok(p.clone());
        }
        for t in self.transitions_between(p.chart, to) {
            if let Ok(coords) = self.apply_transition(t, &p.coords) {
                return Ok(BasePoint { chart: to, coords });
            }
        }
        Err(Error::ChartDomain { chart: self.charts[to].id.clone() })
    }

    /// Expresses coordinates given in `chart` (possibly outside its domain)
    /// in the first chart that contains them: `chart` itself after wrapping,
    /// otherwise the target of a declared transition.
    pub fn resolve(&self, chart: usize, coords: &[f64]) -> Option<BasePoint> {
        let mut c = coords.to_vec();
        self.charts[chart].normalize(&mut c);
        if self.charts[chart].contains(&c) {
            return Some(BasePoint { chart, coords: c });
        }
        for t in self.transitions.iter().filter(|t| t.from == self.charts[chart].id) {
            if let Ok(out) = self.apply_transition(t, &c) {
                return Some(BasePoint { chart: self.chart_index(&t.to).ok()?, coords: out });
            }
        }
        None
    }

    pub fn model_coords(&self, p: &BasePoint) -> Result<Vec<f64>> {
        let c = &self.charts[p.chart];
        let env = Bindings::new(&c.coords, &p.coords);
        c.model.iter().map(|m| eval_real(m, &env)).collect()
    }

    /// Closed-form Riemannian distance `d_g`.
    pub fn base_distance(&self, p: &BasePoint, q: &BasePoint) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.metric.distance(&self.model_coords(p)?, &self.model_coords(q)?))
    }

    /// A point drawn uniformly from the sample box of a random chart, retried
    /// until it lies in the chart domain.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> BasePoint {
        loop {
            let chart = rng.random_range(0..self.charts.len());
            if let Some(p) = self.sample_in_chart(chart, rng) {
                return p;
            }
        }
    }

    pub fn sample_in_chart<R: Rng + ?Sized>(&self, chart: usize, rng: &mut R) -> Option<BasePoint> {
        let c = &self.charts[chart];
        for _ in 0..1000 {
            let mut coords: Vec<f64> =
                c.sample_box.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect();
            c.normalize(&mut coords);
            if c.contains(&coords) {
                return Some(BasePoint { chart, coords });
            }
        }
        None
    }

    /// Largest `|back(fwd(x)) - x|` (wrapped) over sampled overlap points of
    /// every declared transition pair.
    pub fn transition_roundtrip_error<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> f64 {
        let mut worst = 0.0f64;
        for t in &self.transitions {
            let from = self.chart_index(&t.from).expect("validated");
            let mut hits = 0;
            let mut tries = 0;
            while hits < samples && tries < 20 * samples {
                tries += 1;
                let Some(p) = self.sample_in_chart(from, rng) else { break };
                let Ok(q) = self.apply_transition(t, &p.coords) else { continue };
                let back = self
                    .transitions
                    .iter()
                    .filter(|r| r.from == t.to && r.to == t.from)
                    .find_map(|r| self.apply_transition(r, &q).ok());
                let Some(back) = back else { continue };
                hits += 1;
                for (i, (a, b)) in back.iter().zip(&p.coords).enumerate() {
                    let gap = match self.charts[from].wrap[i] {
                        Some(w) => {
                            let d = math::abs(a - b) % w.period;
                            d.min(w.period - d)
                        }
                        None => math::abs(a - b),
                    };
                    worst = worst.max(gap);
                }
            }
        }
        worst
    }

    /// `self x other` with product charts `A*B`; coordinate names of `other`
    /// that collide are suffixed with a digit.
    pub fn product(&self, other: &Manifold) -> Result<Manifold> {
        let taken: Vec<String> = self.charts.iter().flat_map(|c| c.coords.iter().cloned()).collect();
        let mut names = BTreeMap::new();
        for c in &other.charts {
            for n in &c.coords {
                if names.contains_key(n) {
                    continue;
                }
                let mut new = n.clone();
                let mut k = 2;
                while taken.contains(&new) || names.values().any(|v: &String| v == &new) {
                    new = format!("{n}{k}");
                    k += 1;
                }
                names.insert(n.clone(), new);
            }
        }
        let map: BTreeMap<String, Expr> = names.iter().map(|(k, v)| (k.clone(), Expr::var(v))).collect();
        let other_charts: Vec<Chart> = other.charts.iter().map(|c| c.rename(&map, &names)).collect();

        let mut charts = Vec::new();
        for a in &self.charts {
            for b in &other_charts {
                charts.push(Chart {
                    id: format!("{}*{}", a.id, b.id),
                    coords: a.coords.iter().chain(&b.coords).cloned().collect(),
                    domain: a.domain.iter().chain(&b.domain).cloned().collect(),
                    boundary: a.boundary || b.boundary,
                    wrap: a.wrap.iter().chain(&b.wrap).cloned().collect(),
                    model: a.model.iter().chain(&b.model).cloned().collect(),
                    sample_box: a.sample_box.iter().chain(&b.sample_box).cloned().collect(),
                });
            }
        }

        // every pair (t or identity) x (s or identity) except identity x identity
        let identity = |c: &Chart| c.coords.iter().map(|n| Expr::var(n)).collect::<Vec<_>>();
        let mut left: Vec<(String, String, Vec<Expr>)> =
            self.charts.iter().map(|c| (c.id.clone(), c.id.clone(), identity(c))).collect();
        left.extend(self.transitions.iter().map(|t| (t.from.clone(), t.to.clone(), t.components.clone())));
        let mut right: Vec<(String, String, Vec<Expr>)> =
            other_charts.iter().map(|c| (c.id.clone(), c.id.clone(), identity(c))).collect();
        right.extend(other.transitions.iter().map(|t| {
            let comps = t.components.iter().map(|e| e.substitute(&map)).collect();
            (t.from.clone(), t.to.clone(), comps)
        }));
        let mut transitions = Vec::new();
        for (i, (af, at, ac)) in left.iter().enumerate() {
            for (j, (bf, bt, bc)) in right.iter().enumerate() {
                if i < self.charts.len() && j < other_charts.len() {
                    continue;
                }
                transitions.push(TransitionMap {
                    from: format!("{af}*{bf}"),
                    to: format!("{at}*{bt}"),
                    components: ac.iter().chain(bc).cloned().collect(),
                });
            }
        }

        let mut model_names = self.model_names.clone();
        for n in &other.model_names {
            let mut new = names.get(n).cloned().unwrap_or_else(|| n.clone());
            let mut k = 2;
            while model_names.contains(&new) {
                new = format!("{n}{k}");
                k += 1;
            }
            model_names.push(new);
        }
        Manifold::new(
            &format!("{}x{}", self.name, other.name),
            charts,
            transitions,
            self.metric.times(&other.metric),
            Some(model_names),
            self.compact && other.compact,
        )
    }

    /// Same manifold under a new name.
    pub fn renamed(mut self, name: &str) -> Manifold {
        self.name = name.to_string();
        self
    }

    /// Built-in manifolds: `R^1`..`R^4` (also `R1`..`R4`), `S1`, `T2`, `S2`,
    /// `CP1` (as `S2`) and `halfplane`.
    pub fn builtin(name: &str) -> Result<Manifold> {
        let euclid = |m: usize| -> Result<Manifold> {
            let coords = &["x", "y", "z", "w"][..m];
            let chart = Chart::new("U", coords, &[])?;
            Manifold::new(&format!("R^{m}"), vec![chart], vec![], BaseMetric::Euclidean(m), None, false)
        };
        match name {
            "R^1" | "R1" => euclid(1),
            "R^2" | "R2" => euclid(2),
            "R^3" | "R3" => euclid(3),
            "R^4" | "R4" => euclid(4),
            "S1" => circle("t"),
            "T2" => Ok(circle("u")?.product(&circle("v")?)?.renamed("T2")),
            "S2" | "CP1" => sphere(name),
            "halfplane" => {
                let chart = Chart::new("H", &["x", "y"], &["x >= 0"])?
                    .with_boundary(true)
                    .with_box(vec![(0.0, 1.0), (-1.0, 1.0)]);
                Manifold::new("halfplane", vec![chart], vec![], BaseMetric::Euclidean(2), None, false)
            }
            _ => Err(Error::UnknownManifold(name.to_string())),
        }
    }
}

/// The circle with two angle charts: `U` over `[0, 2pi)` and `V` over
/// `(-pi, pi)`.
pub fn circle(coord: &str) -> Result<Manifold> {
    let u = Chart::new("U", &[coord], &[&format!("{coord} >= 0"), &format!("{coord} < 2*pi")])?
        .with_wrap(0, 0.0, TAU);
    let v = Chart::new("V", &[coord], &[&format!("{coord} > -pi"), &format!("{coord} < pi")])?
        .with_wrap(0, -PI, TAU);
    let transitions = vec![
        TransitionMap::new("U", "V", &[&format!("{coord} - 2*pi")])?,
        TransitionMap::new("V", "U", &[&format!("{coord} + 2*pi")])?,
    ];
    Manifold::new("S1", vec![u, v], transitions, BaseMetric::Circle, Some(vec![coord.to_string()]), true)
}

fn sphere(name: &str) -> Result<Manifold> {
    // stereographic projection from the north (N) and south (S) poles
    let n = Chart::new("N", &["x", "y"], &[])?.with_model(&[
        "2*x/(1 + x^2 + y^2)",
        "2*y/(1 + x^2 + y^2)",
        "(x^2 + y^2 - 1)/(1 + x^2 + y^2)",
    ])?;
    let s = Chart::new("S", &["x", "y"], &[])?.with_model(&[
        "2*x/(1 + x^2 + y^2)",
        "2*y/(1 + x^2 + y^2)",
        "(1 - x^2 - y^2)/(1 + x^2 + y^2)",
    ])?;
    let inversion = ["x/(x^2 + y^2)", "y/(x^2 + y^2)"];
    let transitions =
        vec![TransitionMap::new("N", "S", &inversion)?, TransitionMap::new("S", "N", &inversion)?];
    let names = ["X", "Y", "Z"].iter().map(|s| s.to_string()).collect();
    Manifold::new(name, vec![n, s], transitions, BaseMetric::Sphere2, Some(names), true)
}

impl fmt::Display for BasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:?}", self.chart, self.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circle_wraparound_distance() {
        let s1 = Manifold::builtin("S1").unwrap();
        assert_eq!(s1.dim(), 1);
        assert!(s1.compact);
        let p = s1.point("U", &[0.1]).unwrap();
        let q = s1.point("U", &[6.2]).unwrap();
        assert_relative_eq!(s1.base_distance(&p, &q).unwrap(), TAU - 6.1, epsilon = 1e-12);
        assert_eq!(s1.base_distance(&p, &p).unwrap(), 0.0);
        // same point seen from the other chart
        let q2 = s1.transport_base(&q, 1).unwrap();
        assert_relative_eq!(q2.coords[0], 6.2 - TAU, epsilon = 1e-12);
        assert!(s1.base_distance(&q, &q2).unwrap() < 1e-12);
    }

    #[test]
    fn circle_charts() {
        let s1 = Manifold::builtin("S1").unwrap();
        assert_eq!(s1.point("U", &[-0.5]).unwrap().coords[0], TAU - 0.5);
        assert!(s1.point("V", &[PI]).is_err());
        assert!(s1.transport_base(&s1.point("U", &[PI]).unwrap(), 1).is_err());
        let r = s1.resolve(1, &[PI + 0.25]).unwrap();
        assert_relative_eq!(r.coords[0], -PI + 0.25, epsilon = 1e-15);
    }

    #[test]
    fn euclidean_plane() {
        let r2 = Manifold::builtin("R^2").unwrap();
        assert!(!r2.compact);
        assert_eq!(r2.dim(), 2);
        let p = r2.point("U", &[0.0, 0.0]).unwrap();
        let q = r2.point("U", &[3.0, 4.0]).unwrap();
        assert_eq!(r2.base_distance(&p, &q).unwrap(), 5.0);
    }

    #[test]
    fn halfplane_has_boundary_chart() {
        let h = Manifold::builtin("halfplane").unwrap();
        assert!(h.has_boundary());
        assert!(h.point("H", &[0.0, 1.0]).is_ok());
        assert_eq!(h.point("H", &[-0.1, 1.0]), Err(Error::ChartDomain { chart: "H".into() }));
        let outside = BasePoint { chart: 0, coords: vec![-1.0, 0.0] };
        assert!(matches!(h.base_distance(&outside, &outside), Err(Error::ChartDomain { .. })));
    }

    #[test]
    fn sphere_distance_across_charts() {
        let s2 = Manifold::builtin("S2").unwrap();
        // (0,0) in N is the south pole, (0,0) in S the north pole
        let south = s2.point("N", &[0.0, 0.0]).unwrap();
        let north = s2.point("S", &[0.0, 0.0]).unwrap();
        assert_relative_eq!(s2.base_distance(&south, &north).unwrap(), PI, epsilon = 1e-12);
        let eq = s2.point("N", &[1.0, 0.0]).unwrap();
        assert_relative_eq!(s2.base_distance(&south, &eq).unwrap(), PI / 2.0, epsilon = 1e-12);
        let eq_s = s2.transport_base(&eq, 1).unwrap();
        assert!(s2.base_distance(&eq, &eq_s).unwrap() < 1e-10);
        assert!(s2.transport_base(&south, 1).is_err());
    }

    #[test]
    fn products() {
        let s1 = Manifold::builtin("S1").unwrap();
        let t2 = s1.product(&s1).unwrap();
        assert_eq!(t2.metric, BaseMetric::Torus);
        assert_eq!(t2.charts.len(), 4);
        assert_eq!(t2.charts[0].coords, ["t", "t2"]);
        assert_eq!(t2.transitions.len(), 12);

        let r1 = Manifold::builtin("R^1").unwrap();
        let r2 = r1.product(&r1).unwrap();
        assert_eq!(r2.metric, BaseMetric::Euclidean(2));
        assert_eq!(r2.charts[0].coords, ["x", "x2"]);

        let cyl = s1.product(&r1).unwrap();
        let p = cyl.point("U*U", &[0.1, 0.0]).unwrap();
        let q = cyl.point("U*U", &[6.2, 2.0]).unwrap();
        let arc = TAU - 6.1;
        assert_relative_eq!(cyl.base_distance(&p, &q).unwrap(), (arc * arc + 4.0).sqrt(), epsilon = 1e-12);

        let t = Manifold::builtin("T2").unwrap();
        assert_eq!(t.charts[0].coords, ["u", "v"]);
        assert_eq!(t.metric, BaseMetric::Torus);
    }

    #[test]
    fn validation() {
        let c = Chart::new("A", &["x"], &[]).unwrap();
        let t = TransitionMap::new("A", "A", &["x + 1"]).unwrap();
        assert!(Manifold::new("m", vec![c.clone()], vec![t], BaseMetric::Euclidean(1), None, false).is_ok());
        let d = Chart::new("B", &["x"], &[]).unwrap();
        let one_way = TransitionMap::new("A", "B", &["x"]).unwrap();
        assert!(matches!(
            Manifold::new("m", vec![c.clone(), d], vec![one_way], BaseMetric::Euclidean(1), None, false),
            Err(Error::InvalidManifold(_))
        ));
        assert!(Manifold::new("m", vec![c], vec![], BaseMetric::Sphere2, None, true).is_err());
        assert_eq!(Manifold::builtin("K3"), Err(Error::UnknownManifold("K3".into())));
    }

    #[test]
    fn constraints() {
        let names = ["x".to_string()];
        assert!(Constraint::parse("x >= 0").unwrap().holds(&names, &[0.0]));
        assert!(!Constraint::parse("x > 0").unwrap().holds(&names, &[0.0]));
        assert!(Constraint::parse("1 < x").unwrap().holds(&names, &[2.0]));
        assert!(Constraint::parse("1 - x^2").unwrap().holds(&names, &[0.5]));
        assert!(!Constraint::parse("log(x) > 0").unwrap().holds(&names, &[-1.0]));
        assert_eq!(rename_ident("t + 1e5*t2 - t", "t", "u"), "u + 1e5*t2 - u");
    }

    #[test]
    fn transition_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["S1", "T2", "S2", "R^3"] {
            let m = Manifold::builtin(name).unwrap();
            assert!(m.transition_roundtrip_error(1000, &mut rng) <= 1e-9, "{name}");
        }
    }

    #[test]
    fn base_distance_is_a_metric_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["S1", "T2", "S2", "R^2", "halfplane"] {
            let m = Manifold::builtin(name).unwrap();
            for _ in 0..1000 {
                let (p, q, r) = (m.sample_point(&mut rng), m.sample_point(&mut rng), m.sample_point(&mut rng));
                let pq = m.base_distance(&p, &q).unwrap();
                assert_eq!(pq, m.base_distance(&q, &p).unwrap(), "{name}");
                let pr = m.base_distance(&p, &r).unwrap();
                let rq = m.base_distance(&r, &q).unwrap();
                assert!(pq <= pr + rq + 1e-12, "{name}: {pq} > {pr} + {rq}");
            }
        }
    }
}
