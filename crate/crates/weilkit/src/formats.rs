//! JSON input formats and their conversion into core types, plus the
//! output encoders.
//!
//! All outputs are `serde_json::Value` trees; objects are `BTreeMap`-backed,
//! so keys come out sorted.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::{json, Map, Value};
use weilkit_core::atlas::{BaseMetric, Chart, TransitionMap};
use weilkit_core::dynamics::{DiffeoPair, FixGrid};
use weilkit_core::lifting::MapSpec;
use weilkit_core::smooth_expr::eval_real;
use weilkit_core::topology::SimplicialComplex;
use weilkit_core::weighted_metric::{IdealNorm, MetricMode, Probe, Weights};
use weilkit_core::{AlgebraElement, APoint, BasePoint, Manifold, MetricConfig, WeilAlgebra};

use crate::error::{parse_expr, CliError, CliResult};

pub fn from_value<T: for<'de> Deserialize<'de>>(what: &str, v: &Value) -> CliResult<T> {
    T::deserialize(v).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

/// Encodes a float; non-finite values become the strings `inf`, `-inf`, `nan`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(num).collect())
}

/// A number or a closed expression such as `"2*pi"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self) -> CliResult<f64> {
        match self {
            Scalar::Num(x) => Ok(*x),
            Scalar::Expr(s) => {
                let e = parse_expr(s)?;
                let env: BTreeMap<String, f64> = BTreeMap::new();
                Ok(eval_real(&e, &env)?)
            }
        }
    }
}

// ---------------------------------------------------------------- manifolds

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ManifoldInput {
    Name(String),
    Builtin { builtin: String },
    Custom(CustomManifold),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomManifold {
    #[serde(default)]
    name: Option<String>,
    charts: Vec<ChartInput>,
    #[serde(default)]
    transitions: Vec<TransitionInput>,
    #[serde(default = "euclidean")]
    metric: String,
    #[serde(default)]
    model_names: Option<Vec<String>>,
    #[serde(default)]
    compact: bool,
}

fn euclidean() -> String {
    "euclidean".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartInput {
    id: String,
    coords: Vec<String>,
    #[serde(default)]
    domain: Vec<String>,
    #[serde(default)]
    model: Option<Vec<String>>,
    #[serde(default)]
    wrap: Vec<WrapInput>,
    #[serde(default)]
    sample_box: Option<Vec<(Scalar, Scalar)>>,
    #[serde(default)]
    boundary: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WrapInput {
    coord: String,
    start: Scalar,
    period: Scalar,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionInput {
    from: String,
    to: String,
    components: Vec<String>,
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn check_exprs(v: &[String]) -> CliResult<()> {
    v.iter().try_for_each(|s| parse_expr(s).map(drop))
}

pub fn manifold(v: &Value) -> CliResult<Arc<Manifold>> {
    let input: ManifoldInput = from_value("manifold", v)?;
    let m = match input {
        ManifoldInput::Name(name) | ManifoldInput::Builtin { builtin: name } => Manifold::builtin(&name)?,
        ManifoldInput::Custom(c) => custom_manifold(c)?,
    };
    Ok(Arc::new(m))
}

fn custom_manifold(c: CustomManifold) -> CliResult<Manifold> {
    let dim = c.charts.first().map_or(0, |ch| ch.coords.len());
    let metric = match c.metric.as_str() {
        "euclidean" => BaseMetric::Euclidean(c.model_names.as_ref().map_or(dim, Vec::len)),
        "circle" => BaseMetric::Circle,
        "torus" => BaseMetric::Torus,
        "sphere2" => BaseMetric::Sphere2,
        other => return Err(CliError::Input(format!("unknown base metric `{other}`"))),
    };
    let mut charts = Vec::new();
    for ch in c.charts {
        let mut chart = Chart::new(&ch.id, &strs(&ch.coords), &strs(&ch.domain))?;
        for w in &ch.wrap {
            let i = ch
                .coords
                .iter()
                .position(|x| *x == w.coord)
                .ok_or_else(|| CliError::Input(format!("wrap names unknown coordinate `{}`", w.coord)))?;
            chart = chart.with_wrap(i, w.start.value()?, w.period.value()?);
        }
        if let Some(model) = &ch.model {
            check_exprs(model)?;
            chart = chart.with_model(&strs(model))?;
        }
        if let Some(b) = &ch.sample_box {
            let b = b.iter().map(|(lo, hi)| Ok((lo.value()?, hi.value()?))).collect::<CliResult<Vec<_>>>()?;
            chart = chart.with_box(b);
        }
        charts.push(chart.with_boundary(ch.boundary));
    }
    let mut transitions = Vec::new();
    for t in c.transitions {
        check_exprs(&t.components)?;
        transitions.push(TransitionMap::new(&t.from, &t.to, &strs(&t.components))?);
    }
    let name = c.name.unwrap_or_else(|| "custom".into());
    Ok(Manifold::new(&name, charts, transitions, metric, c.model_names, c.compact)?)
}

// ---------------------------------------------------------------- algebras

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AlgebraInput {
    Presented {
        generators: Vec<String>,
        #[serde(default)]
        relations: Vec<String>,
    },
    Jets {
        jets: u32,
    },
    Truncated {
        truncated: Vec<String>,
        order: u32,
    },
    Tensor {
        tensor: Vec<Value>,
    },
    Named(String),
}

pub fn algebra(v: &Value) -> CliResult<Arc<WeilAlgebra>> {
    Ok(Arc::new(build_algebra(v)?))
}

fn build_algebra(v: &Value) -> CliResult<WeilAlgebra> {
    let input: AlgebraInput = from_value("algebra", v)?;
    Ok(match input {
        AlgebraInput::Presented { generators, relations } => {
            WeilAlgebra::from_strs(&strs(&generators), &strs(&relations))?
        }
        AlgebraInput::Jets { jets } => WeilAlgebra::jets(jets)?,
        AlgebraInput::Truncated { truncated, order } => WeilAlgebra::truncated(&truncated, order)?,
        AlgebraInput::Tensor { tensor } => {
            let mut it = tensor.iter();
            let first = it.next().ok_or_else(|| CliError::Input("empty tensor product".into()))?;
            let mut acc = build_algebra(first)?;
            for f in it {
                acc = acc.tensor(&build_algebra(f)?)?;
            }
            acc
        }
        AlgebraInput::Named(n) if n == "real" || n == "R" => WeilAlgebra::real(),
        AlgebraInput::Named(n) => return Err(CliError::Input(format!("unknown algebra `{n}`"))),
    })
}

pub fn algebra_json(a: &WeilAlgebra) -> Value {
    json!({
        "generators": a.generators(),
        "relations": a.relation_names(),
        "basis": a.basis_names(),
        "k": a.order(),
        "dim": a.dim(),
    })
}

/// An element as `{"basis name": coefficient}`, or a plain coefficient list.
pub fn element(a: &Arc<WeilAlgebra>, v: &Value) -> CliResult<AlgebraElement> {
    let coeffs = match v {
        Value::Object(map) => {
            let mut c = vec![0.0; a.dim()];
            for (name, x) in map {
                let i = a
                    .index_of_name(name)
                    .ok_or_else(|| CliError::Input(format!("`{name}` is not a basis monomial of the algebra")))?;
                c[i] = x.as_f64().ok_or_else(|| CliError::Input(format!("coefficient of `{name}` is not a number")))?;
            }
            c
        }
        Value::Array(_) => from_value::<Vec<f64>>("algebra element", v)?,
        Value::Number(x) => {
            let mut c = vec![0.0; a.dim()];
            c[0] = x.as_f64().unwrap_or(0.0);
            c
        }
        _ => return Err(CliError::Input("an algebra element is an object, array or number".into())),
    };
    Ok(AlgebraElement::new(a.clone(), coeffs)?)
}

pub fn element_json(e: &AlgebraElement) -> Value {
    let names = e.algebra().basis_names();
    Value::Object(names.into_iter().zip(e.coeffs()).map(|(n, c)| (n, num(*c))).collect())
}

// ---------------------------------------------------------------- points

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointInput {
    #[serde(default)]
    manifold: Option<Value>,
    #[serde(default)]
    algebra: Option<Value>,
    chart: String,
    acoords: Vec<Value>,
}

/// Manifold and algebra that points default to when they do not name their own.
#[derive(Clone)]
pub struct Context {
    pub manifold: Option<Arc<Manifold>>,
    pub algebra: Option<Arc<WeilAlgebra>>,
}

impl Context {
    pub fn new(manifold: Option<Arc<Manifold>>, algebra: Option<Arc<WeilAlgebra>>) -> Self {
        Context { manifold, algebra }
    }

    /// Reads `manifold`/`algebra` keys of a scenario object, falling back to
    /// the context.
    pub fn extend(&self, v: &Value) -> CliResult<Context> {
        let manifold = match v.get("manifold") {
            Some(m) => Some(manifold(m)?),
            None => self.manifold.clone(),
        };
        let algebra = match v.get("algebra") {
            Some(a) => Some(algebra(a)?),
            None => self.algebra.clone(),
        };
        Ok(Context { manifold, algebra })
    }

    pub fn manifold(&self) -> CliResult<Arc<Manifold>> {
        self.manifold.clone().ok_or_else(|| CliError::Usage("no manifold given".into()))
    }

    pub fn algebra(&self) -> CliResult<Arc<WeilAlgebra>> {
        self.algebra.clone().ok_or_else(|| CliError::Usage("no algebra given".into()))
    }

    pub fn point(&self, v: &Value) -> CliResult<APoint> {
        let input: PointInput = from_value("point", v)?;
        let m = match &input.manifold {
            Some(m) => manifold(m)?,
            None => self.manifold()?,
        };
        let a = match &input.algebra {
            Some(a) => algebra(a)?,
            None => self.algebra()?,
        };
        let acoords = input.acoords.iter().map(|e| element(&a, e)).collect::<CliResult<Vec<_>>>()?;
        Ok(APoint::new(m, a, &input.chart, &acoords)?)
    }
}

pub fn base_json(m: &Manifold, p: &BasePoint) -> Value {
    json!({"chart": m.chart(p.chart).id, "coords": nums(&p.coords)})
}

pub fn point_json(p: &APoint) -> Value {
    json!({
        "manifold": p.manifold().name,
        "chart": p.chart_id(),
        "acoords": p.acoords().iter().map(element_json).collect::<Vec<_>>(),
        "coeffs": nums(p.coeffs()),
    })
}

// ---------------------------------------------------------------- metric

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricInput {
    #[serde(default)]
    weights: Option<WeightsInput>,
    #[serde(default)]
    ideal_norm: Option<String>,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    k: Option<u32>,
    #[serde(default)]
    probes: Option<Vec<ProbeInput>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsInput {
    mode: String,
    #[serde(default)]
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ProbeInput {
    Single(String),
    Phase { phase: (String, String) },
}

pub fn metric_config(v: Option<&Value>) -> CliResult<MetricConfig> {
    let input: MetricInput = match v {
        Some(v) => from_value("metric", v)?,
        None => MetricInput::default(),
    };
    let mut cfg = MetricConfig::default();
    if let Some(w) = input.weights {
        cfg.weights = match w.mode.as_str() {
            "factorial" => Weights::Factorial,
            "explicit" => Weights::Explicit(w.values),
            other => return Err(CliError::Input(format!("unknown weight mode `{other}`"))),
        };
    }
    if let Some(n) = input.ideal_norm {
        cfg.ideal_norm = match n.as_str() {
            "l1" => IdealNorm::L1,
            "l2" => IdealNorm::L2,
            "linf" => IdealNorm::Linf,
            other => return Err(CliError::Input(format!("unknown ideal norm `{other}`"))),
        };
    }
    if let Some(m) = input.mode {
        cfg.mode = match m.as_str() {
            "probe" => MetricMode::Probe,
            "box" => MetricMode::Box,
            other => return Err(CliError::Input(format!("unknown metric mode `{other}`"))),
        };
    }
    cfg.order = input.k;
    if let Some(ps) = input.probes {
        let probes = ps
            .iter()
            .map(|p| {
                Ok(match p {
                    ProbeInput::Single(f) => Probe::Single(parse_expr(f)?),
                    ProbeInput::Phase { phase: (f, g) } => Probe::Phase(parse_expr(f)?, parse_expr(g)?),
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        cfg.probes = Some(probes);
    }
    Ok(cfg)
}

// ---------------------------------------------------------------- maps

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapInput {
    from: Value,
    #[serde(default)]
    to: Option<Value>,
    #[serde(default)]
    components: Option<Vec<String>>,
    #[serde(default)]
    chart: Option<String>,
    #[serde(default)]
    target_chart: Option<String>,
    #[serde(default)]
    pieces: Vec<PieceInput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceInput {
    chart: String,
    #[serde(default)]
    target_chart: Option<String>,
    components: Vec<String>,
}

/// `{"from", "to", "components", "chart"}`; several charts go in `pieces`.
pub fn map_spec(v: &Value) -> CliResult<MapSpec> {
    let input: MapInput = from_value("map", v)?;
    let source = manifold(&input.from)?;
    let target = match &input.to {
        Some(t) => manifold(t)?,
        None => source.clone(),
    };
    let mut spec = MapSpec::new(source.clone(), target);
    if let Some(comps) = &input.components {
        let chart = input.chart.clone().unwrap_or_else(|| source.chart(0).id.clone());
        let exprs = comps.iter().map(|c| parse_expr(c)).collect::<CliResult<Vec<_>>>()?;
        spec = spec.with_piece(&chart, input.target_chart.as_deref(), exprs)?;
    }
    for p in &input.pieces {
        let exprs = p.components.iter().map(|c| parse_expr(c)).collect::<CliResult<Vec<_>>>()?;
        spec = spec.with_piece(&p.chart, p.target_chart.as_deref(), exprs)?;
    }
    if spec.pieces().is_empty() {
        return Err(CliError::Input("a map needs `components` or `pieces`".into()));
    }
    Ok(spec)
}

/// A diffeomorphism from a `map` and optional `inverse` key.
pub fn diffeo(v: &Value, map_key: &str, inverse_key: &str, seed: u64) -> CliResult<DiffeoPair> {
    let forward = map_spec(v.get(map_key).ok_or_else(|| CliError::Input(format!("missing `{map_key}`")))?)?;
    match v.get(inverse_key) {
        Some(inv) => Ok(DiffeoPair::new(forward, map_spec(inv)?, 256, seed)?),
        None => Ok(DiffeoPair::forward_only(forward)),
    }
}

// ---------------------------------------------------------------- grids

/// `{"theta": [lo, hi, n], "v": [lo, hi, n]}`.
///
/// Keys naming a coordinate of the chart (or `theta`, for the single
/// coordinate of a one-dimensional manifold) are base axes. The remaining
/// keys, in sorted order, are the nilpotent axes, coordinate-major.
pub fn fix_grid(m: &Manifold, a: &WeilAlgebra, chart: usize, v: &Value) -> CliResult<FixGrid> {
    let axes: BTreeMap<String, (Scalar, Scalar, usize)> = from_value("grid", v)?;
    let coords = &m.chart(chart).coords;
    let mut base = vec![None; coords.len()];
    let mut nil = Vec::new();
    for (name, (lo, hi, n)) in &axes {
        let axis = (lo.value()?, hi.value()?, *n);
        if *n == 0 {
            return Err(CliError::Input(format!("grid axis `{name}` has no points")));
        }
        match coords.iter().position(|c| c == name) {
            Some(i) => base[i] = Some(axis),
            None if name == "theta" && coords.len() == 1 => base[0] = Some(axis),
            None => nil.push(axis),
        }
    }
    let base = base
        .into_iter()
        .zip(coords)
        .map(|(b, c)| b.ok_or_else(|| CliError::Input(format!("grid has no axis for coordinate `{c}`"))))
        .collect::<CliResult<Vec<_>>>()?;
    let expected = m.dim() * (a.dim() - 1);
    if nil.len() != expected {
        return Err(CliError::Input(format!("grid needs {expected} nilpotent axes, got {}", nil.len())));
    }
    Ok(FixGrid { chart, base, nil })
}

// ---------------------------------------------------------------- complexes

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ComplexInput {
    Simplices { simplices: Vec<Vec<usize>> },
    Builtin { builtin: String },
}

pub fn complex(v: &Value) -> CliResult<SimplicialComplex> {
    match from_value::<ComplexInput>("complex", v)? {
        ComplexInput::Simplices { simplices } => Ok(SimplicialComplex::from_maximal(&simplices)?),
        ComplexInput::Builtin { builtin } => Ok(weilkit_core::topology::catalog(&builtin)?),
    }
}

pub fn object(pairs: impl IntoIterator<Item = (&'static str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<Map<_, _>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_and_custom_manifolds() {
        assert_eq!(manifold(&json!("S1")).unwrap().dim(), 1);
        assert_eq!(manifold(&json!({"builtin": "T2"})).unwrap().dim(), 2);
        let m = manifold(&json!({
            "charts": [
                {"id": "C1", "coords": ["x", "y"], "domain": ["x > 0"]},
                {"id": "C2", "coords": ["u", "v"], "domain": ["u > 0"]}
            ],
            "transitions": [
                {"from": "C1", "to": "C2", "components": ["x^2", "y + x"]},
                {"from": "C2", "to": "C1", "components": ["sqrt(u)", "v - sqrt(u)"]}
            ],
            "metric": "euclidean"
        }))
        .unwrap();
        assert_eq!(m.charts.len(), 2);
        let wrapped = manifold(&json!({
            "charts": [{"id": "U", "coords": ["t"], "wrap": [{"coord": "t", "start": 0, "period": "2*pi"}]}],
            "metric": "circle", "compact": true
        }))
        .unwrap();
        assert_eq!(wrapped.chart(0).wrap[0].unwrap().period, std::f64::consts::TAU);
    }

    #[test]
    fn bad_manifolds() {
        assert!(matches!(manifold(&json!("Klein")), Err(CliError::Core(_))));
        let err = manifold(&json!({"charts": [{"id": "U", "coords": ["x"], "domain": ["x >"]}]})).unwrap_err();
        assert!(matches!(err, CliError::Expr { .. } | CliError::Core(_)), "{err}");
        assert!(matches!(manifold(&json!({"charts": [], "metric": "hyperbolic"})), Err(CliError::Input(_))));
    }

    #[test]
    fn algebra_forms() {
        let a = algebra(&json!({"generators": ["e"], "relations": ["e^3"]})).unwrap();
        assert_eq!(algebra_json(&a)["basis"], json!(["1", "e", "e^2"]));
        assert_eq!(algebra_json(&a)["k"], 2);
        assert_eq!(algebra(&json!({"jets": 2})).unwrap().dim(), 3);
        let t = algebra(&json!({"tensor": [{"jets": 1}, {"generators": ["f"], "relations": ["f^2"]}]})).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(algebra(&json!("real")).unwrap().dim(), 1);
    }

    #[test]
    fn elements_by_name() {
        let a = algebra(&json!({"generators": ["e"], "relations": ["e^2"]})).unwrap();
        let e = element(&a, &json!({"1": 0.3, "e": 1.0})).unwrap();
        assert_eq!(e.coeffs(), &[0.3, 1.0]);
        assert_eq!(element_json(&e), json!({"1": 0.3, "e": 1.0}));
        assert!(element(&a, &json!({"f": 1.0})).is_err());
    }

    #[test]
    fn points_and_maps() {
        let ctx = Context::new(None, None);
        let p = ctx
            .point(&json!({
                "manifold": "S1",
                "algebra": {"generators": ["e"], "relations": ["e^2"]},
                "chart": "U",
                "acoords": [{"1": 0.3, "e": 1.0}]
            }))
            .unwrap();
        assert_eq!(p.coeffs(), &[0.3, 1.0]);
        let spec = map_spec(&json!({"from": "S1", "to": "S1", "components": ["t + 0.5"], "chart": "U"})).unwrap();
        let q = spec.lift(p.algebra().clone()).apply(&p).unwrap();
        assert!((q.coeffs()[0] - 0.8).abs() < 1e-15);
        assert!(map_spec(&json!({"from": "S1", "components": ["t +"]})).is_err());
    }

    #[test]
    fn metric_configs() {
        let cfg = metric_config(Some(&json!({
            "weights": {"mode": "factorial"}, "ideal_norm": "l1", "mode": "probe", "k": 2,
            "probes": ["sin(t)", "cos(t)", {"phase": ["sin(2*t)", "cos(2*t)"]}]
        })))
        .unwrap();
        assert_eq!(cfg.weights, Weights::Factorial);
        assert_eq!(cfg.order, Some(2));
        assert_eq!(cfg.probes.unwrap().len(), 3);
        assert_eq!(metric_config(None).unwrap(), MetricConfig::default());
        assert!(metric_config(Some(&json!({"mode": "ball"}))).is_err());
    }

    #[test]
    fn grids() {
        let m = manifold(&json!("S1")).unwrap();
        let a = algebra(&json!({"jets": 1})).unwrap();
        let g = fix_grid(&m, &a, 0, &json!({"theta": [0, "2*pi", 629], "v": [-1, 1, 41]})).unwrap();
        assert_eq!(g.cells(), 629 * 41);
        assert!(fix_grid(&m, &a, 0, &json!({"theta": [0, 1, 3]})).is_err());
    }

    #[test]
    fn nonfinite_numbers() {
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(1.5), json!(1.5));
    }
}
