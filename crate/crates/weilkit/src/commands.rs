//! One function per subcommand. Each reads its JSON documents through the
//! run manifest and returns the result tree.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Value};
use weilkit_core::dynamics::{self, verdict_name, FIXED_TOL};
use weilkit_core::lifting::{self, lift_path, BaseCurve, Semantics};
use weilkit_core::smooth_expr::partial_derivatives;
use weilkit_core::topology::{self, betti};
use weilkit_core::weighted_metric::{Attained, MetricMode};
use weilkit_core::BundleMetric;

use crate::error::{parse_expr, CliError, CliResult};
use crate::formats::{self, base_json, num, nums, point_json, Context};
use crate::manifest::RunManifest;
use crate::verify;

/// Input files named on the command line.
#[derive(Clone, Debug, Default)]
pub struct Inputs {
    pub spec: Option<PathBuf>,
    pub manifold: Option<PathBuf>,
    pub algebra: Option<PathBuf>,
    pub points: Vec<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub tol: Option<f64>,
    /// Target chart for `transition`.
    pub to: Option<String>,
    /// Expression for `eval`.
    pub expr: Option<String>,
}

/// A finished command: its result, and a violation message when the
/// computation ran but a checked invariant failed.
pub struct Outcome {
    pub result: Value,
    pub violation: Option<String>,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Outcome { result, violation: None }
    }
}

pub const COMMANDS: [&str; 13] = [
    "algebra",
    "eval",
    "transition",
    "dist",
    "lift-path",
    "lift-map",
    "orbit",
    "fix",
    "c0",
    "pwt",
    "betti",
    "bundle-check",
    "verify",
];

pub fn run(command: &str, inputs: &Inputs, run: &mut RunManifest) -> CliResult<Outcome> {
    if let Some(t) = inputs.tol {
        run.tolerance("tol", t);
    }
    let mut session = Session { inputs, run };
    match command {
        "algebra" => session.algebra().map(Outcome::ok),
        "eval" => session.eval().map(Outcome::ok),
        "transition" => session.transition().map(Outcome::ok),
        "dist" => session.dist().map(Outcome::ok),
        "lift-path" => session.lift_path().map(Outcome::ok),
        "lift-map" => session.lift_map().map(Outcome::ok),
        "orbit" => session.orbit().map(Outcome::ok),
        "fix" => session.fix().map(Outcome::ok),
        "c0" => session.c0().map(Outcome::ok),
        "pwt" => session.pwt().map(Outcome::ok),
        "betti" => session.betti().map(Outcome::ok),
        "bundle-check" => session.bundle_check(),
        "verify" => Ok(session.verify()),
        other => Err(CliError::Usage(format!("unknown subcommand `{other}`"))),
    }
}

struct Session<'a> {
    inputs: &'a Inputs,
    run: &'a mut RunManifest,
}

impl Session<'_> {
    fn read(&mut self, role: &str, path: &Option<PathBuf>) -> CliResult<Option<Value>> {
        path.as_ref().map(|p| self.run.read_json(role, p)).transpose()
    }

    fn require(&mut self, role: &str, path: &Option<PathBuf>) -> CliResult<Value> {
        self.read(role, path)?.ok_or_else(|| CliError::Usage(format!("--{role} is required")))
    }

    /// The scenario document: `--scenario`, or `--spec` as a synonym.
    fn scenario(&mut self) -> CliResult<Value> {
        let inputs = self.inputs;
        match (&inputs.scenario, &inputs.spec) {
            (Some(_), _) => self.require("scenario", &inputs.scenario),
            (None, Some(_)) => self.require("spec", &inputs.spec),
            (None, None) => Err(CliError::Usage("--scenario is required".into())),
        }
    }

    /// Manifold and algebra from the `--manifold`/`--algebra` files.
    fn context(&mut self) -> CliResult<Context> {
        let inputs = self.inputs;
        let m = self.read("manifold", &inputs.manifold)?.map(|v| formats::manifold(&v)).transpose()?;
        let a = self.read("algebra", &inputs.algebra)?.map(|v| formats::algebra(&v)).transpose()?;
        Ok(Context::new(m, a))
    }

    fn tol(&mut self, scenario: &Value, default: f64) -> f64 {
        let t = self.inputs.tol.or_else(|| scenario.get("tol").and_then(Value::as_f64)).unwrap_or(default);
        self.run.tolerance("tol", t);
        t
    }

    fn seed(&self) -> u64 {
        self.run.seed
    }

    fn algebra(&mut self) -> CliResult<Value> {
        let inputs = self.inputs;
        let path = if inputs.spec.is_some() { &inputs.spec } else { &inputs.algebra };
        let spec = self.require("spec", path)?;
        Ok(formats::algebra_json(formats::algebra(&spec)?.as_ref()))
    }

    fn eval(&mut self) -> CliResult<Value> {
        let ctx = self.context()?;
        let doc = match (&self.inputs.scenario, &self.inputs.spec) {
            (None, None) => json!({}),
            _ => self.scenario()?,
        };
        let src = match (&self.inputs.expr, doc.get("expr").and_then(Value::as_str)) {
            (Some(e), _) => e.clone(),
            (None, Some(e)) => e.to_string(),
            (None, None) => return Err(CliError::Usage("an expression is required (--expr or `expr`)".into())),
        };
        let e = parse_expr(&src)?;
        let ctx = ctx.extend(&doc)?;
        let point = match (self.inputs.points.first(), doc.get("point")) {
            (Some(p), _) => Some(self.run.read_json("point", p)?),
            (None, Some(p)) => Some(p.clone()),
            (None, None) => None,
        };
        if let Some(p) = point {
            let xi = ctx.point(&p)?;
            return Ok(json!({"expr": e.to_string(), "value": formats::element_json(&xi.evaluate(&e)?)}));
        }
        let at: BTreeMap<String, f64> = match doc.get("at") {
            Some(v) => formats::from_value("at", v)?,
            None => BTreeMap::new(),
        };
        let k = doc.get("k").and_then(Value::as_u64).unwrap_or(1) as u32;
        let p = partial_derivatives(&e, &at, k)?;
        let partials: BTreeMap<String, Value> = p.named().into_iter().map(|(n, v)| (n, num(v))).collect();
        Ok(json!({"expr": e.to_string(), "value": num(p.value), "vars": p.vars, "partials": partials, "k": k}))
    }

    fn transition(&mut self) -> CliResult<Value> {
        let ctx = self.context()?;
        let path = self
            .inputs
            .points
            .first()
            .cloned()
            .ok_or_else(|| CliError::Usage("--point is required".into()))?;
        let doc = self.run.read_json("point", &path)?;
        let xi = ctx.point(&doc)?;
        let m = xi.manifold().clone();
        let from = xi.chart();
        let t = match &self.inputs.to {
            Some(id) => {
                let to = m.chart_index(id)?;
                m.transitions_between(from, to)
                    .next()
                    .ok_or_else(|| CliError::Input(format!("no transition from `{}` to `{id}`", xi.chart_id())))?
            }
            None => m
                .transitions
                .iter()
                .find(|t| t.from == xi.chart_id())
                .ok_or_else(|| CliError::Input(format!("no transition leaves chart `{}`", xi.chart_id())))?,
        };
        let image = lifting::prolong_transition(&xi, t)?;
        Ok(json!({"from": point_json(&xi), "to": point_json(&image), "tuple": nums(image.coeffs())}))
    }

    fn metric(&self, ctx: &Context, doc: &Value) -> CliResult<BundleMetric> {
        let cfg = formats::metric_config(doc.get("metric"))?;
        Ok(BundleMetric::new(ctx.manifold()?, ctx.algebra()?, cfg)?)
    }

    /// Point documents from repeated `--point` flags, else the scenario's
    /// `points`.
    fn point_docs(&mut self, doc: &Value) -> CliResult<Vec<Value>> {
        if self.inputs.points.is_empty() {
            return match doc.get("points") {
                Some(Value::Array(ps)) => Ok(ps.clone()),
                _ => Err(CliError::Usage("points are required (--point or `points`)".into())),
            };
        }
        let paths = self.inputs.points.clone();
        paths.iter().map(|p| self.run.read_json("point", p)).collect()
    }

    /// Fills in manifold and algebra from the first point when the context
    /// lacks them.
    fn with_point_defaults(ctx: Context, doc: &Value, first: Option<&Value>) -> CliResult<Context> {
        let mut ctx = ctx.extend(doc)?;
        if let Some(p) = first {
            if ctx.manifold.is_none() {
                ctx.manifold = p.get("manifold").map(formats::manifold).transpose()?;
            }
            if ctx.algebra.is_none() {
                ctx.algebra = p.get("algebra").map(formats::algebra).transpose()?;
            }
        }
        Ok(ctx)
    }

    fn dist(&mut self) -> CliResult<Value> {
        let ctx = self.context()?;
        let doc = match &self.inputs.scenario {
            Some(_) => self.scenario()?,
            None => json!({}),
        };
        let docs = self.point_docs(&doc)?;
        let ctx = Self::with_point_defaults(ctx, &doc, docs.first())?;
        let pts = docs.iter().map(|p| ctx.point(p)).collect::<CliResult<Vec<_>>>()?;
        if pts.len() != 2 {
            return Err(CliError::Usage(format!("dist needs exactly two points, got {}", pts.len())));
        }
        let ctx = Context::new(Some(pts[0].manifold().clone()), Some(pts[0].algebra().clone()));
        let metric = self.metric(&ctx, &doc)?;
        let r = metric.distance_report(&pts[0], &pts[1])?;
        let attained = match &r.sup.attained_at {
            Attained::Probe { index, phase } => json!({"probe": index, "phase": phase.map(num)}),
            Attained::Vertex(v) => json!({"vertex": v}),
            Attained::None => Value::Null,
        };
        let mode = match r.sup.mode {
            MetricMode::Probe => "probe",
            MetricMode::Box => "box",
        };
        Ok(json!({
            "distance": num(r.total()),
            "base": num(r.base),
            "sup": num(r.sup.value),
            "attained_at": attained,
            "mode": mode,
        }))
    }

    fn lift_path(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let ctx = Self::with_point_defaults(self.context()?, &doc, doc.get("start"))?;
        let get = |k: &str| doc.get(k).ok_or_else(|| CliError::Input(format!("missing `{k}`")));
        let (e1, e2) = (ctx.point(get("start")?)?, ctx.point(get("end")?)?);
        let m = e1.manifold().clone();
        let curve = match doc.get("curve") {
            Some(c) => {
                let template: Vec<String> = formats::from_value("curve", c)?;
                let template = template.iter().map(|s| parse_expr(s)).collect::<CliResult<Vec<_>>>()?;
                let chart = doc.get("chart").and_then(Value::as_str).unwrap_or(e1.chart_id()).to_string();
                let (a, b) = (e1.in_chart(&chart)?.project(), e2.in_chart(&chart)?.project());
                BaseCurve::from_template(m.clone(), &chart, &template, &a.coords, &b.coords)?
            }
            None => BaseCurve::chord(m.clone(), &e1.project(), &e2.project())?,
        };
        let semantics = match doc.get("semantics").and_then(Value::as_str).unwrap_or("coordinate") {
            "coordinate" => Semantics::Coordinate,
            "functional" => Semantics::Functional,
            other => return Err(CliError::Input(format!("unknown semantics `{other}`"))),
        };
        let n = doc.get("samples").and_then(Value::as_u64).unwrap_or(101).max(2) as usize;
        let path = lift_path(&e1, &e2, curve, semantics)?;
        let ctx = Context::new(Some(m.clone()), Some(e1.algebra().clone()));
        let metric = self.metric(&ctx, &doc)?;
        let mut samples = Vec::with_capacity(n);
        let mut leibniz = 0.0f64;
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let xi = path.point(t)?;
            let coords = &m.chart(path.chart_at(t)?).coords;
            // test functions in the chart used at t
            let x = weilkit_core::Expr::var(&coords[0]);
            let f = x.clone().sin() + x.clone() * x.clone();
            let g = x.clone().cos();
            let h = x.exp();
            leibniz = leibniz.max(path.leibniz_residual(t, &f, &g, &h, 0.5)?);
            samples.push(json!({"t": num(t), "point": point_json(&xi)}));
        }
        let offsets: Vec<f64> = (1..=10).map(|j| 0.5f64.powi(j)).collect();
        let mut continuity = Vec::new();
        for s in [0.0, 0.25, 0.5, 0.75] {
            let r = path.continuity(&metric, s, &offsets)?;
            continuity.push(json!({"at": num(s), "constant": num(r.constant)}));
        }
        Ok(json!({
            "semantics": if semantics == Semantics::Coordinate { "coordinate" } else { "functional" },
            "samples": samples,
            "continuity": continuity,
            "leibniz_residual": num(leibniz),
        }))
    }

    fn lift_map(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let spec = formats::map_spec(doc.get("map").ok_or_else(|| CliError::Input("missing `map`".into()))?)?;
        let ctx = self.context()?.extend(&doc)?;
        let ctx = Context::new(ctx.manifold.or(Some(spec.source().clone())), ctx.algebra);
        let a = ctx.algebra()?;
        let lifted = spec.lift(a);
        let pts = self.point_docs(&doc)?.iter().map(|p| ctx.point(p)).collect::<CliResult<Vec<_>>>()?;
        let images = pts
            .iter()
            .map(|p| Ok(json!({"source": point_json(p), "image": point_json(&lifted.apply(p)?)})))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(json!({"images": images, "base_compatibility": num(lifted.base_compatibility(&pts)?)}))
    }

    fn diffeo_context(&mut self, doc: &Value) -> CliResult<(dynamics::DiffeoPair, BundleMetric)> {
        let phi = formats::diffeo(doc, "map", "inverse", self.seed())?;
        let ctx = self.context()?.extend(doc)?;
        let ctx = Context::new(Some(phi.manifold().clone()), ctx.algebra);
        let metric = self.metric(&ctx, doc)?;
        Ok((phi, metric))
    }

    fn orbit(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let (phi, metric) = self.diffeo_context(&doc)?;
        let tol = self.tol(&doc, FIXED_TOL);
        let ctx = Context::new(Some(phi.manifold().clone()), Some(metric.algebra().clone()));
        let start = ctx.point(doc.get("start").ok_or_else(|| CliError::Input("missing `start`".into()))?)?;
        let n = doc.get("steps").and_then(Value::as_u64).unwrap_or(100) as usize;
        let rec = dynamics::iterate(&phi, &metric, &start, n, tol)?;
        Ok(json!({
            "verdict": verdict_name(&rec.verdict),
            "steps": nums(&rec.steps),
            "iterations": rec.steps.len(),
            "last": point_json(rec.iterates.last().expect("orbit starts at xi0")),
        }))
    }

    fn fix(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let (phi, metric) = self.diffeo_context(&doc)?;
        let tol = self.tol(&doc, FIXED_TOL);
        let m = phi.manifold().clone();
        let chart = match doc.get("chart").and_then(Value::as_str) {
            Some(id) => m.chart_index(id)?,
            None => phi.forward().pieces()[0].chart,
        };
        let grid_doc = doc.get("grid").ok_or_else(|| CliError::Input("missing `grid`".into()))?;
        let grid = formats::fix_grid(&m, metric.algebra(), chart, grid_doc)?;
        let rep = dynamics::fixed_scan(&phi, &metric, &grid, tol)?;
        let clusters: Vec<Value> = rep
            .clusters
            .iter()
            .map(|c| {
                json!({
                    "members": c.members,
                    "base": base_json(&m, &c.representative.project()),
                    "point": point_json(&c.representative),
                })
            })
            .collect();
        Ok(json!({
            "cells": rep.cells,
            "fixed": rep.fixed.len(),
            "clusters": clusters,
            "cluster_radius": num(2.0 * grid.step()),
            "base_residual": num(rep.base_residual),
            "grid": {"chart": m.chart(chart).id, "base": grid.base, "nil": grid.nil},
        }))
    }

    fn c0(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let phi = formats::diffeo(&doc, "map", "inverse", self.seed())?;
        let other = doc.get("other").ok_or_else(|| CliError::Input("missing `other`".into()))?;
        let psi = formats::diffeo(other, "map", "inverse", self.seed())?;
        let n = doc.get("samples").and_then(Value::as_u64).unwrap_or(1000) as usize;
        let d = dynamics::c0_distance(&phi, &psi, n, self.seed())?;
        Ok(json!({"c0": num(d), "samples": n.max(dynamics::MIN_C0_SAMPLES)}))
    }

    fn pwt(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let (phi, metric) = self.diffeo_context(&doc)?;
        let other = doc.get("other").ok_or_else(|| CliError::Input("missing `other`".into()))?;
        let psi = formats::diffeo(other, "map", "inverse", self.seed())?;
        let n = doc.get("samples").and_then(Value::as_u64).unwrap_or(256) as usize;
        let samples = if doc.get("zero_section").and_then(Value::as_bool).unwrap_or(true) {
            dynamics::zero_section_samples(metric.manifold(), metric.algebra(), n, self.seed())
        } else {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed());
            (0..n)
                .map(|_| weilkit_core::APoint::sample(metric.manifold().clone(), metric.algebra().clone(), 1.0, &mut rng))
                .collect()
        };
        let gap = dynamics::pointwise_gap(&phi, &psi, &metric, &samples)?;
        Ok(json!({"gap": num(gap), "samples": samples.len()}))
    }

    fn betti(&mut self) -> CliResult<Value> {
        let doc = self.scenario()?;
        let k = formats::complex(&doc)?;
        let counts: Vec<usize> = (0..=k.dim().unwrap_or(0)).map(|p| k.simplices(p).len()).collect();
        Ok(json!({"betti": betti(&k), "euler": k.euler_characteristic(), "simplices": counts}))
    }

    fn bundle_check(&mut self) -> CliResult<Outcome> {
        let inputs = self.inputs;
        let m = self.require("manifold", &inputs.manifold)?;
        let name = match &m {
            Value::String(s) => s.clone(),
            other => other
                .get("builtin")
                .and_then(Value::as_str)
                .ok_or_else(|| CliError::Input("bundle-check needs a builtin manifold name".into()))?
                .to_string(),
        };
        let a = formats::algebra(&self.require("algebra", &inputs.algebra)?)?;
        let rep = topology::bundle_cohomology_check(&name, &a)?;
        let result = json!({
            "manifold": rep.manifold,
            "algebra_dim": rep.algebra_dim,
            "fiber_dim": rep.fiber_dim,
            "base_betti": rep.base_betti,
            "bundle_betti": rep.bundle_betti,
            "expected": rep.expected,
            "matches_expected": rep.matches_expected,
            "retraction": {
                "samples": rep.retraction.samples,
                "max_error": num(rep.retraction.max_error),
                "lipschitz": num(rep.retraction.lipschitz),
            },
            "annotation": rep.annotation,
        });
        let violation = (!rep.matches_expected && rep.expected.is_some())
            .then(|| format!("bundle Betti numbers {:?} differ from {:?}", rep.bundle_betti, rep.expected));
        Ok(Outcome { result, violation })
    }

    fn verify(&mut self) -> Outcome {
        let results = verify::run_all();
        eprint!("{}", verify::table(&results));
        let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
        let rows: Vec<Value> = results
            .iter()
            .map(|r| json!({"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail}))
            .collect();
        let violation = (!failed.is_empty()).then(|| format!("criteria {failed:?} failed"));
        Outcome { result: json!({"criteria": rows, "passed": failed.is_empty()}), violation }
    }
}
