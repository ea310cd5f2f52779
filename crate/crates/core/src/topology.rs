//! Zero section, fiberwise retraction onto it, and real simplicial
//! cohomology for the catalog of base manifolds.
//!
//! The fiber of `M^A -> M` is the vector space `(nilpotent part)^dim M`, and
//! scaling it to zero is a deformation retraction of `M^A` onto the zero
//! section. Cohomology of the bundle is therefore read off a triangulation
//! of `M`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apoint::APoint;
use crate::atlas::{BasePoint, Manifold};
use crate::error::{Error, Result};
use crate::lifting::{coefficient_deviation, lift_homotopy, lift_path, BaseCurve, BaseHomotopy, LiftedHomotopy, LiftedPath, Semantics, HOMOTOPY_PARAM, PATH_PARAM};
use crate::math;
use crate::smooth_expr::Expr;
use crate::weighted_metric::{BundleMetric, MetricConfig};
use crate::weil_algebra::WeilAlgebra;

/// Highest simplex dimension accepted.
pub const MAX_SIMPLEX_DIM: usize = 4;
/// Pivot threshold of the rank computation.
pub const RANK_TOL: f64 = 1e-9;

/// Real Betti numbers of real projective 3-space. No triangulation is
/// shipped, so this table is not machine-checked.
pub const RP3_BETTI: [usize; 4] = [1, 0, 0, 1];

/// A finite simplicial complex; simplices are sorted vertex lists, grouped
/// by dimension and sorted within each group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex {
    simplices: Vec<Vec<Vec<usize>>>,
}

impl SimplicialComplex {
    /// Checks that every face of every simplex is listed.
    pub fn new(simplices: &[Vec<usize>]) -> Result<SimplicialComplex> {
        let normalized = normalize(simplices)?;
        let set: BTreeSet<&Vec<usize>> = normalized.iter().collect();
        for s in &normalized {
            for face in faces(s) {
                if !face.is_empty() && !set.contains(&face) {
                    return Err(Error::InvalidComplex(format!("face {face:?} of {s:?} is missing")));
                }
            }
        }
        Ok(SimplicialComplex::group(normalized))
    }

    /// The complex generated by the given simplices and all their faces.
    pub fn from_maximal(simplices: &[Vec<usize>]) -> Result<SimplicialComplex> {
        let mut all = BTreeSet::new();
        for s in normalize(simplices)? {
            close(&s, &mut all);
        }
        Ok(SimplicialComplex::group(all.into_iter().collect()))
    }

    /// Parses one maximal simplex per line; `#` starts a comment.
    pub fn parse(src: &str) -> Result<SimplicialComplex> {
        let mut simplices = Vec::new();
        for (n, line) in src.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let s = line
                .split_whitespace()
                .map(|v| v.parse::<usize>())
                .collect::<core::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::InvalidComplex(format!("line {}: expected vertex numbers", n + 1)))?;
            simplices.push(s);
        }
        SimplicialComplex::from_maximal(&simplices)
    }

    fn group(all: Vec<Vec<usize>>) -> SimplicialComplex {
        let top = all.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut simplices = vec![Vec::new(); top];
        for s in all {
            simplices[s.len() - 1].push(s);
        }
        for group in &mut simplices {
            group.sort();
        }
        SimplicialComplex { simplices }
    }

    /// Dimension of the top simplices; `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        self.simplices.len().checked_sub(1)
    }

    pub fn simplices(&self, p: usize) -> &[Vec<usize>] {
        self.simplices.get(p).map_or(&[], |v| v.as_slice())
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.simplices(0).iter().map(|s| s[0]).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices.iter().enumerate().map(|(p, s)| if p % 2 == 0 { s.len() as i64 } else { -(s.len() as i64) }).sum()
    }

    /// The cone with apex one past the largest vertex.
    pub fn cone(&self) -> SimplicialComplex {
        let apex = self.vertices().into_iter().max().map_or(0, |v| v + 1);
        let mut all: Vec<Vec<usize>> = self.simplices.iter().flatten().cloned().collect();
        let mut with_apex: Vec<Vec<usize>> = all.iter().map(|s| s.iter().copied().chain([apex]).collect()).collect();
        all.append(&mut with_apex);
        all.push(vec![apex]);
        SimplicialComplex::group(all)
    }

    /// Matrix of `d_p: C_p -> C_{p-1}` (rows indexed by `(p-1)`-simplices).
    fn boundary(&self, p: usize) -> Vec<Vec<f64>> {
        let rows = self.simplices(p - 1);
        let index: BTreeMap<&Vec<usize>, usize> = rows.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let cols = self.simplices(p);
        let mut m = vec![vec![0.0; cols.len()]; rows.len()];
        for (j, s) in cols.iter().enumerate() {
            for i in 0..s.len() {
                let mut face = s.clone();
                face.remove(i);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                m[index[&face]][j] = sign;
            }
        }
        m
    }
}

fn normalize(simplices: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(simplices.len());
    for s in simplices {
        let mut t = s.clone();
        t.sort_unstable();
        t.dedup();
        if t.len() != s.len() || t.is_empty() {
            return Err(Error::InvalidComplex(format!("{s:?} is not a simplex")));
        }
        if t.len() > MAX_SIMPLEX_DIM + 1 {
            return Err(Error::InvalidComplex(format!("{s:?} exceeds dimension {MAX_SIMPLEX_DIM}")));
        }
        out.push(t);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn faces(s: &[usize]) -> Vec<Vec<usize>> {
    (0..s.len())
        .map(|i| {
            let mut f = s.to_vec();
            f.remove(i);
            f
        })
        .collect()
}

fn close(s: &[usize], all: &mut BTreeSet<Vec<usize>>) {
    if s.is_empty() || !all.insert(s.to_vec()) {
        return;
    }
    for f in faces(s) {
        close(&f, all);
    }
}

/// Rank by Gaussian elimination with partial pivoting.
fn rank(mut m: Vec<Vec<f64>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (pivot, value) =
            (r..rows).map(|i| (i, math::abs(m[i][c]))).fold((r, -1.0), |best, x| if x.1 > best.1 { x } else { best });
        if value <= RANK_TOL {
            continue;
        }
        m.swap(r, pivot);
        let (top, below) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in below {
            let f = row[c] / pivot_row[c];
            if f != 0.0 {
                for (x, y) in row[c..].iter_mut().zip(&pivot_row[c..]) {
                    *x -= f * y;
                }
            }
        }
        r += 1;
    }
    r
}

/// Real Betti numbers `b_0, ..., b_dim`.
pub fn betti(k: &SimplicialComplex) -> Vec<usize> {
    let Some(top) = k.dim() else { return Vec::new() };
    // ranks[p] = rank of d_p, with d_0 = 0 and d_{top+1} = 0
    let mut ranks = vec![0usize; top + 2];
    for (p, r) in ranks.iter_mut().enumerate().take(top + 1).skip(1) {
        *r = rank(k.boundary(p));
    }
    (0..=top).map(|p| k.simplices(p).len() - ranks[p] - ranks[p + 1]).collect()
}

/// Shipped triangulation of a catalog manifold. `CP1` is the 2-sphere.
pub fn catalog(name: &str) -> Result<SimplicialComplex> {
    let src = match name {
        "S1" => include_str!("../data/s1.txt"),
        "S2" | "CP1" => include_str!("../data/s2.txt"),
        "T2" => include_str!("../data/t2.txt"),
        _ => return Err(Error::NoTriangulation(name.to_string())),
    };
    SimplicialComplex::parse(src)
}

/// Expected cohomology table of `M^A`, equal to that of `M`.
pub fn expected_betti(name: &str) -> Option<Vec<usize>> {
    Some(match name {
        "S1" => vec![1, 1],
        "S2" | "CP1" => vec![1, 0, 1],
        "T2" => vec![1, 2, 1],
        "RP3" => RP3_BETTI.to_vec(),
        _ => return None,
    })
}

pub fn zero_section(m: Arc<Manifold>, a: Arc<WeilAlgebra>, x: &BasePoint) -> Result<APoint> {
    APoint::zero_section(m, a, x)
}

/// Scales the nilpotent coordinates of `xi` by `1 - s`.
pub fn retract(xi: &APoint, s: f64) -> Result<APoint> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("retraction parameter {s} outside [0, 1]")));
    }
    Ok(xi.scale_nilpotent(1.0 - s))
}

/// Constructive checks of the fiberwise retraction on sampled points.
#[derive(Clone, Debug, PartialEq)]
pub struct RetractionReport {
    pub samples: usize,
    /// Largest deviation among `retract(., 0) = id`,
    /// `retract(., 1) = zero_section o pi`, `pi o retract = pi` and
    /// `retract(zero_section) = zero_section`.
    pub max_error: f64,
    /// Smallest `C` with `d(retract(xi, s), retract(xi, s')) <= C |s - s'|`
    /// on the sampled parameters.
    pub lipschitz: f64,
}

pub fn retraction_check(m: &Arc<Manifold>, a: &Arc<WeilAlgebra>, samples: usize, seed: u64) -> Result<RetractionReport> {
    let metric = BundleMetric::new(m.clone(), a.clone(), MetricConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
    let (mut max_error, mut lipschitz) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let xi = APoint::sample(m.clone(), a.clone(), 1.0, &mut rng);
        let zero = zero_section(m.clone(), a.clone(), &xi.project())?;
        max_error = max_error.max(coefficient_deviation(&retract(&xi, 0.0)?, &xi)?);
        max_error = max_error.max(coefficient_deviation(&retract(&xi, 1.0)?, &zero)?);
        let stages = params.iter().map(|&s| retract(&xi, s)).collect::<Result<Vec<_>>>()?;
        for (s, st) in params.iter().zip(&stages) {
            max_error = max_error.max(m.base_distance(&st.project(), &xi.project())?);
            max_error = max_error.max(coefficient_deviation(&retract(&zero, *s)?, &zero)?);
        }
        for i in 0..params.len() {
            for j in i + 1..params.len() {
                let d = metric.distance(&stages[i], &stages[j])?;
                lipschitz = lipschitz.max(d / (params[j] - params[i]));
            }
        }
    }
    Ok(RetractionReport { samples, max_error, lipschitz })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleCohomologyReport {
    pub manifold: String,
    pub algebra_dim: usize,
    /// Dimension of the fiber `(nilpotent part)^dim M`.
    pub fiber_dim: usize,
    pub base_betti: Vec<usize>,
    /// Betti numbers of `M^A`, equal to `base_betti` through the retraction.
    pub bundle_betti: Vec<usize>,
    pub expected: Option<Vec<usize>>,
    pub matches_expected: bool,
    pub retraction: RetractionReport,
    /// `E_2^{p,q} = H^p(M)` for `q = 0` and zero otherwise.
    pub annotation: String,
}

/// Betti numbers of `M^A` for a catalog manifold, after verifying the
/// retraction invariants that identify them with those of `M`.
pub fn bundle_cohomology_check(name: &str, a: &Arc<WeilAlgebra>) -> Result<BundleCohomologyReport> {
    let complex = catalog(name)?;
    let m = Arc::new(Manifold::builtin(name)?);
    let base_betti = betti(&complex);
    let retraction = retraction_check(&m, a, 50, 0)?;
    if retraction.max_error > 1e-12 {
        return Err(Error::InvalidArgument(format!("retraction invariants fail by {:e}", retraction.max_error)));
    }
    let expected = expected_betti(name);
    let bundle_betti = base_betti.clone();
    let matches_expected = expected.as_ref() == Some(&bundle_betti);
    Ok(BundleCohomologyReport {
        manifold: name.to_string(),
        algebra_dim: a.dim(),
        fiber_dim: m.dim() * (a.dim() - 1),
        base_betti,
        bundle_betti,
        expected,
        matches_expected,
        retraction,
        annotation: "contractible fibers: E2 is concentrated in the row q = 0, so H^p(M^A) = H^p(M)".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessKind {
    Constant,
    SameFiber,
    CrossFiber,
}

#[derive(Clone, Debug)]
pub struct ConnectivityWitness {
    pub kind: WitnessKind,
    pub path: LiftedPath,
    /// Largest distance between consecutive samples.
    pub max_jump: f64,
    /// `max_jump` times the number of sample intervals.
    pub lipschitz: f64,
}

/// Samples used for the continuity certificate of a witness path.
const WITNESS_SAMPLES: usize = 64;

/// A lifted path from `theta` to `eps` over the chord between their bases.
pub fn connectivity_witness(theta: &APoint, eps: &APoint, metric: &BundleMetric) -> Result<ConnectivityWitness> {
    let m = theta.manifold().clone();
    let (x, y) = (theta.project(), eps.project());
    let kind = if coefficient_deviation(theta, eps)? == 0.0 {
        WitnessKind::Constant
    } else if m.base_distance(&x, &y)? == 0.0 {
        WitnessKind::SameFiber
    } else {
        WitnessKind::CrossFiber
    };
    let curve = BaseCurve::chord(m, &x, &y)?;
    let path = lift_path(theta, eps, curve, Semantics::Coordinate)?;
    let pts = path.sample(WITNESS_SAMPLES)?;
    let mut max_jump = 0.0f64;
    for w in pts.windows(2) {
        max_jump = max_jump.max(metric.distance(&w[0].1, &w[1].1)?);
    }
    Ok(ConnectivityWitness { kind, path, max_jump, lipschitz: max_jump * WITNESS_SAMPLES as f64 })
}

/// Contracts a closed lifted path inside the chart of its curve by the
/// straight-line homotopy `H(r, s) = (1 - r) gamma(s) + r gamma(0)`. The
/// chart must be convex.
pub fn contract_loop(path: &LiftedPath) -> Result<LiftedHomotopy> {
    let curve = path.curve();
    let m = curve.manifold().clone();
    let seg = &curve.segments()[0];
    if curve.segments().len() != 1 {
        return Err(Error::InvalidArgument("loop contraction needs a one-chart curve".into()));
    }
    let start = m.transport_base(&path.start().project(), seg.chart)?;
    let r = Expr::var(HOMOTOPY_PARAM);
    let comps = seg
        .components
        .iter()
        .zip(&start.coords)
        .map(|(g, x0)| (1.0 - r.clone()) * g.clone() + r.clone() * *x0)
        .collect();
    let h = BaseHomotopy::new(m.clone(), &m.chart(seg.chart).id, comps)?;
    let s = Expr::var(PATH_PARAM);
    let constant_curve =
        BaseCurve::single(m.clone(), &m.chart(seg.chart).id, start.coords.iter().map(|c| Expr::Const(*c) + 0.0 * s.clone()).collect())?;
    let constant = lift_path(path.start(), path.end(), constant_curve, Semantics::Coordinate)?;
    lift_homotopy(h, path, &constant)
}
