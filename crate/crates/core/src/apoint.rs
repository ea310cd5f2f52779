//! Infinitely near points `xi in M^A`.
//!
//! An [`APoint`] is stored by its coordinate jet: for a chart with
//! coordinates `phi_1..phi_m` it keeps `xi(phi_i) in A`, laid out as an
//! `m x l` row-major matrix of reals `x_ij`. Evaluation on an arbitrary
//! function goes through [`eval_jet`](crate::smooth_expr::eval_jet), so every
//! `APoint` is an algebra morphism by construction.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::atlas::{BasePoint, Manifold};
use crate::error::{Error, Result};
use crate::smooth_expr::{eval_jet_with, eval_real, Bindings, Expr, JetEnv};
use crate::weil_algebra::{same_algebra, AlgebraElement, WeilAlgebra};

/// The real coordinates `x_ij` of an A-point: row `i` holds the coefficients
/// of `xi(phi_i)` over the algebra basis, so column 0 is the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct RealCoords {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealCoords {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<RealCoords> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a {rows} x {cols} matrix",
                data.len()
            )));
        }
        Ok(RealCoords { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<RealCoords> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged coordinate matrix".to_string()));
        }
        RealCoords::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Row-major flattening `(i, j)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug)]
pub struct APoint {
    manifold: Arc<Manifold>,
    algebra: Arc<WeilAlgebra>,
    chart: usize,
    coeffs: Vec<f64>,
}

impl PartialEq for APoint {
    fn eq(&self, other: &Self) -> bool {
        same_manifold(&self.manifold, &other.manifold)
            && same_algebra(&self.algebra, &other.algebra)
            && self.chart == other.chart
            && self.coeffs == other.coeffs
    }
}

pub(crate) fn same_manifold(a: &Arc<Manifold>, b: &Arc<Manifold>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) struct CoordJets<'a> {
    pub names: &'a [String],
    pub coeffs: &'a [f64],
    pub dim: usize,
}

impl JetEnv for CoordJets<'_> {
    fn coeffs(&self, name: &str) -> Result<&[f64]> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnboundVariable(name.to_string()))?;
        Ok(&self.coeffs[i * self.dim..(i + 1) * self.dim])
    }
}

impl APoint {
    /// Builds `xi` from `xi(phi_i)` in chart `chart`. Periodic base
    /// coordinates are wrapped; the base must lie in the chart domain.
    pub fn new(
        manifold: Arc<Manifold>,
        algebra: Arc<WeilAlgebra>,
        chart: &str,
        acoords: &[AlgebraElement],
    ) -> Result<APoint> {
        let chart = manifold.chart_index(chart)?;
        if acoords.len() != manifold.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} algebra coordinates, got {}",
                manifold.dim(),
                acoords.len()
            )));
        }
        if acoords.iter().any(|a| !same_algebra(a.algebra(), &algebra)) {
            return Err(Error::AlgebraMismatch);
        }
        let coeffs = acoords.iter().flat_map(|a| a.coeffs().iter().copied()).collect();
        APoint::from_coeffs(manifold, algebra, chart, coeffs)
    }

    pub(crate) fn from_coeffs(
        manifold: Arc<Manifold>,
        algebra: Arc<WeilAlgebra>,
        chart: usize,
        mut coeffs: Vec<f64>,
    ) -> Result<APoint> {
        let (m, l) = (manifold.dim(), algebra.dim());
        if coeffs.len() != m * l || chart >= manifold.charts.len() {
            return Err(Error::InvalidArgument("coordinate matrix has the wrong shape".to_string()));
        }
        let c = manifold.chart(chart);
        let mut base: Vec<f64> = (0..m).map(|i| coeffs[i * l]).collect();
        c.normalize(&mut base);
        if !c.contains(&base) {
            return Err(Error::ChartDomain { chart: c.id.clone() });
        }
        for (i, b) in base.into_iter().enumerate() {
            coeffs[i * l] = b;
        }
        Ok(APoint { manifold, algebra, chart, coeffs })
    }

    pub fn from_real_coords(
        manifold: Arc<Manifold>,
        algebra: Arc<WeilAlgebra>,
        chart: &str,
        x: &RealCoords,
    ) -> Result<APoint> {
        if x.rows() != manifold.dim() || x.cols() != algebra.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected a {} x {} matrix",
                manifold.dim(),
                algebra.dim()
            )));
        }
        let chart = manifold.chart_index(chart)?;
        APoint::from_coeffs(manifold, algebra, chart, x.as_slice().to_vec())
    }

    pub fn to_real_coords(&self) -> RealCoords {
        RealCoords { rows: self.manifold.dim(), cols: self.algebra.dim(), data: self.coeffs.clone() }
    }

    /// The point of the zero section over `p`.
    pub fn zero_section(manifold: Arc<Manifold>, algebra: Arc<WeilAlgebra>, p: &BasePoint) -> Result<APoint> {
        manifold.check(p)?;
        let l = algebra.dim();
        let mut coeffs = alloc::vec![0.0; manifold.dim() * l];
        for (i, x) in p.coords.iter().enumerate() {
            coeffs[i * l] = *x;
        }
        Ok(APoint { manifold, algebra, chart: p.chart, coeffs })
    }

    /// A point over a sampled base point with nilpotent coordinates drawn
    /// uniformly from `[-scale, scale]`.
    pub fn sample<R: Rng + ?Sized>(
        manifold: Arc<Manifold>,
        algebra: Arc<WeilAlgebra>,
        scale: f64,
        rng: &mut R,
    ) -> APoint {
        let base = manifold.sample_point(rng);
        APoint::sample_over(manifold, algebra, &base, scale, rng)
    }

    pub fn sample_over<R: Rng + ?Sized>(
        manifold: Arc<Manifold>,
        algebra: Arc<WeilAlgebra>,
        base: &BasePoint,
        scale: f64,
        rng: &mut R,
    ) -> APoint {
        let l = algebra.dim();
        let mut coeffs = alloc::vec![0.0; manifold.dim() * l];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = if k % l == 0 { base.coords[k / l] } else { scale * (2.0 * rng.random::<f64>() - 1.0) };
        }
        APoint { manifold, algebra, chart: base.chart, coeffs }
    }

    pub fn manifold(&self) -> &Arc<Manifold> {
        &self.manifold
    }

    pub fn algebra(&self) -> &Arc<WeilAlgebra> {
        &self.algebra
    }

    pub fn chart(&self) -> usize {
        self.chart
    }

    pub fn chart_id(&self) -> &str {
        &self.manifold.chart(self.chart).id
    }

    /// Row-major `x_ij`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `xi(phi_i)`.
    pub fn acoord(&self, i: usize) -> AlgebraElement {
        let l = self.algebra.dim();
        AlgebraElement::from_raw(self.algebra.clone(), self.coeffs[i * l..(i + 1) * l].to_vec())
    }

    pub fn acoords(&self) -> Vec<AlgebraElement> {
        (0..self.manifold.dim()).map(|i| self.acoord(i)).collect()
    }

    /// The projection `pi_A`.
    pub fn project(&self) -> BasePoint {
        let l = self.algebra.dim();
        BasePoint { chart: self.chart, coords: (0..self.manifold.dim()).map(|i| self.coeffs[i * l]).collect() }
    }

    pub fn is_zero_section(&self) -> bool {
        let l = self.algebra.dim();
        self.coeffs.iter().enumerate().all(|(k, c)| k % l == 0 || *c == 0.0)
    }

    pub(crate) fn jets(&self) -> CoordJets<'_> {
        CoordJets { names: &self.manifold.chart(self.chart).coords, coeffs: &self.coeffs, dim: self.algebra.dim() }
    }

    /// `xi(f)` for `f` written in this point's chart coordinates.
    pub fn evaluate(&self, f: &Expr) -> Result<AlgebraElement> {
        let v = eval_jet_with(f, &self.jets(), &self.algebra)?;
        Ok(AlgebraElement::from_raw(self.algebra.clone(), v))
    }

    /// `L_xi(f) = xi(f) - f(x) 1_A`.
    pub fn l_part(&self, f: &Expr) -> Result<AlgebraElement> {
        Ok(self.evaluate(f)?.nilpotent_part())
    }

    pub fn base_value(&self, f: &Expr) -> Result<f64> {
        let p = self.project();
        eval_real(f, &Bindings::new(&self.manifold.chart(self.chart).coords, &p.coords))
    }

    /// Same point in chart `to`, prolonging a declared transition.
    pub fn to_chart(&self, to: usize) -> Result<APoint> {
        crate::lifting::transport(self, to)
    }

    /// Same point in the chart named `id`.
    pub fn in_chart(&self, id: &str) -> Result<APoint> {
        self.to_chart(self.manifold.chart_index(id)?)
    }

    /// Scales every nilpotent coordinate by `s`.
    pub fn scale_nilpotent(&self, s: f64) -> APoint {
        let l = self.algebra.dim();
        let mut out = self.clone();
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            if k % l != 0 {
                *c *= s;
            }
        }
        out
    }
}

/// Anything that assigns to a function its base value `f(x)` and its
/// nilpotent part `L(f)`: genuine A-points and the interpolated functionals
/// of path lifting.
pub trait PointFunctional {
    fn algebra(&self) -> &Arc<WeilAlgebra>;
    fn base_value(&self, f: &Expr) -> Result<f64>;
    fn l_value(&self, f: &Expr) -> Result<AlgebraElement>;
}

impl PointFunctional for APoint {
    fn algebra(&self) -> &Arc<WeilAlgebra> {
        &self.algebra
    }

    fn base_value(&self, f: &Expr) -> Result<f64> {
        APoint::base_value(self, f)
    }

    fn l_value(&self, f: &Expr) -> Result<AlgebraElement> {
        self.l_part(f)
    }
}

/// Max-coefficient norm of
/// `L(fg + lambda h) - [L(f) g(x) + f(x) L(g) + L(f) L(g) + lambda L(h)]`.
pub fn leibniz_residual<P: PointFunctional + ?Sized>(
    point: &P,
    f: &Expr,
    g: &Expr,
    h: &Expr,
    lambda: f64,
) -> Result<f64> {
    let lhs_expr = f.clone() * g.clone() + lambda * h.clone();
    let lhs = point.l_value(&lhs_expr)?;
    let (lf, lg, lh) = (point.l_value(f)?, point.l_value(g)?, point.l_value(h)?);
    let (fx, gx) = (point.base_value(f)?, point.base_value(g)?);
    let rhs = lf.scale(gx).add(&lg.scale(fx))?.add(&lf.mul(&lg)?)?.add(&lh.scale(lambda))?;
    Ok(lhs.sub(&rhs)?.max_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth_expr::parse;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(m: &str, k: u32) -> (Arc<Manifold>, Arc<WeilAlgebra>) {
        (Arc::new(Manifold::builtin(m).unwrap()), Arc::new(WeilAlgebra::jets(k).unwrap()))
    }

    fn el(a: &Arc<WeilAlgebra>, c: &[f64]) -> AlgebraElement {
        AlgebraElement::new(a.clone(), c.to_vec()).unwrap()
    }

    #[test]
    fn projection_reads_real_parts() {
        let (m, a) = setup("R^2", 1);
        let xi = APoint::new(m.clone(), a.clone(), "U", &[el(&a, &[1.0, 2.0]), el(&a, &[3.0, 0.0])]).unwrap();
        assert_eq!(xi.project().coords, [1.0, 3.0]);
        let z = APoint::zero_section(m.clone(), a, &xi.project()).unwrap();
        assert_eq!(z.project(), xi.project());
    }

    #[test]
    fn evaluation_examples() {
        let (m, a) = setup("R^2", 2);
        let (x, y) = ([2.0, 0.5, -1.0], [0.25, 3.0, 1.5]);
        let xi = APoint::new(m, a.clone(), "U", &[el(&a, &x), el(&a, &y)]).unwrap();
        let sq = xi.evaluate(&parse("x^2").unwrap()).unwrap();
        assert_eq!(sq.coeffs(), &[x[0] * x[0], 2.0 * x[0] * x[1], 2.0 * x[0] * x[2] + x[1] * x[1]]);
        let sum = xi.evaluate(&parse("y + x").unwrap()).unwrap();
        assert_eq!(sum.coeffs(), &[y[0] + x[0], y[1] + x[1], y[2] + x[2]]);
        let c = xi.evaluate(&parse("4.5").unwrap()).unwrap();
        assert_eq!(c, AlgebraElement::constant(a, 4.5));
        assert_eq!(xi.project().coords, [2.0, 0.25]);
    }

    #[test]
    fn l_part_examples() {
        let (m, a) = setup("R^1", 1);
        let x0 = 0.4;
        let xi = APoint::new(m.clone(), a.clone(), "U", &[el(&a, &[x0, 1.0])]).unwrap();
        let l = xi.l_part(&parse("sin(x)").unwrap()).unwrap();
        assert_eq!(l.coeffs()[0], 0.0);
        assert_relative_eq!(l.coeffs()[1], x0.cos());

        let zero = APoint::zero_section(m, a.clone(), &xi.project()).unwrap();
        assert_eq!(zero.l_part(&parse("exp(x)*sin(x)").unwrap()).unwrap(), AlgebraElement::zero(a));
    }

    #[test]
    fn morimoto_vanishing() {
        // flat(x - 1) vanishes identically on x < 1
        let (m, a) = setup("R^1", 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = parse("flat(x - 1)*exp(x)*sin(3*x)").unwrap();
        for _ in 0..50 {
            let base = m.point("U", &[rng.random_range(-1.0..0.99)]).unwrap();
            let xi = APoint::sample_over(m.clone(), a.clone(), &base, 2.0, &mut rng);
            assert!(xi.l_part(&f).unwrap().max_norm() <= 1e-12);
        }
    }

    #[test]
    fn real_coords_layout() {
        let (m, a) = setup("R^1", 2);
        let xi = APoint::new(m.clone(), a.clone(), "U", &[el(&a, &[1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(xi.to_real_coords().to_rows(), vec![vec![1.0, 2.0, 3.0]]);

        let (m2, _) = setup("R^2", 2);
        let rc = RealCoords::from_rows(&[vec![2.0, 1.0, 0.5], vec![-1.0, 0.0, 4.0]]).unwrap();
        let p = APoint::from_real_coords(m2, a.clone(), "U", &rc).unwrap();
        assert_eq!(p.to_real_coords(), rc);
        assert_eq!(p.acoord(1).coeffs(), &[-1.0, 0.0, 4.0]);

        let bad = RealCoords::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(APoint::from_real_coords(m, a, "U", &bad).is_err());
    }

    #[test]
    fn boundary_points_keep_their_base_coordinate() {
        let h = Arc::new(Manifold::builtin("halfplane").unwrap());
        let a = Arc::new(WeilAlgebra::jets(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let base = h.point("H", &[0.0, rng.random_range(-1.0..1.0)]).unwrap();
            let xi = APoint::sample_over(h.clone(), a.clone(), &base, 1.0, &mut rng);
            assert_eq!(xi.acoord(0).real_part(), 0.0);
            assert_eq!(xi.to_real_coords().get(0, 0), base.coords[0]);
        }
        let outside = RealCoords::from_rows(&[vec![-0.5, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            APoint::from_real_coords(h, a, "H", &outside),
            Err(Error::ChartDomain { .. })
        ));
    }

    #[test]
    fn leibniz_identity() {
        let (m, a) = setup("R^1", 3);
        let xi = APoint::new(m, a.clone(), "U", &[el(&a, &[0.3, 1.0, -2.0, 0.5])]).unwrap();
        let x = parse("x").unwrap();
        assert!(leibniz_residual(&xi, &x, &x, &x, 1.0).unwrap() <= 1e-12);
    }

    fn arb_f() -> impl Strategy<Value = Expr> {
        prop::sample::select(vec![
            "sin(t)", "cos(2*t)", "exp(sin(t))", "sin(t)^3", "atan(cos(t))", "1/(2 + cos(t))",
            "log(2 + sin(t))", "sqrt(3 + cos(t))*sin(t)", "cos(t)^2 - sin(t)",
        ])
        .prop_map(|s| parse(s).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn leibniz_holds_for_genuine_points(
            f in arb_f(), g in arb_f(), h in arb_f(),
            lambda in -3.0f64..3.0, seed in any::<u64>(), k in 1u32..4,
        ) {
            let (m, a) = setup("S1", k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = APoint::sample(m, a, 1.0, &mut rng);
            prop_assert!(leibniz_residual(&xi, &f, &g, &h, lambda).unwrap() <= 1e-10);
        }

        #[test]
        fn real_part_commutes_with_evaluation(f in arb_f(), seed in any::<u64>()) {
            let (m, a) = setup("S1", 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = APoint::sample(m, a, 1.0, &mut rng);
            let v = xi.evaluate(&f).unwrap();
            let b = xi.base_value(&f).unwrap();
            prop_assert!((v.real_part() - b).abs() <= 1e-14 * (1.0 + b.abs()));
            prop_assert_eq!(xi.l_part(&f).unwrap().real_part(), 0.0);
        }

        #[test]
        fn real_coords_round_trip(seed in any::<u64>()) {
            let (m, a) = setup("T2", 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = APoint::sample(m.clone(), a.clone(), 3.0, &mut rng);
            let back = APoint::from_real_coords(m, a, xi.chart_id(), &xi.to_real_coords()).unwrap();
            prop_assert_eq!(back, xi);
        }
    }
}
