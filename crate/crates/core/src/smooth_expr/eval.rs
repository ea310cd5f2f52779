use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{Expr, Primitive};
use crate::error::{Error, Result};
use crate::math;
use crate::weil_algebra::{same_algebra, AlgebraElement, Monomial, WeilAlgebra};

/// Highest derivative order accepted by [`partial_derivatives`].
pub const MAX_PARTIAL_ORDER: u32 = 6;

// The model algebra for 4 variables at order 6 has 210 basis monomials.
const PARTIALS_DIM_LIMIT: usize = 1024;

/// Variable lookup used by the evaluators.
pub trait Env<T> {
    fn lookup(&self, name: &str) -> Option<&T>;
}

impl<T> Env<T> for BTreeMap<String, T> {
    fn lookup(&self, name: &str) -> Option<&T> {
        self.get(name)
    }
}

impl<T> Env<T> for [(&str, T)] {
    fn lookup(&self, name: &str) -> Option<&T> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }
}

impl<T, const N: usize> Env<T> for [(&str, T); N] {
    fn lookup(&self, name: &str) -> Option<&T> {
        self.as_slice().lookup(name)
    }
}

/// Parallel slices of names and values.
#[derive(Clone, Copy, Debug)]
pub struct Bindings<'a, T> {
    pub names: &'a [String],
    pub values: &'a [T],
}

impl<'a, T> Bindings<'a, T> {
    pub fn new(names: &'a [String], values: &'a [T]) -> Self {
        Bindings { names, values }
    }
}

impl<T> Env<T> for Bindings<'_, T> {
    fn lookup(&self, name: &str) -> Option<&T> {
        self.names.iter().position(|n| n == name).and_then(|i| self.values.get(i))
    }
}

pub fn eval_real<E: Env<f64> + ?Sized>(e: &Expr, env: &E) -> Result<f64> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Var(v) => *env.lookup(v).ok_or_else(|| Error::UnboundVariable(v.clone()))?,
        Expr::Add(a, b) => eval_real(a, env)? + eval_real(b, env)?,
        Expr::Sub(a, b) => eval_real(a, env)? - eval_real(b, env)?,
        Expr::Mul(a, b) => eval_real(a, env)? * eval_real(b, env)?,
        Expr::Div(a, b) => {
            let num = eval_real(a, env)?;
            let den = eval_real(b, env)?;
            if den == 0.0 {
                return Err(Error::DivisionByZero);
            }
            num / den
        }
        Expr::Neg(a) => -eval_real(a, env)?,
        Expr::Pow(a, n) => {
            let x = eval_real(a, env)?;
            if x == 0.0 && *n < 0 {
                return Err(Error::DivisionByZero);
            }
            math::powi(x, *n)
        }
        Expr::Call(p, a) => apply_real(*p, eval_real(a, env)?)?,
    })
}

fn apply_real(p: Primitive, x: f64) -> Result<f64> {
    Ok(match p {
        Primitive::Sin => math::sin(x),
        Primitive::Cos => math::cos(x),
        Primitive::Exp => math::exp(x),
        Primitive::Log => {
            if x <= 0.0 {
                return Err(Error::Domain { function: "log", argument: x });
            }
            math::ln(x)
        }
        Primitive::Sqrt => {
            if x < 0.0 {
                return Err(Error::Domain { function: "sqrt", argument: x });
            }
            math::sqrt(x)
        }
        Primitive::Atan => math::atan(x),
        Primitive::Flat => flat_taylor(x, 0)[0],
    })
}

/// Source of coefficient vectors for jet evaluation.
pub(crate) trait JetEnv {
    fn coeffs(&self, name: &str) -> Result<&[f64]>;
}

struct ElementEnv<'a, E: ?Sized> {
    env: &'a E,
    algebra: &'a Arc<WeilAlgebra>,
}

impl<E: Env<AlgebraElement> + ?Sized> JetEnv for ElementEnv<'_, E> {
    fn coeffs(&self, name: &str) -> Result<&[f64]> {
        let v = self.env.lookup(name).ok_or_else(|| Error::UnboundVariable(name.to_string()))?;
        if !same_algebra(v.algebra(), self.algebra) {
            return Err(Error::AlgebraMismatch);
        }
        Ok(v.coeffs())
    }
}

/// Evaluates `e` with algebra-valued variables.
///
/// Every primitive `g` is applied to `a = a0 + n` as
/// `sum_{j <= k} g^(j)(a0)/j! n^j`, so the result is the image of `e` under
/// the algebra morphism determined by the inputs.
pub fn eval_jet<E: Env<AlgebraElement> + ?Sized>(
    e: &Expr,
    env: &E,
    algebra: &Arc<WeilAlgebra>,
) -> Result<AlgebraElement> {
    let coeffs = eval_jet_with(e, &ElementEnv { env, algebra }, algebra)?;
    Ok(AlgebraElement::from_raw(algebra.clone(), coeffs))
}

pub(crate) fn eval_jet_with(e: &Expr, env: &dyn JetEnv, alg: &WeilAlgebra) -> Result<Vec<f64>> {
    Ok(match e {
        Expr::Const(c) => {
            let mut v = vec![0.0; alg.dim()];
            v[0] = *c;
            v
        }
        Expr::Var(name) => env.coeffs(name)?.to_vec(),
        Expr::Add(a, b) => {
            let mut x = eval_jet_with(a, env, alg)?;
            let y = eval_jet_with(b, env, alg)?;
            x.iter_mut().zip(&y).for_each(|(p, q)| *p += q);
            x
        }
        Expr::Sub(a, b) => {
            let mut x = eval_jet_with(a, env, alg)?;
            let y = eval_jet_with(b, env, alg)?;
            x.iter_mut().zip(&y).for_each(|(p, q)| *p -= q);
            x
        }
        Expr::Mul(a, b) => {
            let x = eval_jet_with(a, env, alg)?;
            let y = eval_jet_with(b, env, alg)?;
            alg.mul_coeffs(&x, &y)
        }
        Expr::Div(a, b) => {
            let x = eval_jet_with(a, env, alg)?;
            let y = eval_jet_with(b, env, alg)?;
            alg.mul_coeffs(&x, &reciprocal(&y, alg)?)
        }
        Expr::Neg(a) => {
            let mut x = eval_jet_with(a, env, alg)?;
            x.iter_mut().for_each(|p| *p = -*p);
            x
        }
        Expr::Pow(a, n) => {
            let x = eval_jet_with(a, env, alg)?;
            let base = if *n < 0 { reciprocal(&x, alg)? } else { x };
            power(&base, n.unsigned_abs(), alg)
        }
        Expr::Call(p, a) => {
            let x = eval_jet_with(a, env, alg)?;
            let taylor = primitive_taylor(*p, x[0], alg.order())?;
            horner(&taylor, &x, alg)
        }
    })
}

fn power(x: &[f64], mut n: u32, alg: &WeilAlgebra) -> Vec<f64> {
    let mut acc = alg.unit_coeffs();
    let mut base = x.to_vec();
    while n > 0 {
        if n & 1 == 1 {
            acc = alg.mul_coeffs(&acc, &base);
        }
        n >>= 1;
        if n > 0 {
            base = alg.mul_coeffs(&base, &base);
        }
    }
    acc
}

fn reciprocal(x: &[f64], alg: &WeilAlgebra) -> Result<Vec<f64>> {
    let a0 = x[0];
    if a0 == 0.0 {
        return Err(Error::DivisionByZero);
    }
    let k = alg.order() as usize;
    // 1/(a0 + h) = sum_j (-1)^j h^j / a0^(j+1)
    let mut t = Vec::with_capacity(k + 1);
    let mut c = 1.0 / a0;
    for _ in 0..=k {
        t.push(c);
        c *= -1.0 / a0;
    }
    Ok(horner(&t, x, alg))
}

/// `sum_j t_j n^j` where `n` is the nilpotent part of `x`.
fn horner(t: &[f64], x: &[f64], alg: &WeilAlgebra) -> Vec<f64> {
    let mut n = x.to_vec();
    n[0] = 0.0;
    let mut acc = vec![0.0; alg.dim()];
    for &c in t.iter().rev() {
        acc = alg.mul_coeffs(&acc, &n);
        acc[0] += c;
    }
    acc
}

/// Taylor coefficients `g^(j)(a0)/j!` for `j = 0..=k`.
fn primitive_taylor(p: Primitive, a0: f64, k: u32) -> Result<Vec<f64>> {
    let k = k as usize;
    let mut t = Vec::with_capacity(k + 1);
    match p {
        Primitive::Sin | Primitive::Cos => {
            let (s, c) = (math::sin(a0), math::cos(a0));
            let cycle = if p == Primitive::Sin { [s, c, -s, -c] } else { [c, -s, -c, s] };
            for j in 0..=k {
                t.push(cycle[j % 4] / math::factorial(j as u32));
            }
        }
        Primitive::Exp => {
            let e = math::exp(a0);
            for j in 0..=k {
                t.push(e / math::factorial(j as u32));
            }
        }
        Primitive::Log => {
            if a0 <= 0.0 {
                return Err(Error::Domain { function: "log", argument: a0 });
            }
            t.push(math::ln(a0));
            for j in 1..=k {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                t.push(sign / (j as f64 * math::powi(a0, j as i32)));
            }
        }
        Primitive::Sqrt => {
            if a0 < 0.0 || (a0 == 0.0 && k > 0) {
                return Err(Error::Domain { function: "sqrt", argument: a0 });
            }
            // sqrt(a0) * binom(1/2, j) / a0^j
            let mut c = math::sqrt(a0);
            for j in 0..=k {
                t.push(c);
                c *= (0.5 - j as f64) / ((j + 1) as f64 * a0);
            }
        }
        Primitive::Atan => {
            t.push(math::atan(a0));
            // atan' = 1/q with q = (1 + a0^2) + 2 a0 h + h^2
            let q0 = 1.0 + a0 * a0;
            let q1 = 2.0 * a0;
            let mut r: Vec<f64> = Vec::with_capacity(k);
            for n in 0..k {
                let mut v = if n == 0 { 1.0 } else { 0.0 };
                if n >= 1 {
                    v -= q1 * r[n - 1];
                }
                if n >= 2 {
                    v -= r[n - 2];
                }
                r.push(v / q0);
            }
            for (j, rj) in r.iter().enumerate() {
                t.push(rj / (j + 1) as f64);
            }
        }
        Primitive::Flat => t = flat_taylor(a0, k),
    }
    Ok(t)
}

/// Taylor coefficients of `exp(-1/x)` (zero for `x <= 0`).
///
/// With `u = 1/x` the j-th derivative is `P_j(u) exp(-u)` where
/// `P_0 = 1` and `P_{j+1}(u) = u^2 (P_j(u) - P_j'(u))`.
fn flat_taylor(x: f64, k: usize) -> Vec<f64> {
    let mut t = vec![0.0; k + 1];
    if x <= 0.0 {
        return t;
    }
    let u = 1.0 / x;
    if u > 700.0 {
        return t;
    }
    let e = math::exp(-u);
    let mut poly = vec![1.0];
    for (j, tj) in t.iter_mut().enumerate() {
        let val = poly.iter().rev().fold(0.0, |acc, c| acc * u + c);
        *tj = val * e / math::factorial(j as u32);
        let mut next = vec![0.0; poly.len() + 2];
        for (i, c) in poly.iter().enumerate() {
            next[i + 2] += c;
            if i > 0 {
                next[i + 1] -= i as f64 * c;
            }
        }
        poly = next;
    }
    t
}

/// All partial derivatives `d^alpha f(x)` with `1 <= |alpha| <= k`, keyed by
/// exponent vector over the evaluation variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Partials {
    pub vars: Vec<String>,
    pub value: f64,
    pub entries: BTreeMap<Vec<u32>, f64>,
}

impl Partials {
    pub fn get(&self, alpha: &[u32]) -> Option<f64> {
        self.entries.get(alpha).copied()
    }

    /// Looks an entry up by monomial name such as `"x^2*y"`.
    pub fn get_named(&self, name: &str) -> Option<f64> {
        let m = Monomial::parse(name, &self.vars).ok()?;
        self.get(m.exponents())
    }

    /// `(name, value)` pairs in basis order, e.g. `("x*y", 1.0)`.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut keys: Vec<&Vec<u32>> = self.entries.keys().collect();
        keys.sort_by(|a, b| {
            let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
            da.cmp(&db).then_with(|| b.cmp(a))
        });
        keys.into_iter()
            .map(|k| {
                let m = Monomial::new(k.clone());
                let name = m.display(&self.vars).to_string();
                (name, self.entries[k])
            })
            .collect()
    }
}

/// Reusable model algebra `R[d_1..d_m]/(degree > k)` for repeated partial
/// derivative evaluation over the same variables.
#[derive(Clone, Debug)]
pub struct PartialsEngine {
    vars: Vec<String>,
    algebra: WeilAlgebra,
    seeds: Vec<Vec<f64>>,
    factorials: Vec<f64>,
}

impl PartialsEngine {
    pub fn new(vars: &[String], k: u32) -> Result<Self> {
        if k > MAX_PARTIAL_ORDER {
            return Err(Error::OrderGuard { order: k, limit: MAX_PARTIAL_ORDER });
        }
        let gens: Vec<String> = (0..vars.len()).map(|i| alloc::format!("d{i}")).collect();
        let algebra = WeilAlgebra::truncated_with_limit(&gens, k, PARTIALS_DIM_LIMIT)?;
        let seeds = (0..vars.len())
            .map(|i| {
                let mut e = vec![0u32; vars.len()];
                e[i] = 1;
                let mut v = vec![0.0; algebra.dim()];
                if k > 0 {
                    v[algebra.index_of(&Monomial::new(e)).expect("generator in basis")] = 1.0;
                }
                v
            })
            .collect();
        let factorials = algebra.basis().iter().map(Monomial::factorial).collect();
        Ok(PartialsEngine { vars: vars.to_vec(), algebra, seeds, factorials })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn order(&self) -> u32 {
        self.algebra.order()
    }

    /// Coefficient vector over the model basis: entry `i` is
    /// `d^alpha_i f(x) / alpha_i!`.
    pub fn taylor(&self, e: &Expr, point: &[f64]) -> Result<Vec<f64>> {
        struct Seeded<'a> {
            vars: &'a [String],
            values: Vec<Vec<f64>>,
        }
        impl JetEnv for Seeded<'_> {
            fn coeffs(&self, name: &str) -> Result<&[f64]> {
                self.vars
                    .iter()
                    .position(|v| v == name)
                    .map(|i| self.values[i].as_slice())
                    .ok_or_else(|| Error::UnboundVariable(name.to_string()))
            }
        }
        let values = self
            .seeds
            .iter()
            .zip(point)
            .map(|(s, &x)| {
                let mut v = s.clone();
                v[0] = x;
                v
            })
            .collect();
        eval_jet_with(e, &Seeded { vars: &self.vars, values }, &self.algebra)
    }

    /// Derivatives `d^alpha f(x)` in model-basis order (index 0 is `f(x)`).
    pub fn derivatives(&self, e: &Expr, point: &[f64]) -> Result<Vec<f64>> {
        let mut t = self.taylor(e, point)?;
        t.iter_mut().zip(&self.factorials).for_each(|(c, f)| *c *= f);
        Ok(t)
    }

    pub fn basis(&self) -> &[Monomial] {
        self.algebra.basis()
    }

    pub fn partials(&self, e: &Expr, point: &[f64]) -> Result<Partials> {
        let d = self.derivatives(e, point)?;
        let entries = self
            .algebra
            .basis()
            .iter()
            .zip(&d)
            .skip(1)
            .map(|(m, v)| (m.exponents().to_vec(), *v))
            .collect();
        Ok(Partials { vars: self.vars.clone(), value: d[0], entries })
    }
}

/// Partial derivatives of `e` at `at` up to order `k` (at most 6), over the
/// variables bound in `at`.
pub fn partial_derivatives(e: &Expr, at: &BTreeMap<String, f64>, k: u32) -> Result<Partials> {
    let vars: Vec<String> = at.keys().cloned().collect();
    let point: Vec<f64> = at.values().copied().collect();
    PartialsEngine::new(&vars, k)?.partials(e, &point)
}
