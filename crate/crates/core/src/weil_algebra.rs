//! Finite-dimensional Weil algebras `A = R[X_1..X_n] / I` with `I` a monomial
//! ideal.
//!
//! The basis is the set of standard monomials (those divisible by no ideal
//! generator), ordered by total degree and then lexicographically with the
//! first generator largest. The unit monomial is always `basis[0]`, so the
//! coefficient at index 0 of an [`AlgebraElement`] is its real part.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

/// Largest supported algebra dimension.
pub const MAX_DIM: usize = 64;

/// Exponent vector of a monomial in the algebra generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(vars: usize) -> Self {
        Monomial(vec![0; vars])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `alpha!` for the exponent vector `alpha`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| math::factorial(e)).product()
    }

    /// Parses `1`, `name`, `name^int` and `*`-products of those.
    pub fn parse(src: &str, generators: &[String]) -> Result<Monomial> {
        let mut exps = vec![0u32; generators.len()];
        let src = src.trim();
        if src == "1" {
            return Ok(Monomial(exps));
        }
        if src.is_empty() {
            return Err(Error::InvalidRelation("empty monomial".to_string()));
        }
        for factor in src.split('*') {
            let factor = factor.trim();
            let (name, power) = match factor.split_once('^') {
                Some((name, p)) => {
                    let p: u32 = p.trim().parse().map_err(|_| {
                        Error::InvalidRelation(format!("bad exponent in `{factor}`"))
                    })?;
                    (name.trim(), p)
                }
                None => (factor, 1),
            };
            let idx = generators.iter().position(|g| g == name).ok_or_else(|| {
                Error::InvalidRelation(format!("`{name}` is not a generator"))
            })?;
            exps[idx] += power;
        }
        Ok(Monomial(exps))
    }

    pub fn display<'a>(&'a self, generators: &'a [String]) -> impl fmt::Display + 'a {
        MonomialDisplay { mono: self, generators }
    }
}

struct MonomialDisplay<'a> {
    mono: &'a Monomial,
    generators: &'a [String],
}

impl fmt::Display for MonomialDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mono.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for (name, &e) in self.generators.iter().zip(&self.mono.0) {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if e == 1 {
                f.write_str(name)?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Degree first, then lexicographic with larger leading exponents first.
fn basis_order(a: &Monomial, b: &Monomial) -> Ordering {
    a.degree().cmp(&b.degree()).then_with(|| b.0.cmp(&a.0))
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Debug)]
pub struct WeilAlgebra {
    generators: Vec<String>,
    relations: Vec<Monomial>,
    basis: Vec<Monomial>,
    order: u32,
    // dim x dim, index of the product monomial or None when it reduces to 0
    table: Vec<Option<u16>>,
}

impl PartialEq for WeilAlgebra {
    // The standard monomials determine the monomial ideal.
    fn eq(&self, other: &Self) -> bool {
        self.generators == other.generators && self.basis == other.basis
    }
}

impl WeilAlgebra {
    pub fn new(generators: Vec<String>, relations: Vec<Monomial>) -> Result<Self> {
        Self::with_limit(generators, relations, MAX_DIM)
    }

    pub(crate) fn with_limit(
        generators: Vec<String>,
        relations: Vec<Monomial>,
        limit: usize,
    ) -> Result<Self> {
        let n = generators.len();
        let mut seen = BTreeSet::new();
        for g in &generators {
            if !is_identifier(g) {
                return Err(Error::InvalidRelation(format!("`{g}` is not a valid generator name")));
            }
            if !seen.insert(g.as_str()) {
                return Err(Error::InvalidRelation(format!("duplicate generator `{g}`")));
            }
        }
        let mut rels: Vec<Monomial> = Vec::new();
        for r in relations {
            if r.0.len() != n {
                return Err(Error::InvalidRelation("relation has wrong arity".to_string()));
            }
            if r.is_one() {
                return Err(Error::InvalidRelation(
                    "the unit cannot lie in the ideal".to_string(),
                ));
            }
            if !rels.contains(&r) {
                rels.push(r);
            }
        }
        for (i, g) in generators.iter().enumerate() {
            let has_power = rels
                .iter()
                .any(|r| r.0.iter().enumerate().all(|(j, &e)| (j == i) == (e > 0)));
            if !has_power {
                return Err(Error::NonNilpotent { generator: g.clone() });
            }
        }

        let in_ideal = |m: &Monomial| rels.iter().any(|r| r.divides(m));
        // Standard monomials form an order ideal: every degree-(d+1) standard
        // monomial is a degree-d standard monomial times a generator.
        let mut basis = vec![Monomial::one(n)];
        let mut layer = vec![Monomial::one(n)];
        while !layer.is_empty() {
            let mut next = BTreeSet::new();
            for m in &layer {
                for i in 0..n {
                    let mut e = m.0.clone();
                    e[i] += 1;
                    let cand = Monomial(e);
                    if !in_ideal(&cand) {
                        next.insert(cand.0);
                    }
                }
            }
            if basis.len() + next.len() > limit {
                return Err(Error::DimensionGuard { dim: basis.len() + next.len(), limit });
            }
            let mut next: Vec<Monomial> = next.into_iter().map(Monomial).collect();
            next.sort_by(basis_order);
            basis.extend(next.iter().cloned());
            layer = next;
        }
        let order = basis.iter().map(Monomial::degree).max().unwrap_or(0);

        let index: BTreeMap<&[u32], usize> =
            basis.iter().enumerate().map(|(i, m)| (m.0.as_slice(), i)).collect();
        let dim = basis.len();
        let mut table = vec![None; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let p = basis[i].mul(&basis[j]);
                table[i * dim + j] = index.get(p.0.as_slice()).map(|&k| k as u16);
            }
        }
        Ok(WeilAlgebra { generators, relations: rels, basis, order, table })
    }

    /// Builds an algebra from generator names and relation strings such as
    /// `"e1^2"` or `"e1*e2"`.
    pub fn from_strs(generators: &[&str], relations: &[&str]) -> Result<Self> {
        let gens: Vec<String> = generators.iter().map(|s| s.to_string()).collect();
        let rels = relations
            .iter()
            .map(|r| Monomial::parse(r, &gens))
            .collect::<Result<Vec<_>>>()?;
        Self::new(gens, rels)
    }

    /// The trivial Weil algebra `R`.
    pub fn real() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("R is a valid algebra")
    }

    /// `R[e]/(e^(k+1))`, the algebra of `k`-th order jets in one direction.
    pub fn jets(k: u32) -> Result<Self> {
        let gens = vec!["e".to_string()];
        Self::new(gens, vec![Monomial(vec![k + 1])])
    }

    /// `R[d_1..d_m]` modulo all monomials of degree `k + 1`.
    pub fn truncated(names: &[String], k: u32) -> Result<Self> {
        Self::truncated_with_limit(names, k, MAX_DIM)
    }

    pub(crate) fn truncated_with_limit(names: &[String], k: u32, limit: usize) -> Result<Self> {
        let m = names.len();
        let mut rels = Vec::new();
        let mut exps = vec![0u32; m];
        fn rec(i: usize, left: u32, exps: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if i + 1 == exps.len() {
                exps[i] = left;
                out.push(Monomial(exps.clone()));
                return;
            }
            for e in (0..=left).rev() {
                exps[i] = e;
                rec(i + 1, left - e, exps, out);
            }
        }
        if m > 0 {
            rec(0, k + 1, &mut exps, &mut rels);
        }
        Self::with_limit(names.to_vec(), rels, limit)
    }

    /// `A ⊗ B`. Generators of `other` that collide with ours are renamed with
    /// a numeric suffix.
    pub fn tensor(&self, other: &WeilAlgebra) -> Result<Self> {
        let mut gens = self.generators.clone();
        for g in &other.generators {
            let mut name = g.clone();
            let mut suffix = 2;
            while gens.contains(&name) {
                name = format!("{g}_{suffix}");
                suffix += 1;
            }
            gens.push(name);
        }
        let (n, m) = (self.generators.len(), other.generators.len());
        let mut rels = Vec::new();
        for r in &self.relations {
            let mut e = r.0.clone();
            e.extend(core::iter::repeat_n(0, m));
            rels.push(Monomial(e));
        }
        for r in &other.relations {
            let mut e = vec![0; n];
            e.extend_from_slice(&r.0);
            rels.push(Monomial(e));
        }
        Self::new(gens, rels)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Nilpotency index `k`: the least `k` with `A^(k+1) = 0` for the maximal ideal.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn generators(&self) -> &[String] {
        &self.generators
    }

    pub fn relations(&self) -> &[Monomial] {
        &self.relations
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn basis_name(&self, i: usize) -> String {
        self.basis[i].display(&self.generators).to_string()
    }

    pub fn basis_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.basis_name(i)).collect()
    }

    pub fn relation_names(&self) -> Vec<String> {
        self.relations.iter().map(|r| r.display(&self.generators).to_string()).collect()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.basis.iter().position(|b| b == m)
    }

    /// Index of the basis monomial named like the canonical output (`"e1*e2"`).
    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        let m = Monomial::parse(name, &self.generators).ok()?;
        self.index_of(&m)
    }

    /// Basis index of `basis[i] * basis[j]`, or `None` when it lies in the ideal.
    pub fn product_index(&self, i: usize, j: usize) -> Option<usize> {
        self.table[i * self.dim() + j].map(usize::from)
    }

    /// Whether the maximal ideal squares to zero (first-order algebra).
    pub fn is_square_zero(&self) -> bool {
        self.order <= 1
    }

    pub(crate) fn mul_coeffs(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let row = &self.table[i * d..(i + 1) * d];
            for (j, &bj) in b.iter().enumerate() {
                if bj == 0.0 {
                    continue;
                }
                if let Some(k) = row[j] {
                    out[k as usize] += ai * bj;
                }
            }
        }
        out
    }

    /// `n^j` for a coefficient vector `n` (no nilpotency check).
    pub(crate) fn pow_coeffs(&self, n: &[f64], j: u32) -> Vec<f64> {
        let mut acc = self.unit_coeffs();
        for _ in 0..j {
            acc = self.mul_coeffs(&acc, n);
        }
        acc
    }

    pub(crate) fn unit_coeffs(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[0] = 1.0;
        v
    }
}

pub(crate) fn same_algebra(a: &Arc<WeilAlgebra>, b: &Arc<WeilAlgebra>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// An element `a = a_1 * 1 + sum_i a_i alpha_i` of a Weil algebra.
#[derive(Clone, Debug)]
pub struct AlgebraElement {
    algebra: Arc<WeilAlgebra>,
    coeffs: Vec<f64>,
}

impl PartialEq for AlgebraElement {
    fn eq(&self, other: &Self) -> bool {
        same_algebra(&self.algebra, &other.algebra) && self.coeffs == other.coeffs
    }
}

impl AlgebraElement {
    pub fn new(algebra: Arc<WeilAlgebra>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != algebra.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                algebra.dim(),
                coeffs.len()
            )));
        }
        Ok(AlgebraElement { algebra, coeffs })
    }

    pub(crate) fn from_raw(algebra: Arc<WeilAlgebra>, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), algebra.dim());
        AlgebraElement { algebra, coeffs }
    }

    pub fn zero(algebra: Arc<WeilAlgebra>) -> Self {
        let d = algebra.dim();
        AlgebraElement { algebra, coeffs: vec![0.0; d] }
    }

    pub fn constant(algebra: Arc<WeilAlgebra>, c: f64) -> Self {
        let mut e = Self::zero(algebra);
        e.coeffs[0] = c;
        e
    }

    pub fn one(algebra: Arc<WeilAlgebra>) -> Self {
        Self::constant(algebra, 1.0)
    }

    /// The basis element `alpha_i`.
    pub fn basis(algebra: Arc<WeilAlgebra>, i: usize) -> Self {
        let mut e = Self::zero(algebra);
        e.coeffs[i] = 1.0;
        e
    }

    pub fn algebra(&self) -> &Arc<WeilAlgebra> {
        &self.algebra
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Projection onto `R`.
    pub fn real_part(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn nilpotent_part(&self) -> AlgebraElement {
        let mut n = self.clone();
        n.coeffs[0] = 0.0;
        n
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| f64::max(m, math::abs(*c)))
    }

    fn check(&self, other: &AlgebraElement) -> Result<()> {
        if same_algebra(&self.algebra, &other.algebra) {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch)
        }
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(AlgebraElement { algebra: self.algebra.clone(), coeffs })
    }

    pub fn sub(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(AlgebraElement { algebra: self.algebra.clone(), coeffs })
    }

    pub fn scale(&self, s: f64) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn neg(&self) -> AlgebraElement {
        self.scale(-1.0)
    }

    pub fn mul(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check(other)?;
        Ok(AlgebraElement {
            algebra: self.algebra.clone(),
            coeffs: self.algebra.mul_coeffs(&self.coeffs, &other.coeffs),
        })
    }

    /// `a^j` for nilpotent `a`; zero once `j` exceeds the nilpotency index.
    pub fn nilpotent_power(&self, j: u32) -> Result<AlgebraElement> {
        if self.coeffs[0] != 0.0 {
            return Err(Error::NotNilpotent { real_part: self.coeffs[0] });
        }
        if j > self.algebra.order() {
            return Ok(AlgebraElement::zero(self.algebra.clone()));
        }
        Ok(AlgebraElement {
            algebra: self.algebra.clone(),
            coeffs: self.algebra.pow_coeffs(&self.coeffs, j),
        })
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 && !(first && i + 1 == self.coeffs.len()) {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            if i == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{}", self.algebra.basis_name(i))?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(a: &WeilAlgebra) -> Vec<String> {
        a.basis_names()
    }

    #[test]
    fn dual_numbers() {
        let a = WeilAlgebra::from_strs(&["e"], &["e^2"]).unwrap();
        assert_eq!(names(&a), ["1", "e"]);
        assert_eq!(a.order(), 1);
        assert!(a.is_square_zero());
    }

    #[test]
    fn second_order_jets() {
        let a = WeilAlgebra::from_strs(&["e"], &["e^3"]).unwrap();
        assert_eq!(names(&a), ["1", "e", "e^2"]);
        assert_eq!(a.order(), 2);
    }

    #[test]
    fn torus_algebra() {
        let a = WeilAlgebra::from_strs(&["e1", "e2"], &["e1^2", "e2^2", "e1*e2"]).unwrap();
        assert_eq!(names(&a), ["1", "e1", "e2"]);
        assert_eq!(a.order(), 1);
    }

    #[test]
    fn graded_lex_order() {
        let a = WeilAlgebra::from_strs(&["x", "y"], &["x^3", "y^3"]).unwrap();
        assert_eq!(
            names(&a),
            ["1", "x", "y", "x^2", "x*y", "y^2", "x^2*y", "x*y^2", "x^2*y^2"]
        );
        assert_eq!(a.order(), 4);
    }

    #[test]
    fn rejects_infinite_quotient() {
        let err = WeilAlgebra::from_strs(&["x", "y"], &["x^2", "x*y"]).unwrap_err();
        assert_eq!(err, Error::NonNilpotent { generator: "y".to_string() });
    }

    #[test]
    fn rejects_large_algebra() {
        let err = WeilAlgebra::from_strs(&["x", "y"], &["x^9", "y^9"]).unwrap_err();
        assert!(matches!(err, Error::DimensionGuard { .. }));
    }

    #[test]
    fn rejects_bad_relations() {
        assert!(WeilAlgebra::from_strs(&["e"], &["1"]).is_err());
        assert!(WeilAlgebra::from_strs(&["e"], &["f^2"]).is_err());
        assert!(WeilAlgebra::from_strs(&["e"], &["e^x"]).is_err());
        assert!(WeilAlgebra::from_strs(&["e", "e"], &["e^2"]).is_err());
    }

    #[test]
    fn square_of_epsilon_vanishes() {
        let a = Arc::new(WeilAlgebra::jets(1).unwrap());
        let e = AlgebraElement::basis(a.clone(), 1);
        assert_eq!(e.mul(&e).unwrap(), AlgebraElement::zero(a));
    }

    #[test]
    fn square_mod_e3() {
        // (1 + 2e + 3e^2)^2 = 1 + 4e + (4 + 6)e^2 + O(e^3)
        let a = Arc::new(WeilAlgebra::jets(2).unwrap());
        let x = AlgebraElement::new(a.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x.mul(&x).unwrap().coeffs(), &[1.0, 4.0, 10.0]);
        assert_eq!(x.mul(&AlgebraElement::one(a)).unwrap(), x);
    }

    #[test]
    fn nilpotent_powers() {
        let a = Arc::new(WeilAlgebra::jets(2).unwrap());
        let e = AlgebraElement::basis(a.clone(), 1);
        assert_eq!(e.nilpotent_power(3).unwrap(), AlgebraElement::zero(a.clone()));
        assert_eq!(e.nilpotent_power(0).unwrap(), AlgebraElement::one(a.clone()));
        let n = AlgebraElement::new(a.clone(), vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(n.nilpotent_power(2).unwrap().coeffs(), &[0.0, 0.0, 1.0]);
        let u = AlgebraElement::one(a);
        assert!(matches!(u.nilpotent_power(2), Err(Error::NotNilpotent { .. })));
    }

    #[test]
    fn tensor_products() {
        let a = WeilAlgebra::from_strs(&["e"], &["e^2"]).unwrap();
        let b = WeilAlgebra::from_strs(&["h"], &["h^2"]).unwrap();
        let t = a.tensor(&b).unwrap();
        assert_eq!(names(&t), ["1", "e", "h", "e*h"]);
        assert_eq!(t.order(), 2);

        assert_eq!(a.tensor(&WeilAlgebra::real()).unwrap(), a);

        let c = WeilAlgebra::jets(2).unwrap();
        assert_eq!(c.tensor(&b).unwrap().dim(), 6);

        // colliding names are renamed
        let s = a.tensor(&a).unwrap();
        assert_eq!(s.generators(), ["e", "e_2"]);
        assert_eq!(s.dim(), 4);
    }

    #[test]
    fn mismatched_algebras() {
        let a = Arc::new(WeilAlgebra::jets(1).unwrap());
        let b = Arc::new(WeilAlgebra::jets(2).unwrap());
        let x = AlgebraElement::one(a);
        let y = AlgebraElement::one(b);
        assert_eq!(x.mul(&y), Err(Error::AlgebraMismatch));
        assert_eq!(x.add(&y), Err(Error::AlgebraMismatch));
    }

    #[test]
    fn truncated_model_algebra() {
        let names = ["x".to_string(), "y".to_string()];
        let a = WeilAlgebra::truncated(&names, 2).unwrap();
        assert_eq!(super::tests::names(&a), ["1", "x", "y", "x^2", "x*y", "y^2"]);
    }

    #[test]
    fn monomial_names_round_trip() {
        let a = WeilAlgebra::from_strs(&["e1", "e2"], &["e1^3", "e2^2"]).unwrap();
        for i in 0..a.dim() {
            assert_eq!(a.index_of_name(&a.basis_name(i)), Some(i));
        }
    }
}
