//! A small language of smooth scalar functions.
//!
//! Expressions are parsed from text (see [`parse`]) or built with the
//! arithmetic operators on [`Expr`]. They evaluate over `f64` with
//! [`eval_real`] and over any Weil algebra with [`eval_jet`], which applies
//! every primitive through its truncated Taylor series.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := "-"? atom ("^" "-"? INT)?
//! atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//! ```
//!
//! Identifiers followed by `(` must name a primitive; `pi` is a constant and
//! every other identifier is a variable.

mod eval;
mod parse;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use core::fmt;
use core::ops;
use core::str::FromStr;

pub use eval::{
    eval_jet, eval_real, partial_derivatives, Bindings, Env, Partials, PartialsEngine,
    MAX_PARTIAL_ORDER,
};
pub use parse::{parse, MAX_DEPTH};

pub(crate) use eval::{eval_jet_with, JetEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
    /// `exp(-1/x)` for `x > 0` and `0` otherwise; smooth and flat at 0.
    Flat,
}

impl Primitive {
    pub const ALL: [Primitive; 7] = [
        Primitive::Sin,
        Primitive::Cos,
        Primitive::Exp,
        Primitive::Log,
        Primitive::Sqrt,
        Primitive::Atan,
        Primitive::Flat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Sin => "sin",
            Primitive::Cos => "cos",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Sqrt => "sqrt",
            Primitive::Atan => "atan",
            Primitive::Flat => "flat",
        }
    }

    pub fn from_name(name: &str) -> Option<Primitive> {
        Primitive::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Primitive, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn powi(self, n: i32) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    pub fn call(p: Primitive, arg: Expr) -> Expr {
        Expr::Call(p, Box::new(arg))
    }

    pub fn sin(self) -> Expr {
        Expr::call(Primitive::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::call(Primitive::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::call(Primitive::Exp, self)
    }

    pub fn flat(self) -> Expr {
        Expr::call(Primitive::Flat, self)
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.depth().max(b.depth())
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.depth(),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
        }
    }

    /// Replaces every variable found in `map`; other variables are kept.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(map));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| Expr::Var(v.clone())),
            Expr::Add(a, b) => Expr::Add(sub(a), sub(b)),
            Expr::Sub(a, b) => Expr::Sub(sub(a), sub(b)),
            Expr::Mul(a, b) => Expr::Mul(sub(a), sub(b)),
            Expr::Div(a, b) => Expr::Div(sub(a), sub(b)),
            Expr::Neg(a) => Expr::Neg(sub(a)),
            Expr::Pow(a, n) => Expr::Pow(sub(a), *n),
            Expr::Call(p, a) => Expr::Call(*p, sub(a)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if c.is_sign_negative() || !c.is_finite() => 3,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

/// A child printed in a position that needs at least precedence `.1`.
/// Negations are also wrapped when they are a right operand.
struct Operand<'a>(&'a Expr, u8, bool);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.0.precedence();
        if p < self.1 || (self.2 && p == 3) {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.is_nan() {
        f.write_str("(0/0)")
    } else if c.is_infinite() {
        f.write_str(if c > 0.0 { "(1/0)" } else { "(-1/0)" })
    } else if c.is_sign_negative() {
        write!(f, "-{}", -c)
    } else {
        write!(f, "{c}")
    }
}

// Prints with the minimal parentheses needed for `parse` to rebuild the same
// tree (negative constants come back as `Neg(Const)`).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(v) => f.write_str(v),
            Expr::Add(a, b) => write!(f, "{} + {}", Operand(a, 1, false), Operand(b, 2, true)),
            Expr::Sub(a, b) => write!(f, "{} - {}", Operand(a, 1, false), Operand(b, 2, true)),
            Expr::Mul(a, b) => write!(f, "{}*{}", Operand(a, 2, false), Operand(b, 4, true)),
            Expr::Div(a, b) => write!(f, "{}/{}", Operand(a, 2, false), Operand(b, 4, true)),
            Expr::Neg(a) => write!(f, "-{}", Operand(a, 4, false)),
            Expr::Pow(a, n) => write!(f, "{}^{n}", Operand(a, 5, false)),
            Expr::Call(p, a) => write!(f, "{}({a})", p.name()),
        }
    }
}

impl FromStr for Expr {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::Const(c)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn display_is_minimal() {
        let cases = [
            ("x^2", "x^2"),
            ("y + x", "y + x"),
            ("sin(2*t)/3", "sin(2*t)/3"),
            ("(a + b)*c", "(a + b)*c"),
            ("a - (b - c)", "a - (b - c)"),
            ("-x^2", "-x^2"),
            ("(-x)^2", "(-x)^2"),
            ("a*(-b)", "a*(-b)"),
            ("x^-1", "x^-1"),
        ];
        for (src, shown) in cases {
            assert_eq!(parse(src).unwrap().to_string(), shown, "{src}");
        }
    }

    #[test]
    fn substitution() {
        let e = parse("x*y + x").unwrap();
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), parse("t + 1").unwrap());
        assert_eq!(e.substitute(&map).to_string(), "(t + 1)*y + (t + 1)");
        let vars: Vec<_> = e.variables().into_iter().collect();
        assert_eq!(vars, ["x", "y"]);
    }

    #[test]
    fn builders() {
        let e = 2.0 * Expr::var("x").powi(2) - Expr::var("y").sin();
        assert_eq!(e.to_string(), "2*x^2 - sin(y)");
    }

    pub(crate) fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u32..50).prop_map(|n| Expr::Const(n as f64 / 4.0)),
            prop::sample::select(&["x", "y", "z"][..]).prop_map(Expr::var),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a / b),
                inner.clone().prop_map(|a| -a),
                (inner.clone(), -3i32..4).prop_map(|(a, n)| a.powi(n)),
                (inner, prop::sample::select(&Primitive::ALL[..]))
                    .prop_map(|(a, p)| Expr::call(p, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(e in arb_expr()) {
            let shown = format!("{e}");
            let back = parse(&shown).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
