use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{Expr, Primitive};
use crate::error::{Error, Result};
use crate::math::PI;

/// Maximum tree depth accepted by [`parse`].
pub const MAX_DEPTH: usize = 256;

const ATOM: &[&str] = &["number", "identifier", "("];

/// Parses an expression; errors carry the byte offset of the offending token.
pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, nesting: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(vec!["+", "-", "*", "/", "^", "end of input"]));
    }
    if e.depth() > MAX_DEPTH {
        return Err(Error::Syntax { position: 0, expected: vec!["expression of depth <= 256"] });
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nesting: usize,
}

impl Parser<'_> {
    fn error(&self, expected: Vec<&'static str>) -> Error {
        Error::Syntax { position: self.pos, expected }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.nesting += 1;
        if self.nesting > MAX_DEPTH {
            return Err(self.error(vec!["expression of depth <= 256"]));
        }
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                break;
            }
        }
        self.nesting -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        let negate = self.eat(b'-');
        let mut e = self.atom()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            e = Expr::Pow(Box::new(e), n);
        }
        Ok(if negate { Expr::Neg(Box::new(e)) } else { e })
    }

    fn integer(&mut self) -> Result<i32> {
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(vec!["integer exponent"]));
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let n: i32 = digits.parse().map_err(|_| Error::Syntax {
            position: start,
            expected: vec!["integer exponent"],
        })?;
        Ok(if neg { -n } else { n })
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error(vec![")"]));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.error(ATOM.to_vec())),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            return Err(Error::Syntax { position: start, expected: vec!["number"] });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2e` followed by something else: leave the `e` to the caller
                self.pos = save;
            }
        }
        let text = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Syntax { position: start, expected: vec!["number"] })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if self.peek() == Some(b'(') {
            let Some(prim) = Primitive::from_name(name) else {
                return Err(Error::UnknownFunction { name: name.to_string(), position: start });
            };
            self.pos += 1;
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error(vec![")"]));
            }
            return Ok(Expr::Call(prim, Box::new(arg)));
        }
        if Primitive::from_name(name).is_some() {
            return Err(self.error(vec!["("]));
        }
        if name == "pi" {
            return Ok(Expr::Const(PI));
        }
        Ok(Expr::Var(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn var(n: &str) -> Box<Expr> {
        Box::new(Expr::var(n))
    }

    fn c(x: f64) -> Box<Expr> {
        Box::new(Expr::Const(x))
    }

    #[test]
    fn single_productions() {
        assert_eq!(parse("x^2").unwrap(), Expr::Pow(var("x"), 2));
        assert_eq!(parse("y + x").unwrap(), Expr::Add(var("y"), var("x")));
        assert_eq!(
            parse("sin(2*t)/3").unwrap(),
            Expr::Div(Box::new(Expr::Call(Primitive::Sin, Box::new(Expr::Mul(c(2.0), var("t"))))), c(3.0))
        );
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(parse("-x^2").unwrap(), Expr::Neg(Box::new(Expr::Pow(var("x"), 2))));
        assert_eq!(parse("a - -b").unwrap(), Expr::Sub(var("a"), Box::new(Expr::Neg(var("b")))));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e-3").unwrap(), Expr::Const(1.5e-3));
        assert_eq!(parse(".25").unwrap(), Expr::Const(0.25));
        assert_eq!(parse("2E2").unwrap(), Expr::Const(200.0));
        assert_eq!(parse("pi").unwrap(), Expr::Const(PI));
        assert_eq!(parse("x^-2").unwrap(), Expr::Pow(var("x"), -2));
    }

    #[test]
    fn errors_carry_positions() {
        match parse("x + * y") {
            Err(Error::Syntax { position, expected }) => {
                assert_eq!(position, 4);
                assert!(expected.contains(&"identifier"));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            parse("foo(x)"),
            Err(Error::UnknownFunction { name: "foo".into(), position: 0 })
        );
        assert!(matches!(parse("(x + 1"), Err(Error::Syntax { position: 6, .. })));
        assert!(matches!(parse("x^y"), Err(Error::Syntax { position: 2, .. })));
        assert!(matches!(parse("sin + 1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("sin(x, y)"), Err(Error::Syntax { position: 5, .. })));
        assert!(matches!(parse("x y"), Err(Error::Syntax { position: 2, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { position: 0, .. })));
    }

    #[test]
    fn depth_guard() {
        let deep = format!("{}x{}", "(".repeat(300), ")".repeat(300));
        assert!(parse(&deep).is_err());
        let ok = format!("{}x{}", "(".repeat(100), ")".repeat(100));
        assert_eq!(parse(&ok).unwrap(), Expr::var("x"));
        let long = (0..300).map(|_| "x").collect::<Vec<_>>().join(" + ");
        assert!(parse(&long).is_err());
    }
}
