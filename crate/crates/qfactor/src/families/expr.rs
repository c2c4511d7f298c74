//! Expression strings used by family-definition files.
//!
//! Grammar (complex arithmetic throughout):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names are `s`, `n`, `q`, `pi`, `i`, `inf` and the family parameters.
//! Functions: `qpoch(a, n)` (n may be `inf` or non-integer), `sqrt`, `exp`,
//! `sin`, `cos`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::qcore::{qpoch_inf, qpoch_n, qpoch_s};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    QPoch,
    Sqrt,
    Exp,
    Sin,
    Cos,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "qpoch" => (Func::QPoch, 2),
            "sqrt" => (Func::Sqrt, 1),
            "exp" => (Func::Exp, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(C64),
    Inf,
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variable bindings for evaluation.
pub struct Env<'a> {
    pub q: f64,
    pub s: C64,
    pub n: f64,
    pub params: &'a BTreeMap<String, f64>,
    /// extra complex bindings, looked up before the parameters
    pub extra: &'a [(&'a str, C64)],
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Free variable names used by the expression.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Var(v) => out.push(v.clone()),
            Expr::Neg(a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Expr::Num(_) | Expr::Inf => {}
        }
    }

    /// Check that every name resolves against `params` plus the built-ins.
    pub fn check_names(&self, params: &BTreeMap<String, f64>) -> Result<()> {
        for v in self.variables() {
            if !matches!(v.as_str(), "s" | "n" | "q" | "pi" | "i") && !params.contains_key(&v) {
                return Err(Error::FamilyDefinition(format!("unknown name '{v}' in expression")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, env: &Env) -> Result<C64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Inf => return Err(Error::Domain("'inf' is only allowed as the length of qpoch".into())),
            Expr::Var(name) => match name.as_str() {
                "s" => env.s,
                "n" => C64::new(env.n, 0.0),
                "q" => C64::new(env.q, 0.0),
                "pi" => C64::new(std::f64::consts::PI, 0.0),
                "i" => C64::new(0.0, 1.0),
                other => match env.extra.iter().find(|(k, _)| *k == other) {
                    Some((_, v)) => *v,
                    None => match env.params.get(other) {
                        Some(v) => C64::new(*v, 0.0),
                        None => return Err(Error::FamilyDefinition(format!("unknown name '{other}'"))),
                    },
                },
            },
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Expr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Expr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Expr::Div(a, b) => a.eval(env)? / b.eval(env)?,
            Expr::Pow(a, b) => power(a.eval(env)?, b.eval(env)?),
            Expr::Call(f, args) => match f {
                Func::Sqrt => args[0].eval(env)?.sqrt(),
                Func::Exp => args[0].eval(env)?.exp(),
                Func::Sin => args[0].eval(env)?.sin(),
                Func::Cos => args[0].eval(env)?.cos(),
                Func::QPoch => {
                    let a = args[0].eval(env)?;
                    if env.q >= 1.0 && args[1] == Expr::Inf {
                        return Err(Error::Domain("qpoch(a, inf) needs q < 1".into()));
                    }
                    match &args[1] {
                        Expr::Inf => qpoch_inf(a, env.q),
                        len => {
                            let n = len.eval(env)?;
                            let r = n.re.round();
                            if n.im == 0.0 && (n.re - r).abs() < 1e-12 && r >= 0.0 {
                                qpoch_n(a, env.q, r as usize)
                            } else {
                                qpoch_s(a, env.q, n)
                            }
                        }
                    }
                }
            },
        })
    }
}

/// Integer exponents use repeated multiplication so that negative bases
/// behave; everything else takes the principal branch.
fn power(base: C64, exp: C64) -> C64 {
    if exp.im == 0.0 && exp.re.fract() == 0.0 && exp.re.abs() < 1e6 {
        return base.powi(exp.re as i32);
    }
    if base.im == 0.0 && base.re > 0.0 {
        return (exp * base.re.ln()).exp();
    }
    base.powc(exp)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.im == 0.0 => write!(f, "{}", v.re),
            Expr::Num(v) => write!(f, "({}+{}*i)", v.re, v.im),
            Expr::Inf => write!(f, "inf"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(func, args) => {
                let name = match func {
                    Func::QPoch => "qpoch",
                    Func::Sqrt => "sqrt",
                    Func::Exp => "exp",
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                };
                let parts: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "{name}({})", parts.join(","))
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
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
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            // right associative; the exponent may carry its own sign
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default().to_string();
                if self.peek() == Some(b'(') {
                    let at = start;
                    let (func, arity) = Func::lookup(&name)
                        .ok_or(Error::Parse { pos: at, msg: format!("unknown function '{name}'") })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.eat(b',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(b')') {
                        return Err(self.err("expected ')' after arguments"));
                    }
                    if args.len() != arity {
                        return Err(Error::Parse {
                            pos: at,
                            msg: format!("{name} takes {arity} argument(s), got {}", args.len()),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                if name == "inf" {
                    return Ok(Expr::Inf);
                }
                Ok(Expr::Var(name))
            }
            Some(c) => Err(self.err(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>()
            .map(|v| Expr::Num(C64::new(v, 0.0)))
            .map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{text}'") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, s: f64) -> C64 {
        let params: BTreeMap<String, f64> = [("a".to_string(), 0.3)].into();
        let env = Env { q: 0.5, s: C64::new(s, 0.0), n: 2.0, params: &params, extra: &[] };
        Expr::parse(src).unwrap().eval(&env).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1+2*3", 0.0).re, 7.0);
        assert_eq!(eval("2^3^2", 0.0).re, 512.0);
        assert_eq!(eval("-2^2", 0.0).re, -4.0);
        assert_eq!(eval("(1-2)-3", 0.0).re, -4.0);
        assert_eq!(eval("8/2/2", 0.0).re, 2.0);
        assert!((eval("q^-n", 0.0).re - 4.0).abs() < 1e-15);
    }

    #[test]
    fn functions_and_names() {
        assert!((eval("q^(s-1)", 2.0).re - 0.5).abs() < 1e-15);
        assert!((eval("qpoch(0.3, 3)", 0.0).re - 0.550375).abs() < 1e-15);
        assert!((eval("qpoch(a*q, s)", 2.0).re - (1.0 - 0.15) * (1.0 - 0.075)).abs() < 1e-14);
        assert!((eval("sqrt(4)*exp(0)+sin(0)+cos(0)", 0.0).re - 3.0).abs() < 1e-15);
        assert!(eval("qpoch(q, inf)", 0.0).re > 0.28);
        assert!((eval("(-1)^n", 0.0).re - 1.0).abs() < 1e-15);
        assert!((eval("i*i", 0.0).re + 1.0).abs() < 1e-15);
        assert_eq!(eval("1.5e-1*2", 0.0).re, 0.3);
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(Expr::parse("1+"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("foo(1)"), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!(Expr::parse("sqrt(1,2)"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("(1"), Err(Error::Parse { .. })));
        let e = Expr::parse("b+1").unwrap();
        assert!(e.check_names(&BTreeMap::new()).is_err());
    }

    #[test]
    fn display_reparses_to_same_value() {
        for src in ["q^(s-1)*qpoch(-q^s, inf)", "-a/(1+s)^2", "sqrt(s)*cos(pi*s)"] {
            let e = Expr::parse(src).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            assert_eq!(e, again);
        }
    }
}
