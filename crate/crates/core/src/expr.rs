//! Whitelisted arithmetic expressions used in spec files.
//!
//! Supports numbers (integers and decimals, both parsed exactly), integer
//! variables (`k`, `m`, `k_m`), `+ - * / ^`, parentheses and the functions
//! `log`/`ln`, `sqrt`, `floor`, `exp`. Expressions are kept as syntax trees
//! and evaluated on demand, exactly when no transcendental function is hit.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error in `{src}` at byte {pos}: {msg}")]
    Parse { src: String, pos: usize, msg: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid argument to `{0}`")]
    Domain(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(BigRational),
    Var(String),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Log,
    Sqrt,
    Floor,
    Exp,
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src, bytes: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr { src: src.trim().to_string(), root })
    }

    pub fn constant(q: BigRational) -> Self {
        let src = if q.is_integer() {
            q.numer().to_string()
        } else {
            format!("{}/{}", q.numer(), q.denom())
        };
        Expr { src, root: Node::Num(q) }
    }

    pub fn from_int(v: i64) -> Self {
        Expr::constant(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Variables referenced by the expression, sorted and deduplicated.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_vars(&self.root, &mut out);
        out.sort();
        out.dedup();
        out
    }

    pub fn is_constant(&self) -> bool {
        self.variables().is_empty()
    }

    pub fn eval(&self, env: &[(&str, i64)]) -> Result<Scalar, ExprError> {
        eval_exact(&self.root, env)
    }

    pub fn eval_f64(&self, env: &[(&str, i64)]) -> Result<f64, ExprError> {
        eval_float(&self.root, env)
    }

    /// Limit as `var -> +inf`, when the expression is a rational function of
    /// `var` (no other free variables, no transcendental calls).
    pub fn limit_at_infinity(&self, var: &str) -> Option<Limit> {
        let rf = to_ratfunc(&self.root, var, &[])?;
        Some(rf.limit())
    }

    /// The expression as a rational function of `var`, with other variables
    /// replaced by the given rational functions of `var`.
    pub fn rational_function(&self, var: &str, subs: &[(&str, &RatFunc)]) -> Option<RatFunc> {
        to_ratfunc(&self.root, var, subs)
    }
}

/// Behaviour of a rational function at infinity.
#[derive(Clone, Debug, PartialEq)]
pub enum Limit {
    Finite(BigRational),
    PosInfinite,
    NegInfinite,
}

fn collect_vars(n: &Node, out: &mut Vec<String>) {
    match n {
        Node::Num(_) => {}
        Node::Var(v) => out.push(v.clone()),
        Node::Neg(a) | Node::Call(_, a) => collect_vars(a, out),
        Node::Bin(_, a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
    }
}

fn lookup(env: &[(&str, i64)], name: &str) -> Result<i64, ExprError> {
    env.iter()
        .find(|(k, _)| *k == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| ExprError::Unbound(name.to_string()))
}

fn eval_exact(n: &Node, env: &[(&str, i64)]) -> Result<Scalar, ExprError> {
    Ok(match n {
        Node::Num(q) => Scalar::Exact(q.clone()),
        Node::Var(v) => Scalar::int(lookup(env, v)?),
        Node::Neg(a) => eval_exact(a, env)?.neg(),
        Node::Bin(op, a, b) => {
            let x = eval_exact(a, env)?;
            let y = eval_exact(b, env)?;
            match op {
                Op::Add => x.add(&y),
                Op::Sub => x.sub(&y),
                Op::Mul => x.mul(&y),
                Op::Div => x.div(&y).ok_or(ExprError::DivisionByZero)?,
                Op::Pow => match y.as_integer().and_then(|e| e.to_i64()) {
                    Some(e) if x.is_exact() && e.abs() <= 100_000 => {
                        x.powi(e).ok_or(ExprError::DivisionByZero)?
                    }
                    _ => {
                        let base = x.to_f64();
                        if base < 0.0 {
                            return Err(ExprError::Domain("^".into()));
                        }
                        Scalar::Real(base.powf(y.to_f64()))
                    }
                },
            }
        }
        Node::Call(f, a) => {
            let x = eval_exact(a, env)?;
            match f {
                Func::Log => {
                    if !x.is_positive() {
                        return Err(ExprError::Domain("log".into()));
                    }
                    if x == Scalar::one() {
                        Scalar::zero()
                    } else {
                        Scalar::Real(x.ln())
                    }
                }
                Func::Exp => {
                    if x == Scalar::zero() {
                        Scalar::one()
                    } else {
                        Scalar::Real(x.to_f64().exp())
                    }
                }
                Func::Sqrt => match &x {
                    Scalar::Exact(q) if !q.is_negative() => match exact_sqrt(q) {
                        Some(r) => Scalar::Exact(r),
                        None => Scalar::Real(x.to_f64().sqrt()),
                    },
                    _ => {
                        let v = x.to_f64();
                        if v < 0.0 {
                            return Err(ExprError::Domain("sqrt".into()));
                        }
                        Scalar::Real(v.sqrt())
                    }
                },
                Func::Floor => match &x {
                    Scalar::Exact(q) => Scalar::Exact(BigRational::from_integer(q.floor().to_integer())),
                    Scalar::Real(v) if v.is_finite() && v.abs() < 9.0e15 => Scalar::int(v.floor() as i64),
                    Scalar::Real(v) => Scalar::Real(v.floor()),
                },
            }
        }
    })
}

fn eval_float(n: &Node, env: &[(&str, i64)]) -> Result<f64, ExprError> {
    Ok(match n {
        Node::Num(q) => crate::scalar::rational_to_f64(q),
        Node::Var(v) => lookup(env, v)? as f64,
        Node::Neg(a) => -eval_float(a, env)?,
        Node::Bin(op, a, b) => {
            let x = eval_float(a, env)?;
            let y = eval_float(b, env)?;
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => {
                    if y == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    x / y
                }
                Op::Pow => {
                    if y.fract() == 0.0 && y.abs() < 1e6 {
                        x.powi(y as i32)
                    } else {
                        x.powf(y)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let x = eval_float(a, env)?;
            match f {
                Func::Log => {
                    if x <= 0.0 {
                        return Err(ExprError::Domain("log".into()));
                    }
                    x.ln()
                }
                Func::Exp => x.exp(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(ExprError::Domain("sqrt".into()));
                    }
                    // exact integer square roots stay exact through floor()
                    let r = x.sqrt();
                    let ri = r.round();
                    if ri * ri == x {
                        ri
                    } else {
                        r
                    }
                }
                Func::Floor => x.floor(),
            }
        }
    })
}

fn exact_sqrt(q: &BigRational) -> Option<BigRational> {
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

/// Polynomial with ascending rational coefficients.
#[derive(Clone, Debug)]
struct Poly(Vec<BigRational>);

impl Poly {
    fn trim(mut self) -> Self {
        while self.0.len() > 1 && self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(BigRational::zero());
        }
        self
    }
    fn constant(q: BigRational) -> Self {
        Poly(vec![q])
    }
    fn var() -> Self {
        Poly(vec![BigRational::zero(), BigRational::one()])
    }
    fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }
    fn degree(&self) -> usize {
        self.0.len() - 1
    }
    fn lead(&self) -> &BigRational {
        self.0.last().expect("non-empty polynomial")
    }
    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let mut v = vec![BigRational::zero(); n];
        for (i, c) in self.0.iter().enumerate() {
            v[i] += c;
        }
        for (i, c) in o.0.iter().enumerate() {
            v[i] += c;
        }
        Poly(v).trim()
    }
    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }
    fn mul(&self, o: &Poly) -> Poly {
        let mut v = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly(v).trim()
    }
}

/// Quotient of two polynomials in one variable.
#[derive(Clone, Debug)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

impl RatFunc {
    pub fn var() -> Self {
        RatFunc { num: Poly::var(), den: Poly::constant(BigRational::one()) }
    }

    pub fn sub(&self, o: &RatFunc) -> RatFunc {
        self.add(&RatFunc { num: o.num.neg(), den: o.den.clone() })
    }

    pub fn div(&self, o: &RatFunc) -> Option<RatFunc> {
        Some(self.mul(&o.recip()?))
    }

    pub fn add(&self, o: &RatFunc) -> RatFunc {
        RatFunc {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
    }
    pub fn mul(&self, o: &RatFunc) -> RatFunc {
        RatFunc { num: self.num.mul(&o.num), den: self.den.mul(&o.den) }
    }
    fn recip(&self) -> Option<RatFunc> {
        if self.num.is_zero() {
            None
        } else {
            Some(RatFunc { num: self.den.clone(), den: self.num.clone() })
        }
    }
    pub fn limit(&self) -> Limit {
        let (dn, dd) = (self.num.degree(), self.den.degree());
        if self.num.is_zero() || dn < dd {
            return Limit::Finite(BigRational::zero());
        }
        let ratio = self.num.lead() / self.den.lead();
        if dn == dd {
            Limit::Finite(ratio)
        } else if ratio.is_positive() {
            Limit::PosInfinite
        } else {
            Limit::NegInfinite
        }
    }
}

fn to_ratfunc(n: &Node, var: &str, subs: &[(&str, &RatFunc)]) -> Option<RatFunc> {
    let one = || Poly::constant(BigRational::one());
    Some(match n {
        Node::Num(q) => RatFunc { num: Poly::constant(q.clone()), den: one() },
        Node::Var(v) if v == var => RatFunc { num: Poly::var(), den: one() },
        Node::Var(v) => return subs.iter().find(|(name, _)| name == v).map(|(_, rf)| (*rf).clone()),
        Node::Neg(a) => {
            let r = to_ratfunc(a, var, subs)?;
            RatFunc { num: r.num.neg(), den: r.den }
        }
        Node::Bin(op, a, b) => {
            let x = to_ratfunc(a, var, subs)?;
            match op {
                Op::Add => x.add(&to_ratfunc(b, var, subs)?),
                Op::Sub => {
                    let y = to_ratfunc(b, var, subs)?;
                    x.add(&RatFunc { num: y.num.neg(), den: y.den })
                }
                Op::Mul => x.mul(&to_ratfunc(b, var, subs)?),
                Op::Div => x.mul(&to_ratfunc(b, var, subs)?.recip()?),
                Op::Pow => {
                    let Node::Num(e) = b.as_ref() else { return None };
                    if !e.is_integer() {
                        return None;
                    }
                    let e = e.to_integer().to_i64()?;
                    if e.abs() > 64 {
                        return None;
                    }
                    let mut acc = RatFunc { num: one(), den: one() };
                    for _ in 0..e.unsigned_abs() {
                        acc = acc.mul(&x);
                    }
                    if e < 0 {
                        acc.recip()?
                    } else {
                        acc
                    }
                }
            }
        }
        Node::Call(..) => return None,
    })
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Parse { src: self.src.to_string(), pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'+' => Op::Add,
                b'-' => Op::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'*' => Op::Mul,
                b'/' => Op::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if self.peek() == Some(b'(') {
                    let func = match name {
                        "log" | "ln" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "floor" => Func::Floor,
                        "exp" => Func::Exp,
                        _ => {
                            self.pos = start;
                            return Err(self.err(&format!("unknown function `{name}`")));
                        }
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected `)`"));
                    }
                    self.pos += 1;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match name {
                    "k" | "m" | "k_m" | "t_m" => Ok(Node::Var(name.to_string())),
                    _ => {
                        self.pos = start;
                        Err(self.err(&format!("unknown variable `{name}`")))
                    }
                }
            }
            _ => Err(self.err("expected a number, variable or `(`")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        let (int_part, frac_part) = match text.split_once('.') {
            Some((a, b)) => (a, b),
            None => (text, ""),
        };
        if frac_part.contains('.') || (int_part.is_empty() && frac_part.is_empty()) {
            self.pos = start;
            return Err(self.err("malformed number"));
        }
        let digits = format!("{int_part}{frac_part}");
        let num: BigInt = digits.parse().map_err(|_| self.err("malformed number"))?;
        let den = num_traits::pow(BigInt::from(10), frac_part.len());
        Ok(Node::Num(BigRational::new(num, den)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Scalar {
        Scalar::ratio(n, d)
    }

    #[test]
    fn affine_rational_in_m_is_exact() {
        let e = Expr::parse("1/3 - 1/(6*m)").unwrap();
        assert_eq!(e.eval(&[("m", 1)]).unwrap(), q(1, 6));
        assert_eq!(e.eval(&[("m", 10)]).unwrap(), q(19, 60));
        assert_eq!(e.limit_at_infinity("m"), Some(Limit::Finite(BigRational::new(1.into(), 3.into()))));
    }

    #[test]
    fn rational_in_k_has_limit_one_half() {
        let e = Expr::parse("(k+1)/(2*(k+2))").unwrap();
        assert_eq!(e.eval(&[("k", 1)]).unwrap(), q(1, 3));
        assert_eq!(e.limit_at_infinity("k"), Some(Limit::Finite(BigRational::new(1.into(), 2.into()))));
    }

    #[test]
    fn polynomial_schedule_and_variables() {
        let e = Expr::parse("m^3").unwrap();
        assert_eq!(e.eval(&[("m", 4)]).unwrap(), Scalar::int(64));
        assert_eq!(e.limit_at_infinity("m"), Some(Limit::PosInfinite));
        let t = Expr::parse("k_m + m").unwrap();
        assert_eq!(t.variables(), vec!["k_m".to_string(), "m".to_string()]);
        assert_eq!(t.eval(&[("m", 2), ("k_m", 8)]).unwrap(), Scalar::int(10));
    }

    #[test]
    fn transcendental_values_are_real() {
        let e = Expr::parse("3^(-log(3)/log(2))").unwrap();
        let v = e.eval(&[]).unwrap();
        assert!(!v.is_exact());
        let expected = 3f64.powf(-(3f64.ln() / 2f64.ln()));
        assert!((v.to_f64() - expected).abs() < 1e-15);
        assert_eq!(e.limit_at_infinity("k"), None);
    }

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(Expr::parse("0.25").unwrap().eval(&[]).unwrap(), q(1, 4));
        assert_eq!(Expr::parse("floor(sqrt(k))").unwrap().eval(&[("k", 10)]).unwrap(), Scalar::int(3));
        assert_eq!(Expr::parse("floor(sqrt(k))").unwrap().eval_f64(&[("k", 16)]).unwrap(), 4.0);
    }

    #[test]
    fn rejects_unknown_names_and_garbage() {
        assert!(Expr::parse("x + 1").is_err());
        assert!(Expr::parse("sin(k)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(matches!(Expr::parse("1/(m-1)").unwrap().eval(&[("m", 1)]), Err(ExprError::DivisionByZero)));
    }
}
