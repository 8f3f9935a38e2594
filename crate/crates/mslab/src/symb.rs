//! A minimal holomorphic expression language for symbols, maps, and test
//! functions: parsing, evaluation, exact symbolic differentiation, and a
//! registry of statically visible poles.
//!
//! The grammar is deliberately small: numbers with an optional trailing
//! `i`, the variable `z`, `exp` and `log` (principal branch), the operators
//! `+ - * / ^` with integer exponents, and parentheses. Expressions are
//! immutable and cheap to clone, so they can be evaluated concurrently.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{MslabError, Result};

#[derive(Debug, PartialEq)]
enum Node {
    Const(Complex64),
    Z,
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Exp(Expr),
    Log(Expr),
}

/// Immutable expression tree over one complex variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Expr {
    fn wrap(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn constant(c: Complex64) -> Expr {
        Expr::wrap(Node::Const(c))
    }

    pub fn real(x: f64) -> Expr {
        Expr::constant(cx(x, 0.0))
    }

    pub fn z() -> Expr {
        Expr::wrap(Node::Z)
    }

    pub fn as_constant(&self) -> Option<Complex64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(cx(0.0, 0.0))
    }

    fn is_one(&self) -> bool {
        self.as_constant() == Some(cx(1.0, 0.0))
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            let s = a + b;
            if s.is_finite() {
                return Expr::constant(s);
            }
        }
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        Expr::wrap(Node::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            let s = a - b;
            if s.is_finite() {
                return Expr::constant(s);
            }
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return Expr::real(-1.0).mul(other);
        }
        Expr::wrap(Node::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_constant(), other.as_constant()) {
            let p = a * b;
            if p.is_finite() {
                return Expr::constant(p);
            }
        }
        if self.is_zero() || other.is_zero() {
            return Expr::real(0.0);
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        Expr::wrap(Node::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return Expr::real(0.0);
        }
        if other.is_one() {
            return self.clone();
        }
        if let Some(b) = other.as_constant() {
            if b != cx(0.0, 0.0) {
                let inv = 1.0 / b;
                if inv.is_finite() {
                    return Expr::constant(inv).mul(self);
                }
            }
        }
        Expr::wrap(Node::Div(self.clone(), other.clone()))
    }

    pub fn pow(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::real(1.0);
        }
        if n == 1 {
            return self.clone();
        }
        if let Some(b) = self.as_constant() {
            let p = b.powi(n);
            if p.is_finite() {
                return Expr::constant(p);
            }
        }
        Expr::wrap(Node::Pow(self.clone(), n))
    }

    pub fn exp(&self) -> Expr {
        if let Some(c) = self.as_constant() {
            let v = c.exp();
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::wrap(Node::Exp(self.clone()))
    }

    pub fn log(&self) -> Expr {
        if let Some(c) = self.as_constant() {
            let v = c.ln();
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::wrap(Node::Log(self.clone()))
    }

    /// Value at `z`. Hitting a zero denominator or a zero base of a
    /// negative power reports `PoleHit`; any other non-finite intermediate
    /// reports `NonFinite`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let v = match &*self.0 {
            Node::Const(c) => *c,
            Node::Z => z,
            Node::Add(a, b) => a.eval(z)? + b.eval(z)?,
            Node::Sub(a, b) => a.eval(z)? - b.eval(z)?,
            Node::Mul(a, b) => a.eval(z)? * b.eval(z)?,
            Node::Div(a, b) => {
                let den = b.eval(z)?;
                if den == cx(0.0, 0.0) {
                    return Err(MslabError::PoleHit { at: z });
                }
                a.eval(z)? / den
            }
            Node::Pow(b, n) => {
                let base = b.eval(z)?;
                if *n < 0 && base == cx(0.0, 0.0) {
                    return Err(MslabError::PoleHit { at: z });
                }
                base.powi(*n)
            }
            Node::Exp(a) => a.eval(z)?.exp(),
            Node::Log(a) => a.eval(z)?.ln(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(MslabError::NonFinite { at: z })
        }
    }

    /// Exact derivative as a new expression.
    pub fn derivative(&self) -> Expr {
        match &*self.0 {
            Node::Const(_) => Expr::real(0.0),
            Node::Z => Expr::real(1.0),
            Node::Add(a, b) => a.derivative().add(&b.derivative()),
            Node::Sub(a, b) => a.derivative().sub(&b.derivative()),
            Node::Mul(a, b) => {
                let left = a.derivative().mul(b);
                let right = a.mul(&b.derivative());
                left.add(&right)
            }
            Node::Div(a, b) => {
                let num = a.derivative().mul(b).sub(&a.mul(&b.derivative()));
                num.div(&b.pow(2))
            }
            Node::Pow(b, n) => {
                let factor = Expr::real(f64::from(*n)).mul(&b.pow(n - 1));
                factor.mul(&b.derivative())
            }
            Node::Exp(a) => a.derivative().mul(&a.exp()),
            Node::Log(a) => a.derivative().div(a),
        }
    }

    /// Statically visible singular points: roots of division denominators
    /// and of negative-power bases, whenever those are polynomials of
    /// degree at most four. Singularities of non-polynomial denominators
    /// are not enumerated here.
    pub fn poles(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        self.collect_poles(&mut out);
        dedup_points(&mut out);
        out
    }

    fn collect_poles(&self, out: &mut Vec<Complex64>) {
        match &*self.0 {
            Node::Const(_) | Node::Z => {}
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.collect_poles(out);
                b.collect_poles(out);
            }
            Node::Div(a, b) => {
                a.collect_poles(out);
                b.collect_poles(out);
                if let Some(coeffs) = b.poly_coeffs() {
                    out.extend(poly_roots(&coeffs));
                }
            }
            Node::Pow(b, n) => {
                b.collect_poles(out);
                if *n < 0 {
                    if let Some(coeffs) = b.poly_coeffs() {
                        out.extend(poly_roots(&coeffs));
                    }
                }
            }
            Node::Exp(a) | Node::Log(a) => a.collect_poles(out),
        }
    }

    /// Coefficients (ascending degree) if this expression is a polynomial
    /// of degree at most four.
    fn poly_coeffs(&self) -> Option<Vec<Complex64>> {
        const MAX_DEG: usize = 4;
        let p = match &*self.0 {
            Node::Const(c) => vec![*c],
            Node::Z => vec![cx(0.0, 0.0), cx(1.0, 0.0)],
            Node::Add(a, b) => poly_add(&a.poly_coeffs()?, &b.poly_coeffs()?, 1.0),
            Node::Sub(a, b) => poly_add(&a.poly_coeffs()?, &b.poly_coeffs()?, -1.0),
            Node::Mul(a, b) => poly_mul(&a.poly_coeffs()?, &b.poly_coeffs()?)?,
            Node::Pow(b, n) => {
                if *n < 0 {
                    return None;
                }
                let base = b.poly_coeffs()?;
                let mut acc = vec![cx(1.0, 0.0)];
                for _ in 0..*n {
                    acc = poly_mul(&acc, &base)?;
                }
                acc
            }
            Node::Div(a, b) => {
                let den = b.poly_coeffs()?;
                if den.len() == 1 && den[0] != cx(0.0, 0.0) {
                    a.poly_coeffs()?.iter().map(|c| c / den[0]).collect()
                } else {
                    return None;
                }
            }
            Node::Exp(_) | Node::Log(_) => return None,
        };
        let p = poly_trim(p);
        if p.len() > MAX_DEG + 1 {
            None
        } else {
            Some(p)
        }
    }

    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser { s: text.as_bytes(), pos: 0 };
        p.skip_ws();
        if p.pos == p.s.len() {
            return Err(MslabError::Syntax { pos: 0, msg: "empty expression".to_string() });
        }
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(MslabError::Syntax {
                pos: p.pos,
                msg: format!("unexpected character '{}'", p.s[p.pos] as char),
            });
        }
        Ok(e)
    }
}

impl FromStr for Expr {
    type Err = MslabError;

    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

fn poly_trim(mut p: Vec<Complex64>) -> Vec<Complex64> {
    while p.len() > 1 && *p.last().unwrap() == cx(0.0, 0.0) {
        p.pop();
    }
    p
}

fn poly_add(a: &[Complex64], b: &[Complex64], sign: f64) -> Vec<Complex64> {
    let mut out = vec![cx(0.0, 0.0); a.len().max(b.len())];
    for (i, &c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in b.iter().enumerate() {
        out[i] += sign * c;
    }
    out
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Option<Vec<Complex64>> {
    let a = poly_trim(a.to_vec());
    let b = poly_trim(b.to_vec());
    if a.len() + b.len() > 12 {
        return None;
    }
    let mut out = vec![cx(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Some(out)
}

fn dedup_points(pts: &mut Vec<Complex64>) {
    let mut kept: Vec<Complex64> = Vec::new();
    for &p in pts.iter() {
        if !kept.iter().any(|k| (k - p).norm() <= 1e-8 * (1.0 + p.norm())) {
            kept.push(p);
        }
    }
    *pts = kept;
}

/// Roots of a polynomial of degree <= 4 (ascending coefficients).
fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let p = poly_trim(coeffs.to_vec());
    let deg = p.len() - 1;
    match deg {
        0 => Vec::new(),
        1 => vec![-p[0] / p[1]],
        2 => {
            let (a, b, c) = (p[2], p[1], p[0]);
            let d = (b * b - 4.0 * a * c).sqrt();
            vec![(-b + d) / (2.0 * a), (-b - d) / (2.0 * a)]
        }
        _ => durand_kerner(&p),
    }
}

fn poly_eval(p: &[Complex64], x: Complex64) -> Complex64 {
    p.iter().rev().fold(cx(0.0, 0.0), |acc, &c| acc * x + c)
}

fn durand_kerner(p: &[Complex64]) -> Vec<Complex64> {
    let deg = p.len() - 1;
    let lead = p[deg];
    let monic: Vec<Complex64> = p.iter().map(|c| c / lead).collect();
    let seed = cx(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let mut denom = cx(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom == cx(0.0, 0.0) {
                continue;
            }
            let delta = poly_eval(&monic, roots[i]) / denom;
            roots[i] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    // Newton polish against the original coefficients.
    let dp: Vec<Complex64> = (1..p.len())
        .map(|k| p[k] * cx(k as f64, 0.0))
        .collect();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = poly_eval(&dp, *r);
            if d == cx(0.0, 0.0) {
                break;
            }
            *r -= poly_eval(p, *r) / d;
        }
    }
    roots
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn syntax<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(MslabError::Syntax { pos, msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = lhs.add(&rhs);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = lhs.sub(&rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = lhs.mul(&rhs);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = lhs.div(&rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            if let Some(c) = inner.as_constant() {
                return Ok(Expr::constant(-c));
            }
            return Ok(Expr::real(-1.0).mul(&inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.integer()?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        let negative = if self.s.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let digits_start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return self.syntax(start, "expected an integer exponent");
        }
        let text = std::str::from_utf8(&self.s[digits_start..self.pos]).unwrap();
        match text.parse::<i32>() {
            Ok(n) if n <= 64 => Ok(if negative { -n } else { n }),
            _ => self.syntax(start, "exponent out of range"),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                let open = self.pos;
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    self.syntax(open, "unclosed parenthesis")
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.syntax(self.pos, format!("unexpected character '{}'", c as char)),
            None => self.syntax(self.pos, "unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.s.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.s.get(self.pos), Some(b'e') | Some(b'E')) {
            let mut probe = self.pos + 1;
            if matches!(self.s.get(probe), Some(b'+') | Some(b'-')) {
                probe += 1;
            }
            if self.s.get(probe).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = probe;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        let value: f64 = match text.parse() {
            Ok(v) => v,
            Err(_) => return self.syntax(start, format!("bad number '{text}'")),
        };
        if self.s.get(self.pos) == Some(&b'i') {
            self.pos += 1;
            Ok(Expr::constant(cx(0.0, value)))
        } else {
            Ok(Expr::real(value))
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        match name {
            "z" => Ok(Expr::z()),
            "i" => Ok(Expr::constant(cx(0.0, 1.0))),
            "exp" | "log" => {
                if self.peek() != Some(b'(') {
                    return self.syntax(self.pos, format!("expected '(' after '{name}'"));
                }
                let open = self.pos;
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.syntax(open, "unclosed parenthesis");
                }
                self.pos += 1;
                Ok(if name == "exp" { arg.exp() } else { arg.log() })
            }
            _ => self.syntax(start, format!("unknown identifier '{name}'")),
        }
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

impl Expr {
    fn prec(&self) -> u8 {
        match &*self.0 {
            Node::Add(..) | Node::Sub(..) => PREC_ADD,
            Node::Mul(..) | Node::Div(..) => PREC_MUL,
            Node::Pow(..) => PREC_POW,
            // Constants that need it parenthesize themselves when printed.
            _ => PREC_ATOM,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let this = self.prec();
        let parens = this < min_prec;
        if parens {
            write!(f, "(")?;
        }
        match &*self.0 {
            Node::Const(c) => write_const(f, *c)?,
            Node::Z => write!(f, "z")?,
            Node::Add(a, b) => {
                a.fmt_prec(f, PREC_ADD)?;
                write!(f, " + ")?;
                b.fmt_prec(f, PREC_ADD + 1)?;
            }
            Node::Sub(a, b) => {
                a.fmt_prec(f, PREC_ADD)?;
                write!(f, " - ")?;
                b.fmt_prec(f, PREC_ADD + 1)?;
            }
            Node::Mul(a, b) => {
                a.fmt_prec(f, PREC_MUL)?;
                write!(f, "*")?;
                b.fmt_prec(f, PREC_MUL + 1)?;
            }
            Node::Div(a, b) => {
                a.fmt_prec(f, PREC_MUL)?;
                write!(f, "/")?;
                b.fmt_prec(f, PREC_MUL + 1)?;
            }
            Node::Pow(b, n) => {
                b.fmt_prec(f, PREC_ATOM)?;
                write!(f, "^{n}")?;
            }
            Node::Exp(a) => {
                write!(f, "exp(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
            Node::Log(a) => {
                write!(f, "log(")?;
                a.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: Complex64) -> fmt::Result {
    if c.im == 0.0 {
        if c.re >= 0.0 {
            write!(f, "{:?}", c.re)
        } else {
            write!(f, "({:?})", c.re)
        }
    } else if c.re == 0.0 {
        if c.im > 0.0 {
            write!(f, "{:?}i", c.im)
        } else {
            write!(f, "(-{:?}i)", -c.im)
        }
    } else if c.im > 0.0 {
        write!(f, "({:?} + {:?}i)", c.re, c.im)
    } else {
        write!(f, "({:?} - {:?}i)", c.re, -c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn eval_str(text: &str, z: Complex64) -> Complex64 {
        Expr::parse(text).unwrap().eval(z).unwrap()
    }

    #[test]
    fn parses_the_basics() {
        assert_eq!(eval_str("z", cx(1.0, 1.0)), cx(1.0, 1.0));
        assert_eq!(eval_str("1/(z+2i)", cx(0.0, 0.0)), cx(0.0, -0.5));
        let v = eval_str("log(z+1i)", cx(0.0, 0.0));
        assert_relative_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let w = eval_str("exp(3i*z)", cx(0.0, 1.0));
        assert_relative_eq!(w.re, (-3.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn division_pole_is_registered() {
        let e = Expr::parse("1/(z+2i)").unwrap();
        let poles = e.poles();
        assert_eq!(poles.len(), 1);
        assert_relative_eq!((poles[0] - cx(0.0, -2.0)).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn quartic_denominator_roots_are_found() {
        // (z^2+1)(z-1)(z-3) has roots i, -i, 1, 3.
        let e = Expr::parse("1/((z^2+1)*(z-1)*(z-3))").unwrap();
        let mut poles = e.poles();
        poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        assert_eq!(poles.len(), 4);
        for (got, want) in poles.iter().zip([cx(0.0, -1.0), cx(0.0, 1.0), cx(1.0, 0.0), cx(3.0, 0.0)]) {
            assert_relative_eq!((got - want).norm(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn quintic_denominator_is_not_enumerated() {
        let e = Expr::parse("1/(z^5+1)").unwrap();
        assert!(e.poles().is_empty());
    }

    #[test]
    fn negative_power_base_is_registered() {
        let e = Expr::parse("(z-2i)^-2").unwrap();
        let poles = e.poles();
        assert_eq!(poles.len(), 1);
        assert_relative_eq!((poles[0] - cx(0.0, 2.0)).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn pole_hit_is_reported() {
        let e = Expr::parse("1/(z-1i)").unwrap();
        let err = e.eval(cx(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, MslabError::PoleHit { .. }));
    }

    #[test]
    fn derivative_matches_known_forms() {
        let sq = Expr::parse("z^2").unwrap().derivative();
        for z in [cx(0.5, 0.2), cx(-1.0, 3.0)] {
            assert_relative_eq!((sq.eval(z).unwrap() - 2.0 * z).norm(), 0.0, epsilon = 1e-14);
        }
        let inv = Expr::parse("1/(z-2i)").unwrap().derivative();
        let z = cx(1.0, 1.0);
        let want = -1.0 / ((z - cx(0.0, 2.0)) * (z - cx(0.0, 2.0)));
        assert_relative_eq!((inv.eval(z).unwrap() - want).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn derivative_of_constant_is_syntactic_zero() {
        let c = Expr::parse("(2+3i)*(4-1i)").unwrap();
        assert!(c.derivative().is_zero());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match Expr::parse("z + ") {
            Err(MslabError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match Expr::parse("foo(z)") {
            Err(MslabError::Syntax { pos, msg }) => {
                assert_eq!(pos, 0);
                assert!(msg.contains("foo"));
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
        match Expr::parse("(z + 1") {
            Err(MslabError::Syntax { pos, .. }) => assert_eq!(pos, 0),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match Expr::parse("z^z") {
            Err(MslabError::Syntax { .. }) => {}
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            3 => Just(Expr::z()),
            2 => (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| Expr::constant(cx(re, im))),
        ];
        leaf.prop_recursive(4, 24, 8, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.div(&b)),
                (inner.clone(), -3i32..4).prop_map(|(a, n)| a.pow(n)),
                inner.clone().prop_map(|a| a.exp()),
                inner.prop_map(|a| a.log()),
            ]
        })
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(e in arb_expr(), re in -3.0f64..3.0, im in 0.1f64..3.0) {
            let z = cx(re, im);
            let h = 1e-5;
            let d = e.derivative();
            let samples = (
                e.eval(z + cx(h, 0.0)),
                e.eval(z - cx(h, 0.0)),
                d.eval(z),
                e.eval(z),
            );
            if let (Ok(fp), Ok(fm), Ok(dv), Ok(v)) = samples {
                // Keep clear of blow-up neighbourhoods, where the finite
                // difference itself is meaningless.
                let scale = v.norm().max(fp.norm()).max(fm.norm()).max(dv.norm());
                prop_assume!(scale < 1e3);
                let fd = (fp - fm) / cx(2.0 * h, 0.0);
                prop_assert!((fd - dv).norm() <= 1e-6 * (1.0 + scale));
            }
        }

        #[test]
        fn print_parse_roundtrip(e in arb_expr(), re in -3.0f64..3.0, im in 0.1f64..3.0) {
            let text = e.to_string();
            let back = Expr::parse(&text).unwrap();
            let z = cx(re, im);
            match (e.eval(z), back.eval(z)) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{text}: {a} vs {b}");
                }
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{text}: {a:?} vs {b:?}"),
            }
        }
    }
}
