//! A small arithmetic grammar in `x` and `y` for initial data:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'y' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | tan | exp | ln | sqrt | abs | tanh
//! ```
//!
//! `×` and `÷` are accepted for `*` and `/`. Evaluation carries the
//! gradient along as a dual number, so parsed expressions are usable as
//! [`ScalarField`]s.

use std::fmt;

use crate::error::{Error, Result};
use crate::fem::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Dual {
    v: f64,
    d: [f64; 2],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: [0.0, 0.0] }
    }

    /// `f(self)` given `f` and `f'` at `self.v`.
    fn chain(self, f: f64, df: f64) -> Self {
        Dual { v: f, d: [df * self.d[0], df * self.d[1]] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    const ALL: [(&'static str, Func); 8] = [
        ("sin", Func::Sin),
        ("cos", Func::Cos),
        ("tan", Func::Tan),
        ("exp", Func::Exp),
        ("ln", Func::Ln),
        ("sqrt", Func::Sqrt),
        ("abs", Func::Abs),
        ("tanh", Func::Tanh),
    ];

    fn name(self) -> &'static str {
        Func::ALL.iter().find(|(_, f)| *f == self).map(|(n, _)| *n).expect("listed")
    }

    fn apply(self, a: Dual) -> Dual {
        let v = a.v;
        match self {
            Func::Sin => a.chain(v.sin(), v.cos()),
            Func::Cos => a.chain(v.cos(), -v.sin()),
            Func::Tan => a.chain(v.tan(), 1.0 / (v.cos() * v.cos())),
            Func::Exp => a.chain(v.exp(), v.exp()),
            Func::Ln => a.chain(v.ln(), 1.0 / v),
            Func::Sqrt => a.chain(v.sqrt(), 0.5 / v.sqrt()),
            Func::Abs => a.chain(v.abs(), if v < 0.0 { -1.0 } else { 1.0 }),
            Func::Tanh => a.chain(v.tanh(), 1.0 - v.tanh() * v.tanh()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, x: [f64; 2]) -> Dual {
        match self {
            Node::Num(v) => Dual::constant(*v),
            Node::X => Dual { v: x[0], d: [1.0, 0.0] },
            Node::Y => Dual { v: x[1], d: [0.0, 1.0] },
            Node::Neg(a) => {
                let a = a.eval(x);
                Dual { v: -a.v, d: [-a.d[0], -a.d[1]] }
            }
            Node::Add(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual { v: a.v + b.v, d: [a.d[0] + b.d[0], a.d[1] + b.d[1]] }
            }
            Node::Sub(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual { v: a.v - b.v, d: [a.d[0] - b.d[0], a.d[1] - b.d[1]] }
            }
            Node::Mul(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                Dual { v: a.v * b.v, d: [a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]] }
            }
            Node::Div(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                let q = a.v / b.v;
                Dual { v: q, d: [(a.d[0] - q * b.d[0]) / b.v, (a.d[1] - q * b.d[1]) / b.v] }
            }
            Node::Pow(a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                let v = a.v.powf(b.v);
                if b.d == [0.0, 0.0] {
                    // constant exponent: defined for negative bases too
                    let da = if b.v == 0.0 { 0.0 } else { b.v * a.v.powf(b.v - 1.0) };
                    Dual { v, d: [da * a.d[0], da * a.d[1]] }
                } else {
                    let ln = a.v.ln();
                    let g = |i: usize| v * (b.d[i] * ln + b.v * a.d[i] / a.v);
                    Dual { v, d: [g(0), g(1)] }
                }
            }
            Node::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    fn write(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(out, "{v:?}"),
            Node::X => write!(out, "x"),
            Node::Y => write!(out, "y"),
            Node::Neg(a) => {
                write!(out, "(-")?;
                a.write(out)?;
                write!(out, ")")
            }
            Node::Call(f, a) => {
                write!(out, "{}(", f.name())?;
                a.write(out)?;
                write!(out, ")")
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                let op = match self {
                    Node::Add(..) => "+",
                    Node::Sub(..) => "-",
                    Node::Mul(..) => "*",
                    Node::Div(..) => "/",
                    _ => "^",
                };
                write!(out, "(")?;
                a.write(out)?;
                write!(out, " {op} ")?;
                b.write(out)?;
                write!(out, ")")
            }
        }
    }
}

/// A parsed expression of `x` and `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { chars: src.char_indices().collect(), pos: 0, src };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.root.eval(x).v
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.root.eval(x).d
    }
}

/// Prints a fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(f)
    }
}

impl ScalarField for Expr {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.eval(x)
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        Expr::gradient(self, x)
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        let at = self.chars.get(self.pos).map_or(self.src.len(), |c| c.0);
        Error::Expr { pos: at, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                '+' => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                '-' | '−' => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek() {
            match c {
                '*' | '×' => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                '/' | '÷' => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some('-') | Some('−') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() => {
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].1.is_alphanumeric() {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                match word.as_str() {
                    "x" => Ok(Node::X),
                    "y" => Ok(Node::Y),
                    "pi" | "π" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    w => {
                        let Some(&(_, f)) = Func::ALL.iter().find(|(n, _)| *n == w) else {
                            self.pos = start;
                            return Err(self.error(&format!("unknown name '{w}'")));
                        };
                        if self.peek() != Some('(') {
                            return Err(self.error(&format!("expected '(' after {w}")));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        if self.peek() != Some(')') {
                            return Err(self.error("expected ')'"));
                        }
                        self.pos += 1;
                        Ok(Node::Call(f, Box::new(arg)))
                    }
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut seen_exp = false;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos].1;
            let sign_after_exp =
                (c == '+' || c == '-') && seen_exp && matches!(self.chars[self.pos - 1].1, 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || sign_after_exp {
                self.pos += 1;
            } else if (c == 'e' || c == 'E') && !seen_exp {
                // only an exponent if a digit or sign follows
                match self.chars.get(self.pos + 1).map(|c| c.1) {
                    Some(d) if d.is_ascii_digit() || d == '+' || d == '-' => {
                        seen_exp = true;
                        self.pos += 1;
                    }
                    _ => break,
                }
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        text.parse().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error(&format!("bad number '{text}'"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::BenchmarkPhase;

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("1 + 2*3 - -4/2^2").unwrap();
        assert_eq!(e.eval([0.0, 0.0]), 8.0);
        assert_eq!(Expr::parse("-2^2").unwrap().eval([0.0, 0.0]), -4.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval([0.0, 0.0]), 512.0);
        assert_eq!(Expr::parse("3 × 4 ÷ 6").unwrap().eval([0.0, 0.0]), 2.0);
        assert_eq!(Expr::parse("1.5e-3 * 2").unwrap().eval([0.0, 0.0]), 3e-3);
    }

    #[test]
    fn benchmark_datum_and_gradient() {
        let e = Expr::parse("0.5*(1 - cos(4*pi*x))*(1 - cos(2*pi*y)) - 1").unwrap();
        for p in [[0.1, 0.2], [0.37, 0.81], [0.9, 0.5]] {
            assert!((e.eval(p) - BenchmarkPhase.value(p)).abs() < 1e-14);
            let (g, h) = (e.gradient(p), BenchmarkPhase.gradient(p));
            assert!((g[0] - h[0]).abs() < 1e-12 && (g[1] - h[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_gradient_matches_differences() {
        let e = Expr::parse("exp(x*y)/(1 + x^2) + sqrt(y + 2)*tanh(x) - ln(2 + y)*abs(x - 0.3)").unwrap();
        let p = [0.7, 0.4];
        let g = e.gradient(p);
        let h = 1e-6;
        let fx = (e.eval([p[0] + h, p[1]]) - e.eval([p[0] - h, p[1]])) / (2.0 * h);
        let fy = (e.eval([p[0], p[1] + h]) - e.eval([p[0], p[1] - h])) / (2.0 * h);
        assert!((g[0] - fx).abs() < 1e-8 && (g[1] - fy).abs() < 1e-8, "{g:?} vs {fx} {fy}");
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("-x^2 + sin(3*y)/2 - 1e-3").unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn errors_carry_positions() {
        for (src, pos) in [("1 + ", 4), ("foo(x)", 0), ("2 * (x", 6), ("x y", 2), ("sin x", 4)] {
            match Expr::parse(src) {
                Err(Error::Expr { pos: p, .. }) => assert_eq!(p, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
    }
}
