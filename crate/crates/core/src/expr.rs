//! Small arithmetic expression language for user-supplied functions
//! (graph heights, boundary data, Cauchy data).
//!
//! Expressions evaluate over any [`Scalar`], so a user graph `h(x, y)` gets
//! exact derivatives through jets. Juxtaposition multiplies (`2θ`), and a
//! function name may be applied without parentheses to the juxtaposed group
//! that follows it (`cos2θ` is `cos(2θ)`).

use crate::error::{Error, Result};
use crate::jet::Scalar;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, only when followed by a digit or sign+digit
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let j = i + 1;
                let k = if j < chars.len() && (chars[j] == '+' || chars[j] == '-') { j + 1 } else { j };
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            // Greek letters are single-character identifiers so `2θ` and `xθ` split.
            if !c.is_ascii() {
                i += 1;
            } else {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    // stop before digits so `cos2θ` tokenizes as cos, 2, θ
                    if chars[i].is_ascii_digit() {
                        break;
                    }
                    i += 1;
                }
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
}

fn func_of(name: &str) -> Option<Func> {
    Some(match name {
        "sin" => Func::Sin,
        "cos" => Func::Cos,
        "tan" => Func::Tan,
        "exp" => Func::Exp,
        "ln" | "log" => Func::Ln,
        "sqrt" => Func::Sqrt,
        "sinh" => Func::Sinh,
        "cosh" => Func::Cosh,
        _ => return None,
    })
}

fn canonical(name: &str) -> &str {
    match name {
        "θ" | "ϑ" | "theta" => "theta",
        other => other,
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.juxtaposed()
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Some(Tok::Num(_)) | Some(Tok::Ident(_)) | Some(Tok::Op('(')))
    }

    /// A run of power-atoms multiplied by juxtaposition.
    fn juxtaposed(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        while self.starts_atom() {
            let rhs = self.power()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary_power()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary_power(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary_power()?)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Parse("missing `)`".into()));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = func_of(&name) {
                    let arg = if self.eat('(') {
                        let e = self.expr()?;
                        if !self.eat(')') {
                            return Err(Error::Parse("missing `)`".into()));
                        }
                        e
                    } else {
                        self.juxtaposed()?
                    };
                    // allow sin(x)^2
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" | "π" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "e" if !self.vars.contains(&"e") => return Ok(Expr::Num(std::f64::consts::E)),
                    _ => {}
                }
                let key = canonical(&name);
                match self.vars.iter().position(|v| canonical(v) == key) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::Parse(format!("unknown variable `{name}`"))),
                }
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

impl Expr {
    /// Parse `src` with the given variable names (index = argument position).
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(Error::Parse("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0, vars };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Parse(format!("trailing input at token {}", p.pos)));
        }
        Ok(e)
    }

    pub fn eval<S: Scalar>(&self, args: &[S]) -> S {
        match self {
            Expr::Num(v) => S::cst(*v),
            Expr::Var(i) => args[*i],
            Expr::Neg(a) => -a.eval(args),
            Expr::Add(a, b) => a.eval(args) + b.eval(args),
            Expr::Sub(a, b) => a.eval(args) - b.eval(args),
            Expr::Mul(a, b) => a.eval(args) * b.eval(args),
            Expr::Div(a, b) => a.eval(args) / b.eval(args),
            Expr::Pow(a, b) => {
                let base = a.eval(args);
                match b.as_const() {
                    Some(p) if p == p.round() && p.abs() < 64.0 => base.powi(p as i32),
                    Some(p) => base.powf(p),
                    None => (b.eval(args) * base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(args);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                }
            }
        }
    }

    /// Value if the expression has no variables.
    pub fn as_const(&self) -> Option<f64> {
        if self.uses_vars() {
            None
        } else {
            Some(self.eval::<f64>(&[]))
        }
    }

    fn uses_vars(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_vars(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses_vars() || b.uses_vars()
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "${i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(g, a) => write!(f, "{g:?}({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    fn ev(src: &str, x: f64, y: f64) -> f64 {
        Expr::parse(src, &["x", "y"]).unwrap().eval(&[x, y])
    }

    #[test]
    fn precedence_and_juxtaposition() {
        assert_eq!(ev("1 + 2*3^2", 0.0, 0.0), 19.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2x y", 3.0, 4.0), 24.0);
        assert!((ev("x^2/2 + y^2/2 + 0.1x^3", 1.0, 2.0) - 2.6).abs() < 1e-15);
        assert!((ev("1e-1 x", 3.0, 0.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn greek_and_implicit_calls() {
        let e = Expr::parse("cos2θ", &["theta"]).unwrap();
        assert!((e.eval(&[0.3]) - 0.6f64.cos()).abs() < 1e-15);
        let e = Expr::parse("sin(θ)^2 + cos(theta)^2", &["θ"]).unwrap();
        assert!((e.eval(&[1.1]) - 1.0).abs() < 1e-15);
        let e = Expr::parse("2 pi", &[]).unwrap();
        assert_eq!(e.as_const(), Some(2.0 * std::f64::consts::PI));
    }

    #[test]
    fn jets_through_expressions() {
        let e = Expr::parse("1 - sqrt(1 - x^2 - y^2)", &["x", "y"]).unwrap();
        let u = Jet::var_u(0.0, 4);
        let v = Jet::var_v(0.0, 4);
        let h = e.eval(&[u, v]);
        assert!((h.deriv(2, 0) - 1.0).abs() < 1e-14);
        // 1 - sqrt(1 - x^2) = x^2/2 + x^4/8 + ...
        assert!((h.deriv(4, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("x +", &["x"]).is_err());
        assert!(Expr::parse("z", &["x"]).is_err());
        assert!(Expr::parse("(x", &["x"]).is_err());
        assert!(Expr::parse("x $ 2", &["x"]).is_err());
    }
}
