//! Truncated bivariate Taylor series.
//!
//! A [`Jet`] holds the Taylor coefficients of a function of two variables
//! around a point, up to total degree [`MAX_ORDER`]. Arithmetic on jets is
//! arithmetic on truncated power series, so derivatives of any expression
//! built from jets are exact up to rounding. Each jet tracks the degree up to
//! which its coefficients are valid; taking a partial derivative lowers it by
//! one and binary operations keep the minimum.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub const MAX_ORDER: usize = 5;
const NC: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

#[inline]
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[inline]
const fn ncoef(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Numbers the charts and fields are generic over: plain `f64` or a [`Jet`].
pub trait Scalar:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(x: f64) -> Self;
    fn val(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn recip(self) -> Self;

    fn powi(self, k: i32) -> Self {
        if k < 0 {
            return self.powi(-k).recip();
        }
        let mut acc = Self::cst(1.0);
        let mut base = self;
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
    fn tan(self) -> Self {
        self.sin() / self.cos()
    }
    fn sinh(self) -> Self {
        (self.exp() - (-self).exp()) * 0.5
    }
    fn cosh(self) -> Self {
        (self.exp() + (-self).exp()) * 0.5
    }
}

impl Scalar for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; NC],
    n: u8,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(n={}, {:?})", self.n, &self.c[..ncoef(self.n as usize)])
    }
}

impl Jet {
    pub fn constant(x: f64) -> Jet {
        let mut c = [0.0; NC];
        c[0] = x;
        Jet { c, n: MAX_ORDER as u8 }
    }

    /// The first coordinate as a jet of the given order at `x0`.
    pub fn var_u(x0: f64, order: usize) -> Jet {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; NC];
        c[0] = x0;
        if order >= 1 {
            c[idx(1, 0)] = 1.0;
        }
        Jet { c, n: order as u8 }
    }

    pub fn var_v(y0: f64, order: usize) -> Jet {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; NC];
        c[0] = y0;
        if order >= 1 {
            c[idx(0, 1)] = 1.0;
        }
        Jet { c, n: order as u8 }
    }

    pub fn order(&self) -> usize {
        self.n as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of `du^i dv^j`.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= self.n as usize, "coefficient beyond valid order");
        self.c[idx(i, j)]
    }

    /// Partial derivative `d^(i+j) / du^i dv^j` at the expansion point.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    /// Partial derivative in u, as a series of one lower order.
    pub fn du(&self) -> Jet {
        assert!(self.n > 0, "du of an order-0 jet");
        let n = self.n as usize - 1;
        let mut c = [0.0; NC];
        for d in 0..=n {
            for j in 0..=d {
                let i = d - j;
                c[idx(i, j)] = (i + 1) as f64 * self.c[idx(i + 1, j)];
            }
        }
        Jet { c, n: n as u8 }
    }

    pub fn dv(&self) -> Jet {
        assert!(self.n > 0, "dv of an order-0 jet");
        let n = self.n as usize - 1;
        let mut c = [0.0; NC];
        for d in 0..=n {
            for j in 0..=d {
                let i = d - j;
                c[idx(i, j)] = (j + 1) as f64 * self.c[idx(i, j + 1)];
            }
        }
        Jet { c, n: n as u8 }
    }

    /// Truncate to a lower order.
    pub fn truncate(&self, order: usize) -> Jet {
        let n = order.min(self.n as usize);
        let mut c = [0.0; NC];
        c[..ncoef(n)].copy_from_slice(&self.c[..ncoef(n)]);
        Jet { c, n: n as u8 }
    }

    /// Evaluate `sum_k t[k] (self - a)^k` where `a` is the constant term.
    fn compose(&self, t: &[f64]) -> Jet {
        let n = self.n as usize;
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut r = Jet::constant(t[n]);
        r.n = self.n;
        for k in (0..n).rev() {
            r = r * delta;
            r.c[0] += t[k];
        }
        r
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [0.0; NC];
        for k in 0..ncoef(n as usize) {
            c[k] = self.c[k] + o.c[k];
        }
        Jet { c, n }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [0.0; NC];
        for k in 0..ncoef(n as usize) {
            c[k] = self.c[k] - o.c[k];
        }
        Jet { c, n }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let n = self.n.min(o.n) as usize;
        let mut c = [0.0; NC];
        for da in 0..=n {
            for ja in 0..=da {
                let a = self.c[idx(da - ja, ja)];
                if a == 0.0 {
                    continue;
                }
                for db in 0..=(n - da) {
                    for jb in 0..=db {
                        let ib = db - jb;
                        c[idx(da - ja + ib, ja + jb)] += a * o.c[idx(ib, jb)];
                    }
                }
            }
        }
        Jet { c, n: n as u8 }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.c[0] += o;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, o: f64) -> Jet {
        self.c[0] -= o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, o: f64) -> Jet {
        for v in self.c.iter_mut() {
            *v *= o;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, o: f64) -> Jet {
        self * (1.0 / o)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, o: Jet) {
        *self = *self * o;
    }
}

impl Scalar for Jet {
    fn cst(x: f64) -> Self {
        Jet::constant(x)
    }
    fn val(&self) -> f64 {
        self.c[0]
    }
    fn sin(self) -> Self {
        let a = self.c[0];
        let t: Vec<f64> = (0..=self.n as usize)
            .map(|k| (a + k as f64 * std::f64::consts::FRAC_PI_2).sin() / factorial(k))
            .collect();
        self.compose(&t)
    }
    fn cos(self) -> Self {
        let a = self.c[0];
        let t: Vec<f64> = (0..=self.n as usize)
            .map(|k| (a + k as f64 * std::f64::consts::FRAC_PI_2).cos() / factorial(k))
            .collect();
        self.compose(&t)
    }
    fn exp(self) -> Self {
        let e = self.c[0].exp();
        let t: Vec<f64> = (0..=self.n as usize).map(|k| e / factorial(k)).collect();
        self.compose(&t)
    }
    fn ln(self) -> Self {
        let a = self.c[0];
        let mut t = vec![a.ln()];
        for k in 1..=self.n as usize {
            let s = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(s / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&t)
    }
    fn sqrt(self) -> Self {
        self.powf(0.5)
    }
    fn powf(self, p: f64) -> Self {
        let a = self.c[0];
        let mut t = Vec::with_capacity(self.n as usize + 1);
        let mut binom = 1.0;
        for k in 0..=self.n as usize {
            if k > 0 {
                binom *= (p - (k - 1) as f64) / k as f64;
            }
            t.push(binom * a.powf(p - k as f64));
        }
        self.compose(&t)
    }
    fn recip(self) -> Self {
        let a = self.c[0];
        let t: Vec<f64> = (0..=self.n as usize)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / a.powi(k as i32 + 1))
            .collect();
        self.compose(&t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_rule_and_mixed_partials() {
        // f = u^2 v^3 at (2, -1)
        let u = Jet::var_u(2.0, 5);
        let v = Jet::var_v(-1.0, 5);
        let f = u * u * v * v * v;
        assert!(close(f.deriv(1, 0), 2.0 * 2.0 * -1.0, 1e-14));
        assert!(close(f.deriv(2, 3), 2.0 * 6.0, 1e-14));
        assert!(close(f.du().dv().value(), 2.0 * 2.0 * 3.0, 1e-14));
    }

    #[test]
    fn elementary_functions_match_derivatives() {
        let x0 = 0.7;
        let u = Jet::var_u(x0, 5);
        let s = u.sin();
        // d^k sin = sin(x + k pi/2)
        for k in 0..=5 {
            let want = (x0 + k as f64 * std::f64::consts::FRAC_PI_2).sin();
            assert!(close(s.deriv(k, 0), want, 1e-13));
        }
        let e = (u * 2.0).exp();
        assert!(close(e.deriv(4, 0), 16.0 * (2.0 * x0).exp(), 1e-12));
        let l = u.ln();
        assert!(close(l.deriv(3, 0), 2.0 / x0.powi(3), 1e-12));
        let r = u.sqrt();
        assert!(close(r.deriv(2, 0), -0.25 * x0.powf(-1.5), 1e-12));
        let q = u.recip();
        assert!(close(q.deriv(3, 0), -6.0 / x0.powi(4), 1e-12));
    }

    #[test]
    fn composition_is_chain_rule() {
        // g(u,v) = exp(u v) at (0.3, 0.5); d/du d/dv g = (1 + uv) exp(uv)
        let u = Jet::var_u(0.3, 4);
        let v = Jet::var_v(0.5, 4);
        let g = (u * v).exp();
        let want = (1.0 + 0.15) * 0.15f64.exp();
        assert!(close(g.deriv(1, 1), want, 1e-13));
        // sqrt(x)^2 == x through order 4
        let h = (u * u + v).sqrt();
        let back = h * h - u * u - v;
        for d in 0..=4 {
            for j in 0..=d {
                assert!(back.coeff(d - j, j).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn order_tracking() {
        let u = Jet::var_u(1.0, 3);
        let v = Jet::var_v(1.0, 5);
        assert_eq!((u * v).order(), 3);
        assert_eq!((u * v).du().order(), 2);
        assert_eq!((Jet::constant(2.0) * v).order(), 5);
    }

    #[test]
    fn integer_powers() {
        let u = Jet::var_u(1.5, 3);
        let p = u.powi(-2);
        assert!(close(p.deriv(1, 0), -2.0 * 1.5f64.powi(-3), 1e-13));
        let q = u.powi(3);
        assert!(close(q.deriv(3, 0), 6.0, 1e-13));
    }
}
