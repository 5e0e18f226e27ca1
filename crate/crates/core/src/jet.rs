//! Truncated Taylor arithmetic up to fourth order.
//!
//! A [`Jet`] carries the Taylor coefficients `f(t0 + h) = Σ c_k h^k`, k ≤ 4, of a
//! scalar function at a point. Composing elementary operations on jets yields
//! exact derivatives up to order four without symbolic manipulation, which is
//! what the smooth test functions need for ρ⁽¹⁾…ρ⁽⁴⁾.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ORDER: usize = 4;
const LEN: usize = ORDER + 1;
const FACTORIAL: [f64; LEN] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = value;
        Jet { c }
    }

    /// The independent variable at `t0`, optionally scaled: `(t - t0) * slope + value`.
    pub fn variable(value: f64, slope: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = value;
        c[1] = slope;
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Derivatives `f, f', f'', f''', f''''` at the expansion point.
    pub fn derivatives(&self) -> [f64; LEN] {
        let mut d = [0.0; LEN];
        for k in 0..LEN {
            d[k] = self.c[k] * FACTORIAL[k];
        }
        d
    }

    pub fn scale(self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= s);
        Jet { c }
    }

    pub fn recip(self) -> Self {
        let a = &self.c;
        let mut r = [0.0; LEN];
        r[0] = 1.0 / a[0];
        for k in 1..LEN {
            let mut s = 0.0;
            for j in 1..=k {
                s += a[j] * r[k - j];
            }
            r[k] = -s * r[0];
        }
        Jet { c: r }
    }

    pub fn exp(self) -> Self {
        // e' = a' e  =>  k e_k = Σ_{j=1..k} j a_j e_{k-j}
        let a = &self.c;
        let mut e = [0.0; LEN];
        e[0] = a[0].exp();
        for k in 1..LEN {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..LEN {
            c[k] += rhs.c[k];
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; LEN];
        for i in 0..LEN {
            for j in 0..LEN - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}
