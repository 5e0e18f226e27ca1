//! The b_k recursion for the ħ-expansion of the equivariant spectral measure
//! on S² (one action variable), and the assembled integrands of each order.
//!
//! With W' = v'(α² - ξ²/v²) and D = ∂/∂x + i t W', the coefficients satisfy
//!
//!   (1/i) ∂b_k/∂t = (2/i)(ξ/v) D b_{k-1} - (1/v) D² b_{k-2},   b_0 = 1,
//!
//! with b_{-1} = 0 and b_k(t = 0) = 0 for k ≥ 1. The order-k term of the
//! measure is Σ_l ∫ b_{k,l} (1/i)^l ρ⁽ˡ⁾(τ) dx dξ, τ = ξ²/v + α²v.

use serde::Serialize;
use thiserror::Error;

use crate::symbolic::{canon, d_dx, i_powers, times_i_pow, xi_parity, Expr, TPolynomial};

pub const DEFAULT_MAX_ORDER: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiclassicsError {
    #[error("order {requested} exceeds the configured maximum {max}")]
    OrderTooHigh { requested: u32, max: u32 },
}

/// W' = v'(α² - ξ² v⁻²)
pub fn w_prime() -> Expr {
    Expr::v(1) * (Expr::alpha().pow(2) - Expr::xi().pow(2) * Expr::v(0).pow(-2))
}

/// D p = ∂p/∂x + i t W' p
fn apply_d(p: &TPolynomial) -> TPolynomial {
    let w = w_prime();
    let mut out = TPolynomial::zero();
    for (l, c) in p.terms() {
        out.add_term(l, &d_dx(c));
        out.add_term(l + 1, &(Expr::i() * w.clone() * c.clone()));
    }
    out
}

fn scale(p: &TPolynomial, f: &Expr) -> TPolynomial {
    let mut out = TPolynomial::zero();
    for (l, c) in p.terms() {
        out.add_term(l, &(f.clone() * c.clone()));
    }
    out
}

/// All b_0 … b_k.
pub fn b_sequence(k: u32) -> Vec<TPolynomial> {
    let mut bs = vec![TPolynomial::constant(Expr::one())];
    let first = Expr::int(2) * Expr::i().pow(-1) * Expr::xi() * Expr::v(0).pow(-1);
    let second = -Expr::v(0).pow(-1);
    for j in 1..=k as usize {
        let mut rhs = scale(&apply_d(&bs[j - 1]), &first);
        if j >= 2 {
            let dd = apply_d(&apply_d(&bs[j - 2]));
            for (l, c) in scale(&dd, &second).terms() {
                rhs.add_term(l, c);
            }
        }
        // ∂b/∂t = i · rhs, integrated from t = 0
        let mut b = TPolynomial::zero();
        for (l, c) in rhs.terms() {
            let f = Expr::i() * Expr::rational(1, l as i64 + 1);
            b.add_term(l + 1, &(f * c.clone()));
        }
        bs.push(b);
    }
    bs
}

pub fn b_recursion(k: u32, max_order: u32) -> Result<TPolynomial, SemiclassicsError> {
    if k > max_order {
        return Err(SemiclassicsError::OrderTooHigh {
            requested: k,
            max: max_order,
        });
    }
    Ok(b_sequence(k).pop().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionTerm {
    pub order: u32,
    /// (l, integrand multiplying ρ⁽ˡ⁾(τ)), in increasing l
    #[serde(serialize_with = "ser_integrands")]
    pub integrands: Vec<(u32, Expr)>,
    /// All integrands are odd in ξ, so the term integrates to zero.
    pub zero_by_parity: bool,
}

fn ser_integrands<S: serde::Serializer>(v: &[(u32, Expr)], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (l, e) in v {
        seq.serialize_element(&(l, e.to_string()))?;
    }
    seq.end()
}

impl ExpansionTerm {
    pub fn integrand(&self, l: u32) -> Option<&Expr> {
        self.integrands.iter().find(|(k, _)| *k == l).map(|(_, e)| e)
    }

    /// True if every integrand carries the same power of i (0 or 1).
    pub fn uniform_i_power(&self) -> Option<u8> {
        let mut all: Vec<u8> = self
            .integrands
            .iter()
            .flat_map(|(_, e)| i_powers(e))
            .collect();
        all.sort();
        all.dedup();
        match all.as_slice() {
            [p] => Some(*p),
            [] => Some(0),
            _ => None,
        }
    }
}

pub fn assemble_from(order: u32, b: &TPolynomial) -> ExpansionTerm {
    let integrands: Vec<(u32, Expr)> = b
        .terms()
        .map(|(l, c)| (l, canon(&times_i_pow(c, -(l as i32)))))
        .collect();
    let zero_by_parity =
        !integrands.is_empty() && integrands.iter().all(|(_, e)| xi_parity(e) == Some(1));
    ExpansionTerm {
        order,
        integrands,
        zero_by_parity,
    }
}

pub fn assemble_term(k: u32, max_order: u32) -> Result<ExpansionTerm, SemiclassicsError> {
    Ok(assemble_from(k, &b_recursion(k, max_order)?))
}

/// The order-2 integrands written out term by term: coefficients of ρ'', ρ''', ρ''''.
pub fn order_two_reference() -> [(u32, Expr); 3] {
    let v = || Expr::v(0);
    let v1 = || Expr::v(1);
    let v2 = || Expr::v(2);
    let xi = Expr::xi;
    let a2 = || Expr::alpha().pow(2);
    let bracket = || a2() - xi().pow(2) * v().pow(-2);
    let r2 = Expr::rational(1, 2)
        * v().pow(-1)
        * (xi().pow(2) * (v2() * v().pow(-2) - Expr::int(2) * v1().pow(2) * v().pow(-3))
            - a2() * v2());
    let r3 = -(Expr::rational(1, 3) * v1().pow(2) * v().pow(-1) * bracket().pow(2))
        - Expr::rational(2, 3)
            * xi().pow(2)
            * v().pow(-1)
            * (xi().pow(2) * (Expr::int(3) * v1().pow(2) * v().pow(-4) - v2() * v().pow(-3))
                + a2() * (v2() * v().pow(-1) - v1().pow(2) * v().pow(-2)));
    let r4 = -(Expr::rational(1, 2) * v1().pow(2) * xi().pow(2) * v().pow(-2) * bracket().pow(2));
    [(2, canon(&r2)), (3, canon(&r3)), (4, canon(&r4))]
}

/// Closed forms of b_1 and b_2 as t-polynomials.
pub fn reference_b1_b2() -> (TPolynomial, TPolynomial) {
    let v = || Expr::v(0);
    let v1 = || Expr::v(1);
    let xi = Expr::xi;
    let bracket = || Expr::alpha().pow(2) - xi().pow(2) * v().pow(-2);
    let mut b1 = TPolynomial::zero();
    b1.add_term(
        2,
        &-(v1() * xi() * (v() * Expr::i()).pow(-1) * bracket()),
    );
    let mut b2 = TPolynomial::zero();
    b2.add_term(
        2,
        &(Expr::rational(1, 2) * v().pow(-1) * d_dx(&(v1() * bracket()))),
    );
    b2.add_term(
        3,
        &(Expr::i()
            * Expr::rational(1, 3)
            * (v1().pow(2) * v().pow(-1) * bracket().pow(2)
                + Expr::int(2)
                    * xi().pow(2)
                    * v().pow(-1)
                    * d_dx(&(v1() * v().pow(-1) * bracket())))),
    );
    b2.add_term(
        4,
        &-(v1().pow(2) * xi().pow(2) * Expr::rational(1, 2) * v().pow(-2) * bracket().pow(2)),
    );
    (b1, b2)
}
