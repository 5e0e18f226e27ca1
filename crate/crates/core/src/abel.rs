//! Fractional integration J^a on uniform grids, inversion of J^{3/2}, and a
//! solver for the weakly singular Volterra equation
//!
//!   G(β) = ∫₀^β √(β-S) [A(S,β) F(S) + B(S,β) F'(S)] dS,   F(0) = 0.

use num_rational::Rational64;
use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbelError {
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("order of integration must be positive, got {0}")]
    BadOrder(f64),
    #[error("smoothing window must be odd and exceed the fit degree + 1, got {window} for degree {degree}")]
    BadWindow { window: usize, degree: usize },
    #[error("local-fit residuals dominate the second derivative (diagnostic {diagnostic:.3e} > {threshold:.3e})")]
    NoiseDominated { diagnostic: f64, threshold: f64 },
    #[error("Volterra pivot {pivot:.3e} below threshold at beta = {beta}")]
    IllConditioned { beta: f64, pivot: f64 },
}

/// Samples on the uniform grid 0, h, 2h, …
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    pub h: f64,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(h: f64, values: Vec<f64>) -> Result<Self, AbelError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(AbelError::BadSpacing(h));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AbelError::NonFinite(i));
        }
        Ok(SampledFunction { h, values })
    }

    /// f sampled at j h for j < n.
    pub fn from_fn<F: Fn(f64) -> f64>(h: f64, n: usize, f: F) -> Result<Self, AbelError> {
        Self::new(h, (0..n).map(|j| f(j as f64 * h)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|j| j as f64 * self.h).collect()
    }

    pub fn scaled(&self, k: f64) -> Self {
        SampledFunction {
            h: self.h,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }
}

/// Product-trapezoid weights a_{j,n}, j = 0..=n, for J^a at t_n: the integral
/// of (t_n - s)^{a-1} times the piecewise-linear interpolant, up to the common
/// factor h^a / Γ(a + 2).
fn product_weights(n: usize, a: f64) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    let p = |k: usize| (k as f64).powf(a + 1.0);
    let nf = n as f64;
    let mut w = Vec::with_capacity(n + 1);
    w.push(p(n - 1) - (nf - a - 1.0) * nf.powf(a));
    for j in 1..n {
        let k = n - j;
        w.push(p(k + 1) - 2.0 * p(k) + p(k - 1));
    }
    w.push(1.0);
    w
}

/// J^a g = (1/Γ(a)) ∫₀^s (s-ν)^{a-1} g(ν) dν with g linear between samples.
pub fn frac_integrate(g: &SampledFunction, a: f64) -> Result<SampledFunction, AbelError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(AbelError::BadOrder(a));
    }
    let scale = g.h.powf(a) / gamma(a + 2.0);
    let values = (0..g.len())
        .map(|n| {
            let w = product_weights(n, a);
            scale * w.iter().zip(&g.values).map(|(w, g)| w * g).sum::<f64>()
        })
        .collect();
    SampledFunction::new(g.h, values)
}

/// Solve the small symmetric system m x = r in place (Gaussian elimination
/// with partial pivoting).
fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Vec<f64> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    x
}

/// Least-squares filter: the coefficient matrix C ((degree+1) × len) such
/// that the fitted polynomial in t is Σ_p (C y)_p t^p at the given offsets.
fn ls_projector(offsets: &[f64], degree: usize) -> Vec<Vec<f64>> {
    let d = degree + 1;
    let mut normal = vec![vec![0.0; d]; d];
    for &t in offsets {
        for i in 0..d {
            for j in 0..d {
                normal[i][j] += t.powi((i + j) as i32);
            }
        }
    }
    let mut c = vec![vec![0.0; offsets.len()]; d];
    for (k, _) in offsets.iter().enumerate() {
        let rhs: Vec<f64> = (0..d).map(|p| offsets[k].powi(p as i32)).collect();
        let col = solve_dense(normal.clone(), rhs);
        for p in 0..d {
            c[p][k] = col[p];
        }
    }
    c
}

/// Savitzky–Golay weights for the `deriv`-th derivative at offset 0 of the
/// least-squares polynomial through unit-spaced `offsets`.
pub fn sg_weights(offsets: &[f64], degree: usize, deriv: usize) -> Vec<f64> {
    let c = ls_projector(offsets, degree);
    let fact: f64 = (1..=deriv).map(|k| k as f64).product();
    c[deriv].iter().map(|w| w * fact).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingOptions {
    /// Odd number of points in each local fit.
    pub window: usize,
    /// Degree of the local polynomial.
    pub degree: usize,
    /// Largest accepted median ratio of fit-noise error to second derivative.
    pub noise_threshold: f64,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        SmoothingOptions {
            window: 7,
            degree: 2,
            noise_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondDerivative {
    pub values: Vec<f64>,
    /// Median over grid points of (fit residual × ‖weights‖) / |f''|.
    pub diagnostic: f64,
}

/// f'' by local polynomial fits; windows are shifted inward at the ends.
pub fn smoothed_second_derivative(
    f: &SampledFunction,
    opts: &SmoothingOptions,
) -> Result<SecondDerivative, AbelError> {
    let w = opts.window;
    if w % 2 == 0 || w < opts.degree + 2 || opts.degree < 2 {
        return Err(AbelError::BadWindow {
            window: w,
            degree: opts.degree,
        });
    }
    let n = f.len();
    if n < w {
        return Err(AbelError::TooFewSamples { needed: w, got: n });
    }
    let r = w / 2;
    let h2 = f.h * f.h;
    let mut values = vec![0.0; n];
    let mut ratios = Vec::with_capacity(n);
    let mut cache: Vec<Option<(Vec<Vec<f64>>, Vec<f64>)>> = vec![None; w];
    for j in 0..n {
        let start = j.saturating_sub(r).min(n - w);
        let shift = j - start; // position of j inside the window
        // off-centre fits lose the odd-term cancellation; one more degree
        // keeps them at the same order as the centred ones
        let degree = if shift == r || w < opts.degree + 3 {
            opts.degree
        } else {
            opts.degree + 1
        };
        let (proj, offsets) = cache[shift].get_or_insert_with(|| {
            let offs: Vec<f64> = (0..w).map(|k| k as f64 - shift as f64).collect();
            (ls_projector(&offs, degree), offs)
        });
        let y = &f.values[start..start + w];
        let coef: Vec<f64> = proj
            .iter()
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect();
        values[j] = 2.0 * coef[2] / h2;
        let resid: f64 = offsets
            .iter()
            .zip(y)
            .map(|(&t, &yk)| {
                let fit: f64 = coef.iter().enumerate().map(|(p, c)| c * t.powi(p as i32)).sum();
                (yk - fit).powi(2)
            })
            .sum::<f64>();
        let dof = (w - degree - 1).max(1) as f64;
        let noise = (resid / dof).sqrt();
        let wnorm = 2.0 * proj[2].iter().map(|x| x * x).sum::<f64>().sqrt() / h2;
        let err = noise * wnorm;
        if err > 0.0 || values[j] != 0.0 {
            ratios.push(if values[j] == 0.0 {
                f64::INFINITY
            } else {
                err / values[j].abs()
            });
        }
    }
    let diagnostic = if ratios.is_empty() {
        0.0
    } else {
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ratios[ratios.len() / 2]
    };
    Ok(SecondDerivative { values, diagnostic })
}

/// h with G = Γ(3/2) J^{3/2} h, via h = (1/Γ(3/2)) (J^{1/2} G)''.
pub fn abel_invert_threehalves(
    g: &SampledFunction,
    opts: &SmoothingOptions,
) -> Result<SampledFunction, AbelError> {
    let j = frac_integrate(g, 0.5)?;
    let d2 = smoothed_second_derivative(&j, opts)?;
    if d2.diagnostic > opts.noise_threshold {
        return Err(AbelError::NoiseDominated {
            diagnostic: d2.diagnostic,
            threshold: opts.noise_threshold,
        });
    }
    let k = 1.0 / gamma(1.5);
    SampledFunction::new(g.h, d2.values.into_iter().map(|v| v * k).collect())
}

/// Coefficients of the first-order relation A F + B F'. B must vanish on the
/// diagonal S = β; `b_reduced` is B/(β - S).
pub trait VolterraKernel: Sync {
    fn a(&self, s: f64, beta: f64) -> f64;
    fn b(&self, s: f64, beta: f64) -> f64;

    fn b_reduced(&self, s: f64, beta: f64) -> f64 {
        let d = beta - s;
        if d.abs() > 1e-6 * (1.0 + beta.abs()) {
            self.b(s, beta) / d
        } else {
            // -∂B/∂S on the diagonal
            let e = 1e-5 * (1.0 + beta.abs());
            -(self.b(s + e, beta) - self.b(s - e, beta)) / (2.0 * e)
        }
    }

    fn b_reduced_ds(&self, s: f64, beta: f64) -> f64 {
        let e = 1e-5 * (1.0 + s.abs());
        (self.b_reduced(s + e, beta) - self.b_reduced(s - e, beta)) / (2.0 * e)
    }

    /// After integrating the B F' term by parts: G = ∫ √(β-S) k F dS.
    fn k(&self, s: f64, beta: f64) -> f64 {
        self.a(s, beta) + 1.5 * self.b_reduced(s, beta) - (beta - s) * self.b_reduced_ds(s, beta)
    }

    /// Kernel of the differentiated equation: G'(β) = ∫ (β-S)^{-1/2} k1 F dS.
    fn k1(&self, s: f64, beta: f64) -> f64 {
        let e = 1e-5 * (1.0 + beta.abs());
        let dk = (self.k(s, beta + e) - self.k(s, beta - e)) / (2.0 * e);
        0.5 * self.k(s, beta) + (beta - s) * dk
    }
}

/// A, B given as closures; derived kernels by finite differences.
pub struct FnKernel<A, B> {
    pub a: A,
    pub b: B,
}

impl<A, B> VolterraKernel for FnKernel<A, B>
where
    A: Fn(f64, f64) -> f64 + Sync,
    B: Fn(f64, f64) -> f64 + Sync,
{
    fn a(&self, s: f64, beta: f64) -> f64 {
        (self.a)(s, beta)
    }
    fn b(&self, s: f64, beta: f64) -> f64 {
        (self.b)(s, beta)
    }
}

const A_DEN: i64 = 9;
const B_DEN: i64 = 45;

/// The coefficients of the second-invariant relation for F = 1/f₁' + 1/f₂',
/// with s = S + c and b = β + c:
///
///   A = -(s² - s b + ¾ b²) / (9 s^{5/2}),   B = (β - S)(2S + 3β + 5c) / (45 s^{3/2}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondInvariantKernel {
    pub c: f64,
}

impl SecondInvariantKernel {
    /// A and B written term by term, for cross-checking the factored forms.
    pub fn expanded(&self, s: f64, beta: f64) -> (f64, f64) {
        let s = s + self.c;
        let b = beta + self.c;
        let r = s.sqrt();
        let a = -1.0 / (9.0 * r) + b / (9.0 * s * r) - b * b / (12.0 * s * s * r);
        let bb = -b / (45.0 * r) + b * b / (15.0 * s * r) - 2.0 * r / 45.0;
        (a, bb)
    }
}

impl VolterraKernel for SecondInvariantKernel {
    fn a(&self, s: f64, beta: f64) -> f64 {
        let s = s + self.c;
        let b = beta + self.c;
        -(s * s - s * b + 0.75 * b * b) / (A_DEN as f64 * s * s * s.sqrt())
    }

    fn b(&self, s: f64, beta: f64) -> f64 {
        (beta - s) * self.b_reduced(s, beta)
    }

    fn b_reduced(&self, s: f64, beta: f64) -> f64 {
        let c = self.c;
        let sc = s + c;
        (2.0 * s + 3.0 * beta + 5.0 * c) / (B_DEN as f64 * sc * sc.sqrt())
    }

    fn b_reduced_ds(&self, s: f64, beta: f64) -> f64 {
        let c = self.c;
        let sc = s + c;
        -(s + 4.5 * beta + 5.5 * c) / (B_DEN as f64 * sc * sc * sc.sqrt())
    }

    fn k1(&self, s: f64, beta: f64) -> f64 {
        let c = self.c;
        let sc = s + c;
        let b = beta + c;
        let r5 = sc * sc * sc.sqrt();
        let d = beta - s;
        let bs = self.b_reduced_ds(s, beta);
        let a_beta = (sc - 1.5 * b) / (A_DEN as f64 * r5);
        let bred_beta = 3.0 / (B_DEN as f64 * sc * sc.sqrt());
        let tail_beta = bs - d * 4.5 / (B_DEN as f64 * r5);
        let dk = a_beta + 1.5 * bred_beta - tail_beta;
        0.5 * self.k(s, beta) + d * dk
    }
}

/// (q₁, q₂, q₃) with A/B = q₁/(S+c) + q₂/(β-S) + q₃/(2S+3β+5c), from the
/// residues of the factored forms. Scale invariant, so evaluated at β + c = 1.
pub fn kernel_residues() -> [Rational64; 3] {
    let r = Rational64::new;
    let one = r(1, 1);
    // A/B = (B_DEN/A_DEN) · -(s² - s + ¾) / (s (1 - s) (2s + 3))
    let k = r(B_DEN, A_DEN);
    let num = |s: Rational64| -k * (s * s - s + r(3, 4));
    let q1 = num(r(0, 1)) / ((one - r(0, 1)) * r(3, 1));
    let q2 = num(one) / (one * r(5, 1));
    let s3 = r(-3, 2);
    let q3 = num(s3) / (s3 * (one - s3));
    [q1, q2, q3]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolterraOptions {
    /// Smallest accepted |diagonal| relative to the row's absolute sum.
    pub pivot_threshold: f64,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        VolterraOptions {
            pivot_threshold: 1e-10,
        }
    }
}

/// dG/dβ by fourth-order differences.
pub fn derivative(g: &SampledFunction) -> Result<Vec<f64>, AbelError> {
    let n = g.len();
    if n < 5 {
        return Err(AbelError::TooFewSamples { needed: 5, got: n });
    }
    let f = &g.values;
    let k = 1.0 / (12.0 * g.h);
    let mut d = vec![0.0; n];
    d[0] = k * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = k * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for j in 2..n - 2 {
        d[j] = k * (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]);
    }
    let m = n - 1;
    d[m - 1] = k * (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4]);
    d[m] = k * (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3] + 3.0 * f[m - 4]);
    Ok(d)
}

/// F with F(0) = 0 solving G(β) = ∫₀^β √(β-S)[A F + B F'] dS on the grid of G.
///
/// The B F' term is integrated by parts and the equation differentiated once
/// in β, giving G' = ∫ (β-S)^{-1/2} k1(S, β) F(S) dS; that is discretized by
/// product integration with F linear between nodes and solved forward.
pub fn volterra_solve(
    g: &SampledFunction,
    kernel: &dyn VolterraKernel,
    opts: &VolterraOptions,
) -> Result<SampledFunction, AbelError> {
    let n = g.len();
    let dg = derivative(g)?;
    let h = g.h;
    let scale = gamma(0.5) * h.sqrt() / gamma(2.5);
    let mut f = vec![0.0; n];
    for i in 1..n {
        let beta = i as f64 * h;
        let w = product_weights(i, 0.5);
        let mut acc = 0.0;
        let mut row = 0.0;
        for j in 1..i {
            let t = scale * w[j] * kernel.k1(j as f64 * h, beta);
            acc += t * f[j];
            row += t.abs();
        }
        let pivot = scale * w[i] * kernel.k1(beta, beta);
        row += pivot.abs();
        if !(pivot.abs() >= opts.pivot_threshold * row) || pivot == 0.0 {
            return Err(AbelError::IllConditioned { beta, pivot });
        }
        f[i] = (dg[i] - acc) / pivot;
    }
    SampledFunction::new(h, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_under_three_halves() {
        let g = SampledFunction::from_fn(0.01, 101, |_| 1.0).unwrap();
        let j = frac_integrate(&g, 1.5).unwrap();
        for (s, v) in g.grid().iter().zip(&j.values) {
            let exact = s.powf(1.5) / gamma(2.5);
            assert!((v - exact).abs() < 1e-13, "{s}: {v} vs {exact}");
        }
    }

    #[test]
    fn first_order_is_trapezoid() {
        let g = SampledFunction::from_fn(0.1, 11, |s| s).unwrap();
        let j = frac_integrate(&g, 1.0).unwrap();
        for (s, v) in g.grid().iter().zip(&j.values) {
            assert!((v - s * s / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn seven_point_quadratic_weights() {
        let offs: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
        let w = sg_weights(&offs, 2, 2);
        let want = [5.0, 0.0, -3.0, -4.0, -3.0, 0.0, 5.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b / 42.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_inverts_to_zero() {
        let g = SampledFunction::from_fn(0.01, 50, |_| 0.0).unwrap();
        let h = abel_invert_threehalves(&g, &SmoothingOptions::default()).unwrap();
        assert!(h.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residues() {
        let q = kernel_residues();
        assert_eq!(q, [Rational64::new(-5, 4), Rational64::new(-3, 4), Rational64::new(6, 1)]);
    }

    #[test]
    fn factored_kernel_matches_expanded() {
        let k = SecondInvariantKernel { c: 1.3 };
        for (s, beta) in [(0.0, 0.5), (0.2, 0.5), (0.49, 0.5), (1.0, 3.0)] {
            let (a, b) = k.expanded(s, beta);
            assert!((a - k.a(s, beta)).abs() < 1e-14);
            assert!((b - k.b(s, beta)).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_k1_matches_differences() {
        let k = SecondInvariantKernel { c: 1.0 };
        let generic = FnKernel {
            a: |s, b| k.a(s, b),
            b: |s, b| k.b(s, b),
        };
        for (s, beta) in [(0.1, 0.5), (0.3, 0.8), (0.0, 0.2)] {
            assert!((k.k1(s, beta) - generic.k1(s, beta)).abs() < 1e-7);
        }
        // diagonal value k(β,β)/2 = 1/(24 √(β+c))
        assert!((k.k1(0.5, 0.5) - 1.0 / (24.0 * 1.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn noise_is_flagged() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        let g = SampledFunction::new(0.01, values).unwrap();
        assert!(matches!(
            abel_invert_threehalves(&g, &SmoothingOptions::default()),
            Err(AbelError::NoiseDominated { .. })
        ));
    }
}
