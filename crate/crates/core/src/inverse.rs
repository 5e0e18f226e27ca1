//! Reconstruction of a single-well v from the invariant curves W and Q.
//!
//! With s = v(x), f₁ and f₂ the inverses of v on x > 0 and x < 0 (f₂ taken
//! with the sign flipped so both increase), S = s - c and β = λ/α² - c:
//!
//!   W(λ)/|α|  = ∫₀^β √(β-S) √(S+c) D(S+c) dS,      D = f₁' + f₂',
//!   Q(λ)/|α|⁵ = ∫₀^β √(β-S) [A F + B F'] dS,        F = 1/f₁' + 1/f₂'.
//!
//! D and F determine {f₁', f₂'} pointwise, hence v up to x ↦ -x.

use std::sync::{Arc, OnceLock};

use statrs::function::gamma::gamma;

use serde::Serialize;
use thiserror::Error;

use crate::abel::{
    self, AbelError, SampledFunction, SecondInvariantKernel, SmoothingOptions, VolterraKernel,
    VolterraOptions,
};
use crate::interp::{Hermite, InterpError, SplineEnd};
use crate::invariants::{self, InvariantCurve, InvariantError};
use crate::quad::GaussLegendre;
use crate::profiles::{self, MetricProfile, ProfileError, SingleWellCertificate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseError {
    #[error("W never exceeds the threshold {threshold:e} after a zero sample; c is not bracketed")]
    ThresholdNotBracketed { threshold: f64 },
    #[error("the invariant curve has no {0} values")]
    MissingCurve(&'static str),
    #[error("only {got} samples above the threshold, need {needed}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("discriminant {value:.3e} < 0 at s = {s} (relative tolerance {tol:e})")]
    NegativeDiscriminant { s: f64, value: f64, tol: f64 },
    #[error("branch {branch} is not increasing at s = {s}")]
    NonMonotoneBranch { branch: usize, s: f64 },
    #[error(transparent)]
    Abel(#[from] AbelError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

impl InverseError {
    pub fn stage(&self) -> &'static str {
        match self {
            InverseError::ThresholdNotBracketed { .. } => "detect_c",
            InverseError::MissingCurve(_) | InverseError::TooFewSamples { .. } => "input",
            InverseError::NegativeDiscriminant { .. } => "split_branches",
            InverseError::NonMonotoneBranch { .. } => "assemble_profile",
            InverseError::Abel(AbelError::IllConditioned { .. }) => "recover_recip_sum",
            InverseError::Abel(_) => "recover_sum",
            InverseError::Interp(_) => "interpolation",
            InverseError::Invariant(_) => "invariants",
            InverseError::Profile(_) => "certify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseOptions {
    /// Points on the uniform S grid, including S = 0.
    pub s_points: usize,
    /// W > threshold·max W counts as nonzero.
    pub threshold: f64,
    pub smoothing: SmoothingOptions,
    pub volterra: VolterraOptions,
    /// Discriminants below -neg_tol·D² are an error.
    pub neg_tol: f64,
    /// Discriminants below split_tol·D² are treated as zero (equal branches).
    pub split_tol: f64,
    /// Leading terms of the √β expansion removed before numerical inversion.
    pub series_terms: usize,
    /// The expansion is fitted on β ≤ series_window·β_max.
    pub series_window: f64,
    /// Points on the output x grid.
    pub x_points: usize,
}

impl Default for InverseOptions {
    fn default() -> Self {
        InverseOptions {
            s_points: 400,
            threshold: 1e-8,
            smoothing: SmoothingOptions::default(),
            volterra: VolterraOptions::default(),
            neg_tol: 1e-2,
            split_tol: 1e-4,
            series_terms: 6,
            series_window: 0.15,
            x_points: 401,
        }
    }
}

fn first_above(curve: &InvariantCurve, rel: f64) -> Result<(usize, f64), InverseError> {
    let w = curve.w.as_ref().ok_or(InverseError::MissingCurve("W"))?;
    let max = w.iter().cloned().fold(0.0, f64::max);
    let threshold = rel * max;
    match w.iter().position(|&x| x > threshold) {
        Some(i) if i > 0 && max > 0.0 => Ok((i, threshold)),
        _ => Err(InverseError::ThresholdNotBracketed { threshold }),
    }
}

/// Residual of the least-squares fit W ≈ Σ_{m=2}^{6} w_m β^{m/2}, β = (λ - λ₀)/α².
fn onset_residual(lam: &[f64], w: &[f64], l0: f64, a2: f64) -> f64 {
    let beta: Vec<f64> = lam.iter().map(|&l| ((l - l0) / a2).max(0.0)).collect();
    let cols: Vec<Vec<f64>> = (2..=6)
        .map(|m| beta.iter().map(|b| b.powf(0.5 * m as f64)).collect())
        .collect();
    let Some(coef) = lstsq(cols.clone(), w.to_vec()) else {
        return f64::INFINITY;
    };
    (0..w.len())
        .map(|i| {
            let fit: f64 = coef.iter().zip(&cols).map(|(c, col)| c * col[i]).sum();
            (w[i] - fit).powi(2)
        })
        .sum()
}

/// c from sampled W alone: the onset λ* is bracketed by the last zero and the
/// first nonzero sample and located by fitting the onset expansion in √β to
/// the first samples above it.
pub fn detect_c(curve: &InvariantCurve, threshold: f64) -> Result<f64, InverseError> {
    let (i, thr) = first_above(curve, threshold)?;
    let w = curve.w.as_ref().unwrap();
    let lam = &curve.lambda;
    let a2 = curve.alpha * curve.alpha;
    let end = (i + 10).min(lam.len());
    let (ls, ws) = (&lam[i..end], &w[i..end]);
    let (mut lo, mut hi) = (lam[i - 1], lam[i]);
    if ls.len() < 6 {
        // too few points for the model: linear interpolation of the crossing
        let t = (thr - w[i - 1]) / (w[i] - w[i - 1]);
        return Ok((lo + t * (hi - lo)) / a2);
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let f = |l0: f64| onset_residual(ls, ws, l0, a2);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(0.5 * (lo + hi) / a2)
}

/// c with W available as a function: bisection on W(λ) > threshold between the
/// bracketing grid points.
pub fn detect_c_with<F>(curve: &InvariantCurve, threshold: f64, w: F) -> Result<f64, InverseError>
where
    F: Fn(f64) -> Result<f64, InvariantError>,
{
    let (i, thr) = first_above(curve, threshold)?;
    let (mut lo, mut hi) = (curve.lambda[i - 1], curve.lambda[i]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if w(mid)? > thr {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi) / (curve.alpha * curve.alpha))
}

/// A function of s = c + S on the uniform S grid j·h, j = 0..n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SCurve {
    pub c: f64,
    pub h: f64,
    /// values[0] is at s = c, where D diverges (stored as +inf).
    pub values: Vec<f64>,
    /// lim √S·D for D, lim F/√S for F, as S → 0.
    pub edge_coefficient: f64,
}

impl SCurve {
    pub fn s(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|j| self.c + j as f64 * self.h)
            .collect()
    }

    pub fn big_s(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| j as f64 * self.h).collect()
    }
}

/// Least squares min |A x - y| by Householder QR; A given by columns.
fn lstsq(mut cols: Vec<Vec<f64>>, mut y: Vec<f64>) -> Option<Vec<f64>> {
    let n = cols.len();
    let m = y.len();
    if m < n {
        return None;
    }
    // equilibrate columns
    let scale: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    for (c, s) in cols.iter_mut().zip(&scale) {
        c.iter_mut().for_each(|v| *v /= s);
    }
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let norm = cols[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
        let mut u: Vec<f64> = cols[k][k..].to_vec();
        u[0] -= alpha;
        let un = u.iter().map(|v| v * v).sum::<f64>();
        diag[k] = alpha;
        if un == 0.0 {
            continue;
        }
        let reflect = |v: &mut [f64]| {
            let d: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() * 2.0 / un;
            v.iter_mut().zip(&u).for_each(|(x, a)| *x -= d * a);
        };
        for col in cols.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut y[k..]);
    }
    if diag.iter().any(|d| d.abs() < 1e-13 * diag[0].abs()) {
        return None;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| cols[j][i] * x[j]).sum();
        x[i] = (y[i] - s) / diag[i];
    }
    let _ = m;
    Some(x.iter().zip(&scale).map(|(v, s)| v / s).collect())
}

/// Samples (√β, y/scale) with β = λ/α² - c > 0.
fn samples(curve: &InvariantCurve, y: &[f64], c: f64, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let a2 = curve.alpha * curve.alpha;
    let mut t = Vec::new();
    let mut g = Vec::new();
    for (&l, &v) in curve.lambda.iter().zip(y) {
        let beta = l / a2 - c;
        if beta > 0.0 && t.last().map_or(true, |&p| beta.sqrt() > p) {
            t.push(beta.sqrt());
            g.push(v / scale);
        }
    }
    (t, g)
}

/// G(β) = Σ coef_k basis_k(β) + R(β): the expansion is fitted on the samples
/// with β ≤ window·β_max, and R is interpolated in √β onto the S grid.
struct Split {
    coef: Vec<f64>,
    remainder: SampledFunction,
}

fn split_series<B>(
    t: &[f64],
    g: &[f64],
    basis: B,
    terms: usize,
    opts: &InverseOptions,
) -> Result<Split, InverseError>
where
    B: Fn(usize, f64) -> f64,
{
    if t.len() < 5 {
        return Err(InverseError::TooFewSamples {
            needed: 5,
            got: t.len(),
        });
    }
    let beta_max = t.last().unwrap().powi(2);
    let n = opts.s_points.max(8);
    let h = beta_max / (n - 1) as f64;
    let window = opts.series_window * beta_max;
    let fit: Vec<usize> = (0..t.len()).filter(|&i| t[i] * t[i] <= window).collect();
    // at least two samples per coefficient
    let terms = terms.min(fit.len() / 2);
    let coef = if terms == 0 {
        Vec::new()
    } else {
        let cols = (0..terms)
            .map(|k| fit.iter().map(|&i| basis(k, t[i] * t[i])).collect())
            .collect();
        let y = fit.iter().map(|&i| g[i]).collect();
        lstsq(cols, y).ok_or_else(|| InverseError::TooFewSamples {
            needed: 2 * terms,
            got: fit.len(),
        })?
    };
    let series = |beta: f64| -> f64 { coef.iter().enumerate().map(|(k, a)| a * basis(k, beta)).sum() };
    let mut tt = vec![0.0];
    let mut r = vec![0.0];
    for (&ti, &gi) in t.iter().zip(g) {
        tt.push(ti);
        r.push(gi - series(ti * ti));
    }
    let sp = Hermite::cubic_spline(&tt, &r, SplineEnd::NotAKnot)?;
    let remainder = SampledFunction::from_fn(h, n, |b| sp.eval(b.sqrt()))?;
    Ok(Split { coef, remainder })
}

/// D(s) = f₁'(s) + f₂'(s) from W by inverting the J^{3/2} relation.
///
/// With G = W/|α| = Σ g_m β^{m/2} (m ≥ 2) near the threshold, the leading
/// terms are inverted exactly (β^{m/2} comes from
/// Γ(m/2+1)/(Γ(3/2)Γ((m-1)/2)) S^{(m-3)/2}) and only the remainder numerically.
pub fn recover_sum(
    curve: &InvariantCurve,
    c: f64,
    opts: &InverseOptions,
) -> Result<SCurve, InverseError> {
    let w = curve.w.as_ref().ok_or(InverseError::MissingCurve("W"))?;
    let (t, g) = samples(curve, w, c, curve.alpha.abs());
    let split = split_series(&t, &g, |k, b| b.powf(0.5 * (k + 2) as f64), opts.series_terms, opts)?;
    let hr = abel::abel_invert_threehalves(&split.remainder, &opts.smoothing)?;
    let inv: Vec<f64> = (0..split.coef.len())
        .map(|k| {
            let m = (k + 2) as f64;
            gamma(0.5 * m + 1.0) / (gamma(1.5) * gamma(0.5 * (m - 1.0)))
        })
        .collect();
    let h = split.remainder.h;
    let mut values: Vec<f64> = hr
        .values
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let big = j as f64 * h;
            let series: f64 = (0..split.coef.len())
                .map(|k| split.coef[k] * inv[k] * big.powf(0.5 * (k as f64 - 1.0)))
                .sum();
            (r + series) / (big + c).sqrt()
        })
        .collect();
    values[0] = f64::INFINITY;
    let edge = split.coef.first().map_or(f64::NAN, |g2| g2 * inv[0] / c.sqrt());
    Ok(SCurve {
        c,
        h,
        values,
        edge_coefficient: edge,
    })
}

/// The Gauss–Legendre rule used for the basis responses.
fn gl_nodes() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(48))
}

/// ∫₀^β √(β-S) k(S, β) S^{p} dS with S = β sin²θ.
fn kernel_response(kernel: &SecondInvariantKernel, p: f64, beta: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    let inner = gl_nodes().integrate(0.0, std::f64::consts::FRAC_PI_2, |th| {
        let (sn, cs) = th.sin_cos();
        2.0 * sn.powf(2.0 * p + 1.0) * cs * cs * kernel.k(beta * sn * sn, beta)
    });
    beta.powf(p + 1.5) * inner
}

/// F(s) = 1/f₁'(s) + 1/f₂'(s) from Q by solving the Volterra relation.
///
/// F = Σ φ_k S^{k/2} near S = 0; the responses of the leading terms are
/// fitted to Q near the threshold and the remainder is solved numerically.
pub fn recover_recip_sum(
    curve: &InvariantCurve,
    c: f64,
    opts: &InverseOptions,
) -> Result<SCurve, InverseError> {
    let q = curve.q.as_ref().ok_or(InverseError::MissingCurve("Q"))?;
    let (t, g) = samples(curve, q, c, curve.alpha.abs().powi(5));
    let kernel = SecondInvariantKernel { c };
    let power = |k: usize| 0.5 * (k + 1) as f64;
    let split = split_series(
        &t,
        &g,
        |k, b| kernel_response(&kernel, power(k), b),
        opts.series_terms,
        opts,
    )?;
    let fr = abel::volterra_solve(&split.remainder, &kernel, &opts.volterra)?;
    let h = split.remainder.h;
    let values = fr
        .values
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let big = j as f64 * h;
            r + (0..split.coef.len())
                .map(|k| split.coef[k] * big.powf(power(k)))
                .sum::<f64>()
        })
        .collect();
    Ok(SCurve {
        c,
        h,
        values,
        edge_coefficient: split.coef.first().copied().unwrap_or(f64::NAN),
    })
}

/// {f₁', f₂'} on the S grid (index 0, where both diverge, is skipped).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPair {
    pub c: f64,
    pub h: f64,
    /// S values j·h, j ≥ 1.
    pub big_s: Vec<f64>,
    /// Pointwise larger and smaller root.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Continuity-tracked branches.
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// true where `first` took the larger root.
    pub first_is_larger: Vec<bool>,
    /// Grid points whose discriminant fell within the split tolerance.
    pub near_degenerate: usize,
    /// lim √S f_i'(S) = 1/√(2 v''(0)), the same on both sides.
    pub edge_coefficient: f64,
}

pub fn split_branches(
    d: &SCurve,
    f: &SCurve,
    opts: &InverseOptions,
) -> Result<BranchPair, InverseError> {
    let n = d.values.len().min(f.values.len());
    let mut big_s = Vec::new();
    let mut p = Vec::new();
    let mut q = Vec::new();
    let mut near = 0;
    for j in 1..n {
        let (dj, fj) = (d.values[j], f.values[j]);
        let disc = dj * dj - 4.0 * dj / fj;
        let scale = dj * dj;
        if !(disc >= -opts.neg_tol * scale) {
            return Err(InverseError::NegativeDiscriminant {
                s: d.c + j as f64 * d.h,
                value: disc,
                tol: opts.neg_tol,
            });
        }
        let r = if disc <= opts.split_tol * scale {
            near += 1;
            0.0
        } else {
            disc.sqrt()
        };
        big_s.push(j as f64 * d.h);
        p.push(0.5 * (dj + r));
        q.push(0.5 * (dj - r));
    }
    // the signed gap first - second is followed by linear extrapolation from
    // the last two split points, so a crossing carries through a clamped zone
    let mut first = Vec::with_capacity(p.len());
    let mut second = Vec::with_capacity(p.len());
    let mut labels = Vec::with_capacity(p.len());
    let mut history: Vec<(f64, f64)> = Vec::new();
    for k in 0..p.len() {
        let r = p[k] - q[k];
        let keep = if r == 0.0 {
            true
        } else {
            let keep = match history.as_slice() {
                [.., (k1, d1), (k2, d2)] => {
                    let guess = d2 + (k as f64 - k2) * (d2 - d1) / (k2 - k1);
                    (r - guess).abs() <= (r + guess).abs()
                }
                [(_, d)] => *d > 0.0,
                [] => true,
            };
            history.push((k as f64, if keep { r } else { -r }));
            keep
        };
        let (a, b) = if keep { (p[k], q[k]) } else { (q[k], p[k]) };
        first.push(a);
        second.push(b);
        labels.push(keep);
    }
    // √S D → 2a and F/√S → 2/a; the geometric mean uses both
    let edge = if f.edge_coefficient > 0.0 && d.edge_coefficient > 0.0 {
        (d.edge_coefficient / f.edge_coefficient).sqrt()
    } else {
        0.5 * d.edge_coefficient
    };
    Ok(BranchPair {
        c: d.c,
        h: d.h,
        big_s,
        p,
        q,
        first,
        second,
        first_is_larger: labels,
        near_degenerate: near,
        edge_coefficient: edge,
    })
}

#[derive(Clone, Serialize)]
pub struct ReconstructionResult {
    pub c: f64,
    /// v''(0) = 1/(2a²), a = lim √S f_i'(S).
    pub curvature: f64,
    /// √S on the grid and the positions f₁, f₂ (|x| of the level sets) there.
    pub tau: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub x_max: f64,
    /// Which half came from `first` is not determined by the data.
    pub reflection: &'static str,
    pub certificate: SingleWellCertificate,
    #[serde(skip)]
    pub profile: MetricProfile,
}

impl std::fmt::Debug for ReconstructionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReconstructionResult")
            .field("c", &self.c)
            .field("curvature", &self.curvature)
            .field("x_max", &self.x_max)
            .finish()
    }
}

/// Integrates one branch in τ = √S, where dx/dτ = 2τ f'(τ²) is regular, and
/// returns τ(x) as a Hermite cubic with the exact slopes dτ/dx.
fn integrate_branch(
    tau: &[f64],
    b: &[f64],
    a: f64,
    branch: usize,
    c: f64,
) -> Result<(Vec<f64>, Hermite), InverseError> {
    let mut g = vec![2.0 * a];
    for (k, (&t, &bk)) in tau[1..].iter().zip(b).enumerate() {
        if !(bk > 0.0) {
            return Err(InverseError::NonMonotoneBranch {
                branch,
                s: c + tau[k + 1] * tau[k + 1],
            });
        }
        g.push(2.0 * t * bk);
    }
    let sp = Hermite::cubic_spline(tau, &g, SplineEnd::NotAKnot)?;
    let x = sp.cumulative_integral();
    if let Some(i) = x.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(InverseError::NonMonotoneBranch {
            branch,
            s: c + tau[i + 1] * tau[i + 1],
        });
    }
    let slopes: Vec<f64> = g.iter().map(|v| 1.0 / v).collect();
    Ok((x.clone(), Hermite::new(&x, tau, &slopes)?))
}

pub fn assemble_profile(
    bp: &BranchPair,
    opts: &InverseOptions,
) -> Result<ReconstructionResult, InverseError> {
    if bp.big_s.len() < 8 {
        return Err(InverseError::TooFewSamples {
            needed: 8,
            got: bp.big_s.len(),
        });
    }
    let a = bp.edge_coefficient;
    if !(a > 0.0) {
        return Err(InverseError::NonMonotoneBranch { branch: 0, s: bp.c });
    }
    let _ = opts;
    let mut tau = vec![0.0];
    tau.extend(bp.big_s.iter().map(|s| s.sqrt()));
    let (f1, side1) = integrate_branch(&tau, &bp.first, a, 1, bp.c)?;
    let (f2, side2) = integrate_branch(&tau, &bp.second, a, 2, bp.c)?;
    let x_max = f1.last().unwrap().min(*f2.last().unwrap());
    let c = bp.c;
    let sides = Arc::new([side1, side2]);
    let jet = {
        let sides = Arc::clone(&sides);
        move |x: f64| -> [f64; 4] {
            let (side, sign) = if x >= 0.0 { (&sides[0], 1.0) } else { (&sides[1], -1.0) };
            let [t, t1, t2, t3] = side.eval_all(x.abs());
            [
                c + t * t,
                sign * 2.0 * t * t1,
                2.0 * (t1 * t1 + t * t2),
                sign * (6.0 * t1 * t2 + 2.0 * t * t3),
            ]
        }
    };
    let profile = profiles::make_explicit("reconstructed", jet).with_domain(-x_max, x_max);
    let certificate = profiles::certify_single_well(&profile, profiles::DEFAULT_CERT_GRID)?;
    let x = invariants::linspace(-x_max, x_max, opts.x_points.max(3));
    let v = x.iter().map(|&t| profile.v(t)).collect();
    Ok(ReconstructionResult {
        c,
        curvature: 1.0 / (2.0 * a * a),
        tau,
        f1,
        f2,
        x,
        v,
        x_max,
        reflection: "undetermined",
        certificate,
        profile,
    })
}

/// The full inverse pipeline on given curves (W and Q on one λ grid).
pub fn reconstruct(
    curve: &InvariantCurve,
    c: f64,
    opts: &InverseOptions,
) -> Result<(SCurve, SCurve, BranchPair, ReconstructionResult), InverseError> {
    let d = recover_sum(curve, c, opts)?;
    let f = recover_recip_sum(curve, c, opts)?;
    let bp = split_branches(&d, &f, opts)?;
    let r = assemble_profile(&bp, opts)?;
    Ok((d, f, bp, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundtripOptions {
    pub lambda_points: usize,
    /// The λ range reaches α² max(v(±x_cover)).
    pub x_cover: f64,
    /// Errors are measured on |x| ≤ x_eval.
    pub x_eval: f64,
    pub inverse: InverseOptions,
}

impl Default for RoundtripOptions {
    fn default() -> Self {
        RoundtripOptions {
            lambda_points: 200,
            x_cover: 0.85,
            x_eval: 0.8,
            inverse: InverseOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageErrors {
    pub c_error: f64,
    /// Max relative error of D and F on the S grid.
    pub sum_rel_error: f64,
    pub recip_sum_rel_error: f64,
    /// Max relative error of the better-matching branch assignment.
    pub branch_rel_error: f64,
    pub near_degenerate: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub alpha: f64,
    pub c_true: f64,
    pub c_detected: f64,
    pub curvature_true: f64,
    pub curvature_recovered: f64,
    pub x_max: f64,
    pub l_inf_error: f64,
    pub l2_error: f64,
    /// "identity" or "reflection": the orientation with the smaller error.
    pub orientation: &'static str,
    pub l_inf_identity: f64,
    pub l_inf_reflection: f64,
    pub stages: StageErrors,
    #[serde(skip)]
    pub reconstruction: ReconstructionResult,
    #[serde(skip)]
    pub curve: InvariantCurve,
}

/// λ grid for a round trip: from just below α²c to α² max(v(±x_cover)).
pub fn roundtrip_lambda_grid(p: &MetricProfile, alpha: f64, opts: &RoundtripOptions) -> Vec<f64> {
    let a2 = alpha * alpha;
    let c = p.v(0.0);
    let top = p.v(opts.x_cover).max(p.v(-opts.x_cover));
    let n = opts.lambda_points.max(8);
    // first point below the threshold, the rest above
    let step = (top - c) / (n - 1) as f64;
    let mut grid = vec![a2 * (c - 0.5 * step)];
    grid.extend((1..n).map(|i| a2 * (c + step * i as f64)));
    grid
}

/// Derivatives of the inverses of v on each side at s, the forward oracle.
pub fn true_branches(p: &MetricProfile, s: f64) -> Option<(f64, f64)> {
    let x1 = p.level_crossing(s, 1.0)?;
    let x2 = p.level_crossing(s, -1.0)?;
    Some((1.0 / p.v1(x1), -1.0 / p.v1(x2)))
}

pub fn roundtrip(
    p: &MetricProfile,
    alpha: f64,
    opts: &RoundtripOptions,
) -> Result<RoundtripReport, InverseError> {
    let cert = profiles::certify_single_well(p, profiles::DEFAULT_CERT_GRID)?;
    let lambdas = roundtrip_lambda_grid(p, alpha, opts);
    let mut curve = invariants::invariant_curve(p, alpha, &lambdas)?;
    let c = detect_c_with(&curve, opts.inverse.threshold, |l| invariants::area(p, l, alpha))?;
    curve.c = Some(c);
    let (d, f, bp, rec) = reconstruct(&curve, c, &opts.inverse)?;

    let x = invariants::linspace(-opts.x_eval, opts.x_eval, 401);
    let errs = |sign: f64| -> (f64, f64) {
        let mut linf: f64 = 0.0;
        let mut l2 = 0.0;
        for &t in &x {
            let e = (rec.profile.v(sign * t) - p.v(t)).abs();
            linf = linf.max(e);
            l2 += e * e;
        }
        (linf, (l2 / x.len() as f64).sqrt())
    };
    let (id_inf, id_l2) = errs(1.0);
    let (re_inf, re_l2) = errs(-1.0);
    let (l_inf_error, l2_error, orientation) = if id_inf <= re_inf {
        (id_inf, id_l2, "identity")
    } else {
        (re_inf, re_l2, "reflection")
    };

    let mut sum_err: f64 = 0.0;
    let mut recip_err: f64 = 0.0;
    let mut br_id: f64 = 0.0;
    let mut br_sw: f64 = 0.0;
    for (k, &big_s) in bp.big_s.iter().enumerate() {
        let Some((t1, t2)) = true_branches(p, c + big_s) else {
            continue;
        };
        let j = k + 1;
        sum_err = sum_err.max(((d.values[j] - (t1 + t2)) / (t1 + t2)).abs());
        let fr = 1.0 / t1 + 1.0 / t2;
        recip_err = recip_err.max(((f.values[j] - fr) / fr).abs());
        br_id = br_id.max(((bp.first[k] - t1) / t1).abs().max(((bp.second[k] - t2) / t2).abs()));
        br_sw = br_sw.max(((bp.first[k] - t2) / t2).abs().max(((bp.second[k] - t1) / t1).abs()));
    }
    Ok(RoundtripReport {
        alpha,
        c_true: cert.c,
        c_detected: c,
        curvature_true: cert.curvature,
        curvature_recovered: rec.curvature,
        x_max: rec.x_max,
        l_inf_error,
        l2_error,
        orientation,
        l_inf_identity: id_inf,
        l_inf_reflection: re_inf,
        stages: StageErrors {
            c_error: c - cert.c,
            sum_rel_error: sum_err,
            recip_sum_rel_error: recip_err,
            branch_rel_error: br_id.min(br_sw),
            near_degenerate: bp.near_degenerate,
        },
        reconstruction: rec,
        curve,
    })
}
