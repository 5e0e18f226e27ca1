//! Test functions and the equivariant spectral measure μ = Σ_k ρ(ħ² λ_k).

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::invariants::{self, InvariantError};
use crate::jet::Jet;
use crate::laplace::{self, LaplaceError};
use crate::profiles::MetricProfile;
use crate::quad::GaussLegendre;
use crate::tridiag::SymTridiag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("weight m must be nonzero")]
    ZeroWeight,
    #[error("alpha must be nonzero")]
    ZeroAlpha,
    #[error("spectrum truncated: need lambda up to {needed:.6e} but only {resolved:.6e} is resolved at N = {cells}")]
    TruncatedSpectrum {
        needed: f64,
        resolved: f64,
        cells: usize,
    },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Shape {
    Zero,
    /// exp(-1/(1-u²)), u = (τ - center)/width
    SmoothBump { center: f64, width: f64 },
    /// indicator of [0, level] convolved with a normalized bump of half-width ε
    MollifiedIndicator { level: f64, epsilon: f64 },
    /// e^{-Λτ} on |τ| ≤ radius, zero outside (not smooth at the cut)
    Exponential { lambda: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub shape: Shape,
    pub amplitude: f64,
}

fn bump_jet(u: Jet) -> Jet {
    let one = Jet::constant(1.0);
    (-(one - u * u).recip()).exp()
}

/// Derivatives 0..=4 of exp(-1/(1-u²)) in u; zero outside (-1, 1).
fn bump_derivs(u: f64) -> [f64; 5] {
    if u.abs() >= 1.0 {
        return [0.0; 5];
    }
    bump_jet(Jet::variable(u, 1.0)).derivatives()
}

const BUMP_RULE_NODES: usize = 64;

fn bump_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(BUMP_RULE_NODES))
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        // split at 0 so each half is resolved by the fixed rule
        let g = bump_rule();
        let f = |u: f64| bump_derivs(u)[0];
        g.integrate(-1.0, 0.0, f) + g.integrate(0.0, 1.0, f)
    })
}

/// ∫_{-1}^{z} η for the normalized bump η.
fn bump_cdf(z: f64) -> f64 {
    if z <= -1.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return 1.0;
    }
    let g = bump_rule();
    let f = |u: f64| bump_derivs(u)[0];
    // integrate over the shorter side for accuracy
    if z <= 0.0 {
        g.integrate(-1.0, z, f) / bump_mass()
    } else {
        1.0 - g.integrate(z, 1.0, f) / bump_mass()
    }
}

impl TestFunction {
    pub fn new(shape: Shape) -> Result<Self, MeasureError> {
        let bad = |m: &str| Err(MeasureError::InvalidTestFunction(m.to_string()));
        match shape {
            Shape::SmoothBump { width, center } if !(width > 0.0) || !center.is_finite() => {
                return bad("bump width must be positive")
            }
            Shape::MollifiedIndicator { level, epsilon }
                if !(epsilon > 0.0) || !(level > 2.0 * epsilon) =>
            {
                return bad("indicator needs 0 < 2 epsilon < level")
            }
            Shape::Exponential { radius, lambda } if !(radius > 0.0) || !lambda.is_finite() => {
                return bad("exponential truncation radius must be positive")
            }
            _ => {}
        }
        Ok(TestFunction {
            shape,
            amplitude: 1.0,
        })
    }

    pub fn zero() -> Self {
        TestFunction {
            shape: Shape::Zero,
            amplitude: 1.0,
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        TestFunction {
            amplitude: self.amplitude * k,
            ..self
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero) || self.amplitude == 0.0
    }

    /// Closed support interval, None for ρ ≡ 0.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_zero() {
            return None;
        }
        match self.shape {
            Shape::Zero => None,
            Shape::SmoothBump { center, width } => Some((center - width, center + width)),
            Shape::MollifiedIndicator { level, epsilon } => Some((-epsilon, level + epsilon)),
            Shape::Exponential { radius, .. } => Some((-radius, radius)),
        }
    }

    /// Intervals on which ρ is constant (with that constant).
    pub fn plateaus(&self) -> Vec<(f64, f64, f64)> {
        match self.shape {
            Shape::MollifiedIndicator { level, epsilon } if !self.is_zero() => {
                vec![(epsilon, level - epsilon, self.amplitude)]
            }
            _ => Vec::new(),
        }
    }

    /// Points where ρ or a derivative changes character (support ends, plateau
    /// edges, kinks); used as quadrature breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.shape {
            Shape::Zero => Vec::new(),
            Shape::SmoothBump { center, width } => vec![center - width, center, center + width],
            Shape::MollifiedIndicator { level, epsilon } => {
                vec![-epsilon, 0.0, epsilon, level - epsilon, level, level + epsilon]
            }
            Shape::Exponential { radius, .. } => vec![-radius, radius],
        }
    }

    /// ρ, ρ', ρ'', ρ''', ρ'''' at τ.
    pub fn derivs(&self, tau: f64) -> [f64; 5] {
        let mut d = match self.shape {
            Shape::Zero => [0.0; 5],
            Shape::SmoothBump { center, width } => {
                let u = (tau - center) / width;
                let b = bump_derivs(u);
                let mut out = [0.0; 5];
                let mut s = 1.0;
                for k in 0..5 {
                    out[k] = b[k] * s;
                    s /= width;
                }
                out
            }
            Shape::MollifiedIndicator { level, epsilon } => {
                let z1 = tau / epsilon;
                let z2 = (tau - level) / epsilon;
                let mut out = [0.0; 5];
                out[0] = bump_cdf(z1) - bump_cdf(z2);
                let b1 = bump_derivs(z1);
                let b2 = bump_derivs(z2);
                let mass = bump_mass();
                let mut s = 1.0 / epsilon;
                for k in 1..5 {
                    out[k] = s * (b1[k - 1] - b2[k - 1]) / mass;
                    s /= epsilon;
                }
                out
            }
            Shape::Exponential { lambda, radius } => {
                if tau.abs() > radius {
                    [0.0; 5]
                } else {
                    let e = (-lambda * tau).exp();
                    [
                        e,
                        -lambda * e,
                        lambda * lambda * e,
                        -lambda.powi(3) * e,
                        lambda.powi(4) * e,
                    ]
                }
            }
        };
        for x in d.iter_mut() {
            *x *= self.amplitude;
        }
        d
    }

    pub fn value(&self, tau: f64) -> f64 {
        self.derivs(tau)[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureOptions {
    /// Finite-volume cells for the mode operator.
    pub cells: usize,
    /// Combine eigenvalues from N and 2N cells (second-order Richardson).
    pub richardson: bool,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            cells: 8192,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSample {
    pub alpha: f64,
    pub m: i64,
    pub hbar: f64,
    pub mu: f64,
    pub cells: usize,
    /// Largest eigenvalue the sum needed.
    pub lambda_max: f64,
    /// False when the resolved spectrum stops short of sup supp ρ / ħ².
    pub complete: bool,
}

struct Spectra {
    coarse: SymTridiag,
    fine: Option<SymTridiag>,
}

impl Spectra {
    fn count_below(&self, x: f64) -> usize {
        self.fine.as_ref().unwrap_or(&self.coarse).count_below(x)
    }
    fn eigenvalue(&self, k: usize) -> f64 {
        match &self.fine {
            Some(f) => (4.0 * f.eigenvalue(k) - self.coarse.eigenvalue(k)) / 3.0,
            None => self.coarse.eigenvalue(k),
        }
    }
}

/// μ and whether the sum is complete; the sum over an incomplete spectrum
/// stops at the resolved cap.
pub fn measure_sample(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    m: i64,
    opts: &MeasureOptions,
) -> Result<MeasureSample, MeasureError> {
    if m == 0 {
        return Err(MeasureError::ZeroWeight);
    }
    if alpha == 0.0 {
        return Err(MeasureError::ZeroAlpha);
    }
    let hbar = alpha / m as f64;
    let h2 = hbar * hbar;
    let cap = laplace::resolved_cap(opts.cells);
    let Some((lo, hi)) = rho.support() else {
        return Ok(MeasureSample {
            alpha,
            m,
            hbar,
            mu: 0.0,
            cells: opts.cells,
            lambda_max: 0.0,
            complete: true,
        });
    };
    let needed = hi / h2;
    let complete = needed <= cap;
    let spectra = Spectra {
        coarse: laplace::laplacian_mode_operator(p, m, opts.cells)?,
        fine: if opts.richardson {
            Some(laplace::laplacian_mode_operator(p, m, 2 * opts.cells)?)
        } else {
            None
        },
    };
    let top = needed.min(cap);
    // eigenvalues within this relative margin of a plateau edge are evaluated
    // individually rather than counted
    let margin = 1e-3;
    let mut mu = 0.0;
    let mut counted_lo = usize::MAX;
    let mut counted_hi = 0;
    for (a, b, value) in rho.plateaus() {
        let a = (a / h2) * (1.0 + margin);
        let b = (b / h2).min(top) * (1.0 - margin);
        if b > a {
            let i = spectra.count_below(a);
            let j = spectra.count_below(b);
            mu += value * (j - i) as f64;
            counted_lo = i;
            counted_hi = j;
        }
    }
    let first = spectra.count_below((lo / h2) * (1.0 - margin.copysign(lo)));
    let last = spectra.count_below(top * (1.0 + margin));
    for k in first..last {
        if k >= counted_lo && k < counted_hi {
            continue;
        }
        let lam = spectra.eigenvalue(k);
        if lam <= top {
            mu += rho.value(h2 * lam);
        }
    }
    Ok(MeasureSample {
        alpha,
        m,
        hbar,
        mu,
        cells: opts.cells,
        lambda_max: needed,
        complete,
    })
}

pub fn spectral_measure(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    m: i64,
    opts: &MeasureOptions,
) -> Result<MeasureSample, MeasureError> {
    let s = measure_sample(p, rho, alpha, m, opts)?;
    if !s.complete {
        return Err(MeasureError::TruncatedSpectrum {
            needed: s.lambda_max,
            resolved: laplace::resolved_cap(opts.cells),
            cells: opts.cells,
        });
    }
    Ok(s)
}

/// (I₁, I₂): the leading and second invariants for ρ.
pub fn expansion_prediction(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    tol: f64,
) -> Result<(f64, f64), MeasureError> {
    let i1 = invariants::first_invariant_smooth(p, rho, alpha, tol)?;
    let i2 = invariants::second_invariant_smooth(p, rho, alpha, tol)?;
    Ok((i1, i2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub m: i64,
    pub hbar: f64,
    pub mu: f64,
    pub i1: f64,
    pub i2: f64,
    /// 2πħμ - I₁
    pub resid1: f64,
    /// (2πμ - I₁/ħ)/ħ - I₂
    pub resid2: f64,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub alpha: f64,
    pub i1: f64,
    pub i2: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log|resid1| against log ħ over complete rows.
    pub slope: Option<f64>,
    /// (2πμ - I₁/ħ)/ħ extrapolated linearly in ħ to ħ = 0 from the two
    /// smallest complete ħ; to be compared with I₂.
    pub extrapolated_second: Option<f64>,
}

pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

pub fn convergence_study(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    modes: &[i64],
    opts: &MeasureOptions,
    tol: f64,
) -> Result<ConvergenceStudy, MeasureError> {
    let (i1, i2) = expansion_prediction(p, rho, alpha, tol)?;
    let samples: Vec<MeasureSample> = modes
        .par_iter()
        .map(|&m| measure_sample(p, rho, alpha, m, opts))
        .collect::<Result<_, _>>()?;
    let rows: Vec<ConvergenceRow> = samples
        .iter()
        .map(|s| {
            let h = s.hbar.abs();
            let resid1 = 2.0 * PI * h * s.mu - i1;
            let resid2 = if rho.is_zero() {
                0.0
            } else {
                (2.0 * PI * s.mu - i1 / h) / h - i2
            };
            ConvergenceRow {
                m: s.m,
                hbar: h,
                mu: s.mu,
                i1,
                i2,
                resid1,
                resid2,
                complete: s.complete,
            }
        })
        .collect();
    let good: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.complete).collect();
    let hs: Vec<f64> = good.iter().map(|r| r.hbar).collect();
    let r1: Vec<f64> = good.iter().map(|r| r.resid1).collect();
    let slope = log_log_slope(&hs, &r1);
    let mut by_h: Vec<&&ConvergenceRow> = good.iter().collect();
    by_h.sort_by(|a, b| a.hbar.partial_cmp(&b.hbar).unwrap());
    let extrapolated_second = if by_h.len() >= 2 {
        let (a, b) = (by_h[0], by_h[1]);
        let sa = a.resid2 + i2;
        let sb = b.resid2 + i2;
        Some((b.hbar * sa - a.hbar * sb) / (b.hbar - a.hbar))
    } else {
        None
    };
    Ok(ConvergenceStudy {
        alpha,
        i1,
        i2,
        rows,
        slope,
        extrapolated_second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_mass_value() {
        // ∫ exp(-1/(1-u²)) du over (-1, 1)
        assert!((bump_mass() - 0.443_993_816_168_079_4).abs() < 1e-13);
    }

    #[test]
    fn indicator_is_one_on_plateau() {
        let r = TestFunction::new(Shape::MollifiedIndicator {
            level: 4.0,
            epsilon: 0.1,
        })
        .unwrap();
        assert_eq!(r.value(2.0), 1.0);
        assert_eq!(r.value(4.2), 0.0);
        assert!((r.value(4.0) - 0.5).abs() < 1e-14);
        assert!((r.value(0.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_differences() {
        let fs = [
            TestFunction::new(Shape::SmoothBump {
                center: 2.0,
                width: 0.5,
            })
            .unwrap(),
            TestFunction::new(Shape::MollifiedIndicator {
                level: 4.0,
                epsilon: 0.3,
            })
            .unwrap(),
        ];
        for f in fs {
            for tau in [1.7, 2.1, 3.85, 4.1] {
                let d = f.derivs(tau);
                for k in 0..4 {
                    let h = 1e-5;
                    let fd = (f.derivs(tau + h)[k] - f.derivs(tau - h)[k]) / (2.0 * h);
                    let scale = d[k + 1].abs().max(1e-3);
                    assert!(
                        (fd - d[k + 1]).abs() < 1e-5 * scale.max(d[k].abs()),
                        "k = {k}, tau = {tau}: {fd} vs {}",
                        d[k + 1]
                    );
                }
            }
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
    }
}
