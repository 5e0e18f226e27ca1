//! The two leading invariants of the equivariant spectral measure.
//!
//! Smooth forms integrate ρ(τ) and ρ⁽²⁾…ρ⁽⁴⁾(τ), τ = ξ²/v + α²v, over the
//! (x, ξ) plane. Region forms are the λ-resolved versions: the area W(λ) of
//! {τ ≤ λ, ξ > 0} and the second-invariant function Q(λ) over the same region.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::measure::TestFunction;
use crate::profiles::MetricProfile;
use crate::quad::{self, GaussLegendre, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("alpha must be nonzero")]
    ZeroAlpha,
    #[error("no crossing of level {level} on the {side} half-interval")]
    RootFinding { level: f64, side: &'static str },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// How the square-root vanishing of ξ_max at the region boundary is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRule {
    /// x = x_b (1 - u²) on each half, which makes the integrand smooth in u.
    #[default]
    SquareRootSubstitution,
}

/// {(x, ξ): ξ > 0, ξ²/v + α²v ≤ λ} described by its x-extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRegion {
    pub lambda: f64,
    pub alpha: f64,
    pub x_left: f64,
    pub x_right: f64,
}

impl PhaseRegion {
    /// None when the region is empty (λ ≤ α² min v).
    pub fn new(p: &MetricProfile, lambda: f64, alpha: f64) -> Result<Option<Self>, InvariantError> {
        if alpha == 0.0 {
            return Err(InvariantError::ZeroAlpha);
        }
        let level = lambda / (alpha * alpha);
        if !(level > p.v(0.0)) {
            return Ok(None);
        }
        let x_right = p
            .level_crossing(level, 1.0)
            .ok_or(InvariantError::RootFinding { level, side: "right" })?;
        let x_left = p
            .level_crossing(level, -1.0)
            .ok_or(InvariantError::RootFinding { level, side: "left" })?;
        Ok(Some(PhaseRegion {
            lambda,
            alpha,
            x_left,
            x_right,
        }))
    }

    pub fn xi_max(&self, v: f64) -> f64 {
        let a2 = self.alpha * self.alpha;
        (self.lambda * v - a2 * v * v).max(0.0).sqrt()
    }
}

/// ∫ g over [x_left, x_right] where g vanishes like a square root at both
/// ends; each half is mapped by x = x_b(1 - u²).
fn half_intervals<F: Fn(f64) -> f64>(
    r: &PhaseRegion,
    g: F,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64, QuadError> {
    let mut total = 0.0;
    for xb in [r.x_right, r.x_left] {
        let w = 2.0 * xb.abs();
        if w == 0.0 {
            continue;
        }
        total += quad::adaptive(
            |u| {
                let x = xb * (1.0 - u * u);
                w * u * g(x)
            },
            0.0,
            1.0,
            0.5 * abs_tol,
            rel_tol,
        )?;
    }
    Ok(total)
}

const REGION_TOL: f64 = 1e-13;

/// W(λ) = ∫ √(λv - α²v²) dx over {v < λ/α²}.
pub fn area(p: &MetricProfile, lambda: f64, alpha: f64) -> Result<f64, InvariantError> {
    let Some(r) = PhaseRegion::new(p, lambda, alpha)? else {
        return Ok(0.0);
    };
    // the integrand carries a relative error of about ε·c/(level - c)
    let level = lambda / (alpha * alpha);
    let c = p.v(0.0);
    let rel = REGION_TOL.max(64.0 * f64::EPSILON * level / (level - c));
    Ok(half_intervals(&r, |x| r.xi_max(p.v(x)), 0.0, rel)?)
}

/// ξ-integrated second-invariant density at x (without the √ factor).
pub fn q_bracket(jet: [f64; 4], lambda: f64, alpha: f64) -> f64 {
    let [v, v1, v2, _] = jet;
    let a2 = alpha * alpha;
    let a4 = a2 * a2;
    let l2 = lambda * lambda;
    let v12 = v1 * v1;
    -a4 * v12 / (9.0 * v) - lambda * a2 * v2 / (45.0 * v) + lambda * a2 * v12 / (9.0 * v * v)
        + l2 * v2 / (15.0 * v * v)
        - 2.0 * a4 * v2 / 45.0
        - l2 * v12 / (12.0 * v * v * v)
}

/// Q(λ) from the ξ-integrated one-dimensional form.
pub fn second_region(p: &MetricProfile, lambda: f64, alpha: f64) -> Result<f64, InvariantError> {
    second_region_tol(p, lambda, alpha, REGION_TOL)
}

/// Q(λ) with tolerance `rel` against the scale of |integrand|; for profiles
/// whose v'' is only piecewise smooth.
pub fn second_region_tol(
    p: &MetricProfile,
    lambda: f64,
    alpha: f64,
    rel: f64,
) -> Result<f64, InvariantError> {
    let Some(r) = PhaseRegion::new(p, lambda, alpha)? else {
        return Ok(0.0);
    };
    let g = |x: f64| {
        let j = p.jet(x);
        r.xi_max(j[0]) * q_bracket(j, lambda, alpha)
    };
    // Q changes sign, so the tolerance is set against the scale of |integrand|
    let scale = half_intervals(&r, |x| g(x).abs(), 0.0, 1e-6)?;
    Ok(half_intervals(&r, g, rel * scale, 0.0)?)
}

/// The ρ'''-only kernel K(x, ξ): the second invariant is ∫ K ρ'''(τ).
pub fn terceira_kernel(jet: [f64; 4], alpha: f64, xi: f64) -> f64 {
    let [v, v1, v2, _] = jet;
    let a2 = alpha * alpha;
    let x2 = xi * xi;
    let x4 = x2 * x2;
    let vv = v * v;
    let from_second = -0.5 * (2.0 * x4 / (3.0 * vv) * (v2 / vv - 2.0 * v1 * v1 / (vv * v))
        - 2.0 * a2 * v2 * x2 / vv);
    let b = a2 - x2 / vv;
    let third = -(2.0 * x2 / (3.0 * v))
        * (x2 * (3.0 * v1 * v1 / (vv * vv) - v2 / (vv * v)) + a2 * (v2 / v - v1 * v1 / vv))
        - v1 * v1 / (3.0 * v) * b * b;
    let from_fourth =
        v1 * v1 / (2.0 * v) * (5.0 * x4 / (2.0 * vv * vv) - 3.0 * x2 * a2 / vv + a2 * a2 / 2.0);
    from_second + third + from_fourth
}

/// Q(λ) by direct integration of K over the region, ξ first.
pub fn second_region_2d(p: &MetricProfile, lambda: f64, alpha: f64) -> Result<f64, InvariantError> {
    let Some(r) = PhaseRegion::new(p, lambda, alpha)? else {
        return Ok(0.0);
    };
    // K is a polynomial of degree 4 in ξ: three nodes are exact
    let gl = GaussLegendre::new(3);
    let g = |x: f64| {
        let j = p.jet(x);
        let xm = r.xi_max(j[0]);
        gl.integrate(0.0, xm, |xi| terceira_kernel(j, alpha, xi))
    };
    let scale = half_intervals(&r, |x| g(x).abs(), 0.0, 1e-6)?;
    Ok(half_intervals(&r, g, REGION_TOL * scale, 0.0)?)
}

/// Coefficients of ρ'', ρ''', ρ'''' in the second invariant.
pub fn inv2_coefficients(jet: [f64; 4], alpha: f64, xi: f64) -> [f64; 3] {
    let [v, v1, v2, _] = jet;
    let a2 = alpha * alpha;
    let x2 = xi * xi;
    let vv = v * v;
    let b = a2 - x2 / vv;
    let c2 = 0.5 / v * (x2 * (v2 / vv - 2.0 * v1 * v1 / (vv * v)) - a2 * v2);
    let c3 = -(2.0 * x2 / (3.0 * v))
        * (x2 * (3.0 * v1 * v1 / (vv * vv) - v2 / (vv * v)) + a2 * (v2 / v - v1 * v1 / vv))
        - v1 * v1 / (3.0 * v) * b * b;
    let c4 = -(x2 * v1 * v1 / (2.0 * vv)) * b * b;
    [c2, c3, c4]
}

/// Which integrand the smooth second invariant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondForm {
    /// Σ c_l ρ⁽ˡ⁾, l = 2, 3, 4
    #[default]
    ThreeDerivatives,
    /// K ρ''' after integrating the other two terms by parts in ξ
    ThirdDerivativeOnly,
}

/// 2∫dx ∫_0^∞ f(x, ξ) dξ over the support region of ρ, with breakpoints at
/// the level sets of the ρ breakpoints.
fn smooth_integral<F>(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    tol: f64,
    f: F,
) -> Result<f64, InvariantError>
where
    F: Fn([f64; 4], f64) -> f64,
{
    if alpha == 0.0 {
        return Err(InvariantError::ZeroAlpha);
    }
    let Some((_, hi)) = rho.support() else {
        return Ok(0.0);
    };
    let Some(r) = PhaseRegion::new(p, hi, alpha)? else {
        return Ok(0.0);
    };
    let a2 = alpha * alpha;
    let levels: Vec<f64> = rho.breakpoints().into_iter().filter(|&t| t < hi).collect();
    let mut xbreaks = vec![0.0];
    for &t in &levels {
        for sign in [-1.0, 1.0] {
            if let Some(x) = p.level_crossing(t / a2, sign) {
                if x != 0.0 {
                    xbreaks.push(x);
                }
            }
        }
    }
    let inner = |x: f64, abs_tol: f64| -> Result<f64, QuadError> {
        let j = p.jet(x);
        let v = j[0];
        let xm = r.xi_max(v);
        if xm == 0.0 {
            return Ok(0.0);
        }
        let breaks: Vec<f64> = levels
            .iter()
            .filter(|&&t| t > a2 * v)
            .map(|&t| (v * (t - a2 * v)).sqrt())
            .collect();
        quad::adaptive_with_breaks(|xi| f(j, xi), 0.0, xm, &breaks, abs_tol, 1e-12)
    };
    // Scale first, then the tolerance-controlled pass. Inner errors are kept
    // well below the outer tolerance so the outer rule sees a smooth function.
    let coarse = |x: f64| inner(x, 1e-9).unwrap_or(f64::NAN).abs();
    let scale = quad::adaptive_with_breaks(coarse, r.x_left, r.x_right, &xbreaks, 0.0, 1e-4)?;
    if scale == 0.0 {
        return Ok(0.0);
    }
    let abs_tol = tol * scale;
    let width = r.x_right - r.x_left;
    let mut failure = None;
    let total = quad::adaptive_with_breaks(
        |x| match inner(x, 1e-3 * abs_tol / width) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        r.x_left,
        r.x_right,
        &xbreaks,
        abs_tol,
        0.0,
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(2.0 * total)
}

/// ∫∫ ρ(ξ²/v + α²v) dx dξ over [-1, 1] × ℝ.
pub fn first_invariant_smooth(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    tol: f64,
) -> Result<f64, InvariantError> {
    let a2 = alpha * alpha;
    smooth_integral(p, rho, alpha, tol, |j, xi| {
        rho.value(xi * xi / j[0] + a2 * j[0])
    })
}

pub fn second_invariant_smooth(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    tol: f64,
) -> Result<f64, InvariantError> {
    second_invariant_with(p, rho, alpha, tol, SecondForm::default())
}

pub fn second_invariant_with(
    p: &MetricProfile,
    rho: &TestFunction,
    alpha: f64,
    tol: f64,
    form: SecondForm,
) -> Result<f64, InvariantError> {
    let a2 = alpha * alpha;
    match form {
        SecondForm::ThreeDerivatives => smooth_integral(p, rho, alpha, tol, |j, xi| {
            let d = rho.derivs(xi * xi / j[0] + a2 * j[0]);
            let c = inv2_coefficients(j, alpha, xi);
            c[0] * d[2] + c[1] * d[3] + c[2] * d[4]
        }),
        SecondForm::ThirdDerivativeOnly => smooth_integral(p, rho, alpha, tol, |j, xi| {
            terceira_kernel(j, alpha, xi) * rho.derivs(xi * xi / j[0] + a2 * j[0])[3]
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCurve {
    pub alpha: f64,
    pub lambda: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub c: Option<f64>,
}

impl InvariantCurve {
    pub fn new(alpha: f64, lambda: Vec<f64>) -> Self {
        InvariantCurve {
            alpha,
            lambda,
            w: None,
            q: None,
            c: None,
        }
    }
}

/// Default grid: `n` points from α²c(1 + 10⁻³) to α² v(0.95).
pub fn default_lambda_grid(p: &MetricProfile, alpha: f64, n: usize) -> Vec<f64> {
    let a2 = alpha * alpha;
    let lo = a2 * p.v(0.0) * (1.0 + 1e-3);
    let hi = a2 * p.v(0.95);
    linspace(lo, hi, n)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn sample<F>(lambdas: &[f64], f: F) -> Result<Vec<f64>, InvariantError>
where
    F: Fn(f64) -> Result<f64, InvariantError> + Sync,
{
    lambdas.par_iter().map(|&l| f(l)).collect()
}

pub fn area_curve(
    p: &MetricProfile,
    alpha: f64,
    lambdas: &[f64],
) -> Result<InvariantCurve, InvariantError> {
    let mut c = InvariantCurve::new(alpha, lambdas.to_vec());
    c.w = Some(sample(lambdas, |l| area(p, l, alpha))?);
    Ok(c)
}

pub fn q_curve(
    p: &MetricProfile,
    alpha: f64,
    lambdas: &[f64],
) -> Result<InvariantCurve, InvariantError> {
    let mut c = InvariantCurve::new(alpha, lambdas.to_vec());
    c.q = Some(sample(lambdas, |l| second_region(p, l, alpha))?);
    Ok(c)
}

/// Both W and Q on the same grid.
pub fn invariant_curve(
    p: &MetricProfile,
    alpha: f64,
    lambdas: &[f64],
) -> Result<InvariantCurve, InvariantError> {
    let pairs: Vec<(f64, f64)> = lambdas
        .par_iter()
        .map(|&l| Ok((area(p, l, alpha)?, second_region(p, l, alpha)?)))
        .collect::<Result<_, InvariantError>>()?;
    let mut c = InvariantCurve::new(alpha, lambdas.to_vec());
    c.w = Some(pairs.iter().map(|p| p.0).collect());
    c.q = Some(pairs.iter().map(|p| p.1).collect());
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Shape;
    use crate::profiles::{make_explicit, make_round_sphere};

    #[test]
    fn empty_below_threshold() {
        let p = make_round_sphere();
        assert_eq!(area(&p, 0.9, 1.0).unwrap(), 0.0);
        assert_eq!(second_region(&p, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(area(&p, 3.9, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_well_area() {
        // v = 1 + x², λ = 5/4: the integrand is √((1+x²)(1/4-x²)) on |x| < 1/2
        let p = make_explicit("1+x^2", |x| [1.0 + x * x, 2.0 * x, 2.0, 0.0]);
        let w = area(&p, 1.25, 1.0).unwrap();
        let gl = GaussLegendre::new(400);
        let reference = 2.0
            * gl.integrate(0.0, std::f64::consts::FRAC_PI_2, |t| {
                // x = sin(t)/2
                let x = 0.5 * t.sin();
                ((1.0 + x * x) * (0.25 - x * x)).sqrt() * 0.5 * t.cos()
            });
        assert!((w - reference).abs() < 1e-12, "{w} vs {reference}");
    }

    #[test]
    fn two_q_forms_agree() {
        let p = make_round_sphere();
        for l in [1.5, 2.0, 3.0] {
            let a = second_region(&p, l, 1.0).unwrap();
            let b = second_region_2d(&p, l, 1.0).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn alpha_sign_is_irrelevant() {
        let p = make_round_sphere();
        assert_eq!(area(&p, 2.0, 1.3).unwrap(), area(&p, 2.0, -1.3).unwrap());
        assert_eq!(
            second_region(&p, 2.0, 1.3).unwrap(),
            second_region(&p, 2.0, -1.3).unwrap()
        );
    }

    #[test]
    fn zero_rho() {
        let p = make_round_sphere();
        let z = TestFunction::zero();
        assert_eq!(first_invariant_smooth(&p, &z, 1.0, 1e-8).unwrap(), 0.0);
        assert_eq!(second_invariant_smooth(&p, &z, 1.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn integration_by_parts_forms_agree() {
        let p = make_round_sphere();
        let rho = TestFunction::new(Shape::SmoothBump {
            center: 2.0,
            width: 0.5,
        })
        .unwrap();
        let a = second_invariant_with(&p, &rho, 1.0, 1e-10, SecondForm::ThreeDerivatives).unwrap();
        let b =
            second_invariant_with(&p, &rho, 1.0, 1e-10, SecondForm::ThirdDerivativeOnly).unwrap();
        assert!((a - b).abs() < 1e-7 * a.abs(), "{a} vs {b}");
    }
}
