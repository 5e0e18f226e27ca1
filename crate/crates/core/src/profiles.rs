//! Profiles v = g̈ on (-1, 1) and the single-well certificate.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::interp::{Hermite, InterpError, SplineEnd};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("perturbation polynomial has a linear term ({0}); P'(0) must vanish")]
    LinearTerm(f64),
    #[error("profile is not pole regular: (1-x^2) v(x) -> {limit} at x = {pole}")]
    NotPoleRegular { pole: f64, limit: f64 },
    #[error("v(x) = {value} is not positive at x = {x}")]
    NonPositive { x: f64, value: f64 },
    #[error("v' has the wrong sign at x = {x} (v' = {slope}); profile is not a single well")]
    MultiWell { x: f64, slope: f64 },
    #[error("minimum at 0 is degenerate: v''(0) = {0}")]
    DegenerateMinimum(f64),
    #[error("minimum is not at x = 0: v'(0) = {0}")]
    OffCenterMinimum(f64),
    #[error("grid size {0} is too small")]
    GridTooSmall(usize),
    #[error("tabulated knots must lie in (-1, 1)")]
    KnotsOutOfRange,
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// Which construction a profile came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    RoundSphere,
    PolynomialPerturbation { coefficients: Vec<f64> },
    TabulatedSpline { knots: Vec<f64>, values: Vec<f64> },
    Explicit { name: String },
}

type JetFn = dyn Fn(f64) -> [f64; 4] + Send + Sync;

#[derive(Clone)]
enum Repr {
    Round,
    Poly(Vec<f64>),
    Spline(Arc<Hermite>),
    Explicit(Arc<JetFn>),
}

/// v = g̈ with analytic derivatives up to third order.
#[derive(Clone)]
pub struct MetricProfile {
    family: Family,
    repr: Repr,
    mirrored: bool,
    domain: (f64, f64),
}

impl fmt::Debug for MetricProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricProfile")
            .field("family", &self.family)
            .field("mirrored", &self.mirrored)
            .finish()
    }
}

/// d^k/dx^k of 1/(1-x^2), k = 0..3.
pub fn pole_term(x: f64) -> [f64; 4] {
    let a = 1.0 / (1.0 - x);
    let b = 1.0 / (1.0 + x);
    let mut out = [0.0; 4];
    let mut pa = a;
    let mut pb = b;
    let mut fact = 1.0;
    for (k, o) in out.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *o = 0.5 * fact * (pa + sign * pb);
        pa *= a;
        pb *= b;
        fact *= (k + 1) as f64;
    }
    out
}

fn poly_jet(c: &[f64], x: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in (k..c.len()).rev() {
            let mut f = 1.0;
            for i in 0..k {
                f *= (j - i) as f64;
            }
            acc = acc * x + f * c[j];
        }
        *o = acc;
    }
    out
}

pub fn make_round_sphere() -> MetricProfile {
    MetricProfile {
        family: Family::RoundSphere,
        repr: Repr::Round,
        mirrored: false,
        domain: (-1.0, 1.0),
    }
}

/// v = 1/(1-x^2) + P(x), coefficients constant term first.
pub fn make_perturbed_well(coefficients: &[f64]) -> Result<MetricProfile, ProfileError> {
    if let Some(&c1) = coefficients.get(1) {
        if c1 != 0.0 {
            return Err(ProfileError::LinearTerm(c1));
        }
    }
    let mut c = coefficients.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let repr = if c.is_empty() { Repr::Round } else { Repr::Poly(c) };
    Ok(MetricProfile {
        family: Family::PolynomialPerturbation {
            coefficients: coefficients.to_vec(),
        },
        repr,
        mirrored: false,
        domain: (-1.0, 1.0),
    })
}

/// Tabulated v values; the smooth part v - 1/(1-x^2) is splined, so the pole
/// behaviour is exact. Not-a-knot ends; the domain is the knot range.
pub fn make_tabulated(knots: &[f64], values: &[f64]) -> Result<MetricProfile, ProfileError> {
    if knots.iter().any(|x| !(x.abs() < 1.0)) {
        return Err(ProfileError::KnotsOutOfRange);
    }
    let smooth: Vec<f64> = knots
        .iter()
        .zip(values)
        .map(|(&x, &v)| v - pole_term(x)[0])
        .collect();
    let sp = Hermite::cubic_spline(knots, &smooth, SplineEnd::NotAKnot)?;
    Ok(MetricProfile {
        family: Family::TabulatedSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
        },
        repr: Repr::Spline(Arc::new(sp)),
        mirrored: false,
        domain: (knots[0], knots[knots.len() - 1]),
    })
}

/// Any v given by a closure returning [v, v', v'', v''']; used for test profiles
/// that need not be pole regular.
pub fn make_explicit<F>(name: &str, f: F) -> MetricProfile
where
    F: Fn(f64) -> [f64; 4] + Send + Sync + 'static,
{
    MetricProfile {
        family: Family::Explicit {
            name: name.to_string(),
        },
        repr: Repr::Explicit(Arc::new(f)),
        mirrored: false,
        domain: (-1.0, 1.0),
    }
}

impl MetricProfile {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    /// Interval on which the profile is defined.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// The same profile restricted to [lo, hi].
    pub fn with_domain(mut self, lo: f64, hi: f64) -> MetricProfile {
        self.domain = (lo, hi);
        self
    }

    /// The profile x ↦ v(-x).
    pub fn mirrored(&self) -> MetricProfile {
        let mut p = self.clone();
        p.mirrored = !p.mirrored;
        p.domain = (-self.domain.1, -self.domain.0);
        p
    }

    fn raw(&self, x: f64) -> [f64; 4] {
        match &self.repr {
            Repr::Round => pole_term(x),
            Repr::Poly(c) => {
                let p = pole_term(x);
                let q = poly_jet(c, x);
                [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]]
            }
            Repr::Spline(sp) => {
                let p = pole_term(x);
                let q = sp.eval_all(x);
                [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]]
            }
            Repr::Explicit(f) => f(x),
        }
    }

    /// [v, v', v'', v'''] at x.
    pub fn jet(&self, x: f64) -> [f64; 4] {
        if self.mirrored {
            let [a, b, c, d] = self.raw(-x);
            [a, -b, c, -d]
        } else {
            self.raw(x)
        }
    }

    pub fn v(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }
    pub fn v1(&self, x: f64) -> f64 {
        self.jet(x)[1]
    }
    pub fn v2(&self, x: f64) -> f64 {
        self.jet(x)[2]
    }
    pub fn v3(&self, x: f64) -> f64 {
        self.jet(x)[3]
    }

    /// Limit of (1-x^2) v(x) at the pole `sign` = ±1, extrapolated linearly in
    /// the distance δ from the pole using δ = 1e-4 and 5e-5.
    pub fn pole_limit(&self, sign: f64) -> f64 {
        let g = |d: f64| {
            let x = sign * (1.0 - d);
            (1.0 - x * x) * self.v(x)
        };
        2.0 * g(5e-5) - g(1e-4)
    }

    pub fn check_pole_regular(&self) -> Result<(), ProfileError> {
        for sign in [-1.0, 1.0] {
            let limit = self.pole_limit(sign);
            if !((limit - 1.0).abs() < 1e-6) {
                return Err(ProfileError::NotPoleRegular { pole: sign, limit });
            }
        }
        Ok(())
    }

    /// First x in [0, hi) (searching outward) where v reaches `level`, on the
    /// side given by `sign`. Assumes v is monotone on that side.
    pub fn level_crossing(&self, level: f64, sign: f64) -> Option<f64> {
        let edge = if sign > 0.0 { self.domain.1 } else { -self.domain.0 };
        let mut lo = 0.0;
        let mut hi = edge;
        let f = |t: f64| self.v(sign * t) - level;
        if f(lo) >= 0.0 {
            return Some(0.0);
        }
        if edge >= 1.0 {
            // v -> inf at the pole; back off until finite and above level.
            let mut d = 1e-3;
            loop {
                hi = 1.0 - d;
                if f(hi) > 0.0 {
                    break;
                }
                d *= 1e-2;
                if d < 1e-15 {
                    return None;
                }
            }
        } else if f(hi) < 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(sign * 0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleWellCertificate {
    pub c: f64,
    pub curvature: f64,
    pub grid_size: usize,
}

pub const DEFAULT_CERT_GRID: usize = 10_000;

/// Dense-grid check that v' < 0 left of 0 and v' > 0 right of 0, with a
/// nondegenerate minimum at exactly x = 0.
pub fn certify_single_well(
    p: &MetricProfile,
    grid_size: usize,
) -> Result<SingleWellCertificate, ProfileError> {
    if grid_size < 4 {
        return Err(ProfileError::GridTooSmall(grid_size));
    }
    let [c, slope0, curvature, _] = p.jet(0.0);
    if !(c > 0.0) {
        return Err(ProfileError::NonPositive { x: 0.0, value: c });
    }
    if !(curvature > 0.0) {
        return Err(ProfileError::DegenerateMinimum(curvature));
    }
    if slope0.abs() > 1e-10 * (1.0 + curvature) {
        return Err(ProfileError::OffCenterMinimum(slope0));
    }
    let (a, b) = p.domain();
    let h = (b - a) / grid_size as f64;
    for j in 0..grid_size {
        let x = a + (j as f64 + 0.5) * h;
        if x == 0.0 {
            continue;
        }
        let [v, v1, _, _] = p.jet(x);
        if !(v > 0.0) {
            return Err(ProfileError::NonPositive { x, value: v });
        }
        if x * v1 <= 0.0 {
            return Err(ProfileError::MultiWell { x, slope: v1 });
        }
    }
    Ok(SingleWellCertificate {
        c,
        curvature,
        grid_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sphere_values() {
        let p = make_round_sphere();
        assert_eq!(p.v(0.0), 1.0);
        assert!((p.v(0.5) - 4.0 / 3.0).abs() < 1e-15);
        assert!((p.v1(0.5) - 16.0 / 9.0).abs() < 1e-14);
        let x: f64 = 0.999;
        assert!(((1.0 - x * x) * p.v(x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pole_term_derivatives_closed_form() {
        let x: f64 = 0.3;
        let d = 1.0 - x * x;
        let [v, v1, v2, v3] = pole_term(x);
        assert!((v - 1.0 / d).abs() < 1e-15);
        assert!((v1 - 2.0 * x / (d * d)).abs() < 1e-14);
        assert!((v2 - (2.0 + 6.0 * x * x) / d.powi(3)).abs() < 1e-13);
        assert!((v3 - 24.0 * x * (1.0 + x * x) / d.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn perturbed_well_curvature() {
        let p = make_perturbed_well(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.v(0.0), 1.0);
        assert!((p.v2(0.0) - 4.0).abs() < 1e-14);
        assert!(matches!(
            make_perturbed_well(&[0.0, 0.5]),
            Err(ProfileError::LinearTerm(_))
        ));
    }

    #[test]
    fn zero_perturbation_is_round() {
        let p = make_perturbed_well(&[0.0]).unwrap();
        let r = make_round_sphere();
        for x in [-0.9, -0.2, 0.0, 0.4, 0.99] {
            assert_eq!(p.jet(x), r.jet(x));
        }
    }

    #[test]
    fn certificates() {
        let c = certify_single_well(&make_round_sphere(), 16).unwrap();
        assert_eq!(c.c, 1.0);
        assert_eq!(c.curvature, 2.0);
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
        assert_eq!(certify_single_well(&p, 10_000).unwrap().c, 1.0);
        let bad = make_perturbed_well(&[0.0, 0.0, -3.0]).unwrap();
        assert!(matches!(
            certify_single_well(&bad, 10_000),
            Err(ProfileError::DegenerateMinimum(_)) | Err(ProfileError::MultiWell { .. })
        ));
    }

    #[test]
    fn off_center_minimum_rejected() {
        let p = make_explicit("shifted", |x| {
            let y = x - 0.1;
            [1.0 + y * y, 2.0 * y, 2.0, 0.0]
        });
        assert!(matches!(
            certify_single_well(&p, 100),
            Err(ProfileError::OffCenterMinimum(_))
        ));
    }

    #[test]
    fn pole_regularity() {
        assert!(make_round_sphere().check_pole_regular().is_ok());
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
        assert!(p.check_pole_regular().is_ok());
        let q = make_explicit("1+x^2", |x| [1.0 + x * x, 2.0 * x, 2.0, 0.0]);
        assert!(q.check_pole_regular().is_err());
    }

    #[test]
    fn mirror_flips_odd_derivatives() {
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
        let m = p.mirrored();
        let a = p.jet(0.4);
        let b = m.jet(-0.4);
        assert_eq!([a[0], -a[1], a[2], -a[3]], b);
        assert!(!m.mirrored().is_mirrored());
    }

    #[test]
    fn tabulated_reproduces_polynomial_well() {
        let p = make_perturbed_well(&[0.0, 0.0, 1.0]).unwrap();
        let knots: Vec<f64> = (0..=200).map(|i| -0.95 + 1.9 * i as f64 / 200.0).collect();
        let vals: Vec<f64> = knots.iter().map(|&x| p.v(x)).collect();
        let t = make_tabulated(&knots, &vals).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.51, 0.9] {
            assert!((t.v(x) - p.v(x)).abs() < 1e-10);
            assert!((t.v1(x) - p.v1(x)).abs() < 1e-6);
        }
        assert_eq!(t.domain(), (-0.95, 0.95));
    }

    #[test]
    fn level_crossing_round_sphere() {
        let p = make_round_sphere();
        // 1/(1-x^2) = 2 at x = 1/sqrt 2
        let x = p.level_crossing(2.0, 1.0).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() < 1e-14);
        let y = p.level_crossing(2.0, -1.0).unwrap();
        assert!((y + 0.5f64.sqrt()).abs() < 1e-14);
    }
}
