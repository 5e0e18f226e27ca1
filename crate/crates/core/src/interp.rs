//! Piecewise cubic Hermite interpolation: cubic splines and PCHIP.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least {needed} knots, got {got}")]
    TooFewKnots { needed: usize, got: usize },
    #[error("knots must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("non-finite value at knot {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineEnd {
    Natural,
    NotAKnot,
}

/// Cubic Hermite interpolant given knots, values and knot slopes.
///
/// Outside the knot range the end cubic is extrapolated.
#[derive(Debug, Clone)]
pub struct Hermite {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

fn check_knots(x: &[f64], y: &[f64], needed: usize) -> Result<(), InterpError> {
    if x.len() < needed || y.len() != x.len() {
        return Err(InterpError::TooFewKnots {
            needed,
            got: x.len().min(y.len()),
        });
    }
    for i in 0..x.len() {
        if !x[i].is_finite() || !y[i].is_finite() {
            return Err(InterpError::NonFinite(i));
        }
        if i > 0 && x[i] <= x[i - 1] {
            return Err(InterpError::NotIncreasing(i));
        }
    }
    Ok(())
}

/// Solve a tridiagonal system in place (Thomas algorithm).
/// `sub[i]` multiplies x[i-1] in row i, `sup[i]` multiplies x[i+1].
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag.to_vec();
    c[0] = sup[0] / d[0];
    rhs[0] /= d[0];
    for i in 1..n {
        let m = d[i] - sub[i] * c[i - 1];
        d[i] = m;
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

impl Hermite {
    /// Interpolant with prescribed slopes at the knots.
    pub fn new(x: &[f64], y: &[f64], slopes: &[f64]) -> Result<Self, InterpError> {
        check_knots(x, y, 2)?;
        if slopes.len() != x.len() {
            return Err(InterpError::TooFewKnots {
                needed: x.len(),
                got: slopes.len(),
            });
        }
        if let Some(i) = slopes.iter().position(|s| !s.is_finite()) {
            return Err(InterpError::NonFinite(i));
        }
        Ok(Hermite {
            x: x.to_vec(),
            y: y.to_vec(),
            s: slopes.to_vec(),
        })
    }

    pub fn cubic_spline(x: &[f64], y: &[f64], end: SplineEnd) -> Result<Self, InterpError> {
        let needed = match end {
            SplineEnd::Natural => 2,
            SplineEnd::NotAKnot => 4,
        };
        check_knots(x, y, needed)?;
        let n = x.len();
        let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / dx[i]).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            sub[i] = dx[i];
            diag[i] = 2.0 * (dx[i - 1] + dx[i]);
            sup[i] = dx[i - 1];
            rhs[i] = 3.0 * (dx[i] * m[i - 1] + dx[i - 1] * m[i]);
        }
        match end {
            SplineEnd::Natural => {
                diag[0] = 2.0;
                sup[0] = 1.0;
                rhs[0] = 3.0 * m[0];
                sub[n - 1] = 1.0;
                diag[n - 1] = 2.0;
                rhs[n - 1] = 3.0 * m[n - 2];
            }
            SplineEnd::NotAKnot => {
                let d = x[2] - x[0];
                diag[0] = dx[1];
                sup[0] = d;
                rhs[0] = ((dx[0] + 2.0 * d) * dx[1] * m[0] + dx[0] * dx[0] * m[1]) / d;
                let d = x[n - 1] - x[n - 3];
                diag[n - 1] = dx[n - 3];
                sub[n - 1] = d;
                rhs[n - 1] = (dx[n - 2] * dx[n - 2] * m[n - 3]
                    + (2.0 * d + dx[n - 2]) * dx[n - 3] * m[n - 2])
                    / d;
            }
        }
        thomas(&sub, &diag, &sup, &mut rhs);
        Ok(Hermite {
            x: x.to_vec(),
            y: y.to_vec(),
            s: rhs,
        })
    }

    /// Shape-preserving piecewise cubic (Fritsch–Carlson slopes, as in SciPy's PCHIP).
    pub fn pchip(x: &[f64], y: &[f64]) -> Result<Self, InterpError> {
        check_knots(x, y, 2)?;
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut s = vec![0.0; n];
        if n == 2 {
            s[0] = m[0];
            s[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] <= 0.0 {
                    s[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    s[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            s[0] = pchip_end(h[0], h[1], m[0], m[1]);
            s[n - 1] = pchip_end(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Hermite {
            x: x.to_vec(),
            y: y.to_vec(),
            s,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value and first three derivatives at `t`.
    pub fn eval_all(&self, t: f64) -> [f64; 4] {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let dy = self.y[i + 1] - self.y[i];
        // p(u) = y0 + s0 u + c2 u^2 + c3 u^3, u = t - x_i
        let s0 = self.s[i];
        let s1 = self.s[i + 1];
        let m = dy / h;
        let c2 = (3.0 * m - 2.0 * s0 - s1) / h;
        let c3 = (s0 + s1 - 2.0 * m) / (h * h);
        let u = t - self.x[i];
        [
            self.y[i] + u * (s0 + u * (c2 + u * c3)),
            s0 + u * (2.0 * c2 + 3.0 * c3 * u),
            2.0 * c2 + 6.0 * c3 * u,
            6.0 * c3,
        ]
    }

    /// ∫ from the first knot to each knot.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.x.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 0..self.x.len() - 1 {
            let h = self.x[i + 1] - self.x[i];
            acc += h * (self.y[i] + self.y[i + 1]) / 2.0 + h * h * (self.s[i] - self.s[i + 1]) / 12.0;
            out.push(acc);
        }
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t)[0]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval_all(t)[1]
    }
}

fn pchip_end(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).powf(1.3)).collect();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let sp = Hermite::cubic_spline(&x, &y, SplineEnd::NotAKnot).unwrap();
        for t in [0.05, 0.4, 1.1, 2.0] {
            let [v, d1, d2, d3] = sp.eval_all(t);
            assert!((v - f(t)).abs() < 1e-12);
            assert!((d1 - (-2.0 + t - 0.75 * t * t)).abs() < 1e-10);
            assert!((d2 - (1.0 - 1.5 * t)).abs() < 1e-9);
            assert!((d3 + 1.5).abs() < 1e-8);
        }
    }

    #[test]
    fn natural_spline_interpolates_and_has_zero_end_curvature() {
        let x = [0.0, 1.0, 2.5, 3.0, 4.0];
        let y = [1.0, -1.0, 0.5, 2.0, 0.0];
        let sp = Hermite::cubic_spline(&x, &y, SplineEnd::Natural).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((sp.eval(*xi) - yi).abs() < 1e-13);
        }
        assert!(sp.eval_all(0.0)[2].abs() < 1e-12);
        assert!(sp.eval_all(4.0)[2].abs() < 1e-12);
    }

    #[test]
    fn cumulative_integral_of_cubic() {
        let x: Vec<f64> = (0..9).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|t| t * t * t - t).collect();
        let sp = Hermite::cubic_spline(&x, &y, SplineEnd::NotAKnot).unwrap();
        let ci = sp.cumulative_integral();
        for (t, v) in x.iter().zip(&ci) {
            assert!((v - (t.powi(4) / 4.0 - t * t / 2.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let x = [0.0, 0.1, 0.2, 1.0, 3.0, 3.1];
        let y = [0.0, 0.0, 0.5, 0.51, 3.0, 10.0];
        let p = Hermite::pchip(&x, &y).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=3100 {
            let t = k as f64 * 1e-3;
            let v = p.eval(t);
            assert!(v >= last - 1e-14, "t = {t}");
            last = v;
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        let e = Hermite::pchip(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap_err();
        assert_eq!(e, InterpError::NotIncreasing(2));
    }
}
