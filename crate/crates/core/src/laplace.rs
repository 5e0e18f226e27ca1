//! Equivariant spectrum of the metric Laplacian.
//!
//! On functions e^{imθ} f(x) the Laplacian of v dx² + dθ²/v reduces to
//! L_m f = -(f'/v)' + m² v f (the volume density is 1). It is discretized by
//! finite volumes on N cells with zero flux through the poles.

use serde::Serialize;
use thiserror::Error;

use crate::profiles::{MetricProfile, ProfileError};
use crate::tridiag::SymTridiag;

pub const MIN_CELLS: usize = 16;
/// Discrete eigenvalues above (fraction·N)² are treated as unresolved.
pub const RESOLVED_FRACTION: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("need at least {MIN_CELLS} cells, got {0}")]
    TooFewCells(usize),
    #[error("zero-flux closure needs a pole-regular profile: {0}")]
    NotPoleRegular(ProfileError),
}

pub fn resolved_cap(cells: usize) -> f64 {
    let r = RESOLVED_FRACTION * cells as f64;
    r * r
}

pub fn cell_centers(cells: usize) -> Vec<f64> {
    let h = 2.0 / cells as f64;
    (0..cells).map(|i| -1.0 + (i as f64 + 0.5) * h).collect()
}

/// How the flux coefficient 1/v is obtained at interior cell faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceRule {
    /// 1/v at the face, rescaled near the poles so that the discrete energy is
    /// exact for the local behaviour f ~ δ^{|m|/2} (δ = distance to the pole),
    /// plus the energy of the half cell between the pole and the first center.
    #[default]
    PoleFitted,
    /// 1/v evaluated at the face itself.
    Exact,
    /// Harmonic mean of the two neighbouring cell values. Only first order
    /// for |m| = 1, where the eigenfunctions behave like sqrt(1-|x|).
    Harmonic,
}

/// Ratio of the energy-consistent coefficient for f = δ^μ, 1/v = 2δ across
/// the face at δ = k h to the pointwise value 2 k h.
fn pole_fit_ratio(k: usize, mu: f64) -> f64 {
    let t = mu * (1.0 / (k as f64 - 0.5)).ln_1p();
    mu * (t.exp() + 1.0) / (2.0 * k as f64 * t.exp_m1())
}

pub fn laplacian_mode_operator(
    p: &MetricProfile,
    m: i64,
    cells: usize,
) -> Result<SymTridiag, LaplaceError> {
    mode_operator_with(p, m, cells, FaceRule::default())
}

pub fn mode_operator_with(
    p: &MetricProfile,
    m: i64,
    cells: usize,
    faces: FaceRule,
) -> Result<SymTridiag, LaplaceError> {
    if cells < MIN_CELLS {
        return Err(LaplaceError::TooFewCells(cells));
    }
    p.check_pole_regular().map_err(LaplaceError::NotPoleRegular)?;
    let h = 2.0 / cells as f64;
    let inv_h2 = 1.0 / (h * h);
    let v: Vec<f64> = cell_centers(cells).iter().map(|&x| p.v(x)).collect();
    let mu = 0.5 * m.unsigned_abs() as f64;
    let face: Vec<f64> = match faces {
        FaceRule::Harmonic => v.windows(2).map(|w| 2.0 / (w[0] + w[1])).collect(),
        FaceRule::Exact => (1..cells).map(|i| 1.0 / p.v(-1.0 + i as f64 * h)).collect(),
        FaceRule::PoleFitted => (1..cells)
            .map(|i| {
                let a = 1.0 / p.v(-1.0 + i as f64 * h);
                if mu == 0.0 {
                    a
                } else {
                    a * pole_fit_ratio(i.min(cells - i), mu)
                }
            })
            .collect(),
    };
    let m2 = (m as f64) * (m as f64);
    let pole_cell = if faces == FaceRule::PoleFitted { mu / h } else { 0.0 };
    let mut diag: Vec<f64> = (0..cells)
        .map(|i| {
            let left = if i > 0 { face[i - 1] } else { 0.0 };
            let right = if i + 1 < cells { face[i] } else { 0.0 };
            (left + right) * inv_h2 + m2 * v[i]
        })
        .collect();
    diag[0] += pole_cell;
    diag[cells - 1] += pole_cell;
    let off = face.iter().map(|a| -a * inv_h2).collect();
    Ok(SymTridiag::new(diag, off))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivariantSpectrum {
    pub m: i64,
    pub eigenvalues: Vec<f64>,
    pub cells: usize,
    pub lambda_max: f64,
    /// True when λ_max exceeded the resolved range and the list was cut there.
    pub truncated: bool,
}

/// All resolved eigenvalues of L_m not exceeding `lambda_max`, ascending.
pub fn equivariant_spectrum(
    p: &MetricProfile,
    m: i64,
    cells: usize,
    lambda_max: f64,
) -> Result<EquivariantSpectrum, LaplaceError> {
    let op = laplacian_mode_operator(p, m, cells)?;
    let cap = resolved_cap(cells);
    let top = lambda_max.min(cap);
    // count_below is strict; nudge so that λ = λ_max is included
    let top_incl = top + 4.0 * f64::EPSILON * top.abs().max(1.0);
    let (g_lo, _) = op.gershgorin();
    let eigenvalues = op.eigenvalues_in(g_lo.min(0.0) - 1.0, top_incl);
    Ok(EquivariantSpectrum {
        m,
        eigenvalues,
        cells,
        lambda_max,
        truncated: lambda_max > cap,
    })
}

/// The lowest `count` eigenvalues of L_m.
pub fn lowest_eigenvalues(
    p: &MetricProfile,
    m: i64,
    cells: usize,
    count: usize,
) -> Result<Vec<f64>, LaplaceError> {
    let op = laplacian_mode_operator(p, m, cells)?;
    Ok((0..count.min(cells)).map(|k| op.eigenvalue(k)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_explicit, make_perturbed_well, make_round_sphere};

    #[test]
    fn constants_are_in_the_kernel() {
        let op = laplacian_mode_operator(&make_round_sphere(), 0, 64).unwrap();
        let y = op.apply(&vec![1.0; 64]);
        let scale = op.diag.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(y.iter().all(|r| r.abs() < 1e-13 * scale));
    }

    #[test]
    fn legendre_spectrum() {
        let p = make_round_sphere();
        let ev = lowest_eigenvalues(&p, 0, 2048, 2).unwrap();
        assert!(ev[0].abs() < 1e-8);
        assert!((ev[1] - 2.0).abs() < 2e-3);
        let ev = lowest_eigenvalues(&p, 3, 2048, 1).unwrap();
        assert!((ev[0] - 12.0).abs() < 12e-3);
    }

    #[test]
    fn spectrum_up_to_lambda_max() {
        let p = make_round_sphere();
        let s = equivariant_spectrum(&p, 2, 2048, 50.0).unwrap();
        let want = [6.0, 12.0, 20.0, 30.0, 42.0];
        assert_eq!(s.eigenvalues.len(), want.len());
        for (a, b) in s.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-3 * b);
        }
        let s = equivariant_spectrum(&p, 4, 256, 15.0).unwrap();
        assert!(s.eigenvalues.is_empty());
    }

    #[test]
    fn m_sign_irrelevant() {
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
        let a = equivariant_spectrum(&p, 3, 256, 200.0).unwrap();
        let b = equivariant_spectrum(&p, -3, 256, 200.0).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
    }

    #[test]
    fn rejects_bad_input() {
        let p = make_round_sphere();
        assert_eq!(
            laplacian_mode_operator(&p, 0, 8).unwrap_err(),
            LaplaceError::TooFewCells(8)
        );
        let q = make_explicit("1+x^2", |x| [1.0 + x * x, 2.0 * x, 2.0, 0.0]);
        assert!(matches!(
            laplacian_mode_operator(&q, 0, 64),
            Err(LaplaceError::NotPoleRegular(_))
        ));
    }
}
