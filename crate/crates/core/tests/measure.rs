use eqspec::measure::{
    convergence_study, expansion_prediction, measure_sample, spectral_measure, MeasureError,
    MeasureOptions, Shape, TestFunction,
};
use eqspec::profiles::{make_perturbed_well, make_round_sphere};
use proptest::prelude::*;

fn indicator() -> TestFunction {
    TestFunction::new(Shape::MollifiedIndicator {
        level: 4.0,
        epsilon: 0.1,
    })
    .unwrap()
}

fn bump(center: f64, width: f64) -> TestFunction {
    TestFunction::new(Shape::SmoothBump { center, width }).unwrap()
}

fn small() -> MeasureOptions {
    MeasureOptions {
        cells: 1024,
        richardson: true,
    }
}

#[test]
fn zero_rho_gives_zero() {
    let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
    let s = spectral_measure(&p, &TestFunction::zero(), 1.0, 16, &small()).unwrap();
    assert_eq!(s.mu, 0.0);
    let st = convergence_study(&p, &TestFunction::zero(), 1.0, &[8, 16], &small(), 1e-10).unwrap();
    assert!(st.rows.iter().all(|r| r.resid1 == 0.0 && r.resid2 == 0.0));
}

#[test]
fn matches_analytic_spectrum_sum_at_m8() {
    let p = make_round_sphere();
    let rho = indicator();
    let m = 8i64;
    let h2 = 1.0 / (m * m) as f64;
    let want: f64 = (m..200)
        .map(|k| rho.value(h2 * (k * (k + 1)) as f64))
        .sum();
    let got = spectral_measure(&p, &rho, 1.0, m, &MeasureOptions::default()).unwrap();
    assert!((got.mu - want).abs() < 1e-6, "{} vs {want}", got.mu);
}

#[test]
fn bump_matches_analytic_spectrum_sum() {
    let p = make_round_sphere();
    let rho = bump(2.0, 0.5);
    for m in [5i64, 12] {
        let h2 = 1.0 / (m * m) as f64;
        let want: f64 = (m..400).map(|k| rho.value(h2 * (k * (k + 1)) as f64)).sum();
        let got = spectral_measure(&p, &rho, 1.0, m, &MeasureOptions::default()).unwrap();
        assert!((got.mu - want).abs() < 1e-6, "m = {m}: {} vs {want}", got.mu);
    }
}

#[test]
fn prediction_is_linear_in_rho() {
    let p = make_round_sphere();
    let r = bump(2.0, 0.5);
    let (a1, a2) = expansion_prediction(&p, &r, 1.0, 1e-10).unwrap();
    let (b1, b2) = expansion_prediction(&p, &r.scaled(2.0), 1.0, 1e-10).unwrap();
    assert!((b1 - 2.0 * a1).abs() < 1e-12 * a1.abs());
    assert!((b2 - 2.0 * a2).abs() < 1e-12 * a2.abs().max(1e-12));
    assert_eq!(
        expansion_prediction(&p, &TestFunction::zero(), 1.0, 1e-10).unwrap(),
        (0.0, 0.0)
    );
}

#[test]
fn truncation_is_reported() {
    let p = make_round_sphere();
    let opts = MeasureOptions {
        cells: 64,
        richardson: false,
    };
    let s = measure_sample(&p, &indicator(), 1.0, 40, &opts).unwrap();
    assert!(!s.complete);
    assert!(matches!(
        spectral_measure(&p, &indicator(), 1.0, 40, &opts),
        Err(MeasureError::TruncatedSpectrum { .. })
    ));
    assert_eq!(
        measure_sample(&p, &indicator(), 1.0, 0, &opts).unwrap_err(),
        MeasureError::ZeroWeight
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_in_amplitude(k in 0.1f64..5.0, m in 3i64..12) {
        let p = make_round_sphere();
        let r = bump(2.0, 0.5);
        let a = spectral_measure(&p, &r, 1.0, m, &small()).unwrap().mu;
        let b = spectral_measure(&p, &r.scaled(k), 1.0, m, &small()).unwrap().mu;
        prop_assert!((b - k * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn monotone_in_rho(
        center in 1.0f64..3.0,
        width in 0.1f64..0.9,
        amp in 0.0f64..2.7,
        m in 3i64..12,
    ) {
        // a bump of height amp/e below the indicator's plateau [0.1, 3.9]
        prop_assume!(center - width >= 0.1 && center + width <= 3.9);
        let p = make_perturbed_well(&[0.0, 0.0, 1.0]).unwrap();
        let lo = bump(center, width).scaled(amp);
        let a = spectral_measure(&p, &lo, 1.0, m, &small()).unwrap().mu;
        let b = spectral_measure(&p, &indicator(), 1.0, m, &small()).unwrap().mu;
        prop_assert!(a <= b, "{} > {}", a, b);
    }

    #[test]
    fn weight_and_alpha_sign_flip_together(m in 3i64..12, alpha in 0.5f64..2.0) {
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
        let r = bump(2.0, 0.5);
        let a = spectral_measure(&p, &r, alpha, m, &small()).unwrap();
        let b = spectral_measure(&p, &r, -alpha, -m, &small()).unwrap();
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.hbar, b.hbar);
    }

    #[test]
    fn complete_samples_are_stable(m in 3i64..10) {
        let p = make_round_sphere();
        let a = measure_sample(&p, &indicator(), 1.0, m, &small()).unwrap();
        prop_assume!(a.complete);
        let b = measure_sample(&p, &indicator(), 1.0, m, &MeasureOptions { cells: 2048, ..small() }).unwrap();
        prop_assert!(b.complete);
        prop_assert!((a.mu - b.mu).abs() < 1e-3);
    }
}
