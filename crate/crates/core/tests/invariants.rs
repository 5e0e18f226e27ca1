use eqspec::invariants::{
    area, first_invariant_smooth, invariant_curve, linspace, second_invariant_with,
    second_region, second_region_2d, terceira_kernel, SecondForm,
};
use eqspec::measure::{Shape, TestFunction};
use eqspec::profiles::{make_perturbed_well, make_round_sphere, MetricProfile};
use proptest::prelude::*;

/// Area of {(u, w) ∈ [0, a] × [0, b] : u + w ≤ s}.
fn clipped_area(a: f64, b: f64, s: f64) -> f64 {
    let r = |t: f64| 0.5 * t.max(0.0).powi(2);
    r(s) - r(s - a) - r(s - b) + r(s - a - b)
}

/// Fraction of an hx × hy cell where the linearization g0 + gx·dx + gy·dy ≤ 0.
fn cell_fraction(g0: f64, gx: f64, gy: f64, hx: f64, hy: f64) -> f64 {
    let (a, b) = ((gx * hx).abs(), (gy * hy).abs());
    let s = 0.5 * (a + b) - g0;
    if a * b < 1e-300 {
        let w = a + b;
        return if w == 0.0 {
            (g0 <= 0.0) as u8 as f64
        } else {
            (s / w).clamp(0.0, 1.0)
        };
    }
    (clipped_area(a, b, s) / (a * b)).clamp(0.0, 1.0)
}

/// ∫∫ f over {ξ > 0, ξ²/v + α²v ≤ λ} on an n × n grid with partial boundary
/// cells, f evaluated at cell centers.
fn grid_integral<F: Fn([f64; 4], f64) -> f64>(
    p: &MetricProfile,
    lambda: f64,
    alpha: f64,
    n: usize,
    f: F,
) -> f64 {
    let a2 = alpha * alpha;
    let (x0, x1) = (-0.999, 0.999);
    let xi1 = (0.25 * lambda * lambda / a2).sqrt() * 1.05;
    let (hx, hy) = ((x1 - x0) / n as f64, xi1 / n as f64);
    let mut total = 0.0;
    for i in 0..n {
        let x = x0 + (i as f64 + 0.5) * hx;
        let j = p.jet(x);
        let v = j[0];
        if a2 * v > lambda + 10.0 * hx * (a2 * j[1]).abs().max(1.0) {
            continue;
        }
        for k in 0..n {
            let xi = (k as f64 + 0.5) * hy;
            let g0 = xi * xi / v + a2 * v - lambda;
            let gx = (a2 - xi * xi / (v * v)) * j[1];
            let gy = 2.0 * xi / v;
            let frac = cell_fraction(g0, gx, gy, hx, hy);
            if frac > 0.0 {
                total += frac * f(j, xi) * hx * hy;
            }
        }
    }
    total
}

#[test]
fn w_matches_grid_oracle_on_round_sphere() {
    let p = make_round_sphere();
    for l in [1.5, 2.0, 3.0] {
        let w = area(&p, l, 1.0).unwrap();
        let g = grid_integral(&p, l, 1.0, 2000, |_, _| 1.0);
        assert!((w - g).abs() < 1e-4, "lambda = {l}: {w} vs {g}");
    }
}

#[test]
fn q_cross_form_on_round_sphere() {
    let p = make_round_sphere();
    for l in [1.5, 2.0, 3.0] {
        let a = second_region(&p, l, 1.0).unwrap();
        let b = second_region_2d(&p, l, 1.0).unwrap();
        assert!((a - b).abs() <= 1e-6 * a.abs(), "lambda = {l}: {a} vs {b}");
    }
}

#[test]
fn q_matches_grid_oracle() {
    let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
    for l in [1.5, 3.0] {
        let q = second_region_2d(&p, l, 1.0).unwrap();
        let g = grid_integral(&p, l, 1.0, 1500, |j, xi| terceira_kernel(j, 1.0, xi));
        assert!((q - g).abs() < 1e-3 * q.abs().max(1e-2), "lambda = {l}: {q} vs {g}");
    }
}

#[test]
fn first_invariant_matches_grid_oracle() {
    let p = make_round_sphere();
    let rho = TestFunction::new(Shape::MollifiedIndicator {
        level: 4.0,
        epsilon: 0.1,
    })
    .unwrap();
    let i1 = first_invariant_smooth(&p, &rho, 1.0, 1e-10).unwrap();
    // plain midpoint sum over [-1, 1] × [-2.5, 2.5]; ρ vanishes beyond τ = 4.1,
    // where ξ² ≤ v(4.1 - v) ≤ 4.2
    let n = 2000;
    let (hx, hy) = (2.0 / n as f64, 5.0 / n as f64);
    let mut g = 0.0;
    for i in 0..n {
        let x = -1.0 + (i as f64 + 0.5) * hx;
        let v = p.v(x);
        if v > 4.1 {
            continue;
        }
        for k in 0..n {
            let xi = -2.5 + (k as f64 + 0.5) * hy;
            g += rho.value(xi * xi / v + v);
        }
    }
    g *= hx * hy;
    assert!((i1 - g).abs() < 1e-4 * i1, "{i1} vs {g}");
}

#[test]
fn integration_by_parts_identity() {
    let p = make_round_sphere();
    for (c, w) in [(2.0, 0.5), (3.0, 1.5)] {
        let rho = TestFunction::new(Shape::SmoothBump {
            center: c,
            width: w,
        })
        .unwrap();
        let a = second_invariant_with(&p, &rho, 1.0, 1e-10, SecondForm::ThreeDerivatives).unwrap();
        let b =
            second_invariant_with(&p, &rho, 1.0, 1e-10, SecondForm::ThirdDerivativeOnly).unwrap();
        assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn area_grows_with_lambda() {
    let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.5, 1.0]).unwrap();
    let c = invariant_curve(&p, 1.0, &linspace(1.01, 8.0, 40)).unwrap();
    let w = c.w.unwrap();
    assert!(w.windows(2).all(|p| p[1] > p[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mirrored_profiles_share_invariants(
        a3 in -0.5f64..0.5,
        a4 in 0.0f64..1.0,
        lambda in 1.05f64..10.0,
        alpha in 0.5f64..1.5,
    ) {
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, a3, a4]).unwrap();
        let q = p.mirrored();
        let l = lambda * alpha * alpha;
        let (w1, w2) = (area(&p, l, alpha).unwrap(), area(&q, l, alpha).unwrap());
        prop_assert!((w1 - w2).abs() <= 1e-8 * w1.abs(), "{} vs {}", w1, w2);
        let (q1, q2) = (second_region(&p, l, alpha).unwrap(), second_region(&q, l, alpha).unwrap());
        prop_assert!((q1 - q2).abs() <= 1e-8 * q1.abs().max(1e-12), "{} vs {}", q1, q2);
    }

    #[test]
    fn area_scales_with_alpha(lambda in 1.05f64..10.0, alpha in 0.3f64..3.0) {
        // W(α²λ; α) = α W(λ; 1) since ξ_max scales by α
        let p = make_perturbed_well(&[0.0, 0.0, 1.0, 0.3]).unwrap();
        let a = area(&p, alpha * alpha * lambda, alpha).unwrap();
        let b = area(&p, lambda, 1.0).unwrap();
        prop_assert!((a - alpha * b).abs() <= 1e-10 * a);
    }
}
