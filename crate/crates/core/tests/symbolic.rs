use eqspec::symbolic::{canon, d_dx, d_dxi, eval, Assignment, Expr};
use num_complex::Complex64;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-5i64..=5, 1i64..=4).prop_map(|(n, d)| Expr::rational(n, d)),
        Just(Expr::i()),
        Just(Expr::alpha()),
        Just(Expr::xi()),
        (0u32..3).prop_map(Expr::v),
    ]
}

fn atom() -> impl Strategy<Value = Expr> {
    prop_oneof![Just(Expr::alpha()), Just(Expr::xi()), (0u32..3).prop_map(Expr::v)]
}

/// Bases that cannot vanish symbolically, for negative exponents.
fn nonzero_base() -> impl Strategy<Value = Expr> {
    prop_oneof![
        atom(),
        (1i64..=5).prop_map(Expr::int),
        (atom(), atom()).prop_map(|(a, b)| a + b),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 48, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Product),
            (inner, 0i32..=3).prop_map(|(b, e)| b.pow(e)),
            (nonzero_base(), -2i32..=-1).prop_map(|(b, e)| b.pow(e)),
        ]
    })
}

fn polynomial() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Product),
            (inner, 0i32..=3).prop_map(|(b, e)| b.pow(e)),
        ]
    })
}

fn assignment() -> impl Strategy<Value = Assignment> {
    (0.5f64..2.0, 0.5f64..2.0, prop::collection::vec(0.5f64..2.0, 8)).prop_map(|(a, x, v)| {
        Assignment {
            alpha: a,
            xi: x,
            v,
        }
    })
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * (1.0 + a.norm().max(b.norm()))
}

fn usable(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite() && z.norm() < 1e8
}

#[test]
fn documented_derivatives() {
    let v0 = Expr::v(0);
    assert_eq!(
        d_dx(&v0.clone().pow(2)),
        canon(&(Expr::int(2) * Expr::v(0) * Expr::v(1)))
    );
    assert!(d_dx(&(Expr::xi() * Expr::alpha())).is_zero());
    let e = Expr::xi().pow(2) * v0.clone().pow(-2);
    let want = Expr::int(-2) * Expr::xi().pow(2) * Expr::v(1) * v0.clone().pow(-3);
    assert_eq!(d_dx(&e), canon(&want));
    assert_eq!(d_dxi(&Expr::xi().pow(2)), canon(&(Expr::int(2) * Expr::xi())));
    assert!(d_dxi(&Expr::v(1)).is_zero());
    assert_eq!(
        d_dxi(&(Expr::xi().pow(3) * v0.clone().pow(-1))),
        canon(&(Expr::int(3) * Expr::xi().pow(2) * v0.pow(-1)))
    );
}

#[test]
fn documented_canonical_forms() {
    assert_eq!(canon(&(Expr::i() * Expr::i() * Expr::xi())), canon(&-Expr::xi()));
    let (x, v) = (Expr::xi(), Expr::v(0));
    assert_eq!(
        canon(&(x.clone() * v.clone() + v.clone() * x.clone())),
        canon(&(Expr::int(2) * x.clone() * v.clone()))
    );
    assert_eq!(
        canon(&((x.clone() + v.clone()) * (x.clone() - v.clone()))),
        canon(&(x.pow(2) - v.pow(2)))
    );
}

#[test]
fn x_derivative_matches_finite_differences() {
    // v(x) = 2 + sin x, so v⁽ʲ⁾(x) = sin(x + jπ/2) for j ≥ 1
    let jet = |x: f64| -> Vec<f64> {
        (0..8)
            .map(|j| {
                let s = (x + j as f64 * std::f64::consts::FRAC_PI_2).sin();
                if j == 0 {
                    2.0 + s
                } else {
                    s
                }
            })
            .collect()
    };
    let at = |x: f64| Assignment {
        alpha: 0.7,
        xi: 1.3,
        v: jet(x),
    };
    let exprs = [
        Expr::xi().pow(2) * Expr::v(0).pow(-3) * Expr::v(1),
        (Expr::alpha().pow(2) - Expr::xi().pow(2) * Expr::v(0).pow(-2)) * Expr::v(2),
        (Expr::v(0) + Expr::v(1)).pow(-1) * Expr::i(),
        Expr::v(2).pow(3) + Expr::rational(1, 3) * Expr::v(0).pow(-1),
    ];
    let h = 1e-4;
    for e in &exprs {
        for x in [0.1, 0.4, 1.1] {
            let fd = (eval(e, &at(x + h)) - eval(e, &at(x - h))) / (2.0 * h);
            let exact = eval(&d_dx(e), &at(x));
            assert!((fd - exact).norm() <= 1e-6 * exact.norm().max(1e-3), "{e} at {x}: {fd} vs {exact}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivatives_commute(e in expr()) {
        prop_assert_eq!(d_dx(&d_dxi(&e)), d_dxi(&d_dx(&e)));
    }

    #[test]
    fn canon_is_idempotent(e in expr()) {
        let c = canon(&e);
        prop_assert_eq!(canon(&c), c);
    }

    #[test]
    fn canon_preserves_value(e in expr(), a in assignment()) {
        let (x, y) = (eval(&e, &a), eval(&canon(&e), &a));
        prop_assume!(usable(x) && usable(y));
        prop_assert!(close(x, y, 1e-9), "{} vs {}", x, y);
    }

    #[test]
    fn eval_is_a_homomorphism(e1 in expr(), e2 in expr(), a in assignment()) {
        let (x, y) = (eval(&e1, &a), eval(&e2, &a));
        prop_assume!(usable(x) && usable(y));
        let s = eval(&(e1.clone() + e2.clone()), &a);
        let p = eval(&(e1 * e2), &a);
        prop_assert!(close(s, x + y, 1e-12));
        prop_assert!(close(p, x * y, 1e-12));
    }

    #[test]
    fn equal_canon_implies_equal_values(e in expr(), a in assignment()) {
        // an expanded product and its factored form, which canon often but
        // not always identifies (no rational-function normalization)
        let f = e.clone() * (Expr::xi() + Expr::v(0));
        let g = e.clone() * Expr::xi() + e * Expr::v(0);
        if canon(&f) == canon(&g) {
            let (x, y) = (eval(&f, &a), eval(&g, &a));
            prop_assume!(usable(x) && usable(y));
            prop_assert!(close(x, y, 1e-9));
        }
    }

    #[test]
    fn distribution_over_polynomials_is_canonical(e in polynomial()) {
        let f = e.clone() * (Expr::xi() + Expr::v(0));
        let g = e.clone() * Expr::xi() + e * Expr::v(0);
        prop_assert_eq!(canon(&f), canon(&g));
    }
}
