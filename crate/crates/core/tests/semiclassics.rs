use eqspec::semiclassics::{assemble_term, b_recursion, b_sequence, reference_b1_b2, DEFAULT_MAX_ORDER};
use eqspec::symbolic::{canon, i_powers, xi_parity, Expr};

#[test]
fn closed_forms_for_first_two_symbols() {
    let (r1, r2) = reference_b1_b2();
    assert_eq!(b_recursion(1, DEFAULT_MAX_ORDER).unwrap(), r1);
    assert_eq!(b_recursion(2, DEFAULT_MAX_ORDER).unwrap(), r2);
}

#[test]
fn symbols_vanish_at_t_zero() {
    for (k, b) in b_sequence(4).iter().enumerate().skip(1) {
        assert!(b.coefficient(0).is_zero(), "b_{k}(t = 0) != 0");
    }
}

#[test]
fn degree_in_t_is_at_most_2k() {
    for (k, b) in b_sequence(4).iter().enumerate() {
        assert!(b.degree().unwrap_or(0) <= 2 * k as u32, "b_{k} has degree {:?}", b.degree());
    }
}

#[test]
fn xi_parity_follows_k() {
    for (k, b) in b_sequence(4).iter().enumerate() {
        for (l, c) in b.terms() {
            assert_eq!(xi_parity(c), Some((k % 2) as u8), "b_{k},{l}");
        }
    }
}

#[test]
fn even_orders_are_real_and_odd_orders_vanish() {
    for k in 1..=4 {
        let t = assemble_term(k, DEFAULT_MAX_ORDER).unwrap();
        if k % 2 == 0 {
            assert_eq!(t.uniform_i_power(), Some(0), "order {k}");
            assert!(!t.zero_by_parity);
        } else {
            assert!(t.zero_by_parity, "order {k}");
        }
        for (_, e) in &t.integrands {
            assert_eq!(canon(e), *e);
            assert!(i_powers(e).iter().all(|&p| p < 4));
        }
    }
}

#[test]
fn leading_symbol_is_one() {
    assert_eq!(b_sequence(0)[0].coefficient(0), canon(&Expr::one()));
}
