//! Frozen reference values. Each constant was either derived by hand from the
//! defining formulas or recorded once from a reviewed run and must not drift.

#![allow(clippy::excessive_precision, clippy::needless_range_loop)]

use blockpr::analysis::{dense_oracle, fixture_signal, s_modulus_table};
use blockpr::lifted::{block_by_summation, first_block_row};
use blockpr::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn lifted_index_fixture_listing() {
    // (|x1|^2, conj(x1)x2, conj(x2)x1, |x2|^2, ..., conj(x4)x1, conj(x1)x4), 1-based pairs.
    let pairs = [
        (1, 1), (1, 2), (2, 1), (2, 2), (2, 3), (3, 2),
        (3, 3), (3, 4), (4, 3), (4, 4), (4, 1), (1, 4),
    ];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        assert_eq!(lifted_index(i - 1, j - 1, 4, 2).unwrap(), k);
    }
    assert_eq!(lifted_index(0, 0, 4, 2).unwrap() + 1, 1);
    assert_eq!(lifted_index(3, 0, 4, 2).unwrap() + 1, 11);
    assert_eq!(lifted_index(0, 3, 4, 2).unwrap() + 1, 12);
    assert!(lifted_index(0, 3, 8, 2).is_err());
}

#[test]
fn fixture_measurements_by_hand() {
    // Mask 1 is (g1, g2) with g_k = e^{-k/4} / 3^{1/4}; x = (1, i, -1, 2).
    let g1 = (-0.25f64).exp() / 3f64.powf(0.25);
    let g2 = (-0.5f64).exp() / 3f64.powf(0.25);
    let ens = build_deterministic_masks(4, 2, None).unwrap();
    let b = correlation_measure(&fixture_signal(), &ens).unwrap();
    let hand = [
        (c(g1, 0.0) + c(0.0, g2)).norm_sqr(),
        (c(0.0, g1) - c(g2, 0.0)).norm_sqr(),
        (c(-g1, 0.0) + c(2.0 * g2, 0.0)).norm_sqr(),
        (c(2.0 * g1, 0.0) + c(g2, 0.0)).norm_sqr(),
    ];
    for (s, h) in hand.iter().enumerate() {
        assert!((b.get(0, s) - h).abs() < 1e-15);
    }
    let frozen = [
        0.5625759340465116, 0.5625759340465116, 0.10887799169069391, 2.704001678541864,
        1.0349424867875263, 1.0349424867875263, 1.745203729977896, 1.0676759402546616,
        0.09020938130549697, 0.09020938130549697, 1.7452037299778969, 1.067675940254661,
    ];
    for (u, v) in b.entries().iter().zip(frozen) {
        assert!((u - v).abs() < 1e-14);
    }
}

#[test]
fn fixture_matrices_match_printed_layout() {
    let ens = build_deterministic_masks(4, 2, None).unwrap();
    let o = dense_oracle(&ens).unwrap();
    let m = |l: usize, j: usize, k: usize| ens.support(l)[j - 1] * ens.support(l)[k - 1].conj();
    // Printed M: block l row s has conj(m_l)_1 at column s and conj(m_l)_2 at s+1.
    for l in 0..3 {
        for s in 0..4 {
            for col in 0..4 {
                let expected = if col == s {
                    ens.support(l)[0].conj()
                } else if col == (s + 1) % 4 {
                    ens.support(l)[1].conj()
                } else {
                    c(0.0, 0.0)
                };
                assert!(close(o.m[(l * 4 + s, col)], expected, 0.0));
            }
        }
    }
    // Printed M': rows of shift s carry m_{11} m_{12} m_{21} m_{22} starting at column 3s,
    // the last shift wraps with m_{22} in column 0.
    for s in 0..4 {
        for l in 0..3 {
            let row = s * 3 + l;
            let mut expected = [c(0.0, 0.0); 12];
            let start = 3 * s;
            expected[start % 12] = m(l, 1, 1);
            expected[(start + 1) % 12] = m(l, 1, 2);
            expected[(start + 2) % 12] = m(l, 2, 1);
            expected[(start + 3) % 12] = m(l, 2, 2);
            for col in 0..12 {
                assert!(close(o.m_prime[(row, col)], expected[col], 1e-15), "row {row} col {col}");
            }
        }
    }
}

#[test]
fn fixture_solve_and_recover() {
    let ens = build_deterministic_masks(4, 2, None).unwrap();
    let sys = assemble_blocks(&ens).unwrap();
    let x = fixture_signal();
    let b = correlation_measure(&x, &ens).unwrap();
    let y = solve_lifted(&sys, &b).unwrap();
    let printed = [
        c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0),
        c(1.0, 0.0), c(-2.0, 0.0), c(-2.0, 0.0), c(4.0, 0.0), c(2.0, 0.0), c(2.0, 0.0),
    ];
    for (u, v) in y.entries().iter().zip(printed) {
        assert!(close(*u, v, 1e-10), "{u} vs {v}");
    }
    let rec = blockpr_recover(&b, &sys).unwrap();
    let err = global_phase_align(&x, &rec.signal).unwrap();
    assert!(err.absolute_l2 < 1e-10 * x.norm());
    assert_eq!(rec.diagnostics.anchor, 3);
}

#[test]
fn s_table_frozen_values() {
    let s = s_table(8, 3, 4.0).unwrap();
    let frozen = [
        (0, 0, c(1.19754026103250544e0, 0.0)),
        (0, 1, c(7.58871349601204725e-1, 0.0)),
        (0, 2, c(3.67879441171442334e-1, 0.0)),
        (1, 0, c(8.66660707224077731e-1, 4.83260207659874153e-1)),
        (1, 3, c(2.60130047511444473e-1, 2.60130047511444418e-1)),
        (5, 0, c(3.46400612201189062e-1, -3.69998873630146274e-2)),
        (5, 3, c(-2.60130047511444529e-1, -2.60130047511444418e-1)),
    ];
    for (k, j, v) in frozen {
        assert!(close(s[k * 5 + j], v, 1e-14), "s[{k}][{j}]");
    }
    // j = delta - 1 (0-based) is the single product e^{-(delta+1)/a} for every k.
    for k in 0..8 {
        assert!(close(s[k * 5 + 2], c((-1.0f64).exp(), 0.0), 1e-15));
    }
    let modulus = s_modulus_table(8, 3, 4.0).unwrap();
    for (u, v) in s.iter().zip(&modulus) {
        assert!((u.norm() - v).abs() < 1e-12);
    }
    // k = 0, j = 0, delta = 2, a = 4 by direct substitution.
    let s2 = s_table(8, 2, 4.0).unwrap();
    let hand = (-0.5f64).exp() * (1.0 - (-1.0f64).exp()) / (1.0 - (-0.5f64).exp());
    assert!(close(s2[0], c(hand, 0.0), 1e-15));
}

#[test]
fn closed_form_equals_summation_across_sizes() {
    for (d, delta) in [(16, 3), (9, 5), (64, 8), (33, 16)] {
        let ens = build_deterministic_masks(d, delta, None).unwrap();
        let sys = assemble_blocks(&ens).unwrap();
        let row = first_block_row(&ens);
        for k in 0..d {
            let diff = (sys.block(k) - block_by_summation(&row, k, d)).norm();
            assert!(diff < 1e-12, "d={d} delta={delta} k={k}: {diff}");
        }
    }
}

#[test]
fn condition_numbers_frozen() {
    let frozen = [
        (2, 4.08298816507359774e0),
        (3, 6.44317737856933803e0),
        (8, 2.84178881780217054e1),
        (12, 6.54442795507739987e1),
        (24, 2.61732970990111426e2),
    ];
    for (delta, kappa) in frozen {
        for d in [64, 128] {
            let sys = assemble_blocks(&build_deterministic_masks(d, delta, None).unwrap()).unwrap();
            let got = condition_number(&sys).unwrap().kappa;
            assert!((got - kappa).abs() < 1e-10 * kappa, "d={d} delta={delta}: {got}");
            assert!(got < kappa_bound(delta));
        }
    }
}

#[test]
fn seeded_streams_frozen() {
    let e = build_random_masks(8, 2, 1.0, 42).unwrap();
    assert!(close(e.support(0)[0], c(0.031590840377579935, -0.17368872527547735), 1e-15));
    assert!(close(e.support(0)[1], c(-0.5276604927495575, -1.190005495101654), 1e-15));
    let w = build_flattener(8, 7).unwrap();
    assert_eq!(w.permutation(), &[0, 1, 7, 4, 2, 5, 3, 6]);
    assert_eq!(w.signs(), &[-1.0, -1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0]);
    let g = gaussian_signal(4, 1);
    assert!(close(g.entries()[2], c(2.339431061763559, -0.4720541678732907), 1e-15));
}

#[test]
fn diagonal_positions_from_one_based_formula() {
    // y_i = conj(x_{ceil((i+delta-1)/(2delta-1))}) x_{... + ((i+delta-2) mod (2delta-1)) - delta + 1}
    let (d, delta) = (8usize, 3usize);
    let w = 2 * delta - 1;
    let mut diag = Vec::new();
    for i in 1..=w * d {
        let a = (i + delta - 1).div_ceil(w);
        let b = (a + (i + delta - 2) % w) as isize - delta as isize + 1;
        let b = ((b - 1).rem_euclid(d as isize) + 1) as usize;
        let a = ((a - 1) % d) + 1;
        assert_eq!(lifted_index(a - 1, b - 1, d, delta).unwrap(), i - 1);
        if a == b {
            diag.push(i);
        }
    }
    assert_eq!(diag, (0..d).map(|j| 1 + j * w).collect::<Vec<_>>());
}

#[test]
fn snr_variance_examples() {
    assert!((snr_to_noise_variance(100.0, 10, 10.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((snr_to_noise_variance(100.0, 10, 0.0).unwrap() - 10.0).abs() < 1e-15);
    assert!((snr_to_noise_variance(50.0, 25, 20.0).unwrap() - 0.02).abs() < 1e-15);
    assert!(snr_to_noise_variance(0.0, 10, 10.0).is_err());
}
