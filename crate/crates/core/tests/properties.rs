use std::f64::consts::PI;

use dnls_core::glassey::{linear_fit, scaling_identity_residual, tilde_transform};
use dnls_core::grids::{inner_product, lq_norm, GridSpec, RadialField, Space};
use dnls_core::nls::nonlinear_phase_step;
use dnls_core::pointop::{ModelParams, Sign};
use dnls_core::propagator::{apply_dollard, Dollard};
use dnls_core::specfun::{j0_y0, j1_y1, macdonald_k0};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid(n: u8) -> GridSpec {
    GridSpec::new(n, 256, 20.0, 8.0).unwrap()
}

/// A smooth complex field `a·e^{-r²/2w²}·e^{i c r²}`.
fn chirped(g: &GridSpec, a: f64, w: f64, c: f64) -> RadialField {
    RadialField::from_fn(g, Space::Position, |r| Complex64::from_polar(a * (-r * r / (2.0 * w * w)).exp(), c * r * r))
}

fn sign(focusing: bool) -> Sign {
    if focusing {
        Sign::Focusing
    } else {
        Sign::Defocusing
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phase_step_preserves_modulus(
        n in 2u8..=3, p in 1.05f64..4.0, dt in -2.0f64..2.0, a in 0.0f64..5.0, w in 0.5f64..5.0, c in -1.0f64..1.0, focusing: bool,
    ) {
        let g = grid(n);
        let params = ModelParams::new(n, 0.0, sign(focusing), p).unwrap();
        let psi = chirped(&g, a, w, c);
        let out = nonlinear_phase_step(&params, &psi, dt);
        for (x, y) in psi.values.iter().zip(&out.values) {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn phase_steps_compose(n in 2u8..=3, p in 1.05f64..4.0, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0, a in 0.1f64..3.0) {
        let g = grid(n);
        let params = ModelParams::new(n, 0.0, Sign::Defocusing, p).unwrap();
        let psi = chirped(&g, a, 2.0, 0.1);
        let two = nonlinear_phase_step(&params, &nonlinear_phase_step(&params, &psi, t1), t2);
        let one = nonlinear_phase_step(&params, &psi, t1 + t2);
        prop_assert!(two.sub(&one).unwrap().l2_norm() <= 1e-10 * (1.0 + psi.l2_norm()));
    }

    #[test]
    fn scaling_identity_is_exact(
        n in 2u8..=3, p in 1.1f64..3.0, s in 1.0f64..100.0, w1 in 0.5f64..4.0, w2 in 0.5f64..4.0, c in -0.5f64..0.5,
    ) {
        let g = grid(n);
        let params = ModelParams::new(n, 0.0, Sign::Defocusing, p).unwrap();
        let psi = chirped(&g, 1.0, w1, c);
        let w = chirped(&g, 1.0, w2, -c);
        prop_assert!(scaling_identity_residual(&params, &psi, &w, s).unwrap() <= 1e-9);
    }

    #[test]
    fn tilde_transform_is_isometric(n in 2u8..=3, s in 1.0f64..200.0, w in 0.3f64..6.0, c in -1.0f64..1.0) {
        let g = grid(n);
        let f = chirped(&g, 1.0, w, c);
        let t = tilde_transform(&f, s).unwrap();
        prop_assert!((t.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn tilde_transform_rescales_lq(n in 2u8..=3, s in 1.0f64..50.0, q in 1.2f64..6.0, w in 0.5f64..4.0) {
        // ‖D_s* f‖_q^q = (2s)^{-n(2-q)/2} ‖f‖_q^q for the unitary dilation
        let g = grid(n);
        let f = chirped(&g, 1.0, w, 0.3);
        let t = tilde_transform(&f, s).unwrap();
        let lhs = lq_norm(&t, q).unwrap().powf(q);
        let rhs = (2.0 * s).powf(-(n as f64) * (2.0 - q) / 2.0) * lq_norm(&f, q).unwrap().powf(q);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn modulation_is_unitary_and_invertible(n in 2u8..=3, t in 0.01f64..100.0, w in 0.5f64..4.0) {
        let g = grid(n);
        let f = chirped(&g, 1.0, w, 0.2);
        let m = apply_dollard(&f, t, Dollard::M).unwrap();
        let back = apply_dollard(&m, t, Dollard::MStar).unwrap();
        prop_assert!((m.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
        prop_assert!(back.sub(&f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn inner_product_is_hermitian(n in 2u8..=3, w1 in 0.5f64..4.0, w2 in 0.5f64..4.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
        let g = grid(n);
        let f = chirped(&g, 1.0, w1, c1);
        let h = chirped(&g, 1.0, w2, c2);
        let a = inner_product(&f, &h).unwrap();
        let b = inner_product(&h, &f).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
        prop_assert!(a.norm() <= f.l2_norm() * h.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn bessel_wronskian(x in 0.01f64..200.0) {
        let (j0, y0) = j0_y0(x);
        let (j1, y1) = j1_y1(x);
        let expected = 2.0 / (PI * x);
        prop_assert!((j1 * y0 - j0 * y1 - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn macdonald_k0_is_positive_and_decreasing(x in 1e-6f64..600.0, dx in 1e-3f64..1.0) {
        let a = macdonald_k0(x).unwrap();
        let b = macdonald_k0(x + dx).unwrap();
        prop_assert!(a > 0.0 || x > 700.0);
        prop_assert!(b < a || a == 0.0);
    }

    #[test]
    fn linear_fit_recovers_lines(a in -10.0f64..10.0, b in -10.0f64..10.0, m in 3usize..40) {
        let x: Vec<f64> = (0..m).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let fit = linear_fit(&x, &y);
        prop_assert!((fit.a - a).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()));
        prop_assert!((fit.b - b).abs() <= 1e-9 * (1.0 + b.abs()));
    }
}
