//! Wave operator `W = I + Ω` through the factorisation `Ω = K m(|D|)`, the
//! time-scaled multipliers `m_t`, and the commutation of `Ω` with the
//! Dollard dilation.
//!
//! Conventions (fixed so that `W = F♯*F` holds with the eigenfunctions of
//! [`crate::genft`]):
//!
//! * n = 2: `m_t(k) = 2π / (2πα + ln(k/2) - ln t + γ + iπ/2)` and
//!   `Kg(r) = (i/8π) ∫ H0^(1)(-kr) (Fg)(k) d²k`;
//! * n = 3: `m_t(k) = k / (αt + ik/4π)` and
//!   `Kg(r) = (2π)^{-3/2} r^{-1} ∫₀^∞ k e^{-ikr} (Fg)(k) dk`.
//!
//! `K` commutes with dilations, so `D_t* Ω = K m_{2t}(|D|) D_t*` where the
//! factor 2 comes from `D_t f(x) = (i2t)^{-n/2} f(x/2t)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{DnlsError, Result};
use crate::genft::{fourier_radial, kernel_matrix, plane_normalisation, Direction, GenFourier};
use crate::grids::{RadialField, Space};
use crate::pointop::ModelParams;
use crate::propagator::{dilate, Dilation};
use crate::specfun::EULER_GAMMA;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSpec {
    pub n: u8,
    pub alpha: f64,
    pub t_scale: f64,
}

impl MultiplierSpec {
    pub fn new(params: &ModelParams, t_scale: f64) -> Result<Self> {
        if !(t_scale > 0.0 && t_scale.is_finite()) {
            return Err(DnlsError::Domain {
                function: "MultiplierSpec::new",
                value: t_scale,
                reason: "time scale must be positive",
            });
        }
        Ok(MultiplierSpec { n: params.n, alpha: params.alpha, t_scale })
    }

    /// `m_t(k)`.
    pub fn value(&self, k: f64) -> Complex64 {
        let i = Complex64::i();
        if self.n == 2 {
            2.0 * PI / self.denominator_2d(k)
        } else {
            k / (self.alpha * self.t_scale + i * k / (4.0 * PI))
        }
    }

    /// `2πα + ln(k/2) - ln t + γ + iπ/2`, of modulus at least `π/2`.
    pub fn denominator_2d(&self, k: f64) -> Complex64 {
        Complex64::new(2.0 * PI * self.alpha + (k / 2.0).ln() - self.t_scale.ln() + EULER_GAMMA, PI / 2.0)
    }

    /// Frequency where the real part of the 2D denominator vanishes and
    /// `|m_t| = 4`: `k = 2t e^{-2πα-γ}`.
    pub fn resonance_2d(&self) -> f64 {
        2.0 * self.t_scale * (-2.0 * PI * self.alpha - EULER_GAMMA).exp()
    }

    /// `sup_k |m_t(k)|`: 4 in 2D and `4π` in 3D (approached as `k → ∞`,
    /// attained everywhere when α = 0).
    pub fn sup_bound(&self) -> f64 {
        if self.n == 2 {
            4.0
        } else {
            4.0 * PI
        }
    }
}

/// `m_t(|D|) f = F^{-1}[m_t · F f]`.
pub fn apply_multiplier(spec: &MultiplierSpec, f: &RadialField) -> Result<RadialField> {
    f.require_space(Space::Position, "apply_multiplier")?;
    let ff = fourier_radial(f, Direction::Forward)?;
    let scaled = ff.map(|k, v| v * spec.value(k));
    fourier_radial(&scaled, Direction::Inverse)
}

/// `K g` for a position-space `g` (dilated fields allowed: `K` commutes with
/// dilations).
pub fn apply_k(params: &ModelParams, g: &RadialField) -> Result<RadialField> {
    g.require_space(Space::Position, "apply_K")?;
    if g.dim() != params.n {
        return Err(DnlsError::GridMismatch("model and field dimensions differ".into()));
    }
    let s = g.scale();
    let base = g.clone().dilated(1.0 / s);
    let fg = fourier_radial(&base, Direction::Forward)?;
    let grid = g.grid();
    let w = &grid.k().weights;
    let x: Vec<Complex64> = fg.values.iter().zip(w).map(|(v, w)| v * w).collect();
    let i = Complex64::i();
    // Kg(r_j) = Σ_i A_ij y_i + B_ij z_i
    let (cy, cz) = if params.n == 2 {
        // (i/8π)(-A + iB)
        (-i / (8.0 * PI), Complex64::new(-1.0 / (8.0 * PI), 0.0))
    } else {
        // (2π)^{-3/2} (B - iA) / 4π, using k e^{-ikr}/r = k² (B - iA) and w = 4πk² dk
        let c = plane_normalisation(3) / (4.0 * PI);
        (-i * c, Complex64::new(c, 0.0))
    };
    let y: Vec<Complex64> = x.iter().map(|v| v * cy).collect();
    let z: Vec<Complex64> = x.iter().map(|v| v * cz).collect();
    let out = kernel_matrix(grid).cols_apply(&y, Some(&z));
    Ok(RadialField::from_values(grid, Space::Position, out)?.dilated(s))
}

/// `Ω f = K m_t(|D|) f`.
pub fn apply_omega(params: &ModelParams, t_scale: f64, f: &RadialField) -> Result<RadialField> {
    let spec = MultiplierSpec::new(params, t_scale)?;
    apply_k(params, &apply_multiplier(&spec, f)?)
}

/// `W f = f + K m(|D|) f`.
pub fn apply_wave_operator(params: &ModelParams, f: &RadialField) -> Result<RadialField> {
    f.add(&apply_omega(params, 1.0, f)?)
}

/// `W f = F♯*(F f)`, the independent route.
pub fn wave_operator_spectral(params: &ModelParams, f: &RadialField) -> Result<RadialField> {
    let gf = GenFourier::new(params, f.grid())?;
    gf.adjoint(&fourier_radial(f, Direction::Forward)?)
}

/// `‖(I + Ω) f - F♯*F f‖ / ‖f‖`.
pub fn route_discrepancy(params: &ModelParams, f: &RadialField) -> Result<f64> {
    let a = apply_wave_operator(params, f)?;
    let b = wave_operator_spectral(params, f)?;
    Ok(a.sub(&b)?.l2_norm() / f.l2_norm())
}

/// `‖D_t*(K m(|D|) f) - K m_{2t}(|D|)(D_t* f)‖ / ‖f‖`.
///
/// Both sides are evaluated on exactly dilated grids, so the residual only
/// reflects rounding and the quadrature of the transforms involved.
pub fn commutation_residual(params: &ModelParams, t: f64, f: &RadialField) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(DnlsError::Domain { function: "commutation_residual", value: t, reason: "t must be at least 1" });
    }
    let lhs = dilate(&apply_omega(params, 1.0, f)?, t, Dilation::DStar)?;
    let rhs = apply_omega(params, 2.0 * t, &dilate(f, t, Dilation::DStar)?)?;
    Ok(lhs.sub(&rhs)?.l2_norm() / f.l2_norm())
}

/// Same as [`commutation_residual`] but with the multiplier scaled by `t`
/// instead of `2t`; used to show which scaling the dilation requires.
pub fn commutation_residual_with_scale(params: &ModelParams, t: f64, t_scale: f64, f: &RadialField) -> Result<f64> {
    let lhs = dilate(&apply_omega(params, 1.0, f)?, t, Dilation::DStar)?;
    let rhs = apply_omega(params, t_scale, &dilate(f, t, Dilation::DStar)?)?;
    Ok(lhs.sub(&rhs)?.l2_norm() / f.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{random_smooth_field, GridSpec};
    use crate::pointop::Sign;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prm(n: u8, alpha: f64) -> ModelParams {
        ModelParams::new(n, alpha, Sign::Defocusing, 2.0).unwrap()
    }

    fn grid(n: u8) -> GridSpec {
        GridSpec::new(n, 1024, 30.0, 20.0).unwrap()
    }

    fn gaussian(g: &GridSpec) -> RadialField {
        RadialField::from_real_fn(g, Space::Position, |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn three_d_zero_alpha_multiplier_is_constant() {
        let spec = MultiplierSpec::new(&prm(3, 0.0), 1.0).unwrap();
        let g = grid(3);
        let f = gaussian(&g);
        let out = apply_multiplier(&spec, &f).unwrap();
        let expect = f.scaled(Complex64::new(0.0, -4.0 * PI));
        assert!(out.sub(&expect).unwrap().l2_norm() < 1e-6 * expect.l2_norm());
        for k in [1e-3, 1.0, 1e3] {
            assert!((spec.value(k) - Complex64::new(0.0, -4.0 * PI)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_d_denominator_bounded_below() {
        let g = grid(2);
        for alpha in [-1.0, 0.0, 0.5] {
            for t in [1.0, 10.0, 1e3, 1e6] {
                let spec = MultiplierSpec::new(&prm(2, alpha), t).unwrap();
                for &k in &g.k().nodes {
                    assert!(spec.denominator_2d(k).norm() >= PI / 2.0);
                }
                let kr = spec.resonance_2d();
                assert!((spec.value(kr).norm() - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multiplier_tends_to_zero_pointwise_not_uniformly() {
        let g = grid(2);
        let p = prm(2, 0.0);
        let f = gaussian(&g);
        let mut last = f64::INFINITY;
        for t in [1.0, 10.0, 1e3, 1e6] {
            let spec = MultiplierSpec::new(&p, t).unwrap();
            let norm = apply_multiplier(&spec, &f).unwrap().l2_norm();
            assert!(norm < last);
            assert!(norm <= spec.sup_bound() * f.l2_norm() * (1.0 + 1e-6));
            last = norm;
            assert!(spec.value(spec.resonance_2d()).norm() >= 4.0 - 1e-12);
        }
    }

    #[test]
    fn multiplier_uniformly_bounded_3d() {
        let g = grid(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alpha in [-1.0, 1.0] {
            let p = prm(3, alpha);
            for t in [1.0, 10.0, 1e3, 1e6] {
                let spec = MultiplierSpec::new(&p, t).unwrap();
                for _ in 0..3 {
                    let f = random_smooth_field(&g, Space::Position, &mut rng, 1.0);
                    let ratio = apply_multiplier(&spec, &f).unwrap().l2_norm() / f.l2_norm();
                    assert!(ratio <= 4.0 * PI * (1.0 + 1e-6));
                }
            }
        }
    }

    #[test]
    fn k_of_zero_is_zero() {
        for n in [2u8, 3] {
            let g = grid(n);
            let z = RadialField::zeros(&g, Space::Position);
            assert_eq!(apply_k(&prm(n, 0.0), &z).unwrap().l2_norm(), 0.0);
        }
    }

    #[test]
    fn routes_agree() {
        for (n, alpha) in [(2u8, -0.5), (2, 0.0), (3, -1.0), (3, 0.0), (3, 1.0)] {
            let g = grid(n);
            let f = gaussian(&g);
            let d = route_discrepancy(&prm(n, alpha), &f).unwrap();
            assert!(d < 1e-2, "n={n} α={alpha}: {d}");
        }
    }

    #[test]
    fn large_alpha_gives_identity() {
        for n in [2u8, 3] {
            let g = grid(n);
            let f = gaussian(&g);
            let w = apply_wave_operator(&prm(n, 1e8), &f).unwrap();
            assert!(w.sub(&f).unwrap().l2_norm() < 1e-6 * f.l2_norm());
        }
    }

    #[test]
    fn commutation_requires_doubled_scale() {
        for (n, alpha) in [(2u8, 0.3), (3, -1.0)] {
            let g = grid(n);
            let p = prm(n, alpha);
            let f = gaussian(&g);
            assert!(commutation_residual(&p, 1.0, &f).unwrap() < 1e-10);
            let r = commutation_residual(&p, 10.0, &f).unwrap();
            assert!(r < 1e-10, "{r}");
            let wrong = commutation_residual_with_scale(&p, 10.0, 10.0, &f).unwrap();
            assert!(wrong > 1e-3, "{wrong}");
        }
    }
}
