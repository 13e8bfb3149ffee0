//! Linear flows `e^{itΔ}` and `e^{-itH_α}`, the Dollard operators
//! `M_t f(x) = e^{i|x|²/4t} f(x)` and `D_t f(x) = (i2t)^{-n/2} f(x/2t)`, and
//! the finite-time residuals of the large-time asymptotics.
//!
//! `D_t` is available in two forms: [`dilate`] relabels the samples onto the
//! dilated axis (exact, no interpolation), while [`apply_dollard`] returns
//! the result on the original nodes via monotone cubic resampling.

use num_complex::Complex64;

use crate::error::{DnlsError, Result};
use crate::genft::{fourier_radial, Direction, GenFourier};
use crate::grids::{resample, GridSpec, RadialField, Space};
use crate::pointop::{bound_state, BoundState, ModelParams};
use crate::waveop::wave_operator_spectral;

/// Comparison times used by the asymptotic checks.
pub const COMPARISON_TIMES: [f64; 6] = [5.0, 10.0, 20.0, 40.0, 80.0, 160.0];

/// `(i2t)^{-n/2}` on the principal branch: `(2t)^{-n/2} e^{-iπn/4}`.
pub fn branch_phase(n: u8, t: f64) -> Complex64 {
    let nf = n as f64;
    Complex64::from_polar((2.0 * t).powf(-nf / 2.0), -std::f64::consts::FRAC_PI_4 * nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dilation {
    D,
    DStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dollard {
    M,
    MStar,
    D,
    DStar,
}

fn check_time(function: &'static str, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(DnlsError::Domain { function, value: t, reason: "t must be positive" })
    }
}

/// Exact `D_t` / `D_t*`: same samples on the axis dilated by `2t` (or
/// `1/2t`), multiplied by the branch factor.
pub fn dilate(f: &RadialField, t: f64, which: Dilation) -> Result<RadialField> {
    check_time("dilate", t)?;
    let c = branch_phase(f.dim(), t);
    Ok(match which {
        Dilation::D => f.scaled(c).dilated(2.0 * t),
        Dilation::DStar => f.scaled(c.inv()).dilated(0.5 / t),
    })
}

/// `M_t` (or `M_t*`) as a pointwise phase.
pub fn modulate(f: &RadialField, t: f64, conjugate: bool) -> Result<RadialField> {
    check_time("modulate", t)?;
    let sign = if conjugate { -1.0 } else { 1.0 };
    Ok(f.map(|x, v| v * Complex64::from_polar(1.0, sign * x * x / (4.0 * t))))
}

/// Dollard operators returning a field on the input's own nodes (dilations
/// are resampled by monotone cubic interpolation, zero beyond the last node).
pub fn apply_dollard(f: &RadialField, t: f64, which: Dollard) -> Result<RadialField> {
    check_time("apply_dollard", t)?;
    let nodes = f.nodes();
    let c = branch_phase(f.dim(), t);
    let (factor, stretch) = match which {
        Dollard::M => return modulate(f, t, false),
        Dollard::MStar => return modulate(f, t, true),
        Dollard::D => (c, 0.5 / t),
        Dollard::DStar => (c.inv(), 2.0 * t),
    };
    let targets: Vec<f64> = nodes.iter().map(|x| x * stretch).collect();
    let values = resample(&nodes, &f.values, &targets).into_iter().map(|v| v * factor).collect();
    Ok(f.with_values(values))
}

/// Brings a field living on any (dilated) axis onto the position nodes of
/// `grid`: zero beyond its last node, constant below its first.
pub fn resample_onto(f: &RadialField, grid: &GridSpec) -> Result<RadialField> {
    let values = resample(&f.nodes(), &f.values, &grid.r().nodes);
    RadialField::from_values(grid, Space::Position, values)
}

/// `M_t D_t g` for a frequency-space `g`, returned on the position grid of
/// `g`'s grid. The smooth profile `D_t g` is resampled before the phase is
/// applied.
pub fn dollard_profile(g: &RadialField, t: f64) -> Result<RadialField> {
    g.require_space(Space::Frequency, "dollard_profile")?;
    let d = dilate(g, t, Dilation::D)?;
    let on_r = resample_onto(&d, g.grid())?;
    modulate(&on_r, t, false)
}

/// `e^{itΔ} f = F^{-1}[e^{-itk²} F f]`.
pub fn free_evolve(f: &RadialField, t: f64) -> Result<RadialField> {
    f.require_space(Space::Position, "free_evolve")?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let ff = fourier_radial(f, Direction::Forward)?;
    fourier_radial(&ff.map(|k, v| v * Complex64::from_polar(1.0, -t * k * k)), Direction::Inverse)
}

/// Fractions of `K_max` bracketing the dispersion roll-off of [`Propagator::evolve_retaining`].
pub const ROLL_LO: f64 = 0.5;
pub const ROLL_HI: f64 = 0.8;

/// Spectral data of a field: bound-state amplitude and `F♯f`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub bound: Complex64,
    pub continuum: RadialField,
}

/// `e^{-itH_α}` through the spectral representation
/// `e^{-itE_α} Φ_α⟨Φ_α, f⟩ + F♯*(e^{-itk²} F♯f)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    gf: GenFourier,
    bound: BoundState,
}

impl Propagator {
    pub fn new(params: &ModelParams, grid: &GridSpec) -> Result<Self> {
        Ok(Propagator { gf: GenFourier::new(params, grid)?, bound: bound_state(params, grid) })
    }

    pub fn params(&self) -> &ModelParams {
        self.gf.params()
    }

    pub fn grid(&self) -> &GridSpec {
        self.gf.grid()
    }

    pub fn gen_fourier(&self) -> &GenFourier {
        &self.gf
    }

    pub fn bound_state(&self) -> &BoundState {
        &self.bound
    }

    /// Bound-state amplitude and `F♯` of the remainder. On the grid `Φ_α` is
    /// not exactly orthogonal to the range of `F♯*`; projecting it out on
    /// both sides keeps the split an orthogonal sum, so repeated steps do
    /// not leak mass between the two parts.
    pub fn analyse(&self, f: &RadialField) -> Result<SpectralData> {
        let bound = self.bound.overlap(f)?;
        let rest = self.bound.project_out(f)?;
        Ok(SpectralData { bound, continuum: self.gf.transform(&rest)? })
    }

    /// Field with the given spectral data evolved to time `t`.
    pub fn synthesise(&self, data: &SpectralData, t: f64) -> Result<RadialField> {
        let phased = data.continuum.map(|k, v| v * Complex64::from_polar(1.0, -t * k * k));
        let mut out = self.bound.project_out(&self.gf.adjoint(&phased)?)?;
        if let Some(phi) = &self.bound.phi {
            let c = data.bound * Complex64::from_polar(1.0, -t * self.bound.e_alpha);
            out.axpy(c, phi)?;
        }
        Ok(out)
    }

    pub fn evolve(&self, f: &RadialField, t: f64) -> Result<RadialField> {
        self.synthesise(&self.analyse(f)?, t)
    }

    /// Step of the discrete flow used by the nonlinear solver:
    /// `f + Φ_α(e^{-itE_α} - 1)⟨Φ_α, f⟩ + F♯*((e^{-itω(k)} - 1) F♯f)` with
    /// `ω(k) = k²` rolled off to 0 between `ROLL_LO·K` and `ROLL_HI·K`.
    /// Content the grid cannot resolve (the singular remainder of a
    /// nonlinear kick, frequencies near `K`) is carried along instead of
    /// deleted, and the roll-off keeps the increment away from where
    /// `F♯F♯* ≠ 1`. The steps then compose as a group to quadrature
    /// accuracy, which is what the splitting needs to stay second order and
    /// time-reversible.
    pub fn evolve_retaining(&self, f: &RadialField, t: f64) -> Result<RadialField> {
        let data = self.analyse(f)?;
        let k_max = self.grid().k_max();
        let (lo, hi) = (ROLL_LO * k_max, ROLL_HI * k_max);
        let roll = |k: f64| {
            let x = ((k - lo) / (hi - lo)).clamp(0.0, 1.0);
            0.5 * (1.0 + (std::f64::consts::PI * x).cos())
        };
        let delta = |phase: f64| Complex64::from_polar(1.0, phase) - 1.0;
        let increment = SpectralData {
            bound: data.bound * delta(-t * self.bound.e_alpha),
            continuum: data.continuum.map(|k, v| v * delta(-t * k * k * roll(k))),
        };
        let mut out = f.clone();
        out.axpy(Complex64::new(1.0, 0.0), &self.synthesise(&increment, 0.0)?)?;
        Ok(out)
    }

    /// The discrete spectral projector `Φ_α⟨Φ_α,·⟩ + F♯*F♯` (the identity up
    /// to the resolution of the grid).
    pub fn filter(&self, f: &RadialField) -> Result<RadialField> {
        self.evolve(f, 0.0)
    }

    /// Spectrally band-limited version of `f`: the continuum amplitude is
    /// multiplied by a raised-cosine taper from 1 at `k_lo` to 0 at `k_hi`;
    /// the bound-state component is kept.
    pub fn band_limit(&self, f: &RadialField, k_lo: f64, k_hi: f64) -> Result<RadialField> {
        if !(k_hi > k_lo && k_lo >= 0.0) {
            return Err(DnlsError::Config(format!("invalid band limit [{k_lo}, {k_hi}]")));
        }
        let data = self.analyse(f)?;
        let continuum = data.continuum.map(|k, v| {
            let x = ((k - k_lo) / (k_hi - k_lo)).clamp(0.0, 1.0);
            v * (0.5 * (1.0 + (std::f64::consts::PI * x).cos()))
        });
        self.synthesise(&SpectralData { bound: data.bound, continuum }, 0.0)
    }

    /// Continuum part `F♯*F♯ f` only.
    pub fn continuum_part(&self, f: &RadialField) -> Result<RadialField> {
        self.gf.adjoint(&self.gf.transform(f)?)
    }

    /// `‖e^{-itH} f - M_t D_t F♯ f‖` for `f` projected off the bound state.
    pub fn dollard_residual(&self, f: &RadialField, t: f64) -> Result<f64> {
        let f = self.bound.project_out(f)?;
        let sharp = self.gf.transform(&f)?;
        let data = SpectralData { bound: Complex64::new(0.0, 0.0), continuum: sharp.clone() };
        let exact = self.synthesise(&data, t)?;
        let profile = dollard_profile(&sharp, t)?;
        Ok(exact.sub(&profile)?.l2_norm())
    }

    /// `‖e^{itH} e^{itΔ} f - F♯*F f‖`.
    pub fn wave_limit_residual(&self, f: &RadialField, t: f64) -> Result<f64> {
        let free = free_evolve(f, t)?;
        let back = self.evolve(&free, -t)?;
        let w = wave_operator_spectral(self.params(), f)?;
        Ok(back.sub(&w)?.l2_norm())
    }
}

pub fn interacting_evolve(params: &ModelParams, f: &RadialField, t: f64) -> Result<RadialField> {
    Propagator::new(params, f.grid())?.evolve(f, t)
}

pub fn dollard_residual(params: &ModelParams, f: &RadialField, t: f64) -> Result<f64> {
    Propagator::new(params, f.grid())?.dollard_residual(f, t)
}

pub fn wave_limit_residual(params: &ModelParams, f: &RadialField, t: f64) -> Result<f64> {
    Propagator::new(params, f.grid())?.wave_limit_residual(f, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::random_smooth_field;
    use crate::pointop::Sign;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn prm(n: u8, alpha: f64) -> ModelParams {
        ModelParams::new(n, alpha, Sign::Defocusing, 2.0).unwrap()
    }

    fn grid(n: u8) -> GridSpec {
        GridSpec::new(n, 2048, 120.0, 12.0).unwrap()
    }

    fn gaussian(g: &GridSpec) -> RadialField {
        RadialField::from_real_fn(g, Space::Position, |r| (-r * r / 2.0).exp())
    }

    #[test]
    fn dollard_operators_are_isometries() {
        let g = grid(3);
        let f = gaussian(&g);
        for t in [0.3, 5.0, 100.0] {
            assert!((modulate(&f, t, false).unwrap().l2_norm() - f.l2_norm()).abs() < 1e-12);
            for w in [Dilation::D, Dilation::DStar] {
                assert!((dilate(&f, t, w).unwrap().l2_norm() - f.l2_norm()).abs() < 1e-10 * f.l2_norm());
            }
        }
        assert!(dilate(&f, 0.0, Dilation::D).is_err());
        assert!(apply_dollard(&f, -1.0, Dollard::M).is_err());
    }

    #[test]
    fn mstar_inverts_m() {
        let g = grid(2);
        let f = gaussian(&g);
        let back = apply_dollard(&apply_dollard(&f, 3.0, Dollard::M).unwrap(), 3.0, Dollard::MStar).unwrap();
        assert!(back.sub(&f).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn dstar_inverts_d_by_resampling() {
        let g = grid(2);
        let f = gaussian(&g);
        let t = 0.5;
        let d = apply_dollard(&f, t, Dollard::D).unwrap();
        assert!((d.l2_norm() - f.l2_norm()).abs() < 1e-4 * f.l2_norm());
        let back = apply_dollard(&d, t, Dollard::DStar).unwrap();
        assert!(back.sub(&f).unwrap().l2_norm() < 1e-4 * f.l2_norm());
    }

    #[test]
    fn branch_phase_principal() {
        let c = branch_phase(3, 2.0);
        assert!((c.norm() - 4f64.powf(-1.5)).abs() < 1e-15);
        assert!((c.arg() + 3.0 * PI / 4.0).abs() < 1e-14);
        // (i2t)^{-1} for n = 2
        let c2 = branch_phase(2, 0.5);
        assert!((c2 - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn free_gaussian_closed_form() {
        // e^{itΔ} e^{-r²/2} = (1 + 2it)^{-n/2} e^{-r²/(2(1+2it))}
        for n in [2u8, 3] {
            let g = grid(n);
            let f = gaussian(&g);
            let t = 1.0;
            let out = free_evolve(&f, t).unwrap();
            assert!((out.l2_norm() - f.l2_norm()).abs() < 1e-8 * f.l2_norm());
            let z = Complex64::new(1.0, 2.0 * t);
            let exact =
                RadialField::from_fn(&g, Space::Position, |r| z.powf(-(n as f64) / 2.0) * (-r * r / (2.0 * z)).exp());
            assert!(out.sub(&exact).unwrap().sup_norm() < 1e-5);
        }
        let g = grid(2);
        assert_eq!(free_evolve(&gaussian(&g), 0.0).unwrap().values, gaussian(&g).values);
    }

    #[test]
    fn dollard_decomposition_of_free_flow() {
        for n in [2u8, 3] {
            let g = grid(n);
            let f = gaussian(&g);
            let t = 5.0;
            let exact = free_evolve(&f, t).unwrap();
            let ff = fourier_radial(&modulate(&f, t, false).unwrap(), Direction::Forward).unwrap();
            let approx = dollard_profile(&ff, t).unwrap();
            let err = exact.sub(&approx).unwrap().l2_norm() / f.l2_norm();
            assert!(err < 1e-3, "n={n}: {err}");
        }
    }

    #[test]
    fn bound_state_rotates() {
        let g = grid(3);
        let p = prm(3, -0.5);
        let prop = Propagator::new(&p, &g).unwrap();
        let phi = prop.bound_state().phi.clone().unwrap();
        let t = 0.7;
        let out = prop.evolve(&phi, t).unwrap();
        let expect = phi.scaled(Complex64::from_polar(1.0, -t * prop.bound_state().e_alpha));
        assert!(out.sub(&expect).unwrap().l2_norm() < 1e-6);
    }

    #[test]
    fn interacting_flow_conserves_mass_and_composes() {
        for (n, alpha) in [(2u8, -0.2), (3, -1.0), (3, 0.7)] {
            let g = grid(n);
            let p = prm(n, alpha);
            let prop = Propagator::new(&p, &g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let f = prop.filter(&random_smooth_field(&g, Space::Position, &mut rng, 1.5)).unwrap();
            let m0 = f.mass();
            // the spread 2t·k_max of the data stays inside R_max up to t = 10
            for t in [1.0, 3.0, 10.0] {
                let m = prop.evolve(&f, t).unwrap().mass();
                assert!((m - m0).abs() < 1e-3 * m0, "n={n} t={t}");
            }
            let a = prop.evolve(&prop.evolve(&f, 0.3).unwrap(), 0.5).unwrap();
            let b = prop.evolve(&f, 0.8).unwrap();
            assert!(a.sub(&b).unwrap().l2_norm() < 1e-4 * f.l2_norm());
        }
    }

    #[test]
    fn filter_defect_small_at_time_zero() {
        let g = grid(3);
        let p = prm(3, -1.0);
        let prop = Propagator::new(&p, &g).unwrap();
        let f = gaussian(&g).map(|r, v| v * (r * r / (1.0 + r * r)).powi(2));
        let defect = prop.filter(&f).unwrap().sub(&f).unwrap().l2_norm();
        assert!(defect < 1e-3 * f.l2_norm(), "{defect}");
    }

    #[test]
    fn dollard_residual_zero_for_bound_state() {
        let g = grid(3);
        let p = prm(3, -1.0);
        let prop = Propagator::new(&p, &g).unwrap();
        let phi = prop.bound_state().phi.clone().unwrap();
        assert!(prop.dollard_residual(&phi, 10.0).unwrap() < 1e-3);
    }

    #[test]
    fn free_limit_wave_residual_vanishes() {
        let g = grid(3);
        let p = prm(3, 1e8);
        let prop = Propagator::new(&p, &g).unwrap();
        let f = gaussian(&g);
        for t in [2.0, 5.0] {
            assert!(prop.wave_limit_residual(&f, t).unwrap() < 1e-5);
        }
    }
}
