//! The point-interaction Hamiltonian `H_α`: the boundary-condition function
//! `Γ_α`, Green's functions, the bound state, the decomposition
//! `ψ = φ^λ + q G^λ` and the operator action `H_α ψ = -Δφ^λ - λ² q G^λ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DnlsError, Result};
use crate::grids::{inner_product, GridSpec, RadialField, Space};
use crate::specfun::{macdonald_k0, EULER_GAMMA};

/// Sign in front of the nonlinearity `±|ψ|^{p-1}ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Focusing,
    Defocusing,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Focusing => -1.0,
            Sign::Defocusing => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u8,
    pub alpha: f64,
    pub sign: Sign,
    pub p: f64,
}

impl ModelParams {
    pub fn new(n: u8, alpha: f64, sign: Sign, p: f64) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(DnlsError::Config(format!("dimension must be 2 or 3, got {n}")));
        }
        if !alpha.is_finite() {
            return Err(DnlsError::Config(format!("alpha must be finite, got {alpha}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(DnlsError::Config(format!("power p must satisfy p > 1, got {p}")));
        }
        Ok(ModelParams { n, alpha, sign, p })
    }

    /// Rejects powers outside the range where the long-range obstruction is
    /// expected: `1 < p <= 2` in two dimensions (the endpoint is the
    /// logarithmic case), `1 < p < 4/3` in three (the condition
    /// `2/(2-p) < 3`).
    pub fn check_long_range(&self) -> Result<()> {
        match self.n {
            2 if self.p > 1.0 && self.p <= 2.0 => Ok(()),
            2 => Err(DnlsError::Config(format!(
                "long-range diagnostic needs 1 < p <= 2 in two dimensions, got p = {}",
                self.p
            ))),
            _ if self.p > 1.0 && self.p < 4.0 / 3.0 => Ok(()),
            _ => Err(DnlsError::Range { q: 2.0 / (2.0 - self.p), n: 3, range: "[2, 3) (needs 1 < p < 4/3)" }),
        }
    }

    /// Decay rate of the bound state, if there is one.
    pub fn lambda_b(&self) -> Option<f64> {
        if self.n == 2 {
            Some(2.0 * (-(2.0 * PI * self.alpha + EULER_GAMMA)).exp())
        } else if self.alpha < 0.0 {
            Some(-4.0 * PI * self.alpha)
        } else {
            None
        }
    }

    /// Regularisation parameter used when none is given: 1 in 2D,
    /// `max(1, 8π|α|)` in 3D, nudged away from the pole of `Γ_α`.
    pub fn default_lambda(&self) -> f64 {
        let lambda = if self.n == 2 { 1.0 } else { (8.0 * PI * self.alpha.abs()).max(1.0) };
        match self.lambda_b() {
            Some(lb) if (lambda - lb).abs() < 1e-3 * lb => 2.0 * lambda,
            _ => lambda,
        }
    }
}

/// `Γ_α(λ)`: `2π/(2πα + γ + ln(λ/2))` in 2D, `1/(α + λ/4π)` in 3D.
pub fn gamma_alpha(params: &ModelParams, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(DnlsError::Domain { function: "gamma_alpha", value: lambda, reason: "lambda must be positive" });
    }
    if let Some(lb) = params.lambda_b() {
        if (lambda - lb).abs() <= 1e-12 * lb {
            return Err(DnlsError::Pole { lambda, lambda_b: lb });
        }
    }
    Ok(if params.n == 2 {
        2.0 * PI / (2.0 * PI * params.alpha + EULER_GAMMA + (lambda / 2.0).ln())
    } else {
        1.0 / (params.alpha + lambda / (4.0 * PI))
    })
}

/// `G^λ(r)`.
pub fn green_value(n: u8, lambda: f64, r: f64) -> f64 {
    if n == 2 {
        macdonald_k0(lambda * r).map_or(0.0, |k| k / (2.0 * PI))
    } else {
        (-lambda * r).exp() / (4.0 * PI * r)
    }
}

/// `G^λ` sampled on the position grid.
pub fn green_function(params: &ModelParams, grid: &GridSpec, lambda: f64) -> RadialField {
    RadialField::from_real_fn(grid, Space::Position, |r| green_value(params.n, lambda, r))
}

#[derive(Debug, Clone)]
pub struct BoundState {
    pub exists: bool,
    pub e_alpha: f64,
    pub lambda_b: f64,
    /// Normalised eigenvector (discrete norm one); `None` when absent or not
    /// representable on the grid.
    pub phi: Option<RadialField>,
    /// Prefactor multiplying `K0(λ_b r)` (2D) or `e^{-λ_b r}/r` (3D).
    pub n_alpha: f64,
}

impl BoundState {
    pub fn none() -> Self {
        BoundState { exists: false, e_alpha: 0.0, lambda_b: 0.0, phi: None, n_alpha: 0.0 }
    }

    /// `f - Φ_α⟨Φ_α, f⟩` (identity when there is no bound state).
    pub fn project_out(&self, f: &RadialField) -> Result<RadialField> {
        match &self.phi {
            Some(phi) => {
                let c = inner_product(phi, f)?;
                let mut out = f.clone();
                out.axpy(-c, phi)?;
                Ok(out)
            }
            None => Ok(f.clone()),
        }
    }

    pub fn overlap(&self, f: &RadialField) -> Result<Complex64> {
        match &self.phi {
            Some(phi) => inner_product(phi, f),
            None => Ok(Complex64::new(0.0, 0.0)),
        }
    }
}

/// Bound state of `H_α`: `E_α = -λ_b²` with eigenvector `N_α K0(λ_b r)` in
/// 2D (always present) and `√(2|α|) e^{4παr}/r` in 3D (present iff α < 0).
pub fn bound_state(params: &ModelParams, grid: &GridSpec) -> BoundState {
    let Some(lb) = params.lambda_b() else {
        return BoundState::none();
    };
    let shape = RadialField::from_real_fn(grid, Space::Position, |r| {
        if params.n == 2 {
            macdonald_k0(lb * r).unwrap_or(0.0)
        } else {
            (-lb * r).exp() / r
        }
    });
    let norm = shape.l2_norm();
    if !(norm > 0.0 && norm.is_finite()) {
        // decay length far outside the grid (or inside its first cell): the
        // state exists but cannot be represented
        return BoundState { exists: true, e_alpha: -lb * lb, lambda_b: lb, phi: None, n_alpha: 0.0 };
    }
    let n_alpha = 1.0 / norm;
    BoundState {
        exists: true,
        e_alpha: -lb * lb,
        lambda_b: lb,
        phi: Some(shape.scaled(Complex64::new(n_alpha, 0.0))),
        n_alpha,
    }
}

/// `ψ = φ^λ + q G^λ`.
#[derive(Debug, Clone)]
pub struct DomainElement {
    pub lambda: f64,
    pub phi_reg: RadialField,
    pub q: Complex64,
    /// `φ^λ(0)` from a quadratic fit on the innermost nodes.
    pub phi_reg_at_zero: Complex64,
    /// `|q - Γ_α(λ) φ^λ(0)|`.
    pub bc_residual: f64,
    /// Set when no singular part was detected (`q` forced to 0).
    pub regular: bool,
}

impl DomainElement {
    /// Builds an element directly from its parts.
    pub fn compose(params: &ModelParams, phi_reg: RadialField, q: Complex64, lambda: f64) -> Result<Self> {
        phi_reg.require_space(Space::Position, "domain element")?;
        let at0 = extrapolate_to_origin(&phi_reg);
        let gamma = gamma_alpha(params, lambda)?;
        Ok(DomainElement {
            lambda,
            bc_residual: (q - at0 * gamma).norm(),
            phi_reg,
            q,
            phi_reg_at_zero: at0,
            regular: q == Complex64::new(0.0, 0.0),
        })
    }

    /// `ψ = φ^λ + q G^λ`.
    pub fn psi(&self, params: &ModelParams) -> RadialField {
        let g = green_function(params, self.phi_reg.grid(), self.lambda);
        let mut psi = self.phi_reg.clone();
        psi.axpy(self.q, &g).expect("same grid");
        psi
    }
}

/// The innermost nodes used for the local fits: those with `r ≤ 100 r_0`.
fn fit_window(grid: &GridSpec) -> usize {
    let nodes = &grid.r().nodes;
    let cutoff = 100.0 * nodes[0];
    nodes.partition_point(|&r| r <= cutoff).max(8).min(nodes.len())
}

/// Least-squares coefficients of complex samples against real basis columns.
fn least_squares(basis: &DMatrix<f64>, values: &[Complex64]) -> Vec<Complex64> {
    // scale columns for conditioning
    let scales: Vec<f64> = basis.column_iter().map(|c| c.norm().max(1e-300)).collect();
    let mut a = basis.clone();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).unscale_mut(*s);
    }
    let svd = a.svd(true, true);
    let solve = |rhs: DVector<f64>| svd.solve(&rhs, 1e-14).expect("SVD computed with U and V");
    let re = solve(DVector::from_iterator(values.len(), values.iter().map(|v| v.re)));
    let im = solve(DVector::from_iterator(values.len(), values.iter().map(|v| v.im)));
    (0..scales.len()).map(|j| Complex64::new(re[j], im[j]) / scales[j]).collect()
}

fn extrapolate_to_origin(f: &RadialField) -> Complex64 {
    let m = fit_window(f.grid());
    let r = &f.base_nodes()[..m];
    let basis = DMatrix::from_fn(m, 3, |i, j| r[i].powi(j as i32));
    least_squares(&basis, &f.values[..m])[0]
}

/// Extracts the charge `q` by regressing `ψ` on the innermost nodes against
/// the singular profile plus low-order regular terms, then sets
/// `φ^λ = ψ - q G^λ`.
pub fn decompose(params: &ModelParams, psi: &RadialField, lambda: f64) -> Result<DomainElement> {
    psi.require_space(Space::Position, "decompose")?;
    psi.require_unscaled("decompose")?;
    let gamma = gamma_alpha(params, lambda)?;
    let grid = psi.grid();
    let m = fit_window(grid);
    let r = &grid.r().nodes[..m];
    let window = &psi.values[..m];
    let peak = window.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let (basis, to_q): (DMatrix<f64>, f64) = if params.n == 2 {
        // ln r, 1, r², r² ln r; ψ ~ -(q/2π) ln r near 0
        let cols = |x: f64, j: usize| match j {
            0 => x.ln(),
            1 => 1.0,
            2 => x * x,
            _ => x * x * x.ln(),
        };
        (DMatrix::from_fn(m, 4, |i, j| cols(r[i], j)), -2.0 * PI)
    } else {
        // 1/(4πr), 1, r, r²; ψ ~ q/(4πr) near 0
        let cols = |x: f64, j: usize| match j {
            0 => 1.0 / (4.0 * PI * x),
            _ => x.powi(j as i32 - 1),
        };
        (DMatrix::from_fn(m, 4, |i, j| cols(r[i], j)), 1.0)
    };
    let mut q = Complex64::new(0.0, 0.0);
    let mut regular = true;
    if peak > 0.0 && peak.is_finite() {
        let coef = least_squares(&basis, window);
        let candidate = coef[0] * to_q;
        // singular contribution at the innermost node, relative to the data
        let singular_size = (coef[0] * basis[(0, 0)]).norm();
        if singular_size > 1e-9 * peak {
            q = candidate;
            regular = false;
        }
    }
    let mut phi_reg = psi.clone();
    if !regular {
        phi_reg.axpy(-q, &green_function(params, grid, lambda))?;
    }
    let at0 = extrapolate_to_origin(&phi_reg);
    Ok(DomainElement { lambda, bc_residual: (q - at0 * gamma).norm(), phi_reg, q, phi_reg_at_zero: at0, regular })
}

/// Finite-difference weights for derivatives 0..=2 at `x0` from the nodes
/// `xs` (Fornberg's recursion).
fn fd_weights(x0: f64, xs: &[f64]) -> [Vec<f64>; 3] {
    let n = xs.len();
    let mut c = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(2);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Radial Laplacian `f'' + (n-1) f'/r` by fourth-order differences in the
/// computational variable `u` of the grid (uniform spacing there).
pub fn radial_laplacian(f: &RadialField) -> RadialField {
    let ax = f.grid().axis(f.space());
    let v = &f.values;
    let n = v.len();
    let du = ax.du;
    let drift = (f.dim() - 1) as f64;
    // stencils in units of du: centred 5-point inside, 6-point one-sided at the ends
    let centred = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
    let edge: Vec<[Vec<f64>; 3]> = (0..2).map(|j| fd_weights(j as f64, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0])).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let (start, w, flip) = if j < 2 {
            (0, &edge[j], false)
        } else if j + 2 >= n {
            (n - 6, &edge[n - 1 - j], true)
        } else {
            (j - 2, &centred, false)
        };
        let (mut fu, mut fuu) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (k, (w1, w2)) in w[1].iter().zip(&w[2]).enumerate() {
            // mirrored stencil at the outer end
            let idx = if flip { n - 1 - k } else { start + k };
            fu += v[idx] * w1;
            fuu += v[idx] * w2;
        }
        if flip {
            fu = -fu;
        }
        fu /= du;
        fuu /= du * du;
        let r = ax.nodes[j];
        let ru = ax.jacobian[j];
        // r(u) = x_c softplus(u) so r_uu = r_u (1 - r_u / x_c)
        let ruu = ru * (1.0 - ru / ax.x_c);
        let d1 = fu / ru;
        let d2 = (fuu - d1 * ruu) / (ru * ru);
        out[j] = d2 + d1 * (drift / r);
    }
    f.with_values(out)
}

/// `H_α ψ = -Δφ^λ - λ² q G^λ`. Only used for residual checks; propagation
/// is spectral.
pub fn apply_h(params: &ModelParams, element: &DomainElement) -> RadialField {
    let lap = radial_laplacian(&element.phi_reg);
    let g = green_function(params, element.phi_reg.grid(), element.lambda);
    let c = element.q * element.lambda * element.lambda;
    lap.with_values(lap.values.iter().zip(&g.values).map(|(l, g)| -l - c * g).collect())
}
