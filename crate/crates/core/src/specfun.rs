//! Order-zero (and order-one, for derivatives) Bessel, Neumann, Hankel and
//! Macdonald functions of a real positive argument.
//!
//! Three regimes are used for `J` and `Y`:
//!
//! | range            | method                                   |
//! |------------------|------------------------------------------|
//! | `x <= 5`         | ascending power series (log series for Y) |
//! | `5 < x < 25`     | Miller backward recurrence + Neumann sums |
//! | `x >= 25`        | Hankel asymptotic expansion               |
//!
//! `K0` uses the ascending series for `z <= 2` and Temme's continued
//! fraction (Steed's algorithm) above.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use crate::error::{DnlsError, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_MAX: f64 = 5.0;
const ASYMPTOTIC_MIN: f64 = 25.0;
const K0_SERIES_MAX: f64 = 2.0;

/// A special-function value together with an a-priori absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialFunctionResult {
    pub value: Complex64,
    pub est_abs_error: f64,
}

/// Macdonald function `K0(z)`.
pub fn macdonald_k0(z: f64) -> Result<f64> {
    macdonald_k0_with_error(z).map(|r| r.value.re)
}

pub fn macdonald_k0_with_error(z: f64) -> Result<SpecialFunctionResult> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(DnlsError::Domain {
            function: "macdonald_k0",
            value: z,
            reason: "K0 requires a finite z > 0 (logarithmic singularity at 0)",
        });
    }
    let (value, err) = if z <= K0_SERIES_MAX { k0_series(z) } else { k0_temme(z) };
    Ok(SpecialFunctionResult { value: Complex64::new(value, 0.0), est_abs_error: err })
}

/// `H0^(1)(x) = J0(x) + i Y0(x)` for `x > 0`.
pub fn hankel1_0(x: f64) -> Result<Complex64> {
    hankel1_0_with_error(x).map(|r| r.value)
}

pub fn hankel1_0_with_error(x: f64) -> Result<SpecialFunctionResult> {
    check_positive("hankel1_0", x)?;
    let (j0, y0, err) = j0_y0_with_error(x);
    Ok(SpecialFunctionResult { value: Complex64::new(j0, y0), est_abs_error: err })
}

/// `H0^(1)` evaluated at the negative real argument `-x`, which by the
/// reflection identity equals `-conj(H0^(1)(x))`. Every negative-argument
/// Hankel evaluation in the crate goes through here.
pub fn hankel1_0_negated(x: f64) -> Result<Complex64> {
    hankel1_0(x).map(|h| -h.conj())
}

fn check_positive(function: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(DnlsError::Domain { function, value: x, reason: "argument must be finite and > 0" });
    }
    Ok(())
}

pub fn bessel_j0(x: f64) -> f64 {
    j0_y0(x.abs().max(f64::MIN_POSITIVE)).0
}

pub fn bessel_y0(x: f64) -> f64 {
    j0_y0(x).1
}

pub fn bessel_j1(x: f64) -> f64 {
    j1_y1(x).0
}

pub fn bessel_y1(x: f64) -> f64 {
    j1_y1(x).1
}

/// `(J0(x), Y0(x))` for `x > 0`.
#[inline]
pub fn j0_y0(x: f64) -> (f64, f64) {
    let (j, y, _) = j0_y0_with_error(x);
    (j, y)
}

/// `J0(x)` alone; cheaper than [`j0_y0`] in the series and asymptotic regimes.
#[inline]
pub fn j0_only(x: f64) -> f64 {
    if x <= SERIES_MAX {
        series_j0(x).0
    } else if x < ASYMPTOTIC_MIN {
        miller(x).j0
    } else {
        asymptotic(0, x).0
    }
}

fn j0_y0_with_error(x: f64) -> (f64, f64, f64) {
    if x <= SERIES_MAX {
        let (j0, ej) = series_j0(x);
        let (y0, ey) = series_y0(x, j0);
        (j0, y0, ej.max(ey))
    } else if x < ASYMPTOTIC_MIN {
        let m = miller(x);
        (m.j0, m.y0, m.err)
    } else {
        asymptotic(0, x)
    }
}

/// `(J1(x), Y1(x))` for `x > 0`.
pub fn j1_y1(x: f64) -> (f64, f64) {
    if x <= SERIES_MAX {
        series_j1_y1(x)
    } else if x < ASYMPTOTIC_MIN {
        let m = miller(x);
        (m.j1, m.y1)
    } else {
        let (j, y, _) = asymptotic(1, x);
        (j, y)
    }
}

fn series_j0(x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut abs_sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        abs_sum += term.abs();
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    (sum, 4.0 * f64::EPSILON * abs_sum)
}

// Y0 = (2/π)[(ln(x/2) + γ) J0 + Σ_{k≥1} (-1)^{k+1} H_k (x²/4)^k / (k!)²]
fn series_y0(x: f64, j0: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        let t = if k % 2 == 1 { term * harmonic } else { -term * harmonic };
        sum += t;
        abs_sum += t.abs();
        if term * harmonic < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    let log_part = ((0.5 * x).ln() + EULER_GAMMA) * j0;
    let value = FRAC_2_PI * (log_part + sum);
    let err = 4.0 * f64::EPSILON * FRAC_2_PI * (abs_sum + log_part.abs());
    (value, err)
}

fn series_j1_y1(x: f64) -> (f64, f64) {
    // J1 = (x/2) Σ (-x²/4)^k / (k!(k+1)!)
    // Y1 = -2/(πx) + (2/π) ln(x/2) J1
    //      - (1/π)(x/2) Σ (ψ(k+1) + ψ(k+2)) (-x²/4)^k / (k!(k+1)!)
    let q = -0.25 * x * x;
    let half = 0.5 * x;
    let mut term = 1.0; // (-x²/4)^k / (k!(k+1)!)
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut sum_j = 1.0;
    let mut sum_y = psi_k1 + psi_k2;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        sum_j += term;
        sum_y += term * (psi_k1 + psi_k2);
        if term.abs() < 1e-18 {
            break;
        }
    }
    let j1 = half * sum_j;
    let y1 = -FRAC_2_PI / x + FRAC_2_PI * half.ln() * j1 - half * sum_y / PI;
    (j1, y1)
}

struct MillerValues {
    j0: f64,
    j1: f64,
    y0: f64,
    y1: f64,
    err: f64,
}

/// Backward recurrence for `J_k`, normalized with `J0 + 2 Σ J_{2k} = 1`,
/// then Neumann series for the `Y`s.
fn miller(x: f64) -> MillerValues {
    let top = 2 * (((x + 30.0 + 6.0 * x.sqrt()) / 2.0) as usize);
    let mut j = vec![0.0_f64; top + 2];
    j[top] = 1e-300;
    let two_over_x = 2.0 / x;
    for k in (1..=top).rev() {
        j[k - 1] = (k as f64) * two_over_x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in j.iter_mut() {
        *v /= norm;
    }

    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    // Y0: (π/2) Y0 = (ln(x/2)+γ) J0 - 2 Σ (-1)^k J_{2k}/k
    // Y1: (π/2) Y1 = (ln(x/2)+γ) J1 - J0/x + Σ (-1)^k (J_{2k-1} - J_{2k+1})/k
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k < top {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
        k += 1;
    }
    let y0 = FRAC_2_PI * (log_term * j[0] - 2.0 * s0);
    let y1 = FRAC_2_PI * (log_term * j[1] - j[0] / x + s1);
    MillerValues { j0: j[0], j1: j[1], y0, y1, err: 8.0 * f64::EPSILON * (top as f64).sqrt() * (1.0 + log_term.abs()) }
}

/// Hankel expansion for `J_ν`, `Y_ν`, `ν ∈ {0, 1}`; returns the last-term
/// magnitude plus phase rounding as the error estimate.
fn asymptotic(order: u32, x: f64) -> (f64, f64, f64) {
    let mu = 4.0 * (order * order) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last: f64 = 1.0;
    let eight_x = 8.0 * x;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * eight_x);
        if next.abs() > last.abs() && k > 2 {
            break;
        }
        term = next;
        last = next;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    let (s, c) = chi.sin_cos();
    let amp = (FRAC_2_PI / x).sqrt();
    let j = amp * (p * c - q * s);
    let y = amp * (p * s + q * c);
    // truncation + rounding of the phase χ
    let err = amp * (last.abs() + 4.0 * f64::EPSILON + x * f64::EPSILON);
    (j, y, err)
}

// K0 = -(ln(z/2)+γ) I0(z) + Σ_{k≥1} H_k (z²/4)^k/(k!)²
fn k0_series(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut sum = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        sum += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    let log_part = -((0.5 * z).ln() + EULER_GAMMA) * i0;
    let value = log_part + sum;
    (value, 4.0 * f64::EPSILON * (log_part.abs() + sum))
}

/// Temme's second continued fraction evaluated with Steed's algorithm
/// (order zero).
fn k0_temme(z: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let _ = h;
    let value = (PI / (2.0 * z)).sqrt() * (-z).exp() / s;
    (value, 8.0 * f64::EPSILON * value)
}
