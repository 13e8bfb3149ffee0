//! The acceptance suite: eleven cross-module checks, each with pinned
//! tolerances. Shared by `dnls validate` and the `acceptance` test target.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use dnls_core::error::DnlsError;
use dnls_core::genft::{clear_kernel_cache, diagonalization_residual, fourier_radial, Direction, GenFourier};
use dnls_core::glassey::{
    build_test_function, linear_lemma_residual, scaling_identity_residual, TestFunctionOptions, Verdict,
};
use dnls_core::grids::{random_smooth_field, GridSpec, RadialField, Space};
use dnls_core::pointop::{bound_state, DomainElement, ModelParams, Sign};
use dnls_core::propagator::Propagator;
use dnls_core::specfun::{bessel_j0, bessel_y0, j0_y0, j1_y1, macdonald_k0};
use dnls_core::waveop::{commutation_residual, route_discrepancy};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{cmd_probe, ProbeSummary};
use crate::config::{bundled, RunConfig};

pub const SPECFUN_TOL: f64 = 1e-10;
pub const WRONSKIAN_TOL: f64 = 1e-9;
pub const ISOMETRY_TOL: f64 = 1e-3;
pub const ISOMETRY_FIELDS: usize = 50;
/// Required `coarse / fine` error ratio when a criterion asks for halving.
pub const HALVING: f64 = 2.0;
/// Below this a residual is at round-off and refinement cannot halve it.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
pub const DIAGONALIZATION_TOL: f64 = 5e-3;
pub const DIAGONALIZATION_REDUCTION: f64 = 1.5;
pub const ROUTE_TOL: f64 = 1e-2;
pub const ROUTE_FIELDS: usize = 10;
pub const COMMUTATION_TOL: f64 = 1e-2;
pub const DOLLARD_DECREASE: f64 = 2.0;
pub const LEMMA_DECREASE: f64 = 2.0;
pub const SCALING_TOL: f64 = 1e-6;
pub const FTC_TOL: f64 = 0.02;

/// Default resolution `(N, R, K)` and its refinement (N and K doubled).
const COARSE: (usize, f64, f64) = (4096, 40.0, 40.0);
const FINE: (usize, f64, f64) = (8192, 40.0, 80.0);
/// Long grid for time-dependent checks: `R ≫ 2TK`.
const LONG: (usize, f64, f64) = (3000, 650.0, 4.0);

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {:<28} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Outcome of a single check: pass/fail plus a human-readable measurement.
struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

/// State shared by the checks: probe runs are reused between criteria 9–11.
pub struct Validator {
    seed: u64,
    work_dir: PathBuf,
    probes: RefCell<Vec<(String, ProbeSummary)>>,
}

type CheckFn = fn(&Validator) -> Result<Outcome>;

const CHECKS: [(u8, &str, CheckFn); 11] = [
    (1, "special functions", Validator::special_functions),
    (2, "partial isometry", Validator::partial_isometry),
    (3, "diagonalization", Validator::diagonalization),
    (4, "route equivalence", Validator::route_equivalence),
    (5, "commutation identity", Validator::commutation),
    (6, "dollard asymptotics", Validator::dollard),
    (7, "linear lemma", Validator::linear_lemma),
    (8, "scaling identity", Validator::scaling_identity),
    (9, "long-range mechanism", Validator::mechanism),
    (10, "fundamental theorem", Validator::fundamental_theorem),
    (11, "determinism", Validator::determinism),
];

impl Validator {
    /// `work_dir` receives the probe outputs.
    pub fn new(seed: u64, work_dir: &Path) -> Self {
        Validator { seed, work_dir: work_dir.to_path_buf(), probes: RefCell::new(Vec::new()) }
    }

    pub fn ids() -> impl Iterator<Item = (u8, &'static str)> {
        CHECKS.iter().map(|(id, name, _)| (*id, *name))
    }

    /// Runs criterion `id`. Errors count as failures.
    pub fn run(&self, id: u8) -> CheckResult {
        let (id, name, f) = CHECKS.iter().find(|c| c.0 == id).copied().expect("known criterion");
        let start = Instant::now();
        let out = f(self).unwrap_or_else(|e| Outcome { passed: false, detail: format!("error: {e:#}") });
        clear_kernel_cache();
        CheckResult { id, name, passed: out.passed, detail: out.detail, seconds: start.elapsed().as_secs_f64() }
    }

    /// Runs every criterion in order, reporting each as it completes.
    /// With `stop_on_failure` the suite ends at the first failure.
    pub fn run_all(&self, stop_on_failure: bool, mut report: impl FnMut(&CheckResult)) -> Vec<CheckResult> {
        let mut out = Vec::new();
        for (id, _) in Self::ids() {
            let r = self.run(id);
            report(&r);
            let failed = !r.passed;
            out.push(r);
            if failed && stop_on_failure {
                break;
            }
        }
        out
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
    }

    fn special_functions(&self) -> Result<Outcome> {
        let oracles = [
            ("K0(1)", macdonald_k0(1.0)?, k0_quadrature(1.0)),
            ("J0(1)", bessel_j0(1.0), j0_series(1.0)),
            ("J0(1)", bessel_j0(1.0), j0_quadrature(1.0)),
            ("Y0(1)", bessel_y0(1.0), y0_series(1.0)),
            ("Y0(1)", bessel_y0(1.0), y0_quadrature(1.0)),
        ];
        let mut worst = 0.0f64;
        let mut worst_name = "";
        for (name, value, oracle) in oracles {
            let e = (value - oracle).abs();
            if e >= worst {
                worst = e;
                worst_name = name;
            }
        }
        let mut wr = 0.0f64;
        for i in 0..100 {
            let x = 0.01 * 10f64.powf(4.0 * i as f64 / 99.0);
            let (j0, y0) = j0_y0(x);
            let (j1, y1) = j1_y1(x);
            let expected = 2.0 / (PI * x);
            wr = wr.max((j1 * y0 - j0 * y1 - expected).abs() / expected);
        }
        outcome(
            worst <= SPECFUN_TOL && wr <= WRONSKIAN_TOL,
            format!("max oracle error {worst:.2e} ({worst_name}) <= {SPECFUN_TOL:e}; Wronskian rel. error {wr:.2e} <= {WRONSKIAN_TOL:e} on 100 points in [0.01, 100]"),
        )
    }

    fn partial_isometry(&self) -> Result<Outcome> {
        let mut passed = true;
        let mut parts = Vec::new();
        for (n, alpha) in [(2u8, 0.0), (3, -1.0)] {
            let params = ModelParams::new(n, alpha, Sign::Defocusing, 2.0)?;
            let mut errs = [0.0f64; 2];
            for (slot, (size, r, k)) in [COARSE, FINE].into_iter().enumerate() {
                let grid = GridSpec::new(n, size, r, k)?;
                let gf = GenFourier::new(&params, &grid)?;
                let bs = bound_state(&params, &grid);
                let mut rng = self.rng(2);
                for _ in 0..ISOMETRY_FIELDS {
                    let f = bs.project_out(&random_smooth_field(&grid, Space::Position, &mut rng, 1.0))?;
                    let e = (gf.transform(&f)?.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
                    errs[slot] = errs[slot].max(e);
                }
                clear_kernel_cache();
            }
            let ok = errs[0] <= ISOMETRY_TOL && halves(errs[0], errs[1]);
            passed &= ok;
            parts.push(format!("n={n} α={alpha}: {:.2e} -> {:.2e}", errs[0], errs[1]));
        }
        outcome(passed, format!("{} (tol {ISOMETRY_TOL:e}, refined must halve)", parts.join("; ")))
    }

    fn diagonalization(&self) -> Result<Outcome> {
        type Profile = fn(f64) -> f64;
        let profiles: [Profile; 3] = [
            |r| r * r * (-r * r / 2.0).exp(),
            |r| r.powi(4) * (-r * r).exp(),
            |r| (-(-r * r).exp_m1()) * (-r * r / 4.0).exp(),
        ];
        let mut passed = true;
        let mut parts = Vec::new();
        for (n, alpha) in [(2u8, 0.0), (2, 0.5), (3, -1.0), (3, 1.0)] {
            let params = ModelParams::new(n, alpha, Sign::Defocusing, 2.0)?;
            let mut res = [0.0f64; 2];
            for (slot, (size, r, k)) in [COARSE, FINE].into_iter().enumerate() {
                let grid = GridSpec::new(n, size, r, k)?;
                for prof in profiles {
                    let phi = RadialField::from_real_fn(&grid, Space::Position, prof);
                    let el = DomainElement::compose(&params, phi, Complex64::new(0.0, 0.0), params.default_lambda())?;
                    res[slot] = res[slot].max(diagonalization_residual(&params, &el)?);
                }
            }
            clear_kernel_cache();
            let reduced = res[1] * DIAGONALIZATION_REDUCTION <= res[0] || res[0] <= ROUNDOFF_FLOOR;
            passed &= res[0] <= DIAGONALIZATION_TOL && reduced;
            parts.push(format!("n={n} α={alpha}: {:.2e} -> {:.2e}", res[0], res[1]));
        }
        outcome(
            passed,
            format!(
                "{} (tol {DIAGONALIZATION_TOL:e}, refinement must reduce {DIAGONALIZATION_REDUCTION}x)",
                parts.join("; ")
            ),
        )
    }

    fn route_equivalence(&self) -> Result<Outcome> {
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for (n, alphas) in [(2u8, [-0.5, 0.0, 0.5]), (3, [-1.0, 0.0, 1.0])] {
            let grid = GridSpec::new(n, ROUTE_GRID.0, ROUTE_GRID.1, ROUTE_GRID.2)?;
            for alpha in alphas {
                let params = ModelParams::new(n, alpha, Sign::Defocusing, 2.0)?;
                let mut rng = self.rng(4);
                let mut w = 0.0f64;
                for _ in 0..ROUTE_FIELDS {
                    let raw = random_smooth_field(&grid, Space::Position, &mut rng, 1.0);
                    let f = free_band_limit(&raw, ROUTE_BAND.0, ROUTE_BAND.1)?;
                    w = w.max(route_discrepancy(&params, &f)?);
                }
                worst = worst.max(w);
                parts.push(format!("{n}D α={alpha}: {w:.1e}"));
            }
            clear_kernel_cache();
        }
        outcome(worst <= ROUTE_TOL, format!("worst {worst:.2e} <= {ROUTE_TOL:e} [{}]", parts.join(", ")))
    }

    fn commutation(&self) -> Result<Outcome> {
        let mut passed = true;
        let mut worst = [0.0f64; 2];
        for (n, alpha) in [(2u8, 0.3), (3, -1.0)] {
            let params = ModelParams::new(n, alpha, Sign::Defocusing, 2.0)?;
            let mut res = Vec::new();
            for (size, r, k) in [COARSE, FINE] {
                let grid = GridSpec::new(n, size, r, k)?;
                let mut rng = self.rng(5);
                let mut fields = vec![RadialField::from_real_fn(&grid, Space::Position, |r| (-r * r / 2.0).exp())];
                fields.push(random_smooth_field(&grid, Space::Position, &mut rng, 1.0));
                let mut row = Vec::new();
                for t in [1.0, 10.0, 100.0] {
                    let mut m = 0.0f64;
                    for f in &fields {
                        m = m.max(commutation_residual(&params, t, f)?);
                    }
                    row.push(m);
                }
                res.push(row);
                clear_kernel_cache();
            }
            for (&coarse, &fine) in res[0].iter().zip(&res[1]) {
                passed &= coarse <= COMMUTATION_TOL && halves(coarse, fine);
                worst[0] = worst[0].max(coarse);
                worst[1] = worst[1].max(fine);
            }
        }
        outcome(
            passed,
            format!(
                "worst residual over t in {{1, 10, 100}}: {:.2e} (N=4096) -> {:.2e} (N=8192); tol {COMMUTATION_TOL:e}, halving or below {ROUNDOFF_FLOOR:e}",
                worst[0], worst[1]
            ),
        )
    }

    fn dollard(&self) -> Result<Outcome> {
        let mut passed = true;
        let mut parts = Vec::new();
        for (n, alphas) in [(2u8, DOLLARD_ALPHAS_2D), (3, [-1.0, 1.0])] {
            let grid = GridSpec::new(n, LONG.0, LONG.1, LONG.2)?;
            for alpha in alphas {
                let params = ModelParams::new(n, alpha, Sign::Defocusing, 2.0)?;
                let prop = Propagator::new(&params, &grid)?;
                let f = gaussian_datum(&prop, 1.0)?;
                let norm = prop.bound_state().project_out(&f)?.l2_norm();
                let mut r = Vec::new();
                for t in [10.0, 40.0, 160.0] {
                    r.push(prop.dollard_residual(&f, t)? / norm);
                }
                let ok = r[1] < r[0] && r[2] < r[1] && r[0] >= DOLLARD_DECREASE * r[2];
                passed &= ok;
                parts.push(format!("{n}D α={alpha}: {:.2e}/{:.2e}/{:.2e}", r[0], r[1], r[2]));
            }
            clear_kernel_cache();
        }
        outcome(
            passed,
            format!(
                "relative residual at t=10/40/160 [{}]; need monotone, total >= {DOLLARD_DECREASE}x",
                parts.join(", ")
            ),
        )
    }

    fn linear_lemma(&self) -> Result<Outcome> {
        let mut passed = true;
        let mut parts = Vec::new();
        for (n, alpha, p) in [(2u8, 0.5, 1.9), (3, 1.0, 1.3)] {
            let grid = GridSpec::new(n, LONG.0, LONG.1, LONG.2)?;
            let params = ModelParams::new(n, alpha, Sign::Defocusing, p)?;
            let prop = Propagator::new(&params, &grid)?;
            let tf =
                build_test_function(&prop, None, 1e-2, &TestFunctionOptions { r_out: 250.0, ..Default::default() })?;
            for q in [2.0, 2.0 / (2.0 - p)] {
                let r10 = linear_lemma_residual(&prop, &tf, 10.0, q)?;
                let r160 = linear_lemma_residual(&prop, &tf, 160.0, q)?;
                passed &= r10 >= LEMMA_DECREASE * r160;
                parts.push(format!("{n}D p={p} q={q:.3}: {r10:.2e} -> {r160:.2e}"));
            }
            if n == 3 {
                for q in [3.0, 4.0] {
                    let raised = matches!(linear_lemma_residual(&prop, &tf, 10.0, q), Err(DnlsError::Range { .. }));
                    passed &= raised;
                    parts.push(format!("q={q}: {}", if raised { "range error" } else { "NOT rejected" }));
                }
            }
            clear_kernel_cache();
        }
        outcome(passed, format!("t=10 -> t=160 (need >= {LEMMA_DECREASE}x) [{}]", parts.join(", ")))
    }

    fn scaling_identity(&self) -> Result<Outcome> {
        let mut worst = 0.0f64;
        for (n, p) in [(2u8, 1.7), (2, 2.0), (3, 1.3)] {
            let grid = GridSpec::new(n, 512, 30.0, 10.0)?;
            let params = ModelParams::new(n, 0.0, Sign::Defocusing, p)?;
            let mut rng = self.rng(8);
            for s in [2.0, 10.0, 50.0] {
                let psi = random_smooth_field(&grid, Space::Position, &mut rng, 3.0);
                let w = random_smooth_field(&grid, Space::Position, &mut rng, 3.0);
                worst = worst.max(scaling_identity_residual(&params, &psi, &w, s)?);
            }
        }
        outcome(
            worst <= SCALING_TOL,
            format!("worst relative residual {worst:.2e} <= {SCALING_TOL:e} over s in {{2, 10, 50}}"),
        )
    }

    /// Runs (once) the four bundled probes.
    fn bundled_probes(&self) -> Result<()> {
        if !self.probes.borrow().is_empty() {
            return Ok(());
        }
        let mut out = Vec::new();
        for name in BUNDLED_PROBES {
            let cfg = bundled(name)?;
            let summary = cmd_probe(&cfg, &self.work_dir.join(name))?;
            clear_kernel_cache();
            out.push((name.to_string(), summary));
        }
        *self.probes.borrow_mut() = out;
        Ok(())
    }

    fn mechanism(&self) -> Result<Outcome> {
        self.bundled_probes()?;
        let probes = self.probes.borrow();
        let mut passed = true;
        let mut parts = Vec::new();
        for (name, s) in probes.iter() {
            let r = &s.report;
            let expected =
                if name.ends_with("longrange") { Verdict::LongRangeDivergent } else { Verdict::ShortRangeConvergent };
            let th = &r.thresholds;
            let ok = r.verdict == expected
                && match expected {
                    Verdict::LongRangeDivergent => {
                        r.fit_log.b > th.slope_sigmas * r.fit_log.sigma_b
                            && r.fit_log.r2 >= th.r2_min
                            && r.fit_const.mean > 0.0
                    }
                    _ => r.tail_variation <= th.tail_variation,
                };
            passed &= ok;
            parts.push(match expected {
                Verdict::LongRangeDivergent => format!(
                    "{name}: {} (b={:.3e}, σ_b={:.1e}, r²={:.4}, C̄={:.2e})",
                    r.verdict, r.fit_log.b, r.fit_log.sigma_b, r.fit_log.r2, r.fit_const.mean
                ),
                _ => format!("{name}: {} (tail variation {:.2e})", r.verdict, r.tail_variation),
            });
        }
        outcome(passed, parts.join("; "))
    }

    fn fundamental_theorem(&self) -> Result<Outcome> {
        self.bundled_probes()?;
        let probes = self.probes.borrow();
        let worst = probes.iter().map(|(_, s)| s.report.ftc_max_relative).fold(0.0f64, f64::max);
        let all: Vec<String> = probes.iter().map(|(n, s)| format!("{n}: {:.1e}", s.report.ftc_max_relative)).collect();
        outcome(worst <= FTC_TOL, format!("worst mismatch {worst:.2e} <= {FTC_TOL} [{}]", all.join(", ")))
    }

    fn determinism(&self) -> Result<Outcome> {
        self.bundled_probes()?;
        let name = BUNDLED_PROBES[0];
        let cfg = bundled(name)?;
        let first = self.work_dir.join(name);
        let again = self.work_dir.join(format!("{name}-repeat"));
        cmd_probe(&cfg, &again)?;
        let other_threads = if rayon::current_num_threads() == 1 { 2 } else { 1 };
        let threaded = self.work_dir.join(format!("{name}-threads{other_threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(other_threads).build()?;
        pool.install(|| cmd_probe(&cfg, &threaded))?;
        clear_kernel_cache();
        let mut mismatches = Vec::new();
        let mut compared = 0;
        for entry in std::fs::read_dir(&first)? {
            let file = entry?.file_name();
            let a = std::fs::read(first.join(&file))?;
            for dir in [&again, &threaded] {
                compared += 1;
                let b = std::fs::read(dir.join(&file)).map_err(|e| anyhow!("{}: {e}", dir.join(&file).display()))?;
                if a != b {
                    mismatches.push(dir.join(&file).display().to_string());
                }
            }
        }
        if compared == 0 {
            bail!("no artifacts found in {}", first.display());
        }
        outcome(
            mismatches.is_empty(),
            if mismatches.is_empty() {
                format!(
                    "{compared} artifact comparisons byte-identical (repeat run, {} vs {other_threads} threads)",
                    rayon::current_num_threads()
                )
            } else {
                format!("differing artifacts: {}", mismatches.join(", "))
            },
        )
    }
}

/// The bundled probe configurations exercised by criteria 9–11.
pub const BUNDLED_PROBES: [&str; 4] =
    ["2d_p2_longrange", "2d_p3_shortrange", "3d_p1.3_longrange", "3d_p1.7_shortrange"];

/// Spectral band of the random route-equivalence fields.
const ROUTE_BAND: (f64, f64) = (1.0, 3.0);
/// The discrepancy is set by the low-k resolution `~π/R`: the 2D α = 0.5
/// continuum has its resonance near `k ≈ 0.05`, unresolved at `R = 40`.
const ROUTE_GRID: (usize, f64, f64) = (4096, 200.0, 20.0);

/// Positive 2D α for the Dollard check: at α = 0.5 the continuum carries a
/// sharp low-energy feature near `k = 2e^{-2πα-γ} ≈ 0.05` whose Dollard
/// regime only starts at `t ≳ 1/k²`.
const DOLLARD_ALPHAS_2D: [f64; 2] = [-0.5, 0.2];

/// `F^{-1}[taper·F f]` with a raised-cosine taper from 1 at `k_lo` to 0 at
/// `k_hi`: smooth fields with compact free spectrum.
fn free_band_limit(f: &RadialField, k_lo: f64, k_hi: f64) -> Result<RadialField> {
    let ff = fourier_radial(f, Direction::Forward)?.map(|k, v| {
        let x = ((k - k_lo) / (k_hi - k_lo)).clamp(0.0, 1.0);
        v * (0.5 * (1.0 + (PI * x).cos()))
    });
    Ok(fourier_radial(&ff, Direction::Inverse)?)
}

fn halves(coarse: f64, fine: f64) -> bool {
    fine * HALVING <= coarse || fine <= ROUNDOFF_FLOOR
}

/// Gaussian of width 3, band-limited to `k ≤ 1.4`.
fn gaussian_datum(prop: &Propagator, amplitude: f64) -> Result<RadialField> {
    let g = RadialField::from_real_fn(prop.grid(), Space::Position, |r| amplitude * (-r * r / 18.0).exp());
    Ok(prop.band_limit(&g, 0.8, 1.4)?)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `K0(x) = ∫_0^∞ e^{-x cosh t} dt` (trapezoid rule, exponentially
/// convergent for this integrand).
pub fn k0_quadrature(x: f64) -> f64 {
    let h: f64 = 1.0 / 128.0;
    let mut s = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let v = (-x * t.cosh()).exp();
        s += v;
        if v < 1e-300 {
            break;
        }
        t += h;
    }
    s * h
}

/// `J0(x) = (1/π)∫_0^π cos(x sin θ) dθ` (trapezoid rule on a periodic
/// integrand).
pub fn j0_quadrature(x: f64) -> f64 {
    let m = 256;
    let h = PI / m as f64;
    (0..m).map(|i| (x * (i as f64 * h).sin()).cos()).sum::<f64>() * h / PI
}

/// Ascending series `Σ (-1)^m (x²/4)^m / (m!)²`.
pub fn j0_series(x: f64) -> f64 {
    let z = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for m in 1..60 {
        term *= -z / (m as f64 * m as f64);
        sum += term;
    }
    sum
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Y0(x) = (2/π)[(ln(x/2) + γ) J0(x) + Σ (-1)^{m+1} H_m (x²/4)^m / (m!)²]`.
pub fn y0_series(x: f64) -> f64 {
    let z = 0.25 * x * x;
    let (mut term, mut h, mut sum) = (1.0, 0.0, 0.0);
    for m in 1..60 {
        term *= -z / (m as f64 * m as f64);
        h += 1.0 / m as f64;
        sum -= h * term;
    }
    2.0 / PI * (((0.5 * x).ln() + EULER_GAMMA) * j0_series(x) + sum)
}

/// `Y0(x) = (1/π)∫_0^π sin(x sin θ) dθ - (2/π)∫_0^∞ e^{-x sinh t} dt`.
pub fn y0_quadrature(x: f64) -> f64 {
    let a = simpson(|th| (x * th.sin()).sin(), 0.0, PI, 20_000) / PI;
    let upper = (750.0 / x).asinh();
    let b = simpson(|t| (-x * t.sinh()).exp(), 0.0, upper, 200_000) * 2.0 / PI;
    a - b
}

/// Writes the machine-readable summary.
pub fn summary_json(results: &[CheckResult]) -> serde_json::Value {
    serde_json::json!({
        "passed": results.iter().all(|r| r.passed) && results.len() == CHECKS.len(),
        "criteria_run": results.len(),
        "criteria_total": CHECKS.len(),
        "results": results,
    })
}

/// Default configuration for `dnls validate` without `--config`.
pub fn default_config() -> RunConfig {
    bundled(BUNDLED_PROBES[0]).expect("bundled config parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    // tabulated values (Abramowitz & Stegun, 9.8 and 9.1)
    const K0_1: f64 = 0.421_024_438_240_708_3;
    const J0_1: f64 = 0.765_197_686_557_966_6;
    const Y0_1: f64 = 0.088_256_964_215_676_96;

    #[test]
    fn oracles_match_tables() {
        assert!((k0_quadrature(1.0) - K0_1).abs() < 1e-15);
        assert!((j0_series(1.0) - J0_1).abs() < 1e-15);
        assert!((j0_quadrature(1.0) - J0_1).abs() < 1e-15);
        assert!((y0_series(1.0) - Y0_1).abs() < 1e-15);
        assert!((y0_quadrature(1.0) - Y0_1).abs() < 1e-12);
    }

    #[test]
    fn oracles_agree_away_from_one() {
        for x in [0.1, 0.5, 2.0, 5.0] {
            assert!((j0_series(x) - j0_quadrature(x)).abs() < 1e-13, "x={x}");
            assert!((y0_series(x) - y0_quadrature(x)).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn halving_rule() {
        assert!(halves(1e-3, 4e-4));
        assert!(!halves(1e-3, 6e-4));
        assert!(halves(1e-14, 1e-13));
    }

    #[test]
    fn fast_checks_pass() {
        let dir = tempfile::tempdir().unwrap();
        let v = Validator::new(0, dir.path());
        for id in [1, 8] {
            let r = v.run(id);
            assert!(r.passed, "{}", r.line());
            assert!(r.line().starts_with("PASS"));
        }
    }

    #[test]
    fn summary_counts_criteria() {
        let r = CheckResult { id: 1, name: "x", passed: true, detail: String::new(), seconds: 0.0 };
        let s = summary_json(&[r]);
        assert_eq!(s["passed"], false);
        assert_eq!(s["criteria_total"], 11);
    }
}
