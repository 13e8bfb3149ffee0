//! Nonlinear evolution `i∂ₜψ = H_αψ + F(ψ)`, `F(ψ) = ±|ψ|^{p-1}ψ`, by Strang
//! splitting: half nonlinear phase, full spectral linear step, half
//! nonlinear phase.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DnlsError, Result};
use crate::grids::{GridSpec, RadialField, Space};
use crate::pointop::{bound_state, ModelParams};
use crate::propagator::Propagator;

/// Default relative mass tolerance of a run.
pub const MASS_TOLERANCE: f64 = 1e-3;
/// Default time step.
pub const DEFAULT_DT: f64 = 0.01;

/// The nonlinearity `F(ψ) = sign·|ψ|^{p-1}ψ`.
pub fn nonlinearity(params: &ModelParams, psi: &RadialField) -> RadialField {
    let s = params.sign.value();
    let e = params.p - 1.0;
    psi.map(|_, v| v * (s * v.norm().powf(e)))
}

/// Exact flow of `i∂ₜψ = sign·|ψ|^{p-1}ψ` over `dt`: a pointwise phase.
pub fn nonlinear_phase_step(params: &ModelParams, psi: &RadialField, dt: f64) -> RadialField {
    phase_step(params.sign.value(), params.p, psi, dt)
}

fn phase_step(sign: f64, p: f64, psi: &RadialField, dt: f64) -> RadialField {
    let e = p - 1.0;
    psi.map(|_, v| {
        let a = v.norm();
        if a == 0.0 {
            v
        } else {
            v * Complex64::from_polar(1.0, -sign * a.powf(e) * dt)
        }
    })
}

/// How the time step evolves along a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Uniform {
        dt: f64,
    },
    /// `dt(t) = clamp(growth·t, dt, dt_max)`: resolves the early dynamics and
    /// follows the dispersive slowdown afterwards.
    Geometric {
        dt: f64,
        growth: f64,
        dt_max: f64,
    },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Uniform { dt: DEFAULT_DT }
    }
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Uniform { dt } => dt > 0.0 && dt.is_finite(),
            StepSchedule::Geometric { dt, growth, dt_max } => {
                dt > 0.0 && growth >= 0.0 && dt_max >= dt && dt_max.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(DnlsError::Config(format!("invalid step schedule {self:?}")))
        }
    }

    pub fn dt_at(&self, t: f64) -> f64 {
        match *self {
            StepSchedule::Uniform { dt } => dt,
            StepSchedule::Geometric { dt, growth, dt_max } => (growth * t).clamp(dt, dt_max),
        }
    }

    /// Step times from 0 to `t_end`, hitting every requested stop exactly.
    pub fn times(&self, t_end: f64, stops: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(DnlsError::Domain { function: "StepSchedule::times", value: t_end, reason: "T must be >= 0" });
        }
        let mut stops: Vec<f64> = stops.iter().copied().filter(|&s| s > 0.0 && s < t_end).collect();
        stops.push(t_end);
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        let mut times = vec![0.0];
        let mut t = 0.0;
        for stop in stops {
            while t < stop {
                let dt = self.dt_at(t);
                // Absorb a sliver step into the last step before the stop.
                let next = if t + 1.5 * dt >= stop { stop } else { t + dt };
                times.push(next);
                t = next;
            }
        }
        if t_end == 0.0 {
            times.truncate(1);
        }
        Ok(times)
    }
}

/// Controls for [`NlsSolver::run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub t_end: f64,
    pub schedule: StepSchedule,
    /// Times at which the field is stored.
    pub snapshot_times: Vec<f64>,
    pub mass_tolerance: f64,
    /// `false` turns the run into the linear flow (the splitting degenerates).
    pub nonlinear: bool,
}

impl RunOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        RunOptions {
            t_end,
            schedule: StepSchedule::Uniform { dt },
            snapshot_times: Vec::new(),
            mass_tolerance: MASS_TOLERANCE,
            nonlinear: true,
        }
    }
}

/// The state of a run.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub psi: RadialField,
    pub mass0: f64,
    pub step_dt: f64,
    pub steps: usize,
    /// Largest `|‖ψ‖² - mass0| / mass0` seen.
    pub max_drift: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub psi: RadialField,
}

/// One row of the per-run series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub mass: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub state: EvolutionState,
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SeriesPoint>,
}

/// Split-step solver with a cached spectral propagator.
#[derive(Debug, Clone)]
pub struct NlsSolver {
    prop: Propagator,
}

impl NlsSolver {
    /// Fails on grids whose Nyquist ratio is not below 1 (see
    /// [`GridSpec::nyquist_ratio`]): repeated steps would amplify aliased
    /// modes.
    pub fn new(params: &ModelParams, grid: &GridSpec) -> Result<Self> {
        Self::from_propagator(Propagator::new(params, grid)?)
    }

    pub fn from_propagator(prop: Propagator) -> Result<Self> {
        let ratio = prop.grid().nyquist_ratio();
        if !(ratio < 1.0) {
            return Err(DnlsError::Config(format!(
                "grid under-resolves the outer cells (Nyquist ratio {ratio:.2} >= 1); \
                 increase N or reduce R_max·K_max"
            )));
        }
        Ok(NlsSolver { prop })
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn params(&self) -> &ModelParams {
        self.prop.params()
    }

    /// One Strang step.
    pub fn step(&self, psi: &RadialField, dt: f64, nonlinear: bool) -> Result<RadialField> {
        if !nonlinear {
            return self.prop.evolve(psi, dt);
        }
        let p = self.params();
        let half = nonlinear_phase_step(p, psi, 0.5 * dt);
        let lin = self.prop.evolve_retaining(&half, dt)?;
        Ok(nonlinear_phase_step(p, &lin, 0.5 * dt))
    }

    /// Evolves `psi0` to `opts.t_end`. `observe` sees the field at `t = 0`
    /// and after every step. The mass reference is `‖ψ0‖²`. Without the
    /// nonlinearity the steps are taken from the exact spectral flow of `ψ0`
    /// rather than composed.
    pub fn run(
        &self,
        psi0: &RadialField,
        opts: &RunOptions,
        mut observe: impl FnMut(f64, &RadialField) -> Result<()>,
    ) -> Result<EvolutionRecord> {
        psi0.require_space(Space::Position, "evolve_nls")?;
        psi0.require_unscaled("evolve_nls")?;
        if psi0.grid() != self.prop.grid() {
            return Err(DnlsError::GridMismatch("initial datum is not on the solver grid".into()));
        }
        let times = opts.schedule.times(opts.t_end, &opts.snapshot_times)?;
        let mass0 = psi0.mass();
        let mut psi = psi0.clone();
        let mut snapshots = Vec::new();
        let want = |t: f64| opts.snapshot_times.iter().any(|&s| (s - t).abs() <= 1e-12 * s.max(1.0));
        let mut series = vec![SeriesPoint { t: 0.0, mass: mass0, sup_norm: psi.sup_norm() }];
        if want(0.0) {
            snapshots.push(Snapshot { t: 0.0, psi: psi.clone() });
        }
        observe(0.0, &psi)?;
        let mut max_drift = 0.0f64;
        let mut step_dt = opts.schedule.dt_at(0.0);
        let linear = if opts.nonlinear { None } else { Some(self.prop.analyse(psi0)?) };
        for w in times.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            step_dt = t1 - t0;
            psi = match &linear {
                Some(data) => self.prop.synthesise(data, t1)?,
                None => self.step(&psi, step_dt, true)?,
            };
            let mass = psi.mass();
            let drift = if mass0 > 0.0 { (mass - mass0).abs() / mass0 } else { 0.0 };
            max_drift = max_drift.max(drift);
            if drift > opts.mass_tolerance {
                return Err(DnlsError::MassDrift { t: t1, drift, tolerance: opts.mass_tolerance });
            }
            series.push(SeriesPoint { t: t1, mass, sup_norm: psi.sup_norm() });
            if want(t1) {
                snapshots.push(Snapshot { t: t1, psi: psi.clone() });
            }
            observe(t1, &psi)?;
        }
        let steps = times.len() - 1;
        Ok(EvolutionRecord {
            state: EvolutionState { t: opts.t_end, psi, mass0, step_dt, steps, max_drift },
            snapshots,
            series,
        })
    }
}

/// Uniform-step evolution to `t_end`.
pub fn evolve_nls(params: &ModelParams, psi0: &RadialField, t_end: f64, dt: f64) -> Result<EvolutionRecord> {
    let solver = NlsSolver::new(params, psi0.grid())?;
    solver.run(psi0, &RunOptions::new(t_end, dt), |_, _| Ok(()))
}

/// Outcome of [`soliton_sanity`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolitonReport {
    pub trivial: bool,
    pub sup_initial: f64,
    pub sup_final: f64,
    pub sup_min: f64,
    /// `sup_final / sup_initial`.
    pub ratio: f64,
    /// The sup norm never dropped below half its initial value.
    pub localized: bool,
    pub max_drift: f64,
    pub series: Vec<SeriesPoint>,
}

/// Evolves `amplitude·Φ_α` to `t_end` and reports whether the sup norm stays
/// away from dispersion. The sup norm is taken of the resolved field `Pψ`
/// (see [`Propagator::filter`]); the unresolved remainder that the solver
/// carries at the innermost nodes would otherwise dominate it. With `nonlinear = false` the datum is an
/// eigenvector and the sup norm is constant.
pub fn soliton_sanity(
    params: &ModelParams,
    grid: &GridSpec,
    amplitude: f64,
    t_end: f64,
    dt: f64,
    nonlinear: bool,
) -> Result<SolitonReport> {
    let bs = bound_state(params, grid);
    let datum = match (&bs.phi, amplitude != 0.0) {
        (Some(phi), true) => phi.scaled(Complex64::new(amplitude, 0.0)),
        _ => RadialField::zeros(grid, Space::Position),
    };
    if datum.sup_norm() == 0.0 {
        return Ok(SolitonReport {
            trivial: true,
            sup_initial: 0.0,
            sup_final: 0.0,
            sup_min: 0.0,
            ratio: 1.0,
            localized: false,
            max_drift: 0.0,
            series: Vec::new(),
        });
    }
    let solver = NlsSolver::new(params, grid)?;
    let mut opts = RunOptions::new(t_end, dt);
    opts.nonlinear = nonlinear;
    opts.mass_tolerance = f64::INFINITY;
    let mut series = Vec::new();
    let rec = solver.run(&datum, &opts, |t, psi| {
        let resolved = solver.prop.filter(psi)?;
        series.push(SeriesPoint { t, mass: psi.mass(), sup_norm: resolved.sup_norm() });
        Ok(())
    })?;
    let sup_initial = series[0].sup_norm;
    let sup_final = series[series.len() - 1].sup_norm;
    let sup_min = series.iter().map(|s| s.sup_norm).fold(f64::INFINITY, f64::min);
    Ok(SolitonReport {
        trivial: false,
        sup_initial,
        sup_final,
        sup_min,
        ratio: sup_final / sup_initial,
        localized: sup_min >= 0.5 * sup_initial,
        max_drift: rec.state.max_drift,
        series,
    })
}
