//! The probe, evolve, transform and sweep subcommands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use anyhow::{bail, Context, Result};
use dnls_core::genft::{fourier_radial, Direction, GenFourier};
use dnls_core::glassey::{
    build_test_function, scattering_probe, scattering_probe_targeted, ProbeOptions, ScatteringReport, Verdict,
};
use dnls_core::grids::{read_snapshot, read_snapshot_header, write_snapshot, GridSpec, RadialField, Space};
use dnls_core::nls::{NlsSolver, RunOptions, Snapshot};
use dnls_core::pointop::bound_state;
use dnls_core::propagator::Propagator;
use dnls_core::waveop::apply_wave_operator;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{InitialData, RunConfig};

/// SHA-256 of the running executable, computed once.
pub fn binary_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        let bytes = std::env::current_exe().and_then(fs::read).unwrap_or_default();
        Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    })
}

/// Reproduction data embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub program: &'static str,
    pub version: &'static str,
    pub binary_sha256: &'static str,
    pub config: &'a RunConfig,
}

impl<'a> Provenance<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Provenance { program: "dnls", version: env!("CARGO_PKG_VERSION"), binary_sha256: binary_hash(), config }
    }

    /// The same data as `#`-prefixed lines for text artifacts.
    fn comment_block(&self) -> String {
        let mut s = format!("# dnls {} binary_sha256={}\n", self.version, self.binary_sha256);
        for line in self.config.to_toml().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_field(path: &Path, field: &RadialField, prov: &Provenance, t: Option<f64>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_snapshot(BufWriter::new(file), field)?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        snapshot: String,
        t: Option<f64>,
        provenance: &'a Provenance<'a>,
    }
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    write_json(&path.with_extension("json"), &Sidecar { snapshot: name, t, provenance: prov })
}

/// Builds `ψ0` on the configured grid.
pub fn initial_field(cfg: &RunConfig, prop: &Propagator) -> Result<RadialField> {
    let grid = prop.grid();
    match &cfg.initial_data {
        InitialData::Gaussian { width, amplitude, band } => {
            let (w, a) = (*width, *amplitude);
            let g = RadialField::from_real_fn(grid, Space::Position, |r| a * (-r * r / (2.0 * w * w)).exp());
            match band {
                Some([lo, hi]) => Ok(prop.band_limit(&g, *lo, *hi)?),
                None => Ok(g),
            }
        }
        InitialData::BoundStateShaped { amplitude } => match &prop.bound_state().phi {
            Some(phi) => Ok(phi.scaled(Complex64::new(*amplitude, 0.0))),
            None => {
                bail!("initial_data: no bound state representable for n = {}, alpha = {}", grid.dim(), cfg.model.alpha)
            }
        },
        InitialData::FromFile { path } => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let f = read_snapshot(BufReader::new(file), Some(grid))
                .with_context(|| format!("initial_data file {} does not match the configured grid", path.display()))?;
            if f.space() != Space::Position {
                bail!("initial_data file {} holds a frequency-space field", path.display());
            }
            Ok(f)
        }
    }
}

fn probe_options(cfg: &RunConfig) -> ProbeOptions {
    let mut o = ProbeOptions::new(cfg.schedule.t_end);
    o.schedule = cfg.schedule.steps;
    o.snapshot_times = cfg.schedule.snapshot_times.clone();
    o.thresholds = cfg.probe.thresholds;
    o.records_per_decade = cfg.probe.records_per_decade;
    o.tail_decades = cfg.probe.tail_decades;
    o.nonlinear = cfg.probe.nonlinear;
    o
}

#[derive(Debug, Clone, Serialize)]
struct TestFunctionSummary {
    r_hole: f64,
    epsilon: f64,
    approximation_error: f64,
    alignment: Option<f64>,
    phi_l2: f64,
}

#[derive(Serialize)]
struct ProbeDocument<'a> {
    provenance: Provenance<'a>,
    test_function: TestFunctionSummary,
    report: &'a ScatteringReport,
}

/// What a probe produced.
#[derive(Debug, Clone)]
pub struct ProbeSummary {
    pub report: ScatteringReport,
    pub report_path: PathBuf,
    pub series_path: PathBuf,
    pub snapshot_paths: Vec<PathBuf>,
}

impl ProbeSummary {
    pub fn verdict(&self) -> Verdict {
        self.report.verdict
    }
}

/// Runs the scattering probe and writes `report.json`, `series.csv` and the
/// requested snapshots into `out_dir`.
pub fn cmd_probe(cfg: &RunConfig, out_dir: &Path) -> Result<ProbeSummary> {
    let params = cfg.model.params()?;
    if !cfg.model.comparison {
        params
            .check_long_range()
            .context("the long-range probe rejects this power; set model.comparison = true for a contrast run")?;
    }
    let grid = cfg.grid.build(params.n)?;
    let solver = NlsSolver::new(&params, &grid)?;
    let psi0 = initial_field(cfg, solver.propagator())?;
    let opts = probe_options(cfg);
    let outcome = if cfg.probe.targeted {
        scattering_probe_targeted(&solver, &psi0, cfg.probe.epsilon, &cfg.probe.test_function, &opts)?
    } else {
        let tf = build_test_function(solver.propagator(), None, cfg.probe.epsilon, &cfg.probe.test_function)?;
        scattering_probe(&solver, &psi0, &tf, &opts)?
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let prov = Provenance::new(cfg);
    let tf = &outcome.test_function;
    let report = outcome.report;
    let doc = ProbeDocument {
        provenance: prov.clone(),
        test_function: TestFunctionSummary {
            r_hole: tf.r_hole,
            epsilon: tf.epsilon,
            approximation_error: tf.approximation_error,
            alignment: tf.alignment,
            phi_l2: tf.phi.l2_norm(),
        },
        report: &report,
    };
    let report_path = out_dir.join("report.json");
    write_json(&report_path, &doc)?;

    let mut csv = prov.comment_block();
    csv.push_str("t,B,C,mass,supnorm\n");
    for i in 0..report.times.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            report.times[i], report.b_series[i], report.c_series[i], report.mass_series[i], report.sup_series[i]
        );
    }
    let series_path = out_dir.join("series.csv");
    fs::write(&series_path, csv).with_context(|| format!("writing {}", series_path.display()))?;
    let snapshot_paths = write_snapshots(out_dir, &outcome.snapshots, &prov)?;
    Ok(ProbeSummary { report, report_path, series_path, snapshot_paths })
}

fn write_snapshots(out_dir: &Path, snaps: &[Snapshot], prov: &Provenance) -> Result<Vec<PathBuf>> {
    snaps
        .iter()
        .map(|s| {
            let path = out_dir.join(format!("psi_t{}.bin", s.t));
            write_field(&path, &s.psi, prov, Some(s.t))?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveSummary {
    pub t_end: f64,
    pub steps: usize,
    pub mass0: f64,
    pub max_mass_drift: f64,
    pub final_sup_norm: f64,
}

/// Plain NLS evolution: `series.csv` (t, mass, supnorm), snapshots and
/// `evolve.json`.
pub fn cmd_evolve(cfg: &RunConfig, out_dir: &Path) -> Result<EvolveSummary> {
    let params = cfg.model.params()?;
    let grid = cfg.grid.build(params.n)?;
    let solver = NlsSolver::new(&params, &grid)?;
    let psi0 = initial_field(cfg, solver.propagator())?;
    let opts = RunOptions {
        t_end: cfg.schedule.t_end,
        schedule: cfg.schedule.steps,
        snapshot_times: cfg.schedule.snapshot_times.clone(),
        nonlinear: cfg.probe.nonlinear,
        ..RunOptions::new(cfg.schedule.t_end, 0.01)
    };
    let rec = solver.run(&psi0, &opts, |_, _| Ok(()))?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let prov = Provenance::new(cfg);
    let mut csv = prov.comment_block();
    csv.push_str("t,mass,supnorm\n");
    for s in &rec.series {
        let _ = writeln!(csv, "{},{},{}", s.t, s.mass, s.sup_norm);
    }
    fs::write(out_dir.join("series.csv"), csv)?;
    write_snapshots(out_dir, &rec.snapshots, &prov)?;
    let summary = EvolveSummary {
        t_end: rec.state.t,
        steps: rec.state.steps,
        mass0: rec.state.mass0,
        max_mass_drift: rec.state.max_drift,
        final_sup_norm: rec.state.psi.sup_norm(),
    };
    #[derive(Serialize)]
    struct Doc<'a> {
        provenance: Provenance<'a>,
        summary: &'a EvolveSummary,
    }
    write_json(&out_dir.join("evolve.json"), &Doc { provenance: prov, summary: &summary })?;
    Ok(summary)
}

/// Operators available to `transform`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// Radial Fourier transform (position → frequency).
    Fourier,
    /// Generalized Fourier transform `F♯` (position → frequency).
    Genft,
    /// Its adjoint `F♯*` (frequency → position).
    GenftAdjoint,
    /// Wave operator `I + Ω` (position → position).
    Waveop,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformSummary {
    pub which: Which,
    pub norm_in: f64,
    pub norm_out: f64,
}

/// Reads a snapshot, applies `which` and writes the result to `output`.
///
/// `fourier` is the unitary transform, which is its own inverse on radial
/// fields; applying it twice returns the input up to quadrature error.
pub fn cmd_transform(cfg: &RunConfig, input: &Path, which: Which, output: &Path) -> Result<TransformSummary> {
    let params = cfg.model.params()?;
    let grid = cfg.grid.build(params.n)?;
    let mut reader = BufReader::new(File::open(input).with_context(|| format!("opening {}", input.display()))?);
    let header = read_snapshot_header(&mut reader)?;
    let config_header = (grid.dim(), grid.len(), grid.r_max(), grid.k_max());
    if (header.n, header.size, header.r_max, header.k_max) != config_header {
        bail!(
            "grid mismatch: snapshot {} has header (n={}, N={}, R_max={}, K_max={}) but the config grid is (n={}, N={}, R_max={}, K_max={})",
            input.display(),
            header.n,
            header.size,
            header.r_max,
            header.k_max,
            config_header.0,
            config_header.1,
            config_header.2,
            config_header.3
        );
    }
    let f = read_snapshot(BufReader::new(File::open(input)?), Some(&grid))?;
    let out = apply_transform(&params, &grid, &f, which)?;
    let prov = Provenance::new(cfg);
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_field(output, &out, &prov, None)?;
    Ok(TransformSummary { which, norm_in: f.l2_norm(), norm_out: out.l2_norm() })
}

pub fn apply_transform(
    params: &dnls_core::pointop::ModelParams,
    grid: &GridSpec,
    f: &RadialField,
    which: Which,
) -> Result<RadialField> {
    let need = |space: Space| -> Result<()> {
        if f.space() != space {
            bail!("{which:?} expects a {space:?}-space field, got {:?}", f.space());
        }
        Ok(())
    };
    Ok(match which {
        Which::Fourier => {
            fourier_radial(f, if f.space() == Space::Position { Direction::Forward } else { Direction::Inverse })?
        }
        Which::Genft => {
            need(Space::Position)?;
            GenFourier::new(params, grid)?.transform(f)?
        }
        Which::GenftAdjoint => {
            need(Space::Frequency)?;
            GenFourier::new(params, grid)?.adjoint(f)?
        }
        Which::Waveop => {
            need(Space::Position)?;
            apply_wave_operator(params, f)?
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub index: usize,
    pub p: f64,
    pub alpha: f64,
    pub sign: dnls_core::pointop::Sign,
    pub directory: PathBuf,
    pub verdict: Option<Verdict>,
    pub b_slope: Option<f64>,
    pub tail_variation: Option<f64>,
    pub error: Option<String>,
}

/// Runs one probe per `(p, α, sign)` cell in parallel; each cell writes into
/// `out_dir/cell_XXX` and `index.json` lists them all in cell order.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<SweepCell>> {
    let Some(sweep) = &cfg.sweep else {
        bail!("sweep: the config has no [sweep] section");
    };
    let mut cells = Vec::new();
    for &p in &sweep.p {
        for &alpha in &sweep.alpha {
            for &sign in &sweep.sign {
                cells.push((p, alpha, sign));
            }
        }
    }
    fs::create_dir_all(out_dir)?;
    let results: Vec<SweepCell> = cells
        .par_iter()
        .enumerate()
        .map(|(index, &(p, alpha, sign))| {
            let mut c = cfg.clone();
            c.model.p = p;
            c.model.alpha = alpha;
            c.model.sign = sign;
            c.sweep = None;
            let directory = out_dir.join(format!("cell_{index:03}"));
            let (verdict, b_slope, tail_variation, error) = match cmd_probe(&c, &directory) {
                Ok(s) => (Some(s.report.verdict), Some(s.report.fit_log.b), Some(s.report.tail_variation), None),
                Err(e) => (None, None, None, Some(format!("{e:#}"))),
            };
            SweepCell { index, p, alpha, sign, directory, verdict, b_slope, tail_variation, error }
        })
        .collect();
    #[derive(Serialize)]
    struct Index<'a> {
        provenance: Provenance<'a>,
        cells: &'a [SweepCell],
    }
    write_json(&out_dir.join("index.json"), &Index { provenance: Provenance::new(cfg), cells: &results })?;
    Ok(results)
}

/// Bound-state presence for a config, used in messages.
pub fn describe_model(cfg: &RunConfig) -> Result<String> {
    let params = cfg.model.params()?;
    let grid = cfg.grid.build(params.n)?;
    let bs = bound_state(&params, &grid);
    Ok(format!(
        "n = {}, alpha = {}, p = {}, {:?}; bound state {}",
        params.n,
        params.alpha,
        params.p,
        params.sign,
        if bs.exists { format!("E = {:.4e}", bs.e_alpha) } else { "absent".into() }
    ))
}
