//! Radial Fourier transform `F`, generalized eigenfunctions
//! `Φ(k,r) = (2π)^{-n/2} j(kr) + R(k,r)` of `H_α`, and the generalized
//! transform `F♯` with its adjoint.
//!
//! After the angular integration every kernel is a function of `kr` built
//! from two real profiles, stored once per grid as the complex matrix
//! `H_ij = A(k_i r_j) + i B(k_i r_j)`:
//!
//! * n = 2: `A = J0`, `B = Y0` (so `H = H0^(1)`),
//! * n = 3: `A = sin(kr)/kr`, `B = cos(kr)/kr`.
//!
//! The extension parameter only enters through per-row coefficients, so one
//! matrix serves `F`, `F♯`, `F♯*` and the wave-operator kernel for every α.
//!
//! Correction terms:
//!
//! * n = 2: `R = c(k) H0^(1)(-kr)`, `c(k) = (i/4) / (2πα + γ + ln(k/2) + iπ/2)`;
//! * n = 3: `R = (2π)^{-3/2} e^{-ikr} / (r (4πα + ik))`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DnlsError, Result};
use crate::grids::{lq_norm, random_smooth_field, GridKey, GridSpec, RadialField, Space};
use crate::pointop::{apply_h, DomainElement};
use crate::pointop::{bound_state, ModelParams};
use crate::specfun::{j0_y0, EULER_GAMMA};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Columns handled per task in transposed products.
const COLUMN_BLOCK: usize = 256;

/// Dense `A + iB` kernel over `(k_i, r_j)`, row-major in `k`.
#[derive(Debug)]
pub struct KernelMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl KernelMatrix {
    fn compute(grid: &GridSpec) -> Self {
        let (k, r) = (&grid.k().nodes, &grid.r().nodes);
        let two_d = grid.dim() == 2;
        let mut data = vec![ZERO; k.len() * r.len()];
        data.par_chunks_mut(r.len()).zip(k.par_iter()).for_each(|(row, &ki)| {
            for (h, &rj) in row.iter_mut().zip(r) {
                let x = ki * rj;
                *h = if two_d {
                    let (j, y) = j0_y0(x);
                    Complex64::new(j, y)
                } else {
                    let (s, c) = x.sin_cos();
                    Complex64::new(s / x, c / x)
                };
            }
        });
        KernelMatrix { rows: k.len(), cols: r.len(), data }
    }

    /// `(Σ_j A_ij x_j, Σ_j B_ij x_j)` for every row; the second vector is
    /// empty unless `with_b`.
    pub fn rows_apply(&self, x: &[Complex64], with_b: bool) -> (Vec<Complex64>, Vec<Complex64>) {
        let pairs: Vec<(Complex64, Complex64)> = self
            .data
            .par_chunks(self.cols)
            .map(|row| {
                let (mut sa, mut sb) = (ZERO, ZERO);
                if with_b {
                    for (h, v) in row.iter().zip(x) {
                        sa += v * h.re;
                        sb += v * h.im;
                    }
                } else {
                    for (h, v) in row.iter().zip(x) {
                        sa += v * h.re;
                    }
                }
                (sa, sb)
            })
            .collect();
        let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        (a, if with_b { b } else { Vec::new() })
    }

    /// `Σ_i A_ij y_i + B_ij z_i` for every column (`z` optional).
    pub fn cols_apply(&self, y: &[Complex64], z: Option<&[Complex64]>) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.cols];
        out.par_chunks_mut(COLUMN_BLOCK).enumerate().for_each(|(blk, chunk)| {
            let j0 = blk * COLUMN_BLOCK;
            let width = chunk.len();
            for i in 0..self.rows {
                let row = &self.data[i * self.cols + j0..i * self.cols + j0 + width];
                let yi = y[i];
                match z {
                    Some(z) => {
                        let zi = z[i];
                        for (o, h) in chunk.iter_mut().zip(row) {
                            *o += yi * h.re + zi * h.im;
                        }
                    }
                    None => {
                        for (o, h) in chunk.iter_mut().zip(row) {
                            *o += yi * h.re;
                        }
                    }
                }
            }
        });
        out
    }

    fn bytes(&self) -> usize {
        self.data.len() * 16
    }
}

struct Cache {
    entries: HashMap<GridKey, Arc<KernelMatrix>>,
    order: Vec<GridKey>,
}

fn cache() -> &'static Mutex<Cache> {
    static CACHE: OnceLock<Mutex<Cache>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Cache { entries: HashMap::new(), order: Vec::new() }))
}

/// In-memory budget for cached kernels (bytes); override with
/// `DNLS_CACHE_BYTES`.
fn cache_budget() -> usize {
    std::env::var("DNLS_CACHE_BYTES").ok().and_then(|s| s.parse().ok()).unwrap_or(1_600_000_000)
}

/// Kernel matrix of `grid`, from the in-process cache, the on-disk cache in
/// `DNLS_CACHE_DIR` (if set), or freshly computed.
pub fn kernel_matrix(grid: &GridSpec) -> Arc<KernelMatrix> {
    let key = grid.key();
    let mut guard = cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(m) = guard.entries.get(&key) {
        return m.clone();
    }
    let m = Arc::new(load_from_disk(grid).unwrap_or_else(|| {
        let m = KernelMatrix::compute(grid);
        store_to_disk(grid, &m);
        m
    }));
    let budget = cache_budget();
    let mut total: usize = guard.entries.values().map(|m| m.bytes()).sum::<usize>() + m.bytes();
    while total > budget && !guard.order.is_empty() {
        let old = guard.order.remove(0);
        if let Some(e) = guard.entries.remove(&old) {
            total -= e.bytes();
        }
    }
    guard.entries.insert(key, m.clone());
    guard.order.push(key);
    m
}

/// Drops every cached kernel held by the process-wide cache.
pub fn clear_kernel_cache() {
    let mut guard = cache().lock().unwrap_or_else(|e| e.into_inner());
    guard.entries.clear();
    guard.order.clear();
}

const CACHE_MAGIC: &[u8; 4] = b"DNLK";
const CACHE_VERSION: u32 = 1;
/// Kernel kind tag: `A + iB` Bessel-type matrix (α-independent, stored with α = 0).
const KIND_BESSEL_PAIR: u8 = 1;

/// FNV-1a hash of the grid parameters (stable across runs and platforms).
pub fn grid_hash(grid: &GridSpec) -> u64 {
    let k = grid.key();
    let mut bytes = vec![k.n];
    bytes.extend_from_slice(&(k.size as u64).to_le_bytes());
    bytes.extend_from_slice(&k.r_max_bits.to_le_bytes());
    bytes.extend_from_slice(&k.k_max_bits.to_le_bytes());
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn cache_path(grid: &GridSpec) -> Option<PathBuf> {
    let dir = std::env::var_os("DNLS_CACHE_DIR")?;
    Some(PathBuf::from(dir).join(format!("kernel-{:016x}.bin", grid_hash(grid))))
}

fn store_to_disk(grid: &GridSpec, m: &KernelMatrix) {
    if let Some(path) = cache_path(grid) {
        // the cache is an optimisation: failures only cost a recomputation
        let _ = write_cache_file(&path, grid, m);
    }
}

fn load_from_disk(grid: &GridSpec) -> Option<KernelMatrix> {
    read_cache_file(&cache_path(grid)?, grid)
}

/// Writes `{magic, version, grid hash, α, kind, rows, cols}` followed by the
/// matrix as little-endian complex pairs (atomically, via a rename).
fn write_cache_file(path: &Path, grid: &GridSpec, m: &KernelMatrix) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    let mut out = BufWriter::new(fs::File::create(&tmp)?);
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&grid_hash(grid).to_le_bytes())?;
    out.write_all(&0.0f64.to_le_bytes())?;
    out.write_all(&[KIND_BESSEL_PAIR])?;
    out.write_all(&(m.rows as u64).to_le_bytes())?;
    out.write_all(&(m.cols as u64).to_le_bytes())?;
    for v in &m.data {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(tmp, path)
}

fn read_cache_file(path: &Path, grid: &GridSpec) -> Option<KernelMatrix> {
    let mut input = BufReader::new(fs::File::open(path).ok()?);
    let mut head = [0u8; 4 + 4 + 8 + 8 + 1 + 8 + 8];
    input.read_exact(&mut head).ok()?;
    let u64_at = |o: usize| u64::from_le_bytes(head[o..o + 8].try_into().expect("8 bytes"));
    if &head[..4] != CACHE_MAGIC
        || u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) != CACHE_VERSION
        || u64_at(8) != grid_hash(grid)
        || head[24] != KIND_BESSEL_PAIR
    {
        return None;
    }
    let (rows, cols) = (u64_at(25) as usize, u64_at(33) as usize);
    if rows != grid.len() || cols != grid.len() {
        return None;
    }
    let mut raw = vec![0u8; rows * cols * 16];
    input.read_exact(&mut raw).ok()?;
    let data = raw
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    Some(KernelMatrix { rows, cols, data })
}

/// `(2π)^{-n/2}`.
pub fn plane_normalisation(n: u8) -> f64 {
    (2.0 * PI).powf(-(n as f64) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn base_weighted(f: &RadialField) -> Vec<Complex64> {
    let w = &f.grid().axis(f.space()).weights;
    f.values.iter().zip(w).map(|(v, w)| v * w).collect()
}

/// Unitary radial Fourier transform (forward: position → frequency).
/// The radial kernel is real, so forward and inverse share it.
///
/// Dilated inputs are handled exactly: a field on the axis scaled by `s`
/// transforms to the conjugate axis scaled by `1/s`.
pub fn fourier_radial(f: &RadialField, direction: Direction) -> Result<RadialField> {
    let grid = f.grid();
    let m = kernel_matrix(grid);
    let s = f.scale();
    let c = plane_normalisation(grid.dim()) * s.powi(grid.dim() as i32);
    let x = base_weighted(f);
    let out = match direction {
        Direction::Forward => {
            f.require_space(Space::Position, "forward Fourier transform")?;
            let (a, _) = m.rows_apply(&x, false);
            RadialField::from_values(grid, Space::Frequency, a.into_iter().map(|v| v * c).collect())?
        }
        Direction::Inverse => {
            f.require_space(Space::Frequency, "inverse Fourier transform")?;
            let y: Vec<Complex64> = x.into_iter().map(|v| v * c).collect();
            RadialField::from_values(grid, Space::Position, m.cols_apply(&y, None))?
        }
    };
    Ok(out.dilated(1.0 / s))
}

/// Denominator of the 2D correction coefficient,
/// `2πα + γ + ln(k/2) + iπ/2`; its modulus is at least `π/2`.
pub fn correction_denominator_2d(alpha: f64, k: f64) -> Complex64 {
    Complex64::new(2.0 * PI * alpha + EULER_GAMMA + (k / 2.0).ln(), PI / 2.0)
}

/// Row coefficients `(a(k), b(k))` with `Φ(k, r) = a A(kr) + b B(kr)`.
pub fn eigenfunction_coefficients(params: &ModelParams, k: f64) -> (Complex64, Complex64) {
    let i = Complex64::i();
    if params.n == 2 {
        let c = (i / 4.0) / correction_denominator_2d(params.alpha, k);
        // H0(-kr) = -(J0 - i Y0)
        (Complex64::new(1.0 / (2.0 * PI), 0.0) - c, i * c)
    } else {
        let c3 = plane_normalisation(3);
        // e^{-ikr}/r = k (B - iA)
        let d = k / (4.0 * PI * params.alpha + i * k);
        ((1.0 - i * d) * c3, d * c3)
    }
}

/// `Φ(k, r)` evaluated pointwise (reference implementation for tests).
pub fn eigenfunction(params: &ModelParams, k: f64, r: f64) -> Complex64 {
    let (a, b) = eigenfunction_coefficients(params, k);
    let x = k * r;
    let (av, bv) = if params.n == 2 {
        j0_y0(x)
    } else {
        let (s, c) = x.sin_cos();
        (s / x, c / x)
    };
    a * av + b * bv
}

/// `F♯` and `F♯*` for one `(grid, α)`; cheap to build once the grid's
/// kernel is cached.
#[derive(Debug, Clone)]
pub struct GenFourier {
    params: ModelParams,
    grid: GridSpec,
    kernel: Arc<KernelMatrix>,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl GenFourier {
    pub fn new(params: &ModelParams, grid: &GridSpec) -> Result<Self> {
        if params.n != grid.dim() {
            return Err(DnlsError::GridMismatch(format!(
                "model dimension {} on a {}-dimensional grid",
                params.n,
                grid.dim()
            )));
        }
        let (a, b) = grid.k().nodes.iter().map(|&k| eigenfunction_coefficients(params, k)).unzip();
        Ok(GenFourier { params: *params, grid: grid.clone(), kernel: kernel_matrix(grid), a, b })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kernel(&self) -> &Arc<KernelMatrix> {
        &self.kernel
    }

    fn check(&self, f: &RadialField, space: Space, what: &str) -> Result<()> {
        f.require_space(space, what)?;
        f.require_unscaled(what)?;
        if f.grid() != &self.grid {
            return Err(DnlsError::GridMismatch(format!("{what}: field is on a different grid")));
        }
        Ok(())
    }

    /// `F♯f(k) = ∫ conj(Φ(k,x)) f(x) dx`.
    pub fn transform(&self, f: &RadialField) -> Result<RadialField> {
        self.check(f, Space::Position, "gen_transform")?;
        let (sa, sb) = self.kernel.rows_apply(&base_weighted(f), true);
        let values = (0..sa.len()).map(|i| self.a[i].conj() * sa[i] + self.b[i].conj() * sb[i]).collect();
        RadialField::from_values(&self.grid, Space::Frequency, values)
    }

    /// `F♯*g(r) = ∫ Φ(k,r) g(k) dk`.
    pub fn adjoint(&self, g: &RadialField) -> Result<RadialField> {
        self.check(g, Space::Frequency, "gen_transform_adjoint")?;
        let x = base_weighted(g);
        let y: Vec<Complex64> = x.iter().zip(&self.a).map(|(x, a)| a * x).collect();
        let z: Vec<Complex64> = x.iter().zip(&self.b).map(|(x, b)| b * x).collect();
        RadialField::from_values(&self.grid, Space::Position, self.kernel.cols_apply(&y, Some(&z)))
    }
}

pub fn gen_transform(params: &ModelParams, f: &RadialField) -> Result<RadialField> {
    GenFourier::new(params, f.grid())?.transform(f)
}

pub fn gen_transform_adjoint(params: &ModelParams, g: &RadialField) -> Result<RadialField> {
    GenFourier::new(params, g.grid())?.adjoint(g)
}

/// `‖F♯(H_α ψ) - k² F♯ψ‖ / ‖ψ‖`.
pub fn diagonalization_residual(params: &ModelParams, element: &DomainElement) -> Result<f64> {
    let gf = GenFourier::new(params, element.phi_reg.grid())?;
    let psi = element.psi(params);
    let lhs = gf.transform(&apply_h(params, element))?;
    let rhs = gf.transform(&psi)?.map(|k, v| v * (k * k));
    Ok(lhs.sub(&rhs)?.l2_norm() / psi.l2_norm())
}

/// Admissible exponents for `‖F♯f‖_q ≤ c‖f‖_{q'}`: `[2, ∞)` in 2D and
/// `[2, 3)` in 3D.
pub fn check_hausdorff_young_range(n: u8, q: f64) -> Result<()> {
    let ok = if n == 2 { q >= 2.0 && q.is_finite() } else { (2.0..3.0).contains(&q) };
    if ok {
        Ok(())
    } else {
        Err(DnlsError::Range { q, n, range: if n == 2 { "[2, inf)" } else { "[2, 3)" } })
    }
}

/// Largest observed `‖F♯f‖_q / ‖f‖_{q'}` over random smooth fields
/// orthogonal to the bound state.
pub fn hausdorff_young_probe(params: &ModelParams, grid: &GridSpec, q: f64, trials: usize, seed: u64) -> Result<f64> {
    check_hausdorff_young_range(params.n, q)?;
    let gf = GenFourier::new(params, grid)?;
    let bs = bound_state(params, grid);
    let q_dual = q / (q - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let width = rng.gen_range(0.6..2.0);
        let f = bs.project_out(&random_smooth_field(grid, Space::Position, &mut rng, width))?;
        let ratio = lq_norm(&gf.transform(&f)?, q)? / lq_norm(&f, q_dual)?;
        worst = worst.max(ratio);
    }
    Ok(worst)
}
