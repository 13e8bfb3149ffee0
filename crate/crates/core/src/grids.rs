//! Radial grids, quadrature weights, discrete norms and the shared field type.
//!
//! Both axes (position `r` and frequency `k`) use the same smooth
//! log-linear layout
//!
//! ```text
//! x(u) = x_c ln(1 + e^u),    x_c = X_max / 10,
//! ```
//!
//! sampled on a uniform `u` grid between `x(u_0) = x_0 = X_max / (100 N)` and
//! `x(u_1) = X_max`. Nodes cluster geometrically near the origin (where the
//! Green's function and the bound states are singular) and become uniform
//! beyond `x_c`. The trapezoid rule in `u` is spectrally accurate for
//! integrands that vanish at the outer cutoff, which a composite
//! geometric/uniform layout is not (its junction costs a second-order error).
//!
//! The weights absorb the surface measure `2πx` (n = 2) or `4πx²` (n = 3) so
//! that `Σ w_j f(x_j)` approximates `∫_{R^n} f(|x|) dx`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DnlsError, Result};

pub const DEFAULT_N: usize = 4096;
pub const DEFAULT_R_MAX: f64 = 40.0;
pub const DEFAULT_K_MAX: f64 = 40.0;
/// Offset used to realise the exponents `q-` and `q+` as `q ∓ 0.1`.
pub const DEFAULT_Q_OFFSET: f64 = 0.1;

const MIN_NODES: usize = 16;
/// Ratio `x_max / x_c`.
const OUTER_RATIO: f64 = 10.0;
/// The innermost node sits at `x_max / (INNER_RATIO * N)`.
const INNER_RATIO: f64 = 1000.0;
/// The end correction on `[0, x_0]` extrapolates linearly through node 0 and
/// the first node beyond this multiple of `x_0`.
const END_CORRECTION_SPAN: f64 = 20.0;

pub fn q_minus(q: f64) -> f64 {
    q - DEFAULT_Q_OFFSET
}

pub fn q_plus(q: f64) -> f64 {
    q + DEFAULT_Q_OFFSET
}

/// Position or frequency representation of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Position,
    Frequency,
}

impl Space {
    fn code(self) -> u8 {
        match self {
            Space::Position => 0,
            Space::Frequency => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Space::Position),
            1 => Ok(Space::Frequency),
            _ => Err(DnlsError::Format(format!("unknown space tag {c}"))),
        }
    }
}

/// Nodes and weights of one radial axis.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    /// Quadrature weights including the surface measure.
    pub weights: Vec<f64>,
    /// `dx/du` at each node: useful for finite differences in `u`.
    pub jacobian: Vec<f64>,
    /// Uniform step in the computational variable `u`.
    pub du: f64,
    pub x_c: f64,
}

impl Axis {
    fn build(n: u8, size: usize, x_max: f64) -> Self {
        let x_c = x_max / OUTER_RATIO;
        let x0 = x_max / (INNER_RATIO * size as f64);
        // u(x) = ln(e^{x/x_c} - 1), written stably.
        let u_of = |x: f64| {
            let y = x / x_c;
            y + (-(-y).exp()).ln_1p()
        };
        let (u0, u1) = (u_of(x0), u_of(x_max));
        let du = (u1 - u0) / (size - 1) as f64;
        let mut nodes = Vec::with_capacity(size);
        let mut jacobian = Vec::with_capacity(size);
        for j in 0..size {
            let u = if j + 1 == size { u1 } else { u0 + du * j as f64 };
            // softplus and sigmoid, evaluated without overflow
            let sp = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
            let sg = if u > 0.0 {
                1.0 / (1.0 + (-u).exp())
            } else {
                let e = u.exp();
                e / (1.0 + e)
            };
            nodes.push(if j + 1 == size { x_max } else { x_c * sp });
            jacobian.push(x_c * sg);
        }
        nodes[0] = x0;
        let surface = |x: f64| surface_measure(n, x);
        // Trapezoid in u; the outer end (where integrands are cut off
        // mid-oscillation) gets fourth-order end weights 3/8, 7/6, 23/24.
        let mut weights: Vec<f64> = (0..size)
            .map(|j| {
                let factor = match size - 1 - j {
                    0 => 3.0 / 8.0,
                    1 => 7.0 / 6.0,
                    2 => 23.0 / 24.0,
                    _ if j == 0 => 0.5,
                    _ => 1.0,
                };
                factor * du * jacobian[j] * surface(nodes[j])
            })
            .collect();
        // [0, x0]: integrate the linear interpolant of the density
        // f(x)·surface(x) through nodes 0 and m.
        let m = nodes.iter().position(|&x| x >= END_CORRECTION_SPAN * x0).unwrap_or(size - 1).max(1);
        let xm = nodes[m];
        let slope_share = x0 * x0 / (2.0 * (xm - x0));
        weights[0] += (x0 + slope_share) * surface(x0);
        weights[m] -= slope_share * surface(xm);
        Axis { nodes, weights, jacobian, du, x_c }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `|S^{n-1}| x^{n-1}`.
pub fn surface_measure(n: u8, x: f64) -> f64 {
    if n == 2 {
        2.0 * PI * x
    } else {
        4.0 * PI * x * x
    }
}

#[derive(Debug)]
struct GridData {
    n: u8,
    size: usize,
    r_max: f64,
    k_max: f64,
    r: Axis,
    k: Axis,
}

/// Immutable radial discretisation shared (by reference count) between all
/// fields living on it.
#[derive(Debug, Clone)]
pub struct GridSpec(Arc<GridData>);

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.key() == other.key()
    }
}

/// Hashable identity of a grid: the constructor arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridKey {
    pub n: u8,
    pub size: usize,
    pub r_max_bits: u64,
    pub k_max_bits: u64,
}

impl GridSpec {
    /// Builds the grid; the layout is a pure function of the arguments.
    pub fn new(n: u8, size: usize, r_max: f64, k_max: f64) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(DnlsError::Config(format!("dimension must be 2 or 3, got {n}")));
        }
        if size < MIN_NODES {
            return Err(DnlsError::Config(format!("need at least {MIN_NODES} nodes, got {size}")));
        }
        if !(r_max > 0.0 && r_max.is_finite() && k_max > 0.0 && k_max.is_finite()) {
            return Err(DnlsError::Config(format!(
                "cutoffs must be positive and finite (R_max = {r_max}, K_max = {k_max})"
            )));
        }
        Ok(GridSpec(Arc::new(GridData {
            n,
            size,
            r_max,
            k_max,
            r: Axis::build(n, size, r_max),
            k: Axis::build(n, size, k_max),
        })))
    }

    pub fn with_defaults(n: u8) -> Result<Self> {
        Self::new(n, DEFAULT_N, DEFAULT_R_MAX, DEFAULT_K_MAX)
    }

    pub fn dim(&self) -> u8 {
        self.0.n
    }

    pub fn len(&self) -> usize {
        self.0.size
    }

    pub fn is_empty(&self) -> bool {
        self.0.size == 0
    }

    pub fn r_max(&self) -> f64 {
        self.0.r_max
    }

    pub fn k_max(&self) -> f64 {
        self.0.k_max
    }

    /// `max(K·Δr_max, R·Δk_max)/π`: below 1 the outermost cells resolve the
    /// fastest plane-wave oscillation on both axes. Composed spectral steps
    /// on grids at or above 1 are unstable.
    pub fn nyquist_ratio(&self) -> f64 {
        let last_gap = |ax: &Axis| {
            let m = ax.nodes.len();
            ax.nodes[m - 1] - ax.nodes[m - 2]
        };
        (self.k_max() * last_gap(self.r())).max(self.r_max() * last_gap(self.k())) / std::f64::consts::PI
    }

    pub fn key(&self) -> GridKey {
        GridKey {
            n: self.0.n,
            size: self.0.size,
            r_max_bits: self.0.r_max.to_bits(),
            k_max_bits: self.0.k_max.to_bits(),
        }
    }

    pub fn axis(&self, space: Space) -> &Axis {
        match space {
            Space::Position => &self.0.r,
            Space::Frequency => &self.0.k,
        }
    }

    pub fn r(&self) -> &Axis {
        &self.0.r
    }

    pub fn k(&self) -> &Axis {
        &self.0.k
    }

    /// `Σ w_j f(x_j)` for a real radial integrand.
    pub fn integrate(&self, space: Space, f: impl Fn(f64) -> f64) -> f64 {
        let ax = self.axis(space);
        ax.nodes.iter().zip(&ax.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// A complex radial profile sampled on one axis of a grid.
///
/// `scale` records an exact dilation: the samples live at `scale·x_j` with
/// weights `scale^n·w_j`. Dilated fields appear only in the pseudo-conformal
/// frame; transforms require `scale == 1`.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: GridSpec,
    space: Space,
    scale: f64,
    pub values: Vec<Complex64>,
}

impl RadialField {
    pub fn zeros(grid: &GridSpec, space: Space) -> Self {
        RadialField { grid: grid.clone(), space, scale: 1.0, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_values(grid: &GridSpec, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(DnlsError::GridMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(RadialField { grid: grid.clone(), space, scale: 1.0, values })
    }

    pub fn from_fn(grid: &GridSpec, space: Space, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.axis(space).nodes.iter().map(|&x| f(x)).collect();
        RadialField { grid: grid.clone(), space, scale: 1.0, values }
    }

    pub fn from_real_fn(grid: &GridSpec, space: Space, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, space, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> u8 {
        self.grid.dim()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Undilated nodes of the underlying axis.
    pub fn base_nodes(&self) -> &[f64] {
        &self.grid.axis(self.space).nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.scale * self.grid.axis(self.space).nodes[j]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.scale.powi(self.dim() as i32) * self.grid.axis(self.space).weights[j]
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.base_nodes().iter().map(|x| x * self.scale).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        let s = self.scale.powi(self.dim() as i32);
        self.grid.axis(self.space).weights.iter().map(|w| w * s).collect()
    }

    /// Same samples relabelled onto the axis dilated by `factor`.
    pub fn dilated(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    /// A field with the same grid/space/scale and new values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        RadialField { grid: self.grid.clone(), space: self.space, scale: self.scale, values }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let s = self.scale;
        let values = self.base_nodes().iter().zip(&self.values).map(|(&x, &v)| f(s * x, v)).collect();
        self.with_values(values)
    }

    pub fn compatible(&self, other: &RadialField) -> Result<()> {
        if self.space != other.space || self.grid != other.grid || self.scale != other.scale {
            return Err(DnlsError::GridMismatch(format!(
                "{:?}/N={}/scale={} vs {:?}/N={}/scale={}",
                self.space,
                self.len(),
                self.scale,
                other.space,
                other.len(),
                other.scale
            )));
        }
        Ok(())
    }

    pub fn require_unscaled(&self, what: &str) -> Result<()> {
        if self.scale != 1.0 {
            return Err(DnlsError::GridMismatch(format!("{what} needs an undilated field (scale = {})", self.scale)));
        }
        Ok(())
    }

    pub fn require_space(&self, space: Space, what: &str) -> Result<()> {
        if self.space != space {
            return Err(DnlsError::GridMismatch(format!(
                "{what} expects a {space:?}-space field, got {:?}",
                self.space
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.with_values(self.values.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &RadialField) -> Result<Self> {
        self.compatible(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &RadialField) -> Result<Self> {
        self.compatible(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect()))
    }

    /// `self += c·other`.
    pub fn axpy(&mut self, c: Complex64, other: &RadialField) -> Result<()> {
        self.compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn conj(&self) -> Self {
        self.with_values(self.values.iter().map(|v| v.conj()).collect())
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `‖f‖²`.
    pub fn mass(&self) -> f64 {
        let s = self.scale.powi(self.dim() as i32);
        let w = &self.grid.axis(self.space).weights;
        s * w.iter().zip(&self.values).map(|(w, v)| w * v.norm_sqr()).sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// `(Σ w_j |f_j|^q)^{1/q}`, or the max norm for `q = ∞`.
pub fn lq_norm(f: &RadialField, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(DnlsError::Domain { function: "lq_norm", value: q, reason: "exponent must satisfy q >= 1" });
    }
    if q.is_infinite() {
        return Ok(f.sup_norm());
    }
    if q == 2.0 {
        return Ok(f.l2_norm());
    }
    let s = f.scale.powi(f.dim() as i32);
    let w = &f.grid.axis(f.space).weights;
    let sum: f64 = w.iter().zip(&f.values).map(|(w, v)| w * v.norm().powf(q)).sum();
    Ok((s * sum).powf(1.0 / q))
}

/// `‖f‖_q^q = Σ w_j |f_j|^q` for any `q > 0` (a quasi-norm power below 1).
pub fn lq_power(f: &RadialField, q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(DnlsError::Domain {
            function: "lq_power",
            value: q,
            reason: "exponent must be positive and finite",
        });
    }
    let s = f.scale.powi(f.dim() as i32);
    let w = &f.grid.axis(f.space).weights;
    Ok(s * w.iter().zip(&f.values).map(|(w, v)| w * v.norm().powf(q)).sum::<f64>())
}

/// `⟨f, g⟩ = Σ w_j conj(f_j) g_j`.
pub fn inner_product(f: &RadialField, g: &RadialField) -> Result<Complex64> {
    f.compatible(g)?;
    let s = f.scale.powi(f.dim() as i32);
    let w = &f.grid.axis(f.space).weights;
    let sum: Complex64 = w.iter().zip(f.values.iter().zip(&g.values)).map(|(w, (a, b))| a.conj() * b * *w).sum();
    Ok(sum * s)
}

/// A random smooth radial profile: three shells
/// `c (e^{-(x-μ)²/2σ²} + e^{-(x+μ)²/2σ²})` (even in `x`, hence smooth at the
/// origin) with `σ ≈ width`, centres `μ ∈ [0, 3 width]` and complex
/// amplitudes.
pub fn random_smooth_field<R: Rng + ?Sized>(grid: &GridSpec, space: Space, rng: &mut R, width: f64) -> RadialField {
    let shells: Vec<(Complex64, f64, f64)> = (0..3)
        .map(|_| {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (c, rng.gen_range(0.0..3.0) * width, rng.gen_range(0.7..1.3) * width)
        })
        .collect();
    RadialField::from_fn(grid, space, |x| {
        shells
            .iter()
            .map(|&(c, mu, sigma)| {
                let s2 = 2.0 * sigma * sigma;
                c * ((-(x - mu).powi(2) / s2).exp() + (-(x + mu).powi(2) / s2).exp())
            })
            .sum()
    })
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes (shape
/// preserving, no overshoot).
#[derive(Debug, Clone)]
pub struct MonotoneCubic<'a> {
    x: &'a [f64],
    y: Vec<f64>,
    d: Vec<f64>,
}

impl<'a> MonotoneCubic<'a> {
    pub fn new(x: &'a [f64], y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "monotone cubic needs matching arrays of length >= 2");
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                // weighted harmonic mean (Fritsch–Butland form)
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = end_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
        d[n - 1] = end_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );
        MonotoneCubic { x, y, d }
    }

    /// Value at `t`; constant extension below the first node, `outside`
    /// above the last.
    pub fn eval(&self, t: f64, outside: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t > self.x[n - 1] {
            return outside;
        }
        let i = (self.x.partition_point(|&v| v <= t)).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// Three-point end slope, limited to keep monotonicity.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Resamples a complex profile given at `x` onto the points `targets`
/// (real and imaginary parts separately); zero beyond the last node.
pub fn resample(x: &[f64], values: &[Complex64], targets: &[f64]) -> Vec<Complex64> {
    let re = MonotoneCubic::new(x, values.iter().map(|v| v.re).collect());
    let im = MonotoneCubic::new(x, values.iter().map(|v| v.im).collect());
    targets.iter().map(|&t| Complex64::new(re.eval(t, 0.0), im.eval(t, 0.0))).collect()
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"DNLS";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Writes `{magic, version, n, space, N, R_max, K_max}` followed by the
/// samples as little-endian `(re, im)` pairs.
pub fn write_snapshot<W: Write>(mut out: W, field: &RadialField) -> Result<()> {
    field.require_unscaled("snapshot")?;
    let g = field.grid();
    let mut buf = Vec::with_capacity(34 + 16 * field.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.push(g.dim());
    buf.push(field.space().code());
    buf.extend_from_slice(&(g.len() as u64).to_le_bytes());
    buf.extend_from_slice(&g.r_max().to_le_bytes());
    buf.extend_from_slice(&g.k_max().to_le_bytes());
    for v in &field.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Header of a snapshot file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub n: u8,
    pub space: Space,
    pub size: usize,
    pub r_max: f64,
    pub k_max: f64,
}

impl SnapshotHeader {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.n, self.size, self.r_max, self.k_max)
    }
}

fn read_array<const L: usize, R: Read>(input: &mut R) -> Result<[u8; L]> {
    let mut b = [0u8; L];
    input.read_exact(&mut b).map_err(|e| DnlsError::Format(format!("truncated snapshot: {e}")))?;
    Ok(b)
}

pub fn read_snapshot_header<R: Read>(input: &mut R) -> Result<SnapshotHeader> {
    let magic: [u8; 4] = read_array(input)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(DnlsError::Format("bad magic (expected \"DNLS\")".into()));
    }
    let version = u32::from_le_bytes(read_array(input)?);
    if version != SNAPSHOT_VERSION {
        return Err(DnlsError::Format(format!("unsupported snapshot version {version}")));
    }
    let [n] = read_array::<1, _>(input)?;
    let [space] = read_array::<1, _>(input)?;
    let size = u64::from_le_bytes(read_array(input)?) as usize;
    let r_max = f64::from_le_bytes(read_array(input)?);
    let k_max = f64::from_le_bytes(read_array(input)?);
    Ok(SnapshotHeader { version, n, space: Space::from_code(space)?, size, r_max, k_max })
}

/// Reads a snapshot; the grid is rebuilt from the header unless a matching
/// `grid` is supplied (then that instance is shared).
pub fn read_snapshot<R: Read>(mut input: R, grid: Option<&GridSpec>) -> Result<RadialField> {
    let header = read_snapshot_header(&mut input)?;
    let grid = match grid {
        Some(g) => {
            let expected = (g.dim(), g.len(), g.r_max(), g.k_max());
            if expected != (header.n, header.size, header.r_max, header.k_max) {
                return Err(DnlsError::GridMismatch(format!(
                    "snapshot header (n={}, N={}, R_max={}, K_max={}) vs grid (n={}, N={}, R_max={}, K_max={})",
                    header.n, header.size, header.r_max, header.k_max, expected.0, expected.1, expected.2, expected.3
                )));
            }
            g.clone()
        }
        None => header.grid()?,
    };
    let mut raw = vec![0u8; 16 * header.size];
    input.read_exact(&mut raw).map_err(|e| DnlsError::Format(format!("truncated snapshot payload: {e}")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    RadialField::from_values(&grid, header.space, values)
}
