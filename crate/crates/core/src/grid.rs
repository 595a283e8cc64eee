//! Uniform periodic grids, discrete Fourier transforms and the exact
//! linear propagator `u ↦ F⁻¹[exp(−τ ν λ) F[u]]`.
//!
//! Wavenumbers follow the FFT slot convention `0, 1, …, N/2−1, N/2, −N/2+1, …, −1`.
//! The Nyquist slot carries `|p| = N/2` in the Laplacian symbol (the multiplier is
//! even in `p`) and is zeroed by first-derivative operators.
//!
//! Transforms are unnormalized forward, `1/N^dim` inverse. Nodal values are stored
//! row-major: for `dim = 2` the node `(i, j)` at `(x_i, y_j)` lives at `i * N + j`.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a field represents real or complex data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Complex,
}

/// An immutable periodic grid with a precomputed Laplacian symbol table.
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    length: f64,
    origin: f64,
    /// `λ` per flattened Fourier slot.
    symbols: Vec<f64>,
    /// `2πp/L` per axis slot, Nyquist zeroed.
    derivative_wavenumbers: Vec<f64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("length", &self.length)
            .field("origin", &self.origin)
            .finish()
    }
}

/// Builds a grid on `[0, length)^dim`.
pub fn make_grid(dim: usize, n: usize, length: f64) -> Result<Arc<SpectralGrid>> {
    SpectralGrid::new(dim, n, length, 0.0).map(Arc::new)
}

/// Signed wavenumber stored in FFT slot `k`. The Nyquist slot maps to `-N/2`.
pub fn slot_wavenumber(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

impl SpectralGrid {
    /// Builds a grid on `[origin, origin + length)^dim`.
    pub fn new(dim: usize, n: usize, length: f64, origin: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n must be even and >= 2, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let base = 2.0 * std::f64::consts::PI / length;
        let axis_sq: Vec<f64> = (0..n)
            .map(|k| {
                let p = slot_wavenumber(k, n) as f64 * base;
                p * p
            })
            .collect();
        let symbols = if dim == 1 {
            axis_sq.clone()
        } else {
            let mut s = Vec::with_capacity(n * n);
            for &px in &axis_sq {
                for &qy in &axis_sq {
                    s.push(px + qy);
                }
            }
            s
        };
        let derivative_wavenumbers = (0..n)
            .map(|k| {
                if k == n / 2 {
                    0.0
                } else {
                    slot_wavenumber(k, n) as f64 * base
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            n,
            length,
            origin,
            symbols,
            derivative_wavenumbers,
            fft_forward: planner.plan_fft_forward(n),
            fft_inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Grid spacing `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total number of nodes, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Domain measure `L^dim`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Quadrature weight of one node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    /// Nodal coordinates of flat index `idx` (second entry is 0 in 1-D).
    pub fn node(&self, idx: usize) -> (f64, f64) {
        if self.dim == 1 {
            (self.coordinate(idx), 0.0)
        } else {
            (self.coordinate(idx / self.n), self.coordinate(idx % self.n))
        }
    }

    /// Laplacian symbol table indexed by flattened Fourier slot.
    pub fn symbols(&self) -> &[f64] {
        &self.symbols
    }

    /// `λ = (2pπ/L)² + (2qπ/L)²` for signed wavenumbers `p`, `q` with `|p|, |q| ≤ N/2`.
    /// In 1-D `q` must be zero.
    pub fn laplacian_symbol(&self, p: i64, q: i64) -> Result<f64> {
        let half = (self.n / 2) as i64;
        let in_range = |k: i64| -half <= k && k <= half;
        if !in_range(p) || !in_range(q) || (self.dim == 1 && q != 0) {
            return Err(Error::IndexOutOfRange { p, q, n: self.n });
        }
        let base = 2.0 * std::f64::consts::PI / self.length;
        let (kp, kq) = (p as f64 * base, q as f64 * base);
        Ok(kp * kp + kq * kq)
    }

    /// Same geometry (dimension, resolution, extent).
    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.n == other.n
                && self.length == other.length
                && self.origin == other.origin)
    }

    fn check(&self, other: &SpectralGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// In-place unnormalized forward DFT.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fft_forward);
    }

    /// In-place inverse DFT including the `1/N^dim` factor.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fft_inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.n;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Rows (contiguous axis).
        fft.process_with_scratch(data, &mut scratch);
        if self.dim == 2 {
            transpose_square(data, n);
            fft.process_with_scratch(data, &mut scratch);
            transpose_square(data, n);
        }
    }

    /// Multiplies first-derivative wavenumber `i·k` along `axis` in spectral space.
    fn derivative_multiplier(&self, slot: usize, axis: usize) -> f64 {
        let k = if self.dim == 1 {
            slot
        } else if axis == 0 {
            slot / self.n
        } else {
            slot % self.n
        };
        self.derivative_wavenumbers[k]
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Nodal samples on a [`SpectralGrid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    values: Vec<Complex64>,
    kind: ScalarKind,
}

impl Field {
    pub fn zeros(grid: &Arc<SpectralGrid>, kind: ScalarKind) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![Complex64::default(); grid.len()],
            kind,
        }
    }

    pub fn from_complex(grid: &Arc<SpectralGrid>, values: Vec<Complex64>, kind: ScalarKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let mut f = Self {
            grid: Arc::clone(grid),
            values,
            kind,
        };
        if kind == ScalarKind::Real {
            f.project_real();
        }
        Ok(f)
    }

    pub fn from_real(grid: &Arc<SpectralGrid>, values: &[f64]) -> Result<Self> {
        Self::from_complex(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            ScalarKind::Real,
        )
    }

    /// Samples a real function at every node.
    pub fn from_fn_real(grid: &Arc<SpectralGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.node(i);
                Complex64::new(f(x, y), 0.0)
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
            kind: ScalarKind::Real,
        }
    }

    /// Samples a complex function at every node.
    pub fn from_fn_complex(grid: &Arc<SpectralGrid>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.node(i);
                f(x, y)
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
            kind: ScalarKind::Complex,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Real parts of all nodal values.
    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Drops imaginary parts and marks the field real.
    pub fn project_real(&mut self) {
        self.values.iter_mut().for_each(|v| v.im = 0.0);
        self.kind = ScalarKind::Real;
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Applies `f` to every nodal value, keeping the scalar kind.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        if out.kind == ScalarKind::Real {
            out.project_real();
        }
        out
    }

    /// Applies a real pointwise map to the real parts.
    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|v| Complex64::new(f(v.re), 0.0)).collect();
        Self {
            grid: Arc::clone(&self.grid),
            values,
            kind: ScalarKind::Real,
        }
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        self.grid.check(&other.grid)
    }

    /// Forward spectrum (unnormalized).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        self.grid.forward_in_place(&mut data);
        data
    }

    /// Builds a field from spectral coefficients via the inverse transform.
    pub fn from_spectrum(grid: &Arc<SpectralGrid>, mut spectrum: Vec<Complex64>, kind: ScalarKind) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::GridMismatch("spectrum length".into()));
        }
        grid.inverse_in_place(&mut spectrum);
        Self::from_complex(grid, spectrum, kind)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &Field) -> Result<()> {
        self.ensure_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        if other.kind == ScalarKind::Complex || alpha.im != 0.0 {
            self.kind = ScalarKind::Complex;
        }
        Ok(())
    }

    /// `self - other`.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        let mut d = self.clone();
        d.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(d)
    }

    /// Discrete `L^∞` norm.
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete `L²` norm `sqrt(h^dim Σ|v|²)`.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Rectangle-rule integral `h^dim Σ v`.
    pub fn integral(&self) -> Complex64 {
        self.grid.cell_volume() * self.values.iter().sum::<Complex64>()
    }

    /// Grid mean `Σ v / N^dim`.
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self) -> Field {
        let mut spec = self.spectrum();
        for (c, &lam) in spec.iter_mut().zip(self.grid.symbols()) {
            *c *= -lam;
        }
        self.grid.inverse_in_place(&mut spec);
        let mut out = Field {
            grid: Arc::clone(&self.grid),
            values: spec,
            kind: self.kind,
        };
        if out.kind == ScalarKind::Real {
            out.project_real();
        }
        out
    }

    /// Spectral partial derivative along `axis` with the Nyquist mode zeroed.
    pub fn derivative(&self, axis: usize) -> Field {
        assert!(axis < self.grid.dim(), "axis out of range");
        let mut spec = self.spectrum();
        for (slot, c) in spec.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, self.grid.derivative_multiplier(slot, axis));
        }
        self.grid.inverse_in_place(&mut spec);
        let mut out = Field {
            grid: Arc::clone(&self.grid),
            values: spec,
            kind: self.kind,
        };
        if out.kind == ScalarKind::Real {
            out.project_real();
        }
        out
    }

    /// Writes little-endian `f64` values (interleaved re/im for complex fields) to
    /// `path` and a JSON sidecar to `path` with extension `.json`.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            if self.kind == ScalarKind::Complex {
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        let meta = FieldMeta {
            dim: self.grid.dim,
            n: self.grid.n,
            length: self.grid.length,
            scalar_kind: self.kind,
            origin: self.grid.origin,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a field written by [`Field::write_binary`].
    pub fn read_binary(path: impl AsRef<Path>) -> Result<Field> {
        let path = path.as_ref();
        let meta: FieldMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let grid = Arc::new(SpectralGrid::new(meta.dim, meta.n, meta.length, meta.origin)?);
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        let per = if meta.scalar_kind == ScalarKind::Complex { 2 } else { 1 };
        if bytes.len() != grid.len() * per * 8 {
            return Err(Error::GridMismatch(format!(
                "binary payload has {} bytes, sidecar implies {}",
                bytes.len(),
                grid.len() * per * 8
            )));
        }
        let floats: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let values = if per == 2 {
            floats.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
        } else {
            floats.iter().map(|&v| Complex64::new(v, 0.0)).collect()
        };
        Field::from_complex(&grid, values, meta.scalar_kind)
    }

    /// Writes `x[,y],value` rows (or `re,im` columns for complex fields).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let coords = if self.grid.dim == 1 { "x" } else { "x,y" };
        match self.kind {
            ScalarKind::Real => writeln!(w, "{coords},value")?,
            ScalarKind::Complex => writeln!(w, "{coords},re,im")?,
        }
        for (i, v) in self.values.iter().enumerate() {
            let (x, y) = self.grid.node(i);
            if self.grid.dim == 1 {
                write!(w, "{x}")?;
            } else {
                write!(w, "{x},{y}")?;
            }
            match self.kind {
                ScalarKind::Real => writeln!(w, ",{}", v.re)?,
                ScalarKind::Complex => writeln!(w, ",{},{}", v.re, v.im)?,
            }
        }
        Ok(())
    }
}

/// JSON sidecar for the binary field format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub scalar_kind: ScalarKind,
    #[serde(default)]
    pub origin: f64,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Exact linear flow `exp(−τ ν λ)` in Fourier space.
///
/// Heat `u_t = ε²Δu` uses `ν = ε²`; the Schrödinger part `u_t = iεΔu` uses `ν = iε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPropagator {
    pub nu: Complex64,
    pub allow_backward: bool,
}

impl LinearPropagator {
    pub fn new(nu: Complex64) -> Self {
        Self {
            nu,
            allow_backward: false,
        }
    }

    pub fn with_backward(mut self, allow: bool) -> Self {
        self.allow_backward = allow;
        self
    }

    pub fn apply(&self, field: &Field, tau: f64) -> Result<Field> {
        if tau < 0.0 && self.nu.re > 0.0 && !self.allow_backward {
            return Err(Error::BackwardStep { tau });
        }
        if tau == 0.0 {
            return Ok(field.clone());
        }
        let grid = field.grid();
        let mut spec = field.spectrum();
        let rate = -tau * self.nu;
        for (c, &lam) in spec.iter_mut().zip(grid.symbols()) {
            if lam != 0.0 {
                *c *= (rate * lam).exp();
            }
        }
        grid.inverse_in_place(&mut spec);
        let kind = if field.kind() == ScalarKind::Real && self.nu.im == 0.0 {
            ScalarKind::Real
        } else {
            ScalarKind::Complex
        };
        Field::from_complex(grid, spec, kind)
    }
}

/// Forward-in-time linear propagation; rejects `τ < 0` for dissipative `ν`.
pub fn linear_propagate(field: &Field, nu: Complex64, tau: f64) -> Result<Field> {
    LinearPropagator::new(nu).apply(field, tau)
}
