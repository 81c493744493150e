//! Periodic uniform grids and the pseudospectral calculus built on them.
//!
//! A [`Grid`] discretizes the box `[-L_k/2, L_k/2)` along each axis with
//! `n_k` points (a power of two, at least 8). Values are stored row-major,
//! axis 0 slowest. All transforms are unitary: the forward and inverse DFT
//! both carry a `1/sqrt(N)` factor, so Parseval holds without extra weights.
//!
//! First derivatives use the *effective* wavenumber, which equals the raw
//! wavenumber `2*pi*m/L` except on the Nyquist index of an axis, where it is
//! zero; this keeps `d/dx` of real data real and skew-adjoint. The Laplacian
//! and every `|k|^2` symbol use the raw wavenumber instead. Zeroing the
//! Nyquist entry there as well would make a whole hyperplane of grid-scale
//! modes cost no kinetic energy in d >= 2, and minimizers readily fill it.
//! Consequently `div(grad f) == laplacian(f)` holds exactly only for fields
//! without Nyquist content.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

struct GridInner {
    n: Vec<usize>,
    extent: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
    /// Raw wavenumbers per axis in FFT output order.
    raw_axis_k: Vec<Vec<f64>>,
    /// Effective (Nyquist-zeroed) wavenumbers per axis.
    axis_k: Vec<Vec<f64>>,
    /// Effective wavevector for every flat spectral index.
    kvec: Vec<[f64; MAX_DIM]>,
    /// Raw wavevector for every flat spectral index.
    raw_kvec: Vec<[f64; MAX_DIM]>,
    /// `|k|^2` with the raw wavevector.
    k2: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

/// A periodic uniform grid in 1, 2 or 3 dimensions.
///
/// Cloning is cheap; clones share FFT plans and precomputed wavenumbers.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("extent", &self.inner.extent)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.extent == other.inner.extent)
    }
}

/// Default box length per axis for a given dimension.
pub fn default_extent(dim: usize) -> f64 {
    match dim {
        1 => 40.0,
        2 => 30.0,
        _ => 20.0,
    }
}

fn axis_wavenumbers(n: usize, extent: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let signed = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
            2.0 * PI * signed / extent
        })
        .collect()
}

impl Grid {
    /// Builds a grid from per-axis point counts and box lengths.
    pub fn new(n: &[usize], extent: &[f64]) -> Result<Self> {
        let dim = n.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if extent.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} extents given for {} axes",
                extent.len(),
                dim
            )));
        }
        for (&nk, &lk) in n.iter().zip(extent) {
            if nk < 8 || !nk.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be a power of two >= 8, got {nk}"
                )));
            }
            if !(lk.is_finite() && lk > 0.0) {
                return Err(Error::InvalidGrid(format!("extent must be positive, got {lk}")));
            }
        }

        let len: usize = n.iter().product();
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * n[k + 1];
        }
        let spacing: Vec<f64> = n.iter().zip(extent).map(|(&nk, &lk)| lk / nk as f64).collect();
        let raw_axis_k: Vec<Vec<f64>> =
            n.iter().zip(extent).map(|(&nk, &lk)| axis_wavenumbers(nk, lk)).collect();
        let axis_k: Vec<Vec<f64>> = raw_axis_k
            .iter()
            .zip(n)
            .map(|(ks, &nk)| {
                let mut ks = ks.clone();
                ks[nk / 2] = 0.0;
                ks
            })
            .collect();

        let mut kvec = Vec::with_capacity(len);
        let mut raw_kvec = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        for idx in 0..len {
            let mut kv = [0.0; MAX_DIM];
            let mut rv = [0.0; MAX_DIM];
            let mut rem = idx;
            for k in 0..dim {
                let m = rem / strides[k];
                rem %= strides[k];
                kv[k] = axis_k[k][m];
                rv[k] = raw_axis_k[k][m];
            }
            k2.push(rv.iter().map(|v| v * v).sum());
            kvec.push(kv);
            raw_kvec.push(rv);
        }

        let mut planner = FftPlanner::new();
        let forward = n.iter().map(|&nk| planner.plan_fft_forward(nk)).collect();
        let inverse = n.iter().map(|&nk| planner.plan_fft_inverse(nk)).collect();

        Ok(Grid {
            inner: Arc::new(GridInner {
                n: n.to_vec(),
                extent: extent.to_vec(),
                spacing,
                strides,
                len,
                raw_axis_k,
                axis_k,
                kvec,
                raw_kvec,
                k2,
                forward,
                inverse,
            }),
        })
    }

    /// Same point count and box length on every axis.
    pub fn uniform(dim: usize, n: usize, extent: f64) -> Result<Self> {
        Self::new(&vec![n; dim], &vec![extent; dim])
    }

    pub fn dim(&self) -> usize {
        self.inner.n.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.n
    }

    pub fn extent(&self) -> &[f64] {
        &self.inner.extent
    }

    pub fn spacing(&self) -> &[f64] {
        &self.inner.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.inner.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    /// Quadrature weight of the rectangle rule, `prod_k spacing_k`.
    pub fn cell_volume(&self) -> f64 {
        self.inner.spacing.iter().product()
    }

    pub fn strides(&self) -> &[usize] {
        &self.inner.strides
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut rem = idx;
        for (k, &s) in self.inner.strides.iter().enumerate() {
            out[k] = rem / s;
            rem %= s;
        }
        out
    }

    /// Physical coordinates of a flat index (unused axes are zero).
    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            x[k] = -0.5 * self.inner.extent[k] + mi[k] as f64 * self.inner.spacing[k];
        }
        x
    }

    /// Coordinates along one axis.
    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        let (l, h) = (self.inner.extent[axis], self.inner.spacing[axis]);
        (0..self.inner.n[axis]).map(|i| -0.5 * l + i as f64 * h).collect()
    }

    /// Effective wavenumbers along an axis (Nyquist entry is zero).
    pub fn axis_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.axis_k[axis]
    }

    /// Raw wavenumbers `2*pi*m/L`, `m` in `[-n/2, n/2)`, in FFT order.
    pub fn raw_axis_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.raw_axis_k[axis]
    }

    /// Effective wavevector at a flat spectral index.
    pub fn wavevector(&self, idx: usize) -> &[f64] {
        &self.inner.kvec[idx][..self.dim()]
    }

    pub fn raw_wavevector(&self, idx: usize) -> &[f64] {
        &self.inner.raw_kvec[idx][..self.dim()]
    }

    /// `|k|^2` with the raw wavevector.
    pub fn k_squared(&self, idx: usize) -> f64 {
        self.inner.k2[idx]
    }

    /// Largest resolvable wavenumber magnitude along an axis.
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI * self.inner.n[axis] as f64 / self.inner.extent[axis]
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim() {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim() });
        }
        Ok(())
    }

    /// In-place unitary N-dimensional DFT.
    pub fn transform_in_place(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len(), "buffer length does not match grid");
        let inner = &*self.inner;
        for axis in 0..self.dim() {
            let n = inner.n[axis];
            let stride = inner.strides[axis];
            let plan = if inverse { &inner.inverse[axis] } else { &inner.forward[axis] };
            let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
            } else {
                let mut line = vec![ZERO; n];
                let block = n * stride;
                for base in (0..inner.len).step_by(block) {
                    for offset in 0..stride {
                        let start = base + offset;
                        for (i, v) in line.iter_mut().enumerate() {
                            *v = data[start + i * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for (i, v) in line.iter().enumerate() {
                            data[start + i * stride] = *v;
                        }
                    }
                }
            }
        }
        let norm = 1.0 / (inner.len as f64).sqrt();
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// A complex scalar function sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<Complex64>,
}

/// Unitary Fourier coefficients of a [`ScalarField`], in FFT index order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![ZERO; grid.len()] }
    }

    pub fn constant(grid: &Grid, value: Complex64) -> Self {
        ScalarField { grid: grid.clone(), values: vec![value; grid.len()] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..d])).collect();
        ScalarField { grid: grid.clone(), values }
    }

    /// Wraps raw samples, checking their count and finiteness.
    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ValueCount { expected: grid.len(), actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn forward(&self) -> Spectrum {
        let mut coeffs = self.values.clone();
        self.grid.transform_in_place(&mut coeffs, false);
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    /// Spectral partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> Result<ScalarField> {
        self.grid.check_axis(axis)?;
        Ok(self.forward().partial(axis).inverse())
    }

    pub fn gradient(&self) -> VectorField {
        let spec = self.forward();
        let comps = (0..self.grid.dim()).map(|k| spec.partial(k).inverse()).collect();
        VectorField { comps }
    }

    pub fn laplacian(&self) -> ScalarField {
        self.forward().laplacian().inverse()
    }

    /// Pointwise multiplication in frequency by `m`, evaluated at the
    /// effective wavevector of each mode.
    pub fn apply_multiplier(
        &self,
        m: impl Fn(&[f64]) -> Complex64,
    ) -> Result<ScalarField> {
        Ok(self.forward().apply_multiplier(m)?.inverse())
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: Complex64) -> ScalarField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn conj(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: Complex64, x: &ScalarField) -> Result<()> {
        check_same(&self.grid, &x.grid)?;
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        check_same(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    /// `(f, g)_{L^2} = sum f conj(g) dV`.
    pub fn inner_l2(&self, other: &ScalarField) -> Result<Complex64> {
        check_same(&self.grid, &other.grid)?;
        let s: Complex64 =
            self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn norm_l2_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sqr().sqrt()
    }

    /// `||grad f||^2`, evaluated spectrally.
    pub fn gradient_norm_sqr(&self) -> f64 {
        self.forward().gradient_norm_sqr()
    }

    pub fn norm_h1(&self) -> f64 {
        (self.norm_l2_sqr() + self.gradient_norm_sqr()).sqrt()
    }
}

impl Spectrum {
    pub fn zeros(grid: &Grid) -> Self {
        Spectrum { grid: grid.clone(), coeffs: vec![ZERO; grid.len()] }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::ValueCount { expected: grid.len(), actual: coeffs.len() });
        }
        Ok(Spectrum { grid: grid.clone(), coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn inverse(&self) -> ScalarField {
        let mut values = self.coeffs.clone();
        self.grid.transform_in_place(&mut values, true);
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn into_field(mut self) -> ScalarField {
        self.grid.transform_in_place(&mut self.coeffs, true);
        ScalarField { grid: self.grid, values: self.coeffs }
    }

    /// Multiplication by `i k_axis` (Nyquist coefficient zeroed).
    pub fn partial(&self, axis: usize) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::new(0.0, self.grid.inner.kvec[i][axis]))
            .collect();
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    pub fn laplacian(&self) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&self.grid.inner.k2)
            .map(|(c, k2)| c * (-k2))
            .collect();
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    /// Pointwise multiplication by `m(k)`; fails if `m` is not finite at
    /// some grid wavevector.
    pub fn apply_multiplier(&self, m: impl Fn(&[f64]) -> Complex64) -> Result<Spectrum> {
        let d = self.grid.dim();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (i, c) in self.coeffs.iter().enumerate() {
            let mv = m(&self.grid.inner.kvec[i][..d]);
            if !(mv.re.is_finite() && mv.im.is_finite()) {
                return Err(Error::NonFiniteMultiplier { index: i });
            }
            coeffs.push(c * mv);
        }
        Ok(Spectrum { grid: self.grid.clone(), coeffs })
    }

    /// Multiplies in place by a real symbol given per flat index.
    pub fn scale_by(&mut self, symbol: &[f64]) {
        for (c, s) in self.coeffs.iter_mut().zip(symbol) {
            *c *= *s;
        }
    }

    /// Translation `f(x - y)` realized as the phase `exp(-i k.y)` with the
    /// raw wavevector, exact for grid-aligned shifts.
    pub fn translate(&self, y: &[f64]) -> Spectrum {
        let d = self.grid.dim();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = &self.grid.inner.raw_kvec[i];
                let phase: f64 = (0..d).map(|a| k[a] * y[a]).sum();
                c * Complex64::from_polar(1.0, -phase)
            })
            .collect();
        Spectrum { grid: self.grid.clone(), coeffs }
    }

    /// Zeroes every mode with `|m_k| > n_k/3` on some axis.
    pub fn dealias_two_thirds(&mut self) {
        let g = self.grid.clone();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let mi = g.multi_index(i);
            let cut = (0..g.dim()).any(|k| {
                let n = g.shape()[k];
                let m = if mi[k] < n / 2 { mi[k] } else { n - mi[k] };
                3 * m > n
            });
            if cut {
                *c = ZERO;
            }
        }
    }

    /// `sum |c|^2 dV`, equal to the physical-space L2 norm squared.
    pub fn norm_l2_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `sum |k|^2 |c|^2 dV` with the raw wavenumber, i.e. `-(f, Lap f)`.
    pub fn gradient_norm_sqr(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.grid.inner.k2)
            .map(|(c, k2)| k2 * c.norm_sqr())
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// `sum k_axis |c|^2 dV` with the effective wavenumber.
    pub fn first_moment(&self, axis: usize) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.grid.inner.kvec)
            .map(|(c, k)| k[axis] * c.norm_sqr())
            .sum::<f64>()
            * self.grid.cell_volume()
    }
}

/// A `C^d`-valued function: exactly `d` scalar components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField { comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect() }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| Error::InvalidInput("vector field needs components".into()))?;
        let grid = first.grid().clone();
        if comps.len() != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "vector field on a {}-d grid needs {} components, got {}",
                grid.dim(),
                grid.dim(),
                comps.len()
            )));
        }
        for c in &comps {
            check_same(&grid, c.grid())?;
        }
        Ok(VectorField { comps })
    }

    /// Field with `f` in polarization `axis` and zeros elsewhere.
    pub fn polarized(f: ScalarField, axis: usize) -> Result<Self> {
        let grid = f.grid().clone();
        grid.check_axis(axis)?;
        let mut out = VectorField::zeros(&grid);
        out.comps[axis] = f;
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.comps
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.comps[k]
    }

    /// `div v = sum_k d_k v^(k)`.
    pub fn divergence(&self) -> Result<ScalarField> {
        let grid = self.grid().clone();
        let mut acc = Spectrum::zeros(&grid);
        for (k, c) in self.comps.iter().enumerate() {
            check_same(&grid, c.grid())?;
            let dk = c.forward().partial(k);
            for (a, b) in acc.coeffs.iter_mut().zip(&dk.coeffs) {
                *a += b;
            }
        }
        Ok(acc.into_field())
    }

    pub fn laplacian(&self) -> VectorField {
        VectorField { comps: self.comps.iter().map(|c| c.laplacian()).collect() }
    }

    /// Pointwise `u . conj(v) = sum_k u^(k) conj(v^(k))`.
    pub fn dot_conj(&self, other: &VectorField) -> Result<ScalarField> {
        check_same(self.grid(), other.grid())?;
        let grid = self.grid();
        let mut values = vec![ZERO; grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for (v, (x, y)) in values.iter_mut().zip(a.values.iter().zip(&b.values)) {
                *v += x * y.conj();
            }
        }
        Ok(ScalarField::from_values_unchecked(grid, values))
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, s: &ScalarField) -> Result<VectorField> {
        let comps = self.comps.iter().map(|c| c.mul(s)).collect::<Result<Vec<_>>>()?;
        Ok(VectorField { comps })
    }

    pub fn scale(&mut self, a: Complex64) {
        for c in &mut self.comps {
            c.scale(a);
        }
    }

    pub fn axpy(&mut self, a: Complex64, x: &VectorField) -> Result<()> {
        for (s, v) in self.comps.iter_mut().zip(&x.comps) {
            s.axpy(a, v)?;
        }
        Ok(())
    }

    pub fn conj(&self) -> VectorField {
        VectorField { comps: self.comps.iter().map(|c| c.conj()).collect() }
    }

    pub fn inner_l2(&self, other: &VectorField) -> Result<Complex64> {
        let mut s = ZERO;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            s += a.inner_l2(b)?;
        }
        Ok(s)
    }

    pub fn norm_l2_sqr(&self) -> f64 {
        self.comps.iter().map(|c| c.norm_l2_sqr()).sum()
    }

    /// `||grad v||^2 = sum_l sum_k ||d_l v^(k)||^2`.
    pub fn gradient_norm_sqr(&self) -> f64 {
        self.comps.iter().map(|c| c.gradient_norm_sqr()).sum()
    }

    pub fn norm_h1_sqr(&self) -> f64 {
        self.norm_l2_sqr() + self.gradient_norm_sqr()
    }
}

/// The unknown `U = (u1, u2, u3)`: three vector fields on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    fields: [VectorField; 3],
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        State { fields: [VectorField::zeros(grid), VectorField::zeros(grid), VectorField::zeros(grid)] }
    }

    pub fn new(u1: VectorField, u2: VectorField, u3: VectorField) -> Result<Self> {
        check_same(u1.grid(), u2.grid())?;
        check_same(u1.grid(), u3.grid())?;
        Ok(State { fields: [u1, u2, u3] })
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn u1(&self) -> &VectorField {
        &self.fields[0]
    }

    pub fn u2(&self) -> &VectorField {
        &self.fields[1]
    }

    pub fn u3(&self) -> &VectorField {
        &self.fields[2]
    }

    /// Field `j` in `0..3`.
    pub fn field(&self, j: usize) -> &VectorField {
        &self.fields[j]
    }

    pub fn field_mut(&mut self, j: usize) -> &mut VectorField {
        &mut self.fields[j]
    }

    pub fn fields(&self) -> &[VectorField; 3] {
        &self.fields
    }

    /// All `3d` scalar components in storage order
    /// `u1^(1..d), u2^(1..d), u3^(1..d)`.
    pub fn scalars(&self) -> impl Iterator<Item = &ScalarField> {
        self.fields.iter().flat_map(|f| f.comps.iter())
    }

    pub fn scalars_mut(&mut self) -> impl Iterator<Item = &mut ScalarField> {
        self.fields.iter_mut().flat_map(|f| f.comps.iter_mut())
    }

    /// Rebuilds a state from `3d` scalar components in storage order.
    pub fn from_scalars(grid: &Grid, scalars: Vec<ScalarField>) -> Result<Self> {
        let d = grid.dim();
        if scalars.len() != 3 * d {
            return Err(Error::ValueCount { expected: 3 * d, actual: scalars.len() });
        }
        for s in &scalars {
            check_same(grid, s.grid())?;
        }
        let mut it = scalars.into_iter();
        let mut take = || VectorField { comps: (&mut it).take(d).collect() };
        let u1 = take();
        let u2 = take();
        let u3 = take();
        Ok(State { fields: [u1, u2, u3] })
    }

    pub fn map_scalars(&self, mut f: impl FnMut(&ScalarField) -> ScalarField) -> State {
        let fields = [0, 1, 2].map(|j| VectorField {
            comps: self.fields[j].comps.iter().map(&mut f).collect(),
        });
        State { fields }
    }

    pub fn is_finite(&self) -> bool {
        self.scalars().all(|s| s.is_finite())
    }

    pub fn scale(&mut self, a: f64) {
        let a = Complex64::new(a, 0.0);
        for s in self.scalars_mut() {
            s.scale(a);
        }
    }

    pub fn scaled(&self, a: f64) -> State {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &State) -> Result<()> {
        let a = Complex64::new(a, 0.0);
        for (s, v) in self.scalars_mut().zip(x.scalars()) {
            s.axpy(a, v)?;
        }
        Ok(())
    }

    pub fn sub(&self, other: &State) -> Result<State> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn conj(&self) -> State {
        self.map_scalars(|s| s.conj())
    }

    /// `Re (U, V)_{L^2}` summed over all components.
    pub fn real_inner(&self, other: &State) -> Result<f64> {
        let mut s = 0.0;
        for (a, b) in self.scalars().zip(other.scalars()) {
            s += a.inner_l2(b)?.re;
        }
        Ok(s)
    }

    pub fn norm_l2_sqr(&self) -> f64 {
        self.fields.iter().map(|f| f.norm_l2_sqr()).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sqr().sqrt()
    }

    pub fn gradient_norm_sqr(&self) -> f64 {
        self.fields.iter().map(|f| f.gradient_norm_sqr()).sum()
    }

    /// `||U||_{H^1}^2 = sum_j ||u_j||^2 + ||grad u_j||^2`.
    pub fn norm_h1_sqr(&self) -> f64 {
        self.norm_l2_sqr() + self.gradient_norm_sqr()
    }

    pub fn norm_h1(&self) -> f64 {
        self.norm_h1_sqr().sqrt()
    }

    /// `U(x - y)` via a Fourier phase shift.
    pub fn translated(&self, y: &[f64]) -> State {
        self.map_scalars(|s| s.forward().translate(y).into_field())
    }

    /// Largest magnitude of any sample.
    pub fn max_abs(&self) -> f64 {
        self.scalars()
            .flat_map(|s| s.values().iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}
