//! Periodic grid, Fourier-multiplier machinery and discrete Sobolev norms.
//!
//! All fields live on a uniform torus grid, flattened row-major with the x
//! index fastest. Fourier coefficients use the convention
//! `f(x) = sum_k fhat_k exp(i k x)` so that multipliers act directly on
//! `fhat`. Parseval then reads `int |f|^2 = |domain| * sum |fhat|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::DimensionlessParams;

/// Real scalar samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldR {
    pub data: Vec<f64>,
}

impl FieldR {
    pub fn zeros(n: usize) -> Self {
        FieldR {
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        FieldR { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, a: f64) -> FieldR {
        FieldR::from_vec(self.data.iter().map(|v| a * v).collect())
    }

    pub fn add(&self, other: &FieldR) -> FieldR {
        FieldR::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &FieldR) -> FieldR {
        FieldR::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &FieldR) {
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
    }

    /// Pointwise product on the collocation grid (aliased; see
    /// [`Grid::padded_product`] for the dealiased version).
    pub fn mul_pointwise(&self, other: &FieldR) -> FieldR {
        FieldR::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FieldR {
        FieldR::from_vec(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Index of the minimum value.
    pub fn argmin(&self) -> usize {
        let mut idx = 0;
        let mut best = f64::INFINITY;
        for (i, &v) in self.data.iter().enumerate() {
            if v < best {
                best = v;
                idx = i;
            }
        }
        idx
    }
}

/// Complex Fourier coefficients in the same flattened layout as the field.
pub type Spectrum = Vec<Complex64>;

struct AxisPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Plans for the 3/2-padded length used by dealiased products.
    forward_pad: Arc<dyn Fft<f64>>,
    inverse_pad: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid in d = 1 or 2 horizontal dimensions.
pub struct Grid {
    dim: usize,
    n1: usize,
    n2: usize,
    l1: f64,
    l2: f64,
    /// Wavenumbers along each axis in FFT ordering, 2*pi/L * [0..n/2-1, -n/2..-1].
    k1: Vec<f64>,
    k2: Vec<f64>,
    plans1: AxisPlans,
    plans2: Option<AxisPlans>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("l1", &self.l1)
            .field("l2", &self.l2)
            .finish()
    }
}

fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let base = 2.0 * PI / l;
    (0..n)
        .map(|i| {
            let j = if i < n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            };
            base * j as f64
        })
        .collect()
}

fn make_axis_plans(planner: &mut FftPlanner<f64>, n: usize) -> AxisPlans {
    let npad = 3 * n / 2;
    AxisPlans {
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
        forward_pad: planner.plan_fft_forward(npad),
        inverse_pad: planner.plan_fft_inverse(npad),
    }
}

impl Grid {
    pub fn new_1d(n: usize, length: f64) -> Result<Grid> {
        Self::validate_axis(n, length)?;
        let mut planner = FftPlanner::new();
        Ok(Grid {
            dim: 1,
            n1: n,
            n2: 1,
            l1: length,
            l2: 1.0,
            k1: wavenumbers(n, length),
            k2: vec![0.0],
            plans1: make_axis_plans(&mut planner, n),
            plans2: None,
        })
    }

    pub fn new_2d(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Grid> {
        Self::validate_axis(n1, l1)?;
        Self::validate_axis(n2, l2)?;
        let mut planner = FftPlanner::new();
        Ok(Grid {
            dim: 2,
            n1,
            n2,
            l1,
            l2,
            k1: wavenumbers(n1, l1),
            k2: wavenumbers(n2, l2),
            plans1: make_axis_plans(&mut planner, n1),
            plans2: Some(make_axis_plans(&mut planner, n2)),
        })
    }

    fn validate_axis(n: usize, l: f64) -> Result<()> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "grid size must be even and >= 8, got {n}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidInput(format!(
                "domain length must be positive and finite, got {l}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn len1(&self) -> f64 {
        self.l1
    }

    pub fn len2(&self) -> f64 {
        self.l2
    }

    /// Total number of grid points.
    pub fn size(&self) -> usize {
        self.n1 * self.n2
    }

    /// Measure of the full domain.
    pub fn volume(&self) -> f64 {
        if self.dim == 1 {
            self.l1
        } else {
            self.l1 * self.l2
        }
    }

    /// Measure of one grid cell.
    pub fn cell(&self) -> f64 {
        self.volume() / self.size() as f64
    }

    /// Coordinates of the flattened node `idx` as (x, y); y = 0 for d = 1.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let i1 = idx % self.n1;
        let i2 = idx / self.n1;
        (
            i1 as f64 * self.l1 / self.n1 as f64,
            i2 as f64 * self.l2 / self.n2 as f64,
        )
    }

    /// Wavenumber pair of the flattened spectral index.
    pub fn wavenumber(&self, idx: usize) -> (f64, f64) {
        let i1 = idx % self.n1;
        let i2 = idx / self.n1;
        (self.k1[i1], self.k2[i2])
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> FieldR {
        FieldR::from_vec(
            (0..self.size())
                .map(|idx| {
                    let (x, y) = self.coords(idx);
                    f(x, y)
                })
                .collect(),
        )
    }

    pub fn check_compatible(&self, f: &FieldR) -> Result<()> {
        if f.len() != self.size() {
            return Err(Error::InvalidInput(format!(
                "field has {} samples, grid has {}",
                f.len(),
                self.size()
            )));
        }
        Ok(())
    }

    fn fft_axis1(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse {
            &self.plans1.inverse
        } else {
            &self.plans1.forward
        };
        for row in data.chunks_mut(self.n1) {
            plan.process(row);
        }
    }

    fn fft_axis2(&self, data: &mut [Complex64], inverse: bool) {
        let Some(plans2) = &self.plans2 else {
            return;
        };
        let plan = if inverse {
            &plans2.inverse
        } else {
            &plans2.forward
        };
        let mut col = vec![Complex64::default(); self.n2];
        for i1 in 0..self.n1 {
            for i2 in 0..self.n2 {
                col[i2] = data[i2 * self.n1 + i1];
            }
            plan.process(&mut col);
            for i2 in 0..self.n2 {
                data[i2 * self.n1 + i1] = col[i2];
            }
        }
    }

    /// Forward transform into a caller-provided buffer (no allocation beyond
    /// FFT scratch).
    pub fn forward_into(&self, src: &[f64], dst: &mut [Complex64]) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d = Complex64::new(*s, 0.0);
        }
        self.fft_axis1(dst, false);
        self.fft_axis2(dst, false);
        let norm = 1.0 / self.size() as f64;
        for v in dst.iter_mut() {
            *v *= norm;
        }
    }

    /// Inverse transform into a real buffer; `spec` is consumed as scratch.
    pub fn inverse_into(&self, spec: &mut [Complex64], dst: &mut [f64]) {
        self.fft_axis1(spec, true);
        self.fft_axis2(spec, true);
        for (d, s) in dst.iter_mut().zip(spec.iter()) {
            *d = s.re;
        }
    }

    /// In-place spectral derivative along `axis` (zeroes the Nyquist mode).
    pub fn derivative_spectrum(&self, spec: &mut [Complex64], axis: usize) {
        let n = if axis == 0 { self.n1 } else { self.n2 };
        for idx in 0..spec.len() {
            let i = if axis == 0 {
                idx % self.n1
            } else {
                idx / self.n1
            };
            if n > 1 && i == n / 2 {
                spec[idx] = Complex64::default();
                continue;
            }
            let (kx, ky) = self.wavenumber(idx);
            let k = if axis == 0 { kx } else { ky };
            spec[idx] *= Complex64::new(0.0, k);
        }
    }

    /// Forward transform, normalized so coefficients are Fourier coefficients.
    pub fn forward(&self, f: &FieldR) -> Spectrum {
        let mut data: Vec<Complex64> = f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_axis1(&mut data, false);
        self.fft_axis2(&mut data, false);
        let norm = 1.0 / self.size() as f64;
        for v in &mut data {
            *v *= norm;
        }
        data
    }

    /// Inverse transform back to real samples (takes the real part).
    pub fn inverse(&self, spec: &Spectrum) -> FieldR {
        let mut data = spec.clone();
        self.fft_axis1(&mut data, true);
        self.fft_axis2(&mut data, true);
        FieldR::from_vec(data.iter().map(|c| c.re).collect())
    }

    /// Mean value over the domain.
    pub fn mean(&self, f: &FieldR) -> f64 {
        f.data.iter().sum::<f64>() / f.len() as f64
    }

    /// L2 inner product (f, g)_2 = int f g.
    pub fn inner(&self, f: &FieldR, g: &FieldR) -> f64 {
        let cell = self.cell();
        f.data
            .iter()
            .zip(&g.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * cell
    }

    /// L2 norm |f|_2.
    pub fn l2_norm(&self, f: &FieldR) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// Truncate the top third of modes along each axis (2/3 rule).
    pub fn dealias(&self, f: &FieldR) -> FieldR {
        let mut spec = self.forward(f);
        self.dealias_spectrum(&mut spec);
        self.inverse(&spec)
    }

    fn keep_mode(n: usize, i: usize) -> bool {
        let j = if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        };
        3 * (j.unsigned_abs() as usize) < n
    }

    fn dealias_spectrum(&self, spec: &mut Spectrum) {
        for idx in 0..spec.len() {
            let i1 = idx % self.n1;
            let i2 = idx / self.n1;
            let keep1 = Self::keep_mode(self.n1, i1);
            let keep2 = self.dim == 1 || Self::keep_mode(self.n2, i2);
            if !(keep1 && keep2) {
                spec[idx] = Complex64::default();
            }
        }
    }

    fn pad_spectrum_axis1(&self, spec: &[Complex64], out: &mut [Complex64], m1: usize) {
        // spec rows of length n1 -> out rows of length m1, zero-padded in the middle
        let n1 = self.n1;
        let half = n1 / 2;
        for (row_in, row_out) in spec.chunks(n1).zip(out.chunks_mut(m1)) {
            for v in row_out.iter_mut() {
                *v = Complex64::default();
            }
            row_out[..half].copy_from_slice(&row_in[..half]);
            row_out[m1 - half..].copy_from_slice(&row_in[half..]);
        }
    }

    fn truncate_spectrum_axis1(&self, padded: &[Complex64], out: &mut [Complex64], m1: usize) {
        let n1 = self.n1;
        let half = n1 / 2;
        for (row_in, row_out) in padded.chunks(m1).zip(out.chunks_mut(n1)) {
            row_out[..half].copy_from_slice(&row_in[..half]);
            row_out[half..].copy_from_slice(&row_in[m1 - half..]);
        }
    }

    /// Product of two fields dealiased by 3/2 zero padding; exact for inputs
    /// band-limited to two thirds of the Nyquist range.
    pub fn padded_product(&self, f: &FieldR, g: &FieldR) -> FieldR {
        if self.dim == 1 {
            let m1 = 3 * self.n1 / 2;
            let sf = self.forward(f);
            let sg = self.forward(g);
            let mut pf = vec![Complex64::default(); m1];
            let mut pg = vec![Complex64::default(); m1];
            self.pad_spectrum_axis1(&sf, &mut pf, m1);
            self.pad_spectrum_axis1(&sg, &mut pg, m1);
            self.plans1.inverse_pad.process(&mut pf);
            self.plans1.inverse_pad.process(&mut pg);
            let mut prod: Vec<Complex64> = pf
                .iter()
                .zip(&pg)
                .map(|(a, b)| Complex64::new(a.re * b.re, 0.0))
                .collect();
            self.plans1.forward_pad.process(&mut prod);
            let scale = 1.0 / m1 as f64;
            for v in &mut prod {
                *v *= scale;
            }
            let mut trunc = vec![Complex64::default(); self.n1];
            self.truncate_spectrum_axis1(&prod, &mut trunc, m1);
            self.inverse(&trunc)
        } else {
            // 2D: pad along x rows, then along y columns.
            let (m1, m2) = (3 * self.n1 / 2, 3 * self.n2 / 2);
            let pf = self.pad_2d(f, m1, m2);
            let pg = self.pad_2d(g, m1, m2);
            let mut prod: Vec<Complex64> = pf
                .iter()
                .zip(&pg)
                .map(|(a, b)| Complex64::new(a.re * b.re, 0.0))
                .collect();
            self.unpad_2d_into_product(&mut prod, m1, m2)
        }
    }

    /// Zero-pad the spectrum of `f` to (m1, m2), return padded physical samples.
    fn pad_2d(&self, f: &FieldR, m1: usize, m2: usize) -> Vec<Complex64> {
        let spec = self.forward(f);
        let n1 = self.n1;
        let n2 = self.n2;
        let (h1, h2) = (n1 / 2, n2 / 2);
        let mut padded = vec![Complex64::default(); m1 * m2];
        for i2 in 0..n2 {
            let o2 = if i2 < h2 { i2 } else { i2 + m2 - n2 };
            for i1 in 0..n1 {
                let o1 = if i1 < h1 { i1 } else { i1 + m1 - n1 };
                padded[o2 * m1 + o1] = spec[i2 * n1 + i1];
            }
        }
        let plans2 = self.plans2.as_ref().expect("2d grid");
        for row in padded.chunks_mut(m1) {
            self.plans1.inverse_pad.process(row);
        }
        let mut col = vec![Complex64::default(); m2];
        for i1 in 0..m1 {
            for i2 in 0..m2 {
                col[i2] = padded[i2 * m1 + i1];
            }
            plans2.inverse_pad.process(&mut col);
            for i2 in 0..m2 {
                padded[i2 * m1 + i1] = col[i2];
            }
        }
        padded
    }

    fn unpad_2d_into_product(&self, prod: &mut Vec<Complex64>, m1: usize, m2: usize) -> FieldR {
        let plans2 = self.plans2.as_ref().expect("2d grid");
        for row in prod.chunks_mut(m1) {
            self.plans1.forward_pad.process(row);
        }
        let mut col = vec![Complex64::default(); m2];
        for i1 in 0..m1 {
            for i2 in 0..m2 {
                col[i2] = prod[i2 * m1 + i1];
            }
            plans2.forward_pad.process(&mut col);
            for i2 in 0..m2 {
                prod[i2 * m1 + i1] = col[i2];
            }
        }
        let scale = 1.0 / (m1 * m2) as f64;
        let n1 = self.n1;
        let n2 = self.n2;
        let (h1, h2) = (n1 / 2, n2 / 2);
        let mut spec = vec![Complex64::default(); n1 * n2];
        for i2 in 0..n2 {
            let o2 = if i2 < h2 { i2 } else { i2 + m2 - n2 };
            for i1 in 0..n1 {
                let o1 = if i1 < h1 { i1 } else { i1 + m1 - n1 };
                spec[i2 * n1 + i1] = prod[o2 * m1 + o1] * scale;
            }
        }
        self.inverse(&spec)
    }
}

/// Apply a real Fourier multiplier `symbol(kx, ky)` to `f`.
pub fn apply_multiplier(
    f: &FieldR,
    symbol: impl Fn(f64, f64) -> f64,
    grid: &Grid,
) -> Result<FieldR> {
    grid.check_compatible(f)?;
    let mut spec = grid.forward(f);
    for idx in 0..spec.len() {
        let (kx, ky) = grid.wavenumber(idx);
        let m = symbol(kx, ky);
        if !m.is_finite() {
            return Err(Error::NumericDomain(format!(
                "multiplier symbol evaluated to {m} at wavenumber ({kx}, {ky})"
            )));
        }
        spec[idx] *= m;
    }
    Ok(grid.inverse(&spec))
}

/// |xi_gamma|^2 = kx^2 + gamma^2 ky^2, the twisted wavenumber modulus squared.
pub fn xi_gamma_sq(kx: f64, ky: f64, gamma: f64) -> f64 {
    kx * kx + gamma * gamma * ky * ky
}

/// Symbol of the operator P = |D_gamma| / (1 + sqrt(mu) |D_gamma|)^(1/2).
pub fn p_symbol(kx: f64, ky: f64, params: &DimensionlessParams) -> f64 {
    let xg = xi_gamma_sq(kx, ky, params.gamma).sqrt();
    xg / (1.0 + params.mu.sqrt() * xg).sqrt()
}

/// Apply the square-root-of-DN operator P.
pub fn apply_p(f: &FieldR, params: &DimensionlessParams, grid: &Grid) -> Result<FieldR> {
    apply_multiplier(f, |kx, ky| p_symbol(kx, ky, params), grid)
}

/// Apply Lambda^s = (1 + |xi|^2)^(s/2).
pub fn apply_lambda(f: &FieldR, s: f64, grid: &Grid) -> Result<FieldR> {
    apply_multiplier(f, |kx, ky| (1.0 + kx * kx + ky * ky).powf(s / 2.0), grid)
}

/// Discrete Sobolev norm |f|_{H^s} via weighted Parseval.
pub fn sobolev_norm(f: &FieldR, s: f64, grid: &Grid) -> Result<f64> {
    grid.check_compatible(f)?;
    if !f.is_finite() {
        return Err(Error::NumericDomain(
            "sobolev_norm input contains non-finite values".into(),
        ));
    }
    let spec = grid.forward(f);
    let vol = grid.volume();
    let mut acc = 0.0;
    for (idx, c) in spec.iter().enumerate() {
        let (kx, ky) = grid.wavenumber(idx);
        let w = (1.0 + kx * kx + ky * ky).powf(s);
        acc += w * c.norm_sqr();
    }
    Ok((vol * acc).sqrt())
}

/// Partial derivative along axis 0 (x) or 1 (y). The unpaired Nyquist mode is
/// zeroed so real fields stay real.
pub fn derivative(f: &FieldR, axis: usize, grid: &Grid) -> Result<FieldR> {
    grid.check_compatible(f)?;
    let mut spec = grid.forward(f);
    let (n, _l) = if axis == 0 {
        (grid.n1(), grid.len1())
    } else {
        (grid.n2(), grid.len2())
    };
    for idx in 0..spec.len() {
        let i = if axis == 0 {
            idx % grid.n1()
        } else {
            idx / grid.n1()
        };
        let (kx, ky) = grid.wavenumber(idx);
        let k = if axis == 0 { kx } else { ky };
        if n > 1 && i == n / 2 {
            spec[idx] = Complex64::default();
        } else {
            spec[idx] *= Complex64::new(0.0, k);
        }
    }
    Ok(grid.inverse(&spec))
}

/// Twisted gradient: (d/dx f) for d=1, (d/dx f, gamma d/dy f) for d=2.
pub fn grad_gamma(f: &FieldR, gamma: f64, grid: &Grid) -> Result<Vec<FieldR>> {
    let mut out = vec![derivative(f, 0, grid)?];
    if grid.dim() == 2 {
        out.push(derivative(f, 1, grid)?.scale(gamma));
    }
    Ok(out)
}

/// Twisted divergence of a d-component vector field.
pub fn div_gamma(v: &[FieldR], gamma: f64, grid: &Grid) -> Result<FieldR> {
    let mut out = derivative(&v[0], 0, grid)?;
    if grid.dim() == 2 {
        out.axpy(1.0, &derivative(&v[1], 1, grid)?.scale(gamma));
    }
    Ok(out)
}

/// Twisted Laplacian Delta_gamma = d_xx + gamma^2 d_yy applied spectrally.
pub fn laplacian_gamma(f: &FieldR, gamma: f64, grid: &Grid) -> Result<FieldR> {
    apply_multiplier(f, |kx, ky| -xi_gamma_sq(kx, ky, gamma), grid)
}

/// |v|^2 pointwise for a d-component vector field.
pub fn vector_norm_sq(v: &[FieldR]) -> FieldR {
    let mut out = FieldR::zeros(v[0].len());
    for comp in v {
        for (o, c) in out.data.iter_mut().zip(&comp.data) {
            *o += c * c;
        }
    }
    out
}

/// Dot product of two d-component vector fields, pointwise.
pub fn vector_dot(a: &[FieldR], b: &[FieldR]) -> FieldR {
    let mut out = FieldR::zeros(a[0].len());
    for (ca, cb) in a.iter().zip(b) {
        for ((o, x), y) in out.data.iter_mut().zip(&ca.data).zip(&cb.data) {
            *o += x * y;
        }
    }
    out
}
