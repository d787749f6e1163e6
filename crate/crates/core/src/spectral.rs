//! Truncated Fourier representation of real 2π-periodic functions.
//!
//! A [`SpectralField`] stores the coefficients `v̂(k)` for `|k| <= N` of
//! `v(x) = Σ v̂(k) e^{ikx}`, so `v̂(k) = (1/2π) ∫ v e^{-ikx} dx`. Both signs of
//! `k` are stored; real fields satisfy `v̂(-k) = conj(v̂(k))`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// `|k|^p`, with the convention that the power vanishes at `k = 0`.
pub fn abs_pow(k: i64, p: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        (k.unsigned_abs() as f64).powf(p)
    }
}

/// Japanese bracket `⟨x⟩ = (1 + x²)^{1/2}`.
pub fn bracket(x: f64) -> f64 {
    x.hypot(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    n: usize,
    /// `coeffs[k + n]` holds `v̂(k)`.
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * n + 1],
        }
    }

    /// Builds a field from all `2n + 1` coefficients, checking Hermitian symmetry.
    pub fn from_coeffs(n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 2 * n + 1 {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients for cutoff {n}, got {}",
                2 * n + 1,
                coeffs.len()
            )));
        }
        let field = Self { n, coeffs };
        let defect = field.hermitian_defect();
        let scale = field.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::HermitianViolation(defect));
        }
        Ok(field)
    }

    /// Builds a field without any symmetry check; used for intermediate
    /// results of general multipliers.
    pub fn from_coeffs_unchecked(n: usize, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), 2 * n + 1);
        Self { n, coeffs }
    }

    /// Builds a real field from `v̂(0)` (real part used) and `v̂(k)` for `k = 1..=n`.
    pub fn from_nonnegative_modes(mean: f64, positive: &[Complex64]) -> Self {
        let n = positive.len();
        let mut field = Self::zeros(n);
        field.coeffs[n] = Complex64::new(mean, 0.0);
        for (i, &c) in positive.iter().enumerate() {
            let k = i + 1;
            field.coeffs[n + k] = c;
            field.coeffs[n - k] = c.conj();
        }
        field
    }

    /// `amplitude · cos(kx)` at cutoff `n`.
    pub fn cosine(n: usize, k: usize, amplitude: f64) -> Self {
        let mut field = Self::zeros(n);
        if k == 0 {
            field.coeffs[n] = Complex64::new(amplitude, 0.0);
        } else if k <= n {
            field.coeffs[n + k] = Complex64::new(amplitude / 2.0, 0.0);
            field.coeffs[n - k] = Complex64::new(amplitude / 2.0, 0.0);
        }
        field
    }

    /// `amplitude · sin(kx)` at cutoff `n`.
    pub fn sine(n: usize, k: usize, amplitude: f64) -> Self {
        let mut field = Self::zeros(n);
        if k > 0 && k <= n {
            field.coeffs[n + k] = Complex64::new(0.0, -amplitude / 2.0);
            field.coeffs[n - k] = Complex64::new(0.0, amplitude / 2.0);
        }
        field
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self::cosine(n, 0, value)
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `v̂(k)`, zero outside the band.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.n {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.n as i64) as usize]
        }
    }

    pub fn set_coeff(&mut self, k: i64, value: Complex64) {
        let idx = (k + self.n as i64) as usize;
        self.coeffs[idx] = value;
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> {
        let n = self.n as i64;
        -n..=n
    }

    /// Largest `|v̂(-k) - conj(v̂(k))|`, together with `|Im v̂(0)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut defect = self.coeffs[n].im.abs();
        for k in 1..=n {
            defect = defect.max((self.coeffs[n - k] - self.coeffs[n + k].conj()).norm());
        }
        defect
    }

    /// Zero-pads or truncates to a new cutoff.
    pub fn resized(&self, n: usize) -> Self {
        let mut out = Self::zeros(n);
        let keep = n.min(self.n) as i64;
        for k in -keep..=keep {
            out.set_coeff(k, self.coeff(k));
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// L² inner product `∫ u v̄ dx = 2π Σ û(k) conj(v̂(k))`, real part.
    pub fn inner(&self, other: &Self) -> f64 {
        let n = self.n.max(other.n) as i64;
        2.0 * PI
            * (-n..=n)
                .map(|k| (self.coeff(k) * other.coeff(k).conj()).re)
                .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        sobolev_norm(self, 0.0)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Evaluates the series at a point by direct summation.
    pub fn eval(&self, x: f64) -> f64 {
        self.wavenumbers()
            .map(|k| (self.coeff(k) * Complex64::from_polar(1.0, k as f64 * x)).re)
            .sum()
    }
}

fn combine(a: &SpectralField, b: &SpectralField, sign: f64) -> SpectralField {
    let n = a.n.max(b.n);
    let mut out = SpectralField::zeros(n);
    for k in -(n as i64)..=(n as i64) {
        out.set_coeff(k, a.coeff(k) + b.coeff(k) * sign);
    }
    out
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        combine(self, rhs, 1.0)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        combine(self, rhs, -1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

/// Point values on the uniform grid `x_j = 2πj/M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: (0..m).map(|j| f(grid_point(j, m))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn grid_point(j: usize, m: usize) -> f64 {
    2.0 * PI * j as f64 / m as f64
}

fn plan(m: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if forward {
        planner.plan_fft_forward(m)
    } else {
        planner.plan_fft_inverse(m)
    }
}

/// Discrete Fourier coefficients of grid values, truncated to `|k| <= n`.
pub fn to_spectral(g: &GridField, n: usize) -> Result<SpectralField> {
    let m = g.len();
    if m < 2 * n + 1 {
        return Err(Error::Aliasing { m, n });
    }
    let mut buf: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(m, true).process(&mut buf);
    Ok(hermitian_from_spectrum(&buf, n, 1.0 / m as f64))
}

/// Reads `|k| <= n` from an FFT-ordered spectrum, imposing exact Hermitian
/// symmetry from the nonnegative half.
fn hermitian_from_spectrum(buf: &[Complex64], n: usize, scale: f64) -> SpectralField {
    let mut field = SpectralField::zeros(n);
    field.coeffs[n] = Complex64::new(buf[0].re * scale, 0.0);
    for k in 1..=n {
        let c = buf[k] * scale;
        field.coeffs[n + k] = c;
        field.coeffs[n - k] = c.conj();
    }
    field
}

fn spectrum_buffer(v: &SpectralField, m: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for k in v.wavenumbers() {
        buf[k.rem_euclid(m as i64) as usize] = v.coeff(k);
    }
    buf
}

/// Inverse transform onto `m` grid points.
pub fn to_grid(v: &SpectralField, m: usize) -> Result<GridField> {
    let n = v.cutoff();
    if m < 2 * n + 1 {
        return Err(Error::Aliasing { m, n });
    }
    let mut buf = spectrum_buffer(v, m);
    plan(m, false).process(&mut buf);
    let scale = v.coeffs().iter().map(|c| c.norm()).sum::<f64>().max(1.0);
    let residue = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if residue > HERMITIAN_TOL * scale {
        return Err(Error::HermitianViolation(residue));
    }
    Ok(GridField::new(buf.iter().map(|c| c.re).collect()))
}

/// Modewise multiplication `out(k) = symbol(k) · v̂(k)`.
///
/// The output keeps Hermitian symmetry when `symbol(-k) = conj(symbol(k))`.
pub fn apply_multiplier(v: &SpectralField, symbol: impl Fn(i64) -> Complex64) -> SpectralField {
    let n = v.cutoff();
    let coeffs = v.wavenumbers().map(|k| symbol(k) * v.coeff(k)).collect();
    SpectralField::from_coeffs_unchecked(n, coeffs)
}

/// Real multiplier with an even symbol.
pub fn apply_real_multiplier(v: &SpectralField, symbol: impl Fn(i64) -> f64) -> SpectralField {
    apply_multiplier(v, |k| Complex64::new(symbol(k), 0.0))
}

pub fn derivative_x(v: &SpectralField) -> SpectralField {
    apply_multiplier(v, |k| Complex64::new(0.0, k as f64))
}

/// `‖v‖_{H^s} = (2π Σ (1+|k|)^{2s} |v̂(k)|²)^{1/2}`.
pub fn sobolev_norm(v: &SpectralField, s: f64) -> f64 {
    let sum: f64 = v
        .wavenumbers()
        .map(|k| (1.0 + k.unsigned_abs() as f64).powf(2.0 * s) * v.coeff(k).norm_sqr())
        .sum();
    (2.0 * PI * sum).sqrt()
}

pub fn mean(v: &SpectralField) -> f64 {
    v.coeff(0).re
}

pub fn project_mean_zero(v: &SpectralField) -> SpectralField {
    let mut out = v.clone();
    out.set_coeff(0, Complex64::new(0.0, 0.0));
    out
}

/// Smallest power of two strictly above `3n`, the grid size at which the
/// pointwise square of a band-`n` field is alias-free on `|k| <= n`.
pub fn dealiased_grid_size(n: usize) -> usize {
    (3 * n + 1).next_power_of_two().max(4)
}

/// Reusable FFT plans for the quadratic transport term at a fixed cutoff.
#[derive(Clone)]
pub struct Dealiaser {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dealiaser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dealiaser")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}

impl Dealiaser {
    pub fn new(n: usize) -> Self {
        let m = dealiased_grid_size(n);
        let mut planner = FftPlanner::new();
        Self {
            n,
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// Band-`n` truncation of `v²`.
    pub fn square(&self, v: &SpectralField) -> SpectralField {
        let mut buf = spectrum_buffer(&v.resized(self.n), self.m);
        self.inverse.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex64::new(c.re * c.re, 0.0);
        }
        self.forward.process(&mut buf);
        hermitian_from_spectrum(&buf, self.n, 1.0 / self.m as f64)
    }

    /// `∂_x(v²)` truncated to `|k| <= n`, with exactly zero mean.
    pub fn transport(&self, v: &SpectralField) -> SpectralField {
        let mut out = derivative_x(&self.square(v));
        out.set_coeff(0, Complex64::new(0.0, 0.0));
        out
    }
}

/// `∂_x(v²)` by 2/3-rule dealiasing at the field's own cutoff.
pub fn nonlinear_term(v: &SpectralField) -> SpectralField {
    Dealiaser::new(v.cutoff()).transport(v)
}
