//! Time evolution: the diagonal dissipative semigroup `S_μ(t)`, the exact
//! linear closed-loop flow `W(t)` on the truncation, an ETDRK4 integrator
//! for the damped nonlinear equation, and energy/decay diagnostics.

use std::f64::consts::PI;

use nalgebra::Schur;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::damping::{dissipation, feedback_matrix, DampingProfile};
use crate::error::{Error, Result};
use crate::spectral::{mean, project_mean_zero, Dealiaser, SpectralField};
use crate::symbols::SymbolTable;
use crate::{CMatrix, CVector};

const BLOW_UP_FACTOR: f64 = 1e6;
const CONTRACTION_SLACK: f64 = 1e-10;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn check_table(table: &SymbolTable, n: usize) -> Result<()> {
    if table.cutoff() < n {
        return Err(Error::InvalidParameter(format!(
            "symbol table cutoff {} is below field cutoff {n}",
            table.cutoff()
        )));
    }
    Ok(())
}

/// `S_μ(t) v₀ = (e^{iλ_k t - d(k) t} v̂₀(k))^∨`, forward time only.
pub fn semigroup_apply(
    table: &SymbolTable,
    p: &DampingProfile,
    v0: &SpectralField,
    t: f64,
) -> Result<SpectralField> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::BackwardTime(t));
    }
    check_table(table, v0.cutoff())?;
    let mut out = v0.clone();
    for k in v0.wavenumbers().collect::<Vec<_>>() {
        let factor = Complex64::new(-p.d_symbol(k) * t, table.lambda(k) * t).exp();
        out.set_coeff(k, v0.coeff(k) * factor);
    }
    Ok(out)
}

/// Mean-zero wavenumbers `-n..=-1, 1..=n` in matrix order.
pub fn mean_zero_modes(n: usize) -> Vec<i64> {
    let n = n as i64;
    (-n..=n).filter(|&k| k != 0).collect()
}

/// Coefficients of `v` on the mean-zero modes of cutoff `n`.
pub fn pack_mean_zero(v: &SpectralField, n: usize) -> CVector {
    CVector::from_iterator(2 * n, mean_zero_modes(n).into_iter().map(|k| v.coeff(k)))
}

pub fn unpack_mean_zero(x: &CVector, n: usize, mean: f64) -> SpectralField {
    let mut out = SpectralField::constant(n, mean);
    for (i, k) in mean_zero_modes(n).into_iter().enumerate() {
        out.set_coeff(k, x[i]);
    }
    out
}

/// Drops the `k = 0` row and column of a `(2n+1)`-square mode matrix.
pub fn restrict_mean_zero(full: &CMatrix) -> CMatrix {
    let n = (full.nrows() - 1) / 2;
    full.clone().remove_row(n).remove_column(n)
}

/// Linearized damped flow on the `2N` mean-zero modes.
#[derive(Clone, Debug)]
pub struct LinearClosedLoop {
    pub n: usize,
    /// `A = diag(iλ_k) - B`.
    pub generator: CMatrix,
    /// `B`, the Galerkin matrix of `G D^δ G` on mean-zero modes.
    pub feedback: CMatrix,
    pub eigenvalues: Vec<Complex64>,
    pub spectral_abscissa: f64,
}

impl LinearClosedLoop {
    pub fn dimension(&self) -> usize {
        2 * self.n
    }

    /// `e^{tA}`, `t >= 0`.
    pub fn propagator(&self, t: f64) -> Result<CMatrix> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::BackwardTime(t));
        }
        Ok((&self.generator * Complex64::new(t, 0.0)).exp())
    }

    fn from_generator(n: usize, generator: CMatrix, feedback: CMatrix) -> Result<Self> {
        let schur = Schur::try_new(generator.clone(), 1e-14, 10_000).ok_or_else(|| {
            Error::NumericalDegeneracy("Schur iteration did not converge".into())
        })?;
        let (_, t) = schur.unpack();
        let eigenvalues: Vec<Complex64> = t.diagonal().iter().copied().collect();
        if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalDegeneracy("non-finite eigenvalue".into()));
        }
        let spectral_abscissa = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            n,
            generator,
            feedback,
            eigenvalues,
            spectral_abscissa,
        })
    }
}

fn dispersion_diagonal(table: &SymbolTable, n: usize) -> CMatrix {
    let modes = mean_zero_modes(n);
    CMatrix::from_diagonal(&CVector::from_iterator(
        modes.len(),
        modes.iter().map(|&k| Complex64::new(0.0, table.lambda(k))),
    ))
}

pub fn build_closed_loop(
    table: &SymbolTable,
    p: &DampingProfile,
    n: usize,
) -> Result<LinearClosedLoop> {
    check_table(table, n)?;
    if n == 0 {
        return Err(Error::InvalidParameter("closed loop needs N >= 1".into()));
    }
    let feedback = restrict_mean_zero(&feedback_matrix(p, n));
    let generator = dispersion_diagonal(table, n) - &feedback;
    LinearClosedLoop::from_generator(n, generator, feedback)
}

/// The undamped linear flow `A = diag(iλ_k)`.
pub fn undamped_loop(table: &SymbolTable, n: usize) -> Result<LinearClosedLoop> {
    check_table(table, n)?;
    let dim = 2 * n;
    let generator = dispersion_diagonal(table, n);
    let eigenvalues = generator.diagonal().iter().copied().collect();
    Ok(LinearClosedLoop {
        n,
        generator,
        feedback: CMatrix::zeros(dim, dim),
        eigenvalues,
        spectral_abscissa: 0.0,
    })
}

/// `W(t) v₀`; the mean passes through unchanged.
pub fn linear_propagate(
    lp: &LinearClosedLoop,
    v0: &SpectralField,
    t: f64,
) -> Result<SpectralField> {
    let prop = lp.propagator(t)?;
    apply_propagator(&prop, lp.n, v0)
}

/// Applies a precomputed `e^{tA}`, asserting `L²` contraction.
pub fn apply_propagator(prop: &CMatrix, n: usize, v0: &SpectralField) -> Result<SpectralField> {
    let x = pack_mean_zero(v0, n);
    let y = prop * &x;
    let out = unpack_mean_zero(&y, n, mean(v0));
    let before = v0.resized(n).l2_norm();
    let after = out.l2_norm();
    if after > before * (1.0 + CONTRACTION_SLACK) + 1e-300 {
        return Err(Error::ContractionViolated { before, after });
    }
    Ok(out)
}

/// `φ₁, φ₂, φ₃` at `z`: Taylor series for `|z| <= 1`, recurrence beyond.
pub fn phi_functions(z: Complex64) -> [Complex64; 3] {
    if z.norm() <= 1.0 {
        let mut out = [czero(); 3];
        for (idx, slot) in out.iter_mut().enumerate() {
            let k = idx + 1;
            // Σ_j z^j/(j+k)!
            let mut term = Complex64::new(1.0 / factorial(k), 0.0);
            let mut sum = term;
            for j in 1..24 {
                term = term * z / (j + k) as f64;
                sum += term;
            }
            *slot = sum;
        }
        out
    } else {
        let p1 = (z.exp() - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Time-dependent forcing added to the right-hand side, in spectral form.
pub trait Forcing {
    fn eval(&mut self, t: f64) -> SpectralField;
}

impl<F: FnMut(f64) -> SpectralField> Forcing for F {
    fn eval(&mut self, t: f64) -> SpectralField {
        self(t)
    }
}

/// Galerkin truncation at cutoff `N` of
/// `∂_t v = L v - P_N ∂_x(v²) - (B - D̃^δ) v + f`, with `L = diag(iλ_k - d(k))`.
#[derive(Clone, Debug)]
pub struct GalerkinModel {
    n: usize,
    linear: Vec<Complex64>,
    coupling: Option<CMatrix>,
    profile: Option<DampingProfile>,
    transport: Option<Dealiaser>,
}

impl GalerkinModel {
    /// Damped nonlinear model; `table.params.mu` selects the shifted form.
    pub fn damped(table: &SymbolTable, p: &DampingProfile, n: usize) -> Result<Self> {
        check_table(table, n)?;
        let nn = n as i64;
        let linear = (-nn..=nn)
            .map(|k| Complex64::new(-p.d_symbol(k), table.lambda(k)))
            .collect();
        let coupling = if p.is_global() {
            None
        } else {
            let mut c = feedback_matrix(p, n);
            for (i, k) in (-nn..=nn).enumerate() {
                c[(i, i)] -= p.d_symbol(k);
            }
            Some(c)
        };
        Ok(Self {
            n,
            linear,
            coupling,
            profile: Some(p.clone()),
            transport: Some(Dealiaser::new(n)),
        })
    }

    /// Undamped nonlinear model.
    pub fn undamped(table: &SymbolTable, n: usize) -> Result<Self> {
        check_table(table, n)?;
        let nn = n as i64;
        Ok(Self {
            n,
            linear: (-nn..=nn)
                .map(|k| Complex64::new(0.0, table.lambda(k)))
                .collect(),
            coupling: None,
            profile: None,
            transport: Some(Dealiaser::new(n)),
        })
    }

    /// Drops the quadratic term.
    pub fn linearized(mut self) -> Self {
        self.transport = None;
        self
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn profile(&self) -> Option<&DampingProfile> {
        self.profile.as_ref()
    }

    pub fn is_nonlinear(&self) -> bool {
        self.transport.is_some()
    }

    fn remainder(&self, v: &SpectralField, forcing: Option<&SpectralField>) -> SpectralField {
        let mut out = match &self.transport {
            Some(d) => d.transport(v).scaled(-1.0),
            None => SpectralField::zeros(self.n),
        };
        if let Some(c) = &self.coupling {
            let x = CVector::from_column_slice(v.coeffs());
            let y = c * x;
            for (o, yi) in out.coeffs_mut().iter_mut().zip(y.iter()) {
                *o -= yi;
            }
        }
        if let Some(f) = forcing {
            let nn = self.n as i64;
            for k in -nn..=nn {
                if k != 0 {
                    let c = out.coeff(k) + f.coeff(k);
                    out.set_coeff(k, c);
                }
            }
        }
        out.set_coeff(0, czero());
        out
    }
}

/// Cox–Matthews ETDRK4 coefficients for a fixed model and step.
#[derive(Clone, Debug)]
pub struct Etdrk4 {
    dt: f64,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etdrk4 {
    pub fn new(model: &GalerkinModel, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let len = model.linear.len();
        let mut s = Self {
            dt,
            e: Vec::with_capacity(len),
            e2: Vec::with_capacity(len),
            q: Vec::with_capacity(len),
            f1: Vec::with_capacity(len),
            f2: Vec::with_capacity(len),
            f3: Vec::with_capacity(len),
        };
        for &c in &model.linear {
            let z = c * dt;
            let [h1, _, _] = phi_functions(z * 0.5);
            let [p1, p2, p3] = phi_functions(z);
            s.e.push(z.exp());
            s.e2.push((z * 0.5).exp());
            s.q.push(h1 * (0.5 * dt));
            s.f1.push((p1 - p2 * 3.0 + p3 * 4.0) * dt);
            s.f2.push((p2 - p3 * 2.0) * dt);
            s.f3.push((p3 * 4.0 - p2) * dt);
        }
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step from time `t`. The mean coefficient is copied through.
    pub fn step(
        &self,
        model: &GalerkinModel,
        v: &SpectralField,
        t: f64,
        mut forcing: Option<&mut dyn Forcing>,
    ) -> Result<SpectralField> {
        let h = self.dt;
        let mut eval = |t: f64| forcing.as_mut().map(|f| f.eval(t));
        let f0 = eval(t);
        let fh = eval(t + 0.5 * h);
        let f1 = eval(t + h);

        let nu = model.remainder(v, f0.as_ref());
        let u = v.coeffs();
        let combine = |base: &[Complex64], e: &[Complex64], terms: &[Complex64]| {
            let coeffs: Vec<Complex64> = base
                .iter()
                .zip(e)
                .zip(terms)
                .map(|((b, e), t)| e * b + t)
                .collect();
            SpectralField::from_coeffs_unchecked(model.n, coeffs)
        };
        let qn: Vec<Complex64> = self.q.iter().zip(nu.coeffs()).map(|(q, n)| q * n).collect();
        let a = combine(u, &self.e2, &qn);
        let na = model.remainder(&a, fh.as_ref());
        let qa: Vec<Complex64> = self.q.iter().zip(na.coeffs()).map(|(q, n)| q * n).collect();
        let b = combine(u, &self.e2, &qa);
        let nb = model.remainder(&b, fh.as_ref());
        let qc: Vec<Complex64> = self
            .q
            .iter()
            .zip(nb.coeffs().iter().zip(nu.coeffs()))
            .map(|(q, (nb, nu))| q * (nb * 2.0 - nu))
            .collect();
        let c = combine(a.coeffs(), &self.e2, &qc);
        let nc = model.remainder(&c, f1.as_ref());

        let mut out = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            out.push(
                self.e[i] * u[i]
                    + self.f1[i] * nu.coeffs()[i]
                    + self.f2[i] * (na.coeffs()[i] + nb.coeffs()[i]) * 2.0
                    + self.f3[i] * nc.coeffs()[i],
            );
        }
        let mut next = SpectralField::from_coeffs_unchecked(model.n, out);
        next.set_coeff(0, v.coeff(0));
        if !next.is_finite() {
            return Err(Error::BlowUp { t: t + h, last_valid: t });
        }
        Ok(next)
    }
}

/// Single ETDRK4 step of the damped nonlinear equation. The shift `μ` is the
/// one stored in `table.params`.
pub fn nonlinear_step(
    table: &SymbolTable,
    p: &DampingProfile,
    v: &SpectralField,
    dt: f64,
    forcing: Option<&mut dyn Forcing>,
) -> Result<SpectralField> {
    let model = GalerkinModel::damped(table, p, v.cutoff())?;
    Etdrk4::new(&model, dt)?.step(&model, v, 0.0, forcing)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub cutoff: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
    pub nonlinear: bool,
    pub damped: bool,
    pub forced: bool,
    pub halvings: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub l2norms: Vec<f64>,
    /// `‖v - [v]‖`.
    pub fluctuation_norms: Vec<f64>,
    pub means: Vec<f64>,
    /// NaN where the difference stencil does not fit.
    pub energy_residuals: Vec<f64>,
    pub meta: RunMeta,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&SpectralField> {
        self.states.last()
    }

    pub fn max_energy_residual(&self) -> f64 {
        self.energy_residuals
            .iter()
            .filter(|r| r.is_finite())
            .fold(0.0, |a, &b| a.max(b.abs()))
    }

    fn from_states(times: Vec<f64>, states: Vec<SpectralField>, meta: RunMeta) -> Self {
        let l2norms = states.iter().map(SpectralField::l2_norm).collect();
        let fluctuation_norms = states.iter().map(|s| project_mean_zero(s).l2_norm()).collect();
        let means = states.iter().map(mean).collect();
        let energy_residuals = vec![f64::NAN; times.len()];
        Self {
            times,
            states,
            l2norms,
            fluctuation_norms,
            means,
            energy_residuals,
            meta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Record a sample every this many steps.
    pub record_every: usize,
    /// Halve `dt` while the energy residual exceeds this (undriven runs only).
    pub energy_tol: Option<f64>,
    pub max_halvings: u32,
}

impl SimulationOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            record_every: 1,
            energy_tol: None,
            max_halvings: 4,
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn energy_tol(mut self, tol: f64) -> Self {
        self.energy_tol = Some(tol);
        self
    }
}

/// Runs the model from `v0` to `t_final`. The step count is
/// `round(t_final / dt)` with `dt` adjusted to land on `t_final`.
pub fn simulate(
    model: &GalerkinModel,
    v0: &SpectralField,
    opts: SimulationOptions,
    mut forcing: Option<&mut dyn Forcing>,
) -> Result<TrajectoryRecord> {
    if !(opts.t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "final time must be positive, got {}",
            opts.t_final
        )));
    }
    let mut dt = opts.dt;
    let mut halvings = 0;
    loop {
        let forced = forcing.is_some();
        let record = run_once(model, v0, opts, dt, halvings, reborrow(&mut forcing))?;
        let adaptive = opts.energy_tol.filter(|_| !forced);
        match adaptive {
            Some(tol) if record.max_energy_residual() > tol && halvings < opts.max_halvings => {
                dt *= 0.5;
                halvings += 1;
            }
            _ => return Ok(record),
        }
    }
}

fn reborrow<'s>(f: &'s mut Option<&mut dyn Forcing>) -> Option<&'s mut dyn Forcing> {
    match f {
        Some(f) => Some(&mut **f),
        None => None,
    }
}

fn run_once(
    model: &GalerkinModel,
    v0: &SpectralField,
    opts: SimulationOptions,
    dt_request: f64,
    halvings: u32,
    mut forcing: Option<&mut dyn Forcing>,
) -> Result<TrajectoryRecord> {
    let steps = (opts.t_final / dt_request).round().max(1.0) as usize;
    let dt = opts.t_final / steps as f64;
    let stepper = Etdrk4::new(model, dt)?;
    let every = opts.record_every.max(1);
    let forced = forcing.is_some();
    let mut v = v0.resized(model.n);
    let limit = BLOW_UP_FACTOR * v.l2_norm().max(f64::MIN_POSITIVE);
    let mut times = vec![0.0];
    let mut states = vec![v.clone()];
    for i in 0..steps {
        let t = i as f64 * dt;
        v = stepper.step(model, &v, t, reborrow(&mut forcing))?;
        if v.l2_norm() > limit {
            return Err(Error::BlowUp { t: t + dt, last_valid: t });
        }
        if (i + 1) % every == 0 || i + 1 == steps {
            times.push((i + 1) as f64 * dt);
            states.push(v.clone());
        }
    }
    let meta = RunMeta {
        cutoff: model.n,
        dt,
        t_final: opts.t_final,
        record_every: every,
        nonlinear: model.is_nonlinear(),
        damped: model.profile.is_some(),
        forced,
        halvings,
    };
    let mut record = TrajectoryRecord::from_states(times, states, meta);
    record.energy_residuals = energy_residual(&record, model.profile());
    Ok(record)
}

/// `ΔE = E(a) - E(b)` for `E = ½‖·‖²`, without cancellation.
fn energy_difference(a: &SpectralField, b: &SpectralField) -> f64 {
    PI * a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| ((x - y) * (x + y).conj()).re)
        .sum::<f64>()
}

/// `d/dt(½‖v‖²) + ‖D^{δ/2} G v‖²` normalized by `‖v(0)‖²`, using the
/// five-point central difference on a uniform record (three-point when
/// fewer than five samples exist). End samples are NaN.
pub fn energy_residual(record: &TrajectoryRecord, p: Option<&DampingProfile>) -> Vec<f64> {
    let len = record.states.len();
    let mut out = vec![f64::NAN; len];
    if len < 3 {
        return out;
    }
    let norm0 = record.states[0].l2_norm().powi(2);
    let scale = if norm0 > 0.0 { 1.0 / norm0 } else { 1.0 };
    let diss = |v: &SpectralField| p.map_or(0.0, |p| dissipation(p, v));
    let s = &record.states;
    let t = &record.times;
    if len >= 5 {
        for i in 2..len - 2 {
            let h = (t[i + 2] - t[i - 2]) / 4.0;
            let d1 = energy_difference(&s[i + 1], &s[i - 1]);
            let d2 = energy_difference(&s[i + 2], &s[i - 2]);
            let de = (8.0 * d1 - d2) / (12.0 * h);
            out[i] = (de + diss(&s[i])) * scale;
        }
    } else {
        for i in 1..len - 1 {
            let de = energy_difference(&s[i + 1], &s[i - 1]) / (t[i + 1] - t[i - 1]);
            out[i] = (de + diss(&s[i])) * scale;
        }
    }
    out
}

/// Samples `W(t) v₀` on `t = j·Δ`, `j = 0..=steps`.
pub fn linear_trajectory(
    lp: &LinearClosedLoop,
    v0: &SpectralField,
    spacing: f64,
    steps: usize,
) -> Result<TrajectoryRecord> {
    let prop = lp.propagator(spacing)?;
    let mut v = v0.resized(lp.n);
    let mut times = vec![0.0];
    let mut states = vec![v.clone()];
    for j in 1..=steps {
        v = apply_propagator(&prop, lp.n, &v)?;
        times.push(j as f64 * spacing);
        states.push(v.clone());
    }
    let meta = RunMeta {
        cutoff: lp.n,
        dt: spacing,
        t_final: spacing * steps as f64,
        record_every: 1,
        nonlinear: false,
        damped: true,
        forced: false,
        halvings: 0,
    };
    Ok(TrajectoryRecord::from_states(times, states, meta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Prefactor in `‖v(t) - [v]‖ <= M e^{-λt} ‖v(0) - [v]‖`.
    pub m: f64,
    pub lambda: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// Samples were dropped at the end of the window because the norm
    /// reached the roundoff floor.
    pub truncated: bool,
}

/// Least-squares fit of `log‖v(t) - [v]‖` on `window`.
pub fn decay_fit(record: &TrajectoryRecord, window: (f64, f64)) -> Result<DecayFit> {
    let norm0 = record.fluctuation_norms.first().copied().unwrap_or(0.0);
    decay_fit_series(&record.times, &record.fluctuation_norms, norm0, window)
}

pub fn decay_fit_series(
    times: &[f64],
    norms: &[f64],
    norm0: f64,
    window: (f64, f64),
) -> Result<DecayFit> {
    if !(norm0 > 0.0) {
        return Err(Error::NumericalDegeneracy("initial fluctuation norm is zero".into()));
    }
    let floor = 1e-13 * norm0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated = false;
    for (&t, &n) in times.iter().zip(norms) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(n > floor) {
            truncated = true;
            break;
        }
        xs.push(t);
        ys.push(n.ln());
    }
    if xs.len() < 2 {
        return Err(Error::NumericalDegeneracy(format!(
            "decay fit window ({}, {}) holds fewer than two usable samples",
            window.0, window.1
        )));
    }
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        m: intercept.exp() / norm0,
        lambda: -slope,
        r_squared,
        window: (xs[0], *xs.last().unwrap()),
        truncated,
    })
}
