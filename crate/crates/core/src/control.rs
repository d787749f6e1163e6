//! Exact-control synthesis and observability: Gram matrices of exponentials
//! and their biorthogonal duals, Lyapunov-integral Gramians, minimum-norm
//! linear steering certified by re-simulation, the global-gain nonlinear
//! construction, and the observability constant with its decay-rate bound.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::damping::{apply_g, g_matrix, DampingProfile};
use crate::dynamics::{
    build_closed_loop, mean_zero_modes, pack_mean_zero, phi_functions, restrict_mean_zero, simulate,
    undamped_loop, unpack_mean_zero, Forcing, GalerkinModel, LinearClosedLoop,
    SimulationOptions,
};
use crate::error::{Error, Result};
use crate::spectral::{mean, sobolev_norm, Dealiaser, SpectralField};
use crate::symbols::{build_symbols, ModelParams, SymbolTable};
use crate::{CMatrix, CVector};

const GL_NODES: usize = 16;
const GRAMIAN_TOL: f64 = 1e-10;
const MAX_CONDITION: f64 = 1e12;
const UNCONTROLLABLE_RATIO: f64 = 1e-14;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `Γ_{jk} = ∫₀ᵀ e^{i(λ_j - λ_k)t} dt` for `j, k` in `modes`.
pub fn gram_matrix(table: &SymbolTable, modes: &[i64], t: f64) -> Result<CMatrix> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
    }
    if modes.is_empty() {
        return Err(Error::EmptyScan("mode set is empty".into()));
    }
    let lambdas: Vec<f64> = modes.iter().map(|&k| table.lambda(k)).collect();
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let scale = lambdas[i].abs().max(lambdas[j].abs()).max(1.0);
            if (lambdas[i] - lambdas[j]).abs() <= 1e-12 * scale {
                return Err(Error::DegenerateGramian(vec![modes[i], modes[j]]));
            }
        }
    }
    Ok(CMatrix::from_fn(modes.len(), modes.len(), |j, k| {
        if j == k {
            c(t)
        } else {
            let w = lambdas[j] - lambdas[k];
            (Complex64::new(0.0, w * t).exp() - 1.0) / Complex64::new(0.0, w)
        }
    }))
}

fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn condition_number(m: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Dual functions `q_j(t) = Σ_k c_{jk} e^{-iλ_k t}` with
/// `∫₀ᵀ e^{-iλ_k t} conj(q_j(t)) dt = δ_{kj}`.
#[derive(Clone, Debug)]
pub struct BiorthogonalFamily {
    pub modes: Vec<i64>,
    pub lambdas: Vec<f64>,
    pub horizon: f64,
    /// Row `j` holds the coefficients of `q_j`.
    pub coeffs: CMatrix,
    pub condition: f64,
}

pub fn biorthogonal_family(
    table: &SymbolTable,
    modes: &[i64],
    t: f64,
) -> Result<BiorthogonalFamily> {
    let gram = gram_matrix(table, modes, t)?;
    let condition = condition_number(&gram);
    if condition > MAX_CONDITION {
        return Err(Error::IllPosedHorizon(condition));
    }
    let inv = gram
        .clone()
        .try_inverse()
        .ok_or(Error::IllPosedHorizon(f64::INFINITY))?;
    Ok(BiorthogonalFamily {
        modes: modes.to_vec(),
        lambdas: modes.iter().map(|&k| table.lambda(k)).collect(),
        horizon: t,
        coeffs: inv.map(|z| z.conj()),
        condition,
    })
}

impl BiorthogonalFamily {
    pub fn eval(&self, j: usize, t: f64) -> Complex64 {
        self.lambdas
            .iter()
            .enumerate()
            .map(|(k, &l)| self.coeffs[(j, k)] * Complex64::new(0.0, -l * t).exp())
            .sum()
    }

    /// Pairings `P_{kj} = ∫₀ᵀ e^{-iλ_k t} conj(q_j(t)) dt` by composite
    /// Gauss–Legendre quadrature, independent of the closed-form Gram matrix.
    pub fn pairing_matrix(&self) -> CMatrix {
        let spread = self
            .lambdas
            .iter()
            .flat_map(|a| self.lambdas.iter().map(move |b| (a - b).abs()))
            .fold(0.0, f64::max);
        let panels = ((spread * self.horizon / 2.0).ceil() as usize).max(1);
        let rule = GaussLegendre::new(NonZeroUsize::new(GL_NODES).unwrap());
        let width = self.horizon / panels as f64;
        let dim = self.modes.len();
        let mut out = CMatrix::zeros(dim, dim);
        for p in 0..panels {
            let a = p as f64 * width;
            for &(x, w) in rule.as_node_weight_pairs() {
                let t = a + 0.5 * width * (x + 1.0);
                let w = 0.5 * width * w;
                let q: Vec<Complex64> = (0..dim).map(|j| self.eval(j, t).conj()).collect();
                for k in 0..dim {
                    let e = Complex64::new(0.0, -self.lambdas[k] * t).exp() * w;
                    for j in 0..dim {
                        out[(k, j)] += e * q[j];
                    }
                }
            }
        }
        out
    }

    pub fn max_pairing_defect(&self) -> f64 {
        let p = self.pairing_matrix();
        let id = CMatrix::identity(p.nrows(), p.ncols());
        (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn is_diagonal(m: &CMatrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(idx, z)| idx % m.nrows() == idx / m.nrows() || *z == c(0.0))
}

/// `∫₀ᵀ e^{sA} Q e^{sA*} ds`.
///
/// Diagonal `A` uses the exact entrywise integral. Otherwise a 16-node
/// Gauss–Legendre panel on `[0, T/2^j]` is extended to `[0, T]` by the exact
/// doubling `W(2τ) = W(τ) + e^{τA} W(τ) e^{τA*}`, and `j` grows until the
/// smallest eigenvalue and the Frobenius norm both settle to `1e-10` relative.
pub fn lyapunov_gramian(a: &CMatrix, q: &CMatrix, t: f64) -> Result<CMatrix> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {t}")));
    }
    if is_diagonal(a) {
        let d = a.diagonal();
        return Ok(CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
            q[(i, j)] * phi_functions((d[i] + d[j].conj()) * t)[0] * t
        }));
    }
    let spread = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * (a.nrows() as f64).sqrt();
    let mut levels = ((spread * t / 4.0).max(1.0).log2().ceil() as u32).max(1);
    let mut prev = gramian_doubling(a, q, t, levels);
    let mut prev_min = hermitian_eigen(&prev).0.iter().cloned().fold(f64::INFINITY, f64::min);
    for _ in 0..12 {
        levels += 1;
        let next = gramian_doubling(a, q, t, levels);
        let next_min = hermitian_eigen(&next).0.iter().cloned().fold(f64::INFINITY, f64::min);
        let frob = (&next - &prev).norm() / next.norm().max(f64::MIN_POSITIVE);
        let eig = (next_min - prev_min).abs() / next_min.abs().max(f64::MIN_POSITIVE);
        if frob <= GRAMIAN_TOL && eig <= GRAMIAN_TOL {
            return Ok(next);
        }
        prev = next;
        prev_min = next_min;
    }
    Err(Error::NumericalDegeneracy(
        "Gramian quadrature did not settle after 12 refinements".into(),
    ))
}

fn gramian_doubling(a: &CMatrix, q: &CMatrix, t: f64, levels: u32) -> CMatrix {
    let width = t / 2f64.powi(levels as i32);
    let rule = GaussLegendre::new(NonZeroUsize::new(GL_NODES).unwrap());
    let mut w = CMatrix::zeros(a.nrows(), a.ncols());
    for &(x, wt) in rule.as_node_weight_pairs() {
        let s = 0.5 * width * (x + 1.0);
        let e = (a * c(s)).exp();
        w += &e * q * e.adjoint() * c(0.5 * width * wt);
    }
    let mut step = (a * c(width)).exp();
    for _ in 0..levels {
        w = &w + &step * &w * step.adjoint();
        step = &step * &step;
    }
    (&w + w.adjoint()) * c(0.5)
}

/// Which linear flow is being steered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plant {
    /// `∂_t v = (∂_x A - G D^δ G) v + G h`.
    Damped,
    /// `∂_t v = ∂_x A v + G h`.
    Undamped,
}

#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub params: ModelParams,
    pub profile: DampingProfile,
    pub n: usize,
    pub horizon: f64,
    pub v0: SpectralField,
    pub v1: SpectralField,
    pub plant: Plant,
    /// Sobolev index of the reported control norm.
    pub s: f64,
    /// Step of the certifying re-simulation.
    pub cert_dt: f64,
    /// Number of stored control samples (uniform in time, endpoints included).
    pub samples: usize,
}

impl ControlProblem {
    pub fn new(
        params: ModelParams,
        profile: DampingProfile,
        n: usize,
        horizon: f64,
        v0: SpectralField,
        v1: SpectralField,
    ) -> Self {
        Self {
            params,
            profile,
            n,
            horizon,
            v0,
            v1,
            plant: Plant::Damped,
            s: 0.0,
            cert_dt: 2.5e-5,
            samples: 101,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("control cutoff must be >= 1".into()));
        }
        if !(self.cert_dt > 0.0) {
            return Err(Error::InvalidParameter("certification step must be positive".into()));
        }
        let (m0, m1) = (mean(&self.v0), mean(&self.v1));
        if m0 != m1 {
            return Err(Error::MeanMismatch(m0, m1));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMethod {
    Gramian,
    PerMode,
}

#[derive(Clone, Debug)]
pub struct ControlSolution {
    pub times: Vec<f64>,
    pub h: Vec<SpectralField>,
    /// `‖h‖_{L²(0,T; H^s)}` from the certification grid.
    pub control_norm: f64,
    pub terminal_error: f64,
    pub method: ControlMethod,
    pub gramian_condition: f64,
    pub final_state: SpectralField,
}

/// `P_N G P_N` on mean-zero modes.
pub fn control_matrix(p: &DampingProfile, n: usize) -> CMatrix {
    restrict_mean_zero(&g_matrix(p, n, n))
}

fn plant_loop(table: &SymbolTable, p: &DampingProfile, n: usize, plant: Plant) -> Result<LinearClosedLoop> {
    match plant {
        Plant::Damped => build_closed_loop(table, p, n),
        Plant::Undamped => undamped_loop(table, n),
    }
}

fn plant_model(table: &SymbolTable, p: &DampingProfile, n: usize, plant: Plant) -> Result<GalerkinModel> {
    Ok(match plant {
        Plant::Damped => GalerkinModel::damped(table, p, n)?,
        Plant::Undamped => GalerkinModel::undamped(table, n)?,
    }
    .linearized())
}

struct Synthesis {
    lp: LinearClosedLoop,
    control: CMatrix,
    gramian: CMatrix,
    xi: CVector,
    condition: f64,
}

fn synthesize(problem: &ControlProblem) -> Result<Synthesis> {
    problem.validate()?;
    let n = problem.n;
    let table = build_symbols(problem.params, n);
    let lp = plant_loop(&table, &problem.profile, n, problem.plant)?;
    let control = control_matrix(&problem.profile, n);
    let q = &control * control.adjoint();
    let gramian = lyapunov_gramian(&lp.generator, &q, problem.horizon)?;

    let (vals, vecs) = hermitian_eigen(&gramian);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = min / max;
    if !(ratio > UNCONTROLLABLE_RATIO) {
        let modes = mean_zero_modes(n);
        let deficient = vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= UNCONTROLLABLE_RATIO * max)
            .map(|(i, &v)| {
                let col = vecs.column(i);
                let dominant = (0..col.len())
                    .max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm()))
                    .unwrap_or(0);
                (v, modes[dominant] as f64)
            })
            .collect();
        return Err(Error::UncontrollableTruncation { ratio, deficient });
    }

    let x0 = pack_mean_zero(&problem.v0, n);
    let x1 = pack_mean_zero(&problem.v1, n);
    let defect = x1 - lp.propagator(problem.horizon)? * x0;
    let xi = gramian
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&defect))
        .or_else(|| gramian.clone().lu().solve(&defect))
        .ok_or_else(|| Error::NumericalDegeneracy("Gramian solve failed".into()))?;
    Ok(Synthesis {
        lp,
        control,
        gramian,
        xi,
        condition: max / min,
    })
}

/// `L²(0,T; L²)` norm of the minimum-norm control, `sqrt(2π ξ* W_T ξ)`,
/// without certification.
pub fn minimum_control_norm(problem: &ControlProblem) -> Result<f64> {
    let syn = synthesize(problem)?;
    let energy = (syn.xi.adjoint() * &syn.gramian * &syn.xi)[(0, 0)].re;
    Ok((2.0 * PI * energy.max(0.0)).sqrt())
}

/// Evaluates `G h(t)` with `h(t) = B* e^{(T-t)A*} ξ` on the half-step grid
/// by marching `y ← e^{-(dt/2)A*} y` forward from `y(0) = e^{TA*} ξ`.
struct MarchingControl {
    n: usize,
    half: f64,
    back: CMatrix,
    /// `B*`.
    control_adj: CMatrix,
    /// `B B*`.
    drive: CMatrix,
    index: usize,
    y: CVector,
    s: f64,
    /// `‖h‖²_{H^s}` per half-step index, for the norm quadrature.
    energy: Vec<f64>,
    stride: usize,
    samples: Vec<(f64, SpectralField)>,
}

impl MarchingControl {
    fn h_at_current(&self) -> SpectralField {
        unpack_mean_zero(&(&self.control_adj * &self.y), self.n, 0.0)
    }

    fn record_current(&mut self) {
        let h = self.h_at_current();
        self.energy.push(sobolev_norm(&h, self.s).powi(2));
        if self.index.is_multiple_of(self.stride) {
            self.samples.push((self.index as f64 * self.half, h));
        }
    }
}

impl Forcing for MarchingControl {
    fn eval(&mut self, t: f64) -> SpectralField {
        let target = (t / self.half).round() as usize;
        assert!(target >= self.index, "control marching only moves forward");
        while self.index < target {
            self.y = &self.back * &self.y;
            self.index += 1;
            self.record_current();
        }
        let f = &self.drive * &self.y;
        unpack_mean_zero(&f, self.n, 0.0)
    }
}

fn composite_simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    if n % 2 == 1 || n == 0 {
        return values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    }
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Minimum-norm control from the controllability Gramian, certified by an
/// independent ETDRK4 re-simulation of the forced linear plant.
pub fn linear_control_gramian(problem: &ControlProblem) -> Result<ControlSolution> {
    let syn = synthesize(problem)?;
    let n = problem.n;
    let t = problem.horizon;
    let steps = (t / problem.cert_dt).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let half = 0.5 * dt;
    let a_star = syn.lp.generator.adjoint();
    let y0 = (&a_star * c(t)).exp() * &syn.xi;
    let half_steps = 2 * steps;
    let stride = (half_steps / problem.samples.saturating_sub(1).max(1)).max(1);
    let mut marching = MarchingControl {
        n,
        half,
        back: (&a_star * c(-half)).exp(),
        control_adj: syn.control.adjoint(),
        drive: &syn.control * syn.control.adjoint(),
        index: 0,
        y: y0,
        s: problem.s,
        energy: Vec::with_capacity(half_steps + 1),
        stride,
        samples: Vec::new(),
    };
    marching.record_current();

    let table = build_symbols(problem.params, n);
    let model = plant_model(&table, &problem.profile, n, problem.plant)?;
    let record = simulate(
        &model,
        &problem.v0.resized(n),
        SimulationOptions::new(t, dt).record_every(steps),
        Some(&mut marching),
    )?;
    let final_state = record.last_state().cloned().unwrap_or_else(|| problem.v0.clone());
    let terminal_error = (&final_state - &problem.v1.resized(n)).l2_norm()
        / problem.v1.l2_norm().max(1e-12);
    let control_norm = composite_simpson(&marching.energy, half).max(0.0).sqrt();
    let (times, h) = marching.samples.into_iter().unzip();
    let method = if problem.profile.is_global() {
        ControlMethod::PerMode
    } else {
        ControlMethod::Gramian
    };
    Ok(ControlSolution {
        times,
        h,
        control_norm,
        terminal_error,
        method,
        gramian_condition: syn.condition,
        final_state,
    })
}

/// Closed-form controlled trajectory of the undamped global-gain problem,
/// `û(t) = (1 - t/T) e^{iλt} û₀ + (t/T) e^{iλ(t-T)} û₁`.
pub fn global_linear_path(
    table: &SymbolTable,
    u0: &SpectralField,
    u1: &SpectralField,
    horizon: f64,
    t: f64,
) -> SpectralField {
    let n = table.cutoff();
    let (u0, u1) = (u0.resized(n), u1.resized(n));
    let s = t / horizon;
    let mut out = SpectralField::zeros(n);
    for k in out.wavenumbers().collect::<Vec<_>>() {
        let l = table.lambda(k);
        let z = Complex64::new(0.0, l * t).exp() * u0.coeff(k) * (1.0 - s)
            + Complex64::new(0.0, l * (t - horizon)).exp() * u1.coeff(k) * s;
        out.set_coeff(k, z);
    }
    out
}

/// `h₁(t)` steering the undamped linear flow with `G = P_0/(2π)`:
/// `ĥ₁(k) = (2π/T)(e^{iλ(t-T)} û₁ - e^{iλt} û₀)` for `k ≠ 0`.
pub fn global_linear_control(
    table: &SymbolTable,
    u0: &SpectralField,
    u1: &SpectralField,
    horizon: f64,
    t: f64,
) -> SpectralField {
    let n = table.cutoff();
    let (u0, u1) = (u0.resized(n), u1.resized(n));
    let mut out = SpectralField::zeros(n);
    for k in out.wavenumbers().filter(|&k| k != 0).collect::<Vec<_>>() {
        let l = table.lambda(k);
        let z = (Complex64::new(0.0, l * (t - horizon)).exp() * u1.coeff(k)
            - Complex64::new(0.0, l * t).exp() * u0.coeff(k))
            * (2.0 * PI / horizon);
        out.set_coeff(k, z);
    }
    out
}

#[derive(Clone, Debug)]
pub struct NonlinearControlOptions {
    pub cert_dt: f64,
    /// Certification runs at `resolution_factor · N`.
    pub resolution_factor: usize,
    pub tolerance: f64,
    pub samples: usize,
    pub s: f64,
}

impl Default for NonlinearControlOptions {
    fn default() -> Self {
        Self {
            cert_dt: 1e-4,
            resolution_factor: 2,
            tolerance: 1e-6,
            samples: 101,
            s: 0.0,
        }
    }
}

/// `h = h₁ + h₂` for the undamped nonlinear equation with the global gain:
/// `h₁` steers the linear flow, `h₂ = 2π ∂_x(u²)` cancels the quadratic term
/// along the linear path. Certified by a nonlinear re-simulation.
pub fn nonlinear_control_global(
    params: ModelParams,
    profile: &DampingProfile,
    n: usize,
    horizon: f64,
    u0: &SpectralField,
    u1: &SpectralField,
    opts: &NonlinearControlOptions,
) -> Result<ControlSolution> {
    if !profile.is_global() {
        return Err(Error::InvalidParameter(
            "the nonlinear construction requires the global gain g = 1/(2π)".into(),
        ));
    }
    let params = params.with_mu(0.0);
    params.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let (m0, m1) = (mean(u0), mean(u1));
    if m0 != m1 {
        return Err(Error::MeanMismatch(m0, m1));
    }
    let table = build_symbols(params, n);
    let dealias = Dealiaser::new(n);
    let control_at = |t: f64| {
        let h1 = global_linear_control(&table, u0, u1, horizon, t);
        let path = global_linear_path(&table, u0, u1, horizon, t);
        let h2 = dealias.transport(&path).scaled(2.0 * PI);
        &h1 + &h2
    };

    let fine = n * opts.resolution_factor.max(1);
    let fine_table = build_symbols(params, fine);
    let model = GalerkinModel::undamped(&fine_table, fine)?;
    let steps = (horizon / opts.cert_dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let mut forcing = |t: f64| apply_g(profile, &control_at(t)).resized(fine);
    let record = simulate(
        &model,
        &u0.resized(fine),
        SimulationOptions::new(horizon, dt).record_every(steps),
        Some(&mut forcing),
    )?;
    let final_state = record.last_state().cloned().unwrap_or_else(|| u0.clone());
    let terminal_error =
        (&final_state - &u1.resized(fine)).l2_norm() / u1.l2_norm().max(1e-12);

    let count = opts.samples.max(2);
    let times: Vec<f64> = (0..count).map(|i| horizon * i as f64 / (count - 1) as f64).collect();
    let h: Vec<SpectralField> = times.iter().map(|&t| control_at(t)).collect();
    let quad_steps = 2 * steps;
    let energy: Vec<f64> = (0..=quad_steps)
        .map(|i| sobolev_norm(&control_at(horizon * i as f64 / quad_steps as f64), opts.s).powi(2))
        .collect();
    let control_norm = composite_simpson(&energy, horizon / quad_steps as f64).sqrt();
    if terminal_error > opts.tolerance {
        return Err(Error::ResolutionInsufficient(terminal_error));
    }
    Ok(ControlSolution {
        times,
        h,
        control_norm,
        terminal_error,
        method: ControlMethod::PerMode,
        gramian_condition: 1.0,
        final_state,
    })
}

#[derive(Clone, Debug)]
pub struct ObservabilityReport {
    pub cobs: f64,
    pub lambda_min: f64,
    /// Real-valued minimizing initial state, unit `L²` norm.
    pub worst_mode: SpectralField,
    pub rho: f64,
    /// `‖W(T) v*‖²`.
    pub terminal_energy: f64,
    pub certificate_holds: bool,
}

/// `O_T = ∫₀ᵀ e^{tA*} B e^{tA} dt` with `B` the Galerkin matrix of
/// `G D^δ G`; `Cobs = 1/λ_min(O_T)`.
pub fn observability_constant(
    table: &SymbolTable,
    p: &DampingProfile,
    horizon: f64,
    n: usize,
) -> Result<ObservabilityReport> {
    let lp = build_closed_loop(table, p, n)?;
    let a_star = lp.generator.adjoint();
    let gram = lyapunov_gramian(&a_star, &lp.feedback, horizon)?;
    let (vals, vecs) = hermitian_eigen(&gram);
    let (imin, &lambda_min) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::EmptyScan("empty Gramian".into()))?;
    if !(lambda_min > 0.0) {
        return Err(Error::ObservabilityFailure(lambda_min));
    }
    let cobs = 1.0 / lambda_min;
    let x = vecs.column(imin).into_owned();
    let worst_mode = real_representative(&x, n);
    let prop = lp.propagator(horizon)?;
    let end = unpack_mean_zero(&(prop * pack_mean_zero(&worst_mode, n)), n, 0.0);
    let terminal_energy = end.l2_norm().powi(2);
    let rho = 1.0 - 2.0 / cobs;
    Ok(ObservabilityReport {
        cobs,
        lambda_min,
        worst_mode,
        rho,
        terminal_energy,
        certificate_holds: terminal_energy <= rho + 1e-10,
    })
}

/// A real field in the span of `x` and its conjugate reflection, unit norm.
fn real_representative(x: &CVector, n: usize) -> SpectralField {
    let modes = mean_zero_modes(n);
    let reflect = |i: usize| {
        let k = modes[i];
        let j = modes.iter().position(|&m| m == -k).unwrap();
        x[j].conj()
    };
    let plus = CVector::from_fn(x.len(), |i, _| x[i] + reflect(i));
    let minus = CVector::from_fn(x.len(), |i, _| (x[i] - reflect(i)) * Complex64::new(0.0, 1.0));
    let pick = if plus.norm() >= minus.norm() { plus } else { minus };
    let v = unpack_mean_zero(&pick, n, 0.0);
    let norm = v.l2_norm();
    v.scaled(1.0 / norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    /// `-ln(1 - 2/Cobs) / (2T)`.
    pub gamma_gramian: f64,
    /// Minus the spectral abscissa of the closed loop.
    pub gamma_abscissa: f64,
}

pub fn decay_rate_predict(
    table: &SymbolTable,
    p: &DampingProfile,
    horizon: f64,
    n: usize,
) -> Result<DecayPrediction> {
    let obs = observability_constant(table, p, horizon, n)?;
    let lp = build_closed_loop(table, p, n)?;
    Ok(DecayPrediction {
        gamma_gramian: -obs.rho.ln() / (2.0 * horizon),
        gamma_abscissa: -lp.spectral_abscissa,
    })
}

/// Largest observed `controlNorm / (‖v₀‖ + ‖v₁‖)` over random mean-zero
/// endpoint pairs.
pub fn estimate_nu(template: &ControlProblem, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = template.n;
    let mut draw = || {
        let pos: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SpectralField::from_nonnegative_modes(0.0, &pos)
    };
    let mut nu: f64 = 0.0;
    for _ in 0..pairs {
        let mut problem = template.clone();
        problem.v0 = draw();
        problem.v1 = draw();
        let norm = minimum_control_norm(&problem)?;
        nu = nu.max(norm / (problem.v0.l2_norm() + problem.v1.l2_norm()));
    }
    Ok(nu)
}
