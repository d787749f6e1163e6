//! Gain profile `g`, the localized operator `G φ = g(φ - ∫φg)` and the
//! feedback `G D^δ G` together with its split into a diagonal dissipation
//! `D̃^δ`, a smoothing remainder `N₁` and a mean-correction operator `R`.
//!
//! Every `apply_*` map is exact on band-limited input: `G` widens the band
//! by the profile cutoff `K`, so `apply_g` returns cutoff `N + K` and
//! `apply_gdg` returns cutoff `N + 2K`. Galerkin truncation is left to the
//! caller (see [`feedback_matrix`]).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    abs_pow, apply_real_multiplier, bracket, to_grid, to_spectral, GridField, SpectralField,
};
use crate::CMatrix;

const NEGATIVITY_BUDGET: f64 = 1e-10;
const DECOMPOSITION_TOL: f64 = 1e-10;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Support {
    Global,
    Interval { a: f64, b: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRecord", into = "ProfileRecord")]
pub struct DampingProfile {
    support: Support,
    k: usize,
    ghat: Vec<Complex64>,
    delta: f64,
}

/// Wire format: `{support, K, ghat: [[re, im], ...], delta}` with `ghat`
/// listed for `k = -K..=K`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRecord {
    support: Support,
    #[serde(rename = "K")]
    k: usize,
    ghat: Vec<[f64; 2]>,
    delta: f64,
}

impl From<DampingProfile> for ProfileRecord {
    fn from(p: DampingProfile) -> Self {
        Self {
            support: p.support,
            k: p.k,
            ghat: p.ghat.iter().map(|c| [c.re, c.im]).collect(),
            delta: p.delta,
        }
    }
}

impl TryFrom<ProfileRecord> for DampingProfile {
    type Error = String;

    fn try_from(r: ProfileRecord) -> std::result::Result<Self, String> {
        if r.ghat.len() != 2 * r.k + 1 {
            return Err(format!("ghat has {} entries, expected {}", r.ghat.len(), 2 * r.k + 1));
        }
        let ghat: Vec<Complex64> = r.ghat.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        if (2.0 * PI * ghat[r.k].re - 1.0).abs() > 1e-12 {
            return Err("profile is not normalized: 2π ĝ(0) must equal 1".into());
        }
        Ok(Self {
            support: r.support,
            k: r.k,
            ghat,
            delta: r.delta,
        })
    }
}

/// The constant gain `g ≡ 1/(2π)`.
pub fn make_profile_global(delta: f64) -> DampingProfile {
    DampingProfile {
        support: Support::Global,
        k: 0,
        ghat: vec![Complex64::new(1.0 / (2.0 * PI), 0.0)],
        delta,
    }
}

/// A smooth bump concentrated on `(a, b)`.
///
/// The raised cosine `1 + cos(2π(x - x_c)/(b - a))` on `(a, b)` is sampled on
/// `grid_m` points and truncated to `K/2` modes; `g` is its exact square, so
/// it is nonnegative everywhere and band-limited to `K`. The result is
/// rescaled to `∫ g = 1`.
pub fn make_profile_bump(
    a: f64,
    b: f64,
    k: usize,
    grid_m: usize,
    delta: f64,
) -> Result<DampingProfile> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b > 2.0 * PI || a >= b {
        return Err(Error::InvalidSupport { a, b });
    }
    let half = k / 2;
    if half == 0 {
        return Err(Error::InvalidParameter(format!(
            "bump profile needs K >= 2, got {k}"
        )));
    }
    let centre = 0.5 * (a + b);
    let width = b - a;
    let root = GridField::from_fn(grid_m, |x| {
        if x > a && x < b {
            1.0 + (2.0 * PI * (x - centre) / width).cos()
        } else {
            0.0
        }
    });
    let root_hat = to_spectral(&root, half)?;
    let band = 2 * half;
    let mut ghat = vec![zero(); 2 * k + 1];
    for p in -(half as i64)..=(half as i64) {
        for q in -(half as i64)..=(half as i64) {
            ghat[(p + q + k as i64) as usize] += root_hat.coeff(p) * root_hat.coeff(q);
        }
    }
    let scale = 1.0 / (2.0 * PI * ghat[k].re);
    for c in ghat.iter_mut() {
        *c *= scale;
    }
    // Exact symmetry of the product.
    ghat[k].im = 0.0;
    for j in 1..=k {
        ghat[k - j] = ghat[k + j].conj();
    }
    debug_assert!(band <= k);

    let profile = DampingProfile {
        support: Support::Interval { a, b },
        k,
        ghat,
        delta,
    };
    let check_m = grid_m.max(4 * k + 1);
    let values = profile.grid_values(check_m)?;
    let max = values.values.iter().cloned().fold(0.0, f64::max);
    let min = values.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVITY_BUDGET * max.max(1.0) {
        return Err(Error::TruncationTooCoarse { min });
    }
    Ok(profile)
}

impl DampingProfile {
    pub fn support(&self) -> Support {
        self.support
    }

    /// Band limit `K` of `g`.
    pub fn band(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_global(&self) -> bool {
        matches!(self.support, Support::Global)
    }

    /// `ĝ(j)`, zero outside the band.
    pub fn ghat(&self, j: i64) -> Complex64 {
        if j.unsigned_abs() as usize > self.k {
            zero()
        } else {
            self.ghat[(j + self.k as i64) as usize]
        }
    }

    pub fn as_field(&self) -> SpectralField {
        SpectralField::from_coeffs_unchecked(self.k, self.ghat.clone())
    }

    pub fn grid_values(&self, m: usize) -> Result<GridField> {
        to_grid(&self.as_field(), m)
    }

    /// `d(k) = Σ_l |l|^δ |ĝ(l-k)|²` for `k ≠ 0`, and `d(0) = 0`.
    pub fn d_symbol(&self, k: i64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let kk = self.k as i64;
        (-kk..=kk)
            .map(|j| abs_pow(k + j, self.delta) * self.ghat(j).norm_sqr())
            .sum()
    }

    /// `d(k)` for `k = -n..=n`.
    pub fn d_table(&self, n: usize) -> Vec<f64> {
        let n = n as i64;
        (-n..=n).map(|k| self.d_symbol(k)).collect()
    }

    /// `∫ g φ dx = 2π Σ ĝ(-n) φ̂(n)`.
    pub fn pairing(&self, v: &SpectralField) -> Complex64 {
        let kk = self.k as i64;
        let sum: Complex64 = (-kk..=kk).map(|j| self.ghat(-j) * v.coeff(j)).sum();
        sum * (2.0 * PI)
    }

    /// Exact product `g · v`, cutoff `N + K`.
    pub fn multiply(&self, v: &SpectralField) -> SpectralField {
        let n = v.cutoff() as i64;
        let kk = self.k as i64;
        let out_n = (n + kk) as usize;
        let mut out = SpectralField::zeros(out_n);
        for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
            let k = i as i64 - out_n as i64;
            let lo = (k - kk).max(-n);
            let hi = (k + kk).min(n);
            for m in lo..=hi {
                *c += self.ghat(k - m) * v.coeff(m);
            }
        }
        out
    }
}

/// `G v = g(v - ∫ v g)`, cutoff `N + K`. The output has zero mean.
pub fn apply_g(p: &DampingProfile, v: &SpectralField) -> SpectralField {
    let pair = p.pairing(v);
    let mut out = p.multiply(v);
    let kk = p.band() as i64;
    for j in -kk..=kk {
        let c = out.coeff(j) - p.ghat(j) * pair;
        out.set_coeff(j, c);
    }
    out
}

pub fn apply_d_delta(p: &DampingProfile, v: &SpectralField) -> SpectralField {
    let delta = p.delta();
    apply_real_multiplier(v, |k| abs_pow(k, delta))
}

/// `G D^δ G v`, cutoff `N + 2K`.
pub fn apply_gdg(p: &DampingProfile, v: &SpectralField) -> SpectralField {
    apply_g(p, &apply_d_delta(p, &apply_g(p, v)))
}

/// `‖D^{δ/2} G v‖²_{L²}`.
pub fn dissipation(p: &DampingProfile, v: &SpectralField) -> f64 {
    let gv = apply_g(p, v);
    2.0 * PI
        * gv
            .wavenumbers()
            .map(|k| abs_pow(k, p.delta()) * gv.coeff(k).norm_sqr())
            .sum::<f64>()
}

/// Diagonal part `D̃^δ v`, with symbol `d(k)`; cutoff `N`.
pub fn apply_dtilde(p: &DampingProfile, v: &SpectralField) -> SpectralField {
    apply_real_multiplier(v, |k| p.d_symbol(k))
}

/// `N₁ v` by the defining double sum
/// `c(k) = Σ_l Σ_{n≠k} |l|^δ ĝ(k-l) ĝ(l-n) v̂(n)` for `k ≠ 0`; cutoff `N + 2K`.
pub fn apply_n1(p: &DampingProfile, v: &SpectralField) -> SpectralField {
    let n = v.cutoff() as i64;
    let kk = p.band() as i64;
    let out_n = (n + 2 * kk) as usize;
    let mut out = SpectralField::zeros(out_n);
    for k in -(out_n as i64)..=(out_n as i64) {
        if k == 0 {
            continue;
        }
        let mut acc = zero();
        for l in (k - kk)..=(k + kk) {
            let weight = abs_pow(l, p.delta());
            if weight == 0.0 {
                continue;
            }
            let mut inner = zero();
            for m in (l - kk).max(-n)..=(l + kk).min(n) {
                if m != k {
                    inner += p.ghat(l - m) * v.coeff(m);
                }
            }
            acc += p.ghat(k - l) * inner * weight;
        }
        out.set_coeff(k, acc);
    }
    out
}

/// The four mean-correction terms
/// `[g D^δ(gv)] - (∫gv) g D^δ g - (∫ g D^δ(gv)) g + (∫gv)(∫ g D^δ g) g`,
/// evaluated through Fourier pairings; cutoff `2K`.
pub fn apply_r(p: &DampingProfile, v: &SpectralField) -> SpectralField {
    let kk = p.band();
    let g = p.as_field();
    let dg = apply_d_delta(p, &g);
    let dgv = apply_d_delta(p, &p.multiply(v));

    let pair_v = p.pairing(v);
    let pair_dgv = p.pairing(&dgv);
    let pair_dg = p.pairing(&dg);
    let mean_term = pair_dgv / (2.0 * PI);
    let g_dg = p.multiply(&dg);

    let mut out = SpectralField::zeros(2 * kk);
    for k in out.wavenumbers().collect::<Vec<_>>() {
        let mut c = -pair_v * g_dg.coeff(k) + (pair_v * pair_dg - pair_dgv) * p.ghat(k);
        if k == 0 {
            c += mean_term;
        }
        out.set_coeff(k, c);
    }
    out
}

/// `‖G D^δ G v - (D̃^δ + N₁ + R) v‖ / ‖v‖`, over the full output band.
pub fn decomposition_residual(p: &DampingProfile, v: &SpectralField) -> f64 {
    let full = apply_gdg(p, v);
    let width = full.cutoff();
    let parts = &(&apply_dtilde(p, v).resized(width) + &apply_n1(p, v).resized(width))
        + &apply_r(p, v).resized(width);
    let norm = v.l2_norm();
    if norm == 0.0 {
        return (&full - &parts).l2_norm();
    }
    (&full - &parts).l2_norm() / norm
}

/// Verifies the split at tolerance `1e-10`, returning the residual.
pub fn check_decomposition(p: &DampingProfile, v: &SpectralField) -> Result<f64> {
    let res = decomposition_residual(p, v);
    if res > DECOMPOSITION_TOL {
        return Err(Error::DecompositionMismatch(res));
    }
    Ok(res)
}

/// `(min, max)` of `d(k)/⟨k⟩^δ` over `1 <= |k| <= n`.
pub fn lemma_d_equivalence(p: &DampingProfile, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::EmptyScan("symbol equivalence needs n >= 1".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 1..=n as i64 {
        for kk in [k, -k] {
            let ratio = p.d_symbol(kk) / bracket(kk as f64).powf(p.delta());
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    if lo <= 0.0 {
        return Err(Error::DegenerateProfile(lo));
    }
    Ok((lo, hi))
}

/// Matrix of `G` from modes `|n| <= n_cols` to modes `|l| <= n_rows`.
pub fn g_matrix(p: &DampingProfile, n_rows: usize, n_cols: usize) -> CMatrix {
    let (r, c) = (n_rows as i64, n_cols as i64);
    CMatrix::from_fn(2 * n_rows + 1, 2 * n_cols + 1, |i, j| {
        let l = i as i64 - r;
        let m = j as i64 - c;
        p.ghat(l - m) - p.ghat(l) * p.ghat(-m) * (2.0 * PI)
    })
}

/// Galerkin matrix of `G D^δ G` on `|k| <= n`: `P_N G D^δ G P_N`, with the
/// intermediate bands kept exact. Hermitian positive semidefinite; the
/// `k = 0` row and column vanish.
pub fn feedback_matrix(p: &DampingProfile, n: usize) -> CMatrix {
    let wide = n + p.band();
    let g = g_matrix(p, wide, n);
    let w = wide as i64;
    let mut weighted = g.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= Complex64::new(abs_pow(i as i64 - w, p.delta()), 0.0);
    }
    let b = g.adjoint() * weighted;
    (&b + b.adjoint()) * Complex64::new(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{grid_point, project_mean_zero, to_grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SpectralField::from_nonnegative_modes(rng.random_range(-1.0..1.0), &pos)
    }

    fn bump() -> DampingProfile {
        make_profile_bump(PI / 2.0, 1.5 * PI, 16, 256, 1.0).unwrap()
    }

    #[test]
    fn global_profile_symbol() {
        let p = make_profile_global(1.0);
        assert!((p.d_symbol(2) - 2.0 / (4.0 * PI * PI)).abs() < 1e-16);
        assert!((p.d_symbol(2) - 0.050660).abs() < 1e-6);
        for delta in [0.3, 0.5, 1.0] {
            let p = make_profile_global(delta);
            assert_eq!(p.d_symbol(0), 0.0);
            for k in 1..20 {
                assert_eq!(p.d_symbol(k), p.d_symbol(-k));
            }
        }
    }

    #[test]
    fn bump_is_normalized_and_nonnegative() {
        for (a, b) in [(0.0, 2.0 * PI), (PI / 2.0, 1.5 * PI), (1.0, 2.0)] {
            let p = make_profile_bump(a, b, 32, 512, 1.0).unwrap();
            assert_eq!(p.ghat(0).re, 1.0 / (2.0 * PI));
            let vals = p.grid_values(1024).unwrap();
            assert!(vals.values.iter().all(|&v| v >= -1e-10));
        }
    }

    #[test]
    fn bump_rejects_bad_support() {
        assert!(matches!(
            make_profile_bump(2.0, 1.0, 16, 64, 1.0),
            Err(Error::InvalidSupport { .. })
        ));
        assert!(make_profile_bump(0.0, 7.0, 16, 64, 1.0).is_err());
        assert!(make_profile_bump(0.0, 1.0, 1, 64, 1.0).is_err());
    }

    #[test]
    fn bump_translation_leaves_d_unchanged() {
        let p = make_profile_bump(0.0, PI, 32, 512, 1.0).unwrap();
        let q = make_profile_bump(PI, 2.0 * PI, 32, 512, 1.0).unwrap();
        for k in -100..=100 {
            assert!((p.d_symbol(k) - q.d_symbol(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn g_examples_for_global_profile() {
        let p = make_profile_global(1.0);
        let gv = apply_g(&p, &SpectralField::cosine(4, 1, 1.0));
        let expected = SpectralField::cosine(4, 1, 1.0 / (2.0 * PI));
        assert!((&gv - &expected).max_abs() < 1e-16);
        let gc = apply_g(&p, &SpectralField::constant(4, 2.5));
        assert!(gc.max_abs() < 1e-16);
    }

    #[test]
    fn g_matches_collocation() {
        let p = bump();
        let v = random_field(12, 4);
        let gv = apply_g(&p, &v);
        assert!(gv.coeff(0).norm() < 1e-12);
        let m = 256;
        let gvals = p.grid_values(m).unwrap();
        let vvals = to_grid(&v, m).unwrap();
        // Trapezoid rule is exact for the band-limited product g·v.
        let pairing: f64 = gvals
            .values
            .iter()
            .zip(&vvals.values)
            .map(|(g, v)| g * v)
            .sum::<f64>()
            * 2.0
            * PI
            / m as f64;
        let got = to_grid(&gv, m).unwrap();
        for j in 0..m {
            let want = gvals.values[j] * (vvals.values[j] - pairing);
            assert!((got.values[j] - want).abs() < 1e-10, "x = {}", grid_point(j, m));
        }
    }

    #[test]
    fn global_profile_decomposition_is_diagonal() {
        let p = make_profile_global(1.0);
        let v = project_mean_zero(&random_field(10, 5));
        assert!(apply_n1(&p, &v).max_abs() < 1e-12);
        assert!(apply_r(&p, &v).max_abs() < 1e-12);
        let full = apply_gdg(&p, &v);
        let dt = apply_dtilde(&p, &v);
        assert!((&full - &dt).max_abs() < 1e-12);
        let d_over = apply_real_multiplier(&v, |k| abs_pow(k, 1.0) / (4.0 * PI * PI));
        assert!((&dt - &d_over).max_abs() < 1e-15);
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let p = bump();
        let z = SpectralField::zeros(8);
        for out in [
            apply_gdg(&p, &z),
            apply_dtilde(&p, &z),
            apply_n1(&p, &z),
            apply_r(&p, &z),
        ] {
            assert_eq!(out.max_abs(), 0.0);
        }
    }

    #[test]
    fn decomposition_holds_for_bump() {
        let p = make_profile_bump(PI / 2.0, 1.5 * PI, 16, 256, 0.7).unwrap();
        let v = SpectralField::cosine(32, 3, 1.0);
        assert!(check_decomposition(&p, &v).unwrap() <= 1e-10);
        let w = random_field(20, 6);
        assert!(check_decomposition(&p, &w).unwrap() <= 1e-10);
    }

    #[test]
    fn d_equivalence_for_global_profile() {
        let p = make_profile_global(1.0);
        let (c, cc) = lemma_d_equivalence(&p, 200).unwrap();
        let scale = 1.0 / (4.0 * PI * PI);
        assert!((c - scale / 2f64.sqrt()).abs() < 1e-15);
        assert!(cc < scale && cc > scale * 0.9999);
        assert!(cc >= c);
    }

    #[test]
    fn feedback_matrix_matches_operator() {
        let p = bump();
        let n = 10;
        let b = feedback_matrix(&p, n);
        let v = random_field(n, 7);
        let x = crate::CVector::from_vec(v.coeffs().to_vec());
        let bx = &b * x;
        let direct = apply_gdg(&p, &v).resized(n);
        for (i, c) in direct.coeffs().iter().enumerate() {
            assert!((bx[i] - c).norm() < 1e-13);
        }
        assert!((&b - b.adjoint()).norm() < 1e-15);
    }

    #[test]
    fn profile_json_round_trip() {
        let p = bump();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"K\":16"));
        let back: DampingProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let broken = text.replace("\"delta\"", "\"delta_typo\"");
        assert!(serde_json::from_str::<DampingProfile>(&broken).is_err());
    }
}
