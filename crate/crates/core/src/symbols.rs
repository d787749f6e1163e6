//! Dispersive symbol `a(k)`, eigenvalues `λ_k = k a(k)` and brute-force
//! checks of the eigenvalue arithmetic: multiplicity classes, the spectral
//! gap, the three-wave resonance bound and the two-mode modulation bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{abs_pow, bracket};

/// Physical and feedback parameters of the damped equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
    pub r: f64,
    #[serde(default)]
    pub mu: f64,
    pub delta: f64,
}

impl ModelParams {
    /// Benjamin equation: `m = 1`, `r = 1/2`, unit coefficients, `δ = 1`.
    pub fn benjamin() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            m: 1.0,
            r: 0.5,
            mu: 0.0,
            delta: 1.0,
        }
    }

    pub fn new(alpha: f64, beta: f64, m: f64, r: f64, mu: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            m,
            r,
            mu,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        let all = [self.alpha, self.beta, self.m, self.r, self.mu, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite".into());
        }
        if self.alpha <= 0.0 {
            return fail(format!("alpha = {} must be positive (alpha > 0)", self.alpha));
        }
        if self.beta <= 0.0 {
            return fail(format!("beta = {} must be positive (beta > 0)", self.beta));
        }
        if self.m <= 0.5 {
            return fail(format!(
                "m = {} violates the standing dispersion assumption m > 1/2",
                self.m
            ));
        }
        if self.r <= 0.0 || self.r >= self.m {
            return fail(format!(
                "r = {} must satisfy 0 < r < m = {} (competing dispersion orders)",
                self.r, self.m
            ));
        }
        let floor = (2.0 - 2.0 * self.m).max(0.0);
        if self.delta <= floor || self.delta > 1.0 {
            return fail(format!(
                "delta = {} must satisfy max(0, 2-2m) = {floor} < delta <= 1 \
                 (well-posedness window of the damped equation)",
                self.delta
            ));
        }
        Ok(())
    }

    /// `a(k) = -β|k|^{2m} + α|k|^{2r} - 2μ`.
    pub fn symbol(&self, k: i64) -> f64 {
        -self.beta * abs_pow(k, 2.0 * self.m) + self.alpha * abs_pow(k, 2.0 * self.r)
            - 2.0 * self.mu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolTable {
    pub params: ModelParams,
    n: usize,
    a: Vec<f64>,
    lambda: Vec<f64>,
}

/// Tabulates `a(k)` and `λ_k` for `|k| <= n`. Each `λ_k` is evaluated once for
/// `k >= 0` and mirrored, so `λ_{-k} = -λ_k` holds bit-for-bit.
pub fn build_symbols(params: ModelParams, n: usize) -> SymbolTable {
    let len = 2 * n + 1;
    let mut a = vec![0.0; len];
    let mut lambda = vec![0.0; len];
    for k in 0..=n {
        let ak = params.symbol(k as i64);
        let lk = k as f64 * ak;
        a[n + k] = ak;
        a[n - k] = ak;
        lambda[n + k] = lk;
        lambda[n - k] = -lk;
    }
    lambda[n] = 0.0;
    SymbolTable {
        params,
        n,
        a,
        lambda,
    }
}

impl SymbolTable {
    pub fn cutoff(&self) -> usize {
        self.n
    }

    fn index(&self, k: i64) -> usize {
        assert!(
            k.unsigned_abs() as usize <= self.n,
            "wavenumber {k} outside table of cutoff {}",
            self.n
        );
        (k + self.n as i64) as usize
    }

    pub fn a(&self, k: i64) -> f64 {
        self.a[self.index(k)]
    }

    pub fn lambda(&self, k: i64) -> f64 {
        self.lambda[self.index(k)]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// Constant `C` in `|a(k)| <= C |k|^{2m}` for `k != 0`.
    pub fn growth_constant(&self) -> f64 {
        let p = &self.params;
        p.beta + p.alpha + 2.0 * p.mu.abs()
    }
}

/// One eigenvalue class `I(k₁) = {k : λ_k = λ_{k₁}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenClass {
    pub representative: i64,
    pub members: Vec<i64>,
    pub lambda: f64,
}

impl EigenClass {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub classes: Vec<EigenClass>,
    pub max_multiplicity: usize,
    /// Smallest `k*` with every `|k| >= k*` in a singleton class.
    pub simple_beyond: i64,
}

impl MultiplicityReport {
    /// One wavenumber per distinct eigenvalue.
    pub fn representatives(&self) -> Vec<i64> {
        self.classes.iter().map(|c| c.representative).collect()
    }

    pub fn class_of(&self, k: i64) -> Option<&EigenClass> {
        self.classes.iter().find(|c| c.members.contains(&k))
    }
}

/// Partitions `{-N..N}` into classes of equal eigenvalue.
///
/// With `tol = 0` grouping is by exact equality; otherwise sorted neighbours
/// within `tol` are chained into one class.
pub fn multiplicity_scan(table: &SymbolTable, tol: f64) -> Result<MultiplicityReport> {
    if tol < 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance {tol} < 0")));
    }
    let n = table.cutoff() as i64;
    let mut ks: Vec<i64> = (-n..=n).collect();
    ks.sort_by(|&x, &y| {
        table
            .lambda(x)
            .partial_cmp(&table.lambda(y))
            .expect("finite eigenvalues")
            .then(x.cmp(&y))
    });

    let mut groups: Vec<Vec<i64>> = Vec::new();
    for k in ks {
        let joins = groups.last().is_some_and(|g| {
            let prev = table.lambda(*g.last().unwrap());
            let cur = table.lambda(k);
            if tol == 0.0 {
                prev == cur
            } else {
                (cur - prev).abs() <= tol
            }
        });
        if joins {
            groups.last_mut().unwrap().push(k);
        } else {
            groups.push(vec![k]);
        }
    }

    let classes: Vec<EigenClass> = groups
        .into_iter()
        .map(|mut members| {
            members.sort_by_key(|&k| (k.abs(), -k));
            let representative = members[0];
            members.sort_unstable();
            EigenClass {
                representative,
                lambda: table.lambda(representative),
                members,
            }
        })
        .collect();

    let max_multiplicity = classes.iter().map(EigenClass::multiplicity).max().unwrap_or(0);
    let simple_beyond = classes
        .iter()
        .filter(|c| c.multiplicity() > 1)
        .flat_map(|c| c.members.iter().map(|k| k.abs() + 1))
        .max()
        .unwrap_or(0);

    if max_multiplicity > 5 {
        let worst = classes
            .iter()
            .max_by_key(|c| c.multiplicity())
            .expect("nonempty");
        return Err(Error::MultiplicityViolation {
            size: worst.multiplicity(),
            members: worst.members.clone(),
        });
    }

    Ok(MultiplicityReport {
        classes,
        max_multiplicity,
        simple_beyond,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub k: i64,
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// Smallest `k` from which every row passes, if any.
    pub threshold: Option<i64>,
}

impl GapReport {
    /// Whether the gaps increase strictly from the pass threshold on.
    pub fn gaps_increase_beyond_threshold(&self) -> bool {
        let Some(t) = self.threshold else {
            return false;
        };
        let tail: Vec<f64> = self.rows.iter().filter(|r| r.k >= t).map(|r| r.gap).collect();
        tail.windows(2).all(|w| w[1] > w[0])
    }
}

/// Rows `(k, λ_k - λ_{k+1}, α(m-r)k^{2r}, pass)` for `k ∈ [k_min, N-1]`.
pub fn gap_check(table: &SymbolTable, k_min: i64) -> Result<GapReport> {
    let n = table.cutoff() as i64;
    if k_min < 1 || k_min >= n {
        return Err(Error::EmptyScan(format!(
            "gap scan needs 1 <= k_min < N, got k_min = {k_min}, N = {n}"
        )));
    }
    let p = table.params;
    let rows: Vec<GapRow> = (k_min..n)
        .map(|k| {
            let gap = table.lambda(k) - table.lambda(k + 1);
            let bound = p.alpha * (p.m - p.r) * (k as f64).powf(2.0 * p.r);
            GapRow {
                k,
                gap,
                bound,
                pass: gap > bound,
            }
        })
        .collect();
    let threshold = match rows.iter().rposition(|r| !r.pass) {
        None => Some(k_min),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].k),
        Some(_) => None,
    };
    Ok(GapReport { rows, threshold })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub min_ratio: f64,
    pub witness: [i64; 3],
    pub triples: u64,
}

fn resonance_ratio(table: &SymbolTable, k: [i64; 3]) -> f64 {
    let sum: f64 = k.iter().map(|&kj| table.lambda(kj)).sum();
    let kmax = k.iter().map(|x| x.abs()).max().unwrap() as f64;
    let kmin = k.iter().map(|x| x.abs()).min().unwrap() as f64;
    sum.abs() / (kmax.powf(2.0 * table.params.m) * kmin)
}

/// Ratio for one triple; exposed for spot checks.
pub fn resonance_ratio_of(table: &SymbolTable, k: [i64; 3]) -> f64 {
    resonance_ratio(table, k)
}

/// Minimum of `|λ_{k₁}+λ_{k₂}+λ_{k₃}| / (max|k_j|^{2m} min|k_j|)` over triples
/// with `k₁+k₂+k₃ = 0`, `k₁k₂k₃ ≠ 0` and `a_threshold <= max|k_j| <= n_max`.
pub fn resonance_check(
    table: &SymbolTable,
    n_max: i64,
    a_threshold: i64,
) -> Result<ResonanceReport> {
    if n_max as usize > table.cutoff() || n_max < 2 || a_threshold > n_max {
        return Err(Error::EmptyScan(format!(
            "resonance scan over max|k| in [{a_threshold}, {n_max}] with table cutoff {}",
            table.cutoff()
        )));
    }
    let best = (-n_max..=n_max)
        .into_par_iter()
        .filter(|&k1| k1 != 0)
        .map(|k1| {
            let mut local: Option<ResonanceReport> = None;
            let mut count = 0u64;
            for k2 in -n_max..=n_max {
                let k3 = -k1 - k2;
                if k2 == 0 || k3 == 0 || k3.abs() > n_max {
                    continue;
                }
                let kmax = k1.abs().max(k2.abs()).max(k3.abs());
                if kmax < a_threshold {
                    continue;
                }
                count += 1;
                let ratio = resonance_ratio(table, [k1, k2, k3]);
                if local.is_none_or(|r| ratio < r.min_ratio) {
                    local = Some(ResonanceReport {
                        min_ratio: ratio,
                        witness: [k1, k2, k3],
                        triples: 0,
                    });
                }
            }
            (local, count)
        })
        .reduce(
            || (None, 0),
            |(a, ca), (b, cb)| {
                let pick = match (a, b) {
                    (Some(x), Some(y)) => Some(if y.min_ratio < x.min_ratio { y } else { x }),
                    (x, None) => x,
                    (None, y) => y,
                };
                (pick, ca + cb)
            },
        );
    match best {
        (Some(mut r), count) => {
            r.triples = count;
            Ok(r)
        }
        (None, _) => Err(Error::EmptyScan("no admissible triples".into())),
    }
}

/// Smallest threshold `a` for which the resonance minimum over
/// `a <= max|k_j| <= n_max` is strictly positive.
pub fn resonance_threshold(table: &SymbolTable, n_max: i64) -> Result<i64> {
    for a in 2..=n_max {
        let report = resonance_check(table, n_max, a)?;
        if report.min_ratio > 0.0 {
            return Ok(a);
        }
    }
    Err(Error::EmptyScan(format!(
        "no threshold up to {n_max} gives a positive resonance bound"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationReport {
    pub min_ratio: f64,
    pub witness: [i64; 2],
    pub pairs: u64,
}

/// Closed-form `min_τ max{⟨(τ-λ_k)/⟨k⟩^δ⟩, ⟨(τ-λ_n)/⟨n⟩^δ⟩}`: the optimal τ
/// equalises the two weighted distances.
pub fn modulation_minmax(table: &SymbolTable, k: i64, n: i64) -> f64 {
    let d = table.params.delta;
    let wk = bracket(k as f64).powf(d);
    let wn = bracket(n as f64).powf(d);
    bracket((table.lambda(k) - table.lambda(n)).abs() / (wk + wn))
}

/// Minimum over pairs `k ≠ n` with `floor <= |k|,|n| <= n_max` and
/// `|k|/|n| ∈ [1/window, window]` of the modulation min-max divided by
/// `max{⟨k⟩,⟨n⟩}^{2m-δ}`.
pub fn modulation_check(
    table: &SymbolTable,
    n_max: i64,
    floor: i64,
    window: f64,
) -> Result<ModulationReport> {
    if n_max as usize > table.cutoff() || floor < 1 || floor > n_max || window < 1.0 {
        return Err(Error::EmptyScan(format!(
            "modulation scan over [{floor}, {n_max}] with window {window}"
        )));
    }
    let p = table.params;
    let mut best: Option<ModulationReport> = None;
    let mut pairs = 0;
    let range: Vec<i64> = (-n_max..=n_max).filter(|k| k.abs() >= floor).collect();
    for &k in &range {
        for &n in &range {
            if k == n {
                continue;
            }
            let ratio = k.abs() as f64 / n.abs() as f64;
            if ratio < 1.0 / window || ratio > window {
                continue;
            }
            pairs += 1;
            let kmax = bracket(k as f64).max(bracket(n as f64));
            let value = modulation_minmax(table, k, n) / kmax.powf(2.0 * p.m - p.delta);
            if best.is_none_or(|b| value < b.min_ratio) {
                best = Some(ModulationReport {
                    min_ratio: value,
                    witness: [k, n],
                    pairs: 0,
                });
            }
        }
    }
    let mut report = best.ok_or_else(|| Error::EmptyScan("no admissible pairs".into()))?;
    report.pairs = pairs;
    Ok(report)
}
