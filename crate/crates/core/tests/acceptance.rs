//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use dgb::control::{
    biorthogonal_family, linear_control_gramian, nonlinear_control_global, observability_constant,
    ControlProblem, NonlinearControlOptions,
};
use dgb::damping::{
    apply_gdg, decomposition_residual, dissipation, lemma_d_equivalence, make_profile_bump,
    make_profile_global, DampingProfile,
};
use dgb::dynamics::{
    build_closed_loop, decay_fit, decay_fit_series, linear_trajectory, semigroup_apply, simulate,
    GalerkinModel, SimulationOptions,
};
use dgb::io::{parse_config, run};
use dgb::spectral::SpectralField;
use dgb::symbols::{
    build_symbols, gap_check, multiplicity_scan, resonance_check, resonance_threshold, ModelParams,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bump() -> DampingProfile {
    make_profile_bump(PI / 2.0, 1.5 * PI, 16, 256, 1.0).unwrap()
}

fn random_field(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> SpectralField {
    let pos: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    SpectralField::from_nonnegative_modes(mean, &pos)
}

fn non_increasing(norms: &[f64]) -> bool {
    norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

fn c1_decomposition() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let profiles = [make_profile_global(1.0), bump()];
    let mut worst = [0.0f64; 2];
    for _ in 0..100 {
        let v = random_field(&mut rng, 64, 0.0);
        for (w, p) in worst.iter_mut().zip(&profiles) {
            *w = w.max(decomposition_residual(p, &v));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.iter().all(|&w| w <= 1e-10) && secs < 10.0,
        format!("max residual global {:.2e}, bump {:.2e}; {secs:.2} s", worst[0], worst[1]),
    )
}

fn c2_dissipativity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let table = build_symbols(ModelParams::benjamin(), 16);
    let mut identity: f64 = 0.0;
    let mut monotone = true;
    for p in [make_profile_global(1.0), bump()] {
        for _ in 0..20 {
            let v = random_field(&mut rng, 16, 0.0);
            let lhs = apply_gdg(&p, &v).inner(&v);
            identity = identity.max((lhs - dissipation(&p, &v)).abs() / v.l2_norm().powi(2));
        }
        let lp = build_closed_loop(&table, &p, 16).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let v = random_field(&mut rng, 16, 0.4);
            let s: Vec<f64> = (0..=100)
                .map(|j| semigroup_apply(&table, &p, &v, 0.1 * j as f64).unwrap().l2_norm())
                .collect();
            let w = linear_trajectory(&lp, &v, 0.1, 100).map_err(|e| e.to_string())?;
            monotone &= non_increasing(&s) && non_increasing(&w.l2norms);
        }
    }
    check(
        identity <= 1e-12 && monotone,
        format!("identity defect {identity:.2e}; S and W non-increasing on [0,10]: {monotone}"),
    )
}

fn c3_symbol() -> Outcome {
    let (lo, hi) = lemma_d_equivalence(&bump(), 256).map_err(|e| e.to_string())?;
    let mut global: f64 = 0.0;
    for delta in [0.25, 0.5, 1.0] {
        let p = make_profile_global(delta);
        for k in -256i64..=256 {
            let exact = (k.abs() as f64).powf(delta) / (4.0 * PI * PI);
            global = global.max((p.d_symbol(k) - exact).abs() / exact.max(1.0));
        }
    }
    check(
        lo > 0.0 && hi.is_finite() && global <= 1e-14,
        format!("bump c = {lo:.6e}, C = {hi:.6e}; global closed-form defect {global:.2e}"),
    )
}

fn c4_eigen() -> Outcome {
    let table = build_symbols(ModelParams::benjamin(), 200);
    let mult = multiplicity_scan(&table, 0.0).map_err(|e| e.to_string())?;
    let zero = mult.class_of(0).map(|c| c.members.clone()).unwrap_or_default();
    let gaps = gap_check(&table, 1).map_err(|e| e.to_string())?;
    let threshold = gaps.threshold.unwrap_or(i64::MAX);

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut sweep_max = 0;
    for _ in 0..50 {
        let m: f64 = rng.random_range(0.6..2.0);
        let r = rng.random_range(0.05..0.95) * m;
        let floor = (2.0 - 2.0 * m).max(0.0);
        let delta = floor + rng.random_range(0.05..1.0) * (1.0 - floor);
        let params = ModelParams::new(
            rng.random_range(0.2..3.0),
            rng.random_range(0.2..3.0),
            m,
            r,
            rng.random_range(-1.0..1.0),
            delta,
        )
        .map_err(|e| e.to_string())?;
        let t = build_symbols(params, 200);
        let rep = multiplicity_scan(&t, 0.0).map_err(|e| e.to_string())?;
        sweep_max = sweep_max.max(rep.max_multiplicity);
    }
    check(
        zero == vec![-1, 0, 1]
            && sweep_max <= 5
            && threshold <= 5
            && gaps.gaps_increase_beyond_threshold(),
        format!(
            "zero class {zero:?}; Benjamin max multiplicity {}; sweep max {sweep_max}; \
             gap threshold {threshold}",
            mult.max_multiplicity
        ),
    )
}

/// Minimum resonance ratios recorded from a reference run.
const RESONANCE_BASELINE: [f64; 3] = [1.0, 8.357_864_376_269_049e-1, 1.956_967_420_973_315];

fn c5_resonance() -> Outcome {
    let sets = [
        ModelParams::benjamin(),
        ModelParams::new(2.0, 1.0, 1.5, 0.75, 0.0, 1.0).unwrap(),
        ModelParams::new(0.7, 1.3, 1.25, 0.4, 0.3, 0.8).unwrap(),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (params, baseline) in sets.into_iter().zip(RESONANCE_BASELINE) {
        let table = build_symbols(params, 64);
        let a = resonance_threshold(&table, 64).map_err(|e| e.to_string())?;
        let rep = resonance_check(&table, 64, a).map_err(|e| e.to_string())?;
        let regress = (rep.min_ratio - baseline).abs() <= 1e-12 * baseline;
        ok &= rep.min_ratio > 0.0 && regress;
        parts.push(format!("a = {a}, minRatio = {:.17e}", rep.min_ratio));
    }
    check(ok, parts.join("; "))
}

fn energy_run(p: &DampingProfile, dt: f64, every: usize) -> Result<f64, String> {
    let table = build_symbols(ModelParams::benjamin(), 64);
    let model = GalerkinModel::damped(&table, p, 64).map_err(|e| e.to_string())?;
    let v0 = SpectralField::cosine(64, 1, 0.1);
    let opts = SimulationOptions::new(2.0, dt).record_every(every);
    let rec = simulate(&model, &v0, opts, None).map_err(|e| e.to_string())?;
    Ok(rec.max_energy_residual())
}

fn c6_energy() -> Outcome {
    let start = Instant::now();
    let p = bump();
    let coarse = energy_run(&p, 1e-4, 10)?;
    let fine = energy_run(&p, 5e-5, 10)?;
    let secs = start.elapsed().as_secs_f64();
    let global = energy_run(&make_profile_global(1.0), 1e-4, 10)?;
    check(
        coarse <= 1e-6 && coarse / fine >= 8.0 && secs < 60.0,
        format!(
            "bump residual {coarse:.3e} -> {fine:.3e} (ratio {:.1}); {secs:.1} s; \
             global residual {global:.1e} (roundoff floor)",
            coarse / fine
        ),
    )
}

fn c7_mean() -> Outcome {
    let table = build_symbols(ModelParams::benjamin(), 32);
    let model = GalerkinModel::damped(&table, &bump(), 32).map_err(|e| e.to_string())?;
    let mut u0 = SpectralField::cosine(32, 1, 0.1);
    u0.set_coeff(0, Complex64::new(0.3, 0.0));
    let opts = SimulationOptions::new(5.0, 1e-3).record_every(10);
    let rec = simulate(&model, &u0, opts, None).map_err(|e| e.to_string())?;
    let drift = rec.means.iter().map(|m| (m - 0.3).abs()).fold(0.0, f64::max);
    check(drift <= 1e-10, format!("max |[u(t)] - 0.3| = {drift:.2e} over T = 5"))
}

fn c8_linear_rate() -> Outcome {
    let table = build_symbols(ModelParams::benjamin(), 16);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let v0 = random_field(&mut rng, 16, 0.0);

    let global = build_closed_loop(&table, &make_profile_global(1.0), 16).map_err(|e| e.to_string())?;
    let rec = linear_trajectory(&global, &v0, 0.5, 1200).map_err(|e| e.to_string())?;
    let fit_g = decay_fit(&rec, (300.0, 600.0)).map_err(|e| e.to_string())?;
    let exact = 1.0 / (4.0 * PI * PI);
    let err_g = (fit_g.lambda - exact).abs() / exact;

    let lp = build_closed_loop(&table, &bump(), 16).map_err(|e| e.to_string())?;
    let rec = linear_trajectory(&lp, &v0, 0.5, 600).map_err(|e| e.to_string())?;
    let fit_b = decay_fit(&rec, (100.0, 300.0)).map_err(|e| e.to_string())?;
    let err_b = (fit_b.lambda + lp.spectral_abscissa).abs() / lp.spectral_abscissa.abs();

    let mut worst_abscissa = f64::NEG_INFINITY;
    for delta in [0.5, 1.0] {
        let params = ModelParams { delta, ..ModelParams::benjamin() };
        for n in [8, 16, 32] {
            let t = build_symbols(params, n);
            for p in [
                make_profile_global(delta),
                make_profile_bump(PI / 2.0, 1.5 * PI, 16, 256, delta).unwrap(),
                make_profile_bump(0.0, PI / 2.0, 8, 256, delta).unwrap(),
            ] {
                let lp = build_closed_loop(&t, &p, n).map_err(|e| e.to_string())?;
                worst_abscissa = worst_abscissa.max(lp.spectral_abscissa);
            }
        }
    }
    check(
        err_g <= 0.01 && err_b <= 0.1 && worst_abscissa < 0.0,
        format!(
            "global rate {:.10e} (rel. err {err_g:.1e}); bump rate {:.10e} vs abscissa {:.10e} \
             (rel. err {err_b:.1e}); largest abscissa over 18 configs {worst_abscissa:.3e}",
            fit_g.lambda, fit_b.lambda, lp.spectral_abscissa
        ),
    )
}

struct LocalRun {
    amplitude: f64,
    rate: f64,
    r_squared: f64,
    monotone: bool,
}

fn local_run(amplitude: f64) -> Option<LocalRun> {
    let table = build_symbols(ModelParams::benjamin(), 32);
    let model = GalerkinModel::damped(&table, &bump(), 32).ok()?;
    let v0 = SpectralField::cosine(32, 1, amplitude);
    let opts = SimulationOptions::new(100.0, 2e-3).record_every(250);
    let rec = simulate(&model, &v0, opts, None).ok()?;
    let norm0 = rec.fluctuation_norms[0];
    let fit = decay_fit_series(&rec.times, &rec.fluctuation_norms, norm0, (20.0, 100.0)).ok()?;
    Some(LocalRun {
        amplitude,
        rate: fit.lambda,
        r_squared: fit.r_squared,
        monotone: non_increasing(&rec.l2norms),
    })
}

fn c9_local() -> Outcome {
    let table = build_symbols(ModelParams::benjamin(), 32);
    let linear = -build_closed_loop(&table, &bump(), 32).map_err(|e| e.to_string())?.spectral_abscissa;
    let ladder = [1e-3, 1e-2, 1e-1, 0.2, 0.5, 1.0];
    let runs: Vec<Option<LocalRun>> = ladder.par_iter().map(|&a| local_run(a)).collect();
    let decays = |r: &LocalRun| r.monotone && r.r_squared >= 0.99 && r.rate > 0.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs.iter().take(3) {
        match run {
            Some(r) => {
                ok &= decays(r);
                parts.push(format!("a={:.0e}: rate {:.6e}, r2 {:.6}", r.amplitude, r.rate, r.r_squared));
            }
            None => ok = false,
        }
    }
    let smallest = runs[0].as_ref().map_or(0.0, |r| r.rate);
    ok &= smallest >= 0.9 * linear;
    let radius = runs
        .iter()
        .take_while(|r| r.as_ref().is_some_and(|r| decays(r) && r.rate >= 0.9 * linear))
        .last()
        .and_then(|r| r.as_ref().map(|r| r.amplitude));
    parts.push(format!(
        "linear rate {linear:.6e}; empirical radius {}",
        radius.map_or("none".into(), |a| format!("{a}"))
    ));
    check(ok, parts.join("; "))
}

fn per_mode_oracle(
    params: ModelParams,
    p: &DampingProfile,
    v0: &SpectralField,
    v1: &SpectralField,
    horizon: f64,
    k: i64,
    t: f64,
) -> Complex64 {
    let table = build_symbols(params, v0.cutoff());
    let a = Complex64::new(-p.d_symbol(k), table.lambda(k));
    let b = 1.0 / (2.0 * PI);
    let gram = b * b * ((2.0 * a.re * horizon).exp() - 1.0) / (2.0 * a.re);
    let xi = (v1.coeff(k) - (a * horizon).exp() * v0.coeff(k)) / gram;
    b * (a.conj() * (horizon - t)).exp() * xi
}

fn c10_linear_control() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let v0 = random_field(&mut rng, 16, 0.0).scaled(0.1);
    let v1 = random_field(&mut rng, 16, 0.0).scaled(0.1);
    let params = ModelParams::benjamin();
    let problem = ControlProblem::new(params, bump(), 16, 1.0, v0.clone(), v1.clone());
    let sol = linear_control_gramian(&problem).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();

    let global = make_profile_global(1.0);
    let mut gp = ControlProblem::new(params, global.clone(), 16, 1.0, v0.clone(), v1.clone());
    gp.cert_dt = 1e-4;
    let gsol = linear_control_gramian(&gp).map_err(|e| e.to_string())?;
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (&t, h) in gsol.times.iter().zip(&gsol.h) {
        for k in (-16i64..=16).filter(|&k| k != 0) {
            let exact = per_mode_oracle(params, &global, &v0, &v1, 1.0, k, t);
            defect = defect.max((h.coeff(k) - exact).norm());
            scale = scale.max(exact.norm());
        }
    }
    let rel = defect / scale;
    check(
        sol.terminal_error <= 1e-6 && secs < 120.0 && rel <= 1e-8,
        format!(
            "bump terminalError {:.3e} in {secs:.1} s (Gramian cond. {:.1}); \
             global per-mode defect {rel:.2e}",
            sol.terminal_error, sol.gramian_condition
        ),
    )
}

fn c11_nonlinear_control() -> Outcome {
    let profile = make_profile_global(1.0);
    let opts = NonlinearControlOptions {
        tolerance: f64::INFINITY,
        ..Default::default()
    };
    let errors: Vec<(usize, f64)> = [2usize, 4, 64, 128]
        .par_iter()
        .map(|&n| {
            let u0 = SpectralField::cosine(n, 1, 0.05);
            let u1 = SpectralField::cosine(n, 2, 0.05);
            let err = nonlinear_control_global(ModelParams::benjamin(), &profile, n, 1.0, &u0, &u1, &opts)
                .map_or(f64::INFINITY, |s| s.terminal_error);
            (n, err)
        })
        .collect();
    let e = |n| errors.iter().find(|(m, _)| *m == n).map_or(f64::INFINITY, |x| x.1);
    let ok = e(64) <= 1e-6 && e(4) < e(2) && e(128) <= e(64).max(1e-9);
    let list: Vec<String> = errors.iter().map(|(n, err)| format!("N={n}: {err:.3e}")).collect();
    check(ok, list.join(", "))
}

fn c12_observability() -> Outcome {
    let table = build_symbols(ModelParams::benjamin(), 16);
    let b = observability_constant(&table, &bump(), 1.0, 16).map_err(|e| e.to_string())?;
    let g = observability_constant(&table, &make_profile_global(1.0), 1.0, 16)
        .map_err(|e| e.to_string())?;
    let d1 = 1.0 / (4.0 * PI * PI);
    let exact = 2.0 / (1.0 - (-2.0 * d1).exp());
    let rel = (g.cobs - exact).abs() / exact;
    let finite = |c: f64| c.is_finite() && c > 2.0;
    check(
        finite(b.cobs) && finite(g.cobs) && b.certificate_holds && g.certificate_holds && rel <= 1e-8,
        format!(
            "bump Cobs {:.6e} (|W v*|^2 {:.12} <= {:.12}); global Cobs {:.12e} vs {exact:.12e}",
            b.cobs, b.terminal_energy, b.rho, g.cobs
        ),
    )
}

fn c13_biorthogonal() -> Outcome {
    let table = build_symbols(ModelParams::benjamin(), 8);
    let modes = [2, 3, 4, 5, 6];
    let fam = biorthogonal_family(&table, &modes, 1.0).map_err(|e| e.to_string())?;
    let defect = fam.max_pairing_defect();
    check(
        defect <= 1e-8,
        format!("modes {modes:?}, pairing defect {defect:.2e}, cond {:.2e}", fam.condition),
    )
}

fn scalars(summary: &std::collections::BTreeMap<String, Value>) -> Vec<(String, Value)> {
    summary.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
}

fn same(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y || (x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

fn c14_determinism() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let results: Vec<Result<String, String>> = paths
        .par_iter()
        .map(|path| {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
            let config = parse_config(&text, &[]).map_err(|e| e.to_string())?;
            let a = run(&config, &tmp.path().join(format!("{name}-a"))).map_err(|e| e.to_string())?;
            let b = run(&config, &tmp.path().join(format!("{name}-b"))).map_err(|e| e.to_string())?;
            let (sa, sb) = (scalars(&a.summary), scalars(&b.summary));
            let equal = sa.len() == sb.len()
                && sa.iter().zip(&sb).all(|((ka, va), (kb, vb))| ka == kb && same(va, vb));
            if equal && a.run_id == b.run_id {
                Ok(name)
            } else {
                Err(format!("{name} differs"))
            }
        })
        .collect();
    let failed: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    check(
        failed.is_empty() && !results.is_empty(),
        if failed.is_empty() {
            format!("{} configs reproduce their summaries", results.len())
        } else {
            format!("{failed:?}")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("decomposition identity", c1_decomposition),
        ("dissipativity and contraction", c2_dissipativity),
        ("symbol equivalence", c3_symbol),
        ("eigenvalue structure", c4_eigen),
        ("resonance bound", c5_resonance),
        ("energy identity", c6_energy),
        ("mean invariance", c7_mean),
        ("linear decay rate", c8_linear_rate),
        ("nonlinear local stabilization", c9_local),
        ("linear exact control", c10_linear_control),
        ("nonlinear exact control", c11_nonlinear_control),
        ("observability", c12_observability),
        ("biorthogonality", c13_biorthogonal),
        ("determinism", c14_determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} [{secs:6.1} s] {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
