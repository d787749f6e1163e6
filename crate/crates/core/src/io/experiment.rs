//! Experiment dispatch: each run writes its artifacts into one directory
//! and finishes with an atomically written `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::control::{
    estimate_nu, decay_rate_predict, linear_control_gramian, minimum_control_norm,
    nonlinear_control_global, observability_constant, ControlProblem, ControlSolution,
    NonlinearControlOptions,
};
use crate::damping::{lemma_d_equivalence, DampingProfile};
use crate::dynamics::{build_closed_loop, decay_fit, simulate, GalerkinModel, SimulationOptions, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::io::config::{Experiment, Form, RunConfig};
use crate::io::report::{
    fmt_float, write_control, write_json_atomic, write_records, write_state, write_table,
    write_trajectory,
};
use crate::spectral::{bracket, mean, project_mean_zero};
use crate::symbols::{
    build_symbols, gap_check, modulation_check, multiplicity_scan, resonance_check,
    resonance_threshold,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub config: RunConfig,
    pub summary: BTreeMap<String, Value>,
}

type Summary = BTreeMap<String, Value>;

/// Hash of the configuration echo and code version.
pub fn run_id(config: &RunConfig) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(config)?.as_bytes());
    hasher.update(VERSION.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// Runs the configured experiment, writing artifacts into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunManifest> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let profile = config.profile()?;
    write_json_atomic(&out.join("profile.json"), &profile)?;
    let summary = match config.experiment {
        Experiment::Simulate => run_simulate(config, &profile, out, false)?,
        Experiment::Stabilize => run_simulate(config, &profile, out, true)?,
        Experiment::ControlLinear => run_control_linear(config, &profile, out)?,
        Experiment::ControlNonlinear => run_control_nonlinear(config, &profile, out)?,
        Experiment::Observability => run_observability(config, &profile, out)?,
        Experiment::Lemmas => run_lemmas(config, &profile, out)?,
    };
    let manifest = RunManifest {
        run_id: run_id(config)?,
        version: VERSION.to_string(),
        experiment: config.experiment.name().to_string(),
        seed: config.seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
        summary,
    };
    write_json_atomic(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Runs independent configurations in parallel, each into `root/<name>`.
pub fn run_sweep(configs: &[(String, RunConfig)], root: &Path) -> Vec<(String, Result<RunManifest>)> {
    configs
        .par_iter()
        .map(|(name, config)| {
            let dir: PathBuf = root.join(name);
            (name.clone(), run(config, &dir))
        })
        .collect()
}

fn num(x: f64) -> Value {
    json!(x)
}

fn run_simulate(
    config: &RunConfig,
    profile: &DampingProfile,
    out: &Path,
    stabilize: bool,
) -> Result<Summary> {
    let d = &config.discretization;
    let n = d.n;
    let u0 = config.initial.build(n, config.seed, 0)?;
    let offset = mean(&u0);
    let (params, v0) = match d.form {
        Form::Shifted => (config.params.with_mu(config.params.mu + offset), project_mean_zero(&u0)),
        Form::Raw => (config.params, u0.clone()),
    };
    let table = build_symbols(params, n);
    let mut model = GalerkinModel::damped(&table, profile, n)?;
    if !d.nonlinear {
        model = model.linearized();
    }
    let mut opts = SimulationOptions::new(d.t, d.dt).record_every(d.record_every);
    if let Some(tol) = config.stabilize.energy_tol {
        opts = opts.energy_tol(tol);
    }
    let record = simulate(&model, &v0, opts, None)?;
    write_trajectory(&out.join("trajectory.csv"), &record)?;
    write_state(&out.join("state_initial.json"), 0.0, &v0, Some("initial"))?;
    if let Some(last) = record.last_state() {
        write_state(&out.join("state_final.json"), d.t, last, Some("final"))?;
    }

    let mut s = trajectory_summary(&record, offset);
    if stabilize {
        let window = config
            .stabilize
            .fit_window
            .map(|[a, b]| (a, b))
            .unwrap_or((d.t / 5.0, d.t));
        let fit = decay_fit(&record, window)?;
        let lp = build_closed_loop(&table, profile, n)?;
        let abscissa = lp.spectral_abscissa;
        s.insert("decayRate".into(), num(fit.lambda));
        s.insert("prefactorM".into(), num(fit.m));
        s.insert("rSquared".into(), num(fit.r_squared));
        s.insert("fitWindowStart".into(), num(fit.window.0));
        s.insert("fitWindowEnd".into(), num(fit.window.1));
        s.insert("fitTruncated".into(), json!(fit.truncated));
        s.insert("spectralAbscissa".into(), num(abscissa));
        s.insert("rateOverAbscissa".into(), num(fit.lambda / -abscissa));
    }
    Ok(s)
}

fn trajectory_summary(record: &TrajectoryRecord, offset: f64) -> Summary {
    let mut s = Summary::new();
    let m0 = record.means.first().copied().unwrap_or(0.0);
    let drift = record.means.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max);
    let monotone = record
        .l2norms
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-10));
    s.insert("initialL2norm".into(), num(record.l2norms[0]));
    s.insert("finalL2norm".into(), num(*record.l2norms.last().unwrap()));
    s.insert("maxEnergyResidual".into(), num(record.max_energy_residual()));
    s.insert("meanDrift".into(), num(drift));
    s.insert("meanOffset".into(), num(offset));
    s.insert("normsNonIncreasing".into(), json!(monotone));
    s.insert("dtUsed".into(), num(record.meta.dt));
    s.insert("halvings".into(), json!(record.meta.halvings));
    s.insert("samples".into(), json!(record.len()));
    s
}

fn control_summary(sol: &ControlSolution) -> Summary {
    let mut s = Summary::new();
    s.insert("terminalError".into(), num(sol.terminal_error));
    s.insert("controlNorm".into(), num(sol.control_norm));
    s.insert("method".into(), serde_json::to_value(sol.method).unwrap_or(Value::Null));
    s.insert("gramianCondition".into(), num(sol.gramian_condition));
    s
}

fn target(config: &RunConfig) -> Result<crate::spectral::SpectralField> {
    config
        .target
        .as_ref()
        .ok_or_else(|| Error::Config("control experiments need a [target] table".into()))?
        .build(config.discretization.n, config.seed, 1)
}

fn run_control_linear(config: &RunConfig, profile: &DampingProfile, out: &Path) -> Result<Summary> {
    let d = &config.discretization;
    let c = &config.control;
    let mut problem = ControlProblem::new(
        config.params,
        profile.clone(),
        d.n,
        d.t,
        config.initial.build(d.n, config.seed, 0)?,
        target(config)?,
    );
    problem.plant = c.plant;
    problem.s = c.s;
    problem.cert_dt = c.cert_dt.unwrap_or(d.dt);
    problem.samples = c.samples;
    let sol = linear_control_gramian(&problem)?;
    write_control(&out.join("control.csv"), &sol)?;
    write_state(&out.join("state_final.json"), d.t, &sol.final_state, Some("final"))?;
    let mut s = control_summary(&sol);
    if c.s == 0.0 {
        s.insert("controlNormGramian".into(), num(minimum_control_norm(&problem)?));
    }
    if c.nu_pairs > 0 {
        s.insert("nuEstimate".into(), num(estimate_nu(&problem, c.nu_pairs, config.seed)?));
    }
    s.insert("withinTolerance".into(), json!(sol.terminal_error <= c.tolerance));
    Ok(s)
}

fn run_control_nonlinear(
    config: &RunConfig,
    profile: &DampingProfile,
    out: &Path,
) -> Result<Summary> {
    let d = &config.discretization;
    let c = &config.control;
    let opts = NonlinearControlOptions {
        cert_dt: c.cert_dt.unwrap_or(d.dt),
        resolution_factor: c.resolution_factor,
        tolerance: c.tolerance,
        samples: c.samples,
        s: c.s,
    };
    let u0 = config.initial.build(d.n, config.seed, 0)?;
    let u1 = target(config)?;
    let sol = nonlinear_control_global(config.params, profile, d.n, d.t, &u0, &u1, &opts)?;
    write_control(&out.join("control.csv"), &sol)?;
    write_state(&out.join("state_final.json"), d.t, &sol.final_state, Some("final"))?;
    Ok(control_summary(&sol))
}

fn run_observability(config: &RunConfig, profile: &DampingProfile, out: &Path) -> Result<Summary> {
    let d = &config.discretization;
    let table = build_symbols(config.params, d.n);
    let rep = observability_constant(&table, profile, d.t, d.n)?;
    let pred = decay_rate_predict(&table, profile, d.t, d.n)?;
    write_state(&out.join("worst_mode.json"), 0.0, &rep.worst_mode, Some("worst"))?;
    let mut s = Summary::new();
    s.insert("cobs".into(), num(rep.cobs));
    s.insert("lambdaMin".into(), num(rep.lambda_min));
    s.insert("rho".into(), num(rep.rho));
    s.insert("terminalEnergy".into(), num(rep.terminal_energy));
    s.insert("certificateHolds".into(), json!(rep.certificate_holds));
    s.insert("gammaGramian".into(), num(pred.gamma_gramian));
    s.insert("gammaAbscissa".into(), num(pred.gamma_abscissa));
    Ok(s)
}

fn run_lemmas(config: &RunConfig, profile: &DampingProfile, out: &Path) -> Result<Summary> {
    let l = &config.lemmas;
    let cutoff = config.discretization.n.max(l.n_max.max(1) as usize);
    let table = build_symbols(config.params, cutoff);
    let mut s = Summary::new();

    let mult = multiplicity_scan(&table, l.multiplicity_tol)?;
    let rows: Vec<Vec<String>> = mult
        .classes
        .iter()
        .map(|c| {
            vec![
                c.representative.to_string(),
                fmt_float(c.lambda),
                c.multiplicity().to_string(),
                c.members.iter().map(i64::to_string).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect();
    write_records(
        &out.join("lemma_multiplicity.csv"),
        &["representative", "lambda", "multiplicity", "members"],
        &rows,
    )?;
    s.insert("maxMultiplicity".into(), json!(mult.max_multiplicity));
    s.insert("simpleBeyond".into(), json!(mult.simple_beyond));

    let gaps = gap_check(&table, l.gap_k_min)?;
    let rows: Vec<Vec<String>> = gaps
        .rows
        .iter()
        .map(|r| vec![r.k.to_string(), fmt_float(r.gap), fmt_float(r.bound), r.pass.to_string()])
        .collect();
    write_records(&out.join("lemma_gaps.csv"), &["k", "gap", "bound", "pass"], &rows)?;
    s.insert("gapThreshold".into(), json!(gaps.threshold));
    s.insert("gapsIncrease".into(), json!(gaps.gaps_increase_beyond_threshold()));

    let threshold = resonance_threshold(&table, l.n_max)?;
    let mut rows = Vec::new();
    for a in 2..=l.n_max {
        let r = resonance_check(&table, l.n_max, a)?;
        rows.push(vec![
            a.to_string(),
            fmt_float(r.min_ratio),
            r.witness[0].to_string(),
            r.witness[1].to_string(),
            r.witness[2].to_string(),
            r.triples.to_string(),
        ]);
    }
    write_records(
        &out.join("lemma_resonance.csv"),
        &["a", "minRatio", "k1", "k2", "k3", "triples"],
        &rows,
    )?;
    let res = resonance_check(&table, l.n_max, threshold)?;
    s.insert("resonanceThreshold".into(), json!(threshold));
    s.insert("resonanceMinRatio".into(), num(res.min_ratio));

    let modulation = modulation_check(&table, l.n_max, l.modulation_floor, l.modulation_window)?;
    write_records(
        &out.join("lemma_modulation.csv"),
        &["minRatio", "k", "n", "pairs"],
        &[vec![
            fmt_float(modulation.min_ratio),
            modulation.witness[0].to_string(),
            modulation.witness[1].to_string(),
            modulation.pairs.to_string(),
        ]],
    )?;
    s.insert("modulationMinRatio".into(), num(modulation.min_ratio));

    let (lo, hi) = lemma_d_equivalence(profile, l.symbol_cutoff)?;
    let delta = profile.delta();
    let rows: Vec<Vec<f64>> = (1..=l.symbol_cutoff as i64)
        .map(|k| {
            let dk = profile.d_symbol(k);
            vec![k as f64, dk, dk / bracket(k as f64).powf(delta)]
        })
        .collect();
    write_table(&out.join("lemma_symbol.csv"), &["k", "d", "ratio"], &rows)?;
    s.insert("symbolLower".into(), num(lo));
    s.insert("symbolUpper".into(), num(hi));
    Ok(s)
}
