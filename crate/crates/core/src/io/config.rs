//! Run configuration: a TOML document with dotted namespaces, parsed
//! strictly and validated against the model hypotheses.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::Plant;
use crate::damping::{make_profile_bump, make_profile_global, DampingProfile};
use crate::error::{Error, Result};
use crate::spectral::SpectralField;
use crate::symbols::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Stabilize,
    ControlLinear,
    ControlNonlinear,
    Observability,
    Lemmas,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Stabilize => "stabilize",
            Experiment::ControlLinear => "control-linear",
            Experiment::ControlNonlinear => "control-nonlinear",
            Experiment::Observability => "observability",
            Experiment::Lemmas => "lemmas",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    #[default]
    Global,
    Bump {
        a: f64,
        b: f64,
        #[serde(rename = "K")]
        k: usize,
    },
}

/// Which equation form a damped run integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Fluctuation `v = u - [u₀]` with the drift `2μ∂_x`, `μ = [u₀]`.
    #[default]
    Shifted,
    /// The full state `u` with `μ = 0`.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    #[serde(rename = "N")]
    pub n: usize,
    /// Sampling grid for the bump profile; defaults to `max(256, 8K)`.
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub form: Form,
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    #[default]
    Cos,
    Sin,
    /// Uniform random coefficients on modes `1..=mode`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub shape: Shape,
    #[serde(default = "one")]
    pub mode: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub mean: f64,
}

fn default_amplitude() -> f64 {
    0.1
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Cos,
            mode: 1,
            amplitude: default_amplitude(),
            mean: 0.0,
        }
    }
}

impl FieldSpec {
    /// The field at cutoff `n`; `salt` separates random draws sharing a seed.
    pub fn build(&self, n: usize, seed: u64, salt: u64) -> Result<SpectralField> {
        if self.mode == 0 || self.mode > n {
            return Err(Error::Config(format!(
                "field mode {} must lie in 1..={n}",
                self.mode
            )));
        }
        let mut v = match self.shape {
            Shape::Cos => SpectralField::cosine(n, self.mode, self.amplitude),
            Shape::Sin => SpectralField::sine(n, self.mode, self.amplitude),
            Shape::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let a = self.amplitude;
                let pos: Vec<Complex64> = (0..self.mode)
                    .map(|_| Complex64::new(rng.random_range(-a..a), rng.random_range(-a..a)))
                    .collect();
                SpectralField::from_nonnegative_modes(0.0, &pos).resized(n)
            }
        };
        v.set_coeff(0, Complex64::new(self.mean, 0.0));
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSettings {
    /// Certification step; defaults to `dt`.
    #[serde(default)]
    pub cert_dt: Option<f64>,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_plant")]
    pub plant: Plant,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "two")]
    pub resolution_factor: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Random endpoint pairs probed for the control-norm constant.
    #[serde(default)]
    pub nu_pairs: usize,
}

fn default_plant() -> Plant {
    Plant::Damped
}

fn default_samples() -> usize {
    101
}

fn two() -> usize {
    2
}

fn default_tolerance() -> f64 {
    1e-6
}

impl Default for ControlSettings {
    fn default() -> Self {
        Self {
            cert_dt: None,
            s: 0.0,
            plant: default_plant(),
            samples: default_samples(),
            resolution_factor: 2,
            tolerance: default_tolerance(),
            nu_pairs: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StabilizeSettings {
    /// Fit window; defaults to `[T/5, T]`.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default)]
    pub energy_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSettings {
    #[serde(default = "default_n_max")]
    pub n_max: i64,
    #[serde(default = "one_i")]
    pub gap_k_min: i64,
    #[serde(default = "one_i")]
    pub modulation_floor: i64,
    #[serde(default = "default_window")]
    pub modulation_window: f64,
    #[serde(default)]
    pub multiplicity_tol: f64,
    /// Range `1 <= |k| <= symbol_cutoff` of the `d(k)/⟨k⟩^δ` scan.
    #[serde(default = "default_symbol_cutoff")]
    pub symbol_cutoff: usize,
}

fn default_n_max() -> i64 {
    64
}

fn one_i() -> i64 {
    1
}

fn default_window() -> f64 {
    2.0
}

fn default_symbol_cutoff() -> usize {
    256
}

impl Default for LemmaSettings {
    fn default() -> Self {
        Self {
            n_max: default_n_max(),
            gap_k_min: 1,
            modulation_floor: 1,
            modulation_window: default_window(),
            multiplicity_tol: 0.0,
            symbol_cutoff: default_symbol_cutoff(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub params: ModelParams,
    #[serde(default)]
    pub profile: ProfileSpec,
    pub discretization: Discretization,
    #[serde(default)]
    pub initial: FieldSpec,
    #[serde(default)]
    pub target: Option<FieldSpec>,
    #[serde(default)]
    pub control: ControlSettings,
    #[serde(default)]
    pub stabilize: StabilizeSettings,
    #[serde(default)]
    pub lemmas: LemmaSettings,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let d = &self.discretization;
        if d.n < 4 {
            return Err(Error::Config(format!("N = {} must be at least 4", d.n)));
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", d.dt)));
        }
        if !(d.t > 0.0 && d.t.is_finite()) {
            return Err(Error::Config(format!("T = {} must be positive", d.t)));
        }
        if d.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let ProfileSpec::Bump { a, b, k } = self.profile {
            if !(0.0 <= a && a < b && b <= 2.0 * PI) {
                return Err(Error::InvalidSupport { a, b });
            }
            if k < 2 {
                return Err(Error::Config(format!("bump band K = {k} must be at least 2")));
            }
            if let Some(m) = d.m {
                if m < 2 * k + 1 {
                    return Err(Error::Aliasing { m, n: k });
                }
            }
        }
        if let Some(cert) = self.control.cert_dt {
            if !(cert > 0.0) {
                return Err(Error::Config(format!("control.cert_dt = {cert} must be positive")));
            }
        }
        if let Some([t0, t1]) = self.stabilize.fit_window {
            if !(t0 < t1) {
                return Err(Error::Config(format!("fit window [{t0}, {t1}] is empty")));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<DampingProfile> {
        let delta = self.params.delta;
        match self.profile {
            ProfileSpec::Global => Ok(make_profile_global(delta)),
            ProfileSpec::Bump { a, b, k } => {
                let m = self.discretization.m.unwrap_or((8 * k).max(256));
                make_profile_bump(a, b, k, m, delta)
            }
        }
    }
}

/// Sets `path` (dotted) in a TOML table, creating intermediate tables.
fn set_dotted(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts = path.split('.').peekable();
    let mut table = root;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!("malformed override key '{path}'")));
        }
        if parts.peek().is_none() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{path}': '{part}' is not a table")))?;
    }
    Ok(())
}

fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

/// Parses and validates a configuration, applying `key=value` overrides
/// (values in TOML syntax; bare words are strings).
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for item in overrides {
        let (key, value) = parse_override(item)?;
        set_dotted(&mut table, &key, value)?;
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENJAMIN: &str = r#"
experiment = "simulate"
params.alpha = 1.0
params.beta = 1.0
params.m = 1.0
params.r = 0.5
params.mu = 0.0
params.delta = 1.0
discretization.N = 16
discretization.dt = 1e-3
discretization.T = 0.1
"#;

    #[test]
    fn accepts_benjamin() {
        let c = parse_config(BENJAMIN, &[]).unwrap();
        assert_eq!(c.params, ModelParams::benjamin());
        assert_eq!(c.profile, ProfileSpec::Global);
        assert_eq!(c.discretization.record_every, 1);
    }

    #[test]
    fn rejects_m_below_half() {
        let err = parse_config(BENJAMIN, &["params.m=0.4".into()]).unwrap_err();
        assert!(err.to_string().contains("m > 1/2"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_delta_outside_window() {
        let err = parse_config(
            BENJAMIN,
            &["params.m=0.6".into(), "params.r=0.3".into(), "params.delta=0.5".into()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("max(0, 2-2m)"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{BENJAMIN}\nparams.gamma = 2.0\n");
        assert!(matches!(parse_config(&text, &[]), Err(Error::Config(_))));
        let text = format!("{BENJAMIN}\nbogus = 1\n");
        assert!(parse_config(&text, &[]).is_err());
    }

    #[test]
    fn overrides_build_nested_tables() {
        let c = parse_config(
            BENJAMIN,
            &[
                "profile.kind=bump".into(),
                "profile.a=1.0".into(),
                "profile.b=2.0".into(),
                "profile.K=8".into(),
                "experiment=lemmas".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.profile, ProfileSpec::Bump { a: 1.0, b: 2.0, k: 8 });
        assert_eq!(c.experiment, Experiment::Lemmas);
    }

    #[test]
    fn rejects_small_cutoff() {
        assert!(parse_config(BENJAMIN, &["discretization.N=3".into()]).is_err());
        assert!(parse_config(BENJAMIN, &["discretization.dt=0".into()]).is_err());
    }

    #[test]
    fn random_field_is_seeded() {
        let spec = FieldSpec {
            shape: Shape::Random,
            mode: 5,
            amplitude: 1.0,
            mean: 0.25,
        };
        let a = spec.build(8, 3, 0).unwrap();
        assert_eq!(a, spec.build(8, 3, 0).unwrap());
        assert_ne!(a, spec.build(8, 4, 0).unwrap());
        assert_eq!(a.coeff(0).re, 0.25);
        assert_eq!(a.coeff(6), Complex64::new(0.0, 0.0));
    }
}
