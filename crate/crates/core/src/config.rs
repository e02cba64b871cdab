//! Run configuration read from a TOML file. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::read_indexed_complex;
use crate::scenarios::{CustomSpectrum, ExoPreset, ScenarioConfig, ScenarioKind, StatePreset};
use crate::sylvester::{QuadratureMethod, QuadratureSpec};
use crate::tolerances;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    scenario: RawScenario,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    quadrature: RawQuadrature,
    #[serde(default)]
    simulate: RawGrid,
    #[serde(default)]
    decay: RawDecay,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Wave,
    Diagonal,
    Custom,
    Random,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: RawKind,
    nu: Option<f64>,
    period: Option<f64>,
    gamma: Option<f64>,
    n_plant: Option<i64>,
    n_exo: Option<i64>,
    seed: Option<u64>,
    z0: Option<String>,
    z0_values: Option<Vec<(i64, f64, f64)>>,
    w0: Option<String>,
    w0_modes: Option<usize>,
    w0_mode: Option<i64>,
    w0_values: Option<Vec<(i64, f64, f64)>>,
    w0_file: Option<PathBuf>,
    custom_floor: Option<f64>,
    custom_scale: Option<f64>,
    custom_power: Option<f64>,
    custom_step: Option<f64>,
    custom_coupling_power: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    assumption1_floor: Option<f64>,
    residual: Option<f64>,
    invariant_error: Option<f64>,
    error_formula: Option<f64>,
    slope: Option<f64>,
    certificate_slope: Option<f64>,
    geometric_d: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    horizons: Option<Vec<f64>>,
    method: Option<String>,
    step: Option<f64>,
    conformity_eps: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t_min: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
    window_lo: Option<f64>,
    window_hi: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDecay {
    beta: Option<f64>,
    envelope_modes: Option<i64>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
    window_lo: Option<f64>,
    window_hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub assumption1_floor: f64,
    pub residual: f64,
    pub invariant_error: f64,
    pub error_formula: f64,
    pub slope: f64,
    pub certificate_slope: f64,
    pub geometric_d: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            assumption1_floor: tolerances::ASSUMPTION1_FLOOR,
            residual: tolerances::ALGEBRAIC_REL,
            invariant_error: 1e-9,
            error_formula: 1e-9,
            slope: tolerances::SLOPE_TOL,
            certificate_slope: tolerances::CERTIFICATE_SLOPE_TOL,
            geometric_d: std::f64::consts::PI,
        }
    }
}

/// Log-spaced time grid plus the fitting window.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub window: (f64, f64),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { t_min: 1e-2, t_max: 1e3, points: 512, window: (10.0, 1e3) }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        crate::spectral::log_grid(self.t_min, self.t_max, self.points)
    }

    fn validate(&self, section: &str) -> Result<()> {
        let (lo, hi) = self.window;
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.points >= 2) {
            return Err(Error::Config(format!("[{section}] needs 0 < t_min < t_max and points >= 2")));
        }
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Config(format!("[{section}] window [{lo}, {hi}] is degenerate")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub tolerances: Tolerances,
    pub quadrature: QuadratureSpec,
    pub conformity_eps: f64,
    pub simulate: GridSpec,
    /// Weight exponent of the semigroup envelope.
    pub decay_beta: f64,
    /// Plant modes per side used for the semigroup envelope only.
    pub envelope_modes: i64,
    pub decay: GridSpec,
    pub output_dir: Option<PathBuf>,
}

fn complex_pairs(values: Vec<(i64, f64, f64)>) -> Vec<(i64, Complex64)> {
    values.into_iter().map(|(k, re, im)| (k, Complex64::new(re, im))).collect()
}

fn positive(name: &str, value: Option<f64>, default: f64) -> Result<f64> {
    let v = value.unwrap_or(default);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Config(format!("{name} must be positive, got {v}")));
    }
    Ok(v)
}

fn reject_unused<T>(name: &str, value: &Option<T>, preset: &str) -> Result<()> {
    if value.is_some() {
        return Err(Error::Config(format!("{name} is only valid with preset {preset}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative file references resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let s = raw.scenario;
        let kind = match s.kind {
            RawKind::Wave => ScenarioKind::Wave,
            RawKind::Diagonal => ScenarioKind::Diagonal,
            RawKind::Custom => ScenarioKind::Custom,
            RawKind::Random => ScenarioKind::Random,
        };
        let defaults = ScenarioConfig::default_for(kind);

        let z0_name = s.z0.as_deref().unwrap_or("smooth");
        if z0_name != "explicit" {
            reject_unused("z0_values", &s.z0_values, "explicit")?;
        }
        let z0 = match z0_name {
            "zero" => StatePreset::Zero,
            "smooth" => StatePreset::Smooth,
            "on_manifold" => StatePreset::OnManifold,
            "explicit" => StatePreset::Explicit(complex_pairs(
                s.z0_values.ok_or_else(|| Error::Config("z0 = \"explicit\" needs z0_values".into()))?,
            )),
            other => return Err(Error::Config(format!("unknown z0 preset {other:?}"))),
        };

        let w0_name = s.w0.as_deref().unwrap_or("smooth");
        if w0_name != "square_wave" {
            reject_unused("w0_modes", &s.w0_modes, "square_wave")?;
        }
        if w0_name != "unit" {
            reject_unused("w0_mode", &s.w0_mode, "unit")?;
        }
        if w0_name != "explicit" {
            reject_unused("w0_values", &s.w0_values, "explicit")?;
        }
        if w0_name != "file" {
            reject_unused("w0_file", &s.w0_file, "file")?;
        }
        let w0 = match w0_name {
            "zero" => ExoPreset::Zero,
            "smooth" => ExoPreset::Smooth,
            "square_wave" => ExoPreset::SquareWave { modes: s.w0_modes.unwrap_or(11) },
            "unit" => ExoPreset::Unit { k: s.w0_mode.unwrap_or(1) },
            "explicit" => ExoPreset::Explicit(complex_pairs(
                s.w0_values.ok_or_else(|| Error::Config("w0 = \"explicit\" needs w0_values".into()))?,
            )),
            "file" => {
                let file = s.w0_file.ok_or_else(|| Error::Config("w0 = \"file\" needs w0_file".into()))?;
                ExoPreset::Explicit(read_indexed_complex(&base.join(file))?)
            }
            other => return Err(Error::Config(format!("unknown w0 preset {other:?}"))),
        };

        let dc = CustomSpectrum::default();
        let custom = CustomSpectrum {
            floor: s.custom_floor.unwrap_or(dc.floor),
            scale: s.custom_scale.unwrap_or(dc.scale),
            power: s.custom_power.unwrap_or(dc.power),
            step: s.custom_step.unwrap_or(dc.step),
            coupling_power: s.custom_coupling_power.unwrap_or(dc.coupling_power),
        };
        if kind != ScenarioKind::Custom
            && (s.custom_floor.is_some() || s.custom_scale.is_some() || s.custom_power.is_some() || s.custom_step.is_some() || s.custom_coupling_power.is_some())
        {
            return Err(Error::Config("custom_* keys are only valid with kind = \"custom\"".into()));
        }

        let scenario = ScenarioConfig {
            kind,
            nu: s.nu.unwrap_or(defaults.nu),
            period: s.period.unwrap_or(defaults.period),
            gamma: s.gamma.unwrap_or(defaults.gamma),
            n_plant: s.n_plant.unwrap_or(defaults.n_plant),
            n_exo: s.n_exo.unwrap_or(defaults.n_exo),
            z0,
            w0,
            custom,
            seed: s.seed.unwrap_or(defaults.seed),
        };
        scenario.validate().map_err(|e| Error::Config(e.to_string()))?;

        let dt = Tolerances::default();
        let t = raw.tolerances;
        let tolerances = Tolerances {
            assumption1_floor: positive("assumption1_floor", t.assumption1_floor, dt.assumption1_floor)?,
            residual: positive("residual", t.residual, dt.residual)?,
            invariant_error: positive("invariant_error", t.invariant_error, dt.invariant_error)?,
            error_formula: positive("error_formula", t.error_formula, dt.error_formula)?,
            slope: positive("slope", t.slope, dt.slope)?,
            certificate_slope: positive("certificate_slope", t.certificate_slope, dt.certificate_slope)?,
            geometric_d: positive("geometric_d", t.geometric_d, dt.geometric_d)?,
        };

        let q = raw.quadrature;
        let method = match q.method.as_deref().unwrap_or("analytic") {
            "analytic" => {
                reject_unused("step", &q.step, "method = \"trapezoid\"")?;
                QuadratureMethod::Analytic
            }
            "trapezoid" => QuadratureMethod::Trapezoid { step: q.step.unwrap_or(1e-3) },
            other => return Err(Error::Config(format!("unknown quadrature method {other:?}"))),
        };
        let horizons = q.horizons.unwrap_or_else(|| QuadratureSpec::default().horizons().to_vec());
        let quadrature = QuadratureSpec::new(horizons, method).map_err(|e| Error::Config(e.to_string()))?;
        let conformity_eps = positive("conformity_eps", q.conformity_eps, 0.25)?;

        let dg = GridSpec::default();
        let g = raw.simulate;
        let simulate = GridSpec {
            t_min: g.t_min.unwrap_or(dg.t_min),
            t_max: g.t_max.unwrap_or(dg.t_max),
            points: g.points.unwrap_or(dg.points),
            window: (g.window_lo.unwrap_or(dg.window.0), g.window_hi.unwrap_or(dg.window.1)),
        };
        simulate.validate("simulate")?;
        let d = raw.decay;
        let decay = GridSpec {
            t_min: d.t_min.unwrap_or(dg.t_min),
            t_max: d.t_max.unwrap_or(dg.t_max),
            points: d.points.unwrap_or(dg.points),
            window: (d.window_lo.unwrap_or(dg.window.0), d.window_hi.unwrap_or(dg.window.1)),
        };
        decay.validate("decay")?;
        let decay_beta = positive("beta", d.beta, 1.0)?;
        let envelope_modes = d.envelope_modes.unwrap_or(10_000);
        if envelope_modes < 1 {
            return Err(Error::Config(format!("envelope_modes must be at least 1, got {envelope_modes}")));
        }

        Ok(RunConfig {
            scenario,
            tolerances,
            quadrature,
            conformity_eps,
            simulate,
            decay_beta,
            envelope_modes,
            decay,
            output_dir: raw.output_dir.map(|p| if p.is_relative() { base.join(p) } else { p }),
        })
    }
}
