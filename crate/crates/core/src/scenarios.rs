//! Ready-made plants and exosystems: the damped wave example, the diagonal
//! example, a parametric family, and seeded random instances.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exosystem::{ExoSpace, ExoState};
use crate::regulator::{ModalCoupling, SylvesterSolution};
use crate::spectral::{DiagonalGenerator, ModeRange, SpectralVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Wave,
    Diagonal,
    Custom,
    Random,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioKind::Wave => "wave",
            ScenarioKind::Diagonal => "diagonal",
            ScenarioKind::Custom => "custom",
            ScenarioKind::Random => "random",
        })
    }
}

/// Spectrum `mu_n = -(floor + scale (1+|n|)^{-power}) + i step n` with
/// `b_n = c_n = (1+|n|)^{-coupling_power}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomSpectrum {
    pub floor: f64,
    pub scale: f64,
    pub power: f64,
    pub step: f64,
    pub coupling_power: f64,
}

impl Default for CustomSpectrum {
    fn default() -> Self {
        Self { floor: 0.0, scale: 1.0, power: 1.0, step: 1.0, coupling_power: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StatePreset {
    Zero,
    /// `z0_n = 1 / |mu_n|^2`, inside `D(A)`.
    Smooth,
    /// `z0 = Pi w0`.
    OnManifold,
    Explicit(Vec<(i64, Complex64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExoPreset {
    Zero,
    /// Fourier truncation of the unit square wave `sign(sin(2 pi t / p))`
    /// keeping `modes` coefficients (`|k| <= (modes - 1) / 2`).
    SquareWave { modes: usize },
    Unit { k: i64 },
    /// `w0_k = e^{-|k|/2}`, inside `D(S)` for every weight exponent.
    Smooth,
    Explicit(Vec<(i64, Complex64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub nu: f64,
    pub period: f64,
    pub gamma: f64,
    pub n_plant: i64,
    pub n_exo: i64,
    pub z0: StatePreset,
    pub w0: ExoPreset,
    pub custom: CustomSpectrum,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn wave() -> Self {
        Self {
            kind: ScenarioKind::Wave,
            nu: 1.0,
            period: 2.0,
            gamma: 2.0,
            n_plant: 200,
            n_exo: 200,
            z0: StatePreset::Smooth,
            w0: ExoPreset::Smooth,
            custom: CustomSpectrum::default(),
            seed: 0,
        }
    }

    pub fn diagonal() -> Self {
        Self { kind: ScenarioKind::Diagonal, period: 2.0 * PI, ..Self::wave() }
    }

    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Wave => Self::wave(),
            ScenarioKind::Diagonal => Self::diagonal(),
            ScenarioKind::Custom => Self { kind, ..Self::diagonal() },
            ScenarioKind::Random => Self { kind, ..Self::diagonal() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParameter(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        if !(self.gamma > 0.5) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must exceed 1/2, got {}", self.gamma)));
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::InvalidParameter(format!("period must be positive, got {}", self.period)));
        }
        if self.n_plant < 1 || self.n_exo < 1 {
            return Err(Error::InvalidParameter("mode counts must be at least 1".into()));
        }
        if let ExoPreset::SquareWave { modes } = self.w0 {
            if modes % 2 == 0 || modes < 3 {
                return Err(Error::InvalidParameter(format!("square-wave mode count must be odd and >= 3, got {modes}")));
            }
            if ((modes - 1) / 2) as i64 > self.n_exo {
                return Err(Error::InvalidParameter(format!("square wave with {modes} modes needs n_exo >= {}", (modes - 1) / 2)));
            }
        }
        Ok(())
    }
}

/// A plant, its coupling and the exosystem it tracks.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub gen: DiagonalGenerator,
    pub coupling: ModalCoupling,
    pub space: Arc<ExoSpace>,
    /// `alpha` in `||T(t) A^{-1}|| <= N t^{-1/alpha}`, when known.
    pub nominal_alpha: Option<f64>,
    /// `(alpha, c)` with `Re mu_n <= -c / |Im mu_n|^alpha`, when known.
    pub geometric: Option<(f64, f64)>,
}

fn wave_coefficient(k: i64) -> f64 {
    let kf = k as f64;
    2.0 * (1.0 - (-1f64).powi((k % 2) as i32)) / (kf.powi(3) * PI.powi(3))
}

pub fn build_wave_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let modes = ModeRange::symmetric_punctured(cfg.n_plant)?;
    let nu = cfg.nu;
    let gen = DiagonalGenerator::from_fn(modes.clone(), |k| {
        let kf = k as f64;
        Complex64::new(-nu * PI / (kf * kf), kf * PI)
    })?;
    let b = SpectralVector::from_fn(modes, |k| Complex64::new(wave_coefficient(k), 0.0));
    let c = SpectralVector::from_fn(b.modes().clone(), |k| b.get(k).expect("same modes").conj());
    let coupling = ModalCoupling::without_disturbance(b, c)?;
    let space = Arc::new(ExoSpace::with_power_weights(cfg.period, ModeRange::symmetric(cfg.n_exo)?, cfg.gamma)?);
    Ok(Scenario {
        kind: ScenarioKind::Wave,
        gen,
        coupling,
        space,
        nominal_alpha: Some(2.0),
        geometric: Some((2.0, nu * PI.powi(3))),
    })
}

pub fn build_diagonal_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let modes = ModeRange::symmetric(cfg.n_plant)?;
    let period = cfg.period;
    let gen = DiagonalGenerator::from_fn(modes.clone(), |n| {
        Complex64::new(-1.0 / (1.0 + n.abs() as f64), 2.0 * PI * n as f64 / period)
    })?;
    let b = SpectralVector::unit(modes, 0)?;
    let coupling = ModalCoupling::without_disturbance(b.clone(), b)?;
    let space = Arc::new(ExoSpace::with_power_weights(cfg.period, ModeRange::symmetric(cfg.n_exo)?, cfg.gamma)?);
    let slope = 2.0 * PI / period;
    Ok(Scenario {
        kind: ScenarioKind::Diagonal,
        gen,
        coupling,
        space,
        nominal_alpha: Some(1.0),
        // 1 / (1 + |n|) >= (slope / 2) / |omega_n| for n != 0
        geometric: Some((1.0, 0.5 * slope)),
    })
}

pub fn build_custom_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let s = &cfg.custom;
    if !(s.floor >= 0.0 && s.scale >= 0.0 && s.power >= 0.0 && s.coupling_power >= 0.0) || !s.step.is_finite() {
        return Err(Error::InvalidParameter("custom spectrum parameters must be nonnegative and finite".into()));
    }
    let modes = ModeRange::symmetric(cfg.n_plant)?;
    let gen = DiagonalGenerator::from_fn(modes.clone(), |n| {
        let m = 1.0 + n.abs() as f64;
        Complex64::new(-(s.floor + s.scale * m.powf(-s.power)), s.step * n as f64)
    })?;
    let b = SpectralVector::from_fn(modes, |n| Complex64::new((1.0 + n.abs() as f64).powf(-s.coupling_power), 0.0));
    let coupling = ModalCoupling::without_disturbance(b.clone(), b)?;
    let space = Arc::new(ExoSpace::with_power_weights(cfg.period, ModeRange::symmetric(cfg.n_exo)?, cfg.gamma)?);
    let nominal_alpha = (s.floor == 0.0 && s.power > 0.0).then_some(s.power);
    Ok(Scenario { kind: ScenarioKind::Custom, gen, coupling, space, nominal_alpha, geometric: None })
}

/// Ranges for randomly generated scenarios.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomBounds {
    pub max_plant_modes: i64,
    pub max_exo_modes: i64,
    /// Every `Re mu_n` lies in `[-max_decay, -min_decay]`.
    pub min_decay: f64,
    pub max_decay: f64,
    /// Bound on `|Im mu_n|` and on the exosystem frequencies.
    pub max_frequency: f64,
    /// Probability that an entry of `P` is nonzero.
    pub disturbance_density: f64,
}

impl Default for RandomBounds {
    fn default() -> Self {
        Self { max_plant_modes: 5, max_exo_modes: 4, min_decay: 1e-2, max_decay: 2.0, max_frequency: 10.0, disturbance_density: 0.3 }
    }
}

fn unit_disk(rng: &mut ChaCha8Rng, min_radius: f64) -> Complex64 {
    let r = rng.gen_range(min_radius..=1.0);
    Complex64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
}

/// Deterministic in `seed`. `c_n = r_n conj(b_n)` with `r_n > 0`, so
/// `Re H(i omega) > 0` and the transfer function never vanishes.
pub fn build_random_scenario(seed: u64, bounds: &RandomBounds) -> Result<Scenario> {
    if !(bounds.min_decay > 0.0 && bounds.max_decay >= bounds.min_decay && bounds.max_frequency > 0.0)
        || bounds.max_plant_modes < 1
        || bounds.max_exo_modes < 1
        || !(0.0..=1.0).contains(&bounds.disturbance_density)
    {
        return Err(Error::InvalidParameter("inconsistent random-scenario bounds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_plant = rng.gen_range(1..=bounds.max_plant_modes);
    let n_exo = rng.gen_range(1..=bounds.max_exo_modes);
    let modes = ModeRange::symmetric(n_plant)?;
    let eigenvalues: Vec<Complex64> = modes
        .indices()
        .iter()
        .map(|_| {
            Complex64::new(
                -rng.gen_range(bounds.min_decay..=bounds.max_decay),
                rng.gen_range(-bounds.max_frequency..=bounds.max_frequency),
            )
        })
        .collect();
    let gen = DiagonalGenerator::new(modes.clone(), eigenvalues)?;
    let b: Vec<Complex64> = modes.indices().iter().map(|_| unit_disk(&mut rng, 0.2)).collect();
    let c: Vec<Complex64> = b.iter().map(|b| b.conj() * rng.gen_range(0.5..=1.0)).collect();
    // omega_K = 2 pi K / p stays within max_frequency
    let period = 2.0 * PI * n_exo as f64 / bounds.max_frequency * rng.gen_range(1.0..=3.0);
    let exo_modes = ModeRange::symmetric(n_exo)?;
    let mut p_entries = Vec::new();
    for &k in exo_modes.indices() {
        for &n in modes.indices() {
            if rng.gen_bool(bounds.disturbance_density) {
                p_entries.push(((n, k), unit_disk(&mut rng, 0.0) * 0.5));
            }
        }
    }
    let gamma = rng.gen_range(0.75..=3.0);
    let coupling = ModalCoupling::new(SpectralVector::new(modes.clone(), b)?, SpectralVector::new(modes, c)?, p_entries)?;
    let space = Arc::new(ExoSpace::with_power_weights(period, exo_modes, gamma)?);
    Ok(Scenario { kind: ScenarioKind::Random, gen, coupling, space, nominal_alpha: None, geometric: None })
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    match cfg.kind {
        ScenarioKind::Wave => build_wave_scenario(cfg),
        ScenarioKind::Diagonal => build_diagonal_scenario(cfg),
        ScenarioKind::Custom => build_custom_scenario(cfg),
        ScenarioKind::Random => {
            cfg.validate()?;
            build_random_scenario(cfg.seed, &RandomBounds::default())
        }
    }
}

pub fn initial_exo_state(preset: &ExoPreset, space: &Arc<ExoSpace>) -> Result<ExoState> {
    match preset {
        ExoPreset::Zero => Ok(ExoState::zeros(Arc::clone(space))),
        ExoPreset::SquareWave { modes } => {
            let m = ((modes - 1) / 2) as i64;
            let pairs: Vec<(i64, Complex64)> = (-m..=m)
                .filter(|k| k % 2 != 0)
                .map(|k| (k, Complex64::new(0.0, -2.0 / (PI * k as f64))))
                .collect();
            ExoState::from_pairs(Arc::clone(space), pairs)
        }
        ExoPreset::Unit { k } => ExoState::unit(Arc::clone(space), *k),
        ExoPreset::Smooth => Ok(ExoState::from_fn(Arc::clone(space), |k| Complex64::new((-0.5 * k.abs() as f64).exp(), 0.0))),
        ExoPreset::Explicit(pairs) => ExoState::from_pairs(Arc::clone(space), pairs.iter().copied()),
    }
}

/// `pi` is needed only for [`StatePreset::OnManifold`].
pub fn initial_state(preset: &StatePreset, gen: &DiagonalGenerator, w0: &ExoState, pi: Option<&SylvesterSolution>) -> Result<SpectralVector> {
    match preset {
        StatePreset::Zero => Ok(SpectralVector::zeros(gen.modes().clone())),
        StatePreset::Smooth => Ok(SpectralVector::from_fn(gen.modes().clone(), |n| {
            Complex64::new(1.0 / gen.eigenvalue(n).expect("same modes").norm_sqr(), 0.0)
        })),
        StatePreset::OnManifold => {
            let pi = pi.ok_or_else(|| Error::InvalidParameter("on-manifold initial state needs a solved Pi".into()))?;
            pi.apply(w0)
        }
        StatePreset::Explicit(pairs) => {
            let mut v = SpectralVector::zeros(gen.modes().clone());
            for &(n, z) in pairs {
                let pos = gen
                    .modes()
                    .position(n)
                    .ok_or_else(|| Error::InvalidParameter(format!("initial state names unretained mode {n}")))?;
                v.coeffs_mut()[pos] += z;
            }
            Ok(v)
        }
    }
}

impl Scenario {
    /// Check that every retained eigenvalue sits strictly in the left half-plane.
    pub fn spectrum_is_stable(&self) -> bool {
        self.gen.eigenvalues().iter().all(|mu| mu.re < 0.0)
    }

    pub fn has_disturbance(&self) -> bool {
        self.coupling.has_disturbance()
    }
}
