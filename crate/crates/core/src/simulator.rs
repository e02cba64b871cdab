//! Exact modal simulation of the closed loop with `K = 0`, the explicit
//! tracking-error formula, and empirical decay certificates.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exosystem::ExoState;
use crate::regulator::{forcing_column, FeedforwardGain, ModalCoupling, SylvesterSolution};
use crate::spectral::{check_time_grid, classify_decay, fit_decay_rate, phi1, DecayClass, DecayReport, DiagonalGenerator, SpectralVector};
use crate::tolerances;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub t: Vec<f64>,
    pub z: Vec<SpectralVector>,
    pub y: Vec<Complex64>,
    pub y_r: Vec<Complex64>,
    pub u: Vec<Complex64>,
    /// `y - y_r`.
    pub e: Vec<Complex64>,
    /// `||z(t) - Pi T_S(t) w0||`, with `Pi` from the same modes and gain.
    pub state_dev: Vec<f64>,
    pub z0: SpectralVector,
    pub w0: ExoState,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn error_magnitudes(&self) -> Vec<f64> {
        self.e.iter().map(|e| e.norm()).collect()
    }

    /// `sup |e|` over grid times in `[lo, hi]`; zero if none fall inside.
    pub fn sup_error_on(&self, lo: f64, hi: f64) -> f64 {
        self.t
            .iter()
            .zip(&self.e)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(_, e)| e.norm())
            .fold(0.0, f64::max)
    }

    /// `sup |e|` on the last decade of the grid over `sup |e|` on the first.
    pub fn final_decade_ratio(&self) -> Option<f64> {
        let first = *self.t.iter().find(|t| **t > 0.0)?;
        let last = *self.t.last()?;
        let initial = self.sup_error_on(0.0, 10.0 * first);
        if initial == 0.0 {
            return None;
        }
        Some(self.sup_error_on(last / 10.0, last) / initial)
    }
}

/// `(e^{b t} - e^{a t}) / (b - a)` from precomputed exponentials.
fn forced_from(a: Complex64, ea: Complex64, b: Complex64, eb: Complex64, t: f64) -> Complex64 {
    let z = (b - a) * t;
    if z.norm() < 0.5 {
        ea * t * phi1(z)
    } else {
        (eb - ea) / (b - a)
    }
}

/// Each mode obeys `z_n' = mu_n z_n + sum_k g_{n,k} w0_k e^{i omega_k t}` with
/// `g_{n,k} = b_n l_k + p_{n,k}`; it is integrated in closed form.
pub fn simulate_closed_loop(
    gen: &DiagonalGenerator,
    coupling: &ModalCoupling,
    gain: &FeedforwardGain,
    z0: &SpectralVector,
    w0: &ExoState,
    t_grid: &[f64],
) -> Result<SimulationResult> {
    if gen.modes() != coupling.modes() || gen.modes() != z0.modes() {
        return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: z0.modes().len() });
    }
    if **gain.space() != **w0.space() {
        return Err(Error::ModeRangeMismatch { expected: gain.space().modes().len(), actual: w0.coeffs().len() });
    }
    check_time_grid(t_grid)?;

    // (i omega_k, w0_k, g_{., k} w0_k, l_k w0_k) for active exosystem modes
    let mut active = Vec::new();
    for (k, omega, wk) in w0.active() {
        let g = forcing_column(coupling, gain, k)?;
        let gw: Vec<Complex64> = g.coeffs().iter().map(|x| x * wk).collect();
        let iw = Complex64::new(0.0, omega);
        for (mode, mu) in gen.iter() {
            if mu == iw {
                return Err(Error::SingularResolvent { mode, lambda: iw });
            }
        }
        active.push((iw, wk, gw, gain.gain(k).expect("same space") * wk));
    }
    // steady-state amplitudes g_{n,k} w0_k / (i omega_k - mu_n)
    let steady: Vec<Vec<Complex64>> = active
        .iter()
        .map(|(iw, _, gw, _)| gen.eigenvalues().iter().zip(gw).map(|(mu, g)| g / (iw - mu)).collect())
        .collect();

    let n = gen.modes().len();
    let mut out = SimulationResult {
        t: t_grid.to_vec(),
        z: Vec::with_capacity(t_grid.len()),
        y: Vec::with_capacity(t_grid.len()),
        y_r: Vec::with_capacity(t_grid.len()),
        u: Vec::with_capacity(t_grid.len()),
        e: Vec::with_capacity(t_grid.len()),
        state_dev: Vec::with_capacity(t_grid.len()),
        z0: z0.clone(),
        w0: w0.clone(),
    };
    let mut ea = vec![ZERO; n];
    for &t in t_grid {
        for (e, mu) in ea.iter_mut().zip(gen.eigenvalues()) {
            *e = (mu * t).exp();
        }
        let mut z: Vec<Complex64> = ea.iter().zip(z0.coeffs()).map(|(e, z)| e * z).collect();
        let mut ss = vec![ZERO; n];
        let mut y_r = ZERO;
        let mut u = ZERO;
        for ((iw, wk, gw, lw), st) in active.iter().zip(&steady) {
            let eb = (iw * t).exp();
            y_r += wk * eb;
            u += lw * eb;
            for npos in 0..n {
                if gw[npos] != ZERO {
                    let mu = gen.eigenvalues()[npos];
                    z[npos] += gw[npos] * forced_from(mu, ea[npos], *iw, eb, t);
                    ss[npos] += st[npos] * eb;
                }
            }
        }
        let y: Complex64 = coupling.c().coeffs().iter().zip(&z).map(|(c, z)| c * z).sum();
        let dev = z.iter().zip(&ss).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        out.z.push(SpectralVector::new(gen.modes().clone(), z).expect("sizes agree"));
        out.y.push(y);
        out.y_r.push(y_r);
        out.u.push(u);
        out.e.push(y - y_r);
        out.state_dev.push(dev);
    }
    Ok(out)
}

/// `max_t |e(t) - rhs(t)| / (1 + |rhs(t)|)` with
/// `rhs(t) = C T_A(t) (z0 - Pi w0) + (C Pi - delta_0) T_S(t) w0`.
pub fn error_formula_check(result: &SimulationResult, pi: &SylvesterSolution, gen: &DiagonalGenerator, coupling: &ModalCoupling) -> Result<f64> {
    if pi.plant_modes() != gen.modes() || gen.modes() != coupling.modes() {
        return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: pi.plant_modes().len() });
    }
    let pi_w = pi.apply(&result.w0)?;
    let dev: Vec<Complex64> = result.z0.coeffs().iter().zip(pi_w.coeffs()).map(|(z, p)| z - p).collect();
    let defects: Vec<(f64, Complex64)> = result
        .w0
        .active()
        .map(|(k, omega, wk)| {
            let col = pi.column(k).expect("same space");
            let y: Complex64 = coupling.c().coeffs().iter().zip(col.coeffs()).map(|(c, p)| c * p).sum();
            (omega, (y - 1.0) * wk)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (&t, &e) in result.t.iter().zip(&result.e) {
        let free: Complex64 = gen
            .eigenvalues()
            .iter()
            .zip(coupling.c().coeffs())
            .zip(&dev)
            .map(|((mu, c), d)| c * (mu * t).exp() * d)
            .sum();
        let forced: Complex64 = defects.iter().map(|(omega, d)| d * Complex64::from_polar(1.0, omega * t)).sum();
        let rhs = free + forced;
        worst = worst.max((e - rhs).norm() / (1.0 + rhs.norm()));
    }
    Ok(worst)
}

/// Maxima of `values` over log-spaced bins within `window`, each placed at
/// the time it is attained.
pub fn binned_envelope(t: &[f64], values: &[f64], window: (f64, f64), bins_per_decade: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = window;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut current: Option<(i64, f64, f64)> = None;
    for (&ti, &vi) in t.iter().zip(values) {
        if ti < lo || ti > hi || ti <= 0.0 {
            continue;
        }
        let bin = ((ti / lo).log10() * bins_per_decade as f64 + 1e-9).floor() as i64;
        match current {
            Some((b, bt, bv)) if b == bin => {
                if vi > bv {
                    current = Some((b, ti, vi));
                } else {
                    current = Some((b, bt, bv));
                }
            }
            Some((_, bt, bv)) => {
                out.push((bt, bv));
                current = Some((bin, ti, vi));
            }
            None => current = Some((bin, ti, vi)),
        }
    }
    if let Some((_, bt, bv)) = current {
        out.push((bt, bv));
    }
    out
}

#[derive(Clone, Debug)]
pub struct DecayCertificate {
    /// `max |e(t)| t^{1/alpha}` over the window.
    pub m: f64,
    /// `-1/alpha`.
    pub target_slope: f64,
    pub window: (f64, f64),
    pub error_envelope: Vec<(f64, f64)>,
    pub state_envelope: Vec<(f64, f64)>,
    /// `None` when the error envelope has vanished inside the window.
    pub error_fit: Option<DecayReport>,
    pub error_class: Option<DecayClass>,
    pub state_fit: DecayReport,
    /// Bin maxima of `|e|` never rise above an earlier bin maximum
    /// (up to `1e-12 sup |e|`) and end below where they start.
    pub error_decreasing: bool,
}

impl DecayCertificate {
    pub fn error_slope(&self) -> Option<f64> {
        self.error_fit.as_ref().map(|r| -r.exponent)
    }

    pub fn state_slope(&self) -> f64 {
        -self.state_fit.exponent
    }

    /// The state deviation decays at least as fast as `t^{-1/alpha}`.
    pub fn passes(&self) -> bool {
        self.state_slope() <= self.target_slope + tolerances::CERTIFICATE_SLOPE_TOL
    }

    /// The state deviation decays at the rate `t^{-1/alpha}` itself.
    pub fn matches_rate(&self) -> bool {
        (self.state_slope() - self.target_slope).abs() <= tolerances::CERTIFICATE_SLOPE_TOL
    }
}

/// No bin maximum exceeds an earlier one by more than `floor`, and the last
/// lies below the first. Sampled maxima of an oscillating signal fall short
/// of its true envelope by varying amounts, so adjacent bins are not compared.
fn is_decreasing_envelope(env: &[(f64, f64)], floor: f64) -> bool {
    let mut record = f64::NEG_INFINITY;
    for &(_, v) in env {
        if record.is_finite() && v > record + floor {
            return false;
        }
        record = record.max(v);
    }
    match (env.first(), env.last()) {
        (Some(a), Some(b)) => b.1 < a.1 || a.1 <= floor,
        _ => true,
    }
}

pub fn decay_certificate(result: &SimulationResult, alpha: f64, window: (f64, f64)) -> Result<DecayCertificate> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("degenerate window [{lo}, {hi}]")));
    }
    let mags = result.error_magnitudes();
    let error_envelope = binned_envelope(&result.t, &mags, window, tolerances::ENVELOPE_BINS_PER_DECADE);
    let state_envelope = binned_envelope(&result.t, &result.state_dev, window, tolerances::ENVELOPE_BINS_PER_DECADE);
    let points = error_envelope.len().min(state_envelope.len());
    if points < crate::spectral::MIN_FIT_POINTS {
        return Err(Error::InsufficientWindow { needed: crate::spectral::MIN_FIT_POINTS, got: points });
    }
    if error_envelope.iter().all(|p| p.1 == 0.0) {
        return Err(Error::NonPositiveEnvelope { t: lo });
    }
    let m = result
        .t
        .iter()
        .zip(&mags)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, e)| e * t.powf(1.0 / alpha))
        .fold(0.0, f64::max);

    let (et, ev): (Vec<f64>, Vec<f64>) = error_envelope.iter().copied().unzip();
    let error_fit = fit_decay_rate(&ev, &et, window).ok();
    let error_class = classify_decay(&ev, &et, window).ok();
    let (st, sv): (Vec<f64>, Vec<f64>) = state_envelope.iter().copied().unzip();
    let state_fit = fit_decay_rate(&sv, &st, window)?;
    let floor = 1e-12 * mags.iter().copied().fold(0.0, f64::max);
    Ok(DecayCertificate {
        m,
        target_slope: -1.0 / alpha,
        window,
        error_decreasing: is_decreasing_envelope(&error_envelope, floor),
        error_envelope,
        state_envelope,
        error_fit,
        error_class,
        state_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exosystem::ExoSpace;
    use crate::regulator::{build_feedforward, solve_regulator};
    use crate::spectral::{log_grid, ModeRange};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diagonal(n: i64, k: i64) -> (DiagonalGenerator, ModalCoupling, Arc<ExoSpace>) {
        let modes = ModeRange::symmetric(n).unwrap();
        let gen = DiagonalGenerator::from_fn(modes.clone(), |m| c(-1.0 / (1.0 + m.abs() as f64), m as f64)).unwrap();
        let b = SpectralVector::unit(modes, 0).unwrap();
        let coupling = ModalCoupling::without_disturbance(b.clone(), b).unwrap();
        let space = Arc::new(ExoSpace::with_power_weights(2.0 * PI, ModeRange::symmetric(k).unwrap(), 2.0).unwrap());
        (gen, coupling, space)
    }

    fn wave(n: i64, k: i64) -> (DiagonalGenerator, ModalCoupling, Arc<ExoSpace>) {
        let modes = ModeRange::symmetric_punctured(n).unwrap();
        let gen = DiagonalGenerator::from_fn(modes.clone(), |m| {
            let m = m as f64;
            c(-PI / (m * m), m * PI)
        })
        .unwrap();
        let b = SpectralVector::from_fn(modes, |m| {
            let mf = m as f64;
            c(2.0 * (1.0 - (-1f64).powi(m as i32)) / (mf.powi(3) * PI.powi(3)), 0.0)
        });
        let coupling = ModalCoupling::without_disturbance(b.clone(), b).unwrap();
        let space = Arc::new(ExoSpace::with_power_weights(2.0, ModeRange::symmetric(k).unwrap(), 2.0).unwrap());
        (gen, coupling, space)
    }

    fn smooth_z0(gen: &DiagonalGenerator) -> SpectralVector {
        SpectralVector::from_fn(gen.modes().clone(), |n| c(1.0 / gen.eigenvalue(n).unwrap().norm_sqr(), 0.0))
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let (gen, coupling, space) = diagonal(5, 3);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let z0 = SpectralVector::zeros(gen.modes().clone());
        let w0 = ExoState::zeros(Arc::clone(&space));
        let r = simulate_closed_loop(&gen, &coupling, &gain, &z0, &w0, &[0.0, 1.0, 5.0]).unwrap();
        assert!(r.e.iter().chain(&r.u).chain(&r.y).all(|x| *x == c(0.0, 0.0)));
        assert!(r.state_dev.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn free_decay() {
        let (gen, coupling, space) = wave(20, 3);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let z0 = smooth_z0(&gen);
        let w0 = ExoState::zeros(Arc::clone(&space));
        let grid = [0.0, 0.5, 3.0, 40.0];
        let r = simulate_closed_loop(&gen, &coupling, &gain, &z0, &w0, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let expected: Complex64 = gen
                .iter()
                .map(|(n, mu)| coupling.c().get(n).unwrap() * (mu * t).exp() * z0.get(n).unwrap())
                .sum();
            assert!((r.e[i] - expected).norm() < 1e-15);
            assert_eq!(r.u[i], c(0.0, 0.0));
        }
    }

    #[test]
    fn invariant_manifold_diagonal() {
        let (gen, coupling, space) = diagonal(30, 8);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let pi = solve_regulator(&gen, &coupling, &gain, &space).unwrap();
        let w0 = ExoState::from_fn(Arc::clone(&space), |k| c(1.0 / (1.0 + (k * k) as f64), 0.2 * k as f64 / (1.0 + (k * k * k * k) as f64)));
        let z0 = pi.apply(&w0).unwrap();
        let grid = log_grid(1e-2, 1e3, 200).unwrap();
        let r = simulate_closed_loop(&gen, &coupling, &gain, &z0, &w0, &grid).unwrap();
        assert!(r.error_magnitudes().iter().all(|e| *e <= 1e-9));
        assert!(r.state_dev.iter().all(|d| *d <= 1e-12));
    }

    #[test]
    fn error_formula_holds() {
        let (gen, coupling, space) = wave(40, 6);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let pi = solve_regulator(&gen, &coupling, &gain, &space).unwrap();
        let w0 = ExoState::from_fn(Arc::clone(&space), |k| c(1.0 / (1.0 + (k * k) as f64), 0.0));
        let z0 = smooth_z0(&gen);
        let grid = log_grid(1e-2, 1e3, 150).unwrap();
        let r = simulate_closed_loop(&gen, &coupling, &gain, &z0, &w0, &grid).unwrap();
        assert!(error_formula_check(&r, &pi, &gen, &coupling).unwrap() <= 1e-9);
        let on = simulate_closed_loop(&gen, &coupling, &gain, &pi.apply(&w0).unwrap(), &w0, &grid).unwrap();
        assert!(on.error_magnitudes().iter().all(|e| *e <= 1e-9));
    }

    #[test]
    fn corrupted_gain_is_detected() {
        let (gen, coupling, space) = diagonal(10, 4);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let pi = solve_regulator(&gen, &coupling, &gain, &space).unwrap();
        let delta = c(0.05, -0.02);
        let bad = gain.with_gain(2, gain.gain(2).unwrap() + delta).unwrap();
        let w0 = ExoState::unit(Arc::clone(&space), 2).unwrap();
        let z0 = SpectralVector::zeros(gen.modes().clone());
        let grid = log_grid(1.0, 100.0, 50).unwrap();
        let r = simulate_closed_loop(&gen, &coupling, &bad, &z0, &w0, &grid).unwrap();
        let h = c(1.0, space.omega(2)).inv();
        let mismatch = error_formula_check(&r, &pi, &gen, &coupling).unwrap();
        assert!(mismatch >= 0.99 * (delta * h).norm());
    }

    #[test]
    fn superposition() {
        let (gen, coupling, space) = wave(15, 4);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let w0 = ExoState::from_fn(Arc::clone(&space), |k| c(0.3, -0.1 * k as f64));
        let z0 = smooth_z0(&gen);
        let z1 = SpectralVector::from_fn(gen.modes().clone(), |n| c(0.0, 1.0 / (n * n) as f64));
        let sum = SpectralVector::from_fn(gen.modes().clone(), |n| z0.get(n).unwrap() + z1.get(n).unwrap());
        let grid = [0.0, 0.3, 2.0, 17.0];
        let zero_w = ExoState::zeros(Arc::clone(&space));
        let a = simulate_closed_loop(&gen, &coupling, &gain, &sum, &w0, &grid).unwrap();
        let b = simulate_closed_loop(&gen, &coupling, &gain, &z0, &w0, &grid).unwrap();
        let d = simulate_closed_loop(&gen, &coupling, &gain, &z1, &zero_w, &grid).unwrap();
        for i in 0..grid.len() {
            for ((x, y), z) in a.z[i].coeffs().iter().zip(b.z[i].coeffs()).zip(d.z[i].coeffs()) {
                assert!((x - y - z).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn synthetic_inverse_time_certificate() {
        let t = log_grid(1.0, 1e3, 400).unwrap();
        let space = Arc::new(ExoSpace::with_power_weights(1.0, ModeRange::symmetric(0).unwrap(), 0.0).unwrap());
        let modes = ModeRange::symmetric(0).unwrap();
        let result = SimulationResult {
            e: t.iter().map(|t| c(1.0 / t, 0.0)).collect(),
            state_dev: t.iter().map(|t| 1.0 / t).collect(),
            y: vec![c(0.0, 0.0); t.len()],
            y_r: vec![c(0.0, 0.0); t.len()],
            u: vec![c(0.0, 0.0); t.len()],
            z: vec![],
            z0: SpectralVector::zeros(modes),
            w0: ExoState::zeros(space),
            t,
        };
        let cert = decay_certificate(&result, 1.0, (10.0, 1e3)).unwrap();
        assert_relative_eq!(cert.m, 1.0, epsilon = 1e-12);
        assert_relative_eq!(cert.error_slope().unwrap(), -1.0, epsilon = 1e-9);
        assert!(cert.passes() && cert.matches_rate() && cert.error_decreasing);
        assert!(matches!(decay_certificate(&result, 1.0, (10.0, 20.0)), Err(Error::InsufficientWindow { .. })));
    }

    #[test]
    fn wave_state_deviation_decays_polynomially() {
        let (gen, coupling, space) = wave(200, 5);
        let gain = build_feedforward(&gen, &coupling, &space, 1e-8).unwrap();
        let w0 = ExoState::from_fn(Arc::clone(&space), |k| c(1.0 / (1.0 + (k * k) as f64), 0.0));
        let z0 = smooth_z0(&gen);
        let grid = log_grid(1e-2, 1e3, 512).unwrap();
        let r = simulate_closed_loop(&gen, &coupling, &gain, &z0, &w0, &grid).unwrap();
        let cert = decay_certificate(&r, 2.0, (10.0, 1e3)).unwrap();
        assert!(cert.passes(), "state slope {}", cert.state_slope());
    }

    #[test]
    fn envelope_monotonicity() {
        let env = |v: &[f64]| v.iter().enumerate().map(|(i, v)| (i as f64 + 1.0, *v)).collect::<Vec<_>>();
        assert!(is_decreasing_envelope(&env(&[4.0, 2.0, 1.5, 1.7, 0.5]), 0.0));
        assert!(!is_decreasing_envelope(&env(&[4.0, 2.0, 4.5, 1.0]), 0.0));
        assert!(!is_decreasing_envelope(&env(&[1.0, 1.0, 1.0]), 0.0));
        assert!(is_decreasing_envelope(&env(&[1e-17, 2e-17, 1e-17]), 1e-16));
    }

    #[test]
    fn binning() {
        let t: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (t * 0.7).sin().abs() / t).collect();
        let env = binned_envelope(&t, &v, (1.0, 100.0), 4);
        assert!(env.len() <= 9);
        assert!(env.windows(2).all(|w| w[1].0 > w[0].0));
    }
}
