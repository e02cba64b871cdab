//! Diagonal-operator calculus in modal coordinates.
//!
//! Every operator acts on a finite [`ModeRange`]; sups and sums over the
//! integers become maxima and sums over the retained modes. Reports flag
//! the cases where an extremizer sits on the edge of the retained range.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances;

/// A contiguous integer range of modes with optional holes.
#[derive(Clone, Debug)]
pub struct ModeRange {
    lo: i64,
    hi: i64,
    excluded: BTreeSet<i64>,
    indices: Vec<i64>,
}

impl PartialEq for ModeRange {
    fn eq(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.excluded == other.excluded
    }
}

impl Eq for ModeRange {}

impl ModeRange {
    pub fn new(lo: i64, hi: i64, excluded: impl IntoIterator<Item = i64>) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidModeRange(format!("lo = {lo} exceeds hi = {hi}")));
        }
        let excluded: BTreeSet<i64> = excluded.into_iter().collect();
        if let Some(&bad) = excluded.iter().find(|&&m| m < lo || m > hi) {
            return Err(Error::InvalidModeRange(format!(
                "excluded mode {bad} lies outside [{lo}, {hi}]"
            )));
        }
        let indices: Vec<i64> = (lo..=hi).filter(|m| !excluded.contains(m)).collect();
        if indices.is_empty() {
            return Err(Error::InvalidModeRange("no modes left after exclusion".into()));
        }
        Ok(Self { lo, hi, excluded, indices })
    }

    /// Modes `-n..=n`.
    pub fn symmetric(n: i64) -> Result<Self> {
        Self::new(-n, n, [])
    }

    /// Modes `-n..=n` without `0`.
    pub fn symmetric_punctured(n: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidModeRange("punctured range needs n >= 1".into()));
        }
        Self::new(-n, n, [0])
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn excluded(&self) -> &BTreeSet<i64> {
        &self.excluded
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, mode: i64) -> Option<usize> {
        self.indices.binary_search(&mode).ok()
    }

    pub fn contains(&self, mode: i64) -> bool {
        self.position(mode).is_some()
    }

    /// True for the first and last retained modes.
    pub fn is_boundary(&self, mode: i64) -> bool {
        self.indices.first() == Some(&mode) || self.indices.last() == Some(&mode)
    }

    pub fn max_abs(&self) -> i64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn check_same(&self, other: &ModeRange) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ModeRangeMismatch { expected: self.len(), actual: other.len() })
        }
    }
}

/// Coefficients of a state vector in the modal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    modes: ModeRange,
    coeffs: Vec<Complex64>,
}

impl SpectralVector {
    pub fn new(modes: ModeRange, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(Error::ModeRangeMismatch { expected: modes.len(), actual: coeffs.len() });
        }
        Ok(Self { modes, coeffs })
    }

    pub fn zeros(modes: ModeRange) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); modes.len()];
        Self { modes, coeffs }
    }

    pub fn unit(modes: ModeRange, mode: i64) -> Result<Self> {
        let pos = modes.position(mode).ok_or_else(|| {
            Error::InvalidParameter(format!("mode {mode} is not retained"))
        })?;
        let mut v = Self::zeros(modes);
        v.coeffs[pos] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_fn(modes: ModeRange, f: impl Fn(i64) -> Complex64) -> Self {
        let coeffs = modes.indices().iter().map(|&m| f(m)).collect();
        Self { modes, coeffs }
    }

    pub fn modes(&self) -> &ModeRange {
        &self.modes
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, mode: i64) -> Option<Complex64> {
        self.modes.position(mode).map(|p| self.coeffs[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.modes.indices().iter().copied().zip(self.coeffs.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    /// Euclidean distance to another vector on the same modes.
    pub fn distance(&self, other: &SpectralVector) -> Result<f64> {
        self.modes.check_same(&other.modes)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Generator `A` given by its eigenvalues in Riesz-basis coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalGenerator {
    modes: ModeRange,
    eigenvalues: Vec<Complex64>,
}

impl DiagonalGenerator {
    /// Every eigenvalue must be finite with strictly negative real part.
    pub fn new(modes: ModeRange, eigenvalues: Vec<Complex64>) -> Result<Self> {
        if eigenvalues.len() != modes.len() {
            return Err(Error::ModeRangeMismatch {
                expected: modes.len(),
                actual: eigenvalues.len(),
            });
        }
        for (&mode, &mu) in modes.indices().iter().zip(&eigenvalues) {
            if !(mu.re.is_finite() && mu.im.is_finite()) || mu.re >= 0.0 {
                return Err(Error::UnstableMode { mode, eigenvalue: mu });
            }
        }
        Ok(Self { modes, eigenvalues })
    }

    pub fn from_fn(modes: ModeRange, f: impl Fn(i64) -> Complex64) -> Result<Self> {
        let eigenvalues = modes.indices().iter().map(|&m| f(m)).collect();
        Self::new(modes, eigenvalues)
    }

    pub fn modes(&self) -> &ModeRange {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, mode: i64) -> Option<Complex64> {
        self.modes.position(mode).map(|p| self.eigenvalues[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.modes.indices().iter().copied().zip(self.eigenvalues.iter().copied())
    }

    /// `max_n Re mu_n`, strictly negative by construction.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|m| m.re).fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_vector(&self, v: &SpectralVector) -> Result<()> {
        self.modes.check_same(&v.modes)
    }
}

/// Coefficient-wise action of `T_A(t)`.
pub fn semigroup_apply(gen: &DiagonalGenerator, t: f64, v: &SpectralVector) -> Result<SpectralVector> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("semigroup time must be >= 0, got {t}")));
    }
    gen.check_vector(v)?;
    let coeffs = gen
        .eigenvalues
        .iter()
        .zip(&v.coeffs)
        .map(|(&mu, &c)| (mu * t).exp() * c)
        .collect();
    Ok(SpectralVector { modes: v.modes.clone(), coeffs })
}

/// Result of applying `R(lambda, A)`, with the conditioning of the solve.
#[derive(Clone, Debug)]
pub struct Resolvent {
    pub vector: SpectralVector,
    /// `min_n |lambda - mu_n|`.
    pub min_gap: f64,
    pub nearest_mode: i64,
}

pub fn resolvent_apply(gen: &DiagonalGenerator, lambda: Complex64, v: &SpectralVector) -> Result<Resolvent> {
    gen.check_vector(v)?;
    let (min_gap, nearest_mode) = resolvent_gap(gen, lambda)?;
    let coeffs = gen
        .eigenvalues
        .iter()
        .zip(&v.coeffs)
        .map(|(&mu, &c)| c / (lambda - mu))
        .collect();
    Ok(Resolvent {
        vector: SpectralVector { modes: v.modes.clone(), coeffs },
        min_gap,
        nearest_mode,
    })
}

/// Smallest distance from `lambda` to the retained spectrum and the mode attaining it.
pub fn resolvent_gap(gen: &DiagonalGenerator, lambda: Complex64) -> Result<(f64, i64)> {
    let mut best = (f64::INFINITY, gen.modes.indices()[0]);
    for (mode, mu) in gen.iter() {
        let gap = (lambda - mu).norm();
        if gap == 0.0 {
            return Err(Error::SingularResolvent { mode, lambda });
        }
        if gap < best.0 {
            best = (gap, mode);
        }
    }
    Ok(best)
}

/// Per-mode terms `|mu_n|^{2 beta} |v_n|^2` of the squared fractional norm.
pub fn fractional_terms(gen: &DiagonalGenerator, beta: f64, v: &SpectralVector) -> Result<Vec<f64>> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    gen.check_vector(v)?;
    Ok(gen
        .eigenvalues
        .iter()
        .zip(&v.coeffs)
        .map(|(mu, c)| {
            if beta == 0.0 {
                c.norm_sqr()
            } else {
                mu.norm().powf(2.0 * beta) * c.norm_sqr()
            }
        })
        .collect())
}

/// `||(-A)^beta v||` using the diagonal closed form.
pub fn fractional_norm(gen: &DiagonalGenerator, beta: f64, v: &SpectralVector) -> Result<f64> {
    Ok(fractional_terms(gen, beta, v)?.iter().sum::<f64>().sqrt())
}

#[derive(Clone, Debug)]
pub struct GeometricCheck {
    pub mode: i64,
    pub eigenvalue: Complex64,
    /// `-c / |Im mu|^alpha`.
    pub bound: f64,
    pub passes: bool,
}

/// Outcome of testing `Re mu_n <= -c / |Im mu_n|^alpha` for `|Im mu_n| >= d`.
#[derive(Clone, Debug)]
pub struct GeometricReport {
    pub alpha: f64,
    pub c: f64,
    pub d: f64,
    pub checks: Vec<GeometricCheck>,
    pub passes: bool,
    /// Largest `c` for which the inequality holds on every checked mode.
    pub tightest_c: Option<f64>,
    pub tightest_mode: Option<i64>,
}

pub fn check_geometric_condition(gen: &DiagonalGenerator, alpha: f64, c: f64, d: f64) -> Result<GeometricReport> {
    if !(alpha > 0.0 && c > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha, c, d must be positive (got {alpha}, {c}, {d})"
        )));
    }
    let mut checks = Vec::new();
    let mut tightest: Option<(f64, i64)> = None;
    for (mode, mu) in gen.iter() {
        let im = mu.im.abs();
        if im < d {
            continue;
        }
        let scale = im.powf(alpha);
        let bound = -c / scale;
        // equality is the generic case for exact power-law spectra
        let passes = mu.re <= bound * (1.0 - tolerances::ALGEBRAIC_REL);
        let admissible = mu.re.abs() * scale;
        if tightest.is_none_or(|(best, _)| admissible < best) {
            tightest = Some((admissible, mode));
        }
        checks.push(GeometricCheck { mode, eigenvalue: mu, bound, passes });
    }
    let passes = checks.iter().all(|c| c.passes);
    Ok(GeometricReport {
        alpha,
        c,
        d,
        passes,
        tightest_c: tightest.map(|t| t.0),
        tightest_mode: tightest.map(|t| t.1),
        checks,
    })
}

/// Values of `sup_n e^{Re mu_n t} |mu_n|^{-beta}` on a time grid.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub argmax_modes: Vec<i64>,
    /// Grid times at which the maximizing mode is the first or last retained mode.
    pub boundary_hits: Vec<f64>,
}

impl Envelope {
    pub fn touches_boundary(&self) -> bool {
        !self.boundary_hits.is_empty()
    }
}

pub fn decay_envelope(gen: &DiagonalGenerator, beta: f64, t_grid: &[f64]) -> Result<Envelope> {
    if t_grid.is_empty() {
        return Err(Error::InsufficientWindow { needed: 1, got: 0 });
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    check_time_grid(t_grid)?;
    let log_weights: Vec<f64> = gen.eigenvalues.iter().map(|mu| -beta * mu.norm().ln()).collect();
    let mut values = Vec::with_capacity(t_grid.len());
    let mut argmax_modes = Vec::with_capacity(t_grid.len());
    let mut boundary_hits = Vec::new();
    for &t in t_grid {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (mu, lw)) in gen.eigenvalues.iter().zip(&log_weights).enumerate() {
            let log_value = mu.re * t + lw;
            if log_value > best.0 {
                best = (log_value, i);
            }
        }
        let mode = gen.modes.indices()[best.1];
        if gen.modes.is_boundary(mode) {
            boundary_hits.push(t);
        }
        values.push(best.0.exp());
        argmax_modes.push(mode);
    }
    Ok(Envelope { t: t_grid.to_vec(), values, argmax_modes, boundary_hits })
}

pub(crate) fn check_time_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter("time grid must be finite and nonnegative".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Log-log least-squares fit `envelope ~ prefactor * t^{-exponent}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub exponent: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    /// Maximum absolute deviation of `ln envelope` from the fitted line.
    pub residual: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

pub fn fit_decay_rate(envelope: &[f64], t_grid: &[f64], window: (f64, f64)) -> Result<DecayReport> {
    fit_with_min(envelope, t_grid, window, MIN_FIT_POINTS)
}

fn fit_with_min(envelope: &[f64], t_grid: &[f64], window: (f64, f64), min_points: usize) -> Result<DecayReport> {
    if envelope.len() != t_grid.len() {
        return Err(Error::ModeRangeMismatch { expected: t_grid.len(), actual: envelope.len() });
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("degenerate window [{lo}, {hi}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in t_grid.iter().zip(envelope) {
        if t < lo || t > hi {
            continue;
        }
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::NonPositiveEnvelope { t });
        }
        xs.push(t.ln());
        ys.push(e.ln());
    }
    if xs.len() < min_points {
        return Err(Error::InsufficientWindow { needed: min_points, got: xs.len() });
    }
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(DecayReport {
        exponent: -slope,
        prefactor: intercept.exp(),
        window,
        residual,
        points: xs.len(),
    })
}

pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Polynomial decay, or decay faster than any fixed power on the window.
#[derive(Clone, Debug, PartialEq)]
pub enum DecayClass {
    Polynomial(DecayReport),
    Superpolynomial {
        early_exponent: Option<f64>,
        late_exponent: Option<f64>,
    },
}

/// Fits the whole window and both log-halves; a late exponent well above the
/// early one (or underflow to zero) means the decay is not polynomial.
pub fn classify_decay(envelope: &[f64], t_grid: &[f64], window: (f64, f64)) -> Result<DecayClass> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("degenerate window [{lo}, {hi}]")));
    }
    let mid = (lo * hi).sqrt();
    let early = fit_with_min(envelope, t_grid, (lo, mid), MIN_FIT_POINTS / 2);
    let late = fit_with_min(envelope, t_grid, (mid, hi), MIN_FIT_POINTS / 2);
    if let Err(Error::NonPositiveEnvelope { .. }) = late {
        return Ok(DecayClass::Superpolynomial {
            early_exponent: early.ok().map(|r| r.exponent),
            late_exponent: None,
        });
    }
    let whole = fit_decay_rate(envelope, t_grid, window)?;
    let (early, late) = (early?, late?);
    let growth = late.exponent - early.exponent;
    if growth > 0.5_f64.max(0.25 * early.exponent.abs()) {
        Ok(DecayClass::Superpolynomial {
            early_exponent: Some(early.exponent),
            late_exponent: Some(late.exponent),
        })
    } else {
        Ok(DecayClass::Polynomial(whole))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Summability {
    Summable,
    Divergent,
    Inconclusive,
}

impl std::fmt::Display for Summability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Summability::Summable => "summable",
            Summability::Divergent => "divergent",
            Summability::Inconclusive => "inconclusive",
        })
    }
}

/// Trend classification of a nonnegative series indexed by integer modes.
#[derive(Clone, Debug)]
pub struct TailReport {
    /// Fitted power `s` in `term(|k|) ~ |k|^s` over the tail.
    pub exponent: Option<f64>,
    pub verdict: Summability,
    pub total: f64,
    /// `(K, sum over |k| <= K)`.
    pub partial_sums: Vec<(u64, f64)>,
    pub fitted_points: usize,
}

const MIN_TAIL_POINTS: usize = 5;

/// Classifies a series `sum_k a_k` by the log-log slope of its tail.
///
/// Terms for `k` and `-k` are merged. The tail is `|k| >= K/8` where `K`
/// is the largest index supplied. A series whose support ends before `K/2`
/// counts as finitely supported, hence summable.
pub fn classify_tail(terms: impl IntoIterator<Item = (i64, f64)>) -> TailReport {
    let mut by_magnitude: BTreeMap<u64, f64> = BTreeMap::new();
    for (k, a) in terms {
        *by_magnitude.entry(k.unsigned_abs()).or_insert(0.0) += a;
    }
    let mut partial_sums = Vec::with_capacity(by_magnitude.len());
    let mut acc = 0.0;
    for (&m, &a) in &by_magnitude {
        acc += a;
        partial_sums.push((m, acc));
    }
    let total = acc;
    let top = by_magnitude.keys().next_back().copied().unwrap_or(0);
    let last_support = by_magnitude.iter().rev().find(|(_, a)| **a > 0.0).map(|(m, _)| *m);
    let finite_support = match last_support {
        None => true,
        Some(m) => 2 * m < top,
    };
    if finite_support {
        return TailReport {
            exponent: None,
            verdict: Summability::Summable,
            total,
            partial_sums,
            fitted_points: 0,
        };
    }
    let start = (top / 8).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = by_magnitude
        .range(start..)
        .filter(|(_, a)| **a > 0.0 && a.is_finite())
        .map(|(&m, &a)| ((m as f64).ln(), a.ln()))
        .unzip();
    if xs.len() < MIN_TAIL_POINTS {
        return TailReport {
            exponent: None,
            verdict: Summability::Inconclusive,
            total,
            partial_sums,
            fitted_points: xs.len(),
        };
    }
    let (slope, _) = least_squares_line(&xs, &ys);
    TailReport {
        exponent: Some(slope),
        verdict: summability_from_exponent(slope),
        total,
        partial_sums,
        fitted_points: xs.len(),
    }
}

pub fn summability_from_exponent(exponent: f64) -> Summability {
    if exponent < tolerances::SUMMABLE_EXPONENT {
        Summability::Summable
    } else if exponent > tolerances::DIVERGENT_EXPONENT {
        Summability::Divergent
    } else {
        Summability::Inconclusive
    }
}

/// `(e^z - 1) / z`, accurate near `z = 0`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for j in 2..40 {
            term *= z / j as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `int_0^t e^{a (t - s)} e^{b s} ds`, the response of `x' = a x + e^{b t}` from rest.
pub fn forced_response(a: Complex64, b: Complex64, t: f64) -> Complex64 {
    let z = (b - a) * t;
    if z.norm() < 0.5 {
        (a * t).exp() * t * phi1(z)
    } else {
        ((b * t).exp() - (a * t).exp()) / (b - a)
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidParameter(format!("invalid log grid [{lo}, {hi}] x {n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}
