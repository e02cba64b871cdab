//! Frequency-domain construction of the regulator: transfer function
//! samples, the feedforward gain `L`, and the spectral solution `Pi` of
//! `A Pi + B L + P = Pi S`, `C Pi = delta_0`.
//!
//! All quantities are computed from the same retained plant modes, so both
//! regulator equations hold for the truncated plant up to rounding.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exosystem::{ExoSpace, ExoState};
use crate::spectral::{classify_tail, resolvent_apply, resolvent_gap, DiagonalGenerator, ModeRange, SpectralVector, Summability, TailReport};
use crate::tolerances;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Modal coefficients of `B`, `C` and `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalCoupling {
    b: SpectralVector,
    c: SpectralVector,
    /// Keyed `(k, n)` so a column of `P` is a contiguous range.
    p: BTreeMap<(i64, i64), Complex64>,
}

impl ModalCoupling {
    /// `p_entries` maps `(n, k)` to `<P theta_k, psi_n>`.
    pub fn new(b: SpectralVector, c: SpectralVector, p_entries: impl IntoIterator<Item = ((i64, i64), Complex64)>) -> Result<Self> {
        if b.modes() != c.modes() {
            return Err(Error::ModeRangeMismatch { expected: b.modes().len(), actual: c.modes().len() });
        }
        let mut p = BTreeMap::new();
        for ((n, k), v) in p_entries {
            if !b.modes().contains(n) {
                return Err(Error::InvalidParameter(format!("disturbance entry on unretained plant mode {n}")));
            }
            if v != ZERO {
                *p.entry((k, n)).or_insert(ZERO) += v;
            }
        }
        Ok(Self { b, c, p })
    }

    pub fn without_disturbance(b: SpectralVector, c: SpectralVector) -> Result<Self> {
        Self::new(b, c, [])
    }

    pub fn b(&self) -> &SpectralVector {
        &self.b
    }

    pub fn c(&self) -> &SpectralVector {
        &self.c
    }

    pub fn modes(&self) -> &ModeRange {
        self.b.modes()
    }

    pub fn has_disturbance(&self) -> bool {
        !self.p.is_empty()
    }

    pub fn p_entry(&self, n: i64, k: i64) -> Complex64 {
        self.p.get(&(k, n)).copied().unwrap_or(ZERO)
    }

    /// Nonzero entries `(n, value)` of column `k` of `P`.
    pub fn p_column(&self, k: i64) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.p.range((k, i64::MIN)..=(k, i64::MAX)).map(|(&(_, n), &v)| (n, v))
    }

    /// All nonzero entries as `((n, k), value)`.
    pub fn p_entries(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.p.iter().map(|(&(k, n), &v)| ((n, k), v))
    }

    fn check_generator(&self, gen: &DiagonalGenerator) -> Result<()> {
        if gen.modes() != self.modes() {
            return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: self.modes().len() });
        }
        Ok(())
    }
}

/// A sample `H(lambda)` with its conditioning.
#[derive(Clone, Debug)]
pub struct TransferValue {
    pub value: Complex64,
    pub min_gap: f64,
    pub nearest_mode: i64,
    /// Sum of `|c_n b_n / (lambda - mu_n)|` over the outer tenth of the retained
    /// modes; a proxy for the truncation error.
    pub boundary_contribution: f64,
}

/// `H(lambda) = C R(lambda, A) B = sum_n c_n b_n / (lambda - mu_n)`.
pub fn transfer_function(gen: &DiagonalGenerator, coupling: &ModalCoupling, lambda: Complex64) -> Result<TransferValue> {
    coupling.check_generator(gen)?;
    let (min_gap, nearest_mode) = resolvent_gap(gen, lambda)?;
    let edge = 0.9 * gen.modes().max_abs() as f64;
    let mut value = ZERO;
    let mut boundary_contribution = 0.0;
    for (((n, mu), b), c) in gen.iter().zip(coupling.b.coeffs()).zip(coupling.c.coeffs()) {
        let term = c * b / (lambda - mu);
        value += term;
        if n.unsigned_abs() as f64 >= edge {
            boundary_contribution += term.norm();
        }
    }
    Ok(TransferValue { value, min_gap, nearest_mode, boundary_contribution })
}

/// `H_d(k) = C R(i omega_k, A) P theta_k`.
pub fn disturbance_transfer(gen: &DiagonalGenerator, coupling: &ModalCoupling, space: &ExoSpace, k: i64) -> Result<Complex64> {
    coupling.check_generator(gen)?;
    let lambda = Complex64::new(0.0, space.omega(k));
    let mut acc = ZERO;
    for (n, p) in coupling.p_column(k) {
        let pos = gen.modes().position(n).expect("validated on construction");
        let mu = gen.eigenvalues()[pos];
        if lambda == mu {
            return Err(Error::SingularResolvent { mode: n, lambda });
        }
        acc += coupling.c.coeffs()[pos] * p / (lambda - mu);
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct FrequencySample {
    pub k: i64,
    pub omega: f64,
    pub h: Complex64,
    pub min_gap: f64,
    pub nearest_mode: i64,
}

/// Scan of `|H(i omega_k)|` against a floor.
#[derive(Clone, Debug)]
pub struct Assumption1Report {
    pub floor: f64,
    pub samples: Vec<FrequencySample>,
    pub min_magnitude: f64,
    pub argmin: i64,
    pub passes: bool,
}

impl Assumption1Report {
    /// The sample with the smallest distance between `i omega_k` and the spectrum.
    pub fn tightest_resonance(&self) -> Option<&FrequencySample> {
        self.samples.iter().min_by(|a, b| a.min_gap.total_cmp(&b.min_gap))
    }
}

pub fn check_assumption1(gen: &DiagonalGenerator, coupling: &ModalCoupling, space: &ExoSpace, floor: f64) -> Result<Assumption1Report> {
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("assumption-1 floor must be positive, got {floor}")));
    }
    let mut samples = Vec::with_capacity(space.modes().len());
    for &k in space.modes().indices() {
        let omega = space.omega(k);
        let tv = transfer_function(gen, coupling, Complex64::new(0.0, omega))?;
        samples.push(FrequencySample { k, omega, h: tv.value, min_gap: tv.min_gap, nearest_mode: tv.nearest_mode });
    }
    let (min_magnitude, argmin) = samples
        .iter()
        .map(|s| (s.h.norm(), s.k))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("exosystem has at least one mode");
    Ok(Assumption1Report { floor, min_magnitude, argmin, passes: min_magnitude >= floor, samples })
}

/// Modal gains `l_k = H(i omega_k)^{-1} [1 - H_d(k)]`, i.e. `L theta_k`.
///
/// With `K = 0` this is also `Gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedforwardGain {
    space: Arc<ExoSpace>,
    ell: Vec<Complex64>,
    /// `(H(i omega_k), H_d(k))` used to build each gain, when known.
    provenance: Option<Vec<(Complex64, Complex64)>>,
}

impl FeedforwardGain {
    /// Gains supplied directly (e.g. from a file or for fault injection).
    pub fn from_values(space: Arc<ExoSpace>, ell: Vec<Complex64>) -> Result<Self> {
        if ell.len() != space.modes().len() {
            return Err(Error::ModeRangeMismatch { expected: space.modes().len(), actual: ell.len() });
        }
        Ok(Self { space, ell, provenance: None })
    }

    pub fn space(&self) -> &Arc<ExoSpace> {
        &self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.ell
    }

    pub fn gain(&self, k: i64) -> Option<Complex64> {
        self.space.modes().position(k).map(|p| self.ell[p])
    }

    pub fn provenance(&self) -> Option<&[(Complex64, Complex64)]> {
        self.provenance.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.space.modes().indices().iter().copied().zip(self.ell.iter().copied())
    }

    /// Copy with `l_k` replaced; provenance is dropped.
    pub fn with_gain(&self, k: i64, value: Complex64) -> Result<Self> {
        let pos = self
            .space
            .modes()
            .position(k)
            .ok_or_else(|| Error::InvalidParameter(format!("exosystem mode {k} is not retained")))?;
        let mut ell = self.ell.clone();
        ell[pos] = value;
        Ok(Self { space: Arc::clone(&self.space), ell, provenance: None })
    }

    /// `L w = sum_k l_k w_k`.
    pub fn apply(&self, w: &ExoState) -> Result<Complex64> {
        self.check_space(w.space())?;
        Ok(self.ell.iter().zip(w.coeffs()).map(|(l, c)| l * c).sum())
    }

    fn check_space(&self, space: &ExoSpace) -> Result<()> {
        if *self.space != *space {
            return Err(Error::ModeRangeMismatch { expected: self.space.modes().len(), actual: space.modes().len() });
        }
        Ok(())
    }
}

pub fn build_feedforward(gen: &DiagonalGenerator, coupling: &ModalCoupling, space: &Arc<ExoSpace>, floor: f64) -> Result<FeedforwardGain> {
    let report = check_assumption1(gen, coupling, space, floor)?;
    if !report.passes {
        return Err(Error::Assumption1 { k: report.argmin, magnitude: report.min_magnitude, floor });
    }
    gain_from_samples(gen, coupling, space, &report)
}

/// Like [`build_feedforward`] but only refuses an exactly vanishing `H(i omega_k)`.
pub fn build_feedforward_unchecked(gen: &DiagonalGenerator, coupling: &ModalCoupling, space: &Arc<ExoSpace>) -> Result<FeedforwardGain> {
    let report = check_assumption1(gen, coupling, space, f64::MIN_POSITIVE)?;
    if report.min_magnitude == 0.0 {
        return Err(Error::Assumption1 { k: report.argmin, magnitude: 0.0, floor: 0.0 });
    }
    gain_from_samples(gen, coupling, space, &report)
}

fn gain_from_samples(gen: &DiagonalGenerator, coupling: &ModalCoupling, space: &Arc<ExoSpace>, report: &Assumption1Report) -> Result<FeedforwardGain> {
    let mut ell = Vec::with_capacity(report.samples.len());
    let mut provenance = Vec::with_capacity(report.samples.len());
    for sample in &report.samples {
        let h_d = disturbance_transfer(gen, coupling, space, sample.k)?;
        ell.push((Complex64::new(1.0, 0.0) - h_d) / sample.h);
        provenance.push((sample.h, h_d));
    }
    Ok(FeedforwardGain { space: Arc::clone(space), ell, provenance: Some(provenance) })
}

/// Summability of `|l_k / f_k|^2`, which makes `L` bounded on `W`.
#[derive(Clone, Debug)]
pub struct Assumption2Report {
    pub terms: Vec<(i64, f64)>,
    pub tail: TailReport,
}

impl Assumption2Report {
    pub fn passes(&self) -> bool {
        self.tail.verdict == Summability::Summable
    }
}

pub fn check_assumption2(gain: &FeedforwardGain, space: &ExoSpace) -> Result<Assumption2Report> {
    gain.check_space(space)?;
    let terms: Vec<(i64, f64)> = gain
        .iter()
        .zip(space.weights())
        .map(|((k, l), f)| (k, (l / f).norm_sqr()))
        .collect();
    let tail = classify_tail(terms.iter().copied());
    Ok(Assumption2Report { terms, tail })
}

/// Column `k` of `B L + P`: `b_n l_k + p_{n,k}`.
pub fn forcing_column(coupling: &ModalCoupling, gain: &FeedforwardGain, k: i64) -> Result<SpectralVector> {
    let l = gain
        .gain(k)
        .ok_or_else(|| Error::InvalidParameter(format!("exosystem mode {k} is not retained")))?;
    let mut col = SpectralVector::from_fn(coupling.modes().clone(), |n| {
        coupling.b.get(n).expect("same modes") * l
    });
    for (n, p) in coupling.p_column(k) {
        let pos = col.modes().position(n).expect("validated on construction");
        col.coeffs_mut()[pos] += p;
    }
    Ok(col)
}

/// Modal matrix `pi_{n,k} = <Pi theta_k, psi_n>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SylvesterSolution {
    plant_modes: ModeRange,
    space: Arc<ExoSpace>,
    /// Column-major: column `k` occupies one contiguous block of plant modes.
    pi: Vec<Complex64>,
    operator_norm_estimate: f64,
}

impl SylvesterSolution {
    /// Assemble from explicit columns (one per exosystem mode, in mode order).
    pub fn from_columns(space: Arc<ExoSpace>, columns: Vec<SpectralVector>) -> Result<Self> {
        if columns.len() != space.modes().len() {
            return Err(Error::ModeRangeMismatch { expected: space.modes().len(), actual: columns.len() });
        }
        let plant_modes = columns[0].modes().clone();
        let mut pi = Vec::with_capacity(plant_modes.len() * columns.len());
        for col in &columns {
            if *col.modes() != plant_modes {
                return Err(Error::ModeRangeMismatch { expected: plant_modes.len(), actual: col.modes().len() });
            }
            pi.extend_from_slice(col.coeffs());
        }
        let mut sol = Self { plant_modes, space, pi, operator_norm_estimate: 0.0 };
        sol.operator_norm_estimate = sol.weighted_norm_estimate(tolerances::POWER_ITERATIONS);
        Ok(sol)
    }

    pub fn plant_modes(&self) -> &ModeRange {
        &self.plant_modes
    }

    pub fn space(&self) -> &Arc<ExoSpace> {
        &self.space
    }

    /// Estimate of `||Pi||_{L(W, Z)}` from power iteration on `(pi_{n,k} / f_k)`.
    pub fn operator_norm_estimate(&self) -> f64 {
        self.operator_norm_estimate
    }

    fn column_slice(&self, kpos: usize) -> &[Complex64] {
        let n = self.plant_modes.len();
        &self.pi[kpos * n..(kpos + 1) * n]
    }

    pub fn column(&self, k: i64) -> Option<SpectralVector> {
        let kpos = self.space.modes().position(k)?;
        Some(SpectralVector::new(self.plant_modes.clone(), self.column_slice(kpos).to_vec()).expect("sizes agree"))
    }

    pub fn entry(&self, n: i64, k: i64) -> Option<Complex64> {
        let kpos = self.space.modes().position(k)?;
        let npos = self.plant_modes.position(n)?;
        Some(self.column_slice(kpos)[npos])
    }

    /// All entries as `(n, k, pi_{n,k})`, column by column.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let plant = self.plant_modes.indices();
        self.space.modes().indices().iter().enumerate().flat_map(move |(kpos, &k)| {
            plant.iter().zip(self.column_slice(kpos)).map(move |(&n, &v)| (n, k, v))
        })
    }

    /// `Pi w = sum_k w_k Pi theta_k`.
    pub fn apply(&self, w: &ExoState) -> Result<SpectralVector> {
        if **w.space() != *self.space {
            return Err(Error::ModeRangeMismatch { expected: self.space.modes().len(), actual: w.coeffs().len() });
        }
        let mut out = SpectralVector::zeros(self.plant_modes.clone());
        for (kpos, &wk) in w.coeffs().iter().enumerate() {
            if wk == ZERO {
                continue;
            }
            for (o, p) in out.coeffs_mut().iter_mut().zip(self.column_slice(kpos)) {
                *o += p * wk;
            }
        }
        Ok(out)
    }

    /// Sets an entry; for fault-injection checks.
    pub fn set_entry(&mut self, n: i64, k: i64, value: Complex64) -> Result<()> {
        let kpos = self.space.modes().position(k).ok_or_else(|| Error::InvalidParameter(format!("mode {k}")))?;
        let npos = self.plant_modes.position(n).ok_or_else(|| Error::InvalidParameter(format!("mode {n}")))?;
        let len = self.plant_modes.len();
        self.pi[kpos * len + npos] = value;
        Ok(())
    }

    fn weighted_norm_estimate(&self, iterations: usize) -> f64 {
        let rows = self.plant_modes.len();
        let weights = self.space.weights();
        let cols = weights.len();
        let m = |npos: usize, kpos: usize| self.pi[kpos * rows + npos] / weights[kpos];
        let mut v = vec![Complex64::new(1.0 / (cols as f64).sqrt(), 0.0); cols];
        let mut sigma = 0.0;
        for _ in 0..iterations {
            let mut mv = vec![ZERO; rows];
            for (kpos, vk) in v.iter().enumerate() {
                for (npos, acc) in mv.iter_mut().enumerate() {
                    *acc += m(npos, kpos) * vk;
                }
            }
            sigma = mv.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let mut next = vec![ZERO; cols];
            for (kpos, out) in next.iter_mut().enumerate() {
                *out = mv.iter().enumerate().map(|(npos, x)| m(npos, kpos).conj() * x).sum();
            }
            let norm = next.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return sigma;
            }
            v = next.into_iter().map(|x| x / norm).collect();
        }
        sigma
    }
}

/// `Pi theta_k = R(i omega_k, A) (B L + P) theta_k` for every exosystem mode.
pub fn solve_regulator(gen: &DiagonalGenerator, coupling: &ModalCoupling, gain: &FeedforwardGain, space: &Arc<ExoSpace>) -> Result<SylvesterSolution> {
    coupling.check_generator(gen)?;
    gain.check_space(space)?;
    let mut columns = Vec::with_capacity(space.modes().len());
    for &k in space.modes().indices() {
        let forcing = forcing_column(coupling, gain, k)?;
        let lambda = Complex64::new(0.0, space.omega(k));
        columns.push(resolvent_apply(gen, lambda, &forcing)?.vector);
    }
    SylvesterSolution::from_columns(Arc::clone(space), columns)
}

/// `max_k ||i omega_k pi_k - A pi_k - (B L + P) theta_k|| / (1 + ||pi_k||)`.
pub fn residual_first_equation(
    pi: &SylvesterSolution,
    gen: &DiagonalGenerator,
    coupling: &ModalCoupling,
    gain: &FeedforwardGain,
    space: &ExoSpace,
) -> Result<f64> {
    coupling.check_generator(gen)?;
    gain.check_space(space)?;
    if pi.plant_modes != *gen.modes() || *pi.space != *space {
        return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: pi.plant_modes.len() });
    }
    let mut worst: f64 = 0.0;
    for (kpos, &k) in space.modes().indices().iter().enumerate() {
        let iw = Complex64::new(0.0, space.omega(k));
        let forcing = forcing_column(coupling, gain, k)?;
        let col = pi.column_slice(kpos);
        let mut res2 = 0.0;
        let mut col2 = 0.0;
        for ((mu, p), g) in gen.eigenvalues().iter().zip(col).zip(forcing.coeffs()) {
            res2 += (iw * p - mu * p - g).norm_sqr();
            col2 += p.norm_sqr();
        }
        worst = worst.max(res2.sqrt() / (1.0 + col2.sqrt()));
    }
    Ok(worst)
}

/// `max_k |sum_n c_n pi_{n,k} - 1|`, i.e. the defect of `C Pi theta_k = delta_0 theta_k`.
pub fn residual_second_equation(pi: &SylvesterSolution, coupling: &ModalCoupling, space: &ExoSpace) -> Result<f64> {
    if pi.plant_modes != *coupling.modes() || *pi.space != *space {
        return Err(Error::ModeRangeMismatch { expected: coupling.modes().len(), actual: pi.plant_modes.len() });
    }
    Ok((0..space.modes().len())
        .map(|kpos| {
            let y: Complex64 = coupling.c.coeffs().iter().zip(pi.column_slice(kpos)).map(|(c, p)| c * p).sum();
            (y - 1.0).norm()
        })
        .fold(0.0, f64::max))
}

/// `u(t) = L T_S(t) w0 = sum_k l_k w0_k e^{i omega_k t}`.
pub fn control_signal(gain: &FeedforwardGain, w0: &ExoState, t: f64) -> Result<Complex64> {
    gain.check_space(w0.space())?;
    Ok(gain
        .values()
        .iter()
        .zip(w0.iter())
        .filter(|(_, (_, w))| *w != ZERO)
        .map(|(l, (k, w))| l * w * Complex64::from_polar(1.0, w0.space().omega(k) * t))
        .sum())
}
