//! Integral representation of `Pi`, conformity diagnostics, the variation of
//! constants identity for `Pi`, and regularity of the input vector.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exosystem::{ExoSpace, ExoState};
use crate::regulator::{forcing_column, FeedforwardGain, ModalCoupling, SylvesterSolution};
use crate::spectral::{check_time_grid, classify_tail, forced_response, fractional_terms, DiagonalGenerator, ModeRange, SpectralVector, Summability, TailReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureMethod {
    /// Closed-form antiderivative per mode.
    Analytic,
    /// Composite trapezoid rule with the given step.
    Trapezoid { step: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec {
    horizons: Vec<f64>,
    method: QuadratureMethod,
}

impl Default for QuadratureSpec {
    /// Horizons `10 * 2^j`, `j = 0..=7`, analytic.
    fn default() -> Self {
        Self { horizons: (0..8).map(|j| 10.0 * f64::powi(2.0, j)).collect(), method: QuadratureMethod::Analytic }
    }
}

impl QuadratureSpec {
    pub fn new(horizons: Vec<f64>, method: QuadratureMethod) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::InvalidParameter("horizon schedule is empty".into()));
        }
        if !horizons.iter().all(|t| t.is_finite() && *t > 0.0) || horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("horizons must be positive and strictly increasing".into()));
        }
        if let QuadratureMethod::Trapezoid { step } = method {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidParameter(format!("quadrature step must be positive, got {step}")));
            }
        }
        Ok(Self { horizons, method })
    }

    pub fn horizons(&self) -> &[f64] {
        &self.horizons
    }

    pub fn method(&self) -> QuadratureMethod {
        self.method
    }

    pub fn max_horizon(&self) -> f64 {
        *self.horizons.last().expect("nonempty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConformityVerdict {
    ConformTrend,
    NonConformTrend,
    Inconclusive,
}

impl std::fmt::Display for ConformityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConformityVerdict::ConformTrend => "conform-trend",
            ConformityVerdict::NonConformTrend => "non-conform-trend",
            ConformityVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// Bounds on `||Delta||_{L(W, D((-A)^beta))}` from the weighted matrix
/// `D_{n,k} = |mu_n|^beta d_{n,k} / f_k`.
#[derive(Clone, Debug)]
pub struct FractionalEvidence {
    pub beta: f64,
    /// Largest weighted column norm; a lower bound for the operator norm.
    pub column_sup: f64,
    /// Frobenius norm; an upper bound for the operator norm.
    pub hilbert_schmidt: f64,
    /// Row sums `sum_k |D_{n,k}|^2` classified over `n`.
    pub mode_tail: TailReport,
    /// Column sums `sum_n |D_{n,k}|^2` classified over `k`.
    pub frequency_tail: TailReport,
}

impl FractionalEvidence {
    pub fn bounded(&self) -> bool {
        self.mode_tail.verdict == Summability::Summable && self.frequency_tail.verdict == Summability::Summable
    }
}

/// Conformity is a property of the untruncated operator; at truncation the
/// verdict only describes norm trends across horizons and modes.
#[derive(Clone, Debug)]
pub struct ConformityReport {
    /// `(T_j, ||column(T_{j+1}) - column(T_j)||)` for consecutive horizons.
    pub tail_norms: Vec<(f64, f64)>,
    pub verdict: ConformityVerdict,
    pub sufficient_condition: Option<FractionalEvidence>,
}

impl ConformityReport {
    /// Tails that have underflowed to zero count as decreasing.
    pub fn tails_strictly_decreasing(&self) -> bool {
        self.tail_norms.windows(2).all(|w| w[1].1 < w[0].1 || w[1].1 == 0.0)
    }

    fn tails_decayed(&self) -> bool {
        match (self.tail_norms.first(), self.tail_norms.last()) {
            (Some(first), Some(last)) => last.1 < first.1 || first.1 == 0.0,
            _ => true,
        }
    }
}

fn trend_verdict(tails: &[(f64, f64)]) -> ConformityVerdict {
    let report = ConformityReport { tail_norms: tails.to_vec(), verdict: ConformityVerdict::Inconclusive, sufficient_condition: None };
    let all_zero = tails.iter().all(|t| t.1 == 0.0);
    if all_zero || report.tails_strictly_decreasing() {
        ConformityVerdict::ConformTrend
    } else if report.tails_decayed() {
        ConformityVerdict::Inconclusive
    } else {
        ConformityVerdict::NonConformTrend
    }
}

/// `int_0^T e^{-i omega t} T_A(t) d dt` at every horizon of the schedule.
fn column_at_horizons(gen: &DiagonalGenerator, d: &SpectralVector, omega: f64, spec: &QuadratureSpec) -> Vec<SpectralVector> {
    let iw = Complex64::new(0.0, omega);
    match spec.method {
        QuadratureMethod::Analytic => spec
            .horizons
            .iter()
            .map(|&t| {
                let coeffs = gen
                    .eigenvalues()
                    .iter()
                    .zip(d.coeffs())
                    .map(|(mu, dn)| dn * (1.0 - ((mu - iw) * t).exp()) / (iw - mu))
                    .collect();
                SpectralVector::new(d.modes().clone(), coeffs).expect("sizes agree")
            })
            .collect(),
        QuadratureMethod::Trapezoid { step } => {
            let rates: Vec<Complex64> = gen.eigenvalues().iter().map(|mu| mu - iw).collect();
            let mut acc = vec![Complex64::new(0.0, 0.0); rates.len()];
            let mut out = Vec::with_capacity(spec.horizons.len());
            let mut start = 0.0;
            for &end in &spec.horizons {
                let steps = ((end - start) / step).ceil().max(1.0) as usize;
                let h = (end - start) / steps as f64;
                for ((a, rate), dn) in acc.iter_mut().zip(&rates).zip(d.coeffs()) {
                    if *dn == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let ratio = (rate * h).exp();
                    let mut f = (rate * start).exp();
                    let mut sum = 0.5 * f;
                    for _ in 1..steps {
                        f *= ratio;
                        sum += f;
                    }
                    sum += 0.5 * (rate * end).exp();
                    *a += dn * sum * h;
                }
                out.push(SpectralVector::new(d.modes().clone(), acc.clone()).expect("sizes agree"));
                start = end;
            }
            out
        }
    }
}

fn increments(columns: &[SpectralVector], horizons: &[f64]) -> Vec<(f64, f64)> {
    columns
        .windows(2)
        .zip(horizons)
        .map(|(w, &t)| (t, w[1].distance(&w[0]).expect("same modes")))
        .collect()
}

/// `Pi theta_k` from the integral representation, truncated at the largest
/// horizon of `spec`.
pub fn quadrature_pi_column(
    gen: &DiagonalGenerator,
    delta_column: &SpectralVector,
    omega: f64,
    spec: &QuadratureSpec,
) -> Result<(SpectralVector, ConformityReport)> {
    if gen.modes() != delta_column.modes() {
        return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: delta_column.modes().len() });
    }
    let columns = column_at_horizons(gen, delta_column, omega, spec);
    let tail_norms = increments(&columns, &spec.horizons);
    let verdict = trend_verdict(&tail_norms);
    let column = columns.into_iter().next_back().expect("nonempty schedule");
    Ok((column, ConformityReport { tail_norms, verdict, sufficient_condition: None }))
}

/// An operator `W -> Z` stored by its images of the exosystem basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnOperator {
    space: Arc<ExoSpace>,
    plant_modes: ModeRange,
    columns: Vec<SpectralVector>,
}

impl ColumnOperator {
    pub fn new(space: Arc<ExoSpace>, columns: Vec<SpectralVector>) -> Result<Self> {
        if columns.len() != space.modes().len() {
            return Err(Error::ModeRangeMismatch { expected: space.modes().len(), actual: columns.len() });
        }
        let plant_modes = columns[0].modes().clone();
        if let Some(bad) = columns.iter().find(|c| *c.modes() != plant_modes) {
            return Err(Error::ModeRangeMismatch { expected: plant_modes.len(), actual: bad.modes().len() });
        }
        Ok(Self { space, plant_modes, columns })
    }

    pub fn from_fn(space: Arc<ExoSpace>, plant_modes: ModeRange, f: impl Fn(i64, i64) -> Complex64) -> Self {
        let columns = space
            .modes()
            .indices()
            .iter()
            .map(|&k| SpectralVector::from_fn(plant_modes.clone(), |n| f(n, k)))
            .collect();
        Self { space, plant_modes, columns }
    }

    pub fn zeros(space: Arc<ExoSpace>, plant_modes: ModeRange) -> Self {
        Self::from_fn(space, plant_modes, |_, _| Complex64::new(0.0, 0.0))
    }

    /// `Delta = B L + P`.
    pub fn forcing(coupling: &ModalCoupling, gain: &FeedforwardGain) -> Result<Self> {
        let columns = gain
            .space()
            .modes()
            .indices()
            .iter()
            .map(|&k| forcing_column(coupling, gain, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(Arc::clone(gain.space()), columns)
    }

    pub fn space(&self) -> &Arc<ExoSpace> {
        &self.space
    }

    pub fn plant_modes(&self) -> &ModeRange {
        &self.plant_modes
    }

    pub fn column(&self, k: i64) -> Option<&SpectralVector> {
        self.space.modes().position(k).map(|p| &self.columns[p])
    }

    /// `(k, omega_k, f_k, column)` for every exosystem mode.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64, f64, &SpectralVector)> + '_ {
        self.space
            .modes()
            .indices()
            .iter()
            .zip(self.space.weights())
            .zip(&self.columns)
            .map(|((&k, &f), col)| (k, self.space.omega(k), f, col))
    }

    fn check(&self, gen: &DiagonalGenerator, space: &ExoSpace) -> Result<()> {
        if self.plant_modes != *gen.modes() {
            return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: self.plant_modes.len() });
        }
        if *self.space != *space {
            return Err(Error::ModeRangeMismatch { expected: space.modes().len(), actual: self.space.modes().len() });
        }
        Ok(())
    }
}

fn fractional_evidence(gen: &DiagonalGenerator, delta: &ColumnOperator, beta: f64) -> Result<FractionalEvidence> {
    let mut rows = vec![0.0; gen.modes().len()];
    let mut cols = Vec::with_capacity(delta.columns.len());
    for (k, _, f, col) in delta.iter() {
        let terms = fractional_terms(gen, beta, col)?;
        let mut col_sum = 0.0;
        for (r, t) in rows.iter_mut().zip(&terms) {
            let weighted = t / (f * f);
            *r += weighted;
            col_sum += weighted;
        }
        cols.push((k, col_sum));
    }
    let column_sup = cols.iter().map(|c| c.1).fold(0.0, f64::max).sqrt();
    let hilbert_schmidt = rows.iter().sum::<f64>().sqrt();
    let mode_tail = classify_tail(gen.modes().indices().iter().copied().zip(rows));
    let frequency_tail = classify_tail(cols);
    Ok(FractionalEvidence { beta, column_sup, hilbert_schmidt, mode_tail, frequency_tail })
}

/// Trend evidence that `Delta` is conform, from the `f`-weighted quadrature
/// remainders of all columns and from the sufficient condition
/// `Delta in L(W, D((-A)^{alpha + eps}))`.
pub fn conformity_diagnostic(
    gen: &DiagonalGenerator,
    delta: &ColumnOperator,
    space: &ExoSpace,
    alpha: f64,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<ConformityReport> {
    if !(alpha > 0.0 && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha and eps must be positive, got {alpha}, {eps}")));
    }
    delta.check(gen, space)?;
    let mut squared = vec![0.0; spec.horizons.len().saturating_sub(1)];
    for (_, omega, f, col) in delta.iter() {
        if col.is_zero() {
            continue;
        }
        let columns = column_at_horizons(gen, col, omega, spec);
        for (acc, (_, tail)) in squared.iter_mut().zip(increments(&columns, &spec.horizons)) {
            *acc += (tail / f).powi(2);
        }
    }
    let tail_norms: Vec<(f64, f64)> = spec.horizons.iter().copied().zip(squared.into_iter().map(f64::sqrt)).collect();
    let evidence = fractional_evidence(gen, delta, alpha + eps)?;
    let report = ConformityReport { tail_norms, verdict: ConformityVerdict::Inconclusive, sufficient_condition: None };
    let verdict = if report.tail_norms.iter().all(|t| t.1 == 0.0) {
        ConformityVerdict::ConformTrend
    } else if !report.tails_decayed() {
        ConformityVerdict::NonConformTrend
    } else if evidence.bounded() {
        ConformityVerdict::ConformTrend
    } else if evidence.mode_tail.verdict == Summability::Divergent || evidence.frequency_tail.verdict == Summability::Divergent {
        ConformityVerdict::Inconclusive
    } else {
        trend_verdict(&report.tail_norms).min_confidence()
    };
    Ok(ConformityReport { verdict, sufficient_condition: Some(evidence), ..report })
}

impl ConformityVerdict {
    /// Without bounded fractional evidence a decreasing trend alone is not enough.
    fn min_confidence(self) -> Self {
        match self {
            ConformityVerdict::ConformTrend => ConformityVerdict::Inconclusive,
            other => other,
        }
    }
}

/// `max_t ||LHS - RHS|| / (1 + ||RHS||)` for
/// `int_0^t T_A(t - s) Delta T_S(s) w ds = Pi T_S(t) w - T_A(t) Pi w`.
pub fn lemma_identity_check(
    gen: &DiagonalGenerator,
    delta: &ColumnOperator,
    pi: &SylvesterSolution,
    w: &ExoState,
    t_grid: &[f64],
) -> Result<f64> {
    delta.check(gen, w.space())?;
    if pi.plant_modes() != gen.modes() || **pi.space() != **w.space() {
        return Err(Error::ModeRangeMismatch { expected: gen.modes().len(), actual: pi.plant_modes().len() });
    }
    check_time_grid(t_grid)?;
    let pi_w = pi.apply(w)?;
    let active: Vec<(usize, f64, Complex64)> = w
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
        .map(|(pos, c)| (pos, w.space().omega(w.space().modes().indices()[pos]), *c))
        .collect();
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let mut diff2 = 0.0;
        let mut rhs2 = 0.0;
        let shifted = pi.apply(&w.group_apply(t))?;
        for (npos, &mu) in gen.eigenvalues().iter().enumerate() {
            let mut lhs = Complex64::new(0.0, 0.0);
            for &(kpos, omega, wk) in &active {
                let d = delta.columns[kpos].coeffs()[npos];
                if d != Complex64::new(0.0, 0.0) {
                    lhs += d * wk * forced_response(mu, Complex64::new(0.0, omega), t);
                }
            }
            let rhs = shifted.coeffs()[npos] - (mu * t).exp() * pi_w.coeffs()[npos];
            diff2 += (lhs - rhs).norm_sqr();
            rhs2 += rhs.norm_sqr();
        }
        worst = worst.max(diff2.sqrt() / (1.0 + rhs2.sqrt()));
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct RegularityEntry {
    pub beta: f64,
    pub tail: TailReport,
}

impl RegularityEntry {
    pub fn passes(&self) -> bool {
        self.tail.verdict == Summability::Summable
    }
}

/// Membership of `b` in `D((-A)^beta)` for each `beta`, judged from the
/// tail of `sum_n |mu_n|^{2 beta} |b_n|^2`.
pub fn check_b_regularity(gen: &DiagonalGenerator, b: &SpectralVector, beta_grid: &[f64]) -> Result<Vec<RegularityEntry>> {
    beta_grid
        .iter()
        .map(|&beta| {
            let terms = fractional_terms(gen, beta, b)?;
            let tail = classify_tail(gen.modes().indices().iter().copied().zip(terms));
            Ok(RegularityEntry { beta, tail })
        })
        .collect()
}
