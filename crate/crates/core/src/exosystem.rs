//! Periodic exosystem: weighted Fourier space `W`, shift group `T_S`,
//! and the point evaluation `Q = delta_0`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{classify_tail, ModeRange, TailReport};

/// Space of `p`-periodic signals `y(t) = sum_k y_k e^{i omega_k t}` with
/// `sum_k |y_k|^2 f_k^2 < infinity`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoSpace {
    period: f64,
    modes: ModeRange,
    weights: Vec<f64>,
    gamma: Option<f64>,
}

impl ExoSpace {
    pub fn new(period: f64, modes: ModeRange, weights: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
        }
        if weights.len() != modes.len() {
            return Err(Error::ModeRangeMismatch { expected: modes.len(), actual: weights.len() });
        }
        if let Some((k, f)) = modes.indices().iter().zip(&weights).find(|(_, f)| !(**f >= 1.0 && f.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight f_{k} = {f} must be finite and >= 1")));
        }
        Ok(Self { period, modes, weights, gamma: None })
    }

    /// Weights `f_k = (1 + omega_k^2)^{gamma / 2}`.
    pub fn with_power_weights(period: f64, modes: ModeRange, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight exponent must be >= 0, got {gamma}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
        }
        let weights = modes
            .indices()
            .iter()
            .map(|&k| {
                let w = 2.0 * PI * k as f64 / period;
                (1.0 + w * w).powf(gamma / 2.0)
            })
            .collect();
        Ok(Self { gamma: Some(gamma), ..Self::new(period, modes, weights)? })
    }

    /// The exponent when the weights came from [`ExoSpace::with_power_weights`].
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn modes(&self) -> &ModeRange {
        &self.modes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, k: i64) -> Option<f64> {
        self.modes.position(k).map(|p| self.weights[p])
    }

    /// `omega_k = 2 pi k / p`.
    pub fn omega(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.modes.indices().iter().map(|&k| self.omega(k)).collect()
    }

    /// `c = sqrt(sum_k f_k^{-2})`, so that `|delta_0 y| <= c ||y||_f`.
    pub fn dirac_constant(&self) -> f64 {
        self.weights.iter().map(|f| f.powi(-2)).sum::<f64>().sqrt()
    }

    /// Tail trend of `f_k^{-2}`; the untruncated space needs it summable.
    pub fn weight_summability(&self) -> TailReport {
        classify_tail(self.modes.indices().iter().zip(&self.weights).map(|(&k, f)| (k, f.powi(-2))))
    }
}

/// Fourier coefficients `w_k = <w, theta_k>_{L^2}` of an exosystem state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoState {
    space: Arc<ExoSpace>,
    coeffs: Vec<Complex64>,
}

impl ExoState {
    pub fn new(space: Arc<ExoSpace>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != space.modes.len() {
            return Err(Error::ModeRangeMismatch { expected: space.modes.len(), actual: coeffs.len() });
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<ExoSpace>) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); space.modes.len()];
        Self { space, coeffs }
    }

    pub fn unit(space: Arc<ExoSpace>, k: i64) -> Result<Self> {
        Self::from_pairs(space, [(k, Complex64::new(1.0, 0.0))])
    }

    pub fn from_fn(space: Arc<ExoSpace>, f: impl Fn(i64) -> Complex64) -> Self {
        let coeffs = space.modes.indices().iter().map(|&k| f(k)).collect();
        Self { space, coeffs }
    }

    /// Sparse construction; every listed mode must belong to the space.
    pub fn from_pairs(space: Arc<ExoSpace>, pairs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self> {
        let mut state = Self::zeros(space);
        for (k, c) in pairs {
            let pos = state
                .space
                .modes
                .position(k)
                .ok_or_else(|| Error::InvalidParameter(format!("exosystem mode {k} is not retained")))?;
            state.coeffs[pos] += c;
        }
        Ok(state)
    }

    pub fn space(&self) -> &Arc<ExoSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: i64) -> Option<Complex64> {
        self.space.modes.position(k).map(|p| self.coeffs[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.space.modes.indices().iter().copied().zip(self.coeffs.iter().copied())
    }

    /// Nonzero coefficients with their frequencies, `(k, omega_k, w_k)`.
    pub fn active(&self) -> impl Iterator<Item = (i64, f64, Complex64)> + '_ {
        self.iter()
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .map(|(k, c)| (k, self.space.omega(k), c))
    }

    /// `T_S(t) w`: each coefficient picks up the phase `e^{i omega_k t}`.
    pub fn group_apply(&self, t: f64) -> ExoState {
        let coeffs = self
            .iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, self.space.omega(k) * t))
            .collect();
        ExoState { space: Arc::clone(&self.space), coeffs }
    }

    /// `y(t) = sum_k w_k e^{i omega_k t}`.
    pub fn synthesize_signal(&self, t: f64) -> Complex64 {
        self.iter()
            .map(|(k, c)| c * Complex64::from_polar(1.0, self.space.omega(k) * t))
            .sum()
    }

    /// `delta_0 w = sum_k w_k`.
    pub fn dirac_functional(&self) -> Complex64 {
        self.coeffs.iter().sum()
    }

    /// `||w||_f = sqrt(sum_k |w_k|^2 f_k^2)`.
    pub fn weighted_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.space.weights)
            .map(|(c, f)| c.norm_sqr() * f * f)
            .sum::<f64>()
            .sqrt()
    }

    /// `||w||_S = ||w||_f + ||S w||_f` with `(S w)_k = i omega_k w_k`.
    pub fn graph_norm_s(&self) -> f64 {
        let s_norm = self
            .iter()
            .zip(&self.space.weights)
            .map(|((k, c), f)| {
                let w = self.space.omega(k);
                c.norm_sqr() * w * w * f * f
            })
            .sum::<f64>()
            .sqrt();
        self.weighted_norm() + s_norm
    }

    /// Tail trend of `|omega_k w_k f_k|^2`, the series defining `D(S)`.
    pub fn domain_report(&self) -> TailReport {
        classify_tail(self.iter().zip(&self.space.weights).map(|((k, c), f)| {
            let w = self.space.omega(k);
            (k, c.norm_sqr() * w * w * f * f)
        }))
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Whether `w_{-k} = conj(w_k)` on every retained pair, i.e. the signal is real.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.iter().all(|(k, c)| match self.get(-k) {
            Some(mirror) => (mirror - c.conj()).norm() <= tol,
            None => c.norm() <= tol,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionStatus {
    Holds,
    Unevaluated,
}

/// Which sufficient conditions for admissible reference signals are met.
#[derive(Clone, Debug)]
pub struct AdmissibilityReport {
    /// Reference signals almost periodic for every output map.
    pub almost_periodic: ConditionStatus,
    /// Countable spectrum and no closed subspace isomorphic to `c_0`.
    pub countable_no_c0: ConditionStatus,
    /// The spectrum `{i omega_k}` is discrete.
    pub discrete_spectrum: ConditionStatus,
    /// Finite-dimensional state space (true of every truncation).
    pub finite_dimensional: ConditionStatus,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        [self.almost_periodic, self.countable_no_c0, self.discrete_spectrum, self.finite_dimensional]
            .contains(&ConditionStatus::Holds)
    }
}

pub fn check_admissibility(space: &ExoSpace) -> AdmissibilityReport {
    // omega_k are distinct and 2 pi / p apart, so {i omega_k} has no finite accumulation point
    let spacing_ok = space.period.is_finite() && space.period > 0.0;
    AdmissibilityReport {
        almost_periodic: ConditionStatus::Unevaluated,
        countable_no_c0: ConditionStatus::Unevaluated,
        discrete_spectrum: if spacing_ok { ConditionStatus::Holds } else { ConditionStatus::Unevaluated },
        finite_dimensional: if space.modes.len() < usize::MAX {
            ConditionStatus::Holds
        } else {
            ConditionStatus::Unevaluated
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn space(period: f64, n: i64, gamma: f64) -> Arc<ExoSpace> {
        Arc::new(ExoSpace::with_power_weights(period, ModeRange::symmetric(n).unwrap(), gamma).unwrap())
    }

    #[test]
    fn rejects_invalid_spaces() {
        let modes = ModeRange::symmetric(1).unwrap();
        assert!(ExoSpace::new(0.0, modes.clone(), vec![1.0; 3]).is_err());
        assert!(ExoSpace::new(1.0, modes.clone(), vec![1.0, 0.5, 1.0]).is_err());
        assert!(ExoSpace::new(1.0, modes.clone(), vec![1.0; 2]).is_err());
        assert!(ExoSpace::with_power_weights(1.0, modes, -1.0).is_err());
    }

    #[test]
    fn group_identity_and_period() {
        let s = space(1.7, 4, 1.0);
        let w = ExoState::from_fn(Arc::clone(&s), |k| c(k as f64, 0.5));
        assert_eq!(w.group_apply(0.0), w);
        let after = w.group_apply(1.7);
        for (a, b) in after.coeffs().iter().zip(w.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn quarter_turn() {
        let s = space(2.0 * PI, 2, 1.0);
        let w = ExoState::unit(Arc::clone(&s), 1).unwrap();
        let out = w.group_apply(PI / 2.0).get(1).unwrap();
        assert!((out - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn synthesis_examples() {
        let s = space(2.0 * PI, 3, 1.0);
        let constant = ExoState::unit(Arc::clone(&s), 0).unwrap();
        assert_eq!(constant.synthesize_signal(0.37), c(1.0, 0.0));

        let half_i = c(0.0, 2.0).inv();
        let sine = ExoState::from_pairs(Arc::clone(&s), [(1, half_i), (-1, -half_i)]).unwrap();
        for t in [0.0, 0.3, 1.0, 2.5] {
            let y = sine.synthesize_signal(t);
            assert!((y.re - f64::sin(t)).abs() < 1e-15 && y.im.abs() < 1e-15);
        }
        assert!(sine.is_conjugate_symmetric(1e-15));
    }

    #[test]
    fn synthesis_matches_direct_summation() {
        // direct sum with cos/sin evaluated separately in reverse order
        let s = space(3.1, 2, 1.5);
        let coeffs = [c(0.3, -1.2), c(-0.7, 0.1), c(1.1, 0.4), c(0.05, 0.9), c(-0.4, -0.6)];
        let w = ExoState::new(Arc::clone(&s), coeffs.to_vec()).unwrap();
        let t = 0.7;
        let mut oracle = c(0.0, 0.0);
        for (idx, k) in (-2i64..=2).enumerate().collect::<Vec<_>>().into_iter().rev() {
            let phase = 2.0 * PI * k as f64 * t / 3.1;
            let (wr, wi) = (coeffs[idx].re, coeffs[idx].im);
            oracle += c(wr * phase.cos() - wi * phase.sin(), wr * phase.sin() + wi * phase.cos());
        }
        assert!((w.synthesize_signal(t) - oracle).norm() < 1e-14);
        assert!((w.synthesize_signal(t) - w.group_apply(t).dirac_functional()).norm() < 1e-14);
    }

    #[test]
    fn dirac_examples() {
        let s = space(2.0, 5, 1.0);
        assert_eq!(ExoState::unit(Arc::clone(&s), 3).unwrap().dirac_functional(), c(1.0, 0.0));
        assert_eq!(ExoState::zeros(Arc::clone(&s)).dirac_functional(), c(0.0, 0.0));
        // equality case of Cauchy-Schwarz: w_k = f_k^{-2}
        let w = ExoState::from_fn(Arc::clone(&s), |k| c(s.weight(k).unwrap().powi(-2), 0.0));
        let cst = s.dirac_constant();
        assert_relative_eq!(w.dirac_functional().re, cst * cst, max_relative = 1e-14);
        assert_relative_eq!(w.dirac_functional().norm(), cst * w.weighted_norm(), max_relative = 1e-14);
    }

    #[test]
    fn norm_examples() {
        let s = space(2.0, 5, 1.3);
        let k = 4;
        let unit = ExoState::unit(Arc::clone(&s), k).unwrap();
        let f = s.weight(k).unwrap();
        assert_relative_eq!(unit.weighted_norm(), f, max_relative = 1e-15);
        assert_relative_eq!(unit.graph_norm_s(), f * (1.0 + s.omega(k).abs()), max_relative = 1e-15);
        assert_eq!(ExoState::zeros(Arc::clone(&s)).weighted_norm(), 0.0);
        let two = ExoState::from_pairs(Arc::clone(&s), [(1, c(3.0, 0.0)), (2, c(0.0, 4.0))]).unwrap();
        let expected = (9.0 * s.weight(1).unwrap().powi(2) + 16.0 * s.weight(2).unwrap().powi(2)).sqrt();
        assert_relative_eq!(two.weighted_norm(), expected, max_relative = 1e-15);
    }

    #[test]
    fn admissibility_via_discrete_spectrum() {
        let rep = check_admissibility(&space(2.0, 10, 2.0));
        assert_eq!(rep.discrete_spectrum, ConditionStatus::Holds);
        assert_eq!(rep.finite_dimensional, ConditionStatus::Holds);
        assert_eq!(rep.countable_no_c0, ConditionStatus::Unevaluated);
        assert!(rep.admissible());
    }

    #[test]
    fn weight_summability_follows_gamma() {
        use crate::spectral::Summability;
        assert_eq!(space(2.0 * PI, 200, 1.0).weight_summability().verdict, Summability::Summable);
        assert_eq!(space(2.0 * PI, 200, 0.3).weight_summability().verdict, Summability::Divergent);
    }

    #[test]
    fn unknown_mode_is_rejected() {
        let s = space(2.0, 2, 1.0);
        assert!(ExoState::unit(s, 7).is_err());
    }

    fn state_strategy() -> impl Strategy<Value = (f64, Vec<(f64, f64)>, f64, f64)> {
        (0.5f64..20.0, prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9), -50.0f64..50.0, -50.0f64..50.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn dirac_bound_holds((period, raw, _, _) in state_strategy()) {
            let s = space(period, 4, 0.8);
            let w = ExoState::new(Arc::clone(&s), raw.iter().map(|(a, b)| c(*a, *b)).collect()).unwrap();
            prop_assert!(w.dirac_functional().norm() <= s.dirac_constant() * w.weighted_norm() * (1.0 + 1e-12));
        }
    }

    proptest! {
        #[test]
        fn group_is_isometric_and_compatible((period, raw, s1, s2) in state_strategy()) {
            let s = space(period, 4, 1.2);
            let w = ExoState::new(Arc::clone(&s), raw.iter().map(|(a, b)| c(*a, *b)).collect()).unwrap();
            let norm = w.weighted_norm();
            prop_assert!((w.group_apply(s1).weighted_norm() - norm).abs() <= 1e-12 * (1.0 + norm));
            let lhs = w.group_apply(s1).group_apply(s2);
            let rhs = w.group_apply(s1 + s2);
            for (a, b) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((a - b).norm() <= 1e-10 * (1.0 + b.norm()));
            }
            let shifted = w.group_apply(s1).synthesize_signal(s2);
            prop_assert!((shifted - w.synthesize_signal(s1 + s2)).norm() <= 1e-10 * (1.0 + w.l1_norm()));
            let y = w.synthesize_signal(s2);
            let y_next = w.synthesize_signal(s2 + period);
            prop_assert!((y - y_next).norm() <= 1e-12 * w.l1_norm());
        }
    }
}
