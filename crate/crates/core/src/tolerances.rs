//! Default numerical thresholds shared by the checks and reports.

/// Relative tolerance for algebraic identities (regulator equations, column identities).
pub const ALGEBRAIC_REL: f64 = 1e-10;

/// Allowed deviation of a fitted log-log decay exponent from its nominal value.
pub const SLOPE_TOL: f64 = 0.05;

/// Tail exponents below this classify a series as summable.
pub const SUMMABLE_EXPONENT: f64 = -1.05;

/// Tail exponents above this classify a series as divergent.
pub const DIVERGENT_EXPONENT: f64 = -0.95;

/// Minimum admissible `|H(i omega_k)|`.
pub const ASSUMPTION1_FLOOR: f64 = 1e-8;

/// Power-iteration steps for operator-norm estimates.
pub const POWER_ITERATIONS: usize = 50;

/// Allowed deviation of a tracking-error decay slope from `-1/alpha`.
pub const CERTIFICATE_SLOPE_TOL: f64 = 0.1;

/// Log-spaced envelope bins per decade used by the decay certificate.
pub const ENVELOPE_BINS_PER_DECADE: usize = 8;
