//! Scalar truncation and cutoff primitives.
//!
//! These are the pointwise tools the energy estimates are built from: the flat
//! truncation `T_k`, its tail `G_k`, the primitive of `gamma`-th powers of
//! `T_k`, the plateau cutoff `V_gamma`, and the truncated power source `h_n`.
//! All of them are cheap closed forms; keeping them in one place makes the
//! algebraic identities between them testable in isolation.

/// Flat truncation at level `k >= 0`: clamps `s` into `[-k, k]`.
pub fn truncate(s: f64, k: f64) -> f64 {
    debug_assert!(k >= 0.0);
    s.clamp(-k, k)
}

/// Tail beyond level `k`: `s - truncate(s, k)`.
pub fn tail(s: f64, k: f64) -> f64 {
    s - truncate(s, k)
}

/// Primitive of `t -> min(t, k)^gamma` on `[0, s]`, for `s, k >= 0` and
/// `gamma > 0`.
///
/// Below the truncation level this is `s^{gamma+1}/(gamma+1)`; past it the
/// integrand is frozen at `k^gamma` and the primitive continues linearly.
pub fn truncation_primitive(s: f64, k: f64, gamma: f64) -> f64 {
    debug_assert!(s >= 0.0 && k >= 0.0 && gamma > 0.0);
    if s <= k {
        s.powf(gamma + 1.0) / (gamma + 1.0)
    } else {
        k.powf(gamma + 1.0) / (gamma + 1.0) + k.powf(gamma) * (s - k)
    }
}

/// Piecewise linear plateau cutoff: `1` on `[0, gamma]`, linear down to `0`
/// on `[gamma, 2 gamma]`, `0` beyond.
pub fn plateau_cutoff(s: f64, gamma: f64) -> f64 {
    debug_assert!(s >= 0.0 && gamma > 0.0);
    if s <= gamma {
        1.0
    } else if s <= 2.0 * gamma {
        (2.0 * gamma - s) / gamma
    } else {
        0.0
    }
}

/// Truncated power source `h_n(s) = min(n, s^{q-1})` for `s >= 0`, `q > 1`.
///
/// Negative inputs are treated as zero; committed states are nonnegative and
/// this keeps intermediate round-off from producing NaN powers.
pub fn power_source(s: f64, q: f64, n: u32) -> f64 {
    debug_assert!(q > 1.0);
    let s = s.max(0.0);
    (n as f64).min(s.powf(q - 1.0))
}
