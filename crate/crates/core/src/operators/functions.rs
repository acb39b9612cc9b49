//! Scalar generating functions of the exponential integrator.
//!
//! Every function takes `z = τλ ≥ 0`. Below `SERIES_CUTOFF` a short Taylor
//! series replaces the closed form, which would lose all digits to cancellation.

pub const SERIES_CUTOFF: f64 = 1e-5;

/// `φ₁(−z) = (1 − e^{−z}) / z`.
pub fn phi1_neg(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `Q(z) = z / (e^z − 1)`.
pub fn q_fn(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        1.0 - z / 2.0 + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// `Q₁(z) = Q(z) + z/2`.
pub fn q1_fn(z: f64) -> f64 {
    q_fn(z) + z / 2.0
}
