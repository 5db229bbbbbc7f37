//! Worst-case regularization on sampled functions over `[0, 1]`.
//!
//! The toolkit is built around the first-kind equation `Au = g` with
//! `(Au)(x) = ∫_0^x u(s) ds` and noisy data `||g_delta - g|| <= delta`, and
//! measures regularizers by their error uniformly over every candidate that is
//! consistent with the data and the a-priori class:
//!
//! * [`grid`]: sampled functions, discrete Hölder norms, the integration
//!   operator and noise injection.
//! * [`differentiator`]: the central/one-sided difference regularizer with
//!   step `h ~ delta^(1/a)` and its certified bound `delta/h + M h^(a-1)`.
//! * [`adversary`]: feasible-set membership, samplers, worst-case error
//!   estimates and adversarial pairs that lower-bound any method's error.
//! * [`variational`]: constrained minimization of
//!   `||Av - g_delta|| + delta * phi(v)` over `{phi <= c}`.
//! * [`modulus`]: the modulus of continuity of `A^{-1}` on a compactum.
//!
//! # Randomness
//!
//! Every random draw comes from [`seeded_rng`]: ChaCha8 seeded with
//! `seed_from_u64(seed)` and the stream set to the element index, so results
//! are reproducible and independent of thread scheduling.

pub mod adversary;
pub mod differentiator;
pub mod error;
pub mod grid;
pub mod modulus;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{GridFunction, HolderParams, NoiseModel, NoisyData};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The one generator used throughout: ChaCha8, `seed_from_u64(seed)`, stream `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), (x, y)| {
        let dx = x.ln() - mx;
        (num + dx * (y.ln() - my), den + dx * dx)
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1e-4, -3.0e300, 2.0_f64.sqrt(), 0.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(1e-4), "1.0000000000000000e-4");
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<_> = [1e-2_f64, 1e-3, 1e-4].iter().map(|&d| (d, 3.0 * d.powf(0.7))).collect();
        assert!((log_log_slope(&pts) - 0.7).abs() < 1e-12);
    }
}
