//! Seeded random explicit partition functions for experiments and tests.
//!
//! Instances are normalized to `a_0 = 1` and hit a requested `ln A`
//! exactly, with several level-profile shapes: flat noise, a unimodal
//! bump, a binomial-like ridge, and sparse supports with empty levels.

use std::ops::RangeInclusive;

use rand::Rng;

use crate::logspace::{log_sum_exp, LogWeight};
use crate::partfn::PartitionFunction;

/// Draws a random explicit partition function with degree in
/// `degree_range`, `ln A` in `ln_a_range`, and `a_0 = 1`.
pub fn random_partition_function(
    rng: &mut impl Rng,
    degree_range: RangeInclusive<usize>,
    ln_a_range: RangeInclusive<f64>,
) -> PartitionFunction {
    let n = rng.gen_range(degree_range);
    let target_ln_a = rng.gen_range(ln_a_range);
    let shape = rng.gen_range(0..4u8);
    let mut raw: Vec<f64> = match shape {
        // flat noise
        0 => (1..=n).map(|_| rng.gen_range(0.0..4.0)).collect(),
        // unimodal bump with a random peak
        1 => {
            let peak = rng.gen_range(1..=n) as f64;
            let width = rng.gen_range(0.5..(n as f64 + 1.0));
            (1..=n)
                .map(|i| -((i as f64 - peak) / width).powi(2) * rng.gen_range(1.0..4.0))
                .collect()
        }
        // binomial-like ridge
        2 => {
            let scale = rng.gen_range(0.2..1.5);
            (1..=n).map(|i| scale * ln_choose(n, i)).collect()
        }
        // sparse support with empty levels
        _ => {
            let mut v: Vec<f64> = (1..=n)
                .map(|_| {
                    if rng.gen_bool(0.4) {
                        rng.gen_range(0.0..4.0)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            // at least one occupied level above 0
            if v.iter().all(|x| *x == f64::NEG_INFINITY) {
                let i = rng.gen_range(0..n);
                v[i] = rng.gen_range(0.0..4.0);
            }
            v
        }
    };

    // rescale levels >= 1 so that 1 + Σ_{i>=1} a_i = e^{target}
    let ln_mass_needed = target_ln_a + (-(-target_ln_a).exp()).ln_1p(); // ln(e^t − 1)
    let ln_mass_now = log_sum_exp(raw.iter().copied());
    let shift = ln_mass_needed - ln_mass_now;
    for x in raw.iter_mut() {
        if *x != f64::NEG_INFINITY {
            *x += shift;
        }
    }

    let mut log_coeffs = Vec::with_capacity(n + 1);
    log_coeffs.push(LogWeight::ONE);
    for x in raw {
        log_coeffs.push(if x == f64::NEG_INFINITY {
            LogWeight::ZERO
        } else {
            LogWeight::new(x).expect("finite shifted log")
        });
    }
    PartitionFunction::new(log_coeffs).expect("a_0 = 1 by construction")
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln n!` by direct summation; desk-scale arguments only.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// The adaptive lower-bound instance `Z(β) = (1 + e^{-β})^n`, whose
/// coefficients are the binomials `C(n, i)`.
pub fn binomial_partition_function(n: usize) -> PartitionFunction {
    let log_coeffs: Vec<LogWeight> = (0..=n)
        .map(|i| LogWeight::new(ln_choose(n, i)).expect("binomial log is finite"))
        .collect();
    PartitionFunction::new(log_coeffs).expect("C(n,0) = 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn generator_respects_requested_shape() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            let z = random_partition_function(&mut rng, 3..=50, 3.0..=30.0);
            assert!(z.degree() >= 3 && z.degree() <= 50);
            assert_eq!(z.log_coeffs()[0].ln(), 0.0);
            let ln_a = z.ln_a();
            assert!(ln_a >= 3.0 - 1e-9 && ln_a <= 30.0 + 1e-9, "ln_a = {ln_a}");
        }
    }

    #[test]
    fn binomial_instance_matches_closed_form() {
        let z = binomial_partition_function(64);
        assert!((z.ln_a() - 64.0 * 2.0f64.ln()).abs() < 1e-9);
        // ln Z(β) = n ln(1 + e^{-β})
        for beta in [0.0, 0.5, 1.3, 7.0] {
            let expected = 64.0 * (-beta).exp().ln_1p();
            assert!((z.log_z_at(beta) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn ln_choose_small_values() {
        assert!((ln_choose(5, 2) - 10.0f64.ln()).abs() < 1e-12);
        assert_eq!(ln_choose(7, 0), 0.0);
        assert_eq!(ln_choose(7, 7), 0.0);
    }
}
