//! Truncated-chain stationary distributions, used as independent
//! cross-checks of the closed-form station results.
//!
//! Both solvers work on the state space {0..M} and return a normalized
//! probability vector. They never consult the closed forms: the M/M/1 chain
//! is solved by the birth-death recursion, and the batch chain by backward
//! substitution through its level-crossing balance equations, so agreement
//! with the geometric formulas is evidence, not circularity.

use crate::error::{Error, Result};

const TAIL_BOUND: f64 = 1e-10;
const RESCALE_THRESHOLD: f64 = 1e250;

/// Stationary distribution of the M/M/1 chain truncated to {0..M}.
///
/// The truncation must leave a tail mass `rho^(M+1)` below 1e-10.
pub fn ctmc_oracle_mm1(lambda: f64, mu: f64, truncation: usize) -> Result<Vec<f64>> {
    validate_rates(lambda, mu)?;
    let rho = lambda / mu;
    if rho >= 1.0 {
        return Err(Error::UnstableStation {
            arrival_rate: lambda,
            capacity: mu,
        });
    }
    let tail = rho.powi(truncation as i32 + 1);
    if tail >= TAIL_BOUND {
        return Err(Error::TruncationTooSmall {
            tail,
            bound: TAIL_BOUND,
        });
    }
    let mut pi = vec![0.0; truncation + 1];
    pi[0] = 1.0;
    for n in 0..truncation {
        pi[n + 1] = pi[n] * rho;
    }
    normalize(&mut pi);
    Ok(pi)
}

/// Stationary distribution of the batch-service chain truncated to {0..M}.
///
/// Transitions are single arrivals at rate `lambda` and service epochs at
/// rate `mu` that remove `min(n, K)` packets at once. The level-crossing
/// balance across the cut below state `j`,
///
/// ```text
/// lambda * pi[j-1] = mu * (pi[j] + ... + pi[min(M, j+K-1)])
/// ```
///
/// telescopes into a three-term recurrence solved backward from the top
/// state. The tail is validated afterwards from the distribution's own
/// top-end ratio, keeping the check free of the closed-form root.
pub fn ctmc_oracle_batch(lambda: f64, mu: f64, k: u32, truncation: usize) -> Result<Vec<f64>> {
    validate_rates(lambda, mu)?;
    if k == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let capacity = f64::from(k) * mu;
    if lambda > 0.0 && lambda >= capacity {
        return Err(Error::UnstableStation {
            arrival_rate: lambda,
            capacity,
        });
    }
    let m = truncation;
    let mut pi = vec![0.0; m + 1];
    if lambda == 0.0 {
        pi[0] = 1.0;
        return Ok(pi);
    }
    if m == 0 {
        return Err(Error::TruncationTooSmall {
            tail: 1.0,
            bound: TAIL_BOUND,
        });
    }
    let k = k as usize;
    pi[m] = 1.0;
    pi[m - 1] = mu / lambda * pi[m];
    for j in (1..m).rev() {
        let above = if j + k <= m { pi[j + k] } else { 0.0 };
        pi[j - 1] = ((lambda + mu) * pi[j] - mu * above) / lambda;
        if pi[j - 1] > RESCALE_THRESHOLD {
            let scale = 1.0 / RESCALE_THRESHOLD;
            for value in pi[j - 1..].iter_mut() {
                *value *= scale;
            }
        }
    }
    normalize(&mut pi);

    let tail = extrapolated_tail(&pi, k);
    if !(tail < TAIL_BOUND) {
        return Err(Error::TruncationTooSmall {
            tail,
            bound: TAIL_BOUND,
        });
    }
    Ok(pi)
}

/// Estimates the probability mass the truncation cut off.
///
/// The top of the truncated distribution carries a boundary layer (state M
/// loses no mass to arrivals, so it balances at `pi[M]/pi[M-1] = lambda/mu`),
/// so the geometric decay rate is read off well below it and extrapolated
/// past M. Returns infinity when the distribution is too short to contain a
/// relaxed interior or has not decayed there.
fn extrapolated_tail(pi: &[f64], k: usize) -> f64 {
    let m = pi.len() - 1;
    let margin = k + 48;
    if m < margin + 2 {
        return f64::INFINITY;
    }
    let probe = m - margin;
    let ratio = pi[probe + 1] / pi[probe];
    if !(ratio < 1.0) || !(ratio > 0.0) {
        return f64::INFINITY;
    }
    pi[probe] * ratio.powi((m + 1 - probe) as i32) / (1.0 - ratio)
}

/// Batch-chain stationary distribution with the truncation grown
/// automatically until the tail bound is met.
pub fn ctmc_oracle_batch_auto(lambda: f64, mu: f64, k: u32) -> Result<Vec<f64>> {
    let mut truncation = 64;
    loop {
        match ctmc_oracle_batch(lambda, mu, k, truncation) {
            Err(Error::TruncationTooSmall { .. }) if truncation < (1 << 21) => {
                truncation *= 2;
            }
            other => return other,
        }
    }
}

/// Mean of a distribution over {0..M}.
pub fn distribution_mean(distribution: &[f64]) -> f64 {
    distribution
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

fn validate_rates(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "arrival rate must be finite and non-negative, got {lambda}"
        )));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "service rate must be finite and positive, got {mu}"
        )));
    }
    Ok(())
}

fn normalize(pi: &mut [f64]) {
    let total: f64 = pi.iter().sum();
    for value in pi.iter_mut() {
        *value /= total;
    }
}
