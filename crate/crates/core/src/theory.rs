//! Closed-form sample-complexity quantities. All logarithms are natural
//! and all divergences are in nats.

use crate::error::{Error, Result};
use crate::mixture::{cross_entropy, MixtureInterval, MixtureModel};

/// KL gap (scaled by 1/ln(2|A|^2)) between a mixture with `r` equilibria
/// and signal `q`, and the same mixture with one equilibrium removed.
pub fn beta(r: u64, q: f64, joint_size: u64) -> Result<f64> {
    if r < 2 {
        return Err(Error::domain(format!("beta needs r >= 2, got {r}")));
    }
    let interval = MixtureInterval::new(r, joint_size)?;
    if !interval.contains(q) {
        return Err(Error::domain(format!(
            "q = {q} outside ({}, {}]",
            interval.lower, interval.upper
        )));
    }
    let a = joint_size as f64;
    let r_f = r as f64;
    let p = 1.0 - q;
    let numerator = q * (q / r_f).ln() + p * (p / (a - r_f)).ln()
        - (r_f - 1.0) / r_f * q * (q / (r_f - 1.0)).ln()
        - (q / r_f + p) * (p / (a - r_f + 1.0)).ln();
    Ok(numerator / nll_scale(joint_size))
}

/// ln(2|A|^2).
pub fn nll_scale(joint_size: u64) -> f64 {
    std::f64::consts::LN_2 + 2.0 * (joint_size as f64).ln()
}

/// KL(P_p || P_r) from the four intersection cardinalities.
pub fn mixture_kl(p: &MixtureModel, r: &MixtureModel) -> Result<f64> {
    let kl = cross_entropy(p, r)? - cross_entropy(p, p)?;
    Ok(kl.max(0.0))
}

/// KL between two single-PSNE mixtures with distinct equilibria and a
/// shared q: `(|A|q - 1)/(|A| - 1) * (ln q - ln((1 - q)/(|A| - 1)))`.
pub fn fano_kl(q: f64, joint_size: u64) -> Result<f64> {
    if joint_size < 3 {
        return Err(Error::domain(format!("joint size {joint_size} < 3")));
    }
    let a = joint_size as f64;
    if !(q > 1.0 / a && q < 1.0) {
        return Err(Error::domain(format!("q = {q} outside (1/|A|, 1)")));
    }
    Ok((a * q - 1.0) / (a - 1.0) * (q.ln() - ((1.0 - q) / (a - 1.0)).ln()))
}

/// Smallest m with `4 d_H exp(-m eps^2 / 2) <= delta`.
pub fn sufficient_samples(eps: f64, delta: f64, d_h: u64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("eps and delta must lie in (0, 1)"));
    }
    if d_h == 0 {
        return Err(Error::domain("d_H must be at least 1"));
    }
    let m = 2.0 / (eps * eps) * (4.0 * d_h as f64 / delta).ln();
    Ok(m.ceil() as u64)
}

/// ln C(n, k) via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let lg = |x: u64| libm::lgamma(x as f64 + 1.0);
    lg(n) - lg(k) - lg(n - k)
}

/// Exact C(n, k), saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, t| {
        acc.saturating_mul((n - t) as u128) / (t + 1) as u128
    })
}

/// Fano lower bound on the error of any decoder for the influential-players
/// family, with q fixed at 2/|A|.
pub fn fano_error_lower_bound(m: u64, n: u64, k: u64, joint_size: u64) -> Result<f64> {
    fano_error_lower_bound_with_q(m, n, k, joint_size, 2.0 / joint_size as f64)
}

/// As [`fano_error_lower_bound`] with an explicit signal level.
pub fn fano_error_lower_bound_with_q(
    m: u64,
    n: u64,
    k: u64,
    joint_size: u64,
    q: f64,
) -> Result<f64> {
    if binomial(n, k) <= 1 {
        return Err(Error::domain(format!(
            "C({n}, {k}) must exceed 1 for a nontrivial hypothesis set"
        )));
    }
    let info = m as f64 * fano_kl(q, joint_size)?;
    let bound = 1.0 - (info + std::f64::consts::LN_2) / ln_binomial(n, k);
    Ok(bound.max(0.0))
}
