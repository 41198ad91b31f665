//! Key rates from error rates: the finite key-length formula, the
//! high-loss gain `G/η^{(K+1)/K}`, intensity optimization and noise thresholds.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{honest_stats, k_is_valid, max_k, zeta, ChannelModel, ObservedStats};
use crate::envelope::COS_FLOOR;
use crate::error::{Error, Result};
use crate::optimize::scan_then_golden;
use crate::phase_bound::{
    choose_phi_prime, g_asymptotic, phase_error_bound_finite_with, phase_error_bound_scan_phi, FiniteOptions,
    PhaseErrorBound,
};
use crate::protocol::ProtocolParams;
use crate::source::{angular_weights, default_n_max, poisson_dist};

/// `h(x) = −x log₂ x − (1 − x) log₂(1 − x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("binary entropy needs x in [0, 1], got {x}")));
    }
    Ok(entropy(x))
}

fn entropy(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    Finite,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateResult {
    /// Bit error rate per conclusive bit.
    pub e_bit: f64,
    /// Phase error rate per conclusive bit, clamped into `[0, 1/2]`.
    pub e_ph: f64,
    /// `1 − h(e_bit) − h(e_ph)`, before clamping the gain.
    pub bracket: f64,
    /// Key per pulse (finite), per `N` events (key length) or `G/η^{(K+1)/K}` (asymptotic).
    pub gain: f64,
    pub mode: RateMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_bound: Option<PhaseErrorBound>,
}

/// Clamp an error rate into `[0, 1/2]`, reporting whether the upper clamp bound.
fn clamp_rate(raw: f64) -> (f64, bool) {
    if raw >= 0.5 {
        (0.5, true)
    } else {
        (raw.max(0.0), false)
    }
}

/// `(e_bit, e_ph, bracket, usable)`; `usable` is false when either rate hit 1/2.
fn bracket_of(e_bit_raw: f64, e_ph_raw: f64) -> (f64, f64, f64, bool) {
    let (e_bit, bit_capped) = clamp_rate(e_bit_raw);
    let (e_ph, ph_capped) = clamp_rate(e_ph_raw);
    let bracket = 1.0 - entropy(e_bit) - entropy(e_ph);
    (e_bit, e_ph, bracket, !(bit_capped || ph_capped) && bracket > 0.0)
}

/// `G_N = N r_con [1 − h(r_err/r_con) − h(r̄_ph/r_con)]`, clamped at zero.
/// With `n = None` the gain is per detected event.
pub fn key_length_finite(n: Option<u64>, r_con: f64, r_err: f64, r_ph_bar: f64) -> Result<KeyRateResult> {
    if !(r_con > 0.0) {
        return Err(Error::OutOfRange(format!("conclusive fraction must be positive, got {r_con}")));
    }
    if !(0.0..=r_con).contains(&r_err) {
        return Err(Error::OutOfRange(format!("need 0 <= r_err <= r_con, got r_err = {r_err}")));
    }
    if !(r_ph_bar >= 0.0) {
        return Err(Error::OutOfRange(format!("phase-error bound must be >= 0, got {r_ph_bar}")));
    }
    let (e_bit, e_ph, bracket, usable) = bracket_of(r_err / r_con, r_ph_bar / r_con);
    let scale = n.map_or(1.0, |n| n as f64);
    let gain = if usable { scale * r_con * bracket } else { 0.0 };
    Ok(KeyRateResult {
        e_bit,
        e_ph,
        bracket,
        gain,
        mode: RateMode::Finite,
        gamma: None,
        k: None,
        mu: None,
        phase_bound: None,
    })
}

fn check_k(params: &ProtocolParams, k: usize) -> Result<()> {
    if !k_is_valid(params, k) {
        return Err(Error::InvalidParams(format!(
            "K = {k} is not admissible for (M, L) = ({}, {}); need 1 <= K <= M-2 and 2L(K-1) < M",
            params.m(),
            params.l()
        )));
    }
    Ok(())
}

/// Gain `G/η^{(K+1)/K}` without the `1/M` factor or doubling; depends on Θ only.
fn reduced_gain(k: usize, theta: f64, gamma: f64, eps: f64) -> Result<(f64, f64, f64, f64)> {
    let beta = 1.0 - theta.cos().powi(2) * (1.0 - eps);
    let g = g_asymptotic(k, theta, gamma, eps)?.g_value;
    let (e_bit, e_ph, bracket, usable) = bracket_of(eps / (2.0 * beta), 0.5 + g / (2.0 * beta));
    let gain = if usable { gamma.powf(1.0 / k as f64) * beta * bracket } else { 0.0 };
    Ok((e_bit, e_ph, bracket, gain))
}

/// High-loss key gain `G/η^{(K+1)/K} ∼ γ^{1/K} β(ε) M⁻¹ [1 − h(ε/2β) − h(e_ph)]`
/// with `β(ε) = 1 − cos²Θ (1 − ε)` and `e_ph = clamp(1/2 + g(γ,ε)/2β, 0, 1/2)`.
pub fn asymptotic_gain(params: &ProtocolParams, k: usize, gamma: f64, eps: f64) -> Result<KeyRateResult> {
    check_k(params, k)?;
    let (e_bit, e_ph, bracket, reduced) = reduced_gain(k, params.theta(), gamma, eps)?;
    let doubling = if params.double_even() { 2.0 } else { 1.0 };
    Ok(KeyRateResult {
        e_bit,
        e_ph,
        bracket,
        gain: doubling * reduced / params.m() as f64,
        mode: RateMode::Asymptotic,
        gamma: Some(gamma),
        k: Some(k),
        mu: None,
        phase_bound: None,
    })
}

const GAMMA_SCAN_DECADES: f64 = 12.0;
const GAMMA_SCAN_POINTS: usize = 121;

/// Upper end of the γ search: beyond `ζ_K γ = 1` the loss budget no longer binds.
pub fn gamma_cap(k: usize) -> f64 {
    1.0 / zeta(k)
}

fn maximize_over_gamma(k: usize, mut gain: impl FnMut(f64) -> f64) -> (f64, f64) {
    let log_hi = gamma_cap(k).ln();
    let log_lo = gamma_floor(k).ln();
    let (log_g, best) = scan_then_golden(|lg| gain(lg.exp()), log_lo, log_hi, GAMMA_SCAN_POINTS, 1e-10);
    if best > 0.0 {
        (log_g.exp(), best)
    } else {
        (0.0, 0.0)
    }
}

/// Smallest γ examined by the γ search.
fn gamma_floor(k: usize) -> f64 {
    gamma_cap(k) * 10f64.powf(-GAMMA_SCAN_DECADES)
}

/// Maximize [`asymptotic_gain`] over γ; returns `γ* = 0` with zero gain when no
/// γ yields a positive bracket.
pub fn optimize_gamma(params: &ProtocolParams, k: usize, eps: f64) -> Result<(f64, KeyRateResult)> {
    check_k(params, k)?;
    // Validate once; errors inside the search would otherwise be swallowed.
    reduced_gain(k, params.theta(), 0.0, eps)?;
    let theta = params.theta();
    let (gamma, _) = maximize_over_gamma(k, |g| reduced_gain(k, theta, g, eps).map_or(0.0, |r| r.3));
    Ok((gamma, asymptotic_gain(params, k, gamma, eps)?))
}

fn check_theta_k(k: usize, theta: f64) -> Result<()> {
    if k < 1 || !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) || !(((k - 1) as f64 * theta).cos() > COS_FLOOR) {
        return Err(Error::InvalidParams(format!("need K >= 1, Θ in (0, π/2] and cos((K-1)Θ) > 0 (K = {k}, Θ = {theta})")));
    }
    Ok(())
}

/// Bisection tolerance on ε.
pub const THRESHOLD_TOL: f64 = 1e-6;

fn bisect_threshold(mut positive: impl FnMut(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    if !positive(lo) {
        return 0.0;
    }
    if positive(hi) {
        return 1.0;
    }
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest channel noise ε for which the γ-optimized high-loss gain is positive.
/// Depends on `(K, Θ)` only.
pub fn threshold_eps(k: usize, theta: f64) -> Result<f64> {
    check_theta_k(k, theta)?;
    // g(γ, ε) is nondecreasing in γ (a larger budget enlarges the feasible set),
    // so the bracket is largest at the bottom of the γ range and the optimized
    // gain is positive exactly when it is positive there.
    let floor = gamma_floor(k);
    Ok(bisect_threshold(|eps| reduced_gain(k, theta, floor, eps).is_ok_and(|r| r.3 > 0.0)))
}

/// Threshold computed through the protocol-specific [`optimize_gamma`] (including `1/M`).
pub fn threshold_eps_for(params: &ProtocolParams, k: usize) -> Result<f64> {
    check_k(params, k)?;
    Ok(bisect_threshold(|eps| optimize_gamma(params, k, eps).map(|(_, r)| r.gain > 0.0).unwrap_or(false)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub eps: f64,
    pub gamma_star: f64,
    pub bracket: f64,
    pub gain: f64,
}

/// γ-optimized gain over a list of noise levels, in input order.
pub fn scan_eps(params: &ProtocolParams, k: usize, eps_values: &[f64]) -> Result<Vec<ScanRow>> {
    eps_values
        .par_iter()
        .map(|&eps| {
            let (gamma_star, r) = optimize_gamma(params, k, eps)?;
            Ok(ScanRow { eps, gamma_star, bracket: r.bracket, gain: r.gain })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiniteRateOptions {
    /// Analysis order; `None` uses the largest admissible K.
    pub k: Option<usize>,
    /// Minimize the bound over a grid of φ′ instead of using the default choice.
    pub scan_phi: bool,
    pub search: FiniteOptions,
}

/// Per-pulse key rate at finite loss for a Poisson source of intensity `mu`.
pub fn finite_rate(
    params: &ProtocolParams,
    mu: f64,
    channel: &ChannelModel,
    options: &FiniteRateOptions,
) -> Result<KeyRateResult> {
    let stats = honest_stats(params, mu, channel)?;
    finite_rate_with_stats(params, mu, &stats, options)
}

/// As [`finite_rate`], with externally supplied detection statistics; `mu`
/// only enters through the source's angular-momentum weights.
pub fn finite_rate_with_stats(
    params: &ProtocolParams,
    mu: f64,
    stats: &ObservedStats,
    options: &FiniteRateOptions,
) -> Result<KeyRateResult> {
    let k = options.k.unwrap_or_else(|| max_k(params));
    check_k(params, k)?;
    if stats.eta_d <= 0.0 {
        return Err(Error::OutOfRange("no detected events (mu or eta is zero)".into()));
    }
    let weights = angular_weights(&poisson_dist(mu, default_n_max(mu))?, params.m())?;
    let bound = if options.scan_phi {
        phase_error_bound_scan_phi(params, stats, &weights, &options.search)?
    } else {
        phase_error_bound_finite_with(params, choose_phi_prime(k, params.theta()), stats, &weights, &options.search)?
    };
    let per_event = key_length_finite(None, stats.r_con, stats.r_bit, bound.r_ph_bar.max(0.0))?;
    let doubling = if params.double_even() { 2.0 } else { 1.0 };
    Ok(KeyRateResult {
        gain: doubling * stats.eta_d * per_event.gain,
        k: Some(k),
        mu: Some(mu),
        phase_bound: Some(bound),
        ..per_event
    })
}

/// Intensity search points (log-spaced) before golden refinement.
const MU_SCAN_POINTS: usize = 13;

/// Maximize [`finite_rate`] over the intensity μ.
pub fn optimize_mu(params: &ProtocolParams, channel: &ChannelModel, options: &FiniteRateOptions) -> Result<KeyRateResult> {
    let k = options.k.unwrap_or_else(|| max_k(params));
    check_k(params, k)?;
    let scale = channel.eta().powf(1.0 / k as f64);
    let log_lo = (scale * 1e-2).ln();
    let log_hi = (scale * 1e2).min(2.0).ln();
    let opts = FiniteRateOptions { k: Some(k), ..*options };
    let gain = |lm: f64| finite_rate(params, lm.exp(), channel, &opts).map_or(0.0, |r| r.gain);
    let (lm, best) = scan_then_golden(gain, log_lo, log_hi, MU_SCAN_POINTS, 1e-4);
    let mu = if best > 0.0 { lm.exp() } else { scale };
    finite_rate(params, mu, channel, &opts)
}
