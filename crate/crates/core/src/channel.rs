//! Honest-channel model and the observable relations between detection
//! statistics and the subspace average `X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::ProtocolParams;
use crate::source::AngularWeights;

/// Lossy channel that, with probability `eps`, rotates the linear
/// polarization of the pulse by a uniformly random angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct ChannelModel {
    eta: f64,
    eps: f64,
}

#[derive(Deserialize)]
struct RawChannel {
    eta: f64,
    eps: f64,
}

impl TryFrom<RawChannel> for ChannelModel {
    type Error = Error;

    fn try_from(raw: RawChannel) -> Result<Self> {
        Self::new(raw.eta, raw.eps)
    }
}

impl ChannelModel {
    pub fn new(eta: f64, eps: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::OutOfRange(format!("transmission must lie in (0, 1], got {eta}")));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::OutOfRange(format!("rotation probability must lie in [0, 1], got {eps}")));
        }
        Ok(Self { eta, eps })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// Detection statistics: `eta_d` per pulse, the other fractions per detected event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedStats {
    pub eta_d: f64,
    pub x: f64,
    pub r_con: f64,
    pub r_bit: f64,
}

/// User-supplied statistics; `x` or `r_bit` determines X, `r_con` is an optional cross-check.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedStatsInput {
    pub eta_d: f64,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub r_bit: Option<f64>,
    #[serde(default)]
    pub r_con: Option<f64>,
}

/// Largest accepted mismatch between the two routes to X when both are given.
pub const INPUT_CONSISTENCY_TOL: f64 = 1e-9;

impl ObservedStats {
    /// Statistics consistent with a given subspace average `X`:
    /// `2M r_bit = 1 − X` and `M r_con = 1 − X cos²Θ`.
    pub fn from_x(params: &ProtocolParams, eta_d: f64, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta_d) {
            return Err(Error::OutOfRange(format!("detection rate must lie in [0, 1], got {eta_d}")));
        }
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange(format!("X must lie in [-1, 1], got {x}")));
        }
        let m = params.m() as f64;
        let cos2 = params.theta().cos().powi(2);
        Ok(Self { eta_d, x, r_con: (1.0 - x * cos2) / m, r_bit: (1.0 - x) / (2.0 * m) })
    }

    pub fn from_input(params: &ProtocolParams, input: &ObservedStatsInput) -> Result<Self> {
        let x = match (input.x, input.r_bit) {
            (Some(x), None) => x,
            (None, Some(r_bit)) => x_from_bit(params, r_bit),
            (Some(x), Some(r_bit)) => {
                let other = x_from_bit(params, r_bit);
                if !((x - other).abs() <= INPUT_CONSISTENCY_TOL) {
                    return Err(Error::Parse(format!("x = {x} disagrees with r_bit (implies {other})")));
                }
                x
            }
            (None, None) => return Err(Error::Parse("one of `x` or `r_bit` is required".into())),
        };
        if !x.is_finite() {
            return Err(Error::Parse("non-finite X".into()));
        }
        let stats = Self::from_x(params, input.eta_d, x)?;
        if let Some(r_con) = input.r_con {
            if !((r_con - stats.r_con).abs() <= INPUT_CONSISTENCY_TOL) {
                return Err(Error::Parse(format!(
                    "r_con = {r_con} is inconsistent with X = {x} (expected {})",
                    stats.r_con
                )));
            }
        }
        Ok(stats)
    }

    /// Decode statistics from JSON (`{"eta_d": .., "r_bit": .., "r_con": ..}`).
    pub fn from_json(params: &ProtocolParams, text: &str) -> Result<Self> {
        let input: ObservedStatsInput = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_input(params, &input)
    }
}

/// `X = 1 − 2M r_bit`
pub fn x_from_bit(params: &ProtocolParams, r_bit: f64) -> f64 {
    1.0 - 2.0 * params.m() as f64 * r_bit
}

/// `X = (1 − M r_con)/cos²Θ`; `None` when cos Θ = 0.
pub fn x_from_con(params: &ProtocolParams, r_con: f64) -> Option<f64> {
    let cos2 = params.theta().cos().powi(2);
    (cos2 > 1e-12).then(|| (1.0 - params.m() as f64 * r_con) / cos2)
}

/// Probability that exactly one photon of a Poisson(μ) pulse survives transmission η.
pub fn single_arrival_probability(mu: f64, eta: f64) -> f64 {
    let mean = mu * eta;
    mean * (-mean).exp()
}

/// Statistics of the honest protocol with a Poisson source of intensity `mu`.
pub fn honest_stats(params: &ProtocolParams, mu: f64, channel: &ChannelModel) -> Result<ObservedStats> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::OutOfRange(format!("intensity must be finite and >= 0, got {mu}")));
    }
    ObservedStats::from_x(params, single_arrival_probability(mu, channel.eta()), 1.0 - channel.eps())
}

/// `ζ_K = 1/(2^K (K+1)!)`
pub fn zeta(k: usize) -> f64 {
    let fact: f64 = (1..=k + 1).map(|i| i as f64).product();
    1.0 / (2f64.powi(k as i32) * fact)
}

/// Largest K with `K ≤ M − 2` and `2L(K − 1) < M`.
pub fn max_k(params: &ProtocolParams) -> usize {
    let (m, l) = (params.m(), params.l());
    (1..=m - 2).filter(|&k| 2 * l * (k - 1) < m).max().unwrap_or(1)
}

/// Whether `K` is admissible for the asymptotic analysis (`cos((K−1)Θ) > 0`).
pub fn k_is_valid(params: &ProtocolParams, k: usize) -> bool {
    k >= 1 && k <= params.m() - 2 && 2 * params.l() * (k - 1) < params.m()
}

/// Per-k budget of the loss constraint, `min(2 T_k / η_d, 2)`.
pub fn loss_constraint_rhs(weights: &AngularWeights, eta_d: f64) -> Result<Vec<f64>> {
    if !(eta_d > 0.0) {
        return Err(Error::OutOfRange(format!("detection rate must be positive, got {eta_d}")));
    }
    Ok(weights.t.iter().map(|t| (2.0 * t / eta_d).min(2.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{angular_weights, poisson_dist};

    fn p(m: usize, l: usize) -> ProtocolParams {
        ProtocolParams::new(m, l).unwrap()
    }

    #[test]
    fn honest_examples() {
        let params = p(4, 1);
        let s = honest_stats(&params, 0.1, &ChannelModel::new(0.1, 0.0).unwrap()).unwrap();
        assert!((s.r_con - 0.125).abs() < 1e-15 && s.r_bit == 0.0);
        assert!((s.eta_d - 0.01 * (-0.01f64).exp()).abs() < 1e-16);
        assert!((s.eta_d - 0.009900).abs() < 1e-6);
        let s = honest_stats(&params, 0.1, &ChannelModel::new(0.1, 0.1).unwrap()).unwrap();
        assert!((s.x - 0.9).abs() < 1e-15);
        assert!((s.r_con - 0.1375).abs() < 1e-15);
        assert!((s.r_bit - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn x_routes_agree() {
        for (m, l) in [(4, 1), (5, 2), (8, 3)] {
            let params = p(m, l);
            for x in [-0.7, 0.0, 0.35, 1.0] {
                let s = ObservedStats::from_x(&params, 0.5, x).unwrap();
                assert!((x_from_bit(&params, s.r_bit) - x).abs() < 1e-12);
                assert!((x_from_con(&params, s.r_con).unwrap() - x).abs() < 1e-12);
            }
        }
        assert!(x_from_con(&p(4, 2), 0.25).is_none());
    }

    #[test]
    fn input_validation() {
        let params = p(4, 1);
        let s = ObservedStats::from_json(&params, r#"{"eta_d": 0.01, "r_bit": 0.0125, "r_con": 0.1375}"#).unwrap();
        assert!((s.x - 0.9).abs() < 1e-12);
        assert!(ObservedStats::from_json(&params, r#"{"eta_d": 0.01, "r_bit": 0.0125, "r_con": 0.2}"#).is_err());
        assert!(ObservedStats::from_json(&params, r#"{"eta_d": 0.01}"#).is_err());
        assert!(ObservedStats::from_json(&params, r#"{"eta_d": 2.0, "x": 1.0}"#).is_err());
        assert!(ObservedStats::from_json(&params, r#"{"eta_d": 0.1, "x": 1.5}"#).is_err());
        assert!(ObservedStats::from_json(&params, "not json").is_err());
    }

    #[test]
    fn zeta_values() {
        assert_eq!(zeta(1), 0.25);
        assert!((zeta(2) - 1.0 / 24.0).abs() < 1e-17);
        assert!((zeta(3) - 1.0 / 192.0).abs() < 1e-17);
    }

    #[test]
    fn max_k_values() {
        assert_eq!(max_k(&p(4, 1)), 2);
        assert_eq!(max_k(&p(5, 1)), 3);
        assert_eq!(max_k(&p(6, 1)), 3);
        assert_eq!(max_k(&p(4, 2)), 1);
        assert_eq!(max_k(&p(8, 1)), 4);
        assert!(k_is_valid(&p(6, 1), 2) && !k_is_valid(&p(6, 1), 4));
    }

    #[test]
    fn loss_budget_limits() {
        let (eta, gamma) = (1e-6_f64, 2.0_f64);
        for (m, k) in [(4usize, 2usize), (6, 3)] {
            let mu = (gamma * eta).powf(1.0 / k as f64);
            let d = poisson_dist(mu, 40).unwrap();
            let w = angular_weights(&d, m).unwrap();
            let eta_d = single_arrival_probability(mu, eta);
            assert!((eta_d / (mu * eta) - 1.0).abs() < 1e-6);
            let r = loss_constraint_rhs(&w, eta_d).unwrap();
            assert_eq!(r[0], 2.0);
            let target = zeta(k) * gamma;
            assert!((r[k + 1] / target - 1.0).abs() < 0.01, "M={m}: {} vs {target}", r[k + 1]);
            for kk in k + 2..m {
                assert!(r[kk] < mu * target, "M={m}, k={kk}");
            }
        }
        assert!(loss_constraint_rhs(&AngularWeights { t: vec![1.0, 0.0, 0.0], truncation_error_bound: 0.0 }, 0.0).is_err());
    }
}
