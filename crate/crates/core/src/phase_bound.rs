//! Upper bounds on the phase-error rate.
//!
//! The adversary's freedom is a decomposition `{p_k, X_k}` over the `M`
//! qubit subspaces. The bound
//!
//! `r_ph ≤ r_con/2 + (1/2M) Σ_k p_k f_{2(kΘ+φ′)}(X_k)`
//!
//! is maximized subject to `Σ p_k X_k = X` and the per-k loss budget
//! `p_k w(X_k) + p_{k−1} w(X_{k−1}) ≤ R_k` with `w(x) = 1 − √(1 − x²)`.
//! For fixed `{X_k}` this is a linear program in `p`; the outer search over
//! `{X_k}` is a multi-start coordinate ascent.
//!
//! In the high-loss limit the problem collapses to two aggregated subspaces,
//! see [`g_asymptotic`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{zeta, ObservedStats};
use crate::envelope::{GoodEnvelope, PhaseFunction};
use crate::error::{Error, Result};
use crate::lp::LinearProgram;
use crate::optimize::{golden_max, scan_then_golden};
use crate::protocol::ProtocolParams;
use crate::source::AngularWeights;

/// Tolerance for witness feasibility and objective reproduction.
pub const WITNESS_TOL: f64 = 1e-9;

/// `f_φ(x) = cos φ (cos²Θ − x) + ½ sin 2Θ |sin φ| √(1 − x²)`.
pub fn f_phi(phi: f64, theta: f64, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("f_phi needs |x| <= 1, got {x}")));
    }
    Ok(PhaseFunction::new(phi, theta).eval(x))
}

/// `φ′ = −(K − 1)Θ/2`, which makes the subspaces `0..K` the favourable ones.
pub fn choose_phi_prime(k: usize, theta: f64) -> f64 {
    -((k.max(1) - 1) as f64) * theta / 2.0
}

pub fn good_envelope(k: usize, theta: f64) -> Result<GoodEnvelope> {
    GoodEnvelope::new(k, theta)
}

/// `w(x) = 1 − √(1 − x²)`, twice the smallest weight a qubit with `⟨X̂⟩ = x`
/// can put on either basis state.
#[inline]
pub fn loss_weight(x: f64) -> f64 {
    1.0 - (1.0 - x * x).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceAssignment {
    pub p: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethod {
    Finite,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseErrorBound {
    pub r_ph_bar: f64,
    pub witness: SubspaceAssignment,
    pub phi_prime: f64,
    pub method: BoundMethod,
}

/// Search settings for the finite-loss optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteOptions {
    /// Upper limit on the number of seed points evaluated.
    pub seed_budget: usize,
    /// Number of best seeds refined by coordinate ascent.
    pub starts: usize,
    /// Points of the per-coordinate scan preceding golden-section refinement.
    pub coordinate_scan: usize,
    /// A sweep improving the objective by less than this ends the ascent.
    pub sweep_tol: f64,
    pub max_sweeps: usize,
}

impl Default for FiniteOptions {
    fn default() -> Self {
        Self { seed_budget: 20_000, starts: 8, coordinate_scan: 21, sweep_tol: 1e-9, max_sweeps: 200 }
    }
}

/// Data of one finite-loss maximization problem.
#[derive(Debug, Clone)]
pub struct FiniteProblem {
    m: usize,
    phases: Vec<PhaseFunction>,
    x_target: f64,
    budget: Vec<f64>,
    r_con: f64,
}

impl FiniteProblem {
    pub fn new(params: &ProtocolParams, phi_prime: f64, stats: &ObservedStats, weights: &AngularWeights) -> Result<Self> {
        let m = params.m();
        if weights.t.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: weights.t.len() });
        }
        let theta = params.theta();
        let phases = (0..m)
            .map(|k| PhaseFunction::new(2.0 * (k as f64 * theta + phi_prime), theta))
            .collect();
        let budget = crate::channel::loss_constraint_rhs(weights, stats.eta_d)?;
        Ok(Self { m, phases, x_target: stats.x, budget, r_con: stats.r_con })
    }

    /// Build directly from a loss budget (used by oracles and tests).
    pub fn from_budget(params: &ProtocolParams, phi_prime: f64, stats: &ObservedStats, budget: Vec<f64>) -> Result<Self> {
        let m = params.m();
        if budget.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: budget.len() });
        }
        let theta = params.theta();
        let phases = (0..m)
            .map(|k| PhaseFunction::new(2.0 * (k as f64 * theta + phi_prime), theta))
            .collect();
        Ok(Self { m, phases, x_target: stats.x, budget, r_con: stats.r_con })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn budget(&self) -> &[f64] {
        &self.budget
    }

    pub fn x_target(&self) -> f64 {
        self.x_target
    }

    pub fn r_con(&self) -> f64 {
        self.r_con
    }

    /// Per-subspace coefficient `f_{2(kΘ+φ′)}(X_k) / 2M`.
    pub fn coefficient(&self, k: usize, x: f64) -> f64 {
        self.phases[k].eval(x) / (2.0 * self.m as f64)
    }

    /// Inner linear program over `p` at fixed `{X_k}`; `None` if infeasible.
    pub fn solve_weights(&self, xs: &[f64]) -> Option<(Vec<f64>, f64)> {
        let m = self.m;
        let objective: Vec<f64> = (0..m).map(|k| self.coefficient(k, xs[k])).collect();
        let mut lp = LinearProgram::new(objective);
        lp.equal(vec![1.0; m], 1.0);
        lp.equal(xs.to_vec(), self.x_target);
        let w: Vec<f64> = xs.iter().map(|&x| loss_weight(x)).collect();
        for k in 0..m {
            // p_k + p_{k−1} ≤ 1 already, so budgets of at least 1 never bind.
            if self.budget[k] < 1.0 {
                let prev = (k + m - 1) % m;
                let mut row = vec![0.0; m];
                row[k] += w[k];
                row[prev] += w[prev];
                lp.less_eq(row, self.budget[k]);
            }
        }
        lp.solve().ok().map(|s| (s.x, s.value))
    }

    /// `Σ_k p_k f(X_k) / 2M` at `{X_k}`, or −∞ when no weights are feasible.
    pub fn value(&self, xs: &[f64]) -> f64 {
        self.solve_weights(xs).map_or(f64::NEG_INFINITY, |(_, v)| v)
    }

    /// `r_con/2 + Σ_k p_k f(X_k)/2M` recomputed from an assignment.
    pub fn bound_of(&self, witness: &SubspaceAssignment) -> f64 {
        self.r_con / 2.0
            + witness.p.iter().zip(&witness.x).enumerate().map(|(k, (p, x))| p * self.coefficient(k, *x)).sum::<f64>()
    }

    /// Largest violation of any constraint by `witness`.
    pub fn violation(&self, witness: &SubspaceAssignment) -> f64 {
        let m = self.m;
        let (p, x) = (&witness.p, &witness.x);
        let mut worst = (p.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max((p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.x_target).abs());
        for k in 0..m {
            worst = worst.max(-p[k]).max(x[k].abs() - 1.0);
            let prev = (k + m - 1) % m;
            let lhs = p[k] * loss_weight(x[k]) + p[prev] * loss_weight(x[prev]);
            worst = worst.max(lhs - self.budget[k]);
        }
        worst.max(0.0)
    }

    fn coordinate_ascent(&self, start: Vec<f64>, options: &FiniteOptions) -> (Vec<f64>, f64) {
        let mut xs = start;
        let mut best = self.value(&xs);
        for _ in 0..options.max_sweeps {
            let before = best;
            for k in 0..self.m {
                let mut trial = xs.clone();
                let (xk, v) = scan_then_golden(
                    |x| {
                        trial[k] = x;
                        self.value(&trial)
                    },
                    -1.0,
                    1.0,
                    options.coordinate_scan,
                    1e-10,
                );
                if v > best {
                    best = v;
                    xs[k] = xk;
                }
            }
            if !(best - before >= options.sweep_tol) {
                break;
            }
        }
        (xs, best)
    }

    fn seeds(&self, options: &FiniteOptions) -> Vec<Vec<f64>> {
        let m = self.m;
        let mut per_dim = 3usize;
        while (per_dim + 2).checked_pow(m as u32).is_some_and(|n| n <= options.seed_budget) {
            per_dim += 2;
        }
        let grid_ok = per_dim.checked_pow(m as u32).is_some_and(|n| n <= options.seed_budget);
        let mut seeds = Vec::new();
        if grid_ok {
            let axis: Vec<f64> = (0..per_dim).map(|i| -1.0 + 2.0 * i as f64 / (per_dim - 1) as f64).collect();
            let total = per_dim.pow(m as u32);
            for mut idx in 0..total {
                let point = (0..m)
                    .map(|_| {
                        let v = axis[idx % per_dim];
                        idx /= per_dim;
                        v
                    })
                    .collect();
                seeds.push(point);
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let choices = [-1.0, 0.0, 1.0];
            for _ in 0..options.seed_budget {
                seeds.push(
                    (0..m)
                        .map(|_| if rng.random_bool(0.5) { choices[rng.random_range(0..3)] } else { rng.random_range(-1.0..=1.0) })
                        .collect(),
                );
            }
        }
        seeds.push(vec![self.x_target; m]);
        seeds
    }

    /// Maximize over `{X_k}`; returns the best assignment and bound.
    pub fn maximize(&self, options: &FiniteOptions) -> Result<(SubspaceAssignment, f64)> {
        let seeds = self.seeds(options);
        let values: Vec<f64> = seeds.par_iter().map(|s| self.value(s)).collect();
        let mut order: Vec<usize> = (0..seeds.len()).filter(|&i| values[i].is_finite()).collect();
        if order.is_empty() {
            return Err(Error::Infeasible(
                "no subspace assignment satisfies the loss constraints; the statistics are inconsistent".into(),
            ));
        }
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        order.truncate(options.starts.max(1));

        let results: Vec<(Vec<f64>, f64)> =
            order.par_iter().map(|&i| self.coordinate_ascent(seeds[i].clone(), options)).collect();
        // Deterministic reduction: highest value, lowest start index on ties.
        let (xs, _) = results
            .into_iter()
            .reduce(|best, cand| if cand.1 > best.1 { cand } else { best })
            .expect("at least one start");
        let (p, _) = self.solve_weights(&xs).expect("ascent only accepts feasible points");
        let witness = SubspaceAssignment { p, x: xs };
        let bound = self.bound_of(&witness);
        Ok((witness, bound))
    }
}

/// Maximized phase-error bound at finite loss.
pub fn phase_error_bound_finite(
    params: &ProtocolParams,
    phi_prime: f64,
    stats: &ObservedStats,
    weights: &AngularWeights,
) -> Result<PhaseErrorBound> {
    phase_error_bound_finite_with(params, phi_prime, stats, weights, &FiniteOptions::default())
}

pub fn phase_error_bound_finite_with(
    params: &ProtocolParams,
    phi_prime: f64,
    stats: &ObservedStats,
    weights: &AngularWeights,
    options: &FiniteOptions,
) -> Result<PhaseErrorBound> {
    let problem = FiniteProblem::new(params, phi_prime, stats, weights)?;
    let (witness, r_ph_bar) = problem.maximize(options)?;
    Ok(PhaseErrorBound { r_ph_bar, witness, phi_prime, method: BoundMethod::Finite })
}

/// Number of φ′ values tried by [`phase_error_bound_scan_phi`].
pub const PHI_SCAN_POINTS: usize = 64;

/// Smallest finite bound over φ′ on a uniform grid of `[−π/2, π/2)`.
pub fn phase_error_bound_scan_phi(
    params: &ProtocolParams,
    stats: &ObservedStats,
    weights: &AngularWeights,
    options: &FiniteOptions,
) -> Result<PhaseErrorBound> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let bounds = (0..PHI_SCAN_POINTS)
        .map(|i| {
            let phi = -half_pi + std::f64::consts::PI * i as f64 / PHI_SCAN_POINTS as f64;
            phase_error_bound_finite_with(params, phi, stats, weights, options)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(bounds
        .into_iter()
        .reduce(|best, b| if b.r_ph_bar < best.r_ph_bar { b } else { best })
        .expect("non-empty scan"))
}

/// Maximizer of the high-loss reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticWitness {
    pub q: f64,
    pub x_prime: f64,
    pub x_dprime: f64,
    pub g_value: f64,
}

/// The reduced problem behind `g(γ, ε)`.
#[derive(Debug, Clone)]
pub struct AsymptoticProblem {
    bad: PhaseFunction,
    good: GoodEnvelope,
    budget: f64,
    eps: f64,
    target: f64,
}

const FEAS_SLACK: f64 = 1e-12;
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

impl AsymptoticProblem {
    pub fn new(k: usize, theta: f64, gamma: f64, eps: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::OutOfRange(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::OutOfRange(format!("eps must lie in [0, 1], got {eps}")));
        }
        let good = GoodEnvelope::new(k, theta)?;
        Ok(Self {
            bad: PhaseFunction::new((k + 1) as f64 * theta, theta),
            good,
            budget: zeta(k) * gamma,
            eps,
            target: 1.0 - eps,
        })
    }

    /// Feasible interval for `X′` at a given `q ∈ (0, 1)`.
    fn x_prime_range(&self, q: f64) -> Option<(f64, f64)> {
        let xm = if self.budget >= q {
            1.0
        } else {
            // |X′| ≤ √(1 − d²) with d = 1 − budget/q > 0; never let rounding reach 1.
            let d = (q - self.budget) / q;
            ((1.0 - d) * (1.0 + d)).sqrt().min(BELOW_ONE)
        };
        // X″ ∈ [−1, 1] written through ε so that ε = 0 gives X′ ≥ 1 exactly.
        let lo = (-1.0f64).max(1.0 - self.eps / q).max(-xm);
        let hi = 1.0f64.min((2.0 - self.eps) / q - 1.0).min(xm);
        (lo <= hi).then_some((lo, hi))
    }

    fn feasible(&self, q: f64) -> bool {
        if q <= 0.0 {
            true
        } else if q >= 1.0 {
            loss_weight(self.target) <= self.budget + FEAS_SLACK
        } else {
            self.x_prime_range(q).is_some()
        }
    }

    fn x_dprime(&self, q: f64, xp: f64) -> f64 {
        if q >= 1.0 {
            self.target
        } else {
            ((self.target - q * xp) / (1.0 - q)).clamp(-1.0, 1.0)
        }
    }

    fn objective(&self, q: f64, xp: f64) -> f64 {
        q * self.bad.eval(xp) + (1.0 - q) * self.good.eval(self.x_dprime(q, xp))
    }

    /// Best `X′` at fixed `q` (objective is concave in `X′`).
    fn inner(&self, q: f64) -> Option<(f64, f64)> {
        if q <= 0.0 {
            return Some((self.target, self.good.eval(self.target)));
        }
        if q >= 1.0 {
            return self.feasible(1.0).then(|| (self.target, self.bad.eval(self.target)));
        }
        let (lo, hi) = self.x_prime_range(q)?;
        Some(golden_max(|xp| self.objective(q, xp), lo, hi, 1e-12))
    }

    /// Largest feasible `q`; the feasible set is an interval containing 0.
    fn q_max(&self) -> f64 {
        if self.feasible(1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn solve(&self) -> AsymptoticWitness {
        let q_hi = self.q_max();
        let value = |q: f64| self.inner(q).map_or(f64::NEG_INFINITY, |(_, v)| v);
        // The problem is jointly concave in (q, q·X′), so the value is concave in q.
        let (q, _) = scan_then_golden(value, 0.0, q_hi, 65, 1e-11);
        let (xp, _) = self.inner(q).expect("q within the feasible interval");
        let x_dprime = self.x_dprime(q, xp);
        let g_value = q * self.bad.eval(xp) + (1.0 - q) * self.good.eval(x_dprime);
        AsymptoticWitness { q, x_prime: xp, x_dprime, g_value }
    }

    /// Residuals of the witness: (mixture equality, budget excess).
    pub fn residuals(&self, w: &AsymptoticWitness) -> (f64, f64) {
        let mix = (w.q * w.x_prime + (1.0 - w.q) * w.x_dprime - self.target).abs();
        let excess = (w.q * loss_weight(w.x_prime) - self.budget).max(0.0);
        (mix, excess)
    }
}

/// `g(γ, ε)`: maximum of `q f_{(K+1)Θ}(X′) + (1 − q) f(X″)` subject to
/// `q X′ + (1 − q) X″ = 1 − ε` and `q w(X′) ≤ ζ_K γ`.
pub fn g_asymptotic(k: usize, theta: f64, gamma: f64, eps: f64) -> Result<AsymptoticWitness> {
    Ok(AsymptoticProblem::new(k, theta, gamma, eps)?.solve())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn f_phi_examples() {
        let t = 0.7;
        for x in [-1.0, -0.3, 0.5, 1.0] {
            assert!((f_phi(0.0, t, x).unwrap() - (t.cos().powi(2) - x)).abs() < 1e-15);
            assert!((f_phi(1.3, t, x).unwrap() - f_phi(-1.3, t, x).unwrap()).abs() < 1e-15);
        }
        let phi = 0.9;
        assert!((f_phi(phi, t, 1.0).unwrap() + phi.cos() * t.sin().powi(2)).abs() < 1e-15);
        let v = f_phi(PI / 4.0, PI / 4.0, 0.0).unwrap();
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(f_phi(0.0, t, 1.0 + 1e-9).is_err());
    }

    #[test]
    fn phi_prime_examples() {
        assert!((choose_phi_prime(2, PI / 4.0) + PI / 8.0).abs() < 1e-15);
        assert!((choose_phi_prime(3, PI / 6.0) + PI / 6.0).abs() < 1e-15);
        assert_eq!(choose_phi_prime(1, 0.5), 0.0);
        let (k, t) = (3usize, PI / 6.0);
        let pp = choose_phi_prime(k, t);
        for kk in 0..k {
            assert!((2.0 * (kk as f64 * t + pp)).cos() > 0.0);
        }
    }

    #[test]
    fn envelope_coincides_near_one() {
        for (k, t) in [(3, PI / 6.0), (3, PI / 5.0)] {
            let env = good_envelope(k, t).unwrap();
            let top = PhaseFunction::new((k - 1) as f64 * t, t);
            for i in 0..=100 {
                let x = 0.95 + 0.0005 * i as f64;
                assert!((env.eval(x) - top.eval(x)).abs() < 1e-9, "x = {x}");
            }
        }
    }

    fn sarg04() -> ProtocolParams {
        ProtocolParams::new(4, 1).unwrap()
    }

    #[test]
    fn vacuous_constraints_at_x_one() {
        let params = sarg04();
        let stats = ObservedStats::from_x(&params, 0.01, 1.0).unwrap();
        let pp = -params.theta() / 2.0;
        let problem = FiniteProblem::from_budget(&params, pp, &stats, vec![2.0; 4]).unwrap();
        let (witness, bound) = problem.maximize(&FiniteOptions::default()).unwrap();
        let expected = stats.r_con / 2.0 + 2f64.sqrt() / 32.0;
        assert!((bound - expected).abs() < 1e-12, "{bound} vs {expected}");
        assert!(problem.violation(&witness) < WITNESS_TOL);
    }

    #[test]
    fn bb84_vacuous() {
        let params = ProtocolParams::new(4, 2).unwrap();
        let stats = ObservedStats::from_x(&params, 0.01, 1.0).unwrap();
        let problem = FiniteProblem::from_budget(&params, 0.0, &stats, vec![2.0; 4]).unwrap();
        let (_, bound) = problem.maximize(&FiniteOptions::default()).unwrap();
        // f_{kπ}(1) = −cos(kπ) → best sign pattern gives +1.
        assert!((bound - (stats.r_con / 2.0 + 1.0 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn infeasible_statistics_rejected() {
        let params = sarg04();
        let stats = ObservedStats::from_x(&params, 0.01, 1.0).unwrap();
        // X = 1 forces X_k = 1 (w = 1) on the support, but no budget allows any weight.
        let problem = FiniteProblem::from_budget(&params, 0.0, &stats, vec![0.0; 4]).unwrap();
        assert!(matches!(problem.maximize(&FiniteOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn g_at_zero() {
        for (k, t) in [(2usize, PI / 4.0), (3, PI / 6.0), (3, PI / 5.0)] {
            let w = g_asymptotic(k, t, 0.0, 0.0).unwrap();
            let expected = -((k - 1) as f64 * t).cos() * t.sin().powi(2);
            assert!((w.g_value - expected).abs() < 1e-9, "K={k}: {} vs {expected}", w.g_value);
            assert_eq!(w.q, 0.0);
        }
        let w = g_asymptotic(2, PI / 4.0, 0.0, 0.0).unwrap();
        assert!((w.g_value + 2f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn g_noiseless_closed_form() {
        // ε = 0 forces X′ = X″ = 1 and q = ζγ.
        let t = PI / 4.0;
        for gamma in [0.5, 2.27, 10.0] {
            let w = g_asymptotic(2, t, gamma, 0.0).unwrap();
            let q = zeta(2) * gamma;
            let expected = -(2f64.sqrt() / 4.0) * (1.0 - 2.0 * q);
            assert!((w.g_value - expected).abs() < 1e-9, "γ={gamma}: {w:?}");
        }
    }

    #[test]
    fn g_witness_feasible_and_monotone_in_gamma() {
        let t = PI / 4.0;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..10 {
            let gamma = 0.5 * i as f64;
            let problem = AsymptoticProblem::new(2, t, gamma, 0.03).unwrap();
            let w = problem.solve();
            let (mix, excess) = problem.residuals(&w);
            assert!(mix < 1e-9 && excess < 1e-9, "{w:?}");
            assert!(w.g_value >= prev - 1e-7);
            prev = w.g_value;
        }
    }
}
