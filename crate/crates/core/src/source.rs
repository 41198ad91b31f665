//! Photon-number statistics of Alice's source and the angular-momentum
//! weights `T_k = Tr[ρ_AC |2k⟩⟨2k|]` of the purified virtual state.
//!
//! The closed form
//! `T_k = Σ_n μ_n 2^{−n} Σ_{k′ ≡ k (mod M)} C(n, k′)`
//! follows from the amplitudes of `|Φ_n⟩`; [`fock_oracle_weights`] builds
//! `ρ_AC` explicitly in a truncated two-mode Fock space and is used to
//! validate it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, CVector, ComplexMatrix};
use crate::protocol::ProtocolParams;

/// Largest photon number the explicit Fock-space oracle accepts.
pub const FOCK_ORACLE_MAX_N: usize = 8;

/// Pass threshold for the state identities.
pub const STATE_TOL: f64 = 1e-10;

const EXACT_BINOMIAL_MAX_N: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberDist {
    weights: Vec<f64>,
    tail_mass: f64,
}

/// Truncation giving a Poisson tail far below `1e-12` for `μ ≤ 5`.
pub fn default_n_max(mu: f64) -> usize {
    20usize.max((10.0 * mu + 10.0).ceil() as usize)
}

/// Poisson distribution `μ_n = e^{−μ} μⁿ / n!` truncated at `n_max`.
pub fn poisson_dist(mu: f64, n_max: usize) -> Result<PhotonNumberDist> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::OutOfRange(format!("mean photon number must be finite and >= 0, got {mu}")));
    }
    let mut weights = Vec::with_capacity(n_max + 1);
    let mut term = (-mu).exp();
    weights.push(term);
    for n in 1..=n_max {
        term *= mu / n as f64;
        weights.push(term);
    }
    // Sum the tail directly; `1 − Σ weights` would lose everything below 1e-16.
    let mut tail = 0.0;
    let mut n = n_max;
    loop {
        n += 1;
        term *= mu / n as f64;
        tail += term;
        if term <= tail * 1e-18 || term == 0.0 || n > n_max + 100_000 {
            break;
        }
    }
    Ok(PhotonNumberDist { weights, tail_mass: tail })
}

impl PhotonNumberDist {
    /// Explicit weights `μ_0..μ_{n_max}`; the missing mass becomes the tail.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::OutOfRange("empty photon-number distribution".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::OutOfRange("photon-number weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::OutOfRange(format!("photon-number weights sum to {total} > 1")));
        }
        Ok(Self { weights, tail_mass: (1.0 - total).max(0.0) })
    }

    /// Distribution concentrated on a single photon number.
    pub fn fock(n: usize) -> Self {
        let mut weights = vec![0.0; n + 1];
        weights[n] = 1.0;
        Self { weights, tail_mass: 0.0 }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_max(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Drop photon numbers above `n_max`, moving their mass into the tail.
    pub fn truncated(&self, n_max: usize) -> Self {
        if n_max >= self.n_max() {
            return self.clone();
        }
        let dropped: f64 = self.weights[n_max + 1..].iter().sum();
        Self { weights: self.weights[..=n_max].to_vec(), tail_mass: self.tail_mass + dropped }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularWeights {
    pub t: Vec<f64>,
    pub truncation_error_bound: f64,
}

impl AngularWeights {
    pub fn total(&self) -> f64 {
        self.t.iter().sum()
    }
}

fn exact_binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Row `2^{−n} C(n, ·)`, exact integers up to n = 60 and a halving Pascal
/// recurrence beyond.
struct ScaledBinomialRows {
    row: Vec<f64>,
    n: usize,
}

impl ScaledBinomialRows {
    fn new() -> Self {
        Self { row: vec![1.0], n: 0 }
    }

    fn advance(&mut self) -> &[f64] {
        self.n += 1;
        let n = self.n;
        if n <= EXACT_BINOMIAL_MAX_N {
            let scale = 0.5f64.powi(n as i32);
            self.row = (0..=n).map(|k| exact_binomial(n, k) as f64 * scale).collect();
        } else {
            let prev = std::mem::take(&mut self.row);
            self.row = (0..=n)
                .map(|k| {
                    let left = if k > 0 { prev[k - 1] } else { 0.0 };
                    let right = if k < n { prev[k] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect();
        }
        &self.row
    }
}

/// Closed-form angular-momentum weights for `M` polarizations.
pub fn angular_weights(dist: &PhotonNumberDist, m: usize) -> Result<AngularWeights> {
    if m < 3 {
        return Err(Error::InvalidParams(format!("M must be at least 3, got {m}")));
    }
    let mut t = vec![0.0; m];
    let mut rows = ScaledBinomialRows::new();
    for (n, &mu_n) in dist.weights().iter().enumerate() {
        let row: &[f64] = if n == 0 { &rows.row } else { rows.advance() };
        if mu_n == 0.0 {
            continue;
        }
        for (k, &b) in row.iter().enumerate() {
            t[k % m] += mu_n * b;
        }
    }
    Ok(AngularWeights { t, truncation_error_bound: dist.tail_mass() })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Two-mode Fock basis `(n₋₁, n₊₁)` with total photon number at most `n_max`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    states: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl FockBasis {
    pub fn new(n_max: usize) -> Self {
        let states: Vec<_> = (0..=n_max).flat_map(|n| (0..=n).map(move |k| (k, n - k))).collect();
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Self { states, index }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, minus: usize, plus: usize) -> Option<usize> {
        self.index.get(&(minus, plus)).copied()
    }

    pub fn state(&self, i: usize) -> (usize, usize) {
        self.states[i]
    }

    /// Truncated creation operator for the `|−1⟩` mode (`minus = true`) or `|+1⟩` mode.
    pub fn creation(&self, minus: bool) -> ComplexMatrix {
        let dim = self.dim();
        let mut a = ComplexMatrix::zeros(dim, dim);
        for (i, &(nm, np)) in self.states.iter().enumerate() {
            let (target, occ) = if minus { ((nm + 1, np), nm + 1) } else { ((nm, np + 1), np + 1) };
            if let Some(j) = self.index_of(target.0, target.1) {
                a.set(j, i, c((occ as f64).sqrt(), 0.0));
            }
        }
        a
    }
}

/// `|Φ_n⟩` on virtual ⊗ Fock (virtual index major), from its printed expansion.
fn phi_state(basis: &FockBasis, m: usize, n: usize) -> CVector {
    let dim = basis.dim();
    let mut v = CVector::zeros(m * dim);
    let prefactor = (0.5f64.powi(n as i32) * factorial(n)).sqrt();
    for k in 0..=n {
        // (a†₊₁)^{n−k} (a†₋₁)^k |vac⟩ = √((n−k)! k!) |n₋₁ = k, n₊₁ = n−k⟩
        let amp = prefactor / (factorial(k) * factorial(n - k)) * (factorial(n - k) * factorial(k)).sqrt();
        let c_idx = basis.index_of(k, n - k).expect("within truncation");
        v[(k % m) * dim + c_idx] += c(amp, 0.0);
    }
    v
}

/// Explicit `ρ_AC = Σ_n μ_n P(|Φ_n⟩)` for `n ≤ n_max`. `perturb` adds the given
/// amount to one amplitude of `|Φ_2⟩` (used to exercise the checks).
fn rho_ac(dist: &PhotonNumberDist, m: usize, basis: &FockBasis, n_max: usize, perturb: Option<f64>) -> ComplexMatrix {
    let dim = m * basis.dim();
    let mut rho = ComplexMatrix::zeros(dim, dim);
    for n in 0..=n_max.min(dist.n_max()) {
        let mu_n = dist.weights()[n];
        if mu_n == 0.0 && !(n == 2 && perturb.is_some()) {
            continue;
        }
        let mut v = phi_state(basis, m, n);
        if n == 2 {
            if let Some(delta) = perturb {
                let idx = basis.index_of(1, 1).expect("n_max >= 2");
                v[basis.dim() + idx] += c(delta, 0.0);
            }
        }
        rho = &rho + &ComplexMatrix::projector(&v).scale(mu_n);
    }
    rho
}

fn check_oracle_truncation(n_max: usize) -> Result<()> {
    if n_max > FOCK_ORACLE_MAX_N {
        return Err(Error::TruncationTooLarge(n_max));
    }
    Ok(())
}

/// Angular-momentum weights read off an explicitly assembled `ρ_AC`.
pub fn fock_oracle_weights(dist: &PhotonNumberDist, m: usize, n_max: usize) -> Result<AngularWeights> {
    check_oracle_truncation(n_max)?;
    if m < 3 {
        return Err(Error::InvalidParams(format!("M must be at least 3, got {m}")));
    }
    let basis = FockBasis::new(n_max);
    let rho = rho_ac(dist, m, &basis, n_max, None);
    let dim = basis.dim();
    let t = (0..m).map(|k| (0..dim).map(|i| rho.get(k * dim + i, k * dim + i).re).sum()).collect();
    Ok(AngularWeights { t, truncation_error_bound: dist.truncated(n_max).tail_mass() })
}

/// `ρ(θ) = Σ_n μ_n P(|θ, n⟩)`, built with creation operators.
pub fn polarized_state(dist: &PhotonNumberDist, theta: f64, basis: &FockBasis, n_max: usize) -> ComplexMatrix {
    let raise = &basis.creation(true).scale_c(cis(theta)) + &basis.creation(false).scale_c(cis(-theta));
    let mut vac = CVector::zeros(basis.dim());
    vac[basis.index_of(0, 0).expect("vacuum")] = c(1.0, 0.0);
    let mut rho = ComplexMatrix::zeros(basis.dim(), basis.dim());
    let mut state = vac;
    for n in 0..=n_max.min(dist.n_max()) {
        if n > 0 {
            state = raise.apply(&state);
        }
        let norm = (0.5f64.powi(n as i32) / factorial(n)).sqrt();
        let mu_n = dist.weights()[n];
        if mu_n != 0.0 {
            rho = &rho + &ComplexMatrix::projector(&(&state * c(norm, 0.0))).scale(mu_n);
        }
    }
    rho
}

#[derive(Debug, Clone, Serialize)]
pub struct StateReport {
    pub m: usize,
    pub n_max: usize,
    /// `max_θ |M·⟨ξ_θ|ρ_AC|ξ_θ⟩ − ρ(θ)|` over θ ∈ Ω_M.
    pub projection_deviation: f64,
    /// `max_θ |U ρ_AC U† − ρ_AC|` over θ ∈ Ω_M.
    pub rotation_deviation: f64,
    /// `max_k |T_k(closed form) − T_k(Fock)|` for the truncated distribution.
    pub weights_deviation: f64,
    pub tail_mass: f64,
}

impl StateReport {
    pub fn passed(&self) -> bool {
        self.projection_deviation <= STATE_TOL && self.rotation_deviation <= STATE_TOL && self.weights_deviation <= 1e-12
    }
}

pub fn verify_state_consistency(params: &ProtocolParams, dist: &PhotonNumberDist, n_max: usize) -> Result<StateReport> {
    verify_state_consistency_perturbed(params, dist, n_max, None)
}

/// As [`verify_state_consistency`], optionally perturbing one amplitude of `|Φ_2⟩`.
pub fn verify_state_consistency_perturbed(
    params: &ProtocolParams,
    dist: &PhotonNumberDist,
    n_max: usize,
    perturb: Option<f64>,
) -> Result<StateReport> {
    check_oracle_truncation(n_max)?;
    let m = params.m();
    let basis = FockBasis::new(n_max);
    let dim = basis.dim();
    let rho = rho_ac(dist, m, &basis, n_max, perturb);

    let mut projection_deviation = 0.0f64;
    let mut rotation_deviation = 0.0f64;
    for l in 0..m {
        let theta = params.angle(l);
        let xi = crate::operators::xi_state_a(params, theta);
        let projected = ComplexMatrix::from_fn(dim, dim, |i, j| {
            let mut acc = c(0.0, 0.0);
            for k in 0..m {
                for kp in 0..m {
                    acc += xi[k].conj() * xi[kp] * rho.get(k * dim + i, kp * dim + j);
                }
            }
            acc * m as f64
        });
        let direct = polarized_state(dist, theta, &basis, n_max);
        projection_deviation = projection_deviation.max(projected.max_abs_diff(&direct)?);

        let phases: Vec<_> = (0..m)
            .flat_map(|k| {
                let basis = &basis;
                (0..dim).map(move |i| {
                    let (nm, np) = basis.state(i);
                    cis(-2.0 * k as f64 * theta + theta * (nm as f64 - np as f64))
                })
            })
            .collect();
        let u = ComplexMatrix::diagonal(&phases);
        let rotated = &(&u * &rho) * &u.adjoint();
        rotation_deviation = rotation_deviation.max(rotated.max_abs_diff(&rho)?);
    }

    let truncated = dist.truncated(n_max);
    let closed = angular_weights(&truncated, m)?;
    let t_fock: Vec<f64> = (0..m).map(|k| (0..dim).map(|i| rho.get(k * dim + i, k * dim + i).re).sum()).collect();
    let weights_deviation = closed.t.iter().zip(&t_fock).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    Ok(StateReport {
        m,
        n_max,
        projection_deviation,
        rotation_deviation,
        weights_deviation,
        tail_mass: truncated.tail_mass(),
    })
}
