//! Measurement operators of the (M, L) protocol as explicit matrices.
//!
//! Conventions:
//! * photon space basis order is `(|−1⟩, |+1⟩)` (circular polarizations),
//! * virtual space basis order is `(|0⟩, |2⟩, …, |2(M−1)⟩)`,
//! * tensor products are ordered virtual ⊗ photon, so `|2k⟩|b⟩` sits at index `2k + b`.
//!
//! The error/conclusive/phase-error operators are built by summing tensor
//! products over the announced index `j` and then compared with their
//! block-diagonal closed forms on the qubits `ℋ_k = span{|2k⟩|+1⟩, |2(k+1)⟩|−1⟩}`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, cis, CVector, ComplexMatrix};
use crate::protocol::ProtocolParams;

/// Tolerance for exact algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance for closed-form regression after summation over `j`.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

const MINUS_ONE: usize = 0;
const PLUS_ONE: usize = 1;

/// Virtual-system state `|ξ_θ⟩ = M^{-1/2} Σ_k e^{−2ikθ}|2k⟩`.
pub fn xi_state_a(params: &ProtocolParams, theta: f64) -> CVector {
    let m = params.m();
    let norm = 1.0 / (m as f64).sqrt();
    CVector::from_fn(m, |k, _| cis(-2.0 * k as f64 * theta) * norm)
}

/// Single-photon state orthogonal to linear polarization θ,
/// `(e^{iθ}|−1⟩ − e^{−iθ}|+1⟩)/√2`.
pub fn xi_bar_b(theta: f64) -> CVector {
    CVector::from_vec(vec![cis(theta) * FRAC_1_SQRT_2, -cis(-theta) * FRAC_1_SQRT_2])
}

/// Single photon linearly polarized at θ, `(e^{iθ}|−1⟩ + e^{−iθ}|+1⟩)/√2`.
pub fn polarization_b(theta: f64) -> CVector {
    CVector::from_vec(vec![cis(theta) * FRAC_1_SQRT_2, cis(-theta) * FRAC_1_SQRT_2])
}

/// Alice's POVM on the virtual system, indexed by `(a, j)`.
#[derive(Debug, Clone)]
pub struct AlicePovm {
    elements: Vec<[ComplexMatrix; 2]>,
}

impl AlicePovm {
    pub fn get(&self, a: usize, j: usize) -> &ComplexMatrix {
        &self.elements[j][a]
    }

    pub fn len_j(&self) -> usize {
        self.elements.len()
    }

    /// `Σ_b` of the element pair announced with `j`.
    pub fn pair_sum(&self, j: usize) -> ComplexMatrix {
        &self.elements[j][0] + &self.elements[j][1]
    }

    pub fn total(&self) -> ComplexMatrix {
        (0..self.len_j()).map(|j| self.pair_sum(j)).sum()
    }
}

/// `Â_{a,j} = P(|ξ_{aΘ+πj/M}⟩)/2`.
pub fn alice_povm(params: &ProtocolParams) -> AlicePovm {
    let theta = params.theta();
    let elements = (0..params.m())
        .map(|j| {
            [0usize, 1].map(|a| {
                ComplexMatrix::projector(&xi_state_a(params, a as f64 * theta + params.angle(j))).scale(0.5)
            })
        })
        .collect();
    AlicePovm { elements }
}

/// Alice's alternative measurement predicting Bob's x-basis outcome,
/// `Â′_{a,j} = P(e^{iφ}|ξ_{πj/M}⟩ − (−1)^a e^{−iφ}|ξ_{Θ+πj/M}⟩)/4`.
pub fn alice_povm_x(params: &ProtocolParams, phi: f64) -> AlicePovm {
    let theta = params.theta();
    let elements = (0..params.m())
        .map(|j| {
            let u = xi_state_a(params, params.angle(j)) * cis(phi);
            let v = xi_state_a(params, theta + params.angle(j)) * cis(-phi);
            [0usize, 1].map(|a| {
                let sign = if a == 0 { 1.0 } else { -1.0 };
                let w = &u - &v * c(sign, 0.0);
                ComplexMatrix::projector(&w).scale(0.25)
            })
        })
        .collect();
    AlicePovm { elements }
}

fn check_j(params: &ProtocolParams, j: usize) -> Result<()> {
    if j >= params.m() {
        return Err(Error::OutOfRange(format!("j = {j} must be below M = {}", params.m())));
    }
    Ok(())
}

/// Bob's conclusive POVM element: `B̂⁽ʲ⁾₀ = P(|ξ̄_{Θ+πj/M}⟩)/M`, `B̂⁽ʲ⁾₁ = P(|ξ̄_{πj/M}⟩)/M`.
pub fn bob_povm(params: &ProtocolParams, j: usize, b: u8) -> Result<ComplexMatrix> {
    check_j(params, j)?;
    let angle = match b {
        0 => params.theta() + params.angle(j),
        1 => params.angle(j),
        _ => return Err(Error::OutOfRange(format!("bit value {b}"))),
    };
    Ok(ComplexMatrix::projector(&xi_bar_b(angle)).scale(1.0 / params.m() as f64))
}

fn qubit_d(b: u8, x_basis: bool) -> CVector {
    let s = if b == 0 { 1.0 } else { -1.0 };
    if x_basis {
        CVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(s * FRAC_1_SQRT_2, 0.0)])
    } else if b == 0 {
        CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])
    } else {
        CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])
    }
}

/// Kraus operator `F̂⁽ʲ⁾` from the photon space to the virtual qubit D
/// (rows in the D z-basis), so that `B̂⁽ʲ⁾_b = F† P(|b_z⟩) F`.
pub fn filter_op(params: &ProtocolParams, j: usize) -> Result<ComplexMatrix> {
    check_j(params, j)?;
    let t = params.theta();
    let base = params.angle(j);
    let scale = (2.0 / params.m() as f64).sqrt();
    let one_x = ComplexMatrix::outer(&qubit_d(1, true), &xi_bar_b((t + PI) / 2.0 + base)).scale((t / 2.0).sin());
    let zero_x = ComplexMatrix::outer(&qubit_d(0, true), &xi_bar_b(t / 2.0 + base)).scale((t / 2.0).cos());
    Ok((&one_x + &zero_x).scale(scale))
}

/// Bob's hypothetical x-basis element `B̂′⁽ʲ⁾_b = F† P(|b_x⟩) F`.
pub fn bob_povm_x(params: &ProtocolParams, j: usize, b: u8) -> Result<ComplexMatrix> {
    let f = filter_op(params, j)?;
    Ok(&(&f.adjoint() * &ComplexMatrix::projector(&qubit_d(b, true))) * &f)
}

/// Reconstruct `F† P(|b_z⟩) F`.
pub fn filter_reconstruction(params: &ProtocolParams, j: usize, b: u8) -> Result<ComplexMatrix> {
    let f = filter_op(params, j)?;
    Ok(&(&f.adjoint() * &ComplexMatrix::projector(&qubit_d(b, false))) * &f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// Conclusive events.
    Con,
    /// Bit errors.
    Bit,
    /// Phase errors.
    Ph,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 3] = [OperatorKind::Con, OperatorKind::Bit, OperatorKind::Ph];
}

/// Rotation-invariant operator on virtual ⊗ photon, built by brute-force
/// summation over `j`. `phi` only enters the phase-error operator.
pub fn build_r(params: &ProtocolParams, kind: OperatorKind, phi: f64) -> ComplexMatrix {
    let m = params.m();
    let bob = |j: usize, b: u8| bob_povm(params, j, b).expect("j < M");
    match kind {
        OperatorKind::Con => {
            let alice = alice_povm(params);
            (0..m).map(|j| alice.pair_sum(j).kron(&(&bob(j, 0) + &bob(j, 1)))).sum()
        }
        OperatorKind::Bit => {
            let alice = alice_povm(params);
            (0..m)
                .map(|j| &alice.get(0, j).kron(&bob(j, 1)) + &alice.get(1, j).kron(&bob(j, 0)))
                .sum()
        }
        OperatorKind::Ph => {
            let alice = alice_povm_x(params, phi);
            let bob_x = |j: usize, b: u8| bob_povm_x(params, j, b).expect("j < M");
            (0..m)
                .map(|j| &alice.get(0, j).kron(&bob_x(j, 1)) + &alice.get(1, j).kron(&bob_x(j, 0)))
                .sum()
        }
    }
}

/// Discrete rotation by `πl/M` acting on virtual ⊗ photon: `e^{−2ikθ}` on
/// `|2k⟩` and `e^{±iθ}` on `|∓1⟩`.
pub fn rotation_unitary(params: &ProtocolParams, l: usize) -> ComplexMatrix {
    let theta = params.angle(l);
    let virt: Vec<_> = (0..params.m()).map(|k| cis(-2.0 * k as f64 * theta)).collect();
    let photon = [cis(theta), cis(-theta)];
    ComplexMatrix::diagonal(&virt).kron(&ComplexMatrix::diagonal(&photon))
}

/// Indices of `|0⟩_k = |2k⟩|+1⟩` and `|1⟩_k = |2(k+1 mod M)⟩|−1⟩`.
pub fn block_indices(m: usize, k: usize) -> [usize; 2] {
    [2 * k + PLUS_ONE, 2 * ((k + 1) % m) + MINUS_ONE]
}

#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub blocks: Vec<ComplexMatrix>,
    /// Largest modulus of any entry outside the block structure.
    pub leakage: f64,
}

pub fn block_decompose(r: &ComplexMatrix, params: &ProtocolParams) -> Result<BlockDecomposition> {
    let m = params.m();
    let dim = 2 * m;
    if r.rows() != dim || r.cols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: r.rows().max(r.cols()) });
    }
    let mut owner = vec![0usize; dim];
    for k in 0..m {
        for idx in block_indices(m, k) {
            owner[idx] = k;
        }
    }
    let blocks = (0..m)
        .map(|k| {
            let idx = block_indices(m, k);
            ComplexMatrix::from_fn(2, 2, |a, b| r.get(idx[a], idx[b]))
        })
        .collect();
    let mut leakage = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            if owner[i] != owner[j] {
                leakage = leakage.max(r.get(i, j).norm());
            }
        }
    }
    Ok(BlockDecomposition { blocks, leakage })
}

fn pauli(i: f64, x: f64, z: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |a, b| match (a, b) {
        (0, 0) => c(i + z, 0.0),
        (1, 1) => c(i - z, 0.0),
        _ => c(x, 0.0),
    })
}

/// Closed-form block `ŝ_k` of the requested operator.
pub fn closed_form_block(params: &ProtocolParams, kind: OperatorKind, phi: f64, k: usize) -> ComplexMatrix {
    let m = params.m() as f64;
    let t = params.theta();
    let cos2 = t.cos().powi(2);
    let con = pauli(1.0, -cos2, 0.0).scale(1.0 / m);
    match kind {
        OperatorKind::Con => con,
        OperatorKind::Bit => pauli(1.0, -1.0, 0.0).scale(1.0 / (2.0 * m)),
        OperatorKind::Ph => {
            let phase = 2.0 * (k as f64 * t + phi + t / 2.0);
            let ph = pauli(
                phase.cos() * cos2,
                -phase.cos(),
                0.5 * (2.0 * t).sin() * phase.sin(),
            )
            .scale(1.0 / (2.0 * m));
            &ph + &con.scale(0.5)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormEntry {
    pub kind: OperatorKind,
    pub phi: f64,
    /// Per-block max deviation from the closed form.
    pub block_deviation: Vec<f64>,
    pub leakage: f64,
}

impl ClosedFormEntry {
    pub fn max_deviation(&self) -> f64 {
        self.block_deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= CLOSED_FORM_TOL && self.leakage <= IDENTITY_TOL
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormReport {
    pub m: usize,
    pub l: usize,
    pub entries: Vec<ClosedFormEntry>,
}

impl ClosedFormReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(ClosedFormEntry::passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.entries.iter().map(ClosedFormEntry::max_deviation).fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.entries.iter().map(|e| e.leakage).fold(0.0, f64::max)
    }
}

/// Compare an (already built) operator with the closed-form blocks.
pub fn check_closed_form(
    r: &ComplexMatrix,
    params: &ProtocolParams,
    kind: OperatorKind,
    phi: f64,
) -> Result<ClosedFormEntry> {
    let decomposition = block_decompose(r, params)?;
    let block_deviation = decomposition
        .blocks
        .iter()
        .enumerate()
        .map(|(k, blk)| blk.max_abs_diff(&closed_form_block(params, kind, phi, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClosedFormEntry { kind, phi, block_deviation, leakage: decomposition.leakage })
}

/// Brute-force the three operators and check them against their closed forms.
/// The bit and conclusive operators do not depend on `phi` and are checked once.
pub fn verify_closed_forms(params: &ProtocolParams, phi_samples: &[f64]) -> ClosedFormReport {
    let mut entries = Vec::new();
    for kind in [OperatorKind::Con, OperatorKind::Bit] {
        let r = build_r(params, kind, 0.0);
        entries.push(check_closed_form(&r, params, kind, 0.0).expect("2M x 2M by construction"));
    }
    for &phi in phi_samples {
        let r = build_r(params, OperatorKind::Ph, phi);
        entries.push(check_closed_form(&r, params, OperatorKind::Ph, phi).expect("2M x 2M by construction"));
    }
    ClosedFormReport { m: params.m(), l: params.l(), entries }
}
