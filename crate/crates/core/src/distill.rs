//! XOR distillation: two boxes receive the same inputs and each party outputs
//! the parity of its two outcomes.

use serde::{Deserialize, Serialize};

use crate::boxes::{pair_index, CondProbTable, EtaGammaParams, DEFAULT_TOL};
use crate::error::Result;

/// Wires two independent boxes: `Pd(ab|xy) = Σ P1(a1 b1|xy) · P2(a2 b2|xy)`
/// over `a1 ⊕ a2 = a`, `b1 ⊕ b2 = b`.
pub fn xor_wire(first: &CondProbTable, second: &CondProbTable) -> Result<CondProbTable> {
    first.validate(DEFAULT_TOL)?;
    second.validate(DEFAULT_TOL)?;
    let (p, q) = (first.rows(), second.rows());
    let mut out = [[0.0; 4]; 4];
    for s in 0..4 {
        for a1 in 0..2 {
            for b1 in 0..2 {
                let u = p[s][pair_index(a1, b1)];
                for a2 in 0..2 {
                    for b2 in 0..2 {
                        out[s][pair_index(a1 ^ a2, b1 ^ b2)] += u * q[s][pair_index(a2, b2)];
                    }
                }
            }
        }
    }
    Ok(CondProbTable::from_rows_unchecked(out))
}

/// Image of the family under self-wiring: `η′ = 2(η − η²)`, `γ′ = 2(γ − γ²)`.
pub fn distill_map(params: EtaGammaParams) -> EtaGammaParams {
    let step = |v: f64| 2.0 * (v - v * v);
    EtaGammaParams::new(step(params.eta()), step(params.gamma()))
        .expect("2v(1 − v) maps (0, 1) into (0, 1/2]")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillStep {
    pub params: EtaGammaParams,
    pub nonlocality: f64,
}

/// `n + 1` entries: the input followed by `n` applications of
/// [`distill_map`], each with the CHSH value of its box. Nonlocality is
/// reported, not required to grow; the map eventually drives every box to
/// white noise.
pub fn iterate_distill(params: EtaGammaParams, n: usize) -> Vec<DistillStep> {
    std::iter::successors(Some(params), |p| Some(distill_map(*p)))
        .take(n + 1)
        .map(|params| DistillStep {
            params,
            nonlocality: CondProbTable::from_eta_gamma(params)
                .chsh()
                .expect("family boxes are normalized"),
        })
        .collect()
}

/// First step index at which the nonlocality decreases, if any.
pub fn first_decrease(steps: &[DistillStep]) -> Option<usize> {
    steps
        .windows(2)
        .position(|w| w[1].nonlocality < w[0].nonlocality)
        .map(|i| i + 1)
}

/// Nonlocality increase of one self-wiring step on the nonlocal branch:
/// `(2 + 2γ′ − 6η′) − (2 + 2γ − 6η) = 2γ − 4γ² − 6η + 12η²`.
pub fn gain(params: EtaGammaParams) -> f64 {
    let (eta, gamma) = (params.eta(), params.gamma());
    2.0 * gamma - 4.0 * gamma * gamma - 6.0 * eta + 12.0 * eta * eta
}
