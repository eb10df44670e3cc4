//! End-to-end estimation strategies: the twin-Fock hoarding protocol
//! (U, phases, U^+, projector onto the input), the three-mode
//! single-reference-port circuit, and the classical per-node baseline.
//!
//! Sensitivities come from error propagation
//! Delta q = sqrt(<O^2> - <O>^2) / |d<O>/dq| with the projector identity
//! <O^2> = <O> used exactly and a central-difference derivative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockError, FockState};
use crate::network::{decompose, fig2_network, fig2_unitary, hoarding_unitary, NetworkError};
use crate::qfi::{QfiError, WeightVector};

/// Default probe point; small enough that the O(q^2) truncation of the
/// quadratic expectation law stays well inside the 1% protocol tolerance.
pub const DEFAULT_Q_PROBE: f64 = 1e-3;
/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("N must be a positive even integer, got {0}")]
    OddPhotonNumber(i64),
    #[error("insensitive point: |d<O>/dq| = {0:.3e} < 1e-12 (probe at small q != 0)")]
    InsensitivePoint(f64),
    #[error("phase vector has length {got}, expected {expected}")]
    PhaseLength { got: usize, expected: usize },
    #[error("phase vector yields q = {got}, expected q_probe = {expected}")]
    PhaseMismatch { got: f64, expected: f64 },
    #[error("step must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Qfi(#[from] QfiError),
}

/// Outcome of one protocol evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub expected_o: f64,
    pub delta_q: f64,
    pub q_eval: f64,
    pub derivative_estimate: f64,
    pub metadata: ProtocolMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolMetadata {
    pub protocol: String,
    pub d: usize,
    pub total_photons: u32,
    pub weights: Vec<f64>,
}

/// Error propagation for a projector-valued observable: the closure returns
/// <O>(q), and <O^2> = <O>. Returns (delta_q, derivative).
pub fn error_propagation<F>(
    mut expectation: F,
    q_eval: f64,
    step: f64,
) -> Result<(f64, f64), ProtocolError>
where
    F: FnMut(f64) -> Result<f64, ProtocolError>,
{
    if step <= 0.0 {
        return Err(ProtocolError::BadStep(step));
    }
    let p = expectation(q_eval)?;
    let derivative = (expectation(q_eval + step)? - expectation(q_eval - step)?) / (2.0 * step);
    if derivative.abs() < 1e-12 {
        return Err(ProtocolError::InsensitivePoint(derivative.abs()));
    }
    let variance = (p - p * p).max(0.0);
    Ok((variance.sqrt() / derivative.abs(), derivative))
}

/// Phase allocation for a scalar probe: theta_j = q w_j / |w|^2, the smooth
/// choice with sum_j w_j theta_j = q.
pub fn allocate_phases(w: &WeightVector, q: f64) -> Vec<f64> {
    let scale = q / w.norm_sqr();
    w.as_slice().iter().map(|wj| wj * scale).collect()
}

/// <O>(q) for the twin-Fock hoarding protocol: |<Psi| U^+ e^{-iH} U |Psi>|^2
/// with |Psi> = |N/2, N/2, 0, ..., 0>, U the weight-encoding unitary, and
/// theta(q) the allocation above (or a caller-supplied direction scaled
/// linearly in q).
pub fn twin_fock_expectation(
    d: usize,
    n_total: u32,
    w: &WeightVector,
    theta_at_unit_q: Option<&[f64]>,
    q: f64,
) -> Result<f64, ProtocolError> {
    if n_total == 0 || n_total % 2 != 0 {
        return Err(ProtocolError::OddPhotonNumber(n_total as i64));
    }
    let u = hoarding_unitary(w)?;
    let gates = decompose(&u);
    let adjoint_gates = decompose(&u.adjoint());
    let mut counts = vec![0u32; 2 * d];
    counts[0] = n_total / 2;
    counts[1] = n_total / 2;
    let input = FockState::basis_vector(&counts, n_total as usize)?;
    let phase_modes: Vec<usize> = (0..d).collect();
    let thetas: Vec<f64> = match theta_at_unit_q {
        Some(dir) => {
            if dir.len() != d {
                return Err(ProtocolError::PhaseLength {
                    got: dir.len(),
                    expected: d,
                });
            }
            dir.iter().map(|t| t * q).collect()
        }
        None => allocate_phases(w, q),
    };
    let evolved = gates.apply(&input)?;
    let probed = evolved.apply_phases(&phase_modes, &thetas)?;
    let back = adjoint_gates.apply(&probed)?;
    Ok(back.fidelity_projector(&input)?)
}

/// Full twin-Fock protocol run at the probe point.
///
/// If `theta` is supplied it must satisfy sum_j w_j theta_j = q_probe; the
/// derivative is then taken along the ray theta * (q / q_probe).
pub fn twin_fock_protocol(
    d: usize,
    n_total: u32,
    w: &WeightVector,
    theta: Option<&[f64]>,
    q_probe: f64,
) -> Result<ProtocolResult, ProtocolError> {
    let unit_direction: Option<Vec<f64>> = match theta {
        Some(th) => {
            if th.len() != d {
                return Err(ProtocolError::PhaseLength {
                    got: th.len(),
                    expected: d,
                });
            }
            let q: f64 = th.iter().zip(w.as_slice()).map(|(t, wj)| t * wj).sum();
            if (q - q_probe).abs() > 1e-9 {
                return Err(ProtocolError::PhaseMismatch {
                    got: q,
                    expected: q_probe,
                });
            }
            Some(th.iter().map(|t| t / q_probe).collect())
        }
        None => None,
    };
    let expectation =
        |q: f64| twin_fock_expectation(d, n_total, w, unit_direction.as_deref(), q);
    let expected_o = expectation(q_probe)?;
    let (delta_q, derivative) = error_propagation(expectation, q_probe, DEFAULT_STEP)?;
    Ok(ProtocolResult {
        expected_o,
        delta_q,
        q_eval: q_probe,
        derivative_estimate: derivative,
        metadata: ProtocolMetadata {
            protocol: "twin_fock".into(),
            d,
            total_photons: n_total,
            weights: w.as_slice().to_vec(),
        },
    })
}

/// Eq. (12) reference value 2 / sqrt(2 N (N + 2)).
pub fn twin_fock_formula(n_total: u32) -> f64 {
    let nf = n_total as f64;
    2.0 / (2.0 * nf * (nf + 2.0)).sqrt()
}

/// <O>(q) for the three-mode circuit with input |n, n, 0>.
pub fn fig2_expectation(n: usize, w1: f64, w2: f64, q: f64) -> Result<f64, ProtocolError> {
    let (gates, input) = fig2_network(n, w1, w2)?;
    let u = fig2_unitary(w1, w2)?;
    let adjoint_gates = decompose(&u.adjoint());
    let w = WeightVector::new(vec![w1, w2])?;
    let thetas = allocate_phases(&w, q);
    let evolved = gates.apply(&input)?;
    let probed = evolved.apply_phases(&[0, 1], &thetas)?;
    let back = adjoint_gates.apply(&probed)?;
    Ok(back.fidelity_projector(&input)?)
}

/// Single-reference-port protocol for two phases.
pub fn fig2_protocol(
    n: usize,
    w1: f64,
    w2: f64,
    q_probe: f64,
) -> Result<ProtocolResult, ProtocolError> {
    let expectation = |q: f64| fig2_expectation(n, w1, w2, q);
    let expected_o = expectation(q_probe)?;
    let (delta_q, derivative) = error_propagation(expectation, q_probe, DEFAULT_STEP)?;
    Ok(ProtocolResult {
        expected_o,
        delta_q,
        q_eval: q_probe,
        derivative_estimate: derivative,
        metadata: ProtocolMetadata {
            protocol: "fig2".into(),
            d: 2,
            total_photons: 2 * n as u32,
            weights: vec![w1, w2],
        },
    })
}

/// Caption reference value 1 / sqrt(2 n (n + 1)).
pub fn fig2_formula(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (2.0 * nf * (nf + 1.0)).sqrt()
}

/// Classical baseline: each node runs its own twin-Fock interferometer on n
/// photons (Delta theta_j = 1 / sqrt(2 (n/2) (n/2 + 1))) and the results are
/// combined linearly, giving sqrt(sum_j w_j^2 Delta theta_j^2). For d = 2 and
/// equal weights this is the quoted 1 / sqrt(n (n + 2)).
pub fn classical_baseline(n: u32, _d: usize, w: &WeightVector) -> Result<f64, ProtocolError> {
    if n == 0 || n % 2 != 0 {
        return Err(ProtocolError::OddPhotonNumber(n as i64));
    }
    let half = n as f64 / 2.0;
    let dtheta = 1.0 / (2.0 * half * (half + 1.0)).sqrt();
    Ok((w.norm_sqr() * dtheta * dtheta).sqrt())
}

/// Formula-level baseline for d = 2, equal weights: 1 / sqrt(n (n + 2)).
pub fn classical_formula(n: u32) -> f64 {
    let nf = n as f64;
    1.0 / (nf * (nf + 2.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn twin_fock_matches_eq12_small_n() {
        for (n, d) in [(2u32, 2usize), (4, 2), (2, 3)] {
            let w = WeightVector::new(vec![1.0 / d as f64; d]).unwrap();
            let r = twin_fock_protocol(d, n, &w, None, DEFAULT_Q_PROBE).unwrap();
            let formula = twin_fock_formula(n);
            assert!(
                (r.delta_q - formula).abs() / formula < 0.01,
                "N={n} d={d}: {} vs {}",
                r.delta_q,
                formula
            );
        }
    }

    #[test]
    fn twin_fock_expectation_is_one_at_zero() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let p = twin_fock_expectation(2, 4, &w, None, 0.0).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn twin_fock_protocol_rejects_odd_n() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            twin_fock_protocol(2, 3, &w, None, DEFAULT_Q_PROBE),
            Err(ProtocolError::OddPhotonNumber(3))
        ));
    }

    #[test]
    fn twin_fock_at_q_zero_is_insensitive() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            twin_fock_protocol(2, 2, &w, None, 0.0),
            Err(ProtocolError::InsensitivePoint(_))
        ));
    }

    #[test]
    fn twin_fock_accepts_explicit_theta() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        // the proportional allocation passed explicitly reproduces the default
        let theta = [1.0e-3, 1.0e-3];
        let r = twin_fock_protocol(2, 2, &w, Some(&theta), DEFAULT_Q_PROBE).unwrap();
        let formula = twin_fock_formula(2);
        assert!((r.delta_q - formula).abs() / formula < 0.01);
        // an uneven ray with the same q is valid; treating the problem as
        // single-parameter along that ray changes the sensitivity
        let uneven = [1.6e-3, 0.4e-3];
        let r2 = twin_fock_protocol(2, 2, &w, Some(&uneven), DEFAULT_Q_PROBE).unwrap();
        assert!(r2.delta_q > 0.0);
        assert!((r2.delta_q - formula).abs() > 1e-3);
        let mismatch = [5.0e-3, 1.0e-3];
        assert!(matches!(
            twin_fock_protocol(2, 2, &w, Some(&mismatch), DEFAULT_Q_PROBE),
            Err(ProtocolError::PhaseMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_law_curvature() {
        // <O> = 1 - N(N+2)/8 q^2 + O(q^4)
        for n in [2u32, 4] {
            let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
            let q = 1e-3;
            let p = twin_fock_expectation(2, n, &w, None, q).unwrap();
            let curvature = (1.0 - p) / (q * q);
            let expect = n as f64 * (n as f64 + 2.0) / 8.0;
            assert!(
                (curvature - expect).abs() / expect < 0.005,
                "N={n}: curvature {curvature} vs {expect}"
            );
        }
    }

    #[test]
    fn fig2_matches_caption() {
        for n in [1usize, 2] {
            let r = fig2_protocol(n, 0.5, 0.5, DEFAULT_Q_PROBE).unwrap();
            let formula = fig2_formula(n);
            assert!(
                (r.delta_q - formula).abs() / formula < 0.01,
                "n={n}: {} vs {}",
                r.delta_q,
                formula
            );
        }
    }

    #[test]
    fn fig2_expectation_one_at_zero() {
        let p = fig2_expectation(1, 0.5, 0.5, 0.0).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fig2_unequal_weights_runs() {
        let r = fig2_protocol(1, 0.5, 0.25, DEFAULT_Q_PROBE).unwrap();
        assert!(r.delta_q > 0.0);
    }

    #[test]
    fn classical_baseline_values() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            classical_baseline(2, 2, &w).unwrap(),
            classical_formula(2),
            epsilon = 1e-12
        );
        let w1 = WeightVector::new(vec![1.0]).unwrap();
        // single node: the per-node sensitivity itself, 1/sqrt(2*1*2) = 1/2
        assert_abs_diff_eq!(classical_baseline(2, 1, &w1).unwrap(), 0.5, epsilon = 1e-12);
        assert!(classical_baseline(3, 2, &w).is_err());
    }

    #[test]
    fn classical_quantum_ratio_trends_to_sqrt2() {
        // formula-level large-n check: the exact ratio is
        // sqrt(2(n+1)/(n+2)), i.e. sqrt(2) up to a 1/(2(n+2)) correction
        // (~2.3% at n = 20), shrinking like 1/n
        let dev = |n: usize| {
            let ratio = classical_formula(n as u32) / fig2_formula(n);
            (ratio - 2.0_f64.sqrt()).abs() / 2.0_f64.sqrt()
        };
        assert!(dev(20) < 0.025, "deviation at n=20: {}", dev(20));
        assert!(dev(40) < dev(20));
    }

    #[test]
    fn error_propagation_cos_squared() {
        // <O> = cos^2(q) at q = pi/4: variance = 1/4, |d<O>/dq| = 1 -> 0.5
        let (dq, deriv) =
            error_propagation(|q| Ok(q.cos().powi(2)), std::f64::consts::FRAC_PI_4, 1e-5)
                .unwrap();
        assert_abs_diff_eq!(dq, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(deriv.abs(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn error_propagation_rejects_constants() {
        assert!(matches!(
            error_propagation(|_| Ok(0.5), 0.1, 1e-4),
            Err(ProtocolError::InsensitivePoint(_))
        ));
    }
}
