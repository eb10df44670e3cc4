//! Deterministic seeded sweeps: instance generators and the bound- and
//! route-verification campaigns behind `verify` and the regression suite.
//!
//! Every instance derives its randomness from the campaign seed through one
//! splitting rule: a ChaCha8 generator seeded with the campaign seed, with
//! the stream index set to the instance index. Workers can process
//! instances in any order; rows are emitted in index order, and all floats
//! are written through the shortest-round-trip formatter, so repeated runs
//! are byte-identical.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    fock_delta_q_bound, fock_eigenvalue_bound, fock_trace_bound, separable_bound_constants,
    separable_fw_bound, verify_term_bounds, BOUND_SLACK,
};
use crate::fock::{product_state, MomentSet, SingleModeState};
use crate::network::{apply_mode_unitary, ModeUnitary};
use crate::qfi::{qfi_direct, qfi_from_moments, crb_delta_q, QfiError, WeightVector};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("instance count must be positive")]
    ZeroInstances,
    #[error("unknown sweep family '{0}' (expected fock, separable, or routes)")]
    UnknownFamily(String),
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-instance generator handle implementing the seed splitting rule.
pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Seeded dense unitary: complex Gaussian entries (Box-Muller) followed by a
/// QR factorization with the R diagonal phase-normalized, which makes the
/// result unique and Haar-distributed.
pub fn seeded_unitary(dim: usize, rng: &mut impl Rng) -> ModeUnitary {
    use nalgebra::DMatrix;
    let mut normal = || {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let g = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(normal(), normal()));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut m = q;
    for j in 0..dim {
        let diag = r[(j, j)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            m[(i, j)] *= phase;
        }
    }
    ModeUnitary::new(m).expect("QR of a nonsingular matrix yields a unitary")
}

/// Random weight direction with max|w_j| = 1/d.
pub fn seeded_weights(d: usize, rng: &mut impl Rng) -> WeightVector {
    loop {
        let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(w) = WeightVector::from_direction(&dir) {
            return w;
        }
    }
}

/// Random photon assignment: 1..=max_total photons dropped uniformly over
/// `modes` slots.
pub fn seeded_photons(modes: usize, max_total: usize, rng: &mut impl Rng) -> Vec<u32> {
    let total = rng.gen_range(1..=max_total);
    let mut n = vec![0u32; modes];
    for _ in 0..total {
        n[rng.gen_range(0..modes)] += 1;
    }
    n
}

/// Random normalized single-mode state with the given cutoff.
pub fn seeded_single_mode(cutoff: usize, rng: &mut impl Rng) -> SingleModeState {
    loop {
        let amps: Vec<Complex64> = (0..=cutoff)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if let Ok(st) = SingleModeState::from_unnormalized(amps) {
            return st;
        }
    }
}

/// One row of the Fock-family campaign CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockSweepRow {
    pub index: usize,
    pub seed: u64,
    pub d: usize,
    pub modes: usize,
    pub photons: String,
    pub fw: f64,
    pub trace_bound: f64,
    pub eig_pairing: f64,
    pub eig_simple: f64,
    pub crb_delta_q: f64,
    pub eq1_bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Fock-input campaign: for each seeded instance (random d <= 3, random
/// photon placement with <= `max_photons` total, Haar unitary, random
/// weights) check the chain F_w <= 4Tr[NS(N+1)S] <= eigenvalue bounds and
/// the sensitivity floor Delta q_CRB >= d|w|^2/(2|n|).
pub fn fock_campaign(instances: usize, seed: u64, max_photons: usize) -> Result<Vec<FockSweepRow>, SweepError> {
    if instances == 0 {
        return Err(SweepError::ZeroInstances);
    }
    let rows: Vec<FockSweepRow> = (0..instances)
        .into_par_iter()
        .map(|index| {
            let mut rng = instance_rng(seed, index);
            let d = rng.gen_range(1..=3usize);
            let dim = 2 * d;
            let n = seeded_photons(dim, max_photons, &mut rng);
            let u = seeded_unitary(dim, &mut rng);
            let w = seeded_weights(d, &mut rng);
            let phase_modes: Vec<usize> = (0..d).collect();

            let moments: Vec<MomentSet> = n.iter().map(|&k| MomentSet::fock(k)).collect();
            let fw = qfi_from_moments(&u, &moments, &phase_modes, &w).unwrap();

            let factors: Vec<SingleModeState> =
                n.iter().map(|&k| SingleModeState::fock(k as usize)).collect();
            let input = product_state(&factors).unwrap();
            let psi_u = apply_mode_unitary(&input, &u).unwrap();
            let f = qfi_direct(&psi_u, &phase_modes).unwrap();
            let crb = match crb_delta_q(&f, &w) {
                Ok(v) => v,
                // w in the kernel: estimation impossible, CRB infinite
                Err(QfiError::KernelOverlap { .. }) => f64::INFINITY,
                Err(e) => panic!("crb failed: {e}"),
            };

            let trace_bound = fock_trace_bound(&u, &w, &n).unwrap();
            let eig = fock_eigenvalue_bound(&n, &w);
            let eq1 = fock_delta_q_bound(&n, &w).unwrap();

            let margins = [
                trace_bound - fw,
                eig.pairing - fw,
                eig.simple - fw,
                crb - eq1,
            ];
            let margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
            let pass = margins.iter().all(|m| *m >= -BOUND_SLACK);
            FockSweepRow {
                index,
                seed,
                d,
                modes: dim,
                photons: n
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join("+"),
                fw,
                trace_bound,
                eig_pairing: eig.pairing,
                eig_simple: eig.simple,
                crb_delta_q: crb,
                eq1_bound: eq1,
                margin,
                pass,
            }
        })
        .collect();
    Ok(rows)
}

/// One row of the separable-family campaign CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparableSweepRow {
    pub index: usize,
    pub seed: u64,
    pub d: usize,
    pub modes: usize,
    pub moment_hash: String,
    pub fw: f64,
    pub separable_bound: f64,
    pub c_bound: f64,
    pub term_failures: usize,
    pub margin: f64,
    pub pass: bool,
}

/// Separable-input campaign: random truncated single-mode states (cutoff <=
/// `max_cutoff`), Haar unitaries, well-distributed weights; checks
/// F_w <= A/d + B|w|^2 < (C^2/d) max_j m_j plus the six per-term bounds.
pub fn separable_campaign(
    instances: usize,
    seed: u64,
    max_cutoff: usize,
) -> Result<Vec<SeparableSweepRow>, SweepError> {
    if instances == 0 {
        return Err(SweepError::ZeroInstances);
    }
    let rows: Vec<SeparableSweepRow> = (0..instances)
        .into_par_iter()
        .map(|index| {
            let mut rng = instance_rng(seed, index);
            let d = rng.gen_range(1..=3usize);
            let dim = 2 * d;
            let factors: Vec<SingleModeState> = (0..dim)
                .map(|_| seeded_single_mode(rng.gen_range(0..=max_cutoff), &mut rng))
                .collect();
            let u = seeded_unitary(dim, &mut rng);
            let w = seeded_weights(d, &mut rng);
            let phase_modes: Vec<usize> = (0..d).collect();
            let moments: Vec<MomentSet> = factors.iter().map(|s| s.moments()).collect();

            let fw = qfi_from_moments(&u, &moments, &phase_modes, &w).unwrap();
            let constants = separable_bound_constants(&moments).unwrap();
            let sep_bound = separable_fw_bound(&constants, d, &w);
            let c_bound = 400.0 / d as f64 * constants.second_moment_max;
            let report = verify_term_bounds(&u, &moments, &w).unwrap();
            let term_failures = report.pass.iter().filter(|p| !**p).count();

            // compact deterministic digest of the instance moments
            let moment_hash = {
                let mut acc: u64 = 0xcbf29ce484222325;
                for m in &moments {
                    for v in [m.alpha.re, m.alpha.im, m.nbar, m.xi.re, m.xi.im, m.m] {
                        acc ^= v.to_bits();
                        acc = acc.wrapping_mul(0x100000001b3);
                    }
                }
                format!("{acc:016x}")
            };

            let margins = [sep_bound - fw, c_bound - fw];
            let margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
            let pass = margins.iter().all(|m| *m >= -BOUND_SLACK) && term_failures == 0;
            SeparableSweepRow {
                index,
                seed,
                d,
                modes: dim,
                moment_hash,
                fw,
                separable_bound: sep_bound,
                c_bound,
                term_failures,
                margin,
                pass,
            }
        })
        .collect();
    Ok(rows)
}

/// One row of the route-equivalence campaign CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteSweepRow {
    pub index: usize,
    pub seed: u64,
    pub d: usize,
    pub modes: usize,
    pub fw_direct: f64,
    pub fw_moments: f64,
    pub difference: f64,
    pub pass: bool,
}

pub const ROUTE_TOLERANCE: f64 = 1e-10;

/// Route-equivalence campaign: |w^T F_direct w - F_moments| <= 1e-10 on
/// random product inputs.
pub fn route_campaign(
    instances: usize,
    seed: u64,
    max_cutoff: usize,
) -> Result<Vec<RouteSweepRow>, SweepError> {
    if instances == 0 {
        return Err(SweepError::ZeroInstances);
    }
    let rows: Vec<RouteSweepRow> = (0..instances)
        .into_par_iter()
        .map(|index| {
            let mut rng = instance_rng(seed, index);
            let d = rng.gen_range(1..=3usize);
            let dim = 2 * d;
            let factors: Vec<SingleModeState> = (0..dim)
                .map(|_| seeded_single_mode(rng.gen_range(0..=max_cutoff), &mut rng))
                .collect();
            let u = seeded_unitary(dim, &mut rng);
            let w = seeded_weights(d, &mut rng);
            let phase_modes: Vec<usize> = (0..d).collect();

            let input = product_state(&factors).unwrap();
            let psi_u = apply_mode_unitary(&input, &u).unwrap();
            let f = qfi_direct(&psi_u, &phase_modes).unwrap();
            let fw_direct = f.quadratic_form(&w);
            let moments: Vec<MomentSet> = factors.iter().map(|s| s.moments()).collect();
            let fw_moments = qfi_from_moments(&u, &moments, &phase_modes, &w).unwrap();
            let difference = (fw_direct - fw_moments).abs();
            RouteSweepRow {
                index,
                seed,
                d,
                modes: dim,
                fw_direct,
                fw_moments,
                difference,
                pass: difference <= ROUTE_TOLERANCE,
            }
        })
        .collect();
    Ok(rows)
}

/// Serializes rows to RFC-4180 CSV (with header) deterministically.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String, SweepError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| SweepError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Count of failing rows, generic over campaigns.
pub trait SweepRow {
    fn passed(&self) -> bool;
}

impl SweepRow for FockSweepRow {
    fn passed(&self) -> bool {
        self.pass
    }
}

impl SweepRow for SeparableSweepRow {
    fn passed(&self) -> bool {
        self.pass
    }
}

impl SweepRow for RouteSweepRow {
    fn passed(&self) -> bool {
        self.pass
    }
}

pub fn violations<T: SweepRow>(rows: &[T]) -> usize {
    rows.iter().filter(|r| !r.passed()).count()
}

/// Scaling table for the protocol sweep: simulated twin-Fock sensitivity vs
/// the closed-form value, the classical baseline, and the Fock floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolSweepRow {
    pub d: usize,
    pub n_total: u32,
    pub delta_q_simulated: f64,
    pub delta_q_formula: f64,
    pub classical_baseline: f64,
    pub fock_bound: f64,
}

pub fn protocol_sweep(
    d_values: &[usize],
    n_values: &[u32],
) -> Result<Vec<ProtocolSweepRow>, crate::protocols::ProtocolError> {
    use crate::protocols::*;
    let mut rows = Vec::new();
    for &d in d_values {
        for &n_total in n_values {
            let w = WeightVector::new(vec![1.0 / d as f64; d])?;
            let result = twin_fock_protocol(d, n_total, &w, None, DEFAULT_Q_PROBE)?;
            let mut n = vec![0u32; 2 * d];
            n[0] = n_total / 2;
            n[1] = n_total / 2;
            let fock_bound = fock_delta_q_bound(&n, &w).unwrap();
            let per_node = n_total / d as u32;
            let classical = if per_node >= 2 && per_node % 2 == 0 {
                classical_baseline(per_node, d, &w)?
            } else {
                f64::NAN
            };
            rows.push(ProtocolSweepRow {
                d,
                n_total,
                delta_q_simulated: result.delta_q,
                delta_q_formula: twin_fock_formula(n_total),
                classical_baseline: classical,
                fock_bound,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting_rule_is_deterministic_and_independent() {
        let mut a = instance_rng(7, 3);
        let mut b = instance_rng(7, 3);
        let mut c = instance_rng(7, 4);
        let xa: u64 = a.gen();
        assert_eq!(xa, b.gen::<u64>());
        assert_ne!(xa, c.gen::<u64>());
    }

    #[test]
    fn seeded_unitary_is_unitary_and_reproducible() {
        let u1 = seeded_unitary(4, &mut instance_rng(1, 0));
        let u2 = seeded_unitary(4, &mut instance_rng(1, 0));
        assert_eq!(u1.matrix(), u2.matrix());
    }

    #[test]
    fn fock_campaign_small_run_passes() {
        let rows = fock_campaign(40, 7, 4).unwrap();
        assert_eq!(rows.len(), 40);
        assert_eq!(violations(&rows), 0, "{:?}", rows.iter().find(|r| !r.pass));
    }

    #[test]
    fn separable_campaign_small_run_passes() {
        let rows = separable_campaign(40, 7, 3).unwrap();
        assert_eq!(violations(&rows), 0, "{:?}", rows.iter().find(|r| !r.pass));
    }

    #[test]
    fn route_campaign_small_run_passes() {
        let rows = route_campaign(20, 11, 3).unwrap();
        assert_eq!(violations(&rows), 0, "{:?}", rows.iter().find(|r| !r.pass));
    }

    #[test]
    fn campaigns_are_byte_deterministic() {
        let a = rows_to_csv(&fock_campaign(15, 3, 4).unwrap()).unwrap();
        let b = rows_to_csv(&fock_campaign(15, 3, 4).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_instances_rejected() {
        assert!(matches!(
            fock_campaign(0, 1, 4),
            Err(SweepError::ZeroInstances)
        ));
    }

    #[test]
    fn protocol_sweep_rows() {
        let rows = protocol_sweep(&[2], &[2, 4]).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let rel = (row.delta_q_simulated - row.delta_q_formula).abs() / row.delta_q_formula;
            assert!(rel < 0.01, "{row:?}");
            assert!(row.delta_q_simulated >= row.fock_bound - 1e-9);
        }
    }
}
