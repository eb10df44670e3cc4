//! Derivative-free maximization of F_w over a triangular beam-splitter mesh,
//! used to probe how tight the closed-form bounds are.
//!
//! The search is a multi-start Nelder-Mead simplex over the gate angles
//! (one transmissivity angle and one phase per beam splitter, with
//! t = cos^2 of the angle so the parameter space wraps smoothly). Each
//! restart draws its start point from a ChaCha stream derived from the seed
//! and the restart index, so reports are deterministic even when restarts
//! run in parallel.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{MomentSet, SingleModeState};
use crate::network::{Gate, GateSequence, ModeUnitary};
use crate::qfi::{qfi_from_moments, QfiError, WeightVector};
use crate::bounds::{fock_eigenvalue_bound, separable_bound_constants, separable_fw_bound};

pub const DEFAULT_RESTARTS: usize = 20;
/// Simplex collapses below this diameter end a restart early.
pub const SIMPLEX_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("layout dimension {layout} does not match input mode count {inputs}")]
    DimensionMismatch { layout: usize, inputs: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Qfi(#[from] QfiError),
}

/// Skeleton of a beam-splitter mesh: the ordered mode pairs; every pair
/// carries two free angles (transmissivity angle, phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshLayout {
    pub dim: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl MeshLayout {
    /// Full triangular mesh: all M(M-1)/2 nearest-neighbor eliminations'
    /// worth of pairs, enough to reach any mode unitary up to output phases
    /// (output phases do not change F_w, so they carry no parameters).
    pub fn triangular(dim: usize) -> Self {
        let mut pairs = Vec::new();
        for c in 0..dim {
            for r in (c + 1..dim).rev() {
                pairs.push((r - 1, r));
            }
        }
        MeshLayout { dim, pairs }
    }

    pub fn parameter_count(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Builds the mesh unitary from angles: t = cos^2(a_2k), phi = a_2k+1.
    pub fn unitary(&self, angles: &[f64]) -> ModeUnitary {
        assert_eq!(angles.len(), self.parameter_count());
        let gates: Vec<Gate> = self
            .pairs
            .iter()
            .zip(angles.chunks_exact(2))
            .map(|(&modes, a)| Gate::BeamSplitter {
                modes,
                transmissivity: a[0].cos().powi(2),
                phase: a[1],
            })
            .collect();
        GateSequence {
            dim: self.dim,
            gates,
        }
        .unitary()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshParameters {
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub best_fw: f64,
    pub best_params: MeshParameters,
    pub bound_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub seed: u64,
}

fn is_fock_like(m: &MomentSet) -> bool {
    m.alpha.norm() < 1e-14 && m.xi.norm() < 1e-14 && m.beta.norm() < 1e-14 && m.v < 1e-12
}

/// The applicable closed-form bound: the Fock eigenvalue bound when every
/// input is a number eigenstate, else the separable A/d + B|w|^2 bound.
fn applicable_bound(
    inputs: &[SingleModeState],
    moments: &[MomentSet],
    w: &WeightVector,
) -> Result<f64, OptimizerError> {
    if moments.iter().all(is_fock_like) {
        let n: Vec<u32> = moments.iter().map(|m| m.nbar.round() as u32).collect();
        let _ = inputs;
        Ok(fock_eigenvalue_bound(&n, w).min())
    } else {
        let constants = separable_bound_constants(moments)
            .map_err(|e| panic!("input moments failed validation: {e}"))
            .unwrap();
        Ok(separable_fw_bound(&constants, w.d(), w))
    }
}

struct NelderMead<'a> {
    objective: &'a dyn Fn(&[f64]) -> f64,
    evaluations: usize,
    budget: usize,
}

impl<'a> NelderMead<'a> {
    /// Minimizes; returns (best point, best value, evaluations used).
    fn run(&mut self, start: &[f64], scale: f64) -> (Vec<f64>, f64) {
        let n = start.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((start.to_vec(), self.eval(start)));
        for i in 0..n {
            if self.evaluations >= self.budget {
                break;
            }
            let mut p = start.to_vec();
            p[i] += scale;
            let v = self.eval(&p);
            simplex.push((p, v));
        }
        while simplex.len() < n + 1 {
            simplex.push(simplex[0].clone());
        }

        while self.evaluations < self.budget {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let diameter = simplex
                .iter()
                .skip(1)
                .map(|(p, _)| {
                    p.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0_f64, f64::max)
                })
                .fold(0.0_f64, f64::max);
            if diameter < SIMPLEX_TOLERANCE {
                break;
            }
            let worst = simplex[n].clone();
            let centroid: Vec<f64> = (0..n)
                .map(|i| simplex[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64)
                .collect();
            let reflect: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| 2.0 * c - w)
                .collect();
            let fr = self.eval(&reflect);
            if fr < simplex[0].1 {
                // try expansion
                let expand: Vec<f64> = centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| 3.0 * c - 2.0 * w)
                    .collect();
                let fe = self.eval(&expand);
                simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (reflect, fr);
            } else {
                // contraction toward the better of worst/reflected
                let (base, fb) = if fr < worst.1 {
                    (&reflect, fr)
                } else {
                    (&worst.0, worst.1)
                };
                let contract: Vec<f64> = centroid
                    .iter()
                    .zip(base)
                    .map(|(c, b)| 0.5 * (c + b))
                    .collect();
                let fc = self.eval(&contract);
                if fc < fb {
                    simplex[n] = (contract, fc);
                } else {
                    // shrink toward the best vertex
                    let best = simplex[0].0.clone();
                    for entry in simplex.iter_mut().skip(1) {
                        let p: Vec<f64> = entry
                            .0
                            .iter()
                            .zip(&best)
                            .map(|(x, b)| b + 0.5 * (x - b))
                            .collect();
                        let v = self.eval(&p);
                        *entry = (p, v);
                        if self.evaluations >= self.budget {
                            break;
                        }
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        simplex.swap_remove(0).into()
    }

    fn eval(&mut self, p: &[f64]) -> f64 {
        self.evaluations += 1;
        (self.objective)(p)
    }
}

/// Multi-start maximization of F_w over the mesh angles for a fixed product
/// input. `budget` is the function-evaluation allowance per restart.
pub fn maximize_fw(
    inputs: &[SingleModeState],
    w: &WeightVector,
    layout: &MeshLayout,
    budget: usize,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationReport, OptimizerError> {
    if layout.dim != inputs.len() {
        return Err(OptimizerError::DimensionMismatch {
            layout: layout.dim,
            inputs: inputs.len(),
        });
    }
    if budget == 0 || restarts == 0 {
        return Err(OptimizerError::ZeroBudget);
    }
    let moments: Vec<MomentSet> = inputs.iter().map(|s| s.moments()).collect();
    let phase_modes: Vec<usize> = (0..w.d()).collect();
    let objective = |angles: &[f64]| -> f64 {
        let u = layout.unitary(angles);
        -qfi_from_moments(&u, &moments, &phase_modes, w).unwrap_or(0.0)
    };
    let nparams = layout.parameter_count();

    let runs: Vec<(Vec<f64>, f64, usize)> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            let start: Vec<f64> = (0..nparams)
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            let mut nm = NelderMead {
                objective: &objective,
                evaluations: 0,
                budget,
            };
            let (p, v) = nm.run(&start, 0.3);
            (p, v, nm.evaluations)
        })
        .collect();

    let mut best_idx = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best_idx].1 {
            best_idx = i;
        }
    }
    let iterations = runs.iter().map(|r| r.2).sum();
    let (best_point, best_neg, _) = runs.into_iter().nth(best_idx).unwrap();
    let best_fw = -best_neg;
    let bound_value = applicable_bound(inputs, &moments, w)?;
    Ok(OptimizationReport {
        best_fw,
        best_params: MeshParameters { angles: best_point },
        bound_value,
        gap: bound_value - best_fw,
        iterations,
        seed,
    })
}

/// One row of a scaling study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub family: String,
    pub d: usize,
    pub total_photons: u32,
    pub best_fw: f64,
    pub bound: f64,
    pub implied_delta_q: f64,
}

/// Inputs for the two families of the scaling dichotomy: `well_distributed`
/// puts one photon at each node's probe port; `hoarded` puts N = 2d photons
/// split between ports 1-2.
pub fn family_inputs(family: &str, d: usize) -> Vec<SingleModeState> {
    let dim = 2 * d;
    let mut inputs = vec![SingleModeState::vacuum(); dim];
    match family {
        "well_distributed" => {
            for j in 0..d {
                inputs[j] = SingleModeState::fock(1);
            }
        }
        "hoarded" => {
            inputs[0] = SingleModeState::fock(d);
            inputs[1] = SingleModeState::fock(d);
        }
        other => panic!("unknown family {other}"),
    }
    inputs
}

/// Runs the optimizer over d in `d_range` for the named family with equal
/// weights, reporting best F_w, the applicable bound, and the implied
/// sensitivity |w|^2 / sqrt(F_w).
pub fn scaling_study(
    family: &str,
    d_range: &[usize],
    budget: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>, OptimizerError> {
    let mut rows = Vec::new();
    for (idx, &d) in d_range.iter().enumerate() {
        let inputs = family_inputs(family, d);
        let w = WeightVector::new(vec![1.0 / d as f64; d])?;
        let layout = MeshLayout::triangular(2 * d);
        let report = maximize_fw(&inputs, &w, &layout, budget, restarts, seed.wrapping_add(idx as u64))?;
        let total: u32 = inputs
            .iter()
            .map(|s| s.moments().nbar.round() as u32)
            .sum();
        let implied = if report.best_fw > 0.0 {
            w.norm_sqr() / report.best_fw.sqrt()
        } else {
            f64::INFINITY
        };
        rows.push(ScalingRow {
            family: family.to_string(),
            d,
            total_photons: total,
            best_fw: report.best_fw,
            bound: report.bound_value,
            implied_delta_q: implied,
        });
    }
    Ok(rows)
}

/// F_w achieved by the hoarding unitary itself on the hoarded input; a
/// witness value the optimizer must meet or beat (it lies in the search
/// space up to output phases).
pub fn hoarding_witness_fw(d: usize, n_total: u32, w: &WeightVector) -> Result<f64, OptimizerError> {
    let u = crate::network::hoarding_unitary(w)
        .unwrap_or_else(|e| panic!("hoarding unitary failed: {e}"));
    let dim = 2 * d;
    let mut moments = vec![MomentSet::VACUUM; dim];
    moments[0] = MomentSet::fock(n_total / 2);
    moments[1] = MomentSet::fock(n_total / 2);
    let phase_modes: Vec<usize> = (0..d).collect();
    Ok(qfi_from_moments(&u, &moments, &phase_modes, w)?)
}

/// Exhaustive single-angle grid used as an oracle in tests: best F_w over a
/// one-splitter mesh on two modes.
pub fn grid_best_single_splitter(
    inputs: &[SingleModeState],
    w: &WeightVector,
    points: usize,
) -> f64 {
    let moments: Vec<MomentSet> = inputs.iter().map(|s| s.moments()).collect();
    let phase_modes: Vec<usize> = (0..w.d()).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let gate = Gate::BeamSplitter {
            modes: (0, 1),
            transmissivity: t,
            phase: 0.0,
        };
        let dm: DMatrix<Complex64> = gate.mode_matrix(2);
        let u = ModeUnitary::new(dm).unwrap();
        let fw = qfi_from_moments(&u, &moments, &phase_modes, w).unwrap();
        best = best.max(fw);
    }
    best
}
