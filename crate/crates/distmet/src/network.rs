//! Mode-space unitaries, triangular gate decomposition, and the circuits
//! used by the protocols: the weight-encoding (hoarding) unitary and the
//! three-mode single-reference-port network.
//!
//! Convention: a `ModeUnitary` U acts on creation operators as
//! b_j^+ = sum_k U_jk a_k^+, so column k of U is the output profile of input
//! port k. Applying U to a Fock state substitutes the *conjugate* matrix into
//! the creation-operator monomials; the elementary beam splitter in
//! `fock.rs` uses exactly this rule, and [`Gate::mode_matrix`] is its
//! mode-operator form. The whole convention is pinned by tests here and in
//! `qfi.rs` (two independent QFI routes agree only if the conjugation is
//! right).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockError, FockState};
use crate::qfi::WeightVector;

pub const UNITARITY_TOLERANCE: f64 = 1e-10;
pub const RECOMPOSITION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("matrix is not unitary: max |U^+U - I| = {0:.3e}")]
    NotUnitary(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("all weights are zero; hoarding unitary undefined")]
    DegenerateWeights,
    #[error("fig. 2 network requires w1, w2 > 0 with max(w1, w2) = 1/2; got ({0}, {1})")]
    InvalidFig2Weights(f64, f64),
    #[error("orthonormal completion failed at column {0}")]
    CompletionFailed(usize),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// M x M unitary acting on mode operators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    entries: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self, NetworkError> {
        assert_eq!(entries.nrows(), entries.ncols());
        let dim = entries.nrows();
        let gram = entries.adjoint() * &entries;
        let mut dev: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                dev = dev.max((gram[(i, j)] - target).norm());
            }
        }
        if dev > UNITARITY_TOLERANCE {
            return Err(NetworkError::NotUnitary(dev));
        }
        Ok(ModeUnitary { entries })
    }

    pub fn identity(dim: usize) -> Self {
        ModeUnitary {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn adjoint(&self) -> ModeUnitary {
        ModeUnitary {
            entries: self.entries.adjoint(),
        }
    }

    /// Matrix product; `self * other` acts as "apply `other` first".
    pub fn compose(&self, other: &ModeUnitary) -> Result<ModeUnitary, NetworkError> {
        if self.dim() != other.dim() {
            return Err(NetworkError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(ModeUnitary {
            entries: &self.entries * &other.entries,
        })
    }

    pub fn max_entry_difference(&self, other: &ModeUnitary) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                dev = dev.max((self.entries[(i, j)] - other.entries[(i, j)]).norm());
            }
        }
        dev
    }

    pub fn to_serial(&self) -> ModeUnitarySerial {
        let dim = self.dim();
        let mut re = vec![vec![0.0; dim]; dim];
        let mut im = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                re[i][j] = self.entries[(i, j)].re;
                im[i][j] = self.entries[(i, j)].im;
            }
        }
        ModeUnitarySerial { dim, re, im }
    }

    pub fn from_serial(serial: &ModeUnitarySerial) -> Result<Self, NetworkError> {
        let dim = serial.dim;
        let entries = DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(serial.re[i][j], serial.im[i][j])
        });
        Self::new(entries)
    }
}

/// JSON wire format: `{"dim": M, "re": [[...]], "im": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeUnitarySerial {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Elementary two-mode gate or single-mode phase.
///
/// The beam splitter's mode-operator matrix on modes (i, j) is
/// `[[sqrt(t), sqrt(1-t) e^{i phi}], [-sqrt(1-t) e^{-i phi}, sqrt(t)]]`;
/// its adjoint is the same gate with phi -> phi + pi. A phase gate has the
/// diagonal entry e^{i theta} on its mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    BeamSplitter {
        modes: (usize, usize),
        transmissivity: f64,
        phase: f64,
    },
    Phase { mode: usize, theta: f64 },
}

impl Gate {
    /// Embeds the gate into a dim x dim mode matrix.
    pub fn mode_matrix(&self, dim: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::identity(dim, dim);
        match *self {
            Gate::BeamSplitter {
                modes: (i, j),
                transmissivity: t,
                phase: phi,
            } => {
                let tc = t.sqrt();
                let rc = (1.0 - t).sqrt();
                let eip = Complex64::from_polar(1.0, phi);
                m[(i, i)] = Complex64::new(tc, 0.0);
                m[(i, j)] = eip * rc;
                m[(j, i)] = -eip.conj() * rc;
                m[(j, j)] = Complex64::new(tc, 0.0);
            }
            Gate::Phase { mode, theta } => {
                m[(mode, mode)] = Complex64::from_polar(1.0, theta);
            }
        }
        m
    }

    pub fn apply(&self, state: &FockState) -> Result<FockState, FockError> {
        match *self {
            Gate::BeamSplitter {
                modes,
                transmissivity,
                phase,
            } => state.apply_beam_splitter(modes, transmissivity, phase),
            Gate::Phase { mode, theta } => state.apply_phase_shift(mode, theta),
        }
    }
}

/// Ordered gate list; gates are applied to states first-to-last, so the
/// recomposed unitary is the product of the gate matrices last-to-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub dim: usize,
    pub gates: Vec<Gate>,
}

impl GateSequence {
    pub fn apply(&self, state: &FockState) -> Result<FockState, FockError> {
        let mut st = state.clone();
        for gate in &self.gates {
            st = gate.apply(&st)?;
        }
        Ok(st)
    }

    pub fn unitary(&self) -> ModeUnitary {
        let mut m = DMatrix::identity(self.dim, self.dim);
        for gate in &self.gates {
            m = gate.mode_matrix(self.dim) * m;
        }
        ModeUnitary { entries: m }
    }

    pub fn beam_splitter_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::BeamSplitter { .. }))
            .count()
    }
}

/// Triangular-mesh decomposition: at most M(M-1)/2 beam splitters preceded by
/// M output phases, recomposing to `u` within [`RECOMPOSITION_TOLERANCE`].
///
/// Elimination scheme: Givens-like gates G_1..G_K applied on the left zero
/// the below-diagonal entries column by column, leaving a diagonal phase
/// matrix D, so U = G_1^+ ... G_K^+ D. Each G is in the beam-splitter family,
/// and B(t, phi)^+ = B(t, phi + pi) keeps the adjoints in the family too.
pub fn decompose(u: &ModeUnitary) -> GateSequence {
    let dim = u.dim();
    let mut a = u.entries.clone();
    let mut eliminations: Vec<(usize, f64, f64)> = Vec::new(); // (upper row, t, phi)

    for c in 0..dim {
        for r in ((c + 1)..dim).rev() {
            let bval = a[(r, c)];
            if bval.norm() <= 1e-14 {
                continue;
            }
            let aval = a[(r - 1, c)];
            let h2 = aval.norm_sqr() + bval.norm_sqr();
            let t = aval.norm_sqr() / h2;
            let phi = aval.arg() - bval.arg();
            let g = Gate::BeamSplitter {
                modes: (r - 1, r),
                transmissivity: t,
                phase: phi,
            }
            .mode_matrix(dim);
            a = g * a;
            a[(r, c)] = Complex64::new(0.0, 0.0); // exact by construction
            eliminations.push((r - 1, t, phi));
        }
    }

    let mut gates = Vec::new();
    for j in 0..dim {
        let theta = a[(j, j)].arg();
        if theta.abs() > 1e-14 {
            gates.push(Gate::Phase { mode: j, theta });
        }
    }
    for &(i, t, phi) in eliminations.iter().rev() {
        gates.push(Gate::BeamSplitter {
            modes: (i, i + 1),
            transmissivity: t,
            phase: phi + std::f64::consts::PI,
        });
    }
    GateSequence { dim, gates }
}

/// |Psi_U> = U |Psi>, realized through the gate decomposition.
pub fn apply_mode_unitary(state: &FockState, u: &ModeUnitary) -> Result<FockState, NetworkError> {
    if state.mode_count() != u.dim() {
        return Err(NetworkError::DimensionMismatch(state.mode_count(), u.dim()));
    }
    Ok(decompose(u).apply(state)?)
}

/// Gram-Schmidt completion of `fixed` columns to a full orthonormal basis,
/// drawing candidates from the standard basis in index order.
fn complete_orthonormal(
    dim: usize,
    fixed: Vec<DVector<Complex64>>,
) -> Result<DMatrix<Complex64>, NetworkError> {
    let mut cols = fixed;
    for cand in 0..dim {
        if cols.len() == dim {
            break;
        }
        let mut v = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        v[cand] = Complex64::new(1.0, 0.0);
        for col in &cols {
            let overlap = col.dotc(&v);
            v -= col * overlap;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / Complex64::new(norm, 0.0));
        }
    }
    if cols.len() != dim {
        return Err(NetworkError::CompletionFailed(cols.len()));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// The weight-encoding unitary: all photons enter ports 1-2, and the first
/// two columns follow the published rules
/// U_{i,1} = U_{i+d,1} = sqrt(|w_i|/2), U_{i,2} = -U_{i+d,2} = w_i / sqrt(2|w_i|),
/// rescaled by 1/sqrt(sum_i |w_i|) so the columns are unit vectors (the raw
/// rules are normalized only when sum |w_i| = 1, e.g. for equal weights).
/// Zero-weight port pairs get zero entries in columns 1-2 and are absorbed
/// into the orthonormal completion.
pub fn hoarding_unitary(w: &WeightVector) -> Result<ModeUnitary, NetworkError> {
    let d = w.d();
    let dim = 2 * d;
    let total: f64 = w.as_slice().iter().map(|x| x.abs()).sum();
    if total <= 0.0 {
        return Err(NetworkError::DegenerateWeights);
    }
    let scale = 1.0 / total.sqrt();
    let mut c1 = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    let mut c2 = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (i, &wi) in w.as_slice().iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let a = (wi.abs() / 2.0).sqrt() * scale;
        let b = wi / (2.0 * wi.abs()).sqrt() * scale;
        c1[i] = Complex64::new(a, 0.0);
        c1[i + d] = Complex64::new(a, 0.0);
        c2[i] = Complex64::new(b, 0.0);
        c2[i + d] = Complex64::new(-b, 0.0);
    }
    let m = complete_orthonormal(dim, vec![c1, c2])?;
    ModeUnitary::new(m)
}

/// The three-mode single-reference-port circuit of the two-phase example:
/// twin Fock |n, n, 0> into ports 1-2, phases on modes 1-2, mode 3 the lone
/// reference. Returns the gate realization and the input state.
pub fn fig2_network(
    n: usize,
    w1: f64,
    w2: f64,
) -> Result<(GateSequence, FockState), NetworkError> {
    let u = fig2_unitary(w1, w2)?;
    let input = FockState::basis_vector(&[n as u32, n as u32, 0], 2 * n)?;
    Ok((decompose(&u), input))
}

/// The 3x3 unitary behind [`fig2_network`]: column 1 spreads each port by
/// sqrt(w_i/2) with the remainder sqrt(1 - W/2) on the reference, column 2 is
/// the sign-split partner made orthogonal through the reference port
/// (W = w1 + w2; for W = 1 both columns are exactly normalized).
pub fn fig2_unitary(w1: f64, w2: f64) -> Result<ModeUnitary, NetworkError> {
    if !(w1 > 0.0 && w2 > 0.0 && (w1.max(w2) - 0.5).abs() <= 1e-12) {
        return Err(NetworkError::InvalidFig2Weights(w1, w2));
    }
    let wsum = w1 + w2;
    let c1 = DVector::from_vec(vec![
        Complex64::new((w1 / 2.0).sqrt(), 0.0),
        Complex64::new((w2 / 2.0).sqrt(), 0.0),
        Complex64::new((1.0 - wsum / 2.0).sqrt(), 0.0),
    ]);
    let mut c2 = DVector::from_vec(vec![
        Complex64::new((w1 / 2.0).sqrt(), 0.0),
        Complex64::new((w2 / 2.0).sqrt(), 0.0),
        Complex64::new(-(wsum / 2.0) / (1.0 - wsum / 2.0).sqrt(), 0.0),
    ]);
    let norm = c2.norm();
    c2 /= Complex64::new(norm, 0.0);
    let m = complete_orthonormal(3, vec![c1, c2])?;
    ModeUnitary::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::OccupationVector;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_unitary(dim: usize, rng: &mut impl Rng) -> ModeUnitary {
        crate::sweep::seeded_unitary(dim, rng)
    }

    #[test]
    fn identity_decomposes_to_nothing() {
        let seq = decompose(&ModeUnitary::identity(4));
        assert!(seq.gates.is_empty());
    }

    #[test]
    fn single_splitter_decomposes_to_itself() {
        let gate = Gate::BeamSplitter {
            modes: (0, 1),
            transmissivity: 0.5,
            phase: 0.0,
        };
        let u = ModeUnitary::new(gate.mode_matrix(2)).unwrap();
        let seq = decompose(&u);
        assert_eq!(seq.beam_splitter_count(), 1);
        match seq
            .gates
            .iter()
            .find(|g| matches!(g, Gate::BeamSplitter { .. }))
            .unwrap()
        {
            Gate::BeamSplitter { transmissivity, .. } => {
                assert_abs_diff_eq!(*transmissivity, 0.5, epsilon = 1e-12)
            }
            _ => unreachable!(),
        }
        assert!(seq.unitary().max_entry_difference(&u) <= RECOMPOSITION_TOLERANCE);
    }

    #[test]
    fn random_unitaries_recompose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let dim = rng.gen_range(2..=6);
            let u = random_unitary(dim, &mut rng);
            let seq = decompose(&u);
            assert!(seq.beam_splitter_count() <= dim * (dim - 1) / 2);
            let err = seq.unitary().max_entry_difference(&u);
            assert!(err <= RECOMPOSITION_TOLERANCE, "recomposition error {err}");
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(ModeUnitary::new(m), Err(NetworkError::NotUnitary(_))));
    }

    #[test]
    fn apply_identity_is_noop() {
        let st = FockState::basis_vector(&[1, 1], 2).unwrap();
        let out = apply_mode_unitary(&st, &ModeUnitary::identity(2)).unwrap();
        assert_eq!(out, st);
    }

    #[test]
    fn apply_splitter_matches_direct_gate() {
        // U = 50/50 splitter on |1,1> -> (|2,0> - |0,2>)/sqrt(2)
        let gate = Gate::BeamSplitter {
            modes: (0, 1),
            transmissivity: 0.5,
            phase: 0.0,
        };
        let u = ModeUnitary::new(gate.mode_matrix(2)).unwrap();
        let st = FockState::basis_vector(&[1, 1], 2).unwrap();
        let out = apply_mode_unitary(&st, &u).unwrap();
        let expect = gate.apply(&st).unwrap();
        for (occ, amp) in expect.amplitudes() {
            assert_abs_diff_eq!((out.amplitude(occ) - amp).norm(), 0.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(
            out.amplitude(&OccupationVector(vec![2, 0])).norm(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn unitary_then_adjoint_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(3, &mut rng);
        let st = FockState::basis_vector(&[2, 1, 0], 3).unwrap();
        let there = apply_mode_unitary(&st, &u).unwrap();
        let back = apply_mode_unitary(&there, &u.adjoint()).unwrap();
        for (occ, amp) in st.amplitudes() {
            assert_abs_diff_eq!((back.amplitude(occ) - amp).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn application_is_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u = random_unitary(3, &mut rng);
        let v = random_unitary(3, &mut rng);
        let st = FockState::basis_vector(&[1, 1, 0], 2).unwrap();
        let uv = u.compose(&v).unwrap();
        let joint = apply_mode_unitary(&st, &uv).unwrap();
        let seq = apply_mode_unitary(&apply_mode_unitary(&st, &v).unwrap(), &u).unwrap();
        for (occ, amp) in joint.amplitudes() {
            assert_abs_diff_eq!((seq.amplitude(occ) - amp).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn hoarding_columns_for_equal_weights() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let u = hoarding_unitary(&w).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(u.entry(i, 0).re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(u.entry(i, 0).im, 0.0, epsilon = 1e-12);
            let sign = if i < 2 { 0.5 } else { -0.5 };
            assert_abs_diff_eq!(u.entry(i, 1).re, sign, epsilon = 1e-12);
        }
    }

    #[test]
    fn hoarding_d1_entries() {
        let w = WeightVector::new(vec![1.0]).unwrap();
        let u = hoarding_unitary(&w).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(
                    u.entry(i, j).norm(),
                    std::f64::consts::FRAC_1_SQRT_2,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn hoarding_columns_proportional_to_rules() {
        // mixed signs and magnitudes; columns 1-2 follow the rules up to the
        // common 1/sqrt(sum |w|) normalization
        let w = WeightVector::new(vec![1.0 / 3.0, -0.2, 0.15]).unwrap();
        let u = hoarding_unitary(&w).unwrap();
        let total: f64 = w.as_slice().iter().map(|x| x.abs()).sum();
        let scale = 1.0 / total.sqrt();
        for (i, &wi) in w.as_slice().iter().enumerate() {
            let a = (wi.abs() / 2.0).sqrt() * scale;
            let b = wi / (2.0 * wi.abs()).sqrt() * scale;
            assert_abs_diff_eq!(u.entry(i, 0).re, a, epsilon = 1e-12);
            assert_abs_diff_eq!(u.entry(i + 3, 0).re, a, epsilon = 1e-12);
            assert_abs_diff_eq!(u.entry(i, 1).re, b, epsilon = 1e-12);
            assert_abs_diff_eq!(u.entry(i + 3, 1).re, -b, epsilon = 1e-12);
        }
    }

    #[test]
    fn hoarding_with_zero_weight_port() {
        let w = WeightVector::new(vec![0.5, 0.0].into_iter().map(|x| x).collect::<Vec<_>>())
            .unwrap();
        let u = hoarding_unitary(&w).unwrap();
        assert_abs_diff_eq!(u.entry(1, 0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.entry(1, 1).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.entry(3, 0).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fig2_unitary_is_unitary_and_matches_columns() {
        let u = fig2_unitary(0.5, 0.5).unwrap();
        let half = 0.5_f64.sqrt() * 0.5_f64.sqrt(); // sqrt(w/2) = 1/2
        assert_abs_diff_eq!(u.entry(0, 0).re, half, epsilon = 1e-12);
        assert_abs_diff_eq!(u.entry(1, 0).re, half, epsilon = 1e-12);
        assert_abs_diff_eq!(
            u.entry(2, 0).re,
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            u.entry(2, 1).re,
            -std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fig2_rejects_bad_weights() {
        assert!(fig2_unitary(0.4, 0.4).is_err());
        assert!(fig2_unitary(0.5, 0.0).is_err());
    }

    #[test]
    fn gate_sequence_serializes_tagged() {
        let seq = GateSequence {
            dim: 2,
            gates: vec![Gate::Phase { mode: 0, theta: 0.25 }],
        };
        let json = serde_json::to_string(&seq).unwrap();
        assert!(json.contains("\"gate\":\"phase\""));
        let back: GateSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, seq);
    }
}
