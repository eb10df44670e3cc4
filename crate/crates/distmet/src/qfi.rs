//! Quantum Fisher information for weighted phase combinations, by two
//! independent routes, and the Cramer-Rao sensitivities derived from it.
//!
//! Route one ([`qfi_direct`]) evaluates number-operator covariances on the
//! simulated output state. Route two ([`qfi_from_moments`]) never touches the
//! state: it contracts the mode unitary with the six single-mode input
//! moments through the weight matrix S_{lm} = sum_j U_jm w_j U*_jl. The two
//! must agree to 1e-10 on any product input, which pins down every sign and
//! conjugation convention in the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockError, FockState, MomentSet};
use crate::network::ModeUnitary;

/// Relative eigenvalue cutoff separating the support of F from its kernel.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;
/// Maximum tolerated projection of w onto the kernel, relative to |w|.
pub const KERNEL_OVERLAP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum QfiError {
    #[error("weights must satisfy max_j |w_j| = 1/d; got max {got} for d = {d}")]
    BadWeightNormalization { got: f64, d: usize },
    #[error("weight vector is empty or all zero")]
    DegenerateWeights,
    #[error("duplicate phase mode index {0}")]
    DuplicateMode(usize),
    #[error("expected {expected} moment sets, got {got}")]
    MomentCountMismatch { expected: usize, got: usize },
    #[error("QFI matrix is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),
    #[error("QFI matrix has eigenvalue {0:.3e} below the PSD tolerance")]
    NotPositiveSemidefinite(f64),
    #[error(
        "estimation impossible: w has overlap {overlap:.3e} with the kernel direction {direction:?}"
    )]
    KernelOverlap { overlap: f64, direction: Vec<f64> },
    #[error("F_w = {0} is not positive")]
    NonPositiveFw(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Weights w for the combination q = sum_j w_j theta_j, normalized so that
/// max_j |w_j| = 1/d. With that normalization |w|^2 <= 1/d always holds, so
/// every valid weight vector is well-distributed with constant c = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    /// Declared constant in the well-distributed criterion |w|^2 <= c/d.
    pub const WELL_DISTRIBUTED_C: f64 = 1.0;

    pub fn new(w: Vec<f64>) -> Result<Self, QfiError> {
        if w.is_empty() || w.iter().all(|x| *x == 0.0) {
            return Err(QfiError::DegenerateWeights);
        }
        let d = w.len();
        let max = w.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if (max - 1.0 / d as f64).abs() > 1e-12 {
            return Err(QfiError::BadWeightNormalization { got: max, d });
        }
        Ok(WeightVector { w })
    }

    /// Rescales an arbitrary nonzero direction to the canonical
    /// normalization max|w_j| = 1/d.
    pub fn from_direction(dir: &[f64]) -> Result<Self, QfiError> {
        if dir.is_empty() || dir.iter().all(|x| *x == 0.0) {
            return Err(QfiError::DegenerateWeights);
        }
        let d = dir.len();
        let max = dir.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let scale = 1.0 / (d as f64 * max);
        WeightVector::new(dir.iter().map(|x| x * scale).collect())
    }

    pub fn d(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn norm_sqr(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum()
    }

    pub fn is_well_distributed(&self) -> bool {
        self.norm_sqr() <= Self::WELL_DISTRIBUTED_C / self.d() as f64 + 1e-12
    }
}

/// Real symmetric positive-semidefinite QFI matrix with its eigensystem.
#[derive(Debug, Clone)]
pub struct QfiMatrix {
    entries: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    support_threshold: f64,
}

impl QfiMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self, QfiError> {
        Self::with_support_threshold(entries, SUPPORT_THRESHOLD)
    }

    pub fn with_support_threshold(
        entries: DMatrix<f64>,
        support_threshold: f64,
    ) -> Result<Self, QfiError> {
        assert_eq!(entries.nrows(), entries.ncols());
        let d = entries.nrows();
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                dev = dev.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if dev > 1e-12 {
            return Err(QfiError::NotSymmetric(dev));
        }
        let eig = SymmetricEigen::new(entries.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(QfiError::NotPositiveSemidefinite(min));
        }
        Ok(QfiMatrix {
            entries,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            support_threshold,
        })
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.entries[(j, k)]
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn support_threshold(&self) -> f64 {
        self.support_threshold
    }

    /// w^T F w.
    pub fn quadratic_form(&self, w: &WeightVector) -> f64 {
        let wv = DVector::from_column_slice(w.as_slice());
        (wv.transpose() * &self.entries * &wv)[(0, 0)]
    }

    fn support_cutoff(&self) -> f64 {
        let max = self.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        self.support_threshold * max.max(1e-300)
    }

    pub fn to_serial(&self) -> QfiMatrixSerial {
        let d = self.d();
        QfiMatrixSerial {
            d,
            entries: (0..d)
                .map(|i| (0..d).map(|j| self.entries[(i, j)]).collect())
                .collect(),
            eigenvalues: self.eigenvalues.iter().cloned().collect(),
            support_threshold: self.support_threshold,
        }
    }
}

/// JSON wire format for [`QfiMatrix`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QfiMatrixSerial {
    pub d: usize,
    pub entries: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub support_threshold: f64,
}

/// F_jk = 4(<n_j n_k> - <n_j><n_k>) on the listed phase modes of the evolved
/// state |Psi_U>.
pub fn qfi_direct(psi_u: &FockState, phase_modes: &[usize]) -> Result<QfiMatrix, QfiError> {
    for (i, &m) in phase_modes.iter().enumerate() {
        if phase_modes[..i].contains(&m) {
            return Err(QfiError::DuplicateMode(m));
        }
    }
    let d = phase_modes.len();
    // single pass over the sparse amplitudes
    let mut first = vec![0.0; d];
    let mut second = vec![vec![0.0; d]; d];
    for (occ, amp) in psi_u.amplitudes() {
        let p = amp.norm_sqr();
        for (a, &ma) in phase_modes.iter().enumerate() {
            let na = occ.0[ma] as f64;
            first[a] += p * na;
            for (b, &mb) in phase_modes.iter().enumerate() {
                second[a][b] += p * na * occ.0[mb] as f64;
            }
        }
    }
    let mut f = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            f[(a, b)] = 4.0 * (second[a][b] - first[a] * first[b]);
        }
    }
    // symmetrize away accumulation noise before validation
    let f = (f.clone() + f.transpose()) * 0.5;
    QfiMatrix::new(f)
}

/// The weight matrix S_{lm} = sum_j U_jm w_j U*_jl, with the sum over the
/// phase modes carrying weights (reference modes contribute zero).
pub fn s_matrix(
    u: &ModeUnitary,
    phase_modes: &[usize],
    w: &WeightVector,
) -> DMatrix<Complex64> {
    let dim = u.dim();
    let mut s = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for l in 0..dim {
        for m in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, &j) in phase_modes.iter().enumerate() {
                acc += u.entry(j, m) * w.as_slice()[idx] * u.entry(j, l).conj();
            }
            s[(l, m)] = acc;
        }
    }
    s
}

/// The six grouped terms of the input-moment expansion, F_w/4 = F1 + ... + F6:
///
/// F1: l = m = r = s (single-mode variance);
/// F2: (l = s, m = r), l != m, the n_l(n_m + 1) exchange term;
/// F3: (l = r, m = s), l != m, the squeezing term;
/// F4, F5: all-distinct triple sums with one coincident index pair;
/// F6: l = r = s != m, the beta cross term (plus conjugate).
///
/// Triple sums run over fully distinct (l, m, s).
pub fn fw_terms(
    u: &ModeUnitary,
    moments: &[MomentSet],
    phase_modes: &[usize],
    w: &WeightVector,
) -> Result<[f64; 6], QfiError> {
    if moments.len() != u.dim() {
        return Err(QfiError::MomentCountMismatch {
            expected: u.dim(),
            got: moments.len(),
        });
    }
    let dim = u.dim();
    let s = s_matrix(u, phase_modes, w);

    let mut f1 = 0.0;
    let mut f2 = 0.0;
    let mut f3 = Complex64::new(0.0, 0.0);
    let mut f4 = Complex64::new(0.0, 0.0);
    let mut f5 = Complex64::new(0.0, 0.0);
    let mut f6 = Complex64::new(0.0, 0.0);

    for l in 0..dim {
        let ml = &moments[l];
        f1 += s[(l, l)].re * s[(l, l)].re * ml.v;
        for m in 0..dim {
            if m == l {
                continue;
            }
            let mm = &moments[m];
            f2 += s[(l, m)].norm_sqr() * (ml.nbar * (mm.nbar + 1.0) - ml.alpha.norm_sqr() * mm.alpha.norm_sqr());
            f3 += s[(m, l)] * s[(m, l)]
                * (ml.xi.conj() * mm.xi - ml.alpha.conj() * ml.alpha.conj() * mm.alpha * mm.alpha);
            f6 += s[(l, l)]
                * s[(m, l)]
                * (2.0 * ml.beta.conj() + ml.alpha.conj() - 2.0 * ml.nbar * ml.alpha.conj())
                * mm.alpha;
            for t in 0..dim {
                if t == l || t == m {
                    continue;
                }
                let mt = &moments[t];
                f4 += s[(m, l)]
                    * s[(l, t)]
                    * (2.0 * ml.nbar + 1.0 - 2.0 * ml.alpha.norm_sqr())
                    * mm.alpha
                    * mt.alpha.conj();
                f5 += s[(m, l)]
                    * s[(t, l)]
                    * (ml.xi.conj() - ml.alpha.conj() * ml.alpha.conj())
                    * mm.alpha
                    * mt.alpha;
            }
        }
    }
    Ok([f1, f2, f3.re, f4.re, 2.0 * f5.re, 2.0 * f6.re])
}

/// F_w evaluated purely from input moments: 4(F1 + ... + F6).
pub fn qfi_from_moments(
    u: &ModeUnitary,
    moments: &[MomentSet],
    phase_modes: &[usize],
    w: &WeightVector,
) -> Result<f64, QfiError> {
    let terms = fw_terms(u, moments, phase_modes, w)?;
    Ok(4.0 * terms.iter().sum::<f64>())
}

/// Multi-parameter CRB: sqrt(w^T F^+ w) with F^+ the inverse on the support
/// (eigenvalues above the relative support threshold). Errors if w leaks
/// into the kernel, naming the offending null direction.
pub fn crb_delta_q(f: &QfiMatrix, w: &WeightVector) -> Result<f64, QfiError> {
    assert_eq!(f.d(), w.d());
    let cutoff = f.support_cutoff();
    let wv = DVector::from_column_slice(w.as_slice());
    let wnorm = wv.norm();
    let mut var = 0.0;
    for i in 0..f.d() {
        let lambda = f.eigenvalues[i];
        let vec = f.eigenvectors.column(i);
        let overlap = vec.dot(&wv);
        if lambda > cutoff {
            var += overlap * overlap / lambda;
        } else if overlap.abs() > KERNEL_OVERLAP_TOLERANCE * wnorm {
            return Err(QfiError::KernelOverlap {
                overlap: overlap.abs(),
                direction: vec.iter().cloned().collect(),
            });
        }
    }
    Ok(var.sqrt())
}

/// Scalar Cauchy-Schwarz bound: Delta q >= |w|^2 / sqrt(F_w).
pub fn crb_cauchy_schwarz(fw: f64, w: &WeightVector) -> Result<f64, QfiError> {
    if fw <= 0.0 {
        return Err(QfiError::NonPositiveFw(fw));
    }
    Ok(w.norm_sqr() / fw.sqrt())
}
