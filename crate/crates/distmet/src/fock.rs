//! Exact multi-mode bosonic states in a truncated Fock space.
//!
//! States are stored sparsely as a map from occupation vectors to complex
//! amplitudes. Passive operations (beam splitters, phase shifts) conserve
//! total photon number, so a product of finite single-mode states never
//! truncates during network evolution.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Amplitudes below this magnitude are dropped from the sparse map.
pub const PRUNE_THRESHOLD: f64 = 1e-15;
/// Normalization tolerance for stored states.
pub const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("mode index {index} out of range for {modes} modes")]
    InvalidMode { index: usize, modes: usize },
    #[error("beam splitter requires two distinct modes, got {0}")]
    DegenerateModes(usize),
    #[error("transmissivity {0} outside [0, 1]")]
    InvalidTransmissivity(f64),
    #[error("total photon cap {cap} exceeded; required cap is {required}")]
    CapExceeded { cap: usize, required: usize },
    #[error("state norm {0} differs from 1 beyond tolerance")]
    NotNormalized(f64),
    #[error("mode count mismatch: {0} vs {1}")]
    ModeCountMismatch(usize, usize),
    #[error("occupation vector has length {got}, expected {expected}")]
    OccupationLength { got: usize, expected: usize },
}

/// Photon number per mode for one Fock basis vector.
///
/// Ordering is lexicographic (derived from the underlying `Vec`), which fixes
/// the basis order used for serialization and equality testing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OccupationVector(pub Vec<u32>);

impl OccupationVector {
    pub fn total_photons(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Sparse normalized state vector over the multi-mode Fock basis.
///
/// Immutable after construction; operations return new states.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    mode_count: usize,
    total_photon_cap: usize,
    amplitudes: BTreeMap<OccupationVector, Complex64>,
}

impl FockState {
    /// Builds a state from raw (occupation, amplitude) pairs, pruning tiny
    /// amplitudes and checking normalization and the photon cap.
    pub fn from_amplitudes<I>(
        mode_count: usize,
        total_photon_cap: usize,
        amps: I,
    ) -> Result<Self, FockError>
    where
        I: IntoIterator<Item = (OccupationVector, Complex64)>,
    {
        let mut map: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
        for (occ, amp) in amps {
            if occ.len() != mode_count {
                return Err(FockError::OccupationLength {
                    got: occ.len(),
                    expected: mode_count,
                });
            }
            let total = occ.total_photons() as usize;
            if total > total_photon_cap {
                return Err(FockError::CapExceeded {
                    cap: total_photon_cap,
                    required: total,
                });
            }
            *map.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        map.retain(|_, a| a.norm() > PRUNE_THRESHOLD);
        let state = FockState {
            mode_count,
            total_photon_cap,
            amplitudes: map,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(FockError::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Single Fock basis vector |n_1, ..., n_M>.
    pub fn basis_vector(counts: &[u32], total_photon_cap: usize) -> Result<Self, FockError> {
        Self::from_amplitudes(
            counts.len(),
            total_photon_cap,
            [(OccupationVector(counts.to_vec()), Complex64::new(1.0, 0.0))],
        )
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn total_photon_cap(&self) -> usize {
        self.total_photon_cap
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occ: &OccupationVector) -> Complex64 {
        self.amplitudes
            .get(occ)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .values()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner_product(&self, other: &FockState) -> Result<Complex64, FockError> {
        if self.mode_count != other.mode_count {
            return Err(FockError::ModeCountMismatch(self.mode_count, other.mode_count));
        }
        // iterate over the smaller map
        let (small, big) = if self.amplitudes.len() <= other.amplitudes.len() {
            (&self.amplitudes, &other.amplitudes)
        } else {
            (&other.amplitudes, &self.amplitudes)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (occ, a) in small {
            if let Some(b) = big.get(occ) {
                // conjugate always goes on `self`
                let (sa, ob) = if std::ptr::eq(small, &self.amplitudes) {
                    (*a, *b)
                } else {
                    (*b, *a)
                };
                acc += sa.conj() * ob;
            }
        }
        Ok(acc)
    }

    fn check_mode(&self, index: usize) -> Result<(), FockError> {
        if index >= self.mode_count {
            return Err(FockError::InvalidMode {
                index,
                modes: self.mode_count,
            });
        }
        Ok(())
    }

    /// Applies a two-mode beam splitter to modes `(i, j)`.
    ///
    /// The gate is defined by its mode-operator matrix (see
    /// [`crate::network::Gate::BeamSplitter`]); in the Fock basis this is the
    /// exact photon-number-conserving rotation obtained by substituting the
    /// conjugate matrix into the creation-operator monomials.
    pub fn apply_beam_splitter(
        &self,
        modes: (usize, usize),
        transmissivity: f64,
        phase: f64,
    ) -> Result<FockState, FockError> {
        let (i, j) = modes;
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(FockError::DegenerateModes(i));
        }
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(FockError::InvalidTransmissivity(transmissivity));
        }
        // conjugate of the mode matrix: amplitude substitution
        //   a_i^+ -> c11 a_i^+ + c21 a_j^+,  a_j^+ -> c12 a_i^+ + c22 a_j^+
        let tc = transmissivity.sqrt();
        let rc = (1.0 - transmissivity).sqrt();
        let eip = Complex64::from_polar(1.0, phase);
        let c11 = Complex64::new(tc, 0.0);
        let c12 = eip.conj() * rc;
        let c21 = -eip * rc;
        let c22 = Complex64::new(tc, 0.0);

        let max_n = self.total_photon_cap;
        let fact = factorials(max_n);

        let mut out: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            let n1 = occ.0[i] as usize;
            let n2 = occ.0[j] as usize;
            let total = n1 + n2;
            if total == 0 {
                *out.entry(occ.clone()).or_insert(Complex64::new(0.0, 0.0)) += amp;
                continue;
            }
            // coefficient of a_i^+^k a_j^+^(total-k) in
            // (c11 x + c21 y)^n1 (c12 x + c22 y)^n2
            let mut coef = vec![Complex64::new(0.0, 0.0); total + 1];
            for p in 0..=n1 {
                let b1 = binom(&fact, n1, p) * c11.powu(p as u32) * c21.powu((n1 - p) as u32);
                for r in 0..=n2 {
                    let b2 = binom(&fact, n2, r) * c12.powu(r as u32) * c22.powu((n2 - r) as u32);
                    coef[p + r] += b1 * b2;
                }
            }
            let base = amp / (fact[n1] * fact[n2]).sqrt();
            for (k, c) in coef.iter().enumerate() {
                if c.norm() <= PRUNE_THRESHOLD {
                    continue;
                }
                let mut counts = occ.0.clone();
                counts[i] = k as u32;
                counts[j] = (total - k) as u32;
                let scale = (fact[k] * fact[total - k]).sqrt();
                *out.entry(OccupationVector(counts))
                    .or_insert(Complex64::new(0.0, 0.0)) += base * c * scale;
            }
        }
        out.retain(|_, a| a.norm() > PRUNE_THRESHOLD);
        Ok(FockState {
            mode_count: self.mode_count,
            total_photon_cap: self.total_photon_cap,
            amplitudes: out,
        })
    }

    /// Applies exp(-i theta n_j): each amplitude on occupation k picks up
    /// exp(-i theta k_j).
    pub fn apply_phase_shift(&self, mode: usize, theta: f64) -> Result<FockState, FockError> {
        self.check_mode(mode)?;
        let amps = self
            .amplitudes
            .iter()
            .map(|(occ, amp)| {
                let k = occ.0[mode] as f64;
                (occ.clone(), amp * Complex64::from_polar(1.0, -theta * k))
            })
            .collect();
        Ok(FockState {
            mode_count: self.mode_count,
            total_photon_cap: self.total_photon_cap,
            amplitudes: amps,
        })
    }

    /// Phase interrogation exp(-i sum_j theta_j n_j) over the given modes.
    pub fn apply_phases(&self, modes: &[usize], thetas: &[f64]) -> Result<FockState, FockError> {
        assert_eq!(modes.len(), thetas.len());
        for &m in modes {
            self.check_mode(m)?;
        }
        let amps = self
            .amplitudes
            .iter()
            .map(|(occ, amp)| {
                let angle: f64 = modes
                    .iter()
                    .zip(thetas)
                    .map(|(&m, &t)| t * occ.0[m] as f64)
                    .sum();
                (occ.clone(), amp * Complex64::from_polar(1.0, -angle))
            })
            .collect();
        Ok(FockState {
            mode_count: self.mode_count,
            total_photon_cap: self.total_photon_cap,
            amplitudes: amps,
        })
    }

    /// Returns (<n_j n_k>, <n_j><n_k>).
    pub fn number_correlation(&self, j: usize, k: usize) -> Result<(f64, f64), FockError> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        let mut njk = 0.0;
        let mut nj = 0.0;
        let mut nk = 0.0;
        for (occ, amp) in &self.amplitudes {
            let p = amp.norm_sqr();
            njk += p * occ.0[j] as f64 * occ.0[k] as f64;
            nj += p * occ.0[j] as f64;
            nk += p * occ.0[k] as f64;
        }
        Ok((njk, nj * nk))
    }

    pub fn mean_photon_number(&self, mode: usize) -> Result<f64, FockError> {
        self.check_mode(mode)?;
        Ok(self
            .amplitudes
            .iter()
            .map(|(occ, amp)| amp.norm_sqr() * occ.0[mode] as f64)
            .sum())
    }

    /// |<reference|state>|^2, the expectation of the projector onto `reference`.
    pub fn fidelity_projector(&self, reference: &FockState) -> Result<f64, FockError> {
        Ok(reference.inner_product(self)?.norm_sqr())
    }

    /// Serializable form: `{"modes": M, "cap": C, "amps": [[occ, re, im], ...]}`
    /// with entries in lexicographic basis order.
    pub fn to_serial(&self) -> FockStateSerial {
        FockStateSerial {
            modes: self.mode_count,
            cap: self.total_photon_cap,
            amps: self
                .amplitudes
                .iter()
                .map(|(occ, a)| (occ.0.clone(), a.re, a.im))
                .collect(),
        }
    }

    pub fn from_serial(serial: &FockStateSerial) -> Result<Self, FockError> {
        Self::from_amplitudes(
            serial.modes,
            serial.cap,
            serial
                .amps
                .iter()
                .map(|(occ, re, im)| (OccupationVector(occ.clone()), Complex64::new(*re, *im))),
        )
    }
}

/// JSON wire format for [`FockState`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockStateSerial {
    pub modes: usize,
    pub cap: usize,
    pub amps: Vec<(Vec<u32>, f64, f64)>,
}

/// Normalized single-mode state on |0> ... |cutoff>.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeState {
    amplitudes: Vec<Complex64>,
}

impl SingleModeState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, FockError> {
        assert!(!amplitudes.is_empty());
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(FockError::NotNormalized(norm));
        }
        Ok(SingleModeState { amplitudes })
    }

    /// Normalizes arbitrary coefficients; the caller declared the cutoff by
    /// the vector length.
    pub fn from_unnormalized(amplitudes: Vec<Complex64>) -> Result<Self, FockError> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < PRUNE_THRESHOLD {
            return Err(FockError::NotNormalized(norm));
        }
        Ok(SingleModeState {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Number eigenstate |n>.
    pub fn fock(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        SingleModeState { amplitudes: amps }
    }

    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    /// Coherent state truncated at `cutoff` and renormalized; returns the
    /// state and the squared norm of the discarded tail.
    pub fn coherent_truncated(alpha: Complex64, cutoff: usize) -> (Self, f64) {
        let fact = factorials(cutoff);
        let weight = (-alpha.norm_sqr()).exp();
        let mut amps = Vec::with_capacity(cutoff + 1);
        for k in 0..=cutoff {
            amps.push((weight / 2.0).exp() * Complex64::new(0.0, 0.0) + alpha.powu(k as u32) / fact[k].sqrt());
        }
        // amplitude c_k = e^{-|alpha|^2/2} alpha^k / sqrt(k!)
        let pref = (-alpha.norm_sqr() / 2.0).exp();
        for a in amps.iter_mut() {
            *a *= pref;
        }
        let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let discarded = (1.0 - kept).max(0.0);
        let norm = kept.sqrt();
        let amps = amps.into_iter().map(|a| a / norm).collect();
        (SingleModeState { amplitudes: amps }, discarded)
    }

    pub fn cutoff(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// The per-mode input moments (alpha, nbar, xi, beta, m, v) by exact
    /// ladder-operator sums.
    pub fn moments(&self) -> MomentSet {
        let c = &self.amplitudes;
        let cut = c.len() - 1;
        let mut alpha = Complex64::new(0.0, 0.0);
        let mut xi = Complex64::new(0.0, 0.0);
        let mut beta = Complex64::new(0.0, 0.0);
        let mut nbar = 0.0;
        let mut m = 0.0;
        for k in 0..=cut {
            let p = c[k].norm_sqr();
            nbar += k as f64 * p;
            m += (k * k) as f64 * p;
            if k + 1 <= cut {
                let step = c[k].conj() * c[k + 1] * ((k + 1) as f64).sqrt();
                alpha += step;
                beta += step * k as f64;
            }
            if k + 2 <= cut {
                xi += c[k].conj() * c[k + 2] * (((k + 1) * (k + 2)) as f64).sqrt();
            }
        }
        MomentSet {
            alpha,
            nbar,
            xi,
            beta,
            m,
            v: m - nbar * nbar,
        }
    }
}

/// Single-mode input moments: <a>, <a^+a>, <a^2>, <a^+aa>, <(a^+a)^2> and the
/// number variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub alpha: Complex64,
    pub nbar: f64,
    pub xi: Complex64,
    pub beta: Complex64,
    pub m: f64,
    pub v: f64,
}

impl MomentSet {
    pub const VACUUM: MomentSet = MomentSet {
        alpha: Complex64::new(0.0, 0.0),
        nbar: 0.0,
        xi: Complex64::new(0.0, 0.0),
        beta: Complex64::new(0.0, 0.0),
        m: 0.0,
        v: 0.0,
    };

    /// Moments of the number eigenstate |n>.
    pub fn fock(n: u32) -> MomentSet {
        MomentSet {
            alpha: Complex64::new(0.0, 0.0),
            nbar: n as f64,
            xi: Complex64::new(0.0, 0.0),
            beta: Complex64::new(0.0, 0.0),
            m: (n as f64) * (n as f64),
            v: 0.0,
        }
    }

    /// Checks the Cauchy-Schwarz chain |alpha|^2 <= nbar, nbar <= sqrt(m),
    /// |xi| <= sqrt(m), |beta| <= sqrt(m nbar) and v >= 0.
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let checks: [(bool, &str); 5] = [
            (self.alpha.norm_sqr() <= self.nbar + tol, "|alpha|^2 <= nbar"),
            (self.nbar <= self.m.sqrt() + tol, "nbar <= sqrt(m)"),
            (self.xi.norm() <= self.m.sqrt() + tol, "|xi| <= sqrt(m)"),
            (
                self.beta.norm() <= (self.m * self.nbar).sqrt() + tol,
                "|beta| <= sqrt(m nbar)",
            ),
            (self.v >= -tol, "v >= 0"),
        ];
        for (ok, desc) in checks {
            if !ok {
                return Err(format!("moment invariant violated: {desc}"));
            }
        }
        Ok(())
    }
}

/// Tensor product of single-mode factors; the cap is the sum of cutoffs so no
/// truncation occurs.
pub fn product_state(factors: &[SingleModeState]) -> Result<FockState, FockError> {
    let cap = factors.iter().map(|f| f.cutoff()).sum();
    product_state_with_cap(factors, cap)
}

/// Tensor product with an explicit photon cap; errors if the factors require
/// a larger cap, reporting the required value.
pub fn product_state_with_cap(
    factors: &[SingleModeState],
    cap: usize,
) -> Result<FockState, FockError> {
    assert!(!factors.is_empty());
    let required: usize = factors.iter().map(|f| f.cutoff()).sum();
    if required > cap {
        return Err(FockError::CapExceeded { cap, required });
    }
    let mut amps: Vec<(Vec<u32>, Complex64)> = vec![(Vec::new(), Complex64::new(1.0, 0.0))];
    for factor in factors {
        let mut next = Vec::with_capacity(amps.len() * (factor.cutoff() + 1));
        for (occ, a) in &amps {
            for (k, c) in factor.amplitudes().iter().enumerate() {
                if c.norm() <= PRUNE_THRESHOLD {
                    continue;
                }
                let mut occ2 = occ.clone();
                occ2.push(k as u32);
                next.push((occ2, a * c));
            }
        }
        amps = next;
    }
    FockState::from_amplitudes(
        factors.len(),
        cap,
        amps.into_iter().map(|(o, a)| (OccupationVector(o), a)),
    )
}

pub(crate) fn factorials(up_to: usize) -> Vec<f64> {
    let mut f = vec![1.0; up_to + 1];
    for k in 1..=up_to {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

fn binom(fact: &[f64], n: usize, k: usize) -> f64 {
    fact[n] / (fact[k] * fact[n - k])
}
