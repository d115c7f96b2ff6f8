//! Mixed-radix registers and complex state vectors.
//!
//! A register is an ordered list of qudit dimensions `(d_0, ..., d_{N-1})`.
//! Flat indices use the mixed-radix positional convention with **site 0 most
//! significant**: the digit string `a_0 a_1 ... a_{N-1}` encodes to
//!
//! ```text
//! index = a_0 · (d_1 d_2 ⋯ d_{N-1}) + a_1 · (d_2 ⋯ d_{N-1}) + ⋯ + a_{N-1}
//! ```
//!
//! so for uniform radix `d` the label reads like an ordinary base-`d`
//! numeral. Labels are the digit strings themselves (`"403"`); registers
//! with a radix above 10 fall back to dot-separated decimal (`"12.0.11"`).
//!
//! [`StateVector`] owns a dense `Vec<Complex64>` of amplitudes over such a
//! register and knows how to apply arbitrary one- and two-site operators.
//! Two-site operators use row ordering `i_a · d_b + i_b` for sites `(a, b)`;
//! the sites may be any distinct pair, in either order, adjacent or not.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

/// Default cap on the total register dimension (2^20 amplitudes).
///
/// Guards against accidental exponential blow-up from a config typo; the CLI
/// can override it through the `BUBBLECHAIN_MAX_DIM` environment variable.
pub const DEFAULT_MAX_DIM: usize = 1 << 20;

/// A digit configuration, most-significant site first.
pub type BasisState = Vec<u8>;

/// An ordered collection of qudits with per-site dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadixRegister {
    dims: Vec<usize>,
    /// `strides[s]` = product of dimensions of all sites after `s`.
    strides: Vec<usize>,
    dim: usize,
}

impl MixedRadixRegister {
    /// Builds a register, enforcing the default dimension cap.
    pub fn new(dims: &[usize]) -> Result<Self> {
        Self::with_max_dim(dims, DEFAULT_MAX_DIM)
    }

    /// Builds a register with an explicit dimension cap.
    pub fn with_max_dim(dims: &[usize], max_dim: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument(
                "register needs at least one site".into(),
            ));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "qudit dimension must be at least 2, got {bad}"
            )));
        }
        let mut dim: usize = 1;
        for &d in dims {
            dim = dim.checked_mul(d).ok_or(Error::TooLarge {
                dim: usize::MAX,
                cap: max_dim,
            })?;
            if dim > max_dim {
                return Err(Error::TooLarge { dim, cap: max_dim });
            }
        }
        let mut strides = vec![1usize; dims.len()];
        for s in (0..dims.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * dims[s + 1];
        }
        Ok(Self {
            dims: dims.to_vec(),
            strides,
            dim,
        })
    }

    /// Uniform-radix convenience constructor.
    pub fn uniform(d: usize, n_sites: usize) -> Result<Self> {
        Self::new(&vec![d; n_sites])
    }

    /// Total Hilbert-space dimension (product of site dimensions).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sites.
    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    /// Dimension of one site.
    pub fn site_dim(&self, site: usize) -> Result<usize> {
        self.dims.get(site).copied().ok_or(Error::IndexError {
            index: site,
            limit: self.dims.len(),
        })
    }

    /// All site dimensions, most significant first.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Flat-index stride of a site (product of later site dimensions).
    pub fn stride(&self, site: usize) -> Result<usize> {
        self.strides.get(site).copied().ok_or(Error::IndexError {
            index: site,
            limit: self.dims.len(),
        })
    }

    /// Encodes a digit configuration into its flat index.
    pub fn encode(&self, digits: &[u8]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(Error::InvalidBasisState {
                reason: format!("expected {} digits, got {}", self.dims.len(), digits.len()),
            });
        }
        let mut index = 0usize;
        for (s, (&a, &d)) in digits.iter().zip(&self.dims).enumerate() {
            if (a as usize) >= d {
                return Err(Error::InvalidBasisState {
                    reason: format!("digit {a} at site {s} exceeds radix {d}"),
                });
            }
            index += (a as usize) * self.strides[s];
        }
        Ok(index)
    }

    /// Decodes a flat index into its digit configuration.
    pub fn decode(&self, index: usize) -> Result<BasisState> {
        if index >= self.dim {
            return Err(Error::IndexError {
                index,
                limit: self.dim,
            });
        }
        let mut rem = index;
        let mut digits = Vec::with_capacity(self.dims.len());
        for s in 0..self.dims.len() {
            digits.push((rem / self.strides[s]) as u8);
            rem %= self.strides[s];
        }
        Ok(digits)
    }

    /// Digit at one site of a flat index, without building the full vector.
    pub fn digit(&self, index: usize, site: usize) -> Result<u8> {
        if index >= self.dim {
            return Err(Error::IndexError {
                index,
                limit: self.dim,
            });
        }
        let stride = self.stride(site)?;
        Ok(((index / stride) % self.dims[site]) as u8)
    }

    /// Human-readable label of a flat index.
    ///
    /// Digit string (`"403"`) when every radix fits a single decimal digit,
    /// dot-separated decimals otherwise (`"12.0.11"`).
    pub fn label(&self, index: usize) -> Result<String> {
        let digits = self.decode(index)?;
        if self.dims.iter().all(|&d| d <= 10) {
            Ok(digits.iter().map(|d| char::from(b'0' + d)).collect())
        } else {
            Ok(digits
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("."))
        }
    }

    /// Parses a label produced by [`label`](Self::label) back to a flat index.
    pub fn parse_label(&self, label: &str) -> Result<usize> {
        let digits: Vec<u8> = if label.contains('.') {
            label
                .split('.')
                .map(|part| {
                    part.parse::<u8>().map_err(|_| Error::InvalidBasisState {
                        reason: format!("bad digit group '{part}' in label '{label}'"),
                    })
                })
                .collect::<Result<_>>()?
        } else {
            label
                .chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| Error::InvalidBasisState {
                            reason: format!("bad digit '{c}' in label '{label}'"),
                        })
                })
                .collect::<Result<_>>()?
        };
        self.encode(&digits)
    }
}

/// Dense complex state over a [`MixedRadixRegister`].
#[derive(Debug, Clone)]
pub struct StateVector {
    reg: MixedRadixRegister,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The zero-index basis state `|00...0⟩`.
    pub fn ground(reg: &MixedRadixRegister) -> Self {
        let mut amps = vec![Complex64::ZERO; reg.dim()];
        amps[0] = Complex64::ONE;
        Self {
            reg: reg.clone(),
            amps,
        }
    }

    /// A single basis state from its digit configuration.
    pub fn basis(reg: &MixedRadixRegister, digits: &[u8]) -> Result<Self> {
        let idx = reg.encode(digits)?;
        let mut amps = vec![Complex64::ZERO; reg.dim()];
        amps[idx] = Complex64::ONE;
        Ok(Self {
            reg: reg.clone(),
            amps,
        })
    }

    /// A normalized superposition of basis states.
    ///
    /// Terms with coinciding indices accumulate before normalization.
    pub fn superposition(reg: &MixedRadixRegister, terms: &[(Complex64, &[u8])]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidState("empty superposition".into()));
        }
        let mut amps = vec![Complex64::ZERO; reg.dim()];
        for (coeff, digits) in terms {
            let idx = reg.encode(digits)?;
            amps[idx] += coeff;
        }
        let mut state = Self {
            reg: reg.clone(),
            amps,
        };
        state.normalize()?;
        Ok(state)
    }

    /// Wraps raw amplitudes (must match the register dimension).
    pub fn from_amplitudes(reg: &MixedRadixRegister, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != reg.dim() {
            return Err(Error::InvalidState(format!(
                "amplitude vector has length {}, register dimension is {}",
                amps.len(),
                reg.dim()
            )));
        }
        Ok(Self {
            reg: reg.clone(),
            amps,
        })
    }

    /// The underlying register.
    pub fn register(&self) -> &MixedRadixRegister {
        &self.reg
    }

    /// Read-only amplitudes.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Mutable amplitudes (norm is the caller's responsibility).
    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm; errors on (numerically) zero states.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::InvalidState("cannot normalize zero state".into()));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(())
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.reg != other.reg {
            return Err(Error::InvalidState(
                "inner product between different registers".into(),
            ));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies every amplitude by `exp(i φ)`.
    pub fn apply_global_phase(&mut self, phi: f64) {
        let phase = Complex64::from_polar(1.0, phi);
        for a in &mut self.amps {
            *a *= phase;
        }
    }

    /// Measurement probabilities for every basis state.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability of one basis state given by its digits.
    pub fn population_of(&self, digits: &[u8]) -> Result<f64> {
        Ok(self.amps[self.reg.encode(digits)?].norm_sqr())
    }

    /// Applies a `d×d` operator to one site: `|ψ⟩ → (1 ⊗ M ⊗ 1)|ψ⟩`.
    pub fn apply_local(&mut self, site: usize, op: &DMatrix<Complex64>) -> Result<()> {
        let d = self.reg.site_dim(site)?;
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::ShapeError {
                expected: d,
                got_rows: op.nrows(),
                got_cols: op.ncols(),
            });
        }
        let stride = self.reg.stride(site)?;
        let block = d * stride;
        let mut scratch = vec![Complex64::ZERO; d];
        for base in (0..self.reg.dim()).step_by(block) {
            for inner in 0..stride {
                let start = base + inner;
                for (k, slot) in scratch.iter_mut().enumerate() {
                    *slot = self.amps[start + k * stride];
                }
                for i in 0..d {
                    let mut acc = Complex64::ZERO;
                    for k in 0..d {
                        acc += op[(i, k)] * scratch[k];
                    }
                    self.amps[start + i * stride] = acc;
                }
            }
        }
        Ok(())
    }

    /// Applies a `(d_a d_b)×(d_a d_b)` operator to two distinct sites.
    ///
    /// Row/column ordering is `i_a · d_b + i_b` regardless of whether
    /// `a < b` on the chain.
    pub fn apply_two_site(&mut self, a: usize, b: usize, op: &DMatrix<Complex64>) -> Result<()> {
        if a == b {
            return Err(Error::InvalidSitePair {
                a,
                b,
                reason: "sites must be distinct".into(),
            });
        }
        let da = self.reg.site_dim(a).map_err(|_| Error::InvalidSitePair {
            a,
            b,
            reason: format!("site {a} out of range"),
        })?;
        let db = self.reg.site_dim(b).map_err(|_| Error::InvalidSitePair {
            a,
            b,
            reason: format!("site {b} out of range"),
        })?;
        let dd = da * db;
        if op.nrows() != dd || op.ncols() != dd {
            return Err(Error::ShapeError {
                expected: dd,
                got_rows: op.nrows(),
                got_cols: op.ncols(),
            });
        }
        let sa = self.reg.stride(a)?;
        let sb = self.reg.stride(b)?;
        let mut scratch = vec![Complex64::ZERO; dd];
        // Bases are the flat indices whose digits at both sites are zero.
        for base in 0..self.reg.dim() {
            if (base / sa) % da != 0 || (base / sb) % db != 0 {
                continue;
            }
            for ia in 0..da {
                for ib in 0..db {
                    scratch[ia * db + ib] = self.amps[base + ia * sa + ib * sb];
                }
            }
            for row in 0..dd {
                let mut acc = Complex64::ZERO;
                for col in 0..dd {
                    acc += op[(row, col)] * scratch[col];
                }
                self.amps[base + (row / db) * sa + (row % db) * sb] = acc;
            }
        }
        Ok(())
    }

    /// Multiplies amplitudes by a per-basis-state diagonal factor.
    pub fn apply_diagonal(&mut self, diag: &[Complex64]) -> Result<()> {
        if diag.len() != self.reg.dim() {
            return Err(Error::ShapeError {
                expected: self.reg.dim(),
                got_rows: diag.len(),
                got_cols: 1,
            });
        }
        for (a, d) in self.amps.iter_mut().zip(diag) {
            *a *= d;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense Kronecker-product reference for a local operator on a 3-site
    /// register, used as an oracle for the strided in-place application.
    fn kron_embed_local(
        dims: &[usize],
        site: usize,
        op: &DMatrix<Complex64>,
    ) -> DMatrix<Complex64> {
        let mut full = DMatrix::identity(1, 1);
        for (s, &d) in dims.iter().enumerate() {
            let factor = if s == site {
                op.clone()
            } else {
                DMatrix::identity(d, d)
            };
            full = full.kronecker(&factor);
        }
        full
    }

    #[test]
    fn encode_decode_roundtrip_exhaustive() {
        let reg = MixedRadixRegister::new(&[4, 8, 3]).unwrap();
        assert_eq!(reg.dim(), 96, "4*8*3 states expected");
        for idx in 0..reg.dim() {
            let digits = reg.decode(idx).unwrap();
            assert_eq!(
                reg.encode(&digits).unwrap(),
                idx,
                "roundtrip must be the identity at index {idx}"
            );
        }
    }

    #[test]
    fn site_zero_is_most_significant() {
        let reg = MixedRadixRegister::uniform(8, 3).unwrap();
        // "403" = 4*64 + 0*8 + 3
        assert_eq!(reg.encode(&[4, 0, 3]).unwrap(), 259);
        assert_eq!(reg.label(259).unwrap(), "403");
        assert_eq!(reg.parse_label("403").unwrap(), 259);
    }

    #[test]
    fn wide_radix_labels_use_dots() {
        let reg = MixedRadixRegister::new(&[12, 3]).unwrap();
        let idx = reg.encode(&[11, 2]).unwrap();
        assert_eq!(reg.label(idx).unwrap(), "11.2");
        assert_eq!(reg.parse_label("11.2").unwrap(), idx);
    }

    #[test]
    fn rejects_bad_digits_and_lengths() {
        let reg = MixedRadixRegister::uniform(4, 3).unwrap();
        assert!(matches!(
            reg.encode(&[0, 4, 0]),
            Err(Error::InvalidBasisState { .. })
        ));
        assert!(matches!(
            reg.encode(&[0, 0]),
            Err(Error::InvalidBasisState { .. })
        ));
        assert!(matches!(
            reg.parse_label("0x0"),
            Err(Error::InvalidBasisState { .. })
        ));
    }

    #[test]
    fn dimension_cap_is_enforced() {
        // 8^7 = 2097152 > 2^20.
        assert!(matches!(
            MixedRadixRegister::uniform(8, 7),
            Err(Error::TooLarge { .. })
        ));
        // ... but an explicit cap lifts it.
        assert!(MixedRadixRegister::with_max_dim(&[8; 7], 1 << 21).is_ok());
    }

    #[test]
    fn apply_local_matches_dense_kronecker() {
        let dims = [2usize, 3, 4];
        let reg = MixedRadixRegister::new(&dims).unwrap();
        // Non-symmetric complex operator on the middle site.
        let op = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.3, 0.1),
                c(-1.0, 0.0),
                c(0.0, 2.0),
                c(0.5, -0.5),
                c(0.0, 0.0),
                c(1.0, 1.0),
                c(2.0, 0.0),
                c(0.0, -1.0),
                c(-0.7, 0.2),
            ],
        );
        let full = kron_embed_local(&dims, 1, &op);

        // A dense, irregular input state.
        let amps: Vec<Complex64> = (0..reg.dim())
            .map(|k| c((k as f64 * 0.37).sin(), (k as f64 * 0.61).cos()))
            .collect();
        let mut state = StateVector::from_amplitudes(&reg, amps.clone()).unwrap();
        state.apply_local(1, &op).unwrap();

        let input = DMatrix::from_column_slice(reg.dim(), 1, &amps);
        let expected = &full * input;
        for k in 0..reg.dim() {
            assert_relative_eq!(
                state.amplitudes()[k].re,
                expected[(k, 0)].re,
                epsilon = 1e-12
            );
            assert_relative_eq!(
                state.amplitudes()[k].im,
                expected[(k, 0)].im,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn apply_two_site_matches_dense_kronecker_adjacent_and_not() {
        let dims = [3usize, 2, 4];
        let reg = MixedRadixRegister::new(&dims).unwrap();
        let amps: Vec<Complex64> = (0..reg.dim())
            .map(|k| c((k as f64 * 0.23).cos(), (k as f64 * 0.41).sin()))
            .collect();

        // Operator on (site 0, site 2): rows ordered i0 * d2 + i2, so the
        // dense reference contracts site 1 with the identity in the middle
        // after a reshuffle. Build it entrywise instead, from the definition.
        let dd = dims[0] * dims[2];
        let op = DMatrix::from_fn(dd, dd, |r, cidx| {
            c(
                ((3 * r + 7 * cidx) as f64 * 0.11).sin(),
                ((r + 2 * cidx) as f64 * 0.17).cos(),
            )
        });
        let mut dense = DMatrix::from_element(reg.dim(), reg.dim(), Complex64::ZERO);
        for row in 0..reg.dim() {
            let rd = reg.decode(row).unwrap();
            for col in 0..reg.dim() {
                let cd = reg.decode(col).unwrap();
                if rd[1] != cd[1] {
                    continue;
                }
                let r2 = rd[0] as usize * dims[2] + rd[2] as usize;
                let c2 = cd[0] as usize * dims[2] + cd[2] as usize;
                dense[(row, col)] = op[(r2, c2)];
            }
        }

        let mut state = StateVector::from_amplitudes(&reg, amps.clone()).unwrap();
        state.apply_two_site(0, 2, &op).unwrap();
        let expected = &dense * DMatrix::from_column_slice(reg.dim(), 1, &amps);
        for k in 0..reg.dim() {
            let got = state.amplitudes()[k];
            assert!(
                (got - expected[(k, 0)]).norm() < 1e-12,
                "two-site application deviates from dense oracle at index {k}"
            );
        }
    }

    #[test]
    fn two_site_rejects_bad_pairs_and_shapes() {
        let reg = MixedRadixRegister::uniform(4, 3).unwrap();
        let mut state = StateVector::ground(&reg);
        let op16 = DMatrix::identity(16, 16);
        assert!(matches!(
            state.apply_two_site(1, 1, &op16),
            Err(Error::InvalidSitePair { .. })
        ));
        assert!(matches!(
            state.apply_two_site(0, 5, &op16),
            Err(Error::InvalidSitePair { .. })
        ));
        let op9 = DMatrix::identity(9, 9);
        assert!(matches!(
            state.apply_two_site(0, 1, &op9),
            Err(Error::ShapeError { .. })
        ));
    }

    #[test]
    fn superposition_normalizes_and_accumulates() {
        let reg = MixedRadixRegister::uniform(4, 2).unwrap();
        let state = StateVector::superposition(
            &reg,
            &[
                (c(1.0, 0.0), &[0, 0][..]),
                (c(0.0, 1.0), &[1, 2][..]),
                (c(1.0, 0.0), &[0, 0][..]), // accumulates onto the first term
            ],
        )
        .unwrap();
        assert_relative_eq!(state.norm(), 1.0, epsilon = 1e-14);
        let p00 = state.population_of(&[0, 0]).unwrap();
        let p12 = state.population_of(&[1, 2]).unwrap();
        assert_relative_eq!(p00, 0.8, epsilon = 1e-14);
        assert_relative_eq!(p12, 0.2, epsilon = 1e-14);
    }

    proptest! {
        /// Any permutation matrix is unitary, so the norm must be conserved
        /// by apply_local on random states.
        #[test]
        fn local_permutation_preserves_norm(
            seed in 0u64..1_000,
            site in 0usize..3,
        ) {
            let reg = MixedRadixRegister::uniform(4, 3).unwrap();
            let mut amps = vec![Complex64::ZERO; reg.dim()];
            let mut acc = seed;
            for a in amps.iter_mut() {
                // xorshift-style scramble: deterministic, irregular.
                acc ^= acc << 13;
                acc ^= acc >> 7;
                acc ^= acc << 17;
                acc = acc.wrapping_add(0x9E3779B97F4A7C15);
                *a = c((acc % 1000) as f64 / 500.0 - 1.0,
                       ((acc >> 10) % 1000) as f64 / 500.0 - 1.0);
            }
            let mut state = StateVector::from_amplitudes(&reg, amps).unwrap();
            if state.norm() < 1e-9 { return Ok(()); }
            state.normalize().unwrap();

            // Cyclic permutation on one site.
            let mut perm = DMatrix::from_element(4, 4, Complex64::ZERO);
            for k in 0..4 {
                perm[((k + 1) % 4, k)] = Complex64::ONE;
            }
            state.apply_local(site, &perm).unwrap();
            prop_assert!((state.norm() - 1.0).abs() < 1e-12);
        }

        /// Operators on disjoint sites commute.
        #[test]
        fn disjoint_local_operators_commute(sa in 0u64..500) {
            let reg = MixedRadixRegister::uniform(3, 3).unwrap();
            let op_a = DMatrix::from_fn(3, 3, |r, cc| {
                c(((sa as usize + 3*r + cc) as f64 * 0.31).sin(),
                  ((sa as usize + r + 5*cc) as f64 * 0.13).cos())
            });
            let op_b = DMatrix::from_fn(3, 3, |r, cc| {
                c(((sa as usize + 7*r + 2*cc) as f64 * 0.19).cos(),
                  ((sa as usize + 4*r + cc) as f64 * 0.23).sin())
            });
            let amps: Vec<Complex64> = (0..reg.dim())
                .map(|k| c(((k as u64 + sa) as f64 * 0.37).sin(),
                           ((k as u64 * 2 + sa) as f64 * 0.61).cos()))
                .collect();

            let mut ab = StateVector::from_amplitudes(&reg, amps.clone()).unwrap();
            ab.apply_local(0, &op_a).unwrap();
            ab.apply_local(2, &op_b).unwrap();

            let mut ba = StateVector::from_amplitudes(&reg, amps).unwrap();
            ba.apply_local(2, &op_b).unwrap();
            ba.apply_local(0, &op_a).unwrap();

            for k in 0..reg.dim() {
                prop_assert!((ab.amplitudes()[k] - ba.amplitudes()[k]).norm() < 1e-12);
            }
        }
    }
}
