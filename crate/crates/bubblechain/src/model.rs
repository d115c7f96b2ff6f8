//! Hamiltonian of the plaquette ladder in the bubble basis.
//!
//! Each ladder plaquette is one qudit. Its levels enumerate the
//! gauge-invariant configurations of the four surrounding links after
//! truncating each link space, and the Hamiltonian decomposes into
//!
//! ```text
//! H = -x Σ_p U_p + (g∥²/2) Σ_p L(p) + (g⊥²/2) Σ_<p,q> V(p,q)
//! ```
//!
//! * `U_p` — the magnetic (plaquette-flip) term, a real symmetric single-site
//!   matrix; `x` is the kinetic coupling.
//! * `L(p)` — the electric energy of the links owned by plaquette `p`
//!   (diagonal). Boundary plaquettes own an extra rung, so the first and
//!   last sites pick up an additional diagonal boundary weight with the
//!   perpendicular coupling.
//! * `V(p,q)` — the electric energy of the rung shared by neighbouring
//!   plaquettes. In the spin-1/2 sector it is purely diagonal. In the
//!   spin-1 sector the shared-rung flux does not determine the two bubble
//!   states uniquely, which produces both a diagonal part and a small set of
//!   two-site flips between configurations carrying identical flux.
//!
//! Level conventions (most-significant site first in all labels):
//!
//! * [`Sector::Half`], 4 levels — 0: empty, 1: flux along both horizontal
//!   links (the string passes through), 2 and 3: single-rung excitations.
//! * [`Sector::One`], 8 levels — 0: empty, 5: the spin-1 string state,
//!   4 / 3: left / right end-caps of a broken string (charge pair),
//!   1, 2, 6, 7: mixed-flux excitations.
//!
//! Not every neighbour combination is gauge-consistent in the spin-1
//! sector: the flux through the shared rung must match. The reachable set
//! splits further under dynamics because the two boundary digits are
//! superselected; see [`PhysicalSubspace`].

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::qudit::{BasisState, MixedRadixRegister, StateVector, DEFAULT_MAX_DIM};
use crate::Result;

/// Link-spin truncation choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    /// Links truncated at spin 1/2: four bubble levels per plaquette.
    Half,
    /// Links truncated at spin 1: eight bubble levels per plaquette.
    One,
}

impl Sector {
    /// Number of bubble levels per plaquette.
    pub fn dim(self) -> usize {
        match self {
            Sector::Half => 4,
            Sector::One => 8,
        }
    }
}

/// Pair-term flavour used when building the Hamiltonian.
///
/// `Simplified` subtracts a constant from the spin-1 pair diagonal so that
/// fewer native gates are needed; on the physical subspace it differs from
/// `Original` by exactly `(3/4)·(g⊥²/2)` times the identity per bond, which
/// evolution and compilation reinstate as a global phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairForm {
    #[default]
    Original,
    Simplified,
}

/// Physical couplings and geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Kinetic (plaquette-flip) coupling. May be negative; the sign only
    /// flips the relative phase of the flip term.
    pub x: f64,
    /// Electric coupling of the horizontal links, `g∥²`.
    pub g_par2: f64,
    /// Electric coupling of the rungs, `g⊥²`.
    pub g_perp2: f64,
    /// Number of plaquettes (chain length).
    pub n_plaquettes: usize,
    /// Link truncation.
    pub sector: Sector,
}

impl ModelParams {
    /// Validates couplings and geometry without building anything.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x", self.x),
            ("g_par2", self.g_par2),
            ("g_perp2", self.g_perp2),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if self.n_plaquettes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 plaquettes, got {}",
                self.n_plaquettes
            )));
        }
        Ok(())
    }

    /// The register describing this chain, under the default dimension cap.
    pub fn register(&self) -> Result<MixedRadixRegister> {
        self.register_with_cap(DEFAULT_MAX_DIM)
    }

    /// The register describing this chain, under an explicit cap.
    pub fn register_with_cap(&self, max_dim: usize) -> Result<MixedRadixRegister> {
        self.validate()?;
        MixedRadixRegister::with_max_dim(&vec![self.sector.dim(); self.n_plaquettes], max_dim)
    }

    /// Number of nearest-neighbour bonds.
    pub fn n_bonds(&self) -> usize {
        self.n_plaquettes.saturating_sub(1)
    }
}

// --- static term tables ----------------------------------------------------

/// Spin-1/2 plaquette flip, rows/cols over the 4 bubble levels.
const U_HALF: [[f64; 4]; 4] = [
    [0.0, -1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, -1.0],
    [1.0, 0.0, -1.0, 0.0],
];
/// Overall normalization of [`U_HALF`].
const U_HALF_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Spin-1 plaquette flip: level 1 couples to 0 and 2, level 6 to 5 and 7
/// (with opposite sign), all other levels are magnetically inert.
const U_ONE_ENTRIES: [(usize, usize, f64); 4] =
    [(1, 0, 1.0), (1, 2, 1.0), (6, 5, -1.0), (6, 7, -1.0)];

/// Bulk electric weights, units of `g∥²/2`.
const BULK_HALF: [f64; 4] = [0.75, 0.75, 2.75, 2.75];
const BULK_ONE: [f64; 8] = [0.0, 1.5, 4.0, 1.5, 1.5, 2.0, 1.5, 2.0];

/// Extra boundary-rung weights on the first and last plaquette, units of
/// `g⊥²/2`.
const BOUNDARY_HALF: [f64; 4] = [0.75, 0.0, 0.75, 2.0];
const BOUNDARY_ONE: [f64; 8] = [0.0, 0.75, 2.0, 0.75, 0.75, 0.0, 0.75, 2.0];

/// Spin-1/2 shared-rung diagonal `(l, r, weight)`, units of `g⊥²/2`.
const PAIR_DIAG_HALF: [(u8, u8, f64); 12] = [
    (0, 1, 0.75),
    (1, 0, 0.75),
    (0, 3, 0.75),
    (3, 0, 0.75),
    (1, 2, 0.75),
    (2, 1, 0.75),
    (2, 3, 0.75),
    (3, 2, 0.75),
    (0, 2, 2.0),
    (2, 0, 2.0),
    (1, 3, 2.0),
    (3, 1, 2.0),
];

/// Spin-1 shared-rung diagonal, original form, units of `g⊥²/2`.
const PAIR_DIAG_ONE: [(u8, u8, f64); 28] = [
    // weight 3/4: one unit of flux through the shared rung
    (0, 1, 0.75),
    (0, 3, 0.75),
    (1, 0, 0.75),
    (1, 2, 0.75),
    (2, 1, 0.75),
    (2, 3, 0.75),
    (4, 0, 0.75),
    (4, 2, 0.75),
    (3, 5, 0.75),
    (3, 7, 0.75),
    (5, 4, 0.75),
    (5, 6, 0.75),
    (6, 5, 0.75),
    (6, 7, 0.75),
    (7, 4, 0.75),
    (7, 6, 0.75),
    // weight 2: two units of flux through the shared rung
    (0, 2, 2.0),
    (2, 0, 2.0),
    (5, 7, 2.0),
    (7, 5, 2.0),
    // weight 1: the four flip-connected pairs and their partners
    (1, 1, 1.0),
    (1, 3, 1.0),
    (4, 1, 1.0),
    (4, 3, 1.0),
    (3, 4, 1.0),
    (3, 6, 1.0),
    (6, 4, 1.0),
    (6, 6, 1.0),
];

/// Spin-1 shared-rung diagonal, simplified form, units of `g⊥²/2`.
///
/// Equal to the original minus `3/4` on every gauge-consistent pair; the
/// subtraction turns the 16 weight-3/4 entries into structural zeros.
const PAIR_DIAG_ONE_SIMPLIFIED: [(u8, u8, f64); 16] = [
    (0, 0, -0.75),
    (2, 2, -0.75),
    (5, 5, -0.75),
    (7, 7, -0.75),
    (0, 2, 1.25),
    (2, 0, 1.25),
    (5, 7, 1.25),
    (7, 5, 1.25),
    (1, 1, 0.25),
    (1, 3, 0.25),
    (4, 1, 0.25),
    (4, 3, 0.25),
    (3, 4, 0.25),
    (3, 6, 0.25),
    (6, 4, 0.25),
    (6, 6, 0.25),
];

/// Spin-1 shared-rung flips `((l, r), (l', r'))`, each entering as
/// `|l r⟩⟨l' r'| + h.c.` with unit weight in `g⊥²/2`.
///
/// The two members of every flip carry the same rung flux, so these are the
/// only gauge-consistent off-diagonal matrix elements of the pair term.
const PAIR_FLIPS_ONE: [((u8, u8), (u8, u8)); 4] = [
    ((1, 1), (3, 4)),
    ((1, 3), (3, 6)),
    ((4, 1), (6, 4)),
    ((4, 3), (6, 6)),
];

// --- term builders ----------------------------------------------------------

/// The plaquette-flip matrix `U` at unit coupling (the Hamiltonian term is
/// `-x·U` on every site). Real symmetric.
pub fn plaquette_op(sector: Sector) -> DMatrix<f64> {
    match sector {
        Sector::Half => DMatrix::from_fn(4, 4, |i, j| U_HALF_SCALE * U_HALF[i][j]),
        Sector::One => {
            let mut u = DMatrix::zeros(8, 8);
            for &(i, j, v) in &U_ONE_ENTRIES {
                u[(i, j)] = v;
                u[(j, i)] = v;
            }
            u
        }
    }
}

/// Diagonal electric weights of one site, couplings included.
///
/// Bulk weights scale with `g∥²/2` on every site; the first and last site
/// additionally carry the boundary-rung weights scaled with `g⊥²/2`.
pub fn local_electric_diag(params: &ModelParams, site: usize) -> Result<DVector<f64>> {
    params.validate()?;
    if site >= params.n_plaquettes {
        return Err(Error::IndexError {
            index: site,
            limit: params.n_plaquettes,
        });
    }
    let is_boundary = site == 0 || site + 1 == params.n_plaquettes;
    let (bulk, boundary): (&[f64], &[f64]) = match params.sector {
        Sector::Half => (&BULK_HALF, &BOUNDARY_HALF),
        Sector::One => (&BULK_ONE, &BOUNDARY_ONE),
    };
    Ok(DVector::from_fn(params.sector.dim(), |lvl, _| {
        let mut w = 0.5 * params.g_par2 * bulk[lvl];
        if is_boundary {
            w += 0.5 * params.g_perp2 * boundary[lvl];
        }
        w
    }))
}

/// The shared-rung (pair) electric term for one bond.
#[derive(Debug, Clone)]
pub struct PairTerm {
    /// Dense `d²×d²` matrix, couplings included, rows ordered `l·d + r`.
    pub matrix: DMatrix<f64>,
    /// Constant subtracted from the original form, in energy units per bond.
    /// Zero for [`PairForm::Original`]; adding `offset · 1` back on the
    /// physical subspace recovers the original term exactly.
    pub offset: f64,
    /// Structural nonzeros `(row, col, value)` for sparse assembly.
    nonzeros: Vec<(usize, usize, f64)>,
}

impl PairTerm {
    /// Structural nonzeros `(row, col, value)` of [`matrix`](Self::matrix).
    pub fn nonzeros(&self) -> &[(usize, usize, f64)] {
        &self.nonzeros
    }
}

/// Builds the pair term for the given sector and form.
///
/// The spin-1/2 pair term is already purely diagonal, so no simplified form
/// exists there and requesting one is an [`Error::UnsupportedOption`].
pub fn pair_electric(params: &ModelParams, form: PairForm) -> Result<PairTerm> {
    params.validate()?;
    let d = params.sector.dim();
    let half_gperp = 0.5 * params.g_perp2;
    let mut matrix = DMatrix::zeros(d * d, d * d);
    let mut offset = 0.0;

    match (params.sector, form) {
        (Sector::Half, PairForm::Original) => {
            for &(l, r, w) in &PAIR_DIAG_HALF {
                let k = l as usize * d + r as usize;
                matrix[(k, k)] = half_gperp * w;
            }
        }
        (Sector::Half, PairForm::Simplified) => {
            return Err(Error::UnsupportedOption(
                "no simplified pair form in the spin-1/2 sector (already diagonal)".into(),
            ));
        }
        (Sector::One, form) => {
            let diag: &[(u8, u8, f64)] = match form {
                PairForm::Original => &PAIR_DIAG_ONE,
                PairForm::Simplified => {
                    offset = 0.75 * half_gperp;
                    &PAIR_DIAG_ONE_SIMPLIFIED
                }
            };
            for &(l, r, w) in diag {
                let k = l as usize * d + r as usize;
                matrix[(k, k)] = half_gperp * w;
            }
            for &((l, r), (lp, rp)) in &PAIR_FLIPS_ONE {
                let a = l as usize * d + r as usize;
                let b = lp as usize * d + rp as usize;
                matrix[(a, b)] = half_gperp;
                matrix[(b, a)] = half_gperp;
            }
        }
    }

    let mut nonzeros = Vec::new();
    for row in 0..d * d {
        for col in 0..d * d {
            let v = matrix[(row, col)];
            if v != 0.0 {
                nonzeros.push((row, col, v));
            }
        }
    }
    Ok(PairTerm {
        matrix,
        offset,
        nonzeros,
    })
}

// --- assembled Hamiltonian ---------------------------------------------------

/// All term matrices for one parameter set, ready for assembly or evolution.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    params: ModelParams,
    form: PairForm,
    reg: MixedRadixRegister,
    /// `-x · U`, the per-site kinetic term.
    plaquette: DMatrix<f64>,
    /// Per-site electric diagonals, couplings included.
    locals: Vec<DVector<f64>>,
    pair: PairTerm,
}

impl HamiltonianTerms {
    /// Builds every term under the default dimension cap.
    pub fn new(params: &ModelParams, form: PairForm) -> Result<Self> {
        Self::with_cap(params, form, DEFAULT_MAX_DIM)
    }

    /// Builds every term under an explicit dimension cap.
    pub fn with_cap(params: &ModelParams, form: PairForm, max_dim: usize) -> Result<Self> {
        let reg = params.register_with_cap(max_dim)?;
        let plaquette = plaquette_op(params.sector) * (-params.x);
        let locals = (0..params.n_plaquettes)
            .map(|s| local_electric_diag(params, s))
            .collect::<Result<Vec<_>>>()?;
        let pair = pair_electric(params, form)?;
        Ok(Self {
            params: params.clone(),
            form,
            reg,
            plaquette,
            locals,
            pair,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pair_form(&self) -> PairForm {
        self.form
    }

    pub fn register(&self) -> &MixedRadixRegister {
        &self.reg
    }

    /// The per-site kinetic matrix `-x·U`.
    pub fn plaquette_term(&self) -> &DMatrix<f64> {
        &self.plaquette
    }

    /// The electric diagonal of one site.
    pub fn local_term(&self, site: usize) -> Result<&DVector<f64>> {
        self.locals.get(site).ok_or(Error::IndexError {
            index: site,
            limit: self.locals.len(),
        })
    }

    /// The shared-rung term (identical on every bond).
    pub fn pair_term(&self) -> &PairTerm {
        &self.pair
    }

    /// Total constant subtracted relative to the original form, summed over
    /// bonds. Zero for [`PairForm::Original`].
    pub fn total_offset(&self) -> f64 {
        self.pair.offset * self.params.n_bonds() as f64
    }

    /// Full electric + kinetic diagonal of the assembled matrix.
    pub fn diagonal(&self) -> Result<DVector<f64>> {
        let dim = self.reg.dim();
        let d = self.params.sector.dim();
        let mut diag = DVector::zeros(dim);
        for idx in 0..dim {
            let digits = self.reg.decode(idx)?;
            let mut e = 0.0;
            for (s, &a) in digits.iter().enumerate() {
                e += self.locals[s][a as usize];
            }
            for b in 0..self.params.n_bonds() {
                let k = digits[b] as usize * d + digits[b + 1] as usize;
                e += self.pair.matrix[(k, k)];
            }
            // The kinetic term -x·U has zero diagonal in both sectors, but
            // keep the general contraction so the assembly stays honest.
            for (s, &a) in digits.iter().enumerate() {
                let _ = s;
                e += self.plaquette[(a as usize, a as usize)];
            }
            diag[idx] = e;
        }
        Ok(diag)
    }

    /// Assembles the dense Hamiltonian. Real symmetric by construction.
    pub fn assemble(&self) -> Result<DMatrix<f64>> {
        let dim = self.reg.dim();
        let d = self.params.sector.dim();
        let mut h = DMatrix::zeros(dim, dim);

        let diag = self.diagonal()?;
        for idx in 0..dim {
            h[(idx, idx)] = diag[idx];
        }

        // Kinetic off-diagonals: one site changes level.
        for col in 0..dim {
            for site in 0..self.params.n_plaquettes {
                let stride = self.reg.stride(site)?;
                let from = (col / stride) % d;
                let base = col - from * stride;
                for to in 0..d {
                    if to == from {
                        continue;
                    }
                    let v = self.plaquette[(to, from)];
                    if v != 0.0 {
                        h[(base + to * stride, col)] += v;
                    }
                }
            }
        }

        // Pair off-diagonals: both digits of a bond change together.
        for col in 0..dim {
            let digits = self.reg.decode(col)?;
            for b in 0..self.params.n_bonds() {
                let sl = self.reg.stride(b)?;
                let sr = self.reg.stride(b + 1)?;
                let k_col = digits[b] as usize * d + digits[b + 1] as usize;
                let base = col - digits[b] as usize * sl - digits[b + 1] as usize * sr;
                for &(row_k, col_k, v) in self.pair.nonzeros() {
                    if col_k != k_col || row_k == col_k {
                        continue;
                    }
                    let (lp, rp) = (row_k / d, row_k % d);
                    h[(base + lp * sl + rp * sr, col)] += v;
                }
            }
        }
        Ok(h)
    }
}

/// Convenience: build and assemble in one call.
pub fn assemble_hamiltonian(params: &ModelParams, form: PairForm) -> Result<DMatrix<f64>> {
    HamiltonianTerms::new(params, form)?.assemble()
}

/// Electric energy of a basis configuration (original pair form).
///
/// This is the exact `H` expectation value of the basis state: the kinetic
/// term is purely off-diagonal, so only local, boundary and shared-rung
/// diagonals contribute.
pub fn diagonal_config_energy(params: &ModelParams, digits: &[u8]) -> Result<f64> {
    params.validate()?;
    let d = params.sector.dim();
    if digits.len() != params.n_plaquettes {
        return Err(Error::InvalidBasisState {
            reason: format!(
                "expected {} digits, got {}",
                params.n_plaquettes,
                digits.len()
            ),
        });
    }
    if let Some(&bad) = digits.iter().find(|&&a| a as usize >= d) {
        return Err(Error::InvalidBasisState {
            reason: format!("digit {bad} exceeds sector dimension {d}"),
        });
    }
    let pair = pair_electric(params, PairForm::Original)?;
    let mut e = 0.0;
    for (s, &a) in digits.iter().enumerate() {
        e += local_electric_diag(params, s)?[a as usize];
    }
    for b in 0..params.n_bonds() {
        let k = digits[b] as usize * d + digits[b + 1] as usize;
        e += pair.matrix[(k, k)];
    }
    Ok(e)
}

// --- physical subspace -------------------------------------------------------

/// The set of basis states dynamically reachable from canonical seeds, and
/// the neighbour-pair combinations they realize.
///
/// Two superselection structures shape this set in the spin-1 sector:
///
/// 1. Gauge consistency: the flux through a shared rung must match between
///    neighbours, which restricts each neighbour pair to 32 of the 64
///    combinations.
/// 2. Boundary-digit classes: no term moves the first digit between
///    `{0,1,2,3}` and `{4,5,6,7}`, nor the last digit between `{0,1,2,4}`
///    and `{3,5,6,7}`. The reachable set therefore splits into four
///    dynamical components; realizing all 32 pair combinations requires one
///    seed per component.
///
/// In the spin-1/2 sector every combination is reachable from the vacuum.
#[derive(Debug, Clone)]
pub struct PhysicalSubspace {
    reg: MixedRadixRegister,
    indices: Vec<usize>,
    mask: Vec<bool>,
    pair_set: BTreeSet<(u8, u8)>,
}

impl PhysicalSubspace {
    /// Closure of the given seed configurations under all structural
    /// off-diagonal moves of the Hamiltonian (kinetic flips and, in the
    /// spin-1 sector, shared-rung flips). Coupling values do not matter:
    /// reachability is decided by which matrix elements are structurally
    /// nonzero.
    pub fn from_seeds(params: &ModelParams, seeds: &[BasisState]) -> Result<Self> {
        let reg = params.register()?;
        let d = params.sector.dim();
        let u = plaquette_op(params.sector);
        let pair = pair_electric(params, PairForm::Original)?;

        // Single-site moves: level a -> level b where U[b][a] != 0.
        let mut site_moves: Vec<Vec<u8>> = vec![Vec::new(); d];
        for a in 0..d {
            for b in 0..d {
                if a != b && u[(b, a)] != 0.0 {
                    site_moves[a].push(b as u8);
                }
            }
        }
        // Bond moves: (l, r) -> (l', r') for off-diagonal pair entries.
        let mut bond_moves: Vec<Vec<(u8, u8)>> = vec![Vec::new(); d * d];
        for &(row, col, _v) in pair.nonzeros() {
            if row != col {
                bond_moves[col].push(((row / d) as u8, (row % d) as u8));
            }
        }

        let mut mask = vec![false; reg.dim()];
        let mut queue: Vec<usize> = Vec::new();
        for seed in seeds {
            let idx = reg.encode(seed)?;
            if !mask[idx] {
                mask[idx] = true;
                queue.push(idx);
            }
        }
        while let Some(idx) = queue.pop() {
            let digits = reg.decode(idx)?;
            for (s, &a) in digits.iter().enumerate() {
                let stride = reg.stride(s)?;
                for &b in &site_moves[a as usize] {
                    let nidx = idx + (b as usize) * stride - (a as usize) * stride;
                    if !mask[nidx] {
                        mask[nidx] = true;
                        queue.push(nidx);
                    }
                }
            }
            for b in 0..params.n_bonds() {
                let k = digits[b] as usize * d + digits[b + 1] as usize;
                let sl = reg.stride(b)?;
                let sr = reg.stride(b + 1)?;
                for &(lp, rp) in &bond_moves[k] {
                    let nidx = idx + (lp as usize) * sl + (rp as usize) * sr
                        - (digits[b] as usize) * sl
                        - (digits[b + 1] as usize) * sr;
                    if !mask[nidx] {
                        mask[nidx] = true;
                        queue.push(nidx);
                    }
                }
            }
        }

        let indices: Vec<usize> = (0..reg.dim()).filter(|&i| mask[i]).collect();
        let mut pair_set = BTreeSet::new();
        for &idx in &indices {
            let digits = reg.decode(idx)?;
            for b in 0..params.n_bonds() {
                pair_set.insert((digits[b], digits[b + 1]));
            }
        }
        Ok(Self {
            reg,
            indices,
            mask,
            pair_set,
        })
    }

    /// The canonical physical subspace: union of the closures of one seed
    /// per boundary-class component. For the spin-1 sector these are
    /// `|0...0⟩`, `|5...5⟩`, `|0...03⟩` and `|40...0⟩`; for spin-1/2 the
    /// vacuum alone reaches everything.
    pub fn canonical(params: &ModelParams) -> Result<Self> {
        let n = params.n_plaquettes;
        let seeds: Vec<BasisState> = match params.sector {
            Sector::Half => vec![vec![0; n]],
            Sector::One => {
                let mut right_charge = vec![0u8; n];
                right_charge[n - 1] = 3;
                let mut left_charge = vec![0u8; n];
                left_charge[0] = 4;
                vec![vec![0; n], vec![5; n], right_charge, left_charge]
            }
        };
        Self::from_seeds(params, &seeds)
    }

    pub fn register(&self) -> &MixedRadixRegister {
        &self.reg
    }

    /// Member indices, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of member basis states.
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Whether a flat index belongs to the subspace.
    pub fn contains(&self, index: usize) -> bool {
        self.mask.get(index).copied().unwrap_or(false)
    }

    /// Every neighbour-pair digit combination realized by a member.
    pub fn pair_set(&self) -> &BTreeSet<(u8, u8)> {
        &self.pair_set
    }

    /// Probability weight a state carries outside the subspace.
    pub fn weight_outside(&self, state: &StateVector) -> f64 {
        state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.contains(*i))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Zeroes all amplitudes outside the subspace; returns the weight kept.
    pub fn project(&self, state: &mut StateVector) -> f64 {
        let mut kept = 0.0;
        for (i, a) in state.amplitudes_mut().iter_mut().enumerate() {
            if self.mask[i] {
                kept += a.norm_sqr();
            } else {
                *a = num_complex::Complex64::ZERO;
            }
        }
        kept
    }
}

// --- reflection symmetry ------------------------------------------------------

/// Derives the digit relabeling `ρ` for which site reversal composed with
/// `ρ` on every site commutes with the Hamiltonian.
///
/// Candidates must preserve the bulk and boundary diagonal weights (those
/// are symmetric between the two ends), map the shared-rung diagonal as
/// `V(l,r) = V(ρr, ρl)`, map the flip set onto itself and leave the
/// plaquette flip invariant. The survivor is required to be unique.
///
/// Spin-1/2: the identity. Spin-1: the transposition 3 ↔ 4 (the two
/// broken-string end-caps trade places under reflection).
pub fn derive_reflection(sector: Sector) -> Result<Vec<u8>> {
    let d = sector.dim();
    let probe = ModelParams {
        x: 1.0,
        g_par2: 1.0,
        g_perp2: 1.0,
        n_plaquettes: 2,
        sector,
    };
    let (bulk, boundary): (&[f64], &[f64]) = match sector {
        Sector::Half => (&BULK_HALF, &BOUNDARY_HALF),
        Sector::One => (&BULK_ONE, &BOUNDARY_ONE),
    };
    let u = plaquette_op(sector);
    let pair = pair_electric(&probe, PairForm::Original)?;

    let mut survivors: Vec<Vec<u8>> = Vec::new();
    let mut perm: Vec<u8> = (0..d as u8).collect();
    loop {
        let ok = (0..d).all(|a| {
            let pa = perm[a] as usize;
            bulk[a] == bulk[pa] && boundary[a] == boundary[pa]
        }) && check_pair_reflection(d, &pair.matrix, &perm)
            && check_flip_invariance(d, &u, &perm);
        if ok {
            survivors.push(perm.clone());
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }

    match survivors.len() {
        1 => Ok(survivors.pop().expect("length checked")),
        0 => Err(Error::IdentificationError(
            "no digit relabeling makes reflection a symmetry".into(),
        )),
        n => Err(Error::IdentificationError(format!(
            "reflection relabeling ambiguous: {n} candidates"
        ))),
    }
}

/// `V(l,r) == V(ρr, ρl)` entrywise (diagonal and flips together).
fn check_pair_reflection(d: usize, pair: &DMatrix<f64>, perm: &[u8]) -> bool {
    for l in 0..d {
        for r in 0..d {
            for lp in 0..d {
                for rp in 0..d {
                    let lhs = pair[(l * d + r, lp * d + rp)];
                    let rhs = pair[(
                        perm[r] as usize * d + perm[l] as usize,
                        perm[rp] as usize * d + perm[lp] as usize,
                    )];
                    if (lhs - rhs).abs() > 1e-12 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// `ρ U ρᵀ == U` entrywise.
fn check_flip_invariance(d: usize, u: &DMatrix<f64>, perm: &[u8]) -> bool {
    for a in 0..d {
        for b in 0..d {
            if (u[(perm[a] as usize, perm[b] as usize)] - u[(a, b)]).abs() > 1e-12 {
                return false;
            }
        }
    }
    true
}

/// Lexicographic next permutation; false once the last one is reached.
fn next_permutation(perm: &mut [u8]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Image of a flat index under reflection (site reversal + relabeling).
pub fn reflect_index(reg: &MixedRadixRegister, rho: &[u8], index: usize) -> Result<usize> {
    let digits = reg.decode(index)?;
    let reflected: Vec<u8> = digits.iter().rev().map(|&a| rho[a as usize]).collect();
    reg.encode(&reflected)
}

/// Applies the reflection operator to a state (a permutation, hence unitary).
pub fn reflect_state(state: &StateVector, rho: &[u8]) -> Result<StateVector> {
    let reg = state.register();
    let mut amps = vec![num_complex::Complex64::ZERO; reg.dim()];
    for (idx, &a) in state.amplitudes().iter().enumerate() {
        amps[reflect_index(reg, rho, idx)?] = a;
    }
    StateVector::from_amplitudes(reg, amps)
}

// --- string-state identification ----------------------------------------------

/// Distinguished basis configurations of the string-breaking problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringStates {
    /// The unbroken flux string `|g g ... g⟩`.
    pub string: BasisState,
    /// The broken string: a static charge pair at the two ends with vacuum
    /// between. Absent in the spin-1/2 sector (no charge levels there).
    pub broken: Option<BasisState>,
    /// The left-dressed two-body state and its reflection image. These are
    /// the configurations that hybridize with the string at resonance.
    /// Absent in the spin-1/2 sector and for chains of fewer than 3 sites.
    pub dressed: Option<(BasisState, BasisState)>,
}

/// Generic coupling probes for energy-based identification. Two distinct
/// probes are used so that an accidental degeneracy at one coupling ratio
/// cannot produce a false identification. Both keep `g⊥² < g∥²`: in the
/// opposite regime the rung penalty makes string-deformation states cheaper
/// than charge-pair creation and the energy ordering no longer singles out
/// the broken string.
const PROBES: [(f64, f64); 2] = [(1.37, 0.61), (2.19, 0.83)];

/// Identifies the string, broken-string and dressed-pair configurations.
///
/// * The string digit is the unique level with zero boundary weight and a
///   positive bulk electric weight: flux runs along the ladder without
///   touching the boundary rungs.
/// * The broken string minimizes the electric energy over the dynamical
///   closure of the string (excluding the string itself) at both probe
///   couplings; degeneracy outside the closure (charge pairs at other
///   separations) makes a full-basis scan ambiguous, the closure scan is
///   not.
/// * The dressed pair is the string with one end-cap inserted:
///   `|4 3 5 ... 5⟩` and its reflection image. It is identified
///   structurally — an energy rule would be coupling-dependent, since the
///   dressed pair is degenerate with the string exactly at resonance.
pub fn identify_string_states(params: &ModelParams) -> Result<StringStates> {
    params.validate()?;
    let n = params.n_plaquettes;
    let d = params.sector.dim();
    let (bulk, boundary): (&[f64], &[f64]) = match params.sector {
        Sector::Half => (&BULK_HALF, &BOUNDARY_HALF),
        Sector::One => (&BULK_ONE, &BOUNDARY_ONE),
    };

    let string_digits: Vec<u8> = (0..d as u8)
        .filter(|&g| boundary[g as usize] == 0.0 && bulk[g as usize] > 0.0)
        .collect();
    let &string_digit = match string_digits.as_slice() {
        [g] => g,
        _ => {
            return Err(Error::IdentificationError(format!(
                "string level not unique: {} candidates",
                string_digits.len()
            )))
        }
    };
    let string = vec![string_digit; n];

    if params.sector == Sector::Half {
        return Ok(StringStates {
            string,
            broken: None,
            dressed: None,
        });
    }

    // Broken string: minimize electric energy over closure(string) \ {string}
    // at both probes and demand agreement + uniqueness.
    let closure = PhysicalSubspace::from_seeds(params, std::slice::from_ref(&string))?;
    let reg = closure.register();
    let string_idx = reg.encode(&string)?;
    let mut winner: Option<usize> = None;
    for &(g_par2, g_perp2) in &PROBES {
        let probe = ModelParams {
            g_par2,
            g_perp2,
            ..params.clone()
        };
        let mut best: Option<(f64, usize)> = None;
        let mut runner_up = f64::INFINITY;
        for &idx in closure.indices() {
            if idx == string_idx {
                continue;
            }
            let e = diagonal_config_energy(&probe, &reg.decode(idx)?)?;
            match best {
                Some((eb, _)) if e >= eb => runner_up = runner_up.min(e),
                _ => {
                    if let Some((eb, _)) = best {
                        runner_up = eb;
                    }
                    best = Some((e, idx));
                }
            }
        }
        let (e_best, idx_best) =
            best.ok_or_else(|| Error::IdentificationError("empty closure".into()))?;
        if runner_up - e_best < 1e-9 {
            return Err(Error::IdentificationError(format!(
                "broken string degenerate at probe ({g_par2}, {g_perp2})"
            )));
        }
        match winner {
            None => winner = Some(idx_best),
            Some(w) if w != idx_best => {
                return Err(Error::IdentificationError(
                    "probes disagree on the broken-string state".into(),
                ))
            }
            _ => {}
        }
    }
    let broken = reg.decode(winner.expect("two probes ran"))?;

    let dressed = if n >= 3 {
        let mut left = vec![string_digit; n];
        left[0] = 4;
        left[1] = 3;
        let rho = derive_reflection(params.sector)?;
        let right = reg.decode(reflect_index(reg, &rho, reg.encode(&left)?)?)?;
        Some((left, right))
    } else {
        None
    };

    Ok(StringStates {
        string,
        broken: Some(broken),
        dressed,
    })
}

/// Coupling ratio `g⊥²/g∥²` at which the string and the broken string are
/// exactly degenerate.
///
/// Both energies are linear in the couplings — `E_S = N·g∥²` carries no
/// rung contribution at all, `E_B = a·g∥² + b·g⊥²` — so the crossing ratio
/// is `(N − a)/b`. The coefficients are read off the energy function itself
/// rather than hardcoded: for `N ≥ 3` this reproduces `(2/3)·N − 1`, while
/// at `N = 2` the two end-caps are adjacent (no vacuum between them), the
/// shared rung carries different flux, and the ratio becomes `2/5`.
pub fn resonance_ratio(n_plaquettes: usize) -> Result<f64> {
    if n_plaquettes < 2 {
        return Err(Error::NoResonance { n_plaquettes });
    }
    let mut broken = vec![0u8; n_plaquettes];
    broken[0] = 4;
    broken[n_plaquettes - 1] = 3;
    let probe = |g_par2: f64, g_perp2: f64| ModelParams {
        x: 0.0,
        g_par2,
        g_perp2,
        n_plaquettes,
        sector: Sector::One,
    };
    // E_B = a·g∥² + b·g⊥²; two unit probes extract the coefficients.
    let a = diagonal_config_energy(&probe(1.0, 0.0), &broken)?;
    let b = diagonal_config_energy(&probe(0.0, 1.0), &broken)?;
    let string_tension = diagonal_config_energy(&probe(1.0, 0.0), &vec![5; n_plaquettes])?;
    if b <= 0.0 {
        return Err(Error::NoResonance { n_plaquettes });
    }
    Ok((string_tension - a) / b)
}

// --- text dumps -----------------------------------------------------------------

/// Row-major text dump of a real matrix: entries `re,im` (imaginary part
/// zero), space-separated, one row per line.
pub fn dump_matrix(mat: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in 0..mat.nrows() {
        for col in 0..mat.ncols() {
            if col > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:?},{:?}", mat[(row, col)], 0.0);
        }
        out.push('\n');
    }
    out
}

/// Row-major text dump of a complex matrix: entries `re,im`, space-separated.
pub fn dump_matrix_complex(mat: &DMatrix<num_complex::Complex64>) -> String {
    let mut out = String::new();
    for row in 0..mat.nrows() {
        for col in 0..mat.ncols() {
            if col > 0 {
                out.push(' ');
            }
            let v = mat[(row, col)];
            let _ = write!(out, "{:?},{:?}", v.re, v.im);
        }
        out.push('\n');
    }
    out
}
