//! Lowering of Trotter steps onto a trapped-ion-style native gate set.
//!
//! The product formulas in [`crate::evolve`] are made of full `d×d` and
//! `d²×d²` exponentials.  Hardware offers less: arbitrary *local* qudit
//! unitaries (cheap, error rates an order of magnitude below entangling
//! operations) and two-qudit Mølmer–Sørensen interactions that address one
//! two-level subspace on each ion,
//!
//! ```text
//! MS_XX(θ) = exp(−i θ/2 · X⁽ⁱʲ⁾ ⊗ X⁽ᵏˡ⁾),      X⁽ⁱʲ⁾ = |i⟩⟨j| + |j⟩⟨i|,
//! MS_ZZ(θ) = exp(−i θ/2 · Z⁽ⁱʲ⁾ ⊗ Z⁽ᵏˡ⁾),      Z⁽ⁱʲ⁾ = |i⟩⟨i| − |j⟩⟨j|,
//! ```
//!
//! with all other levels spectators.  Both generators square to projectors,
//! so the gates are 4π-periodic in θ, and a single hardware pulse is limited
//! to a maximum excursion (π/2 here by default); [`reduce_angle`] folds a
//! requested angle into `(−2π, 2π]` and reports how many pulses it costs.
//!
//! # What a symmetric step lowers to
//!
//! * **Plaquette-flip half-steps** act on one site each — local gates.
//! * **Single-link electric half-steps** are diagonal — local phase gates.
//! * **Shared-rung pair terms** need entangling gates, split per bond into
//!   hopping (off-diagonal) and diagonal pieces, which commute because the
//!   hopping only connects configurations of equal pair energy:
//!   - each two-digit hop `|l r⟩ ↔ |l' r'⟩` is generated by the even half
//!     `(XX − YY)/2` of an MS pair.  When the odd partners `|l r'⟩, |l' r⟩`
//!     are unphysical (they violate the flux-matching rule between
//!     neighbouring plaquettes), a *single* `MS_XX` at twice the angle acts
//!     identically on every physical state and the `YY` correction is
//!     elided; otherwise the exact `XX`/conjugated-`XX` pair is emitted.
//!   - the diagonal piece is synthesized from `MS_ZZ` phase patterns plus
//!     local phases ([`synthesize_diagonal`]), again only constrained on
//!     physically reachable digit pairs.
//!
//! Gate order mirrors [`crate::evolve::evolve_trotter`] exactly, so a
//! compiled circuit reproduces the Trotter state on the physical subspace to
//! rounding accuracy — including the global phase.
//!
//! # Accounting
//!
//! [`GateCountReport`] tallies gates and pulses (angles folded modulo 4π
//! first, which makes deep circuits *cheaper* at late times — see
//! [`entangling_count_vs_time`]).  [`qubit_embedding_estimate`] tabulates the
//! CNOT cost of the same step on a binary-encoded qubit register for
//! comparison.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Error;
use crate::evolve::{symmetric_exp, TrotterPlan};
use crate::model::{
    dump_matrix_complex, HamiltonianTerms, ModelParams, PairTerm, PhysicalSubspace, Sector,
};
use crate::qudit::StateVector;
use crate::Result;

/// Angles below this are treated as "no gate".
const ANGLE_EPS: f64 = 1e-12;

/// Exactness demanded of the diagonal synthesis on its constraint set.
const SYNTHESIS_TOL: f64 = 1e-10;

// --- options ---------------------------------------------------------------------

/// Knobs for [`compile_trotter_circuit`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompileOptions {
    /// Largest angle a single entangling pulse may carry; larger reduced
    /// angles are split into `⌈|θ|/max_angle⌉` pulses when counting.
    pub max_angle: f64,
    /// Constrain lowering only on physically reachable digit pairs.  This
    /// elides the odd-partner `YY` correction of every hop and frees the
    /// diagonal synthesis from unreachable corners; the compiled circuit
    /// then agrees with the Trotter step *on the physical subspace only*.
    /// Disable to reproduce the pair exponential on the full tensor space.
    pub respect_physicality: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            max_angle: FRAC_PI_2,
            respect_physicality: true,
        }
    }
}

impl CompileOptions {
    pub fn validate(&self) -> Result<()> {
        if !self.max_angle.is_finite() || self.max_angle <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "max_angle must be positive and finite, got {}",
                self.max_angle
            )));
        }
        Ok(())
    }
}

// --- gate data model -------------------------------------------------------------

/// Which Mølmer–Sørensen flavour a two-qudit gate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MsKind {
    Xx,
    Zz,
}

impl MsKind {
    fn label(self) -> &'static str {
        match self {
            MsKind::Xx => "XX",
            MsKind::Zz => "ZZ",
        }
    }
}

/// One side of an MS gate: the addressed site and its two-level subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MsArm {
    pub site: usize,
    /// Addressed levels `(i, j)`, `i ≠ j`.
    pub levels: (u8, u8),
}

/// A native instruction.
#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    /// Arbitrary one-site unitary, stored once in the sequence's matrix
    /// table and referenced by index.
    Local { site: usize, matrix: usize },
    /// Two-site Mølmer–Sørensen gate `exp(−i·angle/2 · G_a ⊗ G_b)`.
    Ms {
        kind: MsKind,
        a: MsArm,
        b: MsArm,
        angle: f64,
    },
}

/// Which Hamiltonian term a gate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermId {
    /// Plaquette-flip half-step on one site.
    Plaquette { site: usize },
    /// Single-link electric half-step on one site.
    LocalElectric { site: usize },
    /// One hop of the shared-rung term on a bond; `index` enumerates the
    /// hops of that bond.
    PairFlip { bond: usize, index: usize },
    /// One `MS_ZZ` dyad of the synthesized shared-rung diagonal.
    PairDiagonal { bond: usize, index: usize },
    /// Left/right local phase completing the shared-rung diagonal.
    PairDiagonalLocal { bond: usize, site: usize },
}

impl TermId {
    /// Coarse family name used in count breakdowns.
    pub fn family(&self) -> &'static str {
        match self {
            TermId::Plaquette { .. } => "plaquette",
            TermId::LocalElectric { .. } => "electric",
            TermId::PairFlip { .. } => "pair-flip",
            TermId::PairDiagonal { .. } => "pair-diagonal",
            TermId::PairDiagonalLocal { .. } => "pair-diagonal-local",
        }
    }
}

/// Where a gate came from: which step, which term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub step: usize,
    pub term: TermId,
}

/// A gate plus its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeGate {
    pub kind: GateKind,
    pub provenance: Provenance,
}

// --- angle folding ---------------------------------------------------------------

/// Folds an MS angle into `(−2π, 2π]` (the gates are 4π-periodic) and
/// returns `(reduced, pulses)` where `pulses = ⌈|reduced| / max_angle⌉`.
///
/// The representative of minimal magnitude is chosen; the boundary tie
/// `|θ| = 2π` resolves to `+2π`.  A zero angle costs zero pulses.
pub fn reduce_angle(theta: f64, max_angle: f64) -> Result<(f64, u64)> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gate angle must be finite, got {theta}"
        )));
    }
    if !max_angle.is_finite() || max_angle <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "max_angle must be positive and finite, got {max_angle}"
        )));
    }
    let period = 4.0 * PI;
    let mut reduced = theta.rem_euclid(period);
    if reduced > 2.0 * PI {
        reduced -= period;
    }
    let pulses = if reduced == 0.0 {
        0
    } else {
        (reduced.abs() / max_angle).ceil() as u64
    };
    Ok((reduced, pulses))
}

// --- diagonal synthesis ----------------------------------------------------------

/// One `MS_ZZ` dyad of a synthesized diagonal: contributes the phase
/// `half_angle · (δ_{l,i} − δ_{l,j})(δ_{r,k} − δ_{r,l'})` to digit pair
/// `(l, r)`; the MS angle is `2·half_angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesizedDyad {
    pub left_levels: (u8, u8),
    pub right_levels: (u8, u8),
    pub half_angle: f64,
}

/// Exact gate-level decomposition of a two-site diagonal phase profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSynthesis {
    /// Per-level phase on the left qudit (all zero when unused).
    pub left_phases: Vec<f64>,
    /// Per-level phase on the right qudit.
    pub right_phases: Vec<f64>,
    /// Level-independent phase, pulled out as a global phase.
    pub constant: f64,
    /// Entangling dyads, sorted by addressed levels.
    pub dyads: Vec<SynthesizedDyad>,
    /// Largest reconstruction error over the constraint set.
    pub max_residual: f64,
}

impl DiagonalSynthesis {
    /// Reconstructed phase at digit pair `(l, r)`.
    pub fn phase_at(&self, l: u8, r: u8) -> f64 {
        let mut phi = self.left_phases[l as usize] + self.right_phases[r as usize] + self.constant;
        for dyad in &self.dyads {
            phi +=
                dyad.half_angle * dyad_sign(dyad.left_levels, l) * dyad_sign(dyad.right_levels, r);
        }
        phi
    }

    fn has_left_local(&self) -> bool {
        self.left_phases.iter().any(|a| a.abs() > ANGLE_EPS)
    }

    fn has_right_local(&self) -> bool {
        self.right_phases.iter().any(|a| a.abs() > ANGLE_EPS)
    }
}

fn dyad_sign(levels: (u8, u8), digit: u8) -> f64 {
    if digit == levels.0 {
        1.0
    } else if digit == levels.1 {
        -1.0
    } else {
        0.0
    }
}

/// Most frequent value among `values` up to a 1e-12 cluster width; ties pick
/// the smallest value.  Used to peel a constant off a phase profile before
/// writing the rest with dyads.
fn dominant_value(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (0usize, 0.0f64);
    let mut start = 0;
    for i in 0..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[start] > 1e-12 {
            let count = i - start;
            if count > best.0 {
                best = (count, sorted[start]);
            }
            start = i;
        }
    }
    best.1
}

/// Writes a diagonal phase profile `φ(l, r)` as local phases, a constant and
/// `MS_ZZ` dyads, **exactly on the constraint set** and unconstrained
/// elsewhere.
///
/// Strategy: subtract the most common constrained value (a free constant),
/// then try the *twin-writer* pass — each remaining entry `(l, r)` is paired
/// with a partner entry `(j, l')` carrying the same value such that the two
/// corners `(l, l')`, `(j, r)` of the dyad rectangle fall outside the
/// constraint set.  One `MS_ZZ` then writes both entries and dumps its
/// unwanted corners on unreachable digit pairs.  On the flux-matched pair
/// sets this resolves every entry with one dyad per value pair.
///
/// When no clean rectangle exists (e.g. every digit pair is reachable, so
/// there is nowhere to hide a corner), the profile is instead solved in the
/// complete affine gauge `a_l + b_r + c` plus the difference-dyad basis
/// `(|0⟩⟨0|−|j⟩⟨j|) ⊗ (|0⟩⟨0|−|l⟩⟨l|)`, which spans every diagonal on the
/// full grid; the least-squares solution is checked to be exact.
pub fn synthesize_diagonal(
    phases: &DMatrix<f64>,
    constraint: &BTreeSet<(u8, u8)>,
) -> Result<DiagonalSynthesis> {
    let (d_left, d_right) = phases.shape();
    for &(l, r) in constraint {
        if l as usize >= d_left || r as usize >= d_right {
            return Err(Error::InvalidArgument(format!(
                "constraint entry ({l}, {r}) outside a {d_left}×{d_right} profile"
            )));
        }
    }
    let constrained: Vec<f64> = constraint
        .iter()
        .map(|&(l, r)| phases[(l as usize, r as usize)])
        .collect();
    let constant = dominant_value(&constrained);

    let mut residual: BTreeMap<(u8, u8), f64> = constraint
        .iter()
        .map(|&(l, r)| ((l, r), phases[(l as usize, r as usize)] - constant))
        .collect();

    let synthesis = match twin_writer_pass(&mut residual, constraint, d_left as u8, d_right as u8) {
        Some(dyads) => DiagonalSynthesis {
            left_phases: vec![0.0; d_left],
            right_phases: vec![0.0; d_right],
            constant,
            dyads,
            max_residual: 0.0,
        },
        None => affine_dyad_fit(phases, constraint, d_left, d_right)?,
    };

    let mut synthesis = synthesis;
    let mut worst = 0.0f64;
    for &(l, r) in constraint {
        let err = (synthesis.phase_at(l, r) - phases[(l as usize, r as usize)]).abs();
        worst = worst.max(err);
    }
    synthesis.max_residual = worst;
    if worst > SYNTHESIS_TOL {
        return Err(Error::LoweringError(format!(
            "diagonal synthesis missed the target by {worst:.3e} on the constraint set"
        )));
    }
    Ok(synthesis)
}

/// Dyad angles accumulated during synthesis, keyed by the canonical
/// (ascending) level pairs of the left and right site.
type DyadAngles = BTreeMap<((u8, u8), (u8, u8)), f64>;

/// Greedy exact pass described in [`synthesize_diagonal`].  Returns `None`
/// as soon as one entry admits no clean dyad rectangle.
fn twin_writer_pass(
    residual: &mut BTreeMap<(u8, u8), f64>,
    constraint: &BTreeSet<(u8, u8)>,
    d_left: u8,
    d_right: u8,
) -> Option<Vec<SynthesizedDyad>> {
    let mut accumulated: DyadAngles = BTreeMap::new();
    let entries: Vec<(u8, u8)> = residual.keys().copied().collect();
    for (l, r) in entries {
        let value = residual[&(l, r)];
        if value.abs() <= ANGLE_EPS {
            continue;
        }
        // A dyad on levels (l, j) ⊗ (r, l2) writes +t at (l, r) and at the
        // twin (j, l2), and −t at the corners (l, l2) and (j, r).
        let mut fallback: Option<(u8, u8)> = None;
        let mut paired: Option<(u8, u8)> = None;
        'candidates: for j in 0..d_left {
            if j == l {
                continue;
            }
            for l2 in 0..d_right {
                if l2 == r {
                    continue;
                }
                if constraint.contains(&(l, l2)) || constraint.contains(&(j, r)) {
                    continue;
                }
                if constraint.contains(&(j, l2)) {
                    if (residual[&(j, l2)] - value).abs() <= ANGLE_EPS {
                        paired = Some((j, l2));
                        break 'candidates;
                    }
                } else if fallback.is_none() {
                    fallback = Some((j, l2));
                }
            }
        }
        let (j, l2, twin_constrained) = match (paired, fallback) {
            (Some((j, l2)), _) => (j, l2, true),
            (None, Some((j, l2))) => (j, l2, false),
            (None, None) => return None,
        };
        // Canonicalize to ascending levels; each swap flips the written sign.
        let mut t = value;
        let left = if l < j {
            (l, j)
        } else {
            t = -t;
            (j, l)
        };
        let right = if r < l2 {
            (r, l2)
        } else {
            t = -t;
            (l2, r)
        };
        *accumulated.entry((left, right)).or_insert(0.0) += t;
        residual.insert((l, r), 0.0);
        if twin_constrained {
            residual.insert((j, l2), 0.0);
        }
    }
    Some(
        accumulated
            .into_iter()
            .filter(|&(_, t)| t.abs() > ANGLE_EPS)
            .map(
                |((left_levels, right_levels), half_angle)| SynthesizedDyad {
                    left_levels,
                    right_levels,
                    half_angle,
                },
            )
            .collect(),
    )
}

/// Fallback over the affine gauge plus the difference-dyad basis anchored
/// at level 0.  On a fully constrained grid the decomposition is closed
/// form: the affine part is the two-way mean decomposition, and the
/// remainder (zero row and column sums) is written directly by the dyads,
/// since `Σ t_{jk} (e₀−e_j)(e₀−e_k)ᵀ` hits entry `(j, k)`, `j,k ≥ 1`, with
/// coefficient one.  Partial constraint sets fall back to least squares.
fn affine_dyad_fit(
    phases: &DMatrix<f64>,
    constraint: &BTreeSet<(u8, u8)>,
    d_left: usize,
    d_right: usize,
) -> Result<DiagonalSynthesis> {
    if constraint.len() == d_left * d_right {
        let grand = phases.iter().sum::<f64>() / (d_left * d_right) as f64;
        let left_phases: Vec<f64> = (0..d_left)
            .map(|l| phases.row(l).sum() / d_right as f64 - grand)
            .collect();
        let right_phases: Vec<f64> = (0..d_right)
            .map(|r| phases.column(r).sum() / d_left as f64 - grand)
            .collect();
        let mut dyads = Vec::new();
        for j in 1..d_left {
            for k in 1..d_right {
                let t = phases[(j, k)] - left_phases[j] - right_phases[k] - grand;
                if t.abs() > ANGLE_EPS {
                    dyads.push(SynthesizedDyad {
                        left_levels: (0, j as u8),
                        right_levels: (0, k as u8),
                        half_angle: t,
                    });
                }
            }
        }
        return Ok(DiagonalSynthesis {
            left_phases,
            right_phases,
            constant: grand,
            dyads,
            max_residual: 0.0,
        });
    }
    let rows = constraint.len();
    let n_dyads = (d_left - 1) * (d_right - 1);
    let cols = d_left + d_right + 1 + n_dyads;
    let mut design = DMatrix::zeros(rows, cols);
    let mut rhs = DVector::zeros(rows);
    for (row, &(l, r)) in constraint.iter().enumerate() {
        design[(row, l as usize)] = 1.0;
        design[(row, d_left + r as usize)] = 1.0;
        design[(row, d_left + d_right)] = 1.0;
        for j in 1..d_left {
            for k in 1..d_right {
                let col = d_left + d_right + 1 + (j - 1) * (d_right - 1) + (k - 1);
                let sigma = dyad_sign((0, j as u8), l) * dyad_sign((0, k as u8), r);
                design[(row, col)] = sigma;
            }
        }
        rhs[row] = phases[(l as usize, r as usize)];
    }
    let svd = design.svd(true, true);
    let solution = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::LoweringError(format!("diagonal least squares failed: {e}")))?;

    let left_phases: Vec<f64> = (0..d_left).map(|l| solution[l]).collect();
    let right_phases: Vec<f64> = (0..d_right).map(|r| solution[d_left + r]).collect();
    let constant = solution[d_left + d_right];
    let mut dyads = Vec::new();
    for j in 1..d_left {
        for k in 1..d_right {
            let col = d_left + d_right + 1 + (j - 1) * (d_right - 1) + (k - 1);
            let t = solution[col];
            if t.abs() > ANGLE_EPS {
                dyads.push(SynthesizedDyad {
                    left_levels: (0, j as u8),
                    right_levels: (0, k as u8),
                    half_angle: t,
                });
            }
        }
    }
    Ok(DiagonalSynthesis {
        left_phases,
        right_phases,
        constant,
        dyads,
        max_residual: 0.0,
    })
}

// --- pair-term lowering ----------------------------------------------------------

/// One off-diagonal hop of the pair term, lowered to MS form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoweredFlip {
    /// Levels exchanged on the left site.
    pub left_levels: (u8, u8),
    /// Levels exchanged on the right site.
    pub right_levels: (u8, u8),
    /// Full elided MS angle, `2·w·dt`; the exact two-gate form uses half.
    pub theta: f64,
    /// Whether the single-`MS_XX` short cut is valid (both odd partners
    /// unreachable).
    pub elided: bool,
}

/// A bond's pair term as native-gate ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredPair {
    pub flips: Vec<LoweredFlip>,
    pub synthesis: DiagonalSynthesis,
}

/// Lowers one bond's shared-rung exponential `exp(−i·dt·V)` to MS
/// ingredients, constrained on `pair_set`.
pub fn lower_pair_term(
    term: &PairTerm,
    dt: f64,
    pair_set: &BTreeSet<(u8, u8)>,
) -> Result<LoweredPair> {
    let d2 = term.matrix.nrows();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(Error::ShapeError {
            expected: d * d,
            got_rows: d2,
            got_cols: term.matrix.ncols(),
        });
    }

    let mut flips = Vec::new();
    let mut seen = BTreeSet::new();
    for &(p, q, w) in term.nonzeros() {
        if p >= q || !seen.insert((p, q)) {
            continue;
        }
        let (l, r) = ((p / d) as u8, (p % d) as u8);
        let (l2, r2) = ((q / d) as u8, (q % d) as u8);
        if l == l2 || r == r2 {
            return Err(Error::LoweringError(format!(
                "hop |{l}{r}⟩↔|{l2}{r2}⟩ moves only one digit and has no MS form"
            )));
        }
        let theta = 2.0 * w * dt;
        if theta.abs() <= ANGLE_EPS {
            continue;
        }
        let elided = !pair_set.contains(&(l, r2)) && !pair_set.contains(&(l2, r));
        flips.push(LoweredFlip {
            left_levels: (l, l2),
            right_levels: (r, r2),
            theta,
            elided,
        });
    }

    let mut phases = DMatrix::zeros(d, d);
    for l in 0..d {
        for r in 0..d {
            let k = l * d + r;
            phases[(l, r)] = dt * term.matrix[(k, k)];
        }
    }
    let synthesis = synthesize_diagonal(&phases, pair_set)?;
    Ok(LoweredPair { flips, synthesis })
}

// --- gate sequence ---------------------------------------------------------------

/// A compiled circuit: local-unitary table, gate list, trailing global phase.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    dims: Vec<usize>,
    gates: Vec<NativeGate>,
    matrices: Vec<DMatrix<Complex64>>,
    global_phase: f64,
    max_angle: f64,
}

/// Gate and pulse totals for a [`GateSequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct GateCountReport {
    pub local_gates: u64,
    pub xx_gates: u64,
    pub zz_gates: u64,
    /// `xx_gates + zz_gates`.
    pub entangling_gates: u64,
    pub xx_pulses: u64,
    pub zz_pulses: u64,
    /// Total pulses after folding every angle modulo 4π.
    pub entangling_pulses: u64,
    /// Pulse ceiling the totals were computed with.
    pub max_angle: f64,
    /// Entangling pulses by term family (`pair-flip`, `pair-diagonal`).
    pub pulses_by_family: BTreeMap<String, u64>,
}

impl GateSequence {
    /// Site dimensions of the register the sequence acts on.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn gates(&self) -> &[NativeGate] {
        &self.gates
    }

    /// Local-unitary table referenced by [`GateKind::Local`].
    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    /// Phase applied once after all gates.
    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Applies the sequence to `psi0`.
    pub fn simulate(&self, psi0: &StateVector) -> Result<StateVector> {
        if psi0.register().dims() != self.dims.as_slice() {
            return Err(Error::InvalidState(format!(
                "state register {:?} does not match circuit register {:?}",
                psi0.register().dims(),
                self.dims
            )));
        }
        let mut state = psi0.clone();
        let mut cache: HashMap<MsMatrixKey, DMatrix<Complex64>> = HashMap::new();
        for gate in &self.gates {
            match &gate.kind {
                GateKind::Local { site, matrix } => {
                    let m = self.matrices.get(*matrix).ok_or(Error::IndexError {
                        index: *matrix,
                        limit: self.matrices.len(),
                    })?;
                    state.apply_local(*site, m)?;
                }
                GateKind::Ms { kind, a, b, angle } => {
                    let d_a = *self.dims.get(a.site).ok_or(Error::IndexError {
                        index: a.site,
                        limit: self.dims.len(),
                    })?;
                    let d_b = *self.dims.get(b.site).ok_or(Error::IndexError {
                        index: b.site,
                        limit: self.dims.len(),
                    })?;
                    let key = MsMatrixKey {
                        kind: *kind,
                        d_a,
                        d_b,
                        a_levels: a.levels,
                        b_levels: b.levels,
                        angle_bits: angle.to_bits(),
                    };
                    let m = match cache.entry(key) {
                        Entry::Occupied(e) => e.into_mut(),
                        Entry::Vacant(e) => {
                            e.insert(ms_matrix(*kind, d_a, d_b, a.levels, b.levels, *angle)?)
                        }
                    };
                    state.apply_two_site(a.site, b.site, m)?;
                }
            }
        }
        if self.global_phase != 0.0 {
            state.apply_global_phase(self.global_phase);
        }
        Ok(state)
    }

    /// Total entangling pulses at the sequence's pulse ceiling.
    pub fn entangling_pulse_count(&self) -> Result<u64> {
        Ok(self.count_report()?.entangling_pulses)
    }

    /// Gate/pulse totals at the sequence's pulse ceiling.
    pub fn count_report(&self) -> Result<GateCountReport> {
        self.count_report_with(self.max_angle)
    }

    /// Gate/pulse totals at an explicit pulse ceiling.
    pub fn count_report_with(&self, max_angle: f64) -> Result<GateCountReport> {
        let mut report = GateCountReport {
            local_gates: 0,
            xx_gates: 0,
            zz_gates: 0,
            entangling_gates: 0,
            xx_pulses: 0,
            zz_pulses: 0,
            entangling_pulses: 0,
            max_angle,
            pulses_by_family: BTreeMap::new(),
        };
        for gate in &self.gates {
            match &gate.kind {
                GateKind::Local { .. } => report.local_gates += 1,
                GateKind::Ms { kind, angle, .. } => {
                    let (_, pulses) = reduce_angle(*angle, max_angle)?;
                    let family = gate.provenance.term.family().to_string();
                    *report.pulses_by_family.entry(family).or_insert(0) += pulses;
                    match kind {
                        MsKind::Xx => {
                            report.xx_gates += 1;
                            report.xx_pulses += pulses;
                        }
                        MsKind::Zz => {
                            report.zz_gates += 1;
                            report.zz_pulses += pulses;
                        }
                    }
                }
            }
        }
        report.entangling_gates = report.xx_gates + report.zz_gates;
        report.entangling_pulses = report.xx_pulses + report.zz_pulses;
        Ok(report)
    }

    /// Plain-text dump: register, gate list in application order, global
    /// phase, then the local-unitary table (rows of `re,im` entries).
    pub fn write_text(&self) -> String {
        let mut out = String::new();
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "REGISTER dims={}", dims.join(","));
        for gate in &self.gates {
            match &gate.kind {
                GateKind::Local { site, matrix } => {
                    let _ = writeln!(out, "LOCAL site={site} matrix={matrix}");
                }
                GateKind::Ms { kind, a, b, angle } => {
                    let _ = writeln!(
                        out,
                        "MS kind={} a={}:{},{} b={}:{},{} angle={:?}",
                        kind.label(),
                        a.site,
                        a.levels.0,
                        a.levels.1,
                        b.site,
                        b.levels.0,
                        b.levels.1,
                        angle
                    );
                }
            }
        }
        let _ = writeln!(out, "PHASE angle={:?}", self.global_phase);
        for (id, m) in self.matrices.iter().enumerate() {
            let _ = writeln!(out, "MATRIX id={id} dim={}", m.nrows());
            out.push_str(&dump_matrix_complex(m));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct MsMatrixKey {
    kind: MsKind,
    d_a: usize,
    d_b: usize,
    a_levels: (u8, u8),
    b_levels: (u8, u8),
    angle_bits: u64,
}

/// Dense two-site matrix of an MS gate, rows ordered `i_a·d_b + i_b`.
fn ms_matrix(
    kind: MsKind,
    d_a: usize,
    d_b: usize,
    a_levels: (u8, u8),
    b_levels: (u8, u8),
    angle: f64,
) -> Result<DMatrix<Complex64>> {
    let (i, j) = (a_levels.0 as usize, a_levels.1 as usize);
    let (k, l) = (b_levels.0 as usize, b_levels.1 as usize);
    if i == j || i >= d_a || j >= d_a {
        return Err(Error::InvalidArgument(format!(
            "MS levels ({i}, {j}) invalid for a dimension-{d_a} site"
        )));
    }
    if k == l || k >= d_b || l >= d_b {
        return Err(Error::InvalidArgument(format!(
            "MS levels ({k}, {l}) invalid for a dimension-{d_b} site"
        )));
    }
    let mut m = DMatrix::identity(d_a * d_b, d_a * d_b);
    let (ik, il, jk, jl) = (i * d_b + k, i * d_b + l, j * d_b + k, j * d_b + l);
    let phi = 0.5 * angle;
    match kind {
        MsKind::Xx => {
            let c = Complex64::new(phi.cos(), 0.0);
            let s = Complex64::new(0.0, -phi.sin());
            for p in [ik, il, jk, jl] {
                m[(p, p)] = c;
            }
            m[(ik, jl)] = s;
            m[(jl, ik)] = s;
            m[(il, jk)] = s;
            m[(jk, il)] = s;
        }
        MsKind::Zz => {
            let minus = Complex64::from_polar(1.0, -phi);
            let plus = Complex64::from_polar(1.0, phi);
            m[(ik, ik)] = minus;
            m[(jl, jl)] = minus;
            m[(il, il)] = plus;
            m[(jk, jk)] = plus;
        }
    }
    Ok(m)
}

// --- circuit assembly ------------------------------------------------------------

struct CircuitBuilder {
    dims: Vec<usize>,
    gates: Vec<NativeGate>,
    matrices: Vec<DMatrix<Complex64>>,
    interned: HashMap<Vec<(u64, u64)>, usize>,
    global_phase: f64,
}

impl CircuitBuilder {
    fn new(dims: Vec<usize>) -> Self {
        Self {
            dims,
            gates: Vec::new(),
            matrices: Vec::new(),
            interned: HashMap::new(),
            global_phase: 0.0,
        }
    }

    fn intern(&mut self, m: DMatrix<Complex64>) -> usize {
        let key: Vec<(u64, u64)> = m.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
        if let Some(&id) = self.interned.get(&key) {
            return id;
        }
        let id = self.matrices.len();
        self.matrices.push(m);
        self.interned.insert(key, id);
        id
    }

    fn local(&mut self, site: usize, matrix: usize, step: usize, term: TermId) {
        self.gates.push(NativeGate {
            kind: GateKind::Local { site, matrix },
            provenance: Provenance { step, term },
        });
    }

    fn ms(&mut self, kind: MsKind, a: MsArm, b: MsArm, angle: f64, step: usize, term: TermId) {
        self.gates.push(NativeGate {
            kind: GateKind::Ms { kind, a, b, angle },
            provenance: Provenance { step, term },
        });
    }

    fn finish(self, max_angle: f64) -> GateSequence {
        GateSequence {
            dims: self.dims,
            gates: self.gates,
            matrices: self.matrices,
            global_phase: self.global_phase,
            max_angle,
        }
    }
}

/// Diagonal phase gate `exp(−i·diag(phases))`.
fn diagonal_phase_matrix(phases: &[f64]) -> DMatrix<Complex64> {
    let d = phases.len();
    DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex64::from_polar(1.0, -phases[r])
        } else {
            Complex64::default()
        }
    })
}

/// Local gate `diag(1, …, i at `level`, …, 1)` (or its inverse) used to turn
/// an `XX` interaction into `YY` by conjugation.
fn quarter_phase_matrix(d: usize, level: u8, dagger: bool) -> DMatrix<Complex64> {
    let mut m = DMatrix::identity(d, d);
    let i = Complex64::new(0.0, if dagger { -1.0 } else { 1.0 });
    m[(level as usize, level as usize)] = i;
    m
}

/// The digit pairs a bond can reach from the gauge-invariant seeds; a
/// property of the link truncation alone, derived on a minimal two-plaquette
/// chain.
fn sector_pair_set(params: &ModelParams) -> Result<BTreeSet<(u8, u8)>> {
    let probe = ModelParams {
        n_plaquettes: 2,
        ..params.clone()
    };
    Ok(PhysicalSubspace::canonical(&probe)?.pair_set().clone())
}

/// Every digit pair, used when physicality must not be assumed.
fn full_pair_set(d: usize) -> BTreeSet<(u8, u8)> {
    let mut set = BTreeSet::new();
    for l in 0..d as u8 {
        for r in 0..d as u8 {
            set.insert((l, r));
        }
    }
    set
}

/// Compiles `plan.n_steps` symmetric Trotter steps into native gates.
///
/// The result reproduces [`crate::evolve::evolve_trotter`] — global phase
/// included — on every physically reachable state; with
/// [`CompileOptions::respect_physicality`] disabled it reproduces the step on
/// the whole tensor space at the price of extra gates.
///
/// `phys` supplies the reachable digit-pair set; pass `None` to derive it
/// from the link truncation.
pub fn compile_trotter_circuit(
    params: &ModelParams,
    plan: &TrotterPlan,
    phys: Option<&PhysicalSubspace>,
    opts: &CompileOptions,
) -> Result<GateSequence> {
    params.validate()?;
    plan.validate()?;
    opts.validate()?;
    let terms = HamiltonianTerms::new(params, plan.pair_form)?;
    let d = params.sector.dim();
    let n_sites = params.n_plaquettes;
    let dt = plan.dt();

    let mut builder = CircuitBuilder::new(terms.register().dims().to_vec());
    if dt == 0.0 {
        return Ok(builder.finish(opts.max_angle));
    }

    let pair_set = if opts.respect_physicality {
        match phys {
            Some(p) => p.pair_set().clone(),
            None => sector_pair_set(params)?,
        }
    } else {
        full_pair_set(d)
    };

    // Per-step ingredients; every step reuses the same matrices.
    let kinetic = if params.x != 0.0 {
        Some(builder.intern(symmetric_exp(terms.plaquette_term(), dt / 2.0)))
    } else {
        None
    };
    let mut electric = Vec::with_capacity(n_sites);
    for site in 0..n_sites {
        let diag = terms.local_term(site)?;
        if diag.iter().any(|&e| (e * dt).abs() > ANGLE_EPS) {
            let phases: Vec<f64> = diag.iter().map(|&e| e * dt / 2.0).collect();
            electric.push(Some(builder.intern(diagonal_phase_matrix(&phases))));
        } else {
            electric.push(None);
        }
    }
    let lowered = if n_sites > 1 {
        Some(lower_pair_term(terms.pair_term(), dt, &pair_set)?)
    } else {
        None
    };
    let diag_locals = lowered.as_ref().map(|lp| {
        let left = lp
            .synthesis
            .has_left_local()
            .then(|| builder.intern(diagonal_phase_matrix(&lp.synthesis.left_phases)));
        let right = lp
            .synthesis
            .has_right_local()
            .then(|| builder.intern(diagonal_phase_matrix(&lp.synthesis.right_phases)));
        (left, right)
    });
    let quarter_ids: Vec<[usize; 4]> = lowered
        .as_ref()
        .map(|lp| {
            lp.flips
                .iter()
                .map(|f| {
                    [
                        builder.intern(quarter_phase_matrix(d, f.left_levels.1, true)),
                        builder.intern(quarter_phase_matrix(d, f.right_levels.1, true)),
                        builder.intern(quarter_phase_matrix(d, f.left_levels.1, false)),
                        builder.intern(quarter_phase_matrix(d, f.right_levels.1, false)),
                    ]
                })
                .collect()
        })
        .unwrap_or_default();

    for step in 0..plan.n_steps {
        let halves = |builder: &mut CircuitBuilder| {
            if let Some(id) = kinetic {
                for site in 0..n_sites {
                    builder.local(site, id, step, TermId::Plaquette { site });
                }
            }
            for (site, id) in electric.iter().enumerate() {
                if let Some(id) = *id {
                    builder.local(site, id, step, TermId::LocalElectric { site });
                }
            }
        };
        halves(&mut builder);
        if let Some(lp) = &lowered {
            for bond in 0..n_sites - 1 {
                emit_bond(&mut builder, lp, &quarter_ids, diag_locals, bond, step);
            }
        }
        // Mirror image of the leading halves: electric first, then kinetic.
        for (site, id) in electric.iter().enumerate() {
            if let Some(id) = *id {
                builder.local(site, id, step, TermId::LocalElectric { site });
            }
        }
        if let Some(id) = kinetic {
            for site in 0..n_sites {
                builder.local(site, id, step, TermId::Plaquette { site });
            }
        }
    }
    builder.global_phase += -terms.total_offset() * plan.t_total;
    Ok(builder.finish(opts.max_angle))
}

fn emit_bond(
    builder: &mut CircuitBuilder,
    lowered: &LoweredPair,
    quarter_ids: &[[usize; 4]],
    diag_locals: Option<(Option<usize>, Option<usize>)>,
    bond: usize,
    step: usize,
) {
    let (left_site, right_site) = (bond, bond + 1);
    for (index, flip) in lowered.flips.iter().enumerate() {
        let term = TermId::PairFlip { bond, index };
        let a = MsArm {
            site: left_site,
            levels: flip.left_levels,
        };
        let b = MsArm {
            site: right_site,
            levels: flip.right_levels,
        };
        if flip.elided {
            builder.ms(MsKind::Xx, a, b, flip.theta, step, term);
        } else {
            // exp(−i·θ/2·(XX−YY)/1) with θ the full hop angle: XX at half the
            // angle, then the YY half as a conjugated XX at the opposite sign.
            let [pl_dag, pr_dag, pl, pr] = quarter_ids[index];
            let half = 0.5 * flip.theta;
            builder.local(left_site, pl_dag, step, term);
            builder.local(right_site, pr_dag, step, term);
            builder.ms(MsKind::Xx, a, b, -half, step, term);
            builder.local(left_site, pl, step, term);
            builder.local(right_site, pr, step, term);
            builder.ms(MsKind::Xx, a, b, half, step, term);
        }
    }
    for (index, dyad) in lowered.synthesis.dyads.iter().enumerate() {
        builder.ms(
            MsKind::Zz,
            MsArm {
                site: left_site,
                levels: dyad.left_levels,
            },
            MsArm {
                site: right_site,
                levels: dyad.right_levels,
            },
            2.0 * dyad.half_angle,
            step,
            TermId::PairDiagonal { bond, index },
        );
    }
    if let Some((left, right)) = diag_locals {
        if let Some(id) = left {
            builder.local(
                left_site,
                id,
                step,
                TermId::PairDiagonalLocal {
                    bond,
                    site: left_site,
                },
            );
        }
        if let Some(id) = right {
            builder.local(
                right_site,
                id,
                step,
                TermId::PairDiagonalLocal {
                    bond,
                    site: right_site,
                },
            );
        }
    }
    builder.global_phase += -lowered.synthesis.constant;
}

// --- qubit-register comparison ----------------------------------------------------

/// Two-qubit-gate tabulation for running the same symmetric step on a
/// register of three qubits per site with binary-coded levels.
///
/// Per step of the three-plaquette eight-level chain:
///
/// * each bond's shared-rung term costs `30 + 4·(3 + 19 + 30) = 238` CNOTs —
///   a diagonal-phase network plus four controlled two-level rotations with
///   their control arithmetic — so both bonds together cost 476;
/// * the plaquette-flip term costs `4·3 + 2·19 = 50`;
/// * the single-link electric diagonal costs 18.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitEstimate {
    pub qubits_per_site: u32,
    pub total_qubits: u32,
    pub pair_per_bond: u64,
    pub pair_per_step: u64,
    pub plaquette_per_step: u64,
    pub diagonal_per_step: u64,
    pub per_step: u64,
    pub n_steps: u64,
    pub total: u64,
}

impl QubitEstimate {
    /// How many times more two-qubit gates the binary embedding spends than
    /// a native qudit circuit with the given pulse total.
    pub fn overhead_vs(&self, native_pulses: u64) -> f64 {
        self.total as f64 / native_pulses as f64
    }
}

/// Tabulated CNOT cost of the binary-encoded qubit equivalent of a compiled
/// plan.  Available for the eight-level sector on the three-plaquette chain,
/// where each site maps onto exactly three qubits.
pub fn qubit_embedding_estimate(params: &ModelParams, plan: &TrotterPlan) -> Result<QubitEstimate> {
    params.validate()?;
    plan.validate()?;
    if params.sector != Sector::One {
        return Err(Error::Unsupported(
            "qubit-embedding costs are tabulated for the eight-level sector only".into(),
        ));
    }
    if params.n_plaquettes != 3 {
        return Err(Error::Unsupported(format!(
            "qubit-embedding costs are tabulated for the three-plaquette chain, not {} plaquettes",
            params.n_plaquettes
        )));
    }
    let pair_per_bond = 30 + 4 * (3 + 19 + 30);
    let pair_per_step = params.n_bonds() as u64 * pair_per_bond;
    let plaquette_per_step = 4 * 3 + 2 * 19;
    let diagonal_per_step = 18;
    let per_step = pair_per_step + plaquette_per_step + diagonal_per_step;
    let n_steps = plan.n_steps as u64;
    Ok(QubitEstimate {
        qubits_per_site: 3,
        total_qubits: 3 * params.n_plaquettes as u32,
        pair_per_bond,
        pair_per_step,
        plaquette_per_step,
        diagonal_per_step,
        per_step,
        n_steps,
        total: per_step * n_steps,
    })
}

/// Entangling-pulse totals for fixed-step circuits of increasing duration.
///
/// With the step count held fixed, every MS angle grows linearly with `t`;
/// folding modulo 4π then makes the pulse count *drop* once angles pass 2π,
/// so the cost curve is a rising staircase with late-time dips.
pub fn entangling_count_vs_time(
    params: &ModelParams,
    plan_template: &TrotterPlan,
    times: &[f64],
    opts: &CompileOptions,
) -> Result<Vec<(f64, u64)>> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() {
            return Err(Error::GridError(format!("non-finite time {t}")));
        }
        let plan = TrotterPlan {
            t_total: t,
            n_steps: plan_template.n_steps,
            pair_form: plan_template.pair_form,
        };
        let circuit = compile_trotter_circuit(params, &plan, None, opts)?;
        out.push((t, circuit.entangling_pulse_count()?));
    }
    Ok(out)
}
