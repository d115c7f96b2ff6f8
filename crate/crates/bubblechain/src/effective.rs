//! Six-state effective model of the lightest string-fluctuation band in the
//! spin-1/2 sector.
//!
//! At three plaquettes the electric spectrum above the string `|111⟩` has a
//! six-fold degenerate first band: each member differs from another by one
//! kinetic flip, and all sit at excess energy `(3/4)·g⊥²` independent of the
//! flip pattern. Degenerate perturbation theory in the kinetic coupling
//! truncates the dynamics to that band. With a sign gauge on the bipartite
//! hop graph the projected Hamiltonian takes the form
//!
//! ```text
//! H_eff = -(x/√2) · A,     A = adjacency of  0—1—2—4—5  plus  1—3—4
//! ```
//!
//! (edges 01, 12, 13, 24, 34, 45; every full-model hop amplitude equals
//! `x/√2` because all kinetic matrix elements inside the band coincide).
//! `A` has eigenvalues `{±√5, ±1, 0, 0}`, so a state prepared in the
//! symmetric combination of the two middle states (labels 2 and 3)
//! oscillates with the single Rabi frequency
//!
//! ```text
//! Ω = √(5/2) · x
//! ```
//!
//! and the populations admit closed forms (implemented in
//! [`analytic_populations_plus`] straight from the formulas, independent of
//! the matrix in [`build_heff`], so the two serve as mutual oracles):
//!
//! ```text
//! P₁ = P₄ = (2/5)·sin²(Ωt)
//! P₂ = P₃ = (1/50)·(1 + 4·cos Ωt)²
//! P₀ = P₅ = (2/25)·(cos Ωt − 1)²
//! ```
//!
//! The antisymmetric combination `(|2⟩ − |3⟩)/√2` is annihilated by `A`
//! (both middle states couple to the same neighbours), so it is exactly
//! stationary in the effective model — and, because it is also odd under
//! the chain reflection, very nearly stationary in the full model at small
//! kinetic coupling.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::Error;
use crate::evolve::{validate_time_grid, ExactEvolver};
use crate::model::{diagonal_config_energy, HamiltonianTerms, ModelParams, PairForm, Sector};
use crate::qudit::{BasisState, StateVector};
use crate::Result;

/// Number of band states.
pub const BAND_SIZE: usize = 6;

/// Reference adjacency edges of the band graph, in canonical labels.
const BAND_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)];

/// Rabi frequency of the symmetric middle-state oscillation.
pub fn rabi_frequency(x: f64) -> f64 {
    (5.0f64 / 2.0).sqrt() * x.abs()
}

/// The effective band Hamiltonian `-(x/√2)·A`.
pub fn build_heff(x: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(BAND_SIZE, BAND_SIZE);
    for &(i, j) in &BAND_EDGES {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a * (-x / std::f64::consts::SQRT_2)
}

/// Closed-form band populations starting from `(|2⟩ + |3⟩)/√2`.
///
/// Returns one `[P₀..P₅]` row per time. Written directly from the formulas
/// in the module docs — no matrix is built here, which keeps this function
/// an independent oracle for numeric evolution under [`build_heff`].
pub fn analytic_populations_plus(x: f64, times: &[f64]) -> Result<Vec<[f64; BAND_SIZE]>> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument("x must be finite".into()));
    }
    if times.is_empty() {
        return Err(Error::GridError("empty time grid".into()));
    }
    let omega = rabi_frequency(x);
    Ok(times
        .iter()
        .map(|&t| {
            let (s, c) = (omega * t).sin_cos();
            let p_mid = (1.0 + 4.0 * c).powi(2) / 50.0;
            let p_inner = 2.0 / 5.0 * s * s;
            let p_outer = 2.0 / 25.0 * (c - 1.0).powi(2);
            [p_outer, p_inner, p_mid, p_mid, p_inner, p_outer]
        })
        .collect())
}

/// Numerically evolves an arbitrary band state under [`build_heff`].
///
/// Used as the matrix-side oracle against [`analytic_populations_plus`].
pub fn evolve_band_numeric(
    x: f64,
    psi0: &[Complex64; BAND_SIZE],
    t: f64,
) -> [Complex64; BAND_SIZE] {
    let eig = SymmetricEigen::new(build_heff(x));
    let v = &eig.eigenvectors;
    let mut out = [Complex64::ZERO; BAND_SIZE];
    for k in 0..BAND_SIZE {
        let mut overlap = Complex64::ZERO;
        for r in 0..BAND_SIZE {
            overlap += v[(r, k)] * psi0[r];
        }
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for r in 0..BAND_SIZE {
            out[r] += v[(r, k)] * phase * overlap;
        }
    }
    out
}

/// Result of checking the antisymmetric middle-state combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinusCheck {
    /// The effective eigenvalue of `(|2⟩ − |3⟩)/√2` (exactly zero).
    pub eigenvalue: f64,
    /// `‖H_eff v − λ v‖` for that combination.
    pub residual_norm: f64,
}

/// Verifies that `(|2⟩ − |3⟩)/√2` is a null eigenvector of the band
/// Hamiltonian and reports the residual.
pub fn minus_state_check(x: f64) -> MinusCheck {
    let h = build_heff(x);
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = [0.0; BAND_SIZE];
    v[2] = inv;
    v[3] = -inv;
    let mut residual = 0.0f64;
    for r in 0..BAND_SIZE {
        let mut acc = 0.0;
        for c in 0..BAND_SIZE {
            acc += h[(r, c)] * v[c];
        }
        residual += acc * acc;
    }
    MinusCheck {
        eigenvalue: 0.0,
        residual_norm: residual.sqrt(),
    }
}

// --- band ↔ full-model mapping -------------------------------------------------

/// Correspondence between canonical band labels and full-model basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldMap {
    /// Versioned identifier of the derivation; bump when the canonical
    /// labeling rules change.
    pub version: String,
    /// Full-model configurations for band labels `0..=5`.
    pub states: [BasisState; BAND_SIZE],
    /// Flat indices of those configurations.
    pub indices: [usize; BAND_SIZE],
    /// Bipartite gauge signs: the full-model hop is `+x/√2`, the effective
    /// convention is `-x/√2`, and these signs conjugate one into the other.
    pub signs: [f64; BAND_SIZE],
}

impl ManifoldMap {
    /// Lifts band amplitudes to a full-register state (gauge signs applied).
    pub fn lift(
        &self,
        params: &ModelParams,
        band_amps: &[Complex64; BAND_SIZE],
    ) -> Result<StateVector> {
        let reg = params.register()?;
        let mut amps = vec![Complex64::ZERO; reg.dim()];
        for k in 0..BAND_SIZE {
            amps[self.indices[k]] = band_amps[k] * self.signs[k];
        }
        StateVector::from_amplitudes(&reg, amps)
    }

    /// Band populations of a full state (weight outside the band dropped).
    pub fn band_populations(&self, state: &StateVector) -> [f64; BAND_SIZE] {
        let mut out = [0.0; BAND_SIZE];
        for (slot, &idx) in out.iter_mut().zip(&self.indices) {
            *slot = state.amplitudes()[idx].norm_sqr();
        }
        out
    }
}

/// Derives the band ↔ full-model mapping for the spin-1/2 chain of three
/// plaquettes.
///
/// The band is found by its energy signature — excess exactly `(3/4)·g⊥²`
/// above the string configuration at a fixed generic probe coupling — and
/// its hop graph is matched against the canonical adjacency. The two graph
/// automorphism freedoms (mirror, middle swap) are fixed lexicographically:
/// among the two degree-3 states the smaller label becomes `1`, among the
/// two degree-2 states the smaller becomes `2`.
pub fn manifold_mapping(params: &ModelParams) -> Result<ManifoldMap> {
    params.validate()?;
    if params.sector != Sector::Half {
        return Err(Error::MappingUnavailable(
            "the fluctuation band mapping is defined in the spin-1/2 sector".into(),
        ));
    }
    if params.n_plaquettes != 3 {
        return Err(Error::MappingUnavailable(format!(
            "the six-state band mapping needs 3 plaquettes, got {}",
            params.n_plaquettes
        )));
    }
    let probe = ModelParams {
        x: 1.0,
        g_par2: 1.37,
        g_perp2: 0.61,
        n_plaquettes: 3,
        sector: Sector::Half,
    };
    let reg = probe.register()?;
    let string = vec![1u8; 3];
    let e_ref = diagonal_config_energy(&probe, &string)?;
    let target = 0.75 * probe.g_perp2;

    let mut band: Vec<usize> = Vec::new();
    for idx in 0..reg.dim() {
        let e = diagonal_config_energy(&probe, &reg.decode(idx)?)?;
        if (e - e_ref - target).abs() < 1e-9 {
            band.push(idx);
        }
    }
    if band.len() != BAND_SIZE {
        return Err(Error::MappingUnavailable(format!(
            "expected a six-state band, found {} states",
            band.len()
        )));
    }

    // Hop graph inside the band: one digit changes with a nonzero kinetic
    // matrix element.
    let u = crate::model::plaquette_op(Sector::Half);
    let mut adj = [[false; BAND_SIZE]; BAND_SIZE];
    for (i, &a) in band.iter().enumerate() {
        let da = reg.decode(a)?;
        for (j, &b) in band.iter().enumerate() {
            if i == j {
                continue;
            }
            let db = reg.decode(b)?;
            let diff: Vec<usize> = (0..3).filter(|&s| da[s] != db[s]).collect();
            if diff.len() == 1 {
                let s = diff[0];
                if u[(db[s] as usize, da[s] as usize)] != 0.0 {
                    adj[i][j] = true;
                }
            }
        }
    }
    let degree = |i: usize| -> usize { (0..BAND_SIZE).filter(|&j| adj[i][j]).count() };

    // Canonical labels: 1 and 4 are the degree-3 hubs, 2 and 3 the shared
    // degree-2 middles, 0 and 5 the degree-1 tips hanging off 1 and 4.
    let mut hubs: Vec<usize> = (0..BAND_SIZE).filter(|&i| degree(i) == 3).collect();
    let mut middles: Vec<usize> = (0..BAND_SIZE)
        .filter(|&i| degree(i) == 2 && hubs.iter().all(|&h| adj[i][h]))
        .collect();
    if hubs.len() != 2 || middles.len() != 2 {
        return Err(Error::MappingUnavailable(
            "band hop graph does not match the canonical shape".into(),
        ));
    }
    hubs.sort_by_key(|&i| band[i]);
    middles.sort_by_key(|&i| band[i]);
    let tip_of = |hub: usize| -> Result<usize> {
        (0..BAND_SIZE)
            .find(|&i| degree(i) == 1 && adj[i][hub])
            .ok_or_else(|| Error::MappingUnavailable("hub without a degree-1 tip".into()))
    };
    let order = [
        tip_of(hubs[0])?,
        hubs[0],
        middles[0],
        middles[1],
        hubs[1],
        tip_of(hubs[1])?,
    ];

    let mut states: [BasisState; BAND_SIZE] = Default::default();
    let mut indices = [0usize; BAND_SIZE];
    for k in 0..BAND_SIZE {
        indices[k] = band[order[k]];
        states[k] = reg.decode(band[order[k]])?;
    }
    // Bipartite gauge: hubs positive, the rest negative, turning the
    // uniformly positive full-model hop into the -(x/√2) convention.
    let signs = [-1.0, 1.0, -1.0, -1.0, 1.0, -1.0];

    // The derivation above is structural; verify the adjacency made it into
    // the canonical shape before handing the map out.
    for (i, j) in [(0usize, 1usize), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5)] {
        if !adj[order[i]][order[j]] {
            return Err(Error::MappingUnavailable(format!(
                "canonical edge {i}-{j} missing after relabeling"
            )));
        }
    }

    Ok(ManifoldMap {
        version: "half-chain-band-v1".into(),
        states,
        indices,
        signs,
    })
}

// --- full-model comparison ---------------------------------------------------------

/// Per-time comparison of analytic band populations against exact full-model
/// evolution from the lifted plus state.
#[derive(Debug, Clone)]
pub struct EffectiveComparison {
    pub times: Vec<f64>,
    /// Analytic band populations, row per time.
    pub band: Vec<[f64; BAND_SIZE]>,
    /// Exact full-model populations of the mapped configurations.
    pub full: Vec<[f64; BAND_SIZE]>,
    /// `max_t max_k |band - full|`.
    pub max_abs_deviation: f64,
}

/// Evolves the full spin-1/2 model from `(|2⟩ + |3⟩)/√2` (lifted through the
/// band mapping) and compares populations against the closed forms.
///
/// At small `x·t` the two agree to the perturbative accuracy of the band
/// truncation; at larger kinetic coupling the full model visibly leaks out
/// of the band and the deviation grows.
pub fn compare_to_full(params: &ModelParams, times: &[f64]) -> Result<EffectiveComparison> {
    validate_time_grid(times)?;
    let map = manifold_mapping(params)?;
    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut band0 = [Complex64::ZERO; BAND_SIZE];
    band0[2] = inv;
    band0[3] = inv;
    let psi0 = map.lift(params, &band0)?;

    let terms = HamiltonianTerms::new(params, PairForm::Original)?;
    let evolver = ExactEvolver::new(&terms)?;
    let band = analytic_populations_plus(params.x, times)?;
    let mut full = Vec::with_capacity(times.len());
    let mut max_dev = 0.0f64;
    for (row, &t) in times.iter().enumerate() {
        let state = evolver.evolve(&psi0, t)?;
        let pops = map.band_populations(&state);
        for k in 0..BAND_SIZE {
            max_dev = max_dev.max((pops[k] - band[row][k]).abs());
        }
        full.push(pops);
    }
    Ok(EffectiveComparison {
        times: times.to_vec(),
        band,
        full,
        max_abs_deviation: max_dev,
    })
}
