//! Time evolution: exact, Trotterized, and measured.
//!
//! Exact evolution exploits that every Hamiltonian here is real symmetric:
//! one eigendecomposition `H = V Λ Vᵀ` gives `e^{-iHt} = V e^{-iΛt} Vᵀ` for
//! any time, so a time series costs one solve plus two dense mat-vecs per
//! requested time.
//!
//! Trotter evolution uses the symmetric second-order splitting
//!
//! ```text
//! U(dt) ≈ U_kin(dt/2) · U_loc(dt/2) · U_pair(dt) · U_loc(dt/2) · U_kin(dt/2)
//! ```
//!
//! with the kinetic factor applied site by site (site 0 first), the local
//! electric factor as one global diagonal phase, and the shared-rung factor
//! bond by bond, left to right. The per-site and per-bond factors within one
//! group commute exactly in both sectors (kinetic terms act on different
//! sites; in the spin-1 sector neighbouring pair terms share a site but
//! their matrices still commute — flip-connected pairs carry equal diagonal
//! weight), so the leading Trotter error is the standard `O(dt²)` between
//! the three groups and population errors scale as `(t/m)²` at fixed `t`.
//!
//! When the simplified pair form is used, every bond term is shifted by a
//! constant relative to the original Hamiltonian. The evolvers reinstate
//! that constant as a global phase `e^{-i·offset·t}`, so states evolved
//! under either form agree amplitude-by-amplitude on the physical subspace
//! and can be compared directly.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{HamiltonianTerms, ModelParams, PairForm, PhysicalSubspace};
use crate::qudit::StateVector;
use crate::Result;

/// A Trotterized evolution request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    /// Total evolution time.
    pub t_total: f64,
    /// Number of symmetric steps; `dt = t_total / n_steps`.
    pub n_steps: usize,
    /// Pair-term flavour to split with.
    #[serde(default)]
    pub pair_form: PairForm,
}

impl TrotterPlan {
    pub fn validate(&self) -> Result<()> {
        if !self.t_total.is_finite() {
            return Err(Error::InvalidPlan("t_total must be finite".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidPlan("n_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_total / self.n_steps as f64
    }
}

// --- exact evolution ---------------------------------------------------------

/// Exact propagator from one symmetric eigendecomposition.
pub struct ExactEvolver {
    terms: HamiltonianTerms,
    eigenvalues: nalgebra::DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl ExactEvolver {
    /// Diagonalizes the assembled Hamiltonian once.
    pub fn new(terms: &HamiltonianTerms) -> Result<Self> {
        let h = terms.assemble()?;
        let eig = SymmetricEigen::new(h);
        Ok(Self {
            terms: terms.clone(),
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn terms(&self) -> &HamiltonianTerms {
        &self.terms
    }

    /// `|ψ(t)⟩ = e^{-iHt} |ψ(0)⟩`, with the simplified-form offset (if any)
    /// reinstated as a global phase so the target is always the original
    /// Hamiltonian on the physical subspace.
    pub fn evolve(&self, psi0: &StateVector, t: f64) -> Result<StateVector> {
        if !t.is_finite() {
            return Err(Error::InvalidArgument("time must be finite".into()));
        }
        let dim = self.terms.register().dim();
        if psi0.register() != self.terms.register() {
            return Err(Error::InvalidState(
                "state register does not match the Hamiltonian".into(),
            ));
        }
        // Vᵀψ, phase, back: two real-matrix × complex-vector products done
        // as pairs of real products.
        let amps = psi0.amplitudes();
        let mut re = nalgebra::DVector::zeros(dim);
        let mut im = nalgebra::DVector::zeros(dim);
        for k in 0..dim {
            re[k] = amps[k].re;
            im[k] = amps[k].im;
        }
        let v = &self.eigenvectors;
        let cre = v.transpose() * re;
        let cim = v.transpose() * im;
        let mut rot_re = nalgebra::DVector::zeros(dim);
        let mut rot_im = nalgebra::DVector::zeros(dim);
        for k in 0..dim {
            let (s, c) = (-self.eigenvalues[k] * t).sin_cos();
            // (cre + i·cim) · (c + i·s)
            rot_re[k] = cre[k] * c - cim[k] * s;
            rot_im[k] = cre[k] * s + cim[k] * c;
        }
        let out_re = v * rot_re;
        let out_im = v * rot_im;
        let mut out = Vec::with_capacity(dim);
        for k in 0..dim {
            out.push(Complex64::new(out_re[k], out_im[k]));
        }
        let mut state = StateVector::from_amplitudes(self.terms.register(), out)?;
        let offset = self.terms.total_offset();
        if offset != 0.0 {
            state.apply_global_phase(-offset * t);
        }
        Ok(state)
    }

    /// Populations of every basis state along a time grid.
    pub fn evolve_series(&self, psi0: &StateVector, times: &[f64]) -> Result<TimeSeries> {
        validate_time_grid(times)?;
        let mut series = TimeSeries::with_all_labels(self.terms.register())?;
        for &t in times {
            let state = self.evolve(psi0, t)?;
            series.push_row(t, state.populations())?;
        }
        Ok(series)
    }
}

/// One-call exact evolution under the original-form Hamiltonian.
pub fn evolve_exact(params: &ModelParams, psi0: &StateVector, t: f64) -> Result<StateVector> {
    let terms = HamiltonianTerms::new(params, PairForm::Original)?;
    ExactEvolver::new(&terms)?.evolve(psi0, t)
}

// --- Trotter evolution ---------------------------------------------------------

/// Cached complex exponentials of all term factors for one step size.
struct TrotterFactors {
    /// `exp(-i·(dt/2)·(-x U))`, shared by every site.
    kinetic_half: DMatrix<Complex64>,
    /// Global diagonal phase for the electric locals over `dt/2`.
    local_half: Vec<Complex64>,
    /// `exp(-i·dt·V_pair)`, shared by every bond.
    pair_full: DMatrix<Complex64>,
}

/// `exp(-i·scale·M)` for real symmetric `M`, via one eigendecomposition.
pub(crate) fn symmetric_exp(mat: &DMatrix<f64>, scale: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(mat.clone());
    let n = mat.nrows();
    let mut out = DMatrix::from_element(n, n, Complex64::ZERO);
    // V · diag(e^{-i λ s}) · Vᵀ
    for k in 0..n {
        let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * scale);
        for r in 0..n {
            let vr = eig.eigenvectors[(r, k)];
            if vr == 0.0 {
                continue;
            }
            for c in 0..n {
                out[(r, c)] += phase * vr * eig.eigenvectors[(c, k)];
            }
        }
    }
    out
}

fn build_factors(terms: &HamiltonianTerms, dt: f64) -> Result<TrotterFactors> {
    let reg = terms.register();
    let kinetic_half = symmetric_exp(terms.plaquette_term(), dt / 2.0);

    let mut local_energy = vec![0.0f64; reg.dim()];
    for (idx, energy) in local_energy.iter_mut().enumerate() {
        let digits = reg.decode(idx)?;
        for (s, &a) in digits.iter().enumerate() {
            *energy += terms.local_term(s)?[a as usize];
        }
    }
    let local_half = local_energy
        .iter()
        .map(|&e| Complex64::from_polar(1.0, -e * dt / 2.0))
        .collect();

    let pair_full = symmetric_exp(&terms.pair_term().matrix, dt);
    Ok(TrotterFactors {
        kinetic_half,
        local_half,
        pair_full,
    })
}

fn apply_symmetric_step(
    state: &mut StateVector,
    factors: &TrotterFactors,
    n_sites: usize,
) -> Result<()> {
    for site in 0..n_sites {
        state.apply_local(site, &factors.kinetic_half)?;
    }
    state.apply_diagonal(&factors.local_half)?;
    for bond in 0..n_sites - 1 {
        state.apply_two_site(bond, bond + 1, &factors.pair_full)?;
    }
    state.apply_diagonal(&factors.local_half)?;
    for site in 0..n_sites {
        state.apply_local(site, &factors.kinetic_half)?;
    }
    Ok(())
}

/// Evolves through `plan.n_steps` symmetric steps and returns the final
/// state (global offset phase reinstated, see the module docs).
pub fn evolve_trotter(
    terms: &HamiltonianTerms,
    psi0: &StateVector,
    plan: &TrotterPlan,
) -> Result<StateVector> {
    plan.validate()?;
    if terms.pair_form() != plan.pair_form {
        return Err(Error::InvalidPlan(format!(
            "plan wants {:?} pair form but the terms were built as {:?}",
            plan.pair_form,
            terms.pair_form()
        )));
    }
    if psi0.register() != terms.register() {
        return Err(Error::InvalidState(
            "state register does not match the Hamiltonian".into(),
        ));
    }
    let factors = build_factors(terms, plan.dt())?;
    let mut state = psi0.clone();
    for _ in 0..plan.n_steps {
        apply_symmetric_step(&mut state, &factors, terms.params().n_plaquettes)?;
    }
    let offset = terms.total_offset();
    if offset != 0.0 {
        state.apply_global_phase(-offset * plan.t_total);
    }
    Ok(state)
}

/// Populations after every Trotter step, `t_k = k·dt` for `k = 0..=n_steps`.
pub fn evolve_trotter_series(
    terms: &HamiltonianTerms,
    psi0: &StateVector,
    plan: &TrotterPlan,
) -> Result<TimeSeries> {
    plan.validate()?;
    if terms.pair_form() != plan.pair_form {
        return Err(Error::InvalidPlan(format!(
            "plan wants {:?} pair form but the terms were built as {:?}",
            plan.pair_form,
            terms.pair_form()
        )));
    }
    let factors = build_factors(terms, plan.dt())?;
    let mut series = TimeSeries::with_all_labels(terms.register())?;
    let mut state = psi0.clone();
    series.push_row(0.0, state.populations())?;
    for step in 1..=plan.n_steps {
        apply_symmetric_step(&mut state, &factors, terms.params().n_plaquettes)?;
        series.push_row(step as f64 * plan.dt(), state.populations())?;
    }
    Ok(series)
}

// --- time series ------------------------------------------------------------------

/// Populations over time, one labelled column per tracked basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    labels: Vec<String>,
    /// `values[row][col]`, row per time, column per label.
    values: Vec<Vec<f64>>,
}

impl TimeSeries {
    /// Empty series with explicit column labels.
    pub fn new(labels: Vec<String>) -> Self {
        Self {
            times: Vec::new(),
            labels,
            values: Vec::new(),
        }
    }

    /// Empty series tracking every basis state of a register.
    pub fn with_all_labels(reg: &crate::qudit::MixedRadixRegister) -> Result<Self> {
        let labels = (0..reg.dim())
            .map(|i| reg.label(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(labels))
    }

    /// Appends one row; the value count must match the labels.
    pub fn push_row(&mut self, t: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.labels.len() {
            return Err(Error::GridError(format!(
                "row has {} values for {} labels",
                values.len(),
                self.labels.len()
            )));
        }
        self.times.push(t);
        self.values.push(values);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    /// The values of one time row, in label order.
    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    /// One labelled column.
    pub fn column(&self, label: &str) -> Result<Vec<f64>> {
        let col = self
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidArgument(format!("no column labelled '{label}'")))?;
        Ok(self.values.iter().map(|row| row[col]).collect())
    }

    /// Sums a set of labelled columns into a fresh series column-set.
    pub fn select(&self, labels: &[&str]) -> Result<TimeSeries> {
        let mut out = TimeSeries::new(labels.iter().map(|s| s.to_string()).collect());
        let cols: Vec<usize> = labels
            .iter()
            .map(|label| {
                self.labels
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Error::InvalidArgument(format!("no column labelled '{label}'")))
            })
            .collect::<Result<_>>()?;
        for (row, &t) in self.values.iter().zip(&self.times) {
            out.push_row(t, cols.iter().map(|&c| row[c]).collect())?;
        }
        Ok(out)
    }

    /// CSV rendering: header `t,<label>,...`, one row per time, shortest
    /// round-trip float formatting (byte-stable for identical inputs).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (row, &t) in self.values.iter().zip(&self.times) {
            out.push_str(&format!("{t:?}"));
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Extracts the broken-string population column from a series.
pub fn broken_string_population(series: &TimeSeries, label: &str) -> Result<Vec<f64>> {
    series.column(label)
}

/// Trapezoidal `∫ P dt` over a strictly increasing grid.
pub fn time_integrated_population(times: &[f64], values: &[f64]) -> Result<f64> {
    validate_time_grid(times)?;
    if times.len() != values.len() {
        return Err(Error::GridError(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::GridError("need at least two grid points".into()));
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    Ok(acc)
}

/// Checks a time grid is non-empty, finite and strictly increasing.
pub fn validate_time_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::GridError("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::GridError("non-finite time in grid".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::GridError(format!(
                "time grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Uniform grid of `n_points` between `t0` and `t1` inclusive.
pub fn uniform_time_grid(t0: f64, t1: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::GridError("need at least two grid points".into()));
    }
    if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
        return Err(Error::GridError(format!("bad grid bounds [{t0}, {t1}]")));
    }
    let step = (t1 - t0) / (n_points - 1) as f64;
    Ok((0..n_points).map(|k| t0 + k as f64 * step).collect())
}

// --- measurement ----------------------------------------------------------------

/// Draws `shots` projective measurements from a state's populations.
///
/// Sampling is a fixed-seed ChaCha stream over the cumulative distribution,
/// so identical `(state, shots, seed)` always reproduce identical counts.
pub fn sample_measurements(state: &StateVector, shots: u64, seed: u64) -> Result<Vec<u64>> {
    let pops = state.populations();
    let total: f64 = pops.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidState("cannot sample a zero state".into()));
    }
    let mut cumulative = Vec::with_capacity(pops.len());
    let mut acc = 0.0;
    for &p in &pops {
        acc += p / total;
        cumulative.push(acc);
    }
    // Guard the final edge against rounding.
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; pops.len()];
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let idx = cumulative.partition_point(|&c| c < u);
        counts[idx.min(pops.len() - 1)] += 1;
    }
    Ok(counts)
}

/// Fraction of samples inside the physical subspace, plus the post-selected
/// counts (out-of-subspace entries zeroed).
pub fn physicality_fraction(
    counts: &[u64],
    subspace: &PhysicalSubspace,
) -> Result<(f64, Vec<u64>)> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyPostSelection { total: 0 });
    }
    let mut kept_counts = vec![0u64; counts.len()];
    let mut kept: u64 = 0;
    for (idx, &c) in counts.iter().enumerate() {
        if subspace.contains(idx) {
            kept_counts[idx] = c;
            kept += c;
        }
    }
    if kept == 0 {
        return Err(Error::EmptyPostSelection { total });
    }
    Ok((kept as f64 / total as f64, kept_counts))
}

/// Deterministic depolarizing model on populations: each entangling pulse
/// keeps the exact distribution with probability `1 - p`, so after `n`
/// pulses the populations mix with the uniform distribution with weight
/// `λ = (1-p)^n`.
pub fn depolarized_populations(
    populations: &[f64],
    p_per_pulse: f64,
    n_pulses: u32,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p_per_pulse) {
        return Err(Error::InvalidArgument(format!(
            "depolarizing probability must be in [0,1], got {p_per_pulse}"
        )));
    }
    let lambda = (1.0 - p_per_pulse).powi(n_pulses as i32);
    let uniform = 1.0 / populations.len() as f64;
    Ok(populations
        .iter()
        .map(|&p| lambda * p + (1.0 - lambda) * uniform)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PhysicalSubspace, Sector};
    use crate::qudit::MixedRadixRegister;
    use approx::assert_relative_eq;

    fn fig_params() -> ModelParams {
        ModelParams {
            x: 1.0,
            g_par2: 2.0,
            g_perp2: 0.8,
            n_plaquettes: 3,
            sector: Sector::One,
        }
    }

    fn plus_state(reg: &MixedRadixRegister) -> StateVector {
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        StateVector::superposition(reg, &[(inv, &[4, 3, 5][..]), (inv, &[5, 4, 3][..])]).unwrap()
    }

    #[test]
    fn exact_evolution_preserves_norm_and_energy() {
        let params = fig_params();
        let terms = HamiltonianTerms::new(&params, PairForm::Original).unwrap();
        let ev = ExactEvolver::new(&terms).unwrap();
        let reg = terms.register().clone();
        let psi0 = plus_state(&reg);
        let psi_t = ev.evolve(&psi0, 3.7).unwrap();
        assert_relative_eq!(psi_t.norm(), 1.0, epsilon = 1e-12);

        // ⟨H⟩ is conserved: compare via populations against H diagonal plus
        // the full quadratic form.
        let h = terms.assemble().unwrap();
        let expect = |psi: &StateVector| -> f64 {
            let a = psi.amplitudes();
            let mut acc = 0.0;
            for r in 0..a.len() {
                for c in 0..a.len() {
                    let v = h[(r, c)];
                    if v != 0.0 {
                        acc += (a[r].conj() * a[c]).re * v;
                    }
                }
            }
            acc
        };
        assert_relative_eq!(expect(&psi0), expect(&psi_t), epsilon = 1e-10);
    }

    #[test]
    fn x_zero_leaves_flip_free_states_stationary() {
        // Kinetic coupling off: the spin-1 Hamiltonian is still NOT diagonal
        // (shared-rung flips survive), but configurations whose neighbour
        // pairs avoid the flip set must be exactly stationary.
        let params = ModelParams {
            x: 0.0,
            ..fig_params()
        };
        let reg = params.register().unwrap();
        for digits in [[5u8, 5, 5], [4, 0, 3]] {
            let psi0 = StateVector::basis(&reg, &digits).unwrap();
            let psi_t = evolve_exact(&params, &psi0, 2.1).unwrap();
            assert_relative_eq!(psi_t.population_of(&digits).unwrap(), 1.0, epsilon = 1e-12);
        }
        // ... while a flip-connected configuration moves even at x = 0.
        let psi0 = StateVector::basis(&reg, &[4, 1, 3]).unwrap();
        let psi_t = evolve_exact(&params, &psi0, 2.1).unwrap();
        assert!(
            psi_t.population_of(&[4, 1, 3]).unwrap() < 1.0 - 1e-3,
            "pair flips act at zero kinetic coupling"
        );
    }

    #[test]
    fn half_sector_is_diagonal_at_x_zero() {
        let params = ModelParams {
            x: 0.0,
            g_par2: 1.5,
            g_perp2: 1.0,
            n_plaquettes: 3,
            sector: Sector::Half,
        };
        let h = crate::model::assemble_hamiltonian(&params, PairForm::Original).unwrap();
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                if r != c {
                    assert_eq!(h[(r, c)], 0.0, "spin-1/2 H must be diagonal at x=0");
                }
            }
        }
    }

    #[test]
    fn trotter_converges_quadratically_to_exact() {
        let params = fig_params();
        let terms = HamiltonianTerms::new(&params, PairForm::Original).unwrap();
        let reg = terms.register().clone();
        let psi0 = plus_state(&reg);
        let exact = ExactEvolver::new(&terms)
            .unwrap()
            .evolve(&psi0, 1.0)
            .unwrap();
        let exact_pops = exact.populations();

        let mut errors = Vec::new();
        for m in [4usize, 8, 16] {
            let plan = TrotterPlan {
                t_total: 1.0,
                n_steps: m,
                pair_form: PairForm::Original,
            };
            let approx_state = evolve_trotter(&terms, &psi0, &plan).unwrap();
            assert_relative_eq!(approx_state.norm(), 1.0, epsilon = 1e-12);
            let err: f64 = approx_state
                .populations()
                .iter()
                .zip(&exact_pops)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        // Doubling the step count should cut the error by ~4.
        assert!(
            errors[0] / errors[1] > 3.0 && errors[1] / errors[2] > 3.0,
            "population error must scale ~ (t/m)^2, got {errors:?}"
        );
        assert!(errors[2] < 2e-3, "m=16 error too large: {}", errors[2]);
    }

    #[test]
    fn simplified_and_original_trotter_agree_on_physical_states() {
        let params = fig_params();
        let reg = params.register().unwrap();
        let psi0 = plus_state(&reg);
        let mut states = Vec::new();
        for form in [PairForm::Original, PairForm::Simplified] {
            let terms = HamiltonianTerms::new(&params, form).unwrap();
            let plan = TrotterPlan {
                t_total: 2.0,
                n_steps: 8,
                pair_form: form,
            };
            states.push(evolve_trotter(&terms, &psi0, &plan).unwrap());
        }
        // The offset phase restores full amplitude-level agreement.
        for (a, b) in states[0].amplitudes().iter().zip(states[1].amplitudes()) {
            assert!(
                (a - b).norm() < 1e-12,
                "pair-form choice must not change physical-state evolution"
            );
        }
    }

    #[test]
    fn trotter_series_records_every_step() {
        let params = fig_params();
        let terms = HamiltonianTerms::new(&params, PairForm::Original).unwrap();
        let reg = terms.register().clone();
        let psi0 = StateVector::basis(&reg, &[5, 5, 5]).unwrap();
        let plan = TrotterPlan {
            t_total: 2.0,
            n_steps: 4,
            pair_form: PairForm::Original,
        };
        let series = evolve_trotter_series(&terms, &psi0, &plan).unwrap();
        assert_eq!(series.n_rows(), 5);
        assert_relative_eq!(series.times()[4], 2.0, epsilon = 1e-15);
        let p555 = broken_string_population(&series, "555").unwrap();
        assert_relative_eq!(p555[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn csv_has_digit_labels_and_roundtrip_floats() {
        let params = fig_params();
        let terms = HamiltonianTerms::new(&params, PairForm::Original).unwrap();
        let mut series = TimeSeries::with_all_labels(terms.register()).unwrap();
        series.push_row(0.0, vec![0.0; 512]).unwrap();
        let csv = series.to_csv();
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("t,000,001,002"));
        assert!(header.ends_with(",777"));
    }

    #[test]
    fn integration_and_grid_validation() {
        let times = [0.0, 1.0, 2.0];
        let values = [1.0, 1.0, 1.0];
        assert_relative_eq!(
            time_integrated_population(&times, &values).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            time_integrated_population(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::GridError(_))
        ));
        assert!(matches!(
            uniform_time_grid(0.0, 0.0, 5),
            Err(Error::GridError(_))
        ));
        let grid = uniform_time_grid(0.0, 4.0, 161).unwrap();
        assert_eq!(grid.len(), 161);
        assert_relative_eq!(grid[160], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_post_selection_filters() {
        let params = fig_params();
        let reg = params.register().unwrap();
        // Mix a physical and an unphysical basis state.
        let mut psi = StateVector::basis(&reg, &[5, 5, 5]).unwrap();
        let unphys = reg.encode(&[0, 5, 0]).unwrap(); // pair (0,5) breaks the flux rule
        psi.amplitudes_mut()[unphys] = Complex64::new(0.6, 0.0);
        psi.normalize().unwrap();

        let c1 = sample_measurements(&psi, 4000, 99).unwrap();
        let c2 = sample_measurements(&psi, 4000, 99).unwrap();
        assert_eq!(c1, c2, "same seed must reproduce identical counts");
        assert_eq!(c1.iter().sum::<u64>(), 4000);

        let phys = PhysicalSubspace::canonical(&params).unwrap();
        let (fraction, kept) = physicality_fraction(&c1, &phys).unwrap();
        // |a|² split is 1/1.36 vs 0.36/1.36 ≈ 0.735/0.265.
        assert!(
            (fraction - 0.735).abs() < 0.03,
            "physicality fraction {fraction} far from expectation"
        );
        assert_eq!(kept[unphys], 0, "post-selection must drop unphysical hits");

        // All-unphysical counts reject everything.
        let mut bad = vec![0u64; reg.dim()];
        bad[unphys] = 7;
        assert!(matches!(
            physicality_fraction(&bad, &phys),
            Err(Error::EmptyPostSelection { total: 7 })
        ));
    }

    #[test]
    fn depolarizing_knob_limits() {
        let pops = vec![0.5, 0.25, 0.25, 0.0];
        let same = depolarized_populations(&pops, 0.0, 100).unwrap();
        assert_eq!(same, pops, "p=0 must be the identity");
        let flat = depolarized_populations(&pops, 1.0, 1).unwrap();
        for v in &flat {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-15);
        }
        let mixed = depolarized_populations(&pops, 0.01, 50).unwrap();
        assert_relative_eq!(mixed.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            depolarized_populations(&pops, 1.5, 1),
            Err(Error::InvalidArgument(_))
        ));
    }
}
