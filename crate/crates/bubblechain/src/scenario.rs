//! Scenario pipelines: each [`ScenarioKind`] maps to one experiment whose
//! outputs land on disk as CSV files plus a TOML metadata sidecar.
//!
//! All outputs are deterministic: floats are rendered with shortest
//! round-trip formatting, sampling is seeded, and parallel sweeps collect in
//! index order — running the same config twice produces byte-identical
//! files.
//!
//! The register dimension is capped by the `BUBBLECHAIN_MAX_DIM`
//! environment variable (default 2²⁰ amplitudes) so a typo in
//! `n_plaquettes` fails fast instead of exhausting memory.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::compile::{
    compile_trotter_circuit, qubit_embedding_estimate, CompileOptions, GateCountReport,
};
use crate::config::{
    CompileConfig, EvolutionMethod, InitialStateSpec, SamplingConfig, ScenarioConfig, ScenarioKind,
    StatePreset,
};
use crate::effective::{
    analytic_populations_plus, compare_to_full, manifold_mapping, minus_state_check,
    rabi_frequency, BAND_SIZE,
};
use crate::error::Error;
use crate::evolve::{
    evolve_trotter, sample_measurements, time_integrated_population, uniform_time_grid,
    ExactEvolver, TimeSeries, TrotterPlan,
};
use crate::model::{
    derive_reflection, identify_string_states, reflect_index, resonance_ratio, HamiltonianTerms,
    ModelParams, PairForm, PhysicalSubspace, StringStates,
};
use crate::qudit::{MixedRadixRegister, StateVector, DEFAULT_MAX_DIM};
use crate::Result;

/// What a run produced: the files written and a human-readable recap.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Executes a validated config and writes its outputs.
pub fn run(config: &ScenarioConfig) -> Result<RunOutcome> {
    run_with_cap(config, dimension_cap()?)
}

/// [`run`] with an explicit register-size cap instead of the environment's.
pub fn run_with_cap(config: &ScenarioConfig, cap: usize) -> Result<RunOutcome> {
    config.validate()?;
    match config.scenario {
        ScenarioKind::Fluctuations => run_fluctuations(config, cap),
        ScenarioKind::Breaking => run_breaking(config, cap),
        ScenarioKind::ResonanceScan => run_resonance_scan(config, cap),
        ScenarioKind::Gatecount => run_gatecount(config, cap),
        ScenarioKind::EffectiveCompare => run_effective_compare(config, cap),
        ScenarioKind::FullPopulations => run_full_populations(config, cap),
    }
}

/// Register-size cap from `BUBBLECHAIN_MAX_DIM`, if set.
fn dimension_cap() -> Result<usize> {
    match std::env::var("BUBBLECHAIN_MAX_DIM") {
        Ok(text) => parse_cap(&text),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_MAX_DIM),
        Err(e) => Err(Error::ConfigError(format!("BUBBLECHAIN_MAX_DIM: {e}"))),
    }
}

fn parse_cap(text: &str) -> Result<usize> {
    text.trim().parse::<usize>().map_err(|_| {
        Error::ConfigError(format!(
            "BUBBLECHAIN_MAX_DIM must be a positive integer, got '{text}'"
        ))
    })
}

// --- shared plumbing --------------------------------------------------------------

/// Collects output files as they are written.
struct OutputSink {
    dir: PathBuf,
    prefix: String,
    files: Vec<PathBuf>,
}

impl OutputSink {
    fn new(config: &ScenarioConfig) -> Self {
        Self {
            dir: config.output.dir.clone(),
            prefix: config.prefix(),
            files: Vec::new(),
        }
    }

    fn write(&mut self, stem: &str, text: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}_{stem}", self.prefix));
        std::fs::write(&path, text)?;
        self.files.push(path.clone());
        Ok(path)
    }

    /// Serializes the config echo plus scenario-specific result scalars.
    fn write_metadata(&mut self, config: &ScenarioConfig, results: toml::Table) -> Result<()> {
        #[derive(serde::Serialize)]
        struct RunMetadata<'a> {
            generator: String,
            config: &'a ScenarioConfig,
            results: toml::Table,
        }
        let meta = RunMetadata {
            generator: format!("bubblechain {}", env!("CARGO_PKG_VERSION")),
            config,
            results,
        };
        let text = toml::to_string_pretty(&meta)
            .map_err(|e| Error::ConfigError(format!("metadata serialization: {e}")))?;
        self.write("meta.toml", &text)?;
        Ok(())
    }

    fn finish(self, summary: String) -> RunOutcome {
        RunOutcome {
            files: self.files,
            summary,
        }
    }
}

/// States along the configured time grid, by the configured integrator.
fn evolved_states(
    config: &ScenarioConfig,
    psi0: &StateVector,
    times: &[f64],
    cap: usize,
) -> Result<Vec<StateVector>> {
    let params = &config.model;
    match config.evolution.method {
        EvolutionMethod::Exact => {
            let terms = HamiltonianTerms::with_cap(params, PairForm::Original, cap)?;
            let evolver = ExactEvolver::new(&terms)?;
            times.iter().map(|&t| evolver.evolve(psi0, t)).collect()
        }
        EvolutionMethod::Trotter => {
            let form = config.evolution.pair_form;
            let terms = HamiltonianTerms::with_cap(params, form, cap)?;
            times
                .iter()
                .map(|&t| {
                    let plan = TrotterPlan {
                        t_total: t,
                        n_steps: config.evolution.n_steps,
                        pair_form: form,
                    };
                    evolve_trotter(&terms, psi0, &plan)
                })
                .collect()
        }
    }
}

/// Resolves the configured initial state, or the scenario's default preset.
fn resolve_initial(
    params: &ModelParams,
    reg: &MixedRadixRegister,
    spec: Option<&InitialStateSpec>,
    states: &StringStates,
    default: StatePreset,
) -> Result<StateVector> {
    match spec {
        None => preset_state(params, reg, states, default),
        Some(s) => match (&s.preset, &s.expr) {
            (Some(p), None) => preset_state(params, reg, states, *p),
            (None, Some(e)) => crate::config::parse_state_expr(reg, e),
            // validate() has already rejected the other combinations
            _ => Err(Error::ConfigError(
                "initial_state needs exactly one of preset/expr".into(),
            )),
        },
    }
}

fn preset_state(
    params: &ModelParams,
    reg: &MixedRadixRegister,
    states: &StringStates,
    preset: StatePreset,
) -> Result<StateVector> {
    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match preset {
        StatePreset::Vacuum => StateVector::basis(reg, &vec![0; params.n_plaquettes]),
        StatePreset::String => StateVector::basis(reg, &states.string),
        StatePreset::Broken => {
            let broken = states.broken.as_ref().ok_or_else(|| {
                Error::ConfigError("this sector has no broken-string state".into())
            })?;
            StateVector::basis(reg, broken)
        }
        StatePreset::DressedPlus | StatePreset::DressedMinus => {
            let (left, right) = states.dressed.as_ref().ok_or_else(|| {
                Error::ConfigError("this model has no dressed-pair states".into())
            })?;
            let sign = if preset == StatePreset::DressedPlus {
                inv
            } else {
                -inv
            };
            StateVector::superposition(reg, &[(inv, left.as_slice()), (sign, right.as_slice())])
        }
    }
}

/// Samples the final state, writes `<prefix>_sampled.csv`, and reports the
/// kept fraction for metadata.
fn write_samples(
    sink: &mut OutputSink,
    results: &mut toml::Table,
    sampling: &SamplingConfig,
    params: &ModelParams,
    reg: &MixedRadixRegister,
    final_state: &StateVector,
) -> Result<()> {
    let raw = sample_measurements(final_state, sampling.shots, sampling.seed)?;
    let (counts, kept_fraction) = if sampling.post_select {
        let subspace = PhysicalSubspace::canonical(params)?;
        let (fraction, kept) = crate::evolve::physicality_fraction(&raw, &subspace)?;
        (kept, fraction)
    } else {
        (raw, 1.0)
    };
    let mut csv = String::from("state,count\n");
    for (idx, &c) in counts.iter().enumerate() {
        if c > 0 {
            csv.push_str(&format!("{},{c}\n", reg.label(idx)?));
        }
    }
    sink.write("sampled.csv", &csv)?;
    results.insert("shots".into(), toml::Value::Integer(sampling.shots as i64));
    results.insert("seed".into(), toml::Value::Integer(sampling.seed as i64));
    results.insert("kept_fraction".into(), toml::Value::Float(kept_fraction));
    Ok(())
}

fn max_with_time(times: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = (0.0, f64::MIN);
    for (&t, &v) in times.iter().zip(values) {
        if v > best.1 {
            best = (t, v);
        }
    }
    (best.0, best.1)
}

// --- pipelines --------------------------------------------------------------------

/// Spin-1/2 chain: populations of the six-state excitation band over time,
/// next to the closed-form predictions for the symmetric start.
fn run_fluctuations(config: &ScenarioConfig, cap: usize) -> Result<RunOutcome> {
    let params = &config.model;
    let map = manifold_mapping(params)?;
    let reg = params.register_with_cap(cap)?;

    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut band0 = [Complex64::ZERO; BAND_SIZE];
    band0[2] = inv;
    band0[3] = inv;
    let psi0 = map.lift(params, &band0)?;

    let times = uniform_time_grid(0.0, config.evolution.t_max, config.evolution.n_points)?;
    let states = evolved_states(config, &psi0, &times, cap)?;

    let labels: Vec<String> = map
        .indices
        .iter()
        .map(|&idx| reg.label(idx))
        .collect::<Result<_>>()?;
    let mut band = TimeSeries::new(labels.clone());
    for (state, &t) in states.iter().zip(&times) {
        band.push_row(t, map.band_populations(state).to_vec())?;
    }
    let mut analytic = TimeSeries::new(labels);
    for (row, &t) in analytic_populations_plus(params.x, &times)?
        .iter()
        .zip(&times)
    {
        analytic.push_row(t, row.to_vec())?;
    }

    let final_weight: f64 = map
        .band_populations(states.last().expect("grid is non-empty"))
        .iter()
        .sum();
    let check = minus_state_check(params.x);

    let mut sink = OutputSink::new(config);
    sink.write("band.csv", &band.to_csv())?;
    sink.write("analytic.csv", &analytic.to_csv())?;
    let mut results = toml::Table::new();
    results.insert(
        "rabi_frequency".into(),
        toml::Value::Float(rabi_frequency(params.x)),
    );
    results.insert("final_band_weight".into(), toml::Value::Float(final_weight));
    results.insert(
        "minus_state_residual".into(),
        toml::Value::Float(check.residual_norm),
    );
    sink.write_metadata(config, results)?;

    let summary = format!(
        "fluctuations: {} points to t = {}; band weight at the end {:.4}; \
         Rabi frequency {:.6}",
        times.len(),
        config.evolution.t_max,
        final_weight,
        rabi_frequency(params.x),
    );
    Ok(sink.finish(summary))
}

/// String breaking: string, broken-string and dressed populations.
fn run_breaking(config: &ScenarioConfig, cap: usize) -> Result<RunOutcome> {
    let params = &config.model;
    let reg = params.register_with_cap(cap)?;
    let states = identify_string_states(params)?;
    let broken = states.broken.clone().ok_or_else(|| {
        Error::ConfigError("breaking needs charge levels; use sector = \"one\"".into())
    })?;
    let (dressed_l, dressed_r) = states
        .dressed
        .clone()
        .ok_or_else(|| Error::ConfigError("breaking needs at least three plaquettes".into()))?;

    let psi0 = resolve_initial(
        params,
        &reg,
        config.initial_state.as_ref(),
        &states,
        StatePreset::DressedPlus,
    )?;
    let times = uniform_time_grid(0.0, config.evolution.t_max, config.evolution.n_points)?;
    let evolved = evolved_states(config, &psi0, &times, cap)?;

    let string_idx = reg.encode(&states.string)?;
    let broken_idx = reg.encode(&broken)?;
    let dressed_idx = (reg.encode(&dressed_l)?, reg.encode(&dressed_r)?);
    let mut series = TimeSeries::new(vec!["string".into(), "broken".into(), "dressed".into()]);
    for (state, &t) in evolved.iter().zip(&times) {
        let pops = state.populations();
        series.push_row(
            t,
            vec![
                pops[string_idx],
                pops[broken_idx],
                pops[dressed_idx.0] + pops[dressed_idx.1],
            ],
        )?;
    }

    let broken_col = series.column("broken")?;
    let (t_peak, p_peak) = max_with_time(&times, &broken_col);

    let mut sink = OutputSink::new(config);
    sink.write("populations.csv", &series.to_csv())?;
    let mut results = toml::Table::new();
    results.insert("max_broken_population".into(), toml::Value::Float(p_peak));
    results.insert("max_broken_time".into(), toml::Value::Float(t_peak));
    if let Some(sampling) = &config.sampling {
        write_samples(
            &mut sink,
            &mut results,
            sampling,
            params,
            &reg,
            evolved.last().expect("grid is non-empty"),
        )?;
    }
    sink.write_metadata(config, results)?;

    let summary = format!(
        "breaking: {} points to t = {}; broken-string population peaks at {:.4} (t = {})",
        times.len(),
        config.evolution.t_max,
        p_peak,
        t_peak,
    );
    Ok(sink.finish(summary))
}

/// Coupling sweep: time-integrated broken-string population against the
/// rung/ladder coupling ratio, peaked at the string–broken degeneracy.
fn run_resonance_scan(config: &ScenarioConfig, cap: usize) -> Result<RunOutcome> {
    let params = &config.model;
    let scan = config.scan.as_ref().expect("validated: scan present");
    let states = identify_string_states(params)?;
    let broken = states.broken.clone().ok_or_else(|| {
        Error::ConfigError("resonance-scan needs charge levels; use sector = \"one\"".into())
    })?;
    let reg = params.register_with_cap(cap)?;
    let broken_idx = reg.encode(&broken)?;

    let ratios = scan.ratios();
    let times = uniform_time_grid(0.0, scan.t_max, scan.n_points)?;
    let mut integrated: Vec<f64> = ratios
        .par_iter()
        .map(|&ratio| -> Result<f64> {
            let swept = ModelParams {
                g_perp2: ratio * params.g_par2,
                ..params.clone()
            };
            let terms = HamiltonianTerms::with_cap(&swept, PairForm::Original, cap)?;
            let evolver = ExactEvolver::new(&terms)?;
            let psi0 = StateVector::basis(terms.register(), &states.string)?;
            let mut column = Vec::with_capacity(times.len());
            for &t in &times {
                column.push(evolver.evolve(&psi0, t)?.amplitudes()[broken_idx].norm_sqr());
            }
            Ok(time_integrated_population(&times, &column)? / scan.t_max)
        })
        .collect::<Result<_>>()?;

    let raw_peak = integrated.iter().cloned().fold(f64::MIN, f64::max);
    if scan.normalize && raw_peak > 0.0 {
        for v in &mut integrated {
            *v /= raw_peak;
        }
    }
    let (peak_ratio, peak_value) = max_with_time(&ratios, &integrated);

    let mut csv = String::from("ratio,integrated\n");
    for (&r, &v) in ratios.iter().zip(&integrated) {
        csv.push_str(&format!("{r:?},{v:?}\n"));
    }

    let mut sink = OutputSink::new(config);
    sink.write("scan.csv", &csv)?;
    let mut results = toml::Table::new();
    results.insert("peak_ratio".into(), toml::Value::Float(peak_ratio));
    results.insert("peak_value".into(), toml::Value::Float(peak_value));
    results.insert("raw_peak_integral".into(), toml::Value::Float(raw_peak));
    if let Ok(predicted) = resonance_ratio(params.n_plaquettes) {
        results.insert("predicted_ratio".into(), toml::Value::Float(predicted));
    }
    sink.write_metadata(config, results)?;

    let summary = format!(
        "resonance-scan: {} ratios in [{}, {}]; integrated breaking peaks at ratio {}",
        ratios.len(),
        scan.ratio_min,
        scan.ratio_max,
        peak_ratio,
    );
    Ok(sink.finish(summary))
}

/// Circuit budget: entangling gates and pulses of compiled fixed-step
/// circuits as the simulated duration grows.
fn run_gatecount(config: &ScenarioConfig, _cap: usize) -> Result<RunOutcome> {
    let params = &config.model;
    let compile_cfg: &CompileConfig = config.compile.as_ref().expect("validated: compile present");
    let opts = CompileOptions {
        max_angle: compile_cfg.max_angle,
        respect_physicality: compile_cfg.respect_physicality,
    };
    opts.validate()?;
    let phys = if compile_cfg.respect_physicality {
        Some(PhysicalSubspace::canonical(params)?)
    } else {
        None
    };

    let times = compile_cfg.times();
    let mut csv = String::from(
        "t,local_gates,xx_gates,zz_gates,entangling_gates,xx_pulses,zz_pulses,entangling_pulses\n",
    );
    let mut last: Option<(TrotterPlan, GateCountReport, String)> = None;
    for &t in &times {
        let plan = TrotterPlan {
            t_total: t,
            n_steps: compile_cfg.n_steps,
            pair_form: compile_cfg.pair_form,
        };
        let seq = compile_trotter_circuit(params, &plan, phys.as_ref(), &opts)?;
        let report = seq.count_report()?;
        csv.push_str(&format!(
            "{t:?},{},{},{},{},{},{},{}\n",
            report.local_gates,
            report.xx_gates,
            report.zz_gates,
            report.entangling_gates,
            report.xx_pulses,
            report.zz_pulses,
            report.entangling_pulses,
        ));
        last = Some((plan, report, seq.write_text()));
    }
    let (last_plan, last_report, gate_text) =
        last.expect("compile.times() is non-empty after validation");

    let mut sink = OutputSink::new(config);
    sink.write("counts.csv", &csv)?;
    sink.write("gates.txt", &gate_text)?;
    let mut results = toml::Table::new();
    results.insert(
        "final_entangling_pulses".into(),
        toml::Value::Integer(last_report.entangling_pulses as i64),
    );
    results.insert(
        "final_entangling_gates".into(),
        toml::Value::Integer(last_report.entangling_gates as i64),
    );
    if compile_cfg.qubit_estimate {
        let estimate = qubit_embedding_estimate(params, &last_plan)?;
        results.insert(
            "qubits_per_site".into(),
            toml::Value::Integer(estimate.qubits_per_site as i64),
        );
        results.insert(
            "total_qubits".into(),
            toml::Value::Integer(estimate.total_qubits as i64),
        );
        results.insert(
            "qubit_gates_per_step".into(),
            toml::Value::Integer(estimate.per_step as i64),
        );
        results.insert(
            "qubit_gates_total".into(),
            toml::Value::Integer(estimate.total as i64),
        );
        results.insert(
            "qubit_overhead".into(),
            toml::Value::Float(estimate.overhead_vs(last_report.entangling_pulses)),
        );
    }
    sink.write_metadata(config, results)?;

    let summary = format!(
        "gatecount: {} circuits up to t = {}; final circuit uses {} entangling pulses \
         ({} gates)",
        times.len(),
        compile_cfg.t_max,
        last_report.entangling_pulses,
        last_report.entangling_gates,
    );
    Ok(sink.finish(summary))
}

/// Band-model validation: exact full-model populations of the six band
/// configurations against the closed forms, with the worst deviation.
fn run_effective_compare(config: &ScenarioConfig, cap: usize) -> Result<RunOutcome> {
    let params = &config.model;
    let reg = params.register_with_cap(cap)?;
    let times = uniform_time_grid(0.0, config.evolution.t_max, config.evolution.n_points)?;
    let comparison = compare_to_full(params, &times)?;
    let map = manifold_mapping(params)?;

    let mut labels: Vec<String> = Vec::with_capacity(2 * BAND_SIZE);
    for &idx in &map.indices {
        labels.push(reg.label(idx)?);
    }
    for &idx in &map.indices {
        labels.push(format!("pred_{}", reg.label(idx)?));
    }
    let mut series = TimeSeries::new(labels);
    for (row, &t) in times.iter().enumerate() {
        let mut values = Vec::with_capacity(2 * BAND_SIZE);
        values.extend_from_slice(&comparison.full[row]);
        values.extend_from_slice(&comparison.band[row]);
        series.push_row(t, values)?;
    }

    let mut sink = OutputSink::new(config);
    sink.write("compare.csv", &series.to_csv())?;
    let mut results = toml::Table::new();
    results.insert(
        "max_abs_deviation".into(),
        toml::Value::Float(comparison.max_abs_deviation),
    );
    results.insert(
        "rabi_frequency".into(),
        toml::Value::Float(rabi_frequency(params.x)),
    );
    sink.write_metadata(config, results)?;

    let summary = format!(
        "effective-compare: {} points to t = {}; worst band deviation {:.3e}",
        times.len(),
        config.evolution.t_max,
        comparison.max_abs_deviation,
    );
    Ok(sink.finish(summary))
}

/// Every register population over time, reflection partners merged.
fn run_full_populations(config: &ScenarioConfig, cap: usize) -> Result<RunOutcome> {
    let params = &config.model;
    let reg = params.register_with_cap(cap)?;
    let states = identify_string_states(params)?;
    let psi0 = resolve_initial(
        params,
        &reg,
        config.initial_state.as_ref(),
        &states,
        StatePreset::Vacuum,
    )?;
    let times = uniform_time_grid(0.0, config.evolution.t_max, config.evolution.n_points)?;
    let evolved = evolved_states(config, &psi0, &times, cap)?;

    let mut raw = TimeSeries::with_all_labels(&reg)?;
    for (state, &t) in evolved.iter().zip(&times) {
        raw.push_row(t, state.populations())?;
    }
    let merged = aggregate_symmetric(&raw, &reg, params)?;

    let mut sink = OutputSink::new(config);
    sink.write("populations.csv", &merged.to_csv())?;
    let mut results = toml::Table::new();
    results.insert(
        "tracked_columns".into(),
        toml::Value::Integer(merged.labels().len() as i64),
    );
    if let Some(sampling) = &config.sampling {
        write_samples(
            &mut sink,
            &mut results,
            sampling,
            params,
            &reg,
            evolved.last().expect("grid is non-empty"),
        )?;
    }
    sink.write_metadata(config, results)?;

    let summary = format!(
        "full-populations: {} points to t = {}; {} columns after merging \
         reflection partners",
        times.len(),
        config.evolution.t_max,
        merged.labels().len(),
    );
    Ok(sink.finish(summary))
}

/// Merges columns of reflection-partner configurations: each pair of basis
/// states exchanged by the chain reflection collapses into one column,
/// labelled by the smaller index and holding the summed population.
///
/// Reflection-symmetric dynamics populate both partners identically, so the
/// merged table halves the redundancy without losing information.
pub fn aggregate_symmetric(
    series: &TimeSeries,
    reg: &MixedRadixRegister,
    params: &ModelParams,
) -> Result<TimeSeries> {
    let dim = reg.dim();
    if series.labels().len() != dim {
        return Err(Error::InvalidArgument(format!(
            "aggregate_symmetric needs one column per basis state ({} != {dim})",
            series.labels().len()
        )));
    }
    let rho = derive_reflection(params.sector)?;
    let mut representative = Vec::with_capacity(dim);
    let mut column_of = vec![usize::MAX; dim];
    for idx in 0..dim {
        let partner = reflect_index(reg, &rho, idx)?;
        let rep = idx.min(partner);
        if rep == idx {
            column_of[idx] = representative.len();
            representative.push(idx);
        } else {
            column_of[idx] = column_of[rep];
        }
    }
    let labels: Vec<String> = representative
        .iter()
        .map(|&idx| reg.label(idx))
        .collect::<Result<_>>()?;
    let mut merged = TimeSeries::new(labels);
    for (row, &t) in series.times().iter().enumerate() {
        let mut values = vec![0.0; representative.len()];
        for idx in 0..dim {
            values[column_of[idx]] += series.row(row)[idx];
        }
        merged.push_row(t, values)?;
    }
    Ok(merged)
}
