//! Experiment definitions and the pipelines that run them.

use std::ops::Range;

use molcom_core::channel::DecayMethod;
use molcom_core::detect::{bit_error_prob_at, first_bit_detection, mean_error_sweep, random_bits, SamplingTime, SequenceAverage};
use molcom_core::{decay_time, expected_observed, BitSequence, ChannelModel, CountFamily, DecayQuery, IsiMode, SystemConfig};
use molcom_sim::trial::to_steps;
use molcom_sim::{run_trial, trial_seed, SampleSchedule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::table::{Metadata, ResultTable};
use crate::{Error, Result};

/// Default cap on simulated particle-steps per run.
pub const DEFAULT_BUDGET: f64 = 1e11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ImpulseResponse,
    DecayInterval,
    FirstBitDetection,
    KnownSequenceError,
    ThresholdSweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    /// Preset name or path to a config file.
    pub system: String,
    pub mode: Mode,
    /// Simulated trials (per sequence, for sequence errors).
    pub trials: u64,
    /// Index of the first trial; shards of one run use disjoint ranges.
    pub trial_offset: u64,
    pub sequences: usize,
    pub n_bits: usize,
    pub thresholds: Vec<u64>,
    pub t_b_us: Vec<f64>,
    pub enzymes: bool,
    pub master_seed: u64,
    pub simulate: bool,
    /// Zero every rate constant and remove the enzymes.
    pub diffusion_only: bool,
    pub family: CountFamily,
    pub isi: IsiMode,
    /// Fixed bit string for sequence errors; random sequences when absent.
    pub sequence: Option<String>,
    pub times_us: Vec<f64>,
    pub alphas: Vec<f64>,
    pub budget: f64,
}

impl ExperimentSpec {
    pub fn new(mode: Mode, system: &str) -> Self {
        Self {
            name: format!("{mode:?}").to_lowercase(),
            system: system.to_string(),
            mode,
            trials: 1000,
            trial_offset: 0,
            sequences: 1000,
            n_bits: 50,
            thresholds: (1..=10).collect(),
            t_b_us: vec![120.0],
            enzymes: true,
            master_seed: 1,
            simulate: false,
            diffusion_only: false,
            family: CountFamily::Poisson,
            isi: IsiMode::Full,
            sequence: None,
            times_us: (1..=40).map(|i| 5.0 * i as f64).collect(),
            alphas: (1..20).map(|i| i as f64 / 20.0).collect(),
            budget: DEFAULT_BUDGET,
        }
    }

    /// The same experiment with the trial range erased, for comparing shards.
    pub fn without_shard(&self) -> Self {
        Self { trials: 0, trial_offset: 0, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if matches!(self.mode, Mode::FirstBitDetection | Mode::KnownSequenceError | Mode::ThresholdSweep)
            && self.thresholds.is_empty()
        {
            return bad("thresholds must not be empty");
        }
        if self.t_b_us.is_empty() || self.t_b_us.iter().any(|&t| !(t > 0.0)) {
            return bad("bit intervals must be positive");
        }
        if self.n_bits == 0 || self.sequences == 0 {
            return bad("need at least one bit and one sequence");
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad("alphas must lie strictly between 0 and 1");
        }
        if self.times_us.is_empty() || self.times_us.iter().any(|&t| !(t > 0.0)) {
            return bad("sample times must be positive");
        }
        if !(self.budget > 0.0) {
            return bad("budget must be positive");
        }
        Ok(())
    }

    pub fn load_config(&self) -> Result<SystemConfig> {
        Ok(SystemConfig::load(&self.system)?)
    }
}

/// SHA-256 of the canonical text form of `cfg`, hex encoded.
pub fn config_hash(cfg: &SystemConfig) -> String {
    let text = cfg.to_file().to_toml_string();
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

fn metadata(cfg: &SystemConfig, spec: Option<&ExperimentSpec>, seed: u64) -> Metadata {
    Metadata {
        config_hash: config_hash(cfg),
        master_seed: seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.cloned(),
    }
}

/// Config seen by the analytic model.
fn analytic_config(cfg: &SystemConfig, spec: &ExperimentSpec) -> SystemConfig {
    if spec.diffusion_only {
        cfg.diffusion_only()
    } else {
        cfg.clone()
    }
}

/// Config driving the particles.
fn sim_config(cfg: &SystemConfig, spec: &ExperimentSpec) -> SystemConfig {
    if spec.diffusion_only {
        cfg.diffusion_only()
    } else if spec.enzymes {
        cfg.clone()
    } else {
        cfg.without_enzymes()
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let cfg = spec.load_config()?;
    log::info!("running {} on {} (simulate: {})", spec.name, spec.system, spec.simulate);
    let mut table = match spec.mode {
        Mode::ImpulseResponse => impulse_response(&cfg, spec)?,
        Mode::DecayInterval => decay_interval(&cfg, spec)?,
        Mode::FirstBitDetection => first_bit(&cfg, spec)?,
        Mode::KnownSequenceError => sequence_error(&cfg, spec)?,
        Mode::ThresholdSweep => threshold_sweep(&cfg, spec)?,
    };
    table.finalize();
    Ok(table)
}

fn check_budget(spec: &ExperimentSpec, per_trial: f64, units_per_trial: f64) -> Result<()> {
    let estimate = spec.trials as f64 * units_per_trial * per_trial;
    if estimate > spec.budget {
        let suggested_trials = (spec.budget / (units_per_trial * per_trial)).floor() as u64;
        return Err(Error::Budget { estimate, cap: spec.budget, suggested_trials });
    }
    Ok(())
}

fn trial_range(spec: &ExperimentSpec) -> Range<u64> {
    spec.trial_offset..spec.trial_offset + spec.trials
}

/// Per-row sums `[n, Σx, Σx²]` of `f` over `units`. Integer sums make the
/// reduction exact, so the result is independent of scheduling.
fn accumulate<F>(units: Range<u64>, rows: usize, f: F) -> Result<Vec<[u64; 3]>>
where
    F: Fn(u64) -> Result<Vec<Option<u64>>> + Sync,
{
    units
        .into_par_iter()
        .map(|u| {
            let values = f(u)?;
            let mut acc = vec![[0u64; 3]; rows];
            for (slot, v) in acc.iter_mut().zip(values) {
                if let Some(x) = v {
                    *slot = [1, x, x * x];
                }
            }
            Ok(acc)
        })
        .try_reduce(
            || vec![[0u64; 3]; rows],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x[0] += y[0];
                    x[1] += y[1];
                    x[2] += y[2];
                }
                Ok(a)
            },
        )
}

fn stat_cells(acc: [u64; 3]) -> [f64; 5] {
    // Mean and standard error are filled in by `ResultTable::finalize`.
    [acc[0] as f64, acc[1] as f64, acc[2] as f64, 0.0, 0.0]
}

fn with_stats(base: &[&str], prefix: &str, simulate: bool) -> Vec<String> {
    let mut cols: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    if simulate {
        for suffix in ["n", "sum", "sumsq", "mean", "stderr"] {
            cols.push(format!("{prefix}_{suffix}"));
        }
    }
    cols
}

fn new_table(cols: Vec<String>, meta: Metadata) -> ResultTable {
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    ResultTable::new(&refs, meta)
}

fn impulse_response(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<ResultTable> {
    let acfg = analytic_config(cfg, spec);
    let with = ChannelModel::new(&acfg, true);
    let without = ChannelModel::new(&acfg, false);
    let mut table = new_table(
        with_stats(&["t_us", "analytic_lb", "analytic_noenzyme"], "sim", spec.simulate),
        metadata(cfg, Some(spec), spec.master_seed),
    );

    let mut sims = Vec::new();
    if spec.simulate {
        let scfg = sim_config(cfg, spec);
        let times: Vec<f64> = spec.times_us.iter().map(|t| t * 1e-6).collect();
        let schedule = SampleSchedule::from_times(&times, scfg.dt)?;
        if schedule.len() != times.len() {
            return Err(Error::Config("sample times must be distinct steps".into()));
        }
        // Sample order follows the sorted schedule; map back to row order.
        let order: Vec<usize> = times
            .iter()
            .map(|&t| {
                let k = to_steps(t, scfg.dt).expect("validated above");
                schedule.steps().binary_search(&k).expect("present")
            })
            .collect();
        let horizon = schedule.horizon().unwrap_or(0) as f64;
        check_budget(spec, horizon * (scfg.n_enzyme + scfg.n_emit) as f64, 1.0)?;
        let seq = BitSequence::parse("1", horizon * scfg.dt + scfg.dt)?;
        sims = accumulate(trial_range(spec), times.len(), |i| {
            let s = run_trial(&scfg, &seq, &schedule, trial_seed(spec.master_seed, i))?;
            Ok(order.iter().map(|&k| Some(s.counts[k])).collect())
        })?;
    }

    for (r, &t_us) in spec.times_us.iter().enumerate() {
        let t = t_us * 1e-6;
        let mut row = vec![t_us, expected_observed(t, &with)?, expected_observed(t, &without)?];
        if spec.simulate {
            row.extend(stat_cells(sims[r]));
        }
        table.push(row);
    }
    Ok(table)
}

fn decay_interval(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<ResultTable> {
    if spec.simulate {
        return Err(Error::Config("decay intervals are analytic only".into()));
    }
    let acfg = analytic_config(cfg, spec);
    let with = ChannelModel::new(&acfg, true);
    let without = ChannelModel::new(&acfg, false);
    let mut table = ResultTable::new(
        &["alpha", "numeric_enz_us", "bound_enz_us", "numeric_noenz_us", "bound_noenz_us"],
        metadata(cfg, Some(spec), spec.master_seed),
    );
    for &alpha in &spec.alphas {
        let t = |m: &ChannelModel, method| -> Result<f64> { Ok(decay_time(m, DecayQuery::new(alpha, method)?)? * 1e6) };
        table.push(vec![
            alpha,
            t(&with, DecayMethod::NumericScan)?,
            t(&with, DecayMethod::ClosedFormBound)?,
            t(&without, DecayMethod::NumericScan)?,
            t(&without, DecayMethod::ClosedFormBound)?,
        ]);
    }
    Ok(table)
}

fn first_bit(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<ResultTable> {
    let acfg = analytic_config(cfg, spec);
    let model = ChannelModel::new(&acfg, spec.enzymes);
    let mut table = new_table(
        with_stats(&["xi", "binomial", "poisson", "gaussian"], "sim_detect", spec.simulate),
        metadata(cfg, Some(spec), spec.master_seed),
    );

    let mut sims = Vec::new();
    if spec.simulate {
        let scfg = sim_config(cfg, spec);
        let k = model.t_max_steps();
        let schedule = SampleSchedule::from_steps(vec![k]);
        check_budget(spec, k as f64 * (scfg.n_enzyme + scfg.n_emit) as f64, 1.0)?;
        let seq = BitSequence::parse("1", (k + 1) as f64 * scfg.dt)?;
        let thresholds = spec.thresholds.clone();
        sims = accumulate(trial_range(spec), thresholds.len(), |i| {
            let n = run_trial(&scfg, &seq, &schedule, trial_seed(spec.master_seed, i))?.counts[0];
            Ok(thresholds.iter().map(|&xi| Some(u64::from(n >= xi))).collect())
        })?;
    }

    for (r, &xi) in spec.thresholds.iter().enumerate() {
        let p = |fam| first_bit_detection(&model, xi, fam, SamplingTime::Exact);
        let mut row = vec![xi as f64, p(CountFamily::Binomial)?, p(CountFamily::Poisson)?, p(CountFamily::Gaussian)?];
        if spec.simulate {
            row.extend(stat_cells(sims[r]));
        }
        table.push(row);
    }
    Ok(table)
}

/// Sequences used by the sequence-error mode.
pub fn sequences_for(spec: &ExperimentSpec, cfg: &SystemConfig) -> Result<Vec<BitSequence>> {
    let tb = spec.t_b_us[0] * 1e-6;
    match &spec.sequence {
        Some(s) => Ok(vec![BitSequence::parse(s, tb)?]),
        None => (0..spec.sequences as u64)
            .map(|i| Ok(BitSequence::new(random_bits(spec.master_seed, i, spec.n_bits, cfg.p1), tb)?))
            .collect(),
    }
}

fn sequence_error(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<ResultTable> {
    let acfg = analytic_config(cfg, spec);
    let model = ChannelModel::new(&acfg, spec.enzymes);
    let seqs = sequences_for(spec, cfg)?;
    let xis = &spec.thresholds;
    let mut table = new_table(
        with_stats(&["sequence", "bit", "value", "xi", "analytic_pe"], "sim_error", spec.simulate),
        metadata(cfg, Some(spec), spec.master_seed),
    );
    let offsets: Vec<usize> = seqs.iter().scan(0, |acc, s| {
        let o = *acc;
        *acc += s.len() * xis.len();
        Some(o)
    }).collect();
    let rows = seqs.iter().map(|s| s.len() * xis.len()).sum();

    let mut sims = Vec::new();
    if spec.simulate {
        let scfg = sim_config(cfg, spec);
        let peak = model.t_max_steps();
        let schedules = seqs
            .iter()
            .map(|s| SampleSchedule::detection(s, scfg.dt, peak))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let work: f64 = seqs
            .iter()
            .zip(&schedules)
            .map(|(s, sch)| {
                let ones = s.bits().iter().filter(|&&b| b).count() as u64;
                sch.horizon().unwrap_or(0) as f64 * (scfg.n_enzyme + scfg.n_emit * ones) as f64
            })
            .sum();
        check_budget(spec, work, 1.0)?;
        // Unit u covers trial u % trials of sequence u / trials.
        let per_seq = spec.trials;
        let units = 0..seqs.len() as u64 * per_seq;
        sims = accumulate(units, rows, |u| {
            let (si, ti) = ((u / per_seq) as usize, spec.trial_offset + u % per_seq);
            let seq = &seqs[si];
            let seed = trial_seed(spec.master_seed, ((si as u64) << 32) | ti);
            let obs = run_trial(&scfg, seq, &schedules[si], seed)?;
            let mut out = vec![None; rows];
            for (j, (&n, &bit)) in obs.counts.iter().zip(seq.bits()).enumerate() {
                for (x, &xi) in xis.iter().enumerate() {
                    out[offsets[si] + j * xis.len() + x] = Some(u64::from((n >= xi) != bit));
                }
            }
            Ok(out)
        })?;
    }

    for (si, seq) in seqs.iter().enumerate() {
        for j in 0..seq.len() {
            for (x, &xi) in xis.iter().enumerate() {
                let pe = bit_error_prob_at(j, seq, &model, xi, spec.family, spec.isi, SamplingTime::StepAligned)?;
                let mut row = vec![si as f64, j as f64, f64::from(u8::from(seq.bits()[j])), xi as f64, pe];
                if spec.simulate {
                    row.extend(stat_cells(sims[offsets[si] + j * xis.len() + x]));
                }
                table.push(row);
            }
        }
    }
    Ok(table)
}

fn threshold_sweep(cfg: &SystemConfig, spec: &ExperimentSpec) -> Result<ResultTable> {
    if spec.simulate {
        return Err(Error::Config("threshold sweeps are analytic; simulate sequence errors instead".into()));
    }
    let acfg = analytic_config(cfg, spec);
    let model = ChannelModel::new(&acfg, spec.enzymes);
    let mut table = ResultTable::new(&["t_b_us", "xi", "mean_pe", "optimal"], metadata(cfg, Some(spec), spec.master_seed));
    for &tb in &spec.t_b_us {
        let avg = SequenceAverage {
            bit_interval: tb * 1e-6,
            family: spec.family,
            isi_mode: spec.isi,
            n_bits: spec.n_bits,
            n_sequences: spec.sequences,
            p1: acfg.p1,
            seed: spec.master_seed,
            sampling: SamplingTime::Exact,
        };
        let reports = mean_error_sweep(&model, &avg, &spec.thresholds)?;
        let best = reports
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.mean_error.total_cmp(&b.1.mean_error))
            .map(|(i, _)| i);
        for (i, r) in reports.iter().enumerate() {
            table.push(vec![tb, r.threshold as f64, r.mean_error, f64::from(u8::from(Some(i) == best))]);
        }
    }
    Ok(table)
}

/// Peak time and height with and without enzymes.
pub fn peak_table(cfg: &SystemConfig) -> ResultTable {
    let mut table = ResultTable::new(&["enzymes", "t_max_us", "t_max_grid_us", "n_max", "c_etot"], metadata(cfg, None, 0));
    for enz in [true, false] {
        let m = ChannelModel::new(cfg, enz);
        table.push(vec![f64::from(u8::from(enz)), m.t_max * 1e6, m.t_max_on_grid() * 1e6, m.n_max, m.c_etot]);
    }
    table
}

/// Derived constants of every bundled preset.
pub fn preset_table() -> Result<ResultTable> {
    use molcom_core::physchem::{binding_radius, rms_separation, PRESET_NAMES};
    let base = SystemConfig::preset(PRESET_NAMES[0])?;
    let mut table = ResultTable::new(
        &["system", "r_rms_nm", "r_b_nm", "binding_valid", "c_etot", "n_emit", "n_enzyme", "r0_nm", "rob_nm", "dt_us"],
        metadata(&base, None, 0),
    );
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let cfg = SystemConfig::preset(name)?;
        let rb = binding_radius(&cfg);
        table.push(vec![
            (i + 1) as f64,
            rms_separation(&cfg) * 1e9,
            rb.radius * 1e9,
            f64::from(u8::from(rb.valid)),
            cfg.c_etot(),
            cfg.n_emit as f64,
            cfg.n_enzyme as f64,
            cfg.rx_distance * 1e9,
            cfg.rx_radius * 1e9,
            cfg.dt * 1e6,
        ]);
    }
    Ok(table)
}
