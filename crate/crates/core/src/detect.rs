//! Receiver statistics and bit error probability.
//!
//! The receiver samples the number of free information molecules inside its
//! volume once per bit interval, `t_max` after the interval starts, and
//! decides 1 when the count reaches the threshold `ξ`. Molecules from every
//! earlier emission may still be around; counts from distinct emissions are
//! treated as independent, so the count at bit `j` is a sum of per-emission
//! counts whose means add.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{unit_impulse, ChannelModel};
use crate::error::{domain, Error, Result};
use crate::seeding::stream_rng;
use crate::special::{beta_reg, erfc, ln_factorial};

/// Probability that one emitted molecule is inside the receiver at `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationProb {
    pub t: f64,
    pub p_ob: f64,
}

pub fn observation_probability(t: f64, model: &ChannelModel) -> Result<ObservationProb> {
    let p = unit_impulse(model.cfg.rx_distance, t, model)? * model.cfg.v_ob();
    Ok(ObservationProb { t, p_ob: p.clamp(0.0, 1.0) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountFamily {
    Binomial,
    Poisson,
    Gaussian,
}

impl std::str::FromStr for CountFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binomial" => Ok(Self::Binomial),
            "poisson" => Ok(Self::Poisson),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::Config(format!("unknown count family {other:?}"))),
        }
    }
}

/// Distribution of the number of molecules observed at one sampling instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountModel {
    pub family: CountFamily,
    /// Number of molecules that could be observed; Binomial only.
    pub n_trials: u64,
    pub mean: f64,
    /// Per-molecule observation probability. For Gaussian models it sets the
    /// variance `mean · (1 - p_single)`.
    pub p_single: f64,
}

impl CountModel {
    pub fn binomial(n_trials: u64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("binomial probability must lie in [0, 1], got {p}"));
        }
        Ok(Self {
            family: CountFamily::Binomial,
            n_trials,
            mean: n_trials as f64 * p,
            p_single: p,
        })
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return domain(format!("poisson mean must be finite and >= 0, got {mean}"));
        }
        Ok(Self {
            family: CountFamily::Poisson,
            n_trials: 0,
            mean,
            p_single: 0.0,
        })
    }

    pub fn gaussian(mean: f64, p_single: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return domain(format!("gaussian mean must be finite and >= 0, got {mean}"));
        }
        if !(0.0..=1.0).contains(&p_single) {
            return domain(format!("gaussian p_single must lie in [0, 1], got {p_single}"));
        }
        Ok(Self {
            family: CountFamily::Gaussian,
            n_trials: 0,
            mean,
            p_single,
        })
    }

    /// Model for a single emission of `n` molecules each seen with probability `p`.
    pub fn single_emission(family: CountFamily, n: u64, p: f64) -> Result<Self> {
        match family {
            CountFamily::Binomial => Self::binomial(n, p),
            CountFamily::Poisson => Self::poisson(n as f64 * p),
            CountFamily::Gaussian => Self::gaussian(n as f64 * p, p),
        }
    }

    pub fn variance(&self) -> f64 {
        match self.family {
            CountFamily::Poisson => self.mean,
            CountFamily::Binomial | CountFamily::Gaussian => self.mean * (1.0 - self.p_single),
        }
    }
}

/// `Pr(N >= xi)`.
pub fn count_tail(model: &CountModel, xi: u64) -> f64 {
    if xi == 0 {
        return 1.0;
    }
    match model.family {
        CountFamily::Binomial => binomial_tail(model.n_trials, model.p_single, xi),
        CountFamily::Poisson => poisson_tail(model.mean, xi),
        CountFamily::Gaussian => {
            if model.mean == 0.0 {
                return 0.0;
            }
            let var = model.variance();
            let x = xi as f64;
            if var <= 0.0 {
                return if x <= model.mean { 1.0 } else { 0.0 };
            }
            0.5 * erfc((x - model.mean) / (2.0 * var).sqrt())
        }
    }
}

/// `Pr(N = w)`; for the Gaussian family this is the density at `w`.
pub fn count_pmf(model: &CountModel, w: u64) -> f64 {
    match model.family {
        CountFamily::Binomial => {
            if w > model.n_trials {
                0.0
            } else {
                (count_tail(model, w) - count_tail(model, w + 1)).max(0.0)
            }
        }
        CountFamily::Poisson => {
            let mu = model.mean;
            if mu == 0.0 {
                return if w == 0 { 1.0 } else { 0.0 };
            }
            (w as f64 * mu.ln() - mu - ln_factorial(w)).exp()
        }
        CountFamily::Gaussian => {
            if model.mean == 0.0 {
                return if w == 0 { 1.0 } else { 0.0 };
            }
            let var = model.variance();
            let dx = w as f64 - model.mean;
            (-dx * dx / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
        }
    }
}

fn binomial_tail(n: u64, p: f64, xi: u64) -> f64 {
    if xi > n || p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    beta_reg(xi as f64, (n - xi + 1) as f64, p).expect("arguments checked above")
}

fn poisson_tail(mu: f64, xi: u64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let x = xi as f64;
    if x > mu {
        // Sum the upper tail directly; terms decay geometrically past the mode.
        let mut term = (x * mu.ln() - mu - ln_factorial(xi)).exp();
        let mut sum = 0.0;
        let mut w = x;
        while term > sum * 1e-17 && term > 0.0 {
            sum += term;
            w += 1.0;
            term *= mu / w;
        }
        sum.min(1.0)
    } else {
        let mut term = (-mu).exp();
        let mut cdf = 0.0;
        for w in 0..xi {
            cdf += term;
            term *= mu / (w + 1) as f64;
        }
        (1.0 - cdf).clamp(0.0, 1.0)
    }
}

/// How many earlier emissions contribute to the count at a given bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsiMode {
    /// Only the current bit's own emission.
    None,
    /// The current and the immediately preceding emission.
    #[serde(rename = "prev")]
    PreviousOnly,
    /// Every emission so far.
    Full,
}

impl std::str::FromStr for IsiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "prev" | "previous" => Ok(Self::PreviousOnly),
            "full" | "all" => Ok(Self::Full),
            other => Err(Error::Config(format!("unknown ISI mode {other:?}"))),
        }
    }
}

impl IsiMode {
    /// First bit index (0-based) whose emission contributes at bit `j`.
    fn first_contributor(self, j: usize) -> usize {
        match self {
            IsiMode::None => j,
            IsiMode::PreviousOnly => j.saturating_sub(1),
            IsiMode::Full => 0,
        }
    }
}

/// A transmitted ON/OFF-keyed bit sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct BitSequence {
    bits: Vec<bool>,
    pub bit_interval: f64,
}

impl BitSequence {
    pub fn new(bits: Vec<bool>, bit_interval: f64) -> Result<Self> {
        if bits.is_empty() {
            return domain("bit sequence must not be empty");
        }
        if !(bit_interval > 0.0) {
            return domain(format!("bit interval must be > 0, got {bit_interval}"));
        }
        Ok(Self { bits, bit_interval })
    }

    /// Parse a string of `0`/`1` characters.
    pub fn parse(s: &str, bit_interval: f64) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Config(format!("bit sequence contains {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits, bit_interval)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Start time of bit `j` (0-based).
    pub fn start_of(&self, j: usize) -> f64 {
        j as f64 * self.bit_interval
    }
}

impl std::fmt::Display for BitSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Sampling offset within each bit interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingTime {
    /// Exactly `t_max`.
    Exact,
    /// `t_max` rounded to the nearest simulation step, as a simulated
    /// receiver would have to.
    StepAligned,
}

impl SamplingTime {
    pub fn offset(self, model: &ChannelModel) -> f64 {
        match self {
            SamplingTime::Exact => model.t_max,
            SamplingTime::StepAligned => model.t_max_on_grid(),
        }
    }
}

/// Expected observed count at bit `j` (0-based), summing contributions of
/// the emissions selected by `mode`.
pub fn isi_mean(j: usize, seq: &BitSequence, model: &ChannelModel, mode: IsiMode) -> Result<f64> {
    isi_mean_at(j, seq, model, mode, SamplingTime::Exact)
}

pub fn isi_mean_at(
    j: usize,
    seq: &BitSequence,
    model: &ChannelModel,
    mode: IsiMode,
    sampling: SamplingTime,
) -> Result<f64> {
    let terms = emission_terms(j, seq, model, mode, sampling)?;
    Ok(model.cfg.n_emit as f64 * terms.iter().sum::<f64>())
}

/// Per-emission observation probabilities contributing at bit `j`.
fn emission_terms(
    j: usize,
    seq: &BitSequence,
    model: &ChannelModel,
    mode: IsiMode,
    sampling: SamplingTime,
) -> Result<Vec<f64>> {
    if j >= seq.len() {
        return domain(format!("bit index {j} out of range for {} bits", seq.len()));
    }
    let offset = sampling.offset(model);
    let mut terms = Vec::new();
    for i in mode.first_contributor(j)..=j {
        if seq.bits[i] {
            let t = (j - i) as f64 * seq.bit_interval + offset;
            terms.push(observation_probability(t, model)?.p_ob);
        }
    }
    Ok(terms)
}

/// Count model for a sum of independent per-emission counts.
fn combined_count(family: CountFamily, n_emit: u64, terms: &[f64]) -> Result<CountModel> {
    let n = n_emit as f64;
    match family {
        CountFamily::Binomial => match terms {
            [] => CountModel::binomial(n_emit, 0.0),
            [p] => CountModel::binomial(n_emit, *p),
            _ => Err(Error::Unsupported(
                "binomial statistics are only available for a single contributing emission".into(),
            )),
        },
        CountFamily::Poisson => CountModel::poisson(n * terms.iter().sum::<f64>()),
        CountFamily::Gaussian => {
            let mean: f64 = n * terms.iter().sum::<f64>();
            let var: f64 = terms.iter().map(|p| n * p * (1.0 - p)).sum();
            let p_single = if mean > 0.0 { (1.0 - var / mean).clamp(0.0, 1.0) } else { 0.0 };
            CountModel::gaussian(mean, p_single)
        }
    }
}

/// Probability that bit `j` (0-based) is decided wrongly, given the
/// transmitted sequence up to and including `j`.
pub fn bit_error_prob(
    j: usize,
    seq: &BitSequence,
    model: &ChannelModel,
    xi: u64,
    family: CountFamily,
    mode: IsiMode,
) -> Result<f64> {
    bit_error_prob_at(j, seq, model, xi, family, mode, SamplingTime::Exact)
}

pub fn bit_error_prob_at(
    j: usize,
    seq: &BitSequence,
    model: &ChannelModel,
    xi: u64,
    family: CountFamily,
    mode: IsiMode,
    sampling: SamplingTime,
) -> Result<f64> {
    let terms = emission_terms(j, seq, model, mode, sampling)?;
    let counts = combined_count(family, model.cfg.n_emit, &terms)?;
    let tail = count_tail(&counts, xi);
    Ok(if seq.bits[j] { 1.0 - tail } else { tail })
}

/// Probability of deciding 1 on the first bit when it is a 1.
pub fn first_bit_detection(model: &ChannelModel, xi: u64, family: CountFamily, sampling: SamplingTime) -> Result<f64> {
    let p = observation_probability(sampling.offset(model), model)?.p_ob;
    let counts = CountModel::single_emission(family, model.cfg.n_emit, p)?;
    Ok(count_tail(&counts, xi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// Expected error probability of each bit position.
    pub per_bit: Vec<f64>,
    pub mean_error: f64,
    pub threshold: u64,
    pub isi_mode: IsiMode,
}

/// Parameters of a random-sequence error evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceAverage {
    pub bit_interval: f64,
    pub family: CountFamily,
    pub isi_mode: IsiMode,
    pub n_bits: usize,
    pub n_sequences: usize,
    pub p1: f64,
    pub seed: u64,
    pub sampling: SamplingTime,
}

impl SequenceAverage {
    /// 1000 random 50-bit sequences with equiprobable bits, Poisson counts
    /// and full ISI.
    pub fn new(bit_interval: f64, seed: u64) -> Self {
        Self {
            bit_interval,
            family: CountFamily::Poisson,
            isi_mode: IsiMode::Full,
            n_bits: 50,
            n_sequences: 1000,
            p1: 0.5,
            seed,
            sampling: SamplingTime::Exact,
        }
    }
}

/// Bits of random sequence `index` under `seed`.
pub fn random_bits(seed: u64, index: u64, n_bits: usize, p1: f64) -> Vec<bool> {
    let mut rng = stream_rng(seed, index);
    (0..n_bits).map(|_| rng.random::<f64>() < p1).collect()
}

/// Expected error probability averaged over random sequences, for one threshold.
#[allow(clippy::too_many_arguments)]
pub fn mean_error_prob(
    model: &ChannelModel,
    bit_interval: f64,
    xi: u64,
    family: CountFamily,
    isi_mode: IsiMode,
    n_bits: usize,
    n_sequences: usize,
    p1: f64,
    seed: u64,
) -> Result<ErrorReport> {
    let avg = SequenceAverage {
        bit_interval,
        family,
        isi_mode,
        n_bits,
        n_sequences,
        p1,
        seed,
        sampling: SamplingTime::Exact,
    };
    Ok(mean_error_sweep(model, &avg, &[xi])?.remove(0))
}

/// [`mean_error_prob`] for several thresholds over the same sequences.
///
/// Each bit's error is conditioned on the drawn prefix and weighted over
/// both values of the bit itself: `P1 Pr(N < ξ | 1) + P0 Pr(N ≥ ξ | 0)`.
/// Sequences are evaluated in parallel and reduced in index order, so the
/// result does not depend on the number of worker threads.
pub fn mean_error_sweep(model: &ChannelModel, avg: &SequenceAverage, thresholds: &[u64]) -> Result<Vec<ErrorReport>> {
    if avg.n_bits == 0 || avg.n_sequences == 0 {
        return domain("need at least one bit and one sequence");
    }
    if !(0.0..=1.0).contains(&avg.p1) {
        return domain(format!("p1 must lie in [0, 1], got {}", avg.p1));
    }
    if !(avg.bit_interval > 0.0) {
        return domain(format!("bit interval must be > 0, got {}", avg.bit_interval));
    }
    let n_emit = model.cfg.n_emit;
    let offset = avg.sampling.offset(model);
    // Observation probability `k` intervals after an emission.
    let lag: Vec<f64> = (0..avg.n_bits)
        .map(|k| observation_probability(k as f64 * avg.bit_interval + offset, model).map(|o| o.p_ob))
        .collect::<Result<_>>()?;
    let p1 = avg.p1;
    let p0 = 1.0 - p1;
    let first = |j: usize| avg.isi_mode.first_contributor(j);

    let per_sequence: Vec<Vec<Vec<f64>>> = (0..avg.n_sequences)
        .into_par_iter()
        .map(|s| -> Result<Vec<Vec<f64>>> {
            let bits = random_bits(avg.seed, s as u64, avg.n_bits, p1);
            let mut out = vec![vec![0.0; avg.n_bits]; thresholds.len()];
            let mut prior = Vec::with_capacity(avg.n_bits);
            for j in 0..avg.n_bits {
                prior.clear();
                prior.extend((first(j)..j).filter(|&i| bits[i]).map(|i| lag[j - i]));
                let if_zero = combined_count(avg.family, n_emit, &prior)?;
                // Only evaluate the 1-branch when it carries weight; binomial
                // statistics cannot represent it once prior emissions exist.
                let if_one = if p1 > 0.0 {
                    prior.push(lag[0]);
                    Some(combined_count(avg.family, n_emit, &prior)?)
                } else {
                    None
                };
                for (k, &xi) in thresholds.iter().enumerate() {
                    let mut pe = 0.0;
                    if let Some(m) = &if_one {
                        pe += p1 * (1.0 - count_tail(m, xi));
                    }
                    if p0 > 0.0 {
                        pe += p0 * count_tail(&if_zero, xi);
                    }
                    out[k][j] = pe;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / avg.n_sequences as f64;
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(k, &xi)| {
            let mut per_bit = vec![0.0; avg.n_bits];
            for seq in &per_sequence {
                for (acc, v) in per_bit.iter_mut().zip(&seq[k]) {
                    *acc += v;
                }
            }
            per_bit.iter_mut().for_each(|v| *v *= scale);
            let mean_error = per_bit.iter().sum::<f64>() / avg.n_bits as f64;
            ErrorReport {
                per_bit,
                mean_error,
                threshold: xi,
                isi_mode: avg.isi_mode,
            }
        })
        .collect())
}
