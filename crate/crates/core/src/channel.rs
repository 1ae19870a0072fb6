//! Expected channel response after a single emission.
//!
//! The full system couples the three species through reaction-diffusion
//! equations with no closed-form solution. Assuming fast degradation
//! (`k2 → ∞`) and slow unbinding (`k₋₁ → 0`), the free enzyme concentration
//! stays near its total `C_Etot` and the information-molecule concentration
//! is bounded below by the free-diffusion Green's function multiplied by
//! `exp(-k1 C_Etot t)`. With no enzymes this reduces to the plain point-source
//! response. The receiver sees the concentration at its center, uniformly
//! over its volume.
//!
//! Everything in this module treats that bound as the working model; the
//! particle simulator quantifies how loose it is.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::physchem::SystemConfig;

/// Relative step of the numeric decay-time grid, as a fraction of `t_max`.
pub const DECAY_SCAN_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel {
    pub cfg: SystemConfig,
    pub enzymes_active: bool,
    /// Total enzyme concentration seen by the model; zero when inactive.
    pub c_etot: f64,
    pub t_max: f64,
    /// Expected observed count at `t_max`.
    pub n_max: f64,
}

impl ChannelModel {
    pub fn new(cfg: &SystemConfig, enzymes_active: bool) -> Self {
        let c_etot = if enzymes_active { cfg.c_etot() } else { 0.0 };
        let mut model = Self {
            cfg: cfg.clone(),
            enzymes_active,
            c_etot,
            t_max: 0.0,
            n_max: 0.0,
        };
        model.t_max = peak_time(&model);
        model.n_max = expected_observed(model.t_max, &model).unwrap_or(0.0);
        model
    }

    /// `k1 · C_Etot`, the enzyme-driven decay rate.
    pub fn decay_rate(&self) -> f64 {
        self.cfg.k1 * self.c_etot
    }

    /// `t_max` rounded to the nearest multiple of the simulation step.
    pub fn t_max_on_grid(&self) -> f64 {
        let dt = self.cfg.dt;
        if dt > 0.0 {
            (self.t_max / dt).round() * dt
        } else {
            self.t_max
        }
    }

    /// Decision sampling step index corresponding to [`Self::t_max_on_grid`].
    pub fn t_max_steps(&self) -> u64 {
        (self.t_max / self.cfg.dt).round() as u64
    }
}

/// Expected concentration of information molecules at distance `r`, `t`
/// seconds after an emission. A lower bound when enzymes are active.
pub fn impulse_concentration(r: f64, t: f64, model: &ChannelModel) -> Result<f64> {
    Ok(model.cfg.n_emit as f64 * unit_impulse(r, t, model)?)
}

/// Response to a single emitted molecule, i.e. its probability density.
pub fn unit_impulse(r: f64, t: f64, model: &ChannelModel) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("impulse response needs t > 0, got {t}"));
    }
    let d = model.cfg.d_a();
    let spread = (4.0 * PI * d * t).powf(1.5);
    let exponent = -model.decay_rate() * t - r * r / (4.0 * d * t);
    Ok(exponent.exp() / spread)
}

/// Expected number of free information molecules inside the receiver.
pub fn expected_observed(t: f64, model: &ChannelModel) -> Result<f64> {
    Ok(impulse_concentration(model.cfg.rx_distance, t, model)? * model.cfg.v_ob())
}

/// Time at which the expected observed count peaks.
pub fn peak_time(model: &ChannelModel) -> f64 {
    let r0 = model.cfg.rx_distance;
    let d = model.cfg.d_a();
    let kc = model.decay_rate();
    if kc > 0.0 {
        (-3.0 + (9.0 + 4.0 * kc * r0 * r0 / d).sqrt()) / (4.0 * kc)
    } else {
        r0 * r0 / (6.0 * d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayMethod {
    /// Smallest point of a fine grid after `t_max` that satisfies the ratio.
    NumericScan,
    /// Closed form obtained by replacing the exponential with its maximum.
    ClosedFormBound,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayQuery {
    pub alpha: f64,
    pub method: DecayMethod,
}

impl DecayQuery {
    pub fn new(alpha: f64, method: DecayMethod) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        Ok(Self { alpha, method })
    }
}

/// Time after an emission for the expected count to fall to `alpha · n_max`.
pub fn decay_time(model: &ChannelModel, q: DecayQuery) -> Result<f64> {
    if !(q.alpha > 0.0 && q.alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {}", q.alpha));
    }
    match q.method {
        DecayMethod::NumericScan => numeric_decay_time(model, q.alpha),
        DecayMethod::ClosedFormBound => Ok(closed_form_decay_time(model, q.alpha)),
    }
}

fn numeric_decay_time(model: &ChannelModel, alpha: f64) -> Result<f64> {
    let t_max = model.t_max;
    let n_max = model.n_max;
    let at = |n: u64| t_max * (1.0 + n as f64 * DECAY_SCAN_STEP);
    let below = |n: u64| -> Result<bool> { Ok(expected_observed(at(n), model)? / n_max <= alpha) };

    // The count decreases monotonically after t_max, so the first grid point
    // satisfying the ratio can be bracketed by doubling and then bisected.
    if below(0)? {
        return Ok(at(0));
    }
    let mut lo = 0u64;
    let mut hi = 1u64;
    while !below(hi)? {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(at(hi))
}

fn closed_form_decay_time(model: &ChannelModel, alpha: f64) -> f64 {
    let cfg = &model.cfg;
    let d = cfg.d_a();
    let base = (cfg.v_ob() * cfg.n_emit as f64 / (alpha * model.n_max)).powf(2.0 / 3.0)
        / (4.0 * PI * d);
    let kc = model.decay_rate();
    if kc > 0.0 {
        base * (-2.0 / 3.0 * cfg.rx_distance * (kc / d).sqrt()).exp()
    } else {
        base
    }
}
