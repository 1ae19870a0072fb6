//! Physical constants, molecular species and system parameterization.
//!
//! Every quantity is carried in SI base units (m, s, molecule). Configuration
//! files use the customary units of the field (nm, µs, µm³) and are converted
//! on ingestion; see [`ConfigFile`].

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Boltzmann constant in J/K, at the precision used throughout the model.
pub const BOLTZMANN: f64 = 1.38e-23;

/// Default temperature (25 °C) in kelvin.
pub const ROOM_TEMPERATURE: f64 = 298.0;

/// Viscosity of water near room temperature, kg·m⁻¹·s⁻¹.
pub const WATER_VISCOSITY: f64 = 1.0e-3;

/// Minimum accepted `r_rms / r_B` ratio before the binding radius formula is
/// considered unreliable.
pub const BINDING_RADIUS_RATIO: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConstants {
    pub boltzmann: f64,
    pub temperature: f64,
    pub viscosity: f64,
}

impl EnvironmentConstants {
    pub fn new(temperature: f64, viscosity: f64) -> Result<Self> {
        let env = Self {
            boltzmann: BOLTZMANN,
            temperature,
            viscosity,
        };
        env.validate()?;
        Ok(env)
    }

    /// Water at 25 °C.
    pub fn water() -> Self {
        Self {
            boltzmann: BOLTZMANN,
            temperature: ROOM_TEMPERATURE,
            viscosity: WATER_VISCOSITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return config(format!("temperature must be > 0 K, got {}", self.temperature));
        }
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return config(format!("viscosity must be > 0, got {}", self.viscosity));
        }
        Ok(())
    }
}

impl Default for EnvironmentConstants {
    fn default() -> Self {
        Self::water()
    }
}

/// Einstein relation for a spherical molecule: `k_B T / (6 π η R)`.
pub fn diffusion_coefficient(radius: f64, env: &EnvironmentConstants) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return domain(format!("molecule radius must be > 0, got {radius}"));
    }
    Ok((env.boltzmann * env.temperature) / (6.0 * PI * env.viscosity * radius))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeciesKind {
    /// Information molecule.
    A,
    /// Enzyme.
    E,
    /// Enzyme-substrate intermediate.
    EA,
}

impl fmt::Display for SpeciesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpeciesKind::A => "A",
            SpeciesKind::E => "E",
            SpeciesKind::EA => "EA",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpec {
    pub kind: SpeciesKind,
    pub radius: f64,
    pub diffusion_coefficient: f64,
}

impl SpeciesSpec {
    pub fn new(kind: SpeciesKind, radius: f64, env: &EnvironmentConstants) -> Result<Self> {
        Ok(Self {
            kind,
            radius,
            diffusion_coefficient: diffusion_coefficient(radius, env)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSet {
    pub a: SpeciesSpec,
    pub e: SpeciesSpec,
    pub ea: SpeciesSpec,
}

impl SpeciesSet {
    pub fn get(&self, kind: SpeciesKind) -> &SpeciesSpec {
        match kind {
            SpeciesKind::A => &self.a,
            SpeciesKind::E => &self.e,
            SpeciesKind::EA => &self.ea,
        }
    }
}

/// Full parameterization of one communication system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub env: EnvironmentConstants,
    pub species: SpeciesSet,
    /// Molecules released per emission.
    pub n_emit: u64,
    /// Enzymes confined to the enzyme cube.
    pub n_enzyme: u64,
    /// Side of the enzyme cube, centered on the transmitter.
    pub v_enz_side: f64,
    /// Binding rate, molecule⁻¹·m³·s⁻¹.
    pub k1: f64,
    /// Unbinding rate, s⁻¹.
    pub k_minus1: f64,
    /// Degradation rate, s⁻¹.
    pub k2: f64,
    /// Transmitter-to-receiver-center distance. The receiver sits on +x.
    pub rx_distance: f64,
    pub rx_radius: f64,
    pub dt: f64,
    pub bit_interval: f64,
    /// A priori probability of sending a 1.
    pub p1: f64,
    /// Let intermediates diffuse with the information molecule coefficient
    /// instead of their own Einstein value.
    pub ea_diffuses_as_a: bool,
}

impl SystemConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_config()
    }

    /// Resolve a preset name (`system1`..`system3`) or a path to a config file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match ConfigFile::preset(name_or_path) {
            Some(file) => file.into_config(),
            None => Self::from_file(name_or_path),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        ConfigFile::preset(name)
            .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?
            .into_config()
    }

    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            v_enz_um3: self.v_enz() * 1e18,
            n_emit: self.n_emit as f64,
            n_enzyme: self.n_enzyme as f64,
            k1: self.k1,
            k_minus1: self.k_minus1,
            k2: self.k2,
            r0_nm: self.rx_distance * 1e9,
            rob_nm: self.rx_radius * 1e9,
            r_a_nm: self.species.a.radius * 1e9,
            r_e_nm: self.species.e.radius * 1e9,
            r_ea_nm: self.species.ea.radius * 1e9,
            dt_us: self.dt * 1e6,
            bit_interval_us: self.bit_interval * 1e6,
            p1: self.p1,
            temperature_k: self.env.temperature,
            viscosity: self.env.viscosity,
            ea_diffuses_as_a: self.ea_diffuses_as_a.then_some(true),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        for s in [&self.species.a, &self.species.e, &self.species.ea] {
            if !(s.radius > 0.0) || !(s.diffusion_coefficient > 0.0) {
                return config(format!("species {} needs positive radius and diffusion", s.kind));
            }
        }
        let nonneg = [
            ("v_enz_side", self.v_enz_side),
            ("k1", self.k1),
            ("k_minus1", self.k_minus1),
            ("k2", self.k2),
            ("rx_distance", self.rx_distance),
            ("rx_radius", self.rx_radius),
            ("dt", self.dt),
            ("bit_interval", self.bit_interval),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return config(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.rx_radius < self.rx_distance) {
            return config(format!(
                "receiver radius {} must be smaller than its distance {}",
                self.rx_radius, self.rx_distance
            ));
        }
        if self.v_enz_side < 3.0 * self.rx_distance {
            return config(format!(
                "enzyme cube side {} must be at least 3x the receiver distance {}",
                self.v_enz_side, self.rx_distance
            ));
        }
        if !(0.0..=1.0).contains(&self.p1) {
            return config(format!("p1 must lie in [0, 1], got {}", self.p1));
        }
        let rb = binding_radius(self);
        if !rb.valid {
            log::warn!(
                "r_rms = {:.3e} m is less than {}x r_B = {:.3e} m; binding radius formula is unreliable",
                rms_separation(self),
                BINDING_RADIUS_RATIO,
                rb.radius
            );
        }
        Ok(())
    }

    pub fn v_enz(&self) -> f64 {
        self.v_enz_side.powi(3)
    }

    /// Receiver volume `(4/3) π r_ob³`.
    pub fn v_ob(&self) -> f64 {
        4.0 / 3.0 * PI * self.rx_radius.powi(3)
    }

    /// Total (free + bound) enzyme concentration, molecule/m³.
    pub fn c_etot(&self) -> f64 {
        self.n_enzyme as f64 / self.v_enz()
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn receiver_center(&self) -> [f64; 3] {
        [self.rx_distance, 0.0, 0.0]
    }

    pub fn d_a(&self) -> f64 {
        self.species.a.diffusion_coefficient
    }

    pub fn d_e(&self) -> f64 {
        self.species.e.diffusion_coefficient
    }

    /// Diffusion coefficient used for intermediates in simulation.
    pub fn d_ea(&self) -> f64 {
        if self.ea_diffuses_as_a {
            self.d_a()
        } else {
            self.species.ea.diffusion_coefficient
        }
    }

    /// Same system with every enzyme removed.
    pub fn without_enzymes(&self) -> Self {
        Self {
            n_enzyme: 0,
            ..self.clone()
        }
    }

    /// Same system with all three rate constants set to zero and no enzymes.
    pub fn diffusion_only(&self) -> Self {
        Self {
            n_enzyme: 0,
            k1: 0.0,
            k_minus1: 0.0,
            k2: 0.0,
            ..self.clone()
        }
    }
}

/// Root-mean-square one-step separation of an A–E pair.
pub fn rms_separation(cfg: &SystemConfig) -> f64 {
    (2.0 * (cfg.d_a() + cfg.d_e()) * cfg.dt).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BindingRadius {
    pub radius: f64,
    /// `r_rms >= 5 r_B`, the regime where the closed form holds.
    pub valid: bool,
}

/// Binding radius `(3 k₁ Δt / 4π)^(1/3)` with its validity flag.
pub fn binding_radius(cfg: &SystemConfig) -> BindingRadius {
    let radius = (3.0 * cfg.k1 * cfg.dt / (4.0 * PI)).cbrt();
    let valid = radius == 0.0 || rms_separation(cfg) >= BINDING_RADIUS_RATIO * radius;
    BindingRadius { radius, valid }
}

/// On-disk representation of a [`SystemConfig`], in customary units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub v_enz_um3: f64,
    pub n_emit: f64,
    pub n_enzyme: f64,
    pub k1: f64,
    pub k_minus1: f64,
    pub k2: f64,
    pub r0_nm: f64,
    pub rob_nm: f64,
    #[serde(rename = "rA_nm")]
    pub r_a_nm: f64,
    #[serde(rename = "rE_nm")]
    pub r_e_nm: f64,
    #[serde(rename = "rEA_nm")]
    pub r_ea_nm: f64,
    pub dt_us: f64,
    pub bit_interval_us: f64,
    pub p1: f64,
    #[serde(rename = "temperature_K")]
    pub temperature_k: f64,
    pub viscosity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ea_diffuses_as_a: Option<bool>,
}

pub const PRESET_NAMES: [&str; 3] = ["system1", "system2", "system3"];

impl ConfigFile {
    pub fn preset(name: &str) -> Option<Self> {
        let system1 = ConfigFile {
            v_enz_um3: 1.0,
            n_emit: 5e3,
            n_enzyme: 1e5,
            k1: 2e-19,
            k_minus1: 1e4,
            k2: 1e6,
            r0_nm: 300.0,
            rob_nm: 45.0,
            r_a_nm: 0.5,
            r_e_nm: 2.5,
            r_ea_nm: 3.0,
            dt_us: 0.5,
            bit_interval_us: 120.0,
            p1: 0.5,
            temperature_k: ROOM_TEMPERATURE,
            viscosity: WATER_VISCOSITY,
            ea_diffuses_as_a: None,
        };
        match name {
            "system1" => Some(system1),
            "system2" => Some(ConfigFile {
                v_enz_um3: 37.0,
                n_enzyme: 3.7e6,
                k1: 1.79e-20,
                k_minus1: 900.0,
                k2: 9e4,
                r0_nm: 1000.0,
                rob_nm: 150.0,
                dt_us: 5.0,
                ..system1
            }),
            "system3" => Some(ConfigFile {
                n_emit: 2e4,
                ..system1
            }),
            _ => None,
        }
    }

    pub fn into_config(self) -> Result<SystemConfig> {
        let env = EnvironmentConstants::new(self.temperature_k, self.viscosity)?;
        let count = |name: &str, v: f64| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
                Ok(v as u64)
            } else {
                config(format!("{name} must be a nonnegative integer, got {v}"))
            }
        };
        if !(self.v_enz_um3 >= 0.0) {
            return config(format!("v_enz_um3 must be >= 0, got {}", self.v_enz_um3));
        }
        let species = SpeciesSet {
            a: SpeciesSpec::new(SpeciesKind::A, self.r_a_nm * 1e-9, &env)?,
            e: SpeciesSpec::new(SpeciesKind::E, self.r_e_nm * 1e-9, &env)?,
            ea: SpeciesSpec::new(SpeciesKind::EA, self.r_ea_nm * 1e-9, &env)?,
        };
        let cfg = SystemConfig {
            env,
            species,
            n_emit: count("n_emit", self.n_emit)?,
            n_enzyme: count("n_enzyme", self.n_enzyme)?,
            v_enz_side: (self.v_enz_um3 * 1e-18).cbrt(),
            k1: self.k1,
            k_minus1: self.k_minus1,
            k2: self.k2,
            rx_distance: self.r0_nm * 1e-9,
            rx_radius: self.rob_nm * 1e-9,
            dt: self.dt_us * 1e-6,
            bit_interval: self.bit_interval_us * 1e-6,
            p1: self.p1,
            ea_diffuses_as_a: self.ea_diffuses_as_a.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn einstein_relation_for_small_molecule() {
        let d = diffusion_coefficient(0.5e-9, &EnvironmentConstants::water()).unwrap();
        // 1.38e-23 * 298 / (6 pi 1e-3 0.5e-9), evaluated independently in extended precision.
        assert!(rel(d, 4.363_391_919_807_4e-10) < 1e-12, "{d}");
    }

    #[test]
    fn diffusion_scales_inversely_with_radius() {
        let env = EnvironmentConstants::water();
        let d1 = diffusion_coefficient(0.5e-9, &env).unwrap();
        let d2 = diffusion_coefficient(1.0e-9, &env).unwrap();
        let d5 = diffusion_coefficient(2.5e-9, &env).unwrap();
        assert!(rel(d2, d1 / 2.0) < 1e-15);
        assert!(rel(d5, d1 / 5.0) < 1e-15);
    }

    #[test]
    fn nonpositive_radius_is_a_domain_error() {
        let env = EnvironmentConstants::water();
        assert!(matches!(diffusion_coefficient(0.0, &env), Err(Error::Domain(_))));
        assert!(matches!(diffusion_coefficient(-1e-9, &env), Err(Error::Domain(_))));
    }

    #[test]
    fn diffusion_monotone_over_grid() {
        let radii: Vec<f64> = (1..40).map(|i| i as f64 * 0.25e-9).collect();
        let temps: Vec<f64> = (0..20).map(|i| 250.0 + 5.0 * i as f64).collect();
        for &t in &temps {
            let env = EnvironmentConstants::new(t, 1e-3).unwrap();
            for w in radii.windows(2) {
                let a = diffusion_coefficient(w[0], &env).unwrap();
                let b = diffusion_coefficient(w[1], &env).unwrap();
                assert!(b < a);
            }
        }
        for &r in &radii {
            for w in temps.windows(2) {
                let a = diffusion_coefficient(r, &EnvironmentConstants::new(w[0], 1e-3).unwrap()).unwrap();
                let b = diffusion_coefficient(r, &EnvironmentConstants::new(w[1], 1e-3).unwrap()).unwrap();
                assert!(b > a);
            }
        }
    }

    #[test]
    fn table_values_reproduce() {
        let expect = [("system1", 22.9, 2.88), ("system2", 72.4, 2.77), ("system3", 22.9, 2.88)];
        for (name, rrms_nm, rb_nm) in expect {
            let cfg = SystemConfig::preset(name).unwrap();
            let rrms = rms_separation(&cfg) * 1e9;
            let rb = binding_radius(&cfg);
            assert!((rrms - rrms_nm).abs() < 0.1, "{name}: r_rms {rrms}");
            assert!((rb.radius * 1e9 - rb_nm).abs() < 0.01, "{name}: r_B {}", rb.radius * 1e9);
            assert!(rb.valid);
            assert!(rel(cfg.c_etot(), 1e23) < 1e-3, "{name}: {}", cfg.c_etot());
        }
    }

    #[test]
    fn zero_time_step_and_rate() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.dt = 0.0;
        assert_eq!(rms_separation(&cfg), 0.0);
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.k1 = 0.0;
        let rb = binding_radius(&cfg);
        assert_eq!(rb.radius, 0.0);
        assert!(rb.valid);
    }

    #[test]
    fn small_ratio_flags_invalid_binding_radius() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.k1 = 2e-16;
        assert!(!binding_radius(&cfg).valid);
        // Still loads.
        cfg.validate().unwrap();
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SystemConfig::preset("system2").unwrap();
        let text = cfg.to_file().to_toml_string();
        assert!(text.contains("rEA_nm"));
        assert!(text.contains("temperature_K"));
        let back = SystemConfig::from_toml_str(&text).unwrap();
        assert!(rel(back.v_enz_side, cfg.v_enz_side) < 1e-12);
        assert_eq!(back.n_enzyme, cfg.n_enzyme);
        assert_eq!(back.dt, cfg.dt);
    }

    #[test]
    fn config_rejects_bad_geometry() {
        let mut file = ConfigFile::preset("system1").unwrap();
        file.rob_nm = 400.0;
        assert!(matches!(file.into_config(), Err(Error::Config(_))));
        let mut file = ConfigFile::preset("system1").unwrap();
        file.v_enz_um3 = 0.5;
        assert!(matches!(file.into_config(), Err(Error::Config(_))));
        let mut file = ConfigFile::preset("system1").unwrap();
        file.p1 = 1.5;
        assert!(file.into_config().is_err());
        let mut file = ConfigFile::preset("system1").unwrap();
        file.n_emit = 2.5;
        assert!(file.into_config().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let mut text = ConfigFile::preset("system1").unwrap().to_toml_string();
        text.push_str("bogus = 1\n");
        assert!(SystemConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn ea_switch_changes_intermediate_diffusion() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        assert!(rel(cfg.d_ea(), cfg.d_a() / 6.0) < 1e-12);
        cfg.ea_diffuses_as_a = true;
        assert_eq!(cfg.d_ea(), cfg.d_a());
    }
}
