//! Particle world state and the per-step update rule.

use molcom_core::physchem::binding_radius;
use molcom_core::seeding::{stream_rng, StreamRng};
use molcom_core::SystemConfig;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::BindingGrid;
use crate::Result;

const NO_CARGO: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParticleKind {
    A,
    E,
    EA,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AState {
    Free,
    Bound,
    Degraded,
}

/// Read-only view of one particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub kind: ParticleKind,
    pub position: [f64; 3],
    pub alive: bool,
}

/// Per-step probabilities of the two first-order reactions of a bound complex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnimolecularProbs {
    pub p_unbind: f64,
    pub p_degrade: f64,
}

impl UnimolecularProbs {
    pub fn new(k_minus1: f64, k2: f64, dt: f64) -> Self {
        let total = k_minus1 + k2;
        if total <= 0.0 {
            return Self { p_unbind: 0.0, p_degrade: 0.0 };
        }
        let fire = -(-dt * total).exp_m1();
        Self { p_unbind: k_minus1 / total * fire, p_degrade: k2 / total * fire }
    }

    /// Odds used when a complex is forced apart: same k₋₁ : k₂ ratio, summing to one.
    fn forced_degrade_share(&self, k_minus1: f64, k2: f64) -> f64 {
        let s = self.p_unbind + self.p_degrade;
        if s > 0.0 {
            self.p_degrade / s
        } else if k_minus1 + k2 > 0.0 {
            k2 / (k_minus1 + k2)
        } else {
            0.0
        }
    }
}

/// Population snapshot written alongside each observation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub n_e: u64,
    pub n_ea: u64,
    pub n_a_free: u64,
    pub n_a_degraded: u64,
}

/// Event totals since construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReactionTally {
    pub bindings: u64,
    pub unbindings: u64,
    pub degradations: u64,
    pub forced_decompositions: u64,
}

#[derive(Clone, Debug)]
pub struct SimState {
    cfg: SystemConfig,
    clock: u64,
    rng: StreamRng,
    r_b: f64,
    probs: UnimolecularProbs,
    forced_degrade: f64,
    sigma_a: f64,
    sigma_e: f64,
    sigma_ea: f64,
    half_side: f64,
    rx_center: [f64; 3],
    lattice: Vec<[f64; 3]>,

    a_pos: Vec<[f64; 3]>,
    a_state: Vec<AState>,
    a_fresh: Vec<bool>,
    free_a: Vec<u32>,
    n_degraded: u64,

    e_pos: Vec<[f64; 3]>,
    e_cargo: Vec<u32>,
    e_fresh: Vec<bool>,
    bound: Vec<u32>,

    grid: BindingGrid,
    escaped: Vec<u32>,
    fresh_a: Vec<u32>,
    fresh_e: Vec<u32>,
    candidates: Vec<(u32, u32)>,
    pairs: Vec<(f64, u32, u32)>,
    tally: ReactionTally,
}

impl SimState {
    /// Empty world with `cfg.n_enzyme` enzymes placed uniformly in the enzyme cube.
    pub fn new(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        let mut state = Self::without_enzymes(cfg, seed)?;
        let h = state.half_side;
        let n = cfg.n_enzyme as usize;
        state.e_pos.reserve_exact(n);
        for _ in 0..n {
            let p: [f64; 3] = std::array::from_fn(|_| state.rng.random_range(-h..h));
            state.e_pos.push(p);
        }
        state.e_cargo = vec![NO_CARGO; n];
        state.e_fresh = vec![false; n];
        Ok(state)
    }

    /// World with no enzymes regardless of `cfg.n_enzyme`; used by tests that
    /// place enzymes by hand.
    pub fn without_enzymes(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let r_b = binding_radius(cfg).radius;
        let half_side = 0.5 * cfg.v_enz_side;
        let probs = UnimolecularProbs::new(cfg.k_minus1, cfg.k2, cfg.dt);
        let sigma = |d: f64| (2.0 * d * cfg.dt).sqrt();
        Ok(Self {
            cfg: cfg.clone(),
            clock: 0,
            rng: stream_rng(seed, 0),
            r_b,
            probs,
            forced_degrade: probs.forced_degrade_share(cfg.k_minus1, cfg.k2),
            sigma_a: sigma(cfg.d_a()),
            sigma_e: sigma(cfg.d_e()),
            sigma_ea: sigma(cfg.d_ea()),
            half_side,
            rx_center: cfg.receiver_center(),
            lattice: emission_lattice(cfg.n_emit as usize, cfg.species.a.radius),
            a_pos: Vec::new(),
            a_state: Vec::new(),
            a_fresh: Vec::new(),
            free_a: Vec::new(),
            n_degraded: 0,
            e_pos: Vec::new(),
            e_cargo: Vec::new(),
            e_fresh: Vec::new(),
            bound: Vec::new(),
            grid: BindingGrid::new(half_side, r_b),
            escaped: Vec::new(),
            fresh_a: Vec::new(),
            fresh_e: Vec::new(),
            candidates: Vec::new(),
            pairs: Vec::new(),
            tally: ReactionTally::default(),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn time(&self) -> f64 {
        self.clock as f64 * self.cfg.dt
    }

    pub fn binding_radius(&self) -> f64 {
        self.r_b
    }

    pub fn unimolecular_probs(&self) -> UnimolecularProbs {
        self.probs
    }

    pub fn tally(&self) -> ReactionTally {
        self.tally
    }

    pub fn n_emitted(&self) -> u64 {
        self.a_pos.len() as u64
    }

    pub fn census(&self) -> Census {
        Census {
            n_e: (self.e_pos.len() - self.bound.len()) as u64,
            n_ea: self.bound.len() as u64,
            n_a_free: self.free_a.len() as u64,
            n_a_degraded: self.n_degraded,
        }
    }

    /// All particles. Bound molecules appear once, as the complex.
    pub fn particles(&self) -> Vec<Particle> {
        let mut out = Vec::with_capacity(self.a_pos.len() + self.e_pos.len());
        for (p, s) in self.a_pos.iter().zip(&self.a_state) {
            match s {
                AState::Free => out.push(Particle { kind: ParticleKind::A, position: *p, alive: true }),
                AState::Degraded => out.push(Particle { kind: ParticleKind::A, position: *p, alive: false }),
                AState::Bound => {}
            }
        }
        for (p, &c) in self.e_pos.iter().zip(&self.e_cargo) {
            let kind = if c == NO_CARGO { ParticleKind::E } else { ParticleKind::EA };
            out.push(Particle { kind, position: *p, alive: true });
        }
        out
    }

    pub fn add_free_a(&mut self, pos: [f64; 3]) {
        self.free_a.push(self.a_pos.len() as u32);
        self.a_pos.push(pos);
        self.a_state.push(AState::Free);
        self.a_fresh.push(false);
    }

    /// Place one enzyme; positions outside the cube are folded back in.
    pub fn add_enzyme(&mut self, pos: [f64; 3]) {
        let mut p = pos;
        fold(&mut p, self.half_side);
        self.e_pos.push(p);
        self.e_cargo.push(NO_CARGO);
        self.e_fresh.push(false);
    }

    /// Release one impulse of molecules around the origin.
    pub fn emit(&mut self) {
        for i in 0..self.lattice.len() {
            let p = self.lattice[i];
            self.add_free_a(p);
        }
    }

    /// Free molecules whose centers lie inside the receiver sphere.
    pub fn observe(&self) -> u64 {
        let c = self.rx_center;
        let r2 = self.cfg.rx_radius * self.cfg.rx_radius;
        self.free_a
            .iter()
            .filter(|&&i| {
                let p = self.a_pos[i as usize];
                let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2
            })
            .count() as u64
    }

    pub fn step(&mut self) {
        self.diffuse_free_a();
        let reactive = self.build_grid();
        self.diffuse_enzymes(reactive);
        self.decompose_escaped();
        self.unimolecular();
        self.bind_candidates();
        self.free_a.retain(|&i| self.a_state[i as usize] == AState::Free);
        for &a in &self.fresh_a {
            self.a_fresh[a as usize] = false;
        }
        for &e in &self.fresh_e {
            self.e_fresh[e as usize] = false;
        }
        self.fresh_a.clear();
        self.fresh_e.clear();
        self.clock += 1;
    }

    fn diffuse_free_a(&mut self) {
        let rng = &mut self.rng;
        let s = self.sigma_a;
        for &i in &self.free_a {
            let p = &mut self.a_pos[i as usize];
            for x in p.iter_mut() {
                *x += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    /// Register every free molecule that may bind this step. Returns false
    /// when binding is impossible.
    fn build_grid(&mut self) -> bool {
        self.grid.clear();
        if self.r_b <= 0.0 || self.e_pos.len() == self.bound.len() {
            return false;
        }
        for &a in &self.free_a {
            if !self.a_fresh[a as usize] {
                self.grid.insert(a, self.a_pos[a as usize]);
            }
        }
        self.grid.finish();
        !self.grid.is_empty()
    }

    /// Displace enzymes and complexes, reflect free enzymes, set aside
    /// escaped complexes and note free enzymes landing in an occupied cell.
    /// Neither the registered molecules nor these enzymes move again before
    /// binding, so the lookup can happen here.
    fn diffuse_enzymes(&mut self, reactive: bool) {
        let rng = &mut self.rng;
        let h = self.half_side;
        self.escaped.clear();
        self.candidates.clear();
        for (e, (p, &cargo)) in self.e_pos.iter_mut().zip(&self.e_cargo).enumerate() {
            let s = if cargo == NO_CARGO { self.sigma_e } else { self.sigma_ea };
            for x in p.iter_mut() {
                *x += s * rng.sample::<f64, _>(StandardNormal);
            }
            let outside = p.iter().any(|x| x.abs() > h);
            if cargo != NO_CARGO {
                if outside {
                    self.escaped.push(e as u32);
                }
                continue;
            }
            if outside {
                fold(p, h);
            }
            if reactive {
                if let Some(cell) = self.grid.hit(*p) {
                    self.candidates.push((e as u32, cell));
                }
            }
        }
    }

    /// Complexes that left the cube are split; the enzyme is reflected back
    /// and a released molecule sits where the complex met the face.
    fn decompose_escaped(&mut self) {
        if self.escaped.is_empty() {
            return;
        }
        let h = self.half_side;
        for k in 0..self.escaped.len() {
            let e = self.escaped[k] as usize;
            let a = self.e_cargo[e] as usize;
            let mut contact = self.e_pos[e];
            for x in contact.iter_mut() {
                *x = x.clamp(-h, h);
            }
            fold(&mut self.e_pos[e], h);
            self.e_cargo[e] = NO_CARGO;
            self.e_fresh[e] = true;
            self.fresh_e.push(e as u32);
            self.tally.forced_decompositions += 1;
            if self.rng.random::<f64>() < self.forced_degrade {
                self.a_state[a] = AState::Degraded;
                self.a_pos[a] = contact;
                self.n_degraded += 1;
                self.tally.degradations += 1;
            } else {
                self.release(a, contact);
            }
        }
        self.bound.retain(|&e| self.e_cargo[e as usize] != NO_CARGO);
    }

    fn release(&mut self, a: usize, pos: [f64; 3]) {
        self.a_state[a] = AState::Free;
        self.a_pos[a] = pos;
        self.a_fresh[a] = true;
        self.fresh_a.push(a as u32);
        self.free_a.push(a as u32);
        self.tally.unbindings += 1;
    }

    fn unimolecular(&mut self) {
        let UnimolecularProbs { p_unbind, p_degrade } = self.probs;
        if p_unbind + p_degrade <= 0.0 {
            return;
        }
        let mut keep = 0;
        for k in 0..self.bound.len() {
            let e = self.bound[k] as usize;
            let u: f64 = self.rng.random();
            if u < p_unbind {
                let a = self.e_cargo[e] as usize;
                self.e_cargo[e] = NO_CARGO;
                self.e_fresh[e] = true;
                self.fresh_e.push(e as u32);
                let pos = self.e_pos[e];
                self.release(a, pos);
            } else if u < p_unbind + p_degrade {
                let a = self.e_cargo[e] as usize;
                self.e_cargo[e] = NO_CARGO;
                self.e_fresh[e] = true;
                self.fresh_e.push(e as u32);
                self.a_state[a] = AState::Degraded;
                self.a_pos[a] = self.e_pos[e];
                self.n_degraded += 1;
                self.tally.degradations += 1;
            } else {
                self.bound[keep] = e as u32;
                keep += 1;
            }
        }
        self.bound.truncate(keep);
    }

    /// Bind candidate pairs closer than the binding radius, nearest first.
    fn bind_candidates(&mut self) {
        if self.candidates.is_empty() {
            return;
        }
        let r2 = self.r_b * self.r_b;
        self.pairs.clear();
        for &(e, cell) in &self.candidates {
            let p = self.e_pos[e as usize];
            for a in self.grid.members(cell) {
                let q = self.a_pos[a as usize];
                let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                if d2 <= r2 {
                    self.pairs.push((d2, e, a));
                }
            }
        }
        if self.pairs.is_empty() {
            return;
        }
        self.pairs.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

        let h = self.half_side;
        for k in 0..self.pairs.len() {
            let (_, e, a) = self.pairs[k];
            let (e, a) = (e as usize, a as usize);
            if self.e_cargo[e] != NO_CARGO || self.a_state[a] != AState::Free {
                continue;
            }
            let p = self.e_pos[e];
            let q = self.a_pos[a];
            let mut mid: [f64; 3] = std::array::from_fn(|d| 0.5 * (p[d] + q[d]));
            for x in mid.iter_mut() {
                *x = x.clamp(-h, h);
            }
            self.e_pos[e] = mid;
            self.a_pos[a] = mid;
            self.e_cargo[e] = a as u32;
            self.a_state[a] = AState::Bound;
            self.bound.push(e as u32);
            self.tally.bindings += 1;
        }
    }
}

/// Specular reflection into `[-h, h]` on every axis.
fn fold(p: &mut [f64; 3], h: f64) {
    let period = 4.0 * h;
    for x in p.iter_mut() {
        if x.abs() <= h {
            continue;
        }
        let mut y = (*x + h).rem_euclid(period);
        if y > 2.0 * h {
            y = period - y;
        }
        *x = y - h;
    }
}

/// The first `n` points of the cubic lattice with spacing `2 r`, ordered by
/// distance from the origin and then lexicographically.
pub fn emission_lattice(n: usize, r: f64) -> Vec<[f64; 3]> {
    if n == 0 {
        return Vec::new();
    }
    let mut k = ((3.0 * n as f64 / (4.0 * std::f64::consts::PI)).cbrt().ceil() as i64) + 2;
    loop {
        let mut pts = Vec::with_capacity(((2 * k + 1) as usize).pow(3));
        for i in -k..=k {
            for j in -k..=k {
                for l in -k..=k {
                    pts.push((i * i + j * j + l * l, i, j, l));
                }
            }
        }
        pts.sort_unstable();
        // Every point inside the radius-k ball is enumerated, so the prefix
        // is exact as long as it ends inside that ball.
        if pts.len() >= n && pts[n - 1].0 <= k * k {
            let s = 2.0 * r;
            return pts[..n].iter().map(|&(_, i, j, l)| [i as f64 * s, j as f64 * s, l as f64 * s]).collect();
        }
        k *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    impl SimState {
        /// Binding phase alone, without displacing anything first.
        fn bimolecular(&mut self) {
            self.candidates.clear();
            if self.build_grid() {
                for e in 0..self.e_pos.len() {
                    if self.e_cargo[e] == NO_CARGO && !self.e_fresh[e] {
                        if let Some(cell) = self.grid.hit(self.e_pos[e]) {
                            self.candidates.push((e as u32, cell));
                        }
                    }
                }
            }
            self.bind_candidates();
        }
    }

    fn quiet_config() -> SystemConfig {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.n_enzyme = 0;
        cfg.k1 = 0.0;
        cfg.k_minus1 = 0.0;
        cfg.k2 = 0.0;
        cfg
    }

    #[test]
    fn unbinding_probability_for_default_rates() {
        let p = UnimolecularProbs::new(1e4, 1e6, 0.5e-6);
        // The quoted 3.92e-3 is truncated, not rounded.
        assert!((p.p_unbind - 3.92e-3).abs() < 0.01e-3, "{}", p.p_unbind);
        let want = 1e4 / 1.01e6 * (1.0 - (-0.505f64).exp());
        assert!((p.p_unbind - want).abs() < 1e-15);
        assert!(p.p_unbind + p.p_degrade <= 1.0);
        let zero = UnimolecularProbs::new(0.0, 0.0, 1e-6);
        assert_eq!(zero.p_unbind + zero.p_degrade, 0.0);
    }

    #[test]
    fn lattice_small_counts() {
        assert_eq!(emission_lattice(1, 0.5e-9), vec![[0.0; 3]]);
        let seven = emission_lattice(7, 0.5e-9);
        assert_eq!(seven[0], [0.0; 3]);
        for p in &seven[1..] {
            let d: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((d - 1e-9).abs() < 1e-20);
        }
        // Lexicographic tie-break: (-1,0,0) comes first among the neighbors.
        assert_eq!(seven[1], [-1e-9, 0.0, 0.0]);
        assert_eq!(seven[6], [1e-9, 0.0, 0.0]);
    }

    #[test]
    fn lattice_is_centered_and_distinct() {
        let pts = emission_lattice(5000, 0.5e-9);
        assert_eq!(pts.len(), 5000);
        let com: Vec<f64> = (0..3).map(|d| pts.iter().map(|p| p[d]).sum::<f64>() / 5000.0).collect();
        for c in com {
            assert!(c.abs() <= 1e-9);
        }
        let mut keys: Vec<[i64; 3]> = pts.iter().map(|p| p.map(|x| (x * 1e9).round() as i64)).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 5000);
    }

    #[test]
    fn fold_reflects_into_cube() {
        let h = 1.0;
        let mut p = [1.2, -1.5, 3.5];
        fold(&mut p, h);
        assert!((p[0] - 0.8).abs() < 1e-12);
        assert!((p[1] + 0.5).abs() < 1e-12);
        assert!((p[2] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_world_observes_nothing() {
        let s = SimState::without_enzymes(&quiet_config(), 1).unwrap();
        assert_eq!(s.observe(), 0);
    }

    #[test]
    fn molecule_at_receiver_is_seen_until_bound() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.n_enzyme = 1;
        let mut s = SimState::without_enzymes(&cfg, 2).unwrap();
        let c = cfg.receiver_center();
        s.add_free_a(c);
        assert_eq!(s.observe(), 1);
        s.add_enzyme(c);
        s.bimolecular();
        s.free_a.retain(|&i| s.a_state[i as usize] == AState::Free);
        assert_eq!(s.observe(), 0);
        let ps = s.particles();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].kind, ParticleKind::EA);
        assert_eq!(ps[0].position, c);
    }

    #[test]
    fn coincident_pair_binds_within_one_step() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.k_minus1 = 0.0;
        cfg.k2 = 0.0;
        let mut s = SimState::without_enzymes(&cfg, 3).unwrap();
        s.add_free_a([10e-9, 0.0, 0.0]);
        s.add_enzyme([10e-9, 0.0, 0.0]);
        // Displacements are tens of nanometres per step, so bind directly
        // from the coincident configuration.
        s.bimolecular();
        assert_eq!(s.census().n_ea, 1);
        let ea = s.particles().into_iter().find(|p| p.kind == ParticleKind::EA).unwrap();
        assert_eq!(ea.position, [10e-9, 0.0, 0.0]);
    }

    #[test]
    fn greedy_pairing_uses_each_molecule_once() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.k_minus1 = 0.0;
        cfg.k2 = 0.0;
        let mut s = SimState::without_enzymes(&cfg, 4).unwrap();
        let rb = s.binding_radius();
        s.add_free_a([0.0, 0.0, 0.0]);
        s.add_free_a([0.9 * rb, 0.0, 0.0]);
        s.add_enzyme([0.5 * rb, 0.0, 0.0]);
        s.add_enzyme([0.2 * rb, 0.0, 0.0]);
        s.bimolecular();
        // Closest pair is (enzyme 1, molecule 0) at 0.2 r_B; then enzyme 0
        // takes molecule 1 at 0.4 r_B.
        assert_eq!(s.e_cargo, vec![1, 0]);
        assert_eq!(s.tally().bindings, 2);
    }

    #[test]
    fn fresh_products_do_not_rebind_in_same_step() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.k2 = 0.0;
        cfg.k_minus1 = 1e12;
        let mut s = SimState::without_enzymes(&cfg, 5).unwrap();
        s.add_free_a([0.0; 3]);
        s.add_enzyme([0.0; 3]);
        s.bimolecular();
        assert_eq!(s.census().n_ea, 1);
        // Unbinding is certain at this rate; the products must stay apart
        // for the rest of the step even though they are co-located.
        s.unimolecular();
        s.bimolecular();
        assert_eq!(s.census().n_ea, 0);
        assert_eq!(s.tally().unbindings, 1);
    }

    #[test]
    fn escaped_complex_is_split_at_face() {
        let mut cfg = SystemConfig::preset("system1").unwrap();
        cfg.k_minus1 = 0.0;
        cfg.k2 = 1e6;
        let mut s = SimState::without_enzymes(&cfg, 6).unwrap();
        let h = s.half_side;
        s.add_free_a([h, 0.0, 0.0]);
        s.add_enzyme([h, 0.0, 0.0]);
        s.bimolecular();
        s.free_a.retain(|&i| s.a_state[i as usize] == AState::Free);
        assert_eq!(s.census().n_ea, 1);
        s.e_pos[0][0] = h + 5e-9;
        s.escaped = vec![0];
        s.decompose_escaped();
        // Only degradation has nonzero odds here.
        assert_eq!(s.census().n_ea, 0);
        assert_eq!(s.census().n_a_degraded, 1);
        assert!((s.e_pos[0][0] - (h - 5e-9)).abs() < 1e-15);
    }
}
