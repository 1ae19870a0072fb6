use std::f64::consts::PI;

use molcom_core::detect::{
    bit_error_prob, isi_mean, mean_error_prob, observation_probability, BitSequence, CountFamily, IsiMode,
};
use molcom_core::{decay_time, expected_observed, ChannelModel, DecayMethod, DecayQuery, SystemConfig};
use proptest::prelude::*;

fn system1() -> SystemConfig {
    SystemConfig::preset("system1").unwrap()
}

/// Expected observed count written out from scratch.
fn scalar_oracle(cfg: &SystemConfig, enzymes: bool, t: f64) -> f64 {
    let kb = 1.38e-23;
    let d = kb * cfg.env.temperature / (6.0 * PI * cfg.env.viscosity * cfg.species.a.radius);
    let c = if enzymes { cfg.n_enzyme as f64 / cfg.v_enz_side.powi(3) } else { 0.0 };
    let v_ob = 4.0 / 3.0 * PI * cfg.rx_radius.powi(3);
    let r2 = cfg.rx_distance * cfg.rx_distance;
    cfg.n_emit as f64 * v_ob * (-cfg.k1 * c * t - r2 / (4.0 * d * t)).exp() / (4.0 * PI * d * t).powf(1.5)
}

#[test]
fn expected_count_agrees_with_scalar_oracle() {
    let cfg = system1();
    for enz in [true, false] {
        let m = ChannelModel::new(&cfg, enz);
        for &t in &[5e-6, 25.62e-6, 1e-4, 2e-4] {
            let got = expected_observed(t, &m).unwrap();
            let want = scalar_oracle(&cfg, enz, t);
            assert!(((got - want) / want).abs() < 1e-12);
        }
    }
    let at = scalar_oracle(&cfg, true, 25.62e-6);
    assert!((at - 2.9).abs() < 0.05);
}

#[test]
fn two_bit_isi_mean_matches_two_term_sum() {
    let cfg = system1();
    let m = ChannelModel::new(&cfg, true);
    let seq = BitSequence::parse("11", 120e-6).unwrap();
    let got = isi_mean(1, &seq, &m, IsiMode::Full).unwrap();
    let want = scalar_oracle(&cfg, true, m.t_max) + scalar_oracle(&cfg, true, 120e-6 + m.t_max);
    assert!(((got - want) / want).abs() < 1e-12);
    // Without ISI only the current emission counts.
    let none = isi_mean(1, &seq, &m, IsiMode::None).unwrap();
    assert!(((none - m.n_max) / m.n_max).abs() < 1e-12);
}

#[test]
fn enzymes_never_increase_expected_count() {
    let cfg = system1();
    let on = ChannelModel::new(&cfg, true);
    let off = ChannelModel::new(&cfg, false);
    for k in 0..200 {
        let t = 1e-7 * 10f64.powf(k as f64 * 0.025);
        assert!(expected_observed(t, &on).unwrap() <= expected_observed(t, &off).unwrap());
    }
    assert!(on.n_max <= off.n_max);
    assert!(on.t_max <= off.t_max);
}

#[test]
fn numeric_decay_nonincreasing_in_alpha() {
    for enz in [true, false] {
        let m = ChannelModel::new(&system1(), enz);
        let mut prev = f64::INFINITY;
        for i in 1..20 {
            let alpha = i as f64 * 0.05;
            let t = decay_time(&m, DecayQuery::new(alpha, DecayMethod::NumericScan).unwrap()).unwrap();
            assert!(t <= prev);
            prev = t;
        }
    }
}

#[test]
fn all_ones_isi_grows_and_error_falls_to_floor() {
    let m = ChannelModel::new(&system1(), true);
    let seq = BitSequence::parse(&"1".repeat(20), 120e-6).unwrap();
    let mut prev_mean = 0.0;
    let mut prev_pe = 1.0;
    for j in 0..seq.len() {
        let mean = isi_mean(j, &seq, &m, IsiMode::Full).unwrap();
        assert!(mean >= prev_mean);
        prev_mean = mean;
        let pe = bit_error_prob(j, &seq, &m, 2, CountFamily::Poisson, IsiMode::Full).unwrap();
        assert!(pe <= prev_pe + 1e-15);
        prev_pe = pe;
    }
    // Floor: the last few bits barely change.
    let a = bit_error_prob(18, &seq, &m, 2, CountFamily::Poisson, IsiMode::Full).unwrap();
    let b = bit_error_prob(19, &seq, &m, 2, CountFamily::Poisson, IsiMode::Full).unwrap();
    assert!(a > 0.0 && (a - b).abs() < 1e-3);
}

#[test]
fn no_isi_mean_error_equals_first_bit_formula() {
    let m = ChannelModel::new(&system1(), true);
    let p = observation_probability(m.t_max, &m).unwrap().p_ob;
    let mu = 5000.0 * p;
    for xi in 1..6u64 {
        let r = mean_error_prob(&m, 120e-6, xi, CountFamily::Poisson, IsiMode::None, 30, 50, 0.5, 3).unwrap();
        // P1 · Pr(N < xi)
        let mut cdf = 0.0;
        let mut term = (-mu).exp();
        for w in 0..xi {
            cdf += term;
            term *= mu / (w + 1) as f64;
        }
        let want = 0.5 * cdf;
        for pe in &r.per_bit {
            assert!((pe - want).abs() < 1e-12);
        }
        assert!((r.mean_error - want).abs() < 1e-12);
    }
}

#[test]
fn mean_error_is_independent_of_thread_count() {
    let m = ChannelModel::new(&system1(), true);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| mean_error_prob(&m, 50e-6, 2, CountFamily::Poisson, IsiMode::Full, 50, 64, 0.5, 11).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.mean_error.to_bits(), b.mean_error.to_bits());
    assert_eq!(a.per_bit, b.per_bit);
}

fn config_strategy() -> impl Strategy<Value = SystemConfig> {
    (1e3f64..1e6, 1e-21f64..1e-18, 100.0f64..1000.0, 0.05f64..0.4, 0.2f64..2.0).prop_map(
        |(n_enzyme, k1, r0_nm, rob_frac, ra_nm)| {
            let mut cfg = system1();
            cfg.n_enzyme = n_enzyme as u64;
            cfg.k1 = k1;
            cfg.rx_distance = r0_nm * 1e-9;
            cfg.rx_radius = rob_frac * cfg.rx_distance;
            cfg.species.a = molcom_core::physchem::SpeciesSpec::new(
                molcom_core::SpeciesKind::A,
                ra_nm * 1e-9,
                &cfg.env,
            )
            .unwrap();
            cfg
        },
    )
}

proptest! {
    #[test]
    fn enzyme_peak_never_later(cfg in config_strategy()) {
        let on = ChannelModel::new(&cfg, true);
        let off = ChannelModel::new(&cfg, false);
        prop_assert!(on.t_max <= off.t_max);
        prop_assert!(on.n_max <= off.n_max);
        let q = DecayQuery::new(0.5, DecayMethod::ClosedFormBound).unwrap();
        prop_assert!(decay_time(&on, q).unwrap() > on.t_max);
    }
}
