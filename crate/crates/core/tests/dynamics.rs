use std::sync::Arc;

use bgk_core::diagnostics::{conservation_report, equilibrium_gap, total_entropy};
use bgk_core::dynamics::*;
use bgk_core::*;

fn mixture(grid: &VelocityGrid, masses: &[f64], freq: impl Fn(usize, usize) -> FrequencyModel) -> Arc<Mixture> {
    let n = masses.len();
    let species = masses
        .iter()
        .enumerate()
        .map(|(i, &m)| Species::new(format!("s{}", i + 1), m).unwrap())
        .collect();
    let matrix = (0..n)
        .map(|i| (0..n).map(|j| eval_frequency(&freq(i, j), grid).unwrap()).collect())
        .collect();
    Arc::new(Mixture::new(grid.clone(), species, matrix).unwrap())
}

fn constant(_: usize, _: usize) -> FrequencyModel {
    FrequencyModel::Constant { nu0: 1.0 }
}

fn bimodal(g: &VelocityGrid) -> Distribution {
    let a = maxwellian(0.5, [-1.0, 0.0, 0.0], 0.5, 1.0, g).unwrap();
    let b = maxwellian(0.5, [1.0, 0.2, 0.0], 0.5, 1.0, g).unwrap();
    Distribution::new(a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect()).unwrap()
}

fn max_rel_nodewise(a: &Distribution, b: &Distribution) -> f64 {
    let peak = b.values().iter().cloned().fold(0.0, f64::max);
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / peak)
        .fold(0.0, f64::max)
}

#[test]
fn maxwellian_is_its_own_target() {
    let g = VelocityGrid::cube(6.0, 24).unwrap();
    let f = maxwellian(1.0, [0.2, 0.0, 0.0], 1.0, 1.0, &g).unwrap();
    let s = MixtureState::new(mixture(&g, &[1.0], constant), vec![f.clone()], 0.0).unwrap();
    let t = build_targets(&s, &NewtonConfig::default()).unwrap();
    assert!(max_rel_nodewise(t.target(0, 0), &f) < 1e-8);
    let q = bgk_rhs(&s, &t).unwrap();
    let peak = f.values().iter().cloned().fold(0.0, f64::max);
    assert!(q[0].iter().all(|x| x.abs() < 1e-8 * peak));
}

#[test]
fn identical_species_share_targets() {
    let g = VelocityGrid::cube(6.0, 24).unwrap();
    let f = bimodal(&g);
    let mix = mixture(&g, &[1.0, 1.0], |i, j| {
        if i == j {
            FrequencyModel::Constant { nu0: 1.0 }
        } else {
            FrequencyModel::CoulombLike { nu0: 1.0 }
        }
    });
    let s = MixtureState::new(mix, vec![f.clone(), f], 0.0).unwrap();
    let t = build_targets(&s, &NewtonConfig::default()).unwrap();
    assert!(max_rel_nodewise(t.target(0, 1), t.target(1, 0)) < 1e-8);
}

#[test]
fn constant_frequency_pair_targets_match_closed_form() {
    // wide grid so the discrete moments of the mixture Maxwellians are analytic to ~1e-9
    let g = VelocityGrid::cube(10.0, 48).unwrap();
    let f1 = maxwellian(1.0, [1.0, 0.0, 0.0], 1.0, 1.0, &g).unwrap();
    let f2 = maxwellian(1.0, [-1.0, 0.0, 0.0], 2.0, 2.0, &g).unwrap();
    let s = MixtureState::new(mixture(&g, &[1.0, 2.0], constant), vec![f1, f2], 0.0).unwrap();
    let t = build_targets(&s, &NewtonConfig::default()).unwrap();

    // momentum: 1*1 + 2*(-1) over total mass 3; energy: 2E = 12 = 3|u|^2 + 6T
    let u = [-1.0 / 3.0, 0.0, 0.0];
    let temp = (12.0 - 3.0 * u[0] * u[0]) / 6.0;
    let p = t.pair(0, 1).unwrap().multipliers;
    let a = macros_from_lambda(&p.first(), 1.0).unwrap();
    let b = macros_from_lambda(&p.second(), 2.0).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.temperature, b.temperature);
    assert!((a.u[0] - u[0]).abs() < 1e-6, "{:?}", a.u);
    assert!((a.temperature - temp).abs() < 1e-6, "{}", a.temperature);
    assert!((a.n - 1.0).abs() < 1e-6 && (b.n - 1.0).abs() < 1e-6);
}

#[test]
fn rhs_matches_hand_expansion() {
    let g = VelocityGrid::cube(6.0, 16).unwrap();
    let mix = mixture(&g, &[1.0, 2.0], |i, j| match (i, j) {
        (0, 0) => FrequencyModel::Constant { nu0: 1.0 },
        (0, 1) => FrequencyModel::CoulombLike { nu0: 1.5 },
        (1, 0) => FrequencyModel::SoftPowerLaw { nu0: 0.5, gamma: 1.0 },
        _ => FrequencyModel::Constant { nu0: 2.0 },
    });
    let f1 = bimodal(&g);
    let f2 = maxwellian(1.0, [-0.5, 0.0, 0.0], 1.5, 2.0, &g).unwrap();
    let s = MixtureState::new(mix.clone(), vec![f1.clone(), f2], 0.0).unwrap();
    let t = build_targets(&s, &NewtonConfig::default()).unwrap();
    let q = bgk_rhs(&s, &t).unwrap();
    for node in [0, 17, 901, 2048, 4095] {
        let v = g.node(node);
        let nu11 = 1.0;
        let nu12 = 1.5 * (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).powf(-1.5);
        let f = f1.values()[node];
        let expected = nu11 * (t.target(0, 0).values()[node] - f) + nu12 * (t.target(0, 1).values()[node] - f);
        assert!((q[0][node] - expected).abs() <= 1e-15 * expected.abs().max(1e-300) + 1e-300);
    }
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let g = VelocityGrid::cube(7.0, 24).unwrap();
    let f1 = maxwellian(1.0, [0.3, 0.0, 0.0], 1.0, 1.0, &g).unwrap();
    let f2 = maxwellian(0.5, [0.3, 0.0, 0.0], 1.0, 2.0, &g).unwrap();
    let mix = mixture(&g, &[1.0, 2.0], |i, j| {
        if i == j {
            FrequencyModel::Constant { nu0: 1.0 }
        } else {
            FrequencyModel::CoulombLike { nu0: 1.0 }
        }
    });
    let s = MixtureState::new(mix, vec![f1.clone(), f2.clone()], 0.0).unwrap();
    let t = build_targets(&s, &NewtonConfig::default()).unwrap();
    for qi in bgk_rhs(&s, &t).unwrap() {
        assert!(qi.iter().all(|x| x.abs() < 1e-8));
    }
    for scheme in [Scheme::ExplicitEuler, Scheme::SemiImplicit] {
        let next = step_with_targets(&s, &t, 0.1, scheme).unwrap();
        assert!((next.t - 0.1).abs() < 1e-15);
        assert!(max_rel_nodewise(next.distribution(0), &f1) < 1e-8);
        assert!(max_rel_nodewise(next.distribution(1), &f2) < 1e-8);
    }
}

#[test]
fn explicit_relaxation_rate_matches_exponential() {
    let g = VelocityGrid::cube(6.0, 24).unwrap();
    let f0 = bimodal(&g);
    let s0 = MixtureState::new(mixture(&g, &[1.0], constant), vec![f0.clone()], 0.0).unwrap();
    let cfg = NewtonConfig::default();
    let m = build_targets(&s0, &cfg).unwrap().target(0, 0).clone();
    let mut s = s0;
    for _ in 0..100 {
        s = step(&s, 0.01, Scheme::ExplicitEuler, &cfg).unwrap();
    }
    let ratio = s.distribution(0).l1_distance(&m, &g).unwrap() / f0.l1_distance(&m, &g).unwrap();
    let exact = (-1.0f64).exp();
    assert!((ratio / exact - 1.0).abs() < 0.02, "{ratio} vs {exact}");
}

#[test]
fn semi_implicit_large_step_is_positive_and_monotone() {
    let g = VelocityGrid::cube(6.0, 24).unwrap();
    let f0 = bimodal(&g);
    let s0 = MixtureState::new(mixture(&g, &[1.0], constant), vec![f0.clone()], 0.0).unwrap();
    let cfg = NewtonConfig::default();
    let m = build_targets(&s0, &cfg).unwrap().target(0, 0).clone();
    let s1 = step(&s0, 10.0, Scheme::SemiImplicit, &cfg).unwrap();
    let f1 = s1.distribution(0).values();
    for k in 0..g.len() {
        let closed = (f0.values()[k] + 10.0 * m.values()[k]) / 11.0;
        assert!(f1[k] >= 0.0);
        assert!((f1[k] - closed).abs() <= 1e-15 * closed.max(1e-300));
        assert!((f1[k] - m.values()[k]).abs() <= (f0.values()[k] - m.values()[k]).abs());
    }
    // the target stays put because constant-frequency moments are conserved exactly
    let m1 = build_targets(&s1, &cfg).unwrap().target(0, 0).clone();
    assert!(max_rel_nodewise(&m1, &m) < 1e-8);
}

#[test]
fn zero_final_time_records_initial_state() {
    let g = VelocityGrid::cube(6.0, 16).unwrap();
    let s = MixtureState::new(mixture(&g, &[1.0], constant), vec![bimodal(&g)], 0.0).unwrap();
    let cfg = SimulationConfig {
        dt: 0.1,
        t_final: 0.0,
        scheme: Scheme::ExplicitEuler,
        newton: NewtonConfig::default(),
        record_every: 1,
    };
    let recs = simulate(&s, &cfg).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].t, 0.0);
}

#[test]
fn constant_frequency_mixture_reaches_common_equilibrium() {
    // the common temperature is near 2, so six initial widths clip the final state of the light species
    let widths = auto_bounds(&[([1.0, 0.0, 0.0], 1.0, 1.0), ([-1.0, 0.0, 0.0], 2.0, 2.0)], 9.0).unwrap();
    let g = VelocityGrid::new(widths.0, widths.1, [32; 3]).unwrap();
    let f1 = maxwellian(1.0, [1.0, 0.0, 0.0], 1.0, 1.0, &g).unwrap();
    let f2 = maxwellian(1.0, [-1.0, 0.0, 0.0], 2.0, 2.0, &g).unwrap();
    let s = MixtureState::new(mixture(&g, &[1.0, 2.0], constant), vec![f1, f2], 0.0).unwrap();
    let cfg = SimulationConfig {
        dt: 0.05,
        t_final: 20.0,
        scheme: Scheme::ExplicitEuler,
        newton: NewtonConfig::default(),
        record_every: 20,
    };
    let recs = simulate(&s, &cfg).unwrap();
    assert_eq!(recs.len(), 21);
    let summary = conservation_report(&recs).unwrap();
    assert!(summary.max_drift() < 1e-8, "{summary:?}");

    let du: Vec<f64> = recs
        .iter()
        .map(|r| (0..3).map(|a| (r.species[0].u[a] - r.species[1].u[a]).powi(2)).sum::<f64>().sqrt())
        .collect();
    let dt: Vec<f64> = recs
        .iter()
        .map(|r| (r.species[0].temperature - r.species[1].temperature).abs())
        .collect();
    for w in du.windows(2).chain(dt.windows(2)) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert!(*du.last().unwrap() < 1e-6);
    assert!(*dt.last().unwrap() < 1e-6);
    for w in recs.windows(2) {
        assert!(w[1].entropy <= w[0].entropy + 1e-8);
    }
}

#[test]
fn semi_implicit_drift_is_first_order() {
    let g = VelocityGrid::cube(6.0, 16).unwrap();
    let mix = mixture(&g, &[1.0, 2.0], |i, j| {
        if i == j {
            FrequencyModel::Constant { nu0: 1.0 }
        } else {
            FrequencyModel::SoftPowerLaw { nu0: 1.0, gamma: 2.0 }
        }
    });
    let f1 = maxwellian(1.0, [0.8, 0.0, 0.0], 0.8, 1.0, &g).unwrap();
    let f2 = maxwellian(1.0, [-0.5, 0.0, 0.0], 1.2, 2.0, &g).unwrap();
    let s = MixtureState::new(mix, vec![f1, f2], 0.0).unwrap();
    let drift = |dt: f64| {
        let cfg = SimulationConfig {
            dt,
            t_final: 1.0,
            scheme: Scheme::SemiImplicit,
            newton: NewtonConfig::default(),
            record_every: 1_000_000,
        };
        let recs = simulate(&s, &cfg).unwrap();
        (recs.last().unwrap().total_energy - recs[0].total_energy).abs()
    };
    let coarse = drift(0.01);
    let fine = drift(0.005);
    let ratio = coarse / fine;
    assert!(coarse > 1e-8, "drift {coarse} too small to measure");
    assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn positivity_under_both_schemes() {
    let g = VelocityGrid::cube(6.0, 16).unwrap();
    let mix = mixture(&g, &[1.0, 3.0], |i, j| {
        if i == j {
            FrequencyModel::SoftPowerLaw { nu0: 1.0, gamma: 1.0 }
        } else {
            FrequencyModel::CoulombLike { nu0: 2.0 }
        }
    });
    let f1 = bimodal(&g);
    let f2 = maxwellian(0.7, [0.0, 0.5, 0.0], 0.6, 3.0, &g).unwrap();
    let s = MixtureState::new(mix.clone(), vec![f1, f2], 0.0).unwrap();
    let cfg = NewtonConfig::default();
    let dt_max = 1.0 / mix.max_total_frequency();
    let mut explicit = s.clone();
    let mut implicit = s;
    for _ in 0..5 {
        explicit = step(&explicit, dt_max, Scheme::ExplicitEuler, &cfg).unwrap();
        implicit = step(&implicit, 5.0, Scheme::SemiImplicit, &cfg).unwrap();
    }
    for st in [&explicit, &implicit] {
        for f in st.distributions() {
            assert!(f.values().iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn entropy_and_gap_along_relaxation() {
    let g = VelocityGrid::cube(6.0, 20).unwrap();
    let s = MixtureState::new(mixture(&g, &[1.0], constant), vec![bimodal(&g)], 0.0).unwrap();
    let cfg = SimulationConfig {
        dt: 0.1,
        t_final: 20.0,
        scheme: Scheme::ExplicitEuler,
        newton: NewtonConfig::default(),
        record_every: 5,
    };
    let recs = simulate(&s, &cfg).unwrap();
    for w in recs.windows(2) {
        assert!(w[1].entropy <= w[0].entropy + 1e-8);
        assert!(w[1].species[0].equilibrium_gap <= w[0].species[0].equilibrium_gap + 1e-12);
    }
    assert!(recs.last().unwrap().species[0].equilibrium_gap < 1e-5);
    let h0 = total_entropy(&s);
    assert_eq!(recs[0].entropy, h0);
    assert!(equilibrium_gap(s.distribution(0), 1.0, &g).unwrap() > 0.1);
}
