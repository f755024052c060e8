//! End-to-end checks over the shipped fixtures and the beam scenario.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use mlaris::array::{
    beam_metrics, beam_pattern, compare_schemes, desired_profile, ArrayConfig, BeamScenario, CodingScheme, ProbeRing,
};
use mlaris::fixtures::{fitted_endpoints, fitted_envelope, SWEEP_RESONANCE_HZ};
use mlaris::iq::StageSet;
use mlaris::matching::{
    cascade_impedance, optimize_tier, reflection_at_load, select_tier, synthesize_network, AnnealConfig,
    CascadedNetwork, FrequencyBand, NetworkSynthesis, DEFAULT_Z0,
};
use mlaris::transducer::{simplified_impedance, ImpedanceEnvelope, PztCircuitParams};
use mlaris::Complex64;

fn envelope() -> &'static ImpedanceEnvelope {
    static ENV: OnceLock<ImpedanceEnvelope> = OnceLock::new();
    ENV.get_or_init(|| fitted_envelope(9).unwrap())
}

fn synthesis() -> &'static NetworkSynthesis {
    static SYN: OnceLock<NetworkSynthesis> = OnceLock::new();
    SYN.get_or_init(|| {
        synthesize_network(
            envelope(),
            &FrequencyBand::default(),
            DEFAULT_Z0,
            &AnnealConfig::default(),
        )
        .unwrap()
    })
}

#[test]
fn fitted_endpoints_reproduce_quoted_points() {
    let (alpha, beta) = fitted_endpoints().unwrap();
    for (p, quoted) in [
        (alpha, Complex64::new(678.0, -142.0)),
        (beta, Complex64::new(494.0, -247.0)),
    ] {
        let z = simplified_impedance(&p, SWEEP_RESONANCE_HZ).unwrap();
        assert!((z.norm() / quoted.norm() - 1.0).abs() < 0.05, "{z} vs {quoted}");
    }
}

#[test]
fn envelope_moves_monotonically() {
    let env = envelope();
    let (a, b) = (env.entry(9).unwrap(), env.entry(1).unwrap());
    for w in env.entries().windows(2) {
        assert!((w[1].r_e - w[0].r_e) * (a.r_e - b.r_e) >= 0.0);
        assert!((w[1].c_e - w[0].c_e) * (a.c_e - b.c_e) >= 0.0);
        assert!((w[1].re_zs_eff - w[0].re_zs_eff) * (a.re_zs_eff - b.re_zs_eff) >= 0.0);
    }
}

#[test]
fn synthesis_reports_consistent_worst_case() {
    let syn = synthesis();
    let band = FrequencyBand::default();
    assert_eq!(syn.network.len(), 3);
    for t in syn.network.tiers() {
        assert!(t.c_m > 0.0 && t.l_m > 0.0);
    }
    assert_eq!(syn.entries.len(), 9);
    for e in &syn.entries {
        let p = envelope().entry(e.entry_index).unwrap();
        let worst = band
            .grid()
            .into_iter()
            .map(|f| {
                let z = cascade_impedance(p, &syn.network, e.tier_count, f).unwrap();
                reflection_at_load(z, DEFAULT_Z0).unwrap().norm()
            })
            .fold(0.0, f64::max);
        assert!((worst - e.worst_gamma).abs() < 1e-12, "entry {}", e.entry_index);
        assert!(e.worst_gamma < e.unmatched_worst_gamma);
    }
    let first = &syn.entries[0];
    let z = cascade_impedance(envelope().entry(1).unwrap(), &syn.network, 1, band.center()).unwrap();
    assert!(reflection_at_load(z, DEFAULT_Z0).unwrap().norm() <= first.worst_gamma);
}

#[test]
fn runtime_selection_follows_envelope_position() {
    let syn = synthesis();
    assert_eq!(
        select_tier(envelope().entry(2).unwrap(), &syn.network, 28e3).unwrap(),
        1
    );
    assert_eq!(
        select_tier(envelope().entry(8).unwrap(), &syn.network, 28e3).unwrap(),
        3
    );
}

#[test]
fn three_entries_give_one_tier() {
    let env = fitted_envelope(3).unwrap();
    let cfg = AnnealConfig {
        restarts: 2,
        ..AnnealConfig::default()
    };
    let syn = synthesize_network(&env, &FrequencyBand::default(), DEFAULT_Z0, &cfg).unwrap();
    assert_eq!(syn.network.len(), 1);
    assert!(syn.entries.iter().all(|e| e.tier_count == 1));
}

#[test]
fn already_matched_load_needs_no_correction() {
    // Infinite R_E and a huge C_E leave a purely resistive z0 load; the
    // best tier is a vanishing series reactance with an open shunt.
    let p = PztCircuitParams::new(f64::INFINITY, 1.0, DEFAULT_Z0).unwrap();
    let cfg = AnnealConfig::default();
    let band = FrequencyBand::default();
    let design = optimize_tier(
        &CascadedNetwork::empty(DEFAULT_Z0).unwrap(),
        &[p],
        &band,
        DEFAULT_Z0,
        &cfg,
    )
    .unwrap();
    assert!(design.cost <= 1e-6, "cost {}", design.cost);
    assert!(
        design.tier.c_m.log10() > cfg.log10_c_bounds.1 - 1.0,
        "{:?}",
        design.tier
    );
}

#[test]
fn synthesis_is_deterministic() {
    let again = synthesize_network(
        envelope(),
        &FrequencyBand::default(),
        DEFAULT_Z0,
        &AnnealConfig::default(),
    )
    .unwrap();
    assert_eq!(&again, synthesis());
}

#[test]
fn larger_budget_never_costs_more() {
    let cfg = AnnealConfig::default();
    let doubled = AnnealConfig {
        iterations_per_temperature: 2 * cfg.iterations_per_temperature,
        ..cfg.clone()
    };
    let band = FrequencyBand::default();
    let prefix = CascadedNetwork::empty(DEFAULT_Z0).unwrap();
    let triple = &envelope().entries()[..3];
    let base = optimize_tier(&prefix, triple, &band, DEFAULT_Z0, &cfg).unwrap();
    let more = optimize_tier(&prefix, triple, &band, DEFAULT_Z0, &doubled).unwrap();
    // Both runs polish to the same optimum; allow rounding-level noise.
    assert!(more.cost <= base.cost * (1.0 + 1e-9), "{} > {}", more.cost, base.cost);
}

#[test]
fn sparse_array_shows_grating_lobe() {
    let cmp = compare_schemes(&BeamScenario::eight_element_default(), &[CodingScheme::Continuous]).unwrap();
    assert!(!cmp[0].metrics.grating_lobes.is_empty());
}

#[test]
fn far_field_distance_scales_with_aperture_squared() {
    let s = BeamScenario::eight_element_default();
    let lambda = s.wave.wavelength();
    let wide = ArrayConfig::uniform_linear(15, 2.0 * lambda).unwrap();
    let ratio = wide.far_field_distance(lambda) / s.array.far_field_distance(lambda);
    assert!((ratio - 4.0).abs() < 1e-12);
}

#[test]
fn iq_tracks_continuous_in_far_field() {
    let mut s = BeamScenario::eight_element_default();
    s.array = ArrayConfig::uniform_linear(8, 0.5 * s.wave.wavelength()).unwrap();
    s.ring = ProbeRing::new([0.0, 0.0], 25.0, 360).unwrap();
    let (_, cont) = s.pattern(&CodingScheme::Continuous).unwrap();
    let (_, iq) = s.pattern(&CodingScheme::Iq(StageSet::full_top())).unwrap();
    let (mc, mi) = (beam_metrics(&cont).unwrap(), beam_metrics(&iq).unwrap());
    assert!((mc.main_lobe_angle - mi.main_lobe_angle).abs() <= 2.0);
    assert!(
        (mi.main_mag / mc.main_mag - 1.0).abs() < 0.15,
        "{} vs {}",
        mi.main_mag,
        mc.main_mag
    );
}

#[test]
fn steering_profile_matches_brute_force_far_field() {
    let s = BeamScenario::eight_element_default();
    let array = ArrayConfig::uniform_linear(8, 0.5 * s.wave.wavelength()).unwrap();
    let k = TAU / s.wave.wavelength();
    for steer in [20.0, 60.0, 110.0] {
        let coeffs: Vec<Complex64> = desired_profile(&array, &s.wave, steer)
            .iter()
            .map(|t| t.as_complex())
            .collect();
        // Direct array factor with the incident phase included.
        let af = |deg: f64| -> f64 {
            let (c, si) = (deg.to_radians().cos(), deg.to_radians().sin());
            array
                .positions()
                .iter()
                .zip(&coeffs)
                .map(|(p, g)| {
                    let inc = k * (s.wave.direction[0] * p[0] + s.wave.direction[1] * p[1]);
                    g * Complex64::from_polar(1.0, inc + k * (c * p[0] + si * p[1]))
                })
                .sum::<Complex64>()
                .norm()
        };
        assert!((af(steer) - 8.0).abs() < 1e-9, "steer {steer}: {}", af(steer));
        let ring = ProbeRing::new([0.0, 0.0], 200.0, 1440).unwrap();
        let m = beam_metrics(&beam_pattern(&array, &coeffs, &s.wave, &ring).unwrap()).unwrap();
        assert!(
            (m.main_lobe_angle - steer).abs() <= 0.25,
            "steer {steer} -> {}",
            m.main_lobe_angle
        );
    }
}
