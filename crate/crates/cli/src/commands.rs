use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use mlaris::array::compare_schemes;
use mlaris::extraction::{
    default_window, extract, quadrature_demodulate, seeded_channel, synthesize_received, theoretical_coefficient,
    ReflectorScene, Waveform,
};
use mlaris::fixtures;
use mlaris::io::{self, ExtractionRow, RecordedWaveform};
use mlaris::iq::{assign_loads, combined_gamma, gamma_sum, LayerAssignment, ReflectionTarget, StageSet};
use mlaris::matching::{load_voltage, match_report, select_tier, synthesize_network, ENTRIES_PER_TIER, MAX_TIERS};
use mlaris::transducer::{
    build_envelope, fit_params_with, interpolate_envelope, FitOptions, FitWeighting, PztCircuitParams,
};

use crate::config::LoadedConfig;
use crate::manifest::RunManifest;
use crate::{
    BeamArgs, Cli, Command, EndpointArgs, EnvelopeArgs, ExtractArgs, FitArgs, InputError, IqArgs, MatchArgs,
    SelectTierArgs, Weighting,
};

const DEFAULT_SEED: u64 = 42;

struct RunContext {
    config: LoadedConfig,
    seed: u64,
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = LoadedConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(config.config.seed).unwrap_or(DEFAULT_SEED);
    let ctx = RunContext { config, seed };
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Fit(a) => fit(&ctx, out, a),
        Command::Envelope(a) => envelope(&ctx, out, a),
        Command::Match(a) => run_match(&ctx, out, a),
        Command::SelectTier(a) => select(a),
        Command::Iq(a) => iq(&ctx, a),
        Command::Beam(a) => beam(&ctx, out, a),
        Command::Extract(a) => run_extract(&ctx, out, a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())).into())
}

fn read_with<T>(path: &Path, parse: impl FnOnce(&str) -> mlaris::Result<T>) -> Result<T> {
    let text = read_text(path)?;
    parse(&text).with_context(|| path.display().to_string())
}

fn manifest(ctx: &RunContext, command: &str, out: &Path) -> Result<RunManifest> {
    RunManifest::new(command, out, ctx.config.digest.clone(), ctx.seed)
}

fn fit(ctx: &RunContext, out: &Path, a: &FitArgs) -> Result<()> {
    let sweep = read_with(&a.sweep, io::read_sweep)?;
    let options = FitOptions {
        weighting: match a.weighting {
            Weighting::Relative => FitWeighting::Relative,
            Weighting::Absolute => FitWeighting::Absolute,
        },
        ..FitOptions::default()
    };
    let mut m = manifest(ctx, "fit", out)?;
    m.set_effective(json!({
        "sweep": a.sweep.display().to_string(),
        "weighting": format!("{:?}", options.weighting),
        "max_iterations": options.max_iterations,
        "starts": options.starts,
    }));
    let report = m.stage("fit", || Ok(fit_params_with(&sweep, &options)?))?;
    let name = a.output.clone().unwrap_or_else(|| {
        let stem = a
            .sweep
            .file_stem()
            .map_or("sweep".into(), |s| s.to_string_lossy().into_owned());
        format!("{stem}.params")
    });
    let path = m.write(&name, &io::write_params(&report.params))?;
    m.finish()?;
    let p = &report.params;
    println!("R_E      = {:.6e} ohm", p.r_e);
    println!("C_E      = {:.6e} F", p.c_e);
    println!("Re'(Z_S) = {:.6e} ohm", p.re_zs_eff);
    println!("residual = {:.3e} ({} iterations)", report.residual, report.iterations);
    println!("wrote {}", path.display());
    Ok(())
}

fn endpoints(ctx: &RunContext, a: &EndpointArgs) -> Result<(PztCircuitParams, PztCircuitParams, String)> {
    let t = ctx.config.config.transducer.clone().unwrap_or_default();
    let alpha = a
        .alpha
        .clone()
        .or_else(|| t.alpha_params_file.map(|p| ctx.config.resolve(&p)));
    let beta = a
        .beta
        .clone()
        .or_else(|| t.beta_params_file.map(|p| ctx.config.resolve(&p)));
    match (alpha, beta) {
        (Some(a), Some(b)) => Ok((
            read_with(&a, io::read_params)?,
            read_with(&b, io::read_params)?,
            format!("{} / {}", a.display(), b.display()),
        )),
        (None, None) => {
            let (a, b) = fixtures::fitted_endpoints().context("fitting the shipped sweeps")?;
            Ok((a, b, "fitted fixture sweeps".into()))
        }
        _ => bail!(InputError("give both --alpha and --beta, or neither".into())),
    }
}

fn envelope(ctx: &RunContext, out: &Path, a: &EnvelopeArgs) -> Result<()> {
    let (alpha, beta, source) = endpoints(ctx, &a.endpoints)?;
    let n_d =
        a.nd.or(ctx.config.config.transducer.as_ref().and_then(|t| t.n_d))
            .unwrap_or(MAX_TIERS * ENTRIES_PER_TIER);
    let mut m = manifest(ctx, "envelope", out)?;
    m.set_effective(json!({ "endpoints": source, "n_d": n_d, "strict": a.strict }));
    let env = m.stage("envelope", || {
        Ok(if a.strict {
            build_envelope(&alpha, &beta, n_d)?
        } else {
            interpolate_envelope(&alpha, &beta, n_d)?
        })
    })?;
    let path = m.write("envelope.csv", &io::write_envelope(&env))?;
    m.finish()?;
    for (i, p) in env.entries().iter().enumerate() {
        println!(
            "{:>2}  R_E {:.4e}  C_E {:.4e}  Re' {:.2}",
            i + 1,
            p.r_e,
            p.c_e,
            p.re_zs_eff
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn run_match(ctx: &RunContext, out: &Path, a: &MatchArgs) -> Result<()> {
    let cfg_nd = ctx.config.config.transducer.as_ref().and_then(|t| t.n_d);
    let n_d = match (a.tiers, a.nd.or(cfg_nd)) {
        (Some(t), Some(n)) if n != t * ENTRIES_PER_TIER => bail!(InputError(format!(
            "{t} tiers need {} envelope entries, got --nd {n}",
            t * ENTRIES_PER_TIER
        ))),
        (_, Some(n)) => n,
        (Some(t), None) => t * ENTRIES_PER_TIER,
        (None, None) => MAX_TIERS * ENTRIES_PER_TIER,
    };
    let (alpha, beta, source) = endpoints(ctx, &a.endpoints)?;
    let band = ctx.config.band(a.f_low_hz, a.f_high_hz, a.grid_points)?;
    let z0 = ctx.config.z0(a.z0_ohm);
    let mut anneal = ctx.config.anneal(ctx.seed);
    if let Some(r) = a.restarts {
        anneal.restarts = r;
    }
    if let Some(i) = a.iterations {
        anneal.iterations_per_temperature = i;
    }
    if let Some(l) = a.levels {
        anneal.temperature_levels = l;
    }
    let mut m = manifest(ctx, "match", out)?;
    m.set_effective(json!({
        "endpoints": source,
        "n_d": n_d,
        "band": { "f_low_hz": band.f_low, "f_high_hz": band.f_high, "grid_points": band.n_grid },
        "z0_ohm": z0,
        "anneal": {
            "initial_temperature": anneal.initial_temperature,
            "cooling_factor": anneal.cooling_factor,
            "iterations_per_temperature": anneal.iterations_per_temperature,
            "temperature_levels": anneal.temperature_levels,
            "restarts": anneal.restarts,
            "seed": anneal.seed,
            "step_decades": anneal.step_decades,
            "log10_c_farad_bounds": anneal.log10_c_bounds,
            "log10_l_henry_bounds": anneal.log10_l_bounds,
            "refine": anneal.refine,
        },
    }));
    let env = m.stage("envelope", || Ok(interpolate_envelope(&alpha, &beta, n_d)?))?;
    let syn = m.stage("anneal", || Ok(synthesize_network(&env, &band, z0, &anneal)?))?;
    let rows = m.stage("report", || Ok(match_report(&env, &syn.network, &band)?))?;
    let net_path = m.write("network.txt", &io::write_network(&syn.network))?;
    let report_path = m.write("match_report.csv", &io::write_match_report(&rows))?;
    m.finish()?;
    for (i, d) in syn.tier_designs.iter().enumerate() {
        println!(
            "tier {}: C = {:.4e} F, L = {:.4e} H, cost {:.4e}",
            i + 1,
            d.tier.c_m,
            d.tier.l_m,
            d.cost
        );
    }
    println!("entry  tiers  worst|G|  unmatched");
    for e in &syn.entries {
        println!(
            "{:>5}  {:>5}  {:.4}    {:.4}",
            e.entry_index, e.tier_count, e.worst_gamma, e.unmatched_worst_gamma
        );
    }
    println!("wrote {} and {}", net_path.display(), report_path.display());
    Ok(())
}

fn select(a: &SelectTierArgs) -> Result<()> {
    let network = read_with(&a.network, io::read_network)?;
    let params: Vec<PztCircuitParams> = match (&a.params, &a.envelope) {
        (Some(p), _) => vec![read_with(p, io::read_params)?],
        (None, Some(e)) => read_with(e, io::read_envelope)?.entries().to_vec(),
        (None, None) => bail!(InputError("give --params or --envelope".into())),
    };
    for (i, p) in params.iter().enumerate() {
        let tier = select_tier(p, &network, a.probe_hz)?;
        let volts = (1..=network.len())
            .map(|k| load_voltage(p, &network, k, a.probe_hz).map(|v| format!("{:.4}", v.norm())))
            .collect::<mlaris::Result<Vec<_>>>()?;
        println!(
            "entry {}: tier {tier} (|V_load| per tier count: {})",
            i + 1,
            volts.join(", ")
        );
    }
    Ok(())
}

fn iq(ctx: &RunContext, a: &IqArgs) -> Result<()> {
    let z0 = ctx.config.z0(a.z0_ohm);
    let stages = StageSet::new(a.stages.clone())?;
    let target = ReflectionTarget::new(a.amplitude, a.phase_deg.to_radians())?;
    let assignment = assign_loads(&target, &stages, z0)?;
    let sum = gamma_sum(&assignment, z0)?;
    let g = combined_gamma(&assignment, z0)?;
    println!("loads {assignment}");
    println!(
        "G1+G2 = {:.4} at {:.2} deg (target {:.4} at {:.2} deg)",
        sum.norm(),
        sum.arg().to_degrees(),
        a.amplitude,
        a.phase_deg
    );
    println!(
        "open-normalized (G1+G2)/2 = {:.4} at {:.2} deg",
        g.norm(),
        g.arg().to_degrees()
    );
    Ok(())
}

fn beam(ctx: &RunContext, out: &Path, a: &BeamArgs) -> Result<()> {
    let z0 = ctx.config.z0(a.z0_ohm);
    let mut scenario = ctx.config.beam_scenario(z0)?;
    if let Some(r) = a.ring_radius {
        scenario.ring.radius = r;
    }
    if let Some(n) = a.probes {
        scenario.ring.count = n;
    }
    if let Some(s) = a.steer_deg {
        scenario.steer_deg = s;
    }
    scenario.ring.validate()?;
    let schemes = ctx.config.schemes(a.scheme.as_deref())?;
    let mut m = manifest(ctx, "beam", out)?;
    m.set_effective(json!({
        "frequency_hz": scenario.wave.frequency,
        "sound_speed_m_per_s": scenario.wave.sound_speed,
        "wave_direction": scenario.wave.direction,
        "positions_m": scenario.array.positions(),
        "steer_deg": scenario.steer_deg,
        "ring_radius_m": scenario.ring.radius,
        "ring_probes": scenario.ring.count,
        "z0_ohm": z0,
        "schemes": schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "far_field_distance_m": scenario.array.far_field_distance(scenario.wave.wavelength()),
    }));
    let cmp = m.stage("patterns", || Ok(compare_schemes(&scenario, &schemes)?))?;
    for c in &cmp {
        let file = if cmp.len() == 1 {
            "beam.csv".to_string()
        } else {
            format!("beam_{}.csv", c.scheme.name())
        };
        m.write(&file, &io::write_beam_csv(&c.pattern))?;
    }
    m.write("metrics.csv", &io::write_metrics_csv(&io::metrics_rows(&cmp)))?;
    m.finish()?;
    for c in &cmp {
        let mt = &c.metrics;
        let first = mt.first_side_lobe.map_or("none".to_string(), |l| {
            format!("{:.3} at {} deg", l.normalized, l.angle_deg)
        });
        println!(
            "{:<10} main lobe {} deg (rel {:.3}), first side lobe {first}",
            c.scheme.name(),
            mt.main_lobe_angle,
            c.main_mag_relative
        );
        for g in &mt.grating_lobes {
            println!("{:<10} grating lobe at {} deg ({:.3})", "", g.angle_deg, g.normalized);
        }
    }
    println!("wrote beam and metrics files to {}", out.display());
    Ok(())
}

fn token(assignment: &LayerAssignment) -> String {
    format!("{}+{}", assignment.layer1, assignment.layer2)
}

fn row(assignment: &LayerAssignment, z0: f64, measured: mlaris::Complex64) -> Result<ExtractionRow> {
    let theory = theoretical_coefficient(assignment, z0)?;
    Ok(ExtractionRow {
        load_token: token(assignment),
        phase_deg: measured.arg().to_degrees(),
        amplitude: measured.norm(),
        theory_phase_deg: theory.arg().to_degrees(),
        theory_amplitude: theory.norm(),
    })
}

fn parse_assignment(s: &str) -> Result<LayerAssignment> {
    s.parse()
        .map_err(|e: mlaris::Error| InputError(format!("load pair '{s}': {e}")).into())
}

fn baseband(path: &Path, carrier: Option<f64>) -> Result<Waveform> {
    match read_with(path, io::read_waveform)? {
        RecordedWaveform::Analytic(w) => Ok(w),
        RecordedWaveform::Real { sample_rate, samples } => {
            let Some(f) = carrier else {
                bail!(InputError(format!(
                    "{} is real-valued; give --carrier-hz",
                    path.display()
                )));
            };
            Ok(quadrature_demodulate(&samples, sample_rate, f)?)
        }
    }
}

fn run_extract(ctx: &RunContext, out: &Path, a: &ExtractArgs) -> Result<()> {
    let z0 = ctx.config.z0(a.z0_ohm);
    let mut m = manifest(ctx, "extract", out)?;
    let window_flag = match (a.window_start_s, a.window_end_s) {
        (Some(s), Some(e)) => Some((s, e)),
        (None, None) => None,
        _ => bail!(InputError("give both --window-start-s and --window-end-s".into())),
    };
    let mut rows = Vec::new();
    if let Some(load) = &a.load {
        let (opop, shsh, loads) = (
            a.opop.as_ref().unwrap(),
            a.shsh.as_ref().unwrap(),
            a.loads.as_ref().unwrap(),
        );
        let assignment = parse_assignment(loads)?;
        let carrier = a
            .carrier_hz
            .or(ctx.config.config.burst.as_ref().and_then(|b| b.carrier_hz));
        let waves = [load, opop, shsh].map(|p| baseband(p, carrier));
        let [w_load, w_op, w_sh] = waves;
        let (w_load, w_op, w_sh) = (w_load?, w_op?, w_sh?);
        let window = window_flag.unwrap_or_else(|| {
            let d = w_load.duration();
            (0.25 * d, 0.75 * d)
        });
        m.set_effective(json!({
            "mode": "replay",
            "files": ([load, opop, shsh].map(|p| p.display().to_string())),
            "loads": loads,
            "carrier_hz": carrier,
            "window_s": window,
            "z0_ohm": z0,
        }));
        let r = m.stage("extract", || Ok(extract(&w_load, &w_op, &w_sh, window)?))?;
        rows.push(row(&assignment, z0, r.normalized_coeff)?);
    } else {
        if a.synthetic.is_empty() {
            bail!(InputError(
                "give --synthetic scenes or --load/--opop/--shsh recordings".into()
            ));
        }
        let burst = ctx.config.burst()?;
        let channel = match ctx.config.channel() {
            Some(c) => c,
            None => seeded_channel(ctx.seed, &burst)?,
        };
        let window = match window_flag {
            Some(w) => w,
            None => default_window(&channel, &burst)?,
        };
        let assignments = a
            .synthetic
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<Result<Vec<_>>>()?;
        m.set_effective(json!({
            "mode": "synthetic",
            "scenes": assignments.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "burst": {
                "carrier_hz": burst.carrier_freq,
                "cycles": burst.cycles,
                "initial_phase_rad": burst.initial_phase,
                "sample_rate_hz": burst.sample_rate,
                "amplitude": burst.amplitude,
            },
            "channel": {
                "ambient_taps": channel.ambient_taps.iter()
                    .map(|t| json!({ "amplitude": t.amplitude, "phase_rad": t.phase, "delay_s": t.delay }))
                    .collect::<Vec<_>>(),
                "reflector_delays_s": channel.reflector_delays,
            },
            "window_s": window,
            "z0_ohm": z0,
        }));
        let (op, sh) = m.stage("references", || {
            Ok((
                synthesize_received(&channel, &ReflectorScene::all_open(2), &burst)?,
                synthesize_received(&channel, &ReflectorScene::all_short(2), &burst)?,
            ))
        })?;
        for assignment in &assignments {
            let r = m.stage(&token(assignment), || {
                let scene = ReflectorScene::from_assignment(assignment, z0)?;
                let load = synthesize_received(&channel, &scene, &burst)?;
                Ok(extract(&load, &op, &sh, window)?)
            })?;
            rows.push(row(assignment, z0, r.normalized_coeff)?);
        }
    }
    let path = m.write("extraction.csv", &io::write_extraction_report(&rows))?;
    m.finish()?;
    for r in &rows {
        println!(
            "{}: {:.4} at {:.2} deg (theory {:.4} at {:.2} deg)",
            r.load_token, r.amplitude, r.phase_deg, r.theory_amplitude, r.theory_phase_deg
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
