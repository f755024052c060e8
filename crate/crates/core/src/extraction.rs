//! Multipath reception and reference-subtraction extraction.
//!
//! A recording is the ambient part (direct path plus every path that does
//! not touch the reflector) plus the reflector paths weighted by the sum of
//! the layer reflection coefficients. Recording the reflector once with both
//! layers open and once with both shorted isolates the ambient part and an
//! open-circuit reference; a third recording under the load of interest is
//! then normalized against that reference.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::iq::{combined_gamma, LayerAssignment};
use crate::numeric::{check_positive, wrap_degrees, CompensatedSum};
use crate::{Error, Result};

/// Reference window energy below this fraction of the reference peak is
/// treated as degenerate.
const REFERENCE_FLOOR: f64 = 1e-9;

/// Gated complex carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceBurst {
    pub carrier_freq: f64,
    pub cycles: f64,
    pub initial_phase: f64,
    pub sample_rate: f64,
    pub amplitude: f64,
}

impl SourceBurst {
    pub fn validate(&self) -> Result<()> {
        check_positive("carrier frequency", self.carrier_freq)?;
        check_positive("sample rate", self.sample_rate)?;
        if self.sample_rate < 8.0 * self.carrier_freq {
            return Err(Error::param(format!(
                "sample rate {} Hz is below 8x the carrier {} Hz",
                self.sample_rate, self.carrier_freq
            )));
        }
        if !(self.cycles >= 1.0 && self.cycles.is_finite()) {
            return Err(Error::param(format!(
                "burst needs at least one cycle, got {}",
                self.cycles
            )));
        }
        if !(self.amplitude.is_finite() && self.initial_phase.is_finite()) {
            return Err(Error::param("burst amplitude and phase must be finite"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.cycles / self.carrier_freq
    }

    /// Analytic burst `amp·e^{j(ωt + φ_in)}` on `[0, duration)`, zero elsewhere.
    pub fn value(&self, t: f64) -> Complex64 {
        if t < 0.0 || t >= self.duration() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(self.amplitude, TAU * self.carrier_freq * t + self.initial_phase)
        }
    }
}

/// Path that does not involve the reflector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientTap {
    pub amplitude: f64,
    pub phase: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel {
    pub ambient_taps: Vec<AmbientTap>,
    pub reflector_delays: Vec<f64>,
}

impl MultipathChannel {
    pub fn validate(&self) -> Result<()> {
        if self.reflector_delays.is_empty() {
            return Err(Error::param("channel needs at least one reflector path"));
        }
        for t in &self.ambient_taps {
            if !(t.amplitude.is_finite() && t.phase.is_finite()) {
                return Err(Error::param("ambient tap amplitude and phase must be finite"));
            }
        }
        for d in self.delays() {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::param(format!("path delays must be >= 0 s, got {d}")));
            }
        }
        Ok(())
    }

    fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.ambient_taps
            .iter()
            .map(|t| t.delay)
            .chain(self.reflector_delays.iter().copied())
    }

    pub fn max_delay(&self) -> f64 {
        self.delays().fold(0.0, f64::max)
    }

    pub fn min_delay(&self) -> f64 {
        self.delays().fold(f64::INFINITY, f64::min)
    }
}

/// Per-layer reflection coefficients of the reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorScene {
    pub layer_gammas: Vec<Complex64>,
}

impl ReflectorScene {
    pub fn new(layer_gammas: Vec<Complex64>) -> Result<Self> {
        for g in &layer_gammas {
            if !(g.norm() <= 1.0 + 1e-12) {
                return Err(Error::param(format!("layer reflection {g} exceeds unit magnitude")));
            }
        }
        Ok(Self { layer_gammas })
    }

    pub fn from_assignment(assignment: &LayerAssignment, z0: f64) -> Result<Self> {
        Self::new(vec![
            crate::iq::gamma_of_load(&assignment.layer1, z0)?,
            crate::iq::gamma_of_load(&assignment.layer2, z0)?,
        ])
    }

    pub fn all_open(layers: usize) -> Self {
        Self {
            layer_gammas: vec![Complex64::new(1.0, 0.0); layers],
        }
    }

    pub fn all_short(layers: usize) -> Self {
        Self {
            layer_gammas: vec![Complex64::new(-1.0, 0.0); layers],
        }
    }

    pub fn total(&self) -> Complex64 {
        self.layer_gammas.iter().sum()
    }
}

/// Uniformly sampled complex series starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
}

impl Waveform {
    pub fn new(sample_rate: f64, samples: Vec<Complex64>) -> Result<Self> {
        check_positive("sample rate", sample_rate)?;
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::param("waveform contains non-finite samples"));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    fn check_aligned(&self, other: &Waveform) -> Result<()> {
        if self.sample_rate != other.sample_rate || self.samples.len() != other.samples.len() {
            return Err(Error::param(format!(
                "waveforms are not aligned ({} samples at {} Hz vs {} samples at {} Hz)",
                self.samples.len(),
                self.sample_rate,
                other.samples.len(),
                other.sample_rate
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &Waveform, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Waveform> {
        self.check_aligned(other)?;
        Ok(Waveform {
            sample_rate: self.sample_rate,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, s: Complex64) -> Waveform {
        Waveform {
            sample_rate: self.sample_rate,
            samples: self.samples.iter().map(|&x| x * s).collect(),
        }
    }
}

/// Recording of `scene` through `channel`, long enough for the latest path
/// to finish.
pub fn synthesize_received(
    channel: &MultipathChannel,
    scene: &ReflectorScene,
    burst: &SourceBurst,
) -> Result<Waveform> {
    channel.validate()?;
    burst.validate()?;
    let duration = burst.duration();
    if let Some(d) = channel.delays().find(|&d| d >= duration) {
        return Err(Error::domain(format!(
            "path delay {d} s does not overlap the {duration} s burst"
        )));
    }
    let n = ((duration + channel.max_delay()) * burst.sample_rate).ceil() as usize;
    let gamma = scene.total();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / burst.sample_rate;
            let mut acc = CompensatedSum::default();
            for tap in &channel.ambient_taps {
                acc.add(Complex64::from_polar(tap.amplitude, tap.phase) * burst.value(t - tap.delay));
            }
            for &d in &channel.reflector_delays {
                acc.add(gamma * burst.value(t - d));
            }
            acc.total()
        })
        .collect();
    Waveform::new(burst.sample_rate, samples)
}

/// Load-independent part: `(r_opop + r_shsh)/2`.
pub fn ambient_component(r_opop: &Waveform, r_shsh: &Waveform) -> Result<Waveform> {
    r_opop.combine(r_shsh, |a, b| (a + b) / 2.0)
}

/// Reflector contribution under the load of interest.
pub fn extract_reflection(r_load: &Waveform, r_opop: &Waveform, r_shsh: &Waveform) -> Result<Waveform> {
    let ambient = ambient_component(r_opop, r_shsh)?;
    r_load.combine(&ambient, |a, b| a - b)
}

/// Reflector contribution with both layers open: `(r_opop − r_shsh)/2`.
pub fn open_reference(r_opop: &Waveform, r_shsh: &Waveform) -> Result<Waveform> {
    r_opop.combine(r_shsh, |a, b| (a - b) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub b_wave: Waveform,
    pub normalized_coeff: Complex64,
    pub phase_deg: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
}

/// Least-squares complex ratio of `b` to `b_open` over `window` (seconds).
pub fn normalized_coefficient(b: &Waveform, b_open: &Waveform, window: (f64, f64)) -> Result<ExtractionResult> {
    b.check_aligned(b_open)?;
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t0 >= 0.0 && t1 > t0 && t1 <= b.duration()) {
        return Err(Error::param(format!(
            "window ({t0}, {t1}) s must lie inside the {} s waveform",
            b.duration()
        )));
    }
    let first = (t0 * b.sample_rate).ceil() as usize;
    let last = ((t1 * b.sample_rate).floor() as usize).min(b.len().saturating_sub(1));
    if first > last {
        return Err(Error::param("window contains no samples"));
    }
    let mut cross = CompensatedSum::default();
    let mut energy = 0.0;
    for i in first..=last {
        cross.add(b.samples[i] * b_open.samples[i].conj());
        energy += b_open.samples[i].norm_sqr();
    }
    let peak = b_open.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let rms = (energy / (last - first + 1) as f64).sqrt();
    if peak == 0.0 || rms <= REFERENCE_FLOOR * peak {
        return Err(Error::Extraction(
            "open-circuit reference is degenerate in the window".into(),
        ));
    }
    let coeff = cross.total() / energy;
    Ok(ExtractionResult {
        b_wave: b.clone(),
        normalized_coeff: coeff,
        phase_deg: coeff.arg().to_degrees(),
        amplitude: coeff.norm(),
        window,
    })
}

/// Seeded random channel: 1–8 ambient taps and 1–4 reflector paths, every
/// delay within the first 30% of the burst.
pub fn seeded_channel(seed: u64, burst: &SourceBurst) -> Result<MultipathChannel> {
    burst.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_delay = 0.3 * burst.duration();
    let ambient_taps = (0..rng.random_range(1..=8))
        .map(|_| AmbientTap {
            amplitude: rng.random_range(0.05..2.0),
            phase: rng.random_range(-PI..PI),
            delay: rng.random_range(0.0..max_delay),
        })
        .collect();
    let reflector_delays = (0..rng.random_range(1..=4))
        .map(|_| rng.random_range(0.0..max_delay))
        .collect();
    Ok(MultipathChannel {
        ambient_taps,
        reflector_delays,
    })
}

/// Central half of the interval where every path overlaps.
pub fn default_window(channel: &MultipathChannel, burst: &SourceBurst) -> Result<(f64, f64)> {
    channel.validate()?;
    burst.validate()?;
    let start = channel.max_delay();
    let end = burst.duration() + channel.min_delay();
    if end <= start {
        return Err(Error::domain("paths never overlap for this burst"));
    }
    let quarter = (end - start) / 4.0;
    Ok((start + quarter, end - quarter))
}

/// Runs the subtraction pipeline on three aligned recordings.
pub fn extract(
    r_load: &Waveform,
    r_opop: &Waveform,
    r_shsh: &Waveform,
    window: (f64, f64),
) -> Result<ExtractionResult> {
    let b = extract_reflection(r_load, r_opop, r_shsh)?;
    let b_open = open_reference(r_opop, r_shsh)?;
    normalized_coefficient(&b, &b_open, window)
}

/// Expected normalized coefficient of a two-layer assignment.
pub fn theoretical_coefficient(assignment: &LayerAssignment, z0: f64) -> Result<Complex64> {
    combined_gamma(assignment, z0)
}

/// Baseband phasor of a real recording: mix down by `e^{-jωt}` and average
/// over whole carrier periods.
pub fn quadrature_demodulate(samples: &[f64], sample_rate: f64, carrier_freq: f64) -> Result<Waveform> {
    check_positive("sample rate", sample_rate)?;
    check_positive("carrier frequency", carrier_freq)?;
    let period = (sample_rate / carrier_freq).round().max(1.0) as usize;
    let mixed: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| 2.0 * x * Complex64::from_polar(1.0, -TAU * carrier_freq * i as f64 / sample_rate))
        .collect();
    let mut prefix = Vec::with_capacity(mixed.len() + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for &m in &mixed {
        let last = *prefix.last().expect("non-empty prefix");
        prefix.push(last + m);
    }
    let half = period / 2;
    let n = mixed.len();
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (lo + period).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    Waveform::new(sample_rate, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub phase_deg: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<Deviation>,
    pub mean_abs_phase_deg: f64,
    pub max_abs_phase_deg: f64,
    pub mean_abs_amplitude: f64,
    pub max_abs_amplitude: f64,
}

/// Measured minus theoretical phase (wrapped, degrees) and amplitude.
pub fn experiment_report(measured: &[Complex64], theoretical: &[Complex64]) -> Result<ExperimentReport> {
    if measured.len() != theoretical.len() {
        return Err(Error::param(format!(
            "{} measurements for {} theoretical values",
            measured.len(),
            theoretical.len()
        )));
    }
    let rows: Vec<Deviation> = measured
        .iter()
        .zip(theoretical)
        .map(|(m, t)| Deviation {
            phase_deg: wrap_degrees(m.arg().to_degrees() - t.arg().to_degrees()),
            amplitude: m.norm() - t.norm(),
        })
        .collect();
    let n = rows.len().max(1) as f64;
    Ok(ExperimentReport {
        mean_abs_phase_deg: rows.iter().map(|r| r.phase_deg.abs()).sum::<f64>() / n,
        max_abs_phase_deg: rows.iter().map(|r| r.phase_deg.abs()).fold(0.0, f64::max),
        mean_abs_amplitude: rows.iter().map(|r| r.amplitude.abs()).sum::<f64>() / n,
        max_abs_amplitude: rows.iter().map(|r| r.amplitude.abs()).fold(0.0, f64::max),
        rows,
    })
}
