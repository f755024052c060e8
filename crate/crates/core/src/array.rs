//! Reflected field of a line of point reflectors.
//!
//! Scalar, lossless, single-frequency 2-D model: each element re-radiates
//! the incident plane wave as a spherical wave `coeff·e^{-jkr}/r`, with no
//! mutual scattering. Elements are baffled: an element radiates only into
//! the half-plane its normal points to. The direct incident field is not
//! included.
//!
//! Angles are in degrees, 0° along the array axis (+x), 90° along the array
//! normal (+y), counterclockwise positive.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::iq::{assign_loads, gamma_sum, LayerAssignment, LoadState, ReflectionTarget, StageSet};
use crate::numeric::{check_positive, wrap_phase, CompensatedSum};
use crate::{Error, Result};

pub type Point = [f64; 2];

/// Minimum allowed distance between a field point and an element (m).
pub const MIN_DISTANCE: f64 = 1e-3;
/// Secondary lobes at or above this normalized magnitude are grating lobes.
pub const GRATING_THRESHOLD: f64 = 0.8;
/// Relative tolerance under which neighbouring samples count as equal.
const PLATEAU_TOLERANCE: f64 = 1e-9;

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn unit(angle_deg: f64) -> Point {
    let a = angle_deg.to_radians();
    [a.cos(), a.sin()]
}

/// Monochromatic plane wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    pub frequency: f64,
    pub sound_speed: f64,
    /// Unit propagation direction.
    pub direction: Point,
    pub amplitude: f64,
}

impl IncidentWave {
    pub fn new(frequency: f64, sound_speed: f64, direction: Point, amplitude: f64) -> Result<Self> {
        let wave = Self {
            frequency,
            sound_speed,
            direction,
            amplitude,
        };
        wave.validate()?;
        Ok(wave)
    }

    /// Wave arriving from `arrival_deg`, i.e. propagating toward the
    /// opposite direction. 90° is normal incidence on the default array.
    pub fn arriving_from(frequency: f64, sound_speed: f64, arrival_deg: f64) -> Result<Self> {
        let u = unit(arrival_deg);
        Self::new(frequency, sound_speed, [-u[0], -u[1]], 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("frequency", self.frequency)?;
        check_positive("sound speed", self.sound_speed)?;
        if !self.amplitude.is_finite() {
            return Err(Error::param("wave amplitude must be finite"));
        }
        let norm = dot(self.direction, self.direction).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!(
                "wave direction must be a unit vector, |d| = {norm}"
            )));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        TAU * self.frequency / self.sound_speed
    }

    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.frequency
    }

    /// Incident phase at `p` relative to the origin.
    pub fn phase_at(&self, p: Point) -> f64 {
        -self.wavenumber() * dot(self.direction, p)
    }
}

/// Element positions plus the common element normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig {
    positions: Vec<Point>,
    normal: Point,
}

impl ArrayConfig {
    pub fn new(positions: Vec<Point>, normal: Point) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::param("array needs at least one element"));
        }
        for (i, a) in positions.iter().enumerate() {
            if !(a[0].is_finite() && a[1].is_finite()) {
                return Err(Error::param(format!("element {i} position is not finite")));
            }
            if positions[..i].iter().any(|b| a == b) {
                return Err(Error::param(format!("element {i} duplicates an earlier position")));
            }
        }
        let n = dot(normal, normal).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::param("array normal must be a nonzero vector"));
        }
        Ok(Self {
            positions,
            normal: [normal[0] / n, normal[1] / n],
        })
    }

    /// `count` elements on the x axis, centered on the origin, facing +y.
    pub fn uniform_linear(count: usize, spacing: f64) -> Result<Self> {
        check_positive("element spacing", spacing)?;
        let mid = (count as f64 - 1.0) / 2.0;
        Self::new(
            (0..count).map(|i| [(i as f64 - mid) * spacing, 0.0]).collect(),
            [0.0, 1.0],
        )
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn normal(&self) -> Point {
        self.normal
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest distance between two elements.
    pub fn aperture(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        d
    }

    /// Far-field distance `2D²/λ`.
    pub fn far_field_distance(&self, wavelength: f64) -> f64 {
        2.0 * self.aperture().powi(2) / wavelength
    }
}

/// Probes equally spaced on a circle, starting at 0°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRing {
    pub center: Point,
    pub radius: f64,
    pub count: usize,
}

impl Default for ProbeRing {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: 0.75,
            count: 72,
        }
    }
}

impl ProbeRing {
    pub fn new(center: Point, radius: f64, count: usize) -> Result<Self> {
        let ring = Self { center, radius, count };
        ring.validate()?;
        Ok(ring)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("ring radius", self.radius)?;
        if self.count < 3 {
            return Err(Error::param("probe ring needs at least 3 probes"));
        }
        Ok(())
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.count).map(|i| 360.0 * i as f64 / self.count as f64).collect()
    }

    pub fn point(&self, angle_deg: f64) -> Point {
        let u = unit(angle_deg);
        [self.center[0] + self.radius * u[0], self.center[1] + self.radius * u[1]]
    }
}

/// How desired per-element phases are realized.
#[derive(Debug, Clone, PartialEq)]
pub enum CodingScheme {
    Continuous,
    Iq(StageSet),
    TwoBit,
    OneBit,
}

impl CodingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            CodingScheme::Continuous => "continuous",
            CodingScheme::Iq(_) => "iq",
            CodingScheme::TwoBit => "2bit",
            CodingScheme::OneBit => "1bit",
        }
    }
}

/// Per-element realized coefficient and the loads that produce it (empty
/// for continuous coding).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedElement {
    pub coeff: Complex64,
    pub loads: Vec<LoadState>,
}

/// Per-element targets that co-phase the far-field contributions toward
/// `steer_deg`.
pub fn desired_profile(array: &ArrayConfig, wave: &IncidentWave, steer_deg: f64) -> Vec<ReflectionTarget> {
    let k = wave.wavenumber();
    let u = unit(steer_deg);
    array
        .positions()
        .iter()
        .map(|&p| ReflectionTarget {
            a_r: 1.0,
            phi_r: wrap_phase(-wave.phase_at(p) - k * dot(u, p)),
        })
        .collect()
}

/// Realizes each target under `scheme`.
///
/// IQ coefficients are the unnormalized layer sum `Γ1 + Γ2`, which is the
/// quantity comparable to a single full-amplitude layer.
pub fn quantize_profile(targets: &[ReflectionTarget], scheme: &CodingScheme, z0: f64) -> Result<Vec<QuantizedElement>> {
    check_positive("Z0", z0)?;
    targets
        .iter()
        .map(|t| {
            let ideal = t.as_complex();
            Ok(match scheme {
                CodingScheme::Continuous => QuantizedElement {
                    coeff: ideal,
                    loads: Vec::new(),
                },
                CodingScheme::Iq(stages) => {
                    let LayerAssignment { layer1, layer2 } = assign_loads(t, stages, z0)?;
                    let a = LayerAssignment { layer1, layer2 };
                    QuantizedElement {
                        coeff: gamma_sum(&a, z0)?,
                        loads: vec![layer1, layer2],
                    }
                }
                CodingScheme::OneBit => {
                    let (coeff, load) = if ideal.re >= 0.0 {
                        (Complex64::new(1.0, 0.0), LoadState::Open)
                    } else {
                        (Complex64::new(-1.0, 0.0), LoadState::Short)
                    };
                    QuantizedElement {
                        coeff,
                        loads: vec![load],
                    }
                }
                CodingScheme::TwoBit => {
                    let options = [
                        (Complex64::new(1.0, 0.0), LoadState::Open),
                        (Complex64::new(0.0, 1.0), LoadState::Inductive(1.0)),
                        (Complex64::new(-1.0, 0.0), LoadState::Short),
                        (Complex64::new(0.0, -1.0), LoadState::Capacitive(1.0)),
                    ];
                    let mut best = options[0];
                    for o in &options[1..] {
                        if (o.0 - ideal).norm() < (best.0 - ideal).norm() - 1e-12 {
                            best = *o;
                        }
                    }
                    QuantizedElement {
                        coeff: best.0,
                        loads: vec![best.1],
                    }
                }
            })
        })
        .collect()
}

/// Reflected pressure at `point`.
pub fn field_at_point(
    array: &ArrayConfig,
    coefficients: &[Complex64],
    wave: &IncidentWave,
    point: Point,
) -> Result<Complex64> {
    if coefficients.len() != array.len() {
        return Err(Error::param(format!(
            "{} coefficients for {} elements",
            coefficients.len(),
            array.len()
        )));
    }
    let k = wave.wavenumber();
    let mut sum = CompensatedSum::default();
    for (&p, &c) in array.positions().iter().zip(coefficients) {
        let d = [point[0] - p[0], point[1] - p[1]];
        let r = dot(d, d).sqrt();
        if r < MIN_DISTANCE {
            return Err(Error::domain(format!(
                "field point ({}, {}) is within {MIN_DISTANCE} m of an element",
                point[0], point[1]
            )));
        }
        if dot(d, array.normal()) < 0.0 {
            continue;
        }
        sum.add(c * wave.amplitude * Complex64::from_polar(1.0 / r, wave.phase_at(p) - k * r));
    }
    Ok(sum.total())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSample {
    pub angle_deg: f64,
    pub pressure: Complex64,
    pub magnitude: f64,
    pub normalized: f64,
}

/// Pressure on a probe ring, angles ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub samples: Vec<BeamSample>,
    /// Every sample is zero; `normalized` is then left at 0.
    pub is_zero: bool,
}

impl BeamPattern {
    /// Builds a pattern from `(angle, pressure)` pairs, normalizing by the
    /// largest magnitude.
    pub fn from_pressures(points: Vec<(f64, Complex64)>) -> Self {
        let peak = points.iter().map(|(_, p)| p.norm()).fold(0.0, f64::max);
        let is_zero = peak == 0.0;
        let samples = points
            .into_iter()
            .map(|(angle_deg, pressure)| {
                let magnitude = pressure.norm();
                BeamSample {
                    angle_deg,
                    pressure,
                    magnitude,
                    normalized: if is_zero { 0.0 } else { magnitude / peak },
                }
            })
            .collect();
        Self { samples, is_zero }
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.samples.iter().map(|s| s.magnitude).fold(0.0, f64::max)
    }
}

pub fn beam_pattern(
    array: &ArrayConfig,
    coefficients: &[Complex64],
    wave: &IncidentWave,
    ring: &ProbeRing,
) -> Result<BeamPattern> {
    ring.validate()?;
    wave.validate()?;
    let points = ring
        .angles()
        .into_par_iter()
        .map(|a| field_at_point(array, coefficients, wave, ring.point(a)).map(|p| (a, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamPattern::from_pressures(points))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lobe {
    pub angle_deg: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamMetrics {
    pub main_lobe_angle: f64,
    /// Unnormalized peak magnitude (Pa).
    pub main_mag: f64,
    /// Every local maximum other than the main lobe, by ascending angle.
    pub side_lobes: Vec<Lobe>,
    pub grating_lobes: Vec<Lobe>,
    /// Side lobe nearest the main lobe, grating lobes excluded.
    pub first_side_lobe: Option<Lobe>,
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Lobe table of a pattern sampled on a full circle.
///
/// Runs of equal samples are treated as one plateau located at its middle.
pub fn beam_metrics(pattern: &BeamPattern) -> Result<BeamMetrics> {
    let s = &pattern.samples;
    if s.is_empty() || pattern.is_zero || pattern.peak_magnitude() == 0.0 {
        return Err(Error::Metric("pattern is identically zero".into()));
    }
    let n = s.len();
    let peak = pattern.peak_magnitude();
    let eq = |a: f64, b: f64| (a - b).abs() <= PLATEAU_TOLERANCE * peak;

    // Rotate so index 0 starts a plateau; with a constant pattern there is a
    // single run covering the circle.
    let start = (0..n).find(|&i| !eq(s[i].magnitude, s[(i + n - 1) % n].magnitude));
    let mut runs: Vec<(usize, usize)> = Vec::new();
    match start {
        None => runs.push((0, n)),
        Some(start) => {
            let mut i = 0;
            while i < n {
                let first = (start + i) % n;
                let mut len = 1;
                while i + len < n && eq(s[(start + i + len) % n].magnitude, s[first].magnitude) {
                    len += 1;
                }
                runs.push((first, len));
                i += len;
            }
        }
    }
    let mag = |run: (usize, usize)| s[run.0].magnitude;
    let mid_angle = |(first, len): (usize, usize)| -> f64 {
        let step = if n > 1 {
            (s[1].angle_deg - s[0].angle_deg).rem_euclid(360.0)
        } else {
            0.0
        };
        (s[first].angle_deg + step * (len as f64 - 1.0) / 2.0).rem_euclid(360.0)
    };
    let m = runs.len();
    let mut lobes: Vec<Lobe> = Vec::new();
    for r in 0..m {
        let here = mag(runs[r]);
        if here == 0.0 {
            continue;
        }
        let is_max = m == 1 || (here > mag(runs[(r + m - 1) % m]) && here > mag(runs[(r + 1) % m]));
        if is_max {
            lobes.push(Lobe {
                angle_deg: mid_angle(runs[r]),
                normalized: here / peak,
            });
        }
    }
    lobes.sort_by(|a, b| a.angle_deg.total_cmp(&b.angle_deg));
    let main_idx = lobes.iter().enumerate().fold(0, |best, (i, l)| {
        if l.normalized > lobes[best].normalized + PLATEAU_TOLERANCE {
            i
        } else {
            best
        }
    });
    let main = lobes.remove(main_idx);
    let grating_lobes: Vec<Lobe> = lobes
        .iter()
        .copied()
        .filter(|l| l.normalized >= GRATING_THRESHOLD)
        .collect();
    let first_side_lobe = lobes
        .iter()
        .filter(|l| l.normalized < GRATING_THRESHOLD)
        .fold(None::<Lobe>, |best, &l| match best {
            None => Some(l),
            Some(b) => {
                let (dl, db) = (
                    angular_distance(l.angle_deg, main.angle_deg),
                    angular_distance(b.angle_deg, main.angle_deg),
                );
                if dl < db - 1e-9 || ((dl - db).abs() <= 1e-9 && l.normalized > b.normalized) {
                    Some(l)
                } else {
                    Some(b)
                }
            }
        });
    Ok(BeamMetrics {
        main_lobe_angle: main.angle_deg,
        main_mag: peak,
        side_lobes: lobes,
        grating_lobes,
        first_side_lobe,
    })
}

/// Geometry, excitation and steering shared by every scheme in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamScenario {
    pub wave: IncidentWave,
    pub array: ArrayConfig,
    pub steer_deg: f64,
    pub ring: ProbeRing,
    pub z0: f64,
}

impl BeamScenario {
    /// 8 reflectors at 2λ spacing, 41.1 kHz in water, normal incidence,
    /// steering to 45°, 72 probes on a 0.75 m ring.
    pub fn eight_element_default() -> Self {
        let wave = IncidentWave::arriving_from(41.1e3, 1500.0, 90.0).expect("valid default wave");
        let array = ArrayConfig::uniform_linear(8, 2.0 * wave.wavelength()).expect("valid default array");
        Self {
            wave,
            array,
            steer_deg: 45.0,
            ring: ProbeRing::default(),
            z0: 1000.0,
        }
    }

    pub fn pattern(&self, scheme: &CodingScheme) -> Result<(Vec<QuantizedElement>, BeamPattern)> {
        let targets = desired_profile(&self.array, &self.wave, self.steer_deg);
        let elements = quantize_profile(&targets, scheme, self.z0)?;
        let coeffs: Vec<Complex64> = elements.iter().map(|e| e.coeff).collect();
        let pattern = beam_pattern(&self.array, &coeffs, &self.wave, &self.ring)?;
        Ok((elements, pattern))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeComparison {
    pub scheme: CodingScheme,
    pub elements: Vec<QuantizedElement>,
    pub pattern: BeamPattern,
    pub metrics: BeamMetrics,
    /// Main-lobe magnitude divided by the largest main lobe among the
    /// compared schemes.
    pub main_mag_relative: f64,
}

/// Beam metrics of each scheme on identical geometry and steering.
pub fn compare_schemes(scenario: &BeamScenario, schemes: &[CodingScheme]) -> Result<Vec<SchemeComparison>> {
    let mut out = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let (elements, pattern) = scenario.pattern(scheme)?;
        let metrics = beam_metrics(&pattern)?;
        out.push(SchemeComparison {
            scheme: scheme.clone(),
            elements,
            pattern,
            metrics,
            main_mag_relative: 0.0,
        });
    }
    let top = out.iter().map(|c| c.metrics.main_mag).fold(0.0, f64::max);
    for c in &mut out {
        c.main_mag_relative = c.metrics.main_mag / top;
    }
    Ok(out)
}

/// The four coding schemes, IQ with a full-amplitude top stage.
pub fn all_schemes() -> Vec<CodingScheme> {
    vec![
        CodingScheme::Iq(StageSet::full_top()),
        CodingScheme::TwoBit,
        CodingScheme::OneBit,
        CodingScheme::Continuous,
    ]
}
