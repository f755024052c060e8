//! Two-layer passive IQ modulation.
//!
//! Layer 1 carries the in-phase part of the target through a resistive load;
//! layer 2 carries the quadrature part through a capacitive or inductive stage
//! with a fixed design amplitude. Stages are modeled by their design-point
//! reflection coefficient `a∠∓90°`, not by component values.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::numeric::check_positive;
use crate::{Error, Result};

/// Two stage distances closer than this count as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

/// Discrete load behind one PZT layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadState {
    Open,
    Short,
    Resistive(f64),
    Capacitive(f64),
    Inductive(f64),
}

impl LoadState {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LoadState::Open | LoadState::Short => Ok(()),
            LoadState::Resistive(r) if r >= 0.0 && r.is_finite() => Ok(()),
            LoadState::Resistive(r) => Err(Error::param(format!("load resistance must be >= 0 Ω, got {r}"))),
            LoadState::Capacitive(a) | LoadState::Inductive(a) if a > 0.0 && a <= 1.0 => Ok(()),
            LoadState::Capacitive(a) | LoadState::Inductive(a) => {
                Err(Error::param(format!("stage amplitude must lie in (0, 1], got {a}")))
            }
        }
    }
}

impl fmt::Display for LoadState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stage = |f: &mut fmt::Formatter<'_>, prefix: char, a: f64| {
            let tenths = a * 10.0;
            if (tenths - tenths.round()).abs() < 1e-9 {
                write!(f, "{prefix}{:02}", tenths.round() as i64)
            } else {
                write!(f, "{prefix}{a}")
            }
        };
        match *self {
            LoadState::Open => f.write_str("Op"),
            LoadState::Short => f.write_str("Sh"),
            // Millohm resolution keeps tokens short and readable.
            LoadState::Resistive(r) => write!(f, "R{}", (r * 1e3).round() / 1e3),
            LoadState::Capacitive(a) => stage(f, 'C', a),
            LoadState::Inductive(a) => stage(f, 'L', a),
        }
    }
}

impl FromStr for LoadState {
    type Err = Error;

    /// Tokens: `Op`, `Sh`, `R<ohms>` (optional `k` suffix), `C<amp×10>` /
    /// `L<amp×10>` as two digits, or with an explicit decimal amplitude.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::param(format!("unrecognized load token '{s}'"));
        let load = match s {
            "Op" | "op" | "OP" => LoadState::Open,
            "Sh" | "sh" | "SH" => LoadState::Short,
            _ => {
                let mut chars = s.chars();
                let head = chars.next().ok_or_else(bad)?;
                let rest = chars.as_str();
                match head {
                    'R' | 'r' => {
                        let (num, scale) = match rest.strip_suffix(['k', 'K']) {
                            Some(n) => (n, 1e3),
                            None => (rest, 1.0),
                        };
                        LoadState::Resistive(num.parse::<f64>().map_err(|_| bad())? * scale)
                    }
                    'C' | 'c' | 'L' | 'l' => {
                        let amp = if rest.contains('.') {
                            rest.parse::<f64>().map_err(|_| bad())?
                        } else if rest.len() == 2 && rest.bytes().all(|b| b.is_ascii_digit()) {
                            rest.parse::<u32>().map_err(|_| bad())? as f64 / 10.0
                        } else {
                            return Err(bad());
                        };
                        if matches!(head, 'C' | 'c') {
                            LoadState::Capacitive(amp)
                        } else {
                            LoadState::Inductive(amp)
                        }
                    }
                    _ => return Err(bad()),
                }
            }
        };
        load.validate()?;
        Ok(load)
    }
}

/// Ascending quadrature stage amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSet {
    amplitudes: Vec<f64>,
}

impl Default for StageSet {
    fn default() -> Self {
        Self {
            amplitudes: vec![0.3, 0.6, 0.9],
        }
    }
}

impl StageSet {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::param("stage set is empty"));
        }
        for (i, &a) in amplitudes.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::param(format!("stage amplitude must lie in (0, 1], got {a}")));
            }
            if i > 0 && a <= amplitudes[i - 1] {
                return Err(Error::param("stage amplitudes must be strictly ascending"));
            }
        }
        Ok(Self { amplitudes })
    }

    /// Stage set with a full-amplitude top stage, as used by the array
    /// load tables (`C10`/`L10`).
    pub fn full_top() -> Self {
        Self {
            amplitudes: vec![0.3, 0.6, 1.0],
        }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Nearest level in `{0} ∪ stages` to `magnitude`; ties go to the smaller.
    pub fn nearest(&self, magnitude: f64) -> f64 {
        let mut best = 0.0;
        let mut best_dist = magnitude.abs();
        for &a in &self.amplitudes {
            let d = (magnitude - a).abs();
            if d < best_dist - TIE_TOLERANCE {
                best = a;
                best_dist = d;
            }
        }
        best
    }

    /// Largest quadrature error for any |q| ≤ 1.
    pub fn max_quantization_error(&self) -> f64 {
        let mut levels = vec![0.0];
        levels.extend_from_slice(&self.amplitudes);
        let half_gap = levels.windows(2).map(|w| (w[1] - w[0]) / 2.0).fold(0.0, f64::max);
        half_gap.max(1.0 - levels[levels.len() - 1])
    }
}

/// Desired reflection `a_r∠φ_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionTarget {
    pub a_r: f64,
    pub phi_r: f64,
}

impl ReflectionTarget {
    pub fn new(a_r: f64, phi_r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a_r) {
            return Err(Error::param(format!("target amplitude must lie in [0, 1], got {a_r}")));
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&phi_r) {
            return Err(Error::param(format!("target phase must lie in [-π, π], got {phi_r}")));
        }
        Ok(Self { a_r, phi_r })
    }

    pub fn in_phase(&self) -> f64 {
        self.a_r * self.phi_r.cos()
    }

    pub fn quadrature(&self) -> f64 {
        self.a_r * self.phi_r.sin()
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::from_polar(self.a_r, self.phi_r)
    }
}

/// Loads of the in-phase (layer 1) and quadrature (layer 2) layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerAssignment {
    pub layer1: LoadState,
    pub layer2: LoadState,
}

impl fmt::Display for LayerAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.layer1, self.layer2)
    }
}

impl FromStr for LayerAssignment {
    type Err = Error;

    /// `layer1,layer2`, e.g. `R2000,C09`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::param(format!("expected 'layer1,layer2', got '{s}'")))?;
        Ok(Self {
            layer1: a.parse()?,
            layer2: b.parse()?,
        })
    }
}

/// Reflection coefficient of a load against `z0`.
pub fn gamma_of_load(load: &LoadState, z0: f64) -> Result<Complex64> {
    check_positive("Z0", z0)?;
    load.validate()?;
    Ok(match *load {
        LoadState::Open => Complex64::new(1.0, 0.0),
        LoadState::Short => Complex64::new(-1.0, 0.0),
        LoadState::Resistive(r) => Complex64::new((r - z0) / (r + z0), 0.0),
        LoadState::Capacitive(a) => Complex64::new(0.0, -a),
        LoadState::Inductive(a) => Complex64::new(0.0, a),
    })
}

/// Potentiometer resistance realizing the in-phase component of `target`.
///
/// Fails when the component is ±1; those map to Open/Short instead.
pub fn rl_for_inphase(target: &ReflectionTarget, z0: f64) -> Result<f64> {
    check_positive("Z0", z0)?;
    let i = target.in_phase();
    if i >= 1.0 {
        return Err(Error::domain("in-phase component 1 needs an open circuit"));
    }
    if i <= -1.0 {
        return Err(Error::domain("in-phase component -1 needs a short circuit"));
    }
    Ok(z0 * (1.0 + i) / (1.0 - i))
}

/// Maps a target onto the two layers.
pub fn assign_loads(target: &ReflectionTarget, stages: &StageSet, z0: f64) -> Result<LayerAssignment> {
    check_positive("Z0", z0)?;
    let i = target.in_phase();
    let layer1 = if i >= 1.0 {
        LoadState::Open
    } else if i <= -1.0 {
        LoadState::Short
    } else {
        LoadState::Resistive(rl_for_inphase(target, z0)?)
    };
    let q = target.quadrature();
    let level = stages.nearest(q.abs());
    let layer2 = if level == 0.0 {
        LoadState::Resistive(z0)
    } else if q >= 0.0 {
        LoadState::Inductive(level)
    } else {
        LoadState::Capacitive(level)
    };
    Ok(LayerAssignment { layer1, layer2 })
}

/// Unnormalized sum `Γ1 + Γ2`.
pub fn gamma_sum(assignment: &LayerAssignment, z0: f64) -> Result<Complex64> {
    Ok(gamma_of_load(&assignment.layer1, z0)? + gamma_of_load(&assignment.layer2, z0)?)
}

/// Open-normalized coefficient `(Γ1 + Γ2)/2`.
pub fn combined_gamma(assignment: &LayerAssignment, z0: f64) -> Result<Complex64> {
    Ok(gamma_sum(assignment, z0)? / 2.0)
}

/// Largest pointwise gap between `a·cos(ωt + φ_in + φ_r)` and its in-phase /
/// quadrature decomposition over `t_grid`.
pub fn iq_recombination_check(target: &ReflectionTarget, t_grid: &[f64], omega: f64, phi_in: f64) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::param("time grid is empty"));
    }
    let (i, q) = (target.in_phase(), target.quadrature());
    Ok(t_grid
        .iter()
        .map(|&t| {
            let carrier = omega * t + phi_in;
            let direct = target.a_r * (carrier + target.phi_r).cos();
            let split = i * carrier.cos() - q * carrier.sin();
            (direct - split).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const Z0: f64 = 1000.0;

    #[test]
    fn gamma_examples() {
        assert_eq!(
            gamma_of_load(&LoadState::Resistive(1000.0), Z0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let g = gamma_of_load(&LoadState::Resistive(2000.0), Z0).unwrap();
        assert!((g.re - 1.0 / 3.0).abs() < 1e-15 && g.im == 0.0);
        let g = gamma_of_load(&LoadState::Capacitive(0.9), Z0).unwrap();
        assert!((g.norm() - 0.9).abs() < 1e-15 && (g.arg() + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(gamma_of_load(&LoadState::Open, Z0).unwrap().re, 1.0);
        assert_eq!(gamma_of_load(&LoadState::Short, Z0).unwrap().re, -1.0);
        assert!(gamma_of_load(&LoadState::Open, 0.0).is_err());
        assert!(gamma_of_load(&LoadState::Capacitive(1.2), Z0).is_err());
    }

    #[test]
    fn rl_examples() {
        let t = |i: f64| ReflectionTarget::new(i.abs(), if i < 0.0 { PI } else { 0.0 }).unwrap();
        assert_eq!(
            rl_for_inphase(&ReflectionTarget::new(0.0, 0.3).unwrap(), Z0).unwrap(),
            Z0
        );
        assert!((rl_for_inphase(&t(1.0 / 3.0), Z0).unwrap() - 2000.0).abs() < 1e-9);
        assert!((rl_for_inphase(&t(-1.0 / 3.0), Z0).unwrap() - 500.0).abs() < 1e-9);
        assert!(rl_for_inphase(&t(1.0), Z0).is_err());
        assert!(rl_for_inphase(&t(-1.0), Z0).is_err());
    }

    #[test]
    fn assign_examples() {
        let s = StageSet::default();
        let a = assign_loads(&ReflectionTarget::new(1.0, 0.0).unwrap(), &s, Z0).unwrap();
        assert_eq!(a.layer1, LoadState::Open);
        assert_eq!(a.layer2, LoadState::Resistive(Z0));

        let a = assign_loads(&ReflectionTarget::new(1.0, FRAC_PI_2).unwrap(), &s, Z0).unwrap();
        match a.layer1 {
            LoadState::Resistive(r) => assert!((r - Z0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(a.layer2, LoadState::Inductive(0.9));

        let a = assign_loads(&ReflectionTarget::new(0.45 * 2f64.sqrt(), -FRAC_PI_4).unwrap(), &s, Z0).unwrap();
        assert_eq!(a.layer2, LoadState::Capacitive(0.3));
    }

    #[test]
    fn combined_examples() {
        let a: LayerAssignment = "R2000,C09".parse().unwrap();
        let g = combined_gamma(&a, Z0).unwrap();
        assert!((g.norm() - 0.48).abs() < 0.01);
        assert!((g.arg().to_degrees() + 69.7).abs() < 0.5);

        let a: LayerAssignment = "Sh,L09".parse().unwrap();
        let g = combined_gamma(&a, Z0).unwrap();
        assert!((g.norm() - 0.67).abs() < 0.01);
        assert!((g.arg().to_degrees() - 138.0).abs() < 0.5);

        let a: LayerAssignment = "Op,Op".parse().unwrap();
        assert_eq!(combined_gamma(&a, Z0).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn recombination_examples() {
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 1.0e6).collect();
        let w = 2.0 * PI * 41.1e3;
        let t = ReflectionTarget::new(0.7, 1.0).unwrap();
        assert!(iq_recombination_check(&t, &grid, w, 0.2).unwrap() < 1e-12);
        let t = ReflectionTarget::new(0.0, 2.0).unwrap();
        assert_eq!(iq_recombination_check(&t, &grid, w, 0.2).unwrap(), 0.0);
        let t = ReflectionTarget::new(1.0, -PI).unwrap();
        assert!(iq_recombination_check(&t, &grid, w, 0.2).unwrap() < 1e-12);
        assert!(iq_recombination_check(&t, &[], w, 0.0).is_err());
    }

    #[test]
    fn tokens_roundtrip() {
        for tok in ["Op", "Sh", "R2000", "R9400", "C03", "C10", "L06", "L10", "C0.45"] {
            let load: LoadState = tok.parse().unwrap();
            assert_eq!(load.to_string(), tok);
        }
        assert_eq!("R2k".parse::<LoadState>().unwrap(), LoadState::Resistive(2000.0));
        assert_eq!("R9.4k".parse::<LoadState>().unwrap(), LoadState::Resistive(9400.0));
        for bad in ["", "X1", "C1", "C123", "R-5", "C00", "L11", "Rabc"] {
            assert!(bad.parse::<LoadState>().is_err(), "{bad}");
        }
    }

    #[test]
    fn stage_set_rules() {
        assert!(StageSet::new(vec![]).is_err());
        assert!(StageSet::new(vec![0.6, 0.3]).is_err());
        assert!(StageSet::new(vec![0.0, 0.3]).is_err());
        assert!(StageSet::new(vec![0.3, 1.1]).is_err());
        let s = StageSet::default();
        assert!((s.max_quantization_error() - 0.15).abs() < 1e-15);
        assert!((StageSet::new(vec![0.5]).unwrap().max_quantization_error() - 0.5).abs() < 1e-15);
        assert_eq!(s.nearest(0.15), 0.0);
        assert_eq!(s.nearest(0.16), 0.3);
        assert_eq!(s.nearest(1.0), 0.9);
    }
}
