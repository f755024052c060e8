//! Electrical-equivalent model of a single PZT layer.
//!
//! The full model is a lossy dielectric (`R_E` in parallel with `C_E`) coupled
//! through an ideal transformer of turns ratio φ to a series mechanical branch
//! `R_M + jωL_M + 1/(jωC_M) + Z_rad`. Near mechanical resonance with a
//! high-Q dielectric this collapses to three parameters:
//!
//! ```text
//! Z_R(f) ≈ 1/(R_E (2πf C_E)²) + Re'(Z_S) − j/(2πf C_E)
//! ```
//!
//! which is what [`fit_params`] estimates and what the matching network is
//! designed against.

mod fit;

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::numeric::check_positive;
use crate::{Error, Result};

pub use fit::{fit_params, fit_params_with, FitOptions, FitReport, FitWeighting};

/// Complex impedance in ohms, `R + jX`.
pub type Impedance = Complex64;

/// Mechanical side of the transducer, reflected through the turns ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalBranch {
    /// Mechanical loss resistance `R_M` (Ω).
    pub r_m: f64,
    /// Dynamic mass `L_M` (H).
    pub l_m: f64,
    /// Compliance `C_M` (F).
    pub c_m: f64,
    /// Radiation impedance.
    pub z_rad: Impedance,
    /// Transformer turns ratio φ (dimensionless).
    pub turns_ratio: f64,
}

impl MechanicalBranch {
    pub fn validate(&self) -> Result<()> {
        check_positive("R_M", self.r_m)?;
        check_positive("L_M", self.l_m)?;
        check_positive("C_M", self.c_m)?;
        if !(self.z_rad.re.is_finite() && self.z_rad.im.is_finite()) {
            return Err(Error::param("Z_rad must be finite"));
        }
        if !self.turns_ratio.is_finite() {
            return Err(Error::param("turns ratio must be finite"));
        }
        Ok(())
    }

    /// Frequency at which the mechanical reactances cancel.
    pub fn resonance_hz(&self) -> f64 {
        1.0 / (TAU * (self.l_m * self.c_m).sqrt())
    }
}

/// Electrical-equivalent parameters of one PZT layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PztCircuitParams {
    /// Dielectric loss resistance `R_E` (Ω). May be `+∞` for a lossless dielectric.
    pub r_e: f64,
    /// Dielectric capacitance `C_E` (F).
    pub c_e: f64,
    /// Transformed mechanical resistance `φ²·Re(Z_S)` (Ω).
    pub re_zs_eff: f64,
    /// Optional full mechanical branch, needed only by [`secondary_impedance`]
    /// and [`full_impedance`].
    pub mechanical: Option<MechanicalBranch>,
}

impl PztCircuitParams {
    pub fn new(r_e: f64, c_e: f64, re_zs_eff: f64) -> Result<Self> {
        let params = Self {
            r_e,
            c_e,
            re_zs_eff,
            mechanical: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_mechanical(mut self, branch: MechanicalBranch) -> Result<Self> {
        branch.validate()?;
        self.mechanical = Some(branch);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_e.is_nan() || self.r_e <= 0.0 {
            return Err(Error::param(format!("R_E must be > 0, got {}", self.r_e)));
        }
        check_positive("C_E", self.c_e)?;
        if !(self.re_zs_eff.is_finite() && self.re_zs_eff >= 0.0) {
            return Err(Error::param(format!(
                "Re'(Z_S) must be finite and >= 0, got {}",
                self.re_zs_eff
            )));
        }
        if let Some(m) = &self.mechanical {
            m.validate()?;
        }
        Ok(())
    }

    /// Drops the mechanical branch, keeping only the three fitted parameters.
    pub fn simplified(&self) -> Self {
        Self {
            mechanical: None,
            ..*self
        }
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("frequency must be > 0 Hz, got {f}")))
    }
}

fn mechanical(params: &PztCircuitParams) -> Result<&MechanicalBranch> {
    params
        .mechanical
        .as_ref()
        .ok_or_else(|| Error::param("full mechanical branch is required"))
}

/// Equivalent impedance of the secondary (mechanical) winding,
/// `R_M + j(2πf L_M − 1/(2πf C_M)) + Z_rad`.
pub fn secondary_impedance(params: &PztCircuitParams, f: f64) -> Result<Impedance> {
    let m = mechanical(params)?;
    check_frequency(f)?;
    let w = TAU * f;
    Ok(Complex64::new(m.r_m, w * m.l_m - 1.0 / (w * m.c_m)) + m.z_rad)
}

/// Total impedance of the PZT layer with the full mechanical branch.
pub fn full_impedance(params: &PztCircuitParams, f: f64) -> Result<Impedance> {
    let m = mechanical(params)?;
    let zs = secondary_impedance(params, f)?;
    let w = TAU * f;
    let wc = w * params.c_e;
    // R/(1+(ωCR)²) and ωCR²/(1+(ωCR)²), rearranged so R_E = ∞ stays finite.
    let re = 1.0 / (1.0 / params.r_e + wc * wc * params.r_e);
    let inv_q = 1.0 / (wc * params.r_e);
    let im = 1.0 / (wc * (1.0 + inv_q * inv_q));
    Ok(Complex64::new(re, -im) + zs * (m.turns_ratio * m.turns_ratio))
}

/// Simplified three-parameter impedance valid near resonance when
/// `2πf C_E R_E ≫ 1`.
pub fn simplified_impedance(params: &PztCircuitParams, f: f64) -> Result<Impedance> {
    check_frequency(f)?;
    Ok(simplified_unchecked(params, f))
}

#[inline]
pub(crate) fn simplified_unchecked(params: &PztCircuitParams, f: f64) -> Impedance {
    let wc = TAU * f * params.c_e;
    Complex64::new(1.0 / (params.r_e * wc * wc) + params.re_zs_eff, -1.0 / wc)
}

/// Impedance measurements ordered by strictly increasing frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSweep {
    entries: Vec<(f64, Impedance)>,
}

impl ImpedanceSweep {
    pub fn new(entries: Vec<(f64, Impedance)>) -> Result<Self> {
        for (i, (f, z)) in entries.iter().enumerate() {
            check_frequency(*f)?;
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::param(format!("impedance at entry {i} is not finite")));
            }
            if i > 0 && entries[i - 1].0 >= *f {
                return Err(Error::param(format!(
                    "frequencies must be strictly increasing (entry {i}: {f} Hz)"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Samples `params` under the simplified model at the given frequencies.
    pub fn from_model(params: &PztCircuitParams, freqs: &[f64]) -> Result<Self> {
        let entries = freqs
            .iter()
            .map(|&f| simplified_impedance(params, f).map(|z| (f, z)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(f64, Impedance)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// Discretized family of circuit parameters spanning environmental extremes.
///
/// Entry 1 is the β endpoint (minimum impedance magnitude at resonance) and
/// entry `n_d` the α endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceEnvelope {
    entries: Vec<PztCircuitParams>,
}

impl ImpedanceEnvelope {
    pub fn from_entries(entries: Vec<PztCircuitParams>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::param("an envelope needs at least 2 entries"));
        }
        for e in &entries {
            e.validate()?;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PztCircuitParams] {
        &self.entries
    }

    pub fn n_d(&self) -> usize {
        self.entries.len()
    }

    /// Envelope entry by 1-based index.
    pub fn entry(&self, index: usize) -> Option<&PztCircuitParams> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }
}

/// Builds the envelope after checking the endpoint ordering
/// `R_E^α < R_E^β`, `C_E^α < C_E^β`, `Re'^α > Re'^β`.
pub fn build_envelope(alpha: &PztCircuitParams, beta: &PztCircuitParams, n_d: usize) -> Result<ImpedanceEnvelope> {
    alpha.validate()?;
    beta.validate()?;
    if !(alpha.r_e < beta.r_e) {
        return Err(Error::param(format!(
            "expected R_E^alpha < R_E^beta, got {} >= {}",
            alpha.r_e, beta.r_e
        )));
    }
    if !(alpha.c_e < beta.c_e) {
        return Err(Error::param(format!(
            "expected C_E^alpha < C_E^beta, got {} >= {}",
            alpha.c_e, beta.c_e
        )));
    }
    if !(alpha.re_zs_eff > beta.re_zs_eff) {
        return Err(Error::param(format!(
            "expected Re'^alpha > Re'^beta, got {} <= {}",
            alpha.re_zs_eff, beta.re_zs_eff
        )));
    }
    interpolate_envelope(alpha, beta, n_d)
}

/// Same linear discretization as [`build_envelope`] without the ordering
/// check. Measured endpoints do not always satisfy the nominal ordering in
/// every parameter; each parameter still moves monotonically from β to α.
pub fn interpolate_envelope(
    alpha: &PztCircuitParams,
    beta: &PztCircuitParams,
    n_d: usize,
) -> Result<ImpedanceEnvelope> {
    alpha.validate()?;
    beta.validate()?;
    if n_d < 2 {
        return Err(Error::param(format!("n_d must be >= 2, got {n_d}")));
    }
    if !(alpha.r_e.is_finite() && beta.r_e.is_finite()) {
        return Err(Error::param("envelope endpoints need finite R_E"));
    }
    let span = (n_d - 1) as f64;
    let mut entries = Vec::with_capacity(n_d);
    for i in 1..=n_d {
        let entry = if i == 1 {
            beta.simplified()
        } else if i == n_d {
            alpha.simplified()
        } else {
            let k = (i - 1) as f64;
            PztCircuitParams {
                r_e: beta.r_e - k * (beta.r_e - alpha.r_e) / span,
                c_e: beta.c_e - k * (beta.c_e - alpha.c_e) / span,
                re_zs_eff: beta.re_zs_eff + k * (alpha.re_zs_eff - beta.re_zs_eff) / span,
                mechanical: None,
            }
        };
        entries.push(entry);
    }
    ImpedanceEnvelope::from_entries(entries)
}
