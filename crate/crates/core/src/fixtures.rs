//! Shipped fixture data.
//!
//! The temperature sweeps contain one quoted reference point each at
//! 28.2 kHz; the neighbouring samples are reconstructed and marked as
//! approximate inside the files.

use crate::io::read_sweep;
use crate::transducer::{fit_params, interpolate_envelope, ImpedanceEnvelope, PztCircuitParams};
use crate::Result;

pub const SWEEP_9C: &str = include_str!("../data/sweep_9c.csv");
pub const SWEEP_22C: &str = include_str!("../data/sweep_22c.csv");
pub const LAYER_ANGLE_TABLE: &str = include_str!("../data/layer_angle_table.csv");

/// Resonance frequency of the swept disk (Hz).
pub const SWEEP_RESONANCE_HZ: f64 = 28.2e3;

/// Fitted `(alpha, beta)` endpoints: the cold (9 °C) and warm (22 °C) sweeps.
pub fn fitted_endpoints() -> Result<(PztCircuitParams, PztCircuitParams)> {
    let alpha = fit_params(&read_sweep(SWEEP_9C)?)?.params;
    let beta = fit_params(&read_sweep(SWEEP_22C)?)?.params;
    Ok((alpha, beta))
}

/// Envelope of `n_d` entries between the fitted endpoints.
///
/// The fitted pair does not follow the nominal endpoint ordering in every
/// parameter, so the ordering check of [`build_envelope`](crate::transducer::build_envelope)
/// is skipped.
pub fn fitted_envelope(n_d: usize) -> Result<ImpedanceEnvelope> {
    let (alpha, beta) = fitted_endpoints()?;
    interpolate_envelope(&alpha, &beta, n_d)
}
