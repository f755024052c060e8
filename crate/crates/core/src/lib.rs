//! Simulation library for multilayered acoustic reconfigurable intelligent
//! surfaces (ML-ARIS).
//!
//! The crate is split along the signal chain of a single reflector and the
//! array it belongs to:
//!
//! * [`transducer`]: electrical equivalent of one PZT layer, parameter
//!   fitting from impedance sweeps and the environmental impedance envelope.
//! * [`matching`]: the cascaded high-pass L-section matching network, its
//!   annealing-based synthesis and runtime tier selection.
//! * [`iq`]: discrete load states and the two-layer in-phase/quadrature
//!   mapping from a desired reflection to load assignments.
//! * [`array`]: reflected field of a line of point reflectors under
//!   plane-wave excitation and beam/lobe metrics per coding scheme.
//! * [`extraction`]: multipath reception synthesis and the
//!   reference-subtraction pipeline that recovers a reflector's coefficient.
//! * [`io`]: the column-text and key-value file formats shared with the CLI.
//!
//! All frequencies are in Hz; angular frequency is derived where needed.

// Negated comparisons are how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod error;
pub mod extraction;
pub mod fixtures;
pub mod io;
pub mod iq;
pub mod matching;
pub mod transducer;

mod numeric;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use array::{ArrayConfig, BeamMetrics, BeamPattern, BeamScenario, CodingScheme, IncidentWave, ProbeRing};
pub use extraction::{ExtractionResult, MultipathChannel, ReflectorScene, SourceBurst, Waveform};
pub use iq::{LayerAssignment, LoadState, ReflectionTarget, StageSet};
pub use matching::{AnnealConfig, CascadedNetwork, FrequencyBand, LMatchTier};
pub use transducer::{Impedance, ImpedanceEnvelope, ImpedanceSweep, PztCircuitParams};
