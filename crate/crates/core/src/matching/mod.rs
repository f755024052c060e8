//! Cascaded high-pass L-section matching network.
//!
//! Each tier is a series capacitor followed by a shunt inductor. Tiers are
//! cascaded: activating tier `i` routes the PZT through tiers `1..=i`. Tier
//! values are designed one at a time with simulated annealing, tier `i`
//! against envelope entries `3i−2..=3i` seen through the already fixed
//! tiers before it.

mod abcd;
mod anneal;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::numeric::check_positive;
use crate::transducer::{simplified_impedance, simplified_unchecked, Impedance, ImpedanceEnvelope, PztCircuitParams};
use crate::{Error, Result};

pub use abcd::TwoPort;
pub use anneal::AnnealConfig;

/// Largest supported cascade depth.
pub const MAX_TIERS: usize = 3;
/// Default characteristic impedance of the load network (Ω).
pub const DEFAULT_Z0: f64 = 1000.0;
/// Envelope entries handled by each tier.
pub const ENTRIES_PER_TIER: usize = 3;

/// One high-pass L-section: series `c_m`, then shunt `l_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LMatchTier {
    pub c_m: f64,
    pub l_m: f64,
}

impl LMatchTier {
    pub fn new(c_m: f64, l_m: f64) -> Result<Self> {
        check_positive("C_M", c_m)?;
        check_positive("L_M", l_m)?;
        Ok(Self { c_m, l_m })
    }

    /// Chain matrix of the tier at `f`.
    pub fn two_port(&self, f: f64) -> TwoPort {
        let w = TAU * f;
        TwoPort::series(Complex64::new(0.0, -1.0 / (w * self.c_m)))
            .then(&TwoPort::shunt(Complex64::new(0.0, -1.0 / (w * self.l_m))))
    }
}

/// Tiers ordered from the PZT outward, plus the target impedance.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedNetwork {
    tiers: Vec<LMatchTier>,
    z0: f64,
}

impl CascadedNetwork {
    pub fn new(tiers: Vec<LMatchTier>, z0: f64) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::param("a matching network needs at least one tier"));
        }
        let mut net = Self::empty(z0)?;
        for t in tiers {
            net = net.push(t)?;
        }
        Ok(net)
    }

    /// Network with no tiers yet; used as the prefix when designing tier 1.
    pub fn empty(z0: f64) -> Result<Self> {
        check_positive("Z0", z0)?;
        Ok(Self { tiers: Vec::new(), z0 })
    }

    pub fn push(mut self, tier: LMatchTier) -> Result<Self> {
        LMatchTier::new(tier.c_m, tier.l_m)?;
        if self.tiers.len() == MAX_TIERS {
            return Err(Error::param(format!("at most {MAX_TIERS} tiers are supported")));
        }
        self.tiers.push(tier);
        Ok(self)
    }

    pub fn tiers(&self) -> &[LMatchTier] {
        &self.tiers
    }

    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }
}

/// Uniform frequency grid between `f_low` and `f_high` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub f_low: f64,
    pub f_high: f64,
    pub n_grid: usize,
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self {
            f_low: 27.5e3,
            f_high: 28.5e3,
            n_grid: 41,
        }
    }
}

impl FrequencyBand {
    pub fn new(f_low: f64, f_high: f64, n_grid: usize) -> Result<Self> {
        let band = Self { f_low, f_high, n_grid };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("f_low", self.f_low)?;
        if !(self.f_high.is_finite() && self.f_high > self.f_low) {
            return Err(Error::param(format!(
                "f_high ({}) must exceed f_low ({})",
                self.f_high, self.f_low
            )));
        }
        if self.n_grid < 2 {
            return Err(Error::param("frequency grid needs at least 2 points"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = (self.f_high - self.f_low) / (self.n_grid - 1) as f64;
        (0..self.n_grid)
            .map(|i| {
                if i + 1 == self.n_grid {
                    self.f_high
                } else {
                    self.f_low + step * i as f64
                }
            })
            .collect()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_low + self.f_high)
    }
}

/// Output impedance of one tier: `(z_in − j/(ωC)) ∥ jωL`.
pub fn tier_output_impedance(z_in: Impedance, tier: &LMatchTier, f: f64) -> Result<Impedance> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::domain(format!("frequency must be > 0 Hz, got {f}")));
    }
    let w = TAU * f;
    let series = z_in - Complex64::new(0.0, 1.0 / (w * tier.c_m));
    let shunt = Complex64::new(0.0, w * tier.l_m);
    let den = series + shunt;
    if den.norm() < 1e-12 {
        return Err(Error::Numeric(format!(
            "degenerate parallel combination at {f} Hz (|sum| = {:e} Ω)",
            den.norm()
        )));
    }
    Ok(series * shunt / den)
}

fn apply_tiers(mut z: Impedance, tiers: &[LMatchTier], f: f64) -> Result<Impedance> {
    for tier in tiers {
        z = tier_output_impedance(z, tier, f)?;
    }
    Ok(z)
}

/// Impedance presented at the load after `active_tiers` cascaded tiers.
pub fn cascade_impedance(
    params: &PztCircuitParams,
    network: &CascadedNetwork,
    active_tiers: usize,
    f: f64,
) -> Result<Impedance> {
    if active_tiers == 0 || active_tiers > network.len() {
        return Err(Error::param(format!(
            "active tiers must lie in 1..={}, got {active_tiers}",
            network.len()
        )));
    }
    let z = simplified_impedance(params, f)?;
    apply_tiers(z, &network.tiers[..active_tiers], f)
}

/// Reflection coefficient `(z_m − z0)/(z_m + z0)`.
pub fn reflection_at_load(z_m: Impedance, z0: f64) -> Result<Complex64> {
    check_positive("Z0", z0)?;
    let den = z_m + z0;
    if den.re == 0.0 && den.im == 0.0 {
        return Err(Error::Singular);
    }
    Ok((z_m - z0) / den)
}

/// Capacitive reactance magnitude whose purely reactive load reflects with
/// phase `phase` (radians, in (−π, 0)) against `z0`.
pub fn capacitive_reactance_for_phase(phase: f64, z0: f64) -> Result<f64> {
    check_positive("Z0", z0)?;
    if !(phase > -PI && phase < 0.0) {
        return Err(Error::domain(format!(
            "a capacitive load reflects with phase in (-π, 0), got {phase}"
        )));
    }
    Ok(z0 * ((phase + PI) / 2.0).tan())
}

/// Capacitance presenting reactance `-j·reactance` at `f`.
pub fn equivalent_capacitance(reactance: f64, f: f64) -> Result<f64> {
    check_positive("reactance magnitude", reactance)?;
    check_positive("frequency", f)?;
    Ok(1.0 / (TAU * f * reactance))
}

/// Matching objective: `Σ_entries Σ_f |Γ(f)|³` for the cascade
/// `prefix + candidate`.
pub fn p1_cost(
    prefix: &CascadedNetwork,
    candidate: &LMatchTier,
    entries: &[PztCircuitParams],
    band: &FrequencyBand,
    z0: f64,
) -> Result<f64> {
    band.validate()?;
    check_positive("Z0", z0)?;
    if entries.is_empty() {
        return Err(Error::param("P1 needs at least one envelope entry"));
    }
    let mut total = 0.0;
    for p in entries {
        for f in band.grid() {
            let z = apply_tiers(simplified_impedance(p, f)?, prefix.tiers(), f)?;
            let z = tier_output_impedance(z, candidate, f)?;
            total += reflection_at_load(z, z0)?.norm().powi(3);
        }
    }
    Ok(total)
}

/// Result of designing one tier.
#[derive(Debug, Clone, PartialEq)]
pub struct TierDesign {
    pub tier: LMatchTier,
    /// P1 cost of the chosen tier (sum form).
    pub cost: f64,
    /// Largest |Γ| over the designated entries and the grid.
    pub worst_gamma: f64,
    pub restart: usize,
    pub evaluations: usize,
}

/// Designs the next tier after `prefix` for `entries` over `band`.
pub fn optimize_tier(
    prefix: &CascadedNetwork,
    entries: &[PztCircuitParams],
    band: &FrequencyBand,
    z0: f64,
    anneal_config: &AnnealConfig,
) -> Result<TierDesign> {
    band.validate()?;
    check_positive("Z0", z0)?;
    anneal_config.validate()?;
    if entries.is_empty() {
        return Err(Error::param("no envelope entries to optimize for"));
    }
    if prefix.len() >= MAX_TIERS {
        return Err(Error::param("prefix already has the maximum number of tiers"));
    }
    let grid = band.grid();
    // Impedances seen by the new tier are fixed once the prefix is fixed.
    let mut seen = Vec::with_capacity(entries.len() * grid.len());
    for p in entries {
        p.validate()?;
        for &f in &grid {
            seen.push((f, apply_tiers(simplified_unchecked(p, f), prefix.tiers(), f)?));
        }
    }
    let count = seen.len() as f64;
    let cost_of = |tier: &LMatchTier| -> f64 {
        seen.iter()
            .map(|&(f, z)| match tier_output_impedance(z, tier, f) {
                Ok(out) => {
                    let den = out + z0;
                    if den.norm() == 0.0 {
                        f64::INFINITY
                    } else {
                        ((out - z0) / den).norm().powi(3)
                    }
                }
                Err(_) => f64::INFINITY,
            })
            .sum::<f64>()
    };
    let outcome = anneal::anneal(anneal_config, |x| {
        let tier = LMatchTier {
            c_m: 10f64.powf(x[0]),
            l_m: 10f64.powf(x[1]),
        };
        cost_of(&tier) / count
    })?;
    let tier = LMatchTier::new(10f64.powf(outcome.point[0]), 10f64.powf(outcome.point[1]))?;
    let worst_gamma = seen
        .iter()
        .map(|&(f, z)| {
            tier_output_impedance(z, &tier, f)
                .and_then(|out| reflection_at_load(out, z0))
                .map(|g| g.norm())
        })
        .try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g)))?;
    Ok(TierDesign {
        tier,
        cost: cost_of(&tier),
        worst_gamma,
        restart: outcome.restart,
        evaluations: outcome.evaluations,
    })
}

/// Worst-case |Γ| of one envelope entry at its designated tier count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryMatch {
    /// 1-based envelope index.
    pub entry_index: usize,
    pub tier_count: usize,
    pub worst_gamma: f64,
    /// Worst-case |Γ| with the PZT connected straight to `z0`.
    pub unmatched_worst_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSynthesis {
    pub network: CascadedNetwork,
    pub tier_designs: Vec<TierDesign>,
    pub entries: Vec<EntryMatch>,
}

impl NetworkSynthesis {
    pub fn total_cost(&self) -> f64 {
        self.tier_designs.iter().map(|t| t.cost).sum()
    }
}

/// Designs `n_d / 3` tiers sequentially against consecutive envelope triples.
pub fn synthesize_network(
    envelope: &ImpedanceEnvelope,
    band: &FrequencyBand,
    z0: f64,
    anneal_config: &AnnealConfig,
) -> Result<NetworkSynthesis> {
    let n_d = envelope.n_d();
    if !n_d.is_multiple_of(ENTRIES_PER_TIER) {
        return Err(Error::param(format!(
            "envelope size {n_d} is not a multiple of {ENTRIES_PER_TIER}"
        )));
    }
    let n_tiers = n_d / ENTRIES_PER_TIER;
    if n_tiers > MAX_TIERS {
        return Err(Error::param(format!(
            "envelope of {n_d} entries needs {n_tiers} tiers, at most {MAX_TIERS} supported"
        )));
    }
    let mut network = CascadedNetwork::empty(z0)?;
    let mut tier_designs = Vec::with_capacity(n_tiers);
    for chunk in envelope.entries().chunks(ENTRIES_PER_TIER) {
        let design = optimize_tier(&network, chunk, band, z0, anneal_config)?;
        network = network.push(design.tier)?;
        tier_designs.push(design);
    }
    let mut entries = Vec::with_capacity(n_d);
    for (i, p) in envelope.entries().iter().enumerate() {
        let tier_count = i / ENTRIES_PER_TIER + 1;
        entries.push(EntryMatch {
            entry_index: i + 1,
            tier_count,
            worst_gamma: worst_gamma(p, &network, tier_count, band)?,
            unmatched_worst_gamma: worst_gamma(p, &network, 0, band)?,
        });
    }
    Ok(NetworkSynthesis {
        network,
        tier_designs,
        entries,
    })
}

/// |Γ| at every grid frequency with `tier_count` tiers active (0 = direct).
pub fn gamma_profile(
    params: &PztCircuitParams,
    network: &CascadedNetwork,
    tier_count: usize,
    band: &FrequencyBand,
) -> Result<Vec<(f64, f64)>> {
    band.validate()?;
    if tier_count > network.len() {
        return Err(Error::param(format!(
            "tier count {tier_count} exceeds network size {}",
            network.len()
        )));
    }
    band.grid()
        .into_iter()
        .map(|f| {
            let z = apply_tiers(simplified_impedance(params, f)?, &network.tiers[..tier_count], f)?;
            Ok((f, reflection_at_load(z, network.z0)?.norm()))
        })
        .collect()
}

pub fn worst_gamma(
    params: &PztCircuitParams,
    network: &CascadedNetwork,
    tier_count: usize,
    band: &FrequencyBand,
) -> Result<f64> {
    Ok(gamma_profile(params, network, tier_count, band)?
        .into_iter()
        .fold(0.0, |acc, (_, g)| acc.max(g)))
}

/// One line of the match report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRow {
    pub entry_index: usize,
    pub tier_count: usize,
    pub freq_hz: f64,
    pub gamma_mag: f64,
}

/// |Γ| of every envelope entry at every tier count (0 = direct) over `band`.
pub fn match_report(
    envelope: &ImpedanceEnvelope,
    network: &CascadedNetwork,
    band: &FrequencyBand,
) -> Result<Vec<MatchRow>> {
    let mut rows = Vec::new();
    for (i, p) in envelope.entries().iter().enumerate() {
        for tier_count in 0..=network.len() {
            for (freq_hz, gamma_mag) in gamma_profile(p, network, tier_count, band)? {
                rows.push(MatchRow {
                    entry_index: i + 1,
                    tier_count,
                    freq_hz,
                    gamma_mag,
                });
            }
        }
    }
    Ok(rows)
}

/// Load voltage across `z0` with the first `tier_count` tiers active, for a
/// unit-EMF source behind the PZT impedance.
pub fn load_voltage(
    params: &PztCircuitParams,
    network: &CascadedNetwork,
    tier_count: usize,
    f: f64,
) -> Result<Complex64> {
    if tier_count > network.len() {
        return Err(Error::param(format!(
            "tier count {tier_count} exceeds network size {}",
            network.len()
        )));
    }
    let z_src = simplified_impedance(params, f)?;
    let chain = network.tiers[..tier_count]
        .iter()
        .fold(TwoPort::identity(), |acc, t| acc.then(&t.two_port(f)));
    Ok(chain.load_voltage(Complex64::new(1.0, 0.0), z_src, Complex64::new(network.z0, 0.0)))
}

/// Runtime tier choice: the prefix length with the largest load voltage at
/// `probe_f`, ties going to fewer tiers.
pub fn select_tier(params: &PztCircuitParams, network: &CascadedNetwork, probe_f: f64) -> Result<usize> {
    if network.is_empty() {
        return Err(Error::param("cannot select a tier from an empty network"));
    }
    let mut best = (1, load_voltage(params, network, 1, probe_f)?.norm());
    for k in 2..=network.len() {
        let v = load_voltage(params, network, k, probe_f)?.norm();
        if v > best.1 {
            best = (k, v);
        }
    }
    Ok(best.0)
}
