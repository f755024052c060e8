//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mlaris::array::{ArrayConfig, BeamScenario, CodingScheme, IncidentWave, ProbeRing};
use mlaris::extraction::{AmbientTap, MultipathChannel, SourceBurst};
use mlaris::iq::StageSet;
use mlaris::matching::{AnnealConfig, FrequencyBand};

use crate::InputError;

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub z0_ohm: Option<f64>,
    pub transducer: Option<TransducerSection>,
    pub band: Option<BandSection>,
    pub anneal: Option<AnnealSection>,
    pub array: Option<ArraySection>,
    pub scheme: Option<SchemeSection>,
    pub channel: Option<ChannelSection>,
    pub burst: Option<BurstSection>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TransducerSection {
    pub alpha_params_file: Option<PathBuf>,
    pub beta_params_file: Option<PathBuf>,
    pub n_d: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    pub f_low_hz: Option<f64>,
    pub f_high_hz: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSection {
    pub initial_temperature: Option<f64>,
    pub cooling_factor: Option<f64>,
    pub iterations_per_temperature: Option<usize>,
    pub temperature_levels: Option<usize>,
    pub restarts: Option<usize>,
    pub step_decades: Option<f64>,
    pub log10_c_farad_bounds: Option<(f64, f64)>,
    pub log10_l_henry_bounds: Option<(f64, f64)>,
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub frequency_hz: Option<f64>,
    pub sound_speed_m_per_s: Option<f64>,
    pub elements: Option<usize>,
    pub spacing_wavelengths: Option<f64>,
    pub spacing_m: Option<f64>,
    /// Explicit element positions; overrides count and spacing.
    pub positions_m: Option<Vec<[f64; 2]>>,
    pub normal: Option<[f64; 2]>,
    pub arrival_deg: Option<f64>,
    pub steer_deg: Option<f64>,
    pub ring_radius_m: Option<f64>,
    pub ring_probes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    /// `iq`, `2bit`, `1bit`, `continuous` or `all`.
    pub name: Option<String>,
    pub iq_stages: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default)]
    pub ambient_taps: Vec<TapSection>,
    pub reflector_delays_s: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TapSection {
    pub amplitude: f64,
    pub phase_rad: f64,
    pub delay_s: f64,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BurstSection {
    pub carrier_hz: Option<f64>,
    pub cycles: Option<f64>,
    pub initial_phase_rad: Option<f64>,
    pub sample_rate_hz: Option<f64>,
    pub amplitude: Option<f64>,
}

/// A parsed configuration with its source bytes digest.
#[derive(Debug, Clone, Default)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub digest: Option<String>,
    pub base_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let bytes =
            std::fs::read(path).map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
        let text =
            std::str::from_utf8(&bytes).map_err(|_| InputError(format!("config {} is not UTF-8", path.display())))?;
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| InputError(format!("config {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Self {
            config,
            digest: Some(sha256_hex(&bytes)),
            base_dir,
        };
        loaded.check_files()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_files(&self) -> Result<()> {
        if let Some(t) = &self.config.transducer {
            for p in [&t.alpha_params_file, &t.beta_params_file].into_iter().flatten() {
                let full = self.resolve(p);
                if !full.is_file() {
                    bail!(InputError(format!("referenced file {} does not exist", full.display())));
                }
            }
        }
        Ok(())
    }

    pub fn z0(&self, flag: Option<f64>) -> f64 {
        flag.or(self.config.z0_ohm).unwrap_or(mlaris::matching::DEFAULT_Z0)
    }

    pub fn band(&self, low: Option<f64>, high: Option<f64>, points: Option<usize>) -> Result<FrequencyBand> {
        let d = FrequencyBand::default();
        let s = self.config.band.clone().unwrap_or_default();
        FrequencyBand::new(
            low.or(s.f_low_hz).unwrap_or(d.f_low),
            high.or(s.f_high_hz).unwrap_or(d.f_high),
            points.or(s.grid_points).unwrap_or(d.n_grid),
        )
        .context("frequency band")
    }

    pub fn anneal(&self, seed: u64) -> AnnealConfig {
        let d = AnnealConfig::default();
        let s = self.config.anneal.clone().unwrap_or_default();
        AnnealConfig {
            initial_temperature: s.initial_temperature.unwrap_or(d.initial_temperature),
            cooling_factor: s.cooling_factor.unwrap_or(d.cooling_factor),
            iterations_per_temperature: s.iterations_per_temperature.unwrap_or(d.iterations_per_temperature),
            temperature_levels: s.temperature_levels.unwrap_or(d.temperature_levels),
            restarts: s.restarts.unwrap_or(d.restarts),
            seed,
            step_decades: s.step_decades.unwrap_or(d.step_decades),
            log10_c_bounds: s.log10_c_farad_bounds.unwrap_or(d.log10_c_bounds),
            log10_l_bounds: s.log10_l_henry_bounds.unwrap_or(d.log10_l_bounds),
            refine: s.refine.unwrap_or(d.refine),
        }
    }

    /// Beam scenario from the `[array]` section, starting from the
    /// eight-element default.
    pub fn beam_scenario(&self, z0: f64) -> Result<BeamScenario> {
        let d = BeamScenario::eight_element_default();
        let a = self.config.array.clone().unwrap_or_default();
        let frequency = a.frequency_hz.unwrap_or(d.wave.frequency);
        let speed = a.sound_speed_m_per_s.unwrap_or(d.wave.sound_speed);
        let arrival = a.arrival_deg.unwrap_or(90.0);
        let wave = IncidentWave::arriving_from(frequency, speed, arrival).context("incident wave")?;
        let array = match (&a.positions_m, a.spacing_m, a.spacing_wavelengths) {
            (Some(pos), None, None) => ArrayConfig::new(pos.clone(), a.normal.unwrap_or(d.array.normal()))?,
            (None, Some(_), Some(_)) => {
                bail!(InputError(
                    "give either spacing_m or spacing_wavelengths, not both".into()
                ))
            }
            (Some(_), _, _) => bail!(InputError("positions_m excludes the spacing keys".into())),
            (None, spacing_m, spacing_wl) => {
                let spacing = spacing_m.unwrap_or(spacing_wl.unwrap_or(2.0) * wave.wavelength());
                ArrayConfig::uniform_linear(a.elements.unwrap_or(8), spacing)?
            }
        };
        let ring = ProbeRing::new(
            d.ring.center,
            a.ring_radius_m.unwrap_or(d.ring.radius),
            a.ring_probes.unwrap_or(d.ring.count),
        )?;
        Ok(BeamScenario {
            wave,
            array,
            steer_deg: a.steer_deg.unwrap_or(d.steer_deg),
            ring,
            z0,
        })
    }

    /// Schemes selected by `name` (flag first, then config, then `iq`).
    pub fn schemes(&self, flag: Option<&str>) -> Result<Vec<CodingScheme>> {
        let s = self.config.scheme.clone().unwrap_or_default();
        let stages = match s.iq_stages {
            Some(v) => StageSet::new(v)?,
            None => StageSet::full_top(),
        };
        let name = flag.map(str::to_string).or(s.name).unwrap_or_else(|| "iq".into());
        let one = |n: &str| -> Result<CodingScheme> {
            Ok(match n {
                "iq" => CodingScheme::Iq(stages.clone()),
                "2bit" => CodingScheme::TwoBit,
                "1bit" => CodingScheme::OneBit,
                "continuous" => CodingScheme::Continuous,
                other => bail!(InputError(format!(
                    "unknown scheme '{other}' (expected iq, 2bit, 1bit, continuous or all)"
                ))),
            })
        };
        if name == "all" {
            ["iq", "2bit", "1bit", "continuous"].into_iter().map(one).collect()
        } else {
            Ok(vec![one(&name)?])
        }
    }

    pub fn burst(&self) -> Result<SourceBurst> {
        let s = self.config.burst.clone().unwrap_or_default();
        let carrier = s.carrier_hz.unwrap_or(41.1e3);
        let burst = SourceBurst {
            carrier_freq: carrier,
            cycles: s.cycles.unwrap_or(200.0),
            initial_phase: s.initial_phase_rad.unwrap_or(0.0),
            sample_rate: s.sample_rate_hz.unwrap_or(8.0 * carrier),
            amplitude: s.amplitude.unwrap_or(1.0),
        };
        burst.validate().context("burst")?;
        Ok(burst)
    }

    pub fn channel(&self) -> Option<MultipathChannel> {
        self.config.channel.as_ref().map(|c| MultipathChannel {
            ambient_taps: c
                .ambient_taps
                .iter()
                .map(|t| AmbientTap {
                    amplitude: t.amplitude,
                    phase: t.phase_rad,
                    delay: t.delay_s,
                })
                .collect(),
            reflector_delays: c.reflector_delays_s.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ScenarioConfig>("[array]\nfrequency = 1.0\n").is_err());
        assert!(toml::from_str::<ScenarioConfig>("colour = 1\n").is_err());
        assert!(toml::from_str::<ScenarioConfig>("[array]\nfrequency_hz = 41100.0\n").is_ok());
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn all_expands_to_four_schemes() {
        let c = LoadedConfig::default();
        assert_eq!(c.schemes(Some("all")).unwrap().len(), 4);
        assert!(c.schemes(Some("3bit")).is_err());
    }
}
