//! Text formats shared with the command-line tool.
//!
//! Column files are comma separated with a fixed header line; blank lines
//! and lines starting with `#` are ignored. Key-value documents hold one
//! `key = value` pair per line. Every reader reports the 1-based line of the
//! first problem. Numbers are written with the shortest representation that
//! parses back to the same `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::array::{BeamPattern, SchemeComparison};
use crate::extraction::Waveform;
use crate::matching::{CascadedNetwork, LMatchTier, MatchRow};
use crate::transducer::{ImpedanceEnvelope, ImpedanceSweep, MechanicalBranch, PztCircuitParams};
use crate::{Error, Result};

pub const SWEEP_HEADER: &str = "freq_hz,re_ohm,im_ohm";
pub const MATCH_HEADER: &str = "entry_index,tier_count,freq_hz,gamma_mag";
pub const BEAM_HEADER: &str = "angle_deg,re,im,mag,mag_norm";
pub const METRICS_HEADER: &str = "scheme,lobe,angle_deg,mag_norm,main_rel";
pub const REAL_WAVEFORM_HEADER: &str = "t_seconds,value";
pub const ANALYTIC_WAVEFORM_HEADER: &str = "t_seconds,re,im";
pub const EXTRACTION_HEADER: &str = "load_token,phase_deg,amplitude,theory_phase_deg,theory_amplitude";
pub const ANGLE_TABLE_HEADER: &str = "angle_deg,layer,re_ohm,im_ohm";
pub const ENVELOPE_HEADER: &str = "entry_index,r_e_ohm,c_e_farad,re_zs_eff_ohm";

const ANGLE_NOTE: &str = "# angles in degrees: 0 along the array axis, 90 along the array normal, counterclockwise";

struct Row<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

impl Row<'_> {
    fn f64(&self, i: usize, name: &str) -> Result<f64> {
        parse_f64(self.line, name, self.fields[i])
    }

    fn usize(&self, i: usize, name: &str) -> Result<usize> {
        self.fields[i].parse().map_err(|_| {
            Error::parse(
                self.line,
                format!("{name}: expected a non-negative integer, got '{}'", self.fields[i]),
            )
        })
    }

    fn opt_f64(&self, i: usize, name: &str) -> Result<Option<f64>> {
        if self.fields[i].is_empty() {
            Ok(None)
        } else {
            self.f64(i, name).map(Some)
        }
    }
}

fn parse_f64(line: usize, name: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("{name}: expected a number, got '{s}'")))?;
    if v.is_nan() {
        return Err(Error::parse(line, format!("{name}: NaN is not allowed")));
    }
    Ok(v)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_table<'a>(text: &'a str, header: &str) -> Result<Vec<Row<'a>>> {
    let mut lines = content_lines(text);
    let (hline, h) = lines
        .next()
        .ok_or_else(|| Error::parse(1, format!("missing header '{header}'")))?;
    if h.split(',').map(str::trim).ne(header.split(',')) {
        return Err(Error::parse(hline, format!("expected header '{header}', got '{h}'")));
    }
    let width = header.split(',').count();
    lines
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(Error::parse(
                    line,
                    format!("expected {width} fields, got {}", fields.len()),
                ));
            }
            Ok(Row { line, fields })
        })
        .collect()
}

fn first_header(text: &str) -> Option<&str> {
    content_lines(text).next().map(|(_, l)| l)
}

/// Reads an impedance sweep; frequencies must be strictly increasing.
pub fn read_sweep(text: &str) -> Result<ImpedanceSweep> {
    let rows = parse_table(text, SWEEP_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    let mut last = f64::NEG_INFINITY;
    for r in &rows {
        let f = r.f64(0, "freq_hz")?;
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::parse(r.line, format!("freq_hz must be finite and > 0, got {f}")));
        }
        if f <= last {
            return Err(Error::parse(r.line, "frequencies must be strictly increasing"));
        }
        last = f;
        entries.push((f, Complex64::new(r.f64(1, "re_ohm")?, r.f64(2, "im_ohm")?)));
    }
    if entries.is_empty() {
        return Err(Error::parse(1, "sweep has no samples"));
    }
    ImpedanceSweep::new(entries)
}

pub fn write_sweep(sweep: &ImpedanceSweep) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for (f, z) in sweep.entries() {
        writeln!(out, "{f},{},{}", z.re, z.im).expect("string write");
    }
    out
}

struct KeyValues {
    map: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (line, l) in content_lines(text) {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::parse(line, format!("expected 'key = value', got '{l}'")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::parse(line, "empty key"));
            }
            if map.insert(k.to_string(), (line, v.to_string())).is_some() {
                return Err(Error::parse(line, format!("duplicate key '{k}'")));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Result<Option<f64>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => parse_f64(line, key, &v).map(Some),
        }
    }

    fn require(&mut self, key: &str) -> Result<f64> {
        self.take(key)?
            .ok_or_else(|| Error::parse(1, format!("missing required key '{key}'")))
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::parse(line, format!("unknown key '{k}'"))),
        }
    }
}

const MECHANICAL_KEYS: [&str; 6] = [
    "r_m_ohms",
    "l_m_henries",
    "c_m_farads",
    "z_rad_re_ohms",
    "z_rad_im_ohms",
    "turns_ratio",
];

/// Reads circuit parameters; the mechanical branch is all-or-nothing.
pub fn read_params(text: &str) -> Result<PztCircuitParams> {
    let mut kv = KeyValues::parse(text)?;
    let r_e = kv.require("r_e_ohms")?;
    let c_e = kv.require("c_e_farads")?;
    let re_zs_eff = kv.require("re_zs_eff_ohms")?;
    let mech: Vec<Option<f64>> = MECHANICAL_KEYS.iter().map(|k| kv.take(k)).collect::<Result<_>>()?;
    kv.finish()?;
    let params = PztCircuitParams::new(r_e, c_e, re_zs_eff)?;
    if mech.iter().all(Option::is_none) {
        return Ok(params);
    }
    if let Some(i) = mech.iter().position(Option::is_none) {
        return Err(Error::parse(
            1,
            format!("mechanical branch is incomplete: missing '{}'", MECHANICAL_KEYS[i]),
        ));
    }
    let m: Vec<f64> = mech.into_iter().flatten().collect();
    params.with_mechanical(MechanicalBranch {
        r_m: m[0],
        l_m: m[1],
        c_m: m[2],
        z_rad: Complex64::new(m[3], m[4]),
        turns_ratio: m[5],
    })
}

pub fn write_params(params: &PztCircuitParams) -> String {
    let mut out = format!(
        "r_e_ohms = {}\nc_e_farads = {}\nre_zs_eff_ohms = {}\n",
        params.r_e, params.c_e, params.re_zs_eff
    );
    if let Some(m) = &params.mechanical {
        let values = [m.r_m, m.l_m, m.c_m, m.z_rad.re, m.z_rad.im, m.turns_ratio];
        for (k, v) in MECHANICAL_KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").expect("string write");
        }
    }
    out
}

/// One row per envelope entry, 1-based, in envelope order.
pub fn write_envelope(envelope: &ImpedanceEnvelope) -> String {
    let mut out = format!("{ENVELOPE_HEADER}\n");
    for (i, p) in envelope.entries().iter().enumerate() {
        writeln!(out, "{},{},{},{}", i + 1, p.r_e, p.c_e, p.re_zs_eff).expect("string write");
    }
    out
}

/// Reads an envelope; indices must run 1, 2, ... in order.
pub fn read_envelope(text: &str) -> Result<ImpedanceEnvelope> {
    let rows = parse_table(text, ENVELOPE_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.usize(0, "entry_index")? != i + 1 {
            return Err(Error::parse(r.line, format!("expected entry index {}", i + 1)));
        }
        let p = PztCircuitParams::new(r.f64(1, "r_e_ohm")?, r.f64(2, "c_e_farad")?, r.f64(3, "re_zs_eff_ohm")?)
            .map_err(|e| Error::parse(r.line, e.to_string()))?;
        entries.push(p);
    }
    if entries.is_empty() {
        return Err(Error::parse(1, "envelope has no entries"));
    }
    ImpedanceEnvelope::from_entries(entries)
}

pub fn read_network(text: &str) -> Result<CascadedNetwork> {
    let mut kv = KeyValues::parse(text)?;
    let z0 = kv.require("z0_ohms")?;
    let mut tiers = Vec::new();
    for i in 1.. {
        let c = kv.take(&format!("tier_{i}.c_farads"))?;
        let l = kv.take(&format!("tier_{i}.l_henries"))?;
        match (c, l) {
            (Some(c), Some(l)) => tiers.push(LMatchTier::new(c, l)?),
            (None, None) => break,
            _ => return Err(Error::parse(1, format!("tier {i} needs both c_farads and l_henries"))),
        }
    }
    kv.finish()?;
    CascadedNetwork::new(tiers, z0)
}

pub fn write_network(network: &CascadedNetwork) -> String {
    let mut out = String::new();
    for (i, t) in network.tiers().iter().enumerate() {
        writeln!(out, "tier_{}.c_farads = {}", i + 1, t.c_m).expect("string write");
        writeln!(out, "tier_{}.l_henries = {}", i + 1, t.l_m).expect("string write");
    }
    writeln!(out, "z0_ohms = {}", network.z0()).expect("string write");
    out
}

pub fn write_match_report(rows: &[MatchRow]) -> String {
    let mut out = format!("{MATCH_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.entry_index, r.tier_count, r.freq_hz, r.gamma_mag).expect("string write");
    }
    out
}

pub fn read_match_report(text: &str) -> Result<Vec<MatchRow>> {
    parse_table(text, MATCH_HEADER)?
        .iter()
        .map(|r| {
            Ok(MatchRow {
                entry_index: r.usize(0, "entry_index")?,
                tier_count: r.usize(1, "tier_count")?,
                freq_hz: r.f64(2, "freq_hz")?,
                gamma_mag: r.f64(3, "gamma_mag")?,
            })
        })
        .collect()
}

pub fn write_beam_csv(pattern: &BeamPattern) -> String {
    let mut out = format!("{ANGLE_NOTE}\n{BEAM_HEADER}\n");
    for s in &pattern.samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.angle_deg, s.pressure.re, s.pressure.im, s.magnitude, s.normalized
        )
        .expect("string write");
    }
    out
}

/// Reads a beam file; magnitudes are recomputed from the complex columns.
pub fn read_beam_csv(text: &str) -> Result<BeamPattern> {
    let rows = parse_table(text, BEAM_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut last = f64::NEG_INFINITY;
    for r in &rows {
        let a = r.f64(0, "angle_deg")?;
        if a <= last {
            return Err(Error::parse(r.line, "angles must be ascending"));
        }
        last = a;
        points.push((a, Complex64::new(r.f64(1, "re")?, r.f64(2, "im")?)));
    }
    Ok(BeamPattern::from_pressures(points))
}

/// One line of the lobe table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scheme: String,
    /// `main`, `first_side`, `side` or `grating`.
    pub lobe: String,
    pub angle_deg: f64,
    pub mag_norm: f64,
    /// Main-lobe magnitude relative to the best scheme in the comparison.
    pub main_rel: f64,
}

pub fn metrics_rows(comparisons: &[SchemeComparison]) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    for c in comparisons {
        let m = &c.metrics;
        let row = |lobe: &str, angle_deg: f64, mag_norm: f64| MetricsRow {
            scheme: c.scheme.name().to_string(),
            lobe: lobe.to_string(),
            angle_deg,
            mag_norm,
            main_rel: c.main_mag_relative,
        };
        rows.push(row("main", m.main_lobe_angle, 1.0));
        if let Some(l) = m.first_side_lobe {
            rows.push(row("first_side", l.angle_deg, l.normalized));
        }
        for l in &m.side_lobes {
            let kind = if m.grating_lobes.contains(l) { "grating" } else { "side" };
            rows.push(row(kind, l.angle_deg, l.normalized));
        }
    }
    rows
}

pub fn write_metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{ANGLE_NOTE}\n{METRICS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.scheme, r.lobe, r.angle_deg, r.mag_norm, r.main_rel
        )
        .expect("string write");
    }
    out
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    parse_table(text, METRICS_HEADER)?
        .iter()
        .map(|r| {
            if !matches!(r.fields[1], "main" | "first_side" | "side" | "grating") {
                return Err(Error::parse(r.line, format!("unknown lobe kind '{}'", r.fields[1])));
            }
            Ok(MetricsRow {
                scheme: r.fields[0].to_string(),
                lobe: r.fields[1].to_string(),
                angle_deg: r.f64(2, "angle_deg")?,
                mag_norm: r.f64(3, "mag_norm")?,
                main_rel: r.f64(4, "main_rel")?,
            })
        })
        .collect()
}

/// A waveform file as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordedWaveform {
    /// Physical (real-valued) recording.
    Real {
        sample_rate: f64,
        samples: Vec<f64>,
    },
    Analytic(Waveform),
}

pub fn write_waveform(w: &Waveform) -> String {
    let mut out = format!("{ANALYTIC_WAVEFORM_HEADER}\n");
    for (i, s) in w.samples.iter().enumerate() {
        writeln!(out, "{},{},{}", w.time(i), s.re, s.im).expect("string write");
    }
    out
}

pub fn write_real_waveform(sample_rate: f64, samples: &[f64]) -> String {
    let mut out = format!("{REAL_WAVEFORM_HEADER}\n");
    for (i, s) in samples.iter().enumerate() {
        writeln!(out, "{},{s}", i as f64 / sample_rate).expect("string write");
    }
    out
}

/// Reads either waveform layout. The sample rate is inferred from the time
/// column, which must be uniform; time is re-based to start at zero.
pub fn read_waveform(text: &str) -> Result<RecordedWaveform> {
    let analytic = first_header(text).map(|h| h.replace(' ', "")) == Some(ANALYTIC_WAVEFORM_HEADER.to_string());
    let header = if analytic {
        ANALYTIC_WAVEFORM_HEADER
    } else {
        REAL_WAVEFORM_HEADER
    };
    let rows = parse_table(text, header)?;
    if rows.len() < 2 {
        return Err(Error::parse(
            rows.first().map_or(1, |r| r.line),
            "waveform needs at least 2 samples",
        ));
    }
    let times: Vec<f64> = rows.iter().map(|r| r.f64(0, "t_seconds")).collect::<Result<_>>()?;
    let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::parse(rows[1].line, "time column must be increasing"));
    }
    for (i, (t, r)) in times.iter().zip(&rows).enumerate() {
        if (t - times[0] - step * i as f64).abs() > 1e-6 * step {
            return Err(Error::parse(r.line, "time column is not uniformly sampled"));
        }
    }
    let sample_rate = 1.0 / step;
    if analytic {
        let samples = rows
            .iter()
            .map(|r| Ok(Complex64::new(r.f64(1, "re")?, r.f64(2, "im")?)))
            .collect::<Result<_>>()?;
        Ok(RecordedWaveform::Analytic(Waveform::new(sample_rate, samples)?))
    } else {
        let samples = rows.iter().map(|r| r.f64(1, "value")).collect::<Result<_>>()?;
        Ok(RecordedWaveform::Real { sample_rate, samples })
    }
}

/// One line of the extraction report.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRow {
    pub load_token: String,
    pub phase_deg: f64,
    pub amplitude: f64,
    pub theory_phase_deg: f64,
    pub theory_amplitude: f64,
}

pub fn write_extraction_report(rows: &[ExtractionRow]) -> String {
    let mut out = format!("{EXTRACTION_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.load_token, r.phase_deg, r.amplitude, r.theory_phase_deg, r.theory_amplitude
        )
        .expect("string write");
    }
    out
}

pub fn read_extraction_report(text: &str) -> Result<Vec<ExtractionRow>> {
    parse_table(text, EXTRACTION_HEADER)?
        .iter()
        .map(|r| {
            Ok(ExtractionRow {
                load_token: r.fields[0].to_string(),
                phase_deg: r.f64(1, "phase_deg")?,
                amplitude: r.f64(2, "amplitude")?,
                theory_phase_deg: r.f64(3, "theory_phase_deg")?,
                theory_amplitude: r.f64(4, "theory_amplitude")?,
            })
        })
        .collect()
}

/// Layer impedance versus incident angle; unreported cells are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleImpedance {
    pub angle_deg: f64,
    pub layer: usize,
    pub re_ohm: Option<f64>,
    pub im_ohm: Option<f64>,
}

pub fn read_angle_table(text: &str) -> Result<Vec<AngleImpedance>> {
    parse_table(text, ANGLE_TABLE_HEADER)?
        .iter()
        .map(|r| {
            Ok(AngleImpedance {
                angle_deg: r.f64(0, "angle_deg")?,
                layer: r.usize(1, "layer")?,
                re_ohm: r.opt_f64(2, "re_ohm")?,
                im_ohm: r.opt_f64(3, "im_ohm")?,
            })
        })
        .collect()
}
