//! Scenario files: versioned JSON describing the input state, source model
//! and detector model. Unknown keys are errors, not warnings: a silent typo
//! in a config would corrupt physics results.

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex;
use serde::Deserialize;

use heraldix_core::demux::DemuxConfig;
use heraldix_core::devices::{DetectorKind, DetectorModel, SourceModel};

pub const SCENARIO_VERSION: u32 = 1;

type C = Complex<f64>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub demux: DemuxSpec,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            version: SCENARIO_VERSION,
            input: InputSpec::default(),
            source: SourceSpec::default(),
            detector: DetectorSpec::default(),
            demux: DemuxSpec::default(),
        }
    }
}

/// Demultiplexer block; defaults to the four-channel experiment layout.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemuxSpec {
    #[serde(default = "default_laser_rep")]
    pub laser_rep_hz: f64,
    #[serde(default = "default_cycle_len")]
    pub cycle_len: u32,
    #[serde(default = "default_channels")]
    pub channels: u32,
    #[serde(default = "default_eta_f")]
    pub eta_f: f64,
    #[serde(default = "default_eta_w")]
    pub eta_w: f64,
    #[serde(default = "default_eta_l")]
    pub eta_l: f64,
}

impl Default for DemuxSpec {
    fn default() -> Self {
        DemuxSpec {
            laser_rep_hz: default_laser_rep(),
            cycle_len: default_cycle_len(),
            channels: default_channels(),
            eta_f: default_eta_f(),
            eta_w: default_eta_w(),
            eta_l: default_eta_l(),
        }
    }
}

fn default_laser_rep() -> f64 {
    76e6
}
fn default_cycle_len() -> u32 {
    100
}
fn default_channels() -> u32 {
    4
}
fn default_eta_f() -> f64 {
    0.263
}
fn default_eta_w() -> f64 {
    0.83
}
fn default_eta_l() -> f64 {
    0.80
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// Named preset like `plusH` or `VV` (control then target).
    #[serde(default)]
    pub preset: Option<String>,
    /// Explicit complex amplitudes as `[re, im]` pairs.
    #[serde(default)]
    pub alpha: Option<[f64; 2]>,
    #[serde(default)]
    pub beta: Option<[f64; 2]>,
    #[serde(default)]
    pub gamma: Option<[f64; 2]>,
    #[serde(default)]
    pub delta: Option<[f64; 2]>,
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec {
            preset: Some("plusH".to_string()),
            alpha: None,
            beta: None,
            gamma: None,
            delta: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "one")]
    pub eta_s: f64,
    #[serde(default = "one")]
    pub overlap_x: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            eta_s: 1.0,
            overlap_x: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "one")]
    pub eta_d: f64,
    #[serde(default)]
    pub k: Option<u32>,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            kind: default_kind(),
            eta_d: 1.0,
            k: None,
        }
    }
}

fn default_kind() -> String {
    "ideal_pnrd".to_string()
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub control: (C, C),
    pub target: (C, C),
    pub input_label: String,
    pub source: SourceModel<f64>,
    pub detector: DetectorModel<f64>,
    pub demux: DemuxConfig<f64>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        serde_json::from_str(text).context("scenario file does not match the schema")?;
    if file.version != SCENARIO_VERSION {
        bail!(
            "unsupported scenario version {} (expected {SCENARIO_VERSION})",
            file.version
        );
    }
    scenario_from_file(&file)
}

pub fn scenario_from_file(file: &ScenarioFile) -> Result<Scenario> {
    let (control, target, input_label) = resolve_input(&file.input)?;
    let source = SourceModel::new(file.source.eta_s, file.source.overlap_x)
        .map_err(|e| anyhow!("source: {e}"))?;
    let detector = resolve_detector(&file.detector)?;
    let demux = DemuxConfig::new(
        file.demux.laser_rep_hz,
        file.demux.cycle_len,
        file.demux.channels,
        file.demux.eta_f,
        file.demux.eta_w,
        file.demux.eta_l,
    )
    .map_err(|e| anyhow!("demux: {e}"))?;
    Ok(Scenario {
        control,
        target,
        input_label,
        source,
        detector,
        demux,
    })
}

pub fn resolve_detector(spec: &DetectorSpec) -> Result<DetectorModel<f64>> {
    let kind = match spec.kind.as_str() {
        "ideal_pnrd" | "ideal" => DetectorKind::IdealPnrd,
        "standard" => DetectorKind::Standard { physical: false },
        "standard_physical" => DetectorKind::Standard { physical: true },
        "pseudo_pnrd" | "pseudo" => DetectorKind::PseudoPnrd {
            elements: spec.k.unwrap_or(4),
        },
        other => bail!("unknown detector kind {other:?}"),
    };
    if !matches!(kind, DetectorKind::PseudoPnrd { .. }) && spec.k.is_some() {
        bail!("detector field `k` only applies to pseudo_pnrd");
    }
    let det = DetectorModel::new(kind, spec.eta_d);
    det.validate().map_err(|e| anyhow!("detector: {e}"))?;
    Ok(det)
}

type QubitPair = (C, C);

fn resolve_input(input: &InputSpec) -> Result<(QubitPair, QubitPair, String)> {
    let explicit = [input.alpha, input.beta, input.gamma, input.delta];
    let any_explicit = explicit.iter().any(Option::is_some);
    match (&input.preset, any_explicit) {
        (Some(_), true) => bail!("input: give either a preset or explicit amplitudes, not both"),
        (None, false) => bail!("input: missing preset or amplitudes"),
        (Some(name), false) => {
            let (c, t) = preset_qubits(name)?;
            Ok((c, t, name.clone()))
        }
        (None, true) => {
            let all = explicit
                .iter()
                .map(|o| o.ok_or_else(|| anyhow!("input: all four amplitudes are required")))
                .collect::<Result<Vec<_>>>()?;
            let control = (C::new(all[0][0], all[0][1]), C::new(all[1][0], all[1][1]));
            let target = (C::new(all[2][0], all[2][1]), C::new(all[3][0], all[3][1]));
            for (label, (x, y)) in [("control", control), ("target", target)] {
                let norm = x.norm_sqr() + y.norm_sqr();
                if (norm - 1.0).abs() > 1e-9 {
                    bail!("input: {label} amplitudes are not normalized (norm^2 = {norm})");
                }
            }
            Ok((control, target, "custom".to_string()))
        }
    }
}

fn preset_qubits(name: &str) -> Result<((C, C), (C, C))> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let qubit = |c: char| -> Result<(C, C)> {
        Ok(match c {
            'H' => (C::new(1.0, 0.0), C::new(0.0, 0.0)),
            'V' => (C::new(0.0, 0.0), C::new(1.0, 0.0)),
            '+' => (C::new(s, 0.0), C::new(s, 0.0)),
            '-' => (C::new(s, 0.0), C::new(-s, 0.0)),
            other => bail!("unknown qubit symbol {other:?} in preset"),
        })
    };
    // Names use words for the superposition states: plusH, minusV, ...
    let normalized = name
        .replace("plus", "+")
        .replace("minus", "-");
    let chars: Vec<char> = normalized.chars().collect();
    if chars.len() != 2 {
        bail!("unknown input preset {name:?}");
    }
    Ok((qubit(chars[0])?, qubit(chars[1])?))
}

pub fn load_scenario(path: Option<&std::path::Path>) -> Result<Scenario> {
    match path {
        None => scenario_from_file(&ScenarioFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read scenario file {}", p.display()))?;
            parse_scenario(&text)
        }
    }
}
