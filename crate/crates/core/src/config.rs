//! Experiment configuration.
//!
//! A config is a TOML document in which every physical value is a string
//! with a unit (`thickness = "10 nm"`). Unknown keys are rejected and a
//! missing key takes its default, so an empty file is a complete config.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::{InhibitScheme, Variability, DISTURB_THRESHOLD};
use crate::cell::{
    matched_polarization, CellParams, DeviceModel, DEFAULT_MEMORY_WINDOW, DEFAULT_VTH0_FRONT,
};
use crate::electrostatics::{ChannelChargeModel, GateStack, Layer, LayerRole};
use crate::kinetics::{SwitchingKinetics, DEFAULT_GRAINS};
use crate::units::{
    CapacitanceDensity, ChargeDensity, ElectricField, Frequency, Length, Time, Transconductance, Voltage,
};
use crate::waveform::BiasWaveform;
use crate::{Error, Result};

/// Largest config file accepted, bytes.
pub const MAX_CONFIG_LEN: usize = 1 << 20;

/// One problem found in a config. `path` is the dotted key, e.g.
/// `stacks.single_port.layers[1].thickness`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::invalid(format!("unknown format {s:?}, expected csv or json"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub grains: usize,
    pub memory_window: Voltage,
    pub vth0_front: Voltage,
    /// Omit to derive from the stack so that the compact and electrostatic
    /// windows agree.
    pub saturation_polarization: Option<ChargeDensity>,
    pub width: Length,
    pub length: Length,
    pub transconductance: Transconductance,
    /// Per decade.
    pub subthreshold_swing: Voltage,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let p = CellParams::for_stack(&GateStack::fdsoi(), 1.0, DEFAULT_VTH0_FRONT, DEFAULT_MEMORY_WINDOW);
        DeviceConfig {
            grains: DEFAULT_GRAINS,
            memory_window: Voltage::si(DEFAULT_MEMORY_WINDOW),
            vth0_front: Voltage::si(DEFAULT_VTH0_FRONT),
            saturation_polarization: None,
            width: Length::si(p.width),
            length: Length::si(p.length),
            transconductance: Transconductance::si(p.transconductance),
            subthreshold_swing: Voltage::si(p.subthreshold_swing),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub thermal_voltage: Voltage,
    pub turn_on_potential: Voltage,
    pub sheet_capacitance: CapacitanceDensity,
    pub fixed_sheet_charge: ChargeDensity,
    /// Mirrored hole branch below `hole_onset`.
    pub holes: bool,
    pub hole_onset: Voltage,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig::from_model(&ChannelChargeModel::default())
    }
}

impl ChannelConfig {
    pub fn from_model(m: &ChannelChargeModel) -> Self {
        ChannelConfig {
            thermal_voltage: Voltage::si(m.thermal_voltage),
            turn_on_potential: Voltage::si(m.turn_on_potential),
            sheet_capacitance: CapacitanceDensity::si(m.sheet_capacitance),
            fixed_sheet_charge: ChargeDensity::si(m.fixed_sheet_charge),
            holes: m.hole_onset.is_some(),
            hole_onset: Voltage::si(m.hole_onset.unwrap_or(-m.turn_on_potential)),
        }
    }

    pub fn model(&self) -> ChannelChargeModel {
        ChannelChargeModel {
            thermal_voltage: self.thermal_voltage.value(),
            turn_on_potential: self.turn_on_potential.value(),
            sheet_capacitance: self.sheet_capacitance.value(),
            fixed_sheet_charge: self.fixed_sheet_charge.value(),
            hole_onset: self.holes.then_some(self.hole_onset.value()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsConfig {
    pub tau0: Time,
    pub field_exponent: f64,
    pub stretch_exponent: f64,
    pub activation_median: ElectricField,
    pub activation_sigma: f64,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        KineticsConfig::from_kinetics(&SwitchingKinetics::default())
    }
}

impl KineticsConfig {
    pub fn from_kinetics(k: &SwitchingKinetics) -> Self {
        KineticsConfig {
            tau0: Time::si(k.tau0),
            field_exponent: k.field_exponent,
            stretch_exponent: k.stretch_exponent,
            activation_median: ElectricField::si(k.activation_median),
            activation_sigma: k.activation_sigma,
        }
    }

    pub fn kinetics(&self) -> SwitchingKinetics {
        SwitchingKinetics {
            tau0: self.tau0.value(),
            field_exponent: self.field_exponent,
            stretch_exponent: self.stretch_exponent,
            activation_median: self.activation_median.value(),
            activation_sigma: self.activation_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub role: LayerRole,
    /// Required for every role except metal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<Length>,
    /// Relative permittivity, required for every role except metal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permittivity: Option<f64>,
}

/// Layers from the write-gate metal to the pass-gate metal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackConfig {
    pub flatband_front: Voltage,
    pub flatband_back: Voltage,
    pub layers: Vec<LayerConfig>,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig::from_stack(&GateStack::fdsoi())
    }
}

impl StackConfig {
    pub fn from_stack(stack: &GateStack) -> Self {
        let layers = stack
            .layers()
            .iter()
            .map(|l| match l.role {
                LayerRole::Metal => LayerConfig {
                    role: l.role,
                    thickness: None,
                    permittivity: None,
                },
                _ => LayerConfig {
                    role: l.role,
                    thickness: Some(Length::si(l.thickness)),
                    permittivity: Some(l.permittivity),
                },
            })
            .collect();
        StackConfig {
            flatband_front: Voltage::si(stack.flatband_front()),
            flatband_back: Voltage::si(stack.flatband_back()),
            layers,
        }
    }

    /// Per-layer problems first, then the ordering rules of [`GateStack`].
    pub fn check(&self, path: &str) -> std::result::Result<GateStack, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let at = format!("{path}.layers[{i}]");
            if l.role == LayerRole::Metal {
                if l.thickness.is_some() || l.permittivity.is_some() {
                    diags.push(Diagnostic::new(&at, "metal layers take no thickness or permittivity"));
                }
                layers.push(Layer::metal());
                continue;
            }
            let t = match l.thickness {
                Some(t) if t.value() > 0.0 => t.value(),
                Some(t) => {
                    diags.push(Diagnostic::new(
                        format!("{at}.thickness"),
                        format!("thickness must be positive, got {t}"),
                    ));
                    f64::NAN
                }
                None => {
                    diags.push(Diagnostic::new(format!("{at}.thickness"), "missing"));
                    f64::NAN
                }
            };
            let eps = match l.permittivity {
                Some(e) if e >= 1.0 && e.is_finite() => e,
                Some(e) => {
                    diags.push(Diagnostic::new(
                        format!("{at}.permittivity"),
                        format!("relative permittivity must be >= 1, got {e}"),
                    ));
                    f64::NAN
                }
                None => {
                    diags.push(Diagnostic::new(format!("{at}.permittivity"), "missing"));
                    f64::NAN
                }
            };
            layers.push(Layer {
                role: l.role,
                thickness: t,
                permittivity: eps,
            });
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        GateStack::new(layers, self.flatband_front.value(), self.flatband_back.value())
            .map_err(|e| vec![Diagnostic::new(format!("{path}.layers"), e.to_string())])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StacksConfig {
    /// Planar cell; its back gate is the p-well.
    pub single_port: StackConfig,
    /// Vertical cell with a core pass gate.
    pub dual_port: StackConfig,
}

impl Default for StacksConfig {
    fn default() -> Self {
        StacksConfig {
            single_port: StackConfig::from_stack(&GateStack::fdsoi()),
            dual_port: StackConfig::from_stack(&GateStack::vertical_dual_port()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub v_cc: Voltage,
    pub v_pgm: Voltage,
    pub pulse_duration: Time,
    pub coupling_ratio: f64,
    pub vth_ssl: Voltage,
    pub n_wls: usize,
    pub n_strings: usize,
    pub disturb_threshold: Voltage,
    pub sweep_start: Voltage,
    pub sweep_stop: Voltage,
    pub sweep_points: usize,
    /// Cells per threshold distribution.
    pub distribution_cells: usize,
    /// Pass level of the distribution runs.
    pub distribution_v_pass: Voltage,
    pub sigma_vth0: Voltage,
    pub sigma_activation: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        let s = InhibitScheme::default();
        ArrayConfig {
            v_cc: Voltage::si(s.v_cc),
            v_pgm: Voltage::si(s.v_pgm),
            pulse_duration: Time::si(s.pulse_duration),
            coupling_ratio: s.coupling_ratio,
            vth_ssl: Voltage::si(s.vth_ssl),
            n_wls: s.n_wls,
            n_strings: 4,
            disturb_threshold: Voltage::si(DISTURB_THRESHOLD),
            sweep_start: Voltage::si(1.0),
            sweep_stop: Voltage::si(3.0),
            sweep_points: 21,
            distribution_cells: 200,
            distribution_v_pass: Voltage::si(2.0),
            sigma_vth0: Voltage::si(0.03),
            sigma_activation: 0.05,
        }
    }
}

impl ArrayConfig {
    pub fn scheme(&self) -> InhibitScheme {
        InhibitScheme {
            v_cc: self.v_cc.value(),
            v_pgm: self.v_pgm.value(),
            pulse_duration: self.pulse_duration.value(),
            coupling_ratio: self.coupling_ratio,
            vth_ssl: self.vth_ssl.value(),
            n_wls: self.n_wls,
        }
    }

    pub fn variability(&self) -> Variability {
        Variability {
            sigma_vth0: self.sigma_vth0.value(),
            sigma_ea_median: self.sigma_activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// E_FE versus pass-voltage curves.
    pub field_v_start: Voltage,
    pub field_v_stop: Voltage,
    pub field_points: usize,
    /// Write-gate pass levels of the disturb grids.
    pub wg_v_pass: Vec<Voltage>,
    /// Pass-gate levels of the disturb grids.
    pub pg_v_pass: Vec<Voltage>,
    pub dwell: Vec<Time>,
    /// Pass levels whose flip times are reported.
    pub flip_v_pass: Vec<Voltage>,
    pub flip_t_max: Time,
    /// String read sweeps.
    pub read_v_start: Voltage,
    pub read_v_stop: Voltage,
    pub read_points: usize,
    pub read_v_pass: Voltage,
    /// Pass-gate levels for the pass-gate read: one too low to open an
    /// erased neighbour, one sufficient.
    pub read_pg_low: Voltage,
    pub read_pg_high: Voltage,
    /// Pass levels of the string field maps.
    pub field_map_v_pass: Vec<Voltage>,
    /// Eight-word-line operation sequence in the waveform text format;
    /// omit for the built-in erase / read / program / read sequence.
    pub waveform: Option<String>,
    pub trace_sample_rate: Frequency,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let v = |xs: &[f64]| xs.iter().map(|&x| Voltage::si(x)).collect::<Vec<_>>();
        SweepConfig {
            field_v_start: Voltage::si(0.0),
            field_v_stop: Voltage::si(4.0),
            field_points: 41,
            wg_v_pass: v(&[0.9, 1.5, 1.9, 2.1, 2.3, 2.5]),
            pg_v_pass: v(&[2.0, 5.0, 10.0, 15.0]),
            dwell: [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]
                .iter()
                .map(|&t| Time::si(t))
                .collect(),
            flip_v_pass: v(&[1.9, 2.1, 2.3, 2.5]),
            flip_t_max: Time::si(1e3),
            read_v_start: Voltage::si(-3.0),
            read_v_stop: Voltage::si(2.0),
            read_points: 101,
            read_v_pass: Voltage::si(2.0),
            read_pg_low: Voltage::si(3.0),
            read_pg_high: Voltage::si(8.0),
            field_map_v_pass: v(&[1.0, 2.0]),
            waveform: None,
            trace_sample_rate: Frequency::si(2e7),
        }
    }
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Seeds must fit in 63 bits (TOML integers are signed).
    pub seed: u64,
    pub output: OutputConfig,
    pub device: DeviceConfig,
    pub channel: ChannelConfig,
    pub kinetics: KineticsConfig,
    pub stacks: StacksConfig,
    pub array: ArrayConfig,
    pub sweeps: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: 1,
            output: OutputConfig::default(),
            device: DeviceConfig::default(),
            channel: ChannelConfig::default(),
            kinetics: KineticsConfig::default(),
            stacks: StacksConfig::default(),
            array: ArrayConfig::default(),
            sweeps: SweepConfig::default(),
        }
    }
}

/// Which stack a device is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StackKind {
    SinglePort,
    DualPort,
}

impl ExperimentConfig {
    /// Parses and type-checks; the error names the offending key.
    pub fn from_toml(text: &str) -> std::result::Result<Self, Diagnostic> {
        if text.len() > MAX_CONFIG_LEN {
            return Err(Diagnostic::new("", format!("config larger than {MAX_CONFIG_LEN} bytes")));
        }
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Diagnostic::new("", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            Diagnostic::new(path, e.inner().message().to_string())
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::invalid(format!("serializing config: {e}")))
    }

    /// SHA-256 of the canonical serialization, output section excluded, so
    /// the same physics hashes the same wherever it is written.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output = OutputConfig::default();
        let digest = Sha256::digest(canon.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn stack(&self, kind: StackKind) -> Result<GateStack> {
        let (cfg, path) = match kind {
            StackKind::SinglePort => (&self.stacks.single_port, "stacks.single_port"),
            StackKind::DualPort => (&self.stacks.dual_port, "stacks.dual_port"),
        };
        cfg.check(path).map_err(|d| {
            Error::InvalidStack(d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        })
    }

    pub fn device(&self, kind: StackKind) -> Result<DeviceModel> {
        let stack = self.stack(kind)?;
        let d = &self.device;
        let mw = d.memory_window.value();
        let ps = d
            .saturation_polarization
            .map_or_else(|| matched_polarization(&stack, mw), ChargeDensity::value);
        let mut params = CellParams::for_stack(&stack, ps, d.vth0_front.value(), mw);
        params.width = d.width.value();
        params.length = d.length.value();
        params.transconductance = d.transconductance.value();
        params.subthreshold_swing = d.subthreshold_swing.value();
        let model = DeviceModel {
            stack,
            channel: self.channel.model(),
            kinetics: self.kinetics.kinetics(),
            params,
            grains: d.grains,
            saturation_polarization: ps,
        };
        model.validate()?;
        Ok(model)
    }

    /// The eight-word-line sequence, parsed.
    pub fn waveform(&self) -> Result<Option<BiasWaveform>> {
        self.sweeps.waveform.as_deref().map(str::parse).transpose()
    }

    /// Physics and range checks without running anything. Empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |path: &str, msg: String| out.push(Diagnostic::new(path, msg));

        if let Some(id) = &self.experiment {
            if crate::experiments::ExperimentId::parse(id).is_none() {
                push(
                    "experiment",
                    format!(
                        "unknown experiment {id:?}; valid ids: {}",
                        crate::experiments::ExperimentId::ALL
                            .iter()
                            .map(|e| e.as_str())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                );
            }
        }
        if self.seed > i64::MAX as u64 {
            push("seed", format!("seed must be below 2^63, got {}", self.seed));
        }

        for (cfg, path) in [
            (&self.stacks.single_port, "stacks.single_port"),
            (&self.stacks.dual_port, "stacks.dual_port"),
        ] {
            if let Err(d) = cfg.check(path) {
                out.extend(d);
            }
        }
        let mut push = |path: &str, msg: String| out.push(Diagnostic::new(path, msg));

        let d = &self.device;
        if d.grains == 0 {
            push("device.grains", "need at least one grain".into());
        }
        if !(d.memory_window.value() > 0.0 && d.memory_window.value().is_finite()) {
            push("device.memory_window", format!("must be positive, got {}", d.memory_window));
        }
        if !d.vth0_front.value().is_finite() {
            push("device.vth0_front", "must be finite".into());
        }
        if let Some(p) = d.saturation_polarization {
            if !(p.value() > 0.0 && p.value().is_finite()) {
                push("device.saturation_polarization", format!("must be positive, got {p}"));
            }
        }
        for (v, key) in [(d.width.value(), "device.width"), (d.length.value(), "device.length")] {
            if !(v > 0.0 && v.is_finite()) {
                push(key, format!("must be positive, got {v:e} m"));
            }
        }
        if !(d.transconductance.value() > 0.0 && d.transconductance.value().is_finite()) {
            push("device.transconductance", format!("must be positive, got {}", d.transconductance));
        }
        let vt = self.channel.thermal_voltage.value();
        if !(d.subthreshold_swing.value() >= vt * std::f64::consts::LN_10) {
            push(
                "device.subthreshold_swing",
                format!("below the thermal limit {:.4} V/dec", vt * std::f64::consts::LN_10),
            );
        }
        let c = &self.channel;
        if !(c.thermal_voltage.value() > 0.0 && c.thermal_voltage.value().is_finite()) {
            push("channel.thermal_voltage", format!("must be positive, got {}", c.thermal_voltage));
        }
        if !(c.sheet_capacitance.value() > 0.0 && c.sheet_capacitance.value().is_finite()) {
            push("channel.sheet_capacitance", format!("must be positive, got {}", c.sheet_capacitance));
        }
        if !c.turn_on_potential.value().is_finite() {
            push("channel.turn_on_potential", "must be finite".into());
        }
        if !c.fixed_sheet_charge.value().is_finite() {
            push("channel.fixed_sheet_charge", "must be finite".into());
        }
        if c.holes && !(c.hole_onset.value() < c.turn_on_potential.value()) {
            push("channel.hole_onset", "must lie below turn_on_potential".into());
        }
        let k = &self.kinetics;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(k.tau0.value()) {
            push("kinetics.tau0", format!("must be positive, got {}", k.tau0));
        }
        if !(k.field_exponent >= 1.0 && k.field_exponent.is_finite()) {
            push("kinetics.field_exponent", format!("must be at least 1, got {}", k.field_exponent));
        }
        if !positive(k.stretch_exponent) {
            push("kinetics.stretch_exponent", format!("must be positive, got {}", k.stretch_exponent));
        }
        if !positive(k.activation_median.value()) {
            push("kinetics.activation_median", format!("must be positive, got {}", k.activation_median));
        }
        if !(k.activation_sigma >= 0.0 && k.activation_sigma.is_finite()) {
            push("kinetics.activation_sigma", format!("must be non-negative, got {}", k.activation_sigma));
        }
        // anything left is a cross-field inconsistency; only worth reporting
        // when the fields themselves are fine
        if out.is_empty() {
            for kind in [StackKind::SinglePort, StackKind::DualPort] {
                if let Err(e) = self.device(kind) {
                    out.push(Diagnostic::new("device", e.to_string()));
                }
            }
        }
        let mut push = |path: &str, msg: String| out.push(Diagnostic::new(path, msg));

        let a = &self.array;
        if let Err(e) = a.scheme().validate() {
            push("array", e.to_string());
        }
        if a.n_strings < 2 {
            push("array.n_strings", "need a programmed and an inhibited string".into());
        }
        if !(a.disturb_threshold.value() > 0.0) {
            push("array.disturb_threshold", "must be positive".into());
        }
        if !(a.sweep_start.value().is_finite()
            && a.sweep_stop.value().is_finite()
            && a.sweep_start.value() < a.sweep_stop.value())
        {
            push("array.sweep_stop", "sweep_start must be below sweep_stop".into());
        }
        if a.sweep_points < 2 {
            push("array.sweep_points", "need at least 2 points".into());
        }
        if a.distribution_cells == 0 {
            push("array.distribution_cells", "need at least one cell".into());
        }
        if !(a.sigma_vth0.value() >= 0.0 && a.sigma_activation >= 0.0) {
            push("array.sigma_vth0", "variability sigmas must be non-negative".into());
        }

        let s = &self.sweeps;
        if !(s.field_v_start.value().is_finite()
            && s.field_v_stop.value().is_finite()
            && s.field_v_start.value() < s.field_v_stop.value())
        {
            push("sweeps.field_v_stop", "field_v_start must be below field_v_stop".into());
        }
        if s.field_points < 2 {
            push("sweeps.field_points", "need at least 2 points".into());
        }
        if s.read_points < 2 {
            push("sweeps.read_points", "need at least 2 points".into());
        }
        if !(s.read_v_start.value() < s.read_v_stop.value()) {
            push("sweeps.read_v_stop", "read_v_start must be below read_v_stop".into());
        }
        for (key, list) in [
            ("sweeps.wg_v_pass", &s.wg_v_pass),
            ("sweeps.pg_v_pass", &s.pg_v_pass),
            ("sweeps.flip_v_pass", &s.flip_v_pass),
            ("sweeps.field_map_v_pass", &s.field_map_v_pass),
        ] {
            if list.is_empty() {
                push(key, "must not be empty".into());
            }
            for (i, v) in list.iter().enumerate() {
                if !v.value().is_finite() || v.value().abs() > 100.0 {
                    push(&format!("{key}[{i}]"), format!("out of range: {v}"));
                }
            }
        }
        if s.dwell.is_empty() {
            push("sweeps.dwell", "must not be empty".into());
        }
        for (i, t) in s.dwell.iter().enumerate() {
            if !(t.value() > 0.0 && t.value().is_finite()) {
                push(&format!("sweeps.dwell[{i}]"), format!("must be positive, got {t}"));
            }
        }
        if !(s.flip_t_max.value() > 0.0 && s.flip_t_max.value().is_finite()) {
            push("sweeps.flip_t_max", "must be positive".into());
        }
        if !(s.trace_sample_rate.value() > 0.0 && s.trace_sample_rate.value().is_finite()) {
            push("sweeps.trace_sample_rate", "must be positive".into());
        }
        if let Err(e) = self.waveform() {
            push("sweeps.waveform", e.to_string());
        }
        out
    }
}
