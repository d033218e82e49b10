//! Experiment configuration.
//!
//! One JSON document couples the algorithm (quantization), architecture
//! (digit mapping, chip hierarchy), circuit (ADC) and device choices. Every
//! cost coefficient has a pinned default, so a minimal file only has to name
//! the quantization, mapping, device, ADC precision and seed.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::hwperf::CostParams;

/// Standard deviation above which [`validate`] warns about device variation.
pub const SIGMA_WARN_THRESHOLD: f64 = 0.25;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("range error at `{path}`: {message}")]
    Range { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantScheme {
    UniformSymmetric,
    DynamicFixedPoint,
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuantScheme::UniformSymmetric => "uniform-symmetric",
            QuantScheme::DynamicFixedPoint => "dynamic-fixed-point",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantConfig {
    pub scheme: QuantScheme,
    /// Weight precision N.
    pub weight_bits: u32,
    /// Input (activation) precision M.
    pub input_bits: u32,
}

/// Weight digit-mapping circuit architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Two's-complement-like: separate sign plane plus magnitude digits.
    #[serde(alias = "Design1")]
    Design1,
    /// Positive / negative split onto paired subarrays.
    #[serde(alias = "Design2")]
    Design2,
    /// Weights shifted by 2^(N-1), corrected with a dummy column.
    #[serde(alias = "Design3")]
    Design3,
}

impl Design {
    pub const ALL: [Design; 3] = [Design::Design1, Design::Design2, Design::Design3];
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::Design1 => "design1",
            Design::Design2 => "design2",
            Design::Design3 => "design3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSignMode {
    UnsignedBitserial,
    #[default]
    TwosComplementBitserial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetCancellation {
    #[default]
    DummyColumn,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub design: Design,
    /// Bits stored per cell, k.
    pub cell_bits: u32,
    #[serde(default)]
    pub input_sign_mode: InputSignMode,
    #[serde(default)]
    pub offset_cancellation: OffsetCancellation,
}

/// G_max / G_min of a cell. Serialized as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnOffRatio(pub f64);

impl OnOffRatio {
    pub const INFINITE: OnOffRatio = OnOffRatio(f64::INFINITY);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Normalized G_min / ΔG for k-bit cells; exactly zero for an infinite ratio.
    pub fn normalized_offset(self, cell_bits: u32) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            ((1u64 << cell_bits) - 1) as f64 / (self.0 - 1.0)
        }
    }
}

impl Serialize for OnOffRatio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for OnOffRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(OnOffRatio(v)),
            Raw::Text(s) if s == "inf" => Ok(OnOffRatio::INFINITE),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", found \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceKind {
    #[serde(rename = "eNVM", alias = "envm")]
    Envm,
    #[serde(rename = "SRAM", alias = "sram")]
    Sram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub name: String,
    /// On-state resistance in ohms.
    pub r_on: f64,
    pub on_off_ratio: OnOffRatio,
    pub cell_bits_max: u32,
    /// Programming noise on the normalized digit.
    #[serde(default)]
    pub sigma_cell: f64,
    /// Joules per cell write.
    #[serde(default)]
    pub write_energy: f64,
    /// Seconds per row write.
    #[serde(default)]
    pub write_latency: f64,
    pub kind: DeviceKind,
}

impl DeviceModel {
    fn envm(name: &str, r_on: f64, ratio: f64) -> Self {
        DeviceModel {
            name: name.to_string(),
            r_on,
            on_off_ratio: OnOffRatio(ratio),
            cell_bits_max: 4,
            sigma_cell: 0.0,
            write_energy: 0.0,
            write_latency: 0.0,
            kind: DeviceKind::Envm,
        }
    }

    /// RRAM, 6 kΩ on-state, on/off 150.
    pub fn rram_150() -> Self {
        Self::envm("rram-150", 6e3, 150.0)
    }

    /// RRAM, 6 kΩ on-state, on/off 17.
    pub fn rram_17() -> Self {
        Self::envm("rram-17", 6e3, 17.0)
    }

    /// RRAM, 100 kΩ on-state, on/off 10.
    pub fn rram_10() -> Self {
        Self::envm("rram-10", 100e3, 10.0)
    }

    /// FeFET, 240 kΩ on-state, on/off 100.
    pub fn fefet_100() -> Self {
        Self::envm("fefet-100", 240e3, 100.0)
    }

    /// PCM, 40 kΩ on-state, on/off 12.5.
    pub fn pcm_12_5() -> Self {
        Self::envm("pcm-12.5", 40e3, 12.5)
    }

    /// Ideal eNVM: infinite on/off ratio, no variation.
    pub fn ideal() -> Self {
        DeviceModel {
            on_off_ratio: OnOffRatio::INFINITE,
            ..Self::envm("ideal", 6e3, 2.0)
        }
    }

    /// 1-bit SRAM cell used for dynamic (runtime-written) operands.
    pub fn sram() -> Self {
        DeviceModel {
            name: "sram".to_string(),
            r_on: 10e3,
            on_off_ratio: OnOffRatio::INFINITE,
            cell_bits_max: 1,
            sigma_cell: 0.0,
            write_energy: 2e-15,
            write_latency: 1e-9,
            kind: DeviceKind::Sram,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "rram-150" => Self::rram_150(),
            "rram-17" => Self::rram_17(),
            "rram-10" => Self::rram_10(),
            "fefet-100" => Self::fefet_100(),
            "pcm-12.5" => Self::pcm_12_5(),
            "ideal" => Self::ideal(),
            "sram" => Self::sram(),
            _ => return None,
        })
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["rram-150", "rram-17", "rram-10", "fefet-100", "pcm-12.5", "ideal", "sram"]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdcKind {
    /// Fixed step size over a full-scale range.
    Linear,
    /// Quantile references fitted to the observed column sums of each layer.
    #[default]
    Calibrated,
    /// User-supplied refs/centers JSON file.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcConfig {
    pub precision: u32,
    #[serde(default)]
    pub kind: AdcKind,
    /// `[lo, hi]` for linear ADCs; omitted means the documented default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_spec: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub subarray_rows: usize,
    pub subarray_cols: usize,
    pub subarrays_per_pe: usize,
    pub pes_per_tile: usize,
    /// Columns multiplexed onto one ADC.
    pub adc_share: usize,
    /// Subarray geometry of the SRAM tiles holding dynamic operands.
    pub dmm_subarray_rows: usize,
    pub dmm_subarray_cols: usize,
    pub dmm_device: DeviceModel,
    /// Hide the V write behind the preceding attention compute.
    pub v_write_overlap: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            subarray_rows: 128,
            subarray_cols: 128,
            subarrays_per_pe: 4,
            pes_per_tile: 4,
            adc_share: 8,
            dmm_subarray_rows: 64,
            dmm_subarray_cols: 64,
            dmm_device: DeviceModel::sram(),
            v_write_overlap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Trace,
    #[default]
    Average,
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub quant: QuantConfig,
    pub mapping: MappingConfig,
    /// Device of the static-weight (eNVM) tiles.
    pub device: DeviceModel,
    pub adc: AdcConfig,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub cost: CostParams,
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
}

impl SimulationConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    /// A small default experiment: 4-bit uniform quantization on RRAM with a
    /// calibrated 6-bit ADC.
    pub fn example() -> Self {
        SimulationConfig {
            quant: QuantConfig {
                scheme: QuantScheme::UniformSymmetric,
                weight_bits: 4,
                input_bits: 4,
            },
            mapping: MappingConfig {
                design: Design::Design2,
                cell_bits: 2,
                input_sign_mode: InputSignMode::default(),
                offset_cancellation: OffsetCancellation::default(),
            },
            device: DeviceModel::rram_150(),
            adc: AdcConfig {
                precision: 6,
                kind: AdcKind::Calibrated,
                full_scale: None,
                custom_spec: None,
            },
            arch: ArchConfig::default(),
            cost: CostParams::default(),
            seed: 1,
            mode: Mode::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(Issue {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: &str, message: impl Into<String>) {
        self.warnings.push(Issue {
            path: path.to_string(),
            message: message.into(),
        });
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimulationConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_config_str(&text)
}

/// Parses and validates a config document. The first validation error, if
/// any, is returned as a [`ConfigError::Range`].
pub fn load_config_str(text: &str) -> Result<SimulationConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: SimulationConfig = match serde_path_to_error::deserialize(&mut de) {
        Ok(cfg) => cfg,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Data => ConfigError::Schema {
                    path,
                    message: inner.to_string(),
                },
                _ => ConfigError::Parse {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                },
            });
        }
    };
    de.end().map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let report = validate(&cfg);
    if let Some(first) = report.errors.into_iter().next() {
        return Err(ConfigError::Range {
            path: first.path,
            message: first.message,
        });
    }
    Ok(cfg)
}

fn check_device(report: &mut ValidationReport, prefix: &str, dev: &DeviceModel) {
    let ratio = dev.on_off_ratio.0;
    if !(ratio > 1.0) {
        report.error(
            &format!("{prefix}.on_off_ratio"),
            format!("on/off ratio must be > 1 or \"inf\", got {ratio}"),
        );
    }
    if !(dev.r_on > 0.0) || !dev.r_on.is_finite() {
        report.error(&format!("{prefix}.r_on"), "r_on must be a positive finite resistance");
    }
    if !(1..=4).contains(&dev.cell_bits_max) {
        report.error(
            &format!("{prefix}.cell_bits_max"),
            format!("cell_bits_max must be in 1..=4, got {}", dev.cell_bits_max),
        );
    }
    if !(dev.sigma_cell >= 0.0) || !dev.sigma_cell.is_finite() {
        report.error(&format!("{prefix}.sigma_cell"), "sigma_cell must be finite and >= 0");
    } else if dev.sigma_cell > SIGMA_WARN_THRESHOLD {
        report.warn(
            &format!("{prefix}.sigma_cell"),
            format!("variation unusually large ({} > {SIGMA_WARN_THRESHOLD})", dev.sigma_cell),
        );
    }
    if !(dev.write_energy >= 0.0) || !(dev.write_latency >= 0.0) {
        report.error(&format!("{prefix}.write_energy"), "write costs must be >= 0");
    }
}

/// Checks every type invariant and cross-field rule. Never fails; the report
/// carries the findings.
pub fn validate(cfg: &SimulationConfig) -> ValidationReport {
    let mut r = ValidationReport::default();

    let n = cfg.quant.weight_bits;
    let m = cfg.quant.input_bits;
    if !(2..=8).contains(&n) {
        r.error("quant.weight_bits", format!("weight_bits must be in 2..=8, got {n}"));
    }
    if !(2..=8).contains(&m) {
        r.error("quant.input_bits", format!("input_bits must be in 2..=8, got {m}"));
    }

    let k = cfg.mapping.cell_bits;
    if !(1..=4).contains(&k) {
        r.error("mapping.cell_bits", format!("cell_bits must be in 1..=4, got {k}"));
    } else {
        if k > n {
            r.error(
                "mapping.cell_bits",
                format!("cell_bits ({k}) exceeds quant.weight_bits ({n})"),
            );
        }
        if k > cfg.device.cell_bits_max {
            r.error(
                "mapping.cell_bits",
                format!(
                    "cell precision exceeds device capability ({k} > {} for {})",
                    cfg.device.cell_bits_max, cfg.device.name
                ),
            );
        }
    }

    check_device(&mut r, "device", &cfg.device);
    check_device(&mut r, "arch.dmm_device", &cfg.arch.dmm_device);

    let p = cfg.adc.precision;
    if !(1..=16).contains(&p) {
        r.error("adc.precision", format!("ADC precision must be in 1..=16, got {p}"));
    }
    if let Some([lo, hi]) = cfg.adc.full_scale {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            r.error("adc.full_scale", format!("full scale needs hi > lo, got [{lo}, {hi}]"));
        }
    }
    match (&cfg.adc.kind, &cfg.adc.custom_spec) {
        (AdcKind::Custom, None) => r.error("adc.custom_spec", "custom ADC requires custom_spec"),
        (_, Some(path)) if !path.exists() => r.error(
            "adc.custom_spec",
            format!("file {} does not exist", path.display()),
        ),
        _ => {}
    }

    let a = &cfg.arch;
    for (name, v) in [
        ("arch.subarray_rows", a.subarray_rows),
        ("arch.subarray_cols", a.subarray_cols),
        ("arch.dmm_subarray_rows", a.dmm_subarray_rows),
        ("arch.dmm_subarray_cols", a.dmm_subarray_cols),
    ] {
        if v == 0 || !v.is_power_of_two() {
            r.error(name, format!("must be a positive power of two, got {v}"));
        }
    }
    for (name, v) in [
        ("arch.subarrays_per_pe", a.subarrays_per_pe),
        ("arch.pes_per_tile", a.pes_per_tile),
        ("arch.adc_share", a.adc_share),
    ] {
        if v == 0 {
            r.error(name, "must be positive");
        }
    }
    if a.adc_share > 0 {
        if a.subarray_cols % a.adc_share != 0 {
            r.error(
                "arch.adc_share",
                format!("adc_share ({}) must divide subarray_cols ({})", a.adc_share, a.subarray_cols),
            );
        }
        if a.dmm_subarray_cols % a.adc_share != 0 {
            r.error(
                "arch.adc_share",
                format!(
                    "adc_share ({}) must divide dmm_subarray_cols ({})",
                    a.adc_share, a.dmm_subarray_cols
                ),
            );
        }
    }
    if k >= 1 && k <= 4 && cfg.mapping.design != Design::Design2 {
        // One weight plus its extra column must fit a subarray row.
        let cols_needed = crate::digitmap::planes_per_weight(cfg.mapping.design, n.max(2), k) + 1;
        if a.subarray_cols < cols_needed {
            r.error("arch.subarray_cols", "subarray too narrow for one mapped weight");
        }
    }

    for (key, value) in cfg.cost.coefficients() {
        if !(value >= 0.0) || !value.is_finite() {
            r.error(&format!("cost.{key}"), format!("coefficient must be finite and >= 0, got {value}"));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "quant": {"scheme": "uniform-symmetric", "weight_bits": 4, "input_bits": 4},
        "mapping": {"design": "design3", "cell_bits": 2},
        "device": {"name": "rram", "r_on": 6000, "on_off_ratio": 150, "cell_bits_max": 4, "kind": "eNVM"},
        "adc": {"precision": 5},
        "seed": 7
    }"#;

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = load_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.cost, CostParams::default());
        assert_eq!(cfg.arch, ArchConfig::default());
        assert_eq!(cfg.mode, Mode::Average);
        assert_eq!(cfg.mapping.offset_cancellation, OffsetCancellation::DummyColumn);
        assert_eq!(cfg.adc.kind, AdcKind::Calibrated);
    }

    #[test]
    fn rram_row_matches_preset() {
        let cfg = load_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.device.r_on, 6000.0);
        assert_eq!(cfg.device.on_off_ratio, OnOffRatio(150.0));
        let preset = DeviceModel::rram_150();
        assert_eq!(preset.r_on, cfg.device.r_on);
        assert_eq!(preset.on_off_ratio, cfg.device.on_off_ratio);
    }

    #[test]
    fn oversized_cell_bits_is_range_error() {
        let text = MINIMAL.replace("\"cell_bits\": 2", "\"cell_bits\": 8");
        match load_config_str(&text) {
            Err(ConfigError::Range { path, .. }) => assert_eq!(path, "mapping.cell_bits"),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_schema_error_with_path() {
        let text = MINIMAL.replace("\"precision\": 5", "\"precision\": 5, \"bogus\": 1");
        match load_config_str(&text) {
            Err(ConfigError::Schema { path, message }) => {
                assert!(path.starts_with("adc"), "{path}");
                assert!(message.contains("bogus"));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_type_is_schema_error() {
        let text = MINIMAL.replace("\"weight_bits\": 4", "\"weight_bits\": \"four\"");
        match load_config_str(&text) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "quant.weight_bits"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            load_config_str("{\"quant\": "),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn infinite_ratio_literal() {
        let text = MINIMAL.replace("\"on_off_ratio\": 150", "\"on_off_ratio\": \"inf\"");
        let cfg = load_config_str(&text).unwrap();
        assert!(cfg.device.on_off_ratio.is_infinite());
        assert_eq!(cfg.device.on_off_ratio.normalized_offset(4), 0.0);
        assert!(cfg.to_json().contains("\"inf\""));
        let bad = MINIMAL.replace("\"on_off_ratio\": 150", "\"on_off_ratio\": \"infinite\"");
        assert!(matches!(load_config_str(&bad), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn cell_precision_beyond_device() {
        let mut cfg = SimulationConfig::example();
        cfg.mapping.cell_bits = 4;
        cfg.device.cell_bits_max = 2;
        let report = validate(&cfg);
        assert!(report
            .errors
            .iter()
            .any(|e| e.message.contains("cell precision exceeds device capability")));
    }

    #[test]
    fn valid_config_has_no_errors() {
        let report = validate(&SimulationConfig::example());
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn large_variation_warns() {
        let mut cfg = SimulationConfig::example();
        cfg.device.sigma_cell = 0.3;
        let report = validate(&cfg);
        assert!(report.is_ok());
        assert!(report.warnings[0].message.contains("variation unusually large"));
    }

    #[test]
    fn adc_share_must_divide_columns() {
        let mut cfg = SimulationConfig::example();
        cfg.arch.adc_share = 3;
        assert!(validate(&cfg).errors.iter().any(|e| e.path == "arch.adc_share"));
    }

    #[test]
    fn negative_cost_coefficient_rejected() {
        let mut cfg = SimulationConfig::example();
        cfg.cost.e_cell = -1.0;
        assert!(validate(&cfg).errors.iter().any(|e| e.path == "cost.e_cell"));
    }

    #[test]
    fn missing_custom_adc_file() {
        let mut cfg = SimulationConfig::example();
        cfg.adc.kind = AdcKind::Custom;
        cfg.adc.custom_spec = Some(PathBuf::from("/nonexistent/adc.json"));
        assert!(validate(&cfg).errors.iter().any(|e| e.path == "adc.custom_spec"));
    }

    #[test]
    fn reload_is_idempotent() {
        let cfg = load_config_str(MINIMAL).unwrap();
        let again = load_config_str(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        let example = SimulationConfig::example();
        assert_eq!(load_config_str(&example.to_json()).unwrap(), example);
    }
}
