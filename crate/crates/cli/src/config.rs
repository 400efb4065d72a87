//! Per-command configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::fs;
use std::path::Path;

use pcc_core::corrupt::CorruptionSpec;
use pcc_core::ldo::{LdoConfig, LdoPreset};
use pcc_core::pipeline::TrainConfig;
use pcc_core::shapes_io::{ShapeClass, ShapeRanges, DEFAULT_RATIOS};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

pub fn load_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Table(d), Value::Table(s)) => {
            for (k, v) in s {
                match d.get_mut(&k) {
                    Some(existing) if existing.is_table() && v.is_table() => merge(existing, v),
                    _ => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (d, s) => *d = s,
    }
}

/// `base` with every key present in `file` replaced.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, file: Option<&Table>) -> Result<T, CliError> {
    let mut value = Value::try_from(base).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    if let Some(t) = file {
        merge(&mut value, Value::Table(t.clone()));
    }
    value.try_into().map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Canonical TOML text; fails for values TOML cannot hold (seeds above `i64::MAX`).
pub fn to_text<T: Serialize>(config: &T) -> Result<String, CliError> {
    toml::to_string_pretty(config).map_err(|e| CliError::Usage(format!("config cannot be written as TOML: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub classes: Vec<ShapeClass>,
    /// Clouds per class.
    pub count: usize,
    pub points_per_cloud: usize,
    pub ratios: [f64; 3],
    pub ranges: ShapeRanges,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            classes: vec![ShapeClass::Table, ShapeClass::Cylinder],
            count: 300,
            points_per_cloud: 256,
            ratios: DEFAULT_RATIOS,
            ranges: ShapeRanges::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.classes.is_empty() {
            return Err(CliError::Usage("at least one shape class is required".into()));
        }
        let distinct: std::collections::HashSet<_> = self.classes.iter().collect();
        if distinct.len() != self.classes.len() {
            return Err(CliError::Usage("shape classes must be distinct".into()));
        }
        if self.count == 0 || self.points_per_cloud == 0 {
            return Err(CliError::Usage("count and points_per_cloud must be at least 1".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.ratios.iter().any(|r| *r < 0.0) {
            return Err(CliError::Usage(format!("split ratios must be non-negative and sum to 1, got {sum}")));
        }
        self.ranges.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptConfig {
    /// Mask (`mask_knn`) or downsample settings; the per-cloud seed is derived from this one.
    pub corruption: CorruptionSpec,
}

impl Default for CorruptConfig {
    fn default() -> Self {
        Self { corruption: CorruptionSpec::mask(0.5, 0) }
    }
}

impl CorruptConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.corruption.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCommandConfig {
    pub train: TrainConfig,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        Self { train: TrainConfig { n_out: 256, ..TrainConfig::default() } }
    }
}

impl TrainCommandConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompleteConfig {
    pub preset: LdoPreset,
    /// Emit `H(E(x))` instead of running the optimization.
    pub no_ldo: bool,
    pub ldo: LdoConfig,
}

impl Default for CompleteConfig {
    fn default() -> Self {
        Self { preset: LdoPreset::MainText, no_ldo: false, ldo: LdoPreset::MainText.config() }
    }
}

impl CompleteConfig {
    /// Defaults for `preset`, then the file. The preset may itself come from the file.
    pub fn resolve(preset_flag: Option<LdoPreset>, file: Option<&Table>) -> Result<Self, CliError> {
        let from_file = match file.and_then(|t| t.get("preset")) {
            Some(v) => Some(
                v.as_str()
                    .ok_or_else(|| CliError::Usage("preset must be a string".into()))?
                    .parse::<LdoPreset>()
                    .map_err(CliError::Usage)?,
            ),
            None => None,
        };
        let preset = preset_flag.or(from_file).unwrap_or_default();
        let base = Self { preset, no_ldo: false, ldo: preset.config() };
        let mut out = overlay(&base, file)?;
        out.preset = preset;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.ldo.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_defaults() {
        let t: Table = "count = 7\n[ranges.box_half_extent]\nmin = 0.5\nmax = 0.6\n".parse().unwrap();
        let c = overlay(&GenConfig::default(), Some(&t)).unwrap();
        assert_eq!(c.count, 7);
        assert_eq!(c.ranges.box_half_extent.min, 0.5);
        assert_eq!(c.points_per_cloud, 256);
        assert_eq!(c.ranges.cylinder_radius, ShapeRanges::default().cylinder_radius);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let t: Table = "cuont = 7\n".parse().unwrap();
        assert!(matches!(overlay(&GenConfig::default(), Some(&t)), Err(CliError::Usage(_))));
    }

    #[test]
    fn configs_echo_canonically() {
        let c = TrainCommandConfig::default();
        let text = to_text(&c).unwrap();
        let back: TrainCommandConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(to_text(&back).unwrap(), text);
        let c = CompleteConfig::resolve(Some(LdoPreset::Appendix), None).unwrap();
        assert_eq!(toml::from_str::<CompleteConfig>(&to_text(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn preset_seeds_the_defaults() {
        let t: Table = "preset = \"appendix\"\n[ldo]\nmax_iters = 5\n".parse().unwrap();
        let c = CompleteConfig::resolve(None, Some(&t)).unwrap();
        assert_eq!(c.ldo.lambda0, 0.1);
        assert_eq!(c.ldo.max_iters, 5);
        let c = CompleteConfig::resolve(Some(LdoPreset::MainText), Some(&t)).unwrap();
        assert_eq!(c.preset, LdoPreset::MainText);
        assert_eq!((c.ldo.lambda0, c.ldo.max_iters), (0.001, 5));
    }
}
