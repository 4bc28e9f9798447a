//! TOML configuration file and its merge with flags and defaults.
//!
//! Precedence: command-line flags, then the file, then built-in defaults.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use attnweb_core::engine::NavigationPolarity;
use attnweb_core::EventConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub enabled: Option<bool>,
    pub attention_threshold: Option<i32>,
    pub hold_ms: Option<i64>,
    pub advance_period_ms: Option<i64>,
    pub blink_delta: Option<i32>,
    pub double_blink_min_gap_ms: Option<i64>,
    pub double_blink_max_gap_ms: Option<i64>,
    pub signal_quality_gate: Option<i32>,
    pub polarity: Option<NavigationPolarity>,
    pub absolute_blink_delta: Option<bool>,
}

impl EngineSection {
    /// Fields set in `over` win.
    pub fn overlay(&self, over: &EngineSection) -> EngineSection {
        EngineSection {
            enabled: over.enabled.or(self.enabled),
            attention_threshold: over.attention_threshold.or(self.attention_threshold),
            hold_ms: over.hold_ms.or(self.hold_ms),
            advance_period_ms: over.advance_period_ms.or(self.advance_period_ms),
            blink_delta: over.blink_delta.or(self.blink_delta),
            double_blink_min_gap_ms: over.double_blink_min_gap_ms.or(self.double_blink_min_gap_ms),
            double_blink_max_gap_ms: over.double_blink_max_gap_ms.or(self.double_blink_max_gap_ms),
            signal_quality_gate: over.signal_quality_gate.or(self.signal_quality_gate),
            polarity: over.polarity.or(self.polarity),
            absolute_blink_delta: over.absolute_blink_delta.or(self.absolute_blink_delta),
        }
    }

    /// `None` when the engine is disabled.
    pub fn resolve(&self) -> Result<Option<EventConfig>, CliError> {
        if self.enabled == Some(false) {
            return Ok(None);
        }
        let d = EventConfig::default();
        let cfg = EventConfig {
            attention_threshold: self.attention_threshold.unwrap_or(d.attention_threshold),
            hold_ms: self.hold_ms.unwrap_or(d.hold_ms),
            advance_period_ms: self.advance_period_ms.unwrap_or(d.advance_period_ms),
            blink_delta: self.blink_delta.unwrap_or(d.blink_delta),
            double_blink_min_gap_ms: self.double_blink_min_gap_ms.unwrap_or(d.double_blink_min_gap_ms),
            double_blink_max_gap_ms: self.double_blink_max_gap_ms.unwrap_or(d.double_blink_max_gap_ms),
            signal_quality_gate: self.signal_quality_gate.unwrap_or(d.signal_quality_gate),
            polarity: self.polarity.unwrap_or(d.polarity),
            absolute_blink_delta: self.absolute_blink_delta.unwrap_or(d.absolute_blink_delta),
        };
        cfg.validate().map_err(|e| CliError::Usage(format!("engine: {e}")))?;
        Ok(Some(cfg))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub source: Option<String>,
    pub listen: Option<SocketAddr>,
    pub record: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub buckets: Option<usize>,
    pub max_skew_ms: Option<i64>,
    pub queue_capacity: Option<usize>,
    #[serde(default)]
    pub engine: EngineSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(FileConfig::default()), FileConfig::load)
    }
}

/// Sets `engine.attention_threshold` in a config file, keeping every other
/// key. The file is created when missing.
pub fn write_threshold(path: &Path, threshold: i32) -> Result<(), CliError> {
    let mut table: toml::Table = match std::fs::read_to_string(path) {
        Ok(text) => toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => toml::Table::new(),
        Err(e) => return Err(CliError::Runtime(format!("cannot read config {}: {e}", path.display()))),
    };
    let engine = table
        .entry("engine")
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| CliError::Usage(format!("config {}: `engine` is not a table", path.display())))?;
    engine.insert("attention_threshold".into(), toml::Value::Integer(threshold as i64));
    let text = toml::to_string(&table).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write config {}: {e}", path.display())))
}
