//! Scenario loading and the built-in presets.

use std::path::Path;

use hybd_core::scenario::ScenarioConfig;

use crate::error::{Result, SimError};

/// Built-in scenarios, addressable as `preset:<name>`.
pub const PRESETS: &[(&str, &str)] = &[
    ("rayleigh-256x16-snr", include_str!("../presets/rayleigh-256x16-snr.toml")),
    ("rayleigh-64x4-snr", include_str!("../presets/rayleigh-64x4-snr.toml")),
    ("mmwave-ula-256x16-snr", include_str!("../presets/mmwave-ula-256x16-snr.toml")),
    ("mmwave-upa-256x16-snr", include_str!("../presets/mmwave-upa-256x16-snr.toml")),
    ("mmwave-ula-256x16-single-stream", include_str!("../presets/mmwave-ula-256x16-single-stream.toml")),
    ("single-path-ula-256x16-snr", include_str!("../presets/single-path-ula-256x16-snr.toml")),
    ("rayleigh-256x16-streams-1-2-4", include_str!("../presets/rayleigh-256x16-streams-1-2-4.toml")),
    ("rayleigh-256x16-streams", include_str!("../presets/rayleigh-256x16-streams.toml")),
    ("rayleigh-256x16-users", include_str!("../presets/rayleigh-256x16-users.toml")),
    ("mmwave-256x16-streams", include_str!("../presets/mmwave-256x16-streams.toml")),
    ("mmwave-256x16-users", include_str!("../presets/mmwave-256x16-users.toml")),
];

/// Parse and structurally validate a TOML scenario. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
    config.validate().map_err(|e| SimError::Config(e.to_string()))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Require every scheme to be designable at every sweep point.
pub fn check_feasible(config: &ScenarioConfig) -> Result<()> {
    for point in config.sweep_points()? {
        for &scheme in &config.schemes {
            if let Err(e) = point.config.scheme_feasibility(scheme) {
                let at = point.value.map(|v| format!(" at sweep value {v}")).unwrap_or_default();
                return Err(SimError::Config(format!("{} infeasible{at}: {e}", scheme.label())));
            }
        }
    }
    Ok(())
}

/// Load a preset by name; presets are feasibility-checked here.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, text) =
        PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| SimError::Config(format!("unknown preset {name:?}")))?;
    let config = parse_config(text)?;
    check_feasible(&config)?;
    Ok(config)
}

/// `preset:<name>` or a path to a TOML file.
pub fn resolve(arg: &str) -> Result<ScenarioConfig> {
    match arg.strip_prefix("preset:") {
        Some(name) => preset(name),
        None => load_config(Path::new(arg)),
    }
}
