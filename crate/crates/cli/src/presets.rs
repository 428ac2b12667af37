//! Scenario files shipped with the binary, one per reproduced figure.

use std::path::Path;

use crate::config::Scenario;
use crate::output::io_err;
use crate::CliError;

pub const PRESETS: [(&str, &str); 14] = [
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7a", include_str!("../presets/fig7a.toml")),
    ("fig7b", include_str!("../presets/fig7b.toml")),
    ("fig7c", include_str!("../presets/fig7c.toml")),
    ("fig7d", include_str!("../presets/fig7d.toml")),
    ("fig8a", include_str!("../presets/fig8a.toml")),
    ("fig8b", include_str!("../presets/fig8b.toml")),
    ("fig9a", include_str!("../presets/fig9a.toml")),
    ("fig9b", include_str!("../presets/fig9b.toml")),
    ("fig10", include_str!("../presets/fig10.toml")),
    ("fig11", include_str!("../presets/fig11.toml")),
    ("fig12", include_str!("../presets/fig12.toml")),
    ("fig13", include_str!("../presets/fig13.toml")),
];

pub fn preset(name: &str) -> Option<Scenario> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| Scenario::from_toml(text).unwrap_or_else(|e| panic!("preset {n} is invalid: {e}")))
}

/// A scenario file path, or a preset name with optional `presets/` prefix and
/// `.toml` suffix.
pub fn resolve(arg: &str) -> Result<Scenario, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        return Scenario::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())));
    }
    let name = arg.strip_prefix("presets/").unwrap_or(arg);
    let name = name.strip_suffix(".toml").unwrap_or(name);
    preset(name).ok_or_else(|| CliError::Config(format!("`{arg}` is neither a file nor a preset name")))
}
