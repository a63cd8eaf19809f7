//! Line-oriented configuration files: `key = value` entries grouped under
//! `[section]` headers, with the same density literal syntax accepted on the
//! command line. Flags always override file values; unknown keys are
//! rejected up front so typos cannot silently fall back to defaults.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use transfer_asymptotics::SpectralDensity;

/// Exit-code-2 class of failures: anything wrong with the configuration
/// itself rather than with the mathematics or the filesystem.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every key the file format understands, as `section.key`.
const KNOWN_KEYS: &[&str] = &[
    "run.seed",
    "run.trials",
    "run.threads",
    "run.out_dir",
    "run.distributions",
    "regression.n",
    "regression.d",
    "regression.kappa",
    "regression.sigma",
    "regression.ea",
    "regression.entry_noise",
    "regression.atoms",
    "regression.uniform",
    "regression.single",
    "classification.d",
    "classification.n",
    "classification.kappa",
    "classification.rho",
    "classification.r",
    "classification.t_star",
    "classification.t_eta",
    "classification.sigma2",
    "classification.ea",
    "sweep.mode",
    "sweep.var",
    "sweep.grid",
    "sweep.out",
];

/// Parsed file contents: flat map from `section.key` to raw value text.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: HashMap<String, String>,
}

impl FileConfig {
    /// Parses a configuration file, rejecting malformed lines and unknown
    /// keys with their line number.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses configuration text; see [`FileConfig::load`].
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = HashMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {line_no}: unclosed section header")))?
                    .trim();
                if name.is_empty() {
                    return Err(ConfigError(format!("line {line_no}: empty section name")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(ConfigError(format!("line {line_no}: empty key")));
            }
            if section.is_empty() {
                return Err(ConfigError(format!(
                    "line {line_no}: key `{key}` appears before any [section] header"
                )));
            }
            let full = format!("{section}.{key}");
            if !KNOWN_KEYS.contains(&full.as_str()) {
                return Err(ConfigError(format!("line {line_no}: unknown key `{full}`")));
            }
            if entries.insert(full.clone(), value.to_string()).is_some() {
                return Err(ConfigError(format!("line {line_no}: duplicate key `{full}`")));
            }
        }
        Ok(FileConfig { entries })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a number")))
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a count")))
            })
            .transpose()
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a seed")))
            })
            .transpose()
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(ConfigError(format!(
                    "key `{key}`: expected `true` or `false`, got `{v}`"
                ))),
            })
            .transpose()
    }

    /// Reads the regression spectrum from whichever of the three density
    /// keys is present (at most one may be set).
    pub fn regression_density(&self) -> Result<Option<SpectralDensity>, ConfigError> {
        let mut found = Vec::new();
        if let Some(v) = self.raw("regression.atoms") {
            found.push(("regression.atoms", parse_atoms(v)?));
        }
        if let Some(v) = self.raw("regression.uniform") {
            found.push(("regression.uniform", parse_uniform(v)?));
        }
        if let Some(v) = self.f64("regression.single")? {
            found.push((
                "regression.single",
                SpectralDensity::single_atom(v)
                    .map_err(|e| ConfigError(format!("regression.single: {e}")))?,
            ));
        }
        match found.len() {
            0 => Ok(None),
            1 => Ok(Some(found.pop().unwrap().1)),
            _ => Err(ConfigError(format!(
                "conflicting spectrum keys: {}",
                found
                    .iter()
                    .map(|(k, _)| *k)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
        }
    }
}

/// Parses an atoms literal `[[loc, weight], ...]`.
pub fn parse_atoms(text: &str) -> Result<SpectralDensity, ConfigError> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(text)
        .map_err(|e| ConfigError(format!("atoms literal `{text}`: {e}")))?;
    SpectralDensity::atoms(pairs.into_iter().map(|[l, w]| (l, w)).collect())
        .map_err(|e| ConfigError(format!("atoms literal: {e}")))
}

/// Parses a uniform support literal `[lower, upper]`.
pub fn parse_uniform(text: &str) -> Result<SpectralDensity, ConfigError> {
    let ends: [f64; 2] = serde_json::from_str(text)
        .map_err(|e| ConfigError(format!("uniform literal `{text}`: {e}")))?;
    SpectralDensity::uniform(ends[0], ends[1])
        .map_err(|e| ConfigError(format!("uniform literal: {e}")))
}

/// Renders a resolved configuration back into file syntax, sorted by key,
/// so the manifest written next to every output is itself a loadable config.
pub fn render_manifest(command_line: &str, entries: &[(String, String)]) -> String {
    let mut sorted = entries.to_vec();
    sorted.sort();
    let mut out = String::new();
    let _ = writeln!(out, "# resolved configuration; reusable via --config");
    let _ = writeln!(out, "# command: {command_line}");
    let mut current_section = String::new();
    for (key, value) in &sorted {
        let (section, name) = key
            .split_once('.')
            .expect("manifest keys are always section-qualified");
        if section != current_section {
            let _ = writeln!(out, "[{section}]");
            current_section = section.to_string();
        }
        let _ = writeln!(out, "{name} = {value}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_keys_parse() {
        let cfg = FileConfig::parse(
            "# comment\n[run]\nseed = 7\ntrials = 5\n[regression]\nkappa = 2.0\natoms = [[1.0, 0.3], [5.0, 0.7]]\n",
        )
        .unwrap();
        assert_eq!(cfg.u64("run.seed").unwrap(), Some(7));
        assert_eq!(cfg.usize("run.trials").unwrap(), Some(5));
        assert_eq!(cfg.f64("regression.kappa").unwrap(), Some(2.0));
        assert!(cfg.regression_density().unwrap().is_some());
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let err = FileConfig::parse("[run]\nseed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.0.contains("line 3"), "{err}");
        assert!(err.0.contains("run.bogus"), "{err}");
    }

    #[test]
    fn keys_outside_sections_are_rejected() {
        assert!(FileConfig::parse("seed = 1\n").is_err());
    }

    #[test]
    fn duplicate_and_malformed_lines_are_rejected() {
        assert!(FileConfig::parse("[run]\nseed = 1\nseed = 2\n").is_err());
        assert!(FileConfig::parse("[run]\njust some words\n").is_err());
        assert!(FileConfig::parse("[run\nseed = 1\n").is_err());
    }

    #[test]
    fn conflicting_spectra_are_rejected() {
        let cfg =
            FileConfig::parse("[regression]\nsingle = 1.0\nuniform = [1.0, 5.0]\n").unwrap();
        assert!(cfg.regression_density().is_err());
    }

    #[test]
    fn manifest_round_trips_through_the_parser() {
        let entries = vec![
            ("run.seed".to_string(), "7".to_string()),
            ("regression.kappa".to_string(), "2".to_string()),
            ("run.trials".to_string(), "20".to_string()),
        ];
        let text = render_manifest("transferlab sweep", &entries);
        let cfg = FileConfig::parse(&text).unwrap();
        assert_eq!(cfg.u64("run.seed").unwrap(), Some(7));
        assert_eq!(cfg.f64("regression.kappa").unwrap(), Some(2.0));
    }
}
