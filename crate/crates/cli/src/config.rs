//! Run-config files.
//!
//! A run config is a TOML document whose top-level keys are those of
//! [`ScenarioConfig`], plus an optional `[paths]` table. Relative paths are
//! taken from the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use primeball::metrics::PricingModel;
use primeball::ScenarioConfig;
use serde::Deserialize;

use crate::error::Failure;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Pricing model for `report`.
    pub pricing: Option<PathBuf>,
    /// Corpus directory written by `generate`; generated in memory when absent.
    pub corpus: Option<PathBuf>,
    /// Store directory for `init`, `index` and `query`.
    pub data_dir: Option<PathBuf>,
    /// Report file, or directory for `run --scenario all`.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub paths: Paths,
    /// Whether `sf` was given rather than defaulted.
    pub sf_explicit: bool,
}

impl RunConfig {
    /// Reads `path`, or returns the defaults without one.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
            .map_err(|m| Failure::config(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str, base: &Path) -> Result<RunConfig, String> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let paths: Paths = match table.remove("paths") {
            Some(v) => v.try_into().map_err(|e: toml::de::Error| format!("[paths]: {e}"))?,
            None => Paths::default(),
        };
        let sf_explicit = table.contains_key("sf");
        let scenario: ScenarioConfig = toml::Value::Table(table).try_into().map_err(|e| e.to_string())?;
        let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        let paths = Paths {
            pricing: resolve(paths.pricing),
            corpus: resolve(paths.corpus),
            data_dir: resolve(paths.data_dir),
            out: resolve(paths.out),
        };
        Ok(RunConfig { scenario, paths, sf_explicit })
    }

    /// Checks the scenario settings and that input paths exist.
    pub fn check(&self) -> Result<(), Failure> {
        self.scenario.validate()?;
        for (key, p) in [("pricing", &self.paths.pricing), ("corpus", &self.paths.corpus)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Failure::config(format!("{key} path {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

pub fn load_pricing(path: &Path) -> Result<PricingModel, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read pricing {}: {e}", path.display())))?;
    let model: PricingModel =
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}
