//! Built-in super-category scenario tables (`data/scenarios.toml`).

use serde::Deserialize;

use super::ScenarioSpec;
use crate::error::{Error, Result};

const SCENARIOS_TOML: &str = include_str!("../../data/scenarios.toml");

#[derive(Debug, Clone, Deserialize)]
pub struct DatasetAlphabet {
    pub name: String,
    /// Class names in label-id order, when the dataset has a fixed numbering.
    #[serde(default)]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CatalogEntry {
    pub dataset: String,
    pub code: String,
    pub title: String,
    pub classes: Vec<String>,
}

impl CatalogEntry {
    /// Maps class names to label ids through `alphabet` (case-insensitive).
    pub fn resolve_with(&self, alphabet: &[String]) -> Result<ScenarioSpec> {
        let normal = self
            .classes
            .iter()
            .map(|name| {
                alphabet
                    .iter()
                    .position(|a| a.eq_ignore_ascii_case(name))
                    .map(|i| i as u32)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "{}/{}: class `{name}` not in the label alphabet",
                            self.dataset, self.code
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScenarioSpec::new(self.code.clone(), self.dataset.clone(), normal))
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Catalog {
    #[serde(rename = "dataset")]
    pub datasets: Vec<DatasetAlphabet>,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn get(&self, dataset: &str, code: &str) -> Option<&CatalogEntry> {
        self.scenarios
            .iter()
            .find(|s| s.dataset.eq_ignore_ascii_case(dataset) && s.code.eq_ignore_ascii_case(code))
    }

    pub fn alphabet(&self, dataset: &str) -> Option<&[String]> {
        self.datasets
            .iter()
            .find(|d| d.name.eq_ignore_ascii_case(dataset))
            .and_then(|d| d.classes.as_deref())
    }

    /// Resolves a scenario against the built-in alphabet of its dataset.
    pub fn resolve(&self, dataset: &str, code: &str) -> Result<ScenarioSpec> {
        let entry = self
            .get(dataset, code)
            .ok_or_else(|| Error::Config(format!("unknown scenario {dataset}/{code}")))?;
        let alphabet = self.alphabet(dataset).ok_or_else(|| {
            Error::Config(format!(
                "dataset {dataset} has no built-in label alphabet; supply one with resolve_with"
            ))
        })?;
        entry.resolve_with(alphabet)
    }
}

pub fn builtin_scenario_tables() -> Catalog {
    toml::from_str(SCENARIOS_TOML).expect("built-in scenario table parses")
}
