use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use warpbank::analysis::DesignOptions;
use warpbank::model::SourceModel;
use warpbank::sim::SimParams;
use warpbank::warp::BankSpec;
use warpbank::{io, reference, synthesis, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    MethodB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSection {
    #[serde(rename = "M")]
    pub m: usize,
    pub mu: f64,
    /// One factor per band, or a single factor for all bands.
    #[serde(rename = "D")]
    pub d: Vec<usize>,
}

impl Default for BankSection {
    fn default() -> Self {
        Self {
            m: 16,
            mu: reference::MU,
            d: reference::UNIFORM16_D.to_vec(),
        }
    }
}

impl BankSection {
    pub fn spec(&self) -> Result<BankSpec> {
        let d = if self.d.len() == 1 {
            vec![self.d[0]; self.m]
        } else {
            self.d.clone()
        };
        if d.len() != self.m {
            return Err(Error::InvalidBank(format!(
                "bank.D has {} entries, bank.M is {}",
                d.len(),
                self.m
            )));
        }
        BankSpec::new(self.mu, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `"white"` or a CSV of `omega,value` rows.
    pub pxx: String,
    pub s2: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            pxx: "white".into(),
            s2: "white".into(),
        }
    }
}

impl ModelSection {
    pub fn load(&self, base: &Path) -> Result<SourceModel> {
        let read = |s: &str| -> Result<Option<Vec<f64>>> {
            if s == "white" {
                Ok(None)
            } else {
                io::read_spectrum(&base.join(s)).map(Some)
            }
        };
        match (read(&self.pxx)?, read(&self.s2)?) {
            (None, None) => Ok(SourceModel::white()),
            (Some(p), None) => {
                let n = p.len();
                SourceModel::from_samples(p, vec![1.0; n])
            }
            (None, Some(s)) => SourceModel::from_samples(vec![1.0; s.len()], s),
            (Some(p), Some(s)) => SourceModel::from_samples(p, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub grid_n: usize,
    pub epsilon: f64,
    /// Absolute synthesis ridge; `null` selects `1e-8 · trace(S)/M`.
    pub delta: Option<f64>,
    pub synthesis_grid: usize,
    pub method: Method,
}

impl Default for DesignSection {
    fn default() -> Self {
        let d = DesignOptions::default();
        Self {
            grid_n: d.grid_n,
            epsilon: d.epsilon,
            delta: None,
            synthesis_grid: synthesis::DEFAULT_GRID,
            method: Method::Proposed,
        }
    }
}

impl DesignSection {
    pub fn options(&self) -> DesignOptions {
        DesignOptions {
            grid_n: self.grid_n,
            epsilon: self.epsilon,
            ..DesignOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub bank: BankSection,
    pub model: ModelSection,
    pub design: DesignSection,
    pub sim: SimParams,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses a JSON document; errors carry the line and column.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_filled() {
        let c = RunConfig::from_json(r#"{"bank": {"M": 4, "mu": 0.0, "D": [1]}}"#, "t").unwrap();
        assert_eq!(c.design.grid_n, 512);
        assert_eq!(c.sim.sample_rate, 16000.0);
        assert_eq!(c.bank.spec().unwrap().decimation(), &[1, 1, 1, 1]);
        let echo = RunConfig::from_json(&c.to_json(), "echo").unwrap();
        assert_eq!(echo, c);
    }

    #[test]
    fn unknown_key_names_field_and_line() {
        let err = RunConfig::from_json("{\n  \"design\": {\"grid\": 3}\n}", "cfg.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("grid") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn method_spelling() {
        let c = RunConfig::from_json(r#"{"design": {"method": "method_b"}}"#, "t").unwrap();
        assert_eq!(c.design.method, Method::MethodB);
        assert!(RunConfig::from_json(r#"{"design": {"method": "b"}}"#, "t").is_err());
    }

    #[test]
    fn band_count_mismatch() {
        let b = BankSection {
            m: 4,
            mu: 0.1,
            d: vec![2, 2],
        };
        assert!(b.spec().is_err());
    }
}
