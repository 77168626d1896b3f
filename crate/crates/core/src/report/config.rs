use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ReportError, Result};
use crate::curve::{EvaluationMode, Week};
use crate::features::{FeatureConfig, FeatureId, SeasonThreshold, DEFAULT_TAKEOFF_DELTA_T, DEFAULT_TAKEOFF_THRESHOLD};
use crate::harness::{PerturbConfig, SynthConfig};
use crate::measures::{EpsilonPolicy, MeasureId};
use crate::stochastic::{SamplingOptions, DEFAULT_SAMPLE_SIZE, MIN_SAMPLE_SIZE};

/// Parsed run configuration.
///
/// ```toml
/// [input]
/// observed = "observed.csv"
/// forecasts = "forecasts.csv"
///
/// [evaluation]
/// mode = "forecasting"
/// regions = ["r1", "r2"]
/// measures = ["MAE", "RMSE", "MAPE", "sMAPE", "MdAPE", "MdsAPE"]
/// features = ["peak_value", "peak_time"]
///
/// [features]
/// id_threshold = 500.0
///
/// [stochastic]
/// seed = 7
///
/// [output]
/// dir = "out"
/// formats = ["csv", "json", "svg"]
/// ```
///
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<InputSection>,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    pub features: FeatureSection,
    #[serde(default)]
    pub stochastic: StochasticSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub observed: PathBuf,
    pub forecasts: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    /// Empty means every region in the observed file.
    #[serde(default)]
    pub regions: Vec<String>,
    /// Restricts observed curves to one season when set.
    #[serde(default)]
    pub season: Option<String>,
    #[serde(default = "default_mode")]
    pub mode: EvaluationMode,
    #[serde(default = "default_measures")]
    pub measures: Vec<String>,
    #[serde(default = "default_features")]
    pub features: Vec<String>,
}

fn default_mode() -> EvaluationMode {
    EvaluationMode::Forecasting
}

fn default_measures() -> Vec<String> {
    MeasureId::SELECTED.iter().map(|m| m.name().to_string()).collect()
}

fn default_features() -> Vec<String> {
    FeatureId::DEFAULT.iter().map(|f| f.name().to_string()).collect()
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            regions: Vec::new(),
            season: None,
            mode: default_mode(),
            measures: default_measures(),
            features: default_features(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    #[serde(default = "default_delta_t")]
    pub takeoff_delta_t: u32,
    #[serde(default = "default_takeoff_threshold")]
    pub takeoff_threshold: f64,
    pub id_threshold: f64,
    /// Fixed flu-percentage threshold for season start.
    #[serde(default)]
    pub season_threshold: Option<f64>,
}

fn default_delta_t() -> u32 {
    DEFAULT_TAKEOFF_DELTA_T
}

fn default_takeoff_threshold() -> f64 {
    DEFAULT_TAKEOFF_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticSection {
    #[serde(default = "default_size")]
    pub size: usize,
    /// Required whenever stochastic forecasts are evaluated.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_size() -> usize {
    DEFAULT_SAMPLE_SIZE
}

impl Default for StochasticSection {
    fn default() -> Self {
        Self {
            size: DEFAULT_SAMPLE_SIZE,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(format!("unknown output format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

/// Generated inputs in place of files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    /// First prediction time; defaults to 2.
    #[serde(default)]
    pub k_start: Option<Week>,
    /// Last prediction time; defaults to one week before the season end.
    #[serde(default)]
    pub k_end: Option<Week>,
    pub regions: Vec<SynthConfig>,
    pub methods: Vec<PerturbConfig>,
}

impl RunConfig {
    /// Reads and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses config text without touching the file system.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ReportError::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(input) = &mut self.input {
            fix(&mut input.observed);
            fix(&mut input.forecasts);
        }
        fix(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ReportError::Config(m));
        match (&self.input, &self.synthetic) {
            (None, None) => return bad("either [input] or [synthetic] is required".into()),
            (Some(_), Some(_)) => return bad("[input] and [synthetic] are mutually exclusive".into()),
            (Some(input), None) => {
                for p in [&input.observed, &input.forecasts] {
                    if !p.is_file() {
                        return bad(format!("input file {} does not exist", p.display()));
                    }
                }
            }
            (None, Some(s)) => {
                if s.regions.is_empty() || s.methods.is_empty() {
                    return bad("[synthetic] needs at least one region and one method".into());
                }
            }
        }
        if self.measures()?.is_empty() {
            return bad("at least one measure must be selected".into());
        }
        if self.feature_ids()?.is_empty() {
            return bad("at least one feature must be selected".into());
        }
        self.feature_config()
            .validate()
            .map_err(|e| ReportError::Config(e.to_string()))?;
        if self.stochastic.size < MIN_SAMPLE_SIZE {
            return bad(format!("stochastic size must be at least {MIN_SAMPLE_SIZE}"));
        }
        Ok(())
    }

    pub fn measures(&self) -> Result<Vec<MeasureId>> {
        self.evaluation
            .measures
            .iter()
            .map(|m| m.parse().map_err(ReportError::Config))
            .collect()
    }

    pub fn feature_ids(&self) -> Result<Vec<FeatureId>> {
        self.evaluation
            .features
            .iter()
            .map(|f| f.parse().map_err(ReportError::Config))
            .collect()
    }

    pub fn feature_config(&self) -> FeatureConfig {
        let f = &self.features;
        FeatureConfig {
            takeoff_delta_t: f.takeoff_delta_t,
            takeoff_threshold: f.takeoff_threshold,
            id_threshold: f.id_threshold,
            season_threshold: f.season_threshold.map(SeasonThreshold::Percent),
        }
    }

    pub fn sampling(&self) -> Option<SamplingOptions> {
        self.stochastic.seed.map(|seed| SamplingOptions {
            size: self.stochastic.size,
            seed,
            epsilon: EpsilonPolicy::default(),
        })
    }
}
