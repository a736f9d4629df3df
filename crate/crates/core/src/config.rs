//! JSON engine configuration.
//!
//! ```json
//! {"rows": {"PO,PO": {"PO": 0.6, "IJA": 0.4}, "...": {}}, "guards": "default",
//!  "profile": "extrovert", "seed": 42}
//! ```
//!
//! `rows` must list all 25 pairs (or be the string `"default"`); states left
//! out of a row weigh zero. Optional sections `tick`, `geometry`, `segmenter`,
//! `classifier`, `stability` and `noise_deg` override the perception defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{AgentGazeState, ClassifierConfig, PairKey, StabilityTable};
use crate::controller::{BehaviorProfile, Controller, GuardTable, Personality, TransitionModel};
use crate::engine::{Engine, GazeNoise, Pipeline};
use crate::error::{ConfigError, Result};
use crate::events::SegmenterConfig;
use crate::geometry::{GeometryConfig, Vec3};
use crate::rng::SimRng;

/// Stream ids for [`SimRng::fork`].
pub(crate) mod streams {
    pub const ROBOT_CONTROLLER: u64 = 0;
    pub const ROBOT_NOISE: u64 = 1;
    pub const PARTNER_CONTROLLER: u64 = 2;
    pub const PARTNER_NOISE: u64 = 3;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowsSpec {
    Named(String),
    Explicit(BTreeMap<String, BTreeMap<String, f64>>),
}

impl RowsSpec {
    pub fn to_model(&self) -> Result<TransitionModel, ConfigError> {
        match self {
            RowsSpec::Named(name) if name == "default" => Ok(TransitionModel::default()),
            RowsSpec::Named(name) => Err(ConfigError::Invalid(format!("unknown rows preset `{name}`"))),
            RowsSpec::Explicit(map) => {
                let mut rows = BTreeMap::new();
                for (key, weights) in map {
                    let pair: PairKey = key.parse().map_err(ConfigError::Invalid)?;
                    let mut row = [0.0; 5];
                    for (state, w) in weights {
                        let s: AgentGazeState = state.parse().map_err(ConfigError::Invalid)?;
                        row[s.index()] = *w;
                    }
                    if rows.insert(pair, row).is_some() {
                        return Err(ConfigError::Invalid(format!("duplicate row {pair}")));
                    }
                }
                Ok(TransitionModel::from_rows(&rows)?)
            }
        }
    }

    pub fn from_model(model: &TransitionModel) -> Self {
        RowsSpec::Explicit(
            model
                .rows()
                .into_iter()
                .map(|(pair, row)| {
                    let weights = AgentGazeState::ALL
                        .into_iter()
                        .zip(row)
                        .filter(|(_, w)| *w > 0.0)
                        .map(|(s, w)| (s.as_str().to_string(), w))
                        .collect();
                    (pair.to_string(), weights)
                })
                .collect(),
        )
    }
}

fn default_tick() -> f64 {
    0.05
}

/// The file form; see the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfigFile {
    pub rows: RowsSpec,
    #[serde(default)]
    pub guards: GuardTable,
    #[serde(default = "default_personality")]
    pub profile: Personality,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default)]
    pub geometry: GeometryConfig<f64>,
    #[serde(default)]
    pub segmenter: SegmenterConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Vec<PairKey>>,
    #[serde(default)]
    pub noise_deg: f64,
}

fn default_personality() -> Personality {
    Personality::Extrovert
}

/// Validated engine configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub model: TransitionModel,
    pub guards: GuardTable,
    pub profile: BehaviorProfile,
    pub seed: u64,
    pub tick: f64,
    pub geometry: GeometryConfig<f64>,
    pub segmenter: SegmenterConfig,
    pub classifier: ClassifierConfig,
    pub stability: StabilityTable,
    /// Standard deviation of synthesized gaze noise, degrees.
    pub noise_deg: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            model: TransitionModel::default(),
            guards: GuardTable::Default,
            profile: BehaviorProfile::extrovert(),
            seed: 0,
            tick: default_tick(),
            geometry: GeometryConfig::default(),
            segmenter: SegmenterConfig::default(),
            classifier: ClassifierConfig::default(),
            stability: StabilityTable::default(),
            noise_deg: 0.0,
        }
    }
}

impl TryFrom<EngineConfigFile> for EngineConfig {
    type Error = ConfigError;

    fn try_from(f: EngineConfigFile) -> Result<Self, ConfigError> {
        let cfg = EngineConfig {
            model: f.rows.to_model()?,
            guards: f.guards,
            profile: BehaviorProfile::for_personality(f.profile),
            seed: f.seed,
            tick: f.tick,
            geometry: f.geometry,
            segmenter: f.segmenter,
            classifier: f.classifier,
            stability: f.stability.map(StabilityTable::new).unwrap_or_default(),
            noise_deg: f.noise_deg,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(ConfigError::Invalid("tick must be positive".into()));
        }
        if !(self.noise_deg.is_finite() && self.noise_deg >= 0.0) {
            return Err(ConfigError::Invalid("noise_deg must be non-negative".into()));
        }
        self.geometry.validate()?;
        self.segmenter.validate()?;
        self.classifier.validate()?;
        self.profile.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let file: EngineConfigFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> EngineConfigFile {
        EngineConfigFile {
            rows: RowsSpec::from_model(&self.model),
            guards: self.guards,
            profile: self.profile.name,
            seed: self.seed,
            tick: self.tick,
            geometry: self.geometry,
            segmenter: self.segmenter,
            classifier: self.classifier,
            stability: Some(self.stability.iter().collect()),
            noise_deg: self.noise_deg,
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(self.geometry, self.segmenter, self.classifier, self.stability.clone())
    }

    pub(crate) fn controller(&self, rng: SimRng) -> Result<Controller> {
        Ok(Controller::new(
            self.model.clone(),
            self.guards,
            self.profile,
            self.classifier.mutual_gaze_window,
            rng,
        )?)
    }

    /// A fresh robot engine. `seed` overrides the configured seed.
    pub fn engine(&self, robot_face: Vec3<f64>, seed: Option<u64>) -> Result<Engine> {
        let root = SimRng::new(seed.unwrap_or(self.seed));
        let noise = GazeNoise::new(self.noise_deg.to_radians(), root.fork(streams::ROBOT_NOISE));
        Ok(Engine::new(self.pipeline()?, self.controller(root.fork(streams::ROBOT_CONTROLLER))?, robot_face, noise))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_rows_json(skip: Option<&str>) -> String {
        let rows: Vec<String> = PairKey::all()
            .map(|p| p.to_string())
            .filter(|k| Some(k.as_str()) != skip)
            .map(|k| format!("\"{k}\":{{\"PO\":1.0}}"))
            .collect();
        format!("{{\"rows\":{{{}}},\"guards\":\"default\",\"profile\":\"introvert\",\"seed\":9}}", rows.join(","))
    }

    #[test]
    fn loads_explicit_rows() {
        let cfg = EngineConfig::from_json(&full_rows_json(None)).unwrap();
        assert_eq!(cfg.profile, BehaviorProfile::introvert());
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.row(PairKey::GATE), [1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn missing_row_is_load_error() {
        let err = EngineConfig::from_json(&full_rows_json(Some("OO,INT"))).unwrap_err();
        assert!(err.to_string().contains("OO,INT"), "{err}");
    }

    #[test]
    fn rows_key_is_required() {
        assert!(EngineConfig::from_json("{\"profile\":\"introvert\"}").is_err());
        assert!(EngineConfig::from_json("{\"rows\":\"default\",\"bogus\":1}").is_err());
        assert!(EngineConfig::from_json("{\"rows\":\"default\",\"profile\":\"shy\"}").is_err());
    }

    #[test]
    fn file_form_roundtrips() {
        let cfg = EngineConfig::from_json("{\"rows\":\"default\"}").unwrap();
        let text = serde_json::to_string(&cfg.to_file()).unwrap();
        assert_eq!(EngineConfig::from_json(&text).unwrap(), cfg);
    }
}
