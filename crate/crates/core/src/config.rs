//! Run configuration.
//!
//! Keys may be nested (`{"kalman": {"q": 0.3}}`) or dotted
//! (`{"kalman.q": 0.3}`). Unknown keys are rejected.
//!
//! | key                          | default        |
//! |------------------------------|----------------|
//! | `lift.confidence_threshold`  | 0.5            |
//! | `lift.sampling_radius`       | 5 (pixels)     |
//! | `fov.horizontal_deg`         | 120            |
//! | `kalman.q`                   | 0.5 rad²/s³    |
//! | `kalman.r`                   | 0.01 rad²      |
//! | `kalman.p0_heading`          | 0.5 rad²       |
//! | `kalman.p0_rate`             | 1.0 rad²/s²    |
//! | `track.gate_m`               | 0.75           |
//! | `track.expiry_frames`        | 30             |
//! | `frame.leveling`             | [1, 0, 0, 0]   |

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::fov::{FovConfig, DEFAULT_FOV_DEG};
use crate::geometry::{FrameConvention, UnitQuaternion};
use crate::skeleton::LiftParams;
use crate::smoothing::{KalmanParams, TrackParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FovSection {
    pub horizontal_deg: f64,
}

impl Default for FovSection {
    fn default() -> Self {
        Self { horizontal_deg: DEFAULT_FOV_DEG }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameSection {
    /// Camera-to-social leveling quaternion `[w, x, y, z]`.
    pub leveling: [f64; 4],
}

impl Default for FrameSection {
    fn default() -> Self {
        Self { leveling: [1.0, 0.0, 0.0, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub lift: LiftParams,
    pub fov: FovSection,
    pub kalman: KalmanParams,
    pub track: TrackParams,
    pub frame: FrameSection,
}

fn expand_dotted(value: Value) -> Result<Value, ConfigError> {
    let Value::Object(map) = value else { return Ok(value) };
    let mut out = Map::new();
    for (key, v) in map {
        let v = expand_dotted(v)?;
        let mut parts = key.split('.').rev();
        let leaf = parts.next().expect("split yields at least one part");
        let mut nested = Map::new();
        nested.insert(leaf.to_owned(), v);
        let nested = parts.fold(Value::Object(nested), |acc, part| {
            let mut m = Map::new();
            m.insert(part.to_owned(), acc);
            Value::Object(m)
        });
        merge(&mut out, nested, &key)?;
    }
    Ok(Value::Object(out))
}

fn merge(into: &mut Map<String, Value>, value: Value, origin: &str) -> Result<(), ConfigError> {
    let Value::Object(map) = value else { unreachable!("expand_dotted always produces objects") };
    for (k, v) in map {
        match (into.get_mut(&k), v) {
            (None, v) => {
                into.insert(k, v);
            }
            (Some(Value::Object(existing)), Value::Object(inner)) => merge(existing, Value::Object(inner), origin)?,
            _ => return Err(ConfigError::Parse(format!("key `{origin}` is given more than once"))),
        }
    }
    Ok(())
}

impl Config {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if !value.is_object() {
            return Err(ConfigError::Parse("config must be a JSON object".into()));
        }
        let cfg: Config =
            serde_json::from_value(expand_dotted(value)?).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        let c = self.lift.confidence_threshold;
        if !(0.0..=1.0).contains(&c) {
            return invalid(format!("lift.confidence_threshold = {c} is outside [0, 1]"));
        }
        self.fov_config()?;
        let k = &self.kalman;
        if !(k.q >= 0.0 && k.q.is_finite()) {
            return invalid(format!("kalman.q = {} must be >= 0", k.q));
        }
        for (name, v) in [("kalman.r", k.r), ("kalman.p0_heading", k.p0_heading), ("kalman.p0_rate", k.p0_rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} = {v} must be > 0"));
            }
        }
        if !(self.track.gate_m > 0.0 && self.track.gate_m.is_finite()) {
            return invalid(format!("track.gate_m = {} must be > 0", self.track.gate_m));
        }
        self.frame_convention()?;
        Ok(())
    }

    pub fn fov_config(&self) -> Result<FovConfig, ConfigError> {
        FovConfig::from_degrees(self.fov.horizontal_deg)
            .map_err(|e| ConfigError::Invalid(format!("fov.horizontal_deg: {e}")))
    }

    pub fn frame_convention(&self) -> Result<FrameConvention, ConfigError> {
        let [w, x, y, z] = self.frame.leveling;
        UnitQuaternion::new(w, x, y, z)
            .map(FrameConvention::with_leveling)
            .map_err(|e| ConfigError::Invalid(format!("frame.leveling: {e}")))
    }
}
