use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{analytic_stability, visual_instability, Block, SceneError, SceneState};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// One scene per line of JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub seed: u64,
    pub n_blocks: usize,
    pub centers: Vec<[f64; 3]>,
    pub side: f64,
    pub density: f64,
    pub stable: bool,
    pub visual_instability: f64,
}

impl SceneRecord {
    /// Labels `scene` with the exact rule. All blocks must share one side
    /// length and density.
    pub fn from_scene(seed: u64, scene: &SceneState) -> Result<Self, RecordError> {
        let first = scene.blocks.first().ok_or(SceneError::Empty)?;
        if scene.blocks.iter().any(|b| b.side != first.side || b.density != first.density) {
            return Err(RecordError::Invalid("blocks must share side and density".into()));
        }
        Ok(Self {
            seed,
            n_blocks: scene.len(),
            centers: scene.blocks.iter().map(|b| [b.center.x, b.center.y, b.center.z]).collect(),
            side: first.side,
            density: first.density,
            stable: analytic_stability(scene)?.stable,
            visual_instability: visual_instability(scene).score,
        })
    }

    pub fn to_scene(&self) -> Result<SceneState, RecordError> {
        if self.n_blocks != self.centers.len() || self.n_blocks == 0 {
            return Err(RecordError::Invalid(format!(
                "n_blocks {} does not match {} centers",
                self.n_blocks,
                self.centers.len()
            )));
        }
        if !(self.side > 0.0 && self.side.is_finite() && self.density > 0.0 && self.density.is_finite()) {
            return Err(RecordError::Invalid("side and density must be positive".into()));
        }
        let blocks = self
            .centers
            .iter()
            .map(|c| Block {
                side: self.side,
                density: self.density,
                ..Block::new(Vector3::new(c[0], c[1], c[2]))
            })
            .collect();
        let scene = SceneState::new(blocks);
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn parse_line(line: &str) -> Result<Self, RecordError> {
        let rec: Self = serde_json::from_str(line.trim())?;
        rec.to_scene()?;
        Ok(rec)
    }
}
