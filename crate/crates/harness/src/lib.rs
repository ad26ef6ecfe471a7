//! Dataset emission, experiment pipelines and metrics on top of
//! `blocksim-core`.

pub mod dataset;
pub mod experiments;
pub mod metrics;
pub mod table;

use std::io;
use std::path::{Path, PathBuf};

use blocksim_core::dynamics::SimError;
use blocksim_core::ipe::{IpeError, RecordParseError};
use blocksim_core::render::{PgmError, RenderError};
use blocksim_core::scene::{RecordError, SceneError};
use blocksim_core::seed::{derive_seed, stream};
use blocksim_core::vision::VisionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error("scene {id}: {source}")]
    Scene { id: String, source: Box<HarnessError> },
    #[error(transparent)]
    SceneGen(#[from] SceneError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Prediction(#[from] RecordParseError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Ipe(#[from] IpeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Self::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn in_scene(self, id: impl Into<String>) -> Self {
        Self::Scene { id: id.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Seed of test-set scene `index` with `n_blocks` blocks.
pub fn test_scene_seed(master: u64, n_blocks: usize, index: usize) -> u64 {
    derive_seed(derive_seed(master, stream::TEST, n_blocks as u64), stream::SCENE, index as u64)
}

/// Seed of training-set scene `index` with `n_blocks` blocks.
pub fn train_scene_seed(master: u64, n_blocks: usize, index: usize) -> u64 {
    derive_seed(derive_seed(master, stream::TRAIN, n_blocks as u64), stream::SCENE, index as u64)
}

/// Seed of boundary scene `index` at visual-instability `level`.
pub fn boundary_scene_seed(master: u64, level: u32, index: usize) -> u64 {
    derive_seed(derive_seed(master, stream::BOUNDARY, u64::from(level)), stream::SCENE, index as u64)
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}
