//! Analysis-by-synthesis: Metropolis-Hastings over block stacks, scored by
//! comparing blurred renders against three observed views.

mod infer;
mod mh;
mod model;


pub use infer::{
    infer_scene, infer_with_likelihood, initial_state, silhouette_center, PosteriorLine, ScenePosterior,
};
pub use mh::{metropolis_hastings, Chain};
pub use model::{log_likelihood, log_prior, propose, MhConfig, MoveKind, Observation, Proposal};

use thiserror::Error;

use crate::scene::SceneError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("observed image is {width}x{height}, expected {expected}x{expected}")]
    Resolution { expected: usize, width: usize, height: usize },
    #[error("no samples retained")]
    EmptyPosterior,
    #[error("bad posterior record: {0}")]
    Record(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}
