//! Rigid-body simulation of cube stacks on a ground plane.

mod body;
mod contact;
mod perturbation;
mod simulate;
mod world;

#[cfg(test)]
mod tests;

pub use body::RigidBody;
pub use contact::{contact_manifold, contact_manifold_into, Collider, Contact};
pub use perturbation::PerturbationSchedule;
pub use simulate::{noisy_bodies, simulate_scene, simulate_scene_traced, SimOutcome, TrajectoryFrame, FALL_THRESHOLD};
pub use world::{step_world, ExternalForce, SimConfig, World};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("solver diverged at step {step}: body {body} reached {speed} m/s (seed {seed:?})")]
    Divergence { seed: Option<u64>, step: usize, body: usize, speed: f64 },
}

impl SimError {
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            SimError::Divergence { step, body, speed, .. } => {
                SimError::Divergence { seed: Some(seed), step, body, speed }
            }
            other => other,
        }
    }
}
