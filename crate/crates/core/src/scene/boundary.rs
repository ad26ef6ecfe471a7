use super::{
    analytic_stability, calibrated_stddev, generate_scene, visual_instability, GenParams, SceneError,
    SceneState,
};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    pub n_blocks: usize,
    /// Multiplier on the calibrated stddev for the rejection proposal.
    pub proposal_scale: f64,
    pub attempt_budget: usize,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self { n_blocks: 4, proposal_scale: 2.0, attempt_budget: 100_000 }
    }
}

/// Rejection-samples a stack with the requested stability label and
/// `floor(visual_instability) == level`.
pub fn generate_boundary_scene(
    level: u32,
    stable: bool,
    seed: u64,
    params: &BoundaryParams,
) -> Result<SceneState, SceneError> {
    if !(1..=4).contains(&level) {
        return Err(SceneError::InvalidParams(format!("level must be in 1..=4, got {level}")));
    }
    // A falling block has the mass above its support at least half a side
    // away, which always scores 5.
    if !stable {
        return Err(SceneError::InvalidParams(format!(
            "unstable stacks always have visual instability 5, level {level} is unreachable"
        )));
    }
    let stddev = calibrated_stddev(params.n_blocks)? * params.proposal_scale;
    for attempt in 0..params.attempt_budget as u64 {
        let gp = GenParams::new(params.n_blocks, stddev, derive_seed(seed, stream::BOUNDARY, attempt))?;
        let scene = generate_scene(&gp);
        if visual_instability(&scene).level() != level {
            continue;
        }
        if analytic_stability(&scene)?.stable == stable {
            return Ok(scene);
        }
    }
    Err(SceneError::BoundaryBudget { level, stable, budget: params.attempt_budget })
}
