use nalgebra::Vector2;

use super::{SceneError, SceneState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub per_block_falls: Vec<bool>,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualInstability {
    pub score: f64,
}

impl VisualInstability {
    /// Integer level used to bin boundary-case datasets.
    pub fn level(&self) -> u32 {
        self.score.floor() as u32
    }
}

fn check_generated_form(scene: &SceneState) -> Result<(), SceneError> {
    if scene.is_empty() {
        return Err(SceneError::Empty);
    }
    for (index, b) in scene.blocks.iter().enumerate() {
        if !b.is_axis_aligned() {
            return Err(SceneError::RotatedBlock { index });
        }
    }
    for (index, pair) in scene.blocks.windows(2).enumerate() {
        if pair[1].center.z <= pair[0].center.z {
            return Err(SceneError::NotStacked { index: index + 1 });
        }
    }
    Ok(())
}

/// Exact stability rule for a one-per-level stack of axis-aligned cubes.
///
/// Block `i > 0` falls iff the horizontal projection of the center of mass of
/// blocks `i..` lies outside the top face of block `i - 1`. Points exactly on
/// the face boundary count as supported.
pub fn analytic_stability(scene: &SceneState) -> Result<StabilityReport, SceneError> {
    check_generated_form(scene)?;
    let n = scene.len();
    let mut per_block_falls = vec![false; n];
    // suffix sums of mass and mass-weighted horizontal position
    let mut mass = 0.0;
    let mut moment = Vector2::zeros();
    for i in (1..n).rev() {
        let b = &scene.blocks[i];
        mass += b.mass();
        moment += b.horizontal() * b.mass();
        let com = moment / mass;
        let below = &scene.blocks[i - 1];
        let d = com - below.horizontal();
        let h = below.half_side();
        per_block_falls[i] = d.x.abs() > h || d.y.abs() > h;
    }
    let stable = per_block_falls.iter().all(|f| !f);
    Ok(StabilityReport { per_block_falls, stable })
}

/// Ten times the largest horizontal distance between a block's center and
/// the center of mass of everything strictly above it, clipped to [0, 5].
pub fn visual_instability(scene: &SceneState) -> VisualInstability {
    let n = scene.len();
    let mut mass = 0.0;
    let mut moment = Vector2::zeros();
    let mut worst: f64 = 0.0;
    for i in (0..n).rev() {
        let b = &scene.blocks[i];
        if mass > 0.0 {
            let com = moment / mass;
            worst = worst.max((com - b.horizontal()).norm());
        }
        mass += b.mass();
        moment += b.horizontal() * b.mass();
    }
    VisualInstability { score: (10.0 * worst).clamp(0.0, 5.0) }
}
