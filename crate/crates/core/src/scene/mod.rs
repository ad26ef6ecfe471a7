//! Block-stack scenes: generation, the exact stability rule, the visual
//! instability score and the line-delimited scene record format.

mod boundary;
mod calibrate;
mod record;
mod stability;

pub use boundary::{generate_boundary_scene, BoundaryParams};
pub use calibrate::{calibrate_stddev, calibrate_stddev_with, calibrated_stddev, stable_fraction};
pub use record::{RecordError, SceneRecord};
pub use stability::{analytic_stability, visual_instability, StabilityReport, VisualInstability};

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::seed::rng_from_seed;

pub const DEFAULT_SIDE: f64 = 1.0;
pub const DEFAULT_DENSITY: f64 = 500.0;
pub const FIELD_HALF_EXTENT: f64 = 15.0;
pub const FIELD_HEIGHT: f64 = 4.0;
/// Generation stddev for four-block stacks.
pub const FOUR_BLOCK_STDDEV: f64 = 0.29;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("scene has no blocks")]
    Empty,
    #[error("block {index} is rotated; the stability rule needs axis-aligned blocks")]
    RotatedBlock { index: usize },
    #[error("block {index} is not on its own height level")]
    NotStacked { index: usize },
    #[error("block {index} has non-positive side or density")]
    BadBlock { index: usize },
    #[error("block {index} lies outside the field")]
    OutsideField { index: usize },
    #[error("calibration bisection did not bracket P(stable)=0.5 in [{lo}, {hi}] m")]
    CalibrationBracket { lo: f64, hi: f64 },
    #[error("boundary scene (level {level}, stable={stable}) not found within {budget} attempts")]
    BoundaryBudget { level: u32, stable: bool, budget: usize },
}

/// A cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub center: Vector3<f64>,
    pub side: f64,
    pub density: f64,
    pub orientation: UnitQuaternion<f64>,
}

impl Block {
    pub fn new(center: Vector3<f64>) -> Self {
        Self {
            center,
            side: DEFAULT_SIDE,
            density: DEFAULT_DENSITY,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.density * self.side.powi(3)
    }

    pub fn half_side(&self) -> f64 {
        0.5 * self.side
    }

    pub fn horizontal(&self) -> Vector2<f64> {
        self.center.xy()
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.orientation.angle() < 1e-9
    }
}

/// Ordered stack of blocks, bottom to top.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub blocks: Vec<Block>,
    pub field_half_extent: f64,
    pub field_height: f64,
}

impl SceneState {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self {
            blocks,
            field_half_extent: FIELD_HALF_EXTENT,
            field_height: FIELD_HEIGHT,
        }
    }

    /// One block per level with the given horizontal centers, bottom first.
    pub fn stacked(horizontal: &[Vector2<f64>]) -> Self {
        Self::new(
            horizontal
                .iter()
                .enumerate()
                .map(|(i, h)| Block::new(Vector3::new(h.x, h.y, (i as f64 + 0.5) * DEFAULT_SIDE)))
                .collect(),
        )
    }

    /// Aligned stack with every block centered over `at`.
    pub fn aligned(n_blocks: usize, at: Vector2<f64>) -> Self {
        Self::stacked(&vec![at; n_blocks])
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.blocks.iter().map(Block::mass).sum()
    }

    /// Center of mass of `blocks[range]`.
    pub fn center_of_mass(&self, from: usize) -> Vector3<f64> {
        let mut m = 0.0;
        let mut acc = Vector3::zeros();
        for b in &self.blocks[from..] {
            m += b.mass();
            acc += b.center * b.mass();
        }
        acc / m
    }

    /// Mean of the block centers, the point cameras are aimed at.
    pub fn pile_center(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.blocks.iter().map(|b| b.center).sum();
        sum / self.blocks.len() as f64
    }

    /// Checks the generated-form invariants: non-empty, positive sizes,
    /// strictly increasing heights, one block per level, inside the field.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.blocks.is_empty() {
            return Err(SceneError::Empty);
        }
        let mut level_top = 0.0;
        for (index, b) in self.blocks.iter().enumerate() {
            if !(b.side > 0.0 && b.density > 0.0) || !b.center.iter().all(|v| v.is_finite()) {
                return Err(SceneError::BadBlock { index });
            }
            let expected = level_top + b.half_side();
            if (b.center.z - expected).abs() > 1e-6 {
                return Err(SceneError::NotStacked { index });
            }
            level_top += b.side;
            if b.center.x.abs() > self.field_half_extent || b.center.y.abs() > self.field_half_extent {
                return Err(SceneError::OutsideField { index });
            }
        }
        Ok(())
    }

    /// Same stack with every horizontal center shifted by `offset`.
    pub fn translated(&self, offset: Vector2<f64>) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.center.x += offset.x;
            b.center.y += offset.y;
        }
        out
    }

    /// Mirror image through the plane x = 0.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.center.x = -b.center.x;
            let q = b.orientation.quaternion();
            b.orientation = UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(q.w, q.i, -q.j, -q.k));
        }
        out
    }

    /// Rigid rotation of the whole stack about the vertical axis through the origin.
    pub fn rotated_about_z(&self, angle: f64) -> Self {
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle);
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.center = rot * b.center;
            b.orientation = rot * b.orientation;
        }
        out
    }
}

/// Parameters of the stacked-block generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    n_blocks: usize,
    horizontal_stddev: f64,
    rng_seed: u64,
}

impl GenParams {
    /// `horizontal_stddev` may be zero, which yields perfectly aligned stacks.
    pub fn new(n_blocks: usize, horizontal_stddev: f64, rng_seed: u64) -> Result<Self, SceneError> {
        if n_blocks < 2 {
            return Err(SceneError::InvalidParams(format!("n_blocks must be >= 2, got {n_blocks}")));
        }
        if !(horizontal_stddev >= 0.0 && horizontal_stddev.is_finite()) {
            return Err(SceneError::InvalidParams(format!(
                "horizontal_stddev must be finite and >= 0, got {horizontal_stddev}"
            )));
        }
        Ok(Self { n_blocks, horizontal_stddev, rng_seed })
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn horizontal_stddev(&self) -> f64 {
        self.horizontal_stddev
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// Draws a stack whose block `i` sits at its predecessor's horizontal center
/// plus an independent Gaussian offset per axis. The bottom block is at the
/// horizontal origin.
pub fn generate_scene(params: &GenParams) -> SceneState {
    let mut rng = rng_from_seed(params.rng_seed);
    let mut centers = Vec::with_capacity(params.n_blocks);
    let mut cur = Vector2::zeros();
    centers.push(cur);
    for _ in 1..params.n_blocks {
        let dx: f64 = StandardNormal.sample(&mut rng);
        let dy: f64 = StandardNormal.sample(&mut rng);
        cur += Vector2::new(dx, dy) * params.horizontal_stddev;
        centers.push(cur);
    }
    SceneState::stacked(&centers)
}
