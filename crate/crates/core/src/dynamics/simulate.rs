use nalgebra::Vector3;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ExternalForce, PerturbationSchedule, RigidBody, SimConfig, SimError, World};
use crate::scene::SceneState;
use crate::seed::rng_from_seed;

/// Vertical travel of the top block beyond which a stack counts as fallen.
pub const FALL_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub fell: bool,
    /// Initial minus final height of the top block.
    pub top_block_z_drop: f64,
    /// Distance between each block's final and initial (post-noise) center.
    pub per_block_displacement: Vec<f64>,
    pub steps_executed: usize,
}

impl SimOutcome {
    pub fn blocks_moved(&self, threshold: f64) -> usize {
        self.per_block_displacement.iter().filter(|&&d| d > threshold).count()
    }
}

/// One line of a trajectory dump: every body's pose after `step` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFrame {
    pub step: usize,
    pub time: f64,
    /// x, y, z, qw, qx, qy, qz per body.
    pub poses: Vec<[f64; 7]>,
}

impl TrajectoryFrame {
    pub fn capture(step: usize, time: f64, bodies: &[RigidBody]) -> Self {
        let poses = bodies
            .iter()
            .map(|b| {
                let q = b.orientation.quaternion();
                [b.position.x, b.position.y, b.position.z, q.w, q.i, q.j, q.k]
            })
            .collect();
        Self { step, time, poses }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn parse_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim())
    }
}

/// Bodies for `scene` with independent horizontal Gaussian jitter of
/// `sigma` per axis on every block.
pub fn noisy_bodies(scene: &SceneState, sigma: f64, seed: u64) -> Vec<RigidBody> {
    let mut rng = rng_from_seed(seed);
    scene
        .blocks
        .iter()
        .map(|block| {
            let mut body = RigidBody::from_block(block);
            if sigma > 0.0 {
                let dx: f64 = StandardNormal.sample(&mut rng);
                let dy: f64 = StandardNormal.sample(&mut rng);
                body.position += Vector3::new(dx, dy, 0.0) * sigma;
            }
            body
        })
        .collect()
}

/// Runs one noisy simulation of `scene`.
pub fn simulate_scene(
    scene: &SceneState,
    config: &SimConfig,
    perturbation: &PerturbationSchedule,
    position_noise_sigma: f64,
    seed: u64,
) -> Result<SimOutcome, SimError> {
    simulate_scene_traced(scene, config, perturbation, position_noise_sigma, seed, |_| {})
}

/// As [`simulate_scene`], handing every frame (including the initial one) to `on_frame`.
pub fn simulate_scene_traced(
    scene: &SceneState,
    config: &SimConfig,
    perturbation: &PerturbationSchedule,
    position_noise_sigma: f64,
    seed: u64,
    mut on_frame: impl FnMut(TrajectoryFrame),
) -> Result<SimOutcome, SimError> {
    if scene.is_empty() {
        return Err(SimError::InvalidScene("scene has no blocks".into()));
    }
    if !(position_noise_sigma >= 0.0) {
        return Err(SimError::InvalidConfig(format!("noise sigma must be >= 0, got {position_noise_sigma}")));
    }
    let bodies = noisy_bodies(scene, position_noise_sigma, seed);
    let initial: Vec<Vector3<f64>> = bodies.iter().map(|b| b.position).collect();
    let mut world = World::new(bodies, *config)?;
    on_frame(TrajectoryFrame::capture(0, 0.0, &world.bodies));

    let mut resting = 0;
    for step in 0..config.n_steps() {
        let t = step as f64 * config.dt;
        let mut forces = [ExternalForce { body: 0, force: Vector3::zeros(), point: Vector3::zeros() }];
        let active = perturbation.is_active_at(t);
        if active {
            let base = &world.bodies[0];
            forces[0].force = perturbation.force_at(t);
            forces[0].point = base.position + base.orientation * Vector3::new(0.0, 0.0, -base.half_side);
        }
        world
            .step(if active { &forces } else { &[] })
            .map_err(|e| e.with_seed(seed))?;
        on_frame(TrajectoryFrame::capture(world.steps(), world.time(), &world.bodies));

        if config.rest_steps > 0 && perturbation.finished_by(world.time()) && world.at_rest() {
            resting += 1;
            if resting >= config.rest_steps {
                break;
            }
        } else {
            resting = 0;
        }
    }

    let top = initial.len() - 1;
    let top_block_z_drop = initial[top].z - world.bodies[top].position.z;
    Ok(SimOutcome {
        fell: top_block_z_drop.abs() > FALL_THRESHOLD,
        top_block_z_drop,
        per_block_displacement: initial
            .iter()
            .zip(&world.bodies)
            .map(|(p0, b)| (b.position - p0).norm())
            .collect(),
        steps_executed: world.steps(),
    })
}
