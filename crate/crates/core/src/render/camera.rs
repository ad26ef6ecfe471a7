use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::scene::SceneState;
use crate::seed::rng_from_seed;

pub const DEFAULT_FOV_DEG: f64 = 45.0;
pub const MAX_CAMERA_ATTEMPTS: usize = 100;

/// Pinhole camera placed in cylindrical coordinates about a vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    /// Ground point the cylindrical coordinates are measured from.
    pub axis: Vector2<f64>,
    pub focal_point: Vector3<f64>,
    /// Roll about the view direction, degrees.
    pub tilt: f64,
    /// Full vertical and horizontal field of view, degrees.
    pub fov: f64,
}

/// Orthonormal camera frame.
#[derive(Debug, Clone, Copy)]
pub struct ViewBasis {
    pub eye: Vector3<f64>,
    pub forward: Vector3<f64>,
    pub right: Vector3<f64>,
    pub up: Vector3<f64>,
    /// tan(fov / 2).
    pub half_extent: f64,
}

impl ViewBasis {
    /// Normalized image coordinates in [-1, 1] (x right, y up) and depth
    /// along the view axis.
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        let d = p - self.eye;
        let depth = d.dot(&self.forward);
        let s = 1.0 / (depth * self.half_extent);
        (d.dot(&self.right) * s, d.dot(&self.up) * s, depth)
    }

    /// World-space direction through normalized image coordinates.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        self.forward + (self.right * u + self.up * v) * self.half_extent
    }
}

impl Camera {
    pub fn eye(&self) -> Vector3<f64> {
        Vector3::new(
            self.axis.x + self.r * self.theta.cos(),
            self.axis.y + self.r * self.theta.sin(),
            self.z,
        )
    }

    pub fn basis(&self) -> ViewBasis {
        let eye = self.eye();
        let forward = (self.focal_point - eye).normalize();
        let mut right = forward.cross(&Vector3::z());
        if right.norm_squared() < 1e-12 {
            right = forward.cross(&Vector3::y());
        }
        let right0 = right.normalize();
        let up0 = right0.cross(&forward);
        let (s, c) = self.tilt.to_radians().sin_cos();
        ViewBasis {
            eye,
            forward,
            right: right0 * c + up0 * s,
            up: up0 * c - right0 * s,
            half_extent: (0.5 * self.fov.to_radians()).tan(),
        }
    }

    /// The same camera moved around its axis by `angle`.
    pub fn orbited(&self, angle: f64) -> Self {
        Self { theta: self.theta + angle, ..*self }
    }

    /// Camera and focal point rotated about the vertical line through the
    /// world origin, matching [`SceneState::rotated_about_z`].
    pub fn rotated_about_z(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let rot = |x: f64, y: f64| (c * x - s * y, s * x + c * y);
        let (ax, ay) = rot(self.axis.x, self.axis.y);
        let (fx, fy) = rot(self.focal_point.x, self.focal_point.y);
        Self {
            theta: self.theta + angle,
            axis: Vector2::new(ax, ay),
            focal_point: Vector3::new(fx, fy, self.focal_point.z),
            ..*self
        }
    }

    /// True when every block corner is in front of the camera and inside
    /// the image.
    pub fn contains(&self, scene: &SceneState) -> bool {
        let view = self.basis();
        scene.blocks.iter().all(|b| {
            let h = b.half_side();
            (0..8).all(|k| {
                let local = Vector3::new(
                    if k & 1 == 0 { -h } else { h },
                    if k & 2 == 0 { -h } else { h },
                    if k & 4 == 0 { -h } else { h },
                );
                let (u, v, depth) = view.project(&(b.center + b.orientation * local));
                depth > 1e-3 && u.abs() <= 1.0 && v.abs() <= 1.0
            })
        })
    }
}

/// Three views orbiting by 0, 45 and 90 degrees from `base`.
pub fn triplet_cameras(base: &Camera) -> [Camera; 3] {
    [*base, base.orbited(FRAC_PI_4), base.orbited(FRAC_PI_2)]
}

/// Distribution that [`sample_camera`] draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraDistribution {
    pub r_mean: f64,
    pub r_stddev: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub z_mean: f64,
    pub z_stddev: f64,
    /// Per-axis stddev of the focal point around the pile center.
    pub focal_stddev: f64,
    pub tilt_stddev_deg: f64,
    pub fov: f64,
}

impl Default for CameraDistribution {
    fn default() -> Self {
        Self {
            r_mean: 11.0,
            r_stddev: 0.3,
            theta_min: 0.0,
            theta_max: FRAC_PI_2,
            z_mean: 3.0,
            z_stddev: 0.01,
            focal_stddev: 0.2,
            tilt_stddev_deg: 2.0,
            fov: DEFAULT_FOV_DEG,
        }
    }
}

impl CameraDistribution {
    /// Narrowed viewpoints: theta in [0, pi/8) and no tilt.
    pub fn restricted() -> Self {
        Self { theta_max: FRAC_PI_8, tilt_stddev_deg: 0.0, ..Self::default() }
    }

    /// All noise removed; theta stays uniform.
    pub fn noiseless() -> Self {
        Self { r_stddev: 0.0, z_stddev: 0.0, focal_stddev: 0.0, tilt_stddev_deg: 0.0, ..Self::default() }
    }

    fn draw<R: Rng + ?Sized>(&self, scene: &SceneState, rng: &mut R) -> Camera {
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        let r = self.r_mean + self.r_stddev * normal();
        let z = self.z_mean + self.z_stddev * normal();
        let focal = scene.pile_center()
            + Vector3::new(normal(), normal(), normal()) * self.focal_stddev;
        let tilt = self.tilt_stddev_deg * normal();
        let theta = if self.theta_max > self.theta_min {
            rng.gen_range(self.theta_min..self.theta_max)
        } else {
            self.theta_min
        };
        let axis = scene.blocks.first().map_or(Vector2::zeros(), |b| b.horizontal());
        Camera { r, theta, z, axis, focal_point: focal, tilt, fov: self.fov }
    }
}

/// Draws a camera for `scene`, redrawing until the whole scene is in view.
pub fn sample_camera(scene: &SceneState, dist: &CameraDistribution, seed: u64) -> Result<Camera, RenderError> {
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_CAMERA_ATTEMPTS {
        let cam = dist.draw(scene, &mut rng);
        if cam.r > 0.0 && cam.contains(scene) {
            return Ok(cam);
        }
    }
    Err(RenderError::CameraBudget { attempts: MAX_CAMERA_ATTEMPTS })
}
