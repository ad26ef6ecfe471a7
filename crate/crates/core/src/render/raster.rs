use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{triplet_cameras, Camera, Image, RenderError, ViewBasis};
use crate::scene::SceneState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Square image side in pixels.
    pub resolution: usize,
    pub light_position: Vector3<f64>,
    pub ambient: f64,
    pub block_albedo: f64,
    pub ground_albedo: f64,
    /// Value of pixels whose ray misses the ground.
    pub background: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            resolution: 256,
            light_position: Vector3::new(0.0, 0.0, 16.0),
            ambient: 0.2,
            block_albedo: 0.95,
            ground_albedo: 1.0,
            background: 0.9,
        }
    }
}

impl RenderConfig {
    pub fn with_resolution(resolution: usize) -> Self {
        Self { resolution, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(32..=1024).contains(&self.resolution) {
            return Err(RenderError::Resolution(self.resolution));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.ambient) && unit(self.block_albedo) && unit(self.ground_albedo) && unit(self.background)) {
            return Err(RenderError::Shading);
        }
        Ok(())
    }

    fn lambert(&self, albedo: f64, point: &Vector3<f64>, normal: &Vector3<f64>) -> f64 {
        let l = (self.light_position - point).normalize();
        albedo * (self.ambient + (1.0 - self.ambient) * normal.dot(&l).max(0.0))
    }
}

/// Renderer bound to one camera; the ground layer is computed once and
/// reused for every scene drawn through it.
#[derive(Debug, Clone)]
pub struct Renderer {
    camera: Camera,
    config: RenderConfig,
    view: ViewBasis,
    ground: Vec<f64>,
}

/// Face of a cube as (axis, sign) with its four corners in winding order.
const FACES: [(usize, f64); 6] = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)];

impl Renderer {
    pub fn new(camera: &Camera, config: &RenderConfig) -> Self {
        let view = camera.basis();
        let n = config.resolution;
        let mut ground = Vec::with_capacity(n * n);
        for py in 0..n {
            for px in 0..n {
                let (u, v) = pixel_to_ndc(px, py, n);
                let dir = view.ray(u, v);
                let value = if dir.z < -1e-12 && view.eye.z > 0.0 {
                    let p = view.eye + dir * (-view.eye.z / dir.z);
                    config.lambert(config.ground_albedo, &p, &Vector3::z())
                } else {
                    config.background
                };
                ground.push(value);
            }
        }
        Self { camera: *camera, config: *config, view, ground }
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    pub fn render(&self, scene: &SceneState) -> Image {
        self.render_with_mask(scene).0
    }

    /// Image plus a per-pixel flag marking block coverage.
    pub fn render_with_mask(&self, scene: &SceneState) -> (Image, Vec<bool>) {
        let n = self.config.resolution;
        let mut pixels = self.ground.clone();
        let mut depth = vec![f64::INFINITY; n * n];
        let view = &self.view;
        let to_screen = |p: &Vector3<f64>| {
            let (u, v, d) = view.project(p);
            ((u + 1.0) * 0.5 * n as f64, (1.0 - v) * 0.5 * n as f64, d)
        };

        for block in &scene.blocks {
            let h = block.half_side();
            for (axis, sign) in FACES {
                let normal = block.orientation * (Vector3::ith(axis, 1.0) * sign);
                let center = block.center + normal * h;
                if normal.dot(&(view.eye - center)) <= 0.0 {
                    continue;
                }
                let e1 = block.orientation * Vector3::ith((axis + 1) % 3, h);
                let e2 = block.orientation * Vector3::ith((axis + 2) % 3, h);
                let corners = [center + e1 + e2, center - e1 + e2, center - e1 - e2, center + e1 - e2];
                let screen: Vec<(f64, f64, f64)> = corners.iter().map(to_screen).collect();
                if screen.iter().any(|s| s.2 <= 1e-6) {
                    continue;
                }
                let shade = self.config.lambert(self.config.block_albedo, &center, &normal);
                let plane = (center - view.eye).dot(&normal);
                self.fill_quad(&screen, |px, py| {
                    let (u, v) = pixel_to_ndc(px, py, n);
                    let d = plane / view.ray(u, v).dot(&normal);
                    let idx = py * n + px;
                    if d < depth[idx] {
                        depth[idx] = d;
                        pixels[idx] = shade;
                    }
                });
            }
        }
        let mask = depth.iter().map(|d| d.is_finite()).collect();
        (Image::from_pixels(n, n, pixels), mask)
    }

    /// Calls `plot` for every pixel whose center lies inside the convex quad.
    fn fill_quad(&self, q: &[(f64, f64, f64)], mut plot: impl FnMut(usize, usize)) {
        let n = self.config.resolution;
        let area: f64 = (0..4).map(|i| {
            let (a, b) = (q[i], q[(i + 1) % 4]);
            a.0 * b.1 - b.0 * a.1
        }).sum();
        if area.abs() < 1e-12 {
            return;
        }
        let orient = area.signum();
        let min_x = q.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_x = q.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(n as f64) as usize;
        let min_y = q.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let max_y = q.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(n as f64) as usize;
        for py in min_y..max_y {
            let cy = py as f64 + 0.5;
            for px in min_x..max_x {
                let cx = px as f64 + 0.5;
                let inside = (0..4).all(|i| {
                    let (a, b) = (q[i], q[(i + 1) % 4]);
                    orient * ((b.0 - a.0) * (cy - a.1) - (b.1 - a.1) * (cx - a.0)) >= 0.0
                });
                if inside {
                    plot(px, py);
                }
            }
        }
    }
}

fn pixel_to_ndc(px: usize, py: usize, n: usize) -> (f64, f64) {
    let s = 2.0 / n as f64;
    ((px as f64 + 0.5) * s - 1.0, 1.0 - (py as f64 + 0.5) * s)
}

pub fn render_scene(scene: &SceneState, camera: &Camera, config: &RenderConfig) -> Image {
    Renderer::new(camera, config).render(scene)
}

/// Renders from `base` and from the two cameras orbited 45 and 90 degrees.
pub fn render_triplet(scene: &SceneState, base: &Camera, config: &RenderConfig) -> [Image; 3] {
    triplet_cameras(base).map(|c| render_scene(scene, &c, config))
}
