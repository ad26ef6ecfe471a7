//! Software rendering of block scenes to grayscale images.

mod blur;
mod camera;
mod image;
mod raster;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use camera::{
    sample_camera, triplet_cameras, Camera, CameraDistribution, ViewBasis, DEFAULT_FOV_DEG, MAX_CAMERA_ATTEMPTS,
};
pub use image::{Image, PgmError, MAX_PGM_SIDE};
pub use raster::{render_scene, render_triplet, RenderConfig, Renderer};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("no camera containing the scene found in {attempts} draws")]
    CameraBudget { attempts: usize },
    #[error("resolution {0} outside 32..=1024")]
    Resolution(usize),
    #[error("ambient, albedos and background must lie in [0, 1]")]
    Shading,
}
