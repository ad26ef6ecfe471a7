//! Simulation-based stability judgments for stacks of blocks.
//!
//! The pipeline: [`scene`] generates stacks and labels them exactly,
//! [`render`] draws them, [`vision`] recovers a stack from three rendered
//! views by Metropolis-Hastings, [`dynamics`] simulates rigid cubes, and
//! [`ipe`] turns a noisy simulation ensemble into a fall probability.

pub mod dynamics;
pub mod ipe;
pub mod render;
pub mod scene;
pub mod seed;
pub mod vision;
