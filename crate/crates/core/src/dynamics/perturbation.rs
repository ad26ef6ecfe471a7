use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rand::Rng;

/// Horizontal push on the bottom block during an initial window, with its
/// direction held piecewise constant and redrawn at `resample_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSchedule {
    /// Newtons.
    pub magnitude_phi: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub resample_hz: f64,
    pub direction_angles: Vec<f64>,
}

pub const DEFAULT_WINDOW: f64 = 1.0;
pub const DEFAULT_RESAMPLE_HZ: f64 = 50.0;

impl PerturbationSchedule {
    pub fn none() -> Self {
        Self {
            magnitude_phi: 0.0,
            window_start: 0.0,
            window_end: DEFAULT_WINDOW,
            resample_hz: DEFAULT_RESAMPLE_HZ,
            direction_angles: vec![0.0; (DEFAULT_WINDOW * DEFAULT_RESAMPLE_HZ).round() as usize],
        }
    }

    /// Directions drawn uniformly from [0, 2pi), one per resample interval.
    pub fn random<R: Rng + ?Sized>(magnitude_phi: f64, rng: &mut R) -> Self {
        let count = (DEFAULT_WINDOW * DEFAULT_RESAMPLE_HZ).round() as usize;
        Self {
            magnitude_phi,
            direction_angles: (0..count).map(|_| rng.gen_range(0.0..TAU)).collect(),
            ..Self::none()
        }
    }

    pub fn with_magnitude(&self, magnitude_phi: f64) -> Self {
        Self { magnitude_phi, ..self.clone() }
    }

    /// Mirror image in x: each direction angle theta becomes pi - theta.
    pub fn mirrored_x(&self) -> Self {
        Self {
            direction_angles: self.direction_angles.iter().map(|a| (PI - a).rem_euclid(TAU)).collect(),
            ..self.clone()
        }
    }

    pub fn is_active_at(&self, t: f64) -> bool {
        self.magnitude_phi != 0.0 && t >= self.window_start && t < self.window_end
    }

    /// True when no force remains at or after time `t`.
    pub fn finished_by(&self, t: f64) -> bool {
        self.magnitude_phi == 0.0 || t >= self.window_end
    }

    /// Force at time `t` (zero outside the window).
    pub fn force_at(&self, t: f64) -> Vector3<f64> {
        if !self.is_active_at(t) || self.direction_angles.is_empty() {
            return Vector3::zeros();
        }
        // the epsilon keeps t = k / hz from landing in interval k - 1
        let idx = (((t - self.window_start) * self.resample_hz) + 1e-9).floor() as usize;
        let angle = self.direction_angles[idx.min(self.direction_angles.len() - 1)];
        Vector3::new(angle.cos(), angle.sin(), 0.0) * self.magnitude_phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn fifty_directions_per_second() {
        let p = PerturbationSchedule::random(40.0, &mut rng_from_seed(1));
        assert_eq!(p.direction_angles.len(), 50);
        assert!(p.direction_angles.iter().all(|a| (0.0..TAU).contains(a)));
    }

    #[test]
    fn piecewise_constant_horizontal_force() {
        let p = PerturbationSchedule::random(40.0, &mut rng_from_seed(2));
        for k in 0..100 {
            let t = k as f64 * 0.01;
            let f = p.force_at(t);
            assert_eq!(f.z, 0.0);
            assert!((f.norm() - 40.0).abs() < 1e-9);
            let a = p.direction_angles[k / 2];
            assert!((f - Vector3::new(a.cos(), a.sin(), 0.0) * 40.0).norm() < 1e-12);
        }
        assert_eq!(p.force_at(1.0), Vector3::zeros());
        assert_eq!(p.force_at(1.5), Vector3::zeros());
        assert!(p.finished_by(1.0));
        assert!(!p.finished_by(0.99));
    }

    #[test]
    fn mirror_flips_x_component() {
        let p = PerturbationSchedule::random(10.0, &mut rng_from_seed(3));
        let m = p.mirrored_x();
        for k in 0..100 {
            let t = k as f64 * 0.01;
            let (f, g) = (p.force_at(t), m.force_at(t));
            assert!((f.x + g.x).abs() < 1e-12 && (f.y - g.y).abs() < 1e-12);
        }
    }
}
