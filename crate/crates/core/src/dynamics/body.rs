use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::scene::Block;

/// A rigid cube. A cube's inertia tensor is isotropic, so world and body
/// inertia coincide and a scalar carries it.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBody {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub mass: f64,
    pub half_side: f64,
}

impl RigidBody {
    pub fn cube(position: Vector3<f64>, side: f64, mass: f64) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            mass,
            half_side: 0.5 * side,
        }
    }

    pub fn from_block(block: &Block) -> Self {
        Self { orientation: block.orientation, ..Self::cube(block.center, block.side, block.mass()) }
    }

    pub fn side(&self) -> f64 {
        2.0 * self.half_side
    }

    /// Scalar moment of inertia, m s^2 / 6.
    pub fn inertia(&self) -> f64 {
        self.mass * self.side() * self.side() / 6.0
    }

    pub fn inertia_tensor(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.inertia()
    }

    pub fn inv_mass(&self) -> f64 {
        1.0 / self.mass
    }

    pub fn inv_inertia(&self) -> f64 {
        1.0 / self.inertia()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    /// Velocity of the material point at world offset `r` from the center.
    pub fn velocity_at(&self, r: &Vector3<f64>) -> Vector3<f64> {
        self.linear_velocity + self.angular_velocity.cross(r)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.linear_velocity.norm_squared()
            + 0.5 * self.inertia() * self.angular_velocity.norm_squared()
    }

    /// World-space corners, in a fixed order.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let r = self.rotation();
        let h = self.half_side;
        let mut out = [Vector3::zeros(); 8];
        for (k, c) in out.iter_mut().enumerate() {
            let local = Vector3::new(
                if k & 1 == 0 { -h } else { h },
                if k & 2 == 0 { -h } else { h },
                if k & 4 == 0 { -h } else { h },
            );
            *c = self.position + r * local;
        }
        out
    }

    pub fn to_local(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&(world - self.position))
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_side * 3f64.sqrt()
    }
}
