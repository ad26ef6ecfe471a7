//! Semi-implicit Euler integration with a sequential-impulse contact solver.
//!
//! Per step: gather contacts at the current poses, integrate gravity and
//! external forces into velocities, solve contacts (normal impulses clamped
//! non-negative, friction clamped per tangent at mu times the normal impulse,
//! Baumgarte bias on penetration beyond the slop), then integrate poses.
//!
//! Contacts are solved in an order keyed on body identity and a quantized
//! contact position whose x coordinate is oriented by the sign of the summed
//! body x positions. Mirroring the world in x maps that order onto itself,
//! so mirrored worlds follow mirrored trajectories.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::contact::{contact_manifold_into, Collider, Contact};
use super::{RigidBody, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Magnitude of gravitational acceleration along -z.
    pub gravity: f64,
    pub friction_mu: f64,
    pub restitution: f64,
    pub solver_iterations: usize,
    pub baumgarte_beta: f64,
    pub penetration_slop: f64,
    /// Approach speed below which contacts do not bounce.
    pub restitution_threshold: f64,
    /// Solver blow-up guard on linear speed and corner speed.
    pub max_speed: f64,
    /// Early exit once every body stays below these speeds for
    /// `rest_steps` consecutive steps with no force left to apply; 0 disables.
    pub rest_linear_tol: f64,
    pub rest_angular_tol: f64,
    pub rest_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 2.0,
            gravity: 9.81,
            friction_mu: 0.2,
            restitution: 0.2,
            solver_iterations: 10,
            baumgarte_beta: 0.2,
            penetration_slop: 0.005,
            restitution_threshold: 1.0,
            max_speed: 100.0,
            rest_linear_tol: 1e-3,
            rest_angular_tol: 1e-3,
            rest_steps: 25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.duration >= 0.0) {
            return bad("duration must be non-negative");
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return bad("duration must be a multiple of dt");
        }
        if self.solver_iterations == 0 {
            return bad("solver_iterations must be positive");
        }
        if self.friction_mu < 0.0 || !(0.0..=1.0).contains(&self.restitution) {
            return bad("friction must be >= 0 and restitution in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.baumgarte_beta) || self.penetration_slop < 0.0 {
            return bad("baumgarte_beta must be in [0, 1] and slop >= 0");
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Same settings with early exit disabled.
    pub fn without_rest_exit(self) -> Self {
        Self { rest_steps: 0, ..self }
    }
}

/// A force applied at a world-space point for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalForce {
    pub body: usize,
    pub force: Vector3<f64>,
    pub point: Vector3<f64>,
}

#[derive(Debug, Clone, Copy)]
struct CachedImpulse {
    a: usize,
    b: Option<usize>,
    local: Vector3<f64>,
    normal: f64,
    tangent: Vector3<f64>,
}

type OrderKey = (u8, usize, usize, i64, i64, i64);

#[derive(Debug, Clone, Copy)]
struct Row {
    a: usize,
    b: Option<usize>,
    key: OrderKey,
    local: Vector3<f64>,
    ra: Vector3<f64>,
    rb: Vector3<f64>,
    n: Vector3<f64>,
    t1: Vector3<f64>,
    t2: Vector3<f64>,
    penetration: f64,
    mass_n: f64,
    mass_t1: f64,
    mass_t2: f64,
    bias: f64,
    jn: f64,
    jt1: f64,
    jt2: f64,
}

/// Cubes on a ground plane.
#[derive(Debug, Clone)]
pub struct World {
    pub bodies: Vec<RigidBody>,
    pub config: SimConfig,
    cache: Vec<CachedImpulse>,
    rows: Vec<Row>,
    scratch: Vec<Contact>,
    steps: usize,
}

const KEY_SCALE: f64 = 1e7;

fn quantize(v: f64) -> i64 {
    (v * KEY_SCALE).round() as i64
}

fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let mut t1 = n.cross(&Vector3::y());
    if t1.norm_squared() < 0.1 {
        t1 = n.cross(&Vector3::z());
    }
    let t1 = t1.normalize();
    (t1, n.cross(&t1))
}

impl World {
    pub fn new(bodies: Vec<RigidBody>, config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Self { bodies, config, cache: Vec::new(), rows: Vec::new(), scratch: Vec::new(), steps: 0 })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    /// Kinetic plus gravitational potential energy (ground at z = 0).
    pub fn mechanical_energy(&self) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.kinetic_energy() + b.mass * self.config.gravity * b.position.z)
            .sum()
    }

    fn orientation_sign(&self) -> f64 {
        let sx: f64 = self.bodies.iter().map(|b| b.position.x).sum();
        if sx != 0.0 {
            return sx.signum();
        }
        let vx: f64 = self.bodies.iter().map(|b| b.linear_velocity.x).sum();
        if vx != 0.0 {
            vx.signum()
        } else {
            1.0
        }
    }

    fn collect_contacts(&mut self) {
        self.rows.clear();
        let sign = self.orientation_sign();
        let n = self.bodies.len();
        let push = |rows: &mut Vec<Row>, a: usize, b: Option<usize>, c: &Contact, bodies: &[RigidBody]| {
            let body_a = &bodies[a];
            let (t1, t2) = tangent_basis(&c.normal);
            let key = (
                b.is_some() as u8,
                b.unwrap_or(0),
                a,
                quantize(sign * c.point.x),
                quantize(c.point.y),
                quantize(c.point.z),
            );
            rows.push(Row {
                a,
                b,
                key,
                local: body_a.to_local(&c.point),
                ra: c.point - body_a.position,
                rb: b.map_or(Vector3::zeros(), |b| c.point - bodies[b].position),
                n: c.normal,
                t1,
                t2,
                penetration: c.penetration,
                mass_n: 0.0,
                mass_t1: 0.0,
                mass_t2: 0.0,
                bias: 0.0,
                jn: 0.0,
                jt1: 0.0,
                jt2: 0.0,
            });
        };
        for a in 0..n {
            self.scratch.clear();
            contact_manifold_into(&self.bodies[a], Collider::Ground, &mut self.scratch);
            for c in &self.scratch {
                push(&mut self.rows, a, None, c, &self.bodies);
            }
        }
        for b in 0..n {
            for a in b + 1..n {
                self.scratch.clear();
                contact_manifold_into(&self.bodies[a], Collider::Body(&self.bodies[b]), &mut self.scratch);
                for c in &self.scratch {
                    push(&mut self.rows, a, Some(b), c, &self.bodies);
                }
            }
        }
        self.rows.sort_by_key(|r| r.key);
    }

    /// Advances the world by one `dt`.
    pub fn step(&mut self, forces: &[ExternalForce]) -> Result<(), SimError> {
        let cfg = self.config;
        let dt = cfg.dt;
        self.collect_contacts();

        let n = self.bodies.len();
        let mut v: Vec<Vector3<f64>> = Vec::with_capacity(n);
        let mut w: Vec<Vector3<f64>> = Vec::with_capacity(n);
        let mut inv_m = Vec::with_capacity(n);
        let mut inv_i = Vec::with_capacity(n);
        for b in &self.bodies {
            v.push(b.linear_velocity - Vector3::z() * (cfg.gravity * dt));
            w.push(b.angular_velocity);
            inv_m.push(b.inv_mass());
            inv_i.push(b.inv_inertia());
        }
        for f in forces {
            let body = &self.bodies[f.body];
            v[f.body] += f.force * (inv_m[f.body] * dt);
            w[f.body] += (f.point - body.position).cross(&f.force) * (inv_i[f.body] * dt);
        }

        // prestep
        for row in &mut self.rows {
            let (a, b) = (row.a, row.b);
            let k_of = |dir: &Vector3<f64>| {
                let mut k = inv_m[a] + inv_i[a] * row.ra.cross(dir).norm_squared();
                if let Some(b) = b {
                    k += inv_m[b] + inv_i[b] * row.rb.cross(dir).norm_squared();
                }
                k
            };
            row.mass_n = 1.0 / k_of(&row.n);
            row.mass_t1 = 1.0 / k_of(&row.t1);
            row.mass_t2 = 1.0 / k_of(&row.t2);

            let mut dv = v[a] + w[a].cross(&row.ra);
            if let Some(b) = b {
                dv -= v[b] + w[b].cross(&row.rb);
            }
            let vn = dv.dot(&row.n);
            let bounce = if vn < -cfg.restitution_threshold { -cfg.restitution * vn } else { 0.0 };
            let push_out = cfg.baumgarte_beta / dt * (row.penetration - cfg.penetration_slop).max(0.0);
            row.bias = bounce.max(push_out);
        }

        // warm start only after every bias has seen the unimpulsed velocities
        for row in &mut self.rows {
            let (a, b) = (row.a, row.b);
            let tol = 0.05 * self.bodies[a].side();
            let mut best: Option<(f64, &CachedImpulse)> = None;
            for c in self.cache.iter().filter(|c| c.a == a && c.b == b) {
                let d = (c.local - row.local).norm_squared();
                if d < tol * tol && best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, c));
                }
            }
            if let Some((_, c)) = best {
                row.jn = c.normal;
                row.jt1 = c.tangent.dot(&row.t1);
                row.jt2 = c.tangent.dot(&row.t2);
                let limit = cfg.friction_mu * row.jn;
                row.jt1 = row.jt1.clamp(-limit, limit);
                row.jt2 = row.jt2.clamp(-limit, limit);
                let p = row.n * row.jn + row.t1 * row.jt1 + row.t2 * row.jt2;
                apply(&mut v, &mut w, &inv_m, &inv_i, row, &p);
            }
        }

        for _ in 0..cfg.solver_iterations {
            for row in &mut self.rows {
                let (a, b) = (row.a, row.b);
                let rel = |v: &[Vector3<f64>], w: &[Vector3<f64>]| {
                    let mut dv = v[a] + w[a].cross(&row.ra);
                    if let Some(b) = b {
                        dv -= v[b] + w[b].cross(&row.rb);
                    }
                    dv
                };
                let limit = cfg.friction_mu * row.jn;
                let dv = rel(&v, &w);
                let new_t1 = (row.jt1 - row.mass_t1 * dv.dot(&row.t1)).clamp(-limit, limit);
                let d1 = new_t1 - row.jt1;
                row.jt1 = new_t1;
                let p = row.t1 * d1;
                apply(&mut v, &mut w, &inv_m, &inv_i, row, &p);

                let dv = rel(&v, &w);
                let new_t2 = (row.jt2 - row.mass_t2 * dv.dot(&row.t2)).clamp(-limit, limit);
                let d2 = new_t2 - row.jt2;
                row.jt2 = new_t2;
                let p = row.t2 * d2;
                apply(&mut v, &mut w, &inv_m, &inv_i, row, &p);

                let dv = rel(&v, &w);
                let new_n = (row.jn + row.mass_n * (row.bias - dv.dot(&row.n))).max(0.0);
                let dn = new_n - row.jn;
                row.jn = new_n;
                let p = row.n * dn;
                apply(&mut v, &mut w, &inv_m, &inv_i, row, &p);
            }
        }

        self.cache.clear();
        self.cache.extend(self.rows.iter().map(|r| CachedImpulse {
            a: r.a,
            b: r.b,
            local: r.local,
            normal: r.jn,
            tangent: r.t1 * r.jt1 + r.t2 * r.jt2,
        }));

        for (idx, body) in self.bodies.iter_mut().enumerate() {
            body.linear_velocity = v[idx];
            body.angular_velocity = w[idx];
            body.position += v[idx] * dt;
            let q = body.orientation.into_inner();
            let dq = Quaternion::from_imag(w[idx]) * q * (0.5 * dt);
            body.orientation = UnitQuaternion::from_quaternion(q + dq);
            let speed = v[idx].norm().max(w[idx].norm() * body.bounding_radius());
            if !(speed <= cfg.max_speed) {
                return Err(SimError::Divergence { seed: None, step: self.steps, body: idx, speed });
            }
        }
        self.steps += 1;
        Ok(())
    }

    pub fn at_rest(&self) -> bool {
        self.bodies.iter().all(|b| {
            b.linear_velocity.norm() < self.config.rest_linear_tol
                && b.angular_velocity.norm() < self.config.rest_angular_tol
        })
    }
}

fn apply(
    v: &mut [Vector3<f64>],
    w: &mut [Vector3<f64>],
    inv_m: &[f64],
    inv_i: &[f64],
    row: &Row,
    p: &Vector3<f64>,
) {
    v[row.a] += p * inv_m[row.a];
    w[row.a] += row.ra.cross(p) * inv_i[row.a];
    if let Some(b) = row.b {
        v[b] -= p * inv_m[b];
        w[b] -= row.rb.cross(p) * inv_i[b];
    }
}

/// Advances `world` by one step under `forces`.
pub fn step_world(world: &mut World, forces: &[ExternalForce]) -> Result<(), SimError> {
    world.step(forces)
}
