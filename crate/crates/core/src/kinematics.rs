//! Rigid-body state for N spheres and constrained explicit time stepping.
//!
//! Orientations are unit quaternions `(s, p)` stored scalar-first. The
//! kinematic map advances a quaternion at angular velocity `w` through
//! `dq/dt = 0.5 * (-p.w, s w + w x p)`, and every step renormalizes the
//! quaternion so first-order stepping cannot accumulate norm drift.

use crate::error::{Result, SimError};
use crate::math::{self, Vec3};

/// One rigid sphere. `radius` is the physical (hydrodynamic) radius,
/// `collision_radius` the slightly inflated radius at which contacts are
/// resolved; `collision_radius >= radius > 0` always.
#[derive(Debug, Clone)]
pub struct Particle {
    pub center: Vec3,
    /// Unit quaternion, scalar first: `(s, px, py, pz)`.
    pub orientation: [f64; 4],
    pub radius: f64,
    pub collision_radius: f64,
    /// Globally unique id, a permutation of `0..N`, decoupled from storage
    /// order so that constraint ordering does not depend on memory layout.
    pub global_id: usize,
}

impl Particle {
    pub fn sphere(center: Vec3, radius: f64, collision_radius: f64, global_id: usize) -> Self {
        Particle {
            center,
            orientation: [1.0, 0.0, 0.0, 0.0],
            radius,
            collision_radius,
            global_id,
        }
    }
}

/// The full configuration of a suspension: spheres plus the (global) fluid
/// viscosity.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub viscosity: f64,
}

impl ParticleSet {
    pub fn new(particles: Vec<Particle>, viscosity: f64) -> Result<Self> {
        for (i, p) in particles.iter().enumerate() {
            if !(p.radius > 0.0) || p.collision_radius < p.radius {
                return Err(SimError::InvalidConfig(format!(
                    "particle {i}: need collision_radius >= radius > 0 (got {} / {})",
                    p.collision_radius, p.radius
                )));
            }
        }
        let mut ids: Vec<usize> = particles.iter().map(|p| p.global_id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(k, &id)| k != id) {
            return Err(SimError::InvalidConfig(
                "global ids must form a permutation of 0..N".into(),
            ));
        }
        Ok(ParticleSet {
            particles,
            viscosity,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Pack the state into a 7N configuration vector
    /// `(cx, cy, cz, s, px, py, pz)` per particle.
    pub fn configuration(&self) -> ConfigurationVector {
        let mut data = Vec::with_capacity(7 * self.len());
        for p in &self.particles {
            data.extend_from_slice(&p.center);
            data.extend_from_slice(&p.orientation);
        }
        ConfigurationVector(data)
    }

    /// Overwrite centers and orientations from a configuration vector,
    /// renormalizing each quaternion block.
    pub fn set_configuration(&mut self, c: &ConfigurationVector) -> Result<()> {
        if c.0.len() != 7 * self.len() {
            return Err(SimError::DimensionMismatch {
                context: "set_configuration",
                expected: 7 * self.len(),
                got: c.0.len(),
            });
        }
        for (i, p) in self.particles.iter_mut().enumerate() {
            let b = &c.0[7 * i..7 * i + 7];
            p.center = [b[0], b[1], b[2]];
            let mut q = [b[3], b[4], b[5], b[6]];
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            for v in &mut q {
                *v /= n;
            }
            p.orientation = q;
        }
        Ok(())
    }
}

macro_rules! six_n_vector {
    ($(#[$doc:meta])* $name:ident, $a:ident, $b:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn zeros(n_particles: usize) -> Self {
                $name(vec![0.0; 6 * n_particles])
            }

            pub fn from_vec(v: Vec<f64>) -> Result<Self> {
                if v.len() % 6 != 0 {
                    return Err(SimError::DimensionMismatch {
                        context: concat!(stringify!($name), "::from_vec"),
                        expected: 6 * (v.len() / 6 + 1),
                        got: v.len(),
                    });
                }
                Ok($name(v))
            }

            pub fn n_particles(&self) -> usize {
                self.0.len() / 6
            }

            pub fn $a(&self, i: usize) -> Vec3 {
                [self.0[6 * i], self.0[6 * i + 1], self.0[6 * i + 2]]
            }

            pub fn $b(&self, i: usize) -> Vec3 {
                [self.0[6 * i + 3], self.0[6 * i + 4], self.0[6 * i + 5]]
            }

            pub fn set_blocks(&mut self, i: usize, first: Vec3, second: Vec3) {
                self.0[6 * i..6 * i + 3].copy_from_slice(&first);
                self.0[6 * i + 3..6 * i + 6].copy_from_slice(&second);
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

six_n_vector!(
    /// 6N particle velocities, `(Ux, Uy, Uz, Wx, Wy, Wz)` per particle.
    VelocityVector,
    translational,
    angular
);
six_n_vector!(
    /// 6N particle loads, `(Fx, Fy, Fz, Tx, Ty, Tz)` per particle.
    ForceTorqueVector,
    force,
    torque
);

impl VelocityVector {
    pub fn add_assign(&mut self, other: &VelocityVector) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }
}

/// 7N configuration vector, `(cx, cy, cz, s, px, py, pz)` per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationVector(pub Vec<f64>);

impl ConfigurationVector {
    pub fn n_particles(&self) -> usize {
        self.0.len() / 7
    }
}

/// Quaternion rate for angular velocity `w`:
/// `0.5 * (-p.w, s w + w x p)`.
#[inline]
fn quaternion_rate(q: [f64; 4], w: Vec3) -> [f64; 4] {
    let p = [q[1], q[2], q[3]];
    let wxp = math::cross(w, p);
    [
        -0.5 * math::dot(p, w),
        0.5 * (q[0] * w[0] + wxp[0]),
        0.5 * (q[0] * w[1] + wxp[1]),
        0.5 * (q[0] * w[2] + wxp[2]),
    ]
}

/// Apply the configuration-space kinematic map: translational blocks are
/// copied from `u`, quaternion blocks get the quaternion rate.
pub fn kinematic_map_apply(c: &ConfigurationVector, u: &VelocityVector) -> Result<Vec<f64>> {
    let n = c.n_particles();
    if c.0.len() != 7 * n || u.0.len() != 6 * n {
        return Err(SimError::DimensionMismatch {
            context: "kinematic_map_apply",
            expected: 6 * n,
            got: u.0.len(),
        });
    }
    let mut rate = vec![0.0; 7 * n];
    for i in 0..n {
        let v = u.translational(i);
        let w = u.angular(i);
        let q = [
            c.0[7 * i + 3],
            c.0[7 * i + 4],
            c.0[7 * i + 5],
            c.0[7 * i + 6],
        ];
        let dq = quaternion_rate(q, w);
        rate[7 * i..7 * i + 3].copy_from_slice(&v);
        rate[7 * i + 3..7 * i + 7].copy_from_slice(&dq);
    }
    Ok(rate)
}

/// One explicit Euler step: centers advance by `u*dt`, quaternions by the
/// kinematic rate and are renormalized. Everything else is untouched.
pub fn step_configuration(
    particles: &ParticleSet,
    u_total: &VelocityVector,
    dt: f64,
) -> Result<ParticleSet> {
    if u_total.0.len() != 6 * particles.len() {
        return Err(SimError::DimensionMismatch {
            context: "step_configuration",
            expected: 6 * particles.len(),
            got: u_total.0.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "dt must be positive, got {dt}"
        )));
    }
    for i in 0..particles.len() {
        if u_total.0[6 * i..6 * i + 6].iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteVelocity { particle: i });
        }
    }
    let mut out = particles.clone();
    for (i, p) in out.particles.iter_mut().enumerate() {
        let v = u_total.translational(i);
        let w = u_total.angular(i);
        p.center = math::add(p.center, math::scale(v, dt));
        let dq = quaternion_rate(p.orientation, w);
        let mut q = p.orientation;
        for k in 0..4 {
            q[k] += dq[k] * dt;
        }
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        for v in &mut q {
            *v /= n;
        }
        p.orientation = q;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{mat_vec, quat_to_rotation};

    fn single(center: Vec3) -> ParticleSet {
        ParticleSet::new(vec![Particle::sphere(center, 1.0, 1.05, 0)], 1.0).unwrap()
    }

    #[test]
    fn kinematic_map_zero_angular() {
        let p = single([0.0, 0.0, 0.0]);
        let c = p.configuration();
        let mut u = VelocityVector::zeros(1);
        u.set_blocks(0, [2.0, -1.0, 0.5], [0.0, 0.0, 0.0]);
        let rate = kinematic_map_apply(&c, &u).unwrap();
        assert_eq!(&rate[0..3], &[2.0, -1.0, 0.5]);
        assert_eq!(&rate[3..7], &[0.0; 4]);
    }

    #[test]
    fn kinematic_map_identity_quaternion_spin() {
        // q = (1,0,0,0), w = (0,0,omega): rate = 0.5*(0, 0, 0, omega)
        let p = single([0.0, 0.0, 0.0]);
        let c = p.configuration();
        let mut u = VelocityVector::zeros(1);
        let omega = 0.7;
        u.set_blocks(0, [0.0; 3], [0.0, 0.0, omega]);
        let rate = kinematic_map_apply(&c, &u).unwrap();
        assert_eq!(&rate[0..3], &[0.0; 3]);
        assert!((rate[3]).abs() < 1e-15);
        assert!((rate[4]).abs() < 1e-15);
        assert!((rate[5]).abs() < 1e-15);
        assert!((rate[6] - 0.5 * omega).abs() < 1e-15);
    }

    #[test]
    fn kinematic_map_zero_velocity() {
        let p = single([1.0, 2.0, 3.0]);
        let c = p.configuration();
        let u = VelocityVector::zeros(1);
        let rate = kinematic_map_apply(&c, &u).unwrap();
        assert!(rate.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_zero_velocity_is_identity() {
        let p = single([1.0, -2.0, 0.25]);
        let u = VelocityVector::zeros(1);
        let q = step_configuration(&p, &u, 0.3).unwrap();
        assert_eq!(q.particles[0].center, p.particles[0].center);
        assert_eq!(q.particles[0].orientation, p.particles[0].orientation);
    }

    #[test]
    fn step_translates_center() {
        let p = single([0.0, 0.0, 0.0]);
        let mut u = VelocityVector::zeros(1);
        u.set_blocks(0, [1.0, 0.0, 0.0], [0.0; 3]);
        let q = step_configuration(&p, &u, 0.5).unwrap();
        assert_eq!(q.particles[0].center, [0.5, 0.0, 0.0]);
    }

    #[test]
    fn step_rotation_quarter_turn_matches_exact() {
        // Spin about z until omega*t = pi/2 in many small steps; the body
        // x-axis should land on the lab y-axis to O(dt).
        let omega = 1.0;
        let n_steps = 2000;
        let dt = std::f64::consts::FRAC_PI_2 / (omega * n_steps as f64);
        let mut p = single([0.0, 0.0, 0.0]);
        let mut u = VelocityVector::zeros(1);
        u.set_blocks(0, [0.0; 3], [0.0, 0.0, omega]);
        for _ in 0..n_steps {
            p = step_configuration(&p, &u, dt).unwrap();
        }
        let r = quat_to_rotation(p.particles[0].orientation);
        let body_x = mat_vec(&r, [1.0, 0.0, 0.0]);
        // exact result is (0,1,0)
        assert!((body_x[0]).abs() < 5.0 * dt, "body_x = {body_x:?}");
        assert!((body_x[1] - 1.0).abs() < 5.0 * dt);
        assert!((body_x[2]).abs() < 1e-12);
        let q = p.particles[0].orientation;
        let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_non_finite_velocity() {
        let p = single([0.0; 3]);
        let mut u = VelocityVector::zeros(1);
        u.0[2] = f64::NAN;
        match step_configuration(&p, &u, 0.1) {
            Err(SimError::NonFiniteVelocity { particle }) => assert_eq!(particle, 0),
            other => panic!("expected NonFiniteVelocity, got {other:?}"),
        }
    }

    #[test]
    fn half_steps_compose_exactly_for_translation() {
        let p = single([0.2, 0.1, -0.4]);
        let mut u = VelocityVector::zeros(1);
        u.set_blocks(0, [0.3, -0.7, 0.9], [0.0; 3]);
        let dt = 0.8;
        let one = step_configuration(&p, &u, dt).unwrap();
        let half = step_configuration(&p, &u, dt / 2.0).unwrap();
        let two = step_configuration(&half, &u, dt / 2.0).unwrap();
        assert_eq!(one.particles[0].center, two.particles[0].center);
    }

    #[test]
    fn configuration_roundtrip() {
        let mut p = ParticleSet::new(
            vec![
                Particle::sphere([0.1, 0.2, 0.3], 1.0, 1.05, 1),
                Particle::sphere([4.0, 5.0, 6.0], 0.5, 0.55, 0),
            ],
            1.0,
        )
        .unwrap();
        p.particles[1].orientation = [0.5, 0.5, 0.5, 0.5];
        let c = p.configuration();
        let mut q = p.clone();
        q.set_configuration(&c).unwrap();
        for (a, b) in p.particles.iter().zip(q.particles.iter()) {
            assert_eq!(a.center, b.center);
            for k in 0..4 {
                assert!((a.orientation[k] - b.orientation[k]).abs() < 1e-15);
            }
        }
    }
}
