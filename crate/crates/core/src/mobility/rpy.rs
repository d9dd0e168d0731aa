//! Pairwise Rotne-Prager-Yamakawa mobility, generalized to unequal radii.
//!
//! Translational blocks use the two-sphere RPY tensor of Zuk et al. (J. Fluid
//! Mech. 741, 2014), which stays symmetric positive definite for every
//! configuration, including overlapping spheres:
//!
//! far field, `r > a_i + a_j`:
//! ```text
//! mu_ij = 1/(8 pi eta r) [ (1 + (a_i^2 + a_j^2)/(3 r^2)) I
//!                        + (1 - (a_i^2 + a_j^2)/r^2) rhat rhat ]
//! ```
//! overlapping, `|a_i - a_j| < r <= a_i + a_j`:
//! ```text
//! mu_ij = 1/(6 pi eta a_i a_j) [ (16 r^3 (a_i+a_j) - ((a_i-a_j)^2 + 3 r^2)^2)/(32 r^3) I
//!                              + 3 ((a_i-a_j)^2 - r^2)^2/(32 r^3) rhat rhat ]
//! ```
//! fully enclosed, `r <= |a_i - a_j|`: `mu_ij = I / (6 pi eta max(a_i, a_j))`.
//!
//! The two branches meet continuously at `r = a_i + a_j`. Angular velocities
//! come from the isolated-sphere rotational drag only; sphere contacts carry
//! no torque, so the collision operator never probes the missing blocks.
//! Scenarios driven by torques need the boundary-integral backend instead.

use super::{MobilityBackend, TorqueCoupling};
use crate::error::{Result, SimError};
use crate::kinematics::{ForceTorqueVector, ParticleSet, VelocityVector};
use crate::math::{self, Vec3};
use rayon::prelude::*;
use std::f64::consts::PI;

pub struct RpyMobility;

/// Velocity at sphere `i` induced by force `f` on sphere `j`.
fn pair_velocity(eta: f64, a_i: f64, a_j: f64, d: Vec3, f: Vec3) -> Result<Vec3> {
    let r = math::norm(d);
    if r == 0.0 {
        return Err(SimError::CoincidentCenters { i: 0, j: 0 });
    }
    let rhat = math::scale(d, 1.0 / r);
    let fr = math::dot(f, rhat);
    let (ci, cr) = if r > a_i + a_j {
        let s = (a_i * a_i + a_j * a_j) / (r * r);
        let pre = 1.0 / (8.0 * PI * eta * r);
        (pre * (1.0 + s / 3.0), pre * (1.0 - s))
    } else if r > (a_i - a_j).abs() {
        let diff2 = (a_i - a_j) * (a_i - a_j);
        let pre = 1.0 / (6.0 * PI * eta * a_i * a_j);
        let iso =
            (16.0 * r.powi(3) * (a_i + a_j) - (diff2 + 3.0 * r * r).powi(2)) / (32.0 * r.powi(3));
        let rad = 3.0 * (diff2 - r * r).powi(2) / (32.0 * r.powi(3));
        (pre * iso, pre * rad)
    } else {
        (1.0 / (6.0 * PI * eta * a_i.max(a_j)), 0.0)
    };
    Ok(math::add(math::scale(f, ci), math::scale(rhat, cr * fr)))
}

impl MobilityBackend for RpyMobility {
    fn name(&self) -> &'static str {
        "rpy"
    }

    fn torque_coupling(&self) -> TorqueCoupling {
        TorqueCoupling::DiagonalOnly
    }

    fn apply(&self, particles: &ParticleSet, load: &ForceTorqueVector) -> Result<VelocityVector> {
        let n = particles.len();
        if load.0.len() != 6 * n {
            return Err(SimError::DimensionMismatch {
                context: "rpy_apply",
                expected: 6 * n,
                got: load.0.len(),
            });
        }
        let eta = particles.viscosity;
        let blocks: Vec<Result<[f64; 6]>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let pi = &particles.particles[i];
                let mut v = [0.0; 3];
                for (j, pj) in particles.particles.iter().enumerate() {
                    let f = load.force(j);
                    if i == j {
                        let self_mob = 1.0 / (6.0 * PI * eta * pi.radius);
                        v = math::add(v, math::scale(f, self_mob));
                    } else {
                        let d = math::sub(pi.center, pj.center);
                        let dv = pair_velocity(eta, pi.radius, pj.radius, d, f)
                            .map_err(|_| SimError::CoincidentCenters { i, j })?;
                        v = math::add(v, dv);
                    }
                }
                let rot = 1.0 / (8.0 * PI * eta * pi.radius.powi(3));
                let t = load.torque(i);
                Ok([v[0], v[1], v[2], rot * t[0], rot * t[1], rot * t[2]])
            })
            .collect();
        let mut u = VelocityVector::zeros(n);
        for (i, b) in blocks.into_iter().enumerate() {
            let b = b?;
            u.0[6 * i..6 * i + 6].copy_from_slice(&b);
        }
        Ok(u)
    }
}
