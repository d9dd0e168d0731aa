//! Isolated-sphere drag: the cheapest possible mobility, no hydrodynamic
//! coupling at all. `U = F/(6 pi eta a)`, `W = T/(8 pi eta a^3)`.

use super::{MobilityBackend, TorqueCoupling};
use crate::error::Result;
use crate::kinematics::{ForceTorqueVector, ParticleSet, VelocityVector};
use std::f64::consts::PI;

pub struct LocalDragMobility;

impl MobilityBackend for LocalDragMobility {
    fn name(&self) -> &'static str {
        "local"
    }

    fn torque_coupling(&self) -> TorqueCoupling {
        TorqueCoupling::DiagonalOnly
    }

    fn apply(&self, particles: &ParticleSet, load: &ForceTorqueVector) -> Result<VelocityVector> {
        let n = particles.len();
        let eta = particles.viscosity;
        let mut u = VelocityVector::zeros(n);
        for (i, p) in particles.particles.iter().enumerate() {
            let ft = 1.0 / (6.0 * PI * eta * p.radius);
            let rt = 1.0 / (8.0 * PI * eta * p.radius.powi(3));
            for k in 0..3 {
                u.0[6 * i + k] = load.0[6 * i + k] * ft;
                u.0[6 * i + 3 + k] = load.0[6 * i + 3 + k] * rt;
            }
        }
        Ok(u)
    }
}
