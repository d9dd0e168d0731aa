//! Mobility backends: linear SPD maps from per-particle forces/torques to
//! rigid-body velocities in unbounded Stokes flow.

mod bi;
mod local;
mod rpy;

pub use bi::{
    apply_completion_l, density_from_force_torque, surface_average_rigid_motion, BiConfig,
    BiMobility,
};
pub use local::LocalDragMobility;
pub use rpy::RpyMobility;

use crate::error::Result;
use crate::kinematics::{ForceTorqueVector, ParticleSet, VelocityVector};
use rand_chacha::ChaCha8Rng;

/// How faithfully a backend couples torques into the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorqueCoupling {
    /// Torques only spin their own sphere (isolated rotational drag).
    DiagonalOnly,
    /// Torques generate flow that moves and spins every sphere.
    Full,
}

/// A mobility solver. The induced bilinear form `<F1, apply(F2)>` must be
/// symmetric and positive definite at the backend's accuracy; this is probed
/// statistically by [`spd_probe`], never enforced at runtime.
pub trait MobilityBackend: Sync {
    fn name(&self) -> &'static str;

    fn torque_coupling(&self) -> TorqueCoupling;

    /// Map 6N forces/torques to 6N velocities for the given configuration.
    fn apply(&self, particles: &ParticleSet, load: &ForceTorqueVector) -> Result<VelocityVector>;

    /// Called once per solve phase with the current configuration; backends
    /// with per-configuration state (grid orientations, precomputed tables)
    /// refresh it here. Stateless backends ignore it.
    fn begin_phase(&mut self, _particles: &ParticleSet, _rng: &mut ChaCha8Rng) {}

    /// Iteration count of the most recent inner linear solve, if any.
    fn last_inner_iterations(&self) -> Option<usize> {
        None
    }

    /// Tolerance at which this backend's symmetry/positivity can be tested.
    /// Analytic backends resolve the form to rounding; the boundary-integral
    /// backend is limited by its truncation order and solver tolerance.
    fn spd_test_tolerance(&self) -> f64 {
        1e-10
    }
}

/// Construct a backend by its config key (`local`, `rpy`, `bi`).
pub fn backend_by_key(key: &str, bi_config: BiConfig) -> Result<Box<dyn MobilityBackend>> {
    match key {
        "local" => Ok(Box::new(LocalDragMobility)),
        "rpy" => Ok(Box::new(RpyMobility)),
        "bi" => Ok(Box::new(BiMobility::new(bi_config))),
        other => Err(crate::error::SimError::InvalidConfig(format!(
            "unknown mobility backend '{other}' (expected local, rpy, or bi)"
        ))),
    }
}

/// Result of one randomized symmetry/positivity probe.
#[derive(Debug, Clone, Copy)]
pub struct SpdReport {
    pub trials: usize,
    /// Worst relative symmetry defect `|<F1,MF2> - <F2,MF1>| / scale`.
    pub worst_symmetry: f64,
    /// Smallest quadratic form `<F,MF>` seen (must stay positive).
    pub min_quadratic: f64,
    pub pass: bool,
}

/// Draw random force/torque pairs and check the bilinear form of the backend
/// is symmetric to `tol` (relative) with a strictly positive diagonal.
pub fn spd_probe(
    backend: &dyn MobilityBackend,
    particles: &ParticleSet,
    trials: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SpdReport> {
    use rand::Rng;
    let n = particles.len();
    let mut worst = 0.0f64;
    let mut min_quad = f64::INFINITY;
    for _ in 0..trials {
        let f1 = ForceTorqueVector::from_vec((0..6 * n).map(|_| rng.gen::<f64>() - 0.5).collect())?;
        let f2 = ForceTorqueVector::from_vec((0..6 * n).map(|_| rng.gen::<f64>() - 0.5).collect())?;
        let u1 = backend.apply(particles, &f1)?;
        let u2 = backend.apply(particles, &f2)?;
        let a: f64 = f1.0.iter().zip(u2.0.iter()).map(|(x, y)| x * y).sum();
        let b: f64 = f2.0.iter().zip(u1.0.iter()).map(|(x, y)| x * y).sum();
        let scale = a.abs().max(b.abs()).max(1e-300);
        worst = worst.max((a - b).abs() / scale);
        let qa: f64 = f1.0.iter().zip(u1.0.iter()).map(|(x, y)| x * y).sum();
        let qb: f64 = f2.0.iter().zip(u2.0.iter()).map(|(x, y)| x * y).sum();
        min_quad = min_quad.min(qa).min(qb);
    }
    Ok(SpdReport {
        trials,
        worst_symmetry: worst,
        min_quadratic: min_quad,
        pass: worst <= tol && min_quad > 0.0,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::kinematics::Particle;
    use rand::Rng;

    /// Random non-overlapping spheres in a box, radii near `a`.
    pub fn random_configuration(
        n: usize,
        box_size: f64,
        min_gap: f64,
        rng: &mut ChaCha8Rng,
    ) -> ParticleSet {
        let mut parts: Vec<Particle> = Vec::new();
        let mut guard = 0;
        while parts.len() < n {
            guard += 1;
            assert!(guard < 200_000, "packing too dense for rejection sampling");
            let c = [
                rng.gen::<f64>() * box_size,
                rng.gen::<f64>() * box_size,
                rng.gen::<f64>() * box_size,
            ];
            let a = 0.8 + 0.4 * rng.gen::<f64>();
            if parts.iter().all(|p: &Particle| {
                crate::math::norm(crate::math::sub(p.center, c)) > p.radius + a + min_gap
            }) {
                parts.push(Particle::sphere(c, a, 1.05 * a, parts.len()));
            }
        }
        ParticleSet::new(parts, 1.0).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::random_configuration;
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn local_drag_probe_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = random_configuration(8, 12.0, 0.1, &mut rng);
        let backend = LocalDragMobility;
        let rep = spd_probe(&backend, &set, 20, backend.spd_test_tolerance(), &mut rng).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn rpy_probe_passes_on_many_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let backend = RpyMobility;
        for _ in 0..100 {
            let set = random_configuration(10, 14.0, 0.05, &mut rng);
            let rep = spd_probe(&backend, &set, 4, backend.spd_test_tolerance(), &mut rng).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn rpy_probe_passes_with_overlapping_collision_states() {
        // collision radii may overlap while physical radii stay in the
        // regularized branch of the kernel
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let backend = RpyMobility;
        for _ in 0..40 {
            let set = random_configuration(8, 9.0, -0.5, &mut rng);
            let rep = spd_probe(&backend, &set, 4, backend.spd_test_tolerance(), &mut rng).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }
}
