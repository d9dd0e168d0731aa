//! Near-pair detection and the sparse collision geometry.
//!
//! Each candidate contact `l` carries a minimal separation `phi_l` and a unit
//! normal pointing from the second body toward the first, so a nonnegative
//! force magnitude `gamma_l` pushes the pair apart. The sparse matrix `D`
//! maps per-constraint magnitudes to per-particle force/torque vectors; for
//! spheres every pair column has two opposite 3-vector force blocks and no
//! torque entries, and its transpose gives separation rates under rigid
//! motion.

use crate::error::{Result, SimError};
use crate::kinematics::{ForceTorqueVector, ParticleSet, VelocityVector};
use crate::math::{self, Vec3};
use crate::neighbor::CellList;

/// A static plane boundary `normal . x = offset`, with particles on the
/// `normal` side. The wall does not move and takes no mobility solve.
#[derive(Debug, Clone)]
pub struct PlaneWall {
    pub normal: Vec3,
    pub offset: f64,
}

impl PlaneWall {
    pub fn new(normal: Vec3, offset: f64) -> Self {
        PlaneWall {
            normal: math::normalize(normal),
            offset,
        }
    }

    /// Separation between the sphere surface (at collision radius) and the
    /// plane.
    pub fn separation(&self, center: Vec3, collision_radius: f64) -> f64 {
        math::dot(self.normal, center) - self.offset - collision_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Sphere-sphere contact; stores the partner's storage index.
    Pair { j: usize },
    /// Sphere against a static plane wall.
    Wall { wall: usize },
}

/// One candidate contact.
#[derive(Debug, Clone)]
pub struct ContactConstraint {
    /// Storage index of the first particle.
    pub i: usize,
    pub kind: ConstraintKind,
    /// Global ids used for deterministic ordering and trajectory analysis;
    /// for walls `gid_j` is `usize::MAX - wall`.
    pub gid_i: usize,
    pub gid_j: usize,
    /// Minimal separation at collision radii; negative when overlapping.
    pub separation: f64,
    /// Unit normal pointing from body `j` (or the wall) toward body `i`.
    pub normal: Vec3,
}

/// The assembled constraint set: the candidate list plus `D` in implicit
/// (per-constraint sparse column) form.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSystem {
    pub constraints: Vec<ContactConstraint>,
    n_particles: usize,
}

/// Policy for the near-pair threshold: pair `(i, j)` is a candidate when
/// `phi_ij <= factor * (a_ci + a_cj)`.
#[derive(Debug, Clone, Copy)]
pub struct DeltaPolicy {
    pub factor: f64,
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        // 30% of the summed collision radii
        DeltaPolicy { factor: 0.3 }
    }
}

/// Minimal separation and contact normal for two spheres at collision radii.
/// The normal points from `j` toward `i`.
pub fn min_separation_spheres(c_i: Vec3, a_ci: f64, c_j: Vec3, a_cj: f64) -> Result<(f64, Vec3)> {
    let d = math::sub(c_i, c_j);
    let dist = math::norm(d);
    if dist == 0.0 {
        return Err(SimError::CoincidentCenters { i: 0, j: 0 });
    }
    Ok((dist - a_ci - a_cj, math::scale(d, 1.0 / dist)))
}

/// All unordered pairs with separation within the policy threshold, each
/// appearing once, ordered by global id (`gid_i < gid_j`). The result does
/// not depend on particle storage order.
pub fn detect_near_pairs(particles: &ParticleSet, policy: DeltaPolicy) -> Vec<(usize, usize)> {
    let max_ac = particles
        .particles
        .iter()
        .map(|p| p.collision_radius)
        .fold(0.0_f64, f64::max);
    if particles.len() < 2 || max_ac == 0.0 {
        return Vec::new();
    }
    let edge = (1.0 + policy.factor) * 2.0 * max_ac;
    let list = CellList::build(particles, edge);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    list.for_each_candidate_pair(|i, j| {
        let pi = &particles.particles[i];
        let pj = &particles.particles[j];
        let (phi, _) = min_separation_spheres(
            pi.center,
            pi.collision_radius,
            pj.center,
            pj.collision_radius,
        )
        .expect("coincident centers in near-pair detection");
        if phi <= policy.factor * (pi.collision_radius + pj.collision_radius) {
            pairs.push((i, j));
        }
    });
    pairs.sort_unstable_by_key(|&(i, j)| {
        let gi = particles.particles[i].global_id;
        let gj = particles.particles[j].global_id;
        (gi.min(gj), gi.max(gj))
    });
    pairs.dedup();
    pairs
}

/// Assemble the constraint system from detected pairs and wall proximity.
/// Wall constraints are appended for every particle within the policy
/// threshold of a wall (threshold `factor * 2 a_ci`).
pub fn build_constraint_system(
    particles: &ParticleSet,
    pairs: &[(usize, usize)],
    walls: &[PlaneWall],
    policy: DeltaPolicy,
) -> Result<ConstraintSystem> {
    let mut constraints = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let pi = &particles.particles[i];
        let pj = &particles.particles[j];
        let (phi, normal) = min_separation_spheres(
            pi.center,
            pi.collision_radius,
            pj.center,
            pj.collision_radius,
        )
        .map_err(|_| SimError::CoincidentCenters { i, j })?;
        let (gid_i, gid_j, i_store, normal) = if pi.global_id < pj.global_id {
            (pi.global_id, pj.global_id, (i, j), normal)
        } else {
            (
                pj.global_id,
                pi.global_id,
                (j, i),
                math::scale(normal, -1.0),
            )
        };
        constraints.push(ContactConstraint {
            i: i_store.0,
            kind: ConstraintKind::Pair { j: i_store.1 },
            gid_i,
            gid_j,
            separation: phi,
            normal,
        });
    }
    for (w, wall) in walls.iter().enumerate() {
        for (i, p) in particles.particles.iter().enumerate() {
            let phi = wall.separation(p.center, p.collision_radius);
            if phi <= policy.factor * 2.0 * p.collision_radius {
                constraints.push(ContactConstraint {
                    i,
                    kind: ConstraintKind::Wall { wall: w },
                    gid_i: p.global_id,
                    gid_j: usize::MAX - w,
                    separation: phi,
                    normal: wall.normal,
                });
            }
        }
    }
    // pairs first (already ordered), then walls by (wall, gid)
    let n_pairs = pairs.len();
    constraints[n_pairs..].sort_unstable_by_key(|c| (c.gid_j, c.gid_i));
    Ok(ConstraintSystem {
        constraints,
        n_particles: particles.len(),
    })
}

impl ConstraintSystem {
    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn separations(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.separation).collect()
    }

    /// `F_c = D gamma`: scatter per-constraint magnitudes into per-particle
    /// forces. Normal contacts on spheres produce no torques.
    pub fn apply_d(&self, gamma: &[f64]) -> Result<ForceTorqueVector> {
        if gamma.len() != self.constraints.len() {
            return Err(SimError::DimensionMismatch {
                context: "apply_d",
                expected: self.constraints.len(),
                got: gamma.len(),
            });
        }
        let mut f = ForceTorqueVector::zeros(self.n_particles);
        for (c, &g) in self.constraints.iter().zip(gamma.iter()) {
            let push = math::scale(c.normal, g);
            f.0[6 * c.i] += push[0];
            f.0[6 * c.i + 1] += push[1];
            f.0[6 * c.i + 2] += push[2];
            if let ConstraintKind::Pair { j } = c.kind {
                f.0[6 * j] -= push[0];
                f.0[6 * j + 1] -= push[1];
                f.0[6 * j + 2] -= push[2];
            }
        }
        Ok(f)
    }

    /// `D^T u`: per-constraint separation rates under the rigid motion `u`.
    pub fn apply_d_transpose(&self, u: &VelocityVector) -> Result<Vec<f64>> {
        if u.0.len() != 6 * self.n_particles {
            return Err(SimError::DimensionMismatch {
                context: "apply_d_transpose",
                expected: 6 * self.n_particles,
                got: u.0.len(),
            });
        }
        let mut out = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let ui = u.translational(c.i);
            let mut rate = math::dot(c.normal, ui);
            if let ConstraintKind::Pair { j } = c.kind {
                rate -= math::dot(c.normal, u.translational(j));
            }
            out.push(rate);
        }
        Ok(out)
    }

    /// Net collision force summed over all particles (force blocks only).
    /// Zero whenever no wall constraints carry load.
    pub fn net_force(&self, gamma: &[f64]) -> Vec3 {
        let mut net = [0.0; 3];
        for (c, &g) in self.constraints.iter().zip(gamma.iter()) {
            if let ConstraintKind::Wall { .. } = c.kind {
                net = math::add(net, math::scale(c.normal, g));
            }
        }
        net
    }
}
