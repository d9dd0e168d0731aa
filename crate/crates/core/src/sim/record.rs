//! Trajectory records and their CSV/manifest serialization.
//!
//! Column orders are part of the tool's contract (documented in the README)
//! and parsed back by the `analyze` subcommand:
//!
//! - `trajectory.csv`: step,time,particle,gid,cx,cy,cz,qs,qx,qy,qz,
//!   ux,uy,uz,wx,wy,wz,fcx,fcy,fcz
//! - `constraints.csv`: step,kind,gid_i,gid_j,phi,nx,ny,nz,gamma
//! - `solver_stats.csv`: step,n_constraints,gd_steps,mvops,residual,
//!   converged,certified,krylov_unc,krylov_col,min_phi_post,
//!   net_fx,net_fy,net_fz
//!
//! Floats are written with Rust's shortest round-trip formatting, so runs
//! with identical configuration and seed produce byte-identical files.

use crate::error::Result;
use crate::math::Vec3;
use crate::sim::config::SimulationConfig;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct ParticleRecord {
    pub gid: usize,
    pub center: Vec3,
    pub orientation: [f64; 4],
    pub velocity: [f64; 6],
    pub collision_force: Vec3,
}

#[derive(Debug, Clone)]
pub struct ConstraintRecord {
    /// `pair` or `wall`.
    pub kind: &'static str,
    pub gid_i: usize,
    /// Partner gid for pairs, wall index for walls.
    pub gid_j: usize,
    pub separation: f64,
    pub normal: Vec3,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct SolverRecord {
    pub step: usize,
    pub n_constraints: usize,
    pub gd_steps: usize,
    pub mvops: usize,
    pub residual: f64,
    pub converged: bool,
    /// Certificate outcome when enabled: gamma >= 0, gradient >= -tol,
    /// complementarity within tol.
    pub certified: Option<bool>,
    pub krylov_unc: usize,
    pub krylov_collision: usize,
    /// Minimum pair separation at collision radii after the step.
    pub min_phi_post: f64,
    /// Net collision force over all particles (wall reactions excluded).
    pub net_collision_force: Vec3,
    /// Sum of wall constraint loads, `sum gamma_l n_l` over wall columns.
    pub wall_reaction: Vec3,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub particles: Vec<ParticleRecord>,
    pub constraints: Vec<ConstraintRecord>,
}

/// Everything a finished run hands back to callers and the CLI.
pub struct SimulationOutcome {
    pub steps: Vec<StepRecord>,
    pub solver: Vec<SolverRecord>,
    pub final_particles: crate::kinematics::ParticleSet,
    pub final_velocities: crate::kinematics::VelocityVector,
    pub warnings: Vec<String>,
}

impl SimulationOutcome {
    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from(
            "step,time,particle,gid,cx,cy,cz,qs,qx,qy,qz,ux,uy,uz,wx,wy,wz,fcx,fcy,fcz\n",
        );
        for rec in &self.steps {
            for (i, p) in rec.particles.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    rec.step,
                    rec.time,
                    i,
                    p.gid,
                    p.center[0],
                    p.center[1],
                    p.center[2],
                    p.orientation[0],
                    p.orientation[1],
                    p.orientation[2],
                    p.orientation[3],
                    p.velocity[0],
                    p.velocity[1],
                    p.velocity[2],
                    p.velocity[3],
                    p.velocity[4],
                    p.velocity[5],
                    p.collision_force[0],
                    p.collision_force[1],
                    p.collision_force[2],
                );
            }
        }
        s
    }

    pub fn constraints_csv(&self) -> String {
        let mut s = String::from("step,kind,gid_i,gid_j,phi,nx,ny,nz,gamma\n");
        for rec in &self.steps {
            for c in &rec.constraints {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    rec.step,
                    c.kind,
                    c.gid_i,
                    c.gid_j,
                    c.separation,
                    c.normal[0],
                    c.normal[1],
                    c.normal[2],
                    c.gamma,
                );
            }
        }
        s
    }

    pub fn solver_stats_csv(&self) -> String {
        let mut s = String::from(
            "step,n_constraints,gd_steps,mvops,residual,converged,certified,krylov_unc,krylov_col,min_phi_post,net_fx,net_fy,net_fz\n",
        );
        for r in &self.solver {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.n_constraints,
                r.gd_steps,
                r.mvops,
                r.residual,
                r.converged,
                r.certified.map_or("na".to_string(), |b| b.to_string()),
                r.krylov_unc,
                r.krylov_collision,
                r.min_phi_post,
                r.net_collision_force[0],
                r.net_collision_force[1],
                r.net_collision_force[2],
            );
        }
        s
    }

    pub fn manifest(&self, cfg: &SimulationConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = stokesim {}", crate::VERSION);
        for (k, v) in cfg.manifest_entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }

    /// Write the four output files into `dir` (created if missing).
    pub fn write_outputs(&self, dir: &Path, cfg: &SimulationConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trajectory.csv"), self.trajectory_csv())?;
        std::fs::write(dir.join("constraints.csv"), self.constraints_csv())?;
        std::fs::write(dir.join("solver_stats.csv"), self.solver_stats_csv())?;
        std::fs::write(dir.join("manifest.txt"), self.manifest(cfg))?;
        Ok(())
    }
}
