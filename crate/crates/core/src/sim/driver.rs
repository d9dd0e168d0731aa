//! The per-step loop: non-collisional mobility solve, constraint assembly,
//! complementarity solve, and explicit update.
//!
//! Each time step executes exactly four stages:
//!
//! 1. `U_nc = M F_ext` with fresh grid orientations,
//! 2. build the candidate set and the sparse geometry `D`, `phi`,
//! 3. solve `0 <= gamma perp M_c gamma + q >= 0` with
//!    `M_c = D' M D` applied matrix-free (every evaluation is one mobility
//!    solve) and `q = phi/dt + D' U_nc`, under re-randomized orientations,
//! 4. advance with `U_nc + U_c`, `U_c = M (D gamma)`, and renormalize
//!    quaternions.
//!
//! A converged gamma is optionally certified with one extra operator
//! application; the velocity produced by that application doubles as `U_c`,
//! so certification costs nothing extra. Post-step penetration beyond
//! tolerance is recorded as a warning, never an abort.

use crate::constraint::{build_constraint_system, detect_near_pairs, ConstraintKind, DeltaPolicy};
use crate::cqp::{solve_apgd, solve_bbpgd_with, Certificate, CqpProblem};
use crate::error::{Result, SimError};
use crate::kinematics::{step_configuration, ForceTorqueVector, ParticleSet, VelocityVector};
use crate::math;
use crate::mobility::{backend_by_key, BiConfig, MobilityBackend, TorqueCoupling};
use crate::sim::config::{SimulationConfig, SolverKind};
pub use crate::sim::record::SimulationOutcome;
use crate::sim::record::{ConstraintRecord, ParticleRecord, SolverRecord, StepRecord};
use crate::sim::scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;

fn bi_config(cfg: &SimulationConfig) -> BiConfig {
    BiConfig {
        order: cfg.bi_order,
        beta: cfg.bi_beta,
        gmres_tol: cfg.bi_gmres_tol,
        ..Default::default()
    }
}

/// Outcome of one collision resolution stage.
struct CollisionSolve {
    gamma: Vec<f64>,
    u_c: VelocityVector,
    gd_steps: usize,
    mvops: usize,
    residual: f64,
    converged: bool,
    certified: Option<bool>,
    krylov: usize,
}

fn resolve_collisions(
    backend: &dyn MobilityBackend,
    particles: &ParticleSet,
    system: &crate::constraint::ConstraintSystem,
    u_nc: &VelocityVector,
    cfg: &SimulationConfig,
) -> Result<CollisionSolve> {
    let phi = system.separations();
    let dtu = system.apply_d_transpose(u_nc)?;
    let q: Vec<f64> = phi
        .iter()
        .zip(dtu.iter())
        .map(|(p, r)| p / cfg.dt + r)
        .collect();

    // Every operator application solves one mobility problem. The velocity
    // of the most recent application is cached: after the final (or
    // certifying) evaluation at the returned gamma it is exactly U_c.
    let last_velocity: RefCell<Option<VelocityVector>> = RefCell::new(None);
    let krylov_total = RefCell::new(0usize);
    let apply_error: RefCell<Option<SimError>> = RefCell::new(None);
    let mut apply_m = |gamma: &[f64]| -> Vec<f64> {
        let run = || -> Result<Vec<f64>> {
            let f_c = system.apply_d(gamma)?;
            let u = backend.apply(particles, &f_c)?;
            if let Some(it) = backend.last_inner_iterations() {
                *krylov_total.borrow_mut() += it;
            }
            let out = system.apply_d_transpose(&u)?;
            *last_velocity.borrow_mut() = Some(u);
            Ok(out)
        };
        match run() {
            Ok(v) => v,
            Err(e) => {
                *apply_error.borrow_mut() = Some(e);
                vec![f64::NAN; gamma.len()]
            }
        }
    };

    let mut problem = CqpProblem {
        apply_m: &mut apply_m,
        q: &q,
        tolerance: cfg.epsilon_tol,
        max_steps: cfg.max_gd_steps,
        gamma0: None,
    };
    let solve = match cfg.solver {
        SolverKind::Bbpgd => solve_bbpgd_with(&mut problem, cfg.bb_step),
        SolverKind::Apgd => solve_apgd(&mut problem),
    };
    let (gamma, stats) = match solve {
        Ok(v) => v,
        Err(e) => {
            // surface the underlying mobility failure when there is one
            return Err(apply_error.into_inner().unwrap_or(e));
        }
    };
    if let Some(e) = apply_error.into_inner() {
        return Err(e);
    }

    let mut mvops = stats.mvops;
    // one fresh gradient at the returned gamma; this application also
    // leaves M (D gamma) in the velocity cache, which is exactly U_c
    let g_cert: Vec<f64> = {
        let f_c = system.apply_d(&gamma)?;
        let u = backend.apply(particles, &f_c)?;
        if let Some(it) = backend.last_inner_iterations() {
            *krylov_total.borrow_mut() += it;
        }
        let dtu = system.apply_d_transpose(&u)?;
        mvops += 1;
        *last_velocity.borrow_mut() = Some(u);
        dtu.iter().zip(q.iter()).map(|(a, b)| a + b).collect()
    };
    let certified = if cfg.certify {
        let (cert, ok) = Certificate::evaluate(&gamma, &g_cert, cfg.epsilon_tol);
        Some(ok && (!stats.converged || cert.residual < cfg.epsilon_tol))
    } else {
        None
    };
    let u_c = last_velocity
        .into_inner()
        .unwrap_or_else(|| VelocityVector::zeros(particles.len()));
    Ok(CollisionSolve {
        gamma,
        u_c,
        gd_steps: stats.steps,
        mvops,
        residual: stats.residual,
        converged: stats.converged,
        certified,
        krylov: krylov_total.into_inner(),
    })
}

/// Smallest pair/wall separation at collision radii in the configuration.
fn min_separation(
    particles: &ParticleSet,
    walls: &[crate::constraint::PlaneWall],
    policy: DeltaPolicy,
) -> f64 {
    let pairs = detect_near_pairs(particles, policy);
    let mut min_phi = f64::INFINITY;
    for (i, j) in pairs {
        let pi = &particles.particles[i];
        let pj = &particles.particles[j];
        let d = math::norm(math::sub(pi.center, pj.center));
        min_phi = min_phi.min(d - pi.collision_radius - pj.collision_radius);
    }
    for w in walls {
        for p in &particles.particles {
            min_phi = min_phi.min(w.separation(p.center, p.collision_radius));
        }
    }
    min_phi
}

/// Run a configured simulation to completion, returning in-memory records.
/// When `output_dir` is set the caller is expected to invoke
/// [`SimulationOutcome::write_outputs`] afterwards.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scenario = scenario::generate(cfg, &mut rng)?;
    let mut particles = scenario.particles;
    let load = scenario.external_load;
    let walls = scenario.walls;
    let mut backend = backend_by_key(&cfg.backend, bi_config(cfg))?;
    let policy = DeltaPolicy {
        factor: cfg.delta_factor,
    };
    let mut warnings: Vec<String> = Vec::new();

    if cfg.scenario.starts_with("rotor")
        && backend.torque_coupling() == TorqueCoupling::DiagonalOnly
    {
        warnings.push(format!(
            "backend '{}' couples torques only through isolated drag; rotor hydrodynamics need the bi backend",
            cfg.backend
        ));
    }

    // relax any initial overlaps with zero driving velocity
    for _ in 0..cfg.presteps {
        if min_separation(&particles, &walls, policy) >= 0.0 {
            break;
        }
        let pairs = detect_near_pairs(&particles, policy);
        let system = build_constraint_system(&particles, &pairs, &walls, policy)?;
        if system.n_constraints() == 0 {
            break;
        }
        backend.begin_phase(&particles, &mut rng);
        let zero = VelocityVector::zeros(particles.len());
        let solve = resolve_collisions(backend.as_ref(), &particles, &system, &zero, cfg)?;
        particles = step_configuration(&particles, &solve.u_c, cfg.dt)?;
    }

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut solver_records: Vec<SolverRecord> = Vec::new();
    let mut final_velocities = VelocityVector::zeros(particles.len());

    for step in 0..cfg.steps {
        backend.begin_phase(&particles, &mut rng);
        let u_nc = backend.apply(&particles, &load).map_err(|e| {
            SimError::InvalidConfig(format!("step {step}: mobility solve failed: {e}"))
        })?;
        let krylov_unc = backend.last_inner_iterations().unwrap_or(0);

        let pairs = detect_near_pairs(&particles, policy);
        let system = build_constraint_system(&particles, &pairs, &walls, policy)?;
        let n_c = system.n_constraints();

        let (solve, f_c) = if n_c > 0 {
            backend.begin_phase(&particles, &mut rng);
            let solve = resolve_collisions(backend.as_ref(), &particles, &system, &u_nc, cfg)
                .map_err(|e| {
                    SimError::InvalidConfig(format!("step {step}: collision solve failed: {e}"))
                })?;
            if !solve.converged {
                warnings.push(format!(
                    "step {step}: contact solve stopped at the iteration cap with residual {:.3e}; continuing with the best iterate",
                    solve.residual
                ));
            }
            let f_c = system.apply_d(&solve.gamma)?;
            (Some(solve), f_c)
        } else {
            (None, ForceTorqueVector::zeros(particles.len()))
        };

        let mut u_total = u_nc.clone();
        if let Some(s) = &solve {
            u_total.add_assign(&s.u_c);
        }
        let next = step_configuration(&particles, &u_total, cfg.dt)?;

        let min_phi_post = min_separation(&next, &walls, policy);
        let mean_radius =
            next.particles.iter().map(|p| p.radius).sum::<f64>() / next.len().max(1) as f64;
        if min_phi_post < -cfg.overlap_tol_factor * mean_radius {
            warnings.push(format!(
                "step {step}: post-step penetration {min_phi_post:.3e} exceeds tolerance; consider a larger delta_factor or smaller dt"
            ));
        }

        // bookkeeping for the records
        let gamma: &[f64] = solve.as_ref().map_or(&[], |s| &s.gamma);
        let mut net_fc = [0.0; 3];
        for i in 0..particles.len() {
            net_fc = math::add(net_fc, f_c.force(i));
        }
        let wall_reaction = system.net_force(gamma);

        if step % cfg.record_every == 0 || step + 1 == cfg.steps {
            let particles_rec: Vec<ParticleRecord> = particles
                .particles
                .iter()
                .enumerate()
                .map(|(i, p)| ParticleRecord {
                    gid: p.global_id,
                    center: p.center,
                    orientation: p.orientation,
                    velocity: [
                        u_total.0[6 * i],
                        u_total.0[6 * i + 1],
                        u_total.0[6 * i + 2],
                        u_total.0[6 * i + 3],
                        u_total.0[6 * i + 4],
                        u_total.0[6 * i + 5],
                    ],
                    collision_force: f_c.force(i),
                })
                .collect();
            let constraints_rec: Vec<ConstraintRecord> = system
                .constraints
                .iter()
                .enumerate()
                .map(|(l, c)| ConstraintRecord {
                    kind: match c.kind {
                        ConstraintKind::Pair { .. } => "pair",
                        ConstraintKind::Wall { .. } => "wall",
                    },
                    gid_i: c.gid_i,
                    gid_j: match c.kind {
                        ConstraintKind::Pair { .. } => c.gid_j,
                        ConstraintKind::Wall { wall } => wall,
                    },
                    separation: c.separation,
                    normal: c.normal,
                    gamma: gamma.get(l).copied().unwrap_or(0.0),
                })
                .collect();
            steps.push(StepRecord {
                step,
                time: step as f64 * cfg.dt,
                particles: particles_rec,
                constraints: constraints_rec,
            });
        }
        solver_records.push(SolverRecord {
            step,
            n_constraints: n_c,
            gd_steps: solve.as_ref().map_or(0, |s| s.gd_steps),
            mvops: solve.as_ref().map_or(0, |s| s.mvops),
            residual: solve.as_ref().map_or(0.0, |s| s.residual),
            converged: solve.as_ref().map_or(true, |s| s.converged),
            certified: solve.as_ref().and_then(|s| s.certified),
            krylov_unc,
            krylov_collision: solve.as_ref().map_or(0, |s| s.krylov),
            min_phi_post,
            net_collision_force: net_fc,
            wall_reaction,
        });

        final_velocities = u_total;
        particles = next;
    }

    Ok(SimulationOutcome {
        steps,
        solver: solver_records,
        final_particles: particles,
        final_velocities,
        warnings,
    })
}
