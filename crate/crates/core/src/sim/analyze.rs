//! Post-hoc analyses over trajectory records: azimuthal velocity
//! distributions of torque-driven assemblies and constraint-lifetime
//! statistics of the candidate and active sets.

use crate::error::{Result, SimError};
use crate::sim::record::StepRecord;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Per-sample azimuthal data: distance from the rotation axis (through the
/// instantaneous centroid, along z) and the azimuthal velocity component.
pub fn azimuthal_samples(steps: &[StepRecord]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for rec in steps {
        if rec.particles.is_empty() {
            continue;
        }
        let mut centroid = [0.0f64; 2];
        for p in &rec.particles {
            centroid[0] += p.center[0];
            centroid[1] += p.center[1];
        }
        centroid[0] /= rec.particles.len() as f64;
        centroid[1] /= rec.particles.len() as f64;
        for p in &rec.particles {
            let dx = p.center[0] - centroid[0];
            let dy = p.center[1] - centroid[1];
            let r = (dx * dx + dy * dy).sqrt();
            if r < 1e-12 {
                continue;
            }
            // e_theta = (-dy, dx)/r
            let u_theta = (-dy * p.velocity[0] + dx * p.velocity[1]) / r;
            out.push((r, u_theta));
        }
    }
    out
}

/// Two-dimensional histogram of `P(U_theta, r)` normalized so that
/// `int int P 2 pi r dr dU = 1`.
pub struct VelocityDistribution {
    pub r_edges: Vec<f64>,
    pub u_edges: Vec<f64>,
    /// Row-major `[r_bin][u_bin]` densities.
    pub density: Vec<Vec<f64>>,
}

pub fn velocity_distribution(
    samples: &[(f64, f64)],
    n_r: usize,
    n_u: usize,
) -> Result<VelocityDistribution> {
    if samples.is_empty() {
        return Err(SimError::Domain("no samples to histogram".into()));
    }
    let r_max = samples.iter().map(|s| s.0).fold(0.0f64, f64::max) * 1.0001;
    let (u_min, u_max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, s| {
            (a.0.min(s.1), a.1.max(s.1))
        });
    let u_span = (u_max - u_min).max(1e-300);
    let u_lo = u_min - 1e-4 * u_span;
    let u_hi = u_max + 1e-4 * u_span;
    let dr = r_max / n_r as f64;
    let du = (u_hi - u_lo) / n_u as f64;
    let mut counts = vec![vec![0usize; n_u]; n_r];
    for &(r, u) in samples {
        let ir = ((r / dr) as usize).min(n_r - 1);
        let iu = (((u - u_lo) / du) as usize).min(n_u - 1);
        counts[ir][iu] += 1;
    }
    let total = samples.len() as f64;
    let mut density = vec![vec![0.0f64; n_u]; n_r];
    for ir in 0..n_r {
        let r_mid = (ir as f64 + 0.5) * dr;
        for iu in 0..n_u {
            density[ir][iu] =
                counts[ir][iu] as f64 / (total * du * dr * 2.0 * std::f64::consts::PI * r_mid);
        }
    }
    Ok(VelocityDistribution {
        r_edges: (0..=n_r).map(|i| i as f64 * dr).collect(),
        u_edges: (0..=n_u).map(|i| u_lo + i as f64 * du).collect(),
        density,
    })
}

impl VelocityDistribution {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r_mid,u_mid,p\n");
        for ir in 0..self.density.len() {
            let r_mid = 0.5 * (self.r_edges[ir] + self.r_edges[ir + 1]);
            for iu in 0..self.density[ir].len() {
                let u_mid = 0.5 * (self.u_edges[iu] + self.u_edges[iu + 1]);
                let _ = writeln!(s, "{},{},{}", r_mid, u_mid, self.density[ir][iu]);
            }
        }
        s
    }

    /// Checks the caption normalization by explicit summation.
    pub fn normalization(&self) -> f64 {
        let mut acc = 0.0;
        for ir in 0..self.density.len() {
            let dr = self.r_edges[ir + 1] - self.r_edges[ir];
            let r_mid = 0.5 * (self.r_edges[ir] + self.r_edges[ir + 1]);
            for iu in 0..self.density[ir].len() {
                let du = self.u_edges[iu + 1] - self.u_edges[iu];
                acc += self.density[ir][iu] * 2.0 * std::f64::consts::PI * r_mid * dr * du;
            }
        }
        acc
    }
}

/// Ridge of the velocity distribution: mean azimuthal velocity per radial
/// bin, with the sample count of each bin. Bins with fewer than three
/// samples are dropped.
pub fn ridge_profile(samples: &[(f64, f64)], n_bins: usize) -> Vec<(f64, f64, usize)> {
    if samples.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let r_max = samples.iter().map(|s| s.0).fold(0.0f64, f64::max) * 1.0001;
    let dr = r_max / n_bins as f64;
    let mut sums = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    for &(r, u) in samples {
        let b = ((r / dr) as usize).min(n_bins - 1);
        sums[b] += u;
        counts[b] += 1;
    }
    (0..n_bins)
        .filter(|&b| counts[b] >= 3)
        .map(|b| ((b as f64 + 0.5) * dr, sums[b] / counts[b] as f64, counts[b]))
        .collect()
}

/// Count-weighted Pearson correlation of the ridge against a linear
/// `u = omega r` profile, restricted to bins with centers at or below
/// `r_cut`. This is the collective-rotation measure: the ridge location is
/// what follows the rigid-body line, while individual particles scatter
/// around it.
pub fn ridge_linear_correlation(samples: &[(f64, f64)], n_bins: usize, r_cut: f64) -> f64 {
    let ridge: Vec<(f64, f64, usize)> = ridge_profile(samples, n_bins)
        .into_iter()
        .filter(|&(r, _, _)| r <= r_cut)
        .collect();
    if ridge.len() < 3 {
        return 0.0;
    }
    let w_total: f64 = ridge.iter().map(|&(_, _, n)| n as f64).sum();
    let mr = ridge.iter().map(|&(r, _, n)| r * n as f64).sum::<f64>() / w_total;
    let mu = ridge.iter().map(|&(_, u, n)| u * n as f64).sum::<f64>() / w_total;
    let mut cov = 0.0;
    let mut vr = 0.0;
    let mut vu = 0.0;
    for &(r, u, n) in &ridge {
        let w = n as f64;
        cov += w * (r - mr) * (u - mu);
        vr += w * (r - mr) * (r - mr);
        vu += w * (u - mu) * (u - mu);
    }
    if vr == 0.0 || vu == 0.0 {
        return 0.0;
    }
    cov / (vr * vu).sqrt()
}

/// Pearson correlation of `u_theta` against `r` over raw samples with
/// `r <= r_max`; scatter of individual particles lowers it even when the
/// collective rotation is clean.
pub fn linear_ridge_correlation(samples: &[(f64, f64)], r_max: f64) -> f64 {
    let sel: Vec<&(f64, f64)> = samples.iter().filter(|s| s.0 <= r_max).collect();
    if sel.len() < 2 {
        return 0.0;
    }
    let n = sel.len() as f64;
    let mr = sel.iter().map(|s| s.0).sum::<f64>() / n;
    let mu = sel.iter().map(|s| s.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vr = 0.0;
    let mut vu = 0.0;
    for s in sel {
        cov += (s.0 - mr) * (s.1 - mu);
        vr += (s.0 - mr) * (s.0 - mr);
        vu += (s.1 - mu) * (s.1 - mu);
    }
    if vr == 0.0 || vu == 0.0 {
        return 0.0;
    }
    cov / (vr * vu).sqrt()
}

/// Constraint lifetimes: contiguous runs of presence, in steps, for the
/// candidate set and for the active subset (`gamma > 0`). Runs still open at
/// the last recorded step are closed there.
pub fn constraint_lifetimes(steps: &[StepRecord]) -> (Vec<usize>, Vec<usize>) {
    #[derive(Default)]
    struct Runs {
        open: HashMap<(usize, usize), usize>,
        closed: Vec<usize>,
    }
    impl Runs {
        fn advance(&mut self, present: &std::collections::HashSet<(usize, usize)>) {
            let mut next: HashMap<(usize, usize), usize> = HashMap::new();
            for key in present {
                let len = self.open.remove(key).unwrap_or(0) + 1;
                next.insert(*key, len);
            }
            for (_, len) in self.open.drain() {
                self.closed.push(len);
            }
            self.open = next;
        }
        fn finish(mut self) -> Vec<usize> {
            for (_, len) in self.open.drain() {
                self.closed.push(len);
            }
            self.closed.sort_unstable();
            self.closed
        }
    }
    let mut all = Runs::default();
    let mut active = Runs::default();
    for rec in steps {
        let mut present_all = std::collections::HashSet::new();
        let mut present_active = std::collections::HashSet::new();
        for c in &rec.constraints {
            let key = (c.gid_i, c.gid_j);
            present_all.insert(key);
            if c.gamma > 0.0 {
                present_active.insert(key);
            }
        }
        all.advance(&present_all);
        active.advance(&present_active);
    }
    (all.finish(), active.finish())
}

/// Normalized lifetime distribution `P(k)`, `sum_k P(k) = 1`.
pub fn lifetime_distribution(lifetimes: &[usize]) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &l in lifetimes {
        *counts.entry(l).or_default() += 1;
    }
    let total = lifetimes.len().max(1) as f64;
    let mut out: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total))
        .collect();
    out.sort_unstable_by_key(|e| e.0);
    out
}

pub fn lifetimes_csv(all: &[usize], active: &[usize]) -> String {
    let mut s = String::from("set,lifetime,p\n");
    for (k, p) in lifetime_distribution(all) {
        let _ = writeln!(s, "all,{k},{p}");
    }
    for (k, p) in lifetime_distribution(active) {
        let _ = writeln!(s, "active,{k},{p}");
    }
    s
}

// ---------------------------------------------------------------------
// CSV parsing for the analyze subcommand
// ---------------------------------------------------------------------

/// Reconstruct step records from `trajectory.csv` and `constraints.csv`
/// written by [`super::record::SimulationOutcome::write_outputs`].
pub fn read_records(dir: &std::path::Path) -> Result<Vec<StepRecord>> {
    use crate::sim::record::{ConstraintRecord, ParticleRecord};
    let traj = std::fs::read_to_string(dir.join("trajectory.csv"))?;
    let cons = std::fs::read_to_string(dir.join("constraints.csv"))?;
    let mut steps: std::collections::BTreeMap<usize, StepRecord> = Default::default();
    for (ln, line) in traj.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 20 {
            return Err(SimError::InvalidConfig(format!(
                "trajectory.csv line {}: expected 20 fields, got {}",
                ln + 1,
                f.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| SimError::InvalidConfig(format!("trajectory.csv line {}", ln + 1)))
        };
        let step: usize = f[0]
            .parse()
            .map_err(|_| SimError::InvalidConfig(format!("trajectory.csv line {}", ln + 1)))?;
        let entry = steps.entry(step).or_insert_with(|| StepRecord {
            step,
            time: 0.0,
            particles: Vec::new(),
            constraints: Vec::new(),
        });
        entry.time = num(1)?;
        entry.particles.push(ParticleRecord {
            gid: f[3].parse().unwrap_or(0),
            center: [num(4)?, num(5)?, num(6)?],
            orientation: [num(7)?, num(8)?, num(9)?, num(10)?],
            velocity: [num(11)?, num(12)?, num(13)?, num(14)?, num(15)?, num(16)?],
            collision_force: [num(17)?, num(18)?, num(19)?],
        });
    }
    for (ln, line) in cons.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(SimError::InvalidConfig(format!(
                "constraints.csv line {}: expected 9 fields, got {}",
                ln + 1,
                f.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| SimError::InvalidConfig(format!("constraints.csv line {}", ln + 1)))
        };
        let step: usize = f[0]
            .parse()
            .map_err(|_| SimError::InvalidConfig(format!("constraints.csv line {}", ln + 1)))?;
        if let Some(entry) = steps.get_mut(&step) {
            entry.constraints.push(ConstraintRecord {
                kind: if f[1] == "wall" { "wall" } else { "pair" },
                gid_i: f[2].parse().unwrap_or(0),
                gid_j: f[3].parse().unwrap_or(0),
                separation: num(4)?,
                normal: [num(5)?, num(6)?, num(7)?],
                gamma: num(8)?,
            });
        }
    }
    Ok(steps.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::record::{ConstraintRecord, ParticleRecord};

    fn synthetic_rotation(omega: f64, n_rings: usize) -> Vec<StepRecord> {
        // concentric rings rotating rigidly about z through the origin, so
        // the centroid coincides with the rotation axis
        let mut particles = Vec::new();
        for i in 0..n_rings {
            let r = 1.0 + i as f64;
            for k in 0..8 {
                let ang = std::f64::consts::TAU * k as f64 / 8.0;
                let (s, c) = ang.sin_cos();
                particles.push(ParticleRecord {
                    gid: 8 * i + k,
                    center: [r * c, r * s, 0.0],
                    orientation: [1.0, 0.0, 0.0, 0.0],
                    velocity: [-omega * r * s, omega * r * c, 0.0, 0.0, 0.0, omega],
                    collision_force: [0.0; 3],
                });
            }
        }
        vec![StepRecord {
            step: 0,
            time: 0.0,
            particles,
            constraints: Vec::new(),
        }]
    }

    #[test]
    fn rigid_rotation_concentrates_on_line() {
        let steps = synthetic_rotation(0.7, 12);
        let samples = azimuthal_samples(&steps);
        // centroid is offset, so just check correlation is essentially 1
        let corr = linear_ridge_correlation(&samples, f64::INFINITY);
        assert!(corr > 0.999, "corr = {corr}");
        let hist = velocity_distribution(&samples, 8, 8).unwrap();
        assert!((hist.normalization() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_velocities_all_mass_at_zero() {
        let mut steps = synthetic_rotation(0.0, 6);
        steps[0]
            .particles
            .iter_mut()
            .for_each(|p| p.velocity = [0.0; 6]);
        let samples = azimuthal_samples(&steps);
        assert!(samples.iter().all(|s| s.1 == 0.0));
    }

    #[test]
    fn lifetime_tracking() {
        // one pair present on steps 0..5, active only on steps 3..=7 of 10
        let mut steps = Vec::new();
        for step in 0..10usize {
            let mut constraints = Vec::new();
            if step < 8 {
                constraints.push(ConstraintRecord {
                    kind: "pair",
                    gid_i: 0,
                    gid_j: 1,
                    separation: 0.1,
                    normal: [1.0, 0.0, 0.0],
                    gamma: if (3..8).contains(&step) { 2.0 } else { 0.0 },
                });
            }
            steps.push(StepRecord {
                step,
                time: step as f64,
                particles: Vec::new(),
                constraints,
            });
        }
        let (all, active) = constraint_lifetimes(&steps);
        assert_eq!(all, vec![8]);
        assert_eq!(active, vec![5]);
        let dist = lifetime_distribution(&active);
        assert_eq!(dist, vec![(5, 1.0)]);
    }

    #[test]
    fn static_configuration_lives_full_run() {
        let mut steps = Vec::new();
        for step in 0..6usize {
            steps.push(StepRecord {
                step,
                time: step as f64,
                particles: Vec::new(),
                constraints: vec![ConstraintRecord {
                    kind: "pair",
                    gid_i: 2,
                    gid_j: 5,
                    separation: 0.4,
                    normal: [0.0, 0.0, 1.0],
                    gamma: 0.0,
                }],
            });
        }
        let (all, active) = constraint_lifetimes(&steps);
        assert_eq!(all, vec![6]);
        assert!(active.is_empty());
    }
}
