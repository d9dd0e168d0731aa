//! Flat key-value run configuration.
//!
//! The on-disk format is one `key = value` pair per line, `#` starts a
//! comment. Unknown keys are rejected so typos cannot silently fall back to
//! defaults. The full key set is documented in the README and echoed into
//! every run manifest.

use crate::cqp::BbStep;
use crate::error::{Result, SimError};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Bbpgd,
    Apgd,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub scenario: String,
    pub n_particles: usize,
    pub volume_fraction: f64,
    pub area_fraction: f64,
    pub radius: f64,
    pub collision_radius_factor: f64,
    pub force: f64,
    pub torque: f64,
    pub viscosity: f64,
    pub backend: String,
    pub dt: f64,
    pub steps: usize,
    pub epsilon_tol: f64,
    pub max_gd_steps: usize,
    pub solver: SolverKind,
    pub bb_step: BbStep,
    pub delta_factor: f64,
    /// Post-step penetration warning threshold, in units of the mean of the
    /// two collision partners' radii.
    pub overlap_tol_factor: f64,
    pub bi_order: usize,
    pub bi_beta: f64,
    pub bi_gmres_tol: f64,
    pub seed: u64,
    pub record_every: usize,
    /// Spend one extra mobility solve per step to certify the
    /// complementarity conditions of the converged solution.
    pub certify: bool,
    /// Cap on initial overlap-relaxation steps (zero driving velocity).
    pub presteps: usize,
    /// Optional plane wall `nx,ny,nz,offset`.
    pub wall: Option<[f64; 4]>,
    pub output_dir: Option<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            scenario: "sediment_cluster".into(),
            n_particles: 64,
            volume_fraction: 0.2,
            area_fraction: 0.6,
            radius: 1.0,
            collision_radius_factor: 1.05,
            force: 1.0,
            torque: 1.0,
            viscosity: 1.0,
            backend: "rpy".into(),
            dt: 0.1,
            steps: 100,
            epsilon_tol: 1e-5,
            max_gd_steps: 1000,
            solver: SolverKind::Bbpgd,
            bb_step: BbStep::Bb1,
            delta_factor: 0.3,
            overlap_tol_factor: 1e-3,
            bi_order: 8,
            bi_beta: 1.8,
            bi_gmres_tol: 1e-8,
            seed: 1,
            record_every: 1,
            certify: true,
            presteps: 100,
            wall: None,
            output_dir: None,
        }
    }
}

impl SimulationConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimulationConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SimError::InvalidConfig(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| SimError::InvalidConfig(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(value: &str, key: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("cannot parse '{value}' for key '{key}'"))
        }
        match key {
            "scenario" => self.scenario = value.to_string(),
            "n" => self.n_particles = num(value, key)?,
            "volume_fraction" => self.volume_fraction = num(value, key)?,
            "area_fraction" => self.area_fraction = num(value, key)?,
            "radius" => self.radius = num(value, key)?,
            "collision_radius_factor" => self.collision_radius_factor = num(value, key)?,
            "force" => self.force = num(value, key)?,
            "torque" => self.torque = num(value, key)?,
            "viscosity" => self.viscosity = num(value, key)?,
            "backend" => self.backend = value.to_string(),
            "dt" => self.dt = num(value, key)?,
            "steps" => self.steps = num(value, key)?,
            "epsilon_tol" => self.epsilon_tol = num(value, key)?,
            "max_gd_steps" => self.max_gd_steps = num(value, key)?,
            "solver" => {
                self.solver = match value {
                    "bbpgd" => SolverKind::Bbpgd,
                    "apgd" => SolverKind::Apgd,
                    other => return Err(format!("unknown solver '{other}'")),
                }
            }
            "bb_step" => {
                self.bb_step = match value {
                    "bb1" => BbStep::Bb1,
                    "bb2" => BbStep::Bb2,
                    "alternating" => BbStep::Alternating,
                    other => return Err(format!("unknown bb_step '{other}'")),
                }
            }
            "delta_factor" => self.delta_factor = num(value, key)?,
            "overlap_tol_factor" => self.overlap_tol_factor = num(value, key)?,
            "bi_order" => self.bi_order = num(value, key)?,
            "bi_beta" => self.bi_beta = num(value, key)?,
            "bi_gmres_tol" => self.bi_gmres_tol = num(value, key)?,
            "seed" => self.seed = num(value, key)?,
            "record_every" => self.record_every = num(value, key)?,
            "certify" => self.certify = num(value, key)?,
            "presteps" => self.presteps = num(value, key)?,
            "output_dir" => self.output_dir = Some(value.to_string()),
            "wall" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err("wall needs 'nx,ny,nz,offset'".into());
                }
                let mut w = [0.0; 4];
                for (i, p) in parts.iter().enumerate() {
                    w[i] = num(p, key)?;
                }
                self.wall = Some(w);
            }
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("dt", self.dt),
            ("epsilon_tol", self.epsilon_tol),
            ("delta_factor", self.delta_factor),
            ("viscosity", self.viscosity),
            ("bi_beta", self.bi_beta),
            ("bi_gmres_tol", self.bi_gmres_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.collision_radius_factor < 1.0 {
            return Err(SimError::InvalidConfig(
                "collision_radius_factor must be >= 1".into(),
            ));
        }
        if self.record_every == 0 {
            return Err(SimError::InvalidConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Key-value view for the run manifest, in stable order.
    pub fn manifest_entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("scenario".into(), self.scenario.clone());
        m.insert("n".into(), self.n_particles.to_string());
        m.insert("volume_fraction".into(), self.volume_fraction.to_string());
        m.insert("area_fraction".into(), self.area_fraction.to_string());
        m.insert("radius".into(), self.radius.to_string());
        m.insert(
            "collision_radius_factor".into(),
            self.collision_radius_factor.to_string(),
        );
        m.insert("force".into(), self.force.to_string());
        m.insert("torque".into(), self.torque.to_string());
        m.insert("viscosity".into(), self.viscosity.to_string());
        m.insert("backend".into(), self.backend.clone());
        m.insert("dt".into(), self.dt.to_string());
        m.insert("steps".into(), self.steps.to_string());
        m.insert("epsilon_tol".into(), self.epsilon_tol.to_string());
        m.insert("max_gd_steps".into(), self.max_gd_steps.to_string());
        m.insert(
            "solver".into(),
            match self.solver {
                SolverKind::Bbpgd => "bbpgd".into(),
                SolverKind::Apgd => "apgd".into(),
            },
        );
        m.insert(
            "bb_step".into(),
            match self.bb_step {
                BbStep::Bb1 => "bb1".into(),
                BbStep::Bb2 => "bb2".into(),
                BbStep::Alternating => "alternating".into(),
            },
        );
        m.insert("delta_factor".into(), self.delta_factor.to_string());
        m.insert(
            "overlap_tol_factor".into(),
            self.overlap_tol_factor.to_string(),
        );
        m.insert("bi_order".into(), self.bi_order.to_string());
        m.insert("bi_beta".into(), self.bi_beta.to_string());
        m.insert("bi_gmres_tol".into(), self.bi_gmres_tol.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("record_every".into(), self.record_every.to_string());
        m.insert("certify".into(), self.certify.to_string());
        m.insert("presteps".into(), self.presteps.to_string());
        if let Some(w) = self.wall {
            m.insert(
                "wall".into(),
                format!("{},{},{},{}", w[0], w[1], w[2], w[3]),
            );
        }
        m
    }
}
