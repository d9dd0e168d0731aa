//! Continuum model of a uniform disk of rotlets: azimuthal velocity by
//! principal-value integration and the logarithmic edge law.
//!
//! A rotlet of torque `T e_z` at the origin induces
//! `u = T/(8 pi mu) (e_z x r)/|r|^3`. Integrating rotlets at number density
//! `n` over the disk `x^2 + y^2 < R^2` and evaluating on the x-axis at
//! `(s, 0)` gives
//!
//! ```text
//! 8 pi mu / (n T) u(s) = PV int_0^R r F(r) dr,
//! F(r) = 2 [ K(m)/(s (r+s)) + E(m)/(s (s-r)) ],   m = 4 r s/(r+s)^2,
//! ```
//!
//! with `K, E` the complete elliptic integrals (parameter convention). Two
//! details are pinned by the quadrature oracles in the tests rather than
//! trusted from transcription: the angular kernel carries the 3/2 power of
//! the squared distance (the written form `(...)^3` is dimensionally
//! inconsistent with a rotlet and fails the closed form), and the radial
//! measure is `r dr` (an extra factor 2 pi double-counts the angular
//! integral already inside `F`).

use crate::error::{Result, SimError};
use crate::quadrature::integrate;
use std::f64::consts::PI;

/// AGM core shared by both integrals, parameterized by the complement
/// `mc = 1 - m` so callers close to the `m = 1` singularity can supply it
/// without cancellation. Returns `(K, E)`.
fn elliptic_ke_from_complement(mc: f64) -> (f64, f64) {
    let m = 1.0 - mc;
    let mut a = 1.0f64;
    let mut b = mc.sqrt();
    let mut c2_sum = 0.5 * m; // 2^{-1} c_0^2 with c_0^2 = m
    let mut pow2 = 1.0;
    for _ in 0..80 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        c2_sum += pow2 * c * c;
        pow2 *= 2.0;
        if c.abs() <= f64::EPSILON * a {
            break;
        }
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - c2_sum))
}

/// Complete elliptic integral of the first kind, parameter convention
/// `K(m) = int_0^{pi/2} (1 - m sin^2 t)^{-1/2} dt`, by AGM iteration.
pub fn elliptic_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(SimError::Domain(format!(
            "elliptic_k needs 0 <= m < 1, got {m}"
        )));
    }
    Ok(elliptic_ke_from_complement(1.0 - m).0)
}

/// Complete elliptic integral of the second kind, parameter convention,
/// via the AGM correction series `E = K (1 - sum 2^{j-1} c_j^2)`.
pub fn elliptic_e(m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) {
        return Err(SimError::Domain(format!(
            "elliptic_e needs 0 <= m <= 1, got {m}"
        )));
    }
    if m == 1.0 {
        return Ok(1.0);
    }
    Ok(elliptic_ke_from_complement(1.0 - m).1)
}

/// Uniform rotlet disk on the z = 0 plane.
#[derive(Debug, Clone, Copy)]
pub struct RotletDiskModel {
    pub disk_radius: f64,
    pub number_density: f64,
    pub torque: f64,
    pub viscosity: f64,
}

impl RotletDiskModel {
    pub fn new(disk_radius: f64, number_density: f64, torque: f64, viscosity: f64) -> Result<Self> {
        if disk_radius <= 0.0 || number_density <= 0.0 || torque <= 0.0 || viscosity <= 0.0 {
            return Err(SimError::Domain(
                "rotlet disk parameters must all be positive".into(),
            ));
        }
        Ok(RotletDiskModel {
            disk_radius,
            number_density,
            torque,
            viscosity,
        })
    }

    /// Prefactor mapping the nondimensional PV integral to velocity.
    fn velocity_scale(&self) -> f64 {
        self.number_density * self.torque / (8.0 * PI * self.viscosity)
    }
}

/// Closed-form angular integral of the rotlet kernel over a ring of radius
/// `r`, evaluated at field radius `s`. Singular at `r = s`. The elliptic
/// parameter is passed through its complement `((s-r)/(r+s))^2`, which stays
/// accurate arbitrarily close to the singular circle.
pub fn disk_integrand_f(r: f64, s: f64) -> Result<f64> {
    if r <= 0.0 || s <= 0.0 {
        return Err(SimError::Domain(format!(
            "disk_integrand_f needs r, s > 0 (got {r}, {s})"
        )));
    }
    if r == s {
        return Err(SimError::Domain(
            "disk_integrand_f is singular at r = s".into(),
        ));
    }
    let mc = ((s - r) / (r + s)).powi(2);
    let (k, e) = elliptic_ke_from_complement(mc);
    Ok(2.0 * (k / (s * (r + s)) + e / (s * (s - r))))
}

/// Principal-value contribution of the excised window `[s-d, s+d]`, from the
/// asymptotic expansion of `r F(r)` about `r = s`: the simple poles cancel
/// between the two sides and the even log part integrates to
/// `(1/s) [ -2 d (log d - 1) + d (log(4 s^2) - 4 + 4 log 2) ]`.
fn window_pv(s: f64, d: f64) -> f64 {
    (-2.0 * d * (d.ln() - 1.0) + d * ((4.0 * s * s).ln() - 4.0 + 4.0 * 2.0f64.ln())) / s
}

/// Azimuthal velocity of the rotlet disk at radius `s`, `0 < s < R`, by
/// symmetric excision plus the analytic window limit, with a step-halving
/// convergence check on the excision size.
pub fn u_theta_pv(model: &RotletDiskModel, s: f64) -> Result<f64> {
    let big_r = model.disk_radius;
    if !(s > 0.0 && s < big_r) {
        return Err(SimError::Domain(format!(
            "u_theta_pv needs 0 < s < R (s = {s}, R = {big_r})"
        )));
    }
    let quad_tol = 1e-11;
    let f = |r: f64| r * disk_integrand_f(r, s).expect("quadrature nodes avoid r = 0 and r = s");
    let eval = |delta: f64| -> Result<f64> {
        let left = integrate(f, 0.0, s - delta, quad_tol);
        let right = integrate(f, s + delta, big_r, quad_tol);
        Ok(left + right + window_pv(s, delta))
    };
    // the window expansion makes the result nearly delta-independent;
    // halving must agree or the excision was too coarse
    let d0 = 1e-4 * s.min(big_r - s);
    let v0 = eval(d0)?;
    let v1 = eval(0.5 * d0)?;
    if (v1 - v0).abs() > 1e-6 * (1.0 + v1.abs()) {
        return Err(SimError::SolverDidNotConverge {
            residual: (v1 - v0).abs(),
            iterations: 2,
        });
    }
    Ok(model.velocity_scale() * v1)
}

/// Least-squares fit of `u = A log(R - s) + B`; returns `(A, B, rms)`.
pub fn fit_edge_log(samples: &[(f64, f64)], disk_radius: f64) -> Result<(f64, f64, f64)> {
    if samples.len() < 3 {
        return Err(SimError::Domain(
            "fit_edge_log needs at least 3 samples".into(),
        ));
    }
    let xs: Vec<f64> = samples
        .iter()
        .map(|&(s, _)| {
            if s >= disk_radius {
                return f64::NAN;
            }
            (disk_radius - s).ln()
        })
        .collect();
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Domain("fit samples must satisfy s < R".into()));
    }
    let n = samples.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sy: f64 = samples.iter().map(|&(_, u)| u).sum();
    let sxy: f64 = xs
        .iter()
        .zip(samples.iter())
        .map(|(x, &(_, u))| x * u)
        .sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-14 * n * sxx.max(1.0) {
        return Err(SimError::Domain(
            "degenerate design: all samples at one radius".into(),
        ));
    }
    let a = (n * sxy - sx * sy) / det;
    let b = (sy * sxx - sx * sxy) / det;
    let rms = (samples
        .iter()
        .zip(xs.iter())
        .map(|(&(_, u), &x)| {
            let r = u - (a * x + b);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((a, b, rms))
}

/// Same fit with the next-order `(R-s) log(R-s)` correction term; returns
/// `(coefficients, rms)`.
pub fn fit_edge_log_corrected(samples: &[(f64, f64)], disk_radius: f64) -> Result<([f64; 3], f64)> {
    if samples.len() < 4 {
        return Err(SimError::Domain(
            "corrected fit needs at least 4 samples".into(),
        ));
    }
    let rows: Vec<[f64; 3]> = samples
        .iter()
        .map(|&(s, _)| {
            let b = disk_radius - s;
            [b.ln(), 1.0, b * b.ln()]
        })
        .collect();
    // normal equations, 3x3
    let mut ata = [0.0; 9];
    let mut atb = [0.0; 3];
    for (row, &(_, u)) in rows.iter().zip(samples.iter()) {
        for i in 0..3 {
            atb[i] += row[i] * u;
            for j in 0..3 {
                ata[i * 3 + j] += row[i] * row[j];
            }
        }
    }
    let sol = crate::math::solve_dense(&ata, &atb, 3)
        .ok_or_else(|| SimError::Domain("degenerate design in corrected fit".into()))?;
    let rms = (rows
        .iter()
        .zip(samples.iter())
        .map(|(row, &(_, u))| {
            let r = u - (row[0] * sol[0] + row[1] * sol[1] + row[2] * sol[2]);
            r * r
        })
        .sum::<f64>()
        / samples.len() as f64)
        .sqrt();
    Ok(([sol[0], sol[1], sol[2]], rms))
}
