//! Vector spherical harmonics on the sphere and the exterior maps they
//! diagonalize.
//!
//! Basis, generated from the scalar harmonics `Y_n^m`:
//!
//! ```text
//! G = grad_S Y = dY/dt e_t + (1/sin t) dY/dphi e_p
//! V = G - (n+1) Y e_r
//! W = G + n Y e_r
//! X = e_r x G
//! ```
//!
//! For a density `rho` on the unit sphere with coefficients
//! `C^F = <rho, F> / |F|^2`, the exterior single-layer velocity and pressure
//! of unit-viscosity Stokes flow are diagonal per mode:
//!
//! ```text
//! u = sum f_V(r) V + f_W(r) W + f_X(r) X,      p = sum g(r) Y
//! f_V = n/((2n+1)(2n+3)) r^-(n+2) C^V + n/(4n+2) (r^-(n+2) - r^-n) C^W
//! f_W = (n+1)/((2n+1)(2n-1)) r^-n C^W
//! f_X = 1/(2n+1) r^-(n+1) C^X
//! g   = n r^-(n+1) C^W
//! ```
//!
//! The W-to-V coupling `n/(4n+2)` is fixed against a direct Stokeslet
//! quadrature oracle and against the exact translating-sphere solution
//! (which forces `f_V = (1/6)(r^-3 - r^-1) C^W` at n = 1); see the oracle
//! tests below. The n = 0 mode produces no exterior flow.
//!
//! Scaling to a physical sphere of radius `a` in fluid of viscosity `eta`:
//! lengths are measured in units of `a`, the velocity picks up `a/eta`, and
//! pressure and traction need no factor at all.
//!
//! The traction map is not diagonal; it is assembled from the velocity
//! gradient in spherical components, rotated to Cartesian, and closed with
//! the pressure. Evaluation within 1e-6 of a pole perturbs the colatitude
//! toward the equator, where the individually singular cot/csc terms cancel.

use crate::error::{Result, SimError};
use crate::math::{self, Mat3, Vec3};
use crate::sht::{tri_index, tri_len, SphGrid};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Raw VSH inner products `<rho, V>, <rho, W>, <rho, X>` for m >= 0 of a
/// real vector field on the unit sphere.
#[derive(Debug, Clone)]
pub struct VshCoeffs {
    pub order: usize,
    pub v: Vec<Complex64>,
    pub w: Vec<Complex64>,
    pub x: Vec<Complex64>,
}

impl VshCoeffs {
    pub fn zeros(order: usize) -> Self {
        let n = tri_len(order);
        VshCoeffs {
            order,
            v: vec![Complex64::new(0.0, 0.0); n],
            w: vec![Complex64::new(0.0, 0.0); n],
            x: vec![Complex64::new(0.0, 0.0); n],
        }
    }
}

/// Fourier transform in phi of a real row-major grid field, m = 0..=p.
fn fourier_phi(grid: &SphGrid, values: &[f64]) -> Vec<Complex64> {
    let (nt, np, p) = (grid.n_theta(), grid.n_phi(), grid.order);
    let scale = 2.0 * PI / np as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); nt * (p + 1)];
    for k in 0..nt {
        for m in 0..=p {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..np {
                acc += values[k * np + l] * Complex64::from_polar(1.0, -(m as f64) * grid.phis[l]);
            }
            out[k * (p + 1) + m] = acc * scale;
        }
    }
    out
}

/// Project a vector field, given by its spherical components on the grid,
/// onto the VSH basis. Components are row-major `(k, l)` real grids.
pub fn vsh_decompose(
    grid: &SphGrid,
    rho_r: &[f64],
    rho_t: &[f64],
    rho_p: &[f64],
) -> Result<VshCoeffs> {
    let n_pts = grid.n_points();
    for (name, v) in [("r", rho_r), ("theta", rho_t), ("phi", rho_p)] {
        if v.len() != n_pts {
            return Err(SimError::DimensionMismatch {
                context: match name {
                    "r" => "vsh_decompose (radial component)",
                    "theta" => "vsh_decompose (theta component)",
                    _ => "vsh_decompose (phi component)",
                },
                expected: n_pts,
                got: v.len(),
            });
        }
    }
    let p = grid.order;
    let fr = fourier_phi(grid, rho_r);
    let ft = fourier_phi(grid, rho_t);
    let fp = fourier_phi(grid, rho_p);
    let mut out = VshCoeffs::zeros(p);
    for n in 0..=p {
        for m in 0..=n {
            let idx = tri_index(n, m);
            let mut cv = Complex64::new(0.0, 0.0);
            let mut cw = Complex64::new(0.0, 0.0);
            let mut cx = Complex64::new(0.0, 0.0);
            for k in 0..=p {
                let wq = grid.weights[k] * 1.0; // phi factor already in fourier
                let y = grid.pbar[k][idx];
                let dy = grid.dpbar[k][idx];
                let y_csc = m as f64 * y / grid.thetas[k].sin();
                let a_r = fr[k * (p + 1) + m];
                let a_t = ft[k * (p + 1) + m];
                let a_p = fp[k * (p + 1) + m];
                // conj(V) = -(n+1) Ybar e_r + dYbar e_t - i m csc Ybar e_p
                let tang = dy * a_t - Complex64::i() * y_csc * a_p;
                cv += wq * (-((n + 1) as f64) * y * a_r + tang);
                cw += wq * (n as f64 * y * a_r + tang);
                cx += wq * (Complex64::i() * y_csc * a_t + dy * a_p);
            }
            out.v[idx] = cv;
            out.w[idx] = cw;
            out.x[idx] = cx;
        }
    }
    Ok(out)
}

/// Rebuild the spherical-component grids from VSH coefficients.
pub fn vsh_synthesize(grid: &SphGrid, coeffs: &VshCoeffs) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = grid.order;
    let (nt, np) = (grid.n_theta(), grid.n_phi());
    let mut rho_r = vec![0.0; nt * np];
    let mut rho_t = vec![0.0; nt * np];
    let mut rho_p = vec![0.0; nt * np];
    for k in 0..nt {
        // per-m angular sums over n
        let mut gr = vec![Complex64::new(0.0, 0.0); p + 1];
        let mut gt = vec![Complex64::new(0.0, 0.0); p + 1];
        let mut gp = vec![Complex64::new(0.0, 0.0); p + 1];
        let st = grid.thetas[k].sin();
        for n in 0..=p {
            for m in 0..=n {
                let idx = tri_index(n, m);
                let y = grid.pbar[k][idx];
                let dy = grid.dpbar[k][idx];
                let y_csc = m as f64 * y / st;
                let cv = normalized(coeffs.v[idx], grid.norm_v[idx]);
                let cw = normalized(coeffs.w[idx], grid.norm_w[idx]);
                let cx = normalized(coeffs.x[idx], grid.norm_x[idx]);
                let tang = cv + cw;
                gr[m] += (-((n + 1) as f64) * cv + n as f64 * cw) * y;
                gt[m] += tang * dy - Complex64::i() * y_csc * cx;
                gp[m] += Complex64::i() * y_csc * tang + cx * dy;
            }
        }
        for l in 0..np {
            let (mut vr, mut vt, mut vp) = (gr[0].re, gt[0].re, gp[0].re);
            for m in 1..=p {
                let phase = Complex64::from_polar(1.0, m as f64 * grid.phis[l]);
                vr += 2.0 * (gr[m] * phase).re;
                vt += 2.0 * (gt[m] * phase).re;
                vp += 2.0 * (gp[m] * phase).re;
            }
            rho_r[k * np + l] = vr;
            rho_t[k * np + l] = vt;
            rho_p[k * np + l] = vp;
        }
    }
    (rho_r, rho_t, rho_p)
}

#[inline]
fn normalized(raw: Complex64, norm: f64) -> Complex64 {
    // W_0^0 and X_0^0 vanish identically; their norms are zero and the
    // modes carry nothing.
    if norm > 0.0 {
        raw / norm
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Angular tables at one colatitude: normalized Legendre values and their
/// first two theta derivatives, triangular layout.
pub struct AngularTables {
    order: usize,
    pbar: Vec<f64>,
    dpbar: Vec<f64>,
    d2pbar: Vec<f64>,
}

impl AngularTables {
    pub fn new(order: usize) -> Self {
        let n = tri_len(order);
        AngularTables {
            order,
            pbar: vec![0.0; n],
            dpbar: vec![0.0; n],
            d2pbar: vec![0.0; n],
        }
    }

    pub fn filled(order: usize, theta: f64) -> Self {
        let mut t = Self::new(order);
        t.fill(theta);
        t
    }

    pub fn fill(&mut self, theta: f64) {
        let p = self.order;
        let (ct, st) = (theta.cos(), theta.sin());
        crate::sht::legendre_table(p, ct, st, &mut self.pbar);
        crate::sht::legendre_theta_derivative(p, ct, st, &self.pbar, &mut self.dpbar);
        let cot = ct / st;
        let csc2 = 1.0 / (st * st);
        for n in 0..=p {
            for m in 0..=n {
                let idx = tri_index(n, m);
                let mut d2 = m as f64 * (cot * self.dpbar[idx] - csc2 * self.pbar[idx]);
                if m < n {
                    d2 += (((n - m) * (n + m + 1)) as f64).sqrt() * self.dpbar[tri_index(n, m + 1)];
                }
                self.d2pbar[idx] = d2;
            }
        }
    }
}

/// Real radial scalars of the exterior map for one degree n, shared by all
/// orders m at a fixed target radius. `RadialLadder` walks n upward keeping
/// running powers of 1/r, so no calls to `powi` appear in the hot loops.
#[derive(Clone, Copy, Default)]
struct RadialScalars {
    /// V-coefficient weight in f_V.
    av: f64,
    /// W-coefficient weight in f_V (the two-power coupling combined).
    aw: f64,
    /// W-coefficient weight in f_W.
    bw: f64,
    /// X-coefficient weight in f_X.
    cx: f64,
    /// W-coefficient weight in the pressure.
    gw: f64,
    // radial derivatives of the same weights
    dav: f64,
    daw: f64,
    dbw: f64,
    dcx: f64,
}

struct RadialLadder {
    n: usize,
    inv_r: f64,
    /// r^{-n} for the current n.
    r_n: f64,
}

impl RadialLadder {
    fn new(r: f64) -> Self {
        let inv_r = 1.0 / r;
        RadialLadder {
            n: 0,
            inv_r,
            r_n: 1.0,
        }
    }

    /// Advance to the next degree and return its scalars.
    fn next(&mut self) -> RadialScalars {
        self.n += 1;
        self.r_n *= self.inv_r;
        let nf = self.n as f64;
        let r_n = self.r_n;
        let r_n1 = r_n * self.inv_r;
        let r_n2 = r_n1 * self.inv_r;
        let r_n3 = r_n2 * self.inv_r;
        let alpha_v = nf / ((2.0 * nf + 1.0) * (2.0 * nf + 3.0));
        let alpha_w = nf / (4.0 * nf + 2.0);
        let beta_w = (nf + 1.0) / ((2.0 * nf + 1.0) * (2.0 * nf - 1.0));
        RadialScalars {
            av: alpha_v * r_n2,
            aw: alpha_w * (r_n2 - r_n),
            bw: beta_w * r_n,
            cx: r_n1 / (2.0 * nf + 1.0),
            gw: nf * r_n1,
            dav: -(nf + 2.0) * alpha_v * r_n3,
            daw: alpha_w * (-(nf + 2.0) * r_n3 + nf * r_n1),
            dbw: -nf * beta_w * r_n1,
            dcx: -(nf + 1.0) / (2.0 * nf + 1.0) * r_n2,
        }
    }
}

/// Unit phase ladder `e^{i m phi}` advanced by one complex multiply per m.
struct PhaseLadder {
    step: Complex64,
}

impl PhaseLadder {
    fn new(phi: f64) -> Self {
        PhaseLadder {
            step: Complex64::from_polar(1.0, phi),
        }
    }

    fn start(&self) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[inline]
    fn advance(&self, phase: Complex64) -> Complex64 {
        phase * self.step
    }
}

/// A density (or any surface vector field) attached to one sphere: the VSH
/// coefficients in the sphere's own grid frame plus the geometric data
/// needed to evaluate exterior fields in world coordinates.
#[derive(Debug, Clone)]
pub struct SphereSpectralField {
    pub radius: f64,
    pub center: Vec3,
    /// Grid-local to world rotation.
    pub rotation: Mat3,
    pub coeffs: VshCoeffs,
}

const POLE_GUARD: f64 = 1e-6;

impl SphereSpectralField {
    /// Decompose world-frame Cartesian vectors sampled on the (rotated)
    /// grid of this sphere.
    pub fn from_grid_vectors(
        grid: &SphGrid,
        radius: f64,
        center: Vec3,
        rotation: Mat3,
        values: &[Vec3],
    ) -> Result<Self> {
        let (nt, np) = (grid.n_theta(), grid.n_phi());
        if values.len() != nt * np {
            return Err(SimError::DimensionMismatch {
                context: "from_grid_vectors",
                expected: nt * np,
                got: values.len(),
            });
        }
        let mut rho_r = vec![0.0; nt * np];
        let mut rho_t = vec![0.0; nt * np];
        let mut rho_p = vec![0.0; nt * np];
        for k in 0..nt {
            let theta = grid.thetas[k];
            let (st, ct) = (theta.sin(), theta.cos());
            for l in 0..np {
                let (sp, cp) = grid.phis[l].sin_cos();
                let e_r = [st * cp, st * sp, ct];
                let e_t = [ct * cp, ct * sp, -st];
                let e_p = [-sp, cp, 0.0];
                let local = math::mat_tvec(&rotation, values[k * np + l]);
                rho_r[k * np + l] = math::dot(local, e_r);
                rho_t[k * np + l] = math::dot(local, e_t);
                rho_p[k * np + l] = math::dot(local, e_p);
            }
        }
        Ok(SphereSpectralField {
            radius,
            center,
            rotation,
            coeffs: vsh_decompose(grid, &rho_r, &rho_t, &rho_p)?,
        })
    }

    /// Inverse of [`Self::from_grid_vectors`]: world-frame Cartesian vectors
    /// on this sphere's grid.
    pub fn to_grid_vectors(&self, grid: &SphGrid) -> Vec<Vec3> {
        let (rho_r, rho_t, rho_p) = vsh_synthesize(grid, &self.coeffs);
        let (nt, np) = (grid.n_theta(), grid.n_phi());
        let mut out = Vec::with_capacity(nt * np);
        for k in 0..nt {
            let theta = grid.thetas[k];
            let (st, ct) = (theta.sin(), theta.cos());
            for l in 0..np {
                let (sp, cp) = grid.phis[l].sin_cos();
                let e_r = [st * cp, st * sp, ct];
                let e_t = [ct * cp, ct * sp, -st];
                let e_p = [-sp, cp, 0.0];
                let i = k * np + l;
                let local = [
                    rho_r[i] * e_r[0] + rho_t[i] * e_t[0] + rho_p[i] * e_p[0],
                    rho_r[i] * e_r[1] + rho_t[i] * e_t[1] + rho_p[i] * e_p[1],
                    rho_r[i] * e_r[2] + rho_t[i] * e_t[2] + rho_p[i] * e_p[2],
                ];
                out.push(math::mat_vec(&self.rotation, local));
            }
        }
        out
    }

    /// Near-pair workhorse: exterior velocity/pressure with a reusable
    /// workspace; the caller guarantees the target is outside the sphere.
    pub(crate) fn eval_velocity_at(
        &self,
        grid: &SphGrid,
        x_world: Vec3,
        eta: f64,
        tables: &mut AngularTables,
    ) -> (Vec3, f64) {
        let (r, theta, phi) = self.local_spherical(x_world);
        debug_assert!(r > 1.0 - 1e-12, "near-pair velocity target inside sphere");
        tables.fill(theta);
        self.velocity_pressure_local(grid, r.max(1.0), theta, phi, eta, tables)
    }

    /// Near-pair workhorse: exterior traction with a reusable workspace.
    pub(crate) fn eval_traction_at(
        &self,
        grid: &SphGrid,
        x_world: Vec3,
        normal_world: Vec3,
        tables: &mut AngularTables,
    ) -> Vec3 {
        let (r, theta, phi) = self.local_spherical(x_world);
        debug_assert!(r > 1.0 - 1e-12, "near-pair traction target inside sphere");
        tables.fill(theta);
        self.traction_local(grid, r.max(1.0), theta, phi, normal_world, tables)
    }

    fn local_spherical(&self, x_world: Vec3) -> (f64, f64, f64) {
        let d = math::mat_tvec(&self.rotation, math::sub(x_world, self.center));
        let r = math::norm(d) / self.radius;
        let rho = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let mut theta = rho.atan2(d[2]);
        if theta.sin() < POLE_GUARD {
            theta = if theta < PI / 2.0 {
                POLE_GUARD
            } else {
                PI - POLE_GUARD
            };
        }
        let phi = d[1].atan2(d[0]);
        (r, theta, phi)
    }

    /// Exterior single-layer velocity and pressure at a world point strictly
    /// outside the sphere, for fluid viscosity `eta`.
    pub fn eval_single_layer_exterior(
        &self,
        grid: &SphGrid,
        x_world: Vec3,
        eta: f64,
    ) -> Result<(Vec3, f64)> {
        let (r, theta, phi) = self.local_spherical(x_world);
        if r <= 1.0 {
            return Err(SimError::Domain(format!(
                "single-layer target at r/a = {r:.6} is not exterior"
            )));
        }
        let tables = AngularTables::filled(grid.order, theta);
        Ok(self.velocity_pressure_local(grid, r, theta, phi, eta, &tables))
    }

    /// Same map evaluated on the surface itself (the single layer is
    /// continuous there); used for self-interaction. `tables` must be
    /// prefilled at `theta`.
    pub(crate) fn eval_single_layer_surface(
        &self,
        grid: &SphGrid,
        theta: f64,
        phi: f64,
        eta: f64,
        tables: &AngularTables,
    ) -> (Vec3, f64) {
        self.velocity_pressure_local(grid, 1.0, theta, phi, eta, tables)
    }

    pub(crate) fn velocity_pressure_local(
        &self,
        grid: &SphGrid,
        r: f64,
        theta: f64,
        phi: f64,
        eta: f64,
        tables: &AngularTables,
    ) -> (Vec3, f64) {
        let p = grid.order;
        let st = theta.sin();
        let inv_st = 1.0 / st;
        let mut u_sph = [0.0f64; 3];
        let mut pressure = 0.0f64;
        let ladder = PhaseLadder::new(phi);
        let mut radial = RadialLadder::new(r);
        for n in 1..=p {
            let rs = radial.next();
            let mut phase = ladder.start();
            for m in 0..=n {
                let idx = tri_index(n, m);
                let cv = normalized(self.coeffs.v[idx], grid.norm_v[idx]);
                let cw = normalized(self.coeffs.w[idx], grid.norm_w[idx]);
                let cx = normalized(self.coeffs.x[idx], grid.norm_x[idx]);
                let f_v = rs.av * cv + rs.aw * cw;
                let f_w = rs.bw * cw;
                let f_x = rs.cx * cx;
                let y = tables.pbar[idx];
                let dy = tables.dpbar[idx];
                let y_csc = m as f64 * y * inv_st;
                let weight = if m == 0 { 1.0 } else { 2.0 };
                let big_t = f_v + f_w;
                let u_r = (-((n + 1) as f64) * f_v + n as f64 * f_w) * y;
                let u_t = big_t * dy - Complex64::i() * y_csc * f_x;
                let u_p = Complex64::i() * y_csc * big_t + f_x * dy;
                u_sph[0] += weight * (u_r * phase).re;
                u_sph[1] += weight * (u_t * phase).re;
                u_sph[2] += weight * (u_p * phase).re;
                pressure += weight * rs.gw * (cw * phase).re * y;
                phase = ladder.advance(phase);
            }
        }
        let u_local = spherical_to_cartesian(theta, phi, u_sph);
        let scale = self.radius / eta;
        (
            math::scale(math::mat_vec(&self.rotation, u_local), scale),
            pressure,
        )
    }

    /// Exterior traction `sigma . n` at a world point strictly outside the
    /// sphere, with a caller-supplied unit normal. Independent of viscosity.
    pub fn eval_traction_exterior(
        &self,
        grid: &SphGrid,
        x_world: Vec3,
        normal_world: Vec3,
    ) -> Result<Vec3> {
        let (r, theta, phi) = self.local_spherical(x_world);
        if r <= 1.0 - 1e-12 {
            return Err(SimError::Domain(format!(
                "traction target at r/a = {r:.6} is not exterior"
            )));
        }
        let tables = AngularTables::filled(grid.order, theta);
        Ok(self.traction_local(grid, r.max(1.0), theta, phi, normal_world, &tables))
    }

    /// One-sided exterior limit of the traction on the surface itself.
    /// `tables` must be prefilled at `theta`.
    pub(crate) fn eval_traction_surface_exterior_limit(
        &self,
        grid: &SphGrid,
        theta: f64,
        phi: f64,
        normal_world: Vec3,
        tables: &AngularTables,
    ) -> Vec3 {
        self.traction_local(grid, 1.0, theta, phi, normal_world, tables)
    }

    pub(crate) fn traction_local(
        &self,
        grid: &SphGrid,
        r: f64,
        theta: f64,
        phi: f64,
        normal_world: Vec3,
        tables: &AngularTables,
    ) -> Vec3 {
        let p = grid.order;
        let st = theta.sin();
        let ct = theta.cos();
        let inv_st = 1.0 / st;
        let cot = ct * inv_st;
        let inv_r = 1.0 / r;

        // velocity components, the full gradient, and the pressure in the
        // local spherical frame
        let mut u = [0.0f64; 3];
        let mut grad = [[0.0f64; 3]; 3];
        let mut pressure = 0.0f64;
        let ladder = PhaseLadder::new(phi);
        let mut radial = RadialLadder::new(r);
        for n in 1..=p {
            let rs = radial.next();
            let mut phase = ladder.start();
            for m in 0..=n {
                let idx = tri_index(n, m);
                let cv = normalized(self.coeffs.v[idx], grid.norm_v[idx]);
                let cw = normalized(self.coeffs.w[idx], grid.norm_w[idx]);
                let cx = normalized(self.coeffs.x[idx], grid.norm_x[idx]);
                let f_v = rs.av * cv + rs.aw * cw;
                let f_w = rs.bw * cw;
                let f_x = rs.cx * cx;
                let df_v = rs.dav * cv + rs.daw * cw;
                let df_w = rs.dbw * cw;
                let df_x = rs.dcx * cx;
                let mf = m as f64;
                let y = tables.pbar[idx];
                let dy = tables.dpbar[idx];
                let d2y = tables.d2pbar[idx];
                let y_csc = y * inv_st;
                let dy_csc = (dy - y * cot) * inv_st; // d/dt (Y / sin t)
                let i_m = Complex64::new(0.0, mf);

                let big_t = f_v + f_w;
                let big_dt = df_v + df_w;
                let big_r = -((n + 1) as f64) * f_v + n as f64 * f_w;
                let big_dr = -((n + 1) as f64) * df_v + n as f64 * df_w;

                let u_r = big_r * y;
                let u_t = big_t * dy - i_m * f_x * y_csc;
                let u_p = i_m * big_t * y_csc + f_x * dy;

                // radial derivatives
                let dr_ur = big_dr * y;
                let dr_ut = big_dt * dy - i_m * df_x * y_csc;
                let dr_up = i_m * big_dt * y_csc + df_x * dy;
                // theta derivatives
                let dt_ur = big_r * dy;
                let dt_ut = big_t * d2y - i_m * f_x * dy_csc;
                let dt_up = i_m * big_t * dy_csc + f_x * d2y;
                // phi derivatives (each factor e^{im phi} differentiates)
                let dp_ur = i_m * u_r;
                let dp_ut = i_m * u_t;
                let dp_up = i_m * u_p;

                let weight = if m == 0 { 1.0 } else { 2.0 };
                let wphase = weight * phase;
                let re = |z: Complex64| z.re * wphase.re - z.im * wphase.im;
                u[0] += re(u_r);
                u[1] += re(u_t);
                u[2] += re(u_p);
                pressure += rs.gw * re(cw) * y;

                grad[0][0] += re(dr_ur);
                grad[1][0] += re(dr_ut);
                grad[2][0] += re(dr_up);
                grad[0][1] += re(dt_ur - u_t) * inv_r;
                grad[1][1] += re(dt_ut + u_r) * inv_r;
                grad[2][1] += re(dt_up) * inv_r;
                grad[0][2] += re(dp_ur * inv_st - u_p) * inv_r;
                grad[1][2] += re(dp_ut * inv_st - u_p * cot) * inv_r;
                grad[2][2] += re(dp_up * inv_st + u_r + u_t * cot) * inv_r;
                phase = ladder.advance(phase);
            }
        }

        // sigma = -p I + grad u + (grad u)^T in the spherical frame
        let mut sigma = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                sigma[i][j] = grad[i][j] + grad[j][i];
            }
            sigma[i][i] -= pressure;
        }
        // rotate spherical -> grid-local Cartesian -> world
        let q = frame_matrix(theta, phi);
        let sigma_local = math::mat_mul(&q, &math::mat_mul(&sigma, &math::mat_transpose(&q)));
        let n_local = math::mat_tvec(&self.rotation, normal_world);
        let t_local = math::mat_vec(&sigma_local, n_local);
        math::mat_vec(&self.rotation, t_local)
    }
}

/// Columns are the spherical unit vectors (e_r, e_t, e_p) expressed in the
/// local Cartesian frame.
fn frame_matrix(theta: f64, phi: f64) -> Mat3 {
    let (st, ct) = (theta.sin(), theta.cos());
    let (sp, cp) = (phi.sin(), phi.cos());
    [
        [st * cp, ct * cp, -sp],
        [st * sp, ct * sp, cp],
        [ct, -st, 0.0],
    ]
}

fn spherical_to_cartesian(theta: f64, phi: f64, v: Vec3) -> Vec3 {
    math::mat_vec(&frame_matrix(theta, phi), v)
}
