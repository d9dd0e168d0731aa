//! Scalar spherical harmonics on the (p+1) x (2p+1) product grid.
//!
//! Colatitude nodes are Gauss-Legendre points in cos(theta), longitudes are
//! uniform; this pair integrates products of harmonics up to order p exactly,
//! so the discrete basis is orthonormal to rounding. Normalization is
//!
//! ```text
//! Y_n^m = sqrt((2n+1)/4pi) sqrt((n-m)!/(n+m)!) P_n^m(cos t) e^{i m phi}
//! ```
//!
//! with the Condon-Shortley sign carried inside `P_n^m`. All transformed
//! fields are real, so only coefficients with m >= 0 are stored; the m < 0
//! half is implied by conjugate symmetry. The Legendre transform is a dense
//! matrix product; a fast transform buys nothing at the orders used here.

use crate::error::{Result, SimError};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Flat index into triangular (n, m>=0) coefficient storage.
#[inline]
pub fn tri_index(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

pub fn tri_len(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Newton from the Chebyshev-like initial guess
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_poly_and_deriv(n, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre_poly_and_deriv(n, x);
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = 2.0 / ((1.0 - x * x) * dpn * dpn);
    }
    (nodes, weights)
}

fn legendre_poly_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fully normalized associated Legendre values `Pbar_n^m(cos t)` for all
/// `0 <= m <= n <= p` at one colatitude, in triangular layout. `Y_n^m =
/// Pbar_n^m e^{i m phi}` for `m >= 0`.
pub fn legendre_table(p: usize, cos_t: f64, sin_t: f64, out: &mut [f64]) {
    assert_eq!(out.len(), tri_len(p));
    out[tri_index(0, 0)] = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=p {
        // diagonal: Pbar_m^m with Condon-Shortley sign
        let prev = out[tri_index(m - 1, m - 1)];
        let mf = m as f64;
        out[tri_index(m, m)] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * prev;
    }
    for m in 0..p {
        let mf = m as f64;
        out[tri_index(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * cos_t * out[tri_index(m, m)];
    }
    for m in 0..=p {
        for n in (m + 2)..=p {
            let nf = n as f64;
            let mf = m as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0))
                .sqrt();
            out[tri_index(n, m)] =
                a * (cos_t * out[tri_index(n - 1, m)] - b * out[tri_index(n - 2, m)]);
        }
    }
}

/// Colatitude derivatives of the normalized Legendre values via the ladder
/// `d/dt Pbar_n^m = m cot(t) Pbar_n^m + sqrt((n-m)(n+m+1)) Pbar_n^{m+1}`.
pub fn legendre_theta_derivative(p: usize, cos_t: f64, sin_t: f64, pbar: &[f64], out: &mut [f64]) {
    let cot = cos_t / sin_t;
    for n in 0..=p {
        for m in 0..=n {
            let mut d = m as f64 * cot * pbar[tri_index(n, m)];
            if m < n {
                d += (((n - m) * (n + m + 1)) as f64).sqrt() * pbar[tri_index(n, m + 1)];
            }
            out[tri_index(n, m)] = d;
        }
    }
}

/// Evaluate `Y_n^m(theta, phi)` in the crate's normalization; valid for any
/// `|m| <= n`.
pub fn eval_ynm(n: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() as usize > n {
        return Err(SimError::Domain(format!(
            "|m| = {} exceeds n = {n}",
            m.abs()
        )));
    }
    let p = n;
    let mut tab = vec![0.0; tri_len(p)];
    legendre_table(p, theta.cos(), theta.sin(), &mut tab);
    let ma = m.unsigned_abs() as usize;
    let mut val = tab[tri_index(n, ma)];
    if m < 0 && ma % 2 == 1 {
        val = -val;
    }
    let phase = Complex64::from_polar(1.0, m as f64 * phi);
    Ok(val * phase)
}

/// The quadrature grid shared by every sphere of a given order, together
/// with per-node Legendre tables and the VSH basis norms.
pub struct SphGrid {
    pub order: usize,
    /// cos(theta) at each of the p+1 rows, ascending.
    pub nodes: Vec<f64>,
    /// Gauss-Legendre weights matching `nodes`.
    pub weights: Vec<f64>,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// `Pbar` per row, triangular layout.
    pub pbar: Vec<Vec<f64>>,
    /// `d Pbar / d theta` per row.
    pub dpbar: Vec<Vec<f64>>,
    /// Squared norms `|V_n^m|^2, |W_n^m|^2, |X_n^m|^2` on the unit sphere,
    /// computed by grid quadrature at setup (triangular layout).
    pub norm_v: Vec<f64>,
    pub norm_w: Vec<f64>,
    pub norm_x: Vec<f64>,
}

impl SphGrid {
    pub fn n_theta(&self) -> usize {
        self.order + 1
    }

    pub fn n_phi(&self) -> usize {
        2 * self.order + 1
    }

    pub fn n_points(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    /// Quadrature weight of grid point `(row k, column l)` on the unit
    /// sphere (surface measure, not solid angle per node).
    #[inline]
    pub fn point_weight(&self, k: usize) -> f64 {
        self.weights[k] * 2.0 * PI / self.n_phi() as f64
    }

    /// Unit direction of grid point `(k, l)` in the grid's own frame.
    #[inline]
    pub fn direction(&self, k: usize, l: usize) -> [f64; 3] {
        let st = self.thetas[k].sin();
        let ct = self.nodes[k];
        let (sp, cp) = self.phis[l].sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn new(order: usize) -> Self {
        let p = order;
        let (nodes, weights) = gauss_legendre(p + 1);
        let thetas: Vec<f64> = nodes.iter().map(|x| x.acos()).collect();
        let phis: Vec<f64> = (0..2 * p + 1)
            .map(|l| 2.0 * PI * l as f64 / (2 * p + 1) as f64)
            .collect();
        let mut pbar = Vec::with_capacity(p + 1);
        let mut dpbar = Vec::with_capacity(p + 1);
        for k in 0..=p {
            let mut tab = vec![0.0; tri_len(p)];
            let sin_t = thetas[k].sin();
            legendre_table(p, nodes[k], sin_t, &mut tab);
            let mut dt = vec![0.0; tri_len(p)];
            legendre_theta_derivative(p, nodes[k], sin_t, &tab, &mut dt);
            pbar.push(tab);
            dpbar.push(dt);
        }

        // Basis norms by quadrature. Analytically |V|^2 = (n+1)(2n+1),
        // |W|^2 = n(2n+1), |X|^2 = n(n+1); computing them from the grid
        // removes any transcription risk and is checked against the closed
        // forms in tests.
        let mut norm_v = vec![0.0; tri_len(p)];
        let mut norm_w = vec![0.0; tri_len(p)];
        let mut norm_x = vec![0.0; tri_len(p)];
        for n in 0..=p {
            for m in 0..=n {
                let idx = tri_index(n, m);
                let (mut nv, mut nw, mut nx) = (0.0, 0.0, 0.0);
                for k in 0..=p {
                    let w = weights[k] * 2.0 * PI;
                    let st = thetas[k].sin();
                    let y = pbar[k][idx];
                    let dy = dpbar[k][idx];
                    // |G|^2 = |dY/dt|^2 + m^2 |Y|^2 / sin^2 t, radial parts add
                    let g2 = dy * dy + (m as f64 / st).powi(2) * y * y;
                    nv += w * (g2 + ((n + 1) as f64).powi(2) * y * y);
                    nw += w * (g2 + (n as f64).powi(2) * y * y);
                    nx += w * g2;
                }
                norm_v[idx] = nv;
                norm_w[idx] = nw;
                norm_x[idx] = nx;
            }
        }

        SphGrid {
            order,
            nodes,
            weights,
            thetas,
            phis,
            pbar,
            dpbar,
            norm_v,
            norm_w,
            norm_x,
        }
    }
}

/// Forward scalar transform of a real grid field (row-major `(k, l)`), to
/// triangular m >= 0 coefficients of the orthonormal basis.
pub fn sht_forward(grid: &SphGrid, values: &[f64]) -> Result<Vec<Complex64>> {
    let (nt, np) = (grid.n_theta(), grid.n_phi());
    if values.len() != nt * np {
        return Err(SimError::DimensionMismatch {
            context: "sht_forward",
            expected: nt * np,
            got: values.len(),
        });
    }
    let p = grid.order;
    // Fourier in phi per row: F(k, m) = sum_l f e^{-i m phi_l} * (2 pi / np)
    let mut fourier = vec![Complex64::new(0.0, 0.0); nt * (p + 1)];
    let scale = 2.0 * PI / np as f64;
    for k in 0..nt {
        for m in 0..=p {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..np {
                let ang = -(m as f64) * grid.phis[l];
                acc += values[k * np + l] * Complex64::from_polar(1.0, ang);
            }
            fourier[k * (p + 1) + m] = acc * scale;
        }
    }
    // Legendre transform per m
    let mut coeffs = vec![Complex64::new(0.0, 0.0); tri_len(p)];
    for n in 0..=p {
        for m in 0..=n {
            let idx = tri_index(n, m);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..nt {
                acc += grid.weights[k] * grid.pbar[k][idx] * fourier[k * (p + 1) + m];
            }
            coeffs[idx] = acc;
        }
    }
    Ok(coeffs)
}

/// Inverse scalar transform back to the real grid field.
pub fn sht_inverse(grid: &SphGrid, coeffs: &[Complex64]) -> Result<Vec<f64>> {
    let p = grid.order;
    if coeffs.len() != tri_len(p) {
        return Err(SimError::DimensionMismatch {
            context: "sht_inverse",
            expected: tri_len(p),
            got: coeffs.len(),
        });
    }
    let (nt, np) = (grid.n_theta(), grid.n_phi());
    let mut values = vec![0.0; nt * np];
    for k in 0..nt {
        // collapse n first: g(m) = sum_n c_{nm} Pbar_{nm}(x_k)
        let mut gm = vec![Complex64::new(0.0, 0.0); p + 1];
        for n in 0..=p {
            for m in 0..=n {
                gm[m] += coeffs[tri_index(n, m)] * grid.pbar[k][tri_index(n, m)];
            }
        }
        for l in 0..np {
            let mut v = gm[0].re;
            for m in 1..=p {
                let phase = Complex64::from_polar(1.0, m as f64 * grid.phis[l]);
                v += 2.0 * (gm[m] * phase).re;
            }
            values[k * np + l] = v;
        }
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        // exact for degree <= 11: try x^10 -> 2/11
        let s: f64 = x
            .iter()
            .zip(w.iter())
            .map(|(xi, wi)| wi * xi.powi(10))
            .sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let s1: f64 = w.iter().sum();
        assert!((s1 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn y00_is_constant() {
        let v = eval_ynm(0, 0, 1.1, 2.3).unwrap();
        assert!((v.re - (1.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn ynm_rejects_bad_m() {
        assert!(eval_ynm(2, 3, 0.5, 0.0).is_err());
    }

    #[test]
    fn ynm_negative_m_symmetry() {
        for (n, m) in [(3usize, 2i64), (5, 1), (4, 4)] {
            let theta = 0.9;
            let phi = 1.7;
            let plus = eval_ynm(n, m, theta, phi).unwrap();
            let minus = eval_ynm(n, -m, theta, phi).unwrap();
            let want = plus.conj() * if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((minus - want).norm() < 1e-14);
        }
    }

    #[test]
    fn grid_orthonormality() {
        let p = 8;
        let grid = SphGrid::new(p);
        // check a spread of mode pairs including the diagonal
        let modes = [(0usize, 0i64), (1, 0), (2, 1), (5, -3), (8, 8), (7, 2)];
        for &(n1, m1) in &modes {
            for &(n2, m2) in &modes {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..grid.n_theta() {
                    for l in 0..grid.n_phi() {
                        let y1 = eval_ynm(n1, m1, grid.thetas[k], grid.phis[l]).unwrap();
                        let y2 = eval_ynm(n2, m2, grid.thetas[k], grid.phis[l]).unwrap();
                        acc += grid.point_weight(k) * y1 * y2.conj();
                    }
                }
                let want = if n1 == n2 && m1 == m2 { 1.0 } else { 0.0 };
                assert!(
                    (acc.re - want).abs() < 1e-12 && acc.im.abs() < 1e-12,
                    "({n1},{m1}) x ({n2},{m2}) = {acc}"
                );
            }
        }
    }

    #[test]
    fn forward_of_constant_field() {
        let grid = SphGrid::new(5);
        let values = vec![1.0; grid.n_points()];
        let c = sht_forward(&grid, &values).unwrap();
        assert!((c[tri_index(0, 0)].re - (4.0 * PI).sqrt()).abs() < 1e-13);
        for n in 1..=5 {
            for m in 0..=n {
                assert!(c[tri_index(n, m)].norm() < 1e-13);
            }
        }
    }

    #[test]
    fn forward_isolates_single_mode() {
        let p = 6;
        let grid = SphGrid::new(p);
        let mut values = vec![0.0; grid.n_points()];
        for k in 0..grid.n_theta() {
            for l in 0..grid.n_phi() {
                values[k * grid.n_phi() + l] =
                    eval_ynm(3, 2, grid.thetas[k], grid.phis[l]).unwrap().re;
            }
        }
        let c = sht_forward(&grid, &values).unwrap();
        for n in 0..=p {
            for m in 0..=n {
                let mag = c[tri_index(n, m)].norm();
                if n == 3 && m == 2 {
                    assert!((mag - 0.5).abs() < 1e-12, "Re Y32 has coefficient 1/2");
                } else {
                    assert!(mag < 1e-12, "unexpected energy at ({n},{m}): {mag}");
                }
            }
        }
    }

    #[test]
    fn roundtrip_random_bandlimited() {
        let p = 10;
        let grid = SphGrid::new(p);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); tri_len(p)];
        for n in 0..=p {
            for m in 0..=n {
                let re = rng.gen::<f64>() - 0.5;
                let im = if m == 0 { 0.0 } else { rng.gen::<f64>() - 0.5 };
                coeffs[tri_index(n, m)] = Complex64::new(re, im);
            }
        }
        let values = sht_inverse(&grid, &coeffs).unwrap();
        let back = sht_forward(&grid, &values).unwrap();
        for i in 0..coeffs.len() {
            assert!(
                (back[i] - coeffs[i]).norm() < 1e-12,
                "coefficient {i} drifted: {} vs {}",
                back[i],
                coeffs[i]
            );
        }
    }

    #[test]
    fn cached_norms_match_closed_forms() {
        let p = 9;
        let grid = SphGrid::new(p);
        for n in 0..=p {
            for m in 0..=n {
                let idx = tri_index(n, m);
                let nf = n as f64;
                assert!(
                    (grid.norm_v[idx] - (nf + 1.0) * (2.0 * nf + 1.0)).abs() < 1e-10,
                    "|V|^2 at ({n},{m}): {}",
                    grid.norm_v[idx]
                );
                assert!((grid.norm_w[idx] - nf * (2.0 * nf + 1.0)).abs() < 1e-10);
                assert!((grid.norm_x[idx] - nf * (nf + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn legendre_stable_at_high_order() {
        let mut tab = vec![0.0; tri_len(48)];
        legendre_table(48, 0.3, (1.0f64 - 0.09).sqrt(), &mut tab);
        assert!(tab.iter().all(|v| v.is_finite()));
        // spot value: Pbar_48^0(0.3) via the plain Legendre recurrence
        let (p48, _) = legendre_poly_and_deriv(48, 0.3);
        let want = ((2.0 * 48.0 + 1.0) / (4.0 * PI)).sqrt() * p48;
        assert!((tab[tri_index(48, 0)] - want).abs() < 1e-12);
    }
}
