//! Restarted GMRES for matrix-free linear operators.
//!
//! Used on the second-kind boundary-integral system, which is well enough
//! conditioned that no preconditioner is worth its cost: a few tens of
//! iterations suffice regardless of problem size.

use crate::error::{Result, SimError};

pub struct GmresOptions {
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tolerance: 1e-8,
            restart: 60,
            max_iterations: 400,
        }
    }
}

pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` with the operator given as a closure; `x` holds the
/// initial guess on entry and the solution on success. The residual test is
/// relative to `||b||`.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    opts: &GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    assert_eq!(x.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(GmresOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let tol_abs = opts.tolerance * b_norm;
    let m = opts.restart.max(1);
    let mut total_iters = 0;

    loop {
        // a zero guess needs no operator application to form the residual
        let mut r: Vec<f64> = if x.iter().all(|&v| v == 0.0) {
            b.to_vec()
        } else {
            let ax = apply(x);
            b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect()
        };
        let beta = norm(&r);
        if beta <= tol_abs {
            return Ok(GmresOutcome {
                iterations: total_iters,
                residual: beta / b_norm,
            });
        }
        for v in r.iter_mut() {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        // Hessenberg in column-major with Givens rotations applied on the fly
        let mut h = vec![0.0; (m + 1) * m];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            total_iters += 1;
            let mut w = apply(&basis[k]);
            // modified Gram-Schmidt
            for j in 0..=k {
                let hjk = dot(&w, &basis[j]);
                h[j * m + k] = hjk;
                for (wi, vi) in w.iter_mut().zip(basis[j].iter()) {
                    *wi -= hjk * vi;
                }
            }
            let h_next = norm(&w);
            h[(k + 1) * m + k] = h_next;
            if h_next > 1e-300 {
                for v in w.iter_mut() {
                    *v /= h_next;
                }
            }
            basis.push(w);
            // apply accumulated rotations to the new column
            for j in 0..k {
                let tmp = cs[j] * h[j * m + k] + sn[j] * h[(j + 1) * m + k];
                h[(j + 1) * m + k] = -sn[j] * h[j * m + k] + cs[j] * h[(j + 1) * m + k];
                h[j * m + k] = tmp;
            }
            let denom =
                (h[k * m + k] * h[k * m + k] + h[(k + 1) * m + k] * h[(k + 1) * m + k]).sqrt();
            if denom < 1e-300 {
                k_used = k + 1;
                break;
            }
            cs[k] = h[k * m + k] / denom;
            sn[k] = h[(k + 1) * m + k] / denom;
            h[k * m + k] = denom;
            h[(k + 1) * m + k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol_abs {
                break;
            }
            if total_iters >= opts.max_iterations {
                break;
            }
        }

        // back substitution on the k_used x k_used triangle
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut v = g[i];
            for j in i + 1..k_used {
                v -= h[i * m + j] * y[j];
            }
            y[i] = v / h[i * m + i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(basis[j].iter()) {
                *xi += yj * vi;
            }
        }

        let res = g[k_used].abs();
        if res <= tol_abs {
            return Ok(GmresOutcome {
                iterations: total_iters,
                residual: res / b_norm,
            });
        }
        if total_iters >= opts.max_iterations {
            // recompute the true residual for the error report
            let ax = apply(x);
            let res_true = b
                .iter()
                .zip(ax.iter())
                .map(|(bi, ai)| (bi - ai) * (bi - ai))
                .sum::<f64>()
                .sqrt();
            return Err(SimError::SolverDidNotConverge {
                residual: res_true / b_norm,
                iterations: total_iters,
            });
        }
    }
}
