//! Matrix-free solvers for the per-step complementarity problem.
//!
//! The contact problem `0 <= gamma  perp  M gamma + q >= 0` with `M`
//! symmetric positive (semi)definite is solved as the box-constrained
//! quadratic program `min 0.5 g'Mg + q'g, g >= 0`. The workhorse is
//! projected gradient descent with Barzilai-Borwein step sizes; an
//! accelerated PGD is kept purely for cost comparisons, and a small
//! active-set enumeration serves as an exact oracle in tests.
//!
//! Every application of `M` is counted as one MVOP, since in the suspension
//! setting each one hides a full mobility solve.

use crate::error::{Result, SimError};

/// Matrix-free CQP instance. `apply_m` must be linear and symmetric
/// positive semidefinite; this is asserted statistically in tests, never at
/// runtime.
pub struct CqpProblem<'a> {
    pub apply_m: &'a mut dyn FnMut(&[f64]) -> Vec<f64>,
    pub q: &'a [f64],
    pub tolerance: f64,
    pub max_steps: usize,
    /// Initial iterate; projected to the nonnegative orthant before use.
    pub gamma0: Option<Vec<f64>>,
}

/// Outcome counters for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// Gradient-descent steps taken (0 when the initial iterate passes).
    pub steps: usize,
    /// Operator applications, each one a mobility solve.
    pub mvops: usize,
    /// Final minimum-map residual.
    pub residual: f64,
    pub converged: bool,
}

/// Componentwise minimum-map residual `|| min(gamma, g) ||_2`; zero exactly
/// at a complementarity solution.
pub fn min_map_residual(gamma: &[f64], g: &[f64]) -> f64 {
    assert_eq!(gamma.len(), g.len(), "min_map_residual length mismatch");
    gamma
        .iter()
        .zip(g.iter())
        .map(|(&a, &b)| {
            let m = a.min(b);
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

fn project(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

struct CountedOp<'a, 'b> {
    op: &'a mut (dyn FnMut(&[f64]) -> Vec<f64> + 'b),
    count: usize,
}

impl<'a, 'b> CountedOp<'a, 'b> {
    fn apply(&mut self, v: &[f64]) -> Vec<f64> {
        self.count += 1;
        (self.op)(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Barzilai-Borwein step choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbStep {
    /// `s's / s'y` (default).
    Bb1,
    /// `s'y / y'y`.
    Bb2,
    /// Bb1 on odd steps, Bb2 on even steps.
    Alternating,
}

/// Projected gradient descent with Barzilai-Borwein step sizes.
///
/// Early exit: when the initial iterate already satisfies the residual test
/// only one MVOP is spent. On step-size breakdown (`s'y <= 0`, possible for
/// semidefinite operators) the iteration falls back to the exact Cauchy step
/// `g'g / g'Mg` at the cost of one extra MVOP.
///
/// Hitting the iteration cap is not an error: the best iterate is returned
/// with `converged = false` and the caller decides what to do.
pub fn solve_bbpgd(problem: &mut CqpProblem) -> Result<(Vec<f64>, SolveStats)> {
    solve_bbpgd_with(problem, BbStep::Bb1)
}

pub fn solve_bbpgd_with(
    problem: &mut CqpProblem,
    step_rule: BbStep,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = problem.q.len();
    if n == 0 {
        return Ok((
            Vec::new(),
            SolveStats {
                steps: 0,
                mvops: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }
    if problem.q.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidConfig(
            "q contains non-finite entries".into(),
        ));
    }
    let mut op = CountedOp {
        op: problem.apply_m,
        count: 0,
    };
    let tol = problem.tolerance;

    let mut gamma = problem.gamma0.clone().unwrap_or_else(|| vec![0.0; n]);
    assert_eq!(gamma.len(), n, "gamma0 length mismatch");
    project(&mut gamma);

    let mut g: Vec<f64> = op.apply(&gamma);
    for (gi, qi) in g.iter_mut().zip(problem.q.iter()) {
        *gi += qi;
    }
    let mut residual = min_map_residual(&gamma, &g);
    if residual < tol {
        return Ok((
            gamma,
            SolveStats {
                steps: 0,
                mvops: op.count,
                residual,
                converged: true,
            },
        ));
    }

    // first step size: exact minimizer along the gradient
    let mut alpha = {
        let mg = op.apply(&g);
        let den = dot(&g, &mg);
        let num = dot(&g, &g);
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    };

    let mut best = (gamma.clone(), residual);
    let mut converged = false;
    let mut steps = 0;

    for j in 1..=problem.max_steps {
        let gamma_prev = gamma.clone();
        let g_prev = g.clone();

        for (x, gi) in gamma.iter_mut().zip(g_prev.iter()) {
            *x -= alpha * gi;
        }
        project(&mut gamma);

        g = op.apply(&gamma);
        for (gi, qi) in g.iter_mut().zip(problem.q.iter()) {
            *gi += qi;
        }
        if g.iter().any(|v| v.is_nan()) {
            return Err(SimError::NaNGradient { step: j });
        }
        steps = j;
        residual = min_map_residual(&gamma, &g);
        if residual < best.1 {
            best = (gamma.clone(), residual);
        }
        if residual < tol {
            converged = true;
            break;
        }

        let s: Vec<f64> = gamma
            .iter()
            .zip(gamma_prev.iter())
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = g.iter().zip(g_prev.iter()).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let use_bb1 = match step_rule {
            BbStep::Bb1 => true,
            BbStep::Bb2 => false,
            BbStep::Alternating => j % 2 == 1,
        };
        let candidate = if use_bb1 {
            let ss = dot(&s, &s);
            if sy > 0.0 {
                Some(ss / sy)
            } else {
                None
            }
        } else {
            let yy = dot(&y, &y);
            if sy > 0.0 && yy > 0.0 {
                Some(sy / yy)
            } else {
                None
            }
        };
        alpha = match candidate {
            Some(a) if a.is_finite() && a > 0.0 => a,
            _ => {
                // breakdown: fall back to the Cauchy step for this iteration
                let mg = op.apply(&g);
                let den = dot(&g, &mg);
                if den > 0.0 {
                    dot(&g, &g) / den
                } else {
                    1.0
                }
            }
        };
    }

    if converged {
        Ok((
            gamma,
            SolveStats {
                steps,
                mvops: op.count,
                residual,
                converged: true,
            },
        ))
    } else {
        let (gamma, residual) = best;
        Ok((
            gamma,
            SolveStats {
                steps,
                mvops: op.count,
                residual,
                converged: false,
            },
        ))
    }
}

/// Accelerated projected gradient descent with adaptive Lipschitz estimation.
///
/// Kept only as a cost baseline against [`solve_bbpgd`]: every backtracking
/// probe of the local Lipschitz constant costs an operator application, which
/// is exactly what makes it expensive when `M` hides a mobility solve.
pub fn solve_apgd(problem: &mut CqpProblem) -> Result<(Vec<f64>, SolveStats)> {
    let n = problem.q.len();
    if n == 0 {
        return Ok((
            Vec::new(),
            SolveStats {
                steps: 0,
                mvops: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }
    let mut op = CountedOp {
        op: problem.apply_m,
        count: 0,
    };
    let tol = problem.tolerance;
    let q = problem.q;

    let mut gamma = problem.gamma0.clone().unwrap_or_else(|| vec![0.0; n]);
    project(&mut gamma);

    let grad_at = |op: &mut CountedOp, x: &[f64]| -> Vec<f64> {
        let mut g = op.apply(x);
        for (gi, qi) in g.iter_mut().zip(q.iter()) {
            *gi += qi;
        }
        g
    };
    // objective value and gradient in one application
    let f_val = |mx: &[f64], x: &[f64]| -> f64 { 0.5 * dot(mx, x) + dot(q, x) };

    let g0 = grad_at(&mut op, &gamma);
    let mut residual = min_map_residual(&gamma, &g0);
    if residual < tol {
        return Ok((
            gamma,
            SolveStats {
                steps: 0,
                mvops: op.count,
                residual,
                converged: true,
            },
        ));
    }

    // initial Lipschitz estimate from a one-sided probe
    let mut lipschitz = {
        let probe: Vec<f64> = gamma.iter().map(|v| v + 1.0).collect();
        let d: Vec<f64> = probe.iter().zip(gamma.iter()).map(|(a, b)| a - b).collect();
        let md = op.apply(&d);
        let num = dot(&md, &md).sqrt();
        let den = dot(&d, &d).sqrt();
        (num / den).max(1e-12)
    };

    let mut y = gamma.clone();
    let mut theta: f64 = 1.0;
    let mut best = (gamma.clone(), residual);
    let mut converged = false;
    let mut steps = 0;

    for j in 1..=problem.max_steps {
        steps = j;
        let my = op.apply(&y);
        let mut gy = my.clone();
        for (gi, qi) in gy.iter_mut().zip(q.iter()) {
            *gi += qi;
        }
        let fy = f_val(&my, &y);

        // backtrack until the local quadratic model majorizes f
        let mut gamma_next;
        let mut m_next;
        loop {
            gamma_next = y
                .iter()
                .zip(gy.iter())
                .map(|(yi, gi)| yi - gi / lipschitz)
                .collect::<Vec<f64>>();
            project(&mut gamma_next);
            m_next = op.apply(&gamma_next);
            let f_next = f_val(&m_next, &gamma_next);
            let d: Vec<f64> = gamma_next
                .iter()
                .zip(y.iter())
                .map(|(a, b)| a - b)
                .collect();
            let bound = fy + dot(&gy, &d) + 0.5 * lipschitz * dot(&d, &d);
            if f_next <= bound + 1e-14 * (1.0 + f_next.abs()) {
                break;
            }
            lipschitz *= 2.0;
        }

        let mut g_next = m_next;
        for (gi, qi) in g_next.iter_mut().zip(q.iter()) {
            *gi += qi;
        }
        if g_next.iter().any(|v| v.is_nan()) {
            return Err(SimError::NaNGradient { step: j });
        }
        residual = min_map_residual(&gamma_next, &g_next);
        if residual < best.1 {
            best = (gamma_next.clone(), residual);
        }
        if residual < tol {
            gamma = gamma_next;
            converged = true;
            break;
        }

        let theta_next = 0.5 * (-theta * theta + theta * (theta * theta + 4.0).sqrt());
        let beta = theta * (1.0 - theta) / (theta * theta + theta_next);
        let diff: Vec<f64> = gamma_next
            .iter()
            .zip(gamma.iter())
            .map(|(a, b)| a - b)
            .collect();
        y = gamma_next
            .iter()
            .zip(diff.iter())
            .map(|(a, d)| a + beta * d)
            .collect();
        // restart the momentum when it points uphill
        if dot(&gy, &diff) > 0.0 {
            y = gamma_next.clone();
            theta = 1.0;
        } else {
            theta = theta_next;
        }
        lipschitz *= 0.9;
        gamma = gamma_next;
    }

    if !converged {
        let (g, r) = best;
        return Ok((
            g,
            SolveStats {
                steps,
                mvops: op.count,
                residual: r,
                converged: false,
            },
        ));
    }
    Ok((
        gamma,
        SolveStats {
            steps,
            mvops: op.count,
            residual,
            converged: true,
        },
    ))
}

/// Exact LCP solution by active-set enumeration; test oracle only.
///
/// For each index subset S, solves `M_SS gamma_S = -q_S` and accepts when
/// `gamma_S >= 0` and the complementary gradient is nonnegative off S. For
/// SPD `M` the accepted solution is unique.
pub fn enumerate_lcp_oracle(m: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    let n = q.len();
    assert_eq!(m.len(), n * n, "M must be dense n x n");
    assert!(n <= 14, "enumeration oracle limited to n <= 14");
    let slack = 1e-11;
    for mask in 0u32..(1u32 << n) {
        let active: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let k = active.len();
        let mut gamma = vec![0.0; n];
        if k > 0 {
            let mut sub = vec![0.0; k * k];
            let mut rhs = vec![0.0; k];
            for (r, &i) in active.iter().enumerate() {
                rhs[r] = -q[i];
                for (c, &j) in active.iter().enumerate() {
                    sub[r * k + c] = m[i * n + j];
                }
            }
            let Some(sol) = crate::math::solve_dense(&sub, &rhs, k) else {
                continue;
            };
            if sol.iter().any(|&v| v < -slack) {
                continue;
            }
            for (r, &i) in active.iter().enumerate() {
                gamma[i] = sol[r].max(0.0);
            }
        }
        let feasible = (0..n).all(|i| {
            if mask & (1 << i) != 0 {
                return true;
            }
            let g: f64 = (0..n).map(|j| m[i * n + j] * gamma[j]).sum::<f64>() + q[i];
            g >= -slack
        });
        if feasible {
            return Ok(gamma);
        }
    }
    Err(SimError::NoFeasibleActiveSet)
}

/// Absolute error bound `||gamma - gamma*|| <= (||M|| + 1) / lambda_min * phi`
/// for SPD operators. Diagnostic only; the caller supplies the spectral data
/// (e.g. from power iteration).
pub fn error_bound_abs(phi: f64, norm_m: f64, lambda_min: f64) -> Result<f64> {
    if lambda_min <= 0.0 {
        return Err(SimError::Domain(format!(
            "error_bound_abs needs lambda_min > 0, got {lambda_min}"
        )));
    }
    Ok((norm_m + 1.0) / lambda_min * phi)
}

/// Post-solve complementarity certificate, evaluated with one fresh gradient.
#[derive(Debug, Clone, Copy)]
pub struct Certificate {
    pub min_gamma: f64,
    pub min_gradient: f64,
    pub complementarity: f64,
    pub residual: f64,
}

impl Certificate {
    /// Check `gamma >= 0`, `(M gamma + q) >= -tol`, and
    /// `|gamma'(M gamma + q)| <= tol (1 + ||gamma||)`.
    pub fn evaluate(gamma: &[f64], g: &[f64], tol: f64) -> (Self, bool) {
        let min_gamma = gamma.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_gradient = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let comp = dot(gamma, g).abs();
        let gnorm = dot(gamma, gamma).sqrt();
        let cert = Certificate {
            min_gamma: if gamma.is_empty() { 0.0 } else { min_gamma },
            min_gradient: if g.is_empty() { 0.0 } else { min_gradient },
            complementarity: comp,
            residual: min_map_residual(gamma, g),
        };
        let ok = cert.min_gamma >= 0.0 && cert.min_gradient >= -tol && comp <= tol * (1.0 + gnorm);
        (cert, ok)
    }
}
