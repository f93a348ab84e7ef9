//! Sparse reconstruction: greedy orthogonal matching pursuit, an
//! l1-penalized proximal-gradient solver, and an empirical restricted
//! isometry probe.

use ndarray::{Array1, Array2};

use crate::error::{CsError, Result};
use crate::keys::{domain, BitStream};
use crate::linalg;

/// An outsourced reconstruction task: the sensing matrix and one
/// measurement vector.
#[derive(Clone, Debug)]
pub struct SsrTask {
    a: Array2<f64>,
    y: Array1<f64>,
}

impl SsrTask {
    pub fn new(a: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m > n {
            return Err(CsError::InvalidDimension(format!(
                "sensing matrix must have no more rows than columns, got {m}x{n}"
            )));
        }
        if y.len() != m {
            return Err(CsError::DimensionMismatch(format!(
                "measurement vector has {} entries, matrix has {m} rows",
                y.len()
            )));
        }
        for j in 0..n {
            if a.column(j).iter().all(|&v| v == 0.0) {
                return Err(CsError::DegenerateInput(format!("column {j} is all zero")));
            }
        }
        if a.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(CsError::NonFinite("reconstruction task".into()));
        }
        Ok(SsrTask { a, y })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn measurements(&self) -> &Array1<f64> {
        &self.y
    }
}

/// Solver selection plus its parameters. Exactly one mode exists per value.
#[derive(Clone, Debug)]
pub enum SolverConfig {
    /// Greedy atom selection with a sparsity budget and a residual stop.
    /// `epsilon = None` defaults to `1e-6 * ||y||` at solve time.
    Omp {
        sparsity: usize,
        epsilon: Option<f64>,
    },
    /// Proximal gradient on `0.5 ||y - A s||^2 + lambda ||s||_1` with
    /// momentum; the step is `1 / (1.05 * ||A||_2^2)`.
    Bpdn {
        lambda: f64,
        max_iters: usize,
        tol: f64,
    },
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub s_hat: Array1<f64>,
    /// `||y - A s_hat||_2`, recomputed from scratch at exit.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm after each accepted iterate (both solvers).
    pub residual_history: Vec<f64>,
    /// Objective value after each accepted iterate (l1 solver only).
    pub objective_history: Vec<f64>,
}

pub fn solve(task: &SsrTask, config: &SolverConfig) -> Result<ReconstructionResult> {
    match config {
        SolverConfig::Omp { sparsity, epsilon } => omp(task, *sparsity, *epsilon),
        SolverConfig::Bpdn {
            lambda,
            max_iters,
            tol,
        } => bpdn(task, *lambda, *max_iters, *tol),
    }
}

/// Orthogonal matching pursuit.
///
/// Each round selects the unused column with the largest normalized
/// correlation against the residual (ties broken toward the lowest index,
/// so results are reproducible across hosts), then re-fits by least squares
/// on the active set. Stops when the residual norm drops to epsilon or the
/// sparsity budget is exhausted.
pub fn omp(task: &SsrTask, sparsity: usize, epsilon: Option<f64>) -> Result<ReconstructionResult> {
    let a = &task.a;
    let y = &task.y;
    let (m, n) = (a.nrows(), a.ncols());
    if sparsity == 0 || sparsity > m {
        return Err(CsError::InvalidParameter(format!(
            "sparsity budget must be in [1, {m}], got {sparsity}"
        )));
    }

    let y_norm = y.dot(y).sqrt();
    let eps = epsilon.unwrap_or(1e-6 * y_norm);

    let col_norms: Vec<f64> = (0..n)
        .map(|j| a.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    let mut residual = y.clone();
    let mut residual_norm = y_norm;
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; n];
    let mut coeffs_active: Array1<f64> = Array1::zeros(0);
    let mut history = vec![residual_norm];

    while residual_norm > eps && active.len() < sparsity {
        // Best normalized correlation among unused atoms.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if in_active[j] {
                continue;
            }
            let corr = a.column(j).dot(&residual).abs() / col_norms[j];
            match best {
                Some((_, b)) if corr <= b => {}
                _ => best = Some((j, corr)),
            }
        }
        let (pick, corr) = best.expect("at least one unused atom");
        if corr == 0.0 {
            // Residual is orthogonal to everything left; selecting more
            // atoms cannot help.
            break;
        }
        active.push(pick);
        in_active[pick] = true;

        // Least squares on the active set via the Gram system.
        let k = active.len();
        let mut gram = Array2::zeros((k, k));
        let mut rhs = Array1::zeros(k);
        for (p, &jp) in active.iter().enumerate() {
            rhs[p] = a.column(jp).dot(y);
            for (q, &jq) in active.iter().enumerate() {
                gram[[p, q]] = a.column(jp).dot(&a.column(jq));
            }
        }
        coeffs_active = linalg::cholesky_solve(&gram, &rhs, &active)?;

        residual = y.clone();
        for (p, &jp) in active.iter().enumerate() {
            for i in 0..m {
                residual[i] -= coeffs_active[p] * a[[i, jp]];
            }
        }
        residual_norm = residual.dot(&residual).sqrt();
        history.push(residual_norm);
    }

    let mut s_hat = Array1::zeros(n);
    for (p, &jp) in active.iter().enumerate() {
        s_hat[jp] = coeffs_active[p];
    }

    let final_residual = recompute_residual_norm(a, y, &s_hat);
    Ok(ReconstructionResult {
        iterations: active.len(),
        converged: final_residual <= eps,
        residual_norm: final_residual,
        residual_history: history,
        objective_history: Vec::new(),
        s_hat,
    })
}

/// Basis-pursuit-denoising style solver: proximal gradient with momentum,
/// kept monotone by rejecting candidate iterates that would increase the
/// objective.
pub fn bpdn(
    task: &SsrTask,
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<ReconstructionResult> {
    if lambda <= 0.0 {
        return Err(CsError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if max_iters == 0 {
        return Err(CsError::InvalidParameter("max_iters must be >= 1".into()));
    }

    let a = &task.a;
    let y = &task.y;
    let n = a.ncols();

    let lipschitz = 1.05 * linalg::spectral_norm_sq(a);
    let step = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        1.0
    };

    let objective = |s: &Array1<f64>| -> f64 {
        let r = y - &a.dot(s);
        0.5 * r.dot(&r) + lambda * s.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut x = Array1::zeros(n);
    let mut extrapolated = x.clone();
    let mut t = 1.0f64;
    let mut f_x = objective(&x);
    let mut objective_history = vec![f_x];
    let mut residual_history = vec![y.dot(y).sqrt()];
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh_restart = true; // extrapolated currently equals x

    for iter in 1..=max_iters {
        iterations = iter;
        let grad = a.t().dot(&(a.dot(&extrapolated) - y));
        let candidate = Array1::from_shape_fn(n, |i| {
            soft_threshold(extrapolated[i] - step * grad[i], step * lambda)
        });
        let f_candidate = objective(&candidate);

        if f_candidate <= f_x {
            // Accepted step; advance the momentum sequence.
            let rel_decrease = (f_x - f_candidate) / f_x.abs().max(1e-300);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            extrapolated = &candidate + &((&candidate - &x) * ((t - 1.0) / t_next));
            x = candidate;
            t = t_next;
            f_x = f_candidate;
            fresh_restart = false;
            objective_history.push(f_x);
            residual_history.push(recompute_residual_norm(a, y, &x));
            if rel_decrease < tol {
                converged = true;
                break;
            }
        } else if fresh_restart {
            // A plain proximal step from x itself failed to decrease the
            // objective, which only happens at a machine-precision fixed
            // point with a valid step size.
            converged = true;
            break;
        } else {
            // Momentum overshot; restart it and retry from x.
            t = 1.0;
            extrapolated = x.clone();
            fresh_restart = true;
        }
    }

    let residual_norm = recompute_residual_norm(a, y, &x);
    Ok(ReconstructionResult {
        s_hat: x,
        residual_norm,
        iterations,
        converged,
        residual_history,
        objective_history,
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn recompute_residual_norm(a: &Array2<f64>, y: &Array1<f64>, s: &Array1<f64>) -> f64 {
    let r = y - &a.dot(s);
    r.dot(&r).sqrt()
}

/// Unpenalized least-squares refit on an explicit support. Used for
/// debiasing l1 solutions and as a test oracle.
pub fn refit_on_support(
    a: &Array2<f64>,
    y: &Array1<f64>,
    support: &[usize],
) -> Result<Array1<f64>> {
    let n = a.ncols();
    let k = support.len();
    if k == 0 {
        return Ok(Array1::zeros(n));
    }
    let mut gram = Array2::zeros((k, k));
    let mut rhs = Array1::zeros(k);
    for (p, &jp) in support.iter().enumerate() {
        rhs[p] = a.column(jp).dot(y);
        for (q, &jq) in support.iter().enumerate() {
            gram[[p, q]] = a.column(jp).dot(&a.column(jq));
        }
    }
    let coeffs = linalg::cholesky_solve(&gram, &rhs, support)?;
    let mut s = Array1::zeros(n);
    for (p, &jp) in support.iter().enumerate() {
        s[jp] = coeffs[p];
    }
    Ok(s)
}

/// Empirical restricted-isometry distortion estimate.
#[derive(Clone, Debug)]
pub struct RipEstimate {
    /// max over trials of `| ||A s||^2 / ||s||^2 - 1 |`
    pub delta_hat: f64,
    pub order: usize,
    pub trials: usize,
}

/// Probes A with random K-sparse unit vectors and records the worst
/// distortion of the squared norm. Values below 1 are consistent with a
/// restricted isometry at the probed order; values at or above 1 certify
/// the matrix cannot be one.
pub fn empirical_rip_check(a: &Array2<f64>, order: usize, trials: usize, seed: u64) -> RipEstimate {
    assert!(trials >= 1, "trials must be >= 1");
    let n = a.ncols();
    let k = order.min(n);
    let mut stream = BitStream::public(seed, domain::RIP_TRIAL);
    let mut delta_hat = 0.0f64;

    for _ in 0..trials {
        // K distinct support positions via a partial shuffle.
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + stream.uniform_index(n - i);
            idx.swap(i, j);
        }
        let mut s = Array1::zeros(n);
        for &pos in &idx[..k] {
            s[pos] = stream.standard_normal();
        }
        let norm_sq = s.dot(&s);
        if norm_sq == 0.0 {
            continue;
        }
        let image = a.dot(&s);
        let ratio = image.dot(&image) / norm_sq;
        delta_hat = delta_hat.max((ratio - 1.0).abs());
    }

    RipEstimate {
        delta_hat,
        order: k,
        trials,
    }
}
