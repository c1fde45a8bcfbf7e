//! Transductive label completion on the stacked matrix by fixed point
//! continuation: gradient steps on the smooth loss, singular-value shrinkage
//! on the nuclear norm, a ones-row projection, and a geometric continuation
//! schedule on the regularization weight μ.

use ndarray::{Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};
use crate::preprocess::sigmoid;
use crate::types::{StackedMatrix, StackedSystem};

/// Parameters of the completion solver.
#[derive(Debug, Clone, PartialEq)]
pub struct McParams {
    /// Weight of the label loss term (the feature loss has weight 1).
    pub lambda: f64,
    /// Sharpness of the generalized log loss.
    pub gamma: f64,
    /// μ₀ = mu0_factor · σ₁(Z⁰).
    pub mu0_factor: f64,
    /// Geometric decay factor of the continuation schedule, in (0,1).
    pub mu_decay: f64,
    /// Final (smallest) regularization weight.
    pub mu_min: f64,
    /// Gradient step size; `None` selects 1/L from the loss curvature bound.
    pub tau: Option<f64>,
    /// Inner-loop stop: relative Frobenius change of Z below this value.
    pub inner_tol: f64,
    /// Inner-loop iteration cap per continuation stage.
    pub max_inner_iters: usize,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            lambda: 1.0,
            gamma: 1.0,
            mu0_factor: 0.25,
            mu_decay: 0.25,
            mu_min: 1e-12,
            tau: None,
            inner_tol: 1e-5,
            max_inner_iters: 100,
        }
    }
}

impl McParams {
    /// Check all range constraints. `lambda = 0` is allowed and turns the
    /// solver into pure feature completion.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be a finite nonnegative real, got {}",
                self.lambda
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be a positive finite real, got {}",
                self.gamma
            )));
        }
        if !(self.mu0_factor > 0.0) {
            return Err(Error::invalid("mu0_factor must be positive"));
        }
        if !(self.mu_decay > 0.0 && self.mu_decay < 1.0) {
            return Err(Error::invalid("mu_decay must lie in (0, 1)"));
        }
        if !(self.mu_min > 0.0) {
            return Err(Error::invalid("mu_min must be positive"));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::invalid(format!(
                    "tau must be a positive finite real, got {tau}"
                )));
            }
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::invalid("inner_tol must be positive"));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::invalid("max_inner_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`fpc_solve`].
#[derive(Debug, Clone)]
pub struct McSolution {
    /// The completed stacked matrix (ones row intact).
    pub z: StackedMatrix,
    /// Rows 0..m of the completed matrix: the inferred soft labels.
    pub soft_labels: Array2<f64>,
    /// Total inner iterations across all continuation stages.
    pub iterations: usize,
    /// Smooth loss plus mu_min times the nuclear norm at the final iterate.
    pub final_objective: f64,
}

impl McSolution {
    /// Soft labels mapped through the logistic function.
    pub fn probabilities(&self) -> Array2<f64> {
        self.soft_labels.mapv(sigmoid)
    }
}

/// Objective/trace of one continuation stage, recorded by
/// [`fpc_solve_with_trace`]: the value of smooth loss + μ‖Z‖_* at the stage
/// start and after every inner iteration.
#[derive(Debug, Clone)]
pub struct StageTrace {
    pub mu: f64,
    pub objective_values: Vec<f64>,
}

fn check_masks(sys: &StackedSystem) -> Result<()> {
    if sys.omega_x.is_empty() && sys.omega_y.is_empty() {
        return Err(Error::invalid(
            "both observation masks are empty: nothing to fit",
        ));
    }
    Ok(())
}

fn check_shape(z: &Array2<f64>, sys: &StackedSystem) -> Result<()> {
    if z.dim() != sys.z0.matrix().dim() {
        return Err(Error::dim(format!(
            "iterate is {:?} but the stacked system is {:?}",
            z.dim(),
            sys.z0.matrix().dim()
        )));
    }
    Ok(())
}

/// `ln(1 + e^u)` without overflow for large |u|.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Smooth part of the completion objective: mean squared feature error plus
/// λ times the mean generalized log loss on observed labels.
pub fn smooth_objective(z: &Array2<f64>, sys: &StackedSystem, params: &McParams) -> Result<f64> {
    check_masks(sys)?;
    check_shape(z, sys)?;
    let z0 = sys.z0.matrix();

    let mut total = 0.0;
    if !sys.omega_x.is_empty() {
        let mut acc = 0.0;
        for (i, j) in sys.omega_x.iter() {
            let diff = z[(i, j)] - z0[(i, j)];
            acc += 0.5 * diff * diff;
        }
        total += acc / sys.omega_x.len() as f64;
    }
    if !sys.omega_y.is_empty() && params.lambda != 0.0 {
        let mut acc = 0.0;
        for (i, j) in sys.omega_y.iter() {
            acc += log1p_exp(-params.gamma * z0[(i, j)] * z[(i, j)]) / params.gamma;
        }
        total += params.lambda * acc / sys.omega_y.len() as f64;
    }
    Ok(total)
}

/// Gradient of [`smooth_objective`]: zero outside the observation masks and
/// on the ones row.
pub fn smooth_gradient(
    z: &Array2<f64>,
    sys: &StackedSystem,
    params: &McParams,
) -> Result<Array2<f64>> {
    check_masks(sys)?;
    check_shape(z, sys)?;
    let z0 = sys.z0.matrix();
    let mut g = Array2::<f64>::zeros(z.dim());

    if !sys.omega_x.is_empty() {
        let scale = 1.0 / sys.omega_x.len() as f64;
        for (i, j) in sys.omega_x.iter() {
            g[(i, j)] = scale * (z[(i, j)] - z0[(i, j)]);
        }
    }
    if !sys.omega_y.is_empty() && params.lambda != 0.0 {
        let scale = params.lambda / sys.omega_y.len() as f64;
        for (i, j) in sys.omega_y.iter() {
            let v0 = z0[(i, j)];
            // -z⁰ / (1 + exp(γ z⁰ z)), written through the stable logistic.
            g[(i, j)] = scale * (-v0) * sigmoid(-params.gamma * v0 * z[(i, j)]);
        }
    }
    // Masks never cover the ones row, whose gradient is fixed at zero.
    let ones_row = sys.z0.num_label_rows() + sys.z0.num_feature_rows();
    g.row_mut(ones_row).fill(0.0);
    Ok(g)
}

/// Step size 1/L, where L bounds the curvature of the smooth loss:
/// 1/|Ω_X| from the quadratic term and λγ/(4|Ω_Y|) from the log loss.
/// Absent masks contribute zero; a vanishing bound is an error.
pub fn auto_tau(params: &McParams, sys: &StackedSystem) -> Result<f64> {
    let lx = if sys.omega_x.is_empty() {
        0.0
    } else {
        1.0 / sys.omega_x.len() as f64
    };
    let ly = if sys.omega_y.is_empty() {
        0.0
    } else {
        params.lambda * params.gamma / (4.0 * sys.omega_y.len() as f64)
    };
    let l = lx.max(ly);
    if l <= 0.0 {
        return Err(Error::invalid(
            "cannot derive a step size: no observed entries contribute curvature",
        ));
    }
    Ok(1.0 / l)
}

/// Singular value shrinkage: SVD `A = UΣVᵀ`, then `U·max(Σ−ν, 0)·Vᵀ`.
/// This is the proximal operator of `ν‖·‖_*`.
pub fn shrink(a: &Array2<f64>, nu: f64) -> Array2<f64> {
    assert!(nu >= 0.0, "shrinkage threshold must be nonnegative");
    let (u, mut s, vt) = thin_svd(a);
    s.mapv_inplace(|sv| (sv - nu).max(0.0));
    reconstruct(&u, &s, &vt)
}

/// Singular values of a matrix, descending.
pub fn singular_values(a: &Array2<f64>) -> Array1<f64> {
    let (_, s, _) = a
        .svddc(JobSvd::None)
        .expect("singular value computation failed");
    s
}

fn thin_svd(a: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (u, s, vt) = a.svddc(JobSvd::Some).expect("SVD failed on finite input");
    (
        u.expect("left singular vectors requested"),
        s,
        vt.expect("right singular vectors requested"),
    )
}

fn reconstruct(u: &Array2<f64>, s: &Array1<f64>, vt: &Array2<f64>) -> Array2<f64> {
    let k = s.len();
    let mut scaled = u.slice(ndarray::s![.., ..k]).to_owned();
    for (c, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v * s[c]);
    }
    scaled.dot(&vt.slice(ndarray::s![..k, ..]))
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(a: &Array2<f64>) -> f64 {
    singular_values(a).sum()
}

/// Run fixed point continuation on a stacked system.
pub fn fpc_solve(sys: &StackedSystem, params: &McParams) -> Result<McSolution> {
    let (solution, _) = fpc_run(sys, params, false)?;
    Ok(solution)
}

/// As [`fpc_solve`], additionally recording the regularized objective after
/// every inner iteration of every stage (for diagnostics and descent checks).
pub fn fpc_solve_with_trace(
    sys: &StackedSystem,
    params: &McParams,
) -> Result<(McSolution, Vec<StageTrace>)> {
    fpc_run(sys, params, true)
}

fn fpc_run(
    sys: &StackedSystem,
    params: &McParams,
    trace: bool,
) -> Result<(McSolution, Vec<StageTrace>)> {
    params.validate()?;
    check_masks(sys)?;
    let tau = match params.tau {
        Some(t) => t,
        None => auto_tau(params, sys)?,
    };

    let m = sys.z0.num_label_rows();
    let d = sys.z0.num_feature_rows();
    let ones_row = m + d;
    let z0 = sys.z0.matrix();

    let sigma1 = singular_values(z0)[0];
    let mut schedule = Vec::new();
    let mut mu = params.mu0_factor * sigma1;
    while mu > params.mu_min {
        schedule.push(mu);
        mu *= params.mu_decay;
    }
    schedule.push(params.mu_min);

    let norm_frob = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut z = z0.clone();
    let mut iterations = 0usize;
    let mut traces = Vec::new();

    for (stage, &mu) in schedule.iter().enumerate() {
        let mut stage_trace = trace.then(|| StageTrace {
            mu,
            objective_values: vec![smooth_objective(&z, sys, params).expect("checked") + mu * nuclear_norm(&z)],
        });

        for iter in 0..params.max_inner_iters {
            let g = smooth_gradient(&z, sys, params)?;
            let mut a = z.clone();
            a.scaled_add(-tau, &g);
            let mut z_new = shrink(&a, tau * mu);
            z_new.row_mut(ones_row).fill(1.0);

            if z_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::solver(format!(
                    "non-finite iterate at continuation stage {stage} (mu = {mu:.3e}), inner iteration {iter}"
                )));
            }

            let mut diff = z_new.clone();
            diff -= &z;
            let rel = norm_frob(&diff) / norm_frob(&z).max(1.0);
            z = z_new;
            iterations += 1;

            if let Some(t) = stage_trace.as_mut() {
                t.objective_values
                    .push(smooth_objective(&z, sys, params)? + mu * nuclear_norm(&z));
            }
            if rel < params.inner_tol {
                break;
            }
        }
        if let Some(t) = stage_trace.take() {
            traces.push(t);
        }
    }

    let final_objective = smooth_objective(&z, sys, params)? + params.mu_min * nuclear_norm(&z);
    let soft_labels = z.slice(ndarray::s![..m, ..]).to_owned();
    let solution = McSolution {
        z: StackedMatrix::new(z, m, d)?,
        soft_labels,
        iterations,
        final_objective,
    };
    Ok((solution, traces))
}
