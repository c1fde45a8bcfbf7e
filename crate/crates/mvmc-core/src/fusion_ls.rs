//! Least-squares view fusion: learn simplex weights θ minimizing the
//! regularized quadratic ½(θᵀHθ − 2θᵀh) + (η/2)‖θ‖² by cyclic pairwise
//! coordinate descent with a closed-form two-variable update and clipping.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::types::{PredictionTensor, SimplexWeights};

/// Objective-change threshold per full sweep at which the solver stops.
pub const DEFAULT_LS_TOL: f64 = 1e-9;
/// Sweep cap of the coordinate-descent solver.
pub const DEFAULT_LS_MAX_SWEEPS: usize = 200;

/// Denominators at or below this value with η = 0 mark a degenerate pair
/// whose update is skipped.
const DEGENERATE_DENOM: f64 = 1e-14;

/// The quadratic data of the fusion problem: H = (1/N)PPᵀ, h_v = (1/N)P_vᵀy⁰
/// (targets remapped to {0,1} to match the probability-valued predictions),
/// and the ridge weight η.
#[derive(Debug, Clone, PartialEq)]
pub struct LsProblem {
    h_mat: Array2<f64>,
    h_vec: Array1<f64>,
    eta: f64,
    n: usize,
}

impl LsProblem {
    pub fn h_mat(&self) -> &Array2<f64> {
        &self.h_mat
    }

    pub fn h_vec(&self) -> &Array1<f64> {
        &self.h_vec
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn num_entries(&self) -> usize {
        self.n
    }

    pub fn num_views(&self) -> usize {
        self.h_vec.len()
    }
}

/// Assemble the quadratic problem from cross-validated predictions.
pub fn build_ls(p: &PredictionTensor, eta: f64) -> Result<LsProblem> {
    if p.is_empty() {
        return Err(Error::invalid("cannot build an LS problem from an empty tensor"));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!(
            "eta must be a finite nonnegative real, got {eta}"
        )));
    }
    let n = p.len() as f64;
    // Targets move from ±1 to {0,1}: predictions are probabilities, so the
    // regression target lives on the same scale.
    let targets = p.y0().mapv(|y| (y + 1.0) / 2.0);
    let h_mat = p.p().dot(&p.p().t()) / n;
    let h_vec = p.p().dot(&targets) / n;

    let (eigs, _) = h_mat
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("gram matrix eigencheck failed: {e}")))?;
    if eigs[0] < -1e-10 {
        return Err(Error::Linalg(format!(
            "gram matrix is not positive semi-definite (min eigenvalue {})",
            eigs[0]
        )));
    }

    Ok(LsProblem {
        h_mat,
        h_vec,
        eta,
        n: p.len(),
    })
}

/// The fusion objective ½(θᵀHθ − 2θᵀh) + (η/2)‖θ‖² (its constant term,
/// which does not depend on θ, is omitted).
pub fn ls_objective(theta: &SimplexWeights, prob: &LsProblem) -> f64 {
    objective_raw(theta.values(), prob)
}

fn objective_raw(theta: &Array1<f64>, prob: &LsProblem) -> f64 {
    assert_eq!(theta.len(), prob.num_views(), "weight/view count mismatch");
    let quad = theta.dot(&prob.h_mat.dot(theta));
    let lin = theta.dot(&prob.h_vec);
    let ridge = theta.dot(theta);
    0.5 * (quad - 2.0 * lin) + 0.5 * prob.eta * ridge
}

/// Exact minimizer of the objective along the segment
/// {θ_i + θ_j = const, θ_i, θ_j ≥ 0, other coordinates fixed}.
///
/// The interior solution is θ'_i = [η(θ_i+θ_j) + (h_i−h_j) + ε_ij] / [D+2η]
/// with D = H_ii − H_ij − H_ji + H_jj and
/// ε_ij = D·θ_i − Σ_k (H_ik − H_jk)·θ_k; when the analogous numerator of
/// either side is nonpositive that side clips to 0 and the other takes the
/// whole pair mass. A vanishing denominator (η = 0) leaves θ unchanged.
pub fn update_pair(
    theta: &SimplexWeights,
    i: usize,
    j: usize,
    prob: &LsProblem,
) -> Result<SimplexWeights> {
    let v = prob.num_views();
    if i >= v || j >= v {
        return Err(Error::dim(format!(
            "pair ({i}, {j}) out of range for {v} views"
        )));
    }
    if i == j {
        return Err(Error::invalid("pair update needs two distinct coordinates"));
    }
    if theta.len() != v {
        return Err(Error::dim(format!(
            "weights have length {} but the problem has {v} views",
            theta.len()
        )));
    }
    let mut values = theta.values().clone();
    update_pair_raw(&mut values, i, j, prob);
    SimplexWeights::new(values)
}

fn update_pair_raw(theta: &mut Array1<f64>, i: usize, j: usize, prob: &LsProblem) {
    let h = &prob.h_mat;
    let hv = &prob.h_vec;
    let eta = prob.eta;

    let s = theta[i] + theta[j];
    let d = h[(i, i)] - h[(i, j)] - h[(j, i)] + h[(j, j)];
    let denom = d + 2.0 * eta;
    if denom <= DEGENERATE_DENOM {
        return;
    }

    let mut eps = d * theta[i];
    for k in 0..theta.len() {
        eps -= (h[(i, k)] - h[(j, k)]) * theta[k];
    }
    let num_i = eta * s + (hv[i] - hv[j]) + eps;
    // The two stated quantities sum to denom·s, so the opposite side's
    // numerator follows without recomputation.
    let num_j = denom * s - num_i;

    let (ti, tj) = if num_i <= 0.0 && num_j <= 0.0 {
        // Both conditions fire only in the degenerate s ≈ 0 corner; clip the
        // side with the more negative quantity.
        if num_i <= num_j {
            (0.0, s)
        } else {
            (s, 0.0)
        }
    } else if num_i <= 0.0 {
        (0.0, s)
    } else if num_j <= 0.0 {
        (s, 0.0)
    } else {
        let ti = num_i / denom;
        (ti, s - ti)
    };
    theta[i] = ti;
    theta[j] = tj;
}

/// Learn simplex weights from cross-validated predictions: start uniform,
/// sweep all ordered pairs cyclically, stop when a full sweep moves the
/// objective by less than `tol` or after `max_sweeps` sweeps.
pub fn solve_ls(
    p: &PredictionTensor,
    eta: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<SimplexWeights> {
    let prob = build_ls(p, eta)?;
    let v = prob.num_views();
    if v == 1 {
        return Ok(SimplexWeights::one_hot(1, 0));
    }

    let mut theta = Array1::from_elem(v, 1.0 / v as f64);
    let mut objective = objective_raw(&theta, &prob);
    for _sweep in 0..max_sweeps {
        for i in 0..v {
            for j in 0..v {
                if i != j {
                    update_pair_raw(&mut theta, i, j, &prob);
                }
            }
        }
        let new_objective = objective_raw(&theta, &prob);
        let done = (objective - new_objective).abs() < tol;
        objective = new_objective;
        if done {
            break;
        }
    }

    // Pair updates preserve the total mass up to rounding; renormalize the
    // ulp-level drift away before constructing the invariant-checked result.
    let sum = theta.sum();
    theta.mapv_inplace(|t| t / sum);
    SimplexWeights::new(theta)
}
