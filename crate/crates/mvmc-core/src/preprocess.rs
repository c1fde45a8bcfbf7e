//! Feature preprocessing: kernel PCA projection of per-view features and
//! sigmoid conversion of raw solver scores to probabilities.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// Relative eigenvalue cutoff: eigenvalues below `RELATIVE_EIG_CUTOFF` times
/// the largest are dropped to keep the 1/√λ scaling well-conditioned.
pub const RELATIVE_EIG_CUTOFF: f64 = 1e-12;

/// Kernel function used by KPCA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { bandwidth: f64 },
}

impl Kernel {
    pub fn evaluate(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => x.dot(&y),
            Kernel::Rbf { bandwidth } => {
                let sq: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Kernel::Rbf { bandwidth } = *self {
            if !(bandwidth > 0.0) || !bandwidth.is_finite() {
                return Err(Error::invalid(format!(
                    "rbf bandwidth must be a positive finite real, got {bandwidth}"
                )));
            }
        }
        Ok(())
    }
}

/// Median Euclidean distance over all sample pairs; the conventional default
/// bandwidth for the rbf kernel. Falls back to 1.0 when every pair coincides.
pub fn median_pairwise_distance(x: &FeatureMatrix) -> Result<f64> {
    let xd = x.as_dense()?;
    let n = xd.ncols();
    if n < 2 {
        return Err(Error::invalid(
            "median pairwise distance needs at least two samples",
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let sq: f64 = xd
                .column(i)
                .iter()
                .zip(xd.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let median = dists[dists.len() / 2];
    if median > 0.0 {
        Ok(median)
    } else {
        log::warn!("all sample pairs coincide; falling back to rbf bandwidth 1.0");
        Ok(1.0)
    }
}

/// Fitted kernel PCA model: top-r eigenpairs of the double-centered kernel
/// matrix plus the statistics needed to center out-of-sample columns.
#[derive(Debug, Clone)]
pub struct KpcaModel {
    kernel: Kernel,
    training_features: Array2<f64>,
    /// n×r eigenvectors of the centered kernel matrix, descending eigenvalue.
    centered_eigvecs: Array2<f64>,
    /// The r retained eigenvalues, descending, all positive.
    eigvals: Array1<f64>,
    /// Per-column means of the training kernel matrix.
    kernel_col_means: Array1<f64>,
    /// Grand mean of the training kernel matrix.
    kernel_grand_mean: f64,
    r: usize,
}

impl KpcaModel {
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn output_dim(&self) -> usize {
        self.r
    }

    pub fn input_dim(&self) -> usize {
        self.training_features.nrows()
    }

    pub fn num_training_samples(&self) -> usize {
        self.training_features.ncols()
    }

    pub fn eigvals(&self) -> &Array1<f64> {
        &self.eigvals
    }

    /// Projections of the training samples themselves (r×n).
    pub fn training_projections(&self) -> Result<FeatureMatrix> {
        kpca_transform(self, &FeatureMatrix::dense(self.training_features.clone()))
    }
}

/// Fit kernel PCA on fully observed features. If fewer than `r` eigenvalues
/// are numerically positive, the output dimension is reduced to that count
/// and the reduction is reported through the log.
pub fn kpca_fit(x: &FeatureMatrix, kernel: Kernel, r: usize) -> Result<KpcaModel> {
    kernel.validate()?;
    if r == 0 {
        return Err(Error::invalid("kpca output dimension must be at least 1"));
    }
    let xd = x.as_dense()?;
    let n = xd.ncols();
    if n == 0 {
        return Err(Error::invalid("kpca needs at least one sample"));
    }

    let k = kernel_matrix(&kernel, &xd, &xd);
    let col_means = k.mean_axis(ndarray::Axis(0)).expect("n > 0");
    let grand_mean = k.mean().expect("non-empty");
    let centered = center_square_kernel(&k, &col_means, grand_mean);

    let (vals, vecs) = centered
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("kernel eigendecomposition failed: {e}")))?;

    // LAPACK returns ascending eigenvalues; walk from the top.
    let lambda_max = vals[n - 1];
    if !(lambda_max > 0.0) {
        return Err(Error::invalid(
            "centered kernel matrix has no positive eigenvalues (all samples identical?)",
        ));
    }
    let cutoff = lambda_max * RELATIVE_EIG_CUTOFF;
    let positive = vals.iter().filter(|&&v| v > cutoff).count();
    let r_eff = r.min(positive);
    if r_eff < r {
        log::warn!(
            "kpca: only {positive} numerically positive eigenvalues; reducing output dimension from {r} to {r_eff}"
        );
    }

    let mut eigvals = Array1::<f64>::zeros(r_eff);
    let mut eigvecs = Array2::<f64>::zeros((n, r_eff));
    for c in 0..r_eff {
        let src = n - 1 - c;
        eigvals[c] = vals[src];
        eigvecs.column_mut(c).assign(&vecs.column(src));
    }

    Ok(KpcaModel {
        kernel,
        training_features: xd.to_owned(),
        centered_eigvecs: eigvecs,
        eigvals,
        kernel_col_means: col_means,
        kernel_grand_mean: grand_mean,
        r: r_eff,
    })
}

/// Project new samples into the fitted KPCA coordinates (r×n_new output).
pub fn kpca_transform(model: &KpcaModel, x_new: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x_new.feature_dim() != model.input_dim() {
        return Err(Error::dim(format!(
            "kpca transform input has {} features, model was fit on {}",
            x_new.feature_dim(),
            model.input_dim()
        )));
    }
    let xd = x_new.as_dense()?;
    let n_new = xd.ncols();
    let n = model.num_training_samples();

    // Cross kernel between training samples (rows) and new samples (cols).
    let kx = kernel_matrix(&model.kernel, &model.training_features.view(), &xd);

    // Center each cross-kernel column against the training distribution.
    let mut centered = kx;
    for t in 0..n_new {
        let col_mean = centered.column(t).sum() / n as f64;
        for i in 0..n {
            centered[(i, t)] =
                centered[(i, t)] - model.kernel_col_means[i] - col_mean + model.kernel_grand_mean;
        }
    }

    // c = Λ^{-1/2} Vᵀ k̃  for each column.
    let mut out = model.centered_eigvecs.t().dot(&centered);
    for (c, mut row) in out.rows_mut().into_iter().enumerate() {
        let scale = 1.0 / model.eigvals[c].sqrt();
        row.mapv_inplace(|v| v * scale);
    }
    Ok(FeatureMatrix::dense(out))
}

/// Elementwise logistic function 1/(1+e^{-x}); strictly increasing, so it
/// preserves every ranking.
pub fn sigmoid_scores(raw: &Array2<f64>) -> Array2<f64> {
    raw.mapv(sigmoid)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn kernel_matrix(kernel: &Kernel, a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let (na, nb) = (a.ncols(), b.ncols());
    let mut k = Array2::<f64>::zeros((na, nb));
    for i in 0..na {
        for j in 0..nb {
            k[(i, j)] = kernel.evaluate(a.column(i), b.column(j));
        }
    }
    k
}

fn center_square_kernel(k: &Array2<f64>, col_means: &Array1<f64>, grand: f64) -> Array2<f64> {
    let n = k.nrows();
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..n {
            // Row means equal column means because K is symmetric.
            out[(i, j)] = k[(i, j)] - col_means[i] - col_means[j] + grand;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_features(d: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, n), |_| rng.sample(StandardNormal))
    }

    fn center_columns(mut x: Array2<f64>) -> Array2<f64> {
        let means = x.mean_axis(ndarray::Axis(1)).unwrap();
        for mut col in x.columns_mut() {
            col -= &means;
        }
        x
    }

    /// Independent 3×3 symmetric eigensolver: classical Jacobi rotations.
    fn jacobi_eigh3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let mut v = [[0.0; 3]; 3];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _ in 0..100 {
            // Largest off-diagonal element.
            let (mut p, mut q, mut big) = (0, 1, 0.0f64);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if a[i][j].abs() > big {
                        big = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if big < 1e-14 {
                break;
            }
            let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
            let (s, c) = theta.sin_cos();
            let mut rot = [[0.0; 3]; 3];
            for (i, row) in rot.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            rot[p][p] = c;
            rot[q][q] = c;
            rot[p][q] = s;
            rot[q][p] = -s;
            // a = rotᵀ a rot ; v = v rot
            let mut tmp = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    tmp[i][j] = (0..3).map(|k| rot[k][i] * a[k][j]).sum();
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] = (0..3).map(|k| tmp[i][k] * rot[k][j]).sum();
                }
            }
            let mut nv = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    nv[i][j] = (0..3).map(|k| v[i][k] * rot[k][j]).sum();
                }
            }
            v = nv;
        }
        ([a[0][0], a[1][1], a[2][2]], v)
    }

    #[test]
    fn linear_kpca_on_centered_data_preserves_inner_products() {
        let x = center_columns(random_features(2, 5, 3));
        let fm = FeatureMatrix::dense(x.clone());
        let model = kpca_fit(&fm, Kernel::Linear, 2).unwrap();
        assert_eq!(model.output_dim(), 2);
        let proj = model.training_projections().unwrap();
        let c = proj.as_dense().unwrap();
        let gram_proj = c.t().dot(&c);
        let gram_orig = x.t().dot(&x);
        for (a, b) in gram_proj.iter().zip(gram_orig.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn duplicated_samples_project_identically() {
        let base = random_features(3, 4, 11);
        let mut doubled = Array2::zeros((3, 8));
        for j in 0..4 {
            doubled.column_mut(j).assign(&base.column(j));
            doubled.column_mut(j + 4).assign(&base.column(j));
        }
        let fm = FeatureMatrix::dense(doubled);
        let model = kpca_fit(&fm, Kernel::Rbf { bandwidth: 1.5 }, 3).unwrap();
        let proj = model.training_projections().unwrap();
        let c = proj.as_dense().unwrap();
        for j in 0..4 {
            for row in 0..model.output_dim() {
                assert_abs_diff_eq!(c[(row, j)], c[(row, j + 4)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rbf_projection_gram_matches_independent_eigensolver() {
        let x = random_features(2, 3, 21);
        let fm = FeatureMatrix::dense(x.clone());
        let model = kpca_fit(&fm, Kernel::Rbf { bandwidth: 1.0 }, 2).unwrap();
        let proj = model.training_projections().unwrap();
        let c = proj.as_dense().unwrap();
        let gram_proj = c.t().dot(&c);

        // Oracle: build and center the 3×3 kernel by hand, diagonalize with
        // Jacobi rotations, truncate to the top-2 eigenpairs.
        let kern = Kernel::Rbf { bandwidth: 1.0 };
        let mut k = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = kern.evaluate(x.column(i), x.column(j));
            }
        }
        let mut mu = [0.0f64; 3];
        let mut g = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                mu[i] += k[j][i] / 3.0;
                g += k[i][j] / 9.0;
            }
        }
        let mut centered = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                centered[i][j] = k[i][j] - mu[i] - mu[j] + g;
            }
        }
        let (vals, vecs) = jacobi_eigh3(centered);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
        // Rank-2 truncation of the centered kernel.
        let mut truncated = [[0.0f64; 3]; 3];
        for &e in &idx[..2] {
            for i in 0..3 {
                for j in 0..3 {
                    truncated[i][j] += vals[e] * vecs[i][e] * vecs[j][e];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(gram_proj[(i, j)], truncated[i][j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn transform_of_training_set_equals_fit_time_projections() {
        let x = random_features(4, 6, 5);
        let fm = FeatureMatrix::dense(x);
        let model = kpca_fit(&fm, Kernel::Rbf { bandwidth: 2.0 }, 4).unwrap();

        // Fit-time definition: c_i = Λ^{1/2} Vᵀ e_i.
        let transformed = kpca_transform(&model, &fm).unwrap();
        let c = transformed.as_dense().unwrap();
        for j in 0..model.num_training_samples() {
            for row in 0..model.output_dim() {
                let direct = model.eigvals[row].sqrt() * model.centered_eigvecs[(j, row)];
                assert_abs_diff_eq!(c[(row, j)], direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zero_column_transform_matches_direct_formula() {
        let x = center_columns(random_features(3, 5, 9));
        let fm = FeatureMatrix::dense(x.clone());
        let model = kpca_fit(&fm, Kernel::Linear, 2).unwrap();

        let zero = FeatureMatrix::dense(Array2::zeros((3, 1)));
        let projected = kpca_transform(&model, &zero).unwrap();
        let got = projected.as_dense().unwrap();

        // Oracle: evaluate the centering formula for a zero column by hand.
        // k_x = 0, so the centered column is -mu_i - mean(k_x) + g = -mu_i + g.
        for row in 0..model.output_dim() {
            let mut acc = 0.0;
            for i in 0..5 {
                let centered_entry = -model.kernel_col_means[i] + model.kernel_grand_mean;
                acc += model.centered_eigvecs[(i, row)] * centered_entry;
            }
            let expected = acc / model.eigvals[row].sqrt();
            assert_abs_diff_eq!(got[(row, 0)], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn transform_rejects_wrong_input_dim() {
        let fm = FeatureMatrix::dense(random_features(3, 4, 2));
        let model = kpca_fit(&fm, Kernel::Linear, 2).unwrap();
        let wrong = FeatureMatrix::dense(Array2::zeros((2, 1)));
        assert!(kpca_transform(&model, &wrong).is_err());
    }

    #[test]
    fn output_dim_capped_by_positive_eigenvalues() {
        // Rank-1 data: only one positive eigenvalue survives centering.
        let mut x = Array2::zeros((3, 4));
        for (j, mut col) in x.columns_mut().into_iter().enumerate() {
            col.fill(j as f64 + 1.0);
        }
        let fm = FeatureMatrix::dense(x);
        let model = kpca_fit(&fm, Kernel::Linear, 3).unwrap();
        assert_eq!(
            model.output_dim(),
            1,
            "requested r=3 must shrink to the positive eigenvalue count"
        );
    }

    #[test]
    fn identical_samples_are_rejected() {
        let x = Array2::from_elem((2, 3), 1.0);
        let fm = FeatureMatrix::dense(x);
        assert!(kpca_fit(&fm, Kernel::Linear, 1).is_err());
    }

    #[test]
    fn median_bandwidth_is_the_median_distance() {
        // Three collinear points at 0, 3, 4: pairwise distances 3, 4, 1.
        let x = array![[0.0, 3.0, 4.0]];
        let fm = FeatureMatrix::dense(x);
        assert_eq!(median_pairwise_distance(&fm).unwrap(), 3.0);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(2.0), 0.8807970779778823, epsilon = 1e-12);
        for x in [-3.0, -0.7, 0.1, 5.0] {
            assert_abs_diff_eq!(sigmoid(x) + sigmoid(-x), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sigmoid_preserves_argsort() {
        let raw = array![[0.3, -2.0, 1.5, 0.0, 7.2]];
        let mapped = sigmoid_scores(&raw);
        let order_raw = crate::metrics::ranking_order(raw.row(0).as_slice().unwrap());
        let order_mapped = crate::metrics::ranking_order(mapped.row(0).as_slice().unwrap());
        assert_eq!(order_raw, order_mapped);
        assert!(mapped.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
