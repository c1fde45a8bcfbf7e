//! End-to-end orchestration: optional kernel-PCA preprocessing, per-view
//! label completion, fusion-weight learning, fused prediction for the
//! unlabeled and test samples, and ranking-metric evaluation.
//!
//! Five methods share this plumbing:
//!
//! * `ls` — completion per view, weights from the least-squares fusion solver;
//! * `ap` — completion per view, weights from the average-precision
//!   structural SVM;
//! * `bmc` — completion per view, one-hot weight on the view with the best
//!   validation mean average precision;
//! * `cmc` — one completion over all views' features concatenated (each
//!   view normalized to unit Frobenius scale), no weights;
//! * `amc` — completion per view, uniform weights.
//!
//! The validation subset is drawn from the test samples (a fifth of them,
//! seeded by the dataset seed); this transductive protocol means model
//! selection may read validation-sample truth, while the remaining test
//! samples stay untouched until final evaluation.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{assemble_tensor, generate_view_predictions, make_split};
use crate::error::{Error, Result};
use crate::fusion_ap::{solve_ap_with_trace, DEFAULT_AP_MAX_OUTER, DEFAULT_CP_TOL};
use crate::fusion_ls::{solve_ls, DEFAULT_LS_MAX_SWEEPS, DEFAULT_LS_TOL};
use crate::mc::{fpc_solve, McParams};
use crate::metrics::{
    auc, average_precision, hamming_loss, mean_over_labels, threshold_predictions, LabelMean,
    LabelScores,
};
use crate::preprocess::{kpca_fit, median_pairwise_distance, Kernel, KpcaModel};
use crate::types::{
    build_stacked, FeatureMatrix, LabelMatrix, MultiViewDataset, PredictionTensor, SimplexWeights,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Share of the test samples reserved for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;
/// Default threshold for hard label decisions on probability scores.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const VALIDATION_SEED_SALT: u64 = 0x7661_6c73_706c_6974; // "valsplit"

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// The five supported fusion methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    /// Least-squares fusion weights.
    Ls,
    /// Average-precision structural-SVM fusion weights.
    Ap,
    /// Best single view by validation mean average precision.
    Bmc,
    /// Single completion over concatenated normalized views.
    Cmc,
    /// Uniform fusion weights.
    Amc,
}

impl FusionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::Ls => "ls",
            FusionMethod::Ap => "ap",
            FusionMethod::Bmc => "bmc",
            FusionMethod::Cmc => "cmc",
            FusionMethod::Amc => "amc",
        }
    }

    pub fn parse(s: &str) -> Result<FusionMethod> {
        match s {
            "ls" => Ok(FusionMethod::Ls),
            "ap" => Ok(FusionMethod::Ap),
            "bmc" => Ok(FusionMethod::Bmc),
            "cmc" => Ok(FusionMethod::Cmc),
            "amc" => Ok(FusionMethod::Amc),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected ls, ap, bmc, cmc, or amc)"
            ))),
        }
    }

    pub fn all() -> [FusionMethod; 5] {
        [
            FusionMethod::Ls,
            FusionMethod::Ap,
            FusionMethod::Bmc,
            FusionMethod::Cmc,
            FusionMethod::Amc,
        ]
    }

    /// Whether the fusion step of this method uses the ridge weight η.
    pub fn uses_eta(self) -> bool {
        matches!(self, FusionMethod::Ls | FusionMethod::Ap)
    }
}

impl std::fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three tunable scalars of the pipeline: label-loss weight λ and
/// log-loss sharpness γ of the completion solver, and ridge weight η of the
/// fusion solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lambda: 1.0,
            gamma: 3.0,
            eta: 1e-2,
        }
    }
}

impl HyperParams {
    pub fn mc_params(&self) -> McParams {
        McParams {
            lambda: self.lambda,
            gamma: self.gamma,
            ..McParams::default()
        }
    }
}

/// Kernel selection for the preprocessing step; a missing RBF bandwidth is
/// filled with the median pairwise distance of the view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Linear,
    Rbf { bandwidth: Option<f64> },
}

/// Kernel-PCA preprocessing settings applied to every view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpcaSettings {
    /// Number of principal components to keep (capped by the number of
    /// positive eigenvalues).
    pub dim: usize,
    pub kernel: KernelChoice,
}

/// Everything `train` needs besides the data.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub method: FusionMethod,
    pub params: HyperParams,
    /// `None` disables preprocessing and feeds raw features to completion.
    pub kpca: Option<KpcaSettings>,
    /// Threshold used for Hamming-loss decisions.
    pub threshold: f64,
}

impl PipelineConfig {
    pub fn new(method: FusionMethod) -> Self {
        PipelineConfig {
            method,
            params: HyperParams::default(),
            kpca: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.lambda >= 0.0) || !p.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be finite and nonnegative, got {}",
                p.lambda
            )));
        }
        if !(p.gamma > 0.0) || !p.gamma.is_finite() {
            return Err(Error::invalid(format!(
                "gamma must be finite and positive, got {}",
                p.gamma
            )));
        }
        if !(p.eta >= 0.0) || !p.eta.is_finite() {
            return Err(Error::invalid(format!(
                "eta must be finite and nonnegative, got {}",
                p.eta
            )));
        }
        if self.method == FusionMethod::Ap && p.eta == 0.0 {
            return Err(Error::invalid("the ap method requires eta > 0"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        if let Some(k) = &self.kpca {
            if k.dim == 0 {
                return Err(Error::invalid("kpca dimension must be at least 1"));
            }
            if let KernelChoice::Rbf {
                bandwidth: Some(b),
            } = k.kernel
            {
                if !(b > 0.0) || !b.is_finite() {
                    return Err(Error::invalid(format!(
                        "rbf bandwidth must be finite and positive, got {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Experiment data
// ---------------------------------------------------------------------------

/// A dataset paired with its full ground truth. The dataset's own label
/// matrix only exposes labeled-sample labels; the truth matrix additionally
/// holds the unlabeled/test labels used for validation and final scoring.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    dataset: MultiViewDataset,
    truth: LabelMatrix,
}

impl ExperimentData {
    pub fn new(dataset: MultiViewDataset, truth: LabelMatrix) -> Result<Self> {
        if truth.num_labels() != dataset.num_labels()
            || truth.num_samples() != dataset.num_samples()
        {
            return Err(Error::dim(format!(
                "truth is {}×{} but the dataset labels are {}×{}",
                truth.num_labels(),
                truth.num_samples(),
                dataset.num_labels(),
                dataset.num_samples()
            )));
        }
        if truth.num_known() != truth.num_labels() * truth.num_samples() {
            return Err(Error::invalid("truth matrix must be fully known"));
        }
        for &j in &dataset.labeled_indices() {
            for t in 0..dataset.num_labels() {
                if dataset.labels().get(t, j) != truth.get(t, j) {
                    return Err(Error::invalid(format!(
                        "truth disagrees with the dataset's labeled entry ({t}, {j})"
                    )));
                }
            }
        }
        Ok(ExperimentData { dataset, truth })
    }

    pub fn dataset(&self) -> &MultiViewDataset {
        &self.dataset
    }

    pub fn truth(&self) -> &LabelMatrix {
        &self.truth
    }

    /// Replace the truth matrix (the dataset itself is untouched).
    pub fn with_truth(&self, truth: LabelMatrix) -> Result<Self> {
        ExperimentData::new(self.dataset.clone(), truth)
    }

    fn split_test(&self) -> (Vec<usize>, Vec<usize>) {
        let test = self.dataset.test_indices();
        if test.len() < 2 {
            return (Vec::new(), test);
        }
        let mut shuffled = test.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.dataset.seed() ^ VALIDATION_SEED_SALT);
        shuffled.shuffle(&mut rng);
        let n_val = ((test.len() as f64 * VALIDATION_FRACTION).round() as usize)
            .clamp(1, test.len() - 1);
        let mut validation: Vec<usize> = shuffled[..n_val].to_vec();
        let mut evaluation: Vec<usize> = shuffled[n_val..].to_vec();
        validation.sort_unstable();
        evaluation.sort_unstable();
        (validation, evaluation)
    }

    /// Test samples whose truth may be read during model selection.
    pub fn validation_indices(&self) -> Vec<usize> {
        self.split_test().0
    }

    /// Test samples reserved for final evaluation.
    pub fn evaluation_test_indices(&self) -> Vec<usize> {
        self.split_test().1
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// A trained model: the preprocessed per-view features (a single
/// concatenated view for `cmc`), the fitted preprocessing transforms, the
/// completion parameters, and the learned fusion weights.
#[derive(Debug, Clone)]
pub struct MvmcModel {
    method: FusionMethod,
    params: HyperParams,
    theta: Option<SimplexWeights>,
    kpca: Option<Vec<KpcaModel>>,
    processed: Vec<FeatureMatrix>,
    excluded_labels: Vec<usize>,
    seed: u64,
}

impl MvmcModel {
    pub fn method(&self) -> FusionMethod {
        self.method
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    /// Learned simplex weights; `None` for `cmc`.
    pub fn theta(&self) -> Option<&SimplexWeights> {
        self.theta.as_ref()
    }

    pub fn kpca_models(&self) -> Option<&[KpcaModel]> {
        self.kpca.as_deref()
    }

    /// The feature views completion runs on (post-preprocessing).
    pub fn processed_views(&self) -> &[FeatureMatrix] {
        &self.processed
    }

    /// Labels excluded from `ap` weight learning (single-class corpora).
    pub fn excluded_labels(&self) -> &[usize] {
        &self.excluded_labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

// ---------------------------------------------------------------------------
// Internal stages
// ---------------------------------------------------------------------------

/// Fill missing feature cells with the per-feature mean of the observed
/// cells so kernels can be evaluated; a feature with no observations at all
/// is filled with zero.
fn impute_missing(view: &FeatureMatrix) -> FeatureMatrix {
    if !view.has_missing() {
        return view.clone();
    }
    let d = view.feature_dim();
    let n = view.num_samples();
    let mut filled = Array2::zeros((d, n));
    for f in 0..d {
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in 0..n {
            if let Some(v) = view.get(f, s) {
                sum += v;
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        for s in 0..n {
            filled[(f, s)] = view.get(f, s).unwrap_or(mean);
        }
    }
    FeatureMatrix::dense(filled)
}

/// Apply the configured preprocessing to every view.
fn preprocess_views(
    data: &ExperimentData,
    kpca: &Option<KpcaSettings>,
) -> Result<(Vec<FeatureMatrix>, Option<Vec<KpcaModel>>)> {
    let views = data.dataset().views();
    let Some(settings) = kpca else {
        return Ok((views.to_vec(), None));
    };
    let mut processed = Vec::with_capacity(views.len());
    let mut models = Vec::with_capacity(views.len());
    for (v, view) in views.iter().enumerate() {
        let filled = impute_missing(view);
        let kernel = match settings.kernel {
            KernelChoice::Linear => Kernel::Linear,
            KernelChoice::Rbf { bandwidth } => {
                let b = match bandwidth {
                    Some(b) => b,
                    None => median_pairwise_distance(&filled)?,
                };
                Kernel::Rbf { bandwidth: b }
            }
        };
        let model = kpca_fit(&filled, kernel, settings.dim)
            .map_err(|e| Error::solver(format!("kpca failed on view {v}: {e}")))?;
        processed.push(model.training_projections()?);
        models.push(model);
    }
    Ok((processed, Some(models)))
}

/// Concatenate views vertically after scaling each to unit Frobenius norm
/// over its observed entries; missing cells stay missing.
fn concatenate_normalized(views: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    if views.is_empty() {
        return Err(Error::invalid("no views to concatenate"));
    }
    let n = views[0].num_samples();
    let total_d: usize = views.iter().map(|v| v.feature_dim()).sum();
    let mut values = Array2::zeros((total_d, n));
    let mut missing = Array2::from_elem((total_d, n), false);
    let mut any_missing = false;
    let mut row = 0;
    for view in views {
        let mut frob_sq = 0.0;
        for f in 0..view.feature_dim() {
            for s in 0..n {
                if let Some(v) = view.get(f, s) {
                    frob_sq += v * v;
                }
            }
        }
        let scale = if frob_sq > 0.0 { frob_sq.sqrt() } else { 1.0 };
        for f in 0..view.feature_dim() {
            for s in 0..n {
                match view.get(f, s) {
                    Some(v) => values[(row + f, s)] = v / scale,
                    None => {
                        missing[(row + f, s)] = true;
                        any_missing = true;
                    }
                }
            }
        }
        row += view.feature_dim();
    }
    if any_missing {
        FeatureMatrix::with_missing(values, missing)
    } else {
        Ok(FeatureMatrix::dense(values))
    }
}

/// Run the full completion of one view (all labeled entries observed) and
/// return per-entry positive-class probabilities, m×n.
fn view_probabilities(
    view: &FeatureMatrix,
    labels: &LabelMatrix,
    mc: &McParams,
) -> Result<Array2<f64>> {
    let sys = build_stacked(view, labels)?;
    let sol = fpc_solve(&sys, mc)?;
    Ok(sol.probabilities())
}

/// Per-view full-completion probabilities, computed concurrently.
fn all_view_probabilities(
    views: &[FeatureMatrix],
    labels: &LabelMatrix,
    mc: &McParams,
) -> Result<Vec<Array2<f64>>> {
    views
        .par_iter()
        .enumerate()
        .map(|(v, view)| {
            view_probabilities(view, labels, mc)
                .map_err(|e| Error::solver(format!("completion failed on view {v}: {e}")))
        })
        .collect()
}

/// Cross-validated prediction tensor over the labeled samples.
fn cv_tensor(
    data: &ExperimentData,
    processed: &[FeatureMatrix],
    mc: &McParams,
) -> Result<PredictionTensor> {
    let ds = data.dataset().with_views(processed.to_vec())?;
    let split = make_split(&ds, ds.seed())?;
    let preds: Vec<Array2<f64>> = (0..ds.num_views())
        .into_par_iter()
        .map(|v| generate_view_predictions(v, &ds, &split, mc))
        .collect::<Result<_>>()?;
    assemble_tensor(&ds, &preds)
}

/// Convex combination of per-view probability matrices.
fn fuse(probabilities: &[Array2<f64>], theta: &SimplexWeights) -> Array2<f64> {
    assert_eq!(probabilities.len(), theta.len(), "weight/view count mismatch");
    let mut fused = Array2::zeros(probabilities[0].dim());
    for (p, &w) in probabilities.iter().zip(theta.values()) {
        fused.scaled_add(w, p);
    }
    fused
}

// ---------------------------------------------------------------------------
// Train / predict / evaluate
// ---------------------------------------------------------------------------

/// Fit a model: preprocess views, learn fusion weights per the configured
/// method.
pub fn train(data: &ExperimentData, config: &PipelineConfig) -> Result<MvmcModel> {
    config.validate()?;
    let mc = config.params.mc_params();
    mc.validate()?;
    let (processed, kpca_models) = preprocess_views(data, &config.kpca)?;
    let v = processed.len();
    let seed = data.dataset().seed();

    let mut excluded_labels = Vec::new();
    let (processed, theta) = match config.method {
        FusionMethod::Amc => (processed, Some(SimplexWeights::uniform(v))),
        FusionMethod::Ls => {
            let tensor = cv_tensor(data, &processed, &mc)?;
            let theta = solve_ls(&tensor, config.params.eta, DEFAULT_LS_TOL, DEFAULT_LS_MAX_SWEEPS)
                .map_err(|e| Error::solver(format!("ls fusion failed: {e}")))?;
            (processed, Some(theta))
        }
        FusionMethod::Ap => {
            let tensor = cv_tensor(data, &processed, &mc)?;
            let (theta, trace) = solve_ap_with_trace(
                &tensor,
                config.params.eta,
                DEFAULT_CP_TOL,
                DEFAULT_AP_MAX_OUTER,
            )
            .map_err(|e| Error::solver(format!("ap fusion failed: {e}")))?;
            excluded_labels = trace.excluded_labels;
            (processed, Some(theta))
        }
        FusionMethod::Bmc => {
            let validation = data.validation_indices();
            if validation.is_empty() {
                return Err(Error::invalid(
                    "bmc needs a validation split (at least two test samples)",
                ));
            }
            let probs = all_view_probabilities(&processed, data.dataset().labels(), &mc)?;
            let mut best: Option<(usize, f64)> = None;
            for (view, p) in probs.iter().enumerate() {
                let metrics = evaluate_split(p, data.truth(), &validation, config.threshold)?;
                let map = metrics.m_ap.mean;
                if best.map_or(true, |(_, b)| map > b) {
                    best = Some((view, map));
                }
            }
            let (best_view, _) = best.expect("at least one view");
            (processed, Some(SimplexWeights::one_hot(v, best_view)))
        }
        FusionMethod::Cmc => {
            let concatenated = concatenate_normalized(&processed)?;
            (vec![concatenated], None)
        }
    };

    Ok(MvmcModel {
        method: config.method,
        params: config.params,
        theta,
        kpca: kpca_models,
        processed,
        excluded_labels,
        seed,
    })
}

/// Fused positive-class probabilities for every entry, m×n: per view a full
/// completion with all labeled entries observed, then the θ-weighted convex
/// combination (`cmc` has a single view and no weights).
pub fn predict(model: &MvmcModel, data: &ExperimentData) -> Result<Array2<f64>> {
    let labels = data.dataset().labels();
    for view in &model.processed {
        if view.num_samples() != labels.num_samples() {
            return Err(Error::dim(format!(
                "model was trained on {} samples but the dataset has {}",
                view.num_samples(),
                labels.num_samples()
            )));
        }
    }
    let mc = model.params.mc_params();
    let probs = all_view_probabilities(&model.processed, labels, &mc)?;
    match &model.theta {
        Some(theta) => Ok(fuse(&probs, theta)),
        None => Ok(probs.into_iter().next().expect("cmc has one view")),
    }
}

/// Ranking and decision metrics of one sample subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    /// Mean per-label average precision.
    pub m_ap: LabelMean,
    /// Mean per-label AUC.
    pub m_auc: LabelMean,
    /// Hamming loss of thresholded decisions.
    pub hamming_loss: f64,
}

/// Score one subset of samples against the truth.
pub fn evaluate_split(
    predictions: &Array2<f64>,
    truth: &LabelMatrix,
    indices: &[usize],
    threshold: f64,
) -> Result<SplitMetrics> {
    if indices.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty sample subset"));
    }
    let m = truth.num_labels();
    if predictions.nrows() != m {
        return Err(Error::dim(format!(
            "predictions have {} label rows but truth has {m}",
            predictions.nrows()
        )));
    }
    let mut sub_scores = Array2::zeros((m, indices.len()));
    for (c, &j) in indices.iter().enumerate() {
        if j >= truth.num_samples() || j >= predictions.ncols() {
            return Err(Error::dim(format!("sample index {j} out of range")));
        }
        for t in 0..m {
            sub_scores[(t, c)] = predictions[(t, j)];
        }
    }

    let mut aps = Vec::with_capacity(m);
    let mut aucs = Vec::with_capacity(m);
    for t in 0..m {
        let mut scores = Vec::with_capacity(indices.len());
        let mut positive = Vec::with_capacity(indices.len());
        for (c, &j) in indices.iter().enumerate() {
            let y = truth.get(t, j).value().ok_or_else(|| {
                Error::invalid(format!("truth entry ({t}, {j}) is unknown"))
            })?;
            scores.push(sub_scores[(t, c)]);
            positive.push(y > 0.0);
        }
        let ls = LabelScores::from_parts(scores, positive)?;
        aps.push(option_metric(average_precision(&ls))?);
        aucs.push(option_metric(auc(&ls))?);
    }
    let m_ap = mean_over_labels(&aps)?;
    let m_auc = mean_over_labels(&aucs)?;

    let decisions = threshold_predictions(&sub_scores, threshold);
    let truth_sub = truth.select_columns(indices);
    let hamming = hamming_loss(&decisions, &truth_sub)?;

    Ok(SplitMetrics {
        m_ap,
        m_auc,
        hamming_loss: hamming,
    })
}

/// Metric errors from degenerate single-class labels become `None`; other
/// errors propagate.
fn option_metric(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Per-split metrics of one trained model's predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub validation: Option<SplitMetrics>,
    pub test: Option<SplitMetrics>,
    pub unlabeled: Option<SplitMetrics>,
}

/// Evaluate fused predictions on the validation, final-test, and unlabeled
/// subsets (whichever are non-empty).
pub fn evaluate(
    predictions: &Array2<f64>,
    data: &ExperimentData,
    threshold: f64,
) -> Result<EvalReport> {
    let validation = data.validation_indices();
    let test = data.evaluation_test_indices();
    let unlabeled = data.dataset().unlabeled_indices();
    // A split whose every label is single-class has no defined ranking
    // metric at all; report it as absent rather than failing the run.
    let eval_if = |idx: &[usize]| -> Result<Option<SplitMetrics>> {
        if idx.is_empty() {
            return Ok(None);
        }
        match evaluate_split(predictions, data.truth(), idx, threshold) {
            Ok(metrics) => Ok(Some(metrics)),
            Err(Error::UndefinedMetric(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    Ok(EvalReport {
        validation: eval_if(&validation)?,
        test: eval_if(&test)?,
        unlabeled: eval_if(&unlabeled)?,
    })
}

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

/// Candidate grids for the exhaustive search. Values are deduplicated and
/// sorted ascending; ties in validation performance resolve toward the
/// smaller λ, then smaller η, then smaller γ.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrids {
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for SearchGrids {
    fn default() -> Self {
        SearchGrids {
            lambda: (-4..=2).map(|i| 10f64.powi(i)).collect(),
            eta: (-2..=5).map(|i| 10f64.powi(i)).collect(),
            gamma: vec![1.0, 3.0, 30.0],
        }
    }
}

fn sorted_grid(values: &[f64], name: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid(format!("empty {name} grid")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value in {name} grid")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    sorted.dedup();
    Ok(sorted)
}

/// Fixed per-(λ, γ) artifacts shared by every η candidate.
struct BaseArtifacts {
    tensor: Option<PredictionTensor>,
    probabilities: Vec<Array2<f64>>,
    cmc_probabilities: Option<Array2<f64>>,
}

/// Exhaustive validation-driven grid search over (λ, η, γ). Returns the
/// winning parameters and their validation mean average precision.
///
/// Completion artifacts depend only on (λ, γ); they are computed once per
/// such pair and reused across the η candidates.
pub fn hyperparam_search(
    data: &ExperimentData,
    method: FusionMethod,
    grids: &SearchGrids,
    kpca: &Option<KpcaSettings>,
    threshold: f64,
) -> Result<(HyperParams, f64)> {
    let lambdas = sorted_grid(&grids.lambda, "lambda")?;
    let gammas = sorted_grid(&grids.gamma, "gamma")?;
    let etas = if method.uses_eta() {
        sorted_grid(&grids.eta, "eta")?
    } else {
        vec![sorted_grid(&grids.eta, "eta")?[0]]
    };
    let validation = data.validation_indices();
    if validation.is_empty() {
        return Err(Error::invalid(
            "hyperparameter search needs a validation split (at least two test samples)",
        ));
    }

    let (processed, _) = preprocess_views(data, kpca)?;
    let labels = data.dataset().labels();
    let needs_tensor = method.uses_eta();

    let mut cache: std::collections::HashMap<(usize, usize), BaseArtifacts> =
        std::collections::HashMap::new();
    let mut best: Option<(HyperParams, f64)> = None;

    for (li, &lambda) in lambdas.iter().enumerate() {
        for &eta in &etas {
            for (gi, &gamma) in gammas.iter().enumerate() {
                let params = HyperParams { lambda, gamma, eta };
                if !cache.contains_key(&(li, gi)) {
                    let mc = params.mc_params();
                    mc.validate()?;
                    let tensor = if needs_tensor {
                        Some(cv_tensor(data, &processed, &mc)?)
                    } else {
                        None
                    };
                    let probabilities = if method == FusionMethod::Cmc {
                        Vec::new()
                    } else {
                        all_view_probabilities(&processed, labels, &mc)?
                    };
                    let cmc_probabilities = if method == FusionMethod::Cmc {
                        let concatenated = concatenate_normalized(&processed)?;
                        Some(view_probabilities(&concatenated, labels, &mc)?)
                    } else {
                        None
                    };
                    cache.insert(
                        (li, gi),
                        BaseArtifacts {
                            tensor,
                            probabilities,
                            cmc_probabilities,
                        },
                    );
                }
                let base = &cache[&(li, gi)];

                let fused = match method {
                    FusionMethod::Ls => {
                        let tensor = base.tensor.as_ref().expect("tensor for ls");
                        let theta =
                            solve_ls(tensor, eta, DEFAULT_LS_TOL, DEFAULT_LS_MAX_SWEEPS)?;
                        fuse(&base.probabilities, &theta)
                    }
                    FusionMethod::Ap => {
                        let tensor = base.tensor.as_ref().expect("tensor for ap");
                        let theta =
                            crate::fusion_ap::solve_ap(tensor, eta, DEFAULT_CP_TOL, DEFAULT_AP_MAX_OUTER)?;
                        fuse(&base.probabilities, &theta)
                    }
                    FusionMethod::Amc => {
                        let theta = SimplexWeights::uniform(base.probabilities.len());
                        fuse(&base.probabilities, &theta)
                    }
                    FusionMethod::Bmc => {
                        let mut best_view: Option<(usize, f64)> = None;
                        for (view, p) in base.probabilities.iter().enumerate() {
                            let metrics =
                                evaluate_split(p, data.truth(), &validation, threshold)?;
                            if best_view.map_or(true, |(_, b)| metrics.m_ap.mean > b) {
                                best_view = Some((view, metrics.m_ap.mean));
                            }
                        }
                        let (view, _) = best_view.expect("at least one view");
                        base.probabilities[view].clone()
                    }
                    FusionMethod::Cmc => base
                        .cmc_probabilities
                        .as_ref()
                        .expect("cmc probabilities")
                        .clone(),
                };
                let metrics = evaluate_split(&fused, data.truth(), &validation, threshold)?;
                let map = metrics.m_ap.mean;
                if best.as_ref().map_or(true, |&(_, b)| map > b) {
                    best = Some((params, map));
                }
            }
        }
    }
    Ok(best.expect("grids are non-empty"))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One method × seed outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Learned simplex weights; absent for `cmc`.
    pub theta: Option<Vec<f64>>,
    /// Labels the `ap` solver had to skip (single-class corpora).
    pub excluded_labels: Vec<usize>,
    pub hyperparams: HyperParams,
    pub metrics: EvalReport,
}

/// Mean and standard deviation over seeds (sample standard deviation; zero
/// for fewer than two values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std_dev: f64,
}

/// Summarize a sequence of per-seed values.
pub fn summarize(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_dev = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some(MetricSummary { mean, std_dev })
}

/// Aggregated results of one method over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: FusionMethod,
    pub seeds: Vec<SeedResult>,
    pub test_map: Option<MetricSummary>,
    pub test_mauc: Option<MetricSummary>,
    pub test_hamming: Option<MetricSummary>,
}

impl MethodReport {
    pub fn from_seeds(method: FusionMethod, seeds: Vec<SeedResult>) -> Self {
        let collect = |f: &dyn Fn(&SplitMetrics) -> f64| -> Vec<f64> {
            seeds
                .iter()
                .filter_map(|s| s.metrics.test.as_ref().map(f))
                .collect()
        };
        let test_map = summarize(&collect(&|m| m.m_ap.mean));
        let test_mauc = summarize(&collect(&|m| m.m_auc.mean));
        let test_hamming = summarize(&collect(&|m| m.hamming_loss));
        MethodReport {
            method,
            seeds,
            test_map,
            test_mauc,
            test_hamming,
        }
    }
}

/// The full deterministic experiment report. Wall-clock timings are kept
/// out of serialization so identical runs emit identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub num_views: usize,
    pub num_labels: usize,
    pub num_samples: usize,
    pub threshold: f64,
    pub methods: Vec<MethodReport>,
    #[serde(skip_serializing, default)]
    pub timing_seconds: Vec<(String, f64)>,
}
