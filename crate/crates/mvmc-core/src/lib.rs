//! Transductive multi-label classification over multi-view data.
//!
//! The toolkit predicts the missing labels of partially labeled sample
//! collections observed through several feature views:
//!
//! 1. **Per-view completion** ([`mc`]): each view's features and the known
//!    labels are stacked into one matrix whose unknown labels are recovered
//!    by nuclear-norm-regularized matrix completion, solved with fixed point
//!    continuation and singular value shrinkage.
//! 2. **View fusion** ([`fusion_ls`], [`fusion_ap`]): per-view soft labels
//!    are combined with simplex weights learned either by regularized least
//!    squares or by a structural SVM that directly optimizes average
//!    precision, using cross-validated predictions ([`cv`]) as training
//!    signal.
//! 3. **Evaluation** ([`metrics`]): ranking quality per label via average
//!    precision and AUC, plus Hamming loss at a threshold.
//!
//! Kernel PCA preprocessing ([`preprocess`]) compresses raw views before
//! completion, and [`pipeline`] wires everything into end-to-end experiment
//! runs.

pub mod cv;
pub mod error;
pub mod fusion_ap;
pub mod fusion_ls;
pub mod mc;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    build_stacked, vectorize_labeled, FeatureMatrix, IndexMap, Label, LabelMatrix,
    MultiViewDataset, ObservedMask, PredictionTensor, SampleRole, SimplexWeights, StackedMatrix,
    StackedSystem,
};

pub use cv::{assemble_tensor, generate_view_predictions, make_split, FoldSplit};
pub use fusion_ap::{
    ap_loss, build_corpora, dual_hessian, dual_objective, find_most_violated, psi, solve_alpha,
    solve_ap, solve_ap_with_trace, solve_zeta, ApTrace, Constraint, LabelCorpus, PairwiseOrdering,
    WorkingSet,
};
pub use fusion_ls::{build_ls, ls_objective, solve_ls, update_pair, LsProblem};
pub use mc::{
    auto_tau, fpc_solve, fpc_solve_with_trace, nuclear_norm, shrink, singular_values,
    smooth_gradient, smooth_objective, McParams, McSolution, StageTrace,
};
pub use metrics::{
    auc, average_precision, hamming_loss, mean_over_labels, threshold_predictions, LabelMean,
    LabelScores,
};
pub use pipeline::{
    evaluate, evaluate_split, hyperparam_search, predict, summarize, train, EvalReport,
    ExperimentData, FusionMethod, HyperParams, KernelChoice, KpcaSettings, MethodReport,
    MetricSummary, MvmcModel, PipelineConfig, RunReport, SearchGrids, SeedResult, SplitMetrics,
    DEFAULT_THRESHOLD, VALIDATION_FRACTION,
};
pub use preprocess::{
    kpca_fit, kpca_transform, median_pairwise_distance, sigmoid, sigmoid_scores, Kernel, KpcaModel,
};
