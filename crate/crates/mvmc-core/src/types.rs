//! Shared data model: label/feature matrices, observation masks, stacked
//! systems for completion, multi-view datasets, prediction tensors and
//! simplex-constrained fusion weights.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Tolerance on negative fusion weights accepted by [`SimplexWeights::new`].
pub const SIMPLEX_NEG_TOL: f64 = 1e-12;
/// Tolerance on the weight sum accepted by [`SimplexWeights::new`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-10;

/// Tri-state label value. Unknown is a first-class state so that masked
/// entries can never be read as numbers by accident.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Neg,
    Pos,
    Unknown,
}

impl Label {
    /// Numeric value of a known label; `None` when unknown.
    pub fn value(self) -> Option<f64> {
        match self {
            Label::Neg => Some(-1.0),
            Label::Pos => Some(1.0),
            Label::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != Label::Unknown
    }

    /// Hard label from a real score: strictly positive maps to `Pos`,
    /// anything else to `Neg`.
    pub fn from_sign(score: f64) -> Label {
        if score > 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

/// An m×n matrix of tri-state labels (m labels, n samples).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    entries: Array2<Label>,
}

impl LabelMatrix {
    pub fn new(entries: Array2<Label>) -> Self {
        LabelMatrix { entries }
    }

    /// All-unknown matrix of the given shape.
    pub fn unknown(m: usize, n: usize) -> Self {
        LabelMatrix {
            entries: Array2::from_elem((m, n), Label::Unknown),
        }
    }

    /// Fully known matrix from real scores: strictly positive entries become
    /// `Pos`, the rest `Neg`.
    pub fn from_signs(scores: &Array2<f64>) -> Self {
        LabelMatrix {
            entries: scores.mapv(Label::from_sign),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, label: usize, sample: usize) -> Label {
        self.entries[(label, sample)]
    }

    pub fn set(&mut self, label: usize, sample: usize, value: Label) {
        self.entries[(label, sample)] = value;
    }

    /// Iterator over `(label, sample, value)` for every known entry, in
    /// row-major order.
    pub fn known_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .indexed_iter()
            .filter_map(|((t, j), l)| l.value().map(|v| (t, j, v)))
    }

    pub fn num_known(&self) -> usize {
        self.entries.iter().filter(|l| l.is_known()).count()
    }

    /// True when every entry of column `sample` is known.
    pub fn column_fully_known(&self, sample: usize) -> bool {
        self.entries.column(sample).iter().all(|l| l.is_known())
    }

    /// True when every entry of column `sample` is unknown.
    pub fn column_fully_unknown(&self, sample: usize) -> bool {
        self.entries.column(sample).iter().all(|l| !l.is_known())
    }

    /// New matrix keeping only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> LabelMatrix {
        let m = self.num_labels();
        let mut out = Array2::from_elem((m, cols.len()), Label::Unknown);
        for (k, &j) in cols.iter().enumerate() {
            for t in 0..m {
                out[(t, k)] = self.entries[(t, j)];
            }
        }
        LabelMatrix { entries: out }
    }

    /// Copy with the given columns replaced by all-unknown.
    pub fn hide_columns(&self, cols: &[usize]) -> LabelMatrix {
        let mut out = self.clone();
        for &j in cols {
            for t in 0..self.num_labels() {
                out.entries[(t, j)] = Label::Unknown;
            }
        }
        out
    }
}

/// A d×n matrix of real features with an optional per-entry missing mask.
/// Missing entries are never exposed as numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    missing: Option<Array2<bool>>,
}

impl FeatureMatrix {
    /// Fully observed feature matrix.
    pub fn dense(values: Array2<f64>) -> Self {
        FeatureMatrix {
            values,
            missing: None,
        }
    }

    /// Feature matrix with a missing mask (`true` = missing). The numeric
    /// content of missing cells is ignored and zeroed on construction.
    pub fn with_missing(mut values: Array2<f64>, missing: Array2<bool>) -> Result<Self> {
        if values.dim() != missing.dim() {
            return Err(Error::dim(format!(
                "feature values {:?} vs missing mask {:?}",
                values.dim(),
                missing.dim()
            )));
        }
        let any_missing = missing.iter().any(|&b| b);
        for ((i, j), &miss) in missing.indexed_iter() {
            if miss {
                values[(i, j)] = 0.0;
            }
        }
        Ok(FeatureMatrix {
            values,
            missing: if any_missing { Some(missing) } else { None },
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.values.ncols()
    }

    /// Value at `(feature, sample)`, or `None` when missing.
    pub fn get(&self, feature: usize, sample: usize) -> Option<f64> {
        match &self.missing {
            Some(mask) if mask[(feature, sample)] => None,
            _ => Some(self.values[(feature, sample)]),
        }
    }

    pub fn has_missing(&self) -> bool {
        self.missing.is_some()
    }

    pub fn num_missing(&self) -> usize {
        self.missing
            .as_ref()
            .map_or(0, |m| m.iter().filter(|&&b| b).count())
    }

    /// True when column `sample` has no missing entries.
    pub fn column_fully_observed(&self, sample: usize) -> bool {
        match &self.missing {
            None => true,
            Some(mask) => mask.column(sample).iter().all(|&b| !b),
        }
    }

    /// Dense view of the values; errors if any entry is missing.
    pub fn as_dense(&self) -> Result<ArrayView2<'_, f64>> {
        if self.has_missing() && self.num_missing() > 0 {
            return Err(Error::invalid(
                "feature matrix has missing entries where a dense matrix is required",
            ));
        }
        Ok(self.values.view())
    }

    /// New matrix keeping only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let values = self.values.select(Axis(1), cols);
        let missing = self.missing.as_ref().map(|m| m.select(Axis(1), cols));
        FeatureMatrix { values, missing }
    }
}

/// Set of observed `(row, col)` positions of a matrix, stored sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservedMask {
    entries: Vec<(usize, usize)>,
}

impl ObservedMask {
    pub fn new() -> Self {
        ObservedMask::default()
    }

    /// Build from index pairs, validating bounds and rejecting duplicates.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (usize, usize)>,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize)> = Vec::new();
        for (i, j) in pairs {
            if i >= rows || j >= cols {
                return Err(Error::dim(format!(
                    "mask entry ({i}, {j}) out of bounds for {rows}x{cols}"
                )));
            }
            entries.push((i, j));
        }
        entries.sort_unstable();
        if entries.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate entry in observation mask"));
        }
        Ok(ObservedMask { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.binary_search(&(i, j)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }
}

/// The (m+d+1)×n stacked matrix `[labels; features; ones-row]` whose low rank
/// couples soft labels to features.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrix {
    z: Array2<f64>,
    m: usize,
    d: usize,
}

impl StackedMatrix {
    /// Wrap an (m+d+1)×n matrix, checking the shape and the ones row.
    pub fn new(z: Array2<f64>, m: usize, d: usize) -> Result<Self> {
        if z.nrows() != m + d + 1 {
            return Err(Error::dim(format!(
                "stacked matrix has {} rows, expected m+d+1 = {}",
                z.nrows(),
                m + d + 1
            )));
        }
        if z.ncols() == 0 {
            return Err(Error::dim("stacked matrix must have at least one column"));
        }
        if z.row(m + d).iter().any(|&v| v != 1.0) {
            return Err(Error::invalid("last row of a stacked matrix must be all ones"));
        }
        Ok(StackedMatrix { z, m, d })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn num_label_rows(&self) -> usize {
        self.m
    }

    pub fn num_feature_rows(&self) -> usize {
        self.d
    }

    pub fn num_samples(&self) -> usize {
        self.z.ncols()
    }

    /// Rows holding the (soft) labels: an m×n view.
    pub fn label_rows(&self) -> ArrayView2<'_, f64> {
        self.z.slice(ndarray::s![..self.m, ..])
    }

    /// Rows holding the features: a d×n view.
    pub fn feature_rows(&self) -> ArrayView2<'_, f64> {
        self.z.slice(ndarray::s![self.m..self.m + self.d, ..])
    }
}

/// A stacked matrix together with the masks of its observed feature and label
/// entries. Mask coordinates are in stacked-row space: label entries live in
/// rows `0..m`, feature entries in rows `m..m+d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    pub z0: StackedMatrix,
    pub omega_x: ObservedMask,
    pub omega_y: ObservedMask,
}

/// Assemble the stacked system `Z⁰ = [Y⁰; X⁰; 1ᵀ]` from a feature matrix and
/// a partially observed label matrix. Unknown label entries and missing
/// feature entries are initialized to 0 and excluded from the masks.
pub fn build_stacked(x: &FeatureMatrix, y: &LabelMatrix) -> Result<StackedSystem> {
    let n = x.num_samples();
    if y.num_samples() != n {
        return Err(Error::dim(format!(
            "feature matrix has {} samples but label matrix has {}",
            n,
            y.num_samples()
        )));
    }
    if n == 0 {
        return Err(Error::dim("cannot stack a system with zero samples"));
    }
    let m = y.num_labels();
    let d = x.feature_dim();

    let mut z = Array2::<f64>::zeros((m + d + 1, n));
    let mut omega_y = Vec::new();
    for (t, j, v) in y.known_entries() {
        z[(t, j)] = v;
        omega_y.push((t, j));
    }
    let mut omega_x = Vec::new();
    for i in 0..d {
        for j in 0..n {
            if let Some(v) = x.get(i, j) {
                z[(m + i, j)] = v;
                omega_x.push((m + i, j));
            }
        }
    }
    z.row_mut(m + d).fill(1.0);

    Ok(StackedSystem {
        z0: StackedMatrix::new(z, m, d)?,
        omega_x: ObservedMask::from_pairs(omega_x, m + d + 1, n)?,
        omega_y: ObservedMask::from_pairs(omega_y, m + d + 1, n)?,
    })
}

/// Role of one sample in the transductive protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRole {
    Labeled,
    Unlabeled,
    Test,
}

impl SampleRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleRole::Labeled => "labeled",
            SampleRole::Unlabeled => "unlabeled",
            SampleRole::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<SampleRole> {
        match s {
            "labeled" => Ok(SampleRole::Labeled),
            "unlabeled" => Ok(SampleRole::Unlabeled),
            "test" => Ok(SampleRole::Test),
            other => Err(Error::invalid(format!("unknown sample role '{other}'"))),
        }
    }
}

/// V feature views over the same n samples, a shared partially observed label
/// matrix, and a labeled/unlabeled/test partition.
///
/// Construction enforces that labeled samples have fully known labels and
/// that unlabeled/test samples have fully unknown labels, so downstream code
/// cannot read labels it should not see.
#[derive(Debug, Clone)]
pub struct MultiViewDataset {
    views: Vec<FeatureMatrix>,
    labels: LabelMatrix,
    partition: Vec<SampleRole>,
    seed: u64,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<FeatureMatrix>,
        labels: LabelMatrix,
        partition: Vec<SampleRole>,
        seed: u64,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("dataset needs at least one view"));
        }
        let n = labels.num_samples();
        for (v, view) in views.iter().enumerate() {
            if view.num_samples() != n {
                return Err(Error::dim(format!(
                    "view {v} has {} samples but labels have {n}",
                    view.num_samples()
                )));
            }
        }
        if partition.len() != n {
            return Err(Error::dim(format!(
                "partition lists {} samples but dataset has {n}",
                partition.len()
            )));
        }
        for (j, role) in partition.iter().enumerate() {
            match role {
                SampleRole::Labeled => {
                    if !labels.column_fully_known(j) {
                        return Err(Error::invalid(format!(
                            "labeled sample {j} has unknown label entries"
                        )));
                    }
                }
                SampleRole::Unlabeled | SampleRole::Test => {
                    if !labels.column_fully_unknown(j) {
                        return Err(Error::invalid(format!(
                            "{} sample {j} has known label entries",
                            role.as_str()
                        )));
                    }
                }
            }
        }
        Ok(MultiViewDataset {
            views,
            labels,
            partition,
            seed,
        })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn num_samples(&self) -> usize {
        self.labels.num_samples()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.num_labels()
    }

    pub fn view(&self, v: usize) -> &FeatureMatrix {
        &self.views[v]
    }

    pub fn views(&self) -> &[FeatureMatrix] {
        &self.views
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn partition(&self) -> &[SampleRole] {
        &self.partition
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn indices_with_role(&self, role: SampleRole) -> Vec<usize> {
        self.partition
            .iter()
            .enumerate()
            .filter_map(|(j, &r)| (r == role).then_some(j))
            .collect()
    }

    /// Indices of labeled samples, ascending.
    pub fn labeled_indices(&self) -> Vec<usize> {
        self.indices_with_role(SampleRole::Labeled)
    }

    /// Indices of unlabeled samples, ascending.
    pub fn unlabeled_indices(&self) -> Vec<usize> {
        self.indices_with_role(SampleRole::Unlabeled)
    }

    /// Indices of test samples, ascending.
    pub fn test_indices(&self) -> Vec<usize> {
        self.indices_with_role(SampleRole::Test)
    }

    /// Same partition and labels over a replacement set of views (used after
    /// preprocessing transforms the features).
    pub fn with_views(&self, views: Vec<FeatureMatrix>) -> Result<MultiViewDataset> {
        MultiViewDataset::new(views, self.labels.clone(), self.partition.clone(), self.seed)
    }
}

/// Fixed row-major bijection between `(label, sample)` pairs and flat indices
/// `k = label · n_l + sample`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexMap {
    m: usize,
    n_l: usize,
}

impl IndexMap {
    pub fn new(m: usize, n_l: usize) -> Self {
        IndexMap { m, n_l }
    }

    pub fn num_labels(&self) -> usize {
        self.m
    }

    pub fn num_samples(&self) -> usize {
        self.n_l
    }

    pub fn len(&self) -> usize {
        self.m * self.n_l
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self, label: usize, sample: usize) -> usize {
        debug_assert!(label < self.m && sample < self.n_l);
        label * self.n_l + sample
    }

    pub fn unflatten(&self, k: usize) -> (usize, usize) {
        debug_assert!(k < self.len());
        (k / self.n_l, k % self.n_l)
    }
}

/// Per-view predictions on the labeled entries: P ∈ ℝ^{V×N} with N = m·n_l,
/// the vectorized ground truth y⁰ ∈ {−1,+1}^N, and the index bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    p: Array2<f64>,
    y0: Array1<f64>,
    index_map: IndexMap,
}

impl PredictionTensor {
    pub fn p(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn y0(&self) -> &Array1<f64> {
        &self.y0
    }

    pub fn index_map(&self) -> &IndexMap {
        &self.index_map
    }

    pub fn num_views(&self) -> usize {
        self.p.nrows()
    }

    pub fn len(&self) -> usize {
        self.p.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Prediction vector (one value per view) for flat index `k`.
    pub fn sample_column(&self, k: usize) -> ndarray::ArrayView1<'_, f64> {
        self.p.column(k)
    }
}

/// Flatten per-view m×n_l prediction matrices and the fully known labeled
/// truth into a [`PredictionTensor`], using the row-major index map.
pub fn vectorize_labeled(
    predictions_per_view: &[Array2<f64>],
    y0_labeled: &LabelMatrix,
) -> Result<PredictionTensor> {
    if predictions_per_view.is_empty() {
        return Err(Error::invalid("need at least one view of predictions"));
    }
    let m = y0_labeled.num_labels();
    let n_l = y0_labeled.num_samples();
    for (v, pred) in predictions_per_view.iter().enumerate() {
        if pred.dim() != (m, n_l) {
            return Err(Error::dim(format!(
                "view {v} predictions are {:?}, expected ({m}, {n_l})",
                pred.dim()
            )));
        }
    }
    let index_map = IndexMap::new(m, n_l);
    let n_total = index_map.len();

    let mut y0 = Array1::<f64>::zeros(n_total);
    for t in 0..m {
        for j in 0..n_l {
            let value = y0_labeled.get(t, j).value().ok_or_else(|| {
                Error::invalid(format!("labeled truth has unknown entry at ({t}, {j})"))
            })?;
            y0[index_map.flatten(t, j)] = value;
        }
    }

    let v_count = predictions_per_view.len();
    let mut p = Array2::<f64>::zeros((v_count, n_total));
    for (v, pred) in predictions_per_view.iter().enumerate() {
        for t in 0..m {
            for j in 0..n_l {
                p[(v, index_map.flatten(t, j))] = pred[(t, j)];
            }
        }
    }

    Ok(PredictionTensor { p, y0, index_map })
}

/// Nonnegative view-combination weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    theta: Array1<f64>,
}

impl SimplexWeights {
    /// Validate and wrap a weight vector. Entries may be negative by at most
    /// [`SIMPLEX_NEG_TOL`] (they are clamped to 0); the sum must be within
    /// [`SIMPLEX_SUM_TOL`] of 1.
    pub fn new(theta: Array1<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("simplex weights cannot be empty"));
        }
        if theta.iter().any(|&t| !t.is_finite()) {
            return Err(Error::invalid("simplex weights must be finite"));
        }
        if let Some(&t) = theta.iter().find(|&&t| t < -SIMPLEX_NEG_TOL) {
            return Err(Error::invalid(format!("negative simplex weight {t}")));
        }
        let sum: f64 = theta.sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::invalid(format!("simplex weights sum to {sum}, not 1")));
        }
        Ok(SimplexWeights {
            theta: theta.mapv(|t| t.max(0.0)),
        })
    }

    /// Uniform weights 1/V.
    pub fn uniform(v: usize) -> Self {
        assert!(v > 0, "cannot build weights over zero views");
        SimplexWeights {
            theta: Array1::from_elem(v, 1.0 / v as f64),
        }
    }

    /// All mass on one view.
    pub fn one_hot(v: usize, index: usize) -> Self {
        assert!(index < v, "one-hot index out of range");
        let mut theta = Array1::zeros(v);
        theta[index] = 1.0;
        SimplexWeights { theta }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Index of the largest weight (smallest index wins ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &t) in self.theta.iter().enumerate() {
            if t > self.theta[best] {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn build_stacked_places_blocks_and_masks() {
        // m=1, d=1, n=2; one known label, all features known.
        let x = FeatureMatrix::dense(array![[2.0, 3.0]]);
        let mut y = LabelMatrix::unknown(1, 2);
        y.set(0, 0, Label::Pos);
        let sys = build_stacked(&x, &y).expect("valid stack");

        assert_eq!(sys.z0.matrix(), &array![[1.0, 0.0], [2.0, 3.0], [1.0, 1.0]]);
        assert_eq!(sys.omega_y.iter().collect::<Vec<_>>(), vec![(0, 0)]);
        assert_eq!(sys.omega_x.iter().collect::<Vec<_>>(), vec![(1, 0), (1, 1)]);
    }

    #[test]
    fn build_stacked_all_labels_unknown() {
        let x = FeatureMatrix::dense(array![[2.0, 3.0]]);
        let y = LabelMatrix::unknown(2, 2);
        let sys = build_stacked(&x, &y).expect("valid stack");
        assert!(sys.omega_y.is_empty(), "no labels known");
        assert_eq!(sys.z0.label_rows(), array![[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn build_stacked_rejects_zero_samples() {
        let x = FeatureMatrix::dense(Array2::zeros((1, 0)));
        let y = LabelMatrix::unknown(1, 0);
        assert!(matches!(
            build_stacked(&x, &y),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn build_stacked_rejects_sample_count_mismatch() {
        let x = FeatureMatrix::dense(array![[2.0, 3.0]]);
        let y = LabelMatrix::unknown(1, 3);
        assert!(matches!(
            build_stacked(&x, &y),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn build_stacked_excludes_missing_features() {
        let values = array![[2.0, 99.0], [4.0, 5.0]];
        let missing = array![[false, true], [false, false]];
        let x = FeatureMatrix::with_missing(values, missing).unwrap();
        let y = LabelMatrix::unknown(1, 2);
        let sys = build_stacked(&x, &y).unwrap();
        assert_eq!(
            sys.omega_x.iter().collect::<Vec<_>>(),
            vec![(1, 0), (2, 0), (2, 1)]
        );
        // The missing cell is initialized to zero, not to its masked value.
        assert_eq!(sys.z0.matrix()[(1, 1)], 0.0);
    }

    #[test]
    fn stacked_round_trip_recovers_known_entries() {
        let values = array![[0.5, -1.25], [3.0, 0.0]];
        let x = FeatureMatrix::dense(values.clone());
        let mut y = LabelMatrix::unknown(2, 2);
        y.set(0, 1, Label::Neg);
        y.set(1, 0, Label::Pos);
        let sys = build_stacked(&x, &y).unwrap();

        assert_eq!(sys.z0.feature_rows(), values);
        for (t, j, v) in y.known_entries() {
            assert_eq!(sys.z0.label_rows()[(t, j)], v);
            assert!(sys.omega_y.contains(t, j));
        }
    }

    #[test]
    fn vectorize_flattens_row_major() {
        let pred = array![[0.3], [-0.2]];
        let mut y = LabelMatrix::unknown(2, 1);
        y.set(0, 0, Label::Pos);
        y.set(1, 0, Label::Neg);
        let tensor = vectorize_labeled(&[pred], &y).unwrap();
        assert_eq!(tensor.p(), &array![[0.3, -0.2]]);
        assert_eq!(tensor.y0(), &array![1.0, -1.0]);
    }

    #[test]
    fn vectorize_duplicates_identical_views() {
        let pred = array![[0.3, 0.1], [-0.2, 0.4]];
        let y = LabelMatrix::from_signs(&array![[1.0, 1.0], [-1.0, 1.0]]);
        let tensor = vectorize_labeled(&[pred.clone(), pred], &y).unwrap();
        assert_eq!(tensor.p().row(0), tensor.p().row(1));
        assert_eq!(tensor.num_views(), 2);
        assert_eq!(tensor.len(), 4);
    }

    #[test]
    fn vectorize_rejects_mismatched_views() {
        let y = LabelMatrix::from_signs(&array![[1.0, -1.0]]);
        let good = Array2::zeros((1, 2));
        let bad = Array2::zeros((2, 2));
        assert!(matches!(
            vectorize_labeled(&[good, bad], &y),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn vectorize_rejects_unknown_truth() {
        let y = LabelMatrix::unknown(1, 2);
        let pred = Array2::zeros((1, 2));
        assert!(matches!(
            vectorize_labeled(&[pred], &y),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn index_map_is_a_bijection() {
        let map = IndexMap::new(3, 4);
        let mut seen = vec![false; map.len()];
        for t in 0..3 {
            for j in 0..4 {
                let k = map.flatten(t, j);
                assert!(!seen[k], "flat index {k} hit twice");
                seen[k] = true;
                assert_eq!(map.unflatten(k), (t, j));
            }
        }
        assert!(seen.iter().all(|&s| s), "index map must cover all N indices");
    }

    #[test]
    fn simplex_weights_validate() {
        assert!(SimplexWeights::new(array![0.5, 0.5]).is_ok());
        assert!(SimplexWeights::new(array![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(array![1.5, -0.5]).is_err());
        // A tiny negative within tolerance is clamped to zero.
        let w = SimplexWeights::new(array![1.0 + 1e-13, -1e-13]).unwrap();
        assert_eq!(w.values()[1], 0.0);
    }

    #[test]
    fn simplex_constructors() {
        let u = SimplexWeights::uniform(4);
        assert!(u.values().iter().all(|&t| (t - 0.25).abs() < 1e-15));
        let oh = SimplexWeights::one_hot(3, 2);
        assert_eq!(oh.values(), &array![0.0, 0.0, 1.0]);
        assert_eq!(oh.argmax(), 2);
    }

    #[test]
    fn dataset_enforces_partition_label_consistency() {
        let x = FeatureMatrix::dense(array![[1.0, 2.0]]);
        let mut y = LabelMatrix::unknown(1, 2);
        y.set(0, 0, Label::Pos);
        let roles = vec![SampleRole::Labeled, SampleRole::Test];
        let ds = MultiViewDataset::new(vec![x.clone()], y.clone(), roles, 7).unwrap();
        assert_eq!(ds.labeled_indices(), vec![0]);
        assert_eq!(ds.test_indices(), vec![1]);

        // A test sample with a known label is leakage and must be rejected.
        let bad_roles = vec![SampleRole::Test, SampleRole::Test];
        assert!(MultiViewDataset::new(vec![x], y, bad_roles, 7).is_err());
    }

    #[test]
    fn feature_matrix_missing_entries_are_hidden() {
        let values = array![[1.0, 2.0]];
        let missing = array![[false, true]];
        let fm = FeatureMatrix::with_missing(values, missing).unwrap();
        assert_eq!(fm.get(0, 0), Some(1.0));
        assert_eq!(fm.get(0, 1), None);
        assert!(fm.as_dense().is_err());
        assert!(fm.column_fully_observed(0));
        assert!(!fm.column_fully_observed(1));
    }

    #[test]
    fn label_matrix_column_queries() {
        let mut y = LabelMatrix::unknown(2, 2);
        y.set(0, 0, Label::Pos);
        y.set(1, 0, Label::Neg);
        assert!(y.column_fully_known(0));
        assert!(y.column_fully_unknown(1));
        let hidden = y.hide_columns(&[0]);
        assert_eq!(hidden.num_known(), 0);
        let selected = y.select_columns(&[0]);
        assert_eq!(selected.num_samples(), 1);
        assert_eq!(selected.get(0, 0), Label::Pos);
    }
}
