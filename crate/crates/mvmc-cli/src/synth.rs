//! Synthetic multi-view dataset generation.
//!
//! Construction: latent factors of a chosen rank drive both the labels and
//! every view. The ±1 label rows are embedded directly into the latent
//! matrix, so a fully informative view carries the labels in its row space —
//! a linear rule on its features predicts every label exactly. A view with
//! informativeness ρ mixes the latent signal with independent Gaussian
//! noise: `X_v = ρ·(A_v U)/√rank + (1−ρ)·σ·E_v`. At ρ = 0 the view is pure
//! noise, independent of the labels.
//!
//! Everything is drawn from one seeded ChaCha8 stream in a fixed order, so
//! a spec maps to exactly one dataset.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use mvmc_core::{FeatureMatrix, Label, LabelMatrix};

/// Lowest / highest admissible per-label positive rate; each label draws its
/// rate uniformly from this range.
const POSITIVE_RATE_RANGE: (f64, f64) = (0.2, 0.45);

fn default_noise_sigma() -> f64 {
    1.0
}
fn default_test_fraction() -> f64 {
    0.5
}

/// Generator settings for one synthetic dataset.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Number of feature views V.
    pub views: usize,
    /// Number of samples n.
    pub samples: usize,
    /// Number of labels m.
    pub labels: usize,
    /// Latent rank; must exceed `labels` (the label rows are part of the
    /// latent factors) and stay within the sample count. View v gets
    /// `rank + v` features.
    pub rank: usize,
    /// Noise scale σ.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    /// Per-view informativeness ρ_v ∈ [0, 1]; length V.
    pub informativeness: Vec<f64>,
    /// Probability of each feature cell being masked as missing.
    #[serde(default)]
    pub missing_feature_rate: f64,
    /// Fraction of samples assigned the test role.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Generator seed.
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.views == 0 {
            return Err("synthetic.views must be at least 1".into());
        }
        if self.labels == 0 {
            return Err("synthetic.labels must be at least 1".into());
        }
        if self.samples < 8 {
            return Err(format!(
                "synthetic.samples must be at least 8, got {}",
                self.samples
            ));
        }
        if self.rank <= self.labels {
            return Err(format!(
                "synthetic.rank ({}) must exceed synthetic.labels ({}) so the \
                 label rows embed into the latent factors",
                self.rank, self.labels
            ));
        }
        if self.rank > self.samples {
            return Err(format!(
                "synthetic.rank ({}) must not exceed synthetic.samples ({})",
                self.rank, self.samples
            ));
        }
        if self.informativeness.len() != self.views {
            return Err(format!(
                "synthetic.informativeness has {} entries but views = {}",
                self.informativeness.len(),
                self.views
            ));
        }
        for (v, &rho) in self.informativeness.iter().enumerate() {
            if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
                return Err(format!(
                    "synthetic.informativeness[{v}] must lie in [0, 1], got {rho}"
                ));
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(format!(
                "synthetic.noise_sigma must be finite and nonnegative, got {}",
                self.noise_sigma
            ));
        }
        if self.noise_sigma == 0.0 {
            if let Some(v) = self.informativeness.iter().position(|&rho| rho == 0.0) {
                return Err(format!(
                    "view {v} has informativeness 0 and noise_sigma is 0; \
                     the view would be identically zero"
                ));
            }
        }
        if !(0.0..1.0).contains(&self.missing_feature_rate) {
            return Err(format!(
                "synthetic.missing_feature_rate must lie in [0, 1), got {}",
                self.missing_feature_rate
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(format!(
                "synthetic.test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            ));
        }
        let n_test = self.num_test();
        if n_test < 2 || self.samples - n_test < 2 {
            return Err(format!(
                "test_fraction {} leaves too few test or training samples",
                self.test_fraction
            ));
        }
        Ok(())
    }

    fn num_test(&self) -> usize {
        ((self.samples as f64 * self.test_fraction).round() as usize)
            .clamp(2, self.samples.saturating_sub(2))
    }
}

/// A generated dataset before any labeled/unlabeled assignment: full
/// feature views, complete truth, a fixed test subset, and the latent
/// factors that produced them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub views: Vec<FeatureMatrix>,
    pub truth: LabelMatrix,
    /// Sorted test sample indices (fixed across labeled redraws).
    pub test: Vec<usize>,
    /// rank×n latent factors; the first m rows are the ±1 label values.
    pub latents: Array2<f64>,
}

/// Generate the dataset a spec describes.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, String> {
    spec.validate()?;
    let (v, n, m, rank) = (spec.views, spec.samples, spec.labels, spec.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // 1. Pre-latent factors.
    let mut latents = Array2::zeros((rank, n));
    for f in 0..rank {
        for j in 0..n {
            latents[(f, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }

    // 2. Label readout: top round(rate·n) samples of each linear readout
    //    become the positives, so every label has both classes.
    let mut readout = Array2::zeros((m, rank));
    for t in 0..m {
        for f in 0..rank {
            readout[(t, f)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let rates: Vec<f64> = (0..m)
        .map(|_| rng.random_range(POSITIVE_RATE_RANGE.0..POSITIVE_RATE_RANGE.1))
        .collect();
    let raw = readout.dot(&latents);
    let mut truth_signs = Array2::from_elem((m, n), -1.0);
    for t in 0..m {
        let k = ((rates[t] * n as f64).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            raw[(t, b)]
                .partial_cmp(&raw[(t, a)])
                .expect("finite readout")
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            truth_signs[(t, j)] = 1.0;
        }
    }
    let truth = LabelMatrix::from_signs(&truth_signs);

    // 3. Embed the labels into the latent factors so informative views
    //    carry them linearly.
    for t in 0..m {
        for j in 0..n {
            latents[(t, j)] = truth_signs[(t, j)];
        }
    }

    // 4. Views: mixing of latent signal and independent noise, plus an
    //    optional missing-value mask. View v has rank + v features.
    let scale = (rank as f64).sqrt();
    let mut views = Vec::with_capacity(v);
    for view in 0..v {
        let d = rank + view;
        let rho = spec.informativeness[view];
        let mut mixing = Array2::zeros((d, rank));
        for f in 0..d {
            for k in 0..rank {
                mixing[(f, k)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let signal = mixing.dot(&latents) / scale;
        let mut values = Array2::zeros((d, n));
        for f in 0..d {
            for j in 0..n {
                let noise: f64 = rng.sample(StandardNormal);
                values[(f, j)] = rho * signal[(f, j)] + (1.0 - rho) * spec.noise_sigma * noise;
            }
        }
        let matrix = if spec.missing_feature_rate > 0.0 {
            let mut missing = Array2::from_elem((d, n), false);
            for f in 0..d {
                for j in 0..n {
                    missing[(f, j)] = rng.random_bool(spec.missing_feature_rate);
                }
            }
            FeatureMatrix::with_missing(values, missing).map_err(|e| e.to_string())?
        } else {
            FeatureMatrix::dense(values)
        };
        views.push(matrix);
    }

    // 5. Fixed test subset.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut test: Vec<usize> = order.into_iter().take(spec.num_test()).collect();
    test.sort_unstable();

    Ok(SyntheticData {
        views,
        truth,
        test,
        latents,
    })
}

/// Draw a labeled subset: for each label, `n_per_class` positive samples
/// from the non-test pool (all of them if fewer exist); the union over
/// labels is the labeled set.
pub fn draw_labeled(
    truth: &LabelMatrix,
    test: &[usize],
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<usize>, String> {
    if n_per_class == 0 {
        return Err("n_labeled_per_class must be at least 1".into());
    }
    let n = truth.num_samples();
    let is_test: Vec<bool> = {
        let mut flags = vec![false; n];
        for &j in test {
            if j >= n {
                return Err(format!("test index {j} out of range"));
            }
            flags[j] = true;
        }
        flags
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c61_6265_6c65_64); // "labeled"
    let mut labeled = std::collections::BTreeSet::new();
    for t in 0..truth.num_labels() {
        let mut positives: Vec<usize> = (0..n)
            .filter(|&j| !is_test[j] && truth.get(t, j) == Label::Pos)
            .collect();
        if positives.is_empty() {
            log::warn!("label {t} has no positive non-test samples; skipping its quota");
            continue;
        }
        positives.shuffle(&mut rng);
        for &j in positives.iter().take(n_per_class) {
            labeled.insert(j);
        }
    }
    if labeled.len() < 2 {
        return Err(format!(
            "labeled draw produced only {} samples; need at least 2",
            labeled.len()
        ));
    }
    Ok(labeled.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvmc_core::{auc, LabelScores};
    use ndarray::Array1;
    use ndarray_linalg::LeastSquaresSvd;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec {
            views: 2,
            samples: 120,
            labels: 3,
            rank: 6,
            noise_sigma: 1.0,
            informativeness: vec![1.0, 0.0],
            missing_feature_rate: 0.0,
            test_fraction: 0.5,
            seed: 5,
        }
    }

    /// Dense d×n view as an (n×d, n) least-squares system for one label.
    fn design(view: &FeatureMatrix, cols: &[usize]) -> Array2<f64> {
        let d = view.feature_dim();
        let mut a = Array2::zeros((cols.len(), d + 1));
        for (r, &j) in cols.iter().enumerate() {
            for f in 0..d {
                a[(r, f)] = view.get(f, j).unwrap();
            }
            a[(r, d)] = 1.0; // intercept
        }
        a
    }

    fn label_values(truth: &LabelMatrix, t: usize, cols: &[usize]) -> Array1<f64> {
        Array1::from_iter(cols.iter().map(|&j| truth.get(t, j).value().unwrap()))
    }

    #[test]
    fn fully_informative_view_predicts_labels_linearly() {
        let data = generate_synthetic(&base_spec()).unwrap();
        let all: Vec<usize> = (0..120).collect();
        let a = design(&data.views[0], &all);
        for t in 0..3 {
            let y = label_values(&data.truth, t, &all);
            let fit = a.least_squares(&y).unwrap();
            let residual = (a.dot(&fit.solution) - &y)
                .iter()
                .fold(0.0f64, |acc, r| acc.max(r.abs()));
            assert!(
                residual < 1e-8,
                "label {t}: linear fit residual {residual} on the informative view"
            );
        }
    }

    #[test]
    fn uninformative_view_scores_at_chance() {
        // Fit a linear scorer on half the samples of the noise view and
        // measure AUC on the other half: chance level across 5 seeds.
        let mut aucs = Vec::new();
        for seed in 0..5 {
            let spec = SyntheticSpec {
                seed,
                ..base_spec()
            };
            let data = generate_synthetic(&spec).unwrap();
            let fit_cols: Vec<usize> = (0..60).collect();
            let eval_cols: Vec<usize> = (60..120).collect();
            let a_fit = design(&data.views[1], &fit_cols);
            let a_eval = design(&data.views[1], &eval_cols);
            for t in 0..3 {
                let y_fit = label_values(&data.truth, t, &fit_cols);
                let fit = a_fit.least_squares(&y_fit).unwrap();
                let scores = a_eval.dot(&fit.solution);
                let positive: Vec<bool> = eval_cols
                    .iter()
                    .map(|&j| data.truth.get(t, j) == Label::Pos)
                    .collect();
                let ls = LabelScores::from_parts(scores.to_vec(), positive).unwrap();
                aucs.push(auc(&ls).unwrap());
            }
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        assert!(
            (mean - 0.5).abs() < 0.05,
            "noise view mean AUC {mean} deviates from chance"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&base_spec()).unwrap();
        let b = generate_synthetic(&base_spec()).unwrap();
        assert_eq!(a.latents, b.latents);
        assert_eq!(a.test, b.test);
        for (va, vb) in a.views.iter().zip(&b.views) {
            for f in 0..va.feature_dim() {
                for j in 0..va.num_samples() {
                    assert_eq!(va.get(f, j), vb.get(f, j));
                }
            }
        }
        for t in 0..3 {
            for j in 0..120 {
                assert_eq!(a.truth.get(t, j), b.truth.get(t, j));
            }
        }
    }

    #[test]
    fn positive_rates_stay_in_range() {
        let data = generate_synthetic(&base_spec()).unwrap();
        for t in 0..3 {
            let positives = (0..120)
                .filter(|&j| data.truth.get(t, j) == Label::Pos)
                .count();
            let rate = positives as f64 / 120.0;
            assert!(
                (0.15..=0.5).contains(&rate),
                "label {t}: positive rate {rate}"
            );
        }
    }

    #[test]
    fn missing_rate_produces_missing_cells() {
        let spec = SyntheticSpec {
            missing_feature_rate: 0.3,
            ..base_spec()
        };
        let data = generate_synthetic(&spec).unwrap();
        let view = &data.views[0];
        let total = view.feature_dim() * view.num_samples();
        let missing = (0..view.feature_dim())
            .flat_map(|f| (0..view.num_samples()).map(move |j| (f, j)))
            .filter(|&(f, j)| view.get(f, j).is_none())
            .count();
        let rate = missing as f64 / total as f64;
        assert!((0.2..0.4).contains(&rate), "observed missing rate {rate}");
    }

    #[test]
    fn spec_validation_rejects_bad_settings() {
        let mut spec = base_spec();
        spec.rank = 3; // not above labels
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.informativeness = vec![0.5];
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.informativeness = vec![1.5, 0.0];
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.noise_sigma = 0.0; // view 1 has informativeness 0
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.test_fraction = 1.0;
        assert!(spec.validate().is_err());

        let mut spec = base_spec();
        spec.missing_feature_rate = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn labeled_draw_is_seeded_and_respects_the_test_set() {
        let data = generate_synthetic(&base_spec()).unwrap();
        let a = draw_labeled(&data.truth, &data.test, 5, 1).unwrap();
        let b = draw_labeled(&data.truth, &data.test, 5, 1).unwrap();
        let c = draw_labeled(&data.truth, &data.test, 5, 2).unwrap();
        assert_eq!(a, b, "same seed, same draw");
        assert_ne!(a, c, "different seeds draw different labeled sets");
        for &j in &a {
            assert!(!data.test.contains(&j), "labeled sample {j} is a test sample");
        }
        // Every label keeps at least its quota of positives (the pool is
        // large enough here).
        for t in 0..3 {
            let count = a
                .iter()
                .filter(|&&j| data.truth.get(t, j) == Label::Pos)
                .count();
            assert!(count >= 5, "label {t}: only {count} labeled positives");
        }
    }
}
