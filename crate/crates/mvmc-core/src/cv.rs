//! Two-fold cross-validated prediction generation on the labeled set: hide
//! one half's labels, complete them from the other half, and vice versa.
//! The assembled per-view predictions feed the fusion-weight solvers.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mc::{fpc_solve, McParams};
use crate::preprocess::sigmoid_scores;
use crate::types::{build_stacked, Label, MultiViewDataset, PredictionTensor, vectorize_labeled};

/// A two-fold partition of the labeled samples (global sample indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    fold_a: Vec<usize>,
    fold_b: Vec<usize>,
    seed: u64,
}

impl FoldSplit {
    pub fn fold_a(&self) -> &[usize] {
        &self.fold_a
    }

    pub fn fold_b(&self) -> &[usize] {
        &self.fold_b
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Split the labeled samples into two folds of near-equal size with a
/// deterministic seeded shuffle, assigning samples of the rarest labels
/// first so that each fold keeps positives of every label where feasible.
pub fn make_split(dataset: &MultiViewDataset, seed: u64) -> Result<FoldSplit> {
    let labeled = dataset.labeled_indices();
    let n_l = labeled.len();
    if n_l < 2 {
        return Err(Error::invalid(format!(
            "two-fold split needs at least 2 labeled samples, found {n_l}"
        )));
    }
    let m = dataset.num_labels();
    let labels = dataset.labels();

    // Positive counts per label over the labeled set.
    let mut pos_count = vec![0usize; m];
    for &j in &labeled {
        for (t, count) in pos_count.iter_mut().enumerate() {
            if labels.get(t, j) == Label::Pos {
                *count += 1;
            }
        }
    }

    // Each sample's rarest positive label, if any (ties: smaller label index).
    let rarest_label = |j: usize| -> Option<usize> {
        (0..m)
            .filter(|&t| labels.get(t, j) == Label::Pos)
            .min_by_key(|&t| (pos_count[t], t))
    };

    let mut order = labeled.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    // Stable sort: samples carrying the globally rarest labels come first,
    // the shuffled order decides within equal rarity.
    order.sort_by_key(|&j| rarest_label(j).map_or(usize::MAX, |t| pos_count[t]));

    let cap_a = n_l.div_ceil(2);
    let cap_b = n_l - cap_a;
    let mut fold_a: Vec<usize> = Vec::with_capacity(cap_a);
    let mut fold_b: Vec<usize> = Vec::with_capacity(cap_b);
    let mut pos_a = vec![0usize; m];
    let mut pos_b = vec![0usize; m];

    for j in order {
        let prefer_a = match rarest_label(j) {
            Some(t) => (pos_a[t], fold_a.len()) <= (pos_b[t], fold_b.len()),
            None => fold_a.len() <= fold_b.len(),
        };
        let into_a = if prefer_a {
            fold_a.len() < cap_a
        } else {
            fold_b.len() >= cap_b
        };
        let (fold, pos) = if into_a {
            (&mut fold_a, &mut pos_a)
        } else {
            (&mut fold_b, &mut pos_b)
        };
        fold.push(j);
        for (t, count) in pos.iter_mut().enumerate() {
            if labels.get(t, j) == Label::Pos {
                *count += 1;
            }
        }
    }

    fold_a.sort_unstable();
    fold_b.sort_unstable();
    Ok(FoldSplit {
        fold_a,
        fold_b,
        seed,
    })
}

/// Cross-validated soft-label predictions of one view on the labeled set:
/// run the completion solver twice on the labeled columns — once per hidden
/// fold — and assemble the hidden halves into one m×n_l matrix. Columns
/// follow the ascending order of the labeled sample indices.
pub fn generate_view_predictions(
    view_index: usize,
    dataset: &MultiViewDataset,
    split: &FoldSplit,
    mc_params: &McParams,
) -> Result<Array2<f64>> {
    let labeled = dataset.labeled_indices();
    let n_l = labeled.len();
    let m = dataset.num_labels();
    let local_of = |global: usize| -> usize {
        labeled
            .binary_search(&global)
            .expect("fold indices come from the labeled set")
    };

    let x_l = dataset.view(view_index).select_columns(&labeled);
    let y_l = dataset.labels().select_columns(&labeled);

    let mut out = Array2::<f64>::zeros((m, n_l));
    for (fold, name) in [(&split.fold_a, "a"), (&split.fold_b, "b")] {
        let hidden_local: Vec<usize> = fold.iter().map(|&g| local_of(g)).collect();
        let y_hidden = y_l.hide_columns(&hidden_local);
        let sys = build_stacked(&x_l, &y_hidden).map_err(|e| {
            Error::solver(format!("cv stacking failed on view {view_index}: {e}"))
        })?;
        // No hidden entry may be observed by the solver.
        debug_assert!(hidden_local
            .iter()
            .all(|&j| (0..m).all(|t| !sys.omega_y.contains(t, j))));
        let sol = fpc_solve(&sys, mc_params).map_err(|e| {
            Error::solver(format!(
                "cv completion failed on view {view_index}, fold {name}: {e}"
            ))
        })?;
        for &j in &hidden_local {
            for t in 0..m {
                out[(t, j)] = sol.soft_labels[(t, j)];
            }
        }
    }
    Ok(out)
}

/// Convert per-view soft-label predictions to probabilities and flatten them
/// into the prediction tensor used by the fusion solvers.
pub fn assemble_tensor(
    dataset: &MultiViewDataset,
    per_view_predictions: &[Array2<f64>],
) -> Result<PredictionTensor> {
    let labeled = dataset.labeled_indices();
    let y0_l = dataset.labels().select_columns(&labeled);
    let sigmoided: Vec<Array2<f64>> = per_view_predictions.iter().map(sigmoid_scores).collect();
    vectorize_labeled(&sigmoided, &y0_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{average_precision, LabelScores};
    use crate::types::{FeatureMatrix, LabelMatrix, SampleRole};
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_distr::StandardNormal;

    fn all_labeled_dataset(
        views: Vec<FeatureMatrix>,
        labels: LabelMatrix,
        seed: u64,
    ) -> MultiViewDataset {
        let n = labels.num_samples();
        MultiViewDataset::new(views, labels, vec![SampleRole::Labeled; n], seed).unwrap()
    }

    fn random_pm1_labels(m: usize, n: usize, p_pos: f64, rng: &mut ChaCha8Rng) -> LabelMatrix {
        let signs = Array2::from_shape_fn((m, n), |_| {
            if rng.random_bool(p_pos) {
                1.0
            } else {
                -1.0
            }
        });
        LabelMatrix::from_signs(&signs)
    }

    #[test]
    fn split_sizes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n_l in [4usize, 5] {
            let x = FeatureMatrix::dense(Array2::from_shape_fn((2, n_l), |_| {
                rng.sample(StandardNormal)
            }));
            let y = random_pm1_labels(2, n_l, 0.5, &mut rng);
            let ds = all_labeled_dataset(vec![x], y, 0);
            let split = make_split(&ds, 9).unwrap();
            assert_eq!(split.fold_a().len(), n_l.div_ceil(2));
            assert_eq!(split.fold_b().len(), n_l / 2);
            let mut joined: Vec<usize> = split
                .fold_a()
                .iter()
                .chain(split.fold_b())
                .copied()
                .collect();
            joined.sort_unstable();
            assert_eq!(joined, (0..n_l).collect::<Vec<_>>());
            assert_eq!(split, make_split(&ds, 9).unwrap(), "same seed, same split");
        }
    }

    #[test]
    fn split_rejects_tiny_labeled_sets() {
        let x = FeatureMatrix::dense(Array2::zeros((1, 1)));
        let y = LabelMatrix::from_signs(&Array2::from_elem((1, 1), 1.0));
        let ds = all_labeled_dataset(vec![x], y, 0);
        assert!(make_split(&ds, 0).is_err());
    }

    #[test]
    fn split_stratifies_rare_labels() {
        // Label 0 has exactly two positives among six samples; each fold
        // must receive one of them.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = FeatureMatrix::dense(Array2::from_shape_fn((2, 6), |_| {
            rng.sample(StandardNormal)
        }));
        let mut signs = Array2::from_elem((2, 6), -1.0);
        signs[(0, 1)] = 1.0;
        signs[(0, 4)] = 1.0;
        for j in 0..6 {
            signs[(1, j)] = if j % 2 == 0 { 1.0 } else { -1.0 };
        }
        let y = LabelMatrix::from_signs(&signs);
        let ds = all_labeled_dataset(vec![x], y, 0);
        for seed in 0..20 {
            let split = make_split(&ds, seed).unwrap();
            let in_a = split.fold_a().iter().filter(|&&j| j == 1 || j == 4).count();
            assert_eq!(in_a, 1, "seed {seed}: rare positives must split 1/1");
        }
    }

    #[test]
    fn consistent_view_predicts_hidden_labels() {
        // The single feature row equals the ±1 label row, so the stacked
        // matrix is rank-2 consistent and hidden labels are recoverable.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 12;
        let y = random_pm1_labels(1, n, 0.5, &mut rng);
        let mut feat = Array2::<f64>::zeros((1, n));
        for j in 0..n {
            feat[(0, j)] = y.get(0, j).value().unwrap();
        }
        let ds = all_labeled_dataset(vec![FeatureMatrix::dense(feat)], y.clone(), 0);
        let split = make_split(&ds, 3).unwrap();
        let pred = generate_view_predictions(0, &ds, &split, &McParams::default()).unwrap();

        let correct = (0..n)
            .filter(|&j| pred[(0, j)] * y.get(0, j).value().unwrap() > 0.0)
            .count();
        assert!(
            correct as f64 / n as f64 >= 0.95,
            "only {correct}/{n} hidden signs recovered"
        );
    }

    #[test]
    fn pure_noise_view_scores_at_the_random_baseline() {
        // AP of predictions from a label-independent view should sit at the
        // Monte-Carlo baseline of random rankings.
        let n = 30;
        let m_labels = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let y = random_pm1_labels(m_labels, n, 0.4, &mut rng);
        let truth: Vec<bool> = (0..n).map(|j| y.get(0, j) == Label::Pos).collect();

        let mut observed = Vec::new();
        for seed in 0..5u64 {
            let mut vrng = ChaCha8Rng::seed_from_u64(100 + seed);
            let feat = Array2::from_shape_fn((4, n), |_| vrng.sample(StandardNormal));
            let ds = all_labeled_dataset(vec![FeatureMatrix::dense(feat)], y.clone(), 0);
            let split = make_split(&ds, seed).unwrap();
            let pred = generate_view_predictions(0, &ds, &split, &McParams::default()).unwrap();
            let ls = LabelScores::from_parts(pred.row(0).to_vec(), truth.clone()).unwrap();
            observed.push(average_precision(&ls).unwrap());
        }
        let observed_mean = observed.iter().sum::<f64>() / observed.len() as f64;

        // Monte-Carlo oracle: AP of uniformly random score vectors.
        let mut mc = ChaCha8Rng::seed_from_u64(999);
        let draws: Vec<f64> = (0..2000)
            .map(|_| {
                let scores: Vec<f64> = (0..n).map(|_| mc.random::<f64>()).collect();
                let ls = LabelScores::from_parts(scores, truth.clone()).unwrap();
                average_precision(&ls).unwrap()
            })
            .collect();
        let mc_mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let mc_var =
            draws.iter().map(|a| (a - mc_mean) * (a - mc_mean)).sum::<f64>() / draws.len() as f64;
        // The observed mean of 5 seeds should fall within four standard
        // errors of the random-ranking mean.
        let bound = 4.0 * (mc_var / 5.0).sqrt();
        assert!(
            (observed_mean - mc_mean).abs() <= bound,
            "noise-view AP {observed_mean:.4} departs from random baseline {mc_mean:.4} ± {bound:.4}"
        );
    }

    #[test]
    fn minimal_two_sample_case() {
        let x = FeatureMatrix::dense(Array2::from_shape_vec((1, 2), vec![1.0, -1.0]).unwrap());
        let y = LabelMatrix::from_signs(&Array2::from_shape_vec((1, 2), vec![1.0, -1.0]).unwrap());
        let ds = all_labeled_dataset(vec![x], y, 0);
        let split = make_split(&ds, 0).unwrap();
        let pred = generate_view_predictions(0, &ds, &split, &McParams::default()).unwrap();
        assert_eq!(pred.dim(), (1, 2));
        assert!(pred.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn assemble_applies_sigmoid_and_duplicates_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 6;
        let y = random_pm1_labels(2, n, 0.5, &mut rng);
        let x = FeatureMatrix::dense(Array2::from_shape_fn((3, n), |_| {
            rng.sample(StandardNormal)
        }));
        let ds = all_labeled_dataset(vec![x.clone(), x], y, 0);
        let raw = Array2::from_shape_fn((2, n), |_| rng.sample::<f64, _>(StandardNormal));
        let tensor = assemble_tensor(&ds, &[raw.clone(), raw.clone()]).unwrap();

        assert_eq!(tensor.p().row(0), tensor.p().row(1));
        assert!(tensor.p().iter().all(|&p| p > 0.0 && p < 1.0));
        // The index map inverts back to the original (label, sample) layout.
        let map = *tensor.index_map();
        for t in 0..2 {
            for j in 0..n {
                let k = map.flatten(t, j);
                assert_eq!(map.unflatten(k), (t, j));
                let expected = 1.0 / (1.0 + (-raw[(t, j)]).exp());
                assert!((tensor.p()[(0, k)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn predictions_ignore_the_hidden_fold_labels() {
        // Flipping a fold-a label must not change fold-a predictions: they
        // are produced by the run that hides fold a entirely. A fixed split
        // keeps the comparison exact.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 10;
        let y = random_pm1_labels(2, n, 0.5, &mut rng);
        let x = FeatureMatrix::dense(Array2::from_shape_fn((4, n), |_| {
            rng.sample(StandardNormal)
        }));
        let split = FoldSplit {
            fold_a: vec![0, 2, 4, 6, 8],
            fold_b: vec![1, 3, 5, 7, 9],
            seed: 17,
        };
        let ds = all_labeled_dataset(vec![x.clone()], y.clone(), 0);
        let pred = generate_view_predictions(0, &ds, &split, &McParams::default()).unwrap();

        let flip_at = split.fold_a()[0];
        let mut y_flipped = y.clone();
        let old = y_flipped.get(0, flip_at);
        y_flipped.set(
            0,
            flip_at,
            if old == Label::Pos { Label::Neg } else { Label::Pos },
        );
        let ds_flipped = all_labeled_dataset(vec![x], y_flipped, 0);
        let pred_flipped =
            generate_view_predictions(0, &ds_flipped, &split, &McParams::default()).unwrap();
        for &g in split.fold_a() {
            for t in 0..2 {
                assert_eq!(
                    pred[(t, g)],
                    pred_flipped[(t, g)],
                    "fold-a prediction depended on a hidden fold-a label"
                );
            }
        }
        // The complementary run does observe the flipped entry, so at least
        // one fold-b prediction must move.
        assert!(
            split
                .fold_b()
                .iter()
                .any(|&g| (0..2).any(|t| pred[(t, g)] != pred_flipped[(t, g)])),
            "flipping an observed label left every dependent prediction unchanged"
        );
    }
}
