//! Ranking-loss view fusion: learn simplex weights θ with a structural SVM
//! that optimizes average precision directly.
//!
//! For every label the training corpus induces pairwise orderings of its
//! positive and negative samples. The solver alternates between a
//! cutting-plane step — find the most violated ordering per label via greedy
//! interleaving, grow a working set, re-solve the dual QP over the ordering
//! multipliers α — and a closed-form step for the multipliers ζ of the
//! nonnegativity constraint on θ. The raw weight vector Σ α·δΨ + ζ is
//! normalized onto the simplex at the end.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::ranking_order;
use crate::types::{PredictionTensor, SimplexWeights};

/// Slack amount by which a candidate ordering must beat the current per-label
/// slack before it is added to the working set.
pub const DEFAULT_CP_TOL: f64 = 1e-3;
/// Cap on outer alternation rounds.
pub const DEFAULT_AP_MAX_OUTER: usize = 100;
/// Objective-improvement threshold of the inner α ascent.
const ALPHA_TOL: f64 = 1e-8;
const ALPHA_MAX_SWEEPS: usize = 10_000;
/// Outer loop stops once no constraint was added and the dual moved less
/// than this between rounds.
const DUAL_IMPROVEMENT_TOL: f64 = 1e-6;
/// Raw weights below this are clipped to zero before normalization.
const THETA_CLIP: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Corpus and orderings
// ---------------------------------------------------------------------------

/// One label's training corpus: the per-view predictions of every labeled
/// sample together with the sample's class. Construction requires both
/// classes to be present; single-class labels cannot express any
/// positive–negative ordering.
#[derive(Debug, Clone)]
pub struct LabelCorpus {
    label: usize,
    predictions: Array2<f64>,
    is_positive: Vec<bool>,
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl LabelCorpus {
    /// `predictions` is V×n (views by corpus samples); `signs` holds ±1 per
    /// sample.
    pub fn new(label: usize, predictions: Array2<f64>, signs: &[f64]) -> Result<Self> {
        let n = predictions.ncols();
        if signs.len() != n {
            return Err(Error::dim(format!(
                "label {label}: {} signs for {n} prediction columns",
                signs.len()
            )));
        }
        if predictions.nrows() == 0 || n == 0 {
            return Err(Error::invalid(format!("label {label}: empty corpus")));
        }
        if predictions.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "label {label}: non-finite prediction in corpus"
            )));
        }
        let mut is_positive = Vec::with_capacity(n);
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for (d, &s) in signs.iter().enumerate() {
            if s == 1.0 {
                is_positive.push(true);
                positives.push(d);
            } else if s == -1.0 {
                is_positive.push(false);
                negatives.push(d);
            } else {
                return Err(Error::invalid(format!(
                    "label {label}: sign must be ±1, got {s}"
                )));
            }
        }
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::invalid(format!(
                "label {label} is single-class and defines no orderings"
            )));
        }
        Ok(LabelCorpus {
            label,
            predictions,
            is_positive,
            positives,
            negatives,
        })
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn num_samples(&self) -> usize {
        self.is_positive.len()
    }

    pub fn num_views(&self) -> usize {
        self.predictions.nrows()
    }

    pub fn predictions(&self) -> &Array2<f64> {
        &self.predictions
    }

    pub fn positives(&self) -> &[usize] {
        &self.positives
    }

    pub fn negatives(&self) -> &[usize] {
        &self.negatives
    }

    pub fn is_positive(&self, sample: usize) -> bool {
        self.is_positive[sample]
    }

    /// Fused score θᵀp_d per corpus sample.
    pub fn fused_scores(&self, theta: &Array1<f64>) -> Vec<f64> {
        assert_eq!(theta.len(), self.num_views(), "weight/view count mismatch");
        self.predictions
            .columns()
            .into_iter()
            .map(|col| col.dot(theta))
            .collect()
    }

    /// The ground-truth ordering: every positive above every negative.
    pub fn truth_ordering(&self) -> PairwiseOrdering {
        let mut ranking = self.positives.clone();
        ranking.extend_from_slice(&self.negatives);
        PairwiseOrdering::from_ranking(ranking, self.num_samples()).expect("truth ranking is valid")
    }
}

/// Split a prediction tensor into per-label corpora. Labels whose corpus is
/// single-class cannot be trained on and are returned separately.
pub fn build_corpora(p: &PredictionTensor) -> (Vec<LabelCorpus>, Vec<usize>) {
    let map = p.index_map();
    let v = p.num_views();
    let n_l = map.num_samples();
    let mut corpora = Vec::new();
    let mut excluded = Vec::new();
    for t in 0..map.num_labels() {
        let mut pred = Array2::zeros((v, n_l));
        let mut signs = Vec::with_capacity(n_l);
        for j in 0..n_l {
            let k = map.flatten(t, j);
            pred.column_mut(j).assign(&p.sample_column(k));
            signs.push(p.y0()[k]);
        }
        match LabelCorpus::new(t, pred, &signs) {
            Ok(c) => corpora.push(c),
            Err(_) => excluded.push(t),
        }
    }
    (corpora, excluded)
}

/// A complete antisymmetric ordering of one label's corpus, stored compactly
/// as the ranking permutation it is consistent with: every
/// (positive, negative) pair carries the sign +1 when the positive is ranked
/// above the negative and −1 otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseOrdering {
    ranking: Vec<usize>,
    rank_of: Vec<usize>,
}

impl PairwiseOrdering {
    /// Build from an explicit ranking (best first) over samples `0..n`.
    pub fn from_ranking(ranking: Vec<usize>, n: usize) -> Result<Self> {
        if ranking.len() != n {
            return Err(Error::dim(format!(
                "ranking has {} entries for {n} samples",
                ranking.len()
            )));
        }
        let mut rank_of = vec![usize::MAX; n];
        for (r, &d) in ranking.iter().enumerate() {
            if d >= n {
                return Err(Error::invalid(format!("ranking entry {d} out of range")));
            }
            if rank_of[d] != usize::MAX {
                return Err(Error::invalid(format!("sample {d} appears twice in ranking")));
            }
            rank_of[d] = r;
        }
        Ok(PairwiseOrdering { ranking, rank_of })
    }

    /// Ordering induced by scores: descending, ties broken by ascending index.
    pub fn from_scores(scores: &[f64]) -> Self {
        let ranking = ranking_order(scores);
        let mut rank_of = vec![0; scores.len()];
        for (r, &d) in ranking.iter().enumerate() {
            rank_of[d] = r;
        }
        PairwiseOrdering { ranking, rank_of }
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    /// +1 when sample `i` is ranked above sample `j`, else −1.
    pub fn sign(&self, i: usize, j: usize) -> f64 {
        if self.rank_of[i] < self.rank_of[j] {
            1.0
        } else {
            -1.0
        }
    }
}

// ---------------------------------------------------------------------------
// Loss and feature map
// ---------------------------------------------------------------------------

/// Ranking loss of a candidate ordering: one minus the average precision of
/// the candidate's ranking against the corpus truth.
pub fn ap_loss(corpus: &LabelCorpus, candidate: &PairwiseOrdering) -> f64 {
    assert_eq!(candidate.len(), corpus.num_samples(), "ordering/corpus size mismatch");
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &d) in candidate.ranking.iter().enumerate() {
        if corpus.is_positive(d) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    1.0 - sum / corpus.positives.len() as f64
}

/// The combined feature map: the signed sum of per-pair prediction
/// differences, Ψ = (1/(P·Q)) Σ_{i∈pos} Σ_{j∈neg} o_ij (p_i − p_j),
/// evaluated through a per-sample counting identity rather than the literal
/// double loop.
pub fn psi(corpus: &LabelCorpus, ordering: &PairwiseOrdering) -> Array1<f64> {
    assert_eq!(ordering.len(), corpus.num_samples(), "ordering/corpus size mismatch");
    let p_count = corpus.positives.len() as f64;
    let q_count = corpus.negatives.len() as f64;
    // Walking the ranking top-down, a positive with a negatives above it
    // carries coefficient (Q − 2a); a negative with b positives above it
    // carries (P − 2b). Summing coefficient-weighted prediction columns
    // reproduces the pairwise sum exactly.
    let mut coef = vec![0.0; corpus.num_samples()];
    let mut pos_seen = 0.0;
    let mut neg_seen = 0.0;
    for &d in &ordering.ranking {
        if corpus.is_positive(d) {
            coef[d] = q_count - 2.0 * neg_seen;
            pos_seen += 1.0;
        } else {
            coef[d] = p_count - 2.0 * pos_seen;
            neg_seen += 1.0;
        }
    }
    let coef = Array1::from_vec(coef);
    corpus.predictions.dot(&coef) / (p_count * q_count)
}

// ---------------------------------------------------------------------------
// Loss-augmented inference
// ---------------------------------------------------------------------------

/// Find the ordering maximizing loss plus weighted feature score,
/// argmax_o [Δ(o_t, o) + θᵀΨ(o)], by greedy interleaving: sort positives and
/// negatives separately by descending fused score, then give each negative
/// its independently optimal insertion position among the positives.
///
/// Returns the ordering and its violation value
/// Δ(o) + θᵀΨ(o) − θᵀΨ(o_t), which is always ≥ 0 since the truth ordering
/// itself scores 0.
pub fn find_most_violated(
    corpus: &LabelCorpus,
    theta_eff: &Array1<f64>,
) -> (PairwiseOrdering, f64) {
    let scores = corpus.fused_scores(theta_eff);
    debug_assert!(scores.iter().all(|s| s.is_finite()), "non-finite fused score");
    let p_count = corpus.positives.len();
    let q_count = corpus.negatives.len();
    let pn = (p_count * q_count) as f64;

    let by_score_desc = |list: &[usize]| -> Vec<usize> {
        let mut sorted = list.to_vec();
        sorted.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        sorted
    };
    let pos_sorted = by_score_desc(&corpus.positives);
    let neg_sorted = by_score_desc(&corpus.negatives);

    // b[j] = number of positives ranked above the j-th negative. For the
    // j-th most confident negative, placing it above positives i..P changes
    // the objective by a suffix sum of per-positive terms; each negative's
    // argmax is independent and, with ties broken toward the highest
    // placement, non-decreasing in j.
    let mut b = vec![0usize; q_count];
    for (jj, &neg) in neg_sorted.iter().enumerate() {
        let j = (jj + 1) as f64;
        let mut best_i = p_count + 1;
        let mut best_delta = 0.0;
        let mut run = 0.0;
        for ii in (1..=p_count).rev() {
            let k = ii as f64;
            let loss_gain = (k / (k + j - 1.0) - k / (k + j)) / p_count as f64;
            let score_cost = -2.0 * (scores[pos_sorted[ii - 1]] - scores[neg]) / pn;
            run += loss_gain + score_cost;
            if run >= best_delta {
                best_delta = run;
                best_i = ii;
            }
        }
        b[jj] = best_i - 1;
        debug_assert!(
            jj == 0 || b[jj] >= b[jj - 1],
            "greedy insertion positions must be non-decreasing"
        );
    }

    let mut ranking = Vec::with_capacity(corpus.num_samples());
    for t in 0..=p_count {
        for (jj, &neg) in neg_sorted.iter().enumerate() {
            if b[jj] == t {
                ranking.push(neg);
            }
        }
        if t < p_count {
            ranking.push(pos_sorted[t]);
        }
    }
    let ordering = PairwiseOrdering::from_ranking(ranking, corpus.num_samples())
        .expect("greedy ranking is a permutation");

    // Recompute the violation from first principles instead of trusting the
    // accumulated per-negative gains.
    let loss = ap_loss(corpus, &ordering);
    let psi_cand = psi(corpus, &ordering);
    let psi_truth = psi(corpus, &corpus.truth_ordering());
    let violation = loss + theta_eff.dot(&psi_cand) - theta_eff.dot(&psi_truth);
    (ordering, violation)
}

// ---------------------------------------------------------------------------
// Working set and dual QP
// ---------------------------------------------------------------------------

/// One cutting-plane constraint: an ordering, its loss Δ, and the cached
/// feature gap δΨ = Ψ(o_t) − Ψ(o).
#[derive(Debug, Clone)]
pub struct Constraint {
    ordering: PairwiseOrdering,
    loss: f64,
    delta_psi: Array1<f64>,
}

impl Constraint {
    pub fn new(ordering: PairwiseOrdering, loss: f64, delta_psi: Array1<f64>) -> Self {
        Constraint {
            ordering,
            loss,
            delta_psi,
        }
    }

    /// Build the constraint for `ordering` against `corpus`'s truth.
    pub fn from_ordering(corpus: &LabelCorpus, ordering: PairwiseOrdering) -> Self {
        let loss = ap_loss(corpus, &ordering);
        let delta_psi = psi(corpus, &corpus.truth_ordering()) - psi(corpus, &ordering);
        Constraint {
            ordering,
            loss,
            delta_psi,
        }
    }

    pub fn ordering(&self) -> &PairwiseOrdering {
        &self.ordering
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn delta_psi(&self) -> &Array1<f64> {
        &self.delta_psi
    }
}

/// Per-label constraint lists with their dual variables α ≥ 0; each label's
/// multipliers satisfy Σ_o α ≤ C.
#[derive(Debug, Clone)]
pub struct WorkingSet {
    labels: Vec<usize>,
    num_views: usize,
    cap: f64,
    constraints: Vec<Vec<Constraint>>,
    alpha: Vec<Vec<f64>>,
}

impl WorkingSet {
    pub fn new(labels: Vec<usize>, num_views: usize, cap: f64) -> Self {
        let slots = labels.len();
        WorkingSet {
            labels,
            num_views,
            cap,
            constraints: vec![Vec::new(); slots],
            alpha: vec![Vec::new(); slots],
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn num_slots(&self) -> usize {
        self.labels.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.iter().map(|c| c.len()).sum()
    }

    pub fn constraints(&self, slot: usize) -> &[Constraint] {
        &self.constraints[slot]
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    pub fn contains(&self, slot: usize, ordering: &PairwiseOrdering) -> bool {
        self.constraints[slot]
            .iter()
            .any(|c| &c.ordering == ordering)
    }

    /// Append a constraint with a zero dual variable.
    pub fn add(&mut self, slot: usize, constraint: Constraint) {
        assert_eq!(
            constraint.delta_psi.len(),
            self.num_views,
            "feature-gap dimension mismatch"
        );
        self.constraints[slot].push(constraint);
        self.alpha[slot].push(0.0);
    }

    pub fn set_alpha(&mut self, alpha: Vec<Vec<f64>>) {
        assert_eq!(alpha.len(), self.constraints.len(), "slot count mismatch");
        for (slot, a) in alpha.iter().enumerate() {
            assert_eq!(
                a.len(),
                self.constraints[slot].len(),
                "constraint count mismatch in slot {slot}"
            );
            debug_assert!(
                a.iter().sum::<f64>() <= self.cap + 1e-9 && a.iter().all(|&x| x >= 0.0),
                "dual variables violate the per-label cap"
            );
        }
        self.alpha = alpha;
    }

    /// Σ α_to δΨ_t(o) over the whole working set.
    pub fn delta_psi_alpha(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.num_views);
        for (cons, al) in self.constraints.iter().zip(&self.alpha) {
            for (c, &a) in cons.iter().zip(al) {
                if a != 0.0 {
                    out.scaled_add(a, &c.delta_psi);
                }
            }
        }
        out
    }

    /// Current slack of one label: max(0, max_o Δ − θᵀδΨ).
    pub fn slack(&self, slot: usize, theta: &Array1<f64>) -> f64 {
        self.constraints[slot]
            .iter()
            .map(|c| c.loss - theta.dot(&c.delta_psi))
            .fold(0.0, f64::max)
    }

    /// Flattened constraint order: slot-major, insertion order within a slot.
    fn flat_slots(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_constraints());
        for (slot, cons) in self.constraints.iter().enumerate() {
            out.extend(std::iter::repeat(slot).take(cons.len()));
        }
        out
    }

    /// V×n matrix whose columns are the cached δΨ vectors, flattened order.
    pub fn delta_psi_matrix(&self) -> Array2<f64> {
        let n = self.num_constraints();
        let mut m = Array2::zeros((self.num_views, n));
        let mut idx = 0;
        for cons in &self.constraints {
            for c in cons {
                m.column_mut(idx).assign(&c.delta_psi);
                idx += 1;
            }
        }
        m
    }

    pub fn losses_flat(&self) -> Array1<f64> {
        Array1::from_iter(self.constraints.iter().flatten().map(|c| c.loss))
    }

    pub fn alpha_flat(&self) -> Array1<f64> {
        Array1::from_iter(self.alpha.iter().flatten().copied())
    }

    fn unflatten_alpha(&self, flat: &Array1<f64>) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.constraints.len());
        let mut idx = 0;
        for cons in &self.constraints {
            let mut a = Vec::with_capacity(cons.len());
            for _ in cons {
                a.push(flat[idx]);
                idx += 1;
            }
            out.push(a);
        }
        out
    }

    /// Re-derive every cached loss and feature gap from the corpora and
    /// check the dual cap; used to audit working sets in tests.
    pub fn validate(&self, corpora: &[LabelCorpus]) -> Result<()> {
        if corpora.len() != self.labels.len() {
            return Err(Error::dim("corpus/slot count mismatch".to_string()));
        }
        for (slot, corpus) in corpora.iter().enumerate() {
            let sum: f64 = self.alpha[slot].iter().sum();
            if sum > self.cap + 1e-9 {
                return Err(Error::invalid(format!(
                    "slot {slot}: dual mass {sum} exceeds cap {}",
                    self.cap
                )));
            }
            if self.alpha[slot].iter().any(|&a| a < 0.0) {
                return Err(Error::invalid(format!("slot {slot}: negative dual variable")));
            }
            let psi_truth = psi(corpus, &corpus.truth_ordering());
            for (k, c) in self.constraints[slot].iter().enumerate() {
                let fresh_loss = ap_loss(corpus, &c.ordering);
                if (fresh_loss - c.loss).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "slot {slot} constraint {k}: cached loss {} vs fresh {fresh_loss}",
                        c.loss
                    )));
                }
                let fresh_gap = &psi_truth - &psi(corpus, &c.ordering);
                let err = (&fresh_gap - &c.delta_psi)
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0, f64::max);
                if err > 1e-10 {
                    return Err(Error::invalid(format!(
                        "slot {slot} constraint {k}: cached feature gap off by {err}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Maximize (Δᵀ − ζᵀδΨ)α − ½αᵀKα over {α ≥ 0, Σ_o α_to ≤ c per label} with
/// K the Gram matrix of the feature gaps: projected coordinate ascent plus
/// within-label mass transfers, warm-started from the working set's current
/// duals, to an objective tolerance of 1e−8.
pub fn solve_alpha(ws: &WorkingSet, zeta: &Array1<f64>, c: f64) -> Result<Vec<Vec<f64>>> {
    let n = ws.num_constraints();
    if n == 0 {
        return Ok(ws.alpha.clone());
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("dual cap must be positive, got {c}")));
    }
    let m_mat = ws.delta_psi_matrix();
    let k = m_mat.t().dot(&m_mat);
    let (eigs, _) = k
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("dual kernel eigencheck failed: {e}")))?;
    if eigs[0] < -1e-8 {
        return Err(Error::Linalg(format!(
            "dual kernel lost positive semi-definiteness (min eigenvalue {})",
            eigs[0]
        )));
    }
    let lin = ws.losses_flat() - m_mat.t().dot(zeta);
    let slot_of = ws.flat_slots();
    let num_slots = ws.num_slots();

    // Warm start, projected into the per-label caps.
    let mut a = ws.alpha_flat().mapv(|x| x.max(0.0));
    let mut slot_sum = vec![0.0; num_slots];
    for (idx, &slot) in slot_of.iter().enumerate() {
        slot_sum[slot] += a[idx];
    }
    for slot in 0..num_slots {
        if slot_sum[slot] > c {
            let scale = c / slot_sum[slot];
            for (idx, &s) in slot_of.iter().enumerate() {
                if s == slot {
                    a[idx] *= scale;
                }
            }
            slot_sum[slot] = c;
        }
    }

    let objective = |a: &Array1<f64>| -> f64 {
        let d = m_mat.dot(a);
        lin.dot(a) - 0.5 * d.dot(&d)
    };
    let mut prev = objective(&a);
    for _sweep in 0..ALPHA_MAX_SWEEPS {
        for idx in 0..n {
            let slot = slot_of[idx];
            let g = lin[idx] - k.row(idx).dot(&a);
            let kii = k[(idx, idx)];
            let headroom = (c - slot_sum[slot] + a[idx]).max(0.0);
            let target = if kii > 1e-12 {
                a[idx] + g / kii
            } else if g > 0.0 {
                headroom
            } else {
                0.0
            };
            let new = target.clamp(0.0, headroom);
            slot_sum[slot] += new - a[idx];
            a[idx] = new;
        }
        // When a label's cap is tight, single-coordinate moves stall; shift
        // mass between two of its constraints instead (cap-preserving).
        for slot in 0..num_slots {
            let members: Vec<usize> = (0..n).filter(|&i| slot_of[i] == slot).collect();
            for (mi, &u) in members.iter().enumerate() {
                for &w in &members[mi + 1..] {
                    let gu = lin[u] - k.row(u).dot(&a);
                    let gw = lin[w] - k.row(w).dot(&a);
                    let curv = k[(u, u)] - 2.0 * k[(u, w)] + k[(w, w)];
                    let dir = gu - gw;
                    let step = if curv > 1e-12 {
                        dir / curv
                    } else if dir > 0.0 {
                        a[w]
                    } else if dir < 0.0 {
                        -a[u]
                    } else {
                        0.0
                    };
                    let step = step.clamp(-a[u], a[w]);
                    a[u] += step;
                    a[w] -= step;
                }
            }
        }
        let cur = objective(&a);
        let done = cur - prev < ALPHA_TOL;
        prev = cur;
        if done {
            break;
        }
    }
    Ok(ws.unflatten_alpha(&a))
}

/// The exact maximizer of (−αᵀδΨᵀ)ζ − ½ζᵀζ over ζ ≥ 0:
/// componentwise ζ_v = max(0, −(δΨ·α)_v).
pub fn solve_zeta(ws: &WorkingSet) -> Array1<f64> {
    ws.delta_psi_alpha().mapv(|v| (-v).max(0.0))
}

/// The dual value Δᵀα − ½αᵀKα − ζᵀδΨα − ½ζᵀζ.
pub fn dual_objective(ws: &WorkingSet, zeta: &Array1<f64>) -> f64 {
    let a = ws.alpha_flat();
    let d = ws.delta_psi_matrix().dot(&a);
    ws.losses_flat().dot(&a) - 0.5 * d.dot(&d) - zeta.dot(&d) - 0.5 * zeta.dot(zeta)
}

/// Hessian of the dual in the stacked variables (α, ζ):
/// −[[K, δΨᵀ], [δΨ, I]]; always negative semi-definite because K is the
/// Gram matrix of δΨ.
pub fn dual_hessian(ws: &WorkingSet) -> Array2<f64> {
    let n = ws.num_constraints();
    let v = ws.num_views;
    let m_mat = ws.delta_psi_matrix();
    let k = m_mat.t().dot(&m_mat);
    let mut h = Array2::zeros((n + v, n + v));
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = -k[(i, j)];
        }
    }
    for i in 0..n {
        for r in 0..v {
            h[(i, n + r)] = -m_mat[(r, i)];
            h[(n + r, i)] = -m_mat[(r, i)];
        }
    }
    for r in 0..v {
        h[(n + r, n + r)] = -1.0;
    }
    h
}

// ---------------------------------------------------------------------------
// Outer solver
// ---------------------------------------------------------------------------

/// Diagnostic record of one solver run.
#[derive(Debug, Clone)]
pub struct ApTrace {
    /// Dual value after every α step and every ζ step, in order.
    pub dual_values: Vec<f64>,
    pub outer_rounds: usize,
    /// Labels excluded from training because their corpus is single-class.
    pub excluded_labels: Vec<usize>,
    /// Constraints accumulated per trained label.
    pub constraint_counts: Vec<usize>,
    /// Raw weights before clipping and normalization.
    pub theta_raw: Array1<f64>,
    /// True when the raw weights degenerated to zero and the uniform vector
    /// was substituted.
    pub uniform_fallback: bool,
    pub working_set: WorkingSet,
    pub zeta: Array1<f64>,
}

/// Learn simplex weights by cutting planes: per outer round, add each
/// label's most violated ordering when it beats the current slack by
/// `cp_tol`, re-solve the α QP, take the closed-form ζ step, and stop once
/// no constraint is added and the dual has stabilized. The cap on the dual
/// mass per label is C = 1/(2Nη).
pub fn solve_ap(
    p: &PredictionTensor,
    eta: f64,
    cp_tol: f64,
    max_outer: usize,
) -> Result<SimplexWeights> {
    solve_ap_with_trace(p, eta, cp_tol, max_outer).map(|(theta, _)| theta)
}

/// As [`solve_ap`], additionally returning the run diagnostics.
pub fn solve_ap_with_trace(
    p: &PredictionTensor,
    eta: f64,
    cp_tol: f64,
    max_outer: usize,
) -> Result<(SimplexWeights, ApTrace)> {
    if p.is_empty() {
        return Err(Error::invalid("cannot learn weights from an empty tensor"));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!(
            "eta must be a finite positive real, got {eta}"
        )));
    }
    if !(cp_tol >= 0.0) {
        return Err(Error::invalid(format!("cp_tol must be nonnegative, got {cp_tol}")));
    }
    if max_outer == 0 {
        return Err(Error::invalid("max_outer must be at least 1"));
    }
    let v = p.num_views();
    let cap = 1.0 / (2.0 * p.len() as f64 * eta);

    let (corpora, excluded) = build_corpora(p);
    if corpora.is_empty() {
        return Err(Error::invalid(
            "every label is single-class; no ordering constraints exist",
        ));
    }
    if !excluded.is_empty() {
        log::warn!(
            "excluding {} single-class label(s) from weight learning: {:?}",
            excluded.len(),
            excluded
        );
    }

    let labels: Vec<usize> = corpora.iter().map(|c| c.label()).collect();
    let mut ws = WorkingSet::new(labels, v, cap);
    let mut zeta = Array1::zeros(v);
    let mut theta_raw: Array1<f64> = Array1::zeros(v);
    let mut dual_values = Vec::new();
    let mut dual_prev = 0.0;
    let mut rounds = 0;

    for _outer in 0..max_outer {
        rounds += 1;
        // Loss-augmented inference is independent across labels.
        let found: Vec<(PairwiseOrdering, f64)> = corpora
            .par_iter()
            .map(|corpus| find_most_violated(corpus, &theta_raw))
            .collect();
        let mut added = 0;
        for (slot, (ordering, violation)) in found.into_iter().enumerate() {
            let slack = ws.slack(slot, &theta_raw);
            if violation > slack + cp_tol && !ws.contains(slot, &ordering) {
                let constraint = Constraint::from_ordering(&corpora[slot], ordering);
                ws.add(slot, constraint);
                added += 1;
            }
        }

        if ws.num_constraints() > 0 {
            let alpha = solve_alpha(&ws, &zeta, cap)?;
            ws.set_alpha(alpha);
        }
        dual_values.push(dual_objective(&ws, &zeta));
        zeta = solve_zeta(&ws);
        let dual = dual_objective(&ws, &zeta);
        dual_values.push(dual);

        theta_raw = ws.delta_psi_alpha() + &zeta;
        if theta_raw.iter().any(|t| !t.is_finite()) {
            return Err(Error::solver(
                "weight reconstruction produced non-finite values",
            ));
        }

        if added == 0 && (dual - dual_prev).abs() < DUAL_IMPROVEMENT_TOL {
            break;
        }
        dual_prev = dual;
    }

    let mut clipped = theta_raw.mapv(|t| if t < THETA_CLIP { 0.0 } else { t });
    let sum = clipped.sum();
    let uniform_fallback = sum <= 0.0;
    let theta = if uniform_fallback {
        log::warn!("raw weights degenerated to zero; falling back to uniform weights");
        SimplexWeights::uniform(v)
    } else {
        clipped.mapv_inplace(|t| t / sum);
        SimplexWeights::new(clipped)?
    };

    let trace = ApTrace {
        dual_values,
        outer_rounds: rounds,
        excluded_labels: excluded,
        constraint_counts: ws.constraints.iter().map(|c| c.len()).collect(),
        theta_raw,
        uniform_fallback,
        working_set: ws,
        zeta,
    };
    Ok((theta, trace))
}
