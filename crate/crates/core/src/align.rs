//! Global step alignment and the semantic/structural/order dimensions.
//!
//! Alignment is a Needleman-Wunsch-style DP over the reference x predicted
//! cosine matrix: a match at similarity s scores s - threshold, gaps score
//! 0, so pairs below the threshold prefer gaps. Ties break match over
//! ref-gap over pred-gap, making tracebacks deterministic.

use crate::num::Real;
use crate::rank::spearman_rho;
use crate::semantic::{cosine_sim_matrix, BackendError, EmbeddingVector, SimilarityMatrices};

/// Default similarity below which a step pair prefers gaps.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.5;

/// Partition of reference/predicted step indices after alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAlignment<F> {
    /// (ref index, pred index, similarity), strictly increasing in both
    /// indices.
    pub matched: Vec<(usize, usize, F)>,
    pub missing_ref: Vec<usize>,
    pub extra_pred: Vec<usize>,
}

impl<F: Real> StepAlignment<F> {
    /// Every index lands in exactly one bucket, matched pairs are strictly
    /// monotone, and matched similarities clear the threshold.
    pub fn check_partition(&self, n_ref: usize, n_pred: usize) -> bool {
        let mut ref_seen = vec![false; n_ref];
        let mut pred_seen = vec![false; n_pred];
        let mut prev: Option<(usize, usize)> = None;
        for &(r, p, _) in &self.matched {
            if r >= n_ref || p >= n_pred || ref_seen[r] || pred_seen[p] {
                return false;
            }
            if let Some((pr, pp)) = prev {
                if r <= pr || p <= pp {
                    return false;
                }
            }
            prev = Some((r, p));
            ref_seen[r] = true;
            pred_seen[p] = true;
        }
        for &r in &self.missing_ref {
            if r >= n_ref || ref_seen[r] {
                return false;
            }
            ref_seen[r] = true;
        }
        for &p in &self.extra_pred {
            if p >= n_pred || pred_seen[p] {
                return false;
            }
            pred_seen[p] = true;
        }
        ref_seen.iter().all(|&b| b) && pred_seen.iter().all(|&b| b)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Move {
    Start,
    Match,
    RefGap,
    PredGap,
}

/// Optimal global alignment over a similarity matrix (rows = reference
/// steps, columns = predicted steps). `n_pred` is explicit because an
/// empty reference side leaves the matrix without a column count.
pub fn align_from_matrix<F: Real>(sim: &[Vec<F>], n_pred: usize, threshold: F) -> StepAlignment<F> {
    let n_ref = sim.len();
    debug_assert!(sim.iter().all(|row| row.len() == n_pred));

    let mut score = vec![vec![F::zero(); n_pred + 1]; n_ref + 1];
    let mut moves = vec![vec![Move::Start; n_pred + 1]; n_ref + 1];
    for i in 1..=n_ref {
        moves[i][0] = Move::RefGap;
    }
    for j in 1..=n_pred {
        moves[0][j] = Move::PredGap;
    }
    for i in 1..=n_ref {
        for j in 1..=n_pred {
            let diag = score[i - 1][j - 1] + (sim[i - 1][j - 1] - threshold);
            let up = score[i - 1][j];
            let left = score[i][j - 1];
            // preference on ties: match, then ref-gap, then pred-gap
            let (best, mv) = if diag >= up && diag >= left {
                (diag, Move::Match)
            } else if up >= left {
                (up, Move::RefGap)
            } else {
                (left, Move::PredGap)
            };
            score[i][j] = best;
            moves[i][j] = mv;
        }
    }

    let mut matched = Vec::new();
    let mut missing_ref = Vec::new();
    let mut extra_pred = Vec::new();
    let (mut i, mut j) = (n_ref, n_pred);
    while i > 0 || j > 0 {
        match moves[i][j] {
            Move::Match => {
                let s = sim[i - 1][j - 1];
                if s >= threshold {
                    matched.push((i - 1, j - 1, s));
                } else {
                    missing_ref.push(i - 1);
                    extra_pred.push(j - 1);
                }
                i -= 1;
                j -= 1;
            }
            Move::RefGap => {
                missing_ref.push(i - 1);
                i -= 1;
            }
            Move::PredGap => {
                extra_pred.push(j - 1);
                j -= 1;
            }
            Move::Start => break,
        }
    }
    matched.reverse();
    missing_ref.reverse();
    extra_pred.reverse();
    StepAlignment {
        matched,
        missing_ref,
        extra_pred,
    }
}

/// DP score of the optimal alignment (used by the oracle-equivalence
/// checks).
pub fn alignment_score<F: Real>(sim: &[Vec<F>], n_pred: usize, threshold: F) -> F {
    let a = align_from_matrix(sim, n_pred, threshold);
    a.matched
        .iter()
        .map(|&(_, _, s)| s - threshold)
        .fold(F::zero(), |acc, x| acc + x)
}

/// Align embedded reference and predicted steps.
pub fn align_steps<F: Real>(
    reference: &[EmbeddingVector<F>],
    predicted: &[EmbeddingVector<F>],
    threshold: F,
) -> Result<StepAlignment<F>, BackendError> {
    let sim = cosine_sim_matrix(reference, predicted)?;
    Ok(align_from_matrix(&sim, predicted.len(), threshold))
}

/// Per-predicted-step best reference match above the threshold (ties take
/// the smallest reference index). Unlike the global alignment this pairing
/// is free to cross, which is what makes it carry order information.
pub fn best_match_pairs<F: Real>(sim: &[Vec<F>], threshold: F) -> Vec<(usize, usize, F)> {
    let n_ref = sim.len();
    let n_pred = sim.first().map_or(0, Vec::len);
    let mut pairs = Vec::new();
    for t in 0..n_pred {
        let mut best: Option<(usize, F)> = None;
        for j in 0..n_ref {
            let s = sim[j][t];
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((j, s));
            }
        }
        if let Some((j, s)) = best {
            if s >= threshold {
                pairs.push((j, t, s));
            }
        }
    }
    pairs
}

/// Structural penalty: unmatched mass over total step count; 0/0 = 0.
pub fn score_struct<F: Real>(a: &StepAlignment<F>, n_ref: usize, n_pred: usize) -> F {
    let total = n_ref + n_pred;
    if total == 0 {
        return F::zero();
    }
    F::from_config((a.missing_ref.len() + a.extra_pred.len()) as f64)
        / F::from_config(total as f64)
}

/// Order penalty (1 - rho) / 2 over matched (ref, pred) index pairs;
/// fewer than two pairs scores 0.
pub fn score_order<F: Real>(matched: &[(usize, usize, F)]) -> F {
    if matched.len() < 2 {
        return F::zero();
    }
    let refs: Vec<F> = matched
        .iter()
        .map(|&(r, _, _)| F::from_config(r as f64))
        .collect();
    let preds: Vec<F> = matched
        .iter()
        .map(|&(_, p, _)| F::from_config(p as f64))
        .collect();
    let rho = spearman_rho(&refs, &preds);
    let half = F::from_config(0.5);
    ((F::one() - rho) * half).max(F::zero()).min(F::one())
}

/// Semantic drift: one minus the mean best reference similarity per
/// predicted step, clipped to [0, 1]. No predicted steps scores 1.
pub fn score_sem<F: Real>(m: &SimilarityMatrices<F>) -> F {
    let n_pred = m.to_question.len();
    if n_pred == 0 {
        return F::one();
    }
    let mut total = F::zero();
    for t in 0..n_pred {
        let best = m
            .to_reference
            .iter()
            .map(|row| row[t])
            .fold(F::zero(), F::max);
        total += best;
    }
    let mean = total / F::from_config(n_pred as f64);
    (F::one() - mean).max(F::zero()).min(F::one())
}

/// Mean best reference similarity per predicted step (the complement of
/// [`score_sem`] before clipping); used by the near-miss predicate.
pub fn mean_best_reference_sim<F: Real>(m: &SimilarityMatrices<F>) -> F {
    let n_pred = m.to_question.len();
    if n_pred == 0 {
        return F::zero();
    }
    let mut total = F::zero();
    for t in 0..n_pred {
        let best = m
            .to_reference
            .iter()
            .map(|row| row[t])
            .fold(F::zero(), F::max);
        total += best;
    }
    total / F::from_config(n_pred as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn identical_sequences_match_diagonally() {
        let sim = m(&[&[1.0, 0.1, 0.1], &[0.1, 1.0, 0.1], &[0.1, 0.1, 1.0]]);
        let a = align_from_matrix(&sim, 3, 0.5);
        assert_eq!(a.matched.len(), 3);
        assert!(a.missing_ref.is_empty());
        assert!(a.extra_pred.is_empty());
        assert!(a.check_partition(3, 3));
    }

    #[test]
    fn duplicated_outer_steps_leave_middle_missing() {
        // ref 3 steps; pred carries only steps 0 and 2
        let sim = m(&[&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]]);
        let a = align_from_matrix(&sim, 2, 0.5);
        assert_eq!(a.matched.iter().map(|&(r, p, _)| (r, p)).collect::<Vec<_>>(), vec![(0, 0), (2, 1)]);
        assert_eq!(a.missing_ref, vec![1]);
        assert!(a.extra_pred.is_empty());
    }

    #[test]
    fn empty_sides() {
        let a: StepAlignment<f64> = align_from_matrix(&[], 2, 0.5);
        assert_eq!(a.extra_pred, vec![0, 1]);
        assert!(a.check_partition(0, 2));
        let rows: Vec<Vec<f64>> = vec![vec![], vec![]];
        let a = align_from_matrix(&rows, 0, 0.5);
        assert_eq!(a.missing_ref, vec![0, 1]);
        assert!(a.check_partition(2, 0));
    }

    #[test]
    fn below_threshold_pairs_prefer_gaps() {
        let sim = m(&[&[0.4]]);
        let a = align_from_matrix(&sim, 1, 0.5);
        assert!(a.matched.is_empty());
        assert_eq!(a.missing_ref, vec![0]);
        assert_eq!(a.extra_pred, vec![0]);
    }

    #[test]
    fn threshold_similarity_still_matches() {
        let sim = m(&[&[0.5]]);
        let a = align_from_matrix(&sim, 1, 0.5);
        assert_eq!(a.matched.len(), 1);
    }

    #[test]
    fn struct_score_examples() {
        let sim = m(&[&[1.0, 0.1], &[0.1, 1.0]]);
        let a = align_from_matrix(&sim, 2, 0.5);
        assert_eq!(score_struct(&a, 2, 2), 0.0);

        let empty: StepAlignment<f64> = StepAlignment {
            matched: vec![],
            missing_ref: vec![0, 1, 2],
            extra_pred: vec![],
        };
        assert_eq!(score_struct(&empty, 3, 0), 1.0);
        assert_eq!(score_struct::<f64>(&StepAlignment {
            matched: vec![],
            missing_ref: vec![],
            extra_pred: vec![],
        }, 0, 0), 0.0);
    }

    #[test]
    fn order_score_examples() {
        let fwd: Vec<(usize, usize, f64)> = vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)];
        assert!((score_order(&fwd) - 0.0).abs() < 1e-12);

        let rev: Vec<(usize, usize, f64)> = vec![(0, 2, 1.0), (1, 1, 1.0), (2, 0, 1.0)];
        assert!((score_order(&rev) - 1.0).abs() < 1e-12);

        let swapped: Vec<(usize, usize, f64)> = vec![(0, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)];
        assert!((score_order(&swapped) - 0.25).abs() < 1e-12);

        let single: Vec<(usize, usize, f64)> = vec![(0, 0, 1.0)];
        assert_eq!(score_order(&single), 0.0);
    }

    #[test]
    fn sem_score_examples() {
        let m1 = SimilarityMatrices::<f64> {
            to_question: vec![0.0, 0.0],
            to_reference: vec![vec![1.0, 0.5], vec![0.2, 0.3]],
        };
        // best per pred step: 1.0 and 0.5 -> 1 - 0.75
        assert!((score_sem(&m1) - 0.25).abs() < 1e-12);

        let empty = SimilarityMatrices::<f64> {
            to_question: vec![],
            to_reference: vec![],
        };
        assert_eq!(score_sem(&empty), 1.0);

        let zeros = SimilarityMatrices {
            to_question: vec![0.0],
            to_reference: vec![vec![0.0]],
        };
        assert_eq!(score_sem(&zeros), 1.0);
    }

    #[test]
    fn best_match_crosses_freely() {
        // pred steps are the reference reversed
        let sim = m(&[
            &[0.1, 0.2, 1.0],
            &[0.1, 1.0, 0.2],
            &[1.0, 0.2, 0.1],
        ]);
        let pairs = best_match_pairs(&sim, 0.5);
        assert_eq!(
            pairs.iter().map(|&(r, p, _)| (r, p)).collect::<Vec<_>>(),
            vec![(2, 0), (1, 1), (0, 2)]
        );
        assert!((score_order(&pairs) - 1.0).abs() < 1e-12);
    }

    /// Exhaustive monotone-alignment oracle for small matrices.
    fn brute_force_best(sim: &[Vec<f64>], np: usize, threshold: f64) -> f64 {
        fn go(sim: &[Vec<f64>], np: usize, t: f64, i: usize, j: usize) -> f64 {
            let nr = sim.len();
            if i == nr || j == np {
                return 0.0;
            }
            let take = sim[i][j] - t + go(sim, np, t, i + 1, j + 1);
            let skip_ref = go(sim, np, t, i + 1, j);
            let skip_pred = go(sim, np, t, i, j + 1);
            take.max(skip_ref).max(skip_pred)
        }
        go(sim, np, threshold, 0, 0)
    }

    #[test]
    fn dp_matches_brute_force_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..60 {
            let nr = rng.gen_range(0..=5);
            let np = rng.gen_range(0..=5);
            let sim: Vec<Vec<f64>> = (0..nr)
                .map(|_| (0..np).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                .collect();
            let dp = alignment_score(&sim, np, 0.5);
            let bf = brute_force_best(&sim, np, 0.5);
            assert!((dp - bf).abs() < 1e-9, "dp {dp} vs brute force {bf}");
            let a = align_from_matrix(&sim, np, 0.5);
            assert!(a.check_partition(nr, np));
        }
    }
}
