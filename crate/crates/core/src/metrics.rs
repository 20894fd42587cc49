//! Evaluation metrics: RMSE, cosine/Pearson similarity, Spearman rank
//! correlation (RankIC), and precision-recall curves.

use crate::error::{Error, Result};

fn check_same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Root mean squared error between two vectors.
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

/// Cosine of the angle between two vectors.
pub fn cosine_sim(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// Pearson correlation between two vectors.
pub fn pearson_sim(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "Pearson correlation of a constant vector".into(),
        ));
    }
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties sharing the mean rank of their block.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap());
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Rank information coefficient: Spearman correlation, i.e. Pearson on
/// average ranks.
pub fn rank_ic(alpha: &[f64], returns: &[f64]) -> Result<f64> {
    check_same_len(alpha, returns)?;
    let ra = average_ranks(alpha);
    let rb = average_ranks(returns);
    pearson_sim(&ra, &rb)
}

/// Threshold sweep of precision and recall.
#[derive(Debug, Clone)]
pub struct PrCurve {
    /// Ascending decision thresholds (the distinct scores).
    pub thresholds: Vec<f64>,
    /// Precision at "predict positive when score >= threshold".
    pub precision: Vec<f64>,
    /// Recall at the same rule; non-increasing as the threshold rises.
    pub recall: Vec<f64>,
}

/// Precision-recall curve over all distinct score thresholds.
///
/// Labels must contain at least one positive; with no positives the recall
/// (and the precision at the strictest threshold) is undefined and an
/// `UndefinedSimilarity` error is returned.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<PrCurve> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::UndefinedSimilarity(
            "precision-recall curve needs at least one positive label".into(),
        ));
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    // lowering the threshold past the point of full recall only dilutes
    // precision, so the sweep starts at the largest threshold reaching it
    let full_recall_at = thresholds
        .iter()
        .rposition(|&t| {
            labels
                .iter()
                .zip(scores)
                .all(|(&l, &s)| !l || s >= t)
        })
        .unwrap_or(0);
    let thresholds: Vec<f64> = thresholds[full_recall_at..].to_vec();

    let mut precision = Vec::with_capacity(thresholds.len());
    let mut recall = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&s, &l) in scores.iter().zip(labels) {
            if s >= t {
                if l {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        // the sweep always predicts at least one positive (t = max score)
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / positives as f64);
    }
    Ok(PrCurve {
        thresholds,
        precision,
        recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rmse_cases() {
        assert_abs_diff_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        // sqrt((9 + 16)/2) = sqrt(12.5)
        assert_abs_diff_eq!(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            12.5f64.sqrt(),
            epsilon = 1e-14
        );
        // double-loop oracle on a random pair
        let x = [0.3, -1.2, 0.7, 2.2];
        let y = [0.1, -0.9, 1.0, 2.0];
        let mut acc = 0.0;
        for i in 0..4 {
            acc += (x[i] - y[i]) * (x[i] - y[i]);
        }
        assert_abs_diff_eq!(
            rmse(&x, &y).unwrap(),
            (acc / 4.0).sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn similarity_cases() {
        let x = [1.0, 2.0, -0.5];
        assert_abs_diff_eq!(cosine_sim(&x, &x).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            pearson_sim(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert!(cosine_sim(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(pearson_sim(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn rank_ic_cases() {
        assert_abs_diff_eq!(
            rank_ic(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            rank_ic(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        // hand rank-Pearson: ranks (1,2,3,4) vs (1,3,2,4) -> 0.8
        assert_abs_diff_eq!(
            rank_ic(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(),
            0.8,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ties_get_average_ranks() {
        let r = average_ranks(&[1.0, 1.0, 2.0]);
        assert_eq!(r, vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn pr_curve_perfectly_separated() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let curve = pr_curve(&scores, &labels).unwrap();
        for p in &curve.precision {
            assert_abs_diff_eq!(*p, 1.0, epsilon = 1e-14);
        }
        // recall non-increasing as threshold rises
        for w in curve.recall.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn pr_curve_no_positives_errors() {
        assert!(pr_curve(&[0.3, 0.1], &[false, false]).is_err());
    }

    #[test]
    fn pr_curve_matches_naive_sweep() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.65, 0.2];
        let labels = [false, true, false, true, true, false];
        let curve = pr_curve(&scores, &labels).unwrap();
        for (i, &t) in curve.thresholds.iter().enumerate() {
            let mut tp = 0;
            let mut fp = 0;
            let mut fng = 0;
            for (&s, &l) in scores.iter().zip(&labels) {
                match (s >= t, l) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fng += 1,
                    _ => {}
                }
            }
            assert_abs_diff_eq!(
                curve.precision[i],
                tp as f64 / (tp + fp) as f64,
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                curve.recall[i],
                tp as f64 / (tp + fng) as f64,
                epsilon = 1e-14
            );
        }
    }

    proptest! {
        #[test]
        fn rank_ic_invariant_to_monotone_transform(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..20),
            ys in proptest::collection::vec(-100.0f64..100.0, 3..20),
        ) {
            let n = xs.len().min(ys.len());
            let x = &xs[..n];
            let y = &ys[..n];
            if rank_ic(x, y).is_ok() {
                let base = rank_ic(x, y).unwrap();
                let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
                let ty: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
                prop_assert_eq!(base, rank_ic(&tx, y).unwrap());
                prop_assert_eq!(base, rank_ic(x, &ty).unwrap());
            }
        }

        #[test]
        fn cosine_invariant_to_positive_scaling(
            xs in proptest::collection::vec(-10.0f64..10.0, 2..12),
            scale in 0.01f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().rev().cloned().collect();
            if let Ok(base) = cosine_sim(&xs, &ys) {
                let scaled: Vec<f64> = xs.iter().map(|v| v * scale).collect();
                let c = cosine_sim(&scaled, &ys).unwrap();
                prop_assert!((base - c).abs() <= 1e-12);
            }
        }
    }
}
