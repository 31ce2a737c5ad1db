//! 101-point interpolated average precision.

/// Recall levels `0.00, 0.01, ..., 1.00`.
pub const RECALL_LEVELS: usize = 101;

/// AP of one class from `(score, is_true_positive)` pairs pooled across
/// images, given the number of ground-truth instances.
///
/// Detections are swept by descending score (input order on ties). At each
/// recall level the precision envelope, the best precision reached at that
/// recall or beyond, is taken, 0 when the level is never reached. With no
/// ground truth the AP is 1 if there are also no detections, else 0.
pub fn ap_from_ranked(ranked: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if ranked.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.total_cmp(&ranked[a].0).then(a.cmp(&b)));

    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &i in &order {
        if ranked[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let mut total = 0.0;
    let mut cursor = 0;
    for k in 0..RECALL_LEVELS {
        let level = k as f64 / (RECALL_LEVELS - 1) as f64;
        while cursor < recall.len() && recall[cursor] < level {
            cursor += 1;
        }
        if cursor < recall.len() {
            total += precision[cursor];
        }
    }
    total / RECALL_LEVELS as f64
}
