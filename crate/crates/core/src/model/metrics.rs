use crate::dataset::pearson;
use crate::error::{Error, Result};

/// Trimmed mean dropping one largest and one smallest value.
pub fn ensemble(probs: &[f64]) -> Result<f64> {
    if probs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "trimmed mean needs at least 3 fold probabilities, got {}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput("fold probability outside [0, 1]".into()));
    }
    let mut sorted = probs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let middle = &sorted[1..sorted.len() - 1];
    Ok(middle.iter().sum::<f64>() / middle.len() as f64)
}

fn check_inputs(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::InvalidInput("probabilities and labels must be non-empty and aligned".into()));
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::InvalidInput("NaN probability".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Rank-based AUC with ties counted as half. Ranks are doubled so the
/// statistic stays integral until the final division.
pub fn auc_roc(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(probs, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("evaluation labels"));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut rank_sum2: u128 = 0;
    let mut a = 0;
    while a < order.len() {
        let mut b = a + 1;
        while b < order.len() && probs[order[b]] == probs[order[a]] {
            b += 1;
        }
        // Mean 1-based rank of positions a..b, doubled.
        let rank2 = (a + b + 1) as u128;
        let pos = order[a..b].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank_sum2 += rank2 * pos;
        a = b;
    }
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positive + self.true_negative + self.false_positive + self.false_negative
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// `None` without positives.
    pub recall: Option<f64>,
    /// `None` without negatives.
    pub specificity: Option<f64>,
    /// Between raw probabilities and labels; `None` when either is constant.
    pub pearson: Option<f64>,
    pub auc: Option<f64>,
}

/// A row is predicted positive when its probability is at least `threshold`.
pub fn classification_report(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ClassificationReport> {
    check_inputs(probs, labels)?;
    let mut c = ConfusionMatrix::default();
    for (&p, &l) in probs.iter().zip(labels) {
        match (p >= threshold, l == 1) {
            (true, true) => c.true_positive += 1,
            (false, false) => c.true_negative += 1,
            (true, false) => c.false_positive += 1,
            (false, true) => c.false_negative += 1,
        }
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let pearson = match pearson(probs, &y) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_) | Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };
    let auc = match auc_roc(probs, labels) {
        Ok(a) => Some(a),
        Err(Error::SingleClass(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationReport {
        confusion: c,
        accuracy: (c.true_positive + c.true_negative) as f64 / c.total() as f64,
        recall: ratio(c.true_positive, c.true_positive + c.false_negative),
        specificity: ratio(c.true_negative, c.true_negative + c.false_positive),
        pearson,
        auc,
    })
}
