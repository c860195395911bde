use crate::error::{Error, Result};

use super::FeatureMatrix;

/// Sample Pearson correlation, computed in two passes around the means.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pearson needs two equal series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first series is constant"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second series is constant"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Linear-interpolated quantile of sorted values, `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single feature.
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// Correlation with the label per feature; `None` for constant columns.
    pub per_feature: Vec<(String, Option<f64>)>,
    pub summary: Option<CorrelationSummary>,
}

pub fn correlation_report(matrix: &FeatureMatrix) -> Result<CorrelationReport> {
    let labels = matrix
        .labels()
        .ok_or_else(|| Error::InvalidInput("correlation report needs a labeled matrix".into()))?;
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut per_feature = Vec::with_capacity(matrix.n_cols());
    for (j, name) in matrix.columns().iter().enumerate() {
        let r = match pearson(&matrix.column(j), &y) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        per_feature.push((name.clone(), r));
    }
    let mut rs: Vec<f64> = per_feature.iter().filter_map(|(_, r)| *r).collect();
    rs.sort_by(f64::total_cmp);
    let summary = (!rs.is_empty()).then(|| {
        let n = rs.len() as f64;
        let mean = rs.iter().sum::<f64>() / n;
        let std = if rs.len() > 1 {
            (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        CorrelationSummary {
            count: rs.len(),
            mean,
            std,
            min: rs[0],
            q25: quantile(&rs, 0.25),
            q50: quantile(&rs, 0.5),
            q75: quantile(&rs, 0.75),
            max: rs[rs.len() - 1],
        }
    });
    Ok(CorrelationReport { per_feature, summary })
}
