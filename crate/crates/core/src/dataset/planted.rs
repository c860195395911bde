use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::FeatureMatrix;

/// Draws labels from a known logistic model over z-scored columns:
/// `P(y = 1) = σ(Σ coef_j · z_j)`. Returns the labels and the true logits.
pub fn plant_logistic_labels(
    matrix: &FeatureMatrix,
    columns: &[&str],
    coefs: &[f64],
    seed: u64,
) -> Result<(Vec<u8>, Vec<f64>)> {
    if columns.len() != coefs.len() || columns.is_empty() {
        return Err(Error::InvalidInput("need one coefficient per planted column".into()));
    }
    let n = matrix.n_rows();
    let mut logits = vec![0.0; n];
    for (name, &coef) in columns.iter().zip(coefs) {
        let j = matrix
            .column_index(name)
            .ok_or_else(|| Error::MissingFeature(name.to_string()))?;
        let x = matrix.column(j);
        let mean = x.iter().sum::<f64>() / n as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd == 0.0 {
            return Err(Error::InvalidInput(format!("planted column `{name}` is constant")));
        }
        for (l, v) in logits.iter_mut().zip(&x) {
            *l += coef * (v - mean) / sd;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = logits
        .iter()
        .map(|&z| u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())))
        .collect();
    Ok((labels, logits))
}

/// Fair-coin labels independent of every feature.
pub fn noise_labels(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
}
