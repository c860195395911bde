use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// Initial step; adapted by backtracking.
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 200,
            l2: 1e-4,
            seed: 7,
        }
    }
}

/// Standardized design matrix, row-major, with binary targets.
#[derive(Debug, Clone)]
pub struct Design<'a> {
    pub x: &'a [f64],
    pub y: &'a [u8],
    pub n_features: usize,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean log-loss plus `l2/2 · |w|²` (bias unpenalized) and its gradient.
/// `params[0]` is the bias.
pub fn loss_and_gradient(d: &Design<'_>, params: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let k = d.n_features;
    let n = d.y.len();
    let mut grad = vec![0.0; k + 1];
    let mut loss = 0.0;
    for (row, &y) in d.x.chunks_exact(k).zip(d.y) {
        let z = params[0] + row.iter().zip(&params[1..]).map(|(a, b)| a * b).sum::<f64>();
        let y = f64::from(y);
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        grad[0] += r;
        for (g, x) in grad[1..].iter_mut().zip(row) {
            *g += r * x;
        }
    }
    let inv = 1.0 / n as f64;
    loss *= inv;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    for (g, w) in grad[1..].iter_mut().zip(&params[1..]) {
        *g += l2 * w;
    }
    loss += 0.5 * l2 * params[1..].iter().map(|w| w * w).sum::<f64>();
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct FitTrace {
    /// Training loss after each epoch; non-increasing.
    pub losses: Vec<f64>,
}

/// Full-batch gradient descent. A step that would raise the loss is halved
/// until it does not; accepted steps grow by a quarter.
pub fn fit_logistic(d: &Design<'_>, cfg: &LogisticConfig) -> Result<(Vec<f64>, FitTrace)> {
    if d.y.is_empty() || d.x.len() != d.y.len() * d.n_features {
        return Err(Error::InvalidInput("design matrix shape mismatch".into()));
    }
    let positives = d.y.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == d.y.len() {
        return Err(Error::SingleClass("training labels"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut params: Vec<f64> = (0..=d.n_features).map(|_| init.sample(&mut rng)).collect();
    let (mut loss, mut grad) = loss_and_gradient(d, &params, cfg.l2);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }
    let mut step = cfg.learning_rate;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut candidate = vec![0.0; params.len()];
    for epoch in 1..=cfg.epochs {
        loop {
            for ((c, p), g) in candidate.iter_mut().zip(&params).zip(&grad) {
                *c = p - step * g;
            }
            let (l, g) = loss_and_gradient(d, &candidate, cfg.l2);
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            if l <= loss {
                std::mem::swap(&mut params, &mut candidate);
                loss = l;
                grad = g;
                step *= 1.25;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        losses.push(loss);
    }
    Ok((params, FitTrace { losses }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = [0.5, -1.0, 2.0, 0.1, -0.3, 0.7, 1.5, -2.0];
        let y = [1, 0, 1, 0];
        let d = Design {
            x: &x,
            y: &y,
            n_features: 2,
        };
        let p = [0.1, -0.4, 0.3];
        let (_, g) = loss_and_gradient(&d, &p, 0.01);
        for j in 0..p.len() {
            let h = 1e-6;
            let mut up = p;
            let mut down = p;
            up[j] += h;
            down[j] -= h;
            let fd = (loss_and_gradient(&d, &up, 0.01).0 - loss_and_gradient(&d, &down, 0.01).0) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1e-3), "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn single_class_rejected() {
        let d = Design {
            x: &[1.0, 2.0],
            y: &[1, 1],
            n_features: 1,
        };
        assert!(matches!(fit_logistic(&d, &LogisticConfig::default()), Err(Error::SingleClass(_))));
    }
}
