//! Linear probe: multinomial logistic regression on frozen embeddings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub train_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Held-out accuracy of a softmax classifier trained on standardized
/// embedding rows.
pub fn probe_accuracy(emb: &Matrix, labels: &[usize], cfg: &ProbeConfig) -> Result<f64> {
    let n = emb.rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "labels vs embedding rows".into(),
            expected: n,
            found: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidConfig(
            "the probe needs at least two nodes".into(),
        ));
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    let d = emb.cols();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(1, n - 1);
    let (train, test) = order.split_at(n_train);

    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for &i in train {
        for (m, x) in mean.iter_mut().zip(emb.row(i)) {
            *m += x / train.len() as f64;
        }
    }
    for &i in train {
        for ((s, x), m) in std.iter_mut().zip(emb.row(i)).zip(&mean) {
            *s += (x - m).powi(2) / train.len() as f64;
        }
    }
    let std: Vec<f64> = std
        .iter()
        .map(|s| if *s > 1e-12 { s.sqrt() } else { 1.0 })
        .collect();
    let feat = |i: usize| -> Vec<f64> {
        emb.row(i)
            .iter()
            .zip(&mean)
            .zip(&std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    };
    let x_train: Vec<Vec<f64>> = train.iter().map(|&i| feat(i)).collect();

    let mut w = Matrix::zeros(d, classes);
    let mut b = vec![0.0; classes];
    let logits = |w: &Matrix, b: &[f64], x: &[f64]| -> Vec<f64> {
        let mut z = b.to_vec();
        for (k, &xk) in x.iter().enumerate() {
            for (zc, wc) in z.iter_mut().zip(w.row(k)) {
                *zc += xk * wc;
            }
        }
        z
    };
    for _ in 0..cfg.epochs {
        let mut gw = Matrix::zeros(d, classes);
        let mut gb = vec![0.0; classes];
        for (x, &i) in x_train.iter().zip(train) {
            let z = logits(&w, &b, x);
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let sum: f64 = e.iter().sum();
            for c in 0..classes {
                let err = e[c] / sum - if labels[i] == c { 1.0 } else { 0.0 };
                gb[c] += err;
                for (k, &xk) in x.iter().enumerate() {
                    gw.row_mut(k)[c] += err * xk;
                }
            }
        }
        let scale = cfg.learning_rate / train.len() as f64;
        for (wv, gv) in w.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *wv -= scale * gv + cfg.learning_rate * cfg.l2 * *wv;
        }
        for (bv, gv) in b.iter_mut().zip(&gb) {
            *bv -= scale * gv;
        }
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            let z = logits(&w, &b, &feat(i));
            let pred = z
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc },
                )
                .0;
            pred == labels[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_classes_are_learned() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = i % 3;
                vec![
                    c as f64 * 2.0 + (i as f64 * 0.1).sin() * 0.3,
                    (i as f64).cos() * 0.2,
                ]
            })
            .collect();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let acc = probe_accuracy(&m, &labels, &ProbeConfig::default()).unwrap();
        assert_eq!(acc, 1.0);
    }
}
