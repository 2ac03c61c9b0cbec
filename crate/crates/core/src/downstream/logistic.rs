use crate::dataset::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

/// Binary linear classifier on standardized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Training loss before the first step and after every epoch.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn standardize(x: &Matrix, mean: &[f64], scale: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.rows() * x.cols());
    for r in x.row_iter() {
        out.extend(r.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s));
    }
    out
}

struct Problem<'a> {
    z: &'a [f64],
    y: &'a [f64],
    d: usize,
    l2: f64,
}

impl Problem<'_> {
    fn loss(&self, w: &[f64], b: f64) -> f64 {
        let n = self.y.len();
        let data: f64 = self
            .z
            .chunks_exact(self.d)
            .zip(self.y)
            .map(|(r, &y)| {
                let s = dot(r, w) + b;
                // -[y log σ(s) + (1-y) log(1-σ(s))]
                softplus(s) - y * s
            })
            .sum();
        data / n as f64 + 0.5 * self.l2 * dot(w, w)
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.y.len() as f64;
        let mut gw = vec![0.0; self.d];
        let mut gb = 0.0;
        for (r, &y) in self.z.chunks_exact(self.d).zip(self.y) {
            let e = sigmoid(dot(r, w) + b) - y;
            gb += e;
            for (g, &v) in gw.iter_mut().zip(r) {
                *g += e * v;
            }
        }
        for (g, &wi) in gw.iter_mut().zip(w) {
            *g = *g / n + self.l2 * wi;
        }
        (gw, gb / n)
    }
}

/// Full-batch gradient descent on the L2-penalized logistic loss.
///
/// Labels must be 0 or 1 with both present. If a step would raise the loss
/// it is retried at half the step size, so the recorded loss never increases.
pub fn logistic_fit(train: &EmbeddingSet, config: &LogisticConfig) -> Result<LogisticModel> {
    let labels = train.labels().ok_or(Error::Unlabeled)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("binary labels expected, found {l}")));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }
    let x = train.vectors();
    let (n, d) = x.shape();
    let mean = x.col_mean();
    let mut scale = vec![0.0; d];
    for r in x.row_iter() {
        for ((s, &v), &m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    scale.iter_mut().for_each(|s| {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    });
    let z = standardize(x, &mean, &scale);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let problem = Problem {
        z: &z,
        y: &y,
        d,
        l2: config.l2,
    };

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = problem.loss(&w, b);
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(loss);
    for _ in 0..config.epochs {
        let (gw, gb) = problem.gradient(&w, b);
        let mut step = config.learning_rate;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - step * g).collect();
            let b_new = b - step * gb;
            let new_loss = problem.loss(&w_new, b_new);
            if new_loss <= loss || step < 1e-12 {
                if new_loss <= loss {
                    w = w_new;
                    b = b_new;
                    loss = new_loss;
                }
                break;
            }
            step *= 0.5;
        }
        history.push(loss);
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        mean,
        scale,
        loss_history: history,
    })
}

/// Predicted 0/1 labels.
pub fn logistic_predict(model: &LogisticModel, x: &Matrix) -> Result<Vec<u32>> {
    if x.cols() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            found: x.cols(),
        });
    }
    let z = standardize(x, &model.mean, &model.scale);
    Ok(z.chunks_exact(x.cols().max(1))
        .take(x.rows())
        .map(|r| u32::from(dot(r, &model.weights) + model.bias > 0.0))
        .collect())
}

pub fn accuracy(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}
