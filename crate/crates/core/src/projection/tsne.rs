//! Exact t-SNE: dense affinities, Student-t output kernel, momentum gradient
//! descent with per-coordinate gains and early exaggeration.
//!
//! Rows are processed in parallel but every reduction runs in a fixed order,
//! so a given seed reproduces the same coordinates bit for bit.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tfidf::DocVector;
use crate::rng::seeded_rng;

const MIN_PROB: f64 = f64::EPSILON;
const PERPLEXITY_TOL: f64 = 1e-5;
const PERPLEXITY_STEPS: usize = 100;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    /// `None` picks max(N / 12, 50).
    pub learning_rate: Option<f64>,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TsneError {
    #[error("{points} points are too few for perplexity {perplexity} (need more than 3x perplexity)")]
    TooFewPoints { points: usize, perplexity: f64 },
    #[error("need at least 250 iterations, got {0}")]
    TooFewIterations(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPoint {
    pub idea_ref: String,
    pub venue: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneRun {
    pub points: Vec<EmbeddedPoint>,
    /// KL(P || Q) with un-exaggerated P at the end of the exaggeration phase.
    pub kl_after_exaggeration: f64,
    pub kl_final: f64,
    pub learning_rate: f64,
}

/// Squared Euclidean distances, dense row-major.
pub fn squared_distances(vectors: &[DocVector]) -> Vec<f64> {
    let n = vectors.len();
    let norms: Vec<f64> = vectors.iter().map(DocVector::norm_squared).collect();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            if i != j {
                row[j] = (norms[i] + norms[j] - 2.0 * vectors[i].dot(&vectors[j])).max(0.0);
            }
        }
    });
    d
}

/// Row-conditional affinities p(j|i) with each row's Gaussian precision
/// binary-searched so that its entropy is ln(perplexity).
pub fn conditional_affinities(distances: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    p.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let dist = &distances[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..PERPLEXITY_STEPS {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-dist[j] * beta).exp() };
                sum += row[j];
            }
            if sum == 0.0 {
                sum = MIN_PROB;
            }
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] /= sum;
                weighted += dist[j] * row[j];
            }
            let entropy = sum.ln() + beta * weighted;
            let diff = entropy - target;
            if diff.abs() <= PERPLEXITY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi == f64::INFINITY { beta * 2.0 } else { (beta + hi) / 2.0 };
            } else {
                hi = beta;
                beta = if lo == f64::NEG_INFINITY { beta / 2.0 } else { (beta + lo) / 2.0 };
            }
        }
    });
    p
}

/// Symmetrized joint affinities (p(j|i) + p(i|j)) / sum, floored.
pub fn joint_affinities(conditional: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = conditional[i * n + j] + conditional[j * n + i];
        }
    }
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v = (*v / total).max(MIN_PROB);
    }
    p
}

/// Unnormalized Student-t kernel rows plus their fixed-order total.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            if i != j {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                row[j] = 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    });
    let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum()).collect();
    (num, row_sums.iter().sum())
}

fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (num, z) = student_kernel(y);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p[i * n + j];
                    let qij = (num[i * n + j] / z).max(MIN_PROB);
                    pij * (pij / qij).ln()
                })
                .sum()
        })
        .collect();
    rows.iter().sum()
}

pub fn tsne(vectors: &[DocVector], params: &TsneParams) -> Result<TsneRun, TsneError> {
    let n = vectors.len();
    if params.perplexity.is_nan() || params.perplexity <= 0.0 {
        return Err(TsneError::InvalidParam(format!("perplexity {}", params.perplexity)));
    }
    if (n as f64) <= 3.0 * params.perplexity {
        return Err(TsneError::TooFewPoints { points: n, perplexity: params.perplexity });
    }
    if params.iterations < 250 {
        return Err(TsneError::TooFewIterations(params.iterations));
    }
    if params.exaggeration_iterations > params.iterations {
        return Err(TsneError::InvalidParam("exaggeration phase longer than the run".into()));
    }
    let learning_rate = params.learning_rate.unwrap_or_else(|| (n as f64 / 12.0).max(50.0));
    let p = joint_affinities(&conditional_affinities(&squared_distances(vectors), n, params.perplexity), n);

    let mut rng = seeded_rng(params.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_after_exaggeration = f64::NAN;

    for iter in 0..params.iterations {
        let exaggerating = iter < params.exaggeration_iterations;
        let (scale, momentum) = if exaggerating { (params.early_exaggeration, 0.5) } else { (1.0, 0.8) };
        if iter == params.exaggeration_iterations {
            // the optimizer state starts fresh for the second phase
            update.iter_mut().for_each(|u| *u = [0.0; 2]);
            gains.iter_mut().for_each(|g| *g = [1.0; 2]);
        }
        let (num, z) = student_kernel(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = num[i * n + j];
                    let coef = (scale * p[i * n + j] - w / z) * w;
                    g[0] += coef * (y[i][0] - y[j][0]);
                    g[1] += coef * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for d in 0..2 {
                let g = grad[i][d];
                gains[i][d] = if update[i][d] * g < 0.0 { gains[i][d] + 0.2 } else { gains[i][d] * 0.8 };
                gains[i][d] = gains[i][d].max(MIN_GAIN);
                update[i][d] = momentum * update[i][d] - learning_rate * gains[i][d] * g;
                y[i][d] += update[i][d];
            }
        }
        if iter + 1 == params.exaggeration_iterations {
            kl_after_exaggeration = kl_divergence(&p, &y);
        }
    }
    let kl_final = kl_divergence(&p, &y);
    if params.exaggeration_iterations == 0 {
        kl_after_exaggeration = kl_final;
    }
    let points = vectors
        .iter()
        .zip(&y)
        .map(|(v, c)| EmbeddedPoint { idea_ref: v.idea_ref.clone(), venue: v.venue.clone(), x: c[0], y: c[1] })
        .collect();
    Ok(TsneRun { points, kl_after_exaggeration, kl_final, learning_rate })
}
