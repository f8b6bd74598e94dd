use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::seed;

/// Fixed random linear map, `N(0, 1/cols)` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl Projection {
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let scale = (1.0 / cols as f64).sqrt();
        let weights = (0..rows * cols)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x * scale
            })
            .collect();
        Self { rows, cols, weights }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        Ok(self
            .weights
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }
}

/// Per-frame feature extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureMap {
    Identity,
    Projection(Projection),
}

impl FeatureMap {
    pub fn apply(&self, frame: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMap::Identity => Ok(frame.to_vec()),
            FeatureMap::Projection(p) => p.apply(frame),
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}
