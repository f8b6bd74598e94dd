use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A generated (or training) sequence of `frames × dim` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub prompt_id: String,
    pub sample_index: usize,
    pub seed: u64,
    pub frames: usize,
    pub dim: usize,
    /// Row-major, frame by frame.
    pub values: Vec<f64>,
}

impl SequenceSample {
    pub fn from_flat(
        prompt_id: impl Into<String>,
        sample_index: usize,
        seed: u64,
        frames: usize,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::InvalidArgument("sample needs T ≥ 1 and D ≥ 1".into()));
        }
        check_dim(frames * dim, values.len())?;
        Ok(Self {
            prompt_id: prompt_id.into(),
            sample_index,
            seed,
            frames,
            dim,
            values,
        })
    }

    pub fn from_frames(
        prompt_id: impl Into<String>,
        sample_index: usize,
        seed: u64,
        frames: &[Vec<f64>],
    ) -> Result<Self> {
        let dim = frames.first().map(Vec::len).unwrap_or(0);
        let mut values = Vec::with_capacity(frames.len() * dim);
        for f in frames {
            check_dim(dim, f.len())?;
            values.extend_from_slice(f);
        }
        Self::from_flat(prompt_id, sample_index, seed, frames.len(), dim, values)
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frame_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn to_frames(&self) -> Vec<Vec<f64>> {
        self.frame_iter().map(<[f64]>::to_vec).collect()
    }
}
