//! Prompts and the per-prompt sample pools drawn from a generator.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::SequenceSample;

/// A conditioning prompt: an identifier and the discrete condition it asks for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub condition: usize,
}

/// `(prompt_id, sample_index)`, ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub prompt_id: String,
    pub sample_index: usize,
}

impl SampleKey {
    pub fn new(prompt_id: impl Into<String>, sample_index: usize) -> Self {
        Self {
            prompt_id: prompt_id.into(),
            sample_index,
        }
    }
}

/// `k` samples for each of a list of prompts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pool {
    pub prompts: Vec<Prompt>,
    pub samples: BTreeMap<SampleKey, SequenceSample>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolRecord {
    prompt_id: String,
    condition: usize,
    sample_index: usize,
    seed: u64,
    frames: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Pool {
    pub fn insert(&mut self, prompt: &Prompt, sample: SequenceSample) {
        if !self.prompts.iter().any(|p| p.id == prompt.id) {
            self.prompts.push(prompt.clone());
        }
        self.samples
            .insert(SampleKey::new(&sample.prompt_id, sample.sample_index), sample);
    }

    pub fn get(&self, prompt_id: &str, sample_index: usize) -> Option<&SequenceSample> {
        self.samples.get(&SampleKey::new(prompt_id, sample_index))
    }

    pub fn prompt(&self, id: &str) -> Option<&Prompt> {
        self.prompts.iter().find(|p| p.id == id)
    }

    /// Every `(prompt_id, index)` in `0..k` that is absent.
    pub fn missing(&self, k: usize) -> Vec<(String, usize)> {
        let mut missing = Vec::new();
        for p in &self.prompts {
            for i in 0..k {
                if !self.samples.contains_key(&SampleKey::new(&p.id, i)) {
                    missing.push((p.id.clone(), i));
                }
            }
        }
        missing
    }

    pub fn check_complete(&self, k: usize) -> Result<()> {
        let missing = self.missing(k);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompletePool { missing })
        }
    }

    /// One JSON record per sample, in key order.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        for (key, s) in &self.samples {
            let condition = self.prompt(&key.prompt_id).map(|p| p.condition).unwrap_or(0);
            let rec = PoolRecord {
                prompt_id: s.prompt_id.clone(),
                condition,
                sample_index: s.sample_index,
                seed: s.seed,
                frames: s.frames,
                dim: s.dim,
                values: s.values.clone(),
            };
            serde_json::to_writer(&mut out, &rec).expect("in-memory write");
            out.push(b'\n');
        }
        String::from_utf8(out).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut pool = Pool::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: PoolRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            let prompt = Prompt {
                id: rec.prompt_id.clone(),
                condition: rec.condition,
            };
            let sample = SequenceSample::from_flat(
                rec.prompt_id,
                rec.sample_index,
                rec.seed,
                rec.frames,
                rec.dim,
                rec.values,
            )
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            pool.insert(&prompt, sample);
        }
        Ok(pool)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}
