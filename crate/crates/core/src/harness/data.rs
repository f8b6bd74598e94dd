use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::DataConfig;
use crate::error::{Error, Result};
use crate::flow::{euler_sample, SequenceSample, VectorField};
use crate::pool::{Pool, Prompt};
use crate::prompting::{extend_condition, PROMPT_DIM};
use crate::seed;

/// Frame patterns of condition `c`, in visiting order.
///
/// Every pattern is `±e_a + s·e_j` for the condition's anchor dimension `a`:
/// first `s = −1` for every other dimension, then `s = +1` for the next few
/// dimensions so that no two conditions share a pattern direction.
fn patterns(dim: usize, c: usize) -> Vec<Vec<f64>> {
    let a = c % dim;
    let anchor = if (c / dim).is_multiple_of(2) { 1.0 } else { -1.0 };
    let positive = (dim - 1) / 2 + usize::from(dim.is_multiple_of(2) && a < dim / 2);
    let offsets = (1..dim).map(|o| (o, -1.0)).chain((1..=positive).map(|o| (o, 1.0)));
    offsets
        .map(|(o, s)| {
            let mut p = vec![0.0; dim];
            p[a] = anchor;
            p[(a + o) % dim] = s;
            p
        })
        .collect()
}

/// Noise-free frames of condition `c`: each pattern is held for
/// `periods[c mod len]` frames before the next one starts.
pub fn template(cfg: &DataConfig, c: usize) -> Vec<Vec<f64>> {
    let pats = patterns(cfg.dim, c);
    let hold = cfg.periods[c % cfg.periods.len()];
    (0..cfg.frames)
        .map(|t| pats[(t / hold) % pats.len()].iter().map(|v| cfg.amplitude * v).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetItem {
    pub split: String,
    pub condition: usize,
    pub sample: SequenceSample,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<DatasetItem>,
    pub heldout: Vec<DatasetItem>,
}

impl Dataset {
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        for item in self.train.iter().chain(&self.heldout) {
            serde_json::to_writer(&mut out, item).expect("in-memory write");
            out.push(b'\n');
        }
        String::from_utf8(out).expect("json is utf-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut ds = Dataset::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let item: DatasetItem =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            match item.split.as_str() {
                "train" => ds.train.push(item),
                "heldout" => ds.heldout.push(item),
                other => return Err(Error::parse(i + 1, format!("unknown split `{other}`"))),
            }
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }

    /// `(z1, cond)` pairs with a zero reward-prompt extension.
    pub fn training_pairs(&self, cfg: &DataConfig, heldout: bool) -> Vec<(Vec<f64>, Vec<f64>)> {
        let items = if heldout { &self.heldout } else { &self.train };
        items
            .iter()
            .map(|it| (it.sample.values.clone(), condition_vector(cfg, it.condition, &[0.0; PROMPT_DIM])))
            .collect()
    }
}

/// Shared artifact directions, each scaled to unit root-mean-square.
fn artifact_directions(cfg: &DataConfig, seed: u64) -> Vec<Vec<f64>> {
    let n = cfg.sample_dim();
    (0..cfg.artifacts)
        .map(|k| {
            let mut rng = seed::rng(seed::derive_seed(seed, &["artifact", &k.to_string()]));
            let mut v = seed::standard_normal_vec(&mut rng, n);
            let rms = (v.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
            v.iter_mut().for_each(|x| *x /= rms);
            v
        })
        .collect()
}

fn split(
    cfg: &DataConfig,
    name: &str,
    per_condition: usize,
    artifacts: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<DatasetItem>> {
    let mut items = Vec::with_capacity(cfg.conditions * per_condition);
    for c in 0..cfg.conditions {
        let flat: Vec<f64> = template(cfg, c).concat();
        for i in 0..per_condition {
            let s = seed::derive_seed(seed, &["data", name, &c.to_string(), &i.to_string()]);
            let mut rng = seed::rng(s);
            let level = cfg.noise * (1.0 + cfg.noise_spread * (2.0 * rng.random::<f64>() - 1.0));
            let noise = seed::standard_normal_vec(&mut rng, flat.len());
            let mut values: Vec<f64> = flat.iter().zip(noise).map(|(x, n)| x + level * n).collect();
            for dir in artifacts {
                let a = cfg.artifact_scale * seed::standard_normal_vec(&mut rng, 1)[0];
                values.iter_mut().zip(dir).for_each(|(v, d)| *v += a * d);
            }
            items.push(DatasetItem {
                split: name.to_string(),
                condition: c,
                sample: SequenceSample::from_flat(format!("d{c:03}"), i, s, cfg.frames, cfg.dim, values)?,
            });
        }
    }
    Ok(items)
}

/// Noisy template samples for every condition, training and held-out splits.
pub fn generate_dataset(cfg: &DataConfig, seed: u64) -> Result<Dataset> {
    if cfg.conditions < 2 {
        return Err(Error::InvalidArgument("need at least two conditions".into()));
    }
    cfg.validate()?;
    let artifacts = artifact_directions(cfg, seed);
    Ok(Dataset {
        train: split(cfg, "train", cfg.train_per_condition, &artifacts, seed)?,
        heldout: split(cfg, "heldout", cfg.heldout_per_condition, &artifacts, seed)?,
    })
}

/// One-hot encoding of `condition` followed by the prompt extension.
pub fn condition_vector(cfg: &DataConfig, condition: usize, extension: &[f64; PROMPT_DIM]) -> Vec<f64> {
    let mut one_hot = vec![0.0; cfg.conditions];
    one_hot[condition] = 1.0;
    extend_condition(&one_hot, extension)
}

/// `k` samples per prompt, sample `i` of prompt `p` seeded from `(seed, p, i)`.
pub fn gen_pool(
    model: &impl VectorField,
    prompts: &[Prompt],
    cfg: &DataConfig,
    k: usize,
    euler_steps: usize,
    seed: u64,
) -> Result<Pool> {
    if k < 2 {
        return Err(Error::InvalidArgument("pool needs k ≥ 2".into()));
    }
    let mut pool = Pool::default();
    for p in prompts {
        let cond = condition_vector(cfg, p.condition, &[0.0; PROMPT_DIM]);
        for i in 0..k {
            let s = seed::derive_seed(seed, &["pool", &p.id, &i.to_string()]);
            let sample = euler_sample(model, &cond, euler_steps, s, cfg.frames, &p.id, i)?;
            pool.insert(p, sample);
        }
    }
    Ok(pool)
}
