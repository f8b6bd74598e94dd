#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use flowdpo::dpo::{fm_dpo_loss_and_grad, fm_regularized_dpo_loss, DpoBatchItem};
use flowdpo::flow::{draw_fm_points, fm_loss_grad_on, fm_loss_on, FmPoint, ModelConfig, SequenceSample, VectorFieldModel};
use flowdpo::harness::ExperimentConfig;
use flowdpo::metrics::{PreferenceRecord, Vote};
use flowdpo::pairing::{PercentileConfig, PreferenceTriplet, ThresholdSet};
use flowdpo::pool::SampleKey;
use flowdpo::reward::{Axis, RewardTable, RewardVector};
use flowdpo::seed;
use rand::Rng;

pub const SAMPLE_DIM: usize = 4;
pub const COND_DIM: usize = 2;
pub const FD_STEP: f64 = 1e-5;

/// A tanh MLP with 304 parameters.
pub fn small_model(seed: u64) -> VectorFieldModel {
    let cfg = ModelConfig {
        hidden: vec![12, 12],
        disconnected_cond_inputs: 0,
    };
    VectorFieldModel::init(SAMPLE_DIM, COND_DIM, &cfg, seed).unwrap()
}

/// Perturbs every parameter so that two models differ everywhere.
pub fn jitter(model: &VectorFieldModel, seed: u64, scale: f64) -> VectorFieldModel {
    let mut rng = seed::rng(seed);
    let mut m = model.clone();
    for i in 0..m.param_count() {
        let v = m.param(i) + scale * (2.0 * rng.random::<f64>() - 1.0);
        m.set_param(i, v);
    }
    m
}

fn normal(rng: &mut seed::Rng, n: usize) -> Vec<f64> {
    seed::standard_normal_vec(rng, n)
}

pub fn fm_points(seed_: u64, n: usize) -> Vec<FmPoint> {
    let mut rng = seed::rng(seed_);
    let batch: Vec<(Vec<f64>, Vec<f64>)> =
        (0..n).map(|_| (normal(&mut rng, SAMPLE_DIM), normal(&mut rng, COND_DIM))).collect();
    draw_fm_points(&batch, seed_ ^ 0x5eed).unwrap()
}

pub fn dpo_batch(seed_: u64, n: usize) -> Vec<DpoBatchItem> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|i| {
            let w = SequenceSample::from_flat("p", 2 * i, 0, 1, SAMPLE_DIM, normal(&mut rng, SAMPLE_DIM)).unwrap();
            let l = SequenceSample::from_flat("p", 2 * i + 1, 0, 1, SAMPLE_DIM, normal(&mut rng, SAMPLE_DIM)).unwrap();
            let cond = normal(&mut rng, COND_DIM);
            let t = rng.random::<f64>();
            let (nw, nl) = (normal(&mut rng, SAMPLE_DIM), normal(&mut rng, SAMPLE_DIM));
            DpoBatchItem::new(w, l, cond, t, nw, nl).unwrap()
        })
        .collect()
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between `grad` and central differences of `loss`.
pub fn fd_audit(model: &VectorFieldModel, grad: &[f64], loss: impl Fn(&VectorFieldModel) -> f64) -> f64 {
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..m.param_count() {
        let x = m.param(i);
        m.set_param(i, x + FD_STEP);
        let up = loss(&m);
        m.set_param(i, x - FD_STEP);
        let down = loss(&m);
        m.set_param(i, x);
        worst = worst.max(rel_err(grad[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

pub fn fm_grad_error(seed_: u64) -> f64 {
    let model = small_model(seed_);
    let points = fm_points(seed_ + 100, 6);
    let grad = fm_loss_grad_on(&model, &points).unwrap().flat();
    fd_audit(&model, &grad, |m| fm_loss_on(m, &points).unwrap())
}

pub fn dpo_grad_error(seed_: u64, beta: f64, weight: f64) -> f64 {
    let reference = small_model(seed_);
    let theta = jitter(&reference, seed_ + 7, 0.05);
    let batch = dpo_batch(seed_ + 200, 5);
    let grad = fm_dpo_loss_and_grad(&theta, &reference, &batch, beta, weight).unwrap().1.flat();
    fd_audit(&theta, &grad, |m| fm_regularized_dpo_loss(m, &reference, &batch, beta, weight).unwrap())
}

/// Random complete table with rewards correlated across axes through a
/// per-sample latent; `coarse` rounds rewards so that ties occur.
pub fn random_table(seed_: u64, prompts: usize, k: usize, coarse: bool) -> RewardTable {
    let mut rng = seed::rng(seed_);
    let mut t = RewardTable::default();
    for p in 0..prompts {
        for i in 0..k {
            let latent = rng.random::<f64>();
            let mut cell = |lo: f64, hi: f64, step: f64| {
                let v = lo + (hi - lo) * (0.7 * latent + 0.3 * rng.random::<f64>());
                if coarse {
                    ((v / step).round() * step).clamp(lo, hi)
                } else {
                    v
                }
            };
            let r = RewardVector::new(cell(-1.0, 1.0, 0.25), cell(1.0, 10.0, 1.0), cell(-2.0, 0.0, 0.25)).unwrap();
            t.insert(SampleKey::new(format!("p{p:03}"), i), r);
        }
    }
    t
}

/// Smallest value with at least `p` percent of the values at or below it.
pub fn nearest_rank(values: &[f64], p: f64) -> f64 {
    let n = values.len() as f64;
    let mut candidates = values.to_vec();
    candidates.sort_by(f64::total_cmp);
    for v in &candidates {
        let at_or_below = values.iter().filter(|x| *x <= v).count() as f64;
        if at_or_below * 100.0 >= p * n {
            return *v;
        }
    }
    unreachable!("the maximum covers every percentile")
}

pub fn brute_thresholds(table: &RewardTable, p: &PercentileConfig) -> ThresholdSet {
    let rows: Vec<(String, usize, [f64; 3])> = table
        .by_prompt()
        .into_iter()
        .flat_map(|(prompt, rs)| rs.into_iter().map(move |(i, r)| (prompt.to_string(), i, r.as_array())))
        .collect();
    let mut out = ThresholdSet {
        primary: [0.0; 3],
        secondary: [0.0; 3],
        floor: [0.0; 3],
        semantic_ceiling: 0.0,
    };
    for a in 0..3 {
        let mut diffs = Vec::new();
        for (x, (px, ix, rx)) in rows.iter().enumerate() {
            for (py, iy, ry) in &rows[x + 1..] {
                if px == py && ix != iy {
                    diffs.push((rx[a] - ry[a]).abs());
                }
            }
        }
        let raw: Vec<f64> = rows.iter().map(|r| r.2[a]).collect();
        out.primary[a] = nearest_rank(&diffs, p.primary);
        out.secondary[a] = nearest_rank(&diffs, p.secondary);
        out.floor[a] = nearest_rank(&raw, p.floor);
        if a == 2 {
            out.semantic_ceiling = nearest_rank(&raw, p.semantic_ceiling);
        }
    }
    out
}

pub type PairKey = (String, usize, usize, Axis);

/// Every ordered pair of each prompt tested against every axis.
pub fn brute_mrsd(table: &RewardTable, th: &ThresholdSet) -> BTreeSet<PairKey> {
    let mut out = BTreeSet::new();
    let ok_floor = |r: &[f64; 3]| (0..3).all(|a| r[a] >= th.floor[a]);
    for (prompt, rows) in table.by_prompt() {
        for (wi, w) in &rows {
            for (li, l) in &rows {
                let (w, l) = (w.as_array(), l.as_array());
                if wi == li || !ok_floor(&w) || !ok_floor(&l) || w[2] > th.semantic_ceiling {
                    continue;
                }
                let d: Vec<f64> = (0..3).map(|a| w[a] - l[a]).collect();
                for (primary, axis) in Axis::ALL.into_iter().enumerate() {
                    let wins = (0..3).all(|a| {
                        let need = if a == primary { th.primary[a] } else { th.secondary[a] };
                        d[a] > need
                    });
                    if wins {
                        out.insert((prompt.to_string(), *wi, *li, axis));
                    }
                }
            }
        }
    }
    out
}

pub fn pair_key(t: &PreferenceTriplet) -> PairKey {
    (t.prompt_id.clone(), t.winner_index, t.loser_index, t.primary_axis)
}

/// 100 items of 5 votes, each vote A with probability 0.6 and B otherwise.
pub fn simulated_votes(seed_: u64) -> Vec<PreferenceRecord> {
    let mut rng = seed::rng(seed_);
    (0..100)
        .map(|i| PreferenceRecord {
            item_id: format!("i{i}"),
            votes: (0..5).map(|_| if rng.random::<f64>() < 0.6 { Vote::A } else { Vote::B }).collect(),
        })
        .collect()
}

/// Unit impulses every `60/bpm` seconds.
pub fn click_track(seconds: f64, bpm: f64, frame_rate: f64) -> Vec<f64> {
    let n = (seconds * frame_rate).round() as usize;
    let period = 60.0 * frame_rate / bpm;
    let mut env = vec![0.0; n];
    let mut k = 0.0;
    while (k * period).round() < n as f64 {
        env[(k * period).round() as usize] = 1.0;
        k += 1.0;
    }
    env
}

pub fn gaussian_set(n: usize, mean: &[f64], seed_: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|_| normal(&mut rng, mean.len()).iter().zip(mean).map(|(z, m)| z + m).collect())
        .collect()
}

/// A configuration small enough to run the whole pipeline in seconds.
pub fn tiny_config(seed_: u64) -> ExperimentConfig {
    let text = format!(
        r#"
seed = {seed_}
[data]
conditions = 3
dim = 4
noise = 0.1
artifacts = 1
artifact_scale = 0.3
train_per_condition = 8
heldout_per_condition = 2
[model]
hidden = [32, 32]
[training]
steps = 400
learning_rate = 3e-3
batch_size = 8
[rewards]
codebook_size = 16
[pool]
prompts = 4
k = 6
euler_steps = 8
[pairing]
r = 5
[pairing.percentiles]
primary = 50.0
secondary = 0.0
floor = 0.0
semantic_ceiling = 100.0
[dpo]
epochs = 2
batch_size = 4
warmup_steps = 1
[eval]
prompts = 3
samples_per_prompt = 2
euler_steps = 8
resamples = 50
"#
    );
    ExperimentConfig::from_toml_str(&text).unwrap()
}

/// Relative paths and contents of every file under `dir`, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
