use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::data::{condition_vector, gen_pool, generate_dataset, template, Dataset};
use crate::dpo::{dpo_finetune, PreferenceExample};
use crate::error::{Error, Result};
use crate::flow::{load_checkpoint, save_checkpoint, train_reference, VectorFieldModel};
use crate::metrics::{net_win_rate_bootstrap, reward_report, EvalPrompt, PreferenceRecord, Report, Vote};
use crate::pairing::{emit_triplets, load_triplets, margin_thresholds, mrsd_pairs, TripletFile};
use crate::pool::{Pool, Prompt};
use crate::prompting::{build_inference_prompt, build_training_prompt, winner_table, PromptStats};
use crate::reward::{
    kmeans_fit, load_reward_table, score_pool, Axis, FeatureMap, Projection, RewardModels,
    RewardVector,
};
use crate::seed;

/// File names inside the output directory.
pub mod artifacts {
    pub const DATASET: &str = "dataset.jsonl";
    pub const REFERENCE: &str = "reference.ckpt";
    pub const TRAIN_LOG: &str = "train_ref.log";
    pub const POOL: &str = "pool.jsonl";
    pub const REWARD_MODELS: &str = "reward_models.json";
    pub const REWARDS: &str = "rewards.jsonl";
    pub const THRESHOLDS: &str = "thresholds.json";
    pub const TRIPLETS: &str = "triplets.txt";
    pub const FINETUNED: &str = "finetuned.ckpt";
    pub const DPO_LOG: &str = "dpo.log";
    pub const REPORT_REFERENCE: &str = "report_reference.txt";
    pub const REPORT_FINETUNED: &str = "report_finetuned.txt";
    pub const NET_WIN: &str = "net_win.txt";
    pub const CACHE_DIR: &str = "cache";
}

use artifacts::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Data,
    TrainRef,
    GenPool,
    Score,
    Pair,
    Dpo,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Data,
        Stage::TrainRef,
        Stage::GenPool,
        Stage::Score,
        Stage::Pair,
        Stage::Dpo,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Data => "data",
            Stage::TrainRef => "train-ref",
            Stage::GenPool => "gen-pool",
            Stage::Score => "score",
            Stage::Pair => "pair",
            Stage::Dpo => "dpo",
            Stage::Eval => "eval",
        }
    }

    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Stage::Data => &[],
            Stage::TrainRef => &[DATASET],
            Stage::GenPool => &[REFERENCE],
            Stage::Score => &[DATASET, POOL],
            Stage::Pair => &[REWARDS],
            Stage::Dpo => &[REFERENCE, POOL, TRIPLETS],
            Stage::Eval => &[REFERENCE, FINETUNED, REWARD_MODELS, REWARDS, TRIPLETS],
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Data => &[DATASET],
            Stage::TrainRef => &[REFERENCE, TRAIN_LOG],
            Stage::GenPool => &[POOL],
            Stage::Score => &[REWARD_MODELS, REWARDS],
            Stage::Pair => &[THRESHOLDS, TRIPLETS],
            Stage::Dpo => &[FINETUNED, DPO_LOG],
            Stage::Eval => &[REPORT_REFERENCE, REPORT_FINETUNED, NET_WIN],
        }
    }

    /// Configuration the stage depends on, as canonical JSON.
    fn config_json(self, cfg: &ExperimentConfig) -> String {
        fn j(v: &impl Serialize) -> String {
            serde_json::to_string(v).expect("config serialises")
        }
        match self {
            Stage::Data => j(&cfg.data),
            Stage::TrainRef => j(&(&cfg.data, &cfg.model, &cfg.training)),
            Stage::GenPool => j(&(&cfg.data, &cfg.pool)),
            Stage::Score => j(&(&cfg.data, &cfg.rewards)),
            Stage::Pair => j(&(&cfg.pool, &cfg.pairing)),
            Stage::Dpo => j(&(&cfg.data, &cfg.dpo, &cfg.prompting)),
            Stage::Eval => j(&(cfg.hash(), &cfg.data, &cfg.prompting, &cfg.eval)),
        }
    }

    fn seed(self, cfg: &ExperimentConfig) -> u64 {
        seed::derive_seed(cfg.seed, &[self.name()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    Cached,
}

fn read(out: &Path, name: &str) -> Result<Vec<u8>> {
    let path = out.join(name);
    fs::read(&path).map_err(|e| Error::io(path, e))
}

fn write(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn stage_key(stage: Stage, cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(stage.name().as_bytes());
    field(&cfg.seed.to_le_bytes());
    field(stage.config_json(cfg).as_bytes());
    for input in stage.inputs() {
        field(input.as_bytes());
        field(&read(out, input)?);
    }
    Ok(hex::encode(h.finalize()))
}

/// Runs one stage unless its cached key matches and all outputs exist.
pub fn run_stage(stage: Stage, cfg: &ExperimentConfig, out: &Path) -> Result<StageOutcome> {
    let wrap = |e: Error| Error::Stage {
        stage: stage.name(),
        source: Box::new(e),
    };
    cfg.validate().map_err(wrap)?;
    let cache = out.join(CACHE_DIR);
    fs::create_dir_all(&cache).map_err(|e| wrap(Error::io(&cache, e)))?;
    let key = stage_key(stage, cfg, out).map_err(wrap)?;
    let key_path = cache.join(format!("{}.key", stage.name()));
    let cached = fs::read_to_string(&key_path).ok().as_deref() == Some(key.as_str())
        && stage.outputs().iter().all(|o| out.join(o).is_file());
    if cached {
        return Ok(StageOutcome::Cached);
    }
    let _ = fs::remove_file(&key_path);
    execute(stage, cfg, out).map_err(wrap)?;
    fs::write(&key_path, &key).map_err(|e| wrap(Error::io(&key_path, e)))?;
    Ok(StageOutcome::Ran)
}

fn execute(stage: Stage, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let seed = stage.seed(cfg);
    match stage {
        Stage::Data => generate_dataset(&cfg.data, seed)?.save(&out.join(DATASET)),
        Stage::TrainRef => train_ref(cfg, out),
        Stage::GenPool => {
            let reference = load_checkpoint(&out.join(REFERENCE))?;
            let prompts: Vec<Prompt> = (0..cfg.pool.prompts)
                .map(|i| Prompt {
                    id: format!("p{i:03}"),
                    condition: i % cfg.data.conditions,
                })
                .collect();
            gen_pool(&reference, &prompts, &cfg.data, cfg.pool.k, cfg.pool.euler_steps, seed)?
                .save(&out.join(POOL))
        }
        Stage::Score => score(cfg, out, seed),
        Stage::Pair => pair(cfg, out, seed),
        Stage::Dpo => dpo(cfg, out, seed),
        Stage::Eval => eval(cfg, out, seed),
    }
}

fn train_ref(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = Dataset::load(&out.join(DATASET))?;
    let train = ds.training_pairs(&cfg.data, false);
    let heldout = ds.training_pairs(&cfg.data, true);
    let (model, summary) = train_reference(&cfg.reference_config(), &train, &heldout)?;
    let mut log = format!(
        "# heldout_loss initial={:.16e} final={:.16e}\n",
        summary.initial_heldout_loss, summary.final_heldout_loss
    );
    for (step, loss) in &summary.log {
        writeln!(log, "{step}, {loss:.16e}").unwrap();
    }
    save_checkpoint(&model, &out.join(REFERENCE))?;
    write(out, TRAIN_LOG, log)
}

/// Codebook, feature maps and condition embeddings fitted on the training split.
fn fit_reward_models(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<RewardModels> {
    let feature_map = FeatureMap::Identity;
    let frames: Vec<Vec<f64>> = ds
        .train
        .iter()
        .flat_map(|it| it.sample.frame_iter().map(|f| feature_map.apply(f)).collect::<Vec<_>>())
        .collect::<Result<_>>()?;
    let codebook = kmeans_fit(
        &frames,
        cfg.rewards.codebook_size,
        cfg.rewards.kmeans_iterations,
        seed::derive_seed(seed, &["codebook"]),
        cfg.rewards.temperature,
    )?
    .codebook;
    let dim = cfg.data.dim;
    let text_tower = FeatureMap::Projection(Projection::random(
        dim,
        dim,
        seed::derive_seed(seed, &["text-tower"]),
    ));
    let condition_embeddings = (0..cfg.data.conditions)
        .map(|c| {
            let t = template(&cfg.data, c);
            let mut mean = vec![0.0; dim];
            for f in &t {
                for (m, v) in mean.iter_mut().zip(f) {
                    *m += v / t.len() as f64;
                }
            }
            text_tower.apply(&mean)
        })
        .collect::<Result<_>>()?;
    Ok(RewardModels {
        codebook,
        feature_map,
        text_tower,
        condition_embeddings,
    })
}

fn score(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<()> {
    let ds = Dataset::load(&out.join(DATASET))?;
    let models = fit_reward_models(cfg, &ds, seed)?;
    let pool = Pool::load(&out.join(POOL))?;
    let table = score_pool(&pool, &models, cfg.pool.k)?;
    write(out, REWARD_MODELS, serde_json::to_string(&models).expect("models serialise"))?;
    table.save(&out.join(REWARDS))
}

fn pair(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<()> {
    let table = load_reward_table(&out.join(REWARDS))?;
    table.check_complete(cfg.pool.k)?;
    let thresholds = margin_thresholds(&table, cfg.pool.k, &cfg.pairing.percentiles)?;
    let triplets = mrsd_pairs(&table, &thresholds, cfg.pairing.r, seed);
    let file = TripletFile::new(cfg.pairing.r, seed, triplets).with_stats(PromptStats::from_table(&table)?);
    write(out, THRESHOLDS, serde_json::to_string_pretty(&thresholds).expect("thresholds serialise"))?;
    emit_triplets(&file, &out.join(TRIPLETS))
}

fn dpo(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<()> {
    let reference = load_checkpoint(&out.join(REFERENCE))?;
    let pool = Pool::load(&out.join(POOL))?;
    let file = load_triplets(&out.join(TRIPLETS))?;
    let mode = cfg.prompting.mode;
    let examples = file
        .triplets
        .iter()
        .map(|t| {
            let get = |i: usize| {
                pool.get(&t.prompt_id, i).cloned().ok_or_else(|| {
                    Error::InvalidArgument(format!("triplet refers to missing sample ({}, {i})", t.prompt_id))
                })
            };
            let prompt = pool
                .prompt(&t.prompt_id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown prompt {}", t.prompt_id)))?;
            let ext = build_training_prompt(t, file.stats.as_ref(), mode)?;
            Ok(PreferenceExample {
                winner: get(t.winner_index)?,
                loser: get(t.loser_index)?,
                cond: condition_vector(&cfg.data, prompt.condition, &ext),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (model, log) = if cfg.dpo.epochs == 0 {
        (reference, String::new())
    } else {
        let (m, log) = dpo_finetune(&reference, &examples, &cfg.dpo.dpo_config(seed))?;
        (m, log.to_text())
    };
    save_checkpoint(&model, &out.join(FINETUNED))?;
    write(out, DPO_LOG, log)
}

/// Majority over axes of `a` beating `b`; equal counts are ties.
fn vote(a: &RewardVector, b: &RewardVector) -> Vote {
    let wins = Axis::ALL.iter().filter(|&&x| a.get(x) > b.get(x)).count();
    let losses = Axis::ALL.iter().filter(|&&x| a.get(x) < b.get(x)).count();
    match wins.cmp(&losses) {
        std::cmp::Ordering::Greater => Vote::A,
        std::cmp::Ordering::Less => Vote::B,
        std::cmp::Ordering::Equal if wins > 0 => Vote::TieGood,
        std::cmp::Ordering::Equal => Vote::TieBad,
    }
}

fn eval(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<()> {
    let reference = load_checkpoint(&out.join(REFERENCE))?;
    let finetuned = load_checkpoint(&out.join(FINETUNED))?;
    let models: RewardModels = serde_json::from_slice(&read(out, REWARD_MODELS)?)
        .map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let file = load_triplets(&out.join(TRIPLETS))?;
    let winners = if file.triplets.is_empty() {
        load_reward_table(&out.join(REWARDS))?
    } else {
        winner_table(&file.triplets)
    };
    let ext = build_inference_prompt(&winners, file.stats.as_ref(), cfg.prompting.mode)?;
    let prompts: Vec<EvalPrompt> = (0..cfg.eval.prompts)
        .map(|i| {
            let condition = i % cfg.data.conditions;
            EvalPrompt {
                id: format!("e{i:03}"),
                condition,
                cond: condition_vector(&cfg.data, condition, &ext),
            }
        })
        .collect();
    let metrics = cfg.eval.metrics();
    let evaluate = |model: &VectorFieldModel, reference: Option<&[Vec<f64>]>| {
        reward_report(model, &prompts, &models, &metrics, cfg.data.frames, seed, reference).map(|mut e| {
            e.report.config_hash = cfg.hash();
            e.report.seed = cfg.seed;
            e
        })
    };
    let ref_eval = evaluate(&reference, None)?;
    let ft_eval = evaluate(&finetuned, Some(&ref_eval.features))?;

    let per_prompt = metrics.samples_per_prompt;
    let records: Vec<PreferenceRecord> = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| PreferenceRecord {
            item_id: p.id.clone(),
            votes: (i * per_prompt..(i + 1) * per_prompt)
                .map(|j| vote(&ft_eval.rewards[j], &ref_eval.rewards[j]))
                .collect(),
        })
        .collect();
    let nwr = net_win_rate_bootstrap(&records, metrics.resamples, seed::derive_seed(seed, &["bootstrap"]))?;
    write(out, REPORT_REFERENCE, ref_eval.report.to_text())?;
    write(out, REPORT_FINETUNED, ft_eval.report.to_text())?;
    write(
        out,
        NET_WIN,
        format!(
            "# net_win config={} seed={} resamples={}\nnet_win_rate={:.6}\nci_low={:.6}\nci_high={:.6}\n",
            cfg.hash(),
            cfg.seed,
            metrics.resamples,
            nwr.mean,
            nwr.ci_low,
            nwr.ci_high
        ),
    )
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub stages: Vec<(Stage, StageOutcome)>,
    pub reference: Report,
    pub finetuned: Report,
}

/// Runs every stage in order, then reads back both reports.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<PipelineOutcome> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut stages = Vec::new();
    for stage in Stage::ALL {
        stages.push((stage, run_stage(stage, cfg, out)?));
    }
    let report = |name: &str| -> Result<Report> {
        Report::parse(&String::from_utf8_lossy(&read(out, name)?))
    };
    Ok(PipelineOutcome {
        stages,
        reference: report(REPORT_REFERENCE)?,
        finetuned: report(REPORT_FINETUNED)?,
    })
}
