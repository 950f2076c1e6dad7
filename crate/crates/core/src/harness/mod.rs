//! Running agents over instance files, answer extraction and scoring.

mod agents;
mod extract;
mod remote;
mod score;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use agents::Reference;
pub use extract::{extract_answer, extract_answer_items, format_answer, is_correct, KEYWORD};
pub use remote::{complete_with_retries, ChatClient, HttpChatClient, RemoteConfig};
pub use score::{family_of, mean_and_se, score_by, score_csv, AccuracyTable, GroupScore, SCORE_HEADER};

use crate::error::{Error, Result};
use crate::seed::{self, derive_seed};
use crate::taskgen::{AnswerMode, TaskInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentConfig {
    RemoteChat(RemoteConfig),
    Oracle,
    UniformRandom { seed: u64 },
    TemporalBiased { seed: u64, strength: f64 },
    SpatialBiased { seed: u64, strength: f64 },
    StartBiased { seed: u64, strength: f64 },
}

impl AgentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AgentConfig::RemoteChat(_) => "remote_chat",
            AgentConfig::Oracle => "oracle",
            AgentConfig::UniformRandom { .. } => "uniform_random",
            AgentConfig::TemporalBiased { .. } => "temporal_biased",
            AgentConfig::SpatialBiased { .. } => "spatial_biased",
            AgentConfig::StartBiased { .. } => "start_biased",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AgentConfig::TemporalBiased { strength, .. }
            | AgentConfig::SpatialBiased { strength, .. }
            | AgentConfig::StartBiased { strength, .. }
                if !(0.0..=1.0).contains(&strength) =>
            {
                Err(Error::Config(format!("bias strength {strength} outside [0, 1]")))
            }
            AgentConfig::RemoteChat(ref r) if r.parallelism == 0 => {
                Err(Error::Config("parallelism must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn reference(&self) -> Option<(Reference, u64)> {
        Some(match *self {
            AgentConfig::RemoteChat(_) => return None,
            AgentConfig::Oracle => (Reference::Oracle, 0),
            AgentConfig::UniformRandom { seed } => (Reference::Uniform, seed),
            AgentConfig::TemporalBiased { seed, strength } => (Reference::Temporal(strength), seed),
            AgentConfig::SpatialBiased { seed, strength } => (Reference::Spatial(strength), seed),
            AgentConfig::StartBiased { seed, strength } => (Reference::Start(strength), seed),
        })
    }
}

/// One response joined with its instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub instance_id: String,
    pub run: u32,
    pub raw_response: String,
    /// Sorted answer set, or the answer items in order for ordered tasks.
    pub extracted: Vec<String>,
    pub correct: bool,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn new(inst: &TaskInstance, run: u32, raw: String, latency_ms: u64, error: Option<String>) -> Self {
        let extracted = match inst.answer_mode {
            AnswerMode::Set => extract_answer(&raw).into_iter().collect(),
            AnswerMode::Ordered => extract_answer_items(&raw),
        };
        let correct = error.is_none() && is_correct(inst, &raw);
        EvalRecord { instance_id: inst.id.clone(), run, raw_response: raw, extracted, correct, latency_ms, error }
    }
}

/// Runs `config` over `instances` `runs` times. Records come out run by
/// run, in instance order.
pub fn run_agent(config: &AgentConfig, instances: &[TaskInstance], runs: u32) -> Result<Vec<EvalRecord>> {
    config.validate()?;
    match config {
        AgentConfig::RemoteChat(remote) => {
            let client = HttpChatClient::new(remote.clone())?;
            run_remote(&client, remote, instances, runs)
        }
        _ => {
            let (agent, seed) = config.reference().expect("non-remote agent");
            let mut out = Vec::with_capacity(instances.len() * runs as usize);
            for run in 0..runs {
                let run_seed = derive_seed(seed, "run", run as u64);
                for (i, inst) in instances.iter().enumerate() {
                    let mut rng = seed::rng(derive_seed(run_seed, "instance", i as u64));
                    let raw = format_answer(&agent.answer(inst, &mut rng)?);
                    out.push(EvalRecord::new(inst, run, raw, 0, None));
                }
            }
            Ok(out)
        }
    }
}

/// Remote evaluation with bounded parallelism. Failed calls become records
/// with an empty answer and an error message.
pub fn run_remote(
    client: &dyn ChatClient,
    config: &RemoteConfig,
    instances: &[TaskInstance],
    runs: u32,
) -> Result<Vec<EvalRecord>> {
    let prompts = instances
        .iter()
        .map(|inst| {
            inst.prompt.as_ref().ok_or_else(|| Error::Config(format!("instance {} has no rendered prompt", inst.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let total = instances.len() * runs as usize;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<EvalRecord>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|scope| {
        for _ in 0..config.parallelism.max(1).min(total.max(1)) {
            scope.spawn(|| loop {
                let job = next.fetch_add(1, Ordering::Relaxed);
                if job >= total {
                    break;
                }
                let (run, i) = (job / instances.len(), job % instances.len());
                let prompt = prompts[i];
                let began = Instant::now();
                let result = complete_with_retries(
                    client,
                    &prompt.system_prompt,
                    &prompt.user_prompt,
                    config.max_retries,
                    config.retry_backoff_ms,
                );
                let latency = began.elapsed().as_millis() as u64;
                let record = match result {
                    Ok(text) => EvalRecord::new(&instances[i], run as u32, text, latency, None),
                    Err(e) => EvalRecord::new(&instances[i], run as u32, String::new(), latency, Some(e)),
                };
                slots.lock().expect("no worker panics while holding the lock")[job] = Some(record);
            });
        }
    });
    Ok(slots.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every job ran")).collect())
}
