//! Human-baseline experiment: question pools, session plans, the answer
//! log and scoring with attention-check exclusions.

mod lab;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

pub use lab::{Ack, Clock, Event, Lab, ManualClock, QuestionView, SystemClock};

use crate::error::{Error, Result, SessionError};
use crate::render::{RenderOptions, Renderer};
use crate::seed::{self, derive_seed};
use crate::taskgen::{generate_instance, TaskInstance, TaskSpec, Vocabulary};
use crate::topology::{Topology, TopologyKind};

pub const REGULAR_PER_SESSION: usize = 10;
pub const TIME_BUDGET_SECS: u64 = 30 * 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Square,
    Ring,
    Hexagon,
    Triangle,
}

impl Structure {
    /// Column order of the results table.
    pub const ALL: [Structure; 4] = [Structure::Square, Structure::Ring, Structure::Hexagon, Structure::Triangle];

    pub fn title(self) -> &'static str {
        match self {
            Structure::Square => "Square",
            Structure::Ring => "Ring",
            Structure::Hexagon => "Hexagon",
            Structure::Triangle => "Triangle",
        }
    }

    pub fn of(kind: TopologyKind) -> Option<Structure> {
        match kind {
            TopologyKind::Square => Some(Structure::Square),
            TopologyKind::Ring => Some(Structure::Ring),
            TopologyKind::Hexagon => Some(Structure::Hexagon),
            TopologyKind::Triangle => Some(Structure::Triangle),
            _ => None,
        }
    }
}

/// Lowercases and drops the standalone words "a", "an" and "the".
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .filter(|w| !matches!(w.as_str(), "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolQuestion {
    pub id: String,
    pub structure: Structure,
    pub attention: bool,
    pub prompt: String,
    pub ground_truth: Vec<String>,
}

impl PoolQuestion {
    pub fn from_instance(inst: &TaskInstance, attention: bool, renderer: &Renderer) -> Result<Self> {
        let structure = Structure::of(inst.topology().kind()).ok_or_else(|| {
            SessionError::Pool(format!("{} is not a square, ring, hexagon or triangle question", inst.id))
        })?;
        let prompt = match &inst.prompt {
            Some(p) => p.question.clone(),
            None => renderer.question(inst, &RenderOptions::default())?,
        };
        Ok(PoolQuestion { id: inst.id.clone(), structure, attention, prompt, ground_truth: inst.ground_truth.clone() })
    }

    /// Exact match after normalization; multi-answer questions compare the
    /// comma-separated response as a set.
    pub fn is_correct(&self, response: &str) -> bool {
        if self.ground_truth.len() == 1 {
            return normalize(response) == normalize(&self.ground_truth[0]);
        }
        let got: std::collections::BTreeSet<String> =
            response.split(',').map(normalize).filter(|s| !s.is_empty()).collect();
        let want: std::collections::BTreeSet<String> = self.ground_truth.iter().map(|s| normalize(s)).collect();
        got == want
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPool {
    pub questions: Vec<PoolQuestion>,
}

impl QuestionPool {
    pub fn new(questions: Vec<PoolQuestion>) -> Result<Self> {
        let pool = QuestionPool { questions };
        pool.validate()?;
        Ok(pool)
    }

    /// At least ten regular questions and an attention check for every
    /// structure; ids unique.
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for q in &self.questions {
            if !ids.insert(q.id.as_str()) {
                return Err(SessionError::Pool(format!("duplicate question id {}", q.id)).into());
            }
            if q.ground_truth.is_empty() {
                return Err(SessionError::Pool(format!("question {} has no answer", q.id)).into());
            }
        }
        let regular = self.questions.iter().filter(|q| !q.attention).count();
        if regular < REGULAR_PER_SESSION {
            return Err(SessionError::Pool(format!("{regular} regular questions, need {REGULAR_PER_SESSION}")).into());
        }
        for s in Structure::ALL {
            if !self.questions.iter().any(|q| q.attention && q.structure == s) {
                return Err(SessionError::Pool(format!("no {} attention check", s.title())).into());
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&PoolQuestion> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let pool: QuestionPool = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        pool.validate()?;
        Ok(pool)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Twenty 8-step loop-closure questions on each of the 3x3 square, size-2
    /// hexagon, size-3 triangle and 12-ring, plus one attention check on each
    /// of the 2x2 square, size-1 hexagon, size-2 triangle and 5-ring.
    pub fn standard(vocab: &Vocabulary, seed: u64) -> Result<Self> {
        let renderer = Renderer::default();
        let regular = [
            (Topology::Square { rows: 3, cols: 3 }, 8),
            (Topology::Hexagon { size: 2 }, 8),
            (Topology::Triangle { size: 3 }, 8),
            (Topology::Ring { n: 12 }, 12),
        ];
        let attention = [
            (Topology::Square { rows: 2, cols: 2 }, 4),
            (Topology::Hexagon { size: 1 }, 6),
            (Topology::Triangle { size: 2 }, 3),
            (Topology::Ring { n: 5 }, 5),
        ];
        let mut questions = Vec::new();
        for (set, specs, per) in [("regular", &regular[..], 20), ("attention", &attention[..], 1)] {
            for &(topology, steps) in specs {
                let spec = TaskSpec::LoopClosure { topology, steps };
                for i in 0..per {
                    let s = derive_seed(derive_seed(seed, set, 0), &spec.slug(), i as u64);
                    let id = format!("{}-{}-{i:02}", if set == "attention" { "check" } else { "q" }, spec.slug());
                    let inst = generate_instance(&spec, vocab, s, id)?;
                    questions.push(PoolQuestion::from_instance(&inst, set == "attention", &renderer)?);
                }
            }
        }
        Self::new(questions)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedQuestion {
    pub question_id: String,
    pub attention: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub seed: u64,
    pub questions: Vec<PlannedQuestion>,
    pub time_budget_secs: u64,
    /// Milliseconds since the Unix epoch.
    pub created_at_ms: u64,
}

impl SessionPlan {
    pub fn attention_checks(&self) -> usize {
        self.questions.iter().filter(|q| q.attention).count()
    }

    pub fn deadline_ms(&self) -> u64 {
        self.created_at_ms + self.time_budget_secs * 1000
    }
}

/// Ten regular questions drawn without replacement plus one attention check
/// per structure, shuffled together.
pub fn create_session(pool: &QuestionPool, seed: u64, created_at_ms: u64) -> Result<SessionPlan> {
    pool.validate()?;
    let mut rng = seed::rng(derive_seed(seed, "session", 0));
    let regular: Vec<&PoolQuestion> = pool.questions.iter().filter(|q| !q.attention).collect();
    let mut picked: Vec<&PoolQuestion> = regular.choose_multiple(&mut rng, REGULAR_PER_SESSION).copied().collect();
    for s in Structure::ALL {
        let checks: Vec<&PoolQuestion> = pool.questions.iter().filter(|q| q.attention && q.structure == s).collect();
        picked.push(checks.choose(&mut rng).expect("validated pool has a check per structure"));
    }
    picked.shuffle(&mut rng);
    Ok(SessionPlan {
        session_id: format!("s{:016x}", derive_seed(seed, "session-id", 0)),
        seed,
        questions: picked
            .into_iter()
            .map(|q| PlannedQuestion { question_id: q.id.clone(), attention: q.attention })
            .collect(),
        time_budget_secs: TIME_BUDGET_SECS,
        created_at_ms,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub record_id: u64,
    pub session_id: String,
    pub question_id: String,
    pub raw_answer: String,
    pub normalized: String,
    pub elapsed_ms: u64,
    pub attention: bool,
    pub submitted_at_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Exclude participants with two or more wrong attention checks.
    MaxOneAttentionError,
    /// Exclude participants who miss the square attention check.
    SquareCheckMustPass,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::MaxOneAttentionError => "max_one_attention_error",
            Criterion::SquareCheckMustPass => "square_check_must_pass",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max_one_attention_error" => Ok(Criterion::MaxOneAttentionError),
            "square_check_must_pass" => Ok(Criterion::SquareCheckMustPass),
            _ => Err(Error::Config(format!("unknown criterion {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanScores {
    pub criterion: Criterion,
    pub per_structure: BTreeMap<Structure, Tally>,
    pub aggregate: Tally,
    pub sessions: usize,
    pub excluded: Vec<String>,
    /// Sessions left out because they were not finished.
    pub incomplete: Vec<String>,
}

impl HumanScores {
    pub fn accuracy(&self, s: Structure) -> Option<f64> {
        self.per_structure.get(&s).and_then(Tally::accuracy)
    }

    pub fn retained(&self) -> usize {
        self.sessions - self.excluded.len() - self.incomplete.len()
    }

    pub fn to_csv(&self) -> String {
        let cell = |a: Option<f64>| a.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        let titles: Vec<&str> = Structure::ALL.iter().map(|s| s.title()).collect();
        let values: Vec<String> = Structure::ALL.iter().map(|&s| cell(self.accuracy(s))).collect();
        format!(
            ",{},Aggregated\nHuman,{},{}\n",
            titles.join(","),
            values.join(","),
            cell(self.aggregate.accuracy())
        )
    }
}

/// Scores complete sessions after applying the exclusion criterion.
pub fn score_humans(
    pool: &QuestionPool,
    sessions: &[(SessionPlan, Vec<ResponseRecord>)],
    criterion: Criterion,
) -> Result<HumanScores> {
    if sessions.is_empty() {
        return Err(Error::Analysis("no sessions to score".into()));
    }
    let mut scores = HumanScores {
        criterion,
        per_structure: Structure::ALL.iter().map(|&s| (s, Tally::default())).collect(),
        aggregate: Tally::default(),
        sessions: sessions.len(),
        excluded: Vec::new(),
        incomplete: Vec::new(),
    };
    for (plan, responses) in sessions {
        let answered: BTreeMap<&str, &ResponseRecord> =
            responses.iter().map(|r| (r.question_id.as_str(), r)).collect();
        if plan.questions.iter().any(|q| !answered.contains_key(q.question_id.as_str())) {
            scores.incomplete.push(plan.session_id.clone());
            continue;
        }
        let mut graded = Vec::with_capacity(plan.questions.len());
        for q in &plan.questions {
            let question = pool
                .get(&q.question_id)
                .ok_or_else(|| SessionError::UnknownQuestion(q.question_id.clone()))?;
            graded.push((question, question.is_correct(&answered[q.question_id.as_str()].raw_answer)));
        }
        let failed_checks: Vec<Structure> =
            graded.iter().filter(|(q, ok)| q.attention && !ok).map(|(q, _)| q.structure).collect();
        let exclude = match criterion {
            Criterion::MaxOneAttentionError => failed_checks.len() > 1,
            Criterion::SquareCheckMustPass => failed_checks.contains(&Structure::Square),
        };
        if exclude {
            scores.excluded.push(plan.session_id.clone());
            continue;
        }
        for (q, ok) in graded.into_iter().filter(|(q, _)| !q.attention) {
            let t = scores.per_structure.entry(q.structure).or_default();
            t.total += 1;
            t.correct += usize::from(ok);
            scores.aggregate.total += 1;
            scores.aggregate.correct += usize::from(ok);
        }
    }
    Ok(scores)
}
