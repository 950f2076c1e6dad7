//! Error-distance analyses, Monte-Carlo baselines and the difficulty
//! regression.

mod logistic;

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

pub use logistic::{
    cholesky, cholesky_solve, fit_logistic, log_likelihood, normal_two_sided_p, regression_csv, Coefficient,
    LogisticFit, MAX_ITERATIONS, REGRESSION_HEADER,
};

use crate::error::{Error, Result};
use crate::harness::EvalRecord;
use crate::scalar::Real;
use crate::seed;
use crate::taskgen::{Setting, TaskInstance, TaskKind, World};
use crate::topology::TopologyKind;

/// Distance of a prediction from the ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Distance(u32),
    /// The predicted label is not in the map or narration.
    OffMap,
    /// Not meaningful for this structure (spatial distance on a global ring).
    Excluded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Spatial,
    Temporal,
}

/// Graph distance between the ground-truth location and the predicted object.
pub fn spatial_distance(world: &World, truth: &str, predicted: &str) -> Result<Measure> {
    let target = world
        .node_of(truth)
        .ok_or_else(|| Error::Analysis(format!("ground truth {truth:?} is not on the map")))?;
    Ok(match world.node_of(predicted) {
        Some(node) => Measure::Distance(world.map.shortest_distance(target, node)?),
        None => Measure::OffMap,
    })
}

/// Index difference between the first mentions of the ground truth and the
/// prediction.
pub fn temporal_distance(mentions: &[String], truth: &str, predicted: &str) -> Result<Measure> {
    let first = |label: &str| mentions.iter().position(|m| m == label);
    let t = first(truth).ok_or_else(|| Error::Analysis(format!("ground truth {truth:?} is never mentioned")))?;
    Ok(match first(predicted) {
        Some(p) => Measure::Distance(p.abs_diff(t) as u32),
        None => Measure::OffMap,
    })
}

/// Absolute (row, column) offsets on a square grid.
pub fn axis_distance(world: &World, truth: &str, predicted: &str) -> Result<Option<(u32, u32)>> {
    if world.map.kind() != TopologyKind::Square {
        return Err(Error::Analysis(format!("axis distance needs a square grid, not {}", world.map.kind().name())));
    }
    let cell = |label: &str| world.node_of(label).and_then(|n| world.map.nodes()[n].cell);
    let t = cell(truth).ok_or_else(|| Error::Analysis(format!("ground truth {truth:?} is not on the map")))?;
    Ok(cell(predicted).map(|p| (p.row.abs_diff(t.row), p.col.abs_diff(t.col))))
}

/// One wrong prediction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub instance_id: String,
    pub run: u32,
    pub truth: String,
    pub predicted: String,
    pub spatial: Measure,
    pub temporal: Measure,
    pub predicted_is_start: bool,
    pub setting: Setting,
    pub topology: TopologyKind,
    /// Row and column offsets, square grids only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<(u32, u32)>,
}

/// Wrong predictions plus what was left out.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ErrorSet {
    pub records: Vec<ErrorRecord>,
    pub correct: usize,
    /// Wrong answers with no extracted item.
    pub unanswered: usize,
    /// Wrong answers naming several objects, or on multi-answer questions.
    pub multiple: usize,
    /// Records on tasks without a location answer (size inference).
    pub not_applicable: usize,
}

struct Context {
    world: World,
    mentions: Vec<String>,
    start: Option<String>,
}

/// Joins evaluation records with their instances and measures every wrong
/// single-object prediction.
pub fn error_records(instances: &[TaskInstance], evals: &[EvalRecord]) -> Result<ErrorSet> {
    let by_id: HashMap<&str, &TaskInstance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut contexts: HashMap<&str, Context> = HashMap::new();
    let mut out = ErrorSet::default();
    for rec in evals {
        let inst = *by_id
            .get(rec.instance_id.as_str())
            .ok_or_else(|| Error::Analysis(format!("record for unknown instance {}", rec.instance_id)))?;
        if rec.correct {
            out.correct += 1;
            continue;
        }
        if inst.kind == TaskKind::SizeInference {
            out.not_applicable += 1;
            continue;
        }
        let predicted = match rec.extracted.as_slice() {
            [] => {
                out.unanswered += 1;
                continue;
            }
            [one] if inst.ground_truth.len() == 1 => one.clone(),
            _ => {
                out.multiple += 1;
                continue;
            }
        };
        if !contexts.contains_key(inst.id.as_str()) {
            let world = inst.world()?;
            let start = inst.walk().map(|w| world.label(w.start).to_string());
            contexts.insert(&inst.id, Context { mentions: inst.mention_sequence()?, world, start });
        }
        let ctx = &contexts[inst.id.as_str()];
        let truth = &inst.ground_truth[0];
        let setting = inst.setting();
        let topology = ctx.world.map.kind();
        let spatial = if setting == Setting::Global && topology == TopologyKind::Ring {
            match ctx.world.node_of(&predicted) {
                Some(_) => Measure::Excluded,
                None => Measure::OffMap,
            }
        } else {
            spatial_distance(&ctx.world, truth, &predicted)?
        };
        let axis = if topology == TopologyKind::Square { axis_distance(&ctx.world, truth, &predicted)? } else { None };
        out.records.push(ErrorRecord {
            instance_id: inst.id.clone(),
            run: rec.run,
            truth: truth.clone(),
            temporal: temporal_distance(&ctx.mentions, truth, &predicted)?,
            predicted_is_start: ctx.start.as_deref() == Some(predicted.as_str()),
            predicted,
            spatial,
            setting,
            topology,
            axis,
        });
    }
    Ok(out)
}

/// Counts per distance; off-map and excluded measurements are tallied apart.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<u32, u64>,
    pub off_map: u64,
    pub excluded: u64,
}

impl Histogram {
    pub fn add(&mut self, m: Measure) {
        match m {
            Measure::Distance(d) => *self.counts.entry(d).or_default() += 1,
            Measure::OffMap => self.off_map += 1,
            Measure::Excluded => self.excluded += 1,
        }
    }

    pub fn add_distance(&mut self, d: u32, n: u64) {
        *self.counts.entry(d).or_default() += n;
    }

    /// Number of in-map measurements.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, d: u32) -> u64 {
        self.counts.get(&d).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn frequency<R: Real>(&self, d: u32) -> R {
        let total = self.total();
        if total == 0 {
            return R::zero();
        }
        R::lit(self.count(d) as f64) / R::lit(total as f64)
    }

    /// Frequencies keyed by distance.
    pub fn frequencies<R: Real>(&self) -> BTreeMap<u32, R> {
        self.counts.keys().map(|&d| (d, self.frequency(d))).collect()
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&d, &n) in &other.counts {
            self.add_distance(d, n);
        }
        self.off_map += other.off_map;
        self.excluded += other.excluded;
    }

    /// Total-variation distance between the normalized histograms.
    pub fn tv_distance<R: Real>(&self, other: &Histogram) -> R {
        tv_distance(&self.frequencies::<R>(), &other.frequencies::<R>())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,count,frequency\n");
        for (&d, &n) in &self.counts {
            out.push_str(&format!("{d},{n},{:.6}\n", self.frequency::<f64>(d)));
        }
        out
    }
}

/// Total-variation distance between two distributions over distances.
pub fn tv_distance<R: Real>(a: &BTreeMap<u32, R>, b: &BTreeMap<u32, R>) -> R {
    let keys: std::collections::BTreeSet<u32> = a.keys().chain(b.keys()).copied().collect();
    let sum = keys.into_iter().fold(R::zero(), |acc, k| {
        let pa = a.get(&k).copied().unwrap_or_else(R::zero);
        let pb = b.get(&k).copied().unwrap_or_else(R::zero);
        acc + (pa - pb).abs()
    });
    sum * R::lit(0.5)
}

pub fn histogram(records: &[ErrorRecord], kind: DistanceKind) -> Histogram {
    let mut h = Histogram::default();
    for r in records {
        h.add(match kind {
            DistanceKind::Spatial => r.spatial,
            DistanceKind::Temporal => r.temporal,
        });
    }
    h
}

/// Temporal distances of the records whose spatial distance is `sd`.
pub fn conditional_td(records: &[ErrorRecord], sd: u32) -> Histogram {
    let mut h = Histogram::default();
    for r in records.iter().filter(|r| r.spatial == Measure::Distance(sd)) {
        h.add(r.temporal);
    }
    h
}

/// Row-offset and column-offset histograms of square-grid errors.
pub fn axis_histograms(records: &[ErrorRecord]) -> (Histogram, Histogram) {
    let mut rows = Histogram::default();
    let mut cols = Histogram::default();
    for (dr, dc) in records.iter().filter_map(|r| r.axis) {
        rows.add_distance(dr, 1);
        cols.add_distance(dc, 1);
    }
    (rows, cols)
}

/// Share of the records at temporal distance `td` whose prediction is the
/// starting object.
pub fn start_bias_rate<R: Real>(records: &[ErrorRecord], td: u32) -> Result<R> {
    let matching: Vec<&ErrorRecord> = records.iter().filter(|r| r.temporal == Measure::Distance(td)).collect();
    if matching.is_empty() {
        return Err(Error::Analysis(format!("no errors at temporal distance {td}")));
    }
    let hits = matching.iter().filter(|r| r.predicted_is_start).count();
    Ok(R::of_usize(hits) / R::of_usize(matching.len()))
}

pub const DEFAULT_BASELINE_SAMPLES: usize = 100_000;

/// Monte-Carlo distances of a uniform guess.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BaselineDistribution {
    pub histogram: Histogram,
    pub samples: usize,
    pub setting: Setting,
    pub kind: DistanceKind,
}

/// Repeatedly picks a random instance of `setting` and a uniform location:
/// any node of the map for global prompts, a visited node for local ones.
/// The distance of that location from the ground truth is recorded; picking
/// the ground truth itself yields 0.
pub fn baseline(
    instances: &[TaskInstance],
    setting: Setting,
    kind: DistanceKind,
    samples: usize,
    seed: u64,
) -> Result<BaselineDistribution> {
    struct Candidate {
        world: World,
        mentions: Vec<String>,
        truth: String,
        pool: Vec<String>,
    }
    let mut candidates = Vec::new();
    for inst in instances.iter().filter(|i| i.setting() == setting && i.ground_truth.len() == 1) {
        if inst.kind == TaskKind::SizeInference {
            continue;
        }
        let world = inst.world()?;
        let mentions = inst.mention_sequence()?;
        let pool: Vec<String> = match setting {
            Setting::Global => world.labels.clone(),
            Setting::Local => {
                let mut seen = Vec::new();
                for m in &mentions {
                    if !seen.contains(m) {
                        seen.push(m.clone());
                    }
                }
                seen
            }
        };
        candidates.push(Candidate { world, mentions, truth: inst.ground_truth[0].clone(), pool });
    }
    if candidates.is_empty() {
        return Err(Error::Analysis(format!("no single-answer {setting:?} instances for a baseline")));
    }
    let mut rng = seed::rng(seed);
    let mut histogram = Histogram::default();
    for _ in 0..samples {
        let c = candidates.choose(&mut rng).expect("non-empty");
        let pick = c.pool.choose(&mut rng).expect("instances mention objects");
        histogram.add(match kind {
            DistanceKind::Spatial => spatial_distance(&c.world, &c.truth, pick)?,
            DistanceKind::Temporal => temporal_distance(&c.mentions, &c.truth, pick)?,
        });
    }
    Ok(BaselineDistribution { histogram, samples, setting, kind })
}

/// One row of the difficulty model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignRow {
    pub correct: bool,
    pub hexagon: bool,
    pub triangle: bool,
    pub ring: bool,
    pub edges: u32,
    pub steps: u32,
}

pub const DIFFICULTY_TERMS: [&str; 6] = [
    "(Intercept)",
    "type is hexagon",
    "type is triangle",
    "type is ring",
    "number of edges",
    "number of navigation steps",
];

/// Design rows for evaluation records on square, hexagon, triangle and ring
/// maps; records on other structures are skipped and counted.
pub fn design_rows(instances: &[TaskInstance], evals: &[EvalRecord]) -> Result<(Vec<DesignRow>, usize)> {
    let by_id: HashMap<&str, &TaskInstance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut rows = Vec::with_capacity(evals.len());
    let mut skipped = 0;
    for rec in evals {
        let inst = by_id
            .get(rec.instance_id.as_str())
            .ok_or_else(|| Error::Analysis(format!("record for unknown instance {}", rec.instance_id)))?;
        let kind = inst.topology().kind();
        if !matches!(kind, TopologyKind::Square | TopologyKind::Hexagon | TopologyKind::Triangle | TopologyKind::Ring)
            || inst.kind == TaskKind::SizeInference
        {
            skipped += 1;
            continue;
        }
        rows.push(DesignRow {
            correct: rec.correct,
            hexagon: kind == TopologyKind::Hexagon,
            triangle: kind == TopologyKind::Triangle,
            ring: kind == TopologyKind::Ring,
            edges: inst.metadata.num_edges,
            steps: inst.metadata.steps,
        });
    }
    Ok((rows, skipped))
}

/// Fits correctness ~ intercept + structure type + edges + navigation steps.
pub fn fit_difficulty<R: Real>(rows: &[DesignRow]) -> Result<LogisticFit<R>> {
    let flag = |b: bool| if b { R::one() } else { R::zero() };
    let x: Vec<Vec<R>> = rows
        .iter()
        .map(|r| {
            vec![
                R::one(),
                flag(r.hexagon),
                flag(r.triangle),
                flag(r.ring),
                R::lit(r.edges as f64),
                R::lit(r.steps as f64),
            ]
        })
        .collect();
    let y: Vec<bool> = rows.iter().map(|r| r.correct).collect();
    fit_logistic(&x, &y, &DIFFICULTY_TERMS)
}
