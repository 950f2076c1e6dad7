use std::collections::BTreeMap;

use serde::Serialize;

use super::EvalRecord;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Accuracy of one group across runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupScore<R> {
    pub group: String,
    pub records: usize,
    /// Accuracy of each run, in run order.
    pub per_run: Vec<R>,
    pub mean: R,
    /// Sample standard deviation of the per-run accuracies over sqrt(runs).
    pub std_error: R,
    /// 1.96 standard errors.
    pub ci95: R,
}

pub type AccuracyTable<R> = Vec<GroupScore<R>>;

/// Mean and standard error of per-run accuracies; the error is zero for a
/// single run.
pub fn mean_and_se<R: Real>(per_run: &[R]) -> (R, R) {
    let n = R::of_usize(per_run.len());
    let mean = per_run.iter().fold(R::zero(), |a, &b| a + b) / n;
    if per_run.len() < 2 {
        return (mean, R::zero());
    }
    let ss = per_run.iter().fold(R::zero(), |a, &b| a + (b - mean) * (b - mean));
    let sd = (ss / (n - R::one())).sqrt();
    (mean, sd / n.sqrt())
}

/// Scores records grouped by `key`. Groups come out sorted by key.
pub fn score_by<R: Real>(records: &[EvalRecord], key: impl Fn(&EvalRecord) -> String) -> Result<AccuracyTable<R>> {
    if records.is_empty() {
        return Err(Error::Analysis("no records to score".into()));
    }
    let mut groups: BTreeMap<String, BTreeMap<u32, (usize, usize)>> = BTreeMap::new();
    for r in records {
        let e = groups.entry(key(r)).or_default().entry(r.run).or_default();
        e.0 += usize::from(r.correct);
        e.1 += 1;
    }
    groups
        .into_iter()
        .map(|(group, runs)| {
            let records: usize = runs.values().map(|&(_, n)| n).sum();
            if records == 0 {
                return Err(Error::Analysis(format!("group {group} is empty")));
            }
            let per_run: Vec<R> =
                runs.values().map(|&(c, n)| R::of_usize(c) / R::of_usize(n)).collect();
            let (mean, std_error) = mean_and_se(&per_run);
            Ok(GroupScore { group, records, per_run, mean, std_error, ci95: R::lit(1.96) * std_error })
        })
        .collect()
}

/// Groups by the family part of the instance id (everything before the
/// trailing index).
pub fn family_of(instance_id: &str) -> String {
    match instance_id.rsplit_once('-') {
        Some((family, idx)) if idx.chars().all(|c| c.is_ascii_digit()) => family.to_string(),
        _ => instance_id.to_string(),
    }
}

pub const SCORE_HEADER: &str = "group,records,runs,mean,std_error,ci95";

pub fn score_csv<R: Real>(table: &AccuracyTable<R>) -> String {
    let mut out = format!("{SCORE_HEADER}\n");
    for g in table {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            g.group,
            g.records,
            g.per_run.len(),
            g.mean.as_f64(),
            g.std_error.as_f64(),
            g.ci95.as_f64()
        ));
    }
    out
}
