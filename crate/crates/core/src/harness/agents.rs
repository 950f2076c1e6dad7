use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::taskgen::{TaskInstance, TaskKind};

/// Deterministic stand-ins for a model, used to exercise scoring and the
/// error analyses without any remote endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reference {
    Oracle,
    /// Uniform over the distinct objects mentioned in the prompt.
    Uniform,
    /// With probability `strength`, the wrong object mentioned closest to
    /// the ground truth's first mention; otherwise a uniform wrong object.
    Temporal(f64),
    /// Same, with closeness measured on the map.
    Spatial(f64),
    /// Same, preferring the object at the start of the walk.
    Start(f64),
}

/// Height/width pairs (both at least 2) whose product is `cells`.
fn factor_pairs(cells: usize) -> Vec<(usize, usize)> {
    (2..=cells / 2).filter(|h| cells % h == 0 && cells / h >= 2).map(|h| (h, cells / h)).collect()
}

impl Reference {
    /// Answer items for one instance.
    pub fn answer(self, inst: &TaskInstance, rng: &mut Rng) -> Result<Vec<String>> {
        if self == Reference::Oracle {
            return Ok(inst.ground_truth.clone());
        }
        if inst.kind == TaskKind::SizeInference {
            let cells = inst.walk().map_or(0, |w| w.len() + 1);
            let &(h, w) = factor_pairs(cells)
                .choose(rng)
                .ok_or_else(|| Error::Analysis(format!("{} cells admit no rectangle", cells)))?;
            return Ok(vec![h.to_string(), w.to_string()]);
        }
        let mentions = inst.mention_sequence()?;
        let mut distinct: Vec<&String> = Vec::new();
        for m in &mentions {
            if !distinct.contains(&m) {
                distinct.push(m);
            }
        }
        if self == Reference::Uniform {
            let pick = distinct.choose(rng).ok_or_else(|| Error::Analysis(format!("{} mentions nothing", inst.id)))?;
            return Ok(vec![(*pick).clone()]);
        }
        let wrong: Vec<&String> = distinct.into_iter().filter(|m| !inst.ground_truth.contains(m)).collect();
        if wrong.is_empty() {
            return Ok(inst.ground_truth.clone());
        }
        let strength = match self {
            Reference::Temporal(s) | Reference::Spatial(s) | Reference::Start(s) => s,
            _ => unreachable!("handled above"),
        };
        let preferred = if rng.random::<f64>() < strength { self.preferred(inst, &mentions, &wrong)? } else { Vec::new() };
        let pool = if preferred.is_empty() { wrong } else { preferred };
        Ok(vec![(*pool.choose(rng).expect("non-empty pool")).clone()])
    }

    fn preferred<'a>(self, inst: &TaskInstance, mentions: &[String], wrong: &[&'a String]) -> Result<Vec<&'a String>> {
        let truth = &inst.ground_truth[0];
        let first = |label: &str| mentions.iter().position(|m| m == label).unwrap_or(usize::MAX);
        let closest = |dist: &dyn Fn(&str) -> usize| {
            let best = wrong.iter().map(|w| dist(w)).min().unwrap_or(usize::MAX);
            wrong.iter().copied().filter(|w| dist(w) == best).collect::<Vec<_>>()
        };
        Ok(match self {
            Reference::Temporal(_) => {
                let t = first(truth);
                closest(&|w: &str| first(w).abs_diff(t))
            }
            Reference::Spatial(_) => {
                let world = inst.world()?;
                let target = world.node_of(truth).ok_or_else(|| Error::Analysis(format!("{truth} not on map")))?;
                let dist = world.map.distances_from(target)?;
                closest(&|w: &str| world.node_of(w).map_or(usize::MAX, |n| dist[n] as usize))
            }
            Reference::Start(_) => {
                let world = inst.world()?;
                let start = inst.walk().map(|w| world.label(w.start).to_string());
                wrong.iter().copied().filter(|w| Some(w.as_str()) == start.as_deref()).collect()
            }
            Reference::Oracle | Reference::Uniform => Vec::new(),
        })
    }
}
