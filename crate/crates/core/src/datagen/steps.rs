//! Step-wise coordinate supervision over navigation prefixes.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{trajectory_id, SplitLabel};
use super::templates::narrative_prefix;
use crate::error::{Error, Result};
use crate::rng;
use crate::routing::{simulate_steps, RoadGraph, Trajectory};
use crate::world::{Coordinate, GridWorld, PoiId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProbeTarget {
    /// `<trajectory id>#step-<k>`.
    pub id: String,
    pub trajectory: String,
    pub step: usize,
    pub split: SplitLabel,
    pub prefix_text: String,
    pub position: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTargetCounts {
    pub train: usize,
    pub eval: usize,
}

impl Default for StepTargetCounts {
    fn default() -> Self {
        Self { train: 20_000, eval: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepTargetSet {
    pub train_trajectories: Vec<Trajectory>,
    pub eval_trajectories: Vec<Trajectory>,
    pub train: Vec<StepProbeTarget>,
    pub eval: Vec<StepProbeTarget>,
}

/// Prefix targets for steps 0..=n of one trajectory.
pub fn prefix_targets(world: &GridWorld, trajectory: &Trajectory, split: SplitLabel) -> Result<Vec<StepProbeTarget>> {
    let start = world.position(trajectory.start)?;
    let tid = trajectory_id(trajectory.start, trajectory.end);
    (0..=trajectory.steps.len())
        .map(|k| {
            let prefix = &trajectory.steps[..k];
            let sim = simulate_steps(world, start, prefix);
            if sim.clamped {
                return Err(Error::Invariant(format!("prefix {k} of {tid} leaves the grid")));
            }
            Ok(StepProbeTarget {
                id: format!("{tid}#step-{k}"),
                trajectory: tid.clone(),
                step: k,
                split,
                prefix_text: narrative_prefix(trajectory.start, prefix),
                position: [sim.end.x, sim.end.y],
            })
        })
        .collect()
}

/// Sample `count` distinct ordered pairs of distinct POIs from `pool`.
fn sample_ordered_pairs(pool: &[PoiId], count: usize, seed: u64, label: &str) -> Result<Vec<(PoiId, PoiId)>> {
    let n = pool.len();
    let available = n * n.saturating_sub(1);
    if count > available {
        return Err(Error::PoolExhausted { wanted: count, available });
    }
    let mut r = rng::stream(seed, label);
    let mut picks: Vec<usize> = index::sample(&mut r, available, count).into_vec();
    picks.sort_unstable();
    Ok(picks
        .into_iter()
        .map(|k| {
            let (i, j) = (k / (n - 1), k % (n - 1));
            let j = if j >= i { j + 1 } else { j };
            (pool[i], pool[j])
        })
        .collect())
}

/// Training trajectories join non-heldout POIs; evaluation trajectories
/// join two heldout POIs.
pub fn gen_step_probe_targets(
    world: &GridWorld,
    graph: &RoadGraph,
    heldout: &[PoiId],
    counts: StepTargetCounts,
    seed: u64,
) -> Result<StepTargetSet> {
    let mut held = heldout.to_vec();
    held.sort_unstable();
    let main: Vec<PoiId> = world.poi_ids().into_iter().filter(|p| held.binary_search(p).is_err()).collect();
    let train_pairs = sample_ordered_pairs(&main, counts.train, seed, "datagen.step-train-pairs")?;
    let eval_pairs = sample_ordered_pairs(&held, counts.eval, seed, "datagen.step-eval-pairs")?;
    let route = |pairs: &[(PoiId, PoiId)]| -> Result<Vec<Trajectory>> {
        pairs.par_iter().map(|&(a, b)| graph.shortest_path(world, a, b)).collect()
    };
    let train_trajectories = route(&train_pairs)?;
    let eval_trajectories = route(&eval_pairs)?;
    let targets = |ts: &[Trajectory], split| -> Result<Vec<StepProbeTarget>> {
        let nested: Vec<Vec<StepProbeTarget>> = ts.par_iter().map(|t| prefix_targets(world, t, split)).collect::<Result<_>>()?;
        Ok(nested.into_iter().flatten().collect())
    };
    let train = targets(&train_trajectories, SplitLabel::Train)?;
    let eval = targets(&eval_trajectories, SplitLabel::Eval)?;
    Ok(StepTargetSet { train_trajectories, eval_trajectories, train, eval })
}

pub fn target_position(t: &StepProbeTarget) -> Coordinate {
    Coordinate::new(t.position[0], t.position[1])
}
