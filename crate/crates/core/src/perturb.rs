//! Critical-step perturbations and turning-point frequency analysis.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::corpus::trajectory_id;
use crate::datagen::templates::narrative_prefix;
use crate::error::{Error, Result};
use crate::rng;
use crate::routing::{move_along_road, simulate_steps, Direction, PathStep, Trajectory};
use crate::world::{Coordinate, GridWorld, Orientation, PoiId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbKind {
    Road,
    Distance,
    Direction,
}

impl PerturbKind {
    pub const ALL: [Self; 3] = [Self::Road, Self::Distance, Self::Direction];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Road => "road",
            Self::Distance => "distance",
            Self::Direction => "direction",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub step_index: usize,
    pub original: PathStep,
    pub replacement: PathStep,
    /// Where the perturbed step begins.
    pub p_perturb: Coordinate,
    /// Where the perturbed step ends.
    pub p_target: Coordinate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedCase {
    pub id: String,
    pub trajectory: String,
    pub start: PoiId,
    pub end: PoiId,
    pub gt_start: Coordinate,
    pub gt_end: Coordinate,
    /// Steps before the critical step, then the replacement.
    pub prefix: Vec<PathStep>,
    pub prefix_text: String,
    pub spec: PerturbSpec,
}

/// Index of the step on the fastest road; the earliest one on ties.
pub fn critical_step(world: &GridWorld, trajectory: &Trajectory) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in trajectory.steps.iter().enumerate() {
        let w = world.road_or_err(s.road)?.weight;
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((i, w));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyTrajectory)
}

/// Whole km available from `pos` heading `direction` before the boundary.
fn room(world: &GridWorld, pos: &Coordinate, direction: Direction) -> f64 {
    let g = f64::from(world.grid_size());
    let r = match direction {
        Direction::North => g - pos.y,
        Direction::South => pos.y,
        Direction::East => g - pos.x,
        Direction::West => pos.x,
    };
    r.floor()
}

pub fn flip_direction(step: &PathStep) -> PathStep {
    PathStep::new(step.road, step.direction.opposite(), step.length)
}

/// Perturb the critical step of `trajectory`.
pub fn apply_perturbation(world: &GridWorld, trajectory: &Trajectory, kind: PerturbKind, seed: u64) -> Result<(PerturbSpec, Vec<PathStep>)> {
    let s = critical_step(world, trajectory)?;
    let start = world.position(trajectory.start)?;
    let gt_end = world.position(trajectory.end)?;
    let p_perturb = simulate_steps(world, start, &trajectory.steps[..s]).end;
    let original = trajectory.steps[s].clone();
    let mut r = rng::stream(seed, "perturb.apply");

    let replacement = match kind {
        PerturbKind::Direction => {
            let flipped = flip_direction(&original);
            if room(world, &p_perturb, flipped.direction) < flipped.length {
                return Err(Error::LeavesGrid);
            }
            flipped
        }
        PerturbKind::Distance => {
            let remaining = p_perturb.distance_to(&gt_end);
            let max = remaining.floor().min(room(world, &p_perturb, original.direction));
            let candidates: Vec<f64> = (1..=max.max(0.0) as u32).map(f64::from).filter(|&l| l != original.length).collect();
            let &length = candidates.choose(&mut r).ok_or(Error::ZeroRemainingDistance(remaining))?;
            PathStep::new(original.road, original.direction, length)
        }
        PerturbKind::Road => {
            let mut options = Vec::new();
            for road in world.roads_through(&p_perturb) {
                if road.id == original.road {
                    continue;
                }
                let dirs = match road.orientation {
                    Orientation::Horizontal => [Direction::East, Direction::West],
                    Orientation::Vertical => [Direction::North, Direction::South],
                };
                for d in dirs {
                    if room(world, &p_perturb, d) >= original.length {
                        options.push(PathStep::new(road.id, d, original.length));
                    }
                }
            }
            options.choose(&mut r).cloned().ok_or(Error::NoAlternativeRoad { x: p_perturb.x, y: p_perturb.y })?
        }
    };
    let mv = move_along_road(world, p_perturb, &replacement);
    if mv.clamped {
        return Err(Error::LeavesGrid);
    }
    let mut prefix = trajectory.steps[..s].to_vec();
    prefix.push(replacement.clone());
    let spec = PerturbSpec { kind, step_index: s, original, replacement, p_perturb, p_target: mv.end };
    Ok((spec, prefix))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbBatch {
    pub cases: Vec<PerturbedCase>,
    /// `(trajectory id, kind, reason)` for every infeasible combination.
    pub skipped: Vec<(String, PerturbKind, String)>,
}

/// One case per (trajectory, kind); infeasible combinations are skipped and
/// listed. Each case draws from its own derived stream.
pub fn gen_perturbed_cases(world: &GridWorld, trajectories: &[Trajectory], kinds: &[PerturbKind], seed: u64) -> Result<PerturbBatch> {
    let jobs: Vec<(usize, PerturbKind)> = (0..trajectories.len()).flat_map(|i| kinds.iter().map(move |&k| (i, k))).collect();
    type Skip = (String, PerturbKind, String);
    let results: Vec<Result<std::result::Result<PerturbedCase, Skip>>> = jobs
        .par_iter()
        .map(|&(i, kind)| {
            let t = &trajectories[i];
            let tid = trajectory_id(t.start, t.end);
            let case_seed = rng::derive_seed(seed, &format!("perturb.case.{tid}.{}", kind.as_str()));
            match apply_perturbation(world, t, kind, case_seed) {
                Ok((spec, prefix)) => Ok(Ok(PerturbedCase {
                    id: format!("{tid}#{}", kind.as_str()),
                    trajectory: tid,
                    start: t.start,
                    end: t.end,
                    gt_start: world.position(t.start)?,
                    gt_end: world.position(t.end)?,
                    prefix_text: narrative_prefix(t.start, &prefix),
                    prefix,
                    spec,
                })),
                Err(e @ (Error::LeavesGrid | Error::NoAlternativeRoad { .. } | Error::ZeroRemainingDistance(_))) => {
                    Ok(Err((tid, kind, e.to_string())))
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut batch = PerturbBatch::default();
    for r in results {
        match r? {
            Ok(case) => batch.cases.push(case),
            Err(skip) => batch.skipped.push(skip),
        }
    }
    Ok(batch)
}

/// Per-intersection counts of direction changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnFrequencyGrid {
    pub side: usize,
    /// Row-major by `y`, then `x`.
    pub counts: Vec<u64>,
}

impl TurnFrequencyGrid {
    pub fn new(grid_size: u32) -> Self {
        let side = grid_size as usize + 1;
        Self { side, counts: vec![0; side * side] }
    }

    pub fn count_at(&self, pos: &Coordinate) -> u64 {
        let max = (self.side - 1) as f64;
        if !pos.is_lattice() || !(0.0..=max).contains(&pos.x) || !(0.0..=max).contains(&pos.y) {
            return 0;
        }
        self.counts[pos.y as usize * self.side + pos.x as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// One line per `y` from 0 upward, `x` increasing left to right.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.counts.chunks(self.side) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    /// Binary greyscale PGM with north at the top, scaled so the busiest
    /// intersection is white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.max().max(1) as f64;
        let mut out = format!("P5\n{} {}\n255\n", self.side, self.side).into_bytes();
        for row in self.counts.chunks(self.side).rev() {
            out.extend(row.iter().map(|&c| (255.0 * c as f64 / max).round() as u8));
        }
        out
    }
}

/// Count every step boundary where the heading changes.
pub fn turning_frequencies(world: &GridWorld, trajectories: &[Trajectory]) -> Result<TurnFrequencyGrid> {
    let mut grid = TurnFrequencyGrid::new(world.grid_size());
    for t in trajectories {
        let mut pos = world.position(t.start)?;
        for pair in t.steps.windows(2) {
            pos = move_along_road(world, pos, &pair[0]).end;
            if pair[0].direction != pair[1].direction && pos.is_lattice() {
                grid.counts[pos.y as usize * grid.side + pos.x as usize] += 1;
            }
        }
    }
    Ok(grid)
}

/// Specs whose perturbation and target points both have counts above `tau`.
pub fn select_cases_by_threshold<'a>(specs: &'a [PerturbSpec], grid: &TurnFrequencyGrid, tau: u64) -> Vec<&'a PerturbSpec> {
    specs.iter().filter(|s| grid.count_at(&s.p_perturb) > tau && grid.count_at(&s.p_target) > tau).collect()
}
