//! Path-description metrics: SED, VRP, SPA, VMR/VCS, and perturbation recovery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathparse::ParsedPath;
use crate::routing::{find_intersection, is_valid_next, move_along_road, simulate_steps, PathStep, Trajectory};
use crate::world::{Coordinate, GridWorld};

/// Predicted start: the ground-truth start for fewer than two steps,
/// otherwise the crossing of the first two roads walked back along step one.
/// The flag is true when the ground-truth start was used.
pub fn estimate_start(world: &GridWorld, gt_start: Coordinate, steps: &[PathStep]) -> (Coordinate, bool) {
    if steps.len() < 2 {
        return (gt_start, true);
    }
    let (first, second) = (&steps[0], &steps[1]);
    match find_intersection(world, first.road, second.road) {
        Ok(Some(p)) => {
            let back = PathStep::new(first.road, first.direction.opposite(), first.length);
            (move_along_road(world, p, &back).end, false)
        }
        _ => (gt_start, true),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub start: Coordinate,
    pub end: Coordinate,
    pub trace: Vec<Coordinate>,
    pub start_fallback: bool,
    pub clamped: bool,
}

pub fn reconstruct(world: &GridWorld, gt_start: Coordinate, steps: &[PathStep]) -> Reconstruction {
    let (start, start_fallback) = estimate_start(world, gt_start, steps);
    let sim = simulate_steps(world, start, steps);
    Reconstruction { start, end: sim.end, trace: sim.trace, start_fallback, clamped: sim.clamped }
}

/// Start and end deviation in km.
pub fn sed(world: &GridWorld, gt_start: Coordinate, gt_end: Coordinate, steps: &[PathStep]) -> (f64, f64) {
    let r = reconstruct(world, gt_start, steps);
    (r.start.distance_to(&gt_start), r.end.distance_to(&gt_end))
}

/// Share of steps whose (road, direction) is available where they begin.
pub fn vrp(world: &GridWorld, gt_start: Coordinate, steps: &[PathStep]) -> f64 {
    if steps.is_empty() {
        return 0.0;
    }
    let (start, _) = estimate_start(world, gt_start, steps);
    legal_fraction(world, start, steps).0 as f64 / steps.len() as f64
}

/// Count of legal steps when walking `steps` from `start`, and the end point.
fn legal_fraction(world: &GridWorld, start: Coordinate, steps: &[PathStep]) -> (usize, Coordinate) {
    let mut pos = start;
    let mut valid = 0;
    for step in steps {
        if is_valid_next(world, &pos, step) {
            valid += 1;
        }
        pos = move_along_road(world, pos, step).end;
    }
    (valid, pos)
}

/// Exact match with the canonical path; partial parses never count.
pub fn spa(predicted: &ParsedPath, truth: &Trajectory) -> bool {
    predicted.complete && predicted.steps == truth.steps
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointVectors {
    pub vmr: f64,
    pub vcs: f64,
    /// True when the predicted displacement is zero and `vcs` was scored 0.
    pub vcs_undefined: bool,
}

pub fn endpoint_vectors(
    gt_start: Coordinate,
    gt_end: Coordinate,
    pred_start: Coordinate,
    pred_end: Coordinate,
) -> Result<EndpointVectors> {
    let (gx, gy) = (gt_end.x - gt_start.x, gt_end.y - gt_start.y);
    let (px, py) = (pred_end.x - pred_start.x, pred_end.y - pred_start.y);
    let gn = gx.hypot(gy);
    if gn == 0.0 {
        return Err(Error::DegenerateGroundTruth);
    }
    let pn = px.hypot(py);
    if pn == 0.0 {
        return Ok(EndpointVectors { vmr: 0.0, vcs: 0.0, vcs_undefined: true });
    }
    let vcs = ((gx * px + gy * py) / (gn * pn)).clamp(-1.0, 1.0);
    Ok(EndpointVectors { vmr: pn / gn, vcs, vcs_undefined: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub fsa: bool,
    pub sa: f64,
    pub dd: f64,
    /// True when there were no subsequent steps and `sa` is vacuously 1.
    pub sa_vacuous: bool,
}

/// Score a continuation produced after a perturbed prefix.
///
/// The prefix is walked from the ground-truth start; the continuation is then
/// judged for legality step by step from where the prefix ends.
pub fn perturbation_outcome(
    world: &GridWorld,
    gt_start: Coordinate,
    prefix: &[PathStep],
    continuation: &[PathStep],
    gt_end: Coordinate,
) -> PerturbationOutcome {
    let target = simulate_steps(world, gt_start, prefix).end;
    let Some((first, rest)) = continuation.split_first() else {
        return PerturbationOutcome { fsa: false, sa: 0.0, dd: target.distance_to(&gt_end), sa_vacuous: false };
    };
    let fsa = is_valid_next(world, &target, first);
    let after_first = move_along_road(world, target, first).end;
    let (valid, end) = legal_fraction(world, after_first, rest);
    let (sa, sa_vacuous) = if rest.is_empty() { (1.0, true) } else { (valid as f64 / rest.len() as f64, false) };
    PerturbationOutcome { fsa, sa, dd: end.distance_to(&gt_end), sa_vacuous }
}
