//! Per-case scoring and aggregate reports.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frechet::frechet;
use super::path::{endpoint_vectors, perturbation_outcome, reconstruct, spa, vrp};
use crate::error::Result;
use crate::pathparse::{parse_path, ParsedPath};
use crate::routing::{PathStep, Trajectory};
use crate::world::{Coordinate, GridWorld};

fn diagnostics_text(parsed: &ParsedPath) -> String {
    parsed.diagnostics.iter().map(|d| format!("{}: {}", d.position, d.issue)).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub id: String,
    pub spd: f64,
    pub epd: f64,
    pub vrp: f64,
    pub spa: bool,
    pub vmr: f64,
    pub vcs: f64,
    pub vcs_undefined: bool,
    pub fd: f64,
    pub steps: usize,
    pub complete: bool,
    pub diagnostics: String,
}

/// Score one predicted description against its ground-truth trajectory.
pub fn score_path(world: &GridWorld, id: &str, truth: &Trajectory, text: &str) -> Result<PathRow> {
    let gt_start = world.position(truth.start)?;
    let gt_end = world.position(truth.end)?;
    let parsed = parse_path(text);
    let rec = reconstruct(world, gt_start, &parsed.steps);
    let ev = endpoint_vectors(gt_start, gt_end, rec.start, rec.end)?;
    let truth_trace = if truth.nodes.is_empty() { Trajectory::from_record(world, &truth.to_record(id))?.nodes } else { truth.nodes.clone() };
    Ok(PathRow {
        id: id.to_string(),
        spd: rec.start.distance_to(&gt_start),
        epd: rec.end.distance_to(&gt_end),
        vrp: vrp(world, gt_start, &parsed.steps),
        spa: spa(&parsed, truth),
        vmr: ev.vmr,
        vcs: ev.vcs,
        vcs_undefined: ev.vcs_undefined,
        fd: frechet(&rec.trace, &truth_trace)?,
        steps: parsed.steps.len(),
        complete: parsed.complete,
        diagnostics: diagnostics_text(&parsed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAggregate {
    pub cases: usize,
    pub spd: f64,
    pub epd: f64,
    pub vrp_percent: f64,
    pub spa_percent: f64,
    pub vmr: f64,
    pub vcs: f64,
    pub fd: f64,
}

fn mean_of<T>(rows: &[T], f: impl Fn(&T) -> f64) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 }
}

impl PathAggregate {
    pub fn from_rows(rows: &[PathRow]) -> Self {
        Self {
            cases: rows.len(),
            spd: mean_of(rows, |r| r.spd),
            epd: mean_of(rows, |r| r.epd),
            vrp_percent: 100.0 * mean_of(rows, |r| r.vrp),
            spa_percent: 100.0 * mean_of(rows, |r| f64::from(u8::from(r.spa))),
            vmr: mean_of(rows, |r| r.vmr),
            vcs: mean_of(rows, |r| r.vcs),
            fd: mean_of(rows, |r| r.fd),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<A, R> {
    pub config: serde_json::Value,
    pub aggregate: A,
    #[serde(skip)]
    pub rows: Vec<R>,
}

pub type PathReport = MetricReport<PathAggregate, PathRow>;
pub type PerturbReport = MetricReport<PerturbAggregate, PerturbRow>;

pub struct PathCase<'a> {
    pub id: &'a str,
    pub truth: &'a Trajectory,
    pub text: &'a str,
}

pub fn score_paths(world: &GridWorld, cases: &[PathCase<'_>], config: serde_json::Value) -> Result<PathReport> {
    let rows: Vec<PathRow> = cases.par_iter().map(|c| score_path(world, c.id, c.truth, c.text)).collect::<Result<_>>()?;
    Ok(MetricReport { config, aggregate: PathAggregate::from_rows(&rows), rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbRow {
    pub id: String,
    pub fsa: bool,
    pub sa: f64,
    pub sa_vacuous: bool,
    pub dd: f64,
    pub steps: usize,
    pub complete: bool,
    pub diagnostics: String,
}

pub struct PerturbCase<'a> {
    pub id: &'a str,
    pub gt_start: Coordinate,
    pub gt_end: Coordinate,
    pub prefix: &'a [PathStep],
    pub continuation: &'a str,
}

pub fn score_perturbed(world: &GridWorld, case: &PerturbCase<'_>) -> PerturbRow {
    let parsed = parse_path(case.continuation);
    let o = perturbation_outcome(world, case.gt_start, case.prefix, &parsed.steps, case.gt_end);
    PerturbRow {
        id: case.id.to_string(),
        fsa: o.fsa,
        sa: o.sa,
        sa_vacuous: o.sa_vacuous,
        dd: o.dd,
        steps: parsed.steps.len(),
        complete: parsed.complete,
        diagnostics: diagnostics_text(&parsed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbAggregate {
    pub cases: usize,
    pub fsa_percent: f64,
    pub sa_percent: f64,
    pub dd_mean: f64,
    pub dd_median: f64,
}

impl PerturbAggregate {
    pub fn from_rows(rows: &[PerturbRow]) -> Self {
        Self {
            cases: rows.len(),
            fsa_percent: 100.0 * mean_of(rows, |r| f64::from(u8::from(r.fsa))),
            sa_percent: 100.0 * mean_of(rows, |r| r.sa),
            dd_mean: mean_of(rows, |r| r.dd),
            dd_median: median(rows.iter().map(|r| r.dd).collect()),
        }
    }
}

pub fn score_perturbed_cases(world: &GridWorld, cases: &[PerturbCase<'_>], config: serde_json::Value) -> PerturbReport {
    let rows: Vec<PerturbRow> = cases.par_iter().map(|c| score_perturbed(world, c)).collect();
    MetricReport { config, aggregate: PerturbAggregate::from_rows(&rows), rows }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.to_string() }
}

pub fn path_rows_csv(rows: &[PathRow]) -> String {
    let mut out = String::from("id,spd,epd,vrp,spa,vmr,vcs,vcs_undefined,fd,steps,complete,diagnostics\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{},{:.6},{},{},{}",
            csv_field(&r.id),
            r.spd,
            r.epd,
            r.vrp,
            r.spa,
            r.vmr,
            r.vcs,
            r.vcs_undefined,
            r.fd,
            r.steps,
            r.complete,
            csv_field(&r.diagnostics)
        );
    }
    out
}

pub fn perturb_rows_csv(rows: &[PerturbRow]) -> String {
    let mut out = String::from("id,fsa,sa,sa_vacuous,dd,steps,complete,diagnostics\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{:.6},{},{},{}",
            csv_field(&r.id),
            r.fsa,
            r.sa,
            r.sa_vacuous,
            r.dd,
            r.steps,
            r.complete,
            csv_field(&r.diagnostics)
        );
    }
    out
}
