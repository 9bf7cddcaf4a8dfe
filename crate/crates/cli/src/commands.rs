//! One function per pipeline stage.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use clap::Args;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spatialnav::datagen::regions::gen_region_qa;
use spatialnav::datagen::split::select_heldout;
use spatialnav::datagen::templates::{render_steps, TrajectoryForm};
use spatialnav::datagen::{
    exposure_partition, gen_step_probe_targets, plain_text, relational_records, route_pairs, split_pairs, trajectory_corpus,
    trajectory_records, CorpusRecord, Pair, SplitLabel, StepTargetCounts,
};
use spatialnav::io::{parse_jsonl, to_jsonl_line};
use spatialnav::metrics::report::{path_rows_csv, perturb_rows_csv, score_paths, score_perturbed_cases, PathCase, PerturbCase};
use spatialnav::metrics::consistency_triples;
use spatialnav::perturb::{gen_perturbed_cases, select_cases_by_threshold, turning_frequencies, PerturbSpec, PerturbedCase};
use spatialnav::probe::{
    composition_split, evaluate_probe, ids_of, split_by_group, train_linear, train_mlp, HiddenVectorRecord, RegressorModel,
};
use spatialnav::routing::TrajectoryRecord;
use spatialnav::{rng, Coordinate, Error, GridWorld, RoadGraph, Trajectory};

use crate::config::{ProbeKindSetting, ProbeMode, RunConfig};
use crate::manifest::{Artifacts, Manifest};
use crate::{Common, Format};

pub struct Context {
    pub cfg: RunConfig,
    pub common: Common,
    pub command: &'static str,
}

impl Context {
    fn artifacts(&self) -> anyhow::Result<Artifacts> {
        Ok(Artifacts::new(&self.common.out, self.command, self.cfg.seed, serde_json::to_value(&self.cfg)?)?)
    }

    fn default_input(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.common.out.join(name))
    }

    fn corpus_format(&self) -> anyhow::Result<Format> {
        match self.common.format {
            Format::Csv => Err(Error::ConfigInvalid("corpus output supports --format jsonl or txt".into()).into()),
            f => Ok(f),
        }
    }

    fn table_format(&self) -> anyhow::Result<Format> {
        match self.common.format {
            Format::Txt => Err(Error::ConfigInvalid("tabular output supports --format jsonl or csv".into()).into()),
            f => Ok(f),
        }
    }
}

#[derive(Args, Debug)]
pub struct WorldInput {
    /// World file; defaults to <out>/world.json.
    #[arg(long)]
    world: Option<PathBuf>,
}

fn load_world(ctx: &Context, art: &mut Artifacts, given: &Option<PathBuf>) -> anyhow::Result<GridWorld> {
    let path = ctx.default_input(given, "world.json");
    let bytes = art.input(&path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Schema { line: 0, message: e.to_string() })?;
    GridWorld::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_records<T: serde::de::DeserializeOwned>(art: &mut Artifacts, path: &Path) -> anyhow::Result<Vec<T>> {
    let bytes = art.input(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Schema { line: 0, message: e.to_string() })?;
    parse_jsonl(&text).with_context(|| format!("parsing {}", path.display()))
}

fn jsonl_lines<T: Serialize + Sync>(items: &[T]) -> anyhow::Result<Vec<String>> {
    Ok(items.par_iter().map(to_jsonl_line).collect::<spatialnav::Result<Vec<_>>>()?)
}

fn write_jsonl<T: Serialize + Sync>(art: &mut Artifacts, name: &str, items: &[T]) -> anyhow::Result<()> {
    let lines = jsonl_lines(items)?;
    art.write_chunks(name, lines.iter().map(|l| l.as_bytes()))?;
    Ok(())
}

fn write_corpus<M: Serialize + Sync>(art: &mut Artifacts, stem: &str, format: Format, records: &[CorpusRecord<M>]) -> anyhow::Result<()> {
    match format {
        Format::Txt => art.write(&format!("{stem}.txt"), plain_text(records).as_bytes())?,
        _ => write_jsonl(art, &format!("{stem}.jsonl"), records)?,
    }
    art.count(stem, records.len());
    Ok(())
}

pub fn gen_world(ctx: &Context) -> anyhow::Result<Manifest> {
    let mut art = ctx.artifacts()?;
    let world = GridWorld::build(ctx.cfg.world_config())?;
    let mut json = world.to_json()?;
    json.push('\n');
    art.write("world.json", json.as_bytes())?;
    art.count("pois", world.pois().len());
    art.count("roads", world.roads().len());
    Ok(art.finish()?)
}

/// Unordered pairs per split label, following the exposure regime if set.
fn pair_splits(ctx: &Context, world: &GridWorld) -> anyhow::Result<Vec<(SplitLabel, Vec<Pair>)>> {
    let pois = world.poi_ids();
    let seed = ctx.cfg.seed;
    Ok(match &ctx.cfg.exposure {
        None => {
            let s = split_pairs(&pois, ctx.cfg.ratio, seed)?;
            vec![(SplitLabel::Train, s.train), (SplitLabel::Test, s.test)]
        }
        Some(e) => {
            let p = exposure_partition(&pois, e.regime, e.n_heldout, ctx.cfg.ratio, seed)?;
            vec![(SplitLabel::Train, p.train), (SplitLabel::Test, p.main_test), (SplitLabel::Eval, p.eval)]
        }
    })
}

pub fn gen_relational(ctx: &Context, args: &WorldInput) -> anyhow::Result<Manifest> {
    let format = ctx.corpus_format()?;
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    for (split, pairs) in pair_splits(ctx, &world)? {
        let records = relational_records(&world, &pairs, split, ctx.cfg.templates, ctx.cfg.seed)?;
        write_corpus(&mut art, &format!("relational_{}", split.as_str()), format, &records)?;
    }
    Ok(art.finish()?)
}

pub fn gen_trajectories(ctx: &Context, args: &WorldInput) -> anyhow::Result<Manifest> {
    let format = ctx.corpus_format()?;
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let graph = RoadGraph::build(&world);
    for (split, pairs) in pair_splits(ctx, &world)? {
        let trajectories = route_pairs(&world, &graph, &pairs, false)?;
        let records = trajectory_corpus(&trajectories, split, ctx.cfg.templates, ctx.cfg.seed)?;
        write_corpus(&mut art, &format!("trajectories_{}", split.as_str()), format, &records)?;
        drop(records);
        let truth = trajectory_records(&trajectories);
        write_jsonl(&mut art, &format!("truth_{}.jsonl", split.as_str()), &truth)?;
    }
    Ok(art.finish()?)
}

pub fn gen_regions(ctx: &Context, args: &WorldInput) -> anyhow::Result<Manifest> {
    let format = ctx.corpus_format()?;
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let set = gen_region_qa(&world, &ctx.cfg.regions, ctx.cfg.seed)?;
    for split in [SplitLabel::Train, SplitLabel::Test, SplitLabel::Excluded] {
        let samples: Vec<_> = set.samples.iter().filter(|s| s.split == split).collect();
        let stem = format!("regions_{}", split.as_str());
        match format {
            Format::Txt => {
                let text: String = samples.iter().map(|s| format!("{}\n\n", s.text)).collect();
                art.write(&format!("{stem}.txt"), text.as_bytes())?;
            }
            _ => write_jsonl(&mut art, &format!("{stem}.jsonl"), &samples)?,
        }
        art.count(&stem, samples.len());
    }
    art.write_json("regions_reserved.json", &set.reserved)?;
    Ok(art.finish()?)
}

fn load_trajectories(art: &mut Artifacts, world: &GridWorld, path: &Path) -> anyhow::Result<Vec<Trajectory>> {
    let records: Vec<TrajectoryRecord> = read_records(art, path)?;
    records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            Trajectory::from_record(world, r).with_context(|| format!("{} line {}: trajectory `{}`", path.display(), i + 1, r.id))
        })
        .collect()
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[arg(long)]
    world: Option<PathBuf>,
    /// Ground-truth trajectories; defaults to <out>/truth_test.jsonl.
    #[arg(long)]
    truth: Option<PathBuf>,
}

pub fn gen_perturbed(ctx: &Context, args: &PerturbArgs) -> anyhow::Result<Manifest> {
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let path = ctx.default_input(&args.truth, "truth_test.jsonl");
    let mut trajectories = load_trajectories(&mut art, &world, &path)?;
    if let Some(cap) = ctx.cfg.perturb.max_trajectories {
        if cap < trajectories.len() {
            let mut r = rng::stream(ctx.cfg.seed, "cli.perturb-sample");
            let mut keep: Vec<usize> = index::sample(&mut r, trajectories.len(), cap).into_vec();
            keep.sort_unstable();
            trajectories = keep.into_iter().map(|i| trajectories[i].clone()).collect();
        }
    }
    let batch = gen_perturbed_cases(&world, &trajectories, &ctx.cfg.perturb.kinds, ctx.cfg.seed)?;
    write_jsonl(&mut art, "perturbed.jsonl", &batch.cases)?;
    #[derive(Serialize)]
    struct Skipped<'a> {
        trajectory: &'a str,
        kind: spatialnav::perturb::PerturbKind,
        reason: &'a str,
    }
    let skipped: Vec<Skipped> =
        batch.skipped.iter().map(|(t, k, r)| Skipped { trajectory: t, kind: *k, reason: r }).collect();
    write_jsonl(&mut art, "perturbed_skipped.jsonl", &skipped)?;
    art.count("trajectories", trajectories.len());
    art.count("cases", batch.cases.len());
    art.count("skipped", batch.skipped.len());
    Ok(art.finish()?)
}

pub fn gen_step_targets(ctx: &Context, args: &WorldInput) -> anyhow::Result<Manifest> {
    let format = ctx.corpus_format()?;
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let graph = RoadGraph::build(&world);
    let s = &ctx.cfg.step_targets;
    let heldout = select_heldout(&world.poi_ids(), s.n_heldout, ctx.cfg.seed);
    let set = gen_step_probe_targets(&world, &graph, &heldout, StepTargetCounts { train: s.train, eval: s.eval }, ctx.cfg.seed)?;
    for (split, targets) in [("train", &set.train), ("eval", &set.eval)] {
        let stem = format!("step_targets_{split}");
        match format {
            Format::Txt => {
                let text: String = targets.iter().map(|t| format!("{}\n\n", t.prefix_text)).collect();
                art.write(&format!("{stem}.txt"), text.as_bytes())?;
            }
            _ => write_jsonl(&mut art, &format!("{stem}.jsonl"), targets)?,
        }
        art.count(&stem, targets.len());
    }
    art.count("train_trajectories", set.train_trajectories.len());
    art.count("eval_trajectories", set.eval_trajectories.len());
    Ok(art.finish()?)
}

/// One model output: `{"id": ..., "text": ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub text: String,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    world: Option<PathBuf>,
    /// Ground-truth trajectories; defaults to <out>/truth_test.jsonl.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Perturbation cases; switches to continuation scoring.
    #[arg(long)]
    cases: Option<PathBuf>,
    /// Model outputs; without it the ground truth is rendered and scored.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

pub fn score(ctx: &Context, args: &ScoreArgs) -> anyhow::Result<Manifest> {
    let format = ctx.table_format()?;
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let predictions: Option<HashMap<String, String>> = match &args.predictions {
        Some(p) => Some(read_records::<Prediction>(&mut art, p)?.into_iter().map(|p| (p.id, p.text)).collect()),
        None => None,
    };
    let config = serde_json::json!({ "seed": ctx.cfg.seed, "self_scored": predictions.is_none() });

    if let Some(cases_path) = &args.cases {
        let Some(predictions) = predictions else {
            return Err(Error::ConfigInvalid("scoring perturbation cases needs --predictions".into()).into());
        };
        let cases: Vec<PerturbedCase> = read_records(&mut art, cases_path)?;
        let empty = String::new();
        let inputs: Vec<PerturbCase> = cases
            .iter()
            .map(|c| PerturbCase {
                id: &c.id,
                gt_start: c.gt_start,
                gt_end: c.gt_end,
                prefix: &c.prefix,
                continuation: predictions.get(&c.id).unwrap_or(&empty),
            })
            .collect();
        let missing = cases.iter().filter(|c| !predictions.contains_key(&c.id)).count();
        let report = score_perturbed_cases(&world, &inputs, config);
        art.write_json("score_perturbed.json", &report)?;
        match format {
            Format::Csv => art.write("score_perturbed_rows.csv", perturb_rows_csv(&report.rows).as_bytes())?,
            _ => write_jsonl(&mut art, "score_perturbed_rows.jsonl", &report.rows)?,
        }
        art.count("cases", cases.len());
        art.count("missing_predictions", missing);
        return Ok(art.finish()?);
    }

    let path = ctx.default_input(&args.truth, "truth_test.jsonl");
    let truths = load_trajectories(&mut art, &world, &path)?;
    let ids: Vec<String> = truths.iter().map(|t| spatialnav::datagen::trajectory_id(t.start, t.end)).collect();
    let texts: Vec<String> = match &predictions {
        Some(p) => ids.iter().map(|id| p.get(id).cloned().unwrap_or_default()).collect(),
        None => truths
            .par_iter()
            .map(|t| render_steps(TrajectoryForm::Narrative1, t.start, t.end, &t.steps))
            .collect::<spatialnav::Result<_>>()?,
    };
    let missing = predictions.as_ref().map_or(0, |p| ids.iter().filter(|id| !p.contains_key(*id)).count());
    let cases: Vec<PathCase> =
        (0..truths.len()).map(|i| PathCase { id: &ids[i], truth: &truths[i], text: &texts[i] }).collect();
    let report = score_paths(&world, &cases, config)?;
    art.write_json("score.json", &report)?;
    match format {
        Format::Csv => art.write("score_rows.csv", path_rows_csv(&report.rows).as_bytes())?,
        _ => write_jsonl(&mut art, "score_rows.jsonl", &report.rows)?,
    }
    art.count("cases", truths.len());
    art.count("missing_predictions", missing);
    Ok(art.finish()?)
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// World file, needed for composition probes.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Hidden-vector records.
    #[arg(long)]
    vectors: PathBuf,
    /// Separate evaluation records; otherwise the configured split is used.
    #[arg(long)]
    eval_vectors: Option<PathBuf>,
}

#[derive(Serialize)]
struct ProbeReport<'a> {
    mode: ProbeMode,
    kind: ProbeKindSetting,
    train_records: usize,
    eval_records: usize,
    epochs: Option<usize>,
    best_validation_loss: Option<f64>,
    rank_deficient: Option<bool>,
    evaluation: &'a spatialnav::probe::ProbeEvaluation,
}

#[derive(Serialize)]
struct ProbePrediction<'a> {
    id: &'a str,
    prediction: &'a [f64],
    target: &'a [f64],
}

fn step_group(r: &HiddenVectorRecord) -> &str {
    r.id.split_once('#').map_or(r.id.as_str(), |(t, _)| t)
}

pub fn probe(ctx: &Context, args: &ProbeArgs) -> anyhow::Result<Manifest> {
    let format = ctx.table_format()?;
    let p = &ctx.cfg.probe;
    let mut art = ctx.artifacts()?;
    let records: Vec<HiddenVectorRecord> = read_records(&mut art, &args.vectors)?;
    let given_eval: Option<Vec<HiddenVectorRecord>> = match &args.eval_vectors {
        Some(path) => Some(read_records(&mut art, path)?),
        None => None,
    };
    let seed = rng::derive_seed(ctx.cfg.seed, "cli.probe");
    let (train, eval) = match (p.mode, given_eval) {
        (ProbeMode::Composition, given) => {
            if given.is_some() {
                bail!(Error::ConfigInvalid("composition probes derive their own evaluation pairs".into()));
            }
            let world = load_world(ctx, &mut art, &args.world)?;
            composition_split(&world, &records, p.n_eval_pois, seed)?
        }
        (_, Some(eval)) => (records, eval),
        (ProbeMode::Coordinate, None) => split_by_group(&records, p.train_fraction, seed, |r| r.id.as_str())?,
        (ProbeMode::Step, None) => split_by_group(&records, p.train_fraction, seed, step_group)?,
    };
    if eval.is_empty() {
        return Err(Error::TooFewRecords { needed: 1, found: 0 }.into());
    }
    let mut mlp_cfg = p.mlp.clone();
    mlp_cfg.seed = rng::derive_seed(ctx.cfg.seed, "cli.probe-mlp");
    let model = match p.kind {
        ProbeKindSetting::Mlp => train_mlp(&train, &mlp_cfg)?,
        ProbeKindSetting::Linear => train_linear(&train)?,
    };
    let angular: &[usize] = if p.mode == ProbeMode::Composition { &[1] } else { &[] };
    let evaluation = evaluate_probe(&model, &ids_of(&train), &eval, angular)?;
    let (epochs, best_validation_loss, rank_deficient) = match &model {
        RegressorModel::Mlp { summary, .. } => (Some(summary.epochs), Some(summary.best_validation_loss), None),
        RegressorModel::Linear(m) => (None, None, Some(m.rank_deficient)),
    };
    let mut bin = Vec::new();
    model.save(&mut bin)?;
    art.write("probe_model.bin", &bin)?;
    art.write_json(
        "probe_report.json",
        &ProbeReport {
            mode: p.mode,
            kind: p.kind,
            train_records: train.len(),
            eval_records: eval.len(),
            epochs,
            best_validation_loss,
            rank_deficient,
            evaluation: &evaluation,
        },
    )?;
    let predicted = model.predict(&eval)?;
    match format {
        Format::Csv => {
            let k = eval[0].target.len();
            let mut out = String::from("id");
            for c in 0..k {
                let _ = write!(out, ",pred_{c},target_{c}");
            }
            out.push('\n');
            for (r, pv) in eval.iter().zip(&predicted) {
                out.push_str(&r.id);
                for (p, t) in pv.iter().zip(&r.target) {
                    let _ = write!(out, ",{p:.6},{t:.6}");
                }
                out.push('\n');
            }
            art.write("probe_predictions.csv", out.as_bytes())?;
        }
        _ => {
            let rows: Vec<ProbePrediction> =
                eval.iter().zip(&predicted).map(|(r, pv)| ProbePrediction { id: &r.id, prediction: pv, target: &r.target }).collect();
            write_jsonl(&mut art, "probe_predictions.jsonl", &rows)?;
        }
    }
    art.count("train_records", train.len());
    art.count("eval_records", eval.len());
    Ok(art.finish()?)
}

#[derive(Args, Debug)]
pub struct ConsistencyArgs {
    #[arg(long)]
    world: Option<PathBuf>,
    /// POI hidden-vector records.
    #[arg(long)]
    vectors: PathBuf,
}

pub fn consistency(ctx: &Context, args: &ConsistencyArgs) -> anyhow::Result<Manifest> {
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let records: Vec<HiddenVectorRecord> = read_records(&mut art, &args.vectors)?;
    let vectors: BTreeMap<String, Vec<f64>> = records.into_iter().map(|r| (r.id, r.vector)).collect();
    let coords: BTreeMap<String, Coordinate> = world.pois().iter().map(|p| (p.id.to_string(), p.position())).collect();
    let report = consistency_triples(&vectors, &coords, ctx.cfg.consistency.n_triples, ctx.cfg.seed)?;
    art.write_json("consistency.json", &report)?;
    art.count("triples", report.triples);
    art.count("ids", vectors.keys().filter(|k| coords.contains_key(*k)).count());
    Ok(art.finish()?)
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    #[arg(long)]
    world: Option<PathBuf>,
    /// Trajectory files to count; defaults to <out>/truth_train.jsonl.
    #[arg(long, num_args = 1..)]
    truth: Vec<PathBuf>,
    /// Perturbation cases for the threshold sweep.
    #[arg(long)]
    cases: Option<PathBuf>,
}

pub fn heatmap(ctx: &Context, args: &HeatmapArgs) -> anyhow::Result<Manifest> {
    let mut art = ctx.artifacts()?;
    let world = load_world(ctx, &mut art, &args.world)?;
    let paths = if args.truth.is_empty() { vec![ctx.common.out.join("truth_train.jsonl")] } else { args.truth.clone() };
    let mut trajectories = Vec::new();
    for path in &paths {
        trajectories.extend(load_trajectories(&mut art, &world, path)?);
    }
    let grid = turning_frequencies(&world, &trajectories)?;
    art.write("heatmap.csv", grid.to_csv().as_bytes())?;
    art.write("heatmap.pgm", &grid.to_pgm())?;
    art.count("trajectories", trajectories.len());
    art.count("turning_events", grid.total() as usize);
    if let Some(path) = &args.cases {
        let cases: Vec<PerturbedCase> = read_records(&mut art, path)?;
        let specs: Vec<PerturbSpec> = cases.into_iter().map(|c| c.spec).collect();
        let taus: BTreeSet<u64> = ctx.cfg.perturb.taus.iter().copied().collect();
        let mut sweep = String::from("tau,road,distance,direction,total\n");
        for tau in taus {
            let kept = select_cases_by_threshold(&specs, &grid, tau);
            let by = |k| kept.iter().filter(|s| s.kind == k).count();
            use spatialnav::perturb::PerturbKind as K;
            let _ = writeln!(sweep, "{tau},{},{},{},{}", by(K::Road), by(K::Distance), by(K::Direction), kept.len());
        }
        art.write("threshold_sweep.csv", sweep.as_bytes())?;
        art.count("cases", specs.len());
    }
    Ok(art.finish()?)
}
