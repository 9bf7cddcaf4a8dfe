//! Relational and trajectory corpora.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{both_orders, Pair};
use super::templates::{self, RelationalForm, TrajectoryForm};
use crate::error::Result;
use crate::rng;
use crate::routing::{PathStep, RoadGraph, Trajectory, TrajectoryRecord};
use crate::world::{GridWorld, PoiId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Test,
    Eval,
    Excluded,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Test => "test",
            SplitLabel::Eval => "eval",
            SplitLabel::Excluded => "excluded",
        }
    }
}

/// Which template forms each pair is rendered with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplatePolicy {
    /// One statement form per training pair, one QA form per evaluation pair.
    #[default]
    SampleOne,
    /// Every statement form for training pairs, every QA form for evaluation.
    AllForms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord<M> {
    pub text: String,
    pub meta: M,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationalMeta {
    pub a: PoiId,
    pub b: PoiId,
    pub distance_m: i64,
    #[serde(serialize_with = "crate::io::fixed2")]
    pub azimuth_deg: f64,
    pub form: RelationalForm,
    pub split: SplitLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub id: String,
    pub start: PoiId,
    pub end: PoiId,
    pub steps: Vec<PathStep>,
    #[serde(serialize_with = "crate::io::fixed6")]
    pub cost: f64,
    pub form: TrajectoryForm,
    pub split: SplitLabel,
}

pub type RelationalRecord = CorpusRecord<RelationalMeta>;
pub type TrajectoryCorpusRecord = CorpusRecord<TrajectoryMeta>;

fn pair_key(a: PoiId, b: PoiId) -> u64 {
    (u64::from(a.0) << 32) | u64::from(b.0)
}

fn pick_forms<F: Copy>(policy: TemplatePolicy, forms: &[F], seed: u64, label: &str, key: u64) -> Vec<F> {
    match policy {
        TemplatePolicy::AllForms => forms.to_vec(),
        TemplatePolicy::SampleOne => {
            let mut r = rng::substream(seed, label, key);
            vec![*forms.choose(&mut r).expect("form list is non-empty")]
        }
    }
}

/// Canonical order is the order produced by the caller's sort; this applies
/// the seeded shuffle on top.
fn shuffle_records<T>(records: &mut [T], seed: u64, label: &str) {
    records.shuffle(&mut rng::stream(seed, label));
}

/// Render every ordered pair of `pairs` (given unordered) as relational text.
/// Training pairs take statement forms and other splits take QA forms.
pub fn relational_records(
    world: &GridWorld,
    pairs: &[Pair],
    split: SplitLabel,
    policy: TemplatePolicy,
    seed: u64,
) -> Result<Vec<RelationalRecord>> {
    let mut ordered = both_orders(pairs);
    ordered.par_sort_unstable();
    let forms: &[RelationalForm] =
        if split == SplitLabel::Train { &RelationalForm::STATEMENTS } else { &RelationalForm::QUESTIONS };
    let nested: Vec<Vec<RelationalRecord>> = ordered
        .par_iter()
        .map(|&(a, b)| {
            pick_forms(policy, forms, seed, "datagen.relational-form", pair_key(a, b))
                .into_iter()
                .map(|form| {
                    let s = templates::render_relational(world, a, b, form)?;
                    Ok(CorpusRecord {
                        text: s.text,
                        meta: RelationalMeta { a, b, distance_m: s.distance_m, azimuth_deg: s.azimuth_deg, form, split },
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<RelationalRecord> = nested.into_iter().flatten().collect();
    shuffle_records(&mut records, seed, &format!("datagen.relational-order.{}", split.as_str()));
    Ok(records)
}

pub fn trajectory_id(start: PoiId, end: PoiId) -> String {
    format!("{start}-{end}")
}

/// Fastest paths for every ordered pair of `pairs` (given unordered), one
/// search per source POI, returned sorted by `(start, end)`.
pub fn trajectories_for_pairs(world: &GridWorld, graph: &RoadGraph, pairs: &[Pair]) -> Result<Vec<Trajectory>> {
    route_pairs(world, graph, pairs, true)
}

/// Like [`trajectories_for_pairs`]; with `keep_nodes` unset the visited-node
/// lists are dropped, which keeps full-world runs small.
pub fn route_pairs(world: &GridWorld, graph: &RoadGraph, pairs: &[Pair], keep_nodes: bool) -> Result<Vec<Trajectory>> {
    let mut by_source: BTreeMap<PoiId, Vec<PoiId>> = BTreeMap::new();
    for (a, b) in both_orders(pairs) {
        by_source.entry(a).or_default().push(b);
    }
    let sources: Vec<(PoiId, Vec<PoiId>)> = by_source
        .into_iter()
        .map(|(s, mut t)| {
            t.sort_unstable();
            (s, t)
        })
        .collect();
    let nested: Vec<Vec<Trajectory>> = sources
        .par_iter()
        .map(|(s, targets)| {
            let mut ts = graph.shortest_paths_from(world, *s, targets)?;
            if !keep_nodes {
                for t in ts.iter_mut() {
                    t.nodes = Vec::new();
                }
            }
            Ok(ts)
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Ground-truth records for a set of trajectories.
pub fn trajectory_records(trajectories: &[Trajectory]) -> Vec<TrajectoryRecord> {
    trajectories.iter().map(|t| t.to_record(trajectory_id(t.start, t.end))).collect()
}

/// Render trajectories as corpus text. Training trajectories take narrative
/// forms, other splits the QA forms.
pub fn trajectory_corpus(
    trajectories: &[Trajectory],
    split: SplitLabel,
    policy: TemplatePolicy,
    seed: u64,
) -> Result<Vec<TrajectoryCorpusRecord>> {
    let forms: &[TrajectoryForm] =
        if split == SplitLabel::Train { &TrajectoryForm::STATEMENTS } else { &TrajectoryForm::QUESTIONS };
    let nested: Vec<Vec<TrajectoryCorpusRecord>> = trajectories
        .par_iter()
        .map(|t| {
            pick_forms(policy, forms, seed, "datagen.trajectory-form", pair_key(t.start, t.end))
                .into_iter()
                .map(|form| {
                    let text = templates::render_steps(form, t.start, t.end, &t.steps)?;
                    Ok(CorpusRecord {
                        text,
                        meta: TrajectoryMeta {
                            id: trajectory_id(t.start, t.end),
                            start: t.start,
                            end: t.end,
                            steps: t.steps.clone(),
                            cost: t.cost,
                            form,
                            split,
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<TrajectoryCorpusRecord> = nested.into_iter().flatten().collect();
    shuffle_records(&mut records, seed, &format!("datagen.trajectory-order.{}", split.as_str()));
    Ok(records)
}

/// Plain-text variant: only the text of each record, separated by blank lines.
pub fn plain_text<M>(records: &[CorpusRecord<M>]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.text);
        out.push_str("\n\n");
    }
    out
}
