//! Corpus generation: templates, split protocols, region QA, and step targets.

pub mod corpus;
pub mod regions;
pub mod split;
pub mod steps;
pub mod templates;

pub use corpus::{
    plain_text, relational_records, route_pairs, trajectories_for_pairs, trajectory_corpus, trajectory_id, trajectory_records,
    CorpusRecord, RelationalMeta, RelationalRecord, SplitLabel, TemplatePolicy, TrajectoryCorpusRecord, TrajectoryMeta,
};
pub use regions::{gen_region_qa, Region, RegionConfig, RegionQaSample, RegionQaSet};
pub use split::{exposure_partition, split_pairs, ExposurePartition, ExposureRegime, Pair, PairSplit};
pub use steps::{gen_step_probe_targets, StepProbeTarget, StepTargetCounts, StepTargetSet};
pub use templates::{render_relational, render_trajectory, RelationalForm, RelationalSample, TrajectoryForm, TrajectorySample};
