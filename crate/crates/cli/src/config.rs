//! Run configuration, read from a JSON file. Every field has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spatialnav::datagen::{ExposureRegime, RegionConfig, StepTargetCounts, TemplatePolicy};
use spatialnav::perturb::PerturbKind;
use spatialnav::probe::MlpConfig;
use spatialnav::world::WeightRange;
use spatialnav::{Error, WorldConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub world: WorldSection,
    /// Train:test ratio over unordered POI pairs.
    pub ratio: (u32, u32),
    pub exposure: Option<ExposureSection>,
    pub templates: TemplatePolicy,
    pub regions: RegionConfig,
    pub step_targets: StepTargetSection,
    pub perturb: PerturbSection,
    pub probe: ProbeSection,
    pub consistency: ConsistencySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            world: WorldSection::default(),
            ratio: (8, 2),
            exposure: None,
            templates: TemplatePolicy::SampleOne,
            regions: RegionConfig::default(),
            step_targets: StepTargetSection::default(),
            perturb: PerturbSection::default(),
            probe: ProbeSection::default(),
            consistency: ConsistencySection::default(),
        }
    }
}

/// World parameters; the seed comes from the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub grid_size: u32,
    pub n_poi: usize,
    pub weight_range: WeightRange,
}

impl Default for WorldSection {
    fn default() -> Self {
        let d = WorldConfig::default();
        Self { grid_size: d.grid_size, n_poi: d.n_poi, weight_range: d.weight_range }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureSection {
    pub regime: ExposureRegime,
    pub n_heldout: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepTargetSection {
    pub n_heldout: usize,
    pub train: usize,
    pub eval: usize,
}

impl Default for StepTargetSection {
    fn default() -> Self {
        let c = StepTargetCounts::default();
        Self { n_heldout: 100, train: c.train, eval: c.eval }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    pub kinds: Vec<PerturbKind>,
    /// Thresholds for the turning-frequency sweep.
    pub taus: Vec<u64>,
    /// Cap on trajectories drawn for perturbation; all when unset.
    pub max_trajectories: Option<usize>,
}

impl Default for PerturbSection {
    fn default() -> Self {
        Self { kinds: PerturbKind::ALL.to_vec(), taus: vec![0, 1, 2, 5, 10, 20, 50, 100], max_trajectories: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    /// POI vectors against their 2-D coordinates.
    Coordinate,
    /// Concatenated POI pairs against distance and azimuth.
    Composition,
    /// Navigation-prefix vectors against the position reached.
    Step,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKindSetting {
    Mlp,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub mode: ProbeMode,
    pub kind: ProbeKindSetting,
    pub train_fraction: f64,
    pub n_eval_pois: usize,
    pub mlp: MlpConfig,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self { mode: ProbeMode::Coordinate, kind: ProbeKindSetting::Mlp, train_fraction: 0.9, n_eval_pois: 100, mlp: MlpConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencySection {
    pub n_triples: usize,
}

impl Default for ConsistencySection {
    fn default() -> Self {
        Self { n_triples: 10_000 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            grid_size: self.world.grid_size,
            n_poi: self.world.n_poi,
            weight_range: self.world.weight_range,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.world_config().validate()?;
        if self.ratio.0 == 0 || self.ratio.1 == 0 {
            return Err(Error::InvalidRatio(self.ratio.0, self.ratio.1));
        }
        if self.perturb.kinds.is_empty() {
            return Err(Error::ConfigInvalid("perturb.kinds is empty".into()));
        }
        if !(self.probe.train_fraction > 0.0 && self.probe.train_fraction < 1.0) {
            return Err(Error::ConfigInvalid("probe.train_fraction must lie in (0, 1)".into()));
        }
        if self.consistency.n_triples == 0 {
            return Err(Error::ConfigInvalid("consistency.n_triples must be positive".into()));
        }
        self.probe.mlp.validate()
    }
}
