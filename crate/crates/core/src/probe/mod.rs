//! Regression probes over exported hidden-state vectors.

pub mod linear;
pub mod mlp;

use std::collections::BTreeSet;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::stats::{regression_stats_lenient, RegressionStats};
use crate::rng;
use crate::world::{GridWorld, PoiId};

pub use linear::LinearModel;
pub use mlp::{Mlp, MlpConfig, TrainingSummary};

/// One line of a hidden-vector file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenVectorRecord {
    pub id: String,
    #[serde(default)]
    pub step: Option<usize>,
    #[serde(rename = "vec")]
    pub vector: Vec<f64>,
    pub target: Vec<f64>,
}

/// Check uniform vector and target dimensions and finite targets; returns
/// `(d, k)`.
pub fn check_records(records: &[HiddenVectorRecord]) -> Result<(usize, usize)> {
    let first = records.first().ok_or(Error::TooFewRecords { needed: 1, found: 0 })?;
    let (d, k) = (first.vector.len(), first.target.len());
    for (i, r) in records.iter().enumerate() {
        if r.vector.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: r.vector.len() });
        }
        if r.target.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: r.target.len() });
        }
        if !r.target.iter().chain(&r.vector).all(|v| v.is_finite()) {
            return Err(Error::Schema { line: i + 1, message: format!("non-finite value in record `{}`", r.id) });
        }
    }
    Ok((d, k))
}

fn design(records: &[HiddenVectorRecord]) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = records[0].vector.len();
    let k = records[0].target.len();
    (
        DMatrix::from_fn(records.len(), d, |r, c| records[r].vector[c]),
        DMatrix::from_fn(records.len(), k, |r, c| records[r].target[c]),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Mlp,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegressorModel {
    Mlp { config: MlpConfig, net: Mlp, summary: TrainingSummary },
    Linear(LinearModel),
}

impl RegressorModel {
    pub fn kind(&self) -> RegressorKind {
        match self {
            Self::Mlp { .. } => RegressorKind::Mlp,
            Self::Linear(_) => RegressorKind::Linear,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::Mlp { net, .. } => net.sizes()[0],
            Self::Linear(m) => m.coefficients.nrows() - 1,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Self::Mlp { net, .. } => *net.sizes().last().expect("network has layers"),
            Self::Linear(m) => m.coefficients.ncols(),
        }
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Mlp { net, .. } => net.predict(x),
            Self::Linear(m) => m.predict(x),
        }
    }

    pub fn predict(&self, records: &[HiddenVectorRecord]) -> Result<Vec<Vec<f64>>> {
        if records.is_empty() {
            return Ok(Vec::new());
        }
        let (d, _) = check_records(records)?;
        if d != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: d });
        }
        let (x, _) = design(records);
        let p = self.predict_matrix(&x);
        Ok(p.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Versioned binary: magic, format version, kind byte, length-prefixed
    /// JSON header, then the parameters as little-endian f64.
    pub fn save(&self, out: &mut impl Write) -> Result<()> {
        let (kind, header, params) = match self {
            Self::Mlp { config, net, summary } => (
                0u8,
                serde_json::json!({ "config": config, "sizes": net.sizes(), "summary": summary }),
                net.to_vec(),
            ),
            Self::Linear(m) => (
                1u8,
                serde_json::json!({
                    "rows": m.coefficients.nrows(),
                    "cols": m.coefficients.ncols(),
                    "rank": m.rank,
                    "rank_deficient": m.rank_deficient,
                }),
                m.coefficients.iter().copied().collect(),
            ),
        };
        let header = serde_json::to_vec(&header)?;
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&[kind])?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        out.write_all(&(params.len() as u64).to_le_bytes())?;
        for p in params {
            out.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(input: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Schema { line: 0, message: format!("model file: {m}") };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut kind = [0u8; 1];
        input.read_exact(&mut kind)?;
        let header_len = read_u64(input)? as usize;
        let mut header = vec![0u8; header_len];
        input.read_exact(&mut header)?;
        let header: serde_json::Value = serde_json::from_slice(&header)?;
        let n = read_u64(input)? as usize;
        let mut params = Vec::with_capacity(n);
        let mut f64buf = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut f64buf)?;
            params.push(f64::from_le_bytes(f64buf));
        }
        match kind[0] {
            0 => {
                let config: MlpConfig = serde_json::from_value(header["config"].clone())?;
                let sizes: Vec<usize> = serde_json::from_value(header["sizes"].clone())?;
                let summary: TrainingSummary = serde_json::from_value(header["summary"].clone())?;
                Ok(Self::Mlp { config, net: Mlp::from_vec(&sizes, &params)?, summary })
            }
            1 => {
                let rows: usize = serde_json::from_value(header["rows"].clone())?;
                let cols: usize = serde_json::from_value(header["cols"].clone())?;
                if rows * cols != params.len() {
                    return Err(Error::DimensionMismatch { expected: rows * cols, found: params.len() });
                }
                Ok(Self::Linear(LinearModel {
                    coefficients: DMatrix::from_column_slice(rows, cols, &params),
                    rank: serde_json::from_value(header["rank"].clone())?,
                    rank_deficient: serde_json::from_value(header["rank_deficient"].clone())?,
                }))
            }
            k => Err(bad(&format!("unknown model kind {k}"))),
        }
    }
}

const MAGIC: &[u8; 8] = b"SNPROBE\0";
const FORMAT_VERSION: u32 = 1;

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub const MIN_MLP_RECORDS: usize = 20;

pub fn train_mlp(records: &[HiddenVectorRecord], config: &MlpConfig) -> Result<RegressorModel> {
    if records.len() < MIN_MLP_RECORDS {
        return Err(Error::TooFewRecords { needed: MIN_MLP_RECORDS, found: records.len() });
    }
    check_records(records)?;
    let (x, y) = design(records);
    let (net, summary) = mlp::train(&x, &y, config)?;
    Ok(RegressorModel::Mlp { config: config.clone(), net, summary })
}

pub fn train_linear(records: &[HiddenVectorRecord]) -> Result<RegressorModel> {
    if records.is_empty() {
        return Err(Error::TooFewRecords { needed: 1, found: 0 });
    }
    check_records(records)?;
    let (x, y) = design(records);
    Ok(RegressorModel::Linear(linear::fit(&x, &y)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEvaluation {
    pub cases: usize,
    pub per_dimension: Vec<RegressionStats>,
    pub euclidean_mean: f64,
    pub euclidean_std: f64,
}

/// Score `model` on `records`. Any id also in `train_ids` is an error.
/// Dimensions listed in `angular_dims` are bearings in degrees.
pub fn evaluate_probe(
    model: &RegressorModel,
    train_ids: &BTreeSet<String>,
    records: &[HiddenVectorRecord],
    angular_dims: &[usize],
) -> Result<ProbeEvaluation> {
    let overlap = records.iter().filter(|r| train_ids.contains(&r.id)).count();
    if overlap > 0 {
        return Err(Error::TrainTestOverlap(overlap));
    }
    let pred = model.predict(records)?;
    let k = records[0].target.len();
    if k != model.output_dim() {
        return Err(Error::DimensionMismatch { expected: model.output_dim(), found: k });
    }
    let per_dimension = (0..k)
        .map(|c| {
            let p: Vec<f64> = pred.iter().map(|v| v[c]).collect();
            let t: Vec<f64> = records.iter().map(|r| r.target[c]).collect();
            regression_stats_lenient(&p, &t, angular_dims.contains(&c))
        })
        .collect::<Result<Vec<_>>>()?;
    let dist: Vec<f64> = pred
        .iter()
        .zip(records)
        .map(|(p, r)| p.iter().zip(&r.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    let n = dist.len() as f64;
    let euclidean_mean = dist.iter().sum::<f64>() / n;
    let euclidean_std = (dist.iter().map(|d| (d - euclidean_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ProbeEvaluation { cases: records.len(), per_dimension, euclidean_mean, euclidean_std })
}

/// Concatenate `a` then `b`; the target is `[distance_km, azimuth_deg]`
/// from `a` to `b`. Record ids must be POI ids.
pub fn pair_features(world: &GridWorld, a: &HiddenVectorRecord, b: &HiddenVectorRecord) -> Result<HiddenVectorRecord> {
    if a.vector.len() != b.vector.len() {
        return Err(Error::DimensionMismatch { expected: a.vector.len(), found: b.vector.len() });
    }
    let pa: PoiId = a.id.parse().map_err(|_| Error::UnknownPoi(a.id.clone()))?;
    let pb: PoiId = b.id.parse().map_err(|_| Error::UnknownPoi(b.id.clone()))?;
    let (ca, cb) = (world.position(pa)?, world.position(pb)?);
    let azimuth = ca.azimuth_to(&cb)?;
    let mut vector = a.vector.clone();
    vector.extend(&b.vector);
    Ok(HiddenVectorRecord { id: format!("{}|{}", a.id, b.id), step: None, vector, target: vec![ca.distance_to(&cb), azimuth] })
}

/// Seeded split of records into train and evaluation so that every record
/// sharing an id lands on the same side. `train_fraction` of the distinct
/// ids (rounded down) train.
pub fn split_by_id(
    records: &[HiddenVectorRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<HiddenVectorRecord>, Vec<HiddenVectorRecord>)> {
    split_by_group(records, train_fraction, seed, |r| r.id.as_str())
}

/// [`split_by_id`] over an arbitrary grouping key, e.g. the trajectory part
/// of a step id.
pub fn split_by_group<'a>(
    records: &'a [HiddenVectorRecord],
    train_fraction: f64,
    seed: u64,
    group: impl Fn(&'a HiddenVectorRecord) -> &'a str,
) -> Result<(Vec<HiddenVectorRecord>, Vec<HiddenVectorRecord>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::ConfigInvalid(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let mut keys: Vec<&str> = records.iter().map(&group).collect::<BTreeSet<_>>().into_iter().collect();
    keys.shuffle(&mut rng::stream(seed, "probe.split-ids"));
    let n_train = ((keys.len() as f64) * train_fraction).floor() as usize;
    let train_keys: BTreeSet<&str> = keys[..n_train].iter().copied().collect();
    let (train, eval): (Vec<&HiddenVectorRecord>, Vec<&HiddenVectorRecord>) =
        records.iter().partition(|r| train_keys.contains(group(r)));
    Ok((train.into_iter().cloned().collect(), eval.into_iter().cloned().collect()))
}

/// Ordered-pair composition records. `n_eval` POI records are held out;
/// training pairs join two remaining POIs and evaluation pairs join two
/// held-out POIs.
pub fn composition_split(
    world: &GridWorld,
    poi_records: &[HiddenVectorRecord],
    n_eval: usize,
    seed: u64,
) -> Result<(Vec<HiddenVectorRecord>, Vec<HiddenVectorRecord>)> {
    if n_eval < 2 || n_eval + 2 > poi_records.len() {
        return Err(Error::InsufficientPois { needed: n_eval + 2, found: poi_records.len() });
    }
    check_records(poi_records)?;
    let mut order: Vec<&HiddenVectorRecord> = poi_records.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.shuffle(&mut rng::stream(seed, "probe.composition-heldout"));
    let (eval, train) = order.split_at(n_eval);
    let pairs = |side: &[&HiddenVectorRecord]| -> Result<Vec<HiddenVectorRecord>> {
        let mut out = Vec::with_capacity(side.len() * (side.len() - 1));
        for a in side {
            for b in side {
                if a.id != b.id {
                    out.push(pair_features(world, a, b)?);
                }
            }
        }
        Ok(out)
    };
    Ok((pairs(train)?, pairs(eval)?))
}

pub fn ids_of(records: &[HiddenVectorRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.id.clone()).collect()
}
