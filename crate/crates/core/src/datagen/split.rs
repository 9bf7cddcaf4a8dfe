//! Train/test pair splits and held-out exposure regimes.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::world::PoiId;

pub type Pair = (PoiId, PoiId);

/// Every unordered pair `(a, b)` with `a` before `b` in `pois`.
pub fn unordered_pairs(pois: &[PoiId]) -> Vec<Pair> {
    let n = pois.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for (i, &a) in pois.iter().enumerate() {
        for &b in &pois[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

/// Both orderings of every unordered pair, `(a, b)` immediately before `(b, a)`.
pub fn both_orders(pairs: &[Pair]) -> Vec<Pair> {
    pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

pub fn cross_pairs(left: &[PoiId], right: &[PoiId]) -> Vec<Pair> {
    left.iter().flat_map(|&a| right.iter().map(move |&b| (a, b))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSplit {
    /// Unordered pairs.
    pub train: Vec<Pair>,
    pub test: Vec<Pair>,
}

impl PairSplit {
    pub fn train_ordered(&self) -> Vec<Pair> {
        both_orders(&self.train)
    }

    pub fn test_ordered(&self) -> Vec<Pair> {
        both_orders(&self.test)
    }
}

/// Shuffle unordered pairs and cut them by `ratio`; the train side gets
/// `floor(n * train / (train + test))` pairs.
pub fn split_pairs(pois: &[PoiId], ratio: (u32, u32), seed: u64) -> Result<PairSplit> {
    if ratio.0 == 0 || ratio.1 == 0 {
        return Err(Error::InvalidRatio(ratio.0, ratio.1));
    }
    let mut pairs = unordered_pairs(pois);
    pairs.shuffle(&mut rng::stream(seed, "datagen.split-pairs"));
    let n = pairs.len() as u128;
    let n_train = (n * u128::from(ratio.0) / u128::from(ratio.0 + ratio.1)) as usize;
    let test = pairs.split_off(n_train);
    Ok(PairSplit { train: pairs, test })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExposureRegime {
    Bridged,
    NoExposure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExposurePartition {
    pub regime: ExposureRegime,
    /// Held-out POIs, in input order.
    pub heldout: Vec<PoiId>,
    pub main: Vec<PoiId>,
    /// Unordered training pairs: the train share of main x main, plus every
    /// main-heldout pair under the bridged regime.
    pub train: Vec<Pair>,
    /// The test share of main x main.
    pub main_test: Vec<Pair>,
    /// Every unordered heldout x heldout pair.
    pub eval: Vec<Pair>,
}

pub fn exposure_partition(
    pois: &[PoiId],
    regime: ExposureRegime,
    n_heldout: usize,
    ratio: (u32, u32),
    seed: u64,
) -> Result<ExposurePartition> {
    if n_heldout >= pois.len() {
        return Err(Error::InvalidCount(format!("n_heldout {n_heldout} must be below the POI count {}", pois.len())));
    }
    let heldout = select_heldout(pois, n_heldout, seed);
    let main: Vec<PoiId> = pois.iter().copied().filter(|p| heldout.binary_search(p).is_err()).collect();
    let heldout: Vec<PoiId> = pois.iter().copied().filter(|p| heldout.binary_search(p).is_ok()).collect();
    let main_split = split_pairs(&main, ratio, seed)?;
    let mut train = main_split.train;
    if regime == ExposureRegime::Bridged {
        train.extend(cross_pairs(&main, &heldout));
    }
    let eval = unordered_pairs(&heldout);
    Ok(ExposurePartition { regime, heldout, main, train, main_test: main_split.test, eval })
}

/// Deterministic held-out subset, returned sorted.
pub fn select_heldout(pois: &[PoiId], n_heldout: usize, seed: u64) -> Vec<PoiId> {
    let mut rng = rng::stream(seed, "datagen.heldout");
    let mut out: Vec<PoiId> = index::sample(&mut rng, pois.len(), n_heldout).into_iter().map(|i| pois[i]).collect();
    out.sort_unstable();
    out
}
