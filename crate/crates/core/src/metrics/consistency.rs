//! Agreement between latent geometry and map geometry over POI triples.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::stats::{pearson, spearman};
use crate::error::{Error, Result};
use crate::rng;
use crate::world::Coordinate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub spearman: f64,
    pub pearson: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub distance: Correlations,
    pub angle: Correlations,
    pub triples: usize,
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Angle at `o` between rays to `a` and `b`, in radians; None if a ray is null.
/// Uses 2·atan2(|û − v̂|, |û + v̂|), which stays accurate near 0 and π.
fn vertex_angle(o: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let u: Vec<f64> = a.iter().zip(o).map(|(x, y)| x - y).collect();
    let v: Vec<f64> = b.iter().zip(o).map(|(x, y)| x - y).collect();
    let (nu, nv) = (norm(&u), norm(&v));
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in u.iter().zip(&v) {
        let (p, q) = (x / nu, y / nv);
        diff += (p - q) * (p - q);
        sum += (p + q) * (p + q);
    }
    Some(snap(2.0 * diff.sqrt().atan2(sum.sqrt())))
}

/// Angles on a 1e-12 rad grid, so geometrically equal angles tie exactly
/// when ranked instead of differing in the last bit.
fn snap(rad: f64) -> f64 {
    (rad * 1e12).round() / 1e12
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sample `n_triples` triples of distinct ids present in both maps and
/// correlate latent with physical pairwise distances (three per triple) and
/// vertex angles (three per triple).
pub fn consistency_triples(
    vectors: &BTreeMap<String, Vec<f64>>,
    coords: &BTreeMap<String, Coordinate>,
    n_triples: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let ids: Vec<&String> = vectors.keys().filter(|k| coords.contains_key(*k)).collect();
    if ids.len() < 3 {
        return Err(Error::TooFewIds { needed: 3, found: ids.len() });
    }
    let dim = vectors[ids[0]].len();
    if let Some(bad) = ids.iter().find(|k| vectors[**k].len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: vectors[*bad].len() });
    }
    let latent: Vec<&[f64]> = ids.iter().map(|k| vectors[*k].as_slice()).collect();
    let physical: Vec<[f64; 2]> = ids.iter().map(|k| [coords[*k].x, coords[*k].y]).collect();

    let (mut ld, mut pd, mut la, mut pa) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in 0..n_triples {
        let mut r = rng::substream(seed, "metrics.consistency-triple", t as u64);
        let pick = index::sample(&mut r, ids.len(), 3);
        let (i, j, k) = (pick.index(0), pick.index(1), pick.index(2));
        for (a, b) in [(i, j), (j, k), (i, k)] {
            ld.push(l2(latent[a], latent[b]));
            pd.push(l2(&physical[a], &physical[b]));
        }
        for (o, a, b) in [(i, j, k), (j, i, k), (k, i, j)] {
            let lat = vertex_angle(latent[o], latent[a], latent[b]);
            let phy = vertex_angle(&physical[o], &physical[a], &physical[b]);
            if let (Some(x), Some(y)) = (lat, phy) {
                la.push(x);
                pa.push(y);
            }
        }
    }
    let corr = |x: &[f64], y: &[f64]| Correlations { spearman: spearman(x, y), pearson: pearson(x, y), samples: x.len() };
    Ok(ConsistencyReport { distance: corr(&ld, &pd), angle: corr(&la, &pa), triples: n_triples })
}
