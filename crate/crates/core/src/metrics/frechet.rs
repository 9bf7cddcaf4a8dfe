//! Discrete Fréchet distance between node traces.

use crate::error::{Error, Result};
use crate::world::Coordinate;

/// Discrete Fréchet distance under the Euclidean ground metric.
///
/// Row-by-row dynamic program over the coupling table, O(n·m) time and
/// O(m) memory.
pub fn frechet(a: &[Coordinate], b: &[Coordinate]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPath);
    }
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = pa.distance_to(pb);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}
