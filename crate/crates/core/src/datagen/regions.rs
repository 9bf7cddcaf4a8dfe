//! POI-in-region yes/no questions over circles and triangles.

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::SplitLabel;
use super::templates::trim_decimal;
use crate::error::{Error, Result};
use crate::rng;
use crate::world::{GridWorld, PoiId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    Circle {
        center: PoiId,
        #[serde(serialize_with = "crate::io::fixed2")]
        radius_km: f64,
    },
    Triangle {
        vertices: [PoiId; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionQaSample {
    pub region: Region,
    pub query: PoiId,
    pub label: bool,
    pub split: SplitLabel,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionConfig {
    /// Samples over non-reserved POIs, divided between train and test by `ratio`.
    pub n_samples: usize,
    pub ratio: (u32, u32),
    /// Samples whose query POI is reserved.
    pub n_excluded: usize,
    pub radius_min_km: f64,
    pub radius_max_km: f64,
    pub reserved_fraction: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self { n_samples: 10_000, ratio: (8, 2), n_excluded: 1000, radius_min_km: 2.0, radius_max_km: 30.0, reserved_fraction: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionQaSet {
    pub reserved: Vec<PoiId>,
    pub samples: Vec<RegionQaSample>,
}

/// Squared distance against a radius in hundredths of a km, exactly.
pub fn in_circle(center: (i64, i64), radius_cents: i64, q: (i64, i64)) -> bool {
    let (dx, dy) = (q.0 - center.0, q.1 - center.1);
    10_000 * (dx * dx + dy * dy) <= radius_cents * radius_cents
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Boundary-inclusive point-in-triangle by integer orientation signs.
pub fn in_triangle(v: [(i64, i64); 3], q: (i64, i64)) -> bool {
    let d1 = cross(v[0], v[1], q);
    let d2 = cross(v[1], v[2], q);
    let d3 = cross(v[2], v[0], q);
    let has_neg = d1 < 0 || d2 < 0 || d3 < 0;
    let has_pos = d1 > 0 || d2 > 0 || d3 > 0;
    !(has_neg && has_pos)
}

fn render(region: &Region, query: PoiId, label: bool) -> String {
    let answer = if label { "yes" } else { "no" };
    match region {
        Region::Circle { center, radius_km } => format!(
            "Q: Is {query} inside the circle centered at {center} with a radius of {} km?\nA: {answer}.",
            trim_decimal(*radius_km, 2)
        ),
        Region::Triangle { vertices: [a, b, c] } => {
            format!("Q: Is {query} inside the triangle formed by {a}, {b} and {c}?\nA: {answer}.")
        }
    }
}

pub fn region_label(world: &GridWorld, region: &Region, query: PoiId) -> Result<bool> {
    let at = |id: PoiId| -> Result<(i64, i64)> {
        let p = world.poi(id)?;
        Ok((i64::from(p.x), i64::from(p.y)))
    };
    let q = at(query)?;
    Ok(match region {
        Region::Circle { center, radius_km } => in_circle(at(*center)?, (radius_km * 100.0).round() as i64, q),
        Region::Triangle { vertices } => in_triangle([at(vertices[0])?, at(vertices[1])?, at(vertices[2])?], q),
    })
}

const MAX_ATTEMPTS: usize = 10_000;

/// One sample with a randomly chosen target label; regions and queries are
/// redrawn until the label matches or the attempt budget runs out.
fn draw_sample(
    world: &GridWorld,
    region_pool: &[PoiId],
    query_pool: &[PoiId],
    config: &RegionConfig,
    split: SplitLabel,
    rng: &mut rng::StreamRng,
) -> Result<RegionQaSample> {
    let want: bool = rng.random();
    let circle: bool = rng.random();
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let region = if circle {
            let center = *region_pool.choose(rng).expect("region pool is non-empty");
            let r: f64 = rng.random_range(config.radius_min_km..=config.radius_max_km);
            Region::Circle { center, radius_km: (r * 100.0).round() / 100.0 }
        } else {
            let picks = index::sample(rng, region_pool.len(), 3);
            let vertices = [region_pool[picks.index(0)], region_pool[picks.index(1)], region_pool[picks.index(2)]];
            let pts: Vec<(i64, i64)> = vertices
                .iter()
                .map(|&v| world.poi(v).map(|p| (i64::from(p.x), i64::from(p.y))))
                .collect::<Result<_>>()?;
            if cross(pts[0], pts[1], pts[2]) == 0 {
                continue;
            }
            Region::Triangle { vertices }
        };
        let query = *query_pool.choose(rng).expect("query pool is non-empty");
        if let Region::Circle { center, .. } = region {
            if center == query {
                continue;
            }
        }
        let label = region_label(world, &region, query)?;
        let done = label == want;
        last = Some((region, query, label));
        if done {
            break;
        }
    }
    let (region, query, label) = last.ok_or(Error::PoolExhausted { wanted: 1, available: 0 })?;
    let text = render(&region, query, label);
    Ok(RegionQaSample { region, query, label, split, text })
}

pub fn gen_region_qa(world: &GridWorld, config: &RegionConfig, seed: u64) -> Result<RegionQaSet> {
    let pois = world.poi_ids();
    if pois.len() < 4 {
        return Err(Error::InsufficientPois { needed: 4, found: pois.len() });
    }
    if config.ratio.0 == 0 || config.ratio.1 == 0 {
        return Err(Error::InvalidRatio(config.ratio.0, config.ratio.1));
    }
    if !(config.radius_min_km > 0.0 && config.radius_min_km <= config.radius_max_km) {
        return Err(Error::ConfigInvalid("radius range must satisfy 0 < min <= max".into()));
    }
    let n_reserved = ((pois.len() as f64) * config.reserved_fraction).floor() as usize;
    if pois.len() - n_reserved < 3 || (config.n_excluded > 0 && n_reserved == 0) {
        return Err(Error::InsufficientPois { needed: 4, found: pois.len() });
    }
    let mut r = rng::stream(seed, "datagen.region-reserved");
    let mut reserved: Vec<PoiId> = index::sample(&mut r, pois.len(), n_reserved).into_iter().map(|i| pois[i]).collect();
    reserved.sort_unstable();
    let pool: Vec<PoiId> = pois.iter().copied().filter(|p| reserved.binary_search(p).is_err()).collect();

    let n_train = config.n_samples * config.ratio.0 as usize / (config.ratio.0 + config.ratio.1) as usize;
    let mut samples = Vec::with_capacity(config.n_samples + config.n_excluded);
    for i in 0..config.n_samples + config.n_excluded {
        let mut r = rng::substream(seed, "datagen.region-sample", i as u64);
        let (split, queries) = if i < n_train {
            (SplitLabel::Train, &pool)
        } else if i < config.n_samples {
            (SplitLabel::Test, &pool)
        } else {
            (SplitLabel::Excluded, &reserved)
        };
        samples.push(draw_sample(world, &pool, queries, config, split, &mut r)?);
    }
    Ok(RegionQaSet { reserved, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldConfig;
    use rand::Rng;

    /// Barycentric oracle in floating point with a tolerance band.
    fn bary_inside(v: [(i64, i64); 3], q: (i64, i64)) -> bool {
        let f = |p: (i64, i64)| (p.0 as f64, p.1 as f64);
        let ((x1, y1), (x2, y2), (x3, y3), (x, y)) = (f(v[0]), f(v[1]), f(v[2]), f(q));
        let det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
        let l1 = ((y2 - y3) * (x - x3) + (x3 - x2) * (y - y3)) / det;
        let l2 = ((y3 - y1) * (x - x3) + (x1 - x3) * (y - y3)) / det;
        let l3 = 1.0 - l1 - l2;
        l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12
    }

    #[test]
    fn geometry_examples() {
        assert!(in_circle((0, 0), 500, (3, 0)));
        assert!(in_circle((0, 0), 500, (3, 4)));
        assert!(!in_circle((0, 0), 499, (3, 4)));
        let tri = [(0, 0), (10, 0), (0, 10)];
        assert!(in_triangle(tri, (0, 0)));
        assert!(in_triangle(tri, (5, 5)));
        assert!(in_triangle(tri, (2, 2)));
        assert!(!in_triangle(tri, (11, 11)));
        assert!(!in_triangle(tri, (6, 5)));
    }

    #[test]
    fn triangle_matches_barycentric_oracle() {
        let mut r = rng::stream(0, "test");
        let mut checked = 0;
        while checked < 10_000 {
            let mut p = || (r.random_range(0..30i64), r.random_range(0..30i64));
            let v = [p(), p(), p()];
            let q = p();
            if cross(v[0], v[1], v[2]) == 0 {
                continue;
            }
            assert_eq!(in_triangle(v, q), bary_inside(v, q), "{v:?} {q:?}");
            checked += 1;
        }
    }

    #[test]
    fn generated_labels_are_exact_and_reserved_pois_stay_out_of_training() {
        let w = GridWorld::build(WorldConfig { grid_size: 30, n_poi: 80, seed: 9, ..Default::default() }).unwrap();
        let cfg = RegionConfig { n_samples: 400, n_excluded: 100, ..Default::default() };
        let set = gen_region_qa(&w, &cfg, 3).unwrap();
        assert_eq!(set.reserved.len(), 20);
        assert_eq!(set.samples.len(), 500);
        let mut yes = 0;
        for s in &set.samples {
            assert_eq!(region_label(&w, &s.region, s.query).unwrap(), s.label);
            let ids: Vec<PoiId> = match &s.region {
                Region::Circle { center, radius_km } => {
                    assert!((2.0..=30.0).contains(radius_km));
                    vec![*center]
                }
                Region::Triangle { vertices } => vertices.to_vec(),
            };
            assert!(ids.iter().all(|p| set.reserved.binary_search(p).is_err()));
            let query_reserved = set.reserved.binary_search(&s.query).is_ok();
            assert_eq!(query_reserved, s.split == SplitLabel::Excluded);
            yes += usize::from(s.label);
        }
        assert!((150..=350).contains(&yes), "{yes}");
        assert_eq!(gen_region_qa(&w, &cfg, 3).unwrap(), set);
        let tiny = GridWorld::uniform(4, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert!(matches!(gen_region_qa(&tiny, &cfg, 0), Err(Error::InsufficientPois { .. })));
    }
}
