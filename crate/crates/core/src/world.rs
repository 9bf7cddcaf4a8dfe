//! The synthetic grid city: roads on every integer line, speed weights per
//! road, and POIs on distinct lattice intersections.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::rng;

/// Point of interest identifier, rendered `p_k` with `k` starting at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PoiId(pub u32);

/// Road identifier, rendered `r_k` with `k` starting at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoadId(pub u32);

macro_rules! prefixed_id {
    ($ty:ident, $prefix:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "_{}"), self.0)
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let digits = s
                    .strip_prefix(concat!($prefix, "_"))
                    .ok_or_else(|| Error::ConfigInvalid(format!("malformed id `{s}`")))?;
                digits
                    .parse()
                    .map($ty)
                    .map_err(|_| Error::ConfigInvalid(format!("malformed id `{s}`")))
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(D::Error::custom)
            }
        }
    };
}

prefixed_id!(PoiId, "p");
prefixed_id!(RoadId, "r");

/// A position in km; `x` points east, `y` points north.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub x: f64,
    pub y: f64,
}

impl Coordinate {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: &Coordinate) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Bearing to `other` in degrees, clockwise from north, in (-180, 180].
    pub fn azimuth_to(&self, other: &Coordinate) -> Result<f64> {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        Ok(normalize_degrees(dx.atan2(dy).to_degrees()))
    }

    pub fn is_lattice(&self) -> bool {
        self.x.fract() == 0.0 && self.y.fract() == 0.0
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Wrap an angle in degrees into (-180, 180].
pub fn normalize_degrees(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Runs east-west along `y = offset`.
    Horizontal,
    /// Runs north-south along `x = offset`.
    Vertical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: RoadId,
    pub orientation: Orientation,
    pub offset: u32,
    #[serde(serialize_with = "fixed6")]
    pub weight: f64,
}

impl Road {
    /// Whether `pos` lies on this road's line.
    pub fn contains(&self, pos: &Coordinate) -> bool {
        match self.orientation {
            Orientation::Horizontal => pos.y == f64::from(self.offset),
            Orientation::Vertical => pos.x == f64::from(self.offset),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poi {
    pub id: PoiId,
    pub x: u32,
    pub y: u32,
}

impl Poi {
    pub fn position(&self) -> Coordinate {
        Coordinate::new(f64::from(self.x), f64::from(self.y))
    }
}

/// Closed interval of road speed weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightRange {
    pub min: f64,
    pub max: f64,
}

impl Serialize for WeightRange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = format!("[{:.6},{:.6}]", self.min, self.max);
        RawValue::from_string(raw).map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [min, max] = <[f64; 2]>::deserialize(d)?;
        Ok(WeightRange { min, max })
    }
}

fn fixed6<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    RawValue::from_string(format!("{value:.6}"))
        .map_err(serde::ser::Error::custom)?
        .serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub grid_size: u32,
    pub n_poi: usize,
    pub weight_range: WeightRange,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            grid_size: 100,
            n_poi: 1024,
            weight_range: WeightRange { min: 0.8, max: 1.2 },
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn lattice_points(&self) -> usize {
        let side = self.grid_size as usize + 1;
        side * side
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::ConfigInvalid(format!(
                "grid_size must be at least 2, got {}",
                self.grid_size
            )));
        }
        if self.n_poi == 0 || self.n_poi > self.lattice_points() {
            return Err(Error::ConfigInvalid(format!(
                "n_poi must lie in 1..={}, got {}",
                self.lattice_points(),
                self.n_poi
            )));
        }
        let WeightRange { min, max } = self.weight_range;
        if !(min > 0.0 && min <= max && max.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "weight range [{min}, {max}] must satisfy 0 < min <= max"
            )));
        }
        Ok(())
    }
}

/// Immutable grid city. Shareable across threads once built.
#[derive(Clone, Debug)]
pub struct GridWorld {
    config: WorldConfig,
    roads: Vec<Road>,
    pois: Vec<Poi>,
    poi_index: HashMap<PoiId, usize>,
}

#[derive(Serialize, Deserialize)]
struct WorldDocument {
    config: WorldConfig,
    roads: Vec<Road>,
    pois: Vec<Poi>,
}

impl GridWorld {
    /// Build a world: one road per integer line, weights uniform in the
    /// configured range (quantized to 6 decimals so the JSON form is exact),
    /// and `n_poi` POIs on distinct lattice points.
    pub fn build(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let g = config.grid_size;
        let WeightRange { min, max } = config.weight_range;

        let mut weight_rng = rng::stream(config.seed, "world.road-weights");
        let mut roads = Vec::with_capacity(2 * (g as usize + 1));
        for (orientation, offsets) in [(Orientation::Horizontal, 0..=g), (Orientation::Vertical, 0..=g)] {
            for offset in offsets {
                let raw = if min == max { min } else { weight_rng.random_range(min..=max) };
                let weight = ((raw * 1e6).round() / 1e6).clamp(min, max);
                roads.push(Road {
                    id: RoadId(roads.len() as u32 + 1),
                    orientation,
                    offset,
                    weight,
                });
            }
        }

        let side = g as usize + 1;
        let mut poi_rng = rng::stream(config.seed, "world.poi-placement");
        let cells = index::sample(&mut poi_rng, config.lattice_points(), config.n_poi);
        let pois: Vec<Poi> = cells
            .iter()
            .enumerate()
            .map(|(k, cell)| Poi {
                id: PoiId(k as u32 + 1),
                x: (cell % side) as u32,
                y: (cell / side) as u32,
            })
            .collect();

        Ok(Self::assemble(config, roads, pois))
    }

    fn assemble(config: WorldConfig, roads: Vec<Road>, pois: Vec<Poi>) -> Self {
        let poi_index = pois.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        Self { config, roads, pois, poi_index }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn grid_size(&self) -> u32 {
        self.config.grid_size
    }

    pub fn roads(&self) -> &[Road] {
        &self.roads
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn poi_ids(&self) -> Vec<PoiId> {
        self.pois.iter().map(|p| p.id).collect()
    }

    pub fn poi(&self, id: PoiId) -> Result<&Poi> {
        self.poi_index
            .get(&id)
            .map(|&i| &self.pois[i])
            .ok_or_else(|| Error::UnknownPoi(id.to_string()))
    }

    pub fn position(&self, id: PoiId) -> Result<Coordinate> {
        self.poi(id).map(Poi::position)
    }

    pub fn road(&self, id: RoadId) -> Option<&Road> {
        (id.0 as usize).checked_sub(1).and_then(|i| self.roads.get(i))
    }

    pub fn road_or_err(&self, id: RoadId) -> Result<&Road> {
        self.road(id).ok_or_else(|| Error::UnknownRoad(id.to_string()))
    }

    /// The road along `y = offset`.
    pub fn horizontal_road(&self, offset: u32) -> &Road {
        &self.roads[offset as usize]
    }

    /// The road along `x = offset`.
    pub fn vertical_road(&self, offset: u32) -> &Road {
        &self.roads[self.config.grid_size as usize + 1 + offset as usize]
    }

    /// Roads whose line passes through `pos` (zero, one or two).
    pub fn roads_through(&self, pos: &Coordinate) -> Vec<&Road> {
        let g = f64::from(self.config.grid_size);
        let mut out = Vec::with_capacity(2);
        if pos.y.fract() == 0.0 && (0.0..=g).contains(&pos.y) && (0.0..=g).contains(&pos.x) {
            out.push(self.horizontal_road(pos.y as u32));
        }
        if pos.x.fract() == 0.0 && (0.0..=g).contains(&pos.x) && (0.0..=g).contains(&pos.y) {
            out.push(self.vertical_road(pos.x as u32));
        }
        out
    }

    pub fn contains(&self, pos: &Coordinate) -> bool {
        let g = f64::from(self.config.grid_size);
        (0.0..=g).contains(&pos.x) && (0.0..=g).contains(&pos.y)
    }

    /// Euclidean distance in km between two POIs.
    pub fn distance(&self, a: PoiId, b: PoiId) -> Result<f64> {
        Ok(self.position(a)?.distance_to(&self.position(b)?))
    }

    /// Azimuth in degrees from `a` to `b`, clockwise from north.
    pub fn azimuth(&self, a: PoiId, b: PoiId) -> Result<f64> {
        self.position(a)?.azimuth_to(&self.position(b)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = WorldDocument {
            config: self.config.clone(),
            roads: self.roads.clone(),
            pois: self.pois.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    /// Parse and validate a serialized world.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WorldDocument = serde_json::from_str(text).map_err(|e| Error::Schema {
            line: e.line(),
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Schema { line: 0, message };
        doc.config.validate()?;
        let g = doc.config.grid_size;
        if doc.roads.len() != 2 * (g as usize + 1) {
            return Err(bad(format!("expected {} roads, found {}", 2 * (g + 1), doc.roads.len())));
        }
        for (i, road) in doc.roads.iter().enumerate() {
            let (orientation, offset) = if i <= g as usize {
                (Orientation::Horizontal, i as u32)
            } else {
                (Orientation::Vertical, i as u32 - g - 1)
            };
            if road.id != RoadId(i as u32 + 1) || road.orientation != orientation || road.offset != offset {
                return Err(bad(format!("road {} is out of canonical order", road.id)));
            }
            let WeightRange { min, max } = doc.config.weight_range;
            if !(min..=max).contains(&road.weight) {
                return Err(bad(format!("road {} weight {} outside [{min}, {max}]", road.id, road.weight)));
            }
        }
        if doc.pois.len() != doc.config.n_poi {
            return Err(bad(format!("expected {} POIs, found {}", doc.config.n_poi, doc.pois.len())));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, poi) in doc.pois.iter().enumerate() {
            if poi.id != PoiId(k as u32 + 1) {
                return Err(bad(format!("POI {} is out of canonical order", poi.id)));
            }
            if poi.x > g || poi.y > g || !seen.insert((poi.x, poi.y)) {
                return Err(bad(format!("POI {} has an invalid or duplicate position", poi.id)));
            }
        }
        Ok(Self::assemble(doc.config, doc.roads, doc.pois))
    }

    /// World with explicit road weights (in canonical road order) and POI
    /// positions, validated like a deserialized document.
    pub fn from_parts(config: WorldConfig, weights: &[f64], positions: &[(u32, u32)]) -> Result<Self> {
        let g = config.grid_size;
        let doc = WorldDocument {
            config: WorldConfig { n_poi: positions.len(), ..config },
            roads: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| Road {
                    id: RoadId(i as u32 + 1),
                    orientation: if i <= g as usize { Orientation::Horizontal } else { Orientation::Vertical },
                    offset: if i <= g as usize { i as u32 } else { i as u32 - g - 1 },
                    weight: w,
                })
                .collect(),
            pois: positions
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| Poi { id: PoiId(k as u32 + 1), x, y })
                .collect(),
        };
        Self::from_json(&serde_json::to_string(&doc)?)
    }

    /// Uniform-weight world with POIs at the given lattice points.
    pub fn uniform(grid_size: u32, positions: &[(u32, u32)]) -> Result<Self> {
        let config = WorldConfig {
            grid_size,
            n_poi: positions.len(),
            weight_range: WeightRange { min: 1.0, max: 1.0 },
            seed: 0,
        };
        let weights = vec![1.0; 2 * (grid_size as usize + 1)];
        Self::from_parts(config, &weights, positions)
    }
}
