//! Parsing of navigation text and relational answers.
//!
//! The grammar accepts the generation templates plus common surface variants
//! (verbs, units, casing) since scored text comes from a language model.
//! Parsing is prefix-based: it stops at the first clause it cannot read and
//! keeps what it has.

use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::{Direction, PathStep};
use crate::world::RoadId;

const DIR: &str = r"(north|south|east|west)";
const ROAD: &str = r"r_?(\d+)";
const NUM: &str = r"(\d+(?:\.\d+)?)";
const UNIT: &str = r"(?:\s*(kilometers|kilometres|kilometer|kilometre|km|meters|metres|meter|metre|m)\b)?";
const VERB: &str = r"(?:(?:go|head|drive|walk|travel|continue|turn|move|proceed)\s+)?";

static STEP_DIR_FIRST: LazyLock<String> =
    LazyLock::new(|| format!(r"{VERB}{DIR}\s+(?:on|along)\s+(?:road\s+)?{ROAD}\s+for\s+{NUM}{UNIT}"));
static STEP_ROAD_FIRST: LazyLock<String> = LazyLock::new(|| {
    format!(r"{VERB}(?:along|on)\s+(?:road\s+)?{ROAD}\s*,?\s+(?:heading|going|towards?)\s+{DIR}\s+for\s+{NUM}{UNIT}")
});

static FIRST_STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"(?:{})|(?:{})", *STEP_DIR_FIRST, *STEP_ROAD_FIRST)).unwrap()
});
static NEXT_STEP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^\s*(?P<conn>(?:[,;.]\s*)?(?:and\s+)?(?:(?:then|next|after\s+that|finally),?\s+)?)(?:(?:{})|(?:{}))",
        *STEP_DIR_FIRST, *STEP_ROAD_FIRST
    ))
    .unwrap()
});
static END: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*[,;.]?\s*(?:(?:and\s+)?(?:then\s+)?(?:you\s+will\s+|you'll\s+)?(?:arrive|reach|end\s+up)\s+(?:at\s+)?p_\d+|(?:to\s+(?:reach|arrive\s+at)\s+p_\d+))?\s*[.!]?\s*$",
    )
    .unwrap()
});
static PREAMBLE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*(?:start\s+at\s+p_\d+,?\s+then|to\s+get\s+from\s+p_\d+\s+to\s+p_\d+,?|what\s+is\s+the\s+shortest\s+path\s+from\s+p_\d+\s+to\s+p_\d+\?\s*answer:\s*(?:first,?)?)?\s*$",
    )
    .unwrap()
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Byte offset into the input text.
    pub position: usize,
    pub issue: String,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedPath {
    pub steps: Vec<PathStep>,
    pub diagnostics: Vec<Diagnostic>,
    pub complete: bool,
}

impl ParsedPath {
    fn note(&mut self, position: usize, issue: impl Into<String>) {
        self.diagnostics.push(Diagnostic { position, issue: issue.into() });
    }
}

fn normalize(text: &str) -> String {
    // diagnostic positions are byte offsets into this normalized text
    text.chars()
        .map(|c| match c {
            '\u{2212}' | '\u{2013}' | '\u{2014}' => '-',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

/// Build a step from captures. Step groups are 1..=4 (direction-first) or
/// 5..=8 (road-first), shifted by `base` extra leading groups.
fn step_from(caps: &Captures, base: usize, position: usize, parsed: &mut ParsedPath) -> PathStep {
    let g = |i: usize| caps.get(base + i).map(|m| m.as_str());
    let (dir, road, num, unit) = if g(1).is_some() { (g(1), g(2), g(3), g(4)) } else { (g(6), g(5), g(7), g(8)) };
    let direction = match dir {
        Some("north") => Direction::North,
        Some("south") => Direction::South,
        Some("east") => Direction::East,
        _ => Direction::West,
    };
    let road = RoadId(road.and_then(|r| r.parse().ok()).unwrap_or(u32::MAX));
    let value: f64 = num.and_then(|n| n.parse().ok()).unwrap_or(0.0);
    let length = match unit {
        None => {
            parsed.note(position, "missing length unit; assuming km");
            value
        }
        Some(u) if u.starts_with('k') => value,
        Some(_) => value / 1000.0,
    };
    if length <= 0.0 {
        parsed.note(position, "non-positive step length");
    }
    PathStep::new(road, direction, length)
}

/// Parse a navigation description into steps.
pub fn parse_path(text: &str) -> ParsedPath {
    let text = normalize(text);
    let mut parsed = ParsedPath::default();
    let Some(first) = FIRST_STEP.captures(&text) else {
        parsed.note(0, "no navigation step found");
        return parsed;
    };
    let whole = first.get(0).unwrap();
    if !PREAMBLE.is_match(&text[..whole.start()]) {
        parsed.note(0, "unrecognized text before the first step");
    }
    let step = step_from(&first, 0, whole.start(), &mut parsed);
    parsed.steps.push(step);
    let mut pos = whole.end();
    loop {
        let rest = &text[pos..];
        if END.is_match(rest) {
            parsed.complete = true;
            break;
        }
        let Some(caps) = NEXT_STEP.captures(rest) else {
            let skipped = rest.len() - rest.trim_start().len();
            parsed.note(pos + skipped, "unintelligible clause; parse stopped");
            break;
        };
        let conn = caps.name("conn").unwrap();
        if conn.as_str().trim().is_empty() {
            parsed.note(pos, "steps not separated by a connector");
        }
        // the connector group shifts step groups by one
        let step = step_from(&caps, 1, pos + conn.end(), &mut parsed);
        parsed.steps.push(step);
        pos += caps.get(0).unwrap().end();
    }
    parsed
}

/// Numeric content of a relational answer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationalAnswer {
    pub distance_m: Option<i64>,
    pub azimuth_deg: Option<f64>,
}

static DISTANCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(-?\d+(?:\.\d+)?)\s*(kilometers|kilometres|kilometer|kilometre|km|meters|metres|meter|metre|m)\b").unwrap()
});
static DEGREES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(-?\d+(?:\.\d+)?)\s*(?:degrees|degree|deg\b|°)").unwrap());

/// Extract a distance (normalized to integer meters) and/or an azimuth.
pub fn parse_relational_answer(text: &str) -> Result<RelationalAnswer> {
    let norm = normalize(text);
    let distance_m = DISTANCE.captures(&norm).and_then(|c| {
        let v: f64 = c[1].parse().ok()?;
        let meters = if c[2].starts_with('k') { v * 1000.0 } else { v };
        Some(meters.round() as i64)
    });
    let azimuth_deg = DEGREES.captures(&norm).and_then(|c| c[1].parse().ok());
    if distance_m.is_none() && azimuth_deg.is_none() {
        return Err(Error::NoNumericContent(text.to_string()));
    }
    Ok(RelationalAnswer { distance_m, azimuth_deg })
}
