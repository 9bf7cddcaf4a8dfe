//! Surface forms for relational statements, relational QA, and trajectories.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::{PathStep, Trajectory};
use crate::world::{GridWorld, PoiId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationalForm {
    #[serde(rename = "statement-1")]
    Statement1,
    #[serde(rename = "statement-2")]
    Statement2,
    #[serde(rename = "statement-3")]
    Statement3,
    #[serde(rename = "qa-dist")]
    QaDist,
    #[serde(rename = "qa-azi")]
    QaAzi,
    #[serde(rename = "qa-both")]
    QaBoth,
}

impl RelationalForm {
    pub const STATEMENTS: [Self; 3] = [Self::Statement1, Self::Statement2, Self::Statement3];
    pub const QUESTIONS: [Self; 3] = [Self::QaDist, Self::QaAzi, Self::QaBoth];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Statement1 => "statement-1",
            Self::Statement2 => "statement-2",
            Self::Statement3 => "statement-3",
            Self::QaDist => "qa-dist",
            Self::QaAzi => "qa-azi",
            Self::QaBoth => "qa-both",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrajectoryForm {
    #[serde(rename = "narrative-1")]
    Narrative1,
    #[serde(rename = "narrative-2")]
    Narrative2,
    #[serde(rename = "qa-1")]
    Qa1,
    #[serde(rename = "qa-2")]
    Qa2,
}

impl TrajectoryForm {
    pub const ALL: [Self; 4] = [Self::Narrative1, Self::Narrative2, Self::Qa1, Self::Qa2];
    pub const STATEMENTS: [Self; 2] = [Self::Narrative1, Self::Narrative2];
    pub const QUESTIONS: [Self; 2] = [Self::Qa1, Self::Qa2];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Narrative1 => "narrative-1",
            Self::Narrative2 => "narrative-2",
            Self::Qa1 => "qa-1",
            Self::Qa2 => "qa-2",
        }
    }
}

/// Kilometres to whole meters, rounding halves up.
pub fn distance_meters(km: f64) -> i64 {
    (km * 1000.0 + 0.5).floor() as i64
}

/// Azimuth rounded to two decimals, kept inside (-180, 180].
pub fn azimuth_2dp(deg: f64) -> f64 {
    let r = (deg * 100.0).round() / 100.0;
    if r <= -180.0 {
        180.0
    } else if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Decimal text without trailing zeros: 30 -> "30", 45.5 -> "45.5".
pub fn trim_decimal(value: f64, dp: usize) -> String {
    let s = format!("{value:.dp$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".to_string() } else { t.to_string() }
    } else {
        s
    }
}

pub fn format_azimuth(deg: f64) -> String {
    trim_decimal(azimuth_2dp(deg), 2)
}

pub fn format_length(km: f64) -> String {
    trim_decimal(km, 3)
}

pub fn render_relational_text(form: RelationalForm, a: PoiId, b: PoiId, distance_m: i64, azimuth: f64) -> String {
    let az = format_azimuth(azimuth);
    match form {
        RelationalForm::Statement1 => {
            format!("The distance from {a} to {b} is {distance_m} meters, with an azimuth of {az} degrees.")
        }
        RelationalForm::Statement2 => format!(
            "The distance from {a} to {b} is {distance_m} meters, and the azimuth from {a} to {b} is {az} degrees."
        ),
        RelationalForm::Statement3 => {
            format!("The azimuth from {a} to {b} is {az} degrees, with a distance of {distance_m} meters.")
        }
        RelationalForm::QaDist => format!("Q: What is the distance from {a} to {b}?\nA: {distance_m} meters."),
        RelationalForm::QaAzi => format!("Q: What is the azimuth from {a} to {b}?\nA: {az} degrees."),
        RelationalForm::QaBoth => {
            format!("Q: What is the azimuth and distance from {a} to {b}?\nA: {az} degrees and {distance_m} meters.")
        }
    }
}

/// The question part of a QA form, for prompting a model at evaluation time.
pub fn relational_prompt(form: RelationalForm, a: PoiId, b: PoiId) -> Option<String> {
    match form {
        RelationalForm::QaDist => Some(format!("Q: What is the distance from {a} to {b}?\nA:")),
        RelationalForm::QaAzi => Some(format!("Q: What is the azimuth from {a} to {b}?\nA:")),
        RelationalForm::QaBoth => Some(format!("Q: What is the azimuth and distance from {a} to {b}?\nA:")),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationalSample {
    pub pair: (PoiId, PoiId),
    pub distance_m: i64,
    pub azimuth_deg: f64,
    pub form: RelationalForm,
    pub text: String,
}

pub fn render_relational(world: &GridWorld, a: PoiId, b: PoiId, form: RelationalForm) -> Result<RelationalSample> {
    let (pa, pb) = (world.position(a)?, world.position(b)?);
    let azimuth = pa.azimuth_to(&pb)?;
    let distance_m = distance_meters(pa.distance_to(&pb));
    let text = render_relational_text(form, a, b, distance_m, azimuth);
    Ok(RelationalSample { pair: (a, b), distance_m, azimuth_deg: azimuth_2dp(azimuth), form, text })
}

fn push_steps(out: &mut String, steps: &[PathStep], road_first: bool) {
    for (i, s) in steps.iter().enumerate() {
        let len = format_length(s.length);
        let clause = match (road_first, i) {
            (false, 0) => format!("go {} on {} for {len}km", s.direction, s.road),
            (false, _) => format!(", then go {} on {} for {len}km", s.direction, s.road),
            (true, 0) => format!("go along {} heading {} for {len}km", s.road, s.direction),
            (true, _) => format!(", then go along {} heading {} for {len}km", s.road, s.direction),
        };
        out.push_str(&clause);
    }
}

/// Narrative-1 text truncated after the given steps, without the arrival
/// clause: "Start at p_i" followed by ", then go ..." per step.
pub fn narrative_prefix(start: PoiId, steps: &[PathStep]) -> String {
    let mut out = format!("Start at {start}");
    for s in steps {
        let _ = write!(out, ", then go {} on {} for {}km", s.direction, s.road, format_length(s.length));
    }
    out
}

pub fn render_steps(form: TrajectoryForm, start: PoiId, end: PoiId, steps: &[PathStep]) -> Result<String> {
    if steps.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let text = match form {
        TrajectoryForm::Narrative1 => format!("{}, and you will arrive at {end}.", narrative_prefix(start, steps)),
        TrajectoryForm::Narrative2 => {
            let mut out = format!("To get from {start} to {end}, ");
            push_steps(&mut out, steps, true);
            out.push('.');
            out
        }
        TrajectoryForm::Qa1 | TrajectoryForm::Qa2 => {
            let mut out = format!("What is the shortest path from {start} to {end}?\nAnswer: ");
            let road_first = form == TrajectoryForm::Qa2;
            let mut body = String::new();
            push_steps(&mut body, steps, road_first);
            if road_first {
                body.replace_range(0..1, "G");
            } else {
                out.push_str("First, ");
            }
            out.push_str(&body);
            out.push('.');
            out
        }
    };
    Ok(text)
}

pub fn trajectory_prompt(start: PoiId, end: PoiId) -> String {
    format!("What is the shortest path from {start} to {end}?\nAnswer:")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub trajectory: Trajectory,
    pub form: TrajectoryForm,
    pub text: String,
}

pub fn render_trajectory(trajectory: &Trajectory, form: TrajectoryForm) -> Result<TrajectorySample> {
    let text = render_steps(form, trajectory.start, trajectory.end, &trajectory.steps)?;
    Ok(TrajectorySample { trajectory: trajectory.clone(), form, text })
}
