//! Segment-world environments and their line-oriented `.env` file format.
//!
//! An environment is a soup of wall segments plus a lap anchor: the pose at
//! which the robot starts and the gate used to count completed laps.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::kb_io::{LineTokens, ParseError};

pub const ENV_MAGIC: &str = "iqfrl-env";
pub const ENV_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// A wall segment in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.x2 - self.x1).hypot(self.y2 - self.y1)
    }

    /// Closest point on the segment to `(x, y)`.
    pub fn nearest_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (self.x2 - self.x1, self.y2 - self.y1);
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return (self.x1, self.y1);
        }
        let t = (((x - self.x1) * dx + (y - self.y1) * dy) / len2).clamp(0.0, 1.0);
        (self.x1 + t * dx, self.y1 + t * dy)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let (px, py) = self.nearest_point(x, y);
        (x - px).hypot(y - py)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub segments: Vec<Segment>,
    pub lap_anchor: Pose,
    /// +1 counts laps crossing the anchor along its heading, -1 against it.
    pub lap_direction: i32,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid environment: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Environment {
    /// Distance from `(x, y)` to the nearest wall, with the segment index.
    pub fn nearest_wall(&self, x: f64, y: f64) -> Option<(usize, f64)> {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.distance_to(x, y)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("distances are finite"))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.segments.len() < 3 {
            return Err(EnvError::Invalid(format!(
                "need at least 3 segments, found {}",
                self.segments.len()
            )));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if ![s.x1, s.y1, s.x2, s.y2].iter().all(|v| v.is_finite()) {
                return Err(EnvError::Invalid(format!("segment {i} has non-finite coordinates")));
            }
            if s.length() == 0.0 {
                return Err(EnvError::Invalid(format!("segment {i} has zero length")));
            }
        }
        let a = self.lap_anchor;
        if ![a.x, a.y, a.theta].iter().all(|v| v.is_finite()) {
            return Err(EnvError::Invalid("lap anchor has non-finite coordinates".to_string()));
        }
        if self.lap_direction != 1 && self.lap_direction != -1 {
            return Err(EnvError::Invalid(format!(
                "lap direction must be 1 or -1, found {}",
                self.lap_direction
            )));
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{ENV_MAGIC} {ENV_VERSION}");
        let a = self.lap_anchor;
        let _ = writeln!(out, "anchor {} {} {} {}", a.x, a.y, a.theta, self.lap_direction);
        for s in &self.segments {
            let _ = writeln!(out, "segment {} {} {} {}", s.x1, s.y1, s.x2, s.y2);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (line_no, first) = lines.next().ok_or_else(|| ParseError {
            line: 1,
            col: 1,
            token: "<empty>".to_string(),
            message: "empty document".to_string(),
        })?;
        let mut toks = LineTokens::new(line_no, first);
        toks.expect_keyword(ENV_MAGIC)?;
        toks.expect_keyword(ENV_VERSION)?;
        toks.expect_end()?;

        let mut anchor = None;
        let mut segments = Vec::new();
        for (line_no, raw) in lines {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut toks = LineTokens::new(line_no, line);
            let (col, word) = toks.expect("a directive")?;
            match word {
                "anchor" => {
                    let x = toks.expect_f64("anchor x")?;
                    let y = toks.expect_f64("anchor y")?;
                    let theta = toks.expect_f64("anchor heading")?;
                    let (dcol, dtok) = toks.expect("lap direction")?;
                    let dir: i32 = dtok
                        .parse()
                        .map_err(|_| toks.error(dcol, dtok, "expected an integer lap direction"))?;
                    toks.expect_end()?;
                    if anchor.replace((Pose { x, y, theta }, dir)).is_some() {
                        return Err(toks.error(col, word, "duplicate anchor").into());
                    }
                }
                "segment" => {
                    let x1 = toks.expect_f64("segment x1")?;
                    let y1 = toks.expect_f64("segment y1")?;
                    let x2 = toks.expect_f64("segment x2")?;
                    let y2 = toks.expect_f64("segment y2")?;
                    toks.expect_end()?;
                    segments.push(Segment { x1, y1, x2, y2 });
                }
                other => return Err(toks.error(col, other, "unknown directive").into()),
            }
        }
        let (lap_anchor, lap_direction) = anchor
            .ok_or_else(|| EnvError::Invalid("missing anchor line".to_string()))?;
        let env = Environment { segments, lap_anchor, lap_direction };
        env.validate()?;
        Ok(env)
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), EnvError> {
        std::fs::write(path, self.serialize()).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn fixture_path(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(name)
    }

    /// 6x4 m rectangular room.
    pub fn room() -> Environment {
        Environment::load(&fixture_path("room.env")).expect("room fixture parses")
    }

    /// L-shaped corridor with a door gap in one wall.
    pub fn corridor() -> Environment {
        Environment::load(&fixture_path("corridor.env")).expect("corridor fixture parses")
    }

    /// Two rooms joined by a doorway in a dividing wall.
    pub fn rooms() -> Environment {
        Environment::load(&fixture_path("rooms.env")).expect("rooms fixture parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        let env = fixtures::corridor();
        let back = Environment::parse(&env.serialize()).unwrap();
        assert_eq!(env, back);
    }

    #[test]
    fn too_few_segments_is_invalid() {
        let text = "iqfrl-env v1\nanchor 0 0 0 1\nsegment 0 0 1 0\nsegment 1 0 1 1\n";
        match Environment::parse(text) {
            Err(EnvError::Invalid(msg)) => assert!(msg.contains("3 segments")),
            other => panic!("expected invalid environment, got {other:?}"),
        }
    }

    #[test]
    fn fixtures_validate() {
        for env in [fixtures::room(), fixtures::corridor(), fixtures::rooms()] {
            env.validate().unwrap();
        }
    }

    #[test]
    fn nearest_wall_on_room() {
        let env = fixtures::room();
        // Room spans (0,0)-(6,4); point near the bottom wall.
        let (_, d) = env.nearest_wall(1.0, 0.3).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
    }
}
