//! Training datasets: raw scans paired with either expert commands
//! (regression) or a situation class (classification), plus text-file IO.
//!
//! The file layout follows the knowledge-base format: a header with the beam
//! count, kind, and universes, then one `example` line per record. Regression
//! records end with `velocity vlin vang`, classification records with
//! `velocity class`.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::fuzzy::{VarKind, VariableUniverse};
use crate::kb_io::{set_universe, LineTokens, ParseError};
use crate::model::Universes;

pub const DATASET_MAGIC: &str = "iqfrl-dataset";
pub const DATASET_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One labelled control example: a scan, the measured velocity, and the
/// commands the expert issued for it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub distances: Vec<f64>,
    pub velocity: f64,
    pub vlin: f64,
    pub vang: f64,
}

/// One labelled situation example.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassExample {
    pub distances: Vec<f64>,
    pub velocity: f64,
    pub class_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub universes: Universes,
    pub examples: Vec<TrainingExample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDataset {
    pub universes: Universes,
    pub n_classes: u32,
    pub examples: Vec<ClassExample>,
}

fn write_header(out: &mut String, u: &Universes, kind_line: &str) {
    let _ = writeln!(out, "{DATASET_MAGIC} {DATASET_VERSION}");
    let _ = writeln!(out, "beams {}", u.n_beams);
    let _ = writeln!(out, "kind {kind_line}");
    for uv in [u.distance, u.beam, u.velocity, u.vlin, u.vang] {
        let _ = writeln!(out, "universe {} {} {}", uv.kind, uv.min, uv.max);
    }
}

fn write_numbers(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        let _ = write!(out, " {v}");
    }
}

impl Dataset {
    pub fn new(universes: Universes) -> Self {
        Self { universes, examples: Vec::new() }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        write_header(&mut out, &self.universes, "regression");
        for e in &self.examples {
            out.push_str("example");
            write_numbers(&mut out, e.distances.iter().copied());
            write_numbers(&mut out, [e.velocity, e.vlin, e.vang]);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (universes, kind, records) = parse_common(text)?;
        let (line_no, kind) = kind;
        if kind != DataKind::Regression {
            return Err(header_error(line_no, "expected 'kind regression'"));
        }
        let mut examples = Vec::with_capacity(records.len());
        for (line_no, line) in records {
            let mut toks = LineTokens::new(line_no, line);
            toks.expect_keyword("example")?;
            let distances = read_distances(&mut toks, universes.n_beams)?;
            let velocity = toks.expect_f64("measured velocity")?;
            let vlin = toks.expect_f64("linear velocity command")?;
            let vang = toks.expect_f64("angular velocity command")?;
            toks.expect_end()?;
            examples.push(TrainingExample { distances, velocity, vlin, vang });
        }
        Ok(Self { universes, examples })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Ok(Self::parse(&read_file(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        write_file(path, &self.serialize())
    }
}

impl ClassDataset {
    pub fn new(universes: Universes, n_classes: u32) -> Self {
        Self { universes, n_classes, examples: Vec::new() }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        write_header(&mut out, &self.universes, &format!("classification {}", self.n_classes));
        for e in &self.examples {
            out.push_str("example");
            write_numbers(&mut out, e.distances.iter().copied());
            write_numbers(&mut out, [e.velocity]);
            let _ = write!(out, " {}", e.class_id);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (universes, kind, records) = parse_common(text)?;
        let (line_no, kind) = kind;
        let n_classes = match kind {
            DataKind::Classification(n) => n,
            DataKind::Regression => {
                return Err(header_error(line_no, "expected 'kind classification <n>'"))
            }
        };
        let mut examples = Vec::with_capacity(records.len());
        for (line_no, line) in records {
            let mut toks = LineTokens::new(line_no, line);
            toks.expect_keyword("example")?;
            let distances = read_distances(&mut toks, universes.n_beams)?;
            let velocity = toks.expect_f64("measured velocity")?;
            let class_id = toks.expect_u32("class id")?;
            toks.expect_end()?;
            if class_id == 0 || class_id > n_classes {
                return Err(header_error(
                    line_no,
                    &format!("class id {class_id} outside 1..={n_classes}"),
                ));
            }
            examples.push(ClassExample { distances, velocity, class_id });
        }
        Ok(Self { universes, n_classes, examples })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Ok(Self::parse(&read_file(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        write_file(path, &self.serialize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataKind {
    Regression,
    Classification(u32),
}

fn header_error(line: usize, message: &str) -> ParseError {
    ParseError { line, col: 1, token: "<record>".to_string(), message: message.to_string() }
}

fn read_distances(toks: &mut LineTokens<'_>, n_beams: usize) -> Result<Vec<f64>, ParseError> {
    let mut distances = Vec::with_capacity(n_beams);
    for _ in 0..n_beams {
        distances.push(toks.expect_f64("beam distance")?);
    }
    Ok(distances)
}

type Records<'a> = Vec<(usize, &'a str)>;

fn parse_common(text: &str) -> Result<(Universes, (usize, DataKind), Records<'_>), ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line_no, first) = lines.next().ok_or_else(|| header_error(1, "empty document"))?;
    let mut toks = LineTokens::new(line_no, first);
    toks.expect_keyword(DATASET_MAGIC)?;
    toks.expect_keyword(DATASET_VERSION)?;
    toks.expect_end()?;

    let mut n_beams: Option<(usize, usize)> = None;
    let mut kind: Option<(usize, DataKind)> = None;
    let mut universe_lines: Vec<VariableUniverse> = Vec::new();
    let mut records = Vec::new();
    let mut last_line = line_no;

    for (line_no, raw) in lines {
        last_line = line_no;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut toks = LineTokens::new(line_no, line);
        let (col, word) = toks.expect("a directive")?;
        match word {
            "beams" => {
                n_beams = Some((line_no, toks.expect_usize("beam count")?));
                toks.expect_end()?;
            }
            "kind" => {
                let (kcol, kname) = toks.expect("dataset kind")?;
                let parsed = match kname {
                    "regression" => DataKind::Regression,
                    "classification" => DataKind::Classification(toks.expect_u32("class count")?),
                    other => return Err(toks.error(kcol, other, "unknown dataset kind")),
                };
                toks.expect_end()?;
                kind = Some((line_no, parsed));
            }
            "universe" => {
                let (kcol, kname) = toks.expect("universe name")?;
                let var = VarKind::from_name(kname)
                    .ok_or_else(|| toks.error(kcol, kname, "unknown universe name"))?;
                let min = toks.expect_f64("universe minimum")?;
                let max = toks.expect_f64("universe maximum")?;
                toks.expect_end()?;
                let uv = VariableUniverse::new(var, min, max)
                    .map_err(|e| toks.error(kcol, kname, &e.to_string()))?;
                universe_lines.push(uv);
            }
            "example" => records.push((line_no, line)),
            other => return Err(toks.error(col, other, "unknown directive")),
        }
    }

    let (_, n_beams) =
        n_beams.ok_or_else(|| header_error(last_line, "missing 'beams' line"))?;
    let kind = kind.ok_or_else(|| header_error(last_line, "missing 'kind' line"))?;
    let mut universes = Universes::with_beams(n_beams);
    for uv in universe_lines {
        set_universe(&mut universes, uv).map_err(|m| header_error(last_line, &m))?;
    }
    Ok((universes, kind, records))
}

fn read_file(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), DatasetError> {
    std::fs::write(path, contents).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}
