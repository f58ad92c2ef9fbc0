//! Structured-text file formats for 3D landmark datasets and 2D landmark
//! observations.
//!
//! Both formats are line-oriented, human-readable, and self-describing: they
//! open with a magic line carrying a format version, declare the landmark
//! count `n` up front, and close with an explicit `end` line so that silent
//! truncation is always detected. Coordinates are written with 17 significant
//! digits, which round-trips every finite `f64` exactly.
//!
//! # Dataset format (`lift3d dataset v1`)
//!
//! ```text
//! lift3d dataset v1
//! n 4
//! unit arbitrary
//! samples 2
//! sample sheet-000
//! <x_1> <x_2> ... <x_n>
//! <y_1> <y_2> ... <y_n>
//! <z_1> <z_2> ... <z_n>
//! sample sheet-001
//! ...
//! end
//! ```
//!
//! # Landmark-observation format (`lift3d landmarks v1`)
//!
//! One observation set per file: after the header, exactly `n` lines follow,
//! each either `<u> <v>` for an observed landmark or the literal word
//! `missing` for an unobserved one.
//!
//! ```text
//! lift3d landmarks v1
//! n 4
//! 1.25e-1 -3.5e-1
//! missing
//! 0e0 1e0
//! -2e0 5e-1
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored everywhere. Parse
//! failures report the 1-based line number of the offending line; invariant
//! failures (wrong landmark count, non-finite values) name the offending
//! sample.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Landmarks2D, Shape3D};
use crate::textio::{expect_end, expect_magic, parse_floats, parse_header_rest,
                    parse_header_usize, Lines};

/// Magic first line of a 3D dataset file.
pub const DATASET_MAGIC: &str = "lift3d dataset v1";
/// Magic first line of a 2D landmark-observation file.
pub const LANDMARKS_MAGIC: &str = "lift3d landmarks v1";

/// Formats a coordinate with 17 significant digits (lossless for `f64`).
pub fn format_float(value: f64) -> String {
    crate::textio::format_float(value)
}

/// One named sample in a dataset: an id plus its 3×n landmark coordinates.
#[derive(Debug, Clone)]
pub struct DatasetSample {
    /// Free-text identifier (no whitespace restrictions beyond trimming).
    pub id: String,
    /// The 3D landmark shape.
    pub shape: Shape3D,
}

/// An in-memory 3D landmark dataset: a landmark count, a free-text unit
/// label, and a list of named samples all sharing that landmark count.
#[derive(Debug, Clone)]
pub struct DatasetFile {
    n: usize,
    unit: String,
    samples: Vec<DatasetSample>,
}

impl DatasetFile {
    /// Creates an empty dataset for shapes with `n` landmarks. Shapes need
    /// at least 3 landmarks, so smaller counts are rejected up front.
    pub fn new(n: usize, unit: impl Into<String>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvariantViolation(format!(
                "dataset landmark count must be at least 3, got {n}"
            )));
        }
        Ok(Self { n, unit: unit.into(), samples: Vec::new() })
    }

    /// Appends a sample, enforcing the declared landmark count.
    pub fn push(&mut self, id: impl Into<String>, shape: Shape3D) -> Result<()> {
        let id = id.into();
        if shape.n() != self.n {
            return Err(Error::InvariantViolation(format!(
                "sample '{}' has {} landmarks but the dataset declares {}",
                id,
                shape.n(),
                self.n
            )));
        }
        self.samples.push(DatasetSample { id, shape });
        Ok(())
    }

    /// Declared landmark count shared by every sample.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Free-text unit label (e.g. "arbitrary", "mm").
    pub fn unit(&self) -> &str {
        &self.unit
    }

    /// All samples in file order.
    pub fn samples(&self) -> &[DatasetSample] {
        &self.samples
    }

    /// Iterator over just the shapes, in file order.
    pub fn shapes(&self) -> impl Iterator<Item = &Shape3D> {
        self.samples.iter().map(|s| &s.shape)
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the dataset holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Serializes the dataset to its text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{DATASET_MAGIC}");
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "unit {}", self.unit);
        let _ = writeln!(out, "samples {}", self.samples.len());
        for sample in &self.samples {
            let _ = writeln!(out, "sample {}", sample.id);
            for row in 0..3 {
                let values: Vec<String> = (0..self.n)
                    .map(|j| format_float(sample.shape.coords()[(row, j)]))
                    .collect();
                let _ = writeln!(out, "{}", values.join(" "));
            }
        }
        let _ = writeln!(out, "end");
        out
    }

    /// Parses a dataset from its text format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        expect_magic(&mut lines, DATASET_MAGIC, "lift3d dataset")?;
        let n = parse_header_usize(&mut lines, "n")?;
        if n < 3 {
            return Err(Error::InvariantViolation(format!(
                "dataset landmark count must be at least 3, got {n}"
            )));
        }
        let unit = parse_header_rest(&mut lines, "unit")?;
        let declared = parse_header_usize(&mut lines, "samples")?;

        let mut dataset = DatasetFile::new(n, unit)?;
        for index in 0..declared {
            let (line_no, line) =
                lines.next_required(&format!("sample {} of {}", index + 1, declared))?;
            let id = match line.strip_prefix("sample") {
                Some(rest) if rest.starts_with(char::is_whitespace) => {
                    let id = rest.trim();
                    if id.is_empty() {
                        return Err(Error::ParseError {
                            line: line_no,
                            message: "sample id must not be empty".to_string(),
                        });
                    }
                    id.to_string()
                }
                _ => {
                    return Err(Error::ParseError {
                        line: line_no,
                        message: format!(
                            "expected 'sample <id>' ({} of {} declared), found '{line}'",
                            index + 1,
                            declared
                        ),
                    });
                }
            };
            let mut rows: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for (row, label) in ["x", "y", "z"].iter().enumerate() {
                let (line_no, line) =
                    lines.next_required(&format!("{label} row of sample '{id}'"))?;
                let values = parse_floats(line, line_no, &format!("{label} row of sample '{id}'"))?;
                if values.len() != n {
                    return Err(Error::InvariantViolation(format!(
                        "sample '{id}' line {line_no}: {label} row has {} values but the \
                         dataset declares n = {n}",
                        values.len()
                    )));
                }
                if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvariantViolation(format!(
                        "sample '{id}' line {line_no}: {label} row value {} is not finite",
                        pos + 1
                    )));
                }
                rows[row] = values;
            }
            let shape = Shape3D::from_rows(&rows[0], &rows[1], &rows[2])?;
            dataset.push(id, shape)?;
        }

        expect_end(&mut lines, "sample list")?;
        Ok(dataset)
    }

    /// Writes the dataset to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_text())
    }

    /// Reads a dataset from a file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&read_text(path.as_ref())?)
    }
}

/// Loads a 3D dataset file (see [`DatasetFile::load`]).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetFile> {
    DatasetFile::load(path)
}

/// Saves a 3D dataset file (see [`DatasetFile::save`]).
pub fn save_dataset(path: impl AsRef<Path>, dataset: &DatasetFile) -> Result<()> {
    dataset.save(path)
}

/// Serializes one 2D observation set to the landmark text format. Missing
/// landmarks are written as the literal word `missing`.
pub fn landmarks_to_text(landmarks: &Landmarks2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{LANDMARKS_MAGIC}");
    let _ = writeln!(out, "n {}", landmarks.n());
    for j in 0..landmarks.n() {
        if landmarks.mask()[j] {
            let _ = writeln!(
                out,
                "{} {}",
                format_float(landmarks.coords()[(0, j)]),
                format_float(landmarks.coords()[(1, j)])
            );
        } else {
            let _ = writeln!(out, "missing");
        }
    }
    let _ = writeln!(out, "end");
    out
}

/// Parses one 2D observation set from the landmark text format.
pub fn landmarks_from_text(text: &str) -> Result<Landmarks2D> {
    let mut lines = Lines::new(text);
    expect_magic(&mut lines, LANDMARKS_MAGIC, "lift3d landmarks")?;
    let n = parse_header_usize(&mut lines, "n")?;
    if n < 3 {
        return Err(Error::InvariantViolation(format!(
            "landmark count must be at least 3, got {n}"
        )));
    }

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut mask = vec![true; n];
    for j in 0..n {
        let (line_no, line) = lines.next_required(&format!("landmark {} of {}", j + 1, n))?;
        if line == "missing" {
            mask[j] = false;
            continue;
        }
        let values = parse_floats(line, line_no, &format!("landmark {}", j + 1))?;
        if values.len() != 2 {
            return Err(Error::ParseError {
                line: line_no,
                message: format!(
                    "landmark {} must be either 'missing' or two values '<u> <v>', got {} values",
                    j + 1,
                    values.len()
                ),
            });
        }
        if !values[0].is_finite() || !values[1].is_finite() {
            return Err(Error::InvariantViolation(format!(
                "landmark {} on line {line_no} is not finite",
                j + 1
            )));
        }
        u[j] = values[0];
        v[j] = values[1];
    }

    expect_end(&mut lines, "landmark list")?;
    Landmarks2D::from_rows_masked(&u, &v, &mask)
}

/// Writes one 2D observation set to a file.
pub fn save_landmarks2d(path: impl AsRef<Path>, landmarks: &Landmarks2D) -> Result<()> {
    write_text(path.as_ref(), &landmarks_to_text(landmarks))
}

/// Reads one 2D observation set from a file.
pub fn load_landmarks2d(path: impl AsRef<Path>) -> Result<Landmarks2D> {
    landmarks_from_text(&read_text(path.as_ref())?)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}
