//! Dataset manifests: loading label files, amalgamating sources and
//! assigning stratified train/validation/test splits.
//!
//! A manifest CSV has the header `id,path,label,source,split` (UTF-8, LF line
//! endings). Label files only need `id` and `label`; other columns are
//! optional and unknown columns are ignored.
//!
//! # Split procedure
//!
//! For each class `c` (in ascending order) holding `n` records:
//!
//! 1. `n_test = round_half_up(test_frac * n)`,
//!    `n_val = round_half_up(val_frac * (n - n_test))`, the rest is train.
//! 2. The class's records are ordered by `(source, id)` and shuffled with a
//!    Fisher-Yates pass (`i` from `n - 1` down to `1`, swap `i` with
//!    `next() % (i + 1)`) driven by a SplitMix64 generator. One generator,
//!    seeded with the split seed, is shared by all classes in class order.
//! 3. The first `n_test` shuffled records go to test, the next `n_val` to
//!    validation, and the rest to train.
//!
//! Any class with records whose split would leave one of the three sets
//! empty is rejected.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 5;
pub const DEFAULT_TEST_FRAC: f64 = 0.2;
pub const DEFAULT_VAL_FRAC: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Kaggle,
    Idrid,
}

impl Source {
    pub fn name(&self) -> &'static str {
        match self {
            Source::Kaggle => "kaggle",
            Source::Idrid => "idrid",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kaggle" => Ok(Source::Kaggle),
            "idrid" => Ok(Source::Idrid),
            other => Err(format!(
                "unknown source {other:?} (expected kaggle or idrid)"
            )),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Unassigned,
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Unassigned => "unassigned",
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "unassigned" => Ok(Split::Unassigned),
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub path: PathBuf,
    pub label: u8,
    pub source: Source,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub path: PathBuf,
    pub loaded_at: SystemTime,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<DatasetRecord>,
    pub provenance: Vec<Provenance>,
}

/// Record counts indexed by class label.
pub type ClassCounts = [usize; NUM_CLASSES];

fn validate_label(raw: &str) -> std::result::Result<u8, LabelIssue> {
    let v: i64 = raw.trim().parse().map_err(|_| LabelIssue::NotInteger)?;
    if (0..NUM_CLASSES as i64).contains(&v) {
        Ok(v as u8)
    } else {
        Err(LabelIssue::OutOfRange(v))
    }
}

enum LabelIssue {
    NotInteger,
    OutOfRange(i64),
}

/// Parses a DR grade in `0..=4`.
pub fn parse_label(raw: &str) -> Result<u8> {
    match validate_label(raw) {
        Ok(v) => Ok(v),
        Err(LabelIssue::OutOfRange(v)) => Err(Error::LabelOutOfRange(v)),
        Err(LabelIssue::NotInteger) => Err(Error::InvalidSpec(format!(
            "label {raw:?} is not an integer"
        ))),
    }
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = [0; NUM_CLASSES];
        for r in &self.records {
            counts[r.label as usize] += 1;
        }
        counts
    }

    pub fn class_counts_in(&self, split: Split) -> ClassCounts {
        let mut counts = [0; NUM_CLASSES];
        for r in self.records.iter().filter(|r| r.split == split) {
            counts[r.label as usize] += 1;
        }
        counts
    }

    /// Fills empty record paths with the first existing `<dir>/<id>.<ext>`.
    /// Returns the ids that could not be resolved.
    pub fn attach_image_dir(&mut self, dir: &Path, extensions: &[&str]) -> Vec<String> {
        let mut missing = Vec::new();
        for r in self
            .records
            .iter_mut()
            .filter(|r| r.path.as_os_str().is_empty())
        {
            let found = extensions
                .iter()
                .map(|ext| dir.join(format!("{}.{ext}", r.id)))
                .find(|p| p.is_file());
            match found {
                Some(p) => r.path = p,
                None => missing.push(r.id.clone()),
            }
        }
        missing
    }

    /// Writes the manifest CSV (`id,path,label,source,split`).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        self.write_records(&mut w)
            .map_err(|e| Error::csv(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_records(&mut w).expect("writing to memory");
        String::from_utf8(w.into_inner().expect("flushing memory writer")).expect("utf-8 csv")
    }

    fn write_records<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record(["id", "path", "label", "source", "split"])?;
        for r in &self.records {
            w.write_record([
                r.id.as_str(),
                &r.path.to_string_lossy(),
                &r.label.to_string(),
                r.source.name(),
                r.split.name(),
            ])?;
        }
        Ok(())
    }
}

/// Loads a label or manifest CSV.
///
/// `source` tags every record; when `None`, a `source` column is required.
/// Relative paths are resolved against the CSV's directory and stored as
/// absolute paths.
pub fn load_manifest(path: impl AsRef<Path>, source: Option<Source>) -> Result<Manifest> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let header_err = |reason: String| Error::Parse {
        path: path.into(),
        row: 1,
        reason,
    };
    let id_col = col("id").ok_or_else(|| header_err("missing column \"id\"".into()))?;
    let label_col = col("label").ok_or_else(|| header_err("missing column \"label\"".into()))?;
    let path_col = col("path");
    let split_col = col("split");
    let source_col = col("source");
    if source.is_none() && source_col.is_none() {
        return Err(header_err(
            "no source tag given and no \"source\" column".into(),
        ));
    }
    let base = path.parent().unwrap_or(Path::new(""));

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |reason: String| Error::Parse {
            path: path.into(),
            row: line,
            reason,
        };
        let field = |i: Option<usize>| i.and_then(|i| row.get(i)).unwrap_or("");

        let id = field(Some(id_col)).to_string();
        if id.is_empty() {
            return Err(parse_err("empty id".into()));
        }
        let label = match validate_label(field(Some(label_col))) {
            Ok(l) => l,
            Err(LabelIssue::OutOfRange(label)) => {
                return Err(Error::LabelOutOfRangeAt {
                    path: path.into(),
                    row: line,
                    label,
                })
            }
            Err(LabelIssue::NotInteger) => {
                return Err(parse_err(format!(
                    "label {:?} is not an integer",
                    field(Some(label_col))
                )))
            }
        };
        let record_source = match source {
            Some(s) => s,
            None => field(source_col).parse().map_err(parse_err)?,
        };
        let split = field(split_col).parse().map_err(parse_err)?;
        let raw_path = field(path_col);
        let record_path = if raw_path.is_empty() {
            PathBuf::new()
        } else {
            let p = base.join(raw_path);
            std::path::absolute(&p).unwrap_or(p)
        };
        if !seen.insert((record_source, id.clone())) {
            return Err(Error::DuplicateId {
                id,
                source_tag: record_source.to_string(),
            });
        }
        records.push(DatasetRecord {
            id,
            path: record_path,
            label,
            source: record_source,
            split,
        });
    }
    Ok(Manifest {
        records,
        provenance: vec![Provenance {
            path: path.into(),
            loaded_at: SystemTime::now(),
        }],
    })
}

/// Concatenates manifests, rejecting repeated `(source, id)` pairs.
pub fn amalgamate(manifests: &[Manifest]) -> Result<Manifest> {
    if manifests.is_empty() {
        return Err(Error::Empty("no manifests to amalgamate".into()));
    }
    let mut out = Manifest::default();
    let mut seen = HashSet::new();
    for m in manifests {
        for r in &m.records {
            if !seen.insert((r.source, r.id.as_str())) {
                return Err(Error::DuplicateId {
                    id: r.id.clone(),
                    source_tag: r.source.to_string(),
                });
            }
            out.records.push(r.clone());
        }
        out.provenance.extend(m.provenance.iter().cloned());
    }
    Ok(out)
}

/// SplitMix64 pseudorandom sequence.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

fn round_half_up(x: f64) -> usize {
    // the slack absorbs representation error in products like 0.1 * 15
    (x + 0.5 + 1e-9).floor() as usize
}

/// Per-class split sizes `(train, val, test)` for `n` records.
pub fn split_sizes(n: usize, test_frac: f64, val_frac: f64) -> (usize, usize, usize) {
    let test = round_half_up(test_frac * n as f64).min(n);
    let rest = n - test;
    let val = round_half_up(val_frac * rest as f64).min(rest);
    (rest - val, val, test)
}

/// Assigns every record to train, validation or test, class by class.
pub fn stratified_split(
    manifest: &Manifest,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<Manifest> {
    for (name, f) in [("test", test_frac), ("validation", val_frac)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidFractions(format!(
                "{name} fraction must lie strictly between 0 and 1, got {f}"
            )));
        }
    }
    let mut out = manifest.clone();
    let mut rng = SplitMix64::new(seed);
    for class in 0..NUM_CLASSES as u8 {
        let mut members: Vec<usize> = (0..out.records.len())
            .filter(|&i| out.records[i].label == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        let (train, val, test) = split_sizes(members.len(), test_frac, val_frac);
        if train == 0 || val == 0 || test == 0 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        members.sort_by(|&a, &b| {
            let (ra, rb) = (&out.records[a], &out.records[b]);
            (ra.source, &ra.id).cmp(&(rb.source, &rb.id))
        });
        for i in (1..members.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            members.swap(i, j);
        }
        for (rank, &idx) in members.iter().enumerate() {
            out.records[idx].split = if rank < test {
                Split::Test
            } else if rank < test + val {
                Split::Val
            } else {
                Split::Train
            };
        }
    }
    Ok(out)
}
