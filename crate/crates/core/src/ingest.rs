//! Readers and writers for the on-disk dataset layout.
//!
//! A dataset is a JSON-lines manifest plus one CSV file per (video, stream):
//!
//! * manifest line: `{"id": .., "split": "train"|"val"|"test", "label": name|null, "streams": {name: relative path}}`
//! * frame features: header `frame,variant,f0,..,f{d-1}`, one row per (frame, variant), any row order
//! * audio features: header `f0,..,f{d-1}`, exactly one data row
//!
//! Descriptor tables (one per stream, written by `aggregate`) use header
//! `id,<block>_<j>,..` with one row per video.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{
    EmotionLabel, FrameFeatureSequence, Split, StreamData, VideoDescriptor, VideoSample,
};
use crate::numeric::format_float;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub label: Option<EmotionLabel>,
    /// Stream name to path relative to the manifest's directory.
    pub streams: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    split: String,
    label: Option<String>,
    streams: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct RawEntryOut<'a> {
    id: &'a str,
    split: &'a str,
    label: Option<&'a str>,
    streams: BTreeMap<&'a str, String>,
}

impl Manifest {
    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    /// Sorted, de-duplicated stream names used anywhere in the manifest.
    pub fn stream_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.entries.iter().flat_map(|e| e.streams.keys()).collect();
        names.into_iter().cloned().collect()
    }

    pub fn entries_in<'a>(
        &'a self,
        splits: &'a [Split],
    ) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries
            .iter()
            .filter(move |e| splits.contains(&e.split))
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Serializes the manifest in the JSON-lines format `load_manifest` reads.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let raw = RawEntryOut {
                id: &e.id,
                split: e.split.as_str(),
                label: e.label.map(EmotionLabel::name),
                streams: e
                    .streams
                    .iter()
                    .map(|(k, v)| (k.as_str(), v.to_string_lossy().replace('\\', "/")))
                    .collect(),
            };
            out.push_str(&serde_json::to_string(&raw).expect("manifest entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Reads every stream file of `entry`.
    pub fn load_sample(&self, entry: &ManifestEntry) -> Result<VideoSample> {
        let mut streams = BTreeMap::new();
        for (name, rel) in &entry.streams {
            let data = load_stream(&self.resolve(rel))?;
            let data = match data {
                StreamData::Frames(seq) => StreamData::Frames(seq.with_video_id(&entry.id)),
                v => v,
            };
            streams.insert(name.clone(), data);
        }
        VideoSample::new(entry.id.clone(), entry.split, entry.label, streams)
    }
}

/// Parses a JSON-lines manifest; stream paths are resolved against the
/// manifest's directory and must exist.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, path, base_dir, true)
}

fn parse_manifest(
    text: &str,
    path: &Path,
    base_dir: PathBuf,
    check_paths: bool,
) -> Result<Manifest> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEntry = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, line_no, format!("malformed record: {e}")))?;
        let split: Split = raw
            .split
            .parse()
            .map_err(|e: Error| Error::parse(path, line_no, e.to_string()))?;
        let label = raw
            .label
            .as_deref()
            .map(EmotionLabel::from_name)
            .transpose()
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if split.requires_label() && label.is_none() {
            return Err(Error::parse(
                path,
                line_no,
                format!("{split} entry {:?} has no label", raw.id),
            ));
        }
        if raw.id.is_empty() {
            return Err(Error::parse(path, line_no, "empty video id"));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId(raw.id));
        }
        let streams: BTreeMap<String, PathBuf> = raw
            .streams
            .into_iter()
            .map(|(k, v)| (k, PathBuf::from(v)))
            .collect();
        if check_paths {
            for (name, rel) in &streams {
                if !base_dir.join(rel).is_file() {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("stream {name:?} file {} not found", rel.display()),
                    ));
                }
            }
        }
        entries.push(ManifestEntry {
            id: raw.id,
            split,
            label,
            streams,
        });
    }
    Ok(Manifest { base_dir, entries })
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

fn check_feature_header<'a>(path: &Path, names: impl Iterator<Item = &'a str>) -> Result<usize> {
    let mut d = 0;
    for (j, name) in names.enumerate() {
        if name != format!("f{j}") {
            return Err(Error::parse(
                path,
                1,
                format!("expected column f{j}, found {name:?}"),
            ));
        }
        d += 1;
    }
    if d == 0 {
        return Err(Error::parse(path, 1, "no feature columns"));
    }
    Ok(d)
}

fn parse_value(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line,
            format!("non-finite value {field:?}"),
        ));
    }
    Ok(v)
}

/// Reads a frame-feature CSV into a `frames × variants × dim` sequence sorted
/// by frame then variant index. The video id is taken from the file stem.
pub fn load_frame_features(
    path: &Path,
    expected_dim: Option<usize>,
) -> Result<FrameFeatureSequence> {
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("frame") || header.get(1) != Some("variant") {
        return Err(Error::parse(
            path,
            1,
            "header must start with frame,variant",
        ));
    }
    let dim = check_feature_header(path, header.iter().skip(2))?;
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(Error::DimensionMismatch { expected, got: dim });
        }
    }

    let mut cells: BTreeMap<(u64, u64), Vec<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim + 2 {
            return Err(Error::parse(
                path,
                line,
                format!("ragged row: {} fields, expected {}", record.len(), dim + 2),
            ));
        }
        let index = |k: usize, what: &str| -> Result<u64> {
            record[k]
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad {what} index {:?}", &record[k])))
        };
        let key = (index(0, "frame")?, index(1, "variant")?);
        let values = record
            .iter()
            .skip(2)
            .map(|f| parse_value(path, line, f))
            .collect::<Result<Vec<_>>>()?;
        if cells.insert(key, values).is_some() {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate row for frame {} variant {}", key.0, key.1),
            ));
        }
    }
    if cells.is_empty() {
        return Err(Error::parse(path, 2, "no frame rows"));
    }

    let frames: BTreeSet<u64> = cells.keys().map(|k| k.0).collect();
    let variants: BTreeSet<u64> = cells.keys().map(|k| k.1).collect();
    if cells.len() != frames.len() * variants.len() {
        return Err(Error::Shape(format!(
            "{}: {} rows do not form a {} frame x {} variant grid",
            path.display(),
            cells.len(),
            frames.len(),
            variants.len()
        )));
    }
    // BTreeMap iteration order is (frame, variant) ascending.
    let (t, v) = (frames.len(), variants.len());
    let data: Vec<f64> = cells.into_values().flatten().collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FrameFeatureSequence::new(id, t, v, dim, data)
}

/// Reads a single-row audio feature CSV.
pub fn load_audio_features(path: &Path) -> Result<Vec<f64>> {
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = check_feature_header(path, header.iter())?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim {
            return Err(Error::parse(
                path,
                line,
                format!("ragged row: {} fields, expected {dim}", record.len()),
            ));
        }
        rows.push(
            record
                .iter()
                .map(|f| parse_value(path, line, f))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.len() != 1 {
        return Err(Error::parse(
            path,
            2,
            format!("expected exactly one data row, found {}", rows.len()),
        ));
    }
    Ok(rows.pop().unwrap())
}

/// Loads either file kind, dispatching on the header.
pub fn load_stream(path: &Path) -> Result<StreamData> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    if first.trim_start().starts_with("frame") {
        load_frame_features(path, None).map(StreamData::Frames)
    } else {
        load_audio_features(path).map(StreamData::Vector)
    }
}

fn feature_header(prefix: &str, dim: usize, out: &mut String) {
    out.push_str(prefix);
    for j in 0..dim {
        if !prefix.is_empty() || j > 0 {
            out.push(',');
        }
        write!(out, "f{j}").unwrap();
    }
    out.push('\n');
}

fn push_row(values: &[f64], out: &mut String) {
    for v in values {
        out.push(',');
        out.push_str(&format_float(*v));
    }
    out.push('\n');
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn render_frame_features(seq: &FrameFeatureSequence) -> String {
    let mut out = String::new();
    feature_header("frame,variant", seq.dim(), &mut out);
    for t in 0..seq.num_frames() {
        for v in 0..seq.num_variants() {
            write!(out, "{t},{v}").unwrap();
            push_row(seq.vector(t, v), &mut out);
        }
    }
    out
}

pub fn write_frame_features(path: &Path, seq: &FrameFeatureSequence) -> Result<()> {
    write_file(path, &render_frame_features(seq))
}

pub fn write_audio_features(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::new();
    feature_header("", values.len(), &mut out);
    let row: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
    out.push_str(&row.join(","));
    out.push('\n');
    write_file(path, &out)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_file(path, &manifest.to_jsonl())
}

/// Writes one descriptor per row; all descriptors must share a layout.
pub fn write_descriptors(path: &Path, descriptors: &[VideoDescriptor]) -> Result<()> {
    let Some(first) = descriptors.first() else {
        return Err(Error::InvalidInput("no descriptors to write".into()));
    };
    let mut out = String::from("id");
    for (name, len) in &first.provenance {
        for j in 0..*len {
            write!(out, ",{name}_{j}").unwrap();
        }
    }
    out.push('\n');
    for d in descriptors {
        if d.provenance != first.provenance {
            return Err(Error::Shape(format!(
                "descriptor {} has a different block layout than {}",
                d.video_id, first.video_id
            )));
        }
        out.push_str(&d.video_id);
        push_row(&d.features, &mut out);
    }
    write_file(path, &out)
}

pub fn load_descriptors(path: &Path) -> Result<Vec<VideoDescriptor>> {
    let mut reader = open_csv(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("id") || header.len() < 2 {
        return Err(Error::parse(
            path,
            1,
            "header must be id followed by feature columns",
        ));
    }
    let mut provenance: Vec<(String, usize)> = Vec::new();
    for col in header.iter().skip(1) {
        let block = col.rsplit_once('_').map_or(col, |(b, _)| b);
        match provenance.last_mut() {
            Some((name, len)) if name == block => *len += 1,
            _ => provenance.push((block.to_string(), 1)),
        }
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::parse(path, line, "ragged row"));
        }
        let features = record
            .iter()
            .skip(1)
            .map(|f| parse_value(path, line, f))
            .collect::<Result<Vec<_>>>()?;
        out.push(VideoDescriptor::new(
            &record[0],
            features,
            provenance.clone(),
        )?);
    }
    Ok(out)
}
