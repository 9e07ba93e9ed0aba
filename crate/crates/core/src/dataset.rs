//! Corpora of handwritten date-of-birth samples.
//!
//! A corpus is described by a manifest CSV with the header
//! `writer_id,sample_id,digit_index,digit_label,image_path`, six rows per
//! sample, image paths relative to the manifest. Row order is significant:
//! the order in which a writer's samples first appear is the canonical
//! acquisition order used by the verification split.
//!
//! Deep embeddings travel as CSV with the header
//! `sample_id,writer_id,dim,v0,...,v{dim-1}`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::imageproc::{binarize_otsu, GrayImage, ImageError};
use crate::matching::{
    DigitImage, Embedding, MatchError, Sample, SampleKey, DIGITS_PER_SAMPLE, DIGIT_HEIGHT,
    DIGIT_WIDTH,
};

pub const MANIFEST_HEADER: [&str; 5] = [
    "writer_id",
    "sample_id",
    "digit_index",
    "digit_label",
    "image_path",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    /// `line` is 0 when the file itself could not be read.
    #[error("parse error: {path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("missing image {0}")]
    MissingImage(String),
    #[error("{0}")]
    Dimension(String),
    #[error("duplicate sample {0}")]
    DuplicateSample(String),
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Sample(#[from] MatchError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where one digit occurrence lives.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DigitRef {
    pub sample: SampleKey,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Database {
    writers: BTreeMap<String, Vec<Sample>>,
    digit_index: [Vec<DigitRef>; 10],
}

impl Database {
    /// Groups samples by writer, keeping the given order within a writer.
    pub fn from_samples(samples: impl IntoIterator<Item = Sample>) -> Result<Self, DatasetError> {
        let mut writers: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
        for s in samples {
            let list = writers.entry(s.key.writer_id.clone()).or_default();
            if list.iter().any(|o| o.key.sample_id == s.key.sample_id) {
                return Err(DatasetError::DuplicateSample(s.key.to_string()));
            }
            list.push(s);
        }
        let mut digit_index: [Vec<DigitRef>; 10] = Default::default();
        for s in writers.values().flatten() {
            for (position, &label) in s.labels.iter().enumerate() {
                digit_index[label as usize].push(DigitRef {
                    sample: s.key.clone(),
                    position,
                });
            }
        }
        Ok(Self {
            writers,
            digit_index,
        })
    }

    pub fn writer_ids(&self) -> impl Iterator<Item = &str> {
        self.writers.keys().map(String::as_str)
    }

    pub fn writer_count(&self) -> usize {
        self.writers.len()
    }

    /// A writer's samples in manifest order.
    pub fn samples_of(&self, writer_id: &str) -> &[Sample] {
        self.writers.get(writer_id).map_or(&[], Vec::as_slice)
    }

    pub fn writers(&self) -> impl Iterator<Item = (&str, &[Sample])> {
        self.writers.iter().map(|(w, s)| (w.as_str(), s.as_slice()))
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.writers.values().flatten()
    }

    pub fn sample_count(&self) -> usize {
        self.writers.values().map(Vec::len).sum()
    }

    pub fn sample(&self, key: &SampleKey) -> Option<&Sample> {
        self.writers
            .get(&key.writer_id)?
            .iter()
            .find(|s| s.key.sample_id == key.sample_id)
    }

    /// Every occurrence of a digit class, grouped by writer id order.
    pub fn digit_refs(&self, label: u8) -> &[DigitRef] {
        &self.digit_index[label as usize]
    }

    pub fn roster(&self) -> Roster {
        Roster::from_keys(self.samples().map(|s| &s.key))
    }

    pub fn digit(&self, r: &DigitRef) -> Option<&DigitImage> {
        self.sample(&r.sample).map(|s| &s.digits[r.position])
    }
}

/// Sample ids per writer in manifest order: all an evaluation split needs
/// to know about a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roster {
    writers: BTreeMap<String, Vec<String>>,
}

impl Roster {
    /// Keeps the first occurrence of every key, in iteration order.
    pub fn from_keys<'a>(keys: impl IntoIterator<Item = &'a SampleKey>) -> Self {
        let mut writers: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for k in keys {
            let list = writers.entry(k.writer_id.clone()).or_default();
            if !list.contains(&k.sample_id) {
                list.push(k.sample_id.clone());
            }
        }
        Self { writers }
    }

    pub fn writers(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.writers.iter().map(|(w, s)| (w.as_str(), s.as_slice()))
    }

    pub fn writer_count(&self) -> usize {
        self.writers.len()
    }

    pub fn sample_count(&self) -> usize {
        self.writers.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    writer_id: String,
    sample_id: String,
    digit_index: String,
    digit_label: String,
    image_path: String,
}

/// Loads a manifest and every image it references.
pub fn load_manifest(path: &Path) -> Result<Database, DatasetError> {
    let parse_err = |line: u64, message: String| DatasetError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let file = fs::File::open(path).map_err(|e| parse_err(0, e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(parse_err(
            1,
            format!("expected header {}", MANIFEST_HEADER.join(",")),
        ));
    }
    let base = path.parent().unwrap_or(Path::new("."));

    type Slot = Option<(u8, GrayImage)>;
    let mut order: Vec<SampleKey> = Vec::new();
    let mut rows: HashMap<SampleKey, ([Slot; DIGITS_PER_SAMPLE], u64)> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: ManifestRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        let index: usize = row
            .digit_index
            .trim()
            .parse()
            .ok()
            .filter(|&i| i < DIGITS_PER_SAMPLE)
            .ok_or_else(|| {
                parse_err(
                    line,
                    format!("digit_index {:?} is not in 0..5", row.digit_index),
                )
            })?;
        let label: u8 = row
            .digit_label
            .trim()
            .parse()
            .ok()
            .filter(|&l| l <= 9)
            .ok_or_else(|| {
                parse_err(
                    line,
                    format!("digit_label {:?} is not a digit 0..9", row.digit_label),
                )
            })?;
        if row.writer_id.is_empty() || row.sample_id.is_empty() {
            return Err(parse_err(line, "empty writer_id or sample_id".into()));
        }

        let image_path = base.join(&row.image_path);
        if !image_path.is_file() {
            return Err(DatasetError::MissingImage(image_path.display().to_string()));
        }
        let img = GrayImage::read(&image_path)?;
        if img.width() != DIGIT_WIDTH || img.height() != DIGIT_HEIGHT {
            return Err(DatasetError::Dimension(format!(
                "{}: image is {}x{}, expected {DIGIT_WIDTH}x{DIGIT_HEIGHT} (line {line})",
                image_path.display(),
                img.width(),
                img.height()
            )));
        }

        let key = SampleKey::new(row.writer_id, row.sample_id);
        let entry = rows.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            (Default::default(), line)
        });
        if entry.0[index].is_some() {
            return Err(DatasetError::DuplicateSample(format!(
                "{key} digit {index} (line {line})"
            )));
        }
        entry.0[index] = Some((label, img));
    }
    if order.is_empty() {
        return Err(parse_err(1, "manifest lists no samples".into()));
    }

    let mut samples = Vec::with_capacity(order.len());
    for key in order {
        let (slots, first_line) = rows.remove(&key).expect("every ordered key has rows");
        let mut digits = Vec::with_capacity(DIGITS_PER_SAMPLE);
        let mut labels = Vec::with_capacity(DIGITS_PER_SAMPLE);
        for (i, slot) in slots.into_iter().enumerate() {
            let (label, img) = slot.ok_or_else(|| {
                parse_err(first_line, format!("sample {key} lacks digit_index {i}"))
            })?;
            digits.push(DigitImage::new(img)?);
            labels.push(label);
        }
        samples.push(Sample::new(key, digits, labels)?);
    }
    Database::from_samples(samples)
}

/// File-system safe rendering of an identifier.
pub fn path_component(id: &str) -> String {
    if !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        && !id.starts_with('.')
    {
        id.to_string()
    } else {
        format!("x{}", hex::encode(id.as_bytes()))
    }
}

/// Content digest of a sample's labels and pixels (16 hex digits).
pub fn sample_digest(sample: &Sample) -> String {
    let mut h = Sha256::new();
    h.update(&sample.labels);
    for d in &sample.digits {
        let img = d.image();
        h.update((img.width() as u32).to_le_bytes());
        h.update((img.height() as u32).to_le_bytes());
        h.update(img.data());
    }
    hex::encode(&h.finalize()[..8])
}

/// Writes every digit as PGM under `dir/images/` plus `dir/manifest.csv`.
/// Returns the manifest path.
pub fn write_manifest(db: &Database, dir: &Path) -> Result<PathBuf, DatasetError> {
    let manifest = dir.join("manifest.csv");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&manifest)
        .map_err(|e| DatasetError::Io {
            path: manifest.display().to_string(),
            source: e.into(),
        })?;
    let csv_err = |e: csv::Error| DatasetError::Io {
        path: manifest.display().to_string(),
        source: e.into(),
    };
    writer.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for s in db.samples() {
        let rel_dir = PathBuf::from("images").join(path_component(&s.key.writer_id));
        fs::create_dir_all(dir.join(&rel_dir)).map_err(io_err(dir))?;
        for (i, (digit, label)) in s.digits.iter().zip(&s.labels).enumerate() {
            let rel = rel_dir.join(format!("{}_{i}.pgm", path_component(&s.key.sample_id)));
            digit.image().write(&dir.join(&rel))?;
            let rel_str = rel.to_string_lossy().replace('\\', "/");
            writer
                .write_record([
                    s.key.writer_id.as_str(),
                    s.key.sample_id.as_str(),
                    &i.to_string(),
                    &label.to_string(),
                    &rel_str,
                ])
                .map_err(csv_err)?;
        }
    }
    writer.flush().map_err(io_err(&manifest))?;
    Ok(manifest)
}

pub fn write_embeddings(path: &Path, embeddings: &[Embedding]) -> Result<(), DatasetError> {
    let dim = embeddings
        .first()
        .map_or(crate::matching::EMBEDDING_DIM, Embedding::dim);
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(DatasetError::Dimension(format!(
            "embedding {} has {} values, expected {dim}",
            bad.key(),
            bad.dim()
        )));
    }
    let mut out = String::new();
    out.push_str("sample_id,writer_id,dim");
    for i in 0..dim {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for e in embeddings {
        let mut record = vec![e.id.clone(), e.writer_id.clone(), dim.to_string()];
        // 9 significant digits round-trip any f32.
        record.extend(e.vector.iter().map(|v| format!("{v:.8e}")));
        writer.write_record(&record).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
    }
    let body = writer.into_inner().map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e.into_error(),
    })?;
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))?;
    file.write_all(&body).map_err(io_err(path))?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<Vec<Embedding>, DatasetError> {
    let parse_err = |line: u64, message: String| DatasetError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "empty embedding file".into())),
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[..3] != ["sample_id", "writer_id", "dim"] {
        return Err(parse_err(
            1,
            "expected header sample_id,writer_id,dim,v0,...".into(),
        ));
    }
    let dim = cols.len() - 3;
    for (i, c) in cols[3..].iter().enumerate() {
        if *c != format!("v{i}") {
            return Err(parse_err(
                1,
                format!("column {} should be v{i}, found {c:?}", i + 3),
            ));
        }
    }
    if dim == 0 {
        return Err(parse_err(1, "header declares zero dimensions".into()));
    }

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in records {
        let record =
            record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 3 {
            return Err(parse_err(line, "row has fewer than 3 columns".into()));
        }
        let declared: usize = record[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("dim {:?} is not an integer", &record[2])))?;
        let values = record.len() - 3;
        if declared != dim || values != dim {
            return Err(DatasetError::Dimension(format!(
                "{}: line {line}: row declares {declared} and carries {values} values, header declares {dim}",
                path.display()
            )));
        }
        let vector = record
            .iter()
            .skip(3)
            .map(|v| v.trim().parse::<f32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line, format!("bad value: {e}")))?;
        let e = Embedding {
            id: record[0].to_string(),
            writer_id: record[1].to_string(),
            vector,
        };
        if !seen.insert(e.key()) {
            return Err(DatasetError::DuplicateSample(e.key().to_string()));
        }
        out.push(e);
    }
    Ok(out)
}

/// Per-writer style spread of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleVariance {
    /// Standard deviation of the writer's slant, degrees.
    pub slant_deg: f64,
    /// Standard deviation of the writer's stroke width, pixels.
    pub stroke_width: f64,
    /// Standard deviation of the writer's per-class skeleton offsets, pixels.
    pub jitter_px: f64,
}

impl Default for StyleVariance {
    fn default() -> Self {
        Self {
            slant_deg: 6.0,
            stroke_width: 0.3,
            jitter_px: 0.75,
        }
    }
}

impl StyleVariance {
    pub fn none() -> Self {
        Self {
            slant_deg: 0.0,
            stroke_width: 0.0,
            jitter_px: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            slant_deg: self.slant_deg * factor,
            stroke_width: self.stroke_width * factor,
            jitter_px: self.jitter_px * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub writer_count: usize,
    pub samples_per_writer: usize,
    pub style_variance: StyleVariance,
    /// Standard deviation of per-sample skeleton perturbation, pixels.
    pub within_writer_noise: f64,
    /// Amplitude of uniform scan noise added before binarization, gray levels.
    pub scan_noise: f64,
    /// Log-normal sigma of per-writer sample counts; 0 gives every writer
    /// exactly `samples_per_writer`.
    pub count_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            writer_count: 50,
            samples_per_writer: 12,
            style_variance: StyleVariance::default(),
            within_writer_noise: 2.0,
            scan_noise: 10.0,
            count_skew: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let err = |m: &str| Err(DatasetError::Config(m.to_string()));
        if self.writer_count < 2 {
            return err("writer_count must be at least 2");
        }
        if self.samples_per_writer < 1 {
            return err("samples_per_writer must be at least 1");
        }
        let v = &self.style_variance;
        let all = [
            v.slant_deg,
            v.stroke_width,
            v.jitter_px,
            self.within_writer_noise,
            self.scan_noise,
            self.count_skew,
        ];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return err("variances and noise levels must be finite and non-negative");
        }
        Ok(())
    }
}

type Stroke = &'static [(f64, f64)];
type Point = (f64, f64);

// The table is rounded to five places on purpose; corpora depend on it.
#[allow(clippy::approx_constant)]
const fn ellipse<const N: usize>(cx: f64, cy: f64, rx: f64, ry: f64) -> [(f64, f64); N] {
    // Closed loop from a 16-step cos/sin table; the first point repeats.
    let table: [(f64, f64); 17] = [
        (1.0, 0.0),
        (0.92388, 0.38268),
        (0.70711, 0.70711),
        (0.38268, 0.92388),
        (0.0, 1.0),
        (-0.38268, 0.92388),
        (-0.70711, 0.70711),
        (-0.92388, 0.38268),
        (-1.0, 0.0),
        (-0.92388, -0.38268),
        (-0.70711, -0.70711),
        (-0.38268, -0.92388),
        (0.0, -1.0),
        (0.38268, -0.92388),
        (0.70711, -0.70711),
        (0.92388, -0.38268),
        (1.0, 0.0),
    ];
    let mut out = [(0.0, 0.0); N];
    let mut i = 0;
    while i < N {
        out[i] = (cx + rx * table[i].0, cy + ry * table[i].1);
        i += 1;
    }
    out
}

const ZERO: [(f64, f64); 17] = ellipse::<17>(0.5, 0.5, 0.36, 0.44);
const EIGHT_TOP: [(f64, f64); 17] = ellipse::<17>(0.5, 0.27, 0.27, 0.21);
const EIGHT_BOTTOM: [(f64, f64); 17] = ellipse::<17>(0.5, 0.71, 0.33, 0.24);
const NINE_LOOP: [(f64, f64); 17] = ellipse::<17>(0.48, 0.3, 0.3, 0.24);

/// Hand-authored skeletons in a unit box, y pointing down.
fn skeleton(class: u8) -> &'static [Stroke] {
    match class {
        0 => &[&ZERO],
        1 => &[&[(0.3, 0.22), (0.56, 0.04), (0.56, 0.96)]],
        2 => &[&[
            (0.14, 0.24),
            (0.3, 0.07),
            (0.6, 0.04),
            (0.82, 0.2),
            (0.8, 0.4),
            (0.14, 0.95),
            (0.88, 0.95),
        ]],
        3 => &[&[
            (0.14, 0.12),
            (0.48, 0.03),
            (0.8, 0.15),
            (0.78, 0.36),
            (0.44, 0.48),
            (0.8, 0.6),
            (0.84, 0.82),
            (0.5, 0.97),
            (0.14, 0.88),
        ]],
        4 => &[&[(0.66, 0.96), (0.66, 0.04), (0.1, 0.68), (0.92, 0.68)]],
        5 => &[&[
            (0.84, 0.05),
            (0.24, 0.05),
            (0.18, 0.46),
            (0.54, 0.38),
            (0.84, 0.55),
            (0.84, 0.8),
            (0.54, 0.97),
            (0.14, 0.88),
        ]],
        6 => &[&[
            (0.76, 0.06),
            (0.44, 0.12),
            (0.2, 0.45),
            (0.17, 0.76),
            (0.36, 0.96),
            (0.66, 0.95),
            (0.84, 0.76),
            (0.72, 0.55),
            (0.42, 0.52),
            (0.18, 0.66),
        ]],
        7 => &[
            &[(0.1, 0.06), (0.9, 0.06), (0.42, 0.96)],
            &[(0.3, 0.52), (0.72, 0.52)],
        ],
        8 => &[&EIGHT_TOP, &EIGHT_BOTTOM],
        9 => &[&NINE_LOOP, &[(0.78, 0.32), (0.68, 0.96)]],
        _ => unreachable!("digit class out of range"),
    }
}

const INK_LEVEL: f64 = 30.0;
const PAPER_LEVEL: f64 = 220.0;
const BASE_STROKE_WIDTH: f64 = 2.2;
const MARGIN_X: f64 = 4.0;
const MARGIN_Y: f64 = 3.5;

/// A writer's rendering style.
#[derive(Debug, Clone, PartialEq)]
pub struct WriterStyle {
    pub slant_deg: f64,
    pub stroke_width: f64,
    /// Per digit class, per stroke, per skeleton point: pixel offset.
    offsets: Vec<Vec<Vec<(f64, f64)>>>,
}

impl WriterStyle {
    pub fn neutral() -> Self {
        Self::draw(&StyleVariance::none(), &mut ChaCha8Rng::seed_from_u64(0))
    }

    fn draw(v: &StyleVariance, rng: &mut ChaCha8Rng) -> Self {
        let mut normal = |sd: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        };
        let slant_deg = normal(v.slant_deg);
        let stroke_width = (BASE_STROKE_WIDTH + normal(v.stroke_width)).clamp(1.0, 4.0);
        let offsets = (0..10u8)
            .map(|class| {
                skeleton(class)
                    .iter()
                    .map(|stroke| {
                        stroke
                            .iter()
                            .map(|_| (normal(v.jitter_px), normal(v.jitter_px)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            slant_deg,
            stroke_width,
            offsets,
        }
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Renders one digit as an anti-aliased gray crop (ink ≈ 30, paper ≈ 220)
/// with uniform scan noise of the given amplitude. `sample_noise` jitters
/// every skeleton point independently.
pub fn render_digit_gray(
    class: u8,
    style: &WriterStyle,
    sample_noise: f64,
    scan_noise: f64,
    rng: &mut ChaCha8Rng,
) -> GrayImage {
    let (w, h) = (DIGIT_WIDTH as f64, DIGIT_HEIGHT as f64);
    let shear = style.slant_deg.to_radians().tan();
    let mid_y = h / 2.0;
    let strokes: Vec<Vec<(f64, f64)>> = skeleton(class)
        .iter()
        .zip(&style.offsets[class as usize])
        .map(|(stroke, offs)| {
            stroke
                .iter()
                .zip(offs)
                .map(|(&(u, v), &(ox, oy))| {
                    let zx: f64 = StandardNormal.sample(rng);
                    let zy: f64 = StandardNormal.sample(rng);
                    let x = MARGIN_X + u * (w - 2.0 * MARGIN_X) + ox + sample_noise * zx;
                    let y = MARGIN_Y + v * (h - 2.0 * MARGIN_Y) + oy + sample_noise * zy;
                    // Positive slant leans the top to the right.
                    (x + shear * (mid_y - y), y)
                })
                .collect()
        })
        .collect();

    const SUB: usize = 4;
    let radius = style.stroke_width / 2.0;
    // Segments with their radius-padded bounding boxes.
    let segments: Vec<(Point, Point, [f64; 4])> = strokes
        .iter()
        .flat_map(|s| s.windows(2))
        .map(|seg| {
            let (a, b) = (seg[0], seg[1]);
            let bbox = [
                a.0.min(b.0) - radius,
                a.1.min(b.1) - radius,
                a.0.max(b.0) + radius,
                a.1.max(b.1) + radius,
            ];
            (a, b, bbox)
        })
        .collect();
    let mut data = Vec::with_capacity(DIGIT_WIDTH * DIGIT_HEIGHT);
    for py in 0..DIGIT_HEIGHT {
        for px in 0..DIGIT_WIDTH {
            let (fx, fy) = (px as f64, py as f64);
            let near: Vec<_> = segments
                .iter()
                .filter(|(_, _, bb)| {
                    fx + 1.0 >= bb[0] && fx <= bb[2] && fy + 1.0 >= bb[1] && fy <= bb[3]
                })
                .collect();
            let mut covered = 0usize;
            if !near.is_empty() {
                for sy in 0..SUB {
                    for sx in 0..SUB {
                        let p = (
                            fx + (sx as f64 + 0.5) / SUB as f64,
                            fy + (sy as f64 + 0.5) / SUB as f64,
                        );
                        let hit = near
                            .iter()
                            .any(|(a, b, _)| segment_distance(p, *a, *b) <= radius);
                        covered += hit as usize;
                    }
                }
            }
            let coverage = covered as f64 / (SUB * SUB) as f64;
            let noise = if scan_noise > 0.0 {
                rng.random_range(-scan_noise..=scan_noise)
            } else {
                0.0
            };
            let v = PAPER_LEVEL - coverage * (PAPER_LEVEL - INK_LEVEL) + noise;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(DIGIT_WIDTH, DIGIT_HEIGHT, data).expect("fixed digit dimensions")
}

/// Independent generator streams derived from the corpus seed.
fn stream(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind << 40 | index);
    rng
}

const STREAM_WRITER: u64 = 1;
const STREAM_SAMPLE: u64 = 2;

/// Generates a seeded corpus: each writer has a fixed yymmdd string and a
/// style; each sample re-renders those digits with fresh within-writer and
/// scan noise and binarizes them with Otsu (stored as 0/255).
pub fn synthesize_writers(cfg: &SynthConfig) -> Result<Database, DatasetError> {
    cfg.validate()?;
    let mut samples = Vec::new();
    let mut sample_serial = 0u64;
    for wi in 0..cfg.writer_count {
        let mut rng = stream(cfg.seed, STREAM_WRITER, wi as u64);
        let yy = rng.random_range(0..100u8);
        let mm = rng.random_range(1..=12u8);
        let dd = rng.random_range(1..=28u8);
        let labels = vec![yy / 10, yy % 10, mm / 10, mm % 10, dd / 10, dd % 10];
        let style = WriterStyle::draw(&cfg.style_variance, &mut rng);
        let count = if cfg.count_skew > 0.0 {
            let sigma = cfg.count_skew;
            let factor: f64 = LogNormal::new(-sigma * sigma / 2.0, sigma)
                .expect("finite sigma")
                .sample(&mut rng);
            ((cfg.samples_per_writer as f64 * factor).round() as usize).max(1)
        } else {
            cfg.samples_per_writer
        };

        let writer_id = format!("w{wi:03}");
        for si in 0..count {
            let mut srng = stream(cfg.seed, STREAM_SAMPLE, sample_serial);
            sample_serial += 1;
            let digits = labels
                .iter()
                .map(|&class| {
                    let gray = render_digit_gray(
                        class,
                        &style,
                        cfg.within_writer_noise,
                        cfg.scan_noise,
                        &mut srng,
                    );
                    DigitImage::new(binarize_otsu(&gray).to_gray())
                })
                .collect::<Result<Vec<_>, _>>()?;
            samples.push(Sample::new(
                SampleKey::new(writer_id.clone(), format!("s{si:02}")),
                digits,
                labels.clone(),
            )?);
        }
    }
    Database::from_samples(samples)
}
