//! Enrolment templates and sample-to-template distances.
//!
//! Handcrafted features are matched with χ² either digit by digit (six
//! distances, averaged) or pooled (the six digit PDFs averaged first, one
//! distance). Several feature kinds are fused by averaging their distances;
//! f3h and f3v are first combined into a single f3 score. Deep embeddings
//! are matched with the Euclidean distance to the mean enrolment vector.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    average_pdfs, chi2_distance, extract_digit, ExtractionConfig, FeatureError, FeatureGroup,
    FeatureKind, FeaturePdf,
};
use crate::imageproc::{binarize_otsu, GrayImage};

pub const DIGITS_PER_SAMPLE: usize = 6;
pub const DIGIT_WIDTH: usize = 27;
pub const DIGIT_HEIGHT: usize = 35;
pub const EMBEDDING_DIM: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("feature sets come from different extraction configs or kind sets ({0})")]
    ConfigMismatch(String),
    #[error("feature {0} was not extracted on both sides")]
    MissingKind(FeatureKind),
    #[error("no digit position carries the requested features on both sides")]
    AllDegenerate,
    #[error("sample {0} has no usable digit")]
    DegenerateSample(SampleKey),
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cannot build a template from zero samples")]
    EmptyList,
    #[error("invalid sample: {0}")]
    InvalidSample(String),
}

/// Writer-qualified sample identifier. Sample ids are only unique within a
/// writer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub writer_id: String,
    pub sample_id: String,
}

impl SampleKey {
    pub fn new(writer_id: impl Into<String>, sample_id: impl Into<String>) -> Self {
        Self {
            writer_id: writer_id.into(),
            sample_id: sample_id.into(),
        }
    }
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.writer_id, self.sample_id)
    }
}

/// One 35×27 digit crop (height × width).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GrayImage", into = "GrayImage")]
pub struct DigitImage(GrayImage);

impl DigitImage {
    pub fn new(img: GrayImage) -> Result<Self, MatchError> {
        if img.width() != DIGIT_WIDTH || img.height() != DIGIT_HEIGHT {
            return Err(MatchError::InvalidSample(format!(
                "digit image is {}x{}, expected {DIGIT_WIDTH}x{DIGIT_HEIGHT}",
                img.width(),
                img.height()
            )));
        }
        Ok(Self(img))
    }

    pub fn image(&self) -> &GrayImage {
        &self.0
    }
}

impl TryFrom<GrayImage> for DigitImage {
    type Error = MatchError;

    fn try_from(img: GrayImage) -> Result<Self, Self::Error> {
        Self::new(img)
    }
}

impl From<DigitImage> for GrayImage {
    fn from(d: DigitImage) -> Self {
        d.0
    }
}

/// Six handwritten digits with their writer and digit labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub key: SampleKey,
    pub digits: Vec<DigitImage>,
    pub labels: Vec<u8>,
}

impl Sample {
    pub fn new(
        key: SampleKey,
        digits: Vec<DigitImage>,
        labels: Vec<u8>,
    ) -> Result<Self, MatchError> {
        if digits.len() != DIGITS_PER_SAMPLE || labels.len() != DIGITS_PER_SAMPLE {
            return Err(MatchError::InvalidSample(format!(
                "{key}: expected {DIGITS_PER_SAMPLE} digits and labels, got {} and {}",
                digits.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
            return Err(MatchError::InvalidSample(format!(
                "{key}: digit label {bad} out of range"
            )));
        }
        Ok(Self {
            key,
            digits,
            labels,
        })
    }

    /// The digit string, e.g. `"990412"`.
    pub fn label_string(&self) -> String {
        self.labels.iter().map(|d| char::from(b'0' + d)).collect()
    }
}

/// Per-position feature maps of one sample. A kind missing at a position
/// means the digit gave no usable evidence for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub sample: SampleKey,
    #[serde(rename = "config-hash")]
    pub config_hash: String,
    pub kinds: Vec<FeatureKind>,
    pub positions: Vec<BTreeMap<FeatureKind, FeaturePdf>>,
}

impl FeatureSet {
    pub fn is_degenerate(&self) -> bool {
        self.positions.iter().all(BTreeMap::is_empty)
    }
}

pub fn extract_sample_features(
    sample: &Sample,
    cfg: &ExtractionConfig,
    kinds: &[FeatureKind],
) -> Result<FeatureSet, MatchError> {
    cfg.validate()?;
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let positions: Vec<_> = sample
        .digits
        .iter()
        .map(|d| extract_digit(&binarize_otsu(d.image()), cfg, &kinds))
        .collect();
    let set = FeatureSet {
        sample: sample.key.clone(),
        config_hash: cfg.config_hash(),
        kinds,
        positions,
    };
    if set.is_degenerate() {
        return Err(MatchError::DegenerateSample(sample.key.clone()));
    }
    Ok(set)
}

/// Digit-wise averaged enrolment PDFs of one writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub writer_id: String,
    #[serde(rename = "config-hash")]
    pub config_hash: String,
    pub kinds: Vec<FeatureKind>,
    pub positions: Vec<BTreeMap<FeatureKind, FeaturePdf>>,
    pub enrolment_size: usize,
    pub member_sample_ids: Vec<String>,
}

/// Averages the members position by position. A member missing a kind at a
/// position is left out of that mean only.
pub fn build_template(sets: &[&FeatureSet], writer_id: &str) -> Result<Template, MatchError> {
    let first = sets.first().ok_or(MatchError::EmptyList)?;
    for s in &sets[1..] {
        if s.config_hash != first.config_hash || s.kinds != first.kinds {
            return Err(MatchError::ConfigMismatch(format!(
                "{} vs {}",
                first.sample, s.sample
            )));
        }
    }
    let mut positions = Vec::with_capacity(DIGITS_PER_SAMPLE);
    for pos in 0..first.positions.len() {
        let mut map = BTreeMap::new();
        for &kind in &first.kinds {
            let members: Vec<&FeaturePdf> = sets
                .iter()
                .filter_map(|s| s.positions[pos].get(&kind))
                .collect();
            if !members.is_empty() {
                map.insert(kind, average_pdfs(members)?);
            }
        }
        positions.push(map);
    }
    Ok(Template {
        writer_id: writer_id.to_string(),
        config_hash: first.config_hash.clone(),
        kinds: first.kinds.clone(),
        positions,
        enrolment_size: sets.len(),
        member_sample_ids: sets.iter().map(|s| s.sample.sample_id.clone()).collect(),
    })
}

fn check_pair(t: &Template, probe: &FeatureSet, kinds: &[FeatureKind]) -> Result<(), MatchError> {
    if t.config_hash != probe.config_hash {
        return Err(MatchError::ConfigMismatch(format!(
            "template {} uses {}, probe {} uses {}",
            t.writer_id, t.config_hash, probe.sample, probe.config_hash
        )));
    }
    for k in kinds {
        if !t.kinds.contains(k) || !probe.kinds.contains(k) {
            return Err(MatchError::MissingKind(*k));
        }
    }
    Ok(())
}

/// Averages per-kind distances: within f3 first, then across groups. Kinds
/// without a value are skipped.
fn fuse(per_kind: &BTreeMap<FeatureKind, f64>) -> Result<f64, MatchError> {
    let mut groups: BTreeMap<FeatureGroup, (f64, usize)> = BTreeMap::new();
    for (kind, d) in per_kind {
        let g = groups.entry(kind.group()).or_default();
        g.0 += d;
        g.1 += 1;
    }
    if groups.is_empty() {
        return Err(MatchError::AllDegenerate);
    }
    let sum: f64 = groups.values().map(|(s, n)| s / *n as f64).sum();
    Ok(sum / groups.len() as f64)
}

fn sorted_kinds(kinds: &[FeatureKind]) -> Vec<FeatureKind> {
    let mut k = kinds.to_vec();
    k.sort();
    k.dedup();
    k
}

/// Mean over digit positions of the χ² distance, fused over kinds.
/// Positions lacking a kind on either side are left out of that kind's mean.
pub fn distance_digitwise(
    t: &Template,
    probe: &FeatureSet,
    kinds: &[FeatureKind],
) -> Result<f64, MatchError> {
    check_pair(t, probe, kinds)?;
    let mut per_kind = BTreeMap::new();
    for kind in sorted_kinds(kinds) {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (tp, pp) in t.positions.iter().zip(&probe.positions) {
            if let (Some(a), Some(b)) = (tp.get(&kind), pp.get(&kind)) {
                sum += chi2_distance(a, b)?;
                n += 1;
            }
        }
        if n > 0 {
            per_kind.insert(kind, sum / n as f64);
        }
    }
    fuse(&per_kind)
}

/// χ² between the position-averaged PDFs of each side, fused over kinds.
pub fn distance_pooled(
    t: &Template,
    probe: &FeatureSet,
    kinds: &[FeatureKind],
) -> Result<f64, MatchError> {
    check_pair(t, probe, kinds)?;
    let mut per_kind = BTreeMap::new();
    for kind in sorted_kinds(kinds) {
        let left: Vec<&FeaturePdf> = t.positions.iter().filter_map(|m| m.get(&kind)).collect();
        let right: Vec<&FeaturePdf> = probe
            .positions
            .iter()
            .filter_map(|m| m.get(&kind))
            .collect();
        if left.is_empty() || right.is_empty() {
            continue;
        }
        let d = chi2_distance(&average_pdfs(left)?, &average_pdfs(right)?)?;
        per_kind.insert(kind, d);
    }
    fuse(&per_kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparisonMode {
    Digitwise,
    Pooled,
}

impl fmt::Display for ComparisonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComparisonMode::Digitwise => "digitwise",
            ComparisonMode::Pooled => "pooled",
        })
    }
}

impl FromStr for ComparisonMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "digitwise" => Ok(ComparisonMode::Digitwise),
            "pooled" => Ok(ComparisonMode::Pooled),
            other => Err(format!(
                "unknown comparison mode {other:?} (expected digitwise or pooled)"
            )),
        }
    }
}

/// A 512-d (by convention) deep feature vector of one sample, or the mean
/// vector of a writer's enrolment samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub id: String,
    pub writer_id: String,
    pub vector: Vec<f32>,
}

impl Embedding {
    pub fn key(&self) -> SampleKey {
        SampleKey::new(self.writer_id.clone(), self.id.clone())
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn embedding_distance(a: &Embedding, b: &Embedding) -> Result<f64, MatchError> {
    if a.dim() != b.dim() {
        return Err(MatchError::DimensionMismatch(a.dim(), b.dim()));
    }
    let sq: f64 = a
        .vector
        .iter()
        .zip(&b.vector)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sq.sqrt())
}

/// Element-wise mean, accumulated in f64. The template's id is the writer id.
pub fn build_embedding_template(
    vectors: &[&Embedding],
    writer_id: &str,
) -> Result<Embedding, MatchError> {
    let first = vectors.first().ok_or(MatchError::EmptyList)?;
    let dim = first.dim();
    let mut acc = vec![0f64; dim];
    for v in vectors {
        if v.dim() != dim {
            return Err(MatchError::DimensionMismatch(dim, v.dim()));
        }
        for (a, &x) in acc.iter_mut().zip(&v.vector) {
            *a += x as f64;
        }
    }
    let n = vectors.len() as f64;
    Ok(Embedding {
        id: writer_id.to_string(),
        writer_id: writer_id.to_string(),
        vector: acc.into_iter().map(|a| (a / n) as f32).collect(),
    })
}

/// Template construction and distance for one feature family. The
/// evaluation protocols are generic over this.
pub trait Matcher: Sync {
    type Features: Sync;
    type Template: Send + Sync;

    /// Short label used in reports, e.g. `f1+f2` or `embedding`.
    fn tag(&self) -> String;

    fn template(
        &self,
        writer_id: &str,
        members: &[&Self::Features],
    ) -> Result<Self::Template, MatchError>;

    fn distance(
        &self,
        template: &Self::Template,
        probe: &Self::Features,
    ) -> Result<f64, MatchError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandcraftedMatcher {
    pub kinds: Vec<FeatureKind>,
    pub mode: ComparisonMode,
}

impl HandcraftedMatcher {
    pub fn new(kinds: &[FeatureKind], mode: ComparisonMode) -> Self {
        Self {
            kinds: sorted_kinds(kinds),
            mode,
        }
    }
}

impl Matcher for HandcraftedMatcher {
    type Features = FeatureSet;
    type Template = Template;

    fn tag(&self) -> String {
        crate::features::kinds_tag(&self.kinds)
    }

    fn template(&self, writer_id: &str, members: &[&FeatureSet]) -> Result<Template, MatchError> {
        build_template(members, writer_id)
    }

    fn distance(&self, template: &Template, probe: &FeatureSet) -> Result<f64, MatchError> {
        match self.mode {
            ComparisonMode::Digitwise => distance_digitwise(template, probe, &self.kinds),
            ComparisonMode::Pooled => distance_pooled(template, probe, &self.kinds),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbeddingMatcher;

impl Matcher for EmbeddingMatcher {
    type Features = Embedding;
    type Template = Embedding;

    fn tag(&self) -> String {
        "embedding".to_string()
    }

    fn template(&self, writer_id: &str, members: &[&Embedding]) -> Result<Embedding, MatchError> {
        build_embedding_template(members, writer_id)
    }

    fn distance(&self, template: &Embedding, probe: &Embedding) -> Result<f64, MatchError> {
        embedding_distance(template, probe)
    }
}
