//! Contour-directional probability distributions of a digit raster.
//!
//! * Direction (f1): orientation of the chord spanning `fragment_length`
//!   contour steps, folded into [0°, 180°).
//! * Hinge (f2): joint orientation of the two legs leaving a contour pixel
//!   `hinge_leg_length` steps forward and backward, each over [0°, 360°),
//!   stored as an unordered pair.
//! * Co-occurrence (f3h, f3v): joint f1 orientation at the two ink pixels
//!   bounding each background run along a row (f3h) or column (f3v).
//!
//! Angles are measured counter-clockwise from the +x axis with y pointing
//! up, so a raster row is 0° and a raster column is 90°.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::imageproc::{BinaryImage, Contour, ContourSet, Point};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("no qualifying ink contour")]
    NoInk,
    #[error("no ink-bounded background run along the {0} axis")]
    NoRuns(Axis),
    #[error("cannot compare {left} ({left_bins} bins) with {right} ({right_bins} bins)")]
    KindMismatch {
        left: FeatureKind,
        right: FeatureKind,
        left_bins: usize,
        right_bins: usize,
    },
    #[error("distributions come from different extraction configs ({0} vs {1})")]
    ConfigMismatch(String, String),
    #[error("cannot average an empty list of distributions")]
    EmptyList,
    #[error("invalid extraction config: {0}")]
    Config(String),
    #[error("unknown feature name {0:?} (expected f1, f2, f3, f3h or f3v)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "f1")]
    Direction,
    #[serde(rename = "f2")]
    Hinge,
    #[serde(rename = "f3h")]
    CooccurrenceHorizontal,
    #[serde(rename = "f3v")]
    CooccurrenceVertical,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [
        FeatureKind::Direction,
        FeatureKind::Hinge,
        FeatureKind::CooccurrenceHorizontal,
        FeatureKind::CooccurrenceVertical,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::Direction => "f1",
            FeatureKind::Hinge => "f2",
            FeatureKind::CooccurrenceHorizontal => "f3h",
            FeatureKind::CooccurrenceVertical => "f3v",
        }
    }

    /// Fusion group: f3h and f3v are combined into one f3 score.
    pub fn group(self) -> FeatureGroup {
        match self {
            FeatureKind::Direction => FeatureGroup::F1,
            FeatureKind::Hinge => FeatureGroup::F2,
            FeatureKind::CooccurrenceHorizontal | FeatureKind::CooccurrenceVertical => {
                FeatureGroup::F3
            }
        }
    }

    pub fn bin_count(self, cfg: &ExtractionConfig) -> usize {
        let n = cfg.direction_bins;
        match self {
            FeatureKind::Direction => n,
            FeatureKind::Hinge => n * (2 * n + 1),
            FeatureKind::CooccurrenceHorizontal | FeatureKind::CooccurrenceVertical => n * n,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    F1,
    F2,
    F3,
}

/// Parses a comma-separated list such as `f1,f2,f3`; `f3` expands to both
/// co-occurrence axes.
pub fn parse_kinds(list: &str) -> Result<Vec<FeatureKind>, FeatureError> {
    let mut kinds = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "f3" => {
                kinds.push(FeatureKind::CooccurrenceHorizontal);
                kinds.push(FeatureKind::CooccurrenceVertical);
            }
            other => kinds.push(other.parse()?),
        }
    }
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(FeatureError::UnknownKind(list.to_string()));
    }
    Ok(kinds)
}

/// Canonical label for a kind set, e.g. `f1+f2` or `f1+f3`.
pub fn kinds_tag(kinds: &[FeatureKind]) -> String {
    let has = |k| kinds.contains(&k);
    let mut parts = Vec::new();
    if has(FeatureKind::Direction) {
        parts.push("f1");
    }
    if has(FeatureKind::Hinge) {
        parts.push("f2");
    }
    match (
        has(FeatureKind::CooccurrenceHorizontal),
        has(FeatureKind::CooccurrenceVertical),
    ) {
        (true, true) => parts.push("f3"),
        (true, false) => parts.push("f3h"),
        (false, true) => parts.push("f3v"),
        (false, false) => {}
    }
    parts.join("+")
}

impl FromStr for FeatureKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f1" => Ok(FeatureKind::Direction),
            "f2" => Ok(FeatureKind::Hinge),
            "f3h" => Ok(FeatureKind::CooccurrenceHorizontal),
            "f3v" => Ok(FeatureKind::CooccurrenceVertical),
            other => Err(FeatureError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Horizontal => "horizontal",
            Axis::Vertical => "vertical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Orientation bins over [0°, 180°); hinge legs use twice as many over
    /// the full circle.
    pub direction_bins: usize,
    /// Contour steps spanned by one direction fragment.
    pub fragment_length: usize,
    /// Contour steps spanned by each hinge leg.
    pub hinge_leg_length: usize,
    /// Components with fewer pixels contribute nothing.
    pub min_component_size: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            direction_bins: 12,
            fragment_length: 5,
            hinge_leg_length: 5,
            min_component_size: 3,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.direction_bins < 2 {
            return Err(FeatureError::Config(
                "direction_bins must be at least 2".into(),
            ));
        }
        if self.fragment_length < 1 {
            return Err(FeatureError::Config(
                "fragment_length must be at least 1".into(),
            ));
        }
        if self.hinge_leg_length < 1 {
            return Err(FeatureError::Config(
                "hinge_leg_length must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable digest of the config: the first 16 hex digits of SHA-256 over
    /// its canonical JSON.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// A normalized orientation histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePdf {
    pub kind: FeatureKind,
    #[serde(rename = "config-hash")]
    pub config_hash: String,
    pub bins: Vec<f64>,
}

impl FeaturePdf {
    fn from_counts(kind: FeatureKind, cfg: &ExtractionConfig, counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        debug_assert!(total > 0);
        let total = total as f64;
        Self {
            kind,
            config_hash: cfg.config_hash(),
            bins: counts.iter().map(|&c| c as f64 / total).collect(),
        }
    }

    pub fn mass(&self) -> f64 {
        self.bins.iter().sum()
    }

    fn check_compatible(&self, other: &FeaturePdf) -> Result<(), FeatureError> {
        if self.kind != other.kind || self.bins.len() != other.bins.len() {
            return Err(FeatureError::KindMismatch {
                left: self.kind,
                right: other.kind,
                left_bins: self.bins.len(),
                right_bins: other.bins.len(),
            });
        }
        if self.config_hash != other.config_hash {
            return Err(FeatureError::ConfigMismatch(
                self.config_hash.clone(),
                other.config_hash.clone(),
            ));
        }
        Ok(())
    }
}

/// Folded orientation bin of a chord over [0°, 180°).
pub(crate) fn undirected_bin(dx: i32, dy: i32, bins: usize) -> usize {
    let mut angle = f64::atan2(-dy as f64, dx as f64);
    if angle < 0.0 {
        angle += PI;
    }
    // The epsilon keeps exact lattice angles (0°, 45°, 90°, ...) on the bin
    // they open; anything that rounds up to 180° wraps to 0°.
    ((angle * bins as f64 / PI + 1e-9).floor() as usize) % bins
}

/// Directed orientation bin over [0°, 360°).
pub(crate) fn directed_bin(dx: i32, dy: i32, bins: usize) -> usize {
    let mut angle = f64::atan2(-dy as f64, dx as f64);
    if angle < 0.0 {
        angle += 2.0 * PI;
    }
    ((angle * bins as f64 / (2.0 * PI) + 1e-9).floor() as usize) % bins
}

/// Index of the unordered pair `(lo, hi)`, `lo <= hi`, among `m` symbols.
pub(crate) fn pair_index(lo: usize, hi: usize, m: usize) -> usize {
    debug_assert!(lo <= hi && hi < m);
    lo * m - lo * lo.saturating_sub(1) / 2 + (hi - lo)
}

fn qualifies(c: &Contour, cfg: &ExtractionConfig, span: usize) -> bool {
    c.component_size >= cfg.min_component_size && c.len() > span
}

fn chord(c: &Contour, i: usize, step: isize) -> (i32, i32) {
    let a = c.points[i];
    let b = c.at(i as isize + step);
    (b.x - a.x, b.y - a.y)
}

pub fn direction_pdf(
    contours: &ContourSet,
    cfg: &ExtractionConfig,
) -> Result<FeaturePdf, FeatureError> {
    cfg.validate()?;
    let n = cfg.direction_bins;
    let k = cfg.fragment_length;
    let mut counts = vec![0u64; n];
    for c in contours.contours.iter().filter(|c| qualifies(c, cfg, k)) {
        for i in 0..c.len() {
            let (dx, dy) = chord(c, i, k as isize);
            if (dx, dy) != (0, 0) {
                counts[undirected_bin(dx, dy, n)] += 1;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(FeatureError::NoInk);
    }
    Ok(FeaturePdf::from_counts(
        FeatureKind::Direction,
        cfg,
        &counts,
    ))
}

pub fn hinge_pdf(
    contours: &ContourSet,
    cfg: &ExtractionConfig,
) -> Result<FeaturePdf, FeatureError> {
    cfg.validate()?;
    let m = 2 * cfg.direction_bins;
    let h = cfg.hinge_leg_length;
    let mut counts = vec![0u64; FeatureKind::Hinge.bin_count(cfg)];
    for c in contours
        .contours
        .iter()
        .filter(|c| qualifies(c, cfg, 2 * h))
    {
        for i in 0..c.len() {
            let fwd = chord(c, i, h as isize);
            let back = chord(c, i, -(h as isize));
            if fwd == (0, 0) || back == (0, 0) {
                continue;
            }
            let a = directed_bin(fwd.0, fwd.1, m);
            let b = directed_bin(back.0, back.1, m);
            counts[pair_index(a.min(b), a.max(b), m)] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(FeatureError::NoInk);
    }
    Ok(FeaturePdf::from_counts(FeatureKind::Hinge, cfg, &counts))
}

/// Direction bin of every contour pixel, taken from its first occurrence on
/// a qualifying contour with a non-degenerate fragment.
fn pixel_orientations(contours: &ContourSet, cfg: &ExtractionConfig) -> Vec<Option<usize>> {
    let w = contours.width;
    let mut map = vec![None; contours.width * contours.height];
    let k = cfg.fragment_length;
    for c in contours.contours.iter().filter(|c| qualifies(c, cfg, k)) {
        for i in 0..c.len() {
            let Point { x, y } = c.points[i];
            let slot = &mut map[y as usize * w + x as usize];
            if slot.is_some() {
                continue;
            }
            let (dx, dy) = chord(c, i, k as isize);
            if (dx, dy) != (0, 0) {
                *slot = Some(undirected_bin(dx, dy, cfg.direction_bins));
            }
        }
    }
    map
}

pub fn cooccurrence_pdf(
    img: &BinaryImage,
    contours: &ContourSet,
    axis: Axis,
    cfg: &ExtractionConfig,
) -> Result<FeaturePdf, FeatureError> {
    cfg.validate()?;
    let n = cfg.direction_bins;
    let orient = pixel_orientations(contours, cfg);
    if orient.iter().all(Option::is_none) {
        return Err(FeatureError::NoInk);
    }
    let (w, h) = (img.width(), img.height());
    // Lines are rows for the horizontal axis and columns for the vertical one.
    let (lines, len) = match axis {
        Axis::Horizontal => (h, w),
        Axis::Vertical => (w, h),
    };
    let at = |line: usize, pos: usize| match axis {
        Axis::Horizontal => pos + line * w,
        Axis::Vertical => line + pos * w,
    };

    let mut counts = vec![0u64; n * n];
    for line in 0..lines {
        let mut pos = 0;
        while pos < len {
            if img.mask()[at(line, pos)] {
                pos += 1;
                continue;
            }
            let start = pos;
            while pos < len && !img.mask()[at(line, pos)] {
                pos += 1;
            }
            // Paper run [start, pos); both ends must be ink, not the frame.
            if start == 0 || pos == len {
                continue;
            }
            if let (Some(a), Some(b)) = (orient[at(line, start - 1)], orient[at(line, pos)]) {
                counts[a * n + b] += 1;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(FeatureError::NoRuns(axis));
    }
    let kind = match axis {
        Axis::Horizontal => FeatureKind::CooccurrenceHorizontal,
        Axis::Vertical => FeatureKind::CooccurrenceVertical,
    };
    Ok(FeaturePdf::from_counts(kind, cfg, &counts))
}

pub fn extract_pdf(
    kind: FeatureKind,
    img: &BinaryImage,
    contours: &ContourSet,
    cfg: &ExtractionConfig,
) -> Result<FeaturePdf, FeatureError> {
    match kind {
        FeatureKind::Direction => direction_pdf(contours, cfg),
        FeatureKind::Hinge => hinge_pdf(contours, cfg),
        FeatureKind::CooccurrenceHorizontal => {
            cooccurrence_pdf(img, contours, Axis::Horizontal, cfg)
        }
        FeatureKind::CooccurrenceVertical => cooccurrence_pdf(img, contours, Axis::Vertical, cfg),
    }
}

/// Extracts every requested kind from one binary digit. Kinds that fail
/// (no ink, no runs) are left out of the map.
pub fn extract_digit(
    img: &BinaryImage,
    cfg: &ExtractionConfig,
    kinds: &[FeatureKind],
) -> BTreeMap<FeatureKind, FeaturePdf> {
    let contours = crate::imageproc::trace_contours(img);
    kinds
        .iter()
        .filter_map(|&k| extract_pdf(k, img, &contours, cfg).ok().map(|pdf| (k, pdf)))
        .collect()
}

/// χ² distance Σ (p−q)²/(p+q), skipping bins that are empty on both sides.
pub fn chi2_distance(p: &FeaturePdf, q: &FeaturePdf) -> Result<f64, FeatureError> {
    p.check_compatible(q)?;
    Ok(chi2_bins(&p.bins, &q.bins))
}

pub(crate) fn chi2_bins(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, b)| *a + *b > 0.0)
        .map(|(a, b)| (a - b) * (a - b) / (a + b))
        .sum()
}

/// Bin-wise arithmetic mean.
pub fn average_pdfs<'a, I>(pdfs: I) -> Result<FeaturePdf, FeatureError>
where
    I: IntoIterator<Item = &'a FeaturePdf>,
{
    let mut iter = pdfs.into_iter();
    let first = iter.next().ok_or(FeatureError::EmptyList)?;
    let mut sum = first.bins.clone();
    let mut count = 1usize;
    for pdf in iter {
        first.check_compatible(pdf)?;
        for (s, v) in sum.iter_mut().zip(&pdf.bins) {
            *s += v;
        }
        count += 1;
    }
    let k = count as f64;
    sum.iter_mut().for_each(|s| *s /= k);
    Ok(FeaturePdf {
        kind: first.kind,
        config_hash: first.config_hash.clone(),
        bins: sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageproc::trace_contours;

    fn pdf(kind: FeatureKind, bins: &[f64]) -> FeaturePdf {
        FeaturePdf {
            kind,
            config_hash: ExtractionConfig::default().config_hash(),
            bins: bins.to_vec(),
        }
    }

    fn bar(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> BinaryImage {
        let mut img = BinaryImage::blank(width, height);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                img.set(x, y, true);
            }
        }
        img
    }

    fn rotate90(img: &BinaryImage) -> BinaryImage {
        // (x, y) -> (y, W-1-x): a quarter turn of the raster.
        let (w, h) = (img.width(), img.height());
        let mut out = BinaryImage::blank(h, w);
        for y in 0..h {
            for x in 0..w {
                if img.get(x, y) {
                    out.set(y, w - 1 - x, true);
                }
            }
        }
        out
    }

    #[test]
    fn chi2_examples() {
        let p = pdf(FeatureKind::Direction, &[0.5, 0.5]);
        let q = pdf(FeatureKind::Direction, &[1.0, 0.0]);
        assert!((chi2_distance(&p, &q).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(chi2_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(
            chi2_distance(&p, &q).unwrap(),
            chi2_distance(&q, &p).unwrap()
        );
    }

    #[test]
    fn chi2_rejects_mismatches() {
        let p = pdf(FeatureKind::Direction, &[0.5, 0.5]);
        let q = pdf(FeatureKind::Hinge, &[0.5, 0.5]);
        assert!(matches!(
            chi2_distance(&p, &q),
            Err(FeatureError::KindMismatch { .. })
        ));
        let r = pdf(FeatureKind::Direction, &[1.0, 0.0, 0.0]);
        assert!(matches!(
            chi2_distance(&p, &r),
            Err(FeatureError::KindMismatch { .. })
        ));
        let mut s = p.clone();
        s.config_hash = "other".into();
        assert!(matches!(
            chi2_distance(&p, &s),
            Err(FeatureError::ConfigMismatch(..))
        ));
    }

    #[test]
    fn averaging() {
        let a = pdf(FeatureKind::Direction, &[1.0, 0.0]);
        let b = pdf(FeatureKind::Direction, &[0.0, 1.0]);
        assert_eq!(average_pdfs([&a, &b]).unwrap().bins, vec![0.5, 0.5]);
        let p = pdf(FeatureKind::Direction, &[0.2, 0.3, 0.5]);
        let avg = average_pdfs([&p, &p, &p]).unwrap();
        for (a, b) in avg.bins.iter().zip(&p.bins) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(average_pdfs([&p]).unwrap(), p);
        assert_eq!(
            average_pdfs(std::iter::empty()).unwrap_err(),
            FeatureError::EmptyList
        );
        assert!(matches!(
            average_pdfs([&a, &pdf(FeatureKind::Hinge, &[1.0, 0.0])]),
            Err(FeatureError::KindMismatch { .. })
        ));
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let m = 24;
        let mut seen = vec![false; m * (m + 1) / 2];
        for lo in 0..m {
            for hi in lo..m {
                let i = pair_index(lo, hi, m);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn lattice_angles_land_on_their_bins() {
        assert_eq!(undirected_bin(5, 0, 12), 0);
        assert_eq!(undirected_bin(-5, 0, 12), 0);
        assert_eq!(undirected_bin(0, -5, 12), 6);
        assert_eq!(undirected_bin(0, 5, 12), 6);
        assert_eq!(undirected_bin(3, -3, 12), 3);
        assert_eq!(directed_bin(-5, 0, 24), 12);
        assert_eq!(directed_bin(0, 5, 24), 18);
        assert_eq!(directed_bin(3, 3, 24), 21);
    }

    #[test]
    fn horizontal_bar_direction_mass() {
        let cfg = ExtractionConfig::default();
        let img = bar(27, 35, 3, 10, 20, 3);
        let f1 = direction_pdf(&trace_contours(&img), &cfg).unwrap();
        assert!(f1.bins[0] >= 0.6, "{:?}", f1.bins);
        assert!((f1.mass() - 1.0).abs() < 1e-12);

        let rotated = rotate90(&img);
        let g1 = direction_pdf(&trace_contours(&rotated), &cfg).unwrap();
        assert!(g1.bins[6] >= 0.6, "{:?}", g1.bins);
        // A quarter turn shifts every bin by n/2.
        for i in 0..12 {
            assert!((f1.bins[i] - g1.bins[(i + 6) % 12]).abs() < 1e-12);
        }
    }

    #[test]
    fn hinge_of_straight_bar_pairs_opposite_legs() {
        let cfg = ExtractionConfig::default();
        let img = bar(27, 35, 3, 10, 20, 3);
        let f2 = hinge_pdf(&trace_contours(&img), &cfg).unwrap();
        let straight = f2.bins[pair_index(0, 12, 24)];
        let best = f2.bins.iter().cloned().fold(0.0, f64::max);
        assert_eq!(straight, best);
        assert!(straight > 0.4);
    }

    #[test]
    fn hinge_of_corner_pairs_horizontal_with_vertical() {
        let cfg = ExtractionConfig::default();
        let mut img = bar(27, 35, 4, 5, 3, 20);
        for y in 22..25 {
            for x in 4..22 {
                img.set(x, y, true);
            }
        }
        let f2 = hinge_pdf(&trace_contours(&img), &cfg).unwrap();
        let mixed: f64 = [(0, 6), (0, 18), (6, 12), (12, 18)]
            .iter()
            .map(|&(a, b)| f2.bins[pair_index(a, b, 24)])
            .sum();
        assert!(mixed > 0.0);
    }

    #[test]
    fn cooccurrence_between_parallel_bars() {
        let cfg = ExtractionConfig::default();
        let mut img = bar(27, 35, 5, 5, 3, 25);
        for y in 5..30 {
            for x in 17..20 {
                img.set(x, y, true);
            }
        }
        let contours = trace_contours(&img);
        let f3h = cooccurrence_pdf(&img, &contours, Axis::Horizontal, &cfg).unwrap();
        assert!(f3h.bins[6 * 12 + 6] >= 0.6, "{:?}", f3h.bins);
        assert!((f3h.mass() - 1.0).abs() < 1e-12);
        assert_eq!(f3h.kind, FeatureKind::CooccurrenceHorizontal);
        // Columns never see ink on both ends.
        assert_eq!(
            cooccurrence_pdf(&img, &contours, Axis::Vertical, &cfg).unwrap_err(),
            FeatureError::NoRuns(Axis::Vertical)
        );
    }

    #[test]
    fn blank_digit_is_no_ink() {
        let cfg = ExtractionConfig::default();
        let img = BinaryImage::blank(27, 35);
        let c = trace_contours(&img);
        assert_eq!(direction_pdf(&c, &cfg).unwrap_err(), FeatureError::NoInk);
        assert_eq!(hinge_pdf(&c, &cfg).unwrap_err(), FeatureError::NoInk);
        assert_eq!(
            cooccurrence_pdf(&img, &c, Axis::Horizontal, &cfg).unwrap_err(),
            FeatureError::NoInk
        );
    }

    #[test]
    fn specks_are_ignored() {
        let cfg = ExtractionConfig::default();
        let img = BinaryImage::from_ascii(&["......", ".##...", "......", "....#."]);
        assert_eq!(
            direction_pdf(&trace_contours(&img), &cfg).unwrap_err(),
            FeatureError::NoInk
        );
    }

    #[test]
    fn kind_parsing() {
        use FeatureKind::*;
        assert_eq!(parse_kinds("f1,f2").unwrap(), vec![Direction, Hinge]);
        assert_eq!(
            parse_kinds("f3,f1").unwrap(),
            vec![Direction, CooccurrenceHorizontal, CooccurrenceVertical]
        );
        assert!(parse_kinds("f4").is_err());
        assert_eq!(kinds_tag(&parse_kinds("f1,f2,f3").unwrap()), "f1+f2+f3");
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = ExtractionConfig::default();
        assert_eq!(a.config_hash(), ExtractionConfig::default().config_hash());
        assert_eq!(a.config_hash().len(), 16);
        let b = ExtractionConfig {
            direction_bins: 8,
            ..a.clone()
        };
        assert_ne!(a.config_hash(), b.config_hash());
        assert!(ExtractionConfig {
            direction_bins: 1,
            ..a
        }
        .validate()
        .is_err());
    }

    #[test]
    fn pdf_json_shape() {
        let p = pdf(FeatureKind::CooccurrenceVertical, &[0.25, 0.75]);
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["kind"], "f3v");
        assert!(v["config-hash"].is_string());
        assert_eq!(v["bins"][1], 0.75);
    }
}
