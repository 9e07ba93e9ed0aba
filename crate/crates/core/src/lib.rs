//! Writer identification from handwritten date-of-birth digits.
//!
//! Contour-direction features (`features`) are extracted from binarised
//! digit images (`imageproc`), compared with the χ² distance or, for
//! externally computed embeddings, the Euclidean distance (`matching`), and
//! evaluated under identification and verification protocols (`protocols`).

pub mod dataset;
pub mod features;
pub mod imageproc;
pub mod matching;
pub mod protocols;
pub mod report;

pub use dataset::{Database, DatasetError, DigitRef, Roster, StyleVariance, SynthConfig};
pub use features::{ExtractionConfig, FeatureError, FeatureKind, FeaturePdf};
pub use imageproc::{BinaryImage, GrayImage, ImageError};
pub use matching::{
    ComparisonMode, DigitImage, Embedding, EmbeddingMatcher, FeatureSet, HandcraftedMatcher,
    MatchError, Matcher, Sample, SampleKey, Template,
};
pub use protocols::{CmcCurve, Eer, ProtocolError, RankList, ScoreSet};
pub use report::{Protocol, Report};
