//! Identification and verification evaluation.
//!
//! Identification: per writer, N random samples are enrolled and the rest
//! are probes; every probe is ranked against every writer template and the
//! ranks summarised as a CMC curve.
//!
//! Verification: enrolment windows of N consecutive samples (in manifest
//! order) are tested against all later samples of the same writer (genuine)
//! and against one pseudo-forgery per test sample (impostor), a sample
//! assembled from other writers' digits spelling the same six-digit string.
//! Results are summarised by the equal error rate.
//!
//! Splits are computed sequentially. Template building and probe scoring
//! fan out over the rayon pool; outputs are collected in input order, so
//! results do not depend on the thread count.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Database, DigitRef, Roster};
use crate::matching::{FeatureSet, MatchError, Matcher, Sample, SampleKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("enrolment size must be at least 1")]
    InvalidEnrolment,
    #[error("no writer has more than {0} samples")]
    NoEligibleWriters(usize),
    #[error("no features for sample {0}")]
    MissingFeatures(SampleKey),
    #[error("digit {label} of {target} has no instance from another writer")]
    InsufficientPool { label: u8, target: SampleKey },
    #[error("no rank lists to summarise")]
    EmptyInput,
    #[error("genuine and impostor scores must both be non-empty")]
    EmptyScores,
    #[error(transparent)]
    Match(#[from] MatchError),
}

pub type FeatureStore<F> = HashMap<SampleKey, F>;

fn lookup<'a, F>(store: &'a FeatureStore<F>, key: &SampleKey) -> Result<&'a F, ProtocolError> {
    store
        .get(key)
        .ok_or_else(|| ProtocolError::MissingFeatures(key.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationSplit {
    pub n: usize,
    pub seed: u64,
    /// Writer id to enrolled sample ids (manifest order).
    pub gallery: BTreeMap<String, Vec<String>>,
    pub probes: Vec<SampleKey>,
}

/// Enrols N random samples of every writer that has at least N+1 and
/// probes with the remainder. Writers with fewer samples are left out.
pub fn split_identification(
    roster: &Roster,
    n: usize,
    seed: u64,
) -> Result<IdentificationSplit, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::InvalidEnrolment);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gallery = BTreeMap::new();
    let mut probes = Vec::new();
    for (writer, samples) in roster.writers() {
        if samples.len() <= n {
            continue;
        }
        let mut chosen = index::sample(&mut rng, samples.len(), n).into_vec();
        chosen.sort_unstable();
        let mut enrol = Vec::with_capacity(n);
        for (i, s) in samples.iter().enumerate() {
            if chosen.binary_search(&i).is_ok() {
                enrol.push(s.clone());
            } else {
                probes.push(SampleKey::new(writer, s.as_str()));
            }
        }
        gallery.insert(writer.to_string(), enrol);
    }
    if gallery.is_empty() {
        return Err(ProtocolError::NoEligibleWriters(n));
    }
    Ok(IdentificationSplit {
        n,
        seed,
        gallery,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankList {
    pub probe: SampleKey,
    /// Writer ids, best match first.
    pub identities: Vec<String>,
    pub distances: Vec<f64>,
}

impl RankList {
    pub fn true_writer(&self) -> &str {
        &self.probe.writer_id
    }

    /// 1-based rank of the true writer, if enrolled.
    pub fn rank_of_truth(&self) -> Option<usize> {
        self.identities
            .iter()
            .position(|w| w == self.true_writer())
            .map(|p| p + 1)
    }
}

fn build_templates<M: Matcher>(
    gallery: &BTreeMap<String, Vec<String>>,
    store: &FeatureStore<M::Features>,
    matcher: &M,
) -> Result<Vec<(String, M::Template)>, ProtocolError> {
    let entries: Vec<(&String, &Vec<String>)> = gallery.iter().collect();
    entries
        .par_iter()
        .map(|(writer, ids)| {
            let members = ids
                .iter()
                .map(|id| lookup(store, &SampleKey::new(writer.as_str(), id.as_str())))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(((*writer).clone(), matcher.template(writer, &members)?))
        })
        .collect()
}

/// Ranks every probe against every gallery template. Ties in distance are
/// broken by writer id.
pub fn run_identification<M: Matcher>(
    split: &IdentificationSplit,
    store: &FeatureStore<M::Features>,
    matcher: &M,
) -> Result<Vec<RankList>, ProtocolError> {
    let templates = build_templates(&split.gallery, store, matcher)?;
    split
        .probes
        .par_iter()
        .map(|key| {
            let probe = lookup(store, key)?;
            let mut scored = templates
                .iter()
                .map(|(w, t)| Ok((w.as_str(), matcher.distance(t, probe)?)))
                .collect::<Result<Vec<_>, MatchError>>()?;
            scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
            Ok(RankList {
                probe: key.clone(),
                identities: scored.iter().map(|(w, _)| w.to_string()).collect(),
                distances: scored.iter().map(|(_, d)| *d).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    /// `top_m[m - 1]` is the Top-m accuracy.
    pub top_m: Vec<f64>,
}

impl CmcCurve {
    pub fn top(&self, m: usize) -> f64 {
        self.top_m[m.clamp(1, self.top_m.len()) - 1]
    }
}

pub fn cmc_curve(lists: &[RankList], m_max: usize) -> Result<CmcCurve, ProtocolError> {
    if lists.is_empty() || m_max == 0 {
        return Err(ProtocolError::EmptyInput);
    }
    let mut hits = vec![0usize; m_max];
    for rank in lists.iter().filter_map(RankList::rank_of_truth) {
        if rank <= m_max {
            hits[rank - 1] += 1;
        }
    }
    let total = lists.len() as f64;
    let mut acc = 0usize;
    let top_m = hits
        .into_iter()
        .map(|h| {
            acc += h;
            acc as f64 / total
        })
        .collect();
    Ok(CmcCurve { top_m })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationBlock {
    pub writer_id: String,
    pub enrol: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationSplit {
    pub n: usize,
    pub blocks: Vec<VerificationBlock>,
}

impl VerificationSplit {
    pub fn test_count(&self) -> usize {
        self.blocks.iter().map(|b| b.test.len()).sum()
    }
}

/// Block k of a writer enrols samples [kN, (k+1)N) and tests every sample
/// from (k+1)N on; blocks continue while a test sample remains.
pub fn split_verification(roster: &Roster, n: usize) -> Result<VerificationSplit, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::InvalidEnrolment);
    }
    let mut blocks = Vec::new();
    for (writer, ids) in roster.writers() {
        let mut k = 0;
        while (k + 1) * n < ids.len() {
            blocks.push(VerificationBlock {
                writer_id: writer.to_string(),
                enrol: ids[k * n..(k + 1) * n]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                test: ids[(k + 1) * n..].iter().map(|s| s.to_string()).collect(),
            });
            k += 1;
        }
    }
    if blocks.is_empty() {
        return Err(ProtocolError::NoEligibleWriters(n));
    }
    Ok(VerificationSplit { n, blocks })
}

/// An impostor sample built from other writers' digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoForgery {
    pub sample: Sample,
    /// Origin of each forged digit.
    pub sources: Vec<DigitRef>,
}

pub fn forgery_key(target: &SampleKey) -> SampleKey {
    SampleKey::new(
        target.writer_id.clone(),
        format!("forgery:{}", target.sample_id),
    )
}

/// For every digit of `target`, draws uniformly among the pool's instances
/// of the same digit class written by anyone else.
pub fn make_pseudo_forgery<R: Rng>(
    target: &Sample,
    pool: &Database,
    rng: &mut R,
) -> Result<PseudoForgery, ProtocolError> {
    let mut sources = Vec::with_capacity(target.labels.len());
    let mut digits = Vec::with_capacity(target.labels.len());
    for &label in &target.labels {
        let candidates = pool.digit_refs(label);
        let others = candidates
            .iter()
            .filter(|r| r.sample.writer_id != target.key.writer_id)
            .count();
        if others == 0 {
            return Err(ProtocolError::InsufficientPool {
                label,
                target: target.key.clone(),
            });
        }
        let pick = rng.random_range(0..others);
        let source = candidates
            .iter()
            .filter(|r| r.sample.writer_id != target.key.writer_id)
            .nth(pick)
            .expect("pick is below the candidate count")
            .clone();
        digits.push(
            pool.digit(&source)
                .expect("digit index points into the pool")
                .clone(),
        );
        sources.push(source);
    }
    let sample = Sample::new(forgery_key(&target.key), digits, target.labels.clone())?;
    Ok(PseudoForgery { sample, sources })
}

pub fn make_pseudo_forgery_seeded(
    target: &Sample,
    pool: &Database,
    seed: u64,
) -> Result<PseudoForgery, ProtocolError> {
    make_pseudo_forgery(target, pool, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Produces the features of one impostor attempt against a test sample.
pub trait ImpostorSource<F>: Sync {
    fn impostor(&self, target: &SampleKey, rng: &mut ChaCha8Rng) -> Result<F, ProtocolError>;

    /// Short label recorded in reports.
    fn describe(&self) -> &'static str;
}

/// Pseudo-forgeries for handcrafted features. The forged sample's features
/// are assembled from the source samples' per-position features, since
/// extraction is per digit.
pub struct PseudoForgeries<'a> {
    pub db: &'a Database,
    pub store: &'a FeatureStore<FeatureSet>,
}

impl PseudoForgeries<'_> {
    pub fn forge(
        &self,
        target: &SampleKey,
        rng: &mut ChaCha8Rng,
    ) -> Result<(PseudoForgery, FeatureSet), ProtocolError> {
        let sample = self
            .db
            .sample(target)
            .ok_or_else(|| ProtocolError::MissingFeatures(target.clone()))?;
        let forgery = make_pseudo_forgery(sample, self.db, rng)?;
        let reference = lookup(self.store, target)?;
        let mut positions = Vec::with_capacity(forgery.sources.len());
        for src in &forgery.sources {
            let set = lookup(self.store, &src.sample)?;
            positions.push(set.positions[src.position].clone());
        }
        let features = FeatureSet {
            sample: forgery.sample.key.clone(),
            config_hash: reference.config_hash.clone(),
            kinds: reference.kinds.clone(),
            positions,
        };
        Ok((forgery, features))
    }
}

impl ImpostorSource<FeatureSet> for PseudoForgeries<'_> {
    fn impostor(
        &self,
        target: &SampleKey,
        rng: &mut ChaCha8Rng,
    ) -> Result<FeatureSet, ProtocolError> {
        self.forge(target, rng).map(|(_, f)| f)
    }

    fn describe(&self) -> &'static str {
        "pseudo-forgery"
    }
}

/// A uniformly drawn sample of another writer. Used where forged digit
/// compositions cannot be featurised locally (precomputed embeddings).
pub struct OtherWriterSamples<'a, F> {
    pub store: &'a FeatureStore<F>,
    keys: Vec<&'a SampleKey>,
}

impl<'a, F> OtherWriterSamples<'a, F> {
    pub fn new(store: &'a FeatureStore<F>) -> Self {
        let mut keys: Vec<&SampleKey> = store.keys().collect();
        keys.sort();
        Self { store, keys }
    }
}

impl<F: Clone + Sync> ImpostorSource<F> for OtherWriterSamples<'_, F> {
    fn impostor(&self, target: &SampleKey, rng: &mut ChaCha8Rng) -> Result<F, ProtocolError> {
        let others = self
            .keys
            .iter()
            .filter(|k| k.writer_id != target.writer_id)
            .count();
        if others == 0 {
            return Err(ProtocolError::NoEligibleWriters(0));
        }
        let pick = rng.random_range(0..others);
        let key = self
            .keys
            .iter()
            .filter(|k| k.writer_id != target.writer_id)
            .nth(pick)
            .expect("pick is below the candidate count");
        Ok(self.store[*key].clone())
    }

    fn describe(&self) -> &'static str {
        "other-writer-sample"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub n: usize,
    pub feature_tag: String,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

/// Per-attempt random stream: the same (seed, attempt) pair always yields
/// the same impostor, whatever the scheduling.
fn attempt_rng(seed: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    rng
}

/// Scores every block test sample (genuine) and one impostor per test
/// sample against the block template.
pub fn run_verification<M: Matcher>(
    split: &VerificationSplit,
    store: &FeatureStore<M::Features>,
    matcher: &M,
    impostors: &dyn ImpostorSource<M::Features>,
    seed: u64,
) -> Result<ScoreSet, ProtocolError> {
    let mut attempts = Vec::with_capacity(split.test_count());
    for (b, block) in split.blocks.iter().enumerate() {
        for test in &block.test {
            attempts.push((b, SampleKey::new(block.writer_id.as_str(), test.as_str())));
        }
    }
    let templates = split
        .blocks
        .par_iter()
        .map(|block| {
            let members = block
                .enrol
                .iter()
                .map(|id| {
                    lookup(
                        store,
                        &SampleKey::new(block.writer_id.as_str(), id.as_str()),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(matcher.template(&block.writer_id, &members)?)
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;

    let pairs = attempts
        .par_iter()
        .enumerate()
        .map(|(i, (b, key))| {
            let template = &templates[*b];
            let genuine = matcher.distance(template, lookup(store, key)?)?;
            let forged = impostors.impostor(key, &mut attempt_rng(seed, i as u64))?;
            let impostor = matcher.distance(template, &forged)?;
            Ok((genuine, impostor))
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;

    let (genuine, impostor) = pairs.into_iter().unzip();
    Ok(ScoreSet {
        n: split.n,
        feature_tag: matcher.tag(),
        genuine,
        impostor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate with acceptance when distance <= t.
///
/// Thresholds sweep every observed score. FAR(t) is the fraction of
/// impostors <= t and FRR(t) the fraction of genuine > t. The operating
/// point is the t minimising |FAR - FRR| (smallest t on ties). If FAR and
/// FRR differ there and change order at an adjacent threshold, both rates
/// are interpolated linearly to their crossing.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<Eer, ProtocolError> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(ProtocolError::EmptyScores);
    }
    let mut gen = genuine.to_vec();
    let mut imp = impostor.to_vec();
    gen.sort_by(f64::total_cmp);
    imp.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let (mut gi, mut ii) = (0usize, 0usize);
    // (far, frr) at each threshold.
    let mut rates = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        while gi < gen.len() && gen[gi] <= t {
            gi += 1;
        }
        while ii < imp.len() && imp[ii] <= t {
            ii += 1;
        }
        rates.push((ii as f64 / ni, (gen.len() - gi) as f64 / ng));
    }

    let gap = |k: usize| rates[k].0 - rates[k].1;
    let mut best = 0;
    for k in 1..rates.len() {
        if gap(k).abs() < gap(best).abs() {
            best = k;
        }
    }
    let (far, frr) = rates[best];
    let d = gap(best);
    let neighbour = if d < 0.0 && best + 1 < rates.len() && gap(best + 1) > 0.0 {
        Some((best, best + 1))
    } else if d > 0.0 && best > 0 && gap(best - 1) < 0.0 {
        Some((best - 1, best))
    } else {
        None
    };
    Ok(match neighbour {
        Some((lo, hi)) => {
            let alpha = -gap(lo) / (gap(hi) - gap(lo));
            Eer {
                eer: rates[lo].0 + alpha * (rates[hi].0 - rates[lo].0),
                threshold: thresholds[lo] + alpha * (thresholds[hi] - thresholds[lo]),
            }
        }
        None => Eer {
            eer: (far + frr) / 2.0,
            threshold: thresholds[best],
        },
    })
}

impl ScoreSet {
    pub fn eer(&self) -> Result<Eer, ProtocolError> {
        compute_eer(&self.genuine, &self.impostor)
    }

    /// Raw scores as CSV, one row per comparison: `kind,distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,distance\n");
        for d in &self.genuine {
            out.push_str(&format!("genuine,{d}\n"));
        }
        for d in &self.impostor {
            out.push_str(&format!("impostor,{d}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
