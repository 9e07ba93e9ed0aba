//! On-disk feature cache: one JSON file per sample under
//! `<root>/<config-hash>/<writer>/<sample>.json`. Entries carry a digest of
//! the sample's pixels and are re-extracted when it no longer matches or
//! when they lack a requested kind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use digitprint::dataset::{path_component, sample_digest};
use digitprint::features::FeatureKind;
use digitprint::matching::extract_sample_features;
use digitprint::protocols::FeatureStore;
use digitprint::{Database, ExtractionConfig, FeatureSet, Sample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct Entry {
    digest: String,
    features: FeatureSet,
}

pub struct FeatureCache {
    root: PathBuf,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub extracted: usize,
}

impl FeatureCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn entry_path(&self, cfg_hash: &str, sample: &Sample) -> PathBuf {
        self.root
            .join(cfg_hash)
            .join(path_component(&sample.key.writer_id))
            .join(format!("{}.json", path_component(&sample.key.sample_id)))
    }

    fn load(path: &Path, digest: &str, kinds: &[FeatureKind]) -> Option<FeatureSet> {
        let entry: Entry = serde_json::from_slice(&fs::read(path).ok()?).ok()?;
        let usable =
            entry.digest == digest && kinds.iter().all(|k| entry.features.kinds.contains(k));
        usable.then_some(entry.features)
    }

    /// Features for every sample of `db`, extracting (in parallel) whatever
    /// the cache cannot supply. Cache writes happen on the calling thread.
    pub fn features(
        &self,
        db: &Database,
        cfg: &ExtractionConfig,
        kinds: &[FeatureKind],
    ) -> Result<(FeatureStore<FeatureSet>, CacheStats)> {
        let hash = cfg.config_hash();
        let samples: Vec<&Sample> = db.samples().collect();
        let results = samples
            .par_iter()
            .map(|s| {
                let path = self.entry_path(&hash, s);
                let digest = sample_digest(s);
                match Self::load(&path, &digest, kinds) {
                    Some(f) => Ok((f, None)),
                    None => {
                        let f = extract_sample_features(s, cfg, kinds)
                            .with_context(|| format!("matching: {}", s.key))?;
                        Ok((f, Some((path, digest))))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let mut stats = CacheStats::default();
        let mut store = FeatureStore::with_capacity(results.len());
        for (features, fresh) in results {
            if let Some((path, digest)) = fresh {
                stats.extracted += 1;
                let dir = path.parent().expect("entry paths have a parent");
                fs::create_dir_all(dir).with_context(|| format!("cache: {}", dir.display()))?;
                let entry = Entry { digest, features };
                fs::write(&path, serde_json::to_vec(&entry)?)
                    .with_context(|| format!("cache: {}", path.display()))?;
                store.insert(entry.features.sample.clone(), entry.features);
            } else {
                stats.hits += 1;
                store.insert(features.sample.clone(), features);
            }
        }
        Ok((store, stats))
    }
}
