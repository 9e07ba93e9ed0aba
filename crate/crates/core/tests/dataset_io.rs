use std::collections::HashMap;
use std::fs;

use digitprint::dataset::{
    load_manifest, read_embeddings, synthesize_writers, write_embeddings, write_manifest,
    DatasetError,
};
use digitprint::features::FeatureKind;
use digitprint::matching::extract_sample_features;
use digitprint::protocols::{cmc_curve, run_identification, split_identification};
use digitprint::{
    ComparisonMode, Embedding, ExtractionConfig, HandcraftedMatcher, SampleKey, StyleVariance,
    SynthConfig,
};

fn small() -> SynthConfig {
    SynthConfig {
        writer_count: 3,
        samples_per_writer: 3,
        seed: 5,
        ..SynthConfig::default()
    }
}

#[test]
fn manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let db = synthesize_writers(&small()).unwrap();
    let path = write_manifest(&db, dir.path()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("writer_id,sample_id,digit_index,digit_label,image_path\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 6 * 9);
    assert_eq!(load_manifest(&path).unwrap(), db);
}

#[test]
fn manifest_order_is_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let db = synthesize_writers(&small()).unwrap();
    let path = write_manifest(&db, dir.path()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    // Reverse the samples (blocks of six rows) but keep rows within a sample.
    let mut blocks: Vec<Vec<&str>> = lines.chunks(6).map(|c| c.to_vec()).collect();
    blocks.reverse();
    let mut shuffled = vec![header.to_string()];
    // Rows of one sample may also arrive out of digit order.
    for b in &blocks {
        shuffled.extend(b.iter().rev().map(|s| s.to_string()));
    }
    fs::write(&path, shuffled.join("\n") + "\n").unwrap();
    let reordered = load_manifest(&path).unwrap();
    for (writer, samples) in reordered.writers() {
        let ids: Vec<&str> = samples.iter().map(|s| s.key.sample_id.as_str()).collect();
        let mut expected: Vec<&str> = db
            .samples_of(writer)
            .iter()
            .map(|s| s.key.sample_id.as_str())
            .collect();
        expected.reverse();
        assert_eq!(ids, expected);
        for s in samples {
            assert_eq!(s, db.sample(&s.key).unwrap());
        }
    }
}

#[test]
fn digit_index_is_complete() {
    let db = synthesize_writers(&SynthConfig {
        writer_count: 8,
        samples_per_writer: 4,
        count_skew: 0.5,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut seen = HashMap::new();
    for label in 0..10u8 {
        for r in db.digit_refs(label) {
            assert_eq!(db.sample(&r.sample).unwrap().labels[r.position], label);
            *seen.entry(r.clone()).or_insert(0) += 1;
        }
    }
    assert_eq!(seen.len(), db.sample_count() * 6);
    assert!(seen.values().all(|&n| n == 1));
}

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn manifest_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let db = synthesize_writers(&small()).unwrap();
    let path = write_manifest(&db, dir.path()).unwrap();
    let text = fs::read_to_string(&path).unwrap();

    let bad_header = write(
        dir.path(),
        "h.csv",
        &text.replacen("writer_id", "writer", 1),
    );
    match load_manifest(&bad_header) {
        Err(DatasetError::Parse { line: 1, .. }) => {}
        other => panic!("{:?}", other.map(|_| ())),
    }

    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[3].split(',').collect();
    fields[2] = "x";
    lines[3] = fields.join(",");
    let bad_row = write(dir.path(), "r.csv", &(lines.join("\n") + "\n"));
    match load_manifest(&bad_row) {
        Err(DatasetError::Parse {
            line: 4, message, ..
        }) => assert!(message.contains("digit_index"), "{message}"),
        other => panic!("{:?}", other.map(|_| ())),
    }

    let short: Vec<&str> = text.lines().take(6).collect();
    let incomplete = write(dir.path(), "s.csv", &(short.join("\n") + "\n"));
    assert!(load_manifest(&incomplete).is_err());

    let missing_image = write(dir.path(), "m.csv", &text.replace("images/", "nowhere/"));
    assert!(load_manifest(&missing_image).is_err());

    match load_manifest(&dir.path().join("absent.csv")) {
        Err(e @ DatasetError::Parse { line: 0, .. }) => {
            assert!(e.to_string().starts_with("parse error"))
        }
        other => panic!("{:?}", other.map(|_| ())),
    }
}

fn embedding(w: &str, s: &str, dim: usize, scale: f32) -> Embedding {
    Embedding {
        id: s.into(),
        writer_id: w.into(),
        vector: (0..dim)
            .map(|i| (i as f32 * 0.37 - 3.0) * scale + 1e-7)
            .collect(),
    }
}

#[test]
fn embeddings_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    let list = vec![
        embedding("a", "1", 512, 1.0),
        embedding("a", "2", 512, -1.0e-3),
        embedding("b", "x,y", 512, 3.3e4),
    ];
    write_embeddings(&path, &list).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("sample_id,writer_id,dim,v0,v1,"));
    assert!(text.lines().next().unwrap().ends_with(",v511"));
    assert_eq!(read_embeddings(&path).unwrap(), list);
}

#[test]
fn embedding_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.csv", "");
    assert!(matches!(
        read_embeddings(&empty),
        Err(DatasetError::Parse { .. })
    ));
    let wrong_dim = write(
        dir.path(),
        "d.csv",
        "sample_id,writer_id,dim,v0,v1\ns,w,3,0.5,0.25\n",
    );
    assert!(matches!(
        read_embeddings(&wrong_dim),
        Err(DatasetError::Dimension(_))
    ));
    let short_row = write(
        dir.path(),
        "r.csv",
        "sample_id,writer_id,dim,v0,v1\ns,w,2,0.5\n",
    );
    assert!(read_embeddings(&short_row).is_err());
    let dup = write(
        dir.path(),
        "u.csv",
        "sample_id,writer_id,dim,v0\ns,w,1,0.5\ns,w,1,0.25\n",
    );
    assert!(read_embeddings(&dup).is_err());
    let ok = write(
        dir.path(),
        "k.csv",
        "sample_id,writer_id,dim,v0\ns,w,1,0.5\n",
    );
    assert_eq!(
        read_embeddings(&ok).unwrap()[0].key(),
        SampleKey::new("w", "s")
    );
}

fn mean_top1(style: StyleVariance) -> f64 {
    let kinds = [FeatureKind::Direction, FeatureKind::Hinge];
    let matcher = HandcraftedMatcher::new(&kinds, ComparisonMode::Digitwise);
    let cfg = ExtractionConfig::default();
    let seeds = 0..10u64;
    let total: f64 = seeds
        .clone()
        .map(|seed| {
            let db = synthesize_writers(&SynthConfig {
                seed,
                style_variance: style.clone(),
                ..SynthConfig::default()
            })
            .unwrap();
            let store = db
                .samples()
                .map(|s| {
                    (
                        s.key.clone(),
                        extract_sample_features(s, &cfg, &kinds).unwrap(),
                    )
                })
                .collect();
            let split = split_identification(&db.roster(), 5, seed).unwrap();
            let lists = run_identification(&split, &store, &matcher).unwrap();
            cmc_curve(&lists, 1).unwrap().top(1)
        })
        .sum();
    total / seeds.count() as f64
}

#[test]
fn more_style_variance_separates_writers_better() {
    let base = StyleVariance::default();
    let low = mean_top1(base.scaled(0.5));
    let mid = mean_top1(base.clone());
    let high = mean_top1(base.scaled(1.5));
    assert!(mid >= low - 0.02, "{low} -> {mid}");
    assert!(high >= mid - 0.02, "{mid} -> {high}");
}
