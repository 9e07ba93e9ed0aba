use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use digitprint::dataset::{load_manifest, read_embeddings, synthesize_writers, write_manifest};
use digitprint::features::{kinds_tag, parse_kinds, FeatureKind};
use digitprint::protocols::{
    cmc_curve, run_identification, run_verification, split_identification, split_verification,
    FeatureStore, ImpostorSource, OtherWriterSamples, PseudoForgeries, RankList,
};
use digitprint::report::summary_csv;
use digitprint::{
    ComparisonMode, Database, EmbeddingMatcher, ExtractionConfig, HandcraftedMatcher, Matcher,
    Protocol, Report, Roster, SynthConfig,
};
use serde::Serialize;

use crate::cache::FeatureCache;
use crate::{
    Command, EvalArgs, ExtractArgs, ProtocolChoice, ReportArgs, Source, SweepArgs, SynthArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Identify(a) => {
            evaluate("identify", &a, &[Protocol::Identification], None).map(drop)
        }
        Command::Verify(a) => evaluate("verify", &a, &[Protocol::Verification], None).map(drop),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn synth_config(path: Option<&Path>) -> Result<SynthConfig> {
    let cfg = match path {
        Some(p) => read_json(p).context("dataset")?,
        None => SynthConfig::default(),
    };
    cfg.validate().context("dataset")?;
    Ok(cfg)
}

fn extraction_config(path: Option<&Path>) -> Result<ExtractionConfig> {
    let cfg = match path {
        Some(p) => read_json(p).context("features")?,
        None => ExtractionConfig::default(),
    };
    cfg.validate().context("features")?;
    Ok(cfg)
}

/// The data source as recorded in reports.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
enum SourceRecord {
    Manifest(String),
    Synth {
        path: Option<String>,
        config: SynthConfig,
    },
}

fn load_source(source: &Source) -> Result<Option<(Database, SourceRecord)>> {
    match (&source.manifest, &source.synth) {
        (Some(m), _) => {
            let db = load_manifest(m).context("dataset")?;
            Ok(Some((db, SourceRecord::Manifest(m.display().to_string()))))
        }
        (None, Some(s)) => {
            let config = synth_config(Some(s))?;
            let db = synthesize_writers(&config).context("dataset")?;
            let record = SourceRecord::Synth {
                path: Some(s.display().to_string()),
                config,
            };
            Ok(Some((db, record)))
        }
        (None, None) => Ok(None),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let cfg = synth_config(args.synth.as_deref())?;
    let db = synthesize_writers(&cfg).context("dataset")?;
    let manifest = write_manifest(&db, &args.out).context("dataset")?;
    let resolved = args.out.join("synth-config.json");
    fs::write(&resolved, serde_json::to_string_pretty(&cfg)? + "\n")
        .with_context(|| format!("cli: cannot write {}", resolved.display()))?;
    println!(
        "{} writers, {} samples -> {}",
        db.writer_count(),
        db.sample_count(),
        manifest.display()
    );
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let Some((db, _)) = load_source(&args.source)? else {
        bail!("cli: extract needs --manifest or --synth");
    };
    let kinds = parse_kinds(&args.features).context("features")?;
    let cfg = extraction_config(args.extraction.as_deref())?;
    let (_, stats) = FeatureCache::new(&args.out).features(&db, &cfg, &kinds)?;
    println!(
        "config-hash {}: {} extracted, {} cached -> {}",
        cfg.config_hash(),
        stats.extracted,
        stats.hits,
        args.out.join(cfg.config_hash()).display()
    );
    Ok(())
}

/// Everything that determines a run's results.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct RunConfig {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<SourceRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    embeddings: Option<String>,
    features: Vec<FeatureKind>,
    mode: Option<ComparisonMode>,
    enrol: Vec<usize>,
    seeds: Vec<u64>,
    cmc_depth: usize,
    out: String,
}

fn enrol_sizes(args: &EvalArgs, default_range: Option<(usize, usize)>) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = match (args.enrol, args.enrol_range, default_range) {
        (Some(n), _, _) => vec![n],
        (None, Some(r), _) => (r.first..=r.last).collect(),
        (None, None, Some((a, b))) => (a..=b).collect(),
        (None, None, None) => bail!("cli: one of --enrol or --enrol-range is required"),
    };
    if let Some(&bad) = sizes.iter().find(|&&n| n == 0 || n > args.max_enrol) {
        bail!(
            "cli: enrolment size {bad} outside 1..{} (see --max-enrol)",
            args.max_enrol
        );
    }
    Ok(sizes)
}

fn seeds(args: &EvalArgs) -> Vec<u64> {
    match args.seed {
        Some(s) => vec![s],
        None if !args.seeds.is_empty() => args.seeds.clone(),
        None => vec![0],
    }
}

struct Plan<'a> {
    run_config: RunConfig,
    extraction: serde_json::Value,
    roster: Roster,
    sizes: Vec<usize>,
    seeds: Vec<u64>,
    protocols: &'a [Protocol],
    cmc_depth: usize,
    out: PathBuf,
    /// File-name label of the matcher variant.
    variant: String,
}

/// Runs the requested protocols over every (N, seed) and writes one report
/// per run. Returns the reports in the order written.
fn evaluate(
    command: &str,
    args: &EvalArgs,
    protocols: &[Protocol],
    default_range: Option<(usize, usize)>,
) -> Result<Vec<Report>> {
    let sizes = enrol_sizes(args, default_range)?;
    let seeds = seeds(args);
    if args.cmc_depth == 0 {
        bail!("cli: --cmc-depth must be at least 1");
    }
    let source = load_source(&args.source)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cli: cannot create {}", args.out.display()))?;

    let mut run_config = RunConfig {
        command: command.to_string(),
        source: source.as_ref().map(|(_, r)| r.clone()),
        embeddings: None,
        features: Vec::new(),
        mode: None,
        enrol: sizes.clone(),
        seeds: seeds.clone(),
        cmc_depth: args.cmc_depth,
        out: args.out.display().to_string(),
    };

    if let Some(path) = &args.embeddings {
        let embeddings = read_embeddings(path).context("dataset")?;
        let roster = match &source {
            Some((db, _)) => db.roster(),
            None => Roster::from_keys(
                embeddings
                    .iter()
                    .map(|e| e.key())
                    .collect::<Vec<_>>()
                    .iter(),
            ),
        };
        let store: FeatureStore<_> = embeddings.into_iter().map(|e| (e.key(), e)).collect();
        run_config.embeddings = Some(path.display().to_string());
        let plan = Plan {
            run_config,
            extraction: serde_json::Value::Null,
            roster,
            sizes,
            seeds,
            protocols,
            cmc_depth: args.cmc_depth,
            out: args.out.clone(),
            variant: "embedding".to_string(),
        };
        let impostors = OtherWriterSamples::new(&store);
        return execute(&plan, &store, &EmbeddingMatcher, &impostors);
    }

    let Some((db, _)) = &source else {
        bail!("cli: one of --manifest, --synth or --embeddings is required");
    };
    let kinds = parse_kinds(&args.features).context("features")?;
    let cfg = extraction_config(args.extraction.as_deref())?;
    let cache = FeatureCache::new(args.cache.clone().unwrap_or_else(|| args.out.join("cache")));
    let (store, _) = cache.features(db, &cfg, &kinds)?;
    let matcher = HandcraftedMatcher::new(&kinds, args.mode);
    run_config.features = matcher.kinds.clone();
    run_config.mode = Some(args.mode);
    let plan = Plan {
        run_config,
        extraction: serde_json::to_value(&cfg)?,
        roster: db.roster(),
        sizes,
        seeds,
        protocols,
        cmc_depth: args.cmc_depth,
        out: args.out.clone(),
        variant: format!("{}-{}", kinds_tag(&matcher.kinds), args.mode),
    };
    let impostors = PseudoForgeries { db, store: &store };
    execute(&plan, &store, &matcher, &impostors)
}

fn execute<M: Matcher>(
    plan: &Plan,
    store: &FeatureStore<M::Features>,
    matcher: &M,
    impostors: &dyn ImpostorSource<M::Features>,
) -> Result<Vec<Report>> {
    let run_config = serde_json::to_value(&plan.run_config)?;
    let mut reports = Vec::new();
    for &protocol in plan.protocols {
        for &n in &plan.sizes {
            for &seed in &plan.seeds {
                let (mut report, table) = match protocol {
                    Protocol::Identification => identification(plan, store, matcher, n, seed)?,
                    Protocol::Verification => {
                        let split = split_verification(&plan.roster, n).context("protocols")?;
                        let scores = run_verification(&split, store, matcher, impostors, seed)
                            .context("protocols")?;
                        let eer = scores.eer().context("protocols")?;
                        let mut writers: Vec<&str> =
                            split.blocks.iter().map(|b| b.writer_id.as_str()).collect();
                        writers.dedup();
                        let mut r = Report::verification(
                            seed,
                            writers.len(),
                            split.blocks.len(),
                            &scores,
                            eer,
                        );
                        r.notes.insert(
                            "testSet".into(),
                            "all samples after the enrolment window".into(),
                        );
                        r.notes.insert(
                            "impostors".into(),
                            format!("one {} per test sample", impostors.describe()),
                        );
                        (r, scores.to_csv())
                    }
                };
                report.run_config = run_config.clone();
                report.extraction_config = plan.extraction.clone();
                let stem = format!("{protocol}-{}-N{n:02}-seed{seed}", plan.variant);
                write(&plan.out.join(format!("{stem}.json")), &report.to_json())?;
                let suffix = match protocol {
                    Protocol::Identification => "ranks",
                    Protocol::Verification => "scores",
                };
                write(&plan.out.join(format!("{stem}-{suffix}.csv")), &table)?;
                println!("{}", headline(&report));
                reports.push(report);
            }
        }
    }
    Ok(reports)
}

fn identification<M: Matcher>(
    plan: &Plan,
    store: &FeatureStore<M::Features>,
    matcher: &M,
    n: usize,
    seed: u64,
) -> Result<(Report, String)> {
    let split = split_identification(&plan.roster, n, seed).context("protocols")?;
    let lists = run_identification(&split, store, matcher).context("protocols")?;
    let cmc = cmc_curve(&lists, plan.cmc_depth).context("protocols")?;
    let mut report = Report::identification(n, seed, matcher.tag(), &lists, &cmc);
    let excluded = plan.roster.writer_count() - split.gallery.len();
    report.notes.insert(
        "excludedWriters".into(),
        format!("{excluded} with fewer than N+1 samples"),
    );
    Ok((report, ranks_csv(&lists)))
}

fn ranks_csv(lists: &[RankList]) -> String {
    let mut out = String::from("writer_id,sample_id,rank,top_writer,top_distance,true_distance\n");
    for l in lists {
        let rank = l.rank_of_truth();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            l.probe.writer_id,
            l.probe.sample_id,
            rank.map(|r| r.to_string()).unwrap_or_default(),
            l.identities.first().map(String::as_str).unwrap_or(""),
            l.distances
                .first()
                .map(|d| d.to_string())
                .unwrap_or_default(),
            rank.map(|r| l.distances[r - 1].to_string())
                .unwrap_or_default(),
        ));
    }
    out
}

fn headline(r: &Report) -> String {
    match r.protocol {
        Protocol::Identification => format!(
            "identification {} N={} seed={} top1={:.4}",
            r.feature_tag,
            r.n,
            r.seed,
            r.top(1).unwrap_or(0.0)
        ),
        Protocol::Verification => format!(
            "verification {} N={} seed={} eer={:.4}",
            r.feature_tag,
            r.n,
            r.seed,
            r.eer.unwrap_or(f64::NAN)
        ),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cli: cannot write {}", path.display()))
}

fn sweep(args: SweepArgs) -> Result<()> {
    let protocols: &[Protocol] = match args.protocol {
        ProtocolChoice::Identification => &[Protocol::Identification],
        ProtocolChoice::Verification => &[Protocol::Verification],
        ProtocolChoice::Both => &[Protocol::Identification, Protocol::Verification],
    };
    let reports = evaluate(
        "sweep",
        &args.eval,
        protocols,
        Some((1, args.eval.max_enrol.min(10))),
    )?;
    let path = args.eval.out.join("summary.csv");
    write(&path, &summary_csv(&reports))?;
    println!("summary -> {}", path.display());
    Ok(())
}

fn collect_reports(
    path: &Path,
    explicit: bool,
    into: &mut BTreeMap<PathBuf, Report>,
) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("cli: cannot list {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for p in entries {
            collect_reports(&p, false, into)?;
        }
    } else if explicit || path.extension().is_some_and(|e| e == "json") {
        match read_json::<Report>(path) {
            Ok(r) => {
                into.insert(path.to_path_buf(), r);
            }
            // Directories also hold caches and configs; only named files must parse.
            Err(e) if explicit => return Err(e.context("cli")),
            Err(_) => {}
        }
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut found = BTreeMap::new();
    for input in &args.inputs {
        if !input.exists() {
            bail!("cli: no such file or directory: {}", input.display());
        }
        collect_reports(input, true, &mut found)?;
    }
    if found.is_empty() {
        bail!("cli: no reports found");
    }
    let reports: Vec<Report> = found.into_values().collect();
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cli: cannot create {}", args.out.display()))?;
    let path = args.out.join("summary.csv");
    write(&path, &summary_csv(&reports))?;
    println!("{} reports -> {}", reports.len(), path.display());
    Ok(())
}
