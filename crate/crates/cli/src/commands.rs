use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use primeball::clock::SystemClock;
use primeball::generator::GIB;
use primeball::metadata::MetadataState;
use primeball::metrics::{property_report, ReportFormat};
use primeball::model::{ArticleId, AuthorId, CountryId, MediaRef, TopicId, Article};
use primeball::query::{execute_on, sample_params, write_csv, write_json};
use primeball::scenario::{audit, run_scenario, REPORT_SCHEMA_VERSION};
use primeball::{
    Backend, Corpus, GeneratorConfig, Harness, QueryKind, QueryParams, QuerySpec, ScenarioId, ScenarioReport,
    SimCluster,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{load_pricing, RunConfig};
use crate::error::Failure;
use crate::{
    GenerateArgs, IndexArgs, InitArgs, ParamArgs, QueryArgs, ReportArgs, ResultFormat, RunArgs, TableFormat,
    VerifyArgs,
};

/// Writes to `path`, creating its directory, or to standard output.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Failure::write(dir, e))?;
            }
            let file = fs::File::create(p).map_err(|e| Failure::write(p, e))?;
            let mut w = io::BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::write(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::internal(format!("writing output: {e}")))
        }
    }
}

fn write_report(path: Option<&Path>, r: &ScenarioReport) -> Result<(), Failure> {
    emit(path, |w| {
        serde_json::to_writer_pretty(&mut *w, r)?;
        w.write_all(b"\n")
    })
}

fn require_empty(dir: &Path) -> Result<(), Failure> {
    let occupied = dir.exists()
        && fs::read_dir(dir)
            .map_err(|e| Failure::precondition(format!("{}: {e}", dir.display())))?
            .next()
            .is_some();
    if occupied {
        return Err(Failure::precondition(format!("{} is not empty", dir.display())));
    }
    Ok(())
}

/// Opens the configured corpus, or generates one in memory. An opened
/// corpus without an explicit `sf` serves as the run corpus: `sf` becomes
/// its size over `corpus_factor`.
fn corpus_for(c: &mut RunConfig) -> Result<Arc<Corpus>, Failure> {
    let corpus = match &c.paths.corpus {
        Some(dir) => {
            let corpus = Corpus::open(dir)?;
            if !c.sf_explicit {
                c.scenario.sf = corpus.total_bytes() as f64 / GIB / c.scenario.corpus_factor;
            }
            corpus
        }
        None => Corpus::generate(&c.scenario.generator_config())?,
    };
    Ok(Arc::new(corpus))
}

fn summary(r: &ScenarioReport) -> String {
    let c = &r.counters;
    let mut s = format!(
        "{} total_s={:.6} ops={} successful={} reads={}",
        r.scenario,
        r.total_us as f64 / 1e6,
        c.total_ops,
        c.successful_ops,
        c.total_reads
    );
    if let Some(n) = r.findings.survivable_removals {
        s.push_str(&format!(" survivable_removals={n}"));
    }
    if let Some(n) = r.findings.store_articles {
        s.push_str(&format!(" store_articles={n}"));
    }
    s
}

pub fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let mut c = RunConfig::load(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        c.scenario.seed = seed;
    }
    let cfg = match a.sf {
        Some(sf) => GeneratorConfig { seed: c.scenario.seed, scale_factor_gb: sf, ..c.scenario.generator.clone() },
        None => c.scenario.generator_config(),
    };
    require_empty(&a.out)?;
    let corpus = Corpus::generate_to_dir(&cfg, &a.out)?;
    let m = &corpus.manifest;
    println!(
        "corpus {} articles={} bytes={} digest={}",
        a.out.display(),
        m.article_count,
        m.total_bytes,
        m.digest
    );
    Ok(())
}

pub fn init(a: InitArgs) -> Result<(), Failure> {
    let mut c = a.settings.resolve()?;
    let data_dir = a
        .data_dir
        .or_else(|| c.paths.data_dir.clone())
        .ok_or_else(|| Failure::usage("init needs --data-dir or a [paths] data_dir entry"))?;
    require_empty(&data_dir)?;
    let out = a.out.or_else(|| c.paths.out.clone());
    let corpus = corpus_for(&mut c)?;
    let mut h = Harness::with_corpus(c.scenario.clone(), corpus)?;
    let report = run_scenario(ScenarioId::S6, &mut h)?;
    h.save_store(&data_dir)?;
    if let Some(p) = &out {
        write_report(Some(p), &report)?;
    }
    let documents = h.backend().metadata().map_or(0, |m| m.n_documents());
    println!("store {} articles={} documents={}", data_dir.display(), h.backend().article_count(), documents);
    eprintln!("{}", summary(&report));
    Ok(())
}

/// Store directories are opened on the wall clock; every stored version
/// is visible to a snapshot regardless.
fn open_store(dir: &Path) -> Result<SimCluster, Failure> {
    if !dir.join("cluster.json").exists() {
        return Err(Failure::precondition(format!("{} is not a store directory", dir.display())));
    }
    Ok(SimCluster::open(dir, Arc::new(SystemClock::new()))?)
}

pub fn index(a: IndexArgs) -> Result<(), Failure> {
    let c = RunConfig::load(a.config.as_deref())?;
    let mut pipeline = c.scenario.pipeline;
    if let Some(seed) = a.seed {
        pipeline.lda.seed = seed;
    }
    let sim = open_store(&a.data_dir)?;
    let snap = sim.snapshot()?;
    let articles: Vec<Article> = snap.articles.values().map(|x| (**x).clone()).collect();
    let media: Vec<MediaRef> = snap.media.values().map(|m| (**m).clone()).collect();
    let meta = MetadataState::build(&articles, &media, pipeline)?;
    let documents = meta.n_documents();
    sim.install_metadata(meta);

    // Write next to the store, then swap it in.
    let name = a.data_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "store".into());
    let parent = a.data_dir.parent().unwrap_or(Path::new("."));
    let fresh = parent.join(format!(".{name}.reindex"));
    let stale = parent.join(format!(".{name}.old"));
    for d in [&fresh, &stale] {
        if d.exists() {
            fs::remove_dir_all(d).map_err(|e| Failure::write(d, e))?;
        }
    }
    sim.save(&fresh)?;
    fs::rename(&a.data_dir, &stale).map_err(|e| Failure::write(&a.data_dir, e))?;
    fs::rename(&fresh, &a.data_dir).map_err(|e| Failure::write(&a.data_dir, e))?;
    fs::remove_dir_all(&stale).map_err(|e| Failure::write(&stale, e))?;
    println!("indexed {} articles={} documents={documents}", a.data_dir.display(), articles.len());
    Ok(())
}

fn overlay(p: &mut QueryParams, a: ParamArgs) {
    p.date = a.date.or(p.date);
    p.from = a.from.or(p.from);
    p.to = a.to.or(p.to);
    p.journalist = a.journalist.map(AuthorId).or(p.journalist);
    p.author = a.author.map(AuthorId).or(p.author);
    p.topic = a.topic.map(TopicId).or(p.topic);
    p.country = a.country.map(CountryId).or(p.country);
    p.month = a.month.or(p.month);
    p.year = a.year.or(p.year);
    p.year1 = a.year1.or(p.year1);
    p.year2 = a.year2.or(p.year2);
    p.day_of_year = a.day_of_year.or(p.day_of_year);
    p.days = a.days.or(p.days);
    p.min_journalists = a.min_journalists.or(p.min_journalists);
    p.min_topics = a.min_topics.or(p.min_topics);
    p.term = a.term.or(p.term.take());
    p.document = a.document.map(ArticleId).or(p.document);
}

pub fn query(a: QueryArgs) -> Result<(), Failure> {
    let kind: QueryKind = a.kind.parse()?;
    let sim = open_store(&a.data_dir)?;
    let snap = sim.snapshot()?;
    let mut params = match a.seed {
        Some(seed) => sample_params(kind, &snap, &mut ChaCha8Rng::seed_from_u64(seed)),
        None => QueryParams::default(),
    };
    overlay(&mut params, a.params);
    let today = a.today.unwrap_or(primeball::ScenarioConfig::default().today);
    let spec = QuerySpec { kind, params, limit: a.limit };
    let result = execute_on(&spec, &snap, today)?;
    emit(a.out.as_deref(), |w| match a.format {
        ResultFormat::Json => write_json(&result, w),
        ResultFormat::Csv => write_csv(&result, w),
    })
}

fn scenario_ids(arg: &str) -> Result<Vec<ScenarioId>, Failure> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(ScenarioId::ALL.to_vec());
    }
    let n: u8 = arg
        .trim_start_matches(['S', 's'])
        .parse()
        .map_err(|_| Failure::usage(format!("--scenario takes 1 to 7 or all, got {arg:?}")))?;
    ScenarioId::try_from(n).map(|id| vec![id]).map_err(|e| Failure::usage(e.to_string()))
}

pub fn run(a: RunArgs) -> Result<(), Failure> {
    let ids = scenario_ids(&a.scenario)?;
    let mut c = a.settings.resolve()?;
    let out = a.out.or_else(|| c.paths.out.clone());
    if ids.len() > 1 && out.is_none() {
        return Err(Failure::usage("running all scenarios needs --out DIR"));
    }
    let corpus = corpus_for(&mut c)?;
    for id in ids.iter().copied() {
        let mut h = Harness::with_corpus(c.scenario.clone(), corpus.clone())?;
        let report = run_scenario(id, &mut h)?;
        let path = match &out {
            Some(dir) if ids.len() > 1 => Some(dir.join(format!("s{}.json", id.number()))),
            other => other.clone(),
        };
        write_report(path.as_deref(), &report)?;
        eprintln!("{}", summary(&report));
    }
    Ok(())
}

/// The JSON files of each input, directories read one level deep.
fn report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Failure::precondition(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(Failure::precondition(format!("{} does not exist", p.display())));
        }
    }
    Ok(files)
}

fn read_report(path: &Path) -> Result<ScenarioReport, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::precondition(format!("{}: {e}", path.display())))?;
    let r: ScenarioReport = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::precondition(format!("{} is not a scenario report: {e}", path.display())))?;
    if r.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Failure::precondition(format!(
            "{} has report schema version {}, expected {REPORT_SCHEMA_VERSION}",
            path.display(),
            r.schema_version
        )));
    }
    Ok(r)
}

pub fn report(a: ReportArgs) -> Result<(), Failure> {
    let c = RunConfig::load(a.config.as_deref())?;
    let pricing = a.pricing.or(c.paths.pricing).map(|p| load_pricing(&p)).transpose()?;
    let reports = report_files(&a.inputs)?.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>()?;
    let table = property_report(&reports, pricing.as_ref())?;
    let format = match a.format {
        TableFormat::Json => ReportFormat::Json,
        TableFormat::Csv => ReportFormat::Csv,
        TableFormat::Markdown => ReportFormat::Markdown,
    };
    emit(a.out.as_deref(), |w| table.write(format, w))
}

pub fn verify(a: VerifyArgs) -> Result<(), Failure> {
    if a.inputs.is_empty() && a.corpus.is_none() && a.data_dir.is_none() {
        return Err(Failure::usage("verify needs --in, --corpus or --data-dir"));
    }
    let mut checks: Vec<(String, Result<String, String>)> = Vec::new();
    for p in report_files(&a.inputs)? {
        let outcome = read_report(&p)
            .map_err(|f| f.message)
            .and_then(|r| audit(&r).map(|_| format!("{} records={}", r.scenario, r.records.len())).map_err(|e| e.to_string()));
        checks.push((format!("report {}", p.display()), outcome));
    }
    if let Some(dir) = &a.corpus {
        let outcome = Corpus::open(dir)
            .map(|c| format!("articles={} digest={}", c.manifest.article_count, c.manifest.digest))
            .map_err(|e| e.to_string());
        checks.push((format!("corpus {}", dir.display()), outcome));
    }
    if let Some(dir) = &a.data_dir {
        let outcome = open_store(dir)
            .map_err(|f| f.message)
            .and_then(|s| s.snapshot().map_err(|e| e.to_string()))
            .map(|snap| {
                let docs = snap.metadata.as_ref().map_or(0, |m| m.n_documents());
                format!("articles={} documents={docs}", snap.articles.len())
            });
        checks.push((format!("store {}", dir.display()), outcome));
    }
    let mut failed = 0;
    for (what, outcome) in &checks {
        match outcome {
            Ok(detail) => println!("ok {what} {detail}"),
            Err(e) => {
                failed += 1;
                println!("fail {what}: {e}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure::precondition(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
