//! Pipeline stages. Each stage reads its upstream artifacts (checked
//! against the producing stage's manifest), writes only under the work
//! directory, and records a manifest of what it read and wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use citesim_core::corpus::write_atomic;
use citesim_core::embedding::{
    group_by_year, ids_path, mock_embeddings, read_matrix, read_scored, score_edge_stream, write_matrix,
    ScoredWriter, YearStat,
};
use citesim_core::features::{read_features, write_features};
use citesim_core::ipc::within_level_citation_counts;
use citesim_core::synth::{synth_corpus, SynthProfile};
use citesim_core::{
    build_features, filter_utility, ingest_citations, ingest_patents, yearly_lag_stats, CorpusStore, IngestOptions,
    Level,
};
use citesim_gam::{fit_model, model_catalog, partial_effect, FitOptions, FitReport, LambdaSearch, PartialEffect};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::manifest::{FileEntry, StageManifest, Workdir};
use crate::svg::{histogram, render, Bin, Panel, Series};

pub const SYNTH_PATENTS: &str = "synth/patents.csv";
pub const SYNTH_CITATIONS: &str = "synth/citations.csv";
pub const SYNTH_TRUTH: &str = "synth/ground_truth.json";
pub const CORPUS_PATENTS: &str = "corpus/patents.csv";
pub const CORPUS_CITATIONS: &str = "corpus/citations.csv";
pub const CORPUS_REJECTS: &str = "corpus/rejects.csv";
pub const MOCK_PSIM: &str = "embeddings/mock.psim";
pub const MOCK_MANIFEST: &str = "embeddings/mock.manifest.json";
pub const SCORED: &str = "scores/scored.csv";
pub const YEARLY_SIMILARITY: &str = "scores/yearly_similarity.csv";
pub const FEATURES: &str = "features/features.csv";
pub const YEARLY_LAG: &str = "features/yearly_lag.csv";
pub const REPORT_CRITERIA: &str = "report/criteria.csv";
pub const REPORT_COEFFICIENTS: &str = "report/coefficients.csv";
pub const REPORT_TABLE: &str = "report/table.md";

pub const HISTOGRAM_BINS: usize = 50;

pub fn fit_report_path(level: u8) -> String {
    format!("fits/model_{level}.json")
}

pub fn partial_effect_path(level: u8, term: &str) -> String {
    format!("fits/model_{level}/{term}.csv")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Score,
    Features,
    Fit(u8),
    Report,
    Figs,
}

impl Stage {
    /// Manifest name, also used in "run `...` first" messages.
    pub fn name(self) -> String {
        match self {
            Stage::Synth => "synth".into(),
            Stage::Ingest => "ingest".into(),
            Stage::Score => "score".into(),
            Stage::Features => "features".into(),
            Stage::Fit(level) => format!("fit-model-{level}"),
            Stage::Report => "report".into(),
            Stage::Figs => "figs".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub manifest: StageManifest,
    pub manifest_path: PathBuf,
    /// Human-readable notes, e.g. skipped figure bundles.
    pub notices: Vec<String>,
    pub seconds: f64,
}

/// Runs one stage under the work-directory lock.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let wd = Workdir::create(&cfg.workdir)?;
    let _lock = wd.lock()?;
    let start = Instant::now();
    let mut notices = Vec::new();
    let manifest = match stage {
        Stage::Synth => synth(&wd, cfg)?,
        Stage::Ingest => ingest(&wd, cfg)?,
        Stage::Score => score(&wd, cfg)?,
        Stage::Features => features(&wd, cfg)?,
        Stage::Fit(level) => fit(&wd, cfg, level)?,
        Stage::Report => report(&wd)?,
        Stage::Figs => figs(&wd, &mut notices)?,
    };
    let manifest_path = wd.write_manifest(&manifest)?;
    let seconds = start.elapsed().as_secs_f64();
    wd.write_timing(&manifest.stage, seconds)?;
    log::info!("{} finished in {seconds:.2}s", manifest.stage);
    Ok(StageOutcome {
        manifest,
        manifest_path,
        notices,
        seconds,
    })
}

/// Every stage in order: synthetic corpus (unless external inputs are
/// configured), ingest, score, features, the four fits, report, figures.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<StageOutcome>> {
    let mut stages = Vec::new();
    if cfg.patents.is_none() {
        stages.push(Stage::Synth);
    }
    stages.extend([Stage::Ingest, Stage::Score, Stage::Features]);
    stages.extend((0..=3).map(Stage::Fit));
    stages.extend([Stage::Report, Stage::Figs]);
    stages.into_iter().map(|s| run_stage(s, cfg)).collect()
}

fn outputs(wd: &Workdir, paths: &[PathBuf]) -> Result<Vec<FileEntry>> {
    paths.iter().map(|p| wd.entry(p)).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn synth(wd: &Workdir, cfg: &PipelineConfig) -> Result<StageManifest> {
    let profile = SynthProfile::default();
    let (corpus, truth) = synth_corpus(cfg.seed, cfg.synth_patents, cfg.synth_edges, &profile)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let patents = wd.output(SYNTH_PATENTS)?;
    let citations = wd.output(SYNTH_CITATIONS)?;
    let truth_path = wd.output(SYNTH_TRUTH)?;
    corpus.write_patents(&patents)?;
    corpus.write_citations(&citations)?;
    write_text(&truth_path, &(serde_json::to_string_pretty(&truth)? + "\n"))?;
    Ok(StageManifest {
        stage: Stage::Synth.name(),
        settings: json!({ "seed": cfg.seed, "n_patents": cfg.synth_patents, "n_edges": cfg.synth_edges }),
        inputs: vec![],
        outputs: outputs(wd, &[patents, citations, truth_path])?,
        report: json!({ "patents": corpus.len(), "edges": corpus.edges().len() }),
    })
}

fn ingest(wd: &Workdir, cfg: &PipelineConfig) -> Result<StageManifest> {
    let (patents_in, citations_in, inputs) = match (&cfg.patents, &cfg.citations) {
        (Some(p), Some(c)) => {
            let inputs = vec![wd.entry(p)?, wd.entry(c)?];
            (p.clone(), c.clone(), inputs)
        }
        _ => {
            let inputs = vec![wd.require(SYNTH_PATENTS, "synth")?, wd.require(SYNTH_CITATIONS, "synth")?];
            (wd.path(SYNTH_PATENTS), wd.path(SYNTH_CITATIONS), inputs)
        }
    };
    let options = IngestOptions {
        strict: cfg.strict,
        ..IngestOptions::default()
    };
    let (corpus, patent_report) = ingest_patents(&patents_in, &options)?;
    let (corpus, citation_report) = ingest_citations(&citations_in, corpus)?;
    let (corpus, filter_report) = if cfg.utility_only {
        filter_utility(&corpus)
    } else {
        (corpus, Default::default())
    };

    let patents = wd.output(CORPUS_PATENTS)?;
    let citations = wd.output(CORPUS_CITATIONS)?;
    let rejects = wd.output(CORPUS_REJECTS)?;
    corpus.write_patents(&patents)?;
    corpus.write_citations(&citations)?;
    patent_report.write_rejects(&rejects)?;
    Ok(StageManifest {
        stage: Stage::Ingest.name(),
        settings: json!({ "strict": cfg.strict, "utility_only": cfg.utility_only }),
        inputs,
        outputs: outputs(wd, &[patents, citations, rejects])?,
        report: json!({
            "patents": {
                "rows_read": patent_report.rows_read,
                "accepted": patent_report.accepted,
                "rejected": patent_report.rejects.len(),
            },
            "citations": citation_report,
            "utility_filter": filter_report,
            "corpus": { "patents": corpus.len(), "edges": corpus.edges().len() },
        }),
    })
}

/// Re-reads the validated corpus written by `ingest`.
fn load_corpus(wd: &Workdir) -> Result<(CorpusStore, Vec<FileEntry>)> {
    let inputs = vec![wd.require(CORPUS_PATENTS, "ingest")?, wd.require(CORPUS_CITATIONS, "ingest")?];
    let options = IngestOptions {
        strict: true,
        ..IngestOptions::default()
    };
    let (corpus, _) = ingest_patents(&wd.path(CORPUS_PATENTS), &options)?;
    let (corpus, _) = ingest_citations(&wd.path(CORPUS_CITATIONS), corpus)?;
    Ok((corpus, inputs))
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write_year_stats(path: &Path, stats: &[YearStat]) -> Result<()> {
    let mut text = String::from("year,mean,count,stddev\n");
    for s in stats {
        let _ = writeln!(text, "{},{},{},{}", s.year, s.mean, s.count, s.stddev);
    }
    write_text(path, &text)
}

fn score(wd: &Workdir, cfg: &PipelineConfig) -> Result<StageManifest> {
    let (corpus, mut inputs) = load_corpus(wd)?;
    let mut outs = Vec::new();
    let (matrix, source) = match &cfg.psim {
        Some(psim) => {
            let matrix = read_matrix(psim)?;
            inputs.push(wd.entry(psim)?);
            inputs.push(wd.entry(&ids_path(psim))?);
            (matrix, "psim")
        }
        None => {
            // the stand-in encoder covers what a real one would: patents
            // with a non-empty abstract
            let ids: Vec<String> = corpus
                .patents()
                .iter()
                .filter(|p| !p.abstract_text.trim().is_empty())
                .map(|p| p.patent_id.clone())
                .collect();
            let matrix = mock_embeddings(cfg.seed, &ids, cfg.dim)?;
            let psim = wd.output(MOCK_PSIM)?;
            write_matrix(&psim, &matrix)?;
            let manifest = wd.output(MOCK_MANIFEST)?;
            // mock output is a pure function of (seed, ids, dim), so the
            // creation stamp is pinned to keep reruns identical
            let meta = json!({
                "model": format!("mock(seed={})", cfg.seed),
                "dim": matrix.dim(),
                "count": matrix.count(),
                "created": "1970-01-01T00:00:00Z",
            });
            write_text(&manifest, &(serde_json::to_string_pretty(&meta)? + "\n"))?;
            outs.extend([psim.clone(), ids_path(&psim), manifest]);
            (matrix, "mock")
        }
    };

    let scored_path = wd.output(SCORED)?;
    let mut writer = ScoredWriter::create(&scored_path)?;
    let mut by_year: Vec<(i32, f64)> = Vec::with_capacity(corpus.edges().len());
    let mut n_scored = 0usize;
    let batch = cfg.chunk_size.saturating_mul(16).max(1);
    let skips = with_workers(cfg.workers, || {
        score_edge_stream(&matrix, corpus.edges().iter().cloned(), batch, cfg.chunk_size, |rows| {
            n_scored += rows.len();
            for r in rows {
                if let Some(p) = corpus.patent(&r.sender_id) {
                    by_year.push((p.grant_date.year(), r.similarity));
                }
            }
            writer.write(rows)
        })
    })??;
    writer.finish()?;

    let yearly = wd.output(YEARLY_SIMILARITY)?;
    write_year_stats(&yearly, &group_by_year(by_year))?;
    outs.extend([scored_path, yearly]);
    Ok(StageManifest {
        stage: Stage::Score.name(),
        settings: json!({
            "embeddings": source,
            "seed": cfg.seed,
            "dim": matrix.dim(),
            "chunk_size": cfg.chunk_size,
        }),
        inputs,
        outputs: outputs(wd, &outs)?,
        report: json!({
            "edges": corpus.edges().len(),
            "scored": n_scored,
            "skipped": skips,
            "matrix_rows": matrix.count(),
        }),
    })
}

fn features(wd: &Workdir, cfg: &PipelineConfig) -> Result<StageManifest> {
    let (corpus, mut inputs) = load_corpus(wd)?;
    inputs.push(wd.require(SCORED, "score")?);
    let scored = read_scored(&wd.path(SCORED))?;
    let table = build_features(&corpus, &scored, cfg.keep_negative_lags);
    let features = wd.output(FEATURES)?;
    write_features(&features, &table)?;
    let lag = wd.output(YEARLY_LAG)?;
    write_year_stats(&lag, &yearly_lag_stats(&table))?;
    Ok(StageManifest {
        stage: Stage::Features.name(),
        settings: json!({ "keep_negative_lags": cfg.keep_negative_lags }),
        inputs,
        outputs: outputs(wd, &[features, lag])?,
        report: json!({ "scored": scored.len(), "rows": table.len(), "drops": table.drops }),
    })
}

fn write_partial_effect(path: &Path, pe: &PartialEffect) -> Result<()> {
    let mut text = String::from("grid,f_hat,se_lower,se_upper\n");
    for ((x, f), se) in pe.grid.iter().zip(&pe.f_hat).zip(&pe.se) {
        let _ = writeln!(text, "{x},{f},{},{}", f - 2.0 * se, f + 2.0 * se);
    }
    write_text(path, &text)
}

fn fit(wd: &Workdir, cfg: &PipelineConfig, level: u8) -> Result<StageManifest> {
    let spec = model_catalog(level)?.with_smooth_settings(cfg.basis_size, cfg.penalty_order);
    let input = wd.require(FEATURES, "features")?;
    let table = read_features(&wd.path(FEATURES))?;
    let options = FitOptions {
        search: LambdaSearch {
            log_lower: cfg.log_lambda_min,
            log_upper: cfg.log_lambda_max,
            ..LambdaSearch::default()
        },
        ..FitOptions::default()
    };
    let fit = fit_model(&spec, &table, &options)?;
    let report = FitReport::from_fit(level, &fit);
    let report_path = wd.output(&fit_report_path(level))?;
    write_text(&report_path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let mut outs = vec![report_path];
    for term in &spec.smooth_terms {
        let pe = partial_effect(&fit, &term.feature, cfg.grid_size)?;
        let path = wd.output(&partial_effect_path(level, &term.feature))?;
        write_partial_effect(&path, &pe)?;
        outs.push(path);
    }
    Ok(StageManifest {
        stage: Stage::Fit(level).name(),
        settings: json!({
            "model_level": level,
            "basis_size": cfg.basis_size,
            "penalty_order": cfg.penalty_order,
            "log_lambda": [cfg.log_lambda_min, cfg.log_lambda_max],
            "grid_size": cfg.grid_size,
        }),
        inputs: vec![input],
        outputs: outputs(wd, &outs)?,
        report: json!({
            "n": fit.n,
            "dropped_rows": fit.dropped_rows,
            "edf_total": fit.edf_total,
            "lambda_converged": fit.lambda_converged,
        }),
    })
}

/// A labelled per-model value in the comparison tables.
type Column = (&'static str, fn(&FitReport) -> String);

/// Fit reports present in the work directory, by model level.
fn available_fits(wd: &Workdir) -> Result<Vec<(FitReport, FileEntry)>> {
    let mut out = Vec::new();
    for level in 0..=3u8 {
        if wd.read_manifest(&Stage::Fit(level).name())?.is_none() {
            continue;
        }
        let rel = fit_report_path(level);
        let entry = wd.require(&rel, &Stage::Fit(level).name())?;
        let report: FitReport = serde_json::from_str(&std::fs::read_to_string(wd.path(&rel))?)?;
        out.push((report, entry));
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report(wd: &Workdir) -> Result<StageManifest> {
    let fits = available_fits(wd)?;
    if fits.is_empty() {
        return Err(CliError::Validation("no fit reports found: run `fit --model N` first".into()));
    }
    let levels: Vec<u8> = fits.iter().map(|(r, _)| r.model_level).collect();

    let mut criteria = String::from("criterion");
    for l in &levels {
        let _ = write!(criteria, ",model_{l}");
    }
    criteria.push('\n');
    let rows: [Column; 5] = [
        ("aic", |r| r.aic.to_string()),
        ("gcv", |r| r.gcv.to_string()),
        ("dev_explained", |r| r.dev_explained.to_string()),
        ("n", |r| r.n.to_string()),
        ("dropped_rows", |r| r.dropped_rows.to_string()),
    ];
    for (name, value) in rows {
        criteria.push_str(name);
        for (r, _) in &fits {
            let _ = write!(criteria, ",{}", value(r));
        }
        criteria.push('\n');
    }

    let mut coefs = String::from("model,term,kind,estimate,se,p_value,significance,lambda,edf\n");
    for (r, _) in &fits {
        for c in &r.coefficients {
            let _ = writeln!(
                coefs,
                "{},{},parametric,{},{},{},{},,",
                r.model_level,
                csv_field(&c.name),
                c.estimate,
                c.se,
                c.p_value,
                c.significance
            );
        }
        for s in &r.smooths {
            let _ = writeln!(coefs, "{},{},smooth,,,,,{},{}", r.model_level, csv_field(&s.name), s.lambda, s.edf);
        }
    }

    let table = markdown_table(&fits.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
    let criteria_path = wd.output(REPORT_CRITERIA)?;
    let coef_path = wd.output(REPORT_COEFFICIENTS)?;
    let table_path = wd.output(REPORT_TABLE)?;
    write_text(&criteria_path, &criteria)?;
    write_text(&coef_path, &coefs)?;
    write_text(&table_path, &table)?;
    Ok(StageManifest {
        stage: Stage::Report.name(),
        settings: json!({ "models": levels }),
        inputs: fits.into_iter().map(|(_, e)| e).collect(),
        outputs: outputs(wd, &[criteria_path, coef_path, table_path])?,
        report: json!({ "columns": levels.len() }),
    })
}

/// Regression-table layout: parametric terms, then smooth EDFs, then the
/// model criteria at the bottom.
fn markdown_table(fits: &[FitReport]) -> String {
    let mut out = String::from("| term |");
    for r in fits {
        let _ = write!(out, " Model {} |", r.model_level);
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(fits.len()));
    out.push('\n');

    let mut terms: Vec<String> = Vec::new();
    for r in fits {
        for c in &r.coefficients {
            if !terms.contains(&c.name) {
                terms.push(c.name.clone());
            }
        }
    }
    for t in &terms {
        let _ = write!(out, "| {t} |");
        for r in fits {
            match r.coefficients.iter().find(|c| &c.name == t) {
                Some(c) => {
                    let _ = write!(out, " {:.4} ({:.4}){} |", c.estimate, c.se, c.significance.replace('*', "\\*"));
                }
                None => out.push_str(" |"),
            }
        }
        out.push('\n');
    }
    let mut smooths: Vec<String> = Vec::new();
    for r in fits {
        for s in &r.smooths {
            if !smooths.contains(&s.name) {
                smooths.push(s.name.clone());
            }
        }
    }
    for s in &smooths {
        let _ = write!(out, "| s({s}) edf |");
        for r in fits {
            match r.smooths.iter().find(|x| &x.name == s) {
                Some(x) => {
                    let _ = write!(out, " {:.3} |", x.edf);
                }
                None => out.push_str(" |"),
            }
        }
        out.push('\n');
    }
    let crit: [Column; 4] = [
        ("AIC", |r| format!("{:.2}", r.aic)),
        ("GCV", |r| format!("{:.4}", r.gcv)),
        ("Deviance explained", |r| format!("{:.2}%", 100.0 * r.dev_explained)),
        ("n", |r| r.n.to_string()),
    ];
    for (name, f) in crit {
        let _ = write!(out, "| {name} |");
        for r in fits {
            let _ = write!(out, " {} |", f(r));
        }
        out.push('\n');
    }
    out.push_str("\nSignificance: \\*\\*\\* p < 0.001, \\*\\* p < 0.01, \\* p < 0.05 (normal approximation).\n");
    out
}

fn write_bins(path: &Path, bins: &[Bin]) -> Result<()> {
    let mut text = String::from("bin_lo,bin_hi,count\n");
    for b in bins {
        let _ = writeln!(text, "{},{},{}", b.lo, b.hi, b.count);
    }
    write_text(path, &text)
}

fn read_year_stats(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| CliError::Internal(format!("{}: bad row", path.display())));
        out.push((parse(f[0])?, parse(f[1])?));
    }
    Ok(out)
}

/// Emits whichever figure bundles have their inputs; missing inputs skip
/// the bundle with a notice.
fn figs(wd: &Workdir, notices: &mut Vec<String>) -> Result<StageManifest> {
    let mut inputs = Vec::new();
    let mut outs = Vec::new();
    let mut emitted = Vec::new();
    let mut skipped = serde_json::Map::new();
    let mut skip = |name: &str, err: CliError, notices: &mut Vec<String>| -> Result<()> {
        match err {
            CliError::Validation(msg) => {
                notices.push(format!("{name} skipped: {msg}"));
                skipped.insert(name.to_string(), json!(msg));
                Ok(())
            }
            e => Err(e),
        }
    };

    match fig_ipc(wd) {
        Ok((i, o)) => {
            inputs.extend(i);
            outs.extend(o);
            emitted.push("fig1_ipc_within");
        }
        Err(e) => skip("fig1_ipc_within", e, notices)?,
    }
    match fig_similarity(wd) {
        Ok((i, o)) => {
            inputs.extend(i);
            outs.extend(o);
            emitted.push("fig2_similarity");
        }
        Err(e) => skip("fig2_similarity", e, notices)?,
    }
    match fig_lag(wd) {
        Ok((i, o)) => {
            inputs.extend(i);
            outs.extend(o);
            emitted.push("fig3_temporal_lag");
        }
        Err(e) => skip("fig3_temporal_lag", e, notices)?,
    }
    match fig_partial_effects(wd) {
        Ok((i, o)) => {
            inputs.extend(i);
            outs.extend(o);
            emitted.push("fig4_partial_effects");
        }
        Err(e) => skip("fig4_partial_effects", e, notices)?,
    }
    for n in notices.iter() {
        log::warn!("{n}");
    }
    inputs.sort_by(|a, b| a.path.cmp(&b.path));
    inputs.dedup();
    Ok(StageManifest {
        stage: Stage::Figs.name(),
        settings: json!({ "histogram_bins": HISTOGRAM_BINS }),
        inputs,
        outputs: outputs(wd, &outs)?,
        report: json!({ "emitted": emitted, "skipped": skipped }),
    })
}

type Bundle = (Vec<FileEntry>, Vec<PathBuf>);

fn fig_ipc(wd: &Workdir) -> Result<Bundle> {
    let (corpus, inputs) = load_corpus(wd)?;
    let mut text = String::from("year,level,within,outside,excluded\n");
    let mut panels = Vec::new();
    for level in [Level::Class, Level::Subclass] {
        let rows = within_level_citation_counts(&corpus, level);
        for r in &rows {
            let _ = writeln!(text, "{},{},{},{},{}", r.year, level.name(), r.within, r.outside, r.excluded);
        }
        let pts = |f: fn(&citesim_core::ipc::WithinLevelRow) -> usize| {
            rows.iter().map(|r| (r.year as f64, f(r) as f64)).collect::<Vec<_>>()
        };
        panels.push(Panel::Lines {
            title: format!("Citations by {}", level.name()),
            x_label: "sender grant year".into(),
            y_label: "citations".into(),
            series: vec![
                Series::new(format!("within {}", level.name()), pts(|r| r.within)),
                Series::new(format!("outside {}", level.name()), pts(|r| r.outside)).dashed(),
            ],
        });
    }
    let csv = wd.output("figs/fig1_ipc_within.csv")?;
    let svg = wd.output("figs/fig1_ipc_within.svg")?;
    write_text(&csv, &text)?;
    write_text(&svg, &render("IPC citations comparison", &panels))?;
    Ok((inputs, vec![csv, svg]))
}

fn fig_similarity(wd: &Workdir) -> Result<Bundle> {
    let inputs = vec![wd.require(SCORED, "score")?, wd.require(YEARLY_SIMILARITY, "score")?];
    let scored = read_scored(&wd.path(SCORED))?;
    let values: Vec<f64> = scored.iter().map(|s| s.similarity).collect();
    let bins = histogram(&values, HISTOGRAM_BINS);
    let yearly = read_year_stats(&wd.path(YEARLY_SIMILARITY))?;
    let hist = wd.output("figs/fig2_similarity_hist.csv")?;
    let svg = wd.output("figs/fig2_similarity.svg")?;
    write_bins(&hist, &bins)?;
    let panels = [
        Panel::Bars {
            title: "Similarity distribution".into(),
            x_label: "similarity".into(),
            y_label: "citations".into(),
            bins,
        },
        Panel::Lines {
            title: "Average similarity per year".into(),
            x_label: "sender grant year".into(),
            y_label: "mean similarity".into(),
            series: vec![Series::new("mean", yearly)],
        },
    ];
    write_text(&svg, &render("Citation similarity", &panels))?;
    Ok((inputs, vec![hist, svg]))
}

fn fig_lag(wd: &Workdir) -> Result<Bundle> {
    let inputs = vec![wd.require(FEATURES, "features")?, wd.require(YEARLY_LAG, "features")?];
    let table = read_features(&wd.path(FEATURES))?;
    let values: Vec<f64> = table.rows.iter().map(|r| r.temporal_diff_days).collect();
    let bins = histogram(&values, HISTOGRAM_BINS);
    let yearly = read_year_stats(&wd.path(YEARLY_LAG))?;
    let hist = wd.output("figs/fig3_lag_hist.csv")?;
    let svg = wd.output("figs/fig3_temporal_lag.svg")?;
    write_bins(&hist, &bins)?;
    let panels = [
        Panel::Bars {
            title: "Temporal lag distribution".into(),
            x_label: "lag (days)".into(),
            y_label: "citations".into(),
            bins,
        },
        Panel::Lines {
            title: "Average lag per year".into(),
            x_label: "sender grant year".into(),
            y_label: "mean lag (days)".into(),
            series: vec![Series::new("mean", yearly)],
        },
    ];
    write_text(&svg, &render("Temporal lag", &panels))?;
    Ok((inputs, vec![hist, svg]))
}

fn fig_partial_effects(wd: &Workdir) -> Result<Bundle> {
    let mut inputs = Vec::new();
    let mut text = String::from("model,term,grid,f_hat,se_lower,se_upper\n");
    let mut per_term: Vec<(String, Vec<Series>)> = Vec::new();
    for level in 0..=3u8 {
        let stage = Stage::Fit(level).name();
        let Some(manifest) = wd.read_manifest(&stage)? else {
            continue;
        };
        let prefix = format!("fits/model_{level}/");
        for out in manifest.outputs.iter().filter(|o| o.path.starts_with(&prefix)) {
            inputs.push(wd.require(&out.path, &stage)?);
            let term = out.path[prefix.len()..].trim_end_matches(".csv").to_string();
            let body = std::fs::read_to_string(wd.path(&out.path))?;
            let mut points = Vec::new();
            for line in body.lines().skip(1) {
                let _ = writeln!(text, "{level},{term},{line}");
                let mut f = line.split(',').map(|s| s.parse::<f64>().unwrap_or(f64::NAN));
                if let (Some(x), Some(y)) = (f.next(), f.next()) {
                    points.push((x, y));
                }
            }
            let series = Series::new(format!("Model {level}"), points);
            match per_term.iter_mut().find(|(t, _)| *t == term) {
                Some((_, s)) => s.push(series),
                None => per_term.push((term, vec![series])),
            }
        }
    }
    if inputs.is_empty() {
        return Err(CliError::missing_stage("partial effects", "fit --model N"));
    }
    let panels: Vec<Panel> = per_term
        .into_iter()
        .map(|(term, series)| Panel::Lines {
            title: format!("s({term})"),
            x_label: term,
            y_label: "partial effect".into(),
            series,
        })
        .collect();
    let csv = wd.output("figs/fig4_partial_effects.csv")?;
    let svg = wd.output("figs/fig4_partial_effects.svg")?;
    write_text(&csv, &text)?;
    write_text(&svg, &render("Models splines", &panels))?;
    Ok((inputs, vec![csv, svg]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> PipelineConfig {
        PipelineConfig {
            workdir: dir.to_path_buf(),
            synth_patents: 300,
            synth_edges: 2_000,
            dim: 16,
            basis_size: 8,
            grid_size: 20,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn fit_requires_features() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_stage(Stage::Fit(3), &config(dir.path())).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("run `features` first"), "{err}");
    }

    #[test]
    fn figs_with_only_scores() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        for s in [Stage::Synth, Stage::Ingest, Stage::Score] {
            run_stage(s, &cfg).unwrap();
        }
        let out = run_stage(Stage::Figs, &cfg).unwrap();
        assert_eq!(out.manifest.report["emitted"], json!(["fig1_ipc_within", "fig2_similarity"]));
        assert_eq!(out.notices.len(), 2);
        assert!(dir.path().join("figs/fig2_similarity.svg").exists());
        assert!(!dir.path().join("figs/fig3_temporal_lag.svg").exists());
    }

    #[test]
    fn empty_scores_give_no_data_figure() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            synth_edges: 0,
            ..config(dir.path())
        };
        for s in [Stage::Synth, Stage::Ingest, Stage::Score] {
            run_stage(s, &cfg).unwrap();
        }
        run_stage(Stage::Figs, &cfg).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("figs/fig2_similarity.svg")).unwrap();
        assert!(svg.contains("no data"));
        let csv = std::fs::read_to_string(dir.path().join("figs/fig2_similarity_hist.csv")).unwrap();
        assert_eq!(csv, "bin_lo,bin_hi,count\n");
    }

    #[test]
    fn tampered_upstream_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        for s in [Stage::Synth, Stage::Ingest] {
            run_stage(s, &cfg).unwrap();
        }
        let path = dir.path().join(CORPUS_CITATIONS);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("P0000001,P0000002\n");
        std::fs::write(&path, text).unwrap();
        let err = run_stage(Stage::Score, &cfg).unwrap_err();
        assert!(err.to_string().contains("rerun `ingest`"), "{err}");
    }
}
