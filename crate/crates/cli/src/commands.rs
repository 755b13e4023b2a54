use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use legal_ner::align::{project_down, read_segmentations, Segmentation};
use legal_ner::conll::{
    compare_published, corpus_stats, legal_share, validate_str, CorpusStats, CourtDiff, LegalShare, Severity,
};
use legal_ner::folds::{make_folds, split, FoldError, FoldOptions, FoldQuality};
use legal_ner::metrics::{aggregate_mean, aggregate_pooled, compare_to_baseline, evaluate_at, render_table};
use legal_ner::{chunk, parse_str, write_corpus, Corpus, Granularity, ReadOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::provenance::{with_provenance, Input, Provenance};
use crate::{AggregateArg, Cli, Command, Failure, Format};

type Outcome = Result<bool, Failure>;

struct Loaded {
    input: Input,
    text: String,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let input = Input::new(path, &bytes);
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok(Loaded { input, text })
}

/// Directories expand to the regular files they contain, sorted by name.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(path.clone());
        }
    }
    Ok(out)
}

fn source_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn parse_loaded(loaded: &Loaded, path: &Path, opts: &ReadOptions) -> Result<Corpus, Failure> {
    parse_str(&loaded.text, opts, Some(&source_id(path))).with_context(|| path.display().to_string()).map_err(Failure::from)
}

/// Reads and concatenates `paths` in order.
fn read_corpus(paths: &[PathBuf], opts: &ReadOptions) -> Result<(Corpus, Vec<Input>), Failure> {
    let loaded: Vec<(Corpus, Input)> = paths
        .par_iter()
        .map(|p| {
            let l = load(p)?;
            let corpus = parse_loaded(&l, p, opts)?;
            Ok((corpus, l.input))
        })
        .collect::<Result<_, Failure>>()?;
    let mut corpus = Corpus::new(opts.granularity);
    let mut inputs = Vec::new();
    for (c, input) in loaded {
        corpus.append(c)?;
        inputs.push(input);
    }
    Ok((corpus, inputs))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run(cli: Cli) -> Outcome {
    let format = cli.format;
    match cli.command {
        Command::Validate { paths, read, segmentation } => validate(&paths, &read.options(), segmentation.as_deref(), format),
        Command::Stats { paths, read, provenance } => stats(&paths, &read.options(), provenance.as_deref(), format),
        Command::Split { paths, read, k, seed, stratify, allow_skew, out, materialize } => {
            let opts = FoldOptions { k, seed, stratify_on: stratify, allow_skew };
            split_cmd(&paths, &read.options(), &opts, &out, materialize.as_deref(), format)
        }
        Command::Score { gold, pred, read, policy, at, aggregate, baseline, json_out, text_out } => {
            if gold.len() != pred.len() {
                return Err(Failure::Usage(format!("{} --gold files but {} --pred files", gold.len(), pred.len())));
            }
            let target = at.unwrap_or(read.granularity);
            if baseline.is_some() && target != Granularity::Fine {
                return Err(Failure::Usage("--baseline needs fine-grained scoring".to_owned()));
            }
            let job = ScoreJob { policy, target, aggregate, baseline };
            score(&gold, &pred, &read.options(), &job, json_out.as_deref(), text_out.as_deref(), format)
        }
        Command::MapCoarse { input, out, tab } => map_coarse(&input, out.as_deref(), tab),
        Command::Chunk { input, read, policy } => chunk_cmd(&input, &read.options(), policy, format),
        Command::Project { input, read, segmentation, scheme } => {
            project(&input, &read.options(), &segmentation, scheme.into())
        }
    }
}

#[derive(Serialize)]
struct DiagnosticOut {
    line: usize,
    severity: &'static str,
    message: String,
}

#[derive(Serialize)]
struct FileValidation {
    path: String,
    sentences: usize,
    tokens: usize,
    errors: usize,
    warnings: usize,
    diagnostics: Vec<DiagnosticOut>,
}

#[derive(Serialize)]
struct ValidationOut {
    files: Vec<FileValidation>,
    errors: usize,
    warnings: usize,
}

fn severity_name(s: Severity) -> &'static str {
    match s {
        Severity::Warning => "warning",
        Severity::Error => "error",
    }
}

fn segmentation_diagnostics(lengths: &[usize], segs: &[Segmentation]) -> Vec<DiagnosticOut> {
    let mut out = Vec::new();
    if lengths.len() != segs.len() {
        out.push(DiagnosticOut {
            line: 0,
            severity: "error",
            message: format!("{} sentences but {} segmentation lines", lengths.len(), segs.len()),
        });
    }
    for (i, (len, seg)) in lengths.iter().zip(segs).enumerate() {
        if *len != seg.word_count() {
            out.push(DiagnosticOut {
                line: 0,
                severity: "error",
                message: format!("sentence {}: {} tokens but segmentation line {} has {} words", i + 1, len, i + 1, seg.word_count()),
            });
        }
    }
    out
}

fn validate(paths: &[PathBuf], opts: &ReadOptions, segmentation: Option<&Path>, format: Format) -> Outcome {
    if segmentation.is_some() && paths.len() != 1 {
        return Err(Failure::Usage("--segmentation needs exactly one input file".to_owned()));
    }
    let loaded: Vec<Loaded> = paths.par_iter().map(|p| load(p)).collect::<Result<_, _>>()?;
    let mut files = Vec::new();
    for (path, l) in paths.iter().zip(&loaded) {
        let v = validate_str(&l.text, opts);
        let mut diagnostics: Vec<DiagnosticOut> = v
            .diagnostics
            .iter()
            .map(|d| DiagnosticOut { line: d.line, severity: severity_name(d.severity), message: d.message.clone() })
            .collect();
        if let Some(seg_path) = segmentation {
            let file = fs::File::open(seg_path).with_context(|| format!("reading {}", seg_path.display()))?;
            let segs = read_segmentations(std::io::BufReader::new(file)).with_context(|| seg_path.display().to_string())?;
            diagnostics.extend(segmentation_diagnostics(&v.sentence_lengths, &segs));
        }
        let errors = diagnostics.iter().filter(|d| d.severity == "error").count();
        files.push(FileValidation {
            path: path.display().to_string(),
            sentences: v.sentences,
            tokens: v.tokens,
            errors,
            warnings: diagnostics.len() - errors,
            diagnostics,
        });
    }
    let out = ValidationOut {
        errors: files.iter().map(|f| f.errors).sum(),
        warnings: files.iter().map(|f| f.warnings).sum(),
        files,
    };
    let provenance = Provenance::new("validate", loaded.into_iter().map(|l| l.input).collect());
    match format {
        Format::Json => print_json(&with_provenance(&out, &provenance)),
        Format::Text => {
            for f in &out.files {
                for d in &f.diagnostics {
                    println!("{}:{}: {}: {}", f.path, d.line, d.severity, d.message);
                }
                println!(
                    "{}: {} sentences, {} tokens, {} errors, {} warnings",
                    f.path, f.sentences, f.tokens, f.errors, f.warnings
                );
            }
        }
    }
    Ok(out.errors == 0)
}

#[derive(Serialize)]
struct StatsOut<'a> {
    stats: &'a CorpusStats,
    legal_share: LegalShare,
    published: Vec<CourtDiff>,
}

fn fmt_count(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn fmt_docs(d: Option<usize>) -> String {
    d.map(fmt_count).unwrap_or_else(|| "n/a".to_owned())
}

fn render_stats(out: &StatsOut) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>10} {:>12} {:>10} {:>10}", "Source", "Documents", "Tokens", "Sentences", "Entities");
    let rule = "-".repeat(58);
    let _ = writeln!(s, "{rule}");
    for (source, st) in &out.stats.per_source {
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>12} {:>10} {:>10}",
            source,
            fmt_docs(st.documents),
            fmt_count(st.tokens),
            fmt_count(st.sentences),
            fmt_count(st.entities)
        );
    }
    let t = &out.stats.totals;
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>12} {:>10} {:>10}",
        "Total",
        fmt_docs(t.documents),
        fmt_count(t.tokens),
        fmt_count(t.sentences),
        fmt_count(t.entities)
    );
    let share = out.legal_share;
    let _ = writeln!(
        s,
        "legal entities: {} of {} ({:.2}%)",
        fmt_count(share.legal_entities),
        fmt_count(share.total_entities),
        share.percent
    );
    let compared: Vec<&CourtDiff> = out.published.iter().filter(|r| r.measured.is_some()).collect();
    if !compared.is_empty() {
        let _ = writeln!(s, "\npublished vs measured (tokens, sentences):");
        for r in compared {
            let m = r.measured.as_ref().expect("filtered");
            let mark = if r.matches() { "" } else { "  MISMATCH" };
            let _ = writeln!(
                s,
                "{:<8} {:>10} {:>10} | {:>10} {:>10}{mark}",
                r.court,
                fmt_count(r.published.tokens),
                fmt_count(r.published.sentences),
                fmt_count(m.tokens),
                fmt_count(m.sentences)
            );
        }
    }
    s
}

fn stats(paths: &[PathBuf], opts: &ReadOptions, documents: Option<&Path>, format: Format) -> Outcome {
    let files = expand(paths)?;
    let (corpus, mut inputs) = read_corpus(&files, opts)?;
    let mut stats = corpus_stats(&corpus);
    if let Some(doc_path) = documents {
        let l = load(doc_path)?;
        let counts: BTreeMap<String, usize> =
            serde_json::from_str(&l.text).with_context(|| format!("{}: expected an object of counts", doc_path.display()))?;
        stats = stats.with_documents(&counts);
        inputs.push(l.input);
    }
    let out = StatsOut { legal_share: legal_share(&stats), published: compare_published(&stats), stats: &stats };
    let provenance = Provenance::new("stats", inputs);
    match format {
        Format::Json => print_json(&with_provenance(&out, &provenance)),
        Format::Text => print!("{}", render_stats(&out)),
    }
    Ok(true)
}

#[derive(Serialize)]
struct SplitOut<'a> {
    manifest: String,
    k: usize,
    seed: u64,
    fold_sizes: Vec<usize>,
    quality: &'a FoldQuality,
}

fn split_cmd(
    paths: &[PathBuf],
    opts: &ReadOptions,
    fold_opts: &FoldOptions,
    out: &Path,
    materialize: Option<&Path>,
    format: Format,
) -> Outcome {
    let (corpus, inputs) = read_corpus(paths, opts)?;
    let (manifest, quality) = match make_folds(&corpus, fold_opts) {
        Ok(r) => r,
        Err(FoldError::InvalidK(k)) => return Err(Failure::Usage(format!("k must be at least 2, got {k}"))),
        Err(e) => return Err(e.into()),
    };
    write_file(out, &manifest.to_json())?;
    if let Some(dir) = materialize {
        (0..manifest.k).into_par_iter().try_for_each(|fold| -> Result<(), Failure> {
            let (train, validation) = split(&corpus, &manifest, fold)?;
            let fold_dir = dir.join(format!("fold-{fold}"));
            write_file(&fold_dir.join("train.conll"), &train.to_conll_string())?;
            write_file(&fold_dir.join("validation.conll"), &validation.to_conll_string())?;
            Ok(())
        })?;
    }
    let summary = SplitOut {
        manifest: out.display().to_string(),
        k: manifest.k,
        seed: manifest.seed,
        fold_sizes: manifest.fold_sizes(),
        quality: &quality,
    };
    let provenance = Provenance::new("split", inputs).seed(manifest.seed).policy(manifest.policy);
    match format {
        Format::Json => print_json(&with_provenance(&summary, &provenance)),
        Format::Text => {
            println!("{}", provenance.header());
            println!("wrote {} ({} folds, seed {})", summary.manifest, summary.k, summary.seed);
            let sizes: Vec<String> = summary.fold_sizes.iter().map(|n| n.to_string()).collect();
            println!("fold sizes: {}", sizes.join(" "));
            let violations: Vec<&str> = quality.violations().map(|l| l.label.as_str()).collect();
            if violations.is_empty() {
                println!("all labels within tolerance");
            } else {
                println!("outside tolerance: {}", violations.join(", "));
            }
        }
    }
    Ok(true)
}

struct ScoreJob {
    policy: legal_ner::ChunkPolicy,
    target: Granularity,
    aggregate: AggregateArg,
    baseline: Option<legal_ner::metrics::BaselineColumn>,
}

fn score(
    gold: &[PathBuf],
    pred: &[PathBuf],
    opts: &ReadOptions,
    job: &ScoreJob,
    json_out: Option<&Path>,
    text_out: Option<&Path>,
    format: Format,
) -> Outcome {
    let pairs: Vec<(&PathBuf, &PathBuf)> = gold.iter().zip(pred).collect();
    let results: Vec<(legal_ner::EvaluationReport, Input, Input)> = pairs
        .par_iter()
        .map(|(g, p)| {
            let (gl, pl) = (load(g)?, load(p)?);
            let gc = parse_loaded(&gl, g, opts)?;
            let pc = parse_loaded(&pl, p, opts)?;
            let report = evaluate_at(&gc, &pc, job.policy, job.target)
                .with_context(|| format!("scoring {} against {}", p.display(), g.display()))?;
            Ok((report, gl.input, pl.input))
        })
        .collect::<Result<_, Failure>>()?;
    let mut inputs = Vec::new();
    let mut reports = Vec::new();
    for (r, gi, pi) in results {
        reports.push(r);
        inputs.push(gi);
        inputs.push(pi);
    }
    let mut report = match job.aggregate {
        AggregateArg::Pooled => aggregate_pooled(&reports)?,
        AggregateArg::Mean => aggregate_mean(&reports)?,
    };
    if let Some(column) = job.baseline {
        report = compare_to_baseline(&report, column)?;
    }
    let provenance = Provenance::new("score", inputs).policy(job.policy);
    let json = serde_json::to_string_pretty(&with_provenance(&report, &provenance)).expect("reports serialize") + "\n";
    let text = format!("{}\n{}", provenance.header(), render_table(&report));
    if let Some(path) = json_out {
        write_file(path, &json)?;
    }
    if let Some(path) = text_out {
        write_file(path, &text)?;
    }
    match format {
        Format::Json => print!("{json}"),
        Format::Text => print!("{text}"),
    }
    Ok(true)
}

/// Fine input is mapped; input that only parses as coarse is already mapped.
fn map_coarse(input: &Path, out: Option<&Path>, tab: bool) -> Outcome {
    let l = load(input)?;
    let mut fine = ReadOptions::new(Granularity::Fine);
    let mut coarse = ReadOptions::new(Granularity::Coarse);
    if tab {
        fine.separator = legal_ner::conll::Separator::Tab;
        coarse.separator = legal_ner::conll::Separator::Tab;
    }
    let mapped = match parse_str(&l.text, &fine, None) {
        Ok(c) => c.to_coarse(),
        Err(fine_err) => parse_str(&l.text, &coarse, None)
            .map_err(|_| fine_err)
            .with_context(|| input.display().to_string())?,
    };
    let mut buf = Vec::new();
    write_corpus(&mapped, &mut buf)?;
    let mut text = String::from_utf8(buf).expect("corpus text is UTF-8");
    if tab {
        text = text.lines().map(|l| l.replacen(' ', "\t", 1) + "\n").collect();
    }
    match out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

#[derive(Serialize)]
struct SentenceSpans {
    sentence: usize,
    spans: Vec<SpanOut>,
}

#[derive(Serialize)]
struct SpanOut {
    class: String,
    start: usize,
    end: usize,
    text: String,
}

fn chunk_cmd(input: &Path, opts: &ReadOptions, policy: legal_ner::ChunkPolicy, format: Format) -> Outcome {
    let l = load(input)?;
    let corpus = parse_loaded(&l, input, opts)?;
    let mut out = Vec::new();
    for s in &corpus.sentences {
        let spans = chunk(&s.tags(), policy).with_context(|| format!("sentence {}", s.index + 1))?;
        out.push(SentenceSpans {
            sentence: s.index,
            spans: spans
                .into_iter()
                .map(|sp| SpanOut {
                    class: sp.class.code().to_owned(),
                    start: sp.start,
                    end: sp.end,
                    text: s.tokens[sp.start..=sp.end].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "),
                })
                .collect(),
        });
    }
    match format {
        Format::Json => {
            let provenance = Provenance::new("chunk", vec![l.input]).policy(policy);
            print_json(&with_provenance(&serde_json::json!({ "sentences": out }), &provenance));
        }
        Format::Text => {
            for s in &out {
                let spans: Vec<String> = s.spans.iter().map(|sp| format!("({},{},{}) {}", sp.class, sp.start, sp.end, sp.text)).collect();
                println!("{}\t{}", s.sentence, spans.join("; "));
            }
        }
    }
    Ok(true)
}

fn project(input: &Path, opts: &ReadOptions, segmentation: &Path, scheme: legal_ner::align::Scheme) -> Outcome {
    let l = load(input)?;
    let corpus = parse_loaded(&l, input, opts)?;
    let file = fs::File::open(segmentation).with_context(|| format!("reading {}", segmentation.display()))?;
    let segs = read_segmentations(std::io::BufReader::new(file)).with_context(|| segmentation.display().to_string())?;
    if segs.len() != corpus.len() {
        return Err(anyhow::anyhow!("{} sentences but {} segmentation lines", corpus.len(), segs.len()).into());
    }
    for (s, seg) in corpus.sentences.iter().zip(&segs) {
        let labels = project_down(&s.tags(), seg, scheme).with_context(|| format!("sentence {}", s.index + 1))?;
        let line: Vec<String> = labels.iter().map(ToString::to_string).collect();
        println!("{}", line.join(" "));
    }
    Ok(true)
}
