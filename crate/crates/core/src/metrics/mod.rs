//! Entity-level precision, recall and F1.
//!
//! A predicted span counts as a true positive only when a gold span in the
//! same sentence has the same class, start and end. Unmatched predictions
//! are false positives and unmatched gold spans false negatives. All ratios
//! are percentages; a zero denominator yields `0.0` and an entry in
//! [`ClassMetrics::undefined`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::{chunk, ChunkError, ChunkPolicy, EntitySpan};
use crate::conll::Corpus;
use crate::schema::{CoarseClass, EntityClass, FineClass, Granularity, LabelTag};

mod baseline;
mod render;

pub use baseline::{baseline_row, compare_to_baseline, BaselineColumn, BaselineComparison, BaselineRow, ClassDelta, BASELINE_TABLE};
pub use render::render_table;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold has {gold} sentences but predictions have {predicted}")]
    SentenceCountMismatch { gold: usize, predicted: usize },
    #[error("sentence {sentence}: gold has {gold} tokens but predictions have {predicted}")]
    ShapeMismatch { sentence: usize, gold: usize, predicted: usize },
    #[error("granularity mismatch: expected {expected}, found {found}")]
    GranularityMismatch { expected: Granularity, found: Granularity },
    #[error("sentence {sentence} ({side}): {source}")]
    Chunk { sentence: usize, side: &'static str, source: ChunkError },
    #[error("cannot aggregate zero reports")]
    NoReports,
    #[error("cannot aggregate reports with different {0}")]
    IncompatibleReports(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn is_zero(&self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

/// Per-class counts accumulated over sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally(pub BTreeMap<EntityClass, Counts>);

impl Tally {
    pub fn merge(mut self, other: Tally) -> Tally {
        for (class, c) in other.0 {
            self.0.entry(class).or_default().add(c);
        }
        self
    }

    pub fn total(&self) -> Counts {
        let mut total = Counts::default();
        for c in self.0.values() {
            total.add(*c);
        }
        total
    }

    /// Scores one sentence given its gold and predicted spans.
    pub fn from_spans(gold: &[EntitySpan], predicted: &[EntitySpan]) -> Tally {
        let gold_set: HashSet<&EntitySpan> = gold.iter().collect();
        let pred_set: HashSet<&EntitySpan> = predicted.iter().collect();
        let mut tally = Tally::default();
        for span in predicted {
            let c = tally.0.entry(span.class.clone()).or_default();
            if gold_set.contains(span) {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
        }
        for span in gold {
            if !pred_set.contains(span) {
                tally.0.entry(span.class.clone()).or_default().fn_ += 1;
            }
        }
        tally
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Precision,
    Recall,
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub name: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub undefined: Vec<Metric>,
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

impl ClassMetrics {
    pub fn from_counts(class: &str, name: &str, c: Counts) -> Self {
        let precision = percent(c.tp, c.tp + c.fp);
        let recall = percent(c.tp, c.tp + c.fn_);
        let p = precision.unwrap_or(0.0);
        let r = recall.unwrap_or(0.0);
        // equals 2PR/(P+R); the count form avoids a second rounding step
        let f1 = (p + r > 0.0).then(|| 200.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64);
        let mut undefined = Vec::new();
        for (m, v) in [(Metric::Precision, precision), (Metric::Recall, recall), (Metric::F1, f1)] {
            if v.is_none() {
                undefined.push(m);
            }
        }
        ClassMetrics {
            class: class.to_owned(),
            name: name.to_owned(),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: p,
            recall: r,
            f1: f1.unwrap_or(0.0),
            support: c.tp + c.fn_,
            undefined,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts { tp: self.tp, fp: self.fp, fn_: self.fn_ }
    }

    pub fn is_defined(&self, metric: Metric) -> bool {
        !self.undefined.contains(&metric)
    }
}

/// How per-fold results were combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Counts summed before computing ratios (a single run is pooled too).
    Pooled,
    /// Ratios averaged over folds.
    MeanOfFolds,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Pooled => "pooled",
            Aggregation::MeanOfFolds => "mean-of-folds",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub granularity: Granularity,
    pub policy: ChunkPolicy,
    pub aggregation: Aggregation,
    pub folds: usize,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub micro: ClassMetrics,
    /// Unweighted mean F1 over classes with nonzero support.
    pub macro_f1: f64,
    pub macro_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineComparison>,
}

fn taxonomy(granularity: Granularity) -> Vec<EntityClass> {
    match granularity {
        Granularity::Fine => FineClass::ALL.iter().map(|c| EntityClass::Fine(*c)).collect(),
        Granularity::Coarse => CoarseClass::ALL.iter().map(|c| EntityClass::Coarse(*c)).collect(),
    }
}

fn macro_f1<'a>(classes: impl Iterator<Item = &'a ClassMetrics>) -> (f64, usize) {
    let f1s: Vec<f64> = classes.filter(|m| m.support > 0).map(|m| m.f1).collect();
    if f1s.is_empty() {
        (0.0, 0)
    } else {
        (f1s.iter().sum::<f64>() / f1s.len() as f64, f1s.len())
    }
}

impl EvaluationReport {
    /// Builds a report from raw counts. Every class of the taxonomy is
    /// listed, plus any unknown class present in `tally`.
    pub fn from_tally(tally: &Tally, granularity: Granularity, policy: ChunkPolicy) -> Self {
        let mut per_class = BTreeMap::new();
        let mut classes = taxonomy(granularity);
        classes.extend(tally.0.keys().filter(|c| matches!(c, EntityClass::Unknown(_))).cloned());
        for class in classes {
            let counts = tally.0.get(&class).copied().unwrap_or_default();
            per_class.insert(class.code().to_owned(), ClassMetrics::from_counts(class.code(), class.long_name(), counts));
        }
        let micro = ClassMetrics::from_counts("ALL", "All classes", tally.total());
        let (macro_f1, macro_classes) = macro_f1(per_class.values());
        EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            granularity,
            policy,
            aggregation: Aggregation::Pooled,
            folds: 1,
            per_class,
            micro,
            macro_f1,
            macro_classes,
            baseline: None,
        }
    }

    /// Rows in taxonomy order, then unknown classes alphabetically.
    pub fn rows(&self) -> Vec<&ClassMetrics> {
        let order: Vec<String> = taxonomy(self.granularity).iter().map(|c| c.code().to_owned()).collect();
        let mut rows: Vec<&ClassMetrics> = order.iter().filter_map(|c| self.per_class.get(c)).collect();
        rows.extend(self.per_class.values().filter(|m| !order.contains(&m.class)));
        rows
    }
}

/// Counts matches between two token-aligned corpora.
pub fn tally(gold: &Corpus, predicted: &Corpus, policy: ChunkPolicy) -> Result<Tally, MetricsError> {
    if gold.granularity != predicted.granularity {
        return Err(MetricsError::GranularityMismatch { expected: gold.granularity, found: predicted.granularity });
    }
    if gold.len() != predicted.len() {
        return Err(MetricsError::SentenceCountMismatch { gold: gold.len(), predicted: predicted.len() });
    }
    gold.sentences
        .par_iter()
        .zip(predicted.sentences.par_iter())
        .enumerate()
        .map(|(i, (g, p))| {
            if g.len() != p.len() {
                return Err(MetricsError::ShapeMismatch { sentence: i, gold: g.len(), predicted: p.len() });
            }
            let spans = |tags: Vec<LabelTag>, side| {
                chunk(&tags, policy).map_err(|source| MetricsError::Chunk { sentence: i, side, source })
            };
            Ok(Tally::from_spans(&spans(g.tags(), "gold")?, &spans(p.tags(), "predicted")?))
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
}

/// Scores `predicted` against `gold` at their shared granularity.
pub fn evaluate(gold: &Corpus, predicted: &Corpus, policy: ChunkPolicy) -> Result<EvaluationReport, MetricsError> {
    let counts = tally(gold, predicted, policy)?;
    Ok(EvaluationReport::from_tally(&counts, gold.granularity, policy))
}

/// Scores at `target` granularity; fine corpora are mapped to coarse tags
/// before chunking when `target` is coarse.
pub fn evaluate_at(
    gold: &Corpus,
    predicted: &Corpus,
    policy: ChunkPolicy,
    target: Granularity,
) -> Result<EvaluationReport, MetricsError> {
    match (gold.granularity, predicted.granularity, target) {
        (g, p, _) if g != p => Err(MetricsError::GranularityMismatch { expected: g, found: p }),
        (Granularity::Fine, _, Granularity::Coarse) => evaluate(&gold.to_coarse(), &predicted.to_coarse(), policy),
        (Granularity::Coarse, _, Granularity::Fine) => {
            Err(MetricsError::GranularityMismatch { expected: Granularity::Fine, found: Granularity::Coarse })
        }
        _ => evaluate(gold, predicted, policy),
    }
}

fn check_compatible(reports: &[EvaluationReport]) -> Result<&EvaluationReport, MetricsError> {
    let first = reports.first().ok_or(MetricsError::NoReports)?;
    for r in reports {
        if r.granularity != first.granularity {
            return Err(MetricsError::IncompatibleReports("granularity"));
        }
        if r.policy != first.policy {
            return Err(MetricsError::IncompatibleReports("chunk policy"));
        }
    }
    Ok(first)
}

/// Sums fold counts, then computes ratios once.
pub fn aggregate_pooled(reports: &[EvaluationReport]) -> Result<EvaluationReport, MetricsError> {
    let first = check_compatible(reports)?;
    let mut per_class: BTreeMap<String, (String, Counts)> = BTreeMap::new();
    for r in reports {
        for m in r.per_class.values() {
            per_class.entry(m.class.clone()).or_insert_with(|| (m.name.clone(), Counts::default())).1.add(m.counts());
        }
    }
    let mut micro = Counts::default();
    for (_, c) in per_class.values() {
        micro.add(*c);
    }
    let per_class: BTreeMap<String, ClassMetrics> = per_class
        .into_iter()
        .map(|(class, (name, c))| {
            let m = ClassMetrics::from_counts(&class, &name, c);
            (class, m)
        })
        .collect();
    let (macro_f1, macro_classes) = macro_f1(per_class.values());
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        granularity: first.granularity,
        policy: first.policy,
        aggregation: Aggregation::Pooled,
        folds: reports.len(),
        per_class,
        micro: ClassMetrics::from_counts("ALL", "All classes", micro),
        macro_f1,
        macro_classes,
        baseline: None,
    })
}

/// Averages each ratio over the folds where it is defined. Counts are summed.
fn mean_metrics(rows: &[&ClassMetrics]) -> ClassMetrics {
    let first = rows[0];
    let mut counts = Counts::default();
    for m in rows {
        counts.add(m.counts());
    }
    let mut out = ClassMetrics::from_counts(&first.class, &first.name, counts);
    out.undefined.clear();
    for metric in [Metric::Precision, Metric::Recall, Metric::F1] {
        let values: Vec<f64> = rows
            .iter()
            .filter(|m| m.is_defined(metric))
            .map(|m| match metric {
                Metric::Precision => m.precision,
                Metric::Recall => m.recall,
                Metric::F1 => m.f1,
            })
            .collect();
        let mean = if values.is_empty() {
            out.undefined.push(metric);
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        };
        match metric {
            Metric::Precision => out.precision = mean,
            Metric::Recall => out.recall = mean,
            Metric::F1 => out.f1 = mean,
        }
    }
    out
}

pub fn aggregate_mean(reports: &[EvaluationReport]) -> Result<EvaluationReport, MetricsError> {
    let first = check_compatible(reports)?;
    let mut grouped: BTreeMap<String, Vec<&ClassMetrics>> = BTreeMap::new();
    for r in reports {
        for m in r.per_class.values() {
            grouped.entry(m.class.clone()).or_default().push(m);
        }
    }
    let per_class: BTreeMap<String, ClassMetrics> =
        grouped.into_iter().map(|(class, rows)| (class, mean_metrics(&rows))).collect();
    let micro_rows: Vec<&ClassMetrics> = reports.iter().map(|r| &r.micro).collect();
    let macro_f1 = reports.iter().map(|r| r.macro_f1).sum::<f64>() / reports.len() as f64;
    let macro_classes = per_class.values().filter(|m| m.support > 0).count();
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        granularity: first.granularity,
        policy: first.policy,
        aggregation: Aggregation::MeanOfFolds,
        folds: reports.len(),
        per_class,
        micro: mean_metrics(&micro_rows),
        macro_f1,
        macro_classes,
        baseline: None,
    })
}

/// Rounds a percentage half-up to hundredths, returned as an integer count
/// of hundredths. The tiny offset absorbs binary representation error of
/// ratios whose exact value ends in 5 at the third decimal.
pub fn hundredths(value: f64) -> i64 {
    (value * 100.0 + 0.5 + 1e-9).floor() as i64
}

/// Half-up display with two decimals.
pub fn format_percent(value: f64) -> String {
    let h = hundredths(value);
    let sign = if h < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", h.abs() / 100, h.abs() % 100)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{parse_str, ReadOptions};

    fn corpus(text: &str) -> Corpus {
        parse_str(text, &ReadOptions::default(), None).unwrap()
    }

    fn with_tags(gold: &Corpus, tags: &[&str]) -> Corpus {
        let mut c = gold.clone();
        for (token, tag) in c.sentences[0].tokens.iter_mut().zip(tags) {
            token.tag = tag.parse().unwrap();
        }
        c
    }

    const TABLE: &str = "Das O\nBundesarbeitsgericht B-GRT\nist O\ngemäß O\n§ B-GS\n9Abs. I-GS\n2Satz I-GS\n2ArbGG I-GS\niVm. O\n";

    #[test]
    fn perfect_prediction() {
        let gold = corpus(TABLE);
        let r = evaluate(&gold, &gold, ChunkPolicy::Conlleval).unwrap();
        for class in ["GRT", "GS"] {
            let m = &r.per_class[class];
            assert_eq!((m.precision, m.recall, m.f1), (100.0, 100.0, 100.0));
        }
        assert_eq!(r.micro.f1, 100.0);
        assert_eq!(r.macro_f1, 100.0);
        assert_eq!(r.macro_classes, 2);
        assert_eq!(r.per_class.len(), 19);
    }

    #[test]
    fn truncated_law_span() {
        let gold = corpus(TABLE);
        let pred = with_tags(&gold, &["O", "B-GRT", "O", "O", "B-GS", "I-GS", "I-GS", "O", "O"]);
        let r = evaluate(&gold, &pred, ChunkPolicy::Conlleval).unwrap();
        let grt = &r.per_class["GRT"];
        assert_eq!((grt.tp, grt.fp, grt.fn_), (1, 0, 0));
        let gs = &r.per_class["GS"];
        assert_eq!((gs.tp, gs.fp, gs.fn_), (0, 1, 1));
        assert_eq!((gs.precision, gs.recall, gs.f1), (0.0, 0.0, 0.0));
        assert_eq!(gs.undefined, vec![Metric::F1]);
        assert_eq!(format_percent(r.micro.precision), "50.00");
        assert_eq!(format_percent(r.micro.recall), "50.00");
        assert_eq!(format_percent(r.micro.f1), "50.00");
    }

    #[test]
    fn two_sentence_recall() {
        let gold = corpus("a B-PER\n\nb O\nc B-GS\nd I-GS\n");
        let pred = corpus("a B-PER\n\nb O\nc O\nd O\n");
        let r = evaluate(&gold, &pred, ChunkPolicy::Conlleval).unwrap();
        assert_eq!(format_percent(r.micro.precision), "100.00");
        assert_eq!(format_percent(r.micro.recall), "50.00");
        assert_eq!(format_percent(r.micro.f1), "66.67");
    }

    #[test]
    fn shape_and_granularity_errors() {
        let gold = corpus("a O\nb O\n");
        let short = corpus("a O\n");
        assert!(matches!(evaluate(&gold, &short, ChunkPolicy::Conlleval), Err(MetricsError::ShapeMismatch { sentence: 0, .. })));
        let two = corpus("a O\n\nb O\n");
        assert!(matches!(evaluate(&gold, &two, ChunkPolicy::Conlleval), Err(MetricsError::SentenceCountMismatch { .. })));
        let coarse = gold.to_coarse();
        assert!(matches!(evaluate(&gold, &coarse, ChunkPolicy::Conlleval), Err(MetricsError::GranularityMismatch { .. })));
        assert!(evaluate_at(&coarse, &coarse, ChunkPolicy::Conlleval, Granularity::Fine).is_err());
    }

    #[test]
    fn strict_policy_surfaces_malformed_predictions() {
        let gold = corpus("a B-GS\nb O\n");
        let pred = corpus("a O\nb I-GS\n");
        let err = evaluate(&gold, &pred, ChunkPolicy::Strict).unwrap_err();
        assert!(matches!(err, MetricsError::Chunk { sentence: 0, side: "predicted", .. }));
    }

    #[test]
    fn coarse_scoring() {
        let gold = corpus(TABLE);
        let r = evaluate_at(&gold, &gold, ChunkPolicy::Conlleval, Granularity::Coarse).unwrap();
        assert_eq!(r.granularity, Granularity::Coarse);
        assert_eq!(r.per_class.len(), 7);
        assert_eq!(r.per_class["ORG"].support, 1);
        assert_eq!(r.per_class["NRM"].support, 1);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_percent(200.0 / 3.0), "66.67");
        assert_eq!(format_percent(100.0 / 8.0), "12.50");
        assert_eq!(format_percent(100.0 * 1.0 / 800.0), "0.13");
        assert_eq!(format_percent(100.0 * 7.0 / 1600.0), "0.44");
        assert_eq!(format_percent(-0.87), "-0.87");
        assert_eq!(format_percent(0.0), "0.00");
    }

    #[test]
    fn pooled_versus_mean() {
        let gold = corpus("a B-PER\n\nb B-PER\n");
        let good = gold.clone();
        let bad = corpus("a B-PER\n\nb O\n");
        let r1 = evaluate(&gold, &good, ChunkPolicy::Conlleval).unwrap();
        let r2 = evaluate(&gold, &bad, ChunkPolicy::Conlleval).unwrap();
        let pooled = aggregate_pooled(&[r1.clone(), r2.clone()]).unwrap();
        assert_eq!(pooled.per_class["PER"].tp, 3);
        assert_eq!(pooled.per_class["PER"].fn_, 1);
        assert_eq!(format_percent(pooled.per_class["PER"].recall), "75.00");
        let mean = aggregate_mean(&[r1, r2]).unwrap();
        assert_eq!(mean.aggregation, Aggregation::MeanOfFolds);
        assert_eq!(format_percent(mean.per_class["PER"].recall), "75.00");
        assert_eq!(format_percent(mean.per_class["PER"].f1), "83.33");
        assert_eq!(format_percent(mean.per_class["PER"].f1), format_percent((100.0 + 200.0 / 3.0) / 2.0));
        assert!(mean.per_class["GS"].undefined.contains(&Metric::F1));
        assert!(aggregate_pooled(&[]).is_err());
    }

    #[test]
    fn json_field_names() {
        let gold = corpus(TABLE);
        let r = evaluate(&gold, &gold, ChunkPolicy::Conlleval).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["per_class"]["GS"]["fn"], 0);
        assert_eq!(v["micro"]["class"], "ALL");
        assert_eq!(v["policy"], "conlleval");
        assert_eq!(v["aggregation"], "pooled");
        let back: EvaluationReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
