use std::collections::BTreeMap;

use serde::Serialize;

use super::Corpus;
use crate::chunk::{chunk_repair, EntitySpan};
use crate::schema::EntityClass;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SourceStats {
    /// `None` when no provenance metadata gives a document count.
    pub documents: Option<usize>,
    pub tokens: usize,
    pub sentences: usize,
    pub entities: usize,
}

impl SourceStats {
    fn add(&mut self, other: &SourceStats) {
        self.documents = match (self.documents, other.documents) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        self.tokens += other.tokens;
        self.sentences += other.sentences;
        self.entities += other.entities;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub per_source: BTreeMap<String, SourceStats>,
    pub totals: SourceStats,
    pub per_class_entity_counts: BTreeMap<String, usize>,
    /// Coarse group of each counted class, for share computations.
    #[serde(skip)]
    pub class_groups: BTreeMap<String, Option<crate::schema::CoarseClass>>,
}

pub const UNKNOWN_SOURCE: &str = "(unknown)";

/// Counts tokens, sentences and conlleval-chunked entities per source.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for sentence in &corpus.sentences {
        let source = sentence.source_id.as_deref().unwrap_or(UNKNOWN_SOURCE);
        let spans: Vec<EntitySpan> = chunk_repair(&sentence.tags()).spans;
        let entry = stats.per_source.entry(source.to_owned()).or_default();
        entry.tokens += sentence.len();
        entry.sentences += 1;
        entry.entities += spans.len();
        for span in spans {
            record_class(&mut stats, &span.class);
        }
    }
    stats.recompute_totals();
    stats
}

fn record_class(stats: &mut CorpusStats, class: &EntityClass) {
    *stats.per_class_entity_counts.entry(class.code().to_owned()).or_default() += 1;
    stats.class_groups.entry(class.code().to_owned()).or_insert_with(|| class.coarse_group());
}

impl CorpusStats {
    fn recompute_totals(&mut self) {
        let mut totals = SourceStats { documents: Some(0), ..Default::default() };
        for s in self.per_source.values() {
            totals.add(s);
        }
        if self.per_source.is_empty() {
            totals.documents = None;
        }
        self.totals = totals;
    }

    /// Attaches per-source document counts taken from provenance metadata.
    /// Sources missing from `documents` stay `None`.
    pub fn with_documents(mut self, documents: &BTreeMap<String, usize>) -> Self {
        for (source, s) in self.per_source.iter_mut() {
            s.documents = documents
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(source))
                .map(|(_, v)| *v);
        }
        self.recompute_totals();
        self
    }

    /// Combines the stats of two corpora (sources with the same id are summed).
    pub fn merge(&self, other: &CorpusStats) -> CorpusStats {
        let mut out = self.clone();
        for (source, s) in &other.per_source {
            match out.per_source.get_mut(source) {
                Some(existing) => existing.add(s),
                None => {
                    out.per_source.insert(source.clone(), s.clone());
                }
            }
        }
        for (class, n) in &other.per_class_entity_counts {
            *out.per_class_entity_counts.entry(class.clone()).or_default() += n;
        }
        for (class, g) in &other.class_groups {
            out.class_groups.entry(class.clone()).or_insert(*g);
        }
        out.recompute_totals();
        out
    }
}

/// Entities in the legal groups (norms, regulations, decisions, literature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegalShare {
    pub legal_entities: usize,
    pub total_entities: usize,
    /// Percentage in [0, 100]; 0 for an entity-free corpus.
    pub percent: f64,
}

pub fn legal_share(stats: &CorpusStats) -> LegalShare {
    let mut legal = 0;
    let mut total = 0;
    for (class, n) in &stats.per_class_entity_counts {
        total += n;
        if stats.class_groups.get(class).copied().flatten().is_some_and(|g| g.is_legal()) {
            legal += n;
        }
    }
    let percent = if total == 0 { 0.0 } else { 100.0 * legal as f64 / total as f64 };
    LegalShare { legal_entities: legal, total_entities: total, percent }
}

/// One court row of the published dataset statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PublishedRow {
    pub court: &'static str,
    pub documents: usize,
    pub tokens: usize,
    pub sentences: usize,
}

pub const PUBLISHED_COURTS: [PublishedRow; 7] = [
    PublishedRow { court: "BAG", documents: 107, tokens: 343_065, sentences: 12_791 },
    PublishedRow { court: "BFH", documents: 107, tokens: 276_233, sentences: 8_522 },
    PublishedRow { court: "BGH", documents: 108, tokens: 177_835, sentences: 5_858 },
    PublishedRow { court: "BPatG", documents: 107, tokens: 404_041, sentences: 12_016 },
    PublishedRow { court: "BSG", documents: 107, tokens: 302_161, sentences: 8_083 },
    PublishedRow { court: "BVerfG", documents: 107, tokens: 305_889, sentences: 9_237 },
    PublishedRow { court: "BVerwG", documents: 107, tokens: 347_824, sentences: 10_216 },
];

pub const PUBLISHED_TOTAL: PublishedRow =
    PublishedRow { court: "Total", documents: 750, tokens: 2_157_048, sentences: 66_723 };

/// Measured values next to the published ones for one row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CourtDiff {
    pub court: String,
    pub published: PublishedRow,
    /// `None` when no input source matched the court.
    pub measured: Option<SourceStats>,
}

impl CourtDiff {
    pub fn matches(&self) -> bool {
        self.measured
            .as_ref()
            .is_some_and(|m| m.tokens == self.published.tokens && m.sentences == self.published.sentences)
    }
}

/// Per-court rows followed by the totals row. Sources are matched to courts
/// by case-insensitive id (`bag`, `BAG`, ...).
pub fn compare_published(stats: &CorpusStats) -> Vec<CourtDiff> {
    let mut rows: Vec<CourtDiff> = PUBLISHED_COURTS
        .iter()
        .map(|row| CourtDiff {
            court: row.court.to_owned(),
            published: *row,
            measured: stats
                .per_source
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(row.court))
                .map(|(_, v)| v.clone()),
        })
        .collect();
    rows.push(CourtDiff {
        court: PUBLISHED_TOTAL.court.to_owned(),
        published: PUBLISHED_TOTAL,
        measured: (!stats.per_source.is_empty()).then(|| stats.totals.clone()),
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{parse_str, ReadOptions};

    fn corpus(text: &str, source: &str) -> Corpus {
        parse_str(text, &ReadOptions::default(), Some(source)).unwrap()
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let s = corpus_stats(&Corpus::new(crate::schema::Granularity::Fine));
        assert_eq!(s.totals.tokens, 0);
        assert_eq!(s.totals.sentences, 0);
        assert!(s.per_class_entity_counts.is_empty());
        assert_eq!(legal_share(&s).percent, 0.0);
    }

    #[test]
    fn counts_and_share() {
        let c = corpus(super::super::tests::TABLE_EXAMPLE, "bag");
        let s = corpus_stats(&c);
        assert_eq!(s.totals.tokens, 9);
        assert_eq!(s.totals.sentences, 1);
        assert_eq!(s.per_class_entity_counts["GRT"], 1);
        assert_eq!(s.per_class_entity_counts["GS"], 1);
        let share = legal_share(&s);
        assert_eq!((share.legal_entities, share.total_entities), (1, 2));
        assert!((share.percent - 50.0).abs() < 1e-12);
    }

    #[test]
    fn totals_are_additive() {
        let a = corpus("a B-PER\nb O\n\nc B-RS\n", "bag");
        let b = corpus("d B-GS\ne I-GS\n", "bfh");
        let mut ab = a.clone();
        ab.append(b.clone()).unwrap();
        let merged = corpus_stats(&a).merge(&corpus_stats(&b));
        let direct = corpus_stats(&ab);
        assert_eq!(merged.totals, direct.totals);
        assert_eq!(merged.per_class_entity_counts, direct.per_class_entity_counts);
    }

    #[test]
    fn documents_from_provenance() {
        let s = corpus_stats(&corpus("a O\n", "bag"));
        assert_eq!(s.totals.documents, None);
        let docs = BTreeMap::from([("BAG".to_string(), 107)]);
        let s = s.with_documents(&docs);
        assert_eq!(s.per_source["bag"].documents, Some(107));
        assert_eq!(s.totals.documents, Some(107));
    }

    #[test]
    fn published_table_sums() {
        let tokens: usize = PUBLISHED_COURTS.iter().map(|r| r.tokens).sum();
        let sentences: usize = PUBLISHED_COURTS.iter().map(|r| r.sentences).sum();
        let docs: usize = PUBLISHED_COURTS.iter().map(|r| r.documents).sum();
        assert_eq!((tokens, sentences, docs), (PUBLISHED_TOTAL.tokens, PUBLISHED_TOTAL.sentences, PUBLISHED_TOTAL.documents));
    }

    #[test]
    fn diff_matches_courts_by_id() {
        let s = corpus_stats(&corpus("a O\n", "bgh"));
        let rows = compare_published(&s);
        assert_eq!(rows.len(), 8);
        let bgh = rows.iter().find(|r| r.court == "BGH").unwrap();
        assert_eq!(bgh.measured.as_ref().unwrap().tokens, 1);
        assert!(!bgh.matches());
        assert!(rows.iter().find(|r| r.court == "BAG").unwrap().measured.is_none());
    }
}
