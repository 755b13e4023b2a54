//! Stratified k-fold assignment of sentences.
//!
//! Sentences carry several entity classes at once, so folds are built with
//! greedy iterative stratification:
//!
//! 1. Sentences are visited in a seeded shuffled order.
//! 2. The label with the fewest still-unassigned sentences is taken next, and
//!    each of its unassigned sentences goes to the fold with the largest
//!    remaining need for that label (desired count minus assigned count).
//!    Ties go to the fold with fewer sentences, then to a seeded random draw.
//! 3. Sentences without any label are placed last, into the smallest folds.
//!
//! Fold sizes are capped so that they end up as `n / k` or `n / k + 1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunk::{chunk_repair, ChunkPolicy};
use crate::conll::{write_corpus, Corpus};

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;

/// Relative tolerance for labels with at least `10 * k` occurrences.
pub const RELATIVE_TOLERANCE: f64 = 0.20;
/// Absolute tolerance for rarer labels.
pub const ABSOLUTE_TOLERANCE: f64 = 2.0;

/// What a sentence is stratified on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratifyOn {
    /// Entity classes at the corpus granularity (fine for LER files).
    #[default]
    Fine,
    /// Entity classes mapped to their coarse group.
    Coarse,
    /// The source (court) a sentence was read from.
    Court,
}

impl fmt::Display for StratifyOn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StratifyOn::Fine => "fine",
            StratifyOn::Coarse => "coarse",
            StratifyOn::Court => "court",
        })
    }
}

impl FromStr for StratifyOn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fine" => Ok(StratifyOn::Fine),
            "coarse" => Ok(StratifyOn::Coarse),
            "court" => Ok(StratifyOn::Court),
            other => Err(format!("unknown stratification target `{other}` (expected fine|coarse|court)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldOptions {
    pub k: usize,
    pub seed: u64,
    pub stratify_on: StratifyOn,
    /// Report tolerance violations instead of failing.
    pub allow_skew: bool,
}

impl FoldOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        FoldOptions { k, seed, stratify_on: StratifyOn::Fine, allow_skew: false }
    }

    pub fn strategy(&self) -> String {
        format!("iterative-stratification/{}", self.stratify_on)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldManifest {
    pub version: u32,
    pub tool_version: String,
    pub k: usize,
    pub seed: u64,
    pub strategy: String,
    /// Chunking policy used to derive entity labels.
    pub policy: ChunkPolicy,
    /// `sha256:<hex>` of the canonical serialized corpus.
    pub checksum: String,
    /// Fold id per sentence index.
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelQuality {
    pub label: String,
    pub total: usize,
    pub ideal: f64,
    pub per_fold: Vec<usize>,
    /// Largest deviation from `ideal` over all folds.
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl LabelQuality {
    pub fn within_tolerance(&self) -> bool {
        self.max_deviation <= self.tolerance + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldQuality {
    pub fold_sizes: Vec<usize>,
    pub labels: Vec<LabelQuality>,
}

impl FoldQuality {
    pub fn violations(&self) -> impl Iterator<Item = &LabelQuality> {
        self.labels.iter().filter(|l| !l.within_tolerance())
    }

    pub fn size_spread(&self) -> usize {
        let max = self.fold_sizes.iter().max().copied().unwrap_or(0);
        let min = self.fold_sizes.iter().min().copied().unwrap_or(0);
        max - min
    }
}

#[derive(Debug, Error)]
pub enum FoldError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("cannot build {k} folds from {sentences} sentences")]
    TooFewSentences { sentences: usize, k: usize },
    #[error("stratification outside tolerance for {} label(s): {}", .labels.len(), .labels.join(", "))]
    Skewed { labels: Vec<String>, quality: Box<FoldQuality> },
    #[error("manifest was built for corpus {expected}, this corpus is {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("fold {fold} out of range for k = {k}")]
    FoldOutOfRange { fold: usize, k: usize },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

struct HashWriter(Sha256);

impl io::Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// `sha256:<hex>` over the canonical CoNLL serialization.
pub fn corpus_checksum(corpus: &Corpus) -> String {
    let mut w = io::BufWriter::with_capacity(1 << 16, HashWriter(Sha256::new()));
    write_corpus(corpus, &mut w).expect("hashing cannot fail");
    let hasher = w.into_inner().unwrap_or_else(|_| unreachable!("hash writer never fails")).0;
    format!("sha256:{}", hex::encode(hasher.finalize()))
}

/// Stratification labels per sentence as `(label id, occurrences)` pairs,
/// plus the label names indexed by id.
fn sentence_labels(corpus: &Corpus, on: StratifyOn) -> (Vec<Vec<(usize, usize)>>, Vec<String>) {
    let raw: Vec<BTreeMap<String, usize>> = corpus
        .sentences
        .iter()
        .map(|s| {
            let mut counts = BTreeMap::new();
            match on {
                StratifyOn::Court => {
                    let source = s.source_id.clone().unwrap_or_default();
                    counts.insert(source, 1);
                }
                StratifyOn::Fine | StratifyOn::Coarse => {
                    for span in chunk_repair(&s.tags()).spans {
                        let class = if on == StratifyOn::Coarse { span.class.to_coarse() } else { span.class };
                        *counts.entry(class.code().to_owned()).or_insert(0) += 1;
                    }
                }
            }
            counts
        })
        .collect();
    // ids follow alphabetical order so that they do not depend on corpus order
    let names: BTreeSet<&String> = raw.iter().flat_map(|counts| counts.keys()).collect();
    let ordered: Vec<String> = names.into_iter().cloned().collect();
    let id_of: BTreeMap<&str, usize> = ordered.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let labels = raw
        .iter()
        .map(|counts| counts.iter().map(|(n, c)| (id_of[n.as_str()], *c)).collect())
        .collect();
    (labels, ordered)
}

struct Folds {
    sizes: Vec<usize>,
    base: usize,
    extra: usize,
    at_extra: usize,
}

impl Folds {
    fn new(n: usize, k: usize) -> Self {
        Folds { sizes: vec![0; k], base: n / k, extra: n % k, at_extra: 0 }
    }

    fn eligible(&self, f: usize) -> bool {
        self.sizes[f] < self.base || (self.sizes[f] == self.base && self.at_extra < self.extra)
    }

    fn add(&mut self, f: usize) {
        self.sizes[f] += 1;
        if self.sizes[f] == self.base + 1 {
            self.at_extra += 1;
        }
    }
}

fn pick<R: Rng>(candidates: &[usize], rng: &mut R) -> usize {
    if candidates.len() == 1 {
        candidates[0]
    } else {
        candidates[rng.gen_range(0..candidates.len())]
    }
}

/// Assigns every sentence of `corpus` to one of `opts.k` folds.
pub fn make_folds(corpus: &Corpus, opts: &FoldOptions) -> Result<(FoldManifest, FoldQuality), FoldError> {
    let k = opts.k;
    let n = corpus.len();
    if k < 2 {
        return Err(FoldError::InvalidK(k));
    }
    if n < k {
        return Err(FoldError::TooFewSentences { sentences: n, k });
    }
    let (labels, names) = sentence_labels(corpus, opts.stratify_on);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let label_count = names.len();
    let mut totals = vec![0usize; label_count];
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); label_count];
    for &s in &order {
        for &(l, c) in &labels[s] {
            totals[l] += c;
            by_label[l].push(s);
        }
    }
    let mut remaining: Vec<usize> = by_label.iter().map(Vec::len).collect();
    let mut need: Vec<Vec<f64>> = (0..k).map(|_| totals.iter().map(|&t| t as f64 / k as f64).collect()).collect();

    const UNASSIGNED: usize = usize::MAX;
    let mut assignment = vec![UNASSIGNED; n];
    let mut folds = Folds::new(n, k);

    loop {
        let next = (0..label_count).filter(|&l| remaining[l] > 0).min_by_key(|&l| (remaining[l], l));
        let Some(label) = next else { break };
        for &s in &by_label[label] {
            if assignment[s] != UNASSIGNED {
                continue;
            }
            let eligible: Vec<usize> = (0..k).filter(|&f| folds.eligible(f)).collect();
            let best_need = eligible.iter().map(|&f| need[f][label]).fold(f64::NEG_INFINITY, f64::max);
            let by_need: Vec<usize> = eligible.into_iter().filter(|&f| need[f][label] == best_need).collect();
            let smallest = by_need.iter().map(|&f| folds.sizes[f]).min().expect("some fold is eligible");
            let tied: Vec<usize> = by_need.into_iter().filter(|&f| folds.sizes[f] == smallest).collect();
            let fold = pick(&tied, &mut rng);
            assignment[s] = fold;
            folds.add(fold);
            for &(l, c) in &labels[s] {
                need[fold][l] -= c as f64;
                remaining[l] -= 1;
            }
        }
    }

    for &s in &order {
        if assignment[s] != UNASSIGNED {
            continue;
        }
        let smallest = (0..k).filter(|&f| folds.eligible(f)).map(|f| folds.sizes[f]).min().expect("capacity left");
        let tied: Vec<usize> = (0..k).filter(|&f| folds.eligible(f) && folds.sizes[f] == smallest).collect();
        let fold = pick(&tied, &mut rng);
        assignment[s] = fold;
        folds.add(fold);
    }

    let manifest = FoldManifest {
        version: MANIFEST_VERSION,
        tool_version: crate::VERSION.to_owned(),
        k,
        seed: opts.seed,
        strategy: opts.strategy(),
        policy: ChunkPolicy::Conlleval,
        checksum: corpus_checksum(corpus),
        assignment,
    };
    let quality = quality_of(&labels, &names, &manifest.assignment, k);
    let skewed: Vec<String> = quality.violations().map(|l| l.label.clone()).collect();
    if !skewed.is_empty() && !opts.allow_skew {
        return Err(FoldError::Skewed { labels: skewed, quality: Box::new(quality) });
    }
    Ok((manifest, quality))
}

fn quality_of(labels: &[Vec<(usize, usize)>], names: &[String], assignment: &[usize], k: usize) -> FoldQuality {
    let mut fold_sizes = vec![0; k];
    let mut per_label = vec![vec![0usize; k]; names.len()];
    for (s, &fold) in assignment.iter().enumerate() {
        fold_sizes[fold] += 1;
        for &(l, c) in &labels[s] {
            per_label[l][fold] += c;
        }
    }
    let labels = names
        .iter()
        .zip(per_label)
        .map(|(name, per_fold)| {
            let total: usize = per_fold.iter().sum();
            let ideal = total as f64 / k as f64;
            let tolerance = if total >= 10 * k { RELATIVE_TOLERANCE * ideal } else { ABSOLUTE_TOLERANCE };
            let max_deviation = per_fold.iter().map(|&c| (c as f64 - ideal).abs()).fold(0.0, f64::max);
            LabelQuality { label: name.clone(), total, ideal, per_fold, max_deviation, tolerance }
        })
        .collect();
    FoldQuality { fold_sizes, labels }
}

/// Recomputes stratification quality of an existing manifest.
pub fn fold_quality(corpus: &Corpus, manifest: &FoldManifest, on: StratifyOn) -> Result<FoldQuality, FoldError> {
    manifest.check(corpus)?;
    let (labels, names) = sentence_labels(corpus, on);
    Ok(quality_of(&labels, &names, &manifest.assignment, manifest.k))
}

impl FoldManifest {
    /// Structural checks plus the corpus checksum.
    pub fn check(&self, corpus: &Corpus) -> Result<(), FoldError> {
        self.validate()?;
        if self.assignment.len() != corpus.len() {
            return Err(FoldError::InvalidManifest(format!(
                "{} assignments for {} sentences",
                self.assignment.len(),
                corpus.len()
            )));
        }
        let found = corpus_checksum(corpus);
        if found != self.checksum {
            return Err(FoldError::ChecksumMismatch { expected: self.checksum.clone(), found });
        }
        Ok(())
    }

    /// Checks version, fold ids and that every fold is used.
    pub fn validate(&self) -> Result<(), FoldError> {
        if self.version != MANIFEST_VERSION {
            return Err(FoldError::InvalidManifest(format!("unsupported version {}", self.version)));
        }
        if self.k < 2 {
            return Err(FoldError::InvalidK(self.k));
        }
        let mut used = vec![false; self.k];
        for (i, &f) in self.assignment.iter().enumerate() {
            if f >= self.k {
                return Err(FoldError::InvalidManifest(format!("sentence {i} assigned to fold {f}, k = {}", self.k)));
            }
            used[f] = true;
        }
        if let Some(f) = used.iter().position(|u| !u) {
            return Err(FoldError::InvalidManifest(format!("fold {f} is empty")));
        }
        Ok(())
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// JSON text with one field per line and the assignment on a single line.
    pub fn to_json(&self) -> String {
        format!(
            "{{\n  \"version\": {},\n  \"tool_version\": {},\n  \"k\": {},\n  \"seed\": {},\n  \"strategy\": {},\n  \"policy\": {},\n  \"checksum\": {},\n  \"assignment\": {}\n}}\n",
            self.version,
            json_value(&self.tool_version),
            self.k,
            self.seed,
            json_value(&self.strategy),
            json_value(&self.policy),
            json_value(&self.checksum),
            json_value(&self.assignment),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, FoldError> {
        let manifest: FoldManifest = serde_json::from_str(text)?;
        manifest.validate()?;
        Ok(manifest)
    }
}

fn json_value<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("manifest fields serialize")
}

/// Splits `corpus` into (train, validation) for `fold`. Sentence order is
/// preserved in both parts and indices are renumbered densely.
pub fn split(corpus: &Corpus, manifest: &FoldManifest, fold: usize) -> Result<(Corpus, Corpus), FoldError> {
    if fold >= manifest.k {
        return Err(FoldError::FoldOutOfRange { fold, k: manifest.k });
    }
    manifest.check(corpus)?;
    let mut train = Corpus::new(corpus.granularity);
    let mut validation = Corpus::new(corpus.granularity);
    for (s, &f) in corpus.sentences.iter().zip(&manifest.assignment) {
        let target = if f == fold { &mut validation } else { &mut train };
        target.push(s.tokens.clone(), s.source_id.clone());
    }
    Ok((train, validation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{parse_str, ReadOptions};

    fn corpus(text: &str) -> Corpus {
        parse_str(text, &ReadOptions::default(), Some("bag")).unwrap()
    }

    fn mixed(n: usize) -> Corpus {
        let tags = ["B-GS I-GS", "B-PER O", "O O", "B-RS O", "B-GS B-RS", "O B-GRT"];
        let mut text = String::new();
        for i in 0..n {
            for (j, tag) in tags[i % tags.len()].split(' ').enumerate() {
                text.push_str(&format!("w{i}_{j} {tag}\n"));
            }
            text.push('\n');
        }
        corpus(&text)
    }

    #[test]
    fn two_sentences_two_folds() {
        let c = corpus("a B-PER\n\nb B-PER\n");
        let (m, _) = make_folds(&c, &FoldOptions::new(2, DEFAULT_SEED)).unwrap();
        let mut a = m.assignment.clone();
        a.sort();
        assert_eq!(a, vec![0, 1]);
    }

    #[test]
    fn deterministic() {
        let c = mixed(200);
        let opts = FoldOptions::new(10, 7);
        let (a, _) = make_folds(&c, &opts).unwrap();
        let (b, _) = make_folds(&c, &opts).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let (other, _) = make_folds(&c, &FoldOptions::new(10, 8)).unwrap();
        assert_ne!(a.assignment, other.assignment);
    }

    #[test]
    fn sizes_are_balanced() {
        let c = mixed(103);
        let (m, q) = make_folds(&c, &FoldOptions::new(10, DEFAULT_SEED)).unwrap();
        let mut sizes = m.fold_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
        assert_eq!(q.size_spread(), 1);
    }

    #[test]
    fn argument_errors() {
        let c = mixed(5);
        assert!(matches!(make_folds(&c, &FoldOptions::new(1, 0)), Err(FoldError::InvalidK(1))));
        assert!(matches!(make_folds(&c, &FoldOptions::new(6, 0)), Err(FoldError::TooFewSentences { sentences: 5, k: 6 })));
    }

    #[test]
    fn split_partitions_corpus() {
        let c = mixed(60);
        let (m, _) = make_folds(&c, &FoldOptions::new(10, DEFAULT_SEED)).unwrap();
        let mut seen = 0;
        for fold in 0..10 {
            let (train, val) = split(&c, &m, fold).unwrap();
            assert_eq!(train.len() + val.len(), c.len());
            assert_eq!(val.sentences.iter().map(|s| s.index).collect::<Vec<_>>(), (0..val.len()).collect::<Vec<_>>());
            seen += val.len();
        }
        assert_eq!(seen, c.len());
        assert!(matches!(split(&c, &m, 10), Err(FoldError::FoldOutOfRange { fold: 10, k: 10 })));
    }

    #[test]
    fn checksum_guards_split() {
        let c = mixed(20);
        let (m, _) = make_folds(&c, &FoldOptions::new(2, DEFAULT_SEED)).unwrap();
        let mut other = c.clone();
        other.sentences[0].tokens[0].text.push('x');
        assert!(matches!(split(&other, &m, 0), Err(FoldError::ChecksumMismatch { .. })));
    }

    #[test]
    fn manifest_json_round_trip() {
        let c = mixed(30);
        let (m, _) = make_folds(&c, &FoldOptions::new(3, DEFAULT_SEED)).unwrap();
        let text = m.to_json();
        assert!(text.starts_with("{\n  \"version\": 1,\n"));
        assert!(text.contains("\"strategy\": \"iterative-stratification/fine\""));
        assert!(text.contains("\"checksum\": \"sha256:"));
        assert_eq!(FoldManifest::from_json(&text).unwrap(), m);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["assignment"].as_array().unwrap().len(), 30);
    }

    #[test]
    fn manifest_validation() {
        let bad = r#"{"version":1,"tool_version":"x","k":2,"seed":1,"strategy":"s","policy":"conlleval","checksum":"c","assignment":[0,0]}"#;
        assert!(matches!(FoldManifest::from_json(bad), Err(FoldError::InvalidManifest(_))));
        let bad = r#"{"version":1,"tool_version":"x","k":2,"seed":1,"strategy":"s","policy":"conlleval","checksum":"c","assignment":[0,2]}"#;
        assert!(FoldManifest::from_json(bad).is_err());
    }

    #[test]
    fn checksum_matches_plain_sha256() {
        let c = corpus("a O\n");
        let expected = format!("sha256:{}", hex::encode(Sha256::digest(b"a O\n\n")));
        assert_eq!(corpus_checksum(&c), expected);
    }

    #[test]
    fn court_stratification_balances_sources() {
        let mut c = Corpus::new(crate::schema::Granularity::Fine);
        for i in 0..100 {
            let source = if i % 4 == 0 { "bgh" } else { "bag" };
            c.push(vec![crate::conll::Token::new("x", crate::schema::LabelTag::Outside)], Some(source.into()));
        }
        let opts = FoldOptions { stratify_on: StratifyOn::Court, ..FoldOptions::new(5, 1) };
        let (m, q) = make_folds(&c, &opts).unwrap();
        assert_eq!(m.strategy, "iterative-stratification/court");
        for label in &q.labels {
            assert!(label.per_fold.iter().all(|&n| n as f64 == label.ideal), "{label:?}");
        }
    }

    #[test]
    fn skew_is_reported_or_fatal() {
        // one sentence holds all five entities of the class; no split can balance it
        let mut text = String::from("a B-PER\nb B-PER\nc B-PER\nd B-PER\ne B-PER\n\n");
        for i in 0..9 {
            text.push_str(&format!("x{i} O\n\n"));
        }
        let c = corpus(&text);
        let err = make_folds(&c, &FoldOptions::new(10, 1)).unwrap_err();
        assert!(matches!(err, FoldError::Skewed { ref labels, .. } if labels == &["PER".to_string()]));
        let opts = FoldOptions { allow_skew: true, ..FoldOptions::new(10, 1) };
        let (_, q) = make_folds(&c, &opts).unwrap();
        assert_eq!(q.violations().count(), 1);
    }
}
