//! Reference implementations and generators shared by the property tests
//! and the acceptance suite. Nothing here calls into the chunker or scorer
//! under test; tags are handled as plain strings.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

/// Splits a tag the way conlleval does: `B-GS` -> ("B", "GS"), `O` -> ("O", "").
fn split_tag(tag: &str) -> (&str, &str) {
    match tag.split_once('-') {
        Some((prefix, kind)) => (prefix, kind),
        None => (tag, ""),
    }
}

/// Port of conlleval's `endOfChunk`.
fn end_of_chunk(prev_tag: &str, tag: &str, prev_type: &str, kind: &str) -> bool {
    let mut end = matches!(
        (prev_tag, tag),
        ("B", "B") | ("B", "O") | ("I", "B") | ("I", "O") | ("E", "E") | ("E", "I") | ("E", "O")
    );
    if matches!((prev_tag, tag), ("E", "E") | ("E", "I") | ("E", "O") | ("S", "E") | ("S", "I") | ("S", "O") | ("S", "S") | ("E", "S")) {
        end = true;
    }
    if matches!((prev_tag, tag), ("B", "S") | ("I", "S")) {
        end = true;
    }
    if prev_tag != "O" && prev_tag != "." && prev_type != kind {
        end = true;
    }
    if prev_tag == "]" {
        end = true;
    }
    if prev_tag == "[" {
        end = false;
    }
    end
}

/// Port of conlleval's `startOfChunk`.
fn start_of_chunk(prev_tag: &str, tag: &str, prev_type: &str, kind: &str) -> bool {
    let mut start = matches!((prev_tag, tag), ("B", "B") | ("I", "B") | ("O", "B") | ("O", "I"));
    if matches!((prev_tag, tag), ("E", "E") | ("E", "I") | ("O", "E") | ("O", "I") | ("E", "S")) {
        start = true;
    }
    if matches!((prev_tag, tag), ("S", "E") | ("S", "I") | ("O", "S") | ("S", "S") | ("B", "S") | ("I", "S")) {
        start = true;
    }
    if tag != "O" && tag != "." && prev_type != kind {
        start = true;
    }
    if tag == "[" {
        start = true;
    }
    if tag == "]" {
        start = false;
    }
    start
}

/// Chunks of one sentence as `(type, first, last)` following conlleval.
pub fn conlleval_chunks<S: AsRef<str>>(tags: &[S]) -> Vec<(String, usize, usize)> {
    let mut chunks = Vec::new();
    let mut prev = ("O", "");
    let mut open: Option<(String, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let cur = split_tag(tag.as_ref());
        if end_of_chunk(prev.0, cur.0, prev.1, cur.1) {
            if let Some((kind, start)) = open.take() {
                chunks.push((kind, start, i - 1));
            }
        }
        if start_of_chunk(prev.0, cur.0, prev.1, cur.1) {
            open = Some((cur.1.to_owned(), i));
        }
        prev = cur;
    }
    if let Some((kind, start)) = open {
        chunks.push((kind, start, tags.len() - 1));
    }
    chunks
}

/// Per-class (tp, fp, fn) by enumerating every candidate span `(class, i, j)`
/// of every sentence and checking membership in the gold and predicted chunk
/// sets.
pub fn brute_force_counts(gold: &[Vec<String>], pred: &[Vec<String>]) -> BTreeMap<String, (usize, usize, usize)> {
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let gold_set: BTreeSet<(String, usize, usize)> = conlleval_chunks(g).into_iter().collect();
        let pred_set: BTreeSet<(String, usize, usize)> = conlleval_chunks(p).into_iter().collect();
        let classes: BTreeSet<&String> = gold_set.iter().chain(&pred_set).map(|(c, _, _)| c).collect();
        for class in classes {
            for i in 0..g.len() {
                for j in i..g.len() {
                    let candidate = (class.clone(), i, j);
                    let in_gold = gold_set.contains(&candidate);
                    let in_pred = pred_set.contains(&candidate);
                    let entry = counts.entry(class.clone()).or_default();
                    match (in_gold, in_pred) {
                        (true, true) => entry.0 += 1,
                        (false, true) => entry.1 += 1,
                        (true, false) => entry.2 += 1,
                        (false, false) => {}
                    }
                }
            }
        }
    }
    counts
}

pub const CLASSES: [&str; 5] = ["GS", "PER", "RS", "GRT", "VO"];

/// Uniformly random tags, so most sequences contain malformed `I-` runs.
pub fn random_tags<R: Rng>(rng: &mut R, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| match rng.gen_range(0..5) {
            0 | 1 => "O".to_owned(),
            2 => format!("B-{}", CLASSES[rng.gen_range(0..CLASSES.len())]),
            _ => format!("I-{}", CLASSES[rng.gen_range(0..CLASSES.len())]),
        })
        .collect()
}

/// Random prediction correlated with `gold`: each position keeps the gold
/// tag with probability 0.6.
pub fn perturb<R: Rng>(rng: &mut R, gold: &[String]) -> Vec<String> {
    let fresh = random_tags(rng, gold.len());
    gold.iter().zip(fresh).map(|(g, f)| if rng.gen_bool(0.6) { g.clone() } else { f }).collect()
}

/// CoNLL text for sentences of tags, with token text `w<i>`.
pub fn conll_text(sentences: &[Vec<String>]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (i, tag) in s.iter().enumerate() {
            out.push_str(&format!("w{i} {tag}\n"));
        }
        out.push('\n');
    }
    out
}

/// Approximate fine-class entity frequencies of the LER corpus, used only
/// to give synthetic corpora a realistic, heavily skewed class profile.
pub const SYNTHETIC_CLASS_WEIGHTS: [(&str, usize); 19] = [
    ("PER", 1_747),
    ("RR", 1_519),
    ("AN", 111),
    ("LD", 1_429),
    ("ST", 705),
    ("STR", 136),
    ("LDS", 198),
    ("ORG", 1_166),
    ("UN", 1_058),
    ("INN", 2_196),
    ("GRT", 4_063),
    ("MRK", 283),
    ("GS", 18_520),
    ("VO", 797),
    ("EUN", 1_499),
    ("VS", 607),
    ("VT", 2_863),
    ("RS", 12_580),
    ("LIT", 3_006),
];

/// Synthetic corpus text with `sentences` sentences whose entity counts
/// follow [`SYNTHETIC_CLASS_WEIGHTS`]. Each class's entities are scattered
/// over random sentences; about a third of sentences carry at least one.
pub fn synthetic_ler_corpus<R: Rng>(rng: &mut R, sentences: usize) -> Vec<Vec<String>> {
    let mut per_sentence: Vec<Vec<&str>> = vec![Vec::new(); sentences];
    for (class, count) in SYNTHETIC_CLASS_WEIGHTS {
        for _ in 0..count {
            // legal references cluster: reuse a sentence that already has one
            let s = rng.gen_range(0..sentences / 3);
            per_sentence[s].push(class);
        }
    }
    per_sentence
        .into_iter()
        .map(|entities| {
            let filler = rng.gen_range(8..40);
            let mut tags: Vec<String> = vec!["O".to_owned(); filler];
            for class in entities {
                // never split an existing chunk: insert before an O/B- tag or at the end
                let slots: Vec<usize> = (0..=tags.len()).filter(|&i| i == tags.len() || !tags[i].starts_with("I-")).collect();
                let at = slots[rng.gen_range(0..slots.len())];
                let len = rng.gen_range(1..4);
                let mut span = vec![format!("B-{class}")];
                span.extend((1..len).map(|_| format!("I-{class}")));
                span.push("O".to_owned());
                tags.splice(at..at, span);
            }
            tags
        })
        .collect()
}
