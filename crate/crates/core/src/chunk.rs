//! Conversion between IOB tag sequences and entity spans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{EntityClass, LabelTag};

/// A contiguous entity mention; `start` and `end` are inclusive token indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub class: EntityClass,
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn new(class: EntityClass, start: usize, end: usize) -> Self {
        EntitySpan { class, start, end }
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.class, self.start, self.end)
    }
}

/// Treatment of `I-` tags that do not continue a chunk of the same class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkPolicy {
    /// Reject the sequence.
    Strict,
    /// Start a new chunk, as the CoNLL shared-task scorer does.
    #[default]
    Conlleval,
    /// Like `Conlleval`, and report which positions were reinterpreted.
    Repair,
}

impl fmt::Display for ChunkPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChunkPolicy::Strict => "strict",
            ChunkPolicy::Conlleval => "conlleval",
            ChunkPolicy::Repair => "repair",
        })
    }
}

impl FromStr for ChunkPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ChunkPolicy::Strict),
            "conlleval" => Ok(ChunkPolicy::Conlleval),
            "repair" => Ok(ChunkPolicy::Repair),
            other => Err(format!("unknown chunk policy `{other}` (expected strict|conlleval|repair)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("malformed IOB sequence at index {index}: `{tag}` does not continue a chunk of its class")]
    MalformedSequence { index: usize, tag: String },
    #[error("spans {first} and {second} overlap")]
    OverlappingSpans { first: String, second: String },
    #[error("span {span} does not fit a sequence of length {length}")]
    SpanOutOfRange { span: String, length: usize },
}

/// Spans plus the positions whose `I-` tag had to be read as `B-`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Repaired {
    pub spans: Vec<EntitySpan>,
    pub rewritten: Vec<usize>,
}

impl Repaired {
    /// The input with every rewritten `I-X` replaced by `B-X`.
    pub fn repaired_tags(&self, tags: &[LabelTag]) -> Vec<LabelTag> {
        let mut out = tags.to_vec();
        for &i in &self.rewritten {
            if let LabelTag::Inside(c) = &tags[i] {
                out[i] = LabelTag::Begin(c.clone());
            }
        }
        out
    }
}

fn scan(tags: &[LabelTag], strict: bool) -> Result<Repaired, ChunkError> {
    let mut out = Repaired::default();
    let mut open: Option<(EntityClass, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            LabelTag::Outside => {
                if let Some((class, start)) = open.take() {
                    out.spans.push(EntitySpan::new(class, start, i - 1));
                }
            }
            LabelTag::Begin(class) => {
                if let Some((prev, start)) = open.take() {
                    out.spans.push(EntitySpan::new(prev, start, i - 1));
                }
                open = Some((class.clone(), i));
            }
            LabelTag::Inside(class) => match &open {
                Some((current, _)) if current == class => {}
                _ => {
                    if strict {
                        return Err(ChunkError::MalformedSequence { index: i, tag: tag.to_string() });
                    }
                    if let Some((prev, start)) = open.take() {
                        out.spans.push(EntitySpan::new(prev, start, i - 1));
                    }
                    out.rewritten.push(i);
                    open = Some((class.clone(), i));
                }
            },
        }
    }
    if let Some((class, start)) = open {
        out.spans.push(EntitySpan::new(class, start, tags.len() - 1));
    }
    Ok(out)
}

/// Extracts entity spans from one sentence's tags.
pub fn chunk(tags: &[LabelTag], policy: ChunkPolicy) -> Result<Vec<EntitySpan>, ChunkError> {
    scan(tags, policy == ChunkPolicy::Strict).map(|r| r.spans)
}

/// Conlleval chunking that also lists the reinterpreted positions.
pub fn chunk_repair(tags: &[LabelTag]) -> Repaired {
    scan(tags, false).expect("lenient scan never fails")
}

/// Renders spans back to tags: `B-` on the first token, `I-` on the rest.
pub fn unchunk(spans: &[EntitySpan], length: usize) -> Result<Vec<LabelTag>, ChunkError> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    let mut tags = vec![LabelTag::Outside; length];
    let mut prev: Option<&EntitySpan> = None;
    for span in sorted {
        if span.start > span.end || span.end >= length {
            return Err(ChunkError::SpanOutOfRange { span: span.to_string(), length });
        }
        if let Some(p) = prev {
            if span.start <= p.end {
                return Err(ChunkError::OverlappingSpans { first: p.to_string(), second: span.to_string() });
            }
        }
        tags[span.start] = LabelTag::Begin(span.class.clone());
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = LabelTag::Inside(span.class.clone());
        }
        prev = Some(span);
    }
    Ok(tags)
}
