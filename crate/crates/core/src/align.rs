//! Projection of word-level tags onto subword pieces and back.
//!
//! The module never sees a tokenizer: a [`Segmentation`] only records how
//! many pieces each word was split into. Special tokens added by a model
//! (`[CLS]`, `[SEP]`, ...) are outside the segmentation.

use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::schema::LabelTag;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("expected {expected} labels, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("word {word} starts with an ignored piece (position {position})")]
    IgnoreAtWordStart { word: usize, position: usize },
    #[error("word {0} has zero pieces")]
    EmptyWord(usize),
    #[error("segmentation line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Number of subword pieces per word of one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pieces_per_word: Vec<usize>,
}

impl Segmentation {
    pub fn new(pieces_per_word: Vec<usize>) -> Result<Self, AlignError> {
        if let Some(word) = pieces_per_word.iter().position(|&n| n == 0) {
            return Err(AlignError::EmptyWord(word));
        }
        Ok(Segmentation { pieces_per_word })
    }

    /// One piece per word.
    pub fn identity(words: usize) -> Self {
        Segmentation { pieces_per_word: vec![1; words] }
    }

    pub fn pieces_per_word(&self) -> &[usize] {
        &self.pieces_per_word
    }

    pub fn word_count(&self) -> usize {
        self.pieces_per_word.len()
    }

    pub fn piece_count(&self) -> usize {
        self.pieces_per_word.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubwordLabel {
    Tag(LabelTag),
    /// Excluded from the training loss.
    Ignore,
}

impl fmt::Display for SubwordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubwordLabel::Tag(t) => t.fmt(f),
            SubwordLabel::Ignore => f.write_str("IGNORE"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Scheme {
    /// Word tag on the first piece, `Ignore` on continuations.
    #[default]
    FirstPiece,
    /// Continuation pieces of an entity word become `I-` of its class.
    Propagate,
}

pub fn project_down(tags: &[LabelTag], seg: &Segmentation, scheme: Scheme) -> Result<Vec<SubwordLabel>, AlignError> {
    if tags.len() != seg.word_count() {
        return Err(AlignError::LengthMismatch { expected: seg.word_count(), found: tags.len() });
    }
    let mut out = Vec::with_capacity(seg.piece_count());
    for (tag, &pieces) in tags.iter().zip(seg.pieces_per_word()) {
        out.push(SubwordLabel::Tag(tag.clone()));
        let rest = match (scheme, tag) {
            (Scheme::FirstPiece, _) => SubwordLabel::Ignore,
            (Scheme::Propagate, LabelTag::Outside) => SubwordLabel::Tag(LabelTag::Outside),
            (Scheme::Propagate, LabelTag::Begin(c) | LabelTag::Inside(c)) => SubwordLabel::Tag(LabelTag::Inside(c.clone())),
        };
        out.extend(std::iter::repeat_n(rest, pieces - 1));
    }
    Ok(out)
}

/// Word tags read off the first piece of every word.
pub fn project_up(labels: &[SubwordLabel], seg: &Segmentation) -> Result<Vec<LabelTag>, AlignError> {
    if labels.len() != seg.piece_count() {
        return Err(AlignError::LengthMismatch { expected: seg.piece_count(), found: labels.len() });
    }
    let mut out = Vec::with_capacity(seg.word_count());
    let mut position = 0;
    for (word, &pieces) in seg.pieces_per_word().iter().enumerate() {
        match &labels[position] {
            SubwordLabel::Tag(t) => out.push(t.clone()),
            SubwordLabel::Ignore => return Err(AlignError::IgnoreAtWordStart { word, position }),
        }
        position += pieces;
    }
    Ok(out)
}

/// Reads a segmentation exchange file: one JSON array of piece counts per
/// line, one line per sentence. Blank lines are skipped.
pub fn read_segmentations<R: BufRead>(input: R) -> Result<Vec<Segmentation>, AlignError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| AlignError::Format { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let counts: Vec<usize> = serde_json::from_str(&line)
            .map_err(|e| AlignError::Format { line: line_no, message: e.to_string() })?;
        let seg = Segmentation::new(counts).map_err(|e| AlignError::Format { line: line_no, message: e.to_string() })?;
        out.push(seg);
    }
    Ok(out)
}

pub fn write_segmentations(segs: &[Segmentation]) -> String {
    let mut out = String::new();
    for seg in segs {
        out.push_str(&serde_json::to_string(seg.pieces_per_word()).expect("counts serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(text: &str) -> Vec<LabelTag> {
        text.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    fn labels(text: &str) -> Vec<SubwordLabel> {
        text.split_whitespace()
            .map(|t| if t == "IGNORE" { SubwordLabel::Ignore } else { SubwordLabel::Tag(t.parse().unwrap()) })
            .collect()
    }

    fn seg(counts: &[usize]) -> Segmentation {
        Segmentation::new(counts.to_vec()).unwrap()
    }

    #[test]
    fn first_piece_scheme() {
        let out = project_down(&tags("B-GS I-GS"), &seg(&[1, 3]), Scheme::FirstPiece).unwrap();
        assert_eq!(out, labels("B-GS I-GS IGNORE IGNORE"));
    }

    #[test]
    fn propagate_scheme() {
        assert_eq!(project_down(&tags("O"), &seg(&[2]), Scheme::Propagate).unwrap(), labels("O O"));
        assert_eq!(
            project_down(&tags("B-GS I-GS"), &seg(&[2, 1]), Scheme::Propagate).unwrap(),
            labels("B-GS I-GS I-GS")
        );
    }

    #[test]
    fn project_up_examples() {
        assert_eq!(project_up(&labels("B-GS I-GS I-GS"), &seg(&[2, 1])).unwrap(), tags("B-GS I-GS"));
        assert_eq!(
            project_up(&labels("IGNORE O"), &seg(&[1, 1])).unwrap_err(),
            AlignError::IgnoreAtWordStart { word: 0, position: 0 }
        );
    }

    #[test]
    fn length_errors() {
        assert!(matches!(
            project_down(&tags("O O"), &seg(&[1]), Scheme::FirstPiece),
            Err(AlignError::LengthMismatch { expected: 1, found: 2 })
        ));
        assert!(matches!(project_up(&labels("O"), &seg(&[2])), Err(AlignError::LengthMismatch { .. })));
        assert_eq!(Segmentation::new(vec![1, 0]).unwrap_err(), AlignError::EmptyWord(1));
    }

    #[test]
    fn segmentation_file() {
        let text = "[1,3]\n\n[2]\n";
        let segs = read_segmentations(text.as_bytes()).unwrap();
        assert_eq!(segs, vec![seg(&[1, 3]), seg(&[2])]);
        assert_eq!(write_segmentations(&segs), "[1,3]\n[2]\n");
        assert!(matches!(read_segmentations("[1,0]\n".as_bytes()), Err(AlignError::Format { line: 1, .. })));
        assert!(matches!(read_segmentations("[1]\nnope\n".as_bytes()), Err(AlignError::Format { line: 2, .. })));
    }
}
