//! Reading and writing token-per-line CoNLL-2002 files.
//!
//! Each non-blank line is `<token> <tag>`; a blank line closes the current
//! sentence. Runs of blank lines collapse into one boundary and leading or
//! trailing blank lines are ignored, so the canonical written form (every
//! sentence followed by exactly one blank line) parses back unchanged.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::schema::{parse_tag, Granularity, LabelTag, ParseMode, TagError};

mod stats;

pub use stats::{
    compare_published, corpus_stats, legal_share, CorpusStats, CourtDiff, LegalShare, PublishedRow,
    SourceStats, PUBLISHED_COURTS, PUBLISHED_TOTAL,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub tag: LabelTag,
}

impl Token {
    pub fn new(text: impl Into<String>, tag: LabelTag) -> Self {
        Token { text: text.into(), tag }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// File or court the sentence was read from.
    pub source_id: Option<String>,
    /// Position within the owning corpus.
    pub index: usize,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tags(&self) -> Vec<LabelTag> {
        self.tokens.iter().map(|t| t.tag.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub granularity: Granularity,
}

impl Corpus {
    pub fn new(granularity: Granularity) -> Self {
        Corpus { sentences: Vec::new(), granularity }
    }

    /// Builds a corpus from token/tag sentences, assigning dense indices.
    pub fn from_sentences(
        granularity: Granularity,
        sentences: impl IntoIterator<Item = (Vec<Token>, Option<String>)>,
    ) -> Self {
        let mut corpus = Corpus::new(granularity);
        for (tokens, source_id) in sentences {
            corpus.push(tokens, source_id);
        }
        corpus
    }

    pub fn push(&mut self, tokens: Vec<Token>, source_id: Option<String>) {
        let index = self.sentences.len();
        self.sentences.push(Sentence { tokens, source_id, index });
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Appends `other`, renumbering its sentences.
    pub fn append(&mut self, other: Corpus) -> Result<(), ConllError> {
        if other.granularity != self.granularity {
            return Err(ConllError::GranularityMismatch {
                expected: self.granularity,
                found: other.granularity,
            });
        }
        for s in other.sentences {
            self.push(s.tokens, s.source_id);
        }
        Ok(())
    }

    /// Maps every tag to its coarse group; token text is untouched.
    pub fn to_coarse(&self) -> Corpus {
        let sentences = self
            .sentences
            .iter()
            .map(|s| Sentence {
                tokens: s.tokens.iter().map(|t| Token::new(t.text.clone(), t.tag.to_coarse())).collect(),
                source_id: s.source_id.clone(),
                index: s.index,
            })
            .collect();
        Corpus { sentences, granularity: Granularity::Coarse }
    }

    /// Canonical serialized form, as produced by [`write_corpus`].
    pub fn to_conll_string(&self) -> String {
        let mut buf = Vec::with_capacity(self.token_count() * 16);
        write_corpus(self, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("corpus text is UTF-8")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Separator {
    #[default]
    Space,
    Tab,
}

impl Separator {
    fn as_char(self) -> char {
        match self {
            Separator::Space => ' ',
            Separator::Tab => '\t',
        }
    }
}

/// How a token line is split into columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ColumnMode {
    /// Exactly two non-empty fields around a single separator.
    #[default]
    Strict,
    /// Any ASCII whitespace; the first field is the token, the last the tag.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadOptions {
    pub granularity: Granularity,
    pub tags: ParseMode,
    pub columns: ColumnMode,
    pub separator: Separator,
}

impl ReadOptions {
    pub fn new(granularity: Granularity) -> Self {
        ReadOptions {
            granularity,
            tags: ParseMode::Strict,
            columns: ColumnMode::Strict,
            separator: Separator::Space,
        }
    }
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions::new(Granularity::Fine)
    }
}

#[derive(Debug, Error)]
pub enum ConllError {
    #[error("line {line}: malformed line {content:?} ({reason})")]
    MalformedLine {
        line: usize,
        content: String,
        reason: &'static str,
    },
    #[error("line {line}: {source}")]
    Tag { line: usize, source: TagError },
    #[error("cannot combine a {found} corpus with a {expected} corpus")]
    GranularityMismatch { expected: Granularity, found: Granularity },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ConllError {
    /// The message without its `line N:` prefix.
    pub fn detail(&self) -> String {
        match self {
            ConllError::MalformedLine { content, reason, .. } => format!("malformed line {content:?} ({reason})"),
            ConllError::Tag { source, .. } => source.to_string(),
            other => other.to_string(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConllError::MalformedLine { line, .. } | ConllError::Tag { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn is_blank(line: &str) -> bool {
    line.bytes().all(|b| b.is_ascii_whitespace())
}

/// Splits one token line. `line_no` is 1-based.
fn parse_line(line: &str, line_no: usize, opts: &ReadOptions) -> Result<Token, ConllError> {
    let malformed = |reason| ConllError::MalformedLine { line: line_no, content: line.to_owned(), reason };
    let (text, tag) = match opts.columns {
        ColumnMode::Strict => {
            let mut fields = line.split(opts.separator.as_char());
            match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(g), None) if !t.is_empty() && !g.is_empty() => (t, g),
                (_, _, Some(_)) => return Err(malformed("more than two columns")),
                _ => return Err(malformed("expected `token<sep>tag`")),
            }
        }
        ColumnMode::Lenient => {
            let mut fields = line.split(|c: char| c.is_ascii_whitespace()).filter(|f| !f.is_empty());
            let first = fields.next();
            match (first, fields.next_back()) {
                (Some(t), Some(g)) => (t, g),
                _ => return Err(malformed("expected at least two columns")),
            }
        }
    };
    let tag = parse_tag(tag, opts.granularity, opts.tags).map_err(|source| ConllError::Tag { line: line_no, source })?;
    Ok(Token::new(text, tag))
}

fn lines_of(input: &str) -> impl Iterator<Item = (usize, &str)> {
    let input = input.strip_prefix('\u{feff}').unwrap_or(input);
    input
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

/// Parses CoNLL text, stopping at the first error.
pub fn parse_str(input: &str, opts: &ReadOptions, source_id: Option<&str>) -> Result<Corpus, ConllError> {
    let mut corpus = Corpus::new(opts.granularity);
    let mut current = Vec::new();
    for (line_no, line) in lines_of(input) {
        if is_blank(line) {
            if !current.is_empty() {
                corpus.push(std::mem::take(&mut current), source_id.map(str::to_owned));
            }
            continue;
        }
        current.push(parse_line(line, line_no, opts)?);
    }
    if !current.is_empty() {
        corpus.push(current, source_id.map(str::to_owned));
    }
    Ok(corpus)
}

pub fn parse_corpus<R: BufRead>(mut input: R, opts: &ReadOptions, source_id: Option<&str>) -> Result<Corpus, ConllError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    parse_str(&text, opts, source_id)
}

/// Writes the canonical form: `token SP tag` lines, one blank line after
/// every sentence. An empty corpus writes nothing.
pub fn write_corpus<W: Write>(corpus: &Corpus, out: &mut W) -> io::Result<()> {
    for sentence in &corpus.sentences {
        for token in &sentence.tokens {
            writeln!(out, "{} {}", token.text, token.tag)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// One finding from [`validate_str`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line number; 0 for whole-file findings.
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

/// Result of checking a whole file without stopping at the first problem.
#[derive(Debug, Clone)]
pub struct Validation {
    pub diagnostics: Vec<Diagnostic>,
    pub sentences: usize,
    pub tokens: usize,
    /// Token count per sentence, for alignment checks against other files.
    pub sentence_lengths: Vec<usize>,
}

impl Validation {
    pub fn error_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error).count()
    }

    pub fn warning_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning).count()
    }
}

/// Checks every line of `input` and reports all errors. IOB ordering
/// problems (an `I-` tag that does not continue a chunk of its class) are
/// reported as warnings.
pub fn validate_str(input: &str, opts: &ReadOptions) -> Validation {
    let mut diagnostics = Vec::new();
    let mut sentence_lengths = Vec::new();
    let mut current = 0usize;
    let mut prev: Option<LabelTag> = None;
    for (line_no, line) in lines_of(input) {
        if is_blank(line) {
            if current > 0 {
                sentence_lengths.push(current);
                current = 0;
            }
            prev = None;
            continue;
        }
        current += 1;
        match parse_line(line, line_no, opts) {
            Ok(token) => {
                if let LabelTag::Inside(class) = &token.tag {
                    let continues = matches!(&prev, Some(LabelTag::Begin(c) | LabelTag::Inside(c)) if c == class);
                    if !continues {
                        diagnostics.push(Diagnostic {
                            line: line_no,
                            severity: Severity::Warning,
                            message: format!("`{}` does not continue a {class} chunk", token.tag),
                        });
                    }
                }
                prev = Some(token.tag);
            }
            Err(e) => {
                diagnostics.push(Diagnostic { line: line_no, severity: Severity::Error, message: e.detail() });
                prev = None;
            }
        }
    }
    if current > 0 {
        sentence_lengths.push(current);
    }
    if sentence_lengths.is_empty() {
        diagnostics.push(Diagnostic { line: 0, severity: Severity::Warning, message: "file contains 0 sentences".into() });
    }
    Validation {
        diagnostics,
        sentences: sentence_lengths.len(),
        tokens: sentence_lengths.iter().sum(),
        sentence_lengths,
    }
}
