//! Alignment-free label projection.
//!
//! Trigger spans are wrapped in distinct symbol pairs before translation and
//! located again in the translated text by those symbols. Sentences whose
//! symbols do not survive translation intact are discarded rather than
//! repaired.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{AnnotatedSentence, DatasetTag, Language};
use crate::ErrorCategory;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("invalid marker scheme: {0}")]
    InvalidScheme(String),
    #[error("projection target must be a non-English language, got {0}")]
    InvalidTarget(Language),
    #[error("source sentence {0} is not English D_S data")]
    InvalidSource(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed alignment record at line {line}: {message}")]
    MalformedAlignment { line: usize, message: String },
}

impl ProjectionError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            ProjectionError::InvalidScheme(_) | ProjectionError::InvalidTarget(_) => ErrorCategory::Config,
            _ => ErrorCategory::Data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerPair {
    pub open: String,
    pub close: String,
}

/// Ordered registry of open/close symbol pairs.
///
/// All symbols are distinct, free of whitespace, and no symbol occurs inside
/// another one, so every occurrence in a text is unambiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerScheme {
    pairs: Vec<MarkerPair>,
}

const DEFAULT_PAIRS: [(&str, &str); 8] = [
    ("[", "]"),
    ("{", "}"),
    ("<", ">"),
    ("(", ")"),
    ("«", "»"),
    ("⟦", "⟧"),
    ("⟨", "⟩"),
    ("⌈", "⌉"),
];

impl Default for MarkerScheme {
    fn default() -> Self {
        MarkerScheme::new(DEFAULT_PAIRS.iter().map(|&(o, c)| (o.to_string(), c.to_string())))
            .expect("default scheme is valid")
    }
}

impl MarkerScheme {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self, ProjectionError> {
        let pairs: Vec<MarkerPair> = pairs
            .into_iter()
            .map(|(open, close)| MarkerPair { open, close })
            .collect();
        if pairs.is_empty() {
            return Err(ProjectionError::InvalidScheme("no symbol pairs".into()));
        }
        let symbols: Vec<&str> = pairs.iter().flat_map(|p| [p.open.as_str(), p.close.as_str()]).collect();
        for (i, a) in symbols.iter().enumerate() {
            if a.is_empty() {
                return Err(ProjectionError::InvalidScheme("empty symbol".into()));
            }
            if a.chars().any(char::is_whitespace) {
                return Err(ProjectionError::InvalidScheme(format!(
                    "symbol {a:?} contains whitespace"
                )));
            }
            for (j, b) in symbols.iter().enumerate() {
                if i != j && b.contains(a) {
                    return Err(ProjectionError::InvalidScheme(format!(
                        "symbol {a:?} is not distinct from {b:?}"
                    )));
                }
            }
        }
        Ok(MarkerScheme { pairs })
    }

    /// Parses a whitespace-separated list of pairs. A two-character item is
    /// read as `<open><close>`; longer symbols are written `open,close`.
    /// The word `default` selects the built-in scheme.
    pub fn parse(spec: &str) -> Result<Self, ProjectionError> {
        if spec.trim() == "default" {
            return Ok(Self::default());
        }
        let pairs = spec
            .split_whitespace()
            .map(|item| {
                let chars: Vec<char> = item.chars().collect();
                if chars.len() == 2 {
                    Ok((chars[0].to_string(), chars[1].to_string()))
                } else if let Some((open, close)) = item.split_once(',') {
                    Ok((open.to_string(), close.to_string()))
                } else {
                    Err(ProjectionError::InvalidScheme(format!("cannot read pair {item:?}")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[MarkerPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, index: usize) -> Option<&MarkerPair> {
        self.pairs.get(index)
    }

    /// Whether `text` contains any symbol of the pair at `index`.
    fn pair_occurs_in(&self, index: usize, text: &str) -> bool {
        let pair = &self.pairs[index];
        text.contains(pair.open.as_str()) || text.contains(pair.close.as_str())
    }
}

impl fmt::Display for MarkerScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .pairs
            .iter()
            .map(|p| {
                if p.open.chars().count() == 1 && p.close.chars().count() == 1 {
                    format!("{}{}", p.open, p.close)
                } else {
                    format!("{},{}", p.open, p.close)
                }
            })
            .collect();
        f.write_str(&items.join(" "))
    }
}

/// A half-open token range `[start, end)` tagged with the marker pair used
/// for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TriggerSpan {
    pub start: usize,
    pub end: usize,
    pub marker_index: usize,
}

impl TriggerSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

impl Serialize for TriggerSpan {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end, self.marker_index].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TriggerSpan {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [start, end, marker_index] = <[usize; 3]>::deserialize(deserializer)?;
        if start >= end {
            return Err(serde::de::Error::custom(format!("empty span [{start}, {end})")));
        }
        Ok(TriggerSpan {
            start,
            end,
            marker_index,
        })
    }
}

/// Why a sentence was left out of the projected corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    MissingMarker,
    UnbalancedMarker,
    ReorderedMarker,
    TooManySpans,
    EmptySpan,
    /// The translation contained no tokens at all.
    EmptyText,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::MissingMarker => "missing_marker",
            DiscardReason::UnbalancedMarker => "unbalanced_marker",
            DiscardReason::ReorderedMarker => "reordered_marker",
            DiscardReason::TooManySpans => "too_many_spans",
            DiscardReason::EmptySpan => "empty_span",
            DiscardReason::EmptyText => "empty_text",
        }
    }
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSentence {
    pub text: String,
    pub spans: Vec<TriggerSpan>,
    pub source_id: String,
}

impl MarkedSentence {
    pub fn marker_indices(&self) -> Vec<usize> {
        self.spans.iter().map(|s| s.marker_index).collect()
    }
}

/// Maximal runs of set positions, numbered left to right.
pub fn spans_from_mask(mask: &[bool]) -> Vec<TriggerSpan> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &flag) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (flag, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(TriggerSpan {
                    start: s,
                    end: i,
                    marker_index: spans.len(),
                });
                start = None;
            }
            _ => {}
        }
    }
    spans
}

/// Wraps every trigger run of `sentence` in its own symbol pair.
///
/// Pairs whose symbols already occur in one of the sentence's tokens are
/// skipped, so the `k`-th run receives the `k`-th usable pair of the scheme.
/// A sentence without a mask is rendered without markers.
pub fn mark_sentence(sentence: &AnnotatedSentence, scheme: &MarkerScheme) -> Result<MarkedSentence, DiscardReason> {
    let runs = sentence
        .trigger_mask
        .as_deref()
        .map(spans_from_mask)
        .unwrap_or_default();
    let usable: Vec<usize> = (0..scheme.len())
        .filter(|&k| !sentence.tokens.iter().any(|t| scheme.pair_occurs_in(k, t)))
        .take(runs.len())
        .collect();
    if usable.len() < runs.len() {
        return Err(DiscardReason::TooManySpans);
    }
    let spans: Vec<TriggerSpan> = runs
        .iter()
        .zip(&usable)
        .map(|(run, &k)| TriggerSpan {
            marker_index: k,
            ..*run
        })
        .collect();

    let mut pieces: Vec<&str> = Vec::with_capacity(sentence.tokens.len() + 2 * spans.len());
    let mut next = spans.iter().peekable();
    let mut open: Option<&TriggerSpan> = None;
    for (i, token) in sentence.tokens.iter().enumerate() {
        if let Some(span) = next.next_if(|s| s.start == i) {
            pieces.push(&scheme.pairs[span.marker_index].open);
            open = Some(span);
        }
        pieces.push(token);
        if let Some(span) = open.filter(|s| s.end == i + 1) {
            pieces.push(&scheme.pairs[span.marker_index].close);
            open = None;
        }
    }
    Ok(MarkedSentence {
        text: pieces.join(" "),
        spans,
        source_id: sentence.id.clone(),
    })
}

/// A span recovered from translated text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedSpan {
    pub marker_index: usize,
    /// Inner text with whitespace trimmed and collapsed.
    pub text: String,
    /// Token range of the span inside [`Extraction::tokens`].
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    /// Translated text with the markers removed and whitespace collapsed.
    pub clean_text: String,
    pub tokens: Vec<String>,
    /// Set exactly on tokens that were inside a marker pair.
    pub mask: Vec<bool>,
    /// Recovered spans in order of appearance.
    pub spans: Vec<ExtractedSpan>,
}

impl Extraction {
    pub fn trigger_spans(&self) -> Vec<TriggerSpan> {
        self.spans
            .iter()
            .map(|s| TriggerSpan {
                start: s.start,
                end: s.end,
                marker_index: s.marker_index,
            })
            .collect()
    }
}

/// Locates each expected marker pair in `translated` and strips them out.
///
/// Every expected pair must occur exactly once with the open symbol first,
/// and pairs may neither nest nor interleave. A marker boundary always acts as
/// a token boundary, so text glued to a marker is split off from it.
pub fn extract_markers(
    translated: &str,
    expected: &[usize],
    scheme: &MarkerScheme,
) -> Result<Extraction, DiscardReason> {
    struct Located {
        marker_index: usize,
        open_start: usize,
        inner_start: usize,
        inner_end: usize,
        close_end: usize,
    }

    let mut found = Vec::with_capacity(expected.len());
    for &k in expected {
        let pair = scheme.pair(k).ok_or(DiscardReason::MissingMarker)?;
        let opens: Vec<usize> = translated.match_indices(pair.open.as_str()).map(|(i, _)| i).collect();
        let closes: Vec<usize> = translated.match_indices(pair.close.as_str()).map(|(i, _)| i).collect();
        found.push((k, pair, opens, closes));
    }
    if found.iter().any(|(_, _, o, c)| o.is_empty() || c.is_empty()) {
        return Err(DiscardReason::MissingMarker);
    }

    let mut located = Vec::with_capacity(found.len());
    for (k, pair, opens, closes) in found {
        if opens.len() != 1 || closes.len() != 1 {
            return Err(DiscardReason::UnbalancedMarker);
        }
        let inner_start = opens[0] + pair.open.len();
        if closes[0] < inner_start {
            return Err(DiscardReason::UnbalancedMarker);
        }
        located.push(Located {
            marker_index: k,
            open_start: opens[0],
            inner_start,
            inner_end: closes[0],
            close_end: closes[0] + pair.close.len(),
        });
    }
    located.sort_by_key(|l| l.open_start);
    if located.windows(2).any(|w| w[1].open_start < w[0].close_end) {
        return Err(DiscardReason::ReorderedMarker);
    }

    let mut tokens = Vec::new();
    let mut mask = Vec::new();
    let mut spans = Vec::with_capacity(located.len());
    let mut cursor = 0;
    for l in &located {
        for token in translated[cursor..l.open_start].split_whitespace() {
            tokens.push(token.to_string());
            mask.push(false);
        }
        let start = tokens.len();
        for token in translated[l.inner_start..l.inner_end].split_whitespace() {
            tokens.push(token.to_string());
            mask.push(true);
        }
        if tokens.len() == start {
            return Err(DiscardReason::EmptySpan);
        }
        spans.push(ExtractedSpan {
            marker_index: l.marker_index,
            text: tokens[start..].join(" "),
            start,
            end: tokens.len(),
        });
        cursor = l.close_end;
    }
    for token in translated[cursor..].split_whitespace() {
        tokens.push(token.to_string());
        mask.push(false);
    }
    Ok(Extraction {
        clean_text: tokens.join(" "),
        tokens,
        mask,
        spans,
    })
}

/// A successfully projected sentence together with the span correspondence
/// between source and translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub sentence: AnnotatedSentence,
    pub source_spans: Vec<TriggerSpan>,
    pub target_spans: Vec<TriggerSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionOutcome {
    Projected(Projection),
    Discarded(DiscardReason),
}

impl ProjectionOutcome {
    pub fn projected(&self) -> Option<&Projection> {
        match self {
            ProjectionOutcome::Projected(p) => Some(p),
            ProjectionOutcome::Discarded(_) => None,
        }
    }

    pub fn discard_reason(&self) -> Option<DiscardReason> {
        match self {
            ProjectionOutcome::Projected(_) => None,
            ProjectionOutcome::Discarded(reason) => Some(*reason),
        }
    }
}

/// Id given to the translation of `source_id` into `lang`.
pub fn projected_id(source_id: &str, lang: Language) -> String {
    format!("{source_id}.{lang}")
}

/// Builds the pseudo-labelled target sentence from the backend output for
/// `mark_sentence(source, scheme).text`.
///
/// The projected mask covers exactly the tokens found between the markers, at
/// the position where they were found. Sentences without a source mask are
/// projected with their emotion label only.
pub fn project_labels(
    source: &AnnotatedSentence,
    translated_text: &str,
    scheme: &MarkerScheme,
    target_lang: Language,
) -> Result<ProjectionOutcome, ProjectionError> {
    if target_lang == Language::En {
        return Err(ProjectionError::InvalidTarget(target_lang));
    }
    if source.language != Language::En {
        return Err(ProjectionError::InvalidSource(source.id.clone()));
    }
    let marked = match mark_sentence(source, scheme) {
        Ok(marked) => marked,
        Err(reason) => return Ok(ProjectionOutcome::Discarded(reason)),
    };
    let translated: String = translated_text.nfc().collect();

    let (tokens, mask, target_spans) = if marked.spans.is_empty() {
        let tokens: Vec<String> = translated.split_whitespace().map(str::to_string).collect();
        let mask = source.trigger_mask.as_ref().map(|_| vec![false; tokens.len()]);
        (tokens, mask, Vec::new())
    } else {
        match extract_markers(&translated, &marked.marker_indices(), scheme) {
            Ok(extraction) => {
                let spans = extraction.trigger_spans();
                (extraction.tokens, Some(extraction.mask), spans)
            }
            Err(reason) => return Ok(ProjectionOutcome::Discarded(reason)),
        }
    };
    if tokens.is_empty() {
        return Ok(ProjectionOutcome::Discarded(DiscardReason::EmptyText));
    }

    Ok(ProjectionOutcome::Projected(Projection {
        sentence: AnnotatedSentence {
            id: projected_id(&source.id, target_lang),
            tokens,
            emotion: source.emotion,
            trigger_mask: mask,
            language: target_lang,
            origin: DatasetTag::Translated,
            bilingual: false,
        },
        source_spans: marked.spans,
        target_spans,
    }))
}

/// One line of the discard log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardRecord {
    pub id: String,
    pub reason: DiscardReason,
    pub translated_text: String,
}

/// Span correspondence for one projected sentence, stored next to the
/// projected corpus so that trigger switching can pair spans by marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub id: String,
    pub source_id: String,
    pub source_spans: Vec<TriggerSpan>,
    pub target_spans: Vec<TriggerSpan>,
}

fn io_err(path: &Path, source: io::Error) -> ProjectionError {
    ProjectionError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes serializable records as JSON lines.
pub fn write_jsonl_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ProjectionError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, record).map_err(|e| io_err(path, e.into()))?;
        writer.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn read_alignments(path: &Path) -> Result<Vec<AlignmentRecord>, ProjectionError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| ProjectionError::MalformedAlignment {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EmotionLabel;

    fn en(text: &str, mask: &[u8]) -> AnnotatedSentence {
        AnnotatedSentence::from_text("s1", text, Language::En, DatasetTag::Source)
            .with_mask(mask.iter().map(|&m| m == 1).collect())
    }

    fn brackets() -> MarkerScheme {
        MarkerScheme::parse("[] {}").unwrap()
    }

    fn span(start: usize, end: usize, marker_index: usize) -> TriggerSpan {
        TriggerSpan {
            start,
            end,
            marker_index,
        }
    }

    #[test]
    fn runs_from_mask() {
        assert_eq!(
            spans_from_mask(&[false, true, true, false, true]),
            vec![span(1, 3, 0), span(4, 5, 1)]
        );
        assert!(spans_from_mask(&[false, false, false]).is_empty());
        assert_eq!(spans_from_mask(&[true, true, true]), vec![span(0, 3, 0)]);
    }

    #[test]
    fn default_scheme_has_eight_pairs() {
        let scheme = MarkerScheme::default();
        assert_eq!(scheme.len(), 8);
        assert_eq!(MarkerScheme::parse(&scheme.to_string()).unwrap(), scheme);
    }

    #[test]
    fn scheme_invariants() {
        assert!(MarkerScheme::parse("[] [}").is_err());
        assert!(MarkerScheme::new([("<<".to_string(), ">>".to_string()), ("<".into(), ">".into())]).is_err());
        assert!(MarkerScheme::new([("a b".to_string(), "c".to_string())]).is_err());
        assert!(MarkerScheme::parse("").is_err());
        let long = MarkerScheme::parse("<<,>> @@,%%").unwrap();
        assert_eq!(long.pair(1).unwrap().close, "%%");
    }

    #[test]
    fn marks_single_trigger() {
        let marked = mark_sentence(&en("I love you", &[0, 1, 0]), &brackets()).unwrap();
        assert_eq!(marked.text, "I [ love ] you");
        assert_eq!(marked.spans, vec![span(1, 2, 0)]);
    }

    #[test]
    fn marks_with_brace_first_scheme() {
        let scheme = MarkerScheme::parse("{} []").unwrap();
        let marked = mark_sentence(&en("so happy today", &[0, 1, 1]), &scheme).unwrap();
        assert_eq!(marked.text, "so { happy today }");
    }

    #[test]
    fn too_many_spans_discarded() {
        let err = mark_sentence(&en("a b c d e", &[1, 0, 1, 0, 1]), &brackets()).unwrap_err();
        assert_eq!(err, DiscardReason::TooManySpans);
    }

    #[test]
    fn skips_pairs_present_in_tokens() {
        let marked = mark_sentence(&en("a[1] love b", &[0, 1, 0]), &brackets()).unwrap();
        assert_eq!(marked.text, "a[1] { love } b");
        assert_eq!(marked.spans[0].marker_index, 1);
        let err = mark_sentence(&en("a[1] {x} love", &[0, 0, 1]), &brackets()).unwrap_err();
        assert_eq!(err, DiscardReason::TooManySpans);
    }

    #[test]
    fn extracts_spanish_trigger() {
        let x = extract_markers("Te [ quiero ] mucho", &[0], &brackets()).unwrap();
        assert_eq!(x.clean_text, "Te quiero mucho");
        assert_eq!(x.spans.len(), 1);
        assert_eq!((x.spans[0].marker_index, x.spans[0].text.as_str()), (0, "quiero"));
        assert_eq!(x.mask, vec![false, true, false]);
    }

    #[test]
    fn extraction_discards() {
        let s = brackets();
        assert_eq!(
            extract_markers("Te quiero mucho", &[0], &s),
            Err(DiscardReason::MissingMarker)
        );
        assert_eq!(
            extract_markers("Te [ quiero mucho", &[0], &s),
            Err(DiscardReason::MissingMarker)
        );
        assert_eq!(
            extract_markers("A ] x [ B", &[0], &s),
            Err(DiscardReason::UnbalancedMarker)
        );
        assert_eq!(
            extract_markers("[ a ] [ b ]", &[0], &s),
            Err(DiscardReason::UnbalancedMarker)
        );
        assert_eq!(
            extract_markers("[ a { b ] c }", &[0, 1], &s),
            Err(DiscardReason::ReorderedMarker)
        );
        assert_eq!(
            extract_markers("[ a { b } c ]", &[0, 1], &s),
            Err(DiscardReason::ReorderedMarker)
        );
        assert_eq!(extract_markers("a [ ] b", &[0], &s), Err(DiscardReason::EmptySpan));
    }

    #[test]
    fn swapped_pair_order_is_accepted() {
        let x = extract_markers("x { b } y [ a ] z", &[0, 1], &brackets()).unwrap();
        assert_eq!(x.tokens, ["x", "b", "y", "a", "z"]);
        assert_eq!(x.spans[0].marker_index, 1);
        assert_eq!(x.spans[1].marker_index, 0);
    }

    #[test]
    fn attached_markers_split_tokens() {
        let x = extract_markers("Te[quiero  mucho]!", &[0], &brackets()).unwrap();
        assert_eq!(x.tokens, ["Te", "quiero", "mucho", "!"]);
        assert_eq!(x.spans[0].text, "quiero mucho");
        assert_eq!(x.mask, [false, true, true, false]);
    }

    #[test]
    fn projects_figure_example() {
        let source = en("I love you", &[0, 1, 0]).with_emotion(EmotionLabel::Love);
        let outcome = project_labels(&source, "Te [ quiero ] mucho", &MarkerScheme::default(), Language::Es).unwrap();
        let p = outcome.projected().unwrap();
        assert_eq!(p.sentence.tokens, ["Te", "quiero", "mucho"]);
        assert_eq!(p.sentence.trigger_mask, Some(vec![false, true, false]));
        assert_eq!(p.sentence.emotion, Some(EmotionLabel::Love));
        assert_eq!(p.sentence.origin, DatasetTag::Translated);
        assert_eq!(p.sentence.language, Language::Es);
        assert_eq!(p.sentence.id, "s1.es");
        assert_eq!(p.target_spans, vec![span(1, 2, 0)]);
    }

    #[test]
    fn dropped_markers_discard() {
        let source = en("I love you", &[0, 1, 0]);
        let outcome = project_labels(&source, "Te quiero mucho", &MarkerScheme::default(), Language::Es).unwrap();
        assert_eq!(outcome.discard_reason(), Some(DiscardReason::MissingMarker));
    }

    #[test]
    fn identity_translation_round_trips() {
        let scheme = MarkerScheme::default();
        let source = en("no really I am so very happy now", &[0, 0, 1, 0, 1, 1, 0, 1]);
        let marked = mark_sentence(&source, &scheme).unwrap();
        let p = project_labels(&source, &marked.text, &scheme, Language::Fr).unwrap();
        let p = p.projected().unwrap();
        assert_eq!(p.sentence.tokens, source.tokens);
        assert_eq!(p.sentence.trigger_mask, source.trigger_mask);
    }

    #[test]
    fn unmasked_sentence_projects_emotion_only() {
        let source = AnnotatedSentence::from_text("e", "I am sad", Language::En, DatasetTag::Source)
            .with_emotion(EmotionLabel::Sadness);
        let p = project_labels(&source, "Je suis triste", &MarkerScheme::default(), Language::Fr).unwrap();
        let p = p.projected().unwrap();
        assert_eq!(p.sentence.trigger_mask, None);
        assert_eq!(p.sentence.emotion, Some(EmotionLabel::Sadness));
        let empty = project_labels(&source, "  ", &MarkerScheme::default(), Language::Fr).unwrap();
        assert_eq!(empty.discard_reason(), Some(DiscardReason::EmptyText));
    }

    #[test]
    fn english_target_rejected() {
        let source = en("I love you", &[0, 1, 0]);
        assert!(project_labels(&source, "x", &MarkerScheme::default(), Language::En).is_err());
    }

    #[test]
    fn span_serializes_as_triple() {
        let json = serde_json::to_string(&span(1, 3, 2)).unwrap();
        assert_eq!(json, "[1,3,2]");
        assert_eq!(serde_json::from_str::<TriggerSpan>(&json).unwrap(), span(1, 3, 2));
        assert!(serde_json::from_str::<TriggerSpan>("[3,3,0]").is_err());
    }

    #[test]
    fn discard_record_format() {
        let record = DiscardRecord {
            id: "s1".into(),
            reason: DiscardReason::MissingMarker,
            translated_text: "Te quiero".into(),
        };
        assert_eq!(
            serde_json::to_string(&record).unwrap(),
            r#"{"id":"s1","reason":"missing_marker","translated_text":"Te quiero"}"#
        );
    }
}
