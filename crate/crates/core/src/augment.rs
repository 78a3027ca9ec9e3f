//! Trigger switching and training-set assembly.
//!
//! Given an English sentence and its projected translation, switching builds
//! two bilingual sentences: the English host with the translated triggers
//! (`D_St`) and the translated host with the English triggers (`D_Ts`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{AnnotatedSentence, Corpus, DatasetTag};
use crate::projection::{spans_from_mask, AlignmentRecord, Projection, TriggerSpan};
use crate::ErrorCategory;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AugmentError {
    #[error("pair {id}: source and target spans use different markers")]
    MarkerMismatch { id: String },
    #[error("pair {id}: {source_spans} source spans but {target_spans} target spans")]
    SpanCountMismatch {
        id: String,
        source_spans: usize,
        target_spans: usize,
    },
    #[error("pair {id}: span [{start}, {end}) is invalid for a sentence of {len} tokens")]
    SpanOutOfRange {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("sentence {0} has no trigger mask")]
    MissingMask(String),
    #[error("no corpus supplied for {0}")]
    MissingTag(DatasetTag),
    #[error("invalid dataset combination {0:?}")]
    InvalidCombination(String),
}

impl AugmentError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            AugmentError::InvalidCombination(_) => ErrorCategory::Config,
            _ => ErrorCategory::Data,
        }
    }
}

/// A source sentence and its translation with trigger spans matched by
/// marker index.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub source: AnnotatedSentence,
    pub target: AnnotatedSentence,
    pub source_spans: Vec<TriggerSpan>,
    pub target_spans: Vec<TriggerSpan>,
}

impl AlignedPair {
    pub fn new(
        source: AnnotatedSentence,
        target: AnnotatedSentence,
        mut source_spans: Vec<TriggerSpan>,
        mut target_spans: Vec<TriggerSpan>,
    ) -> Result<Self, AugmentError> {
        source_spans.sort_by_key(|s| s.start);
        target_spans.sort_by_key(|s| s.start);
        let pair = AlignedPair {
            source,
            target,
            source_spans,
            target_spans,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// Checks span counts, bounds, ordering and marker correspondence.
    pub fn validate(&self) -> Result<(), AugmentError> {
        let id = &self.target.id;
        if self.source_spans.len() != self.target_spans.len() {
            return Err(AugmentError::SpanCountMismatch {
                id: id.clone(),
                source_spans: self.source_spans.len(),
                target_spans: self.target_spans.len(),
            });
        }
        check_spans(id, &self.source_spans, self.source.len())?;
        check_spans(id, &self.target_spans, self.target.len())?;
        let markers = |spans: &[TriggerSpan]| spans.iter().map(|s| s.marker_index).collect::<BTreeSet<_>>();
        let source_markers = markers(&self.source_spans);
        if source_markers.len() != self.source_spans.len() || source_markers != markers(&self.target_spans) {
            return Err(AugmentError::MarkerMismatch { id: id.clone() });
        }
        Ok(())
    }

    pub fn from_projection(source: &AnnotatedSentence, projection: &Projection) -> Result<Self, AugmentError> {
        Self::new(
            source.clone(),
            projection.sentence.clone(),
            projection.source_spans.clone(),
            projection.target_spans.clone(),
        )
    }

    /// Pairs the trigger runs of both masks in left-to-right order. Used when
    /// no recorded alignment is available.
    pub fn from_masks(source: AnnotatedSentence, target: AnnotatedSentence) -> Result<Self, AugmentError> {
        let source_mask = source
            .trigger_mask
            .as_deref()
            .ok_or_else(|| AugmentError::MissingMask(source.id.clone()))?;
        let target_mask = target
            .trigger_mask
            .as_deref()
            .ok_or_else(|| AugmentError::MissingMask(target.id.clone()))?;
        let source_spans = spans_from_mask(source_mask);
        let target_spans = spans_from_mask(target_mask);
        Self::new(source, target, source_spans, target_spans)
    }
}

/// Spans must be sorted by start, in bounds and non-overlapping.
fn check_spans(id: &str, spans: &[TriggerSpan], len: usize) -> Result<(), AugmentError> {
    let mut previous_end = 0;
    for s in spans.iter() {
        if s.start >= s.end || s.end > len || s.start < previous_end {
            return Err(AugmentError::SpanOutOfRange {
                id: id.to_string(),
                start: s.start,
                end: s.end,
                len,
            });
        }
        previous_end = s.end;
    }
    Ok(())
}

/// Output of [`switch_triggers`]: both switched sentences with the spans of
/// their substituted triggers.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedPair {
    pub source_host: AnnotatedSentence,
    pub source_host_spans: Vec<TriggerSpan>,
    pub target_host: AnnotatedSentence,
    pub target_host_spans: Vec<TriggerSpan>,
}

impl SwitchedPair {
    /// Pairs the two switched sentences with each other, ready to be
    /// switched again.
    pub fn realign(&self) -> Result<AlignedPair, AugmentError> {
        AlignedPair::new(
            self.source_host.clone(),
            self.target_host.clone(),
            self.source_host_spans.clone(),
            self.target_host_spans.clone(),
        )
    }
}

/// Replaces every host span by the donor span carrying the same marker.
fn substitute(
    host: &AnnotatedSentence,
    host_spans: &[TriggerSpan],
    donor: &AnnotatedSentence,
    donor_spans: &[TriggerSpan],
) -> (Vec<String>, Vec<bool>, Vec<TriggerSpan>) {
    let by_marker: HashMap<usize, &TriggerSpan> = donor_spans.iter().map(|s| (s.marker_index, s)).collect();
    let mut tokens = Vec::with_capacity(host.len());
    let mut mask = Vec::with_capacity(host.len());
    let mut spans = Vec::with_capacity(host_spans.len());
    let mut cursor = 0;
    for span in host_spans {
        for token in &host.tokens[cursor..span.start] {
            tokens.push(token.clone());
            mask.push(false);
        }
        let replacement = by_marker[&span.marker_index];
        let start = tokens.len();
        for token in &donor.tokens[replacement.start..replacement.end] {
            tokens.push(token.clone());
            mask.push(true);
        }
        spans.push(TriggerSpan {
            start,
            end: tokens.len(),
            marker_index: span.marker_index,
        });
        cursor = span.end;
    }
    for token in &host.tokens[cursor..] {
        tokens.push(token.clone());
        mask.push(false);
    }
    (tokens, mask, spans)
}

/// Builds the two trigger-switched sentences of a pair.
///
/// The switched sentences keep their host's language code and emotion, are
/// flagged bilingual, and are masked exactly on the substituted tokens.
pub fn switch_triggers(pair: &AlignedPair) -> Result<SwitchedPair, AugmentError> {
    pair.validate()?;
    let (st_tokens, st_mask, st_spans) = substitute(&pair.source, &pair.source_spans, &pair.target, &pair.target_spans);
    let (ts_tokens, ts_mask, ts_spans) = substitute(&pair.target, &pair.target_spans, &pair.source, &pair.source_spans);
    Ok(SwitchedPair {
        source_host: AnnotatedSentence {
            id: format!("{}.st", pair.target.id),
            tokens: st_tokens,
            emotion: pair.source.emotion,
            trigger_mask: Some(st_mask),
            language: pair.source.language,
            origin: DatasetTag::SourceSwitched,
            bilingual: true,
        },
        source_host_spans: st_spans,
        target_host: AnnotatedSentence {
            id: format!("{}.ts", pair.target.id),
            tokens: ts_tokens,
            emotion: pair.target.emotion,
            trigger_mask: Some(ts_mask),
            language: pair.target.language,
            origin: DatasetTag::TranslatedSwitched,
            bilingual: true,
        },
        target_host_spans: ts_spans,
    })
}

/// Counts from [`switch_corpus`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SwitchStats {
    pub pairs: usize,
    /// Projected sentences without a matching source or a usable alignment.
    pub skipped: usize,
    /// Pairs without any trigger, which yield no switched sentences.
    pub without_triggers: usize,
}

/// Switches every projected sentence of `translated` against its source.
///
/// Alignments recorded at projection time are used when given; otherwise
/// trigger runs are paired positionally and pairs with differing run counts
/// are skipped.
pub fn switch_corpus(
    source: &Corpus,
    translated: &Corpus,
    alignments: Option<&[AlignmentRecord]>,
) -> (Corpus, Corpus, SwitchStats) {
    let sources: HashMap<&str, &AnnotatedSentence> = source.iter().map(|s| (s.id.as_str(), s)).collect();
    let recorded: Option<HashMap<&str, &AlignmentRecord>> =
        alignments.map(|records| records.iter().map(|r| (r.id.as_str(), r)).collect());

    let mut stats = SwitchStats::default();
    let mut st = Vec::new();
    let mut ts = Vec::new();
    for target in translated {
        let pair = match &recorded {
            Some(recorded) => recorded.get(target.id.as_str()).and_then(|record| {
                let src = sources.get(record.source_id.as_str())?;
                AlignedPair::new(
                    (*src).clone(),
                    target.clone(),
                    record.source_spans.clone(),
                    record.target_spans.clone(),
                )
                .ok()
            }),
            None => target
                .id
                .rsplit_once('.')
                .and_then(|(root, _)| sources.get(root))
                .and_then(|src| AlignedPair::from_masks((*src).clone(), target.clone()).ok()),
        };
        let Some(pair) = pair else {
            stats.skipped += 1;
            continue;
        };
        stats.pairs += 1;
        if pair.source_spans.is_empty() {
            stats.without_triggers += 1;
            continue;
        }
        let switched = switch_triggers(&pair).expect("pair was validated on construction");
        st.push(switched.source_host);
        ts.push(switched.target_host);
    }
    (
        Corpus {
            sentences: st,
            provenance: Default::default(),
        },
        Corpus {
            sentences: ts,
            provenance: Default::default(),
        },
        stats,
    )
}

/// Which derived datasets to train on. `D_S` is always part of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationSpec {
    include: BTreeSet<DatasetTag>,
}

impl CombinationSpec {
    pub fn new(tags: impl IntoIterator<Item = DatasetTag>) -> Result<Self, AugmentError> {
        let include: BTreeSet<DatasetTag> = tags.into_iter().collect();
        if !include.contains(&DatasetTag::Source) {
            let listed: Vec<&str> = include.iter().map(|t| t.as_str()).collect();
            return Err(AugmentError::InvalidCombination(listed.join("+")));
        }
        Ok(CombinationSpec { include })
    }

    pub fn source_only() -> Self {
        CombinationSpec {
            include: BTreeSet::from([DatasetTag::Source]),
        }
    }

    pub fn includes(&self, tag: DatasetTag) -> bool {
        self.include.contains(&tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = DatasetTag> + '_ {
        self.include.iter().copied()
    }
}

impl FromStr for CombinationSpec {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tags = s
            .split('+')
            .map(|t| t.trim().parse::<DatasetTag>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| AugmentError::InvalidCombination(s.to_string()))?;
        Self::new(tags).map_err(|_| AugmentError::InvalidCombination(s.to_string()))
    }
}

impl fmt::Display for CombinationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self.include.iter().map(|t| t.as_str()).collect();
        f.write_str(&tags.join("+"))
    }
}

/// Concatenates the selected corpora in tag order, suffixing each id with
/// `:<tag>`.
pub fn build_dataset(spec: &CombinationSpec, corpora: &BTreeMap<DatasetTag, Corpus>) -> Result<Corpus, AugmentError> {
    let mut sentences = Vec::new();
    let mut provenance = BTreeMap::new();
    for tag in spec.tags() {
        let corpus = corpora.get(&tag).ok_or(AugmentError::MissingTag(tag))?;
        provenance.insert(format!("combine.size.{tag}"), corpus.len().to_string());
        sentences.extend(corpus.iter().map(|s| AnnotatedSentence {
            id: format!("{}:{tag}", s.id),
            ..s.clone()
        }));
    }
    provenance.insert("combine.spec".into(), spec.to_string());
    Ok(Corpus { sentences, provenance })
}
