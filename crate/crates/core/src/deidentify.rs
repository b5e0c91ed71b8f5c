//! The de-identification pipeline: recognizers and NER backend propose
//! spans, [`merge_spans`] resolves conflicts, [`suppress`] rewrites text.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::corpus::{escape_field, read_file, unescape_field, CharMap, Document, Label, Tag, Token};
use crate::error::{Error, Result};
use crate::ner_adapter::{tag_tokens, BackendConfig, NerBackend};
use crate::recognizers::{CandidateSpan, RecognizerSet};
use crate::tokenizer::{tokenize, TokenizerConfig};

/// A conflict-free span chosen for suppression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SelectedSpan {
    pub start: usize,
    pub end: usize,
    pub label: Label,
    pub source: String,
}

impl From<&CandidateSpan> for SelectedSpan {
    fn from(c: &CandidateSpan) -> Self {
        SelectedSpan {
            start: c.start,
            end: c.end,
            label: c.label,
            source: c.source.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SuppressionStrategy {
    /// `[PER]`
    #[default]
    LabelPlaceholder,
    /// `[PER-1]`, numbered per label by first appearance of each
    /// case-folded surface within the document.
    NumberedPseudonym,
}

/// Greedy conflict resolution. Repeatedly takes the remaining candidate
/// that is longest, then has the lowest priority number, then starts
/// first, then has the smallest source name; everything overlapping it is
/// discarded. The result is sorted by start.
pub fn merge_spans(candidates: &[CandidateSpan]) -> Vec<SelectedSpan> {
    let mut order: Vec<&CandidateSpan> = candidates.iter().filter(|c| c.start < c.end).collect();
    order.sort_by(|a, b| {
        b.len()
            .cmp(&a.len())
            .then(a.priority.cmp(&b.priority))
            .then(a.start.cmp(&b.start))
            .then(a.source.cmp(&b.source))
            .then(a.end.cmp(&b.end))
            .then(a.label.cmp(&b.label))
    });
    // start -> end of every selected span
    let mut taken: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for c in order {
        let clash = taken.range(..c.end).next_back().is_some_and(|(_, &end)| end > c.start);
        if !clash {
            taken.insert(c.start, c.end);
            out.push(SelectedSpan::from(c));
        }
    }
    out.sort();
    out
}

/// One performed replacement, with offsets into the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    pub span: SelectedSpan,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DeidReport {
    pub doc_id: String,
    pub replacements: Vec<Replacement>,
    pub counts: BTreeMap<Label, usize>,
}

impl DeidReport {
    pub fn spans(&self) -> impl Iterator<Item = &SelectedSpan> {
        self.replacements.iter().map(|r| &r.span)
    }
}

/// Replaces every span with its placeholder. Text outside the spans is
/// copied verbatim.
pub fn suppress(text: &str, spans: &[SelectedSpan], strategy: SuppressionStrategy) -> Result<(String, Vec<Replacement>)> {
    let mut sorted: Vec<&SelectedSpan> = spans.iter().collect();
    sorted.sort();
    let map = CharMap::new(text);
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::OverlappingSpans {
                first: (pair[0].start, pair[0].end),
                second: (pair[1].start, pair[1].end),
            });
        }
    }
    let mut numbering: HashMap<(Label, String), usize> = HashMap::new();
    let mut next: HashMap<Label, usize> = HashMap::new();
    let mut out = String::with_capacity(text.len());
    let mut replacements = Vec::with_capacity(sorted.len());
    let mut cursor = 0;
    for span in sorted {
        let (Some(from), Some(to)) = (map.byte_offset(span.start), map.byte_offset(span.end)) else {
            return Err(Error::OffsetOutOfRange {
                doc_id: String::new(),
                start: span.start,
                end: span.end,
                len: map.char_len(),
            });
        };
        if span.start >= span.end {
            return Err(Error::OffsetOutOfRange {
                doc_id: String::new(),
                start: span.start,
                end: span.end,
                len: map.char_len(),
            });
        }
        let replacement = match strategy {
            SuppressionStrategy::LabelPlaceholder => format!("[{}]", span.label),
            SuppressionStrategy::NumberedPseudonym => {
                let key = (span.label, text[from..to].to_lowercase());
                let k = *numbering.entry(key).or_insert_with(|| {
                    let n = next.entry(span.label).or_insert(0);
                    *n += 1;
                    *n
                });
                format!("[{}-{k}]", span.label)
            }
        };
        out.push_str(&text[cursor..from]);
        out.push_str(&replacement);
        cursor = to;
        replacements.push(Replacement {
            span: span.clone(),
            replacement,
        });
    }
    out.push_str(&text[cursor..]);
    Ok((out, replacements))
}

/// Everything needed to de-identify a document except the live backend
/// connection.
#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    pub tokenizer: TokenizerConfig,
    pub recognizers: RecognizerSet,
    pub backend: BackendConfig,
    pub strategy: SuppressionStrategy,
}

impl Pipeline {
    pub fn validate(&self) -> Result<()> {
        self.recognizers.validate()?;
        self.backend.validate()
    }

    /// All candidate spans for a document: rule recognizers plus backend.
    pub fn candidates(&self, tokens: &[Token], backend: &mut dyn NerBackend) -> Result<Vec<CandidateSpan>> {
        let mut out = self.recognizers.recognize(tokens);
        let tags = tag_tokens(backend, tokens, &self.backend.label_map)?;
        let source = format!("ner:{}", backend.name());
        let mut open: Option<(usize, usize, Label)> = None;
        let close = |open: &mut Option<(usize, usize, Label)>, out: &mut Vec<CandidateSpan>| {
            if let Some((a, b, label)) = open.take() {
                let mut span = CandidateSpan::new(tokens[a].start, tokens[b].end, label, source.clone());
                span.priority += self.backend.priority_bias;
                out.push(span);
            }
        };
        for (i, tag) in tags.iter().enumerate() {
            match tag {
                Tag::O => close(&mut open, &mut out),
                Tag::B(l) => {
                    close(&mut open, &mut out);
                    open = Some((i, i, *l));
                }
                Tag::I(_) => {
                    if let Some(run) = open.as_mut() {
                        run.1 = i;
                    }
                }
            }
        }
        close(&mut open, &mut out);
        Ok(out)
    }
}

/// tokenize → recognizers ∪ backend → merge → suppress.
pub fn deidentify_document(
    doc: &Document,
    pipeline: &Pipeline,
    backend: &mut dyn NerBackend,
) -> Result<(Document, DeidReport)> {
    let tokens = tokenize(&doc.text, &pipeline.tokenizer);
    let candidates = pipeline.candidates(&tokens, backend)?;
    let selected = merge_spans(&candidates);
    let (text, replacements) = suppress(&doc.text, &selected, pipeline.strategy)?;
    let mut counts = BTreeMap::new();
    for r in &replacements {
        *counts.entry(r.span.label).or_insert(0) += 1;
    }
    Ok((
        Document::new(doc.id.clone(), text),
        DeidReport {
            doc_id: doc.id.clone(),
            replacements,
            counts,
        },
    ))
}

pub type DocOutcome = Result<(Document, DeidReport)>;

/// De-identifies a corpus on `workers` threads, each with its own backend
/// connection. Results are in input order and do not depend on `workers`.
/// A failing document yields an `Err` in its slot; only a backend that
/// cannot be started at all fails the whole call.
pub fn deidentify_corpus(docs: &[Document], pipeline: &Pipeline, workers: usize) -> Result<Vec<DocOutcome>> {
    pipeline.validate()?;
    let workers = workers.max(1).min(docs.len().max(1));
    let mut backends = Vec::with_capacity(workers);
    for _ in 0..workers {
        backends.push(pipeline.backend.connect()?);
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<DocOutcome>>> = Mutex::new((0..docs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for mut backend in backends {
            let next = &next;
            let slots = &slots;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(doc) = docs.get(i) else { break };
                let outcome = deidentify_document(doc, pipeline, backend.as_mut());
                slots.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });
    Ok(slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|o| o.expect("every document processed"))
        .collect())
}

// ---------------------------------------------------------------------------
// Report TSV: doc_id start end label source replacement

pub const REPORT_HEADER: &str = "doc_id\tstart\tend\tlabel\tsource\treplacement";

pub fn format_report<'a>(reports: impl IntoIterator<Item = &'a DeidReport>) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for report in reports {
        for r in &report.replacements {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                report.doc_id,
                r.span.start,
                r.span.end,
                r.span.label,
                escape_field(&r.span.source),
                escape_field(&r.replacement)
            ));
        }
    }
    out
}

pub fn load_report(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<SelectedSpan>>> {
    let path = path.as_ref();
    parse_report(&read_file(path)?, path)
}

/// Reads predicted spans back from a report, grouped by document id.
pub fn parse_report(input: &str, path: &Path) -> Result<BTreeMap<String, Vec<SelectedSpan>>> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("doc_id") => {}
        _ => return Err(Error::parse(path, 1, format!("missing header line {REPORT_HEADER:?}"))),
    }
    let mut out: BTreeMap<String, Vec<SelectedSpan>> = BTreeMap::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::parse(path, lineno, format!("expected 6 columns, found {}", cols.len())));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("invalid offset {s:?}")))
        };
        let (start, end) = (num(cols[1])?, num(cols[2])?);
        if start >= end {
            return Err(Error::parse(path, lineno, format!("empty or inverted span {start}..{end}")));
        }
        let label = cols[3].parse::<Label>().map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let source = unescape_field(cols[4]).map_err(|m| Error::parse(path, lineno, m))?;
        out.entry(cols[0].to_string()).or_default().push(SelectedSpan {
            start,
            end,
            label,
            source,
        });
    }
    Ok(out)
}
