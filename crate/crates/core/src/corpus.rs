//! Documents, standoff annotations, tokens and IOB2 tag sequences.
//!
//! All offsets are counted in Unicode scalar values (Rust `char`s), never in
//! bytes. [`CharMap`] converts between the two when slicing.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The closed set of personal-identifier classes. Variant order is the
/// canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Date,
    Num,
    Per,
    Gender,
    Org,
    Mail,
    Loc,
    JobTitle,
    Code,
    Title,
    Website,
}

impl Label {
    pub const ALL: [Label; 11] = [
        Label::Date,
        Label::Num,
        Label::Per,
        Label::Gender,
        Label::Org,
        Label::Mail,
        Label::Loc,
        Label::JobTitle,
        Label::Code,
        Label::Title,
        Label::Website,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Date => "DATE",
            Label::Num => "NUM",
            Label::Per => "PER",
            Label::Gender => "GENDER",
            Label::Org => "ORG",
            Label::Mail => "MAIL",
            Label::Loc => "LOC",
            Label::JobTitle => "JOBTITLE",
            Label::Code => "CODE",
            Label::Title => "TITLE",
            Label::Website => "WEBSITE",
        }
    }

    /// Merge priority; lower wins ties between equally long spans.
    pub fn default_priority(self) -> i16 {
        match self {
            Label::Per => 0,
            Label::Mail => 1,
            Label::Code => 2,
            Label::Loc => 3,
            Label::Org => 4,
            Label::Date => 5,
            Label::JobTitle => 6,
            Label::Title => 7,
            Label::Gender => 8,
            Label::Website => 9,
            Label::Num => 10,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// A gold (or predicted) labelled character span over a document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Annotation {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub label: Label,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, start: usize, end: usize) -> Self {
        Token {
            surface: surface.into(),
            start,
            end,
        }
    }
}

/// An IOB2 tag, generic over the label vocabulary so that raw backend tags
/// (`Tag<String>`) and mapped tags (`Tag<Label>`) share one type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag<L = Label> {
    O,
    B(L),
    I(L),
}

impl<L> Tag<L> {
    pub fn label(&self) -> Option<&L> {
        match self {
            Tag::O => None,
            Tag::B(l) | Tag::I(l) => Some(l),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::O)
    }
}

impl<L: fmt::Display> fmt::Display for Tag<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(l) => write!(f, "B-{l}"),
            Tag::I(l) => write!(f, "I-{l}"),
        }
    }
}

impl<L: FromStr> FromStr for Tag<L> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Tag::O);
        }
        let malformed = || Error::MalformedTag(s.to_string());
        let (prefix, label) = s.split_once('-').ok_or_else(malformed)?;
        if label.is_empty() {
            return Err(malformed());
        }
        let label = label.parse::<L>().map_err(|_| malformed())?;
        match prefix {
            "B" => Ok(Tag::B(label)),
            "I" => Ok(Tag::I(label)),
            _ => Err(malformed()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub token: Token,
    pub tag: Tag,
}

/// How orphan `I-x` tags (not preceded by `B-x`/`I-x`) are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagMode {
    #[default]
    Strict,
    /// Promote orphan `I-x` to `B-x`.
    Repair,
}

/// Checks the I-follows-B/I invariant, returning the index of the first
/// orphan `I` tag.
pub fn first_orphan<L: PartialEq>(tags: &[Tag<L>]) -> Option<usize> {
    let mut prev: Option<&L> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::I(l) if prev != Some(l) => return Some(i),
            _ => prev = tag.label(),
        }
    }
    None
}

/// Promotes every orphan `I-x` to `B-x` in place.
pub fn repair_orphans<L: PartialEq + Clone>(tags: &mut [Tag<L>]) {
    let mut prev: Option<L> = None;
    for tag in tags.iter_mut() {
        if let Tag::I(l) = tag {
            if prev.as_ref() != Some(l) {
                *tag = Tag::B(l.clone());
            }
        }
        prev = tag.label().cloned();
    }
}

/// Byte positions of every char boundary in a string, for char-offset slicing.
#[derive(Debug, Clone)]
pub struct CharMap {
    bytes: Vec<usize>,
}

impl CharMap {
    pub fn new(text: &str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharMap { bytes }
    }

    pub fn char_len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn byte_offset(&self, char_offset: usize) -> Option<usize> {
        self.bytes.get(char_offset).copied()
    }

    pub fn slice<'t>(&self, text: &'t str, start: usize, end: usize) -> Option<&'t str> {
        if start > end {
            return None;
        }
        Some(&text[self.byte_offset(start)?..self.byte_offset(end)?])
    }
}

/// Slices `text` by char offsets.
pub fn slice_chars(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut iter = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let from = iter.nth(start)?;
    let to = if end == start {
        from
    } else {
        iter.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

// ---------------------------------------------------------------------------
// Field escaping shared by the corpus and TSV formats.

pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape_field(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some(other) => return Err(format!("unknown escape sequence \\{other}")),
            None => return Err("dangling backslash at end of field".to_string()),
        }
    }
    Ok(out)
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Corpus files: `<id>\t<escaped text>` per line, `#` comments.

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    parse_corpus(&read_file(path)?, path)
}

pub fn parse_corpus(input: &str, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected <id><TAB><text>"))?;
        if id.is_empty() {
            return Err(Error::parse(path, lineno, "empty document id"));
        }
        let text = unescape_field(text).map_err(|m| Error::parse(path, lineno, m))?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        docs.push(Document::new(id, text));
    }
    Ok(docs)
}

pub fn format_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&doc.id);
        out.push('\t');
        out.push_str(&escape_field(&doc.text));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    write_file(path.as_ref(), &format_corpus(docs))
}

// ---------------------------------------------------------------------------
// Annotation files: TSV `doc_id start end label surface` with a header line.

pub const ANNOTATION_HEADER: &str = "doc_id\tstart\tend\tlabel\tsurface";

/// Parses an annotation file without checking it against any document.
/// Only structural checks (`start < end`, known label) are applied.
pub fn parse_annotations(input: &str, path: &Path) -> Result<Vec<Annotation>> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.starts_with("doc_id") => {}
        _ => return Err(Error::parse(path, 1, format!("missing header line {ANNOTATION_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 5 columns, found {}", cols.len()),
            ));
        }
        let num = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("invalid {what} offset {s:?}")))
        };
        let start = num(cols[1], "start")?;
        let end = num(cols[2], "end")?;
        if start >= end {
            return Err(Error::parse(path, lineno, format!("empty or inverted span {start}..{end}")));
        }
        let label = cols[3]
            .parse::<Label>()
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let surface = unescape_field(cols[4]).map_err(|m| Error::parse(path, lineno, m))?;
        out.push(Annotation {
            doc_id: cols[0].to_string(),
            start,
            end,
            label,
            surface,
        });
    }
    Ok(out)
}

/// Loads annotations and validates each one against its document: the
/// document must exist, offsets must be in range, the surface must equal the
/// text slice and no two annotations of one document may overlap.
pub fn load_annotations(path: impl AsRef<Path>, corpus: &[Document]) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let anns = parse_annotations(&read_file(path)?, path)?;
    validate_annotations(&anns, corpus)?;
    Ok(anns)
}

/// Loads annotations with structural checks only, for when the corpus they
/// refer to is not at hand.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    parse_annotations(&read_file(path)?, path)
}

pub fn validate_annotations(anns: &[Annotation], corpus: &[Document]) -> Result<()> {
    let maps: std::collections::HashMap<&str, (&Document, CharMap)> = corpus
        .iter()
        .map(|d| (d.id.as_str(), (d, CharMap::new(&d.text))))
        .collect();
    for ann in anns {
        let (doc, map) = maps
            .get(ann.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocId(ann.doc_id.clone()))?;
        check_annotation(doc, map, ann)?;
    }
    let mut by_doc: std::collections::BTreeMap<&str, Vec<&Annotation>> = Default::default();
    for ann in anns {
        by_doc.entry(ann.doc_id.as_str()).or_default().push(ann);
    }
    for (doc_id, group) in by_doc {
        check_no_overlap(doc_id, group)?;
    }
    Ok(())
}

fn check_annotation(doc: &Document, map: &CharMap, ann: &Annotation) -> Result<()> {
    let len = map.char_len();
    if ann.start >= ann.end || ann.end > len {
        return Err(Error::OffsetOutOfRange {
            doc_id: doc.id.clone(),
            start: ann.start,
            end: ann.end,
            len,
        });
    }
    let found = map.slice(&doc.text, ann.start, ann.end).unwrap_or_default();
    if found != ann.surface {
        return Err(Error::SurfaceMismatch {
            doc_id: doc.id.clone(),
            start: ann.start,
            end: ann.end,
            expected: ann.surface.clone(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn check_no_overlap<'a>(doc_id: &str, anns: impl IntoIterator<Item = &'a Annotation>) -> Result<()> {
    let mut sorted: Vec<&Annotation> = anns.into_iter().collect();
    sorted.sort_by_key(|a| (a.start, a.end));
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::OverlappingAnnotations {
                doc_id: doc_id.to_string(),
                first: (pair[0].start, pair[0].end),
                first_label: pair[0].label,
                second: (pair[1].start, pair[1].end),
                second_label: pair[1].label,
            });
        }
    }
    Ok(())
}

pub fn format_annotations(anns: &[Annotation]) -> String {
    let mut out = String::from(ANNOTATION_HEADER);
    out.push('\n');
    for a in anns {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            a.doc_id,
            a.start,
            a.end,
            a.label,
            escape_field(&a.surface)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Span <-> IOB2 conversion.

/// Projects character-span annotations onto tokens. A token belongs to an
/// annotation when their ranges intersect; when a token touches several
/// annotations, the one starting first claims it.
pub fn annotations_to_iob2(
    doc: &Document,
    annotations: &[Annotation],
    tokens: &[Token],
) -> Result<Vec<TaggedToken>> {
    let own: Vec<&Annotation> = annotations.iter().filter(|a| a.doc_id == doc.id).collect();
    check_no_overlap(&doc.id, own.iter().copied())?;
    let mut sorted = own;
    sorted.sort_by_key(|a| (a.start, a.end));

    let mut tags = vec![Tag::O; tokens.len()];
    let mut claimed = vec![false; tokens.len()];
    for ann in sorted {
        let mut first = true;
        // tokens are sorted, so the overlapping ones form a contiguous run
        let from = tokens.partition_point(|t| t.end <= ann.start);
        for (i, tok) in tokens.iter().enumerate().skip(from) {
            if tok.start >= ann.end {
                break;
            }
            if claimed[i] {
                continue;
            }
            claimed[i] = true;
            tags[i] = if first { Tag::B(ann.label) } else { Tag::I(ann.label) };
            first = false;
        }
    }
    Ok(tokens
        .iter()
        .cloned()
        .zip(tags)
        .map(|(token, tag)| TaggedToken { token, tag })
        .collect())
}

/// Collapses maximal `B I*` runs into annotations over `doc`.
pub fn iob2_to_spans(doc: &Document, tagged: &[TaggedToken], mode: TagMode) -> Result<Vec<Annotation>> {
    let mut tags: Vec<Tag> = tagged.iter().map(|t| t.tag.clone()).collect();
    match mode {
        TagMode::Strict => {
            if let Some(index) = first_orphan(&tags) {
                return Err(Error::OrphanTag {
                    index,
                    tag: tags[index].to_string(),
                });
            }
        }
        TagMode::Repair => repair_orphans(&mut tags),
    }
    let map = CharMap::new(&doc.text);
    let mut out = Vec::new();
    let mut open: Option<(Label, usize, usize)> = None;
    let flush = |open: &mut Option<(Label, usize, usize)>, out: &mut Vec<Annotation>| -> Result<()> {
        if let Some((label, start, end)) = open.take() {
            let surface = map.slice(&doc.text, start, end).ok_or(Error::OffsetOutOfRange {
                doc_id: doc.id.clone(),
                start,
                end,
                len: map.char_len(),
            })?;
            out.push(Annotation {
                doc_id: doc.id.clone(),
                start,
                end,
                label,
                surface: surface.to_string(),
            });
        }
        Ok(())
    };
    for (tt, tag) in tagged.iter().zip(&tags) {
        match tag {
            Tag::O => flush(&mut open, &mut out)?,
            Tag::B(l) => {
                flush(&mut open, &mut out)?;
                open = Some((*l, tt.token.start, tt.token.end));
            }
            Tag::I(_) => {
                if let Some(run) = open.as_mut() {
                    run.2 = tt.token.end;
                }
            }
        }
    }
    flush(&mut open, &mut out)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// IOB2 files: `<surface>\t<tag>` per token, one blank line ends each document.

pub fn format_iob2(docs: &[Vec<TaggedToken>]) -> Result<String> {
    let mut out = String::new();
    for doc in docs {
        for tt in doc {
            let s = &tt.token.surface;
            if s.is_empty() || s.contains(['\t', '\n', '\r']) {
                return Err(Error::UnwritableSurface(s.clone()));
            }
            out.push_str(s);
            out.push('\t');
            out.push_str(&tt.tag.to_string());
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_iob2(path: impl AsRef<Path>, docs: &[Vec<TaggedToken>]) -> Result<()> {
    write_file(path.as_ref(), &format_iob2(docs)?)
}

/// Parses an IOB2 file. Offsets are not stored in the format; they are
/// recomputed as if the surfaces were joined by single spaces.
pub fn parse_iob2(input: &str, path: &Path, mode: TagMode) -> Result<Vec<Vec<TaggedToken>>> {
    let mut docs = Vec::new();
    let mut current: Vec<TaggedToken> = Vec::new();
    let mut offset = 0usize;
    let mut first_line = 0usize;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() {
            finish_iob2_doc(&mut current, mode, path, first_line, &mut docs)?;
            offset = 0;
            continue;
        }
        if current.is_empty() {
            first_line = lineno;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        let tag = cols[1]
            .parse::<Tag>()
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let len = cols[0].chars().count();
        if len == 0 {
            return Err(Error::parse(path, lineno, "empty token surface"));
        }
        if !current.is_empty() {
            offset += 1;
        }
        current.push(TaggedToken {
            token: Token::new(cols[0], offset, offset + len),
            tag,
        });
        offset += len;
    }
    if !current.is_empty() {
        finish_iob2_doc(&mut current, mode, path, first_line, &mut docs)?;
    }
    Ok(docs)
}

fn finish_iob2_doc(
    current: &mut Vec<TaggedToken>,
    mode: TagMode,
    path: &Path,
    first_line: usize,
    docs: &mut Vec<Vec<TaggedToken>>,
) -> Result<()> {
    let mut tags: Vec<Tag> = current.iter().map(|t| t.tag.clone()).collect();
    match mode {
        TagMode::Strict => {
            if let Some(idx) = first_orphan(&tags) {
                return Err(Error::parse(
                    path,
                    first_line + idx,
                    Error::OrphanTag {
                        index: idx,
                        tag: tags[idx].to_string(),
                    }
                    .to_string(),
                ));
            }
        }
        TagMode::Repair => {
            repair_orphans(&mut tags);
            for (tt, tag) in current.iter_mut().zip(tags) {
                tt.tag = tag;
            }
        }
    }
    docs.push(std::mem::take(current));
    Ok(())
}

pub fn read_iob2(path: impl AsRef<Path>, mode: TagMode) -> Result<Vec<Vec<TaggedToken>>> {
    let path = path.as_ref();
    parse_iob2(&read_file(path)?, path, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Token> {
        crate::tokenizer::tokenize(text, &Default::default())
    }

    fn ann(doc: &Document, start: usize, end: usize, label: Label) -> Annotation {
        Annotation {
            doc_id: doc.id.clone(),
            start,
            end,
            label,
            surface: slice_chars(&doc.text, start, end).unwrap().to_string(),
        }
    }

    fn tags(tagged: &[TaggedToken]) -> Vec<String> {
        tagged.iter().map(|t| t.tag.to_string()).collect()
    }

    #[test]
    fn label_names_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
        assert!("PERSON".parse::<Label>().is_err());
        let mut sorted = Label::ALL;
        sorted.sort();
        assert_eq!(sorted, Label::ALL);
    }

    #[test]
    fn tag_parsing() {
        assert_eq!("O".parse::<Tag>().unwrap(), Tag::O);
        assert_eq!("B-PER".parse::<Tag>().unwrap(), Tag::B(Label::Per));
        assert_eq!("I-JOBTITLE".parse::<Tag>().unwrap(), Tag::I(Label::JobTitle));
        assert_eq!(
            "B-institution".parse::<Tag<String>>().unwrap(),
            Tag::B("institution".to_string())
        );
        for bad in ["", "B", "B-", "X-PER", "B-FOO", "o"] {
            assert!(bad.parse::<Tag>().is_err(), "{bad}");
        }
    }

    #[test]
    fn corpus_records_in_file_order() {
        let docs = parse_corpus("# comment\na\tJohn wrote\\nhi\nb\t\n", Path::new("c")).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0], Document::new("a", "John wrote\nhi"));
        assert_eq!(docs[1], Document::new("b", ""));
        assert!(parse_corpus("", Path::new("c")).unwrap().is_empty());
    }

    #[test]
    fn corpus_duplicate_id_is_named() {
        let err = parse_corpus("a\tx\na\ty\n", Path::new("c")).unwrap_err();
        assert!(matches!(&err, Error::DuplicateId(id) if id == "a"), "{err}");
    }

    #[test]
    fn corpus_malformed_record_reports_line() {
        let err = parse_corpus("a\tx\nno-tab-here\n", Path::new("c.txt")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn corpus_escapes_round_trip() {
        let docs = vec![Document::new("x", "a\\n\tb\r\nc\\")];
        let text = format_corpus(&docs);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_corpus(&text, Path::new("c")).unwrap(), docs);
    }

    #[test]
    fn annotation_validation() {
        let corpus = vec![Document::new("a", "John wrote")];
        let parse = |body: &str| {
            let anns = parse_annotations(&format!("{ANNOTATION_HEADER}\n{body}"), Path::new("g"))?;
            validate_annotations(&anns, &corpus).map(|_| anns)
        };
        let ok = parse("a\t0\t4\tPER\tJohn\n").unwrap();
        assert_eq!(ok[0].label, Label::Per);
        assert!(matches!(parse("a\t5\t11\tPER\twrote!"), Err(Error::OffsetOutOfRange { .. })));
        match parse("a\t0\t4\tPER\tJane") {
            Err(Error::SurfaceMismatch { expected, found, .. }) => {
                assert_eq!(expected, "Jane");
                assert_eq!(found, "John");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("b\t0\t4\tPER\tJohn"), Err(Error::UnknownDocId(_))));
        assert!(matches!(
            parse("a\t0\t4\tPER\tJohn\na\t2\t6\tORG\thn w"),
            Err(Error::OverlappingAnnotations { .. })
        ));
        assert!(parse_annotations("a\t0\t4\tPER\tJohn\n", Path::new("g")).is_err());
    }

    #[test]
    fn annotation_offsets_count_chars() {
        let corpus = vec![Document::new("a", "Zoë Jansen")];
        let anns = parse_annotations(&format!("{ANNOTATION_HEADER}\na\t4\t10\tPER\tJansen\n"), Path::new("g")).unwrap();
        validate_annotations(&anns, &corpus).unwrap();
    }

    #[test]
    fn two_token_name_is_b_then_i() {
        let doc = Document::new("a", "John Doe wrote");
        let t = annotations_to_iob2(&doc, &[ann(&doc, 0, 8, Label::Per)], &toks(&doc.text)).unwrap();
        assert_eq!(tags(&t), ["B-PER", "I-PER", "O"]);
    }

    #[test]
    fn no_annotations_all_outside() {
        let doc = Document::new("a", "nothing to see here");
        let t = annotations_to_iob2(&doc, &[], &toks(&doc.text)).unwrap();
        assert!(t.iter().all(|t| t.tag == Tag::O));
    }

    #[test]
    fn partial_overlap_tags_whole_token() {
        let doc = Document::new("a", "mail j.doe@minfin.nl now");
        let t = annotations_to_iob2(&doc, &[ann(&doc, 5, 10, Label::Mail)], &toks(&doc.text)).unwrap();
        assert_eq!(tags(&t), ["O", "B-MAIL", "O"]);
    }

    #[test]
    fn overlapping_annotations_rejected() {
        let doc = Document::new("a", "John Doe");
        let err = annotations_to_iob2(
            &doc,
            &[ann(&doc, 0, 4, Label::Per), ann(&doc, 2, 8, Label::Org)],
            &toks(&doc.text),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OverlappingAnnotations { first: (0, 4), second: (2, 8), .. }));
    }

    #[test]
    fn spans_from_tags() {
        let doc = Document::new("a", "John Doe .");
        let mk = |tags: [Tag; 3]| -> Vec<TaggedToken> {
            toks(&doc.text)
                .into_iter()
                .zip(tags)
                .map(|(token, tag)| TaggedToken { token, tag })
                .collect()
        };
        let spans = iob2_to_spans(&doc, &mk([Tag::B(Label::Per), Tag::I(Label::Per), Tag::O]), TagMode::Strict).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].start, spans[0].end, spans[0].surface.as_str()), (0, 8, "John Doe"));
        assert!(iob2_to_spans(&doc, &mk([Tag::O, Tag::O, Tag::O]), TagMode::Strict).unwrap().is_empty());
        let two = iob2_to_spans(&doc, &mk([Tag::B(Label::Per), Tag::B(Label::Per), Tag::O]), TagMode::Strict).unwrap();
        assert_eq!(
            two.iter().map(|a| (a.start, a.end)).collect::<Vec<_>>(),
            [(0, 4), (5, 8)]
        );
    }

    #[test]
    fn orphan_i_strict_vs_repair() {
        let doc = Document::new("a", "John Doe .");
        let tagged: Vec<TaggedToken> = toks(&doc.text)
            .into_iter()
            .zip([Tag::O, Tag::I(Label::Per), Tag::O])
            .map(|(token, tag)| TaggedToken { token, tag })
            .collect();
        let err = iob2_to_spans(&doc, &tagged, TagMode::Strict).unwrap_err();
        assert!(matches!(err, Error::OrphanTag { index: 1, .. }));
        let repaired = iob2_to_spans(&doc, &tagged, TagMode::Repair).unwrap();
        assert_eq!(repaired[0].surface, "Doe");
    }

    #[test]
    fn iob2_line_format() {
        let doc = vec![TaggedToken {
            token: Token::new("John", 0, 4),
            tag: Tag::B(Label::Per),
        }];
        assert_eq!(format_iob2(&[doc]).unwrap(), "John\tB-PER\n\n");
        assert_eq!(format_iob2(&[vec![]]).unwrap(), "\n");
    }

    #[test]
    fn iob2_read_errors() {
        let p = Path::new("x.iob2");
        assert!(matches!(parse_iob2("John\tB-PER\textra\n", p, TagMode::Strict), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_iob2("a\tO\nJohn\tB-PERSON\n", p, TagMode::Strict), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_iob2("a\tO\nDoe\tI-PER\n\n", p, TagMode::Strict), Err(Error::Parse { line: 2, .. })));
        let fixed = parse_iob2("a\tO\nDoe\tI-PER\n\n", p, TagMode::Repair).unwrap();
        assert_eq!(fixed[0][1].tag, Tag::B(Label::Per));
    }

    #[test]
    fn iob2_empty_documents_survive() {
        let docs = vec![vec![], vec![TaggedToken { token: Token::new("a", 0, 1), tag: Tag::O }], vec![]];
        let text = format_iob2(&docs).unwrap();
        let back = parse_iob2(&text, Path::new("x"), TagMode::Strict).unwrap();
        assert_eq!(back, docs);
    }

    #[test]
    fn slice_chars_handles_multibyte() {
        assert_eq!(slice_chars("Zoë x", 2, 3), Some("ë"));
        assert_eq!(slice_chars("Zoë", 3, 3), Some(""));
        assert_eq!(slice_chars("Zoë", 2, 4), None);
        let map = CharMap::new("Zoë x");
        assert_eq!(map.slice("Zoë x", 0, 3), Some("Zoë"));
    }
}
