//! Unsupervised job-title dataset construction: expand a title list with
//! and without a seniority prefix, then tag every title occurrence in raw
//! texts as `B-JOBTITLE`/`I-JOBTITLE`, longest titles first.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::corpus::{read_file, Document, Label, Tag, TaggedToken, Token};
use crate::tokenizer::{tokenize, TokenizerConfig};
use crate::error::Result;

pub const DEFAULT_PREFIX: &str = "senior";

/// Deduplicated titles sorted by descending character count, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JobTitleList {
    titles: Vec<String>,
}

fn normalize(title: &str) -> String {
    title.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl JobTitleList {
    /// Trims, collapses inner whitespace, drops empty entries and
    /// case-insensitive duplicates (first spelling kept), then sorts.
    pub fn prepare<S: AsRef<str>>(raw: impl IntoIterator<Item = S>) -> Self {
        let mut seen = HashSet::new();
        let mut titles: Vec<String> = raw
            .into_iter()
            .map(|t| normalize(t.as_ref()))
            .filter(|t| !t.is_empty() && seen.insert(t.to_lowercase()))
            .collect();
        titles.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
        JobTitleList { titles }
    }

    pub fn titles(&self) -> &[String] {
        &self.titles
    }

    pub fn len(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    /// Removes generic titles named in `stoplist`, compared
    /// case-insensitively.
    pub fn without<S: AsRef<str>>(&self, stoplist: impl IntoIterator<Item = S>) -> Self {
        let stop: HashSet<String> = stoplist.into_iter().map(|s| normalize(s.as_ref()).to_lowercase()).collect();
        JobTitleList {
            titles: self
                .titles
                .iter()
                .filter(|t| !stop.contains(&t.to_lowercase()))
                .cloned()
                .collect(),
        }
    }
}

/// Reads a title or stop-list file: one entry per line, `#` comments.
pub fn load_title_file(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    Ok(read_file(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Adds the unprefixed form of every prefixed title and the prefixed form
/// of every unprefixed title. The prefix is applied once: a title is first
/// reduced to its base by stripping leading `"<prefix> "` occurrences, and
/// only `base` and `"<prefix> base"` are added.
pub fn expand_job_titles<S: AsRef<str>>(raw: &[S], prefix: &str) -> JobTitleList {
    let prefix = normalize(prefix);
    let lead: Vec<String> = prefix.split(' ').map(str::to_lowercase).collect();
    let mut all: Vec<String> = raw.iter().map(|t| normalize(t.as_ref())).collect();
    if prefix.is_empty() {
        return JobTitleList::prepare(all);
    }
    let mut derived = Vec::new();
    for title in &all {
        let mut words: &[&str] = &title.split(' ').collect::<Vec<_>>();
        while words.len() > lead.len() && words.iter().zip(&lead).all(|(w, p)| w.to_lowercase() == *p) {
            words = &words[lead.len()..];
        }
        let base = words.join(" ");
        if base.is_empty() {
            continue;
        }
        if base.to_lowercase() != prefix.to_lowercase() {
            derived.push(format!("{prefix} {base}"));
        }
        derived.push(base);
    }
    all.extend(derived);
    JobTitleList::prepare(all)
}

/// Title token sequences indexed by first (lowercased) token.
struct TitleIndex {
    by_first: HashMap<String, Vec<usize>>,
    sequences: Vec<Vec<String>>,
}

impl TitleIndex {
    fn new(titles: &JobTitleList, config: &TokenizerConfig) -> Self {
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        let mut sequences = Vec::with_capacity(titles.len());
        for (rank, title) in titles.titles().iter().enumerate() {
            let seq: Vec<String> = tokenize(title, config).into_iter().map(|t| t.surface.to_lowercase()).collect();
            if let Some(first) = seq.first() {
                by_first.entry(first.clone()).or_default().push(rank);
            }
            sequences.push(seq);
        }
        TitleIndex { by_first, sequences }
    }

    fn tag(&self, tokens: &[Token]) -> Vec<Tag> {
        let folded: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
        // (rank, position, length) of every occurrence
        let mut occurrences = Vec::new();
        for (pos, word) in folded.iter().enumerate() {
            for &rank in self.by_first.get(word).into_iter().flatten() {
                let seq = &self.sequences[rank];
                if folded.get(pos..pos + seq.len()) == Some(seq.as_slice()) {
                    occurrences.push((rank, pos, seq.len()));
                }
            }
        }
        occurrences.sort_unstable();
        let mut tags = vec![Tag::O; tokens.len()];
        for (_, pos, len) in occurrences {
            if tags[pos..pos + len].iter().any(|t| !t.is_outside()) {
                continue;
            }
            tags[pos] = Tag::B(Label::JobTitle);
            for t in &mut tags[pos + 1..pos + len] {
                *t = Tag::I(Label::JobTitle);
            }
        }
        tags
    }
}

/// Tokenizes each text and tags job-title occurrences. Titles are tried in
/// list order (longest first); a token that is already tagged is never
/// retagged.
pub fn label_texts(texts: &[Document], titles: &JobTitleList) -> Vec<(Document, Vec<TaggedToken>)> {
    let config = TokenizerConfig::default();
    let index = TitleIndex::new(titles, &config);
    texts
        .iter()
        .map(|doc| {
            let tokens = tokenize(&doc.text, &config);
            let tags = index.tag(&tokens);
            let tagged = tokens.into_iter().zip(tags).map(|(token, tag)| TaggedToken { token, tag }).collect();
            (doc.clone(), tagged)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetStats {
    pub documents: usize,
    pub tokens: usize,
    pub entities: usize,
    /// Distinct lowercased entity surfaces.
    pub distinct_titles: usize,
    /// Most frequent lowercased entity surfaces, by count then surface.
    pub top: Vec<(String, usize)>,
}

pub fn dataset_stats(labeled: &[Vec<TaggedToken>], top_k: usize) -> DatasetStats {
    let mut freq: HashMap<String, usize> = HashMap::new();
    let mut stats = DatasetStats {
        documents: labeled.len(),
        ..Default::default()
    };
    for doc in labeled {
        stats.tokens += doc.len();
        let mut current: Option<Vec<&str>> = None;
        let mut flush = |current: &mut Option<Vec<&str>>| {
            if let Some(words) = current.take() {
                *freq.entry(words.join(" ").to_lowercase()).or_insert(0) += 1;
            }
        };
        for tt in doc {
            match &tt.tag {
                Tag::B(_) => {
                    flush(&mut current);
                    stats.entities += 1;
                    current = Some(vec![&tt.token.surface]);
                }
                Tag::I(_) => {
                    if let Some(words) = current.as_mut() {
                        words.push(&tt.token.surface);
                    }
                }
                Tag::O => flush(&mut current),
            }
        }
        flush(&mut current);
    }
    stats.distinct_titles = freq.len();
    let mut top: Vec<(String, usize)> = freq.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    top.truncate(top_k);
    stats.top = top;
    stats
}
