//! Rule-based candidate span producers.
//!
//! Every recognizer works on the token stream and only emits spans that
//! start at a token start and end at a token end.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::{read_file, Label, Token};
use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, TokenizerConfig, EMAIL_PATTERN, URL_PATTERN};

/// A labelled span proposed by one recognizer or backend.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateSpan {
    pub start: usize,
    pub end: usize,
    pub label: Label,
    pub source: String,
    /// Lower wins ties in merging.
    pub priority: i16,
}

impl CandidateSpan {
    pub fn new(start: usize, end: usize, label: Label, source: impl Into<String>) -> Self {
        debug_assert!(start < end);
        CandidateSpan {
            start,
            end,
            label,
            source: source.into(),
            priority: label.default_priority(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    fn over(tokens: &[Token], first: usize, last: usize, label: Label, source: &str) -> Self {
        CandidateSpan::new(tokens[first].start, tokens[last].end, label, source)
    }
}

fn contiguous(a: &Token, b: &Token) -> bool {
    a.end == b.start
}

// ---------------------------------------------------------------------------
// Numbers

static DIGIT_GROUPS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9]+(?:[-'][0-9]+)*$").unwrap());

/// Flags tokens made of digits (optionally grouped by interior hyphens)
/// that contain a run of at least two digits. Single digits are never
/// flagged.
pub fn recognize_numbers(tokens: &[Token]) -> Vec<CandidateSpan> {
    tokens
        .iter()
        .filter(|t| DIGIT_GROUPS.is_match(&t.surface))
        .filter(|t| t.surface.split(['-', '\'']).any(|run| run.len() >= 2))
        .map(|t| CandidateSpan::new(t.start, t.end, Label::Num, "pattern:num"))
        .collect()
}

// ---------------------------------------------------------------------------
// Dates

const MONTHS: [&str; 12] = [
    "januari",
    "februari",
    "maart",
    "april",
    "mei",
    "juni",
    "juli",
    "augustus",
    "september",
    "oktober",
    "november",
    "december",
];

const MONTH_ABBREVIATIONS: [&str; 13] = [
    "jan", "feb", "mrt", "mar", "apr", "mei", "jun", "jul", "aug", "sep", "okt", "nov", "dec",
];

static DAY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([0-9]{1,2})(?:e|de|ste)?$").unwrap());
static DMY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([0-9]{1,2})-([0-9]{1,2})-([0-9]{2}|[0-9]{4})$").unwrap());
static YMD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([0-9]{4})-([0-9]{1,2})-([0-9]{1,2})$").unwrap());

enum Month {
    Full,
    Abbreviated,
}

fn month(s: &str) -> Option<Month> {
    let lower = s.to_lowercase();
    if MONTHS.contains(&lower.as_str()) {
        Some(Month::Full)
    } else if MONTH_ABBREVIATIONS.contains(&lower.as_str()) {
        Some(Month::Abbreviated)
    } else {
        None
    }
}

fn day(s: &str) -> bool {
    DAY.captures(&s.to_lowercase())
        .and_then(|c| c[1].parse::<u32>().ok())
        .is_some_and(|d| (1..=31).contains(&d))
}

fn numeric_day(s: &str) -> bool {
    s.len() <= 2 && s.parse::<u32>().is_ok_and(|d| (1..=31).contains(&d))
}

fn numeric_month(s: &str) -> bool {
    s.len() <= 2 && s.parse::<u32>().is_ok_and(|m| (1..=12).contains(&m))
}

fn year(s: &str) -> bool {
    s.len() == 4 && s.parse::<u32>().is_ok_and(|y| (1900..=2099).contains(&y))
}

fn short_or_full_year(s: &str) -> bool {
    (s.len() == 2 && s.bytes().all(|b| b.is_ascii_digit())) || year(s)
}

fn numeric_date_token(s: &str) -> bool {
    if let Some(c) = DMY.captures(s) {
        return numeric_day(&c[1]) && numeric_month(&c[2]) && short_or_full_year(&c[3]);
    }
    if let Some(c) = YMD.captures(s) {
        return year(&c[1]) && numeric_month(&c[2]) && numeric_day(&c[3]);
    }
    false
}

/// Returns the index of the last token of the month word, absorbing a
/// period glued to an abbreviation (`nov.`).
fn month_end(tokens: &[Token], i: usize) -> Option<usize> {
    match month(&tokens.get(i)?.surface)? {
        Month::Full => Some(i),
        Month::Abbreviated => match tokens.get(i + 1) {
            Some(dot) if dot.surface == "." && contiguous(&tokens[i], dot) => Some(i + 1),
            _ => Some(i),
        },
    }
}

/// Longest date starting at token `i`, as the index of its last token.
fn date_at(tokens: &[Token], i: usize) -> Option<usize> {
    let s = tokens[i].surface.as_str();
    let mut best: Option<usize> = None;
    let mut offer = |end: usize| best = Some(best.map_or(end, |b: usize| b.max(end)));

    // day month [year]
    if day(s) {
        if let Some(m) = month_end(tokens, i + 1) {
            offer(m);
            if tokens.get(m + 1).is_some_and(|t| year(&t.surface)) {
                offer(m + 1);
            }
        }
    }
    // month year
    if let Some(m) = month_end(tokens, i) {
        if tokens.get(m + 1).is_some_and(|t| year(&t.surface)) {
            offer(m + 1);
        }
    }
    if numeric_date_token(s) {
        offer(i);
    }
    // d/m/y and d.m.y split by the tokenizer into five glued tokens
    if let Some(w) = tokens.get(i..i + 5) {
        let glued = w.windows(2).all(|p| contiguous(&p[0], &p[1]));
        let sep = w[1].surface.as_str();
        if glued
            && (sep == "/" || sep == ".")
            && w[3].surface == sep
            && numeric_day(&w[0].surface)
            && numeric_month(&w[2].surface)
            && short_or_full_year(&w[4].surface)
        {
            offer(i + 4);
        }
    }
    if year(s) {
        offer(i);
    }
    best
}

/// Dutch date expressions: `5 november [2016]`, `5e nov. 2016`,
/// `oktober 2016`, `03-11-2016`, `03/11/2016`, `2016-11-03` and bare years
/// 1900–2099. Weekday names are never flagged.
pub fn recognize_dates(tokens: &[Token]) -> Vec<CandidateSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match date_at(tokens, i) {
            Some(last) => {
                out.push(CandidateSpan::over(tokens, i, last, Label::Date, "pattern:date"));
                i = last + 1;
            }
            None => i += 1,
        }
    }
    out
}

// ---------------------------------------------------------------------------
// E-mail addresses and websites

static EMAIL_FULL: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("(?i)^(?:{EMAIL_PATTERN})$")).unwrap());
static EMAIL_HEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^[a-z0-9._%+\-]+@[a-z0-9.\-]*$").unwrap());
static URL_FULL: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("^(?:{URL_PATTERN})$")).unwrap());

/// Longest span of tokens a window may cover in the whitespace repair.
const REPAIR_WINDOW: usize = 12;

pub fn is_email(s: &str) -> bool {
    EMAIL_FULL.is_match(s)
}

pub fn is_website(s: &str) -> bool {
    !s.contains('@') && URL_FULL.is_match(s)
}

/// One `Mail` span per e-mail token, matched case-insensitively. Addresses
/// broken by a single stray space (`j.doe@minfin .nl`) are joined back into
/// one span with source `pattern:mail-repair`.
pub fn recognize_emails(tokens: &[Token]) -> Vec<CandidateSpan> {
    let mut out: Vec<CandidateSpan> = tokens
        .iter()
        .filter(|t| is_email(&t.surface))
        .map(|t| CandidateSpan::new(t.start, t.end, Label::Mail, "pattern:mail"))
        .collect();
    out.extend(repair_split_emails(tokens));
    out.sort();
    out
}

fn repair_split_emails(tokens: &[Token]) -> Vec<CandidateSpan> {
    let mut out = Vec::new();
    let mut k = 0;
    // k is the last token before the stray space
    while k + 1 < tokens.len() {
        if tokens[k + 1].start - tokens[k].end != 1 {
            k += 1;
            continue;
        }
        // leftmost start of a glued block ending at k that reads local@domain
        let mut block_start = k;
        while block_start > 0 && contiguous(&tokens[block_start - 1], &tokens[block_start]) && k - block_start < REPAIR_WINDOW {
            block_start -= 1;
        }
        let head = (block_start..=k).find_map(|s| {
            let text: String = tokens[s..=k].iter().map(|t| t.surface.as_str()).collect();
            (EMAIL_HEAD.is_match(&text) && !is_email(&text)).then_some((s, text))
        });
        let Some((first, head)) = head else {
            k += 1;
            continue;
        };
        let mut tail = String::new();
        let mut last = None;
        let mut j = k + 1;
        while j < tokens.len() && j - k <= REPAIR_WINDOW {
            if j > k + 1 && !contiguous(&tokens[j - 1], &tokens[j]) {
                break;
            }
            tail.push_str(&tokens[j].surface);
            if is_email(&format!("{head}{tail}")) {
                last = Some(j);
            }
            j += 1;
        }
        match last {
            Some(last) => {
                out.push(CandidateSpan::over(tokens, first, last, Label::Mail, "pattern:mail-repair"));
                k = last + 1;
            }
            None => k += 1,
        }
    }
    out
}

/// `scheme://...`, `www....` or bare `host.tld` tokens. Anything containing
/// `@` is left to the e-mail recognizer.
pub fn recognize_websites(tokens: &[Token]) -> Vec<CandidateSpan> {
    tokens
        .iter()
        .filter(|t| is_website(&t.surface))
        .map(|t| CandidateSpan::new(t.start, t.end, Label::Website, "pattern:website"))
        .collect()
}

// ---------------------------------------------------------------------------
// Account codes

static IBAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z]{2}[0-9]{2}[A-Za-z0-9]{10,30}$").unwrap());
static IBAN_HEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z]{2}[0-9]{2}$").unwrap());
static IBAN_GROUP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Za-z0-9]{1,4}$").unwrap());

/// User-supplied code patterns, each matched against whole tokens.
#[derive(Debug, Clone, Default)]
pub struct CodePatterns {
    patterns: Vec<(String, Regex)>,
}

impl CodePatterns {
    pub fn new<S: AsRef<str>>(patterns: impl IntoIterator<Item = S>) -> Result<Self> {
        let patterns = patterns
            .into_iter()
            .map(|p| {
                let p = p.as_ref();
                Regex::new(&format!("^(?:{p})$"))
                    .map(|re| (p.to_string(), re))
                    .map_err(|e| Error::InvalidPattern {
                        pattern: p.to_string(),
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(CodePatterns { patterns })
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    fn matches(&self, s: &str) -> bool {
        self.patterns.iter().any(|(_, re)| re.is_match(s))
    }
}

/// IBANs (`NL91ABNA0417164300`, or in groups of four `NL91 ABNA 0417 1643 00`)
/// plus any user pattern. Checksums are not verified.
pub fn recognize_codes(tokens: &[Token], user: &CodePatterns) -> Vec<CandidateSpan> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let s = tokens[i].surface.as_str();
        if IBAN.is_match(s) {
            out.push(CandidateSpan::over(tokens, i, i, Label::Code, "pattern:code"));
        } else if let Some(last) = grouped_iban(tokens, i) {
            out.push(CandidateSpan::over(tokens, i, last, Label::Code, "pattern:code"));
            i = last + 1;
            continue;
        } else if user.matches(s) {
            out.push(CandidateSpan::over(tokens, i, i, Label::Code, "pattern:code-user"));
        }
        i += 1;
    }
    out
}

fn grouped_iban(tokens: &[Token], i: usize) -> Option<usize> {
    if !IBAN_HEAD.is_match(&tokens[i].surface) {
        return None;
    }
    let mut tail = 0;
    let mut best = None;
    let mut j = i + 1;
    while j < tokens.len() && tokens[j].start - tokens[j - 1].end == 1 && IBAN_GROUP.is_match(&tokens[j].surface) {
        tail += tokens[j].surface.len();
        if tail > 30 {
            break;
        }
        if tail >= 10 {
            best = Some(j);
        }
        j += 1;
    }
    best
}

// ---------------------------------------------------------------------------
// Lexicons

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<String, usize>,
    terminal: bool,
}

/// A labelled gazetteer matched over token sequences. Multi-word entries
/// are tokenized with the default tokenizer, so `de heer` matches the two
/// tokens `de`, `heer`.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub label: Label,
    pub case_sensitive: bool,
    entries: BTreeSet<String>,
    categories: HashMap<String, String>,
    nodes: Vec<TrieNode>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(label: Label, entries: impl IntoIterator<Item = S>, case_sensitive: bool) -> Result<Self> {
        let mut lex = Lexicon {
            label,
            case_sensitive,
            entries: BTreeSet::new(),
            categories: HashMap::new(),
            nodes: vec![TrieNode::default()],
        };
        for e in entries {
            lex.insert(e.as_ref(), None)?;
        }
        Ok(lex)
    }

    /// Parses a lexicon file body: one entry per line, `#` comments,
    /// optional second TAB-separated column naming a category.
    pub fn parse(label: Label, input: &str, case_sensitive: bool, path: &Path) -> Result<Self> {
        let mut lex = Lexicon::new::<&str>(label, [], case_sensitive)?;
        for (i, line) in input.lines().enumerate() {
            let line = line.trim_end();
            if line.trim_start().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (entry, category) = match line.split_once('\t') {
                Some((e, c)) => (e, Some(c.trim())),
                None => (line, None),
            };
            lex.insert(entry, category)
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn load(label: Label, path: impl AsRef<Path>, case_sensitive: bool) -> Result<Self> {
        let path = path.as_ref();
        Lexicon::parse(label, &read_file(path)?, case_sensitive, path)
    }

    /// The bundled Dutch gender-word list.
    pub fn default_gender() -> Self {
        Lexicon::parse(Label::Gender, include_str!("../lexicons/gender.txt"), false, Path::new("gender.txt"))
            .expect("bundled lexicon is valid")
    }

    /// The bundled title and salutation list (categories: salutation,
    /// degree, nobility).
    pub fn default_titles() -> Self {
        Lexicon::parse(Label::Title, include_str!("../lexicons/titles.txt"), false, Path::new("titles.txt"))
            .expect("bundled lexicon is valid")
    }

    fn fold(&self, s: &str) -> String {
        if self.case_sensitive {
            s.to_string()
        } else {
            s.to_lowercase()
        }
    }

    fn insert(&mut self, entry: &str, category: Option<&str>) -> Result<()> {
        let entry = entry.trim();
        if entry.is_empty() {
            return Err(Error::Config(format!("empty entry in {} lexicon", self.label)));
        }
        let words = tokenize(entry, &TokenizerConfig::default());
        let mut node = 0;
        for w in &words {
            let key = self.fold(&w.surface);
            node = match self.nodes[node].children.get(&key) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(key, next);
                    next
                }
            };
        }
        self.nodes[node].terminal = true;
        if let Some(c) = category.filter(|c| !c.is_empty()) {
            self.categories.insert(entry.to_string(), c.to_string());
        }
        self.entries.insert(entry.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    pub fn category(&self, entry: &str) -> Option<&str> {
        self.categories.get(entry).map(String::as_str)
    }

    /// A copy without the entries whose category is in `drop`.
    pub fn without_categories(&self, drop: &[&str]) -> Result<Self> {
        let mut lex = Lexicon::new::<&str>(self.label, [], self.case_sensitive)?;
        for e in &self.entries {
            let cat = self.category(e);
            if cat.is_some_and(|c| drop.contains(&c)) {
                continue;
            }
            lex.insert(e, cat)?;
        }
        Ok(lex)
    }

    /// Number of tokens of the longest entry matching at `tokens[i..]`.
    fn longest_at(&self, folded: &[String], i: usize) -> Option<usize> {
        let mut node = 0;
        let mut best = None;
        for (n, word) in folded[i..].iter().enumerate() {
            match self.nodes[node].children.get(word) {
                Some(&next) => node = next,
                None => break,
            }
            if self.nodes[node].terminal {
                best = Some(n + 1);
            }
        }
        best
    }

    /// Matches (first token, last token) pairs, leftmost-longest and
    /// non-overlapping.
    fn match_indices(&self, tokens: &[Token]) -> Vec<(usize, usize)> {
        let folded: Vec<String> = tokens.iter().map(|t| self.fold(&t.surface)).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.longest_at(&folded, i) {
                Some(n) => {
                    out.push((i, i + n - 1));
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

/// Leftmost-longest whole-token lexicon lookup. A matched region is
/// consumed, so one lexicon never yields overlapping spans.
pub fn lexicon_match(tokens: &[Token], lexicon: &Lexicon) -> Vec<CandidateSpan> {
    let source = format!("lexicon:{}", lexicon.label);
    lexicon
        .match_indices(tokens)
        .into_iter()
        .map(|(a, b)| CandidateSpan::over(tokens, a, b, lexicon.label, &source))
        .collect()
}

pub fn recognize_gender(tokens: &[Token], gender: &Lexicon) -> Vec<CandidateSpan> {
    lexicon_match(tokens, gender)
        .into_iter()
        .map(|mut s| {
            s.label = Label::Gender;
            s.priority = Label::Gender.default_priority();
            s.source = "lexicon:GENDER".to_string();
            s
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Prefix-triggered person names

const TUSSENVOEGSELS: [&str; 5] = ["van", "de", "der", "den", "ter"];
const MAX_NAME_WORDS: usize = 3;

fn capitalized(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else { return false };
    first.is_uppercase() && chars.all(|c| c.is_alphabetic() || matches!(c, '-' | '\'' | '\u{2019}'))
}

fn initial(s: &str) -> bool {
    let mut chars = s.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Each title-lexicon hit becomes a `Title` span. When it is followed by one
/// to three capitalized words, with lowercase tussenvoegsels (`van`, `de`,
/// `der`, `den`, `ter`) allowed before and between them, those words become
/// one `Per` span. A period glued to the title (`dhr.`) or to an initial
/// (`J.`) is skipped over.
pub fn recognize_prefixed_person(tokens: &[Token], titles: &Lexicon) -> Vec<CandidateSpan> {
    let mut out = Vec::new();
    for (a, b) in titles.match_indices(tokens) {
        out.push(CandidateSpan::over(tokens, a, b, Label::Title, "prefix:title"));
        let mut i = b + 1;
        if tokens.get(i).is_some_and(|t| t.surface == "." && contiguous(&tokens[b], t)) {
            i += 1;
        }
        let mut first = None;
        let mut last = None;
        let mut words = 0;
        while i < tokens.len() && words < MAX_NAME_WORDS {
            let s = tokens[i].surface.as_str();
            if TUSSENVOEGSELS.contains(&s) {
                first.get_or_insert(i);
                i += 1;
            } else if capitalized(s) {
                first.get_or_insert(i);
                words += 1;
                last = Some(i);
                i += 1;
                if initial(s) && tokens.get(i).is_some_and(|t| t.surface == "." && contiguous(&tokens[i - 1], t)) {
                    last = Some(i);
                    i += 1;
                }
            } else {
                break;
            }
        }
        if let (Some(f), Some(l)) = (first, last) {
            out.push(CandidateSpan::over(tokens, f, l, Label::Per, "prefix:person"));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Recognizer set

/// Which rule recognizers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecognizerToggles {
    pub numbers: bool,
    pub dates: bool,
    pub emails: bool,
    pub websites: bool,
    pub codes: bool,
    pub gender: bool,
    pub titles: bool,
    pub lists: bool,
}

impl Default for RecognizerToggles {
    fn default() -> Self {
        RecognizerToggles {
            numbers: true,
            dates: true,
            emails: true,
            websites: true,
            codes: true,
            gender: true,
            titles: true,
            lists: true,
        }
    }
}

/// All rule recognizers with their lexicons and patterns, ready to run.
#[derive(Debug, Clone)]
pub struct RecognizerSet {
    pub toggles: RecognizerToggles,
    pub gender: Lexicon,
    pub titles: Lexicon,
    /// Context lists (names, organisations, locations, job titles, ...).
    pub lists: Vec<Lexicon>,
    pub code_patterns: CodePatterns,
}

impl Default for RecognizerSet {
    fn default() -> Self {
        RecognizerSet {
            toggles: RecognizerToggles::default(),
            gender: Lexicon::default_gender(),
            titles: Lexicon::default_titles(),
            lists: Vec::new(),
            code_patterns: CodePatterns::default(),
        }
    }
}

impl RecognizerSet {
    pub fn validate(&self) -> Result<()> {
        let empty = |on: bool, lex: &Lexicon| {
            if on && lex.is_empty() {
                Err(Error::Config(format!("{} lexicon is enabled but empty", lex.label)))
            } else {
                Ok(())
            }
        };
        empty(self.toggles.gender, &self.gender)?;
        empty(self.toggles.titles, &self.titles)?;
        for lex in &self.lists {
            empty(self.toggles.lists, lex)?;
        }
        Ok(())
    }

    pub fn recognize(&self, tokens: &[Token]) -> Vec<CandidateSpan> {
        let t = &self.toggles;
        let mut out = Vec::new();
        if t.numbers {
            out.extend(recognize_numbers(tokens));
        }
        if t.dates {
            out.extend(recognize_dates(tokens));
        }
        if t.emails {
            out.extend(recognize_emails(tokens));
        }
        if t.websites {
            out.extend(recognize_websites(tokens));
        }
        if t.codes {
            out.extend(recognize_codes(tokens, &self.code_patterns));
        }
        if t.gender {
            out.extend(recognize_gender(tokens, &self.gender));
        }
        if t.titles {
            out.extend(recognize_prefixed_person(tokens, &self.titles));
        }
        if t.lists {
            for lex in &self.lists {
                out.extend(lexicon_match(tokens, lex));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::slice_chars;
    use proptest::prelude::*;

    fn toks(text: &str) -> Vec<Token> {
        tokenize(text, &TokenizerConfig::default())
    }

    fn spans(text: &str, found: &[CandidateSpan]) -> Vec<(String, Label)> {
        found
            .iter()
            .map(|s| (slice_chars(text, s.start, s.end).unwrap().to_string(), s.label))
            .collect()
    }

    fn surfaces_of(text: &str, found: Vec<CandidateSpan>) -> Vec<String> {
        spans(text, &found).into_iter().map(|(s, _)| s).collect()
    }

    #[test]
    fn number_rule() {
        assert!(recognize_numbers(&toks("1")).is_empty());
        assert!(recognize_numbers(&toks("2")).is_empty());
        assert_eq!(surfaces_of("10", recognize_numbers(&toks("10"))), ["10"]);
        let text = "My employee number is 98706540";
        assert_eq!(surfaces_of(text, recognize_numbers(&toks(text))), ["98706540"]);
        let text = "van 35 km naar 41 km, 1 keer, 06-12345678, 1-2";
        assert_eq!(surfaces_of(text, recognize_numbers(&toks(text))), ["35", "41", "06-12345678"]);
        assert!(recognize_numbers(&toks("35km")).is_empty());
    }

    #[test]
    fn dates() {
        let text = "sinds 5 november";
        assert_eq!(surfaces_of(text, recognize_dates(&toks(text))), ["5 november"]);
        assert!(recognize_dates(&toks("zondag en maandag")).is_empty());
        assert_eq!(surfaces_of("03-11-2016", recognize_dates(&toks("03-11-2016"))), ["03-11-2016"]);
        let text = "vanaf 9 oktober 2016, in oktober 2016 en op 03/11/2016 of 5e nov. 2017 of 2016-10-09.";
        assert_eq!(
            surfaces_of(text, recognize_dates(&toks(text))),
            ["9 oktober 2016", "oktober 2016", "03/11/2016", "5e nov. 2017", "2016-10-09"]
        );
        let text = "in 1999 en 2100 en 1850";
        assert_eq!(surfaces_of(text, recognize_dates(&toks(text))), ["1999"]);
        assert!(recognize_dates(&toks("32 november")).is_empty());
        assert!(recognize_dates(&toks("12-13-2016")).is_empty());
        let text = "03 / 11 / 2016";
        assert_eq!(surfaces_of(text, recognize_dates(&toks(text))), ["2016"]);
        assert!(recognize_dates(&toks("november")).is_empty());
    }

    // Enumerates the numeric d-m-y grammar and checks every member is one span.
    #[test]
    fn numeric_date_grammar_oracle() {
        for d in 1..=31u32 {
            for m in 1..=12u32 {
                for (ds, ms) in [(format!("{d}"), format!("{m}")), (format!("{d:02}"), format!("{m:02}"))] {
                    for y in ["2016", "16", "1999"] {
                        for sep in ["-", "/", "."] {
                            let text = format!("op {ds}{sep}{ms}{sep}{y} graag");
                            let found = recognize_dates(&toks(&text));
                            assert_eq!(surfaces_of(&text, found), [format!("{ds}{sep}{ms}{sep}{y}")], "{text}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn emails() {
        for addr in ["j.doe@minfin.nl", "J.DOE@MINFIN.NL", "John.Doe@Belastingdienst.nl"] {
            let text = format!("mail ({addr}) nu");
            assert_eq!(surfaces_of(&text, recognize_emails(&toks(&text))), [addr]);
        }
        assert!(recognize_emails(&toks("no at-sign here")).is_empty());
    }

    #[test]
    fn email_whitespace_repair() {
        let text = "mail j.doe@minfin .nl aub";
        let found = recognize_emails(&toks(text));
        assert_eq!(surfaces_of(text, found.clone()), ["j.doe@minfin .nl"]);
        assert_eq!(found[0].source, "pattern:mail-repair");

        let text = "(j.doe@minfin. nl) graag";
        assert_eq!(surfaces_of(text, recognize_emails(&toks(text))), ["j.doe@minfin. nl"]);

        // an intact address is not glued to a neighbouring word
        let text = "mail j.doe@minfin.nl nl";
        let found = recognize_emails(&toks(text));
        assert_eq!(surfaces_of(text, found.clone()), ["j.doe@minfin.nl"]);
        assert_eq!(found[0].source, "pattern:mail");

        // two spaces are not repaired
        assert!(recognize_emails(&toks("j.doe@minfin  .nl")).is_empty());
    }

    #[test]
    fn websites() {
        for url in ["www.example.nl", "https://p-direkt.nl/portal", "belastingdienst.nl"] {
            let text = format!("zie {url}.");
            assert_eq!(surfaces_of(&text, recognize_websites(&toks(&text))), [url]);
        }
        assert!(recognize_websites(&toks("j.doe@minfin.nl")).is_empty());
    }

    #[test]
    fn codes() {
        let none = CodePatterns::default();
        let text = "rekening NL91ABNA0417164300 graag";
        assert_eq!(surfaces_of(text, recognize_codes(&toks(text), &none)), ["NL91ABNA0417164300"]);
        let text = "rekening NL91 ABNA 0417 1643 00 graag";
        assert_eq!(surfaces_of(text, recognize_codes(&toks(text), &none)), ["NL91 ABNA 0417 1643 00"]);
        assert!(recognize_codes(&toks("hello"), &none).is_empty());
        let user = CodePatterns::new(["P[0-9]{6}"]).unwrap();
        assert_eq!(surfaces_of("P123456", recognize_codes(&toks("P123456"), &user)), ["P123456"]);
        assert!(recognize_codes(&toks("P1234567"), &user).is_empty());
        match CodePatterns::new(["P[0-9"]) {
            Err(Error::InvalidPattern { pattern, .. }) => assert_eq!(pattern, "P[0-9"),
            other => panic!("{other:?}"),
        }
    }

    // A handwritten IBAN grammar: two letters, two digits, 10-30 alphanumerics.
    fn iban_oracle(s: &str) -> bool {
        let c: Vec<char> = s.chars().collect();
        c.len() >= 14
            && c.len() <= 34
            && c[..2].iter().all(|c| c.is_ascii_alphabetic())
            && c[2..4].iter().all(|c| c.is_ascii_digit())
            && c[4..].iter().all(|c| c.is_ascii_alphanumeric())
    }

    proptest! {
        #[test]
        fn iban_matches_grammar(s in "[A-Z0-9]{0,3}[A-Z]{0,2}[0-9]{0,2}[A-Z0-9]{0,34}") {
            let found = !recognize_codes(&toks(&s), &CodePatterns::default()).is_empty()
                && tokenize(&s, &TokenizerConfig::default()).len() == 1;
            prop_assert_eq!(found, iban_oracle(&s));
        }
    }

    #[test]
    fn lexicon_basics() {
        let lex = Lexicon::new(Label::Per, ["John Doe"], false).unwrap();
        let text = "John Doe wrote";
        assert_eq!(spans(text, &lexicon_match(&toks(text), &lex)), [("John Doe".to_string(), Label::Per)]);
        assert!(lexicon_match(&toks(""), &lex).is_empty());
        assert_eq!(surfaces_of("JOHN DOE", lexicon_match(&toks("JOHN DOE"), &lex)), ["JOHN DOE"]);
        let cs = Lexicon::new(Label::Per, ["John"], true).unwrap();
        assert!(lexicon_match(&toks("john"), &cs).is_empty());
        assert!(Lexicon::new(Label::Per, ["  "], false).is_err());
    }

    #[test]
    fn lexicon_prefers_longest() {
        let lex = Lexicon::new(Label::Org, ["Tax and Customs Administration", "Customs"], false).unwrap();
        let text = "the Tax and Customs Administration office";
        assert_eq!(surfaces_of(text, lexicon_match(&toks(text), &lex)), ["Tax and Customs Administration"]);
    }

    #[test]
    fn lexicon_file_format() {
        let lex = Lexicon::parse(Label::Title, "# c\n\ndr\tdegree\nmevrouw  \n", false, Path::new("t")).unwrap();
        assert_eq!(lex.entries().collect::<Vec<_>>(), ["dr", "mevrouw"]);
        assert_eq!(lex.category("dr"), Some("degree"));
        let pruned = lex.without_categories(&["degree"]).unwrap();
        assert_eq!(pruned.entries().collect::<Vec<_>>(), ["mevrouw"]);
    }

    #[test]
    fn prefixed_person() {
        let titles = Lexicon::default_titles();
        let text = "mevrouw Jansen";
        assert_eq!(
            spans(text, &recognize_prefixed_person(&toks(text), &titles)),
            [("mevrouw".to_string(), Label::Title), ("Jansen".to_string(), Label::Per)]
        );
        let text = "dhr. van der Berg";
        assert_eq!(
            spans(text, &recognize_prefixed_person(&toks(text), &titles)),
            [("dhr".to_string(), Label::Title), ("van der Berg".to_string(), Label::Per)]
        );
        let text = "de heer fietst";
        assert_eq!(spans(text, &recognize_prefixed_person(&toks(text), &titles)), [("de heer".to_string(), Label::Title)]);
        let text = "Dr. J. de Vries schreef";
        assert_eq!(
            spans(text, &recognize_prefixed_person(&toks(text), &titles)),
            [("Dr".to_string(), Label::Title), ("J. de Vries".to_string(), Label::Per)]
        );
        let text = "prof Anna Maria Petra Smit";
        assert_eq!(
            surfaces_of(text, recognize_prefixed_person(&toks(text), &titles)),
            ["prof", "Anna Maria Petra"]
        );
        let text = "mevrouw van de";
        assert_eq!(surfaces_of(text, recognize_prefixed_person(&toks(text), &titles)), ["mevrouw"]);
    }

    #[test]
    fn gender_words() {
        let g = Lexicon::default_gender();
        let text = "zij schreef";
        assert_eq!(spans(text, &recognize_gender(&toks(text), &g)), [("zij".to_string(), Label::Gender)]);
        assert!(recognize_gender(&toks("dezelfde"), &g).is_empty());
        let text = "de heer Jansen";
        assert_eq!(surfaces_of(text, recognize_gender(&toks(text), &g)), ["de heer"]);
    }

    #[test]
    fn empty_enabled_lexicon_is_a_config_error() {
        let mut set = RecognizerSet::default();
        set.validate().unwrap();
        set.lists.push(Lexicon::new::<&str>(Label::Per, [], false).unwrap());
        assert!(set.validate().is_err());
    }

    // Brute force: every (start, entry) occurrence, then leftmost-longest.
    fn lexicon_oracle(tokens: &[Token], entries: &[Vec<String>]) -> Vec<(usize, usize)> {
        let folded: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
        let mut occ: Vec<(usize, usize)> = Vec::new();
        for start in 0..folded.len() {
            for e in entries {
                if e.is_empty() || start + e.len() > folded.len() {
                    continue;
                }
                if e.iter().zip(&folded[start..]).all(|(a, b)| a.to_lowercase() == *b) {
                    occ.push((start, start + e.len()));
                }
            }
        }
        let mut out = Vec::new();
        let mut cursor = 0;
        for start in 0..folded.len() {
            if start < cursor {
                continue;
            }
            if let Some(end) = occ.iter().filter(|o| o.0 == start).map(|o| o.1).max() {
                out.push((tokens[start].start, tokens[end - 1].end));
                cursor = end;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn lexicon_match_equals_oracle(
            entries in proptest::collection::vec(proptest::collection::vec("[abAB]{1,2}", 1..4), 1..6),
            words in proptest::collection::vec("[abAB]{1,2}", 0..30),
        ) {
            let text = words.join(" ");
            let tokens = toks(&text);
            let joined: Vec<String> = entries.iter().map(|e| e.join(" ")).collect();
            let lex = Lexicon::new(Label::Org, &joined, false).unwrap();
            let got: Vec<(usize, usize)> = lexicon_match(&tokens, &lex).iter().map(|s| (s.start, s.end)).collect();
            prop_assert_eq!(got, lexicon_oracle(&tokens, &entries));
        }

        #[test]
        fn mail_and_website_are_disjoint(s in "[a-zA-Z0-9._%+@:/-]{1,24}") {
            prop_assert!(!(is_email(&s) && is_website(&s)));
        }

        #[test]
        fn spans_lie_on_token_boundaries(words in proptest::collection::vec(prop_oneof![
            Just("5"), Just("november"), Just("2016"), Just("j.doe@minfin"), Just(".nl"), Just("mevrouw"),
            Just("Jansen"), Just("van"), Just("zij"), Just("www.x.nl"), Just("NL91ABNA0417164300"), Just("98"),
            Just("dhr."), Just("03-11-2016"),
        ], 0..20)) {
            let text = words.join(" ");
            let tokens = toks(&text);
            let starts: BTreeSet<usize> = tokens.iter().map(|t| t.start).collect();
            let ends: BTreeSet<usize> = tokens.iter().map(|t| t.end).collect();
            let set = RecognizerSet::default();
            let a = set.recognize(&tokens);
            for s in &a {
                prop_assert!(starts.contains(&s.start) && ends.contains(&s.end), "{:?}", s);
                prop_assert!(s.start < s.end && !s.source.is_empty());
            }
            prop_assert_eq!(a, set.recognize(&tokens));
        }
    }
}
