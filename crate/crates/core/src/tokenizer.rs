//! Offset-preserving tokenizer.
//!
//! Text is split on Unicode whitespace. Inside each whitespace-free chunk,
//! e-mail addresses and URLs (when the respective mode is on) become single
//! tokens; everything else is split into alphanumeric words and single
//! punctuation/symbol characters. Hyphens and apostrophes between two
//! alphanumerics stay inside the word (`e-mail`, `03-11-2016`).

use std::sync::LazyLock;

use regex::Regex;
use unicode_general_category::{get_general_category, GeneralCategory as Gc};

use crate::corpus::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub email_aware: bool,
    pub url_aware: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            email_aware: true,
            url_aware: true,
        }
    }
}

pub(crate) const EMAIL_PATTERN: &str = r"[a-z0-9._%+\-]+@[a-z0-9.\-]+\.[a-z]{2,}";

static EMAIL: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("(?i){EMAIL_PATTERN}")).unwrap());

// scheme://..., www.... and bare host.tld forms. The bare form needs a
// lowercase tld so that "einde.Volgende" stays three tokens.
pub(crate) const URL_PATTERN: &str = concat!(
    r#"(?i:[a-z][a-z0-9+.\-]*://[^\s<>"]*[^\s<>"'().,;:!?\[\]{}])"#,
    r#"|(?i:www\.[^\s<>"]*[^\s<>"'().,;:!?\[\]{}])"#,
    r#"|(?i:[a-z0-9](?:[a-z0-9\-]*[a-z0-9])?(?:\.[a-z0-9](?:[a-z0-9\-]*[a-z0-9])?)*)\.[a-z]{2,}"#,
    r#"(?:/[^\s<>"]*[^\s<>"'().,;:!?\[\]{}])?"#,
);

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(URL_PATTERN).unwrap());

fn is_separator(c: char) -> bool {
    // ASCII punctuation is exactly the ASCII part of categories P and S
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    matches!(
        get_general_category(c),
        Gc::ConnectorPunctuation
            | Gc::DashPunctuation
            | Gc::OpenPunctuation
            | Gc::ClosePunctuation
            | Gc::InitialPunctuation
            | Gc::FinalPunctuation
            | Gc::OtherPunctuation
            | Gc::MathSymbol
            | Gc::CurrencySymbol
            | Gc::ModifierSymbol
            | Gc::OtherSymbol
    )
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}' | '\u{2010}' | '\u{2011}')
}

pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<Token> {
    let mut ranges = Vec::new();
    let mut chunk_start = None;
    for (b, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                split_chunk(text, s, b, config, &mut ranges);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(b);
        }
    }
    if let Some(s) = chunk_start {
        split_chunk(text, s, text.len(), config, &mut ranges);
    }
    to_tokens(text, &ranges)
}

// Converts sorted byte ranges to char-offset tokens in a single pass.
fn to_tokens(text: &str, ranges: &[(usize, usize)]) -> Vec<Token> {
    let mut out = Vec::with_capacity(ranges.len());
    let mut chars = 0usize;
    let mut byte = 0usize;
    for &(s, e) in ranges {
        chars += text[byte..s].chars().count();
        let start = chars;
        chars += text[s..e].chars().count();
        byte = e;
        out.push(Token::new(&text[s..e], start, chars));
    }
    out
}

fn split_chunk(text: &str, start: usize, end: usize, config: &TokenizerConfig, out: &mut Vec<(usize, usize)>) {
    let chunk = &text[start..end];
    let mut atoms: Vec<(usize, usize)> = Vec::new();
    // every e-mail contains '@'; every URL contains '.' or "://"
    if config.email_aware && chunk.contains('@') {
        atoms.extend(EMAIL.find_iter(chunk).map(|m| (m.start(), m.end())));
    }
    if config.url_aware && chunk.contains(['.', ':']) {
        let mut urls = Vec::new();
        for (gs, ge) in gaps(&atoms, chunk.len()) {
            for m in URL.find_iter(&chunk[gs..ge]) {
                let (s, e) = (gs + m.start(), gs + m.end());
                if url_boundary_ok(chunk, s, e) {
                    urls.push((s, e));
                }
            }
        }
        atoms.extend(urls);
        atoms.sort_unstable();
    }
    let mut cursor = 0;
    for &(s, e) in &atoms {
        split_words(chunk, cursor, s, start, out);
        out.push((start + s, start + e));
        cursor = e;
    }
    split_words(chunk, cursor, chunk.len(), start, out);
}

fn gaps(atoms: &[(usize, usize)], len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut cursor = 0;
    for &(s, e) in atoms {
        if s > cursor {
            out.push((cursor, s));
        }
        cursor = e;
    }
    if cursor < len {
        out.push((cursor, len));
    }
    out
}

// A URL must not be glued to a word, a dotted prefix or an e-mail '@'.
fn url_boundary_ok(chunk: &str, s: usize, e: usize) -> bool {
    let before = chunk[..s].chars().next_back();
    let after = chunk[e..].chars().next();
    let bad_before = before.is_some_and(|c| c.is_alphanumeric() || matches!(c, '@' | '.' | '_'));
    let bad_after = after.is_some_and(|c| c.is_alphanumeric() || c == '@');
    !bad_before && !bad_after
}

fn split_words(chunk: &str, from: usize, to: usize, base: usize, out: &mut Vec<(usize, usize)>) {
    if from >= to {
        return;
    }
    let piece = &chunk[from..to];
    let chars: Vec<(usize, char)> = piece.char_indices().collect();
    let mut word: Option<usize> = None;
    for (i, &(b, c)) in chars.iter().enumerate() {
        if !is_separator(c) {
            word.get_or_insert(b);
            continue;
        }
        let interior = is_joiner(c)
            && word.is_some()
            && i > 0
            && chars[i - 1].1.is_alphanumeric()
            && chars.get(i + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
        if interior {
            continue;
        }
        if let Some(ws) = word.take() {
            out.push((base + from + ws, base + from + b));
        }
        out.push((base + from + b, base + from + b + c.len_utf8()));
    }
    if let Some(ws) = word {
        out.push((base + from + ws, base + to));
    }
}
