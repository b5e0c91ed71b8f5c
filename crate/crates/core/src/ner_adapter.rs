//! Pluggable statistical NER backends.
//!
//! A backend tags a token sequence with IOB2 tags over its own label
//! vocabulary; a [`LabelMap`] then maps those labels onto [`Label`] or drops
//! them. Two backends exist: the built-in gazetteer backend and an external
//! process speaking a line protocol over its standard streams:
//!
//! ```text
//! request:  token\n  (once per token)  then  \n
//! response: token\ttag\n  (once per token)  then  \n
//! ```
//!
//! The process is spawned once and serves successive documents.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::corpus::{read_file, repair_orphans, Label, Tag, Token};
use crate::deidentify::merge_spans;
use crate::error::{BackendError, Error, Result};
use crate::recognizers::{lexicon_match, Lexicon};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelTarget {
    Label(Label),
    /// The backend label is not evaluated; its tags become `O`.
    Drop,
}

/// Backend label string → target label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMap {
    entries: BTreeMap<String, LabelTarget>,
}

impl LabelMap {
    /// Maps every canonical label name (`PER`, `ORG`, ...) to itself.
    pub fn identity() -> Self {
        LabelMap {
            entries: Label::ALL
                .iter()
                .map(|l| (l.as_str().to_string(), LabelTarget::Label(*l)))
                .collect(),
        }
    }

    pub fn insert(&mut self, backend_label: impl Into<String>, target: LabelTarget) {
        self.entries.insert(backend_label.into(), target);
    }

    pub fn get(&self, backend_label: &str) -> Option<LabelTarget> {
        self.entries.get(backend_label).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// TSV with columns `backend_label`, `target`, where target is a label
    /// name or `DROP`. `#` comments and blank lines are skipped.
    pub fn parse(input: &str, path: &Path) -> Result<Self> {
        let mut map = LabelMap::default();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (from, to) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected <backend_label><TAB><target>"))?;
            let target = match to.trim() {
                "DROP" => LabelTarget::Drop,
                other => LabelTarget::Label(other.parse().map_err(|e: Error| Error::parse(path, i + 1, e.to_string()))?),
            };
            if map.entries.insert(from.to_string(), target).is_some() {
                return Err(Error::parse(path, i + 1, format!("duplicate backend label {from:?}")));
            }
        }
        if map.is_empty() {
            return Err(Error::parse(path, 1, "label map is empty"));
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        LabelMap::parse(&read_file(path)?, path)
    }
}

/// Maps backend tags onto [`Label`] tags. Dropped labels become `O`, and any
/// `I` left without its `B` by the mapping is promoted to `B`.
pub fn map_labels(tags: &[Tag<String>], map: &LabelMap) -> Result<Vec<Tag<Label>>, BackendError> {
    let mut out = tags
        .iter()
        .map(|tag| {
            let Some(raw) = tag.label() else { return Ok(Tag::O) };
            match map.get(raw) {
                None => Err(BackendError::UnknownLabel(raw.clone())),
                Some(LabelTarget::Drop) => Ok(Tag::O),
                Some(LabelTarget::Label(l)) => Ok(match tag {
                    Tag::B(_) => Tag::B(l),
                    _ => Tag::I(l),
                }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    repair_orphans(&mut out);
    Ok(out)
}

pub trait NerBackend: Send {
    fn name(&self) -> &str;

    /// Exactly one tag per token, over the backend's own label strings.
    fn tag_raw(&mut self, tokens: &[Token]) -> Result<Vec<Tag<String>>, BackendError>;
}

/// Tags tokens with `backend` and maps the result through `label_map`.
pub fn tag_tokens(
    backend: &mut dyn NerBackend,
    tokens: &[Token],
    label_map: &LabelMap,
) -> Result<Vec<Tag<Label>>, BackendError> {
    let raw = backend.tag_raw(tokens)?;
    if raw.len() != tokens.len() {
        return Err(BackendError::CountMismatch {
            expected: tokens.len(),
            actual: raw.len(),
        });
    }
    map_labels(&raw, label_map)
}

// ---------------------------------------------------------------------------

/// Gazetteer lookup presented as a tagger. Emits canonical label names.
#[derive(Debug, Clone, Default)]
pub struct GazetteerBackend {
    lexicons: Vec<Lexicon>,
}

impl GazetteerBackend {
    pub fn new(lexicons: Vec<Lexicon>) -> Self {
        GazetteerBackend { lexicons }
    }
}

impl NerBackend for GazetteerBackend {
    fn name(&self) -> &str {
        "builtin"
    }

    fn tag_raw(&mut self, tokens: &[Token]) -> Result<Vec<Tag<String>>, BackendError> {
        let candidates: Vec<_> = self.lexicons.iter().flat_map(|lex| lexicon_match(tokens, lex)).collect();
        let mut tags = vec![Tag::O; tokens.len()];
        for span in merge_spans(&candidates) {
            let first = tokens.partition_point(|t| t.start < span.start);
            let name = span.label.as_str().to_string();
            for (i, tok) in tokens.iter().enumerate().skip(first) {
                if tok.end > span.end {
                    break;
                }
                tags[i] = if i == first { Tag::B(name.clone()) } else { Tag::I(name.clone()) };
            }
        }
        Ok(tags)
    }
}

// ---------------------------------------------------------------------------

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

/// A long-lived tagger process. One instance serves one worker.
pub struct ExternalBackend {
    command: Vec<String>,
    timeout: Duration,
    running: Option<Running>,
}

impl ExternalBackend {
    /// Starts the process immediately so a bad command fails up front.
    pub fn spawn(command: Vec<String>, timeout: Duration) -> Result<Self, BackendError> {
        let mut backend = ExternalBackend {
            command,
            timeout,
            running: None,
        };
        backend.start()?;
        Ok(backend)
    }

    fn start(&mut self) -> Result<(), BackendError> {
        let (program, args) = self.command.split_first().ok_or_else(|| BackendError::Spawn {
            command: String::new(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn {
                command: self.command.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if line.ends_with('\n') {
                            line.pop();
                            if line.ends_with('\r') {
                                line.pop();
                            }
                        }
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        self.running = Some(Running { child, stdin, lines: rx });
        Ok(())
    }

    fn kill(&mut self) {
        if let Some(mut r) = self.running.take() {
            let _ = r.child.kill();
            let _ = r.child.wait();
        }
    }

    fn exchange(&mut self, tokens: &[Token]) -> Result<Vec<Tag<String>>, BackendError> {
        let deadline = Instant::now() + self.timeout;
        let timeout = self.timeout;
        let r = self.running.as_mut().expect("backend started");

        let mut request = String::new();
        for t in tokens {
            request.push_str(&t.surface);
            request.push('\n');
        }
        request.push('\n');
        r.stdin.write_all(request.as_bytes())?;
        r.stdin.flush()?;

        let mut lines = Vec::with_capacity(tokens.len());
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match r.lines.recv_timeout(left) {
                Ok(line) => line?,
                Err(RecvTimeoutError::Timeout) => return Err(BackendError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(BackendError::Closed),
            };
            if line.is_empty() {
                break;
            }
            lines.push(line);
        }
        if lines.len() != tokens.len() {
            return Err(BackendError::CountMismatch {
                expected: tokens.len(),
                actual: lines.len(),
            });
        }
        lines
            .iter()
            .zip(tokens)
            .enumerate()
            .map(|(index, (line, tok))| {
                let (echoed, tag) = line
                    .split_once('\t')
                    .ok_or_else(|| BackendError::MalformedLine(line.clone()))?;
                if echoed != tok.surface {
                    return Err(BackendError::SurfaceMismatch {
                        index,
                        sent: tok.surface.clone(),
                        echoed: echoed.to_string(),
                    });
                }
                tag.parse::<Tag<String>>()
                    .map_err(|_| BackendError::MalformedTag(tag.to_string()))
            })
            .collect()
    }
}

impl NerBackend for ExternalBackend {
    fn name(&self) -> &str {
        "external"
    }

    fn tag_raw(&mut self, tokens: &[Token]) -> Result<Vec<Tag<String>>, BackendError> {
        if self.running.is_none() {
            self.start()?;
        }
        let result = self.exchange(tokens);
        if result.is_err() {
            // the stream may be out of step; start afresh for the next document
            self.kill();
        }
        result
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        self.kill();
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum BackendKind {
    Builtin { gazetteers: Vec<Lexicon> },
    External { command: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub label_map: LabelMap,
    /// Per-document deadline for external backends.
    pub timeout: Duration,
    /// Added to the default label priority of backend spans; negative
    /// values favour the backend over rule recognizers in merging.
    pub priority_bias: i16,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Builtin { gazetteers: Vec::new() },
            label_map: LabelMap::identity(),
            timeout: DEFAULT_TIMEOUT,
            priority_bias: 0,
        }
    }
}

impl BackendConfig {
    pub fn builtin(gazetteers: Vec<Lexicon>) -> Self {
        BackendConfig {
            kind: BackendKind::Builtin { gazetteers },
            ..Default::default()
        }
    }

    pub fn external(command: Vec<String>, label_map: LabelMap) -> Self {
        BackendConfig {
            kind: BackendKind::External { command },
            label_map,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            BackendKind::External { command } if command.is_empty() => {
                Err(Error::Config("external backend requires a non-empty command".into()))
            }
            BackendKind::Builtin { gazetteers } => {
                for lex in gazetteers {
                    if lex.is_empty() {
                        return Err(Error::Config(format!("{} gazetteer is empty", lex.label)));
                    }
                    if self.label_map.get(lex.label.as_str()).is_none() {
                        return Err(Error::Config(format!(
                            "label map has no entry for builtin label {}",
                            lex.label
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Opens a backend connection for one worker.
    pub fn connect(&self) -> Result<Box<dyn NerBackend>, BackendError> {
        Ok(match &self.kind {
            BackendKind::Builtin { gazetteers } => Box::new(GazetteerBackend::new(gazetteers.clone())),
            BackendKind::External { command } => Box::new(ExternalBackend::spawn(command.clone(), self.timeout)?),
        })
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.kind, BackendKind::Builtin { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{iob2_to_spans, Document, TagMode, TaggedToken};
    use crate::tokenizer::{tokenize, TokenizerConfig};
    use proptest::prelude::*;

    fn toks(text: &str) -> Vec<Token> {
        tokenize(text, &TokenizerConfig::default())
    }

    fn raw(tags: &[&str]) -> Vec<Tag<String>> {
        tags.iter().map(|t| t.parse().unwrap()).collect()
    }

    fn shell(script: &str) -> Vec<String> {
        vec!["sh".into(), "-c".into(), script.into()]
    }

    const ECHO_O: &str = r#"while IFS= read -r l; do if [ -z "$l" ]; then printf '\n'; else printf '%s\tO\n' "$l"; fi; done"#;

    fn table4() -> LabelMap {
        let mut m = LabelMap::default();
        m.insert("institution", LabelTarget::Label(Label::Org));
        m.insert("month", LabelTarget::Label(Label::Date));
        m.insert("misc", LabelTarget::Drop);
        m.insert("person", LabelTarget::Label(Label::Per));
        m
    }

    #[test]
    fn label_mapping_examples() {
        let m = table4();
        assert_eq!(
            map_labels(&raw(&["B-institution", "I-institution"]), &m).unwrap(),
            [Tag::B(Label::Org), Tag::I(Label::Org)]
        );
        assert_eq!(map_labels(&raw(&["B-month"]), &m).unwrap(), [Tag::B(Label::Date)]);
        assert_eq!(map_labels(&raw(&["B-misc"]), &m).unwrap(), [Tag::O]);
        match map_labels(&raw(&["O", "B-event"]), &m) {
            Err(BackendError::UnknownLabel(l)) => assert_eq!(l, "event"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dropping_repairs_orphans() {
        let mut m = table4();
        m.insert("x", LabelTarget::Label(Label::Org));
        let out = map_labels(&raw(&["B-misc", "I-person", "O", "B-institution", "I-x"]), &m).unwrap();
        assert_eq!(out, [Tag::O, Tag::B(Label::Per), Tag::O, Tag::B(Label::Org), Tag::I(Label::Org)]);
    }

    #[test]
    fn label_map_file() {
        let m = LabelMap::parse("# frog\nper\tPER\nmisc\tDROP\n", Path::new("m")).unwrap();
        assert_eq!(m.get("per"), Some(LabelTarget::Label(Label::Per)));
        assert_eq!(m.get("misc"), Some(LabelTarget::Drop));
        assert!(LabelMap::parse("per\tPERSON\n", Path::new("m")).is_err());
        assert!(LabelMap::parse("per PER\n", Path::new("m")).is_err());
        assert!(LabelMap::parse("per\tPER\nper\tORG\n", Path::new("m")).is_err());
    }

    fn arb_tags() -> impl Strategy<Value = Vec<Tag<String>>> {
        let tag = prop_oneof![
            Just(Tag::O),
            prop::sample::select(&["PER", "ORG", "DATE"][..]).prop_map(|l| Tag::B(l.to_string())),
            prop::sample::select(&["PER", "ORG", "DATE"][..]).prop_map(|l| Tag::I(l.to_string())),
        ];
        proptest::collection::vec(tag, 0..30).prop_map(|mut v| {
            repair_orphans(&mut v);
            v
        })
    }

    proptest! {
        #[test]
        fn identity_map_is_identity(tags in arb_tags()) {
            let mapped = map_labels(&tags, &LabelMap::identity()).unwrap();
            let back: Vec<Tag<String>> = mapped.iter().map(|t| t.to_string().parse().unwrap()).collect();
            prop_assert_eq!(back, tags);
        }

        #[test]
        fn mapping_keeps_outside_and_invariant(tags in arb_tags(), drop_org in any::<bool>()) {
            let mut m = LabelMap::default();
            m.insert("PER", LabelTarget::Label(Label::Per));
            m.insert("ORG", if drop_org { LabelTarget::Drop } else { LabelTarget::Label(Label::Per) });
            m.insert("DATE", LabelTarget::Label(Label::Date));
            let out = map_labels(&tags, &m).unwrap();
            prop_assert_eq!(out.len(), tags.len());
            for (a, b) in tags.iter().zip(&out) {
                if a.is_outside() {
                    prop_assert!(b.is_outside());
                }
            }
            prop_assert_eq!(crate::corpus::first_orphan(&out), None);
        }
    }

    #[test]
    fn builtin_backend_tags_lexicon_hits() {
        let lex = Lexicon::new(Label::Per, ["John"], false).unwrap();
        let mut backend = GazetteerBackend::new(vec![lex]);
        let tags = tag_tokens(&mut backend, &toks("John wrote"), &LabelMap::identity()).unwrap();
        assert_eq!(tags, [Tag::B(Label::Per), Tag::O]);
    }

    proptest! {
        // The builtin backend agrees with lexicon_match projected to IOB2.
        #[test]
        fn builtin_backend_matches_lexicon(
            entries in proptest::collection::vec("[ab]{1,2}( [ab]{1,2}){0,2}", 1..5),
            words in proptest::collection::vec("[ab]{1,2}", 0..25),
        ) {
            let text = words.join(" ");
            let doc = Document::new("d", text.clone());
            let tokens = toks(&text);
            let lex = Lexicon::new(Label::Loc, &entries, false).unwrap();
            let expected: Vec<(usize, usize)> = lexicon_match(&tokens, &lex).iter().map(|s| (s.start, s.end)).collect();
            let mut backend = GazetteerBackend::new(vec![lex]);
            let tags = tag_tokens(&mut backend, &tokens, &LabelMap::identity()).unwrap();
            let tagged: Vec<TaggedToken> = tokens.into_iter().zip(tags).map(|(token, tag)| TaggedToken { token, tag }).collect();
            let got: Vec<(usize, usize)> = iob2_to_spans(&doc, &tagged, TagMode::Strict).unwrap().iter().map(|a| (a.start, a.end)).collect();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn external_echo_tagger_all_outside() {
        let mut backend = ExternalBackend::spawn(shell(ECHO_O), DEFAULT_TIMEOUT).unwrap();
        let tags = tag_tokens(&mut backend, &toks("John wrote it"), &LabelMap::identity()).unwrap();
        assert_eq!(tags, [Tag::O, Tag::O, Tag::O]);
        // the same process serves the next document
        let tags = tag_tokens(&mut backend, &toks("again ."), &LabelMap::identity()).unwrap();
        assert_eq!(tags, [Tag::O, Tag::O]);
        assert!(tag_tokens(&mut backend, &[], &LabelMap::identity()).unwrap().is_empty());
    }

    #[test]
    fn external_native_labels_are_mapped() {
        let script = r#"while IFS= read -r l; do
            if [ -z "$l" ]; then printf '\n'
            elif [ "$l" = "Belastingdienst" ]; then printf '%s\tB-institution\n' "$l"
            else printf '%s\tO\n' "$l"; fi; done"#;
        let mut backend = ExternalBackend::spawn(shell(script), DEFAULT_TIMEOUT).unwrap();
        let tags = tag_tokens(&mut backend, &toks("bij de Belastingdienst"), &table4()).unwrap();
        assert_eq!(tags, [Tag::O, Tag::O, Tag::B(Label::Org)]);
    }

    #[test]
    fn external_count_mismatch() {
        // answers every request with a single tagged line
        let script = r#"n=0; while IFS= read -r l; do
            if [ -z "$l" ]; then printf 'x\tO\n\n'; fi; done"#;
        let mut backend = ExternalBackend::spawn(shell(script), DEFAULT_TIMEOUT).unwrap();
        match tag_tokens(&mut backend, &toks("two tokens"), &LabelMap::identity()) {
            Err(BackendError::CountMismatch { expected: 2, actual: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn external_surface_mismatch_and_malformed() {
        let script = r#"while IFS= read -r l; do if [ -z "$l" ]; then printf '\n'; else printf 'other\tO\n'; fi; done"#;
        let mut backend = ExternalBackend::spawn(shell(script), DEFAULT_TIMEOUT).unwrap();
        assert!(matches!(
            tag_tokens(&mut backend, &toks("word"), &LabelMap::identity()),
            Err(BackendError::SurfaceMismatch { index: 0, .. })
        ));
        let script = r#"while IFS= read -r l; do if [ -z "$l" ]; then printf '\n'; else printf '%s\tQ-PER\n' "$l"; fi; done"#;
        let mut backend = ExternalBackend::spawn(shell(script), DEFAULT_TIMEOUT).unwrap();
        assert!(matches!(
            tag_tokens(&mut backend, &toks("word"), &LabelMap::identity()),
            Err(BackendError::MalformedTag(_))
        ));
    }

    #[test]
    fn external_unknown_label() {
        let script = r#"while IFS= read -r l; do if [ -z "$l" ]; then printf '\n'; else printf '%s\tB-event\n' "$l"; fi; done"#;
        let mut backend = ExternalBackend::spawn(shell(script), DEFAULT_TIMEOUT).unwrap();
        assert!(matches!(
            tag_tokens(&mut backend, &toks("word"), &table4()),
            Err(BackendError::UnknownLabel(_))
        ));
    }

    #[test]
    fn external_timeout_kills_and_recovers() {
        // stalls on any document containing "slow"
        let script = r#"while IFS= read -r l; do
            if [ "$l" = "slow" ]; then sleep 5; fi
            if [ -z "$l" ]; then printf '\n'; else printf '%s\tO\n' "$l"; fi; done"#;
        let mut backend = ExternalBackend::spawn(shell(script), Duration::from_millis(300)).unwrap();
        let start = Instant::now();
        assert!(matches!(
            tag_tokens(&mut backend, &toks("slow"), &LabelMap::identity()),
            Err(BackendError::Timeout(_))
        ));
        assert!(start.elapsed() < Duration::from_secs(4));
        // restarted transparently for the next document
        let tags = tag_tokens(&mut backend, &toks("fast"), &LabelMap::identity()).unwrap();
        assert_eq!(tags, [Tag::O]);
    }

    #[test]
    fn spawn_failure() {
        let err = ExternalBackend::spawn(vec!["/nonexistent/tagger-binary".into()], DEFAULT_TIMEOUT).err().unwrap();
        assert!(matches!(err, BackendError::Spawn { .. }));
    }

    #[test]
    fn external_closed() {
        let mut backend = ExternalBackend::spawn(shell("exit 0"), DEFAULT_TIMEOUT).unwrap();
        let err = tag_tokens(&mut backend, &toks("word"), &LabelMap::identity()).unwrap_err();
        assert!(matches!(err, BackendError::Closed | BackendError::Io(_)), "{err:?}");
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig::external(vec![], LabelMap::identity()).validate().is_err());
        let empty = Lexicon::new::<&str>(Label::Per, [], false).unwrap();
        assert!(BackendConfig::builtin(vec![empty]).validate().is_err());
        let mut cfg = BackendConfig::builtin(vec![Lexicon::new(Label::Per, ["x"], false).unwrap()]);
        cfg.validate().unwrap();
        cfg.label_map = table4();
        assert!(cfg.validate().is_err());
    }
}
