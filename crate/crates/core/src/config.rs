//! INI-style pipeline configuration.
//!
//! ```ini
//! [recognizers]
//! numbers = true
//! [tokenizer]
//! email_aware = true
//! [lexicons]
//! PER = names.txt
//! case_sensitive = false
//! drop_title_categories = nobility
//! [backend]
//! kind = builtin            # or external
//! command = my-tagger --model nl
//! label_map = labels.tsv
//! timeout_secs = 60
//! priority_bias = 0
//! [code_patterns]
//! P[0-9]{6}
//! [suppression]
//! strategy = placeholder    # or numbered
//! [evaluation]
//! overlap_fraction = 0
//! [runtime]
//! workers = 1
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::corpus::{read_file, Label};
use crate::deidentify::{Pipeline, SuppressionStrategy};
use crate::error::{Error, Result};
use crate::eval::OverlapRule;
use crate::ner_adapter::{BackendConfig, BackendKind, LabelMap};
use crate::recognizers::{CodePatterns, Lexicon};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub pipeline: Pipeline,
    pub overlap: OverlapRule,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pipeline: Pipeline::default(),
            overlap: OverlapRule::Any,
            workers: 1,
        }
    }
}

/// Splits a backend command line into program and arguments using POSIX
/// shell quoting rules.
pub fn split_command(line: &str) -> Option<Vec<String>> {
    shlex::split(line).filter(|argv| !argv.is_empty())
}

struct Parser<'a> {
    path: &'a Path,
    base: PathBuf,
}

impl Parser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::parse(self.path, line, message)
    }

    fn boolean(&self, line: usize, key: &str, value: &str) -> Result<bool> {
        match value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(self.err(line, format!("{key}: expected a boolean, got {value:?}"))),
        }
    }

    fn number<T: std::str::FromStr>(&self, line: usize, key: &str, value: &str) -> Result<T> {
        value
            .parse()
            .map_err(|_| self.err(line, format!("{key}: invalid number {value:?}")))
    }

    fn file(&self, line: usize, value: &str) -> Result<PathBuf> {
        let path = self.base.join(value);
        if !path.is_file() {
            return Err(self.err(line, format!("referenced file {} does not exist", path.display())));
        }
        Ok(path)
    }
}

/// Parses a config file. Referenced lexicons, label maps and patterns are
/// loaded and validated eagerly.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = read_file(path)?;
    parse_config(&text, path)
}

pub fn parse_config(input: &str, path: &Path) -> Result<PipelineConfig> {
    let p = Parser {
        path,
        base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut config = PipelineConfig::default();
    let pipeline = &mut config.pipeline;

    let mut section: Option<String> = None;
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut lexicon_paths: Vec<(usize, Label, PathBuf)> = Vec::new();
    let mut case_sensitive = false;
    let mut drop_title_categories: Vec<String> = Vec::new();
    let mut backend_kind: Option<(usize, String)> = None;
    let mut command: Option<(usize, Vec<String>)> = None;
    let mut label_map: Option<PathBuf> = None;
    let mut patterns: Vec<String> = Vec::new();

    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(
                name.as_str(),
                "recognizers" | "tokenizer" | "lexicons" | "backend" | "code_patterns" | "suppression" | "evaluation" | "runtime"
            ) {
                return Err(p.err(line, format!("unknown section [{name}]")));
            }
            section = Some(name);
            continue;
        }
        let Some(sec) = section.as_deref() else {
            return Err(p.err(line, "entry outside of any section"));
        };
        if sec == "code_patterns" {
            CodePatterns::new([trimmed]).map_err(|e| p.err(line, e.to_string()))?;
            patterns.push(trimmed.to_string());
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(p.err(line, format!("expected `key = value`, got {trimmed:?}")));
        };
        let (key, value) = (key.trim(), strip_comment(value));
        if let Some(first) = seen.insert((sec.to_string(), key.to_string()), line) {
            return Err(p.err(line, format!("duplicate key {key:?} (first set on line {first})")));
        }
        let unknown = || p.err(line, format!("unknown key {key:?} in [{sec}]"));
        match sec {
            "recognizers" => {
                let on = p.boolean(line, key, value)?;
                let t = &mut pipeline.recognizers.toggles;
                *match key {
                    "numbers" => &mut t.numbers,
                    "dates" => &mut t.dates,
                    "emails" => &mut t.emails,
                    "websites" => &mut t.websites,
                    "codes" => &mut t.codes,
                    "gender" => &mut t.gender,
                    "titles" => &mut t.titles,
                    "lists" => &mut t.lists,
                    _ => return Err(unknown()),
                } = on;
            }
            "tokenizer" => {
                let on = p.boolean(line, key, value)?;
                match key {
                    "email_aware" => pipeline.tokenizer.email_aware = on,
                    "url_aware" => pipeline.tokenizer.url_aware = on,
                    _ => return Err(unknown()),
                }
            }
            "lexicons" => match key {
                "case_sensitive" => case_sensitive = p.boolean(line, key, value)?,
                "drop_title_categories" => {
                    drop_title_categories = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                _ => {
                    let label: Label = key.parse().map_err(|_| unknown())?;
                    lexicon_paths.push((line, label, p.file(line, value)?));
                }
            },
            "backend" => match key {
                "kind" => backend_kind = Some((line, value.to_string())),
                "command" => {
                    let argv = split_command(value)
                        .ok_or_else(|| p.err(line, format!("cannot split command {value:?}")))?;
                    command = Some((line, argv));
                }
                "label_map" => label_map = Some(p.file(line, value)?),
                "timeout_secs" => {
                    let secs: f64 = p.number(line, key, value)?;
                    pipeline.backend.timeout = Duration::try_from_secs_f64(secs)
                        .ok()
                        .filter(|d| !d.is_zero())
                        .ok_or_else(|| p.err(line, format!("timeout_secs must be positive, got {value}")))?;
                }
                "priority_bias" => pipeline.backend.priority_bias = p.number(line, key, value)?,
                _ => return Err(unknown()),
            },
            "suppression" => match key {
                "strategy" => {
                    pipeline.strategy = parse_strategy(value).map_err(|m| p.err(line, m))?;
                }
                _ => return Err(unknown()),
            },
            "evaluation" => match key {
                "overlap_fraction" => {
                    let f: f64 = p.number(line, key, value)?;
                    config.overlap = OverlapRule::from_fraction(f).map_err(|e| p.err(line, e.to_string()))?;
                }
                _ => return Err(unknown()),
            },
            "runtime" => match key {
                "workers" => {
                    config.workers = p.number(line, key, value)?;
                    if config.workers == 0 {
                        return Err(p.err(line, "workers must be at least 1"));
                    }
                }
                _ => return Err(unknown()),
            },
            _ => unreachable!("sections are checked when opened"),
        }
    }

    let pipeline = &mut config.pipeline;
    pipeline.recognizers.code_patterns = CodePatterns::new(&patterns)?;

    let mut lists = Vec::new();
    for (line, label, file) in lexicon_paths {
        let lex = Lexicon::load(label, &file, case_sensitive)?;
        if lex.is_empty() {
            return Err(p.err(line, format!("{label} lexicon {} has no entries", file.display())));
        }
        match label {
            Label::Gender => pipeline.recognizers.gender = lex,
            Label::Title => pipeline.recognizers.titles = lex,
            _ => lists.push(lex),
        }
    }
    if !drop_title_categories.is_empty() {
        let drop: Vec<&str> = drop_title_categories.iter().map(String::as_str).collect();
        pipeline.recognizers.titles = pipeline.recognizers.titles.without_categories(&drop)?;
    }

    let map = match label_map {
        Some(file) => LabelMap::load(file)?,
        None => LabelMap::identity(),
    };
    let kind_line = backend_kind.as_ref().map_or(0, |(l, _)| *l);
    let kind = backend_kind.as_ref().map_or("builtin", |(_, k)| k.as_str());
    let (timeout, bias) = (pipeline.backend.timeout, pipeline.backend.priority_bias);
    pipeline.backend = match kind {
        "builtin" => {
            if let Some((line, _)) = command {
                return Err(p.err(line, "command is only valid with kind = external"));
            }
            BackendConfig::builtin(lists)
        }
        "external" => {
            let Some((_, argv)) = command else {
                return Err(p.err(kind_line, "kind = external requires a command"));
            };
            pipeline.recognizers.lists = lists;
            BackendConfig::external(argv, LabelMap::identity())
        }
        other => {
            return Err(p.err(kind_line, format!("unknown backend kind {other:?}; expected builtin or external")));
        }
    };
    pipeline.backend.label_map = map;
    pipeline.backend.timeout = timeout;
    pipeline.backend.priority_bias = bias;

    pipeline.validate()?;
    Ok(config)
}

pub fn parse_strategy(value: &str) -> Result<SuppressionStrategy, String> {
    match value {
        "placeholder" => Ok(SuppressionStrategy::LabelPlaceholder),
        "numbered" => Ok(SuppressionStrategy::NumberedPseudonym),
        other => Err(format!("unknown strategy {other:?}; expected placeholder or numbered")),
    }
}

/// Drops a trailing ` # comment` from a value.
fn strip_comment(value: &str) -> &str {
    match value.find(" #") {
        Some(i) => value[..i].trim(),
        None => value.trim(),
    }
}

/// Backend kind of a loaded config, for diagnostics.
pub fn backend_name(config: &PipelineConfig) -> &'static str {
    match config.pipeline.backend.kind {
        BackendKind::Builtin { .. } => "builtin",
        BackendKind::External { .. } => "external",
    }
}
