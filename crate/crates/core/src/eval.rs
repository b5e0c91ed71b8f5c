//! De-identification scoring.
//!
//! Strict mode requires the suppressed span to carry the gold label: a
//! person suppressed as an organisation is a false negative for `PER` and a
//! false positive for `ORG`. Loose mode only asks whether the gold span was
//! suppressed at all and does not count false positives.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::corpus::{annotations_to_iob2, Annotation, Document, Label};
use crate::deidentify::SelectedSpan;
use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, TokenizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

pub type LabelCounts = BTreeMap<Label, ConfusionCounts>;

/// Adds `other` into `into`. Associative and commutative.
pub fn merge_counts(into: &mut LabelCounts, other: &LabelCounts) {
    for (label, c) in other {
        *into.entry(*label).or_default() += *c;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Strict,
    Loose,
}

/// When a predicted span counts as hitting a gold span.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OverlapRule {
    /// Any shared character.
    #[default]
    Any,
    /// At least this fraction (0, 1) of the gold span's characters covered.
    GoldFraction(f64),
    /// Identical boundaries.
    Exact,
}

impl OverlapRule {
    /// `1.0` means exact boundaries; `0` or below means any overlap.
    pub fn from_fraction(f: f64) -> Result<Self> {
        if !(f.is_finite() && f <= 1.0) {
            return Err(Error::Config(format!("overlap fraction {f} must be at most 1")));
        }
        Ok(if f >= 1.0 {
            OverlapRule::Exact
        } else if f <= 0.0 {
            OverlapRule::Any
        } else {
            OverlapRule::GoldFraction(f)
        })
    }

    fn hits(self, gold: (usize, usize), pred: (usize, usize)) -> bool {
        let overlap = gold.1.min(pred.1).saturating_sub(gold.0.max(pred.0));
        match self {
            OverlapRule::Any => overlap > 0,
            OverlapRule::GoldFraction(f) => overlap > 0 && overlap as f64 >= f * (gold.1 - gold.0) as f64,
            OverlapRule::Exact => gold == pred,
        }
    }
}

/// Scores one document's predictions against its gold spans.
pub fn match_spans(gold: &[Annotation], predicted: &[SelectedSpan], mode: EvalMode, rule: OverlapRule) -> Result<LabelCounts> {
    let mut sorted: Vec<&Annotation> = gold.iter().collect();
    sorted.sort_by_key(|a| (a.start, a.end));
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::OverlappingAnnotations {
                doc_id: pair[0].doc_id.clone(),
                first: (pair[0].start, pair[0].end),
                first_label: pair[0].label,
                second: (pair[1].start, pair[1].end),
                second_label: pair[1].label,
            });
        }
    }
    let mut counts = LabelCounts::new();
    // whether each predicted span matched some gold span of its own label
    let mut correct = vec![false; predicted.len()];
    for g in gold {
        let mut hit_any = false;
        let mut hit_same = false;
        for (p, ok) in predicted.iter().zip(correct.iter_mut()) {
            if rule.hits((g.start, g.end), (p.start, p.end)) {
                hit_any = true;
                if p.label == g.label {
                    hit_same = true;
                    *ok = true;
                }
            }
        }
        let c = counts.entry(g.label).or_default();
        let matched = match mode {
            EvalMode::Strict => hit_same,
            EvalMode::Loose => hit_any,
        };
        if matched {
            c.tp += 1;
        } else {
            c.fn_ += 1;
        }
    }
    if mode == EvalMode::Strict {
        for (p, ok) in predicted.iter().zip(correct) {
            if !ok {
                counts.entry(p.label).or_default().fp += 1;
            }
        }
    }
    Ok(counts)
}

/// A ratio, reported as 0 and flagged when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub defined: bool,
}

impl Score {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            Score { value: 0.0, defined: false }
        } else {
            Score {
                value: num as f64 / den as f64,
                defined: true,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub label: Label,
    pub counts: ConfusionCounts,
    pub precision: Score,
    pub recall: Score,
    pub f1: Score,
    /// Number of gold spans (tp + fn).
    pub support: u64,
}

pub fn metrics(label: Label, counts: ConfusionCounts) -> ClassReport {
    let precision = Score::ratio(counts.tp, counts.tp + counts.fp);
    let recall = Score::ratio(counts.tp, counts.tp + counts.fn_);
    let f1 = if precision.defined && recall.defined && precision.value + recall.value > 0.0 {
        Score {
            value: 2.0 * (precision.value * recall.value) / (precision.value + recall.value),
            defined: true,
        }
    } else {
        Score { value: 0.0, defined: false }
    };
    ClassReport {
        label,
        counts,
        precision,
        recall,
        f1,
        support: counts.tp + counts.fn_,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub mode: EvalMode,
    pub rows: Vec<ClassReport>,
}

/// Micro-averaged scores over a corpus. `gold` must contain every document
/// of the evaluation set (with an empty list when it has no gold spans); a
/// document absent from `predicted` had nothing suppressed, so its gold
/// spans count as misses.
pub fn evaluate_corpus(
    gold: &BTreeMap<String, Vec<Annotation>>,
    predicted: &BTreeMap<String, Vec<SelectedSpan>>,
    mode: EvalMode,
    rule: OverlapRule,
) -> Result<EvalTable> {
    if let Some(unknown) = predicted.keys().find(|k| !gold.contains_key(*k)) {
        return Err(Error::UnknownDocId(unknown.clone()));
    }
    let mut total = LabelCounts::new();
    for (doc_id, spans) in gold {
        let preds = predicted.get(doc_id).map(Vec::as_slice).unwrap_or_default();
        merge_counts(&mut total, &match_spans(spans, preds, mode, rule)?);
    }
    let rows = total
        .into_iter()
        .filter(|(_, c)| c.tp + c.fp + c.fn_ > 0)
        .map(|(label, c)| metrics(label, c))
        .collect();
    Ok(EvalTable { mode, rows })
}

fn fmt_score(s: Score) -> String {
    format!("{:.4}", s.value)
}

impl EvalTable {
    pub fn get(&self, label: Label) -> Option<&ClassReport> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Machine-readable table. Loose tables carry recall only.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        match self.mode {
            EvalMode::Strict => {
                out.push_str("label\ttp\tfp\tfn\tsupport\tprecision\trecall\tf1\tundefined\n");
                for r in &self.rows {
                    let undefined: Vec<&str> = [("precision", r.precision), ("recall", r.recall), ("f1", r.f1)]
                        .iter()
                        .filter(|(_, s)| !s.defined)
                        .map(|(n, _)| *n)
                        .collect();
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        r.label,
                        r.counts.tp,
                        r.counts.fp,
                        r.counts.fn_,
                        r.support,
                        fmt_score(r.precision),
                        fmt_score(r.recall),
                        fmt_score(r.f1),
                        if undefined.is_empty() { "-".to_string() } else { undefined.join(",") }
                    );
                }
            }
            EvalMode::Loose => {
                out.push_str("label\ttp\tfn\tsupport\trecall\n");
                for r in &self.rows {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        r.label,
                        r.counts.tp,
                        r.counts.fn_,
                        r.support,
                        fmt_score(r.recall)
                    );
                }
            }
        }
        out
    }

    /// Aligned plain-text table; undefined scores print as `-`.
    pub fn render(&self) -> String {
        let show = |s: Score| if s.defined { format!("{:.2}", s.value) } else { "-".to_string() };
        let mut out = String::new();
        match self.mode {
            EvalMode::Strict => {
                let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>8}", "label", "precision", "recall", "f1", "support");
                for r in &self.rows {
                    let _ = writeln!(
                        out,
                        "{:<10} {:>9} {:>9} {:>9} {:>8}",
                        r.label.as_str(),
                        show(r.precision),
                        show(r.recall),
                        show(r.f1),
                        r.support
                    );
                }
            }
            EvalMode::Loose => {
                let _ = writeln!(out, "{:<10} {:>9} {:>8}", "label", "recall", "support");
                for r in &self.rows {
                    let _ = writeln!(out, "{:<10} {:>9} {:>8}", r.label.as_str(), show(r.recall), r.support);
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Cohen's kappa

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    /// Observed agreement.
    pub pr_a: f64,
    /// Agreement expected by chance from the two marginals.
    pub pr_e: f64,
    pub kappa: f64,
}

/// κ = (Pr(a) − Pr(e)) / (1 − Pr(e)).
pub fn kappa_from_agreements(pr_a: f64, pr_e: f64) -> Result<KappaResult> {
    if !(0.0..=1.0).contains(&pr_a) || !(0.0..1.0).contains(&pr_e) {
        return Err(Error::Config(format!(
            "agreements out of range: Pr(a)={pr_a} must lie in [0,1], Pr(e)={pr_e} in [0,1)"
        )));
    }
    Ok(KappaResult {
        pr_a,
        pr_e,
        kappa: (pr_a - pr_e) / (1.0 - pr_e),
    })
}

/// Kappa between two equally long category sequences. Computed from exact
/// integer counts; when both annotators use one and the same category
/// throughout (Pr(e) = 1), κ is reported as 1.
pub fn cohen_kappa<T: Eq + std::hash::Hash>(a: &[T], b: &[T]) -> Result<KappaResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("kappa needs at least one position"));
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut marginals: HashMap<&T, (u128, u128)> = HashMap::new();
    for x in a {
        marginals.entry(x).or_default().0 += 1;
    }
    for y in b {
        marginals.entry(y).or_default().1 += 1;
    }
    let chance: u128 = marginals.values().map(|(ca, cb)| ca * cb).sum();
    let pr_a = agree as f64 / n as f64;
    let pr_e = chance as f64 / (n * n) as f64;
    let kappa = if chance == n * n {
        1.0
    } else {
        ((n * agree) as i128 - chance as i128) as f64 / (n * n - chance) as f64
    };
    Ok(KappaResult { pr_a, pr_e, kappa })
}

/// Per-token category (label or `None` for outside) of one annotator.
pub fn token_categories(doc: &Document, annotations: &[Annotation], tokenizer: &TokenizerConfig) -> Result<Vec<Option<Label>>> {
    let tokens = tokenize(&doc.text, tokenizer);
    Ok(annotations_to_iob2(doc, annotations, &tokens)?
        .into_iter()
        .map(|t| t.tag.label().copied())
        .collect())
}

/// Token-level kappa over all documents of `corpus`; tokens outside every
/// annotation count as category `O`.
pub fn corpus_kappa(
    corpus: &[Document],
    annotations_a: &[Annotation],
    annotations_b: &[Annotation],
    tokenizer: &TokenizerConfig,
) -> Result<KappaResult> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for doc in corpus {
        a.extend(token_categories(doc, annotations_a, tokenizer)?);
        b.extend(token_categories(doc, annotations_b, tokenizer)?);
    }
    cohen_kappa(&a, &b)
}
