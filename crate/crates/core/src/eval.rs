//! Strict / lenient span evaluation with micro-averaged precision, recall and
//! F-score, per-dimension context scoring and the combined all-dimensions
//! metric.
//!
//! Strict matching pairs identical spans; lenient matching pairs overlapping
//! spans greedily in `(start, end)` order, one-to-one. Cells whose
//! denominator is zero score 0.0 and are flagged `undefined`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ContextDimension, Corpus, EventLabel, MedicationMention};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchMode {
    Strict,
    Lenient,
}

impl MatchMode {
    pub const ALL: [MatchMode; 2] = [MatchMode::Strict, MatchMode::Lenient];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: ConfusionCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = ConfusionCounts>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// `TP / (TP + FP)`, or 0.0 when nothing was predicted.
pub fn precision(c: &ConfusionCounts) -> f64 {
    if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    }
}

/// `TP / (TP + FN)`, or 0.0 when there is no gold.
pub fn recall(c: &ConfusionCounts) -> f64 {
    if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    }
}

/// Harmonic mean `2pr / (p + r)`, or 0.0 when `p + r == 0`.
pub fn f_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Set when a 0/0 ratio was involved.
    pub undefined: bool,
}

impl MetricTriple {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let p = precision(c);
        let r = recall(c);
        MetricTriple {
            precision: p,
            recall: r,
            f_score: f_score(p, r),
            undefined: c.tp + c.fp == 0 || c.tp + c.fn_ == 0,
        }
    }

    /// Unweighted mean of several triples (the F-score is averaged too).
    pub fn macro_average(triples: &[MetricTriple]) -> Self {
        let n = triples.len().max(1) as f64;
        MetricTriple {
            precision: triples.iter().map(|t| t.precision).sum::<f64>() / n,
            recall: triples.iter().map(|t| t.recall).sum::<f64>() / n,
            f_score: triples.iter().map(|t| t.f_score).sum::<f64>() / n,
            undefined: triples.iter().any(|t| t.undefined),
        }
    }
}

/// Counts plus the metrics derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub counts: ConfusionCounts,
    pub metrics: MetricTriple,
}

impl From<ConfusionCounts> for Cell {
    fn from(counts: ConfusionCounts) -> Self {
        Cell {
            counts,
            metrics: MetricTriple::from_counts(&counts),
        }
    }
}

/// Result of matching one document's predictions against its gold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanMatch {
    pub counts: ConfusionCounts,
    /// `(gold index, pred index)` into the input slices.
    pub pairs: Vec<(usize, usize)>,
}

fn single_doc<'a>(gold: &[&'a MedicationMention], pred: &[&'a MedicationMention]) -> Result<()> {
    let mut docs = gold.iter().chain(pred).map(|m| m.doc_id.as_str());
    if let Some(first) = docs.next() {
        if let Some(other) = docs.find(|d| *d != first) {
            return Err(Error::Usage(format!(
                "span matching across documents {first} and {other}"
            )));
        }
    }
    Ok(())
}

/// Matches one document's predictions against its gold mentions.
///
/// With `labeled`, paired mentions must also carry the same event label.
pub fn match_spans(
    gold: &[&MedicationMention],
    pred: &[&MedicationMention],
    mode: MatchMode,
    labeled: bool,
) -> Result<SpanMatch> {
    single_doc(gold, pred)?;
    let mut g: Vec<usize> = (0..gold.len()).collect();
    g.sort_by_key(|&i| gold[i].span);
    let mut p: Vec<usize> = (0..pred.len()).collect();
    p.sort_by_key(|&i| pred[i].span);

    let mut used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for &gi in &g {
        let gm = gold[gi];
        let hit = p.iter().copied().find(|&pi| {
            let pm = pred[pi];
            !used[pi]
                && (!labeled || pm.event == gm.event)
                && match mode {
                    MatchMode::Strict => pm.span == gm.span,
                    MatchMode::Lenient => pm.span.overlaps(&gm.span),
                }
        });
        if let Some(pi) = hit {
            used[pi] = true;
            pairs.push((gi, pi));
        }
    }
    let tp = pairs.len() as u64;
    Ok(SpanMatch {
        counts: ConfusionCounts::new(tp, pred.len() as u64 - tp, gold.len() as u64 - tp),
        pairs,
    })
}

/// Mentions of both corpora grouped by document id (union of documents).
fn by_document<'a, F>(
    gold: &'a Corpus,
    pred: &'a Corpus,
    keep: F,
) -> BTreeMap<&'a str, (Vec<&'a MedicationMention>, Vec<&'a MedicationMention>)>
where
    F: Fn(&MedicationMention) -> bool,
{
    let mut docs: BTreeMap<&str, (Vec<&MedicationMention>, Vec<&MedicationMention>)> = BTreeMap::new();
    for m in gold.mentions.iter().filter(|m| keep(m)) {
        docs.entry(&m.doc_id).or_default().0.push(m);
    }
    for m in pred.mentions.iter().filter(|m| keep(m)) {
        docs.entry(&m.doc_id).or_default().1.push(m);
    }
    docs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Report {
    pub strict: Cell,
    pub lenient: Cell,
}

/// Medication detection: unlabeled matching over every mention.
pub fn evaluate_task1(gold: &Corpus, pred: &Corpus) -> Result<Task1Report> {
    let docs = by_document(gold, pred, |_| true);
    let mut cells = [ConfusionCounts::default(); 2];
    for (g, p) in docs.values() {
        for (k, mode) in MatchMode::ALL.iter().enumerate() {
            cells[k] += match_spans(g, p, *mode, false)?.counts;
        }
    }
    Ok(Task1Report {
        strict: cells[0].into(),
        lenient: cells[1].into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task2Mode {
    pub per_class: BTreeMap<EventLabel, Cell>,
    pub micro: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task2Report {
    pub strict: Task2Mode,
    pub lenient: Task2Mode,
}

/// Event classification: labeled matching over mentions with an event label.
pub fn evaluate_task2(gold: &Corpus, pred: &Corpus) -> Result<Task2Report> {
    let docs = by_document(gold, pred, |m| m.event.is_some());
    let mut modes = Vec::new();
    for mode in MatchMode::ALL {
        let mut per_class: BTreeMap<EventLabel, ConfusionCounts> =
            EventLabel::ALL.iter().map(|e| (*e, ConfusionCounts::default())).collect();
        for (g, p) in docs.values() {
            let m = match_spans(g, p, mode, true)?;
            let matched_gold: BTreeSet<usize> = m.pairs.iter().map(|x| x.0).collect();
            let matched_pred: BTreeSet<usize> = m.pairs.iter().map(|x| x.1).collect();
            for &(gi, _) in &m.pairs {
                per_class.get_mut(&g[gi].event.expect("filtered")).unwrap().tp += 1;
            }
            for (pi, pm) in p.iter().enumerate().filter(|(i, _)| !matched_pred.contains(i)) {
                let _ = pi;
                per_class.get_mut(&pm.event.expect("filtered")).unwrap().fp += 1;
            }
            for (_, gm) in g.iter().enumerate().filter(|(i, _)| !matched_gold.contains(i)) {
                per_class.get_mut(&gm.event.expect("filtered")).unwrap().fn_ += 1;
            }
        }
        let micro: ConfusionCounts = per_class.values().copied().sum();
        modes.push(Task2Mode {
            per_class: per_class.into_iter().map(|(k, v)| (k, v.into())).collect(),
            micro: micro.into(),
        });
    }
    let lenient = modes.pop().expect("two modes");
    let strict = modes.pop().expect("two modes");
    Ok(Task2Report { strict, lenient })
}

/// Task-3 scores under one span-pairing mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task3Mode {
    pub per_dimension: BTreeMap<ContextDimension, Cell>,
    /// Micro aggregate of the five dimensions' counts.
    pub overall: Cell,
    /// Unweighted mean of the five dimensions' metrics.
    pub overall_macro: MetricTriple,
    /// A mention counts only if all five dimensions are right.
    pub combined: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task3Report {
    pub strict: Task3Mode,
    /// Headline pairing: mentions are paired by overlap before labels are compared.
    pub lenient: Task3Mode,
}

/// Context classification over Disposition mentions.
///
/// Gold and predicted Disposition mentions are paired by span (ignoring the
/// event label); a paired mention is a true positive for a dimension when its
/// labels agree and otherwise counts as one false positive and one false
/// negative. Unpaired mentions are false positives / negatives everywhere.
pub fn evaluate_task3(gold: &Corpus, pred: &Corpus) -> Result<Task3Report> {
    let docs = by_document(gold, pred, MedicationMention::is_disposition);
    let mut modes = Vec::new();
    for mode in MatchMode::ALL {
        let mut dims: BTreeMap<ContextDimension, ConfusionCounts> =
            ContextDimension::ALL.iter().map(|d| (*d, ConfusionCounts::default())).collect();
        let mut combined = ConfusionCounts::default();
        for (g, p) in docs.values() {
            let m = match_spans(g, p, mode, false)?;
            let unmatched = ConfusionCounts::new(0, m.counts.fp, m.counts.fn_);
            combined += unmatched;
            for c in dims.values_mut() {
                *c += unmatched;
            }
            for &(gi, pi) in &m.pairs {
                let gold_ctx = g[gi].context.unwrap_or_default();
                let pred_ctx = p[pi].context;
                let mut all = true;
                for (dim, c) in dims.iter_mut() {
                    if pred_ctx.is_some_and(|pc| pc.get(*dim) == gold_ctx.get(*dim)) {
                        c.tp += 1;
                    } else {
                        all = false;
                        c.fp += 1;
                        c.fn_ += 1;
                    }
                }
                if all {
                    combined.tp += 1;
                } else {
                    combined.fp += 1;
                    combined.fn_ += 1;
                }
            }
        }
        let overall: ConfusionCounts = dims.values().copied().sum();
        let per_dimension: BTreeMap<ContextDimension, Cell> = dims.into_iter().map(|(k, v)| (k, v.into())).collect();
        let triples: Vec<MetricTriple> = per_dimension.values().map(|c| c.metrics).collect();
        modes.push(Task3Mode {
            overall_macro: MetricTriple::macro_average(&triples),
            per_dimension,
            overall: overall.into(),
            combined: combined.into(),
        });
    }
    let lenient = modes.pop().expect("two modes");
    let strict = modes.pop().expect("two modes");
    Ok(Task3Report { strict, lenient })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task1: Task1Report,
    pub task2: Task2Report,
    pub task3: Task3Report,
}

pub fn evaluate(gold: &Corpus, pred: &Corpus) -> Result<EvalReport> {
    Ok(EvalReport {
        task1: evaluate_task1(gold, pred)?,
        task2: evaluate_task2(gold, pred)?,
        task3: evaluate_task3(gold, pred)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Usage(format!("unknown report format {other:?}"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Text => "text",
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

/// Task-3 "overall" averaging shown in text and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    #[default]
    Micro,
    Macro,
}

fn text_row(out: &mut String, name: &str, strict: &MetricTriple, lenient: &MetricTriple) {
    let cell = |t: &MetricTriple, v: f64| format!("{v:.4}{}", if t.undefined { "*" } else { " " });
    let _ = writeln!(
        out,
        "{name:<16} {:>8} {:>8} {:>8}   {:>8} {:>8} {:>8}",
        cell(strict, strict.precision),
        cell(strict, strict.recall),
        cell(strict, strict.f_score),
        cell(lenient, lenient.precision),
        cell(lenient, lenient.recall),
        cell(lenient, lenient.f_score),
    );
}

fn text_header(out: &mut String, title: &str) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:<16} {:^28}   {:^28}", "", "Strict", "Lenient");
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>8} {:>8}   {:>8} {:>8} {:>8}",
        "", "Prec", "Recall", "F", "Prec", "Recall", "F"
    );
}

fn overall(mode: &Task3Mode, averaging: Averaging) -> MetricTriple {
    match averaging {
        Averaging::Micro => mode.overall.metrics,
        Averaging::Macro => mode.overall_macro,
    }
}

/// Serializes a report. Text rounds to four decimals; JSON keeps full
/// precision and raw counts; CSV has one row per cell with counts.
pub fn render_report(report: &EvalReport, format: ReportFormat, averaging: Averaging) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Text => {
            let mut out = String::new();
            text_header(&mut out, "Task 1: medication detection");
            text_row(&mut out, "Drug", &report.task1.strict.metrics, &report.task1.lenient.metrics);
            out.push('\n');

            text_header(&mut out, "Task 2: event classification");
            let t2 = &report.task2;
            for e in EventLabel::ALL {
                text_row(&mut out, e.as_str(), &t2.strict.per_class[e].metrics, &t2.lenient.per_class[e].metrics);
            }
            text_row(&mut out, "Micro", &t2.strict.micro.metrics, &t2.lenient.micro.metrics);
            out.push('\n');

            text_header(&mut out, "Task 3: context classification (span pairing)");
            let t3 = &report.task3;
            for d in ContextDimension::ALL {
                text_row(&mut out, d.as_str(), &t3.strict.per_dimension[d].metrics, &t3.lenient.per_dimension[d].metrics);
            }
            let label = match averaging {
                Averaging::Micro => "Overall (micro)",
                Averaging::Macro => "Overall (macro)",
            };
            text_row(&mut out, label, &overall(&t3.strict, averaging), &overall(&t3.lenient, averaging));
            text_row(&mut out, "Combined", &t3.strict.combined.metrics, &t3.lenient.combined.metrics);
            if out.contains('*') {
                out.push_str("\n* 0/0 ratio, reported as 0.0000\n");
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::Format(e.to_string());
            w.write_record(["task", "mode", "class", "tp", "fp", "fn", "precision", "recall", "f_score", "undefined"])
                .map_err(csv_err)?;
            let mut row = |task: &str, mode: MatchMode, class: &str, counts: Option<&ConfusionCounts>, t: &MetricTriple| {
                let (tp, fp, fn_) = counts.map_or((String::new(), String::new(), String::new()), |c| {
                    (c.tp.to_string(), c.fp.to_string(), c.fn_.to_string())
                });
                w.write_record([
                    task.to_string(),
                    format!("{mode:?}").to_lowercase(),
                    class.to_string(),
                    tp,
                    fp,
                    fn_,
                    t.precision.to_string(),
                    t.recall.to_string(),
                    t.f_score.to_string(),
                    t.undefined.to_string(),
                ])
            };
            for mode in MatchMode::ALL {
                let c1 = match mode {
                    MatchMode::Strict => &report.task1.strict,
                    MatchMode::Lenient => &report.task1.lenient,
                };
                row("task1", mode, "Drug", Some(&c1.counts), &c1.metrics).map_err(csv_err)?;
            }
            for mode in MatchMode::ALL {
                let t2 = match mode {
                    MatchMode::Strict => &report.task2.strict,
                    MatchMode::Lenient => &report.task2.lenient,
                };
                for (e, c) in &t2.per_class {
                    row("task2", mode, e.as_str(), Some(&c.counts), &c.metrics).map_err(csv_err)?;
                }
                row("task2", mode, "micro", Some(&t2.micro.counts), &t2.micro.metrics).map_err(csv_err)?;
            }
            for mode in MatchMode::ALL {
                let t3 = match mode {
                    MatchMode::Strict => &report.task3.strict,
                    MatchMode::Lenient => &report.task3.lenient,
                };
                for (d, c) in &t3.per_dimension {
                    row("task3", mode, d.as_str(), Some(&c.counts), &c.metrics).map_err(csv_err)?;
                }
                match averaging {
                    Averaging::Micro => row("task3", mode, "overall", Some(&t3.overall.counts), &t3.overall.metrics),
                    Averaging::Macro => row("task3", mode, "overall_macro", None, &t3.overall_macro),
                }
                .map_err(csv_err)?;
                row("task3", mode, "combined", Some(&t3.combined.counts), &t3.combined.metrics).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
        }
    }
}
