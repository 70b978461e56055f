//! Seeded generator of annotated clinical-note corpora with exact label
//! histograms.
//!
//! Label counts are met by shuffling an exact multiset of labels, so the
//! output histogram always equals the configuration. Each mention sits in a
//! template sentence whose cue words correlate with its labels; realism is a
//! non-goal.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brat::write_corpus;
use crate::corpus::{
    ClinicalNote, ContextDimension, ContextLabels, Corpus, EventLabel, MedicationMention, Span, Split,
};
use crate::error::{Error, Result};

/// Per-split label counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub drug: usize,
    pub events: BTreeMap<EventLabel, usize>,
    /// Disposition-only context label counts, per dimension.
    pub context: BTreeMap<ContextDimension, BTreeMap<String, usize>>,
}

impl SplitCounts {
    fn from_tables(drug: usize, events: [usize; 3], context: [&[usize]; 5]) -> Self {
        SplitCounts {
            drug,
            events: EventLabel::ALL.iter().copied().zip(events).collect(),
            context: ContextDimension::ALL
                .iter()
                .zip(context)
                .map(|(d, counts)| {
                    let classes = d.classes().into_iter().map(String::from).zip(counts.iter().copied());
                    (*d, classes.collect())
                })
                .collect(),
        }
    }

    /// Default training-split counts of the reference corpus.
    pub fn default_train() -> Self {
        Self::from_tables(
            7229,
            [1412, 5260, 557],
            [
                &[568, 340, 129, 54, 285, 1, 35],
                &[744, 494, 145, 29],
                &[1176, 134, 100, 2],
                &[1278, 106, 28],
                &[32, 1380],
            ],
        )
    }

    /// Default test-split counts of the reference corpus.
    pub fn default_test() -> Self {
        Self::from_tables(
            1783,
            [335, 1326, 122],
            [
                &[131, 67, 22, 13, 88, 0, 14],
                &[173, 132, 29, 1],
                &[281, 33, 15, 6],
                &[311, 17, 7],
                &[6, 329],
            ],
        )
    }

    /// All-zero counts with every label present.
    pub fn zero() -> Self {
        Self::from_tables(0, [0; 3], [&[0; 7], &[0; 4], &[0; 4], &[0; 3], &[0; 2]])
    }

    pub fn event(&self, label: EventLabel) -> usize {
        self.events.get(&label).copied().unwrap_or(0)
    }

    /// Checks that event counts sum to the drug count and that every
    /// dimension sums to the Disposition count.
    pub fn validate(&self, split: Split) -> Result<()> {
        let events: usize = self.events.values().sum();
        if events != self.drug {
            return Err(Error::Config(format!(
                "{split}: event counts sum to {events} but drug count is {}",
                self.drug
            )));
        }
        let disposition = self.event(EventLabel::Disposition);
        for d in ContextDimension::ALL {
            let sum: usize = self.context.get(d).map_or(0, |c| c.values().sum());
            if sum != disposition {
                return Err(Error::Config(format!(
                    "{split}: {d} counts sum to {sum} but Disposition count is {disposition}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub train: SplitCounts,
    pub test: SplitCounts,
    pub train_notes: usize,
    pub test_notes: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 7,
            train: SplitCounts::default_train(),
            test: SplitCounts::default_test(),
            train_notes: 400,
            test_notes: 100,
        }
    }
}

impl GenConfig {
    pub fn split(&self, split: Split) -> (&SplitCounts, usize) {
        match split {
            Split::Train => (&self.train, self.train_notes),
            Split::Test => (&self.test, self.test_notes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for split in [Split::Train, Split::Test] {
            let (counts, notes) = self.split(split);
            counts.validate(split)?;
            if notes == 0 && counts.drug > 0 {
                return Err(Error::Config(format!("{split}: mentions requested but note count is 0")));
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Recognized keys:
    /// `seed`, `<split>.notes`, `<split>.drug`, `<split>.<EventLabel>` and
    /// `<split>.<Dimension>.<Class>`. `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            self.set(key, value).map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    /// Sets one configuration key; see [`GenConfig::apply_kv`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let number = || -> Result<u64> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got {value:?}")))
        };
        if key == "seed" {
            self.seed = number()?;
            return Ok(());
        }
        let parts: Vec<&str> = key.split('.').collect();
        let (counts, notes) = match parts[0] {
            "train" => (&mut self.train, &mut self.train_notes),
            "test" => (&mut self.test, &mut self.test_notes),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        };
        let n = number()? as usize;
        match parts[1..] {
            ["notes"] => *notes = n,
            ["drug"] => counts.drug = n,
            [label] => {
                let label: EventLabel = label.parse().map_err(|_| Error::Config(format!("unknown key {key:?}")))?;
                counts.events.insert(label, n);
            }
            [dim, class] => {
                let dim: ContextDimension = dim.parse().map_err(|_| Error::Config(format!("unknown key {key:?}")))?;
                dim.class_index(class).map_err(|_| Error::Config(format!("unknown key {key:?}")))?;
                counts.context.entry(dim).or_default().insert(class.to_string(), n);
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }
}

/// Medication names; several are prefixes of longer entries.
pub const DRUG_POOL: &[&str] = &[
    "aspirin", "lisinopril", "metoprolol", "metoprolol succinate", "metoprolol tartrate", "atorvastatin",
    "simvastatin", "insulin", "insulin glargine", "insulin lispro", "heparin", "warfarin", "coumadin",
    "furosemide", "lasix", "amlodipine", "losartan", "hydrochlorothiazide", "metformin", "glipizide",
    "levothyroxine", "prednisone", "albuterol", "tiotropium", "omeprazole", "pantoprazole", "famotidine",
    "ondansetron", "zofran", "acetaminophen", "tylenol", "ibuprofen", "oxycodone", "morphine", "gabapentin",
    "sertraline", "citalopram", "lorazepam", "ativan", "haloperidol", "quetiapine", "vancomycin",
    "ceftriaxone", "piperacillin", "azithromycin", "levofloxacin", "clopidogrel", "plavix", "apixaban",
    "enoxaparin", "digoxin", "diltiazem", "carvedilol", "spironolactone", "potassium chloride",
    "magnesium oxide", "vitamin d", "folic acid", "thiamine", "nitroglycerin", "amiodarone", "allopurinol",
];

/// Usually picks from the pool slice associated with the event label (pool
/// index modulo 3), so surfaces carry some signal about their event.
fn pick_drug(event: EventLabel, rng: &mut ChaCha8Rng) -> &'static str {
    if rng.gen_range(0..4) == 0 {
        return DRUG_POOL[rng.gen_range(0..DRUG_POOL.len())];
    }
    let group: Vec<&str> = DRUG_POOL.iter().skip(event.index()).step_by(3).copied().collect();
    group[rng.gen_range(0..group.len())]
}

const HEADERS: &[&str] = &[
    "HISTORY OF PRESENT ILLNESS:",
    "HOSPITAL COURSE:",
    "MEDICATIONS:",
    "ASSESSMENT AND PLAN:",
    "DISCHARGE MEDICATIONS:",
    "PLAN:",
    "Brief Hospital Course:",
];

const FILLERS: &[&str] = &[
    "Vital signs were stable overnight",
    "Seen and examined at the bedside",
    "Labs were reviewed and discussed with the family",
    "Chest radiograph was unremarkable",
    "Ambulating in the hallway without assistance",
    "Tolerating a regular diet",
    "Follow up in clinic in two weeks",
    "Blood cultures remain negative to date",
    "Afebrile with good urine output",
];

const NO_DISPOSITION: &[&str] = &[
    "Continue {} at the current dose",
    "Remains on home {} daily",
    "Takes {} twice a day",
    "Tolerating {} without side effects",
    "Home medications include {}",
    "Currently on {} per outpatient regimen",
];

const UNDETERMINED: &[&str] = &[
    "Discussed {} with the family",
    "Allergy to {} was questioned",
    "Unclear whether {} was ever taken",
    "Reports prior experience with {}",
];

fn action_cues(a: &str) -> &'static [&'static str] {
    match a {
        "Start" => &["start", "begin", "initiate"],
        "Stop" => &["stop", "discontinue", "hold"],
        "Increase" => &["increase", "uptitrate", "raise"],
        "Decrease" => &["decrease", "reduce", "taper"],
        "UniqueDose" => &["bolus", "load", "administer"],
        "OtherChange" => &["switch", "convert"],
        _ => &["address", "review"],
    }
}

fn temporal_cues(t: &str) -> &'static [&'static str] {
    match t {
        "Past" => &["yesterday", "last week", "on admission"],
        "Present" => &["today", "now", "this morning"],
        "Future" => &["tomorrow", "at discharge", "next week"],
        _ => &[],
    }
}

fn certainty_cues(c: &str) -> &'static [&'static str] {
    match c {
        "Certain" => &["will", "plan to"],
        "Hypothetical" => &["may", "might consider", "could"],
        "Conditional" => &["will", "plan to"],
        _ => &[],
    }
}

const CONDITIONS: &[&str] = &[
    "if blood pressure remains elevated",
    "if symptoms recur",
    "if renal function worsens",
    "if pain persists",
];

fn actor_cues(a: &str) -> &'static [&'static str] {
    match a {
        "Physician" => &["we", "the team", "cardiology"],
        "Patient" => &["patient", "she", "he"],
        _ => &[],
    }
}

/// One in `CUE_DROPOUT` Action / Temporality cues is omitted.
const CUE_DROPOUT: u32 = 12;

struct SentenceBuilder<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl SentenceBuilder<'_> {
    fn pick<'s>(&mut self, options: &[&'s str]) -> Option<&'s str> {
        if options.is_empty() {
            None
        } else {
            Some(options[self.rng.gen_range(0..options.len())])
        }
    }

    fn maybe<'s>(&mut self, options: &[&'s str]) -> Option<&'s str> {
        if self.rng.gen_range(0..CUE_DROPOUT) == 0 {
            None
        } else {
            self.pick(options)
        }
    }

    /// Returns (text before drug, text after drug).
    fn disposition(&mut self, ctx: &ContextLabels) -> (String, String) {
        let mut before: Vec<&str> = Vec::new();
        before.extend(self.pick(actor_cues(ctx.actor.as_str())));
        before.extend(self.pick(certainty_cues(ctx.certainty.as_str())));
        if ctx.negation == crate::corpus::Negation::Negated {
            before.push("not");
        }
        before.push(self.maybe(action_cues(ctx.action.as_str())).unwrap_or("address"));
        let mut after: Vec<&str> = Vec::new();
        after.extend(self.maybe(temporal_cues(ctx.temporality.as_str())));
        if ctx.certainty == crate::corpus::Certainty::Conditional {
            after.extend(self.pick(CONDITIONS));
        }
        (before.join(" "), after.join(" "))
    }

    fn templated(&mut self, templates: &[&str]) -> (String, String) {
        let t = self.pick(templates).expect("non-empty");
        let (b, a) = t.split_once("{}").expect("template has a slot");
        (b.trim_end().to_string(), a.trim_start().to_string())
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct NoteWriter {
    text: String,
    chars: usize,
    sentences_in_section: usize,
}

impl NoteWriter {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn header(&mut self, header: &str) {
        if !self.text.is_empty() {
            self.push("\n\n");
        }
        self.push(header);
        self.push("\n");
        self.sentences_in_section = 0;
    }

    fn sentence_start(&mut self) {
        if self.sentences_in_section > 0 {
            self.push(" ");
        }
        self.sentences_in_section += 1;
    }
}

struct Planned {
    event: EventLabel,
    context: Option<ContextLabels>,
}

/// Exact multiset of labels in shuffled order.
fn shuffled<T: Clone>(counts: impl IntoIterator<Item = (T, usize)>, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut out: Vec<T> = counts.into_iter().flat_map(|(v, n)| std::iter::repeat(v).take(n)).collect();
    out.shuffle(rng);
    out
}

fn generate_split(counts: &SplitCounts, notes: usize, split: Split, rng: &mut ChaCha8Rng) -> Result<Corpus> {
    let events = shuffled(counts.events.iter().map(|(e, n)| (*e, *n)), rng);
    let mut per_dim: Vec<Vec<String>> = ContextDimension::ALL
        .iter()
        .map(|d| {
            let c = counts.context.get(d).cloned().unwrap_or_default();
            shuffled(c.into_iter(), rng)
        })
        .collect();

    let mut plans: Vec<Vec<Planned>> = (0..notes).map(|_| Vec::new()).collect();
    for event in events {
        let context = if event == EventLabel::Disposition {
            let mut ctx = ContextLabels::default();
            for (d, values) in ContextDimension::ALL.iter().zip(per_dim.iter_mut()) {
                ctx.set(*d, &values.pop().expect("dimension counts validated"))?;
            }
            Some(ctx)
        } else {
            None
        };
        plans[rng.gen_range(0..notes)].push(Planned { event, context });
    }

    let prefix = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let mut corpus = Corpus::new(split);
    for (n, plan) in plans.into_iter().enumerate() {
        let doc_id = format!("{prefix}-{:04}", n + 1);
        let mut w = NoteWriter {
            text: String::new(),
            chars: 0,
            sentences_in_section: 0,
        };
        let mut spans = Vec::new();
        w.header(HEADERS[rng.gen_range(0..HEADERS.len())]);
        w.sentence_start();
        w.push(FILLERS[rng.gen_range(0..FILLERS.len())]);
        w.push(".");
        for p in plan {
            if w.sentences_in_section >= 4 && rng.gen_range(0..3) == 0 {
                w.header(HEADERS[rng.gen_range(0..HEADERS.len())]);
            }
            let drug = pick_drug(p.event, rng);
            let mut b = SentenceBuilder { rng: &mut *rng };
            let (before, after) = match (p.event, &p.context) {
                (EventLabel::Disposition, Some(ctx)) => b.disposition(ctx),
                (EventLabel::NoDisposition, _) => b.templated(NO_DISPOSITION),
                _ => b.templated(UNDETERMINED),
            };
            w.sentence_start();
            let lead = if before.is_empty() {
                String::new()
            } else {
                capitalize(&before) + " "
            };
            w.push(&lead);
            let start = w.chars;
            if lead.is_empty() {
                w.push(&capitalize(drug));
            } else {
                w.push(drug);
            }
            let span = Span::new(start, w.chars);
            if !after.is_empty() {
                w.push(" ");
                w.push(&after);
            }
            w.push(".");
            spans.push((span, p.event, p.context));
            if rng.gen_range(0..4) == 0 {
                w.sentence_start();
                w.push(FILLERS[rng.gen_range(0..FILLERS.len())]);
                w.push(".");
            }
        }
        w.push("\n");
        let note = ClinicalNote::new(doc_id.clone(), w.text)?;
        for (i, (span, event, context)) in spans.into_iter().enumerate() {
            corpus.mentions.push(MedicationMention {
                mention_id: format!("T{}", i + 1),
                doc_id: doc_id.clone(),
                span,
                surface: note.slice(span)?.to_string(),
                event: Some(event),
                context,
            });
        }
        corpus.notes.push(note);
    }
    Ok(corpus)
}

/// Generates the (train, test) corpus pair. Deterministic for a fixed config.
pub fn generate(config: &GenConfig) -> Result<(Corpus, Corpus)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train = generate_split(&config.train, config.train_notes, Split::Train, &mut rng)?;
    let test = generate_split(&config.test, config.test_notes, Split::Test, &mut rng)?;
    Ok((train, test))
}

/// Generates and writes `dir/train` and `dir/test`. The configuration is
/// validated before anything touches the filesystem.
pub fn generate_to_dir(config: &GenConfig, dir: impl AsRef<Path>) -> Result<(Corpus, Corpus)> {
    let (train, test) = generate(config)?;
    write_corpus(dir.as_ref().join("train"), &train)?;
    write_corpus(dir.as_ref().join("test"), &test)?;
    Ok((train, test))
}

/// Label histogram of a corpus in the same shape as the generator config.
pub fn histogram(corpus: &Corpus) -> SplitCounts {
    let mut h = SplitCounts::zero();
    for m in &corpus.mentions {
        h.drug += 1;
        if let Some(e) = m.event {
            *h.events.entry(e).or_default() += 1;
        }
        if let (true, Some(ctx)) = (m.is_disposition(), m.context) {
            for d in ContextDimension::ALL {
                *h.context.entry(*d).or_default().entry(ctx.get(*d).to_string()).or_default() += 1;
            }
        }
    }
    h
}

/// Plain-text table of one or more histograms, one column per split.
pub fn render_histogram(columns: &[(&str, &SplitCounts)]) -> String {
    let mut out = String::new();
    let row = |out: &mut String, name: &str, values: Vec<usize>| {
        let _ = write!(out, "{name:<28}");
        for v in values {
            let _ = write!(out, " {v:>8}");
        }
        out.push('\n');
    };
    let _ = write!(out, "{:<28}", "label");
    for (name, _) in columns {
        let _ = write!(out, " {name:>8}");
    }
    out.push('\n');
    row(&mut out, "Drug", columns.iter().map(|(_, c)| c.drug).collect());
    for e in EventLabel::ALL {
        row(&mut out, e.as_str(), columns.iter().map(|(_, c)| c.event(*e)).collect());
    }
    for d in ContextDimension::ALL {
        for class in d.classes() {
            let values = columns
                .iter()
                .map(|(_, c)| c.context.get(d).and_then(|m| m.get(class)).copied().unwrap_or(0))
                .collect();
            row(&mut out, &format!("{d}.{class}"), values);
        }
    }
    out
}
