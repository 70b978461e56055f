//! Task-3 context classification.
//!
//! Each Disposition mention is represented by a fixed-dimension embedding
//! (computed externally, or by the deterministic [`hash_embed`] fallback) and
//! classified along each of the five context dimensions by its own
//! one-vs-rest linear SVM.
//!
//! Training is primal stochastic subgradient descent on the regularized hinge
//! loss with step `1 / (lambda * t)`. The bias is folded into the weight
//! vector as a constant feature and regularized with it; after every step the
//! weights are projected onto the ball of radius `1 / sqrt(lambda)`.
//!
//! External embedding producers should record how they pool a mention's
//! subword states (first subword, mean, ...); the file format does not carry it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::hash::Hasher;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use siphasher::sip::SipHasher13;

use crate::corpus::ContextDimension;
use crate::error::{Error, Result};
use crate::postprocess::DimensionPredictions;
use crate::preprocess::{tokenize_str, Task3Instance};

pub const DEFAULT_EMBED_DIM: usize = 256;
pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_EPOCHS: usize = 100;
/// Words on each side of the mention that get position-specific features.
pub const POSITION_WINDOW: usize = 5;

const MODEL_MAGIC: &str = "medctx-linear-svm 1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    /// Corpus-wide mention key (`doc_id:mention_id`).
    pub mention_id: String,
    pub vector: Vec<f64>,
}

/// Embedding records sharing one dimension, keyed by mention id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    records: Vec<EmbeddingRecord>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, mention_id: &str) -> Option<&EmbeddingRecord> {
        self.index.get(mention_id).map(|&i| &self.records[i])
    }

    /// Adds a record, enforcing dimension, finiteness and id uniqueness.
    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<()> {
        if record.vector.len() != self.dim {
            return Err(Error::Format(format!(
                "record {} has dimension {}, table dimension is {}",
                record.mention_id,
                record.vector.len(),
                self.dim
            )));
        }
        if let Some(i) = record.vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "record {} has non-finite component {} at position {i}",
                record.mention_id, record.vector[i]
            )));
        }
        if self.index.contains_key(&record.mention_id) {
            return Err(Error::Format(format!("duplicate record id {}", record.mention_id)));
        }
        self.index.insert(record.mention_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    /// Text form: `d=<int>` header, then `id<TAB>v1 v2 ... vd` per record.
    pub fn to_text(&self) -> String {
        let mut out = format!("d={}\n", self.dim);
        for r in &self.records {
            out.push_str(&r.mention_id);
            out.push('\t');
            for (i, v) in r.vector.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::Format("embedding file is empty".into()))?;
        let dim: usize = header
            .1
            .trim()
            .strip_prefix("d=")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::Format(format!("line {}: expected header d=<int>, found {:?}", header.0 + 1, header.1)))?;
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("line {}: missing tab after mention id", i + 1)))?;
            let vector = values
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Format(format!("line {} ({id}): {e}", i + 1)))?;
            table
                .insert(EmbeddingRecord {
                    mention_id: id.to_string(),
                    vector,
                })
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        }
        Ok(table)
    }
}

/// Reads an embedding file.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text).map_err(|e| e.in_file(path))
}

fn feature_hash(feature: &str, seed: u64) -> u64 {
    let mut h = SipHasher13::new_with_keys(seed, 0x6d65_6463_7478_6873);
    h.write(feature.as_bytes());
    h.finish()
}

/// Deterministic feature-hashed embedding of a context window.
///
/// Features are the window's lowercased word tokens plus, for words within
/// [`POSITION_WINDOW`] of the mention, the word tagged with its signed
/// offset. Each feature adds ±1 to one of `dim` buckets; the result is
/// L2-normalized. A window without tokens yields the zero vector and a
/// warning.
pub fn hash_embed(instance: &Task3Instance, dim: usize, seed: u64) -> (EmbeddingRecord, Option<String>) {
    let tokens = tokenize_str(&instance.window, 0);
    let mut vector = vec![0.0; dim];
    let inside: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.span.overlaps(&instance.mention_span))
        .map(|(i, _)| i)
        .collect();
    let (first, last) = match (inside.first(), inside.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            // mention not found in the window: anchor on its start offset
            let anchor = tokens.iter().position(|t| t.span.start >= instance.mention_span.start).unwrap_or(tokens.len());
            (anchor, anchor.saturating_sub(1))
        }
    };

    let mut add = |feature: String| {
        let h = feature_hash(&feature, seed);
        let bucket = (h % dim as u64) as usize;
        vector[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
    };
    for (i, t) in tokens.iter().enumerate() {
        let word = t.text.to_lowercase();
        if i >= first && i <= last {
            continue;
        }
        add(format!("w:{word}"));
        if i < first && first - i <= POSITION_WINDOW {
            add(format!("l{}:{word}", first - i));
        } else if i > last && i - last <= POSITION_WINDOW {
            add(format!("r{}:{word}", i - last));
        }
    }

    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    let warning = if norm > 0.0 {
        vector.iter_mut().for_each(|v| *v /= norm);
        None
    } else {
        Some(format!("empty context window for {}; using zero vector", instance.key))
    };
    (
        EmbeddingRecord {
            mention_id: instance.key.clone(),
            vector,
        },
        warning,
    )
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight each instance by the inverse frequency of its class.
    pub balanced: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: DEFAULT_LAMBDA,
            epochs: DEFAULT_EPOCHS,
            seed: 42,
            balanced: false,
        }
    }
}

/// One-vs-rest linear SVM for one context dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub dimension: ContextDimension,
    /// Taxonomy order; includes classes unseen in training.
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub params: SvmParams,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvmModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Per-class scores `w·x + b` in taxonomy order.
    pub fn scores(&self, vector: &[f64]) -> Result<Vec<f64>> {
        if vector.len() != self.feature_dim() {
            return Err(Error::Shape {
                expected: self.feature_dim(),
                actual: vector.len(),
            });
        }
        Ok(self.weights.iter().zip(&self.biases).map(|(w, b)| dot(w, vector) + b).collect())
    }

    /// Argmax class; ties resolve to the earliest class in taxonomy order.
    pub fn predict(&self, record: &EmbeddingRecord) -> Result<&str> {
        let scores = self.scores(&record.vector)?;
        let best = (1..scores.len()).fold(0, |best, i| if scores[i] > scores[best] { i } else { best });
        Ok(&self.classes[best])
    }

    /// Regularized hinge objective summed over the one-vs-rest problems.
    pub fn objective(&self, data: &[(&EmbeddingRecord, &str)]) -> Result<f64> {
        let n = data.len().max(1) as f64;
        let mut total = 0.0;
        for (c, class) in self.classes.iter().enumerate() {
            let w = &self.weights[c];
            let reg = 0.5 * self.params.lambda * (dot(w, w) + self.biases[c] * self.biases[c]);
            let mut hinge = 0.0;
            for (r, label) in data {
                let y = if label == class { 1.0 } else { -1.0 };
                let s = dot(w, &r.vector) + self.biases[c];
                hinge += (1.0 - y * s).max(0.0);
            }
            total += reg + hinge / n;
        }
        Ok(total)
    }

    /// Versioned text form; floats are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC}");
        let _ = writeln!(out, "dimension {}", self.dimension);
        let _ = writeln!(out, "lambda {}", self.params.lambda);
        let _ = writeln!(out, "epochs {}", self.params.epochs);
        let _ = writeln!(out, "seed {}", self.params.seed);
        let _ = writeln!(out, "balanced {}", self.params.balanced);
        let _ = writeln!(out, "features {}", self.feature_dim());
        for (c, class) in self.classes.iter().enumerate() {
            let _ = write!(out, "class {class} {}", self.biases[c]);
            for v in &self.weights[c] {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: String| Error::Parse { line: line + 1, message: msg };
        let (n, magic) = lines.next().ok_or_else(|| Error::Format("model file is empty".into()))?;
        if magic.trim() != MODEL_MAGIC {
            return Err(bad(n, format!("expected {MODEL_MAGIC:?}, found {magic:?}")));
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (n, line) = lines.next().ok_or_else(|| Error::Format(format!("model file ends before {name}")))?;
            let value = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| bad(n, format!("expected {name}, found {line:?}")))?;
            Ok((n, value.to_string()))
        };
        let (n, dim) = field("dimension")?;
        let dimension: ContextDimension = dim.parse().map_err(|e: Error| bad(n, e.to_string()))?;
        let (n, lambda) = field("lambda")?;
        let lambda: f64 = lambda.parse().map_err(|_| bad(n, format!("bad lambda {lambda:?}")))?;
        let (n, epochs) = field("epochs")?;
        let epochs: usize = epochs.parse().map_err(|_| bad(n, format!("bad epochs {epochs:?}")))?;
        let (n, seed) = field("seed")?;
        let seed: u64 = seed.parse().map_err(|_| bad(n, format!("bad seed {seed:?}")))?;
        let (n, balanced) = field("balanced")?;
        let balanced: bool = balanced.parse().map_err(|_| bad(n, format!("bad flag {balanced:?}")))?;
        let (n, features) = field("features")?;
        let features: usize = features.parse().map_err(|_| bad(n, format!("bad feature count {features:?}")))?;

        let expected = dimension.classes();
        let mut classes = Vec::new();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for _ in 0..expected.len() {
            let (n, rest) = field("class")?;
            let mut parts = rest.split(' ');
            let class = parts.next().unwrap_or_default().to_string();
            let values = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| bad(n, e.to_string()))?;
            if values.len() != features + 1 {
                return Err(bad(n, format!("class {class} has {} values, expected {}", values.len(), features + 1)));
            }
            classes.push(class);
            biases.push(values[0]);
            weights.push(values[1..].to_vec());
        }
        if classes != expected {
            return Err(Error::Format(format!("model classes {classes:?} do not match {dimension} taxonomy {expected:?}")));
        }
        Ok(LinearSvmModel {
            dimension,
            classes,
            weights,
            biases,
            params: SvmParams {
                lambda,
                epochs,
                seed,
                balanced,
            },
        })
    }
}

/// Trains one one-vs-rest linear SVM for `dimension`.
///
/// Classes without training instances keep zero weights. When only one class
/// is observed, that class gets a constant positive score.
pub fn train_svm(
    instances: &[(&EmbeddingRecord, &str)],
    dimension: ContextDimension,
    params: SvmParams,
) -> Result<LinearSvmModel> {
    let Some(first) = instances.first() else {
        return Err(Error::Usage("train_svm needs at least one instance".into()));
    };
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be positive, got {}", params.lambda)));
    }
    let dim = first.0.vector.len();
    let classes: Vec<String> = dimension.classes().iter().map(|c| c.to_string()).collect();
    let mut labels = Vec::with_capacity(instances.len());
    for (r, label) in instances {
        if r.vector.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: r.vector.len(),
            });
        }
        labels.push(dimension.class_index(label)?);
    }
    let n = instances.len();
    let mut counts = vec![0usize; classes.len()];
    for &l in &labels {
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let sample_weight: Vec<f64> = labels
        .iter()
        .map(|&l| if params.balanced { n as f64 / (present * counts[l]) as f64 } else { 1.0 })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let orders: Vec<Vec<usize>> = (0..params.epochs)
        .map(|_| {
            order.shuffle(&mut rng);
            order.clone()
        })
        .collect();

    let radius = 1.0 / params.lambda.sqrt();
    let mut weights = vec![vec![0.0; dim]; classes.len()];
    let mut biases = vec![0.0; classes.len()];
    for c in 0..classes.len() {
        if counts[c] == 0 {
            continue;
        }
        if counts[c] == n {
            biases[c] = 1.0;
            continue;
        }
        // augmented weights: last component is the bias
        let mut w = vec![0.0; dim + 1];
        let mut t = 0usize;
        for epoch in &orders {
            for &i in epoch {
                t += 1;
                let eta = 1.0 / (params.lambda * t as f64);
                let x = &instances[i].0.vector;
                let y = if labels[i] == c { 1.0 } else { -1.0 };
                let margin = y * (dot(&w[..dim], x) + w[dim]);
                let shrink = 1.0 - 1.0 / t as f64;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    let step = eta * y * sample_weight[i];
                    for (wk, xk) in w[..dim].iter_mut().zip(x) {
                        *wk += step * xk;
                    }
                    w[dim] += step;
                }
                let norm = dot(&w, &w).sqrt();
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        biases[c] = w[dim];
        w.truncate(dim);
        weights[c] = w;
    }
    Ok(LinearSvmModel {
        dimension,
        classes,
        weights,
        biases,
        params,
    })
}

/// Free-function form of [`LinearSvmModel::predict`].
pub fn predict<'m>(model: &'m LinearSvmModel, record: &EmbeddingRecord) -> Result<&'m str> {
    model.predict(record)
}

/// Predicts every dimension for every key in `mention_keys`.
pub fn classify_corpus(
    models: &[LinearSvmModel],
    embeddings: &EmbeddingTable,
    mention_keys: &[String],
) -> Result<DimensionPredictions> {
    let dims: HashSet<ContextDimension> = models.iter().map(|m| m.dimension).collect();
    let missing_dims: Vec<String> = ContextDimension::ALL
        .iter()
        .filter(|d| !dims.contains(d))
        .map(|d| d.to_string())
        .collect();
    if !missing_dims.is_empty() || models.len() != ContextDimension::ALL.len() {
        return Err(Error::Completeness {
            what: "one model per context dimension",
            ids: missing_dims,
        });
    }
    let missing: Vec<String> = mention_keys
        .iter()
        .filter(|k| embeddings.get(k).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Completeness {
            what: "embeddings",
            ids: missing,
        });
    }
    let mut out = DimensionPredictions::new();
    for model in models {
        let mut preds = BTreeMap::new();
        for key in mention_keys {
            let record = embeddings.get(key).expect("checked above");
            preds.insert(key.clone(), model.predict(record)?.to_string());
        }
        out.insert(model.dimension, preds);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn rec(id: &str, v: &[f64]) -> EmbeddingRecord {
        EmbeddingRecord {
            mention_id: id.into(),
            vector: v.to_vec(),
        }
    }

    fn instance(window: &str, mention: &str) -> Task3Instance {
        let start = window.find(mention).unwrap_or(0);
        Task3Instance {
            key: "d:T1".into(),
            doc_id: "d".into(),
            mention_id: "T1".into(),
            window: window.into(),
            mention_span: Span::new(start, start + mention.len()),
            labels: None,
        }
    }

    #[test]
    fn hash_embed_deterministic_and_normalized() {
        let i = instance("We will start aspirin tomorrow.", "aspirin");
        let (a, wa) = hash_embed(&i, 256, 7);
        let (b, _) = hash_embed(&i, 256, 7);
        assert_eq!(a, b);
        assert!(wa.is_none());
        let norm: f64 = a.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        let (c, _) = hash_embed(&i, 256, 8);
        assert_ne!(a.vector, c.vector);
    }

    #[test]
    fn hash_embed_empty_window() {
        let i = instance("", "");
        let (r, w) = hash_embed(&i, 16, 0);
        assert!(r.vector.iter().all(|v| *v == 0.0));
        assert!(w.is_some());
    }

    #[test]
    fn hash_embed_position_matters() {
        let a = hash_embed(&instance("not start aspirin today", "aspirin"), 256, 1).0;
        let b = hash_embed(&instance("start aspirin today not", "aspirin"), 256, 1).0;
        assert_ne!(a.vector, b.vector);
    }

    #[test]
    fn embeddings_parse_and_errors() {
        let ok = "d=3\na\t1 2 3\nb\t0.5 -1 2e-3\nc\t0 0 0\n";
        let t = EmbeddingTable::parse(ok).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.get("b").unwrap().vector, vec![0.5, -1.0, 0.002]);
        assert_eq!(EmbeddingTable::parse(&t.to_text()).unwrap(), t);

        let ragged = EmbeddingTable::parse("d=3\na\t1 2 3\nb\t1 2\n").unwrap_err();
        assert!(ragged.to_string().contains("b"), "{ragged}");
        assert!(EmbeddingTable::parse("d=2\na\t1 NaN\n").is_err());
        assert!(EmbeddingTable::parse("d=2\na\t1 inf\n").is_err());
        assert!(EmbeddingTable::parse("d=2\na\t1 2\na\t3 4\n").is_err());
        assert!(EmbeddingTable::parse("a\t1 2\n").is_err());
    }

    fn toy() -> Vec<(EmbeddingRecord, &'static str)> {
        vec![
            (rec("p1", &[1.0, 1.0]), "Negated"),
            (rec("p2", &[1.0, -1.0]), "Negated"),
            (rec("p3", &[-1.0, 1.0]), "NotNegated"),
            (rec("p4", &[-1.0, -1.0]), "NotNegated"),
        ]
    }

    #[test]
    fn separable_toy_set() {
        let data = toy();
        let refs: Vec<(&EmbeddingRecord, &str)> = data.iter().map(|(r, l)| (r, *l)).collect();
        let params = SvmParams {
            epochs: 200,
            ..SvmParams::default()
        };
        let m = train_svm(&refs, ContextDimension::Negation, params).unwrap();
        for (r, l) in &data {
            assert_eq!(m.predict(r).unwrap(), *l);
        }
        let initial = LinearSvmModel {
            weights: vec![vec![0.0; 2]; 2],
            biases: vec![0.0; 2],
            ..m.clone()
        };
        assert!(m.objective(&refs).unwrap() < initial.objective(&refs).unwrap());
    }

    #[test]
    fn taxonomy_mismatch() {
        let r = rec("a", &[1.0]);
        let err = train_svm(&[(&r, "Start")], ContextDimension::Negation, SvmParams::default()).unwrap_err();
        assert!(matches!(err, Error::Taxonomy { .. }));
    }

    #[test]
    fn single_class_predicts_everywhere() {
        let a = rec("a", &[1.0, 0.0]);
        let b = rec("b", &[0.0, 1.0]);
        let m = train_svm(&[(&a, "Patient"), (&b, "Patient")], ContextDimension::Actor, SvmParams::default()).unwrap();
        for v in [[0.0, 0.0], [-5.0, 3.0], [100.0, -100.0]] {
            assert_eq!(m.predict(&rec("x", &v)).unwrap(), "Patient");
        }
        assert!(m.weights[0].iter().all(|w| *w == 0.0));
    }

    #[test]
    fn unseen_classes_score_zero() {
        let a = rec("a", &[1.0, 0.0]);
        let b = rec("b", &[0.0, 1.0]);
        let m = train_svm(&[(&a, "Start"), (&b, "OtherChange")], ContextDimension::Action, SvmParams::default()).unwrap();
        assert_eq!(m.classes.len(), 7);
        let scores = m.scores(&[0.3, 0.3]).unwrap();
        for c in [1, 2, 3, 4, 6] {
            assert_eq!(scores[c], 0.0);
        }
        assert_eq!(m.predict(&b).unwrap(), "OtherChange");
    }

    #[test]
    fn predict_argmax_and_ties() {
        let m = LinearSvmModel {
            dimension: ContextDimension::Actor,
            classes: ContextDimension::Actor.classes().iter().map(|s| s.to_string()).collect(),
            weights: vec![vec![0.0]; 3],
            biases: vec![2.0, -1.0, 0.5],
            params: SvmParams::default(),
        };
        assert_eq!(m.predict(&rec("x", &[0.0])).unwrap(), "Physician");
        let zero = LinearSvmModel {
            biases: vec![0.0; 3],
            ..m.clone()
        };
        assert_eq!(zero.predict(&rec("x", &[0.0])).unwrap(), "Physician");
        assert!(matches!(m.predict(&rec("x", &[0.0, 1.0])), Err(Error::Shape { expected: 1, actual: 2 })));
    }

    #[test]
    fn model_text_round_trip() {
        let data = toy();
        let refs: Vec<(&EmbeddingRecord, &str)> = data.iter().map(|(r, l)| (r, *l)).collect();
        let m = train_svm(&refs, ContextDimension::Negation, SvmParams::default()).unwrap();
        let text = m.to_text();
        assert_eq!(LinearSvmModel::from_text(&text).unwrap(), m);
        assert!(LinearSvmModel::from_text(&text.replace("Negated", "Nope")).is_err());
        assert!(LinearSvmModel::from_text("garbage").is_err());
    }

    #[test]
    fn classify_requires_embeddings() {
        let data = toy();
        let refs: Vec<(&EmbeddingRecord, &str)> = data.iter().map(|(r, l)| (r, *l)).collect();
        let mut models = Vec::new();
        for dim in ContextDimension::ALL {
            let labeled: Vec<(&EmbeddingRecord, &str)> = refs.iter().map(|(r, _)| (*r, dim.classes()[0])).collect();
            models.push(train_svm(&labeled, *dim, SvmParams::default()).unwrap());
        }
        let mut table = EmbeddingTable::new(2);
        for (r, _) in &data {
            table.insert(r.clone()).unwrap();
        }
        let keys: Vec<String> = vec!["p1".into(), "p2".into(), "p3".into()];
        let preds = classify_corpus(&models, &table, &keys).unwrap();
        assert_eq!(preds.values().map(|m| m.len()).sum::<usize>(), 15);
        assert!(classify_corpus(&models, &table, &[]).unwrap().values().all(|m| m.is_empty()));
        let err = classify_corpus(&models, &table, &["zz".into()]).unwrap_err();
        assert!(matches!(err, Error::Completeness { ref ids, .. } if ids == &["zz"]));
        assert!(classify_corpus(&models[..4], &table, &keys).is_err());
    }
}
