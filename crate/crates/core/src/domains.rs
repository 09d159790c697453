//! DAG family constructors and synthetic score generators.
//!
//! The builders produce the two parametric families used throughout the test
//! and evaluation harness: digit-prefix trees (a node per digit prefix, a
//! leaf per full digit string) and interval lattices (a node per integer
//! interval, a leaf per singleton). [`load_hierarchy`] reads arbitrary
//! hierarchies from the DAG JSON format or a `parent<TAB>child` edge list.
//!
//! Score generators replace pretrained-model scoring: they draw per-leaf
//! probability vectors from a configurable family, optionally as a finite
//! mixture of "atoms" so that downstream coverage can be computed exactly
//! rather than estimated. Every draw is reproducible from seeds alone.

use std::path::Path;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{Dag, DagError, ScoreVector, ValidationMode};
use crate::records::CalibrationRecord;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("structure too large: {0}")]
    TooLarge(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown generator: {0}")]
    UnknownGenerator(String),
    #[error("generator is not enumerable: {0}")]
    NotEnumerable(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("bad spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// Digit-prefix tree: one node per digit string of length <= `positions`,
/// with an edge from each prefix to its one-digit extensions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DigitTreeSpec {
    pub positions: u32,
    pub alphabet: u32,
}

const MAX_LEAVES: u64 = 1_000_000;

/// Builds the digit tree: `positions + 1` layers, `alphabet^positions`
/// leaves, node labels are prefix strings padded with `∅`.
pub fn build_digit_tree(spec: &DigitTreeSpec) -> Result<Dag, DomainError> {
    if spec.positions < 1 || spec.alphabet < 1 {
        return Err(DomainError::BadSpec(
            "positions and alphabet must be >= 1".into(),
        ));
    }
    if spec.alphabet > 10 {
        return Err(DomainError::BadSpec(
            "alphabet is limited to digits 0-9".into(),
        ));
    }
    let k = spec.positions;
    let a = spec.alphabet as u64;
    a.checked_pow(k)
        .filter(|&l| l <= MAX_LEAVES)
        .ok_or_else(|| {
            DomainError::TooLarge(format!("alphabet^positions exceeds {MAX_LEAVES} leaves"))
        })?;

    // Level l occupies the contiguous id block starting at sum_{i<l} a^i.
    let mut offsets = vec![0u64; k as usize + 2];
    for l in 0..=k as usize {
        offsets[l + 1] = offsets[l] + a.pow(l as u32);
    }
    let node_count = offsets[k as usize + 1];

    let mut edges = Vec::with_capacity((node_count - 1) as usize);
    let mut labels = Vec::with_capacity(node_count as usize);
    for l in 0..=k {
        let block = a.pow(l);
        for v in 0..block {
            let id = (offsets[l as usize] + v) as u32;
            let mut text = String::new();
            let mut digits = vec![0u8; l as usize];
            let mut rest = v;
            for slot in digits.iter_mut().rev() {
                *slot = (rest % a) as u8;
                rest /= a;
            }
            for d in &digits {
                text.push(char::from(b'0' + d));
            }
            for _ in l..k {
                text.push('∅');
            }
            labels.push((id, text));
            if l < k {
                for d in 0..a {
                    let child = (offsets[l as usize + 1] + v * a + d) as u32;
                    edges.push((id, child));
                }
            }
        }
    }
    Ok(Dag::new(node_count as usize, edges, Some(labels))?)
}

/// Interval lattice over integer points `lo..=hi`: one node per interval
/// `[a, b]`, edges to the two immediately contained intervals, leaves are
/// the singletons.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntervalDagSpec {
    pub lo: i64,
    pub hi: i64,
}

/// Builds the full interval lattice: `n(n+1)/2` nodes for `n = hi - lo + 1`.
pub fn build_interval_dag(spec: &IntervalDagSpec) -> Result<Dag, DomainError> {
    if spec.lo > spec.hi {
        return Err(DomainError::BadSpec(format!(
            "lo = {} exceeds hi = {}",
            spec.lo, spec.hi
        )));
    }
    let n = (spec.hi - spec.lo + 1) as u64;
    if n > 501 {
        return Err(DomainError::TooLarge(format!(
            "interval span {} exceeds 500",
            n - 1
        )));
    }
    // Ids ordered by interval length descending, then start ascending, so
    // the root is id 0 and the singleton leaves form the final block.
    let id_of = |a: i64, b: i64| -> u32 {
        let len = (b - a) as u64;
        // intervals longer than `len`: lengths len+1..=n-1, count (n-1-len) each with (n - L) starts
        let longer: u64 = (len + 1..n).map(|l| n - l).sum();
        (longer + (a - spec.lo) as u64) as u32
    };
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    for len in (0..n as i64).rev() {
        for a in spec.lo..=(spec.hi - len) {
            let b = a + len;
            let id = id_of(a, b);
            let text = if a == b {
                format!("[{a}]")
            } else {
                format!("[{a}, {b}]")
            };
            labels.push((id, text));
            if len > 0 {
                edges.push((id, id_of(a + 1, b)));
                edges.push((id, id_of(a, b - 1)));
            }
        }
    }
    let node_count = (n * (n + 1) / 2) as usize;
    Ok(Dag::new(node_count, edges, Some(labels))?)
}

/// Leaf scores of a digit tree as the product of per-position categorical
/// distributions: leaf `d_1..d_k` gets `prod_i probs[i][d_i]`.
pub fn product_digit_scores(
    dag: &Dag,
    per_position: &[Vec<f64>],
) -> Result<ScoreVector, DomainError> {
    if per_position.is_empty() {
        return Err(DomainError::InvalidDistribution(
            "need at least one position".into(),
        ));
    }
    let alphabet = per_position[0].len();
    for (i, dist) in per_position.iter().enumerate() {
        if dist.len() != alphabet {
            return Err(DomainError::InvalidDistribution(format!(
                "position {i} has {} entries, expected {alphabet}",
                dist.len()
            )));
        }
        let mut sum = 0.0;
        for &p in dist {
            if !p.is_finite() || p < 0.0 {
                return Err(DomainError::InvalidDistribution(format!(
                    "position {i} has a negative or non-finite entry"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DomainError::InvalidDistribution(format!(
                "position {i} sums to {sum}"
            )));
        }
    }
    let k = per_position.len() as u32;
    let expected_leaves = (alphabet as u64).pow(k);
    if dag.leaf_count() as u64 != expected_leaves {
        return Err(DomainError::BadSpec(format!(
            "dag has {} leaves, digit product needs {expected_leaves}",
            dag.leaf_count()
        )));
    }
    let mut probs = vec![0.0; expected_leaves as usize];
    for (leaf, slot) in probs.iter_mut().enumerate() {
        let mut value = 1.0;
        let mut rest = leaf;
        for pos in (0..k as usize).rev() {
            value *= per_position[pos][rest % alphabet];
            rest /= alphabet;
        }
        *slot = value;
    }
    Ok(ScoreVector::new(dag, probs, ValidationMode::Strict)?)
}

/// Score-vector families for synthetic domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum GeneratorFamily {
    /// A uniformly chosen peak leaf with Dirichlet noise: alpha is
    /// `peak_concentration` at the peak, `noise_concentration` elsewhere.
    DirichletConcentrated {
        peak_concentration: f64,
        noise_concentration: f64,
    },
    /// Softmax of standard-normal logits scaled by `1 / temperature`.
    TemperatureSoftmax { temperature: f64 },
    /// Independent per-position Dirichlet(`concentration`) categoricals
    /// multiplied into digit-tree leaf scores.
    ProductDigit {
        positions: u32,
        alphabet: u32,
        concentration: f64,
    },
}

impl GeneratorFamily {
    fn name(&self) -> &'static str {
        match self {
            GeneratorFamily::DirichletConcentrated { .. } => "dirichlet-concentrated",
            GeneratorFamily::TemperatureSoftmax { .. } => "temperature-softmax",
            GeneratorFamily::ProductDigit { .. } => "product-digit",
        }
    }
}

/// Generator spec file: `{"family": "...", "params": {...}, "seed": int,
/// "atoms": int?, "miscalibration": r?}`.
///
/// With `atoms` set, the generator is a finite equal-weight mixture of that
/// many score vectors materialized once from `seed`; this is what makes
/// exact coverage computation possible. Without it, every record draws a
/// fresh score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub family: GeneratorFamily,
    pub seed: u64,
    pub atoms: Option<u32>,
    /// Mixes the truth law toward uniform: 0 keeps scores calibrated, 1
    /// draws the true leaf uniformly regardless of scores.
    pub miscalibration: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSpecWire {
    family: String,
    params: serde_json::Value,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atoms: Option<u32>,
    #[serde(default)]
    miscalibration: f64,
}

impl Serialize for GeneratorSpec {
    fn serialize<S>(&self, serializer: S) -> Result<S::Ok, S::Error>
    where
        S: serde::Serializer,
    {
        let params = match &self.family {
            GeneratorFamily::DirichletConcentrated {
                peak_concentration,
                noise_concentration,
            } => serde_json::json!({
                "peak_concentration": peak_concentration,
                "noise_concentration": noise_concentration,
            }),
            GeneratorFamily::TemperatureSoftmax { temperature } => {
                serde_json::json!({ "temperature": temperature })
            }
            GeneratorFamily::ProductDigit {
                positions,
                alphabet,
                concentration,
            } => serde_json::json!({
                "positions": positions,
                "alphabet": alphabet,
                "concentration": concentration,
            }),
        };
        GeneratorSpecWire {
            family: self.family.name().to_string(),
            params,
            seed: self.seed,
            atoms: self.atoms,
            miscalibration: self.miscalibration,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = GeneratorSpecWire::deserialize(deserializer)?;
        let params = wire.params;
        let family = match wire.family.as_str() {
            "dirichlet-concentrated" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    peak_concentration: f64,
                    noise_concentration: f64,
                }
                let p: P = serde_json::from_value(params).map_err(D::Error::custom)?;
                GeneratorFamily::DirichletConcentrated {
                    peak_concentration: p.peak_concentration,
                    noise_concentration: p.noise_concentration,
                }
            }
            "temperature-softmax" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    temperature: f64,
                }
                let p: P = serde_json::from_value(params).map_err(D::Error::custom)?;
                GeneratorFamily::TemperatureSoftmax {
                    temperature: p.temperature,
                }
            }
            "product-digit" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    positions: u32,
                    alphabet: u32,
                    concentration: f64,
                }
                let p: P = serde_json::from_value(params).map_err(D::Error::custom)?;
                GeneratorFamily::ProductDigit {
                    positions: p.positions,
                    alphabet: p.alphabet,
                    concentration: p.concentration,
                }
            }
            other => {
                return Err(D::Error::custom(format!(
                    "unknown generator family: {other}"
                )))
            }
        };
        Ok(GeneratorSpec {
            family,
            seed: wire.seed,
            atoms: wire.atoms,
            miscalibration: wire.miscalibration,
        })
    }
}

pub const MAX_ATOMS: u32 = 10_000;

/// One mixture component: a score vector plus the law the true leaf is
/// drawn from (equal to the scores when calibrated).
#[derive(Debug, Clone)]
pub struct Atom {
    pub weight: f64,
    pub scores: ScoreVector,
    pub truth: Vec<f64>,
}

/// Finite equal-weight mixture of score-vector atoms.
#[derive(Debug, Clone)]
pub struct AtomSet {
    pub atoms: Vec<Atom>,
}

impl AtomSet {
    pub fn single(scores: ScoreVector) -> Self {
        let truth = scores.probs().to_vec();
        AtomSet {
            atoms: vec![Atom {
                weight: 1.0,
                scores,
                truth,
            }],
        }
    }
}

impl GeneratorSpec {
    pub fn from_json_str(text: &str) -> Result<Self, DomainError> {
        serde_json::from_str(text).map_err(|e| DomainError::UnknownGenerator(e.to_string()))
    }

    fn validate(&self) -> Result<(), DomainError> {
        match &self.family {
            GeneratorFamily::DirichletConcentrated {
                peak_concentration,
                noise_concentration,
            } => {
                if !(peak_concentration.is_finite() && *peak_concentration > 0.0)
                    || !(noise_concentration.is_finite() && *noise_concentration > 0.0)
                {
                    return Err(DomainError::BadSpec(
                        "dirichlet concentrations must be positive".into(),
                    ));
                }
            }
            GeneratorFamily::TemperatureSoftmax { temperature } => {
                if !(temperature.is_finite() && *temperature > 0.0) {
                    return Err(DomainError::BadSpec("temperature must be positive".into()));
                }
            }
            GeneratorFamily::ProductDigit {
                positions,
                alphabet,
                concentration,
            } => {
                if *positions < 1 || *alphabet < 1 {
                    return Err(DomainError::BadSpec(
                        "positions and alphabet must be >= 1".into(),
                    ));
                }
                if !(concentration.is_finite() && *concentration > 0.0) {
                    return Err(DomainError::BadSpec(
                        "concentration must be positive".into(),
                    ));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.miscalibration) {
            return Err(DomainError::BadSpec(
                "miscalibration must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn draw_scores(&self, dag: &Dag, rng: &mut ChaCha8Rng) -> Result<ScoreVector, DomainError> {
        let nleaves = dag.leaf_count();
        match &self.family {
            GeneratorFamily::DirichletConcentrated {
                peak_concentration,
                noise_concentration,
            } => {
                let peak = rng.gen_range(0..nleaves);
                let mut raw = vec![0.0f64; nleaves];
                for (i, slot) in raw.iter_mut().enumerate() {
                    let alpha = if i == peak {
                        *peak_concentration
                    } else {
                        *noise_concentration
                    };
                    let gamma = Gamma::new(alpha, 1.0)
                        .map_err(|e| DomainError::BadSpec(format!("gamma shape {alpha}: {e}")))?;
                    *slot = gamma.sample(rng);
                }
                let total: f64 = raw.iter().sum();
                let probs: Vec<f64> = if total > 0.0 {
                    raw.iter().map(|v| v / total).collect()
                } else {
                    let mut p = vec![0.0; nleaves];
                    p[peak] = 1.0;
                    p
                };
                Ok(ScoreVector::new(dag, probs, ValidationMode::Strict)?)
            }
            GeneratorFamily::TemperatureSoftmax { temperature } => {
                let logits: Vec<f64> = (0..nleaves)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z / temperature
                    })
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
                Ok(ScoreVector::new(dag, probs, ValidationMode::Strict)?)
            }
            GeneratorFamily::ProductDigit {
                positions,
                alphabet,
                concentration,
            } => {
                let gamma = Gamma::new(*concentration, 1.0).map_err(|e| {
                    DomainError::BadSpec(format!("gamma shape {concentration}: {e}"))
                })?;
                let mut per_position = Vec::with_capacity(*positions as usize);
                for _ in 0..*positions {
                    let mut raw: Vec<f64> = (0..*alphabet).map(|_| gamma.sample(rng)).collect();
                    let total: f64 = raw.iter().sum();
                    if total > 0.0 {
                        for v in raw.iter_mut() {
                            *v /= total;
                        }
                    } else {
                        raw[0] = 1.0;
                    }
                    // Renormalize exactly enough for strict validation.
                    let s: f64 = raw.iter().sum();
                    for v in raw.iter_mut() {
                        *v /= s;
                    }
                    per_position.push(raw);
                }
                product_digit_scores(dag, &per_position)
            }
        }
    }

    fn truth_law(&self, scores: &ScoreVector) -> Vec<f64> {
        let n = scores.probs().len();
        let c = self.miscalibration;
        scores
            .probs()
            .iter()
            .map(|&p| (1.0 - c) * p + c / n as f64)
            .collect()
    }

    /// Materializes the finite atom mixture. Errors with `NotEnumerable`
    /// when the spec has no `atoms` bound (or an absurd one).
    pub fn materialize_atoms(&self, dag: &Dag) -> Result<AtomSet, DomainError> {
        self.validate()?;
        let count = self.atoms.ok_or_else(|| {
            DomainError::NotEnumerable("generator has no finite atom count".into())
        })?;
        if count == 0 || count > MAX_ATOMS {
            return Err(DomainError::NotEnumerable(format!(
                "atom count {count} outside 1..={MAX_ATOMS}"
            )));
        }
        let weight = 1.0 / count as f64;
        let mut atoms = Vec::with_capacity(count as usize);
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(i as u64);
            let scores = self.draw_scores(dag, &mut rng)?;
            let truth = self.truth_law(&scores);
            atoms.push(Atom {
                weight,
                scores,
                truth,
            });
        }
        Ok(AtomSet { atoms })
    }

    /// Draws `n` i.i.d. records. The true leaf comes from the record's own
    /// truth law, so scores are calibrated when `miscalibration` is zero.
    /// Byte-identical output for identical `(spec, dag, n, seed)`.
    pub fn sample_records(
        &self,
        dag: &Arc<Dag>,
        n: usize,
        seed: u64,
    ) -> Result<Vec<CalibrationRecord>, DomainError> {
        self.validate()?;
        let atoms = match self.atoms {
            Some(_) => Some(self.materialize_atoms(dag)?),
            None => None,
        };
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Record streams live in the upper half of the stream space so
            // they never collide with atom-materialization streams.
            rng.set_stream(1 << 63 | i as u64);
            let (scores, truth) = match &atoms {
                Some(set) => {
                    let idx = rng.gen_range(0..set.atoms.len());
                    let atom = &set.atoms[idx];
                    (atom.scores.clone(), atom.truth.clone())
                }
                None => {
                    let scores = self.draw_scores(dag, &mut rng)?;
                    let truth = self.truth_law(&scores);
                    (scores, truth)
                }
            };
            let leaf_index = sample_categorical(&truth, &mut rng);
            let leaf_id = dag.leaf_id(leaf_index as u32);
            records.push(CalibrationRecord::new(scores, Some(leaf_id)));
        }
        Ok(records)
    }
}

/// Inverse-CDF draw from an (approximately normalized) weight vector.
fn sample_categorical(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.gen_range(0.0..1.0) * total;
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    weights.len() - 1
}

/// Parses a hierarchy from DAG JSON or `parent<TAB>child` edge-list text.
/// Edge-list node ids are assigned by first appearance; names become labels.
pub fn parse_hierarchy(text: &str) -> Result<Dag, DomainError> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(DomainError::ParseError("empty hierarchy file".into()));
    }
    if trimmed.starts_with('{') {
        let json: crate::dag::DagJson =
            serde_json::from_str(text).map_err(|e| DomainError::ParseError(e.to_string()))?;
        return Ok(Dag::from_json(json)?);
    }
    let mut names: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (parent, child) = line.split_once('\t').ok_or_else(|| {
            DomainError::ParseError(format!("line {}: expected parent<TAB>child", lineno + 1))
        })?;
        let mut id_of = |name: &str| -> u32 {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                (names.len() - 1) as u32
            })
        };
        let p = id_of(parent.trim());
        let c = id_of(child.trim());
        edges.push((p, c));
    }
    if edges.is_empty() {
        return Err(DomainError::ParseError("no edges in hierarchy file".into()));
    }
    let labels = names
        .iter()
        .enumerate()
        .map(|(i, n)| (i as u32, n.clone()))
        .collect();
    Ok(Dag::new(names.len(), edges, Some(labels))?)
}

/// Reads and parses a hierarchy file.
pub fn load_hierarchy(path: &Path) -> Result<Dag, DomainError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DomainError::ParseError(format!("{}: {e}", path.display())))?;
    parse_hierarchy(&text)
}
