//! Synthetic "oracle world": a taxonomy plus per-premise scene facts with exact
//! entailment, standing in for a neural NLI classifier in tests and demos.
//!
//! Hypotheses are read with a micro-grammar. After dropping articles and
//! copulas, a sentence is a subject term followed by one or more clauses:
//!
//! ```text
//! clause := ["not"] relation [object]      (object iff the relation is transitive)
//!         | ["not"] term                   ("the dog is an animal")
//! ```
//!
//! A clause is entailed when some scene fact matches it up to the isa closure,
//! contradicted when a fact matches it except for a disjoint subject, object or
//! relation, and otherwise undetermined. The hypothesis is C if any clause is
//! contradicted, E if all are entailed, N otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, ModelError};
use crate::model::{LabelDistribution, NliLabel};
use crate::modelio::cache::canonical_json;
use crate::modelio::protocol::{ClassifyRequest, Classifier, Condition};
use crate::rewrite::patterns::PatternBank;
use crate::text::{is_article, words_lower};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub phrase: String,
    #[serde(default = "yes")]
    pub transitive: bool,
}

fn yes() -> bool {
    true
}

/// `(subject, relation, object)`; the object is `None` for intransitive relations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact(pub String, pub String, pub Option<String>);

impl Fact {
    pub fn new(subject: &str, relation: &str, object: Option<&str>) -> Self {
        Fact(subject.to_string(), relation.to_string(), object.map(String::from))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleWorld {
    /// `(term, hypernym)`
    pub isa_edges: Vec<(String, String)>,
    /// Unordered pairs of mutually exclusive terms or relations.
    pub disjoint_pairs: Vec<(String, String)>,
    pub relations: Vec<RelationSpec>,
    pub scene_facts: BTreeMap<String, Vec<Fact>>,
    pub vocabulary: BTreeSet<String>,
}

impl OracleWorld {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let world: OracleWorld = serde_json::from_str(text)?;
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let rel_names: HashSet<&str> = self.relations.iter().map(|r| r.phrase.as_str()).collect();
        let known = |t: &str| self.vocabulary.contains(t);
        for (a, b) in &self.isa_edges {
            if !known(a) || !known(b) {
                return Err(ConfigError::Invalid(format!("isa edge ({a}, {b}) uses a term outside the vocabulary")));
            }
        }
        for (a, b) in &self.disjoint_pairs {
            if a == b {
                return Err(ConfigError::Invalid(format!("term {a:?} cannot be disjoint from itself")));
            }
            let ok = (known(a) && known(b)) || (rel_names.contains(a.as_str()) && rel_names.contains(b.as_str()));
            if !ok {
                return Err(ConfigError::Invalid(format!("disjoint pair ({a}, {b}) mixes unknown names")));
            }
        }
        for (premise, facts) in &self.scene_facts {
            for Fact(s, r, o) in facts {
                let spec = self
                    .relations
                    .iter()
                    .find(|x| &x.phrase == r)
                    .ok_or_else(|| ConfigError::Invalid(format!("{premise}: unknown relation {r:?}")))?;
                if !known(s) || o.as_deref().is_some_and(|o| !known(o)) {
                    return Err(ConfigError::Invalid(format!("{premise}: fact uses a term outside the vocabulary")));
                }
                if spec.transitive != o.is_some() {
                    return Err(ConfigError::Invalid(format!("{premise}: arity mismatch for relation {r:?}")));
                }
            }
        }
        // Acyclicity: iterative DFS with colours.
        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        for (a, b) in &self.isa_edges {
            children.entry(a.as_str()).or_default().push(b.as_str());
        }
        let mut state: HashMap<&str, u8> = HashMap::new();
        for start in children.keys() {
            if state.get(start).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack = vec![(*start, 0usize)];
            state.insert(start, 1);
            while let Some((node, idx)) = stack.pop() {
                let next = children.get(node).and_then(|c| c.get(idx)).copied();
                match next {
                    Some(n) => {
                        stack.push((node, idx + 1));
                        match state.get(n).copied().unwrap_or(0) {
                            0 => {
                                state.insert(n, 1);
                                stack.push((n, 0));
                            }
                            1 => return Err(ConfigError::Invalid(format!("isa cycle through {n:?}"))),
                            _ => {}
                        }
                    }
                    None => {
                        state.insert(node, 2);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledWorld, ConfigError> {
        self.validate()?;
        Ok(CompiledWorld::new(self))
    }
}

/// Pre-indexed world used for classification.
#[derive(Debug, Clone)]
pub struct CompiledWorld {
    world: OracleWorld,
    /// Reflexive-transitive isa closure: term -> all of its ancestors.
    ancestors: HashMap<String, HashSet<String>>,
    disjoint: HashSet<(String, String)>,
    relations: HashMap<String, bool>,
    /// Normalised token sequences, longest first.
    term_tokens: Vec<(Vec<String>, String)>,
    relation_tokens: Vec<(Vec<String>, String)>,
}

const COPULAS: &[&str] = &["is", "are", "am", "was", "were", "be", "being"];

fn normalise_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for w in words_lower(s) {
        match w.as_str() {
            "isn't" | "aren't" | "wasn't" | "weren't" => out.push("not".to_string()),
            w if is_article(w) || COPULAS.contains(&w) => {}
            _ => out.push(w),
        }
    }
    out
}

impl CompiledWorld {
    fn new(world: &OracleWorld) -> Self {
        let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
        for (a, b) in &world.isa_edges {
            parents.entry(a.as_str()).or_default().push(b.as_str());
        }
        let mut ancestors = HashMap::new();
        for term in &world.vocabulary {
            let mut seen: HashSet<String> = HashSet::new();
            let mut stack = vec![term.as_str()];
            while let Some(t) = stack.pop() {
                if seen.insert(t.to_string()) {
                    stack.extend(parents.get(t).into_iter().flatten());
                }
            }
            ancestors.insert(term.clone(), seen);
        }
        let disjoint = world
            .disjoint_pairs
            .iter()
            .flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())])
            .collect();
        let relations = world.relations.iter().map(|r| (r.phrase.clone(), r.transitive)).collect();
        let mut term_tokens: Vec<(Vec<String>, String)> =
            world.vocabulary.iter().map(|t| (normalise_tokens(t), t.clone())).filter(|(t, _)| !t.is_empty()).collect();
        term_tokens.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        let mut relation_tokens: Vec<(Vec<String>, String)> = world
            .relations
            .iter()
            .map(|r| (normalise_tokens(&r.phrase), r.phrase.clone()))
            .filter(|(t, _)| !t.is_empty())
            .collect();
        relation_tokens.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        CompiledWorld { world: world.clone(), ancestors, disjoint, relations, term_tokens, relation_tokens }
    }

    pub fn world(&self) -> &OracleWorld {
        &self.world
    }

    pub fn is_a(&self, term: &str, category: &str) -> bool {
        self.ancestors.get(term).is_some_and(|a| a.contains(category))
    }

    /// Some ancestor of `x` is declared disjoint from some ancestor of `y`.
    pub fn disjoint_terms(&self, x: &str, y: &str) -> bool {
        let (Some(ax), Some(ay)) = (self.ancestors.get(x), self.ancestors.get(y)) else {
            return false;
        };
        ax.iter().any(|p| ay.iter().any(|q| self.disjoint.contains(&(p.clone(), q.clone()))))
    }

    fn disjoint_relations(&self, r1: &str, r2: &str) -> bool {
        self.disjoint.contains(&(r1.to_string(), r2.to_string()))
    }

    fn longest<'t>(table: &'t [(Vec<String>, String)], tokens: &[String]) -> Option<&'t (Vec<String>, String)> {
        table.iter().find(|(seq, _)| tokens.len() >= seq.len() && tokens[..seq.len()] == seq[..])
    }

    pub fn parse(&self, hypothesis: &str) -> Result<ParsedHypothesis, ParseFailure> {
        let tokens = normalise_tokens(hypothesis);
        let (subj_toks, subject) =
            Self::longest(&self.term_tokens, &tokens).ok_or_else(|| match tokens.first() {
                Some(t) => ParseFailure::UnknownTerm(t.clone()),
                None => ParseFailure::Empty,
            })?;
        let mut i = subj_toks.len();
        let mut clauses = Vec::new();
        while i < tokens.len() {
            let negated = tokens[i] == "not";
            if negated {
                i += 1;
            }
            let rest = &tokens[i..];
            if let Some((rel_toks, relation)) = Self::longest(&self.relation_tokens, rest) {
                i += rel_toks.len();
                let object = if self.relations[relation] {
                    let (obj_toks, obj) = Self::longest(&self.term_tokens, &tokens[i..]).ok_or_else(|| {
                        match tokens.get(i) {
                            Some(t) => ParseFailure::UnknownTerm(t.clone()),
                            None => ParseFailure::MissingObject(relation.clone()),
                        }
                    })?;
                    i += obj_toks.len();
                    Some(obj.clone())
                } else {
                    None
                };
                clauses.push(Clause::Relation { negated, relation: relation.clone(), object });
            } else if let Some((term_toks, term)) = Self::longest(&self.term_tokens, rest) {
                i += term_toks.len();
                clauses.push(Clause::IsA { negated, category: term.clone() });
            } else {
                return Err(match rest.first() {
                    Some(t) => ParseFailure::UnknownTerm(t.clone()),
                    None => ParseFailure::Empty,
                });
            }
        }
        if clauses.is_empty() {
            return Err(ParseFailure::NoPredicate);
        }
        Ok(ParsedHypothesis { subject: subject.clone(), clauses })
    }

    fn object_matches(&self, fact_obj: &Option<String>, obj: &Option<String>) -> bool {
        match (fact_obj, obj) {
            (None, None) => true,
            (Some(f), Some(o)) => self.is_a(f, o),
            _ => false,
        }
    }

    fn positive_clause(&self, facts: &[Fact], subject: &str, clause: &Clause) -> NliLabel {
        match clause {
            Clause::IsA { category, .. } => {
                if self.is_a(subject, category) {
                    NliLabel::E
                } else if self.disjoint_terms(subject, category) {
                    NliLabel::C
                } else {
                    NliLabel::N
                }
            }
            Clause::Relation { relation, object, .. } => {
                let entailed = facts
                    .iter()
                    .any(|Fact(fs, fr, fo)| fr == relation && self.is_a(fs, subject) && self.object_matches(fo, object));
                if entailed {
                    return NliLabel::E;
                }
                let contradicted = facts.iter().any(|Fact(fs, fr, fo)| {
                    let same_rel = fr == relation;
                    let subj_ok = self.is_a(fs, subject);
                    let obj_ok = self.object_matches(fo, object);
                    let subj_clash = self.disjoint_terms(fs, subject);
                    let obj_clash = matches!((fo, object), (Some(f), Some(o)) if self.disjoint_terms(f, o));
                    (same_rel && subj_clash && obj_ok)
                        || (same_rel && subj_ok && obj_clash)
                        || (subj_ok && fo.is_none() && object.is_none() && self.disjoint_relations(fr, relation))
                });
                if contradicted {
                    NliLabel::C
                } else {
                    NliLabel::N
                }
            }
        }
    }

    pub fn verdict(&self, premise_ref: &str, hypothesis: &str) -> OracleVerdict {
        let parsed = match self.parse(hypothesis) {
            Ok(p) => p,
            Err(failure) => return OracleVerdict { label: NliLabel::N, parse_failure: Some(failure) },
        };
        let facts = self.world.scene_facts.get(premise_ref).map(Vec::as_slice).unwrap_or(&[]);
        let mut all_entailed = true;
        for clause in &parsed.clauses {
            let positive = self.positive_clause(facts, &parsed.subject, clause);
            let value = match (clause.negated(), positive) {
                (false, v) => v,
                (true, NliLabel::E) => NliLabel::C,
                (true, NliLabel::C) => NliLabel::E,
                (true, NliLabel::N) => NliLabel::N,
            };
            match value {
                NliLabel::C => return OracleVerdict { label: NliLabel::C, parse_failure: None },
                NliLabel::N => all_entailed = false,
                NliLabel::E => {}
            }
        }
        let label = if all_entailed { NliLabel::E } else { NliLabel::N };
        OracleVerdict { label, parse_failure: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clause {
    Relation { negated: bool, relation: String, object: Option<String> },
    IsA { negated: bool, category: String },
}

impl Clause {
    fn negated(&self) -> bool {
        match self {
            Clause::Relation { negated, .. } | Clause::IsA { negated, .. } => *negated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedHypothesis {
    pub subject: String,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    Empty,
    UnknownTerm(String),
    MissingObject(String),
    NoPredicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    pub label: NliLabel,
    pub parse_failure: Option<ParseFailure>,
}

pub const DEFAULT_EPSILON: f64 = 0.02;

/// Oracle label as a near one-hot distribution (`1 - epsilon` on the decided label).
pub fn oracle_classify(world: &CompiledWorld, premise_ref: &str, hypothesis: &str, epsilon: f64) -> LabelDistribution {
    LabelDistribution::smoothed(world.verdict(premise_ref, hypothesis).label, epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Probability of answering with a wrong label, drawn deterministically per request.
    #[serde(default)]
    pub error_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { epsilon: DEFAULT_EPSILON, error_rate: 0.0, seed: 0 }
    }
}

/// [`Classifier`] backed by an oracle world.
///
/// * `x`: the world's verdict on the hypothesis.
/// * `x_and_e`: the label leaked by the explanation's template, if any, else as `x`.
/// * `e_only`: the leaked label, else N.
///
/// `error_rate` and `noise_sigma` each replace the decided label by one of the
/// other two with that probability (`min(1, sigma)` for noise), using a hash of
/// the request as the random source so responses stay deterministic.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    pub world: CompiledWorld,
    pub settings: OracleSettings,
    pub bank: PatternBank,
}

impl OracleClassifier {
    pub fn new(world: CompiledWorld, settings: OracleSettings) -> Self {
        OracleClassifier { world, settings, bank: PatternBank::builtin() }
    }

    fn unit(&self, salt: &str, request: &ClassifyRequest, include_noise: bool) -> (f64, f64) {
        let mut v = serde_json::to_value(request).expect("request serializes");
        if !include_noise {
            v["noise_sigma"] = serde_json::Value::Null;
        }
        let key = format!("{}|{salt}|{}", self.settings.seed, canonical_json(&v));
        let digest = Sha256::digest(key.as_bytes());
        let a = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let b = u64::from_le_bytes(digest[8..16].try_into().expect("8 bytes"));
        (a as f64 / 2f64.powi(64), b as f64 / 2f64.powi(64))
    }

    fn perturb(label: NliLabel, pick: f64) -> NliLabel {
        let others: Vec<NliLabel> = NliLabel::ALL.into_iter().filter(|l| *l != label).collect();
        others[if pick < 0.5 { 0 } else { 1 }]
    }

    pub fn decide(&self, request: &ClassifyRequest) -> NliLabel {
        let leaked = || request.explanation.as_deref().and_then(|e| self.bank.leaked_label(e));
        let mut label = match request.condition {
            Condition::X => self.world.verdict(&request.premise_ref, &request.hypothesis).label,
            Condition::XAndE => {
                leaked().unwrap_or_else(|| self.world.verdict(&request.premise_ref, &request.hypothesis).label)
            }
            Condition::EOnly => leaked().unwrap_or(NliLabel::N),
        };
        if self.settings.error_rate > 0.0 {
            let (u, pick) = self.unit("error", request, false);
            if u < self.settings.error_rate {
                label = Self::perturb(label, pick);
            }
        }
        if let Some(sigma) = request.noise_sigma.filter(|s| *s > 0.0) {
            let (u, pick) = self.unit("noise", request, true);
            if u < sigma.min(1.0) {
                label = Self::perturb(label, pick);
            }
        }
        label
    }
}

impl Classifier for OracleClassifier {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError> {
        request.validate()?;
        Ok(LabelDistribution::smoothed(self.decide(request), self.settings.epsilon))
    }
}
