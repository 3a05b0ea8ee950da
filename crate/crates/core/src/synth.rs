//! Seeded synthetic suites over a small taxonomy: instances with template
//! explanations, the counterfactuals a careful human would write for them,
//! and an oracle world that labels everything.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{BranchId, Instance, NliLabel};
use crate::modelio::oracle::{CompiledWorld, Fact, OracleWorld, RelationSpec};
use crate::pipeline::HumanCounterfactual;
use crate::text::capitalize_first;

const ISA: &[(&str, &str)] = &[
    ("dog", "animal"),
    ("cat", "animal"),
    ("horse", "animal"),
    ("bird", "animal"),
    ("cow", "animal"),
    ("puppy", "dog"),
    ("kitten", "cat"),
    ("dog", "pet"),
    ("cat", "pet"),
    ("man", "adult"),
    ("woman", "adult"),
    ("boy", "child"),
    ("girl", "child"),
    ("adult", "person"),
    ("child", "person"),
    ("car", "vehicle"),
    ("bus", "vehicle"),
    ("bike", "vehicle"),
    ("truck", "vehicle"),
    ("bench", "furniture"),
    ("chair", "furniture"),
    ("sofa", "furniture"),
    ("ball", "toy"),
    ("kite", "toy"),
    ("tire swing", "toy"),
];

const TOP: &[&str] = &["animal", "person", "vehicle", "furniture", "toy"];

const SIBLINGS: &[&[&str]] = &[
    &["dog", "cat", "horse", "bird", "cow"],
    &["man", "woman"],
    &["boy", "girl"],
    &["adult", "child"],
    &["car", "bus", "bike", "truck"],
    &["bench", "chair", "sofa"],
    &["ball", "kite", "tire swing"],
];

const INTRANSITIVE: &[&str] = &["outside", "indoors", "sleeping", "running", "smiling"];
const OPPOSED: &[(&str, &str)] = &[("outside", "indoors"), ("sleeping", "running")];
const LOCATIONS: &[&str] = &["outside", "indoors"];

const ANIMALS: &[&str] = &["dog", "puppy", "cat", "kitten", "horse", "bird", "cow"];
const PEOPLE: &[&str] = &["man", "woman", "boy", "girl"];
const VEHICLES: &[&str] = &["car", "bus", "bike", "truck"];
const FURNITURE: &[&str] = &["bench", "chair", "sofa"];
const TOYS: &[&str] = &["ball", "kite", "tire swing"];

struct RelationPool {
    phrase: &'static str,
    subjects: Vec<&'static str>,
    objects: Vec<&'static str>,
}

fn relation_pools() -> Vec<RelationPool> {
    let cat = |parts: &[&[&'static str]]| parts.concat();
    vec![
        RelationPool { phrase: "barking at", subjects: vec!["dog", "puppy"], objects: cat(&[PEOPLE, &["cat", "kitten", "horse", "bird", "cow"]]) },
        RelationPool { phrase: "looking at", subjects: cat(&[PEOPLE, ANIMALS]), objects: cat(&[PEOPLE, ANIMALS, VEHICLES, TOYS]) },
        RelationPool { phrase: "playing with", subjects: vec!["boy", "girl", "dog", "puppy", "cat", "kitten"], objects: cat(&[TOYS, &["dog", "puppy", "cat", "kitten"]]) },
        RelationPool { phrase: "chasing", subjects: cat(&[ANIMALS, &["boy", "girl"]]), objects: cat(&[ANIMALS, &["ball", "kite", "bus", "car", "bike"]]) },
        RelationPool { phrase: "riding", subjects: PEOPLE.to_vec(), objects: vec!["horse", "bike", "bus"] },
        RelationPool { phrase: "sitting on", subjects: cat(&[PEOPLE, &["cat", "kitten", "dog"]]), objects: FURNITURE.to_vec() },
        RelationPool { phrase: "on", subjects: cat(&[PEOPLE, &["cat", "dog"]]), objects: cat(&[FURNITURE, &["tire swing"]]) },
    ]
}

/// The taxonomy, relations and opposites shared by every suite; scenes are added per instance.
pub fn base_world() -> OracleWorld {
    let mut vocabulary = BTreeSet::new();
    for (a, b) in ISA {
        vocabulary.insert(a.to_string());
        vocabulary.insert(b.to_string());
    }
    let mut disjoint_pairs = Vec::new();
    for (i, a) in TOP.iter().enumerate() {
        for b in &TOP[i + 1..] {
            disjoint_pairs.push((a.to_string(), b.to_string()));
        }
    }
    for group in SIBLINGS {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                disjoint_pairs.push((a.to_string(), b.to_string()));
            }
        }
    }
    for (a, b) in OPPOSED {
        disjoint_pairs.push((a.to_string(), b.to_string()));
    }
    let mut relations: Vec<RelationSpec> =
        relation_pools().iter().map(|p| RelationSpec { phrase: p.phrase.into(), transitive: true }).collect();
    relations.extend(INTRANSITIVE.iter().map(|p| RelationSpec { phrase: p.to_string(), transitive: false }));
    OracleWorld {
        isa_edges: ISA.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        disjoint_pairs,
        relations,
        scene_facts: BTreeMap::new(),
        vocabulary,
    }
}

fn indef(word: &str) -> &'static str {
    if word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

fn plural(word: &str) -> String {
    if word.ends_with('s') || word.ends_with("sh") || word.ends_with("ch") || word.ends_with('x') {
        format!("{word}es")
    } else {
        format!("{word}s")
    }
}

/// A noun phrase with the article it is written with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Np {
    pub article: String,
    pub noun: String,
}

impl Np {
    fn new(article: &str, noun: &str) -> Self {
        Np { article: article.into(), noun: noun.into() }
    }
}

/// `subject relation object` as either "The s is r the o" or "A s on a o".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseFact {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl BaseFact {
    fn is_on(&self) -> bool {
        self.relation == "on"
    }

    fn subject_np(&self, noun: &str) -> Np {
        if self.is_on() {
            Np::new(indef(&self.subject), noun)
        } else {
            Np::new("the", noun)
        }
    }

    fn object_np(&self, noun: &str) -> Np {
        if self.is_on() {
            Np::new(indef(&self.object), noun)
        } else {
            Np::new("the", noun)
        }
    }

    fn render(&self, subject: &Np, object: &Np, loc: Option<&str>) -> String {
        let loc = loc.map(|l| format!(" {l}")).unwrap_or_default();
        let s = capitalize_first(&format!("{} {}", subject.article, subject.noun));
        if self.is_on() {
            format!("{s} on {} {}{loc}.", object.article, object.noun)
        } else {
            format!("{s} is {} {} {}{loc}.", self.relation, object.article, object.noun)
        }
    }

    fn hypothesis(&self, loc: Option<&str>) -> String {
        self.render(&self.subject_np(&self.subject), &self.object_np(&self.object), loc)
    }

    fn negated_location(&self, loc: &str) -> String {
        let s = capitalize_first(&format!("{} {}", self.subject_np(&self.subject).article, self.subject));
        if self.is_on() {
            format!("{s} not {loc}.")
        } else {
            format!("{s} is not {loc}.")
        }
    }
}

/// How an item was built; enough to regenerate explanations of any kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Hypernym { fact: BaseFact, target_subject: bool, hypernym: String },
    SubjectSwap { fact: BaseFact, shown: String },
    Opposite { subject: String, fact_relation: String, shown_relation: String },
    Location { fact: BaseFact, location: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthItem {
    pub instance: Instance,
    pub shape: Shape,
    /// Counterfactual per derived branch, written from the shape alone.
    pub expected: Vec<(BranchId, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub per_label: usize,
    pub seed: u64,
    /// Chance that an annotator picks a different label than the world's.
    pub annotator_flip: f64,
    pub annotators: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { per_label: 200, seed: 0, annotator_flip: 0.1, annotators: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSuite {
    pub world: OracleWorld,
    pub items: Vec<SynthItem>,
    compiled: CompiledWorld,
}

struct Taxonomy {
    ancestors: HashMap<String, HashSet<String>>,
    nouns: Vec<String>,
}

impl Taxonomy {
    fn new() -> Self {
        let nouns: BTreeSet<String> = ISA.iter().flat_map(|(a, b)| [a.to_string(), b.to_string()]).collect();
        let mut ancestors = HashMap::new();
        for n in &nouns {
            let mut seen = HashSet::new();
            let mut stack = vec![n.as_str()];
            while let Some(t) = stack.pop() {
                if seen.insert(t.to_string()) {
                    stack.extend(ISA.iter().filter(|(a, _)| *a == t).map(|(_, b)| *b));
                }
            }
            ancestors.insert(n.clone(), seen);
        }
        Taxonomy { ancestors, nouns: nouns.into_iter().collect() }
    }

    fn is_a(&self, x: &str, y: &str) -> bool {
        self.ancestors.get(x).is_some_and(|a| a.contains(y))
    }

    fn hypernyms(&self, x: &str) -> Vec<String> {
        let mut h: Vec<String> = self.ancestors[x].iter().filter(|a| *a != x).cloned().collect();
        h.sort();
        h
    }

    /// A noun that `x` is not an instance of and that shares no word with `avoid`.
    fn unrelated(&self, rng: &mut ChaCha8Rng, x: &str, avoid: &[&str]) -> String {
        let words: HashSet<&str> = avoid.iter().flat_map(|a| a.split(' ')).collect();
        let pool: Vec<&String> = self
            .nouns
            .iter()
            .filter(|n| !self.is_a(x, n) && n.split(' ').all(|w| !words.contains(w)))
            .collect();
        pool.choose(rng).expect("non-empty pool").to_string()
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty")
}

fn shares_word(a: &str, b: &str) -> bool {
    a.split(' ').any(|w| b.split(' ').any(|v| v == w))
}

fn random_fact(rng: &mut ChaCha8Rng, tax: &Taxonomy) -> BaseFact {
    let pools = relation_pools();
    loop {
        let pool = pools.choose(rng).expect("pools");
        let s = pick(rng, &pool.subjects);
        let o = pick(rng, &pool.objects);
        if s != o && !tax.is_a(s, o) && !tax.is_a(o, s) && !shares_word(s, o) {
            return BaseFact { subject: s.into(), relation: pool.phrase.into(), object: o.into() };
        }
    }
}

fn determiner(rng: &mut ChaCha8Rng, noun: &str) -> String {
    if rng.gen_bool(0.5) {
        "The".into()
    } else {
        capitalize_first(indef(noun))
    }
}

/// Explanation in a template matching `shape`'s relation, or a pathological
/// one that points at an unrelated term (location slots swapped for N).
fn explanation(rng: &mut ChaCha8Rng, shape: &Shape, faithful: bool, tax: &Taxonomy) -> String {
    match shape {
        Shape::Hypernym { fact, target_subject, hypernym } => {
            let t = if *target_subject { &fact.subject } else { &fact.object };
            let h = if faithful {
                hypernym.clone()
            } else {
                tax.unrelated(rng, t, &[fact.subject.as_str(), fact.object.as_str()])
            };
            let det = determiner(rng, t);
            match rng.gen_range(0..3) {
                0 => format!("{det} {t} is {} {h}.", indef(&h)),
                1 => format!("{det} {t} is a type of {h}."),
                _ => format!("{det} {t} is a kind of {h}."),
            }
        }
        Shape::SubjectSwap { fact, shown } => {
            let s = if faithful {
                fact.subject.clone()
            } else {
                tax.unrelated(rng, &fact.subject, &[shown.as_str(), fact.object.as_str()])
            };
            let det = capitalize_first(indef(shown));
            match rng.gen_range(0..3) {
                0 => format!("{det} {shown} is not {} {s}.", indef(&s)),
                1 => format!("{det} {shown} cannot be {} {s}.", indef(&s)),
                _ => format!("The {shown} is not the {s}."),
            }
        }
        Shape::Opposite { fact_relation, shown_relation, .. } => {
            let r = if faithful {
                fact_relation.clone()
            } else {
                let pool: Vec<&str> = INTRANSITIVE
                    .iter()
                    .copied()
                    .filter(|r| r != fact_relation && r != shown_relation)
                    .collect();
                pick(rng, &pool).to_string()
            };
            let shown = capitalize_first(shown_relation);
            if rng.gen_bool(0.5) {
                format!("{shown} is not {r}.")
            } else {
                format!("{shown} is the opposite of {r}.")
            }
        }
        Shape::Location { fact, location } => {
            let a = if fact.is_on() {
                format!("{} {}", indef(&fact.object), fact.object)
            } else {
                format!("{} the {}", fact.relation, fact.object)
            };
            if !faithful {
                return format!("{} is not necessarily {a}.", capitalize_first(location));
            }
            match (fact.is_on(), rng.gen_range(0..3)) {
                (true, 2) => format!("Not all {} are {location}.", plural(&fact.object)),
                (_, 1) => format!("{} may not be {location}.", capitalize_first(&a)),
                _ => format!("{} is not necessarily {location}.", capitalize_first(&a)),
            }
        }
    }
}

fn scene_facts(shape: &Shape) -> Vec<Fact> {
    match shape {
        Shape::Hypernym { fact, .. } | Shape::SubjectSwap { fact, .. } | Shape::Location { fact, .. } => {
            vec![Fact::new(&fact.subject, &fact.relation, Some(&fact.object))]
        }
        Shape::Opposite { subject, fact_relation, .. } => vec![Fact::new(subject, fact_relation, None)],
    }
}

fn hypothesis_and_expected(shape: &Shape) -> (String, Vec<(BranchId, String)>) {
    match shape {
        Shape::Hypernym { fact, target_subject, hypernym } => {
            let s = fact.subject_np(&fact.subject);
            let o = fact.object_np(&fact.object);
            let cf = if *target_subject {
                fact.render(&Np::new(&s.article, hypernym), &o, None)
            } else {
                fact.render(&s, &Np::new(&o.article, hypernym), None)
            };
            (fact.hypothesis(None), vec![(BranchId::Main, cf)])
        }
        Shape::SubjectSwap { fact, shown } => {
            let art = if fact.is_on() { indef(shown) } else { "the" };
            let o = fact.object_np(&fact.object);
            let hyp = fact.render(&Np::new(art, shown), &o, None);
            let cf = fact.render(&Np::new(art, &fact.subject), &o, None);
            (hyp, vec![(BranchId::Main, cf)])
        }
        Shape::Opposite { subject, fact_relation, shown_relation } => (
            format!("The {subject} is {shown_relation}."),
            vec![(BranchId::Main, format!("The {subject} is {fact_relation}."))],
        ),
        Shape::Location { fact, location } => (
            fact.hypothesis(Some(location)),
            vec![
                (BranchId::ABranch, fact.hypothesis(None)),
                (BranchId::NegBBranch, fact.negated_location(location)),
            ],
        ),
    }
}

fn random_shape(rng: &mut ChaCha8Rng, label: NliLabel, tax: &Taxonomy) -> Shape {
    match label {
        NliLabel::E => {
            let fact = random_fact(rng, tax);
            let target_subject = rng.gen_bool(0.5);
            let t = if target_subject { &fact.subject } else { &fact.object };
            let hypernyms: Vec<String> =
                tax.hypernyms(t).into_iter().filter(|h| !shares_word(h, &fact.subject) && !shares_word(h, &fact.object)).collect();
            let hypernym = hypernyms.choose(rng).expect("every fact term has a hypernym").clone();
            Shape::Hypernym { fact, target_subject, hypernym }
        }
        NliLabel::C if rng.gen_bool(0.3) => {
            let subject = pick(rng, &[ANIMALS, PEOPLE].concat()).to_string();
            let (a, b) = *OPPOSED.choose(rng).expect("opposed");
            let (fact_relation, shown_relation) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            Shape::Opposite { subject, fact_relation: fact_relation.into(), shown_relation: shown_relation.into() }
        }
        NliLabel::C => loop {
            let fact = random_fact(rng, tax);
            let group = SIBLINGS.iter().find(|g| g.contains(&fact.subject.as_str()));
            let candidates: Vec<&str> = match group {
                Some(g) => g.iter().copied().filter(|x| *x != fact.subject).collect(),
                None => continue,
            };
            let shown = pick(rng, &candidates);
            if shares_word(shown, &fact.object) || tax.is_a(&fact.object, shown) || tax.is_a(shown, &fact.object) {
                continue;
            }
            break Shape::SubjectSwap { fact, shown: shown.into() };
        },
        NliLabel::N => {
            let fact = random_fact(rng, tax);
            Shape::Location { fact, location: pick(rng, LOCATIONS).into() }
        }
    }
}

impl SynthSuite {
    pub fn generate(config: &SynthConfig) -> Self {
        let tax = Taxonomy::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut world = base_world();
        let mut items = Vec::new();
        let mut i = 0;
        for label in [NliLabel::E, NliLabel::C, NliLabel::N] {
            for _ in 0..config.per_label {
                let shape = random_shape(&mut rng, label, &tax);
                let premise_ref = format!("scene-{i:04}");
                world.scene_facts.insert(premise_ref.clone(), scene_facts(&shape));
                let (hypothesis, expected) = hypothesis_and_expected(&shape);
                let explanation = explanation(&mut rng, &shape, true, &tax);
                let instance = Instance {
                    id: format!("syn-{i:04}"),
                    premise_ref,
                    hypothesis,
                    gold_label: label,
                    explanation,
                    annotator_labels: Vec::new(),
                };
                items.push(SynthItem { instance, shape, expected });
                i += 1;
            }
        }
        let compiled = world.compile().expect("synthetic world is valid");
        SynthSuite { world, items, compiled }
    }

    pub fn compiled(&self) -> &CompiledWorld {
        &self.compiled
    }

    pub fn instances(&self) -> Vec<Instance> {
        self.items.iter().map(|it| it.instance.clone()).collect()
    }

    pub fn with_explanations(&self, explanations: &[String]) -> Vec<Instance> {
        self.items
            .iter()
            .zip(explanations)
            .map(|(it, e)| Instance { explanation: e.clone(), ..it.instance.clone() })
            .collect()
    }

    pub fn faithful_explanations(&self) -> Vec<String> {
        self.items.iter().map(|it| it.instance.explanation.clone()).collect()
    }

    /// Same templates with the second slot pointing at an unrelated term
    /// (or, for location explanations, the two slots swapped).
    pub fn pathological_explanations(&self, seed: u64) -> Vec<String> {
        let tax = Taxonomy::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.items.iter().map(|it| explanation(&mut rng, &it.shape, false, &tax)).collect()
    }

    /// Faithful explanations moved to other instances by a random derangement.
    pub fn shuffled_explanations(&self, seed: u64) -> Vec<String> {
        let n = self.items.len();
        if n < 2 {
            return self.faithful_explanations();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut out = vec![String::new(); n];
        for k in 0..n {
            out[order[k]] = self.items[order[(k + 1) % n]].instance.explanation.clone();
        }
        out
    }

    /// The expected counterfactuals, each labelled by independent noisy annotators.
    pub fn human_counterfactuals(&self, config: &SynthConfig) -> Vec<HumanCounterfactual> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_da11);
        let mut out = Vec::new();
        for it in &self.items {
            for (branch, x_cf) in &it.expected {
                let truth = self.compiled.verdict(&it.instance.premise_ref, x_cf).label;
                let labels = (0..config.annotators)
                    .map(|_| {
                        if rng.gen_bool(config.annotator_flip) {
                            let others: Vec<NliLabel> = NliLabel::ALL.into_iter().filter(|l| *l != truth).collect();
                            others[rng.gen_range(0..2)]
                        } else {
                            truth
                        }
                    })
                    .collect();
                out.push(HumanCounterfactual {
                    instance_id: it.instance.id.clone(),
                    branch: *branch,
                    x_cf: x_cf.clone(),
                    annotator_labels: labels,
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freelogic::derive_counterfactual_labels;
    use crate::rewrite::patterns::PatternBank;
    use crate::rewrite::regex_rewrite;

    fn suite() -> SynthSuite {
        SynthSuite::generate(&SynthConfig { per_label: 150, seed: 3, ..SynthConfig::default() })
    }

    #[test]
    fn world_labels_hypotheses_and_expected_counterfactuals() {
        let s = suite();
        for it in &s.items {
            let inst = &it.instance;
            assert_eq!(s.compiled().verdict(&inst.premise_ref, &inst.hypothesis).label, inst.gold_label, "{}", inst.hypothesis);
            let derived = derive_counterfactual_labels(inst.gold_label);
            assert_eq!(derived.len(), it.expected.len());
            for ((branch, y_cf), (eb, x_cf)) in derived.iter().zip(&it.expected) {
                assert_eq!(branch, eb);
                let v = s.compiled().verdict(&inst.premise_ref, x_cf);
                assert_eq!(v.parse_failure, None, "{x_cf}");
                assert_eq!(v.label, *y_cf, "{} -> {x_cf}", inst.hypothesis);
            }
        }
    }

    #[test]
    fn regex_rewriting_reproduces_expected() {
        let s = suite();
        let bank = PatternBank::builtin();
        for it in &s.items {
            let out = regex_rewrite(&it.instance, &bank);
            assert!(!out.is_skipped(), "{:?}: {} / {}", out.skip, it.instance.hypothesis, it.instance.explanation);
            let got: Vec<(BranchId, String)> = out.records.iter().map(|r| (r.branch, r.x_cf.clone())).collect();
            assert_eq!(got, it.expected, "{}", it.instance.explanation);
        }
    }

    #[test]
    fn pathological_explanations_rewrite_to_wrong_labels() {
        let s = suite();
        let bank = PatternBank::builtin();
        for seed in [1, 2] {
            let expl = s.pathological_explanations(seed);
            for (inst, it) in s.with_explanations(&expl).iter().zip(&s.items) {
                let out = regex_rewrite(inst, &bank);
                assert!(!out.is_skipped(), "{:?}: {} / {}", out.skip, inst.hypothesis, inst.explanation);
                for r in &out.records {
                    let got = s.compiled().verdict(&inst.premise_ref, &r.x_cf).label;
                    assert_ne!(got, r.y_cf, "{} / {} -> {}", inst.hypothesis, inst.explanation, r.x_cf);
                }
                assert_eq!(inst.gold_label, it.instance.gold_label);
            }
        }
    }

    #[test]
    fn generation_is_seeded_and_shuffle_is_a_derangement() {
        let a = suite();
        let b = suite();
        assert_eq!(a.items, b.items);
        assert_eq!(a.items.len(), 450);
        let shuffled = a.shuffled_explanations(9);
        let faithful = a.faithful_explanations();
        let mut x = shuffled.clone();
        let mut y = faithful.clone();
        x.sort();
        y.sort();
        assert_eq!(x, y);
        let moved = (0..shuffled.len()).filter(|&i| shuffled[i] != faithful[i]).count();
        assert!(moved as f64 > 0.95 * shuffled.len() as f64);
    }

    #[test]
    fn annotators_mostly_agree_with_the_world() {
        let s = suite();
        let cfg = SynthConfig { seed: 3, ..SynthConfig::default() };
        let humans = s.human_counterfactuals(&cfg);
        assert_eq!(humans.len(), 600);
        let unanimous = humans.iter().filter(|h| h.annotator_labels.windows(2).all(|w| w[0] == w[1])).count();
        assert!(unanimous > humans.len() / 2);
    }
}
