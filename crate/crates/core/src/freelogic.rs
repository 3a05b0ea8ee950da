//! Predicate-relation forms per label, counterfactual label derivation, and
//! the span substitution that builds counterfactual hypothesis text.
//!
//! | label | relation R(A,B)   | branches                           |
//! |-------|-------------------|------------------------------------|
//! | E     | A <=> B           | main -> E                          |
//! | C     | not (A <=> B)     | main -> E (label flip)             |
//! | N     | not (A => B)      | A_branch -> E, negB_branch -> N    |
//!
//! The neutral-branch surface rules (span deletion and `not` insertion) are a
//! reconstruction: the logical forms are fixed, the English realisation is ours.

use serde::{Deserialize, Serialize};

use crate::error::RewriteError;
use crate::model::{BranchId, NliLabel};
use crate::rewrite::stem::stem;
use crate::text::{capitalize_first, is_article, is_preposition, lowercase_first, tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationForm {
    /// `A <=> B`
    Equivalence,
    /// `not (A <=> B)`, equivalently `A <=> not B`
    NegatedEquivalence,
    /// `not (A => B)`, equivalently `A and not B`
    NegatedImplication,
}

impl RelationForm {
    pub fn label(self) -> NliLabel {
        match self {
            RelationForm::Equivalence => NliLabel::E,
            RelationForm::NegatedEquivalence => NliLabel::C,
            RelationForm::NegatedImplication => NliLabel::N,
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            RelationForm::Equivalence => "A <=> B",
            RelationForm::NegatedEquivalence => "not (A <=> B)",
            RelationForm::NegatedImplication => "not (A => B)",
        }
    }
}

pub fn relation_form(label: NliLabel) -> RelationForm {
    match label {
        NliLabel::E => RelationForm::Equivalence,
        NliLabel::C => RelationForm::NegatedEquivalence,
        NliLabel::N => RelationForm::NegatedImplication,
    }
}

/// Counterfactual branches and their expected labels, in canonical order.
pub fn derive_counterfactual_labels(label: NliLabel) -> Vec<(BranchId, NliLabel)> {
    match label {
        NliLabel::E | NliLabel::C => vec![(BranchId::Main, NliLabel::E)],
        NliLabel::N => vec![(BranchId::ABranch, NliLabel::E), (BranchId::NegBBranch, NliLabel::N)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanSource {
    Regex,
    Fsp,
    Manual,
}

/// The two logical variables of an explanation, as surface text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanPair {
    pub a: String,
    pub b: String,
    pub source: SpanSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_id: Option<String>,
}

impl SpanPair {
    /// Trims both spans; `None` if either ends up empty.
    pub fn new(a: &str, b: &str, source: SpanSource, pattern_id: Option<String>) -> Option<Self> {
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() {
            return None;
        }
        Some(SpanPair { a: a.to_string(), b: b.to_string(), source, pattern_id })
    }

    pub fn manual(a: &str, b: &str) -> Self {
        SpanPair::new(a, b, SpanSource::Manual, None).expect("non-empty spans")
    }
}

fn sentence_initial(tokens: &[Token<'_>], i: usize) -> bool {
    i == 0 || matches!(tokens[i - 1].text, "." | "!" | "?")
}

fn token_eq(h: &Token<'_>, span_tok: &str, initial: bool, stem_match: bool) -> bool {
    if h.text == span_tok {
        return true;
    }
    if stem_match && h.is_word() {
        return stem(h.text) == stem(span_tok);
    }
    initial && h.text.to_lowercase() == span_tok.to_lowercase()
}

/// Non-overlapping token ranges `[start, end)` where `span` occurs, left to right.
fn find_occurrences(tokens: &[Token<'_>], span: &str, stem_match: bool) -> Vec<(usize, usize)> {
    let span_toks: Vec<&str> = tokenize(span).iter().map(|t| t.text).collect();
    let n = span_toks.len();
    let mut out = Vec::new();
    if n == 0 || n > tokens.len() {
        return out;
    }
    let mut i = 0;
    while i + n <= tokens.len() {
        let hit = (0..n).all(|k| token_eq(&tokens[i + k], span_toks[k], sentence_initial(tokens, i + k), stem_match));
        if hit {
            out.push((i, i + n));
            i += n;
        } else {
            i += 1;
        }
    }
    out
}

/// True if `span` occurs in `sentence` under the same matching rules as substitution.
pub fn contains_span(sentence: &str, span: &str, stem_match: bool) -> bool {
    !find_occurrences(&tokenize(sentence), span, stem_match).is_empty()
}

/// Replaces every occurrence of `pair.a` in `hypothesis` with `pair.b` verbatim.
///
/// Matching is on token boundaries, case-sensitive except at the start of a
/// sentence. With `stem_match`, tokens compare equal when their stems do.
pub fn substitute_span(hypothesis: &str, pair: &SpanPair, stem_match: bool) -> Result<String, RewriteError> {
    let tokens = tokenize(hypothesis);
    let occurrences = find_occurrences(&tokens, &pair.a, stem_match);
    if occurrences.is_empty() {
        return Err(RewriteError::NoMatch(pair.a.clone()));
    }
    let mut out = String::with_capacity(hypothesis.len() + pair.b.len());
    let mut cursor = 0;
    for (s, e) in occurrences {
        out.push_str(&hypothesis[cursor..tokens[s].start]);
        if sentence_initial(&tokens, s) {
            out.push_str(&capitalize_first(&pair.b));
        } else {
            out.push_str(&pair.b);
        }
        cursor = tokens[e - 1].end;
    }
    out.push_str(&hypothesis[cursor..]);
    Ok(out)
}

/// Locates `span`, trying exact matching before stemmed matching.
fn locate(tokens: &[Token<'_>], span: &str) -> Option<(usize, usize)> {
    find_occurrences(tokens, span, false)
        .into_iter()
        .next()
        .or_else(|| find_occurrences(tokens, span, true).into_iter().next())
}

/// Extends a token range leftwards over an immediately preceding article, then
/// an immediately preceding preposition.
fn with_leading_chain(tokens: &[Token<'_>], (mut s, e): (usize, usize)) -> (usize, usize) {
    if s > 0 && is_article(tokens[s - 1].text) {
        s -= 1;
    }
    if s > 0 && is_preposition(tokens[s - 1].text) {
        s -= 1;
    }
    (s, e)
}

/// Byte range covering tokens `[s, e)` plus the whitespace separating them from
/// the previous token (or from the next one, at the start of the text).
fn deletion_bytes(text: &str, tokens: &[Token<'_>], (s, e): (usize, usize)) -> (usize, usize) {
    if s > 0 {
        (tokens[s - 1].end, tokens[e - 1].end)
    } else {
        let end = tokens.get(e).map_or(text.len(), |t| t.start);
        (0, end)
    }
}

/// Builds the surface text for a neutral-label branch.
///
/// * `A_branch`: drop `b` (with a preceding article/preposition) so the
///   sentence asserts `A` without `B`.
/// * `negB_branch`: drop `a` the same way and insert `not` in front of `b`
///   (before its own preposition/article, so the governing verb is negated).
pub fn neutral_branch_rewrite(hypothesis: &str, pair: &SpanPair, branch: BranchId) -> Result<String, RewriteError> {
    let tokens = tokenize(hypothesis);
    match branch {
        BranchId::ABranch => {
            let b = locate(&tokens, &pair.b).ok_or_else(|| RewriteError::NoMatch(pair.b.clone()))?;
            let range = with_leading_chain(&tokens, b);
            let (ds, de) = deletion_bytes(hypothesis, &tokens, range);
            let mut out = String::new();
            out.push_str(&hypothesis[..ds]);
            if ds == 0 {
                out.push_str(&capitalize_first(&hypothesis[de..]));
            } else {
                out.push_str(&hypothesis[de..]);
            }
            Ok(out)
        }
        BranchId::NegBBranch => {
            let a = locate(&tokens, &pair.a).ok_or_else(|| RewriteError::NoMatch(pair.a.clone()))?;
            let b = locate(&tokens, &pair.b).ok_or_else(|| RewriteError::NoMatch(pair.b.clone()))?;
            let del = with_leading_chain(&tokens, a);
            if b.0 < del.1 && del.0 < b.1 {
                return Err(RewriteError::NoMatch(pair.b.clone()));
            }
            // b's own chain, not reaching into the deleted region.
            let chain_start = with_leading_chain(&tokens, b).0;
            let ins = if del.1 <= b.0 { chain_start.max(del.1) } else { chain_start };
            let negation = if ins > 0 && tokens[ins - 1].text.eq_ignore_ascii_case("not") { "" } else { "not " };
            let (ds, de) = deletion_bytes(hypothesis, &tokens, del);
            let ins_byte = tokens[ins].start;

            let mut out = String::new();
            if de <= ins_byte {
                // Deletion precedes the insertion point.
                let mut tail = String::new();
                tail.push_str(&hypothesis[de..ins_byte]);
                tail.push_str(negation);
                tail.push_str(&hypothesis[ins_byte..]);
                out.push_str(&hypothesis[..ds]);
                if ds == 0 {
                    out.push_str(&capitalize_first(&tail));
                } else {
                    out.push_str(&tail);
                }
            } else {
                let mut tail = String::new();
                tail.push_str(&hypothesis[ins_byte..ds]);
                tail.push_str(&hypothesis[de..]);
                out.push_str(&hypothesis[..ins_byte]);
                if ins_byte == 0 && !negation.is_empty() {
                    out.push_str("Not ");
                    out.push_str(&lowercase_first(&tail));
                } else {
                    out.push_str(negation);
                    out.push_str(&tail);
                }
            }
            Ok(out)
        }
        BranchId::Main => Err(RewriteError::WrongBranch(branch)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use NliLabel::*;

    #[test]
    fn relation_forms() {
        assert_eq!(relation_form(E), RelationForm::Equivalence);
        assert_eq!(relation_form(C), RelationForm::NegatedEquivalence);
        assert_eq!(relation_form(N), RelationForm::NegatedImplication);
        for l in NliLabel::ALL {
            assert_eq!(relation_form(l).label(), l);
        }
    }

    #[test]
    fn derivation_table() {
        assert_eq!(derive_counterfactual_labels(E), vec![(BranchId::Main, E)]);
        assert_eq!(derive_counterfactual_labels(C), vec![(BranchId::Main, E)]);
        assert_eq!(
            derive_counterfactual_labels(N),
            vec![(BranchId::ABranch, E), (BranchId::NegBBranch, N)]
        );
    }

    #[test]
    fn substitute_examples() {
        let p = SpanPair::manual("dog", "animal");
        assert_eq!(
            substitute_span("The dog is barking at the girl.", &p, false).unwrap(),
            "The animal is barking at the girl."
        );
        assert_eq!(
            substitute_span("The dog runs.", &SpanPair::manual("cat", "animal"), false),
            Err(RewriteError::NoMatch("cat".into()))
        );
        assert_eq!(substitute_span("Two dogs are barking.", &p, true).unwrap(), "Two animal are barking.");
        assert!(substitute_span("Two dogs are barking.", &p, false).is_err());
    }

    #[test]
    fn substitution_respects_token_boundaries_and_case() {
        let p = SpanPair::manual("man", "woman");
        assert!(substitute_span("A fireman waits.", &p, false).is_err());
        assert_eq!(substitute_span("Man waits.", &p, false).unwrap(), "Woman waits.");
        // Mid-sentence matching is case-sensitive.
        assert!(substitute_span("The Man waits.", &p, false).is_err());
        assert_eq!(
            substitute_span("A man and a man.", &p, false).unwrap(),
            "A woman and a woman."
        );
    }

    #[test]
    fn neutral_branch_examples() {
        let h = "A boy on a tire swing outside.";
        let p = SpanPair::manual("tire swing", "outside");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::ABranch).unwrap(), "A boy on a tire swing.");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::NegBBranch).unwrap(), "A boy not outside.");
        let missing = SpanPair::manual("tire swing", "indoors");
        assert_eq!(
            neutral_branch_rewrite(h, &missing, BranchId::ABranch),
            Err(RewriteError::NoMatch("indoors".into()))
        );
        assert!(neutral_branch_rewrite(h, &p, BranchId::Main).is_err());
    }

    #[test]
    fn neutral_branch_negates_prepositional_b() {
        let h = "The boy is on the tire swing outside.";
        let p = SpanPair::manual("outside", "tire swing");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::ABranch).unwrap(), "The boy is outside.");
        assert_eq!(
            neutral_branch_rewrite(h, &p, BranchId::NegBBranch).unwrap(),
            "The boy is not on the tire swing."
        );
        let p = SpanPair::manual("tire swing", "outside");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::ABranch).unwrap(), "The boy is on the tire swing.");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::NegBBranch).unwrap(), "The boy is not outside.");
    }

    #[test]
    fn neutral_branch_at_sentence_start() {
        let h = "Dogs play outside.";
        let p = SpanPair::manual("dogs", "outside");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::NegBBranch).unwrap(), "Play not outside.");
        let p = SpanPair::manual("outside", "dogs");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::ABranch).unwrap(), "Play outside.");
        assert_eq!(neutral_branch_rewrite(h, &p, BranchId::NegBBranch).unwrap(), "Not dogs play.");
    }

    const VOCAB_A: &[&str] = &["dog", "cat", "tire swing", "red car", "man"];
    const VOCAB_B: &[&str] = &["animal", "pet", "toy", "vehicle", "person"];
    const FILLER: &[&str] = &["is", "runs", "near", "big", "with", "slowly", "park", "yard"];

    fn sentence_with(a: &'static str) -> impl Strategy<Value = (String, String)> {
        (
            prop::collection::vec(prop::sample::select(FILLER), 0..4),
            prop::collection::vec(prop::sample::select(FILLER), 0..4),
        )
            .prop_map(move |(pre, post)| {
                let mut words: Vec<&str> = vec!["The"];
                words.extend(pre);
                words.push(a);
                words.extend(post);
                (format!("{}.", words.join(" ")), a.to_string())
            })
    }

    proptest! {
        #[test]
        fn output_never_contains_a(
            (h, a) in prop::sample::select(VOCAB_A).prop_flat_map(sentence_with),
            b in prop::sample::select(VOCAB_B),
            stem_match in any::<bool>(),
        ) {
            let pair = SpanPair::manual(&a, b);
            let out = substitute_span(&h, &pair, stem_match).unwrap();
            prop_assert!(!contains_span(&out, &a, stem_match));
        }

        #[test]
        fn edit_confined_to_replaced_region(
            (h, a) in prop::sample::select(VOCAB_A).prop_flat_map(sentence_with),
            b in prop::sample::select(VOCAB_B),
        ) {
            let pair = SpanPair::manual(&a, b);
            let out = substitute_span(&h, &pair, false).unwrap();
            let before: Vec<&str> = tokenize(&h).iter().map(|t| t.text).collect();
            let after: Vec<&str> = tokenize(&out).iter().map(|t| t.text).collect();
            let a_len = tokenize(&a).len();
            let b_len = tokenize(b).len();
            let start = before.iter().zip(&after).take_while(|(x, y)| x == y).count();
            prop_assert_eq!(&before[..start], &after[..start]);
            prop_assert_eq!(&before[start + a_len..], &after[start + b_len..]);
        }

        #[test]
        fn substitution_round_trips(
            (h, a) in prop::sample::select(VOCAB_A).prop_flat_map(sentence_with),
            b in prop::sample::select(VOCAB_B),
        ) {
            let fwd = substitute_span(&h, &SpanPair::manual(&a, b), false).unwrap();
            let back = substitute_span(&fwd, &SpanPair::manual(b, &a), false).unwrap();
            prop_assert_eq!(back, h);
        }
    }
}
