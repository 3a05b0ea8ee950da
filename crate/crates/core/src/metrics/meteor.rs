//! METEOR with exact and stem matching stages (no synonym stage).

use crate::rewrite::stem::stem;
use crate::text::words_lower;

const ALPHA: f64 = 0.9;
const BETA: f64 = 3.0;
const GAMMA: f64 = 0.5;

/// Best score over the references. An empty candidate (or no reference) scores 0.
pub fn meteor(candidate: &str, references: &[&str]) -> f64 {
    references.iter().map(|r| meteor_single(candidate, r)).fold(0.0, f64::max)
}

pub fn meteor_single(candidate: &str, reference: &str) -> f64 {
    let hyp = words_lower(candidate);
    let refw = words_lower(reference);
    if hyp.is_empty() || refw.is_empty() {
        return 0.0;
    }
    let alignment = align(&hyp, &refw);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / refw.len() as f64;
    let fmean = p * r / (ALPHA * p + (1.0 - ALPHA) * r);
    let frag = chunks(&alignment) as f64 / m as f64;
    fmean * (1.0 - GAMMA * frag.powf(BETA))
}

/// Number of runs of matches contiguous and in the same order on both sides.
pub fn chunks(alignment: &[(usize, usize)]) -> usize {
    let mut sorted = alignment.to_vec();
    sorted.sort_unstable();
    let mut count = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(i, j) in &sorted {
        match prev {
            Some((pi, pj)) if i == pi + 1 && j == pj + 1 => {}
            _ => count += 1,
        }
        prev = Some((i, j));
    }
    count
}

/// Exact stage then stem stage. Each stage is run greedily in both directions
/// and the alignment with fewer chunks is kept.
fn align(hyp: &[String], refw: &[String]) -> Vec<(usize, usize)> {
    let hyp_stems: Vec<String> = hyp.iter().map(|w| stem(w)).collect();
    let ref_stems: Vec<String> = refw.iter().map(|w| stem(w)).collect();
    let mut best: Option<Vec<(usize, usize)>> = None;
    for reverse in [false, true] {
        let mut pairs = Vec::new();
        let mut hyp_used = vec![false; hyp.len()];
        let mut ref_used = vec![false; refw.len()];
        greedy_stage(hyp, refw, reverse, &mut hyp_used, &mut ref_used, &mut pairs);
        greedy_stage(&hyp_stems, &ref_stems, reverse, &mut hyp_used, &mut ref_used, &mut pairs);
        let better = match &best {
            None => true,
            Some(b) => pairs.len() > b.len() || (pairs.len() == b.len() && chunks(&pairs) < chunks(b)),
        };
        if better {
            best = Some(pairs);
        }
    }
    best.unwrap_or_default()
}

fn greedy_stage(
    hyp: &[String],
    refw: &[String],
    reverse: bool,
    hyp_used: &mut [bool],
    ref_used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
) {
    let order: Vec<usize> = if reverse { (0..hyp.len()).rev().collect() } else { (0..hyp.len()).collect() };
    for i in order {
        if hyp_used[i] {
            continue;
        }
        let free = |j: usize| !ref_used[j] && refw[j] == hyp[i];
        // Prefer extending the chunk of a matched neighbour.
        let neighbour = pairs.iter().find_map(|&(pi, pj)| {
            if pi + 1 == i && pj + 1 < refw.len() && free(pj + 1) {
                Some(pj + 1)
            } else if i + 1 == pi && pj > 0 && free(pj - 1) {
                Some(pj - 1)
            } else {
                None
            }
        });
        let pick = neighbour.or_else(|| {
            if reverse {
                (0..refw.len()).rev().find(|&j| free(j))
            } else {
                (0..refw.len()).find(|&j| free(j))
            }
        });
        if let Some(j) = pick {
            hyp_used[i] = true;
            ref_used[j] = true;
            pairs.push((i, j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_three_tokens() {
        assert_abs_diff_eq!(meteor("a dog runs", &["a dog runs"]), 1.0 - 0.5 / 27.0, epsilon = 1e-12);
        assert_abs_diff_eq!(meteor("a dog runs", &["a dog runs"]), 0.9815, epsilon = 1e-4);
    }

    #[test]
    fn lowercasing_and_degenerate_inputs() {
        assert_eq!(meteor("A Dog runs", &["a dog runs"]), meteor("a dog runs", &["a dog runs"]));
        assert_eq!(meteor("cats sleep", &["a dog runs"]), 0.0);
        assert_eq!(meteor("", &["a dog runs"]), 0.0);
        assert_eq!(meteor("a dog", &[]), 0.0);
    }

    #[test]
    fn stem_stage_matches_inflections() {
        let exact = meteor("the dog runs", &["the dog runs"]);
        let stemmed = meteor("the dogs running", &["the dog runs"]);
        assert_abs_diff_eq!(stemmed, exact, epsilon = 1e-12);
    }

    #[test]
    fn multi_reference_takes_the_max_and_is_order_free() {
        let refs = ["a cat sleeps", "a dog runs fast", "the dog runs"];
        let best = meteor("a dog runs", &refs);
        let single = refs.iter().map(|r| meteor_single("a dog runs", r)).fold(0.0, f64::max);
        assert_eq!(best, single);
        let mut rev = refs;
        rev.reverse();
        assert_eq!(meteor("a dog runs", &rev), best);
        assert_eq!(meteor("a dog runs", &["the dog runs"; 3]), meteor_single("a dog runs", "the dog runs"));
    }

    #[test]
    fn fragmentation_penalty() {
        // Two chunks out of four matches.
        let s = meteor("runs dog a fast", &["a dog runs fast"]);
        assert!(s < meteor("a dog runs fast", &["a dog runs fast"]));
        assert_eq!(chunks(&[(0, 2), (1, 1), (2, 0), (3, 3)]), 4);
        assert_eq!(chunks(&[(0, 0), (1, 1), (3, 3)]), 2);
    }
}
