//! Leakage-adjusted simulatability (LAS) and label-rationale association (LRA).

use serde::{Deserialize, Serialize};

use crate::error::ArgumentError;

/// Simulator correctness for one instance under the three input conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LasInputs {
    pub correct_with_x_and_e: bool,
    pub correct_with_x: bool,
    /// Correct from the explanation alone (label leakage).
    pub leak_k: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LasScores {
    pub las0: Option<f64>,
    pub las1: Option<f64>,
    pub las: Option<f64>,
}

/// Mean explanation benefit within each leakage group, then their average.
/// A group without rows has no score, and then neither has LAS.
pub fn las_scores(rows: &[LasInputs]) -> LasScores {
    let group = |k: bool| {
        let (sum, n) = rows
            .iter()
            .filter(|r| r.leak_k == k)
            .fold((0i64, 0usize), |(s, n), r| (s + r.correct_with_x_and_e as i64 - r.correct_with_x as i64, n + 1));
        (n > 0).then(|| sum as f64 / n as f64)
    };
    let (las0, las1) = (group(false), group(true));
    let las = las0.zip(las1).map(|(a, b)| (a + b) / 2.0);
    LasScores { las0, las1, las }
}

/// `F`: the label flipped under input noise. `Z`: simulatability delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LraInputs {
    pub f: i8,
    pub z: i8,
}

impl LraInputs {
    pub fn new(f: i8, z: i8) -> Result<Self, ArgumentError> {
        let r = LraInputs { f, z };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ArgumentError> {
        if !(0..=1).contains(&self.f) || !(-1..=1).contains(&self.z) {
            return Err(ArgumentError(format!("LRA row out of range: F={} Z={}", self.f, self.z)));
        }
        Ok(())
    }
}

/// Fraction of rows with `F == Z` (literal comparison, so `Z = -1` never matches).
pub fn lra_score(rows: &[LraInputs]) -> Result<f64, ArgumentError> {
    if rows.is_empty() {
        return Err(ArgumentError("LRA needs at least one row".into()));
    }
    for r in rows {
        r.validate()?;
    }
    Ok(rows.iter().filter(|r| r.f == r.z).count() as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(xe: u8, x: u8, k: u8) -> LasInputs {
        LasInputs { correct_with_x_and_e: xe == 1, correct_with_x: x == 1, leak_k: k == 1 }
    }

    #[test]
    fn las_examples() {
        let s = las_scores(&[row(1, 0, 0), row(1, 0, 0)]);
        assert_eq!((s.las0, s.las1, s.las), (Some(1.0), None, None));
        let s = las_scores(&[row(1, 0, 0), row(1, 1, 0), row(1, 1, 1), row(0, 1, 1)]);
        assert_eq!((s.las0, s.las1, s.las), (Some(0.5), Some(-0.5), Some(0.0)));
        let s = las_scores(&[row(1, 1, 0), row(0, 0, 1), row(1, 1, 1)]);
        assert_eq!(s.las, Some(0.0));
    }

    #[test]
    fn lra_examples() {
        let r = |f, z| LraInputs::new(f, z).unwrap();
        assert_eq!(lra_score(&[r(1, 1), r(1, 1)]).unwrap(), 1.0);
        assert_eq!(lra_score(&[r(1, 1), r(0, 0), r(1, 0), r(0, -1)]).unwrap(), 0.5);
        assert_eq!(lra_score(&[r(0, -1), r(0, -1)]).unwrap(), 0.0);
        assert!(lra_score(&[]).is_err());
        assert!(LraInputs::new(2, 0).is_err());
        assert!(lra_score(&[LraInputs { f: 0, z: 3 }]).is_err());
    }

    /// The formula blocks written out term by term.
    fn las_reference(rows: &[(u8, u8, u8)]) -> (Option<f64>, Option<f64>, Option<f64>) {
        let n0 = rows.iter().filter(|r| r.2 == 0).count();
        let n1 = rows.iter().filter(|r| r.2 == 1).count();
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for &(xe, x, k) in rows {
            let term = (xe == 1) as i32 as f64 - (x == 1) as i32 as f64;
            if k == 0 {
                s0 += term;
            } else {
                s1 += term;
            }
        }
        let l0 = if n0 == 0 { None } else { Some(s0 / n0 as f64) };
        let l1 = if n1 == 0 { None } else { Some(s1 / n1 as f64) };
        let l = match (l0, l1) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            _ => None,
        };
        (l0, l1, l)
    }

    fn lra_reference(rows: &[(i8, i8)]) -> f64 {
        let mut hits = 0;
        for &(f, z) in rows {
            if f as i32 == z as i32 {
                hits += 1;
            }
        }
        hits as f64 / rows.len() as f64
    }

    #[test]
    fn matches_formula_transcription_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=12);
            let raw: Vec<(u8, u8, u8)> = (0..n).map(|_| (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2))).collect();
            let rows: Vec<LasInputs> = raw.iter().map(|&(a, b, c)| row(a, b, c)).collect();
            let s = las_scores(&rows);
            assert_eq!((s.las0, s.las1, s.las), las_reference(&raw));

            let raw: Vec<(i8, i8)> = (0..n).map(|_| (rng.gen_range(0..2), rng.gen_range(-1..2))).collect();
            let rows: Vec<LraInputs> = raw.iter().map(|&(f, z)| LraInputs::new(f, z).unwrap()).collect();
            assert_eq!(lra_score(&rows).unwrap(), lra_reference(&raw));
        }
    }
}
