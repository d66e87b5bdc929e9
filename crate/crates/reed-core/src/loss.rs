//! Triplet-classification losses.
//!
//! The margin loss counts triplets whose true-label score fails to
//! beat the other label's score by at least `gamma`; the
//! classification loss is its `gamma = 0` indicator. Both are
//! averages of indicators (not differentiable); the hinge surrogate is
//! the differentiable stand-in the trainer optimizes, and it vanishes
//! exactly when the margin loss does.

use crate::decoder::ScorePair;
use crate::error::{Error, Result};

fn check_aligned(scores: &[ScorePair], labels: &[bool]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Argument(
            "loss of an empty triplet set is undefined".into(),
        ));
    }
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Fraction of triplets with `f[y] <= gamma + f[1-y]`.
pub fn margin_loss(scores: &[ScorePair], labels: &[bool], gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::Argument(format!(
            "margin gamma must be positive, found {gamma}"
        )));
    }
    check_aligned(scores, labels)?;
    let violations = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| s.get(y) <= gamma + s.get(!y))
        .count();
    Ok(violations as f64 / scores.len() as f64)
}

/// Fraction of triplets with `f[y] <= f[1-y]`.
pub fn classification_loss(scores: &[ScorePair], labels: &[bool]) -> Result<f64> {
    check_aligned(scores, labels)?;
    let violations = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| s.get(y) <= s.get(!y))
        .count();
    Ok(violations as f64 / scores.len() as f64)
}

/// Mean of `max(0, gamma + f[1-y] - f[y])`: differentiable, upper
/// bounds `gamma * classification_loss` pointwise, and vanishes
/// exactly where the margin loss does (away from the measure-zero
/// boundary `f[y] - f[1-y] = gamma`).
pub fn hinge_surrogate(scores: &[ScorePair], labels: &[bool], gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::Argument(format!(
            "margin gamma must be positive, found {gamma}"
        )));
    }
    check_aligned(scores, labels)?;
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| (gamma + s.get(!y) - s.get(y)).max(0.0))
        .sum();
    Ok(total / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(fy: f64, fother: f64, y: bool) -> (ScorePair, bool) {
        let sp = if y {
            ScorePair { s0: fother, s1: fy }
        } else {
            ScorePair { s0: fy, s1: fother }
        };
        (sp, y)
    }

    #[test]
    fn margin_loss_worked_examples() {
        let (a, ya) = pair(5.0, 1.0, true);
        assert_eq!(margin_loss(&[a], &[ya], 0.5).unwrap(), 0.0);

        let (b, yb) = pair(1.0, 1.0, false);
        assert_eq!(margin_loss(&[b], &[yb], 0.1).unwrap(), 1.0);

        assert_eq!(margin_loss(&[a, b], &[ya, yb], 0.5).unwrap(), 0.5);
    }

    #[test]
    fn classification_loss_worked_examples() {
        let (a, ya) = pair(2.0, 1.0, true);
        assert_eq!(classification_loss(&[a], &[ya]).unwrap(), 0.0);
        let (b, yb) = pair(1.0, 2.0, false);
        assert_eq!(classification_loss(&[b], &[yb]).unwrap(), 1.0);
    }

    #[test]
    fn hinge_worked_examples() {
        let (a, ya) = pair(5.0, 1.0, true); // slack: term 0
        assert_eq!(hinge_surrogate(&[a], &[ya], 0.5).unwrap(), 0.0);
        let (b, yb) = pair(0.0, 0.0, false); // tie: term gamma
        assert_eq!(hinge_surrogate(&[b], &[yb], 0.5).unwrap(), 0.5);
    }

    #[test]
    fn empty_inputs_error() {
        assert!(margin_loss(&[], &[], 0.5).is_err());
        assert!(classification_loss(&[], &[]).is_err());
        assert!(hinge_surrogate(&[], &[], 0.5).is_err());
        let (a, ya) = pair(1.0, 0.0, true);
        assert!(margin_loss(&[a], &[ya], 0.0).is_err());
    }

    proptest! {
        /// classification <= margin <= 1, hinge >= gamma * classification,
        /// margin == 0 forces hinge == 0, and away from the exact
        /// margin boundary hinge == 0 forces margin == 0.
        #[test]
        fn loss_ordering(
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..40),
            gamma in 0.01f64..3.0,
        ) {
            let scores: Vec<ScorePair> = raw.iter().map(|&(s0, s1, _)| ScorePair { s0, s1 }).collect();
            let labels: Vec<bool> = raw.iter().map(|&(_, _, y)| y).collect();
            let cls = classification_loss(&scores, &labels).unwrap();
            let margin = margin_loss(&scores, &labels, gamma).unwrap();
            let hinge = hinge_surrogate(&scores, &labels, gamma).unwrap();
            prop_assert!(cls <= margin);
            prop_assert!(margin <= 1.0);
            prop_assert!((0.0..=1.0).contains(&cls));
            prop_assert!(hinge + 1e-12 >= gamma * cls);
            if margin == 0.0 {
                prop_assert_eq!(hinge, 0.0);
            }
            let on_boundary = scores
                .iter()
                .zip(&labels)
                .any(|(s, &y)| s.get(y) - s.get(!y) == gamma);
            if hinge == 0.0 && !on_boundary {
                prop_assert_eq!(margin, 0.0);
            }
        }
    }
}
