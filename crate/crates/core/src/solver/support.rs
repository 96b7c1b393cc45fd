use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GroupSparseSignal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecovery {
    pub declared: Vec<usize>,
    pub exact_match: bool,
    /// `|declared ∩ truth| / |declared|`, 1 when nothing is declared.
    pub precision: f64,
    /// `|declared ∩ truth| / |truth|`, 1 when the truth is empty.
    pub recall: f64,
}

/// Declares group `g` nonzero when `‖β̂_g‖ > ε_p‖β*_g‖`. Groups that are
/// zero in the truth use `ε_p·max_g‖β*_g‖` instead, and an all-zero truth
/// falls back to the absolute threshold `ε_p`.
pub fn extract_group_support(
    estimate: &[f64],
    truth: &GroupSparseSignal,
    epsilon_p: f64,
) -> Result<SupportRecovery> {
    let part = truth.partition();
    if estimate.len() != part.p() {
        return Err(Error::DimensionMismatch {
            what: "estimate length",
            expected: part.p(),
            got: estimate.len(),
        });
    }
    if !(epsilon_p > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon_p must be positive, got {epsilon_p}")));
    }
    let truth_norms = truth.group_norms();
    let max_truth = truth_norms.iter().copied().fold(0.0, f64::max);
    let zero_threshold = if max_truth > 0.0 { epsilon_p * max_truth } else { epsilon_p };
    let declared: Vec<usize> = (0..part.num_groups())
        .filter(|&g| {
            let est = crate::linalg::norm2_at(estimate, part.group(g));
            let threshold = if truth_norms[g] > 0.0 { epsilon_p * truth_norms[g] } else { zero_threshold };
            est > threshold
        })
        .collect();
    let hits = declared.iter().filter(|&&g| truth_norms[g] > 0.0).count();
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(SupportRecovery {
        exact_match: declared == truth.support(),
        precision: ratio(hits, declared.len()),
        recall: ratio(hits, truth.support().len()),
        declared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::GroupPartition;

    fn truth() -> GroupSparseSignal {
        let part = GroupPartition::contiguous(&[2, 2, 2]).unwrap();
        GroupSparseSignal::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 2.0], part).unwrap()
    }

    #[test]
    fn exact_estimate() {
        let t = truth();
        let r = extract_group_support(t.coefficients(), &t, 1e-6).unwrap();
        assert!(r.exact_match);
        assert_eq!((r.precision, r.recall), (1.0, 1.0));
    }

    #[test]
    fn zero_estimate_has_no_recall() {
        let r = extract_group_support(&[0.0; 6], &truth(), 1e-6).unwrap();
        assert_eq!(r.recall, 0.0);
        assert!(!r.exact_match);
    }

    #[test]
    fn tiny_spurious_group_is_suppressed() {
        let part = GroupPartition::contiguous(&[2, 2]).unwrap();
        let t = GroupSparseSignal::new(vec![1.0, 0.0, 0.0, 0.0], part).unwrap();
        let r = extract_group_support(&[0.9, 0.0, 1e-9, 0.0], &t, 1e-6).unwrap();
        assert!(r.exact_match);
        let r = extract_group_support(&[0.9, 0.0, 1e-3, 0.0], &t, 1e-6).unwrap();
        assert_eq!(r.declared, vec![0, 1]);
        assert_eq!(r.precision, 0.5);
    }

    #[test]
    fn all_zero_truth_uses_absolute_threshold() {
        let t = GroupSparseSignal::zeros(GroupPartition::contiguous(&[1, 1]).unwrap());
        assert!(extract_group_support(&[1e-7, 0.0], &t, 1e-6).unwrap().exact_match);
        assert!(!extract_group_support(&[1e-5, 0.0], &t, 1e-6).unwrap().exact_match);
    }
}
