use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of the column indices `0..p` into non-overlapping groups.
///
/// Groups keep their own (sorted) index lists, so non-contiguous groups such
/// as the temporal groups of a Kronecker dictionary are represented directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    p: usize,
    group_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    p: usize,
    groups: Vec<Vec<usize>>,
}

impl TryFrom<PartitionRepr> for GroupPartition {
    type Error = Error;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        GroupPartition::from_groups(r.groups, r.p)
    }
}

impl From<GroupPartition> for PartitionRepr {
    fn from(p: GroupPartition) -> Self {
        PartitionRepr {
            p: p.p,
            groups: p.groups,
        }
    }
}

impl GroupPartition {
    /// Consecutive groups of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::EmptyPartition);
        }
        if let Some(g) = sizes.iter().position(|&d| d == 0) {
            return Err(Error::ZeroGroupSize { group: g });
        }
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &d in sizes {
            groups.push((start..start + d).collect());
            start += d;
        }
        Self::from_groups(groups, start)
    }

    /// `p` singleton groups, the plain Lasso case.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::contiguous(&vec![1; p])
    }

    /// Explicit index sets; must be a disjoint cover of `0..p`.
    pub fn from_groups(mut groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::EmptyPartition);
        }
        let mut group_of = vec![usize::MAX; p];
        for (g, set) in groups.iter_mut().enumerate() {
            if set.is_empty() {
                return Err(Error::ZeroGroupSize { group: g });
            }
            set.sort_unstable();
            for &j in set.iter() {
                if j >= p {
                    return Err(Error::ColumnOutOfRange { column: j, p });
                }
                if group_of[j] != usize::MAX {
                    return Err(Error::OverlappingGroups { column: j });
                }
                group_of[j] = g;
            }
        }
        if let Some(j) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::NonCoveringGroups { column: j, p });
        }
        Ok(Self {
            groups,
            p,
            group_of,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn size(&self, g: usize) -> usize {
        self.groups[g].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn d_min(&self) -> usize {
        self.groups.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn d_max(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn group_of(&self, column: usize) -> usize {
        self.group_of[column]
    }

    /// True when every group is a run `start..start+d` and groups appear in
    /// column order.
    pub fn is_contiguous(&self) -> bool {
        let mut next = 0;
        for set in &self.groups {
            for &j in set {
                if j != next {
                    return false;
                }
                next += 1;
            }
        }
        true
    }

    /// Columns of the given groups, concatenated in the order given.
    pub fn columns_of(&self, groups: &[usize]) -> Vec<usize> {
        groups
            .iter()
            .flat_map(|&g| self.groups[g].iter().copied())
            .collect()
    }

    /// Same groups listed in a new order: group `k` of the result is group
    /// `order[k]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.groups.len() {
            return Err(Error::DimensionMismatch {
                what: "group order length",
                expected: self.groups.len(),
                got: order.len(),
            });
        }
        let groups = order
            .iter()
            .map(|&g| {
                self.groups
                    .get(g)
                    .cloned()
                    .ok_or_else(|| Error::InvalidParameter(format!("group index {g} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_groups(groups, self.p)
    }

    /// This partition followed by `other`, whose columns are shifted by `p`.
    pub fn concat(&self, other: &GroupPartition) -> Self {
        let mut groups = self.groups.clone();
        groups.extend(
            other
                .groups
                .iter()
                .map(|set| set.iter().map(|j| j + self.p).collect()),
        );
        Self::from_groups(groups, self.p + other.p).expect("shifted union of partitions is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_pairs() {
        let p = GroupPartition::contiguous(&[2, 2]).unwrap();
        assert_eq!(p.num_groups(), 2);
        assert_eq!(p.group(0), &[0, 1]);
        assert_eq!(p.group(1), &[2, 3]);
        assert_eq!((p.d_min(), p.d_max()), (2, 2));
        assert!(p.is_contiguous());
    }

    #[test]
    fn singletons_are_the_lasso_case() {
        let p = GroupPartition::singletons(5).unwrap();
        assert_eq!(p.num_groups(), 5);
        assert_eq!((p.d_min(), p.d_max()), (1, 1));
    }

    #[test]
    fn explicit_non_contiguous() {
        let p = GroupPartition::from_groups(vec![vec![2, 0], vec![1]], 3).unwrap();
        assert_eq!(p.group(0), &[0, 2]);
        assert_eq!(p.group_of(1), 1);
        assert!(!p.is_contiguous());
    }

    #[test]
    fn validation_errors_are_distinct() {
        assert!(matches!(
            GroupPartition::contiguous(&[]),
            Err(Error::EmptyPartition)
        ));
        assert!(matches!(
            GroupPartition::contiguous(&[2, 0]),
            Err(Error::ZeroGroupSize { group: 1 })
        ));
        assert!(matches!(
            GroupPartition::from_groups(vec![vec![0, 1], vec![1, 2]], 3),
            Err(Error::OverlappingGroups { column: 1 })
        ));
        assert!(matches!(
            GroupPartition::from_groups(vec![vec![0], vec![2]], 3),
            Err(Error::NonCoveringGroups { column: 1, .. })
        ));
        assert!(matches!(
            GroupPartition::from_groups(vec![vec![0, 5]], 3),
            Err(Error::ColumnOutOfRange { column: 5, .. })
        ));
    }

    #[test]
    fn serde_validates() {
        let p = GroupPartition::from_groups(vec![vec![0, 2], vec![1]], 3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: GroupPartition = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<GroupPartition>(r#"{"p":3,"groups":[[0],[0,1,2]]}"#).is_err());
    }
}
