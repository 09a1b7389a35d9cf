use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-empty group `u` of input coordinates, stored 0-based and sorted.
///
/// Externally (config files, CLI flags, reports) indices are 1-based; use
/// [`SubsetIndex::from_one_based`] and [`SubsetIndex::one_based`] at that boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsetIndex {
    members: Vec<usize>,
    dims: usize,
}

impl SubsetIndex {
    pub fn new(mut members: Vec<usize>, dims: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Contract("subset must not be empty".into()));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract(format!(
                "subset {members:?} repeats an index"
            )));
        }
        if let Some(&max) = members.last() {
            if max >= dims {
                return Err(Error::Contract(format!(
                    "index {} out of range for {dims} inputs",
                    max + 1
                )));
            }
        }
        Ok(SubsetIndex { members, dims })
    }

    pub fn from_one_based(indices: &[usize], dims: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::Contract(
                "indices are 1-based; 0 is not valid".into(),
            ));
        }
        SubsetIndex::new(indices.iter().map(|i| i - 1).collect(), dims)
    }

    pub fn full(dims: usize) -> Result<Self> {
        SubsetIndex::new((0..dims).collect(), dims)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.members.iter().map(|i| i + 1).collect()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.dims).filter(|i| !self.contains(*i)).collect()
    }

    /// The complement as a subset, or `None` when `u` is the full set.
    pub fn complement_subset(&self) -> Option<SubsetIndex> {
        let c = self.complement();
        if c.is_empty() {
            None
        } else {
            Some(SubsetIndex {
                members: c,
                dims: self.dims,
            })
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.dims
    }

    /// Formats as `{1,3}` using 1-based indices.
    pub fn label(&self) -> String {
        let inner: Vec<String> = self.one_based().iter().map(usize::to_string).collect();
        format!("{{{}}}", inner.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_based_conversion() {
        let u = SubsetIndex::from_one_based(&[3, 1], 4).unwrap();
        assert_eq!(u.members(), &[0, 2]);
        assert_eq!(u.complement(), vec![1, 3]);
        assert_eq!(u.label(), "{1,3}");
    }

    #[test]
    fn rejects_bad_subsets() {
        assert!(SubsetIndex::from_one_based(&[3], 2).is_err());
        assert!(SubsetIndex::from_one_based(&[0], 2).is_err());
        assert!(SubsetIndex::from_one_based(&[1, 1], 2).is_err());
        assert!(SubsetIndex::new(vec![], 2).is_err());
    }

    #[test]
    fn full_set_has_no_complement() {
        let u = SubsetIndex::full(3).unwrap();
        assert!(u.is_full());
        assert!(u.complement_subset().is_none());
    }

    proptest! {
        #[test]
        fn partition(dims in 1usize..12, mask in any::<u16>()) {
            let members: Vec<usize> = (0..dims).filter(|i| mask & (1 << i) != 0).collect();
            prop_assume!(!members.is_empty());
            let u = SubsetIndex::new(members, dims).unwrap();
            let mut all: Vec<usize> = u.members().to_vec();
            all.extend(u.complement());
            all.sort_unstable();
            prop_assert_eq!(all, (0..dims).collect::<Vec<_>>());
            prop_assert!(u.members().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
